//! Honest provers, verifier check phases, and single-round execution.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::commit::{ProverSecret, Trit};
use crate::dist::{sample_base, sample_committed, sample_triple, Epsilon, Question};
use crate::error::ProtocolError;
use crate::graph::{edge_relation, Edge, EdgeRelation, Graph, Vertex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    /// Two provers, raw colors.
    Std2,
    /// Two provers, committed colors.
    Loc2,
    /// Three provers: the committed protocol plus a consistency prover.
    Qnl3,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Std2, Protocol::Loc2, Protocol::Qnl3];

    pub fn arity(self) -> usize {
        match self {
            Protocol::Std2 | Protocol::Loc2 => 2,
            Protocol::Qnl3 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Std2 => "std2",
            Protocol::Loc2 => "loc2",
            Protocol::Qnl3 => "qnl3",
        }
    }

    pub fn is_committed(self) -> bool {
        self != Protocol::Std2
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| ProtocolError::Parse(format!("unknown protocol `{s}`")))
    }
}

/// What one prover is asked: a bare edge (unmasked protocol) or an edge
/// with commitment randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Query {
    Plain(Edge),
    Committed(Question),
}

impl Query {
    pub fn edge(&self) -> Edge {
        match self {
            Query::Plain(e) => *e,
            Query::Committed(q) => q.edge,
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Query::Plain(e) => write!(f, "e={e}"),
            Query::Committed(q) => q.fmt(f),
        }
    }
}

impl FromStr for Query {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        if trimmed.contains(' ') {
            return trimmed.parse().map(Query::Committed);
        }
        trimmed
            .strip_prefix("e=")
            .and_then(|e| e.parse().ok())
            .map(Query::Plain)
            .ok_or_else(|| ProtocolError::Parse(format!("bad question token `{s}`")))
    }
}

/// A prover's reply: the values for the lower and higher endpoint (colors
/// in the unmasked protocol, commitments otherwise), or a refusal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Answer {
    Committed(Trit, Trit),
    Refused,
}

impl Answer {
    /// The value reported for vertex `v` of `edge`.
    pub fn value_for(&self, edge: Edge, v: Vertex) -> Option<Trit> {
        match *self {
            Answer::Committed(lo, _) if v == edge.lo() => Some(lo),
            Answer::Committed(_, hi) if v == edge.hi() => Some(hi),
            _ => None,
        }
    }

    /// All nine non-refusal answers in lexicographic order.
    pub fn all_committed() -> impl Iterator<Item = Answer> {
        Trit::ALL.into_iter().flat_map(|a| Trit::ALL.into_iter().map(move |b| Answer::Committed(a, b)))
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Answer::Committed(a, b) => write!(f, "{a} {b}"),
            Answer::Refused => f.write_str("REFUSE"),
        }
    }
}

impl crate::dist::Token for Answer {
    fn token(&self) -> String {
        self.to_string()
    }
}

impl FromStr for Answer {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "REFUSE" {
            return Ok(Answer::Refused);
        }
        let bad = || ProtocolError::Parse(format!("bad answer token `{s}`"));
        let fields: Vec<&str> = s.split_whitespace().collect();
        let [a, b] = fields.as_slice() else {
            return Err(bad());
        };
        let trit = |t: &str| t.parse::<u8>().ok().and_then(|v| Trit::try_new(v).ok()).ok_or_else(bad);
        Ok(Answer::Committed(trit(a)?, trit(b)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VerdictReason {
    AllPassed,
    EdgeVerificationFailed,
    WellDefinitionFailed,
    ConsistencyFailed,
    ProverRefused,
    /// A prover answered after the round deadline (network execution only).
    DeadlineExceeded,
}

impl VerdictReason {
    const TOKENS: [(VerdictReason, &'static str); 6] = [
        (VerdictReason::AllPassed, "ALL_PASSED"),
        (VerdictReason::EdgeVerificationFailed, "EDGE_VERIFICATION_FAILED"),
        (VerdictReason::WellDefinitionFailed, "WELL_DEFINITION_FAILED"),
        (VerdictReason::ConsistencyFailed, "CONSISTENCY_FAILED"),
        (VerdictReason::ProverRefused, "PROVER_REFUSED"),
        (VerdictReason::DeadlineExceeded, "DEADLINE_EXCEEDED"),
    ];

    pub fn token(self) -> &'static str {
        Self::TOKENS.iter().find(|(r, _)| *r == self).map(|(_, t)| *t).expect("listed")
    }
}

impl FromStr for VerdictReason {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::TOKENS
            .iter()
            .find(|(_, t)| *t == s)
            .map(|(r, _)| *r)
            .ok_or_else(|| ProtocolError::Parse(format!("unknown verdict reason `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Verdict {
    pub accepted: bool,
    pub reason: VerdictReason,
}

impl Verdict {
    pub const ACCEPT: Verdict = Verdict { accepted: true, reason: VerdictReason::AllPassed };

    pub fn reject(reason: VerdictReason) -> Self {
        Verdict { accepted: false, reason }
    }

    fn when(ok: bool, reason: VerdictReason) -> Self {
        if ok {
            Verdict::ACCEPT
        } else {
            Verdict::reject(reason)
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.accepted { "ACCEPT" } else { "REJECT" };
        write!(f, "{tag} {}", self.reason.token())
    }
}

impl FromStr for Verdict {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ProtocolError::Parse(format!("bad verdict token `{s}`"));
        let (tag, reason) = s.trim().split_once(' ').ok_or_else(bad)?;
        let reason: VerdictReason = reason.trim().parse()?;
        let accepted = match tag {
            "ACCEPT" => true,
            "REJECT" => false,
            _ => return Err(bad()),
        };
        if accepted != (reason == VerdictReason::AllPassed) {
            return Err(bad());
        }
        Ok(Verdict { accepted, reason })
    }
}

/// Anything that answers prover questions.
pub trait Prover {
    fn answer(&self, query: &Query) -> Answer;
}

impl<F: Fn(&Query) -> Answer> Prover for F {
    fn answer(&self, query: &Query) -> Answer {
        self(query)
    }
}

/// A prover following the protocol with a pre-agreed secret.
#[derive(Debug, Clone, Copy)]
pub struct HonestProver<'a> {
    pub graph: &'a Graph,
    pub secret: &'a ProverSecret,
}

impl<'a> HonestProver<'a> {
    pub fn new(graph: &'a Graph, secret: &'a ProverSecret) -> Self {
        HonestProver { graph, secret }
    }
}

impl Prover for HonestProver<'_> {
    fn answer(&self, query: &Query) -> Answer {
        match query {
            Query::Plain(e) => honest_answer_std(self.graph, self.secret, *e),
            Query::Committed(q) => honest_answer_committed(self.graph, self.secret, q),
        }
    }
}

/// Raw colors of both endpoints, or a refusal for non-edges.
pub fn honest_answer_std(g: &Graph, secret: &ProverSecret, edge: Edge) -> Answer {
    if g.has_edge(edge) {
        Answer::Committed(secret.color(edge.lo()), secret.color(edge.hi()))
    } else {
        Answer::Refused
    }
}

/// `(b_i·r + c_i, b_j·s + c_j)`, or a refusal for non-edges.
pub fn honest_answer_committed(g: &Graph, secret: &ProverSecret, q: &Question) -> Answer {
    if g.has_edge(q.edge) {
        Answer::Committed(secret.commit_vertex(q.edge.lo(), q.r), secret.commit_vertex(q.edge.hi(), q.s))
    } else {
        Answer::Refused
    }
}

/// Refusals on real edges reject. Returns `Some(verdict)` when the round is
/// decided before the protocol tests run: a refusal on an edge of `g`, or a
/// non-edge question that has no test attached.
fn screen_refusals(g: &Graph, edges: &[Edge], answers: &[Answer]) -> Option<Verdict> {
    let refused_edge = edges.iter().zip(answers).any(|(e, a)| *a == Answer::Refused && g.has_edge(*e));
    if refused_edge {
        return Some(Verdict::reject(VerdictReason::ProverRefused));
    }
    if edges.iter().any(|e| !g.has_edge(*e)) {
        return Some(Verdict::ACCEPT);
    }
    None
}

fn committed_pair(a: Answer) -> (Trit, Trit) {
    match a {
        Answer::Committed(x, y) => (x, y),
        Answer::Refused => unreachable!("refusals are screened first"),
    }
}

/// Check phase of the unmasked two-prover protocol.
pub fn check_std2(g: &Graph, q: [Edge; 2], a: [Answer; 2]) -> Verdict {
    if let Some(v) = screen_refusals(g, &q, &a) {
        return v;
    }
    let (ci, cj) = committed_pair(a[0]);
    let (ci2, cj2) = committed_pair(a[1]);
    match edge_relation(q[0], q[1]) {
        EdgeRelation::Same => Verdict::when(ci == ci2 && cj == cj2 && ci != cj, VerdictReason::EdgeVerificationFailed),
        EdgeRelation::SharedVertex(h) => {
            Verdict::when(a[0].value_for(q[0], h) == a[1].value_for(q[1], h), VerdictReason::WellDefinitionFailed)
        }
        EdgeRelation::Disjoint => Verdict::ACCEPT,
    }
}

/// `(a, b) ≠≠ (c, d)`: both components differ.
fn both_differ<T: PartialEq>(a: (T, T), b: (T, T)) -> bool {
    a.0 != b.0 && a.1 != b.1
}

/// Check phase of the two-prover committed protocol.
pub fn check_loc2(g: &Graph, q: [Question; 2], a: [Answer; 2]) -> Verdict {
    let edges = [q[0].edge, q[1].edge];
    if let Some(v) = screen_refusals(g, &edges, &a) {
        return v;
    }
    let (wi, wj) = committed_pair(a[0]);
    let (wi2, wj2) = committed_pair(a[1]);
    let (q1, q2) = (q[0], q[1]);
    match edge_relation(q1.edge, q2.edge) {
        EdgeRelation::Same if both_differ((q1.r, q1.s), (q2.r, q2.s)) => {
            Verdict::when(wi + wi2 != wj + wj2, VerdictReason::EdgeVerificationFailed)
        }
        EdgeRelation::Same => Verdict::when(
            (wi == wi2 || q1.r != q2.r) && (wj == wj2 || q1.s != q2.s),
            VerdictReason::WellDefinitionFailed,
        ),
        EdgeRelation::SharedVertex(h) => {
            // The shared vertex may sit in different slots of the two
            // questions; compare the randomness that actually masks it.
            let r1 = q1.randomness_for(h).expect("shared endpoint");
            let r2 = q2.randomness_for(h).expect("shared endpoint");
            if r1 == r2 {
                Verdict::when(
                    a[0].value_for(q1.edge, h) == a[1].value_for(q2.edge, h),
                    VerdictReason::WellDefinitionFailed,
                )
            } else {
                Verdict::ACCEPT
            }
        }
        EdgeRelation::Disjoint => Verdict::ACCEPT,
    }
}

/// Check phase of the three-prover protocol: the third prover must repeat
/// the answer of every prover whose question it received, then the
/// two-prover checks apply to the first two answers.
pub fn check_qnl3(g: &Graph, q: [Question; 3], a: [Answer; 3]) -> Verdict {
    let edges = [q[0].edge, q[1].edge, q[2].edge];
    let refused_edge = edges.iter().zip(&a).any(|(e, ans)| *ans == Answer::Refused && g.has_edge(*e));
    if refused_edge {
        return Verdict::reject(VerdictReason::ProverRefused);
    }
    for k in 0..2 {
        if q[2] == q[k] && a[2] != a[k] {
            return Verdict::reject(VerdictReason::ConsistencyFailed);
        }
    }
    check_loc2(g, [q[0], q[1]], [a[0], a[1]])
}

/// Dispatches to the check phase matching the shape of `questions`.
pub fn check(g: &Graph, protocol: Protocol, questions: &[Query], answers: &[Answer]) -> Result<Verdict, ProtocolError> {
    let arity_err = || ProtocolError::Arity {
        protocol: protocol.to_string(),
        expected: protocol.arity(),
        found: questions.len().min(answers.len()),
    };
    if questions.len() != protocol.arity() || answers.len() != protocol.arity() {
        return Err(arity_err());
    }
    let committed = |k: usize| match questions[k] {
        Query::Committed(q) => Ok(q),
        Query::Plain(_) => Err(ProtocolError::TableKind(protocol.to_string())),
    };
    Ok(match protocol {
        Protocol::Std2 => {
            let plain = |k: usize| match questions[k] {
                Query::Plain(e) => Ok(e),
                Query::Committed(_) => Err(ProtocolError::TableKind(protocol.to_string())),
            };
            check_std2(g, [plain(0)?, plain(1)?], [answers[0], answers[1]])
        }
        Protocol::Loc2 => check_loc2(g, [committed(0)?, committed(1)?], [answers[0], answers[1]]),
        Protocol::Qnl3 => {
            check_qnl3(g, [committed(0)?, committed(1)?, committed(2)?], [answers[0], answers[1], answers[2]])
        }
    })
}

/// Draws the verifier's questions for one round.
pub fn sample_questions<R: Rng + ?Sized>(g: &Graph, protocol: Protocol, eps: Epsilon, rng: &mut R) -> Vec<Query> {
    match protocol {
        Protocol::Std2 => sample_base(g, eps, rng).map(Query::Plain).to_vec(),
        Protocol::Loc2 => sample_committed(g, eps, rng).map(Query::Committed).to_vec(),
        Protocol::Qnl3 => sample_triple(g, eps, rng).map(Query::Committed).to_vec(),
    }
}

/// One round: questions, answers and the verifier's verdict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub protocol: Protocol,
    pub epsilon: Epsilon,
    pub seed: u64,
    pub questions: Vec<Query>,
    pub answers: Vec<Answer>,
    pub verdict: Verdict,
}

impl Transcript {
    fn fields(&self) -> Vec<String> {
        let mut fields = vec![format!("{} {} {}", self.protocol, self.epsilon, self.seed)];
        fields.extend(self.questions.iter().map(ToString::to_string));
        fields.extend(self.answers.iter().map(ToString::to_string));
        fields.push(self.verdict.to_string());
        fields
    }

    /// Tab-separated form of the same tokens.
    pub fn to_tsv(&self) -> String {
        self.fields().join("\t")
    }

    pub fn from_tsv(line: &str) -> Result<Self, ProtocolError> {
        Self::from_fields(line.split('\t').collect())
    }

    fn from_fields(fields: Vec<&str>) -> Result<Self, ProtocolError> {
        let bad = |why: &str| ProtocolError::Parse(format!("transcript: {why}"));
        let header: Vec<&str> = fields.first().ok_or_else(|| bad("empty"))?.split_whitespace().collect();
        let [proto, eps, seed] = header.as_slice() else {
            return Err(bad("header must be `PROTO eps seed`"));
        };
        let protocol: Protocol = proto.parse()?;
        let k = protocol.arity();
        if fields.len() != 2 + 2 * k {
            return Err(bad("wrong number of fields for protocol arity"));
        }
        let questions = fields[1..=k].iter().map(|t| t.parse()).collect::<Result<Vec<Query>, _>>()?;
        if questions.iter().any(|q| matches!(q, Query::Plain(_)) == protocol.is_committed()) {
            return Err(bad("question shape does not match protocol"));
        }
        Ok(Transcript {
            protocol,
            epsilon: eps.parse()?,
            seed: seed.parse().map_err(|_| bad("bad seed"))?,
            questions,
            answers: fields[k + 1..=2 * k].iter().map(|t| t.parse()).collect::<Result<_, _>>()?,
            verdict: fields[2 * k + 1].parse()?,
        })
    }
}

impl fmt::Display for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.fields().join(" | "))
    }
}

impl FromStr for Transcript {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_fields(s.split(" | ").collect())
    }
}

/// Runs one round with questions drawn from `crate::seeded_rng(seed)`.
pub fn run_round(
    g: &Graph,
    protocol: Protocol,
    eps: Epsilon,
    seed: u64,
    provers: &[&dyn Prover],
) -> Result<Transcript, ProtocolError> {
    if provers.len() != protocol.arity() {
        return Err(ProtocolError::Arity {
            protocol: protocol.to_string(),
            expected: protocol.arity(),
            found: provers.len(),
        });
    }
    let mut rng = crate::seeded_rng(seed);
    let questions = sample_questions(g, protocol, eps, &mut rng);
    let answers: Vec<Answer> = questions.iter().zip(provers).map(|(q, p)| p.answer(q)).collect();
    let verdict = check(g, protocol, &questions, &answers)?;
    Ok(Transcript { protocol, epsilon: eps, seed, questions, answers, verdict })
}
