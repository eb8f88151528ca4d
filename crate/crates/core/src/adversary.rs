//! Deterministic cheating provers and classical game values.
//!
//! A classical prover strategy in a single-round game can be taken
//! deterministic without loss, so a strategy is a table from questions to
//! answers. [`Game`] compiles a protocol's question distribution into
//! integer weights over a common denominator, which keeps acceptance
//! probabilities exact while evaluating millions of table combinations.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rand::Rng;
use rayon::prelude::*;

use crate::commit::{commit, NonzeroTrit, ProverSecret, Trit};
use crate::dist::{pmf_base, pmf_committed, pmf_triple, Epsilon, Question, Rational};
use crate::engine::{check_loc2, check_qnl3, check_std2, Answer, Protocol, Prover, Query};
use crate::error::ProtocolError;
use crate::graph::{Edge, Graph, Vertex};

/// Edge limit for [`exact_value_std2`].
pub const EXACT_STD2_EDGE_LIMIT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TableKind {
    /// One answer per edge.
    Plain,
    /// One answer per edge and randomness pair `(r, s)`.
    Committed,
}

impl TableKind {
    pub fn for_protocol(protocol: Protocol) -> Self {
        if protocol.is_committed() {
            TableKind::Committed
        } else {
            TableKind::Plain
        }
    }

    fn per_edge(self) -> usize {
        match self {
            TableKind::Plain => 1,
            TableKind::Committed => 4,
        }
    }
}

/// The question domain of one prover, in table index order.
pub fn question_domain(g: &Graph, kind: TableKind) -> Vec<Query> {
    match kind {
        TableKind::Plain => g.edges().iter().map(|e| Query::Plain(*e)).collect(),
        TableKind::Committed => g.edges().iter().flat_map(|e| Question::all_on(*e).map(Query::Committed)).collect(),
    }
}

/// A deterministic prover: one answer pair for every question whose edge
/// belongs to the graph. Questions on non-edges are refused.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StrategyTable {
    kind: TableKind,
    edges: Vec<Edge>,
    answers: Vec<(Trit, Trit)>,
}

impl StrategyTable {
    pub fn constant(g: &Graph, kind: TableKind, answer: (Trit, Trit)) -> Self {
        StrategyTable { kind, edges: g.edges().to_vec(), answers: vec![answer; g.edge_count() * kind.per_edge()] }
    }

    /// Builds a table from any answer function over the question domain.
    pub fn from_fn(g: &Graph, kind: TableKind, mut f: impl FnMut(&Query) -> (Trit, Trit)) -> Self {
        let answers = question_domain(g, kind).iter().map(&mut f).collect();
        StrategyTable { kind, edges: g.edges().to_vec(), answers }
    }

    /// Builds a table from a flat answer list in domain order.
    pub fn from_answers(g: &Graph, kind: TableKind, answers: Vec<(Trit, Trit)>) -> Result<Self, ProtocolError> {
        let expected = g.edge_count() * kind.per_edge();
        if answers.len() != expected {
            let missing = question_domain(g, kind)
                .get(answers.len().min(expected))
                .map_or_else(|| "extra entries".to_string(), ToString::to_string);
            return Err(ProtocolError::NotTotal(missing));
        }
        Ok(StrategyTable { kind, edges: g.edges().to_vec(), answers })
    }

    /// What honest provers would answer with `secret`.
    pub fn honest(g: &Graph, kind: TableKind, secret: &ProverSecret) -> Self {
        Self::from_assignment(g, kind, secret.coloring().as_slice(), secret.masks())
    }

    /// Commitments to an arbitrary (possibly improper) color assignment.
    /// For [`TableKind::Plain`] the masks are ignored.
    pub fn from_assignment(g: &Graph, kind: TableKind, colors: &[Trit], masks: &[Trit]) -> Self {
        Self::from_fn(g, kind, |q| match q {
            Query::Plain(e) => (colors[e.lo() - 1], colors[e.hi() - 1]),
            Query::Committed(q) => (
                commit(masks[q.edge.lo() - 1], q.r, colors[q.edge.lo() - 1]),
                commit(masks[q.edge.hi() - 1], q.s, colors[q.edge.hi() - 1]),
            ),
        })
    }

    /// A well-defined committed table: every commitment to vertex `v` under
    /// randomness `r` is `commitment(v, r)`, whatever the edge.
    pub fn from_vertex_commitments(g: &Graph, commitment: impl Fn(Vertex, NonzeroTrit) -> Trit) -> Self {
        Self::from_fn(g, TableKind::Committed, |q| match q {
            Query::Committed(q) => (commitment(q.edge.lo(), q.r), commitment(q.edge.hi(), q.s)),
            Query::Plain(_) => unreachable!("committed domain"),
        })
    }

    pub fn random<R: Rng + ?Sized>(g: &Graph, kind: TableKind, rng: &mut R) -> Self {
        Self::from_fn(g, kind, |_| (Trit::random(rng), Trit::random(rng)))
    }

    pub fn kind(&self) -> TableKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }

    pub fn entries(&self) -> &[(Trit, Trit)] {
        &self.answers
    }

    pub fn index_of(&self, query: &Query) -> Option<usize> {
        let k = self.edges.binary_search(&query.edge()).ok()?;
        match (self.kind, query) {
            (TableKind::Plain, Query::Plain(_)) => Some(k),
            (TableKind::Committed, Query::Committed(q)) => Some(4 * k + q.randomness_index()),
            _ => None,
        }
    }

    pub fn get(&self, query: &Query) -> Option<(Trit, Trit)> {
        self.index_of(query).map(|k| self.answers[k])
    }

    pub fn set(&mut self, query: &Query, answer: (Trit, Trit)) -> Result<(), ProtocolError> {
        let k = self.index_of(query).ok_or_else(|| ProtocolError::NotTotal(query.to_string()))?;
        self.answers[k] = answer;
        Ok(())
    }

    /// Lines `P<slot> question | answer`, in domain order.
    pub fn to_token_lines(&self, slot: usize) -> Vec<String> {
        let domain = self.domain();
        domain
            .iter()
            .zip(&self.answers)
            .map(|(q, (a, b))| format!("P{slot} {q} | {}", Answer::Committed(*a, *b)))
            .collect()
    }

    fn domain(&self) -> Vec<Query> {
        match self.kind {
            TableKind::Plain => self.edges.iter().map(|e| Query::Plain(*e)).collect(),
            TableKind::Committed => {
                self.edges.iter().flat_map(|e| Question::all_on(*e).map(Query::Committed)).collect()
            }
        }
    }
}

impl Prover for StrategyTable {
    fn answer(&self, query: &Query) -> Answer {
        self.get(query).map_or(Answer::Refused, |(a, b)| Answer::Committed(a, b))
    }
}

/// Whether every commitment to a `(vertex, randomness)` pair agrees across
/// all edges and all the given tables.
pub fn is_well_defined(g: &Graph, tables: &[&StrategyTable]) -> bool {
    let mut seen: Vec<[Option<Trit>; 2]> = vec![[None; 2]; g.vertex_count() + 1];
    for table in tables {
        for query in question_domain(g, TableKind::Committed) {
            let (Query::Committed(q), Some((wl, wh))) = (query, table.get(&query)) else {
                return false;
            };
            for (v, r, w) in [(q.edge.lo(), q.r, wl), (q.edge.hi(), q.s, wh)] {
                let slot = &mut seen[v][r.index()];
                match slot {
                    Some(prev) if *prev != w => return false,
                    _ => *slot = Some(w),
                }
            }
        }
    }
    true
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    weight: u128,
    questions: [u32; 3],
}

/// A protocol's question distribution on one graph, compiled for fast exact
/// evaluation of strategy tables.
#[derive(Debug, Clone)]
pub struct Game {
    graph: Graph,
    protocol: Protocol,
    eps: Epsilon,
    domain: Vec<Query>,
    outcomes: Vec<Outcome>,
    denom: u128,
    /// For each slot and question index, the outcomes asking it.
    by_slot: Vec<Vec<Vec<u32>>>,
}

impl Game {
    pub fn new(g: &Graph, protocol: Protocol, eps: Epsilon) -> Result<Self, ProtocolError> {
        let kind = TableKind::for_protocol(protocol);
        let domain = question_domain(g, kind);
        let probe = StrategyTable::constant(g, kind, (Trit::ZERO, Trit::ZERO));
        let index = |q: Query| probe.index_of(&q).expect("support lies in the domain") as u32;

        let (weighted, denom): (Vec<(Vec<Query>, u128)>, u128) = match protocol {
            Protocol::Std2 => {
                flatten(pmf_base(g, eps)?.integer_weights(), |qs| qs.iter().map(|e| Query::Plain(*e)).collect())?
            }
            Protocol::Loc2 => flatten(pmf_committed(g, eps)?.integer_weights(), |qs| {
                qs.iter().map(|q| Query::Committed(*q)).collect()
            })?,
            Protocol::Qnl3 => {
                flatten(pmf_triple(g, eps)?.integer_weights(), |qs| qs.iter().map(|q| Query::Committed(*q)).collect())?
            }
        };

        let arity = protocol.arity();
        let mut by_slot = vec![vec![Vec::new(); domain.len()]; arity];
        let outcomes = weighted
            .into_iter()
            .enumerate()
            .map(|(k, (qs, weight))| {
                let mut questions = [0u32; 3];
                for (slot, q) in qs.into_iter().enumerate() {
                    questions[slot] = index(q);
                    by_slot[slot][questions[slot] as usize].push(k as u32);
                }
                Outcome { weight, questions }
            })
            .collect();

        Ok(Game { graph: g.clone(), protocol, eps, domain, outcomes, denom, by_slot })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    pub fn epsilon(&self) -> Epsilon {
        self.eps
    }

    pub fn kind(&self) -> TableKind {
        TableKind::for_protocol(self.protocol)
    }

    pub fn domain(&self) -> &[Query] {
        &self.domain
    }

    /// Common denominator of all outcome weights.
    pub fn denominator(&self) -> u128 {
        self.denom
    }

    pub fn support_size(&self) -> usize {
        self.outcomes.len()
    }

    fn passes(&self, o: &Outcome, answers: [(Trit, Trit); 3]) -> bool {
        let a = |k: usize| Answer::Committed(answers[k].0, answers[k].1);
        let g = &self.graph;
        match self.protocol {
            Protocol::Std2 => {
                let q = |k: usize| self.domain[o.questions[k] as usize].edge();
                check_std2(g, [q(0), q(1)], [a(0), a(1)]).accepted
            }
            Protocol::Loc2 => check_loc2(g, [self.question(o, 0), self.question(o, 1)], [a(0), a(1)]).accepted,
            Protocol::Qnl3 => {
                check_qnl3(g, [self.question(o, 0), self.question(o, 1), self.question(o, 2)], [a(0), a(1), a(2)])
                    .accepted
            }
        }
    }

    fn question(&self, o: &Outcome, slot: usize) -> Question {
        match self.domain[o.questions[slot] as usize] {
            Query::Committed(q) => q,
            Query::Plain(_) => unreachable!("committed protocol"),
        }
    }

    fn check_tables(&self, tables: &[&StrategyTable]) -> Result<(), ProtocolError> {
        if tables.len() != self.protocol.arity() {
            return Err(ProtocolError::Arity {
                protocol: self.protocol.to_string(),
                expected: self.protocol.arity(),
                found: tables.len(),
            });
        }
        for t in tables {
            if t.kind != self.kind() {
                return Err(ProtocolError::TableKind(self.protocol.to_string()));
            }
            if t.edges != self.graph.edges() || t.answers.len() != self.domain.len() {
                return Err(ProtocolError::NotTotal(format!("table for a different graph ({} entries)", t.len())));
            }
        }
        Ok(())
    }

    /// Accepted weight, out of [`Game::denominator`].
    pub fn accepted_weight(&self, tables: &[&StrategyTable]) -> Result<u128, ProtocolError> {
        self.check_tables(tables)?;
        Ok(self
            .outcomes
            .iter()
            .filter(|o| {
                let answers = std::array::from_fn(|k| {
                    if k < tables.len() {
                        tables[k].answers[o.questions[k] as usize]
                    } else {
                        (Trit::ZERO, Trit::ZERO)
                    }
                });
                self.passes(o, answers)
            })
            .map(|o| o.weight)
            .sum())
    }

    /// Exact acceptance probability of a strategy tuple.
    pub fn accept_prob(&self, tables: &[&StrategyTable]) -> Result<Rational, ProtocolError> {
        let w = self.accepted_weight(tables)?;
        Ok(BigRational::new(BigInt::from(w), BigInt::from(self.denom)))
    }

    /// Per-question best answers for `slot` with the other tables fixed.
    /// Returns the table and its accepted weight. Ties go to the
    /// lexicographically smallest answer.
    pub fn best_response(
        &self,
        tables: &[&StrategyTable],
        slot: usize,
    ) -> Result<(StrategyTable, u128), ProtocolError> {
        self.check_tables(tables)?;
        let mut answers = Vec::with_capacity(self.domain.len());
        let mut total = 0u128;
        for outcomes in &self.by_slot[slot] {
            let mut best = ((Trit::ZERO, Trit::ZERO), 0u128);
            for candidate in Answer::all_committed() {
                let Answer::Committed(x, y) = candidate else { unreachable!() };
                let mass: u128 = outcomes
                    .iter()
                    .map(|&k| &self.outcomes[k as usize])
                    .filter(|o| {
                        let answers = std::array::from_fn(|s| {
                            if s == slot {
                                (x, y)
                            } else if s < tables.len() {
                                tables[s].answers[o.questions[s] as usize]
                            } else {
                                (Trit::ZERO, Trit::ZERO)
                            }
                        });
                        self.passes(o, answers)
                    })
                    .map(|o| o.weight)
                    .sum();
                if mass > best.1 {
                    best = ((x, y), mass);
                }
            }
            answers.push(best.0);
            total += best.1;
        }
        let table = StrategyTable { kind: self.kind(), edges: self.graph.edges().to_vec(), answers };
        Ok((table, total))
    }

    fn rational(&self, weight: u128) -> Rational {
        BigRational::new(BigInt::from(weight), BigInt::from(self.denom))
    }
}

/// Weighted question tuples and their common denominator.
type Weighted<T> = (Vec<(T, u128)>, u128);

fn flatten<T>(
    weights: Option<Weighted<T>>,
    to_queries: impl Fn(&T) -> Vec<Query>,
) -> Result<Weighted<Vec<Query>>, ProtocolError> {
    let (weights, denom) =
        weights.ok_or(ProtocolError::TooLarge { what: "integer pmf weights", edges: 0, limit: 0 })?;
    Ok((weights.iter().map(|(t, w)| (to_queries(t), *w)).collect(), denom))
}

/// Exact acceptance probability of a strategy tuple.
pub fn strategy_accept_prob(
    g: &Graph,
    eps: Epsilon,
    protocol: Protocol,
    tables: &[&StrategyTable],
) -> Result<Rational, ProtocolError> {
    Game::new(g, protocol, eps)?.accept_prob(tables)
}

/// Best response for `slot` against the other tables in `tables`; the
/// entry at `slot` itself is ignored.
pub fn best_response(
    g: &Graph,
    eps: Epsilon,
    protocol: Protocol,
    tables: &[&StrategyTable],
    slot: usize,
) -> Result<StrategyTable, ProtocolError> {
    Ok(Game::new(g, protocol, eps)?.best_response(tables, slot)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Joint enumeration of every prover's tables.
    Exhaustive,
    /// Enumeration of the first prover's tables against a best response.
    EnumBestResponse,
    /// Alternating best response from random starts; a lower bound only.
    LocalSearch,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Exhaustive => "exhaustive",
            Method::EnumBestResponse => "enum-best-response",
            Method::LocalSearch => "local-search",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameValueReport {
    pub value: Rational,
    pub witnesses: Vec<StrategyTable>,
    pub method: Method,
    /// Outer tables enumerated, or restarts for local search.
    pub restarts: u64,
    /// Best-response sweeps (local search only).
    pub iterations: u64,
}

impl fmt::Display for GameValueReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} value={} restarts={}", self.method, self.value, self.restarts)?;
        for (slot, w) in self.witnesses.iter().enumerate() {
            for line in w.to_token_lines(slot + 1) {
                writeln!(f, "{line}")?;
            }
        }
        Ok(())
    }
}

fn decode_plain_table(code: u64, m: usize) -> Vec<(Trit, Trit)> {
    let mut x = code;
    (0..m)
        .map(|_| {
            let digit = (x % 9) as u8;
            x /= 9;
            (Trit::new(digit / 3), Trit::new(digit % 3))
        })
        .collect()
}

/// Exact classical value of the unmasked protocol: every first-prover table
/// against the second prover's best response. Work is split across the
/// rayon pool; ties are broken by the smallest table code.
pub fn exact_value_std2(g: &Graph, eps: Epsilon) -> Result<GameValueReport, ProtocolError> {
    let m = g.edge_count();
    if m > EXACT_STD2_EDGE_LIMIT {
        return Err(ProtocolError::TooLarge { what: "exact std2 value", edges: m, limit: EXACT_STD2_EDGE_LIMIT });
    }
    let game = Game::new(g, Protocol::Std2, eps)?;
    let total = 9u64.pow(m as u32);
    let placeholder = StrategyTable::constant(g, TableKind::Plain, (Trit::ZERO, Trit::ZERO));
    let (best_weight, best_code) = (0..total)
        .into_par_iter()
        .map(|code| {
            let first = StrategyTable::from_answers(g, TableKind::Plain, decode_plain_table(code, m))
                .expect("sized to the graph");
            let (_, weight) = game.best_response(&[&first, &placeholder], 1).expect("tables match the game");
            (weight, code)
        })
        .reduce(|| (0, u64::MAX), |a, b| if a.0 > b.0 || (a.0 == b.0 && a.1 < b.1) { a } else { b });
    let first = StrategyTable::from_answers(g, TableKind::Plain, decode_plain_table(best_code, m))?;
    let (second, weight) = game.best_response(&[&first, &placeholder], 1)?;
    debug_assert_eq!(weight, best_weight);
    Ok(GameValueReport {
        value: game.rational(best_weight),
        witnesses: vec![first, second],
        method: Method::EnumBestResponse,
        restarts: total,
        iterations: 0,
    })
}

/// Alternating best response from one random start until a full sweep
/// brings no improvement. Returns the tables and the accepted weight after
/// every improving step, starting with the initial weight.
pub fn alternating_best_response<R: Rng + ?Sized>(
    game: &Game,
    rng: &mut R,
) -> Result<(Vec<StrategyTable>, Vec<u128>), ProtocolError> {
    let arity = game.protocol().arity();
    let mut tables: Vec<StrategyTable> =
        (0..arity).map(|_| StrategyTable::random(game.graph(), game.kind(), rng)).collect();
    let mut trace = vec![game.accepted_weight(&tables.iter().collect::<Vec<_>>())?];
    loop {
        let before = *trace.last().expect("non-empty");
        for slot in 0..arity {
            let (table, weight) = game.best_response(&tables.iter().collect::<Vec<_>>(), slot)?;
            tables[slot] = table;
            trace.push(weight);
        }
        if *trace.last().expect("non-empty") <= before {
            break;
        }
    }
    Ok((tables, trace))
}

/// Best value found by [`alternating_best_response`] over `restarts`
/// independent starts. Restart `k` draws from stream `k` of `seed`.
pub fn local_search_value(game: &Game, restarts: u64, seed: u64) -> Result<GameValueReport, ProtocolError> {
    let runs: Vec<(u128, u64, Vec<StrategyTable>, u64)> = (0..restarts)
        .into_par_iter()
        .map(|k| {
            let mut rng = crate::stream_rng(seed, k);
            let (tables, trace) = alternating_best_response(game, &mut rng)?;
            let best = *trace.last().expect("non-empty");
            Ok((best, k, tables, trace.len() as u64))
        })
        .collect::<Result<_, ProtocolError>>()?;
    let iterations = runs.iter().map(|r| r.3).sum();
    let (weight, _, witnesses, _) = runs
        .into_iter()
        .reduce(|a, b| if b.0 > a.0 { b } else { a })
        .ok_or_else(|| ProtocolError::Parse("at least one restart is required".into()))?;
    Ok(GameValueReport { value: game.rational(weight), witnesses, method: Method::LocalSearch, restarts, iterations })
}

/// `1 - 1/(12m)`: upper bound on the classical value of the two-prover
/// committed protocol on a non-3-colorable graph with `m` edges.
pub fn classical_bound(m: u64) -> Rational {
    assert!(m >= 1, "edge count must be positive");
    // Consecutive integers are coprime, so the fraction is already reduced.
    BigRational::new_raw(BigInt::from(12 * m - 1), BigInt::from(12 * m))
}

/// The steps from the classical soundness gap to the three-prover bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantumBound {
    pub edges: u64,
    /// Questions per prover, `4m`.
    pub questions_per_prover: u64,
    /// `1/((1 + 12|Q|)·12m) = 1/(12m + 576m²)`.
    pub sqrt_delta: Rational,
    /// `1/(588m²)`.
    pub sqrt_delta_floor: Rational,
    /// `1 - (1/(25m))⁴`.
    pub bound: Rational,
}

impl QuantumBound {
    /// `1 - floor²`: the value bound implied by `√δ ≥ floor`.
    pub fn implied_value(&self) -> Rational {
        Rational::one() - &self.sqrt_delta_floor * &self.sqrt_delta_floor
    }

    /// Checks each step exactly: `√δ` closes the classical gap `1/(12m)`
    /// when `δ ≤ √δ`, the floor lies below it, and the implied value is
    /// within the stated bound. All three quantities are unit fractions
    /// (or one minus one), so the comparisons run on denominators.
    pub fn chain_holds(&self) -> bool {
        let unit = |x: &Rational| x.numer().is_one().then(|| x.denom().clone());
        let co_unit = |x: &Rational| (x.denom() - x.numer()).is_one().then(|| x.denom().clone());
        let (Some(a), Some(b), Some(c)) = (unit(&self.sqrt_delta), unit(&self.sqrt_delta_floor), co_unit(&self.bound))
        else {
            return false;
        };
        let gap = co_unit(&classical_bound(self.edges));
        gap.is_some_and(|g| g * BigInt::from(1 + 12 * self.questions_per_prover) == a) && b >= a && &b * &b <= c
    }
}

pub fn quantum_bound(m: u64) -> QuantumBound {
    assert!(m >= 1, "edge count must be positive");
    let q = 4 * m;
    let inv = |d: BigInt| BigRational::new_raw(BigInt::one(), d);
    let m_big = BigInt::from(m);
    QuantumBound {
        edges: m,
        questions_per_prover: q,
        sqrt_delta: inv(BigInt::from(1 + 12 * q) * 12 * &m_big),
        sqrt_delta_floor: inv(BigInt::from(588) * &m_big * &m_big),
        bound: {
            let d = num_traits::pow(BigInt::from(25) * &m_big, 4);
            BigRational::new_raw(&d - 1, d)
        },
    }
}
