//! Zero-knowledge simulator for the three-prover protocol and exact
//! comparison of real and simulated views.
//!
//! A dishonest verifier is modeled as a fixed triple of questions. The
//! protocol has a single round, so equality of the two answer
//! distributions for every triple covers every verifier.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::commit::{color_permutations, commit, implicit_unveil, NonzeroTrit, Trit};
use crate::dist::{dist_equal, Pmf, Question};
use crate::engine::Answer;
use crate::error::{GraphError, ProtocolError};
use crate::graph::{Edge, Graph, Vertex};

/// Vertex limit for the exact view distributions (3ⁿ mask vectors).
pub const VIEW_ENUMERATION_LIMIT: usize = 10;

pub type QuestionTriple = [Question; 3];
pub type AnswerTriple = [Answer; 3];

/// Randomness consumed by the simulator.
pub trait SimulatorCoins {
    /// A uniform permutation of the three colors.
    fn permutation(&mut self) -> [Trit; 3];
    /// A uniform trit.
    fn fresh(&mut self) -> Trit;
}

pub struct RngCoins<'a, R: Rng + ?Sized>(pub &'a mut R);

impl<R: Rng + ?Sized> SimulatorCoins for RngCoins<'_, R> {
    fn permutation(&mut self) -> [Trit; 3] {
        let mut perm = Trit::ALL;
        perm.shuffle(self.0);
        perm
    }

    fn fresh(&mut self) -> Trit {
        Trit::random(self.0)
    }
}

/// Replays a fixed permutation and a fixed tape of fresh trits. Reading past
/// the tape yields zero and is recorded in `overrun`.
#[derive(Debug, Clone)]
pub struct TapeCoins {
    perm: [Trit; 3],
    tape: Vec<Trit>,
    pos: usize,
    pub overrun: usize,
}

impl TapeCoins {
    pub fn new(perm: [Trit; 3], tape: Vec<Trit>) -> Self {
        TapeCoins { perm, tape, pos: 0, overrun: 0 }
    }

    pub fn consumed(&self) -> usize {
        self.pos + self.overrun
    }
}

impl SimulatorCoins for TapeCoins {
    fn permutation(&mut self) -> [Trit; 3] {
        self.perm
    }

    fn fresh(&mut self) -> Trit {
        match self.tape.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                *t
            }
            None => {
                self.overrun += 1;
                Trit::ZERO
            }
        }
    }
}

/// Internal state of the simulator between questions.
#[derive(Debug, Clone)]
pub struct SimulatorState {
    pub col: [Trit; 3],
    /// Number of colors unveiled so far.
    pub next_color: usize,
    mark: Vec<[bool; 2]>,
    count: Vec<u8>,
    values: Vec<[Option<Trit>; 2]>,
}

impl SimulatorState {
    fn new(n: usize, col: [Trit; 3]) -> Self {
        SimulatorState {
            col,
            next_color: 0,
            mark: vec![[false; 2]; n + 1],
            count: vec![0; n + 1],
            values: vec![[None; 2]; n + 1],
        }
    }

    pub fn is_marked(&self, v: Vertex, r: NonzeroTrit) -> bool {
        self.mark[v][r.index()]
    }

    /// Distinct randomness values under which `v` was committed.
    pub fn count(&self, v: Vertex) -> u8 {
        self.count[v]
    }

    pub fn value(&self, v: Vertex, r: NonzeroTrit) -> Option<Trit> {
        self.values[v][r.index()]
    }
}

/// The simulator. It only sees the graph and the questions.
pub struct Simulator<'g, C: SimulatorCoins> {
    graph: &'g Graph,
    coins: C,
    state: SimulatorState,
}

impl<'g, C: SimulatorCoins> Simulator<'g, C> {
    pub fn new(graph: &'g Graph, mut coins: C) -> Self {
        let col = coins.permutation();
        let state = SimulatorState::new(graph.vertex_count(), col);
        Simulator { graph, coins, state }
    }

    pub fn state(&self) -> &SimulatorState {
        &self.state
    }

    pub fn into_coins(self) -> C {
        self.coins
    }

    fn commit_vertex(&mut self, v: Vertex, r: NonzeroTrit) {
        let st = &mut self.state;
        if st.mark[v][r.index()] {
            return;
        }
        match st.count[v] {
            0 => st.values[v][r.index()] = Some(self.coins.fresh()),
            1 => {
                let other = st.values[v][(-r).index()].expect("the other randomness was committed");
                st.values[v][r.index()] = Some(-st.col[st.next_color] - other);
                st.next_color += 1;
            }
            _ => unreachable!("a vertex has only two randomness values"),
        }
        st.count[v] += 1;
    }

    /// Simulates one prover's answer. Questions are processed in order.
    pub fn answer(&mut self, q: &Question) -> Answer {
        if !self.graph.has_edge(q.edge) {
            return Answer::Refused;
        }
        let (i, j) = (q.edge.lo(), q.edge.hi());
        self.commit_vertex(i, q.r);
        self.commit_vertex(j, q.s);
        self.state.mark[i][q.r.index()] = true;
        self.state.mark[j][q.s.index()] = true;
        let w = |v: Vertex, r: NonzeroTrit| self.state.values[v][r.index()].expect("just committed");
        Answer::Committed(w(i, q.r), w(j, q.s))
    }
}

/// Simulated answers to a question triple.
pub fn simulate<R: Rng + ?Sized>(g: &Graph, questions: &QuestionTriple, rng: &mut R) -> AnswerTriple {
    let mut sim = Simulator::new(g, RngCoins(rng));
    questions.map(|q| sim.answer(&q))
}

fn simulate_with_tape(g: &Graph, questions: &QuestionTriple, coins: TapeCoins) -> (AnswerTriple, TapeCoins) {
    let mut sim = Simulator::new(g, coins);
    let answers = questions.map(|q| sim.answer(&q));
    (answers, sim.into_coins())
}

/// Number of fresh trits the simulator draws for `questions`. It depends
/// only on which `(vertex, randomness)` pairs are asked, not on values.
pub fn fresh_draws(g: &Graph, questions: &QuestionTriple) -> usize {
    let (_, coins) = simulate_with_tape(g, questions, TapeCoins::new(Trit::ALL, Vec::new()));
    coins.consumed()
}

fn all_tapes(len: usize) -> impl Iterator<Item = Vec<Trit>> {
    (0..3usize.pow(len as u32)).map(move |mut code| {
        (0..len)
            .map(|_| {
                let t = Trit::new((code % 3) as u8);
                code /= 3;
                t
            })
            .collect()
    })
}

fn check_enumerable(g: &Graph) -> Result<(), ProtocolError> {
    if g.vertex_count() > VIEW_ENUMERATION_LIMIT {
        Err(GraphError::TooLarge { n: g.vertex_count(), limit: VIEW_ENUMERATION_LIMIT }.into())
    } else {
        Ok(())
    }
}

/// Exact distribution of the simulator's output.
pub fn exact_sim_dist(g: &Graph, questions: &QuestionTriple) -> Result<Pmf<AnswerTriple>, ProtocolError> {
    check_enumerable(g)?;
    let draws = fresh_draws(g, questions);
    let mut counts: BTreeMap<AnswerTriple, u64> = BTreeMap::new();
    for perm in color_permutations() {
        for tape in all_tapes(draws) {
            let (answers, _) = simulate_with_tape(g, questions, TapeCoins::new(perm, tape));
            *counts.entry(answers).or_default() += 1;
        }
    }
    Ok(Pmf::from_counts(counts).expect("non-empty enumeration"))
}

/// Exact distribution of honest prover answers: every color permutation of
/// the base coloring and every mask vector, all equally likely.
pub fn exact_view_dist(g: &Graph, questions: &QuestionTriple) -> Result<Pmf<AnswerTriple>, ProtocolError> {
    check_enumerable(g)?;
    let base = g.base_coloring().ok_or(ProtocolError::NotColorable)?;
    let n = g.vertex_count();
    let mut counts: BTreeMap<AnswerTriple, u64> = BTreeMap::new();
    for perm in color_permutations() {
        let colors = base.permuted(&perm);
        for masks in all_tapes(n) {
            let answers = questions.map(|q| {
                if g.has_edge(q.edge) {
                    let w = |v: Vertex, r| commit(masks[v - 1], r, colors.color(v));
                    Answer::Committed(w(q.edge.lo(), q.r), w(q.edge.hi(), q.s))
                } else {
                    Answer::Refused
                }
            });
            *counts.entry(answers).or_default() += 1;
        }
    }
    Ok(Pmf::from_counts(counts).expect("non-empty enumeration"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LeakagePattern {
    Empty,
    Single,
    Edge,
    Triangle,
    /// Unveiled vertices that are not pairwise adjacent. Unreachable with
    /// three questions; kept so classification is total.
    NonAdjacent,
}

impl LeakagePattern {
    pub fn token(self) -> &'static str {
        match self {
            LeakagePattern::Empty => "EMPTY",
            LeakagePattern::Single => "SINGLE",
            LeakagePattern::Edge => "EDGE",
            LeakagePattern::Triangle => "TRIANGLE",
            LeakagePattern::NonAdjacent => "NON_ADJACENT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeakageReport {
    /// Vertices committed under both randomness values, ascending.
    pub unveiled: Vec<Vertex>,
    pub pattern: LeakagePattern,
}

impl fmt::Display for LeakageReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let unveiled = if self.unveiled.is_empty() {
            "-".to_string()
        } else {
            self.unveiled.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
        };
        write!(f, "pattern={} unveiled={unveiled}", self.pattern.token())
    }
}

/// Which vertex colors a question triple can unveil.
pub fn leakage(g: &Graph, questions: &QuestionTriple) -> LeakageReport {
    let mut seen: BTreeMap<Vertex, [bool; 2]> = BTreeMap::new();
    for q in questions.iter().filter(|q| g.has_edge(q.edge)) {
        for (v, r) in [(q.edge.lo(), q.r), (q.edge.hi(), q.s)] {
            seen.entry(v).or_default()[r.index()] = true;
        }
    }
    let unveiled: Vec<Vertex> = seen.into_iter().filter(|(_, m)| m[0] && m[1]).map(|(v, _)| v).collect();
    let pairwise_adjacent =
        unveiled.iter().enumerate().all(|(k, &a)| unveiled[k + 1..].iter().all(|&b| g.adjacent(a, b)));
    let pattern = match (unveiled.len(), pairwise_adjacent) {
        (0, _) => LeakagePattern::Empty,
        (1, _) => LeakagePattern::Single,
        (2, true) => LeakagePattern::Edge,
        (3, true) => LeakagePattern::Triangle,
        _ => LeakagePattern::NonAdjacent,
    };
    LeakageReport { unveiled, pattern }
}

/// Colors a verifier recovers from answers by implicit unveiling, per
/// unveiled vertex. Conflicting recoveries for one vertex are all listed.
pub fn unveiled_colors(questions: &QuestionTriple, answers: &AnswerTriple) -> BTreeMap<Vertex, Vec<Trit>> {
    let mut commitments: BTreeMap<Vertex, Vec<(NonzeroTrit, Trit)>> = BTreeMap::new();
    for (q, a) in questions.iter().zip(answers) {
        if let Answer::Committed(wl, wh) = a {
            commitments.entry(q.edge.lo()).or_default().push((q.r, *wl));
            commitments.entry(q.edge.hi()).or_default().push((q.s, *wh));
        }
    }
    commitments
        .into_iter()
        .filter_map(|(v, cs)| {
            let mut colors: Vec<Trit> = cs
                .iter()
                .flat_map(|a| cs.iter().filter_map(move |b| implicit_unveil(a.1, a.0, b.1, b.0).ok()))
                .collect();
            colors.sort();
            colors.dedup();
            (!colors.is_empty()).then_some((v, colors))
        })
        .collect()
}

/// Every question a verifier can address to one prover on `g`: all pairs
/// of graph vertices (edges and non-edges) plus one pair reaching outside
/// the vertex set, under all four randomness pairs.
pub fn question_space(g: &Graph) -> Vec<Question> {
    let n = g.vertex_count();
    let mut pairs: Vec<Edge> =
        (1..=n).flat_map(|i| ((i + 1)..=n).map(move |j| Edge::new(i, j).expect("distinct"))).collect();
    pairs.push(Edge::new(1, n + 1).expect("distinct"));
    pairs.into_iter().flat_map(Question::all_on).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZkReport {
    pub triples_checked: u64,
    /// Triples whose real and simulated views differ (first few only).
    pub mismatches: Vec<QuestionTriple>,
    pub mismatch_count: u64,
}

impl ZkReport {
    pub fn perfect(&self) -> bool {
        self.mismatch_count == 0
    }
}

/// Compares real and simulated views for every triple over
/// [`question_space`]. Runs on the current rayon pool.
pub fn verify_all_triples(g: &Graph) -> Result<ZkReport, ProtocolError> {
    check_enumerable(g)?;
    if g.base_coloring().is_none() {
        return Err(ProtocolError::NotColorable);
    }
    let space = question_space(g);
    let results: Vec<(u64, Vec<QuestionTriple>, u64)> = space
        .par_iter()
        .map(|&a| {
            let mut checked = 0;
            let mut bad = Vec::new();
            let mut bad_count = 0;
            for &b in &space {
                for &c in &space {
                    let triple = [a, b, c];
                    let real = exact_view_dist(g, &triple)?;
                    let sim = exact_sim_dist(g, &triple)?;
                    checked += 1;
                    if !dist_equal(&real, &sim) {
                        bad_count += 1;
                        if bad.len() < 8 {
                            bad.push(triple);
                        }
                    }
                }
            }
            Ok((checked, bad, bad_count))
        })
        .collect::<Result<_, ProtocolError>>()?;
    let mut report = ZkReport { triples_checked: 0, mismatches: Vec::new(), mismatch_count: 0 };
    for (checked, bad, count) in results {
        report.triples_checked += checked;
        report.mismatch_count += count;
        report.mismatches.extend(bad.into_iter().take(8 - report.mismatches.len().min(8)));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;

    fn q(a: usize, b: usize, r: u8, s: u8) -> Question {
        Question::new(Edge::new(a, b).unwrap(), NonzeroTrit::from_u8(r).unwrap(), NonzeroTrit::from_u8(s).unwrap())
    }

    #[test]
    fn leakage_examples() {
        let g = complete(6);
        let disjoint = [q(1, 2, 1, 1), q(3, 4, 1, 1), q(5, 6, 1, 1)];
        assert_eq!(leakage(&g, &disjoint).pattern, LeakagePattern::Empty);
        let edge = [q(1, 2, 1, 1), q(1, 2, 2, 2), q(5, 6, 1, 1)];
        let report = leakage(&g, &edge);
        assert_eq!(report.pattern, LeakagePattern::Edge);
        assert_eq!(report.to_string(), "pattern=EDGE unveiled=1,2");
        let triangle = [q(1, 2, 1, 2), q(2, 3, 1, 2), q(1, 3, 2, 1)];
        assert_eq!(leakage(&k3(), &triangle).pattern, LeakagePattern::Triangle);
        let single = [q(1, 2, 1, 1), q(1, 3, 2, 1), q(4, 5, 1, 1)];
        assert_eq!(leakage(&g, &single).pattern, LeakagePattern::Single);
        assert_eq!(leakage(&g, &disjoint).to_string(), "pattern=EMPTY unveiled=-");
    }

    #[test]
    fn leakage_ignores_non_edges() {
        let g = path(4);
        let triple = [q(1, 3, 1, 1), q(1, 3, 2, 2), q(1, 2, 1, 1)];
        assert_eq!(leakage(&g, &triple).pattern, LeakagePattern::Empty);
    }

    #[test]
    fn simulator_refuses_non_edges() {
        let g = path(4);
        let mut rng = crate::seeded_rng(0);
        let out = simulate(&g, &[q(1, 3, 1, 1), q(1, 2, 1, 1), q(2, 5, 1, 1)], &mut rng);
        assert_eq!(out[0], Answer::Refused);
        assert!(matches!(out[1], Answer::Committed(..)));
        assert_eq!(out[2], Answer::Refused);
    }

    #[test]
    fn simulator_unveils_distinct_colors_on_an_edge() {
        let g = k3();
        let triple = [q(1, 2, 1, 1), q(1, 2, 2, 2), q(1, 3, 1, 1)];
        for seed in 0..200 {
            let mut rng = crate::seeded_rng(seed);
            let answers = simulate(&g, &triple, &mut rng);
            let colors = unveiled_colors(&triple, &answers);
            assert_eq!(colors[&1].len(), 1);
            assert_ne!(colors[&1], colors[&2]);
        }
    }

    #[test]
    fn fresh_trits_for_disjoint_questions() {
        let g = complete(6);
        let triple = [q(1, 2, 1, 1), q(3, 4, 2, 1), q(5, 6, 1, 2)];
        assert_eq!(fresh_draws(&g, &triple), 6);
        // The simulator never looks at colorability.
        let sim = exact_sim_dist(&g, &triple).unwrap();
        assert_eq!(sim.len(), 729);
    }

    #[test]
    fn non_edge_triple_is_a_point_mass() {
        let g = path(4);
        let triple = [q(1, 3, 1, 1), q(2, 4, 1, 1), q(1, 5, 2, 2)];
        let sim = exact_sim_dist(&g, &triple).unwrap();
        assert_eq!(sim, Pmf::point([Answer::Refused; 3]));
        assert!(dist_equal(&sim, &exact_view_dist(&g, &triple).unwrap()));
    }

    #[test]
    fn single_fresh_edge_has_nine_outcomes() {
        let g = path(4);
        let triple = [q(1, 2, 1, 2), q(1, 3, 1, 1), q(2, 4, 1, 1)];
        let sim = exact_sim_dist(&g, &triple).unwrap();
        assert_eq!(sim.len(), 9);
    }

    #[test]
    fn view_needs_colorable_graph() {
        let triple = [q(1, 2, 1, 1); 3];
        assert!(matches!(exact_view_dist(&k4(), &triple), Err(ProtocolError::NotColorable)));
        assert!(exact_view_dist(&cycle(11), &triple).is_err());
    }
}
