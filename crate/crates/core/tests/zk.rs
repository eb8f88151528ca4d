mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use proptest::prelude::*;
use zk3col_core::commit::commit;
use zk3col_core::dist::dist_equal;
use zk3col_core::graph::fixtures::{k3, k4, path, petersen};
use zk3col_core::zk::{
    exact_sim_dist, exact_view_dist, leakage, question_space, simulate, unveiled_colors, verify_all_triples,
    LeakagePattern, QuestionTriple, RngCoins, Simulator,
};
use zk3col_core::{seeded_rng, Answer, Graph, Pmf, Question};

#[test]
fn every_triple_on_k3_is_simulated_exactly() {
    let report = verify_all_triples(&k3()).unwrap();
    assert_eq!(report.triples_checked, 16u64.pow(3));
    assert!(report.perfect(), "{:?}", report.mismatches);
}

#[test]
fn every_triple_on_the_four_vertex_path_is_simulated_exactly() {
    let report = verify_all_triples(&path(4)).unwrap();
    assert_eq!(report.triples_checked, 28u64.pow(3));
    assert!(report.perfect(), "{:?}", report.mismatches);
}

/// Real view over every proper coloring (not only permutations of one) and
/// every mask vector.
fn view_over_all_colorings(g: &Graph, triple: &QuestionTriple) -> Pmf<[Answer; 3]> {
    let n = g.vertex_count();
    let mut counts: BTreeMap<[Answer; 3], u64> = BTreeMap::new();
    for coloring in colorings(g) {
        for code in 0..3usize.pow(n as u32) {
            let mask = |v: usize| t(((code / 3usize.pow(v as u32 - 1)) % 3) as u8);
            let answers = triple.map(|qn| {
                if g.has_edge(qn.edge) {
                    let (i, j) = (qn.edge.lo(), qn.edge.hi());
                    Answer::Committed(commit(mask(i), qn.r, coloring[i - 1]), commit(mask(j), qn.s, coloring[j - 1]))
                } else {
                    Answer::Refused
                }
            });
            *counts.entry(answers).or_default() += 1;
        }
    }
    Pmf::from_counts(counts).unwrap()
}

#[test]
fn view_matches_an_independent_enumeration() {
    let g = path(4);
    let space = question_space(&g);
    let mut rng = seeded_rng(8);
    use rand::seq::IndexedRandom;
    for _ in 0..300 {
        let triple = [0, 1, 2].map(|_| *space.choose(&mut rng).unwrap());
        assert_eq!(exact_view_dist(&g, &triple).unwrap(), view_over_all_colorings(&g, &triple));
    }
}

#[test]
fn leakage_taxonomy_on_k4() {
    let g = k4();
    let space = question_space(&g);
    let mut seen = BTreeSet::new();
    for a in &space {
        for b in &space {
            for c in &space {
                seen.insert(leakage(&g, &[*a, *b, *c]).pattern);
            }
        }
    }
    let expected: BTreeSet<_> =
        [LeakagePattern::Empty, LeakagePattern::Single, LeakagePattern::Edge, LeakagePattern::Triangle].into();
    assert_eq!(seen, expected);
}

#[test]
fn unveiled_vertices_are_always_adjacent_on_petersen() {
    // Petersen has no triangles, so at most an edge can be unveiled.
    let g = petersen();
    let edges = g.edges().to_vec();
    let all: Vec<Question> = edges.iter().flat_map(|e| Question::all_on(*e)).collect();
    for a in all.iter().step_by(3) {
        for b in &all {
            for c in all.iter().step_by(7) {
                let report = leakage(&g, &[*a, *b, *c]);
                assert!(report.unveiled.len() <= 2);
                assert_ne!(report.pattern, LeakagePattern::NonAdjacent);
            }
        }
    }
}

#[test]
fn simulator_outputs_match_views_on_a_triangle_triple() {
    let g = k3();
    let triple = [question(1, 2, 1, 2), question(2, 3, 1, 2), question(1, 3, 2, 1)];
    assert_eq!(leakage(&g, &triple).pattern, LeakagePattern::Triangle);
    let sim = exact_sim_dist(&g, &triple).unwrap();
    let real = exact_view_dist(&g, &triple).unwrap();
    assert!(dist_equal(&sim, &real));
    for (answers, _) in sim.support() {
        let colors = unveiled_colors(&triple, answers);
        let distinct: BTreeSet<_> = colors.values().flatten().collect();
        assert_eq!(distinct.len(), 3);
    }
}

#[test]
fn pmf_dump_is_shared_format() {
    let g = k3();
    let triple = [question(1, 2, 1, 1), question(1, 2, 2, 2), question(1, 4, 1, 1)];
    let dump = exact_sim_dist(&g, &triple).unwrap().dump();
    // Two fresh commitments, then an ordered pair of distinct colors.
    assert_eq!(dump.lines().count(), 9 * 6);
    assert!(dump.lines().all(|l| l.ends_with(" 1/54") && l.contains("| REFUSE")));
}

fn arb_question(n: usize) -> impl Strategy<Value = Question> {
    (1..=n, 1..=n, 1u8..=2, 1u8..=2)
        .prop_filter_map("loop", move |(a, b, r, s)| (a != b).then(|| question(a.min(b), a.max(b), r, s)))
}

proptest! {
    #[test]
    fn simulator_state_stays_bounded(
        a in arb_question(6), b in arb_question(6), c in arb_question(6), seed in any::<u64>()
    ) {
        let g = zk3col_core::graph::fixtures::complete(6);
        let mut rng = seeded_rng(seed);
        let mut sim = Simulator::new(&g, RngCoins(&mut rng));
        for qn in [a, b, c] {
            sim.answer(&qn);
            prop_assert!(sim.state().next_color <= 3);
            for v in 1..=6 {
                prop_assert!(sim.state().count(v) <= 2);
            }
        }
    }

    #[test]
    fn simulated_unveilings_are_proper(
        a in arb_question(5), b in arb_question(5), c in arb_question(5), seed in any::<u64>()
    ) {
        // Unveiled vertices get distinct colors and each vertex unveils
        // consistently, as for honest provers on a proper coloring.
        let g = zk3col_core::graph::fixtures::complete(5);
        let triple = [a, b, c];
        let answers = simulate(&g, &triple, &mut seeded_rng(seed));
        let colors = unveiled_colors(&triple, &answers);
        let firsts: Vec<_> = colors.values().map(|c| { assert_eq!(c.len(), 1); c[0] }).collect();
        let distinct: BTreeSet<_> = firsts.iter().collect();
        prop_assert_eq!(distinct.len(), firsts.len());
        prop_assert_eq!(colors.len(), leakage(&g, &triple).unveiled.len());
    }
}
