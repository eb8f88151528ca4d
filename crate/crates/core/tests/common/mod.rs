//! Independent reference implementations used as test oracles. They follow
//! the protocol descriptions directly and share no code with the library
//! beyond plain data types.
#![allow(dead_code)]

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use zk3col_core::{Edge, Graph, NonzeroTrit, Question, Trit};

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn eps_q(num: u64, den: u64) -> Q {
    q(num as i64, den as i64)
}

pub fn edge(a: usize, b: usize) -> Edge {
    Edge::new(a, b).unwrap()
}

pub fn nz(v: u8) -> NonzeroTrit {
    NonzeroTrit::from_u8(v).unwrap()
}

pub fn t(v: u8) -> Trit {
    Trit::new(v)
}

pub fn question(a: usize, b: usize, r: u8, s: u8) -> Question {
    Question::new(edge(a, b), nz(r), nz(s))
}

fn add(map: &mut BTreeMap<[Edge; 2], Q>, key: [Edge; 2], p: Q) {
    *map.entry(key).or_insert_with(|| q(0, 1)) += p;
}

/// Edges touching `v`, read off the edge list.
fn touching(g: &Graph, v: usize) -> Vec<Edge> {
    g.edges().iter().copied().filter(|e| e.lo() == v || e.hi() == v).collect()
}

/// Two-stage enumeration of the base distribution.
pub fn base(g: &Graph, eps: &Q) -> BTreeMap<[Edge; 2], Q> {
    let m = g.edges().len() as i64;
    let mut out = BTreeMap::new();
    for &e in g.edges() {
        let first = q(1, m);
        add(&mut out, [e, e], &first * eps);
        for v in [e.lo(), e.hi()] {
            let choices = touching(g, v);
            let each = &first * (q(1, 1) - eps) * q(1, 2) * q(1, choices.len() as i64);
            for f in choices {
                add(&mut out, [e, f], each.clone());
            }
        }
    }
    out
}

fn neg(r: NonzeroTrit) -> NonzeroTrit {
    nz(3 - r.value())
}

/// Two-stage enumeration of the committed distribution.
pub fn committed(g: &Graph, eps: &Q) -> BTreeMap<[Question; 2], Q> {
    let m = g.edges().len() as i64;
    let mut out: BTreeMap<[Question; 2], Q> = BTreeMap::new();
    let mut put = |k: [Question; 2], p: Q| *out.entry(k).or_insert_with(|| q(0, 1)) += p;
    for &e in g.edges() {
        for r in [nz(1), nz(2)] {
            for s in [nz(1), nz(2)] {
                let first = q(1, 4 * m);
                let q1 = Question::new(e, r, s);
                put([q1, Question::new(e, neg(r), neg(s))], &first * eps);
                for v in [e.lo(), e.hi()] {
                    let choices = touching(g, v);
                    let each = &first * (q(1, 1) - eps) * q(1, 2) * q(1, choices.len() as i64) * q(1, 4);
                    for f in choices {
                        for r2 in [nz(1), nz(2)] {
                            for s2 in [nz(1), nz(2)] {
                                put([q1, Question::new(f, r2, s2)], each.clone());
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn triple(g: &Graph, eps: &Q) -> BTreeMap<[Question; 3], Q> {
    let mut out: BTreeMap<[Question; 3], Q> = BTreeMap::new();
    for ([a, b], p) in committed(g, eps) {
        for c in [a, b] {
            *out.entry([a, b, c]).or_insert_with(|| q(0, 1)) += &p * q(1, 2);
        }
    }
    out
}

fn randomness_at(qn: &Question, v: usize) -> Option<NonzeroTrit> {
    if qn.edge.lo() == v {
        Some(qn.r)
    } else if qn.edge.hi() == v {
        Some(qn.s)
    } else {
        None
    }
}

fn value_at(qn: &Question, a: (Trit, Trit), v: usize) -> Option<Trit> {
    if qn.edge.lo() == v {
        Some(a.0)
    } else if qn.edge.hi() == v {
        Some(a.1)
    } else {
        None
    }
}

/// Acceptance of the committed two-prover check, for answers on edges.
/// Stated per vertex: every vertex asked under the same randomness by both
/// provers must receive the same commitment, and when the same edge is
/// asked under fully opposite randomness the unveiled colors must differ.
pub fn accepts_committed(qs: [Question; 2], a: [(Trit, Trit); 2]) -> bool {
    let [q1, q2] = qs;
    if q1.edge == q2.edge && q1.r != q2.r && q1.s != q2.s {
        // c = -(w + w'), so distinct colors iff distinct sums.
        return a[0].0 + a[1].0 != a[0].1 + a[1].1;
    }
    for v in [q1.edge.lo(), q1.edge.hi()] {
        if let (Some(r1), Some(r2)) = (randomness_at(&q1, v), randomness_at(&q2, v)) {
            if r1 == r2 && value_at(&q1, a[0], v) != value_at(&q2, a[1], v) {
                return false;
            }
        }
    }
    true
}

/// Acceptance of the unmasked two-prover check.
pub fn accepts_plain(es: [Edge; 2], a: [(Trit, Trit); 2]) -> bool {
    let [e1, e2] = es;
    if e1 == e2 {
        return a[0] == a[1] && a[0].0 != a[0].1;
    }
    let at = |e: Edge, x: (Trit, Trit), v: usize| if e.lo() == v { x.0 } else { x.1 };
    for v in [e1.lo(), e1.hi()] {
        if (e2.lo() == v || e2.hi() == v) && at(e1, a[0], v) != at(e2, a[1], v) {
            return false;
        }
    }
    true
}

pub fn accepts_triple(qs: [Question; 3], a: [(Trit, Trit); 3]) -> bool {
    for k in 0..2 {
        if qs[2] == qs[k] && a[2] != a[k] {
            return false;
        }
    }
    accepts_committed([qs[0], qs[1]], [a[0], a[1]])
}

/// Brute-force proper 3-colorings.
pub fn colorings(g: &Graph) -> Vec<Vec<Trit>> {
    let n = g.vertex_count();
    (0..3usize.pow(n as u32))
        .map(|mut code| {
            (0..n)
                .map(|_| {
                    let c = t((code % 3) as u8);
                    code /= 3;
                    c
                })
                .collect::<Vec<_>>()
        })
        .filter(|c| g.edges().iter().all(|e| c[e.lo() - 1] != c[e.hi() - 1]))
        .collect()
}
