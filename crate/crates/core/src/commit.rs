//! F3 arithmetic and the two-prover commitment `w = b·r + c`.
//!
//! A verifier holding commitments to the same vertex can interpret them in
//! three ways, without the provers being able to tell which one applies:
//!
//! * different vertices: each `w` is masked by an independent uniform `b·r`
//!   and reveals nothing (forever hiding);
//! * same vertex, same `r`: the two commitments must be equal (consistency);
//! * same vertex, `r' = -r`: `c = 2⁻¹(w + w')` (implicit unveiling).

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;

use crate::error::{FieldError, ProtocolError};
use crate::graph::{Coloring, Graph, Vertex};

/// An element of F3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Trit(u8);

impl Trit {
    pub const ZERO: Trit = Trit(0);
    pub const ONE: Trit = Trit(1);
    pub const TWO: Trit = Trit(2);
    pub const ALL: [Trit; 3] = [Trit(0), Trit(1), Trit(2)];

    /// Reduces `v` mod 3.
    pub const fn new(v: u8) -> Self {
        Trit(v % 3)
    }

    pub fn try_new(v: u8) -> Result<Self, FieldError> {
        if v < 3 {
            Ok(Trit(v))
        } else {
            Err(FieldError::OutOfRange(v))
        }
    }

    pub const fn value(self) -> u8 {
        self.0
    }

    pub const fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn inv(self) -> Result<Trit, FieldError> {
        match self.0 {
            0 => Err(FieldError::InverseOfZero),
            // 1·1 = 1 and 2·2 = 4 = 1: every nonzero trit is its own inverse.
            v => Ok(Trit(v)),
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Trit(rng.random_range(0..3))
    }
}

impl Add for Trit {
    type Output = Trit;
    fn add(self, rhs: Trit) -> Trit {
        Trit((self.0 + rhs.0) % 3)
    }
}

impl Sub for Trit {
    type Output = Trit;
    fn sub(self, rhs: Trit) -> Trit {
        self + (-rhs)
    }
}

impl Mul for Trit {
    type Output = Trit;
    fn mul(self, rhs: Trit) -> Trit {
        Trit((self.0 * rhs.0) % 3)
    }
}

impl Neg for Trit {
    type Output = Trit;
    fn neg(self) -> Trit {
        Trit((3 - self.0) % 3)
    }
}

impl fmt::Display for Trit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn f3_add(a: Trit, b: Trit) -> Trit {
    a + b
}

pub fn f3_mul(a: Trit, b: Trit) -> Trit {
    a * b
}

pub fn f3_neg(a: Trit) -> Trit {
    -a
}

pub fn f3_inv(a: Trit) -> Result<Trit, FieldError> {
    a.inv()
}

/// An element of F3*, i.e. 1 or 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NonzeroTrit(Trit);

impl NonzeroTrit {
    pub const ONE: NonzeroTrit = NonzeroTrit(Trit::ONE);
    pub const TWO: NonzeroTrit = NonzeroTrit(Trit::TWO);
    pub const ALL: [NonzeroTrit; 2] = [NonzeroTrit::ONE, NonzeroTrit::TWO];

    pub fn new(t: Trit) -> Result<Self, FieldError> {
        if t.is_zero() {
            Err(FieldError::ZeroRandomness)
        } else {
            Ok(NonzeroTrit(t))
        }
    }

    pub fn from_u8(v: u8) -> Result<Self, FieldError> {
        Self::new(Trit::try_new(v)?)
    }

    pub fn trit(self) -> Trit {
        self.0
    }

    pub fn value(self) -> u8 {
        self.0.value()
    }

    /// 0 for 1, 1 for 2.
    pub fn index(self) -> usize {
        self.0.index() - 1
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        if rng.random_bool(0.5) {
            NonzeroTrit::ONE
        } else {
            NonzeroTrit::TWO
        }
    }
}

impl Neg for NonzeroTrit {
    type Output = NonzeroTrit;
    fn neg(self) -> NonzeroTrit {
        NonzeroTrit(-self.0)
    }
}

impl fmt::Display for NonzeroTrit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// `w = b·r + c`.
pub fn commit(b: Trit, r: NonzeroTrit, c: Trit) -> Trit {
    b * r.trit() + c
}

/// Recovers the committed value from two commitments under different
/// randomness. Over F3 the only such pair is `{r, -r}`, and the value is
/// `2⁻¹(w + w2)`.
pub fn implicit_unveil(w: Trit, r: NonzeroTrit, w2: Trit, r2: NonzeroTrit) -> Result<Trit, FieldError> {
    if r == r2 {
        return Err(FieldError::SameRandomness);
    }
    Ok(Trit::TWO.inv()? * (w + w2))
}

/// The general-field unveiling formula `(w·r2 - w2·r)(r2 - r)⁻¹`.
pub fn implicit_unveil_general(w: Trit, r: NonzeroTrit, w2: Trit, r2: NonzeroTrit) -> Result<Trit, FieldError> {
    if r == r2 {
        return Err(FieldError::SameRandomness);
    }
    Ok((w * r2.trit() - w2 * r.trit()) * (r2.trit() - r.trit()).inv()?)
}

/// The six permutations of F3, as images of `[0, 1, 2]`, lexicographically.
pub fn color_permutations() -> [[Trit; 3]; 6] {
    let [a, b, c] = Trit::ALL;
    [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]]
}

/// The state honest provers agree on before the protocol: a proper coloring
/// and one mask per vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProverSecret {
    coloring: Coloring,
    masks: Vec<Trit>,
}

impl ProverSecret {
    pub fn new(graph: &Graph, coloring: Coloring, masks: Vec<Trit>) -> Result<Self, ProtocolError> {
        if !graph.is_proper(&coloring) {
            return Err(ProtocolError::ImproperColoring);
        }
        if masks.len() != graph.vertex_count() {
            return Err(ProtocolError::Parse(format!("expected {} masks, got {}", graph.vertex_count(), masks.len())));
        }
        Ok(ProverSecret { coloring, masks })
    }

    /// Random coloring (base coloring under a uniform color permutation)
    /// and uniform masks.
    pub fn random<R: Rng + ?Sized>(graph: &Graph, rng: &mut R) -> Result<Self, ProtocolError> {
        let coloring = graph.find_coloring(rng).ok_or(ProtocolError::NotColorable)?;
        let masks = graph.vertices().map(|_| Trit::random(rng)).collect();
        Ok(ProverSecret { coloring, masks })
    }

    /// The secret provers derive from a shared seed.
    pub fn from_seed(graph: &Graph, seed: u64) -> Result<Self, ProtocolError> {
        Self::random(graph, &mut crate::seeded_rng(seed))
    }

    pub fn coloring(&self) -> &Coloring {
        &self.coloring
    }

    pub fn color(&self, v: Vertex) -> Trit {
        self.coloring.color(v)
    }

    pub fn mask(&self, v: Vertex) -> Trit {
        self.masks[v - 1]
    }

    pub fn masks(&self) -> &[Trit] {
        &self.masks
    }

    pub fn commit_vertex(&self, v: Vertex, r: NonzeroTrit) -> Trit {
        commit(self.mask(v), r, self.color(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: u8) -> Trit {
        Trit::new(v)
    }

    fn nz(v: u8) -> NonzeroTrit {
        NonzeroTrit::from_u8(v).unwrap()
    }

    #[test]
    fn field_examples() {
        assert_eq!(f3_add(t(2), t(2)), t(1));
        assert_eq!(f3_inv(t(2)).unwrap(), t(2));
        assert_eq!(f3_neg(t(1)), t(2));
        assert_eq!(f3_inv(t(0)), Err(FieldError::InverseOfZero));
        assert_eq!(f3_mul(t(2), t(2)), t(1));
        assert_eq!(t(0) - t(1), t(2));
    }

    #[test]
    fn field_axioms_exhaustive() {
        for a in Trit::ALL {
            assert_eq!(a + (-a), Trit::ZERO);
            if !a.is_zero() {
                assert_eq!(a * a.inv().unwrap(), Trit::ONE);
            }
            for b in Trit::ALL {
                assert_eq!(a + b, t((a.value() + b.value()) % 3));
                assert_eq!(a * b, t((a.value() * b.value()) % 3));
                for c in Trit::ALL {
                    assert_eq!(a * (b + c), a * b + a * c);
                }
            }
        }
    }

    #[test]
    fn nonzero_trit_rules() {
        assert_eq!(-NonzeroTrit::ONE, NonzeroTrit::TWO);
        assert_eq!(-NonzeroTrit::TWO, NonzeroTrit::ONE);
        assert_eq!(NonzeroTrit::new(Trit::ZERO), Err(FieldError::ZeroRandomness));
        assert!(NonzeroTrit::from_u8(3).is_err());
    }

    #[test]
    fn commit_examples() {
        assert_eq!(commit(t(1), nz(1), t(2)), t(0));
        for c in Trit::ALL {
            assert_eq!(commit(t(0), nz(2), c), c);
        }
        assert_eq!(commit(t(2), nz(2), t(1)), t(2));
    }

    #[test]
    fn unveil_examples() {
        // commit(b=1, r=1, c=2) = 0 and commit(b=1, r=2, c=2) = 1.
        assert_eq!(implicit_unveil(t(0), nz(1), t(1), nz(2)).unwrap(), t(2));
        // 2⁻¹·(1 + 1) = 2·2 = 1.
        assert_eq!(implicit_unveil(t(1), nz(2), t(1), nz(1)).unwrap(), t(1));
        assert_eq!(implicit_unveil(t(1), nz(2), t(1), nz(2)), Err(FieldError::SameRandomness));
        assert_eq!(implicit_unveil_general(t(1), nz(1), t(0), nz(1)), Err(FieldError::SameRandomness));
    }

    /// Solves `w = b·r + c`, `w2 = b·r2 + c` for `c` by trying every `(b, c)`.
    fn brute_force_unveil(w: Trit, r: NonzeroTrit, w2: Trit, r2: NonzeroTrit) -> Trit {
        let solutions: Vec<Trit> = Trit::ALL
            .iter()
            .flat_map(|&b| Trit::ALL.iter().map(move |&c| (b, c)))
            .filter(|&(b, c)| commit(b, r, c) == w && commit(b, r2, c) == w2)
            .map(|(_, c)| c)
            .collect();
        assert_eq!(solutions.len(), 1, "linear system has a unique solution");
        solutions[0]
    }

    #[test]
    fn unveil_matches_brute_force_solver() {
        for w in Trit::ALL {
            for w2 in Trit::ALL {
                for r in NonzeroTrit::ALL {
                    let r2 = -r;
                    assert_eq!(implicit_unveil(w, r, w2, r2).unwrap(), brute_force_unveil(w, r, w2, r2));
                }
            }
        }
    }

    #[test]
    fn permutations_are_distinct_bijections() {
        let perms = color_permutations();
        for p in perms {
            let mut s = p.to_vec();
            s.sort();
            assert_eq!(s, Trit::ALL.to_vec());
        }
        let mut all = perms.to_vec();
        all.dedup();
        assert_eq!(all.len(), 6);
    }
}
