//! Question distributions for the three protocols.
//!
//! Each distribution exists in two forms: an exact rational [`Pmf`] for
//! test-scale graphs, and a two-stage procedural sampler that mirrors how
//! the verifier draws its questions and scales to any graph size.
//!
//! * base: first edge uniform; with probability ε the same edge again
//!   (edge verification), otherwise an edge through one of its endpoints,
//!   each endpoint with probability 1/2 (well definition).
//! * committed: the base pair plus nonzero randomness for every endpoint.
//!   The ε branch answers `(r, s)` with `(-r, -s)`; the other branch draws
//!   `(r', s')` uniformly.
//! * triple: a committed pair plus a copy of one of its two questions.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;

use crate::commit::NonzeroTrit;
use crate::error::ProtocolError;
use crate::graph::{Edge, Graph};

pub type Rational = BigRational;

/// Exact pmfs are only materialized up to this many edges.
pub const EXACT_EDGE_LIMIT: usize = 64;

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Probability of the edge-verification branch, an exact rational in (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Epsilon {
    num: u64,
    den: u64,
}

impl Epsilon {
    pub fn new(num: u64, den: u64) -> Result<Self, ProtocolError> {
        if den == 0 || num == 0 || num >= den {
            return Err(ProtocolError::Epsilon(format!("{num}/{den}")));
        }
        let g = gcd(num, den);
        Ok(Epsilon { num: num / g, den: den / g })
    }

    pub fn numer(&self) -> u64 {
        self.num
    }

    pub fn denom(&self) -> u64 {
        self.den
    }

    pub fn as_rational(&self) -> Rational {
        Rational::new(BigInt::from(self.num), BigInt::from(self.den))
    }

    pub fn complement(&self) -> Rational {
        Rational::one() - self.as_rational()
    }

    /// Exact Bernoulli(ε) draw.
    pub fn flip<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        rng.random_range(0..self.den) < self.num
    }
}

impl Default for Epsilon {
    fn default() -> Self {
        Epsilon { num: 1, den: 3 }
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Epsilon {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ProtocolError::Epsilon(s.to_string());
        let (n, d) = s.split_once('/').ok_or_else(bad)?;
        Epsilon::new(n.trim().parse().map_err(|_| bad())?, d.trim().parse().map_err(|_| bad())?)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// A question to one prover in the committed protocols: an edge and the
/// randomness for its lower (`r`) and higher (`s`) endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Question {
    pub edge: Edge,
    pub r: NonzeroTrit,
    pub s: NonzeroTrit,
}

impl Question {
    pub fn new(edge: Edge, r: NonzeroTrit, s: NonzeroTrit) -> Self {
        Question { edge, r, s }
    }

    /// The randomness masking vertex `v`, if `v` is an endpoint.
    pub fn randomness_for(&self, v: usize) -> Option<NonzeroTrit> {
        if v == self.edge.lo() {
            Some(self.r)
        } else if v == self.edge.hi() {
            Some(self.s)
        } else {
            None
        }
    }

    /// `(r, s)` as an index in `0..4`.
    pub fn randomness_index(&self) -> usize {
        self.r.index() * 2 + self.s.index()
    }

    pub fn negated(&self) -> Self {
        Question { edge: self.edge, r: -self.r, s: -self.s }
    }

    /// All four questions on `edge`, ordered by [`Question::randomness_index`].
    pub fn all_on(edge: Edge) -> [Question; 4] {
        let [one, two] = NonzeroTrit::ALL;
        [
            Question::new(edge, one, one),
            Question::new(edge, one, two),
            Question::new(edge, two, one),
            Question::new(edge, two, two),
        ]
    }
}

impl fmt::Display for Question {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e={} {} {}", self.edge, self.r, self.s)
    }
}

impl FromStr for Question {
    type Err = ProtocolError;

    /// Parses `e=(i,j) r s`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |why: &str| ProtocolError::Parse(format!("question `{s}`: {why}"));
        let fields: Vec<&str> = s.split_whitespace().collect();
        let [edge, r, s_] = fields.as_slice() else {
            return Err(bad("expected `e=(i,j) r s`"));
        };
        let edge: Edge =
            edge.strip_prefix("e=").ok_or_else(|| bad("missing `e=`"))?.parse().map_err(|_| bad("bad edge"))?;
        let trit = |t: &str| {
            t.parse::<u8>()
                .ok()
                .and_then(|v| NonzeroTrit::from_u8(v).ok())
                .ok_or_else(|| bad("randomness must be 1 or 2"))
        };
        Ok(Question::new(edge, trit(r)?, trit(s_)?))
    }
}

/// Textual outcome representation used by the pmf dump format.
pub trait Token {
    fn token(&self) -> String;
}

impl Token for Edge {
    fn token(&self) -> String {
        self.to_string()
    }
}

impl Token for Question {
    fn token(&self) -> String {
        self.to_string()
    }
}

impl<T: Token, const N: usize> Token for [T; N] {
    fn token(&self) -> String {
        self.iter().map(Token::token).collect::<Vec<_>>().join(" | ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PmfError {
    #[error("non-positive probability {0}")]
    NonPositive(String),
    #[error("total mass is {0}, expected 1")]
    Mass(String),
    #[error("empty support")]
    Empty,
}

/// A finitely supported probability mass function with exact rational
/// probabilities. The support is sorted by outcome and has no duplicates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pmf<T> {
    support: Vec<(T, Rational)>,
}

impl<T: Ord + Clone> Pmf<T> {
    /// Merges duplicate outcomes and validates the pmf invariants.
    pub fn new(entries: impl IntoIterator<Item = (T, Rational)>) -> Result<Self, PmfError> {
        let mut map: BTreeMap<T, Rational> = BTreeMap::new();
        for (t, p) in entries {
            *map.entry(t).or_insert_with(Rational::zero) += p;
        }
        if map.is_empty() {
            return Err(PmfError::Empty);
        }
        if let Some((_, p)) = map.iter().find(|(_, p)| !p.is_positive()) {
            return Err(PmfError::NonPositive(p.to_string()));
        }
        let total: Rational = map.values().sum();
        if !total.is_one() {
            return Err(PmfError::Mass(total.to_string()));
        }
        Ok(Pmf { support: map.into_iter().collect() })
    }

    /// Uniform over the integer counts: `count / Σ counts`.
    pub fn from_counts(counts: impl IntoIterator<Item = (T, u64)>) -> Result<Self, PmfError> {
        let counts: Vec<(T, u64)> = counts.into_iter().collect();
        let total: u64 = counts.iter().map(|(_, c)| c).sum();
        Self::new(counts.into_iter().map(|(t, c)| (t, Rational::new(BigInt::from(c), BigInt::from(total)))))
    }

    pub fn point(outcome: T) -> Self {
        Pmf { support: vec![(outcome, Rational::one())] }
    }

    pub fn support(&self) -> &[(T, Rational)] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn prob(&self, outcome: &T) -> Rational {
        self.support
            .binary_search_by(|(t, _)| t.cmp(outcome))
            .map(|k| self.support[k].1.clone())
            .unwrap_or_else(|_| Rational::zero())
    }

    pub fn total(&self) -> Rational {
        self.support.iter().map(|(_, p)| p).sum()
    }

    /// Probability of the event `pred`.
    pub fn mass(&self, pred: impl Fn(&T) -> bool) -> Rational {
        self.support.iter().filter(|(t, _)| pred(t)).map(|(_, p)| p).sum()
    }

    /// Push-forward through `f`.
    pub fn marginal<U: Ord + Clone>(&self, f: impl Fn(&T) -> U) -> Pmf<U> {
        Pmf::new(self.support.iter().map(|(t, p)| (f(t), p.clone()))).expect("push-forward of a valid pmf is valid")
    }

    /// Integer weights over the least common denominator of the support.
    /// `None` if the weights do not fit in `u128`.
    pub fn integer_weights(&self) -> Option<(Vec<(T, u128)>, u128)> {
        let mut lcm = BigInt::one();
        for (_, p) in &self.support {
            lcm = num_integer::Integer::lcm(&lcm, p.denom());
        }
        let weights = self
            .support
            .iter()
            .map(|(t, p)| Some((t.clone(), (p.numer() * (&lcm / p.denom())).to_u128()?)))
            .collect::<Option<Vec<_>>>()?;
        Some((weights, lcm.to_u128()?))
    }

    /// Exact sampling: one uniform integer below the common denominator.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        let (weights, denom) = self.integer_weights().expect("pmf denominator fits in u128");
        let mut u = rng.random_range(0..denom);
        for (t, w) in weights {
            if u < w {
                return t;
            }
            u -= w;
        }
        unreachable!("weights sum to the denominator")
    }
}

impl<T: Ord + Clone + Token> Pmf<T> {
    /// One line per outcome, `token numerator/denominator`, sorted by token.
    pub fn dump(&self) -> String {
        let mut lines: Vec<String> =
            self.support.iter().map(|(t, p)| format!("{} {}/{}", t.token(), p.numer(), p.denom())).collect();
        lines.sort();
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }
}

/// Exact equality of supports and probabilities.
pub fn dist_equal<T: PartialEq>(p: &Pmf<T>, q: &Pmf<T>) -> bool {
    p.support == q.support
}

/// Well-definition partners of edge `e`: `e'` with its conditional
/// probability given `e` and the well-definition branch.
fn well_definition_partners(g: &Graph, e: Edge) -> Vec<(Edge, Rational)> {
    let mut map: BTreeMap<Edge, Rational> = BTreeMap::new();
    let half = ratio(1, 2);
    for v in [e.lo(), e.hi()] {
        let incident = g.incident_indices(v);
        let share = &half / BigInt::from(incident.len());
        for &k in incident {
            *map.entry(g.edges()[k]).or_insert_with(Rational::zero) += &share;
        }
    }
    map.into_iter().collect()
}

fn check_exact_size(g: &Graph) -> Result<(), ProtocolError> {
    if g.edge_count() > EXACT_EDGE_LIMIT {
        Err(ProtocolError::TooLarge { what: "exact pmf", edges: g.edge_count(), limit: EXACT_EDGE_LIMIT })
    } else {
        Ok(())
    }
}

/// The exact distribution of edge pairs for the unmasked protocol.
pub fn pmf_base(g: &Graph, eps: Epsilon) -> Result<Pmf<[Edge; 2]>, ProtocolError> {
    check_exact_size(g)?;
    let m = BigInt::from(g.edge_count());
    let mut entries = Vec::new();
    for &e in g.edges() {
        let first = Rational::new(BigInt::one(), m.clone());
        entries.push(([e, e], &first * eps.as_rational()));
        for (f, p) in well_definition_partners(g, e) {
            entries.push(([e, f], &first * eps.complement() * p));
        }
    }
    Ok(Pmf::new(entries).expect("construction yields a valid pmf"))
}

/// The exact distribution of question pairs for the two-prover committed
/// protocol.
pub fn pmf_committed(g: &Graph, eps: Epsilon) -> Result<Pmf<[Question; 2]>, ProtocolError> {
    check_exact_size(g)?;
    let m = BigInt::from(g.edge_count());
    let quarter = ratio(1, 4);
    let mut entries = Vec::new();
    for &e in g.edges() {
        let partners = well_definition_partners(g, e);
        let first = Rational::new(BigInt::one(), m.clone()) * &quarter;
        for q in Question::all_on(e) {
            entries.push(([q, q.negated()], &first * eps.as_rational()));
            for (f, p) in &partners {
                let mass = &first * eps.complement() * p * &quarter;
                for q2 in Question::all_on(*f) {
                    entries.push(([q, q2], mass.clone()));
                }
            }
        }
    }
    Ok(Pmf::new(entries).expect("construction yields a valid pmf"))
}

/// The exact distribution of question triples for the three-prover
/// protocol: the third question copies the first or the second.
pub fn pmf_triple(g: &Graph, eps: Epsilon) -> Result<Pmf<[Question; 3]>, ProtocolError> {
    let pairs = pmf_committed(g, eps)?;
    let half = ratio(1, 2);
    let entries = pairs.support().iter().flat_map(|([a, b], p)| {
        let p = p * &half;
        [([*a, *b, *a], p.clone()), ([*a, *b, *b], p)]
    });
    Ok(Pmf::new(entries).expect("construction yields a valid pmf"))
}

fn sample_first<R: Rng + ?Sized>(g: &Graph, rng: &mut R) -> Edge {
    g.edges()[rng.random_range(0..g.edge_count())]
}

fn sample_partner<R: Rng + ?Sized>(g: &Graph, e: Edge, rng: &mut R) -> Edge {
    let v = if rng.random_bool(0.5) { e.lo() } else { e.hi() };
    let incident = g.incident_indices(v);
    g.edges()[incident[rng.random_range(0..incident.len())]]
}

/// Two-stage sampler for [`pmf_base`].
pub fn sample_base<R: Rng + ?Sized>(g: &Graph, eps: Epsilon, rng: &mut R) -> [Edge; 2] {
    let e = sample_first(g, rng);
    if eps.flip(rng) {
        [e, e]
    } else {
        [e, sample_partner(g, e, rng)]
    }
}

/// Two-stage sampler for [`pmf_committed`].
pub fn sample_committed<R: Rng + ?Sized>(g: &Graph, eps: Epsilon, rng: &mut R) -> [Question; 2] {
    let e = sample_first(g, rng);
    let q = Question::new(e, NonzeroTrit::random(rng), NonzeroTrit::random(rng));
    if eps.flip(rng) {
        [q, q.negated()]
    } else {
        let f = sample_partner(g, e, rng);
        [q, Question::new(f, NonzeroTrit::random(rng), NonzeroTrit::random(rng))]
    }
}

/// Two-stage sampler for [`pmf_triple`].
pub fn sample_triple<R: Rng + ?Sized>(g: &Graph, eps: Epsilon, rng: &mut R) -> [Question; 3] {
    let [a, b] = sample_committed(g, eps, rng);
    if rng.random_bool(0.5) {
        [a, b, a]
    } else {
        [a, b, b]
    }
}

/// Pearson χ² statistic of observed counts against an exact pmf, with its
/// degrees of freedom. Outcomes outside the support make the statistic
/// infinite.
pub fn chi_square<T: Ord + Clone>(pmf: &Pmf<T>, counts: &BTreeMap<T, u64>) -> (f64, usize) {
    let n: u64 = counts.values().sum();
    if counts.keys().any(|t| pmf.prob(t).is_zero()) {
        return (f64::INFINITY, pmf.len().saturating_sub(1));
    }
    let stat = pmf
        .support()
        .iter()
        .map(|(t, p)| {
            let expected = p.to_f64().expect("finite probability") * n as f64;
            let observed = counts.get(t).copied().unwrap_or(0) as f64;
            (observed - expected).powi(2) / expected
        })
        .sum();
    (stat, pmf.len().saturating_sub(1))
}

/// Upper-tail critical value of χ² with `dof` degrees of freedom.
pub fn chi_square_critical(dof: usize, alpha: f64) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    ChiSquared::new(dof.max(1) as f64).expect("positive degrees of freedom").inverse_cdf(1.0 - alpha)
}
