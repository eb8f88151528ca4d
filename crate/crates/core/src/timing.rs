//! Message sizes and the minimum verifier separation they imply.
//!
//! Separation is the distance light covers while one exchange is being
//! transmitted: `d = c * bits / rate`. Propagation time of the answer is not
//! included. All arithmetic is exact.

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

use crate::dist::Rational;
use crate::engine::Protocol;

/// Signal speed used throughout, in meters per second.
pub const SIGNAL_SPEED: u64 = 299_800_000;

/// Bits on the wire for one trit (value 3 of the 2-bit code is invalid).
pub const BITS_PER_TRIT: u64 = 2;

/// Link rates reported by the timing table: 1 Gb/s and 1 Tb/s.
pub const TABLE_RATES: [u64; 2] = [1_000_000_000, 1_000_000_000_000];

/// Bits sent to and from one prover in one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MessageBits {
    pub to_prover: u64,
    pub from_prover: u64,
}

impl MessageBits {
    pub fn total(&self) -> u64 {
        self.to_prover + self.from_prover
    }

    /// The larger of the two one-way flows, which is what the separation
    /// model charges for. The reply travels after the question, so the two
    /// never occupy the link at once.
    pub fn larger_flow(&self) -> u64 {
        self.to_prover.max(self.from_prover)
    }
}

/// `ceil(log2 n)` for `n >= 1`.
pub fn vertex_label_bits(n: u64) -> u64 {
    assert!(n >= 1, "vertex count must be positive");
    u64::from(64 - (n - 1).leading_zeros())
}

/// A question names two vertices; committed questions add two randomness
/// trits. Every reply is two trits.
pub fn message_bits(protocol: Protocol, n: u64) -> MessageBits {
    assert!(n >= 2, "a question needs two vertices");
    let labels = 2 * vertex_label_bits(n);
    let randomness = if protocol.is_committed() { 2 * BITS_PER_TRIT } else { 0 };
    MessageBits { to_prover: labels + randomness, from_prover: 2 * BITS_PER_TRIT }
}

/// Communication of the earlier relativistic scheme, modeled as `200 n^2`.
pub fn cl17_bits(n: u64) -> u64 {
    assert!(n >= 1, "vertex count must be positive");
    200 * n * n
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimingScenario {
    pub bits_per_exchange: u64,
    /// Bits per second.
    pub link_rate: Rational,
    /// Meters per second.
    pub signal_speed: Rational,
}

impl TimingScenario {
    pub fn new(bits_per_exchange: u64, link_rate: u64) -> Self {
        TimingScenario {
            bits_per_exchange,
            link_rate: Rational::from_integer(BigInt::from(link_rate)),
            signal_speed: Rational::from_integer(BigInt::from(SIGNAL_SPEED)),
        }
    }
}

/// Minimum separation in meters.
pub fn min_separation(scenario: &TimingScenario) -> Rational {
    assert!(scenario.link_rate > Rational::zero(), "link rate must be positive");
    &scenario.signal_speed * Rational::from_integer(BigInt::from(scenario.bits_per_exchange)) / &scenario.link_rate
}

pub fn meters_f64(d: &Rational) -> f64 {
    d.to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimingRow {
    pub n: u64,
    pub ours: MessageBits,
    pub cl17: u64,
    /// `(ours, cl17)` separation for each of [`TABLE_RATES`].
    pub separations: Vec<(Rational, Rational)>,
}

/// One row per vertex count, charging the larger one-way flow of `protocol`.
pub fn timing_table(protocol: Protocol, ns: &[u64]) -> Vec<TimingRow> {
    ns.iter()
        .map(|&n| {
            let ours = message_bits(protocol, n);
            let cl17 = cl17_bits(n);
            let separations = TABLE_RATES
                .iter()
                .map(|&rate| {
                    (
                        min_separation(&TimingScenario::new(ours.larger_flow(), rate)),
                        min_separation(&TimingScenario::new(cl17, rate)),
                    )
                })
                .collect();
            TimingRow { n, ours, cl17, separations }
        })
        .collect()
}

/// Human-readable distance: meters with a unit chosen by magnitude.
pub fn format_distance(d: &Rational) -> String {
    let m = meters_f64(d);
    if m == 0.0 {
        "0 m".to_string()
    } else if m >= 1000.0 {
        format!("{:.3} km", m / 1000.0)
    } else if m >= 1.0 {
        format!("{m:.3} m")
    } else {
        format!("{:.3} mm", m * 1000.0)
    }
}
