//! Monte Carlo photon counting and weighted parity estimators.
//!
//! Random numbers come from ChaCha12 (`rand_chacha`), keyed by a 64-bit
//! master seed expanded with `SeedableRng::seed_from_u64`, with one ChaCha
//! stream per phase-space point. Draw `i` of a stream is the `i`-th `u64`
//! word, mapped to `[0, 1)` by keeping its top 53 bits. The tag
//! [`RNG_ALGORITHM`] names exactly this construction and is written into
//! every JSON output.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::PhotocountDistribution;
use crate::optics::Efficiency;

pub const RNG_ALGORITHM: &str = "chacha12-seed_from_u64-stream_per_point-u64_top53";

/// Master seed plus the index of an independent stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        SeedSpec {
            master_seed,
            stream_index,
        }
    }
}

/// Counter-addressable uniform generator for one [`SeedSpec`].
#[derive(Debug, Clone)]
pub struct UniformStream {
    rng: ChaCha12Rng,
}

impl UniformStream {
    pub fn new(seed: SeedSpec) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed.master_seed);
        rng.set_stream(seed.stream_index);
        UniformStream { rng }
    }

    /// Uniform in `[0, 1)` at an absolute draw index, independent of any
    /// previous draws from this value.
    pub fn at(seed: SeedSpec, draw_index: u64) -> f64 {
        let mut s = UniformStream::new(seed);
        // two 32-bit words per u64 draw
        s.rng.set_word_pos(2 * u128::from(draw_index));
        s.next_uniform()
    }

    pub fn next_uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Result of one weighted-series Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub mean: f64,
    pub stderr: f64,
    pub events: usize,
    pub base: f64,
}

/// Draws `events` photocounts by inverse-CDF lookup.
///
/// Probability missing from the truncated support must be below the
/// distribution's tolerance; the remainder is renormalized away once before
/// sampling.
pub fn sample_photocounts(
    p: &PhotocountDistribution,
    events: usize,
    seed: SeedSpec,
) -> Result<Vec<usize>> {
    if events == 0 {
        return Err(Error::invalid("at least one event is required"));
    }
    let total = p.total();
    let missing = 1.0 - total;
    if missing.abs() > p.tolerance() {
        return Err(Error::Integrity(format!(
            "photocount distribution sums to {total}, off by more than {:.1e}",
            p.tolerance()
        )));
    }
    if total != 1.0 {
        log::debug!("renormalizing photocount distribution by 1/{total}");
    }
    let mut acc = 0.0;
    let cdf: Vec<f64> = p
        .probabilities()
        .iter()
        .map(|x| {
            acc += x / total;
            acc
        })
        .collect();
    let last = cdf.len() - 1;
    let mut stream = UniformStream::new(seed);
    Ok((0..events)
        .map(|_| {
            let u = stream.next_uniform();
            cdf.partition_point(|&c| c <= u).min(last)
        })
        .collect())
}

/// Base `c = 1 - 2/eta` for which `sum c^n p'_n = sum (-1)^n p_n` when
/// `p'` is `p` thinned by efficiency `eta`.
pub fn compensation_base(eta: Efficiency) -> f64 {
    1.0 - 2.0 / eta.value()
}

/// Sample mean of `base^n` over the draws, with the `n-1` standard error.
pub fn weighted_series_estimate(draws: &[usize], base: f64) -> Result<EstimatorResult> {
    if draws.is_empty() {
        return Err(Error::invalid("no draws to estimate from"));
    }
    let n = draws.len() as f64;
    let values: Vec<f64> = draws.iter().map(|&k| base.powi(k as i32)).collect();
    let mean = values.iter().sum::<f64>() / n;
    let stderr = if draws.len() > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(EstimatorResult {
        mean,
        stderr,
        events: draws.len(),
        base,
    })
}

/// Exact mean and variance of a single `base^n` draw from `p`.
pub fn analytic_moments(p: &PhotocountDistribution, base: f64) -> (f64, f64) {
    let mut mean = 0.0;
    let mut second = 0.0;
    let mut w = 1.0;
    for &pn in p.probabilities() {
        mean += w * pn;
        second += w * w * pn;
        w *= base;
    }
    (mean, (second - mean * mean).max(0.0))
}
