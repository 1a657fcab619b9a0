//! Seeded sampling from sojourn distributions.
//!
//! Two mechanisms are provided: inverse-CDF lookup (the workhorse) and the
//! sequential pass that re-enacts the definition, continuing past step `k`
//! with probability `rho(k)`. They share no code path, which makes the
//! sequential sampler a useful cross-check on the inverse-CDF tables.

use crate::dist::{RhoSequence, SojournPmf};
use crate::families::{FamilyError, FamilyParams};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic RNG for trial `(seed, size_index, trial)`.
///
/// Streams are split by hashing the three coordinates through splitmix64
/// rounds, so any (size, trial) pair gets an independent ChaCha8 stream and
/// results never depend on scheduling order.
pub fn trial_rng(seed: u64, size_index: u64, trial: u64) -> ChaCha8Rng {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e3779b97f4a7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }
    let mixed =
        splitmix(seed ^ splitmix(size_index.wrapping_add(1) ^ splitmix(trial.wrapping_add(1))));
    ChaCha8Rng::seed_from_u64(mixed)
}

/// Draws `n` values from `pmf` by inverse-CDF lookup on the absolute support.
pub fn sample_inverse<R: Rng + ?Sized>(pmf: &SojournPmf, n: usize, rng: &mut R) -> Vec<u32> {
    let cdf = pmf.cdf();
    let shift = pmf.shift() as u32;
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let idx = cdf.partition_point(|&f| f <= u).min(cdf.len() - 1);
            shift + idx as u32 + 1
        })
        .collect()
}

/// Draws `n` values by walking the factor sequence: from step `k` continue
/// with probability `rho(k)`, stop otherwise.
pub fn sample_mechanism<R: Rng + ?Sized>(
    rho: &RhoSequence,
    shift: usize,
    n: usize,
    rng: &mut R,
) -> Vec<u32> {
    let t_max = rho.support_max();
    (0..n)
        .map(|_| {
            let mut k = 1usize;
            while k < t_max {
                let u: f64 = rng.random();
                if u < rho.get(k) {
                    k += 1;
                } else {
                    break;
                }
            }
            (shift + k) as u32
        })
        .collect()
}

/// A drawn sample together with the seed that produced it.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    values: Vec<u32>,
    seed: Option<u64>,
    source: Option<FamilyParams>,
}

impl SampleBatch {
    /// Draws `n` values from a parametric family with a fresh seeded stream.
    pub fn from_family(params: &FamilyParams, n: usize, seed: u64) -> Result<Self, FamilyError> {
        let pmf = params.pmf()?;
        let mut rng = trial_rng(seed, 0, 0);
        Ok(Self {
            values: sample_inverse(&pmf, n, &mut rng),
            seed: Some(seed),
            source: Some(*params),
        })
    }

    /// Wraps observed data (no generating model attached).
    pub fn from_values(values: Vec<u32>) -> Self {
        Self {
            values,
            seed: None,
            source: None,
        }
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn source(&self) -> Option<&FamilyParams> {
        self.source.as_ref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
