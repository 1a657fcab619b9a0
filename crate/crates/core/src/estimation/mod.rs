//! Maximum-likelihood estimation for the factor families.
//!
//! `linear` and `poly` fit a known support `T`; `grid` searches unknown
//! support and shift; `tshift` holds continuous-support derivative references
//! used to sanity-check grid searches against a smooth relaxation.

pub mod grid;
pub mod linear;
pub mod poly;
pub mod tshift;

use crate::families::{FamilyError, FamilyParams};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EstError {
    #[error("sample is empty")]
    EmptySample,
    #[error("observation {value} outside the support implied by T = {t_max}, shift = {shift}")]
    SupportViolation {
        value: u32,
        t_max: usize,
        shift: usize,
    },
    #[error("shift {shift} not below the sample minimum {min}")]
    ShiftTooLarge { shift: usize, min: u32 },
    #[error("no admissible starting point for the optimiser")]
    NoFeasibleStart,
    #[error("information matrix is numerically singular (condition {cond:.3e})")]
    SingularInformation { cond: f64 },
    #[error(transparent)]
    Family(#[from] FamilyError),
}

/// Histogram view of a sample after shift removal.
///
/// Estimation only ever touches counts of distinct values plus a handful of
/// prefix weights, so fits cost the same for 10 observations or 10 million.
#[derive(Debug, Clone)]
pub struct SampleStats {
    n: usize,
    min: u32,
    max: u32,
    sum: u64,
    /// Sorted `(value, count)` pairs over shift-removed values.
    counts: Vec<(u32, u64)>,
    /// `w[k-1] = #{ x_i > k }` for `k = 1..max`.
    exceed: Vec<u64>,
    shift: usize,
}

impl SampleStats {
    /// Builds the histogram of `x - shift`; every observation must exceed
    /// the shift.
    pub fn new(values: &[u32], shift: usize) -> Result<Self, EstError> {
        if values.is_empty() {
            return Err(EstError::EmptySample);
        }
        let raw_min = *values.iter().min().expect("non-empty");
        if raw_min as usize <= shift {
            return Err(EstError::ShiftTooLarge {
                shift,
                min: raw_min,
            });
        }
        let mut sorted: Vec<u32> = values.iter().map(|&v| v - shift as u32).collect();
        sorted.sort_unstable();
        let min = sorted[0];
        let max = *sorted.last().expect("non-empty");
        let sum = sorted.iter().map(|&v| v as u64).sum();
        let mut counts: Vec<(u32, u64)> = Vec::new();
        for &v in &sorted {
            match counts.last_mut() {
                Some((value, count)) if *value == v => *count += 1,
                _ => counts.push((v, 1)),
            }
        }
        let n = values.len();
        let mut exceed = vec![0u64; max as usize];
        let mut above = n as u64;
        let mut iter = counts.iter().peekable();
        for k in 1..=max as usize {
            if let Some(&&(value, count)) = iter.peek() {
                if value as usize == k {
                    above -= count;
                    iter.next();
                }
            }
            if k < max as usize {
                exceed[k - 1] = above;
            }
        }
        exceed[max as usize - 1] = 0;
        Ok(Self {
            n,
            min,
            max,
            sum,
            counts,
            exceed,
            shift,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Smallest shift-removed value.
    pub fn min(&self) -> u32 {
        self.min
    }

    /// Largest shift-removed value.
    pub fn max(&self) -> u32 {
        self.max
    }

    pub fn sum(&self) -> u64 {
        self.sum
    }

    pub fn shift(&self) -> usize {
        self.shift
    }

    pub fn counts(&self) -> &[(u32, u64)] {
        &self.counts
    }

    /// `#{ x_i > k }` for 1-based `k` up to `max`.
    pub fn exceed(&self, k: usize) -> u64 {
        if k >= 1 && k <= self.exceed.len() {
            self.exceed[k - 1]
        } else {
            0
        }
    }

    pub fn mean(&self) -> f64 {
        self.sum as f64 / self.n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitFamily {
    Linear,
    Poly,
}

/// Outcome of a maximum-likelihood fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub family: FitFamily,
    pub a_hat: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub c_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub degree: Option<u32>,
    #[serde(rename = "T_hat")]
    pub t_hat: usize,
    pub shift_hat: usize,
    pub loglik: f64,
    pub converged: bool,
    /// Set when the maximiser collapsed to the point mass at the minimum
    /// (every observation equal); `a_hat` is then the `a -> 0` sentinel 0.
    pub degenerate: bool,
    pub solver_iterations: usize,
    /// Set when an unknown-support search ended on the largest grid value.
    pub grid_edge: bool,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub searched_shifts: Vec<usize>,
}

impl FitResult {
    /// Parameter set describing the fitted distribution (point mass for
    /// degenerate fits).
    pub fn params(&self) -> FamilyParams {
        if self.degenerate {
            return FamilyParams::Linear {
                a: 0.0,
                t_max: 1,
                shift: self.shift_hat,
            };
        }
        match self.family {
            FitFamily::Linear => FamilyParams::Linear {
                a: self.a_hat,
                t_max: self.t_hat,
                shift: self.shift_hat,
            },
            FitFamily::Poly => FamilyParams::Poly {
                a: self.a_hat,
                c: self.c_hat.unwrap_or(0.0),
                n: self.degree.unwrap_or(1),
                t_max: self.t_hat,
                shift: self.shift_hat,
            },
        }
    }
}

/// Fisher information evaluated at a parameter point, with the implied
/// Cramer-Rao floor on estimator variances.
#[derive(Debug, Clone, Serialize)]
pub struct FisherInfo {
    pub n_draws: usize,
    pub dim: usize,
    /// Row-major `dim x dim` information matrix.
    pub matrix: Vec<f64>,
    /// Diagonal of the inverse information matrix.
    pub crlb: Vec<f64>,
}

impl FisherInfo {
    pub(crate) fn from_matrix(
        n_draws: usize,
        dim: usize,
        matrix: Vec<f64>,
    ) -> Result<Self, EstError> {
        assert_eq!(matrix.len(), dim * dim);
        let crlb = match dim {
            1 => {
                let phi = matrix[0];
                if !(phi.is_finite() && phi > 0.0) {
                    return Err(EstError::SingularInformation {
                        cond: f64::INFINITY,
                    });
                }
                vec![1.0 / phi]
            }
            2 => {
                let (a, b, c, d) = (matrix[0], matrix[1], matrix[2], matrix[3]);
                let det = a * d - b * c;
                // symmetric 2x2: eigenvalues give the condition number.
                let tr = a + d;
                let disc = ((a - d) * (a - d) + 4.0 * b * c).max(0.0).sqrt();
                let e_max = (tr + disc) / 2.0;
                let e_min = (tr - disc) / 2.0;
                let cond = if e_min > 0.0 {
                    e_max / e_min
                } else {
                    f64::INFINITY
                };
                if !(det.is_finite() && det > 0.0) || cond > 1e12 {
                    return Err(EstError::SingularInformation { cond });
                }
                vec![d / det, a / det]
            }
            _ => unreachable!("information matrices here are 1x1 or 2x2"),
        };
        Ok(Self {
            n_draws,
            dim,
            matrix,
            crlb,
        })
    }
}
