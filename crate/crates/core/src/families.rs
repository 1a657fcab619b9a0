//! Parametric factor families.
//!
//! Linear: `rho(k) = a (k - T)`, equivalently `b (1 - k/T)` with `b = -a T`.
//! Polynomial: `rho(k) = a ((k-c)^n - (T-c)^n)`, equivalently
//! `b (1 - (k-c)^n / (T-c)^n)` with `b = -a (T-c)^n`.
//!
//! The `a` form is the canonical parametrisation throughout; `b` is offered
//! as a conversion because it reads as a scale-free "initial slope".

use crate::dist::{DistError, RhoSequence, SojournPmf};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative slack when validating `rho(k) <= 1` at an interval endpoint, so
/// that the exact boundary coefficient survives its own rounding.
const BOUNDARY_SLACK: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum FamilyError {
    #[error("coefficient {a} leaves the admissible interval for {context}")]
    OutOfBounds { a: f64, context: String },
    #[error("no admissible coefficient exists: {0}")]
    EmptyInterval(String),
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// Admissible open-at-zero interval for the leading coefficient `a`.
///
/// Exactly one endpoint is zero and excluded; the other endpoint is attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamInterval {
    pub lo: f64,
    pub hi: f64,
}

impl ParamInterval {
    pub fn contains(&self, a: f64) -> bool {
        if self.lo < 0.0 {
            a >= self.lo * (1.0 + BOUNDARY_SLACK) && a < 0.0
        } else {
            a > 0.0 && a <= self.hi * (1.0 + BOUNDARY_SLACK)
        }
    }

    /// The attained (non-zero) endpoint.
    pub fn boundary(&self) -> f64 {
        if self.lo < 0.0 {
            self.lo
        } else {
            self.hi
        }
    }

    /// Interior point at quantile `q in (0, 1)` measured from zero towards
    /// the attained endpoint.
    pub fn at_quantile(&self, q: f64) -> f64 {
        self.boundary() * q
    }
}

/// Admissible interval `[1/(1-T), 0)` for the linear factor model.
pub fn linear_bounds(t_max: usize) -> Result<ParamInterval, FamilyError> {
    if t_max < 2 {
        return Err(FamilyError::EmptyInterval(
            "linear family needs T >= 2 (T = 1 is the degenerate point mass)".into(),
        ));
    }
    Ok(ParamInterval {
        lo: 1.0 / (1.0 - t_max as f64),
        hi: 0.0,
    })
}

/// Admissible interval for the polynomial factor model, found by enumerating
/// the constraints `0 < a ((k-c)^n - (T-c)^n) <= 1` over `k = 1..T-1`.
///
/// Depending on the parity of `n` and the position of `c` relative to `T`
/// the interval sits on the negative or the positive side of zero; mixed
/// constraint signs (even `n` with `c` in `[(T+1)/2, T)`) leave nothing.
pub fn poly_bounds(n: u32, c: f64, t_max: usize) -> Result<ParamInterval, FamilyError> {
    if t_max < 2 {
        return Err(FamilyError::EmptyInterval(
            "polynomial family needs T >= 2 (T = 1 is the degenerate point mass)".into(),
        ));
    }
    if n == 0 {
        return Err(FamilyError::EmptyInterval("degree n must be >= 1".into()));
    }
    if c == t_max as f64 {
        return Err(FamilyError::EmptyInterval(
            "centre c = T makes every factor zero".into(),
        ));
    }
    let tc = (t_max as f64 - c).powi(n as i32);
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    let mut saw_neg = false;
    let mut saw_pos = false;
    for k in 1..t_max {
        let d = (k as f64 - c).powi(n as i32) - tc;
        if d == 0.0 {
            return Err(FamilyError::EmptyInterval(format!(
                "factor at k = {k} is pinned to zero for c = {c}"
            )));
        }
        if d < 0.0 {
            saw_neg = true;
            lo = lo.max(1.0 / d);
        } else {
            saw_pos = true;
            hi = hi.min(1.0 / d);
        }
    }
    match (saw_neg, saw_pos) {
        (true, false) => Ok(ParamInterval { lo, hi: 0.0 }),
        (false, true) => Ok(ParamInterval { lo: 0.0, hi }),
        _ => Err(FamilyError::EmptyInterval(format!(
            "constraint signs conflict for n = {n}, c = {c}, T = {t_max}"
        ))),
    }
}

fn clamp_factor(rho: f64, a: f64, context: &str) -> Result<f64, FamilyError> {
    if rho > 0.0 && rho <= 1.0 {
        Ok(rho)
    } else if rho > 1.0 && rho <= 1.0 + BOUNDARY_SLACK {
        Ok(1.0)
    } else {
        Err(FamilyError::OutOfBounds {
            a,
            context: context.to_string(),
        })
    }
}

/// Linear factor model `rho(k) = a (k - T)` on `{1, ..., T}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub a: f64,
    pub t_max: usize,
}

impl LinearParams {
    pub fn new(a: f64, t_max: usize) -> Self {
        Self { a, t_max }
    }

    /// Slope-at-origin form `b = -a T`.
    pub fn b(&self) -> f64 {
        -self.a * self.t_max as f64
    }

    pub fn from_b(b: f64, t_max: usize) -> Self {
        Self {
            a: -b / t_max as f64,
            t_max,
        }
    }

    pub fn bounds(&self) -> Result<ParamInterval, FamilyError> {
        linear_bounds(self.t_max)
    }

    pub fn rho(&self) -> Result<RhoSequence, FamilyError> {
        if self.t_max == 1 {
            return Ok(RhoSequence::new(vec![0.0])?);
        }
        let ctx = format!("linear family with T = {}", self.t_max);
        if !(self.a < 0.0) {
            return Err(FamilyError::OutOfBounds {
                a: self.a,
                context: ctx,
            });
        }
        let t = self.t_max as f64;
        let mut rho = Vec::with_capacity(self.t_max);
        for k in 1..self.t_max {
            rho.push(clamp_factor(self.a * (k as f64 - t), self.a, &ctx)?);
        }
        rho.push(0.0);
        Ok(RhoSequence::new(rho)?)
    }

    pub fn pmf(&self) -> Result<SojournPmf, FamilyError> {
        Ok(self.rho()?.pmf())
    }
}

/// Polynomial factor model `rho(k) = a ((k-c)^n - (T-c)^n)` on `{1, ..., T}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyParams {
    pub a: f64,
    pub c: f64,
    pub n: u32,
    pub t_max: usize,
}

impl PolyParams {
    pub fn new(a: f64, c: f64, n: u32, t_max: usize) -> Self {
        Self { a, c, n, t_max }
    }

    /// Scale-free form `b = -a (T-c)^n`.
    pub fn b(&self) -> f64 {
        -self.a * (self.t_max as f64 - self.c).powi(self.n as i32)
    }

    pub fn from_b(b: f64, c: f64, n: u32, t_max: usize) -> Self {
        Self {
            a: -b / (t_max as f64 - c).powi(n as i32),
            c,
            n,
            t_max,
        }
    }

    pub fn bounds(&self) -> Result<ParamInterval, FamilyError> {
        poly_bounds(self.n, self.c, self.t_max)
    }

    pub fn rho(&self) -> Result<RhoSequence, FamilyError> {
        if self.t_max == 1 {
            return Ok(RhoSequence::new(vec![0.0])?);
        }
        let ctx = format!(
            "polynomial family with n = {}, c = {}, T = {}",
            self.n, self.c, self.t_max
        );
        let tc = (self.t_max as f64 - self.c).powi(self.n as i32);
        let mut rho = Vec::with_capacity(self.t_max);
        for k in 1..self.t_max {
            let d = (k as f64 - self.c).powi(self.n as i32) - tc;
            rho.push(clamp_factor(self.a * d, self.a, &ctx)?);
        }
        rho.push(0.0);
        Ok(RhoSequence::new(rho)?)
    }

    pub fn pmf(&self) -> Result<SojournPmf, FamilyError> {
        Ok(self.rho()?.pmf())
    }
}

/// Tagged parameter set as it appears in JSON artefacts.
///
/// `{"family":"linear","a":-0.1,"T":10,"shift":0}` or
/// `{"family":"poly","a":-5e-8,"c":74.9,"n":3,"T":294,"shift":3}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum FamilyParams {
    Linear {
        a: f64,
        #[serde(rename = "T")]
        t_max: usize,
        #[serde(default)]
        shift: usize,
    },
    Poly {
        a: f64,
        c: f64,
        n: u32,
        #[serde(rename = "T")]
        t_max: usize,
        #[serde(default)]
        shift: usize,
    },
}

impl FamilyParams {
    pub fn t_max(&self) -> usize {
        match *self {
            FamilyParams::Linear { t_max, .. } | FamilyParams::Poly { t_max, .. } => t_max,
        }
    }

    pub fn shift(&self) -> usize {
        match *self {
            FamilyParams::Linear { shift, .. } | FamilyParams::Poly { shift, .. } => shift,
        }
    }

    pub fn rho(&self) -> Result<RhoSequence, FamilyError> {
        match *self {
            FamilyParams::Linear { a, t_max, .. } => LinearParams::new(a, t_max).rho(),
            FamilyParams::Poly { a, c, n, t_max, .. } => PolyParams::new(a, c, n, t_max).rho(),
        }
    }

    /// PMF on the absolute support `{shift+1, ..., shift+T}`.
    pub fn pmf(&self) -> Result<SojournPmf, FamilyError> {
        Ok(self.rho()?.pmf().shifted(self.shift()))
    }
}
