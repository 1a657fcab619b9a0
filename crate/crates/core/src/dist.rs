//! Product-form sojourn-time distributions on a finite support `{1, ..., T}`.
//!
//! A distribution here is specified by a factor sequence `rho(1), ..., rho(T)`
//! with `rho(k) in (0, 1]` for `k < T` and `rho(T) = 0`. The PMF is
//! `f(k) = (1 - rho(k)) * prod_{t<k} rho(t)`, which telescopes to a proper
//! probability vector. Constant `rho` recovers the geometric distribution
//! truncated at `T` (with the leftover mass lumped on `T`).

use serde::Serialize;
use thiserror::Error;

/// Switch running products to log-space accumulation above this support size.
const LOG_SPACE_THRESHOLD: usize = 64;

/// Tolerance for accepting a user-supplied probability vector as normalised.
const PMF_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum DistError {
    #[error("factor sequence must be non-empty")]
    Empty,
    #[error("rho({index}) = {value} outside (0, 1]")]
    FactorOutOfRange { index: usize, value: f64 },
    #[error("rho(T) must be exactly 0, got {0}")]
    NonZeroTerminal(f64),
    #[error("probability vector sums to {0}, expected 1 within 1e-12")]
    NotNormalised(f64),
    #[error("f({index}) = {value} is not a probability")]
    BadProbability { index: usize, value: f64 },
    #[error("probability vector has no positive entry")]
    AllZero,
    #[error("tail mass underflows to zero before the support ends")]
    DegenerateTail,
    #[error("transform argument overflows: exp({0}) not representable")]
    Overflow(f64),
}

/// Factor sequence `rho(1..=T)` defining a product-form sojourn distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoSequence {
    rho: Vec<f64>,
}

impl RhoSequence {
    /// Validates `rho(k) in (0, 1]` for `k < T`, `rho(T) == 0`, and finiteness.
    pub fn new(rho: Vec<f64>) -> Result<Self, DistError> {
        if rho.is_empty() {
            return Err(DistError::Empty);
        }
        let t_max = rho.len();
        for (i, &r) in rho.iter().enumerate() {
            if i + 1 == t_max {
                if r != 0.0 {
                    return Err(DistError::NonZeroTerminal(r));
                }
            } else if !(r > 0.0 && r <= 1.0) {
                return Err(DistError::FactorOutOfRange {
                    index: i + 1,
                    value: r,
                });
            }
        }
        Ok(Self { rho })
    }

    /// Largest support point `T`.
    pub fn support_max(&self) -> usize {
        self.rho.len()
    }

    /// `rho(k)` for 1-based `k`.
    pub fn get(&self, k: usize) -> f64 {
        self.rho[k - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.rho
    }

    /// Prefix products `P(k) = prod_{t<=k} rho(t)` for `k = 1..=T`.
    ///
    /// Accumulated in log-space for large supports so that long products of
    /// small factors keep their relative accuracy instead of underflowing
    /// through repeated multiplication.
    pub(crate) fn prefix_products(&self) -> Vec<f64> {
        let t_max = self.rho.len();
        let mut out = Vec::with_capacity(t_max);
        if t_max > LOG_SPACE_THRESHOLD {
            let mut log_p = 0.0f64;
            for &r in &self.rho {
                log_p += r.ln();
                out.push(log_p.exp());
            }
        } else {
            let mut p = 1.0f64;
            for &r in &self.rho {
                p *= r;
                out.push(p);
            }
        }
        out
    }

    /// PMF `f(k) = (1 - rho(k)) * prod_{t<k} rho(t)`, one pass.
    pub fn pmf(&self) -> SojournPmf {
        let t_max = self.rho.len();
        let mut probs = Vec::with_capacity(t_max);
        if t_max > LOG_SPACE_THRESHOLD {
            let mut log_p = 0.0f64;
            for &r in &self.rho {
                probs.push((1.0 - r) * log_p.exp());
                log_p += r.ln();
            }
        } else {
            let mut p = 1.0f64;
            for &r in &self.rho {
                probs.push((1.0 - r) * p);
                p *= r;
            }
        }
        SojournPmf { probs, shift: 0 }
    }

    /// CDF `F(k) = 1 - prod_{t<=k} rho(t)`; `F(T)` is exactly 1.
    pub fn cdf(&self) -> Vec<f64> {
        let mut out = self.prefix_products();
        for v in out.iter_mut() {
            *v = 1.0 - *v;
        }
        *out.last_mut().expect("non-empty by construction") = 1.0;
        out
    }

    /// Raw, central and factorial moments up to `max_order`.
    ///
    /// Uses the prefix-product identity
    /// `E[X^n] = sum_{k<T} ((k+1)^n - k^n) P(k) + 1`
    /// for raw moments; factorial moments are summed directly against the PMF.
    pub fn moments(&self, max_order: usize) -> MomentReport {
        let t_max = self.rho.len();
        let prefix = self.prefix_products();
        let order = max_order.max(2);

        let mut raw = vec![0.0f64; order];
        for n in 1..=order {
            let mut acc = 0.0f64;
            for (k, &p) in prefix.iter().take(t_max.saturating_sub(1)).enumerate() {
                let k = (k + 1) as f64;
                acc += ((k + 1.0).powi(n as i32) - k.powi(n as i32)) * p;
            }
            raw[n - 1] = acc + 1.0;
        }

        let mean = raw[0];
        let mut cross = 0.0f64;
        for (k, &p) in prefix.iter().take(t_max.saturating_sub(1)).enumerate() {
            cross += (k + 1) as f64 * p;
        }
        let variance = mean + 2.0 * cross - mean * mean;

        let pmf = self.pmf();
        let mut factorial = vec![0.0f64; order];
        for n in 1..=order {
            let mut acc = 0.0f64;
            for (i, &f) in pmf.probs.iter().enumerate() {
                let k = (i + 1) as f64;
                let mut term = 1.0f64;
                for j in 0..n {
                    term *= k - j as f64;
                }
                acc += term * f;
            }
            factorial[n - 1] = acc;
        }

        MomentReport {
            mean,
            variance: variance.max(0.0),
            raw: raw.into_iter().take(max_order.max(1)).collect(),
            factorial: factorial.into_iter().take(max_order.max(1)).collect(),
        }
    }

    /// Moment generating function
    /// `M(t) = sum_{k<T} (e^{(k+1)t} - e^{kt}) P(k) + e^t`.
    pub fn mgf(&self, t: f64) -> Result<f64, DistError> {
        let t_max = self.rho.len() as f64;
        if t * t_max >= 709.0 {
            return Err(DistError::Overflow(t * t_max));
        }
        let prefix = self.prefix_products();
        let mut acc = 0.0f64;
        for (k, &p) in prefix.iter().take(self.rho.len() - 1).enumerate() {
            let k = (k + 1) as f64;
            acc += (((k + 1.0) * t).exp() - (k * t).exp()) * p;
        }
        Ok(acc + t.exp())
    }

    /// Probability generating function `P(z) = E[z^X]`.
    ///
    /// For `z > 0` this is `mgf(ln z)`; for `z <= 0` the finite sum
    /// `sum_k z^k f(k)` is evaluated directly.
    pub fn pgf(&self, z: f64) -> Result<f64, DistError> {
        if z > 0.0 {
            return self.mgf(z.ln());
        }
        let t_max = self.rho.len() as f64;
        if z.abs() > 1.0 && t_max * z.abs().ln() >= 709.0 {
            return Err(DistError::Overflow(t_max * z.abs().ln()));
        }
        let pmf = self.pmf();
        let mut acc = 0.0f64;
        for (i, &f) in pmf.probs.iter().enumerate() {
            acc += z.powi((i + 1) as i32) * f;
        }
        Ok(acc)
    }
}

/// Probability mass function on `{shift+1, ..., shift+T}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SojournPmf {
    probs: Vec<f64>,
    shift: usize,
}

impl SojournPmf {
    /// Validates entries and the unit sum, then trims trailing zeros so that
    /// `f(T) > 0`.
    pub fn new(probs: Vec<f64>, shift: usize) -> Result<Self, DistError> {
        for (i, &f) in probs.iter().enumerate() {
            if !(f >= 0.0 && f <= 1.0) {
                return Err(DistError::BadProbability {
                    index: i + 1,
                    value: f,
                });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PMF_SUM_TOL {
            return Err(DistError::NotNormalised(sum));
        }
        let last_pos = match probs.iter().rposition(|&f| f > 0.0) {
            Some(i) => i,
            None => return Err(DistError::AllZero),
        };
        let mut probs = probs;
        probs.truncate(last_pos + 1);
        Ok(Self { probs, shift })
    }

    /// Largest unshifted support point `T`.
    pub fn support_max(&self) -> usize {
        self.probs.len()
    }

    pub fn shift(&self) -> usize {
        self.shift
    }

    /// `f(k)` on the unshifted support `1..=T`; zero outside.
    pub fn prob(&self, k: usize) -> f64 {
        if k >= 1 && k <= self.probs.len() {
            self.probs[k - 1]
        } else {
            0.0
        }
    }

    /// Probability at an absolute support point `x = shift + k`.
    pub fn prob_at(&self, x: usize) -> f64 {
        if x > self.shift {
            self.prob(x - self.shift)
        } else {
            0.0
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `F(x)` at an absolute support point; 0 below, 1 above the support.
    pub fn cdf_at(&self, x: usize) -> f64 {
        if x <= self.shift {
            return 0.0;
        }
        let k = x - self.shift;
        if k >= self.probs.len() {
            return 1.0;
        }
        self.probs[..k].iter().sum::<f64>().min(1.0)
    }

    /// Absolute support `{shift+1, ..., shift+T}`.
    pub fn support(&self) -> std::ops::RangeInclusive<usize> {
        self.shift + 1..=self.shift + self.probs.len()
    }

    /// Returns the same base PMF relocated to `{t0+1, ..., t0+T}`.
    pub fn shifted(&self, t0: usize) -> SojournPmf {
        SojournPmf {
            probs: self.probs.clone(),
            shift: t0,
        }
    }

    /// Recovers the factor sequence via `rho(k) = tail(k+1) / tail(k)` where
    /// `tail(k) = sum_{t>=k} f(t)`.
    ///
    /// Suffix sums avoid the cancellation that the equivalent
    /// `1 - f(k)/(1 - F(k-1))` form suffers deep in the tail.
    pub fn rho(&self) -> Result<RhoSequence, DistError> {
        let t_max = self.probs.len();
        let mut tail = vec![0.0f64; t_max + 1];
        for k in (0..t_max).rev() {
            tail[k] = tail[k + 1] + self.probs[k];
        }
        let mut rho = Vec::with_capacity(t_max);
        for k in 0..t_max {
            if tail[k] <= 0.0 {
                return Err(DistError::DegenerateTail);
            }
            rho.push(tail[k + 1] / tail[k]);
        }
        RhoSequence::new(rho)
    }

    /// CDF over the unshifted support; the last entry is exactly 1.
    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0f64;
        let mut out: Vec<f64> = self
            .probs
            .iter()
            .map(|&f| {
                acc += f;
                acc.min(1.0)
            })
            .collect();
        if let Some(last) = out.last_mut() {
            *last = 1.0;
        }
        out
    }

    /// Moments of the unshifted variable; see [`RhoSequence::moments`].
    pub fn moments(&self, max_order: usize) -> Result<MomentReport, DistError> {
        Ok(self.rho()?.moments(max_order))
    }

    /// Writes `k,f,F` rows with absolute support points. Floats use the
    /// shortest representation that round-trips.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,f,F")?;
        let cdf = self.cdf();
        for (i, (&f, &cum)) in self.probs.iter().zip(cdf.iter()).enumerate() {
            writeln!(w, "{},{},{}", self.shift + i + 1, f, cum)?;
        }
        Ok(())
    }
}

/// Moment summary of a sojourn distribution on its unshifted support.
#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub mean: f64,
    pub variance: f64,
    /// Raw moments `E[X^n]` for `n = 1..=max_order`.
    pub raw: Vec<f64>,
    /// Factorial moments `E[X (X-1) ... (X-n+1)]` for `n = 1..=max_order`.
    pub factorial: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TailVerdict {
    /// `limsup rho < 1`: every moment is finite.
    AllMomentsExist,
    /// The probe suggests `rho(k) -> 1`; moment existence depends on the rate.
    Indeterminate,
}

/// Estimate of `limsup_k rho(k)` from a finite probe.
#[derive(Debug, Clone, Serialize)]
pub struct TailClass {
    pub limsup_rho: f64,
    pub verdict: TailVerdict,
}

/// Classifies an infinite factor rule by probing `rho` over the window
/// `[probe_depth/2, probe_depth]`.
///
/// The window is subsampled at ~4096 log-spaced points: the interesting
/// thresholds sit at depths around 1e9 or beyond, where enumerating every
/// integer is not an option. Values are clamped to `[0, 1]`.
pub fn classify_tail<F: Fn(usize) -> f64>(rule: F, probe_depth: usize) -> TailClass {
    const PROBE_POINTS: usize = 4096;
    let hi = probe_depth.max(1);
    let lo = (hi / 2).max(1);
    let mut sup: f64 = 0.0;
    let ratio = hi as f64 / lo as f64;
    let mut prev = 0usize;
    for i in 0..=PROBE_POINTS {
        let k = ((lo as f64) * ratio.powf(i as f64 / PROBE_POINTS as f64)).round() as usize;
        let k = k.clamp(lo, hi);
        if k == prev {
            continue;
        }
        prev = k;
        sup = sup.max(rule(k).clamp(0.0, 1.0));
    }
    let verdict = if sup < 1.0 - 1e-9 {
        TailVerdict::AllMomentsExist
    } else {
        TailVerdict::Indeterminate
    };
    TailClass {
        limsup_rho: sup,
        verdict,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn three_point_fixture() {
        let rho = RhoSequence::new(vec![0.5, 0.5, 0.0]).unwrap();
        let pmf = rho.pmf();
        assert_eq!(pmf.probs(), &[0.5, 0.25, 0.25]);
        assert_eq!(rho.cdf(), vec![0.5, 0.75, 1.0]);

        let m = rho.moments(2);
        assert_close(m.mean, 1.75, TOL);
        assert_close(m.variance, 0.6875, TOL);
        assert_close(m.raw[1], 3.75, TOL);
        assert_close(m.factorial[1], 2.0, TOL);

        assert_close(rho.pgf(0.5).unwrap(), 0.34375, TOL);
        assert_close(rho.mgf(0.0).unwrap(), 1.0, TOL);
    }

    #[test]
    fn truncated_geometric_lumps_leftover_mass() {
        let rho = RhoSequence::new(vec![0.5, 0.5, 0.5, 0.0]).unwrap();
        let pmf = rho.pmf();
        assert_eq!(pmf.probs(), &[0.5, 0.25, 0.125, 0.125]);
        assert_close(rho.moments(1).mean, 1.875, TOL);
    }

    #[test]
    fn point_mass() {
        let rho = RhoSequence::new(vec![0.0]).unwrap();
        let pmf = rho.pmf();
        assert_eq!(pmf.probs(), &[1.0]);
        let m = rho.moments(3);
        assert_close(m.mean, 1.0, TOL);
        assert_close(m.variance, 0.0, TOL);
        assert_close(m.raw[2], 1.0, TOL);
    }

    #[test]
    fn interior_factor_of_one_gives_zero_probability() {
        let rho = RhoSequence::new(vec![0.5, 1.0, 0.0]).unwrap();
        let pmf = rho.pmf();
        assert_eq!(pmf.probs(), &[0.5, 0.0, 0.5]);
        let back = pmf.rho().unwrap();
        assert_eq!(back.values(), &[0.5, 1.0, 0.0]);
    }

    #[test]
    fn round_trip_large_support() {
        let t_max = 300;
        let rho: Vec<f64> = (1..=t_max)
            .map(|k| {
                if k == t_max {
                    0.0
                } else {
                    0.3 + 0.6 * ((k as f64).sin().abs())
                }
            })
            .collect();
        let rho = RhoSequence::new(rho).unwrap();
        let pmf = rho.pmf();
        let sum: f64 = pmf.probs().iter().sum();
        assert_close(sum, 1.0, TOL);
        let back = pmf.rho().unwrap();
        for k in 1..=t_max {
            assert_close(back.get(k), rho.get(k), 1e-10);
        }
    }

    #[test]
    fn validation_rejects_bad_factors() {
        assert!(RhoSequence::new(vec![]).is_err());
        assert!(RhoSequence::new(vec![0.5, 0.5]).is_err());
        assert!(RhoSequence::new(vec![1.5, 0.0]).is_err());
        assert!(RhoSequence::new(vec![0.0, 0.0]).is_err());
        assert!(SojournPmf::new(vec![0.5, 0.4], 0).is_err());
        assert!(SojournPmf::new(vec![0.0, 0.0], 0).is_err());
    }

    #[test]
    fn trailing_zeros_trimmed() {
        let pmf = SojournPmf::new(vec![0.5, 0.5, 0.0, 0.0], 0).unwrap();
        assert_eq!(pmf.support_max(), 2);
    }

    #[test]
    fn shift_changes_support_only() {
        let pmf = SojournPmf::new(vec![0.5, 0.25, 0.25], 0).unwrap();
        let shifted = pmf.shifted(3);
        assert_eq!(shifted.support(), 4..=6);
        assert_eq!(shifted.prob_at(4), 0.5);
        assert_eq!(shifted.shifted(0), pmf);
    }

    #[test]
    fn mgf_overflow_guard() {
        let rho = RhoSequence::new(vec![0.5, 0.5, 0.0]).unwrap();
        assert!(matches!(rho.mgf(300.0), Err(DistError::Overflow(_))));
    }

    #[test]
    fn tail_classification_examples() {
        let c = classify_tail(|_| 0.9, 1_000_000);
        assert_eq!(c.verdict, TailVerdict::AllMomentsExist);
        assert_close(c.limsup_rho, 0.9, TOL);

        // rho(k) = k/(k+1): no moments exist; the probe must reach deep
        // enough that 1 - 1/(k+1) crosses the 1 - 1e-9 threshold.
        let c = classify_tail(|k| k as f64 / (k + 1) as f64, 4_000_000_000);
        assert_eq!(c.verdict, TailVerdict::Indeterminate);

        // rho(k) = (k/(k+1))^3: only the first moment exists.
        let c = classify_tail(|k| (k as f64 / (k + 1) as f64).powi(3), 10_000_000_000);
        assert_eq!(c.verdict, TailVerdict::Indeterminate);
    }

    #[test]
    fn csv_round_trips() {
        let pmf = SojournPmf::new(vec![0.5, 0.25, 0.25], 2).unwrap();
        let mut buf = Vec::new();
        pmf.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("k,f,F"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0], "3");
        assert_eq!(row[1].parse::<f64>().unwrap(), 0.5);
    }
}
