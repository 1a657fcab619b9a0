//! Continuous-support relaxations of the log-likelihoods and their exact
//! derivatives in `T`.
//!
//! The discrete grid search treats `T` as an integer; these references extend
//! each log-likelihood to real `T` (every term is already smooth in `T` once
//! written as sums of logarithms) and provide `dl/dT` in closed form. They
//! are used to sanity-check grid optima: a grid winner should bracket a sign
//! change of the continuous derivative.
//!
//! Note the polynomial family has two inequivalent derivatives: holding `a`
//! fixed while `T` moves is not the same experiment as holding `b` fixed,
//! because `b = -a (T-c)^n` ties the two together through `T`.

use super::SampleStats;

/// Linear-family log-likelihood at real-valued support `t`.
pub fn loglik_linear_continuous(a: f64, t: f64, stats: &SampleStats) -> f64 {
    if !(a < 0.0) || t < stats.max() as f64 {
        return f64::NEG_INFINITY;
    }
    let mut acc = (stats.sum() as f64 - stats.n() as f64) * (-a).ln();
    for &(v, count) in stats.counts() {
        let arg = 1.0 + a * (t - v as f64);
        if arg <= 0.0 {
            return f64::NEG_INFINITY;
        }
        acc += count as f64 * arg.ln();
    }
    for k in 1..stats.max() as usize {
        let w = stats.exceed(k);
        if w > 0 {
            acc += w as f64 * (t - k as f64).ln();
        }
    }
    acc
}

/// `dl/dT` for the linear family at fixed `a`:
/// `sum_i [ a/(1 + a(T - x_i)) + sum_{k<x_i} 1/(T-k) ]`.
pub fn dloglik_dt_linear(a: f64, t: f64, stats: &SampleStats) -> f64 {
    let mut acc = 0.0f64;
    for &(v, count) in stats.counts() {
        acc += count as f64 * a / (1.0 + a * (t - v as f64));
    }
    for k in 1..stats.max() as usize {
        let w = stats.exceed(k);
        if w > 0 {
            acc += w as f64 / (t - k as f64);
        }
    }
    acc
}

/// Polynomial-family log-likelihood in the `a` parametrisation at real `t`.
pub fn loglik_poly_a_continuous(a: f64, c: f64, n: u32, t: f64, stats: &SampleStats) -> f64 {
    if !(a < 0.0) {
        return f64::NEG_INFINITY;
    }
    let ni = n as i32;
    let tc = (t - c).powi(ni);
    let h = |k: f64| tc - (k - c).powi(ni);
    let mut acc = (stats.sum() as f64 - stats.n() as f64) * (-a).ln();
    for &(v, count) in stats.counts() {
        let arg = 1.0 + a * h(v as f64);
        if arg <= 0.0 {
            return f64::NEG_INFINITY;
        }
        acc += count as f64 * arg.ln();
    }
    for k in 1..stats.max() as usize {
        let w = stats.exceed(k);
        if w == 0 {
            continue;
        }
        let hk = h(k as f64);
        if hk <= 0.0 {
            return f64::NEG_INFINITY;
        }
        acc += w as f64 * hk.ln();
    }
    acc
}

/// `dl/dT` for the polynomial family at fixed `(a, c)`:
/// `sum_i [ n a (T-c)^{n-1} / (1 + a h(x_i)) + sum_{k<x_i} n (T-c)^{n-1} / h(k) ]`
/// with `h(k) = (T-c)^n - (k-c)^n`.
pub fn dloglik_dt_poly_a(a: f64, c: f64, n: u32, t: f64, stats: &SampleStats) -> f64 {
    let ni = n as i32;
    let nf = n as f64;
    let tc = (t - c).powi(ni);
    let tc1 = nf * (t - c).powi(ni - 1);
    let h = |k: f64| tc - (k - c).powi(ni);
    let mut acc = 0.0f64;
    for &(v, count) in stats.counts() {
        acc += count as f64 * a * tc1 / (1.0 + a * h(v as f64));
    }
    for k in 1..stats.max() as usize {
        let w = stats.exceed(k);
        if w > 0 {
            acc += w as f64 * tc1 / h(k as f64);
        }
    }
    acc
}

/// Polynomial-family log-likelihood in the `b` parametrisation at real `t`.
pub fn loglik_poly_b_continuous(b: f64, c: f64, n: u32, t: f64, stats: &SampleStats) -> f64 {
    if !(b > 0.0) {
        return f64::NEG_INFINITY;
    }
    let ni = n as i32;
    let tc = (t - c).powi(ni);
    let mut acc = (stats.sum() as f64 - stats.n() as f64) * (b.ln() - (n as f64) * (t - c).ln());
    for &(v, count) in stats.counts() {
        let arg = 1.0 + b * ((v as f64 - c).powi(ni) / tc - 1.0);
        if arg <= 0.0 {
            return f64::NEG_INFINITY;
        }
        acc += count as f64 * arg.ln();
    }
    for k in 1..stats.max() as usize {
        let w = stats.exceed(k);
        if w == 0 {
            continue;
        }
        let hk = tc - (k as f64 - c).powi(ni);
        if hk <= 0.0 {
            return f64::NEG_INFINITY;
        }
        acc += w as f64 * hk.ln();
    }
    acc
}

/// `dl/dT` for the polynomial family at fixed `(b, c)`.
pub fn dloglik_dt_poly_b(b: f64, c: f64, n: u32, t: f64, stats: &SampleStats) -> f64 {
    let ni = n as i32;
    let nf = n as f64;
    let tc = (t - c).powi(ni);
    let mut acc = -nf * (stats.sum() as f64 - stats.n() as f64) / (t - c);
    for &(v, count) in stats.counts() {
        let ratio = (v as f64 - c).powi(ni) / tc;
        let arg = 1.0 + b * (ratio - 1.0);
        acc -= count as f64 * nf * b * ratio / ((t - c) * arg);
    }
    let tc1 = nf * (t - c).powi(ni - 1);
    for k in 1..stats.max() as usize {
        let w = stats.exceed(k);
        if w > 0 {
            acc += w as f64 * tc1 / (tc - (k as f64 - c).powi(ni));
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::super::{linear, poly};
    use super::*;

    fn stats(values: &[u32]) -> SampleStats {
        SampleStats::new(values, 0).unwrap()
    }

    #[test]
    fn continuous_extensions_agree_at_integer_support() {
        let s = stats(&[2, 5, 9, 3, 3]);
        let a = -0.04;
        assert!((loglik_linear_continuous(a, 12.0, &s) - linear::loglik(a, 12, &s)).abs() < 1e-10);
        let (a2, c) = (-1e-4, 4.0);
        assert!(
            (loglik_poly_a_continuous(a2, c, 3, 12.0, &s) - poly::loglik(a2, c, 3, 12, &s)).abs()
                < 1e-10
        );
    }

    #[test]
    fn a_and_b_forms_describe_the_same_model() {
        let s = stats(&[2, 5, 9, 3]);
        let (a, c, t) = (-1e-4, 4.0, 12.5f64);
        let b = -a * (t - c).powi(3);
        let la = loglik_poly_a_continuous(a, c, 3, t, &s);
        let lb = loglik_poly_b_continuous(b, c, 3, t, &s);
        assert!((la - lb).abs() < 1e-10, "{la} vs {lb}");
    }

    #[test]
    fn linear_derivative_matches_finite_differences() {
        let s = stats(&[2, 5, 9, 3, 7, 1]);
        let (a, t) = (-0.05, 13.7);
        let h = 1e-5;
        let fd = (loglik_linear_continuous(a, t + h, &s) - loglik_linear_continuous(a, t - h, &s))
            / (2.0 * h);
        let an = dloglik_dt_linear(a, t, &s);
        assert!(((fd - an) / an).abs() < 1e-7, "{fd} vs {an}");
    }

    #[test]
    fn poly_derivatives_match_finite_differences() {
        let s = stats(&[2, 5, 9, 3, 7]);
        let (a, c, t) = (-1e-4, 4.0, 13.3);
        let h = 1e-5;
        let fd = (loglik_poly_a_continuous(a, c, 3, t + h, &s)
            - loglik_poly_a_continuous(a, c, 3, t - h, &s))
            / (2.0 * h);
        let an = dloglik_dt_poly_a(a, c, 3, t, &s);
        assert!(((fd - an) / an).abs() < 1e-6, "a-form: {fd} vs {an}");

        let b = 0.7;
        let fd = (loglik_poly_b_continuous(b, c, 3, t + h, &s)
            - loglik_poly_b_continuous(b, c, 3, t - h, &s))
            / (2.0 * h);
        let an = dloglik_dt_poly_b(b, c, 3, t, &s);
        assert!(((fd - an) / an).abs() < 1e-6, "b-form: {fd} vs {an}");
    }

    #[test]
    fn all_ones_sample_reduces_to_single_term() {
        let s = stats(&[1, 1, 1, 1]);
        let (a, t) = (-0.03, 11.0);
        let expect = 4.0 * a / (1.0 + a * (t - 1.0));
        assert!((dloglik_dt_linear(a, t, &s) - expect).abs() < 1e-14);
    }
}
