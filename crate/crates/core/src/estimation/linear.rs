//! Fixed-support fitting for the linear factor model `rho(k) = a (k - T)`.
//!
//! The log-likelihood for a sample `x_1..x_m` is
//! `sum_i [ ln(1 + a (T - x_i)) + (x_i - 1) ln(-a) + sum_{k<x_i} ln(T - k) ]`
//! and is strictly concave in `a` on the admissible interval, so the score
//! has at most one root and bisection finds it to full precision.

use super::{EstError, FisherInfo, FitFamily, FitResult, SampleStats};
use crate::families::{linear_bounds, LinearParams};

/// Width at which bisection on the score stops.
const BISECT_TOL: f64 = 1e-12;
const BISECT_CAP: usize = 200;

fn check_support(stats: &SampleStats, t_max: usize) -> Result<(), EstError> {
    if stats.max() as usize > t_max {
        return Err(EstError::SupportViolation {
            value: stats.max() + stats.shift() as u32,
            t_max,
            shift: stats.shift(),
        });
    }
    Ok(())
}

/// Log-likelihood at coefficient `a`; `-inf` outside the admissible domain.
pub fn loglik(a: f64, t_max: usize, stats: &SampleStats) -> f64 {
    if !(a < 0.0) {
        return f64::NEG_INFINITY;
    }
    let t = t_max as f64;
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

/// Score `dl/da`; strictly decreasing in `a` whenever the sample is not all
/// ones.
pub fn score(a: f64, t_max: usize, stats: &SampleStats) -> f64 {
    let t = t_max as f64;
    let mut acc = (stats.sum() as f64 - stats.n() as f64) / a;
    for &(v, count) in stats.counts() {
        let gap = t - v as f64;
        acc += count as f64 * gap / (1.0 + a * gap);
    }
    acc
}

fn degenerate_fit(stats: &SampleStats) -> FitResult {
    FitResult {
        family: FitFamily::Linear,
        a_hat: 0.0,
        c_hat: None,
        degree: None,
        t_hat: 1,
        shift_hat: stats.shift(),
        loglik: 0.0,
        converged: true,
        degenerate: true,
        solver_iterations: 0,
        grid_edge: false,
        searched_shifts: Vec::new(),
    }
}

/// Maximum-likelihood `a` for a known support `T`.
pub fn fit_fixed_t(stats: &SampleStats, t_max: usize) -> Result<FitResult, EstError> {
    check_support(stats, t_max)?;
    if stats.max() == 1 {
        return Ok(degenerate_fit(stats));
    }
    let bounds = linear_bounds(t_max)?;
    let lo = bounds.lo;
    let mut left = lo * (1.0 - 1e-12);
    let mut right = lo * 1e-15;
    let mut iterations = 0usize;

    let (a_hat, loglik_hat) = if score(left, t_max, stats) <= 0.0 {
        // no sign change: the maximum sits on an interval end.
        let at_bound = loglik(lo, t_max, stats);
        let near_zero = loglik(right, t_max, stats);
        if at_bound >= near_zero {
            (lo, at_bound)
        } else {
            (right, near_zero)
        }
    } else if score(right, t_max, stats) >= 0.0 {
        (right, loglik(right, t_max, stats))
    } else {
        while right - left > BISECT_TOL && iterations < BISECT_CAP {
            let mid = 0.5 * (left + right);
            if score(mid, t_max, stats) > 0.0 {
                left = mid;
            } else {
                right = mid;
            }
            iterations += 1;
        }
        let a = 0.5 * (left + right);
        (a, loglik(a, t_max, stats))
    };

    Ok(FitResult {
        family: FitFamily::Linear,
        a_hat,
        c_hat: None,
        degree: None,
        t_hat: t_max,
        shift_hat: stats.shift(),
        loglik: loglik_hat,
        converged: true,
        degenerate: false,
        solver_iterations: iterations,
        grid_edge: false,
        searched_shifts: Vec::new(),
    })
}

/// Grid-search variant: `a` restricted to `points` values uniformly spaced
/// between the attained endpoint and `-zero_margin`.
///
/// This mirrors a coarse-but-robust optimiser and deliberately keeps `a`
/// away from zero, which matters for near-degenerate small samples.
pub fn fit_fixed_t_grid_a(
    stats: &SampleStats,
    t_max: usize,
    points: usize,
    zero_margin: f64,
) -> Result<FitResult, EstError> {
    check_support(stats, t_max)?;
    let bounds = linear_bounds(t_max)?;
    let lo = bounds.lo;
    let hi = -zero_margin.abs();
    let m = points.max(2);
    let mut best_a = lo;
    let mut best_l = f64::NEG_INFINITY;
    for j in 0..m {
        let a = lo + (hi - lo) * j as f64 / (m - 1) as f64;
        let l = loglik(a, t_max, stats);
        if l > best_l {
            best_l = l;
            best_a = a;
        }
    }
    Ok(FitResult {
        family: FitFamily::Linear,
        a_hat: best_a,
        c_hat: None,
        degree: None,
        t_hat: t_max,
        shift_hat: stats.shift(),
        loglik: best_l,
        converged: true,
        degenerate: false,
        solver_iterations: m,
        grid_edge: false,
        searched_shifts: Vec::new(),
    })
}

/// Fisher information `Phi(a) = N sum_k f(k) [ (k-1)/a^2 + (T-k)^2 / (1 + a(T-k))^2 ]`.
pub fn fisher(a: f64, t_max: usize, n_draws: usize) -> Result<FisherInfo, EstError> {
    let pmf = LinearParams::new(a, t_max).pmf()?;
    let t = t_max as f64;
    let mut phi = 0.0f64;
    for k in 1..=t_max {
        let f = pmf.prob(k);
        if f == 0.0 {
            continue;
        }
        let gap = t - k as f64;
        let denom = 1.0 + a * gap;
        phi += f * ((k as f64 - 1.0) / (a * a) + gap * gap / (denom * denom));
    }
    FisherInfo::from_matrix(n_draws, 1, vec![phi * n_draws as f64])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::FamilyParams;
    use crate::sampling::SampleBatch;

    fn stats(values: &[u32]) -> SampleStats {
        SampleStats::new(values, 0).unwrap()
    }

    #[test]
    fn loglik_equals_direct_pmf_sum() {
        let s = stats(&[2, 5, 9, 9, 3]);
        for &a in &[-0.02, -0.05, -0.1, -1.0 / 9.0] {
            let pmf = LinearParams::new(a, 10).pmf().unwrap();
            let direct: f64 = [2u32, 5, 9, 9, 3]
                .iter()
                .map(|&x| pmf.prob(x as usize).ln())
                .sum();
            let fast = loglik(a, 10, &s);
            assert!((direct - fast).abs() < 1e-10, "a = {a}: {direct} vs {fast}");
        }
    }

    #[test]
    fn score_matches_finite_differences() {
        let s = stats(&[2, 5, 9, 9, 3, 1, 4]);
        let h = 1e-7;
        for &a in &[-0.02, -0.05, -0.09] {
            let fd = (loglik(a + h, 10, &s) - loglik(a - h, 10, &s)) / (2.0 * h);
            let an = score(a, 10, &s);
            assert!(
                ((fd - an) / an).abs() < 1e-6,
                "a = {a}: fd {fd} vs score {an}"
            );
        }
    }

    #[test]
    fn score_is_strictly_decreasing() {
        let s = stats(&[1, 4, 7, 10, 2]);
        let mut prev = f64::INFINITY;
        for j in 1..40 {
            let a = -1.0 / 9.0 + j as f64 * (1.0 / 9.0 - 1e-6) / 40.0;
            let sc = score(a, 10, &s);
            assert!(sc < prev);
            prev = sc;
        }
    }

    #[test]
    fn fit_beats_a_fine_grid() {
        let s = stats(&[2, 5, 9, 9, 3, 1, 4, 6, 2, 8]);
        let fit = fit_fixed_t(&s, 10).unwrap();
        assert!(fit.converged && !fit.degenerate);
        let lo = -1.0 / 9.0;
        for j in 1..1000 {
            let a = lo + (0.0 - lo) * j as f64 / 1000.0 - 1e-9;
            assert!(fit.loglik + 1e-9 >= loglik(a, 10, &s));
        }
    }

    #[test]
    fn recovers_truth_from_large_sample() {
        let truth = FamilyParams::Linear {
            a: -0.1,
            t_max: 10,
            shift: 0,
        };
        let batch = SampleBatch::from_family(&truth, 100_000, 99).unwrap();
        let s = stats(batch.values());
        let fit = fit_fixed_t(&s, 10).unwrap();
        assert!((fit.a_hat + 0.1).abs() < 0.004, "a_hat = {}", fit.a_hat);
    }

    #[test]
    fn all_ones_degenerates_to_point_mass() {
        let s = stats(&[1, 1, 1, 1]);
        let fit = fit_fixed_t(&s, 10).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.t_hat, 1);
        assert_eq!(fit.a_hat, 0.0);
        assert_eq!(fit.loglik, 0.0);
    }

    #[test]
    fn all_at_support_end_hits_the_boundary() {
        let s = stats(&[10, 10, 10]);
        let fit = fit_fixed_t(&s, 10).unwrap();
        assert_eq!(fit.a_hat, -1.0 / 9.0);
        assert!(fit.converged);
    }

    #[test]
    fn support_violation_detected() {
        let s = stats(&[4, 12]);
        assert!(matches!(
            fit_fixed_t(&s, 10),
            Err(EstError::SupportViolation { value: 12, .. })
        ));
    }

    #[test]
    fn grid_solver_tracks_continuous_solver() {
        let s = stats(&[2, 5, 9, 9, 3, 1, 4, 6, 2, 8]);
        let cont = fit_fixed_t(&s, 10).unwrap();
        let grid = fit_fixed_t_grid_a(&s, 10, 2000, 1e-4).unwrap();
        assert!((cont.a_hat - grid.a_hat).abs() < 1e-3);
    }

    #[test]
    fn fisher_scales_linearly_in_draws() {
        let one = fisher(-0.1, 10, 1).unwrap();
        let many = fisher(-0.1, 10, 1000).unwrap();
        assert!((many.matrix[0] / one.matrix[0] - 1000.0).abs() < 1e-9);
        assert!(one.matrix[0] > 0.0);
        assert!((one.crlb[0] - 1.0 / one.matrix[0]).abs() < 1e-18);
    }
}
