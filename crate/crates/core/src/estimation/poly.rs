//! Fixed-support fitting for the polynomial factor model
//! `rho(k) = a ((k-c)^n - (T-c)^n)`.
//!
//! Everything is evaluated through the factors themselves
//! (`l = sum_i [ ln(1 - rho(x_i)) + sum_{t<x_i} ln rho(t) ]`), which keeps the
//! domain checks explicit: any parameter pair that pushes a factor out of
//! `(0, 1]` where the sample needs it scores `-inf` instead of silently
//! producing a complex-log artefact. The likelihood is strictly concave in
//! `a` for fixed `c`, so the inner maximisation is a bisection on the score;
//! the outer search over `c` combines a multistart projected gradient ascent
//! with a coarse profile sweep and a golden-section refinement.

use super::{EstError, FisherInfo, FitFamily, FitResult, SampleStats};
use crate::families::poly_bounds;

const SLACK: f64 = 1e-12;
const BISECT_CAP: usize = 200;

#[derive(Debug, Clone, Copy)]
pub struct PolyOptions {
    /// Points in the coarse profile sweep over `c`.
    pub coarse_c: usize,
    /// Multistart grid: starts in `c`.
    pub c_starts: usize,
    /// Multistart grid: starts in `a` per `c` start.
    pub a_starts: usize,
    /// Iteration cap per gradient-ascent start.
    pub pga_max_iter: usize,
    /// Golden-section stop width as a fraction of the `c` search range.
    pub golden_tol: f64,
}

impl Default for PolyOptions {
    fn default() -> Self {
        Self {
            coarse_c: 33,
            c_starts: 5,
            a_starts: 5,
            pga_max_iter: 60,
            golden_tol: 1e-9,
        }
    }
}

#[inline]
fn rho_at(a: f64, c: f64, n: i32, tc: f64, k: f64) -> f64 {
    a * ((k - c).powi(n) - tc)
}

/// Log-likelihood at `(a, c)`; `-inf` wherever the factor constraints fail.
pub fn loglik(a: f64, c: f64, n: u32, t_max: usize, stats: &SampleStats) -> f64 {
    let t = t_max as f64;
    let ni = n as i32;
    let tc = (t - c).powi(ni);
    let mut acc = 0.0f64;
    for k in 1..stats.max() as usize {
        let w = stats.exceed(k);
        if w == 0 {
            continue;
        }
        let r = rho_at(a, c, ni, tc, k as f64);
        if r <= 0.0 || r > 1.0 + SLACK {
            return f64::NEG_INFINITY;
        }
        acc += w as f64 * r.min(1.0).ln();
    }
    for &(v, count) in stats.counts() {
        let r = rho_at(a, c, ni, tc, v as f64);
        if (v as usize) < t_max && r <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let stop = 1.0 - r;
        if stop <= 0.0 {
            return f64::NEG_INFINITY;
        }
        acc += count as f64 * stop.ln();
    }
    acc
}

/// Score `(dl/da, dl/dc)` at a feasible point.
pub fn score(a: f64, c: f64, n: u32, t_max: usize, stats: &SampleStats) -> (f64, f64) {
    let t = t_max as f64;
    let ni = n as i32;
    let nf = n as f64;
    let tc = (t - c).powi(ni);
    let tc1 = (t - c).powi(ni - 1);
    let mut da = 0.0f64;
    let mut dc = 0.0f64;
    for k in 1..stats.max() as usize {
        let w = stats.exceed(k);
        if w == 0 {
            continue;
        }
        let kf = k as f64;
        let r = rho_at(a, c, ni, tc, kf);
        let r_a = (kf - c).powi(ni) - tc;
        let r_c = a * nf * (tc1 - (kf - c).powi(ni - 1));
        da += w as f64 * r_a / r;
        dc += w as f64 * r_c / r;
    }
    for &(v, count) in stats.counts() {
        let vf = v as f64;
        let r = rho_at(a, c, ni, tc, vf);
        let r_a = (vf - c).powi(ni) - tc;
        let r_c = a * nf * (tc1 - (vf - c).powi(ni - 1));
        let stop = 1.0 - r;
        da -= count as f64 * r_a / stop;
        dc -= count as f64 * r_c / stop;
    }
    (da, dc)
}

/// `d2l/da2`; strictly negative at every feasible point of a non-degenerate
/// sample, which is what licenses bisection on the `a` score.
fn curvature_a(a: f64, c: f64, n: u32, t_max: usize, stats: &SampleStats) -> f64 {
    let t = t_max as f64;
    let ni = n as i32;
    let tc = (t - c).powi(ni);
    let mut acc = 0.0f64;
    for k in 1..stats.max() as usize {
        let w = stats.exceed(k);
        if w == 0 {
            continue;
        }
        let kf = k as f64;
        let r = rho_at(a, c, ni, tc, kf);
        let r_a = (kf - c).powi(ni) - tc;
        acc -= w as f64 * (r_a / r) * (r_a / r);
    }
    for &(v, count) in stats.counts() {
        let vf = v as f64;
        let r = rho_at(a, c, ni, tc, vf);
        let r_a = (vf - c).powi(ni) - tc;
        let stop = 1.0 - r;
        acc -= count as f64 * (r_a / stop) * (r_a / stop);
    }
    acc
}

/// Inner maximisation over `a` for fixed `c`: bisection on the score along
/// the admissible ray, with the attained endpoint checked explicitly.
/// Returns `(a_star, loglik, iterations)`, or `None` if `c` admits no `a`.
pub(crate) fn profile_a(
    c: f64,
    n: u32,
    t_max: usize,
    stats: &SampleStats,
) -> Option<(f64, f64, usize)> {
    let interval = poly_bounds(n, c, t_max).ok()?;
    let boundary = interval.boundary();
    // parametrise a = boundary * z, z in (0, 1]; dl/dz = boundary * dl/da is
    // decreasing in z by concavity, and climbs to +inf as z -> 0.
    let slope = |z: f64| boundary * score(boundary * z, c, n, t_max, stats).0;
    let mut iters = 0usize;
    let z_hi = 1.0 - 1e-12;
    if slope(z_hi) >= 0.0 {
        let l = loglik(boundary, c, n, t_max, stats);
        if l.is_finite() {
            return Some((boundary, l, iters));
        }
        let a = boundary * z_hi;
        return Some((a, loglik(a, c, n, t_max, stats), iters));
    }
    let mut lo = 1e-15;
    let mut hi = z_hi;
    if slope(lo) <= 0.0 {
        let a = boundary * lo;
        return Some((a, loglik(a, c, n, t_max, stats), iters));
    }
    let z_tol = (1e-12 / boundary.abs()).max(1e-16);
    while hi - lo > z_tol && iters < BISECT_CAP {
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iters += 1;
    }
    let a = boundary * 0.5 * (lo + hi);
    Some((a, loglik(a, c, n, t_max, stats), iters))
}

fn golden_max<F: Fn(f64) -> f64>(mut lo: f64, mut hi: f64, tol: f64, f: F) -> (f64, usize) {
    const INVPHI: f64 = 0.618_033_988_749_894_8;
    let mut c1 = hi - INVPHI * (hi - lo);
    let mut c2 = lo + INVPHI * (hi - lo);
    let mut f1 = f(c1);
    let mut f2 = f(c2);
    let mut iters = 2usize;
    while hi - lo > tol && iters < 300 {
        if f1 >= f2 {
            hi = c2;
            c2 = c1;
            f2 = f1;
            c1 = hi - INVPHI * (hi - lo);
            f1 = f(c1);
        } else {
            lo = c1;
            c1 = c2;
            f1 = f2;
            c2 = lo + INVPHI * (hi - lo);
            f2 = f(c2);
        }
        iters += 1;
    }
    (0.5 * (lo + hi), iters)
}

struct Candidate {
    a: f64,
    c: f64,
    loglik: f64,
}

/// One projected gradient ascent run with backtracking line search.
fn pga_run(
    mut a: f64,
    mut c: f64,
    n: u32,
    t_max: usize,
    stats: &SampleStats,
    c_box: (f64, f64),
    opts: &PolyOptions,
) -> (Candidate, usize) {
    let mut l = loglik(a, c, n, t_max, stats);
    let mut iters = 0usize;
    if !l.is_finite() {
        return (Candidate { a, c, loglik: l }, iters);
    }
    let range = c_box.1 - c_box.0;
    for _ in 0..opts.pga_max_iter {
        iters += 1;
        let (ga, gc) = score(a, c, n, t_max, stats);
        let la = curvature_a(a, c, n, t_max, stats);
        // curvature along c from a symmetric difference of the c score.
        let hc = 1e-4 * (1.0 + c.abs());
        let lc = {
            let up = score(a, c + hc, n, t_max, stats).1;
            let dn = score(a, c - hc, n, t_max, stats).1;
            let fd = (up - dn) / (2.0 * hc);
            if fd.is_finite() && fd < -1e-300 {
                fd
            } else {
                -(gc.abs() + 1.0) / (0.1 * range)
            }
        };
        let dir_a = -ga / la;
        let dir_c = -gc / lc;
        if (ga * ga + gc * gc).sqrt() < 1e-8 {
            break;
        }
        let mut step = 1.0f64;
        let mut moved = false;
        for _ in 0..30 {
            let c_try = (c + step * dir_c).clamp(c_box.0, c_box.1);
            if let Ok(interval) = poly_bounds(n, c_try, t_max) {
                let b = interval.boundary();
                // re-clamp a onto the admissible ray for the new c.
                let z = (a + step * dir_a) / b;
                let a_try = b * z.clamp(1e-15, 1.0 - 1e-12);
                let l_try = loglik(a_try, c_try, n, t_max, stats);
                if l_try > l {
                    let delta = (a_try - a).abs() + (c_try - c).abs();
                    a = a_try;
                    c = c_try;
                    l = l_try;
                    moved = delta >= 1e-12;
                    break;
                }
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (Candidate { a, c, loglik: l }, iters)
}

fn degenerate_fit(stats: &SampleStats, n: u32) -> FitResult {
    FitResult {
        family: FitFamily::Poly,
        a_hat: 0.0,
        c_hat: None,
        degree: Some(n),
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

fn finalize(
    stats: &SampleStats,
    n: u32,
    t_max: usize,
    best: Candidate,
    iterations: usize,
) -> FitResult {
    FitResult {
        family: FitFamily::Poly,
        a_hat: best.a,
        c_hat: Some(best.c),
        degree: Some(n),
        t_hat: t_max,
        shift_hat: stats.shift(),
        loglik: best.loglik,
        converged: best.loglik.is_finite(),
        degenerate: false,
        solver_iterations: iterations,
        grid_edge: false,
        searched_shifts: Vec::new(),
    }
}

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

/// Profile stage only: coarse sweep over `c`, then golden-section refinement
/// around the best point, with the inner `a` solved exactly each time.
///
/// This is the workhorse for grid searches over many candidate supports,
/// where repeating the full multistart at every cell buys nothing.
pub(crate) fn profile_fit(
    stats: &SampleStats,
    n: u32,
    t_max: usize,
    opts: &PolyOptions,
) -> Result<FitResult, EstError> {
    check_support(stats, t_max)?;
    if stats.max() == 1 {
        return Ok(degenerate_fit(stats, n));
    }
    let t = t_max as f64;
    let c_lo = stats.min() as f64 - t;
    let c_hi = t - 1.0;
    let m = opts.coarse_c.max(3);
    let mut total = 0usize;
    let mut best: Option<Candidate> = None;
    let mut best_j = 0usize;
    for j in 0..m {
        let c = c_lo + (c_hi - c_lo) * j as f64 / (m - 1) as f64;
        if let Some((a, l, it)) = profile_a(c, n, t_max, stats) {
            total += it;
            if best.as_ref().map_or(true, |b| l > b.loglik) {
                best = Some(Candidate { a, c, loglik: l });
                best_j = j;
            }
        }
    }
    let coarse = best.ok_or(EstError::NoFeasibleStart)?;
    let spacing = (c_hi - c_lo) / (m - 1) as f64;
    let lo = (c_lo + spacing * best_j.saturating_sub(1) as f64).max(c_lo);
    let hi = (c_lo + spacing * (best_j + 1) as f64).min(c_hi);
    let tol = (opts.golden_tol * (c_hi - c_lo)).max(1e-12);
    let (c_ref, golden_iters) = golden_max(lo, hi, tol, |c| {
        profile_a(c, n, t_max, stats).map_or(f64::NEG_INFINITY, |(_, l, _)| l)
    });
    total += golden_iters;
    let refined = profile_a(c_ref, n, t_max, stats).map(|(a, l, _)| Candidate {
        a,
        c: c_ref,
        loglik: l,
    });
    let best = match refined {
        Some(r) if r.loglik >= coarse.loglik => r,
        _ => coarse,
    };
    Ok(finalize(stats, n, t_max, best, total))
}

/// Maximum-likelihood `(a, c)` for degree `n` and known support `T`.
pub fn fit_fixed_t_with(
    stats: &SampleStats,
    n: u32,
    t_max: usize,
    opts: &PolyOptions,
) -> Result<FitResult, EstError> {
    check_support(stats, t_max)?;
    if stats.max() == 1 {
        return Ok(degenerate_fit(stats, n));
    }
    let t = t_max as f64;
    let c_lo = stats.min() as f64 - t;
    let c_hi = t - 1.0;
    let mut total = 0usize;
    let mut cands: Vec<Candidate> = Vec::new();

    for ci in 0..opts.c_starts {
        let c0 = c_lo + (c_hi - c_lo) * (ci as f64 + 0.5) / opts.c_starts as f64;
        let Ok(interval) = poly_bounds(n, c0, t_max) else {
            continue;
        };
        for ai in 0..opts.a_starts {
            let a0 = interval.at_quantile((ai as f64 + 0.5) / opts.a_starts as f64);
            let (cand, it) = pga_run(a0, c0, n, t_max, stats, (c_lo, c_hi), opts);
            total += it;
            if cand.loglik.is_finite() {
                // polish each start with the exact inner solve.
                if let Some((a, l, it2)) = profile_a(cand.c, n, t_max, stats) {
                    total += it2;
                    if l >= cand.loglik {
                        cands.push(Candidate {
                            a,
                            c: cand.c,
                            loglik: l,
                        });
                        continue;
                    }
                }
                cands.push(cand);
            }
        }
    }

    let profile = profile_fit(stats, n, t_max, opts)?;
    total += profile.solver_iterations;
    cands.push(Candidate {
        a: profile.a_hat,
        c: profile.c_hat.expect("profile fit always carries c"),
        loglik: profile.loglik,
    });

    let rough = cands
        .into_iter()
        .max_by(|x, y| x.loglik.total_cmp(&y.loglik))
        .ok_or(EstError::NoFeasibleStart)?;

    // local golden refinement around the winner.
    let width = (c_hi - c_lo) / opts.coarse_c.max(3) as f64;
    let lo = (rough.c - width).max(c_lo);
    let hi = (rough.c + width).min(c_hi);
    let tol = (opts.golden_tol * (c_hi - c_lo)).max(1e-12);
    let (c_ref, it) = golden_max(lo, hi, tol, |c| {
        profile_a(c, n, t_max, stats).map_or(f64::NEG_INFINITY, |(_, l, _)| l)
    });
    total += it;
    let best = match profile_a(c_ref, n, t_max, stats) {
        Some((a, l, _)) if l >= rough.loglik => Candidate {
            a,
            c: c_ref,
            loglik: l,
        },
        _ => rough,
    };
    Ok(finalize(stats, n, t_max, best, total))
}

pub fn fit_fixed_t(stats: &SampleStats, n: u32, t_max: usize) -> Result<FitResult, EstError> {
    fit_fixed_t_with(stats, n, t_max, &PolyOptions::default())
}

/// Fisher information `N * sum_k f(k) s(k) s(k)^T` with the per-draw score
/// `s(k) = d log f(k) / d(a, c)`.
pub fn fisher(
    a: f64,
    c: f64,
    n: u32,
    t_max: usize,
    n_draws: usize,
) -> Result<FisherInfo, EstError> {
    let params = crate::families::PolyParams::new(a, c, n, t_max);
    let pmf = params.pmf()?;
    let t = t_max as f64;
    let ni = n as i32;
    let nf = n as f64;
    let tc = (t - c).powi(ni);
    let tc1 = (t - c).powi(ni - 1);
    let mut pa = 0.0f64;
    let mut pc = 0.0f64;
    let mut m = [0.0f64; 4];
    for k in 1..=t_max {
        let kf = k as f64;
        let f = pmf.prob(k);
        if f > 0.0 {
            let (sa, sc) = if k < t_max {
                let r = rho_at(a, c, ni, tc, kf);
                let r_a = (kf - c).powi(ni) - tc;
                let r_c = a * nf * (tc1 - (kf - c).powi(ni - 1));
                let stop = 1.0 - r;
                (pa - r_a / stop, pc - r_c / stop)
            } else {
                (pa, pc)
            };
            m[0] += f * sa * sa;
            m[1] += f * sa * sc;
            m[3] += f * sc * sc;
        }
        if k < t_max {
            let r = rho_at(a, c, ni, tc, kf);
            let r_a = (kf - c).powi(ni) - tc;
            let r_c = a * nf * (tc1 - (kf - c).powi(ni - 1));
            pa += r_a / r;
            pc += r_c / r;
        }
    }
    m[2] = m[1];
    let nd = n_draws as f64;
    FisherInfo::from_matrix(n_draws, 2, m.iter().map(|v| v * nd).collect())
}
