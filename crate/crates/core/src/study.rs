//! Monte-Carlo estimator studies: bias, variance, information floors and
//! PMF recovery as functions of sample size.
//!
//! Trials are independent and seeded per `(size, trial)` coordinate, so the
//! execution mode changes wall time but never a single bit of the output.

use crate::dist::SojournPmf;
use crate::estimation::{linear, poly, EstError, SampleStats};
use crate::families::{FamilyError, FamilyParams};
use crate::par::{map_indexed, ExecMode};
use crate::sampling::{sample_inverse, trial_rng};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("bad study configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Est(#[from] EstError),
    #[error(transparent)]
    Family(#[from] FamilyError),
}

/// How the support is treated during fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TSearch {
    /// Fit at the true support.
    Known,
    /// Search `max(sample) ..= max(sample) + margin`.
    MaxAnchored { margin: usize },
    /// Search a fixed window, skipping supports below the sample maximum.
    FixedRange { lo: usize, hi: usize },
}

/// Inner maximiser over the coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ASolver {
    Continuous,
    /// Uniform grid between the attained endpoint and `-zero_margin`,
    /// mirroring a coarse constrained optimiser (linear family only).
    GridA {
        points: usize,
        zero_margin: f64,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyConfig {
    pub truth: FamilyParams,
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub t_search: TSearch,
    pub a_solver: ASolver,
    /// IQR multiplier for the outlier-trimmed variance; `None` disables.
    pub trim_factor: Option<f64>,
    pub compute_l1: bool,
}

impl StudyConfig {
    /// Desk-scale defaults: known support, continuous solver, 1.5 IQR trim.
    pub fn new(truth: FamilyParams, sizes: Vec<usize>, trials: usize, seed: u64) -> Self {
        Self {
            truth,
            sizes,
            trials,
            seed,
            t_search: TSearch::Known,
            a_solver: ASolver::Continuous,
            trim_factor: Some(1.5),
            compute_l1: false,
        }
    }
}

/// Aggregates for one sample size.
#[derive(Debug, Clone, Serialize)]
pub struct SizeRow {
    pub n: usize,
    pub bias_a: f64,
    /// Population variance, so that `mse = var + bias^2` holds exactly.
    pub var_a: f64,
    pub mse_a: f64,
    pub inv_fisher_a: f64,
    pub corrected_var_a: Option<f64>,
    pub bias_c: Option<f64>,
    pub var_c: Option<f64>,
    pub mse_c: Option<f64>,
    pub inv_fisher_c: Option<f64>,
    pub corrected_var_c: Option<f64>,
    pub p_t_correct: Option<f64>,
    pub l1_mean: Option<f64>,
    pub failures: usize,
    pub degenerate: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyResult {
    pub truth: FamilyParams,
    pub trials: usize,
    pub seed: u64,
    pub t_search: TSearch,
    pub a_solver: ASolver,
    pub trim_factor: Option<f64>,
    pub rows: Vec<SizeRow>,
}

impl StudyResult {
    /// `n,bias_a,var_a,mse_a,inv_fi_a,bias_c,var_c,mse_c,inv_fi_c,p_T_correct,l1_mean`
    /// with empty cells where a column does not apply.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        fn opt(v: Option<f64>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        writeln!(
            w,
            "n,bias_a,var_a,mse_a,inv_fi_a,bias_c,var_c,mse_c,inv_fi_c,p_T_correct,l1_mean"
        )?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.n,
                r.bias_a,
                r.var_a,
                r.mse_a,
                r.inv_fisher_a,
                opt(r.bias_c),
                opt(r.var_c),
                opt(r.mse_c),
                opt(r.inv_fisher_c),
                opt(r.p_t_correct),
                opt(r.l1_mean),
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("study results serialise")
    }
}

#[derive(Debug, Clone)]
struct TrialOut {
    ok: bool,
    a: f64,
    c: Option<f64>,
    t: usize,
    degenerate: bool,
    l1: Option<f64>,
}

fn truth_parts(truth: &FamilyParams) -> (f64, Option<f64>, Option<u32>, usize) {
    match *truth {
        FamilyParams::Linear { a, t_max, .. } => (a, None, None, t_max),
        FamilyParams::Poly { a, c, n, t_max, .. } => (a, Some(c), Some(n), t_max),
    }
}

fn fit_one(
    stats: &SampleStats,
    truth: &FamilyParams,
    t_search: TSearch,
    a_solver: ASolver,
) -> Result<crate::estimation::FitResult, EstError> {
    let (_, _, degree, t0) = truth_parts(truth);
    let candidates: Vec<usize> = match t_search {
        TSearch::Known => vec![t0],
        TSearch::MaxAnchored { margin } => {
            let base = stats.max() as usize;
            (base..=base + margin).collect()
        }
        TSearch::FixedRange { lo, hi } => (lo.max(stats.max() as usize)..=hi).collect(),
    };
    let sweep = candidates.len() > 1;
    let mut best: Option<crate::estimation::FitResult> = None;
    for t in candidates {
        let fit = match (degree, a_solver) {
            (None, ASolver::Continuous) => linear::fit_fixed_t(stats, t)?,
            (
                None,
                ASolver::GridA {
                    points,
                    zero_margin,
                },
            ) => linear::fit_fixed_t_grid_a(stats, t, points, zero_margin)?,
            (Some(n), _) if sweep => poly::profile_fit(stats, n, t, &poly::PolyOptions::default())?,
            (Some(n), _) => poly::fit_fixed_t(stats, n, t)?,
        };
        let replace = match &best {
            None => true,
            Some(b) => fit.loglik > b.loglik,
        };
        if replace {
            best = Some(fit);
        }
    }
    let mut best = best.ok_or(EstError::NoFeasibleStart)?;
    if let (Some(n), false, true) = (degree, best.degenerate, sweep) {
        // winner of a support sweep gets the full multistart treatment.
        let full = poly::fit_fixed_t(stats, n, best.t_hat)?;
        if full.loglik >= best.loglik {
            best = full;
        }
    }
    Ok(best)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let m = sorted.len();
    if m == 1 {
        return sorted[0];
    }
    let pos = q * (m - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < m {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[m - 1]
    }
}

fn population_var(values: &[f64], mean: f64) -> f64 {
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64
}

fn trimmed_var(values: &[f64], factor: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile(&sorted, 0.25);
    let q3 = quantile(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - factor * iqr, q3 + factor * iqr);
    let kept: Vec<f64> = sorted.into_iter().filter(|&v| v >= lo && v <= hi).collect();
    if kept.is_empty() {
        return f64::NAN;
    }
    let mean = kept.iter().sum::<f64>() / kept.len() as f64;
    population_var(&kept, mean)
}

/// Runs the configured study and aggregates per-size estimator statistics.
pub fn run_study(cfg: &StudyConfig, mode: ExecMode) -> Result<StudyResult, StudyError> {
    if cfg.sizes.is_empty() || cfg.trials == 0 {
        return Err(StudyError::Config(
            "need at least one sample size and one trial".into(),
        ));
    }
    let (a0, c0, degree, t0) = truth_parts(&cfg.truth);
    if degree.is_some() {
        if let ASolver::GridA { .. } = cfg.a_solver {
            return Err(StudyError::Config(
                "the grid coefficient solver only applies to the linear family".into(),
            ));
        }
    }
    if let TSearch::FixedRange { lo, hi } = cfg.t_search {
        if lo > hi {
            return Err(StudyError::Config(format!(
                "empty support window {lo}..{hi}"
            )));
        }
    }
    let truth_pmf = cfg.truth.pmf()?;
    let shift = cfg.truth.shift();

    let total = cfg.sizes.len() * cfg.trials;
    let outs: Vec<TrialOut> = map_indexed(total, mode, |idx| {
        let si = idx / cfg.trials;
        let tj = idx % cfg.trials;
        let n = cfg.sizes[si];
        let mut rng = trial_rng(cfg.seed, si as u64, tj as u64);
        let values = sample_inverse(&truth_pmf, n, &mut rng);
        let stats = match SampleStats::new(&values, shift) {
            Ok(s) => s,
            Err(_) => {
                return TrialOut {
                    ok: false,
                    a: f64::NAN,
                    c: None,
                    t: 0,
                    degenerate: false,
                    l1: None,
                }
            }
        };
        match fit_one(&stats, &cfg.truth, cfg.t_search, cfg.a_solver) {
            Ok(fit) => {
                let l1 = if cfg.compute_l1 {
                    fit.params()
                        .pmf()
                        .ok()
                        .map(|fitted| l1_pmf_distance(&truth_pmf, &fitted))
                } else {
                    None
                };
                TrialOut {
                    ok: true,
                    a: fit.a_hat,
                    c: fit.c_hat,
                    t: fit.t_hat,
                    degenerate: fit.degenerate,
                    l1,
                }
            }
            Err(_) => TrialOut {
                ok: false,
                a: f64::NAN,
                c: None,
                t: 0,
                degenerate: false,
                l1: None,
            },
        }
    });

    let mut rows = Vec::with_capacity(cfg.sizes.len());
    for (si, &n) in cfg.sizes.iter().enumerate() {
        let chunk = &outs[si * cfg.trials..(si + 1) * cfg.trials];
        let good: Vec<&TrialOut> = chunk.iter().filter(|t| t.ok).collect();
        let failures = cfg.trials - good.len();
        let degenerate = good.iter().filter(|t| t.degenerate).count();

        let a_vals: Vec<f64> = good.iter().map(|t| t.a).collect();
        let (bias_a, var_a, mse_a, corrected_var_a) = if a_vals.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN, None)
        } else {
            let mean = a_vals.iter().sum::<f64>() / a_vals.len() as f64;
            let bias = mean - a0;
            let var = population_var(&a_vals, mean);
            let mse = a_vals.iter().map(|v| (v - a0) * (v - a0)).sum::<f64>() / a_vals.len() as f64;
            let cvar = cfg.trim_factor.map(|f| trimmed_var(&a_vals, f));
            (bias, var, mse, cvar)
        };

        let c_vals: Vec<f64> = good.iter().filter_map(|t| t.c).collect();
        let (bias_c, var_c, mse_c, corrected_var_c) = match (c0, c_vals.is_empty()) {
            (Some(c_true), false) => {
                let mean = c_vals.iter().sum::<f64>() / c_vals.len() as f64;
                let var = population_var(&c_vals, mean);
                let mse = c_vals
                    .iter()
                    .map(|v| (v - c_true) * (v - c_true))
                    .sum::<f64>()
                    / c_vals.len() as f64;
                (
                    Some(mean - c_true),
                    Some(var),
                    Some(mse),
                    cfg.trim_factor.map(|f| trimmed_var(&c_vals, f)),
                )
            }
            _ => (None, None, None, None),
        };

        let (inv_fisher_a, inv_fisher_c) = match degree {
            None => (linear::fisher(a0, t0, n)?.crlb[0], None),
            Some(nn) => {
                let info = poly::fisher(a0, c0.expect("poly truth has c"), nn, t0, n)?;
                (info.crlb[0], Some(info.crlb[1]))
            }
        };

        let p_t_correct = match cfg.t_search {
            TSearch::Known => None,
            _ => {
                if good.is_empty() {
                    Some(f64::NAN)
                } else {
                    Some(good.iter().filter(|t| t.t == t0).count() as f64 / good.len() as f64)
                }
            }
        };

        let l1_mean = if cfg.compute_l1 {
            let ls: Vec<f64> = good.iter().filter_map(|t| t.l1).collect();
            if ls.is_empty() {
                Some(f64::NAN)
            } else {
                Some(ls.iter().sum::<f64>() / ls.len() as f64)
            }
        } else {
            None
        };

        rows.push(SizeRow {
            n,
            bias_a,
            var_a,
            mse_a,
            inv_fisher_a,
            corrected_var_a,
            bias_c,
            var_c,
            mse_c,
            inv_fisher_c,
            corrected_var_c,
            p_t_correct,
            l1_mean,
            failures,
            degenerate,
        });
    }

    Ok(StudyResult {
        truth: cfg.truth,
        trials: cfg.trials,
        seed: cfg.seed,
        t_search: cfg.t_search,
        a_solver: cfg.a_solver,
        trim_factor: cfg.trim_factor,
        rows,
    })
}

/// Total variation style distance `sum_x |p(x) - q(x)|` over the union of
/// the absolute supports.
pub fn l1_pmf_distance(p: &SojournPmf, q: &SojournPmf) -> f64 {
    let lo = (*p.support().start()).min(*q.support().start());
    let hi = (*p.support().end()).max(*q.support().end());
    (lo..=hi).map(|x| (p.prob_at(x) - q.prob_at(x)).abs()).sum()
}

/// Expected per-draw log-likelihood `E_truth[ log f(K; a) ]` along a
/// coefficient grid, with the centre and support held at the truth.
pub fn expected_loglik_curve(truth: &FamilyParams, a_grid: &[f64]) -> Result<Vec<f64>, StudyError> {
    let f0 = truth.rho()?.pmf();
    let mut out = Vec::with_capacity(a_grid.len());
    for &a in a_grid {
        let cand = match *truth {
            FamilyParams::Linear { t_max, shift, .. } => FamilyParams::Linear { a, t_max, shift },
            FamilyParams::Poly {
                c, n, t_max, shift, ..
            } => FamilyParams::Poly {
                a,
                c,
                n,
                t_max,
                shift,
            },
        };
        let val = match cand.rho() {
            Ok(r) => {
                let f = r.pmf();
                let mut acc = 0.0f64;
                let mut dead = false;
                for k in 1..=f0.support_max() {
                    let p0 = f0.prob(k);
                    if p0 == 0.0 {
                        continue;
                    }
                    let p = f.prob(k);
                    if p == 0.0 {
                        dead = true;
                        break;
                    }
                    acc += p0 * p.ln();
                }
                if dead {
                    f64::NEG_INFINITY
                } else {
                    acc
                }
            }
            Err(_) => f64::NEG_INFINITY,
        };
        out.push(val);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::SojournPmf;

    fn linear_truth() -> FamilyParams {
        FamilyParams::Linear {
            a: -0.1,
            t_max: 10,
            shift: 0,
        }
    }

    #[test]
    fn execution_modes_are_bit_identical() {
        let mut cfg = StudyConfig::new(linear_truth(), vec![10, 50], 8, 2024);
        cfg.compute_l1 = true;
        let seq = run_study(&cfg, ExecMode::Sequential).unwrap();
        let par = run_study(&cfg, ExecMode::Parallel).unwrap();
        assert_eq!(seq.to_json(), par.to_json());
    }

    #[test]
    fn mse_decomposes_into_variance_plus_squared_bias() {
        let cfg = StudyConfig::new(linear_truth(), vec![25, 100], 40, 31);
        let res = run_study(&cfg, ExecMode::Sequential).unwrap();
        for row in &res.rows {
            let recon = row.var_a + row.bias_a * row.bias_a;
            assert!(
                (row.mse_a - recon).abs() < 1e-10,
                "n = {}: {} vs {}",
                row.n,
                row.mse_a,
                recon
            );
        }
    }

    #[test]
    fn information_floor_tightens_with_sample_size() {
        let cfg = StudyConfig::new(linear_truth(), vec![10, 100, 1000], 1, 5);
        let res = run_study(&cfg, ExecMode::Sequential).unwrap();
        assert!(res.rows[0].inv_fisher_a > res.rows[1].inv_fisher_a);
        assert!(res.rows[1].inv_fisher_a > res.rows[2].inv_fisher_a);
        assert!((res.rows[0].inv_fisher_a / res.rows[2].inv_fisher_a - 100.0).abs() < 1e-6);
    }

    #[test]
    fn l1_distance_cases() {
        let p = SojournPmf::new(vec![1.0], 0).unwrap();
        let q = SojournPmf::new(vec![0.5, 0.5], 0).unwrap();
        assert!((l1_pmf_distance(&p, &q) - 1.0).abs() < 1e-15);
        assert_eq!(l1_pmf_distance(&p, &p), 0.0);
        let far = SojournPmf::new(vec![1.0], 10).unwrap();
        assert!((l1_pmf_distance(&p, &far) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn sane_recovery_at_moderate_size() {
        let cfg = StudyConfig::new(linear_truth(), vec![500], 12, 99);
        let res = run_study(&cfg, ExecMode::Sequential).unwrap();
        let row = &res.rows[0];
        assert_eq!(row.failures, 0);
        assert!(row.bias_a.abs() < 0.01, "bias = {}", row.bias_a);
        assert!(row.p_t_correct.is_none());
        assert!(row.var_a / row.inv_fisher_a < 3.0);
    }

    #[test]
    fn expected_loglik_peaks_at_the_truth() {
        let truth = linear_truth();
        let grid: Vec<f64> = (1..=55).map(|j| -0.002 * j as f64).collect();
        let curve = expected_loglik_curve(&truth, &grid).unwrap();
        let (best_idx, _) = curve
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert!((grid[best_idx] + 0.1).abs() < 1e-12);
    }

    #[test]
    fn fixed_window_with_grid_solver_runs() {
        let truth = FamilyParams::Linear {
            a: -0.0111,
            t_max: 10,
            shift: 0,
        };
        let mut cfg = StudyConfig::new(truth, vec![5], 30, 12);
        cfg.t_search = TSearch::FixedRange { lo: 10, hi: 20 };
        cfg.a_solver = ASolver::GridA {
            points: 50,
            zero_margin: 1e-3,
        };
        cfg.compute_l1 = true;
        let res = run_study(&cfg, ExecMode::Sequential).unwrap();
        let row = &res.rows[0];
        assert_eq!(row.failures, 0);
        let l1 = row.l1_mean.unwrap();
        assert!(l1.is_finite() && l1 > 0.0 && l1 <= 2.0);
    }

    #[test]
    fn grid_solver_rejected_for_poly_truth() {
        let truth = FamilyParams::Poly {
            a: -1.0 / 378.0,
            c: 5.0,
            n: 3,
            t_max: 10,
            shift: 0,
        };
        let mut cfg = StudyConfig::new(truth, vec![10], 2, 1);
        cfg.a_solver = ASolver::GridA {
            points: 10,
            zero_margin: 1e-3,
        };
        assert!(matches!(
            run_study(&cfg, ExecMode::Sequential),
            Err(StudyError::Config(_))
        ));
    }
}
