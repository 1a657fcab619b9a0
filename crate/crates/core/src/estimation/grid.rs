//! Joint search over shift and support size.
//!
//! For every candidate shift `t0` and support `T` in
//! `max(sample)-t0 ..= max(sample)-t0+t_margin` the fixed-support solver runs
//! on the shifted sample; the cell with the highest log-likelihood wins, with
//! ties broken towards the smaller support and then the smaller shift. Cells
//! are independent, so they parallelise; the winner is picked by a sequential
//! scan in a fixed order, keeping results identical across execution modes.

use super::poly::PolyOptions;
use super::{linear, poly, EstError, FitResult, SampleStats};
use crate::par::{map_indexed, ExecMode};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyChoice {
    Linear,
    Poly { n: u32 },
}

/// Which shifts to try. `Auto` probes `{0}` together with the three largest
/// feasible shifts below the sample minimum.
#[derive(Debug, Clone)]
pub enum ShiftRange {
    Auto,
    Fixed(Vec<usize>),
}

impl ShiftRange {
    fn resolve(&self, min: u32) -> Result<Vec<usize>, EstError> {
        let mut shifts = match self {
            ShiftRange::Auto => {
                let mut s = vec![0usize];
                let top = min as usize - 1;
                let bottom = top.saturating_sub(2).max(1);
                if min >= 2 {
                    s.extend(bottom..=top);
                }
                s
            }
            ShiftRange::Fixed(list) => list.clone(),
        };
        shifts.sort_unstable();
        shifts.dedup();
        for &t0 in &shifts {
            if t0 as u32 >= min {
                return Err(EstError::ShiftTooLarge { shift: t0, min });
            }
        }
        if shifts.is_empty() {
            return Err(EstError::NoFeasibleStart);
        }
        Ok(shifts)
    }
}

/// One evaluated `(shift, T)` combination.
#[derive(Debug, Clone, Serialize)]
pub struct GridCell {
    pub shift: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub a: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    pub loglik: f64,
}

#[derive(Debug, Clone)]
pub struct GridSearch {
    pub best: FitResult,
    pub cells: Vec<GridCell>,
}

impl GridSearch {
    /// Writes the cell table as `shift,T,a,c,loglik` (empty `c` for linear).
    pub fn write_cells_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "shift,T,a,c,loglik")?;
        for cell in &self.cells {
            match cell.c {
                Some(c) => writeln!(
                    w,
                    "{},{},{},{},{}",
                    cell.shift, cell.t, cell.a, c, cell.loglik
                )?,
                None => writeln!(w, "{},{},{},,{}", cell.shift, cell.t, cell.a, cell.loglik)?,
            }
        }
        Ok(())
    }
}

fn cell_fit(
    stats: &SampleStats,
    family: FamilyChoice,
    t_max: usize,
    opts: &PolyOptions,
) -> Result<FitResult, EstError> {
    match family {
        FamilyChoice::Linear => linear::fit_fixed_t(stats, t_max),
        // profile stage only per cell; the winning cell is re-solved in full.
        FamilyChoice::Poly { n } => poly::profile_fit(stats, n, t_max, opts),
    }
}

/// Fits over the `(shift, T)` grid and returns the winner plus every cell.
pub fn fit_grid(
    values: &[u32],
    family: FamilyChoice,
    t_margin: usize,
    shifts: &ShiftRange,
    mode: ExecMode,
) -> Result<GridSearch, EstError> {
    if values.is_empty() {
        return Err(EstError::EmptySample);
    }
    let min = *values.iter().min().expect("non-empty");
    let shift_list = shifts.resolve(min)?;
    let opts = PolyOptions::default();

    let mut stats_per_shift = Vec::with_capacity(shift_list.len());
    for &t0 in &shift_list {
        stats_per_shift.push(SampleStats::new(values, t0)?);
    }

    let mut jobs: Vec<(usize, usize)> = Vec::new();
    for (si, stats) in stats_per_shift.iter().enumerate() {
        let base = stats.max() as usize;
        for t in base..=base + t_margin {
            jobs.push((si, t));
        }
    }

    let fits = map_indexed(jobs.len(), mode, |j| {
        let (si, t) = jobs[j];
        cell_fit(&stats_per_shift[si], family, t, &opts)
    });

    let mut cells = Vec::with_capacity(jobs.len());
    let mut best_idx: Option<usize> = None;
    for (j, fit) in fits.iter().enumerate() {
        let (si, t) = jobs[j];
        let shift = shift_list[si];
        match fit {
            Ok(f) => {
                cells.push(GridCell {
                    shift,
                    t,
                    a: f.a_hat,
                    c: f.c_hat,
                    loglik: f.loglik,
                });
                let better = match best_idx {
                    None => true,
                    Some(b) => {
                        let (bl, bt, bs) = (cells[b].loglik, cells[b].t, cells[b].shift);
                        f.loglik > bl || (f.loglik == bl && (t, shift) < (bt, bs))
                    }
                };
                if f.loglik.is_finite() && better {
                    best_idx = Some(cells.len() - 1);
                }
            }
            Err(_) => cells.push(GridCell {
                shift,
                t,
                a: f64::NAN,
                c: None,
                loglik: f64::NEG_INFINITY,
            }),
        }
    }
    let best_idx = best_idx.ok_or(EstError::NoFeasibleStart)?;
    let (best_si, best_t) = jobs[best_idx];
    let best_stats = &stats_per_shift[best_si];

    let mut best = match family {
        FamilyChoice::Linear => linear::fit_fixed_t(best_stats, best_t)?,
        FamilyChoice::Poly { n } => {
            let full = poly::fit_fixed_t(best_stats, n, best_t)?;
            if full.loglik >= cells[best_idx].loglik {
                full
            } else {
                let opts = PolyOptions::default();
                poly::profile_fit(best_stats, n, best_t, &opts)?
            }
        }
    };
    cells[best_idx].a = best.a_hat;
    cells[best_idx].c = best.c_hat;
    cells[best_idx].loglik = best.loglik;

    if best.degenerate {
        // the point mass does not sit on the candidate support, so edge
        // flags are meaningless for it.
        best.grid_edge = false;
    } else {
        let top = best_stats.max() as usize + t_margin;
        best.grid_edge = best_t == top && t_margin > 0;
    }
    best.searched_shifts = shift_list;
    Ok(GridSearch { best, cells })
}
