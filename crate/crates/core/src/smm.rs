//! Discrete-time semi-Markov chains assembled from per-state sojourn factor
//! sequences and a jump structure, solved by matrix-analytic blocks.
//!
//! The augmented chain lives on `(state, level)` pairs where the level counts
//! elapsed sojourn time. Level transitions use `D(t) = diag(rho_i(t))`, exits
//! use the off-diagonal blocks `A(t)`, and the embedded jump chain is
//! `B = sum_t Q(t)` with `Q(t) = D(1)...D(t-1) A(t)`.

use crate::dist::{DistError, RhoSequence, SojournPmf};
use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const STOCH_TOL: f64 = 1e-12;
const EDGE_EPS: f64 = 1e-15;
const POWER_TOL: f64 = 1e-12;
const POWER_CAP: usize = 1_000_000;
/// Above this state count the embedded fixed point switches from a dense LU
/// solve to power iteration, keeping the cost at O(s^2) per sweep.
const DIRECT_LIMIT: usize = 64;

#[derive(Debug, Error)]
pub enum SmmError {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("embedded jump chain is reducible")]
    Reducible,
    #[error("power iteration did not converge within {0} sweeps")]
    NoConvergence(usize),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error("spec JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// A multi-state semi-Markov chain specification.
///
/// Internally everything is padded to the global maximum support: for
/// `t >= T_i` the level factor is zero and the exit row repeats the one at
/// `T_i`, which keeps each assembled block row stochastic.
#[derive(Debug, Clone)]
pub struct SmmSpec {
    t_per_state: Vec<usize>,
    t_max: usize,
    /// `rho[i][t-1]`, padded with zeros beyond `T_i`.
    rho: Vec<Vec<f64>>,
    /// `a[t-1]` is the s x s exit block at level t, zero diagonal.
    a: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMethod {
    /// Dense LU for small chains, power iteration beyond.
    #[default]
    Auto,
    Direct,
    Power,
}

/// Stationary distribution of the augmented `(state, level)` chain.
#[derive(Debug, Clone, Serialize)]
pub struct StationaryResult {
    /// `pi[i][t-1]`, normalised over all pairs.
    pub pi: Vec<Vec<f64>>,
    /// Fixed point of the embedded jump chain (level-1 slice, renormalised).
    pub embedded_pi: Vec<f64>,
    /// Per-state marginal occupancy `sum_t pi[i][t]`.
    pub occupancy: Vec<f64>,
    /// Max-norm of the stationarity defect of the full block matrix.
    pub residual: f64,
    /// Power-iteration sweeps, when that path was taken.
    pub iterations: Option<usize>,
}

impl StationaryResult {
    /// Writes `state,level,prob` rows, states and levels 1-based.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "state,level,prob")?;
        for (i, row) in self.pi.iter().enumerate() {
            for (t, p) in row.iter().enumerate() {
                writeln!(w, "{},{},{}", i + 1, t + 1, p)?;
            }
        }
        Ok(())
    }
}

fn check_rho_row(i: usize, row: &[f64]) -> Result<(), SmmError> {
    if row.is_empty() {
        return Err(SmmError::InvalidSpec(format!(
            "state {i} has an empty factor row"
        )));
    }
    let t_i = row.len();
    for (idx, &r) in row.iter().enumerate() {
        let t = idx + 1;
        if t < t_i {
            if !(r > 0.0 && r <= 1.0) {
                return Err(SmmError::InvalidSpec(format!(
                    "state {i}: factor at t = {t} is {r}, need (0, 1] before the terminal zero"
                )));
            }
        } else if r.abs() > STOCH_TOL {
            return Err(SmmError::InvalidSpec(format!(
                "state {i}: terminal factor at t = {t_i} is {r}, must be 0"
            )));
        }
    }
    Ok(())
}

impl SmmSpec {
    /// Builds the chain from per-state factor rows (each ending in the
    /// mandatory zero) and a time-independent jump matrix with zero diagonal.
    ///
    /// The exit blocks become `A(t) = diag(1 - rho_i(t)) . J`.
    pub fn from_rho_jump(rho_rows: Vec<Vec<f64>>, jump: Vec<Vec<f64>>) -> Result<Self, SmmError> {
        let s = rho_rows.len();
        if s < 2 {
            return Err(SmmError::InvalidSpec(
                "need at least two states (nothing to jump to)".into(),
            ));
        }
        if jump.len() != s || jump.iter().any(|r| r.len() != s) {
            return Err(SmmError::InvalidSpec(format!(
                "jump matrix must be {s} x {s}"
            )));
        }
        for (i, row) in jump.iter().enumerate() {
            if row[i].abs() > STOCH_TOL {
                return Err(SmmError::InvalidSpec(format!(
                    "jump matrix has a self-transition at state {i}"
                )));
            }
            if row.iter().any(|&p| p < -STOCH_TOL) {
                return Err(SmmError::InvalidSpec(format!(
                    "jump matrix row {i} has a negative entry"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCH_TOL {
                return Err(SmmError::InvalidSpec(format!(
                    "jump matrix row {i} sums to {sum}, expected 1"
                )));
            }
        }
        for (i, row) in rho_rows.iter().enumerate() {
            check_rho_row(i, row)?;
        }
        let t_per_state: Vec<usize> = rho_rows.iter().map(Vec::len).collect();
        let t_max = *t_per_state.iter().max().expect("s >= 2");
        let mut rho = rho_rows;
        for row in &mut rho {
            if let Some(last) = row.last_mut() {
                *last = 0.0;
            }
            row.resize(t_max, 0.0);
        }
        let mut a = Vec::with_capacity(t_max);
        for t in 0..t_max {
            let mut block = DMatrix::zeros(s, s);
            for i in 0..s {
                let exit = 1.0 - rho[i][t];
                for j in 0..s {
                    block[(i, j)] = exit * jump[i][j];
                }
                block[(i, i)] = 0.0;
            }
            a.push(block);
        }
        Ok(Self {
            t_per_state,
            t_max,
            rho,
            a,
        })
    }

    /// Builds the chain from explicit per-level exit blocks `a[t-1][i][j]`.
    ///
    /// Rows past a state's own support are overwritten by its terminal row,
    /// the padding that keeps the assembled matrix row stochastic.
    pub fn from_blocks(
        rho_rows: Vec<Vec<f64>>,
        blocks: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self, SmmError> {
        let s = rho_rows.len();
        if s < 2 {
            return Err(SmmError::InvalidSpec(
                "need at least two states (nothing to jump to)".into(),
            ));
        }
        for (i, row) in rho_rows.iter().enumerate() {
            check_rho_row(i, row)?;
        }
        let t_per_state: Vec<usize> = rho_rows.iter().map(Vec::len).collect();
        let t_max = *t_per_state.iter().max().expect("s >= 2");
        if blocks.len() < t_max {
            return Err(SmmError::InvalidSpec(format!(
                "need {t_max} exit blocks, got {}",
                blocks.len()
            )));
        }
        let mut rho = rho_rows;
        for row in &mut rho {
            if let Some(last) = row.last_mut() {
                *last = 0.0;
            }
            row.resize(t_max, 0.0);
        }
        let mut a = Vec::with_capacity(t_max);
        for (ti, rows) in blocks.iter().take(t_max).enumerate() {
            let t = ti + 1;
            if rows.len() != s || rows.iter().any(|r| r.len() != s) {
                return Err(SmmError::InvalidSpec(format!(
                    "exit block at t = {t} must be {s} x {s}"
                )));
            }
            let mut block = DMatrix::zeros(s, s);
            for i in 0..s {
                if rows[i][i].abs() > STOCH_TOL {
                    return Err(SmmError::InvalidSpec(format!(
                        "exit block at t = {t} has a diagonal entry at state {i}"
                    )));
                }
                if rows[i].iter().any(|&p| p < -STOCH_TOL) {
                    return Err(SmmError::InvalidSpec(format!(
                        "exit block at t = {t}, row {i} has a negative entry"
                    )));
                }
                let sum: f64 = rows[i].iter().sum();
                if t <= t_per_state[i] && (rho[i][ti] + sum - 1.0).abs() > STOCH_TOL {
                    return Err(SmmError::InvalidSpec(format!(
                        "state {i}, t = {t}: factor {} plus exit mass {sum} is not 1",
                        rho[i][ti]
                    )));
                }
                for j in 0..s {
                    block[(i, j)] = rows[i][j];
                }
                block[(i, i)] = 0.0;
            }
            a.push(block);
        }
        for i in 0..s {
            let term = t_per_state[i] - 1;
            let terminal_row: Vec<f64> = (0..s).map(|j| a[term][(i, j)]).collect();
            for block in a.iter_mut().skip(term + 1) {
                for j in 0..s {
                    block[(i, j)] = terminal_row[j];
                }
            }
        }
        Ok(Self {
            t_per_state,
            t_max,
            rho,
            a,
        })
    }

    /// Embeds an ordinary Markov chain: each state holds with its diagonal
    /// probability, truncated at `t_max`, and jumps proportionally to the
    /// off-diagonal row.
    pub fn from_markov(matrix: Vec<Vec<f64>>, t_max: usize) -> Result<Self, SmmError> {
        let s = matrix.len();
        if s < 2 || matrix.iter().any(|r| r.len() != s) {
            return Err(SmmError::InvalidSpec(
                "Markov matrix must be square with at least two states".into(),
            ));
        }
        if t_max < 1 {
            return Err(SmmError::InvalidSpec("need t_max >= 1".into()));
        }
        let mut rho_rows = Vec::with_capacity(s);
        let mut jump = vec![vec![0.0; s]; s];
        for (i, row) in matrix.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCH_TOL || row.iter().any(|&p| p < 0.0) {
                return Err(SmmError::InvalidSpec(format!(
                    "Markov matrix row {i} is not a probability vector"
                )));
            }
            let hold = row[i];
            if hold >= 1.0 {
                return Err(SmmError::InvalidSpec(format!(
                    "Markov state {i} is absorbing"
                )));
            }
            let mut r = vec![hold; t_max];
            r[t_max - 1] = 0.0;
            rho_rows.push(r);
            for j in 0..s {
                if j != i {
                    jump[i][j] = row[j] / (1.0 - hold);
                }
            }
        }
        Self::from_rho_jump(rho_rows, jump)
    }

    /// Reads either `{states, T, rho, jump}` or `{states, T, rho, A}` where
    /// `T` is a scalar or a per-state list and `A` is a `T x s x s` tensor.
    pub fn from_json(text: &str) -> Result<Self, SmmError> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum TSpec {
            Scalar(usize),
            PerState(Vec<usize>),
        }
        #[derive(Deserialize)]
        struct Raw {
            states: usize,
            #[serde(rename = "T")]
            t: TSpec,
            rho: Vec<Vec<f64>>,
            #[serde(default)]
            jump: Option<Vec<Vec<f64>>>,
            #[serde(default, rename = "A")]
            a: Option<Vec<Vec<Vec<f64>>>>,
        }
        let raw: Raw = serde_json::from_str(text)?;
        if raw.rho.len() != raw.states {
            return Err(SmmError::InvalidSpec(format!(
                "states = {} but rho has {} rows",
                raw.states,
                raw.rho.len()
            )));
        }
        let expect: Vec<usize> = match raw.t {
            TSpec::Scalar(t) => vec![t; raw.states],
            TSpec::PerState(v) => {
                if v.len() != raw.states {
                    return Err(SmmError::InvalidSpec(
                        "per-state T list length must equal states".into(),
                    ));
                }
                v
            }
        };
        for (i, (row, &t_i)) in raw.rho.iter().zip(&expect).enumerate() {
            if row.len() != t_i {
                return Err(SmmError::InvalidSpec(format!(
                    "state {i}: T = {t_i} but the factor row has {} entries",
                    row.len()
                )));
            }
        }
        match (raw.jump, raw.a) {
            (Some(jump), None) => Self::from_rho_jump(raw.rho, jump),
            (None, Some(a)) => Self::from_blocks(raw.rho, a),
            (Some(_), Some(_)) => Err(SmmError::InvalidSpec(
                "give either a jump matrix or exit blocks, not both".into(),
            )),
            (None, None) => Err(SmmError::InvalidSpec(
                "missing jump matrix or exit blocks".into(),
            )),
        }
    }

    pub fn states(&self) -> usize {
        self.t_per_state.len()
    }

    pub fn t_max(&self) -> usize {
        self.t_max
    }

    pub fn t_of_state(&self, i: usize) -> usize {
        self.t_per_state[i]
    }

    /// Padded factor row of state `i` (length `t_max`).
    pub fn rho_row(&self, i: usize) -> &[f64] {
        &self.rho[i]
    }

    /// Exit block `A(t)`, `t` 1-based.
    pub fn a_block(&self, t: usize) -> &DMatrix<f64> {
        &self.a[t - 1]
    }

    /// Level-hold block `D(t) = diag(rho_i(t))`, `t` 1-based.
    pub fn d_block(&self, t: usize) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.states(),
            self.rho.iter().map(|r| r[t - 1]),
        ))
    }

    /// Sojourn distribution of state `i` over its own support.
    pub fn sojourn_pmf_of_state(&self, i: usize) -> Result<SojournPmf, SmmError> {
        let row = self.rho[i][..self.t_per_state[i]].to_vec();
        Ok(RhoSequence::new(row)?.pmf())
    }

    /// `Q(t) = D(1)...D(t-1) A(t)`: probability of exiting at exactly level t.
    pub fn q_matrices(&self) -> Vec<DMatrix<f64>> {
        let s = self.states();
        let mut prefix = vec![1.0f64; s];
        let mut out = Vec::with_capacity(self.t_max);
        for t in 0..self.t_max {
            let mut q = self.a[t].clone();
            for i in 0..s {
                for j in 0..s {
                    q[(i, j)] *= prefix[i];
                }
            }
            out.push(q);
            for i in 0..s {
                prefix[i] *= self.rho[i][t];
            }
        }
        out
    }

    /// Embedded jump chain `B = sum_t Q(t)`; row stochastic.
    pub fn embedded(&self) -> DMatrix<f64> {
        let s = self.states();
        let mut b = DMatrix::zeros(s, s);
        for q in self.q_matrices() {
            b += q;
        }
        b
    }

    /// Dense transition matrix of the augmented chain, level-major:
    /// index `(t-1) * s + i` for state `i` at level `t`.
    pub fn full_matrix(&self) -> DMatrix<f64> {
        let s = self.states();
        let dim = s * self.t_max;
        let mut m = DMatrix::zeros(dim, dim);
        for t in 0..self.t_max {
            for i in 0..s {
                let row = t * s + i;
                for j in 0..s {
                    m[(row, j)] = self.a[t][(i, j)];
                }
                if t + 1 < self.t_max {
                    m[(row, (t + 1) * s + i)] = self.rho[i][t];
                }
            }
        }
        m
    }

    /// `det P(lambda)` for `P(lambda) = lambda^T I - sum_t lambda^(T-t) Q(t)'`.
    ///
    /// The eigenvalues of the augmented chain are the roots; stationarity
    /// makes `lambda = 1` a root whenever the embedded chain is stochastic.
    pub fn char_det(&self, lambda: Complex<f64>) -> Complex<f64> {
        let s = self.states();
        let t_max = self.t_max;
        let mut p = DMatrix::from_diagonal_element(s, s, lambda.powu(t_max as u32));
        for (ti, q) in self.q_matrices().iter().enumerate() {
            let w = lambda.powu((t_max - ti - 1) as u32);
            for i in 0..s {
                for j in 0..s {
                    p[(j, i)] -= w * q[(i, j)];
                }
            }
        }
        p.determinant()
    }

    fn check_irreducible(&self, b: &DMatrix<f64>) -> Result<(), SmmError> {
        let s = self.states();
        let reach = |transpose: bool| {
            let mut seen = vec![false; s];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for j in 0..s {
                    let w = if transpose { b[(j, i)] } else { b[(i, j)] };
                    if w > EDGE_EPS && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen.into_iter().all(|v| v)
        };
        if reach(false) && reach(true) {
            Ok(())
        } else {
            Err(SmmError::Reducible)
        }
    }

    fn embedded_fixed_point_direct(&self, b: &DMatrix<f64>) -> Option<Vec<f64>> {
        let s = self.states();
        let mut m = b.transpose();
        for i in 0..s {
            m[(i, i)] -= 1.0;
        }
        for j in 0..s {
            m[(s - 1, j)] = 1.0;
        }
        let mut rhs = DVector::zeros(s);
        rhs[s - 1] = 1.0;
        let sol = m.lu().solve(&rhs)?;
        let mut v: Vec<f64> = sol.iter().map(|&x| x.max(0.0)).collect();
        let total: f64 = v.iter().sum();
        if !(total > 0.0) {
            return None;
        }
        for x in &mut v {
            *x /= total;
        }
        Some(v)
    }

    fn embedded_fixed_point_power(&self, b: &DMatrix<f64>) -> Result<(Vec<f64>, usize), SmmError> {
        let s = self.states();
        let bt = b.transpose();
        let mut x = DVector::from_element(s, 1.0 / s as f64);
        for it in 1..=POWER_CAP {
            // lazy-chain damping keeps periodic jump structures convergent
            let mut y = (&bt * &x + &x) * 0.5;
            let norm: f64 = y.iter().sum();
            y /= norm;
            let resid = (&bt * &y - &y).amax();
            x = y;
            if resid < POWER_TOL {
                return Ok((x.iter().copied().collect(), it));
            }
        }
        Err(SmmError::NoConvergence(POWER_CAP))
    }

    /// Stationary distribution over `(state, level)` pairs.
    ///
    /// Solves the embedded fixed point, propagates it up the levels with the
    /// hold factors, renormalises, and reports the block-form residual.
    pub fn stationary(&self) -> Result<StationaryResult, SmmError> {
        self.stationary_with(SolveMethod::Auto)
    }

    pub fn stationary_with(&self, method: SolveMethod) -> Result<StationaryResult, SmmError> {
        let s = self.states();
        let b = self.embedded();
        self.check_irreducible(&b)?;
        let direct = match method {
            SolveMethod::Auto => s <= DIRECT_LIMIT,
            SolveMethod::Direct => true,
            SolveMethod::Power => false,
        };
        let (pi1, iterations) = if direct {
            match self.embedded_fixed_point_direct(&b) {
                Some(v) => (v, None),
                None => {
                    let (v, it) = self.embedded_fixed_point_power(&b)?;
                    (v, Some(it))
                }
            }
        } else {
            let (v, it) = self.embedded_fixed_point_power(&b)?;
            (v, Some(it))
        };

        let mut pi: Vec<Vec<f64>> = vec![vec![0.0; self.t_max]; s];
        let mut total = 0.0;
        for i in 0..s {
            let mut mass = pi1[i];
            for t in 0..self.t_max {
                pi[i][t] = mass;
                total += mass;
                mass *= self.rho[i][t];
            }
        }
        for row in &mut pi {
            for p in row.iter_mut() {
                *p /= total;
            }
        }

        let embedded_total: f64 = pi1.iter().sum();
        let embedded_pi: Vec<f64> = pi1.iter().map(|&p| p / embedded_total).collect();
        let occupancy: Vec<f64> = pi.iter().map(|row| row.iter().sum()).collect();

        let mut residual = 0.0f64;
        for j in 0..s {
            let mut inflow = 0.0;
            for i in 0..s {
                for t in 0..self.t_max {
                    inflow += pi[i][t] * self.a[t][(i, j)];
                }
            }
            residual = residual.max((inflow - pi[j][0]).abs());
        }
        for i in 0..s {
            for t in 1..self.t_max {
                residual = residual.max((pi[i][t - 1] * self.rho[i][t - 1] - pi[i][t]).abs());
            }
        }

        Ok(StationaryResult {
            pi,
            embedded_pi,
            occupancy,
            residual,
            iterations,
        })
    }
}
