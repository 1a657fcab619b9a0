#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sojourn_core::{RhoSequence, SmmSpec};

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random admissible factor sequence: interior values in (0, 1], terminal 0.
pub fn random_rho<R: Rng>(rng: &mut R, t_max: usize) -> RhoSequence {
    let mut v: Vec<f64> = (1..t_max).map(|_| 1.0 - rng.random::<f64>()).collect();
    v.push(0.0);
    RhoSequence::new(v).expect("generated sequence is admissible")
}

/// Random irreducible chain spec: dense positive jump matrix, per-state
/// supports drawn from `1..=t_cap`.
pub fn random_smm_spec<R: Rng>(rng: &mut R, s_cap: usize, t_cap: usize) -> SmmSpec {
    let s = rng.random_range(2..=s_cap.max(2));
    let mut rho_rows = Vec::with_capacity(s);
    for _ in 0..s {
        let t_i = rng.random_range(1..=t_cap.max(1));
        let mut row: Vec<f64> = (1..t_i).map(|_| 1.0 - rng.random::<f64>()).collect();
        row.push(0.0);
        rho_rows.push(row);
    }
    let mut jump = vec![vec![0.0f64; s]; s];
    for (i, row) in jump.iter_mut().enumerate() {
        let mut total = 0.0;
        for (j, cell) in row.iter_mut().enumerate() {
            if j != i {
                *cell = 0.05 + rng.random::<f64>();
                total += *cell;
            }
        }
        for (j, cell) in row.iter_mut().enumerate() {
            if j != i {
                *cell /= total;
            }
        }
    }
    SmmSpec::from_rho_jump(rho_rows, jump).expect("generated spec is valid")
}

/// Stationary row vector of a row-stochastic matrix by LU with the
/// normalisation row spliced in; independent of the library's solver.
pub fn dense_stationary(p: &DMatrix<f64>) -> Vec<f64> {
    let m = p.nrows();
    // (P^T - I) x = 0 with the last equation replaced by sum(x) = 1.
    let mut a = p.transpose();
    for i in 0..m {
        a[(i, i)] -= 1.0;
    }
    for j in 0..m {
        a[(m - 1, j)] = 1.0;
    }
    let mut b = DMatrix::zeros(m, 1);
    b[(m - 1, 0)] = 1.0;
    let sol = a.lu().solve(&b).expect("stationary system is nonsingular");
    sol.column(0).iter().copied().collect()
}
