#![allow(dead_code)]

use dscofs::model::{center_columns, DataMatrix, Mat};
use dscofs::rng::{rng_for, SolverRng};
use dscofs::solver::random_orthonormal;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian(rows: usize, cols: usize, rng: &mut SolverRng) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn centered(d: usize, n: usize, rng: &mut SolverRng) -> DataMatrix {
    center_columns(&gaussian(d, n, rng)).unwrap()
}

pub fn stiefel(d: usize, m: usize, rng: &mut SolverRng) -> Mat {
    random_orthonormal(d, m, rng)
}

pub fn rng(seed: u64) -> SolverRng {
    rng_for(seed, 99)
}
