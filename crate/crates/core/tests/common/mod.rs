//! Helpers shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exact maximum of the soft-margin dual by enumerating active sets.
///
/// Every multiplier is either at 0, at `c`, or free; for each assignment the
/// free multipliers and the bias solve the stationarity conditions together
/// with the equality constraint. The best feasible candidate is the global
/// maximum because the objective is concave and its optimum satisfies the
/// conditions for its own active set.
pub fn dual_optimum(kernel: &[Vec<f64>], ys: &[f64], c: f64) -> f64 {
    let n = ys.len();
    assert!(n <= 13, "enumeration is 3^n");
    let q = |i: usize, j: usize| ys[i] * ys[j] * kernel[i][j];
    let objective = |a: &[f64]| {
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += a[i] * a[j] * q(i, j);
            }
        }
        a.iter().sum::<f64>() - 0.5 * quad
    };
    let mut best = f64::NEG_INFINITY;
    let mut state = vec![0u8; n];
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut k = code;
        for s in state.iter_mut() {
            *s = (k % 3) as u8;
            k /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut alpha: Vec<f64> = state
            .iter()
            .map(|&s| if s == 1 { c } else { 0.0 })
            .collect();
        let bound_sum: f64 = (0..n).filter(|&i| state[i] == 1).map(|i| ys[i] * c).sum();
        if free.is_empty() {
            if bound_sum.abs() > 1e-9 {
                continue;
            }
        } else {
            let m = free.len() + 1;
            let mut a = vec![vec![0.0; m + 1]; m];
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    a[r][s] = q(i, j);
                }
                a[r][m - 1] = ys[i];
                let bound: f64 = (0..n).filter(|&j| state[j] == 1).map(|j| q(i, j) * c).sum();
                a[r][m] = 1.0 - bound;
            }
            for (s, &j) in free.iter().enumerate() {
                a[m - 1][s] = ys[j];
            }
            a[m - 1][m] = -bound_sum;
            let Some(sol) = gauss_solve(a) else { continue };
            let mut feasible = true;
            for (r, &i) in free.iter().enumerate() {
                let v = sol[r];
                if !(-1e-9..=c + 1e-9).contains(&v) {
                    feasible = false;
                    break;
                }
                alpha[i] = v.clamp(0.0, c);
            }
            if !feasible {
                continue;
            }
        }
        best = best.max(objective(&alpha));
    }
    best
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn gauss_solve(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let m = a.len();
    for col in 0..m {
        let pivot = (col..m).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        for row in 0..m {
            if row != col {
                let f = a[row][col] / a[col][col];
                let pivot_row = a[col].clone();
                for (x, p) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                    *x -= f * p;
                }
            }
        }
    }
    Some((0..m).map(|i| a[i][m] / a[i][i]).collect())
}

/// A small random two-class problem: points, ±1 targets, c and gamma.
pub struct SmallProblem {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
    pub c: f64,
    pub gamma: f64,
}

pub fn small_problem(seed: u64, max_points: usize) -> SmallProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(4..=max_points);
    let d = rng.random_range(1..=4);
    let xs: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
        .collect();
    let mut ys: Vec<f64> = (0..n)
        .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
        .collect();
    ys[0] = 1.0;
    ys[1] = -1.0;
    let c = [0.5, 1.0, 10.0][rng.random_range(0..3)];
    let gamma = [0.5, 2.0, 8.0][rng.random_range(0..3)];
    SmallProblem { xs, ys, c, gamma }
}

pub fn kernel_rows(xs: &[Vec<f64>], gamma: f64) -> Vec<Vec<f64>> {
    xs.iter()
        .map(|x| {
            xs.iter()
                .map(|y| {
                    let d: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                    (-gamma * d).exp()
                })
                .collect()
        })
        .collect()
}
