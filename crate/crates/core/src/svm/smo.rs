//! Simplified sequential minimal optimization for the soft-margin dual
//!
//! ```text
//! max  W(a) = sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K_ij
//! s.t. 0 <= a_i <= C,  sum_i a_i y_i = 0
//! ```
//!
//! Every KKT violator in a sweep is paired with a second index drawn at
//! random (seeded) from the violators of that sweep, and the pair is
//! optimized analytically. An error cache keeps each step O(n).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kernel::KernelMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct SmoParams {
    pub c: f64,
    pub tol: f64,
    pub max_passes: usize,
    pub max_updates: u64,
    pub seed: u64,
}

impl Default for SmoParams {
    fn default() -> Self {
        SmoParams {
            c: 10.0,
            tol: 1e-3,
            max_passes: 10,
            max_updates: 1_000_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    /// One multiplier per training point, in `[0, C]`.
    pub alphas: Vec<f64>,
    pub bias: f64,
    /// Dual objective before the first sweep and after every sweep.
    pub objective_trace: Vec<f64>,
    pub sweeps: usize,
    pub updates: u64,
    pub cap_hit: bool,
}

impl Solution {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().unwrap_or(&0.0)
    }
}

/// Dual objective of `alphas` over the points `idx` of `gram`.
pub fn dual_objective(gram: &KernelMatrix, idx: &[usize], ys: &[f64], alphas: &[f64]) -> f64 {
    let mut quad = 0.0;
    for (a, &ia) in idx.iter().enumerate() {
        if alphas[a] == 0.0 {
            continue;
        }
        let mut s = 0.0;
        for (b, &ib) in idx.iter().enumerate() {
            s += alphas[b] * ys[b] * gram.get(ia, ib);
        }
        quad += alphas[a] * ys[a] * s;
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}

struct Solver<'a> {
    gram: &'a KernelMatrix,
    idx: &'a [usize],
    ys: &'a [f64],
    c: f64,
    alphas: Vec<f64>,
    /// f(x_i) - y_i with the running bias.
    errors: Vec<f64>,
    bias: f64,
}

impl Solver<'_> {
    #[inline]
    fn k(&self, a: usize, b: usize) -> f64 {
        self.gram.get(self.idx[a], self.idx[b])
    }

    fn violates(&self, i: usize, tol: f64) -> bool {
        let r = self.ys[i] * self.errors[i];
        (r < -tol && self.alphas[i] < self.c) || (r > tol && self.alphas[i] > 0.0)
    }

    fn objective(&self) -> f64 {
        // sum_j a_j y_j K_ij = E_i + y_i - b
        let quad: f64 = (0..self.alphas.len())
            .map(|i| self.alphas[i] * self.ys[i] * (self.errors[i] + self.ys[i] - self.bias))
            .sum();
        self.alphas.iter().sum::<f64>() - 0.5 * quad
    }

    /// Optimize the pair (i, j). Returns |delta a_j| when a step was taken.
    fn step(&mut self, i: usize, j: usize) -> Option<f64> {
        if i == j {
            return None;
        }
        let (yi, yj) = (self.ys[i], self.ys[j]);
        let (ai_old, aj_old) = (self.alphas[i], self.alphas[j]);
        let (ei, ej) = (self.errors[i], self.errors[j]);
        let c = self.c;
        let (lo, hi) = if yi != yj {
            ((aj_old - ai_old).max(0.0), (c + aj_old - ai_old).min(c))
        } else {
            ((ai_old + aj_old - c).max(0.0), (ai_old + aj_old).min(c))
        };
        if hi - lo <= 1e-12 * c {
            return None;
        }
        let (kii, kjj, kij) = (self.k(i, i), self.k(j, j), self.k(i, j));
        let eta = 2.0 * kij - kii - kjj;
        if eta >= -1e-12 {
            return None;
        }
        let aj = (aj_old - yj * (ei - ej) / eta).clamp(lo, hi);
        let delta_j = aj - aj_old;
        if delta_j.abs() <= 1e-12 * c {
            return None;
        }
        let mut ai = ai_old + yi * yj * (aj_old - aj);
        // Rounding can leave a_i a hair outside the box.
        ai = ai.clamp(0.0, c);
        let aj = snap(aj, c);
        let ai = snap(ai, c);
        let (di, dj) = (ai - ai_old, aj - aj_old);

        let b1 = self.bias - ei - yi * di * kii - yj * dj * kij;
        let b2 = self.bias - ej - yi * di * kij - yj * dj * kjj;
        let new_bias = if ai > 0.0 && ai < c {
            b1
        } else if aj > 0.0 && aj < c {
            b2
        } else {
            0.5 * (b1 + b2)
        };
        let db = new_bias - self.bias;
        let (si, sj) = (yi * di, yj * dj);
        let (gi, gj) = (self.idx[i], self.idx[j]);
        let gram = self.gram;
        for (k, e) in self.errors.iter_mut().enumerate() {
            let gk = self.idx[k];
            *e += si * gram.get(gi, gk) + sj * gram.get(gj, gk) + db;
        }
        self.alphas[i] = ai;
        self.alphas[j] = aj;
        self.bias = new_bias;
        Some(dj.abs())
    }

    /// Bias from the KKT conditions at the final multipliers: the mean over
    /// free vectors, or the middle of the feasible interval when none is free.
    fn final_bias(&self) -> f64 {
        let mut free_sum = 0.0;
        let mut free = 0usize;
        let mut lower = f64::NEG_INFINITY;
        let mut upper = f64::INFINITY;
        for i in 0..self.alphas.len() {
            // y_i - sum_j a_j y_j K_ij
            let target = self.ys[i] - (self.errors[i] + self.ys[i] - self.bias);
            let a = self.alphas[i];
            if a > 0.0 && a < self.c {
                free_sum += target;
                free += 1;
            } else {
                // a = 0 needs y f >= 1, a = C needs y f <= 1.
                let at_lower = a == 0.0;
                if (self.ys[i] > 0.0) == at_lower {
                    lower = lower.max(target);
                } else {
                    upper = upper.min(target);
                }
            }
        }
        if free > 0 {
            free_sum / free as f64
        } else if lower.is_finite() && upper.is_finite() {
            0.5 * (lower + upper)
        } else if lower.is_finite() {
            lower
        } else if upper.is_finite() {
            upper
        } else {
            self.bias
        }
    }
}

fn snap(a: f64, c: f64) -> f64 {
    let eps = 1e-12 * c;
    if a < eps {
        0.0
    } else if a > c - eps {
        c
    } else {
        a
    }
}

/// Solve the dual over the points `idx` of `gram` with targets `ys` (±1).
pub fn solve(gram: &KernelMatrix, idx: &[usize], ys: &[f64], params: &SmoParams) -> Solution {
    let n = idx.len();
    assert_eq!(n, ys.len());
    let mut s = Solver {
        gram,
        idx,
        ys,
        c: params.c,
        alphas: vec![0.0; n],
        errors: ys.iter().map(|y| -y).collect(),
        bias: 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut trace = vec![0.0];
    let mut quiet_sweeps = 0;
    let mut sweeps = 0;
    let mut updates = 0u64;
    let mut cap_hit = false;
    let mut violators = Vec::with_capacity(n);

    while quiet_sweeps < params.max_passes && !cap_hit {
        violators.clear();
        violators.extend((0..n).filter(|&i| s.violates(i, params.tol)));
        let mut largest_change = 0.0f64;
        for i in 0..n {
            if !s.violates(i, params.tol) {
                continue;
            }
            let j = if violators.len() > 1 {
                let mut j = violators[rng.random_range(0..violators.len())];
                while j == i {
                    j = violators[rng.random_range(0..violators.len())];
                }
                j
            } else if n > 1 {
                let j = rng.random_range(0..n - 1);
                if j >= i {
                    j + 1
                } else {
                    j
                }
            } else {
                continue;
            };
            // When the drawn partner cannot move, fall back to every other
            // point, starting at a random offset.
            let step = s.step(i, j).or_else(|| {
                let offset = rng.random_range(0..n);
                (0..n).map(|k| (offset + k) % n).find_map(|k| s.step(i, k))
            });
            if let Some(change) = step {
                largest_change = largest_change.max(change);
                updates += 1;
                if updates >= params.max_updates {
                    cap_hit = true;
                    break;
                }
            }
        }
        sweeps += 1;
        trace.push(s.objective());
        if largest_change > params.tol {
            quiet_sweeps = 0;
        } else {
            quiet_sweeps += 1;
        }
    }

    let bias = s.final_bias();
    Solution {
        alphas: s.alphas,
        bias,
        objective_trace: trace,
        sweeps,
        updates,
        cap_hit,
    }
}
