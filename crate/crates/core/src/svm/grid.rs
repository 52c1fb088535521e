//! Hyper-parameter search over (C, gamma) with stratified k-fold
//! cross-validation scored by macro-F1.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::kernel::KernelMatrix;
use super::smo::{self, SmoParams};
use super::{check_params, SvmError, TrainingSet};
use crate::eval::classification_report;
use crate::exec::Execution;
use crate::label::Label;

#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    pub c_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
    /// `c` and `seed` are overridden per cell and fold.
    pub smo: SmoParams,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            c_grid: vec![0.1, 1.0, 10.0, 100.0],
            gamma_grid: vec![0.001, 0.01, 0.1],
            folds: 3,
            seed: 0,
            smo: SmoParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridCell {
    pub c: f64,
    pub gamma: f64,
    pub fold_scores: Vec<f64>,
    pub mean_score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridResult {
    pub best_c: f64,
    pub best_gamma: f64,
    pub best_score: f64,
    /// Every cell, ordered by c then gamma.
    pub cells: Vec<GridCell>,
}

/// Assign every point to one of `folds` folds, per class, after a seeded
/// shuffle. Returns the fold index of each point.
pub fn stratified_folds(labels: &[Label], folds: usize, seed: u64) -> Result<Vec<usize>, SvmError> {
    if folds < 2 {
        return Err(SvmError::InvalidParameter("need at least 2 folds"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    for class in Label::ALL {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < folds {
            return Err(SvmError::TooFewSamples(format!(
                "{} {} samples for {} folds",
                members.len(),
                class,
                folds
            )));
        }
        members.shuffle(&mut rng);
        for (k, i) in members.into_iter().enumerate() {
            assignment[i] = k % folds;
        }
    }
    Ok(assignment)
}

fn sorted_grid(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

pub fn grid_search(
    data: &TrainingSet,
    config: &GridConfig,
    exec: Execution,
) -> Result<GridResult, SvmError> {
    if config.c_grid.is_empty() || config.gamma_grid.is_empty() {
        return Err(SvmError::InvalidParameter("empty grid"));
    }
    for &gamma in &config.gamma_grid {
        for &c in &config.c_grid {
            check_params(
                gamma,
                &SmoParams {
                    c,
                    ..config.smo.clone()
                },
            )?;
        }
    }
    let folds = stratified_folds(data.labels(), config.folds, config.seed)?;
    let ys = data.targets();
    let c_grid = sorted_grid(&config.c_grid);
    let gamma_grid = sorted_grid(&config.gamma_grid);

    let mut scores = vec![vec![0.0; config.folds]; c_grid.len() * gamma_grid.len()];
    for (gi, &gamma) in gamma_grid.iter().enumerate() {
        let gram = KernelMatrix::compute(data.xs(), gamma, exec);
        let tasks: Vec<(usize, usize)> = (0..c_grid.len())
            .flat_map(|ci| (0..config.folds).map(move |f| (ci, f)))
            .collect();
        let results = exec.map(&tasks, |&(ci, fold)| {
            let train: Vec<usize> = (0..data.len()).filter(|&i| folds[i] != fold).collect();
            let test: Vec<usize> = (0..data.len()).filter(|&i| folds[i] == fold).collect();
            let train_ys: Vec<f64> = train.iter().map(|&i| ys[i]).collect();
            let params = SmoParams {
                c: c_grid[ci],
                seed: config.seed ^ ((gi * c_grid.len() + ci) as u64 * 0x9E37_79B9 + fold as u64),
                ..config.smo.clone()
            };
            let sol = smo::solve(&gram, &train, &train_ys, &params);
            let predicted: Vec<Label> = test
                .iter()
                .map(|&t| {
                    let f: f64 = train
                        .iter()
                        .zip(&sol.alphas)
                        .filter(|(_, a)| **a > 0.0)
                        .map(|(&s, a)| a * ys[s] * gram.get(s, t))
                        .sum::<f64>()
                        + sol.bias;
                    Label::from_decision(f)
                })
                .collect();
            let truth: Vec<Label> = test.iter().map(|&t| data.labels()[t]).collect();
            classification_report(&truth, &predicted)
                .map(|r| r.macro_avg.f1)
                .unwrap_or(0.0)
        });
        for (&(ci, fold), score) in tasks.iter().zip(results) {
            scores[ci * gamma_grid.len() + gi][fold] = score;
        }
    }

    let mut cells = Vec::with_capacity(scores.len());
    for (ci, &c) in c_grid.iter().enumerate() {
        for (gi, &gamma) in gamma_grid.iter().enumerate() {
            let fold_scores = scores[ci * gamma_grid.len() + gi].clone();
            let mean_score = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
            cells.push(GridCell {
                c,
                gamma,
                fold_scores,
                mean_score,
            });
        }
    }
    // Cells are in (c, gamma) order, so the first maximum is the tie-break winner.
    let best = cells
        .iter()
        .fold(None::<&GridCell>, |best, cell| match best {
            Some(b) if b.mean_score >= cell.mean_score => Some(b),
            _ => Some(cell),
        })
        .expect("grid is not empty");
    let (best_c, best_gamma, best_score) = (best.c, best.gamma, best.mean_score);
    Ok(GridResult {
        best_c,
        best_gamma,
        best_score,
        cells,
    })
}
