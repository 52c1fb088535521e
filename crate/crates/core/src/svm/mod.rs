//! RBF-kernel soft-margin SVM.
//!
//! Bad (reflector) matrices are the positive class: a decision value of
//! zero or more predicts [`Label::Bad`].

use std::io;

use crate::exec::Execution;
use crate::label::Label;

mod grid;
mod io_format;
mod kernel;
pub mod smo;

pub use grid::{grid_search, stratified_folds, GridCell, GridConfig, GridResult};
pub use io_format::{load_model, read_model, save_model, write_model, MODEL_VERSION};
pub use kernel::{rbf_kernel, KernelMatrix};
pub use smo::{SmoParams, Solution};

#[derive(Debug, thiserror::Error)]
pub enum SvmError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("training data holds a single class (SingleClass)")]
    SingleClass,
    #[error("too few samples: {0}")]
    TooFewSamples(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("model file line {line}: {reason}")]
    Schema { line: usize, reason: String },
    #[error("unsupported model file version {found} (reader supports {MODEL_VERSION})")]
    VersionMismatch { found: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Labeled feature vectors, all of one dimension with components in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    xs: Vec<Vec<f64>>,
    labels: Vec<Label>,
}

impl TrainingSet {
    pub fn new(xs: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<Self, SvmError> {
        if xs.len() != labels.len() {
            return Err(SvmError::DimensionMismatch {
                expected: xs.len(),
                found: labels.len(),
            });
        }
        if xs.len() < 2 {
            return Err(SvmError::TooFewSamples(format!(
                "{} points, need 2",
                xs.len()
            )));
        }
        let dim = xs[0].len();
        if dim == 0 {
            return Err(SvmError::InvalidParameter("zero-dimensional vectors"));
        }
        for x in &xs {
            if x.len() != dim {
                return Err(SvmError::DimensionMismatch {
                    expected: dim,
                    found: x.len(),
                });
            }
            if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(SvmError::InvalidParameter("feature outside [0, 1]"));
            }
        }
        if !labels.contains(&Label::Good) || !labels.contains(&Label::Bad) {
            return Err(SvmError::SingleClass);
        }
        Ok(TrainingSet { xs, labels })
    }

    pub fn from_matrices<'a, I>(matrices: I) -> Result<Self, SvmError>
    where
        I: IntoIterator<Item = &'a crate::FeatureMatrix>,
    {
        let (xs, labels) = matrices
            .into_iter()
            .map(|m| (m.as_vector().to_vec(), m.label))
            .unzip();
        TrainingSet::new(xs, labels)
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.xs[0].len()
    }

    pub fn xs(&self) -> &[Vec<f64>] {
        &self.xs
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn targets(&self) -> Vec<f64> {
        self.labels.iter().map(|l| l.sign()).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel {
    gamma: f64,
    c: f64,
    support_vectors: Vec<Vec<f64>>,
    /// alpha_i * y_i per support vector.
    dual_coefs: Vec<f64>,
    bias: f64,
    /// Training stopped at the update cap rather than by convergence.
    cap_hit: bool,
}

impl SvmModel {
    pub fn new(
        gamma: f64,
        c: f64,
        support_vectors: Vec<Vec<f64>>,
        dual_coefs: Vec<f64>,
        bias: f64,
    ) -> Result<Self, SvmError> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(SvmError::InvalidParameter("gamma must be positive"));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(SvmError::InvalidParameter("c must be positive"));
        }
        if !bias.is_finite() {
            return Err(SvmError::InvalidParameter("bias must be finite"));
        }
        if support_vectors.is_empty() {
            return Err(SvmError::InvalidParameter(
                "model needs at least one support vector",
            ));
        }
        if support_vectors.len() != dual_coefs.len() {
            return Err(SvmError::DimensionMismatch {
                expected: support_vectors.len(),
                found: dual_coefs.len(),
            });
        }
        let dim = support_vectors[0].len();
        if let Some(sv) = support_vectors.iter().find(|sv| sv.len() != dim) {
            return Err(SvmError::DimensionMismatch {
                expected: dim,
                found: sv.len(),
            });
        }
        if dual_coefs
            .iter()
            .any(|a| !a.is_finite() || *a == 0.0 || a.abs() > c * (1.0 + 1e-9))
        {
            return Err(SvmError::InvalidParameter(
                "dual coefficient outside (0, c]",
            ));
        }
        Ok(SvmModel {
            gamma,
            c,
            support_vectors,
            dual_coefs,
            bias,
            cap_hit: false,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn dim(&self) -> usize {
        self.support_vectors[0].len()
    }

    pub fn support_vectors(&self) -> &[Vec<f64>] {
        &self.support_vectors
    }

    pub fn dual_coefs(&self) -> &[f64] {
        &self.dual_coefs
    }

    pub fn cap_hit(&self) -> bool {
        self.cap_hit
    }

    pub fn with_cap_hit(mut self, cap_hit: bool) -> Self {
        self.cap_hit = cap_hit;
        self
    }

    pub fn decision_value(&self, x: &[f64]) -> Result<f64, SvmError> {
        if x.len() != self.dim() {
            return Err(SvmError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(self.decision_unchecked(x))
    }

    fn decision_unchecked(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, coef)| coef * kernel::rbf_unchecked(sv, x, self.gamma))
            .sum::<f64>()
            + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label, SvmError> {
        self.decision_value(x).map(Label::from_decision)
    }

    /// Decision values for many inputs, in input order.
    pub fn decision_batch<X: AsRef<[f64]> + Sync>(
        &self,
        xs: &[X],
        exec: Execution,
    ) -> Result<Vec<f64>, SvmError> {
        if let Some(x) = xs.iter().find(|x| x.as_ref().len() != self.dim()) {
            return Err(SvmError::DimensionMismatch {
                expected: self.dim(),
                found: x.as_ref().len(),
            });
        }
        Ok(exec.map(xs, |x| self.decision_unchecked(x.as_ref())))
    }

    pub fn predict_batch<X: AsRef<[f64]> + Sync>(
        &self,
        xs: &[X],
        exec: Execution,
    ) -> Result<Vec<Label>, SvmError> {
        Ok(self
            .decision_batch(xs, exec)?
            .into_iter()
            .map(Label::from_decision)
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainParams {
    pub gamma: f64,
    pub smo: SmoParams,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            gamma: 0.01,
            smo: SmoParams::default(),
        }
    }
}

fn check_params(gamma: f64, smo: &SmoParams) -> Result<(), SvmError> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(SvmError::InvalidParameter("gamma must be positive"));
    }
    if !(smo.c > 0.0 && smo.c.is_finite()) {
        return Err(SvmError::InvalidParameter("c must be positive"));
    }
    if smo.tol.is_nan() || smo.tol <= 0.0 {
        return Err(SvmError::InvalidParameter("tol must be positive"));
    }
    Ok(())
}

/// Train on the full set. Returns the model and the raw dual solution.
pub fn smo_train(
    data: &TrainingSet,
    params: &TrainParams,
    exec: Execution,
) -> Result<(SvmModel, Solution), SvmError> {
    check_params(params.gamma, &params.smo)?;
    let gram = KernelMatrix::compute(data.xs(), params.gamma, exec);
    let idx: Vec<usize> = (0..data.len()).collect();
    let ys = data.targets();
    let solution = smo::solve(&gram, &idx, &ys, &params.smo);
    if solution.cap_hit {
        log::warn!(
            "SMO stopped at the update cap ({} updates)",
            solution.updates
        );
    }
    let (svs, coefs): (Vec<_>, Vec<_>) = solution
        .alphas
        .iter()
        .enumerate()
        .filter(|(_, a)| **a > 0.0)
        .map(|(i, a)| (data.xs()[i].clone(), a * ys[i]))
        .unzip();
    if svs.is_empty() {
        return Err(SvmError::InvalidParameter(
            "training produced no support vectors",
        ));
    }
    let model = SvmModel::new(params.gamma, params.smo.c, svs, coefs, solution.bias)?
        .with_cap_hit(solution.cap_hit);
    Ok((model, solution))
}

pub fn train(data: &TrainingSet, params: &TrainParams) -> Result<SvmModel, SvmError> {
    smo_train(data, params, Execution::default()).map(|(m, _)| m)
}
