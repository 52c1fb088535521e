//! Stage glue shared by the command line and the end-to-end tests.

use std::path::Path;

use serde::Serialize;

use crate::dns::parse_dns;
use crate::eval::{self, ClassReport, EvalError, SplitMode};
use crate::exec::Execution;
use crate::label::Label;
use crate::matcher::{match_stream, LabeledResponse, MatchConfig, MatchStats};
use crate::matrix::FeatureMatrix;
use crate::pcap::{PcapError, PcapReader, SkipStats};
use crate::svm::{smo_train, SmoParams, SvmError, SvmModel, TrainParams, TrainingSet};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LabelStats {
    pub frames: u64,
    pub skipped: SkipStats,
    /// Port-53 datagrams whose payload is not a DNS message.
    pub undecodable: u64,
    pub matching: MatchStats,
}

/// Read a capture and label every response in it.
pub fn label_capture(
    path: impl AsRef<Path>,
    config: MatchConfig,
) -> Result<(Vec<LabeledResponse>, LabelStats), PcapError> {
    let mut reader = PcapReader::open(path)?;
    let mut undecodable = 0;
    let mut pairs = Vec::new();
    for record in reader.by_ref() {
        let record = record?;
        match parse_dns(&record.payload) {
            Ok(msg) => pairs.push((record, msg)),
            Err(_) => undecodable += 1,
        }
    }
    let (responses, matching) = match_stream(pairs, config);
    Ok((
        responses,
        LabelStats {
            frames: reader.frames(),
            skipped: reader.skipped(),
            undecodable,
            matching,
        },
    ))
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Svm(#[from] SvmError),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainConfig {
    pub c: f64,
    pub gamma: f64,
    pub n_good: usize,
    pub bad_frac: f64,
    pub train_frac: f64,
    pub stratified: bool,
    pub seed: u64,
    pub tol: f64,
    pub max_passes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let smo = SmoParams::default();
        TrainConfig {
            c: smo.c,
            gamma: 0.01,
            n_good: 20_000,
            bad_frac: 0.8,
            train_frac: 0.8,
            stratified: true,
            seed: 0,
            tol: smo.tol,
            max_passes: smo.max_passes,
        }
    }
}

impl TrainConfig {
    pub fn train_params(&self) -> TrainParams {
        TrainParams {
            gamma: self.gamma,
            smo: SmoParams {
                c: self.c,
                tol: self.tol,
                max_passes: self.max_passes,
                seed: self.seed,
                ..SmoParams::default()
            },
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: SvmModel,
    /// Report on the test part of the sampled pool.
    pub test_report: ClassReport,
    pub train_len: usize,
    /// Matrices never sampled into the pool.
    pub holdout: Vec<FeatureMatrix>,
}

/// Sample the pool, split it, train on the train part and score the test part.
pub fn train_and_evaluate(
    matrices: &[FeatureMatrix],
    config: &TrainConfig,
    exec: Execution,
) -> Result<TrainOutcome, TrainError> {
    let good: Vec<&FeatureMatrix> = matrices.iter().filter(|m| m.label == Label::Good).collect();
    let bad: Vec<&FeatureMatrix> = matrices.iter().filter(|m| m.label == Label::Bad).collect();
    if good.is_empty() || bad.is_empty() {
        return Err(SvmError::SingleClass.into());
    }
    let regime = eval::sample_regime(&good, &bad, config.n_good, config.bad_frac, config.seed)?;
    let mode = if config.stratified {
        SplitMode::Stratified
    } else {
        SplitMode::Unstratified
    };
    let (train, test) = eval::split(&regime.pool, config.train_frac, config.seed, mode)?;
    let data = TrainingSet::from_matrices(train.iter().copied())?;
    let (model, _) = smo_train(&data, &config.train_params(), exec)?;
    let test: Vec<FeatureMatrix> = test.into_iter().cloned().collect();
    let test_report = eval::evaluate(&model, &test, exec)?;
    Ok(TrainOutcome {
        model,
        test_report,
        train_len: train.len(),
        holdout: regime.holdout.into_iter().cloned().collect(),
    })
}
