use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use dnsmatrix::eval::{self, render_report, ClassReport, SplitMode};
use dnsmatrix::matcher::MatchConfig;
use dnsmatrix::matrix::{build_matrices, load_matrices, save_matrices};
use dnsmatrix::pipeline::{label_capture, train_and_evaluate, TrainConfig};
use dnsmatrix::render::render_pgm;
use dnsmatrix::responses::{load_responses, save_responses};
use dnsmatrix::svm::{self, GridConfig, SmoParams, TrainingSet};
use dnsmatrix::synth::{generate, ScenarioConfig};
use dnsmatrix::{Execution, FeatureMatrix, Label};
use serde_json::json;

/// Detect DNS reflectors from per-server response matrices.
#[derive(Parser, Debug)]
#[command(name = "dnsmatrix", version)]
struct Cli {
    /// Run every data-parallel loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic capture from a scenario file.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label every response in a capture as solicited (good) or not (bad).
    Label {
        #[arg(long)]
        pcap: PathBuf,
        /// Seconds a query waits for its response.
        #[arg(long, default_value_t = 30.0)]
        timeout: f64,
        /// Let one query match several responses.
        #[arg(long)]
        multi_match: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build 14x100 feature matrices from labeled responses.
    Matrix {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample, split, train an RBF SVM and report on the test split.
    Train {
        #[arg(long)]
        matrices: PathBuf,
        #[arg(long, default_value_t = 10.0)]
        c: f64,
        #[arg(long, default_value_t = 0.01)]
        gamma: f64,
        #[command(flatten)]
        sampling: Sampling,
        #[arg(long)]
        model_out: PathBuf,
        /// Text report; a JSON copy goes next to it (or to --json-out).
        #[arg(long)]
        report_out: PathBuf,
        #[arg(long)]
        json_out: Option<PathBuf>,
        /// Also write the matrices that were never sampled.
        #[arg(long)]
        holdout_out: Option<PathBuf>,
    },
    /// Cross-validated search over C and gamma on the training split.
    Grid {
        #[arg(long)]
        matrices: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 1.0, 10.0, 100.0])]
        c_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.001, 0.01, 0.1])]
        gamma_grid: Vec<f64>,
        #[arg(long, default_value_t = 3)]
        folds: usize,
        #[command(flatten)]
        sampling: Sampling,
        /// Write every grid cell as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a trained model on a matrix file.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        matrices: PathBuf,
        #[arg(long)]
        report_out: PathBuf,
        #[arg(long)]
        json_out: Option<PathBuf>,
    },
    /// Render one matrix as a binary PGM image.
    Render {
        #[arg(long)]
        matrices: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u16).range(1..=64))]
        scale: u16,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct Sampling {
    #[arg(long, default_value_t = 20_000)]
    n_good: usize,
    #[arg(long, default_value_t = 0.8)]
    bad_frac: f64,
    #[arg(long, default_value_t = 0.8)]
    train_frac: f64,
    /// Split the pool as a whole instead of per class.
    #[arg(long)]
    unstratified: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// A flag value that parses but makes no sense; exits with status 1.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn print_config(command: &str, config: serde_json::Value) {
    println!("effective config [{command}]: {config}");
}

fn json_path(report: &Path, explicit: Option<PathBuf>) -> Result<PathBuf> {
    let path = explicit.unwrap_or_else(|| report.with_extension("json"));
    if path == report {
        return Err(usage("--json-out must differ from --report-out"));
    }
    Ok(path)
}

fn write_report(report: &ClassReport, text_path: &Path, json_path: &Path) -> Result<()> {
    let text = render_report(report);
    print!("{text}");
    fs::write(text_path, &text).with_context(|| format!("writing {}", text_path.display()))?;
    fs::write(json_path, report.to_json())
        .with_context(|| format!("writing {}", json_path.display()))?;
    Ok(())
}

fn load(path: &Path) -> Result<Vec<FeatureMatrix>> {
    let matrices = load_matrices(path).with_context(|| format!("reading {}", path.display()))?;
    let good = matrices.iter().filter(|m| m.label == Label::Good).count();
    println!(
        "{}: {} matrices ({good} good, {} bad)",
        path.display(),
        matrices.len(),
        matrices.len() - good
    );
    Ok(matrices)
}

fn check_fractions(s: &Sampling) -> Result<()> {
    if !(s.bad_frac > 0.0 && s.bad_frac <= 1.0) {
        return Err(usage("--bad-frac must lie in (0, 1]"));
    }
    if !(s.train_frac > 0.0 && s.train_frac < 1.0) {
        return Err(usage("--train-frac must lie in (0, 1)"));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match cli.command {
        Command::Synth { config, out } => {
            let scenario = ScenarioConfig::load(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            print_config(
                "synth",
                json!({ "config": config, "out": out, "scenario": scenario }),
            );
            let summary =
                generate(&scenario, &out).with_context(|| format!("writing {}", out.display()))?;
            println!(
                "wrote {} frames: {} responses from benign servers, {} from bad servers",
                summary.frames,
                summary.responses(false),
                summary.responses(true)
            );
        }
        Command::Label {
            pcap,
            timeout,
            multi_match,
            out,
        } => {
            if !(timeout > 0.0 && timeout.is_finite()) {
                return Err(usage("--timeout must be positive"));
            }
            let config = MatchConfig {
                timeout,
                multi_match,
                ..MatchConfig::default()
            };
            print_config(
                "label",
                json!({
                    "pcap": pcap, "out": out, "timeout": timeout,
                    "reorder_tolerance": config.reorder_tolerance, "multi_match": multi_match,
                }),
            );
            let (responses, stats) = label_capture(&pcap, config)
                .with_context(|| format!("reading {}", pcap.display()))?;
            save_responses(&out, &responses)
                .with_context(|| format!("writing {}", out.display()))?;
            println!(
                "{} frames, {} skipped, {} undecodable; {} queries, {} good and {} bad responses, {} ignored",
                stats.frames,
                stats.skipped.total(),
                stats.undecodable,
                stats.matching.queries,
                stats.matching.good,
                stats.matching.bad,
                stats.matching.ignored
            );
        }
        Command::Matrix { input, out } => {
            print_config(
                "matrix",
                json!({ "in": input, "out": out, "parallel": exec.is_parallel() }),
            );
            let responses =
                load_responses(&input).with_context(|| format!("reading {}", input.display()))?;
            let (matrices, stats) = build_matrices(&responses, exec)?;
            save_matrices(&out, &matrices).with_context(|| format!("writing {}", out.display()))?;
            println!(
                "{} responses in {} partitions -> {} matrices ({} responses discarded)",
                responses.len(),
                stats.partitions,
                stats.matrices,
                stats.discarded
            );
        }
        Command::Train {
            matrices,
            c,
            gamma,
            sampling,
            model_out,
            report_out,
            json_out,
            holdout_out,
        } => {
            check_fractions(&sampling)?;
            if !(c > 0.0 && gamma > 0.0) {
                return Err(usage("--c and --gamma must be positive"));
            }
            let json_out = json_path(&report_out, json_out)?;
            let config = TrainConfig {
                c,
                gamma,
                n_good: sampling.n_good,
                bad_frac: sampling.bad_frac,
                train_frac: sampling.train_frac,
                stratified: !sampling.unstratified,
                seed: sampling.seed,
                ..TrainConfig::default()
            };
            print_config(
                "train",
                json!({
                    "matrices": matrices, "model_out": model_out, "report_out": report_out,
                    "json_out": json_out, "holdout_out": holdout_out, "parallel": exec.is_parallel(),
                    "train": config,
                }),
            );
            let all = load(&matrices)?;
            let outcome = train_and_evaluate(&all, &config, exec)?;
            println!(
                "trained on {} matrices: {} support vectors{}",
                outcome.train_len,
                outcome.model.support_vectors().len(),
                if outcome.model.cap_hit() {
                    " (stopped at the update cap)"
                } else {
                    ""
                }
            );
            svm::save_model(&model_out, &outcome.model)
                .with_context(|| format!("writing {}", model_out.display()))?;
            write_report(&outcome.test_report, &report_out, &json_out)?;
            if let Some(path) = holdout_out {
                save_matrices(&path, &outcome.holdout)
                    .with_context(|| format!("writing {}", path.display()))?;
                println!(
                    "{} holdout matrices written to {}",
                    outcome.holdout.len(),
                    path.display()
                );
            }
        }
        Command::Grid {
            matrices,
            c_grid,
            gamma_grid,
            folds,
            sampling,
            out,
        } => {
            check_fractions(&sampling)?;
            if c_grid
                .iter()
                .chain(&gamma_grid)
                .any(|v| !(*v > 0.0 && v.is_finite()))
            {
                return Err(usage("grid values must be positive"));
            }
            if folds < 2 {
                return Err(usage("--folds must be at least 2"));
            }
            let config = GridConfig {
                c_grid,
                gamma_grid,
                folds,
                seed: sampling.seed,
                smo: SmoParams::default(),
            };
            print_config(
                "grid",
                json!({
                    "matrices": matrices, "c_grid": config.c_grid, "gamma_grid": config.gamma_grid,
                    "folds": folds, "n_good": sampling.n_good, "bad_frac": sampling.bad_frac,
                    "train_frac": sampling.train_frac, "stratified": !sampling.unstratified,
                    "seed": sampling.seed, "out": out, "parallel": exec.is_parallel(),
                }),
            );
            let all = load(&matrices)?;
            let good: Vec<&FeatureMatrix> = all.iter().filter(|m| m.label == Label::Good).collect();
            let bad: Vec<&FeatureMatrix> = all.iter().filter(|m| m.label == Label::Bad).collect();
            if good.is_empty() || bad.is_empty() {
                return Err(svm::SvmError::SingleClass.into());
            }
            let regime = eval::sample_regime(
                &good,
                &bad,
                sampling.n_good,
                sampling.bad_frac,
                sampling.seed,
            )?;
            let mode = if sampling.unstratified {
                SplitMode::Unstratified
            } else {
                SplitMode::Stratified
            };
            let (train, _) = eval::split(&regime.pool, sampling.train_frac, sampling.seed, mode)?;
            let data = TrainingSet::from_matrices(train.iter().copied())?;
            let result = svm::grid_search(&data, &config, exec)?;
            println!("{:>10} {:>10} {:>10}", "c", "gamma", "macro F1");
            for cell in &result.cells {
                println!(
                    "{:>10} {:>10} {:>10.4}",
                    cell.c, cell.gamma, cell.mean_score
                );
            }
            println!(
                "best: c = {}, gamma = {} (macro F1 {:.4})",
                result.best_c, result.best_gamma, result.best_score
            );
            if let Some(path) = out {
                let text = serde_json::to_string_pretty(&result)?;
                fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Classify {
            model,
            matrices,
            report_out,
            json_out,
        } => {
            let json_out = json_path(&report_out, json_out)?;
            print_config(
                "classify",
                json!({
                    "model": model, "matrices": matrices, "report_out": report_out,
                    "json_out": json_out, "parallel": exec.is_parallel(),
                }),
            );
            let svm =
                svm::load_model(&model).with_context(|| format!("reading {}", model.display()))?;
            let all = load(&matrices)?;
            let report = eval::evaluate(&svm, &all, exec)?;
            write_report(&report, &report_out, &json_out)?;
        }
        Command::Render {
            matrices,
            index,
            scale,
            out,
        } => {
            print_config(
                "render",
                json!({ "matrices": matrices, "index": index, "scale": scale, "out": out }),
            );
            let all = load(&matrices)?;
            let m = all.get(index).ok_or_else(|| {
                usage(format!(
                    "--index {index} out of range ({} matrices)",
                    all.len()
                ))
            })?;
            fs::write(&out, render_pgm(m, usize::from(scale)))
                .with_context(|| format!("writing {}", out.display()))?;
            println!(
                "matrix {index} ({} {}) written to {}",
                m.server_ip,
                m.label,
                out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
