//! Command-line surface.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage or configuration error.
//! Diagnostics go to stderr; reports go to `--out` (stdout when absent).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::classify::{ClassifierKind, Metric};
use crate::denoise::{denoise_dataset, GraphKind};
use crate::episodes::{sweep_shots, sweep_table, EpisodePool, FewShotConfig};
use crate::error::{Error, Result};
use crate::features::LabeledFeatures;
use crate::io::config::{load_config_file, Mode, RunConfig};
use crate::io::format::{load_features, save_features, FileFormat};
use crate::io::report::{emit_report, Report, ResultEntry};
use crate::standard::{holdout_split, run_standard_eval};
use crate::synth::gaussian_pool;
use crate::theory::verify_theory;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "graph-denoise", version, about = "Per-class low-pass graph filtering of feature vectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Filter the features of every class and write them to --out.
    Denoise(Overrides),
    /// Paired few-shot evaluation with and without support filtering.
    EvalFewshot(Overrides),
    /// Train/test classification with and without filtering of the training split.
    EvalStandard(Overrides),
    /// Monte Carlo check of filtered-centroid mean and covariance.
    VerifyTheory(Overrides),
}

#[derive(Debug, Args)]
struct Overrides {
    /// `key = value` config file; flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Episodes for eval-fewshot, trials for verify-theory.
    #[arg(long)]
    iterations: Option<usize>,
    /// Last index with full gain (ideal low-pass cutoff for verify-theory).
    #[arg(long)]
    k1: Option<usize>,
    #[arg(long)]
    k2: Option<usize>,
    #[arg(long)]
    mid_gain: Option<f64>,
    #[arg(long)]
    knn_k: Option<usize>,
    #[arg(long)]
    m_shot: Option<usize>,
    #[arg(long)]
    n_way: Option<usize>,
    #[arg(long)]
    q_query: Option<usize>,
    /// Comma-separated shot counts to sweep (eval-fewshot) or class sizes (verify-theory).
    #[arg(long)]
    m_values: Option<String>,
    #[arg(long, value_parser = ["euclidean", "cosine"])]
    metric: Option<String>,
    #[arg(long, value_parser = ["ncm", "nn1"])]
    classifier: Option<String>,
    #[arg(long, value_parser = ["knn", "complete"])]
    graph: Option<String>,
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Held-out features for eval-standard.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, value_parser = ["text", "bin"])]
    format: Option<String>,
}

fn config_error(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

/// Defaults, then the config file, then flags.
fn build_config(mode: Mode, o: &Overrides) -> Result<RunConfig> {
    let mut cfg = RunConfig::defaults_for(mode);
    if let Some(path) = &o.config {
        cfg.apply_file(&load_config_file(path)?)?;
    }
    let theory = mode == Mode::VerifyTheory;
    if let Some(v) = o.seed {
        cfg.set("seed", &v.to_string())?;
    }
    if let Some(v) = o.iterations {
        if theory {
            cfg.theory.trials = v;
        } else {
            cfg.iterations = v;
        }
    }
    if let Some(v) = o.k1 {
        if theory {
            cfg.theory.lowpass_k = v;
        } else {
            cfg.denoise.k1 = v;
        }
    }
    if let Some(v) = o.k2 {
        cfg.denoise.k2 = v;
    }
    if let Some(v) = o.mid_gain {
        cfg.denoise.mid_gain = v;
    }
    if let Some(v) = o.knn_k {
        cfg.denoise.knn_k = v;
        cfg.theory.knn_k = v;
    }
    if let Some(v) = o.m_shot {
        cfg.episode.m_shot = v;
    }
    if let Some(v) = o.n_way {
        cfg.episode.n_way = v;
    }
    if let Some(v) = o.q_query {
        cfg.episode.q_query = v;
    }
    if let Some(v) = &o.m_values {
        let key = if theory { "theory.m_values" } else { "episode.m_values" };
        cfg.set(key, v)?;
    }
    if let Some(v) = &o.metric {
        cfg.classifier.metric = v.parse::<Metric>()?;
    }
    if let Some(v) = &o.classifier {
        cfg.classifier.kind = v.parse::<ClassifierKind>()?;
    }
    if let Some(v) = &o.graph {
        let kind = v.parse::<GraphKind>()?;
        if theory {
            cfg.theory.graph_kind = kind;
        } else {
            cfg.denoise.graph_kind = kind;
        }
    }
    if let Some(v) = &o.input {
        cfg.paths.input = Some(v.clone());
    }
    if let Some(v) = &o.out {
        cfg.paths.output = Some(v.clone());
    }
    if let Some(v) = &o.test {
        cfg.paths.test = Some(v.clone());
    }
    if let Some(v) = &o.format {
        cfg.paths.format = Some(v.parse()?);
    }
    match mode {
        Mode::Denoise if cfg.paths.input.is_none() || cfg.paths.output.is_none() => {
            return Err(Error::Config("denoise needs --in and --out".into()));
        }
        Mode::EvalStandard if cfg.paths.test.is_some() && cfg.paths.input.is_none() => {
            return Err(Error::Config("--test needs --in".into()));
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn format_for(cfg: &RunConfig, path: &Path) -> FileFormat {
    cfg.paths.format.unwrap_or_else(|| FileFormat::from_extension(path))
}

fn load(cfg: &RunConfig, path: &Path) -> Result<LabeledFeatures> {
    let data = load_features(path, format_for(cfg, path))?;
    log::info!("loaded {} samples of dimension {} from {}", data.n(), data.d(), path.display());
    Ok(data)
}

/// Input features, or the configured synthetic pool when `--in` is absent.
fn input_or_synthetic(cfg: &RunConfig) -> Result<LabeledFeatures> {
    match &cfg.paths.input {
        Some(path) => load(cfg, path),
        None => {
            log::info!("no --in given; using a synthetic Gaussian pool {:?}", cfg.synth);
            gaussian_pool(&cfg.synth)
        }
    }
}

fn write_report(cfg: &RunConfig, report: &Report) -> Result<()> {
    match &cfg.paths.output {
        Some(path) => emit_report(report, path),
        None => {
            println!("{}", report.to_json()?);
            Ok(())
        }
    }
}

fn run_denoise(cfg: &RunConfig) -> Result<()> {
    let input = cfg.paths.input.as_deref().expect("validated");
    let output = cfg.paths.output.as_deref().expect("validated");
    let data = load(cfg, input)?;
    let filtered = denoise_dataset(&data, &cfg.denoise)?;
    save_features(output, &filtered, format_for(cfg, output))?;
    log::info!("wrote {} filtered samples to {}", filtered.n(), output.display());
    Ok(())
}

fn run_fewshot(cfg: &RunConfig) -> Result<Report> {
    let pool = EpisodePool::new(input_or_synthetic(cfg)?);
    let base = FewShotConfig {
        episode: cfg.episode,
        denoise: cfg.denoise,
        classifier: cfg.classifier,
        iterations: cfg.iterations,
        seed: cfg.seed,
    };
    let m_values = if cfg.m_values.is_empty() { vec![cfg.episode.m_shot] } else { cfg.m_values.clone() };
    let points = sweep_shots(&pool, &base, &m_values)?;
    eprint!("{}", sweep_table(&points));

    let echo = serde_json::to_value(cfg)?;
    let mut report = Report::new(cfg.clone());
    for mut p in points {
        p.result.without_filter.config_echo = echo.clone();
        p.result.with_filter.config_echo = echo.clone();
        report.results.push(ResultEntry { name: format!("m_shot={}", p.m_shot), paired: p.result });
    }
    Ok(report)
}

fn run_standard(cfg: &RunConfig) -> Result<Report> {
    let (train, test) = match &cfg.paths.test {
        Some(test) => (input_or_synthetic(cfg)?, load(cfg, test)?),
        None => holdout_split(&input_or_synthetic(cfg)?, cfg.split.train_fraction, cfg.seed)?,
    };
    let echo = serde_json::to_value(cfg)?;
    let paired = run_standard_eval(&train, &test, &cfg.denoise, &cfg.classifier, echo)?;
    eprintln!(
        "{}/{}: without {:.4} ± {:.4}, with {:.4} ± {:.4}",
        cfg.classifier.kind,
        cfg.classifier.metric,
        paired.without_filter.mean_accuracy,
        paired.without_filter.ci95_halfwidth,
        paired.with_filter.mean_accuracy,
        paired.with_filter.ci95_halfwidth
    );
    let mut report = Report::new(cfg.clone());
    report.results.push(ResultEntry { name: format!("{}/{}", cfg.classifier.kind, cfg.classifier.metric), paired });
    Ok(report)
}

fn run_theory(cfg: &RunConfig) -> Result<Report> {
    let theory = verify_theory(&cfg.theory)?;
    for row in &theory.rows {
        eprintln!(
            "m={:>4}  published mean x{:.4} cov x{:.4} | simulated mean x{} cov x{:.4} (1/m = {:.4}){}",
            row.m,
            row.published_mean_factor,
            row.published_cov_factor,
            row.mc_mean_factor.map_or("n/a".to_string(), |f| format!("{f:.4}")),
            row.mc_cov_ratio,
            row.inverse_m,
            if row.mean_factor_deviates || row.cov_factor_deviates { "  [published factor deviates]" } else { "" }
        );
    }
    let mut report = Report::new(cfg.clone());
    report.theory = Some(theory);
    Ok(report)
}

fn dispatch(command: &Command) -> (Mode, &Overrides) {
    match command {
        Command::Denoise(o) => (Mode::Denoise, o),
        Command::EvalFewshot(o) => (Mode::EvalFewshot, o),
        Command::EvalStandard(o) => (Mode::EvalStandard, o),
        Command::VerifyTheory(o) => (Mode::VerifyTheory, o),
    }
}

pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (mode, overrides) = dispatch(&cli.command);
    let cfg = match build_config(mode, overrides).map_err(config_error) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let outcome = match mode {
        Mode::Denoise => run_denoise(&cfg),
        Mode::EvalFewshot => run_fewshot(&cfg).and_then(|r| write_report(&cfg, &r)),
        Mode::EvalStandard => run_standard(&cfg).and_then(|r| write_report(&cfg, &r)),
        Mode::VerifyTheory => run_theory(&cfg).and_then(|r| write_report(&cfg, &r)),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn overrides(args: &[&str]) -> Overrides {
        let argv = std::iter::once("graph-denoise").chain(std::iter::once("eval-fewshot")).chain(args.iter().copied());
        match Cli::try_parse_from(argv).unwrap().command {
            Command::EvalFewshot(o) => o,
            _ => unreachable!(),
        }
    }

    #[test]
    fn flags_override_file_override_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "denoise.k1 = 2\ndenoise.k2 = 3\nseed = 9\n").unwrap();
        let path_str = path.to_str().unwrap();

        let cfg = build_config(Mode::EvalFewshot, &overrides(&[])).unwrap();
        assert_eq!((cfg.denoise.k1, cfg.denoise.k2, cfg.seed), (1, 4, 0));

        let cfg = build_config(Mode::EvalFewshot, &overrides(&["--config", path_str])).unwrap();
        assert_eq!((cfg.denoise.k1, cfg.denoise.k2, cfg.seed), (2, 3, 9));

        let cfg =
            build_config(Mode::EvalFewshot, &overrides(&["--config", path_str, "--k1", "1", "--seed", "4"])).unwrap();
        assert_eq!((cfg.denoise.k1, cfg.denoise.k2, cfg.seed), (1, 3, 4));
    }

    #[test]
    fn invalid_combination_is_config_error() {
        assert!(build_config(Mode::EvalFewshot, &overrides(&["--k1", "5", "--k2", "2"])).is_err());
        assert!(build_config(Mode::Denoise, &overrides(&[])).is_err());
    }
}
