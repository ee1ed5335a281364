use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use outlier_core::eval::{confusion_matrix_eval, fit_per_class};
use outlier_core::{
    load_manifest, one_vs_all_eval, read_features, run_ood_eval, Detector, Labeled, Scorer,
};

mod config;

use config::{InvalidConfig, RunArgs, RunConfig};

/// Prefix for wall-clock lines, the only non-deterministic stdout output.
const TIMING_PREFIX: &str = "[timing]";

#[derive(Parser)]
#[command(name = "outlier", version, about = "Outlier detection on pre-extracted feature matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a detector on inlier features and write a model directory
    Fit {
        train: PathBuf,
        /// Output model directory
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Score each row of a feature file, one score per line
    Score {
        model: PathBuf,
        features: PathBuf,
        /// Write scores here instead of stdout
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// AUROC of a fitted model on inlier vs outlier test features
    EvalOod {
        model: PathBuf,
        inliers: PathBuf,
        outliers: PathBuf,
        /// Also write the full report as JSON
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// One-vs-all evaluation over the classes of a labeled dataset
    Oneclass {
        /// Manifest of the labeled training split
        #[arg(long)]
        train: PathBuf,
        /// Manifest of the labeled test split
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Pairwise class-vs-class AUROC matrix
    Confusion {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn timing(label: &str, start: Instant) {
    println!("{TIMING_PREFIX} {label} {:.3}s", start.elapsed().as_secs_f64());
}

fn write_json(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn load_labeled(path: &Path) -> Result<(outlier_core::FeatureMatrix, Vec<usize>)> {
    let ds = load_manifest(path)?.load()?;
    let labels = ds
        .labels
        .ok_or_else(|| anyhow!("{}: manifest has no labels", path.display()))?;
    Ok((ds.features, labels))
}

fn fit(cfg: &RunConfig, train: &Path, out: &Path) -> Result<()> {
    let features = read_features(train)?;
    let start = Instant::now();
    let det = Detector::fit(&features, &cfg.detector_config())?;
    timing("fit", start);
    det.save(out)?;
    let (n, d) = (features.rows(), features.cols());
    match &det {
        Detector::Mahalanobis { model, clusters } => {
            let inertia = clusters.as_ref().map_or(0.0, |c| c.inertia);
            println!(
                "fit mahalanobis M={} cov={} inertia={inertia} lambda={} D={d} N={n}",
                model.components(),
                model.mode(),
                model.shrinkage()
            );
        }
        Detector::Kde(k) => println!("fit kde bandwidth={} D={d} N={n}", k.bandwidth()),
        Detector::Cosine(..) => println!("fit cosine D={d} N={n}"),
    }
    Ok(())
}

fn score(model: &Path, features: &Path, out: Option<&Path>) -> Result<()> {
    let det = Detector::load(model)?;
    let f = read_features(features)?;
    let scores = det.score_batch(&f)?;
    let mut text = String::with_capacity(scores.len() * 20);
    for s in &scores {
        text.push_str(&format!("{s}\n"));
    }
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::resolve(&cli.run)?;
    match cli.command {
        Command::Fit { train, out } => fit(&cfg, &train, &out),
        Command::Score { model, features, out } => score(&model, &features, out.as_deref()),
        Command::EvalOod {
            model,
            inliers,
            outliers,
            json,
        } => {
            let det = Detector::load(&model)?;
            let inl = read_features(&inliers)?;
            let out = read_features(&outliers)?;
            let start = Instant::now();
            let report = run_ood_eval(&det, &inl, &out, cfg.metadata())?;
            timing("eval-ood", start);
            println!("detector {}", report.detector);
            println!("{}", report.summary_line());
            if let Some(p) = json {
                write_json(&p, &report.to_json())?;
            }
            Ok(())
        }
        Command::Oneclass { train, test, json } => {
            let (trf, trl) = load_labeled(&train)?;
            let (tef, tel) = load_labeled(&test)?;
            let start = Instant::now();
            let report = one_vs_all_eval(
                Labeled::new(&trf, &trl)?,
                Labeled::new(&tef, &tel)?,
                &cfg.detector_config(),
                cfg.runs,
                cfg.seed,
                cfg.metadata(),
            )?;
            timing("oneclass", start);
            println!("detector {} runs={} seed={}", report.detector, cfg.runs, cfg.seed);
            print!("{}", report.to_table());
            if let Some(p) = json {
                write_json(&p, &report.to_json())?;
            }
            Ok(())
        }
        Command::Confusion { train, test, json } => {
            let (trf, trl) = load_labeled(&train)?;
            let (tef, tel) = load_labeled(&test)?;
            let start = Instant::now();
            let dets: Vec<Option<Detector>> =
                fit_per_class(Labeled::new(&trf, &trl)?, &cfg.detector_config())?
                    .into_iter()
                    .map(Some)
                    .collect();
            let report = confusion_matrix_eval(Labeled::new(&tef, &tel)?, &dets)?;
            timing("confusion", start);
            print!("{}", report.to_table());
            if let Some(p) = json {
                write_json(&p, &report.to_json())?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<InvalidConfig>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
