//! `ccs` command line tool.
//!
//! Subcommands: `augment`, `ccs`, `metrics`, `compare`, `simulate`.
//! Any configuration key can be overridden on the command line with a flag
//! of the same dotted name, e.g. `--ccs.beta 0.4` or `--congruence.tau=0.2`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ccs_core::error::CcsError;
use ccs_core::formats::{DetectionFile, GroundTruthFile, RunConfig};
use ccs_core::pipeline::{
    ccs_table_csv, metrics_table_csv, run_augment, run_ccs, run_compare, run_metrics,
    run_simulate, SimulateParams,
};
use ccs_core::synthetic::{DetectorProfile, SceneSpec};

#[derive(Parser)]
#[command(name = "ccs", version, about = "Label-free detector evaluation via augmentation consensus")]
struct Cli {
    /// Flat key=value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for augmentation sampling and simulation
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads for per-image evaluation (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Directory for generated files
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Produce the nine augmented variants of every image in a directory
    Augment {
        /// Directory of input images
        input_dir: PathBuf,
    },
    /// Per-image consensus score table from an augmented detection file
    Ccs {
        /// ND-JSON detection file covering augmentations 0..M-1
        detections: PathBuf,
    },
    /// Per-image F1 / pPDQ / OC-cost table from baseline detections
    Metrics {
        /// ND-JSON detection file; augmentation index -1 records are used
        detections: PathBuf,
        /// ND-JSON ground truth file
        ground_truth: PathBuf,
    },
    /// Congruence analysis between two detectors on a shared image set
    Compare {
        detections1: PathBuf,
        detections2: PathBuf,
        ground_truth: PathBuf,
    },
    /// Synthetic two-detector experiment with known ground truth
    Simulate {
        /// Number of generated scenes
        #[arg(long, default_value_t = 100)]
        n_images: usize,
        /// Run every seed in the configured list instead of --seed only
        #[arg(long)]
        sweep: bool,
        /// Use the same detector profile on both sides
        #[arg(long)]
        identical_profiles: bool,
        /// Write the generated detections and ground truth as ND-JSON
        #[arg(long)]
        dump_fixtures: bool,
    },
}

type Overrides = Vec<(String, String)>;

/// Pull dotted-key overrides (`--ccs.beta 0.4`, `--metrics.lambda=0.8`)
/// out of argv before clap sees it.
fn split_overrides(argv: Vec<String>) -> Result<(Vec<String>, Overrides), CcsError> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = argv.into_iter().peekable();
    while let Some(arg) = it.next() {
        let key = arg.strip_prefix("--").unwrap_or("");
        if key.contains('.') || key.starts_with("seeds=") || key == "seeds" {
            if let Some((k, v)) = key.split_once('=') {
                overrides.push((k.to_string(), v.to_string()));
            } else {
                let v = it.next().ok_or_else(|| {
                    CcsError::InvalidConfig(format!("flag --{key} requires a value"))
                })?;
                overrides.push((key.to_string(), v));
            }
        } else {
            rest.push(arg);
        }
    }
    Ok((rest, overrides))
}

fn load_config(cli: &Cli, overrides: &[(String, String)]) -> Result<RunConfig, CcsError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for (k, v) in overrides {
        cfg.apply(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli, overrides: Vec<(String, String)>) -> Result<ExitCode, CcsError> {
    let cfg = load_config(&cli, &overrides)?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CcsError::InvalidConfig(format!("threads: {e}")))?;
    }

    match cli.command {
        Command::Augment { input_dir } => {
            let summary = run_augment(&input_dir, &cli.out_dir, cli.seed)?;
            println!(
                "augmented {} image(s), wrote {} file(s)",
                summary.images, summary.outputs
            );
            for (path, err) in &summary.failures {
                eprintln!("error: {}: {err}", path.display());
            }
            if !summary.failures.is_empty() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Ccs { detections } => {
            let file = DetectionFile::read(&detections)?;
            let rows = run_ccs(&file, &cfg)?;
            let csv = ccs_table_csv(&rows);
            std::fs::create_dir_all(&cli.out_dir)?;
            std::fs::write(cli.out_dir.join("ccs.csv"), &csv)?;
            print!("{csv}");
        }
        Command::Metrics {
            detections,
            ground_truth,
        } => {
            let file = DetectionFile::read(&detections)?;
            let gt = GroundTruthFile::read(&ground_truth)?;
            let rows = run_metrics(&file, &gt, &cfg)?;
            let csv = metrics_table_csv(&rows);
            std::fs::create_dir_all(&cli.out_dir)?;
            std::fs::write(cli.out_dir.join("metrics.csv"), &csv)?;
            print!("{csv}");
        }
        Command::Compare {
            detections1,
            detections2,
            ground_truth,
        } => {
            let det1 = DetectionFile::read(&detections1)?;
            let det2 = DetectionFile::read(&detections2)?;
            let gt = GroundTruthFile::read(&ground_truth)?;
            let output = run_compare(&det1, &det2, &gt, &cfg, &cli.out_dir)?;
            for (metric, report) in &output.reports {
                println!(
                    "{}: considered {} (green {}, blue {}, red {}, yellow {}), congruence {}, rho {}",
                    metric.name(),
                    report.considered,
                    report.green,
                    report.blue,
                    report.red,
                    report.yellow,
                    report
                        .congruence_pct
                        .map(|v| format!("{v:.2}%"))
                        .unwrap_or_else(|| "n/a".into()),
                    report
                        .spearman_rho
                        .map(|v| format!("{v:.4}"))
                        .unwrap_or_else(|| "n/a".into()),
                );
            }
        }
        Command::Simulate {
            n_images,
            sweep,
            identical_profiles,
            dump_fixtures,
        } => {
            let mut cfg = cfg;
            if !sweep {
                cfg.seeds = vec![cli.seed];
            }
            let profile_a = DetectorProfile::strong();
            let profile_b = if identical_profiles {
                DetectorProfile::strong()
            } else {
                DetectorProfile::weak()
            };
            let params = SimulateParams {
                n_images,
                scene: SceneSpec::default(),
                profile_a,
                profile_b,
                dump_fixtures,
            };
            let summary = run_simulate(&params, &cfg, &cli.out_dir)?;
            for (metric, mean) in &summary.rho_mean {
                println!(
                    "{}: rho mean {:.4}, std {:.4} over {} seed(s)",
                    metric.name(),
                    mean,
                    summary.rho_std[metric],
                    summary.seeds.len()
                );
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn exit_code(err: &CcsError) -> ExitCode {
    match err {
        CcsError::InvalidConfig(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let (rest, overrides) = match split_overrides(argv) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(rest);
    match run(cli, overrides) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
