use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rca::contrastive::{estimate_a_from, extract_cumulants_from, ContrastiveOptions};
use rca::cumulant::{ComponentCumulants, SampleViews};
use rca::harness::io::{read_matrix, read_samples, read_text, write_matrix, write_samples};
use rca::harness::{generate, run, sweep, Arm, ExperimentConfig, RunReport, Setting, SweepConfig, SweepTable};
use rca::{RcaError, Result};

#[derive(Parser)]
#[command(name = "rca", version, about = "Separate shared and private components of paired views and fit models to them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; results go to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one dataset and write its views and hidden parts.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Estimate the map from the shared component into the second view.
    ExtractA {
        /// First view (matrix file).
        u: PathBuf,
        /// Second view (matrix file).
        v: PathBuf,
        /// Rank of the shared component's support, when known.
        #[arg(long)]
        shared_rank: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Extract the cumulants of all three components.
    ExtractCumulants {
        u: PathBuf,
        v: PathBuf,
        /// Use this map instead of estimating it.
        #[arg(long)]
        a: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        t_max: usize,
        #[arg(long)]
        shared_rank: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the arms of one setting and report their errors.
    Fit {
        setting: Setting,
        /// Comma separated subset of true,rca,naive,cca.
        #[arg(long)]
        arms: Option<String>,
        #[arg(long)]
        t_max: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a grid of sample sizes and perturbation ratios.
    Sweep {
        #[arg(long)]
        arms: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Render a saved JSON report or sweep table.
    Report {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Simulate { common } => simulate(&common),
        Command::ExtractA { u, v, shared_rank, common } => {
            let (u, v) = (read_samples(&u)?, read_samples(&v)?);
            let source = SampleViews::new(&[&u, &v])?;
            let opts = ContrastiveOptions {
                shared_rank,
                ..ContrastiveOptions::default()
            };
            let (a, report) = estimate_a_from(&source, &opts)?;
            match (&common.out, common.format) {
                (Some(dir), Format::Csv) => {
                    fs::create_dir_all(dir)?;
                    write_matrix(&dir.join("a_hat.csv"), &a)?;
                    write_json(&dir.join("conditioning.json"), &report)
                }
                (out, Format::Json) => emit(
                    out.as_deref(),
                    "a_hat.json",
                    &to_json(&serde_json::json!({ "a_hat": a, "conditioning": report }))?,
                ),
                (None, Format::Csv) => {
                    print!("{}", rca::harness::io::matrix_to_csv(&a));
                    Ok(())
                }
            }
        }
        Command::ExtractCumulants {
            u,
            v,
            a,
            t_max,
            shared_rank,
            common,
        } => {
            let (u, v) = (read_samples(&u)?, read_samples(&v)?);
            let source = SampleViews::new(&[&u, &v])?;
            let opts = ContrastiveOptions {
                shared_rank,
                ..ContrastiveOptions::default()
            };
            let ext = match a {
                Some(path) => extract_cumulants_from(&source, &read_matrix(&path)?, t_max, &opts)?,
                None => {
                    let (a_hat, report) = estimate_a_from(&source, &opts)?;
                    let mut ext = extract_cumulants_from(&source, &a_hat, t_max, &opts)?;
                    ext.diagnostics = report;
                    ext
                }
            };
            match (&common.out, common.format) {
                (Some(dir), Format::Csv) => {
                    fs::create_dir_all(dir)?;
                    write_matrix(&dir.join("a_hat.csv"), &ext.a_hat)?;
                    for (name, comp) in [("s1", &ext.s1), ("s2", &ext.s2), ("s3", &ext.s3)] {
                        write_component(dir, name, comp)?;
                    }
                    write_json(&dir.join("conditioning.json"), &ext.diagnostics)
                }
                (None, Format::Csv) => Err(RcaError::Config(
                    "csv output of cumulants needs --out; use --format json for stdout".into(),
                )),
                (out, Format::Json) => emit(out.as_deref(), "extraction.json", &to_json(&ext)?),
            }
        }
        Command::Fit {
            setting,
            arms,
            t_max,
            common,
        } => {
            let mut cfg = load_config(&common)?;
            cfg.setting = setting;
            if let Some(arms) = arms {
                cfg.arms = Arm::parse_list(&arms)?;
            }
            if t_max.is_some() {
                cfg.t_max = t_max;
            }
            cfg.validate()?;
            let report = run(&cfg)?;
            emit_report(&common, &report)
        }
        Command::Sweep { arms, common } => {
            let path = common
                .config
                .as_ref()
                .ok_or_else(|| RcaError::Config("sweep needs --config".into()))?;
            let mut grid = SweepConfig::from_json(&read_text(path)?)?;
            if let Some(seed) = common.seed {
                grid.base.seed = seed;
            }
            if let Some(arms) = arms {
                grid.base.arms = Arm::parse_list(&arms)?;
            }
            let table = sweep(&grid.expand())?;
            match common.format {
                Format::Csv => emit(common.out.as_deref(), "sweep.csv", &table.to_csv()),
                Format::Json => emit(common.out.as_deref(), "sweep.json", &to_json(&table)?),
            }
        }
        Command::Report { input, format } => {
            let text = read_text(&input)?;
            let table = match serde_json::from_str::<RunReport>(&text) {
                Ok(report) => SweepTable { reports: vec![report] },
                Err(_) => serde_json::from_str::<SweepTable>(&text)
                    .map_err(|e| RcaError::Config(format!("{}: not a report: {e}", input.display())))?,
            };
            match format {
                Format::Csv => print!("{}", table.to_csv()),
                Format::Json => println!("{}", to_json(&table)?),
            }
            Ok(())
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_json(&read_text(path)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn simulate(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let data = generate(&cfg, cfg.seed)?;
    let dir = common
        .out
        .as_ref()
        .ok_or_else(|| RcaError::Config("simulate needs --out".into()))?;
    fs::create_dir_all(dir)?;
    if common.format == Format::Json {
        return write_json(&dir.join("dataset.json"), &data);
    }
    if cfg.setting == Setting::General {
        for (i, view) in data.views.iter().enumerate() {
            write_samples(&dir.join(format!("u{}.csv", i + 1)), view)?;
        }
        for (j, comp) in data.components.iter().enumerate() {
            write_samples(&dir.join(format!("s{}.csv", j + 1)), comp)?;
        }
    } else {
        write_samples(&dir.join("u.csv"), data.u())?;
        write_samples(&dir.join("v.csv"), data.v())?;
        for (j, comp) in data.components.iter().enumerate() {
            write_samples(&dir.join(format!("s{}.csv", j + 1)), comp)?;
        }
    }
    if let Some(a) = &data.a {
        write_matrix(&dir.join("a.csv"), a)?;
    }
    if let Some(labels) = &data.labels {
        let column = rca::tensor::LinearMap::from_column_slice(labels.len(), 1, labels);
        write_matrix(&dir.join("labels.csv"), &column)?;
    }
    write_json(&dir.join("truth.json"), &data.truth)?;
    write_json(&dir.join("config.json"), &cfg)
}

/// Mean as a one-row matrix and every cumulant unfolded, one file each.
fn write_component(dir: &Path, name: &str, comp: &ComponentCumulants) -> Result<()> {
    let mean = rca::tensor::LinearMap::from_row_slice(1, comp.mean.len(), &comp.mean);
    write_matrix(&dir.join(format!("{name}_mean.csv")), &mean)?;
    for (order, tensor) in &comp.cumulants {
        write_matrix(&dir.join(format!("{name}_order{order}.csv")), &tensor.unfold()?)?;
    }
    Ok(())
}

fn emit_report(common: &Common, report: &RunReport) -> Result<()> {
    match common.format {
        Format::Csv => emit(common.out.as_deref(), "report.csv", &report.to_csv()),
        Format::Json => emit(common.out.as_deref(), "report.json", &to_json(report)?),
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json(value)?)?;
    Ok(())
}

/// Writes `text` to `dir/file`, or prints it when no directory is given.
fn emit(dir: Option<&Path>, file: &str, text: &str) -> Result<()> {
    match dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(file), text)?;
        }
        None => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
        }
    }
    Ok(())
}
