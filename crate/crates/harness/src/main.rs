use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rvscgd::dataset_io::{read_header, write_dataset};
use rvscgd::{run_experiment, ExperimentConfig, HarnessError, Manifest};
use rvscgd_core::Dataset;

#[derive(Parser)]
#[command(
    name = "rvscgd",
    version,
    about = "Relaxed variable splitting coarse gradient descent experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sparsity sweep and write traces, tables and plots.
    Run(Box<RunArgs>),
    /// Write a sampled Gaussian dataset to a binary file.
    DatasetExport {
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long, default_value_t = 50)]
        d: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        offset: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the header of a dataset file.
    DatasetInspect { path: PathBuf },
}

/// Flags override the config file, which overrides the built-in sweep.
#[derive(Parser)]
struct RunArgs {
    /// `key = value` file using the long flag names as keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    /// Comma-separated sparsity levels.
    #[arg(long)]
    s_list: Option<String>,
    /// l1, l0 or tl1.
    #[arg(long)]
    penalty: Option<String>,
    #[arg(long)]
    tl1_a: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// ratio (prox parameter λ/β) or raw (prox parameter λ).
    #[arg(long)]
    prox_param: Option<String>,
    /// population or empirical.
    #[arg(long)]
    mode: Option<String>,
    /// Training set size in empirical mode.
    #[arg(long)]
    samples: Option<usize>,
    /// Draw fresh samples every step in empirical mode.
    #[arg(long)]
    resample: bool,
    /// Comma-separated seeds.
    #[arg(long)]
    seed_list: Option<String>,
    #[arg(long)]
    max_iters: Option<u64>,
    /// Stop once the step norm is at most eta times this.
    #[arg(long)]
    step_tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    emit_plot: Option<bool>,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let pairs: [(&str, Option<String>); 17] = [
            ("k", self.k.map(|v| v.to_string())),
            ("d", self.d.map(|v| v.to_string())),
            ("s-list", self.s_list.clone()),
            ("penalty", self.penalty.clone()),
            ("tl1-a", self.tl1_a.map(|v| v.to_string())),
            ("lambda", self.lambda.map(|v| v.to_string())),
            ("beta", self.beta.map(|v| v.to_string())),
            ("eta", self.eta.map(|v| v.to_string())),
            ("delta", self.delta.map(|v| v.to_string())),
            ("prox-param", self.prox_param.clone()),
            ("mode", self.mode.clone()),
            ("samples", self.samples.map(|v| v.to_string())),
            ("resample", self.resample.then(|| "true".to_string())),
            ("seed-list", self.seed_list.clone()),
            ("max-iters", self.max_iters.map(|v| v.to_string())),
            ("step-tol", self.step_tol.map(|v| v.to_string())),
            ("emit-plot", self.emit_plot.map(|v| v.to_string())),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn fail(err: &HarnessError) -> ExitCode {
    let manifest = Manifest {
        status: "error",
        error: Some(err.to_string()),
        ..Manifest::default()
    };
    eprintln!(
        "{}",
        serde_json::to_string_pretty(&manifest).unwrap_or_else(|_| err.to_string())
    );
    ExitCode::FAILURE
}

fn run(args: RunArgs) -> ExitCode {
    let cfg = match args.config() {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let manifest = run_experiment(&cfg);
    if manifest.succeeded() {
        if let Ok(table) = std::fs::read_to_string(cfg.output_dir.join("summary.csv")) {
            print!("{table}");
        }
        for w in &manifest.warnings {
            eprintln!("warning: {w}");
        }
        ExitCode::SUCCESS
    } else {
        eprintln!(
            "{}",
            serde_json::to_string_pretty(&manifest).unwrap_or_default()
        );
        ExitCode::FAILURE
    }
}

fn export(
    k: usize,
    d: usize,
    m: usize,
    seed: u64,
    offset: u64,
    out: PathBuf,
) -> Result<(), HarnessError> {
    let data = Dataset::generate(k, d, m, seed, offset)?;
    let file = File::create(&out).map_err(|e| HarnessError::io(&out, e))?;
    write_dataset(BufWriter::new(file), &data)
}

fn inspect(path: PathBuf) -> Result<(), HarnessError> {
    let file = File::open(&path).map_err(|e| HarnessError::io(&path, e))?;
    let h = read_header(&mut BufReader::new(file))?;
    println!(
        "k={} d={} m={} seed={} offset={}",
        h.k, h.d, h.m, h.seed, h.offset
    );
    Ok(())
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Run(args) => return run(*args),
        Command::DatasetExport {
            k,
            d,
            m,
            seed,
            offset,
            out,
        } => export(k, d, m, seed, offset, out),
        Command::DatasetInspect { path } => inspect(path),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
