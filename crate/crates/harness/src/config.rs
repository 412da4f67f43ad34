//! Experiment configuration: defaults, `key = value` files and validation.
//!
//! File keys match the long CLI flags (`k`, `d`, `s-list`, `penalty`, `tl1-a`,
//! `lambda`, `beta`, `eta`, `delta`, `prox-param`, `mode`, `samples`,
//! `resample`, `seed-list`, `max-iters`, `step-tol`, `out`, `emit-plot`).
//! Blank lines and `#` comments are ignored.

use std::path::{Path, PathBuf};

use rvscgd_core::{GradientMode, HyperParams, Penalty, ProxParameterization};
use serde::Serialize;

use crate::HarnessError;

/// Stopping tolerance of the sparsity sweep preset, in units of `η`.
///
/// The sweep reports the state once the step norm falls to `0.1·η`, well
/// before the limit point is reached.
pub const SWEEP_STEP_TOL: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    L1,
    L0,
    Tl1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProxKind {
    Ratio,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    Population,
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub k: usize,
    pub d: usize,
    pub sparsity_levels: Vec<usize>,
    pub penalty: PenaltyKind,
    pub tl1_a: f64,
    pub lambda: f64,
    pub beta: f64,
    pub eta: f64,
    pub delta: f64,
    pub prox: ProxKind,
    pub mode: ModeKind,
    pub samples: usize,
    pub resample: bool,
    pub seeds: Vec<u64>,
    pub max_iters: u64,
    pub step_tol: f64,
    /// Left out of serialized summaries so that they do not depend on where they are written.
    #[serde(skip)]
    pub output_dir: PathBuf,
    pub emit_plot: bool,
}

impl Default for ExperimentConfig {
    /// The sparsity sweep: `(k, d) = (20, 50)`, ℓ0, `λ = 1e-4`, `β = 1e-3`,
    /// `η = 1e-5`, `δ = 0.1`, raw-λ prox, `s ∈ {2, 4, 6, 8, 10}`, seeds 1–5.
    fn default() -> Self {
        let hp = HyperParams::default();
        ExperimentConfig {
            k: hp.k,
            d: hp.d,
            sparsity_levels: vec![2, 4, 6, 8, 10],
            penalty: PenaltyKind::L0,
            tl1_a: 1.0,
            lambda: hp.lambda,
            beta: hp.beta,
            eta: hp.eta,
            delta: hp.delta,
            prox: ProxKind::Raw,
            mode: ModeKind::Population,
            samples: 1000,
            resample: false,
            seeds: (1..=5).collect(),
            max_iters: hp.max_iters,
            step_tol: SWEEP_STEP_TOL,
            output_dir: PathBuf::from("results"),
            emit_plot: true,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, HarnessError> {
    value
        .trim()
        .parse()
        .map_err(|_| HarnessError::Config(format!("cannot parse {key} = {value:?}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, HarnessError> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool, HarnessError> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(HarnessError::Config(format!(
            "cannot parse {key} = {value:?} as a boolean"
        ))),
    }
}

impl ExperimentConfig {
    /// Sets one field by its file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        match key {
            "k" => self.k = parse(key, value)?,
            "d" => self.d = parse(key, value)?,
            "s-list" => self.sparsity_levels = parse_list(key, value)?,
            "penalty" => {
                self.penalty = match value.trim() {
                    "l1" => PenaltyKind::L1,
                    "l0" => PenaltyKind::L0,
                    "tl1" => PenaltyKind::Tl1,
                    v => return Err(HarnessError::Config(format!("unknown penalty {v:?}"))),
                }
            }
            "tl1-a" => self.tl1_a = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "eta" => self.eta = parse(key, value)?,
            "delta" => self.delta = parse(key, value)?,
            "prox-param" => {
                self.prox = match value.trim() {
                    "ratio" => ProxKind::Ratio,
                    "raw" => ProxKind::Raw,
                    v => return Err(HarnessError::Config(format!("unknown prox-param {v:?}"))),
                }
            }
            "mode" => {
                self.mode = match value.trim() {
                    "population" => ModeKind::Population,
                    "empirical" => ModeKind::Empirical,
                    v => return Err(HarnessError::Config(format!("unknown mode {v:?}"))),
                }
            }
            "samples" => self.samples = parse(key, value)?,
            "resample" => self.resample = parse_bool(key, value)?,
            "seed-list" => self.seeds = parse_list(key, value)?,
            "max-iters" => self.max_iters = parse(key, value)?,
            "step-tol" => self.step_tol = parse(key, value)?,
            "out" => self.output_dir = PathBuf::from(value.trim()),
            "emit-plot" => self.emit_plot = parse_bool(key, value)?,
            _ => return Err(HarnessError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), HarnessError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                HarnessError::Config(format!("line {}: expected key = value", n + 1))
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        self.apply_text(&text)
    }

    pub fn penalty(&self) -> Result<Penalty, HarnessError> {
        Ok(match self.penalty {
            PenaltyKind::L1 => Penalty::L1,
            PenaltyKind::L0 => Penalty::L0,
            PenaltyKind::Tl1 => Penalty::tl1(self.tl1_a)?,
        })
    }

    /// Solver hyperparameters for one seed.
    pub fn hyperparams(&self, seed: u64) -> Result<HyperParams, HarnessError> {
        Ok(HyperParams {
            k: self.k,
            d: self.d,
            eta: self.eta,
            beta: self.beta,
            lambda: self.lambda,
            delta: self.delta,
            penalty: self.penalty()?,
            prox: match self.prox {
                ProxKind::Ratio => ProxParameterization::LagrangianRatio,
                ProxKind::Raw => ProxParameterization::RawLambda,
            },
            mode: match self.mode {
                ModeKind::Population => GradientMode::Population,
                ModeKind::Empirical => GradientMode::Empirical {
                    samples: self.samples,
                    resample: self.resample,
                },
            },
            max_iters: self.max_iters,
            step_tol: self.step_tol,
            seed,
        })
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.sparsity_levels.is_empty() {
            return Err(HarnessError::Config("s-list is empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("seed-list is empty".into()));
        }
        if let Some(s) = self.sparsity_levels.iter().find(|&&s| s == 0 || s > self.d) {
            return Err(HarnessError::Config(format!(
                "sparsity {s} must lie in 1..={}",
                self.d
            )));
        }
        self.hyperparams(0)?.validate()?;
        Ok(())
    }
}
