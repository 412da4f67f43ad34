//! The relaxed variable splitting iteration.
//!
//! Each step performs
//!
//! ```text
//! u ← prox_{τP}(w)
//! ŵ ← w − η·G(w) − ηβ(w − u)
//! w ← ŵ / ‖ŵ‖
//! ```
//!
//! where `G` is either the closed-form expected coarse gradient (population
//! mode) or its average over a training set (empirical mode), and `τ` is
//! `λ/β` or `λ` depending on [`ProxParameterization`].
//!
//! The objective tracked along a run is the augmented Lagrangian
//! `L(u, w) = f(w) + βτ·P(u) + (β/2)‖w − u‖²`. Its penalty weight `βτ` makes
//! the `u` update an exact minimizer of `L(·, w)` under either
//! parameterization; with `τ = λ/β` it is the familiar `λ·P(u)`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{check_dim, dist, dot, nnz, norm};
use crate::model::{self, Dataset};
use crate::penalties::{self, Penalty, ProxParam};
use crate::population::{self, ZERO_TOL};
use crate::{Error, Result};

/// How the penalty strength reaches the prox.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxParameterization {
    /// `τ = λ/β`, the exact minimizer of the Lagrangian with weight `λ`.
    LagrangianRatio,
    /// `τ = λ`.
    RawLambda,
}

/// Where the coarse gradient comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMode {
    /// Closed-form expectation over Gaussian inputs.
    Population,
    /// Average over `samples` Gaussian inputs. With `resample`, step `t` uses
    /// stream samples `t·m .. (t+1)·m` instead of a fixed set.
    Empirical { samples: usize, resample: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    /// Number of patches.
    pub k: usize,
    /// Patch (filter) dimension.
    pub d: usize,
    /// Learning rate η.
    pub eta: f64,
    /// Splitting weight β.
    pub beta: f64,
    /// Penalty strength λ.
    pub lambda: f64,
    /// Initial angle margin δ ∈ (0, π).
    pub delta: f64,
    pub penalty: Penalty,
    pub prox: ProxParameterization,
    pub mode: GradientMode,
    pub max_iters: u64,
    /// Stop once `‖w^{t+1} − w^t‖ ≤ η·step_tol`.
    pub step_tol: f64,
    pub seed: u64,
}

impl Default for HyperParams {
    /// `(k, d) = (20, 50)`, ℓ0, `λ = 1e-4`, `β = 1e-3`, `η = 1e-5`, `δ = 0.1`,
    /// raw-λ prox, population gradient, `step_tol = 1e-6`, `5·10⁵` iterations.
    fn default() -> Self {
        HyperParams {
            k: 20,
            d: 50,
            eta: 1e-5,
            beta: 1e-3,
            lambda: 1e-4,
            delta: 0.1,
            penalty: Penalty::L0,
            prox: ProxParameterization::RawLambda,
            mode: GradientMode::Population,
            max_iters: 500_000,
            step_tol: 1e-6,
            seed: 0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if self.k == 0 || self.d == 0 {
            return Err(Error::Domain("k and d must be positive"));
        }
        if !positive(self.eta) || !positive(self.beta) || !positive(self.lambda) {
            return Err(Error::Domain("eta, beta and lambda must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < PI) {
            return Err(Error::Domain("delta must lie in (0, pi)"));
        }
        if !positive(self.step_tol) || self.max_iters == 0 {
            return Err(Error::Domain("step_tol and max_iters must be positive"));
        }
        if let Penalty::Tl1 { a } = self.penalty {
            Penalty::tl1(a)?;
        }
        if let GradientMode::Empirical { samples: 0, .. } = self.mode {
            return Err(Error::Domain("empirical mode needs at least one sample"));
        }
        Ok(())
    }

    /// The prox strength `τ`.
    pub fn tau(&self) -> Result<ProxParam> {
        ProxParam::new(match self.prox {
            ProxParameterization::LagrangianRatio => self.lambda / self.beta,
            ProxParameterization::RawLambda => self.lambda,
        })
    }

    /// Weight `βτ` of `P(u)` in the tracked Lagrangian.
    pub fn penalty_weight(&self) -> Result<f64> {
        Ok(self.beta * self.tau()?.get())
    }

    /// Lipschitz constant `K = k/(2π)` of the expected coarse gradient on the sphere.
    pub fn coarse_lipschitz(&self) -> f64 {
        self.k as f64 / (2.0 * PI)
    }

    /// Descent constant `L = k/(4π)`.
    pub fn descent_constant(&self) -> f64 {
        self.k as f64 / (4.0 * PI)
    }
}

/// Solver state after `t` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct IterState {
    pub t: u64,
    /// Unit-norm student filter `w^t`.
    pub w: Vec<f64>,
    /// Split variable `u^t`.
    pub u: Vec<f64>,
    /// Normalization factor `1/‖ŵ^t‖` of the step that produced this state.
    pub c_t: f64,
    /// `η‖G(w^{t−1}) + β(w^{t−1} − u^t)‖` for that step.
    pub guard: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t: u64,
    /// `θ(w^t, w*)`.
    pub theta: f64,
    /// `θ(u^t, w^t)`; zero when `u^t = 0`.
    pub gamma: f64,
    pub gamma_defined: bool,
    pub lagrangian: f64,
    /// Population loss `f(w^t)`.
    pub floss: f64,
    pub u_sparsity: usize,
    /// `‖w^t − w^{t−1}‖`; zero at `t = 0`.
    pub step_norm: f64,
}

/// Static conditions on the initialization and hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreconditionReport {
    pub theta0: f64,
    /// (i) `θ(w⁰, w*) ≤ π − δ`.
    pub initial_angle: bool,
    /// (ii) `β ≤ k sin δ/(2π)`.
    pub beta_bound: bool,
    /// (ii) `λ < k/(2π√d)`.
    pub lambda_bound: bool,
    /// (iii) `η ≤ min{1/(β + L), 2π/k}`.
    pub eta_bound: bool,
    pub beta_max: f64,
    pub lambda_max: f64,
    pub eta_max: f64,
}

impl PreconditionReport {
    pub fn all_hold(&self) -> bool {
        self.initial_angle && self.beta_bound && self.lambda_bound && self.eta_bound
    }

    fn first_failure(&self) -> Option<&'static str> {
        if !self.initial_angle {
            Some("initial angle exceeds pi - delta")
        } else if !self.beta_bound {
            Some("beta exceeds k sin(delta) / (2 pi)")
        } else if !self.lambda_bound {
            Some("lambda not below k / (2 pi sqrt d)")
        } else if !self.eta_bound {
            Some("eta exceeds min(1/(beta + L), 2 pi / k)")
        } else {
            None
        }
    }
}

/// Checks conditions (i)–(iii). Condition (iv), the per-step guard
/// `η‖G + β(w − u)‖ ≤ ½`, is monitored by [`Solver::run`].
pub fn check_preconditions(hp: &HyperParams, w0: &[f64], wstar: &[f64]) -> PreconditionReport {
    let k = hp.k as f64;
    let theta0 = population::angle(w0, wstar).unwrap_or(f64::NAN);
    let beta_max = k * libm::sin(hp.delta) / (2.0 * PI);
    let lambda_max = k / (2.0 * PI * libm::sqrt(hp.d as f64));
    let eta_max = f64::min(1.0 / (hp.beta + hp.descent_constant()), 2.0 * PI / k);
    PreconditionReport {
        theta0,
        initial_angle: theta0 <= PI - hp.delta,
        beta_bound: hp.beta <= beta_max,
        lambda_bound: hp.lambda < lambda_max,
        eta_bound: hp.eta <= eta_max,
        beta_max,
        lambda_max,
        eta_max,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreconditionPolicy {
    /// Refuse to start when a static precondition fails.
    Enforce,
    /// Run anyway; the report travels with the output.
    Warn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    StepTol,
    MaxIters,
}

/// Per-step monitoring accumulated over a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunChecks {
    /// Largest `θ^{t+1} − θ^t` seen (negative when strictly decreasing).
    pub max_theta_increase: f64,
    /// Largest `L(u^{t+1}, w^{t+1}) − L(u^t, w^t)`.
    pub max_lagrangian_increase: f64,
    /// Largest `L(u^{t+1}, w^t) − L(u^t, w^t)`.
    pub max_half_update_increase: f64,
    /// First step whose angle rose by more than [`RunChecks::FLAG_TOL`].
    pub first_theta_violation: Option<u64>,
    pub first_lagrangian_violation: Option<u64>,
    /// First step with `η‖G + β(w − u)‖ > ½`.
    pub first_guard_violation: Option<u64>,
    pub max_guard: f64,
    pub c_min: f64,
    pub c_max: f64,
}

impl RunChecks {
    pub const FLAG_TOL: f64 = 1e-9;

    fn new() -> Self {
        RunChecks {
            max_theta_increase: f64::NEG_INFINITY,
            max_lagrangian_increase: f64::NEG_INFINITY,
            max_half_update_increase: f64::NEG_INFINITY,
            first_theta_violation: None,
            first_lagrangian_violation: None,
            first_guard_violation: None,
            max_guard: 0.0,
            c_min: f64::INFINITY,
            c_max: f64::NEG_INFINITY,
        }
    }
}

/// Residuals of the stationarity relations at the final iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitDiagnostics {
    pub theta_bar: f64,
    pub gamma_bar: f64,
    pub gamma_defined: bool,
    /// `‖(I − w̄w̄ᵀ)v‖` with `v = w* − (2π/k)β(w̄ − ū)`.
    pub collinearity_residual: f64,
    /// `⟨v, w̄⟩`, the constant `C` in `v = C·w̄`.
    pub c_estimate: f64,
    /// `k/(k − 2πλ√d)`, or infinity when the denominator is not positive.
    pub c_upper: f64,
    /// `|(k/2π) sin θ̄ − β‖ū‖ sin γ̄|`.
    pub sine_residual: f64,
    /// `‖w* − w̄‖`.
    pub w_error: f64,
    /// `½ sin δ sin γ̄`.
    pub w_error_bound: f64,
    /// `‖w* − ū‖`.
    pub u_error: f64,
    /// `½ sin δ sin γ̄ + (λ/β)√d`.
    pub u_error_bound: f64,
}

impl LimitDiagnostics {
    pub fn c_in_range(&self) -> bool {
        self.c_estimate > 0.0 && self.c_estimate <= self.c_upper
    }

    pub fn w_bound_holds(&self) -> bool {
        self.w_error <= self.w_error_bound
    }

    pub fn u_bound_holds(&self) -> bool {
        self.u_error <= self.u_error_bound
    }
}

pub fn limit_diagnostics(
    state: &IterState,
    hp: &HyperParams,
    wstar: &[f64],
) -> Result<LimitDiagnostics> {
    check_dim(hp.d, wstar.len())?;
    let (w, u) = (&state.w, &state.u);
    let angles = population::angles(w, wstar, u)?;
    let k = hp.k as f64;
    let pull = 2.0 * PI / k * hp.beta;
    let v: Vec<f64> = (0..hp.d).map(|i| wstar[i] - pull * (w[i] - u[i])).collect();
    let nw2 = dot(w, w);
    let c = dot(&v, w) / nw2;
    let collinearity: Vec<f64> = v.iter().zip(w).map(|(vi, wi)| vi - c * wi).collect();
    let denom = k - 2.0 * PI * hp.lambda * libm::sqrt(hp.d as f64);
    let sin_gamma = libm::sin(angles.gamma);
    let common = 0.5 * libm::sin(hp.delta) * sin_gamma;
    Ok(LimitDiagnostics {
        theta_bar: angles.theta,
        gamma_bar: angles.gamma,
        gamma_defined: !angles.degenerate,
        collinearity_residual: norm(&collinearity),
        c_estimate: c,
        c_upper: if denom > 0.0 {
            k / denom
        } else {
            f64::INFINITY
        },
        sine_residual: libm::fabs(
            k / (2.0 * PI) * libm::sin(angles.theta) - hp.beta * norm(u) * sin_gamma,
        ),
        w_error: dist(wstar, w),
        w_error_bound: common,
        u_error: dist(wstar, u),
        u_error_bound: common + hp.lambda / hp.beta * libm::sqrt(hp.d as f64),
    })
}

/// Everything produced by [`Solver::run`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Vec<TraceRecord>,
    pub state: IterState,
    pub diagnostics: LimitDiagnostics,
    pub preconditions: PreconditionReport,
    pub checks: RunChecks,
    pub termination: Termination,
}

/// Whether iteration `t` is kept in the trace: every step up to 1000, then
/// every 100th. The last iteration is always kept.
pub fn is_recorded(t: u64) -> bool {
    t <= 1000 || t.is_multiple_of(100)
}

/// Generator for the initial filter of a run with the given seed. Uses the
/// last ChaCha stream so it never overlaps dataset samples.
pub fn init_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    rng
}

/// Random unit filter with `θ(w⁰, w*) ≤ π − δ`, resampled until admissible.
pub fn initial_weights<R: Rng + ?Sized>(
    wstar: &[f64],
    delta: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    const MAX_ATTEMPTS: u32 = 10_000;
    for _ in 0..MAX_ATTEMPTS {
        let mut w: Vec<f64> = (0..wstar.len())
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let n = norm(&w);
        if n <= ZERO_TOL {
            continue;
        }
        w.iter_mut().for_each(|x| *x /= n);
        if population::angle(&w, wstar)? <= PI - delta {
            return Ok(w);
        }
    }
    Err(Error::InitializationFailed {
        attempts: MAX_ATTEMPTS,
    })
}

enum Source {
    Population,
    Empirical { data: Dataset, resample: bool },
}

/// Runs the splitting iteration for one teacher.
pub struct Solver {
    hp: HyperParams,
    wstar: Vec<f64>,
    tau: ProxParam,
    penalty_weight: f64,
    source: Source,
}

impl Solver {
    pub fn new(hp: HyperParams, wstar: &[f64]) -> Result<Self> {
        hp.validate()?;
        check_dim(hp.d, wstar.len())?;
        if (norm(wstar) - 1.0).abs() > 1e-9 {
            return Err(Error::Domain("teacher must have unit norm"));
        }
        let source = match hp.mode {
            GradientMode::Population => Source::Population,
            GradientMode::Empirical { samples, resample } => Source::Empirical {
                data: Dataset::generate(hp.k, hp.d, samples, hp.seed, 0)?,
                resample,
            },
        };
        Ok(Solver {
            tau: hp.tau()?,
            penalty_weight: hp.penalty_weight()?,
            wstar: wstar.to_vec(),
            hp,
            source,
        })
    }

    /// Empirical-mode solver on a caller-supplied training set.
    pub fn with_dataset(hp: HyperParams, wstar: &[f64], data: Dataset) -> Result<Self> {
        let mut solver = Solver::new(
            HyperParams {
                mode: GradientMode::Population,
                ..hp.clone()
            },
            wstar,
        )?;
        if data.is_empty() || data.k() != hp.k || data.d() != hp.d {
            return Err(Error::Domain(
                "dataset shape does not match hyperparameters",
            ));
        }
        let resample = matches!(hp.mode, GradientMode::Empirical { resample: true, .. });
        solver.hp.mode = GradientMode::Empirical {
            samples: data.len(),
            resample,
        };
        solver.source = Source::Empirical { data, resample };
        Ok(solver)
    }

    pub fn hyperparams(&self) -> &HyperParams {
        &self.hp
    }

    pub fn teacher(&self) -> &[f64] {
        &self.wstar
    }

    pub fn tau(&self) -> ProxParam {
        self.tau
    }

    /// `u = prox_{τP}(w)`.
    pub fn split(&self, w: &[f64]) -> Vec<f64> {
        penalties::prox_vector(&self.hp.penalty, self.tau, w)
    }

    /// Coarse gradient used by the `w` update.
    pub fn coarse_grad(&self, w: &[f64]) -> Result<Vec<f64>> {
        match &self.source {
            Source::Population => population::expected_coarse_grad(w, &self.wstar, self.hp.k),
            Source::Empirical { data, .. } => {
                model::empirical_coarse_grad(w, &self.wstar, data.samples())
            }
        }
    }

    /// Loss term of the Lagrangian: `f(w)` or the empirical risk.
    pub fn risk(&self, w: &[f64]) -> Result<f64> {
        match &self.source {
            Source::Population => population::population_loss(w, &self.wstar, self.hp.k),
            Source::Empirical { data, .. } => model::empirical_risk(w, &self.wstar, data.samples()),
        }
    }

    /// `βτ·P(u) + (β/2)‖w − u‖²`.
    fn split_terms(&self, u: &[f64], w: &[f64]) -> Result<f64> {
        let p = penalties::penalty_value(&self.hp.penalty, u)?;
        let gap = dist(w, u);
        Ok(self.penalty_weight * p + 0.5 * self.hp.beta * gap * gap)
    }

    /// `L(u, w) = risk(w) + βτ·P(u) + (β/2)‖w − u‖²`.
    pub fn lagrangian(&self, u: &[f64], w: &[f64]) -> Result<f64> {
        check_dim(self.hp.d, u.len())?;
        check_dim(self.hp.d, w.len())?;
        Ok(self.risk(w)? + self.split_terms(u, w)?)
    }

    /// State at `t = 0`: `w⁰` normalized, `u⁰ = prox(w⁰)`.
    pub fn init_state(&self, w0: &[f64]) -> Result<IterState> {
        check_dim(self.hp.d, w0.len())?;
        let n = norm(w0);
        if n.is_nan() || n <= ZERO_TOL || !crate::linalg::is_finite(w0) {
            return Err(Error::Domain("initial filter must be finite and nonzero"));
        }
        let w: Vec<f64> = w0.iter().map(|x| x / n).collect();
        let u = self.split(&w);
        Ok(IterState {
            t: 0,
            w,
            u,
            c_t: 1.0,
            guard: 0.0,
        })
    }

    fn refresh_samples(&mut self, t: u64) -> Result<()> {
        if let Source::Empirical {
            data,
            resample: true,
        } = &mut self.source
        {
            let m = data.len();
            let offset = t * m as u64;
            if data.offset() != offset {
                *data = Dataset::generate(self.hp.k, self.hp.d, m, self.hp.seed, offset)?;
            }
        }
        Ok(())
    }

    /// One iteration from `s`.
    pub fn step(&mut self, s: &IterState) -> Result<IterState> {
        check_dim(self.hp.d, s.w.len())?;
        self.refresh_samples(s.t)?;
        let (eta, beta) = (self.hp.eta, self.hp.beta);
        let u = self.split(&s.w);
        let g = self.coarse_grad(&s.w)?;
        let mut direction = Vec::with_capacity(self.hp.d);
        for i in 0..self.hp.d {
            direction.push(g[i] + beta * (s.w[i] - u[i]));
        }
        let w_hat: Vec<f64> =
            s.w.iter()
                .zip(&direction)
                .map(|(w, p)| w - eta * p)
                .collect();
        let n = norm(&w_hat);
        if n.is_nan() || n <= ZERO_TOL {
            return Err(Error::NormalizationFailure {
                iteration: s.t + 1,
                norm: n,
            });
        }
        Ok(IterState {
            t: s.t + 1,
            w: w_hat.iter().map(|x| x / n).collect(),
            u,
            c_t: 1.0 / n,
            guard: eta * norm(&direction),
        })
    }

    fn record(&self, s: &IterState, lagrangian: f64, step_norm: f64) -> Result<TraceRecord> {
        let a = population::angles(&s.w, &self.wstar, &s.u)?;
        Ok(TraceRecord {
            t: s.t,
            theta: a.theta,
            gamma: a.gamma,
            gamma_defined: !a.degenerate,
            lagrangian,
            floss: population::loss_from_angle(a.theta, self.hp.k),
            u_sparsity: nnz(&s.u),
            step_norm,
        })
    }

    /// Iterates from `w0` until the step norm drops to `η·step_tol` or the
    /// iteration budget runs out.
    pub fn run(&mut self, w0: &[f64], policy: PreconditionPolicy) -> Result<RunOutput> {
        self.run_with(w0, policy, |_| {})
    }

    /// As [`Solver::run`], also handing every recorded trace row to `sink`.
    pub fn run_with(
        &mut self,
        w0: &[f64],
        policy: PreconditionPolicy,
        mut sink: impl FnMut(&TraceRecord),
    ) -> Result<RunOutput> {
        let preconditions = check_preconditions(&self.hp, w0, &self.wstar);
        if policy == PreconditionPolicy::Enforce {
            if let Some(which) = preconditions.first_failure() {
                return Err(Error::PreconditionViolated(which));
            }
        }
        let mut state = self.init_state(w0)?;
        let mut risk = self.risk(&state.w)?;
        let mut lag = risk + self.split_terms(&state.u, &state.w)?;
        let mut theta = population::angle(&state.w, &self.wstar)?;
        let mut trace = Vec::new();
        let first = self.record(&state, lag, 0.0)?;
        sink(&first);
        trace.push(first);

        let mut checks = RunChecks::new();
        let stop_at = self.hp.eta * self.hp.step_tol;
        let mut termination = Termination::MaxIters;
        while state.t < self.hp.max_iters {
            let next = self.step(&state)?;
            let t = next.t;

            // Half update: only u has moved.
            let half = risk + self.split_terms(&next.u, &state.w)?;
            checks.max_half_update_increase = checks.max_half_update_increase.max(half - lag);

            let next_risk = self.risk(&next.w)?;
            let next_lag = next_risk + self.split_terms(&next.u, &next.w)?;
            let next_theta = population::angle(&next.w, &self.wstar)?;
            let step_norm = dist(&next.w, &state.w);

            let d_theta = next_theta - theta;
            let d_lag = next_lag - lag;
            checks.max_theta_increase = checks.max_theta_increase.max(d_theta);
            checks.max_lagrangian_increase = checks.max_lagrangian_increase.max(d_lag);
            if d_theta > RunChecks::FLAG_TOL && checks.first_theta_violation.is_none() {
                checks.first_theta_violation = Some(t);
            }
            if d_lag > RunChecks::FLAG_TOL && checks.first_lagrangian_violation.is_none() {
                checks.first_lagrangian_violation = Some(t);
            }
            if next.guard > 0.5 && checks.first_guard_violation.is_none() {
                checks.first_guard_violation = Some(t);
            }
            checks.max_guard = checks.max_guard.max(next.guard);
            checks.c_min = checks.c_min.min(next.c_t);
            checks.c_max = checks.c_max.max(next.c_t);

            let converged = step_norm <= stop_at;
            let last = converged || t >= self.hp.max_iters;
            if is_recorded(t) || last {
                let rec = self.record(&next, next_lag, step_norm)?;
                sink(&rec);
                trace.push(rec);
            }
            state = next;
            risk = next_risk;
            lag = next_lag;
            theta = next_theta;
            if converged {
                termination = Termination::StepTol;
                break;
            }
        }
        let diagnostics = limit_diagnostics(&state, &self.hp, &self.wstar)?;
        Ok(RunOutput {
            trace,
            state,
            diagnostics,
            preconditions,
            checks,
            termination,
        })
    }
}
