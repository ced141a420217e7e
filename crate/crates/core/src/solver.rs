//! The three proximal solvers for the robust sPOD objective.
//!
//! All methods minimize, in one form or another,
//!
//! ```text
//! 1/2 ||Q - sum_k T^k(Q^k) - E||_F^2
//!     + sum_k lambda_k ||Q^k||_* + lambda_{K+1} ||E||_1
//! ```
//!
//! JFB takes one joint forward-backward step on all blocks per iteration,
//! BFB cycles through the blocks (PALM), and ALM performs the same cyclic
//! sweep on the augmented Lagrangian followed by dual ascent.

use std::time::Instant;

use ndarray::{Array2, ArrayView2};

use crate::error::{Result, SpodError};
use crate::grid::{SnapshotMatrix, TransportOperator};
use crate::prox::{self, SingularSpectrum};

/// Solver selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Joint forward-backward (all blocks updated from the same residual).
    Jfb,
    /// Block-coordinate forward-backward, cyclic over blocks (PALM).
    Bfb,
    /// Augmented Lagrangian method with cyclic primal sweeps.
    Alm,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Jfb => "jfb",
            Method::Bfb => "bfb",
            Method::Alm => "alm",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = SpodError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jfb" => Ok(Method::Jfb),
            "bfb" => Ok(Method::Bfb),
            "alm" => Ok(Method::Alm),
            other => Err(SpodError::Domain(format!("unknown method '{other}'"))),
        }
    }
}

/// A decomposition problem: the data, one transport per co-moving frame and
/// a switch for the sparse noise term.
#[derive(Debug, Clone)]
pub struct SpodProblem {
    snapshot: SnapshotMatrix,
    transports: Vec<TransportOperator>,
    noise_enabled: bool,
}

impl SpodProblem {
    pub fn new(
        snapshot: SnapshotMatrix,
        transports: Vec<TransportOperator>,
        noise_enabled: bool,
    ) -> Result<Self> {
        if transports.is_empty() {
            return Err(SpodError::Domain(
                "at least one transport operator is required".into(),
            ));
        }
        for (k, op) in transports.iter().enumerate() {
            if op.n_time() != snapshot.n_time() {
                return Err(SpodError::Shape(format!(
                    "transport {k} has {} shift samples but the snapshot matrix has {} columns",
                    op.n_time(),
                    snapshot.n_time()
                )));
            }
            if op.grid().len() != snapshot.n_space() {
                return Err(SpodError::Shape(format!(
                    "transport {k} grid has {} points but the snapshot matrix has {} rows",
                    op.grid().len(),
                    snapshot.n_space()
                )));
            }
        }
        Ok(Self {
            snapshot,
            transports,
            noise_enabled,
        })
    }

    pub fn snapshot(&self) -> &SnapshotMatrix {
        &self.snapshot
    }

    pub fn transports(&self) -> &[TransportOperator] {
        &self.transports
    }

    pub fn n_frames(&self) -> usize {
        self.transports.len()
    }

    pub fn noise_enabled(&self) -> bool {
        self.noise_enabled
    }
}

/// Solver hyperparameters. `new` fills in the defaults for the method; the
/// fields are public for direct adjustment.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub method: Method,
    /// Nuclear-norm weights, one per frame.
    pub lambdas: Vec<f64>,
    /// l1 weight of the noise term. Zero pins `E` to the zero matrix.
    pub lambda_noise: f64,
    /// Forward-backward step size (default `1/K`).
    pub step_alpha: f64,
    /// Optional per-block step sizes for BFB (`K+1` values, the last one for
    /// the noise block).
    pub step_alphas: Option<Vec<f64>>,
    /// ALM penalty parameter.
    pub mu: f64,
    /// Relative-decrease stopping tolerance.
    pub delta_tol: f64,
    pub max_iter: usize,
    pub rank_rel_tol: f64,
    /// Use the damped ALM noise-block step (a `1/mu`-scaled gradient step
    /// with an unscaled `+ Y` term) instead of the exact minimizer; see
    /// `alm_iterate`.
    pub alm_damped_noise_step: bool,
}

impl SolverConfig {
    pub fn new(method: Method, n_frames: usize) -> Self {
        Self {
            method,
            lambdas: vec![1.0; n_frames],
            lambda_noise: 0.0,
            step_alpha: 1.0 / n_frames as f64,
            step_alphas: None,
            mu: 1.0,
            delta_tol: 1e-5,
            max_iter: match method {
                Method::Jfb | Method::Bfb => 5000,
                Method::Alm => 500,
            },
            rank_rel_tol: prox::DEFAULT_RANK_REL_TOL,
            alm_damped_noise_step: false,
        }
    }

    /// Default ALM penalty `mu_0 = M * N / (4 ||Q||_1)`, the value used for
    /// the synthetic experiments.
    pub fn mu_default(q: ArrayView2<'_, f64>) -> f64 {
        let (m, n) = q.dim();
        (m * n) as f64 / (4.0 * prox::l1_norm(q))
    }

    /// Alternative penalty preset `M * K / (4 ||Q||_1)`.
    pub fn mu_default_alt(q: ArrayView2<'_, f64>, n_frames: usize) -> f64 {
        let (m, _) = q.dim();
        (m * n_frames) as f64 / (4.0 * prox::l1_norm(q))
    }

    fn validate(&self, n_frames: usize) -> Result<()> {
        if self.lambdas.len() != n_frames {
            return Err(SpodError::Shape(format!(
                "{} lambdas given for {} frames",
                self.lambdas.len(),
                n_frames
            )));
        }
        if self.lambdas.iter().any(|l| !(*l > 0.0)) {
            return Err(SpodError::Domain("lambdas must be positive".into()));
        }
        if !(self.lambda_noise >= 0.0) {
            return Err(SpodError::Domain("lambda_noise must be non-negative".into()));
        }
        if !(self.step_alpha > 0.0) || !(self.mu > 0.0) || !(self.delta_tol > 0.0) {
            return Err(SpodError::Domain(
                "step size, penalty and tolerance must be positive".into(),
            ));
        }
        if let Some(alphas) = &self.step_alphas {
            if alphas.len() != n_frames + 1 {
                return Err(SpodError::Shape(format!(
                    "{} per-block step sizes given, expected {}",
                    alphas.len(),
                    n_frames + 1
                )));
            }
            if alphas.iter().any(|a| !(*a > 0.0)) {
                return Err(SpodError::Domain("step sizes must be positive".into()));
            }
        }
        if self.max_iter == 0 {
            return Err(SpodError::Domain("max_iter must be positive".into()));
        }
        Ok(())
    }

    fn block_alpha(&self, k: usize) -> f64 {
        match &self.step_alphas {
            Some(alphas) => alphas[k],
            None => self.step_alpha,
        }
    }
}

/// Mutable iteration state shared by the three methods.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub frames: Vec<Array2<f64>>,
    pub noise: Array2<f64>,
    /// Lagrange multiplier matrix (ALM only; stays zero otherwise).
    pub dual: Array2<f64>,
    /// Nuclear norm of each frame after its last proximal step.
    pub frame_nuclear: Vec<f64>,
    /// Singular spectrum of each frame after its last proximal step.
    pub spectra: Vec<SingularSpectrum>,
}

impl SolverState {
    /// All-zero initial state (the initialization used by every method).
    pub fn zeros(problem: &SpodProblem) -> Self {
        let dim = problem.snapshot.values().raw_dim();
        let k = problem.n_frames();
        Self {
            frames: vec![Array2::zeros(dim); k],
            noise: Array2::zeros(dim),
            dual: Array2::zeros(dim),
            frame_nuclear: vec![0.0; k],
            spectra: vec![SingularSpectrum::new(vec![]).unwrap(); k],
        }
    }
}

/// Final decomposition with the per-frame spectra and estimated ranks.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub frames: Vec<Array2<f64>>,
    pub noise: Array2<f64>,
    pub spectra: Vec<SingularSpectrum>,
    pub ranks: Vec<usize>,
    pub converged: bool,
    pub iterations: usize,
}

/// One history record per completed iteration.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Objective `F` for the FB methods, relative residual for ALM.
    pub objective: f64,
    /// `||Q - sum_k T^k(Q^k) - E||_F / ||Q||_F`.
    pub rel_error: f64,
    pub ranks: Vec<usize>,
    pub noise_l1: f64,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ConvergenceHistory {
    pub records: Vec<IterationRecord>,
}

impl ConvergenceHistory {
    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn frobenius(x: &Array2<f64>) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `R = Q - sum_k T^k(Q^k) - E`.
pub fn residual(
    problem: &SpodProblem,
    frames: &[Array2<f64>],
    noise: &Array2<f64>,
) -> Result<Array2<f64>> {
    let q = problem.snapshot.values();
    if frames.len() != problem.n_frames() {
        return Err(SpodError::Shape(format!(
            "{} frames given for {} transports",
            frames.len(),
            problem.n_frames()
        )));
    }
    if noise.raw_dim() != q.raw_dim() {
        return Err(SpodError::Shape("noise matrix has wrong shape".into()));
    }
    let mut r = q.to_owned();
    for (frame, op) in frames.iter().zip(&problem.transports) {
        if frame.raw_dim() != q.raw_dim() {
            return Err(SpodError::Shape("frame matrix has wrong shape".into()));
        }
        r -= &op.forward(frame.view())?;
    }
    r -= noise;
    Ok(r)
}

/// Unconstrained objective
/// `1/2 ||R||_F^2 + sum_k lambda_k ||Q^k||_* + lambda_{K+1} ||E||_1`.
pub fn objective(
    problem: &SpodProblem,
    frames: &[Array2<f64>],
    noise: &Array2<f64>,
    config: &SolverConfig,
) -> Result<f64> {
    config.validate(problem.n_frames())?;
    let r = residual(problem, frames, noise)?;
    let mut obj = 0.5 * r.iter().map(|v| v * v).sum::<f64>();
    for (frame, lambda) in frames.iter().zip(&config.lambdas) {
        obj += lambda * prox::nuclear_norm(frame.view())?;
    }
    obj += config.lambda_noise * prox::l1_norm(noise.view());
    Ok(obj)
}

/// Gradients of the data-fitting term: `(-T^{-k}(R) for each k, -R)`.
pub fn grad_f(
    problem: &SpodProblem,
    frames: &[Array2<f64>],
    noise: &Array2<f64>,
) -> Result<(Vec<Array2<f64>>, Array2<f64>)> {
    let r = residual(problem, frames, noise)?;
    let mut frame_grads = Vec::with_capacity(problem.n_frames());
    for op in &problem.transports {
        frame_grads.push(op.backward(r.view())?.mapv(|v| -v));
    }
    Ok((frame_grads, r.mapv(|v| -v)))
}

fn noise_update_enabled(problem: &SpodProblem, config: &SolverConfig) -> bool {
    problem.noise_enabled() && config.lambda_noise > 0.0
}

/// One joint forward-backward iteration: a single residual evaluation, then
/// simultaneous SVT steps on every frame and a soft-threshold step on `E`.
pub fn jfb_iterate(
    state: &mut SolverState,
    problem: &SpodProblem,
    config: &SolverConfig,
) -> Result<()> {
    let alpha = config.step_alpha;
    let r = residual(problem, &state.frames, &state.noise)?;
    for (k, op) in problem.transports.iter().enumerate() {
        let step = &state.frames[k] + &op.backward(r.view())?.mapv(|v| alpha * v);
        let res = prox::svt(step.view(), alpha * config.lambdas[k])?;
        state.frames[k] = res.matrix;
        state.frame_nuclear[k] = res.spectrum_after.nuclear_sum();
        state.spectra[k] = res.spectrum_after;
    }
    if noise_update_enabled(problem, config) {
        let step = &state.noise + &r.mapv(|v| alpha * v);
        state.noise = prox::soft_threshold(step.view(), alpha * config.lambda_noise)?;
    }
    Ok(())
}

/// One cyclic block-coordinate iteration (PALM): each frame's gradient uses
/// the blocks already updated in this sweep, then the noise block follows.
pub fn bfb_iterate(
    state: &mut SolverState,
    problem: &SpodProblem,
    config: &SolverConfig,
) -> Result<()> {
    let k_frames = problem.n_frames();
    let q = problem.snapshot.values();

    // transported stale frames; entry k is replaced as the sweep passes
    let mut transported: Vec<Array2<f64>> = Vec::with_capacity(k_frames);
    for (frame, op) in state.frames.iter().zip(&problem.transports) {
        transported.push(op.forward(frame.view())?);
    }

    for k in 0..k_frames {
        let mut r = q.to_owned();
        for t in &transported {
            r -= t;
        }
        r -= &state.noise;
        let alpha = config.block_alpha(k);
        let op = &problem.transports[k];
        let step = &state.frames[k] + &op.backward(r.view())?.mapv(|v| alpha * v);
        let res = prox::svt(step.view(), alpha * config.lambdas[k])?;
        state.frames[k] = res.matrix;
        state.frame_nuclear[k] = res.spectrum_after.nuclear_sum();
        state.spectra[k] = res.spectrum_after;
        transported[k] = op.forward(state.frames[k].view())?;
    }

    if noise_update_enabled(problem, config) {
        let mut r = q.to_owned();
        for t in &transported {
            r -= t;
        }
        r -= &state.noise;
        let alpha = config.block_alpha(k_frames);
        let step = &state.noise + &r.mapv(|v| alpha * v);
        state.noise = prox::soft_threshold(step.view(), alpha * config.lambda_noise)?;
    }
    Ok(())
}

/// One augmented Lagrangian iteration: a cyclic primal sweep with step size
/// `1/mu`, a noise-block step and dual gradient ascent.
///
/// The frame update solves, for each `k`,
/// `Q^k <- svt(T^{-k}(R_k + Y/mu), lambda_k/mu)` where `R_k` excludes frame
/// `k`'s own contribution. The noise block is minimized exactly:
/// `E <- soft(Q - sum_k T^k(Q^k) + Y/mu, lambda_noise/mu)`. Setting
/// `alm_damped_noise_step` replaces it with the damped gradient step
/// `E <- soft(E + (Q - sum_k T^k(Q^k) - E)/mu + Y, lambda_noise/mu)`, which
/// moves `E` by only a `1/mu` fraction per sweep and diverges for small `mu`.
pub fn alm_iterate(
    state: &mut SolverState,
    problem: &SpodProblem,
    config: &SolverConfig,
) -> Result<()> {
    let k_frames = problem.n_frames();
    let q = problem.snapshot.values();
    let inv_mu = 1.0 / config.mu;

    let mut transported: Vec<Array2<f64>> = Vec::with_capacity(k_frames);
    for (frame, op) in state.frames.iter().zip(&problem.transports) {
        transported.push(op.forward(frame.view())?);
    }

    for k in 0..k_frames {
        // residual without frame k
        let mut r = q.to_owned();
        for (l, t) in transported.iter().enumerate() {
            if l != k {
                r -= t;
            }
        }
        r -= &state.noise;
        r.scaled_add(inv_mu, &state.dual);
        let op = &problem.transports[k];
        let step = op.backward(r.view())?;
        let res = prox::svt(step.view(), inv_mu * config.lambdas[k])?;
        state.frames[k] = res.matrix;
        state.frame_nuclear[k] = res.spectrum_after.nuclear_sum();
        state.spectra[k] = res.spectrum_after;
        transported[k] = op.forward(state.frames[k].view())?;
    }

    let mut constraint = q.to_owned();
    for t in &transported {
        constraint -= t;
    }

    if noise_update_enabled(problem, config) {
        let step = if config.alm_damped_noise_step {
            // damped variant: E + (Q - sum_k T^k(Q^k) - E)/mu + Y
            let mut step = state.noise.to_owned();
            let mut r_e = &constraint - &state.noise;
            r_e += &state.dual.mapv(|v| config.mu * v);
            step.scaled_add(inv_mu, &r_e);
            step
        } else {
            // exact minimizer of the augmented Lagrangian in E:
            // soft-threshold Q - sum_k T^k(Q^k) + Y/mu
            let mut step = constraint.clone();
            step.scaled_add(inv_mu, &state.dual);
            step
        };
        state.noise = prox::soft_threshold(step.view(), inv_mu * config.lambda_noise)?;
    }

    constraint -= &state.noise;
    state.dual.scaled_add(config.mu, &constraint);
    Ok(())
}

/// Run the configured method from the all-zero initial state.
///
/// The FB methods stop when the relative objective decrease drops below
/// `delta_tol`; ALM applies the same criterion to the relative residual.
/// Returns the decomposition together with the full iteration history. If a
/// non-finite value appears mid-run, the error carries the history collected
/// up to the last valid iterate.
pub fn solve(
    problem: &SpodProblem,
    config: &SolverConfig,
) -> Result<(Decomposition, ConvergenceHistory)> {
    config.validate(problem.n_frames())?;
    let q = problem.snapshot.values();
    let q_norm = frobenius(&q.to_owned());
    let denom = if q_norm > 0.0 { q_norm } else { 1.0 };

    let mut state = SolverState::zeros(problem);
    let mut history = ConvergenceHistory::default();
    let start = Instant::now();

    // metric value at the zero initial point
    let mut prev_metric = match config.method {
        Method::Jfb | Method::Bfb => 0.5 * q_norm * q_norm,
        Method::Alm => q_norm / denom,
    };
    let mut converged = false;
    let mut iterations = 0;

    for t in 1..=config.max_iter {
        match config.method {
            Method::Jfb => jfb_iterate(&mut state, problem, config)?,
            Method::Bfb => bfb_iterate(&mut state, problem, config)?,
            Method::Alm => alm_iterate(&mut state, problem, config)?,
        }

        let r = residual(problem, &state.frames, &state.noise)?;
        let r_norm = frobenius(&r);
        let rel_error = r_norm / denom;
        let metric = match config.method {
            Method::Jfb | Method::Bfb => {
                let mut f = 0.5 * r_norm * r_norm;
                for (nuc, lambda) in state.frame_nuclear.iter().zip(&config.lambdas) {
                    f += lambda * nuc;
                }
                f + config.lambda_noise * prox::l1_norm(state.noise.view())
            }
            Method::Alm => rel_error,
        };

        if !metric.is_finite() || !rel_error.is_finite() {
            return Err(SpodError::Diverged {
                iteration: t,
                history: Box::new(history),
            });
        }

        let ranks: Vec<usize> = state
            .spectra
            .iter()
            .map(|s| prox::estimate_rank(s, config.rank_rel_tol))
            .collect::<Result<_>>()?;
        history.records.push(IterationRecord {
            iteration: t,
            objective: metric,
            rel_error,
            ranks,
            noise_l1: prox::l1_norm(state.noise.view()),
            elapsed_secs: start.elapsed().as_secs_f64(),
        });
        iterations = t;

        // ALM's residual is not monotone; a transient increase must not
        // trigger the stop, so the decrease is compared in magnitude
        let decrease = match config.method {
            Method::Jfb | Method::Bfb => prev_metric - metric,
            Method::Alm => (prev_metric - metric).abs(),
        };
        if decrease <= config.delta_tol * prev_metric {
            converged = true;
            break;
        }
        prev_metric = metric;
    }

    let ranks = history
        .last()
        .map(|r| r.ranks.clone())
        .unwrap_or_else(|| vec![0; problem.n_frames()]);
    let decomposition = Decomposition {
        frames: state.frames,
        noise: state.noise,
        spectra: state.spectra,
        ranks,
        converged,
        iterations,
    };
    Ok((decomposition, history))
}
