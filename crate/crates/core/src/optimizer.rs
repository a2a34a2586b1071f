//! Confidence-gated gait refinement: execute perturbed cycles, model them
//! online, and step the gait along a model-predicted gradient once the
//! confidence score clears its gate.
//!
//! The gradient is taken by central finite differences of the model-predicted
//! displacement over the Fourier coefficients; the model is cheap to query
//! offline, so no extra physical cycles are spent probing. After each step
//! the bank is rebased onto the new nominal instead of being reset, which is
//! what lets consecutive iterations share experience.

use crate::adaptive::{FilterBank, RlsConfig};
use crate::batch::OnlinePhaseAverage;
use crate::error::{Error, Result};
use crate::gait::{Gait, NoiseConfig, PerturbationState, PhaseWindowGrid};
use crate::metrics::GammaState;
use crate::se2::{exp, BodyVelocity, GroupElement};
use crate::swimmer::{simulate_cycle, Shape, ShapeVelocity, Simulator, SwimmerParams};
use serde::{Deserialize, Serialize};

/// Which component of the per-cycle displacement is maximized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Objective {
    /// Net body-frame x displacement per cycle.
    #[default]
    ForwardX,
    /// Net body-frame y displacement per cycle.
    LateralY,
    /// Net rotation per cycle (accumulated, not wrapped).
    Rotation,
}

/// Knobs of the optimization loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizationConfig {
    /// Confidence gate: no gradient step is taken below this score.
    pub gamma_threshold: f64,
    /// Length of each projected ascent step in coefficient space.
    pub step_size: f64,
    /// Central-difference probe size per coefficient.
    pub fd_epsilon: f64,
    /// Budget of perturbed cycles to execute.
    pub max_cycles: usize,
    pub objective: Objective,
    /// Box constraint on every Fourier coefficient.
    pub amplitude_bound: f64,
    /// Perturbed cycles required in an iteration before the gate is
    /// consulted, so a stale pre-step score cannot trigger immediately.
    pub min_cycles_per_iteration: usize,
    pub steps_per_cycle: usize,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        Self {
            gamma_threshold: 0.5,
            step_size: 0.05,
            fd_epsilon: 0.01,
            max_cycles: 40,
            objective: Objective::ForwardX,
            amplitude_bound: 0.9,
            min_cycles_per_iteration: 2,
            steps_per_cycle: 200,
        }
    }
}

impl OptimizationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_threshold > 0.0 && self.gamma_threshold < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma threshold must lie in (0, 1), got {}",
                self.gamma_threshold
            )));
        }
        if !(self.step_size >= 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidParameter("step size must be nonnegative".into()));
        }
        if !(self.fd_epsilon > 0.0 && self.fd_epsilon.is_finite()) {
            return Err(Error::InvalidParameter("probe size must be positive".into()));
        }
        if self.max_cycles == 0 || self.steps_per_cycle == 0 || self.min_cycles_per_iteration == 0 {
            return Err(Error::InvalidParameter("cycle counts must be positive".into()));
        }
        if !(self.amplitude_bound > 0.0 && self.amplitude_bound.is_finite()) {
            return Err(Error::InvalidParameter("amplitude bound must be positive".into()));
        }
        Ok(())
    }
}

/// Model hyperparameters shared by the optimization loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub grid: PhaseWindowGrid,
    pub rls: RlsConfig,
    pub lambda_gamma: f64,
    pub smoothing_order: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            grid: PhaseWindowGrid::default_grid(),
            rls: RlsConfig::default(),
            lambda_gamma: 0.995,
            smoothing_order: 4,
        }
    }
}

/// One executed sample with the model's view of it at that moment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStep {
    pub t: f64,
    pub phi: f64,
    pub cycle: usize,
    pub iteration: usize,
    pub shape: Shape,
    pub shape_vel: ShapeVelocity,
    pub xi: BodyVelocity,
    /// Data-driven prediction made before this sample was ingested;
    /// absent until every window has data.
    pub xi_model: Option<BodyVelocity>,
    /// Phase-average baseline prediction at the same moment.
    pub xi_baseline: Option<BodyVelocity>,
    /// Confidence score after folding this sample in.
    pub gamma: Option<f64>,
}

/// One gait iteration: the coefficients adopted and how they performed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    /// 0 is the seed gait; steps count from 1.
    pub iteration: usize,
    /// Perturbed cycles executed before this gait was adopted.
    pub cycles_consumed: usize,
    /// Gate score at the moment the step was taken (absent on the seed row).
    pub gate_gamma: Option<f64>,
    pub gait: Gait,
    /// Model-predicted objective for the adopted gait.
    pub predicted_objective: Option<f64>,
    /// Clean-cycle objective of the adopted gait (evaluation probe, not
    /// counted against the cycle budget).
    pub realized_objective: f64,
}

/// How a trial ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrialOutcome {
    /// At least one gradient step was taken within budget.
    Completed,
    /// The budget ran out before the confidence gate ever passed.
    GateNeverPassed,
}

/// Complete record of one optimization trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    /// Sign applied to the raw objective so the seed gait scores positive.
    pub direction: f64,
    pub outcome: TrialOutcome,
    pub cycles_used: usize,
    pub steps: Vec<TrialStep>,
    pub iterations: Vec<IterationRow>,
}

impl TrialRecord {
    pub fn seed_objective(&self) -> f64 {
        self.iterations.first().map(|r| r.realized_objective).unwrap_or(0.0)
    }

    pub fn final_objective(&self) -> f64 {
        self.iterations.last().map(|r| r.realized_objective).unwrap_or(0.0)
    }

    /// Relative improvement of the final gait over the seed gait.
    pub fn relative_improvement(&self) -> f64 {
        let seed = self.seed_objective();
        if seed == 0.0 {
            return 0.0;
        }
        (self.final_objective() - seed) / seed.abs()
    }

    /// Cycles executed up to the last adopted gait.
    pub fn cycles_to_final_gait(&self) -> usize {
        self.iterations.last().map(|r| r.cycles_consumed).unwrap_or(0)
    }
}

/// Streaming hook for persistence; all methods default to no-ops.
pub trait TrialObserver {
    fn on_step(&mut self, _step: &TrialStep) {}
    fn on_iteration(&mut self, _row: &IterationRow) {}
}

/// Observer that discards everything.
pub struct NullObserver;

impl TrialObserver for NullObserver {}

fn accumulate(xis: &[BodyVelocity], dt: f64) -> (GroupElement, f64) {
    let mut pose = GroupElement::identity();
    let mut rotation = 0.0;
    for xi in xis {
        pose = pose.compose(&exp(xi, dt));
        rotation += xi.xi_theta * dt;
    }
    (pose, rotation)
}

fn objective_component(pose: &GroupElement, rotation: f64, objective: Objective) -> f64 {
    match objective {
        Objective::ForwardX => pose.x,
        Objective::LateralY => pose.y,
        Objective::Rotation => rotation,
    }
}

/// Model-predicted objective for a candidate gait: integrates the bank's
/// predictions along one candidate cycle, measuring offsets against the
/// bank's current nominal.
pub fn model_objective(
    bank: &FilterBank,
    candidate: &Gait,
    steps_per_cycle: usize,
    objective: Objective,
    direction: f64,
) -> Result<f64> {
    let dt = candidate.period() / steps_per_cycle as f64;
    let mut xis = Vec::with_capacity(steps_per_cycle);
    for k in 0..steps_per_cycle {
        let phi = 2.0 * std::f64::consts::PI * k as f64 / steps_per_cycle as f64;
        let (shape, rates) = candidate.nominal_shape(phi);
        xis.push(bank.predict(phi, &shape, &rates)?);
    }
    let (pose, rotation) = accumulate(&xis, dt);
    Ok(direction * objective_component(&pose, rotation, objective))
}

/// Clean-cycle objective of a gait under the true physics.
pub fn realized_objective(
    params: &SwimmerParams,
    gait: &Gait,
    steps_per_cycle: usize,
    objective: Objective,
    direction: f64,
) -> Result<f64> {
    let steps = simulate_cycle(gait, params, steps_per_cycle, None)?;
    let dt = gait.period() / steps_per_cycle as f64;
    let rotation: f64 = steps.iter().map(|s| s.xi.xi_theta * dt).sum();
    let pose = steps.last().map(|s| s.pose).unwrap_or_else(GroupElement::identity);
    Ok(direction * objective_component(&pose, rotation, objective))
}

/// Central finite differences of [`model_objective`] over every Fourier
/// coefficient of the gait.
pub fn policy_gradient(
    bank: &FilterBank,
    gait: &Gait,
    cfg: &OptimizationConfig,
    direction: f64,
) -> Result<Vec<f64>> {
    let flat = gait.flatten();
    let mut grad = Vec::with_capacity(flat.len());
    for i in 0..flat.len() {
        let mut plus = flat.clone();
        plus[i] += cfg.fd_epsilon;
        let mut minus = flat.clone();
        minus[i] -= cfg.fd_epsilon;
        let f_plus = model_objective(
            bank,
            &gait.with_flat_coefficients(&plus)?,
            cfg.steps_per_cycle,
            cfg.objective,
            direction,
        )?;
        let f_minus = model_objective(
            bank,
            &gait.with_flat_coefficients(&minus)?,
            cfg.steps_per_cycle,
            cfg.objective,
            direction,
        )?;
        grad.push((f_plus - f_minus) / (2.0 * cfg.fd_epsilon));
    }
    Ok(grad)
}

fn clamp_coefficients(flat: &mut [f64], bound: f64) {
    for v in flat.iter_mut() {
        *v = v.clamp(-bound, bound);
    }
}

/// Runs one full confidence-gated optimization trial.
pub fn optimize(
    params: &SwimmerParams,
    seed_gait: &Gait,
    cfg: &OptimizationConfig,
    model: &ModelConfig,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<TrialRecord> {
    optimize_with_observer(params, seed_gait, cfg, model, noise, seed, &mut NullObserver)
}

/// [`optimize`] with a streaming observer for incremental persistence.
pub fn optimize_with_observer(
    params: &SwimmerParams,
    seed_gait: &Gait,
    cfg: &OptimizationConfig,
    model: &ModelConfig,
    noise: &NoiseConfig,
    seed: u64,
    observer: &mut dyn TrialObserver,
) -> Result<TrialRecord> {
    cfg.validate()?;
    noise.validate()?;
    if seed_gait.joint_count() != params.shape_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.shape_dim(),
            actual: seed_gait.joint_count(),
        });
    }
    if seed_gait.flatten().iter().any(|c| c.abs() > cfg.amplitude_bound) {
        return Err(Error::InvalidParameter(
            "seed gait coefficients exceed the amplitude bound".into(),
        ));
    }

    // Fix the ascent direction so the seed gait scores nonnegative; from
    // here on "objective" means the direction-adjusted component.
    let raw_seed =
        realized_objective(params, seed_gait, cfg.steps_per_cycle, cfg.objective, 1.0)?;
    let direction = if raw_seed < 0.0 { -1.0 } else { 1.0 };

    let mut bank = FilterBank::new(model.grid, seed_gait.clone(), model.rls, model.smoothing_order)?;
    let mut baseline = OnlinePhaseAverage::new(model.grid, model.rls, model.smoothing_order)?;
    let mut gamma = GammaState::new(model.lambda_gamma)?;
    let mut sim = Simulator::new(*params, seed_gait.clone(), cfg.steps_per_cycle)?;
    let mut perturbation = PerturbationState::new(params.shape_dim(), *noise, seed)?;

    let mut record = TrialRecord {
        seed,
        direction,
        outcome: TrialOutcome::GateNeverPassed,
        cycles_used: 0,
        steps: Vec::new(),
        iterations: Vec::new(),
    };
    let seed_row = IterationRow {
        iteration: 0,
        cycles_consumed: 0,
        gate_gamma: None,
        gait: seed_gait.clone(),
        predicted_objective: None,
        realized_objective: direction * raw_seed,
    };
    observer.on_iteration(&seed_row);
    record.iterations.push(seed_row);

    let mut current = seed_gait.clone();
    let mut iteration = 0usize;
    let mut cycles_in_iteration = 0usize;

    while record.cycles_used < cfg.max_cycles {
        let sim_steps = sim.run_cycle(Some(&mut perturbation))?;
        for s in &sim_steps {
            let (xi_model, xi_baseline) = if bank.is_fitted() && baseline.is_fitted() {
                (
                    Some(bank.predict(s.phi, &s.shape, &s.shape_vel)?),
                    Some(baseline.predict(s.phi)?),
                )
            } else {
                (None, None)
            };
            let g = match (&xi_model, &xi_baseline) {
                (Some(m), Some(b)) => gamma.update(m, b, &s.xi),
                _ => gamma.gamma(),
            };
            bank.ingest_sample(s.phi, &s.shape, &s.shape_vel, &s.xi)?;
            baseline.ingest(s.phi, &s.xi)?;
            let step = TrialStep {
                t: s.t,
                phi: s.phi,
                cycle: record.cycles_used,
                iteration,
                shape: s.shape.clone(),
                shape_vel: s.shape_vel.clone(),
                xi: s.xi,
                xi_model,
                xi_baseline,
                gamma: g,
            };
            observer.on_step(&step);
            record.steps.push(step);
        }
        record.cycles_used += 1;
        cycles_in_iteration += 1;

        if cycles_in_iteration < cfg.min_cycles_per_iteration {
            continue;
        }
        let gate = match gamma.gamma() {
            Some(g) if g >= cfg.gamma_threshold => g,
            _ => continue,
        };

        let grad = policy_gradient(&bank, &current, cfg, direction)?;
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let mut flat = current.flatten();
        for (c, g) in flat.iter_mut().zip(&grad) {
            *c += cfg.step_size * g / norm;
        }
        clamp_coefficients(&mut flat, cfg.amplitude_bound);
        let next = current.with_flat_coefficients(&flat)?;

        let predicted =
            model_objective(&bank, &next, cfg.steps_per_cycle, cfg.objective, direction)?;
        bank.rebase(&next)?;
        sim.set_gait(next.clone())?;
        let realized =
            realized_objective(params, &next, cfg.steps_per_cycle, cfg.objective, direction)?;

        iteration += 1;
        let row = IterationRow {
            iteration,
            cycles_consumed: record.cycles_used,
            gate_gamma: Some(gate),
            gait: next.clone(),
            predicted_objective: Some(predicted),
            realized_objective: realized,
        };
        observer.on_iteration(&row);
        record.iterations.push(row);

        current = next;
        gamma.reset();
        cycles_in_iteration = 0;
        record.outcome = TrialOutcome::Completed;
    }

    Ok(record)
}
