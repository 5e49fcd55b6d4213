//! Forward–backward sweep for the drug-therapy optimal control problem.
//!
//! Each sweep integrates the state forward under the current controls,
//! integrates the costate backward from `λ(T) = 0`, and moves every active
//! control against its Hamiltonian gradient by a common step `θ`. The step
//! minimises the Hamiltonian summed over the mesh, found by golden-section
//! search on `[0, theta_max]`.

use crate::error::{Error, Result};
use crate::integrate::{
    cost_integral, integrate_backward, integrate_forward, ControlTrajectory, CostateTrajectory,
    StateTrajectory, TimeMesh, Trajectory,
};
use crate::model::{
    adjoint_rhs, clamp_controls, control_gradient, hamiltonian, state_rhs_unchecked, AdjointForm,
    Control, ControlBounds, ControlVec, CostWeights, CostateVec, ModelParams, StateVec, N_CONTROL,
    N_STATE,
};
use crate::scenarios::DrugMask;

/// Absolute tolerance on `θ` for the golden-section search.
pub const LINE_SEARCH_TOLERANCE: f64 = 1e-4;

/// When a search finds no improvement the bracket is shrunk by this factor
/// and searched again, with the tolerance scaled alike.
const BRACKET_SHRINK: f64 = 1e-2;
const BRACKET_REFINEMENTS: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct OctlConfig {
    pub mesh: TimeMesh,
    pub bounds: ControlBounds,
    pub mask: DrugMask,
    pub max_iterations: usize,
    /// Relative L1 change per control channel below which the sweep stops.
    pub tolerance: f64,
    pub theta_max: f64,
    pub weights: CostWeights,
    pub adjoint: AdjointForm,
    pub objective: StepObjective,
}

/// What the step-size search minimises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepObjective {
    /// Hamiltonian summed over the mesh with state and costate frozen.
    Hamiltonian,
    /// The cost functional, re-simulating the state for each trial step.
    #[default]
    Cost,
}

impl Default for OctlConfig {
    fn default() -> Self {
        OctlConfig {
            mesh: TimeMesh::with_step(0.0, 100.0, 0.01).expect("valid default mesh"),
            bounds: ControlBounds::default(),
            mask: DrugMask::ALL,
            max_iterations: 200,
            tolerance: 1e-3,
            theta_max: 1.0,
            weights: CostWeights::default(),
            adjoint: AdjointForm::Derived,
            objective: StepObjective::default(),
        }
    }
}

impl OctlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::Invalid(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if !(self.theta_max.is_finite() && self.theta_max > 0.0) {
            return Err(Error::Invalid(format!(
                "theta_max must be positive, got {}",
                self.theta_max
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Invalid("max_iterations must be at least 1".into()));
        }
        self.bounds.validate()?;
        self.weights.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OctlResult {
    pub state: StateTrajectory,
    pub costate: CostateTrajectory,
    pub controls: ControlTrajectory,
    /// `J` of the initial (zero) controls followed by `J` after every update.
    pub cost_history: Vec<f64>,
    /// Accepted step per update.
    pub thetas: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl OctlResult {
    pub fn final_cost(&self) -> f64 {
        *self.cost_history.last().expect("history is never empty")
    }
}

/// State trajectory under the given controls.
pub fn simulate(
    x0: &StateVec,
    p: &ModelParams,
    controls: &ControlTrajectory,
) -> Result<StateTrajectory> {
    x0.ensure_finite()?;
    integrate_forward(
        |_, x: &[f64; N_STATE], u: &[f64; N_CONTROL]| {
            state_rhs_unchecked(&StateVec(*x), &ControlVec(*u), p).0
        },
        x0.0,
        controls,
    )
}

/// Costate trajectory from the transversality condition `λ(T) = 0`.
pub fn solve_costate(
    states: &StateTrajectory,
    controls: &ControlTrajectory,
    p: &ModelParams,
    form: AdjointForm,
) -> Result<CostateTrajectory> {
    integrate_backward(
        |t, lam: &[f64; N_STATE], x: &[f64; N_STATE], u: &[f64; N_CONTROL]| {
            adjoint_rhs(
                t,
                &CostateVec(*lam),
                &StateVec(*x),
                &ControlVec(*u),
                p,
                form,
            )
            .0
        },
        [0.0; N_STATE],
        states,
        controls,
    )
}

/// Per-node Hamiltonian gradients; inactive controls get a zero gradient.
pub fn gradients(
    states: &StateTrajectory,
    costates: &CostateTrajectory,
    controls: &ControlTrajectory,
    w: &CostWeights,
    mask: DrugMask,
) -> ControlTrajectory {
    let values = states
        .values
        .iter()
        .zip(&costates.values)
        .zip(&controls.values)
        .map(|((x, lam), u)| {
            let mut g = control_gradient(&StateVec(*x), &CostateVec(*lam), &ControlVec(*u), w);
            for c in Control::ALL {
                if !mask.is_active(c) {
                    g.set(c, 0.0);
                }
            }
            g.0
        })
        .collect();
    Trajectory {
        mesh: controls.mesh,
        values,
    }
}

fn step_node(
    u: &[f64; N_CONTROL],
    g: &[f64; N_CONTROL],
    theta: f64,
    bounds: &ControlBounds,
    mask: DrugMask,
) -> ControlVec {
    let mut next = ControlVec(std::array::from_fn(|i| u[i] - theta * g[i]));
    next = clamp_controls(&next, bounds);
    for c in Control::ALL {
        if !mask.is_active(c) {
            next.set(c, 0.0);
        }
    }
    next
}

/// `D ← clamp(D − θ g)` at every node for active controls; inactive ones are pinned to zero.
pub fn update_controls(
    controls: &ControlTrajectory,
    gradients: &ControlTrajectory,
    theta: f64,
    bounds: &ControlBounds,
    mask: DrugMask,
) -> Result<ControlTrajectory> {
    if !controls.same_mesh(gradients) {
        return Err(Error::MeshMismatch);
    }
    let values = controls
        .values
        .iter()
        .zip(&gradients.values)
        .map(|(u, g)| step_node(u, g, theta, bounds, mask).0)
        .collect();
    Ok(Trajectory {
        mesh: controls.mesh,
        values,
    })
}

/// Minimiser of a unimodal `f` on `[lo, hi]` to absolute tolerance `tol`.
pub fn golden_section<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> f64
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Mesh-summed Hamiltonian after a trial step of size `theta`.
pub fn aggregated_hamiltonian(
    controls: &ControlTrajectory,
    gradients: &ControlTrajectory,
    states: &StateTrajectory,
    costates: &CostateTrajectory,
    theta: f64,
    p: &ModelParams,
    cfg: &OctlConfig,
) -> f64 {
    states
        .values
        .iter()
        .zip(&costates.values)
        .zip(controls.values.iter().zip(&gradients.values))
        .map(|((x, lam), (u, g))| {
            let trial = step_node(u, g, theta, &cfg.bounds, cfg.mask);
            hamiltonian(&StateVec(*x), &CostateVec(*lam), &trial, p, &cfg.weights)
        })
        .sum()
}

/// Cost functional after a trial step; `+∞` when the state blows up.
pub fn trial_cost(
    x0: &StateVec,
    controls: &ControlTrajectory,
    gradients: &ControlTrajectory,
    theta: f64,
    p: &ModelParams,
    cfg: &OctlConfig,
) -> f64 {
    let cost = update_controls(controls, gradients, theta, &cfg.bounds, cfg.mask)
        .and_then(|u| simulate(x0, p, &u).and_then(|x| cost_integral(&x, &u, &cfg.weights)));
    match cost {
        Ok(j) if j.is_finite() => j,
        _ => f64::INFINITY,
    }
}

/// Step size in `[0, theta_max]` minimising the configured objective.
///
/// Returns 0 when no trial step improves on the current controls, which
/// marks a stationary point for this sweep.
pub fn line_search_theta(
    controls: &ControlTrajectory,
    gradients: &ControlTrajectory,
    states: &StateTrajectory,
    costates: &CostateTrajectory,
    p: &ModelParams,
    cfg: &OctlConfig,
) -> Result<f64> {
    if !(controls.same_mesh(gradients)
        && controls.same_mesh(states)
        && controls.same_mesh(costates))
    {
        return Err(Error::MeshMismatch);
    }
    let x0 = StateVec(*states.first());
    let phi = |theta: f64| match cfg.objective {
        StepObjective::Hamiltonian => {
            aggregated_hamiltonian(controls, gradients, states, costates, theta, p, cfg)
        }
        StepObjective::Cost => trial_cost(&x0, controls, gradients, theta, p, cfg),
    };
    let phi0 = phi(0.0);
    let mut hi = cfg.theta_max;
    for _ in 0..=BRACKET_REFINEMENTS {
        let tol = LINE_SEARCH_TOLERANCE * hi / cfg.theta_max;
        let theta = golden_section(phi, 0.0, hi, tol);
        if theta > tol && phi(theta) < phi0 {
            return Ok(theta);
        }
        hi *= BRACKET_SHRINK;
    }
    Ok(0.0)
}

/// True when every channel satisfies `Σ|next − prev| ≤ tolerance · Σ|next|`.
pub fn convergence_test(
    prev: &ControlTrajectory,
    next: &ControlTrajectory,
    tolerance: f64,
) -> Result<bool> {
    if !prev.same_mesh(next) {
        return Err(Error::MeshMismatch);
    }
    Ok((0..N_CONTROL).all(|c| {
        let (mut change, mut size) = (0.0, 0.0);
        for (a, b) in prev.values.iter().zip(&next.values) {
            change += (b[c] - a[c]).abs();
            size += b[c].abs();
        }
        change <= tolerance * size
    }))
}

/// Runs the sweep from zero controls until the controls settle or the
/// iteration cap is hit. Non-convergence is reported through the flag.
pub fn fbsm_solve(x0: &StateVec, p: &ModelParams, cfg: &OctlConfig) -> Result<OctlResult> {
    cfg.validate()?;
    p.validate()?;
    x0.ensure_finite()?;

    let at = |iteration: usize| {
        move |e: Error| Error::Optimizer {
            iteration,
            source: Box::new(e),
        }
    };

    let mut controls = ControlTrajectory::zeros(cfg.mesh);
    let mut state = simulate(x0, p, &controls).map_err(at(0))?;
    let mut costate = solve_costate(&state, &controls, p, cfg.adjoint).map_err(at(0))?;
    let mut cost_history = vec![cost_integral(&state, &controls, &cfg.weights)?];
    let mut thetas = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        iterations += 1;
        let grads = gradients(&state, &costate, &controls, &cfg.weights, cfg.mask);
        let theta = line_search_theta(&controls, &grads, &state, &costate, p, cfg)
            .map_err(at(iterations))?;
        let next = update_controls(&controls, &grads, theta, &cfg.bounds, cfg.mask)?;
        converged = convergence_test(&controls, &next, cfg.tolerance)?;
        thetas.push(theta);
        controls = next;

        state = simulate(x0, p, &controls).map_err(at(iterations))?;
        costate = solve_costate(&state, &controls, p, cfg.adjoint).map_err(at(iterations))?;
        cost_history.push(cost_integral(&state, &controls, &cfg.weights)?);
        if converged {
            break;
        }
    }

    Ok(OctlResult {
        state,
        costate,
        controls,
        cost_history,
        thetas,
        converged,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_mesh() -> TimeMesh {
        TimeMesh::new(0.0, 1.0, 10).unwrap()
    }

    fn constant_controls(value: [f64; N_CONTROL]) -> ControlTrajectory {
        Trajectory::constant(small_mesh(), value)
    }

    #[test]
    fn zero_step_is_identity() {
        let u = constant_controls([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]);
        let g = constant_controls([5.0; N_CONTROL]);
        let next =
            update_controls(&u, &g, 0.0, &ControlBounds::uniform(1.0), DrugMask::ALL).unwrap();
        assert_eq!(next, u);
    }

    #[test]
    fn positive_gradient_from_zero_clamps_at_zero() {
        let u = constant_controls([0.0; N_CONTROL]);
        let g = constant_controls([0.7; N_CONTROL]);
        let next = update_controls(&u, &g, 1.0, &ControlBounds::default(), DrugMask::ALL).unwrap();
        assert!(next.values.iter().all(|v| *v == [0.0; N_CONTROL]));
    }

    #[test]
    fn plain_gradient_step() {
        let mut u0 = [0.0; N_CONTROL];
        u0[0] = 0.5;
        let mut g0 = [0.0; N_CONTROL];
        g0[0] = 0.2;
        let next = update_controls(
            &constant_controls(u0),
            &constant_controls(g0),
            1.0,
            &ControlBounds::default(),
            DrugMask::ALL,
        )
        .unwrap();
        assert!(next.values.iter().all(|v| (v[0] - 0.3).abs() < 1e-15));
    }

    #[test]
    fn masked_controls_stay_zero() {
        let u = constant_controls([0.0; N_CONTROL]);
        let g = constant_controls([-3.0; N_CONTROL]);
        let mask = DrugMask::only(crate::model::Drug::Dapsone);
        let next = update_controls(&u, &g, 0.1, &ControlBounds::default(), mask).unwrap();
        for v in &next.values {
            for c in Control::ALL {
                let expected = if mask.is_active(c) { 0.3 } else { 0.0 };
                assert!((v[c.index()] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn golden_section_on_quadratic() {
        let theta = golden_section(|t| (t - 0.3) * (t - 0.3), 0.0, 1.0, LINE_SEARCH_TOLERANCE);
        assert!((theta - 0.3).abs() <= 1e-4);
    }

    #[test]
    fn zero_gradient_line_search() {
        let mesh = TimeMesh::new(0.0, 1.0, 100).unwrap();
        let p = ModelParams::default();
        let cfg = OctlConfig {
            mesh,
            ..OctlConfig::default()
        };
        let u = ControlTrajectory::zeros(mesh);
        let g = ControlTrajectory::zeros(mesh);
        let x = simulate(&crate::model::InitialPreset::Simulation.state(), &p, &u).unwrap();
        let lam = solve_costate(&x, &u, &p, AdjointForm::Derived).unwrap();
        let theta = line_search_theta(&u, &g, &x, &lam, &p, &cfg).unwrap();
        assert!((0.0..=cfg.theta_max).contains(&theta));
        let next = update_controls(&u, &g, theta, &cfg.bounds, cfg.mask).unwrap();
        assert_eq!(next, u);
    }

    #[test]
    fn convergence_examples() {
        let a = constant_controls([0.2, 0.4, 0.0, 0.1, 0.9, 0.0, 0.3, 0.5]);
        assert!(convergence_test(&a, &a, 1e-3).unwrap());

        let zero = constant_controls([0.0; N_CONTROL]);
        let one = constant_controls([1.0; N_CONTROL]);
        assert!(!convergence_test(&zero, &one, 1e-3).unwrap());

        let scaled = Trajectory {
            mesh: a.mesh,
            values: a
                .values
                .iter()
                .map(|v| std::array::from_fn(|i| v[i] * (1.0 + 5e-4)))
                .collect(),
        };
        assert!(convergence_test(&a, &scaled, 1e-3).unwrap());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = OctlConfig {
            tolerance: 0.0,
            ..OctlConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = OctlConfig {
            theta_max: -1.0,
            ..OctlConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
