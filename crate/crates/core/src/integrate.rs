//! Fixed-step classical Runge–Kutta on a uniform mesh, run forward for the
//! state and backward for the costate, plus trapezoidal cost quadrature.
//!
//! Exogenous trajectories (controls, and the state during the backward
//! pass) are only known at mesh nodes; their half-step values are the mean
//! of the two adjacent nodes.

use crate::error::{Error, Result};
use crate::model::{running_cost, ControlVec, CostWeights, StateVec, N_CONTROL, N_STATE};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeMesh {
    pub t0: f64,
    pub t_end: f64,
    pub n_steps: usize,
}

impl TimeMesh {
    pub fn new(t0: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t0.is_finite() && t_end.is_finite()) || t_end <= t0 {
            return Err(Error::InvalidMesh(format!(
                "end time {t_end} must exceed start time {t0}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::InvalidMesh("at least one step is required".into()));
        }
        Ok(TimeMesh { t0, t_end, n_steps })
    }

    /// Mesh over `[t0, t_end]` whose step is `h` rounded to divide the interval evenly.
    pub fn with_step(t0: f64, t_end: f64, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidMesh(format!("step {h} must be positive")));
        }
        let n = ((t_end - t0) / h).round().max(1.0) as usize;
        Self::new(t0, t_end, n)
    }

    pub fn step(&self) -> f64 {
        (self.t_end - self.t0) / self.n_steps as f64
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_end
        } else {
            self.t0 + k as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_nodes()).map(|k| self.node(k))
    }
}

/// Per-node values on a mesh, one fixed-size vector per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<const N: usize> {
    pub mesh: TimeMesh,
    pub values: Vec<[f64; N]>,
}

pub type StateTrajectory = Trajectory<N_STATE>;
pub type CostateTrajectory = Trajectory<N_STATE>;
pub type ControlTrajectory = Trajectory<N_CONTROL>;

impl<const N: usize> Trajectory<N> {
    pub fn constant(mesh: TimeMesh, value: [f64; N]) -> Self {
        Trajectory {
            mesh,
            values: vec![value; mesh.n_nodes()],
        }
    }

    pub fn zeros(mesh: TimeMesh) -> Self {
        Self::constant(mesh, [0.0; N])
    }

    pub fn from_values(mesh: TimeMesh, values: Vec<[f64; N]>) -> Result<Self> {
        if values.len() != mesh.n_nodes() {
            return Err(Error::MeshMismatch);
        }
        Ok(Trajectory { mesh, values })
    }

    pub fn first(&self) -> &[f64; N] {
        &self.values[0]
    }

    pub fn last(&self) -> &[f64; N] {
        &self.values[self.values.len() - 1]
    }

    /// Values of one component across all nodes.
    pub fn channel(&self, index: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(move |v| v[index])
    }

    pub fn same_mesh<const M: usize>(&self, other: &Trajectory<M>) -> bool {
        self.mesh == other.mesh && self.values.len() == other.values.len()
    }

    /// Trapezoidal time average of one component.
    pub fn time_average(&self, index: usize) -> f64 {
        trapezoid(self.channel(index), self.mesh.step()) / (self.mesh.t_end - self.mesh.t0)
    }

    fn midpoint(&self, k: usize) -> [f64; N] {
        let (a, b) = (&self.values[k], &self.values[k + 1]);
        std::array::from_fn(|i| 0.5 * (a[i] + b[i]))
    }
}

fn axpy<const N: usize>(x: &[f64; N], a: f64, d: &[f64; N]) -> [f64; N] {
    std::array::from_fn(|i| x[i] + a * d[i])
}

fn rk4_combine<const N: usize>(
    x: &[f64; N],
    h: f64,
    k1: &[f64; N],
    k2: &[f64; N],
    k3: &[f64; N],
    k4: &[f64; N],
) -> [f64; N] {
    std::array::from_fn(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Integrates `dx/dt = rhs(t, x, u)` from `x0` over the controls' mesh.
pub fn integrate_forward<const N: usize, const M: usize, F>(
    rhs: F,
    x0: [f64; N],
    controls: &Trajectory<M>,
) -> Result<Trajectory<N>>
where
    F: Fn(f64, &[f64; N], &[f64; M]) -> [f64; N],
{
    let mesh = controls.mesh;
    if controls.values.len() != mesh.n_nodes() {
        return Err(Error::MeshMismatch);
    }
    if let Some(i) = x0.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain {
            what: "initial state",
            index: i,
        });
    }
    let h = mesh.step();
    let mut values = Vec::with_capacity(mesh.n_nodes());
    values.push(x0);
    let mut x = x0;
    for k in 0..mesh.n_steps {
        let t = mesh.node(k);
        let u0 = &controls.values[k];
        let um = controls.midpoint(k);
        let u1 = &controls.values[k + 1];

        let k1 = rhs(t, &x, u0);
        let k2 = rhs(t + 0.5 * h, &axpy(&x, 0.5 * h, &k1), &um);
        let k3 = rhs(t + 0.5 * h, &axpy(&x, 0.5 * h, &k2), &um);
        let k4 = rhs(t + h, &axpy(&x, h, &k3), u1);
        x = rk4_combine(&x, h, &k1, &k2, &k3, &k4);

        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration {
                node: k + 1,
                t: mesh.node(k + 1),
            });
        }
        values.push(x);
    }
    Ok(Trajectory { mesh, values })
}

/// Integrates `dλ/dt = rhs(t, λ, x, u)` backward from the terminal value `lam_t`.
pub fn integrate_backward<const N: usize, const S: usize, const M: usize, F>(
    rhs: F,
    lam_t: [f64; N],
    states: &Trajectory<S>,
    controls: &Trajectory<M>,
) -> Result<Trajectory<N>>
where
    F: Fn(f64, &[f64; N], &[f64; S], &[f64; M]) -> [f64; N],
{
    if !states.same_mesh(controls) || states.values.len() != states.mesh.n_nodes() {
        return Err(Error::MeshMismatch);
    }
    if let Some(i) = lam_t.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain {
            what: "terminal costate",
            index: i,
        });
    }
    let mesh = states.mesh;
    let h = mesh.step();
    let mut values = vec![[0.0; N]; mesh.n_nodes()];
    values[mesh.n_steps] = lam_t;
    let mut lam = lam_t;
    for k in (0..mesh.n_steps).rev() {
        let t = mesh.node(k + 1);
        let (x1, u1) = (&states.values[k + 1], &controls.values[k + 1]);
        let (xm, um) = (states.midpoint(k), controls.midpoint(k));
        let (x0, u0) = (&states.values[k], &controls.values[k]);

        let k1 = rhs(t, &lam, x1, u1);
        let k2 = rhs(t - 0.5 * h, &axpy(&lam, -0.5 * h, &k1), &xm, &um);
        let k3 = rhs(t - 0.5 * h, &axpy(&lam, -0.5 * h, &k2), &xm, &um);
        let k4 = rhs(t - h, &axpy(&lam, -h, &k3), x0, u0);
        lam = rk4_combine(&lam, -h, &k1, &k2, &k3, &k4);

        if lam.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration {
                node: k,
                t: mesh.node(k),
            });
        }
        values[k] = lam;
    }
    Ok(Trajectory { mesh, values })
}

fn trapezoid(samples: impl Iterator<Item = f64>, h: f64) -> f64 {
    let mut sum = 0.0;
    let mut first = None;
    let mut last = 0.0;
    for v in samples {
        if first.is_none() {
            first = Some(v);
        }
        sum += v;
        last = v;
    }
    match first {
        Some(f) => h * (sum - 0.5 * (f + last)),
        None => 0.0,
    }
}

/// Composite trapezoidal rule over the running cost at each node.
pub fn cost_integral(
    states: &StateTrajectory,
    controls: &ControlTrajectory,
    w: &CostWeights,
) -> Result<f64> {
    if !states.same_mesh(controls) {
        return Err(Error::MeshMismatch);
    }
    let samples = states
        .values
        .iter()
        .zip(&controls.values)
        .map(|(x, u)| running_cost(&StateVec(*x), &ControlVec(*u), w));
    Ok(trapezoid(samples, states.mesh.step()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_forward(h: f64) -> f64 {
        let mesh = TimeMesh::with_step(0.0, 1.0, h).unwrap();
        let traj = integrate_forward(
            |_, x: &[f64; 1], _: &[f64; 0]| *x,
            [1.0],
            &Trajectory::zeros(mesh),
        )
        .unwrap();
        traj.last()[0]
    }

    #[test]
    fn exponential_growth() {
        // one RK4 step on x' = x multiplies by the degree-4 Taylor polynomial of e^h
        let h: f64 = 0.1;
        let amplification = 1.0 + h + h * h / 2.0 + h.powi(3) / 6.0 + h.powi(4) / 24.0;
        let x1 = exp_forward(h);
        assert!((x1 - amplification.powi(10)).abs() < 1e-13);
        assert!((x1 - std::f64::consts::E).abs() < 2.1e-6);
    }

    #[test]
    fn step_halving_shrinks_error_sixteenfold() {
        let e1 = (exp_forward(0.1) - std::f64::consts::E).abs();
        let e2 = (exp_forward(0.05) - std::f64::consts::E).abs();
        let ratio = e1 / e2;
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn zero_dynamics_hold_initial_value() {
        let mesh = TimeMesh::new(0.0, 5.0, 50).unwrap();
        let x0 = [1.5, -2.0, 3.25];
        let traj = integrate_forward(
            |_, _: &[f64; 3], _: &[f64; 0]| [0.0; 3],
            x0,
            &Trajectory::zeros(mesh),
        )
        .unwrap();
        assert_eq!(traj.values.len(), 51);
        assert!(traj.values.iter().all(|v| *v == x0));
    }

    #[test]
    fn backward_decay() {
        let mesh = TimeMesh::with_step(0.0, 1.0, 0.1).unwrap();
        let states: Trajectory<0> = Trajectory::zeros(mesh);
        let controls: Trajectory<0> = Trajectory::zeros(mesh);
        let lam = integrate_backward(
            |_, l: &[f64; 1], _: &[f64; 0], _: &[f64; 0]| *l,
            [1.0],
            &states,
            &controls,
        )
        .unwrap();
        assert!((lam.first()[0] - (-1.0f64).exp()).abs() < 1e-6);
        assert_eq!(lam.last()[0], 1.0);
    }

    #[test]
    fn backward_zero_terminal_is_bit_exact() {
        let mesh = TimeMesh::new(0.0, 2.0, 20).unwrap();
        let states: Trajectory<2> = Trajectory::constant(mesh, [3.0, 4.0]);
        let controls: Trajectory<1> = Trajectory::constant(mesh, [0.5]);
        let lam = integrate_backward(
            |_, _: &[f64; 2], _: &[f64; 2], _: &[f64; 1]| [0.0; 2],
            [0.0; 2],
            &states,
            &controls,
        )
        .unwrap();
        assert!(lam.values.iter().all(|v| *v == [0.0, 0.0]));
    }

    #[test]
    fn forward_uses_midpoint_controls() {
        // dx/dt = u(t) with u linear in t: RK4 with averaged midpoints is exact
        let mesh = TimeMesh::new(0.0, 2.0, 4).unwrap();
        let controls = Trajectory::from_values(mesh, mesh.nodes().map(|t| [t]).collect()).unwrap();
        let traj = integrate_forward(|_, _: &[f64; 1], u: &[f64; 1]| *u, [0.0], &controls).unwrap();
        for (t, v) in mesh.nodes().zip(&traj.values) {
            assert!((v[0] - 0.5 * t * t).abs() < 1e-14);
        }
    }

    #[test]
    fn blow_up_reports_node() {
        let mesh = TimeMesh::new(0.0, 10.0, 10).unwrap();
        let err = integrate_forward(
            |_, x: &[f64; 1], _: &[f64; 0]| [x[0] * x[0]],
            [10.0],
            &Trajectory::zeros(mesh),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Integration { .. }));
    }

    #[test]
    fn mesh_mismatch_is_rejected() {
        let a = TimeMesh::new(0.0, 1.0, 10).unwrap();
        let b = TimeMesh::new(0.0, 1.0, 20).unwrap();
        let s = StateTrajectory::zeros(a);
        let u = ControlTrajectory::zeros(b);
        assert!(matches!(
            cost_integral(&s, &u, &CostWeights::default()),
            Err(Error::MeshMismatch)
        ));
    }

    #[test]
    fn invalid_meshes() {
        assert!(TimeMesh::new(1.0, 1.0, 10).is_err());
        assert!(TimeMesh::new(0.0, 1.0, 0).is_err());
        assert!(TimeMesh::with_step(0.0, 1.0, -0.1).is_err());
        let m = TimeMesh::with_step(0.0, 100.0, 0.01).unwrap();
        assert_eq!(m.n_nodes(), 10_001);
        assert_eq!(m.node(m.n_steps), 100.0);
    }

    #[test]
    fn trapezoid_cases() {
        let w = CostWeights::default();
        let mesh = TimeMesh::new(0.0, 100.0, 1000).unwrap();
        let mut x = [0.0; N_STATE];
        x[StateVec::I] = 1.0;
        x[StateVec::B] = 1.0;
        let j = cost_integral(
            &Trajectory::constant(mesh, x),
            &ControlTrajectory::zeros(mesh),
            &w,
        )
        .unwrap();
        assert!((j - 200.0).abs() < 1e-9);

        let j = cost_integral(
            &StateTrajectory::zeros(mesh),
            &ControlTrajectory::zeros(mesh),
            &w,
        )
        .unwrap();
        assert_eq!(j, 0.0);

        for n in [1, 2, 7, 64] {
            let mesh = TimeMesh::new(0.0, 1.0, n).unwrap();
            let values = mesh
                .nodes()
                .map(|t| {
                    let mut x = [0.0; N_STATE];
                    x[StateVec::I] = t;
                    x
                })
                .collect();
            let states = Trajectory::from_values(mesh, values).unwrap();
            let j = cost_integral(&states, &ControlTrajectory::zeros(mesh), &w).unwrap();
            assert!((j - 0.5).abs() < 1e-15, "n={n}: {j}");
        }
    }
}
