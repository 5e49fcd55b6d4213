//! The nine-compartment Schwann cell / bacteria / cytokine model with its
//! eight drug controls.
//!
//! | Index | Symbol | Meaning |
//! |-------|--------|---------|
//! | 0 | S | susceptible Schwann cells |
//! | 1 | I | infected Schwann cells |
//! | 2 | B | bacterial load |
//! | 3 | I_γ | IFN-γ |
//! | 4 | T_α | TNF-α |
//! | 5 | I_10 | IL-10 |
//! | 6 | I_12 | IL-12 |
//! | 7 | I_15 | IL-15 |
//! | 8 | I_17 | IL-17 |
//!
//! Controls are ordered D11, D12, D13 (rifampin), D21, D22, D23 (dapsone),
//! D31, D33 (clofazimine). D13 and D23 act quadratically on the bacterial
//! load and are penalised cubically in the running cost.

mod params;

use std::fmt;
use std::str::FromStr;

pub use params::{rate_from_doubling_time, CostWeights, InitialPreset, ModelParams, ParamPreset};

use crate::error::{Error, Result};

pub const N_STATE: usize = 9;
pub const N_CONTROL: usize = 8;

/// Column labels for the state compartments, in storage order.
pub const STATE_LABELS: [&str; N_STATE] = [
    "S", "I", "B", "IFNg", "TNFa", "IL10", "IL12", "IL15", "IL17",
];

/// Compartment values in the fixed order (S, I, B, I_γ, T_α, I_10, I_12, I_15, I_17).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateVec(pub [f64; N_STATE]);

impl StateVec {
    pub const S: usize = 0;
    pub const I: usize = 1;
    pub const B: usize = 2;
    pub const IFN_GAMMA: usize = 3;
    pub const TNF_ALPHA: usize = 4;
    pub const IL10: usize = 5;
    pub const IL12: usize = 6;
    pub const IL15: usize = 7;
    pub const IL17: usize = 8;

    pub fn s(&self) -> f64 {
        self.0[Self::S]
    }

    pub fn i(&self) -> f64 {
        self.0[Self::I]
    }

    pub fn b(&self) -> f64 {
        self.0[Self::B]
    }

    pub fn ensure_finite(&self) -> Result<()> {
        ensure_finite(&self.0, "state")
    }
}

/// One adjoint variable per state compartment.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostateVec(pub [f64; N_STATE]);

impl CostateVec {
    pub fn ensure_finite(&self) -> Result<()> {
        ensure_finite(&self.0, "costate")
    }
}

/// The eight drug controls. There is no D32.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Control {
    D11,
    D12,
    D13,
    D21,
    D22,
    D23,
    D31,
    D33,
}

impl Control {
    pub const ALL: [Control; N_CONTROL] = [
        Control::D11,
        Control::D12,
        Control::D13,
        Control::D21,
        Control::D22,
        Control::D23,
        Control::D31,
        Control::D33,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Control::D11 => "D11",
            Control::D12 => "D12",
            Control::D13 => "D13",
            Control::D21 => "D21",
            Control::D22 => "D22",
            Control::D23 => "D23",
            Control::D31 => "D31",
            Control::D33 => "D33",
        }
    }

    pub fn drug(self) -> Drug {
        match self {
            Control::D11 | Control::D12 | Control::D13 => Drug::Rifampin,
            Control::D21 | Control::D22 | Control::D23 => Drug::Dapsone,
            Control::D31 | Control::D33 => Drug::Clofazimine,
        }
    }
}

impl fmt::Display for Control {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Control {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Control::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown control `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Drug {
    Rifampin,
    Dapsone,
    Clofazimine,
}

impl Drug {
    pub const ALL: [Drug; 3] = [Drug::Rifampin, Drug::Dapsone, Drug::Clofazimine];

    pub fn name(self) -> &'static str {
        match self {
            Drug::Rifampin => "rifampin",
            Drug::Dapsone => "dapsone",
            Drug::Clofazimine => "clofazimine",
        }
    }
}

impl FromStr for Drug {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Drug::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown drug `{s}`")))
    }
}

/// Control values in the order of [`Control::ALL`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlVec(pub [f64; N_CONTROL]);

impl ControlVec {
    pub fn get(&self, c: Control) -> f64 {
        self.0[c.index()]
    }

    pub fn set(&mut self, c: Control, value: f64) {
        self.0[c.index()] = value;
    }

    pub fn ensure_finite(&self) -> Result<()> {
        ensure_finite(&self.0, "control")
    }
}

/// Per-control upper limits; every lower limit is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlBounds(pub [f64; N_CONTROL]);

impl ControlBounds {
    pub fn uniform(max: f64) -> Self {
        ControlBounds([max; N_CONTROL])
    }

    pub fn max(&self, c: Control) -> f64 {
        self.0[c.index()]
    }

    pub fn validate(&self) -> Result<()> {
        for c in Control::ALL {
            let m = self.max(c);
            if !m.is_finite() || m < 0.0 {
                return Err(Error::Invalid(format!(
                    "upper bound for {c} must be finite and nonnegative, got {m}"
                )));
            }
        }
        Ok(())
    }
}

impl ControlBounds {
    /// Default limit on D33. Above the bacterial release rate `α` the
    /// release term `(α − D23² − D33) I` turns negative, B leaves the
    /// nonnegative orthant and the state diverges.
    pub const DEFAULT_D33_MAX: f64 = 0.2;
}

impl Default for ControlBounds {
    fn default() -> Self {
        let mut b = Self::uniform(1.0);
        b.0[Control::D33.index()] = Self::DEFAULT_D33_MAX;
        b
    }
}

/// Which costate system to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdjointForm {
    /// `-∂H/∂x` of the Hamiltonian, consistent with the control gradients.
    #[default]
    Derived,
    /// The printed system: carries an extra `I` factor on `μ_Iγ λ4` and
    /// drops the inhibition bracket from the `λ2` row.
    PaperVerbatim,
}

impl AdjointForm {
    pub fn name(self) -> &'static str {
        match self {
            AdjointForm::Derived => "derived",
            AdjointForm::PaperVerbatim => "paper-verbatim",
        }
    }
}

impl FromStr for AdjointForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "derived" => Ok(AdjointForm::Derived),
            "paper-verbatim" => Ok(AdjointForm::PaperVerbatim),
            other => Err(Error::Invalid(format!("unknown adjoint form `{other}`"))),
        }
    }
}

fn ensure_finite(values: &[f64], what: &'static str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::Domain { what, index }),
        None => Ok(()),
    }
}

/// Time derivative of the state. Rejects non-finite input.
pub fn state_rhs(t: f64, x: &StateVec, u: &ControlVec, p: &ModelParams) -> Result<StateVec> {
    if !t.is_finite() {
        return Err(Error::Domain {
            what: "time",
            index: 0,
        });
    }
    x.ensure_finite()?;
    u.ensure_finite()?;
    Ok(state_rhs_unchecked(x, u, p))
}

pub(crate) fn state_rhs_unchecked(x: &StateVec, u: &ControlVec, p: &ModelParams) -> StateVec {
    let [s, i, b, ig, ta, i10, i12, i15, i17] = x.0;
    let [d11, d12, d13, d21, d22, d23, d31, d33] = u.0;

    let infection = p.beta * s * b;
    let inhibition = p.delta_igamma_talpha * ta
        + p.delta_igamma_i12 * i12
        + p.delta_igamma_i15 * i15
        + p.delta_igamma_i17 * i17;

    StateVec([
        p.omega - infection - (p.gamma + p.mu1) * s - (d11 + d21 - d31) * s,
        infection - (p.delta + p.mu1 + d12 + d22) * i,
        (p.alpha - d23 * d23 - d33) * i - (p.y + p.mu2 + d13 * d13) * b,
        p.alpha_igamma * i - inhibition * i - p.mu_igamma * (ig - p.q_igamma),
        p.beta_talpha * ig * i - p.mu_talpha * (ta - p.q_talpha),
        p.alpha_i10 * i - p.delta_i10_igamma * ig - p.mu_i10 * (i10 - p.q_i10),
        p.beta_i12 * ig * i - p.mu_i12 * (i12 - p.q_i12),
        p.beta_i15 * ig * i - p.mu_i15 * (i15 - p.q_i15),
        p.beta_i17 * ig * i - p.mu_i17 * (i17 - p.q_i17),
    ])
}

/// Integrand of the cost functional.
pub fn running_cost(x: &StateVec, u: &ControlVec, w: &CostWeights) -> f64 {
    let [d11, d12, d13, d21, d22, d23, d31, d33] = u.0;
    x.i()
        + x.b()
        + w.p * (d11 * d11 + d12 * d12 + d13 * d13 * d13)
        + w.q * (d21 * d21 + d22 * d22 + d23 * d23 * d23)
        + w.r * (d31 * d31 + d33 * d33)
}

/// Running cost plus the costate-weighted dynamics.
pub fn hamiltonian(
    x: &StateVec,
    lam: &CostateVec,
    u: &ControlVec,
    p: &ModelParams,
    w: &CostWeights,
) -> f64 {
    let f = state_rhs_unchecked(x, u, p);
    running_cost(x, u, w) + dot(&lam.0, &f.0)
}

fn dot(a: &[f64; N_STATE], b: &[f64; N_STATE]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Time derivative of the costate.
pub fn adjoint_rhs(
    _t: f64,
    lam: &CostateVec,
    x: &StateVec,
    u: &ControlVec,
    p: &ModelParams,
    form: AdjointForm,
) -> CostateVec {
    let [s, i, b, ig, ta, _, i12, i15, i17] = x.0;
    let [l1, l2, l3, l4, l5, l6, l7, l8, l9] = lam.0;
    let [d11, d12, d13, d21, d22, d23, d31, d33] = u.0;

    let inhibition = p.delta_igamma_talpha * ta
        + p.delta_igamma_i12 * i12
        + p.delta_igamma_i15 * i15
        + p.delta_igamma_i17 * i17;

    let (l4_from_i, l4_decay) = match form {
        AdjointForm::Derived => (-(p.alpha_igamma - inhibition) * l4, p.mu_igamma * l4),
        AdjointForm::PaperVerbatim => (-p.alpha_igamma * l4, p.mu_igamma * i * l4),
    };

    CostateVec([
        (p.beta * b + p.mu1 + p.gamma + d11 + d21 - d31) * l1 - p.beta * b * l2,
        (p.mu1 + p.delta + d12 + d22) * l2 - (p.alpha - d23 * d23 - d33) * l3 + l4_from_i
            - p.beta_talpha * ig * l5
            - p.alpha_i10 * l6
            - p.beta_i12 * ig * l7
            - p.beta_i15 * ig * l8
            - p.beta_i17 * ig * l9
            - 1.0,
        p.beta * s * l1 - p.beta * s * l2 + (p.y + p.mu2 + d13 * d13) * l3 - 1.0,
        l4_decay - p.beta_talpha * i * l5 + p.delta_i10_igamma * l6
            - p.beta_i12 * i * l7
            - p.beta_i15 * i * l8
            - p.beta_i17 * i * l9,
        p.delta_igamma_talpha * i * l4 + p.mu_talpha * l5,
        p.mu_i10 * l6,
        p.delta_igamma_i12 * i * l4 + p.mu_i12 * l7,
        p.delta_igamma_i15 * i * l4 + p.mu_i15 * l8,
        p.delta_igamma_i17 * i * l4 + p.mu_i17 * l9,
    ])
}

/// `∂H/∂D` for each control, in the order of [`Control::ALL`].
pub fn control_gradient(
    x: &StateVec,
    lam: &CostateVec,
    u: &ControlVec,
    w: &CostWeights,
) -> ControlVec {
    let (s, i, b) = (x.s(), x.i(), x.b());
    let [l1, l2, l3, ..] = lam.0;
    let [d11, d12, d13, d21, d22, d23, d31, d33] = u.0;
    ControlVec([
        2.0 * w.p * d11 - l1 * s,
        2.0 * w.p * d12 - l2 * i,
        3.0 * w.p * d13 * d13 - 2.0 * l3 * d13 * b,
        2.0 * w.q * d21 - l1 * s,
        2.0 * w.q * d22 - l2 * i,
        3.0 * w.q * d23 * d23 - 2.0 * l3 * d23 * i,
        2.0 * w.r * d31 + l1 * s,
        2.0 * w.r * d33 - l3 * i,
    ])
}

/// Projects every entry onto `[0, max]`.
pub fn clamp_controls(u: &ControlVec, bounds: &ControlBounds) -> ControlVec {
    let mut out = *u;
    for (v, &max) in out.0.iter_mut().zip(&bounds.0) {
        // written so that NaN maps to 0
        *v = if *v > 0.0 { v.min(max) } else { 0.0 };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preset() -> ModelParams {
        ModelParams::section_5_2()
    }

    fn sample_state() -> StateVec {
        StateVec([310.0, 42.0, 17.0, 3.5, 8.0, 0.7, 4.0, 2.5, 6.0])
    }

    fn sample_costate() -> CostateVec {
        CostateVec([0.3, -1.2, 2.0, 0.4, -0.6, 1.1, 0.9, -0.2, 0.5])
    }

    fn sample_controls() -> ControlVec {
        ControlVec([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8])
    }

    #[test]
    fn zero_state_leaves_source_terms() {
        let f = state_rhs(0.0, &StateVec::default(), &ControlVec::default(), &preset()).unwrap();
        assert_eq!(f.0[StateVec::S], 20.9);
        assert!((f.0[StateVec::IFN_GAMMA] - 0.216).abs() < 1e-15);
    }

    #[test]
    fn ifn_gamma_rests_at_baseline_without_infection() {
        let p = preset();
        let mut x = sample_state();
        x.0[StateVec::I] = 0.0;
        x.0[StateVec::IFN_GAMMA] = p.q_igamma;
        let f = state_rhs(0.0, &x, &ControlVec::default(), &p).unwrap();
        assert_eq!(f.0[StateVec::IFN_GAMMA], 0.0);
    }

    #[test]
    fn susceptible_derivative_at_simulation_start() {
        let x = InitialPreset::Simulation.state();
        let f = state_rhs(0.0, &x, &ControlVec::default(), &preset()).unwrap();
        // 20.9 - 0.3*520*250 - 0.01795*520 - 0.00018*520
        assert!((f.0[StateVec::S] - (-38988.5276)).abs() < 1e-9);
    }

    #[test]
    fn non_finite_input_is_a_domain_error() {
        let mut x = sample_state();
        x.0[4] = f64::NAN;
        let err = state_rhs(0.0, &x, &ControlVec::default(), &preset()).unwrap_err();
        assert!(matches!(
            err,
            Error::Domain {
                what: "state",
                index: 4
            }
        ));

        let mut u = ControlVec::default();
        u.0[2] = f64::INFINITY;
        let err = state_rhs(0.0, &sample_state(), &u, &preset()).unwrap_err();
        assert!(matches!(
            err,
            Error::Domain {
                what: "control",
                index: 2
            }
        ));
    }

    #[test]
    fn running_cost_terms() {
        let w = CostWeights::default();
        assert_eq!(
            running_cost(&StateVec::default(), &ControlVec::default(), &w),
            0.0
        );

        let mut x = StateVec::default();
        x.0[StateVec::I] = 1.0;
        x.0[StateVec::B] = 2.0;
        assert_eq!(running_cost(&x, &ControlVec::default(), &w), 3.0);

        let mut u = ControlVec::default();
        u.set(Control::D13, 2.0);
        assert_eq!(running_cost(&StateVec::default(), &u, &w), 8.0);
    }

    #[test]
    fn hamiltonian_identities() {
        let p = preset();
        let w = CostWeights::default();
        let (x, u) = (sample_state(), sample_controls());
        assert_eq!(
            hamiltonian(&x, &CostateVec::default(), &u, &p, &w),
            running_cost(&x, &u, &w)
        );

        let mut lam = CostateVec::default();
        lam.0[0] = 1.0;
        let h = hamiltonian(&StateVec::default(), &lam, &ControlVec::default(), &p, &w);
        assert_eq!(h, 20.9);

        let lam = sample_costate();
        let f = state_rhs(0.0, &x, &u, &p).unwrap();
        let expected = running_cost(&x, &u, &w) + dot(&lam.0, &f.0);
        assert_eq!(hamiltonian(&x, &lam, &u, &p, &w), expected);
    }

    #[test]
    fn zero_costate_leaves_lagrangian_terms() {
        for form in [AdjointForm::Derived, AdjointForm::PaperVerbatim] {
            let d = adjoint_rhs(
                0.0,
                &CostateVec::default(),
                &sample_state(),
                &sample_controls(),
                &preset(),
                form,
            );
            assert_eq!(d.0, [0.0, -1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn il10_costate_is_pure_decay() {
        let p = preset();
        let lam = sample_costate();
        let d = adjoint_rhs(
            0.0,
            &lam,
            &sample_state(),
            &sample_controls(),
            &p,
            AdjointForm::Derived,
        );
        assert_eq!(d.0[5], p.mu_i10 * lam.0[5]);
    }

    #[test]
    fn verbatim_form_differs_only_in_rows_two_and_four() {
        let p = preset();
        let (x, lam, u) = (sample_state(), sample_costate(), sample_controls());
        let a = adjoint_rhs(0.0, &lam, &x, &u, &p, AdjointForm::Derived);
        let b = adjoint_rhs(0.0, &lam, &x, &u, &p, AdjointForm::PaperVerbatim);
        let inhibition = p.delta_igamma_talpha * x.0[4]
            + p.delta_igamma_i12 * x.0[6]
            + p.delta_igamma_i15 * x.0[7]
            + p.delta_igamma_i17 * x.0[8];
        for k in [0, 2, 4, 5, 6, 7, 8] {
            assert_eq!(a.0[k], b.0[k], "row {k}");
        }
        assert!((a.0[1] - b.0[1] - inhibition * lam.0[3]).abs() < 1e-12);
        let l4 = lam.0[3];
        assert!((b.0[3] - a.0[3] - p.mu_igamma * l4 * (x.i() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn gradient_examples() {
        let w = CostWeights::default();
        let mut x = StateVec::default();
        x.0[StateVec::S] = 10.0;
        let mut lam = CostateVec::default();
        lam.0[0] = 1.0;
        let g = control_gradient(&x, &lam, &ControlVec::default(), &w);
        assert_eq!(g.get(Control::D31), 10.0);

        let g = control_gradient(
            &sample_state(),
            &CostateVec::default(),
            &ControlVec::default(),
            &w,
        );
        assert_eq!(g.0, [0.0; N_CONTROL]);
    }

    #[test]
    fn clamp_examples() {
        let bounds = ControlBounds::uniform(1.0);
        let mut u = sample_controls();
        u.0[0] = -0.5;
        assert_eq!(clamp_controls(&u, &bounds).0[0], 0.0);

        let inside = sample_controls();
        assert_eq!(clamp_controls(&inside, &bounds), inside);

        let mut u = ControlVec::default();
        u.set(Control::D22, 5.0);
        assert_eq!(clamp_controls(&u, &bounds).get(Control::D22), 1.0);
    }

    #[test]
    fn control_names_parse() {
        for c in Control::ALL {
            assert_eq!(c.name().parse::<Control>().unwrap(), c);
        }
        assert!("D32".parse::<Control>().is_err());
    }

    #[test]
    fn boundary_signs_under_zero_control() {
        let p = preset();
        let u = ControlVec::default();
        let mut x = sample_state();
        x.0[StateVec::S] = 0.0;
        assert_eq!(state_rhs(0.0, &x, &u, &p).unwrap().0[0], p.omega);

        let mut x = sample_state();
        x.0[StateVec::I] = 0.0;
        assert!(state_rhs(0.0, &x, &u, &p).unwrap().0[1] >= 0.0);

        let mut x = sample_state();
        x.0[StateVec::B] = 0.0;
        assert!(state_rhs(0.0, &x, &u, &p).unwrap().0[2] >= 0.0);
    }
}
