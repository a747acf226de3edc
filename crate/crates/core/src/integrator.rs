//! Integrating-factor Runge-Kutta steppers for the perturbation system.
//!
//! The diagonal linear part is integrated exactly: `exp(-mu |k|^2 dt)` on the
//! velocity, and on the stress the deviatoric part is scaled by
//! `(1/c0 + t0)/(1/c0 + t1)` and the trace part by its square. The velocity
//! and stress coupling (`div sigma`, `D(u)`) stays in the explicit stages.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldComponents, TensorField, VectorField};
use crate::lp::lp_norm;
use crate::model::{explicit_perturbation_with, ModelParams, SimState};
use crate::ops::leray_project;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Heun with integrating factors.
    #[default]
    IfRk2,
    /// Classical RK4 with integrating factors (Lawson).
    IfRk4,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepperConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub dealias: bool,
    pub cfl_safety: f64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            scheme: Scheme::IfRk2,
            dealias: true,
            cfl_safety: 0.5,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "cfl_safety = {} must lie in (0, 1]",
                self.cfl_safety
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowUpKind {
    NonFinite,
    TraceTimestep,
    TraceThreshold,
    StepCollapse,
}

/// Structured report for a step that left the representable regime.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowUp {
    pub kind: BlowUpKind,
    /// Start of the offending step.
    pub t: f64,
    pub dt: f64,
    pub max_abs_trace: f64,
}

impl fmt::Display for BlowUp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            BlowUpKind::NonFinite => "non-finite values",
            BlowUpKind::TraceTimestep => "max|tr sigma| * dt > 1",
            BlowUpKind::TraceThreshold => "trace beyond threshold",
            BlowUpKind::StepCollapse => "time step collapsed",
        };
        write!(
            f,
            "blow-up ({what}) at t = {:.6} (dt = {:.3e}, max|tr| = {:.3e})",
            self.t, self.dt, self.max_abs_trace
        )
    }
}

/// `(deviatoric, trace)` damping factors over `[t0, t1]`.
pub fn damping_factors(t0: f64, t1: f64, c0: f64) -> Result<(f64, f64)> {
    if t1 < t0 {
        return Err(Error::TimeReversed { last: t0, got: t1 });
    }
    let f = (1.0 / c0 + t0) / (1.0 / c0 + t1);
    Ok((f, f * f))
}

#[derive(Clone)]
struct Pair {
    u: VectorField,
    s: TensorField,
}

impl Pair {
    fn axpy(&mut self, a: f64, o: &Pair) {
        self.u.axpy(a, &o.u);
        self.s.axpy(a, &o.s);
    }

    fn plus(&self, a: f64, o: &Pair) -> Pair {
        let mut p = self.clone();
        p.axpy(a, o);
        p
    }
}

/// Exact solution operator of the diagonal linear part from `t0` to `t1`.
fn propagate(x: &Pair, t0: f64, t1: f64, params: &ModelParams) -> Pair {
    let g = x.u.grid().clone();
    let h = t1 - t0;
    let visc = params.mu * h;
    let u = x.u.map_components(|c| {
        c.multiplied(|idx| {
            let k = g.wavenumber_norm(idx);
            (-visc * k * k).exp()
        })
    });
    let mut u = u;
    u.solenoidal = x.u.solenoidal;
    let (f, f2) = damping_factors(t0, t1, params.c0).expect("ordered stage times");
    let mut s = x.s.scaled(f);
    s.add_isotropic((f2 - f) / 3.0, &x.s.trace());
    Pair { u, s }
}

fn explicit(x: &Pair, t: f64, params: &ModelParams, dealias: bool) -> Result<Pair> {
    let state = SimState {
        u: x.u.clone(),
        sigma: x.s.clone(),
        t,
    };
    let (u, s) = explicit_perturbation_with(&state, params, dealias)?;
    Ok(Pair { u, s })
}

/// Largest grid value of `|tr sigma|`.
pub fn max_abs_trace(sigma: &TensorField) -> f64 {
    lp_norm(&sigma.trace(), f64::INFINITY)
}

/// Advance by `cfg.dt`. Non-finite output, or `max|tr sigma| dt > 1`, is
/// reported as [`Error::BlowUp`].
pub fn step(state: &SimState, cfg: &StepperConfig, params: &ModelParams) -> Result<SimState> {
    step_with_dt(state, cfg, params, cfg.dt)
}

pub fn step_with_dt(state: &SimState, cfg: &StepperConfig, params: &ModelParams, dt: f64) -> Result<SimState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt = {dt} must be positive")));
    }
    let t0 = state.t;
    let t1 = t0 + dt;
    let x0 = Pair {
        u: state.u.clone(),
        s: state.sigma.clone(),
    };
    let rhs = |x: &Pair, t: f64| explicit(x, t, params, cfg.dealias);
    let x1 = match cfg.scheme {
        Scheme::IfRk2 => {
            let k1 = rhs(&x0, t0)?;
            let xp = propagate(&x0.plus(dt, &k1), t0, t1, params);
            let k2 = rhs(&xp, t1)?;
            let mut x1 = propagate(&x0.plus(0.5 * dt, &k1), t0, t1, params);
            x1.axpy(0.5 * dt, &k2);
            x1
        }
        Scheme::IfRk4 => {
            let th = t0 + 0.5 * dt;
            let k1 = rhs(&x0, t0)?;
            let a = propagate(&x0.plus(0.5 * dt, &k1), t0, th, params);
            let k2 = rhs(&a, th)?;
            let x0h = propagate(&x0, t0, th, params);
            let b = x0h.plus(0.5 * dt, &k2);
            let k3 = rhs(&b, th)?;
            let c = propagate(&x0h.plus(dt, &k3), th, t1, params);
            let k4 = rhs(&c, t1)?;
            // x1 = P(t0,t1)(x0 + dt/6 k1) + P(th,t1)(dt/3 (k2 + k3)) + dt/6 k4
            let mut mid = k2.clone();
            mid.axpy(1.0, &k3);
            let mut x1 = propagate(&x0.plus(dt / 6.0, &k1), t0, t1, params);
            x1.axpy(dt / 3.0, &propagate(&mid, th, t1, params));
            x1.axpy(dt / 6.0, &k4);
            x1
        }
    };
    let u = leray_project(&x1.u);
    let next = SimState { u, sigma: x1.s, t: t1 };
    if !next.is_finite() {
        return Err(Error::BlowUp(BlowUp {
            kind: BlowUpKind::NonFinite,
            t: t0,
            dt,
            max_abs_trace: f64::NAN,
        }));
    }
    let tr = max_abs_trace(&next.sigma);
    if tr * dt > 1.0 {
        return Err(Error::BlowUp(BlowUp {
            kind: BlowUpKind::TraceTimestep,
            t: t0,
            dt,
            max_abs_trace: tr,
        }));
    }
    Ok(next)
}

/// `min(cfl h / max|u|, cfl / max|tr sigma|, dt)`, with the configured `dt`
/// acting as the ceiling.
pub fn suggest_dt(state: &SimState, cfg: &StepperConfig) -> f64 {
    let h = state.grid().spacing();
    let umax = lp_norm(&state.u, f64::INFINITY);
    let trmax = max_abs_trace(&state.sigma);
    let mut dt = cfg.dt;
    if umax > 0.0 {
        dt = dt.min(cfg.cfl_safety * h / umax);
    }
    if trmax > 0.0 {
        dt = dt.min(cfg.cfl_safety / trmax);
    }
    dt
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ScalarField;
    use crate::grid::Grid;
    use crate::ops::divergence;
    use crate::random::RandomFields;

    #[test]
    fn damping_factor_examples() {
        assert_eq!(damping_factors(0.3, 0.3, 2.0).unwrap(), (1.0, 1.0));
        let (f, f2) = damping_factors(0.0, 1.0, 1.0).unwrap();
        assert!((f - 0.5).abs() < 1e-15 && (f2 - 0.25).abs() < 1e-15);
        for (t0, t1, c0) in [(0.0, 0.1, 3.0), (1.0, 7.5, 0.2)] {
            let (f, f2) = damping_factors(t0, t1, c0).unwrap();
            assert_eq!(f2, f * f);
        }
        assert!(damping_factors(1.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = Grid::new(8).unwrap();
        let p = ModelParams::paper(1.0);
        for scheme in [Scheme::IfRk2, Scheme::IfRk4] {
            let cfg = StepperConfig {
                dt: 0.01,
                scheme,
                ..Default::default()
            };
            let s = step(&SimState::zeros(&g), &cfg, &p).unwrap();
            assert_eq!(s.u.max_coeff() + s.sigma.max_coeff(), 0.0);
            assert!((s.t - 0.01).abs() < 1e-16);
        }
    }

    /// High-accuracy solution of `y' = -2y/(1/c0 + t) - 3y^2` by many RK4 substeps.
    fn scalar_oracle(y0: f64, t0: f64, t1: f64, c0: f64) -> f64 {
        let f = |t: f64, y: f64| -2.0 * y / (1.0 / c0 + t) - 3.0 * y * y;
        let m = 20_000;
        let h = (t1 - t0) / m as f64;
        let mut y = y0;
        for i in 0..m {
            let t = t0 + i as f64 * h;
            let k1 = f(t, y);
            let k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
            let k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
            let k4 = f(t + h, y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        y
    }

    #[test]
    fn isotropic_stress_local_order() {
        let g = Grid::new(8).unwrap();
        let p = ModelParams::paper(1.0);
        let c = 0.3;
        for (scheme, order) in [(Scheme::IfRk2, 3.0), (Scheme::IfRk4, 5.0)] {
            let errs: Vec<f64> = [0.1, 0.05]
                .iter()
                .map(|&dt| {
                    let state = SimState {
                        u: VectorField::zeros(&g),
                        sigma: TensorField::identity(&g, c),
                        t: 0.2,
                    };
                    let cfg = StepperConfig {
                        dt,
                        scheme,
                        ..Default::default()
                    };
                    let next = step(&state, &cfg, &p).unwrap();
                    let got = next.sigma.comps[0].mean();
                    (got - scalar_oracle(c, 0.2, 0.2 + dt, 1.0)).abs()
                })
                .collect();
            let observed = (errs[0] / errs[1]).log2();
            assert!(observed > order - 0.3, "{scheme:?}: local order {observed}");
        }
    }

    #[test]
    fn deviatoric_mode_follows_damping_law() {
        let g = Grid::new(8).unwrap();
        let p = ModelParams::paper(2.0);
        let amp = 1e-9;
        let mode = ScalarField::from_fn(&g, |x| amp * (x[0] + x[1]).cos());
        let mut sigma = TensorField::zeros(&g);
        sigma.comps[1] = mode.clone();
        let mut state = SimState {
            u: VectorField::zeros(&g),
            sigma,
            t: 0.0,
        };
        let cfg = StepperConfig {
            dt: 0.01,
            scheme: Scheme::IfRk2,
            ..Default::default()
        };
        for _ in 0..20 {
            state = step(&state, &cfg, &p).unwrap();
        }
        // the coupling into u is O(amp) and feeds back at O(amp dt^2)
        let (f, _) = damping_factors(0.0, state.t, 2.0).unwrap();
        let expect = mode.scaled(f);
        assert!(state.sigma.comps[1].max_abs_diff(&expect) < 1e-10 * amp.max(1.0) * 1e-2);
    }

    #[test]
    fn steps_keep_velocity_solenoidal() {
        let g = Grid::new(16).unwrap();
        let mut rf = RandomFields::new(3);
        let state = SimState {
            u: rf.solenoidal(&g).scaled(0.1),
            sigma: rf.sym_tensor(&g).scaled(0.1),
            t: 0.0,
        };
        let cfg = StepperConfig::default();
        let next = step(&state, &cfg, &ModelParams::paper(1.0)).unwrap();
        assert!(divergence(&next.u).max_coeff() <= 1e-12 * next.u.max_coeff());
        let again = step(&state, &cfg, &ModelParams::paper(1.0)).unwrap();
        assert_eq!(again.u.max_abs_diff(&next.u), 0.0);
        assert_eq!(again.sigma.max_abs_diff(&next.sigma), 0.0);
    }

    #[test]
    fn suggest_dt_behaviour() {
        let g = Grid::new(8).unwrap();
        let cfg = StepperConfig {
            dt: 0.02,
            ..Default::default()
        };
        assert_eq!(suggest_dt(&SimState::zeros(&g), &cfg), 0.02);
        let u = VectorField::from_fn(&g, |x| [100.0 * x[1].sin(), 0.0, 0.0]);
        let mut state = SimState {
            u,
            ..SimState::zeros(&g)
        };
        let a = suggest_dt(&state, &cfg);
        state.u = state.u.scaled(2.0);
        let b = suggest_dt(&state, &cfg);
        assert!((b - 0.5 * a).abs() < 1e-15);
        state.sigma = TensorField::identity(&g, 1e8);
        assert!(suggest_dt(&state, &cfg) < 1e-8);
    }

    #[test]
    fn large_trace_is_reported() {
        let g = Grid::new(8).unwrap();
        let state = SimState {
            sigma: TensorField::identity(&g, 100.0),
            ..SimState::zeros(&g)
        };
        let cfg = StepperConfig {
            dt: 0.05,
            ..Default::default()
        };
        match step(&state, &cfg, &ModelParams::paper(1.0)) {
            Err(Error::BlowUp(b)) => assert!(b.t == 0.0 && b.dt == 0.05),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }
}
