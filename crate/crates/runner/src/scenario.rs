//! Initial data for each scenario.

use std::f64::consts::PI;

use num_complex::Complex64;
use ptt_core::diagnostics::energy_e0;
use ptt_core::field::FieldComponents;
use ptt_core::ops::leray_project;
use ptt_core::random::RandomFields;
use ptt_core::{DyadicBank, Grid, ScalarField, SimState, TensorField, VectorField};

use crate::config::{ModeField, RunConfig, Scenario};
use crate::error::RunnerError;

/// Profile with a flat minimum of `-1` at `s = 0` relative to its mean:
/// `(4 cos s - cos 2s + 5) / 8` equals 1 at `s = 0`, 0 at `s = pi`, and
/// `1 - s^4 / 16 + O(s^6)` near the peak.
pub fn bump(s: f64) -> f64 {
    (4.0 * s.cos() - (2.0 * s).cos() + 5.0) / 8.0
}

/// Peak profile centred at `(pi, pi, pi)`: the average of [`bump`] over the
/// three axes.
pub fn peak_profile(x: [f64; 3]) -> f64 {
    x.iter().map(|&xi| bump(xi - PI)).sum::<f64>() / 3.0
}

/// Builds `(u0, sigma0)` at `t = 0`.
pub fn build_initial_data(cfg: &RunConfig, grid: &Grid, bank: &DyadicBank) -> Result<SimState, RunnerError> {
    let mut state = SimState::zeros(grid);
    match &cfg.scenario {
        Scenario::SpecialSolution => {}
        Scenario::SmallData { delta0 } => {
            let mut rf = RandomFields::new(cfg.seed);
            state.u = rf.solenoidal(grid);
            state.sigma = rf.sym_tensor(grid);
            rescale_to(&mut state, bank, cfg.p, *delta0)?;
        }
        Scenario::NegativeTraceBlowup {
            min_trace,
            velocity_amplitude,
        } => {
            let c0 = cfg.model.c0;
            let depth = c0 - min_trace;
            // tr tau0 = c0 - depth * W, so tr sigma0 = -depth * W.
            let g = ScalarField::from_fn(grid, |x| -depth * peak_profile(x));
            state.sigma = TensorField::isotropic(&g.scaled(1.0 / 3.0));
            if *velocity_amplitude > 0.0 {
                let u = RandomFields::new(cfg.seed).solenoidal(grid);
                let umax = ptt_core::lp::lp_norm(&u, f64::INFINITY);
                state.u = u.scaled(velocity_amplitude / umax);
                state.u.solenoidal = true;
            }
        }
        Scenario::Custom { modes, delta0 } => {
            let n3 = grid.size();
            let mut u: [Vec<Complex64>; 3] = std::array::from_fn(|_| vec![Complex64::new(0.0, 0.0); n3]);
            let mut s: [Vec<Complex64>; 6] = std::array::from_fn(|_| vec![Complex64::new(0.0, 0.0); n3]);
            for m in modes {
                let target = match m.field {
                    ModeField::U => &mut u[m.component],
                    ModeField::Sigma => &mut s[m.component],
                };
                // a cos(k.x + phi) = a/2 e^{i phi} e^{ik.x} + c.c.
                let half = 0.5 * m.amplitude * Complex64::from_polar(1.0, m.phase);
                let neg = [-m.k[0], -m.k[1], -m.k[2]];
                if m.k == [0, 0, 0] {
                    target[0] += Complex64::new(m.amplitude * m.phase.cos(), 0.0);
                } else {
                    target[grid.index_of(m.k)] += half;
                    target[grid.index_of(neg)] += half.conj();
                }
            }
            let mut u_it = u.into_iter();
            state.u = leray_project(&VectorField::new(std::array::from_fn(|_| {
                ScalarField::from_coeffs(grid, u_it.next().expect("three"))
            })));
            let mut s_it = s.into_iter();
            state.sigma = TensorField::new(std::array::from_fn(|_| {
                ScalarField::from_coeffs(grid, s_it.next().expect("six"))
            }));
            if let Some(d) = delta0 {
                rescale_to(&mut state, bank, cfg.p, *d)?;
            }
        }
    }
    Ok(state)
}

fn rescale_to(state: &mut SimState, bank: &DyadicBank, p: f64, delta0: f64) -> Result<(), RunnerError> {
    let e = energy_e0(bank, &state.u, &state.sigma, p)?;
    if !(e > 0.0) {
        return Err(RunnerError::Config("initial data has zero energy; cannot rescale".into()));
    }
    let a = delta0 / e;
    let sol = state.u.solenoidal;
    state.u = state.u.scaled(a);
    state.u.solenoidal = sol;
    state.sigma = state.sigma.scaled(a);
    Ok(())
}

/// Minimum over the grid of `tr tau0 = tr sigma0 + c0`.
pub fn min_initial_trace(state: &SimState, c0: f64) -> f64 {
    let tr = state.sigma.trace().to_physical();
    tr.iter().fold(f64::INFINITY, |m, &v| m.min(v)) + c0
}
