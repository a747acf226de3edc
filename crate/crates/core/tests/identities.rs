use proptest::prelude::*;
use ptt_core::field::{FieldComponents, SYM_WEIGHTS};
use ptt_core::integrator::{step_with_dt, Scheme, StepperConfig};
use ptt_core::lp::ShellRange;
use ptt_core::model::{q_bilinear, sym_grad, trace_rhs_residual};
use ptt_core::ops::{leray_project, tensor_divergence};
use ptt_core::random::RandomFields;
use ptt_core::{DyadicBank, Grid, ModelParams, ScalarField, SimState, TensorField};

fn grid() -> Grid {
    Grid::new(8).unwrap()
}

fn random_state(seed: u64, amplitude: f64) -> SimState {
    let g = grid();
    let mut rf = RandomFields::new(seed);
    let mut u = rf.solenoidal(&g).scaled(amplitude);
    u.solenoidal = true;
    SimState {
        u,
        sigma: rf.sym_tensor(&g).scaled(amplitude),
        t: 0.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn corotational_part_is_traceless(seed in 0u64..10_000) {
        let s = random_state(seed, 1.0);
        let q = q_bilinear(&s.sigma, &s.u, 0.0);
        prop_assert!(q.trace().max_coeff() < 1e-12);
    }

    #[test]
    fn coupling_terms_cancel(seed in 0u64..10_000) {
        let s = random_state(seed, 1.0);
        let a = leray_project(&tensor_divergence(&s.sigma)).inner(&s.u);
        let d = sym_grad(&s.u);
        let b: f64 = (0..6).map(|c| SYM_WEIGHTS[c] * d.comps[c].inner(&s.sigma.comps[c])).sum();
        prop_assert!((a + b).abs() <= 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn trace_obeys_transport_riccati(seed in 0u64..10_000, t in 0.0f64..3.0) {
        let mut s = random_state(seed, 0.3);
        s.t = t;
        let r = trace_rhs_residual(&s, &ModelParams::paper(1.0)).unwrap();
        prop_assert!(r < 1e-12, "residual {r:e}");
    }

    #[test]
    fn blocks_reconstruct_tensor_fields(seed in 0u64..10_000) {
        let g = grid();
        let bank = DyadicBank::new(&g, 1).unwrap();
        let f = RandomFields::new(seed).with_radius(100.0).sym_tensor(&g);
        let low = bank.low_part(&f);
        let high = bank.high_part(&f);
        let sum = low.add(&high);
        prop_assert!(sum.max_abs_diff(&f) < 1e-13);
        let mut total = TensorField::zeros(&g);
        for j in bank.shells(ShellRange::All) {
            total = total.add(&bank.block(&f, j));
        }
        prop_assert!(total.max_abs_diff(&f) < 1e-13);
    }
}

/// Self-convergence of IF-RK2 on a genuinely nonlinear state: differences
/// between successive halvings shrink by about four.
#[test]
fn heun_self_convergence_on_nonlinear_state() {
    let params = ModelParams::paper(1.0);
    let cfg = StepperConfig {
        scheme: Scheme::IfRk2,
        ..StepperConfig::default()
    };
    let s0 = random_state(5, 0.5);
    let t_end = 0.08;
    let solve = |dt: f64| {
        let mut s = s0.clone();
        for _ in 0..(t_end / dt).round() as usize {
            s = step_with_dt(&s, &cfg, &params, dt).unwrap();
        }
        s
    };
    let sols: Vec<SimState> = [8e-3, 4e-3, 2e-3, 1e-3].iter().map(|&dt| solve(dt)).collect();
    let diff = |a: &SimState, b: &SimState| a.u.max_abs_diff(&b.u).max(a.sigma.max_abs_diff(&b.sigma));
    let d: Vec<f64> = sols.windows(2).map(|w| diff(&w[0], &w[1])).collect();
    for w in d.windows(2) {
        let ratio = w[0] / w[1];
        assert!(ratio > 3.5 && ratio < 4.6, "ratios from differences {d:?}");
    }
}

#[test]
fn zero_state_stays_zero() {
    let g = grid();
    let params = ModelParams::paper(2.0);
    let mut s = SimState::zeros(&g);
    for _ in 0..20 {
        s = step_with_dt(&s, &StepperConfig::default(), &params, 0.05).unwrap();
    }
    assert_eq!(s.u.max_coeff(), 0.0);
    assert_eq!(s.sigma.max_coeff(), 0.0);
    assert!((s.t - 1.0).abs() < 1e-12);
}

#[test]
fn scalar_blocks_sum_with_mean() {
    let g = Grid::new(16).unwrap();
    let bank = DyadicBank::new(&g, 2).unwrap();
    let f = ScalarField::from_fn(&g, |x| 1.5 + (x[0] + 2.0 * x[1]).sin() * (5.0 * x[2]).cos());
    let mut sum = ScalarField::constant(&g, f.mean());
    for j in bank.shells(ShellRange::All) {
        sum.axpy(1.0, &bank.block(&f, j));
    }
    assert!(sum.max_abs_diff(&f) < 1e-13);
}
