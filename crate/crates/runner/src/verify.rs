//! Self-verification suites: each check compares a computed quantity with
//! an independent reference at a fixed tolerance.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use ptt_core::field::{FieldComponents, SYM_INDEX, SYM_PAIRS, SYM_WEIGHTS};
use ptt_core::integrator::{damping_factors, step_with_dt, Scheme, StepperConfig};
use ptt_core::lp::ShellRange;
use ptt_core::model::{q_bilinear, rhs_original, rhs_perturbation, special_trace, sym_grad};
use ptt_core::ops::{divergence_defect, fractional_lambda, gradient, leray_project, tensor_divergence};
use ptt_core::random::RandomFields;
use ptt_core::{DyadicBank, Grid, ModelParams, ScalarField, SimState, TensorField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::RunnerError;
use crate::probes::{self, ProbeOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub suite: String,
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    /// Pass when `value <= tolerance`.
    pub fn at_most(suite: &str, name: &str, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self {
            suite: suite.into(),
            name: name.into(),
            pass: value <= tolerance,
            value,
            tolerance,
            detail: detail.into(),
        }
    }

    /// Pass when `value >= tolerance`.
    pub fn at_least(suite: &str, name: &str, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self {
            pass: value >= tolerance,
            ..Self::at_most(suite, name, value, tolerance, detail)
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}/{}: value {:.3e} (tolerance {:.3e}) {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.value,
            self.tolerance,
            self.detail
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Operators,
    Lp,
    Model,
    Integrator,
    Probes,
    All,
}

impl FromStr for Suite {
    type Err = RunnerError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "operators" => Suite::Operators,
            "lp" => Suite::Lp,
            "model" => Suite::Model,
            "integrator" => Suite::Integrator,
            "probes" => Suite::Probes,
            "all" => Suite::All,
            other => return Err(RunnerError::Config(format!("unknown suite '{other}'"))),
        })
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub seed: u64,
    pub probe_samples: usize,
    pub baseline: Option<PathBuf>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            probe_samples: 100,
            baseline: Some(probes::default_baseline_path()),
        }
    }
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<Vec<CheckResult>, RunnerError> {
    let mut out = Vec::new();
    let all = suite == Suite::All;
    if all || suite == Suite::Operators {
        out.extend(operator_checks(opts.seed)?);
    }
    if all || suite == Suite::Lp {
        out.extend(lp_checks(opts.seed)?);
    }
    if all || suite == Suite::Model {
        out.extend(model_checks(opts.seed, 50)?);
    }
    if all || suite == Suite::Integrator {
        out.extend(integrator_checks()?);
    }
    if all || suite == Suite::Probes {
        let po = ProbeOptions {
            seed: opts.seed,
            samples: opts.probe_samples,
            ..ProbeOptions::default()
        };
        out.extend(probes::probe_checks(&po, opts.baseline.as_deref())?);
    }
    Ok(out)
}

fn rel(a: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        a
    } else {
        a / scale
    }
}

pub fn operator_checks(seed: u64) -> Result<Vec<CheckResult>, RunnerError> {
    const S: &str = "operators";
    let g = Grid::new(16)?;
    let mut rf = RandomFields::new(seed);
    let f = rf.scalar(&g);
    let back = ScalarField::from_physical(&g, &f.to_physical());
    let mut out = vec![CheckResult::at_most(
        S,
        "fft_round_trip",
        rel(back.max_abs_diff(&f), f.max_coeff()),
        1e-13,
        "forward(inverse(c)) against c",
    )];

    let v = rf.vector(&g);
    let w = rf.vector(&g);
    let pv = leray_project(&v);
    out.push(CheckResult::at_most(
        S,
        "leray_idempotent",
        rel(leray_project(&pv).max_abs_diff(&pv), pv.max_coeff()),
        1e-14,
        "P(Pv) against Pv",
    ));
    out.push(CheckResult::at_most(
        S,
        "leray_divergence_free",
        divergence_defect(&pv),
        1e-14,
        "max_k |k.Pv(k)| / (|k| max|v|)",
    ));
    let lhs = pv.inner(&w);
    let rhs = v.inner(&leray_project(&w));
    out.push(CheckResult::at_most(
        S,
        "leray_self_adjoint",
        rel((lhs - rhs).abs(), (v.norm_sq() * w.norm_sq()).sqrt()),
        1e-13,
        "<Pv, w> against <v, Pw>",
    ));

    let lam = fractional_lambda(&fractional_lambda(&f, 1.3), -1.3);
    out.push(CheckResult::at_most(
        S,
        "lambda_composition",
        rel(lam.max_abs_diff(&f.without_mean()), f.max_coeff()),
        1e-13,
        "Lambda^-s Lambda^s f against f - mean",
    ));

    let s = ScalarField::from_fn(&g, |x| (2.0 * x[0] - 3.0 * x[2]).sin());
    let ds = gradient(&s);
    let want0 = ScalarField::from_fn(&g, |x| 2.0 * (2.0 * x[0] - 3.0 * x[2]).cos());
    let want2 = ScalarField::from_fn(&g, |x| -3.0 * (2.0 * x[0] - 3.0 * x[2]).cos());
    let err = ds.comps[0]
        .max_abs_diff(&want0)
        .max(ds.comps[2].max_abs_diff(&want2))
        .max(ds.comps[1].max_coeff());
    out.push(CheckResult::at_most(S, "gradient_single_mode", err, 1e-13, "grad sin(2x1 - 3x3)"));
    Ok(out)
}

/// Real random field with Gaussian coefficients on every mode, Nyquist
/// planes included.
fn full_spectrum_field(g: &Grid, rng: &mut ChaCha8Rng) -> ScalarField {
    let raw: Vec<Complex64> = (0..g.size())
        .map(|_| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
        .collect();
    let sym = (0..g.size())
        .map(|i| 0.5 * (raw[i] + raw[g.negated_index(i)].conj()))
        .collect();
    ScalarField::from_coeffs(g, sym)
}

pub fn lp_checks(seed: u64) -> Result<Vec<CheckResult>, RunnerError> {
    const S: &str = "lp";
    let g = Grid::new(32)?;
    let bank = DyadicBank::new(&g, 2)?;
    let shells: Vec<i32> = bank.shells(ShellRange::All).collect();
    let mut out = Vec::new();

    let mut partition = 0.0f64;
    let mut overlap = 0.0f64;
    for idx in 1..g.size() {
        let w: Vec<f64> = shells.iter().map(|&j| bank.weight(j, idx)).collect();
        partition = partition.max((w.iter().sum::<f64>() - 1.0).abs());
        for a in 0..w.len() {
            for b in a + 2..w.len() {
                overlap = overlap.max((w[a] * w[b]).abs());
            }
        }
    }
    out.push(CheckResult::at_most(
        S,
        "partition_of_unity",
        partition,
        1e-10,
        format!("max_k |sum_j phi_j(k) - 1| over nonzero modes, shells {}..={}", bank.j_min(), bank.j_max()),
    ));
    out.push(CheckResult::at_most(
        S,
        "almost_orthogonality",
        overlap,
        0.0,
        "max_k |phi_j(k) phi_j'(k)| for |j - j'| >= 2",
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut recon = 0.0f64;
    let mut cross = 0.0f64;
    for _ in 0..20 {
        let f = full_spectrum_field(&g, &mut rng);
        let mut sum = ScalarField::constant(&g, f.mean());
        let blocks: Vec<ScalarField> = shells.iter().map(|&j| bank.block(&f, j)).collect();
        for b in &blocks {
            sum.axpy(1.0, b);
        }
        recon = recon.max(rel(sum.max_abs_diff(&f), f.max_coeff()));
        for a in 0..shells.len() {
            for &jb in shells.iter().skip(a + 2) {
                cross = cross.max(bank.block(&blocks[a], jb).max_coeff());
            }
        }
    }
    out.push(CheckResult::at_most(
        S,
        "reconstruction",
        recon,
        1e-10,
        "mean + sum_j Delta_j f against f, 20 random fields",
    ));
    out.push(CheckResult::at_most(
        S,
        "blocks_disjoint",
        cross,
        0.0,
        "Delta_j' Delta_j f for |j - j'| >= 2, 20 random fields",
    ));
    Ok(out)
}

/// Frobenius inner product of two symmetric tensor fields.
fn tensor_inner(a: &TensorField, b: &TensorField) -> f64 {
    (0..6).map(|c| SYM_WEIGHTS[c] * a.comps[c].inner(&b.comps[c])).sum()
}

pub fn model_checks(seed: u64, count: usize) -> Result<Vec<CheckResult>, RunnerError> {
    const S: &str = "model";
    let g = Grid::new(16)?;
    let params = ModelParams::paper(1.0);
    let mut tr_q = 0.0f64;
    let mut cancel = 0.0f64;
    let mut consistency = 0.0f64;
    for i in 0..count {
        let mut rf = RandomFields::new(seed.wrapping_add(i as u64));
        let u = rf.solenoidal(&g);
        let sigma = rf.sym_tensor(&g);
        let t = 0.37 * (i % 7) as f64;

        let q = q_bilinear(&sigma, &u, 0.0);
        tr_q = tr_q.max(q.trace().max_coeff());

        let a = leray_project(&tensor_divergence(&sigma)).inner(&u);
        let b = tensor_inner(&sym_grad(&u), &sigma);
        let scale = a.abs().max(b.abs());
        cancel = cancel.max(rel((a + b).abs(), scale));

        let state = SimState {
            u: u.clone(),
            sigma: sigma.clone(),
            t,
        };
        let (du_p, ds_p) = rhs_perturbation(&state, &params)?;
        let (du_o, dtau_o) = rhs_original(&state.u, &state.tau(params.c0), &params);
        // d tau_bar / dt = -(y^2 / 3) I
        let y = special_trace(params.c0, t);
        let mut ds_from_o = dtau_o.clone();
        for d in 0..3 {
            ds_from_o.comps[SYM_INDEX[d][d]].coeffs_mut()[0].re += y * y / 3.0;
        }
        let scale = ds_p.max_coeff().max(du_p.max_coeff());
        let diff = ds_from_o.max_abs_diff(&ds_p).max(du_o.max_abs_diff(&du_p));
        consistency = consistency.max(rel(diff, scale));
    }
    Ok(vec![
        CheckResult::at_most(S, "trace_of_q_vanishes", tr_q, 1e-12, format!("max coefficient of tr Q over {count} states")),
        CheckResult::at_most(
            S,
            "coupling_cancellation",
            cancel,
            1e-10,
            format!("|<P div sigma, u> + <D(u), sigma>| relative, {count} states"),
        ),
        CheckResult::at_most(
            S,
            "perturbation_matches_original",
            consistency,
            1e-10,
            format!("perturbation RHS against original RHS minus d tau_bar/dt, {count} states"),
        ),
    ])
}

/// Linear single-mode dynamics in the coefficient space of `(u, sigma)`
/// at wavevector `k`: `x' = (A0 + y(t) B) x`.
struct LinearMode {
    a0: DMatrix<Complex64>,
    b: DMatrix<Complex64>,
    c0: f64,
}

impl LinearMode {
    fn new(k: [f64; 3], params: &ModelParams) -> Self {
        let i = Complex64::i();
        let k2: f64 = k.iter().map(|x| x * x).sum();
        let mut a0 = DMatrix::<Complex64>::zeros(9, 9);
        let mut b = DMatrix::<Complex64>::zeros(9, 9);
        // u_r' = -mu |k|^2 u_r + mu1 P_rs (i k_j sigma_sj)
        for r in 0..3 {
            a0[(r, r)] += Complex64::from(-params.mu * k2);
            for s in 0..3 {
                let p_rs = if r == s { 1.0 } else { 0.0 } - k[r] * k[s] / k2;
                for j in 0..3 {
                    a0[(r, 3 + SYM_INDEX[s][j])] += params.mu1 * p_rs * i * k[j];
                }
            }
        }
        // sigma_c' = -y (sigma_c + delta tr/3) + (mu2 - 2 lambda y / 3) (i/2)(k_b u_a + k_a u_b)
        for (c, &(a, bb)) in SYM_PAIRS.iter().enumerate() {
            let row = 3 + c;
            b[(row, row)] += Complex64::from(-1.0);
            if a == bb {
                for d in 0..3 {
                    b[(row, 3 + SYM_INDEX[d][d])] += Complex64::from(-1.0 / 3.0);
                }
            }
            let sym = |m: &mut DMatrix<Complex64>, coef: f64| {
                m[(row, a)] += 0.5 * coef * i * k[bb];
                m[(row, bb)] += 0.5 * coef * i * k[a];
            };
            sym(&mut a0, params.mu2);
            sym(&mut b, -2.0 * params.lambda / 3.0);
        }
        Self { a0, b, c0: params.c0 }
    }

    fn matrix(&self, t: f64) -> DMatrix<Complex64> {
        &self.a0 + &self.b * Complex64::from(special_trace(self.c0, t))
    }

    /// Exponential midpoint rule with `m` steps.
    fn midpoint(&self, x0: &DVector<Complex64>, t_end: f64, m: usize) -> DVector<Complex64> {
        let h = t_end / m as f64;
        let mut x = x0.clone();
        for s in 0..m {
            let a = self.matrix((s as f64 + 0.5) * h) * Complex64::from(h);
            x = a.exp() * x;
        }
        x
    }

    /// Richardson extrapolation of the second-order midpoint rule.
    fn reference(&self, x0: &DVector<Complex64>, t_end: f64, m: usize) -> DVector<Complex64> {
        let coarse = self.midpoint(x0, t_end, m);
        let fine = self.midpoint(x0, t_end, 2 * m);
        (fine * Complex64::from(4.0) - coarse) / Complex64::from(3.0)
    }
}

/// Errors of a scheme on the linear single-mode problem against the
/// matrix-exponential reference.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub scheme: Scheme,
    pub t_end: f64,
    pub dts: Vec<f64>,
    pub errors: Vec<f64>,
    /// `errors[i] / errors[i + 1]`.
    pub ratios: Vec<f64>,
}

pub fn convergence_study(scheme: Scheme, dts: &[f64], t_end: f64, amplitude: f64) -> Result<ConvergenceStudy, RunnerError> {
    let g = Grid::new(8)?;
    let params = ModelParams::paper(1.0);
    let kmode = [1i64, 2, 0];
    let kidx = g.index_of(kmode);
    let nidx = g.index_of([-kmode[0], -kmode[1], -kmode[2]]);
    let kvec = g.wavevector(kidx);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut gauss = || Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)) * amplitude;
    let mut state = SimState::zeros(&g);
    let put = |f: &mut ScalarField, z: Complex64| {
        f.coeffs_mut()[kidx] = z;
        f.coeffs_mut()[nidx] = z.conj();
    };
    for c in 0..3 {
        put(&mut state.u.comps[c], gauss());
    }
    for c in 0..6 {
        put(&mut state.sigma.comps[c], gauss());
    }
    state.u = leray_project(&state.u);

    let pick = |s: &SimState| -> DVector<Complex64> {
        DVector::from_iterator(
            9,
            s.u.comps
                .iter()
                .chain(s.sigma.comps.iter())
                .map(|f| f.coeffs()[kidx]),
        )
    };
    let x0 = pick(&state);
    let oracle = LinearMode::new(kvec, &params).reference(&x0, t_end, 2000);
    let scale = x0.iter().map(|z| z.norm()).fold(0.0, f64::max);

    let cfg = StepperConfig {
        scheme,
        ..StepperConfig::default()
    };
    let mut errors = Vec::new();
    for &dt in dts {
        let steps = (t_end / dt).round() as usize;
        let mut s = state.clone();
        for _ in 0..steps {
            s = step_with_dt(&s, &cfg, &params, dt)?;
        }
        let err = (pick(&s) - &oracle).iter().map(|z| z.norm()).fold(0.0, f64::max);
        errors.push(err / scale);
    }
    let ratios = errors.windows(2).map(|w| w[0] / w[1]).collect();
    Ok(ConvergenceStudy {
        scheme,
        t_end,
        dts: dts.to_vec(),
        errors,
        ratios,
    })
}

pub fn integrator_checks() -> Result<Vec<CheckResult>, RunnerError> {
    const S: &str = "integrator";
    let mut out = Vec::new();

    let rk2 = convergence_study(Scheme::IfRk2, &[4e-3, 2e-3, 1e-3], 0.1, 1e-6)?;
    let worst = rk2.ratios.iter().copied().fold(f64::INFINITY, f64::min);
    out.push(CheckResult::at_least(
        S,
        "if_rk2_second_order",
        worst,
        3.5,
        format!("error ratios {:?} for dt {:?}", rk2.ratios, rk2.dts),
    ));
    let rk4 = convergence_study(Scheme::IfRk4, &[2e-2, 1e-2, 5e-3], 0.1, 1e-6)?;
    let worst = rk4.ratios.iter().copied().fold(f64::INFINITY, f64::min);
    out.push(CheckResult::at_least(
        S,
        "if_rk4_fourth_order",
        worst,
        12.0,
        format!("error ratios {:?} for dt {:?}", rk4.ratios, rk4.dts),
    ));

    // Deviatoric factor over [t0, t1] against the closed-form ratio of y.
    let mut dev = 0.0f64;
    for (t0, t1, c0) in [(0.0, 0.5, 1.0), (0.3, 2.0, 4.0), (1.0, 1.001, 0.25)] {
        let (f, f2) = damping_factors(t0, t1, c0)?;
        let want = special_trace(c0, t1) / special_trace(c0, t0);
        dev = dev.max((f - want).abs()).max((f2 - want * want).abs());
    }
    out.push(CheckResult::at_most(
        S,
        "damping_factors",
        dev,
        1e-14,
        "(1/c0 + t0)/(1/c0 + t1) against y(t1)/y(t0)",
    ));

    // Spatially uniform isotropic perturbation: tr sigma solves
    // s' = -s^2 - 2 y s exactly, so tr tau = s + y follows the Riccati law.
    let g = Grid::new(8)?;
    let params = ModelParams::paper(1.0);
    let mut s = SimState::zeros(&g);
    let s0 = -0.4;
    s.sigma = TensorField::identity(&g, s0 / 3.0);
    let cfg = StepperConfig {
        scheme: Scheme::IfRk4,
        ..StepperConfig::default()
    };
    for _ in 0..500 {
        s = step_with_dt(&s, &cfg, &params, 1e-3)?;
    }
    let got = s.sigma.trace().mean() + special_trace(params.c0, s.t);
    let y0 = s0 + params.c0;
    let want = y0 / (1.0 + y0 * s.t);
    out.push(CheckResult::at_most(
        S,
        "uniform_trace_riccati",
        ((got - want) / want).abs(),
        1e-10,
        "uniform isotropic stress against y0/(1 + y0 t) at t = 0.5",
    ));
    Ok(out)
}
