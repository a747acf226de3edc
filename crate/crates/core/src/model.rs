//! Tensor algebra and right-hand sides of the original system and of the
//! perturbation around the uniform special solution.
//!
//! Nonlinear terms are evaluated pointwise on the grid, transformed back and
//! truncated to the two-thirds set. The perturbation RHS is split into an
//! explicit part and a diagonal linear part (`mu Delta u`, and the
//! `-y (sigma + tr(sigma)/3 I)` damping with `y = 1/(1/c0 + t)`) that the
//! integrator handles with exact integrating factors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldComponents, MatrixField, ScalarField, TensorField, VectorField, SYM_INDEX, SYM_PAIRS};
use crate::grid::Grid;
use crate::ops::{gradient, gradient_matrix, laplacian, leray_project, tensor_divergence};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    /// Viscosity.
    pub mu: f64,
    /// Coupling of `div tau` into the momentum equation.
    pub mu1: f64,
    /// Coupling of `D(u)` into the stress equation.
    pub mu2: f64,
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
    /// Initial trace level of the special solution.
    pub c0: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::paper(1.0)
    }
}

impl ModelParams {
    /// `mu = mu1 = mu2 = b = 1`, `a = lambda = 0`.
    pub fn paper(c0: f64) -> Self {
        Self {
            mu: 1.0,
            mu1: 1.0,
            mu2: 1.0,
            a: 0.0,
            b: 1.0,
            lambda: 0.0,
            c0,
        }
    }

    pub fn is_paper_regime(&self) -> bool {
        self.mu == 1.0 && self.mu1 == 1.0 && self.mu2 == 1.0 && self.b == 1.0 && self.a == 0.0 && self.lambda == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.mu > 0.0 && self.mu1 > 0.0 && self.mu2 > 0.0) {
            return bad("mu, mu1, mu2 must be positive");
        }
        if !(self.b >= 0.0) || !self.a.is_finite() {
            return bad("b must be nonnegative and a finite");
        }
        if !(-1.0..=1.0).contains(&self.lambda) {
            return bad("lambda must lie in [-1, 1]");
        }
        if !(self.c0 > 0.0 && self.c0.is_finite()) {
            return bad("c0 must be positive and finite");
        }
        Ok(())
    }

    /// `y(t) = 1/(1/c0 + t)`, the trace of the special solution.
    pub fn special_trace(&self, t: f64) -> f64 {
        special_trace(self.c0, t)
    }

    /// The perturbation form needs `a = 0, b = 1` for the special solution
    /// to exist.
    pub fn check_perturbation_regime(&self) -> Result<()> {
        if self.a != 0.0 || self.b != 1.0 {
            return Err(Error::UnsupportedRegime(format!(
                "perturbation form requires a = 0 and b = 1 (got a = {}, b = {})",
                self.a, self.b
            )));
        }
        Ok(())
    }
}

pub fn special_trace(c0: f64, t: f64) -> f64 {
    1.0 / (1.0 / c0 + t)
}

/// `(u, sigma, t)` with `sigma = tau - tau_bar(t)`.
#[derive(Clone, Debug)]
pub struct SimState {
    pub u: VectorField,
    pub sigma: TensorField,
    pub t: f64,
}

impl SimState {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            u: VectorField::zeros(grid),
            sigma: TensorField::zeros(grid),
            t: 0.0,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.sigma.is_finite() && self.t.is_finite()
    }

    /// Original stress `tau = sigma + tau_bar(t)`.
    pub fn tau(&self, c0: f64) -> TensorField {
        let mut tau = self.sigma.clone();
        add_constant_isotropic(&mut tau, special_trace(c0, self.t) / 3.0);
        tau
    }
}

fn add_constant_isotropic(t: &mut TensorField, c: f64) {
    for d in 0..3 {
        t.comps[SYM_INDEX[d][d]].coeffs_mut()[0].re += c;
    }
}

/// `D(u) = (grad u + grad u^T)/2`.
pub fn sym_grad(u: &VectorField) -> TensorField {
    let g = gradient_matrix(u);
    TensorField::new(std::array::from_fn(|c| {
        let (i, j) = SYM_PAIRS[c];
        if i == j {
            g.get(i, i).clone()
        } else {
            g.get(i, j).add(g.get(j, i)).scaled(0.5)
        }
    }))
}

/// `Omega(u) = (grad u - grad u^T)/2`, with `grad u_ij = d_j u_i`.
pub fn skew_grad(u: &VectorField) -> MatrixField {
    let g = gradient_matrix(u);
    let mut m = MatrixField::zeros(u.grid());
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                *m.get_mut(i, j) = g.get(i, j).sub(g.get(j, i)).scaled(0.5);
            }
        }
    }
    m
}

/// Spatially uniform `tau_bar(t) = y(t)/3 I`.
pub fn special_solution(grid: &Grid, t: f64, c0: f64) -> TensorField {
    TensorField::identity(grid, special_trace(c0, t) / 3.0)
}

#[inline]
fn full(s: &[f64; 6]) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| s[SYM_INDEX[i][j]]))
}

/// Pointwise `Q = s Omega - Omega s + lambda (D s + s D)` from the velocity
/// gradient `g[i][j] = d_j u_i`.
#[inline]
fn q_point(s: &[f64; 6], g: &[[f64; 3]; 3], lambda: f64) -> [f64; 6] {
    let s = full(s);
    let mut out = [0.0; 6];
    for (c, &(i, j)) in SYM_PAIRS.iter().enumerate() {
        let mut acc = 0.0;
        for k in 0..3 {
            let om_kj = 0.5 * (g[k][j] - g[j][k]);
            let om_ik = 0.5 * (g[i][k] - g[k][i]);
            let d_kj = 0.5 * (g[k][j] + g[j][k]);
            let d_ik = 0.5 * (g[i][k] + g[k][i]);
            acc += s[i][k] * om_kj - om_ik * s[k][j] + lambda * (d_ik * s[k][j] + s[i][k] * d_kj);
        }
        out[c] = acc;
    }
    out
}

fn forward_products(grid: &Grid, phys: &[Vec<f64>], dealias: bool) -> Vec<ScalarField> {
    let refs: Vec<&[f64]> = phys.iter().map(|v| v.as_slice()).collect();
    grid.forward_many(&refs)
        .into_iter()
        .map(|c| {
            let mut f = ScalarField::from_coeffs(grid, c);
            if dealias {
                f.dealias();
            } else {
                f.strip_nyquist();
            }
            f
        })
        .collect()
}

/// Transpose per-point outputs into per-component buffers.
fn columns<const M: usize>(rows: Vec<[f64; M]>) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::with_capacity(rows.len()); M];
    for r in rows {
        for (o, v) in out.iter_mut().zip(r) {
            o.push(v);
        }
    }
    out
}

/// Dealiased `Q(tau, grad u)`.
pub fn q_bilinear(tau: &TensorField, u: &VectorField, lambda: f64) -> TensorField {
    let grid = tau.grid().clone();
    let gm = gradient_matrix(u);
    let mut refs: Vec<&[num_complex::Complex64]> = tau.comps.iter().map(|c| c.coeffs()).collect();
    refs.extend(gm.comps.iter().map(|c| c.coeffs()));
    let phys = grid.inverse_many(&refs);
    let rows: Vec<[f64; 6]> = (0..grid.size())
        .into_par_iter()
        .map(|i| {
            let s: [f64; 6] = std::array::from_fn(|c| phys[c][i]);
            let g: [[f64; 3]; 3] = std::array::from_fn(|a| std::array::from_fn(|b| phys[6 + 3 * a + b][i]));
            q_point(&s, &g, lambda)
        })
        .collect();
    let mut comps = forward_products(&grid, &columns(rows), true).into_iter();
    TensorField::new(std::array::from_fn(|_| comps.next().expect("six components")))
}

/// Pointwise nonlinear part shared by both forms:
/// `-u.grad u` and `-u.grad s - (a + b tr s) s - Q(s, grad u)`.
fn nonlinear(u: &VectorField, s: &TensorField, a: f64, b: f64, lambda: f64, dealias: bool) -> (VectorField, TensorField) {
    let grid = u.grid().clone();
    let gm = gradient_matrix(u);
    let ds: Vec<VectorField> = s.comps.iter().map(gradient).collect();
    let mut refs: Vec<&[num_complex::Complex64]> = Vec::with_capacity(36);
    refs.extend(u.comps.iter().map(|c| c.coeffs()));
    refs.extend(gm.comps.iter().map(|c| c.coeffs()));
    refs.extend(s.comps.iter().map(|c| c.coeffs()));
    for d in &ds {
        refs.extend(d.comps.iter().map(|c| c.coeffs()));
    }
    let phys = grid.inverse_many(&refs);
    let rows: Vec<[f64; 9]> = (0..grid.size())
        .into_par_iter()
        .map(|i| {
            let uu: [f64; 3] = std::array::from_fn(|a| phys[a][i]);
            let g: [[f64; 3]; 3] = std::array::from_fn(|r| std::array::from_fn(|c| phys[3 + 3 * r + c][i]));
            let sv: [f64; 6] = std::array::from_fn(|c| phys[12 + c][i]);
            let mut out = [0.0; 9];
            for r in 0..3 {
                out[r] = -(uu[0] * g[r][0] + uu[1] * g[r][1] + uu[2] * g[r][2]);
            }
            let tr = sv[0] + sv[3] + sv[5];
            let relax = a + b * tr;
            let q = q_point(&sv, &g, lambda);
            for c in 0..6 {
                let base = 18 + 3 * c;
                let adv = uu[0] * phys[base][i] + uu[1] * phys[base + 1][i] + uu[2] * phys[base + 2][i];
                out[3 + c] = -adv - relax * sv[c] - q[c];
            }
            out
        })
        .collect();
    let mut comps = forward_products(&grid, &columns(rows), dealias).into_iter();
    let du = VectorField::new(std::array::from_fn(|_| comps.next().expect("nine components")));
    let dt = TensorField::new(std::array::from_fn(|_| comps.next().expect("nine components")));
    (du, dt)
}

/// Explicit part of the perturbation RHS:
/// `P(-u.grad u + mu1 div sigma)` and
/// `-u.grad sigma - tr(sigma) sigma - Q(sigma, grad u) + (mu2 - 2 lambda y/3) D(u)`.
pub fn explicit_perturbation(state: &SimState, params: &ModelParams) -> Result<(VectorField, TensorField)> {
    explicit_perturbation_with(state, params, true)
}

/// As [`explicit_perturbation`]; with `dealias = false` products are only
/// stripped of their Nyquist modes.
pub fn explicit_perturbation_with(
    state: &SimState,
    params: &ModelParams,
    dealias: bool,
) -> Result<(VectorField, TensorField)> {
    params.check_perturbation_regime()?;
    let (adv_u, mut ds) = nonlinear(&state.u, &state.sigma, 0.0, 1.0, params.lambda, dealias);
    let mut mom = adv_u;
    mom.axpy(params.mu1, &tensor_divergence(&state.sigma));
    let du = leray_project(&mom);
    let y = params.special_trace(state.t);
    ds.axpy(params.mu2 - 2.0 * params.lambda * y / 3.0, &sym_grad(&state.u));
    Ok((du, ds))
}

/// `-y (sigma + tr(sigma)/3 I)`.
pub fn stress_damping(sigma: &TensorField, y: f64) -> TensorField {
    let mut out = sigma.scaled(-y);
    out.add_isotropic(-y / 3.0, &sigma.trace());
    out
}

/// Full perturbation RHS `(du, dsigma)`, pressure eliminated by projection.
pub fn rhs_perturbation(state: &SimState, params: &ModelParams) -> Result<(VectorField, TensorField)> {
    let (mut du, mut ds) = explicit_perturbation(state, params)?;
    du.axpy(params.mu, &laplacian(&state.u));
    ds.axpy(1.0, &stress_damping(&state.sigma, params.special_trace(state.t)));
    Ok((du, ds))
}

/// RHS of the original system for general parameters:
/// `P(-u.grad u + mu1 div tau) + mu Delta u` and
/// `-u.grad tau - (a + b tr tau) tau - Q(tau, grad u) + mu2 D(u)`.
pub fn rhs_original(u: &VectorField, tau: &TensorField, params: &ModelParams) -> (VectorField, TensorField) {
    let (adv_u, mut dtau) = nonlinear(u, tau, params.a, params.b, params.lambda, true);
    let mut mom = adv_u;
    mom.axpy(params.mu1, &tensor_divergence(tau));
    let mut du = leray_project(&mom);
    du.axpy(params.mu, &laplacian(u));
    dtau.axpy(params.mu2, &sym_grad(u));
    (du, dtau)
}

pub fn trace_field(sigma: &TensorField) -> ScalarField {
    sigma.trace()
}

/// `|| tr(dsigma) - [-u.grad tr sigma - (tr sigma)^2 - 2 y tr sigma] ||_{L^2}`,
/// which vanishes when `lambda = 0` and `div u = 0`.
pub fn trace_rhs_residual(state: &SimState, params: &ModelParams) -> Result<f64> {
    let (_, ds) = rhs_perturbation(state, params)?;
    let grid = state.grid();
    let tr = state.sigma.trace();
    let grad_tr = gradient(&tr);
    let y = params.special_trace(state.t);
    let mut refs: Vec<&[num_complex::Complex64]> = state.u.comps.iter().map(|c| c.coeffs()).collect();
    refs.extend(grad_tr.comps.iter().map(|c| c.coeffs()));
    refs.push(tr.coeffs());
    let phys = grid.inverse_many(&refs);
    let expect: Vec<f64> = (0..grid.size())
        .into_par_iter()
        .map(|i| {
            let adv = phys[0][i] * phys[3][i] + phys[1][i] * phys[4][i] + phys[2][i] * phys[5][i];
            -adv - phys[6][i] * phys[6][i]
        })
        .collect();
    let mut expect = ScalarField::from_physical(grid, &expect);
    expect.dealias();
    expect.axpy(-2.0 * y, &tr);
    Ok(ds.trace().sub(&expect).norm_sq().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::divergence;
    use crate::random::RandomFields;

    fn grid() -> Grid {
        Grid::new(16).unwrap()
    }

    #[test]
    fn sym_and_skew_of_shear() {
        let g = grid();
        let u = VectorField::from_fn(&g, |x| [x[1].sin(), 0.0, 0.0]);
        let d = sym_grad(&u);
        let half_cos = ScalarField::from_fn(&g, |x| 0.5 * x[1].cos());
        assert!(d.get(0, 1).max_abs_diff(&half_cos) < 1e-14);
        for c in [0, 2, 3, 4, 5] {
            assert!(d.comps[c].max_coeff() < 1e-15);
        }
        let om = skew_grad(&u);
        assert!(om.get(0, 1).max_abs_diff(&half_cos) < 1e-14);
        assert!(om.get(1, 0).max_abs_diff(&half_cos.scaled(-1.0)) < 1e-14);
        assert_eq!(sym_grad(&VectorField::zeros(&g)).max_coeff(), 0.0);
    }

    #[test]
    fn gradient_decomposition() {
        let g = grid();
        let u = RandomFields::new(1).solenoidal(&g);
        let full = gradient_matrix(&u);
        let recomposed = MatrixField::from_symmetric(&sym_grad(&u)).add(&skew_grad(&u));
        assert!(recomposed.max_abs_diff(&full) < 1e-12);
        assert!(sym_grad(&u).trace().max_abs_diff(&divergence(&u)) < 1e-12);
        assert!(sym_grad(&u).trace().max_coeff() < 1e-12);
    }

    #[test]
    fn q_special_cases() {
        let g = grid();
        let u = RandomFields::new(2).solenoidal(&g);
        assert!(q_bilinear(&TensorField::identity(&g, 2.0), &u, 0.0).max_coeff() < 1e-13);
        let q1 = q_bilinear(&TensorField::identity(&g, 1.0), &u, 1.0);
        assert!(q1.max_abs_diff(&sym_grad(&u).scaled(2.0)) < 1e-12);
        let s = RandomFields::new(3).sym_tensor(&g);
        let q0 = q_bilinear(&s, &u, 0.0);
        assert!(q0.trace().max_coeff() < 1e-13);
    }

    #[test]
    fn special_solution_values() {
        let g = grid();
        let tb = special_solution(&g, 0.0, 3.0);
        assert!(tb.max_abs_diff(&TensorField::identity(&g, 1.0)) < 1e-15);
        let mut prev = f64::INFINITY;
        for k in 0..50 {
            let y = special_trace(3.0, k as f64);
            assert!(y < prev);
            prev = y;
        }
        // tau_bar' + tr(tau_bar) tau_bar = 0
        for t in [0.0, 0.3, 2.0] {
            let y = special_trace(1.5, t);
            let dy = -y * y;
            assert!((dy / 3.0 + y * y / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn isotropic_reduction() {
        let g = grid();
        let p = ModelParams::paper(1.0);
        let c = 0.2;
        let t = 0.5;
        let state = SimState {
            u: VectorField::zeros(&g),
            sigma: TensorField::identity(&g, c),
            t,
        };
        let (du, ds) = rhs_perturbation(&state, &p).unwrap();
        assert_eq!(du.max_coeff(), 0.0);
        let y = p.special_trace(t);
        let expect = TensorField::identity(&g, -(2.0 * c * y + 3.0 * c * c));
        assert!(ds.max_abs_diff(&expect) < 1e-15);
        let zero = rhs_perturbation(&SimState::zeros(&g), &p).unwrap();
        assert_eq!(zero.0.max_coeff() + zero.1.max_coeff(), 0.0);
    }

    #[test]
    fn special_solution_is_exact_for_original_system() {
        let g = grid();
        let p = ModelParams::paper(2.0);
        let t = 0.7;
        let (du, dtau) = rhs_original(&VectorField::zeros(&g), &special_solution(&g, t, 2.0), &p);
        assert_eq!(du.max_coeff(), 0.0);
        let y = p.special_trace(t);
        assert!(dtau.max_abs_diff(&TensorField::identity(&g, -y * y / 3.0)) < 1e-15);
    }

    #[test]
    fn oldroyd_b_damping() {
        let g = grid();
        let p = ModelParams {
            a: 1.0,
            b: 0.0,
            ..ModelParams::paper(1.0)
        };
        let tau = RandomFields::new(5).sym_tensor(&g);
        let (_, dtau) = rhs_original(&VectorField::zeros(&g), &tau, &p);
        assert!(dtau.max_abs_diff(&tau.scaled(-1.0)) < 1e-15);
    }

    #[test]
    fn perturbation_rejects_general_relaxation() {
        let g = grid();
        let p = ModelParams {
            a: 1.0,
            ..ModelParams::paper(1.0)
        };
        assert!(matches!(
            rhs_perturbation(&SimState::zeros(&g), &p),
            Err(Error::UnsupportedRegime(_))
        ));
    }

    #[test]
    fn single_mode_velocity_with_zero_stress() {
        // u = (sin x2, 0, 0) is a steady Euler flow: u.grad u = 0
        let g = grid();
        let u = VectorField::from_fn(&g, |x| [x[1].sin(), 0.0, 0.0]);
        let state = SimState {
            u: u.clone(),
            sigma: TensorField::zeros(&g),
            t: 0.0,
        };
        let (du, ds) = rhs_perturbation(&state, &ModelParams::paper(1.0)).unwrap();
        assert!(du.max_abs_diff(&u.scaled(-1.0)) < 1e-13);
        assert!(ds.max_abs_diff(&sym_grad(&u)) < 1e-13);
    }

    #[test]
    fn velocity_update_is_solenoidal() {
        let g = grid();
        let mut rf = RandomFields::new(7);
        let state = SimState {
            u: rf.solenoidal(&g),
            sigma: rf.sym_tensor(&g),
            t: 0.2,
        };
        let (du, _) = rhs_perturbation(&state, &ModelParams::paper(1.0)).unwrap();
        assert!(divergence(&du).max_coeff() < 1e-12 * du.max_coeff());
        assert!(trace_rhs_residual(&state, &ModelParams::paper(1.0)).unwrap() < 1e-10);
    }
}
