//! Linear nonlocal operators as spectral multipliers.
//!
//! First-order derivatives use the Nyquist-free derivative wavevector (see
//! [`Grid::derivative_wavevector`]); magnitude multipliers (`Lambda^s`,
//! Laplacian) use the full wavevector. The two agree on every Nyquist-free
//! field, which is the subspace the solver works in.

use num_complex::Complex64;

use crate::field::{FieldComponents, MatrixField, ScalarField, TensorField, VectorField, SYM_INDEX};
use crate::grid::Grid;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn derivative(f: &ScalarField, axis: usize) -> ScalarField {
    let g = f.grid();
    let coeffs = f
        .coeffs()
        .iter()
        .enumerate()
        .map(|(idx, &c)| I * g.derivative_wavevector(idx)[axis] * c)
        .collect();
    ScalarField::from_coeffs(g, coeffs)
}

/// `grad f`: component `i` carries `i k_i f(k)`.
pub fn gradient(f: &ScalarField) -> VectorField {
    VectorField::new(std::array::from_fn(|axis| derivative(f, axis)))
}

/// `div v = sum_i i k_i v_i(k)`.
pub fn divergence(v: &VectorField) -> ScalarField {
    let g = v.grid();
    let coeffs = (0..g.size())
        .map(|idx| {
            let k = g.derivative_wavevector(idx);
            I * (k[0] * v.comps[0].coeffs()[idx]
                + k[1] * v.comps[1].coeffs()[idx]
                + k[2] * v.comps[2].coeffs()[idx])
        })
        .collect();
    ScalarField::from_coeffs(g, coeffs)
}

/// Row divergence `(div sigma)_i = sum_j d_j sigma_ij`.
pub fn tensor_divergence(sigma: &TensorField) -> VectorField {
    let g = sigma.grid();
    let comps = std::array::from_fn(|i| {
        let coeffs = (0..g.size())
            .map(|idx| {
                let k = g.derivative_wavevector(idx);
                I * (0..3)
                    .map(|j| k[j] * sigma.comps[SYM_INDEX[i][j]].coeffs()[idx])
                    .sum::<Complex64>()
            })
            .collect();
        ScalarField::from_coeffs(g, coeffs)
    });
    VectorField::new(comps)
}

/// Velocity gradient `G_ij = d_j u_i`.
pub fn gradient_matrix(u: &VectorField) -> MatrixField {
    let mut m = MatrixField::zeros(u.grid());
    for i in 0..3 {
        for j in 0..3 {
            *m.get_mut(i, j) = derivative(&u.comps[i], j);
        }
    }
    m
}

pub fn laplacian<F: FieldComponents>(f: &F) -> F {
    let g = f.grid().clone();
    f.map_components(|c| {
        c.multiplied(|idx| {
            let k = g.wavenumber_norm(idx);
            -k * k
        })
    })
}

/// `Lambda^s = (-Delta)^{s/2}`, i.e. the multiplier `|k|^s`. For `s != 0`
/// the zero mode is mapped to zero.
pub fn fractional_lambda<F: FieldComponents>(f: &F, s: f64) -> F {
    if s == 0.0 {
        return f.clone();
    }
    let g = f.grid().clone();
    f.map_components(|c| {
        c.multiplied(|idx| {
            let k = g.wavenumber_norm(idx);
            if k == 0.0 {
                0.0
            } else {
                k.powf(s)
            }
        })
    })
}

fn project_mode(g: &Grid, idx: usize, v: [Complex64; 3]) -> [Complex64; 3] {
    let k = g.derivative_wavevector(idx);
    let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
    if k2 == 0.0 {
        return v;
    }
    let kv = (k[0] * v[0] + k[1] * v[1] + k[2] * v[2]) / k2;
    [v[0] - k[0] * kv, v[1] - k[1] * kv, v[2] - k[2] * kv]
}

/// Leray projection `P = I - grad Delta^{-1} div`. The zero mode passes through.
pub fn leray_project(v: &VectorField) -> VectorField {
    let g = v.grid().clone();
    let mut out = [
        Vec::with_capacity(g.size()),
        Vec::with_capacity(g.size()),
        Vec::with_capacity(g.size()),
    ];
    for idx in 0..g.size() {
        let p = project_mode(
            &g,
            idx,
            [v.comps[0].coeffs()[idx], v.comps[1].coeffs()[idx], v.comps[2].coeffs()[idx]],
        );
        for c in 0..3 {
            out[c].push(p[c]);
        }
    }
    let [a, b, c] = out;
    VectorField {
        comps: [
            ScalarField::from_coeffs(&g, a),
            ScalarField::from_coeffs(&g, b),
            ScalarField::from_coeffs(&g, c),
        ],
        solenoidal: true,
    }
}

/// `Lambda^{-1} P div sigma`, zero on the mean mode.
pub fn lambda_inv_p_div(sigma: &TensorField) -> VectorField {
    let mut psi = fractional_lambda(&leray_project(&tensor_divergence(sigma)), -1.0);
    psi.solenoidal = true;
    psi
}

/// Relative size of `k . v(k)` against `|k| |v(k)|`, maximised over modes.
pub fn divergence_defect(v: &VectorField) -> f64 {
    let g = v.grid();
    let scale = v.max_coeff().max(f64::MIN_POSITIVE);
    (0..g.size())
        .map(|idx| {
            let k = g.derivative_wavevector(idx);
            let kn = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt().max(1.0);
            let d: Complex64 = (0..3).map(|i| k[i] * v.comps[i].coeffs()[idx]).sum();
            d.norm() / (kn * scale)
        })
        .fold(0.0, f64::max)
}
