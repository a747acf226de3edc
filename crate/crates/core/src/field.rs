//! Spectral scalar, vector and tensor fields.

use num_complex::Complex64;

use crate::grid::Grid;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Storage slot of `(i, j)` in a symmetric tensor.
pub const SYM_INDEX: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];
/// `(i, j)` pair stored in each symmetric slot.
pub const SYM_PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
/// Multiplicity of each symmetric slot in a full contraction `A:B`.
pub const SYM_WEIGHTS: [f64; 6] = [1.0, 2.0, 2.0, 1.0, 2.0, 1.0];
const UNIT3: [f64; 3] = [1.0; 3];
const UNIT9: [f64; 9] = [1.0; 9];

/// Fourier coefficients of a real scalar on a periodic grid.
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: vec![ZERO; grid.size()],
        }
    }

    pub fn from_coeffs(grid: &Grid, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), grid.size(), "coefficient count must match grid");
        Self {
            grid: grid.clone(),
            coeffs,
        }
    }

    pub fn from_physical(grid: &Grid, values: &[f64]) -> Self {
        Self::from_coeffs(grid, grid.forward(values))
    }

    /// Sample `f` on the grid and transform.
    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 3]) -> f64 + Sync) -> Self {
        Self::from_physical(grid, &grid.sample(f))
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        let mut f = Self::zeros(grid);
        f.coeffs[0] = Complex64::new(value, 0.0);
        f
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn to_physical(&self) -> Vec<f64> {
        self.grid.inverse(&self.coeffs)
    }

    /// Spatial mean (the `k = 0` coefficient).
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    /// Copy with the mean removed.
    pub fn without_mean(&self) -> Self {
        let mut out = self.clone();
        out.coeffs[0] = ZERO;
        out
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            coeffs: self.coeffs.iter().map(|&c| c * a).collect(),
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= a);
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &ScalarField) {
        debug_assert!(self.grid == other.grid);
        for (x, &y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += y * a;
        }
    }

    pub fn add(&self, other: &ScalarField) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &ScalarField) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Apply a real diagonal multiplier `m(idx)`.
    pub fn multiplied(&self, m: impl Fn(usize) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            coeffs: self.coeffs.iter().enumerate().map(|(i, &c)| c * m(i)).collect(),
        }
    }

    /// Zero every mode outside the two-thirds set.
    pub fn dealias(&mut self) {
        for (idx, c) in self.coeffs.iter_mut().enumerate() {
            if !self.grid.in_dealias_set(idx) {
                *c = ZERO;
            }
        }
    }

    /// Zero the Nyquist planes.
    pub fn strip_nyquist(&mut self) {
        for (idx, c) in self.coeffs.iter_mut().enumerate() {
            if self.grid.is_nyquist(idx) {
                *c = ZERO;
            }
        }
    }

    /// `max_k |c(-k) - conj(c(k))|`; zero for a real field.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.coeffs.len())
            .map(|i| (self.coeffs[self.grid.negated_index(i)] - self.coeffs[i].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Parseval inner product `int f g dx`.
    pub fn inner(&self, other: &ScalarField) -> f64 {
        let s: f64 = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a * b.conj()).re)
            .sum();
        s * self.grid.volume()
    }

    /// `||f||_{L^2}^2` by Parseval.
    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.volume()
    }

    /// Largest coefficient modulus.
    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Point evaluation by direct Fourier summation, exact for the
    /// represented trigonometric polynomial.
    pub fn evaluate_at(&self, x: [f64; 3]) -> f64 {
        let n = self.grid.n();
        let phases: Vec<Vec<Complex64>> = (0..3)
            .map(|axis| {
                (0..n)
                    .map(|m| Complex64::from_polar(1.0, self.grid.axis_wavenumber(m) * x[axis]))
                    .collect()
            })
            .collect();
        let mut acc = ZERO;
        for a in 0..n {
            for b in 0..n {
                let pab = phases[0][a] * phases[1][b];
                let row = &self.coeffs[(a * n + b) * n..(a * n + b + 1) * n];
                let inner: Complex64 = row.iter().zip(&phases[2]).map(|(&c, &p)| c * p).sum();
                acc += pab * inner;
            }
        }
        acc.re
    }
}

/// Shared behaviour of multi-component fields (norms and multipliers act
/// componentwise; pointwise magnitudes use `component_weights`).
pub trait FieldComponents: Clone + Send + Sync {
    fn components(&self) -> &[ScalarField];
    fn components_mut(&mut self) -> &mut [ScalarField];
    /// Weights so that `sum_c w_c f_c(x)^2` is the squared pointwise magnitude.
    fn component_weights(&self) -> &'static [f64];

    fn grid(&self) -> &Grid {
        self.components()[0].grid()
    }

    /// Apply `f` to every component.
    fn map_components(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Self {
        let mut out = self.clone();
        for (o, c) in out.components_mut().iter_mut().zip(self.components()) {
            *o = f(c);
        }
        out
    }

    /// Pointwise magnitudes on the grid.
    fn pointwise_magnitude(&self) -> Vec<f64> {
        let grid = self.grid();
        let coeffs: Vec<&[Complex64]> = self.components().iter().map(|c| c.coeffs()).collect();
        let phys = grid.inverse_many(&coeffs);
        let w = self.component_weights();
        (0..grid.size())
            .map(|i| {
                phys.iter()
                    .zip(w)
                    .map(|(f, wc)| wc * f[i] * f[i])
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    /// Weighted Parseval inner product.
    fn inner(&self, other: &Self) -> f64 {
        self.components()
            .iter()
            .zip(other.components())
            .zip(self.component_weights())
            .map(|((a, b), w)| w * a.inner(b))
            .sum()
    }

    fn norm_sq(&self) -> f64 {
        self.components()
            .iter()
            .zip(self.component_weights())
            .map(|(a, w)| w * a.norm_sq())
            .sum()
    }

    fn scaled(&self, a: f64) -> Self {
        self.map_components(|c| c.scaled(a))
    }

    fn axpy(&mut self, a: f64, other: &Self) {
        for (x, y) in self.components_mut().iter_mut().zip(other.components()) {
            x.axpy(a, y);
        }
    }

    fn dealias(&mut self) {
        self.components_mut().iter_mut().for_each(|c| c.dealias());
    }

    fn max_abs_diff(&self, other: &Self) -> f64 {
        self.components()
            .iter()
            .zip(other.components())
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    fn max_coeff(&self) -> f64 {
        self.components().iter().map(|c| c.max_coeff()).fold(0.0, f64::max)
    }

    fn is_finite(&self) -> bool {
        self.components()
            .iter()
            .all(|c| c.coeffs().iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }
}

impl FieldComponents for ScalarField {
    fn components(&self) -> &[ScalarField] {
        std::slice::from_ref(self)
    }
    fn components_mut(&mut self) -> &mut [ScalarField] {
        std::slice::from_mut(self)
    }
    fn component_weights(&self) -> &'static [f64] {
        &UNIT3[..1]
    }
}

/// Three-component field. `solenoidal` is set by the Leray projection.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub comps: [ScalarField; 3],
    pub solenoidal: bool,
}

impl VectorField {
    pub fn new(comps: [ScalarField; 3]) -> Self {
        Self {
            comps,
            solenoidal: false,
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            comps: std::array::from_fn(|_| ScalarField::zeros(grid)),
            solenoidal: true,
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 3]) -> [f64; 3] + Sync) -> Self {
        let phys: Vec<Vec<f64>> = (0..3).map(|c| grid.sample(|x| f(x)[c])).collect();
        let refs: Vec<&[f64]> = phys.iter().map(|v| v.as_slice()).collect();
        let mut coeffs = grid.forward_many(&refs).into_iter();
        Self::new(std::array::from_fn(|_| {
            ScalarField::from_coeffs(grid, coeffs.next().expect("three components"))
        }))
    }

    pub fn to_physical(&self) -> [Vec<f64>; 3] {
        let g = self.comps[0].grid();
        let mut phys = g
            .inverse_many(&[self.comps[0].coeffs(), self.comps[1].coeffs(), self.comps[2].coeffs()])
            .into_iter();
        std::array::from_fn(|_| phys.next().expect("three components"))
    }

    pub fn add(&self, other: &VectorField) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out.solenoidal = self.solenoidal && other.solenoidal;
        out
    }

    pub fn sub(&self, other: &VectorField) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out.solenoidal = self.solenoidal && other.solenoidal;
        out
    }
}

impl FieldComponents for VectorField {
    fn components(&self) -> &[ScalarField] {
        &self.comps
    }
    fn components_mut(&mut self) -> &mut [ScalarField] {
        &mut self.comps
    }
    fn component_weights(&self) -> &'static [f64] {
        &UNIT3
    }
}

/// Symmetric 3x3 tensor field stored as its upper triangle
/// `(xx, xy, xz, yy, yz, zz)`.
#[derive(Clone, Debug)]
pub struct TensorField {
    pub comps: [ScalarField; 6],
}

impl TensorField {
    pub fn new(comps: [ScalarField; 6]) -> Self {
        Self { comps }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            comps: std::array::from_fn(|_| ScalarField::zeros(grid)),
        }
    }

    /// Spatially constant `c * I`.
    pub fn identity(grid: &Grid, c: f64) -> Self {
        let mut t = Self::zeros(grid);
        for d in 0..3 {
            t.comps[SYM_INDEX[d][d]] = ScalarField::constant(grid, c);
        }
        t
    }

    /// `s * I` for a scalar field `s`.
    pub fn isotropic(s: &ScalarField) -> Self {
        let mut t = Self::zeros(s.grid());
        for d in 0..3 {
            t.comps[SYM_INDEX[d][d]] = s.clone();
        }
        t
    }

    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 3]) -> [[f64; 3]; 3] + Sync) -> Self {
        let phys: Vec<Vec<f64>> = SYM_PAIRS
            .iter()
            .map(|&(i, j)| grid.sample(|x| f(x)[i][j]))
            .collect();
        let refs: Vec<&[f64]> = phys.iter().map(|v| v.as_slice()).collect();
        let mut coeffs = grid.forward_many(&refs).into_iter();
        Self::new(std::array::from_fn(|_| {
            ScalarField::from_coeffs(grid, coeffs.next().expect("six components"))
        }))
    }

    pub fn get(&self, i: usize, j: usize) -> &ScalarField {
        &self.comps[SYM_INDEX[i][j]]
    }

    pub fn trace(&self) -> ScalarField {
        let mut t = self.comps[0].clone();
        t.axpy(1.0, &self.comps[3]);
        t.axpy(1.0, &self.comps[5]);
        t
    }

    /// Add `s * I`.
    pub fn add_isotropic(&mut self, a: f64, s: &ScalarField) {
        for d in 0..3 {
            self.comps[SYM_INDEX[d][d]].axpy(a, s);
        }
    }

    pub fn to_physical(&self) -> [Vec<f64>; 6] {
        let g = self.comps[0].grid();
        let refs: Vec<&[Complex64]> = self.comps.iter().map(|c| c.coeffs()).collect();
        let mut phys = g.inverse_many(&refs).into_iter();
        std::array::from_fn(|_| phys.next().expect("six components"))
    }

    pub fn add(&self, other: &TensorField) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &TensorField) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }
}

impl FieldComponents for TensorField {
    fn components(&self) -> &[ScalarField] {
        &self.comps
    }
    fn components_mut(&mut self) -> &mut [ScalarField] {
        &mut self.comps
    }
    fn component_weights(&self) -> &'static [f64] {
        &SYM_WEIGHTS
    }
}

/// General (not necessarily symmetric) 3x3 tensor field, row-major.
#[derive(Clone, Debug)]
pub struct MatrixField {
    pub comps: [ScalarField; 9],
}

impl MatrixField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            comps: std::array::from_fn(|_| ScalarField::zeros(grid)),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> &ScalarField {
        &self.comps[3 * i + j]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut ScalarField {
        &mut self.comps[3 * i + j]
    }

    pub fn add(&self, other: &MatrixField) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn from_symmetric(t: &TensorField) -> Self {
        let mut m = Self::zeros(t.grid());
        for i in 0..3 {
            for j in 0..3 {
                *m.get_mut(i, j) = t.get(i, j).clone();
            }
        }
        m
    }
}

impl FieldComponents for MatrixField {
    fn components(&self) -> &[ScalarField] {
        &self.comps
    }
    fn components_mut(&mut self) -> &mut [ScalarField] {
        &mut self.comps
    }
    fn component_weights(&self) -> &'static [f64] {
        &UNIT9
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_evaluation_matches_samples() {
        let g = Grid::new(8).unwrap();
        let f = ScalarField::from_fn(&g, |x| (x[0] + 2.0 * x[1]).sin() + 0.5 * (3.0 * x[2]).cos() + 0.25);
        let phys = f.to_physical();
        for idx in [0usize, 17, 200, 511] {
            assert!((f.evaluate_at(g.point(idx)) - phys[idx]).abs() < 1e-12);
        }
        let x: [f64; 3] = [0.3, 1.7, 4.1];
        let exact = (x[0] + 2.0 * x[1]).sin() + 0.5 * (3.0 * x[2]).cos() + 0.25;
        assert!((f.evaluate_at(x) - exact).abs() < 1e-12);
    }

    #[test]
    fn tensor_trace_and_weights() {
        let g = Grid::new(8).unwrap();
        let t = TensorField::identity(&g, 2.0);
        assert!((t.trace().mean() - 6.0).abs() < 1e-15);
        // ||2I||^2 over the box = 3 * 4 * V
        assert!((t.norm_sq() - 12.0 * g.volume()).abs() < 1e-9);
    }

    #[test]
    fn sampled_fields_are_hermitian() {
        let g = Grid::new(8).unwrap();
        let f = ScalarField::from_fn(&g, |x| (x[0] - x[1]).sin() * x[2].cos());
        assert!(f.hermitian_defect() < 1e-15);
    }
}
