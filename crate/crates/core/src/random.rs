//! Seeded random band-limited fields.
//!
//! Coefficients are independent complex Gaussians with a `|k|^{-2}` envelope,
//! Hermitian-symmetrised, mean-free, Nyquist-free and restricted to the
//! two-thirds set intersected with a ball. The default ball leaves the top
//! dyadic shell empty.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::field::{ScalarField, TensorField, VectorField};
use crate::grid::Grid;
use crate::lp;
use crate::ops::leray_project;

pub struct RandomFields {
    rng: ChaCha8Rng,
    exponent: f64,
    radius: Option<f64>,
}

impl RandomFields {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            exponent: -2.0,
            radius: None,
        }
    }

    /// Spectral cutoff radius (in wavenumber units).
    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = Some(radius);
        self
    }

    pub fn with_exponent(mut self, exponent: f64) -> Self {
        self.exponent = exponent;
        self
    }

    /// Default band: the largest ball on which every shell at or above the
    /// top resolvable shell vanishes.
    pub fn default_radius(grid: &Grid) -> f64 {
        let (_, j_max) = lp::shell_range(grid);
        0.75 * 2f64.powi(j_max - 1)
    }

    pub fn scalar(&mut self, grid: &Grid) -> ScalarField {
        let radius = self.radius.unwrap_or_else(|| Self::default_radius(grid));
        let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.size()];
        for (idx, c) in coeffs.iter_mut().enumerate() {
            let k = grid.wavenumber_norm(idx);
            if k == 0.0 || k > radius || !grid.in_dealias_set(idx) || grid.is_nyquist(idx) {
                continue;
            }
            let re: f64 = StandardNormal.sample(&mut self.rng);
            let im: f64 = StandardNormal.sample(&mut self.rng);
            *c = Complex64::new(re, im) * k.powf(self.exponent);
        }
        let sym: Vec<Complex64> = (0..grid.size())
            .map(|idx| 0.5 * (coeffs[idx] + coeffs[grid.negated_index(idx)].conj()))
            .collect();
        ScalarField::from_coeffs(grid, sym)
    }

    pub fn vector(&mut self, grid: &Grid) -> VectorField {
        VectorField::new(std::array::from_fn(|_| self.scalar(grid)))
    }

    pub fn solenoidal(&mut self, grid: &Grid) -> VectorField {
        leray_project(&self.vector(grid))
    }

    pub fn sym_tensor(&mut self, grid: &Grid) -> TensorField {
        TensorField::new(std::array::from_fn(|_| self.scalar(grid)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fields_are_real_meanfree_and_reproducible() {
        let g = Grid::new(16).unwrap();
        let a = RandomFields::new(4).scalar(&g);
        let b = RandomFields::new(4).scalar(&g);
        assert_eq!(a.coeffs(), b.coeffs());
        assert!(a.hermitian_defect() == 0.0);
        assert!(a.mean() == 0.0);
        assert!(a.max_coeff() > 0.0);
        let c = RandomFields::new(5).scalar(&g);
        assert!(a.max_abs_diff(&c) > 0.0);
    }

    #[test]
    fn band_limit_respected() {
        let g = Grid::new(16).unwrap();
        let f = RandomFields::new(1).with_radius(3.0).scalar(&g);
        for idx in 0..g.size() {
            if g.wavenumber_norm(idx) > 3.0 {
                assert!(f.coeffs()[idx].norm() == 0.0);
            }
        }
    }
}
