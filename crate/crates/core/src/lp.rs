//! Littlewood-Paley decomposition on the torus: dyadic blocks, low/high
//! splitting, `L^p` norms and homogeneous Besov norms, plus Chemin-Lerner
//! running norms.
//!
//! The radial cutoff `chi` equals 1 on `|xi| <= 3/4` and 0 on `|xi| >= 4/3`;
//! `phi(xi) = chi(xi/2) - chi(xi)` is then supported in `3/4 <= |xi| <= 8/3`
//! and the blocks telescope, so `sum_j phi(2^-j xi) = 1` exactly on every
//! nonzero mode once the shell range covers the grid.

use std::ops::RangeInclusive;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldComponents, ScalarField};
use crate::grid::Grid;

const CHI_INNER: f64 = 0.75;
const CHI_OUTER: f64 = 4.0 / 3.0;

/// `C^inf` step: 0 for `x <= 0`, 1 for `x >= 1`.
fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / x).exp();
    let b = (-1.0 / (1.0 - x)).exp();
    a / (a + b)
}

/// Radial low-pass profile.
pub fn chi(r: f64) -> f64 {
    smooth_step((CHI_OUTER - r) / (CHI_OUTER - CHI_INNER))
}

/// Radial annulus profile, supported in `[3/4, 8/3]`.
pub fn phi(r: f64) -> f64 {
    chi(0.5 * r) - chi(r)
}

/// Shells `j_min..=j_max` needed so that the partition of unity is exact on
/// every nonzero grid mode, up to the Nyquist corner.
pub fn shell_range(grid: &Grid) -> (i32, i32) {
    // phi(2^-j_min k_min) must see the whole low end: 2^-j_min k_min >= 4/3
    let j_min = (CHI_INNER * grid.min_wavenumber()).log2().floor() as i32;
    // chi(2^-(j_max+1) k_max) = 1 needs 2^(j_max+1) * 3/4 >= k_max
    let j_max = (grid.max_wavenumber() / (2.0 * CHI_INNER)).log2().ceil() as i32;
    (j_min, j_max)
}

/// Lebesgue/summation indices and regularity of `B^s_{p,r}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesovSpec {
    pub s: f64,
    pub p: f64,
    pub r: f64,
}

impl BesovSpec {
    pub fn new(s: f64, p: f64, r: f64) -> Result<Self> {
        if !(p >= 1.0) {
            return Err(Error::InvalidLebesgue(p));
        }
        if !(r >= 1.0) {
            return Err(Error::InvalidParameter(format!("summation index r = {r} must be >= 1")));
        }
        Ok(Self { s, p, r })
    }

    /// `B^s_{p,1}`, the only summation index used by the energies.
    pub fn l1(s: f64, p: f64) -> Self {
        Self { s, p, r: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShellRange {
    Low,
    High,
    All,
}

#[derive(Clone, Debug)]
struct Shell {
    /// Nonzero samples of `phi(2^-j |k|)` as `(flat index, weight)`.
    support: Vec<(u32, f64)>,
}

/// Precomputed dyadic multipliers for one grid.
#[derive(Clone, Debug)]
pub struct DyadicBank {
    grid: Grid,
    j_min: i32,
    j_max: i32,
    cutoff: i32,
    shells: Vec<Shell>,
}

impl DyadicBank {
    pub fn new(grid: &Grid, cutoff: i32) -> Result<Self> {
        let (j_min, j_max) = shell_range(grid);
        if j_max - j_min + 1 < 4 {
            return Err(Error::Bank(format!(
                "grid resolves only {} shells, need at least 4",
                j_max - j_min + 1
            )));
        }
        if cutoff < j_min || cutoff >= j_max {
            return Err(Error::Bank(format!(
                "cutoff N = {cutoff} must lie in [{j_min}, {}] so both frequency ranges are nonempty",
                j_max - 1
            )));
        }
        let norms: Vec<f64> = (0..grid.size()).map(|i| grid.wavenumber_norm(i)).collect();
        let shells = (j_min..=j_max)
            .map(|j| {
                let scale = 2f64.powi(-j);
                let support = norms
                    .iter()
                    .enumerate()
                    .filter_map(|(i, &k)| {
                        let w = if k == 0.0 { 0.0 } else { phi(scale * k) };
                        (w != 0.0).then_some((i as u32, w))
                    })
                    .collect();
                Shell { support }
            })
            .collect();
        Ok(Self {
            grid: grid.clone(),
            j_min,
            j_max,
            cutoff,
            shells,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn j_min(&self) -> i32 {
        self.j_min
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    pub fn cutoff(&self) -> i32 {
        self.cutoff
    }

    pub fn shells(&self, range: ShellRange) -> RangeInclusive<i32> {
        match range {
            ShellRange::Low => self.j_min..=self.cutoff,
            ShellRange::High => self.cutoff + 1..=self.j_max,
            ShellRange::All => self.j_min..=self.j_max,
        }
    }

    fn shell(&self, j: i32) -> Option<&Shell> {
        if j < self.j_min || j > self.j_max {
            None
        } else {
            self.shells.get((j - self.j_min) as usize)
        }
    }

    /// Sampled multiplier `phi(2^-j |k|)` at a flat index; zero off-range.
    pub fn weight(&self, j: i32, idx: usize) -> f64 {
        let k = self.grid.wavenumber_norm(idx);
        if j < self.j_min || j > self.j_max || k == 0.0 {
            0.0
        } else {
            phi(2f64.powi(-j) * k)
        }
    }

    fn apply_weights(&self, f: &ScalarField, weights: impl Iterator<Item = (u32, f64)>) -> ScalarField {
        let mut out = vec![Complex64::new(0.0, 0.0); self.grid.size()];
        let src = f.coeffs();
        for (i, w) in weights {
            out[i as usize] += src[i as usize] * w;
        }
        ScalarField::from_coeffs(&self.grid, out)
    }

    /// `Delta_j f`; identically zero for `j` outside the resolved range.
    pub fn block<F: FieldComponents>(&self, f: &F, j: i32) -> F {
        match self.shell(j) {
            Some(shell) => f.map_components(|c| self.apply_weights(c, shell.support.iter().copied())),
            None => f.map_components(|c| ScalarField::zeros(c.grid())),
        }
    }

    /// Sum of blocks over a range of shells.
    pub fn band<F: FieldComponents>(&self, f: &F, shells: RangeInclusive<i32>) -> F {
        f.map_components(|c| {
            let weights = shells
                .clone()
                .filter_map(|j| self.shell(j))
                .flat_map(|s| s.support.iter().copied());
            self.apply_weights(c, weights)
        })
    }

    /// `f^l = sum_{j <= N} Delta_j f`
    pub fn low_part<F: FieldComponents>(&self, f: &F) -> F {
        self.band(f, self.shells(ShellRange::Low))
    }

    /// `f^h = sum_{j > N} Delta_j f`
    pub fn high_part<F: FieldComponents>(&self, f: &F) -> F {
        self.band(f, self.shells(ShellRange::High))
    }

    /// `S_j f = chi(2^-j D) f`, including the mean.
    pub fn low_pass<F: FieldComponents>(&self, f: &F, j: i32) -> F {
        let scale = 2f64.powi(-j);
        let g = self.grid.clone();
        f.map_components(|c| c.multiplied(|idx| chi(scale * g.wavenumber_norm(idx))))
    }

    /// `||Delta_j f||_{L^p}` for every shell `j_min..=j_max`.
    pub fn shell_norms<F: FieldComponents>(&self, f: &F, p: f64) -> Vec<f64> {
        if p == 2.0 {
            // discrete Parseval: identical to grid quadrature
            let v = self.grid.volume();
            let w = f.component_weights();
            return self
                .shells
                .iter()
                .map(|s| {
                    let acc: f64 = s
                        .support
                        .iter()
                        .map(|&(i, phi)| {
                            let m: f64 = f
                                .components()
                                .iter()
                                .zip(w)
                                .map(|(c, wc)| wc * c.coeffs()[i as usize].norm_sqr())
                                .sum();
                            phi * phi * m
                        })
                        .sum();
                    (acc * v).sqrt()
                })
                .collect();
        }
        (self.j_min..=self.j_max)
            .map(|j| lp_norm(&self.block(f, j), p))
            .collect()
    }

    /// Shell norms for several exponents at once, one inverse transform per
    /// block; indexed `[exponent][shell]`.
    pub fn shell_norms_many<F: FieldComponents>(&self, f: &F, ps: &[f64]) -> Vec<Vec<f64>> {
        let h3 = self.grid.cell_volume();
        let mut out = vec![Vec::with_capacity(self.shells.len()); ps.len()];
        for j in self.j_min..=self.j_max {
            let mags = self.block(f, j).pointwise_magnitude();
            for (o, &p) in out.iter_mut().zip(ps) {
                o.push(quadrature(&mags, h3, p));
            }
        }
        out
    }

    /// Homogeneous Besov norm restricted to a shell range.
    pub fn besov_norm<F: FieldComponents>(&self, f: &F, spec: BesovSpec, range: ShellRange) -> f64 {
        let norms = self.shell_norms(f, spec.p);
        self.aggregate(&norms, spec, range)
    }

    /// `l^r` aggregation of `2^{js} a_j` over a shell range, where `norms`
    /// is indexed from `j_min`.
    pub fn aggregate(&self, norms: &[f64], spec: BesovSpec, range: ShellRange) -> f64 {
        let terms = self
            .shells(range)
            .map(|j| 2f64.powf(j as f64 * spec.s) * norms[(j - self.j_min) as usize]);
        l_r(terms, spec.r)
    }
}

fn l_r(terms: impl Iterator<Item = f64>, r: f64) -> f64 {
    if r == 1.0 {
        terms.sum()
    } else if r.is_infinite() {
        terms.fold(0.0, f64::max)
    } else {
        terms.map(|t| t.powf(r)).sum::<f64>().powf(1.0 / r)
    }
}

/// Grid-quadrature `L^p` norm of the pointwise magnitude; `p = inf` gives the
/// grid maximum.
pub fn lp_norm<F: FieldComponents>(f: &F, p: f64) -> f64 {
    quadrature(&f.pointwise_magnitude(), f.grid().cell_volume(), p)
}

/// `(h^3 sum |m|^p)^{1/p}` over grid values; `p = inf` gives the maximum.
pub fn quadrature(mags: &[f64], h3: f64, p: f64) -> f64 {
    if p.is_infinite() {
        return mags.iter().fold(0.0, |a, m| a.max(m.abs()));
    }
    let sum: f64 = if p == 2.0 {
        mags.iter().map(|m| m * m).sum()
    } else {
        mags.iter().map(|m| m.abs().powf(p)).sum()
    };
    (h3 * sum).powf(1.0 / p)
}

/// Per-shell running suprema of `||Delta_j f(t)||_{L^p}`, giving the
/// Chemin-Lerner norm `sum_j 2^{js} sup_t ||Delta_j f||_{L^p}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TildeNormTracker {
    p: f64,
    j_min: i32,
    sups: Vec<f64>,
    last_t: Option<f64>,
}

impl TildeNormTracker {
    pub fn new(bank: &DyadicBank, p: f64) -> Self {
        Self {
            p,
            j_min: bank.j_min(),
            sups: vec![0.0; (bank.j_max() - bank.j_min() + 1) as usize],
            last_t: None,
        }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn sups(&self) -> &[f64] {
        &self.sups
    }

    pub fn update<F: FieldComponents>(&mut self, bank: &DyadicBank, f: &F, t: f64) -> Result<()> {
        let norms = bank.shell_norms(f, self.p);
        self.update_with_norms(&norms, t)
    }

    /// Fold in precomputed shell norms (indexed from `j_min`).
    pub fn update_with_norms(&mut self, norms: &[f64], t: f64) -> Result<()> {
        if let Some(last) = self.last_t {
            if t < last {
                return Err(Error::TimeReversed { last, got: t });
            }
        }
        for (s, &n) in self.sups.iter_mut().zip(norms) {
            *s = s.max(n);
        }
        self.last_t = Some(t);
        Ok(())
    }

    pub fn norm(&self, bank: &DyadicBank, spec: BesovSpec, range: ShellRange) -> Result<f64> {
        if spec.p != self.p {
            return Err(Error::InvalidLebesgue(spec.p));
        }
        debug_assert_eq!(self.j_min, bank.j_min());
        Ok(bank.aggregate(&self.sups, spec, range))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::VectorField;
    use crate::ops::gradient;
    use crate::random::RandomFields;
    use std::f64::consts::PI;

    #[test]
    fn profile_supports() {
        assert_eq!(chi(0.7), 1.0);
        assert_eq!(chi(1.34), 0.0);
        assert_eq!(phi(0.74), 0.0);
        assert_eq!(phi(2.67), 0.0);
        assert!(phi(1.2) > 0.0 && phi(1.2) <= 1.0);
        for i in 0..400 {
            let r = 0.01 * i as f64;
            let v = phi(r);
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn shell_range_for_standard_grids() {
        let g = Grid::new(32).unwrap();
        assert_eq!(shell_range(&g), (-1, 5));
        let g8 = Grid::new(8).unwrap();
        assert_eq!(shell_range(&g8), (-1, 3));
    }

    #[test]
    fn rejects_cutoff_outside_range() {
        let g = Grid::new(16).unwrap();
        assert!(DyadicBank::new(&g, 10).is_err());
        assert!(DyadicBank::new(&g, -3).is_err());
        assert!(DyadicBank::new(&g, 2).is_ok());
    }

    #[test]
    fn single_mode_lives_in_adjacent_shells() {
        let g = Grid::new(32).unwrap();
        let bank = DyadicBank::new(&g, 2).unwrap();
        let mut f = ScalarField::zeros(&g);
        f.coeffs_mut()[g.index_of([0, 4, 0])] = Complex64::new(0.5, 0.0);
        f.coeffs_mut()[g.index_of([0, -4, 0])] = Complex64::new(0.5, 0.0);
        for j in bank.j_min()..=bank.j_max() {
            if (j - 2).abs() >= 2 {
                assert_eq!(bank.block(&f, j).max_coeff(), 0.0, "shell {j}");
            }
        }
        let sum = bank.block(&f, 1).add(&bank.block(&f, 2));
        assert!(sum.max_abs_diff(&f) < 1e-15);
        assert_eq!(bank.block(&f, 99).max_coeff(), 0.0);
    }

    #[test]
    fn lp_norm_closed_forms() {
        let g = Grid::new(16).unwrap();
        // unnormalised quadrature: ||c||_p = |c| V^{1/p}
        let c = ScalarField::constant(&g, -2.5);
        let v = g.volume();
        for p in [1.0, 2.0, 3.0, 4.0] {
            let expect = 2.5 * v.powf(1.0 / p);
            assert!((lp_norm(&c, p) - expect).abs() < 1e-12 * expect);
        }
        assert!((lp_norm(&c, f64::INFINITY) - 2.5).abs() < 1e-14);
        let s = ScalarField::from_fn(&g, |x| x[0].sin());
        let expect = (8.0 * PI.powi(3) / 2.0).sqrt();
        assert!((lp_norm(&s, 2.0) - expect).abs() < 1e-12 * expect);
        assert!((lp_norm(&s, f64::INFINITY) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn besov_l2_matches_meanfree_l2() {
        // Parseval with a partition whose squares do not sum to one: check
        // r = 2, s = 0 against the direct block-by-block sum instead.
        let g = Grid::new(16).unwrap();
        let bank = DyadicBank::new(&g, 1).unwrap();
        let f = RandomFields::new(2).scalar(&g);
        let spec = BesovSpec::new(0.0, 2.0, 2.0).unwrap();
        let direct: f64 = (bank.j_min()..=bank.j_max())
            .map(|j| bank.block(&f, j).norm_sq())
            .sum::<f64>()
            .sqrt();
        assert!((bank.besov_norm(&f, spec, ShellRange::All) - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn r1_dominates_rinf() {
        let g = Grid::new(16).unwrap();
        let bank = DyadicBank::new(&g, 1).unwrap();
        let f = RandomFields::new(8).scalar(&g);
        for s in [-1.0, 0.0, 0.5, 1.5] {
            let a = bank.besov_norm(&f, BesovSpec::new(s, 2.0, 1.0).unwrap(), ShellRange::All);
            let b = bank.besov_norm(&f, BesovSpec::new(s, 2.0, f64::INFINITY).unwrap(), ShellRange::All);
            assert!(a >= b);
        }
    }

    #[test]
    fn quadrature_and_parseval_shell_norms_agree() {
        let g = Grid::new(16).unwrap();
        let bank = DyadicBank::new(&g, 1).unwrap();
        let v: VectorField = RandomFields::new(6).vector(&g);
        let fast = bank.shell_norms(&v, 2.0);
        for (k, j) in (bank.j_min()..=bank.j_max()).enumerate() {
            let slow = lp_norm(&bank.block(&v, j), 2.0);
            assert!((fast[k] - slow).abs() < 1e-12 * slow.max(1e-300) + 1e-300);
        }
    }

    #[test]
    fn tilde_tracker_semantics() {
        let g = Grid::new(16).unwrap();
        let bank = DyadicBank::new(&g, 1).unwrap();
        let f = RandomFields::new(1).scalar(&g);
        let spec = BesovSpec::l1(0.5, 2.0);
        let mut tr = TildeNormTracker::new(&bank, 2.0);
        tr.update(&bank, &f, 0.0).unwrap();
        let b = bank.besov_norm(&f, spec, ShellRange::All);
        assert!((tr.norm(&bank, spec, ShellRange::All).unwrap() - b).abs() < 1e-12 * b);
        tr.update(&bank, &f.scaled(0.5), 1.0).unwrap();
        assert!((tr.norm(&bank, spec, ShellRange::All).unwrap() - b).abs() < 1e-12 * b);
        assert!(matches!(tr.update(&bank, &f, 0.5), Err(Error::TimeReversed { .. })));
        assert!(tr.norm(&bank, BesovSpec::l1(0.5, 3.0), ShellRange::All).is_err());

        // disjoint shells add up
        let lo = ScalarField::from_fn(&g, |x| x[0].cos());
        let hi = ScalarField::from_fn(&g, |x| (6.0 * x[2]).cos());
        let mut t2 = TildeNormTracker::new(&bank, 2.0);
        t2.update(&bank, &lo, 0.0).unwrap();
        t2.update(&bank, &hi, 1.0).unwrap();
        let sum = bank.besov_norm(&lo, spec, ShellRange::All) + bank.besov_norm(&hi, spec, ShellRange::All);
        assert!((t2.norm(&bank, spec, ShellRange::All).unwrap() - sum).abs() < 1e-12 * sum);
    }

    #[test]
    fn bernstein_ratio_is_bounded() {
        // ||grad f||_{B^s} / ||f||_{B^{s+1}} stays in a fixed band
        let g = Grid::new(16).unwrap();
        let bank = DyadicBank::new(&g, 1).unwrap();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for seed in 0..10 {
            let f = RandomFields::new(seed).scalar(&g);
            let a = bank.besov_norm(&gradient(&f), BesovSpec::l1(0.5, 2.0), ShellRange::All);
            let b = bank.besov_norm(&f, BesovSpec::l1(1.5, 2.0), ShellRange::All);
            lo = lo.min(a / b);
            hi = hi.max(a / b);
        }
        // on shell j, |k| in [3/4, 8/3] 2^j
        assert!(lo >= 0.75 && hi <= 8.0 / 3.0, "ratio band [{lo}, {hi}]");
    }
}
