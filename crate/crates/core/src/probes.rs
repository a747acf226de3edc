//! Numerical probes of the paraproduct machinery: the Bony decomposition,
//! and ratio statistics for the commutator and product estimates on random
//! band-limited fields.
//!
//! Probe fields live in the ball `|k| <= n/4 - 1`, so every pairwise product
//! is represented on the grid without aliasing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::lp::{quadrature, BesovSpec, DyadicBank, ShellRange};
use crate::ops::{gradient, gradient_matrix};
use crate::random::RandomFields;

/// Spectral radius of probe fields.
pub fn probe_radius(grid: &Grid) -> f64 {
    (grid.n() / 4) as f64 - 1.0
}

fn product(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

fn l2(values: &[f64], h3: f64) -> f64 {
    quadrature(values, h3, 2.0)
}

/// `|| uv - (T_u v + R(u, v) + T_v u) ||_{L^2} / || uv ||_{L^2}` with
/// `T_u v = sum_j S_{j-1} u Delta_j v` and `R = sum_{|k-j|<=1} Delta_k u Delta_j v`.
/// The discrete identity is exact up to the product of the two means.
pub fn bony_reconstruct(bank: &DyadicBank, u: &ScalarField, v: &ScalarField) -> f64 {
    let g = bank.grid();
    let h3 = g.cell_volume();
    let shells: Vec<i32> = bank.shells(ShellRange::All).collect();
    let phys = |f: &ScalarField| f.to_physical();
    let du: Vec<Vec<f64>> = shells.iter().map(|&j| phys(&bank.block(u, j))).collect();
    let dv: Vec<Vec<f64>> = shells.iter().map(|&j| phys(&bank.block(v, j))).collect();
    let su: Vec<Vec<f64>> = shells.iter().map(|&j| phys(&bank.low_pass(u, j - 1))).collect();
    let sv: Vec<Vec<f64>> = shells.iter().map(|&j| phys(&bank.low_pass(v, j - 1))).collect();
    let mut sum = vec![0.0; g.size()];
    let mut acc = |a: &[f64], b: &[f64]| {
        for ((s, x), y) in sum.iter_mut().zip(a).zip(b) {
            *s += x * y;
        }
    };
    for k in 0..shells.len() {
        acc(&su[k], &dv[k]);
        acc(&sv[k], &du[k]);
        for l in k.saturating_sub(1)..(k + 2).min(shells.len()) {
            acc(&du[k], &dv[l]);
        }
    }
    let uv = product(&u.to_physical(), &v.to_physical());
    let denom = l2(&uv, h3);
    if denom == 0.0 {
        return 0.0;
    }
    let diff: Vec<f64> = uv.iter().zip(&sum).map(|(a, b)| a - b).collect();
    l2(&diff, h3) / denom
}

/// `LHS / RHS`, with `0/0 = 0` and `x/0` for `x > 0` reported as skipped.
fn ratio(lhs: f64, rhs: f64) -> Option<f64> {
    if lhs == 0.0 {
        Some(0.0)
    } else if rhs > 0.0 {
        Some(lhs / rhs)
    } else {
        None
    }
}

fn besov(bank: &DyadicBank, norms: &[f64], s: f64, p: f64, range: ShellRange) -> f64 {
    bank.aggregate(norms, BesovSpec::l1(s, p), range)
}

/// Per-shell `L^2` and `L^p` norms of `[u.grad, Delta_j] f` for every
/// exponent in `ps`, indexed `[exponent][shell]`.
fn commutator_norms(bank: &DyadicBank, u_phys: &[Vec<f64>; 3], f: &ScalarField, ps: &[f64]) -> Vec<Vec<f64>> {
    let g = bank.grid();
    let h3 = g.cell_volume();
    let adv = |grad: &VectorField| {
        let gp = grad.to_physical();
        let mut out = vec![0.0; g.size()];
        for c in 0..3 {
            for ((o, a), b) in out.iter_mut().zip(&u_phys[c]).zip(&gp[c]) {
                *o += a * b;
            }
        }
        out
    };
    let u_grad_f = ScalarField::from_physical(g, &adv(&gradient(f)));
    let mut out = vec![Vec::new(); ps.len()];
    for j in bank.shells(ShellRange::All) {
        let first = adv(&gradient(&bank.block(f, j)));
        let second = bank.block(&u_grad_f, j).to_physical();
        let comm: Vec<f64> = first.iter().zip(&second).map(|(a, b)| a - b).collect();
        for (o, &p) in out.iter_mut().zip(ps) {
            o.push(quadrature(&comm, h3, p));
        }
    }
    out
}

fn with_two(ps: &[f64]) -> Vec<f64> {
    let mut all = vec![2.0];
    all.extend(ps.iter().copied().filter(|&p| p != 2.0));
    all
}

fn index_of(all: &[f64], p: f64) -> usize {
    all.iter().position(|&q| q == p).expect("exponent present")
}

/// Ratios of the four commutator inequalities for one sample, per exponent.
pub fn commutator_ratios(
    bank: &DyadicBank,
    u: &VectorField,
    v: &ScalarField,
    w: &ScalarField,
    ps: &[f64],
) -> Vec<[Option<f64>; 4]> {
    let all = with_two(ps);
    let u_phys = u.to_physical();
    let cv = commutator_norms(bank, &u_phys, v, &all);
    let cw = commutator_norms(bank, &u_phys, w, &all);
    let nv = bank.shell_norms_many(v, &all);
    let nw = bank.shell_norms_many(w, &all);
    let ngu = bank.shell_norms_many(&gradient_matrix(u), &all);
    let i2 = 0;
    ps.iter()
        .map(|&p| {
            let ip = index_of(&all, p);
            let (lo, hi, al) = (ShellRange::Low, ShellRange::High, ShellRange::All);
            let grad_u = besov(bank, &ngu[ip], 3.0 / p, p, al);
            let grad_u_low = besov(bank, &ngu[i2], 1.5, 2.0, lo);
            let grad_u_high = besov(bank, &ngu[ip], 3.0 / p, p, hi);
            let v_full = besov(bank, &nv[ip], 3.0 / p - 1.0, p, al);
            let w_full = besov(bank, &nw[ip], 3.0 / p, p, al);

            let lhs1 = besov(bank, &cv[i2], 0.5, 2.0, lo);
            let rhs1 = besov(bank, &nv[i2], 0.5, 2.0, lo) * grad_u + v_full * grad_u_low;
            let lhs2 = besov(bank, &cv[ip], 3.0 / p - 1.0, p, hi);
            let rhs2 = besov(bank, &nv[ip], 3.0 / p - 1.0, p, hi) * grad_u + v_full * grad_u_high;
            let lhs3 = besov(bank, &cw[i2], 1.5, 2.0, lo);
            let rhs3 = besov(bank, &nw[i2], 1.5, 2.0, lo) * grad_u + w_full * grad_u_low;
            let lhs4 = besov(bank, &cw[ip], 3.0 / p, p, hi);
            let rhs4 = besov(bank, &nw[ip], 3.0 / p, p, hi) * grad_u + w_full * grad_u_high;
            [ratio(lhs1, rhs1), ratio(lhs2, rhs2), ratio(lhs3, rhs3), ratio(lhs4, rhs4)]
        })
        .collect()
}

/// Ratios of the four product inequalities for one sample, per exponent.
pub fn product_ratios(
    bank: &DyadicBank,
    u: &ScalarField,
    v: &ScalarField,
    w: &ScalarField,
    ps: &[f64],
) -> Vec<[Option<f64>; 4]> {
    let g = bank.grid();
    let all = with_two(ps);
    let up = u.to_physical();
    let vu = ScalarField::from_physical(g, &product(&v.to_physical(), &up));
    let wu = ScalarField::from_physical(g, &product(&w.to_physical(), &up));
    let n_u = bank.shell_norms_many(u, &all);
    let n_v = bank.shell_norms_many(v, &all);
    let n_w = bank.shell_norms_many(w, &all);
    let n_vu = bank.shell_norms_many(&vu, &all);
    let n_wu = bank.shell_norms_many(&wu, &all);
    let i2 = 0;
    ps.iter()
        .map(|&p| {
            let ip = index_of(&all, p);
            let (lo, hi, al) = (ShellRange::Low, ShellRange::High, ShellRange::All);
            let u_full = besov(bank, &n_u[ip], 3.0 / p, p, al);
            let v_split = besov(bank, &n_v[i2], 0.5, 2.0, lo) + besov(bank, &n_v[ip], 3.0 / p - 1.0, p, hi);
            let w_split = besov(bank, &n_w[i2], 1.5, 2.0, lo) + besov(bank, &n_w[ip], 3.0 / p, p, hi);
            let u_split = besov(bank, &n_u[i2], 1.5, 2.0, lo) + besov(bank, &n_u[ip], 3.0 / p, p, hi);

            let lhs1 = besov(bank, &n_vu[i2], 0.5, 2.0, lo);
            let lhs2 = besov(bank, &n_vu[ip], 3.0 / p - 1.0, p, hi);
            let lhs3 = besov(bank, &n_wu[i2], 1.5, 2.0, lo);
            let lhs4 = besov(bank, &n_wu[ip], 3.0 / p, p, hi);
            let w_full = besov(bank, &n_w[ip], 3.0 / p, p, al);
            [
                ratio(lhs1, v_split * u_full),
                ratio(lhs2, v_split * u_full),
                ratio(lhs3, w_split * u_split),
                ratio(lhs4, w_full * u_full),
            ]
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeFamily {
    Commutator,
    Product,
}

impl ProbeFamily {
    pub fn name(self) -> &'static str {
        match self {
            ProbeFamily::Commutator => "commutator",
            ProbeFamily::Product => "product",
        }
    }
}

/// Ratio statistics for one inequality at one exponent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub estimate_id: String,
    pub p: f64,
    pub seed: u64,
    pub n: usize,
    pub sample_count: usize,
    pub skipped: usize,
    pub ratio_min: f64,
    pub ratio_median: f64,
    pub ratio_max: f64,
    pub ceiling: f64,
    pub pass: bool,
}

impl ProbeReport {
    fn from_ratios(estimate_id: String, p: f64, seed: u64, n: usize, ratios: &[Option<f64>], ceiling: f64) -> Self {
        let mut vals: Vec<f64> = ratios.iter().flatten().copied().collect();
        vals.sort_by(f64::total_cmp);
        let skipped = ratios.len() - vals.len();
        let (min, median, max) = if vals.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            let m = vals.len();
            let median = if m % 2 == 1 {
                vals[m / 2]
            } else {
                0.5 * (vals[m / 2 - 1] + vals[m / 2])
            };
            (vals[0], median, vals[m - 1])
        };
        let pass = !vals.is_empty() && vals.iter().all(|r| r.is_finite() && *r <= ceiling);
        Self {
            estimate_id,
            p,
            seed,
            n,
            sample_count: ratios.len(),
            skipped,
            ratio_min: min,
            ratio_median: median,
            ratio_max: max,
            ceiling,
            pass,
        }
    }
}

/// Default ceiling on probe ratios.
pub const DEFAULT_CEILING: f64 = 1e3;

fn sample_seed(seed: u64, i: usize) -> u64 {
    ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)).random()
}

/// Runs `count` seeded samples of one probe family and returns one report
/// per inequality and exponent, ordered by exponent then inequality.
pub fn run_probe(
    family: ProbeFamily,
    bank: &DyadicBank,
    seed: u64,
    count: usize,
    ps: &[f64],
    ceiling: f64,
) -> Result<Vec<ProbeReport>> {
    if count == 0 {
        return Err(Error::InvalidParameter("probe needs at least one sample".into()));
    }
    for &p in ps {
        if !(2.0..=4.0).contains(&p) {
            return Err(Error::InvalidLebesgue(p));
        }
    }
    let g = bank.grid().clone();
    let radius = probe_radius(&g);
    let per_sample: Vec<Vec<[Option<f64>; 4]>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rf = RandomFields::new(sample_seed(seed, i)).with_radius(radius);
            match family {
                ProbeFamily::Commutator => {
                    let u = rf.solenoidal(&g);
                    let v = rf.scalar(&g);
                    let w = rf.scalar(&g);
                    commutator_ratios(bank, &u, &v, &w, ps)
                }
                ProbeFamily::Product => {
                    let u = rf.scalar(&g);
                    let v = rf.scalar(&g);
                    let w = rf.scalar(&g);
                    product_ratios(bank, &u, &v, &w, ps)
                }
            }
        })
        .collect();
    let mut reports = Vec::new();
    for (ip, &p) in ps.iter().enumerate() {
        for k in 0..4 {
            let ratios: Vec<Option<f64>> = per_sample.iter().map(|s| s[ip][k]).collect();
            let id = format!("{}_{}", family.name(), k + 1);
            reports.push(ProbeReport::from_ratios(id, p, seed, g.n(), &ratios, ceiling));
        }
    }
    Ok(reports)
}

pub fn commutator_probe(bank: &DyadicBank, seed: u64, count: usize, p: f64) -> Result<Vec<ProbeReport>> {
    run_probe(ProbeFamily::Commutator, bank, seed, count, &[p], DEFAULT_CEILING)
}

pub fn product_probe(bank: &DyadicBank, seed: u64, count: usize, p: f64) -> Result<Vec<ProbeReport>> {
    run_probe(ProbeFamily::Product, bank, seed, count, &[p], DEFAULT_CEILING)
}
