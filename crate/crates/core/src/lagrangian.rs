//! Tracer particles along `dq/dt = u(t, q)` and the Riccati law for the
//! trace of the stress along characteristics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::integrator::{BlowUp, BlowUpKind};

/// `|tr tau|` beyond which a discrete trajectory counts as blown up.
pub const BLOWUP_TRACE: f64 = 1e6;

/// Closed form `y0 / (1 + y0 t)` of `y' = -y^2`.
pub fn riccati_exact(y0: f64, t: f64) -> Result<f64> {
    let d = 1.0 + y0 * t;
    if d <= 0.0 {
        return Err(Error::BlowUp(BlowUp {
            kind: BlowUpKind::TraceThreshold,
            t: blowup_time(y0),
            dt: 0.0,
            max_abs_trace: f64::INFINITY,
        }));
    }
    Ok(y0 / d)
}

/// `-1/y0` for negative data, infinite otherwise.
pub fn blowup_time(y0: f64) -> f64 {
    if y0 < 0.0 {
        -1.0 / y0
    } else {
        f64::INFINITY
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Trilinear,
    /// Exact trigonometric evaluation; costs a full coefficient sum per point.
    Spectral,
}

/// Velocity prepared for point queries.
pub struct VelocitySampler<'a> {
    grid: Grid,
    mode: Interpolation,
    phys: Option<[Vec<f64>; 3]>,
    spectral: &'a VectorField,
}

impl<'a> VelocitySampler<'a> {
    pub fn new(u: &'a VectorField, mode: Interpolation) -> Self {
        let phys = match mode {
            Interpolation::Trilinear => Some(u.to_physical()),
            Interpolation::Spectral => None,
        };
        Self {
            grid: u.comps[0].grid().clone(),
            mode,
            phys,
            spectral: u,
        }
    }

    pub fn sample(&self, x: [f64; 3]) -> [f64; 3] {
        match (self.mode, &self.phys) {
            (Interpolation::Trilinear, Some(phys)) => trilinear(&self.grid, phys, x),
            _ => std::array::from_fn(|c| self.spectral.comps[c].evaluate_at(x)),
        }
    }
}

fn trilinear(grid: &Grid, phys: &[Vec<f64>; 3], x: [f64; 3]) -> [f64; 3] {
    let n = grid.n();
    let h = grid.spacing();
    let mut i0 = [0usize; 3];
    let mut w = [0.0; 3];
    for d in 0..3 {
        let s = wrap(x[d], grid.length()) / h;
        let f = s.floor();
        i0[d] = (f as usize) % n;
        w[d] = s - f;
    }
    let mut out = [0.0; 3];
    for corner in 0..8 {
        let bit = |d: usize| (corner >> (2 - d)) & 1;
        let mut weight = 1.0;
        let mut idx = [0usize; 3];
        for d in 0..3 {
            let b = bit(d);
            weight *= if b == 1 { w[d] } else { 1.0 - w[d] };
            idx[d] = (i0[d] + b) % n;
        }
        if weight == 0.0 {
            continue;
        }
        let flat = grid.join_index(idx[0], idx[1], idx[2]);
        for c in 0..3 {
            out[c] += weight * phys[c][flat];
        }
    }
    out
}

fn wrap(x: f64, l: f64) -> f64 {
    let r = x.rem_euclid(l);
    if r >= l {
        0.0
    } else {
        r
    }
}

fn wrap3(x: [f64; 3], l: f64) -> [f64; 3] {
    x.map(|v| wrap(v, l))
}

fn axpy3(x: [f64; 3], a: f64, v: [f64; 3]) -> [f64; 3] {
    [x[0] + a * v[0], x[1] + a * v[1], x[2] + a * v[2]]
}

/// Tracked points with their initial trace values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleSet {
    pub positions: Vec<[f64; 3]>,
    pub labels: Vec<String>,
    pub initial_trace: Vec<f64>,
    box_length: f64,
}

impl ParticleSet {
    pub fn new(grid: &Grid, positions: Vec<[f64; 3]>, labels: Vec<String>, initial_trace: Vec<f64>) -> Result<Self> {
        if labels.len() != positions.len() || initial_trace.len() != positions.len() {
            return Err(Error::InvalidParameter("particle arrays differ in length".into()));
        }
        let l = grid.length();
        Ok(Self {
            positions: positions.into_iter().map(|x| wrap3(x, l)).collect(),
            labels,
            initial_trace,
            box_length: l,
        })
    }

    /// Particles at `positions` whose initial trace is read off `trace0`.
    pub fn seeded(trace0: &ScalarField, positions: Vec<[f64; 3]>) -> Self {
        let labels = (0..positions.len()).map(|i| format!("p{i}")).collect();
        let initial = positions.iter().map(|&x| trace0.evaluate_at(x)).collect();
        Self::new(trace0.grid(), positions, labels, initial).expect("consistent lengths")
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// RK4 step in a velocity frozen over `[t, t + dt]`.
    pub fn advect(&mut self, u: &VectorField, dt: f64, mode: Interpolation) {
        let s = VelocitySampler::new(u, mode);
        self.rk4(|_, x| s.sample(x), dt);
    }

    /// RK4 step with the velocity interpolated linearly in time between the
    /// fields at the two ends of the step.
    pub fn advect_between(&mut self, u0: &VectorField, u1: &VectorField, dt: f64, mode: Interpolation) {
        let s0 = VelocitySampler::new(u0, mode);
        let s1 = VelocitySampler::new(u1, mode);
        self.rk4(
            |theta, x| {
                let a = s0.sample(x);
                let b = s1.sample(x);
                std::array::from_fn(|c| (1.0 - theta) * a[c] + theta * b[c])
            },
            dt,
        );
    }

    /// `vel(theta, x)` with `theta in [0, 1]` the fraction of the step.
    fn rk4(&mut self, vel: impl Fn(f64, [f64; 3]) -> [f64; 3] + Sync, dt: f64) {
        let l = self.box_length;
        self.positions.par_iter_mut().for_each(|q| {
            let k1 = vel(0.0, *q);
            let k2 = vel(0.5, axpy3(*q, 0.5 * dt, k1));
            let k3 = vel(0.5, axpy3(*q, 0.5 * dt, k2));
            let k4 = vel(1.0, axpy3(*q, dt, k3));
            let inc: [f64; 3] = std::array::from_fn(|c| dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]));
            *q = wrap3(axpy3(*q, 1.0, inc), l);
        });
    }

    /// Exact point values of a scalar at the particles.
    pub fn sample_scalar(&self, f: &ScalarField) -> Vec<f64> {
        self.positions.par_iter().map(|&x| f.evaluate_at(x)).collect()
    }
}

/// Sampled trace against the Riccati law for one particle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSeries {
    pub y0: f64,
    pub times: Vec<f64>,
    pub sampled: Vec<f64>,
    pub exact: Vec<f64>,
    /// Max of `|sampled - exact| / |exact|` (absolute when `exact = 0`) over
    /// samples with `t <= t_limit`.
    pub max_rel_deviation: f64,
    /// First time the sample crossed [`BLOWUP_TRACE`] or went non-finite.
    pub blowup_at: Option<f64>,
}

/// Compare a sampled trace history with `riccati_exact(y0, t)`. The series is
/// truncated at the last finite sample below the blow-up threshold and at
/// the analytic blow-up time.
pub fn trace_along_trajectory(times: &[f64], sampled: &[f64], y0: f64, t_limit: f64) -> TraceSeries {
    let mut out = TraceSeries {
        y0,
        times: Vec::new(),
        sampled: Vec::new(),
        exact: Vec::new(),
        max_rel_deviation: 0.0,
        blowup_at: None,
    };
    for (&t, &s) in times.iter().zip(sampled) {
        if !s.is_finite() || s.abs() > BLOWUP_TRACE {
            out.blowup_at = Some(t);
            break;
        }
        let Ok(e) = riccati_exact(y0, t) else { break };
        if t <= t_limit {
            let dev = if e == 0.0 { (s - e).abs() } else { ((s - e) / e).abs() };
            out.max_rel_deviation = out.max_rel_deviation.max(dev);
        }
        out.times.push(t);
        out.sampled.push(s);
        out.exact.push(e);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldComponents;

    #[test]
    fn riccati_examples() {
        assert_eq!(blowup_time(-1.0), 1.0);
        assert!(riccati_exact(-1.0, 1.0).is_err());
        assert!(riccati_exact(-1.0, 0.999).unwrap() < -999.0);
        assert_eq!(riccati_exact(0.0, 123.0).unwrap(), 0.0);
        assert_eq!(blowup_time(0.0), f64::INFINITY);
        assert_eq!(riccati_exact(1.0, 1.0).unwrap(), 0.5);
    }

    #[test]
    fn riccati_semigroup_and_monotonicity() {
        for y0 in [-2.0, -0.3, 0.5, 4.0] {
            let (s, t) = (0.1, 0.15);
            let a = riccati_exact(riccati_exact(y0, s).unwrap(), t).unwrap();
            let b = riccati_exact(y0, s + t).unwrap();
            assert!((a - b).abs() < 1e-12 * b.abs().max(1.0));
            let mut prev = y0;
            for k in 1..20 {
                let v = riccati_exact(y0, 0.01 * k as f64).unwrap();
                assert!(v < prev);
                prev = v;
            }
        }
    }

    #[test]
    fn zero_and_constant_velocity() {
        let g = Grid::new(8).unwrap();
        let pos = vec![[0.1, 2.0, 6.2], [3.0, 3.0, 3.0]];
        let mut ps = ParticleSet::new(&g, pos.clone(), vec!["a".into(), "b".into()], vec![0.0, 0.0]).unwrap();
        ps.advect(&VectorField::zeros(&g), 0.3, Interpolation::Trilinear);
        assert_eq!(ps.positions, pos);
        let c = [0.7, -0.2, 1.1];
        let u = VectorField::from_fn(&g, |_| c);
        ps.advect(&u, 0.1, Interpolation::Trilinear);
        let l = g.length();
        for (p, q) in ps.positions.iter().zip(&pos) {
            for d in 0..3 {
                let expect = (q[d] + 0.1 * c[d]).rem_euclid(l);
                assert!((p[d] - expect).abs() < 1e-13);
                assert!(p[d] >= 0.0 && p[d] < l);
            }
        }
    }

    #[test]
    fn spectral_tracer_has_fourth_order_local_error() {
        // reference: 400 substeps of the same scheme
        let g = Grid::new(8).unwrap();
        let u = VectorField::from_fn(&g, |x| [x[1].sin(), x[2].cos(), x[0].sin()]);
        let reference = |dt: f64| {
            let mut ps = ParticleSet::new(&g, vec![[1.0, 2.0, 0.5]], vec!["r".into()], vec![0.0]).unwrap();
            let sub = 400;
            for _ in 0..sub {
                ps.advect(&u, dt / sub as f64, Interpolation::Spectral);
            }
            ps.positions[0]
        };
        let err = |dt: f64| {
            let mut ps = ParticleSet::new(&g, vec![[1.0, 2.0, 0.5]], vec!["r".into()], vec![0.0]).unwrap();
            ps.advect(&u, dt, Interpolation::Spectral);
            let r = reference(dt);
            (0..3).map(|d| (ps.positions[0][d] - r[d]).abs()).fold(0.0, f64::max)
        };
        let ratio = err(0.2) / err(0.1);
        assert!(ratio > 25.0, "local error ratio {ratio}");
        assert!(u.max_coeff() > 0.0);
    }

    #[test]
    fn trilinear_error_is_second_order_in_h() {
        let err = |n: usize| {
            let g = Grid::new(n).unwrap();
            let u = VectorField::from_fn(&g, |x| [x[1].sin(), x[2].cos(), x[0].sin()]);
            let s = VelocitySampler::new(&u, Interpolation::Trilinear);
            let mut worst = 0.0f64;
            for k in 0..200 {
                let a = 0.0317 * k as f64;
                let x = [a, 2.3 * a + 0.1, 5.1 * a + 0.7];
                let v = s.sample(x);
                let e = [x[1].sin(), x[2].cos(), x[0].sin()];
                worst = (0..3).map(|d| (v[d] - e[d]).abs()).fold(worst, f64::max);
            }
            worst
        };
        let ratio = err(16) / err(32);
        assert!(ratio > 3.0, "{ratio}");
    }

    #[test]
    fn series_truncation_and_deviation() {
        let times: Vec<f64> = (0..=12).map(|k| 0.1 * k as f64).collect();
        let sampled: Vec<f64> = times
            .iter()
            .map(|&t| riccati_exact(-1.0, t).map(|v| v * (1.0 + 1e-4)).unwrap_or(f64::NAN))
            .collect();
        let s = trace_along_trajectory(&times, &sampled, -1.0, 0.9);
        assert!((s.max_rel_deviation - 1e-4).abs() < 1e-10);
        assert_eq!(s.blowup_at, Some(1.0));
        assert_eq!(s.times.len(), 10);
    }
}
