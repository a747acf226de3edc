//! Periodic grid on the 3-torus and the real <-> spectral transforms.
//!
//! Spectral coefficients use the Fourier-series normalisation
//! `f(x) = sum_k c(k) exp(i k.x)`, so `c(0)` is the mean of `f` and the
//! discrete Parseval identity reads `h^3 sum_x |f|^2 = V sum_k |c(k)|^2`.
//!
//! Storage is row-major over `(x1, x2, x3)`: flat index `(a * n + b) * n + c`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform `n^3` grid on `[0, L)^3`. Cheap to clone.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

struct GridInner {
    n: usize,
    length: f64,
    /// Wavenumber per axis index; the Nyquist index carries `-n/2`.
    k: Vec<f64>,
    /// Integer mode per axis index.
    mode: Vec<i64>,
    /// Largest |k_i| kept by the two-thirds rule.
    dealias_cutoff: i64,
    /// Per flat index: derivative wavevector, `|k|`, two-thirds membership.
    dwave: Vec<[f64; 3]>,
    knorm: Vec<f64>,
    dealias_mask: Vec<bool>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.inner.n)
            .field("length", &self.inner.length)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.n == other.inner.n && self.inner.length == other.inner.length)
    }
}

impl Grid {
    /// Grid on the standard `2 pi` box.
    pub fn new(n: usize) -> Result<Self> {
        Self::with_length(n, 2.0 * PI)
    }

    pub fn with_length(n: usize, length: f64) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "modes per axis must be even and >= 8, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("box length must be positive, got {length}")));
        }
        let half = (n / 2) as i64;
        let mode: Vec<i64> = (0..n as i64)
            .map(|m| if m < half { m } else { m - n as i64 })
            .collect();
        let base = 2.0 * PI / length;
        let k: Vec<f64> = mode.iter().map(|&m| base * m as f64).collect();
        // largest K with 3K < n
        let dealias_cutoff = (n as i64 - 1) / 3;
        let dk: Vec<f64> = (0..n).map(|m| if mode[m] == -half { 0.0 } else { k[m] }).collect();
        let n3 = n * n * n;
        let mut dwave = Vec::with_capacity(n3);
        let mut knorm = Vec::with_capacity(n3);
        let mut dealias_mask = Vec::with_capacity(n3);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    dwave.push([dk[a], dk[b], dk[c]]);
                    knorm.push((k[a] * k[a] + k[b] * k[b] + k[c] * k[c]).sqrt());
                    dealias_mask.push([a, b, c].iter().all(|&m| mode[m].abs() <= dealias_cutoff));
                }
            }
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Self {
            inner: Arc::new(GridInner {
                n,
                length,
                k,
                mode,
                dealias_cutoff,
                dwave,
                knorm,
                dealias_mask,
                forward,
                inverse,
            }),
        })
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    /// Total number of grid points (and of spectral coefficients).
    pub fn size(&self) -> usize {
        self.inner.n * self.inner.n * self.inner.n
    }

    pub fn length(&self) -> f64 {
        self.inner.length
    }

    pub fn spacing(&self) -> f64 {
        self.inner.length / self.inner.n as f64
    }

    pub fn volume(&self) -> f64 {
        self.inner.length.powi(3)
    }

    /// Quadrature weight `h^3` of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    pub fn dealias_cutoff(&self) -> i64 {
        self.inner.dealias_cutoff
    }

    #[inline]
    pub fn split_index(&self, idx: usize) -> [usize; 3] {
        let n = self.inner.n;
        [idx / (n * n), (idx / n) % n, idx % n]
    }

    #[inline]
    pub fn join_index(&self, a: usize, b: usize, c: usize) -> usize {
        let n = self.inner.n;
        (a * n + b) * n + c
    }

    /// Integer mode triple at a flat spectral index.
    #[inline]
    pub fn mode(&self, idx: usize) -> [i64; 3] {
        let [a, b, c] = self.split_index(idx);
        [self.inner.mode[a], self.inner.mode[b], self.inner.mode[c]]
    }

    /// Flat index of an integer mode triple (taken modulo `n`).
    pub fn index_of(&self, mode: [i64; 3]) -> usize {
        let n = self.inner.n as i64;
        let w = |m: i64| m.rem_euclid(n) as usize;
        self.join_index(w(mode[0]), w(mode[1]), w(mode[2]))
    }

    /// Index of `-k`.
    #[inline]
    pub fn negated_index(&self, idx: usize) -> usize {
        let n = self.inner.n;
        let [a, b, c] = self.split_index(idx);
        self.join_index((n - a) % n, (n - b) % n, (n - c) % n)
    }

    /// Wavenumber of axis index `m`.
    #[inline]
    pub fn axis_wavenumber(&self, m: usize) -> f64 {
        self.inner.k[m]
    }

    /// Physical wavevector at a flat index.
    #[inline]
    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let [a, b, c] = self.split_index(idx);
        [self.inner.k[a], self.inner.k[b], self.inner.k[c]]
    }

    /// Wavevector used by first-order derivatives: Nyquist components are
    /// zeroed, since `i k` applied there would break Hermitian symmetry.
    #[inline]
    pub fn derivative_wavevector(&self, idx: usize) -> [f64; 3] {
        self.inner.dwave[idx]
    }

    #[inline]
    pub fn wavenumber_norm(&self, idx: usize) -> f64 {
        self.inner.knorm[idx]
    }

    /// True when some component sits on the Nyquist plane.
    pub fn is_nyquist(&self, idx: usize) -> bool {
        let half = (self.inner.n / 2) as i64;
        self.mode(idx).iter().any(|m| m.abs() == half)
    }

    /// Two-thirds rule membership: every |k_i| <= K with 3K < n.
    #[inline]
    pub fn in_dealias_set(&self, idx: usize) -> bool {
        self.inner.dealias_mask[idx]
    }

    /// Smallest nonzero wavenumber magnitude.
    pub fn min_wavenumber(&self) -> f64 {
        2.0 * PI / self.inner.length
    }

    /// Largest wavenumber magnitude on the grid (the Nyquist corner).
    pub fn max_wavenumber(&self) -> f64 {
        3f64.sqrt() * (self.inner.n / 2) as f64 * self.min_wavenumber()
    }

    /// Physical coordinates of a grid point.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let h = self.spacing();
        let [a, b, c] = self.split_index(idx);
        [a as f64 * h, b as f64 * h, c as f64 * h]
    }

    /// Sample a function on the grid.
    pub fn sample(&self, f: impl Fn([f64; 3]) -> f64 + Sync) -> Vec<f64> {
        (0..self.size()).into_par_iter().map(|i| f(self.point(i))).collect()
    }

    /// Real field -> spectral coefficients.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        assert_eq!(values.len(), self.size());
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft3(&mut data, &self.inner.forward);
        let scale = 1.0 / self.size() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
        data
    }

    /// Spectral coefficients -> real field. The imaginary residue of a
    /// non-Hermitian input is discarded.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.size());
        let mut data = coeffs.to_vec();
        self.fft3(&mut data, &self.inner.inverse);
        data.into_iter().map(|c| c.re).collect()
    }

    /// Inverse-transform several Hermitian coefficient sets, two per complex
    /// FFT, in parallel across pairs.
    pub fn inverse_many(&self, fields: &[&[Complex64]]) -> Vec<Vec<f64>> {
        let pairs: Vec<(Vec<f64>, Option<Vec<f64>>)> = fields
            .par_chunks(2)
            .map(|chunk| match chunk {
                [a, b] => {
                    let (x, y) = self.inverse_pair(a, b);
                    (x, Some(y))
                }
                [a] => (self.inverse(a), None),
                _ => unreachable!(),
            })
            .collect();
        let mut out = Vec::with_capacity(fields.len());
        for (x, y) in pairs {
            out.push(x);
            if let Some(y) = y {
                out.push(y);
            }
        }
        out
    }

    /// Forward-transform several real fields, two per complex FFT.
    pub fn forward_many(&self, fields: &[&[f64]]) -> Vec<Vec<Complex64>> {
        let pairs: Vec<(Vec<Complex64>, Option<Vec<Complex64>>)> = fields
            .par_chunks(2)
            .map(|chunk| match chunk {
                [a, b] => {
                    let (x, y) = self.forward_pair(a, b);
                    (x, Some(y))
                }
                [a] => (self.forward(a), None),
                _ => unreachable!(),
            })
            .collect();
        let mut out = Vec::with_capacity(fields.len());
        for (x, y) in pairs {
            out.push(x);
            if let Some(y) = y {
                out.push(y);
            }
        }
        out
    }

    fn inverse_pair(&self, a: &[Complex64], b: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let i = Complex64::i();
        let mut data: Vec<Complex64> = a.iter().zip(b).map(|(&x, &y)| x + i * y).collect();
        self.fft3(&mut data, &self.inner.inverse);
        data.into_iter().map(|c| (c.re, c.im)).unzip()
    }

    fn forward_pair(&self, f: &[f64], g: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut data: Vec<Complex64> = f.iter().zip(g).map(|(&x, &y)| Complex64::new(x, y)).collect();
        self.fft3(&mut data, &self.inner.forward);
        let scale = 0.5 / self.size() as f64;
        let mut ff = vec![Complex64::new(0.0, 0.0); self.size()];
        let mut gg = vec![Complex64::new(0.0, 0.0); self.size()];
        for idx in 0..self.size() {
            let h = data[idx];
            let hm = data[self.negated_index(idx)].conj();
            ff[idx] = (h + hm) * scale;
            // (h - hm) / (2i)
            let d = (h - hm) * scale;
            gg[idx] = Complex64::new(d.im, -d.re);
        }
        (ff, gg)
    }

    /// Unnormalised 3-D FFT, one axis at a time.
    fn fft3(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.inner.n;
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        // x3: contiguous lines
        plan.process_with_scratch(data, &mut scratch);
        // x2: transpose each (b, c) plane
        let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
        for plane in data.chunks_mut(n * n) {
            for b in 0..n {
                for c in 0..n {
                    buf[c * n + b] = plane[b * n + c];
                }
            }
            plan.process_with_scratch(&mut buf, &mut scratch);
            for b in 0..n {
                for c in 0..n {
                    plane[b * n + c] = buf[c * n + b];
                }
            }
        }
        // x1: gather lines with stride n^2, one b-slab at a time
        for b in 0..n {
            for a in 0..n {
                for c in 0..n {
                    buf[c * n + a] = data[(a * n + b) * n + c];
                }
            }
            plan.process_with_scratch(&mut buf, &mut scratch);
            for a in 0..n {
                for c in 0..n {
                    data[(a * n + b) * n + c] = buf[c * n + a];
                }
            }
        }
    }
}
