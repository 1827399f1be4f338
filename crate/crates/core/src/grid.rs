//! Uniform grids on the periodic box `[-π, π]^d` and the FFT plans attached to them.
//!
//! Both physical samples and Fourier coefficients are stored row-major in FFT
//! order: along each axis, index `i` corresponds to the wavenumber `i` for
//! `i <= n/2` and `i - n` otherwise, and to the coordinate `i·h` wrapped into
//! `[-π, π)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{MreError, Result};

/// Largest number of axes a grid may carry.
pub const MAX_DIM: usize = 3;

struct GridInner {
    n: Vec<usize>,
    len: usize,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    /// Integer wavevector per flat index, padded with zeros past `dim`.
    wavevectors: Vec<[i64; MAX_DIM]>,
    /// |k|² per flat index.
    k2: Vec<f64>,
}

/// Discretization of the torus `T^d = [-π, π]^d` with `n[j]` points per axis.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("n", &self.inner.n).finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || self.inner.n == other.inner.n
    }
}

impl Eq for Grid {}

impl Grid {
    /// Builds a grid with the given per-axis resolution (2 or 3 axes, each even and ≥ 8).
    pub fn new(n: &[usize]) -> Result<Self> {
        if n.len() != 2 && n.len() != 3 {
            return Err(MreError::Shape(format!(
                "grid dimension must be 2 or 3, got {}",
                n.len()
            )));
        }
        if let Some(bad) = n.iter().find(|&&m| m < 8 || m % 2 != 0) {
            return Err(MreError::Shape(format!(
                "per-axis resolution must be even and at least 8, got {bad}"
            )));
        }
        let mut planner = FftPlanner::new();
        let forward = n.iter().map(|&m| planner.plan_fft_forward(m)).collect();
        let inverse = n.iter().map(|&m| planner.plan_fft_inverse(m)).collect();
        let len: usize = n.iter().product();

        let mut wavevectors = Vec::with_capacity(len);
        let mut k2 = Vec::with_capacity(len);
        for flat in 0..len {
            let idx = unflatten(n, flat);
            let mut k = [0i64; MAX_DIM];
            for (axis, &i) in idx.iter().enumerate().take(n.len()) {
                k[axis] = index_to_wavenumber(i, n[axis]);
            }
            k2.push(k.iter().map(|&kj| (kj * kj) as f64).sum());
            wavevectors.push(k);
        }

        Ok(Self {
            inner: Arc::new(GridInner {
                n: n.to_vec(),
                len,
                forward,
                inverse,
                wavevectors,
                k2,
            }),
        })
    }

    /// Grid with the same resolution `n` along every one of `dim` axes.
    pub fn cubic(dim: usize, n: usize) -> Result<Self> {
        Self::new(&vec![n; dim])
    }

    /// Appends a third axis of `n3` points to a 2D grid.
    pub fn extrude(&self, n3: usize) -> Result<Self> {
        if self.dim() != 2 {
            return Err(MreError::Shape("only 2D grids can be extruded".into()));
        }
        Self::new(&[self.n(0), self.n(1), n3])
    }

    pub fn dim(&self) -> usize {
        self.inner.n.len()
    }

    pub fn n(&self, axis: usize) -> usize {
        self.inner.n[axis]
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.n
    }

    /// Total number of grid points (and of Fourier modes).
    pub fn len(&self) -> usize {
        self.inner.len
    }

    pub fn is_empty(&self) -> bool {
        self.inner.len == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * PI / self.n(axis) as f64
    }

    /// Smallest grid spacing over all axes.
    pub fn min_spacing(&self) -> f64 {
        (0..self.dim())
            .map(|a| self.spacing(a))
            .fold(f64::INFINITY, f64::min)
    }

    /// Volume of the torus, `(2π)^d`.
    pub fn volume(&self) -> f64 {
        (2.0 * PI).powi(self.dim() as i32)
    }

    /// Integer wavevector of the mode stored at `flat` (zero-padded to three entries).
    #[inline]
    pub fn wavevector(&self, flat: usize) -> [i64; MAX_DIM] {
        self.inner.wavevectors[flat]
    }

    /// |k|² of the mode stored at `flat`.
    #[inline]
    pub fn k2(&self, flat: usize) -> f64 {
        self.inner.k2[flat]
    }

    /// Whether the `axis` component of the mode at `flat` sits on the Nyquist frequency.
    #[inline]
    pub fn is_nyquist(&self, flat: usize, axis: usize) -> bool {
        self.inner.wavevectors[flat][axis] == (self.n(axis) / 2) as i64
    }

    /// Two-thirds rule: true when some `|k_j| > n_j / 3`.
    #[inline]
    pub fn is_aliased(&self, flat: usize) -> bool {
        let k = &self.inner.wavevectors[flat];
        (0..self.dim()).any(|a| 3 * k[a].unsigned_abs() as usize > self.n(a))
    }

    /// Flat index of the mode with integer wavevector `k`, if it is representable.
    pub fn mode_index(&self, k: &[i64]) -> Option<usize> {
        if k.len() != self.dim() {
            return None;
        }
        let mut flat = 0usize;
        for (axis, &kj) in k.iter().enumerate() {
            let n = self.n(axis) as i64;
            if kj <= -n / 2 || kj > n / 2 {
                return None;
            }
            let i = kj.rem_euclid(n) as usize;
            flat = flat * self.n(axis) + i;
        }
        Some(flat)
    }

    /// Flat index of the mode `-k` for the mode stored at `flat`.
    pub fn conjugate_index(&self, flat: usize) -> usize {
        let idx = unflatten(&self.inner.n, flat);
        let mut out = 0usize;
        for axis in 0..self.dim() {
            let n = self.n(axis);
            out = out * n + (n - idx[axis]) % n;
        }
        out
    }

    /// Physical coordinate of the grid point stored at `flat`, in `[-π, π)`.
    pub fn point(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = unflatten(&self.inner.n, flat);
        let mut x = [0.0; MAX_DIM];
        for axis in 0..self.dim() {
            x[axis] = self.coordinate(axis, idx[axis]);
        }
        x
    }

    /// Coordinate of index `i` along `axis`, wrapped into `[-π, π)`.
    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        let n = self.n(axis);
        let h = self.spacing(axis);
        if i < n / 2 {
            i as f64 * h
        } else {
            (i as f64 - n as f64) * h
        }
    }

    /// In-place forward transform, normalized so that the result holds Fourier-series coefficients.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inner.forward);
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
    }

    /// In-place inverse transform (coefficients to samples).
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inner.inverse);
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        assert_eq!(data.len(), self.len(), "buffer does not match grid");
        let shape = &self.inner.n;
        for axis in 0..self.dim() {
            let n = shape[axis];
            let inner: usize = shape[axis + 1..].iter().product();
            let plan = &plans[axis];
            if inner == 1 {
                data.par_chunks_mut(n).for_each_init(
                    || vec![Complex64::default(); plan.get_inplace_scratch_len()],
                    |scratch, line| plan.process_with_scratch(line, scratch),
                );
                continue;
            }
            // Lines along `axis` are strided; transpose each outer block so they become contiguous.
            let mut lines = vec![Complex64::default(); n * inner];
            for block in data.chunks_mut(n * inner) {
                for i in 0..n {
                    for j in 0..inner {
                        lines[j * n + i] = block[i * inner + j];
                    }
                }
                lines.par_chunks_mut(n).for_each_init(
                    || vec![Complex64::default(); plan.get_inplace_scratch_len()],
                    |scratch, line| plan.process_with_scratch(line, scratch),
                );
                for i in 0..n {
                    for j in 0..inner {
                        block[i * inner + j] = lines[j * n + i];
                    }
                }
            }
        }
    }
}

#[inline]
fn index_to_wavenumber(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

#[inline]
fn unflatten(shape: &[usize], mut flat: usize) -> [usize; MAX_DIM] {
    let mut idx = [0usize; MAX_DIM];
    for axis in (0..shape.len()).rev() {
        idx[axis] = flat % shape[axis];
        flat /= shape[axis];
    }
    idx
}
