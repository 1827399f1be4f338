//! Real fields stored as Fourier coefficients.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{MreError, Result};
use crate::grid::{Grid, MAX_DIM};

/// Real scalar field on the torus held as Hermitian-symmetric Fourier coefficients.
#[derive(Clone, Debug)]
pub struct SpectralScalar {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl SpectralScalar {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: vec![Complex64::default(); grid.len()],
        }
    }

    /// Field equal to `value` everywhere.
    pub fn constant(grid: &Grid, value: f64) -> Self {
        let mut s = Self::zeros(grid);
        s.coeffs[0] = Complex64::new(value, 0.0);
        s
    }

    pub fn from_coeffs(grid: &Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(MreError::Shape(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            coeffs,
        })
    }

    /// Forward transform of physical samples laid out as described in [`crate::grid`].
    pub fn from_physical(grid: &Grid, samples: &[f64]) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(MreError::Shape(format!(
                "expected {} samples, got {}",
                grid.len(),
                samples.len()
            )));
        }
        let mut coeffs: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        grid.forward(&mut coeffs);
        Ok(Self {
            grid: grid.clone(),
            coeffs,
        })
    }

    /// Samples `f` at the grid points and transforms.
    pub fn from_fn(grid: &Grid, f: impl Fn([f64; MAX_DIM]) -> f64) -> Self {
        let samples: Vec<f64> = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        Self::from_physical(grid, &samples).expect("sample count matches grid")
    }

    /// Inverse transform to physical samples.
    pub fn to_physical(&self) -> Vec<f64> {
        let mut buf = self.coeffs.clone();
        self.grid.inverse(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
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

    /// Coefficient of the mode with integer wavevector `k` (zero if not representable).
    pub fn coeff(&self, k: &[i64]) -> Complex64 {
        self.grid
            .mode_index(k)
            .map(|i| self.coeffs[i])
            .unwrap_or_default()
    }

    /// Sets the coefficient at `k` and its conjugate partner at `-k`.
    pub fn set_mode(&mut self, k: &[i64], value: Complex64) -> Result<()> {
        let i = self
            .grid
            .mode_index(k)
            .ok_or_else(|| MreError::Shape(format!("mode {k:?} not representable")))?;
        let j = self.grid.conjugate_index(i);
        self.coeffs[i] = value;
        self.coeffs[j] = value.conj();
        if i == j {
            self.coeffs[i].im = 0.0;
        }
        Ok(())
    }

    /// Spatial mean (the k = 0 coefficient).
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest deviation from Hermitian symmetry, `max |c(-k) - conj(c(k))|`.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.coeffs.len())
            .map(|i| (self.coeffs[self.grid.conjugate_index(i)] - self.coeffs[i].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Value at an arbitrary point by evaluating the Fourier series.
    pub fn eval_at(&self, x: &[f64]) -> f64 {
        let dim = self.grid.dim();
        let mut acc = 0.0;
        for (i, c) in self.coeffs.iter().enumerate() {
            if *c == Complex64::default() {
                continue;
            }
            let k = self.grid.wavevector(i);
            let phase: f64 = (0..dim).map(|a| k[a] as f64 * x[a]).sum();
            acc += (c * Complex64::from_polar(1.0, phase)).re;
        }
        acc
    }

    /// `(2π)^d Σ_k |c(k)|²`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.grid.volume() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// L² inner product via Parseval.
    pub fn inner(&self, other: &Self) -> f64 {
        self.grid.volume()
            * self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| (a.conj() * b).re)
                .sum::<f64>()
    }

    /// Multiplies every coefficient by `m(k, |k|²)`.
    pub fn apply_multiplier(&mut self, m: impl Fn([i64; MAX_DIM], f64) -> Complex64) {
        for (i, c) in self.coeffs.iter_mut().enumerate() {
            *c *= m(self.grid.wavevector(i), self.grid.k2(i));
        }
    }

    /// Zeroes every mode with some `|k_j| > n_j / 3`.
    pub fn dealias(&mut self) {
        for (i, c) in self.coeffs.iter_mut().enumerate() {
            if self.grid.is_aliased(i) {
                *c = Complex64::default();
            }
        }
    }

    pub fn dealiased(mut self) -> Self {
        self.dealias();
        self
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * alpha;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= alpha);
    }

    pub fn scaled(mut self, alpha: f64) -> Self {
        self.scale(alpha);
        self
    }

    /// Maximum coefficient-wise distance to `other`.
    pub fn max_coeff_diff(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Maximum pointwise distance to `other` on the collocation grid.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let d = self - other;
        d.to_physical().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn linf(&self) -> f64 {
        self.to_physical().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Copies the field onto a 3D grid obtained by extruding this 2D grid (x₃-independent).
    pub fn extrude(&self, grid3: &Grid) -> Result<Self> {
        let g = &self.grid;
        if g.dim() != 2 || grid3.dim() != 3 || grid3.n(0) != g.n(0) || grid3.n(1) != g.n(1) {
            return Err(MreError::GridMismatch(
                "target must extrude the source grid".into(),
            ));
        }
        let mut out = Self::zeros(grid3);
        let n3 = grid3.n(2);
        for (i, c) in self.coeffs.iter().enumerate() {
            out.coeffs[i * n3] = *c;
        }
        Ok(out)
    }
}

impl Add for &SpectralScalar {
    type Output = SpectralScalar;
    fn add(self, rhs: Self) -> SpectralScalar {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &SpectralScalar {
    type Output = SpectralScalar;
    fn sub(self, rhs: Self) -> SpectralScalar {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Neg for &SpectralScalar {
    type Output = SpectralScalar;
    fn neg(self) -> SpectralScalar {
        self.clone().scaled(-1.0)
    }
}

impl Mul<f64> for &SpectralScalar {
    type Output = SpectralScalar;
    fn mul(self, rhs: f64) -> SpectralScalar {
        self.clone().scaled(rhs)
    }
}

/// Real vector field: `dim` scalar components on one grid.
#[derive(Clone, Debug)]
pub struct SpectralVector {
    comps: Vec<SpectralScalar>,
}

impl SpectralVector {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            comps: (0..grid.dim()).map(|_| SpectralScalar::zeros(grid)).collect(),
        }
    }

    /// Constant field equal to `value`.
    pub fn constant(grid: &Grid, value: &[f64]) -> Result<Self> {
        if value.len() != grid.dim() {
            return Err(MreError::Shape("constant vector has wrong length".into()));
        }
        Ok(Self {
            comps: value
                .iter()
                .map(|&v| SpectralScalar::constant(grid, v))
                .collect(),
        })
    }

    pub fn from_components(comps: Vec<SpectralScalar>) -> Result<Self> {
        let Some(first) = comps.first() else {
            return Err(MreError::Shape("vector needs components".into()));
        };
        let grid = first.grid().clone();
        if comps.len() != grid.dim() {
            return Err(MreError::Shape(format!(
                "{} components for a {}-dimensional grid",
                comps.len(),
                grid.dim()
            )));
        }
        if comps.iter().any(|c| *c.grid() != grid) {
            return Err(MreError::GridMismatch("components on different grids".into()));
        }
        Ok(Self { comps })
    }

    /// Samples a vector-valued function at the grid points.
    pub fn from_fn(grid: &Grid, f: impl Fn([f64; MAX_DIM]) -> [f64; MAX_DIM]) -> Self {
        let pts: Vec<[f64; MAX_DIM]> = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        let comps = (0..grid.dim())
            .map(|c| {
                let samples: Vec<f64> = pts.iter().map(|p| p[c]).collect();
                SpectralScalar::from_physical(grid, &samples).expect("sizes match")
            })
            .collect();
        Self { comps }
    }

    pub fn grid(&self) -> &Grid {
        self.comps[0].grid()
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn comp(&self, i: usize) -> &SpectralScalar {
        &self.comps[i]
    }

    pub fn comp_mut(&mut self, i: usize) -> &mut SpectralScalar {
        &mut self.comps[i]
    }

    pub fn comps(&self) -> &[SpectralScalar] {
        &self.comps
    }

    pub fn into_components(self) -> Vec<SpectralScalar> {
        self.comps
    }

    pub fn to_physical(&self) -> Vec<Vec<f64>> {
        self.comps.iter().map(|c| c.to_physical()).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        self.comps.iter().map(|c| c.mean()).collect()
    }

    pub fn max_coeff(&self) -> f64 {
        self.comps.iter().map(|c| c.max_coeff()).fold(0.0, f64::max)
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.comps.iter().map(|c| c.l2_norm_sq()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    pub fn inner(&self, other: &Self) -> f64 {
        self.comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.inner(b))
            .sum()
    }

    /// Largest spectral divergence `|Σ_j i k_j c_j(k)|` over all modes.
    pub fn divergence_defect(&self) -> f64 {
        let grid = self.grid();
        (0..grid.len())
            .map(|i| {
                let k = grid.wavevector(i);
                let mut s = Complex64::default();
                for (axis, c) in self.comps.iter().enumerate() {
                    if !grid.is_nyquist(i, axis) {
                        s += Complex64::new(0.0, k[axis] as f64) * c.coeffs()[i];
                    }
                }
                s.norm()
            })
            .fold(0.0, f64::max)
    }

    /// Divergence-free test at the library tolerance, relative to the largest coefficient.
    pub fn is_divergence_free(&self) -> bool {
        self.divergence_defect() <= crate::DIV_FREE_TOL * self.max_coeff().max(f64::MIN_POSITIVE)
    }

    pub fn dealias(&mut self) {
        self.comps.iter_mut().for_each(|c| c.dealias());
    }

    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            a.axpy(alpha, b);
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.comps.iter_mut().for_each(|c| c.scale(alpha));
    }

    pub fn scaled(mut self, alpha: f64) -> Self {
        self.scale(alpha);
        self
    }

    pub fn max_coeff_diff(&self, other: &Self) -> f64 {
        self.comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.max_coeff_diff(b))
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    /// Pointwise maximum of the Euclidean norm on the collocation grid.
    pub fn linf(&self) -> f64 {
        let phys = self.to_physical();
        (0..self.grid().len())
            .map(|i| phys.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.is_finite())
    }
}

impl Add for &SpectralVector {
    type Output = SpectralVector;
    fn add(self, rhs: Self) -> SpectralVector {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &SpectralVector {
    type Output = SpectralVector;
    fn sub(self, rhs: Self) -> SpectralVector {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

/// Field types that live in Fourier space and can be combined linearly.
pub trait SpectralField: Clone {
    fn grid(&self) -> &Grid;
    fn axpy(&mut self, alpha: f64, other: &Self);
    fn scale(&mut self, alpha: f64);
    fn is_finite(&self) -> bool;
    /// Applies a scalar Fourier multiplier `m(|k|²)` to every component.
    fn apply_radial(&mut self, m: &dyn Fn(f64) -> f64);
    /// Largest |k = 0 coefficient| over components.
    fn mean_magnitude(&self) -> f64;
    fn max_coeff(&self) -> f64;
    /// Sum of `w(|k|²) |c(k)|²` over modes and components, times `(2π)^d`.
    fn weighted_norm_sq(&self, w: &dyn Fn(f64) -> f64) -> f64;
}

impl SpectralField for SpectralScalar {
    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn axpy(&mut self, alpha: f64, other: &Self) {
        SpectralScalar::axpy(self, alpha, other)
    }
    fn scale(&mut self, alpha: f64) {
        SpectralScalar::scale(self, alpha)
    }
    fn is_finite(&self) -> bool {
        SpectralScalar::is_finite(self)
    }
    fn apply_radial(&mut self, m: &dyn Fn(f64) -> f64) {
        for (i, c) in self.coeffs.iter_mut().enumerate() {
            *c *= m(self.grid.k2(i));
        }
    }
    fn mean_magnitude(&self) -> f64 {
        self.coeffs[0].norm()
    }
    fn max_coeff(&self) -> f64 {
        SpectralScalar::max_coeff(self)
    }
    fn weighted_norm_sq(&self, w: &dyn Fn(f64) -> f64) -> f64 {
        self.grid.volume()
            * self
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| w(self.grid.k2(i)) * c.norm_sqr())
                .sum::<f64>()
    }
}

impl SpectralField for SpectralVector {
    fn grid(&self) -> &Grid {
        SpectralVector::grid(self)
    }
    fn axpy(&mut self, alpha: f64, other: &Self) {
        SpectralVector::axpy(self, alpha, other)
    }
    fn scale(&mut self, alpha: f64) {
        SpectralVector::scale(self, alpha)
    }
    fn is_finite(&self) -> bool {
        SpectralVector::is_finite(self)
    }
    fn apply_radial(&mut self, m: &dyn Fn(f64) -> f64) {
        self.comps.iter_mut().for_each(|c| c.apply_radial(m));
    }
    fn mean_magnitude(&self) -> f64 {
        self.comps
            .iter()
            .map(|c| c.mean_magnitude())
            .fold(0.0, f64::max)
    }
    fn max_coeff(&self) -> f64 {
        SpectralVector::max_coeff(self)
    }
    fn weighted_norm_sq(&self, w: &dyn Fn(f64) -> f64) -> f64 {
        self.comps.iter().map(|c| c.weighted_norm_sq(w)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn cosine_has_two_half_modes() {
        let g = Grid::cubic(2, 16).unwrap();
        let s = SpectralScalar::from_fn(&g, |x| x[0].cos());
        assert!((s.coeff(&[1, 0]) - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((s.coeff(&[-1, 0]) - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        let rest: f64 = s.coeffs().iter().map(|c| c.norm()).sum::<f64>() - 1.0;
        assert!(rest.abs() < 1e-14);
    }

    #[test]
    fn constant_lives_in_zero_mode() {
        let g = Grid::cubic(3, 8).unwrap();
        let s = SpectralScalar::from_fn(&g, |_| 1.0);
        assert!((s.coeffs()[0].re - 1.0).abs() < 1e-15);
        assert!(s.coeffs()[1..].iter().all(|c| c.norm() < 1e-15));
    }

    #[test]
    fn size_mismatch_is_shape_error() {
        let g = Grid::cubic(2, 8).unwrap();
        assert!(matches!(
            SpectralScalar::from_physical(&g, &[0.0; 10]),
            Err(MreError::Shape(_))
        ));
    }

    #[test]
    fn l2_norm_uses_box_volume() {
        let g = Grid::cubic(2, 16).unwrap();
        let s = SpectralScalar::from_fn(&g, |x| x[1].sin());
        assert!((s.l2_norm_sq() - 2.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn point_evaluation_matches_samples() {
        let g = Grid::cubic(2, 16).unwrap();
        let s = SpectralScalar::from_fn(&g, |x| (2.0 * x[0]).sin() * x[1].cos() + 0.3);
        let v = s.eval_at(&[0.4, -1.1]);
        assert!((v - ((0.8f64).sin() * (-1.1f64).cos() + 0.3)).abs() < 1e-13);
    }

    #[test]
    fn set_mode_keeps_hermitian_symmetry() {
        let g = Grid::cubic(2, 8).unwrap();
        let mut s = SpectralScalar::zeros(&g);
        s.set_mode(&[2, -1], Complex64::new(0.3, -0.7)).unwrap();
        assert!(s.hermitian_defect() < 1e-16);
        let phys = s.to_physical();
        let back = SpectralScalar::from_physical(&g, &phys).unwrap();
        assert!(back.max_coeff_diff(&s) < 1e-15);
    }
}
