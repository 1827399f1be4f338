//! Fourier-multiplier operators: derivatives, Leray projection, fractional
//! inverse Laplacian, curl and vector potential, plus dealiased products.

use num_complex::Complex64;

use crate::error::{MreError, Result};
use crate::field::{SpectralField, SpectralScalar, SpectralVector};
use crate::grid::Grid;

/// Relative threshold under which a k = 0 coefficient counts as zero.
pub const ZERO_MEAN_TOL: f64 = 1e-12;

/// `∂_axis s`: multiplies by `i k_axis` and zeroes the Nyquist mode along `axis`.
pub fn derivative(s: &SpectralScalar, axis: usize) -> Result<SpectralScalar> {
    let grid = s.grid();
    if axis >= grid.dim() {
        return Err(MreError::AxisOutOfRange {
            axis,
            dim: grid.dim(),
        });
    }
    let mut out = s.clone();
    let nyq = (grid.n(axis) / 2) as i64;
    out.apply_multiplier(|k, _| {
        if k[axis] == nyq {
            Complex64::default()
        } else {
            Complex64::new(0.0, k[axis] as f64)
        }
    });
    Ok(out)
}

/// Derivative along an axis known to exist.
pub(crate) fn d(s: &SpectralScalar, axis: usize) -> SpectralScalar {
    derivative(s, axis).expect("axis checked by caller")
}

pub fn gradient(s: &SpectralScalar) -> SpectralVector {
    let comps = (0..s.grid().dim()).map(|a| d(s, a)).collect();
    SpectralVector::from_components(comps).expect("one component per axis")
}

pub fn divergence(v: &SpectralVector) -> SpectralScalar {
    let mut out = SpectralScalar::zeros(v.grid());
    for (axis, c) in v.comps().iter().enumerate() {
        out.axpy(1.0, &d(c, axis));
    }
    out
}

/// Laplacian, `-|k|² c(k)`.
pub fn laplacian(s: &SpectralScalar) -> SpectralScalar {
    let mut out = s.clone();
    out.apply_radial(&|k2| -k2);
    out
}

/// Leray projection onto divergence-free fields: `c(k) ← (I - k kᵀ/|k|²) c(k)` for k ≠ 0.
pub fn leray_project(v: &SpectralVector) -> SpectralVector {
    let grid = v.grid().clone();
    let dim = grid.dim();
    let mut out = v.clone();
    let mut cs = [Complex64::default(); 3];
    for i in 1..grid.len() {
        let k = grid.wavevector(i);
        let k2 = grid.k2(i);
        let mut kdotc = Complex64::default();
        for a in 0..dim {
            cs[a] = out.comp(a).coeffs()[i];
            kdotc += cs[a] * k[a] as f64;
        }
        let f = kdotc / k2;
        for a in 0..dim {
            out.comp_mut(a).coeffs_mut()[i] = cs[a] - f * k[a] as f64;
        }
    }
    out
}

/// `(-Δ)^{-γ}`: multiplies each nonzero mode by `|k|^{-2γ}`; requires a zero-mean input.
pub fn inv_fractional_laplacian<F: SpectralField>(s: &F, gamma: f64) -> Result<F> {
    if gamma < 0.0 || !gamma.is_finite() {
        return Err(MreError::Domain(format!("gamma must be ≥ 0, got {gamma}")));
    }
    check_zero_mean(s)?;
    let mut out = s.clone();
    out.apply_radial(&|k2| if k2 == 0.0 { 0.0 } else { k2.powf(-gamma) });
    Ok(out)
}

/// Same as [`inv_fractional_laplacian`] but drops the mean instead of rejecting it.
pub(crate) fn inv_laplacian_drop_mean<F: SpectralField>(s: &F, gamma: f64) -> F {
    let mut out = s.clone();
    out.apply_radial(&|k2| if k2 == 0.0 { 0.0 } else { k2.powf(-gamma) });
    out
}

pub(crate) fn check_zero_mean<F: SpectralField>(s: &F) -> Result<()> {
    let mean = s.mean_magnitude();
    let scale = s.max_coeff();
    if mean > ZERO_MEAN_TOL * scale && mean > 0.0 {
        return Err(MreError::Domain(format!(
            "input must have zero mean (|mean| = {mean:e})"
        )));
    }
    Ok(())
}

/// Result of [`curl`]: a vector in 3D, the scalar `∂₁v₂ − ∂₂v₁` in 2D.
#[derive(Clone, Debug)]
pub enum Curl {
    Scalar(SpectralScalar),
    Vector(SpectralVector),
}

impl Curl {
    pub fn l2_norm(&self) -> f64 {
        match self {
            Curl::Scalar(s) => s.l2_norm(),
            Curl::Vector(v) => v.l2_norm(),
        }
    }

    pub fn into_vector(self) -> Option<SpectralVector> {
        match self {
            Curl::Vector(v) => Some(v),
            Curl::Scalar(_) => None,
        }
    }

    pub fn into_scalar(self) -> Option<SpectralScalar> {
        match self {
            Curl::Scalar(s) => Some(s),
            Curl::Vector(_) => None,
        }
    }
}

pub fn curl(v: &SpectralVector) -> Curl {
    match v.dim() {
        2 => Curl::Scalar(&d(v.comp(1), 0) - &d(v.comp(0), 1)),
        _ => Curl::Vector(curl3(v)),
    }
}

pub(crate) fn curl3(v: &SpectralVector) -> SpectralVector {
    // (∂₂v₃ − ∂₃v₂, ∂₃v₁ − ∂₁v₃, ∂₁v₂ − ∂₂v₁)
    let x = &d(v.comp(2), 1) - &d(v.comp(1), 2);
    let y = &d(v.comp(0), 2) - &d(v.comp(2), 0);
    let z = &d(v.comp(1), 0) - &d(v.comp(0), 1);
    SpectralVector::from_components(vec![x, y, z]).expect("3 components")
}

/// Zero-mean vector potential `A = (-Δ)^{-1} ∇×B` of a zero-mean, divergence-free 3D field.
pub fn vector_potential(b: &SpectralVector) -> Result<SpectralVector> {
    if b.dim() != 3 {
        return Err(MreError::Shape("vector potential requires a 3D field".into()));
    }
    check_zero_mean(b)?;
    Ok(inv_laplacian_drop_mean(&curl3(b), 1.0))
}

/// Zeroes modes beyond the two-thirds cutoff.
pub fn dealias<F: Dealias>(s: &F) -> F {
    let mut out = s.clone();
    out.dealias_in_place();
    out
}

pub trait Dealias: Clone {
    fn dealias_in_place(&mut self);
}

impl Dealias for SpectralScalar {
    fn dealias_in_place(&mut self) {
        self.dealias();
    }
}

impl Dealias for SpectralVector {
    fn dealias_in_place(&mut self) {
        self.dealias();
    }
}

/// Pseudo-spectral evaluation of a pointwise expression of several fields:
/// transforms the inputs once, evaluates `f` at every point, and returns the
/// dealiased result.
pub fn pointwise<const N: usize>(
    grid: &Grid,
    inputs: [&SpectralScalar; N],
    f: impl Fn(&[f64; N]) -> f64,
) -> SpectralScalar {
    let phys: Vec<Vec<f64>> = inputs.iter().map(|s| s.to_physical()).collect();
    let mut vals = [0.0; N];
    let out: Vec<f64> = (0..grid.len())
        .map(|i| {
            for (v, p) in vals.iter_mut().zip(&phys) {
                *v = p[i];
            }
            f(&vals)
        })
        .collect();
    SpectralScalar::from_physical(grid, &out)
        .expect("sizes match")
        .dealiased()
}

/// Dealiased product of two fields.
pub fn product(a: &SpectralScalar, b: &SpectralScalar) -> SpectralScalar {
    pointwise(a.grid(), [a, b], |v| v[0] * v[1])
}

/// `(a·∇) s` with a dealiased product.
pub fn advect(a: &SpectralVector, s: &SpectralScalar) -> SpectralScalar {
    let grid = s.grid();
    let mut phys_out = vec![0.0; grid.len()];
    for axis in 0..grid.dim() {
        let ap = a.comp(axis).to_physical();
        let dp = d(s, axis).to_physical();
        for ((o, x), y) in phys_out.iter_mut().zip(&ap).zip(&dp) {
            *o += x * y;
        }
    }
    SpectralScalar::from_physical(grid, &phys_out)
        .expect("sizes match")
        .dealiased()
}

/// `(a·∇) v` component-wise.
pub fn advect_vector(a: &SpectralVector, v: &SpectralVector) -> SpectralVector {
    let comps = v.comps().iter().map(|c| advect(a, c)).collect();
    SpectralVector::from_components(comps).expect("same grid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g2(n: usize) -> Grid {
        Grid::cubic(2, n).unwrap()
    }

    #[test]
    fn derivative_of_sine_is_cosine() {
        let g = g2(16);
        let s = SpectralScalar::from_fn(&g, |x| x[0].sin());
        let ds = derivative(&s, 0).unwrap();
        let expect = SpectralScalar::from_fn(&g, |x| x[0].cos());
        assert!(ds.max_coeff_diff(&expect) < 1e-15);
    }

    #[test]
    fn derivative_of_constant_vanishes_and_axis_is_checked() {
        let g = g2(8);
        let s = SpectralScalar::constant(&g, 3.0);
        assert!(derivative(&s, 1).unwrap().max_coeff() == 0.0);
        assert!(matches!(
            derivative(&s, 2),
            Err(MreError::AxisOutOfRange { axis: 2, dim: 2 })
        ));
    }

    #[test]
    fn derivative_product_rule_on_single_modes() {
        let g = g2(16);
        let s = SpectralScalar::from_fn(&g, |x| (2.0 * x[0]).sin() * x[1].cos());
        let ds = derivative(&s, 1).unwrap();
        let expect = SpectralScalar::from_fn(&g, |x| -(2.0 * x[0]).sin() * x[1].sin());
        assert!(ds.max_coeff_diff(&expect) < 1e-15);
    }

    #[test]
    fn derivative_zeroes_nyquist() {
        let g = g2(8);
        let s = SpectralScalar::from_fn(&g, |x| (4.0 * x[0]).cos());
        assert!(s.max_coeff() > 0.9);
        assert!(derivative(&s, 0).unwrap().max_coeff() == 0.0);
    }

    #[test]
    fn leray_kills_gradients_and_fixes_solenoidal_fields() {
        let g = g2(16);
        let grad = SpectralVector::from_fn(&g, |x| [x[0].cos(), 0.0, 0.0]);
        assert!(leray_project(&grad).max_coeff() < 1e-15);

        let sol = SpectralVector::from_fn(&g, |x| {
            [-x[0].sin() * x[1].cos(), x[0].cos() * x[1].sin(), 0.0]
        });
        assert!(leray_project(&sol).max_coeff_diff(&sol) < 1e-15);

        let mixed = SpectralVector::from_fn(&g, |x| [x[1].cos() + x[0].cos(), 0.0, 0.0]);
        let expect = SpectralVector::from_fn(&g, |x| [x[1].cos(), 0.0, 0.0]);
        assert!(leray_project(&mixed).max_coeff_diff(&expect) < 1e-15);
    }

    #[test]
    fn fractional_inverse_laplacian_multipliers() {
        let g = g2(16);
        let c = SpectralScalar::from_fn(&g, |x| x[0].cos());
        assert!(inv_fractional_laplacian(&c, 1.0).unwrap().max_coeff_diff(&c) < 1e-15);

        let mut m = SpectralScalar::zeros(&g);
        m.set_mode(&[2, 1], Complex64::new(1.0, 0.5)).unwrap();
        let out = inv_fractional_laplacian(&m, 1.0).unwrap();
        assert!((out.coeff(&[2, 1]) - Complex64::new(0.2, 0.1)).norm() < 1e-16);

        assert!(inv_fractional_laplacian(&m, 0.0).unwrap().max_coeff_diff(&m) == 0.0);
    }

    #[test]
    fn fractional_inverse_laplacian_rejects_mean_and_negative_gamma() {
        let g = g2(8);
        let s = SpectralScalar::from_fn(&g, |x| 1.0 + x[0].cos());
        assert!(matches!(inv_fractional_laplacian(&s, 1.0), Err(MreError::Domain(_))));
        let z = SpectralScalar::from_fn(&g, |x| x[0].cos());
        assert!(inv_fractional_laplacian(&z, -1.0).is_err());
    }

    #[test]
    fn curl_examples() {
        let g = Grid::cubic(3, 8).unwrap();
        let v = SpectralVector::from_fn(&g, |x| [0.0, 0.0, x[0].sin()]);
        let c = curl(&v).into_vector().unwrap();
        let expect = SpectralVector::from_fn(&g, |x| [0.0, -x[0].cos(), 0.0]);
        assert!(c.max_coeff_diff(&expect) < 1e-15);

        let k = SpectralVector::constant(&g, &[1.0, -2.0, 0.5]).unwrap();
        assert!(curl(&k).into_vector().unwrap().max_coeff() == 0.0);

        let g2d = g2(16);
        let w = SpectralVector::from_fn(&g2d, |x| [x[1].sin(), 0.0, 0.0]);
        let cs = curl(&w).into_scalar().unwrap();
        let expect = SpectralScalar::from_fn(&g2d, |x| -x[1].cos());
        assert!(cs.max_coeff_diff(&expect) < 1e-15);
    }

    #[test]
    fn vector_potential_single_mode() {
        let g = Grid::cubic(3, 8).unwrap();
        let b = SpectralVector::from_fn(&g, |x| [x[2].sin(), 0.0, 0.0]);
        let a = vector_potential(&b).unwrap();
        let expect = SpectralVector::from_fn(&g, |x| [0.0, x[2].cos(), 0.0]);
        assert!(a.max_coeff_diff(&expect) < 1e-15);
        assert!(vector_potential(&SpectralVector::zeros(&g)).unwrap().max_coeff() == 0.0);
        let shifted = SpectralVector::from_fn(&g, |x| [1.0 + x[2].sin(), 0.0, 0.0]);
        assert!(matches!(vector_potential(&shifted), Err(MreError::Domain(_))));
    }

    #[test]
    fn vector_potential_of_abc_field_is_itself() {
        let g = Grid::cubic(3, 16).unwrap();
        let b = SpectralVector::from_fn(&g, |x| {
            [
                x[2].sin() + x[1].cos(),
                x[0].sin() + x[2].cos(),
                x[1].sin() + x[0].cos(),
            ]
        });
        // eigenfield checks: curl B = B and -ΔB = B
        let cb = curl(&b).into_vector().unwrap();
        assert!(cb.max_coeff_diff(&b) < 1e-14);
        for c in b.comps() {
            assert!((&(-&laplacian(c)) - c).max_coeff() < 1e-14);
        }
        let a = vector_potential(&b).unwrap();
        assert!(a.max_coeff_diff(&b) < 1e-14);
    }

    #[test]
    fn dealias_examples() {
        let g = g2(12);
        let low = SpectralScalar::from_fn(&g, |x| (4.0 * x[0]).cos() + (3.0 * x[1]).sin());
        assert!(dealias(&low).max_coeff_diff(&low) < 1e-15);
        let mut nyq = SpectralScalar::zeros(&g);
        nyq.set_mode(&[0, 6], Complex64::new(1.0, 0.0)).unwrap();
        assert!(nyq.max_coeff() > 0.0);
        assert!(dealias(&nyq).max_coeff() == 0.0);
        let r = crate::random::random_scalar(&g, 3, 1.0, 6.0);
        let once = dealias(&r);
        assert_eq!(dealias(&once).max_coeff_diff(&once), 0.0);
    }
}
