//! Seeded, band-limited random initial data.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::field::{SpectralScalar, SpectralVector};
use crate::grid::Grid;
use crate::spectral::leray_project;

/// Default band for random data: `|k| ≤ n/8` on the coarsest axis.
pub fn default_band(grid: &Grid) -> f64 {
    let n = grid.shape().iter().copied().min().unwrap_or(8);
    n as f64 / 8.0
}

fn gaussian_modes(grid: &Grid, rng: &mut ChaCha8Rng, kmax: f64) -> SpectralScalar {
    let mut s = SpectralScalar::zeros(grid);
    let kmax2 = kmax * kmax;
    for i in 1..grid.len() {
        let j = grid.conjugate_index(i);
        if j < i || grid.k2(i) > kmax2 {
            continue;
        }
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        let c = Complex64::new(re, im);
        let cs = s.coeffs_mut();
        cs[i] = c;
        cs[j] = c.conj();
        if i == j {
            cs[i].im = 0.0;
        }
    }
    s
}

/// Zero-mean scalar with Gaussian coefficients on `0 < |k| ≤ kmax`, scaled to L² norm `norm`.
pub fn random_scalar(grid: &Grid, seed: u64, norm: f64, kmax: f64) -> SpectralScalar {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = gaussian_modes(grid, &mut rng, kmax);
    let l2 = s.l2_norm();
    if l2 > 0.0 {
        s.scale(norm / l2);
    }
    s
}

/// Zero-mean divergence-free vector field on `0 < |k| ≤ kmax` with L² norm `norm`.
pub fn random_solenoidal(grid: &Grid, seed: u64, norm: f64, kmax: f64) -> SpectralVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps = (0..grid.dim())
        .map(|_| gaussian_modes(grid, &mut rng, kmax))
        .collect();
    let mut v = leray_project(&SpectralVector::from_components(comps).expect("same grid"));
    let l2 = v.l2_norm();
    if l2 > 0.0 {
        v.scale(norm / l2);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible_band_limited_and_solenoidal() {
        let g = Grid::cubic(2, 32).unwrap();
        let a = random_solenoidal(&g, 11, 0.5, 4.0);
        let b = random_solenoidal(&g, 11, 0.5, 4.0);
        assert_eq!(a.max_coeff_diff(&b), 0.0);
        assert!((a.l2_norm() - 0.5).abs() < 1e-14);
        assert!(a.is_divergence_free());
        assert!(a.mean().iter().all(|m| *m == 0.0));
        for c in a.comps() {
            assert!(c.hermitian_defect() < 1e-16);
            for (i, z) in c.coeffs().iter().enumerate() {
                if g.k2(i) > 16.0 {
                    assert_eq!(*z, Complex64::default());
                }
            }
        }
        let other = random_solenoidal(&g, 12, 0.5, 4.0);
        assert!(other.max_coeff_diff(&a) > 1e-3);
    }
}
