//! Scalar functionals of the magnetic field and velocity.
//!
//! Norms follow the Parseval convention `‖f‖²_{L²} = (2π)^d Σ_k |f̂(k)|²`;
//! homogeneous Sobolev norms weight the nonzero modes by `|k|^{2s}` and drop
//! the mean. L∞ quantities are maxima over the collocation points, so they
//! are lower bounds for the true suprema.

use std::io::{self, Write};

use crate::dynamics::{constitutive_velocity, MreState};
use crate::error::{MreError, Result};
use crate::field::{SpectralField, SpectralScalar, SpectralVector};
use crate::spectral::{check_zero_mean, curl, d, vector_potential};

/// `½ ‖B‖²_{L²}`.
pub fn energy(b: &SpectralVector) -> f64 {
    0.5 * b.l2_norm_sq()
}

/// `‖u‖²_{Ḣγ}`; `u` must have zero mean.
pub fn dissipation(u: &SpectralVector, gamma: f64) -> Result<f64> {
    check_zero_mean(u)?;
    Ok(u.weighted_norm_sq(&|k2| if k2 == 0.0 { 0.0 } else { k2.powf(gamma) }))
}

/// Magnetic helicity `∫ A·B` with the zero-mean vector potential. 3D only.
pub fn helicity(b: &SpectralVector) -> Result<f64> {
    let a = vector_potential(b)?;
    Ok(a.inner(b))
}

/// `∫ u·B`.
pub fn cross_helicity(u: &SpectralVector, b: &SpectralVector) -> f64 {
    u.inner(b)
}

/// Homogeneous norm `‖f‖_{Ḣs}`; the mean never contributes.
pub fn sobolev_norm<F: SpectralField>(f: &F, s: f64) -> f64 {
    f.weighted_norm_sq(&|k2| if k2 == 0.0 { 0.0 } else { k2.powf(s) })
        .sqrt()
}

/// Inhomogeneous norm `(‖f‖²_{L²} + ‖f‖²_{Ḣs})^{1/2}`.
pub fn sobolev_norm_inhom<F: SpectralField>(f: &F, s: f64) -> f64 {
    f.weighted_norm_sq(&|k2| 1.0 + if k2 == 0.0 { 0.0 } else { k2.powf(s) })
        .sqrt()
}

/// Max over grid points of the Frobenius norm of the gradients of `comps`,
/// stacked as rows. Useful for 2.5D fields stored as 2D components.
pub fn linf_gradient_of(comps: &[SpectralScalar]) -> f64 {
    let Some(first) = comps.first() else {
        return 0.0;
    };
    let grid = first.grid();
    let mut acc = vec![0.0; grid.len()];
    for c in comps {
        for axis in 0..grid.dim() {
            let p = d(c, axis).to_physical();
            acc.iter_mut().zip(&p).for_each(|(a, v)| *a += v * v);
        }
    }
    acc.into_iter().fold(0.0, f64::max).sqrt()
}

/// Max over grid points of the Frobenius norm of `∇v`.
pub fn linf_gradient(v: &SpectralVector) -> f64 {
    linf_gradient_of(v.comps())
}

/// Max over grid points of `|∇s|`.
pub fn linf_gradient_scalar(s: &SpectralScalar) -> f64 {
    linf_gradient_of(std::slice::from_ref(s))
}

/// Energy held by modes in the top third of the dealiased band, over total energy.
pub fn tail_fraction<F: TailEnergy>(f: &F) -> f64 {
    let (tail, total) = f.tail_and_total();
    if total > 0.0 {
        (tail / total).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub trait TailEnergy {
    fn tail_and_total(&self) -> (f64, f64);
}

impl TailEnergy for SpectralScalar {
    fn tail_and_total(&self) -> (f64, f64) {
        let grid = self.grid();
        let mut tail = 0.0;
        let mut total = 0.0;
        for (i, c) in self.coeffs().iter().enumerate() {
            let e = c.norm_sqr();
            total += e;
            let k = grid.wavevector(i);
            // |k_j| / (n_j / 3) > 2/3
            if (0..grid.dim()).any(|a| 9 * k[a].unsigned_abs() as usize > 2 * grid.n(a)) {
                tail += e;
            }
        }
        (tail, total)
    }
}

impl TailEnergy for SpectralVector {
    fn tail_and_total(&self) -> (f64, f64) {
        self.comps()
            .iter()
            .map(|c| c.tail_and_total())
            .fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d))
    }
}

/// One time sample of the diagnostic functionals.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub energy: f64,
    pub dissipation: f64,
    /// Present for 3D fields with zero mean.
    pub helicity: Option<f64>,
    pub cross_helicity: f64,
    pub hs_norms: Vec<(f64, f64)>,
    pub u_lip: f64,
    pub b_lip: f64,
    pub criterion: f64,
    pub current_l2: f64,
    pub tail_fraction: f64,
}

/// Assembles every functional for `state`, with `Ḣ^s` norms for each order in `hs_orders`.
pub fn record(state: &MreState, hs_orders: &[f64]) -> Result<DiagnosticsRecord> {
    let b = &state.b;
    let u = constitutive_velocity(b, state.gamma)?;
    let helicity = if b.dim() == 3 {
        match helicity(b) {
            Ok(h) => Some(h),
            Err(MreError::Domain(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let u_lip = linf_gradient(&u);
    let b_lip = linf_gradient(b);
    Ok(DiagnosticsRecord {
        t: state.t,
        energy: energy(b),
        dissipation: u.weighted_norm_sq(&|k2| if k2 == 0.0 { 0.0 } else { k2.powf(state.gamma) }),
        helicity,
        cross_helicity: cross_helicity(&u, b),
        hs_norms: hs_orders.iter().map(|&s| (s, sobolev_norm(b, s))).collect(),
        u_lip,
        b_lip,
        criterion: u_lip + b_lip * b_lip,
        current_l2: curl(b).l2_norm(),
        tail_fraction: tail_fraction(b),
    })
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_order(s: f64) -> String {
    format!("{s}")
}

/// CSV header for records carrying the given `Ḣ^s` orders.
pub fn csv_header(hs_orders: &[f64]) -> String {
    let mut h = String::from(
        "t,energy,dissipation,helicity,cross_helicity,u_lip,b_lip,criterion,current_l2,tail_fraction",
    );
    for &s in hs_orders {
        h.push_str(",hs_");
        h.push_str(&fmt_order(s));
    }
    h
}

impl DiagnosticsRecord {
    /// One CSV line; an absent helicity is an empty field.
    pub fn csv_row(&self) -> String {
        let mut fields = vec![
            fmt_f64(self.t),
            fmt_f64(self.energy),
            fmt_f64(self.dissipation),
            self.helicity.map(fmt_f64).unwrap_or_default(),
            fmt_f64(self.cross_helicity),
            fmt_f64(self.u_lip),
            fmt_f64(self.b_lip),
            fmt_f64(self.criterion),
            fmt_f64(self.current_l2),
            fmt_f64(self.tail_fraction),
        ];
        fields.extend(self.hs_norms.iter().map(|&(_, v)| fmt_f64(v)));
        fields.join(",")
    }
}

pub fn write_csv<W: Write>(mut w: W, records: &[DiagnosticsRecord]) -> io::Result<()> {
    let orders: Vec<f64> = records
        .first()
        .map(|r| r.hs_norms.iter().map(|&(s, _)| s).collect())
        .unwrap_or_default();
    writeln!(w, "{}", csv_header(&orders))?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Finite-difference weights for the first derivative at `x0` from nodes `xs` (Fornberg).
pub fn derivative_weights(x0: f64, xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; 2]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[1]).collect()
}

/// Residual `dE/dt + ‖u‖²_{Ḣγ}` at every sample, with `dE/dt` from five-point
/// (fourth-order) finite differences of the recorded energies.
pub fn energy_identity_residuals(records: &[DiagnosticsRecord]) -> Vec<(f64, f64)> {
    let n = records.len();
    if n < 5 {
        return Vec::new();
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(2).min(n - 5);
            let window = &records[lo..lo + 5];
            let ts: Vec<f64> = window.iter().map(|r| r.t).collect();
            let w = derivative_weights(records[i].t, &ts);
            let de: f64 = w.iter().zip(window).map(|(w, r)| w * r.energy).sum();
            (records[i].t, de + records[i].dissipation)
        })
        .collect()
}

/// Smallest `C ≥ 0` with `‖B(t)‖_{Ḣs} ≤ ‖B₀‖_{Ḣs} exp(C ∫₀ᵗ criterion)` at every sample.
///
/// Returns `None` when the records lack the order `s` or the initial norm vanishes.
pub fn fit_continuation_constant(records: &[DiagnosticsRecord], s: f64) -> Option<f64> {
    let norm_at = |r: &DiagnosticsRecord| {
        r.hs_norms
            .iter()
            .find(|(o, _)| (*o - s).abs() < 1e-12)
            .map(|&(_, v)| v)
    };
    let n0 = norm_at(records.first()?)?;
    if n0 <= 0.0 {
        return None;
    }
    let mut integral = 0.0;
    let mut c: f64 = 0.0;
    for pair in records.windows(2) {
        integral += 0.5 * (pair[0].criterion + pair[1].criterion) * (pair[1].t - pair[0].t);
        let ratio = norm_at(&pair[1])? / n0;
        if ratio > 1.0 && integral > 0.0 {
            c = c.max(ratio.ln() / integral);
        }
    }
    Some(c)
}
