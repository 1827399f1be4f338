//! Perturbations of the uniform state `B = e₁`, `u = 0` in two dimensions with γ = 0.
//!
//! Writing `B = e₁ + b`, the field splits into the x₁-average `a = P₀b₁`
//! (a function of x₂ alone) and the oscillating part `f = P⊥b`. The velocity
//! is `u = ∂₁b + v` with `v₁ = w₁ + ∂₂P₀(f₁f₂)`, `v₂ = w₂`, and the system reads
//!
//! ```text
//! ∂t f = L(f) + N(f, w),     ∂t a = N′(f, w).
//! ```

use std::io::{self, Write};

use log::warn;

use crate::diagnostics::{sobolev_norm, sobolev_norm_inhom, tail_fraction};
use crate::dynamics::{
    constitutive_velocity, step_clipped, IntegratorConfig, MreState, TAIL_WARNING,
};
use crate::error::{MreError, Result};
use crate::field::{SpectralField, SpectralScalar, SpectralVector};
use crate::random::{random_scalar, random_solenoidal};
use crate::spectral::{advect, d, inv_laplacian_drop_mean, pointwise};

/// Keeps the modes with `k₁ = 0`: the average over x₁.
pub fn p0(s: &SpectralScalar) -> SpectralScalar {
    let mut out = s.clone();
    out.apply_multiplier(|k, _| if k[0] == 0 { 1.0.into() } else { 0.0.into() });
    out
}

/// Removes the modes with `k₁ = 0`.
pub fn p_perp(s: &SpectralScalar) -> SpectralScalar {
    let mut out = s.clone();
    out.apply_multiplier(|k, _| if k[0] == 0 { 0.0.into() } else { 1.0.into() });
    out
}

pub fn p_perp_vec(v: &SpectralVector) -> SpectralVector {
    map_comps(v, p_perp)
}

fn map_comps(v: &SpectralVector, f: impl Fn(&SpectralScalar) -> SpectralScalar) -> SpectralVector {
    SpectralVector::from_components(v.comps().iter().map(f).collect()).expect("same grid")
}

fn vec2(c0: SpectralScalar, c1: SpectralScalar) -> SpectralVector {
    SpectralVector::from_components(vec![c0, c1]).expect("same grid")
}

/// Largest coefficient with `k₁ ≠ 0`; zero for a function of x₂ alone.
fn x1_content(s: &SpectralScalar) -> f64 {
    p_perp(s).max_coeff()
}

fn check_2d(v: &SpectralVector) -> Result<()> {
    if v.dim() != 2 {
        return Err(MreError::Shape(format!(
            "expected a 2D field, got dimension {}",
            v.dim()
        )));
    }
    Ok(())
}

/// The split of a 2D perturbation `b` into shear part and oscillating part.
#[derive(Clone, Debug)]
pub struct PerturbationDecomposition {
    /// `P₀b₁`, only `k₁ = 0` modes.
    pub a: SpectralScalar,
    /// `P⊥b`, no `k₁ = 0` modes.
    pub f: SpectralVector,
    /// `P⊥v`; zero until [`PerturbationDecomposition::with_velocity`] is called.
    pub w: SpectralVector,
    /// `‖P₀b₂‖_{L²}`, which stays zero along the evolution.
    pub p0_b2: f64,
}

impl PerturbationDecomposition {
    /// Fills in `w` from `a` and `f`.
    pub fn with_velocity(mut self) -> Self {
        self.w = w_velocity(&self.a, &self.f);
        self
    }
}

/// Splits `b` into `a = P₀b₁` and `f = P⊥b`, and reports `‖P₀b₂‖`.
pub fn decompose(b: &SpectralVector) -> Result<PerturbationDecomposition> {
    check_2d(b)?;
    Ok(PerturbationDecomposition {
        a: p0(b.comp(0)),
        f: p_perp_vec(b),
        w: SpectralVector::zeros(b.grid()),
        p0_b2: p0(b.comp(1)).l2_norm(),
    })
}

/// `p_L = 2(−Δ)⁻¹(∂₂a ∂₁f₂)`.
pub fn pressure_linear(a: &SpectralScalar, f: &SpectralVector) -> SpectralScalar {
    let src = pointwise(a.grid(), [&d(a, 1), &d(f.comp(1), 0)], |v| 2.0 * v[0] * v[1]);
    inv_laplacian_drop_mean(&src, 1.0)
}

/// `p_N = 2(−Δ)⁻¹((∂₁f₁)² + ∂₁f₂ ∂₂f₁)`, mean removed before inversion.
pub fn pressure_nonlinear(f: &SpectralVector) -> SpectralScalar {
    let f1 = f.comp(0);
    let src = pointwise(
        f.grid(),
        [&d(f1, 0), &d(f.comp(1), 0), &d(f1, 1)],
        |v| 2.0 * (v[0] * v[0] + v[1] * v[2]),
    );
    inv_laplacian_drop_mean(&src, 1.0)
}

/// `L(f) = (1+a)²∂₁²f + (1+a)∇∂₁p_L − ∂₂a ∂₂p_L e₁`.
pub fn linear_operator(a: &SpectralScalar, f: &SpectralVector) -> SpectralVector {
    let grid = a.grid();
    let pl = pressure_linear(a, f);
    let d1pl = d(&pl, 0);
    let da = d(a, 1);
    let comp = |i: usize| {
        let fi = f.comp(i);
        let mut out = pointwise(
            grid,
            [a, &d(&d(fi, 0), 0), &d(&d1pl, i)],
            |v| (1.0 + v[0]) * ((1.0 + v[0]) * v[1] + v[2]),
        );
        if i == 0 {
            let shear = pointwise(grid, [&da, &d(&pl, 1)], |v| v[0] * v[1]);
            out.axpy(-1.0, &shear);
        }
        out
    };
    vec2(comp(0), comp(1))
}

/// `P⊥(f·∇f + ∇p_N)`, shared by `w` and `N`.
fn quadratic_part(f: &SpectralVector, pn: &SpectralScalar) -> SpectralVector {
    let comp = |i: usize| {
        let mut s = advect(f, f.comp(i));
        s.axpy(1.0, &d(pn, i));
        p_perp(&s)
    };
    vec2(comp(0), comp(1))
}

/// `w = a∂₁f + ∇p_L + ∂₂a f₂ e₁ + P⊥(f·∇f + ∇p_N)`.
pub fn w_velocity(a: &SpectralScalar, f: &SpectralVector) -> SpectralVector {
    let grid = a.grid();
    let pl = pressure_linear(a, f);
    let q = quadratic_part(f, &pressure_nonlinear(f));
    let da = d(a, 1);
    let comp = |i: usize| {
        let mut s = pointwise(grid, [a, &d(f.comp(i), 0)], |v| v[0] * v[1]);
        s.axpy(1.0, &d(&pl, i));
        s.axpy(1.0, q.comp(i));
        if i == 0 {
            s.axpy(1.0, &pointwise(grid, [&da, f.comp(1)], |v| v[0] * v[1]));
        }
        s
    };
    vec2(comp(0), comp(1))
}

/// `N(f, w)`: the nonlinear remainder of `∂t f` once `L(f)` is removed.
pub fn nonlinear_term(a: &SpectralScalar, f: &SpectralVector, w: &SpectralVector) -> SpectralVector {
    let grid = a.grid();
    let pn = pressure_nonlinear(f);
    let q = quadratic_part(f, &pn);
    let shear = d(&p0(&pointwise(grid, [f.comp(0), f.comp(1)], |v| v[0] * v[1])), 1);
    let d1pn = d(&pn, 0);
    let da = d(a, 1);
    let comp = |i: usize| {
        let fi = f.comp(i);
        let d1fi = d(fi, 0);
        let mut s = pointwise(grid, [a, &d(q.comp(i), 0)], |v| v[0] * v[1]);
        let mut transport = advect(f, w.comp(i));
        transport.axpy(-1.0, &advect(w, fi));
        transport.axpy(2.0, &advect(f, &d1fi));
        s.axpy(1.0, &p_perp(&transport));
        s.axpy(-1.0, &pointwise(grid, [&shear, &d1fi], |v| v[0] * v[1]));
        s.axpy(1.0, &d(&d1pn, i));
        if i == 0 {
            let e1 = pointwise(
                grid,
                [&d(&shear, 1), f.comp(1), &da, q.comp(1)],
                |v| v[0] * v[1] - v[2] * v[3],
            );
            s.axpy(1.0, &e1);
        }
        s
    };
    vec2(comp(0), comp(1))
}

/// `N′(f, w) = ∂₂P₀(2f₂∂₁f₁ + f₂w₁ − w₂f₁)`, the right-hand side of the `a` equation.
pub fn a_rhs(f: &SpectralVector, w: &SpectralVector) -> SpectralScalar {
    let (f1, f2) = (f.comp(0), f.comp(1));
    let inner = pointwise(
        f.grid(),
        [f2, &d(f1, 0), w.comp(0), w.comp(1), f1],
        |v| 2.0 * v[0] * v[1] + v[0] * v[2] - v[3] * v[4],
    );
    d(&p0(&inner), 1)
}

/// Full velocity `u = ∂₁b + v` rebuilt from the split variables.
pub fn reassemble_velocity(a: &SpectralScalar, f: &SpectralVector, w: &SpectralVector) -> SpectralVector {
    let grid = a.grid();
    let shear = d(&p0(&pointwise(grid, [f.comp(0), f.comp(1)], |v| v[0] * v[1])), 1);
    let mut u1 = d(f.comp(0), 0);
    u1.axpy(1.0, w.comp(0));
    u1.axpy(1.0, &shear);
    let mut u2 = d(f.comp(1), 0);
    u2.axpy(1.0, w.comp(1));
    vec2(u1, u2)
}

/// Random admissible pair: `a` a function of x₂ and `f` solenoidal with `P₀f = 0`,
/// both band-limited to `|k| ≤ kmax` and scaled to L² norm `norm`.
pub fn random_admissible(
    grid: &crate::grid::Grid,
    seed: u64,
    norm: f64,
    kmax: f64,
) -> (SpectralScalar, SpectralVector) {
    let mut a = p0(&random_scalar(grid, seed, 1.0, kmax));
    let la = a.l2_norm();
    if la > 0.0 {
        a.scale(norm / la);
    }
    let mut f = p_perp_vec(&random_solenoidal(grid, seed.wrapping_add(0x9e37_79b9), 1.0, kmax));
    let lf = f.l2_norm();
    if lf > 0.0 {
        f.scale(norm / lf);
    }
    (a, f)
}

/// Monitor and high norms with the bootstrap parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityParams {
    pub k: u32,
    pub m: u32,
    pub delta: f64,
    pub eps: f64,
}

impl StabilityParams {
    pub fn new(k: u32, m: u32, delta: f64, eps: f64) -> Result<Self> {
        let p = Self { k, m, delta, eps };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 4 {
            return Err(MreError::Domain(format!("k must be ≥ 4, got {}", self.k)));
        }
        if self.m < self.k + 9 {
            return Err(MreError::Domain(format!(
                "m must be ≥ k + 9 = {}, got {}",
                self.k + 9,
                self.m
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(MreError::Domain(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(MreError::Domain(format!("eps must be > 0, got {}", self.eps)));
        }
        Ok(())
    }
}

impl Default for StabilityParams {
    fn default() -> Self {
        Self {
            k: 4,
            m: 13,
            delta: 0.5,
            eps: 1e-2,
        }
    }
}

/// Least-squares slope of `ln y` against `t`.
pub fn fit_exponential_rate(samples: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(_, y)| *y > 0.0)
        .map(|&(t, y)| (t, y.ln()))
        .collect();
    least_squares_slope(&pts)
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Outcome of integrating `∂t f = L(f)` with frozen `a`.
#[derive(Clone, Debug)]
pub struct SemigroupReport {
    /// `(t, ‖f(t)‖_{Ḣᵏ})`.
    pub samples: Vec<(f64, f64)>,
    pub fitted_rate: f64,
    /// `ln(‖f(dt)‖/‖f₀‖)/dt` from the first step alone.
    pub first_step_rate: f64,
    pub required_rate: f64,
    pub ok: bool,
}

/// Integrates `∂t f = L(f)` with `a` frozen, using RK4 in the integrating
/// factor of `∂₁²` so the heat part is propagated exactly.
pub fn linear_semigroup_run(
    a: &SpectralScalar,
    f0: &SpectralVector,
    t_end: f64,
    dt: f64,
    k: u32,
    delta: f64,
) -> Result<SemigroupReport> {
    check_2d(f0)?;
    if a.grid() != f0.grid() {
        return Err(MreError::GridMismatch("a and f₀ must share one grid".into()));
    }
    if !(dt > 0.0 && t_end >= 0.0 && dt.is_finite() && t_end.is_finite()) {
        return Err(MreError::Domain(format!("invalid dt = {dt} or t_end = {t_end}")));
    }
    let scale = a.max_coeff().max(f64::MIN_POSITIVE);
    if x1_content(a) > 1e-12 * scale {
        return Err(MreError::Domain("a must depend on x₂ only".into()));
    }
    let fscale = f0.max_coeff().max(f64::MIN_POSITIVE);
    if f0.comps().iter().any(|c| p0(c).max_coeff() > 1e-12 * fscale) {
        return Err(MreError::Domain("f₀ must satisfy P₀f₀ = 0".into()));
    }

    let remainder = |f: &SpectralVector| {
        &linear_operator(a, f) - &map_comps(f, |c| d(&d(c, 0), 0))
    };
    let heat = |f: &SpectralVector, tau: f64| {
        map_comps(f, |c| {
            let mut c = c.clone();
            c.apply_multiplier(|k, _| (-((k[0] * k[0]) as f64) * tau).exp().into());
            c
        })
    };

    let norm = |f: &SpectralVector| sobolev_norm(f, f64::from(k));
    let mut f = f0.clone();
    let mut t = 0.0;
    let mut samples = vec![(0.0, norm(&f))];
    let tol = 1e-12 * t_end.max(1.0);
    while t_end - t > tol {
        let h = dt.min(t_end - t);
        let k1 = remainder(&f);
        let mut y = f.clone();
        y.axpy(0.5 * h, &k1);
        let k2 = remainder(&heat(&y, 0.5 * h));
        let mut y = heat(&f, 0.5 * h);
        y.axpy(0.5 * h, &k2);
        let k3 = remainder(&y);
        let mut y = heat(&f, h);
        y.axpy(h, &heat(&k3, 0.5 * h));
        let k4 = remainder(&y);
        let mut mid = k2;
        mid.axpy(1.0, &k3);
        let mut next = heat(&f, h);
        next.axpy(h / 6.0, &heat(&k1, h));
        next.axpy(h / 3.0, &heat(&mid, 0.5 * h));
        next.axpy(h / 6.0, &k4);
        if !next.is_finite() {
            return Err(MreError::BlowUp {
                t,
                last_valid: Box::new(MreState {
                    b: f,
                    t,
                    gamma: 0.0,
                    steps: 0,
                }),
            });
        }
        f = next;
        t = if t_end - (t + h) <= tol { t_end } else { t + h };
        samples.push((t, norm(&f)));
    }
    let first_step_rate = match samples.get(1) {
        Some(&(t1, n1)) if samples[0].1 > 0.0 => (n1 / samples[0].1).ln() / t1,
        _ => f64::NAN,
    };
    let fitted_rate = fit_exponential_rate(&samples).unwrap_or(f64::NAN);
    let required_rate = -(1.0 - delta);
    Ok(SemigroupReport {
        ok: fitted_rate <= required_rate,
        samples,
        fitted_rate,
        first_step_rate,
        required_rate,
    })
}

/// One sample of the bootstrap bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilitySample {
    pub t: f64,
    /// `‖f‖_{Ḣᵏ}` against `4ε e^{−(1−δ)t}`.
    pub f_hk: f64,
    pub bound_f: f64,
    /// `‖a‖_{H^{k+2}}` against `4ε`.
    pub a_hk2: f64,
    pub bound_a: f64,
    /// `‖b‖²_{Ḣᵐ}` against `4ε e^{εt}`.
    pub b_hm: f64,
    pub bound_b: f64,
    pub b_l2: f64,
    pub p0_b2: f64,
    /// `‖u‖_{H^{k−1}}`.
    pub u_hk1: f64,
    pub ok: bool,
}

#[derive(Clone, Debug)]
pub struct StabilityReport {
    pub params: StabilityParams,
    pub samples: Vec<StabilitySample>,
    pub warnings: Vec<String>,
    /// Every bound, the L² bound included, held at every sample.
    pub all_ok: bool,
    pub max_p0_b2: f64,
    pub b0_l2: f64,
}

impl StabilityReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,f_hk,bound_f,a_hk2,bound_a,b_hm,bound_b,ok")?;
        for s in &self.samples {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                s.t, s.f_hk, s.bound_f, s.a_hk2, s.bound_a, s.b_hm, s.bound_b, s.ok
            )?;
        }
        Ok(())
    }
}

/// Default threshold for [`StabilityRun::noise_floor`]. FFT round-off sits
/// near 1e-18 per coefficient for an O(1) field; results are unchanged for
/// floors between 1e-17 and 1e-13.
pub const DEFAULT_NOISE_FLOOR: f64 = 1e-15;

/// Time-stepping controls for [`nonlinear_stability_experiment`].
#[derive(Clone, Debug)]
pub struct StabilityRun {
    pub integrator: IntegratorConfig,
    pub sample_every: usize,
    /// Spectral coefficients of `B` smaller than this are set to zero after
    /// each step, keeping round-off out of the high Sobolev norms.
    pub noise_floor: Option<f64>,
}

impl Default for StabilityRun {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig {
                t_end: 5.0,
                ..IntegratorConfig::default()
            },
            sample_every: 50,
            noise_floor: Some(DEFAULT_NOISE_FLOOR),
        }
    }
}

fn apply_noise_floor(b: &mut SpectralVector, floor: f64) {
    for i in 0..b.dim() {
        b.comp_mut(i).coeffs_mut().iter_mut().for_each(|c| {
            if c.norm() < floor {
                *c = 0.0.into();
            }
        });
    }
}

/// Evolves `B = e₁ + b₀` by the full MRE with γ = 0 and checks the bootstrap
/// bounds at every sample.
pub fn nonlinear_stability_experiment(
    params: &StabilityParams,
    b0: &SpectralVector,
    run: &StabilityRun,
) -> Result<StabilityReport> {
    params.validate()?;
    run.integrator.validate()?;
    check_2d(b0)?;
    let grid = b0.grid().clone();
    let e1 = SpectralVector::constant(&grid, &[1.0, 0.0])?;
    let mut state = MreState::new(&e1 + b0, 0.0, 0.0)?;
    let eps = params.eps;
    let (k, m) = (f64::from(params.k), f64::from(params.m));
    let b0_l2 = b0.l2_norm();
    let l2_limit = eps.max(b0_l2) * (1.0 + 1e-12);
    let mut samples = Vec::new();
    let mut warnings = Vec::new();

    let sample = |state: &MreState, warnings: &mut Vec<String>| -> Result<StabilitySample> {
        let b = &state.b - &e1;
        let dec = decompose(&b)?;
        let u = constitutive_velocity(&state.b, 0.0)?;
        let t = state.t;
        let tail = tail_fraction(&b);
        if tail > TAIL_WARNING {
            let msg = format!("t = {t:.6}: tail fraction {tail:.3e} of b exceeds {TAIL_WARNING:.0e}");
            warn!("{msg}");
            warnings.push(msg);
        }
        let mut s = StabilitySample {
            t,
            f_hk: sobolev_norm(&dec.f, k),
            bound_f: 4.0 * eps * (-(1.0 - params.delta) * t).exp(),
            a_hk2: sobolev_norm_inhom(&dec.a, k + 2.0),
            bound_a: 4.0 * eps,
            b_hm: sobolev_norm(&b, m).powi(2),
            bound_b: 4.0 * eps * (eps * t).exp(),
            b_l2: b.l2_norm(),
            p0_b2: dec.p0_b2,
            u_hk1: sobolev_norm_inhom(&u, k - 1.0),
            ok: false,
        };
        s.ok = s.f_hk <= s.bound_f
            && s.a_hk2 <= s.bound_a
            && s.b_hm <= s.bound_b
            && s.b_l2 <= l2_limit;
        Ok(s)
    };

    let cfg = &run.integrator;
    let sample_every = run.sample_every.max(1) as u64;
    samples.push(sample(&state, &mut warnings)?);
    let tol = 1e-12 * cfg.t_end.max(1.0);
    while cfg.t_end - state.t > tol {
        let mut next = step_clipped(&state, cfg, cfg.t_end - state.t)?;
        if cfg.t_end - next.t <= tol {
            next.t = cfg.t_end;
        }
        if let Some(floor) = run.noise_floor {
            apply_noise_floor(&mut next.b, floor);
        }
        state = next;
        if state.steps % sample_every == 0 || state.t == cfg.t_end {
            samples.push(sample(&state, &mut warnings)?);
        }
    }
    let all_ok = samples.iter().all(|s| s.ok);
    let max_p0_b2 = samples.iter().map(|s| s.p0_b2).fold(0.0, f64::max);
    Ok(StabilityReport {
        params: *params,
        samples,
        warnings,
        all_ok,
        max_p0_b2,
        b0_l2,
    })
}

/// `ε ∇^⊥(sin x₁ sin x₂) / ‖∇^⊥(sin x₁ sin x₂)‖_{Hᵐ}`.
///
/// Only the `|k|² = 2` modes are kept: sampling leaves round-off in every
/// mode, which would dominate a high Sobolev norm.
pub fn cellular_datum(grid: &crate::grid::Grid, eps: f64, m: u32) -> SpectralVector {
    let mut b = SpectralVector::from_fn(grid, |x| {
        [-x[0].sin() * x[1].cos(), x[0].cos() * x[1].sin(), 0.0]
    });
    b.apply_radial(&|k2| if k2 == 2.0 { 1.0 } else { 0.0 });
    let n = sobolev_norm_inhom(&b, f64::from(m));
    b.scale(eps / n);
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn g64() -> Grid {
        Grid::cubic(2, 64).unwrap()
    }

    #[test]
    fn decompose_examples() {
        let g = g64();
        let shear = SpectralVector::from_fn(&g, |x| [x[1].sin(), 0.0, 0.0]);
        let dec = decompose(&shear).unwrap();
        assert!(dec.a.max_abs_diff(shear.comp(0)) < 1e-14);
        assert!(dec.f.max_coeff() < 1e-15);

        let cell = SpectralVector::from_fn(&g, |x| {
            [-x[0].sin() * x[1].cos(), x[0].cos() * x[1].sin(), 0.0]
        });
        let dec = decompose(&cell).unwrap();
        assert!(dec.a.max_coeff() < 1e-15);
        assert!(dec.f.max_coeff_diff(&cell) < 1e-15);

        let mixed = SpectralVector::from_fn(&g, |x| {
            [x[1].sin() - x[0].sin() * x[1].cos(), x[0].cos() * x[1].sin(), 0.0]
        });
        let dec = decompose(&mixed).unwrap();
        let a = SpectralScalar::from_fn(&g, |x| x[1].sin());
        assert!(dec.a.max_coeff_diff(&a) < 1e-15);
        assert!(dec.f.max_coeff_diff(&cell) < 1e-15);
        assert!(dec.p0_b2 < 1e-15);
    }

    #[test]
    fn pressure_linear_examples() {
        let g = g64();
        let f = SpectralVector::from_fn(&g, |x| {
            [-x[0].sin() * x[1].cos(), x[0].cos() * x[1].sin(), 0.0]
        });
        assert_eq!(pressure_linear(&SpectralScalar::zeros(&g), &f).max_coeff(), 0.0);
        let a = SpectralScalar::from_fn(&g, |x| x[1].sin());
        let x1_free = SpectralVector::from_fn(&g, |x| [0.0, x[1].cos(), 0.0]);
        assert!(pressure_linear(&a, &x1_free).max_coeff() < 1e-15);
        let pl = pressure_linear(&a, &f);
        let expect = SpectralScalar::from_fn(&g, |x| -x[0].sin() * (2.0 * x[1]).sin() / 5.0);
        assert!(pl.max_abs_diff(&expect) < 1e-14);
        // −Δp_L reproduces the source
        let src = SpectralScalar::from_fn(&g, |x| -x[0].sin() * (2.0 * x[1]).sin());
        let lap = crate::spectral::laplacian(&pl);
        assert!((&(-&lap) - &src).max_coeff() < 1e-14);
    }

    #[test]
    fn pressure_nonlinear_vanishes_on_shears() {
        let g = g64();
        assert_eq!(pressure_nonlinear(&SpectralVector::zeros(&g)).max_coeff(), 0.0);
        let f = SpectralVector::from_fn(&g, |x| [x[1].cos(), 0.0, 0.0]);
        assert!(pressure_nonlinear(&f).max_coeff() < 1e-16);
    }

    #[test]
    fn linear_operator_without_shear_is_heat() {
        let g = g64();
        let (_, f) = random_admissible(&g, 5, 1.0, 3.0);
        let l = linear_operator(&SpectralScalar::zeros(&g), &f);
        let heat = map_comps(&f, |c| d(&d(c, 0), 0));
        assert!(l.max_coeff_diff(&heat) < 1e-15);
        let a = SpectralScalar::from_fn(&g, |x| 0.1 * x[1].sin());
        assert_eq!(linear_operator(&a, &SpectralVector::zeros(&g)).max_coeff(), 0.0);
    }

    #[test]
    fn w_without_shear_is_quadratic_part() {
        let g = g64();
        let zero = SpectralScalar::zeros(&g);
        assert_eq!(w_velocity(&zero, &SpectralVector::zeros(&g)).max_coeff(), 0.0);
        let (_, f) = random_admissible(&g, 9, 0.3, 3.0);
        let w = w_velocity(&zero, &f);
        let q = quadratic_part(&f, &pressure_nonlinear(&f));
        assert!(w.max_coeff_diff(&q) < 1e-16);
    }

    #[test]
    fn nonlinear_terms_vanish_without_f() {
        let g = g64();
        let a = SpectralScalar::from_fn(&g, |x| 0.1 * x[1].sin());
        let zero = SpectralVector::zeros(&g);
        assert_eq!(nonlinear_term(&a, &zero, &zero).max_coeff(), 0.0);
        assert_eq!(a_rhs(&zero, &zero).max_coeff(), 0.0);
    }

    #[test]
    fn params_are_validated() {
        assert!(StabilityParams::new(4, 13, 0.5, 0.01).is_ok());
        assert!(StabilityParams::new(3, 13, 0.5, 0.01).is_err());
        assert!(StabilityParams::new(4, 12, 0.5, 0.01).is_err());
        assert!(StabilityParams::new(4, 13, 1.0, 0.01).is_err());
        assert!(StabilityParams::new(4, 13, 0.5, 0.0).is_err());
    }

    #[test]
    fn semigroup_single_modes_decay_at_k1_squared() {
        let g = g64();
        let zero = SpectralScalar::zeros(&g);
        for k1 in [1.0f64, 2.0] {
            let f0 = SpectralVector::from_fn(&g, |x| [0.0, (k1 * x[0]).cos(), 0.0]);
            let rep = linear_semigroup_run(&zero, &f0, 1.0, 0.1, 4, 0.5).unwrap();
            assert!((rep.first_step_rate + k1 * k1).abs() < 1e-12);
            assert!((rep.fitted_rate + k1 * k1).abs() < 1e-12);
            assert!(rep.ok);
        }
    }

    #[test]
    fn zero_datum_stays_zero() {
        let g = Grid::cubic(2, 32).unwrap();
        let params = StabilityParams::default();
        let run = StabilityRun {
            integrator: IntegratorConfig {
                t_end: 0.05,
                ..IntegratorConfig::default()
            },
            sample_every: 10,
            noise_floor: None,
        };
        let rep = nonlinear_stability_experiment(&params, &SpectralVector::zeros(&g), &run).unwrap();
        assert!(rep.all_ok);
        for s in &rep.samples {
            assert_eq!(s.f_hk, 0.0);
            assert_eq!(s.a_hk2, 0.0);
        }
    }
}
