//! Two-and-a-half-dimensional exact solutions.
//!
//! With a steady 2D Euler flow `v` and a scalar `g(x₁, x₂, t)`, the fields
//! `B = (v, g)` and `u = (0, 0, (v·∇)g)` solve the γ = 0 MRE exactly provided
//! `∂t g = (v·∇)² g`, a diffusion acting only along the streamlines of `v`.

use std::f64::consts::PI;
use std::io::{self, Write};

use log::warn;

use crate::diagnostics::{linf_gradient_of, sobolev_norm_inhom, tail_fraction};
use crate::dynamics::{rk4_step, TAIL_WARNING};
use crate::error::{MreError, Result};
use crate::field::{SpectralScalar, SpectralVector};
use crate::grid::Grid;
use crate::quadrature::integrate_pieces;
use crate::spectral::{advect, advect_vector, d, leray_project};
use crate::stability2d::{least_squares_slope, p_perp};

/// Tolerance for the steady-flow and eigenfunction checks.
pub const EXACTNESS_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub enum Flavor {
    /// `v = (V(x₂), 0)` with `−∂₁₁g₀ = λ²(g₀ − ⨍g₀)`.
    Shear { profile: SpectralScalar, lambda: f64 },
    /// The cellular flow `∇^⊥(sin x₁ sin x₂)`.
    Hyperbolic,
    Generic,
}

/// A steady flow together with initial data for `g`.
#[derive(Clone, Debug)]
pub struct Rank1Problem {
    pub v: SpectralVector,
    pub g0: SpectralScalar,
    pub flavor: Flavor,
}

/// `‖P((v·∇)v)‖_{L²}`, zero for a steady Euler flow.
pub fn euler_residual(v: &SpectralVector) -> f64 {
    leray_project(&advect_vector(v, v)).l2_norm()
}

fn check_steady(v: &SpectralVector) -> Result<()> {
    if v.dim() != 2 {
        return Err(MreError::Shape(format!("expected a 2D flow, got dimension {}", v.dim())));
    }
    if !v.is_divergence_free() {
        return Err(MreError::Domain("flow is not divergence-free".into()));
    }
    let r = euler_residual(v);
    if r > EXACTNESS_TOL * v.l2_norm_sq().max(1.0) {
        return Err(MreError::Domain(format!(
            "flow is not a steady Euler state: ‖P(v·∇v)‖ = {r:.3e}"
        )));
    }
    Ok(())
}

/// `‖−∂₁₁g₀ − λ²(g₀ − ⨍g₀)‖_{L²}`.
fn eigen_residual(g0: &SpectralScalar, lambda: f64) -> f64 {
    let mut r = d(&d(g0, 0), 0);
    r.scale(-1.0);
    let mut centred = g0.clone();
    centred.coeffs_mut()[0] = 0.0.into();
    r.axpy(-lambda * lambda, &centred);
    r.l2_norm()
}

fn check_shear(profile: &SpectralScalar, g0: &SpectralScalar, lambda: f64) -> Result<()> {
    if profile.grid() != g0.grid() {
        return Err(MreError::GridMismatch("profile and g₀ must share one grid".into()));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(MreError::Domain(format!("lambda must be > 0, got {lambda}")));
    }
    let scale = profile.max_coeff().max(f64::MIN_POSITIVE);
    if p_perp(profile).max_coeff() > EXACTNESS_TOL * scale {
        return Err(MreError::Domain("shear profile must depend on x₂ only".into()));
    }
    if d(g0, 1).max_coeff() > EXACTNESS_TOL * g0.max_coeff().max(1.0) {
        return Err(MreError::Domain("g₀ must depend on x₁ only".into()));
    }
    let r = eigen_residual(g0, lambda);
    if r > EXACTNESS_TOL * g0.l2_norm().max(1.0) {
        return Err(MreError::Domain(format!(
            "g₀ − ⨍g₀ is not an eigenfunction of −∂₁₁ with eigenvalue λ² = {}: residual {r:.3e}",
            lambda * lambda
        )));
    }
    Ok(())
}

/// `∇^⊥(sin x₁ sin x₂) = (−sin x₁ cos x₂, cos x₁ sin x₂)`.
pub fn cellular_flow(grid: &Grid) -> SpectralVector {
    let mut v = SpectralVector::from_fn(grid, |x| {
        [-x[0].sin() * x[1].cos(), x[0].cos() * x[1].sin(), 0.0]
    });
    v.dealias();
    v
}

impl Rank1Problem {
    pub fn shear(profile: SpectralScalar, g0: SpectralScalar, lambda: f64) -> Result<Self> {
        check_shear(&profile, &g0, lambda)?;
        let grid = profile.grid().clone();
        let v = SpectralVector::from_components(vec![profile.clone(), SpectralScalar::zeros(&grid)])?;
        check_steady(&v)?;
        Ok(Self {
            v,
            g0,
            flavor: Flavor::Shear { profile, lambda },
        })
    }

    pub fn hyperbolic(g0: SpectralScalar) -> Result<Self> {
        let v = cellular_flow(g0.grid());
        check_steady(&v)?;
        Ok(Self {
            v,
            g0,
            flavor: Flavor::Hyperbolic,
        })
    }

    pub fn generic(v: SpectralVector, g0: SpectralScalar) -> Result<Self> {
        if v.grid() != g0.grid() {
            return Err(MreError::GridMismatch("v and g₀ must share one grid".into()));
        }
        check_steady(&v)?;
        Ok(Self {
            v,
            g0,
            flavor: Flavor::Generic,
        })
    }

    /// Integrates `∂t g = (v·∇)²g` from `g₀` to `t_end` by RK4 with
    /// `dt = cfl·h²/(2 max(1, ‖v‖²_∞))`.
    pub fn integrate(&self, t_end: f64, cfl: f64) -> Result<SpectralScalar> {
        let mut g = self.g0.clone();
        let mut t = 0.0;
        let dt = rank1_dt(&self.v, cfl);
        while t_end - t > 1e-12 * t_end.max(1.0) {
            let h = dt.min(t_end - t);
            g = rk4_step(&g, h, |y| rank1_rhs(y, &self.v));
            t += h;
            if !g.is_finite() {
                return Err(MreError::Domain(format!("g became non-finite at t = {t}")));
            }
        }
        Ok(g)
    }
}

fn rank1_dt(v: &SpectralVector, cfl: f64) -> f64 {
    let h = v.grid().min_spacing();
    let vmax = v
        .to_physical()
        .iter()
        .fold(vec![0.0; v.grid().len()], |mut acc, c| {
            acc.iter_mut().zip(c).for_each(|(a, x)| *a += x * x);
            acc
        })
        .into_iter()
        .fold(0.0, f64::max);
    cfl * h * h / (2.0 * vmax.max(1.0))
}

/// `(v·∇)((v·∇)g)` with dealiased products.
pub fn rank1_rhs(g: &SpectralScalar, v: &SpectralVector) -> SpectralScalar {
    advect(v, &advect(v, g))
}

/// `⨍g₀ + exp(−λ²V(x₂)²t)(g₀ − ⨍g₀)` evaluated on the grid and transformed.
pub fn shear_closed_form(
    profile: &SpectralScalar,
    g0: &SpectralScalar,
    lambda: f64,
    t: f64,
) -> Result<SpectralScalar> {
    check_shear(profile, g0, lambda)?;
    let mean = g0.mean();
    let vp = profile.to_physical();
    let gp = g0.to_physical();
    let out: Vec<f64> = vp
        .iter()
        .zip(&gp)
        .map(|(v, g)| mean + (-lambda * lambda * v * v * t).exp() * (g - mean))
        .collect();
    SpectralScalar::from_physical(g0.grid(), &out)
}

/// Embeds `B = (v, g)` and `u = (0, 0, (v·∇)g)` into a 3D grid with `n₃` points along x₃.
pub fn assemble_state(problem: &Rank1Problem, g: &SpectralScalar, n3: usize) -> Result<(SpectralVector, SpectralVector)> {
    let grid2 = problem.v.grid();
    if g.grid() != grid2 {
        return Err(MreError::GridMismatch("g must live on the flow's grid".into()));
    }
    let grid3 = grid2.extrude(n3)?;
    let b = SpectralVector::from_components(vec![
        problem.v.comp(0).extrude(&grid3)?,
        problem.v.comp(1).extrude(&grid3)?,
        g.extrude(&grid3)?,
    ])?;
    let u3 = advect(&problem.v, g).extrude(&grid3)?;
    let u = SpectralVector::from_components(vec![
        SpectralScalar::zeros(&grid3),
        SpectralScalar::zeros(&grid3),
        u3,
    ])?;
    Ok((b, u))
}

/// `(2π³)^{1/4}`.
pub fn c1() -> f64 {
    (2.0 * PI.powi(3)).powf(0.25)
}

/// `(2π²/e)^{1/2}`, the normalization used for `ratio₂`.
pub fn c2() -> f64 {
    (2.0 * PI * PI / std::f64::consts::E).sqrt()
}

/// `(2π/e)^{1/2}`: the actual large-time limit of `‖∂₂B₃‖_{L²ₓ₁L∞ₓ₂}/(ε²t^{1/2})`.
pub fn c2_limit() -> f64 {
    (2.0 * PI / std::f64::consts::E).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthSample {
    pub t: f64,
    pub norm_l2: f64,
    pub ratio1: f64,
    pub norm_l2linf: f64,
    pub ratio2: f64,
}

#[derive(Clone, Debug)]
pub struct GrowthReport {
    pub eps: f64,
    pub c1: f64,
    pub c2: f64,
    pub samples: Vec<GrowthSample>,
}

impl GrowthReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,norm_l2,ratio1,norm_l2linf,ratio2")?;
        for s in &self.samples {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                s.t, s.norm_l2, s.ratio1, s.norm_l2linf, s.ratio2
            )?;
        }
        Ok(())
    }

    /// Least-squares slope of `log ‖∂₂B₃‖_{L²}` against `log t`.
    pub fn log_slope(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .samples
            .iter()
            .filter(|s| s.t > 0.0 && s.norm_l2 > 0.0)
            .map(|s| (s.t.ln(), s.norm_l2.ln()))
            .collect();
        least_squares_slope(&pts)
    }
}

/// `∫_T cos²x₁ dx₁`, from the Fourier coefficients of `cos x₁`.
fn cos_x1_norm_sq() -> f64 {
    let g = Grid::cubic(2, 8).expect("valid grid");
    SpectralScalar::from_fn(&g, |x| x[0].cos()).l2_norm_sq() / (2.0 * PI)
}

/// `sup_{x₂} |sin x₂ cos x₂| exp(−T sin²x₂)`, attained at `sin²x₂ = y*`.
pub fn profile_sup(big_t: f64) -> f64 {
    let y = 1.0 / ((big_t + 1.0) + (big_t * big_t + 1.0).sqrt());
    (y * (1.0 - y)).sqrt() * (-big_t * y).exp()
}

/// Breakpoints for `sin²x₂ cos²x₂ exp(−2T sin²x₂)` on `[−π, π]`, refined
/// around the peaks near `x₂ ∈ {−π, 0, π}` whose width scales like `T^{−1/2}`.
fn profile_breaks(big_t: f64) -> Vec<f64> {
    let w = 1.0 / (1.0 + 2.0 * big_t).sqrt();
    let mut b = vec![-PI, -0.5 * PI, 0.0, 0.5 * PI, PI];
    for c in [1.0, 4.0, 16.0] {
        let off = c * w;
        if off < 0.5 * PI {
            b.extend([-PI + off, -off, off, PI - off]);
        }
    }
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// Norms of `∂₂B₃ = −2tε³ sin x₂ cos x₂ cos x₁ exp(−ε² sin²x₂ t)` for the shear
/// `V = ε sin x₂`, `g₀ = 1 + ε cos x₁`, at each requested time.
pub fn growth_report(eps: f64, t_samples: &[f64]) -> Result<GrowthReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(MreError::Domain(format!("eps must lie in (0, 1), got {eps}")));
    }
    let x1 = cos_x1_norm_sq();
    let (c1, c2) = (c1(), c2());
    let samples = t_samples
        .iter()
        .map(|&t| {
            if t < 0.0 {
                return Err(MreError::Domain(format!("negative time {t}")));
            }
            let big_t = eps * eps * t;
            let amp = 2.0 * t * eps.powi(3);
            let breaks = profile_breaks(big_t);
            let profile_sq = integrate_pieces(
                |x| {
                    let (s, c) = x.sin_cos();
                    (s * c).powi(2) * (-2.0 * big_t * s * s).exp()
                },
                &breaks,
                1e-300,
                1e-13,
            )?;
            let norm_l2 = amp * (x1 * profile_sq).sqrt();
            let norm_l2linf = amp * x1.sqrt() * profile_sup(big_t);
            let ratio = |n: f64, scale: f64| if t > 0.0 { n / scale } else { 0.0 };
            Ok(GrowthSample {
                t,
                norm_l2,
                ratio1: ratio(norm_l2, c1 * eps.powf(1.5) * t.powf(0.25)),
                norm_l2linf,
                ratio2: ratio(norm_l2linf, c2 * eps * eps * t.sqrt()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GrowthReport {
        eps,
        c1,
        c2,
        samples,
    })
}

/// `n` times with `ε²t` log-spaced over `[lo, hi]`.
pub fn log_spaced_times(eps: f64, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let e2 = eps * eps;
    match n {
        0 => Vec::new(),
        1 => vec![lo / e2],
        _ => (0..n)
            .map(|i| {
                let s = i as f64 / (n - 1) as f64;
                (lo.ln() + s * (hi.ln() - lo.ln())).exp() / e2
            })
            .collect(),
    }
}

/// Pointwise large-time limit of the shear solution; kept as a sampler
/// because the limit may be discontinuous.
pub struct LimitingState<V, G> {
    v: V,
    g0: G,
    g0_mean: f64,
}

impl<V: Fn(f64) -> f64, G: Fn(f64) -> f64> LimitingState<V, G> {
    pub fn g0_mean(&self) -> f64 {
        self.g0_mean
    }

    /// `(V(x₂), 0, ⨍g₀)` where `V(x₂) ≠ 0`, `(0, 0, g₀(x₁))` where `V(x₂) = 0`.
    pub fn sample(&self, x1: f64, x2: f64) -> [f64; 3] {
        let v = (self.v)(x2);
        if v != 0.0 {
            [v, 0.0, self.g0_mean]
        } else {
            [0.0, 0.0, (self.g0)(x1)]
        }
    }

    /// The closed-form shear solution `B(x, t) = (V, 0, g)` at one point.
    pub fn closed_form(&self, lambda: f64, t: f64, x1: f64, x2: f64) -> [f64; 3] {
        let v = (self.v)(x2);
        let g = self.g0_mean + (-lambda * lambda * v * v * t).exp() * ((self.g0)(x1) - self.g0_mean);
        [v, 0.0, g]
    }

    fn regime(&self, x2: f64) -> bool {
        (self.v)(x2) != 0.0
    }

    /// `∇×B̄` away from the discontinuities, by fourth-order central differences.
    /// `None` when the stencil crosses a switch between the two cases.
    pub fn bounded_current(&self, x1: f64, x2: f64) -> Option<[f64; 3]> {
        let h = 1e-3;
        let here = self.regime(x2);
        if (-2..=2).any(|j| self.regime(x2 + f64::from(j) * h) != here) {
            return None;
        }
        let d = |f: &dyn Fn(f64) -> f64, x: f64| {
            (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
        };
        // B̄ does not depend on x₃ and B̄₂ = 0
        let d2b3 = d(&|y| self.sample(x1, y)[2], x2);
        let d1b3 = d(&|y| self.sample(y, x2)[2], x1);
        let d2b1 = d(&|y| self.sample(x1, y)[0], x2);
        Some([d2b3, -d1b3, -d2b1])
    }
}

/// Builds the limit sampler; `⨍g₀` is computed by adaptive quadrature.
pub fn limiting_state<V, G>(v: V, g0: G) -> Result<LimitingState<V, G>>
where
    V: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let breaks = [-PI, -0.5 * PI, 0.0, 0.5 * PI, PI];
    let g0_mean = integrate_pieces(&g0, &breaks, 1e-15, 1e-14)? / (2.0 * PI);
    Ok(LimitingState { v, g0, g0_mean })
}

/// One plane `x₂ = const` across which the limit jumps.
#[derive(Clone, Debug)]
pub struct CurrentSheet {
    pub x2: f64,
    /// `(x₁, B̄(x₂⁺) − B̄(x₂⁻))`.
    pub jump: Vec<(f64, [f64; 3])>,
    /// `(x₁, e₂ × [B̄])`, the amplitude of the surface current.
    pub amplitude: Vec<(f64, [f64; 3])>,
}

#[derive(Clone, Debug)]
pub struct SheetReport {
    pub sheets: Vec<CurrentSheet>,
}

impl SheetReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "x2,x1,jump1,jump2,jump3,j1,j2,j3")?;
        for s in &self.sheets {
            for ((x1, j), (_, a)) in s.jump.iter().zip(&s.amplitude) {
                writeln!(
                    w,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    s.x2, x1, j[0], j[1], j[2], a[0], a[1], a[2]
                )?;
            }
        }
        Ok(())
    }
}

/// Locates the planes where the limit switches between its two cases and
/// samples the jump of `B̄` across each at `n_x1` points in x₁.
pub fn current_sheet_report<V, G>(limit: &LimitingState<V, G>, n_x1: usize) -> SheetReport
where
    V: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    const SCAN: usize = 4096;
    let h = 2.0 * PI / SCAN as f64;
    let x = |i: usize| -PI + i as f64 * h;
    let mut planes = Vec::new();
    for i in 0..SCAN {
        let (lo, hi) = (x(i), x(i) + h);
        if limit.regime(lo) == limit.regime(hi) {
            continue;
        }
        let left = limit.regime(lo);
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if limit.regime(m) == left {
                a = m;
            } else {
                b = m;
            }
        }
        planes.push((a, b));
    }
    // two switches in one bracket mark an isolated zero, not a sheet
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for p in planes {
        match merged.last() {
            Some(q) if (p.0 - q.1).abs() < 4.0 * f64::EPSILON * PI => {
                merged.pop();
            }
            _ => merged.push(p),
        }
    }
    let eta = 1e-9;
    let sheets = merged
        .into_iter()
        .filter_map(|(a, b)| {
            let x2 = 0.5 * (a + b);
            let xs: Vec<f64> = (0..n_x1).map(|i| -PI + 2.0 * PI * i as f64 / n_x1 as f64).collect();
            let jump: Vec<(f64, [f64; 3])> = xs
                .iter()
                .map(|&x1| {
                    let up = limit.sample(x1, b + eta);
                    let down = limit.sample(x1, a - eta);
                    (x1, [up[0] - down[0], up[1] - down[1], up[2] - down[2]])
                })
                .collect();
            let size = jump
                .iter()
                .flat_map(|(_, j)| j.iter())
                .fold(0.0f64, |m, v| m.max(v.abs()));
            (size > 1e-12).then(|| CurrentSheet {
                x2,
                amplitude: jump.iter().map(|&(x1, j)| (x1, [j[2], 0.0, -j[0]])).collect(),
                jump,
            })
        })
        .collect();
    SheetReport { sheets }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperbolicSample {
    pub t: f64,
    pub d1g_origin: f64,
    /// `∂₁g(0,0,t) / (eᵗ ∂₁g₀(0,0))`; NaN when `∂₁g₀(0,0) = 0`.
    pub ratio_exp: f64,
    /// `‖∇B‖_{L∞}` over the grid with `B = (v, g)`.
    pub grad_linf: f64,
    pub tail_fraction: f64,
    pub energy: f64,
}

#[derive(Clone, Debug)]
pub struct HyperbolicReport {
    pub samples: Vec<HyperbolicSample>,
    /// Slope of `ln|∂₁g(0,0,t)|` against t.
    pub fitted_rate: Option<f64>,
    /// `|∇g₀(0,0)| eᵗ ≤ ‖∇B‖_{L∞}` at every sample.
    pub lower_bound_ok: bool,
    /// Smallest C with `‖∇B‖_{L∞} ≤ C‖B₀‖_{H³} e^{Ct}` at every sample.
    pub fitted_upper_constant: f64,
    /// `½‖g‖²` never increased between samples (beyond round-off).
    pub energy_monotone: bool,
    /// Last sample time with the tail fraction under the warning threshold.
    pub certified_until: f64,
    pub warnings: Vec<String>,
}

impl HyperbolicReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,d1g_origin,ratio_exp,grad_linf,tail_fraction")?;
        for s in &self.samples {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                s.t, s.d1g_origin, s.ratio_exp, s.grad_linf, s.tail_fraction
            )?;
        }
        Ok(())
    }
}

fn smallest_growth_constant(h0: f64, pts: &[(f64, f64)]) -> f64 {
    if h0 <= 0.0 {
        return f64::NAN;
    }
    let ok = |c: f64| pts.iter().all(|&(t, g)| g <= c * h0 * (c * t).exp());
    let mut hi = 1.0;
    while !ok(hi) {
        hi *= 2.0;
        if hi > 1e12 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let m = 0.5 * (lo + hi);
        if ok(m) {
            hi = m;
        } else {
            lo = m;
        }
    }
    hi
}

/// Integrates `∂t g = (v·∇)²g` for the cellular flow and tracks the trace
/// `∂₁g(0,0,t)`, which grows exactly like `eᵗ`.
pub fn hyperbolic_experiment(
    g0: &SpectralScalar,
    t_end: f64,
    cfl: f64,
    sample_every: usize,
) -> Result<HyperbolicReport> {
    if g0.grid().dim() != 2 {
        return Err(MreError::Shape("g₀ must be a 2D scalar".into()));
    }
    if !(t_end >= 0.0 && t_end.is_finite() && cfl > 0.0) {
        return Err(MreError::Domain(format!("invalid t_end = {t_end} or cfl = {cfl}")));
    }
    let problem = Rank1Problem::hyperbolic(g0.clone())?;
    let v = &problem.v;
    let origin = [0.0, 0.0];
    let d1g0 = d(g0, 0).eval_at(&origin);
    let grad0 = d1g0.hypot(d(g0, 1).eval_at(&origin));
    let h0 = [v.comp(0), v.comp(1), g0]
        .iter()
        .map(|c| sobolev_norm_inhom(*c, 3.0).powi(2))
        .sum::<f64>()
        .sqrt();

    let mut warnings = Vec::new();
    let sample = |g: &SpectralScalar, t: f64, warnings: &mut Vec<String>| {
        let d1 = d(g, 0).eval_at(&origin);
        let tail = tail_fraction(g);
        if tail > TAIL_WARNING {
            let msg = format!("t = {t:.6}: tail fraction {tail:.3e} of g exceeds {TAIL_WARNING:.0e}");
            warn!("{msg}");
            warnings.push(msg);
        }
        HyperbolicSample {
            t,
            d1g_origin: d1,
            ratio_exp: if d1g0 != 0.0 { d1 / (t.exp() * d1g0) } else { f64::NAN },
            grad_linf: linf_gradient_of(&[v.comp(0).clone(), v.comp(1).clone(), g.clone()]),
            tail_fraction: tail,
            energy: 0.5 * g.l2_norm_sq(),
        }
    };

    let dt = rank1_dt(v, cfl);
    let mut g = g0.clone();
    let mut t = 0.0;
    let mut steps = 0usize;
    let mut samples = vec![sample(&g, t, &mut warnings)];
    let tol = 1e-12 * t_end.max(1.0);
    while t_end - t > tol {
        let h = dt.min(t_end - t);
        g = rk4_step(&g, h, |y| rank1_rhs(y, v));
        t = if t_end - (t + h) <= tol { t_end } else { t + h };
        steps += 1;
        if !g.is_finite() {
            return Err(MreError::Domain(format!("g became non-finite at t = {t}")));
        }
        if steps % sample_every.max(1) == 0 || t == t_end {
            samples.push(sample(&g, t, &mut warnings));
        }
    }

    let fitted_rate = {
        let pts: Vec<(f64, f64)> = samples
            .iter()
            .filter(|s| s.d1g_origin != 0.0)
            .map(|s| (s.t, s.d1g_origin.abs().ln()))
            .collect();
        least_squares_slope(&pts)
    };
    let lower_bound_ok = samples
        .iter()
        .all(|s| grad0 * s.t.exp() <= s.grad_linf * (1.0 + 1e-12));
    let fitted_upper_constant = smallest_growth_constant(
        h0,
        &samples.iter().map(|s| (s.t, s.grad_linf)).collect::<Vec<_>>(),
    );
    let energy_monotone = samples
        .windows(2)
        .all(|w| w[1].energy <= w[0].energy * (1.0 + 1e-13));
    let certified_until = samples
        .iter()
        .take_while(|s| s.tail_fraction <= TAIL_WARNING)
        .last()
        .map_or(0.0, |s| s.t);
    Ok(HyperbolicReport {
        samples,
        fitted_rate,
        lower_bound_ok,
        fitted_upper_constant,
        energy_monotone,
        certified_until,
        warnings,
    })
}
