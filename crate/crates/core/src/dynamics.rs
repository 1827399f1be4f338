//! Induction equation `∂t B = B·∇u − u·∇B` closed by `u = (−Δ)^{−γ} P div(B ⊗ B)`,
//! advanced with classical RK4.

use std::path::PathBuf;

use log::warn;
use thiserror::Error;

use crate::checkpoint;
use crate::diagnostics::{self, DiagnosticsRecord};
use crate::error::{MreError, Result};
use crate::field::{SpectralField, SpectralScalar, SpectralVector};
use crate::spectral::{d, inv_laplacian_drop_mean, leray_project};

/// Tail-energy fraction above which a sample is flagged as under-resolved.
pub const TAIL_WARNING: f64 = 1e-3;

/// Magnetic field, simulation time and the constitutive exponent γ.
#[derive(Clone, Debug)]
pub struct MreState {
    pub b: SpectralVector,
    pub t: f64,
    pub gamma: f64,
    /// Number of steps taken since construction; drives the re-projection schedule.
    pub steps: u64,
}

impl MreState {
    /// Validates and dealiases an initial field. Rejects fields that are not divergence-free.
    pub fn new(b: SpectralVector, gamma: f64, t: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(MreError::Domain(format!("gamma must be ≥ 0, got {gamma}")));
        }
        if !b.is_finite() || !t.is_finite() {
            return Err(MreError::Domain("initial state is not finite".into()));
        }
        if !b.is_divergence_free() {
            return Err(MreError::Domain(format!(
                "initial field is not divergence-free (defect {:e})",
                b.divergence_defect()
            )));
        }
        let mut b = b;
        b.dealias();
        Ok(Self {
            b,
            t,
            gamma,
            steps: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.b.dim()
    }
}

/// Time-step selection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeStep {
    Auto,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub dt: TimeStep,
    pub t_end: f64,
    pub cfl: f64,
    pub reproject_every: u64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: TimeStep::Auto,
            t_end: 1.0,
            cfl: 0.4,
            reproject_every: 1,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(MreError::Domain("t_end must be ≥ 0".into()));
        }
        if let TimeStep::Fixed(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(MreError::Domain("dt must be > 0".into()));
            }
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(MreError::Domain("cfl must lie in (0, 1]".into()));
        }
        if self.reproject_every == 0 {
            return Err(MreError::Domain("reproject_every must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Physical samples of every component of a vector field.
fn physical(v: &SpectralVector) -> Vec<Vec<f64>> {
    v.to_physical()
}

/// `u = (−Δ)^{−γ} P div(B ⊗ B)` from pre-transformed samples of B.
fn velocity_from_physical(b: &SpectralVector, bp: &[Vec<f64>], gamma: f64) -> SpectralVector {
    let grid = b.grid();
    let dim = b.dim();
    let mut stress = vec![vec![None; dim]; dim];
    for i in 0..dim {
        for j in i..dim {
            let prod: Vec<f64> = bp[i].iter().zip(&bp[j]).map(|(x, y)| x * y).collect();
            let t = SpectralScalar::from_physical(grid, &prod)
                .expect("sizes match")
                .dealiased();
            stress[i][j] = Some(t);
        }
    }
    let comps = (0..dim)
        .map(|i| {
            let mut acc = SpectralScalar::zeros(grid);
            for j in 0..dim {
                let t = if i <= j {
                    stress[i][j].as_ref()
                } else {
                    stress[j][i].as_ref()
                };
                acc.axpy(1.0, &d(t.expect("filled"), j));
            }
            acc
        })
        .collect();
    let div = SpectralVector::from_components(comps).expect("dim components");
    inv_laplacian_drop_mean(&leray_project(&div), gamma)
}

/// Constitutive law `u = (−Δ)^{−γ} P(B·∇B)`, evaluated in divergence form with dealiased products.
pub fn constitutive_velocity(b: &SpectralVector, gamma: f64) -> Result<SpectralVector> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(MreError::Domain(format!("gamma must be ≥ 0, got {gamma}")));
    }
    Ok(velocity_from_physical(b, &physical(b), gamma))
}

fn rhs_from_physical(b: &SpectralVector, bp: &[Vec<f64>], up: &[Vec<f64>]) -> SpectralVector {
    let grid = b.grid();
    let dim = b.dim();
    // B·∇u − u·∇B = div(u ⊗ B − B ⊗ u) for solenoidal B, u; the flux is antisymmetric.
    let mut flux = vec![vec![None; dim]; dim];
    for i in 0..dim {
        for j in (i + 1)..dim {
            let m: Vec<f64> = (0..grid.len())
                .map(|p| up[i][p] * bp[j][p] - bp[i][p] * up[j][p])
                .collect();
            flux[i][j] = Some(
                SpectralScalar::from_physical(grid, &m)
                    .expect("sizes match")
                    .dealiased(),
            );
        }
    }
    let comps = (0..dim)
        .map(|i| {
            let mut acc = SpectralScalar::zeros(grid);
            for j in 0..dim {
                if i < j {
                    acc.axpy(1.0, &d(flux[i][j].as_ref().expect("filled"), j));
                } else if j < i {
                    acc.axpy(-1.0, &d(flux[j][i].as_ref().expect("filled"), j));
                }
            }
            acc
        })
        .collect();
    SpectralVector::from_components(comps).expect("dim components")
}

/// Right-hand side `B·∇u − u·∇B` of the induction equation.
pub fn induction_rhs(b: &SpectralVector, u: &SpectralVector) -> Result<SpectralVector> {
    if b.grid() != u.grid() {
        return Err(MreError::GridMismatch(
            "B and u must share one grid".into(),
        ));
    }
    Ok(rhs_from_physical(b, &physical(b), &physical(u)))
}

/// Full MRE right-hand side together with the velocity it used.
pub fn mre_rhs(b: &SpectralVector, gamma: f64) -> (SpectralVector, SpectralVector) {
    let bp = physical(b);
    let u = velocity_from_physical(b, &bp, gamma);
    let up = physical(&u);
    (rhs_from_physical(b, &bp, &up), u)
}

/// Time step allowed by the CFL rules for the current field and velocity.
pub fn auto_dt(b: &SpectralVector, u: &SpectralVector, gamma: f64, cfl: f64) -> f64 {
    let h = b.grid().min_spacing();
    let mut dt = cfl * h / u.linf().max(1.0);
    if gamma < 1.0 {
        // Degenerate diffusion: the linearization scales like |B|² |k|^{2-2γ}.
        let b2 = b.linf().powi(2).max(1.0);
        dt = dt.min(cfl * h.powf(2.0 - 2.0 * gamma) / (2.0 * b2));
    }
    dt
}

/// One classical RK4 step with a precomputed first stage.
pub(crate) fn rk4_from_stage<F: SpectralField>(
    y: &F,
    k1: &F,
    dt: f64,
    mut f: impl FnMut(&F) -> F,
) -> F {
    let mut y2 = y.clone();
    y2.axpy(0.5 * dt, k1);
    let k2 = f(&y2);
    let mut y3 = y.clone();
    y3.axpy(0.5 * dt, &k2);
    let k3 = f(&y3);
    let mut y4 = y.clone();
    y4.axpy(dt, &k3);
    let k4 = f(&y4);
    let mut out = y.clone();
    out.axpy(dt / 6.0, k1);
    out.axpy(dt / 3.0, &k2);
    out.axpy(dt / 3.0, &k3);
    out.axpy(dt / 6.0, &k4);
    out
}

/// Classical RK4 step for an autonomous field equation.
pub fn rk4_step<F: SpectralField>(y: &F, dt: f64, mut f: impl FnMut(&F) -> F) -> F {
    let k1 = f(y);
    rk4_from_stage(y, &k1, dt, f)
}

/// Time step the integrator would take from `state`, without clipping to `t_end`.
pub fn step_size(state: &MreState, cfg: &IntegratorConfig) -> f64 {
    match cfg.dt {
        TimeStep::Fixed(dt) => dt,
        TimeStep::Auto => {
            let u = constitutive_velocity(&state.b, state.gamma).expect("gamma validated");
            auto_dt(&state.b, &u, state.gamma, cfg.cfl)
        }
    }
}

/// Advances by one RK4 step; `max_dt` clips the step (used to land on `t_end`).
pub fn step_clipped(state: &MreState, cfg: &IntegratorConfig, max_dt: f64) -> Result<MreState> {
    let gamma = state.gamma;
    let (k1, u) = mre_rhs(&state.b, gamma);
    let dt = match cfg.dt {
        TimeStep::Fixed(dt) => dt,
        TimeStep::Auto => auto_dt(&state.b, &u, gamma, cfg.cfl),
    }
    .min(max_dt);
    let mut b = rk4_from_stage(&state.b, &k1, dt, |y| mre_rhs(y, gamma).0);
    let steps = state.steps + 1;
    if steps % cfg.reproject_every == 0 {
        b = leray_project(&b);
    }
    if !b.is_finite() {
        return Err(MreError::BlowUp {
            t: state.t,
            last_valid: Box::new(state.clone()),
        });
    }
    Ok(MreState {
        b,
        t: state.t + dt,
        gamma,
        steps,
    })
}

/// One RK4 step of the MRE system.
pub fn step(state: &MreState, cfg: &IntegratorConfig) -> Result<MreState> {
    step_clipped(state, cfg, f64::INFINITY)
}

/// Sampling and checkpoint options for [`run`].
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub sample_every: usize,
    /// Orders `s` of the `Ḣ^s` norms recorded at each sample.
    pub hs_orders: Vec<f64>,
    /// Writes a checkpoint to this path every `checkpoint_every` steps and at the end.
    pub checkpoint: Option<(PathBuf, usize)>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            sample_every: 10,
            hs_orders: vec![1.0],
            checkpoint: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub final_state: MreState,
    pub records: Vec<DiagnosticsRecord>,
    /// Under-resolution notices raised by the tail-energy monitor.
    pub warnings: Vec<String>,
}

/// A run that stopped early, with every record collected before the failure.
#[derive(Debug, Error)]
#[error("run stopped at t = {t}: {source}")]
pub struct RunFailure {
    pub t: f64,
    #[source]
    pub source: MreError,
    pub partial: Vec<DiagnosticsRecord>,
}

fn time_tolerance(t_end: f64) -> f64 {
    1e-12 * t_end.abs().max(1.0)
}

/// Advances `state0` to `cfg.t_end`, recording diagnostics every `sample_every` steps.
pub fn run(
    state0: &MreState,
    cfg: &IntegratorConfig,
    sample_every: usize,
) -> std::result::Result<Trajectory, RunFailure> {
    let opts = RunOptions {
        sample_every,
        ..RunOptions::default()
    };
    run_with(state0, cfg, &opts, |_, _| {})
}

/// [`run`] with explicit options and a callback invoked at every sample.
pub fn run_with(
    state0: &MreState,
    cfg: &IntegratorConfig,
    opts: &RunOptions,
    mut on_sample: impl FnMut(&MreState, &DiagnosticsRecord),
) -> std::result::Result<Trajectory, RunFailure> {
    let fail = |t: f64, source: MreError, partial: Vec<DiagnosticsRecord>| RunFailure {
        t,
        source,
        partial,
    };
    if let Err(e) = cfg.validate() {
        return Err(fail(state0.t, e, Vec::new()));
    }
    let sample_every = opts.sample_every.max(1);
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    let mut state = state0.clone();

    let mut sample = |state: &MreState,
                      records: &mut Vec<DiagnosticsRecord>,
                      warnings: &mut Vec<String>|
     -> Result<()> {
        let rec = diagnostics::record(state, &opts.hs_orders)?;
        if rec.tail_fraction > TAIL_WARNING {
            let msg = format!(
                "t = {:.6}: tail fraction {:.3e} exceeds {:.0e}; field may be under-resolved",
                rec.t, rec.tail_fraction, TAIL_WARNING
            );
            warn!("{msg}");
            warnings.push(msg);
        }
        on_sample(state, &rec);
        records.push(rec);
        Ok(())
    };

    if let Err(e) = sample(&state, &mut records, &mut warnings) {
        return Err(fail(state.t, e, records));
    }
    let tol = time_tolerance(cfg.t_end);
    let mut taken = 0usize;
    let mut last_sampled = true;
    while cfg.t_end - state.t > tol {
        let remaining = cfg.t_end - state.t;
        let next = match step_clipped(&state, cfg, remaining) {
            Ok(mut s) => {
                if cfg.t_end - s.t <= tol {
                    s.t = cfg.t_end;
                }
                s
            }
            Err(e) => return Err(fail(state.t, e, records)),
        };
        state = next;
        taken += 1;
        last_sampled = false;
        if taken % sample_every == 0 {
            if let Err(e) = sample(&state, &mut records, &mut warnings) {
                return Err(fail(state.t, e, records));
            }
            last_sampled = true;
        }
        if let Some((path, every)) = &opts.checkpoint {
            if *every > 0 && taken % every == 0 {
                if let Err(e) = checkpoint::write_file(path, &state) {
                    return Err(fail(state.t, e, records));
                }
            }
        }
    }
    if !last_sampled {
        if let Err(e) = sample(&state, &mut records, &mut warnings) {
            return Err(fail(state.t, e, records));
        }
    }
    if let Some((path, _)) = &opts.checkpoint {
        if let Err(e) = checkpoint::write_file(path, &state) {
            return Err(fail(state.t, e, records));
        }
    }
    Ok(Trajectory {
        final_state: state,
        records,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn uniform_field_is_a_fixed_point() {
        let g = Grid::cubic(2, 16).unwrap();
        let b = SpectralVector::constant(&g, &[1.0, 0.0]).unwrap();
        let u = constitutive_velocity(&b, 0.0).unwrap();
        assert_eq!(u.max_coeff(), 0.0);
        let s = MreState::new(b.clone(), 0.0, 0.0).unwrap();
        let cfg = IntegratorConfig::default();
        let next = step(&s, &cfg).unwrap();
        assert!(next.t > 0.0);
        assert_eq!(next.b.max_coeff_diff(&b), 0.0);
    }

    #[test]
    fn zero_velocity_gives_zero_rhs() {
        let g = Grid::cubic(2, 16).unwrap();
        let b = SpectralVector::from_fn(&g, |x| [x[1].sin(), x[0].cos(), 0.0]);
        let r = induction_rhs(&b, &SpectralVector::zeros(&g)).unwrap();
        assert_eq!(r.max_coeff(), 0.0);
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let b = SpectralVector::zeros(&Grid::cubic(2, 16).unwrap());
        let u = SpectralVector::zeros(&Grid::cubic(2, 8).unwrap());
        assert!(matches!(induction_rhs(&b, &u), Err(MreError::GridMismatch(_))));
    }

    #[test]
    fn state_rejects_divergent_field_and_negative_gamma() {
        let g = Grid::cubic(2, 16).unwrap();
        let bad = SpectralVector::from_fn(&g, |x| [x[0].sin(), 0.0, 0.0]);
        assert!(MreState::new(bad, 0.0, 0.0).is_err());
        let ok = SpectralVector::constant(&g, &[1.0, 0.0]).unwrap();
        assert!(MreState::new(ok, -1.0, 0.0).is_err());
    }

    #[test]
    fn non_finite_step_is_a_blow_up() {
        let g = Grid::cubic(2, 16).unwrap();
        let mut b = SpectralVector::from_fn(&g, |x| [x[1].sin(), 0.0, 0.0]);
        let s = MreState::new(b.clone(), 0.0, 0.0).unwrap();
        b.comp_mut(0).coeffs_mut()[3].re = f64::NAN;
        let broken = MreState { b, ..s };
        let cfg = IntegratorConfig {
            dt: TimeStep::Fixed(0.01),
            ..Default::default()
        };
        match step(&broken, &cfg) {
            Err(MreError::BlowUp { last_valid, .. }) => assert_eq!(last_valid.t, 0.0),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn zero_length_run_returns_initial_state_and_one_record() {
        let g = Grid::cubic(2, 16).unwrap();
        let b = SpectralVector::from_fn(&g, |x| [1.0 + 0.1 * x[1].sin(), 0.0, 0.0]);
        let s = MreState::new(b, 0.0, 0.0).unwrap();
        let cfg = IntegratorConfig {
            t_end: 0.0,
            ..Default::default()
        };
        let traj = run(&s, &cfg, 5).unwrap();
        assert_eq!(traj.records.len(), 1);
        assert_eq!(traj.final_state.t, 0.0);
        assert_eq!(traj.final_state.b.max_coeff_diff(&s.b), 0.0);
    }
}
