//! Experiment registry: each experiment writes its CSVs, checkpoints, a
//! config echo and a manifest into the output directory.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use log::info;
use mrelab_core::checkpoint;
use mrelab_core::diagnostics::{self, energy_identity_residuals, helicity};
use mrelab_core::dynamics::{run_with, RunFailure, RunOptions, Trajectory};
use mrelab_core::exact25d::{
    c2_limit, current_sheet_report, growth_report, hyperbolic_experiment, limiting_state,
    log_spaced_times,
};
use mrelab_core::random::{default_band, random_solenoidal};
use mrelab_core::stability2d::{
    cellular_datum, linear_semigroup_run, nonlinear_stability_experiment, random_admissible,
    StabilityParams, StabilityRun, DEFAULT_NOISE_FLOOR,
};
use mrelab_core::{Grid, MreError, MreState, SpectralScalar, SpectralVector, TimeStep};
use serde_json::{json, Value};

use crate::config::{parse_config, serialize, Experiment, ExperimentConfig, GridSpec, Init};
use crate::manifest::{file_entry, write_manifest, FileEntry, Outputs, RunManifest, Status};

pub const CONFIG_ECHO: &str = "config.toml";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";
pub const DIAGNOSTICS_CSV: &str = "diagnostics.csv";
/// L² norm of the random datum when `params.norm` is absent.
pub const DEFAULT_NORM: f64 = 0.5;
const HS_ORDERS: [f64; 2] = [1.0, 2.0];

/// What an experiment found, before it is folded into the manifest.
#[derive(Default)]
struct Outcome {
    failures: Vec<String>,
    warnings: Vec<String>,
    summary: BTreeMap<String, Value>,
    blow_up: bool,
}

impl Outcome {
    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(msg());
        }
    }

    fn put(&mut self, key: &str, v: impl Into<Value>) {
        self.summary.insert(key.into(), v.into());
    }
}

fn grid_of(spec: GridSpec) -> anyhow::Result<Grid> {
    Ok(Grid::cubic(spec.dim, spec.n)?)
}

/// The unit ABC field `(sin x₃ + cos x₂, sin x₁ + cos x₃, sin x₂ + cos x₁)`.
pub fn abc_field(grid: &Grid) -> SpectralVector {
    SpectralVector::from_fn(grid, |x| {
        [
            x[2].sin() + x[1].cos(),
            x[0].sin() + x[2].cos(),
            x[1].sin() + x[0].cos(),
        ]
    })
}

/// Seeded initial state of a free-run or energy-audit configuration.
pub fn initial_state(cfg: &ExperimentConfig) -> anyhow::Result<MreState> {
    let spec = cfg.grid.context("the configuration has no grid")?;
    let grid = grid_of(spec)?;
    let seed = cfg.params.seed.context("the configuration has no seed")?;
    let norm = cfg.params.norm.unwrap_or(DEFAULT_NORM);
    let mut b = random_solenoidal(&grid, seed, norm, default_band(&grid));
    if cfg.params.init == Some(Init::Abc) {
        b.axpy(1.0, &abc_field(&grid));
    }
    Ok(MreState::new(b, cfg.gamma, 0.0)?)
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out_dir
        .clone()
        .unwrap_or_else(|| Path::new("mrelab-out").join(cfg.experiment.name()))
}

/// Runs the configured experiment, writing every output into `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<RunManifest> {
    execute(cfg, None)
}

fn execute(cfg: &ExperimentConfig, resume: Option<(MreState, FileEntry)>) -> anyhow::Result<RunManifest> {
    let started = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let dir = out_dir(cfg);
    let mut out = Outputs::create(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let config_text = serialize(cfg);
    out.write(CONFIG_ECHO, config_text.as_bytes())?;
    info!("running {} into {}", cfg.experiment.name(), dir.display());

    let mut resumed_from = None;
    let outcome = match cfg.experiment {
        Experiment::FreeRun | Experiment::EnergyAudit => {
            let state0 = match resume {
                Some((s, entry)) => {
                    resumed_from = Some(entry);
                    s
                }
                None => initial_state(cfg)?,
            };
            mre_run(cfg, &state0, &mut out)?
        }
        Experiment::Stability2dLinear => stability_linear(cfg, &mut out)?,
        Experiment::Stability2dNonlinear => stability_nonlinear(cfg, &mut out)?,
        Experiment::ShearGrowth => shear_growth(cfg, &mut out)?,
        Experiment::HyperbolicGrowth => hyperbolic_growth(cfg, &mut out)?,
        Experiment::CurrentSheet => current_sheet(&mut out)?,
    };

    let status = if outcome.blow_up {
        Status::BlowUp
    } else if outcome.failures.is_empty() {
        Status::Ok
    } else {
        Status::BoundFailure
    };
    let manifest = RunManifest {
        experiment: cfg.experiment.name().into(),
        software_version: env!("CARGO_PKG_VERSION").into(),
        status,
        failures: outcome.failures,
        warnings: outcome.warnings,
        summary: outcome.summary,
        config: config_text,
        started_unix,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        files: out.into_files(),
        resumed_from,
    };
    write_manifest(&dir, &manifest)?;
    Ok(manifest)
}

/// Continues a free-run or energy-audit from `ckpt`. The configuration is the
/// echo written next to the checkpoint, with `t_end` and `out_dir` overridable.
pub fn resume(ckpt: &Path, t_end: Option<f64>, out: Option<PathBuf>) -> anyhow::Result<RunManifest> {
    let bytes = std::fs::read(ckpt).with_context(|| format!("reading {}", ckpt.display()))?;
    let state = checkpoint::decode(&bytes).with_context(|| format!("decoding {}", ckpt.display()))?;
    let src_dir = ckpt.parent().unwrap_or(Path::new("."));
    let echo = src_dir.join(CONFIG_ECHO);
    let text = std::fs::read_to_string(&echo)
        .with_context(|| format!("no configuration echo {} next to the checkpoint", echo.display()))?;
    let mut cfg = parse_config(&text).with_context(|| format!("parsing {}", echo.display()))?;
    if !cfg.experiment.is_mre_run() {
        bail!("only free-run and energy-audit checkpoints can be resumed, not {}", cfg.experiment.name());
    }
    let spec = cfg.grid.context("the configuration has no grid")?;
    if state.b.grid().shape() != vec![spec.n; spec.dim].as_slice() || state.gamma != cfg.gamma {
        return Err(MreError::Format(format!(
            "checkpoint (grid {:?}, gamma {}) does not match its configuration (grid {}^{}, gamma {})",
            state.b.grid().shape(),
            state.gamma,
            spec.n,
            spec.dim,
            cfg.gamma
        ))
        .into());
    }
    if let Some(t) = t_end {
        cfg.integrator.t_end = t;
    }
    if cfg.integrator.t_end < state.t {
        bail!("t_end = {} lies before the checkpoint time {}", cfg.integrator.t_end, state.t);
    }
    cfg.out_dir = Some(out.unwrap_or_else(|| src_dir.join("resumed")));
    let entry = file_entry(ckpt, ckpt.display().to_string())?;
    execute(&cfg, Some((state, entry)))
}

fn mre_run(cfg: &ExperimentConfig, state0: &MreState, out: &mut Outputs) -> anyhow::Result<Outcome> {
    let mut oc = Outcome::default();
    let opts = RunOptions {
        sample_every: cfg.sample_every,
        hs_orders: HS_ORDERS.to_vec(),
        checkpoint: Some((out.path(FINAL_CHECKPOINT), cfg.checkpoint_every)),
    };
    let result = run_with(state0, &cfg.integrator, &opts, |_, _| {});
    let (records, final_state) = match result {
        Ok(Trajectory {
            final_state,
            records,
            warnings,
        }) => {
            oc.warnings = warnings;
            out.register(FINAL_CHECKPOINT)?;
            (records, final_state)
        }
        Err(RunFailure { t, source, partial }) => {
            let MreError::BlowUp { last_valid, .. } = &source else {
                return Err(source.into());
            };
            oc.blow_up = true;
            oc.failures.push(format!("run stopped at t = {t}: {source}"));
            out.write("last_valid.ckpt", &checkpoint::encode(last_valid))?;
            out.write_with(DIAGNOSTICS_CSV, |w| diagnostics::write_csv(w, &partial))?;
            return Ok(oc);
        }
    };
    out.write_with(DIAGNOSTICS_CSV, |w| diagnostics::write_csv(w, &records))?;

    let b0_sq = state0.b.l2_norm_sq();
    let first = &records[0];
    let last = records.last().expect("at least one record");
    oc.put("t_final", final_state.t);
    oc.put("energy_initial", first.energy);
    oc.put("energy_final", last.energy);
    oc.put("u_lip_initial", first.u_lip);
    oc.put("u_lip_final", last.u_lip);

    for w in records.windows(2) {
        let (n0, n1) = ((2.0 * w[0].energy).sqrt(), (2.0 * w[1].energy).sqrt());
        oc.check(n1 <= n0 + 1e-8, || {
            format!("‖B‖ rose from {n0:.12e} to {n1:.12e} between t = {} and t = {}", w[0].t, w[1].t)
        });
    }
    let mean_drift = state0
        .b
        .mean()
        .iter()
        .zip(final_state.b.mean())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    oc.put("mean_drift", mean_drift);
    oc.check(mean_drift <= 1e-12, || format!("mean of B drifted by {mean_drift:.3e}"));

    if state0.dim() == 3 {
        let h0 = helicity(&state0.b)?;
        let drift = records
            .iter()
            .filter_map(|r| r.helicity)
            .map(|h| (h - h0).abs())
            .fold(0.0, f64::max);
        oc.put("helicity_initial", h0);
        oc.put("helicity_max_drift", drift);
        oc.check(drift <= 1e-8 * h0.abs().max(1.0), || {
            format!("helicity drifted by {drift:.3e} from {h0:.12e}")
        });
        for r in &records {
            let b_sq = 2.0 * r.energy;
            oc.check(b_sq >= h0.abs() - 1e-8, || {
                format!("Arnold inequality fails at t = {}: ‖B‖² = {b_sq:.12e} < |H(0)| = {:.12e}", r.t, h0.abs())
            });
        }
    }

    if cfg.experiment == Experiment::EnergyAudit {
        let residuals = energy_identity_residuals(&records);
        out.write_with("energy_audit.csv", |w| {
            use std::io::Write;
            writeln!(w, "t,residual")?;
            for (t, r) in &residuals {
                writeln!(w, "{t:.16e},{r:.16e}")?;
            }
            Ok(())
        })?;
        let worst = residuals.iter().map(|r| r.1.abs()).fold(0.0, f64::max);
        oc.put("energy_identity_max_residual", worst);
        oc.put("energy_identity_bound", 1e-6 * b0_sq);
        oc.check(residuals.len() >= 5, || {
            "too few samples for the energy identity stencil".to_string()
        });
        oc.check(worst <= 1e-6 * b0_sq, || {
            format!("energy identity residual {worst:.3e} exceeds {:.3e}", 1e-6 * b0_sq)
        });
        let monotone = records.windows(2).all(|w| w[1].energy <= w[0].energy);
        oc.check(monotone, || "energy is not non-increasing".to_string());
    }
    Ok(oc)
}

/// The divergence-free mode `∇^⊥cos(k₁x₁ + k₂x₂)`.
fn single_mode(grid: &Grid, k1: f64, k2: f64) -> SpectralVector {
    SpectralVector::from_fn(grid, |x| {
        let s = (k1 * x[0] + k2 * x[1]).sin();
        [k2 * s, -k1 * s, 0.0]
    })
}

fn stability_linear(cfg: &ExperimentConfig, out: &mut Outputs) -> anyhow::Result<Outcome> {
    let mut oc = Outcome::default();
    let grid = grid_of(cfg.grid_or_default().expect("default grid"))?;
    let k = cfg.params.k.unwrap_or(4);
    let delta = cfg.params.delta.unwrap_or(0.5);
    let seed = cfg.params.seed.unwrap_or(0);
    let a_amp = cfg.params.a_amp.unwrap_or(0.01);
    let t_end = cfg.integrator.t_end;
    let dt = match cfg.integrator.dt {
        TimeStep::Fixed(dt) => dt,
        TimeStep::Auto => cfg.integrator.cfl * grid.min_spacing(),
    };
    let mut rows = Vec::new();

    let zero = SpectralScalar::zeros(&grid);
    for (k1, k2) in [(1.0, 0.0), (1.0, 1.0), (2.0, 3.0), (3.0, -1.0), (5.0, 2.0)] {
        let name = format!("mode_{k1}_{k2}");
        let f0 = single_mode(&grid, k1, k2);
        let rep = linear_semigroup_run(&zero, &f0, t_end, dt, k, delta)?;
        let exact = -k1 * k1;
        let err = (rep.first_step_rate - exact).abs();
        oc.put(&format!("{name}_first_step_rate"), rep.first_step_rate);
        oc.check(err <= 1e-12 * exact.abs(), || {
            format!("{name}: one-step rate {} differs from {exact} by {err:.3e}", rep.first_step_rate)
        });
        rows.extend(rep.samples.iter().map(|&(t, n)| (name.clone(), t, n)));
    }

    let a = SpectralScalar::from_fn(&grid, |x| a_amp * x[1].sin());
    let (_, f0) = random_admissible(&grid, seed, 1.0, default_band(&grid));
    let rep = linear_semigroup_run(&a, &f0, t_end, dt, k, delta)?;
    oc.put("generic_fitted_rate", rep.fitted_rate);
    oc.put("required_rate", rep.required_rate);
    oc.check(rep.ok, || {
        format!("generic datum decays at {:.6} > required {:.6}", rep.fitted_rate, rep.required_rate)
    });
    rows.extend(rep.samples.iter().map(|&(t, n)| ("generic".to_string(), t, n)));

    out.write_with("semigroup.csv", |w| {
        use std::io::Write;
        writeln!(w, "case,t,norm_hk")?;
        for (c, t, n) in &rows {
            writeln!(w, "{c},{t:.16e},{n:.16e}")?;
        }
        Ok(())
    })?;
    Ok(oc)
}

fn stability_nonlinear(cfg: &ExperimentConfig, out: &mut Outputs) -> anyhow::Result<Outcome> {
    let mut oc = Outcome::default();
    let grid = grid_of(cfg.grid_or_default().expect("default grid"))?;
    let d = StabilityParams::default();
    let params = StabilityParams::new(
        cfg.params.k.unwrap_or(d.k),
        cfg.params.m.unwrap_or(d.m),
        cfg.params.delta.unwrap_or(d.delta),
        cfg.params.eps.unwrap_or(d.eps),
    )?;
    let b0 = cellular_datum(&grid, params.eps, params.m);
    let run = StabilityRun {
        integrator: cfg.integrator.clone(),
        sample_every: cfg.sample_every,
        noise_floor: Some(DEFAULT_NOISE_FLOOR),
    };
    let rep = match nonlinear_stability_experiment(&params, &b0, &run) {
        Ok(rep) => rep,
        Err(MreError::BlowUp { t, last_valid }) => {
            oc.blow_up = true;
            oc.failures.push(format!("blow-up at t = {t}"));
            out.write("last_valid.ckpt", &checkpoint::encode(&last_valid))?;
            return Ok(oc);
        }
        Err(e) => return Err(e.into()),
    };
    out.write_with("stability.csv", |w| rep.write_csv(w))?;
    oc.warnings = rep.warnings.clone();
    oc.put("b0_l2", rep.b0_l2);
    oc.put("max_p0_b2", rep.max_p0_b2);
    oc.put("samples", rep.samples.len());
    // worst value/bound ratios; 0.75 would mean the 3ε constants also hold
    let worst = |f: fn(&mrelab_core::stability2d::StabilitySample) -> f64| {
        rep.samples.iter().map(f).fold(0.0, f64::max)
    };
    let ratios = [
        worst(|s| s.f_hk / s.bound_f),
        worst(|s| s.a_hk2 / s.bound_a),
        worst(|s| s.b_hm / s.bound_b),
    ];
    oc.put("max_ratio_f", ratios[0]);
    oc.put("max_ratio_a", ratios[1]);
    oc.put("max_ratio_b", ratios[2]);
    oc.put("bounds_hold_with_3eps", ratios.iter().all(|&r| r <= 0.75));
    for s in rep.samples.iter().filter(|s| !s.ok) {
        oc.failures.push(format!(
            "t = {}: f_hk {:.3e}/{:.3e}, a_hk2 {:.3e}/{:.3e}, b_hm {:.3e}/{:.3e}, b_l2 {:.3e}",
            s.t, s.f_hk, s.bound_f, s.a_hk2, s.bound_a, s.b_hm, s.bound_b, s.b_l2
        ));
    }
    oc.check(rep.all_ok, || "bootstrap bounds violated".to_string());
    Ok(oc)
}

fn shear_growth(cfg: &ExperimentConfig, out: &mut Outputs) -> anyhow::Result<Outcome> {
    let mut oc = Outcome::default();
    let eps = cfg.params.eps.expect("validated");
    let times = cfg
        .params
        .t_samples
        .clone()
        .unwrap_or_else(|| log_spaced_times(eps, 10.0, 100.0, 40));
    let rep = growth_report(eps, &times)?;
    out.write_with("growth.csv", |w| rep.write_csv(w))?;
    let slope = rep.log_slope().unwrap_or(f64::NAN);
    let last = rep.samples.last().expect("non-empty");
    oc.put("slope", slope);
    oc.put("ratio1_last", last.ratio1);
    oc.put("ratio2_last", last.ratio2);
    oc.put("c1", rep.c1);
    oc.put("c2", rep.c2);
    oc.put("c2_limit", c2_limit());
    oc.put("ratio2_last_with_c2_limit", last.ratio2 * rep.c2 / c2_limit());
    oc.check((slope - 0.25).abs() <= 0.02, || format!("log-log slope {slope:.6} is not 0.25 ± 0.02"));
    oc.check((0.95..=1.05).contains(&last.ratio1), || {
        format!("ratio1 = {:.6} at t = {} outside [0.95, 1.05]", last.ratio1, last.t)
    });
    oc.check((0.95..=1.05).contains(&last.ratio2), || {
        format!(
            "ratio2 = {:.6} at t = {} outside [0.95, 1.05]; with C₂ = √(2π/e) it is {:.6}",
            last.ratio2,
            last.t,
            last.ratio2 * rep.c2 / c2_limit()
        )
    });
    Ok(oc)
}

fn hyperbolic_growth(cfg: &ExperimentConfig, out: &mut Outputs) -> anyhow::Result<Outcome> {
    let mut oc = Outcome::default();
    let grid = grid_of(cfg.grid_or_default().expect("default grid"))?;
    let g0 = SpectralScalar::from_fn(&grid, |x| x[0].sin());
    let t_end = cfg.integrator.t_end;
    let rep = hyperbolic_experiment(&g0, t_end, cfg.integrator.cfl, cfg.sample_every)?;
    out.write_with("hyperbolic.csv", |w| rep.write_csv(w))?;
    oc.warnings = rep.warnings.clone();
    let rate = rep.fitted_rate.unwrap_or(f64::NAN);
    oc.put("fitted_rate", rate);
    oc.put("fitted_upper_constant", rep.fitted_upper_constant);
    oc.put("certified_until", rep.certified_until);
    if rep.certified_until < t_end {
        oc.warnings.push(format!(
            "resolution certified only up to t = {}; later samples are not checked",
            rep.certified_until
        ));
    }
    for s in rep.samples.iter().filter(|s| s.t <= rep.certified_until) {
        oc.check((0.99..=1.01).contains(&s.ratio_exp), || {
            format!("∂₁g(0,0,t)/e^t = {:.6} at t = {}", s.ratio_exp, s.t)
        });
    }
    oc.check((rate - 1.0).abs() <= 0.02, || format!("fitted rate {rate:.6} is not 1 ± 0.02"));
    oc.check(rep.lower_bound_ok, || "‖∇B‖∞ fell below ‖∇B₀‖∞·e^t".to_string());
    oc.check(rep.energy_monotone, || "‖g‖² increased".to_string());
    Ok(oc)
}

/// The shear profile whose limit has current sheets at `x₂ = ±π/2`.
pub fn sheet_profile(x2: f64) -> f64 {
    if x2.abs() <= 0.5 * PI {
        x2.cos().powi(2)
    } else {
        0.0
    }
}

fn current_sheet(out: &mut Outputs) -> anyhow::Result<Outcome> {
    let mut oc = Outcome::default();
    let lim = limiting_state(sheet_profile, f64::sin)?;
    let rep = current_sheet_report(&lim, 256);
    out.write_with("sheets.csv", |w| rep.write_csv(w))?;
    let planes: Vec<f64> = rep.sheets.iter().map(|s| s.x2).collect();
    oc.put("planes", json!(planes));
    let expected = [-0.5 * PI, 0.5 * PI];
    let found = planes.len() == 2
        && planes.iter().zip(expected).all(|(p, e)| (p - e).abs() <= 1e-9);
    oc.check(found, || format!("sheet planes {planes:?}, expected ±π/2"));
    let mut dev: f64 = 0.0;
    for s in &rep.sheets {
        let sign = s.x2.signum();
        for (x1, j) in &s.jump {
            dev = dev.max((j[2] - sign * x1.sin()).abs()).max(j[0].abs()).max(j[1].abs());
        }
    }
    oc.put("max_jump_deviation", dev);
    oc.check(dev <= 1e-6, || format!("jump deviates from ±sin x₁ by {dev:.3e}"));
    Ok(oc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mrelab_core::diagnostics::helicity;

    #[test]
    fn abc_field_has_the_expected_helicity() {
        let g = Grid::cubic(3, 16).unwrap();
        let b = abc_field(&g);
        assert!(b.divergence_defect() < 1e-14);
        let h = helicity(&b).unwrap();
        assert!((h - 3.0 * (2.0 * PI).powi(3)).abs() < 1e-9);
    }

    #[test]
    fn single_modes_are_admissible() {
        let g = Grid::cubic(2, 16).unwrap();
        let f = single_mode(&g, 2.0, 3.0);
        assert!(f.divergence_defect() < 1e-13);
        assert!(mrelab_core::stability2d::p0(f.comp(0)).max_coeff() < 1e-15);
    }
}
