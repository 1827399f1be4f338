use mrelab_core::checkpoint;
use mrelab_core::diagnostics::{energy_identity_residuals, fit_continuation_constant, helicity};
use mrelab_core::dynamics::{run, run_with, IntegratorConfig, MreState, RunOptions, TimeStep};
use mrelab_core::random::random_solenoidal;
use mrelab_core::{Grid, MreError, SpectralVector};

fn state2d(seed: u64, gamma: f64, n: usize) -> MreState {
    let g = Grid::cubic(2, n).unwrap();
    MreState::new(random_solenoidal(&g, seed, 0.5, 3.0), gamma, 0.0).unwrap()
}

fn fixed(dt: f64, t_end: f64) -> IntegratorConfig {
    IntegratorConfig {
        dt: TimeStep::Fixed(dt),
        t_end,
        ..IntegratorConfig::default()
    }
}

#[test]
fn rk4_converges_at_fourth_order() {
    let g = Grid::cubic(2, 16).unwrap();
    let s0 = MreState::new(random_solenoidal(&g, 1, 10.0, 2.0), 0.0, 0.0).unwrap();
    let t_end = 0.2;
    let solve = |dt: f64| run(&s0, &fixed(dt, t_end), 1000).unwrap().final_state.b;
    let reference = solve(0.0003125);
    let e1 = solve(0.005).max_coeff_diff(&reference);
    let e2 = solve(0.0025).max_coeff_diff(&reference);
    let order = (e1 / e2).log2();
    assert!((order - 4.0).abs() < 0.3, "observed order {order}");
}

#[test]
fn energy_is_dissipated_at_the_constitutive_rate() {
    let s0 = state2d(2, 0.0, 32);
    let traj = run(&s0, &fixed(2e-3, 0.2), 1).unwrap();
    let e0 = 2.0 * traj.records[0].energy;
    for (_, r) in energy_identity_residuals(&traj.records) {
        assert!(r.abs() <= 1e-6 * e0, "residual {r}");
    }
    assert!(traj.records.windows(2).all(|w| w[1].energy <= w[0].energy));
}

#[test]
fn helicity_is_conserved_in_3d() {
    let g = Grid::cubic(3, 16).unwrap();
    let b = random_solenoidal(&g, 4, 1.0, 2.0);
    let s0 = MreState::new(b, 2.0, 0.0).unwrap();
    let h0 = helicity(&s0.b).unwrap();
    let traj = run(&s0, &fixed(0.02, 0.2), 2).unwrap();
    for r in &traj.records {
        let h = r.helicity.unwrap();
        assert!((h - h0).abs() <= 1e-10 * h0.abs().max(1.0));
    }
}

#[test]
fn mean_field_is_preserved() {
    let g = Grid::cubic(2, 32).unwrap();
    let mut b = random_solenoidal(&g, 5, 0.3, 3.0);
    b.axpy(1.0, &SpectralVector::constant(&g, &[1.0, -0.5]).unwrap());
    let s0 = MreState::new(b, 0.0, 0.0).unwrap();
    let traj = run(&s0, &IntegratorConfig { t_end: 0.05, ..Default::default() }, 10).unwrap();
    let m = traj.final_state.b.mean();
    assert!((m[0] - 1.0).abs() < 1e-14 && (m[1] + 0.5).abs() < 1e-14);
}

#[test]
fn restarting_from_a_checkpoint_reproduces_the_straight_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mid.ckpt");
    let s0 = state2d(6, 1.0, 32);
    let straight = run(&s0, &fixed(0.013, 0.5), 5).unwrap().final_state;
    let opts = RunOptions {
        sample_every: 5,
        checkpoint: Some((path.clone(), 0)),
        ..RunOptions::default()
    };
    run_with(&s0, &fixed(0.013, 0.25), &opts, |_, _| {}).unwrap();
    let mid = checkpoint::read_file(&path).unwrap();
    assert_eq!(mid.t, 0.25);
    let resumed = run(&mid, &fixed(0.013, 0.5), 5).unwrap().final_state;
    // the clipped step at t = 0.25 changes the step sequence; both are RK4 solutions
    assert!(resumed.b.max_coeff_diff(&straight.b) < 1e-9);
    assert_eq!(resumed.t, 0.5);
}

#[test]
fn identical_runs_are_bitwise_identical() {
    let s0 = state2d(7, 0.5, 32);
    let a = run(&s0, &IntegratorConfig { t_end: 0.05, ..Default::default() }, 3).unwrap();
    let b = run(&s0, &IntegratorConfig { t_end: 0.05, ..Default::default() }, 3).unwrap();
    assert_eq!(checkpoint::encode(&a.final_state), checkpoint::encode(&b.final_state));
    assert_eq!(a.records, b.records);
}

#[test]
fn blow_up_keeps_the_last_valid_state_and_records() {
    let s0 = state2d(8, 0.0, 32);
    // far beyond the stability limit of the degenerate diffusion
    let err = run(&s0, &fixed(5.0, 100.0), 1).unwrap_err();
    assert!(!err.partial.is_empty());
    match err.source {
        MreError::BlowUp { last_valid, .. } => assert!(last_valid.b.is_finite()),
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn continuation_constant_is_fitted() {
    let s0 = state2d(9, 0.0, 32);
    let opts = RunOptions {
        sample_every: 5,
        hs_orders: vec![2.0],
        checkpoint: None,
    };
    let traj = run_with(&s0, &IntegratorConfig { t_end: 0.1, ..Default::default() }, &opts, |_, _| {}).unwrap();
    let c = fit_continuation_constant(&traj.records, 2.0).unwrap();
    assert!(c >= 0.0 && c.is_finite());
    assert!(fit_continuation_constant(&traj.records, 7.0).is_none());
}
