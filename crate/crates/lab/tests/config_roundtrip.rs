use mrelab::config::{parse_config, serialize, ConfigError, Experiment, ExperimentConfig, GridSpec, Init, Params};
use mrelab_core::{IntegratorConfig, TimeStep};
use proptest::option;
use proptest::prelude::*;

#[test]
fn minimal_config_gets_defaults() {
    let cfg = parse_config("experiment = \"energy-audit\"\ngamma = 0.5\n[grid]\ndim = 3\nn = 16\n[params]\nseed = 4\n").unwrap();
    assert_eq!(cfg.integrator.cfl, 0.4);
    assert_eq!(cfg.integrator.dt, TimeStep::Auto);
    assert_eq!(cfg.sample_every, 10);
    assert_eq!(cfg.checkpoint_every, 0);
    assert_eq!(cfg.grid, Some(GridSpec { dim: 3, n: 16 }));
}

#[test]
fn negative_gamma_is_rejected() {
    let err = parse_config("experiment = \"free-run\"\ngamma = -1\n[grid]\ndim = 2\nn = 8\n[params]\nseed = 1\n").unwrap_err();
    assert_eq!(err.code(), "E103");
    assert!(err.to_string().contains("gamma must be ≥ 0"), "{err}");
    assert!(matches!(err, ConfigError::InvalidValue { line: Some(2), .. }));
}

#[test]
fn error_kinds_have_distinct_codes() {
    let cases = [
        ("experiment = \"free-run\"\ngamma = \n", "E100"),
        ("experiment = \"navier-stokes\"\n", "E101"),
        ("experiment = \"shear-growth\"\n", "E102"),
        ("experiment = \"shear-growth\"\n[params]\neps = 0\n", "E103"),
        ("experiment = \"shear-growth\"\nspeed = 3\n", "E104"),
    ];
    for (text, code) in cases {
        assert_eq!(parse_config(text).unwrap_err().code(), code, "{text}");
    }
}

fn finite_pos() -> impl Strategy<Value = f64> {
    (1e-6f64..1e6).prop_filter("positive", |x| *x > 0.0)
}

fn arb_config() -> impl Strategy<Value = ExperimentConfig> {
    let integrator = (
        prop_oneof![Just(TimeStep::Auto), finite_pos().prop_map(TimeStep::Fixed)],
        0.0f64..1e4,
        (1e-3f64..=1.0),
        1u64..100,
    )
        .prop_map(|(dt, t_end, cfl, reproject_every)| IntegratorConfig {
            dt,
            t_end,
            cfl,
            reproject_every,
        });
    let params = (
        option::of(0u64..=i64::MAX as u64),
        option::of(finite_pos()),
        option::of(0.01f64..0.99),
        option::of(1u32..=64),
        option::of(1u32..=64),
        option::of(finite_pos()),
        option::of(prop::collection::vec(finite_pos(), 1..6)),
        option::of(finite_pos()),
        option::of(-1e3f64..1e3),
    );
    (
        prop::sample::select(Experiment::ALL.to_vec()),
        2usize..=3,
        (2usize..=2048).prop_map(|h| 2 * h),
        0.0f64..8.0,
        integrator,
        1usize..1000,
        0usize..1000,
        params,
        option::of("[a-z][a-z0-9_/]{0,12}"),
    )
        .prop_map(|(experiment, dim, n, gamma, integrator, sample_every, checkpoint_every, p, out)| {
            let (seed, eps, delta, k, m, lambda, t_samples, norm, a_amp) = p;
            let mre = experiment.is_mre_run();
            let planar = matches!(
                experiment,
                Experiment::Stability2dLinear | Experiment::Stability2dNonlinear | Experiment::HyperbolicGrowth
            );
            let dim = if planar { 2 } else { dim };
            let gamma = if planar && experiment != Experiment::HyperbolicGrowth { 0.0 } else { gamma };
            ExperimentConfig {
                experiment,
                grid: Some(GridSpec { dim, n }),
                gamma,
                integrator,
                sample_every,
                checkpoint_every,
                params: Params {
                    seed: if mre { seed.or(Some(0)) } else { seed },
                    eps: if experiment == Experiment::ShearGrowth { eps.or(Some(0.1)) } else { eps },
                    delta,
                    k,
                    m,
                    lambda,
                    t_samples,
                    norm,
                    init: if mre && dim == 3 { Some(Init::Abc) } else { Some(Init::Random) },
                    a_amp,
                },
                out_dir: out.map(Into::into),
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn serialized_configs_reparse_to_the_same_value(cfg in arb_config()) {
        let text = serialize(&cfg);
        let back = parse_config(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(serialize(&back), text);
    }
}
