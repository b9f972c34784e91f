use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use proptest::prelude::*;
use syncert::config::{
    Builtin, CertificateKind, DampingConfig, DisturbanceConfig, ExperimentConfig, NetworkSource, OutputConfig,
    PowerFlowConfig, RecloseMode, SimConfig, TripConfig,
};
use syncert::netfile::NetworkSpec;
use syncert::{run, RunOptions};
use syncert_core::ieee9::{ParameterSet, LINES, POWER_PROFILE};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e3f64..1e3, Just(0.0), 1e-12f64..1e-6]
}

fn spec_strategy() -> impl Strategy<Value = NetworkSpec> {
    (2usize..6).prop_flat_map(|n| {
        (
            prop::collection::vec((1..=n, 1..=n, 0.1f64..20.0), 1..8),
            prop::collection::vec(finite(), n),
            prop::collection::vec(1..=n, 0..3),
            prop::option::of(1..=n),
        )
            .prop_map(move |(lines, power, disturbance_buses, reference_bus)| NetworkSpec {
                buses: n,
                lines,
                power,
                disturbance_buses,
                reference_bus,
            })
    })
}

fn config_strategy() -> impl Strategy<Value = ExperimentConfig> {
    let network = prop_oneof![
        prop_oneof![Just(Builtin::Ieee9Set1), Just(Builtin::Ieee9Set2)].prop_map(|b| NetworkSource {
            builtin: Some(b),
            ..Default::default()
        }),
        "[a-z]{1,8}\\.toml".prop_map(|f| NetworkSource {
            file: Some(PathBuf::from(f)),
            ..Default::default()
        }),
        spec_strategy().prop_map(|s| NetworkSource {
            inline: Some(s),
            ..Default::default()
        }),
    ];
    let damping = (
        prop::option::of(prop::collection::vec(0.1f64..2.0, 0..5)),
        prop::option::of((0.1f64..1.0, 1.0f64..2.0).prop_map(|(a, b)| [a, b])),
        prop::option::of(any::<u64>()),
    )
        .prop_map(|(values, range, seed)| DampingConfig { values, range, seed });
    let power_flow = (prop::option::of(1usize..10), finite(), 1e-14f64..1e-4, 1usize..100).prop_map(
        |(reference_bus, reference_angle, tolerance, max_iterations)| PowerFlowConfig {
            reference_bus,
            reference_angle,
            tolerance,
            max_iterations,
        },
    );
    let disturbance = prop::option::of(
        (prop::collection::vec(1usize..10, 0..4), 0.0f64..10.0, 0.01f64..1.0, any::<u64>(), 0.0f64..10.0).prop_map(
            |(buses, magnitude, hold_interval, seed, start_time)| DisturbanceConfig {
                buses,
                magnitude,
                hold_interval,
                seed,
                start_time,
            },
        ),
    );
    let trip = prop::option::of(
        (
            (1usize..10, 1usize..10),
            0.0f64..10.0,
            prop_oneof![Just(RecloseMode::OnC1AndC2), Just(RecloseMode::AtTime), Just(RecloseMode::Never)],
            prop::option::of(0.0f64..20.0),
        )
            .prop_map(|((a, b), time, reclose, reclose_time)| TripConfig {
                line: [a, b],
                time,
                reclose,
                reclose_time,
            }),
    );
    let certificates = prop::sample::subsequence(
        vec![
            CertificateKind::I,
            CertificateKind::IOriginal,
            CertificateKind::II,
            CertificateKind::RoaI,
            CertificateKind::RoaII,
        ],
        0..=5,
    );
    let sim = (0.1f64..100.0, 1e-5f64..0.1, 1usize..100).prop_map(|(horizon, step, record_stride)| SimConfig {
        horizon,
        step,
        record_stride,
    });
    (
        prop::option::of("[ -~]{0,20}"),
        certificates,
        network,
        damping,
        power_flow,
        disturbance,
        trip,
        sim,
        "[a-z/]{1,12}",
    )
        .prop_map(
            |(name, certificates, network, damping, power_flow, disturbance, trip, sim, dir)| ExperimentConfig {
                name,
                certificates,
                network,
                damping,
                power_flow,
                disturbance,
                trip,
                sim,
                output: OutputConfig {
                    directory: PathBuf::from(dir),
                },
            },
        )
}

proptest! {
    #[test]
    fn serialize_then_parse_round_trips(cfg in config_strategy()) {
        let text = cfg.to_toml();
        let back = ExperimentConfig::parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_toml(), text);
    }
}

#[test]
fn example_configs_round_trip_and_validate() {
    for name in ["scenario1_set1.toml", "scenario2_set2.toml", "certificates_only.toml", "sim_only.toml"] {
        let path = configs_dir().join(name);
        let cfg = ExperimentConfig::load(&path).unwrap();
        let diag = cfg.validate(&configs_dir());
        assert!(diag.is_empty(), "{name}: {diag}");
        assert_eq!(ExperimentConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }
}

#[test]
fn builtin_table_data() {
    for set in [ParameterSet::One, ParameterSet::Two] {
        let spec = NetworkSpec::builtin(set);
        assert_eq!(spec.lines.len(), 9);
        assert_eq!(spec.power.len(), 9);
        assert!(spec.power.iter().sum::<f64>().abs() < 1e-9);
        assert!(spec.lines.iter().all(|l| l.2 > 0.0));
        for (l, &(i, j)) in spec.lines.iter().zip(&LINES) {
            assert_eq!((l.0, l.1), (i, j));
        }
        assert_eq!(spec.power, POWER_PROFILE);
        let mut diag = syncert::config::Diagnostics::default();
        spec.validate("network", &mut diag);
        assert!(diag.is_empty(), "{diag}");
    }
    assert_eq!(NetworkSpec::builtin(ParameterSet::One).lines[0].2, 17.2376);
    assert_eq!(NetworkSpec::builtin(ParameterSet::Two).lines[8].2, 11.3565);
}

fn inline_base() -> ExperimentConfig {
    ExperimentConfig::parse(
        r#"
[network.inline]
buses = 3
lines = [[1, 2, 1.5], [2, 3, 2.0]]
power = [0.2, 0.0, -0.2]

[damping]
values = [1.0, 1.0, 1.0]
"#,
    )
    .unwrap()
}

fn fields(cfg: &ExperimentConfig) -> Vec<String> {
    cfg.validate(Path::new(".")).iter().map(|d| d.field.clone()).collect()
}

#[test]
fn edge_to_missing_bus_is_reported_at_that_line() {
    let mut cfg = inline_base();
    cfg.network.inline.as_mut().unwrap().lines.push((2, 7, 1.0));
    assert!(fields(&cfg).contains(&"network.inline.lines[2]".to_string()), "{:?}", fields(&cfg));
}

#[test]
fn unbalanced_injections_are_rejected() {
    let mut cfg = inline_base();
    cfg.network.inline.as_mut().unwrap().power[0] = 0.3;
    let diag = cfg.validate(Path::new("."));
    let d = diag.iter().find(|d| d.field == "network.inline.power").expect("power diagnostic");
    assert!(d.message.contains("Σ p_o = 0"), "{}", d.message);
}

#[test]
fn step_must_divide_hold_interval() {
    let mut cfg = inline_base();
    cfg.disturbance = Some(DisturbanceConfig {
        buses: vec![1],
        magnitude: 0.1,
        hold_interval: 0.1,
        seed: 0,
        start_time: 0.0,
    });
    cfg.sim.step = 0.003;
    assert!(fields(&cfg).contains(&"disturbance.hold_interval".to_string()), "{:?}", fields(&cfg));
}

#[test]
fn disconnected_network_and_bad_trip_are_reported() {
    let mut cfg = inline_base();
    let spec = cfg.network.inline.as_mut().unwrap();
    spec.buses = 4;
    spec.power.push(0.0);
    cfg.damping.values = Some(vec![1.0; 4]);
    cfg.trip = Some(TripConfig {
        line: [1, 3],
        time: 1.0,
        reclose: RecloseMode::AtTime,
        reclose_time: None,
    });
    let f = fields(&cfg);
    assert!(f.contains(&"network.inline.lines".to_string()), "{f:?}");
    assert!(f.contains(&"trip.line".to_string()), "{f:?}");
    assert!(f.contains(&"trip.reclose_time".to_string()), "{f:?}");
}

#[test]
fn two_network_sources_are_ambiguous() {
    let mut cfg = inline_base();
    cfg.network.builtin = Some(Builtin::Ieee9Set1);
    assert_eq!(fields(&cfg), vec!["network".to_string()]);
}

fn read_tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn runs_are_bit_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::load(&configs_dir().join("scenario1_set1.toml")).unwrap();
    let mut trees = Vec::new();
    for k in 0..2 {
        let out = tmp.path().join(format!("run{k}"));
        let opts = RunOptions {
            output: Some(out.clone()),
            seed: None,
        };
        let summary = run(cfg.clone(), &configs_dir(), &opts).unwrap();
        assert!(summary.trip.is_some() && summary.disturbance.is_some());
        let mut tree = read_tree(&out);
        // The summary embeds the output path.
        tree.retain(|(p, _)| p != Path::new("summary.json"));
        trees.push(tree);
    }
    assert_eq!(trees[0], trees[1]);
    assert!(trees[0].iter().any(|(p, _)| p == Path::new("trip/trajectory.csv")));
}

#[test]
fn simulation_only_config_writes_only_trajectories() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::load(&configs_dir().join("sim_only.toml")).unwrap();
    let opts = RunOptions {
        output: Some(tmp.path().to_path_buf()),
        seed: Some(9),
    };
    let summary = run(cfg, &configs_dir(), &opts).unwrap();
    assert!(summary.certificates.is_empty());
    assert!(!tmp.path().join("certificates.json").exists());
    let csv = fs::read_to_string(tmp.path().join("disturbance/trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# syncert trajectory v1"));
    assert_eq!(
        lines.next(),
        Some("t,delta_1,delta_2,delta_3,freq_1,freq_2,freq_3,v_quad,v_pot,norm_c,norm_l")
    );
    let resolved = fs::read_to_string(tmp.path().join("config.toml")).unwrap();
    assert!(resolved.contains("seed = 9"));
}

#[test]
fn seed_override_changes_the_damping_draw() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::load(&configs_dir().join("certificates_only.toml")).unwrap();
    let mut damping = Vec::new();
    for seed in [1, 2] {
        let out = tmp.path().join(seed.to_string());
        run(cfg.clone(), &configs_dir(), &RunOptions { output: Some(out.clone()), seed: Some(seed) }).unwrap();
        let eq: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("equilibrium.json")).unwrap()).unwrap();
        damping.push(eq["damping"].clone());
    }
    assert_ne!(damping[0], damping[1]);
}

#[test]
fn cli_validate_and_run_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_syncert");
    let ok = Command::new(bin)
        .args(["validate"])
        .arg(configs_dir().join("certificates_only.toml"))
        .output()
        .unwrap();
    assert!(ok.status.success());

    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "[network]\nbuiltin = \"ieee9_set1\"\n[damping]\nrange = [0.7, 1.0]\n").unwrap();
    let out = Command::new(bin).arg("validate").arg(&bad).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("damping.seed"));

    let broken = tmp.path().join("broken.toml");
    fs::write(&broken, "[network]\nbuiltin = \"ieee9_set3\"\n").unwrap();
    let out = Command::new(bin).arg("validate").arg(&broken).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2:"), "{}", String::from_utf8_lossy(&out.stderr));

    let out_dir = tmp.path().join("out");
    let run = Command::new(bin)
        .args(["run", "--log-level", "warn"])
        .arg(configs_dir().join("certificates_only.toml"))
        .arg("--output")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(out_dir.join("certificates.json").exists());
    assert!(out_dir.join("summary.json").exists());
}
