use storychat_core::classifier::{classify_text, ClassifierConfig};
use storychat_core::engine::EngineConfig;
use storychat_core::narrative::PlotState;
use storychat_core::par::Exec;
use storychat_core::sim::{generate, run_scenario, run_seed_sweep, BurstSpec, TrafficProfile};

const CONFIG: &str = include_str!("../configs/engine.json");
const SCENARIO: &str = include_str!("../configs/scenario.json");

#[test]
fn poisson_counts_stay_within_ten_percent() {
    let (rate, seconds) = (1.67, 600.0);
    let expected = rate * seconds;
    for seed in 0..20 {
        let profile = TrafficProfile {
            seed,
            base_rate_per_s: rate,
            ..Default::default()
        };
        let n = generate(&profile, 600_000).unwrap().len() as f64;
        assert!(
            (n - expected).abs() <= 0.1 * expected,
            "seed {seed}: {n} messages, expected about {expected}"
        );
    }
}

#[test]
fn negatives_only_inside_bursts() {
    let profile = TrafficProfile {
        seed: 9,
        burst_specs: vec![BurstSpec {
            start_ms: 60_000,
            duration_ms: 20_000,
            negative_rate_per_s: 2.0,
        }],
        ..Default::default()
    };
    let cfg = ClassifierConfig::default();
    let messages = generate(&profile, 180_000).unwrap();
    let negatives: Vec<_> = messages
        .iter()
        .filter(|m| classify_text(&m.body, &cfg).is_negative())
        .collect();
    assert!(negatives.len() > 20);
    assert!(negatives
        .iter()
        .all(|m| (60_000..80_000).contains(&m.timestamp_ms)));
}

#[test]
fn shipped_files_parse_and_run() {
    let config = EngineConfig::from_json(CONFIG).unwrap();
    let profile: TrafficProfile = serde_json::from_str(SCENARIO).unwrap();
    let report = run_scenario(&profile, &config, profile.duration_ms.unwrap()).unwrap();
    assert_eq!(
        report.timeline,
        [
            PlotState::Stable,
            PlotState::Darkening,
            PlotState::GhostPresent,
            PlotState::HeartsBattle,
            PlotState::GhostExpelled,
            PlotState::Stable,
        ]
    );
}

#[test]
fn all_neutral_profile_never_leaves_stable() {
    let report = run_scenario(
        &TrafficProfile::default(),
        &EngineConfig::default(),
        300_000,
    )
    .unwrap();
    assert_eq!(report.timeline, [PlotState::Stable]);
    assert_eq!(report.counts.negative, 0);
    assert_eq!(report.counts.windows, 30);
}

#[test]
fn sweep_is_the_same_either_way() {
    let profile: TrafficProfile = serde_json::from_str(SCENARIO).unwrap();
    let seeds: Vec<u64> = (0..8).collect();
    let cfg = EngineConfig::default();
    let a = run_seed_sweep(&profile, &cfg, 600_000, &seeds, Exec::Sequential).unwrap();
    let b = run_seed_sweep(&profile, &cfg, 600_000, &seeds, Exec::Parallel).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.iter().map(|r| r.seed).collect::<Vec<_>>(), seeds);
}
