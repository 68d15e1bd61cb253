use std::path::PathBuf;

use nulgi::data_io::{dataset_to_csv, load_dataset, parse_dataset_csv, Dataset};
use nulgi::lgi::{DataPoint, TriadConfig};
use nulgi::montecarlo::{compare, run_trials, theoretical_substitute, RunConfig};
use nulgi::oscillation::{Flavor, FlavorChannel, OscillationParams};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

#[test]
fn bundled_datasets_load_and_round_trip() {
    for name in ["daya-bay.csv", "minos.csv", "kamland.csv", "kamland-dephased.csv"] {
        let d = load_dataset(data(name)).unwrap();
        assert!(!d.is_empty(), "{name}");
        assert!(d.meta.is_some(), "{name} lacks a sidecar");
        let (points, _) = parse_dataset_csv(&dataset_to_csv(&d)).unwrap();
        assert_eq!(points, d.points, "{name}");
    }
}

// Electron survival written out by hand: only |U_ej|^2 enter, and each
// sin^2 term averages analytically over a window.
fn ee_window_average(p: &OscillationParams<f64>, c: f64, h: f64) -> f64 {
    // Phase dm2 L / 4E with hbar c = 1.973269804e-10 eV km and E in GeV.
    let per_ev2 = 1.0 / (4.0 * 1.973_269_804e-10 * 1e9);
    let (c12, s12) = (p.theta12.cos(), p.theta12.sin());
    let (c13, s13) = (p.theta13.cos(), p.theta13.sin());
    let w = [(c12 * c13).powi(2), (s12 * c13).powi(2), s13 * s13];
    let dm2 = [0.0, p.dm2_21, p.dm2_31];
    let mut prob = 1.0;
    for j in 0..3 {
        for k in j + 1..3 {
            let a = per_ev2 * (dm2[k] - dm2[j]);
            let mean_sin2 = if h == 0.0 {
                (a * c).sin().powi(2)
            } else {
                0.5 - ((2.0 * a * (c + h)).sin() - (2.0 * a * (c - h)).sin()) / (8.0 * a * h)
            };
            prob -= 4.0 * w[j] * w[k] * mean_sin2;
        }
    }
    prob
}

#[test]
fn kamland_substitute_matches_closed_form() {
    let params = OscillationParams::best_fit();
    let d = load_dataset(data("kamland.csv")).unwrap();
    let sub = theoretical_substitute(&d, &params).unwrap();
    for (orig, s) in d.points.iter().zip(&sub.points) {
        assert_eq!((orig.t, orig.dt, orig.dp), (s.t, s.dt, s.dp));
        let want = ee_window_average(&params, s.t, s.dt);
        assert!((s.p - want).abs() < 1e-6, "t = {}: {} vs {want}", s.t, s.p);
    }
}

#[test]
fn noiseless_incoherent_qubit_never_violates() {
    // A qubit that fully dephases and relaxes towards Pi+ with rate 1 has
    // P+(t) = 1 - (1 - p0) e^{-t}; every triad then gives a negative K3.
    let points = (1..=12)
        .map(|i| {
            let t = 0.25 * i as f64;
            DataPoint::new(t, 1.0 - 0.5 * (-t).exp(), 0.0, 0.0).unwrap()
        })
        .collect();
    let d = Dataset::new("relaxing", FlavorChannel::survival(Flavor::E, false), points).unwrap();
    let cfg = RunConfig {
        replications: 20,
        triads: TriadConfig::new(1e-9).unwrap(),
        ..RunConfig::default()
    };
    let dist = run_trials(&d, &cfg).unwrap();
    assert_eq!(dist.mu(), 0.0);
    assert_eq!(dist.confidence(), None);
}

#[test]
fn self_comparison_is_near_one() {
    let d = load_dataset(data("minos.csv")).unwrap();
    let a = run_trials(&d, &RunConfig { replications: 1000, seed: 11, ..RunConfig::default() }).unwrap();
    let b = run_trials(&d, &RunConfig { replications: 1000, seed: 12, ..RunConfig::default() }).unwrap();
    let r = compare(&a, &b).unwrap();
    assert!((r - 1.0).abs() < 0.15, "ratio {r}");
}
