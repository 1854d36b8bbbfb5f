//! End-to-end acceptance suite. One test per criterion; each prints a
//! `acceptance <id>: PASS` line when its checks hold.
//!
//! Trend checks run the shipped sweep presets at their full replication
//! counts and verify curve shapes (ordering, monotonicity within replication
//! noise, flattening, plateau bands) rather than absolute points; the energy
//! plateau check is a calibration of the shipped constants, not a hardware
//! prediction.

use csim_core::baseline::{assign_orthogonal_channels, InterferenceSet};
use csim_core::engine::RngStream;
use csim_core::harness::{preset, run_experiment, ResultTable};
use csim_core::metrics::EnergyModel;
use csim_core::runner::{run_scenario, RunOptions};
use csim_core::spectrum::{
    compute_unused, noise_pdf, noise_power_indicator, region_probability, ChannelId, ChannelSet,
    NoiseModel,
};
use csim_core::{ScenarioConfig, Scheme};
use statrs::distribution::{ChiSquared, ContinuousCDF, Gamma};

fn pass(id: &str) {
    println!("acceptance {id}: PASS");
}

/// Composite Simpson integral, used as an independent quadrature oracle.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut total = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        total += w * f(a + h * i as f64);
    }
    total * h / 3.0
}

#[test]
fn c01_math_oracle_suite() {
    // density normalization by quadrature
    for u in [1u32, 2, 4, 8] {
        let total = simpson(|y| noise_pdf(y, u), 0.0, 60.0, 40_000);
        assert!((total - 1.0).abs() < 1e-6, "u={u}: pdf integral {total}");
    }

    // region probabilities sum to one
    for u in [1u32, 2, 4, 8] {
        let m = NoiseModel::new(u, 1.5, 3.0);
        let total: f64 = (1..=3).map(|j| region_probability(j, &m)).sum();
        assert!((total - 1.0).abs() < 1e-6, "u={u}: region sum {total}");
    }

    // closed forms at u = 1 match quadrature to 1e-8
    let m1 = NoiseModel::new(1, std::f64::consts::LN_2, 4f64.ln());
    let q1 = simpson(|y| noise_pdf(y, 1), 0.0, std::f64::consts::LN_2, 200_000);
    assert!((region_probability(1, &m1) - 0.5).abs() < 1e-12);
    assert!((q1 - region_probability(1, &m1)).abs() < 1e-8);
    let q2 = simpson(|y| noise_pdf(y, 1), std::f64::consts::LN_2, 4f64.ln(), 200_000);
    assert!((region_probability(2, &m1) - 0.25).abs() < 1e-12);
    assert!((q2 - region_probability(2, &m1)).abs() < 1e-8);

    // statrs gamma CDF as a second independent route
    for u in [2u32, 4, 8] {
        let m = NoiseModel::new(u, 1.5, 3.0);
        let gamma = Gamma::new(f64::from(u), f64::from(u)).unwrap();
        let expect = gamma.cdf(1.5);
        assert!(
            (region_probability(1, &m) - expect).abs() < 1e-7,
            "u={u}: quadrature {} vs gamma cdf {expect}",
            region_probability(1, &m)
        );
    }

    // Monte-Carlo histogram of the indicator against its density
    for u in [1u32, 4] {
        let gamma = Gamma::new(f64::from(u), f64::from(u)).unwrap();
        let bins = 32usize;
        let edges: Vec<f64> = (1..bins)
            .map(|i| gamma.inverse_cdf(i as f64 / bins as f64))
            .collect();
        let mut counts = vec![0u64; bins];
        let mut rng = RngStream::new(20_240_817, u as u64);
        let draws = 100_000;
        for _ in 0..draws {
            let samples: Vec<f64> = (0..2 * u as usize).map(|_| rng.standard_normal()).collect();
            let y = noise_power_indicator(&samples, u);
            let bin = edges.partition_point(|e| *e <= y);
            counts[bin] += 1;
        }
        let expected = draws as f64 / bins as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        let p = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(chi2);
        assert!(p > 0.01, "u={u}: chi2={chi2:.1}, p={p:.4}");
    }
    pass("c01 math-oracles");
}

#[test]
fn c02_channel_set_brute_force() {
    // every vicinity mask x every default channel, against bit enumeration
    for bits in 0..=u16::MAX {
        let vicinity = ChannelSet::from_bits(bits);
        for d in 0..16u8 {
            let default = ChannelId::new(d);
            let got = compute_unused(ChannelSet::FULL, vicinity, default).bits();
            let mut expect = 0u16;
            for ch in 0..16u16 {
                let busy = bits & (1 << ch) != 0 || ch == u16::from(d);
                if !busy {
                    expect |= 1 << ch;
                }
            }
            assert_eq!(got, expect, "bits={bits:#x} default={d}");
        }
    }
    pass("c02 set-algebra-brute-force");
}

#[test]
fn c03_protocol_invariant_suite() {
    // 10 seeds x 200 superframes, 10 WBANs x 10 sensors; the runner audits
    // slot exclusivity, channel legality, backup sizing, beacon-loss safety,
    // sensing-engagement gating and packet conservation as it goes
    let mut backup_attempts = 0;
    for seed in 0..10u64 {
        let mut cfg = ScenarioConfig::default();
        cfg.n_wbans = 10;
        cfg.k_sensors = 10;
        cfg.superframes = 200;
        cfg.seed = seed;
        // half the seeds run under heavy pressure so the backup and
        // saturation paths are exercised, not just the quiet ones
        if seed % 2 == 1 {
            cfg.snr_threshold_db = -10.0;
            cfg.n_iot_devices = 40;
            cfg.iot_max_clusters = 8;
        }
        let out = run_scenario(&cfg, &RunOptions::default());
        assert!(
            out.violations.is_empty(),
            "seed {seed}: {:?}",
            out.violations
        );
        let s = &out.summary;
        assert_eq!(s.generated, s.delivered + s.duplicates + s.pending);
        backup_attempts += s.backup_attempts;
    }
    assert!(backup_attempts > 0, "no backup activity across seeds");

    // saturation runs: wide relevance and full-band cluster blocks empty the
    // unused pool, so the sensing-engagement path and its gating invariant
    // are genuinely exercised
    let mut engagements = 0;
    for seed in 0..2u64 {
        let mut cfg = ScenarioConfig::default();
        cfg.n_wbans = 10;
        cfg.k_sensors = 10;
        cfg.superframes = 200;
        cfg.seed = seed;
        cfg.snr_threshold_db = -10.0;
        cfg.n_iot_devices = 32;
        cfg.iot_devices_per_cluster = 2;
        cfg.iot_max_clusters = 16;
        cfg.iot_channel_width_min = 4;
        cfg.iot_channel_width_max = 4;
        cfg.csim_sense_offset_db = -200.0;
        cfg.csim_sense_max_range_m = 100.0;
        let out = run_scenario(&cfg, &RunOptions::default());
        assert!(
            out.violations.is_empty(),
            "saturated seed {seed}: {:?}",
            out.violations
        );
        let s = &out.summary;
        assert_eq!(s.generated, s.delivered + s.duplicates + s.pending);
        engagements += s.engagements;
    }
    assert!(engagements > 0, "sensing module never engaged under saturation");
    pass("c03 protocol-invariants");
}

fn series(table: &ResultTable, scheme: &str) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let rows = table.series(scheme);
    let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let stds: Vec<f64> = rows.iter().map(|r| r.2).collect();
    (xs, ys, stds)
}

fn first_segment_slope(xs: &[f64], ys: &[f64]) -> f64 {
    (ys[1] - ys[0]) / (xs[1] - xs[0])
}

fn last3_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    (ys[n - 1] - ys[n - 3]) / (xs[n - 1] - xs[n - 3])
}

fn plateau(ys: &[f64]) -> f64 {
    ys[ys.len() - 3..].iter().sum::<f64>() / 3.0
}

fn assert_non_increasing(ys: &[f64], stds: &[f64], reps: f64, label: &str) {
    for i in 1..ys.len() {
        let tol = 2.0 * stds[i] / reps.sqrt() + 1e-12;
        assert!(
            ys[i] <= ys[i - 1] + tol,
            "{label} rises at point {i}: {} -> {}",
            ys[i - 1],
            ys[i]
        );
    }
}

fn assert_non_decreasing(ys: &[f64], stds: &[f64], reps: f64, label: &str) {
    for i in 1..ys.len() {
        let tol = 2.0 * stds[i] / reps.sqrt() + 1e-12;
        assert!(
            ys[i] >= ys[i - 1] - tol,
            "{label} falls at point {i}: {} -> {}",
            ys[i - 1],
            ys[i]
        );
    }
}

fn assert_dominates(a: &[f64], b: &[f64], label: &str) {
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        assert!(x >= y, "{label} violated at point {i}: {x} < {y}");
    }
}

#[test]
fn c04_cluster_size_trend() {
    let spec = preset("exp1").unwrap();
    let reps = f64::from(spec.replications);
    let table = run_experiment(&spec).unwrap();
    let (xs, csim, csim_std) = series(&table, "csim");
    let (_, ssa, ssa_std) = series(&table, "ssa");

    assert_dominates(&csim, &ssa, "csim >= ssa");
    assert_non_increasing(&csim, &csim_std, reps, "csim availability");
    assert_non_increasing(&ssa, &ssa_std, reps, "ssa availability");

    // both flatten: the tail slope collapses against the initial slope
    for (name, ys) in [("csim", &csim), ("ssa", &ssa)] {
        let initial = first_segment_slope(&xs, ys).abs();
        let tail = last3_slope(&xs, ys).abs();
        assert!(
            tail < 0.2 * initial,
            "{name} does not flatten: tail {tail} vs initial {initial}"
        );
    }
    let sep = plateau(&csim) - plateau(&ssa);
    assert!(sep >= 0.1, "plateau separation {sep} < 0.1");
    pass("c04 cluster-size-trend");
}

#[test]
fn c05_snr_threshold_trend() {
    let spec = preset("exp2").unwrap();
    let reps = f64::from(spec.replications);
    let table = run_experiment(&spec).unwrap();
    let (_, csim, csim_std) = series(&table, "csim");
    let (_, ssa, ssa_std) = series(&table, "ssa");

    assert_dominates(&csim, &ssa, "csim >= ssa");
    assert_non_decreasing(&csim, &csim_std, reps, "csim availability");
    assert_non_increasing(&ssa, &ssa_std, reps, "ssa availability");
    let cp = plateau(&csim);
    let sp = plateau(&ssa);
    assert!(cp > 0.85, "csim plateau {cp} <= 0.85");
    assert!(sp < 0.3, "ssa plateau {sp} >= 0.3");
    pass("c05 snr-threshold-trend");
}

#[test]
fn c06_sensors_per_wban_trend() {
    let spec = preset("exp3").unwrap();
    let table = run_experiment(&spec).unwrap();
    let (_, csim, _) = series(&table, "csim");
    let (_, ssa, _) = series(&table, "ssa");

    assert_dominates(&csim, &ssa, "csim >= ssa");
    let csim_range = csim.iter().cloned().fold(f64::MIN, f64::max)
        - csim.iter().cloned().fold(f64::MAX, f64::min);
    assert!(csim_range < 0.15, "csim varies by {csim_range}");
    let ssa_drop = ssa.first().unwrap() - ssa.last().unwrap();
    assert!(ssa_drop > 0.5, "ssa only drops by {ssa_drop}");
    pass("c06 sensors-per-wban-trend");
}

#[test]
fn c07_reuse_factor_trend() {
    let spec = preset("exp4").unwrap();
    let table = run_experiment(&spec).unwrap();
    let (_, csim, _) = series(&table, "csim");
    let (_, ssa, _) = series(&table, "ssa");
    assert_dominates(&csim, &ssa, "csim reuse >= ssa reuse");
    pass("c07 reuse-factor-trend");
}

#[test]
fn c08_energy_trend() {
    let spec = preset("exp5").unwrap();
    let reps = f64::from(spec.replications);
    let table = run_experiment(&spec).unwrap();
    let (xs, with_ble, w_std) = series(&table, "csim-w");
    let (_, without_ble, _) = series(&table, "csim-wo");

    for (i, (w, wo)) in with_ble.iter().zip(&without_ble).enumerate() {
        assert!(w < wo, "BLE-on energy not below BLE-off at point {i}");
    }
    assert_non_decreasing(&with_ble, &w_std, reps, "csim-w energy");

    // flattening at the high end: the final segment slope falls under half
    // of the steepest segment (the criterion names no ratio; this pins the
    // curve past its knee)
    let mut max_seg = 0f64;
    for i in 1..xs.len() {
        max_seg = max_seg.max(((with_ble[i] - with_ble[i - 1]) / (xs[i] - xs[i - 1])).abs());
    }
    let n = xs.len();
    let last_seg =
        ((with_ble[n - 1] - with_ble[n - 2]) / (xs[n - 1] - xs[n - 2])).abs();
    assert!(
        last_seg < 0.5 * max_seg,
        "energy curve still climbing: last {last_seg} vs max {max_seg}"
    );

    // calibration check (shipped constants, not a prediction)
    let target = 0.46e-3;
    let p = plateau(&with_ble);
    assert!(
        (p - target).abs() <= 0.25 * target,
        "energy plateau {p} outside {target} +/- 25%"
    );
    pass("c08 energy-trend");
}

#[test]
fn c09_ssa_coloring_oracle() {
    // 100 seeded random conflict graphs with <= 12 vertices, checked edge by
    // edge against the assignment
    let mut rng = RngStream::new(905, 0);
    for case in 0..100 {
        let vertices = 2 + rng.below(11);
        let mut sets = Vec::new();
        for a in 0..vertices {
            for b in a + 1..vertices {
                if rng.chance(0.35) {
                    sets.push(InterferenceSet {
                        wbans: (0, 1),
                        members: vec![(0, a), (0, b)],
                    });
                }
            }
        }
        let assignment = assign_orthogonal_channels(&sets);
        assert_eq!(assignment.unprovisioned, 0, "case {case}");
        for set in &sets {
            assert_ne!(
                assignment.channels[&set.members[0]],
                assignment.channels[&set.members[1]],
                "case {case}: edge shares a channel"
            );
        }
    }

    // pigeonhole: one 17-sensor interference set yields exactly one reuse
    let big = vec![InterferenceSet {
        wbans: (0, 1),
        members: (0..17).map(|i| (i % 2, i / 2)).collect(),
    }];
    let assignment = assign_orthogonal_channels(&big);
    let distinct: std::collections::BTreeSet<_> = assignment.channels.values().collect();
    assert_eq!(distinct.len(), 16);
    assert_eq!(assignment.unprovisioned, 1);
    pass("c09 ssa-coloring-oracle");
}

#[test]
fn c10_determinism() {
    let opts = RunOptions { collect_trace: true };
    for scheme in [Scheme::Csim, Scheme::Ssa] {
        let mut cfg = ScenarioConfig::default();
        cfg.scheme = scheme;
        cfg.seed = 424_242;
        cfg.superframes = 60;
        let a = run_scenario(&cfg, &opts);
        let b = run_scenario(&cfg, &opts);
        let text_a: String = a.trace.iter().map(|r| r.to_jsonl() + "\n").collect();
        let text_b: String = b.trace.iter().map(|r| r.to_jsonl() + "\n").collect();
        assert_eq!(text_a, text_b, "{scheme:?} traces differ");
        assert_eq!(
            serde_json::to_string(&a.summary).unwrap(),
            serde_json::to_string(&b.summary).unwrap()
        );
    }

    // sweep CSV is byte-identical as well
    let mut spec = preset("exp2").unwrap();
    spec.replications = 2;
    spec.values = vec![-30.0, -20.0];
    spec.base.superframes = 40;
    let t1 = run_experiment(&spec).unwrap().to_csv();
    let t2 = run_experiment(&spec).unwrap().to_csv();
    assert_eq!(t1, t2);

    // and the energy model itself is pure
    let model = EnergyModel::default();
    assert_eq!(
        serde_json::to_string(&model).unwrap(),
        serde_json::to_string(&EnergyModel::default()).unwrap()
    );
    pass("c10 determinism");
}
