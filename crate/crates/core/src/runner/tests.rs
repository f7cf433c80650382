use std::fs;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use super::*;
use crate::entanglement::fit_entanglement_length;
use crate::mps::random_mps;

fn small_config() -> RunConfig {
    RunConfig {
        length: 6,
        w_list: vec![1.0, 5.0],
        n_realizations: 3,
        n_states: 4,
        method: Method::Ed,
        geometric: crate::entanglement::GeometricOptions {
            restarts: 5,
            ..Default::default()
        },
        ..RunConfig::default()
    }
}

#[test]
fn config_text_round_trip() {
    let text = "# ensemble\nmodel = spin-1\nlength = 6   # short\nw_list = 0.5:2:0.5\n\nmethod = simps\nbond_dim = 12\nprofiles = yes\nout_dir = /tmp/x\n";
    let cfg = RunConfig::from_text(text).unwrap();
    assert_eq!(cfg.model, LocalSpin::One);
    assert_eq!(cfg.length, 6);
    assert_eq!(cfg.w_list, vec![0.5, 1.0, 1.5, 2.0]);
    assert_eq!(cfg.method, Method::Simps);
    assert_eq!(cfg.simps.bond_dim, 12);
    assert!(cfg.indicators.profiles);
    assert_eq!(cfg.out_dir.as_deref(), Some(std::path::Path::new("/tmp/x")));
    let again = RunConfig::from_text(&cfg.to_text()).unwrap();
    assert_eq!(again, cfg);
    assert_eq!(
        RunConfig::from_text(&RunConfig::default().to_text()).unwrap(),
        RunConfig::default()
    );
    for key in CONFIG_KEYS {
        assert!(RunConfig::default().get(key).is_some(), "{key}");
    }
}

#[test]
fn config_errors() {
    assert!(matches!(RunConfig::from_text("lenght = 4"), Err(Error::UnknownKey(k)) if k == "lenght"));
    assert!(matches!(RunConfig::from_text("length = four"), Err(Error::Config(_))));
    assert!(matches!(RunConfig::from_text("length 4"), Err(Error::Config(_))));
    assert!(matches!(RunConfig::from_text("model = spin-3"), Err(Error::Config(_))));
    let zero = RunConfig {
        n_realizations: 0,
        ..RunConfig::default()
    };
    assert!(matches!(zero.validate(), Err(Error::Config(_))));
    assert!(matches!(run_ensemble_in_memory(&zero), Err(Error::Config(_))));
    let unsorted = RunConfig {
        w_list: vec![2.0, 1.0],
        ..RunConfig::default()
    };
    assert!(unsorted.validate().is_err());
    let base = RunConfig {
        geometric: crate::entanglement::GeometricOptions {
            log_base: 1.0,
            ..Default::default()
        },
        ..RunConfig::default()
    };
    assert!(base.validate().is_err());
    assert!(matches!(
        RunConfig::load(std::path::Path::new("/nonexistent/run.cfg")),
        Err(Error::File { .. })
    ));
}

#[test]
fn overrides() {
    let mut cfg = RunConfig::default();
    let args: Vec<String> = ["--n-realizations", "7", "--w-list=1,2,3", "--verbose", "--seed", "99"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cfg.apply_overrides(&args).unwrap();
    assert_eq!(cfg.n_realizations, 7);
    assert_eq!(cfg.w_list, vec![1.0, 2.0, 3.0]);
    assert!(cfg.verbose);
    assert_eq!(cfg.seed, 99);
    let bad = vec!["--bogus".to_string(), "1".to_string()];
    assert!(matches!(cfg.apply_overrides(&bad), Err(Error::UnknownKey(k)) if k == "bogus"));
    assert!(cfg.apply_overrides(&["stray".to_string()]).is_err());
}

#[test]
fn seed_derivation_is_frozen() {
    // reference output of SplitMix64 seeded with 0
    assert_eq!(splitmix64(0), 0xe220_a839_7b1d_cdaf);
    assert_eq!(realization_seed(1, 0, 0), splitmix64(splitmix64(splitmix64(1))));
    let mut seen = std::collections::HashSet::new();
    for w in 0..10 {
        for r in 0..100 {
            assert!(seen.insert(realization_seed(7, w, r)));
        }
    }
}

#[test]
fn fingerprint_ignores_scheduling() {
    let a = small_config();
    let b = RunConfig {
        workers: 8,
        verbose: true,
        out_dir: Some("/tmp/elsewhere".into()),
        ..a.clone()
    };
    assert_eq!(a.fingerprint(), b.fingerprint());
    let c = RunConfig { seed: 2, ..a.clone() };
    assert_ne!(a.fingerprint(), c.fingerprint());
}

fn records_bytes(out: &EnsembleOutput) -> Vec<u8> {
    let mut buf = Vec::new();
    write_records_csv(&mut buf, &out.records).unwrap();
    buf
}

#[test]
fn worker_count_does_not_change_records() {
    let mut cfg = small_config();
    cfg.method = Method::Auto;
    cfg.dense_cap = 32;
    cfg.n_states = 2;
    cfg.simps.bond_dim = 6;
    cfg.n_realizations = 4;
    let one = run_ensemble_in_memory(&cfg).unwrap();
    let eight = run_ensemble_in_memory(&RunConfig { workers: 8, ..cfg }).unwrap();
    assert_eq!(records_bytes(&one), records_bytes(&eight));
    assert!(one.records.iter().all(|r| r.method == "simps"));
}

#[test]
fn ed_records_and_curves() {
    let cfg = small_config();
    let out = run_ensemble_in_memory(&cfg).unwrap();
    assert_eq!(out.records.len(), 2 * 3 * 4);
    assert_eq!(out.rejected, 0);
    for r in &out.records {
        assert_eq!(r.method, "ed");
        assert!(r.variance < 1e-20);
        assert!(r.c_tot.is_some() && r.n_tot.is_some() && r.s_g.is_some());
        let p = r.npr.unwrap();
        assert!(p > 0.0 && p <= 1.0);
    }
    let ids: Vec<usize> = out.records[..4].iter().map(|r| r.state_id.parse().unwrap()).collect();
    assert_eq!(ids, vec![30, 31, 32, 33]);

    // curve means are plain means of the persisted records
    let mut buf = Vec::new();
    write_records_csv(&mut buf, &out.records).unwrap();
    assert!(String::from_utf8(buf.clone()).unwrap().starts_with(RECORD_HEADER));
    let back = read_records_csv(buf.as_slice()).unwrap();
    assert_eq!(back, out.records);
    let n_tot = out.curve(Indicator::NTot).unwrap();
    let avg = out.curve(Indicator::NAvgNn).unwrap();
    for (p, q) in n_tot.points.iter().zip(&avg.points) {
        let vals: Vec<f64> = back.iter().filter(|r| r.w == p.w).map(|r| r.n_tot.unwrap()).collect();
        assert_eq!(p.n, vals.len());
        assert_abs_diff_eq!(p.mean, vals.iter().sum::<f64>() / vals.len() as f64, epsilon = 1e-15);
        assert_abs_diff_eq!(q.mean, p.mean / 5.0, epsilon = 1e-15);
    }
    assert_eq!(out.curves.len(), Indicator::ALL.len());
}

#[test]
fn disorder_raises_negativity_at_l8() {
    let cfg = RunConfig {
        length: 8,
        w_list: vec![1.0, 6.0],
        n_realizations: 50,
        n_states: 10,
        method: Method::Ed,
        indicators: IndicatorToggles {
            geometric: false,
            ..IndicatorToggles::default()
        },
        ..RunConfig::default()
    };
    let out = run_ensemble_in_memory(&cfg).unwrap();
    let n = out.curve(Indicator::NTot).unwrap();
    assert!(n.points[1].mean > n.points[0].mean);
}

#[test]
fn spin_one_has_no_concurrence() {
    let cfg = RunConfig {
        model: LocalSpin::One,
        length: 4,
        n_realizations: 2,
        ..small_config()
    };
    let out = run_ensemble_in_memory(&cfg).unwrap();
    assert!(out.records.iter().all(|r| r.c_tot.is_none() && r.n_tot.is_some()));
    assert!(out.curve(Indicator::CTot).is_none());
}

#[test]
fn rejected_simps_records_are_kept_without_indicators() {
    let cfg = RunConfig {
        method: Method::Simps,
        n_realizations: 1,
        n_states: 2,
        w_list: vec![3.0],
        verbose: true,
        simps: SimpsConfig {
            bond_dim: 4,
            max_outer: 1,
            ..SimpsConfig::default()
        },
        ..small_config()
    };
    let out = run_ensemble_in_memory(&cfg).unwrap();
    assert_eq!(out.records.len(), 2);
    assert_eq!(out.rejected, 2);
    for r in &out.records {
        assert!(!r.accepted);
        assert!(r.c_tot.is_none() && r.n_tot.is_none() && r.s_g.is_none() && r.npr.is_none());
        assert!(r.state_id.starts_with('t'));
    }
    assert!(out.curves.is_empty());
    assert_eq!(out.logs.len(), 2);
    let v: serde_json::Value = serde_json::from_str(&out.logs[0]).unwrap();
    assert_eq!(v["report"]["accepted"], false);
}

#[test]
fn checkpoint_resume_reproduces_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        out_dir: Some(dir.path().to_path_buf()),
        indicators: IndicatorToggles {
            profiles: true,
            ..IndicatorToggles::default()
        },
        verbose: true,
        ..small_config()
    };
    run_ensemble(&cfg).unwrap();
    let records = fs::read(dir.path().join("records.csv")).unwrap();
    let curves = fs::read(dir.path().join("curves.csv")).unwrap();
    let profiles = fs::read(dir.path().join("profiles.csv")).unwrap();
    assert!(dir.path().join("convergence.jsonl").exists());
    assert!(dir.path().join("config.txt").exists());

    // drop the last two tasks from the manifest and rerun
    let manifest = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    let lines: Vec<&str> = manifest.lines().collect();
    assert_eq!(lines.len(), 6);
    fs::write(dir.path().join("manifest.txt"), lines[..4].join("\n") + "\n").unwrap();
    fs::remove_file(dir.path().join("records.csv")).unwrap();
    run_ensemble(&cfg).unwrap();
    assert_eq!(fs::read(dir.path().join("records.csv")).unwrap(), records);
    assert_eq!(fs::read(dir.path().join("curves.csv")).unwrap(), curves);
    assert_eq!(fs::read(dir.path().join("profiles.csv")).unwrap(), profiles);
    assert_eq!(
        fs::read_to_string(dir.path().join("manifest.txt"))
            .unwrap()
            .lines()
            .count(),
        6
    );

    let other = RunConfig { seed: 12, ..cfg };
    assert!(matches!(run_ensemble(&other), Err(Error::Config(_))));
}

#[test]
fn product_profiles_are_zero_and_unfitted() {
    let mut acc = ProfileAccumulator::new(8, Measure::Negativity);
    for seed in 0..4 {
        acc.add_state(StateRef::Mps(&random_mps(8, 2, 1, seed))).unwrap();
    }
    let profile = acc.finish();
    assert!(profile.means.iter().all(|m| m.abs() < 1e-12));
    let fit = fit_entanglement_length(&profile).ok();
    assert!(fit.is_none());
    let mut buf = Vec::new();
    write_profiles_csv(
        &mut buf,
        &[WProfile {
            length: 8,
            w: 6.0,
            profile,
            fit,
        }],
    )
    .unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with(PROFILE_HEADER));
    assert_eq!(text.lines().count(), 1 + 4);
}

#[test]
fn exponential_profile_footer() {
    let mut acc = ProfileAccumulator::new(12, Measure::Concurrence);
    for d in 1..=6 {
        for _ in 0..3 {
            acc.add_value(d, 0.4 * (-(d as f64) / 1.1).exp());
        }
    }
    let profile = acc.finish();
    let fit = fit_entanglement_length(&profile).ok();
    let mut buf = Vec::new();
    write_profiles_csv(
        &mut buf,
        &[WProfile {
            length: 12,
            w: 6.0,
            profile,
            fit,
        }],
    )
    .unwrap();
    let text = String::from_utf8(buf).unwrap();
    let slope_row = text.lines().find(|l| l.contains(",slope,")).unwrap();
    let slope: f64 = slope_row.split(',').nth(4).unwrap().parse().unwrap();
    assert_abs_diff_eq!(slope, -1.0 / 1.1, epsilon = 1e-10);
    let xi_row = text.lines().find(|l| l.contains(",xi,")).unwrap();
    let xi: f64 = xi_row.split(',').nth(4).unwrap().parse().unwrap();
    assert_abs_diff_eq!(xi, 1.1, epsilon = 1e-9);
}

#[test]
fn fixture_suite_passes() {
    for c in validate_fixtures() {
        assert!(c.passed, "{}: {}", c.name, c.detail);
    }
}

/// Largest CDF gap evaluated at every pooled sample point.
fn ks_oracle(a: &[f64], b: &[f64]) -> f64 {
    let cdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
    a.iter()
        .chain(b)
        .map(|&x| (cdf(a, x) - cdf(b, x)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn ks_fixtures() {
    assert_eq!(ks_statistic(&[1.0, 2.0], &[2.0, 1.0]).unwrap(), 0.0);
    assert_eq!(ks_statistic(&[1.0, 2.0], &[3.0, 4.0, 5.0]).unwrap(), 1.0);
    assert!(ks_statistic(&[], &[1.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn ks_matches_oracle(
        a in proptest::collection::vec(0u8..20, 1..40),
        b in proptest::collection::vec(0u8..20, 1..40),
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let got = ks_statistic(&a, &b).unwrap();
        prop_assert!((got - ks_oracle(&a, &b)).abs() < 1e-12);
    }
}
