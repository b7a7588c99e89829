use approx::assert_relative_eq;
use oadlab::par;
use oadlab::sim::{
    interpolate_min_n, power_curve, render_results, result_rows, rows_from_json, rows_to_json, run_replicate, run_sim,
    stream_id, Arm, OutputFormat, SimConfig,
};
use oadlab::Error;

fn config(extra: &str) -> SimConfig {
    let base = r#""model":"treatment:3","error_model":"str:1","criterion":"D","n_grid":[12,30],"replicates":60,"master_seed":9"#;
    let text = if extra.is_empty() { format!("{{{base}}}") } else { format!("{{{base},{extra}}}") };
    SimConfig::from_json(&text).unwrap()
}

#[test]
fn same_seed_same_bytes_for_any_worker_count() {
    let cfg = config("");
    let one = par::with_workers(1, || render_results(&run_sim(&cfg).unwrap(), OutputFormat::Csv).unwrap());
    let four = par::with_workers(4, || render_results(&run_sim(&cfg).unwrap(), OutputFormat::Csv).unwrap());
    let again = render_results(&run_sim(&cfg).unwrap(), OutputFormat::Csv).unwrap();
    assert_eq!(one, four);
    assert_eq!(one, again);

    let other = SimConfig { master_seed: 10, ..cfg };
    assert_ne!(one, render_results(&run_sim(&other).unwrap(), OutputFormat::Csv).unwrap());
}

#[test]
fn csv_layout() {
    let res = run_sim(&config("")).unwrap();
    let csv = render_results(&res, OutputFormat::Csv).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "arm,n,metric,value,stderr,replicates,seed");
    // 2 arms × 2 sizes × 5 metrics, plus 4 ratios per size
    assert_eq!(lines.len() - 1, 2 * 2 * 5 + 2 * 4);
    for l in &lines[1..] {
        assert_eq!(l.split(',').count(), 7);
        assert!(l.ends_with(",9"));
    }
}

#[test]
fn json_round_trip() {
    let res = run_sim(&config("")).unwrap();
    let rows = result_rows(&res);
    let back = rows_from_json(&rows_to_json(&rows).unwrap()).unwrap();
    assert_eq!(rows, back);
}

#[test]
fn summaries_match_a_manual_replicate_loop() {
    let cfg = config("");
    let prep = cfg.prepare().unwrap();
    let res = run_sim(&cfg).unwrap();
    for arm in [Arm::Road, Arm::Fod] {
        let psi: Vec<f64> = (0..cfg.replicates).map(|r| run_replicate(&cfg, &prep, arm, 30, r).unwrap().psi).collect();
        let n = psi.len() as f64;
        let mean = psi.iter().sum::<f64>() / n;
        let sd = (psi.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let s = res.arm(arm, 30).unwrap();
        assert_relative_eq!(s.psi_j.value, mean, max_relative = 1e-12);
        assert_relative_eq!(s.psi_j.stderr.unwrap(), sd / n.sqrt(), max_relative = 1e-9);
        assert_eq!(s.failures, 0);
    }
    let e = res.efficiency(30).unwrap();
    let ratio = res.arm(Arm::Road, 30).unwrap().psi_j.value / res.arm(Arm::Fod, 30).unwrap().psi_j.value;
    assert_relative_eq!(e.eff_ci.value, ratio, max_relative = 1e-12);
}

#[test]
fn single_arm_runs_reproduce_the_paired_run() {
    let both = run_sim(&config("")).unwrap();
    let fod_only = run_sim(&config(r#""arms":["FOD"]"#)).unwrap();
    assert!(fod_only.efficiencies.is_empty());
    for n in [12, 30] {
        assert_eq!(both.arm(Arm::Fod, n).unwrap().psi_j, fod_only.arm(Arm::Fod, n).unwrap().psi_j);
    }
}

#[test]
fn streams_are_distinct() {
    let mut ids = std::collections::HashSet::new();
    for arm in [Arm::Road, Arm::Fod] {
        for n in [12, 30, 1000] {
            for r in 0..500 {
                assert!(ids.insert(stream_id(arm, n, r)));
            }
        }
    }
}

#[test]
fn normal_errors_give_unit_efficiency() {
    let cfg = SimConfig::from_json(
        r#"{"model":"quadratic:1","error_model":"normal","criterion":"D","n_grid":[60],"replicates":200}"#,
    )
    .unwrap();
    let res = run_sim(&cfg).unwrap();
    let e = res.efficiency(60).unwrap();
    assert!((e.eff_ci.value - 1.0).abs() < 0.02, "{:?}", e.eff_ci);
}

#[test]
fn interpolation() {
    assert_eq!(interpolate_min_n(&[(10, 0.5), (20, 0.9)], 0.8), Some(17.5));
    assert_eq!(interpolate_min_n(&[(20, 0.9), (10, 0.85)], 0.8), Some(10.0));
    assert_eq!(interpolate_min_n(&[(10, 0.1), (20, 0.2)], 0.8), None);
}

#[test]
fn null_rejection_rate_is_nominal_for_normal_errors() {
    // β satisfies cᵀβ = 0, and with Normal errors the statistic is exactly χ²₁
    let cfg = SimConfig::from_json(
        r#"{"model":"treatment:2","error_model":"normal","criterion":"D","beta":[1.0,1.0],
            "n_grid":[40],"replicates":4000,"master_seed":1,
            "power_block":{"c":[1.0,-1.0],"c0":0.0,"alpha":0.05}}"#,
    )
    .unwrap();
    let curve = power_curve(&cfg).unwrap();
    for p in &curve.points {
        let se = (0.05f64 * 0.95 / 4000.0).sqrt();
        assert!((p.power.value - 0.05).abs() < 4.0 * se, "{:?}: {}", p.arm, p.power.value);
    }
}

#[test]
fn config_validation() {
    let low = SimConfig { n_grid: vec![8], ..config("") };
    assert!(matches!(low.prepare(), Err(Error::Config(_))));
    let bad_beta = config(r#""beta":[1.0,2.0]"#);
    assert!(matches!(bad_beta.prepare(), Err(Error::Config(_))));
    assert!(SimConfig::from_json(r#"{"model":"treatment:3"}"#).is_err());
    let no_power = config("");
    assert!(matches!(power_curve(&no_power), Err(Error::Config(_))));
}
