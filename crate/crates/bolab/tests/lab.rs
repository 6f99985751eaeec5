use bolab::flows::FlowConfig;
use bolab::lab::*;

fn zero_poly() -> TrigPolynomial {
    TrigPolynomial {
        cos: vec![],
        sin: vec![],
    }
}

#[test]
fn zero_data_converges_trivially() {
    let p = ConvergenceParams {
        u0: zero_poly(),
        n_list: vec![8, 16],
        reference: FlowConfig::new(32).with_grid_bandwidth(64),
        ..ConvergenceParams::default()
    };
    let r = check_flow_convergence(&p).unwrap();
    let t = r.table("errors").unwrap();
    assert!(t.column("l2_error").unwrap().iter().all(|e| *e == 0.0));
    assert!(t.column("hs_error").unwrap().iter().all(|e| *e == 0.0));
}

#[test]
fn linear_flow_leaves_weighted_means_in_place() {
    let p = InvarianceParams {
        n: 8,
        count: 400,
        nonlinearity: 0.0,
        times: vec![0.5],
        // only the quadratic observables are linear invariants
        observables: Some(vec![
            Observable::Sobolev { sigma: 1.0 },
            Observable::Mode { n: 2 },
            Observable::Energy { j: 0 },
        ]),
        ..InvarianceParams::default()
    };
    let r = check_invariance(&p).unwrap();
    let z = r.table("observables").unwrap().column("z").unwrap();
    assert!(z.iter().all(|z| z.abs() < 3.0), "{z:?}");
    let recorded = serde_json::from_value::<InvarianceParams>(r.params.clone()).unwrap();
    assert!(recorded.observables.is_some());
}

#[test]
fn gn_vanishes_when_samples_fit_below_half_n() {
    let p = GnDecayParams {
        n_list: vec![16, 32],
        count: 50,
        mode_cutoff: 8,
        ..GnDecayParams::default()
    };
    let r = check_gn_decay(&p).unwrap();
    let t = r.table("norms").unwrap();
    for g in t.column("G").unwrap() {
        assert!(g < 1e-12, "{g}");
    }
    assert!(!r.warnings.is_empty());
}

#[test]
fn gn_rejects_odd_or_small_k() {
    for k in [4, 7] {
        let p = GnDecayParams {
            k,
            ..GnDecayParams::default()
        };
        assert!(check_gn_decay(&p).is_err());
    }
}

#[test]
fn triangle_agrees_on_small_run() {
    let p = TriangleParams {
        count: 4,
        ..TriangleParams::default()
    };
    let r = check_oracle_triangle(&p).unwrap();
    assert!(r.passed(), "{:?}", r.verdicts);
    assert_eq!(r.table("triangle").unwrap().rows.len(), 4 * 7);
}

#[test]
fn lemma_sum_verdicts() {
    let r = check_lemma_prod(&LemmaProdParams::default()).unwrap();
    assert!(r.passed(), "{:?}", r.verdicts);
    assert_eq!(lemma_sum(3), lemma_sum_brute_force(3));
}

#[test]
fn single_mode_recurrence_is_periodic() {
    let p = RecurrenceParams {
        u0: TrigPolynomial {
            cos: vec![0.7],
            sin: vec![],
        },
        horizon: 2.0 * std::f64::consts::PI,
        stride: std::f64::consts::PI / 4.0,
        cfg: FlowConfig::new(1),
        ..RecurrenceParams::default()
    };
    let r = recurrence_scan(&p).unwrap();
    let d = r.table("distance").unwrap().column("d").unwrap();
    assert_eq!(d[0], 0.0);
    assert!(d.last().unwrap().abs() < 1e-10, "{d:?}");
    assert!(d.iter().any(|x| *x > 0.1));
}

#[test]
fn liouville_divergence_vanishes() {
    let p = LiouvilleParams {
        n: 8,
        trials: 3,
        ..LiouvilleParams::default()
    };
    let r = check_liouville(&p).unwrap();
    assert!(r.passed(), "{:?}", r.verdicts);
}

#[test]
fn report_round_trips_and_emits_files() {
    let r = check_lemma_prod(&LemmaProdParams {
        n_list: vec![4, 8, 16],
        oracle_max: 8,
        band_from: 4,
        ..LemmaProdParams::default()
    })
    .unwrap();
    let back = Report::from_json(&r.to_json().unwrap()).unwrap();
    assert_eq!(back.verdicts.len(), r.verdicts.len());
    assert_eq!(back.tables, r.tables);

    let dir = tempfile::tempdir().unwrap();
    let hash = config_hash(&r.params);
    assert_eq!(hash.len(), 64);
    assert_eq!(hash, config_hash(&r.params));
    let files = emit_report(&r, dir.path(), &hash).unwrap();
    let names: Vec<String> = files
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert!(names.contains(&"report.json".to_string()));
    assert!(names.contains(&"lemma_sum.csv".to_string()));
    let csv = std::fs::read_to_string(dir.path().join("lemma_sum.csv")).unwrap();
    assert!(csv.starts_with(&format!("# config {hash}")));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["config_hash"], hash);
}
