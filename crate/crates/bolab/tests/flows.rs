mod common;

use bolab::claws;
use bolab::flows::*;
use bolab::FourierField;
use common::{random_field, rel};

fn smooth() -> FourierField {
    &FourierField::cos(1) + &FourierField::sin(2).scale(0.5)
}

#[test]
fn low_mode_l2_is_constant() {
    let u = random_field(1, 32, 0.3, 2.0);
    let cfg = FlowConfig::new(32);
    let times: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    let l0 = u.sobolev_norm_sq(0.0, true);
    for v in evolve_truncated_at(&u, &cfg, &times).unwrap() {
        let l = v.project_low(32).sobolev_norm_sq(0.0, true);
        assert!(rel(l, l0) < 1e-10, "{l} vs {l0}");
    }
}

#[test]
fn truncated_flow_is_reversible() {
    let u = random_field(2, 16, 0.4, 2.0);
    let cfg = FlowConfig::new(16);
    let fwd = evolve_truncated(&u, &cfg, 0.5).unwrap();
    let back = evolve_truncated(&fwd, &cfg, -0.5).unwrap();
    assert!(back.l2_distance(&u) < 1e-10);
    assert_eq!(evolve_truncated(&u, &cfg, 0.0).unwrap(), u);
}

#[test]
fn high_modes_rotate_exactly() {
    let u = random_field(3, 40, 0.5, 1.0);
    let cfg = FlowConfig::new(16);
    let v = evolve_truncated(&u, &cfg, 0.3).unwrap();
    let high = v.project_high(16);
    assert_eq!(high, linear_propagate(&u.project_high(16), 0.3).with_bandwidth(high.bandwidth()));
    for s in [0.0, 1.0, 2.5] {
        assert!(rel(high.sobolev_norm(s, true), u.project_high(16).sobolev_norm(s, true)) < 1e-14);
    }
}

#[test]
fn schemes_agree() {
    let u = smooth();
    let a = evolve_truncated(&u, &FlowConfig::new(16), 0.2).unwrap();
    let b = evolve_truncated(&u, &FlowConfig::new(16).with_scheme(Scheme::EtdRk4), 0.2).unwrap();
    assert!(a.l2_distance(&b) < 1e-10, "{}", a.l2_distance(&b));
}

/// `-∫_0^t S(t-s)[(S(s)u0) ∂_x (S(s)u0)] ds` by composite Simpson.
fn duhamel(u0: &FourierField, t: f64) -> FourierField {
    let m = 400;
    let h = t / m as f64;
    let mut acc = FourierField::zeros(2 * u0.bandwidth(), true);
    for i in 0..=m {
        let s = i as f64 * h;
        let w = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        let lin = linear_propagate(u0, s);
        let f = lin.multiply(&lin.derivative(1)).real_part();
        acc = &acc + &linear_propagate(&f, t - s).scale(-w * h / 3.0);
    }
    acc
}

#[test]
fn small_data_follow_duhamel() {
    let eps = 1e-3;
    let u0 = smooth().scale(eps);
    let cfg = FlowConfig::new(16);
    for t in [0.25, 0.5, 1.0] {
        let full = evolve_full(&u0, &cfg, t).unwrap().field;
        let lin = linear_propagate(&u0, t).with_bandwidth(full.bandwidth());
        let first = (&full - &lin).sobolev_norm(0.0, true);
        assert!(first < 5.0 * eps * eps * t, "t={t}: {first}");
        let d = duhamel(&u0, t).with_bandwidth(full.bandwidth());
        let second = (&(&full - &lin) - &d).sobolev_norm(0.0, true);
        assert!(second < 5.0 * eps * eps * eps, "t={t}: {second}");
    }
}

#[test]
fn full_flow_conserves_energies() {
    let u0 = random_field(4, 8, 0.1, 2.0);
    assert!(u0.sobolev_norm(2.0, false) <= 1.0);
    let cfg = FlowConfig::new(32).with_grid_bandwidth(64);
    let sol = evolve_full(&u0, &cfg, 1.0).unwrap();
    for (k, d) in sol.energy_drift.iter().enumerate() {
        assert!(*d < 1e-7, "k={k}: {d}");
    }
    assert!(!sol.saturated);
}

#[test]
fn derivative_vanishes_on_narrow_data() {
    let u = random_field(5, 8, 1.0, 1.0);
    for j in 0..=6 {
        assert_eq!(flow_energy_derivative(&u, 16, j).unwrap(), 0.0);
    }
    assert_eq!(flow_energy_derivative(&FourierField::cos(1), 2, 6).unwrap(), 0.0);
    assert!(flow_energy_derivative(&u, 16, claws::K_MAX + 1).is_err());
}

#[test]
fn derivative_matches_time_differences() {
    let n = 16;
    let j = 6;
    let cfg = FlowConfig::new(n).with_dt(1e-6);
    let h = 1e-5;
    for seed in 0..4 {
        let u = random_field(10 + seed, 32, 1.0, 1.5);
        let e = |t: f64| claws::energies(&evolve_truncated(&u, &cfg, t).unwrap().project_low(n), j).unwrap()[j];
        let fd = (e(h) - e(-h)) / (2.0 * h);
        let an = flow_energy_derivative(&u, n, j).unwrap();
        assert!(rel(fd, an) < 1e-5, "seed {seed}: {fd} vs {an}");
    }
}

#[test]
fn derivative_routes_agree() {
    let u = random_field(20, 32, 1.0, 1.5);
    for j in 2..=6 {
        let a = flow_energy_derivative_with(&u, 16, j, DerivativeRoute::Jet).unwrap();
        let b = flow_energy_derivative_with(&u, 16, j, DerivativeRoute::Gradient).unwrap();
        let c = flow_energy_derivative_with(&u, 16, j, DerivativeRoute::StarN).unwrap();
        assert!(rel(a, b) < 1e-6 && rel(a, c) < 1e-6, "j={j}: {a} {b} {c}");
    }
    let all = flow_energy_derivatives(&u, 16, 6).unwrap();
    assert_eq!(all[6], flow_energy_derivative(&u, 16, 6).unwrap());
}

#[test]
fn truncated_field_is_divergence_free() {
    assert_eq!(coordinate_divergence(&FourierField::zeros(16, true), 16, 1e-4, FieldPart::Linear), 0.0);
    for seed in 0..10 {
        let v = random_field(30 + seed, 16, 1.0, 1.0);
        for part in [FieldPart::Full, FieldPart::Nonlinear] {
            let d = coordinate_divergence(&v, 16, 1e-4, part);
            assert!(d.abs() < 1e-8, "{part:?}: {d}");
        }
    }
}

#[test]
fn single_mode_truncation_is_periodic() {
    let u = &FourierField::cos(1).scale(0.7) + &FourierField::sin(1).scale(-0.2);
    let cfg = FlowConfig::new(1).with_horizon(10.0);
    let v = evolve_truncated(&u, &cfg, 2.0 * std::f64::consts::PI).unwrap();
    assert!(v.l2_distance(&u) < 1e-10);
}

#[test]
fn truncation_gap_shrinks() {
    let cfg = FlowConfig::new(32).with_grid_bandwidth(64);
    let mut last = f64::INFINITY;
    for n in [4, 8, 16] {
        let g = truncation_gap(&smooth(), n, &cfg, 0.1).unwrap();
        let e = g.gap.sobolev_norm(0.0, true);
        assert!(e < last);
        assert!(g.richardson < 1e-3 * e);
        let direct = evolve_full(&smooth(), &cfg, 0.1).unwrap().field;
        let v = evolve_truncated(&smooth(), &FlowConfig::new(n).with_dt(cfg.dt()), 0.1).unwrap();
        let b = direct.bandwidth();
        let subtracted = direct.l2_distance(&v.with_bandwidth(b));
        assert!((subtracted - e).abs() < 1e-10 + 1e-6 * e, "N={n}: {subtracted} vs {e}");
        last = e;
    }
}
