mod common;

use bolab::claws::*;
use bolab::spectral::OperatorWord;
use bolab::FourierField;
use common::{brute_force_w, random_field, rel};

#[test]
fn recursion_matches_series_composition() {
    let brute = brute_force_w(6);
    for (n, b) in brute.iter().enumerate().skip(1) {
        assert_eq!(*matsuno_w(n).unwrap(), *b, "w_{n}");
    }
}

#[test]
fn energy_zero_is_l2() {
    for seed in 0..5 {
        let u = random_field(seed, 12, 1.0, 1.0);
        let v = eval_expr(&energy(0).unwrap(), &u).unwrap();
        assert!(rel(v.re, u.sobolev_norm_sq(0.0, true)) < 1e-13);
        assert!(v.im.abs() < 1e-14);
    }
}

#[test]
fn quadratic_parts_are_sobolev_norms() {
    for k in 0..=K_MAX {
        let q = energy_truncated(k, 2).unwrap().homogeneous_part(2);
        for seed in 0..3 {
            let u = random_field(100 + seed, 10, 1.0, 0.5);
            let v = eval_expr(&q, &u).unwrap().re;
            let s = u.sobolev_norm_sq(k as f64 / 2.0, true);
            assert!(rel(v, s) < 1e-10, "k={k}: {v} vs {s}");
        }
    }
}

/// `-H∂²w - w∂w`
fn bo_rhs(w: &FourierField) -> FourierField {
    let lin = w.apply_word_unchecked(&OperatorWord::hdx(true, 2)).scale(-1.0);
    let nl = w.multiply(&w.derivative(1)).real_part().scale(-1.0);
    &lin + &nl
}

#[test]
fn conservation_identity() {
    for k in 0..=6 {
        let e = energy(k).unwrap();
        for seed in 0..3 {
            let w = random_field(200 + seed, 8, 0.5, 1.0);
            let g = grad_integral(&e, &w).unwrap();
            let f = bo_rhs(&w);
            let d = pairing(&g, &f);
            let scale = g.sobolev_norm(0.0, true) * f.sobolev_norm(0.0, true);
            assert!(d.abs() < 1e-8 * scale.max(1.0), "k={k} seed={seed}: {d} (scale {scale})");
        }
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let e = energy(4).unwrap();
    let u = random_field(7, 8, 0.4, 1.0);
    let g = grad_integral(&e, &u).unwrap();
    let eps = 1e-5;
    for seed in 0..32 {
        let h = random_field(1000 + seed, 10, 1.0, 1.0);
        let p = eval_expr(&e, &(&u + &h.scale(eps))).unwrap().re;
        let m = eval_expr(&e, &(&u + &h.scale(-eps))).unwrap().re;
        let fd = (p - m) / (2.0 * eps);
        let an = pairing(&g, &h);
        assert!(rel(fd, an) < 1e-6, "direction {seed}: {fd} vs {an}");
    }
}

#[test]
fn star_vanishes_on_narrow_fields() {
    let e = energy_truncated(6, 3).unwrap().homogeneous_part(3);
    let s = star_n(&e, 16);
    let v = random_field(3, 8, 1.0, 1.0);
    assert_eq!(eval_expr(&s, &v).unwrap().norm(), 0.0);
    let wide = random_field(4, 12, 1.0, 1.0);
    assert!(eval_expr(&s, &wide).unwrap().norm() > 0.0);
}

#[test]
fn star_is_directional_derivative() {
    let n = 6;
    let e = energy(4).unwrap();
    let s = star_n(&e, n);
    let u = random_field(9, n, 0.5, 1.0);
    let h = u.multiply(&u.derivative(1)).real_part().project_high(n);
    let g = grad_integral(&e, &u).unwrap();
    let a = eval_expr(&s, &u).unwrap();
    let b = pairing(&g, &h);
    assert!(a.im.abs() < 1e-12);
    assert!(rel(a.re, b) < 1e-10, "{} vs {b}", a.re);
}

#[test]
fn canonical_cubic_preserves_integrals() {
    let e = energy_truncated(6, 3).unwrap().homogeneous_part(3);
    let c = canonicalize_cubic(&e);
    for seed in 0..100 {
        let u = random_field(5000 + seed, 16, 1.0, 1.0);
        let a = eval_expr(&e, &u).unwrap().re;
        let b = eval_expr(&c, &u).unwrap().re;
        assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()), "seed {seed}: {a} vs {b}");
    }
}

fn is_coupled(node: &ExprNode, m: u32) -> bool {
    // u · (H ∂^m u) · ∂^{m+1} u
    let expected = ExprNode::product(vec![
        ExprNode::Leaf,
        ExprNode::leaf_word(OperatorWord::hdx(true, m)),
        ExprNode::leaf_word(OperatorWord::dx(m + 1)),
    ]);
    *node == expected
}

#[test]
fn energy_structure() {
    for k in 1..=K_MAX {
        let e = energy(k).unwrap();
        let canon = canonicalize(&e.filter(|n| n.degree() >= 3));
        let even = k % 2 == 0;
        let bound = if even { (k / 2) as u32 - 1 } else { ((k - 1) / 2) as u32 };
        let mut coupled = 0;
        for (node, c) in canon.terms() {
            let (top, total) = gradings(node).unwrap();
            assert_eq!(total as usize, k + 2 - node.degree(), "k={k}: {node}");
            assert!(c.im == num_rational::BigRational::from_integer(0.into()), "k={k}: {node}");
            if top > bound {
                assert!(even && node.degree() == 3 && is_coupled(node, bound), "k={k}: {node} has |p| = {top}");
                coupled += 1;
            }
        }
        if even {
            assert_eq!(coupled, 1, "k={k}");
        }
        let t = erase_hilbert(&canon);
        for (node, _) in t.terms() {
            assert!(node.words().iter().all(|w| !w.has_hilbert_content()));
        }
    }
}

#[test]
fn json_round_trip() {
    let e = energy(3).unwrap();
    let back = Expr::from_json(&e.to_json()).unwrap();
    assert_eq!(*e, back);
}
