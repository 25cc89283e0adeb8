mod common;

use std::f64::consts::PI;

use cabling::action::*;
use cabling::central::amended_potential;
use cabling::loops::{gamma_act, gamma_project, LoopState};
use cabling::model::{phi, Sign, SymmetryCase};
use cabling::solver::build_ansatz;
use common::{directional_error, perturbed, rotate_blocks, Fixture};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn ansatz(f: &Fixture) -> LoopState {
    build_ansatz(&f.config, &f.params).unwrap()
}

fn fixtures(l: usize) -> Vec<Fixture> {
    vec![
        common::triangle(1.0, 0.1, Sign::Prograde, l),
        common::maxwell(5, 1.0, 2.0, 0.1, l),
        common::spatial_triangle(2.0, 0.1, l),
    ]
}

#[test]
fn gradient_matches_finite_differences_in_every_case() {
    let mut rng = common::rng(17);
    for f in fixtures(6) {
        let x0 = ansatz(&f);
        let func = Functional::new(f.params.clone());
        for _ in 0..5 {
            let x = perturbed(&x0, 0.05, &mut rng);
            let y = common::random_loop(x.l(), x.d(), x.n_blocks(), &mut rng);
            for part in [ActionPart::A0, ActionPart::H, ActionPart::Full] {
                let err = directional_error(&func, part, &x, &y);
                assert!(err < 1e-6, "{} {part:?}: {err:e}", f.params.setup.case.label());
            }
        }
    }
}

#[test]
fn ansatz_u_part_is_the_amended_potential() {
    for f in [common::triangle(1.0, 0.05, Sign::Prograde, 8), common::maxwell(7, 1.0, 2.0, 0.05, 8)] {
        let x = ansatz(&f);
        let p = &f.params;
        let pair = 2.0 * PI * p.pair_weight() * (0.5 + phi(1.0, p.ms.alpha).unwrap());
        let a0 = action_a0(&x, p).unwrap();
        let v = amended_potential(&f.config).unwrap();
        assert!(common::rel_err(a0 - pair, 2.0 * PI * v) < 1e-12);
    }
}

#[test]
fn ansatz_is_critical_for_the_unperturbed_functional() {
    for f in fixtures(8) {
        let x = ansatz(&f);
        let g = gradient_part(&x, &f.params, ActionPart::A0).unwrap();
        let scale = 1.0 + f.params.pair_weight();
        assert!(g.h1_norm() < 1e-12 * scale, "{:e}", g.h1_norm());
    }
}

#[test]
fn pair_integral_is_linear_in_the_reduced_mass() {
    let mut rng = common::rng(4);
    let f = common::triangle(2.0, 0.1, Sign::Prograde, 6);
    let x = perturbed(&ansatz(&f), 0.05, &mut rng);
    let with_mass = |m0: f64| {
        let mut p = f.params.clone();
        p.ms.big_m[0] = m0;
        action_a0(&x, &p).unwrap()
    };
    let m0 = f.params.ms.big_m[0];
    let base = with_mass(0.0);
    let one = with_mass(m0) - base;
    let two = with_mass(2.0 * m0) - base;
    assert!(common::rel_err(two, 2.0 * one) < 1e-13);
}

#[test]
fn coupling_vanishes_at_zero_radius() {
    let mut rng = common::rng(8);
    let f = common::triangle(1.0, 0.1, Sign::Prograde, 6);
    let x = perturbed(&ansatz(&f), 0.05, &mut rng);
    let mut p = f.params.clone();
    p.setup.epsilon = 0.0;
    assert!(action_h(&x, &p).unwrap().abs() < 1e-15);
}

#[test]
fn product_and_diagonal_invariance() {
    let mut rng = common::rng(21);
    let f = common::triangle(2.0, 0.1, Sign::Retrograde, 6);
    let x = perturbed(&ansatz(&f), 0.2, &mut rng);
    let p = &f.params;
    let (a0, h) = (action_a0(&x, p).unwrap(), action_h(&x, p).unwrap());
    let product = rotate_blocks(&x, 0.9, -2.1);
    assert!((action_a0(&product, p).unwrap() - a0).abs() < 1e-12 * (1.0 + a0.abs()));
    let diagonal = rotate_blocks(&x, 1.3, 1.3);
    assert!((action_h(&diagonal, p).unwrap() - h).abs() < 1e-12 * (1.0 + h.abs()));
    assert!((action_h(&product, p).unwrap() - h).abs() > 1e-6);

    let g = gradient(&x, p).unwrap();
    let g_rot = gradient(&diagonal, p).unwrap();
    assert!(g_rot.minus(&rotate_blocks(&g, 1.3, 1.3)).max_abs() < 1e-11 * (1.0 + g.max_abs()));
    let g0 = gradient_part(&x, p, ActionPart::A0).unwrap();
    let g0_rot = gradient_part(&product, p, ActionPart::A0).unwrap();
    assert!(g0_rot.minus(&rotate_blocks(&g0, 0.9, -2.1)).max_abs() < 1e-11 * (1.0 + g0.max_abs()));
}

#[test]
fn discrete_group_invariance_and_compatibility() {
    let mut rng = common::rng(33);
    for f in [common::maxwell(7, 1.0, 2.0, 0.05, 8), common::spatial_triangle(2.0, 0.05, 8)] {
        let p = &f.params;
        let group = p.symmetry();
        let x = perturbed(&ansatz(&f), 0.05, &mut rng);
        let gx = gamma_act(&x, &group).unwrap();
        let a = action(&x, p).unwrap();
        for part_value in [action, action_h, action_a0] {
            let (u, v) = (part_value(&x, p).unwrap(), part_value(&gx, p).unwrap());
            assert!((u - v).abs() < 1e-12 * (1.0 + u.abs()), "{u} vs {v}");
        }
        assert!(a.is_finite());
        let g = gradient(&x, p).unwrap();
        let g_gx = gradient(&gx, p).unwrap();
        assert!(g_gx.minus(&gamma_act(&g, &group).unwrap()).max_abs() < 1e-11 * (1.0 + g.max_abs()));

        let fixed = gamma_project(&x, &group).unwrap();
        let gf = gradient(&fixed, p).unwrap();
        assert!(gamma_project(&gf, &group).unwrap().minus(&gf).max_abs() < 1e-11 * (1.0 + gf.max_abs()));
    }
}

#[test]
fn scaled_gradient_is_bounded_where_the_gradient_blows_up() {
    let mut rng = common::rng(12);
    let shape = common::triangle(2.0, 0.1, Sign::Prograde, 6);
    let dx = common::random_loop(6, 1, shape.params.n_blocks(), &mut rng);
    let mut raw = Vec::new();
    let mut scaled = Vec::new();
    for eps in [1e-2, 1e-3, 1e-4] {
        let f = common::triangle(2.0, eps, Sign::Prograde, 6);
        let mut x = ansatz(&f);
        x.axpy(0.01, &dx);
        raw.push(gradient(&x, &f.params).unwrap().h1_norm());
        scaled.push(scaled_gradient(&x, &f.params).unwrap().h1_norm());
    }
    assert!(raw[2] > 100.0 * raw[0], "{raw:?}");
    let (lo, hi) = scaled.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &s| (a.min(s), b.max(s)));
    assert!(hi < 2.0 * lo, "{scaled:?}");
}

#[test]
fn scaling_is_ordered() {
    for eps in [0.5f64, 0.1, 1e-3] {
        for alpha in [1.0, 2.0, 3.0] {
            let f = common::triangle(alpha, eps.min(0.19), Sign::Prograde, 4);
            for l in 1..4 {
                let (u0, u) = f.params.scaling(l);
                assert!(u <= u0 && u0 <= 1.0);
            }
            assert_eq!(f.params.scaling(0).1, 1.0);
        }
    }
}

#[test]
fn coupling_gradient_is_small_in_epsilon() {
    let mut rng = common::rng(9);
    let shape = common::triangle(2.0, 0.1, Sign::Prograde, 6);
    let x = perturbed(&ansatz(&shape), 0.05, &mut rng);
    let mut norms = Vec::new();
    for eps in [1e-2, 1e-3, 1e-4] {
        let f = common::triangle(2.0, eps, Sign::Prograde, 6);
        norms.push((eps, gradient_part(&x, &f.params, ActionPart::H).unwrap().h1_norm()));
    }
    // Bounded by C ε with C fixed at the largest radius.
    let c = norms[0].1 / norms[0].0;
    assert!(norms.iter().all(|(e, n)| *n <= c * e * (1.0 + 1e-9)));
    // The leading term is quadratic because m₀μ₀ + m₁μ₁ = 0.
    let r: Vec<f64> = norms.iter().map(|(e, n)| n / (e * e)).collect();
    assert!(r[2] < 1.1 * r[1] && r[1] < 1.1 * r[2], "{r:?}");
}

#[test]
fn eigenvalue_formula_examples() {
    let (m, p) = lambda1(1.0, 1.0, 0.25);
    assert!((m - 0.25 * (1.0 - 5f64.sqrt() / 2.0)).abs() < 1e-15);
    assert!((p - 0.25 * (1.0 + 5f64.sqrt() / 2.0)).abs() < 1e-15);
    for m0 in [0.01, 0.25, 3.0] {
        assert!(lambda1(1.0, 2.0, m0).0.abs() < 1e-12);
    }
    assert_eq!(lambda2(2.0, 0.7).0, 0.0);
    for alpha in [1.0, 2.0, 3.0] {
        let (lo, hi) = lambda1(1000.0, alpha, 0.3);
        assert!((lo - 0.3).abs() < 3e-3 && (hi - 0.3).abs() < 3e-3);
    }
}

#[test]
fn assembled_blocks_match_the_formulas() {
    for f in [common::triangle(1.0, 0.1, Sign::Prograde, 4), common::spatial_triangle(2.0, 0.1, 4)] {
        for l in 1..=12 {
            let b = hessian_block(l, &f.params).unwrap();
            let ev = hermitian_eigenvalues(&b.t_u0);
            let mut expected = vec![b.lambda1.0, b.lambda1.1];
            for _ in 0..b.multiplicity2 {
                expected.extend([b.lambda2.0, b.lambda2.1]);
            }
            expected.sort_by(|a, c| a.partial_cmp(c).unwrap());
            for (a, c) in ev.iter().zip(&expected) {
                assert!((a - c).abs() < 1e-12, "l = {l}: {ev:?} vs {expected:?}");
            }
            let lf = l as f64;
            let ev_u = hermitian_eigenvalues(&b.t_u);
            let w = lf * lf / (lf * lf + 1.0);
            for (e, m) in ev_u.iter().zip(sorted_masses(&f.params)) {
                assert!((e - w * m).abs() < 1e-14);
            }
        }
    }
    assert!(hessian_block(0, &common::triangle(1.0, 0.1, Sign::Prograde, 4).params).is_err());
}

fn sorted_masses(p: &ActionParams) -> Vec<f64> {
    let dd = 2 * p.d();
    let mut m: Vec<f64> = p.ms.big_m[1..].iter().flat_map(|&x| std::iter::repeat(x).take(dd)).collect();
    m.sort_by(|a, b| a.partial_cmp(b).unwrap());
    m
}

/// Mode-`ℓ` block of the scaled second variation of `A₀` at the ansatz,
/// assembled column by column from central differences of the gradient.
fn numerical_block(f: &Fixture, l: usize) -> DMatrix<Complex64> {
    let x = ansatz(f);
    let func = Functional::new(f.params.clone());
    let dim = x.dim();
    let h = 1e-5;
    let mut m = DMatrix::zeros(dim, dim);
    for c in 0..dim {
        let mut v = LoopState::zeros(x.l(), x.d(), x.n_blocks());
        v.mode_mut(l)[c] = Complex64::new(1.0, 0.0);
        let mut xp = x.clone();
        xp.axpy(h, &v);
        let mut xm = x.clone();
        xm.axpy(-h, &v);
        let mut g = func.gradient(&xp, ActionPart::A0).unwrap().minus(&func.gradient(&xm, ActionPart::A0).unwrap());
        g.scale(1.0 / (2.0 * h));
        func.apply_scaling(&mut g);
        for r in 0..dim {
            m[(r, c)] = g.mode(l)[r];
        }
    }
    m
}

#[test]
fn hessian_block_oracle() {
    let dd = 2;
    let u0 = common::triangle(2.0, 1e-4, Sign::Prograde, 4);
    let u = common::triangle(2.0, 1e-5, Sign::Prograde, 4);
    for l in 1..=4 {
        let num = numerical_block(&u0, l);
        let exact = hessian_block(l as i64, &u0.params).unwrap();
        let diff = (num.view((0, 0), (dd, dd)).into_owned() - &exact.t_u0).camax();
        assert!(diff < 1e-6, "u₀ block, l = {l}: {diff:e}");

        let num = numerical_block(&u, l);
        let exact = hessian_block(l as i64, &u.params).unwrap();
        let n = num.nrows() - dd;
        let diff = (num.view((dd, dd), (n, n)).into_owned() - &exact.t_u).camax();
        assert!(diff < 1e-6, "u block, l = {l}: {diff:e}");
        assert!(num.view((0, dd), (dd, n)).camax() < 1e-9);
    }
}

#[test]
fn invertibility_examples() {
    let c1 = common::triangle(1.0, 0.1, Sign::Prograde, 4);
    let report = invertibility_report(&c1.params, 64).unwrap();
    assert!(report.lower_bound > 0.0);
    assert!(report.rows.iter().all(|r| !r.resonant));

    let c2 = common::maxwell(7, 1.0, 2.0, 0.1, 4);
    let report = invertibility_report(&c2.params, 64).unwrap();
    assert!(report.lower_bound > 1e-3);

    let kepler = common::triangle(2.0, 0.1, Sign::Prograde, 4);
    let table = invertibility_table(&kepler.params, 8);
    assert!(table.rows[0].resonant && table.rows[1..].iter().all(|r| !r.resonant));
    assert!(matches!(invertibility_report(&kepler.params, 8), Err(cabling::Error::Configuration(_))));
    assert!(table.to_csv().starts_with("l,min_abs_eigenvalue,resonant\n1,"));

    // The ℓ = 2 resonance of the spatial case is removed by the reflection.
    let c3 = common::spatial_triangle(1.0, 0.1, 4);
    assert!(invertibility_report(&c3.params, 16).is_ok());
}

#[test]
fn quadrature_must_respect_the_group() {
    let f = common::maxwell(7, 1.0, 2.0, 0.1, 4);
    assert_eq!(f.params.k % 6, 0);
    assert!(f.params.clone().with_quadrature(25).is_err());
    assert!(f.params.clone().with_quadrature(6).is_err());
    assert!(common::spatial_triangle(1.0, 0.1, 5).params.k % 2 == 0);
    let x = LoopState::zeros(5, 1, f.params.n_blocks());
    assert!(action(&x, &f.params).is_err());
}

#[test]
fn hessian_vector_matches_gradient_differences() {
    let mut rng = common::rng(44);
    for f in fixtures(6) {
        let x = perturbed(&ansatz(&f), 0.05, &mut rng);
        let v = common::random_loop(x.l(), x.d(), x.n_blocks(), &mut rng);
        let hv = hessian_vector(&x, &v, &f.params).unwrap();
        let h = 1e-5;
        let mut xp = x.clone();
        xp.axpy(h, &v);
        let mut xm = x.clone();
        xm.axpy(-h, &v);
        let mut fd = gradient(&xp, &f.params).unwrap().minus(&gradient(&xm, &f.params).unwrap());
        fd.scale(0.5 / h);
        assert!(fd.minus(&hv).h1_norm() < 1e-6 * hv.h1_norm());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gradient_consistency(seed in any::<u64>(), which in 0usize..3, amp in 0.0f64..0.1) {
        let f = fixtures(5).swap_remove(which);
        let mut rng = common::rng(seed);
        let x = perturbed(&ansatz(&f), amp, &mut rng);
        let y = common::random_loop(x.l(), x.d(), x.n_blocks(), &mut rng);
        let err = directional_error(&Functional::new(f.params.clone()), ActionPart::Full, &x, &y);
        prop_assert!(err < 1e-6, "{err:e}");
    }

    #[test]
    fn invariance_under_rotations(seed in any::<u64>(), t0 in 0.0f64..6.3, t in 0.0f64..6.3) {
        let f = common::triangle(1.0, 0.1, Sign::Prograde, 5);
        let mut rng = common::rng(seed);
        let x = perturbed(&ansatz(&f), 0.05, &mut rng);
        let a0 = action_a0(&x, &f.params).unwrap();
        prop_assert!((action_a0(&rotate_blocks(&x, t0, t), &f.params).unwrap() - a0).abs() < 1e-12 * (1.0 + a0.abs()));
        let a = action(&x, &f.params).unwrap();
        prop_assert!((action(&rotate_blocks(&x, t, t), &f.params).unwrap() - a).abs() < 1e-12 * (1.0 + a.abs()));
    }
}

#[test]
fn c3_fixture_is_consistent() {
    let f = common::spatial_triangle(1.0, 0.1, 4);
    assert_eq!(f.params.setup.case, SymmetryCase::C3);
    assert!(f.config.points.iter().all(|p| p[0] == 0.0 && p[1] == 0.0));
}
