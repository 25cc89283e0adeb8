mod common;

use cabling::central::*;
use cabling::geometry;
use proptest::prelude::*;
use rand::Rng;

fn pair(alpha: f64, r: f64) -> Configuration {
    Configuration::new(alpha, 1, vec![1.0, 1.0], vec![vec![r, 0.0], vec![-r, 0.0]]).unwrap()
}

/// Radius of the equal-mass pair from `r = (2r)^{-α}` by scalar Newton.
fn pair_radius(alpha: f64) -> f64 {
    let mut r: f64 = 0.5;
    for _ in 0..100 {
        let f = r - (2.0 * r).powf(-alpha);
        let df = 1.0 + 2.0 * alpha * (2.0 * r).powf(-alpha - 1.0);
        r -= f / df;
    }
    r
}

fn random_configuration(rng: &mut rand::rngs::StdRng, n: usize, alpha: f64) -> Configuration {
    loop {
        let masses = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        let points = (0..n).map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect();
        let c = Configuration::new(alpha, 1, masses, points).unwrap();
        if c.min_distance() > 0.3 {
            return c;
        }
    }
}

#[test]
fn amended_potential_examples() {
    let c = pair(2.0, 0.5);
    assert!((amended_potential(&c).unwrap() - 1.25).abs() < 1e-15);
    let g = c.rotated(0.7);
    assert!((amended_potential(&g).unwrap() - 1.25).abs() < 1e-14);
}

#[test]
fn equal_mass_pair_is_central() {
    let r = 2f64.powf(-2.0 / 3.0);
    assert!(geometry::norm(&grad_v(&pair(2.0, r)).unwrap()) < 1e-12);
    let sol = CentralSolver::default().solve(&pair(2.0, 0.6)).unwrap();
    assert!(sol.residual < 1e-12);
    assert!((sol.configuration.points[0][0].abs() - r).abs() < 1e-12);
    let ring = lagrange_polygon(2, 1.0).unwrap();
    assert!((ring.points[0][0] - pair_radius(1.0)).abs() < 1e-14);
    assert!(geometry::norm(&grad_v(&ring).unwrap()) < 1e-12);
}

#[test]
fn triangle_from_noisy_guess() {
    let mut rng = common::rng(3);
    let tri = lagrange_polygon(3, 2.0).unwrap();
    let noisy: Vec<Vec<f64>> =
        tri.points.iter().map(|p| p.iter().map(|x| x * (1.0 + 0.01 * rng.random_range(-1.0..1.0))).collect()).collect();
    let guess = Configuration::new(2.0, 1, tri.masses.clone(), noisy).unwrap();
    let sol = CentralSolver::default().solve(&guess).unwrap();
    assert!(sol.residual < 1e-12);
    let expected = 3f64.powf(-1.0 / 6.0);
    for p in &sol.configuration.points {
        assert!((geometry::norm(p) - expected).abs() < 1e-10);
    }
    assert!((tri.radius() - expected).abs() < 1e-14);
}

#[test]
fn solve_is_idempotent() {
    let guess = maxwell_configuration(5, 0.7, 2.0).unwrap().scaled(1.02);
    let first = CentralSolver::default().solve(&guess).unwrap();
    let second = CentralSolver::default().solve(&first.configuration).unwrap();
    assert!(second.iterations <= 1);
    let moved: f64 = first
        .configuration
        .flat()
        .iter()
        .zip(second.configuration.flat())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(moved < 1e-10);
}

#[test]
fn solver_reports_divergence() {
    let collinear = Configuration::new(2.0, 1, vec![1.0, 1.0], vec![vec![1.0, 0.0], vec![1.0 + 1e-3, 0.0]]).unwrap();
    let solver = CentralSolver { max_iters: 2, ..CentralSolver::default() };
    assert!(matches!(solver.solve(&collinear), Err(cabling::Error::Convergence { .. })));
}

#[test]
fn maxwell_hexagon() {
    // Polygon sum over ℓ = 1..5 of 1/sin(πℓ/6), quartered.
    let s6: f64 = (1..6).map(|l| 1.0 / (std::f64::consts::PI * l as f64 / 6.0).sin()).sum::<f64>() / 4.0;
    assert!((s6 - 1.82735).abs() < 1e-5);
    assert!((ring_constant(6, 2.0) - s6).abs() < 1e-13);
    let mx = maxwell_configuration(7, 1.0, 2.0).unwrap();
    assert!((geometry::norm(&mx.points[1]) - (1.0 + s6).powf(1.0 / 3.0)).abs() < 1e-13);
    assert!(geometry::norm(&grad_v(&mx).unwrap()) < 1e-10);
    let sigma = maxwell_sigma(7);
    assert!(check_c2_masses(&mx, &sigma));
    assert!(check_c2_positions(&mx, &sigma, 6));
    assert!(!check_c2_positions(&mx, &sigma, 3));
    let report = nondegeneracy_report(&mx, 1e-8).unwrap();
    assert_eq!((report.kernel_dim, report.expected_kernel_dim), (1, 1));
    assert!(report.nondegenerate);
}

#[test]
fn lagrange_rings_are_central() {
    for n in 2..=8 {
        for alpha in [1.0, 2.0] {
            let c = lagrange_polygon(n, alpha).unwrap();
            assert!(geometry::norm(&grad_v(&c).unwrap()) < 1e-12, "n = {n}, α = {alpha}");
        }
    }
    let tri = lagrange_polygon(3, 2.0).unwrap();
    let report = nondegeneracy_report(&tri, 1e-8).unwrap();
    assert_eq!(report.kernel_dim, 1);
    assert!(report.nondegenerate);
}

#[test]
fn rotation_tangent_is_in_the_kernel() {
    let mut configs = vec![maxwell_configuration(7, 1.0, 2.0).unwrap(), maxwell_configuration(5, 2.0, 1.0).unwrap()];
    for n in 2..=6 {
        configs.push(lagrange_polygon(n, 1.0).unwrap());
        configs.push(lagrange_polygon(n, 2.0).unwrap());
    }
    for c in configs {
        let h = hess_v(&c).unwrap();
        let ja: Vec<f64> = c.points.iter().flat_map(|p| geometry::j_vec(p)).collect();
        let hja = &h * nalgebra::DVector::from_vec(ja);
        assert!(hja.amax() < 1e-8 * h.amax());
        assert!((&h - h.transpose()).amax() < 1e-12 * h.amax());
    }
}

#[test]
fn configurations_round_trip_through_json() {
    let mx = maxwell_configuration(7, 1.0, 2.0).unwrap();
    let text = serde_json::to_string(&mx).unwrap();
    let back: Configuration = serde_json::from_str(&text).unwrap();
    assert_eq!(back, mx);
    let bad = r#"{"alpha":2.0,"d":1,"masses":[1.0,1.0],"points":[[0.0,0.0]]}"#;
    assert!(serde_json::from_str::<Configuration>(bad).is_err());
    let colliding = r#"{"alpha":2.0,"d":1,"masses":[1.0,1.0],"points":[[0.5,0.0],[0.5,0.0]]}"#;
    let c: Configuration = serde_json::from_str(colliding).unwrap();
    assert!(matches!(grad_v(&c), Err(cabling::Error::Domain(_))));
}

fn fd_gradient(c: &Configuration) -> Vec<f64> {
    let flat = c.flat();
    (0..flat.len())
        .map(|i| {
            let h = 1e-6;
            let mut p = flat.clone();
            p[i] += h;
            let vp = amended_potential(&c.with_flat(&p)).unwrap();
            p[i] -= 2.0 * h;
            let vm = amended_potential(&c.with_flat(&p)).unwrap();
            (vp - vm) / (2.0 * h)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gradient_and_hessian_match_finite_differences(seed in any::<u64>(), alpha in prop::sample::select(vec![1.0, 2.0]), n in 2usize..6) {
        let mut rng = common::rng(seed);
        let c = random_configuration(&mut rng, n, alpha);
        let g = grad_v(&c).unwrap();
        let fd = fd_gradient(&c);
        let scale = geometry::norm(&g).max(1.0);
        for (a, b) in g.iter().zip(&fd) {
            prop_assert!((a - b).abs() < 1e-6 * scale);
        }
        let h = hess_v(&c).unwrap();
        let flat = c.flat();
        for i in 0..flat.len() {
            let step = 1e-6;
            let mut p = flat.clone();
            p[i] += step;
            let gp = grad_v(&c.with_flat(&p)).unwrap();
            p[i] -= 2.0 * step;
            let gm = grad_v(&c.with_flat(&p)).unwrap();
            for r in 0..flat.len() {
                let fd = (gp[r] - gm[r]) / (2.0 * step);
                prop_assert!((h[(r, i)] - fd).abs() < 1e-6 * h.amax());
            }
        }
    }

    #[test]
    fn potential_is_rotation_invariant(seed in any::<u64>(), theta in 0.0f64..6.3) {
        let mut rng = common::rng(seed);
        let c = random_configuration(&mut rng, 4, 2.0);
        let v = amended_potential(&c).unwrap();
        let g = c.rotated(theta);
        prop_assert!((amended_potential(&g).unwrap() - v).abs() < 1e-12 * (1.0 + v.abs()));
        let rotated_grad: Vec<f64> = grad_v(&c).unwrap().chunks(2).flat_map(|p| geometry::rotate(p, theta)).collect();
        for (a, b) in grad_v(&g).unwrap().iter().zip(&rotated_grad) {
            prop_assert!((a - b).abs() < 1e-12 * (1.0 + v.abs()));
        }
    }
}

#[test]
fn rotation_permutation_is_recovered() {
    let mx = maxwell_configuration(7, 1.0, 2.0).unwrap();
    assert_eq!(cabling::central::c2_sigma(&mx, 6), Some(cabling::central::maxwell_sigma(7)));
    assert_eq!(cabling::central::c2_sigma(&mx, 3).map(|s| s[1]), Some(3));
    assert_eq!(cabling::central::c2_sigma(&mx, 4), None);
    assert_eq!(cabling::central::c2_sigma(&lagrange_polygon(3, 1.0).unwrap(), 6), None);
}
