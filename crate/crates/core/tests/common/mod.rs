#![allow(dead_code)]

use cabling::action::ActionParams;
use cabling::central::{lagrange_polygon, maxwell_configuration, maxwell_sigma, Configuration};
use cabling::loops::LoopState;
use cabling::model::{CablingSetup, Sign, SymmetryCase};
use cabling::solver::cable_configuration;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub struct Fixture {
    pub params: ActionParams,
    pub config: Configuration,
}

/// Equal-mass triangle with body 0 cabled, case c1.
pub fn triangle(alpha: f64, epsilon: f64, sign: Sign, l: usize) -> Fixture {
    let tri = lagrange_polygon(3, alpha).unwrap();
    let (ms, config) = cable_configuration(&tri, 0, 0.5).unwrap();
    let setup = CablingSetup::from_epsilon(epsilon, alpha, sign, SymmetryCase::C1, 1).unwrap();
    let params = ActionParams::new(ms, setup, vec![1.0, 0.0], l).unwrap();
    Fixture { params, config }
}

pub fn triangle_pq(alpha: f64, p: u64, q: i64, sign: Sign, l: usize, eps_max: f64) -> Fixture {
    let tri = lagrange_polygon(3, alpha).unwrap();
    let (ms, config) = cable_configuration(&tri, 0, 0.5).unwrap();
    let setup = CablingSetup::from_pq(p, q, alpha, sign, SymmetryCase::C1, 1, eps_max).unwrap();
    let params = ActionParams::new(ms, setup, vec![1.0, 0.0], l).unwrap();
    Fixture { params, config }
}

pub fn maxwell_case(n: usize) -> SymmetryCase {
    SymmetryCase::C2 { m: n - 1, sigma: maxwell_sigma(n) }
}

/// Maxwell ring around a cabled central body, case c2.
pub fn maxwell(n: usize, mu: f64, alpha: f64, epsilon: f64, l: usize) -> Fixture {
    let mx = maxwell_configuration(n, mu, alpha).unwrap();
    let (ms, config) = cable_configuration(&mx, 0, 0.5).unwrap();
    let setup = CablingSetup::from_epsilon(epsilon, alpha, Sign::Prograde, maxwell_case(n), 1).unwrap();
    let params = ActionParams::new(ms, setup, vec![1.0, 0.0], l).unwrap();
    Fixture { params, config }
}

pub fn maxwell_pq(n: usize, mu: f64, alpha: f64, p: u64, l: usize) -> Fixture {
    let mx = maxwell_configuration(n, mu, alpha).unwrap();
    let (ms, config) = cable_configuration(&mx, 0, 0.5).unwrap();
    let setup =
        CablingSetup::from_pq(p, 1, alpha, Sign::Prograde, maxwell_case(n), 1, CablingSetup::DEFAULT_EPS_MAX)
            .unwrap();
    let params = ActionParams::new(ms, setup, vec![1.0, 0.0], l).unwrap();
    Fixture { params, config }
}

/// Triangle in the second complex plane of `C²`, pair axis in the first,
/// case c3.
pub fn spatial_triangle(alpha: f64, epsilon: f64, l: usize) -> Fixture {
    let tri = lagrange_polygon(3, alpha).unwrap();
    let lifted = Configuration::new(
        alpha,
        2,
        tri.masses.clone(),
        tri.points.iter().map(|p| vec![0.0, 0.0, p[0], p[1]]).collect(),
    )
    .unwrap();
    let (ms, config) = cable_configuration(&lifted, 0, 0.4).unwrap();
    let setup = CablingSetup::from_epsilon(epsilon, alpha, Sign::Prograde, SymmetryCase::C3, 2).unwrap();
    let params = ActionParams::new(ms, setup, vec![1.0, 0.0, 0.0, 0.0], l).unwrap();
    Fixture { params, config }
}

/// `x_a` plus a smooth random perturbation of size `amp`.
pub fn perturbed(x: &LoopState, amp: f64, rng: &mut StdRng) -> LoopState {
    let mut y = x.clone();
    y.axpy(amp, &random_loop(x.l(), x.d(), x.n_blocks(), rng));
    y
}

/// Random loop with coefficients decaying like `1/(ℓ²+1)`.
pub fn random_loop(l: usize, d: usize, n_blocks: usize, rng: &mut StdRng) -> LoopState {
    let dim = 2 * d * n_blocks;
    let modes = (0..=l)
        .map(|k| {
            let w = 1.0 / (k * k + 1) as f64;
            (0..dim)
                .map(|_| Complex64::new(rng.random_range(-w..w), rng.random_range(-w..w)))
                .collect()
        })
        .collect();
    LoopState::from_modes(d, n_blocks, modes).unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Rotate the pair block by `theta0` and the bodies by `theta` (`d = 1`).
pub fn rotate_blocks(x: &LoopState, theta0: f64, theta: f64) -> LoopState {
    let mut y = x.clone();
    let (s0, c0) = theta0.sin_cos();
    let (s, c) = theta.sin_cos();
    for l in 0..=x.l() {
        let m = y.mode_mut(l);
        for i in (0..m.len()).step_by(2) {
            let (sn, cs) = if i < 2 { (s0, c0) } else { (s, c) };
            let (a, b) = (m[i], m[i + 1]);
            m[i] = a * cs - b * sn;
            m[i + 1] = a * sn + b * cs;
        }
    }
    y
}

/// Relative error between `2π (∇A, y)_{H¹}` and a Richardson-extrapolated
/// central difference of `A` along `y`.
pub fn directional_error(f: &cabling::action::Functional, part: cabling::action::ActionPart, x: &LoopState, y: &LoopState) -> f64 {
    let exact = 2.0 * std::f64::consts::PI * f.gradient(x, part).unwrap().h1_inner(y);
    let diff = |h: f64| {
        let mut xp = x.clone();
        xp.axpy(h, y);
        let mut xm = x.clone();
        xm.axpy(-h, y);
        (f.value(&xp, part).unwrap() - f.value(&xm, part).unwrap()) / (2.0 * h)
    };
    let h = 1e-3 / y.h1_norm();
    let fd = (4.0 * diff(h / 2.0) - diff(h)) / 3.0;
    rel_err(exact, fd)
}
