//! Central configurations: critical points of the amended potential
//! `V(v) = ½ Σ M_j ‖v_j‖² + Σ_{j<k} M_j M_k φ_α(‖v_j - v_k‖)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry;
use crate::model::phi_raw;

/// `n` points in `R^{2d}` with their masses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfiguration")]
pub struct Configuration {
    pub alpha: f64,
    pub d: usize,
    pub masses: Vec<f64>,
    pub points: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawConfiguration {
    alpha: f64,
    d: usize,
    masses: Vec<f64>,
    points: Vec<Vec<f64>>,
}

impl TryFrom<RawConfiguration> for Configuration {
    type Error = Error;

    fn try_from(r: RawConfiguration) -> Result<Self> {
        Configuration::new(r.alpha, r.d, r.masses, r.points)
    }
}

impl Configuration {
    pub fn new(alpha: f64, d: usize, masses: Vec<f64>, points: Vec<Vec<f64>>) -> Result<Self> {
        if d == 0 {
            return Err(Error::Parameter("d must be at least 1".into()));
        }
        if !(alpha >= 1.0 && alpha.is_finite()) {
            return Err(Error::Parameter(format!("homogeneity exponent {alpha} must be >= 1")));
        }
        if masses.len() != points.len() || masses.is_empty() {
            return Err(Error::Structural(format!(
                "{} masses for {} points",
                masses.len(),
                points.len()
            )));
        }
        if let Some(p) = points.iter().find(|p| p.len() != 2 * d) {
            return Err(Error::Structural(format!("point of length {} in R^{}", p.len(), 2 * d)));
        }
        if masses.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::Parameter("masses must be positive and finite".into()));
        }
        Ok(Self { alpha, d, masses, points })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        2 * self.d
    }

    pub fn flat(&self) -> Vec<f64> {
        self.points.concat()
    }

    pub fn with_flat(&self, flat: &[f64]) -> Self {
        let points = flat.chunks_exact(self.dim()).map(|c| c.to_vec()).collect();
        Self { points, ..self.clone() }
    }

    /// Mass-weighted centre `Σ M_j a_j / Σ M_j`.
    pub fn center(&self) -> Vec<f64> {
        let total: f64 = self.masses.iter().sum();
        let mut c = vec![0.0; self.dim()];
        for (m, p) in self.masses.iter().zip(&self.points) {
            for (ci, pi) in c.iter_mut().zip(p) {
                *ci += m * pi / total;
            }
        }
        c
    }

    pub fn recentered(&self) -> Self {
        let c = self.center();
        let points = self
            .points
            .iter()
            .map(|p| p.iter().zip(&c).map(|(a, b)| a - b).collect())
            .collect();
        Self { points, ..self.clone() }
    }

    pub fn min_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for j in 0..self.n() {
            for k in j + 1..self.n() {
                best = best.min(distance(&self.points[j], &self.points[k]));
            }
        }
        best
    }

    /// Largest distance from the origin, used as a length scale.
    pub fn radius(&self) -> f64 {
        self.points.iter().map(|p| geometry::norm(p)).fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let points = self.points.iter().map(|p| p.iter().map(|x| x * factor).collect()).collect();
        Self { points, ..self.clone() }
    }

    /// Apply the same `2d x 2d` matrix to every point.
    pub fn transformed(&self, g: &DMatrix<f64>) -> Self {
        self.with_flat(&geometry::apply_blockwise(g, &self.flat()))
    }

    pub fn rotated(&self, angle: f64) -> Self {
        let points = self.points.iter().map(|p| geometry::rotate(p, angle)).collect();
        Self { points, ..self.clone() }
    }

    /// Bodies listed in the order given by `order` (`order[i]` is the old
    /// index of the new body `i`).
    pub fn reordered(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.n()];
        if order.len() != self.n() || order.iter().any(|&i| i >= self.n() || std::mem::replace(&mut seen[i], true)) {
            return Err(Error::Structural("reordering is not a permutation".into()));
        }
        Ok(Self {
            masses: order.iter().map(|&i| self.masses[i]).collect(),
            points: order.iter().map(|&i| self.points[i].clone()).collect(),
            ..self.clone()
        })
    }

    /// Move body `b` to the front, keeping the others in order.
    pub fn cabled_first(&self, b: usize) -> Result<Self> {
        if b >= self.n() {
            return Err(Error::Parameter(format!("no body {b} in a configuration of {}", self.n())));
        }
        let mut order = vec![b];
        order.extend((0..self.n()).filter(|&i| i != b));
        self.reordered(&order)
    }

    fn check_collisions(&self) -> Result<()> {
        for j in 0..self.n() {
            for k in j + 1..self.n() {
                if !(distance(&self.points[j], &self.points[k]) > 0.0) {
                    return Err(Error::Domain(format!("bodies {j} and {k} collide")));
                }
            }
        }
        Ok(())
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `V(v)`.
pub fn amended_potential(v: &Configuration) -> Result<f64> {
    v.check_collisions()?;
    let mut value = 0.0;
    for (m, p) in v.masses.iter().zip(&v.points) {
        value += 0.5 * m * geometry::dot(p, p);
    }
    for j in 0..v.n() {
        for k in j + 1..v.n() {
            let r = distance(&v.points[j], &v.points[k]);
            value += v.masses[j] * v.masses[k] * phi_raw(r, v.alpha);
        }
    }
    Ok(value)
}

/// `∇V(v)`, flattened body by body.
pub fn grad_v(v: &Configuration) -> Result<Vec<f64>> {
    v.check_collisions()?;
    let dim = v.dim();
    let mut g = vec![0.0; dim * v.n()];
    for j in 0..v.n() {
        for i in 0..dim {
            g[j * dim + i] = v.masses[j] * v.points[j][i];
        }
    }
    for j in 0..v.n() {
        for k in j + 1..v.n() {
            let w: Vec<f64> = v.points[j].iter().zip(&v.points[k]).map(|(a, b)| a - b).collect();
            let r = geometry::norm(&w);
            let c = v.masses[j] * v.masses[k] * r.powf(-v.alpha - 1.0);
            for i in 0..dim {
                g[j * dim + i] -= c * w[i];
                g[k * dim + i] += c * w[i];
            }
        }
    }
    Ok(g)
}

/// `∇²V(v)` as a dense symmetric matrix.
pub fn hess_v(v: &Configuration) -> Result<DMatrix<f64>> {
    v.check_collisions()?;
    let dim = v.dim();
    let size = dim * v.n();
    let mut h = DMatrix::zeros(size, size);
    for j in 0..v.n() {
        for i in 0..dim {
            h[(j * dim + i, j * dim + i)] = v.masses[j];
        }
    }
    for j in 0..v.n() {
        for k in j + 1..v.n() {
            let w: Vec<f64> = v.points[j].iter().zip(&v.points[k]).map(|(a, b)| a - b).collect();
            let r = geometry::norm(&w);
            let mm = v.masses[j] * v.masses[k];
            let a = -r.powf(-v.alpha - 1.0);
            let b = (v.alpha + 1.0) * r.powf(-v.alpha - 3.0);
            for p in 0..dim {
                for q in 0..dim {
                    let dg = mm * (if p == q { a } else { 0.0 } + b * w[p] * w[q]);
                    h[(j * dim + p, j * dim + q)] += dg;
                    h[(k * dim + p, k * dim + q)] += dg;
                    h[(j * dim + p, k * dim + q)] -= dg;
                    h[(k * dim + p, j * dim + q)] -= dg;
                }
            }
        }
    }
    Ok(h)
}

fn norm_grad(v: &Configuration) -> Result<f64> {
    Ok(geometry::norm(&grad_v(v)?))
}

/// Tangent vectors `G a` of the `U(d)` orbit, one per generator.
fn orbit_tangents(v: &Configuration) -> Vec<Vec<f64>> {
    let flat = v.flat();
    geometry::unitary_generators(v.d)
        .iter()
        .map(|g| geometry::apply_blockwise(g, &flat))
        .collect()
}

/// Damped Newton iteration for `∇V = 0`.
#[derive(Clone, Debug)]
pub struct CentralSolver {
    pub tol: f64,
    pub max_iters: usize,
    /// Smallest step fraction tried before giving up.
    pub min_damping: f64,
}

impl Default for CentralSolver {
    fn default() -> Self {
        Self { tol: 1e-12, max_iters: 100, min_damping: 1.0 / 4096.0 }
    }
}

#[derive(Clone, Debug)]
pub struct CentralSolution {
    pub configuration: Configuration,
    pub iterations: usize,
    pub residual: f64,
}

impl CentralSolver {
    pub fn solve(&self, guess: &Configuration) -> Result<CentralSolution> {
        let mut v = guess.clone();
        let mut res = norm_grad(&v)?;
        let mut iterations = 0;
        while res > self.tol {
            if iterations >= self.max_iters {
                return Err(Error::Convergence { iterations, residual: res });
            }
            let step = self.newton_step(&v)?;
            let flat = v.flat();
            let mut lambda = 1.0;
            loop {
                let trial_flat: Vec<f64> =
                    flat.iter().zip(&step).map(|(x, dx)| x + lambda * dx).collect();
                let trial = v.with_flat(&trial_flat);
                if trial.min_distance() > 1e-12 * (1.0 + trial.radius()) {
                    let r = norm_grad(&trial)?;
                    if r < (1.0 - 1e-4 * lambda) * res || r <= self.tol {
                        v = trial;
                        res = r;
                        break;
                    }
                }
                lambda *= 0.5;
                if lambda < self.min_damping {
                    return Err(Error::Convergence { iterations, residual: res });
                }
            }
            iterations += 1;
        }
        let configuration = v.recentered();
        let residual = norm_grad(&configuration)?;
        Ok(CentralSolution { configuration, iterations, residual })
    }

    fn newton_step(&self, v: &Configuration) -> Result<Vec<f64>> {
        let h = hess_v(v)?;
        let g = grad_v(v)?;
        let pins = pin_vectors(v);
        let size = h.nrows();
        let k = pins.len();
        let mut a = DMatrix::zeros(size + k, size + k);
        a.view_mut((0, 0), (size, size)).copy_from(&h);
        for (c, t) in pins.iter().enumerate() {
            for i in 0..size {
                a[(i, size + c)] = t[i];
                a[(size + c, i)] = t[i];
            }
        }
        let mut rhs = DVector::zeros(size + k);
        for i in 0..size {
            rhs[i] = -g[i];
        }
        let sol = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Degenerate("singular bordered Hessian in central solve".into()))?;
        Ok(sol.rows(0, size).iter().copied().collect())
    }
}

/// Constraints removing the rotational degeneracy. For `d = 1` the angular
/// coordinate of the second body (or the first body off the origin) is
/// frozen; otherwise the step is kept orthogonal to the orbit tangents.
fn pin_vectors(v: &Configuration) -> Vec<Vec<f64>> {
    let dim = v.dim();
    let scale = 1.0 + v.radius();
    if v.d == 1 {
        let mut order: Vec<usize> = (1..v.n()).collect();
        order.push(0);
        for b in order {
            let r = geometry::norm(&v.points[b]);
            if r > 1e-8 * scale {
                let mut e = vec![0.0; dim * v.n()];
                let jb = geometry::j_vec(&v.points[b]);
                for i in 0..dim {
                    e[b * dim + i] = jb[i] / r;
                }
                return vec![e];
            }
        }
        return Vec::new();
    }
    geometry::orthonormalize(
        orbit_tangents(v),
        1e-8,
        |a, b| geometry::dot(a, b),
        |x, c, y| x.iter_mut().zip(y).for_each(|(xi, yi)| *xi += c * yi),
        |x, c| x.iter_mut().for_each(|xi| *xi *= c),
    )
}

/// Solve with default settings and the given gradient tolerance.
pub fn solve_central_configuration(guess: &Configuration, tol: f64) -> Result<Configuration> {
    let solver = CentralSolver { tol, ..CentralSolver::default() };
    Ok(solver.solve(guess)?.configuration)
}

/// Proportionality constant `S` in `Σ_{k≠0} (e_0 - e_k)/‖e_0 - e_k‖^{α+1} = S e_0`
/// for the unit regular `m`-gon.
pub fn ring_constant(m: usize, alpha: f64) -> f64 {
    let theta = 2.0 * std::f64::consts::PI / m as f64;
    let mut s = 0.0;
    for k in 1..m {
        let (sk, ck) = (k as f64 * theta).sin_cos();
        let w = [1.0 - ck, -sk];
        let r = (w[0] * w[0] + w[1] * w[1]).sqrt();
        s += w[0] / r.powf(alpha + 1.0);
    }
    s
}

fn ring_points(m: usize, radius: f64) -> Vec<Vec<f64>> {
    let theta = 2.0 * std::f64::consts::PI / m as f64;
    (0..m)
        .map(|k| {
            let (s, c) = (k as f64 * theta).sin_cos();
            vec![radius * c, radius * s]
        })
        .collect()
}

/// A central body of mass `mu` at the origin surrounded by `n - 1` unit
/// masses on a regular polygon. Body 0 is the centre.
pub fn maxwell_configuration(n: usize, mu: f64, alpha: f64) -> Result<Configuration> {
    if n < 4 {
        return Err(Error::Parameter(format!("a ring configuration needs n >= 4, got {n}")));
    }
    if !(mu > 0.0) {
        return Err(Error::Parameter("central mass must be positive".into()));
    }
    let m = n - 1;
    let radius = (mu + ring_constant(m, alpha)).powf(1.0 / (alpha + 1.0));
    let mut points = vec![vec![0.0, 0.0]];
    points.extend(ring_points(m, radius));
    let mut masses = vec![mu];
    masses.extend(std::iter::repeat(1.0).take(m));
    Configuration::new(alpha, 1, masses, points)
}

/// The cyclic permutation of the ring fixing the centre: `σ(0) = 0`,
/// `σ(k) = k + 1`, wrapping around the ring.
pub fn maxwell_sigma(n: usize) -> Vec<usize> {
    let m = n - 1;
    let mut sigma = vec![0];
    sigma.extend((1..=m).map(|k| if k == m { 1 } else { k + 1 }));
    sigma
}

/// Regular polygon of `n_ring` unit masses with no central body.
pub fn lagrange_polygon(n_ring: usize, alpha: f64) -> Result<Configuration> {
    if n_ring < 2 {
        return Err(Error::Parameter("a polygon needs at least two bodies".into()));
    }
    let radius = ring_constant(n_ring, alpha).powf(1.0 / (alpha + 1.0));
    Configuration::new(alpha, 1, vec![1.0; n_ring], ring_points(n_ring, radius))
}

/// Mass symmetry `M_b = M_{σ(b)}`.
pub fn check_c2_masses(cfg: &Configuration, sigma: &[usize]) -> bool {
    sigma.len() == cfg.n()
        && (0..cfg.n()).all(|b| {
            let (x, y) = (cfg.masses[b], cfg.masses[sigma[b]]);
            (x - y).abs() <= 1e-12 * x.abs().max(y.abs())
        })
}

/// Position symmetry `a_{σ(b)} = e^{θJ} a_b` with `θ = 2π/m`.
pub fn check_c2_positions(cfg: &Configuration, sigma: &[usize], m: usize) -> bool {
    let theta = 2.0 * std::f64::consts::PI / m as f64;
    let tol = 1e-12 * (1.0 + cfg.radius());
    sigma.len() == cfg.n()
        && (0..cfg.n()).all(|b| {
            let r = geometry::rotate(&cfg.points[b], theta);
            distance(&r, &cfg.points[sigma[b]]) <= tol
        })
}

/// Permutation `σ` with `a_{σ(b)} = e^{2πJ/m} a_b`, if the configuration
/// has one.
pub fn c2_sigma(cfg: &Configuration, m: usize) -> Option<Vec<usize>> {
    if cfg.d != 1 || m < 2 {
        return None;
    }
    let theta = 2.0 * std::f64::consts::PI / m as f64;
    let tol = 1e-9 * (1.0 + cfg.radius());
    let sigma: Vec<usize> = (0..cfg.n())
        .map(|b| {
            let r = geometry::rotate(&cfg.points[b], theta);
            (0..cfg.n()).find(|&k| distance(&r, &cfg.points[k]) <= tol)
        })
        .collect::<Option<_>>()?;
    (check_c2_masses(cfg, &sigma) && check_c2_positions(cfg, &sigma, m)).then_some(sigma)
}

/// Spectrum of `∇²V` at a central configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<f64>,
    pub kernel_dim: usize,
    pub expected_kernel_dim: usize,
    pub nondegenerate: bool,
}

/// Eigenvalues with `|λ| < tol · max|λ|` count as kernel. Non-degenerate
/// means the kernel is exactly the tangent space of the rotation orbit.
pub fn nondegeneracy_report(a: &Configuration, tol: f64) -> Result<SpectrumReport> {
    let res = norm_grad(a)?;
    if res > 1e-8 * (1.0 + a.radius()) {
        return Err(Error::Precondition(format!(
            "not a central configuration (gradient norm {res:.3e})"
        )));
    }
    let h = hess_v(a)?;
    let eig = SymmetricEigen::new(h);
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let scale = eigenvalues.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let kernel_dim = eigenvalues.iter().filter(|x| x.abs() < tol * scale).count();
    let tangents = orbit_tangents(a);
    let t = DMatrix::from_fn(tangents[0].len(), tangents.len(), |r, c| tangents[c][r]);
    let sv = t.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let expected_kernel_dim = sv.iter().filter(|&&s| s > 1e-9 * smax).count();
    Ok(SpectrumReport {
        eigenvalues,
        kernel_dim,
        expected_kernel_dim,
        nondegenerate: kernel_dim == expected_kernel_dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potential_examples() {
        let one = Configuration::new(2.0, 1, vec![1.0], vec![vec![1.0, 0.0]]).unwrap();
        assert_eq!(amended_potential(&one).unwrap(), 0.5);
        let two = Configuration::new(2.0, 1, vec![1.0, 1.0], vec![vec![0.5, 0.0], vec![-0.5, 0.0]])
            .unwrap();
        assert!((amended_potential(&two).unwrap() - 1.25).abs() < 1e-15);
    }

    #[test]
    fn hexagon_ring_constant() {
        let s = ring_constant(6, 2.0);
        let oracle = 0.25 * (5.0 + 4.0 / 3f64.sqrt());
        assert!((s - oracle).abs() < 1e-14);
        let r = maxwell_configuration(7, 1.0, 2.0).unwrap().points[1][0];
        assert!((r - (1.0 + oracle).cbrt()).abs() < 1e-14);
    }

    #[test]
    fn pair_radius() {
        let a = lagrange_polygon(2, 2.0).unwrap();
        assert!((a.points[0][0] - 2f64.powf(-2.0 / 3.0)).abs() < 1e-14);
        assert!(norm_grad(&a).unwrap() < 1e-12);
        let b = lagrange_polygon(2, 1.0).unwrap();
        assert!((b.points[0][0] - 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn sigma_is_cyclic() {
        assert_eq!(maxwell_sigma(5), vec![0, 2, 3, 4, 1]);
    }
}
