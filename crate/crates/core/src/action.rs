//! The action `A = A₀ + H` on loop space, its `H¹` gradient, Hessian-vector
//! products, the `ε`-scaling of the residual and the limiting Hessian blocks.
//!
//! ```text
//! A₀(x) = ε^{1-α} M₀ ∫ ½‖(ν/ω ∂ + J)u₀‖² + φ(‖u₀‖)
//!       + ∫ ½ Σ M_j ‖(ν∂ + J)u_j‖² + Σ_{j<k} M_j M_k φ(‖u_j - u_k‖)
//! H(x)  = ∫ Σ_{k≥2} Σ_{j=0,1} M_k m_j [φ(‖u₁ - u_k - μ_j ε e^{sJ}u₀‖) - φ(‖u₁ - u_k‖)]
//! ```
//!
//! Kinetic terms are applied exactly in Fourier space. Potential terms are
//! sampled on `K` uniform nodes, so every value, gradient and Hessian here
//! belongs to the same discrete functional and agree to rounding.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry;
use crate::loops::{LoopState, SpectralGrid, SymmetryAction};
use crate::model::{phi_raw, CablingSetup, MassSystem, SymmetryCase};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Data fixing the functional: masses, frequencies, Kepler orientation `a₀`
/// and quadrature size `K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionParams {
    pub ms: MassSystem,
    pub setup: CablingSetup,
    pub a0: Vec<f64>,
    /// Fourier truncation `L` of the loops this functional acts on.
    pub l: usize,
    pub k: usize,
}

/// `4L + 4` rounded up to a multiple of the symmetry order, which keeps the
/// discrete action exactly invariant under the discrete group.
pub fn default_quadrature(l: usize, case: &SymmetryCase) -> usize {
    let k = 4 * l + 4;
    let m = case.quadrature_multiple();
    k.div_ceil(m) * m
}

impl ActionParams {
    pub fn new(ms: MassSystem, setup: CablingSetup, a0: Vec<f64>, l: usize) -> Result<Self> {
        let k = default_quadrature(l, &setup.case);
        let p = Self { ms, setup, a0, l, k };
        p.validate()?;
        Ok(p)
    }

    pub fn with_quadrature(mut self, k: usize) -> Result<Self> {
        self.k = k;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        self.setup.validate()?;
        let dd = 2 * self.setup.d;
        if self.a0.len() != dd {
            return Err(Error::Structural(format!("a0 has length {}, expected {dd}", self.a0.len())));
        }
        if (geometry::norm(&self.a0) - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter("a0 must have unit length".into()));
        }
        if self.setup.case == SymmetryCase::C3 && self.a0[2..].iter().any(|x| x.abs() > 1e-12) {
            return Err(Error::Configuration("case c3 needs a0 in the first complex plane".into()));
        }
        if let SymmetryCase::C2 { sigma, .. } = &self.setup.case {
            if sigma.len() != self.ms.n() {
                return Err(Error::Structural(format!(
                    "sigma permutes {} letters but there are {} bodies",
                    sigma.len(),
                    self.ms.n()
                )));
            }
        }
        if self.k < 2 * self.l + 2 {
            return Err(Error::Resolution(format!("K = {} is too small for L = {}", self.k, self.l)));
        }
        if self.k % self.setup.case.quadrature_multiple() != 0 {
            return Err(Error::Parameter("quadrature size breaks the discrete symmetry".into()));
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.setup.d
    }

    pub fn n_blocks(&self) -> usize {
        self.ms.n() + 1
    }

    pub fn dim(&self) -> usize {
        2 * self.setup.d * self.n_blocks()
    }

    /// Coefficient `ε^{1-α} M₀` in front of the pair block.
    pub fn pair_weight(&self) -> f64 {
        self.setup.epsilon.powf(1.0 - self.ms.alpha) * self.ms.big_m[0]
    }

    pub fn symmetry(&self) -> SymmetryAction {
        SymmetryAction::from_case(&self.setup.case)
    }

    /// Row scaling `(u₀ factor, u factor)` for mode `ℓ`.
    pub fn scaling(&self, l: usize) -> (f64, f64) {
        let (eps, alpha) = (self.setup.epsilon, self.ms.alpha);
        let u0 = eps.powf(alpha - 1.0);
        let u = if l == 0 { 1.0 } else { eps.powf(alpha + 1.0) };
        (u0, u)
    }

    /// Mass and loop speed of block `b`.
    fn kinetic_block(&self, b: usize) -> (f64, f64) {
        if b == 0 {
            (self.pair_weight(), self.setup.pair_speed())
        } else {
            (self.ms.big_m[b], self.setup.nu)
        }
    }
}

/// Which part of the functional to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActionPart {
    A0,
    H,
    Full,
}

/// A potential term `weight · φ(‖Σ c_t R_t x_{b_t}‖)` where `R_t` is either
/// the identity or `e^{sJ}`.
#[derive(Clone, Copy, Debug)]
struct Term {
    weight: f64,
    parts: [(usize, f64, bool); 3],
    len: usize,
}

impl Term {
    fn new(weight: f64, parts: &[(usize, f64, bool)]) -> Self {
        let mut arr = [(0, 0.0, false); 3];
        arr[..parts.len()].copy_from_slice(parts);
        Self { weight, parts: arr, len: parts.len() }
    }

    fn parts(&self) -> &[(usize, f64, bool)] {
        &self.parts[..self.len]
    }
}

fn build_terms(p: &ActionParams, part: ActionPart) -> Vec<Term> {
    let n = p.ms.n();
    let bm = &p.ms.big_m;
    let eps = p.setup.epsilon;
    let mut terms = Vec::new();
    let cabled = |terms: &mut Vec<Term>| {
        for k in 2..=n {
            for j in 0..2 {
                terms.push(Term::new(
                    bm[k] * p.ms.m[j],
                    &[(1, 1.0, false), (k, -1.0, false), (0, -p.ms.mu[j] * eps, true)],
                ));
            }
        }
    };
    match part {
        ActionPart::A0 => {
            terms.push(Term::new(p.pair_weight(), &[(0, 1.0, false)]));
            for j in 1..=n {
                for k in j + 1..=n {
                    terms.push(Term::new(bm[j] * bm[k], &[(j, 1.0, false), (k, -1.0, false)]));
                }
            }
        }
        ActionPart::H => {
            cabled(&mut terms);
            for k in 2..=n {
                terms.push(Term::new(-bm[k], &[(1, 1.0, false), (k, -1.0, false)]));
            }
        }
        ActionPart::Full => {
            terms.push(Term::new(p.pair_weight(), &[(0, 1.0, false)]));
            for j in 2..=n {
                for k in j + 1..=n {
                    terms.push(Term::new(bm[j] * bm[k], &[(j, 1.0, false), (k, -1.0, false)]));
                }
            }
            cabled(&mut terms);
        }
    }
    terms
}

/// Pointwise Hessians of the sampled potential at one loop, reused across
/// many Hessian-vector products.
#[derive(Clone, Debug)]
pub struct PointwiseHessian {
    dim: usize,
    part: ActionPart,
    /// `K` row-major `D x D` blocks.
    blocks: Vec<f64>,
}

impl PointwiseHessian {
    /// Node average of the pointwise Hessian, the mode-diagonal part of the
    /// potential Hessian.
    pub fn average(&self) -> DMatrix<f64> {
        let dd = self.dim * self.dim;
        let k = self.blocks.len() / dd;
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for node in 0..k {
            for r in 0..self.dim {
                for c in 0..self.dim {
                    m[(r, c)] += self.blocks[node * dd + r * self.dim + c];
                }
            }
        }
        m / k as f64
    }
}

/// The discrete functional with cached quadrature plans.
#[derive(Clone, Debug)]
pub struct Functional {
    params: ActionParams,
    grid: SpectralGrid,
    terms_a0: Vec<Term>,
    terms_h: Vec<Term>,
    terms_full: Vec<Term>,
}

impl Functional {
    pub fn new(params: ActionParams) -> Self {
        let grid = SpectralGrid::new(params.k);
        let terms_a0 = build_terms(&params, ActionPart::A0);
        let terms_h = build_terms(&params, ActionPart::H);
        let terms_full = build_terms(&params, ActionPart::Full);
        Self { params, grid, terms_a0, terms_h, terms_full }
    }

    pub fn params(&self) -> &ActionParams {
        &self.params
    }

    fn terms(&self, part: ActionPart) -> &[Term] {
        match part {
            ActionPart::A0 => &self.terms_a0,
            ActionPart::H => &self.terms_h,
            ActionPart::Full => &self.terms_full,
        }
    }

    fn check(&self, x: &LoopState) -> Result<()> {
        if x.d() != self.params.d() || x.n_blocks() != self.params.n_blocks() || x.l() != self.params.l {
            return Err(Error::Structural(format!(
                "loop in E^{} with {} blocks and L = {} does not match the parameters",
                2 * x.d(),
                x.n_blocks(),
                x.l()
            )));
        }
        Ok(())
    }

    /// `A₀`, `H` or their sum.
    pub fn value(&self, x: &LoopState, part: ActionPart) -> Result<f64> {
        self.check(x)?;
        let samples = self.grid.sample_flat(x)?;
        let dim = x.dim();
        let mut pot = 0.0;
        let mut w = vec![0.0; 2 * self.params.d()];
        for node in 0..self.grid.k() {
            let (s, c) = self.grid.node(node).sin_cos();
            let xk = &samples[node * dim..(node + 1) * dim];
            for t in self.terms(part) {
                let r = self.term_vector(t, xk, c, s, &mut w, node)?;
                pot += t.weight * phi_raw(r, self.params.ms.alpha);
            }
        }
        let mut value = pot * 2.0 * PI / self.grid.k() as f64;
        if part != ActionPart::H {
            value += self.kinetic_value(x);
        }
        Ok(value)
    }

    fn term_vector(&self, t: &Term, xk: &[f64], c: f64, s: f64, w: &mut [f64], node: usize) -> Result<f64> {
        let dd = w.len();
        w.iter_mut().for_each(|v| *v = 0.0);
        for &(b, coef, rot) in t.parts() {
            let src = &xk[b * dd..(b + 1) * dd];
            if rot {
                for p in 0..dd / 2 {
                    w[2 * p] += coef * (c * src[2 * p] - s * src[2 * p + 1]);
                    w[2 * p + 1] += coef * (s * src[2 * p] + c * src[2 * p + 1]);
                }
            } else {
                for i in 0..dd {
                    w[i] += coef * src[i];
                }
            }
        }
        let r = geometry::norm(w);
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Domain(format!(
                "collision at quadrature node {node} (s = {:.6})",
                self.grid.node(node)
            )));
        }
        Ok(r)
    }

    fn kinetic_value(&self, x: &LoopState) -> f64 {
        let dd = 2 * x.d();
        let mut total = 0.0;
        for b in 0..x.n_blocks() {
            let (kappa, speed) = self.params.kinetic_block(b);
            let range = x.block_range(b);
            let mut sum = 0.0;
            for l in 0..=x.l() {
                let v = &x.mode(l)[range.clone()];
                let jv = geometry::j_cvec(v);
                let lc = Complex64::new(0.0, l as f64 * speed);
                let sq: f64 = (0..dd).map(|i| (v[i] * lc + jv[i]).norm_sqr()).sum();
                sum += if l == 0 { sq } else { 2.0 * sq };
            }
            total += PI * kappa * sum;
        }
        total
    }

    /// `out_ℓ += Kin_ℓ v_ℓ` with `Kin_ℓ = κ[(ℓ²c²+1)I - 2iℓcJ]` per block.
    fn add_kinetic(&self, v: &LoopState, out: &mut LoopState) {
        for b in 0..v.n_blocks() {
            let (kappa, speed) = self.params.kinetic_block(b);
            let range = v.block_range(b);
            for l in 0..=v.l() {
                let lc = l as f64 * speed;
                let src = &v.mode(l)[range.clone()];
                let jsrc = geometry::j_cvec(src);
                let dst = &mut out.mode_mut(l)[range.clone()];
                for ((o, a), ja) in dst.iter_mut().zip(src).zip(&jsrc) {
                    *o += (a * (lc * lc + 1.0) - ja * Complex64::new(0.0, 2.0 * lc)) * kappa;
                }
            }
        }
    }

    /// `H¹` gradient: `∇A_ℓ = (Kin_ℓ x̂_ℓ + f̂_ℓ)/(ℓ²+1)` where `f` is the
    /// pointwise potential gradient.
    pub fn gradient(&self, x: &LoopState, part: ActionPart) -> Result<LoopState> {
        self.check(x)?;
        let samples = self.grid.sample_flat(x)?;
        let dim = x.dim();
        let dd = 2 * x.d();
        let alpha = self.params.ms.alpha;
        let mut f = vec![0.0; samples.len()];
        let mut w = vec![0.0; dd];
        for node in 0..self.grid.k() {
            let (s, c) = self.grid.node(node).sin_cos();
            let xk = &samples[node * dim..(node + 1) * dim];
            let fk = &mut f[node * dim..(node + 1) * dim];
            for t in self.terms(part) {
                let r = self.term_vector(t, xk, c, s, &mut w, node)?;
                let g = -t.weight * r.powf(-alpha - 1.0);
                for &(b, coef, rot) in t.parts() {
                    let dst = &mut fk[b * dd..(b + 1) * dd];
                    let gc = g * coef;
                    if rot {
                        for p in 0..dd / 2 {
                            dst[2 * p] += gc * (c * w[2 * p] + s * w[2 * p + 1]);
                            dst[2 * p + 1] += gc * (-s * w[2 * p] + c * w[2 * p + 1]);
                        }
                    } else {
                        for i in 0..dd {
                            dst[i] += gc * w[i];
                        }
                    }
                }
            }
        }
        let fhat = self.grid.transform_flat(&f, dim, x.l())?;
        let mut g = LoopState::from_modes(x.d(), x.n_blocks(), fhat.chunks(dim).map(|c| c.to_vec()).collect())?;
        if part != ActionPart::H {
            self.add_kinetic(x, &mut g);
        }
        riesz_in_place(&mut g);
        Ok(g)
    }

    /// Pointwise Hessians of the potential at `x`.
    pub fn pointwise_hessian(&self, x: &LoopState, part: ActionPart) -> Result<PointwiseHessian> {
        self.check(x)?;
        let samples = self.grid.sample_flat(x)?;
        let dim = x.dim();
        let dd = 2 * x.d();
        let alpha = self.params.ms.alpha;
        let mut blocks = vec![0.0; self.grid.k() * dim * dim];
        let mut w = vec![0.0; dd];
        let mut dg = vec![0.0; dd * dd];
        let mut rot_m = vec![vec![0.0; dd * dd]; 3];
        for node in 0..self.grid.k() {
            let (s, c) = self.grid.node(node).sin_cos();
            let xk = &samples[node * dim..(node + 1) * dim];
            let hk = &mut blocks[node * dim * dim..(node + 1) * dim * dim];
            for t in self.terms(part) {
                let r = self.term_vector(t, xk, c, s, &mut w, node)?;
                let a = -r.powf(-alpha - 1.0);
                let bcoef = (alpha + 1.0) * r.powf(-alpha - 3.0);
                for i in 0..dd {
                    for j in 0..dd {
                        dg[i * dd + j] = bcoef * w[i] * w[j] + if i == j { a } else { 0.0 };
                    }
                }
                for (ti, &(_, _, rot)) in t.parts().iter().enumerate() {
                    rotation_matrix(rot, c, s, dd, &mut rot_m[ti]);
                }
                for (t1, &(b1, c1, _)) in t.parts().iter().enumerate() {
                    for (t2, &(b2, c2, _)) in t.parts().iter().enumerate() {
                        let coef = t.weight * c1 * c2;
                        // R1ᵀ DG R2
                        for i in 0..dd {
                            for j in 0..dd {
                                let mut acc = 0.0;
                                for p in 0..dd {
                                    let r1 = rot_m[t1][p * dd + i];
                                    if r1 == 0.0 {
                                        continue;
                                    }
                                    let mut inner = 0.0;
                                    for q in 0..dd {
                                        inner += dg[p * dd + q] * rot_m[t2][q * dd + j];
                                    }
                                    acc += r1 * inner;
                                }
                                hk[(b1 * dd + i) * dim + b2 * dd + j] += coef * acc;
                            }
                        }
                    }
                }
            }
        }
        Ok(PointwiseHessian { dim, part, blocks })
    }

    /// Hessian of the `H¹` gradient applied to `v`, with the pointwise
    /// Hessians taken from `hess`.
    pub fn hessian_apply(&self, hess: &PointwiseHessian, v: &LoopState) -> Result<LoopState> {
        self.check(v)?;
        let dim = v.dim();
        let samples = self.grid.sample_flat(v)?;
        let mut f = vec![0.0; samples.len()];
        for node in 0..self.grid.k() {
            let hk = &hess.blocks[node * dim * dim..(node + 1) * dim * dim];
            let vk = &samples[node * dim..(node + 1) * dim];
            let fk = &mut f[node * dim..(node + 1) * dim];
            for r in 0..dim {
                let row = &hk[r * dim..(r + 1) * dim];
                fk[r] = row.iter().zip(vk).map(|(a, b)| a * b).sum();
            }
        }
        let fhat = self.grid.transform_flat(&f, dim, v.l())?;
        let mut g = LoopState::from_modes(v.d(), v.n_blocks(), fhat.chunks(dim).map(|c| c.to_vec()).collect())?;
        if hess.part != ActionPart::H {
            self.add_kinetic(v, &mut g);
        }
        riesz_in_place(&mut g);
        Ok(g)
    }

    /// Exact per-mode matrix `(Kin_ℓ + Hbar)/(ℓ²+1)` of the linearisation
    /// when the pointwise Hessian is replaced by its average `hbar`.
    pub fn mode_operator(&self, l: usize, hbar: &DMatrix<f64>, with_kinetic: bool) -> DMatrix<Complex64> {
        let dim = self.params.dim();
        let dd = 2 * self.params.d();
        let mut m = DMatrix::from_fn(dim, dim, |r, c| Complex64::new(hbar[(r, c)], 0.0));
        if with_kinetic {
            let j = geometry::j_matrix(self.params.d());
            for b in 0..self.params.n_blocks() {
                let (kappa, speed) = self.params.kinetic_block(b);
                let lc = l as f64 * speed;
                for i in 0..dd {
                    for k in 0..dd {
                        let diag = if i == k { lc * lc + 1.0 } else { 0.0 };
                        m[(b * dd + i, b * dd + k)] +=
                            Complex64::new(diag, -2.0 * lc * j[(i, k)]) * kappa;
                    }
                }
            }
        }
        m / Complex64::new((l * l + 1) as f64, 0.0)
    }

    /// Multiply rows by the `ε`-scaling.
    pub fn apply_scaling(&self, x: &mut LoopState) {
        let r0 = x.range_of(crate::loops::Block::U0);
        for l in 0..=x.l() {
            let (s0, s) = self.params.scaling(l);
            for (i, z) in x.mode_mut(l).iter_mut().enumerate() {
                *z *= if r0.contains(&i) { s0 } else { s };
            }
        }
    }
}

fn rotation_matrix(rot: bool, c: f64, s: f64, dd: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for p in 0..dd / 2 {
        let (i, j) = (2 * p, 2 * p + 1);
        if rot {
            out[i * dd + i] = c;
            out[i * dd + j] = -s;
            out[j * dd + i] = s;
            out[j * dd + j] = c;
        } else {
            out[i * dd + i] = 1.0;
            out[j * dd + j] = 1.0;
        }
    }
}

fn riesz_in_place(g: &mut LoopState) {
    for l in 1..=g.l() {
        let w = 1.0 / (l * l + 1) as f64;
        g.mode_mut(l).iter_mut().for_each(|z| *z *= w);
    }
}

/// `A₀(x)`.
pub fn action_a0(x: &LoopState, p: &ActionParams) -> Result<f64> {
    Functional::new(p.clone()).value(x, ActionPart::A0)
}

/// `H(x)`.
pub fn action_h(x: &LoopState, p: &ActionParams) -> Result<f64> {
    Functional::new(p.clone()).value(x, ActionPart::H)
}

/// `A(x) = A₀(x) + H(x)`.
pub fn action(x: &LoopState, p: &ActionParams) -> Result<f64> {
    Functional::new(p.clone()).value(x, ActionPart::Full)
}

/// `∇A(x)` in `H¹`. A directional derivative is `2π (∇A, y)_{H¹}`.
pub fn gradient(x: &LoopState, p: &ActionParams) -> Result<LoopState> {
    Functional::new(p.clone()).gradient(x, ActionPart::Full)
}

pub fn gradient_part(x: &LoopState, p: &ActionParams, part: ActionPart) -> Result<LoopState> {
    Functional::new(p.clone()).gradient(x, part)
}

/// Gradient with the pair rows scaled by `ε^{α-1}` and the body rows by
/// `ε^{α+1}` (by 1 on the mean).
pub fn scaled_gradient(x: &LoopState, p: &ActionParams) -> Result<LoopState> {
    let f = Functional::new(p.clone());
    let mut g = f.gradient(x, ActionPart::Full)?;
    f.apply_scaling(&mut g);
    Ok(g)
}

/// Hessian of the full action at `x` applied to `v`.
pub fn hessian_vector(x: &LoopState, v: &LoopState, p: &ActionParams) -> Result<LoopState> {
    let f = Functional::new(p.clone());
    let h = f.pointwise_hessian(x, ActionPart::Full)?;
    f.hessian_apply(&h, v)
}

/// Limiting (`ε → 0`, scaled) Hessian blocks at mode `ℓ` and their closed
/// form eigenvalues.
#[derive(Clone, Debug)]
pub struct HessianBlock {
    pub l: i64,
    pub t_u0: DMatrix<Complex64>,
    pub t_u: DMatrix<Complex64>,
    /// `λ₁ℓ±` as `(minus, plus)`.
    pub lambda1: (f64, f64),
    /// `λ₂ℓ±` as `(minus, plus)`, each of multiplicity `d - 1`.
    pub lambda2: (f64, f64),
    pub multiplicity2: usize,
}

/// Closed-form `λ₁ℓ±`.
pub fn lambda1(l: f64, alpha: f64, m0: f64) -> (f64, f64) {
    let base = l * l + (alpha + 1.0) / 2.0;
    let root = 0.5 * (16.0 * l * l + (alpha + 1.0).powi(2)).sqrt();
    let w = m0 / (l * l + 1.0);
    (w * (base - root), w * (base + root))
}

/// Closed-form `λ₂ℓ± = M₀ ℓ(ℓ±2)/(ℓ²+1)`.
pub fn lambda2(l: f64, m0: f64) -> (f64, f64) {
    let w = m0 / (l * l + 1.0);
    (w * l * (l - 2.0), w * l * (l + 2.0))
}

/// `T_{ℓ,u₀} = M₀/(ℓ²+1) [ℓ²I - 2iℓJ + (α+1) a₀a₀ᵀ]` and
/// `T_{ℓ,u} = ℓ²/(ℓ²+1) diag(M)`.
pub fn hessian_block(l: i64, p: &ActionParams) -> Result<HessianBlock> {
    if l == 0 {
        return Err(Error::Domain("the mean block has no closed form here".into()));
    }
    let d = p.d();
    let dd = 2 * d;
    let lf = l as f64;
    let alpha = p.ms.alpha;
    let m0 = p.ms.big_m[0];
    let j = geometry::j_matrix(d);
    let w = 1.0 / (lf * lf + 1.0);
    let t_u0 = DMatrix::from_fn(dd, dd, |r, c| {
        let diag = if r == c { lf * lf } else { 0.0 };
        let re = diag + (alpha + 1.0) * p.a0[r] * p.a0[c];
        Complex64::new(re, -2.0 * lf * j[(r, c)]) * (m0 * w)
    });
    let n = p.ms.n();
    let mut t_u = DMatrix::from_element(dd * n, dd * n, ZERO);
    for b in 0..n {
        for i in 0..dd {
            t_u[(b * dd + i, b * dd + i)] = Complex64::new(lf * lf * w * p.ms.big_m[b + 1], 0.0);
        }
    }
    Ok(HessianBlock {
        l,
        t_u0,
        t_u,
        lambda1: lambda1(lf, alpha, m0),
        lambda2: lambda2(lf, m0),
        multiplicity2: d - 1,
    })
}

/// Sorted eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvertibilityRow {
    pub l: usize,
    pub min_abs_eigenvalue: f64,
    pub resonant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvertibilityReport {
    pub rows: Vec<InvertibilityRow>,
    /// Smallest `|λ|` over all modes, the empirical `c⁻¹`.
    pub lower_bound: f64,
}

impl InvertibilityReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("l,min_abs_eigenvalue,resonant\n");
        for r in &self.rows {
            s.push_str(&format!("{},{:.17e},{}\n", r.l, r.min_abs_eigenvalue, r.resonant));
        }
        s
    }
}

/// Per-mode smallest `|λ|` of the limiting blocks restricted to the modes
/// that survive the symmetry projection, for `ℓ = 1..=lmax`.
pub fn invertibility_table(p: &ActionParams, lmax: usize) -> InvertibilityReport {
    let action = p.symmetry();
    let dd = 2 * p.d();
    let m0 = p.ms.big_m[0];
    let min_mass = p.ms.big_m[1..].iter().copied().fold(f64::INFINITY, f64::min);
    let mut rows = Vec::with_capacity(lmax);
    for l in 1..=lmax {
        let block = hessian_block(l as i64, p).expect("l > 0");
        let proj = action.mode_projector(l, p.d(), p.n_blocks());
        let p0 = proj.view((0, 0), (dd, dd)).into_owned();
        let eig = SymmetricEigen::new(p0);
        let cols: Vec<usize> = (0..dd).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
        let lf = l as f64;
        let mut min_abs = lf * lf / (lf * lf + 1.0) * min_mass;
        let mut resonant = false;
        if !cols.is_empty() {
            let basis = DMatrix::from_fn(dd, cols.len(), |r, c| eig.eigenvectors[(r, cols[c])]);
            let restricted = basis.adjoint() * &block.t_u0 * &basis;
            let u0_min = hermitian_eigenvalues(&restricted).iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
            resonant = u0_min < 1e-10 * m0;
            min_abs = min_abs.min(u0_min);
        }
        rows.push(InvertibilityRow { l, min_abs_eigenvalue: min_abs, resonant });
    }
    let lower_bound = rows.iter().map(|r| r.min_abs_eigenvalue).fold(f64::INFINITY, f64::min);
    InvertibilityReport { rows, lower_bound }
}

/// As [`invertibility_table`], failing when a resonant mode survives the
/// projection.
pub fn invertibility_report(p: &ActionParams, lmax: usize) -> Result<InvertibilityReport> {
    let report = invertibility_table(p, lmax);
    if let Some(r) = report.rows.iter().find(|r| r.resonant) {
        return Err(Error::Configuration(format!(
            "mode l = {} of the pair block is resonant inside the fixed-point space of case {}",
            r.l,
            p.setup.case.label()
        )));
    }
    Ok(report)
}
