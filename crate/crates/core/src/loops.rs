//! Truncated Fourier loops `x(s) = Σ_{|ℓ|≤L} x̂_ℓ e^{iℓs}` in `E^N`, their
//! Sobolev geometry, Fourier-diagonal operators and the discrete symmetry
//! actions.
//!
//! A [`LoopState`] stores only the modes `ℓ = 0..=L`; negative modes are the
//! complex conjugates, so every loop is real by construction. Each mode is a
//! vector in `C^D` with `D = 2d·N`: the first `2d` entries are the pair block
//! `u₀`, followed by one block of `2d` entries per body `u_1..u_n`.

use std::f64::consts::PI;
use std::ops::Range;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry;
use crate::model::SymmetryCase;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "LoopWire", try_from = "LoopWire")]
pub struct LoopState {
    l: usize,
    d: usize,
    n_blocks: usize,
    coeffs: Vec<Complex64>,
}

/// Serialized form: all modes `ℓ = -L..=L`, one row of `D` entries each.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct LoopWire {
    #[serde(rename = "L")]
    l: usize,
    d: usize,
    #[serde(rename = "N")]
    n_blocks: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl From<LoopState> for LoopWire {
    fn from(x: LoopState) -> Self {
        let rows: Vec<Vec<Complex64>> = (-(x.l as i64)..=x.l as i64).map(|l| x.coefficient(l)).collect();
        Self {
            l: x.l,
            d: x.d,
            n_blocks: x.n_blocks,
            re: rows.iter().map(|r| r.iter().map(|z| z.re).collect()).collect(),
            im: rows.iter().map(|r| r.iter().map(|z| z.im).collect()).collect(),
        }
    }
}

impl TryFrom<LoopWire> for LoopState {
    type Error = Error;

    fn try_from(w: LoopWire) -> Result<Self> {
        let dim = 2 * w.d * w.n_blocks;
        let rows = 2 * w.l + 1;
        if w.d == 0 || w.n_blocks == 0 || w.re.len() != rows || w.im.len() != rows {
            return Err(Error::Parse(format!("expected {rows} coefficient rows")));
        }
        if w.re.iter().chain(&w.im).any(|r| r.len() != dim) {
            return Err(Error::Parse(format!("coefficient rows must have {dim} entries")));
        }
        let mut x = LoopState::zeros(w.l, w.d, w.n_blocks);
        for l in 0..=w.l {
            let pos = w.l + l;
            let neg = w.l - l;
            for i in 0..dim {
                let a = Complex64::new(w.re[pos][i], w.im[pos][i]);
                let b = Complex64::new(w.re[neg][i], -w.im[neg][i]);
                if (a - b).norm() > 1e-12 * (1.0 + a.norm()) {
                    return Err(Error::Parse(format!("coefficients of mode ±{l} are not conjugate")));
                }
                x.coeffs[l * dim + i] = if l == 0 { Complex64::new(a.re, 0.0) } else { a };
            }
        }
        Ok(x)
    }
}

/// Which half of the loop an operator acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    /// The pair block `u₀`.
    U0,
    /// The bodies `u_1..u_n`.
    U,
}

impl LoopState {
    pub fn zeros(l: usize, d: usize, n_blocks: usize) -> Self {
        Self { l, d, n_blocks, coeffs: vec![ZERO; (l + 1) * 2 * d * n_blocks] }
    }

    /// Constant loop with mean `values` (length `D`).
    pub fn constant(l: usize, d: usize, values: &[f64]) -> Result<Self> {
        if values.is_empty() || values.len() % (2 * d) != 0 {
            return Err(Error::Structural(format!("{} values do not split into R^{}", values.len(), 2 * d)));
        }
        let mut x = Self::zeros(l, d, values.len() / (2 * d));
        for (c, v) in x.coeffs.iter_mut().zip(values) {
            *c = Complex64::new(*v, 0.0);
        }
        Ok(x)
    }

    /// Build from modes `0..=L`, each of length `D`. The imaginary part of
    /// mode 0 is discarded.
    pub fn from_modes(d: usize, n_blocks: usize, modes: Vec<Vec<Complex64>>) -> Result<Self> {
        let dim = 2 * d * n_blocks;
        if modes.is_empty() || modes.iter().any(|m| m.len() != dim) {
            return Err(Error::Structural("mode vectors have the wrong length".into()));
        }
        let l = modes.len() - 1;
        let mut x = Self { l, d, n_blocks, coeffs: modes.concat() };
        x.enforce_reality();
        Ok(x)
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of blocks `N = n + 1`.
    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    /// `D = 2d·N`.
    pub fn dim(&self) -> usize {
        2 * self.d * self.n_blocks
    }

    pub fn mode(&self, l: usize) -> &[Complex64] {
        let dim = self.dim();
        &self.coeffs[l * dim..(l + 1) * dim]
    }

    pub fn mode_mut(&mut self, l: usize) -> &mut [Complex64] {
        let dim = self.dim();
        &mut self.coeffs[l * dim..(l + 1) * dim]
    }

    /// `x̂_ℓ` for any `|ℓ| ≤ L`.
    pub fn coefficient(&self, l: i64) -> Vec<Complex64> {
        let m = self.mode(l.unsigned_abs() as usize);
        if l >= 0 {
            m.to_vec()
        } else {
            m.iter().map(|z| z.conj()).collect()
        }
    }

    /// Index range of block `b` (0 is `u₀`) inside a mode vector.
    pub fn block_range(&self, b: usize) -> Range<usize> {
        2 * self.d * b..2 * self.d * (b + 1)
    }

    pub fn range_of(&self, block: Block) -> Range<usize> {
        match block {
            Block::U0 => 0..2 * self.d,
            Block::U => 2 * self.d..self.dim(),
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        self.mode(0).iter().map(|z| z.re).collect()
    }

    pub fn enforce_reality(&mut self) {
        let dim = self.dim();
        for z in &mut self.coeffs[..dim] {
            z.im = 0.0;
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.l == other.l && self.d == other.d && self.n_blocks == other.n_blocks
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Structural("loops have different shapes".into()))
        }
    }

    /// `self += a · other`.
    pub fn axpy(&mut self, a: f64, other: &Self) {
        assert!(self.same_shape(other), "loop shape mismatch");
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += y * a;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for x in &mut self.coeffs {
            *x *= a;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut y = self.clone();
        y.scale(a);
        y
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut y = self.clone();
        y.axpy(1.0, other);
        y
    }

    pub fn minus(&self, other: &Self) -> Self {
        let mut y = self.clone();
        y.axpy(-1.0, other);
        y
    }

    /// Sobolev inner product `Σ_{|ℓ|≤L} (ℓ²+1)^s Re⟨x̂_ℓ, ŷ_ℓ⟩`.
    pub fn inner(&self, other: &Self, s: f64) -> f64 {
        assert!(self.same_shape(other), "loop shape mismatch");
        let dim = self.dim();
        let mut total = 0.0;
        for l in 0..=self.l {
            let w = if l == 0 { 1.0 } else { 2.0 * ((l * l + 1) as f64).powf(s) };
            let a = &self.coeffs[l * dim..(l + 1) * dim];
            let b = &other.coeffs[l * dim..(l + 1) * dim];
            let dotp: f64 = a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum();
            total += w * dotp;
        }
        total
    }

    pub fn h1_inner(&self, other: &Self) -> f64 {
        self.inner(other, 1.0)
    }

    pub fn h1_norm(&self) -> f64 {
        self.inner(self, 1.0).sqrt()
    }

    /// Largest coefficient modulus, over all modes and entries.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Value at `s`.
    pub fn eval(&self, s: f64) -> Vec<f64> {
        self.eval_derivative(s, 0)
    }

    /// `∂_s^order x(s)`.
    pub fn eval_derivative(&self, s: f64, order: u32) -> Vec<f64> {
        let dim = self.dim();
        let mut out: Vec<f64> = if order == 0 { self.mean() } else { vec![0.0; dim] };
        let step = Complex64::from_polar(1.0, s);
        let mut phase = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        for l in 1..=self.l {
            phase *= step;
            let factor = (i * l as f64).powu(order) * phase * 2.0;
            for (o, z) in out.iter_mut().zip(self.mode(l)) {
                *o += (z * factor).re;
            }
        }
        out
    }

    /// Number of real unknowns: `D` for the mean plus `2D` per mode.
    pub fn real_dim(&self) -> usize {
        self.dim() * (2 * self.l + 1)
    }

    /// Coordinates in which the Euclidean inner product is the `H¹` inner
    /// product.
    pub fn to_h1_coords(&self) -> Vec<f64> {
        let dim = self.dim();
        let mut out = Vec::with_capacity(self.real_dim());
        out.extend(self.mode(0).iter().map(|z| z.re));
        for l in 1..=self.l {
            let w = (2.0 * (l * l + 1) as f64).sqrt();
            let m = &self.coeffs[l * dim..(l + 1) * dim];
            out.extend(m.iter().map(|z| w * z.re));
            out.extend(m.iter().map(|z| w * z.im));
        }
        out
    }

    pub fn from_h1_coords(l: usize, d: usize, n_blocks: usize, v: &[f64]) -> Self {
        let mut x = Self::zeros(l, d, n_blocks);
        let dim = x.dim();
        assert_eq!(v.len(), x.real_dim());
        for i in 0..dim {
            x.coeffs[i] = Complex64::new(v[i], 0.0);
        }
        for ll in 1..=l {
            let w = 1.0 / (2.0 * (ll * ll + 1) as f64).sqrt();
            let base = dim + (ll - 1) * 2 * dim;
            for i in 0..dim {
                x.coeffs[ll * dim + i] = Complex64::new(v[base + i] * w, v[base + dim + i] * w);
            }
        }
        x
    }

    /// Same loop with truncation `l`, padding with zeros or dropping modes.
    pub fn with_truncation(&self, l: usize) -> Self {
        let mut x = Self::zeros(l, self.d, self.n_blocks);
        let keep = (l.min(self.l) + 1) * self.dim();
        x.coeffs[..keep].copy_from_slice(&self.coeffs[..keep]);
        x
    }

    /// `H¹` mass in modes `|ℓ| > cut`, relative to the whole.
    pub fn tail_fraction(&self, cut: usize) -> f64 {
        let total = self.h1_norm();
        if total == 0.0 || cut >= self.l {
            return 0.0;
        }
        let mut tail = self.clone();
        let dim = self.dim();
        for z in &mut tail.coeffs[..(cut + 1) * dim] {
            *z = ZERO;
        }
        tail.h1_norm() / total
    }
}

/// Uniform grid of `K` nodes `s_k = 2πk/K` with cached FFT plans.
#[derive(Clone)]
pub struct SpectralGrid {
    k: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid").field("k", &self.k).finish()
    }
}

impl SpectralGrid {
    pub fn new(k: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { k, fwd: planner.plan_fft_forward(k), inv: planner.plan_fft_inverse(k) }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn node(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.k as f64
    }

    fn check(&self, l: usize) -> Result<()> {
        if self.k < 2 * l + 2 {
            return Err(Error::Resolution(format!(
                "{} nodes cannot resolve {} modes without aliasing (need K >= {})",
                self.k,
                l,
                2 * l + 2
            )));
        }
        Ok(())
    }

    /// Samples as a row-major `K x D` array.
    pub fn sample_flat(&self, x: &LoopState) -> Result<Vec<f64>> {
        self.check(x.l)?;
        let (k, dim) = (self.k, x.dim());
        let mut out = vec![0.0; k * dim];
        let mut buf = vec![ZERO; k];
        let i_unit = Complex64::new(0.0, 1.0);
        let mut c = 0;
        while c < dim {
            let pair = c + 1 < dim;
            buf.iter_mut().for_each(|z| *z = ZERO);
            for l in 0..=x.l {
                let a = x.coeffs[l * dim + c];
                let b = if pair { x.coeffs[l * dim + c + 1] } else { ZERO };
                if l == 0 {
                    buf[0] = Complex64::new(a.re, b.re);
                } else {
                    buf[l] += a + i_unit * b;
                    buf[k - l] += a.conj() + i_unit * b.conj();
                }
            }
            self.inv.process(&mut buf);
            for (node, z) in buf.iter().enumerate() {
                out[node * dim + c] = z.re;
                if pair {
                    out[node * dim + c + 1] = z.im;
                }
            }
            c += 2;
        }
        Ok(out)
    }

    /// Discrete Fourier coefficients `(1/K) Σ_k f_k e^{-iℓ s_k}` for
    /// `ℓ = 0..=l` of real samples given as a row-major `K x D` array.
    pub fn transform_flat(&self, f: &[f64], dim: usize, l: usize) -> Result<Vec<Complex64>> {
        self.check(l)?;
        let k = self.k;
        if f.len() != k * dim {
            return Err(Error::Structural(format!("expected {} samples, got {}", k * dim, f.len())));
        }
        let mut out = vec![ZERO; (l + 1) * dim];
        let mut buf = vec![ZERO; k];
        let inv_k = 1.0 / k as f64;
        let mut c = 0;
        while c < dim {
            let pair = c + 1 < dim;
            for node in 0..k {
                let b = if pair { f[node * dim + c + 1] } else { 0.0 };
                buf[node] = Complex64::new(f[node * dim + c], b);
            }
            self.fwd.process(&mut buf);
            for ll in 0..=l {
                let z = buf[ll];
                let zc = buf[(k - ll) % k].conj();
                out[ll * dim + c] = (z + zc) * 0.5 * inv_k;
                if pair {
                    out[ll * dim + c + 1] = (z - zc) * Complex64::new(0.0, -0.5) * inv_k;
                }
            }
            c += 2;
        }
        for z in &mut out[..dim] {
            z.im = 0.0;
        }
        Ok(out)
    }
}

/// Values at `s_k = 2πk/K`, one vector in `E^N` per node.
///
/// ```
/// use cabling::loops::{sample, LoopState};
/// let x = LoopState::constant(4, 1, &[1.0, 2.0, 3.0, 4.0]).unwrap();
/// let s = sample(&x, 10).unwrap();
/// assert!(s.iter().all(|p| (p[2] - 3.0).abs() < 1e-15));
/// ```
pub fn sample(x: &LoopState, k: usize) -> Result<Vec<Vec<f64>>> {
    let flat = SpectralGrid::new(k).sample_flat(x)?;
    Ok(flat.chunks_exact(x.dim()).map(|c| c.to_vec()).collect())
}

/// Inverse of [`sample`] for band-limited data.
pub fn from_samples(samples: &[Vec<f64>], l: usize, d: usize) -> Result<LoopState> {
    let dim = samples.first().map(|s| s.len()).unwrap_or(0);
    if dim == 0 || dim % (2 * d) != 0 || samples.iter().any(|s| s.len() != dim) {
        return Err(Error::Structural("samples do not form vectors in E^N".into()));
    }
    let grid = SpectralGrid::new(samples.len());
    let coeffs = grid.transform_flat(&samples.concat(), dim, l)?;
    Ok(LoopState { l, d, n_blocks: dim / (2 * d), coeffs })
}

/// `(Σ (ℓ²+1)^s ‖x̂_ℓ‖²)^{1/2}`.
pub fn sobolev_norm(x: &LoopState, s: f64) -> f64 {
    x.inner(x, s).sqrt()
}

/// Mode-wise division by `ℓ² + 1`.
pub fn riesz_apply(x: &LoopState) -> LoopState {
    let mut y = x.clone();
    for l in 1..=x.l {
        let w = 1.0 / (l * l + 1) as f64;
        y.mode_mut(l).iter_mut().for_each(|z| *z *= w);
    }
    y
}

/// `scale · (ℓ²+1)^{-1} (iℓν + J)² x̂_ℓ` on the chosen block; the other block
/// of the result is zero. Callers pass `ν/ω` as `nu` for the pair block.
pub fn apply_rotating_derivative_sq(x: &LoopState, nu: f64, block: Block, scale: f64) -> LoopState {
    let mut y = LoopState::zeros(x.l, x.d, x.n_blocks);
    let range = x.range_of(block);
    let i = Complex64::new(0.0, 1.0);
    for l in 0..=x.l {
        let lnu = l as f64 * nu;
        let w = scale / (l * l + 1) as f64;
        let src = &x.mode(l)[range.clone()];
        let jsrc = geometry::j_cvec(src);
        let dst = &mut y.mode_mut(l)[range.clone()];
        for ((o, v), jv) in dst.iter_mut().zip(src).zip(&jsrc) {
            *o = (v * (-lnu * lnu - 1.0) + jv * (i * 2.0 * lnu)) * w;
        }
    }
    y
}

/// Split into the mean `ξ = x̂₀` and the zero-mean remainder `η`.
pub fn mean_projection(x: &LoopState) -> (Vec<f64>, LoopState) {
    let xi = x.mean();
    let mut eta = x.clone();
    eta.mode_mut(0).iter_mut().for_each(|z| *z = ZERO);
    (xi, eta)
}

/// Generator of the discrete symmetry group acting on loops.
#[derive(Clone, Debug, PartialEq)]
pub enum SymmetryAction {
    Trivial,
    /// `(θ, σ)x(s) = (u₀(s+θ), e^{-θJ} u_{σ(b)}(s+θ))` with `θ = 2π/m`.
    Cyclic { m: usize, sigma: Vec<usize> },
    /// `ζx(s) = (-R u₀(s+π), R u(s+π))`, `R = (-I₂) ⊕ I`.
    Reflection,
}

impl SymmetryAction {
    pub fn from_case(case: &SymmetryCase) -> Self {
        match case {
            SymmetryCase::C1 => SymmetryAction::Trivial,
            SymmetryCase::C2 { m, sigma } => SymmetryAction::Cyclic { m: *m, sigma: sigma.clone() },
            SymmetryCase::C3 => SymmetryAction::Reflection,
        }
    }

    pub fn order(&self) -> usize {
        match self {
            SymmetryAction::Trivial => 1,
            SymmetryAction::Cyclic { m, .. } => *m,
            SymmetryAction::Reflection => 2,
        }
    }

    fn check(&self, d: usize, n_blocks: usize) -> Result<()> {
        match self {
            SymmetryAction::Cyclic { sigma, .. } if sigma.len() + 1 != n_blocks => Err(Error::Structural(
                format!("permutation of {} letters acting on {} bodies", sigma.len(), n_blocks - 1),
            )),
            SymmetryAction::Reflection if d < 2 => {
                Err(Error::Structural("the reflection action needs d >= 2".into()))
            }
            _ => Ok(()),
        }
    }

    /// Generator applied to mode `ℓ` (complex-linear in `v`).
    pub(crate) fn apply_mode(&self, l: usize, v: &[Complex64], d: usize, out: &mut [Complex64]) {
        let dd = 2 * d;
        match self {
            SymmetryAction::Trivial => out.copy_from_slice(v),
            SymmetryAction::Cyclic { m, sigma } => {
                let theta = 2.0 * PI / *m as f64;
                let phase = Complex64::from_polar(1.0, l as f64 * theta);
                for i in 0..dd {
                    out[i] = v[i] * phase;
                }
                let (s, c) = (-theta).sin_cos();
                for (b, &sb) in sigma.iter().enumerate() {
                    let src = &v[dd * (sb + 1)..dd * (sb + 2)];
                    let dst = &mut out[dd * (b + 1)..dd * (b + 2)];
                    for p in 0..d {
                        let (x, y) = (src[2 * p], src[2 * p + 1]);
                        dst[2 * p] = (x * c - y * s) * phase;
                        dst[2 * p + 1] = (x * s + y * c) * phase;
                    }
                }
            }
            SymmetryAction::Reflection => {
                let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
                for (i, (o, z)) in out.iter_mut().zip(v).enumerate() {
                    let in_u0 = i < dd;
                    let first_plane = i % dd < 2;
                    let f = if in_u0 == first_plane { 1.0 } else { -1.0 };
                    *o = z * (sign * f);
                }
            }
        }
    }

    /// Projector onto the fixed vectors of mode `ℓ`, as a `D x D` matrix.
    pub fn mode_projector(&self, l: usize, d: usize, n_blocks: usize) -> DMatrix<Complex64> {
        let dim = 2 * d * n_blocks;
        let mut p = DMatrix::zeros(dim, dim);
        let mut e = vec![ZERO; dim];
        for c in 0..dim {
            e.iter_mut().for_each(|z| *z = ZERO);
            e[c] = Complex64::new(1.0, 0.0);
            let col = self.average_mode(l, &e, d);
            for r in 0..dim {
                p[(r, c)] = col[r];
            }
        }
        p
    }

    fn average_mode(&self, l: usize, v: &[Complex64], d: usize) -> Vec<Complex64> {
        let order = self.order();
        let mut acc = v.to_vec();
        let mut cur = v.to_vec();
        let mut next = vec![ZERO; v.len()];
        for _ in 1..order {
            self.apply_mode(l, &cur, d, &mut next);
            std::mem::swap(&mut cur, &mut next);
            acc.iter_mut().zip(&cur).for_each(|(a, c)| *a += c);
        }
        let w = 1.0 / order as f64;
        acc.iter_mut().for_each(|a| *a *= w);
        acc
    }
}

/// Apply the group generator.
pub fn gamma_act(x: &LoopState, action: &SymmetryAction) -> Result<LoopState> {
    action.check(x.d, x.n_blocks)?;
    let mut y = x.clone();
    let dim = x.dim();
    for l in 0..=x.l {
        action.apply_mode(l, &x.coeffs[l * dim..(l + 1) * dim], x.d, &mut y.coeffs[l * dim..(l + 1) * dim]);
    }
    Ok(y)
}

/// Group average `(1/|Γ|) Σ_γ γ·x`, the orthogonal projector onto the
/// fixed-point subspace.
pub fn gamma_project(x: &LoopState, action: &SymmetryAction) -> Result<LoopState> {
    action.check(x.d, x.n_blocks)?;
    if *action == SymmetryAction::Trivial {
        return Ok(x.clone());
    }
    let mut y = x.clone();
    let dim = x.dim();
    for l in 0..=x.l {
        let avg = action.average_mode(l, &x.coeffs[l * dim..(l + 1) * dim], x.d);
        y.coeffs[l * dim..(l + 1) * dim].copy_from_slice(&avg);
    }
    y.enforce_reality();
    Ok(y)
}

/// `‖γx - x‖_{H¹}` relative to `1 + ‖x‖_{H¹}`.
pub fn fixed_point_defect(x: &LoopState, action: &SymmetryAction) -> Result<f64> {
    let y = gamma_act(x, action)?;
    x.check_shape(&y)?;
    Ok(y.minus(x).h1_norm() / (1.0 + x.h1_norm()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_mode_sample() {
        let mut x = LoopState::zeros(3, 1, 1);
        x.mode_mut(1)[0] = c(0.7, -0.2);
        let s = sample(&x, 8).unwrap();
        assert!((s[0][0] - 1.4).abs() < 1e-15);
    }

    #[test]
    fn aliasing_is_refused() {
        let x = LoopState::zeros(4, 1, 1);
        assert!(matches!(sample(&x, 9), Err(Error::Resolution(_))));
    }

    #[test]
    fn sobolev_weights() {
        let x = LoopState::constant(2, 1, &[3.0, 4.0]).unwrap();
        assert!((sobolev_norm(&x, 1.0) - 5.0).abs() < 1e-15);
        let mut y = LoopState::zeros(2, 1, 1);
        y.mode_mut(1)[0] = c(1.0, 0.0);
        assert!((sobolev_norm(&y, 1.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn riesz_halves_first_mode() {
        let mut y = LoopState::zeros(2, 1, 1);
        y.mode_mut(0)[0] = c(1.0, 0.0);
        y.mode_mut(1)[1] = c(2.0, 1.0);
        let r = riesz_apply(&y);
        assert_eq!(r.mode(0)[0], c(1.0, 0.0));
        assert_eq!(r.mode(1)[1], c(1.0, 0.5));
    }

    #[test]
    fn constant_loop_derivative_is_minus_identity() {
        let x = LoopState::constant(3, 1, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = apply_rotating_derivative_sq(&x, 7.0, Block::U, 1.0);
        assert_eq!(y.mean(), vec![0.0, 0.0, -3.0, -4.0]);
    }
}
