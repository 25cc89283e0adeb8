//! Cabled ansatz, Newton–Krylov refinement inside the fixed-point space and
//! reconstruction of the inertial `N`-body motion.
//!
//! The Newton system is posed on the scaled residual. Writing `Π` for the
//! `H¹`-orthogonal projector that removes the tangents of the continuous
//! symmetries and `S` for the `ε`-scaling, each step solves
//!
//! ```text
//! P_Γ [ Π S Π Hess Π v + (I - Π) v ] = -Π S Π ∇A
//! ```
//!
//! with restarted GMRES, right-preconditioned by the mode-diagonal operator
//! obtained from the node-averaged potential Hessian.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::action::{invertibility_report, ActionParams, ActionPart, Functional};
use crate::braid::{self, BraidReport, Motion, TrackedPoint};
use crate::central::{self, Configuration};
use crate::error::{Error, Result};
use crate::geometry;
use crate::krylov;
use crate::loops::{self, Block, LoopState, SymmetryAction};
use crate::model::{MassSystem, SymmetryCase};
use crate::ode::Dopri5;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Replace body `body` of `cfg` by a pair whose first member carries the
/// fraction `split` of its mass.
///
/// Returns the normalised masses (`m₀ + m₁ = 1`) and the configuration in
/// the same units, cabled body first.
pub fn cable_configuration(cfg: &Configuration, body: usize, split: f64) -> Result<(MassSystem, Configuration)> {
    if !(split > 0.0 && split < 1.0) {
        return Err(Error::Parameter(format!("mass split {split} must lie in (0, 1)")));
    }
    let ordered = cfg.cabled_first(body)?;
    let mb = ordered.masses[0];
    let mut masses = vec![split * mb, (1.0 - split) * mb];
    masses.extend_from_slice(&ordered.masses[1..]);
    let ms = MassSystem::new(cfg.alpha, masses)?;
    let scale = ms.position_scale();
    let normalised = Configuration::new(
        cfg.alpha,
        cfg.d,
        ordered.masses.iter().map(|m| m * ms.rescale).collect(),
        ordered.points.iter().map(|p| p.iter().map(|x| x * scale).collect()).collect(),
    )?;
    Ok((ms, normalised))
}

/// Constant loop `x_a = (a₀, a)` after checking that `a` is a central
/// configuration compatible with the symmetry case.
pub fn build_ansatz(a: &Configuration, p: &ActionParams) -> Result<LoopState> {
    let dd = 2 * p.d();
    if a.d != p.d() || a.n() != p.ms.n() {
        return Err(Error::Configuration(format!(
            "configuration has {} bodies in R^{}, parameters expect {} in R^{dd}",
            a.n(),
            2 * a.d,
            p.ms.n()
        )));
    }
    for (b, (ma, mp)) in a.masses.iter().zip(&p.ms.big_m[1..]).enumerate() {
        if (ma - mp).abs() > 1e-10 * mp.abs().max(1.0) {
            return Err(Error::Configuration(format!(
                "mass of body {b} is {ma}, the mass system expects {mp}"
            )));
        }
    }
    let res = geometry::norm(&central::grad_v(a)?);
    if res > 1e-8 * (1.0 + a.radius()) {
        return Err(Error::Precondition(format!("not a central configuration (‖∇V‖ = {res:.3e})")));
    }
    let tol = 1e-12 * (1.0 + a.radius());
    match &p.setup.case {
        SymmetryCase::C1 => {}
        SymmetryCase::C2 { m, sigma } => {
            if geometry::norm(&a.points[0]) > tol {
                return Err(Error::Configuration("case c2 needs the cabled body at the origin".into()));
            }
            if !central::check_c2_masses(a, sigma) {
                return Err(Error::Configuration("case c2 needs M_b = M_σ(b)".into()));
            }
            if !central::check_c2_positions(a, sigma, *m) {
                return Err(Error::Configuration(format!(
                    "case c2 needs a_σ(b) = e^(2πJ/{m}) a_b"
                )));
            }
        }
        SymmetryCase::C3 => {
            if a.points.iter().any(|q| q[0].abs() > tol || q[1].abs() > tol) {
                return Err(Error::Configuration(
                    "case c3 needs every body orthogonal to the first complex plane".into(),
                ));
            }
        }
    }
    let mut values = p.a0.clone();
    for q in &a.points {
        values.extend_from_slice(q);
    }
    let x = LoopState::constant(p.l, p.d(), &values)?;
    let defect = loops::fixed_point_defect(&x, &p.symmetry())?;
    if defect > 1e-12 {
        return Err(Error::Configuration(format!("ansatz is not fixed by the symmetry group (defect {defect:.3e})")));
    }
    Ok(x)
}

/// Continuous symmetries whose tangents are removed from each Newton step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PinSet {
    /// Diagonal `U(d)` rotations.
    pub rotations: bool,
    /// The twisted time shift `s ↦ s + θ` with `u₀ ↦ e^{θJ}u₀`.
    pub time_shift: bool,
    /// Translations `e^{-ksJ}c` of all bodies, present when `1/ν = k ∈ Z`.
    pub translations: bool,
}

impl Default for PinSet {
    fn default() -> Self {
        Self { rotations: true, time_shift: true, translations: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineOptions {
    pub l: usize,
    pub max_iters: usize,
    /// Tolerance on the unscaled `H¹` gradient norm.
    pub gtol: f64,
    /// Step fraction multiplier after a rejected trial.
    pub step_shrink: f64,
    /// Smallest step fraction tried before giving up.
    pub min_step: f64,
    pub pins: PinSet,
    pub krylov_rtol: f64,
    pub krylov_restart: usize,
    pub krylov_max_iters: usize,
    /// Samples of the stored trajectory.
    pub trajectory_samples: usize,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            l: 64,
            max_iters: 40,
            gtol: 1e-9,
            step_shrink: 0.5,
            min_step: 1.0 / 256.0,
            pins: PinSet::default(),
            krylov_rtol: 1e-10,
            krylov_restart: 80,
            krylov_max_iters: 4000,
            trajectory_samples: 1024,
        }
    }
}

impl RefineOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.gtol > 0.0) {
            return Err(Error::Parameter("gtol must be positive".into()));
        }
        if self.l < 8 {
            return Err(Error::Parameter(format!("L = {} is below the minimum 8", self.l)));
        }
        if !(self.step_shrink > 0.0 && self.step_shrink < 1.0) || !(self.min_step > 0.0 && self.min_step <= 1.0) {
            return Err(Error::Parameter("damping schedule must shrink steps within (0, 1]".into()));
        }
        if self.krylov_restart == 0 || self.max_iters == 0 {
            return Err(Error::Parameter("iteration limits must be positive".into()));
        }
        Ok(())
    }
}

/// Raw tangents of the continuous symmetries at `x`.
pub fn symmetry_tangents(x: &LoopState, p: &ActionParams, pins: PinSet) -> Vec<LoopState> {
    let d = x.d();
    let dd = 2 * d;
    let mut out = Vec::new();
    if pins.rotations {
        for g in geometry::unitary_generators(d) {
            let mut t = x.clone();
            for l in 0..=x.l() {
                let v = geometry::apply_blockwise_c(&g, x.mode(l));
                t.mode_mut(l).copy_from_slice(&v);
            }
            out.push(t);
        }
    }
    if pins.time_shift {
        let mut t = x.clone();
        let r0 = x.range_of(Block::U0);
        for l in 0..=x.l() {
            let il = Complex64::new(0.0, l as f64);
            let src = x.mode(l).to_vec();
            let j0 = geometry::j_cvec(&src[r0.clone()]);
            for (i, z) in t.mode_mut(l).iter_mut().enumerate() {
                *z = src[i] * il + if r0.contains(&i) { j0[i] } else { ZERO };
            }
        }
        out.push(t);
    }
    if pins.translations {
        let k = 1.0 / p.setup.nu;
        let kr = k.round();
        if (k - kr).abs() < 1e-12 && kr != 0.0 && (kr.abs() as usize) <= x.l() {
            let mode = kr.abs() as usize;
            let sg = kr.signum();
            for c in 0..dd {
                let mut e = vec![0.0; dd];
                e[c] = 1.0;
                let je = geometry::j_vec(&e);
                let coef: Vec<Complex64> =
                    (0..dd).map(|i| Complex64::new(e[i] / 2.0, sg * je[i] / 2.0)).collect();
                let mut t = LoopState::zeros(x.l(), d, x.n_blocks());
                for b in 1..x.n_blocks() {
                    let r = x.block_range(b);
                    t.mode_mut(mode)[r].copy_from_slice(&coef);
                }
                out.push(t);
            }
        }
    }
    out
}

/// `Γ`-projected, `H¹`-orthonormal basis of the symmetry tangents.
pub fn pin_basis(x: &LoopState, p: &ActionParams, pins: PinSet) -> Result<Vec<LoopState>> {
    let action = p.symmetry();
    let raw = symmetry_tangents(x, p, pins)
        .iter()
        .map(|t| loops::gamma_project(t, &action))
        .collect::<Result<Vec<_>>>()?;
    Ok(geometry::orthonormalize(
        raw,
        1e-8,
        |a, b| a.h1_inner(b),
        |a, c, b| a.axpy(c, b),
        |a, c| a.scale(c),
    ))
}

fn project_out(v: &LoopState, basis: &[LoopState]) -> LoopState {
    let mut y = v.clone();
    for t in basis {
        let c = t.h1_inner(&y);
        y.axpy(-c, t);
    }
    y
}

/// Singular values of a preconditioner block are clamped from below at this
/// fraction of the largest one.
const SVD_FLOOR: f64 = 1e-8;

struct ModeInverse {
    u_h: DMatrix<Complex64>,
    inv_sigma: DVector<f64>,
    v: DMatrix<Complex64>,
}

/// Mode-diagonal approximation of the Newton operator.
struct Preconditioner {
    blocks: Vec<ModeInverse>,
}

impl Preconditioner {
    fn new(f: &Functional, hbar: &DMatrix<f64>, pins: &[LoopState], action: &SymmetryAction) -> Result<Self> {
        let p = f.params();
        let dim = p.dim();
        let dd = 2 * p.d();
        let mut blocks = Vec::with_capacity(p.l + 1);
        for l in 0..=p.l {
            let mut t = f.mode_operator(l, hbar, true);
            let (s0, s) = p.scaling(l);
            for r in 0..dim {
                let sr = if r < dd { s0 } else { s };
                for c in 0..dim {
                    t[(r, c)] *= sr;
                }
            }
            let w = (l * l + 1) as f64 * if l == 0 { 1.0 } else { 2.0 };
            for tp in pins {
                let v = tp.mode(l);
                for r in 0..dim {
                    for c in 0..dim {
                        t[(r, c)] += v[r] * v[c].conj() * w;
                    }
                }
            }
            let proj = action.mode_projector(l, p.d(), p.n_blocks());
            let eye = DMatrix::<Complex64>::identity(dim, dim);
            let b = &proj * t * &proj + (&eye - &proj);
            let svd = b.svd(true, true);
            let (u, v_t) = match (svd.u, svd.v_t) {
                (Some(u), Some(v_t)) => (u, v_t),
                _ => return Err(Error::Degenerate(format!("no factorisation of preconditioner block {l}"))),
            };
            let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
            if !(smax > 0.0 && smax.is_finite()) {
                return Err(Error::Degenerate(format!("preconditioner block {l} vanishes")));
            }
            let inv_sigma = svd.singular_values.map(|x| 1.0 / x.max(SVD_FLOOR * smax));
            blocks.push(ModeInverse { u_h: u.adjoint(), inv_sigma, v: v_t.adjoint() });
        }
        Ok(Self { blocks })
    }

    fn apply(&self, v: &LoopState) -> LoopState {
        let mut out = v.clone();
        for (l, b) in self.blocks.iter().enumerate() {
            let rhs = DVector::from_column_slice(v.mode(l));
            let mut y = &b.u_h * rhs;
            y.iter_mut().zip(b.inv_sigma.iter()).for_each(|(z, w)| *z *= *w);
            let sol = &b.v * y;
            out.mode_mut(l).copy_from_slice(sol.as_slice());
        }
        out.enforce_reality();
        out
    }
}

/// Scale-free summary of a refinement run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineStats {
    pub iterations: usize,
    pub krylov_iterations: usize,
    /// Largest `‖γx - x‖` seen over the iterates.
    pub max_fixed_point_defect: f64,
    pub pins: usize,
}

/// A refined critical point with its reconstructed motion.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrbitSolution {
    #[serde(rename = "loop")]
    pub loop_state: LoopState,
    pub params: ActionParams,
    pub grad_norm: f64,
    pub scaled_grad_norm: f64,
    /// Norm of the gradient left after removing the symmetry tangents.
    pub constrained_grad_norm: f64,
    pub action: f64,
    /// `‖x - x₀‖_{H¹}`.
    pub correction_norm: f64,
    pub stats: RefineStats,
    pub trajectory: Trajectory,
    pub diagnostics: Option<Diagnostics>,
}

impl OrbitSolution {
    pub fn reconstruction(&self) -> Reconstruction {
        Reconstruction { x: self.loop_state.clone(), params: self.params.clone() }
    }
}

/// Newton–Krylov refinement of `x0` to a critical point of the action in the
/// fixed-point space of the symmetry group.
pub fn refine(x0: &LoopState, p: &ActionParams, opts: &RefineOptions) -> Result<OrbitSolution> {
    opts.validate()?;
    if x0.l() != opts.l || p.l != opts.l {
        return Err(Error::Parameter(format!(
            "truncation mismatch: options L = {}, parameters L = {}, loop L = {}",
            opts.l,
            p.l,
            x0.l()
        )));
    }
    invertibility_report(p, p.l)?;
    let f = Functional::new(p.clone());
    let action = p.symmetry();
    let defect0 = loops::fixed_point_defect(x0, &action)?;
    if defect0 > 1e-10 {
        return Err(Error::Configuration(format!("initial loop is not symmetric (defect {defect0:.3e})")));
    }
    let mut x = loops::gamma_project(x0, &action)?;
    let mut g = f.gradient(&x, ActionPart::Full)?;
    let mut iterations = 0;
    let mut krylov_iterations = 0;
    let mut max_defect = defect0;
    let mut pins_used = 0;
    let (nd, nb, l) = (x.d(), x.n_blocks(), x.l());
    let scaled = |v: &LoopState| {
        let mut y = v.clone();
        f.apply_scaling(&mut y);
        y
    };
    loop {
        let gnorm = g.h1_norm();
        if gnorm <= opts.gtol {
            break;
        }
        if iterations >= opts.max_iters {
            return Err(Error::Convergence { iterations, residual: gnorm });
        }
        let pins = pin_basis(&x, p, opts.pins)?;
        pins_used = pins.len();
        let hess = f.pointwise_hessian(&x, ActionPart::Full)?;
        let pre = Preconditioner::new(&f, &hess.average(), &pins, &action)?;
        let pss = |v: &LoopState| project_out(&scaled(&project_out(v, &pins)), &pins);
        let rhs = pss(&loops::gamma_project(&g, &action)?).scaled(-1.0);
        let op = |c: &[f64]| -> Result<Vec<f64>> {
            let v = LoopState::from_h1_coords(l, nd, nb, c);
            let pv = project_out(&v, &pins);
            let hv = f.hessian_apply(&hess, &pv)?;
            let mut out = pss(&hv);
            out.axpy(1.0, &v);
            out.axpy(-1.0, &pv);
            Ok(loops::gamma_project(&out, &action)?.to_h1_coords())
        };
        let prec = |c: &[f64]| -> Result<Vec<f64>> {
            Ok(pre.apply(&LoopState::from_h1_coords(l, nd, nb, c)).to_h1_coords())
        };
        let sol = krylov::gmres(
            op,
            prec,
            &rhs.to_h1_coords(),
            opts.krylov_rtol,
            opts.krylov_restart,
            opts.krylov_max_iters,
        )?;
        krylov_iterations += sol.iterations;
        let step = loops::gamma_project(&LoopState::from_h1_coords(l, nd, nb, &sol.x), &action)?;
        let merit = scaled(&g).h1_norm();
        let mut lambda = 1.0;
        loop {
            let trial = x.plus(&step.scaled(lambda));
            if let Ok(gt) = f.gradient(&trial, ActionPart::Full) {
                let mt = scaled(&gt).h1_norm();
                if mt < (1.0 - 1e-4 * lambda) * merit || gt.h1_norm() <= opts.gtol {
                    x = trial;
                    g = gt;
                    break;
                }
            }
            lambda *= opts.step_shrink;
            if lambda < opts.min_step {
                return Err(Error::Convergence { iterations, residual: gnorm });
            }
        }
        max_defect = max_defect.max(loops::fixed_point_defect(&x, &action)?);
        iterations += 1;
    }
    let pins = pin_basis(&x, p, opts.pins)?;
    let constrained_grad_norm = project_out(&g, &pins).h1_norm();
    let grad_norm = g.h1_norm();
    let scaled_grad_norm = scaled(&g).h1_norm();
    let value = f.value(&x, ActionPart::Full)?;
    let correction_norm = x.minus(x0).h1_norm();
    let rec = Reconstruction { x: x.clone(), params: p.clone() };
    let window = p.setup.period().unwrap_or(2.0 * PI);
    let n = opts.trajectory_samples.max(2);
    let times: Vec<f64> = (0..n).map(|k| window * k as f64 / n as f64).collect();
    let trajectory = rec.trajectory(&times);
    Ok(OrbitSolution {
        loop_state: x,
        params: p.clone(),
        grad_norm,
        scaled_grad_norm,
        constrained_grad_norm,
        action: value,
        correction_norm,
        stats: RefineStats { iterations, krylov_iterations, max_fixed_point_defect: max_defect, pins: pins_used },
        trajectory,
        diagnostics: None,
    })
}

/// Closed-form map from a loop to the inertial motion of all `N` bodies.
///
/// Bodies are ordered as the two pair members followed by bodies `2..n`:
/// `q_b(t) = e^{tJ}u_b(νt)`, the pair relative vector is
/// `Q₀(t) = ε e^{tωJ}u₀(νt)` and `q_j = Q₁ - μ_j Q₀`.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    x: LoopState,
    params: ActionParams,
}

impl Reconstruction {
    pub fn new(x: LoopState, params: ActionParams) -> Result<Self> {
        if x.d() != params.d() || x.n_blocks() != params.n_blocks() {
            return Err(Error::Structural("loop does not match the parameters".into()));
        }
        Ok(Self { x, params })
    }

    pub fn loop_state(&self) -> &LoopState {
        &self.x
    }

    pub fn params(&self) -> &ActionParams {
        &self.params
    }

    pub fn period(&self) -> Option<f64> {
        self.params.setup.period()
    }

    /// `(q, q̇, q̈)` at time `t`, or only the first `order + 1` of them.
    fn jet(&self, t: f64, order: u32) -> [Vec<f64>; 3] {
        let setup = &self.params.setup;
        let (eps, omega, nu) = (setup.epsilon, setup.omega, setup.nu);
        let dd = 2 * self.x.d();
        let s = nu * t;
        let derivs: Vec<Vec<f64>> = (0..=order).map(|k| self.x.eval_derivative(s, k)).collect();
        let zero = vec![0.0; dd];
        let get = |k: usize, b: usize| -> &[f64] {
            if k < derivs.len() {
                &derivs[k][b * dd..(b + 1) * dd]
            } else {
                &zero
            }
        };
        // loop-frame jets before rotation: value, rate, acceleration
        let frame = |b: usize, speed: f64| -> [Vec<f64>; 3] {
            let (u, du, ddu) = (get(0, b), get(1, b), get(2, b));
            let ju = geometry::j_vec(u);
            let jdu = geometry::j_vec(du);
            let v: Vec<f64> = (0..dd).map(|i| speed * ju[i] + nu * du[i]).collect();
            let a: Vec<f64> =
                (0..dd).map(|i| -speed * speed * u[i] + 2.0 * speed * nu * jdu[i] + nu * nu * ddu[i]).collect();
            [u.to_vec(), v, a]
        };
        let nbody = self.params.ms.n_bodies();
        let mut out = [vec![0.0; nbody * dd], vec![0.0; nbody * dd], vec![0.0; nbody * dd]];
        let pair = frame(0, omega);
        let pair: Vec<Vec<f64>> = pair.iter().map(|v| geometry::rotate(v, omega * t)).collect();
        for b in 1..self.x.n_blocks() {
            let fr = frame(b, 1.0);
            for k in 0..=order.min(2) as usize {
                let w = geometry::rotate(&fr[k], t);
                if b == 1 {
                    for (j, mu) in self.params.ms.mu.iter().enumerate() {
                        for i in 0..dd {
                            out[k][j * dd + i] = w[i] - mu * eps * pair[k][i];
                        }
                    }
                } else {
                    out[k][b * dd..(b + 1) * dd].copy_from_slice(&w);
                }
            }
        }
        out
    }

    pub fn positions(&self, t: f64) -> Vec<f64> {
        let [q, _, _] = self.jet(t, 0);
        q
    }

    pub fn velocities(&self, t: f64) -> Vec<f64> {
        let [_, v, _] = self.jet(t, 1);
        v
    }

    pub fn accelerations(&self, t: f64) -> Vec<f64> {
        let [_, _, a] = self.jet(t, 2);
        a
    }

    pub fn trajectory(&self, times: &[f64]) -> Trajectory {
        Trajectory {
            d: self.x.d(),
            masses: self.params.ms.m.clone(),
            times: times.to_vec(),
            positions: times.iter().map(|&t| self.positions(t)).collect(),
        }
    }
}

impl Motion for Reconstruction {
    fn n_bodies(&self) -> usize {
        self.params.ms.n_bodies()
    }

    fn d(&self) -> usize {
        self.x.d()
    }

    fn masses(&self) -> &[f64] {
        &self.params.ms.m
    }

    fn position(&self, t: f64) -> Vec<f64> {
        self.positions(t)
    }

    fn velocity(&self, t: f64) -> Vec<f64> {
        self.velocities(t)
    }
}

/// Sampled positions of all bodies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub d: usize,
    pub masses: Vec<f64>,
    pub times: Vec<f64>,
    /// One flat row of `N·2d` coordinates per time.
    pub positions: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn n_bodies(&self) -> usize {
        self.masses.len()
    }

    /// Rows `t,body,x,y[,z,w]`.
    pub fn to_csv(&self) -> String {
        let dd = 2 * self.d;
        let names: Vec<String> = match dd {
            2 => vec!["x".into(), "y".into()],
            4 => vec!["x".into(), "y".into(), "z".into(), "w".into()],
            _ => (0..dd).map(|i| format!("c{i}")).collect(),
        };
        let mut out = format!("t,body,{}\n", names.join(","));
        for (t, row) in self.times.iter().zip(&self.positions) {
            for (b, q) in row.chunks_exact(dd).enumerate() {
                let coords: Vec<String> = q.iter().map(|v| format!("{v:.17e}")).collect();
                out.push_str(&format!("{t:.17e},{b},{}\n", coords.join(",")));
            }
        }
        out
    }
}

/// `q(t)` for each time in `tgrid`.
pub fn reconstruct_trajectory(x: &LoopState, p: &ActionParams, tgrid: &[f64]) -> Result<Trajectory> {
    Ok(Reconstruction::new(x.clone(), p.clone())?.trajectory(tgrid))
}

/// Newtonian forces `F_i = Σ_k m_i m_k ‖q_k - q_i‖^{-α-1}(q_k - q_i)`.
pub fn forces(q: &[f64], masses: &[f64], alpha: f64, dd: usize) -> Result<Vec<f64>> {
    let n = masses.len();
    let mut f = vec![0.0; q.len()];
    for i in 0..n {
        for k in i + 1..n {
            let diff: Vec<f64> = (0..dd).map(|c| q[k * dd + c] - q[i * dd + c]).collect();
            let r = geometry::norm(&diff);
            if !(r > 0.0) {
                return Err(Error::Domain(format!("bodies {i} and {k} collide")));
            }
            let w = masses[i] * masses[k] * r.powf(-alpha - 1.0);
            for c in 0..dd {
                f[i * dd + c] += w * diff[c];
                f[k * dd + c] -= w * diff[c];
            }
        }
    }
    Ok(f)
}

/// Residuals of Newton's equations along the reconstructed motion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeResidual {
    /// `max |m q̈ - F| / max |F|` over the samples.
    pub spectral: f64,
    /// Largest position mismatch between an independent integration from
    /// `t = 0` and the reconstruction, at `T/2` and at `T`.
    pub rk_half: f64,
    pub rk_full: f64,
    pub force_scale: f64,
}

/// Both residual checks over `[0, T]`. Needs a rational pair frequency.
pub fn ode_residual(x: &LoopState, p: &ActionParams, samples: usize) -> Result<OdeResidual> {
    let period = p
        .setup
        .period()
        .ok_or_else(|| Error::Precondition("the ODE check needs a rational pair frequency".into()))?;
    let rec = Reconstruction::new(x.clone(), p.clone())?;
    let dd = 2 * p.d();
    let masses = &p.ms.m;
    let alpha = p.ms.alpha;
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for k in 0..samples.max(1) {
        let t = period * k as f64 / samples.max(1) as f64;
        let [q, _, a] = rec.jet(t, 2);
        let f = forces(&q, masses, alpha, dd)?;
        for (i, (ai, fi)) in a.iter().zip(&f).enumerate() {
            worst = worst.max((masses[i / dd] * ai - fi).abs());
            scale = scale.max(fi.abs());
        }
    }
    let mut y0 = rec.positions(0.0);
    y0.extend(rec.velocities(0.0));
    let nq = y0.len() / 2;
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        dy[..nq].copy_from_slice(&y[nq..]);
        match forces(&y[..nq], masses, alpha, dd) {
            Ok(f) => {
                for i in 0..nq {
                    dy[nq + i] = f[i] / masses[i / dd];
                }
            }
            Err(_) => dy[nq..].iter_mut().for_each(|v| *v = f64::NAN),
        }
    };
    let states = Dopri5::default().integrate(rhs, 0.0, &y0, &[period / 2.0, period])?;
    let mismatch = |y: &[f64], t: f64| {
        let q = rec.positions(t);
        q.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let rk_half = mismatch(&states[0], period / 2.0);
    let rk_full = mismatch(&states[1], period);
    Ok(OdeResidual {
        spectral: worst / scale.max(f64::MIN_POSITIVE),
        rk_half: if rk_half.is_nan() { f64::INFINITY } else { rk_half },
        rk_full: if rk_full.is_nan() { f64::INFINITY } else { rk_full },
        force_scale: scale,
    })
}

/// Pass/fail thresholds for [`certify`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub gtol: f64,
    pub ode: f64,
    pub spectral: f64,
    pub periodicity: f64,
    pub ode_samples: usize,
    pub braid_axis: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { gtol: 1e-9, ode: 1e-6, spectral: 1e-7, periodicity: 1e-9, ode_samples: 2048, braid_axis: 0.1234 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub ode: OdeResidual,
    pub periodicity: f64,
    pub braid: Option<BraidReport>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl Diagnostics {
    pub fn failed(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }
}

/// Points whose winding about the origin is well defined: the pair centre
/// unless the cabled body sits at the origin, and every other body away from
/// it.
pub fn tracked_points(x: &LoopState) -> Vec<TrackedPoint> {
    let mean = x.mean();
    let dd = 2 * x.d();
    let scale = 1.0 + geometry::norm(&mean);
    let mut out = Vec::new();
    for b in 1..x.n_blocks() {
        if geometry::norm(&mean[b * dd..(b + 1) * dd]) > 1e-8 * scale {
            out.push(if b == 1 { TrackedPoint::PairCenter } else { TrackedPoint::Body(b) });
        }
    }
    out
}

/// Run every certification check on a refined solution.
pub fn certify(sol: &OrbitSolution, th: &Thresholds) -> Result<Diagnostics> {
    let p = &sol.params;
    let period = p
        .setup
        .period()
        .ok_or_else(|| Error::Precondition("certification needs a rational pair frequency".into()))?;
    let (pp, qq) = p.setup.pq.unwrap_or((0, 1));
    let ode = ode_residual(&sol.loop_state, p, th.ode_samples)?;
    let rec = sol.reconstruction();
    let radius = sol.loop_state.mean().chunks_exact(2 * p.d()).skip(1).map(geometry::norm).fold(0.0, f64::max);
    let periodicity = braid::periodicity_error(&rec, period);
    let check = |name: &str, value: f64, threshold: f64| Check {
        name: name.into(),
        value,
        threshold,
        passed: value <= threshold,
    };
    let mut checks = vec![
        check("grad_norm", sol.grad_norm, th.gtol),
        check("ode_spectral", ode.spectral, th.spectral),
        check("ode_rk", ode.rk_half.max(ode.rk_full), th.ode),
        check("periodicity", periodicity, th.periodicity * (1.0 + radius)),
    ];
    let mut braid = None;
    if p.d() == 1 {
        let tracked = tracked_points(&sol.loop_state);
        let samples = 4096.max(32 * pp as usize);
        let report = braid::braid_report(&rec, period, &tracked, th.braid_axis, samples)?;
        let expected_pair = p.setup.sign.value() as i64 * pp as i64;
        let pair_err = (report.pair_winding - expected_pair).abs() as f64;
        checks.push(check("pair_winding", pair_err, 0.0));
        let center_err = report.center_windings.iter().map(|&w| (w - qq as i64).abs()).max().unwrap_or(0) as f64;
        checks.push(check("center_windings", center_err, 0.0));
        checks.push(check("pure_braid", if report.pure { 0.0 } else { 1.0 }, 0.0));
        braid = Some(report);
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(Diagnostics { ode, periodicity, braid, checks, passed })
}

/// Distance from `x` to the closest image of `xa` under independent
/// rotations of the pair block and of the bodies (for `d = 1`; otherwise
/// the plain `H¹` distance).
pub fn aligned_distance(x: &LoopState, xa: &LoopState) -> f64 {
    if x.d() != 1 {
        return x.minus(xa).h1_norm();
    }
    let mut y = xa.clone();
    for block in [Block::U0, Block::U] {
        let r = xa.range_of(block);
        let mut masked = LoopState::zeros(xa.l(), 1, xa.n_blocks());
        let mut jmasked = masked.clone();
        for l in 0..=xa.l() {
            let src = &xa.mode(l)[r.clone()];
            masked.mode_mut(l)[r.clone()].copy_from_slice(src);
            jmasked.mode_mut(l)[r.clone()].copy_from_slice(&geometry::j_cvec(src));
        }
        let theta = x.h1_inner(&jmasked).atan2(x.h1_inner(&masked));
        let (s, c) = theta.sin_cos();
        for l in 0..=xa.l() {
            let m = y.mode_mut(l);
            for i in r.clone().step_by(2) {
                let (a, b) = (m[i], m[i + 1]);
                m[i] = a * c - b * s;
                m[i + 1] = a * s + b * c;
            }
        }
    }
    x.minus(&y).h1_norm()
}

/// Per-block, per-mode coefficient norms: unchanged along the orbit of the
/// continuous symmetries.
pub fn orbit_invariants(x: &LoopState) -> Vec<f64> {
    let mut out = Vec::new();
    for l in 0..=x.l() {
        for b in 0..x.n_blocks() {
            let r = x.block_range(b);
            out.push(x.mode(l)[r].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
        }
    }
    out
}

/// Relative separation of two solutions modulo the continuous symmetries.
pub fn orbit_separation(x: &LoopState, y: &LoopState) -> f64 {
    let a = orbit_invariants(x);
    let b = orbit_invariants(y);
    let scale = a.iter().chain(&b).copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    a.iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max) / scale
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Multistart {
    pub phases: Vec<f64>,
    pub solutions: Vec<OrbitSolution>,
    /// Largest pairwise [`orbit_separation`].
    pub separation: f64,
    pub distinct: bool,
}

/// Refine the ansatz built from `e^{ϑJ}a` for each phase `ϑ`.
pub fn phase_multistart(a: &Configuration, p: &ActionParams, opts: &RefineOptions, phases: &[f64]) -> Result<Multistart> {
    let mut solutions = Vec::with_capacity(phases.len());
    for &phase in phases {
        let x0 = build_ansatz(&a.rotated(phase), p)?;
        solutions.push(refine(&x0, p, opts)?);
    }
    let mut separation = 0.0f64;
    for i in 0..solutions.len() {
        for j in i + 1..solutions.len() {
            separation = separation.max(orbit_separation(&solutions[i].loop_state, &solutions[j].loop_state));
        }
    }
    Ok(Multistart { phases: phases.to_vec(), solutions, separation, distinct: separation > 1e-6 })
}
