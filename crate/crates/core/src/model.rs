//! Potentials, mass bookkeeping, Jacobi coordinates and the frequency laws
//! tying the pair radius `ε` to the rotation rates `ω` and `ν`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry;

/// Homogeneous potential `φ_α(r)`: `-ln r` for `α = 1`, `r^{1-α}/(α-1)` otherwise.
///
/// ```
/// use cabling::model::phi;
/// assert_eq!(phi(2.0, 2.0).unwrap(), 0.5);
/// assert!(phi(0.0, 2.0).is_err());
/// ```
pub fn phi(r: f64, alpha: f64) -> Result<f64> {
    check_radius(r)?;
    Ok(phi_raw(r, alpha))
}

/// `φ_α'(r) = -r^{-α}`.
pub fn dphi(r: f64, alpha: f64) -> Result<f64> {
    check_radius(r)?;
    Ok(-r.powf(-alpha))
}

/// `φ_α''(r) = α r^{-α-1}`.
pub fn d2phi(r: f64, alpha: f64) -> Result<f64> {
    check_radius(r)?;
    Ok(alpha * r.powf(-alpha - 1.0))
}

#[inline]
pub(crate) fn phi_raw(r: f64, alpha: f64) -> f64 {
    if alpha == 1.0 {
        -r.ln()
    } else {
        r.powf(1.0 - alpha) / (alpha - 1.0)
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("potential evaluated at r = {r}")))
    }
}

/// Physical masses together with the derived fictional masses.
///
/// Bodies are indexed `0..=n`; bodies `0` and `1` form the Kepler pair.
/// The constructor rescales every mass so that `m₀ + m₁ = 1`, recording the
/// factor in `rescale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassSystem {
    pub alpha: f64,
    /// Physical masses `m₀..m_n` after normalisation.
    pub m: Vec<f64>,
    /// Fictional masses `M₀ = m₀m₁`, `M₁ = 1`, `M_ℓ = m_ℓ`.
    #[serde(rename = "M")]
    pub big_m: Vec<f64>,
    /// `(μ₀, μ₁) = (m₁, -m₀)`.
    pub mu: [f64; 2],
    /// Factor by which the input masses were multiplied.
    pub rescale: f64,
}

impl MassSystem {
    pub fn new(alpha: f64, masses: Vec<f64>) -> Result<Self> {
        if !(alpha >= 1.0 && alpha.is_finite()) {
            return Err(Error::Parameter(format!("homogeneity exponent {alpha} must be >= 1")));
        }
        if masses.len() < 2 {
            return Err(Error::Parameter("at least the two pair masses are required".into()));
        }
        if masses.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::Parameter("masses must be positive and finite".into()));
        }
        let rescale = 1.0 / (masses[0] + masses[1]);
        let m: Vec<f64> = masses.iter().map(|x| x * rescale).collect();
        let mut big_m = Vec::with_capacity(m.len());
        big_m.push(m[0] * m[1]);
        big_m.push(1.0);
        big_m.extend_from_slice(&m[2..]);
        let mu = [m[1], -m[0]];
        Ok(Self { alpha, m, big_m, mu, rescale })
    }

    /// Number of bodies in the reduced problem, `n = N - 1`.
    pub fn n(&self) -> usize {
        self.m.len() - 1
    }

    pub fn n_bodies(&self) -> usize {
        self.m.len()
    }

    pub fn reduced_mass(&self) -> f64 {
        self.big_m[0]
    }

    /// Factor applied to positions when masses are multiplied by `rescale`,
    /// so that central configurations stay central.
    pub fn position_scale(&self) -> f64 {
        self.rescale.powf(1.0 / (self.alpha + 1.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Prograde,
    Retrograde,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Prograde => 1.0,
            Sign::Retrograde => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Prograde => Sign::Retrograde,
            Sign::Retrograde => Sign::Prograde,
        }
    }
}

/// Discrete symmetry imposed on the loop.
///
/// `C2` carries the order `m` and a permutation `sigma` of the `n` outer
/// bodies (0-based, `sigma[0] == 0`). `C3` needs `d >= 2`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "lowercase")]
pub enum SymmetryCase {
    C1,
    C2 { m: usize, sigma: Vec<usize> },
    C3,
}

impl SymmetryCase {
    pub fn label(&self) -> &'static str {
        match self {
            SymmetryCase::C1 => "c1",
            SymmetryCase::C2 { .. } => "c2",
            SymmetryCase::C3 => "c3",
        }
    }

    /// Quadrature sizes must be a multiple of this for the discrete action
    /// to keep the symmetry exactly.
    pub fn quadrature_multiple(&self) -> usize {
        match self {
            SymmetryCase::C1 => 1,
            SymmetryCase::C2 { m, .. } => *m,
            SymmetryCase::C3 => 2,
        }
    }
}

/// Pair radius, rotation sense, frequencies and symmetry case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CablingSetup {
    pub epsilon: f64,
    pub sign: Sign,
    pub omega: f64,
    pub nu: f64,
    #[serde(flatten)]
    pub case: SymmetryCase,
    pub d: usize,
    /// `(p, q)` when the pair frequency is the rational `p/q`.
    pub pq: Option<(u64, u64)>,
}

impl CablingSetup {
    pub const DEFAULT_EPS_MAX: f64 = 0.2;

    pub fn from_epsilon(
        epsilon: f64,
        alpha: f64,
        sign: Sign,
        case: SymmetryCase,
        d: usize,
    ) -> Result<Self> {
        Self::from_epsilon_with_limit(epsilon, alpha, sign, case, d, Self::DEFAULT_EPS_MAX)
    }

    pub fn from_epsilon_with_limit(
        epsilon: f64,
        alpha: f64,
        sign: Sign,
        case: SymmetryCase,
        d: usize,
        eps_max: f64,
    ) -> Result<Self> {
        check_eps_limit(epsilon, eps_max)?;
        let (omega, nu) = frequencies_from_epsilon(epsilon, alpha, sign)?;
        let setup = Self { epsilon, sign, omega, nu, case, d, pq: None };
        setup.validate()?;
        Ok(setup)
    }

    /// Rational pair frequency `|ω| = p/|q|`. A negative `q` reverses `sign`.
    pub fn from_pq(
        p: u64,
        q: i64,
        alpha: f64,
        sign: Sign,
        case: SymmetryCase,
        d: usize,
        eps_max: f64,
    ) -> Result<Self> {
        let epsilon = epsilon_from_pq(p, q, alpha)?;
        check_eps_limit(epsilon, eps_max)?;
        let sign = if q < 0 { sign.flip() } else { sign };
        let qa = q.unsigned_abs();
        let omega = sign.value() * p as f64 / qa as f64;
        let setup =
            Self { epsilon, sign, omega, nu: omega - 1.0, case, d, pq: Some((p, qa)) };
        setup.validate()?;
        Ok(setup)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.case {
            SymmetryCase::C1 | SymmetryCase::C2 { .. } if self.d != 1 => {
                return Err(Error::Parameter(format!(
                    "case {} requires d = 1, got d = {}",
                    self.case.label(),
                    self.d
                )))
            }
            SymmetryCase::C3 if self.d < 2 => {
                return Err(Error::Parameter("case c3 requires d >= 2".into()))
            }
            _ => {}
        }
        if let SymmetryCase::C2 { m, sigma } = &self.case {
            check_sigma(*m, sigma)?;
        }
        if self.nu == 0.0 {
            return Err(Error::Parameter("loop frequency ν vanishes".into()));
        }
        Ok(())
    }

    /// Inertial period `2π|q|`, known only for rational pair frequencies.
    pub fn period(&self) -> Option<f64> {
        self.pq.map(|(_, q)| 2.0 * std::f64::consts::PI * q as f64)
    }

    /// `ν/ω`, the loop speed of the pair block.
    pub fn pair_speed(&self) -> f64 {
        self.nu / self.omega
    }
}

fn check_eps_limit(epsilon: f64, eps_max: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < eps_max) {
        return Err(Error::Parameter(format!(
            "pair radius ε = {epsilon} outside the admissible range (0, {eps_max})"
        )));
    }
    Ok(())
}

/// Checks `σ(1) = 1`, that `σ` is a permutation and that `σ^m = id`.
pub(crate) fn check_sigma(m: usize, sigma: &[usize]) -> Result<()> {
    if m < 2 {
        return Err(Error::Parameter(format!("symmetry order m = {m} must be >= 2")));
    }
    let n = sigma.len();
    let mut seen = vec![false; n];
    for &s in sigma {
        if s >= n || seen[s] {
            return Err(Error::Parameter("sigma is not a permutation".into()));
        }
        seen[s] = true;
    }
    if n == 0 || sigma[0] != 0 {
        return Err(Error::Parameter("sigma must fix the cabled body".into()));
    }
    for (b, _) in sigma.iter().enumerate() {
        let mut c = b;
        for _ in 0..m {
            c = sigma[c];
        }
        if c != b {
            return Err(Error::Parameter(format!("sigma^{m} is not the identity")));
        }
    }
    Ok(())
}

/// `ω = ±ε^{-(α+1)/2}`, `ν = ω - 1`.
///
/// ```
/// use cabling::model::{frequencies_from_epsilon, Sign};
/// let (w, nu) = frequencies_from_epsilon(1.0 / 16.0, 2.0, Sign::Prograde).unwrap();
/// assert!((w - 64.0).abs() < 1e-12 && (nu - 63.0).abs() < 1e-12);
/// ```
pub fn frequencies_from_epsilon(epsilon: f64, alpha: f64, sign: Sign) -> Result<(f64, f64)> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Parameter(format!("ε = {epsilon} must lie in (0, 1)")));
    }
    let omega = sign.value() * epsilon.powf(-(alpha + 1.0) / 2.0);
    Ok((omega, omega - 1.0))
}

/// Pair radius giving the rational frequency `|ω| = p/|q|`.
pub fn epsilon_from_pq(p: u64, q: i64, alpha: f64) -> Result<f64> {
    let qa = q.unsigned_abs();
    if p == 0 || qa == 0 {
        return Err(Error::Parameter("p and q must be nonzero".into()));
    }
    if gcd(p, qa) != 1 {
        return Err(Error::Parameter(format!("p = {p} and q = {q} are not coprime")));
    }
    if p <= qa {
        return Err(Error::Parameter(format!("p/|q| = {p}/{qa} must exceed 1")));
    }
    Ok((p as f64 / qa as f64).powf(-2.0 / (alpha + 1.0)))
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// `(Q₀, Q)` with `Q₀ = q₁ - q₀`, `Q₁ = m₀q₀ + m₁q₁` and `Q_ℓ = q_ℓ`.
pub fn jacobi_forward(q: &[Vec<f64>], ms: &MassSystem) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if q.len() != ms.n_bodies() {
        return Err(Error::Structural(format!(
            "expected {} bodies, got {}",
            ms.n_bodies(),
            q.len()
        )));
    }
    let (m0, m1) = (ms.m[0], ms.m[1]);
    let q0: Vec<f64> = q[1].iter().zip(&q[0]).map(|(b, a)| b - a).collect();
    let mut big_q = Vec::with_capacity(ms.n());
    big_q.push(q[0].iter().zip(&q[1]).map(|(a, b)| m0 * a + m1 * b).collect());
    big_q.extend(q[2..].iter().cloned());
    Ok((q0, big_q))
}

/// Inverse of [`jacobi_forward`]: `q_j = Q₁ - μ_j Q₀` for the pair.
pub fn jacobi_inverse(q0: &[f64], big_q: &[Vec<f64>], ms: &MassSystem) -> Result<Vec<Vec<f64>>> {
    if big_q.len() != ms.n() {
        return Err(Error::Structural(format!(
            "expected {} reduced bodies, got {}",
            ms.n(),
            big_q.len()
        )));
    }
    let mut q = Vec::with_capacity(ms.n_bodies());
    for mu in ms.mu {
        q.push(big_q[0].iter().zip(q0).map(|(c, r)| c - mu * r).collect());
    }
    q.extend(big_q[1..].iter().cloned());
    Ok(q)
}

/// Coupling integrand
/// `h = Σ_{k≥2} Σ_{j=0,1} M_k m_j [φ(‖u₁ - u_k - μ_j ε e^{sJ}u₀‖) - φ(‖u₁ - u_k‖)]`.
pub fn coupling_integrand(
    u0: &[f64],
    u: &[Vec<f64>],
    s: f64,
    setup: &CablingSetup,
    ms: &MassSystem,
) -> Result<f64> {
    if u.len() != ms.n() {
        return Err(Error::Structural(format!("expected {} loop bodies, got {}", ms.n(), u.len())));
    }
    let dim = u0.len();
    let ru0 = geometry::rotate(u0, s);
    let mut h = 0.0;
    let mut w = vec![0.0; dim];
    for k in 1..u.len() {
        let base: Vec<f64> = u[0].iter().zip(&u[k]).map(|(a, b)| a - b).collect();
        let r_base = geometry::norm(&base);
        let phi_base = phi(r_base, ms.alpha)?;
        for j in 0..2 {
            let c = ms.mu[j] * setup.epsilon;
            for i in 0..dim {
                w[i] = base[i] - c * ru0[i];
            }
            let r = geometry::norm(&w);
            h += ms.big_m[k + 1] * ms.m[j] * (phi(r, ms.alpha)? - phi_base);
        }
    }
    Ok(h)
}
