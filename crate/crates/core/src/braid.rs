//! Winding numbers and Artin braid words of planar motions.
//!
//! Strands are ordered by their projection onto an axis `e = (cos β, sin β)`.
//! When the strands at positions `i` and `i+1` (1-based) exchange, the
//! generator `s_i` is emitted with exponent `+1` if the strand moving from
//! left to right has the larger depth `⟨q, Je⟩`, and `-1` otherwise. With
//! this convention a counter-clockwise rigid rotation produces only negative
//! generators.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry;

/// A motion of point bodies in `R^{2d}` that can be evaluated at any time.
pub trait Motion {
    fn n_bodies(&self) -> usize;
    fn d(&self) -> usize;
    fn masses(&self) -> &[f64];
    /// Positions, body after body.
    fn position(&self, t: f64) -> Vec<f64>;
    fn velocity(&self, t: f64) -> Vec<f64>;

    fn body(&self, t: f64, b: usize) -> Vec<f64> {
        let dd = 2 * self.d();
        self.position(t)[b * dd..(b + 1) * dd].to_vec()
    }
}

/// Rigid rotation `q(t) = e^{ωtJ} a` of a fixed configuration.
#[derive(Clone, Debug)]
pub struct RigidMotion {
    pub d: usize,
    pub masses: Vec<f64>,
    pub points: Vec<f64>,
    pub omega: f64,
}

impl Motion for RigidMotion {
    fn n_bodies(&self) -> usize {
        self.masses.len()
    }

    fn d(&self) -> usize {
        self.d
    }

    fn masses(&self) -> &[f64] {
        &self.masses
    }

    fn position(&self, t: f64) -> Vec<f64> {
        geometry::rotate(&self.points, self.omega * t)
    }

    fn velocity(&self, t: f64) -> Vec<f64> {
        let q = self.position(t);
        geometry::j_vec(&q).into_iter().map(|v| v * self.omega).collect()
    }
}

/// A tracked point whose winding about the origin is counted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackedPoint {
    /// Centre of mass of the two pair bodies.
    PairCenter,
    Body(usize),
}

/// Artin generator `s_index^{sign}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generator {
    pub index: usize,
    pub sign: i8,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BraidWord {
    pub strands: usize,
    pub generators: Vec<Generator>,
}

impl BraidWord {
    pub fn exponent_sum(&self) -> i64 {
        self.generators.iter().map(|g| g.sign as i64).sum()
    }

    /// Image of each starting position: strand starting at position `i`
    /// ends at position `perm[i]` (0-based).
    pub fn permutation(&self) -> Vec<usize> {
        let mut at: Vec<usize> = (0..self.strands).collect();
        for g in &self.generators {
            at.swap(g.index - 1, g.index);
        }
        let mut perm = vec![0; self.strands];
        for (pos, &strand) in at.iter().enumerate() {
            perm[strand] = pos;
        }
        perm
    }

    pub fn is_pure(&self) -> bool {
        self.permutation().iter().enumerate().all(|(i, &p)| i == p)
    }

    /// Cancel adjacent pairs `s_i s_i^{-1}` until none remain.
    pub fn freely_reduced(&self) -> Self {
        let mut out: Vec<Generator> = Vec::with_capacity(self.generators.len());
        for &g in &self.generators {
            match out.last() {
                Some(h) if h.index == g.index && h.sign == -g.sign => {
                    out.pop();
                }
                _ => out.push(g),
            }
        }
        Self { strands: self.strands, generators: out }
    }
}

impl fmt::Display for BraidWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .generators
            .iter()
            .map(|g| if g.sign > 0 { format!("s{}", g.index) } else { format!("s{}^-1", g.index) })
            .collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// Windings and braid word of one period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BraidReport {
    pub pair_winding: i64,
    pub tracked: Vec<TrackedPoint>,
    pub center_windings: Vec<i64>,
    pub braid_word: BraidWord,
    pub word: String,
    pub exponent_sum: i64,
    pub pure: bool,
    pub axis: f64,
    pub period: f64,
}

/// Revolutions of the planar curve `f` about the origin over `[t0, t1]`.
/// The sample count doubles until no step turns by more than `π/4`.
pub fn winding_of<F>(f: F, t0: f64, t1: f64, samples: usize) -> Result<i64>
where
    F: Fn(f64) -> [f64; 2],
{
    let mut n = samples.max(16);
    let scale = (0..16)
        .map(|k| {
            let p = f(t0 + (t1 - t0) * k as f64 / 16.0);
            p[0].hypot(p[1])
        })
        .fold(0.0, f64::max);
    loop {
        let mut total = 0.0;
        let mut fine = true;
        let mut prev = None;
        for k in 0..=n {
            let t = t0 + (t1 - t0) * k as f64 / n as f64;
            let p = f(t);
            let r = p[0].hypot(p[1]);
            if !(r > 1e-10 * scale.max(f64::MIN_POSITIVE)) {
                return Err(Error::Resolution(format!(
                    "radius {r:.3e} at t = {t:.6} leaves the angle undefined; sample more densely or drop the point"
                )));
            }
            let theta = p[1].atan2(p[0]);
            if let Some(q) = prev {
                let mut dt: f64 = theta - q;
                dt -= 2.0 * PI * (dt / (2.0 * PI)).round();
                if dt.abs() > PI / 4.0 {
                    fine = false;
                    break;
                }
                total += dt;
            }
            prev = Some(theta);
        }
        if fine {
            let w = total / (2.0 * PI);
            let k = w.round();
            if (w - k).abs() > 1e-6 {
                return Err(Error::Resolution(format!("winding {w} is not an integer")));
            }
            return Ok(k as i64);
        }
        if n > 1 << 24 {
            return Err(Error::Resolution("angle unwrapping does not settle".into()));
        }
        n *= 2;
    }
}

fn planar(m: &dyn Motion) -> Result<()> {
    if m.d() != 1 {
        return Err(Error::Precondition(format!("planar motion required, got d = {}", m.d())));
    }
    Ok(())
}

/// Winding of `q_b - q_a` for `pair = (a, b)` and of each tracked point.
pub fn winding_numbers(
    m: &dyn Motion,
    period: f64,
    pair: (usize, usize),
    tracked: &[TrackedPoint],
    samples: usize,
) -> Result<(i64, Vec<i64>)> {
    planar(m)?;
    let (a, b) = pair;
    let pair_w = winding_of(
        |t| {
            let q = m.position(t);
            [q[2 * b] - q[2 * a], q[2 * b + 1] - q[2 * a + 1]]
        },
        0.0,
        period,
        samples,
    )?;
    let masses = m.masses();
    let (ma, mb) = (masses[a], masses[b]);
    let mut centers = Vec::with_capacity(tracked.len());
    for tp in tracked {
        let w = winding_of(
            |t| {
                let q = m.position(t);
                match *tp {
                    TrackedPoint::PairCenter => {
                        let s = ma + mb;
                        [
                            (ma * q[2 * a] + mb * q[2 * b]) / s,
                            (ma * q[2 * a + 1] + mb * q[2 * b + 1]) / s,
                        ]
                    }
                    TrackedPoint::Body(k) => [q[2 * k], q[2 * k + 1]],
                }
            },
            0.0,
            period,
            samples,
        )?;
        centers.push(w);
    }
    Ok((pair_w, centers))
}

fn projections(m: &dyn Motion, t: f64, c: f64, s: f64) -> (Vec<f64>, Vec<f64>) {
    let q = m.position(t);
    let x = q.chunks_exact(2).map(|p| c * p[0] + s * p[1]).collect();
    let y = q.chunks_exact(2).map(|p| -s * p[0] + c * p[1]).collect();
    (x, y)
}

fn order(x: &[f64]) -> Vec<usize> {
    let mut o: Vec<usize> = (0..x.len()).collect();
    o.sort_by(|&i, &j| x[i].partial_cmp(&x[j]).unwrap_or(std::cmp::Ordering::Equal));
    o
}

/// Positions `i` such that `ob` is `oa` with the disjoint adjacent pairs
/// `(i, i+1)` exchanged.
fn disjoint_swaps(oa: &[usize], ob: &[usize]) -> Option<Vec<usize>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < oa.len() {
        if oa[i] == ob[i] {
            i += 1;
        } else if i + 1 < oa.len() && oa[i] == ob[i + 1] && oa[i + 1] == ob[i] {
            out.push(i);
            i += 2;
        } else {
            return None;
        }
    }
    Some(out)
}

struct Extractor<'a> {
    m: &'a dyn Motion,
    c: f64,
    s: f64,
    out: Vec<Generator>,
}

impl Extractor<'_> {
    fn interval(&mut self, ta: f64, tb: f64, oa: &[usize], ob: &[usize], depth: u32) -> Result<()> {
        if oa == ob {
            return Ok(());
        }
        if let Some(swaps) = disjoint_swaps(oa, ob) {
            // distant generators commute, so simultaneous swaps are emitted
            // in position order
            for pos in swaps {
                self.crossing(ta, tb, pos, oa[pos], oa[pos + 1])?;
            }
            return Ok(());
        }
        if depth > 40 {
            return Err(Error::Degenerate(format!("simultaneous crossings near t = {ta:.12}")));
        }
        let tm = 0.5 * (ta + tb);
        let om = order(&projections(self.m, tm, self.c, self.s).0);
        self.interval(ta, tm, oa, &om, depth + 1)?;
        self.interval(tm, tb, &om, ob, depth + 1)
    }

    /// Strand `left` (at position `pos`) and `right` exchange in `(ta, tb)`.
    fn crossing(&mut self, mut ta: f64, mut tb: f64, pos: usize, left: usize, right: usize) -> Result<()> {
        let gap = |t: f64| {
            let (x, _) = projections(self.m, t, self.c, self.s);
            x[right] - x[left]
        };
        while tb - ta > 1e-10 {
            let tm = 0.5 * (ta + tb);
            if gap(tm) > 0.0 {
                ta = tm;
            } else {
                tb = tm;
            }
        }
        let (_, y) = projections(self.m, 0.5 * (ta + tb), self.c, self.s);
        let dy = y[left] - y[right];
        let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
        if dy.abs() < 1e-9 * scale {
            return Err(Error::Degenerate(format!(
                "strands {left} and {right} meet in the projection plane near t = {ta:.12}"
            )));
        }
        self.out.push(Generator { index: pos + 1, sign: if dy > 0.0 { 1 } else { -1 } });
        Ok(())
    }
}

/// Freely reduced braid word of `[0, period]` seen along axis angle `axis`.
/// Degenerate crossings trigger retries with slightly rotated axes.
pub fn braid_word(m: &dyn Motion, period: f64, axis: f64, samples: usize) -> Result<BraidWord> {
    planar(m)?;
    let mut last_err = None;
    for attempt in 0..4 {
        let beta = axis + 0.0173 * attempt as f64;
        match braid_word_once(m, period, beta, samples) {
            Ok(w) => return Ok(w),
            Err(e @ Error::Degenerate(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Degenerate("braid extraction failed".into())))
}

fn braid_word_once(m: &dyn Motion, period: f64, beta: f64, samples: usize) -> Result<BraidWord> {
    let (s, c) = beta.sin_cos();
    let mut ex = Extractor { m, c, s, out: Vec::new() };
    let n = samples.max(16);
    let mut prev = order(&projections(m, 0.0, c, s).0);
    let mut t_prev = 0.0;
    for k in 1..=n {
        let t = period * k as f64 / n as f64;
        let cur = order(&projections(m, t, c, s).0);
        ex.interval(t_prev, t, &prev, &cur, 0)?;
        prev = cur;
        t_prev = t;
    }
    Ok(BraidWord { strands: m.n_bodies(), generators: ex.out }.freely_reduced())
}

/// `‖q(T) - q(0)‖∞ + ‖q̇(T) - q̇(0)‖∞`.
pub fn periodicity_error(m: &dyn Motion, period: f64) -> f64 {
    let sup = |a: Vec<f64>, b: Vec<f64>| a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    sup(m.position(period), m.position(0.0)) + sup(m.velocity(period), m.velocity(0.0))
}

/// Windings and braid word in one report.
pub fn braid_report(
    m: &dyn Motion,
    period: f64,
    tracked: &[TrackedPoint],
    axis: f64,
    samples: usize,
) -> Result<BraidReport> {
    let (pair_winding, center_windings) = winding_numbers(m, period, (0, 1), tracked, samples)?;
    let braid_word = braid_word(m, period, axis, samples)?;
    Ok(BraidReport {
        pair_winding,
        tracked: tracked.to_vec(),
        center_windings,
        word: braid_word.to_string(),
        exponent_sum: braid_word.exponent_sum(),
        pure: braid_word.is_pure(),
        braid_word,
        axis,
        period,
    })
}
