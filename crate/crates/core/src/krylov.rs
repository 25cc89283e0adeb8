//! Restarted GMRES with right preconditioning.

use crate::error::Result;

#[derive(Clone, Debug)]
pub struct GmresResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final residual relative to `‖b‖`.
    pub residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solve `A x = b` with `A = op`, preconditioner `M⁻¹ = precond`, starting
/// from zero.
pub fn gmres<A, M>(
    mut op: A,
    mut precond: M,
    b: &[f64],
    rtol: f64,
    restart: usize,
    max_iters: usize,
) -> Result<GmresResult>
where
    A: FnMut(&[f64]) -> Result<Vec<f64>>,
    M: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(GmresResult { x, iterations: 0, residual: 0.0, converged: true });
    }
    let mut r = b.to_vec();
    let mut iterations = 0;
    let mut rel = 1.0;
    while iterations < max_iters {
        let beta = norm(&r);
        rel = beta / bnorm;
        if rel <= rtol {
            break;
        }
        let m = restart.min(max_iters - iterations);
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            let zk = precond(&v[k])?;
            let mut w = op(&zk)?;
            z.push(zk);
            for _ in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let c = dot(&w, vi);
                    h[i][k] += c;
                    w.iter_mut().zip(vi).for_each(|(wj, vj)| *wj -= c * vj);
                }
            }
            let hn = norm(&w);
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if denom == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = h[k][k] / denom;
                sn[k] = h[k + 1][k] / denom;
            }
            h[k][k] = cs[k] * h[k][k] + sn[k] * h[k + 1][k];
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            iterations += 1;
            k_used = k + 1;
            rel = g[k + 1].abs() / bnorm;
            if rel <= rtol || hn <= 1e-14 * beta {
                break;
            }
            v.push(w.iter().map(|wi| wi / hn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
        }
        for (yj, zj) in y.iter().zip(&z) {
            x.iter_mut().zip(zj).for_each(|(xi, zi)| *xi += yj * zi);
        }
        let ax = op(&x)?;
        r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        rel = norm(&r) / bnorm;
        if rel <= rtol {
            break;
        }
    }
    Ok(GmresResult { x, iterations, residual: rel, converged: rel <= rtol })
}
