//! Adaptive Dormand–Prince 5(4) integrator.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self { rtol: 1e-13, atol: 1e-13, max_steps: 5_000_000 }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

impl Dopri5 {
    /// State at each time of `stops` (increasing, after `t0`).
    pub fn integrate<F>(&self, mut f: F, t0: f64, y0: &[f64], stops: &[f64]) -> Result<Vec<Vec<f64>>>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = y0.len();
        let mut y = y0.to_vec();
        let mut t = t0;
        let mut k = vec![vec![0.0; n]; 7];
        let mut tmp = vec![0.0; n];
        let mut y5 = vec![0.0; n];
        f(t, &y, &mut k[0]);
        let span = stops.last().map(|s| s - t0).unwrap_or(0.0);
        let mut h = span.abs() * 1e-4;
        let mut steps = 0;
        let mut out = Vec::with_capacity(stops.len());
        for &stop in stops {
            while t < stop {
                if steps >= self.max_steps {
                    return Err(Error::Convergence { iterations: steps, residual: stop - t });
                }
                let last = t + h >= stop;
                let hs = if last { stop - t } else { h };
                for s in 1..7 {
                    for i in 0..n {
                        let mut acc = y[i];
                        for j in 0..s {
                            acc += hs * A[s][j] * k[j][i];
                        }
                        tmp[i] = acc;
                    }
                    let (head, tail) = k.split_at_mut(s);
                    let _ = head;
                    f(t + C[s] * hs, &tmp, &mut tail[0]);
                }
                let mut err = 0.0;
                for i in 0..n {
                    let mut a5 = y[i];
                    let mut e = 0.0;
                    for s in 0..7 {
                        a5 += hs * B5[s] * k[s][i];
                        e += hs * (B5[s] - B4[s]) * k[s][i];
                    }
                    y5[i] = a5;
                    let sc = self.atol + self.rtol * y[i].abs().max(a5.abs());
                    err += (e / sc) * (e / sc);
                }
                err = (err / n as f64).sqrt();
                steps += 1;
                if err <= 1.0 {
                    t = if last { stop } else { t + hs };
                    y.copy_from_slice(&y5);
                    // first-same-as-last: stage 7 was evaluated at the new point
                    let k6 = k[6].clone();
                    k[0].copy_from_slice(&k6);
                }
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !(last && err <= 1.0) {
                    h = hs * fac;
                }
                if h < 1e-14 * span.abs().max(1.0) {
                    return Err(Error::Convergence { iterations: steps, residual: err });
                }
            }
            out.push(y.clone());
        }
        Ok(out)
    }
}
