//! Dormand–Prince 5(4) integrator with continuous (dense) output.
//!
//! States are flat `f64` slices so the same stepper serves geodesics, parallel
//! transport systems and Jacobi systems of any dimension. Right-hand sides
//! may fail (a point left the metric domain); adaptive runs then shrink the
//! step towards the failure and stop with a truncation flag.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const MAX_STEPS: usize = 200_000;

/// How the stepper chooses its steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stepping {
    /// Local error control with `atol = rtol = tol`.
    Adaptive { tol: f64 },
    /// Equal steps. The result is a smooth function of the initial data,
    /// which finite-difference Jacobians and Newton solvers rely on.
    Fixed { steps: usize },
}

/// Nodes of an accepted integration plus the dense-output coefficients
/// of every step.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    dim: usize,
    ts: Vec<f64>,
    ys: Vec<f64>,
    dense: Vec<f64>,
    truncated: Option<f64>,
}

impl OdeSolution {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.ts
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.ys[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn t_start(&self) -> f64 {
        self.ts[0]
    }

    pub fn t_end(&self) -> f64 {
        self.ts[self.ts.len() - 1]
    }

    /// Parameter at which the run stopped early, if it did.
    pub fn truncated(&self) -> Option<f64> {
        self.truncated
    }

    /// Dense-output evaluation; `None` outside the integrated range.
    pub fn eval(&self, t: f64, out: &mut [f64]) -> Option<()> {
        let (lo, hi) = if self.t_start() <= self.t_end() {
            (self.t_start(), self.t_end())
        } else {
            (self.t_end(), self.t_start())
        };
        let slack = 1e-12 * (1.0 + (hi - lo).abs());
        if t < lo - slack || t > hi + slack || self.len() < 2 {
            if self.len() == 1 && (t - self.ts[0]).abs() <= slack {
                out.copy_from_slice(self.state(0));
                return Some(());
            }
            return None;
        }
        let forward = self.t_end() >= self.t_start();
        // index of the step containing t
        let step = match self.ts.binary_search_by(|probe| {
            if forward {
                probe.total_cmp(&t)
            } else {
                t.total_cmp(probe)
            }
        }) {
            Ok(i) => i.min(self.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.len() - 2),
        };
        let t0 = self.ts[step];
        let h = self.ts[step + 1] - t0;
        let theta = (t - t0) / h;
        let theta1 = 1.0 - theta;
        let n = self.dim;
        let base = step * 5 * n;
        for i in 0..n {
            let r1 = self.dense[base + i];
            let r2 = self.dense[base + n + i];
            let r3 = self.dense[base + 2 * n + i];
            let r4 = self.dense[base + 3 * n + i];
            let r5 = self.dense[base + 4 * n + i];
            out[i] = r1 + theta * (r2 + theta1 * (r3 + theta * (r4 + theta1 * r5)));
        }
        Some(())
    }
}

struct Workspace {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y1: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace {
            k: core::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            y1: vec![0.0; n],
        }
    }
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t1` (either direction).
///
/// `rhs` failing at `t0` is reported as [`Error::Boundary`]. Later failures
/// truncate adaptive runs and abort fixed-step runs.
pub fn integrate<F>(mut rhs: F, t0: f64, y0: &[f64], t1: f64, stepping: Stepping) -> Result<OdeSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y0.len();
    let mut ws = Workspace::new(n);
    let mut sol = OdeSolution {
        dim: n,
        ts: vec![t0],
        ys: y0.to_vec(),
        dense: Vec::new(),
        truncated: None,
    };
    if rhs(t0, y0, &mut ws.k[0]).is_err() {
        return Err(Error::Boundary { lambda: t0 });
    }
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(sol);
    }
    let dir = span.signum();
    let mut y = y0.to_vec();
    let mut t = t0;

    match stepping {
        Stepping::Fixed { steps } => {
            let steps = steps.max(1);
            let h = span / steps as f64;
            for s in 0..steps {
                let t_next = if s + 1 == steps { t1 } else { t0 + h * (s + 1) as f64 };
                let h_step = t_next - t;
                if try_step(&mut rhs, t, &y, h_step, 1.0, &mut ws).is_err() {
                    return Err(Error::Boundary { lambda: t });
                }
                accept(&mut sol, &mut ws, &mut y, t_next, h_step);
                t = t_next;
            }
            Ok(sol)
        }
        Stepping::Adaptive { tol } => {
            let mut h = initial_step(&mut rhs, t, &y, dir, tol, span.abs(), &mut ws)?;
            let h_floor = 1e-12 * span.abs().max(1e-300);
            let mut steps = 0usize;
            let mut reject_streak = false;
            while (t1 - t) * dir > h_floor {
                steps += 1;
                if steps > MAX_STEPS {
                    return Err(Error::StepUnderflow { t });
                }
                if (t + h - t1) * dir > 0.0 {
                    h = t1 - t;
                }
                match try_step(&mut rhs, t, &y, h, tol, &mut ws) {
                    Err(_) => {
                        if h.abs() < h_floor * 10.0 {
                            sol.truncated = Some(t);
                            return Ok(sol);
                        }
                        h *= 0.25;
                        reject_streak = true;
                        continue;
                    }
                    Ok(err) => {
                        if err <= 1.0 {
                            let t_next = if (t + h - t1).abs() <= h_floor { t1 } else { t + h };
                            let h_taken = t_next - t;
                            accept(&mut sol, &mut ws, &mut y, t_next, h_taken);
                            t = t_next;
                            let mut fac: f64 = 0.9 * err.max(1e-10).powf(-0.2);
                            fac = fac.clamp(0.2, 10.0);
                            if reject_streak {
                                fac = fac.min(1.0);
                            }
                            reject_streak = false;
                            h *= fac;
                        } else {
                            let fac: f64 = (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                            h *= fac;
                            reject_streak = true;
                            if h.abs() < h_floor {
                                return Err(Error::StepUnderflow { t });
                            }
                        }
                    }
                }
            }
            Ok(sol)
        }
    }
}

fn initial_step<F>(rhs: &mut F, t: f64, y: &[f64], dir: f64, tol: f64, span: f64, ws: &mut Workspace) -> Result<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y.len() as f64;
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for (yi, fi) in y.iter().zip(ws.k[0].iter()) {
        let sk = tol + tol * yi.abs();
        d0 += (yi / sk) * (yi / sk);
        d1 += (fi / sk) * (fi / sk);
    }
    d0 = (d0 / n).sqrt();
    d1 = (d1 / n).sqrt();
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span);
    for ((tmp, yi), fi) in ws.tmp.iter_mut().zip(y).zip(ws.k[0].iter()) {
        *tmp = yi + dir * h0 * fi;
    }
    let tmp = ws.tmp.clone();
    let mut f1 = vec![0.0; y.len()];
    if rhs(t + dir * h0, &tmp, &mut f1).is_err() {
        return Ok(dir * h0 * 0.1);
    }
    let mut d2 = 0.0;
    for ((yi, a), b) in y.iter().zip(f1.iter()).zip(ws.k[0].iter()) {
        let sk = tol + tol * yi.abs();
        d2 += ((a - b) / sk) * ((a - b) / sk);
    }
    d2 = (d2 / n).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (1e-6f64).max(h0 * 1e-3)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok(dir * (100.0 * h0).min(h1).min(span))
}

/// One Dormand–Prince step from `(t, y)`; fills `ws.y1` and stages, returns
/// the scaled error norm.
fn try_step<F>(rhs: &mut F, t: f64, y: &[f64], h: f64, tol: f64, ws: &mut Workspace) -> Result<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y.len();
    macro_rules! stage {
        ($out:expr, $c:expr, [$(($a:expr, $k:expr)),*]) => {{
            for i in 0..n {
                ws.tmp[i] = y[i] + h * (0.0 $(+ $a * ws.k[$k][i])*);
            }
            rhs(t + $c * h, &ws.tmp, &mut ws.k[$out])?;
        }};
    }
    stage!(1, C2, [(A21, 0)]);
    stage!(2, C3, [(A31, 0), (A32, 1)]);
    stage!(3, C4, [(A41, 0), (A42, 1), (A43, 2)]);
    stage!(4, C5, [(A51, 0), (A52, 1), (A53, 2), (A54, 3)]);
    stage!(5, 1.0, [(A61, 0), (A62, 1), (A63, 2), (A64, 3), (A65, 4)]);
    for i in 0..n {
        ws.y1[i] = y[i]
            + h * (A71 * ws.k[0][i] + A73 * ws.k[2][i] + A74 * ws.k[3][i] + A75 * ws.k[4][i] + A76 * ws.k[5][i]);
    }
    rhs(t + h, &ws.y1, &mut ws.k[6])?;
    let mut err = 0.0;
    for i in 0..n {
        let e = h
            * (E1 * ws.k[0][i] + E3 * ws.k[2][i] + E4 * ws.k[3][i] + E5 * ws.k[4][i] + E6 * ws.k[5][i]
                + E7 * ws.k[6][i]);
        let sk = tol + tol * y[i].abs().max(ws.y1[i].abs());
        err += (e / sk) * (e / sk);
    }
    Ok((err / n as f64).sqrt())
}

fn accept(sol: &mut OdeSolution, ws: &mut Workspace, y: &mut [f64], t_next: f64, h: f64) {
    let n = y.len();
    let start = sol.dense.len();
    sol.dense.resize(start + 5 * n, 0.0);
    let d = &mut sol.dense[start..];
    for i in 0..n {
        let ydiff = ws.y1[i] - y[i];
        let bspl = h * ws.k[0][i] - ydiff;
        d[i] = y[i];
        d[n + i] = ydiff;
        d[2 * n + i] = bspl;
        d[3 * n + i] = ydiff - h * ws.k[6][i] - bspl;
        d[4 * n + i] = h
            * (D1 * ws.k[0][i] + D3 * ws.k[2][i] + D4 * ws.k[3][i] + D5 * ws.k[4][i] + D6 * ws.k[5][i]
                + D7 * ws.k[6][i]);
    }
    y.copy_from_slice(&ws.y1);
    sol.ts.push(t_next);
    sol.ys.extend_from_slice(y);
    // first-same-as-last
    ws.k.swap(0, 6);
}
