//! Temple charts `Φ_q(t, x) = exp_{η(t)}(|x| e_0 + x^i e_i)`: null rays shot
//! from a timelike geodesic, their inverse and the optical function.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::frame::{riemannianized_matrix, FermiFrame, RiemannianizedMetric};
use crate::geodesic::{self, integrate_geodesic, newton_solve, solve_jacobi};
use crate::linalg::{self, inner, Matrix, Point, Vector};
use crate::metric::Metric;
use crate::ode::{self, OdeSolution, Stepping};
use crate::report::{linear_fit, EstimateReport, Verdict};
use crate::sampling;

/// Fixed steps per shot ray; keeps `Φ_q` smooth in `(t, x)`.
pub const SHOT_STEPS: usize = 24;

/// Axis integration runs this far past `±r` so that difference quotients at
/// the chart edge stay defined.
const AXIS_SLACK: f64 = 1.02;

/// Chart coordinates. `x[0]` is unused and kept at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartCoords<const D: usize> {
    pub t: f64,
    pub x: Vector<D>,
    /// `|x| < 1e-6 r`: derivative-based quantities are unreliable here.
    pub near_axis: bool,
}

impl<const D: usize> ChartCoords<D> {
    pub fn lambda(&self) -> f64 {
        spatial_norm(&self.x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalSample<const D: usize> {
    pub point: Point<D>,
    pub omega: f64,
    pub lambda: f64,
    /// `|∇^{g_R} ω|_{g_R}`, when requested and off the axis band.
    pub grad_norm_gr: Option<f64>,
    pub near_axis: bool,
}

/// Answer of the optical-function indicator of `J⁺(q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Indicator {
    Future,
    /// `ω < 0`: not in the causal future of `q`.
    Outside,
    /// `|ω|` within the tolerance band around the cone.
    Band,
}

pub(crate) fn spatial_norm<const D: usize>(x: &Vector<D>) -> f64 {
    (1..D).map(|i| x[i] * x[i]).sum::<f64>().sqrt()
}

fn spatial<const D: usize>(y: &Vector<D>) -> Vector<D> {
    let mut x = *y;
    x[0] = 0.0;
    x
}

/// Null initial velocity `|x| e_0 + Σ x^i e_i`.
fn shot_velocity<const D: usize>(frame: &[Vector<D>; D], x: &Vector<D>) -> Vector<D> {
    let mut v = frame[0] * spatial_norm(x);
    for i in 1..D {
        v += frame[i] * x[i];
    }
    v
}

pub struct TempleChart<const D: usize, M: ?Sized> {
    frame: FermiFrame<D, M>,
    center: Point<D>,
    radius: f64,
    center_frame: [Vector<D>; D],
    center_frame_inverse: Matrix<D>,
    future_axis: OdeSolution,
    past_axis: OdeSolution,
}

impl<const D: usize, M: Metric<D> + ?Sized> TempleChart<D, M> {
    /// Integrates `η_q` with its parallel frame over `(−r, r)`.
    pub fn build(frame: &FermiFrame<D, M>, q: &Point<D>, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::Precondition(format!("chart radius must be positive, got {r}")));
        }
        let metric = &**frame.metric();
        metric.check(q)?;
        let center_frame = frame.frame_eval(q)?;
        let center_frame_inverse = geodesic::frame_matrix(&center_frame)
            .try_inverse()
            .ok_or_else(|| Error::DegenerateFrame(format!("singular frame at {:?}", q.as_slice())))?;
        let y0 = geodesic::pack(q, &center_frame[0], &center_frame[1..]);
        let stepping = Stepping::Adaptive { tol: 1e-12 };
        let axis = |end: f64| -> Result<OdeSolution> {
            let sol = ode::integrate(geodesic::geodesic_rhs(metric, D - 1), 0.0, &y0, end, stepping)
                .map_err(|e| Error::Radius(format!("central geodesic: {e}")))?;
            match sol.truncated() {
                Some(stop) => Err(Error::Radius(format!("central geodesic leaves the domain at t = {stop}"))),
                None => Ok(sol),
            }
        };
        let future_axis = axis(AXIS_SLACK * r)?;
        let past_axis = axis(-AXIS_SLACK * r)?;
        Ok(TempleChart {
            frame: frame.clone(),
            center: *q,
            radius: r,
            center_frame,
            center_frame_inverse,
            future_axis,
            past_axis,
        })
    }

    pub fn frame(&self) -> &FermiFrame<D, M> {
        &self.frame
    }

    pub fn metric(&self) -> &M {
        self.frame.metric()
    }

    pub fn center(&self) -> &Point<D> {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `η_q(t)` and the parallel frame there.
    pub fn axis(&self, t: f64) -> Result<(Point<D>, [Vector<D>; D])> {
        let sol = if t >= 0.0 { &self.future_axis } else { &self.past_axis };
        let mut y = alloc::vec![0.0; sol.dim()];
        sol.eval(t, &mut y).ok_or(Error::Boundary { lambda: t })?;
        let point = Point::<D>::from_column_slice(&y[..D]);
        let frame = core::array::from_fn(|a| Vector::<D>::from_column_slice(&y[(1 + a) * D..(2 + a) * D]));
        Ok((point, frame))
    }

    /// End point and end velocity of the shot ray with affine parameter
    /// running over `[0, 1]`.
    fn shot(&self, t: f64, x: &Vector<D>) -> Result<(Point<D>, Vector<D>)> {
        let (base, frame) = self.axis(t)?;
        let v = shot_velocity(&frame, x);
        let (z, w, []) = geodesic::shoot(self.metric(), &base, &v, &[], 1.0, Stepping::Fixed { steps: SHOT_STEPS })?;
        Ok((z, w))
    }

    pub fn forward(&self, t: f64, x: &Vector<D>) -> Result<Point<D>> {
        if spatial_norm(x) == 0.0 {
            return self.axis(t).map(|(p, _)| p);
        }
        self.shot(t, x).map(|(z, _)| z)
    }

    /// Chart coordinates of `z` by Newton shooting from the flat-space guess.
    pub fn invert(&self, z: &Point<D>) -> Result<ChartCoords<D>> {
        self.invert_from(z, None)
    }

    pub fn invert_from(&self, z: &Point<D>, guess: Option<(f64, Vector<D>)>) -> Result<ChartCoords<D>> {
        self.metric().check(z)?;
        let (t0, x0) = guess.unwrap_or_else(|| {
            let w = self.center_frame_inverse * (z - self.center);
            let x = spatial(&w);
            let limit = 0.99 * AXIS_SLACK * self.radius;
            ((w[0] - spatial_norm(&x)).clamp(-limit, limit), x)
        });
        let mut y0 = x0;
        y0[0] = t0;
        let lam = spatial_norm(&x0);
        let e = &self.center_frame;
        let mut jac = Matrix::<D>::zeros();
        jac.set_column(0, &e[0]);
        for i in 1..D {
            let col = if lam > 0.0 { e[0] * (x0[i] / lam) + e[i] } else { e[i] };
            jac.set_column(i, &col);
        }
        let y = newton_solve(|y| self.forward(y[0], &spatial(y)), z, y0, Some(jac), 60, 1e-9)?;
        let x = spatial(&y);
        Ok(ChartCoords {
            t: y[0],
            x,
            near_axis: spatial_norm(&x) < 1e-6 * self.radius,
        })
    }

    /// `ω_q`, `λ_q` and optionally `|∇^{g_R} ω_q|_{g_R}` by central
    /// differences of `ω_q` with step `1e-5 r`.
    pub fn optical_and_radial(&self, z: &Point<D>, gradient: bool) -> Result<OpticalSample<D>> {
        let c = self.invert(z)?;
        self.optical_from(z, &c, gradient)
    }

    fn optical_from(&self, z: &Point<D>, c: &ChartCoords<D>, gradient: bool) -> Result<OpticalSample<D>> {
        let lambda = c.lambda();
        let grad_norm_gr = if gradient && lambda > 1e-3 * self.radius {
            let h = 1e-5 * self.radius;
            let mut dw = Vector::<D>::zeros();
            for k in 0..D {
                let mut zp = *z;
                let mut zm = *z;
                zp[k] += h;
                zm[k] -= h;
                let tp = self.invert_from(&zp, Some((c.t, c.x)))?.t;
                let tm = self.invert_from(&zm, Some((c.t, c.x)))?.t;
                dw[k] = (tp - tm) / (2.0 * h);
            }
            let g = self.metric().g(z)?;
            let e = self.frame.frame_eval(z)?;
            let gr_inv = riemannianized_matrix(&g, &e[0])
                .try_inverse()
                .ok_or_else(|| Error::DegenerateFrame(format!("singular g_R at {:?}", z.as_slice())))?;
            Some(inner(&gr_inv, &dw, &dw).max(0.0).sqrt())
        } else {
            None
        };
        Ok(OpticalSample {
            point: *z,
            omega: c.t,
            lambda,
            grad_norm_gr,
            near_axis: c.near_axis,
        })
    }

    /// `tol_ω = 1e-6 r`.
    pub fn omega_tolerance(&self) -> f64 {
        1e-6 * self.radius
    }

    pub fn causal_indicator(&self, z: &Point<D>) -> Result<Indicator> {
        let omega = self.invert(z)?.t;
        let tol = self.omega_tolerance();
        Ok(if omega > tol {
            Indicator::Future
        } else if omega < -tol {
            Indicator::Outside
        } else {
            Indicator::Band
        })
    }

    /// Off-axis chart samples in `W_{fill·r}` with `|x| ≥ min_lambda · r`.
    pub fn off_axis_samples(&self, count: usize, fill: f64, min_lambda: f64) -> Vec<(f64, Vector<D>)> {
        let mut out = Vec::with_capacity(count);
        let mut i = 0;
        while out.len() < count {
            let u: [f64; D] = sampling::halton(i + 1);
            i += 1;
            let mut x = Vector::<D>::from_fn(|k, _| 2.0 * u[k] - 1.0);
            x[0] = 0.0;
            let n = spatial_norm(&x);
            if n > 1.0 || n < min_lambda / fill {
                continue;
            }
            out.push(((2.0 * u[0] - 1.0) * fill * self.radius, x * (fill * self.radius)));
        }
        out
    }

    /// The frame identities along shot rays: `g(∂_λ, ∂_λ) = 0`,
    /// `g(∂_t, ∂_λ) = −1`, and the `O(λ)` deviations of `g(∂_λ, e_0)` and
    /// `g(∂_t, ∂_t)` from `−1`. `∂_t` is the Jacobi field with `J(0) = e_0`,
    /// `DJ(0) = 0`, cross-checked against a difference quotient of `Φ_q`.
    pub fn axis_identities(&self, samples: usize) -> Result<EstimateReport> {
        let metric = self.metric();
        let mut report = EstimateReport::new("axis_identities");
        let h = 1e-5 * self.radius;
        let (mut null_max, mut cross_max, mut mismatch_max) = (0.0f64, 0.0f64, 0.0f64);
        let (mut lams, mut e0_dev, mut tt_dev) = (Vec::new(), Vec::new(), Vec::new());
        for (t, x) in self.off_axis_samples(samples, 0.9, 0.05) {
            let lam = spatial_norm(&x);
            let (base, frame) = self.axis(t)?;
            let v0 = shot_velocity(&frame, &(x / lam));
            let ray = integrate_geodesic(metric, &base, &v0, lam, 1e-11)?;
            if let Some(stop) = ray.truncated() {
                return Err(Error::Boundary { lambda: stop });
            }
            let jac = solve_jacobi(metric, &ray, &frame[0], &Vector::<D>::zeros())?;
            let end = ray.end();
            let z = end.base;
            let d_lambda = end.components;
            let d_t = *jac.field.last().expect("nonempty Jacobi solution");
            let fd = (self.forward(t + h, &x)? - self.forward(t - h, &x)?) / (2.0 * h);
            let g = metric.g(&z)?;
            let e = self.frame.frame_eval(&z)?;
            let null = inner(&g, &d_lambda, &d_lambda).abs();
            let cross = (inner(&g, &d_t, &d_lambda) + 1.0).abs();
            let mismatch = linalg::norm(&(fd - d_t)) / linalg::norm(&d_t);
            let e0 = (inner(&g, &d_lambda, &e[0]) + 1.0).abs();
            let tt = (inner(&g, &d_t, &d_t) + 1.0).abs();
            null_max = null_max.max(null);
            cross_max = cross_max.max(cross);
            mismatch_max = mismatch_max.max(mismatch);
            lams.push(lam);
            e0_dev.push(e0);
            tt_dev.push(tt);
            report.row([
                ("t", t),
                ("lambda", lam),
                ("null_defect", null),
                ("cross_defect", cross),
                ("e0_defect", e0),
                ("time_defect", tt),
                ("jacobi_mismatch", mismatch),
            ]);
        }
        let (e0_intercept, e0_slope) = linear_fit(&lams, &e0_dev);
        let (tt_intercept, tt_slope) = linear_fit(&lams, &tt_dev);
        report
            .metric("max_null_defect", null_max)
            .metric("max_cross_defect", cross_max)
            .metric("max_jacobi_mismatch", mismatch_max)
            .metric("e0_defect_intercept", e0_intercept)
            .metric("e0_defect_slope", e0_slope)
            .metric("time_defect_intercept", tt_intercept)
            .metric("time_defect_slope", tt_slope)
            .metric("max_e0_defect", e0_dev.iter().copied().fold(0.0, f64::max))
            .metric("max_time_defect", tt_dev.iter().copied().fold(0.0, f64::max));
        report.verdict = Verdict::from_bool(cross_max < 1e-6 && null_max < 1e-8 && mismatch_max < 1e-5);
        Ok(report)
    }

    /// `dev(λ) = max_u ||∇^{g_R} ω_q|_{g_R} − √2|` on shells `Φ_q(0, λ u)`,
    /// with `Ĉ = 1.2 max dev(λ)/λ`.
    pub fn gradient_estimate_experiment(&self, lambda_grid: &[f64], directions_per_shell: usize) -> Result<EstimateReport> {
        let mut report = EstimateReport::new("gradient_estimate");
        let dirs = sampling::spatial_directions::<D>(directions_per_shell);
        let mut lams = Vec::new();
        let mut devs = Vec::new();
        for &lam in lambda_grid {
            if !(lam > 1e-3 * self.radius && lam < self.radius) {
                return Err(Error::Precondition(format!("shell {lam} outside (1e-3 r, r)")));
            }
            let mut dev = 0.0f64;
            for (k, u) in dirs.iter().enumerate() {
                let x = u * lam;
                let z = self.forward(0.0, &x)?;
                let c = self.invert_from(&z, Some((0.0, x)))?;
                let s = self.optical_from(&z, &c, true)?;
                let value = (s.grad_norm_gr.unwrap_or(f64::NAN) - core::f64::consts::SQRT_2).abs();
                dev = dev.max(value);
                report.row([("lambda", lam), ("direction_index", k as f64), ("value", value)]);
            }
            lams.push(lam);
            devs.push(dev);
        }
        let ratios: Vec<f64> = devs.iter().zip(&lams).map(|(d, l)| d / l).collect();
        let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
        let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let c_hat = 1.2 * max_ratio;
        let (_, slope) = linear_fit(&lams, &devs);
        for ((l, d), q) in lams.iter().zip(&devs).zip(&ratios) {
            report.metric(&format!("dev@{l:.6}"), *d).metric(&format!("ratio@{l:.6}"), *q);
        }
        report
            .metric("c_hat", c_hat)
            .metric("slope", slope)
            .metric("max_dev", devs.iter().copied().fold(0.0, f64::max))
            .metric("ratio_spread", if min_ratio > 0.0 { max_ratio / min_ratio } else { f64::INFINITY });
        let ok = devs.iter().all(|d| d.is_finite()) && devs.iter().zip(&lams).all(|(d, l)| *d <= c_hat * l);
        report.verdict = Verdict::from_bool(ok);
        Ok(report)
    }

    /// `sup |ω(z) − ω(z')| / L_{g_R}(z, z')` over chart point pairs, half of
    /// them local perturbations at scale `0.05 r`. The chord length is an
    /// upper bound on `d_{g_R}`, so each ratio is a lower bound on the
    /// Lipschitz quotient.
    pub fn omega_lipschitz_experiment(
        &self,
        gr: &RiemannianizedMetric<D, M>,
        pairs: usize,
        seed: u64,
    ) -> Result<EstimateReport> {
        let mut report = EstimateReport::new("omega_lipschitz");
        let mut rng = sampling::rng(seed);
        let r = self.radius;
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> (f64, Vector<D>) {
            loop {
                let t = rng.random_range(-0.9..0.9) * r;
                let x = spatial(&sampling::in_ball::<D>(rng, 0.9 * r));
                if spatial_norm(&x) > 1e-3 * r {
                    return (t, x);
                }
            }
        };
        let mut sup = 0.0f64;
        let mut excluded = 0usize;
        let mut failures = 0usize;
        for i in 0..pairs {
            let (t1, x1) = draw(&mut rng);
            let (t2, x2) = if i % 2 == 0 {
                draw(&mut rng)
            } else {
                let dt = rng.random_range(-0.05..0.05) * r;
                let dx = spatial(&sampling::in_ball::<D>(&mut rng, 0.05 * r));
                (t1 + dt, x1 + dx)
            };
            let pts = self.forward(t1, &x1).and_then(|a| Ok((a, self.forward(t2, &x2)?)));
            let Ok((a, b)) = pts else {
                failures += 1;
                continue;
            };
            if linalg::norm(&(a - b)) < 1e-6 {
                excluded += 1;
                continue;
            }
            let Ok(length) = gr.chord_length(&a, &b) else {
                failures += 1;
                continue;
            };
            let ratio = (t1 - t2).abs() / length;
            sup = sup.max(ratio);
            report.row([("pair", i as f64), ("delta_omega", (t1 - t2).abs()), ("gr_length", length), ("ratio", ratio)]);
        }
        if failures > 0 {
            report.anomaly(format!("{failures} pairs left the domain"));
        }
        report
            .metric("sup_ratio", sup)
            .metric("excluded_pairs", excluded as f64)
            .metric("failed_pairs", failures as f64);
        report.verdict = Verdict::from_bool(sup <= 2.05);
        Ok(report)
    }
}
