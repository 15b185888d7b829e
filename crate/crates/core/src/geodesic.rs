//! Geodesics, parallel transport, Jacobi fields and (framed) exponential maps.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{self, contract, inner, riemann_apply, Matrix, Point, Vector};
use crate::metric::Metric;
use crate::ode::{self, OdeSolution, Stepping};

/// Default local error tolerance for geodesic integration.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tangent<const D: usize> {
    pub base: Point<D>,
    pub components: Vector<D>,
}

impl<const D: usize> Tangent<D> {
    pub fn new(base: Point<D>, components: Vector<D>) -> Self {
        Tangent { base, components }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Timelike,
    Null,
    Spacelike,
    Transport,
}

impl CurveKind {
    /// Causal character of `v` under `g`, with a relative null band.
    pub fn classify<const D: usize>(g: &Matrix<D>, v: &Vector<D>) -> Self {
        let q = inner(g, v, v);
        let scale = v.norm_squared().max(f64::MIN_POSITIVE);
        if q.abs() <= 1e-12 * scale {
            CurveKind::Null
        } else if q < 0.0 {
            CurveKind::Timelike
        } else {
            CurveKind::Spacelike
        }
    }
}

/// An integrated curve with state `(x, ẋ)` at every node and dense output
/// in between.
#[derive(Debug, Clone)]
pub struct Trajectory<const D: usize> {
    kind: CurveKind,
    solution: OdeSolution,
    stepping: Stepping,
}

impl<const D: usize> Trajectory<D> {
    /// Wraps an ODE solution whose state starts with `(x, ẋ)`.
    pub fn from_solution(kind: CurveKind, solution: OdeSolution, stepping: Stepping) -> Result<Self> {
        if solution.dim() < 2 * D || solution.is_empty() {
            return Err(Error::Precondition(format!(
                "state dimension {} cannot hold a {D}-dimensional position and velocity",
                solution.dim()
            )));
        }
        Ok(Trajectory {
            kind,
            solution,
            stepping,
        })
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn stepping(&self) -> Stepping {
        self.stepping
    }

    pub fn params(&self) -> &[f64] {
        self.solution.times()
    }

    pub fn len(&self) -> usize {
        self.solution.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solution.is_empty()
    }

    pub fn point(&self, i: usize) -> Point<D> {
        Point::<D>::from_column_slice(&self.solution.state(i)[..D])
    }

    pub fn velocity(&self, i: usize) -> Vector<D> {
        Vector::<D>::from_column_slice(&self.solution.state(i)[D..2 * D])
    }

    pub fn start(&self) -> Tangent<D> {
        Tangent::new(self.point(0), self.velocity(0))
    }

    pub fn end(&self) -> Tangent<D> {
        let i = self.len() - 1;
        Tangent::new(self.point(i), self.velocity(i))
    }

    pub fn param_range(&self) -> (f64, f64) {
        (self.solution.t_start(), self.solution.t_end())
    }

    /// Parameter where the curve hit the domain boundary, if it did.
    pub fn truncated(&self) -> Option<f64> {
        self.solution.truncated()
    }

    /// Dense-output `(x, ẋ)` at parameter `lambda`.
    pub fn eval(&self, lambda: f64) -> Option<Tangent<D>> {
        let mut buf = vec![0.0; self.solution.dim()];
        self.solution.eval(lambda, &mut buf)?;
        Some(Tangent::new(
            Point::<D>::from_column_slice(&buf[..D]),
            Vector::<D>::from_column_slice(&buf[D..2 * D]),
        ))
    }

    /// `sup |g(γ̇,γ̇) − g(γ̇,γ̇)|_{λ=0}|` over the nodes.
    pub fn norm_drift<M: Metric<D> + ?Sized>(&self, metric: &M) -> Result<f64> {
        let q0 = self.speed_squared(metric, 0)?;
        let mut worst = 0.0f64;
        for i in 1..self.len() {
            worst = worst.max((self.speed_squared(metric, i)? - q0).abs());
        }
        Ok(worst)
    }

    pub fn speed_squared<M: Metric<D> + ?Sized>(&self, metric: &M, i: usize) -> Result<f64> {
        let v = self.velocity(i);
        Ok(inner(&metric.g(&self.point(i))?, &v, &v))
    }

    /// Writes `lambda, x0…xn, v0…vn` rows.
    pub fn write_csv(&self, out: &mut impl core::fmt::Write) -> core::fmt::Result {
        write!(out, "lambda")?;
        for a in 0..D {
            write!(out, ",x{a}")?;
        }
        for a in 0..D {
            write!(out, ",v{a}")?;
        }
        writeln!(out)?;
        for i in 0..self.len() {
            write!(out, "{}", self.params()[i])?;
            for v in self.solution.state(i)[..2 * D].iter() {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Right-hand side of the geodesic equation with `extra` vectors parallel
/// transported alongside. State layout: `x, v, w_1, …, w_extra`.
pub(crate) fn geodesic_rhs<'a, const D: usize, M: Metric<D> + ?Sized>(
    metric: &'a M,
    extra: usize,
) -> impl FnMut(f64, &[f64], &mut [f64]) -> Result<()> + 'a {
    move |_t, y, dy| {
        let x = Point::<D>::from_column_slice(&y[..D]);
        let v = Vector::<D>::from_column_slice(&y[D..2 * D]);
        let gamma = metric.christoffel(&x)?;
        dy[..D].copy_from_slice(&y[D..2 * D]);
        let acc = contract(&gamma, &v, &v);
        for c in 0..D {
            dy[D + c] = -acc[c];
        }
        for k in 0..extra {
            let off = (2 + k) * D;
            let w = Vector::<D>::from_column_slice(&y[off..off + D]);
            let dw = contract(&gamma, &v, &w);
            for c in 0..D {
                dy[off + c] = -dw[c];
            }
        }
        Ok(())
    }
}

pub(crate) fn pack<const D: usize>(x: &Point<D>, v: &Vector<D>, extra: &[Vector<D>]) -> Vec<f64> {
    let mut y = Vec::with_capacity((2 + extra.len()) * D);
    y.extend_from_slice(x.as_slice());
    y.extend_from_slice(v.as_slice());
    for w in extra {
        y.extend_from_slice(w.as_slice());
    }
    y
}

/// Solves `ẍ^c + Γ^c_{ab} ẋ^a ẋ^b = 0` from `(p, v)` up to `lambda_max`,
/// truncating (with flag) where the curve leaves the domain.
pub fn integrate_geodesic<const D: usize, M: Metric<D> + ?Sized>(
    metric: &M,
    p: &Point<D>,
    v: &Vector<D>,
    lambda_max: f64,
    tol: f64,
) -> Result<Trajectory<D>> {
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("tolerance must be positive, got {tol}")));
    }
    integrate_geodesic_with(metric, p, v, lambda_max, Stepping::Adaptive { tol })
}

pub fn integrate_geodesic_with<const D: usize, M: Metric<D> + ?Sized>(
    metric: &M,
    p: &Point<D>,
    v: &Vector<D>,
    lambda_max: f64,
    stepping: Stepping,
) -> Result<Trajectory<D>> {
    let g = metric.g(p)?;
    let kind = CurveKind::classify(&g, v);
    let sol = ode::integrate(geodesic_rhs(metric, 0), 0.0, &pack(p, v, &[]), lambda_max, stepping)?;
    Trajectory::from_solution(kind, sol, stepping)
}

/// End point, end velocity and transported vectors of the geodesic from
/// `(p, v)` at parameter `lambda`. Fails if the curve exits the domain first.
pub fn shoot<const D: usize, const K: usize, M: Metric<D> + ?Sized>(
    metric: &M,
    p: &Point<D>,
    v: &Vector<D>,
    vectors: &[Vector<D>; K],
    lambda: f64,
    stepping: Stepping,
) -> Result<(Point<D>, Vector<D>, [Vector<D>; K])> {
    metric.check(p)?;
    let sol = ode::integrate(geodesic_rhs(metric, K), 0.0, &pack(p, v, vectors), lambda, stepping)?;
    if let Some(stop) = sol.truncated() {
        return Err(Error::Boundary { lambda: stop });
    }
    let y = sol.last_state();
    let x = Point::<D>::from_column_slice(&y[..D]);
    let w = Vector::<D>::from_column_slice(&y[D..2 * D]);
    let out = core::array::from_fn(|k| Vector::<D>::from_column_slice(&y[(2 + k) * D..(3 + k) * D]));
    Ok((x, w, out))
}

/// A vector field parallel along a trajectory, sampled at its nodes.
#[derive(Debug, Clone)]
pub struct TransportedField<const D: usize> {
    pub params: Vec<f64>,
    pub values: Vec<Vector<D>>,
}

/// Solves `D_λ V = 0` along `along`, starting from `v0` at its first node.
pub fn parallel_transport<const D: usize, M: Metric<D> + ?Sized>(
    metric: &M,
    along: &Trajectory<D>,
    v0: &Vector<D>,
) -> Result<TransportedField<D>> {
    let start = along.start();
    let (_, lambda_end) = along.param_range();
    let sol = ode::integrate(
        geodesic_rhs(metric, 1),
        0.0,
        &pack(&start.base, &start.components, core::slice::from_ref(v0)),
        lambda_end,
        along.stepping(),
    )?;
    let mut buf = vec![0.0; 3 * D];
    let mut values = Vec::with_capacity(along.len());
    for &lambda in along.params() {
        sol.eval(lambda, &mut buf)
            .ok_or_else(|| Error::Boundary { lambda })?;
        values.push(Vector::<D>::from_column_slice(&buf[2 * D..]));
    }
    Ok(TransportedField {
        params: along.params().to_vec(),
        values,
    })
}

/// A Jacobi field and its covariant derivative at the nodes of a geodesic.
#[derive(Debug, Clone)]
pub struct JacobiSolution<const D: usize> {
    pub params: Vec<f64>,
    pub points: Vec<Point<D>>,
    pub velocities: Vec<Vector<D>>,
    pub field: Vec<Vector<D>>,
    pub derivative: Vec<Vector<D>>,
    solution: OdeSolution,
}

impl<const D: usize> JacobiSolution<D> {
    /// `(x, ẋ, J, D_λJ)` at an arbitrary parameter.
    pub fn eval(&self, lambda: f64) -> Option<[Vector<D>; 4]> {
        let mut buf = vec![0.0; 4 * D];
        self.solution.eval(lambda, &mut buf)?;
        Some(core::array::from_fn(|k| Vector::<D>::from_column_slice(&buf[k * D..(k + 1) * D])))
    }
}

/// Residual of the geodesic equation at the midpoints of a trajectory's
/// steps, measured on the dense output by central differences.
pub fn geodesic_residual<const D: usize, M: Metric<D> + ?Sized>(metric: &M, along: &Trajectory<D>) -> Result<f64> {
    let params = along.params();
    let mut worst = 0.0f64;
    for w in params.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let h = 1e-4 * (w[1] - w[0]);
        if h == 0.0 {
            continue;
        }
        let (Some(a), Some(b), Some(c)) = (along.eval(mid - h), along.eval(mid + h), along.eval(mid)) else {
            continue;
        };
        let accel = (b.components - a.components) / (2.0 * h);
        let gamma = metric.christoffel(&c.base)?;
        let r = accel + contract(&gamma, &c.components, &c.components);
        let scale = 1.0 + c.components.norm_squared();
        worst = worst.max(r.norm() / scale);
    }
    Ok(worst)
}

/// Integrates `D²J + R(J, γ̇)γ̇ = 0` as a first-order system in `(J, D_λJ)`.
pub fn solve_jacobi<const D: usize, M: Metric<D> + ?Sized>(
    metric: &M,
    along: &Trajectory<D>,
    j0: &Vector<D>,
    dj0: &Vector<D>,
) -> Result<JacobiSolution<D>> {
    let residual = geodesic_residual(metric, along)?;
    if residual > 1e-4 {
        return Err(Error::Precondition(format!(
            "trajectory is not a geodesic (equation residual {residual:e})"
        )));
    }
    let start = along.start();
    let (_, lambda_end) = along.param_range();
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let x = Point::<D>::from_column_slice(&y[..D]);
        let v = Vector::<D>::from_column_slice(&y[D..2 * D]);
        let j = Vector::<D>::from_column_slice(&y[2 * D..3 * D]);
        let dj = Vector::<D>::from_column_slice(&y[3 * D..]);
        let gamma = metric.christoffel(&x)?;
        let riem = metric.riemann(&x)?;
        let acc = contract(&gamma, &v, &v);
        let j_dot = dj - contract(&gamma, &v, &j);
        let dj_dot = -contract(&gamma, &v, &dj) - riemann_apply(&riem, &v, &j, &v);
        for c in 0..D {
            dy[c] = v[c];
            dy[D + c] = -acc[c];
            dy[2 * D + c] = j_dot[c];
            dy[3 * D + c] = dj_dot[c];
        }
        Ok(())
    };
    let sol = ode::integrate(
        rhs,
        0.0,
        &pack(&start.base, &start.components, &[*j0, *dj0]),
        lambda_end,
        along.stepping(),
    )?;
    let mut out = JacobiSolution {
        params: along.params().to_vec(),
        points: Vec::with_capacity(along.len()),
        velocities: Vec::with_capacity(along.len()),
        field: Vec::with_capacity(along.len()),
        derivative: Vec::with_capacity(along.len()),
        solution: sol,
    };
    for &lambda in along.params() {
        let [x, v, j, dj] = out.eval(lambda).ok_or(Error::Boundary { lambda })?;
        out.points.push(x);
        out.velocities.push(v);
        out.field.push(j);
        out.derivative.push(dj);
    }
    Ok(out)
}

/// `exp_q(v)`: the geodesic from `(q, v)` at parameter one.
pub fn exp_map<const D: usize, M: Metric<D> + ?Sized>(metric: &M, q: &Point<D>, v: &Vector<D>) -> Result<Point<D>> {
    exp_map_with(metric, q, v, Stepping::Adaptive { tol: DEFAULT_TOL })
}

pub fn exp_map_with<const D: usize, M: Metric<D> + ?Sized>(
    metric: &M,
    q: &Point<D>,
    v: &Vector<D>,
    stepping: Stepping,
) -> Result<Point<D>> {
    if v.iter().all(|c| *c == 0.0) {
        metric.check(q)?;
        return Ok(*q);
    }
    shoot(metric, q, v, &[], 1.0, stepping).map(|(x, _, _)| x)
}

/// Source of an orthonormal frame `{e_a}` at points of a region.
pub trait FrameProvider<const D: usize> {
    /// Frame vectors at `q`, `e_0` first.
    fn frame_at(&self, q: &Point<D>) -> Result<[Vector<D>; D]>;
}

/// The same components at every point, e.g. the coordinate basis of flat space.
#[derive(Debug, Clone, Copy)]
pub struct ConstantFrame<const D: usize>(pub [Vector<D>; D]);

impl<const D: usize> ConstantFrame<D> {
    pub fn coordinate() -> Self {
        ConstantFrame(core::array::from_fn(|a| {
            let mut e = Vector::<D>::zeros();
            e[a] = 1.0;
            e
        }))
    }
}

impl<const D: usize> FrameProvider<D> for ConstantFrame<D> {
    fn frame_at(&self, _q: &Point<D>) -> Result<[Vector<D>; D]> {
        Ok(self.0)
    }
}

/// Matrix whose columns are the frame vectors.
pub fn frame_matrix<const D: usize>(frame: &[Vector<D>; D]) -> Matrix<D> {
    Matrix::<D>::from_fn(|i, a| frame[a][i])
}

/// Number of fixed steps used by the framed exponential's Newton solver.
pub const SHOOTING_STEPS: usize = 16;

/// `EXP_q(y) = exp_q(y_0 e_0 + … + y_n e_n)` with a Newton inverse.
pub struct FramedExp<'a, const D: usize, M: ?Sized, F: ?Sized> {
    pub metric: &'a M,
    pub frame: &'a F,
    pub stepping: Stepping,
    /// Targets whose flat-space preimage exceeds this are refused.
    pub normal_radius: Option<f64>,
    pub max_iterations: usize,
}

impl<'a, const D: usize, M, F> FramedExp<'a, D, M, F>
where
    M: Metric<D> + ?Sized,
    F: FrameProvider<D> + ?Sized,
{
    pub fn new(metric: &'a M, frame: &'a F) -> Self {
        FramedExp {
            metric,
            frame,
            stepping: Stepping::Fixed { steps: SHOOTING_STEPS },
            normal_radius: None,
            max_iterations: 50,
        }
    }

    pub fn with_normal_radius(mut self, radius: f64) -> Self {
        self.normal_radius = Some(radius);
        self
    }

    pub fn eval(&self, q: &Point<D>, y: &Vector<D>) -> Result<Point<D>> {
        let basis = frame_matrix(&self.frame.frame_at(q)?);
        exp_map_with(self.metric, q, &(basis * y), self.stepping)
    }

    /// Solves `EXP_q(y) = target` by damped Newton on the shooting residual.
    pub fn invert(&self, q: &Point<D>, target: &Point<D>, guess: Option<Vector<D>>) -> Result<Vector<D>> {
        self.metric.check(target)?;
        let basis = frame_matrix(&self.frame.frame_at(q)?);
        let basis_inv = basis
            .try_inverse()
            .ok_or_else(|| Error::DegenerateFrame(format!("singular frame at {:?}", q.as_slice())))?;
        let flat = basis_inv * (target - q);
        if let Some(radius) = self.normal_radius {
            let distance = linalg::norm(&flat);
            if distance > radius {
                return Err(Error::OutOfRadius { distance, radius });
            }
        }
        let shoot = |y: &Vector<D>| exp_map_with(self.metric, q, &(basis * y), self.stepping);
        newton_solve(shoot, target, guess.unwrap_or(flat), Some(basis), self.max_iterations, 1e-9)
    }
}

/// Damped quasi-Newton solve of `f(y) = target`, starting from `jacobian`
/// (or a finite-difference one) with Broyden updates and finite-difference
/// refreshes on stalls. Succeeds when the coordinate residual drops below
/// `accept`; keeps iterating towards round-off while it improves.
pub fn newton_solve<const D: usize>(
    f: impl Fn(&Vector<D>) -> Result<Point<D>>,
    target: &Point<D>,
    guess: Vector<D>,
    jacobian: Option<Matrix<D>>,
    max_iterations: usize,
    accept: f64,
) -> Result<Vector<D>> {
    let mut y = guess;
    let mut value = f(&y)?;
    let mut residual = value - target;
    let mut res_norm = linalg::norm(&residual);
    let scale = linalg::norm(&y).max(1e-3);
    let fd_step = 1e-6 * scale;
    let fd_jacobian = |y: &Vector<D>, fy: &Point<D>| -> Result<Matrix<D>> {
        let mut jac = Matrix::<D>::zeros();
        for k in 0..D {
            let mut yk = *y;
            yk[k] += fd_step;
            let col = (f(&yk)? - fy) / fd_step;
            jac.set_column(k, &col);
        }
        Ok(jac)
    };
    let mut fresh = jacobian.is_none();
    let mut jac = match jacobian {
        Some(j) => j,
        None => fd_jacobian(&y, &value)?,
    };
    let floor = 1e-14 * (1.0 + linalg::norm(target));
    for _ in 0..max_iterations {
        if res_norm <= floor {
            break;
        }
        let Some(step) = linalg::solve(&jac, &residual) else {
            if fresh {
                break;
            }
            jac = fd_jacobian(&y, &value)?;
            fresh = true;
            continue;
        };
        let mut damping = 1.0;
        let mut accepted = None;
        for _ in 0..=8 {
            let trial = y - step * damping;
            if let Ok(v) = f(&trial) {
                let r = v - target;
                let n = linalg::norm(&r);
                if n < res_norm {
                    accepted = Some((trial, v, r, n));
                    break;
                }
            }
            damping *= 0.5;
        }
        match accepted {
            Some((trial, v, r, n)) => {
                // Broyden rank-one update
                let dy = trial - y;
                let df = v - value;
                let denom = dy.norm_squared();
                if denom > 0.0 {
                    jac += (df - jac * dy) * dy.transpose() / denom;
                }
                fresh = false;
                let stalled = n > 0.5 * res_norm;
                y = trial;
                value = v;
                residual = r;
                res_norm = n;
                if stalled && res_norm > accept {
                    jac = fd_jacobian(&y, &value)?;
                    fresh = true;
                }
            }
            None => {
                if fresh {
                    break;
                }
                jac = fd_jacobian(&y, &value)?;
                fresh = true;
            }
        }
    }
    if res_norm < accept {
        Ok(y)
    } else {
        Err(Error::NoConvergence {
            iterations: max_iterations,
            residual: res_norm,
        })
    }
}

/// `EXP_q(y)` with an explicit frame provider.
pub fn framed_exp<const D: usize, M, F>(metric: &M, frame: &F, q: &Point<D>, y: &Vector<D>) -> Result<Point<D>>
where
    M: Metric<D> + ?Sized,
    F: FrameProvider<D> + ?Sized,
{
    FramedExp::new(metric, frame).eval(q, y)
}

pub fn invert_framed_exp<const D: usize, M, F>(
    metric: &M,
    frame: &F,
    q: &Point<D>,
    target: &Point<D>,
    guess: Option<Vector<D>>,
) -> Result<Vector<D>>
where
    M: Metric<D> + ?Sized,
    F: FrameProvider<D> + ?Sized,
{
    FramedExp::new(metric, frame).invert(q, target, guess)
}
