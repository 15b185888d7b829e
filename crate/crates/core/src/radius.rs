//! Swept surrogates for the constants entering the uniform Temple radius
//! `R = min(δ₀, R_p/4, R_N/√2)`.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::frame::{cylinder_samples, normal_radius, FermiFrame};
use crate::geodesic::{integrate_geodesic, solve_jacobi, FrameProvider, DEFAULT_TOL};
use crate::linalg::{inner, Point, Vector};
use crate::metric::Metric;
use crate::sampling;

/// Number of halvings in the δ and ε sweeps.
pub const SWEEP_LEVELS: usize = 7;

/// Points of `F(W̄_{fill·R_p})`: Fermi images of a cylinder sample.
pub fn temple_sample_set<const D: usize, M: Metric<D> + ?Sized>(
    frame: &FermiFrame<D, M>,
    count: usize,
    fill: f64,
) -> Result<Vec<Point<D>>> {
    let mut pts = Vec::with_capacity(count + 1);
    pts.push(*frame.center());
    for y in cylinder_samples::<D>(count, frame.radius(), fill) {
        if pts.len() > count {
            break;
        }
        pts.push(frame.fermi_map(&y)?);
    }
    Ok(pts)
}

/// Null velocity `scale · (e_0 + Σ u_i e_i)` for a unit spatial `u`; its
/// largest frame component is exactly `scale`.
pub fn framed_null_velocity<const D: usize>(frame: &[Vector<D>; D], u: &Vector<D>, scale: f64) -> Vector<D> {
    let mut v = frame[0];
    for i in 1..D {
        v += frame[i] * u[i];
    }
    v * scale
}

/// `max_a |g(v, e_a)|`.
pub fn frame_bound<const D: usize>(g: &crate::linalg::Matrix<D>, frame: &[Vector<D>; D], v: &Vector<D>) -> f64 {
    frame.iter().map(|e| inner(g, v, e).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityRow {
    pub delta: f64,
    /// `sup_λ max_a |g(γ̇(λ), e_a)|` over the sampled geodesics.
    pub epsilon: f64,
    /// Geodesics that left the frame domain before `λ = 1`.
    pub escaped: usize,
}

/// The empirical `ε(δ)` of the velocity-bound propagation: null geodesics
/// from each sample point with initial frame bound `δ`, followed over
/// `λ ∈ [0, 1]` and checked at five parameters.
pub fn velocity_bound<const D: usize, M: Metric<D> + ?Sized>(
    frame: &FermiFrame<D, M>,
    samples: &[Point<D>],
    delta: f64,
    directions: usize,
) -> Result<VelocityRow> {
    let metric = &**frame.metric();
    let dirs = sampling::spatial_directions::<D>(directions);
    let mut epsilon = 0.0f64;
    let mut escaped = 0;
    for q in samples {
        let eq = frame.frame_at(q)?;
        for u in &dirs {
            let v = framed_null_velocity(&eq, u, delta);
            let traj = integrate_geodesic(metric, q, &v, 1.0, DEFAULT_TOL)?;
            let mut ok = traj.truncated().is_none();
            for k in 0..=4 {
                let lambda = 0.25 * k as f64;
                let Some(state) = traj.eval(lambda) else {
                    ok = false;
                    break;
                };
                match frame.frame_at(&state.base) {
                    Ok(e) => {
                        let g = metric.g(&state.base)?;
                        epsilon = epsilon.max(frame_bound(&g, &e, &state.components));
                    }
                    Err(_) => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                escaped += 1;
            }
        }
    }
    Ok(VelocityRow { delta, epsilon, escaped })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiRow {
    pub epsilon: f64,
    /// `max |g(J, J) + 1|` over nodes of all sampled geodesics.
    pub max_deviation: f64,
    pub all_timelike: bool,
}

/// Jacobi fields with `J(0) = e_0`, `D_λJ(0) = 0` along null geodesics of
/// frame bound `epsilon` from every sample point, over `λ ∈ [0, 1]` (or up to
/// the domain exit).
pub fn jacobi_deviation<const D: usize, M: Metric<D> + ?Sized>(
    frame: &FermiFrame<D, M>,
    samples: &[Point<D>],
    epsilon: f64,
    directions: usize,
) -> Result<JacobiRow> {
    let metric = &**frame.metric();
    let dirs = sampling::spatial_directions::<D>(directions);
    let mut max_deviation = 0.0f64;
    let mut all_timelike = true;
    for q in samples {
        let eq = frame.frame_at(q)?;
        for u in &dirs {
            let v = framed_null_velocity(&eq, u, epsilon);
            let traj = integrate_geodesic(metric, q, &v, 1.0, DEFAULT_TOL)?;
            let jac = solve_jacobi(metric, &traj, &eq[0], &Vector::<D>::zeros())?;
            for (x, j) in jac.points.iter().zip(&jac.field) {
                let q = inner(&metric.g(x)?, j, j);
                max_deviation = max_deviation.max((q + 1.0).abs());
                all_timelike &= q < 0.0;
            }
        }
    }
    Ok(JacobiRow {
        epsilon,
        max_deviation,
        all_timelike,
    })
}

#[derive(Debug, Clone)]
pub struct TempleRadius {
    pub radius: f64,
    pub frame_radius: f64,
    /// `min` of the normal radii over the sample set.
    pub normal_radius: f64,
    /// Infinite when no swept value constrains it.
    pub delta0: f64,
    pub epsilon0: f64,
    pub velocity_table: Vec<VelocityRow>,
    pub jacobi_table: Vec<JacobiRow>,
}

/// `min(δ̂₀, R_p/4, R̂_N/√2)` with the sweeps of factor 2 that define `ε̂₀`
/// and `δ̂₀`.
pub fn uniform_temple_radius<const D: usize, M: Metric<D> + ?Sized>(
    frame: &FermiFrame<D, M>,
    samples: &[Point<D>],
    directions: usize,
) -> Result<TempleRadius> {
    if samples.is_empty() {
        return Err(Error::Precondition(alloc::string::String::from("empty sample set")));
    }
    let mut r_n = f64::INFINITY;
    for q in samples {
        let sweep = normal_radius(frame, q).map_err(|e| Error::bound("normal radius", e))?;
        r_n = r_n.min(sweep.radius);
    }

    let mut jacobi_table = Vec::new();
    let mut epsilon0 = 0.0;
    let mut constrained = false;
    for k in 0..SWEEP_LEVELS {
        let eps = 0.5f64.powi(k as i32);
        let row = jacobi_deviation(frame, samples, eps, directions).map_err(|e| Error::bound("jacobi epsilon", e))?;
        jacobi_table.push(row);
        if row.all_timelike {
            epsilon0 = eps;
            break;
        }
        constrained = true;
    }
    if !constrained {
        epsilon0 = f64::INFINITY;
    } else if epsilon0 == 0.0 {
        return Err(Error::bound(
            "jacobi epsilon",
            Error::DegenerateFrame(alloc::format!("Jacobi fields not timelike down to ε = {:e}", 0.5f64.powi(SWEEP_LEVELS as i32 - 1))),
        ));
    }

    let mut velocity_table = Vec::new();
    let delta0 = if epsilon0.is_infinite() {
        f64::INFINITY
    } else {
        let mut found = None;
        for k in 0..SWEEP_LEVELS + 3 {
            let delta = epsilon0 * 0.5f64.powi(k as i32);
            let row = velocity_bound(frame, samples, delta, directions).map_err(|e| Error::bound("velocity delta", e))?;
            velocity_table.push(row);
            if row.epsilon <= epsilon0 && row.escaped == 0 {
                found = Some(delta);
                break;
            }
        }
        found.ok_or_else(|| {
            Error::bound(
                "velocity delta",
                Error::DegenerateFrame(alloc::string::String::from("velocity bound never below ε̂₀")),
            )
        })?
    };

    let r_p = frame.radius();
    let radius = delta0.min(r_p / 4.0).min(r_n / core::f64::consts::SQRT_2);
    Ok(TempleRadius {
        radius,
        frame_radius: r_p,
        normal_radius: r_n,
        delta0,
        epsilon0,
        velocity_table,
        jacobi_table,
    })
}
