//! Time functions and the cosmological time estimate.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::linalg::{inner, Point, Vector};
use crate::metric::{inverse_time_component, Metric};
use crate::sampling::grid_points;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeKind {
    Coordinate,
    Cosmological,
    Custom,
}

/// A real function strictly increasing along future causal curves.
#[derive(Clone)]
pub struct TimeFunction<const D: usize> {
    kind: TimeKind,
    eval: Arc<dyn Fn(&Point<D>) -> f64 + Send + Sync>,
    lipschitz_hint: Option<f64>,
}

impl<const D: usize> fmt::Debug for TimeFunction<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimeFunction")
            .field("kind", &self.kind)
            .field("lipschitz_hint", &self.lipschitz_hint)
            .finish()
    }
}

impl<const D: usize> TimeFunction<D> {
    pub fn custom(eval: impl Fn(&Point<D>) -> f64 + Send + Sync + 'static, lipschitz_hint: Option<f64>) -> Self {
        TimeFunction {
            kind: TimeKind::Custom,
            eval: Arc::new(eval),
            lipschitz_hint,
        }
    }

    pub fn kind(&self) -> TimeKind {
        self.kind
    }

    pub fn lipschitz_hint(&self) -> Option<f64> {
        self.lipschitz_hint
    }

    pub fn eval(&self, p: &Point<D>) -> f64 {
        (self.eval)(p)
    }

    /// Central-difference coordinate gradient `∂_a τ`.
    pub fn gradient(&self, p: &Point<D>, step: f64) -> Vector<D> {
        Vector::<D>::from_fn(|a, _| {
            let mut plus = *p;
            let mut minus = *p;
            plus[a] += step;
            minus[a] -= step;
            (self.eval(&plus) - self.eval(&minus)) / (2.0 * step)
        })
    }
}

/// `τ(p) = p[0]`, after checking on a sample grid that `g^{00} < 0`.
pub fn coordinate_time<const D: usize, M: Metric<D> + ?Sized>(metric: &M) -> Result<TimeFunction<D>> {
    for p in grid_points(metric.domain(), 5) {
        let g00 = inverse_time_component(&metric.g(&p)?);
        if !(g00 < 0.0) {
            return Err(Error::InvalidTimeFunction(format!(
                "coords[0] has non-timelike gradient at {:?} (g^00 = {g00})",
                p.as_slice()
            )));
        }
    }
    Ok(TimeFunction {
        kind: TimeKind::Coordinate,
        eval: Arc::new(|p: &Point<D>| p[0]),
        lipschitz_hint: Some(1.0),
    })
}

/// Sampling parameters for [`cosmological_time`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveBudget {
    /// Segments of the initial competitor curve.
    pub segments: usize,
    /// Refinement levels; each doubles the segment count and warm-starts
    /// from the previous best curve.
    pub levels: usize,
    /// Coordinate-descent sweeps per level.
    pub sweeps: usize,
    /// Initial coordinate-descent step, relative to the curve's time extent.
    pub initial_step: f64,
}

impl Default for CurveBudget {
    fn default() -> Self {
        CurveBudget {
            segments: 4,
            levels: 2,
            sweeps: 30,
            initial_step: 0.05,
        }
    }
}

impl CurveBudget {
    /// A single comoving competitor, no optimisation.
    pub fn singleton() -> Self {
        CurveBudget {
            segments: 1,
            levels: 0,
            sweeps: 0,
            initial_step: 0.0,
        }
    }
}

/// Certified lower bound on the cosmological time together with the curve
/// attaining it.
#[derive(Debug, Clone)]
pub struct CosmologicalEstimate<const D: usize> {
    pub value: f64,
    pub witness: Vec<Point<D>>,
    /// Best value after each refinement level.
    pub history: Vec<f64>,
}

const GAUSS_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GAUSS_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// Lorentzian length of a straight coordinate segment; `None` unless it is
/// future timelike at every quadrature node.
fn segment_length<const D: usize, M: Metric<D> + ?Sized>(metric: &M, a: &Point<D>, b: &Point<D>) -> Option<f64> {
    let d = b - a;
    if d[0] <= 0.0 {
        return None;
    }
    let mut total = 0.0;
    for (x, w) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS.iter()) {
        let s = 0.5 * (x + 1.0);
        let p = a + d * s;
        let g = metric.g(&p).ok()?;
        let q = -inner(&g, &d, &d);
        if q <= 0.0 {
            return None;
        }
        total += 0.5 * w * q.sqrt();
    }
    Some(total)
}

fn curve_length<const D: usize, M: Metric<D> + ?Sized>(metric: &M, pts: &[Point<D>]) -> Option<f64> {
    pts.windows(2).map(|w| segment_length(metric, &w[0], &w[1])).sum()
}

/// Lower bound on `sup L_g(C)` over future timelike curves from the past
/// boundary to `p`, maximised over piecewise-linear competitors by
/// coordinate descent.
pub fn cosmological_time<const D: usize, M: Metric<D> + ?Sized>(
    metric: &M,
    p: &Point<D>,
    budget: &CurveBudget,
) -> Result<CosmologicalEstimate<D>> {
    let t_past = metric.past_boundary().ok_or_else(|| {
        Error::UnsupportedMetric(format!("{} has no past boundary in its domain", metric.catalog_id()))
    })?;
    metric.check(p)?;
    let extent = p[0] - t_past;
    if extent <= 0.0 {
        return Err(Error::Precondition(format!("point lies on or below the past boundary t = {t_past}")));
    }
    let segments = budget.segments.max(1);
    let mut curve: Vec<Point<D>> = (0..=segments)
        .map(|k| {
            let mut x = *p;
            x[0] = t_past + extent * k as f64 / segments as f64;
            x
        })
        .collect();
    let mut best = curve_length(metric, &curve).ok_or_else(|| {
        Error::UnsupportedMetric(format!("comoving competitor to {:?} is not timelike", p.as_slice()))
    })?;
    let mut history = Vec::with_capacity(budget.levels + 1);

    for level in 0..=budget.levels {
        if level > 0 {
            curve = upsample(&curve);
        }
        let mut step = budget.initial_step * extent;
        for _ in 0..budget.sweeps {
            let mut improved = false;
            let last = curve.len() - 1;
            for i in 0..last {
                // the start point stays on the past boundary
                let first_axis = if i == 0 { 1 } else { 0 };
                for axis in first_axis..D {
                    for sign in [1.0, -1.0] {
                        let mut trial = curve.clone();
                        trial[i][axis] += sign * step;
                        if let Some(len) = curve_length(metric, &trial) {
                            if len > best {
                                best = len;
                                curve = trial;
                                improved = true;
                                break;
                            }
                        }
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        history.push(best);
    }
    Ok(CosmologicalEstimate {
        value: best,
        witness: curve,
        history,
    })
}

fn upsample<const D: usize>(curve: &[Point<D>]) -> Vec<Point<D>> {
    let mut out = Vec::with_capacity(2 * curve.len() - 1);
    for w in curve.windows(2) {
        out.push(w[0]);
        out.push((w[0] + w[1]) * 0.5);
    }
    out.push(curve[curve.len() - 1]);
    out
}
