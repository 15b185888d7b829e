//! Analytic spacetimes on coordinate boxes.
//!
//! Every catalog metric evaluates `g`, its Christoffel symbols and their
//! coordinate gradient; the Riemann tensor is assembled from those. Checked
//! evaluators refuse points outside the domain box, unchecked ones are used
//! internally by finite-difference stencils that may straddle the boundary.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::string::String;
use alloc::format;

use crate::error::{Error, Result};
use crate::linalg::{self, Christoffel, Matrix, Point, Riemann, Vector};

/// Axis-aligned coordinate box `[min_i, max_i]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordBox<const D: usize> {
    pub min: [f64; D],
    pub max: [f64; D],
}

impl<const D: usize> CoordBox<D> {
    pub fn new(min: [f64; D], max: [f64; D]) -> Self {
        CoordBox { min, max }
    }

    pub fn cube(center: &Point<D>, half_width: f64) -> Self {
        CoordBox {
            min: core::array::from_fn(|i| center[i] - half_width),
            max: core::array::from_fn(|i| center[i] + half_width),
        }
    }

    pub fn contains(&self, p: &Point<D>) -> bool {
        (0..D).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn diameter(&self) -> f64 {
        (0..D).map(|i| (self.max[i] - self.min[i]).powi(2)).sum::<f64>().sqrt()
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.max[axis] - self.min[axis]
    }

    /// Smallest coordinate distance from `p` to the box faces (negative outside).
    pub fn boundary_distance(&self, p: &Point<D>) -> f64 {
        (0..D)
            .map(|i| (p[i] - self.min[i]).min(self.max[i] - p[i]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn intersect(&self, other: &Self) -> Self {
        CoordBox {
            min: core::array::from_fn(|i| self.min[i].max(other.min[i])),
            max: core::array::from_fn(|i| self.max[i].min(other.max[i])),
        }
    }

    /// Maps unit-cube coordinates `u ∈ [0,1]^D` into the box.
    pub fn lerp(&self, u: &[f64; D]) -> Point<D> {
        Point::<D>::from_fn(|i, _| self.min[i] + u[i] * (self.max[i] - self.min[i]))
    }
}

/// A Lorentzian metric of signature (−,+,…,+) on a coordinate box.
pub trait Metric<const D: usize>: Send + Sync {
    fn catalog_id(&self) -> &str;

    fn domain(&self) -> &CoordBox<D>;

    /// `g_{ab}` without the domain check.
    fn metric_raw(&self, p: &Point<D>) -> Matrix<D>;

    fn christoffel_raw(&self, p: &Point<D>) -> Christoffel<D> {
        christoffel_from_metric(|x| self.metric_raw(x), p, self.fd_step())
    }

    /// `out[d]` is `∂_d Γ`.
    fn christoffel_gradient_raw(&self, p: &Point<D>) -> [Christoffel<D>; D] {
        richardson_gradient(|x| self.christoffel_raw(x), p, self.fd_step())
    }

    /// Step of the finite-difference stencils used by the default methods.
    fn fd_step(&self) -> f64 {
        1e-4 * self.domain().diameter()
    }

    /// Coordinate value of the past boundary (`coords[0]`), if the spacetime
    /// has one at the bottom face of its box.
    fn past_boundary(&self) -> Option<f64> {
        None
    }

    fn check(&self, p: &Point<D>) -> Result<()> {
        if linalg::is_finite(p) && self.domain().contains(p) {
            Ok(())
        } else {
            Err(Error::out_of_domain(p))
        }
    }

    fn g(&self, p: &Point<D>) -> Result<Matrix<D>> {
        self.check(p)?;
        Ok(self.metric_raw(p))
    }

    fn christoffel(&self, p: &Point<D>) -> Result<Christoffel<D>> {
        self.check(p)?;
        Ok(self.christoffel_raw(p))
    }

    fn riemann(&self, p: &Point<D>) -> Result<Riemann<D>> {
        self.check(p)?;
        Ok(riemann_from_jet(&self.christoffel_raw(p), &self.christoffel_gradient_raw(p)))
    }
}

impl<const D: usize, M: Metric<D> + ?Sized> Metric<D> for alloc::boxed::Box<M> {
    fn catalog_id(&self) -> &str {
        (**self).catalog_id()
    }
    fn domain(&self) -> &CoordBox<D> {
        (**self).domain()
    }
    fn metric_raw(&self, p: &Point<D>) -> Matrix<D> {
        (**self).metric_raw(p)
    }
    fn christoffel_raw(&self, p: &Point<D>) -> Christoffel<D> {
        (**self).christoffel_raw(p)
    }
    fn christoffel_gradient_raw(&self, p: &Point<D>) -> [Christoffel<D>; D] {
        (**self).christoffel_gradient_raw(p)
    }
    fn fd_step(&self) -> f64 {
        (**self).fd_step()
    }
    fn past_boundary(&self) -> Option<f64> {
        (**self).past_boundary()
    }
}

/// `Γ^c_{ab} = ½ g^{cd}(∂_a g_{db} + ∂_b g_{da} − ∂_d g_{ab})` with the metric
/// derivatives taken by once-Richardson-extrapolated central differences.
pub fn christoffel_from_metric<const D: usize>(
    metric: impl Fn(&Point<D>) -> Matrix<D>,
    p: &Point<D>,
    h: f64,
) -> Christoffel<D> {
    let dg = richardson_gradient(&metric, p, h);
    let ginv = metric(p).try_inverse().unwrap_or_else(Matrix::<D>::zeros);
    christoffel_from_derivatives(&ginv, &dg)
}

/// Christoffel symbols from `g^{-1}` and `dg[d] = ∂_d g`.
pub fn christoffel_from_derivatives<const D: usize>(ginv: &Matrix<D>, dg: &[Matrix<D>; D]) -> Christoffel<D> {
    let mut lowered = [Matrix::<D>::zeros(); D];
    for (d, low) in lowered.iter_mut().enumerate() {
        *low = Matrix::<D>::from_fn(|a, b| 0.5 * (dg[a][(d, b)] + dg[b][(d, a)] - dg[d][(a, b)]));
    }
    core::array::from_fn(|c| {
        let mut m = Matrix::<D>::zeros();
        for (d, low) in lowered.iter().enumerate() {
            let w = ginv[(c, d)];
            if w != 0.0 {
                m += low * w;
            }
        }
        m
    })
}

/// Central differences at steps `h` and `h/2`, combined as `(4 D(h/2) − D(h)) / 3`.
pub fn richardson_gradient<const D: usize, T>(f: impl Fn(&Point<D>) -> T, p: &Point<D>, h: f64) -> [T; D]
where
    T: Differentiable,
{
    core::array::from_fn(|axis| {
        let central = |step: f64| {
            let mut plus = *p;
            let mut minus = *p;
            plus[axis] += step;
            minus[axis] -= step;
            T::central(&f(&plus), &f(&minus), step)
        };
        let coarse = central(h);
        let fine = central(0.5 * h);
        T::richardson(&fine, &coarse)
    })
}

/// Values that central differences can be taken of.
pub trait Differentiable: Sized {
    fn central(plus: &Self, minus: &Self, step: f64) -> Self;
    /// `(4 fine − coarse) / 3`
    fn richardson(fine: &Self, coarse: &Self) -> Self;
}

impl Differentiable for f64 {
    fn central(plus: &Self, minus: &Self, step: f64) -> Self {
        (plus - minus) / (2.0 * step)
    }
    fn richardson(fine: &Self, coarse: &Self) -> Self {
        (4.0 * fine - coarse) / 3.0
    }
}

impl<const D: usize> Differentiable for Matrix<D> {
    fn central(plus: &Self, minus: &Self, step: f64) -> Self {
        (plus - minus) / (2.0 * step)
    }
    fn richardson(fine: &Self, coarse: &Self) -> Self {
        (fine * 4.0 - coarse) / 3.0
    }
}

impl<const D: usize> Differentiable for [Matrix<D>; D] {
    fn central(plus: &Self, minus: &Self, step: f64) -> Self {
        core::array::from_fn(|c| (plus[c] - minus[c]) / (2.0 * step))
    }
    fn richardson(fine: &Self, coarse: &Self) -> Self {
        core::array::from_fn(|c| (fine[c] * 4.0 - coarse[c]) / 3.0)
    }
}

/// `R^a_{bcd} = ∂_c Γ^a_{db} − ∂_d Γ^a_{cb} + Γ^a_{ce} Γ^e_{db} − Γ^a_{de} Γ^e_{cb}`.
pub fn riemann_from_jet<const D: usize>(gamma: &Christoffel<D>, dgamma: &[Christoffel<D>; D]) -> Riemann<D> {
    core::array::from_fn(|a| {
        core::array::from_fn(|b| {
            Matrix::<D>::from_fn(|c, d| {
                let mut r = dgamma[c][a][(d, b)] - dgamma[d][a][(c, b)];
                for e in 0..D {
                    r += gamma[a][(c, e)] * gamma[e][(d, b)] - gamma[a][(d, e)] * gamma[e][(c, b)];
                }
                r
            })
        })
    })
}

fn minkowski_matrix<const D: usize>() -> Matrix<D> {
    let mut eta = Matrix::<D>::identity();
    eta[(0, 0)] = -1.0;
    eta
}

/// Flat spacetime `g = diag(−1, 1, …, 1)`.
#[derive(Debug, Clone)]
pub struct Minkowski<const D: usize> {
    domain: CoordBox<D>,
    past_boundary: bool,
}

impl<const D: usize> Minkowski<D> {
    pub fn new(domain: CoordBox<D>) -> Result<Self> {
        if D < 2 {
            return Err(Error::InvalidMetric(String::from("need at least one spatial dimension")));
        }
        Ok(Minkowski {
            domain,
            past_boundary: false,
        })
    }

    /// Treat the bottom face `coords[0] = min` as a past boundary, as for
    /// the half space `t > 0`.
    pub fn with_past_boundary(mut self) -> Self {
        self.past_boundary = true;
        self
    }
}

impl<const D: usize> Metric<D> for Minkowski<D> {
    fn catalog_id(&self) -> &str {
        "minkowski"
    }
    fn domain(&self) -> &CoordBox<D> {
        &self.domain
    }
    fn metric_raw(&self, _p: &Point<D>) -> Matrix<D> {
        minkowski_matrix()
    }
    fn christoffel_raw(&self, _p: &Point<D>) -> Christoffel<D> {
        linalg::zero_christoffel()
    }
    fn christoffel_gradient_raw(&self, _p: &Point<D>) -> [Christoffel<D>; D] {
        [linalg::zero_christoffel(); D]
    }
    fn past_boundary(&self) -> Option<f64> {
        self.past_boundary.then_some(self.domain.min[0])
    }
}

/// Scale factor families for spatially flat FLRW spacetimes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleFactor {
    /// `a(t) = t^p`
    Power(f64),
    /// `a(t) = e^{Ht}`
    Exp(f64),
}

impl ScaleFactor {
    /// `(a, a', a'')` at `t`.
    pub fn jet(&self, t: f64) -> (f64, f64, f64) {
        match *self {
            ScaleFactor::Power(p) => {
                if p == 0.0 {
                    (1.0, 0.0, 0.0)
                } else {
                    let a = t.powf(p);
                    (a, p * t.powf(p - 1.0), p * (p - 1.0) * t.powf(p - 2.0))
                }
            }
            ScaleFactor::Exp(h) => {
                let a = (h * t).exp();
                (a, h * a, h * h * a)
            }
        }
    }
}

/// `g = −dt² + a(t)²(dx₁² + … + dxₙ²)`.
#[derive(Debug, Clone)]
pub struct Flrw<const D: usize> {
    domain: CoordBox<D>,
    scale: ScaleFactor,
}

impl<const D: usize> Flrw<D> {
    pub fn new(scale: ScaleFactor, domain: CoordBox<D>) -> Result<Self> {
        if D < 2 {
            return Err(Error::InvalidMetric(String::from("need at least one spatial dimension")));
        }
        let (t0, t1) = (domain.min[0], domain.max[0]);
        let samples = 64;
        for k in 0..=samples {
            let t = t0 + (t1 - t0) * k as f64 / samples as f64;
            let (a, _, _) = scale.jet(t);
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidMetric(format!("scale factor a({t}) = {a} is not positive")));
            }
        }
        Ok(Flrw { domain, scale })
    }

    pub fn scale_factor(&self) -> ScaleFactor {
        self.scale
    }
}

impl<const D: usize> Metric<D> for Flrw<D> {
    fn catalog_id(&self) -> &str {
        "flrw"
    }
    fn domain(&self) -> &CoordBox<D> {
        &self.domain
    }
    fn metric_raw(&self, p: &Point<D>) -> Matrix<D> {
        let (a, _, _) = self.scale.jet(p[0]);
        let mut g = Matrix::<D>::identity() * (a * a);
        g[(0, 0)] = -1.0;
        g
    }
    fn christoffel_raw(&self, p: &Point<D>) -> Christoffel<D> {
        let (a, da, _) = self.scale.jet(p[0]);
        let mut gamma = linalg::zero_christoffel::<D>();
        for i in 1..D {
            gamma[0][(i, i)] = a * da;
            gamma[i][(0, i)] = da / a;
            gamma[i][(i, 0)] = da / a;
        }
        gamma
    }
    fn christoffel_gradient_raw(&self, p: &Point<D>) -> [Christoffel<D>; D] {
        let (a, da, dda) = self.scale.jet(p[0]);
        let mut out = [linalg::zero_christoffel::<D>(); D];
        let hubble_rate = dda / a - (da * da) / (a * a);
        for i in 1..D {
            out[0][0][(i, i)] = da * da + a * dda;
            out[0][i][(0, i)] = hubble_rate;
            out[0][i][(i, 0)] = hubble_rate;
        }
        out
    }
    fn past_boundary(&self) -> Option<f64> {
        Some(self.domain.min[0])
    }
}

/// Smooth radial bump `exp(1 − 1/(1 − ρ²))`, `ρ = |x − center| / support`,
/// equal to one at the centre and identically zero for `ρ ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump<const D: usize> {
    pub center: Point<D>,
    pub support: f64,
}

impl<const D: usize> Bump<D> {
    pub fn eval(&self, p: &Point<D>) -> f64 {
        let rho2 = (p - self.center).norm_squared() / (self.support * self.support);
        if rho2 >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - rho2)).exp()
        }
    }

    pub fn gradient(&self, p: &Point<D>) -> Vector<D> {
        let d = p - self.center;
        let s2 = self.support * self.support;
        let rho2 = d.norm_squared() / s2;
        if rho2 >= 1.0 {
            return Vector::<D>::zeros();
        }
        let u = 1.0 - rho2;
        d * (-2.0 * self.eval(p) / (s2 * u * u))
    }
}

/// Minkowski plus `ε · b(x) · (dt⊗dx₁ + dx₁⊗dt + dx₁⊗dx₁)`.
#[derive(Debug, Clone)]
pub struct PerturbedMinkowski<const D: usize> {
    domain: CoordBox<D>,
    epsilon: f64,
    bump: Bump<D>,
}

impl<const D: usize> PerturbedMinkowski<D> {
    /// Checks the signature on a deterministic sample of the domain.
    pub fn new(epsilon: f64, bump: Bump<D>, domain: CoordBox<D>) -> Result<Self> {
        if D < 2 {
            return Err(Error::InvalidMetric(String::from("need at least one spatial dimension")));
        }
        if !epsilon.is_finite() {
            return Err(Error::InvalidMetric(format!("perturbation amplitude {epsilon} is not finite")));
        }
        let metric = PerturbedMinkowski { domain, epsilon, bump };
        // the perturbation only lives on the (0,1) block, so a sweep of the
        // bump's range covers every attained matrix
        for k in 0..=200 {
            let b = k as f64 / 200.0;
            let mut g = minkowski_matrix::<D>();
            g[(0, 1)] += epsilon * b;
            g[(1, 0)] += epsilon * b;
            g[(1, 1)] += epsilon * b;
            if linalg::signature(&g, 1e-12) != (1, D - 1) {
                return Err(Error::InvalidMetric(format!(
                    "perturbation amplitude {epsilon} breaks Lorentzian signature"
                )));
            }
        }
        Ok(metric)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn bump(&self) -> &Bump<D> {
        &self.bump
    }
}

impl<const D: usize> Metric<D> for PerturbedMinkowski<D> {
    fn catalog_id(&self) -> &str {
        "perturbed"
    }
    fn domain(&self) -> &CoordBox<D> {
        &self.domain
    }
    fn metric_raw(&self, p: &Point<D>) -> Matrix<D> {
        let mut g = minkowski_matrix::<D>();
        let w = self.epsilon * self.bump.eval(p);
        g[(0, 1)] += w;
        g[(1, 0)] += w;
        g[(1, 1)] += w;
        g
    }
    fn christoffel_raw(&self, p: &Point<D>) -> Christoffel<D> {
        if self.epsilon == 0.0 {
            return linalg::zero_christoffel();
        }
        let db = self.bump.gradient(p);
        if db.iter().all(|c| *c == 0.0) {
            return linalg::zero_christoffel();
        }
        let mut shape = Matrix::<D>::zeros();
        shape[(0, 1)] = self.epsilon;
        shape[(1, 0)] = self.epsilon;
        shape[(1, 1)] = self.epsilon;
        let dg: [Matrix<D>; D] = core::array::from_fn(|k| shape * db[k]);
        let ginv = self.metric_raw(p).try_inverse().unwrap_or_else(Matrix::<D>::zeros);
        christoffel_from_derivatives(&ginv, &dg)
    }
    fn christoffel_gradient_raw(&self, p: &Point<D>) -> [Christoffel<D>; D] {
        if self.epsilon == 0.0 {
            return [linalg::zero_christoffel(); D];
        }
        richardson_gradient(|x| self.christoffel_raw(x), p, self.fd_step())
    }
}

/// Inverse-metric time component `g^{00}`, negative where `coords[0]` has a
/// timelike gradient.
pub fn inverse_time_component<const D: usize>(g: &Matrix<D>) -> f64 {
    g.try_inverse().map(|inv| inv[(0, 0)]).unwrap_or(f64::NAN)
}

/// The tangent `∂/∂coords[0]` as a vector.
pub fn time_axis<const D: usize>() -> Vector<D> {
    let mut v = Vector::<D>::zeros();
    v[0] = 1.0;
    v
}
