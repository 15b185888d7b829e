//! Fermi-type frame fields, the Riemannianized metric and the radii derived
//! from them.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geodesic::{self, frame_matrix, newton_solve, FrameProvider, SHOOTING_STEPS};
use crate::linalg::{self, inner, Matrix, Point, Vector};
use crate::metric::{CoordBox, Metric};
use crate::ode::Stepping;
use crate::sampling;

/// Conditioning limit beyond which a map is no longer treated as a
/// diffeomorphism.
pub const MAX_CONDITION: f64 = 1e6;

/// Sweep factor for radius searches.
pub const RADIUS_SWEEP: f64 = 1.25;

/// Orthonormal frame at `p` from Gram–Schmidt on the coordinate basis,
/// `∂_0` first, with `e_0` future pointing.
pub fn orthonormal_basis<const D: usize>(g: &Matrix<D>) -> Result<[Vector<D>; D]> {
    let mut basis = [Vector::<D>::zeros(); D];
    let mut signs = [1.0; D];
    for a in 0..D {
        let mut w = Vector::<D>::zeros();
        w[a] = 1.0;
        for b in 0..a {
            w -= basis[b] * (signs[b] * inner(g, &w, &basis[b]));
        }
        let q = inner(g, &w, &w);
        let expected = if a == 0 { -1.0 } else { 1.0 };
        if q * expected <= 1e-14 {
            return Err(Error::DegenerateFrame(format!(
                "coordinate direction {a} has the wrong causal character (g = {q:e})"
            )));
        }
        basis[a] = w / (q * expected).sqrt();
        signs[a] = expected;
    }
    let mut t = Vector::<D>::zeros();
    t[0] = 1.0;
    if inner(g, &basis[0], &t) > 0.0 {
        basis[0] = -basis[0];
    }
    Ok(basis)
}

/// Frame field built by parallel transport: radially from the centre along
/// spatial geodesics to the slice `Σ`, then along the `e_0` geodesics.
/// Fermi coordinates `(t, x_1, …, x_n)` are packed in one `D`-vector.
pub struct FermiFrame<const D: usize, M: ?Sized> {
    metric: Arc<M>,
    center: Point<D>,
    radius: f64,
    basis: [Vector<D>; D],
    basis_matrix: Matrix<D>,
    basis_inverse: Matrix<D>,
    stepping: Stepping,
}

impl<const D: usize, M: ?Sized> Clone for FermiFrame<D, M> {
    fn clone(&self) -> Self {
        FermiFrame {
            metric: self.metric.clone(),
            center: self.center,
            radius: self.radius,
            basis: self.basis,
            basis_matrix: self.basis_matrix,
            basis_inverse: self.basis_inverse,
            stepping: self.stepping,
        }
    }
}

/// Points of the cylinder `(−R, R) × Bⁿ(R)` from a Halton sequence, shrunk
/// by `fill` towards the axis, plus the extreme points of each axis.
pub fn cylinder_samples<const D: usize>(count: usize, radius: f64, fill: f64) -> Vec<Vector<D>> {
    let mut out = Vec::with_capacity(count + 2 * D);
    let mut index = 1;
    while out.len() < count {
        let h = sampling::halton::<D>(index);
        index += 1;
        let mut y = Vector::<D>::zeros();
        y[0] = 2.0 * h[0] - 1.0;
        for i in 1..D {
            y[i] = 2.0 * h[i] - 1.0;
        }
        let spatial: f64 = (1..D).map(|i| y[i] * y[i]).sum::<f64>().sqrt();
        if spatial < 1.0 {
            out.push(y * (radius * fill));
        }
    }
    for a in 0..D {
        for s in [-1.0, 1.0] {
            let mut y = Vector::<D>::zeros();
            y[a] = s * radius * fill;
            out.push(y);
        }
    }
    out
}

impl<const D: usize, M: Metric<D> + ?Sized> FermiFrame<D, M> {
    /// Builds the frame at `p`, shrinking the radius until the Fermi map is
    /// well conditioned with a constant Jacobian sign on a sample of its
    /// cylinder.
    pub fn build(metric: Arc<M>, p: &Point<D>, requested_radius: f64) -> Result<Self> {
        if !(requested_radius > 0.0) {
            return Err(Error::Precondition(format!("radius must be positive, got {requested_radius}")));
        }
        metric.check(p)?;
        if metric.domain().boundary_distance(p) <= 0.0 {
            return Err(Error::Radius(format!("{:?} lies on the domain boundary", p.as_slice())));
        }
        let basis = orthonormal_basis(&metric.g(p)?)?;
        let basis_matrix = frame_matrix(&basis);
        let basis_inverse = basis_matrix
            .try_inverse()
            .ok_or_else(|| Error::DegenerateFrame(String::from("singular frame at the centre")))?;
        let mut frame = FermiFrame {
            metric,
            center: *p,
            radius: requested_radius,
            basis,
            basis_matrix,
            basis_inverse,
            stepping: Stepping::Fixed {
                steps: SHOOTING_STEPS.max((24.0 * requested_radius).ceil() as usize),
            },
        };
        let reference_sign = linalg::determinant(&basis_matrix).signum();
        let floor = 1e-6 * requested_radius;
        while frame.radius >= floor {
            if frame.cylinder_is_regular(reference_sign) {
                return Ok(frame);
            }
            frame.radius /= RADIUS_SWEEP;
        }
        Err(Error::Radius(format!(
            "no regular Fermi cylinder around {:?} down to radius {floor:e}",
            p.as_slice()
        )))
    }

    fn cylinder_is_regular(&self, reference_sign: f64) -> bool {
        let h = 1e-6 * self.radius;
        cylinder_samples::<D>(48, self.radius, 0.999).iter().all(|y| {
            if self.fermi_map(y).is_err() {
                return false;
            }
            let mut jac = Matrix::<D>::zeros();
            for k in 0..D {
                let mut yp = *y;
                let mut ym = *y;
                yp[k] += h;
                ym[k] -= h;
                match (self.fermi_map(&yp), self.fermi_map(&ym)) {
                    (Ok(a), Ok(b)) => jac.set_column(k, &((a - b) / (2.0 * h))),
                    _ => return false,
                }
            }
            linalg::determinant(&jac).signum() == reference_sign && linalg::condition_number(&jac) < MAX_CONDITION
        })
    }

    pub fn metric(&self) -> &Arc<M> {
        &self.metric
    }

    pub fn center(&self) -> &Point<D> {
        &self.center
    }

    /// Realized radius `R_p`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Frame at the centre, `e_0` first.
    pub fn center_basis(&self) -> &[Vector<D>; D] {
        &self.basis
    }

    /// Whether Fermi coordinates lie in the cylinder `W_R` of radius `R`.
    pub fn in_cylinder(y: &Vector<D>, radius: f64) -> bool {
        let spatial: f64 = (1..D).map(|i| y[i] * y[i]).sum::<f64>().sqrt();
        y[0].abs() < radius && spatial < radius
    }

    /// The slice point `exp_p(x_i e_i)` with the frame transported to it.
    pub fn sigma_with_frame(&self, y: &Vector<D>) -> Result<(Point<D>, [Vector<D>; D])> {
        let mut v = Vector::<D>::zeros();
        for i in 1..D {
            v += self.basis[i] * y[i];
        }
        if v.iter().all(|c| *c == 0.0) {
            return Ok((self.center, self.basis));
        }
        let (z, _, frame) = geodesic::shoot(&*self.metric, &self.center, &v, &self.basis, 1.0, self.stepping)?;
        Ok((z, frame))
    }

    /// Point of `Σ` with spatial Fermi coordinates `y[1..]` (`y[0]` ignored).
    pub fn sigma_point(&self, y: &Vector<D>) -> Result<Point<D>> {
        self.sigma_with_frame(y).map(|(z, _)| z)
    }

    /// `F(t, x) = exp_{exp_p(x_i e_i)}(t e_0)` together with the frame there.
    pub fn fermi_map_with_frame(&self, y: &Vector<D>) -> Result<(Point<D>, [Vector<D>; D])> {
        let (sigma, frame) = self.sigma_with_frame(y)?;
        if y[0] == 0.0 {
            return Ok((sigma, frame));
        }
        let (z, _, out) = geodesic::shoot(&*self.metric, &sigma, &frame[0], &frame, y[0], self.stepping)?;
        Ok((z, out))
    }

    pub fn fermi_map(&self, y: &Vector<D>) -> Result<Point<D>> {
        self.fermi_map_with_frame(y).map(|(z, _)| z)
    }

    /// Fermi coordinates of `z` by quasi-Newton on `F`.
    pub fn fermi_inverse(&self, z: &Point<D>) -> Result<Vector<D>> {
        self.metric.check(z)?;
        let guess = self.basis_inverse * (z - self.center);
        if z == &self.center {
            return Ok(Vector::<D>::zeros());
        }
        newton_solve(|y| self.fermi_map(y), z, guess, Some(self.basis_matrix), 50, 1e-10)
    }

    /// The frame `{e_a}` at `z`.
    pub fn frame_eval(&self, z: &Point<D>) -> Result<[Vector<D>; D]> {
        if z == &self.center {
            return Ok(self.basis);
        }
        let y = self.fermi_inverse(z)?;
        let (_, frame) = self.fermi_map_with_frame(&y)?;
        Ok(frame)
    }
}

impl<const D: usize, M: Metric<D> + ?Sized> FrameProvider<D> for FermiFrame<D, M> {
    fn frame_at(&self, q: &Point<D>) -> Result<[Vector<D>; D]> {
        self.frame_eval(q)
    }
}

/// `g_R(X, Y) = g(X, Y) + 2 g(X, e_0) g(Y, e_0)`.
pub fn riemannianized_matrix<const D: usize>(g: &Matrix<D>, e0: &Vector<D>) -> Matrix<D> {
    let w = g * e0;
    g + w * w.transpose() * 2.0
}

/// The Riemannianized metric of a frame field.
pub struct RiemannianizedMetric<const D: usize, M: ?Sized> {
    frame: FermiFrame<D, M>,
}

impl<const D: usize, M: ?Sized> Clone for RiemannianizedMetric<D, M> {
    fn clone(&self) -> Self {
        RiemannianizedMetric {
            frame: self.frame.clone(),
        }
    }
}

const GAUSS3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 0.555_555_555_555_555_6),
    (0.0, 0.888_888_888_888_888_9),
    (0.774_596_669_241_483_4, 0.555_555_555_555_555_6),
];

impl<const D: usize, M: Metric<D> + ?Sized> RiemannianizedMetric<D, M> {
    pub fn new(frame: FermiFrame<D, M>) -> Self {
        RiemannianizedMetric { frame }
    }

    pub fn frame(&self) -> &FermiFrame<D, M> {
        &self.frame
    }

    pub fn matrix(&self, z: &Point<D>) -> Result<Matrix<D>> {
        let g = self.frame.metric().g(z)?;
        let e = self.frame.frame_eval(z)?;
        Ok(riemannianized_matrix(&g, &e[0]))
    }

    pub fn norm(&self, z: &Point<D>, v: &Vector<D>) -> Result<f64> {
        Ok(inner(&self.matrix(z)?, v, v).max(0.0).sqrt())
    }

    /// `g_R` length of the straight coordinate segment `a → b` by three-point
    /// Gauss quadrature. An admissible curve, hence an upper bound on
    /// `d_{g_R}(a, b)` up to quadrature error.
    pub fn chord_length(&self, a: &Point<D>, b: &Point<D>) -> Result<f64> {
        let d = b - a;
        if d.iter().all(|c| *c == 0.0) {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for (x, w) in GAUSS3 {
            let z = a + d * (0.5 * (x + 1.0));
            total += 0.5 * w * self.norm(&z, &d)?;
        }
        Ok(total)
    }

    fn polyline_length(&self, pts: &[Point<D>]) -> Result<f64> {
        pts.windows(2).map(|w| self.chord_length(&w[0], &w[1])).sum()
    }
}

/// Lattice and smoothing parameters for [`riemannian_distance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceBudget {
    pub per_axis: usize,
    pub smoothing_iterations: usize,
}

impl Default for DistanceBudget {
    fn default() -> Self {
        DistanceBudget {
            per_axis: 4,
            smoothing_iterations: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DistanceEstimate<const D: usize> {
    pub lower: f64,
    pub upper: f64,
    /// Witness curve realizing `upper`.
    pub path: Vec<Point<D>>,
}

/// Two-sided bounds on `d_{g_R}(a, b)` inside `region`. The upper bound is
/// the best of the straight chord and a shortest lattice path, both locally
/// shortened; the lower bound is `sqrt(min eig g_R) · |a − b|` over the
/// lattice sample of the region.
pub fn riemannian_distance<const D: usize, M: Metric<D> + ?Sized>(
    gr: &RiemannianizedMetric<D, M>,
    a: &Point<D>,
    b: &Point<D>,
    region: &CoordBox<D>,
    budget: &DistanceBudget,
) -> Result<DistanceEstimate<D>> {
    if !region.contains(a) || !region.contains(b) {
        return Err(Error::OutOfDomain {
            point: if region.contains(a) { b.as_slice().to_vec() } else { a.as_slice().to_vec() },
        });
    }
    if a == b {
        return Ok(DistanceEstimate {
            lower: 0.0,
            upper: 0.0,
            path: alloc::vec![*a],
        });
    }
    let n = budget.per_axis.max(2);
    let nodes = sampling::grid_points(region, n);
    let mut metrics = Vec::with_capacity(nodes.len());
    let mut min_eig = f64::INFINITY;
    for z in &nodes {
        let m = gr.matrix(z)?;
        min_eig = min_eig.min(linalg::symmetric_eigenvalues(&m)[0]);
        metrics.push(m);
    }
    for z in [a, b] {
        min_eig = min_eig.min(linalg::symmetric_eigenvalues(&gr.matrix(z)?)[0]);
    }
    let lower = min_eig.max(0.0).sqrt() * linalg::norm(&(b - a));

    let lattice = lattice_path(&nodes, &metrics, n, a, b);
    let mut best = smooth(gr, alloc::vec![*a, *b], budget.smoothing_iterations, region)?;
    if let Some(path) = lattice {
        let candidate = smooth(gr, path, budget.smoothing_iterations, region)?;
        if candidate.0 < best.0 {
            best = candidate;
        }
    }
    Ok(DistanceEstimate {
        lower,
        upper: best.0,
        path: best.1,
    })
}

fn grid_index<const D: usize>(idx: usize, n: usize) -> [usize; D] {
    let mut out = [0; D];
    let mut rest = idx;
    for slot in out.iter_mut() {
        *slot = rest % n;
        rest /= n;
    }
    out
}

fn grid_flat<const D: usize>(cell: &[usize; D], n: usize) -> usize {
    cell.iter().rev().fold(0, |acc, c| acc * n + c)
}

/// Dijkstra over the lattice with axis and per-2-plane diagonal edges; edge
/// weights use the mean of the endpoint `g_R` matrices at the chord.
fn lattice_path<const D: usize>(
    nodes: &[Point<D>],
    metrics: &[Matrix<D>],
    n: usize,
    a: &Point<D>,
    b: &Point<D>,
) -> Option<Vec<Point<D>>> {
    use alloc::collections::BinaryHeap;
    use core::cmp::Ordering;

    #[derive(PartialEq)]
    struct Entry(f64, usize);
    impl Eq for Entry {}
    impl PartialOrd for Entry {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Entry {
        fn cmp(&self, other: &Self) -> Ordering {
            other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
        }
    }

    let nearest = |z: &Point<D>| {
        (0..nodes.len())
            .min_by(|i, j| (nodes[*i] - z).norm().total_cmp(&(nodes[*j] - z).norm()))
            .unwrap()
    };
    let (start, goal) = (nearest(a), nearest(b));
    let mut offsets: Vec<[i64; D]> = Vec::new();
    for i in 0..D {
        for s in [-1i64, 1] {
            let mut o = [0i64; D];
            o[i] = s;
            offsets.push(o);
        }
        for j in i + 1..D {
            for si in [-1i64, 1] {
                for sj in [-1i64, 1] {
                    let mut o = [0i64; D];
                    o[i] = si;
                    o[j] = sj;
                    offsets.push(o);
                }
            }
        }
    }
    let weight = |i: usize, j: usize| {
        let d = nodes[j] - nodes[i];
        let m = (metrics[i] + metrics[j]) * 0.5;
        inner(&m, &d, &d).max(0.0).sqrt()
    };
    let mut dist = alloc::vec![f64::INFINITY; nodes.len()];
    let mut prev = alloc::vec![usize::MAX; nodes.len()];
    let mut heap = BinaryHeap::new();
    dist[start] = 0.0;
    heap.push(Entry(0.0, start));
    while let Some(Entry(d, i)) = heap.pop() {
        if d > dist[i] {
            continue;
        }
        if i == goal {
            break;
        }
        let cell = grid_index::<D>(i, n);
        for o in &offsets {
            let mut next = [0usize; D];
            let mut inside = true;
            for k in 0..D {
                let c = cell[k] as i64 + o[k];
                if c < 0 || c >= n as i64 {
                    inside = false;
                    break;
                }
                next[k] = c as usize;
            }
            if !inside {
                continue;
            }
            let j = grid_flat(&next, n);
            let nd = d + weight(i, j);
            if nd < dist[j] {
                dist[j] = nd;
                prev[j] = i;
                heap.push(Entry(nd, j));
            }
        }
    }
    if !dist[goal].is_finite() {
        return None;
    }
    let mut chain = alloc::vec![goal];
    while *chain.last().unwrap() != start {
        chain.push(prev[*chain.last().unwrap()]);
    }
    chain.reverse();
    let mut path = alloc::vec![*a];
    path.extend(chain.iter().map(|i| nodes[*i]).filter(|z| z != a && z != b));
    path.push(*b);
    Some(path)
}

/// Local curve shortening: waypoints are pulled towards their neighbours'
/// midpoint while that shortens the curve. Returns the final length.
fn smooth<const D: usize, M: Metric<D> + ?Sized>(
    gr: &RiemannianizedMetric<D, M>,
    mut path: Vec<Point<D>>,
    iterations: usize,
    region: &CoordBox<D>,
) -> Result<(f64, Vec<Point<D>>)> {
    if path.len() <= 2 {
        return Ok((gr.polyline_length(&path)?, path));
    }
    let mut segments = path
        .windows(2)
        .map(|w| gr.chord_length(&w[0], &w[1]))
        .collect::<Result<Vec<f64>>>()?;
    let mut step = 0.5;
    for _ in 0..iterations {
        let mut improved = false;
        for k in 1..path.len() - 1 {
            let target = (path[k - 1] + path[k + 1]) * 0.5;
            let moved = path[k] + (target - path[k]) * step;
            if !region.contains(&moved) {
                continue;
            }
            let left = gr.chord_length(&path[k - 1], &moved)?;
            let right = gr.chord_length(&moved, &path[k + 1])?;
            if left + right < segments[k - 1] + segments[k] {
                path[k] = moved;
                segments[k - 1] = left;
                segments[k] = right;
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
            if step < 1e-3 {
                break;
            }
        }
    }
    Ok((segments.iter().sum(), path))
}

/// Result of a radius sweep: the last passing radius and the per-radius
/// verdicts.
#[derive(Debug, Clone)]
pub struct RadiusSweep {
    pub radius: f64,
    pub table: Vec<(f64, bool)>,
}

/// Largest swept `R` (factor 1.25 from `1e-3 · R_p`) on which the framed
/// exponential at `q` stays in the domain with a Jacobian of constant sign
/// and condition number below [`MAX_CONDITION`].
pub fn normal_radius<const D: usize, M: Metric<D> + ?Sized>(frame: &FermiFrame<D, M>, q: &Point<D>) -> Result<RadiusSweep> {
    let metric = &**frame.metric();
    let basis = frame_matrix(&frame.frame_eval(q)?);
    let reference_sign = linalg::determinant(&basis).signum();
    let stepping = Stepping::Fixed { steps: SHOOTING_STEPS };
    let exp = |y: &Vector<D>| geodesic::exp_map_with(metric, q, &(basis * y), stepping);
    let directions: Vec<Vector<D>> = {
        let mut v = sampling::halton_ball::<D>(24, 1.0);
        v.extend(sampling::halton_sphere::<D>(24));
        for a in 0..D {
            for s in [-1.0, 1.0] {
                let mut e = Vector::<D>::zeros();
                e[a] = s;
                v.push(e);
            }
        }
        v
    };
    let passes = |radius: f64| {
        let h = 1e-6 * radius;
        directions.iter().all(|u| {
            let y = u * radius;
            if exp(&y).is_err() {
                return false;
            }
            let mut jac = Matrix::<D>::zeros();
            for k in 0..D {
                let mut yp = y;
                let mut ym = y;
                yp[k] += h;
                ym[k] -= h;
                match (exp(&yp), exp(&ym)) {
                    (Ok(a), Ok(b)) => jac.set_column(k, &((a - b) / (2.0 * h))),
                    _ => return false,
                }
            }
            linalg::determinant(&jac).signum() == reference_sign && linalg::condition_number(&jac) < MAX_CONDITION
        })
    };
    let mut radius = 1e-3 * frame.radius();
    let limit = metric.domain().diameter();
    let mut table = Vec::new();
    let mut last = None;
    while radius <= limit {
        let ok = passes(radius);
        table.push((radius, ok));
        if !ok {
            break;
        }
        last = Some(radius);
        radius *= RADIUS_SWEEP;
    }
    match last {
        Some(radius) => Ok(RadiusSweep { radius, table }),
        None => Err(Error::DegenerateFrame(format!(
            "framed exponential at {:?} is singular already at radius {radius:e}",
            q.as_slice()
        ))),
    }
}
