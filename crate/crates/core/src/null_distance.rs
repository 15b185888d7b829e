//! Null length of piecewise causal curves, the causality oracle, and the
//! lattice estimate of the null distance `d̂_τ`.

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use hashbrown::HashMap;

use crate::error::{Error, Result};
use crate::frame::{orthonormal_basis, RiemannianizedMetric};
use crate::geodesic::{self, FrameProvider, FramedExp};
use crate::linalg::{self, inner, Matrix, Point, Vector};
use crate::metric::{CoordBox, Metric};
use crate::ode::Stepping;
use crate::report::{EstimateReport, Verdict};
use crate::sampling;
use crate::time::TimeFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    Future,
    Past,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Future => 1.0,
            Orientation::Past => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::Future => "future",
            Orientation::Past => "past",
        }
    }
}

/// Break points `x_0 … x_m` of a piecewise causal curve and the time
/// orientation of each segment.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseCausalPath<const D: usize> {
    breakpoints: Vec<Point<D>>,
    orientations: Vec<Orientation>,
}

impl<const D: usize> PiecewiseCausalPath<D> {
    pub fn new(breakpoints: Vec<Point<D>>, orientations: Vec<Orientation>) -> Result<Self> {
        if breakpoints.is_empty() || orientations.len() + 1 != breakpoints.len() {
            return Err(Error::Precondition(format!(
                "{} break points need {} orientations, got {}",
                breakpoints.len(),
                breakpoints.len().saturating_sub(1),
                orientations.len()
            )));
        }
        Ok(PiecewiseCausalPath {
            breakpoints,
            orientations,
        })
    }

    pub fn constant(p: Point<D>) -> Self {
        PiecewiseCausalPath {
            breakpoints: alloc::vec![p],
            orientations: Vec::new(),
        }
    }

    pub fn breakpoints(&self) -> &[Point<D>] {
        &self.breakpoints
    }

    pub fn orientations(&self) -> &[Orientation] {
        &self.orientations
    }

    pub fn segments(&self) -> usize {
        self.orientations.len()
    }

    /// `index, x0 … x_n, tau, orientation` (the orientation of the segment
    /// ending at the break point; empty for the first).
    pub fn write_csv(&self, tau: &TimeFunction<D>, out: &mut impl fmt::Write) -> fmt::Result {
        write!(out, "index")?;
        for a in 0..D {
            write!(out, ",x{a}")?;
        }
        writeln!(out, ",tau,orientation")?;
        for (i, p) in self.breakpoints.iter().enumerate() {
            write!(out, "{i}")?;
            for a in 0..D {
                write!(out, ",{}", p[a])?;
            }
            let o = if i == 0 { "" } else { self.orientations[i - 1].as_str() };
            writeln!(out, ",{},{o}", tau.eval(p))?;
        }
        Ok(())
    }
}

/// `L̂_τ(β) = Σ |τ(x_i) − τ(x_{i−1})|`.
pub fn null_length<const D: usize>(path: &PiecewiseCausalPath<D>, tau: &TimeFunction<D>) -> Result<f64> {
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    for p in &path.breakpoints {
        let t = tau.eval(p);
        if !t.is_finite() {
            return Err(Error::out_of_domain(p));
        }
        if let Some(s) = prev {
            total += (t - s).abs();
        }
        prev = Some(t);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Future,
    Past,
    Spacelike,
    Band,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ExpInversion,
    Indicator,
    DistanceEquality,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CausalVerdict<const D: usize> {
    pub relation: Relation,
    pub method: Method,
    /// Frame components `y` of `exp_a^{-1}(b)`.
    pub preimage: Vector<D>,
    /// `| |y_0| − |y⃗| |`, the framed distance scale to the light cone.
    pub cone_gap: f64,
}

/// Causal relation of `b` to `a` from the sign of `g(v, v)` and of `y_0`
/// for `v = exp_a^{-1}(b)`, with band `|g(v, v)| ≤ 1e-7 |v|²_{g_R}`.
pub fn causal_oracle<const D: usize, M, F>(
    metric: &M,
    frame: &F,
    a: &Point<D>,
    b: &Point<D>,
    normal_radius: Option<f64>,
) -> Result<CausalVerdict<D>>
where
    M: Metric<D> + ?Sized,
    F: FrameProvider<D> + ?Sized,
{
    let mut exp = FramedExp::new(metric, frame);
    if let Some(r) = normal_radius {
        exp = exp.with_normal_radius(r);
    }
    let y = exp.invert(a, b, None).map_err(|e| Error::OutOfRegime(format!("{e}")))?;
    let spatial = (1..D).map(|i| y[i] * y[i]).sum::<f64>().sqrt();
    let q = -y[0] * y[0] + spatial * spatial;
    let tol = 1e-7 * y.norm_squared();
    let relation = if y.norm_squared() == 0.0 || q.abs() <= tol {
        Relation::Band
    } else if q > 0.0 {
        Relation::Spacelike
    } else if y[0] > 0.0 {
        Relation::Future
    } else {
        Relation::Past
    };
    Ok(CausalVerdict {
        relation,
        method: Method::ExpInversion,
        preimage: y,
        cone_gap: (y[0].abs() - spatial).abs(),
    })
}

type Key<const D: usize> = [i32; D];

/// Lattice direction: an integer spatial offset `m` with `|m| = k`, so that
/// the flat null edge `(±k, m)·h` ends on a node.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Direction<const D: usize> {
    offset: Vector<D>,
    k: f64,
}

fn lattice_directions<const D: usize>(count: usize) -> Result<Vec<Direction<D>>> {
    let n = D - 1;
    if count < 2 * n {
        return Err(Error::Precondition(format!("need at least {} directions, got {count}", 2 * n)));
    }
    let mut out: Vec<Direction<D>> = Vec::new();
    for k in [1i32, 3, 5, 7, 9] {
        let mut level = Vec::new();
        let span = (2 * k + 1) as usize;
        for idx in 0..span.pow(n as u32) {
            let mut rest = idx;
            let mut m = Vector::<D>::zeros();
            for i in 1..D {
                m[i] = (rest % span) as f64 - k as f64;
                rest /= span;
            }
            if (m.norm_squared() - (k * k) as f64).abs() > 0.5 {
                continue;
            }
            let unit = m / k as f64;
            if out.iter().any(|d| (d.offset / d.k - unit).norm() < 1e-9) {
                continue;
            }
            level.push(Direction { offset: m, k: k as f64 });
        }
        // axis-like directions first, then by lexicographic offset
        level.sort_by(|a, b| {
            let za = a.offset.iter().filter(|c| **c == 0.0).count();
            let zb = b.offset.iter().filter(|c| **c == 0.0).count();
            zb.cmp(&za).then_with(|| {
                a.offset.iter().zip(b.offset.iter()).map(|(x, y)| x.total_cmp(y)).find(|o| *o != Ordering::Equal).unwrap_or(Ordering::Equal)
            })
        });
        out.extend(level);
        if out.len() >= count {
            break;
        }
    }
    out.truncate(count);
    Ok(out)
}

/// A null geodesic edge of the lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge<const D: usize> {
    pub to: Key<D>,
    /// True (pre-snap) end point.
    pub end: Point<D>,
    pub orientation: Orientation,
    pub snap_error: f64,
    /// `max |g(γ̇, γ̇)| / |γ̇|²` at the edge ends.
    pub null_defect: f64,
}

/// Grid `origin + h·R·key` of spacing `h` (with `R` a rotation of the
/// spatial axes, the identity unless re-aligned), with null edges generated
/// on demand. Immutable; queries keep their own edge caches.
pub struct NullLattice<const D: usize, M: ?Sized> {
    metric: Arc<M>,
    region: CoordBox<D>,
    origin: Point<D>,
    rotation: Matrix<D>,
    h: f64,
    directions: Vec<Direction<D>>,
    pub max_expansions: usize,
    /// Inflation of the A* heuristic; paths found cost at most this factor
    /// times the lattice optimum.
    pub heuristic_weight: f64,
    /// Re-align the grid with each queried pair.
    pub align: bool,
}

impl<const D: usize, M: ?Sized> Clone for NullLattice<D, M> {
    fn clone(&self) -> Self {
        NullLattice {
            metric: self.metric.clone(),
            region: self.region,
            origin: self.origin,
            rotation: self.rotation,
            h: self.h,
            directions: self.directions.clone(),
            max_expansions: self.max_expansions,
            heuristic_weight: self.heuristic_weight,
            align: self.align,
        }
    }
}

pub fn build_null_lattice<const D: usize, M: Metric<D> + ?Sized>(
    metric: Arc<M>,
    region: CoordBox<D>,
    h: f64,
    directions: usize,
) -> Result<NullLattice<D, M>> {
    if !(h > 0.0) {
        return Err(Error::Precondition(format!("lattice spacing must be positive, got {h}")));
    }
    let inside = region.intersect(metric.domain());
    if inside != region {
        return Err(Error::Precondition(String::from("lattice region leaves the metric domain")));
    }
    let origin = Point::<D>::from_fn(|a, _| region.min[a]);
    Ok(NullLattice {
        metric,
        region,
        origin,
        rotation: Matrix::<D>::identity(),
        h,
        directions: lattice_directions(directions)?,
        max_expansions: 400_000,
        heuristic_weight: 1.0,
        align: true,
    })
}

impl<const D: usize, M: Metric<D> + ?Sized> NullLattice<D, M> {
    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn region(&self) -> &CoordBox<D> {
        &self.region
    }

    pub fn direction_count(&self) -> usize {
        self.directions.len()
    }

    /// Same lattice with a node at `p`.
    pub fn anchored_at(&self, p: &Point<D>) -> Self {
        let mut out = self.clone();
        out.origin = *p;
        out
    }

    /// Same lattice with a node at `p` and the first spatial axis along the
    /// spatial part of `q − p`.
    pub fn aligned_with(&self, p: &Point<D>, q: &Point<D>) -> Self {
        let mut out = self.anchored_at(p);
        let mut u = q - p;
        u[0] = 0.0;
        let n = u.norm();
        out.rotation = Matrix::<D>::identity();
        if D > 1 && n > 0.0 {
            u /= n;
            let mut w = -u;
            w[1] += 1.0;
            let w2 = w.norm_squared();
            if w2 > 1e-24 {
                // Householder reflection taking the first spatial axis to u
                out.rotation -= w * w.transpose() * (2.0 / w2);
            }
        }
        out
    }

    pub fn refined(&self) -> Self {
        let mut out = self.clone();
        out.h *= 0.5;
        out
    }

    /// Node counts per lattice axis inside the region (axis-aligned
    /// lattices).
    pub fn per_axis_counts(&self) -> [usize; D] {
        core::array::from_fn(|a| {
            let lo = ((self.region.min[a] - self.origin[a]) / self.h - 1e-9).ceil() as i64;
            let hi = ((self.region.max[a] - self.origin[a]) / self.h + 1e-9).floor() as i64;
            (hi - lo + 1).max(0) as usize
        })
    }

    pub fn node_count(&self) -> usize {
        self.per_axis_counts().iter().product()
    }

    pub fn point(&self, key: &Key<D>) -> Point<D> {
        let k = Vector::<D>::from_fn(|a, _| key[a] as f64);
        self.origin + self.rotation * k * self.h
    }

    pub fn nearest(&self, p: &Point<D>) -> Key<D> {
        let k = self.rotation.transpose() * (p - self.origin) / self.h;
        core::array::from_fn(|a| k[a].round() as i32)
    }

    /// Nearest node with even key sum. Flat null edges change the time key
    /// and the spatial keys by the same parity, so the other half of the
    /// lattice is unreachable from the origin node.
    pub fn nearest_reachable(&self, p: &Point<D>) -> Key<D> {
        let k = self.rotation.transpose() * (p - self.origin) / self.h;
        let mut key: Key<D> = core::array::from_fn(|a| k[a].round() as i32);
        if key.iter().map(|c| *c as i64).sum::<i64>() % 2 != 0 {
            let (axis, _) = (0..D)
                .map(|a| (a, (k[a] - key[a] as f64).abs()))
                .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            key[axis] += if k[axis] >= key[axis] as f64 { 1 } else { -1 };
        }
        key
    }

    /// Future and past null edges from a node, snapped to the nearest node.
    /// Each edge starts with the spatial coordinate velocity of its lattice
    /// direction and the time component that makes it null. Edges leaving
    /// the region are dropped.
    pub fn edges_from(&self, key: &Key<D>) -> Result<Vec<Edge<D>>> {
        let x = self.point(key);
        let metric = &*self.metric;
        let g = metric.g(&x)?;
        let mut out = Vec::with_capacity(2 * self.directions.len());
        for dir in &self.directions {
            let s = self.rotation * dir.offset * self.h;
            let a = g[(0, 0)];
            let b: f64 = 2.0 * (1..D).map(|i| g[(0, i)] * s[i]).sum::<f64>();
            let c = inner(&g, &s, &s);
            let disc = b * b - 4.0 * a * c;
            if !(a < 0.0) || disc < 0.0 {
                continue;
            }
            let roots = [(-b - disc.sqrt()) / (2.0 * a), (-b + disc.sqrt()) / (2.0 * a)];
            for orientation in [Orientation::Future, Orientation::Past] {
                let v0 = match orientation {
                    Orientation::Future => roots[0].max(roots[1]),
                    Orientation::Past => roots[0].min(roots[1]),
                };
                if v0 * orientation.sign() <= 0.0 {
                    continue;
                }
                let mut v = s;
                v[0] = v0;
                let steps = 2 * dir.k as usize;
                let Ok((end, w, [])) = geodesic::shoot(metric, &x, &v, &[], 1.0, Stepping::Fixed { steps }) else {
                    continue;
                };
                if !self.region.contains(&end) {
                    continue;
                }
                let to = self.nearest(&end);
                let node = self.point(&to);
                if !self.region.contains(&node) {
                    continue;
                }
                let defect_start = inner(&g, &v, &v).abs() / v.norm_squared();
                let defect_end = inner(&metric.g(&end)?, &w, &w).abs() / w.norm_squared();
                out.push(Edge {
                    to,
                    end,
                    orientation,
                    snap_error: linalg::norm(&(end - node)),
                    null_defect: defect_start.max(defect_end),
                });
            }
        }
        Ok(out)
    }

    /// Largest `|Δx⃗| / |Δτ|` over the edges at the given nodes.
    fn coordinate_light_speed(&self, tau: &TimeFunction<D>, keys: &[Key<D>]) -> Result<f64> {
        let mut c = 0.0f64;
        for key in keys {
            let x = self.point(key);
            let tx = tau.eval(&x);
            for edge in self.edges_from(key)? {
                let d = edge.end - x;
                let spatial = (1..D).map(|i| d[i] * d[i]).sum::<f64>().sqrt();
                c = c.max(spatial / (tau.eval(&edge.end) - tx).abs());
            }
        }
        Ok(c)
    }
}

/// Heap entry. `f` is quantized so that round-off does not break ties,
/// which go to the deeper node.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Queued {
    f: i64,
    g: f64,
    node: u32,
}

fn quantize(f: f64, unit: f64) -> i64 {
    (f / unit).round() as i64
}

impl Eq for Queued {}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.cmp(&self.f).then_with(|| self.g.total_cmp(&other.g))
    }
}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Polyline tube restricting a refined search.
struct Tube<const D: usize> {
    points: Vec<Point<D>>,
    radius: f64,
}

impl<const D: usize> Tube<D> {
    fn contains(&self, p: &Point<D>) -> bool {
        if self.points.len() == 1 {
            return linalg::norm(&(p - self.points[0])) <= self.radius;
        }
        self.points.windows(2).any(|w| {
            let d = w[1] - w[0];
            let len2 = d.norm_squared();
            let s = if len2 > 0.0 { ((p - w[0]).dot(&d) / len2).clamp(0.0, 1.0) } else { 0.0 };
            linalg::norm(&(p - (w[0] + d * s))) <= self.radius
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchStats {
    pub edges: usize,
    pub snap_violations: usize,
    pub expansions: usize,
    pub max_null_defect: f64,
}

struct Found<const D: usize> {
    path: PiecewiseCausalPath<D>,
}

/// Flat-frame closing cost from node `n` to `q` (see [`close_path`]).
fn closing_cost<const D: usize, M: Metric<D> + ?Sized>(
    metric: &M,
    tau: &TimeFunction<D>,
    n: &Point<D>,
    q: &Point<D>,
) -> Result<f64> {
    null_length(&close_path(metric, PiecewiseCausalPath::constant(*n), q)?, tau)
}

/// A* from the origin node to a virtual sink fed by the even nodes around
/// `target`, each charged its closing cost to `target`.
fn search<const D: usize, M: Metric<D> + ?Sized>(
    lattice: &NullLattice<D, M>,
    tau: &TimeFunction<D>,
    target: &Point<D>,
    tube: Option<&Tube<D>>,
    stats: &mut SearchStats,
) -> Result<Option<Found<D>>> {
    let metric = &*lattice.metric;
    let start: Key<D> = [0; D];
    let real = lattice.rotation.transpose() * (target - lattice.origin) / lattice.h;
    let mut goals: HashMap<Key<D>, f64> = HashMap::new();
    for corner in 0..(1usize << D) {
        let key: Key<D> = core::array::from_fn(|a| {
            let lo = real[a].floor() as i32;
            if corner >> a & 1 == 1 { lo + 1 } else { lo }
        });
        if key.iter().map(|c| *c as i64).sum::<i64>() % 2 != 0 {
            continue;
        }
        let point = lattice.point(&key);
        if !lattice.region.contains(&point) {
            continue;
        }
        goals.insert(key, closing_cost(metric, tau, &point, target)?);
    }
    if goals.is_empty() {
        return Err(Error::Precondition(String::from("target outside the lattice region")));
    }
    let tau_target = tau.eval(target);
    let light = lattice.coordinate_light_speed(tau, &[start, lattice.nearest_reachable(target)])?;
    let heuristic = |p: &Point<D>| -> f64 {
        let dt = (tau.eval(p) - tau_target).abs();
        let d = p - target;
        let spatial = (1..D).map(|i| d[i] * d[i]).sum::<f64>().sqrt();
        let ds = if light > 0.0 && light.is_finite() { spatial / light } else { 0.0 };
        lattice.heuristic_weight * dt.max(ds)
    };

    let mut index: HashMap<Key<D>, u32> = HashMap::new();
    let mut keys: Vec<Key<D>> = Vec::new();
    let mut best: Vec<f64> = Vec::new();
    let mut parent: Vec<Option<(u32, Orientation)>> = Vec::new();
    let mut closed: Vec<bool> = Vec::new();
    let mut intern = |k: Key<D>, keys: &mut Vec<Key<D>>, best: &mut Vec<f64>, parent: &mut Vec<_>, closed: &mut Vec<bool>| -> u32 {
        *index.entry(k).or_insert_with(|| {
            keys.push(k);
            best.push(f64::INFINITY);
            parent.push(None);
            closed.push(false);
            (keys.len() - 1) as u32
        })
    };
    let s = intern(start, &mut keys, &mut best, &mut parent, &mut closed);
    best[s as usize] = 0.0;
    const SINK: u32 = u32::MAX;
    let mut sink_best = f64::INFINITY;
    let mut sink_parent = 0u32;
    let unit = 1e-9 * lattice.h;
    let mut heap = BinaryHeap::new();
    heap.push(Queued {
        f: quantize(heuristic(&lattice.point(&start)), unit),
        g: 0.0,
        node: s,
    });
    let h4 = 0.25 * lattice.h;
    while let Some(Queued { g, node, .. }) = heap.pop() {
        if node == SINK {
            let mut points = Vec::new();
            let mut orientations = Vec::new();
            let mut cur = sink_parent;
            loop {
                points.push(lattice.point(&keys[cur as usize]));
                match parent[cur as usize] {
                    Some((prev, o)) => {
                        orientations.push(o);
                        cur = prev;
                    }
                    None => break,
                }
            }
            points.reverse();
            orientations.reverse();
            return Ok(Some(Found {
                path: PiecewiseCausalPath::new(points, orientations)?,
            }));
        }
        let ni = node as usize;
        if closed[ni] || g > best[ni] {
            continue;
        }
        closed[ni] = true;
        let key = keys[ni];
        if let Some(closing) = goals.get(&key) {
            let total = g + closing;
            if total < sink_best {
                sink_best = total;
                sink_parent = node;
                heap.push(Queued {
                    f: quantize(total, unit),
                    g: total,
                    node: SINK,
                });
            }
        }
        stats.expansions += 1;
        if stats.expansions > lattice.max_expansions {
            return Err(Error::Resolution(format!(
                "search exceeded {} node expansions at h = {}",
                lattice.max_expansions, lattice.h
            )));
        }
        let x = lattice.point(&key);
        let tx = tau.eval(&x);
        for edge in lattice.edges_from(&key)? {
            stats.edges += 1;
            if edge.snap_error > h4 {
                stats.snap_violations += 1;
            }
            stats.max_null_defect = stats.max_null_defect.max(edge.null_defect);
            let to_point = lattice.point(&edge.to);
            if let Some(t) = tube {
                if !t.contains(&to_point) {
                    continue;
                }
            }
            let cost = g + (tau.eval(&edge.end) - tx).abs();
            let j = intern(edge.to, &mut keys, &mut best, &mut parent, &mut closed) as usize;
            if cost < best[j] && !closed[j] {
                best[j] = cost;
                parent[j] = Some((node, edge.orientation));
                heap.push(Queued {
                    f: quantize(cost + heuristic(&to_point), unit),
                    g: cost,
                    node: j as u32,
                });
            }
        }
    }
    Ok(None)
}

/// Extends a lattice path ending at the node nearest `q` to `q` itself:
/// with `y` the components of `q − n` in the orthonormal frame at the last
/// node `n`, a single causal step if `y` is causal, else the flat zigzag
/// `n → n + a(e_0 + û·e) → q` with `a = (|y⃗| + y_0)/2`.
fn close_path<const D: usize, M: Metric<D> + ?Sized>(
    metric: &M,
    path: PiecewiseCausalPath<D>,
    q: &Point<D>,
) -> Result<PiecewiseCausalPath<D>> {
    let n = *path.breakpoints.last().expect("paths have a start");
    if &n == q {
        return Ok(path);
    }
    let e = orthonormal_basis(&metric.g(&n)?)?;
    let y = geodesic::frame_matrix(&e)
        .try_inverse()
        .ok_or_else(|| Error::DegenerateFrame(format!("singular frame at {:?}", n.as_slice())))?
        * (q - n);
    let spatial = (1..D).map(|i| y[i] * y[i]).sum::<f64>().sqrt();
    let PiecewiseCausalPath {
        mut breakpoints,
        mut orientations,
    } = path;
    if y[0].abs() >= spatial {
        orientations.push(if y[0] >= 0.0 { Orientation::Future } else { Orientation::Past });
    } else {
        let a = 0.5 * (spatial + y[0]);
        let mut step = e[0];
        for i in 1..D {
            step += e[i] * (y[i] / spatial);
        }
        breakpoints.push(n + step * a);
        orientations.push(Orientation::Future);
        orientations.push(Orientation::Past);
    }
    breakpoints.push(*q);
    PiecewiseCausalPath::new(breakpoints, orientations)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NullDistanceEstimate<const D: usize> {
    pub lower: f64,
    pub upper: f64,
    pub witness: PiecewiseCausalPath<D>,
    /// Spacing of the level that produced `upper`.
    pub resolution: f64,
    /// `(h, upper after that level)`. A witness from a coarser level stays
    /// admissible, so the entries never increase; they stay infinite until
    /// some level finds a path.
    pub refinement_history: Vec<(f64, f64)>,
    pub stats: SearchStats,
}

/// `d̂_τ(p, q)` bracketed by `|τ(q) − τ(p)|` and the cheapest lattice path of
/// null edges, searched by A* and re-searched `refinements` times with `h`
/// halved inside a tube of radius `2h` around the previous best path. The
/// lattice is re-anchored so that `p` is a node and, when `align` is set,
/// rotated so that `q` lies on a lattice axis plane through `p`.
pub fn estimate_null_distance<const D: usize, M: Metric<D> + ?Sized>(
    lattice: &NullLattice<D, M>,
    tau: &TimeFunction<D>,
    p: &Point<D>,
    q: &Point<D>,
    refinements: usize,
) -> Result<NullDistanceEstimate<D>> {
    lattice.metric.check(p)?;
    lattice.metric.check(q)?;
    let lower = (tau.eval(q) - tau.eval(p)).abs();
    let mut stats = SearchStats::default();
    if p == q {
        return Ok(NullDistanceEstimate {
            lower: 0.0,
            upper: 0.0,
            witness: PiecewiseCausalPath::constant(*p),
            resolution: lattice.h,
            refinement_history: Vec::new(),
            stats,
        });
    }
    let mut level = if lattice.align { lattice.aligned_with(p, q) } else { lattice.anchored_at(p) };
    let mut history = Vec::new();
    let mut best: Option<(f64, f64, PiecewiseCausalPath<D>)> = None;
    let mut tube: Option<Tube<D>> = None;
    for _ in 0..=refinements {
        let found = search(&level, tau, q, tube.as_ref(), &mut stats)?;
        match found {
            Some(f) => {
                tube = Some(Tube {
                    points: f.path.breakpoints.clone(),
                    radius: 2.0 * level.h,
                });
                let path = close_path(&*lattice.metric, f.path, q)?;
                let cost = null_length(&path, tau)?;
                if best.as_ref().map_or(true, |b| cost < b.0) {
                    best = Some((cost, level.h, path));
                }
            }
            None => {
                if best.is_none() {
                    tube = None;
                }
            }
        }
        history.push((level.h, best.as_ref().map_or(f64::INFINITY, |b| b.0)));
        level = level.refined();
    }
    if stats.edges > 0 && stats.snap_violations * 20 > stats.edges {
        return Err(Error::Resolution(format!(
            "{} of {} edges snapped farther than h/4",
            stats.snap_violations, stats.edges
        )));
    }
    let (upper, resolution, witness) = best.ok_or(Error::Unreachable)?;
    Ok(NullDistanceEstimate {
        lower,
        upper,
        witness,
        resolution,
        refinement_history: history,
        stats,
    })
}

/// One pair of the causality-encoding protocol: the oracle's relation of
/// `b` to `a` against the criterion `τ(b) > τ(a)` and `upper − lower ≤ tol`,
/// with `tol = max(3h, 0.02·lower + 1e-4)` at the finest spacing `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodingOutcome {
    pub relation: Relation,
    pub criterion_future: bool,
    /// Oracle band, or a framed cone gap within twice `tol`.
    pub band: bool,
    pub lower: f64,
    pub upper: f64,
    pub tolerance: f64,
    pub cone_gap: f64,
}

impl EncodingOutcome {
    pub fn oracle_future(&self) -> bool {
        self.relation == Relation::Future
    }

    pub fn off_diagonal(&self) -> bool {
        !self.band && self.criterion_future != self.oracle_future()
    }
}

pub fn encoding_pair<const D: usize, M, F>(
    lattice: &NullLattice<D, M>,
    frame: &F,
    tau: &TimeFunction<D>,
    a: &Point<D>,
    b: &Point<D>,
    refinements: usize,
) -> Result<EncodingOutcome>
where
    M: Metric<D> + ?Sized,
    F: FrameProvider<D> + ?Sized,
{
    let verdict = causal_oracle(&*lattice.metric, frame, a, b, None)?;
    let estimate = estimate_null_distance(lattice, tau, a, b, refinements)?;
    let finest = lattice.h / (1u64 << refinements) as f64;
    let tolerance = (3.0 * finest).max(0.02 * estimate.lower + 1e-4);
    Ok(EncodingOutcome {
        relation: verdict.relation,
        criterion_future: tau.eval(b) > tau.eval(a) && estimate.upper - estimate.lower <= tolerance,
        band: verdict.relation == Relation::Band || verdict.cone_gap <= 2.0 * tolerance,
        lower: estimate.lower,
        upper: estimate.upper,
        tolerance,
        cone_gap: verdict.cone_gap,
    })
}

/// Minimum over three Gauss points of the smallest `g_R` eigenvalue's root
/// times the coordinate length: an estimate (not a bound) of `d_{g_R}` from
/// below.
fn gr_lower_estimate<const D: usize, M: Metric<D> + ?Sized>(
    gr: &RiemannianizedMetric<D, M>,
    a: &Point<D>,
    b: &Point<D>,
) -> Result<f64> {
    let mut lo = f64::INFINITY;
    for s in [0.0, 0.5, 1.0] {
        let m = gr.matrix(&(a + (b - a) * s))?;
        let eig = linalg::symmetric_eigenvalues(&m);
        lo = lo.min(eig.iter().copied().fold(f64::INFINITY, f64::min));
    }
    Ok(lo.max(0.0).sqrt() * linalg::norm(&(b - a)))
}

/// Over causal pairs of the region (per the oracle):
/// `Ĉ = max L_{g_R}(q, q') / |τ(q) − τ(q')|` and
/// `K̂' = max |Δτ| / d_{g_R}-lower-estimate` over all pairs.
/// Half the pairs are drawn inside a flat light cone so causal pairs are
/// well represented.
pub fn anti_lipschitz_constant<const D: usize, M: Metric<D> + ?Sized>(
    metric: &M,
    gr: &RiemannianizedMetric<D, M>,
    tau: &TimeFunction<D>,
    region: &CoordBox<D>,
    samples: usize,
    seed: u64,
) -> Result<EstimateReport> {
    let mut report = EstimateReport::new("anti_lipschitz");
    let mut rng = sampling::rng(seed);
    let scale = (0..D).map(|a| region.width(a)).fold(f64::INFINITY, f64::min);
    let (mut c_hat, mut k_hat) = (0.0f64, 0.0f64);
    let (mut causal, mut degenerate, mut failures, mut excluded) = (0usize, 0usize, 0usize, 0usize);
    let mut i = 0;
    while i < samples {
        i += 1;
        let a = sampling::uniform_in_box(&mut rng, region);
        let b = if i % 2 == 0 {
            sampling::uniform_in_box(&mut rng, region)
        } else {
            let len = rng.random_range(0.02..0.3) * scale;
            let u = sampling::unit_vector::<D>(&mut rng);
            let mut d = u * len;
            let spatial = (1..D).map(|k| d[k] * d[k]).sum::<f64>().sqrt();
            d[0] = spatial * rng.random_range(1.05..2.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
            a + d
        };
        if !region.contains(&b) {
            excluded += 1;
            continue;
        }
        if linalg::norm(&(a - b)) < 1e-6 {
            excluded += 1;
            continue;
        }
        let verdict = match causal_oracle(metric, gr.frame(), &a, &b, None) {
            Ok(v) => v,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        let dt = (tau.eval(&b) - tau.eval(&a)).abs();
        let upper = gr.chord_length(&a, &b)?;
        let lower = gr_lower_estimate(gr, &a, &b)?;
        if lower > 0.0 {
            k_hat = k_hat.max(dt / lower);
        }
        if matches!(verdict.relation, Relation::Future | Relation::Past) {
            causal += 1;
            if dt < 1e-10 * upper {
                degenerate += 1;
            } else {
                c_hat = c_hat.max(upper / dt);
            }
            report.row([("pair", i as f64), ("delta_tau", dt), ("gr_upper", upper), ("ratio", upper / dt.max(1e-300))]);
        }
    }
    if degenerate > 0 {
        report.anomaly(format!("{degenerate} causal pairs with Δτ below 1e-10 · distance"));
        c_hat = f64::INFINITY;
    }
    if failures > 0 {
        report.anomaly(format!("{failures} pairs outside the oracle's regime"));
    }
    report
        .metric("c_hat", c_hat)
        .metric("k_prime_hat", k_hat)
        .metric("causal_pairs", causal as f64)
        .metric("excluded_pairs", excluded as f64)
        .metric("oracle_failures", failures as f64);
    report.verdict = Verdict::from_bool(c_hat.is_finite() && causal > 0);
    Ok(report)
}
