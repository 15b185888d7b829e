use std::sync::Arc;

use rayon::prelude::*;
use temple_core::linalg::{Matrix, Point};
use temple_core::metric::{CoordBox, Metric};
use temple_core::null_distance::{build_null_lattice, estimate_null_distance};
use temple_core::report::{EstimateReport, Verdict};
use temple_core::sampling;
use temple_core::time::TimeFunction;

use super::lattice_spacing;
use crate::config::{IsometrySpec, MapSpec};
use crate::spec::{coord_box, point};
use crate::{ExperimentConfig, LabError, Outcome};

const EIKONAL_TOLERANCE: f64 = 1e-6;
const TIME_TOLERANCE: f64 = 1e-6;
const DISTANCE_GAP: f64 = 0.05;
const PULLBACK_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    Analytic,
    Tabulated,
}

/// A map `F` between spacetimes known on sample points.
pub struct SampledMap<const D: usize> {
    pub source_points: Vec<Point<D>>,
    pub image_points: Vec<Point<D>>,
    pub map_kind: MapKind,
    analytic: Option<Box<dyn Fn(&Point<D>) -> Point<D> + Send + Sync>>,
}

impl<const D: usize> SampledMap<D> {
    fn analytic(f: impl Fn(&Point<D>) -> Point<D> + Send + Sync + 'static, sources: Vec<Point<D>>) -> Self {
        let image_points = sources.iter().map(&f).collect();
        SampledMap {
            source_points: sources,
            image_points,
            map_kind: MapKind::Analytic,
            analytic: Some(Box::new(f)),
        }
    }

    /// `F(x)`: the closed form, or the tabulated image of a source point
    /// within `1e-12` relative of `x`.
    fn eval(&self, x: &Point<D>) -> Option<Point<D>> {
        if let Some(f) = &self.analytic {
            return Some(f(x));
        }
        let tol = 1e-12 * (1.0 + x.norm());
        self.source_points
            .iter()
            .position(|s| (s - x).norm() <= tol)
            .map(|i| self.image_points[i])
    }

    /// Central-difference Jacobian with step `step`.
    fn jacobian(&self, x: &Point<D>, step: f64) -> Option<Matrix<D>> {
        let mut j = Matrix::<D>::zeros();
        for a in 0..D {
            let mut plus = *x;
            let mut minus = *x;
            plus[a] += step;
            minus[a] -= step;
            let col = (self.eval(&plus)? - self.eval(&minus)?) / (2.0 * step);
            j.set_column(a, &col);
        }
        Some(j)
    }
}

/// `|g^{-1}(dτ, dτ) + 1|` at `x`, with `dτ` by central differences.
pub fn eikonal_defect<const D: usize, M: Metric<D> + ?Sized>(
    metric: &M,
    tau: &TimeFunction<D>,
    x: &Point<D>,
    step: f64,
) -> Result<f64, LabError> {
    let ginv = metric
        .g(x)?
        .try_inverse()
        .ok_or_else(|| LabError::Rejected(format!("singular metric at {:?}", x.as_slice())))?;
    let dtau = tau.gradient(x, step);
    Ok(((dtau.transpose() * ginv * dtau)[(0, 0)] + 1.0).abs())
}

fn build_map<const D: usize>(spec: &MapSpec, region: &CoordBox<D>, count: usize, seed: u64) -> Result<SampledMap<D>, LabError> {
    let mut rng = sampling::rng(seed);
    let mut sources = || (0..count).map(|_| sampling::uniform_in_box(&mut rng, region)).collect::<Vec<_>>();
    Ok(match spec {
        MapSpec::Identity => SampledMap::analytic(|x| *x, sources()),
        MapSpec::Translation { offset } => {
            let o = point::<D>(offset)?;
            SampledMap::analytic(move |x| x + o, sources())
        }
        MapSpec::Stretch { factors } => {
            let f = point::<D>(factors)?;
            SampledMap::analytic(move |x| x.component_mul(&f), sources())
        }
        MapSpec::Tabulated { source, image } => {
            if source.len() != image.len() || source.is_empty() {
                return Err(LabError::Config("tabulated map needs equally many source and image points".into()));
            }
            SampledMap {
                source_points: source.iter().map(|p| point::<D>(p)).collect::<Result<_, _>>()?,
                image_points: image.iter().map(|p| point::<D>(p)).collect::<Result<_, _>>()?,
                map_kind: MapKind::Tabulated,
                analytic: None,
            }
        }
    })
}

fn bounding_box<const D: usize>(points: &[Point<D>]) -> CoordBox<D> {
    let mut b = CoordBox::new([f64::INFINITY; D], [f64::NEG_INFINITY; D]);
    for p in points {
        for a in 0..D {
            b.min[a] = b.min[a].min(p[a]);
            b.max[a] = b.max[a].max(p[a]);
        }
    }
    b
}

/// Three-stage check of the isometry theorem for a supplied map: time
/// preservation, null distance preservation, and the pullback `F*g₂ = g₁`.
pub fn run<const D: usize>(config: &ExperimentConfig) -> Result<Outcome, LabError> {
    let IsometrySpec {
        map,
        metric2,
        time2,
        region,
        pairs,
    } = config
        .isometry
        .clone()
        .ok_or_else(|| LabError::Config("isometry experiment needs an `isometry` section".into()))?;
    let metric1 = Arc::new(config.metric_spec.build::<D>()?);
    let metric2 = Arc::new(metric2.build::<D>()?);
    let tau1 = config.time.build(&*metric1)?;
    let tau2 = time2.build(&*metric2)?;
    let region = coord_box::<D>(&region)?.intersect(metric1.domain());
    let size = (0..D).map(|a| region.width(a)).fold(f64::INFINITY, f64::min);
    let step = 1e-5 * size;
    let count = config.resolution.samples.max(2 * pairs);
    let f = build_map::<D>(&map, &region, count, config.seed)?;
    for z in &f.image_points {
        metric2.check(z)?;
    }

    let mut eikonal = 0.0f64;
    for (x, z) in f.source_points.iter().zip(&f.image_points) {
        eikonal = eikonal
            .max(eikonal_defect(&*metric1, &tau1, x, step)?)
            .max(eikonal_defect(&*metric2, &tau2, z, step)?);
    }
    if eikonal >= EIKONAL_TOLERANCE {
        return Err(LabError::Rejected(format!(
            "time functions are not unit-gradient: max |g⁻¹(dτ, dτ) + 1| = {eikonal:e}"
        )));
    }

    let mut report = EstimateReport::new("isometry");
    let time_gap = f
        .source_points
        .iter()
        .zip(&f.image_points)
        .map(|(x, z)| (tau2.eval(z) - tau1.eval(x)).abs())
        .fold(0.0, f64::max);

    let h = lattice_spacing(config, &region);
    let lattice1 = build_null_lattice(metric1.clone(), region, h, config.resolution.directions)?;
    let mut image_hull = f.image_points.clone();
    if f.analytic.is_some() {
        image_hull.extend((0..1usize << D).filter_map(|bits| {
            let corner = Point::<D>::from_fn(|a, _| if bits >> a & 1 == 1 { region.max[a] } else { region.min[a] });
            f.eval(&corner)
        }));
    }
    let region2 = bounding_box(&image_hull).intersect(metric2.domain());
    let lattice2 = build_null_lattice(metric2.clone(), region2, h, config.resolution.directions)?;
    let refinements = config.resolution.refinements;
    let pair_count = pairs.min(f.source_points.len() / 2);
    let distances: Vec<_> = (0..pair_count)
        .into_par_iter()
        .map(|k| -> Result<_, LabError> {
            let (i, j) = (2 * k, 2 * k + 1);
            let d1 = estimate_null_distance(&lattice1, &tau1, &f.source_points[i], &f.source_points[j], refinements)?;
            let d2 = estimate_null_distance(&lattice2, &tau2, &f.image_points[i], &f.image_points[j], refinements)?;
            Ok((d1, d2))
        })
        .collect();
    let (mut distance_gap, mut disjoint) = (0.0f64, 0.0f64);
    for (k, d) in distances.into_iter().enumerate() {
        let (d1, d2) = d?;
        let scale = d1.upper.max(d2.upper);
        let gap = if scale > 0.0 { (d1.upper - d2.upper).abs() / scale } else { 0.0 };
        let apart = if scale > 0.0 { (d2.lower - d1.upper).max(d1.lower - d2.upper).max(0.0) / scale } else { 0.0 };
        distance_gap = distance_gap.max(gap);
        disjoint = disjoint.max(apart);
        report.row([("pair", k as f64), ("dhat1", d1.upper), ("dhat2", d2.upper), ("relative_gap", gap)]);
    }

    let mut pullback = 0.0f64;
    for x in &f.source_points {
        let Some(j) = f.jacobian(x, step) else {
            return Err(LabError::Rejected(format!(
                "tabulated map has no samples at ±{step:e} around {:?}",
                x.as_slice()
            )));
        };
        let z = f.eval(x).expect("source point is tabulated");
        let pulled = j.transpose() * metric2.g(&z)? * j;
        let dev = (pulled - metric1.g(x)?).abs().max();
        pullback = pullback.max(dev);
    }

    let a = time_gap < TIME_TOLERANCE;
    let b = distance_gap <= DISTANCE_GAP;
    let c = pullback < PULLBACK_TOLERANCE;
    report
        .metric("eikonal_defect", eikonal)
        .metric("time_gap", time_gap)
        .metric("distance_gap", distance_gap)
        .metric("interval_separation", disjoint)
        .metric("pullback_deviation", pullback)
        .metric("stage_a", a as u8 as f64)
        .metric("stage_b", b as u8 as f64)
        .metric("stage_c", c as u8 as f64)
        .metric("implication_held", (!(a && b) || c) as u8 as f64)
        .metric("samples", f.source_points.len() as f64)
        .metric("pairs", pair_count as f64)
        .metric("tabulated", (f.map_kind == MapKind::Tabulated) as u8 as f64);
    if a && b && !c {
        report.anomaly(format!(
            "time and distance preserved but pullback deviates by {pullback:e}: the isometry conclusion failed"
        ));
    }
    report.verdict = Verdict::from_bool(a && b && c);
    Ok(Outcome::new(report))
}
