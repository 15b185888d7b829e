//! The six experiments. Each is generic over the spacetime dimension and
//! dispatched on `metric_spec.dim`.

mod bilipschitz;
mod causality;
mod chart_dump;
mod gradient;
mod isometry;
mod nulldist;

use std::sync::Arc;

use temple_core::frame::FermiFrame;
use temple_core::linalg::Point;
use temple_core::metric::{CoordBox, Metric};
use temple_core::radius::{temple_sample_set, uniform_temple_radius};
use temple_core::report::EstimateReport;
use temple_core::sampling;
use temple_core::time::TimeFunction;

use crate::config::{Experiment, ExperimentConfig, RadiusSpec};
use crate::spec::{point, CatalogMetric};
use crate::{LabError, Outcome};

pub use isometry::eikonal_defect;

pub fn dispatch(config: &ExperimentConfig) -> Result<Outcome, LabError> {
    match config.metric_spec.dim {
        2 => run_dim::<2>(config),
        3 => run_dim::<3>(config),
        4 => run_dim::<4>(config),
        5 => run_dim::<5>(config),
        d => Err(LabError::Config(format!("dimension {d} not supported (2 to 5)"))),
    }
}

fn run_dim<const D: usize>(config: &ExperimentConfig) -> Result<Outcome, LabError> {
    match config.experiment {
        Experiment::Bilipschitz => bilipschitz::run::<D>(config),
        Experiment::Causality => causality::run::<D>(config),
        Experiment::Gradient => gradient::run::<D>(config),
        Experiment::Isometry => isometry::run::<D>(config),
        Experiment::Nulldist => nulldist::run::<D>(config),
        Experiment::ChartDump => chart_dump::run::<D>(config),
    }
}

/// Metric, frame at `p`, chart radius `r` and the uniform neighbourhood
/// `U_p` (coordinate ball of radius `r/8` about `p`).
struct Setup<const D: usize> {
    metric: Arc<CatalogMetric<D>>,
    frame: FermiFrame<D, CatalogMetric<D>>,
    tau: TimeFunction<D>,
    p: Point<D>,
    q: Point<D>,
    r: f64,
}

impl<const D: usize> Setup<D> {
    fn new(config: &ExperimentConfig) -> Result<Self, LabError> {
        let metric = Arc::new(config.metric_spec.build::<D>()?);
        let q = point::<D>(&config.chart.q)?;
        let p = match &config.frame.center {
            Some(c) => point::<D>(c)?,
            None => q,
        };
        metric.check(&p)?;
        let frame = FermiFrame::build(metric.clone(), &p, config.frame.radius)?;
        let r = match config.chart.r {
            RadiusSpec::Value(r) if r > 0.0 => r,
            RadiusSpec::Value(r) => return Err(LabError::Config(format!("chart radius must be positive, got {r}"))),
            RadiusSpec::Auto(_) => {
                let samples = temple_sample_set(&frame, config.frame.radius_samples, 0.9)?;
                uniform_temple_radius(&frame, &samples, config.frame.radius_directions)?.radius
            }
        };
        let tau = config.time.build(&*metric)?;
        let setup = Setup { metric, frame, tau, p, q, r };
        setup.require_in_neighbourhood(&q)?;
        Ok(setup)
    }

    fn neighbourhood_radius(&self) -> f64 {
        self.r / 8.0
    }

    fn require_in_neighbourhood(&self, x: &Point<D>) -> Result<(), LabError> {
        let d = (x - self.p).norm();
        if d > self.neighbourhood_radius() * (1.0 + 1e-12) {
            return Err(LabError::Core(temple_core::Error::OutOfRadius {
                distance: d,
                radius: self.neighbourhood_radius(),
            }));
        }
        Ok(())
    }

    /// Deterministic point pairs drawn uniformly from `U_p`.
    fn pairs(&self, count: usize, seed: u64) -> Vec<(Point<D>, Point<D>)> {
        let mut rng = sampling::rng(seed);
        let radius = self.neighbourhood_radius();
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| self.p + sampling::in_ball::<D>(rng, radius);
        (0..count).map(|_| (draw(&mut rng), draw(&mut rng))).collect()
    }

    /// Lattice box: `U_p`'s bounding cube doubled, clipped to the domain.
    fn lattice_region(&self) -> CoordBox<D> {
        let margin = 1e-9 * self.r;
        let domain = self.metric.domain();
        let inner = CoordBox::new(
            std::array::from_fn(|i| domain.min[i] + margin),
            std::array::from_fn(|i| domain.max[i] - margin),
        );
        CoordBox::cube(&self.p, 2.0 * self.neighbourhood_radius()).intersect(&inner)
    }

    fn echo(&self, report: &mut EstimateReport) {
        report
            .metric("chart_radius", self.r)
            .metric("neighbourhood_radius", self.neighbourhood_radius())
            .metric("frame_radius", self.frame.radius());
    }
}

fn lattice_spacing<const D: usize>(config: &ExperimentConfig, region: &CoordBox<D>) -> f64 {
    config
        .resolution
        .h
        .unwrap_or_else(|| 0.025 * (0..D).map(|a| region.width(a)).fold(f64::INFINITY, f64::min))
}

fn max(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}
