//! Metric and time-function specifications as they appear in config files.

use nalgebra::SVector;
use serde::{Deserialize, Serialize};
use temple_core::linalg::{Christoffel, Matrix, Point};
use temple_core::metric::{Bump, CoordBox, Flrw, Metric, Minkowski, PerturbedMinkowski, ScaleFactor};
use temple_core::time::{coordinate_time, TimeFunction};

use crate::LabError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub catalog_id: String,
    pub dim: usize,
    pub domain: Vec<[f64; 2]>,
    #[serde(default)]
    pub params: MetricParams,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_factor: Option<ScaleFactorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bump_center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bump_support: Option<f64>,
    /// Constant factor multiplying the whole metric.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conformal_factor: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleFactorSpec {
    Power(f64),
    Exp(f64),
}

impl From<ScaleFactorSpec> for ScaleFactor {
    fn from(s: ScaleFactorSpec) -> Self {
        match s {
            ScaleFactorSpec::Power(p) => ScaleFactor::Power(p),
            ScaleFactorSpec::Exp(h) => ScaleFactor::Exp(h),
        }
    }
}

impl MetricSpec {
    pub fn minkowski(dim: usize, half_width: f64) -> Self {
        MetricSpec {
            catalog_id: "minkowski".into(),
            dim,
            domain: vec![[-half_width, half_width]; dim],
            params: MetricParams::default(),
        }
    }

    pub fn flrw(dim: usize, scale_factor: ScaleFactorSpec, domain: Vec<[f64; 2]>) -> Self {
        MetricSpec {
            catalog_id: "flrw".into(),
            dim,
            domain,
            params: MetricParams {
                scale_factor: Some(scale_factor),
                ..MetricParams::default()
            },
        }
    }

    pub fn perturbed(dim: usize, epsilon: f64, half_width: f64) -> Self {
        MetricSpec {
            catalog_id: "perturbed".into(),
            dim,
            domain: vec![[-half_width, half_width]; dim],
            params: MetricParams {
                epsilon: Some(epsilon),
                bump_center: Some(vec![0.0; dim]),
                bump_support: Some(1.5),
                ..MetricParams::default()
            },
        }
    }

    pub fn domain<const D: usize>(&self) -> Result<CoordBox<D>, LabError> {
        coord_box::<D>(&self.domain)
    }

    pub fn build<const D: usize>(&self) -> Result<CatalogMetric<D>, LabError> {
        let domain = self.domain::<D>()?;
        let p = &self.params;
        let kind = match self.catalog_id.as_str() {
            "minkowski" => CatalogKind::Minkowski(Minkowski::new(domain)?),
            "flrw" => {
                let a = p
                    .scale_factor
                    .ok_or_else(|| LabError::Config("flrw needs params.scale_factor".into()))?;
                CatalogKind::Flrw(Flrw::new(a.into(), domain)?)
            }
            "perturbed" => {
                let epsilon = p.epsilon.ok_or_else(|| LabError::Config("perturbed needs params.epsilon".into()))?;
                let center = match &p.bump_center {
                    Some(c) => point::<D>(c)?,
                    None => Point::<D>::zeros(),
                };
                let bump = Bump {
                    center,
                    support: p.bump_support.unwrap_or(1.5),
                };
                CatalogKind::Perturbed(PerturbedMinkowski::new(epsilon, bump, domain)?)
            }
            other => return Err(LabError::Config(format!("unknown catalog_id {other:?}"))),
        };
        let factor = p.conformal_factor.unwrap_or(1.0);
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(LabError::Config(format!("conformal_factor must be positive, got {factor}")));
        }
        Ok(CatalogMetric { kind, factor })
    }
}

pub fn coord_box<const D: usize>(intervals: &[[f64; 2]]) -> Result<CoordBox<D>, LabError> {
    if intervals.len() != D {
        return Err(LabError::Config(format!("box has {} axes, dim is {D}", intervals.len())));
    }
    if intervals.iter().any(|[a, b]| !(a < b)) {
        return Err(LabError::Config(format!("empty interval in {intervals:?}")));
    }
    Ok(CoordBox::new(
        std::array::from_fn(|i| intervals[i][0]),
        std::array::from_fn(|i| intervals[i][1]),
    ))
}

pub fn point<const D: usize>(coords: &[f64]) -> Result<Point<D>, LabError> {
    if coords.len() != D {
        return Err(LabError::Config(format!("point {coords:?} does not have {D} coordinates")));
    }
    Ok(SVector::<f64, D>::from_column_slice(coords))
}

#[derive(Debug, Clone)]
enum CatalogKind<const D: usize> {
    Minkowski(Minkowski<D>),
    Flrw(Flrw<D>),
    Perturbed(PerturbedMinkowski<D>),
}

/// A catalog metric times a constant factor. Christoffel symbols do not see
/// the factor.
#[derive(Debug, Clone)]
pub struct CatalogMetric<const D: usize> {
    kind: CatalogKind<D>,
    factor: f64,
}

impl<const D: usize> CatalogMetric<D> {
    fn inner(&self) -> &dyn Metric<D> {
        match &self.kind {
            CatalogKind::Minkowski(m) => m,
            CatalogKind::Flrw(m) => m,
            CatalogKind::Perturbed(m) => m,
        }
    }
}

impl<const D: usize> Metric<D> for CatalogMetric<D> {
    fn catalog_id(&self) -> &str {
        self.inner().catalog_id()
    }
    fn domain(&self) -> &CoordBox<D> {
        self.inner().domain()
    }
    fn metric_raw(&self, p: &Point<D>) -> Matrix<D> {
        self.inner().metric_raw(p) * self.factor
    }
    fn christoffel_raw(&self, p: &Point<D>) -> Christoffel<D> {
        self.inner().christoffel_raw(p)
    }
    fn christoffel_gradient_raw(&self, p: &Point<D>) -> [Christoffel<D>; D] {
        self.inner().christoffel_gradient_raw(p)
    }
    fn fd_step(&self) -> f64 {
        self.inner().fd_step()
    }
    fn past_boundary(&self) -> Option<f64> {
        self.inner().past_boundary()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeSpec {
    #[default]
    Coordinate,
    /// `t ↦ t³` applied to the coordinate time: strictly increasing but not
    /// anti-Lipschitz across `t = 0`.
    CoordinateCubed,
}

impl TimeSpec {
    pub fn build<const D: usize, M: Metric<D> + ?Sized>(&self, metric: &M) -> Result<TimeFunction<D>, LabError> {
        let t = coordinate_time(metric)?;
        Ok(match self {
            TimeSpec::Coordinate => t,
            TimeSpec::CoordinateCubed => TimeFunction::custom(move |p| t.eval(p).powi(3), None),
        })
    }
}
