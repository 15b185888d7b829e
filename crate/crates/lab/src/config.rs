use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::spec::{MetricSpec, TimeSpec};
use crate::LabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Bilipschitz,
    Causality,
    Gradient,
    Isometry,
    Nulldist,
    ChartDump,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Bilipschitz,
        Experiment::Causality,
        Experiment::Gradient,
        Experiment::Isometry,
        Experiment::Nulldist,
        Experiment::ChartDump,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Bilipschitz => "bilipschitz",
            Experiment::Causality => "causality",
            Experiment::Gradient => "gradient",
            Experiment::Isometry => "isometry",
            Experiment::Nulldist => "nulldist",
            Experiment::ChartDump => "chart-dump",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub metric_spec: MetricSpec,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub resolution: Resolution,
    pub chart: ChartSpec,
    #[serde(default)]
    pub frame: FrameSpec,
    #[serde(default)]
    pub time: TimeSpec,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient: Option<GradientSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isometry: Option<IsometrySpec>,
    /// Point pairs for `nulldist`; random pairs in the uniform neighbourhood
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queries: Option<Vec<Query>>,
    /// JSON file holding a `[{p, q}]` array, read when `queries` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queries_file: Option<PathBuf>,
    /// Coordinate box of the `nulldist` lattice; the metric domain when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Vec<[f64; 2]>>,
}

fn default_seed() -> u64 {
    42
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resolution {
    /// Lattice spacing; `0.025` times the lattice region width when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default = "default_refinements")]
    pub refinements: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Spatial directions per lattice node.
    #[serde(default = "default_directions")]
    pub directions: usize,
}

fn default_refinements() -> usize {
    2
}

fn default_samples() -> usize {
    500
}

fn default_directions() -> usize {
    6
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution {
            h: None,
            refinements: default_refinements(),
            samples: default_samples(),
            directions: default_directions(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Auto {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RadiusSpec {
    Value(f64),
    Auto(Auto),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub q: Vec<f64>,
    pub r: RadiusSpec,
}

/// Fermi frame the charts and `g_R` are built from. Its centre `p` (the
/// chart centre when absent) anchors the uniform neighbourhood of radius
/// `r/8`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default = "default_frame_radius")]
    pub radius: f64,
    /// Cylinder samples and directions per sample for `r = "auto"`.
    #[serde(default = "default_radius_samples")]
    pub radius_samples: usize,
    #[serde(default = "default_radius_directions")]
    pub radius_directions: usize,
}

fn default_frame_radius() -> f64 {
    0.8
}

fn default_radius_samples() -> usize {
    4
}

fn default_radius_directions() -> usize {
    6
}

impl Default for FrameSpec {
    fn default() -> Self {
        FrameSpec {
            center: None,
            radius: default_frame_radius(),
            radius_samples: default_radius_samples(),
            radius_directions: default_radius_directions(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientSpec {
    /// Number of Halton centres in the uniform neighbourhood.
    #[serde(default = "default_centers")]
    pub centers: usize,
    /// Extra centres; each must lie in the uniform neighbourhood.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_centers: Vec<Vec<f64>>,
    /// Shells as fractions of the chart radius.
    #[serde(default = "default_lambda_fractions")]
    pub lambda_fractions: Vec<f64>,
    #[serde(default = "default_shell_directions")]
    pub directions: usize,
}

fn default_centers() -> usize {
    10
}

fn default_lambda_fractions() -> Vec<f64> {
    vec![0.05, 0.1, 0.2, 0.4]
}

fn default_shell_directions() -> usize {
    14
}

impl Default for GradientSpec {
    fn default() -> Self {
        GradientSpec {
            centers: default_centers(),
            extra_centers: Vec::new(),
            lambda_fractions: default_lambda_fractions(),
            directions: default_shell_directions(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    Identity,
    Translation { offset: Vec<f64> },
    /// `x ↦ diag(factors) x`.
    Stretch { factors: Vec<f64> },
    Tabulated { source: Vec<Vec<f64>>, image: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsometrySpec {
    pub map: MapSpec,
    pub metric2: MetricSpec,
    #[serde(default)]
    pub time2: TimeSpec,
    /// Sample box in spacetime 1.
    pub region: Vec<[f64; 2]>,
    /// Pairs for the distance stage.
    #[serde(default = "default_isometry_pairs")]
    pub pairs: usize,
}

fn default_isometry_pairs() -> usize {
    30
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Query {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "experiment": "chart-dump",
        "metric_spec": {"catalog_id": "minkowski", "dim": 4, "domain": [[-2,2],[-2,2],[-2,2],[-2,2]]},
        "chart": {"q": [0,0,0,0], "r": "auto"}
    }"#;

    #[test]
    fn defaults_fill_in() {
        let c: ExperimentConfig = serde_json::from_str(MINIMAL).unwrap();
        assert_eq!(c.experiment, Experiment::ChartDump);
        assert_eq!(c.seed, 42);
        assert_eq!(c.resolution, Resolution::default());
        assert_eq!(c.resolution.refinements, 2);
        assert!(matches!(c.chart.r, RadiusSpec::Auto(_)));
        assert_eq!(c.time, TimeSpec::Coordinate);
        assert_eq!(c.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn round_trips_through_json() {
        let c: ExperimentConfig = serde_json::from_str(MINIMAL).unwrap();
        let again: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn rejects_unknown_fields_and_names() {
        let extra = MINIMAL.replacen("\"chart\"", "\"bogus\": 1, \"chart\"", 1);
        assert!(serde_json::from_str::<ExperimentConfig>(&extra).is_err());
        let bad = MINIMAL.replace("chart-dump", "chart_dump");
        assert!(serde_json::from_str::<ExperimentConfig>(&bad).is_err());
        let radius = MINIMAL.replace("\"auto\"", "\"big\"");
        assert!(serde_json::from_str::<ExperimentConfig>(&radius).is_err());
    }

    #[test]
    fn map_specs_are_tagged() {
        let m: MapSpec = serde_json::from_str(r#"{"kind": "stretch", "factors": [1, 2, 2, 2]}"#).unwrap();
        assert_eq!(m, MapSpec::Stretch { factors: vec![1.0, 2.0, 2.0, 2.0] });
        assert!(serde_json::from_str::<MapSpec>(r#"{"kind": "rotation"}"#).is_err());
    }

    #[test]
    fn experiment_names_match_cli_spelling() {
        for e in Experiment::ALL {
            let json = serde_json::to_string(&e).unwrap();
            assert_eq!(json, format!("\"{}\"", e.name()));
        }
    }
}
