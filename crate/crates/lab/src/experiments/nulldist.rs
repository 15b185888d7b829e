use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use temple_core::linalg::Point;
use temple_core::metric::Metric;
use temple_core::null_distance::{build_null_lattice, estimate_null_distance};
use temple_core::report::{EstimateReport, Verdict};

use super::{lattice_spacing, Setup};
use crate::config::Query;
use crate::spec::{coord_box, point};
use crate::{ExperimentConfig, LabError, Outcome};

#[derive(Serialize)]
struct Answer {
    lower: f64,
    upper: f64,
    h_final: f64,
}

const WITNESS_FILES: usize = 10;

fn queries<const D: usize>(config: &ExperimentConfig) -> Result<Option<Vec<(Point<D>, Point<D>)>>, LabError> {
    let list: Vec<Query> = match (&config.queries, &config.queries_file) {
        (Some(q), _) => q.clone(),
        (None, Some(path)) => serde_json::from_str(&std::fs::read_to_string(path)?)
            .map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?,
        (None, None) => return Ok(None),
    };
    list.iter()
        .map(|q| Ok((point::<D>(&q.p)?, point::<D>(&q.q)?)))
        .collect::<Result<Vec<_>, LabError>>()
        .map(Some)
}

/// Batch null distance bounds, with witness paths as CSV.
pub fn run<const D: usize>(config: &ExperimentConfig) -> Result<Outcome, LabError> {
    let metric = Arc::new(config.metric_spec.build::<D>()?);
    let tau = config.time.build(&*metric)?;
    let (pairs, region) = match queries::<D>(config)? {
        Some(pairs) => {
            let region = match &config.region {
                Some(r) => coord_box::<D>(r)?,
                None => *metric.domain(),
            };
            (pairs, region)
        }
        None => {
            let setup = Setup::<D>::new(config)?;
            (setup.pairs(config.resolution.samples, config.seed), setup.lattice_region())
        }
    };
    let region = region.intersect(metric.domain());
    let h = lattice_spacing(config, &region);
    let lattice = build_null_lattice(metric.clone(), region, h, config.resolution.directions)?;
    let refinements = config.resolution.refinements;
    let estimates: Vec<_> = pairs
        .par_iter()
        .map(|(p, q)| estimate_null_distance(&lattice, &tau, p, q, refinements))
        .collect();

    let mut report = EstimateReport::new("nulldist");
    let mut answers = Vec::new();
    let mut artifacts = Vec::new();
    let (mut monotone, mut bracketed, mut failures) = (true, true, 0usize);
    let mut max_gap = 0.0f64;
    for (i, (estimate, (p, q))) in estimates.into_iter().zip(&pairs).enumerate() {
        let e = match estimate {
            Ok(e) => e,
            Err(err) => {
                failures += 1;
                report.anomaly(format!("query {i}: {err}"));
                answers.push(Answer { lower: (tau.eval(q) - tau.eval(p)).abs(), upper: f64::INFINITY, h_final: f64::NAN });
                continue;
            }
        };
        let h_final = e.refinement_history.last().map_or(h, |l| l.0);
        monotone &= e.refinement_history.windows(2).all(|w| w[1].1 <= w[0].1 + w[1].0 / 4.0);
        bracketed &= e.lower <= e.upper;
        max_gap = max_gap.max(e.upper - e.lower);
        let mut row = vec![
            ("query", i as f64),
            ("lower", e.lower),
            ("upper", e.upper),
            ("h_final", h_final),
            ("segments", e.witness.segments() as f64),
            ("expansions", e.stats.expansions as f64),
            ("snap_violations", e.stats.snap_violations as f64),
        ];
        row.extend(e.refinement_history.iter().enumerate().map(|(k, l)| (LEVEL_KEYS[k.min(LEVEL_KEYS.len() - 1)], l.1)));
        report.row(row);
        if i < WITNESS_FILES {
            let mut csv = String::new();
            e.witness.write_csv(&tau, &mut csv).expect("writing to a String");
            artifacts.push((format!("witness_{i:03}.csv"), csv.into_bytes()));
        }
        answers.push(Answer { lower: e.lower, upper: e.upper, h_final });
    }
    artifacts.push(("distances.json".to_string(), serde_json::to_vec_pretty(&answers)?));
    report
        .metric("queries", pairs.len() as f64)
        .metric("failed_queries", failures as f64)
        .metric("h", h)
        .metric("max_gap", max_gap);
    if !monotone {
        report.anomaly("upper bound increased under refinement beyond h/4");
    }
    report.verdict = if failures > 0 {
        Verdict::Inconclusive
    } else {
        Verdict::from_bool(monotone && bracketed)
    };
    Ok(Outcome { report, artifacts })
}

const LEVEL_KEYS: [&str; 6] = ["upper_level_0", "upper_level_1", "upper_level_2", "upper_level_3", "upper_level_4", "upper_level_5+"];
