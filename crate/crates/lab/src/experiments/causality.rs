use rayon::prelude::*;
use temple_core::null_distance::{build_null_lattice, encoding_pair, Relation};
use temple_core::report::{EstimateReport, Verdict};

use super::{lattice_spacing, Setup};
use crate::{ExperimentConfig, LabError, Outcome};

fn relation_code(r: Relation) -> f64 {
    match r {
        Relation::Future => 1.0,
        Relation::Past => -1.0,
        Relation::Spacelike => 0.0,
        Relation::Band => 2.0,
    }
}

/// Confusion matrix of the causal oracle against the criterion
/// `d̂ = τ(b) − τ(a)` on random pairs of `U_p`.
pub fn run<const D: usize>(config: &ExperimentConfig) -> Result<Outcome, LabError> {
    let setup = Setup::<D>::new(config)?;
    let region = setup.lattice_region();
    let h = lattice_spacing(config, &region);
    let lattice = build_null_lattice(setup.metric.clone(), region, h, config.resolution.directions)?;
    let pairs = setup.pairs(config.resolution.samples, config.seed);
    let refinements = config.resolution.refinements;
    let outcomes: Vec<_> = pairs
        .par_iter()
        .map(|(a, b)| encoding_pair(&lattice, &setup.frame, &setup.tau, a, b, refinements))
        .collect();

    let mut report = EstimateReport::new("causality");
    setup.echo(&mut report);
    let mut counts = [[0usize; 2]; 2];
    let (mut band, mut failures, mut excluded) = (0usize, 0usize, 0usize);
    for (i, (outcome, (a, b))) in outcomes.into_iter().zip(&pairs).enumerate() {
        if (a - b).norm() < 1e-6 {
            excluded += 1;
            continue;
        }
        let o = match outcome {
            Ok(o) => o,
            Err(e) => {
                failures += 1;
                report.anomaly(format!("pair {i}: {e}"));
                continue;
            }
        };
        report.row([
            ("pair", i as f64),
            ("oracle", relation_code(o.relation)),
            ("criterion_future", o.criterion_future as u8 as f64),
            ("band", o.band as u8 as f64),
            ("lower", o.lower),
            ("upper", o.upper),
            ("tolerance", o.tolerance),
            ("cone_gap", o.cone_gap),
        ]);
        if o.band {
            band += 1;
        } else {
            counts[o.oracle_future() as usize][o.criterion_future as usize] += 1;
        }
    }
    let off_diagonal = counts[0][1] + counts[1][0];
    report
        .metric("h", h)
        .metric("h_final", h / (1u64 << refinements) as f64)
        .metric("oracle_future_criterion_future", counts[1][1] as f64)
        .metric("oracle_future_criterion_not", counts[1][0] as f64)
        .metric("oracle_not_criterion_future", counts[0][1] as f64)
        .metric("oracle_not_criterion_not", counts[0][0] as f64)
        .metric("off_diagonal", off_diagonal as f64)
        .metric("boundary_band", band as f64)
        .metric("excluded_pairs", excluded as f64)
        .metric("failed_pairs", failures as f64);
    if off_diagonal > 0 {
        report.anomaly(format!("{off_diagonal} pairs outside the boundary band disagree with the oracle"));
    }
    report.verdict = if failures * 100 > pairs.len() {
        report.anomaly(format!("coverage: {failures} of {} pairs failed", pairs.len()));
        Verdict::Inconclusive
    } else {
        Verdict::from_bool(off_diagonal == 0)
    };
    Ok(Outcome::new(report))
}
