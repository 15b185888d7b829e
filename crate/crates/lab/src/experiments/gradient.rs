use rayon::prelude::*;
use temple_core::chart::TempleChart;
use temple_core::report::{EstimateReport, Verdict};
use temple_core::sampling;

use super::{max, Setup};
use crate::config::GradientSpec;
use crate::spec::point;
use crate::{ExperimentConfig, LabError, Outcome};

const FLAT_DEVIATION: f64 = 1e-6;

/// Gradient estimate `||∇ω_q| − √2| ≤ Ĉ λ` on charts centred across `U_p`,
/// with the spread `max Ĉ / min Ĉ` measuring how uniform `Ĉ` is in `q`.
pub fn run<const D: usize>(config: &ExperimentConfig) -> Result<Outcome, LabError> {
    let setup = Setup::<D>::new(config)?;
    let spec = config.gradient.clone().unwrap_or_default();
    let GradientSpec {
        centers: count,
        extra_centers,
        lambda_fractions,
        directions,
    } = spec;
    let mut centers = vec![setup.q];
    centers.extend(
        sampling::halton_ball::<D>(count.saturating_sub(1), setup.neighbourhood_radius())
            .into_iter()
            .map(|x| setup.p + x),
    );
    for c in &extra_centers {
        let c = point::<D>(c)?;
        setup.require_in_neighbourhood(&c)?;
        centers.push(c);
    }
    let shells: Vec<f64> = lambda_fractions.iter().map(|f| f * setup.r).collect();
    let reports: Vec<_> = centers
        .par_iter()
        .map(|c| {
            let chart = TempleChart::build(&setup.frame, c, setup.r)?;
            chart.gradient_estimate_experiment(&shells, directions)
        })
        .collect();

    let mut report = EstimateReport::new("gradient");
    setup.echo(&mut report);
    let mut c_hats = Vec::new();
    let mut max_dev = 0.0f64;
    let mut lambda_spread = 0.0f64;
    for (i, (r, c)) in reports.into_iter().zip(&centers).enumerate() {
        let r = r?;
        let c_hat = r.get("c_hat").unwrap_or(f64::NAN);
        let dev = r.get("max_dev").unwrap_or(f64::NAN);
        let spread = r.get("ratio_spread").unwrap_or(f64::NAN);
        let mut row = vec![("center", i as f64), ("c_hat", c_hat), ("max_dev", dev), ("lambda_ratio_spread", spread)];
        row.extend((0..D).map(|a| (COORD_KEYS[a], c[a])));
        report.row(row);
        if i == 0 {
            for (k, v) in &r.metrics {
                if k.starts_with("dev@") || k.starts_with("ratio@") {
                    report.metric(&format!("center0_{k}"), *v);
                }
            }
            report.metric("center0_lambda_ratio_spread", spread);
        }
        c_hats.push(c_hat);
        max_dev = max_dev.max(dev);
        lambda_spread = lambda_spread.max(spread);
    }
    let flat = max_dev < FLAT_DEVIATION;
    let min_c = c_hats.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = if flat { 1.0 } else { max(c_hats.iter().copied()) / min_c };
    report
        .metric("centers", centers.len() as f64)
        .metric("max_dev", max_dev)
        .metric("c_hat_max", max(c_hats.iter().copied()))
        .metric("c_hat_min", min_c)
        .metric("uniformity_spread", spread)
        .metric("max_lambda_ratio_spread", lambda_spread)
        .metric("flat", flat as u8 as f64);
    if flat {
        report.anomaly("all deviations below 1e-6: spread undefined, reported as 1");
    }
    report.verdict = Verdict::from_bool(spread.is_finite() && spread <= 3.0);
    Ok(Outcome::new(report))
}

pub(super) const COORD_KEYS: [&str; 5] = ["x0", "x1", "x2", "x3", "x4"];
