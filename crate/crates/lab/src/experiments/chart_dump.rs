use temple_core::chart::TempleChart;
use temple_core::report::{EstimateReport, Verdict};

use super::gradient::COORD_KEYS;
use super::Setup;
use crate::{ExperimentConfig, LabError, Outcome};

const Z_KEYS: [&str; 5] = ["z0", "z1", "z2", "z3", "z4"];

/// Chart samples `(t, x) ↦ z = Φ_q(t, x)` with the recovered `ω`, `λ` and
/// the round-trip residual.
pub fn run<const D: usize>(config: &ExperimentConfig) -> Result<Outcome, LabError> {
    let setup = Setup::<D>::new(config)?;
    let chart = TempleChart::build(&setup.frame, &setup.q, setup.r)?;
    let mut report = EstimateReport::new("chart-dump");
    setup.echo(&mut report);
    let (mut round_trip, mut omega_err, mut lambda_err) = (0.0f64, 0.0f64, 0.0f64);
    let mut failures = 0usize;
    let samples = chart.off_axis_samples(config.resolution.samples, 0.9, 0.0);
    for (i, (t, x)) in samples.iter().enumerate() {
        let z = chart.forward(*t, x)?;
        let c = match chart.invert(&z) {
            Ok(c) => c,
            Err(e) => {
                failures += 1;
                report.anomaly(format!("sample {i}: {e}"));
                continue;
            }
        };
        let residual = (chart.forward(c.t, &c.x)? - z).norm();
        let lam = x.norm();
        round_trip = round_trip.max(residual);
        omega_err = omega_err.max((c.t - t).abs());
        lambda_err = lambda_err.max((c.lambda() - lam).abs());
        let mut row = vec![("sample", i as f64), ("t", *t), ("lambda", lam), ("omega", c.t), ("lambda_recovered", c.lambda()), ("residual", residual)];
        row.extend((1..D).map(|a| (COORD_KEYS[a], x[a])));
        row.extend((0..D).map(|a| (Z_KEYS[a], z[a])));
        report.row(row);
    }
    report
        .metric("samples", samples.len() as f64)
        .metric("failed_samples", failures as f64)
        .metric("max_round_trip", round_trip)
        .metric("max_omega_error", omega_err)
        .metric("max_lambda_error", lambda_err);
    report.verdict = if failures * 100 > samples.len() {
        Verdict::Inconclusive
    } else {
        Verdict::from_bool(round_trip < 1e-7 && omega_err < 1e-7 && lambda_err < 1e-7)
    };
    Ok(Outcome::new(report))
}
