use rayon::prelude::*;
use temple_core::chart::TempleChart;
use temple_core::frame::{riemannian_distance, DistanceBudget, RiemannianizedMetric};
use temple_core::linalg::Vector;
use temple_core::null_distance::{build_null_lattice, estimate_null_distance};
use temple_core::report::{EstimateReport, Verdict};

use super::{lattice_spacing, Setup};
use crate::{ExperimentConfig, LabError, Outcome};

const DEGENERATE: f64 = 1e-6;

/// Envelope names: `d̂_τ` against `d_{g_R}`, chart distance against `d_{g_R}`,
/// and `d̂_τ` against chart distance, each in both directions.
const ENVELOPES: [&str; 6] = [
    "dhat_over_dgr",
    "dgr_over_dhat",
    "de_over_dgr",
    "dgr_over_de",
    "dhat_over_de",
    "de_over_dhat",
];

#[derive(Clone, Copy)]
struct PairDistances {
    dhat: f64,
    dhat_lower: f64,
    dgr: f64,
    dgr_lower: f64,
    de: f64,
}

impl PairDistances {
    fn ratios(&self) -> [f64; 6] {
        [
            self.dhat / self.dgr,
            self.dgr / self.dhat,
            self.de / self.dgr,
            self.dgr / self.de,
            self.dhat / self.de,
            self.de / self.dhat,
        ]
    }
}

fn envelopes(rows: &[PairDistances]) -> [f64; 6] {
    let mut out = [0.0f64; 6];
    for r in rows {
        for (o, v) in out.iter_mut().zip(r.ratios()) {
            *o = o.max(v);
        }
    }
    out
}

/// Ratio envelopes between `d̂_τ`, `d_{g_R}` and the Euclidean distance of
/// chart coordinates `(ω, x)` on pairs of `U_p`, on the first half of the
/// pairs and on all of them. Point values are the upper bounds of `d̂_τ` and
/// `d_{g_R}`.
pub fn run<const D: usize>(config: &ExperimentConfig) -> Result<Outcome, LabError> {
    let setup = Setup::<D>::new(config)?;
    let region = setup.lattice_region();
    let h = lattice_spacing(config, &region);
    let lattice = build_null_lattice(setup.metric.clone(), region, h, config.resolution.directions)?;
    let chart = TempleChart::build(&setup.frame, &setup.q, setup.r)?;
    let gr = RiemannianizedMetric::new(setup.frame.clone());
    let budget = DistanceBudget {
        per_axis: 2,
        smoothing_iterations: 10,
    };
    let pairs = setup.pairs(config.resolution.samples, config.seed);
    let refinements = config.resolution.refinements;
    let measured: Vec<_> = pairs
        .par_iter()
        .map(|(a, b)| -> Result<Option<PairDistances>, LabError> {
            if (a - b).norm() < DEGENERATE {
                return Ok(None);
            }
            let ca = chart.invert(a)?;
            let cb = chart.invert(b)?;
            let coords = |t: f64, x: &Vector<D>| {
                let mut v = *x;
                v[0] = t;
                v
            };
            let de = (coords(ca.t, &ca.x) - coords(cb.t, &cb.x)).norm();
            let dgr = riemannian_distance(&gr, a, b, &region, &budget)?;
            let dhat = estimate_null_distance(&lattice, &setup.tau, a, b, refinements)?;
            Ok(Some(PairDistances {
                dhat: dhat.upper,
                dhat_lower: dhat.lower,
                dgr: dgr.upper,
                dgr_lower: dgr.lower,
                de,
            }))
        })
        .collect();

    let mut report = EstimateReport::new("bilipschitz");
    setup.echo(&mut report);
    let half = pairs.len() / 2;
    let (mut first, mut all) = (Vec::new(), Vec::new());
    let (mut excluded, mut failures) = (0usize, 0usize);
    for (i, m) in measured.into_iter().enumerate() {
        match m {
            Ok(Some(d)) => {
                report.row([
                    ("pair", i as f64),
                    ("dhat_upper", d.dhat),
                    ("dhat_lower", d.dhat_lower),
                    ("dgr_upper", d.dgr),
                    ("dgr_lower", d.dgr_lower),
                    ("de", d.de),
                ]);
                if i < half {
                    first.push(d);
                }
                all.push(d);
            }
            Ok(None) => excluded += 1,
            Err(e) => {
                failures += 1;
                report.anomaly(format!("pair {i}: {e}"));
            }
        }
    }
    let (e_half, e_all) = (envelopes(&first), envelopes(&all));
    let mut drift = 0.0f64;
    let mut finite = true;
    for ((name, h), a) in ENVELOPES.iter().zip(e_half).zip(e_all) {
        report.metric(name, a).metric(&format!("{name}_half"), h);
        finite &= a.is_finite() && a > 0.0;
        drift = drift.max((a / h - 1.0).abs());
    }
    report
        .metric("k1_hat", e_all[0].max(e_all[1]))
        .metric("k2_hat", e_all[2].max(e_all[3]))
        .metric("drift", drift)
        .metric("h", h)
        .metric("excluded_pairs", excluded as f64)
        .metric("failed_pairs", failures as f64);
    report.verdict = if failures * 100 > pairs.len() {
        report.anomaly(format!("coverage: {failures} of {} pairs failed", pairs.len()));
        Verdict::Inconclusive
    } else {
        Verdict::from_bool(finite && drift < 0.25)
    };
    Ok(Outcome::new(report))
}
