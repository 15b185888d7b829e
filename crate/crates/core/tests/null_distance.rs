use std::sync::Arc;

use nalgebra::Vector4;
use rand::Rng;
use temple_core::frame::{FermiFrame, RiemannianizedMetric};
use temple_core::geodesic::ConstantFrame;
use temple_core::linalg::inner;
use temple_core::metric::{CoordBox, Flrw, Metric, Minkowski, ScaleFactor};
use temple_core::null_distance::*;
use temple_core::sampling::{in_ball, rng};
use temple_core::time::{coordinate_time, TimeFunction};
use temple_core::Error;

fn minkowski() -> Arc<Minkowski<4>> {
    Arc::new(Minkowski::new(CoordBox::cube(&Vector4::zeros(), 2.0)).unwrap())
}

fn flat_lattice(h: f64, directions: usize) -> NullLattice<4, Minkowski<4>> {
    build_null_lattice(minkowski(), CoordBox::new([-0.3; 4], [1.3; 4]), h, directions).unwrap()
}

fn flat_distance(p: &Vector4<f64>, q: &Vector4<f64>) -> f64 {
    let d = q - p;
    d[0].abs().max((d[1] * d[1] + d[2] * d[2] + d[3] * d[3]).sqrt())
}

fn random_point(r: &mut impl Rng, center: &Vector4<f64>, radius: f64) -> Vector4<f64> {
    let x = in_ball::<3>(r, radius);
    center + Vector4::new(r.random_range(-radius..radius), x[0], x[1], x[2])
}

#[test]
fn null_length_examples() {
    let tau = coordinate_time(&*minkowski()).unwrap();
    let single = PiecewiseCausalPath::new(
        vec![Vector4::zeros(), Vector4::new(1.0, 1.0, 0.0, 0.0)],
        vec![Orientation::Future],
    )
    .unwrap();
    assert_eq!(null_length(&single, &tau).unwrap(), 1.0);
    let zigzag = PiecewiseCausalPath::new(
        vec![Vector4::zeros(), Vector4::new(1.0, 1.0, 0.0, 0.0), Vector4::new(0.0, 2.0, 0.0, 0.0)],
        vec![Orientation::Future, Orientation::Past],
    )
    .unwrap();
    assert_eq!(null_length(&zigzag, &tau).unwrap(), 2.0);
    assert_eq!(null_length(&PiecewiseCausalPath::constant(Vector4::zeros()), &tau).unwrap(), 0.0);
    assert!(PiecewiseCausalPath::new(vec![Vector4::zeros()], vec![Orientation::Future]).is_err());

    let mut csv = String::new();
    zigzag.write_csv(&tau, &mut csv).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn null_length_outside_time_domain() {
    let tau = TimeFunction::<4>::custom(|p| if p[0] > 5.0 { f64::NAN } else { p[0] }, None);
    let path = PiecewiseCausalPath::new(
        vec![Vector4::zeros(), Vector4::new(6.0, 6.0, 0.0, 0.0)],
        vec![Orientation::Future],
    )
    .unwrap();
    assert!(matches!(null_length(&path, &tau), Err(Error::OutOfDomain { .. })));
}

#[test]
fn oracle_examples() {
    let m = minkowski();
    let frame = ConstantFrame::<4>::coordinate();
    let a = Vector4::zeros();
    let v = causal_oracle(&*m, &frame, &a, &Vector4::new(1.0, 0.5, 0.0, 0.0), None).unwrap();
    assert_eq!(v.relation, Relation::Future);
    assert_eq!(v.method, Method::ExpInversion);
    let v = causal_oracle(&*m, &frame, &a, &Vector4::new(0.5, 1.0, 0.0, 0.0), None).unwrap();
    assert_eq!(v.relation, Relation::Spacelike);
    let v = causal_oracle(&*m, &frame, &a, &Vector4::new(-0.5, 0.1, 0.2, 0.0), None).unwrap();
    assert_eq!(v.relation, Relation::Past);
    assert_eq!(causal_oracle(&*m, &frame, &a, &a, None).unwrap().relation, Relation::Band);
    let v = causal_oracle(&*m, &frame, &a, &Vector4::new(0.5, 0.3, 0.4, 0.0), None).unwrap();
    assert_eq!(v.relation, Relation::Band);
}

#[test]
fn oracle_matches_flat_cone_in_fermi_frame() {
    let m = minkowski();
    let frame = FermiFrame::build(m.clone(), &Vector4::zeros(), 1.5).unwrap();
    let mut r = rng(3);
    for _ in 0..200 {
        let a = random_point(&mut r, &Vector4::zeros(), 0.4);
        let b = random_point(&mut r, &Vector4::zeros(), 0.4);
        let d = b - a;
        let q = -d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + d[3] * d[3];
        let v = causal_oracle(&*m, &frame, &a, &b, None).unwrap();
        let expected = if q.abs() <= 1e-7 * d.norm_squared() {
            Relation::Band
        } else if q > 0.0 {
            Relation::Spacelike
        } else if d[0] > 0.0 {
            Relation::Future
        } else {
            Relation::Past
        };
        assert_eq!(v.relation, expected);
        assert!((v.cone_gap - (d[0].abs() - (q + d[0] * d[0]).sqrt()).abs()).abs() < 1e-9);
    }
}

#[test]
fn flat_lattice_edge_is_the_null_diagonal() {
    let lattice = build_null_lattice(minkowski(), CoordBox::cube(&Vector4::zeros(), 1.0), 0.05, 8)
        .unwrap()
        .anchored_at(&Vector4::zeros());
    let tau = coordinate_time(&*minkowski()).unwrap();
    let edges = lattice.edges_from(&[0; 4]).unwrap();
    assert_eq!(edges.len(), 16);
    let edge = edges
        .iter()
        .find(|e| e.orientation == Orientation::Future && (e.end - Vector4::new(0.05, 0.05, 0.0, 0.0)).norm() < 1e-12)
        .expect("future edge along the first axis");
    assert_eq!(edge.to, [1, 1, 0, 0]);
    assert!(edge.snap_error < 1e-12);
    assert!((tau.eval(&edge.end) - tau.eval(&Vector4::zeros()) - 0.05).abs() < 1e-12);
    for e in &edges {
        assert!(e.snap_error < 1e-12);
        assert!(e.null_defect < 1e-12);
    }
}

#[test]
fn flrw_edges_are_null() {
    let m = Arc::new(Flrw::new(ScaleFactor::Power(1.0), CoordBox::new([0.2, -2.0, -2.0, -2.0], [3.0, 2.0, 2.0, 2.0])).unwrap());
    let region = CoordBox::new([0.8, -0.2, -0.2, -0.2], [1.2, 0.2, 0.2, 0.2]);
    let lattice = build_null_lattice(m.clone(), region, 0.02, 14).unwrap().anchored_at(&Vector4::new(1.0, 0.0, 0.0, 0.0));
    let mut count = 0;
    for key in [[0, 0, 0, 0], [3, -2, 1, 0], [-4, 2, 2, -3], [7, 1, -1, 5]] {
        let x = lattice.point(&key);
        for e in lattice.edges_from(&key).unwrap() {
            count += 1;
            assert!(e.null_defect < 1e-8, "defect {}", e.null_defect);
            // unnormalized check at the start of the edge
            let d = e.end - x;
            let g = m.g(&x).unwrap();
            assert!(inner(&g, &d, &d).abs() < 0.1 * d.norm_squared());
            assert!((e.snap_error - (e.end - lattice.point(&e.to)).norm()).abs() < 1e-15);
            assert!(e.snap_error <= lattice.spacing() + 1e-12);
        }
    }
    assert!(count > 80);
}

#[test]
fn node_count_is_product_of_axis_counts() {
    let lattice = build_null_lattice(minkowski(), CoordBox::new([0.0, 0.0, 0.0, 0.0], [0.5, 0.3, 0.2, 0.1]), 0.05, 6).unwrap();
    let counts = lattice.per_axis_counts();
    assert_eq!(counts, [11, 7, 5, 3]);
    assert_eq!(lattice.node_count(), counts.iter().product::<usize>());
}

#[test]
fn lattice_rejects_bad_input() {
    let m = minkowski();
    assert!(matches!(
        build_null_lattice(m.clone(), CoordBox::cube(&Vector4::zeros(), 3.0), 0.05, 6),
        Err(Error::Precondition(_))
    ));
    assert!(build_null_lattice(m.clone(), CoordBox::cube(&Vector4::zeros(), 1.0), 0.0, 6).is_err());
    assert!(build_null_lattice(m, CoordBox::cube(&Vector4::zeros(), 1.0), 0.05, 5).is_err());
}

#[test]
fn flat_estimates_match_closed_form() {
    let lattice = flat_lattice(0.025, 6);
    let tau = coordinate_time(&*minkowski()).unwrap();
    let p = Vector4::zeros();

    let causal = estimate_null_distance(&lattice, &tau, &p, &Vector4::new(1.0, 0.5, 0.0, 0.0), 2).unwrap();
    assert_eq!(causal.lower, 1.0);
    assert!((causal.upper - 1.0).abs() <= 0.02);
    let spacelike = estimate_null_distance(&lattice, &tau, &p, &Vector4::new(0.0, 1.0, 0.0, 0.0), 2).unwrap();
    assert!((spacelike.upper - 1.0).abs() <= 0.05);
    assert_eq!(spacelike.lower, 0.0);
    for e in [&causal, &spacelike] {
        assert_eq!(e.refinement_history.len(), 3);
        assert!((e.refinement_history[2].0 - 0.025 / 4.0).abs() < 1e-15);
        for w in e.refinement_history.windows(2) {
            assert!(w[1].1 <= w[0].1 + w[1].0 / 4.0);
        }
        assert_eq!(e.witness.breakpoints()[0], p);
        assert_eq!(null_length(&e.witness, &tau).unwrap(), e.upper);
    }

    let same = estimate_null_distance(&lattice, &tau, &p, &p, 2).unwrap();
    assert_eq!((same.lower, same.upper), (0.0, 0.0));
}

#[test]
fn flat_witness_is_piecewise_null() {
    let lattice = flat_lattice(0.025, 6);
    let tau = coordinate_time(&*minkowski()).unwrap();
    let q = Vector4::new(0.3, 0.5, 0.4, 0.3);
    let e = estimate_null_distance(&lattice, &tau, &Vector4::zeros(), &q, 1).unwrap();
    assert!((e.upper - flat_distance(&Vector4::zeros(), &q)).abs() < 0.02);
    let b = e.witness.breakpoints();
    assert!((b[b.len() - 1] - q).norm() < 1e-12);
    for (w, o) in b.windows(2).zip(e.witness.orientations()) {
        let d = w[1] - w[0];
        let spatial = (d[1] * d[1] + d[2] * d[2] + d[3] * d[3]).sqrt();
        assert!(d[0] * o.sign() >= -1e-12);
        assert!(spatial <= d[0].abs() + 1e-9);
    }
}

#[test]
fn random_flat_pairs_bracket_and_match() {
    let lattice = flat_lattice(0.025, 6);
    let tau = coordinate_time(&*minkowski()).unwrap();
    let mut r = rng(7);
    let center = Vector4::new(0.5, 0.5, 0.5, 0.5);
    for _ in 0..20 {
        let p = random_point(&mut r, &center, 0.3);
        let q = random_point(&mut r, &center, 0.3);
        let e = estimate_null_distance(&lattice, &tau, &p, &q, 1).unwrap();
        assert!(e.lower <= e.upper + 1e-12);
        assert!(e.lower >= (tau.eval(&q) - tau.eval(&p)).abs() - 1e-15);
        let exact = flat_distance(&p, &q);
        assert!((e.upper - exact).abs() <= 0.05 * exact + 1e-12, "{} vs {exact}", e.upper);
    }
}

#[test]
fn symmetry_and_triangle_inequality() {
    let lattice = flat_lattice(0.025, 6);
    let tau = coordinate_time(&*minkowski()).unwrap();
    let mut r = rng(11);
    let center = Vector4::new(0.5, 0.5, 0.5, 0.5);
    let d = |a: &Vector4<f64>, b: &Vector4<f64>| estimate_null_distance(&lattice, &tau, a, b, 0).unwrap().upper;
    let snap = lattice.spacing() / 4.0;
    for _ in 0..50 {
        let (a, b, c) = (random_point(&mut r, &center, 0.25), random_point(&mut r, &center, 0.25), random_point(&mut r, &center, 0.25));
        let (ab, ba) = (d(&a, &b), d(&b, &a));
        assert!((ab - ba).abs() <= 0.02 * ab.max(ba) + 1e-12, "{ab} vs {ba}");
        assert!(d(&a, &c) <= ab + d(&b, &c) + 3.0 * snap);
    }
}

#[test]
fn encoding_on_flat_pairs() {
    let lattice = flat_lattice(0.025, 6);
    let tau = coordinate_time(&*minkowski()).unwrap();
    let frame = ConstantFrame::<4>::coordinate();
    let mut r = rng(5);
    let center = Vector4::new(0.5, 0.5, 0.5, 0.5);
    let mut seen = [false; 2];
    for _ in 0..40 {
        let a = random_point(&mut r, &center, 0.2);
        let b = random_point(&mut r, &center, 0.2);
        let o = encoding_pair(&lattice, &frame, &tau, &a, &b, 1).unwrap();
        assert!(!o.off_diagonal(), "{o:?}");
        assert!(o.tolerance >= 3.0 * lattice.spacing() / 2.0);
        if !o.band {
            seen[o.oracle_future() as usize] = true;
        }
    }
    assert_eq!(seen, [true, true]);
}

#[test]
fn anti_lipschitz_flat_constant() {
    let m = minkowski();
    let frame = FermiFrame::build(m.clone(), &Vector4::zeros(), 1.5).unwrap();
    let gr = RiemannianizedMetric::new(frame);
    let tau = coordinate_time(&*m).unwrap();
    let region = CoordBox::cube(&Vector4::zeros(), 0.5);
    let report = anti_lipschitz_constant(&*m, &gr, &tau, &region, 400, 42).unwrap();
    let c = report.get("c_hat").unwrap();
    assert!(c >= 1.0 && c <= 2f64.sqrt() * 1.05, "c_hat {c}");
    assert!(report.get("causal_pairs").unwrap() > 50.0);
    let k = report.get("k_prime_hat").unwrap();
    assert!(k > 0.9 && k <= 1.0 + 1e-9, "k_prime_hat {k}");
    assert!(report.anomalies.is_empty());
}

#[test]
fn anti_lipschitz_flags_cubed_time() {
    let m = minkowski();
    let frame = FermiFrame::build(m.clone(), &Vector4::zeros(), 1.5).unwrap();
    let gr = RiemannianizedMetric::new(frame);
    let tau = TimeFunction::<4>::custom(|p| p[0].powi(3), None);
    let c_at = |half: f64, samples: usize| {
        let region = CoordBox::cube(&Vector4::zeros(), half);
        anti_lipschitz_constant(&*m, &gr, &tau, &region, samples, 42).unwrap().get("c_hat").unwrap()
    };
    let coarse = c_at(0.5, 200);
    let fine = c_at(0.05, 200);
    assert!(coarse > 2.0);
    assert!(fine > 20.0 * coarse, "{coarse} -> {fine}");
}

#[test]
fn anti_lipschitz_excludes_coincident_pairs() {
    let m = minkowski();
    let frame = FermiFrame::build(m.clone(), &Vector4::zeros(), 1.5).unwrap();
    let gr = RiemannianizedMetric::new(frame);
    let tau = coordinate_time(&*m).unwrap();
    let region = CoordBox::new([0.1, 0.0, 0.0, 0.0], [0.1, 0.0, 0.0, 0.0]);
    let report = anti_lipschitz_constant(&*m, &gr, &tau, &region, 10, 1).unwrap();
    assert_eq!(report.get("excluded_pairs").unwrap(), 10.0);
    assert_eq!(report.get("causal_pairs").unwrap(), 0.0);
}
