use nalgebra::{Matrix4, Vector4};
use rand::Rng;
use temple_core::geodesic::integrate_geodesic;
use temple_core::linalg::{signature, symmetric_eigenvalues};
use temple_core::metric::{
    Bump, CoordBox, Flrw, Metric, Minkowski, PerturbedMinkowski, ScaleFactor,
};
use temple_core::sampling::{rng, uniform_in_box};
use temple_core::time::{coordinate_time, cosmological_time, CurveBudget, TimeFunction};
use temple_core::Error;

fn cube() -> CoordBox<4> {
    CoordBox::cube(&Vector4::zeros(), 2.0)
}

fn milne() -> Flrw<4> {
    Flrw::new(ScaleFactor::Power(1.0), CoordBox::new([0.001, -2.0, -2.0, -2.0], [3.5, 2.0, 2.0, 2.0])).unwrap()
}

fn perturbed(epsilon: f64) -> PerturbedMinkowski<4> {
    PerturbedMinkowski::new(epsilon, Bump { center: Vector4::zeros(), support: 1.5 }, cube()).unwrap()
}

fn catalog() -> Vec<Box<dyn Metric<4>>> {
    vec![
        Box::new(Minkowski::new(cube()).unwrap()),
        Box::new(milne()),
        Box::new(Flrw::new(ScaleFactor::Exp(0.5), cube()).unwrap()),
        Box::new(perturbed(0.05)),
    ]
}

#[test]
fn minkowski_is_flat() {
    let m = Minkowski::new(CoordBox::cube(&Vector4::zeros(), 6.0)).unwrap();
    let p = Vector4::new(0.3, -1.2, 5.0, 0.0);
    assert_eq!(m.g(&p).unwrap(), Matrix4::from_diagonal(&Vector4::new(-1.0, 1.0, 1.0, 1.0)));
    assert!(m.christoffel(&p).unwrap().iter().all(|c| c.iter().all(|x| *x == 0.0)));
    assert!(m.riemann(&p).unwrap().iter().flatten().all(|c| c.iter().all(|x| *x == 0.0)));
}

#[test]
fn domain_is_enforced() {
    let m = Minkowski::new(cube()).unwrap();
    assert!(matches!(m.g(&Vector4::new(2.5, 0.0, 0.0, 0.0)), Err(Error::OutOfDomain { .. })));
}

#[test]
fn flrw_examples() {
    let m = milne();
    let g = m.g(&Vector4::new(2.0, 0.0, 0.0, 0.0)).unwrap();
    assert_eq!(g, Matrix4::from_diagonal(&Vector4::new(-1.0, 4.0, 4.0, 4.0)));
    let static_flrw = Flrw::new(ScaleFactor::Power(0.0), cube()).unwrap();
    let gamma = static_flrw.christoffel(&Vector4::new(0.5, 0.1, 0.0, 0.0)).unwrap();
    assert!(gamma.iter().all(|c| c.iter().all(|x| *x == 0.0)));
    let bad = Flrw::<4>::new(ScaleFactor::Power(1.0), cube());
    assert!(matches!(bad, Err(Error::InvalidMetric(_))));
}

#[test]
fn flrw_curvature_matches_warped_product_formulas() {
    // flat slicing: R^0_{i0j} = a a'' δ_ij, R^i_{0j0} = −(a''/a) δ_ij,
    // R^i_{jkl} = a'² (δ_ik δ_jl − δ_il δ_jk); in particular a(t) = t
    // in these coordinates is not the Milne wedge and keeps spatial curvature
    let m = Flrw::new(ScaleFactor::Power(0.5), CoordBox::new([0.1, -2.0, -2.0, -2.0], [3.0, 2.0, 2.0, 2.0])).unwrap();
    let mut r = rng(3);
    for _ in 0..50 {
        let p = uniform_in_box(&mut r, &CoordBox::new([0.5, -1.5, -1.5, -1.5], [2.5, 1.5, 1.5, 1.5]));
        let t = p[0];
        let (a, da, dda) = (t.sqrt(), 0.5 / t.sqrt(), -0.25 * t.powf(-1.5));
        let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        let riem = m.riemann(&p).unwrap();
        for i in 1..4 {
            for j in 1..4 {
                assert!((riem[0][i][(0, j)] - a * dda * delta(i, j)).abs() < 1e-6);
                assert!((riem[i][0][(j, 0)] + dda / a * delta(i, j)).abs() < 1e-6);
                for k in 1..4 {
                    for l in 1..4 {
                        let expect = da * da * (delta(i, k) * delta(j, l) - delta(i, l) * delta(j, k));
                        assert!((riem[i][j][(k, l)] - expect).abs() < 1e-6);
                    }
                }
            }
        }
    }
}

#[test]
fn zero_perturbation_is_minkowski() {
    let pm = perturbed(0.0);
    let m = Minkowski::new(cube()).unwrap();
    let mut r = rng(4);
    for _ in 0..100 {
        let p = uniform_in_box(&mut r, &cube());
        assert_eq!(pm.g(&p).unwrap(), m.g(&p).unwrap());
        assert_eq!(pm.christoffel(&p).unwrap(), m.christoffel(&p).unwrap());
    }
}

#[test]
fn perturbed_signature_and_support() {
    let m = perturbed(0.05);
    let mut r = rng(5);
    for _ in 0..1000 {
        let p = uniform_in_box(&mut r, &cube());
        assert_eq!(signature(&m.g(&p).unwrap(), 1e-12), (1, 3));
    }
    let outside = Vector4::new(1.2, 1.2, 0.0, 0.0);
    assert_eq!(m.g(&outside).unwrap(), Matrix4::from_diagonal(&Vector4::new(-1.0, 1.0, 1.0, 1.0)));
    let broken = PerturbedMinkowski::new(f64::NAN, Bump { center: Vector4::zeros(), support: 1.5 }, cube());
    assert!(matches!(broken, Err(Error::InvalidMetric(_))));
}

#[test]
fn evaluators_have_tensor_symmetries() {
    let mut r = rng(6);
    for m in catalog() {
        let domain = m.domain().clone();
        let inner = CoordBox::new(
            core::array::from_fn(|a| domain.min[a] + 0.1 * domain.width(a)),
            core::array::from_fn(|a| domain.max[a] - 0.1 * domain.width(a)),
        );
        for _ in 0..100 {
            let p = uniform_in_box(&mut r, &inner);
            let g = m.g(&p).unwrap();
            assert!((g - g.transpose()).amax() < 1e-12);
            let ev = symmetric_eigenvalues(&g);
            assert!(ev[0] < 0.0 && ev[1] > 0.0);
            let gamma = m.christoffel(&p).unwrap();
            for c in gamma.iter() {
                assert!((c - c.transpose()).amax() < 1e-10);
            }
            let riem = m.riemann(&p).unwrap();
            for a in 0..4 {
                for b in 0..4 {
                    assert!((riem[a][b] + riem[a][b].transpose()).amax() < 1e-8);
                    for c in 0..4 {
                        for d in 0..4 {
                            let cyclic = riem[a][b][(c, d)] + riem[a][c][(d, b)] + riem[a][d][(b, c)];
                            assert!(cyclic.abs() < 1e-8, "{} {cyclic}", m.catalog_id());
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn christoffels_match_finite_difference_oracle() {
    let mut r = rng(7);
    for m in catalog() {
        let domain = m.domain().clone();
        let inner = CoordBox::new(
            core::array::from_fn(|a| domain.min[a] + 0.01 * domain.width(a)),
            core::array::from_fn(|a| domain.max[a] - 0.01 * domain.width(a)),
        );
        for _ in 0..1000 {
            let p = uniform_in_box(&mut r, &inner);
            // plain central differences of g with a different step than the
            // evaluators use
            let h = 1e-5;
            let ginv = m.g(&p).unwrap().try_inverse().unwrap();
            let dg: [Matrix4<f64>; 4] = core::array::from_fn(|k| {
                let mut e = Vector4::zeros();
                e[k] = h;
                (m.g(&(p + e)).unwrap() - m.g(&(p - e)).unwrap()) / (2.0 * h)
            });
            let got = m.christoffel(&p).unwrap();
            for c in 0..4 {
                for a in 0..4 {
                    for b in 0..4 {
                        let mut oracle = 0.0;
                        for d in 0..4 {
                            oracle += 0.5 * ginv[(c, d)] * (dg[a][(d, b)] + dg[b][(d, a)] - dg[d][(a, b)]);
                        }
                        assert!((got[c][(a, b)] - oracle).abs() < 1e-5, "{}", m.catalog_id());
                    }
                }
            }
        }
    }
}

#[test]
fn riemann_matches_nested_difference_oracle() {
    let mut r = rng(8);
    for m in catalog() {
        let domain = m.domain().clone();
        let inner = CoordBox::new(
            core::array::from_fn(|a| domain.min[a] + 0.05 * domain.width(a)),
            core::array::from_fn(|a| domain.max[a] - 0.05 * domain.width(a)),
        );
        for _ in 0..100 {
            let p = uniform_in_box(&mut r, &inner);
            let h = 1e-4;
            let gamma = m.christoffel(&p).unwrap();
            let dgamma: [[Matrix4<f64>; 4]; 4] = core::array::from_fn(|k| {
                let mut e = Vector4::zeros();
                e[k] = h;
                let plus = m.christoffel(&(p + e)).unwrap();
                let minus = m.christoffel(&(p - e)).unwrap();
                core::array::from_fn(|c| (plus[c] - minus[c]) / (2.0 * h))
            });
            let riem = m.riemann(&p).unwrap();
            for a in 0..4 {
                for b in 0..4 {
                    for c in 0..4 {
                        for d in 0..4 {
                            let mut oracle = dgamma[c][a][(d, b)] - dgamma[d][a][(c, b)];
                            for e in 0..4 {
                                oracle += gamma[a][(c, e)] * gamma[e][(d, b)] - gamma[a][(d, e)] * gamma[e][(c, b)];
                            }
                            assert!((riem[a][b][(c, d)] - oracle).abs() < 1e-4, "{}", m.catalog_id());
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn coordinate_time_reads_first_coordinate() {
    let m = Minkowski::new(cube()).unwrap();
    let tau = coordinate_time(&m).unwrap();
    assert_eq!(tau.eval(&Vector4::new(1.5, 0.3, 0.0, 0.0)), 1.5);
    let f = milne();
    assert_eq!(coordinate_time(&f).unwrap().eval(&Vector4::new(2.0, 0.0, 1.0, 0.0)), 2.0);
}

#[test]
fn coordinate_time_rejects_spacelike_first_axis() {
    // swap the roles of t and x in a perturbed-free Minkowski via a metric
    // whose first coordinate is spacelike
    struct Swapped(CoordBox<4>);
    impl Metric<4> for Swapped {
        fn catalog_id(&self) -> &str {
            "swapped"
        }
        fn domain(&self) -> &CoordBox<4> {
            &self.0
        }
        fn metric_raw(&self, _p: &Vector4<f64>) -> Matrix4<f64> {
            Matrix4::from_diagonal(&Vector4::new(1.0, -1.0, 1.0, 1.0))
        }
    }
    assert!(matches!(coordinate_time(&Swapped(cube())), Err(Error::InvalidTimeFunction(_))));
}

fn assert_increasing_along_causal_curves(m: &dyn Metric<4>, tau: &TimeFunction<4>, base: CoordBox<4>, seed: u64) {
    let mut r = rng(seed);
    for _ in 0..100 {
        let p = uniform_in_box(&mut r, &base);
        let g = m.g(&p).unwrap();
        let s = Vector4::new(0.0, r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        // future causal: choose v0 above the null cone root
        let a = g[(0, 0)];
        let b = 2.0 * (g.row(0) * s)[0];
        let c = (s.transpose() * g * s)[0];
        let root = (-b - (b * b - 4.0 * a * c).sqrt()) / (2.0 * a);
        let v = Vector4::new(root * r.random_range(1.0..1.5), s[1], s[2], s[3]);
        let traj = integrate_geodesic(m, &p, &(v * 0.3), 1.0, 1e-10).unwrap();
        let values: Vec<f64> = (0..traj.len()).map(|i| tau.eval(&traj.point(i))).collect();
        assert!(values.windows(2).all(|w| w[1] > w[0]));
    }
}

#[test]
fn time_functions_increase_along_future_causal_curves() {
    let inner = CoordBox::cube(&Vector4::zeros(), 1.0);
    let pm = perturbed(0.05);
    assert_increasing_along_causal_curves(&pm, &coordinate_time(&pm).unwrap(), inner.clone(), 9);
    let f = milne();
    let base = CoordBox::new([1.0, -1.0, -1.0, -1.0], [2.5, 1.0, 1.0, 1.0]);
    assert_increasing_along_causal_curves(&f, &coordinate_time(&f).unwrap(), base, 10);
}

#[test]
fn milne_cosmological_time_is_proper_age() {
    let m = milne();
    for t0 in [1.0, 2.0, 3.0] {
        let p = Vector4::new(t0, 0.3, -0.2, 0.1);
        let est = cosmological_time(&m, &p, &CurveBudget::default()).unwrap();
        assert!((est.value - t0).abs() < 0.01 * t0, "{} vs {t0}", est.value);
        assert!(est.value <= t0 + 1e-9);
    }
}

#[test]
fn minkowski_cosmological_time_from_slice() {
    let m = Minkowski::new(CoordBox::new([0.0, -2.0, -2.0, -2.0], [2.0, 2.0, 2.0, 2.0]))
        .unwrap()
        .with_past_boundary();
    let est = cosmological_time(&m, &Vector4::new(1.0, 0.0, 0.0, 0.0), &CurveBudget::default()).unwrap();
    assert!((est.value - 1.0).abs() < 0.01);
    let no_past = Minkowski::new(cube()).unwrap();
    assert!(matches!(
        cosmological_time(&no_past, &Vector4::zeros(), &CurveBudget::default()),
        Err(Error::UnsupportedMetric(_))
    ));
}

#[test]
fn singleton_budget_is_comoving_integral() {
    let m = milne();
    let p = Vector4::new(2.0, 0.5, 0.0, 0.0);
    let est = cosmological_time(&m, &p, &CurveBudget::singleton()).unwrap();
    assert!((est.value - (2.0 - 0.001)).abs() < 1e-12);
}

#[test]
fn cosmological_time_is_monotone_under_refinement() {
    let m = Flrw::new(ScaleFactor::Power(0.5), CoordBox::new([0.001, -2.0, -2.0, -2.0], [3.0, 2.0, 2.0, 2.0])).unwrap();
    let p = Vector4::new(2.0, 0.4, 0.0, 0.0);
    let mut last = 0.0;
    for levels in 0..4 {
        let budget = CurveBudget { levels, ..CurveBudget::default() };
        let est = cosmological_time(&m, &p, &budget).unwrap();
        assert!(est.value >= last - 1e-12);
        assert!(est.history.windows(2).all(|w| w[1] >= w[0]));
        last = est.value;
    }
}

#[test]
fn bump_gradient_matches_central_difference() {
    let bump = Bump { center: Vector4::new(0.1, 0.0, -0.2, 0.0), support: 1.5 };
    let mut r = rng(9);
    let h = 1e-6;
    for _ in 0..200 {
        let p = uniform_in_box(&mut r, &cube());
        let g = bump.gradient(&p);
        for a in 0..4 {
            let mut e = Vector4::zeros();
            e[a] = h;
            let fd = (bump.eval(&(p + e)) - bump.eval(&(p - e))) / (2.0 * h);
            assert!((g[a] - fd).abs() < 1e-7, "{} vs {fd}", g[a]);
        }
    }
    assert_eq!(bump.gradient(&Vector4::new(1.9, 1.9, 0.0, 0.0)), Vector4::zeros());
}
