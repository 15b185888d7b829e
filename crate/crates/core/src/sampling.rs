//! Deterministic sample sets: tensor grids, Halton points and seeded
//! pseudo-random draws.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{Point, Vector};
use crate::metric::CoordBox;

const PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base as u64) as f64 * inv;
        index /= base as u64;
        inv /= b;
    }
    out
}

/// The `index`-th Halton point in `[0,1)^K` (skipping the origin).
pub fn halton<const K: usize>(index: usize) -> [f64; K] {
    core::array::from_fn(|k| radical_inverse(index as u64 + 1, PRIMES[k % PRIMES.len()]))
}

/// `per_axis^D` points of a closed tensor grid over the box.
pub fn grid_points<const D: usize>(domain: &CoordBox<D>, per_axis: usize) -> Vec<Point<D>> {
    let per_axis = per_axis.max(2);
    let total = per_axis.pow(D as u32);
    (0..total)
        .map(|mut idx| {
            let u: [f64; D] = core::array::from_fn(|_| {
                let k = idx % per_axis;
                idx /= per_axis;
                k as f64 / (per_axis - 1) as f64
            });
            domain.lerp(&u)
        })
        .collect()
}

pub fn uniform_in_box<const D: usize>(rng: &mut impl Rng, domain: &CoordBox<D>) -> Point<D> {
    let u: [f64; D] = core::array::from_fn(|_| rng.random::<f64>());
    domain.lerp(&u)
}

/// Uniform direction on the unit sphere `S^{K-1}`.
pub fn unit_vector<const K: usize>(rng: &mut impl Rng) -> Vector<K> {
    loop {
        let v = Vector::<K>::from_fn(|_, _| 2.0 * rng.random::<f64>() - 1.0);
        let n2 = v.norm_squared();
        if n2 > 1e-6 && n2 <= 1.0 {
            return v / n2.sqrt();
        }
    }
}

/// Uniform point in the Euclidean ball of the given radius.
pub fn in_ball<const K: usize>(rng: &mut impl Rng, radius: f64) -> Vector<K> {
    let dir = unit_vector::<K>(rng);
    let r = radius * rng.random::<f64>().powf(1.0 / K as f64);
    dir * r
}

/// Deterministic low-discrepancy sample of the ball `B^K(radius)`: Halton
/// points of the cube kept when inside the ball.
pub fn halton_ball<const K: usize>(count: usize, radius: f64) -> Vec<Vector<K>> {
    let mut out = Vec::with_capacity(count);
    let mut i = 0;
    while out.len() < count {
        let u: [f64; K] = halton(i);
        i += 1;
        let v = Vector::<K>::from_fn(|k, _| 2.0 * u[k] - 1.0);
        if v.norm_squared() <= 1.0 {
            out.push(v * radius);
        }
    }
    out
}

/// Deterministic low-discrepancy directions on `S^{K-1}`.
pub fn halton_sphere<const K: usize>(count: usize) -> Vec<Vector<K>> {
    let mut out = Vec::with_capacity(count);
    let mut i = 0;
    while out.len() < count {
        let u: [f64; K] = halton(i);
        i += 1;
        let v = Vector::<K>::from_fn(|k, _| 2.0 * u[k] - 1.0);
        let n2 = v.norm_squared();
        if n2 > 1e-4 && n2 <= 1.0 {
            out.push(v / n2.sqrt());
        }
    }
    out
}

/// Unit spatial directions (zero first component) in `D` dimensions: the
/// coordinate axes first, then low-discrepancy points of the sphere.
pub fn spatial_directions<const D: usize>(count: usize) -> Vec<Vector<D>> {
    let mut out = Vec::with_capacity(count);
    for i in 1..D {
        for s in [1.0, -1.0] {
            if out.len() < count {
                let mut v = Vector::<D>::zeros();
                v[i] = s;
                out.push(v);
            }
        }
    }
    let mut i = 1;
    while out.len() < count {
        let u: [f64; D] = halton(i);
        i += 1;
        let mut v = Vector::<D>::from_fn(|k, _| 2.0 * u[k] - 1.0);
        v[0] = 0.0;
        let n2 = v.norm_squared();
        if n2 > 1e-4 && n2 <= 1.0 {
            out.push(v / n2.sqrt());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
    }

    #[test]
    fn grid_has_expected_count() {
        let b = CoordBox::new([0.0; 3], [1.0; 3]);
        assert_eq!(grid_points(&b, 4).len(), 64);
    }

    #[test]
    fn ball_samples_inside() {
        for v in halton_ball::<4>(100, 0.3) {
            assert!(v.norm() <= 0.3 + 1e-15);
        }
        let mut r = rng(7);
        for _ in 0..100 {
            assert!((unit_vector::<3>(&mut r).norm() - 1.0).abs() < 1e-12);
        }
    }
}
