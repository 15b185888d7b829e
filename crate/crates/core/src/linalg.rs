//! Small fixed-dimension linear algebra shared by every module.

#[allow(unused_imports)]
use num_traits::Float;
use nalgebra::{DMatrix, SMatrix, SVector};

/// Coordinate values of a spacetime point.
pub type Point<const D: usize> = SVector<f64, D>;
/// Components of a tangent vector in the coordinate basis.
pub type Vector<const D: usize> = SVector<f64, D>;
pub type Matrix<const D: usize> = SMatrix<f64, D, D>;

/// `gamma[c][(a, b)]` holds the coordinate Christoffel symbol of the second kind.
pub type Christoffel<const D: usize> = [Matrix<D>; D];

/// `riem[a][b][(c, d)]` holds `R^a_{bcd}` with `R(∂_c, ∂_d)∂_b = R^a_{bcd} ∂_a`.
pub type Riemann<const D: usize> = [[Matrix<D>; D]; D];

pub fn zero_christoffel<const D: usize>() -> Christoffel<D> {
    [Matrix::<D>::zeros(); D]
}

pub fn zero_riemann<const D: usize>() -> Riemann<D> {
    [[Matrix::<D>::zeros(); D]; D]
}

/// Contracts `Γ^c_{ab} u^a w^b` for every upper index `c`.
pub fn contract<const D: usize>(gamma: &Christoffel<D>, u: &Vector<D>, w: &Vector<D>) -> Vector<D> {
    Vector::<D>::from_fn(|c, _| u.dot(&(gamma[c] * w)))
}

/// `R^a_{bcd} x^b y^c z^d`.
pub fn riemann_apply<const D: usize>(
    riem: &Riemann<D>,
    x: &Vector<D>,
    y: &Vector<D>,
    z: &Vector<D>,
) -> Vector<D> {
    Vector::<D>::from_fn(|a, _| {
        let mut acc = 0.0;
        for b in 0..D {
            if x[b] != 0.0 {
                acc += x[b] * y.dot(&(riem[a][b] * z));
            }
        }
        acc
    })
}

pub fn inner<const D: usize>(g: &Matrix<D>, u: &Vector<D>, w: &Vector<D>) -> f64 {
    u.dot(&(g * w))
}

fn to_dynamic<const D: usize>(m: &Matrix<D>) -> DMatrix<f64> {
    DMatrix::from_fn(D, D, |i, j| m[(i, j)])
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues<const D: usize>(m: &Matrix<D>) -> [f64; D] {
    let ev = to_dynamic(m).symmetric_eigenvalues();
    let mut out = [0.0; D];
    for (o, v) in out.iter_mut().zip(ev.iter()) {
        *o = *v;
    }
    out.sort_by(|a, b| a.total_cmp(b));
    out
}

pub fn determinant<const D: usize>(m: &Matrix<D>) -> f64 {
    to_dynamic(m).determinant()
}

/// Ratio of largest to smallest singular value; infinite for singular input.
pub fn condition_number<const D: usize>(m: &Matrix<D>) -> f64 {
    let sv = to_dynamic(m).singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn solve<const D: usize>(m: &Matrix<D>, b: &Vector<D>) -> Option<Vector<D>> {
    m.try_inverse().map(|inv| inv * b)
}

pub fn is_finite<const D: usize>(v: &Vector<D>) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Euclidean norm, spelled out so call sites read the same under `no_std`.
pub fn norm<const D: usize>(v: &Vector<D>) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Counts (negative, positive) eigenvalues of a symmetric matrix, treating
/// anything within `tol` of zero as degenerate (counted in neither).
pub fn signature<const D: usize>(m: &Matrix<D>, tol: f64) -> (usize, usize) {
    let ev = symmetric_eigenvalues(m);
    let neg = ev.iter().filter(|&&x| x < -tol).count();
    let pos = ev.iter().filter(|&&x| x > tol).count();
    (neg, pos)
}
