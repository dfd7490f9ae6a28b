//! Dense complex linear algebra helpers on top of nalgebra's SVD and LU.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Default relative rank tolerance.
pub const RANK_TOL: f64 = 1e-8;

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

pub fn real_part(m: &CMatrix) -> DMatrix<f64> {
    m.map(|v| v.re)
}

pub fn imag_part(m: &CMatrix) -> DMatrix<f64> {
    m.map(|v| v.im)
}

/// Real 2m × 2n embedding [[Re, −Im], [Im, Re]] of a complex matrix.
///
/// The complex SVD in nalgebra loses accuracy on rank-deficient input, so
/// every complex decomposition here goes through this isometric embedding
/// and the real SVD instead. Each complex singular value appears twice.
pub fn real_embedding(m: &CMatrix) -> DMatrix<f64> {
    let (r, c) = m.shape();
    DMatrix::from_fn(2 * r, 2 * c, |i, j| {
        let v = m[(i % r, j % c)];
        match (i < r, j < c) {
            (true, true) | (false, false) => v.re,
            (true, false) => -v.im,
            (false, true) => v.im,
        }
    })
}

/// Real SVD whose factors reproduce `m`.
///
/// nalgebra's bidiagonal iteration occasionally returns factors that are
/// orthonormal yet off by 1e-2 on some rank-deficient inputs, so the result
/// is checked and recomputed on the QR triangle or the transpose if needed.
fn checked_svd(m: &DMatrix<f64>) -> nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn> {
    let tol = 1e-12 * m.norm().max(1.0);
    let ok = |svd: &nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>, target: &DMatrix<f64>| {
        svd.clone().recompose().is_ok_and(|r| (r - target).norm() <= tol)
    };
    let direct = m.clone().svd(true, true);
    if ok(&direct, m) {
        return direct;
    }
    if m.nrows() >= m.ncols() {
        let qr = m.clone().qr();
        let (q, r) = (qr.q(), qr.r());
        let mut inner = r.clone().svd(true, true);
        if ok(&inner, &r) {
            inner.u = inner.u.map(|u| q * u);
            return inner;
        }
    }
    let t = m.transpose().svd(true, true);
    if ok(&t, &m.transpose()) {
        return nalgebra::SVD {
            u: t.v_t.map(|vt| vt.transpose()),
            v_t: t.u.map(|u| u.transpose()),
            singular_values: t.singular_values,
        };
    }
    direct
}

fn sorted_svd(m: &DMatrix<f64>, u: bool, v: bool) -> (Vec<f64>, Option<DMatrix<f64>>, Option<DMatrix<f64>>) {
    let mut svd = checked_svd(m);
    if !u {
        svd.u = None;
    }
    if !v {
        svd.v_t = None;
    }
    let s = svd.singular_values.as_slice();
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|a, b| s[*b].total_cmp(&s[*a]));
    let values = order.iter().map(|&i| s[i]).collect();
    let u = svd
        .u
        .map(|u| DMatrix::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]));
    let v = svd
        .v_t
        .map(|vt| DMatrix::from_fn(vt.ncols(), order.len(), |i, j| vt[(order[j], i)]));
    (values, u, v)
}

/// Singular values sorted in decreasing order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let (s, _, _) = sorted_svd(&real_embedding(m), false, false);
    s.into_iter().step_by(2).collect()
}

fn threshold(s: &[f64], tol: f64) -> f64 {
    tol * s.first().copied().unwrap_or(0.0).max(1.0)
}

/// Number of singular values above `tol` times the largest one (floored at 1).
pub fn rank(m: &CMatrix, tol: f64) -> Result<usize> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::InvalidArgument("rank of an empty matrix".into()));
    }
    if tol <= 0.0 {
        return Err(Error::InvalidArgument("rank tolerance must be positive".into()));
    }
    let s = singular_values(m);
    let t = threshold(&s, tol);
    Ok(s.iter().filter(|v| **v > t).count())
}

pub fn real_rank(m: &DMatrix<f64>, tol: f64) -> Result<usize> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::InvalidArgument("rank of an empty matrix".into()));
    }
    let (s, _, _) = sorted_svd(m, false, false);
    let t = threshold(&s, tol);
    Ok(s.iter().filter(|v| **v > t).count())
}

/// Turn a real basis (2d × 2k, closed under multiplication by i) of an
/// embedded complex subspace into k orthonormal complex vectors, by pivoted
/// Gram–Schmidt over the candidates u + iv.
fn complex_from_embedded(real: &DMatrix<f64>, k: usize) -> CMatrix {
    let d = real.nrows() / 2;
    let mut candidates: Vec<CVector> = (0..real.ncols())
        .map(|j| CVector::from_fn(d, |i, _| Complex64::new(real[(i, j)], real[(d + i, j)])))
        .collect();
    let mut basis: Vec<CVector> = Vec::with_capacity(k);
    for _ in 0..k {
        let (best, _) = candidates
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.norm()))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        let v = candidates.swap_remove(best);
        let v = &v / Complex64::new(v.norm(), 0.0);
        for c in candidates.iter_mut() {
            let proj = v.dotc(c);
            *c -= &v * proj;
        }
        basis.push(v);
    }
    if basis.is_empty() {
        CMatrix::zeros(d, 0)
    } else {
        CMatrix::from_columns(&basis)
    }
}

/// Orthonormal basis (as columns) of the column space.
pub fn column_basis(m: &CMatrix, tol: f64) -> CMatrix {
    let rows = m.nrows();
    if m.ncols() == 0 || rows == 0 {
        return CMatrix::zeros(rows, 0);
    }
    let (s, u, _) = sorted_svd(&real_embedding(m), true, false);
    let u = u.expect("u requested");
    let t = threshold(&s, tol);
    let count = s.iter().filter(|v| **v > t).count();
    let k = count / 2;
    complex_from_embedded(&u.columns(0, 2 * k).into_owned(), k)
}

/// Orthonormal real basis (as columns) of the column space of a real matrix.
pub fn real_column_basis(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let rows = m.nrows();
    if m.ncols() == 0 || rows == 0 {
        return DMatrix::zeros(rows, 0);
    }
    let (s, u, _) = sorted_svd(m, true, false);
    let u = u.expect("u requested");
    let t = threshold(&s, tol);
    let k = s.iter().filter(|v| **v > t).count();
    u.columns(0, k).into_owned()
}

/// Orthonormal basis (as columns) of the null space.
pub fn null_space(m: &CMatrix, tol: f64) -> CMatrix {
    let cols = m.ncols();
    if cols == 0 {
        return CMatrix::zeros(0, 0);
    }
    // pad with zero rows so the thin SVD yields a full right factor
    let rows = m.nrows().max(cols);
    let mut padded = CMatrix::zeros(rows, cols);
    padded.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
    let (s, _, v) = sorted_svd(&real_embedding(&padded), false, true);
    let v = v.expect("v requested");
    let t = threshold(&s, tol);
    let rank = s.iter().filter(|x| **x > t).count();
    let null = s.len() - rank;
    complex_from_embedded(&v.columns(rank, null).into_owned(), null / 2)
}

/// Orthonormal basis of span(a) ∩ span(b), from the null space of [a, -b].
pub fn intersection(a: &CMatrix, b: &CMatrix, tol: f64) -> CMatrix {
    let ba = column_basis(a, tol);
    let bb = column_basis(b, tol);
    let rows = a.nrows();
    if ba.ncols() == 0 || bb.ncols() == 0 {
        return CMatrix::zeros(rows, 0);
    }
    let stacked = hstack(&ba, &(-&bb));
    let ns = null_space(&stacked, tol);
    if ns.ncols() == 0 {
        return CMatrix::zeros(rows, 0);
    }
    let coeffs = ns.rows(0, ba.ncols()).into_owned();
    column_basis(&(ba * coeffs), tol)
}

pub fn hstack(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = CMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    out.view_mut((0, a.ncols()), (b.nrows(), b.ncols())).copy_from(b);
    out
}

pub fn conj(m: &CMatrix) -> CMatrix {
    m.map(|v| v.conj())
}

/// Result of a minimum-norm least-squares solve.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub solution: CVector,
    pub residual: f64,
    pub rank_deficient: bool,
}

/// Minimum-norm solution of `a x ≈ b` via the pseudo-inverse.
pub fn least_squares(a: &CMatrix, b: &CVector, tol: f64) -> LeastSquares {
    let cols = a.ncols();
    if cols == 0 || a.nrows() == 0 {
        return LeastSquares {
            solution: CVector::zeros(cols),
            residual: b.norm(),
            rank_deficient: false,
        };
    }
    let e = real_embedding(a);
    let rhs = DVector::from_fn(2 * b.len(), |i, _| {
        if i < b.len() {
            b[i].re
        } else {
            b[i - b.len()].im
        }
    });
    let svd = checked_svd(&e);
    let s = svd.singular_values.as_slice();
    let smax = s.iter().copied().fold(0.0, f64::max);
    let t = tol * smax.max(1.0);
    let effective = s.iter().filter(|v| **v > t).count() / 2;
    let x = svd
        .solve(&rhs, t)
        .unwrap_or_else(|_| DVector::zeros(2 * cols));
    let solution = CVector::from_fn(cols, |i, _| Complex64::new(x[i], x[cols + i]));
    let residual = (a * &solution - b).norm();
    LeastSquares {
        solution,
        residual,
        rank_deficient: effective < cols,
    }
}

pub fn det(m: &CMatrix) -> Complex64 {
    if m.nrows() == 0 {
        return Complex64::new(1.0, 0.0);
    }
    m.clone().determinant()
}

pub fn real_det(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    m.clone().determinant()
}

/// Coordinates of the columns of `v` against an orthonormal basis `q`.
pub fn coordinates(q: &CMatrix, v: &CMatrix) -> CMatrix {
    q.adjoint() * v
}

/// All increasing index lists of length `k` drawn from `0..n`, in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

pub fn select_columns<T: nalgebra::Scalar + Copy>(m: &DMatrix<T>, idx: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(m.nrows(), idx.len(), |i, j| m[(i, idx[j])])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn combinations_are_lexicographic() {
        assert_eq!(
            combinations(4, 2),
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
        assert_eq!(combinations(3, 0), vec![Vec::<usize>::new()]);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
        assert!(combinations(2, 3).is_empty());
    }

    #[test]
    fn rank_of_identity_and_duplicates() {
        let id = CMatrix::identity(3, 3);
        assert_eq!(rank(&id, RANK_TOL).unwrap(), 3);
        let dup = CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(1., 0.), c(2., 1.), c(2., 1.)]);
        assert_eq!(rank(&dup, RANK_TOL).unwrap(), 1);
        assert!(rank(&CMatrix::zeros(0, 0), RANK_TOL).is_err());
    }

    #[test]
    fn null_space_is_annihilated() {
        let m = CMatrix::from_row_slice(2, 3, &[c(1., 0.), c(0., 1.), c(2., 0.), c(0., 0.), c(1., 1.), c(0., -1.)]);
        let ns = null_space(&m, RANK_TOL);
        assert_eq!(ns.ncols(), 1);
        assert!((&m * &ns).norm() < 1e-12);
    }

    #[test]
    fn intersection_of_planes_is_a_line() {
        let e = |i: usize| {
            let mut v = CVector::zeros(3);
            v[i] = c(1., 0.);
            v
        };
        let a = CMatrix::from_columns(&[e(0), e(1)]);
        let b = CMatrix::from_columns(&[e(1), e(2)]);
        let i = intersection(&a, &b, RANK_TOL);
        assert_eq!(i.ncols(), 1);
        assert!((i[(1, 0)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn least_squares_min_norm() {
        // redundant columns: min-norm solution splits evenly
        let a = CMatrix::from_row_slice(1, 2, &[c(1., 0.), c(1., 0.)]);
        let b = CVector::from_vec(vec![c(2., 0.)]);
        let ls = least_squares(&a, &b, RANK_TOL);
        assert!(ls.rank_deficient);
        assert!((ls.solution[0] - c(1., 0.)).norm() < 1e-12);
        assert!(ls.residual < 1e-12);
    }
}
