//! Wedge quotients, maximal basis selection and the real/complex
//! comparison of wedge quotients.
//!
//! A top-degree wedge in an N-dimensional space is represented by the
//! determinant of coordinates against a fixed basis; quotients of two wedges
//! do not depend on that choice.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::VectorFieldSystem;
use crate::linalg::{
    self, column_basis, combinations, intersection, least_squares, rank, real_column_basis,
    select_columns, to_complex, CMatrix, CVector, RANK_TOL,
};

/// The three equal expressions for a wedge quotient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuotientRoutes {
    /// det(W') / det(W).
    pub ratio_of_dets: Complex64,
    /// det B with B w_j = w'_j.
    pub linear_map: Complex64,
    /// det C with w'_j = Σ_k c_j^k w_k.
    pub coefficients: Complex64,
}

fn check_square(num: &CMatrix, den: &CMatrix) -> Result<()> {
    let n = den.nrows();
    if den.ncols() != n || num.nrows() != n || num.ncols() != n {
        return Err(Error::Dimension(format!(
            "wedge quotient needs two lists of {n} vectors in dimension {n}"
        )));
    }
    if n > 0 && rank(den, RANK_TOL)? < n {
        return Err(Error::Singular("denominator vectors are linearly dependent".into()));
    }
    Ok(())
}

/// w'_1 ∧ … ∧ w'_N / w_1 ∧ … ∧ w_N, computed as det C where w'_j = Σ c_j^k w_k.
/// Columns of `numerator` and `denominator` are the vectors.
pub fn wedge_quotient(numerator: &CMatrix, denominator: &CMatrix) -> Result<Complex64> {
    check_square(numerator, denominator)?;
    if numerator.nrows() == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let lu = denominator.clone().lu();
    let ct = lu
        .solve(numerator)
        .ok_or_else(|| Error::Singular("denominator is singular".into()))?;
    Ok(linalg::det(&ct))
}

/// All three routes, for cross-checking.
pub fn wedge_quotient_routes(numerator: &CMatrix, denominator: &CMatrix) -> Result<QuotientRoutes> {
    check_square(numerator, denominator)?;
    let coefficients = wedge_quotient(numerator, denominator)?;
    let ratio_of_dets = linalg::det(numerator) / linalg::det(denominator);
    let inverse = denominator
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("denominator is singular".into()))?;
    let b = numerator * inverse;
    Ok(QuotientRoutes {
        ratio_of_dets,
        linear_map: linalg::det(&b),
        coefficients,
    })
}

/// Maximal basis selection (K0, J0, P0, ζ).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasisSelection {
    /// Indices into the real fields, length r.
    pub k0: Vec<usize>,
    /// Indices into the complex fields, length n.
    pub j0: Vec<usize>,
    /// Indices into the realified list, length 2n + r.
    pub p0: Vec<usize>,
    pub zeta: f64,
    /// dim 𝓛 = n + r.
    pub dim_l: usize,
    /// dim 𝓧 = r.
    pub dim_x: usize,
}

/// Coordinates of the columns against an orthonormal basis of their span.
fn span_coordinates(all: &CMatrix, tol: f64) -> (CMatrix, usize) {
    let q = column_basis(all, tol);
    let coords = linalg::coordinates(&q, all);
    (coords, q.ncols())
}

fn abs_det_of(coords: &CMatrix, idx: &[usize]) -> f64 {
    linalg::det(&select_columns(coords, idx)).norm()
}

/// Choose K0, J0 maximizing |⋀X_K ∧ ⋀L_J| over |K| = r, |J| = n inside 𝓛,
/// and ζ = min(1, |wedge of the choice| / max over all splits r1 + n1 = n + r).
pub fn select_from_vectors(xs: &CMatrix, ls: &CMatrix, tol: f64) -> Result<BasisSelection> {
    let q = xs.ncols();
    let m = ls.ncols();
    let all = linalg::hstack(xs, ls);
    if all.ncols() == 0 {
        return Err(Error::Degenerate("no vectors to select from".into()));
    }
    let (coords, dim_l) = span_coordinates(&all, tol);
    if dim_l == 0 {
        return Err(Error::Degenerate("all vectors vanish".into()));
    }
    let dim_x = intersection(&all, &linalg::conj(&all), tol).ncols();
    let (r, n) = (dim_x, dim_l - dim_x);
    if r > q || n > m {
        return Err(Error::Degenerate(format!(
            "cannot pick {r} real and {n} complex vectors from {q} and {m}"
        )));
    }

    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    for k in combinations(q, r) {
        for j in combinations(m, n) {
            let idx: Vec<usize> = k.iter().copied().chain(j.iter().map(|j| q + j)).collect();
            let d = abs_det_of(&coords, &idx);
            let better = match &best {
                None => d > 0.0,
                // strict improvement beyond rounding keeps the lexicographically first on ties
                Some((b, _, _)) => d > b * (1.0 + 1e-12),
            };
            if better {
                best = Some((d, k.clone(), j.clone()));
            }
        }
    }
    let (d0, k0, j0) = match best {
        Some(b) if b.0 > tol * coords.norm().powi(dim_l as i32).max(tol) => b,
        _ => {
            return Err(Error::Degenerate(
                "every candidate wedge vanishes at this point".into(),
            ))
        }
    };

    let mut competitor_max = d0;
    for r1 in 0..=q.min(dim_l) {
        let n1 = dim_l - r1;
        if n1 > m {
            continue;
        }
        for k in combinations(q, r1) {
            for j in combinations(m, n1) {
                let idx: Vec<usize> = k.iter().copied().chain(j.iter().map(|j| q + j)).collect();
                competitor_max = competitor_max.max(abs_det_of(&coords, &idx));
            }
        }
    }
    let zeta = (d0 / competitor_max).min(1.0);
    let p0 = k0
        .iter()
        .copied()
        .chain(j0.iter().map(|j| q + j))
        .chain(j0.iter().map(|j| q + m + j))
        .collect();
    Ok(BasisSelection {
        k0,
        j0,
        p0,
        zeta,
        dim_l,
        dim_x,
    })
}

/// Basis selection for the Z columns of a system at p.
pub fn select_basis(sys: &VectorFieldSystem, p: &[f64]) -> Result<BasisSelection> {
    let z = sys.evaluate(p)?;
    let xs = z.columns(0, sys.q()).into_owned();
    let ls = z.columns(sys.q(), sys.m()).into_owned();
    select_from_vectors(&xs, &ls, RANK_TOL)
}

/// A configuration of real vectors x_k ∈ 𝓧 ∩ V and complex vectors l_j ∈ 𝓛.
#[derive(Debug, Clone)]
pub struct Configuration {
    pub xs: DMatrix<f64>,
    pub ls: CMatrix,
}

impl Configuration {
    /// x_1..x_q, 2Re l_1..2Re l_m, 2Im l_1..2Im l_m as real columns.
    pub fn realified(&self) -> DMatrix<f64> {
        let (q, m) = (self.xs.ncols(), self.ls.ncols());
        let dim = self.xs.nrows().max(self.ls.nrows());
        let mut w = DMatrix::zeros(dim, q + 2 * m);
        for k in 0..q {
            w.set_column(k, &self.xs.column(k));
        }
        for j in 0..m {
            w.set_column(q + j, &(self.ls.column(j).map(|c| 2.0 * c.re)));
            w.set_column(q + m + j, &(self.ls.column(j).map(|c| 2.0 * c.im)));
        }
        w
    }

    pub fn complex_columns(&self) -> CMatrix {
        linalg::hstack(&to_complex(&self.xs), &self.ls)
    }
}

/// Random configuration with dim 𝓧 = r and dim 𝓛 = n + r inside ℝ^dim ⊗ ℂ,
/// q ≥ r real vectors and m ≥ n complex vectors. Coefficients are uniform
/// in [−1, 1]; a fraction of vectors repeat earlier ones to create ties
/// and degenerate competitors.
pub fn random_configuration<R: Rng>(
    rng: &mut R,
    n: usize,
    r: usize,
    q: usize,
    m: usize,
    dim: usize,
) -> Configuration {
    assert!(dim >= 2 * n + r, "ambient too small");
    assert!(q >= r && m >= n);
    let u = |rng: &mut R| rng.random_range(-1.0..1.0);
    let xbasis = DMatrix::from_fn(dim, r, |_, _| u(rng));
    let cre = DMatrix::from_fn(dim, n, |_, _| u(rng));
    let cim = DMatrix::from_fn(dim, n, |_, _| u(rng));
    let cbasis = CMatrix::from_fn(dim, n, |i, j| Complex64::new(cre[(i, j)], cim[(i, j)]));
    let lbasis = linalg::hstack(&to_complex(&xbasis), &cbasis);

    let mut xs = DMatrix::zeros(dim, q);
    for k in 0..q {
        if k > 0 && rng.random_bool(0.15) {
            let src = rng.random_range(0..k);
            let c = u(rng);
            let col = xs.column(src) * c;
            xs.set_column(k, &col);
        } else {
            let c = nalgebra::DVector::from_fn(r, |_, _| u(rng));
            xs.set_column(k, &(&xbasis * c));
        }
    }
    let mut ls = CMatrix::zeros(dim, m);
    for j in 0..m {
        if j > 0 && rng.random_bool(0.15) {
            let src = rng.random_range(0..j);
            let c = Complex64::new(u(rng), u(rng));
            let col = ls.column(src) * c;
            ls.set_column(j, &col);
        } else {
            let c = CVector::from_fn(n + r, |_, _| Complex64::new(u(rng), u(rng)));
            ls.set_column(j, &(&lbasis * c));
        }
    }
    Configuration { xs, ls }
}

/// Outcome of checking both directions of the real/complex quotient comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub n: usize,
    pub r: usize,
    pub zeta_complex: f64,
    /// Largest realified quotient over the allowed (2ζ⁻¹√(2n+r))^{2n+r}.
    pub forward_ratio: f64,
    pub forward_ok: bool,
    pub zeta_real: f64,
    /// Largest complex quotient over the allowed (4ζ⁻¹√(n+r))^{n+r}.
    pub backward_ratio: f64,
    pub backward_ok: bool,
    pub dimension_formula_ok: bool,
}

fn max_real_abs_det(coords: &DMatrix<f64>, k: usize) -> f64 {
    combinations(coords.ncols(), k)
        .iter()
        .map(|idx| linalg::real_det(&select_columns(coords, idx)).abs())
        .fold(0.0, f64::max)
}

fn max_complex_competitor(coords: &CMatrix, q: usize, m: usize, dim_l: usize) -> f64 {
    let mut best: f64 = 0.0;
    for r1 in 0..=q.min(dim_l) {
        let n1 = dim_l - r1;
        if n1 > m {
            continue;
        }
        for k in combinations(q, r1) {
            for j in combinations(m, n1) {
                let idx: Vec<usize> = k.iter().copied().chain(j.iter().map(|j| q + j)).collect();
                best = best.max(abs_det_of(coords, &idx));
            }
        }
    }
    best
}

/// Verify both conclusions of the real/complex comparison on one configuration.
///
/// Forward: with (K0, J0, ζ) from the complex-side selection, every
/// realified quotient is at most (2ζ⁻¹√(2n+r))^{2n+r}. Backward: with
/// (K0, J0, ζ) chosen on the real side, every complex quotient is at most
/// (4ζ⁻¹√(n+r))^{n+r}.
pub fn check_real_complex_bounds(config: &Configuration) -> Result<BoundsReport> {
    let tol = RANK_TOL;
    let (q, m) = (config.xs.ncols(), config.ls.ncols());
    let zc = config.complex_columns();
    let sel = select_from_vectors(
        &zc.columns(0, q).into_owned(),
        &zc.columns(q, m).into_owned(),
        tol,
    )?;
    let (n, r) = (sel.dim_l - sel.dim_x, sel.dim_x);

    let w = config.realified();
    let wbasis = real_column_basis(&w, tol);
    let dim_w = wbasis.ncols();
    let dimension_formula_ok = {
        let sum = rank(&linalg::hstack(&zc, &linalg::conj(&zc)), tol)?;
        sum + sel.dim_x == 2 * sel.dim_l && dim_w == 2 * n + r
    };
    let wcoords = wbasis.transpose() * &w;

    let den = linalg::real_det(&select_columns(&wcoords, &sel.p0)).abs();
    if den == 0.0 {
        return Err(Error::Degenerate("selected realified wedge vanishes".into()));
    }
    let forward_max = max_real_abs_det(&wcoords, dim_w) / den;
    let forward_bound = (2.0 / sel.zeta * ((2 * n + r) as f64).sqrt()).powi((2 * n + r) as i32);
    let forward_ratio = forward_max / forward_bound;

    // real-side selection: candidates of the form (K, Re J, Im J)
    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    for k in combinations(q, r) {
        for j in combinations(m, n) {
            let p: Vec<usize> = k
                .iter()
                .copied()
                .chain(j.iter().map(|j| q + j))
                .chain(j.iter().map(|j| q + m + j))
                .collect();
            let d = linalg::real_det(&select_columns(&wcoords, &p)).abs();
            if best.as_ref().is_none_or(|b| d > b.0 * (1.0 + 1e-12)) && d > 0.0 {
                best = Some((d, k.clone(), j.clone()));
            }
        }
    }
    let (d_real, k1, j1) =
        best.ok_or_else(|| Error::Degenerate("every realified candidate vanishes".into()))?;
    let zeta_real = (d_real / max_real_abs_det(&wcoords, dim_w)).min(1.0);

    let (ccoords, dim_l) = span_coordinates(&zc, tol);
    let idx: Vec<usize> = k1.iter().copied().chain(j1.iter().map(|j| q + j)).collect();
    let cden = abs_det_of(&ccoords, &idx);
    let backward_max = max_complex_competitor(&ccoords, q, m, dim_l) / cden;
    let backward_bound = (4.0 / zeta_real * ((n + r) as f64).sqrt()).powi((n + r) as i32);
    let backward_ratio = backward_max / backward_bound;

    Ok(BoundsReport {
        n,
        r,
        zeta_complex: sel.zeta,
        forward_ratio,
        forward_ok: forward_ratio <= 1.0,
        zeta_real,
        backward_ratio,
        backward_ok: backward_ratio <= 1.0,
        dimension_formula_ok,
    })
}

/// dim(𝓛 + 𝓛̄) + dim(𝓛 ∩ 𝓛̄) and 2 dim 𝓛 for the span of the columns.
pub fn dimension_formula(columns: &CMatrix, tol: f64) -> Result<(usize, usize)> {
    let conj = linalg::conj(columns);
    let sum = rank(&linalg::hstack(columns, &conj), tol)?;
    let cap = intersection(columns, &conj, tol).ncols();
    let dim = rank(columns, tol)?;
    Ok((sum + cap, 2 * dim))
}

/// Whether x's and l's form a complex basis of 𝓛, and whether
/// x's, Re l's, Im l's form a real basis of 𝓛 + 𝓛̄ (the two must agree).
pub fn basis_equivalence(
    xs: &DMatrix<f64>,
    ls: &CMatrix,
    span_l: &CMatrix,
    tol: f64,
) -> Result<(bool, bool)> {
    let dim_l = rank(span_l, tol)?;
    let dim_w = rank(&linalg::hstack(span_l, &linalg::conj(span_l)), tol)?;
    let z = linalg::hstack(&to_complex(xs), ls);
    let complex_basis =
        z.ncols() == dim_l && rank(&z, tol)? == dim_l && rank(&linalg::hstack(span_l, &z), tol)? == dim_l;
    let config = Configuration {
        xs: xs.clone(),
        ls: ls.clone(),
    };
    let w = config.realified();
    let real_basis = w.ncols() == dim_w && linalg::real_rank(&w, tol)? == dim_w;
    Ok((complex_basis, real_basis))
}

/// Rebuild z from the real expansions of Re z and Im z in the basis
/// x_k, Re l_j, Im l_j; returns ‖z − Σ(a_k + i d_k)x_k − Σ(b_j − i c_j)l_j‖.
pub fn reconstruction_error(xs: &DMatrix<f64>, ls: &CMatrix, z: &CVector) -> Result<f64> {
    let (r, n) = (xs.ncols(), ls.ncols());
    let dim = z.len();
    let mut basis = DMatrix::zeros(dim, r + 2 * n);
    for k in 0..r {
        basis.set_column(k, &xs.column(k));
    }
    for j in 0..n {
        basis.set_column(r + j, &ls.column(j).map(|c| c.re));
        basis.set_column(r + n + j, &ls.column(j).map(|c| c.im));
    }
    let cb = to_complex(&basis);
    let re = z.map(|c| Complex64::new(c.re, 0.0));
    let im = z.map(|c| Complex64::new(c.im, 0.0));
    let sr = least_squares(&cb, &re, RANK_TOL).solution;
    let si = least_squares(&cb, &im, RANK_TOL).solution;
    let mut z0 = CVector::zeros(dim);
    for k in 0..r {
        let coef = Complex64::new(sr[k].re, si[k].re);
        z0 += xs.column(k).map(|v| Complex64::new(v, 0.0)) * coef;
    }
    for j in 0..n {
        let coef = Complex64::new(sr[r + j].re, -sr[r + n + j].re);
        z0 += ls.column(j) * coef;
    }
    Ok((z - z0).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn diagonal_quotient_and_antisymmetry() {
        let num = CMatrix::from_row_slice(2, 2, &[c(2.), c(0.), c(0.), c(3.)]);
        let den = CMatrix::identity(2, 2);
        assert!((wedge_quotient(&num, &den).unwrap() - c(6.)).norm() < 1e-14);
        let swapped = CMatrix::from_row_slice(2, 2, &[c(0.), c(1.), c(1.), c(0.)]);
        assert!((wedge_quotient(&num, &swapped).unwrap() - c(-6.)).norm() < 1e-14);
    }

    #[test]
    fn singular_denominator_rejected() {
        let num = CMatrix::identity(2, 2);
        let den = CMatrix::from_row_slice(2, 2, &[c(1.), c(2.), c(2.), c(4.)]);
        assert!(matches!(wedge_quotient(&num, &den), Err(Error::Singular(_))));
    }

    #[test]
    fn two_complex_fields_select_both() {
        // L1 = (1, 0) and L2 = (0, 1/2) in the ∂z̄ frame of ℂ², written in (x1, y1, x2, y2)
        let i = Complex64::new(0.0, 1.0);
        let mut big = CMatrix::zeros(4, 2);
        big[(0, 0)] = c(1.);
        big[(1, 0)] = i;
        big[(2, 1)] = c(0.5);
        big[(3, 1)] = i * 0.5;
        let sel = select_from_vectors(&CMatrix::zeros(4, 0), &big, RANK_TOL).unwrap();
        assert_eq!(sel.j0, vec![0, 1]);
        assert_eq!(sel.zeta, 1.0);
        assert_eq!(sel.p0, vec![0, 1, 2, 3]);
    }

    #[test]
    fn euclidean_real_frame_zeta_one() {
        let xs = CMatrix::identity(3, 3);
        let sel = select_from_vectors(&xs, &CMatrix::zeros(3, 0), RANK_TOL).unwrap();
        assert_eq!(sel.k0, vec![0, 1, 2]);
        assert_eq!(sel.zeta, 1.0);
        assert_eq!(sel.dim_x, 3);
    }

    #[test]
    fn orthonormal_complex_frame_forward_bound() {
        let i = Complex64::new(0.0, 1.0);
        let mut ls = CMatrix::zeros(2, 1);
        ls[(0, 0)] = c(1.0 / 2f64.sqrt());
        ls[(1, 0)] = i / 2f64.sqrt();
        let cfg = Configuration {
            xs: DMatrix::zeros(2, 0),
            ls,
        };
        let rep = check_real_complex_bounds(&cfg).unwrap();
        assert_eq!((rep.n, rep.r), (1, 0));
        assert_eq!(rep.zeta_complex, 1.0);
        assert!(rep.forward_ok && rep.backward_ok && rep.dimension_formula_ok);
        assert!(rep.forward_ratio * 8.0 <= 8.0 + 1e-12);
    }

    #[test]
    fn random_configurations_satisfy_dimension_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let cfg = random_configuration(&mut rng, 2, 1, 3, 3, 6);
            let (lhs, rhs) = dimension_formula(&cfg.complex_columns(), RANK_TOL).unwrap();
            assert_eq!(lhs, rhs);
        }
    }
}
