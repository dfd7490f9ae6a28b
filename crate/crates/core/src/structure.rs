//! Pointwise checks of the algebraic hypotheses: involutivity with
//! coefficient recovery, elliptic-structure conditions, dimension constancy
//! and the E-map property.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::fields::{complex_bracket, Ambient, ComplexVectorField, VectorField, VectorFieldSystem};
use crate::linalg::{self, CMatrix, CVector};

/// Default residual threshold, relative to the column scale.
pub const RESIDUAL_TOL: f64 = 1e-6;

/// Bracket coefficients at one point. Index order is (j, k, l):
/// [Z_j, Z_k] = Σ c1 Z_l and [Z_j, Z̄_k] = Σ c2 Z_l + Σ c3 Z̄_l.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BracketCoefficients {
    pub point: Vec<f64>,
    pub c1: Vec<Vec<Vec<Complex64>>>,
    pub c2: Vec<Vec<Vec<Complex64>>>,
    pub c3: Vec<Vec<Vec<Complex64>>>,
    /// ‖[Z_j, Z_k] − Σ c1 Z_l‖.
    pub residuals_same: Vec<Vec<f64>>,
    /// ‖[Z_j, Z̄_k] − Σ c2 Z_l − Σ c3 Z̄_l‖.
    pub residuals_mixed: Vec<Vec<f64>>,
    /// Some column set was rank deficient (minimum-norm coefficients used).
    pub rank_deficient: bool,
    pub max_residual: f64,
    /// Largest column norm of (Z, Z̄), floored at 1.
    pub scale: f64,
}

impl BracketCoefficients {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual <= tol * self.scale
    }
}

/// The Z list as complex fields: real fields first (zero imaginary part).
fn z_fields(sys: &VectorFieldSystem) -> Vec<ComplexVectorField> {
    let dim = sys.dim();
    sys.real_fields()
        .iter()
        .map(|e| ComplexVectorField {
            re: e.field.clone(),
            im: VectorField::zero(dim),
        })
        .chain(sys.complex_fields().iter().map(|e| e.field.clone()))
        .collect()
}

fn max_col_norm(m: &CMatrix) -> f64 {
    m.column_iter().map(|c| c.norm()).fold(1.0, f64::max)
}

fn coefficients_at(sys: &VectorFieldSystem, zs: &[ComplexVectorField], p: &[f64], tol: f64) -> Result<BracketCoefficients> {
    let cols = sys.evaluate(p)?;
    let both = linalg::hstack(&cols, &linalg::conj(&cols));
    let n = zs.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut c1 = vec![vec![vec![zero; n]; n]; n];
    let mut c2 = c1.clone();
    let mut c3 = c1.clone();
    let mut r_same = vec![vec![0.0; n]; n];
    let mut r_mixed = vec![vec![0.0; n]; n];
    let mut deficient = false;
    for j in 0..n {
        for k in 0..n {
            let b = CVector::from_vec(complex_bracket(&zs[j], &zs[k], false, p)?);
            let ls = linalg::least_squares(&cols, &b, tol);
            deficient |= ls.rank_deficient;
            r_same[j][k] = ls.residual;
            c1[j][k] = ls.solution.iter().copied().collect();

            let bm = CVector::from_vec(complex_bracket(&zs[j], &zs[k], true, p)?);
            let ls = linalg::least_squares(&both, &bm, tol);
            deficient |= ls.rank_deficient;
            r_mixed[j][k] = ls.residual;
            c2[j][k] = ls.solution.iter().take(n).copied().collect();
            c3[j][k] = ls.solution.iter().skip(n).copied().collect();
        }
    }
    let max_residual = r_same
        .iter()
        .chain(&r_mixed)
        .flatten()
        .copied()
        .fold(0.0, f64::max);
    Ok(BracketCoefficients {
        point: p.to_vec(),
        c1,
        c2,
        c3,
        residuals_same: r_same,
        residuals_mixed: r_mixed,
        rank_deficient: deficient,
        max_residual,
        scale: max_col_norm(&both),
    })
}

/// Recover bracket coefficients by minimum-norm least squares at each point.
pub fn involutivity_residual(
    sys: &VectorFieldSystem,
    points: &[Vec<f64>],
    tol: f64,
) -> Result<Vec<BracketCoefficients>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    let zs = z_fields(sys);
    points
        .par_iter()
        .map(|p| coefficients_at(sys, &zs, p, tol))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanReport {
    pub point: Vec<f64>,
    /// dim 𝓛 = dim span_ℂ{Z}.
    pub dim_l: usize,
    /// dim 𝓧 = dim span_ℂ{X}.
    pub dim_x: usize,
    /// dim 𝓦 = dim (𝓛 + 𝓛̄).
    pub dim_w: usize,
    /// dim (𝓛 ∩ 𝓛̄).
    pub dim_intersection: usize,
    /// 𝓛 + 𝓛̄ is the whole complexified tangent space.
    pub elliptic_ok: bool,
    /// 𝓛 ∩ 𝓛̄ = 𝓧.
    pub intersection_ok: bool,
    /// Only set by region checks.
    pub constancy_ok: Option<bool>,
}

pub fn check_elliptic_pointwise(sys: &VectorFieldSystem, p: &[f64], tol: f64) -> Result<SpanReport> {
    let cols = sys.evaluate(p)?;
    let dim = sys.dim();
    let dim_l = if cols.ncols() == 0 { 0 } else { linalg::rank(&cols, tol)? };
    let xs = cols.columns(0, sys.q()).into_owned();
    let dim_x = if sys.q() == 0 { 0 } else { linalg::rank(&xs, tol)? };
    let both = linalg::hstack(&cols, &linalg::conj(&cols));
    let dim_w = if both.ncols() == 0 { 0 } else { linalg::rank(&both, tol)? };
    let dim_intersection = if dim_l == 0 {
        0
    } else {
        let basis = linalg::column_basis(&cols, tol);
        linalg::intersection(&basis, &linalg::conj(&basis), tol).ncols()
    };
    // 𝓧 ⊆ 𝓛 ∩ 𝓛̄ always (real vectors of 𝓛), so equal dimensions give equality
    let intersection_ok = dim_intersection == dim_x;
    Ok(SpanReport {
        point: p.to_vec(),
        dim_l,
        dim_x,
        dim_w,
        dim_intersection,
        elliptic_ok: dim_w == dim,
        intersection_ok,
        constancy_ok: None,
    })
}

pub const MIN_CONSTANCY_SAMPLES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstancyReport {
    pub constant: bool,
    pub dims: Vec<usize>,
    /// The most common dimension.
    pub typical: usize,
    /// First sample whose dimension differs from the typical one.
    pub witness: Option<Vec<f64>>,
}

/// dim 𝓛 at every sample; constant iff all equal.
pub fn dimension_constancy(sys: &VectorFieldSystem, samples: &[Vec<f64>], tol: f64) -> Result<ConstancyReport> {
    if samples.len() < MIN_CONSTANCY_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_CONSTANCY_SAMPLES} samples"
        )));
    }
    let dims: Vec<usize> = samples
        .par_iter()
        .map(|p| linalg::rank(&sys.evaluate(p)?, tol))
        .collect::<Result<_>>()?;
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &d in &dims {
        *counts.entry(d).or_default() += 1;
    }
    // ties go to the larger dimension
    let typical = counts
        .iter()
        .max_by_key(|(d, c)| (**c, **d))
        .map(|(d, _)| *d)
        .unwrap_or(0);
    let witness = dims
        .iter()
        .position(|&d| d != typical)
        .map(|i| samples[i].clone());
    Ok(ConstancyReport {
        constant: witness.is_none(),
        dims,
        typical,
        witness,
    })
}

/// A map between coordinate spaces given by one expression per target coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateMap {
    pub components: Vec<Expression>,
}

impl CoordinateMap {
    pub fn new(components: Vec<Expression>) -> Self {
        CoordinateMap { components }
    }

    pub fn parse(source: &Ambient, components: &[&str]) -> Result<Self> {
        Ok(CoordinateMap {
            components: components.iter().map(|c| source.parse(c)).collect::<Result<_>>()?,
        })
    }

    pub fn eval(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.components.iter().map(|e| Ok(e.eval(p)?)).collect()
    }

    pub fn jacobian(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let mut j = DMatrix::zeros(self.components.len(), p.len());
        for (i, e) in self.components.iter().enumerate() {
            let (_, g) = e.eval_with_gradient(p)?;
            for (k, v) in g.into_iter().enumerate() {
                j[(i, k)] = v;
            }
        }
        Ok(j)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EMapReport {
    pub max_residual: f64,
    pub witness: Option<Vec<f64>>,
}

fn unit_columns(m: &CMatrix) -> CMatrix {
    let mut out = m.clone();
    for mut c in out.column_iter_mut() {
        let n = c.norm();
        if n > 0.0 {
            c /= Complex64::new(n, 0.0);
        }
    }
    out
}

/// Largest component of dF·v orthogonal to the target structure, over unit
/// structure vectors v (∂t, ∂z̄) of the source and the sample points.
pub fn check_e_map(
    map: &CoordinateMap,
    source: &Ambient,
    target: &Ambient,
    samples: &[Vec<f64>],
    tol: f64,
) -> Result<EMapReport> {
    if map.components.len() != target.dim() {
        return Err(Error::Dimension("map components differ from target dimension".into()));
    }
    let src = unit_columns(&source.structure_frame());
    let tgt = target.structure_frame();
    let q = if tgt.ncols() == 0 { tgt.clone() } else { linalg::column_basis(&tgt, tol) };
    let residuals: Vec<f64> = samples
        .par_iter()
        .map(|p| {
            if p.len() != source.dim() {
                return Err(Error::Dimension("sample has the wrong dimension".into()));
            }
            let img = linalg::to_complex(&map.jacobian(p)?) * &src;
            let proj = &q * (q.adjoint() * &img);
            Ok((img - proj)
                .column_iter()
                .map(|c| c.norm())
                .fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    let (i, max) = residuals
        .iter()
        .copied()
        .enumerate()
        .fold((None, 0.0), |(bi, bm), (i, r)| if r > bm { (Some(i), r) } else { (bi, bm) });
    Ok(EMapReport {
        max_residual: max,
        witness: i.map(|i| samples[i].clone()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::get_geometry;

    fn grid(n: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
        let mut v = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let a = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                let b = lo + (hi - lo) * j as f64 / (n - 1) as f64;
                v.push(vec![a, b]);
            }
        }
        v
    }

    #[test]
    fn euclidean_frame_has_zero_coefficients() {
        let s = get_geometry("euclidean2").unwrap().system;
        let r = involutivity_residual(&s, &[vec![0.3, -0.2]], RESIDUAL_TOL).unwrap();
        assert_eq!(r[0].max_residual, 0.0);
        assert!(r[0].c1.iter().flatten().flatten().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn grushin_fails_on_the_singular_line() {
        let s = get_geometry("grushin").unwrap().system;
        let r = involutivity_residual(&s, &[vec![0.0, 0.4]], RESIDUAL_TOL).unwrap();
        assert!(r[0].max_residual >= 0.5);
        assert!(!r[0].passes(RESIDUAL_TOL));
    }

    #[test]
    fn complex_plane_is_a_complex_structure() {
        let s = get_geometry("complex_plane").unwrap().system;
        let r = check_elliptic_pointwise(&s, &[0.2, 0.1], 1e-8).unwrap();
        assert_eq!((r.dim_l, r.dim_x, r.dim_w), (1, 0, 2));
        assert!(r.elliptic_ok && r.intersection_ok);
    }

    #[test]
    fn heisenberg_elliptic_spans() {
        let s = get_geometry("heisenberg_elliptic").unwrap().system;
        let r = check_elliptic_pointwise(&s, &[0.2, 0.1, -0.5], 1e-8).unwrap();
        assert_eq!((r.dim_l, r.dim_x, r.dim_w), (2, 1, 3));
        assert!(r.elliptic_ok && r.intersection_ok);
    }

    #[test]
    fn singular_dimension_drop() {
        let s = get_geometry("singular_4_3").unwrap().system;
        let at0 = check_elliptic_pointwise(&s, &[0.0, 0.0], 1e-6).unwrap();
        let at1 = check_elliptic_pointwise(&s, &[1.0, 0.0], 1e-6).unwrap();
        assert_eq!(at0.dim_l, 1);
        assert_eq!(at1.dim_l, 2);
        let c = dimension_constancy(&s, &grid(5, -1.0, 1.0), 1e-6).unwrap();
        assert!(!c.constant);
        assert_eq!(c.witness.unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn singular_annulus_is_constant() {
        let s = get_geometry("singular_4_3").unwrap().system;
        let pts: Vec<Vec<f64>> = (0..32)
            .map(|i| {
                let r = 0.5 + 0.5 * (i % 4) as f64 / 3.0;
                let a = i as f64 * 0.7;
                vec![r * a.cos(), r * a.sin()]
            })
            .collect();
        let c = dimension_constancy(&s, &pts, 1e-6).unwrap();
        assert!(c.constant);
        assert_eq!(c.typical, 2);
    }

    #[test]
    fn constancy_needs_enough_samples() {
        let s = get_geometry("euclidean2").unwrap().system;
        assert!(dimension_constancy(&s, &grid(3, 0.0, 1.0), 1e-6).is_err());
    }

    #[test]
    fn e_map_examples() {
        let amb = get_geometry("complex_plane").unwrap().system.ambient().clone();
        let pts: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let a = i as f64 * 0.5;
                let r = 0.5 + 0.025 * i as f64;
                vec![r * a.cos(), r * a.sin()]
            })
            .collect();
        let id = CoordinateMap::parse(&amb, &["x", "y"]).unwrap();
        assert!(check_e_map(&id, &amb, &amb, &pts, 1e-8).unwrap().max_residual < 1e-15);
        let sq = CoordinateMap::parse(&amb, &["x^2 - y^2", "2*x*y"]).unwrap();
        assert!(check_e_map(&sq, &amb, &amb, &pts, 1e-8).unwrap().max_residual < 1e-10);
        let bar = CoordinateMap::parse(&amb, &["x", "-y"]).unwrap();
        let r = check_e_map(&bar, &amb, &amb, &pts, 1e-8).unwrap();
        assert!((r.max_residual - 1.0).abs() < 1e-12);
    }
}
