//! Real and complex vector field systems with formal degrees.
//!
//! Complex fields are stored as pairs of real expression vectors over the
//! real coordinates of ℝ^r × ℂ^n; complex arithmetic happens at evaluation.
//! The realified list follows the order X_1..X_q, 2Re L_1..2Re L_m,
//! 2Im L_1..2Im L_m.

use std::borrow::Cow;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::expr::{parse_with_names, Expression, Node};
use crate::linalg::{self, CMatrix};

/// Coordinate layout: which real coordinates are the `t`'s and which pairs
/// are the real and imaginary parts of the `z`'s.
#[derive(Debug, Clone, PartialEq)]
pub struct Ambient {
    names: Vec<String>,
    real_coords: Vec<usize>,
    complex_pairs: Vec<(usize, usize)>,
}

impl Ambient {
    /// Purely real ℝ^dim with coordinates x1..x{dim}.
    pub fn real(dim: usize) -> Self {
        Ambient {
            names: (1..=dim).map(|i| format!("x{i}")).collect(),
            real_coords: (0..dim).collect(),
            complex_pairs: Vec::new(),
        }
    }

    pub fn new(
        names: Vec<String>,
        real_coords: Vec<usize>,
        complex_pairs: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let dim = names.len();
        let mut seen = vec![false; dim];
        let all = real_coords
            .iter()
            .copied()
            .chain(complex_pairs.iter().flat_map(|&(a, b)| [a, b]));
        for i in all {
            if i >= dim || seen[i] {
                return Err(Error::InvalidArgument(format!(
                    "coordinate {i} is out of range or used twice"
                )));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidArgument(
                "every coordinate must be real or part of a complex pair".into(),
            ));
        }
        Ok(Ambient {
            names,
            real_coords,
            complex_pairs,
        })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    /// Number of real coordinates `t`.
    pub fn r(&self) -> usize {
        self.real_coords.len()
    }

    /// Number of complex coordinates `z`.
    pub fn n(&self) -> usize {
        self.complex_pairs.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn real_coords(&self) -> &[usize] {
        &self.real_coords
    }

    pub fn complex_pairs(&self) -> &[(usize, usize)] {
        &self.complex_pairs
    }

    pub fn parse(&self, text: &str) -> Result<Expression> {
        Ok(parse_with_names(text, &self.names)?)
    }

    /// Columns ∂t_k followed by ∂z̄_j = (∂x + i∂y)/2.
    pub fn structure_frame(&self) -> CMatrix {
        let dim = self.dim();
        let mut m = CMatrix::zeros(dim, self.r() + self.n());
        for (k, &t) in self.real_coords.iter().enumerate() {
            m[(t, k)] = Complex64::new(1.0, 0.0);
        }
        for (j, &(x, y)) in self.complex_pairs.iter().enumerate() {
            m[(x, self.r() + j)] = Complex64::new(0.5, 0.0);
            m[(y, self.r() + j)] = Complex64::new(0.0, 0.5);
        }
        m
    }
}

/// Anything with point values and a Jacobian; brackets nest through this.
pub trait FieldFn: Sync {
    fn dim(&self) -> usize;
    fn value(&self, p: &[f64]) -> Result<Vec<f64>>;
    /// Row i is the gradient of component i.
    fn jacobian(&self, p: &[f64]) -> Result<DMatrix<f64>>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    components: Vec<Expression>,
}

impl VectorField {
    pub fn new(components: Vec<Expression>) -> Result<Self> {
        let dim = components.len();
        if let Some(bad) = components.iter().find(|c| c.dimension() != dim) {
            return Err(Error::Dimension(format!(
                "component over {} variables in a field on a {dim}-dimensional space",
                bad.dimension()
            )));
        }
        Ok(VectorField { components })
    }

    /// Parse components written with coordinates x1..xN.
    pub fn parse(components: &[&str]) -> Result<Self> {
        let dim = components.len();
        let parsed = components
            .iter()
            .map(|c| crate::expr::parse_expression(c, dim))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        VectorField::new(parsed)
    }

    pub fn zero(dim: usize) -> Self {
        VectorField {
            components: (0..dim).map(|_| Expression::constant(0.0, dim)).collect(),
        }
    }

    /// Constant coordinate field ∂x_i.
    pub fn coordinate(i: usize, dim: usize) -> Self {
        let mut f = VectorField::zero(dim);
        f.components[i] = Expression::constant(1.0, dim);
        f
    }

    pub fn components(&self) -> &[Expression] {
        &self.components
    }

    pub fn scaled(&self, c: f64) -> Self {
        let components = self
            .components
            .iter()
            .map(|e| {
                if e.is_zero_literal() || c == 1.0 {
                    e.clone()
                } else {
                    Expression::from_node(
                        Node::Mul(Box::new(Node::Num(c)), Box::new(e.root().clone())),
                        e.dimension(),
                    )
                }
            })
            .collect();
        VectorField { components }
    }

    pub fn eval_into(&self, p: &[f64], out: &mut [f64]) -> Result<()> {
        for (o, e) in out.iter_mut().zip(&self.components) {
            *o = e.eval(p)?;
        }
        Ok(())
    }

    /// Accumulate `c · W(p)` into `out`.
    pub fn add_scaled(&self, c: f64, p: &[f64], out: &mut [f64]) -> Result<()> {
        if c == 0.0 {
            return Ok(());
        }
        for (o, e) in out.iter_mut().zip(&self.components) {
            if !e.is_zero_literal() {
                *o += c * e.eval(p)?;
            }
        }
        Ok(())
    }
}

impl FieldFn for VectorField {
    fn dim(&self) -> usize {
        self.components.len()
    }

    fn value(&self, p: &[f64]) -> Result<Vec<f64>> {
        check_point(self.dim(), p)?;
        let mut out = vec![0.0; self.dim()];
        self.eval_into(p, &mut out)?;
        Ok(out)
    }

    fn jacobian(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        check_point(self.dim(), p)?;
        let n = self.dim();
        let mut jac = DMatrix::zeros(n, n);
        for (i, e) in self.components.iter().enumerate() {
            if e.is_zero_literal() {
                continue;
            }
            let (_, g) = e.eval_with_gradient(p)?;
            for (j, gj) in g.into_iter().enumerate() {
                jac[(i, j)] = gj;
            }
        }
        Ok(jac)
    }
}

fn check_point(dim: usize, p: &[f64]) -> Result<()> {
    if p.len() != dim {
        return Err(Error::Dimension(format!(
            "point has {} coordinates, expected {dim}",
            p.len()
        )));
    }
    Ok(())
}

/// The bracket [V, W] as a field: values exact from Jacobians, its own
/// Jacobian by central differences so that brackets can be nested.
pub struct Bracket<'a> {
    v: &'a dyn FieldFn,
    w: &'a dyn FieldFn,
}

/// [V,W](p) = DW(p)·V(p) − DV(p)·W(p).
pub fn lie_bracket<'a>(v: &'a dyn FieldFn, w: &'a dyn FieldFn) -> Result<Bracket<'a>> {
    if v.dim() != w.dim() {
        return Err(Error::Dimension(format!(
            "bracket of fields on spaces of dimension {} and {}",
            v.dim(),
            w.dim()
        )));
    }
    Ok(Bracket { v, w })
}

impl FieldFn for Bracket<'_> {
    fn dim(&self) -> usize {
        self.v.dim()
    }

    fn value(&self, p: &[f64]) -> Result<Vec<f64>> {
        let vp = nalgebra::DVector::from_vec(self.v.value(p)?);
        let wp = nalgebra::DVector::from_vec(self.w.value(p)?);
        let out = self.w.jacobian(p)? * vp - self.v.jacobian(p)? * wp;
        Ok(out.iter().copied().collect())
    }

    fn jacobian(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let mut jac = DMatrix::zeros(n, n);
        let mut q = p.to_vec();
        for j in 0..n {
            let h = 1e-5 * p[j].abs().max(1.0);
            q[j] = p[j] + h;
            let plus = self.value(&q)?;
            q[j] = p[j] - h;
            let minus = self.value(&q)?;
            q[j] = p[j];
            for i in 0..n {
                jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }
        Ok(jac)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVectorField {
    pub re: VectorField,
    pub im: VectorField,
}

impl ComplexVectorField {
    pub fn new(re: VectorField, im: VectorField) -> Result<Self> {
        if re.dim() != im.dim() {
            return Err(Error::Dimension(
                "real and imaginary parts differ in length".into(),
            ));
        }
        Ok(ComplexVectorField { re, im })
    }

    pub fn dim(&self) -> usize {
        self.re.dim()
    }

    pub fn eval(&self, p: &[f64]) -> Result<Vec<Complex64>> {
        let re = self.re.value(p)?;
        let im = self.im.value(p)?;
        Ok(re
            .into_iter()
            .zip(im)
            .map(|(a, b)| Complex64::new(a, b))
            .collect())
    }
}

/// [A + iB, C ± iD] at p for complex fields, with `conjugate_second`
/// selecting the minus sign.
pub fn complex_bracket(
    a: &ComplexVectorField,
    b: &ComplexVectorField,
    conjugate_second: bool,
    p: &[f64],
) -> Result<Vec<Complex64>> {
    let sign = if conjugate_second { -1.0 } else { 1.0 };
    let rr = lie_bracket(&a.re, &b.re)?.value(p)?;
    let ii = lie_bracket(&a.im, &b.im)?.value(p)?;
    let ri = lie_bracket(&a.re, &b.im)?.value(p)?;
    let ir = lie_bracket(&a.im, &b.re)?.value(p)?;
    Ok((0..a.dim())
        .map(|k| {
            Complex64::new(rr[k] - sign * ii[k], sign * ri[k] + ir[k])
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealEntry {
    pub name: String,
    pub field: VectorField,
    pub degree: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexEntry {
    pub name: String,
    pub field: ComplexVectorField,
    pub degree: f64,
}

/// Real fields X_1..X_q and complex fields L_1..L_m with formal degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldSystem {
    ambient: Ambient,
    real: Vec<RealEntry>,
    complex: Vec<ComplexEntry>,
}

impl VectorFieldSystem {
    pub fn new(ambient: Ambient, real: Vec<RealEntry>, complex: Vec<ComplexEntry>) -> Result<Self> {
        let dim = ambient.dim();
        let degrees = real
            .iter()
            .map(|e| (&e.name, e.degree, e.field.dim()))
            .chain(complex.iter().map(|e| (&e.name, e.degree, e.field.dim())));
        for (name, degree, d) in degrees {
            if !(degree >= 1.0) || !degree.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "field '{name}' has degree {degree}; degrees must be finite and at least 1"
                )));
            }
            if d != dim {
                return Err(Error::Dimension(format!(
                    "field '{name}' has {d} components, ambient dimension is {dim}"
                )));
            }
        }
        Ok(VectorFieldSystem {
            ambient,
            real,
            complex,
        })
    }

    /// Real system on ℝ^dim from component strings over x1..xN.
    pub fn from_real(dim: usize, fields: &[(&[&str], f64)]) -> Result<Self> {
        let real = fields
            .iter()
            .enumerate()
            .map(|(i, (comps, degree))| {
                Ok(RealEntry {
                    name: format!("W{}", i + 1),
                    field: VectorField::parse(comps)?,
                    degree: *degree,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        VectorFieldSystem::new(Ambient::real(dim), real, Vec::new())
    }

    pub fn ambient(&self) -> &Ambient {
        &self.ambient
    }

    pub fn dim(&self) -> usize {
        self.ambient.dim()
    }

    pub fn real_fields(&self) -> &[RealEntry] {
        &self.real
    }

    pub fn complex_fields(&self) -> &[ComplexEntry] {
        &self.complex
    }

    pub fn q(&self) -> usize {
        self.real.len()
    }

    pub fn m(&self) -> usize {
        self.complex.len()
    }

    pub fn is_real(&self) -> bool {
        self.complex.is_empty()
    }

    /// Degrees of the Z list (X's then L's).
    pub fn degrees(&self) -> Vec<f64> {
        self.real
            .iter()
            .map(|e| e.degree)
            .chain(self.complex.iter().map(|e| e.degree))
            .collect()
    }

    /// Columns Z_1..Z_{q+m} at p, real fields embedded.
    pub fn evaluate(&self, p: &[f64]) -> Result<CMatrix> {
        check_point(self.dim(), p)?;
        let dim = self.dim();
        let mut m = CMatrix::zeros(dim, self.q() + self.m());
        for (j, e) in self.real.iter().enumerate() {
            for (i, v) in e.field.value(p)?.into_iter().enumerate() {
                m[(i, j)] = Complex64::new(v, 0.0);
            }
        }
        for (j, e) in self.complex.iter().enumerate() {
            for (i, v) in e.field.eval(p)?.into_iter().enumerate() {
                m[(i, self.q() + j)] = v;
            }
        }
        Ok(m)
    }

    /// X_1..X_q, 2Re L_1..2Re L_m, 2Im L_1..2Im L_m with inherited degrees.
    pub fn realify(&self) -> VectorFieldSystem {
        if self.is_real() {
            return self.clone();
        }
        let mut real = self.real.clone();
        for e in &self.complex {
            real.push(RealEntry {
                name: format!("2Re({})", e.name),
                field: e.field.re.scaled(2.0),
                degree: e.degree,
            });
        }
        for e in &self.complex {
            real.push(RealEntry {
                name: format!("2Im({})", e.name),
                field: e.field.im.scaled(2.0),
                degree: e.degree,
            });
        }
        VectorFieldSystem {
            ambient: self.ambient.clone(),
            real,
            complex: Vec::new(),
        }
    }

    /// Borrow when already real, otherwise realify.
    pub fn real_view(&self) -> Cow<'_, VectorFieldSystem> {
        if self.is_real() {
            Cow::Borrowed(self)
        } else {
            Cow::Owned(self.realify())
        }
    }

    /// δ^{d_j} W_j.
    pub fn scale(&self, delta: f64) -> Result<VectorFieldSystem> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "scale {delta} outside (0, 1]"
            )));
        }
        Ok(self.scale_unchecked(delta))
    }

    /// δ^{d_j} W_j for any δ > 0 (charts and volumes use δ > 1 as well).
    pub fn scale_unchecked(&self, delta: f64) -> VectorFieldSystem {
        let real = self
            .real
            .iter()
            .map(|e| RealEntry {
                name: e.name.clone(),
                field: e.field.scaled(delta.powf(e.degree)),
                degree: e.degree,
            })
            .collect();
        let complex = self
            .complex
            .iter()
            .map(|e| {
                let c = delta.powf(e.degree);
                ComplexEntry {
                    name: e.name.clone(),
                    field: ComplexVectorField {
                        re: e.field.re.scaled(c),
                        im: e.field.im.scaled(c),
                    },
                    degree: e.degree,
                }
            })
            .collect();
        VectorFieldSystem {
            ambient: self.ambient.clone(),
            real,
            complex,
        }
    }

    /// Sub-system of the real fields with the given indices (in order).
    pub fn select_real(&self, idx: &[usize]) -> VectorFieldSystem {
        VectorFieldSystem {
            ambient: self.ambient.clone(),
            real: idx.iter().map(|&i| self.real[i].clone()).collect(),
            complex: Vec::new(),
        }
    }

    /// Real frame at p (only for real systems; realify first otherwise).
    pub fn real_frame(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        check_point(self.dim(), p)?;
        let mut m = DMatrix::zeros(self.dim(), self.q());
        let mut col = vec![0.0; self.dim()];
        for (j, e) in self.real.iter().enumerate() {
            e.field.eval_into(p, &mut col)?;
            m.column_mut(j).copy_from_slice(&col);
        }
        Ok(m)
    }

    /// Σ a_j X_j(p) into `out` over the real fields.
    pub fn combination(&self, a: &[f64], p: &[f64], out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (c, e) in a.iter().zip(&self.real) {
            e.field.add_scaled(*c, p, out)?;
        }
        Ok(())
    }
}

/// Convenience: span rank of a complex column matrix.
pub fn span_rank(columns: &CMatrix, tol: f64) -> Result<usize> {
    linalg::rank(columns, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::RANK_TOL;

    fn heisenberg_l() -> ComplexVectorField {
        // L = ∂z̄ − i z ∂t in (x, y, t)
        ComplexVectorField::new(
            VectorField::parse(&["0.5", "0", "x2"]).unwrap(),
            VectorField::parse(&["0", "0.5", "-x1"]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn heisenberg_l_at_z_one() {
        let v = heisenberg_l().eval(&[1.0, 0.0, 0.0]).unwrap();
        let re: Vec<f64> = v.iter().map(|c| c.re).collect();
        let im: Vec<f64> = v.iter().map(|c| c.im).collect();
        assert_eq!(re, vec![0.5, 0.0, 0.0]);
        assert_eq!(im, vec![0.0, 0.5, -1.0]);
    }

    #[test]
    fn heisenberg_bracket_is_vertical() {
        let x = VectorField::parse(&["1", "0", "2*x2"]).unwrap();
        let y = VectorField::parse(&["0", "1", "-2*x1"]).unwrap();
        let b = lie_bracket(&x, &y).unwrap();
        for p in [[0.0, 0.0, 0.0], [0.3, -1.2, 4.0], [2.0, 5.0, -1.0]] {
            assert_eq!(b.value(&p).unwrap(), vec![0.0, 0.0, -4.0]);
        }
    }

    #[test]
    fn grushin_bracket() {
        let dx = VectorField::parse(&["1", "0"]).unwrap();
        let xdy = VectorField::parse(&["0", "x1"]).unwrap();
        let b = lie_bracket(&dx, &xdy).unwrap();
        assert_eq!(b.value(&[0.7, -3.0]).unwrap(), vec![0.0, 1.0]);
        let dy = VectorField::coordinate(1, 2);
        assert_eq!(lie_bracket(&dx, &dy).unwrap().value(&[1.0, 1.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = VectorField::coordinate(0, 2);
        let b = VectorField::coordinate(0, 3);
        assert!(lie_bracket(&a, &b).is_err());
    }

    #[test]
    fn realify_dbar_on_c_is_gradient() {
        let amb = Ambient::new(vec!["x".into(), "y".into()], vec![], vec![(0, 1)]).unwrap();
        let l = ComplexVectorField::new(
            VectorField::parse(&["0.5", "0"]).unwrap(),
            VectorField::parse(&["0", "0.5"]).unwrap(),
        )
        .unwrap();
        let sys = VectorFieldSystem::new(
            amb,
            vec![],
            vec![ComplexEntry {
                name: "L".into(),
                field: l,
                degree: 1.0,
            }],
        )
        .unwrap();
        let r = sys.realify();
        assert_eq!(r.q(), 2);
        let f = r.real_frame(&[0.3, 0.1]).unwrap();
        assert_eq!(f, DMatrix::identity(2, 2));
    }

    #[test]
    fn realify_of_real_is_identity() {
        let sys = VectorFieldSystem::from_real(2, &[(&["1", "0"], 1.0), (&["0", "x1"], 2.0)]).unwrap();
        assert_eq!(sys.realify(), sys);
        assert_eq!(sys.realify().realify(), sys);
    }

    #[test]
    fn scaling_multiplies_columns() {
        let sys = VectorFieldSystem::from_real(2, &[(&["1", "0"], 1.0), (&["0", "1"], 2.0)]).unwrap();
        let s = sys.scale(0.5).unwrap();
        let f = s.real_frame(&[0.0, 0.0]).unwrap();
        assert_eq!(f[(0, 0)], 0.5);
        assert_eq!(f[(1, 1)], 0.25);
        assert_eq!(sys.scale(1.0).unwrap().real_frame(&[1.0, 2.0]).unwrap(), sys.real_frame(&[1.0, 2.0]).unwrap());
        assert!(sys.scale(0.0).is_err());
        assert!(sys.scale(1.5).is_err());
    }

    #[test]
    fn degrees_below_one_rejected() {
        assert!(VectorFieldSystem::from_real(1, &[(&["1"], 0.5)]).is_err());
    }

    #[test]
    fn span_rank_examples() {
        assert_eq!(span_rank(&CMatrix::identity(3, 3), RANK_TOL).unwrap(), 3);
    }
}
