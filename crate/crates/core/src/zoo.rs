//! Built-in example geometries, looked up by name.

use serde::Serialize;

use crate::error::Result;
use crate::fields::{Ambient, ComplexEntry, ComplexVectorField, RealEntry, VectorField, VectorFieldSystem};
use crate::registry::{Named, Registry};
use crate::volumes::Density;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Justification {
    /// Immediate from the definitions.
    Definition,
    /// Short hand computation, checked independently in the tests.
    Computation,
    /// Stated in the literature the geometry comes from.
    Published,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fact {
    pub statement: &'static str,
    pub justification: Justification,
}

/// Where a geometry is allowed to fail involutivity or constant rank.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SingularLocus {
    Nowhere,
    /// The fields are not meant to be involutive (a bracket-generating frame).
    Everywhere,
    Point { at: Vec<f64> },
    /// The hyperplane where coordinate `axis` equals `value`.
    Hyperplane { axis: usize, value: f64 },
}

impl SingularLocus {
    /// Whether p lies within `radius` of the locus.
    pub fn near(&self, p: &[f64], radius: f64) -> bool {
        match self {
            SingularLocus::Nowhere => false,
            SingularLocus::Everywhere => true,
            SingularLocus::Point { at } => at.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() < radius,
            SingularLocus::Hyperplane { axis, value } => (p[*axis] - value).abs() < radius,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NamedGeometry {
    pub name: String,
    pub system: VectorFieldSystem,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub density: Density,
    pub facts: Vec<Fact>,
    pub singular: SingularLocus,
}

pub trait GeometryFactory: Named + Send + Sync {
    fn summary(&self) -> &str;
    fn build(&self) -> Result<NamedGeometry>;
}

struct Entry {
    name: &'static str,
    summary: &'static str,
    build: fn() -> Result<NamedGeometry>,
}

impl Named for Entry {
    fn name(&self) -> &str {
        self.name
    }
}

impl GeometryFactory for Entry {
    fn summary(&self) -> &str {
        self.summary
    }
    fn build(&self) -> Result<NamedGeometry> {
        (self.build)()
    }
}

fn real_field(amb: &Ambient, comps: &[&str]) -> Result<VectorField> {
    VectorField::new(comps.iter().map(|c| amb.parse(c)).collect::<Result<_>>()?)
}

fn complex_field(amb: &Ambient, re: &[&str], im: &[&str]) -> Result<ComplexVectorField> {
    ComplexVectorField::new(real_field(amb, re)?, real_field(amb, im)?)
}

fn real(amb: &Ambient, name: &str, comps: &[&str], degree: f64) -> Result<RealEntry> {
    Ok(RealEntry {
        name: name.into(),
        field: real_field(amb, comps)?,
        degree,
    })
}

fn complex(amb: &Ambient, name: &str, re: &[&str], im: &[&str], degree: f64) -> Result<ComplexEntry> {
    Ok(ComplexEntry {
        name: name.into(),
        field: complex_field(amb, re, im)?,
        degree,
    })
}

fn boxed(dim: usize, half: f64) -> (Vec<f64>, Vec<f64>) {
    (vec![-half; dim], vec![half; dim])
}

fn geometry(
    name: &str,
    system: VectorFieldSystem,
    half: f64,
    facts: Vec<Fact>,
) -> Result<NamedGeometry> {
    let dim = system.dim();
    let (lo, hi) = boxed(dim, half);
    Ok(NamedGeometry {
        name: name.into(),
        system,
        lo,
        hi,
        density: Density::lebesgue(dim),
        facts,
        singular: SingularLocus::Nowhere,
    })
}

fn fact(statement: &'static str, justification: Justification) -> Fact {
    Fact {
        statement,
        justification,
    }
}

fn xyz(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn euclidean(n: usize) -> Result<VectorFieldSystem> {
    let amb = Ambient::real(n);
    let fields = (0..n)
        .map(|j| {
            let comps: Vec<&str> = (0..n).map(|i| if i == j { "1" } else { "0" }).collect();
            real(&amb, &format!("d{}", j + 1), &comps, 1.0)
        })
        .collect::<Result<_>>()?;
    VectorFieldSystem::new(amb, fields, vec![])
}

fn heisenberg_ambient() -> Result<Ambient> {
    Ambient::new(xyz(&["x", "y", "t"]), vec![2], vec![(0, 1)])
}

fn heisenberg_xy(amb: &Ambient) -> Result<Vec<RealEntry>> {
    Ok(vec![
        real(amb, "X", &["1", "0", "2*y"], 1.0)?,
        real(amb, "Y", &["0", "1", "-2*x"], 1.0)?,
    ])
}

fn euclidean2() -> Result<NamedGeometry> {
    geometry(
        "euclidean2",
        euclidean(2)?,
        2.0,
        vec![fact("coordinate frame; balls are Euclidean disks", Justification::Definition)],
    )
}

fn euclidean3() -> Result<NamedGeometry> {
    geometry(
        "euclidean3",
        euclidean(3)?,
        2.0,
        vec![fact("coordinate frame; balls are Euclidean balls", Justification::Definition)],
    )
}

fn heisenberg() -> Result<NamedGeometry> {
    let amb = heisenberg_ambient()?;
    let sys = VectorFieldSystem::new(amb.clone(), heisenberg_xy(&amb)?, vec![])?;
    geometry(
        "heisenberg",
        sys,
        2.0,
        vec![
            fact("X = 2Re L and Y = 2Im L for L = ∂z̄ − iz∂t", Justification::Computation),
            fact("[X, Y] = −4∂t", Justification::Computation),
            fact("exp(aX + bY)(0) = (a, b, 0)", Justification::Computation),
        ],
    )
    .map(|g| NamedGeometry {
        singular: SingularLocus::Everywhere,
        ..g
    })
}

fn heisenberg_graded() -> Result<NamedGeometry> {
    let amb = heisenberg_ambient()?;
    let mut fields = heisenberg_xy(&amb)?;
    fields.push(real(&amb, "T", &["0", "0", "1"], 2.0)?);
    let sys = VectorFieldSystem::new(amb, fields, vec![])?;
    geometry(
        "heisenberg_graded",
        sys,
        2.0,
        vec![
            fact("Λ(0, δ) = δ⁴ with Lebesgue density", Justification::Computation),
            fact("balls are dilates: ν(B(0, 2δ)) = 16 ν(B(0, δ))", Justification::Computation),
        ],
    )
}

fn heisenberg_bracket() -> Result<NamedGeometry> {
    let amb = heisenberg_ambient()?;
    let mut fields = heisenberg_xy(&amb)?;
    fields.push(real(&amb, "[X,Y]", &["0", "0", "-4"], 2.0)?);
    let sys = VectorFieldSystem::new(amb, fields, vec![])?;
    geometry(
        "heisenberg_bracket",
        sys,
        2.0,
        vec![fact(
            "exponential chart at 0: (a, b, c) ↦ (δa, δb, −4δ²c) before normalization",
            Justification::Computation,
        )],
    )
}

fn heisenberg_elliptic() -> Result<NamedGeometry> {
    let amb = heisenberg_ambient()?;
    let t = real(&amb, "T", &["0", "0", "1"], 2.0)?;
    let l = complex(&amb, "L", &["0.5", "0", "y"], &["0", "0.5", "-x"], 1.0)?;
    let sys = VectorFieldSystem::new(amb, vec![t], vec![l])?;
    geometry(
        "heisenberg_elliptic",
        sys,
        2.0,
        vec![fact(
            "span{L, ∂t} is an elliptic structure with dim 𝓛 = 2 and dim 𝓧 = 1",
            Justification::Computation,
        )],
    )
}

fn complex_plane() -> Result<NamedGeometry> {
    let amb = Ambient::new(xyz(&["x", "y"]), vec![], vec![(0, 1)])?;
    let l = complex(&amb, "L", &["0.5", "0"], &["0", "0.5"], 1.0)?;
    let sys = VectorFieldSystem::new(amb, vec![], vec![l])?;
    geometry(
        "complex_plane",
        sys,
        2.0,
        vec![fact("L = ∂z̄ realifies to (∂x, ∂y)", Justification::Definition)],
    )
}

fn singular_4_3() -> Result<NamedGeometry> {
    let amb = Ambient::new(xyz(&["x", "y"]), vec![], vec![(0, 1)])?;
    let x1 = real(&amb, "X1", &["x", "y"], 1.0)?;
    let x2 = real(&amb, "X2", &["y", "-x"], 1.0)?;
    let l1 = complex(&amb, "L1", &["0.5", "0"], &["0", "-0.5"], 1.0)?;
    let l2 = complex(&amb, "L2", &["x/2", "y/2"], &["-y/2", "x/2"], 1.0)?;
    let sys = VectorFieldSystem::new(amb, vec![x1, x2], vec![l1, l2])?;
    geometry(
        "singular_4_3",
        sys,
        1.5,
        vec![
            fact("L1 = ∂z, L2 = z̄∂z̄, X1 = z∂z + z̄∂z̄, X2 = (z∂z − z̄∂z̄)/i", Justification::Published),
            fact("dim span{L1, L2, X1, X2} is 2 off the origin and 1 at it", Justification::Published),
        ],
    )
    .map(|g| NamedGeometry {
        singular: SingularLocus::Point { at: vec![0.0, 0.0] },
        ..g
    })
}

fn grushin() -> Result<NamedGeometry> {
    let amb = Ambient::real(2);
    let fields = vec![
        real(&amb, "X", &["1", "0"], 1.0)?,
        real(&amb, "Y", &["0", "x1"], 2.0)?,
    ];
    let sys = VectorFieldSystem::new(amb, fields, vec![])?;
    geometry(
        "grushin",
        sys,
        2.0,
        vec![
            fact("[∂x, x∂y] = ∂y, outside the span on the line x = 0", Justification::Computation),
            fact("the span drops to dimension 1 on x = 0", Justification::Computation),
        ],
    )
    .map(|g| NamedGeometry {
        singular: SingularLocus::Hyperplane { axis: 0, value: 0.0 },
        ..g
    })
}

pub fn zoo() -> Registry<dyn GeometryFactory> {
    let entries: [(&'static str, &'static str, fn() -> Result<NamedGeometry>); 9] = [
        ("euclidean2", "coordinate frame on ℝ²", euclidean2),
        ("euclidean3", "coordinate frame on ℝ³", euclidean3),
        ("heisenberg", "realified Heisenberg frame X, Y on ℝ³", heisenberg),
        ("heisenberg_graded", "X, Y of degree 1 and ∂t of degree 2", heisenberg_graded),
        ("heisenberg_bracket", "X, Y of degree 1 and [X, Y] of degree 2", heisenberg_bracket),
        ("heisenberg_elliptic", "elliptic structure span{L, ∂t} on ℂ × ℝ", heisenberg_elliptic),
        ("complex_plane", "L = ∂z̄ on ℂ", complex_plane),
        ("singular_4_3", "fields on ℂ whose complex span drops at the origin", singular_4_3),
        ("grushin", "∂x and x∂y with degrees 1 and 2", grushin),
    ];
    let mut r: Registry<dyn GeometryFactory> = Registry::new();
    for (name, summary, build) in entries {
        r.register(Box::new(Entry { name, summary, build }))
            .expect("zoo names are unique");
    }
    r
}

pub fn get_geometry(name: &str) -> Result<NamedGeometry> {
    zoo().get(name)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{lie_bracket, span_rank, FieldFn};
    use crate::linalg::RANK_TOL;

    #[test]
    fn every_entry_builds() {
        for g in zoo().iter() {
            let geo = g.build().unwrap();
            assert_eq!(geo.name, g.name());
            assert_eq!(geo.lo.len(), geo.system.dim());
        }
    }

    #[test]
    fn unknown_name_is_an_error() {
        assert!(get_geometry("sphere").is_err());
    }

    #[test]
    fn heisenberg_bracket_is_vertical() {
        let g = get_geometry("heisenberg").unwrap();
        let f = g.system.real_fields();
        let b = lie_bracket(&f[0].field, &f[1].field).unwrap();
        let v = b.value(&[0.3, -0.7, 1.1]).unwrap();
        assert!((v[0]).abs() + v[1].abs() + (v[2] + 4.0).abs() < 1e-12);
    }

    #[test]
    fn elliptic_form_realifies_to_graded_frame() {
        let a = get_geometry("heisenberg_elliptic").unwrap().system.realify();
        let b = get_geometry("heisenberg_graded").unwrap().system;
        let p = [0.4, -0.2, 0.9];
        let fa = a.real_frame(&p).unwrap();
        let fb = b.real_frame(&p).unwrap();
        // (T, X, Y) against (X, Y, T)
        for (i, j) in [(0, 2), (1, 0), (2, 1)] {
            assert!((fa.column(i) - fb.column(j)).norm() < 1e-14);
        }
    }

    #[test]
    fn singular_span_drops_at_origin() {
        let s = get_geometry("singular_4_3").unwrap().system;
        assert_eq!(span_rank(&s.evaluate(&[0.0, 0.0]).unwrap(), RANK_TOL).unwrap(), 1);
        assert_eq!(span_rank(&s.evaluate(&[1.0, 0.0]).unwrap(), RANK_TOL).unwrap(), 2);
    }
}
