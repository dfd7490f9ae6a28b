//! Geometry documents: a TOML description of a vector field system, its
//! density, domain box and run defaults.
//!
//! ```toml
//! name = "elliptic"
//! coordinates = ["x", "y", "t"]   # optional
//!
//! [dimension]
//! r = 1                           # real coordinates t
//! n = 1                           # complex coordinates z = x + iy
//!
//! [[fields]]
//! name = "T"
//! kind = "real"
//! components = ["0", "0", "1"]
//! degree = 2
//!
//! [[fields]]
//! name = "L"
//! kind = "complex"
//! components = ["0.5", "0", "y"]  # real part
//! imaginary = ["0", "0.5", "-x"]
//! degree = 1
//!
//! density = "1"                   # optional, Lebesgue by default
//!
//! [domain]
//! lo = [-2, -2, -2]
//! hi = [2, 2, 2]
//!
//! [defaults]                      # all optional
//! seed = 7
//! steps = 256
//! samples = 20000
//! tol = 1e-3
//! ```
//!
//! Without `coordinates`, the names are x1, y1, .., xn, yn followed by
//! t1, .., tr, and each pair (xj, yj) is the complex coordinate zj.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Ambient, ComplexEntry, ComplexVectorField, RealEntry, VectorField, VectorFieldSystem};
use crate::flows::{Domain, FlowConfig};
use crate::volumes::Density;
use crate::zoo::{NamedGeometry, SingularLocus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dimension {
    pub r: usize,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Real,
    Complex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub name: String,
    pub kind: FieldKind,
    /// Components (the real part for complex fields).
    pub components: Vec<String>,
    /// Imaginary part; complex fields only, zero when omitted.
    #[serde(default)]
    pub imaginary: Option<Vec<String>>,
    #[serde(default = "one")]
    pub degree: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Defaults {
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub samples: Option<usize>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryDocument {
    #[serde(default)]
    pub name: Option<String>,
    pub dimension: Dimension,
    #[serde(default)]
    pub coordinates: Option<Vec<String>>,
    pub fields: Vec<FieldSpec>,
    #[serde(default)]
    pub density: Option<String>,
    pub domain: DomainBox,
    #[serde(default)]
    pub defaults: Defaults,
}

impl GeometryDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let doc: GeometryDocument = toml::from_str(text).map_err(|e| Error::Document(e.to_string()))?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Document(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Document(e.to_string()))
    }

    pub fn dim(&self) -> usize {
        self.dimension.r + 2 * self.dimension.n
    }

    fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if dim == 0 {
            return Err(Error::Document("dimension must be positive".into()));
        }
        if self.fields.is_empty() {
            return Err(Error::Document("at least one field is required".into()));
        }
        for f in &self.fields {
            if !(f.degree >= 1.0 && f.degree.is_finite()) {
                return Err(Error::Document(format!("field {}: degree must be at least 1", f.name)));
            }
            if f.components.len() != dim || f.imaginary.as_ref().is_some_and(|i| i.len() != dim) {
                return Err(Error::Document(format!("field {}: expected {dim} components", f.name)));
            }
            if f.kind == FieldKind::Real && f.imaginary.is_some() {
                return Err(Error::Document(format!("field {}: real fields have no imaginary part", f.name)));
            }
        }
        if self.domain.lo.len() != dim || self.domain.hi.len() != dim {
            return Err(Error::Document(format!("domain box must have {dim} entries per corner")));
        }
        if self.domain.lo.iter().zip(&self.domain.hi).any(|(a, b)| !(a < b)) {
            return Err(Error::Document("domain box needs lo < hi on every axis".into()));
        }
        if let Some(s) = self.defaults.steps {
            FlowConfig::new(s)?;
        }
        Ok(())
    }

    pub fn ambient(&self) -> Result<Ambient> {
        let Dimension { r, n } = self.dimension;
        let names = match &self.coordinates {
            Some(c) if c.len() != self.dim() => {
                return Err(Error::Document(format!("expected {} coordinate names", self.dim())));
            }
            Some(c) => c.clone(),
            None => (1..=n)
                .flat_map(|j| [format!("x{j}"), format!("y{j}")])
                .chain((1..=r).map(|k| format!("t{k}")))
                .collect(),
        };
        let pairs = (0..n).map(|j| (2 * j, 2 * j + 1)).collect();
        Ambient::new(names, (2 * n..2 * n + r).collect(), pairs).map_err(|e| Error::Document(e.to_string()))
    }

    pub fn system(&self) -> Result<VectorFieldSystem> {
        let amb = self.ambient()?;
        let field = |comps: &[String]| -> Result<VectorField> {
            VectorField::new(comps.iter().map(|c| amb.parse(c)).collect::<Result<_>>()?)
        };
        let mut real = Vec::new();
        let mut complex = Vec::new();
        for f in &self.fields {
            let re = field(&f.components).map_err(|e| Error::Document(format!("field {}: {e}", f.name)))?;
            match f.kind {
                FieldKind::Real => real.push(RealEntry {
                    name: f.name.clone(),
                    field: re,
                    degree: f.degree,
                }),
                FieldKind::Complex => {
                    let im = match &f.imaginary {
                        Some(i) => field(i).map_err(|e| Error::Document(format!("field {}: {e}", f.name)))?,
                        None => VectorField::zero(self.dim()),
                    };
                    complex.push(ComplexEntry {
                        name: f.name.clone(),
                        field: ComplexVectorField::new(re, im)?,
                        degree: f.degree,
                    });
                }
            }
        }
        VectorFieldSystem::new(amb, real, complex)
    }

    pub fn density(&self) -> Result<Density> {
        match &self.density {
            Some(text) => Density::parse(&self.ambient()?, text),
            None => Ok(Density::lebesgue(self.dim())),
        }
    }

    pub fn domain(&self) -> Domain {
        Domain::Box {
            lo: self.domain.lo.clone(),
            hi: self.domain.hi.clone(),
        }
    }

    pub fn geometry(&self) -> Result<NamedGeometry> {
        Ok(NamedGeometry {
            name: self.name.clone().unwrap_or_else(|| "document".into()),
            system: self.system()?,
            lo: self.domain.lo.clone(),
            hi: self.domain.hi.clone(),
            density: self.density()?,
            facts: Vec::new(),
            singular: SingularLocus::Nowhere,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ELLIPTIC: &str = r#"
name = "elliptic"
coordinates = ["x", "y", "t"]
density = "1 + t^2"

[dimension]
r = 1
n = 1

[[fields]]
name = "T"
kind = "real"
components = ["0", "0", "1"]
degree = 2

[[fields]]
name = "L"
kind = "complex"
components = ["0.5", "0", "y"]
imaginary = ["0", "0.5", "-x"]

[domain]
lo = [-2, -2, -2]
hi = [2, 2, 2]

[defaults]
seed = 7
"#;

    #[test]
    fn parses_and_matches_the_zoo() {
        let doc = GeometryDocument::parse(ELLIPTIC).unwrap();
        let g = doc.geometry().unwrap();
        let zoo = crate::zoo::get_geometry("heisenberg_elliptic").unwrap();
        let p = [0.3, -0.7, 0.1];
        assert_eq!(g.system.evaluate(&p).unwrap(), zoo.system.evaluate(&p).unwrap());
        assert_eq!(g.density.eval(&[0.0, 0.0, 2.0]).unwrap(), 5.0);
        assert_eq!(doc.defaults.seed, Some(7));
        assert_eq!(doc.fields[1].degree, 1.0);
        let again = GeometryDocument::parse(&doc.to_toml().unwrap()).unwrap();
        assert_eq!(again, doc);
    }

    #[test]
    fn default_coordinate_names() {
        let doc = GeometryDocument::parse(
            r#"
[dimension]
r = 1
n = 1
[[fields]]
name = "L"
kind = "complex"
components = ["0.5", "0", "y1"]
imaginary = ["0", "0.5", "-x1 + t1"]
[domain]
lo = [-1, -1, -1]
hi = [1, 1, 1]
"#,
        )
        .unwrap();
        let amb = doc.ambient().unwrap();
        assert_eq!(amb.names(), &["x1", "y1", "t1"]);
        assert_eq!(amb.real_coords(), &[2]);
        assert!(doc.system().is_ok());
    }

    #[test]
    fn rejects_bad_documents() {
        let bad = [
            ELLIPTIC.replace("degree = 2", "degree = 0.5"),
            ELLIPTIC.replace(r#"["0", "0", "1"]"#, r#"["0", "1"]"#),
            ELLIPTIC.replace("hi = [2, 2, 2]", "hi = [2, 2, -3]"),
            ELLIPTIC.replace("seed = 7", "sed = 7"),
            ELLIPTIC.replace(r#""-x""#, r#""-q""#),
        ];
        for text in &bad {
            let r = GeometryDocument::parse(text).and_then(|d| d.geometry());
            assert!(matches!(r, Err(Error::Document(_))), "{r:?}");
        }
    }
}
