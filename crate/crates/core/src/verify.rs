//! Self-verification suites: seeded end-to-end checks of the toolkit on the
//! example zoo, collected into a deterministic JSON report.
//!
//! Reports carry no timings or other run-dependent data, so the same seed
//! always produces byte-identical output.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::charts::{chart_at, chart_diagnostics, pullback_density};
use crate::error::{Error, Result};
use crate::fields::{lie_bracket, FieldFn};
use crate::flows::{halton, Domain, FlowConfig};
use crate::linalg::{CMatrix, CVector, RANK_TOL};
use crate::metrics::{certify_holomorphic_chain, distance_upper, DiskMap, DistanceOptions};
use crate::registry::{Named, Registry};
use crate::rng::item_rng;
use crate::spaces::{check_space_inequalities, lipschitz_quotient, random_trig_polynomial, zygmund_second_difference, GridFunction};
use crate::structure::{check_elliptic_pointwise, dimension_constancy, involutivity_residual};
use crate::volumes::{doubling_report, VolumeOptions};
use crate::wedge::{
    basis_equivalence, check_real_complex_bounds, dimension_formula, random_configuration, reconstruction_error,
    wedge_quotient_routes,
};
use crate::zoo::get_geometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    AtMost,
    AtLeast,
    Equal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            relation: Relation::AtMost,
            limit,
            passed: value <= limit,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            relation: Relation::AtLeast,
            limit,
            passed: value >= limit,
        }
    }

    pub fn equal(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            relation: Relation::Equal,
            limit,
            passed: value == limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    fn new(suite: &str, checks: Vec<Check>) -> Self {
        SuiteReport {
            suite: suite.into(),
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    }

    /// One line per check, for terminals.
    pub fn summary(&self) -> String {
        let mut s = format!("{} {}\n", if self.passed { "PASS" } else { "FAIL" }, self.suite);
        for c in &self.checks {
            let rel = match c.relation {
                Relation::AtMost => "<=",
                Relation::AtLeast => ">=",
                Relation::Equal => "==",
            };
            s += &format!(
                "  [{}] {}: {} {} {}\n",
                if c.passed { "ok" } else { "FAIL" },
                c.name,
                c.value,
                rel,
                c.limit
            );
        }
        s
    }
}

pub trait Suite: Named + Send + Sync {
    fn describe(&self) -> &str;
    fn run(&self, seed: u64) -> Result<SuiteReport>;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub passed: bool,
    pub suites: Vec<SuiteReport>,
}

impl VerifyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }
}

/// Run the named suites (all when `names` is empty) in registry order.
pub fn run_suites(names: &[String], seed: u64) -> Result<VerifyReport> {
    let reg = suites();
    let selected: Vec<&dyn Suite> = if names.is_empty() {
        reg.iter().collect()
    } else {
        names.iter().map(|n| reg.get(n)).collect::<Result<_>>()?
    };
    let suites = selected.iter().map(|s| s.run(seed)).collect::<Result<Vec<_>>>()?;
    Ok(VerifyReport {
        seed,
        passed: suites.iter().all(|s| s.passed),
        suites,
    })
}

pub fn suites() -> Registry<dyn Suite> {
    let mut r: Registry<dyn Suite> = Registry::new();
    let all: Vec<Box<dyn Suite>> = vec![
        Box::new(WedgeAlgebra),
        Box::new(RealComplexBounds),
        Box::new(SpaceConstants),
        Box::new(HeisenbergStructure),
        Box::new(Doubling),
        Box::new(DistanceScaling),
        Box::new(ZygmundLipschitz),
        Box::new(Charts),
        Box::new(HolomorphicCertificate),
    ];
    for s in all {
        r.register(s).expect("suite names are unique");
    }
    r
}

macro_rules! suite {
    ($ty:ident, $name:literal) => {
        pub struct $ty;
        impl Named for $ty {
            fn name(&self) -> &str {
                $name
            }
        }
    };
}

fn random_cmatrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

fn rel_gap(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1.0)
}

suite!(WedgeAlgebra, "wedge-algebra");
impl Suite for WedgeAlgebra {
    fn describe(&self) -> &str {
        "wedge quotients three ways, the dimension formula, basis equivalence and reconstruction"
    }

    fn run(&self, seed: u64) -> Result<SuiteReport> {
        // three routes to the same quotient on 1000 random instances
        let worst_quotient = (0..1000u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = item_rng(seed, 10, i);
                let d = rng.random_range(1..=6);
                let num = random_cmatrix(&mut rng, d, d);
                let den = random_cmatrix(&mut rng, d, d);
                let r = wedge_quotient_routes(&num, &den)?;
                Ok(rel_gap(r.coefficients, r.ratio_of_dets).max(rel_gap(r.coefficients, r.linear_map)))
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);

        let dims = (0..200u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = item_rng(seed, 11, i);
                let (n, r) = (rng.random_range(0..=2), rng.random_range(0..=2));
                let (n, r) = if n + r == 0 { (1, 0) } else { (n, r) };
                let dim = 2 * n + r + rng.random_range(0..=1);
                let cfg = random_configuration(&mut rng, n, r, r + 1, n + 1, dim);
                let (lhs, rhs) = dimension_formula(&cfg.complex_columns(), RANK_TOL)?;
                let cfg = random_configuration(&mut rng, n, r, r, n, dim);
                let (cb, rb) = basis_equivalence(&cfg.xs, &cfg.ls, &cfg.complex_columns(), RANK_TOL)?;
                Ok((lhs != rhs, cb != rb))
            })
            .collect::<Result<Vec<_>>>()?;

        let worst_reconstruction = (0..200u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = item_rng(seed, 12, i);
                let (n, r) = (rng.random_range(1..=2), rng.random_range(0..=2));
                let dim = 2 * n + r + rng.random_range(0..=1);
                let xs = DMatrix::from_fn(dim, r, |_, _| rng.random_range(-1.0..1.0));
                let ls = random_cmatrix(&mut rng, dim, n);
                let a: CVector = random_cmatrix(&mut rng, r, 1).column(0).into_owned();
                let b: CVector = random_cmatrix(&mut rng, n, 1).column(0).into_owned();
                let z = crate::linalg::to_complex(&xs) * a + &ls * b;
                Ok(reconstruction_error(&xs, &ls, &z)? / z.norm().max(1.0))
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);

        Ok(SuiteReport::new(
            self.name(),
            vec![
                Check::at_most("quotient routes disagree (relative, 1000 instances)", worst_quotient, 1e-10),
                Check::equal(
                    "dimension formula failures (200 spans)",
                    dims.iter().filter(|d| d.0).count() as f64,
                    0.0,
                ),
                Check::equal(
                    "basis equivalence disagreements (200 spans)",
                    dims.iter().filter(|d| d.1).count() as f64,
                    0.0,
                ),
                Check::at_most("reconstruction error (relative, 200 vectors)", worst_reconstruction, 1e-10),
            ],
        ))
    }
}

suite!(RealComplexBounds, "real-complex-bounds");
impl Suite for RealComplexBounds {
    fn describe(&self) -> &str {
        "explicit constants comparing complex and realified wedge quotients"
    }

    fn run(&self, seed: u64) -> Result<SuiteReport> {
        let reports = (0..500u64)
            .into_par_iter()
            .map(|i| {
                // resample degenerate draws deterministically
                for attempt in 0..64u64 {
                    let mut rng = item_rng(seed, 20, i * 64 + attempt);
                    let n = rng.random_range(0..=3);
                    let r = rng.random_range(0..=3);
                    if n + r == 0 {
                        continue;
                    }
                    let q = rng.random_range(r.max(1)..=5);
                    let m = rng.random_range(n.max(1)..=5);
                    let dim = 2 * n + r + rng.random_range(0..=1);
                    let cfg = random_configuration(&mut rng, n, r, q, m, dim);
                    match check_real_complex_bounds(&cfg) {
                        Ok(rep) => return Ok(rep),
                        Err(Error::Degenerate(_)) | Err(Error::Singular(_)) => continue,
                        Err(e) => return Err(e),
                    }
                }
                Err(Error::Degenerate("no admissible configuration drawn".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        let forward_violations = reports.iter().filter(|r| !r.forward_ok).count();
        let backward_violations = reports.iter().filter(|r| !r.backward_ok).count();
        let dim_failures = reports.iter().filter(|r| !r.dimension_formula_ok).count();
        Ok(SuiteReport::new(
            self.name(),
            vec![
                Check::equal("forward violations (500 configurations)", forward_violations as f64, 0.0),
                Check::equal("backward violations (500 configurations)", backward_violations as f64, 0.0),
                Check::equal("dimension formula failures", dim_failures as f64, 0.0),
                Check::at_most(
                    "worst forward ratio to the bound",
                    reports.iter().map(|r| r.forward_ratio).fold(0.0, f64::max),
                    1.0,
                ),
                Check::at_most(
                    "worst backward ratio to the bound",
                    reports.iter().map(|r| r.backward_ratio).fold(0.0, f64::max),
                    1.0,
                ),
            ],
        ))
    }
}

/// Grid resolution per axis for the function-space suite.
pub const SPACE_GRID: usize = 33;

suite!(SpaceConstants, "space-constants");
impl Suite for SpaceConstants {
    fn describe(&self) -> &str {
        "Hölder and Zygmund comparison constants 3, 5 and 15 on random trigonometric polynomials"
    }

    fn run(&self, seed: u64) -> Result<SuiteReport> {
        let functions = (0..100u64)
            .map(|i| {
                let mut rng = item_rng(seed, 30, i);
                let degree = rng.random_range(1..=4);
                GridFunction::uniform(random_trig_polynomial(&mut rng, 2, degree)?, -1.0, 1.0, SPACE_GRID)
            })
            .collect::<Result<Vec<_>>>()?;
        let rep = check_space_inequalities(&functions, &[(0, 0.5), (0, 1.0), (1, 0.5)])?;
        Ok(SuiteReport::new(
            self.name(),
            vec![
                Check::equal("violations (100 functions, 3 parameter pairs)", rep.violations as f64, 0.0),
                Check::at_most("worst lhs/rhs ratio", rep.worst_ratio, 1.0),
            ],
        ))
    }
}

suite!(HeisenbergStructure, "heisenberg-structure");
impl Suite for HeisenbergStructure {
    fn describe(&self) -> &str {
        "Heisenberg bracket, involutivity and ellipticity, and the singular dimension map"
    }

    fn run(&self, seed: u64) -> Result<SuiteReport> {
        let h = get_geometry("heisenberg")?;
        let (x, y) = (&h.system.real_fields()[0].field, &h.system.real_fields()[1].field);
        let br = lie_bracket(x, y)?;
        let points: Vec<Vec<f64>> = (0..50u64)
            .map(|i| {
                let mut rng = item_rng(seed, 40, i);
                (0..3).map(|_| rng.random_range(-2.0..2.0)).collect()
            })
            .collect();
        let mut bracket_err: f64 = 0.0;
        for p in &points {
            let v = br.value(p)?;
            bracket_err = bracket_err.max((v[0].powi(2) + v[1].powi(2) + (v[2] + 4.0).powi(2)).sqrt());
        }

        let mut involutive: f64 = 0.0;
        let mut elliptic_failures = 0;
        for name in ["heisenberg_graded", "heisenberg_elliptic"] {
            let g = get_geometry(name)?;
            for c in involutivity_residual(&g.system, &points, RANK_TOL)? {
                involutive = involutive.max(c.max_residual / c.scale);
            }
            for p in &points {
                let s = check_elliptic_pointwise(&g.system, p, 1e-6)?;
                if !(s.elliptic_ok && s.intersection_ok) {
                    elliptic_failures += 1;
                }
            }
        }

        let sing = get_geometry("singular_4_3")?;
        let ring: Vec<Vec<f64>> = (1..=32u64)
            .map(|i| {
                let u = halton(i, 2);
                let (r, th) = (0.1 + u[0], std::f64::consts::TAU * u[1]);
                vec![r * th.cos(), r * th.sin()]
            })
            .collect();
        let off = dimension_constancy(&sing.system, &ring, 1e-6)?;
        let at_origin = crate::linalg::rank(&sing.system.evaluate(&[0.0, 0.0])?, 1e-6)?;
        Ok(SuiteReport::new(
            self.name(),
            vec![
                Check::at_most("bracket error |[X, Y] + 4∂t| at 50 points", bracket_err, 1e-8),
                Check::at_most("involutivity residual (relative)", involutive, 1e-8),
                Check::equal("elliptic check failures", elliptic_failures as f64, 0.0),
                Check::equal(
                    "dimension off the origin",
                    if off.constant { off.typical as f64 } else { -1.0 },
                    2.0,
                ),
                Check::equal("dimension at the origin", at_origin as f64, 1.0),
            ],
        ))
    }
}

/// RK4 steps per unit time for the polynomial Heisenberg suites; RK4 is
/// exact on these fields, so the coarse step costs no accuracy.
pub const POLYNOMIAL_STEPS: usize = 16;

suite!(Doubling, "doubling");
impl Suite for Doubling {
    fn describe(&self) -> &str {
        "Monte Carlo ball volumes against Λ and doubling ratios on graded Heisenberg"
    }

    fn run(&self, seed: u64) -> Result<SuiteReport> {
        let g = get_geometry("heisenberg_graded")?;
        let deltas: Vec<f64> = (0..=5).rev().map(|k| 0.5f64.powi(k)).collect();
        let opts = VolumeOptions {
            seed,
            cfg: FlowConfig::new(POLYNOMIAL_STEPS)?,
            ..Default::default()
        };
        let rep = doubling_report(&g.system, &[0.0; 3], &deltas, &g.density, &opts, None)?;
        let doubling: Vec<f64> = rep.rows.iter().filter_map(|r| r.doubling).collect();
        Ok(SuiteReport::new(
            self.name(),
            vec![
                Check::at_most("max/min of volume/Λ", rep.ratio_spread, 8.0),
                Check::at_least("smallest doubling ratio", doubling.iter().copied().fold(f64::INFINITY, f64::min), 8.0),
                Check::at_most("largest doubling ratio", doubling.iter().copied().fold(0.0, f64::max), 32.0),
            ],
        ))
    }
}

/// Least-squares slope of ys against xs.
pub fn regression_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

suite!(DistanceScaling, "distance-scaling");
impl Suite for DistanceScaling {
    fn describe(&self) -> &str {
        "distance upper bounds scale like √t along the Heisenberg centre and match Euclidean distances"
    }

    fn run(&self, seed: u64) -> Result<SuiteReport> {
        let h = get_geometry("heisenberg")?;
        let opts = DistanceOptions {
            seed,
            cfg: FlowConfig::new(POLYNOMIAL_STEPS)?,
            ..Default::default()
        };
        let ts: Vec<f64> = (1..=5).map(|k| 0.25f64.powi(k)).collect();
        let ds = ts
            .par_iter()
            .map(|&t| {
                distance_upper(&h.system, &[0.0; 3], &[0.0, 0.0, t], &opts)?
                    .upper()
                    .ok_or_else(|| Error::Unreliable(format!("no upper bound found for t = {t}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let slope = regression_slope(
            &ts.iter().map(|t| t.ln()).collect::<Vec<_>>(),
            &ds.iter().map(|d| d.ln()).collect::<Vec<_>>(),
        );

        let e = get_geometry("euclidean2")?;
        let worst = (0..20u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = item_rng(seed, 60, i);
                let x: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
                let y: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
                let exact = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
                let got = distance_upper(&e.system, &x, &y, &opts)?
                    .upper()
                    .ok_or_else(|| Error::Unreliable("no Euclidean upper bound".into()))?;
                Ok((got / exact - 1.0).abs())
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        Ok(SuiteReport::new(
            self.name(),
            vec![
                Check::at_least("log-log slope (lower)", slope, 0.45),
                Check::at_most("log-log slope (upper)", slope, 0.55),
                Check::at_most("worst Euclidean relative error (20 pairs)", worst, 0.02),
            ],
        ))
    }
}

/// x log|x| with the removable value 0 at the origin.
pub const X_LOG_ABS_X: &str = "x1*log(sqrt(x1^2 + 1e-300))";

suite!(ZygmundLipschitz, "zygmund-lipschitz");
impl Suite for ZygmundLipschitz {
    fn describe(&self) -> &str {
        "x log|x|: Lipschitz quotient under refinement against the stable second-difference part"
    }

    fn run(&self, _seed: u64) -> Result<SuiteReport> {
        let f = crate::expr::parse_expression(X_LOG_ABS_X, 1)?;
        let coarse = GridFunction::uniform(f.clone(), -1.0, 1.0, (1 << 8) + 1)?;
        let fine = GridFunction::uniform(f, -1.0, 1.0, (1 << 12) + 1)?;
        let growth = lipschitz_quotient(&fine)? / lipschitz_quotient(&coarse)?;
        let (zc, zf) = (zygmund_second_difference(&coarse, 1.0)?, zygmund_second_difference(&fine, 1.0)?);
        Ok(SuiteReport::new(
            self.name(),
            vec![
                Check::at_least("Lipschitz quotient growth 2^8 → 2^12", growth, 2.0),
                Check::at_most("relative change of the second-difference part", (zf / zc - 1.0).abs(), 0.1),
                Check::at_most("second-difference part on the fine grid", zf, 3.0),
            ],
        ))
    }
}

suite!(Charts, "charts");
impl Suite for Charts {
    fn describe(&self) -> &str {
        "exponential charts of Heisenberg at dyadic scales: 𝒜(0), pullback sizes, spanning and density"
    }

    fn run(&self, _seed: u64) -> Result<SuiteReport> {
        let g = get_geometry("heisenberg_bracket")?;
        let cfg = FlowConfig::new(POLYNOMIAL_STEPS)?;
        let rows = (0..=5)
            .into_par_iter()
            .map(|k| {
                let delta = 0.5f64.powi(k);
                let c = chart_at(&g.system, &[0.0; 3], delta, &Domain::Everywhere, &cfg)?;
                let d = chart_diagnostics(&c, 128)?;
                let h = pullback_density(&c, &g.density, 128)?;
                Ok((
                    d.a_at_0_max,
                    d.pullback_c0_norms.iter().map(|p| p.1).fold(0.0, f64::max),
                    d.spanning_det_min,
                    h.ratio_max_min,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SuiteReport::new(
            self.name(),
            vec![
                Check::at_most("|𝒜(0)|", rows.iter().map(|r| r.0).fold(0.0, f64::max), 1e-8),
                Check::at_most("pullback C⁰ norm", rows.iter().map(|r| r.1).fold(0.0, f64::max), 5.0),
                Check::at_least("spanning determinant", rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min), 0.1),
                Check::at_most("density pullback max/min", rows.iter().map(|r| r.3).fold(0.0, f64::max), 1.01),
            ],
        ))
    }
}

suite!(HolomorphicCertificate, "holomorphic-certificate");
impl Suite for HolomorphicCertificate {
    fn describe(&self) -> &str {
        "certify ρ_H(0, 0.2) ≤ 1 on ℂ by f(ζ) = 0.9ζ and compare with the distance upper bound"
    }

    fn run(&self, seed: u64) -> Result<SuiteReport> {
        let g = get_geometry("complex_plane")?;
        let map = DiskMap::holomorphic(vec![vec![Complex64::new(0.0, 0.0), Complex64::new(0.9, 0.0)]]);
        let cert = certify_holomorphic_chain(&g.system, &[map], &[1.0], &[0.0, 0.0], &[0.2, 0.0])?;
        let opts = DistanceOptions {
            seed,
            ..Default::default()
        };
        let d = distance_upper(&g.system, &[0.0, 0.0], &[0.2, 0.0], &opts)?
            .upper()
            .unwrap_or(f64::INFINITY);
        Ok(SuiteReport::new(
            self.name(),
            vec![
                Check::equal("certified", if cert.certified { 1.0 } else { 0.0 }, 1.0),
                Check::at_most("certified bound", cert.bound, 1.0),
                Check::at_most("distance upper bound", d, cert.bound + 1e-3),
            ],
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lists_suites_in_order() {
        let reg = suites();
        let names = reg.names();
        assert_eq!(names.first(), Some(&"wedge-algebra"));
        assert_eq!(names.len(), 9);
        assert!(run_suites(&["nope".into()], 0).is_err());
    }

    #[test]
    fn slope_of_a_power_law() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 * x + 1.0).collect();
        assert!((regression_slope(&xs, &ys) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn fast_suites_pass_and_are_reproducible() {
        let names: Vec<String> = ["wedge-algebra", "heisenberg-structure", "holomorphic-certificate"]
            .map(String::from)
            .to_vec();
        let a = run_suites(&names, 7).unwrap();
        let b = run_suites(&names, 7).unwrap();
        assert!(a.passed, "{}", a.to_json());
        assert_eq!(a.to_json(), b.to_json());
    }
}
