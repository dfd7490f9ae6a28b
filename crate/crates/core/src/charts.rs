//! Exponential scaling charts u ↦ e^{u·W_P/K} x0 and their diagnostics:
//! pullback frames, the matrix 𝒜 in ∂u = K^{-1}(I + 𝒜) Φ*W_P, how far the
//! pullbacks are from an E-chart, ball containments and density pullbacks.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{ComplexVectorField, RealEntry, VectorField, VectorFieldSystem};
use crate::flows::{check_condition_c, exp_map, halton_ball, Domain, FlowConfig};
use crate::linalg::{combinations, real_det, select_columns};
use crate::metrics::{sample_ball_with, BallOptions};
use crate::rng::item_rng;
use crate::volumes::Density;
use crate::wedge::{select_basis, BasisSelection};

/// Central-difference step for the chart differential (chart coordinates
/// live in the unit ball).
pub const DIFF_STEP: f64 = 1e-5;
/// Endpoint gap accepted when inverting the chart.
pub const INVERSION_GAP: f64 = 1e-4;
const STREAM_AMBIENT: u64 = 3;

#[derive(Debug, Clone)]
pub struct Chart {
    base: Vec<f64>,
    selection: BasisSelection,
    delta: f64,
    scale: f64,
    /// δ-scaled system with every degree reset to one.
    system: VectorFieldSystem,
    /// Selected realified fields divided by K.
    selected: VectorFieldSystem,
    domain: Domain,
    cfg: FlowConfig,
}

/// The system δ^{d_j} W_j regarded as a single-parameter family (all degrees one).
pub fn scaled_unit_system(sys: &VectorFieldSystem, delta: f64) -> Result<VectorFieldSystem> {
    let s = sys.scale_unchecked(delta);
    let real = s
        .real_fields()
        .iter()
        .map(|e| RealEntry {
            degree: 1.0,
            ..e.clone()
        })
        .collect();
    let complex = s
        .complex_fields()
        .iter()
        .map(|e| crate::fields::ComplexEntry {
            degree: 1.0,
            ..e.clone()
        })
        .collect();
    VectorFieldSystem::new(s.ambient().clone(), real, complex)
}

/// Chart at x0 for the δ-scaled system, using the selected basis of its
/// realified frame. K is the largest selected column norm at x0, floored at 1.
pub fn exponential_chart(
    sys: &VectorFieldSystem,
    x0: &[f64],
    selection: &BasisSelection,
    delta: f64,
    domain: &Domain,
    cfg: &FlowConfig,
) -> Result<Chart> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument("delta must be positive".into()));
    }
    let system = scaled_unit_system(sys, delta)?;
    let real = system.realify();
    let n = real.dim();
    if selection.p0.len() != n {
        return Err(Error::Degenerate(format!(
            "selection spans {} directions in a {n}-dimensional space",
            selection.p0.len()
        )));
    }
    if let Some(&bad) = selection.p0.iter().find(|&&i| i >= real.q()) {
        return Err(Error::InvalidArgument(format!("selected index {bad} out of range")));
    }
    let frame = select_columns(&real.real_frame(x0)?, &selection.p0);
    if real_det(&frame).abs() <= 1e-14 * frame.norm().powi(n as i32).max(1e-300) {
        return Err(Error::Singular("selected fields are dependent at the base point".into()));
    }
    let scale = frame.column_iter().map(|c| c.norm()).fold(1.0, f64::max);
    let entries = selection
        .p0
        .iter()
        .map(|&i| {
            let e = &real.real_fields()[i];
            RealEntry {
                name: e.name.clone(),
                field: e.field.scaled(1.0 / scale),
                degree: 1.0,
            }
        })
        .collect();
    let selected = VectorFieldSystem::new(real.ambient().clone(), entries, Vec::new())?;
    let report = check_condition_c(&selected, x0, 1.0, domain, cfg)?;
    if !report.holds {
        return Err(Error::ConditionC {
            witness: report.witness.unwrap_or_default(),
        });
    }
    Ok(Chart {
        base: x0.to_vec(),
        selection: selection.clone(),
        delta,
        scale,
        system,
        selected,
        domain: domain.clone(),
        cfg: *cfg,
    })
}

/// Chart with the maximal basis selection of the δ-scaled system at x0.
pub fn chart_at(sys: &VectorFieldSystem, x0: &[f64], delta: f64, domain: &Domain, cfg: &FlowConfig) -> Result<Chart> {
    let selection = select_basis(&scaled_unit_system(sys, delta)?, x0)?;
    exponential_chart(sys, x0, &selection, delta, domain, cfg)
}

impl Chart {
    pub fn dim(&self) -> usize {
        self.base.len()
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn basis_indices(&self) -> &[usize] {
        &self.selection.p0
    }

    pub fn selection(&self) -> &BasisSelection {
        &self.selection
    }

    /// K ≥ 1.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// The δ-scaled system the chart straightens.
    pub fn system(&self) -> &VectorFieldSystem {
        &self.system
    }

    /// The selected realified fields divided by K (the chart's generators).
    pub fn generators(&self) -> &VectorFieldSystem {
        &self.selected
    }

    pub fn map(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.dim() {
            return Err(Error::Dimension("chart coordinates have the wrong length".into()));
        }
        exp_map(&self.selected, &self.base, u, &self.domain, &self.cfg)
    }

    /// dΦ(u) by central differences.
    pub fn differential(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut up = u.to_vec();
            let mut dn = u.to_vec();
            up[i] += DIFF_STEP;
            dn[i] -= DIFF_STEP;
            let (a, b) = (self.map(&up)?, self.map(&dn)?);
            for k in 0..n {
                d[(k, i)] = (a[k] - b[k]) / (2.0 * DIFF_STEP);
            }
        }
        Ok(d)
    }

    /// Newton inversion of Φ starting from `guess`; `None` unless the gap
    /// drops below `INVERSION_GAP` with |u| < 1.
    pub fn invert(&self, y: &[f64], guess: &[f64]) -> Result<Option<Vec<f64>>> {
        let mut u = guess.to_vec();
        let mut gap = f64::INFINITY;
        for it in 0..40 {
            // Newton has settled outside the chart domain
            if it >= 8 && norm(&u) > 1.05 {
                break;
            }
            let x = match self.map(&u) {
                Ok(x) => x,
                Err(Error::DomainEscape { .. }) | Err(Error::NonFinite { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let r = DVector::from_iterator(x.len(), x.iter().zip(y).map(|(a, b)| a - b));
            gap = r.norm();
            if gap <= INVERSION_GAP * 1e-3 {
                break;
            }
            let step = match self.differential(&u)?.lu().solve(&r) {
                Some(s) => s,
                None => return Ok(None),
            };
            // keep Newton inside a slightly enlarged chart domain
            let mut t = 1.0;
            let next = loop {
                let cand: Vec<f64> = u.iter().zip(step.iter()).map(|(a, s)| a - t * s).collect();
                if norm(&cand) < 1.5 || t < 1e-3 {
                    break cand;
                }
                t *= 0.5;
            };
            u = next;
        }
        Ok((gap <= INVERSION_GAP && norm(&u) < 1.0).then_some(u))
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solution of dΦ(u) v = w at one chart point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pullback {
    pub vector: Vec<f64>,
    pub det: f64,
    pub residual: f64,
}

fn solve_pullback(d: &DMatrix<f64>, w: &DVector<f64>) -> Result<Pullback> {
    let det = d.determinant();
    if det == 0.0 || !det.is_finite() {
        return Err(Error::Singular("chart differential is singular".into()));
    }
    let v = d
        .clone()
        .lu()
        .solve(w)
        .ok_or_else(|| Error::Singular("chart differential is singular".into()))?;
    let residual = (d * &v - w).norm() / w.norm().max(1.0);
    if residual > 1e-8 {
        return Err(Error::Singular(format!("pullback solve residual {residual:e}")));
    }
    Ok(Pullback {
        vector: v.iter().copied().collect(),
        det,
        residual,
    })
}

/// Φ*W at u: the v with dΦ(u) v = W(Φ(u)).
pub fn pullback_field(chart: &Chart, field: &VectorField, u: &[f64]) -> Result<Pullback> {
    let x = chart.map(u)?;
    let mut w = vec![0.0; chart.dim()];
    field.eval_into(&x, &mut w)?;
    solve_pullback(&chart.differential(u)?, &DVector::from_vec(w))
}

/// Φ*L at u for a complex field, as (re, im) chart components.
pub fn pullback_complex_field(chart: &Chart, field: &ComplexVectorField, u: &[f64]) -> Result<Vec<Complex64>> {
    let re = pullback_field(chart, &field.re, u)?;
    let im = pullback_field(chart, &field.im, u)?;
    Ok(re.vector.iter().zip(&im.vector).map(|(a, b)| Complex64::new(*a, *b)).collect())
}

/// Pullbacks of every realified field of the chart's system at u, as columns.
pub fn pullback_frame(chart: &Chart, u: &[f64]) -> Result<DMatrix<f64>> {
    let x = chart.map(u)?;
    let w = chart.system.realify().real_frame(&x)?;
    let d = chart.differential(u)?;
    if d.determinant().abs() < 1e-300 {
        return Err(Error::Singular("chart differential is singular".into()));
    }
    let lu = d.clone().lu();
    let f = lu
        .solve(&w)
        .ok_or_else(|| Error::Singular("chart differential is singular".into()))?;
    Ok(f)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Radii {
    /// Φ(B(1)) lies in the ball of the selected fields of this radius (1/K).
    pub chi: f64,
    /// Largest passing radius for balls of the selected fields.
    pub xi1: Option<f64>,
    /// Largest passing radius for balls of all fields.
    pub xi2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChartDiagnostics {
    pub k: f64,
    /// Sample points in the unit ball, the origin first.
    pub samples: Vec<Vec<f64>>,
    /// 𝒜(u) at each sample (row-major rows).
    pub a_field: Vec<Vec<Vec<f64>>>,
    /// Largest entry of |𝒜| over the samples.
    pub sup_a: f64,
    pub a_at_0: Vec<Vec<f64>>,
    pub a_at_0_max: f64,
    /// Largest component of Φ*X_k outside span{∂t} and of Φ*L_j along ∂z.
    pub e_span_residual: f64,
    /// (field name, sup over samples of |Φ*W|).
    pub pullback_c0_norms: Vec<(String, f64)>,
    /// min over samples of the largest |det| of n pulled-back fields.
    pub spanning_det_min: f64,
    pub radii: Option<Radii>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

struct SampleDiag {
    a: DMatrix<f64>,
    e_span: f64,
    col_norms: Vec<f64>,
    spanning_det: f64,
}

fn diagnose_at(chart: &Chart, u: &[f64]) -> Result<SampleDiag> {
    let f = pullback_frame(chart, u)?;
    let n = chart.dim();
    let sel = select_columns(&f, &chart.selection.p0);
    let inv_t = sel
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("pulled-back selected frame is singular".into()))?
        .transpose();
    let a = inv_t * chart.scale - DMatrix::identity(n, n);

    // chart coordinates (t_1..t_r, a_1..a_n, b_1..b_n) with z = a + ib
    let r = chart.selection.dim_x;
    let nc = chart.selection.dim_l - r;
    let (q, m) = (chart.system.q(), chart.system.m());
    let mut e_span: f64 = 0.0;
    for k in 0..q {
        let off: f64 = (r..n).map(|i| f[(i, k)].powi(2)).sum::<f64>().sqrt();
        e_span = e_span.max(off);
    }
    for j in 0..m {
        // L = (2Re L + i 2Im L) / 2; the ∂z component is v_a + i v_b
        let v = |i: usize| Complex64::new(f[(i, q + j)], f[(i, q + m + j)]) * 0.5;
        let off: f64 = (0..nc)
            .map(|c| (v(r + c) + Complex64::i() * v(r + nc + c)).norm_sqr())
            .sum::<f64>()
            .sqrt();
        e_span = e_span.max(off);
    }
    let spanning_det = combinations(f.ncols(), n)
        .iter()
        .map(|idx| real_det(&select_columns(&f, idx)).abs())
        .fold(0.0, f64::max);
    Ok(SampleDiag {
        a,
        e_span,
        col_norms: f.column_iter().map(|c| c.norm()).collect(),
        spanning_det,
    })
}

/// Diagnostics at the origin and `samples` deterministic points of the unit ball.
pub fn chart_diagnostics(chart: &Chart, samples: usize) -> Result<ChartDiagnostics> {
    let n = chart.dim();
    let mut pts = vec![vec![0.0; n]];
    pts.extend(halton_ball(samples, n).into_iter().map(|p| p.into_iter().map(|v| v * 0.99).collect()));
    let diags: Vec<SampleDiag> = pts.par_iter().map(|u| diagnose_at(chart, u)).collect::<Result<_>>()?;
    let names: Vec<String> = chart.system.realify().real_fields().iter().map(|e| e.name.clone()).collect();
    let pullback_c0_norms = names
        .iter()
        .enumerate()
        .map(|(j, name)| (name.clone(), diags.iter().map(|d| d.col_norms[j]).fold(0.0, f64::max)))
        .collect();
    Ok(ChartDiagnostics {
        k: chart.scale,
        a_field: diags.iter().map(|d| rows(&d.a)).collect(),
        sup_a: diags.iter().map(|d| max_abs(&d.a)).fold(0.0, f64::max),
        a_at_0: rows(&diags[0].a),
        a_at_0_max: max_abs(&diags[0].a),
        e_span_residual: diags.iter().map(|d| d.e_span).fold(0.0, f64::max),
        pullback_c0_norms,
        spanning_det_min: diags.iter().map(|d| d.spanning_det).fold(f64::INFINITY, f64::min),
        radii: None,
        samples: pts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityPullback {
    pub samples: Vec<Vec<f64>>,
    /// h(u) = g(Φ(u)) |det dΦ(u)|.
    pub values: Vec<f64>,
    pub ratio_max_min: f64,
    /// det dΦ kept one sign over the samples.
    pub sign_constant: bool,
}

impl DensityPullback {
    pub fn to_csv(&self) -> String {
        let n = self.samples.first().map_or(0, |s| s.len());
        let mut out: Vec<String> = (1..=n).map(|i| format!("u{i}")).collect();
        out.push("h".into());
        let mut csv = out.join(",") + "\n";
        for (u, h) in self.samples.iter().zip(&self.values) {
            let mut row: Vec<String> = u.iter().map(|v| format!("{v:?}")).collect();
            row.push(format!("{h:?}"));
            csv += &(row.join(",") + "\n");
        }
        csv
    }
}

pub fn pullback_density(chart: &Chart, nu: &Density, samples: usize) -> Result<DensityPullback> {
    let n = chart.dim();
    let mut pts = vec![vec![0.0; n]];
    pts.extend(halton_ball(samples, n));
    let vals: Vec<(f64, f64)> = pts
        .par_iter()
        .map(|u| {
            let det = chart.differential(u)?.determinant();
            if det == 0.0 {
                return Err(Error::Singular("chart differential is singular".into()));
            }
            Ok((nu.eval(&chart.map(u)?)? * det.abs(), det.signum()))
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = vals.iter().map(|v| v.0).collect();
    let max = values.iter().copied().fold(0.0, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(DensityPullback {
        sign_constant: vals.iter().all(|v| v.1 == vals[0].1),
        ratio_max_min: max / min,
        values,
        samples: pts,
    })
}

/// Chart image point cloud (u, Φ(u)) over deterministic ball samples.
pub fn chart_image(chart: &Chart, samples: usize) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    halton_ball(samples, chart.dim())
        .into_par_iter()
        .map(|u| Ok((u.clone(), chart.map(&u)?)))
        .collect()
}

pub fn chart_image_csv(points: &[(Vec<f64>, Vec<f64>)]) -> String {
    let n = points.first().map_or(0, |p| p.0.len());
    let mut head: Vec<String> = (1..=n).map(|i| format!("u{i}")).collect();
    head.extend((1..=n).map(|i| format!("x{i}")));
    let mut csv = head.join(",") + "\n";
    for (u, x) in points {
        let row: Vec<String> = u.iter().chain(x).map(|v| format!("{v:?}")).collect();
        csv += &(row.join(",") + "\n");
    }
    csv
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContainmentReport {
    pub holds: bool,
    pub trials: usize,
    pub failures: usize,
    /// An endpoint that could not be located in Φ(B(1)).
    pub witness: Option<Vec<f64>>,
    /// Largest |u| among inverted endpoints.
    pub max_chart_radius: f64,
}

fn containment(chart: &Chart, sys: &VectorFieldSystem, radius: f64, trials: usize, seed: u64) -> Result<ContainmentReport> {
    let mut opts = BallOptions::new(trials, seed);
    opts.cfg = chart.cfg;
    opts.domain = chart.domain.clone();
    let ball = sample_ball_with(sys, &chart.base, radius, &opts)?;
    // warm starts: the linear guess dΦ(0)^{-1}(y − x0)
    let d0 = chart.differential(&vec![0.0; chart.dim()])?.lu();
    let found: Vec<Option<Vec<f64>>> = ball
        .endpoints
        .par_iter()
        .map(|y| {
            let r = DVector::from_iterator(y.len(), y.iter().zip(&chart.base).map(|(a, b)| a - b));
            let guess: Vec<f64> = d0
                .solve(&r)
                .map(|g| {
                    let s = norm(g.as_slice());
                    let f = if s > 0.95 { 0.95 / s } else { 1.0 };
                    g.iter().map(|v| v * f).collect()
                })
                .unwrap_or_else(|| vec![0.0; y.len()]);
            chart.invert(y, &guess)
        })
        .collect::<Result<_>>()?;
    let failures = found.iter().filter(|f| f.is_none()).count() + ball.escaped;
    let witness = found
        .iter()
        .zip(&ball.endpoints)
        .find(|(f, _)| f.is_none())
        .map(|(_, y)| y.clone());
    Ok(ContainmentReport {
        holds: failures == 0,
        trials,
        failures,
        witness,
        max_chart_radius: found.iter().flatten().map(|u| norm(u)).fold(0.0, f64::max),
    })
}

/// Sampled check of B(x0, ξ2) ⊆ Φ(B(1)) for all fields and B_P(x0, ξ1) ⊆ Φ(B(1))
/// for the selected fields.
pub fn ball_containment_check(chart: &Chart, xi1: f64, xi2: f64, trials: usize, seed: u64) -> Result<ContainmentReport> {
    if !(xi2 > 0.0 && xi2 <= xi1) {
        return Err(Error::InvalidArgument("need 0 < ξ2 ≤ ξ1".into()));
    }
    let all = containment(chart, &chart.system, xi2, trials, seed)?;
    let selected = selected_unit_system(chart)?;
    let sel = containment(chart, &selected, xi1, trials, seed)?;
    Ok(ContainmentReport {
        holds: all.holds && sel.holds,
        trials: all.trials + sel.trials,
        failures: all.failures + sel.failures,
        witness: all.witness.or(sel.witness),
        max_chart_radius: all.max_chart_radius.max(sel.max_chart_radius),
    })
}

/// The selected fields of the chart's system, without the 1/K factor.
fn selected_unit_system(chart: &Chart) -> Result<VectorFieldSystem> {
    let real = chart.system.realify();
    VectorFieldSystem::new(
        real.ambient().clone(),
        chart.selection.p0.iter().map(|&i| real.real_fields()[i].clone()).collect(),
        Vec::new(),
    )
}

/// Largest radius in `candidates` (ascending) such that it and every smaller
/// candidate pass the sampled containment for `all` or the selected fields.
fn largest_passing(chart: &Chart, sys: &VectorFieldSystem, candidates: &[f64], trials: usize, seed: u64) -> Result<Option<f64>> {
    let mut best = None;
    for &c in candidates {
        if containment(chart, sys, c, trials, seed)?.holds {
            best = Some(c);
        } else {
            break;
        }
    }
    Ok(best)
}

pub fn measure_radii(chart: &Chart, candidates: &[f64], trials: usize, seed: u64) -> Result<Radii> {
    let mut c = candidates.to_vec();
    c.sort_by(f64::total_cmp);
    Ok(Radii {
        chi: 1.0 / chart.scale,
        xi1: largest_passing(chart, &selected_unit_system(chart)?, &c, trials, seed)?,
        xi2: largest_passing(chart, &chart.system, &c, trials, seed)?,
    })
}

/// ∫_{B(1)} h, the ν-volume of the chart image, by quasi-Monte Carlo.
pub fn image_volume_from_pullback(chart: &Chart, nu: &Density, samples: usize) -> Result<f64> {
    let pb = pullback_density(chart, nu, samples)?;
    let n = chart.dim();
    let mean = pb.values[1..].iter().sum::<f64>() / samples as f64;
    Ok(unit_ball_volume(n) * mean)
}

/// ν-volume of the chart image by ambient Monte Carlo: uniform points in a
/// box around the image, kept when the chart inverts them into B(1).
pub fn image_volume_ambient(chart: &Chart, nu: &Density, samples: usize, seed: u64) -> Result<f64> {
    use rand::Rng;
    let n = chart.dim();
    let cloud = chart_image(chart, 512)?;
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for (_, x) in &cloud {
        for k in 0..n {
            lo[k] = lo[k].min(x[k]);
            hi[k] = hi[k].max(x[k]);
        }
    }
    for k in 0..n {
        let pad = 0.1 * (hi[k] - lo[k]);
        lo[k] -= pad;
        hi[k] += pad;
    }
    let box_vol: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
    let vals: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = item_rng(seed, STREAM_AMBIENT, i as u64);
            let y: Vec<f64> = (0..n).map(|k| rng.random_range(lo[k]..hi[k])).collect();
            let nearest = cloud
                .iter()
                .min_by(|a, b| dist2(&a.1, &y).total_cmp(&dist2(&b.1, &y)))
                .map(|c| c.0.clone())
                .unwrap_or_else(|| vec![0.0; n]);
            Ok(match chart.invert(&y, &nearest)? {
                Some(_) => nu.eval(&y)?,
                None => 0.0,
            })
        })
        .collect::<Result<_>>()?;
    Ok(box_vol * vals.iter().sum::<f64>() / samples as f64)
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

pub fn unit_ball_volume(n: usize) -> f64 {
    // V_n = 2π/n V_{n−2}
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / n as f64 * unit_ball_volume(n - 2),
    }
}

/// f with 𝓛_W ν = f ν for ν = g dx: f = div W + W(g)/g.
pub fn lie_derivative_coefficient(field: &VectorField, nu: &Density, x: &[f64]) -> Result<f64> {
    let mut div = 0.0;
    let mut wx = vec![0.0; x.len()];
    for (i, c) in field.components().iter().enumerate() {
        let (v, g) = c.eval_with_gradient(x)?;
        div += g[i];
        wx[i] = v;
    }
    let (g, grad) = nu.weight().eval_with_gradient(x)?;
    if g == 0.0 {
        return Err(Error::Degenerate("density vanishes at the point".into()));
    }
    Ok(div + wx.iter().zip(&grad).map(|(a, b)| a * b).sum::<f64>() / g)
}

/// The complex coefficient for L = Re L + i Im L.
pub fn lie_derivative_coefficient_complex(field: &ComplexVectorField, nu: &Density, x: &[f64]) -> Result<Complex64> {
    Ok(Complex64::new(
        lie_derivative_coefficient(&field.re, nu, x)?,
        lie_derivative_coefficient(&field.im, nu, x)?,
    ))
}
