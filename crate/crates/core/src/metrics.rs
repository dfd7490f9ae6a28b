//! Carnot–Carathéodory balls and distances, and certification of upper
//! bounds for the holomorphic metric.
//!
//! Only upper bounds are produced: a distance estimate is the smallest scale
//! at which a control path was found whose endpoint lands within the gap
//! tolerance of the target.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::VectorFieldSystem;
use crate::flows::{control_endpoint, ControlPath, Domain, FlowConfig};
use crate::linalg::{self, CMatrix, CVector};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::rng::{item_rng, uniform_in_ball, unit_direction};

const STREAM_BALL: u64 = 1;
const STREAM_DIST: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallSample {
    pub center: Vec<f64>,
    pub delta: f64,
    pub endpoints: Vec<Vec<f64>>,
    pub seed: u64,
    pub controls_per_sample: usize,
    pub requested: usize,
    /// Samples whose path left the domain (their endpoints are dropped).
    pub escaped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BallOptions {
    pub count: usize,
    pub seed: u64,
    pub segments: usize,
    pub cfg: FlowConfig,
    pub domain: Domain,
}

impl BallOptions {
    pub fn new(count: usize, seed: u64) -> Self {
        BallOptions {
            count,
            seed,
            segments: 4,
            cfg: FlowConfig::default(),
            domain: Domain::Everywhere,
        }
    }
}

/// Random piecewise-constant control with sup Σa² < 1. Half the samples
/// repeat one coefficient vector over all segments (straight rays, which
/// fill the ball of a constant frame uniformly); the rest draw each
/// segment independently and uniformly from the unit ball.
pub fn random_control<R: Rng>(rng: &mut R, fields: usize, segments: usize) -> Vec<Vec<f64>> {
    if rng.random_bool(0.5) {
        let dir = unit_direction(rng, fields);
        let r = rng.random::<f64>().powf(1.0 / fields as f64) * (1.0 - 1e-12);
        let a: Vec<f64> = dir.into_iter().map(|v| v * r).collect();
        vec![a; segments]
    } else {
        (0..segments)
            .map(|_| {
                uniform_in_ball(rng, fields)
                    .into_iter()
                    .map(|v| v * (1.0 - 1e-12))
                    .collect()
            })
            .collect()
    }
}

pub fn sample_ball(
    sys: &VectorFieldSystem,
    x: &[f64],
    delta: f64,
    count: usize,
    seed: u64,
    cfg: &FlowConfig,
) -> Result<BallSample> {
    let mut opts = BallOptions::new(count, seed);
    opts.cfg = *cfg;
    sample_ball_with(sys, x, delta, &opts)
}

/// Endpoints of `count` random controls at scale δ. Sample i always uses the
/// same control whatever δ is, so balls at different scales are sampled by
/// the same control prefixes.
pub fn sample_ball_with(
    sys: &VectorFieldSystem,
    x: &[f64],
    delta: f64,
    opts: &BallOptions,
) -> Result<BallSample> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidArgument("delta must be nonnegative".into()));
    }
    if opts.count == 0 || opts.segments == 0 {
        return Err(Error::InvalidArgument("count and segments must be positive".into()));
    }
    let real = sys.real_view();
    let fields = real.q();
    let results: Vec<Result<Option<Vec<f64>>>> = (0..opts.count)
        .into_par_iter()
        .map(|i| {
            let mut rng = item_rng(opts.seed, STREAM_BALL, i as u64);
            let segments = random_control(&mut rng, fields, opts.segments);
            let path = ControlPath { segments, delta };
            match control_endpoint(&real, x, &path, &opts.domain, &opts.cfg) {
                Ok(e) => Ok(Some(e)),
                Err(Error::DomainEscape { .. }) | Err(Error::NonFinite { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut endpoints = Vec::with_capacity(opts.count);
    let mut escaped = 0;
    for r in results {
        match r? {
            Some(e) => endpoints.push(e),
            None => escaped += 1,
        }
    }
    Ok(BallSample {
        center: x.to_vec(),
        delta,
        endpoints,
        seed: opts.seed,
        controls_per_sample: opts.segments,
        requested: opts.count,
        escaped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceOptions {
    pub restarts: usize,
    pub segments: usize,
    pub seed: u64,
    /// Relative gap tolerance: certified when |endpoint − y| ≤ tol · |y − x|.
    pub tol: f64,
    pub cfg: FlowConfig,
    pub domain: Domain,
    pub max_evals: usize,
    /// Bisection stops when the bracket is narrower than this fraction of δ.
    pub rel_precision: f64,
    pub delta_max: f64,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        DistanceOptions {
            restarts: 8,
            segments: 4,
            seed: 0,
            tol: 1e-3,
            cfg: FlowConfig::default(),
            domain: Domain::Everywhere,
            max_evals: 1500,
            rel_precision: 1e-3,
            delta_max: 64.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceEstimate {
    pub upper: f64,
    pub witness: ControlPath,
    pub terminal_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum DistanceOutcome {
    Found(DistanceEstimate),
    NoUpperBoundFound { searched_up_to: f64, best_gap: f64 },
}

impl DistanceOutcome {
    pub fn upper(&self) -> Option<f64> {
        match self {
            DistanceOutcome::Found(e) => Some(e.upper),
            DistanceOutcome::NoUpperBoundFound { .. } => None,
        }
    }
}

fn params_to_controls(p: &[f64], fields: usize) -> Vec<Vec<f64>> {
    p.chunks(fields)
        .map(|c| {
            let s = (1.0 + c.iter().map(|v| v * v).sum::<f64>()).sqrt();
            c.iter().map(|v| v / s).collect()
        })
        .collect()
}

fn controls_to_params(a: &[f64]) -> Vec<f64> {
    let n2: f64 = a.iter().map(|v| v * v).sum();
    let s = (1.0 - n2.min(0.999_999)).sqrt();
    a.iter().map(|v| v / s).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

struct Attempt {
    gap: f64,
    params: Vec<f64>,
}

/// Straight-line guess: least-squares coefficients of y − x in the scaled frame at x.
fn linear_guess(sys: &VectorFieldSystem, x: &[f64], y: &[f64], delta: f64) -> Result<Vec<f64>> {
    let frame = sys.scale_unchecked(delta).real_frame(x)?;
    let rhs = CVector::from_iterator(x.len(), y.iter().zip(x).map(|(b, a)| Complex64::new(b - a, 0.0)));
    let ls = linalg::least_squares(&linalg::to_complex(&frame), &rhs, 1e-10);
    let mut a: Vec<f64> = ls.solution.iter().map(|c| c.re).collect();
    let n = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n >= 0.999 {
        a.iter_mut().for_each(|v| *v *= 0.999 / n);
    }
    Ok(a)
}

fn try_reach(
    sys: &VectorFieldSystem,
    x: &[f64],
    y: &[f64],
    delta: f64,
    level: u64,
    opts: &DistanceOptions,
    warm: &[Option<Vec<f64>>],
    target: f64,
) -> Result<Vec<Attempt>> {
    let fields = sys.q();
    let dim = fields * opts.segments;
    let guess = linear_guess(sys, x, y, delta)?;
    (0..opts.restarts)
        .into_par_iter()
        .map(|i| {
            let start = match (&warm[i], i) {
                (Some(p), _) => p.clone(),
                (None, 0) => {
                    let p = controls_to_params(&guess);
                    (0..opts.segments).flat_map(|_| p.clone()).collect()
                }
                (None, _) => {
                    let mut rng = item_rng(opts.seed, STREAM_DIST, level * 1024 + i as u64);
                    (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect()
                }
            };
            let objective = |p: &[f64]| {
                let path = ControlPath {
                    segments: params_to_controls(p, fields),
                    delta,
                };
                match control_endpoint(sys, x, &path, &opts.domain, &opts.cfg) {
                    Ok(e) => dist(&e, y),
                    Err(_) => f64::INFINITY,
                }
            };
            let m = nelder_mead(
                objective,
                &start,
                &NelderMeadOptions {
                    max_evals: opts.max_evals,
                    target,
                    ftol: target * 1e-3,
                    initial_step: 0.5,
                },
            );
            Ok(Attempt {
                gap: m.value,
                params: m.x,
            })
        })
        .collect()
}

/// Upper bound for ρ(x, y) by bisection over δ with a shooting inner problem.
pub fn distance_upper(
    sys: &VectorFieldSystem,
    x: &[f64],
    y: &[f64],
    opts: &DistanceOptions,
) -> Result<DistanceOutcome> {
    let real = sys.real_view();
    if x.len() != real.dim() || y.len() != real.dim() {
        return Err(Error::Dimension("points have the wrong dimension".into()));
    }
    if opts.restarts == 0 || opts.segments == 0 || !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(
            "restarts, segments and tol must be positive".into(),
        ));
    }
    let sep = dist(x, y);
    if sep == 0.0 {
        return Ok(DistanceOutcome::Found(DistanceEstimate {
            upper: 0.0,
            witness: ControlPath {
                segments: Vec::new(),
                delta: 0.0,
            },
            terminal_gap: 0.0,
        }));
    }
    let target = opts.tol * sep;
    let fields = real.q();
    let mut warm: Vec<Option<Vec<f64>>> = vec![None; opts.restarts];
    let mut level = 0u64;
    let mut best_gap = f64::INFINITY;

    let mut attempt = |delta: f64, warm: &mut Vec<Option<Vec<f64>>>, level: &mut u64| -> Result<Option<(f64, Vec<f64>)>> {
        let results = try_reach(&real, x, y, delta, *level, opts, warm, target)?;
        *level += 1;
        let mut success: Option<(f64, Vec<f64>)> = None;
        for (i, r) in results.into_iter().enumerate() {
            best_gap = best_gap.min(r.gap);
            if r.gap <= target {
                warm[i] = Some(r.params.clone());
                if success.as_ref().is_none_or(|s| r.gap < s.0) {
                    success = Some((r.gap, r.params));
                }
            }
        }
        Ok(success)
    };

    // find a certified upper end
    let mut hi = 1.0;
    let mut hi_witness = None;
    while hi <= opts.delta_max {
        if let Some(s) = attempt(hi, &mut warm, &mut level)? {
            hi_witness = Some(s);
            break;
        }
        hi *= 2.0;
    }
    let Some(mut witness) = hi_witness else {
        return Ok(DistanceOutcome::NoUpperBoundFound {
            searched_up_to: hi / 2.0,
            best_gap,
        });
    };
    let mut lo = 0.0;
    while hi - lo > opts.rel_precision * hi {
        let mid = 0.5 * (lo + hi);
        match attempt(mid, &mut warm, &mut level)? {
            Some(s) => {
                hi = mid;
                witness = s;
            }
            None => lo = mid,
        }
    }
    Ok(DistanceOutcome::Found(DistanceEstimate {
        upper: hi,
        witness: ControlPath {
            segments: params_to_controls(&witness.1, fields),
            delta: hi,
        },
        terminal_gap: witness.0,
    }))
}

/// Polynomial map ζ ↦ (Σ c ζ^a ζ̄^b) from the disk B_ℂ(1/2) into ℂ^n.
/// Holomorphic exactly when no term has b > 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiskMap {
    /// Per component: terms (a, b, coefficient).
    pub components: Vec<Vec<(u32, u32, Complex64)>>,
}

pub const DISK_RADIUS: f64 = 0.5;

impl DiskMap {
    /// Holomorphic polynomial map; `coeffs[i][k]` multiplies ζ^k in component i.
    pub fn holomorphic(coeffs: Vec<Vec<Complex64>>) -> Self {
        DiskMap {
            components: coeffs
                .into_iter()
                .map(|c| {
                    c.into_iter()
                        .enumerate()
                        .map(|(k, v)| (k as u32, 0, v))
                        .collect()
                })
                .collect(),
        }
    }

    pub fn eval(&self, z: Complex64) -> Vec<Complex64> {
        self.components
            .iter()
            .map(|terms| {
                terms
                    .iter()
                    .map(|&(a, b, c)| c * z.powu(a) * z.conj().powu(b))
                    .sum()
            })
            .collect()
    }

    /// (∂f/∂ζ, ∂f/∂ζ̄) per component.
    fn wirtinger(&self, z: Complex64) -> Vec<(Complex64, Complex64)> {
        let zero = Complex64::new(0.0, 0.0);
        self.components
            .iter()
            .map(|terms| {
                terms.iter().fold((zero, zero), |(dz, dzb), &(a, b, c)| {
                    let za = |k: u32| if k == 0 { Complex64::new(1.0, 0.0) } else { z.powu(k) };
                    let zb = |k: u32| if k == 0 { Complex64::new(1.0, 0.0) } else { z.conj().powu(k) };
                    let t1 = if a > 0 { c * a as f64 * za(a - 1) * zb(b) } else { zero };
                    let t2 = if b > 0 { c * b as f64 * za(a) * zb(b - 1) } else { zero };
                    (dz + t1, dzb + t2)
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoloCertificate {
    pub certified: bool,
    pub bound: f64,
    pub max_residual: f64,
    pub sup_control_norm_sq: f64,
    pub failing_clause: Option<String>,
}

const HOLO_RESIDUAL_TOL: f64 = 1e-8;
const HOLO_MEMBERSHIP_TOL: f64 = 1e-8;

fn disk_grid() -> Vec<Complex64> {
    let mut pts = vec![Complex64::new(0.0, 0.0)];
    for k in 1..=8 {
        let r = DISK_RADIUS * 0.999 * k as f64 / 8.0;
        for j in 0..16 {
            pts.push(Complex64::from_polar(r, 2.0 * std::f64::consts::PI * j as f64 / 16.0));
        }
    }
    pts
}

fn disk_point(p: &[f64]) -> Complex64 {
    let s = (1.0 + p[0] * p[0] + p[1] * p[1]).sqrt();
    Complex64::new(p[0], p[1]) * (DISK_RADIUS / s)
}

fn disk_params(z: Complex64) -> Vec<f64> {
    let w = z / DISK_RADIUS;
    let s = (1.0 - w.norm_sqr().min(0.999_999)).sqrt();
    vec![w.re / s, w.im / s]
}

fn cdist(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>().sqrt()
}

/// Smallest |f(ζ) − target| over the disk, by Nelder–Mead from grid starts.
fn invert(f: &DiskMap, target: &[Complex64]) -> f64 {
    let starts = [0.0, 0.2, 0.4];
    let mut best = f64::INFINITY;
    for r in starts {
        for j in 0..4 {
            let z0 = Complex64::from_polar(r, std::f64::consts::FRAC_PI_2 * j as f64);
            let m = nelder_mead(
                |p| cdist(&f.eval(disk_point(p)), target),
                &disk_params(z0),
                &NelderMeadOptions {
                    max_evals: 2000,
                    target: HOLO_MEMBERSHIP_TOL * 0.1,
                    ftol: 1e-18,
                    initial_step: 0.3,
                },
            );
            best = best.min(m.value);
            if best <= HOLO_MEMBERSHIP_TOL {
                return best;
            }
            if r == 0.0 {
                break;
            }
        }
    }
    best
}

fn overlap_gap(f: &DiskMap, g: &DiskMap) -> f64 {
    let mut best = f64::INFINITY;
    for r in [0.0, 0.3] {
        let m = nelder_mead(
            |p| cdist(&f.eval(disk_point(&p[..2])), &g.eval(disk_point(&p[2..]))),
            &[r, 0.0, -r, 0.0],
            &NelderMeadOptions {
                max_evals: 4000,
                target: HOLO_MEMBERSHIP_TOL * 0.1,
                ftol: 1e-18,
                initial_step: 0.3,
            },
        );
        best = best.min(m.value);
        if best <= HOLO_MEMBERSHIP_TOL {
            break;
        }
    }
    best
}

/// Check a chain of disk maps against the defining conditions of ρ_H and
/// return Σ δ_j as the certified bound when all conditions hold.
pub fn certify_holomorphic_chain(
    sys: &VectorFieldSystem,
    maps: &[DiskMap],
    deltas: &[f64],
    x: &[f64],
    y: &[f64],
) -> Result<HoloCertificate> {
    let amb = sys.ambient();
    if amb.r() != 0 || sys.q() != 0 {
        return Err(Error::InvalidArgument(
            "holomorphic certification needs a complex manifold with only complex fields".into(),
        ));
    }
    if maps.is_empty() || maps.len() != deltas.len() {
        return Err(Error::InvalidArgument("need one δ per map and at least one map".into()));
    }
    if maps.iter().any(|f| f.components.len() != amb.n()) {
        return Err(Error::Dimension("map component count differs from complex dimension".into()));
    }
    if deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::InvalidArgument("every δ must be positive".into()));
    }
    let bound: f64 = deltas.iter().sum();
    let to_real = |w: &[Complex64]| -> Vec<f64> {
        let mut p = vec![0.0; amb.dim()];
        for (i, &(xi, yi)) in amb.complex_pairs().iter().enumerate() {
            p[xi] = w[i].re;
            p[yi] = w[i].im;
        }
        p
    };
    let to_complex_point = |p: &[f64]| -> Vec<Complex64> {
        amb.complex_pairs()
            .iter()
            .map(|&(xi, yi)| Complex64::new(p[xi], p[yi]))
            .collect()
    };

    let mut max_residual: f64 = 0.0;
    let mut sup_s: f64 = 0.0;
    let mut failing = None;
    for (j, (f, &delta)) in maps.iter().zip(deltas).enumerate() {
        let scaled = sys.scale_unchecked(delta);
        for z in disk_grid() {
            let w = f.eval(z);
            let p = to_real(&w);
            let cols: CMatrix = scaled.evaluate(&p)?;
            // df(∂ζ̄) in real coordinates: x-part (A + B)/2, y-part i(B − A)/2
            let mut rhs = CVector::zeros(amb.dim());
            for (i, (dz, dzb)) in f.wirtinger(z).into_iter().enumerate() {
                let (a, b) = (dzb, dz.conj());
                let (xi, yi) = amb.complex_pairs()[i];
                rhs[xi] = (a + b) * 0.5;
                rhs[yi] = Complex64::new(0.0, 1.0) * (b - a) * 0.5;
            }
            let ls = linalg::least_squares(&cols, &rhs, 1e-12);
            max_residual = max_residual.max(ls.residual);
            sup_s = sup_s.max(ls.solution.iter().map(|c| c.norm_sqr()).sum());
        }
        if max_residual > HOLO_RESIDUAL_TOL && failing.is_none() {
            failing = Some(format!("map {} is not a ∂̄-control of the fields (residual {max_residual:e})", j + 1));
        }
        if sup_s >= 1.0 && failing.is_none() {
            failing = Some(format!("map {} has sup Σ|s|² = {sup_s} ≥ 1", j + 1));
        }
    }
    if failing.is_none() {
        for (j, pair) in maps.windows(2).enumerate() {
            let gap = overlap_gap(&pair[0], &pair[1]);
            if gap > HOLO_MEMBERSHIP_TOL {
                failing = Some(format!("images of maps {} and {} do not meet (gap {gap:e})", j + 1, j + 2));
                break;
            }
        }
    }
    if failing.is_none() {
        let gx = invert(&maps[0], &to_complex_point(x));
        if gx > HOLO_MEMBERSHIP_TOL {
            failing = Some(format!("start point not in the first image (gap {gx:e})"));
        }
    }
    if failing.is_none() {
        let gy = invert(&maps[maps.len() - 1], &to_complex_point(y));
        if gy > HOLO_MEMBERSHIP_TOL {
            failing = Some(format!("end point not in the last image (gap {gy:e})"));
        }
    }
    Ok(HoloCertificate {
        certified: failing.is_none(),
        bound,
        max_residual,
        sup_control_norm_sq: sup_s,
        failing_clause: failing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Ambient, ComplexEntry, ComplexVectorField, VectorField};

    fn euclid2() -> VectorFieldSystem {
        VectorFieldSystem::from_real(2, &[(&["1", "0"], 1.0), (&["0", "1"], 1.0)]).unwrap()
    }

    fn complex_line() -> VectorFieldSystem {
        let amb = Ambient::new(vec!["x".into(), "y".into()], vec![], vec![(0, 1)]).unwrap();
        let l = ComplexVectorField::new(
            VectorField::parse(&["0.5", "0"]).unwrap(),
            VectorField::parse(&["0", "0.5"]).unwrap(),
        )
        .unwrap();
        VectorFieldSystem::new(
            amb,
            vec![],
            vec![ComplexEntry {
                name: "L".into(),
                field: l,
                degree: 1.0,
            }],
        )
        .unwrap()
    }

    #[test]
    fn euclidean_ball_inside_unit_disk() {
        let s = sample_ball(&euclid2(), &[0.0, 0.0], 1.0, 500, 3, &FlowConfig::default()).unwrap();
        assert_eq!(s.endpoints.len(), 500);
        assert!(s.endpoints.iter().all(|e| dist(e, &[0.0, 0.0]) < 1.0));
        let again = sample_ball(&euclid2(), &[0.0, 0.0], 1.0, 500, 3, &FlowConfig::default()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn euclidean_distance_is_straight_line() {
        let out = distance_upper(&euclid2(), &[0.0, 0.0], &[0.3, 0.4], &DistanceOptions::default()).unwrap();
        let u = out.upper().unwrap();
        assert!(u >= 0.5 * (1.0 - 2e-3) && u <= 0.51, "{u}");
    }

    #[test]
    fn coincident_points_have_zero_distance() {
        let out = distance_upper(&euclid2(), &[0.1, 0.1], &[0.1, 0.1], &DistanceOptions::default()).unwrap();
        match out {
            DistanceOutcome::Found(e) => {
                assert_eq!(e.upper, 0.0);
                assert!(e.witness.segments.is_empty());
            }
            _ => panic!(),
        }
    }

    #[test]
    fn linear_disk_map_certifies() {
        let f = DiskMap::holomorphic(vec![vec![Complex64::new(0.0, 0.0), Complex64::new(0.9, 0.0)]]);
        let c = certify_holomorphic_chain(&complex_line(), &[f], &[1.0], &[0.0, 0.0], &[0.2, 0.0]).unwrap();
        assert!(c.certified, "{c:?}");
        assert_eq!(c.bound, 1.0);
        assert!((c.sup_control_norm_sq - 0.81).abs() < 1e-9);
    }

    #[test]
    fn antiholomorphic_map_is_rejected() {
        let f = DiskMap {
            components: vec![vec![(0, 1, Complex64::new(0.9, 0.0))]],
        };
        let c = certify_holomorphic_chain(&complex_line(), &[f], &[1.0], &[0.0, 0.0], &[0.2, 0.0]).unwrap();
        assert!(!c.certified);
        assert!(c.failing_clause.unwrap().contains("not a"));
    }

    #[test]
    fn constant_chain_certifies_coincident_points() {
        let f = DiskMap::holomorphic(vec![vec![Complex64::new(0.3, -0.1)]]);
        let c = certify_holomorphic_chain(&complex_line(), &[f.clone(), f], &[0.1, 0.2], &[0.3, -0.1], &[0.3, -0.1])
            .unwrap();
        assert!(c.certified);
        assert!((c.bound - 0.3).abs() < 1e-15);
    }

    #[test]
    fn target_outside_image_fails() {
        let f = DiskMap::holomorphic(vec![vec![Complex64::new(0.0, 0.0), Complex64::new(0.9, 0.0)]]);
        let c = certify_holomorphic_chain(&complex_line(), &[f], &[1.0], &[0.0, 0.0], &[0.6, 0.0]).unwrap();
        assert!(!c.certified);
        assert!(c.failing_clause.unwrap().contains("end point"));
    }
}
