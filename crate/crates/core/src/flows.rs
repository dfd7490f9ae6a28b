//! Flows of field combinations by fixed-step RK4: exponential maps,
//! piecewise-constant control paths, and the existence and no-return
//! checks on exponentials.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::VectorFieldSystem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowConfig {
    pub steps_per_unit_time: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            steps_per_unit_time: 256,
        }
    }
}

impl FlowConfig {
    pub const MIN_STEPS: usize = 16;

    pub fn new(steps_per_unit_time: usize) -> Result<Self> {
        if steps_per_unit_time < Self::MIN_STEPS {
            return Err(Error::InvalidArgument(format!(
                "at least {} steps per unit time required, got {steps_per_unit_time}",
                Self::MIN_STEPS
            )));
        }
        Ok(FlowConfig {
            steps_per_unit_time,
        })
    }
}

/// Open region in which flows must stay.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Domain {
    Everywhere,
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Domain {
    pub fn contains(&self, p: &[f64]) -> bool {
        match self {
            Domain::Everywhere => true,
            Domain::Box { lo, hi } => p
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(x, (a, b))| *x > *a && *x < *b),
            Domain::Ball { center, radius } => {
                let d2: f64 = p.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                d2 < radius * radius
            }
        }
    }
}

/// One RK4 step of x' = f(x) with step h; buffers reused between steps.
struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        Rk4 {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    fn step<F>(&mut self, f: &F, x: &mut [f64], h: f64) -> Result<()>
    where
        F: Fn(&[f64], &mut [f64]) -> Result<()>,
    {
        let n = x.len();
        f(x, &mut self.k1)?;
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k1[i];
        }
        f(&self.tmp, &mut self.k2)?;
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k2[i];
        }
        f(&self.tmp, &mut self.k3)?;
        for i in 0..n {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        f(&self.tmp, &mut self.k4)?;
        for i in 0..n {
            x[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        Ok(())
    }
}

/// Integrate x' = f(x) over `steps` steps of size h starting at time t0,
/// checking the domain after every step. Optionally records each state.
fn integrate<F>(
    f: &F,
    x: &mut [f64],
    t0: f64,
    h: f64,
    steps: usize,
    domain: &Domain,
    mut record: Option<&mut Vec<Vec<f64>>>,
) -> Result<()>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    let mut rk = Rk4::new(x.len());
    for s in 0..steps {
        rk.step(f, x, h)?;
        let t = t0 + (s + 1) as f64 * h;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { time: t });
        }
        if !domain.contains(x) {
            return Err(Error::DomainEscape {
                time: t,
                point: x.to_vec(),
            });
        }
        if let Some(r) = record.as_deref_mut() {
            r.push(x.to_vec());
        }
    }
    Ok(())
}

fn check_coefficients(sys: &VectorFieldSystem, a: &[f64]) -> Result<()> {
    if a.len() != sys.q() {
        return Err(Error::Dimension(format!(
            "{} coefficients for {} fields",
            a.len(),
            sys.q()
        )));
    }
    Ok(())
}

/// e^{Σ a_j W_j} x0: RK4 endpoint of the frozen-coefficient flow over t ∈ [0, 1].
/// Complex systems are realified first.
pub fn exp_map(
    sys: &VectorFieldSystem,
    x0: &[f64],
    a: &[f64],
    domain: &Domain,
    cfg: &FlowConfig,
) -> Result<Vec<f64>> {
    flow_for_time(sys, x0, a, 1.0, domain, cfg)
}

/// Flow of Σ a_j W_j for time `time`, with steps proportional to the time.
pub fn flow_for_time(
    sys: &VectorFieldSystem,
    x0: &[f64],
    a: &[f64],
    time: f64,
    domain: &Domain,
    cfg: &FlowConfig,
) -> Result<Vec<f64>> {
    let real = sys.real_view();
    check_coefficients(&real, a)?;
    if x0.len() != real.dim() {
        return Err(Error::Dimension("start point has the wrong dimension".into()));
    }
    let f = |p: &[f64], out: &mut [f64]| real.combination(a, p, out);
    let steps = ((cfg.steps_per_unit_time as f64 * time.abs()).ceil() as usize).max(1);
    let mut x = x0.to_vec();
    integrate(&f, &mut x, 0.0, time / steps as f64, steps, domain, None)?;
    Ok(x)
}

/// Piecewise-constant controls on [0, 1] split evenly; drives Σ a_j δ^{d_j} W_j.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlPath {
    pub segments: Vec<Vec<f64>>,
    pub delta: f64,
}

impl ControlPath {
    pub fn new(segments: Vec<Vec<f64>>, delta: f64) -> Result<Self> {
        let path = ControlPath { segments, delta };
        path.validate()?;
        Ok(path)
    }

    /// sup over segments of Σ a_j².
    pub fn sup_norm_sq(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.iter().map(|a| a * a).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0) {
            return Err(Error::InvalidArgument("control scale must be nonnegative".into()));
        }
        if self.sup_norm_sq() >= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "control sup norm squared {} is not below 1",
                self.sup_norm_sq()
            )));
        }
        Ok(())
    }
}

/// Trajectory sampled at every RK4 step, starting with x0.
pub fn integrate_control(
    sys: &VectorFieldSystem,
    x0: &[f64],
    path: &ControlPath,
    domain: &Domain,
    cfg: &FlowConfig,
) -> Result<Vec<Vec<f64>>> {
    let mut points = vec![x0.to_vec()];
    run_control(sys, x0, path, domain, cfg, Some(&mut points))?;
    Ok(points)
}

/// Endpoint only.
pub fn control_endpoint(
    sys: &VectorFieldSystem,
    x0: &[f64],
    path: &ControlPath,
    domain: &Domain,
    cfg: &FlowConfig,
) -> Result<Vec<f64>> {
    run_control(sys, x0, path, domain, cfg, None)
}

fn run_control(
    sys: &VectorFieldSystem,
    x0: &[f64],
    path: &ControlPath,
    domain: &Domain,
    cfg: &FlowConfig,
    mut record: Option<&mut Vec<Vec<f64>>>,
) -> Result<Vec<f64>> {
    path.validate()?;
    let real = sys.real_view();
    let scales: Vec<f64> = real.degrees().iter().map(|d| path.delta.powf(*d)).collect();
    let mut x = x0.to_vec();
    let segs = path.segments.len();
    if segs == 0 {
        return Ok(x);
    }
    let per_segment = cfg.steps_per_unit_time.div_ceil(segs).max(1);
    let h = 1.0 / (segs * per_segment) as f64;
    let mut coeffs = vec![0.0; real.q()];
    for (s, seg) in path.segments.iter().enumerate() {
        check_coefficients(&real, seg)?;
        for j in 0..coeffs.len() {
            coeffs[j] = seg[j] * scales[j];
        }
        if coeffs.iter().all(|c| *c == 0.0) {
            if let Some(r) = record.as_deref_mut() {
                for _ in 0..per_segment {
                    r.push(x.clone());
                }
            }
            continue;
        }
        let f = |p: &[f64], out: &mut [f64]| real.combination(&coeffs, p, out);
        let t0 = s as f64 / segs as f64;
        integrate(&f, &mut x, t0, h, per_segment, domain, record.as_deref_mut())?;
    }
    Ok(x)
}

/// Halton point `index` (starting at 1) in [0, 1]^dim.
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];
    assert!(dim <= PRIMES.len(), "Halton sequence supports up to 16 dimensions");
    PRIMES[..dim]
        .iter()
        .map(|&b| {
            let (mut f, mut r, mut i) = (1.0, 0.0, index);
            while i > 0 {
                f /= b as f64;
                r += f * (i % b) as f64;
                i /= b;
            }
            r
        })
        .collect()
}

/// First `count` Halton points of [−1, 1]^dim falling inside the open unit ball.
pub fn halton_ball(count: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut i = 1u64;
    while out.len() < count {
        let p: Vec<f64> = halton(i, dim).into_iter().map(|u| 2.0 * u - 1.0).collect();
        if p.iter().map(|v| v * v).sum::<f64>() < 1.0 {
            out.push(p);
        }
        i += 1;
    }
    out
}

/// Deterministic directions on the unit sphere, from normalized ball points.
pub fn sphere_directions(count: usize, dim: usize) -> Vec<Vec<f64>> {
    if dim == 1 {
        return (0..count)
            .map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }])
            .collect();
    }
    halton_ball(count * 2, dim)
        .into_iter()
        .filter_map(|p| {
            let n = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            (n > 0.1).then(|| p.into_iter().map(|v| v / n).collect())
        })
        .take(count)
        .collect()
}

pub const CONDITION_C_SAMPLES: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub holds: bool,
    pub samples: usize,
    /// Coefficient vector whose exponential left the domain.
    pub witness: Option<Vec<f64>>,
}

/// Condition 𝒞(x0, η, U) on a deterministic sample of a ∈ B(η): every
/// e^{a·W} x0 exists and stays in the domain.
pub fn check_condition_c(
    sys: &VectorFieldSystem,
    x0: &[f64],
    eta: f64,
    domain: &Domain,
    cfg: &FlowConfig,
) -> Result<ConditionReport> {
    if !(eta > 0.0) {
        return Err(Error::InvalidArgument("eta must be positive".into()));
    }
    let real = sys.real_view();
    let n = real.q();
    if !domain.contains(x0) {
        return Ok(ConditionReport {
            holds: false,
            samples: 0,
            witness: Some(vec![0.0; n]),
        });
    }
    // include the axis extremes so that escape along a coordinate direction is seen
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for j in 0..n {
        for s in [1.0, -1.0] {
            let mut a = vec![0.0; n];
            a[j] = s * (1.0 - 1e-9);
            dirs.push(a);
        }
    }
    dirs.extend(halton_ball(CONDITION_C_SAMPLES, n));
    for u in &dirs {
        let a: Vec<f64> = u.iter().map(|v| v * eta).collect();
        match exp_map(&real, x0, &a, domain, cfg) {
            Ok(_) => {}
            Err(Error::DomainEscape { .. }) | Err(Error::NonFinite { .. }) | Err(Error::Expr(_)) => {
                return Ok(ConditionReport {
                    holds: false,
                    samples: dirs.len(),
                    witness: Some(a),
                })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ConditionReport {
        holds: true,
        samples: dirs.len(),
        witness: None,
    })
}

pub const NO_RETURN_DIRECTIONS: usize = 128;
pub const NO_RETURN_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoReturnWitness {
    pub point: Vec<f64>,
    pub theta: Vec<f64>,
    pub r: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoReturnReport {
    pub holds: bool,
    /// Directions skipped because Σ θ_j W_j vanished at the point.
    pub skipped: usize,
    pub witness: Option<NoReturnWitness>,
}

/// Checks e^{rθ·W} x ≠ x for r ∈ (0, δ0] over 128 fixed directions θ at each
/// point. Local minima of the distance to x are refined by re-integration.
pub fn check_no_return(
    sys: &VectorFieldSystem,
    points: &[Vec<f64>],
    delta0: f64,
    cfg: &FlowConfig,
) -> Result<NoReturnReport> {
    let real = sys.real_view();
    let n = real.q();
    let dirs = sphere_directions(NO_RETURN_DIRECTIONS, n);
    let mut skipped = 0;
    let mut v = vec![0.0; real.dim()];
    for x in points {
        for theta in &dirs {
            real.combination(theta, x, &mut v)?;
            if v.iter().map(|c| c * c).sum::<f64>().sqrt() <= 1e-12 {
                skipped += 1;
                continue;
            }
            if let Some(w) = closest_return(&real, x, theta, delta0, cfg)? {
                if w.distance < NO_RETURN_TOL {
                    return Ok(NoReturnReport {
                        holds: false,
                        skipped,
                        witness: Some(w),
                    });
                }
            }
        }
    }
    Ok(NoReturnReport {
        holds: true,
        skipped,
        witness: None,
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

/// Smallest distance back to x at an interior local minimum (or the end) of r ↦ |e^{rθ·W}x − x|.
fn closest_return(
    sys: &VectorFieldSystem,
    x: &[f64],
    theta: &[f64],
    delta0: f64,
    cfg: &FlowConfig,
) -> Result<Option<NoReturnWitness>> {
    let f = |p: &[f64], out: &mut [f64]| sys.combination(theta, p, out);
    let steps = ((cfg.steps_per_unit_time as f64 * delta0).ceil() as usize).max(4);
    let h = delta0 / steps as f64;
    let mut states = vec![x.to_vec()];
    integrate(&f, &mut x.to_vec(), 0.0, h, steps, &Domain::Everywhere, Some(&mut states))?;
    let d: Vec<f64> = states.iter().map(|s| dist(s, x)).collect();
    let mut best: Option<NoReturnWitness> = None;
    let mut consider = |w: NoReturnWitness| {
        if best.as_ref().is_none_or(|b| w.distance < b.distance) {
            best = Some(w);
        }
    };
    for k in 1..=steps {
        let interior_min = k < steps && d[k] <= d[k - 1] && d[k] <= d[k + 1];
        let end_min = k == steps && d[k] < d[k - 1];
        if !(interior_min || end_min) {
            continue;
        }
        // zoom in around step k
        let mut start = states[k - 1].clone();
        let mut t_start = (k - 1) as f64 * h;
        let mut span = if k < steps { 2.0 * h } else { h };
        let mut best_t = k as f64 * h;
        let mut best_d = d[k];
        for _ in 0..4 {
            let sub = 32;
            let hh = span / sub as f64;
            let mut trace = vec![start.clone()];
            integrate(&f, &mut start.clone(), t_start, hh, sub, &Domain::Everywhere, Some(&mut trace))?;
            let (i_min, d_min) = trace
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, s)| (i, dist(s, x)))
                .fold((1, f64::INFINITY), |acc, v| if v.1 < acc.1 { v } else { acc });
            if d_min < best_d {
                best_d = d_min;
                best_t = t_start + i_min as f64 * hh;
            }
            let lo = i_min.saturating_sub(1);
            start = trace[lo].clone();
            t_start += lo as f64 * hh;
            span = 2.0 * hh;
        }
        if best_t > 0.0 && best_t <= delta0 + 1e-12 {
            consider(NoReturnWitness {
                point: x.to_vec(),
                theta: theta.to_vec(),
                r: best_t,
                distance: best_d,
            });
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn euclid2() -> VectorFieldSystem {
        VectorFieldSystem::from_real(2, &[(&["1", "0"], 1.0), (&["0", "1"], 1.0)]).unwrap()
    }

    fn rotation() -> VectorFieldSystem {
        VectorFieldSystem::from_real(2, &[(&["-x2", "x1"], 1.0)]).unwrap()
    }

    fn heis() -> VectorFieldSystem {
        VectorFieldSystem::from_real(3, &[(&["1", "0", "2*x2"], 1.0), (&["0", "1", "-2*x1"], 1.0)]).unwrap()
    }

    #[test]
    fn translation() {
        let cfg = FlowConfig::default();
        let e = exp_map(&euclid2(), &[1.0, 2.0], &[0.5, -1.0], &Domain::Everywhere, &cfg).unwrap();
        assert!((e[0] - 1.5).abs() < 1e-14 && (e[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn quarter_rotation() {
        let cfg = FlowConfig::default();
        let e = exp_map(&rotation(), &[1.0, 0.0], &[PI / 2.0], &Domain::Everywhere, &cfg).unwrap();
        assert!(e[0].abs() < 1e-6 && (e[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn heisenberg_rays_have_no_vertical_drift() {
        let cfg = FlowConfig::default();
        let e = exp_map(&heis(), &[0.0; 3], &[0.3, -0.7], &Domain::Everywhere, &cfg).unwrap();
        assert!((e[0] - 0.3).abs() < 1e-14 && (e[1] + 0.7).abs() < 1e-14 && e[2].abs() < 1e-14);
    }

    #[test]
    fn commutator_loop_moves_vertically() {
        let eps: f64 = 0.05;
        let c = 4.0 * eps;
        let path = ControlPath::new(
            vec![vec![c, 0.0], vec![0.0, c], vec![-c, 0.0], vec![0.0, -c]],
            1.0,
        )
        .unwrap();
        let cfg = FlowConfig::default();
        let e = control_endpoint(&heis(), &[0.0; 3], &path, &Domain::Everywhere, &cfg).unwrap();
        assert!(e[0].abs() < 1e-14 && e[1].abs() < 1e-14);
        assert!((e[2] + 4.0 * eps * eps).abs() < eps.powi(3));
    }

    #[test]
    fn zero_controls_constant_trajectory() {
        let path = ControlPath::new(vec![vec![0.0, 0.0]; 3], 0.5).unwrap();
        let tr = integrate_control(&heis(), &[1.0, 2.0, 3.0], &path, &Domain::Everywhere, &FlowConfig::default()).unwrap();
        assert!(tr.iter().all(|p| p == &vec![1.0, 2.0, 3.0]));
    }

    #[test]
    fn single_segment_matches_exp_map() {
        let sys = VectorFieldSystem::from_real(3, &[(&["1", "0", "2*x2"], 1.0), (&["0", "1", "-2*x1"], 2.0)]).unwrap();
        let path = ControlPath::new(vec![vec![0.6, -0.5]], 0.5).unwrap();
        let cfg = FlowConfig::default();
        let a = control_endpoint(&sys, &[0.1, 0.2, 0.3], &path, &Domain::Everywhere, &cfg).unwrap();
        let b = exp_map(&sys, &[0.1, 0.2, 0.3], &[0.6 * 0.5, -0.5 * 0.25], &Domain::Everywhere, &cfg).unwrap();
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn invalid_controls_rejected() {
        assert!(ControlPath::new(vec![vec![0.8, 0.7]], 1.0).is_err());
        assert!(FlowConfig::new(8).is_err());
    }

    #[test]
    fn condition_c_examples() {
        let cfg = FlowConfig::default();
        let sys = euclid2();
        let everywhere = check_condition_c(&sys, &[0.0, 0.0], 100.0, &Domain::Everywhere, &cfg).unwrap();
        assert!(everywhere.holds);
        let ball = Domain::Ball {
            center: vec![0.0, 0.0],
            radius: 1.0,
        };
        assert!(check_condition_c(&sys, &[0.0, 0.0], 0.99, &ball, &cfg).unwrap().holds);
        let out = check_condition_c(&sys, &[0.0, 0.0], 1.5, &ball, &cfg).unwrap();
        assert!(!out.holds && out.witness.is_some());
        let blow = VectorFieldSystem::from_real(1, &[(&["x1^2"], 1.0)]).unwrap();
        let interval = Domain::Box {
            lo: vec![-1.0],
            hi: vec![1.0],
        };
        assert!(!check_condition_c(&blow, &[0.5], 2.0, &interval, &cfg).unwrap().holds);
    }

    #[test]
    fn rotation_returns_after_its_period() {
        let cfg = FlowConfig::default();
        let pts = vec![vec![1.0, 0.0], vec![0.0, -1.0]];
        let r7 = check_no_return(&rotation(), &pts, 7.0, &cfg).unwrap();
        assert!(!r7.holds);
        let w = r7.witness.unwrap();
        assert!((w.r - 2.0 * PI).abs() < 1e-4, "{}", w.r);
        assert!(check_no_return(&rotation(), &pts, 3.0, &cfg).unwrap().holds);
        assert!(check_no_return(&euclid2(), &pts, 50.0, &cfg).unwrap().holds);
    }

    #[test]
    fn halton_ball_points_are_inside() {
        let pts = halton_ball(512, 3);
        assert_eq!(pts.len(), 512);
        assert!(pts.iter().all(|p| p.iter().map(|v| v * v).sum::<f64>() < 1.0));
        let dirs = sphere_directions(128, 4);
        assert_eq!(dirs.len(), 128);
    }
}
