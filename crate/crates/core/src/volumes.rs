//! The Nagel–Stein–Wainger volume functional Λ(x, δ), voxel-occupancy
//! estimates of ball volumes, and doubling reports.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::fields::{Ambient, VectorFieldSystem};
use crate::flows::{halton, Domain, FlowConfig};
use crate::linalg::{self, combinations};
use crate::metrics::{sample_ball_with, BallOptions};

/// ν = g · Lebesgue in the ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    weight: Expression,
}

impl Density {
    pub fn lebesgue(dim: usize) -> Self {
        Density {
            weight: Expression::constant(1.0, dim),
        }
    }

    pub fn new(weight: Expression) -> Self {
        Density { weight }
    }

    pub fn parse(ambient: &Ambient, text: &str) -> Result<Self> {
        Ok(Density {
            weight: ambient.parse(text)?,
        })
    }

    pub fn weight(&self) -> &Expression {
        &self.weight
    }

    pub fn eval(&self, p: &[f64]) -> Result<f64> {
        Ok(self.weight.eval(p)?)
    }

    /// Sampled positivity check on a box (Halton points plus corners of the grid).
    pub fn check_positive(&self, lo: &[f64], hi: &[f64], samples: usize) -> Result<bool> {
        for i in 0..samples as u64 {
            let u = halton(i + 1, lo.len());
            let p: Vec<f64> = u
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(t, (a, b))| a + t * (b - a))
                .collect();
            if !(self.eval(&p)? > 0.0) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Λ(x, δ): max over n-element subsets of the realified fields of
/// |g(x) det(δ^{d_j} X_j(x))|. Reordering a tuple only changes the sign and
/// repeated fields give zero, so subsets cover every tuple.
pub fn lambda(sys: &VectorFieldSystem, x: &[f64], delta: f64, nu: &Density) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument("delta must be positive".into()));
    }
    let real = sys.real_view();
    let n = real.dim();
    let frame = real.scale_unchecked(delta).real_frame(x)?;
    let g = nu.eval(x)?;
    if real.q() < n {
        return Ok(0.0);
    }
    let best = combinations(real.q(), n)
        .iter()
        .map(|idx| linalg::real_det(&linalg::select_columns(&frame, idx)).abs())
        .fold(0.0, f64::max);
    Ok(g.abs() * best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Voxel {
    /// Side length as a fraction of δ.
    Relative(f64),
    Absolute(f64),
}

impl Voxel {
    pub fn size(&self, delta: f64) -> f64 {
        match *self {
            Voxel::Relative(f) => f * delta,
            Voxel::Absolute(h) => h,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeOptions {
    pub samples: usize,
    pub voxel: Voxel,
    pub seed: u64,
    pub segments: usize,
    pub cfg: FlowConfig,
    pub domain: Domain,
}

impl Default for VolumeOptions {
    fn default() -> Self {
        VolumeOptions {
            samples: 20_000,
            voxel: Voxel::Relative(1.0 / 20.0),
            seed: 0,
            segments: 4,
            cfg: FlowConfig::default(),
            domain: Domain::Everywhere,
        }
    }
}

/// Voxels with fewer occupied cells than this are reported as unreliable.
pub const MIN_OCCUPIED: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeEstimate {
    pub volume: f64,
    pub voxel: f64,
    pub occupied: usize,
    pub endpoints: usize,
    pub escaped: usize,
}

/// ν of the union of voxels (a grid centred at x) hit by ball endpoints.
pub fn volume_estimate(
    sys: &VectorFieldSystem,
    x: &[f64],
    delta: f64,
    nu: &Density,
    opts: &VolumeOptions,
) -> Result<VolumeEstimate> {
    if delta == 0.0 {
        return Ok(VolumeEstimate {
            volume: 0.0,
            voxel: 0.0,
            occupied: 0,
            endpoints: 0,
            escaped: 0,
        });
    }
    let h = opts.voxel.size(delta);
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument("voxel size must be positive".into()));
    }
    let ball = sample_ball_with(
        sys,
        x,
        delta,
        &BallOptions {
            count: opts.samples,
            seed: opts.seed,
            segments: opts.segments,
            cfg: opts.cfg,
            domain: opts.domain.clone(),
        },
    )?;
    let cells: BTreeSet<Vec<i64>> = ball
        .endpoints
        .iter()
        .map(|e| {
            e.iter()
                .zip(x)
                .map(|(v, c)| ((v - c) / h).round() as i64)
                .collect()
        })
        .collect();
    if cells.len() < MIN_OCCUPIED {
        return Err(Error::Unreliable(format!(
            "only {} voxels occupied by {} endpoints; increase samples or shrink the voxel",
            cells.len(),
            ball.endpoints.len()
        )));
    }
    let cell_volume = h.powi(x.len() as i32);
    let mut volume = 0.0;
    for c in &cells {
        let centre: Vec<f64> = c.iter().zip(x).map(|(k, x0)| x0 + *k as f64 * h).collect();
        volume += nu.eval(&centre)? * cell_volume;
    }
    Ok(VolumeEstimate {
        volume,
        voxel: h,
        occupied: cells.len(),
        endpoints: ball.endpoints.len(),
        escaped: ball.escaped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeRow {
    pub delta: f64,
    pub lambda: f64,
    pub mc_volume: f64,
    pub ratio: Option<f64>,
    /// ν(B(x, 2δ)) / ν(B(x, δ)), only for δ ≤ 1/2.
    pub doubling: Option<f64>,
    pub voxel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeReport {
    pub rows: Vec<VolumeRow>,
    pub samples: usize,
    pub seed: u64,
    /// max/min of mc_volume/λ over the rows.
    pub ratio_spread: f64,
    /// Rows whose ratio leaves the configured band.
    pub flagged: Vec<usize>,
}

impl VolumeReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("delta,lambda,mc_volume,ratio,doubling\n");
        let opt = |v: Option<f64>| v.map(|v| format!("{v:?}")).unwrap_or_default();
        for r in &self.rows {
            s.push_str(&format!(
                "{:?},{:?},{:?},{},{}\n",
                r.delta,
                r.lambda,
                r.mc_volume,
                opt(r.ratio),
                opt(r.doubling)
            ));
        }
        s
    }
}

/// Λ and voxel volumes over a δ grid, with doubling ratios for δ ≤ 1/2.
pub fn doubling_report(
    sys: &VectorFieldSystem,
    x: &[f64],
    deltas: &[f64],
    nu: &Density,
    opts: &VolumeOptions,
    band: Option<(f64, f64)>,
) -> Result<VolumeReport> {
    if deltas.is_empty() || deltas.windows(2).any(|w| w[0] >= w[1]) || deltas[0] <= 0.0 {
        return Err(Error::InvalidArgument(
            "delta grid must be positive and strictly increasing".into(),
        ));
    }
    let mut vols = Vec::with_capacity(deltas.len());
    for &d in deltas {
        vols.push(volume_estimate(sys, x, d, nu, opts)?);
    }
    let mut rows = Vec::with_capacity(deltas.len());
    for (i, &d) in deltas.iter().enumerate() {
        let lam = lambda(sys, x, d, nu)?;
        let v = vols[i].volume;
        let doubling = if d <= 0.5 {
            let twice = match deltas.iter().position(|&e| (e - 2.0 * d).abs() <= 1e-12 * e) {
                Some(j) => vols[j].volume,
                None => volume_estimate(sys, x, 2.0 * d, nu, opts)?.volume,
            };
            (v > 0.0).then(|| twice / v)
        } else {
            None
        };
        rows.push(VolumeRow {
            delta: d,
            lambda: lam,
            mc_volume: v,
            ratio: (lam > 0.0).then(|| v / lam),
            doubling,
            voxel: vols[i].voxel,
        });
    }
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let ratio_spread = if ratios.is_empty() {
        f64::INFINITY
    } else {
        ratios.iter().cloned().fold(0.0, f64::max) / ratios.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let flagged = match band {
        Some((lo, hi)) => rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.ratio.is_none_or(|q| q < lo || q > hi))
            .map(|(i, _)| i)
            .collect(),
        None => Vec::new(),
    };
    Ok(VolumeReport {
        rows,
        samples: opts.samples,
        seed: opts.seed,
        ratio_spread,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euclid(n: usize) -> VectorFieldSystem {
        let cols: Vec<Vec<String>> = (0..n)
            .map(|j| (0..n).map(|i| if i == j { "1".into() } else { "0".into() }).collect())
            .collect();
        let refs: Vec<Vec<&str>> = cols.iter().map(|c| c.iter().map(|s| s.as_str()).collect()).collect();
        let spec: Vec<(&[&str], f64)> = refs.iter().map(|c| (c.as_slice(), 1.0)).collect();
        VectorFieldSystem::from_real(n, &spec).unwrap()
    }

    fn heisenberg_graded() -> VectorFieldSystem {
        VectorFieldSystem::from_real(
            3,
            &[
                (&["1", "0", "2*x2"], 1.0),
                (&["0", "1", "-2*x1"], 1.0),
                (&["0", "0", "1"], 2.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn euclidean_lambda_is_power_of_delta() {
        for n in 1..=3 {
            let l = lambda(&euclid(n), &vec![0.3; n], 0.5, &Density::lebesgue(n)).unwrap();
            assert!((l - 0.5f64.powi(n as i32)).abs() < 1e-15);
        }
    }

    #[test]
    fn heisenberg_lambda_scales_by_sixteen() {
        let h = heisenberg_graded();
        let nu = Density::lebesgue(3);
        let a = lambda(&h, &[0.0; 3], 0.25, &nu).unwrap();
        let b = lambda(&h, &[0.0; 3], 0.5, &nu).unwrap();
        assert!((a - 0.25f64.powi(4)).abs() < 1e-15);
        assert!((b / a - 16.0).abs() < 1e-12);
    }

    #[test]
    fn unit_disk_area() {
        let opts = VolumeOptions {
            samples: 20_000,
            voxel: Voxel::Absolute(0.05),
            seed: 1,
            ..Default::default()
        };
        let v = volume_estimate(&euclid(2), &[0.0, 0.0], 1.0, &Density::lebesgue(2), &opts).unwrap();
        assert!((v.volume / std::f64::consts::PI - 1.0).abs() < 0.1, "{v:?}");
    }

    #[test]
    fn zero_radius_has_zero_volume() {
        let v = volume_estimate(&euclid(2), &[0.0, 0.0], 0.0, &Density::lebesgue(2), &VolumeOptions::default()).unwrap();
        assert_eq!(v.volume, 0.0);
    }

    #[test]
    fn too_few_samples_is_unreliable() {
        let opts = VolumeOptions {
            samples: 3,
            ..Default::default()
        };
        let e = volume_estimate(&euclid(2), &[0.0, 0.0], 1.0, &Density::lebesgue(2), &opts);
        assert!(matches!(e, Err(Error::Unreliable(_))));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let opts = VolumeOptions {
            samples: 2000,
            cfg: FlowConfig::new(16).unwrap(),
            ..Default::default()
        };
        let r = doubling_report(&euclid(2), &[0.0, 0.0], &[0.25, 0.5, 1.0], &Density::lebesgue(2), &opts, None)
            .unwrap();
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("delta,lambda,mc_volume,ratio,doubling\n"));
        assert!(r.rows[2].doubling.is_none());
        // a homogeneous geometry with a proportional voxel gives identical occupancy
        let d = r.rows[0].doubling.unwrap();
        assert!((d - 4.0).abs() < 1e-9, "{d}");
    }
}
