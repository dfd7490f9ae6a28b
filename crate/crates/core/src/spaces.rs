//! Grid and flow estimates of the Hölder, Zygmund, C^m, C^m_W and analytic
//! norms, and the comparison inequalities between them.
//!
//! Every supremum is taken over a deterministic finite set (grid points,
//! grid pairs, flow samples), so each estimate is a lower bound for the
//! true norm on the box.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{parse_expression, Expression};
use crate::fields::VectorFieldSystem;
use crate::flows::{exp_map, flow_for_time, sphere_directions, Domain, FlowConfig};
use crate::jet::{Jet, JetLayout};
use crate::registry::{Named, Registry};

/// Cap on point pairs (and on second-difference triples) per supremum.
pub const MAX_PAIRS: usize = 1_000_000;
pub const MIN_RESOLUTION: usize = 8;

/// Values on the grid: an expression (derivatives by Taylor jets) or a
/// table in row-major order (last axis fastest, no derivatives).
#[derive(Debug, Clone, PartialEq)]
pub enum GridSource {
    Expression(Expression),
    Tabulated(Vec<f64>),
}

/// A function sampled on a closed box with `resolution[k]` points per
/// axis (endpoints included).
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    f: GridSource,
    lo: Vec<f64>,
    hi: Vec<f64>,
    resolution: Vec<usize>,
}

impl GridFunction {
    pub fn new(f: Expression, lo: Vec<f64>, hi: Vec<f64>, resolution: Vec<usize>) -> Result<Self> {
        let d = f.dimension();
        if lo.len() != d || hi.len() != d || resolution.len() != d {
            return Err(Error::Dimension("box and resolution must match the expression dimension".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidArgument("box must have lo < hi on every axis".into()));
        }
        if resolution.iter().any(|&n| n < MIN_RESOLUTION) {
            return Err(Error::InvalidArgument(format!(
                "resolution must be at least {MIN_RESOLUTION} per axis"
            )));
        }
        Ok(GridFunction {
            f: GridSource::Expression(f),
            lo,
            hi,
            resolution,
        })
    }

    pub fn tabulated(values: Vec<f64>, lo: Vec<f64>, hi: Vec<f64>, resolution: Vec<usize>) -> Result<Self> {
        let d = resolution.len();
        let probe = Self::new(Expression::constant(0.0, d), lo, hi, resolution)?;
        if values.len() != probe.len() {
            return Err(Error::Dimension(format!(
                "table has {} values, grid has {}",
                values.len(),
                probe.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("tabulated values must be finite".into()));
        }
        Ok(GridFunction {
            f: GridSource::Tabulated(values),
            ..probe
        })
    }

    /// Same resolution on every axis.
    pub fn uniform(f: Expression, lo: f64, hi: f64, n: usize) -> Result<Self> {
        let d = f.dimension();
        Self::new(f, vec![lo; d], vec![hi; d], vec![n; d])
    }

    pub fn source(&self) -> &GridSource {
        &self.f
    }

    /// The expression, or an error for tabulated data.
    pub fn expression(&self) -> Result<&Expression> {
        match &self.f {
            GridSource::Expression(e) => Ok(e),
            GridSource::Tabulated(_) => Err(Error::InvalidArgument(
                "this estimate needs a formula, not tabulated values".into(),
            )),
        }
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn dim(&self) -> usize {
        self.resolution.len()
    }

    fn step(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|k| (self.hi[k] - self.lo[k]) / (self.resolution[k] - 1) as f64)
            .collect()
    }

    fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    fn unflatten(&self, mut i: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            idx[k] = i % self.resolution[k];
            i /= self.resolution[k];
        }
        idx
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        let h = self.step();
        (0..self.len())
            .map(|i| {
                self.unflatten(i)
                    .iter()
                    .enumerate()
                    .map(|(k, &j)| self.lo[k] + j as f64 * h[k])
                    .collect()
            })
            .collect()
    }

    /// ∂^α f at every grid point, for all α with |α| ≤ m (graded order).
    pub fn derivative_table(&self, m: usize) -> Result<(Vec<Vec<u32>>, Vec<Vec<f64>>)> {
        let layout = JetLayout::new(self.dim(), m);
        let f = match &self.f {
            GridSource::Tabulated(v) if m == 0 => return Ok((vec![vec![0; self.dim()]], vec![v.clone()])),
            _ => self.expression()?,
        };
        let alphas = layout.exponents().to_vec();
        if m <= 1 {
            // values and gradients are much cheaper than jets
            let rows: Vec<(f64, Vec<f64>)> = self
                .points()
                .par_iter()
                .map(|p| Ok(f.eval_with_gradient(p)?))
                .collect::<Result<_>>()?;
            let mut table = vec![rows.iter().map(|r| r.0).collect::<Vec<f64>>()];
            if m == 1 {
                // first-order exponents in graded order are e_1, .., e_d
                table.extend((0..self.dim()).map(|k| rows.iter().map(|r| r.1[k]).collect()));
            }
            return Ok((alphas, table));
        }
        let jets: Vec<Jet> = self
            .points()
            .par_iter()
            .map(|p| Ok(f.taylor_with(p, &layout)?))
            .collect::<Result<_>>()?;
        let table = alphas
            .iter()
            .map(|a| jets.iter().map(|j| j.derivative(a)).collect())
            .collect();
        Ok((alphas, table))
    }
}

/// Integer offsets (lexicographically positive) used for pairs and triples:
/// every offset when affordable, else a local block plus a coarse lattice.
fn offsets(shape: &[usize], per_offset_cost: &dyn Fn(&[i64]) -> usize, budget: usize) -> Vec<Vec<i64>> {
    let d = shape.len();
    let all = |limit: &dyn Fn(usize) -> i64, stride: i64| -> Vec<Vec<i64>> {
        let mut out = Vec::new();
        let mut cur = vec![0i64; d];
        fn rec(
            k: usize,
            cur: &mut Vec<i64>,
            out: &mut Vec<Vec<i64>>,
            limit: &dyn Fn(usize) -> i64,
            stride: i64,
        ) {
            if k == cur.len() {
                if cur.iter().find(|v| **v != 0).is_some_and(|v| *v > 0) {
                    out.push(cur.clone());
                }
                return;
            }
            let l = limit(k);
            let mut v = -(l / stride) * stride;
            while v <= l {
                cur[k] = v;
                rec(k + 1, cur, out, limit, stride);
                v += stride;
            }
        }
        rec(0, &mut cur, &mut out, limit, stride);
        out
    };
    let full = all(&|k| shape[k] as i64 - 1, 1);
    let cost: usize = full.iter().map(|o| per_offset_cost(o)).sum();
    if cost <= budget {
        return full;
    }
    // local block |o|∞ ≤ K within half the budget
    let mut k_local = 1i64;
    loop {
        let next = all(&|k| (k_local + 1).min(shape[k] as i64 - 1), 1);
        let c: usize = next.iter().map(|o| per_offset_cost(o)).sum();
        if c > budget / 2 || next.len() == full.len() {
            break;
        }
        k_local += 1;
    }
    let mut out = all(&|k| k_local.min(shape[k] as i64 - 1), 1);
    // coarse lattice: multiples of a power-of-two stride, beyond the local block
    let mut stride = 2i64;
    loop {
        let coarse: Vec<Vec<i64>> = all(&|k| shape[k] as i64 - 1, stride)
            .into_iter()
            .filter(|o| o.iter().any(|v| v.abs() > k_local))
            .collect();
        let c: usize = coarse.iter().map(|o| per_offset_cost(o)).sum();
        if c <= budget / 2 {
            out.extend(coarse);
            break;
        }
        stride *= 2;
    }
    out
}

struct Grid<'a> {
    shape: &'a [usize],
    step: Vec<f64>,
}

impl Grid<'_> {
    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.shape.len()];
        for k in (0..self.shape.len().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.shape[k + 1];
        }
        s
    }

    /// Number of base points i with i + mult·o inside the grid.
    fn valid(&self, o: &[i64], mult: i64) -> usize {
        self.shape
            .iter()
            .zip(o)
            .map(|(&n, &v)| (n as i64 - (mult * v).abs()).max(0) as usize)
            .product()
    }

    fn length(&self, o: &[i64]) -> f64 {
        o.iter()
            .zip(&self.step)
            .map(|(v, h)| (*v as f64 * h).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Calls `f(base, offset_flat)` for every base with base + mult·o in the grid.
    fn for_each_base(&self, o: &[i64], mult: i64, mut f: impl FnMut(usize, isize)) {
        let d = self.shape.len();
        let strides = self.strides();
        let lo: Vec<usize> = o.iter().map(|&v| if v < 0 { (-mult * v) as usize } else { 0 }).collect();
        let hi: Vec<usize> = o
            .iter()
            .zip(self.shape)
            .map(|(&v, &n)| if v > 0 { n.saturating_sub((mult * v) as usize) } else { n })
            .collect();
        if (0..d).any(|k| lo[k] >= hi[k]) {
            return;
        }
        let flat_off: isize = o.iter().zip(&strides).map(|(v, s)| *v as isize * *s as isize).sum();
        let mut idx = lo.clone();
        loop {
            let base: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
            f(base, flat_off);
            let mut k = d;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < hi[k] {
                    break;
                }
                idx[k] = lo[k];
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct Sup {
    value: f64,
    pairs: usize,
}

/// Largest difference along each offset; the sup over pairs of a
/// difference quotient is then max over offsets of diff · |o|^{-s}.
struct Profile {
    /// (|o|, max over bases of the difference) per offset.
    rows: Vec<(f64, f64)>,
    samples: usize,
}

impl Profile {
    /// First differences v(x + o) − v(x) when `order` is 1, second
    /// differences v(x + 2o) − 2v(x + o) + v(x) when it is 2.
    fn new(g: &Grid, v: &[f64], order: i64) -> Profile {
        let offs = offsets(g.shape, &|o| g.valid(o, order), MAX_PAIRS);
        let rows: Vec<(f64, f64, usize)> = offs
            .par_iter()
            .map(|o| {
                let mut best: f64 = 0.0;
                let mut n = 0;
                g.for_each_base(o, order, |b, off| {
                    let b = b as isize;
                    let d = if order == 1 {
                        v[(b + off) as usize] - v[b as usize]
                    } else {
                        v[(b + 2 * off) as usize] - 2.0 * v[(b + off) as usize] + v[b as usize]
                    };
                    best = best.max(d.abs());
                    n += 1;
                });
                (g.length(o), best, n)
            })
            .collect();
        Profile {
            samples: rows.iter().map(|r| r.2).sum(),
            rows: rows.into_iter().map(|r| (r.0, r.1)).collect(),
        }
    }

    fn sup(&self, s: f64) -> Sup {
        Sup {
            value: self.rows.iter().map(|(len, d)| d * len.powf(-s)).fold(0.0, f64::max),
            pairs: self.samples,
        }
    }
}

/// sup over grid pairs of |v(x) − v(y)| / |x − y|^s.
fn holder_seminorm(g: &Grid, v: &[f64], s: f64) -> Sup {
    Profile::new(g, v, 1).sup(s)
}

/// sup over grid triples of |v(x + 2h) − 2v(x + h) + v(x)| / |h|^s.
fn second_difference(g: &Grid, v: &[f64], s: f64) -> Sup {
    Profile::new(g, v, 2).sup(s)
}

fn sup_abs(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormKind {
    Holder { m: usize, s: f64 },
    /// Zygmund of total order m + s with s ∈ (0, 1].
    Zygmund { m: usize, s: f64 },
    Cm { m: usize },
    Cw { m: usize },
    ZygmundW { s: f64 },
    Analytic { r: f64 },
}

impl NormKind {
    pub fn label(&self) -> String {
        match self {
            NormKind::Holder { m, s } => format!("holder(m={m},s={s})"),
            NormKind::Zygmund { m, s } => format!("zygmund(order={})", *m as f64 + s),
            NormKind::Cm { m } => format!("cm(m={m})"),
            NormKind::Cw { m } => format!("cw(m={m})"),
            NormKind::ZygmundW { s } => format!("zygmund_w(s={s})"),
            NormKind::Analytic { r } => format!("analytic(r={r})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormReport {
    pub kind: NormKind,
    pub value: f64,
    /// Contribution of the sup-norm terms.
    pub sup_part: f64,
    /// Contribution of the difference-quotient terms.
    pub difference_part: f64,
    pub grid: Vec<usize>,
    /// Pairs, triples or flow samples examined.
    pub samples: usize,
    /// Analytic norms: (α, c_α) with f = Σ c_α t^α / α!.
    pub coefficients: Option<Vec<(Vec<u32>, f64)>>,
}

impl NormReport {
    pub fn to_csv(&self) -> String {
        let grid = self.grid.iter().map(|g| g.to_string()).collect::<Vec<_>>().join("x");
        format!(
            "kind,value,sup_part,difference_part,grid,samples\n{},{:?},{:?},{:?},{},{}\n",
            self.kind.label(),
            self.value,
            self.sup_part,
            self.difference_part,
            grid,
            self.samples
        )
    }
}

fn grid_of(gf: &GridFunction) -> Grid<'_> {
    Grid {
        shape: &gf.resolution,
        step: gf.step(),
    }
}

/// Derivative tables with |α| ≤ m, computed once and shared between norms.
pub struct DerivativeTables<'a> {
    gf: &'a GridFunction,
    alphas: Vec<Vec<u32>>,
    tables: Vec<Vec<f64>>,
    /// First- and second-difference profiles per table.
    profiles: Vec<(Profile, Profile)>,
}

impl<'a> DerivativeTables<'a> {
    pub fn new(gf: &'a GridFunction, m: usize) -> Result<Self> {
        let (alphas, tables) = gf.derivative_table(m)?;
        let g = grid_of(gf);
        let profiles = tables
            .iter()
            .map(|v| (Profile::new(&g, v, 1), Profile::new(&g, v, 2)))
            .collect();
        Ok(DerivativeTables {
            gf,
            alphas,
            tables,
            profiles,
        })
    }

    fn upto(&self, m: usize) -> Result<impl Iterator<Item = (&Vec<f64>, &(Profile, Profile))>> {
        if self.alphas.iter().map(|a| a.iter().sum::<u32>()).max().unwrap_or(0) < m as u32 {
            return Err(Error::InvalidArgument(format!("tables do not reach order {m}")));
        }
        Ok(self
            .alphas
            .iter()
            .zip(self.tables.iter().zip(&self.profiles))
            .filter(move |(a, _)| a.iter().sum::<u32>() <= m as u32)
            .map(|(_, t)| t))
    }

    /// Σ_{|α| ≤ m} (sup |∂^α f| + sup |x − y|^{-s} |∂^α f(x) − ∂^α f(y)|).
    pub fn holder(&self, m: usize, s: f64) -> Result<NormReport> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidArgument("Hölder exponent must lie in [0, 1]".into()));
        }
        let mut sup_part = 0.0;
        let mut diff = 0.0;
        let mut samples = 0;
        for (v, (first, _)) in self.upto(m)? {
            sup_part += sup_abs(v);
            let h = first.sup(s);
            diff += h.value;
            samples += h.pairs;
        }
        Ok(NormReport {
            kind: NormKind::Holder { m, s },
            value: sup_part + diff,
            sup_part,
            difference_part: diff,
            grid: self.gf.resolution.clone(),
            samples,
            coefficients: None,
        })
    }

    /// Zygmund norm of order m + s: Σ_{|α| ≤ m} (‖∂^α f‖_{C^{0,s/2}} + second-difference part).
    pub fn zygmund(&self, m: usize, s: f64) -> Result<NormReport> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::InvalidArgument("Zygmund exponent must lie in (0, 1]".into()));
        }
        let mut sup_part = 0.0;
        let mut diff = 0.0;
        let mut samples = 0;
        for (v, (first, second)) in self.upto(m)? {
            sup_part += sup_abs(v);
            let h = first.sup(s / 2.0);
            let z = second.sup(s);
            diff += h.value + z.value;
            samples += h.pairs + z.pairs;
        }
        Ok(NormReport {
            kind: NormKind::Zygmund { m, s },
            value: sup_part + diff,
            sup_part,
            difference_part: diff,
            grid: self.gf.resolution.clone(),
            samples,
            coefficients: None,
        })
    }
}

/// Σ_{|α| ≤ m} (sup |∂^α f| + sup |x − y|^{-s} |∂^α f(x) − ∂^α f(y)|).
pub fn holder_norm(gf: &GridFunction, m: usize, s: f64) -> Result<NormReport> {
    DerivativeTables::new(gf, m)?.holder(m, s)
}

/// Zygmund norm of order m + s: Σ_{|α| ≤ m} (‖∂^α f‖_{C^{0,s/2}} + second-difference part).
pub fn zygmund_norm(gf: &GridFunction, m: usize, s: f64) -> Result<NormReport> {
    DerivativeTables::new(gf, m)?.zygmund(m, s)
}

/// Split a positive order into m + s with s ∈ (0, 1].
pub fn split_order(order: f64) -> Result<(usize, f64)> {
    if !(order > 0.0 && order.is_finite()) {
        return Err(Error::InvalidArgument("order must be positive".into()));
    }
    let m = (order.ceil() as usize).saturating_sub(1);
    Ok((m, order - m as f64))
}

/// The second-difference part alone (no Hölder or sup terms), for f itself.
pub fn zygmund_second_difference(gf: &GridFunction, s: f64) -> Result<f64> {
    let (_, table) = gf.derivative_table(0)?;
    Ok(second_difference(&grid_of(gf), &table[0], s).value)
}

/// The Lipschitz quotient sup |f(x) − f(y)| / |x − y| alone.
pub fn lipschitz_quotient(gf: &GridFunction) -> Result<f64> {
    let (_, table) = gf.derivative_table(0)?;
    Ok(holder_seminorm(&grid_of(gf), &table[0], 1.0).value)
}

/// Σ_{|α| ≤ m} sup |∂^α f| over multi-indices α ∈ ℕ^n.
pub fn cm_norm(gf: &GridFunction, m: usize) -> Result<NormReport> {
    let (_, table) = gf.derivative_table(m)?;
    let value: f64 = table.iter().map(|v| sup_abs(v)).sum();
    Ok(NormReport {
        kind: NormKind::Cm { m },
        value,
        sup_part: value,
        difference_part: 0.0,
        grid: gf.resolution.clone(),
        samples: gf.len(),
        coefficients: None,
    })
}

/// Σ over ordered lists α of coordinate directions with |α| ≤ m of
/// sup |∂_{α_1} ⋯ ∂_{α_k} f|; equals the C^m_W norm of the gradient frame.
pub fn cm_norm_ordered(gf: &GridFunction, m: usize) -> Result<f64> {
    let (alphas, table) = gf.derivative_table(m)?;
    Ok(alphas
        .iter()
        .zip(&table)
        .map(|(a, v)| orderings(a) * sup_abs(v))
        .sum())
}

/// Number of ordered lists with multiplicities α: |α|! / α!.
fn orderings(alpha: &[u32]) -> f64 {
    let fact = |n: u32| (1..=n).map(|k| k as f64).product::<f64>();
    fact(alpha.iter().sum()) / alpha.iter().map(|&a| fact(a)).product::<f64>()
}

/// Ordered multi-indices over `n` fields with length ≤ m (the empty one first).
pub fn ordered_multi_indices(n: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..m {
        let mut next = Vec::new();
        for a in &layer {
            for j in 0..n {
                let mut b: Vec<usize> = a.clone();
                b.push(j);
                next.push(b);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Central-difference step for derivatives of total order k along flows.
fn flow_step(k: usize) -> f64 {
    match k {
        0 | 1 => 1e-5,
        2 => 1e-4,
        _ => 1e-3,
    }
}

/// W^α f(x) = W_{α_1}(W_{α_2}(⋯ f))(x) by nested symmetric differences
/// along the flows e^{±hW_j}.
pub fn w_derivative(
    f: &Expression,
    sys: &VectorFieldSystem,
    alpha: &[usize],
    x: &[f64],
    domain: &Domain,
    cfg: &FlowConfig,
) -> Result<f64> {
    let h = flow_step(alpha.len());
    let q = sys.q();
    fn rec(
        f: &Expression,
        sys: &VectorFieldSystem,
        alpha: &[usize],
        x: &[f64],
        h: f64,
        q: usize,
        domain: &Domain,
        cfg: &FlowConfig,
    ) -> Result<f64> {
        let Some((&j, rest)) = alpha.split_first() else {
            return Ok(f.eval(x)?);
        };
        let mut a = vec![0.0; q];
        a[j] = 1.0;
        let plus = flow_for_time(sys, x, &a, h, domain, cfg)?;
        let minus = flow_for_time(sys, x, &a, -h, domain, cfg)?;
        Ok((rec(f, sys, rest, &plus, h, q, domain, cfg)? - rec(f, sys, rest, &minus, h, q, domain, cfg)?) / (2.0 * h))
    }
    rec(f, sys, alpha, x, h, q, domain, cfg)
}

/// Σ over ordered α with |α| ≤ m of sup over the region samples of |W^α f|.
pub fn cw_norm(
    f: &Expression,
    sys: &VectorFieldSystem,
    m: usize,
    region: &[Vec<f64>],
    cfg: &FlowConfig,
) -> Result<NormReport> {
    if m > 3 {
        return Err(Error::InvalidArgument("C^m_W estimates support m ≤ 3".into()));
    }
    let real = sys.real_view();
    let alphas = ordered_multi_indices(real.q(), m);
    let sups: Vec<f64> = alphas
        .par_iter()
        .map(|a| {
            region.iter().try_fold(0.0f64, |acc, x| {
                Ok(acc.max(w_derivative(f, &real, a, x, &Domain::Everywhere, cfg)?.abs()))
            })
        })
        .collect::<Result<_>>()?;
    let value: f64 = sups.iter().sum();
    Ok(NormReport {
        kind: NormKind::Cw { m },
        value,
        sup_part: value,
        difference_part: 0.0,
        grid: vec![region.len()],
        samples: region.len() * alphas.len(),
        coefficients: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZygmundWOptions {
    pub directions: usize,
    /// Step sizes h (and Hölder radii) are 2^{-k} for k in 0..levels.
    pub levels: usize,
    pub cfg: FlowConfig,
    pub domain: Domain,
}

impl Default for ZygmundWOptions {
    fn default() -> Self {
        ZygmundWOptions {
            directions: 32,
            levels: 8,
            cfg: FlowConfig::default(),
            domain: Domain::Everywhere,
        }
    }
}

/// Lower estimate of the vector-field Zygmund norm using constant-coefficient
/// paths only. For the Hölder part, y = e^{δθ·W}x with |θ| < 1 lies in
/// B(x, δ), so δ^{-s/2}|f(y) − f(x)| does not exceed the true quotient.
pub fn zygmund_w_norm(
    f: &Expression,
    sys: &VectorFieldSystem,
    s: f64,
    region: &[Vec<f64>],
    opts: &ZygmundWOptions,
) -> Result<NormReport> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::InvalidArgument("Zygmund exponent must lie in (0, 1]".into()));
    }
    let real = sys.real_view();
    let dirs: Vec<Vec<f64>> = sphere_directions(opts.directions, real.q())
        .into_iter()
        .map(|d| d.into_iter().map(|v| v * (1.0 - 1e-9)).collect())
        .collect();
    let per_point: Vec<(f64, f64, f64, usize)> = region
        .par_iter()
        .map(|x| {
            let fx = f.eval(x)?;
            let (mut hol, mut zyg, mut n) = (0.0f64, 0.0f64, 0);
            for d in &dirs {
                for k in 0..opts.levels {
                    let h = 0.5f64.powi(k as i32);
                    let a1: Vec<f64> = d.iter().map(|v| v * h).collect();
                    let a2: Vec<f64> = d.iter().map(|v| v * 2.0 * h).collect();
                    let (y1, y2) = match (
                        exp_map(&real, x, &a1, &opts.domain, &opts.cfg),
                        exp_map(&real, x, &a2, &opts.domain, &opts.cfg),
                    ) {
                        (Ok(a), Ok(b)) => (a, b),
                        _ => continue,
                    };
                    let (f1, f2) = (f.eval(&y1)?, f.eval(&y2)?);
                    hol = hol.max(h.powf(-s / 2.0) * (f1 - fx).abs());
                    zyg = zyg.max(h.powf(-s) * (f2 - 2.0 * f1 + fx).abs());
                    n += 1;
                }
            }
            Ok((fx.abs(), hol, zyg, n))
        })
        .collect::<Result<_>>()?;
    let sup_part = per_point.iter().map(|p| p.0).fold(0.0, f64::max);
    let hol = per_point.iter().map(|p| p.1).fold(0.0, f64::max);
    let zyg = per_point.iter().map(|p| p.2).fold(0.0, f64::max);
    Ok(NormReport {
        kind: NormKind::ZygmundW { s },
        value: sup_part + hol + zyg,
        sup_part,
        difference_part: hol + zyg,
        grid: vec![region.len()],
        samples: per_point.iter().map(|p| p.3).sum(),
        coefficients: None,
    })
}

/// Power series f(t) = Σ c_α t^α / α! (finitely many terms).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticSeries {
    pub vars: usize,
    pub terms: Vec<(Vec<u32>, f64)>,
}

fn alpha_factorial(a: &[u32]) -> f64 {
    a.iter().map(|&k| (1..=k).map(|i| i as f64).product::<f64>()).product()
}

impl AnalyticSeries {
    pub fn new(vars: usize, terms: Vec<(Vec<u32>, f64)>) -> Result<Self> {
        if terms.iter().any(|(a, _)| a.len() != vars) {
            return Err(Error::Dimension("multi-index length differs from the variable count".into()));
        }
        Ok(AnalyticSeries { vars, terms })
    }

    /// Taylor expansion of an expression at p up to `degree`, in the c_α convention.
    pub fn from_expression(f: &Expression, p: &[f64], degree: usize) -> Result<Self> {
        let jet = f.taylor(p, degree)?;
        let layout: &Arc<JetLayout> = jet.layout();
        let terms = layout
            .exponents()
            .iter()
            .zip(jet.coefficients())
            .filter(|(_, c)| **c != 0.0)
            .map(|(a, c)| (a.clone(), c * alpha_factorial(a)))
            .collect();
        Ok(AnalyticSeries { vars: f.dimension(), terms })
    }

    /// Σ |c_α| r^{|α|} / α!.
    pub fn norm(&self, r: f64) -> f64 {
        self.terms
            .iter()
            .map(|(a, c)| c.abs() * r.powi(a.iter().sum::<u32>() as i32) / alpha_factorial(a))
            .sum()
    }

    /// Coefficients of the product: c_γ = Σ_{α+β=γ} γ!/(α!β!) a_α b_β.
    pub fn product(&self, other: &AnalyticSeries) -> Result<AnalyticSeries> {
        if self.vars != other.vars {
            return Err(Error::Dimension("series in different variable counts".into()));
        }
        let mut acc: std::collections::BTreeMap<Vec<u32>, f64> = Default::default();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                let g: Vec<u32> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                let w = alpha_factorial(&g) / (alpha_factorial(a) * alpha_factorial(b));
                *acc.entry(g).or_default() += w * ca * cb;
            }
        }
        Ok(AnalyticSeries {
            vars: self.vars,
            terms: acc.into_iter().collect(),
        })
    }
}

pub fn analytic_norm(series: &AnalyticSeries, r: f64) -> Result<NormReport> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument("radius must be positive".into()));
    }
    let value = series.norm(r);
    Ok(NormReport {
        kind: NormKind::Analytic { r },
        value,
        sup_part: value,
        difference_part: 0.0,
        grid: Vec::new(),
        samples: series.terms.len(),
        coefficients: Some(series.terms.clone()),
    })
}

// ---------------------------------------------------------------------------
// estimator registry

/// Everything an estimator may need; each one reads only its own fields.
#[derive(Clone)]
pub struct NormInput<'a> {
    pub function: &'a GridFunction,
    pub system: Option<&'a VectorFieldSystem>,
    pub m: usize,
    pub s: f64,
    pub r: f64,
    /// Sample points for flow-based estimators (grid points when empty).
    pub region: Vec<Vec<f64>>,
    pub cfg: FlowConfig,
    /// Truncation degree for analytic series.
    pub degree: usize,
}

impl<'a> NormInput<'a> {
    pub fn new(function: &'a GridFunction) -> Self {
        NormInput {
            function,
            system: None,
            m: 0,
            s: 1.0,
            r: 1.0,
            region: Vec::new(),
            cfg: FlowConfig::default(),
            degree: 12,
        }
    }

    fn region(&self) -> Vec<Vec<f64>> {
        if self.region.is_empty() {
            self.function.points()
        } else {
            self.region.clone()
        }
    }

    fn system(&self) -> Result<&'a VectorFieldSystem> {
        self.system
            .ok_or_else(|| Error::InvalidArgument("this estimator needs a vector field system".into()))
    }
}

pub trait NormEstimator: Named + Send + Sync {
    fn describe(&self) -> &str;
    fn estimate(&self, input: &NormInput) -> Result<NormReport>;
}

macro_rules! estimator {
    ($ty:ident, $name:literal, $desc:literal, |$inp:ident| $body:expr) => {
        struct $ty;
        impl Named for $ty {
            fn name(&self) -> &str {
                $name
            }
        }
        impl NormEstimator for $ty {
            fn describe(&self) -> &str {
                $desc
            }
            fn estimate(&self, $inp: &NormInput) -> Result<NormReport> {
                $body
            }
        }
    };
}

estimator!(HolderEstimator, "holder", "Euclidean Hölder norm C^{m,s} on the grid", |i| holder_norm(
    i.function, i.m, i.s
));
estimator!(ZygmundEstimator, "zygmund", "Euclidean Zygmund norm of order m + s on the grid", |i| {
    zygmund_norm(i.function, i.m, i.s)
});
estimator!(CmEstimator, "cm", "Euclidean C^m norm on the grid", |i| cm_norm(i.function, i.m));
estimator!(CwEstimator, "cw", "C^m_W norm by differences along flows", |i| cw_norm(
    i.function.expression()?,
    i.system()?,
    i.m,
    &i.region(),
    &i.cfg
));
estimator!(
    ZygmundWEstimator,
    "zygmund_w",
    "vector-field Zygmund norm over constant-coefficient paths (lower estimate)",
    |i| zygmund_w_norm(
        i.function.expression()?,
        i.system()?,
        i.s,
        &i.region(),
        &ZygmundWOptions {
            cfg: i.cfg,
            ..Default::default()
        }
    )
);
estimator!(AnalyticEstimator, "analytic", "analytic norm of the Taylor series at the box centre", |i| {
    let gf = i.function;
    let centre: Vec<f64> = gf.lo.iter().zip(&gf.hi).map(|(a, b)| 0.5 * (a + b)).collect();
    analytic_norm(&AnalyticSeries::from_expression(gf.expression()?, &centre, i.degree)?, i.r)
});

pub fn estimators() -> Registry<dyn NormEstimator> {
    let mut r: Registry<dyn NormEstimator> = Registry::new();
    let all: Vec<Box<dyn NormEstimator>> = vec![
        Box::new(HolderEstimator),
        Box::new(ZygmundEstimator),
        Box::new(CmEstimator),
        Box::new(CwEstimator),
        Box::new(ZygmundWEstimator),
        Box::new(AnalyticEstimator),
    ];
    for e in all {
        r.register(e).expect("estimator names are unique");
    }
    r
}

// ---------------------------------------------------------------------------
// comparison inequalities

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub function: usize,
    pub statement: String,
    pub lhs: f64,
    /// Constant times the right-hand norm.
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub checks: Vec<InequalityCheck>,
    pub violations: usize,
    /// Largest lhs / rhs observed.
    pub worst_ratio: f64,
}

/// For each function and each (m, s):
/// ‖f‖_{C^{m,s₁}} ≤ 3‖f‖_{C^{m,s}} for s₁ ∈ {0, s/2},
/// ‖f‖_{𝒞^{m+s}} ≤ 5‖f‖_{C^{m,s}},
/// ‖f‖_{𝒞^{(m+s)/2}} ≤ 15‖f‖_{𝒞^{m+s}}.
pub fn check_space_inequalities(functions: &[GridFunction], params: &[(usize, f64)]) -> Result<InequalityReport> {
    let per: Vec<Vec<InequalityCheck>> = functions
        .par_iter()
        .enumerate()
        .map(|(idx, gf)| {
            let mut out = Vec::new();
            let mut push = |statement: String, lhs: f64, rhs: f64| {
                out.push(InequalityCheck {
                    function: idx,
                    statement,
                    lhs,
                    rhs,
                    holds: lhs <= rhs,
                });
            };
            let top = params.iter().map(|p| p.0).max().unwrap_or(0);
            let tables = DerivativeTables::new(gf, top)?;
            for &(m, s) in params {
                let h = tables.holder(m, s)?.value;
                for s1 in [0.0, s / 2.0] {
                    push(format!("C^({m},{s1}) <= 3 C^({m},{s})"), tables.holder(m, s1)?.value, 3.0 * h);
                }
                let z = tables.zygmund(m, s)?.value;
                push(format!("Z^{} <= 5 C^({m},{s})", m as f64 + s), z, 5.0 * h);
                let half = (m as f64 + s) / 2.0;
                let (m1, s1) = split_order(half)?;
                push(
                    format!("Z^{half} <= 15 Z^{}", m as f64 + s),
                    tables.zygmund(m1, s1)?.value,
                    15.0 * z,
                );
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let checks: Vec<InequalityCheck> = per.into_iter().flatten().collect();
    let violations = checks.iter().filter(|c| !c.holds).count();
    let worst_ratio = checks
        .iter()
        .map(|c| if c.rhs > 0.0 { c.lhs / c.rhs } else if c.lhs > 0.0 { f64::INFINITY } else { 0.0 })
        .fold(0.0, f64::max);
    Ok(InequalityReport {
        checks,
        violations,
        worst_ratio,
    })
}

/// Random trigonometric polynomial Σ a_k cos(π k·x) + b_k sin(π k·x) over
/// integer frequency vectors with max-degree ≤ `degree`.
pub fn random_trig_polynomial<R: Rng>(rng: &mut R, dim: usize, degree: usize) -> Result<Expression> {
    let mut terms = Vec::new();
    let mut freq = vec![0i64; dim];
    loop {
        let arg: Vec<String> = freq
            .iter()
            .enumerate()
            .filter(|(_, k)| **k != 0)
            .map(|(i, k)| format!("{k}*x{}", i + 1))
            .collect();
        let weight = 1.0 / (1.0 + freq.iter().map(|k| (k * k) as f64).sum::<f64>());
        let a = rng.random_range(-1.0..1.0) * weight;
        if arg.is_empty() {
            terms.push(format!("{a:?}"));
        } else {
            let b = rng.random_range(-1.0..1.0) * weight;
            let inner = arg.join(" + ");
            terms.push(format!("{a:?}*cos(pi*({inner})) + {b:?}*sin(pi*({inner}))"));
        }
        // advance the frequency odometer over 0..=degree in the first axis and
        // −degree..=degree in the rest (halving the lattice up to sign)
        let mut k = dim;
        loop {
            if k == 0 {
                return parse_expression(&terms.join(" + "), dim).map_err(Error::from);
            }
            k -= 1;
            let lo = if k == 0 { 0 } else { -(degree as i64) };
            freq[k] += 1;
            if freq[k] <= degree as i64 {
                break;
            }
            freq[k] = lo;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gf1(text: &str, n: usize) -> GridFunction {
        GridFunction::uniform(parse_expression(text, 1).unwrap(), -1.0, 1.0, n).unwrap()
    }

    #[test]
    fn holder_of_abs() {
        let r = holder_norm(&gf1("sqrt(x1^2)", 65), 0, 1.0).unwrap();
        assert!((r.value - 2.0).abs() < 0.04, "{}", r.value);
    }

    #[test]
    fn holder_of_constant() {
        for s in [0.0, 0.5, 1.0] {
            assert_eq!(holder_norm(&gf1("3", 17), 0, s).unwrap().value, 3.0);
        }
    }

    #[test]
    fn holder_of_square() {
        let r = holder_norm(&gf1("x1^2", 65), 0, 1.0).unwrap();
        assert!((r.value - 3.0).abs() < 0.06, "{}", r.value);
    }

    #[test]
    fn zygmund_of_linear_and_square() {
        let lin = gf1("2*x1 - 1", 33);
        let g = grid_of(&lin);
        let (_, t) = lin.derivative_table(0).unwrap();
        assert!(second_difference(&g, &t[0], 1.0).value < 1e-12);
        let sq = gf1("x1^2", 33);
        assert!((zygmund_second_difference(&sq, 1.0).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zygmund_not_lipschitz() {
        let f = "x1*log(sqrt(x1^2 + 1e-300))";
        let coarse = gf1(f, 257);
        let fine = gf1(f, 4097);
        let zc = zygmund_second_difference(&coarse, 1.0).unwrap();
        let zf = zygmund_second_difference(&fine, 1.0).unwrap();
        assert!(zc <= 3.0 && zf <= 3.0);
        assert!((zf / zc - 1.0).abs() < 0.1);
        assert!(lipschitz_quotient(&fine).unwrap() > lipschitz_quotient(&coarse).unwrap() * 1.4);
    }

    #[test]
    fn analytic_examples() {
        let t = AnalyticSeries::new(1, vec![(vec![1], 1.0)]).unwrap();
        assert_eq!(analytic_norm(&t, 2.0).unwrap().value, 2.0);
        assert_eq!(AnalyticSeries::new(1, vec![]).unwrap().norm(3.0), 0.0);
        let e = AnalyticSeries::from_expression(&parse_expression("exp(x1)", 1).unwrap(), &[0.0], 20).unwrap();
        assert!((e.norm(1.0) - std::f64::consts::E).abs() < 1e-12);
    }

    #[test]
    fn analytic_product_is_submultiplicative() {
        let f = AnalyticSeries::from_expression(&parse_expression("1 - 2*x1 + x1*x2^2", 2).unwrap(), &[0.0, 0.0], 6)
            .unwrap();
        let g = AnalyticSeries::from_expression(&parse_expression("3*x2 - x1^2 + 0.5", 2).unwrap(), &[0.0, 0.0], 6)
            .unwrap();
        let fg = f.product(&g).unwrap();
        for r in [0.3, 1.0, 2.5] {
            assert!(fg.norm(r) <= f.norm(r) * g.norm(r) * (1.0 + 1e-12));
        }
        // the product series is the Taylor series of the product
        let direct = AnalyticSeries::from_expression(
            &parse_expression("(1 - 2*x1 + x1*x2^2) * (3*x2 - x1^2 + 0.5)", 2).unwrap(),
            &[0.0, 0.0],
            6,
        )
        .unwrap();
        assert!((direct.norm(1.3) - fg.norm(1.3)).abs() < 1e-12);
    }

    #[test]
    fn ordered_indices_count() {
        assert_eq!(ordered_multi_indices(2, 3).len(), 1 + 2 + 4 + 8);
        assert_eq!(ordered_multi_indices(3, 0), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn offsets_respect_budget_and_keep_neighbours() {
        let shape = [4097usize];
        let g = Grid {
            shape: &shape,
            step: vec![1.0],
        };
        let offs = offsets(&shape, &|o| g.valid(o, 1), MAX_PAIRS);
        let total: usize = offs.iter().map(|o| g.valid(o, 1)).sum();
        assert!(total <= MAX_PAIRS);
        assert!(offs.contains(&vec![1]));
        assert!(offs.contains(&vec![4096]));
    }

    #[test]
    fn trig_polynomials_are_deterministic() {
        use crate::rng::item_rng;
        let a = random_trig_polynomial(&mut item_rng(1, 0, 0), 2, 2).unwrap();
        let b = random_trig_polynomial(&mut item_rng(1, 0, 0), 2, 2).unwrap();
        assert_eq!(a.to_string(), b.to_string());
        assert!(a.eval(&[0.3, -0.1]).unwrap().is_finite());
    }

    fn box_points(dim: usize, n: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
        GridFunction::uniform(Expression::constant(0.0, dim), lo, hi, n).unwrap().points()
    }

    #[test]
    fn tabulated_matches_expression() {
        let f = "x1*log(sqrt(x1^2 + 1e-300))";
        let g = gf1(f, 65);
        let values: Vec<f64> = g.points().iter().map(|p| g.expression().unwrap().eval(p).unwrap()).collect();
        let t = GridFunction::tabulated(values, vec![-1.0], vec![1.0], vec![65]).unwrap();
        assert_eq!(holder_norm(&t, 0, 0.5).unwrap().value, holder_norm(&g, 0, 0.5).unwrap().value);
        assert!(holder_norm(&t, 1, 0.5).is_err());
        assert!(GridFunction::tabulated(vec![0.0; 3], vec![-1.0], vec![1.0], vec![65]).is_err());
    }

    #[test]
    fn refinement_never_decreases_estimates() {
        let f = "sin(3*x1) + x1^3";
        let coarse = gf1(f, 17);
        let fine = gf1(f, 33);
        for (a, b) in [
            (holder_norm(&coarse, 1, 0.5), holder_norm(&fine, 1, 0.5)),
            (zygmund_norm(&coarse, 0, 1.0), zygmund_norm(&fine, 0, 1.0)),
            (cm_norm(&coarse, 2), cm_norm(&fine, 2)),
        ] {
            assert!(b.unwrap().value >= a.unwrap().value);
        }
    }

    #[test]
    fn cw_heisenberg_time_coordinate() {
        let g = crate::zoo::get_geometry("heisenberg").unwrap();
        let f = g.system.ambient().parse("t").unwrap();
        let region = box_points(3, 9, -1.0, 1.0);
        let r = cw_norm(&f, &g.system, 1, &region, &FlowConfig::default()).unwrap();
        assert!((r.value - 5.0).abs() < 0.1, "{}", r.value);
        let c = g.system.ambient().parse("-2.5").unwrap();
        let r = cw_norm(&c, &g.system, 3, &region[..20], &FlowConfig::default()).unwrap();
        assert!((r.value - 2.5).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn cw_gradient_frame_matches_euclidean() {
        let sys = VectorFieldSystem::from_real(2, &[(&["1", "0"], 1.0), (&["0", "1"], 1.0)]).unwrap();
        let f = parse_expression("sin(x1)*x2 + 0.3*x2^2", 2).unwrap();
        let gf = GridFunction::uniform(f.clone(), -1.0, 1.0, 9).unwrap();
        let region = gf.points();
        let cfg = FlowConfig::default();
        let w1 = cw_norm(&f, &sys, 1, &region, &cfg).unwrap().value;
        let e1 = cm_norm(&gf, 1).unwrap().value;
        assert!((w1 / e1 - 1.0).abs() < 0.01, "{w1} {e1}");
        let w2 = cw_norm(&f, &sys, 2, &region, &cfg).unwrap().value;
        let e2 = cm_norm_ordered(&gf, 2).unwrap();
        assert!((w2 / e2 - 1.0).abs() < 0.01, "{w2} {e2}");
    }

    #[test]
    fn cw_is_invariant_under_pullback() {
        // Φ(u, v) = (u + 0.3 v², v); pulled-back fields (dΦ)^{-1} W ∘ Φ
        let sys = VectorFieldSystem::from_real(2, &[(&["1", "x2"], 1.0), (&["0", "1 + 0.2*x1"], 1.0)]).unwrap();
        let pulled = VectorFieldSystem::from_real(
            2,
            &[
                (&["1 - 0.6*x2^2", "x2"], 1.0),
                (&["-0.6*x2*(1 + 0.2*(x1 + 0.3*x2^2))", "1 + 0.2*(x1 + 0.3*x2^2)"], 1.0),
            ],
        )
        .unwrap();
        let f = parse_expression("cos(x1) + x1*x2", 2).unwrap();
        let fphi = parse_expression("cos(x1 + 0.3*x2^2) + (x1 + 0.3*x2^2)*x2", 2).unwrap();
        let region = box_points(2, 8, -0.5, 0.5);
        let back: Vec<Vec<f64>> = region.iter().map(|p| vec![p[0] - 0.3 * p[1] * p[1], p[1]]).collect();
        let cfg = FlowConfig::default();
        let a = cw_norm(&f, &sys, 2, &region, &cfg).unwrap().value;
        let b = cw_norm(&fphi, &pulled, 2, &back, &cfg).unwrap().value;
        assert!((a / b - 1.0).abs() < 0.02, "{a} {b}");
    }

    #[test]
    fn zygmund_w_matches_euclidean_second_differences() {
        let sys = VectorFieldSystem::from_real(1, &[(&["1"], 1.0)]).unwrap();
        let f = parse_expression("x1^2", 1).unwrap();
        let r = zygmund_w_norm(&f, &sys, 1.0, &[vec![0.0]], &ZygmundWOptions::default()).unwrap();
        // |f(2hd) − 2f(hd)| = 2h²d² over h = 2^{-k} ≤ 1 with |d| < 1: at most 2
        assert!(r.value > 0.0 && r.value <= 1.0 + 2.0 + 1e-9);
        let lin = parse_expression("x1", 1).unwrap();
        let r = zygmund_w_norm(&lin, &sys, 1.0, &[vec![0.3]], &ZygmundWOptions::default()).unwrap();
        assert!((r.sup_part - 0.3).abs() < 1e-15);
        assert!(r.difference_part <= 1.0 + 1e-9);
    }

    #[test]
    fn inequalities_hold_for_simple_functions() {
        let fs = vec![gf1("x1^2", 17), gf1("4", 17), gf1("sin(2*x1)", 17)];
        let r = check_space_inequalities(&fs, &[(0, 0.5), (0, 1.0), (1, 0.5)]).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.worst_ratio <= 1.0);
        assert_eq!(r.checks.len(), 3 * 3 * 4);
    }

    #[test]
    fn registry_has_all_estimators() {
        let r = estimators();
        assert_eq!(r.names(), vec!["holder", "zygmund", "cm", "cw", "zygmund_w", "analytic"]);
        let gf = gf1("x1^2", 17);
        let mut inp = NormInput::new(&gf);
        inp.m = 1;
        assert_eq!(r.get("cm").unwrap().estimate(&inp).unwrap().value, 1.0 + 2.0);
        assert!(r.get("cw").unwrap().estimate(&inp).is_err());
    }
}
