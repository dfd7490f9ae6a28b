//! Truncated multivariate Taylor series ("jets"): forward mode carried to
//! arbitrary order. A jet of degree D at p stores the coefficients c_α of
//! f(p + t) = Σ c_α t^α for |α| ≤ D, so ∂^α f(p) = α! c_α.

use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

/// Monomial layout shared by all jets of one (variables, degree) pair.
#[derive(Debug, PartialEq)]
pub struct JetLayout {
    pub vars: usize,
    pub degree: usize,
    exponents: Vec<Vec<u32>>,
    /// (i, j, k) with monomial_i · monomial_j = monomial_k.
    products: Vec<(usize, usize, usize)>,
}

impl JetLayout {
    pub fn new(vars: usize, degree: usize) -> Arc<Self> {
        let mut exponents = Vec::new();
        for total in 0..=degree {
            let mut cur = vec![0u32; vars];
            push_with_total(&mut exponents, &mut cur, 0, total as u32);
        }
        let index = |e: &[u32]| exponents.iter().position(|x| x.as_slice() == e);
        let mut products = Vec::new();
        for (i, a) in exponents.iter().enumerate() {
            for (j, b) in exponents.iter().enumerate() {
                let s: Vec<u32> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                if let Some(k) = index(&s) {
                    products.push((i, j, k));
                }
            }
        }
        Arc::new(JetLayout {
            vars,
            degree,
            exponents,
            products,
        })
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    /// Multi-indices in graded order (total degree, then reverse lexicographic).
    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    pub fn position(&self, alpha: &[u32]) -> Option<usize> {
        self.exponents.iter().position(|e| e.as_slice() == alpha)
    }
}

fn push_with_total(out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>, at: usize, left: u32) {
    if at + 1 == cur.len() {
        cur[at] = left;
        out.push(cur.clone());
        cur[at] = 0;
        return;
    }
    if cur.is_empty() {
        if left == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for k in (0..=left).rev() {
        cur[at] = k;
        push_with_total(out, cur, at + 1, left - k);
    }
    cur[at] = 0;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    layout: Arc<JetLayout>,
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn constant(layout: &Arc<JetLayout>, v: f64) -> Self {
        let mut coeffs = vec![0.0; layout.len()];
        coeffs[0] = v;
        Jet {
            layout: layout.clone(),
            coeffs,
        }
    }

    /// The coordinate t_i shifted by its base value.
    pub fn variable(layout: &Arc<JetLayout>, v: f64, i: usize) -> Self {
        let mut j = Jet::constant(layout, v);
        if layout.degree >= 1 {
            let mut e = vec![0u32; layout.vars];
            e[i] = 1;
            let k = layout.position(&e).expect("degree-one monomial");
            j.coeffs[k] = 1.0;
        }
        j
    }

    pub fn layout(&self) -> &Arc<JetLayout> {
        &self.layout
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// ∂^α f(p) = α! c_α; zero beyond the truncation degree.
    pub fn derivative(&self, alpha: &[u32]) -> f64 {
        match self.layout.position(alpha) {
            Some(k) => self.coeffs[k] * alpha.iter().map(|&a| factorial(a)).product::<f64>(),
            None => 0.0,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs[1..].iter().all(|c| *c == 0.0)
    }

    fn nilpotent(&self) -> Jet {
        let mut n = self.clone();
        n.coeffs[0] = 0.0;
        n
    }

    /// g(s0 + u) = Σ g_k u^k where g_k = g^{(k)}(s0)/k!.
    fn compose(&self, taylor: &[f64]) -> Jet {
        let u = self.nilpotent();
        let mut r = Jet::constant(&self.layout, taylor[taylor.len() - 1]);
        for k in (0..taylor.len() - 1).rev() {
            r = r * u.clone();
            r.coeffs[0] += taylor[k];
        }
        r
    }

    fn degree(&self) -> usize {
        self.layout.degree
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cyc = [s, c, -s, -c];
        self.compose(&taylor(self.degree(), |k| cyc[k % 4]))
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cyc = [c, -s, -c, s];
        self.compose(&taylor(self.degree(), |k| cyc[k % 4]))
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        self.compose(&taylor(self.degree(), |_| e))
    }

    pub fn ln(&self) -> Jet {
        let v = self.value();
        let coeffs: Vec<f64> = (0..=self.degree())
            .map(|k| {
                if k == 0 {
                    v.ln()
                } else {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    sign / (k as f64 * v.powi(k as i32))
                }
            })
            .collect();
        self.compose(&coeffs)
    }

    /// Generalized binomial series of x^e around the base value (nonzero base).
    fn real_power(&self, e: f64) -> Jet {
        let v = self.value();
        let mut coeffs = Vec::with_capacity(self.degree() + 1);
        let mut binom = 1.0;
        for k in 0..=self.degree() {
            coeffs.push(binom * v.powf(e - k as f64));
            binom *= (e - k as f64) / (k as f64 + 1.0);
        }
        self.compose(&coeffs)
    }

    pub fn sqrt(&self) -> Jet {
        if self.is_constant() {
            return Jet::constant(&self.layout, self.value().sqrt());
        }
        self.real_power(0.5)
    }

    pub fn tanh(&self) -> Jet {
        let e2 = (self.clone() * Jet::constant(&self.layout, 2.0)).exp();
        let one = Jet::constant(&self.layout, 1.0);
        one.clone() - Jet::constant(&self.layout, 2.0) / (e2 + one)
    }

    pub fn powi(&self, n: i32) -> Jet {
        if n >= 0 {
            let mut r = Jet::constant(&self.layout, 1.0);
            let mut b = self.clone();
            let mut k = n as u32;
            while k > 0 {
                if k & 1 == 1 {
                    r = r * b.clone();
                }
                b = b.clone() * b;
                k >>= 1;
            }
            r
        } else {
            self.real_power(n as f64)
        }
    }

    fn recip(&self) -> Jet {
        let v = self.value();
        let coeffs: Vec<f64> = (0..=self.degree())
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign / v.powi(k as i32 + 1)
            })
            .collect();
        self.compose(&coeffs)
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn taylor(degree: usize, deriv: impl Fn(usize) -> f64) -> Vec<f64> {
    (0..=degree).map(|k| deriv(k) / factorial(k as u32)).collect()
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        self.coeffs.iter_mut().zip(&rhs.coeffs).for_each(|(a, b)| *a += b);
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: Jet) -> Jet {
        self.coeffs.iter_mut().zip(&rhs.coeffs).for_each(|(a, b)| *a -= b);
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        if rhs.is_constant() {
            let v = rhs.value();
            let mut r = self;
            r.coeffs.iter_mut().for_each(|c| *c *= v);
            return r;
        }
        if self.is_constant() {
            return rhs * self;
        }
        let mut out = vec![0.0; self.coeffs.len()];
        for &(i, j, k) in &self.layout.products {
            out[k] += self.coeffs[i] * rhs.coeffs[j];
        }
        Jet {
            layout: self.layout,
            coeffs: out,
        }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        if rhs.is_constant() {
            let v = rhs.value();
            let mut r = self;
            r.coeffs.iter_mut().for_each(|c| *c /= v);
            return r;
        }
        self * rhs.recip()
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        self.coeffs.iter_mut().for_each(|c| *c = -*c);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_counts_monomials() {
        assert_eq!(JetLayout::new(2, 3).len(), 10);
        assert_eq!(JetLayout::new(3, 2).len(), 10);
        assert_eq!(JetLayout::new(1, 5).len(), 6);
        assert_eq!(JetLayout::new(0, 3).len(), 1);
    }

    #[test]
    fn exp_series_coefficients() {
        let l = JetLayout::new(1, 6);
        let e = Jet::variable(&l, 0.0, 0).exp();
        for (k, c) in e.coefficients().iter().enumerate() {
            assert!((c - 1.0 / factorial(k as u32)).abs() < 1e-15);
        }
    }

    #[test]
    fn mixed_partials_of_product() {
        // f = x^2 y^3 at (1, 2): ∂x∂y f = 2x·3y² = 24, ∂y² f = 6x² y = 12
        let l = JetLayout::new(2, 3);
        let x = Jet::variable(&l, 1.0, 0);
        let y = Jet::variable(&l, 2.0, 1);
        let f = x.powi(2) * y.powi(3);
        assert!((f.derivative(&[1, 1]) - 24.0).abs() < 1e-12);
        assert!((f.derivative(&[0, 2]) - 12.0).abs() < 1e-12);
        assert_eq!(f.derivative(&[3, 3]), 0.0);
    }

    #[test]
    fn elementary_functions_match_closed_forms() {
        let l = JetLayout::new(1, 4);
        let x = Jet::variable(&l, 0.7, 0);
        let checks: Vec<(Jet, [f64; 3])> = vec![
            (x.sin(), [0.7f64.sin(), 0.7f64.cos(), -0.7f64.sin()]),
            (x.ln(), [0.7f64.ln(), 1.0 / 0.7, -1.0 / 0.49]),
            (x.sqrt(), [0.7f64.sqrt(), 0.5 / 0.7f64.sqrt(), -0.25 * 0.7f64.powf(-1.5)]),
            (x.powi(-2), [1.0 / 0.49, -2.0 / 0.343, 6.0 / 0.2401]),
            (x.tanh(), {
                let t = 0.7f64.tanh();
                [t, 1.0 - t * t, -2.0 * t * (1.0 - t * t)]
            }),
            (Jet::constant(&l, 1.0) / x.clone(), [1.0 / 0.7, -1.0 / 0.49, 2.0 / 0.343]),
        ];
        for (j, want) in checks {
            for (k, w) in want.iter().enumerate() {
                assert!((j.derivative(&[k as u32]) - w).abs() < 1e-12, "{k} {w}");
            }
        }
    }
}
