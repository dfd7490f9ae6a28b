use ccgeom::expr::parse_expression;
use ccgeom::fields::{lie_bracket, FieldFn, VectorField};
use ccgeom::linalg::{CMatrix, RANK_TOL};
use ccgeom::spaces::AnalyticSeries;
use ccgeom::wedge::{select_from_vectors, wedge_quotient};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

/// Smooth expressions in x1, x2 built from a small grammar.
fn smooth_expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x1".to_string()),
        Just("x2".to_string()),
        (-3.0..3.0f64).prop_map(|c| format!("{c:.3}")),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} * {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a} / (1 + ({b})^2)")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("tanh({a})")),
            inner.clone().prop_map(|a| format!("exp(tanh({a}))")),
            inner.clone().prop_map(|a| format!("sqrt(1 + ({a})^2)")),
            inner.prop_map(|a| format!("({a})^2")),
        ]
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5..1.5f64, 2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn printing_then_reparsing_preserves_values(text in smooth_expr(), points in prop::collection::vec(point(), 100)) {
        let e = parse_expression(&text, 2).unwrap();
        let again = parse_expression(&e.to_string(), 2).unwrap();
        for p in &points {
            let (a, b) = (e.eval(p).unwrap(), again.eval(p).unwrap());
            prop_assert!(a == b || (a - b).abs() <= 1e-14 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn gradients_match_central_differences(text in smooth_expr(), points in prop::collection::vec(point(), 100)) {
        let e = parse_expression(&text, 2).unwrap();
        let h = 1e-5;
        for p in &points {
            let (_, g) = e.eval_with_gradient(p).unwrap();
            for k in 0..2 {
                let (mut a, mut b) = (p.clone(), p.clone());
                a[k] += h;
                b[k] -= h;
                let fd = (e.eval(&a).unwrap() - e.eval(&b).unwrap()) / (2.0 * h);
                // absolute floor for rounding in the difference quotient
                let scale = g[k].abs().max(e.eval(p).unwrap().abs()).max(1.0);
                prop_assert!((fd - g[k]).abs() <= 1e-5 * scale, "{text} at {p:?}: {fd} vs {}", g[k]);
            }
        }
    }
}

fn quadratic_field(coeffs: &[f64]) -> VectorField {
    // each component: c0 + c1 x1 + c2 x2 + c3 x3 + c4 x1 x2 + c5 x2 x3 + c6 x3^2
    let comps: Vec<String> = coeffs
        .chunks(7)
        .map(|c| {
            format!(
                "{} + {}*x1 + {}*x2 + {}*x3 + {}*x1*x2 + {}*x2*x3 + {}*x3^2",
                c[0], c[1], c[2], c[3], c[4], c[5], c[6]
            )
        })
        .collect();
    let refs: Vec<&str> = comps.iter().map(|s| s.as_str()).collect();
    VectorField::parse(&refs).unwrap()
}

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 21)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn jacobi_identity(a in coeffs(), b in coeffs(), c in coeffs(),
                       points in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 3), 50)) {
        let (x, y, z) = (quadratic_field(&a), quadratic_field(&b), quadratic_field(&c));
        let (yz, zx, xy) = (lie_bracket(&y, &z).unwrap(), lie_bracket(&z, &x).unwrap(), lie_bracket(&x, &y).unwrap());
        let (t1, t2, t3) = (lie_bracket(&x, &yz).unwrap(), lie_bracket(&y, &zx).unwrap(), lie_bracket(&z, &xy).unwrap());
        for p in &points {
            let (u, v, w) = (t1.value(p).unwrap(), t2.value(p).unwrap(), t3.value(p).unwrap());
            let r: f64 = (0..3).map(|i| (u[i] + v[i] + w[i]).powi(2)).sum::<f64>().sqrt();
            prop_assert!(r <= 1e-8, "Jacobi residual {r} at {p:?}");
        }
    }

    #[test]
    fn bracket_is_bilinear(a in coeffs(), b in coeffs(), s in -3.0..3.0f64,
                           p in prop::collection::vec(-1.0..1.0f64, 3)) {
        let (v, w) = (quadratic_field(&a), quadratic_field(&b));
        let sv = v.scaled(s);
        let lhs = lie_bracket(&sv, &w).unwrap().value(&p).unwrap();
        let rhs = lie_bracket(&v, &w).unwrap().value(&p).unwrap();
        for i in 0..3 {
            prop_assert!((lhs[i] - s * rhs[i]).abs() <= 1e-10 * (1.0 + rhs[i].abs()));
        }
    }

    #[test]
    fn analytic_norm_is_submultiplicative(a in prop::collection::vec(-2.0..2.0f64, 6),
                                          b in prop::collection::vec(-2.0..2.0f64, 6),
                                          r in 0.1..2.0f64) {
        let f = AnalyticSeries::new(1, (0..6u32).map(|k| (vec![k], a[k as usize])).collect()).unwrap();
        let g = AnalyticSeries::new(1, (0..6u32).map(|k| (vec![k], b[k as usize])).collect()).unwrap();
        let fg = f.product(&g).unwrap();
        let (nf, ng, nfg) = (f.norm(r), g.norm(r), fg.norm(r));
        prop_assert!(nfg <= nf * ng * (1.0 + 1e-12), "{nfg} > {nf} * {ng}");
    }
}

/// Determinant by cofactor expansion along the first row.
fn cofactor_det(m: &CMatrix) -> Complex64 {
    let n = m.nrows();
    if n == 1 {
        return m[(0, 0)];
    }
    (0..n)
        .map(|j| {
            let minor = m.clone().remove_row(0).remove_column(j);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            m[(0, j)] * sign * cofactor_det(&minor)
        })
        .sum()
}

fn complex_matrix(values: &[f64], rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |i, j| {
        let k = 2 * (i * cols + j);
        Complex64::new(values[k], values[k + 1])
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wedge_quotient_matches_cofactor_expansion(num in prop::collection::vec(-1.0..1.0f64, 50),
                                                 den in prop::collection::vec(-1.0..1.0f64, 50)) {
        let (a, b) = (complex_matrix(&num, 5, 5), complex_matrix(&den, 5, 5));
        let oracle = cofactor_det(&a) / cofactor_det(&b);
        let got = wedge_quotient(&a, &b).unwrap();
        prop_assert!((got - oracle).norm() <= 1e-9 * oracle.norm().max(1.0), "{got} vs {oracle}");
    }

    #[test]
    fn selection_agrees_with_exhaustive_search(basis in prop::collection::vec(-1.0..1.0f64, 16),
                                               values in prop::collection::vec(-1.0..1.0f64, 16)) {
        // m = 4 vectors in a generic 2-dimensional complex subspace of ℂ⁴,
        // so n = 2 and r = 0; wedges in the span are det of the coefficients
        let b = complex_matrix(&basis, 4, 2);
        let c = complex_matrix(&values, 2, 4);
        let ls = &b * &c;
        let xs = CMatrix::zeros(4, 0);
        let sel = select_from_vectors(&xs, &ls, RANK_TOL).unwrap();
        let mut best = (0.0, vec![]);
        for i in 0..4 {
            for j in i + 1..4 {
                let d = cofactor_det(&c.select_columns(&[i, j])).norm();
                if d > best.0 * (1.0 + 1e-12) {
                    best = (d, vec![i, j]);
                }
            }
        }
        prop_assert_eq!(sel.j0, best.1);
        prop_assert_eq!(sel.zeta, 1.0);
    }
}

#[test]
fn cofactor_oracle_on_a_known_matrix() {
    let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 1.0, 1.0, 3.0, 2.0, 1.0, 1.0, 2.0]);
    let c = ccgeom::linalg::to_complex(&m);
    assert_eq!(cofactor_det(&c), Complex64::new(6.0, 0.0));
}
