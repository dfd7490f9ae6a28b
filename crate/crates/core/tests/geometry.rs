use ccgeom::charts::{chart_at, chart_diagnostics};
use ccgeom::fields::VectorFieldSystem;
use ccgeom::flows::{exp_map, flow_for_time, halton, Domain, FlowConfig};
use ccgeom::metrics::{certify_holomorphic_chain, distance_upper, DiskMap, DistanceOptions};
use ccgeom::rng::item_rng;
use ccgeom::structure::{check_elliptic_pointwise, involutivity_residual, RESIDUAL_TOL};
use ccgeom::volumes::{lambda, volume_estimate, VolumeOptions};
use ccgeom::zoo::{get_geometry, zoo, NamedGeometry};
use num_complex::Complex64;
use rand::Rng;

/// Deterministic points filling the middle half of the geometry's box.
fn box_points(g: &NamedGeometry, count: u64) -> Vec<Vec<f64>> {
    (1..=count)
        .map(|i| {
            halton(i, g.system.dim())
                .iter()
                .zip(g.lo.iter().zip(&g.hi))
                .map(|(u, (lo, hi))| lo + (hi - lo) * (0.25 + 0.5 * u))
                .collect()
        })
        .collect()
}

fn geometries() -> Vec<NamedGeometry> {
    zoo().iter().map(|f| f.build().unwrap()).collect()
}

#[test]
fn rk4_error_drops_by_eight_when_the_step_halves() {
    let sys = VectorFieldSystem::from_real(2, &[(&["1 + x2^2", "cos(3*x1)"], 1.0)]).unwrap();
    let run = |steps| flow_for_time(&sys, &[0.1, -0.2], &[1.0], 1.0, &Domain::Everywhere, &FlowConfig::new(steps).unwrap()).unwrap();
    let reference = run(4 * 64);
    let err = |p: Vec<f64>| ((p[0] - reference[0]).powi(2) + (p[1] - reference[1]).powi(2)).sqrt();
    for steps in [16, 32] {
        let (coarse, fine) = (err(run(steps)), err(run(2 * steps)));
        assert!(coarse / fine >= 8.0, "steps {steps}: ratio {}", coarse / fine);
    }
}

#[test]
fn flowing_back_returns_to_the_start() {
    let cfg = FlowConfig::default();
    for g in geometries() {
        let real = g.system.real_view();
        for (i, x) in box_points(&g, 8).iter().enumerate() {
            let mut rng = item_rng(1, 0, i as u64);
            let mut a: Vec<f64> = (0..real.q()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            a.iter_mut().for_each(|v| *v /= norm.max(1.0));
            let y = exp_map(&g.system, x, &a, &Domain::Everywhere, &cfg).unwrap();
            let minus: Vec<f64> = a.iter().map(|v| -v).collect();
            let back = exp_map(&g.system, &y, &minus, &Domain::Everywhere, &cfg).unwrap();
            let gap = x.iter().zip(&back).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            assert!(gap <= 1e-6, "{}: gap {gap}", g.name);
        }
    }
}

fn fast_options(seed: u64) -> DistanceOptions {
    DistanceOptions {
        seed,
        cfg: FlowConfig::new(32).unwrap(),
        ..Default::default()
    }
}

fn upper(sys: &VectorFieldSystem, x: &[f64], y: &[f64], opts: &DistanceOptions) -> f64 {
    distance_upper(sys, x, y, opts).unwrap().upper().unwrap()
}

#[test]
fn distance_bounds_are_roughly_symmetric() {
    for name in ["euclidean2", "heisenberg"] {
        let g = get_geometry(name).unwrap();
        let pts = box_points(&g, 4);
        let opts = fast_options(3);
        for w in pts.windows(2) {
            let (a, b) = (upper(&g.system, &w[0], &w[1], &opts), upper(&g.system, &w[1], &w[0], &opts));
            assert!((a - b).abs() <= 0.1 * (a + b) / 2.0, "{name}: {a} vs {b}");
        }
    }
}

#[test]
fn distance_bounds_satisfy_the_triangle_inequality() {
    for name in ["euclidean2", "heisenberg"] {
        let g = get_geometry(name).unwrap();
        let p = box_points(&g, 3);
        let opts = fast_options(4);
        let xy = upper(&g.system, &p[0], &p[1], &opts);
        let yz = upper(&g.system, &p[1], &p[2], &opts);
        let xz = upper(&g.system, &p[0], &p[2], &opts);
        let slack = 2.0 * opts.tol + opts.rel_precision * (xy + yz);
        assert!(xz <= xy + yz + slack, "{name}: {xz} > {xy} + {yz}");
    }
}

#[test]
fn more_restarts_never_worsen_the_bound() {
    let g = get_geometry("heisenberg").unwrap();
    let (x, y) = ([0.0, 0.0, 0.0], [0.3, -0.1, 0.2]);
    let few = DistanceOptions {
        restarts: 2,
        ..fast_options(5)
    };
    let many = DistanceOptions {
        restarts: 8,
        ..fast_options(5)
    };
    let (a, b) = (upper(&g.system, &x, &y, &few), upper(&g.system, &x, &y, &many));
    assert!(b <= a * (1.0 + many.rel_precision) + many.tol, "{b} > {a}");
}

#[test]
fn certified_holomorphic_bounds_dominate_the_distance_bound() {
    let g = get_geometry("complex_plane").unwrap();
    let map = DiskMap::holomorphic(vec![vec![Complex64::new(0.0, 0.0), Complex64::new(0.9, 0.0)]]);
    for target in [0.1, 0.2, 0.3] {
        let cert = certify_holomorphic_chain(&g.system, &[map.clone()], &[1.0], &[0.0, 0.0], &[target, 0.0]).unwrap();
        assert!(cert.certified, "target {target}");
        let d = upper(&g.system, &[0.0, 0.0], &[target, 0.0], &fast_options(6));
        assert!(cert.bound >= d - 1e-3, "target {target}: {} < {d}", cert.bound);
    }
}

#[test]
fn lambda_is_monotone_with_the_degree_bound() {
    for g in geometries() {
        let real = g.system.real_view();
        let mut degrees = real.degrees();
        degrees.sort_by(|a, b| b.total_cmp(a));
        let top: f64 = degrees.iter().take(real.dim()).sum();
        for x in box_points(&g, 6) {
            let mut prev = 0.0;
            for k in (0..6).rev() {
                let delta = 0.5f64.powi(k);
                let l = lambda(&g.system, &x, delta, &g.density).unwrap();
                let l2 = lambda(&g.system, &x, 2.0 * delta, &g.density).unwrap();
                assert!(l >= prev, "{}: not monotone at δ = {delta}", g.name);
                assert!(l2 <= 2f64.powf(top) * l * (1.0 + 1e-12) + 1e-300, "{}: {l2} vs {l}", g.name);
                prev = l;
            }
        }
    }
}

#[test]
fn ball_volumes_grow_with_the_radius() {
    for name in ["euclidean2", "heisenberg_graded"] {
        let g = get_geometry(name).unwrap();
        let opts = VolumeOptions {
            samples: 4000,
            seed: 9,
            cfg: FlowConfig::new(16).unwrap(),
            ..Default::default()
        };
        let x = vec![0.0; g.system.dim()];
        let mut prev = 0.0;
        for delta in [0.125, 0.25, 0.5, 1.0] {
            let v = volume_estimate(&g.system, &x, delta, &g.density, &opts).unwrap().volume;
            assert!(v >= prev, "{name}: volume fell at δ = {delta}");
            prev = v;
        }
    }
}

#[test]
fn zoo_is_involutive_away_from_documented_loci() {
    for g in geometries() {
        let points: Vec<Vec<f64>> = box_points(&g, 24)
            .into_iter()
            .filter(|p| !g.singular.near(p, 0.05))
            .collect();
        for c in involutivity_residual(&g.system, &points, RESIDUAL_TOL).unwrap() {
            assert!(c.passes(RESIDUAL_TOL), "{} at {:?}: residual {}", g.name, c.point, c.max_residual);
        }
    }
    // the documented loci are real: the bare Heisenberg pair and Grushin on x = 0 fail
    let h = get_geometry("heisenberg").unwrap();
    assert!(!involutivity_residual(&h.system, &[vec![0.1, 0.2, 0.3]], RESIDUAL_TOL).unwrap()[0].passes(RESIDUAL_TOL));
    let gr = get_geometry("grushin").unwrap();
    assert!(!involutivity_residual(&gr.system, &[vec![0.0, 0.4]], RESIDUAL_TOL).unwrap()[0].passes(RESIDUAL_TOL));
}

#[test]
fn dimension_formula_holds_wherever_the_intersection_is_real() {
    for g in geometries() {
        for p in box_points(&g, 12) {
            let s = check_elliptic_pointwise(&g.system, &p, 1e-8).unwrap();
            if s.intersection_ok {
                assert_eq!(s.dim_w, 2 * s.dim_l - s.dim_x, "{} at {p:?}", g.name);
            }
        }
    }
}

#[test]
fn bracket_coefficients_rescale_with_degrees() {
    for name in ["heisenberg_bracket", "heisenberg_elliptic", "grushin"] {
        let g = get_geometry(name).unwrap();
        let d = g.system.degrees();
        let points: Vec<Vec<f64>> = box_points(&g, 6)
            .into_iter()
            .filter(|p| !g.singular.near(p, 0.05))
            .collect();
        let base = involutivity_residual(&g.system, &points, RESIDUAL_TOL).unwrap();
        for delta in [0.5, 0.125] {
            let scaled = involutivity_residual(&g.system.scale(delta).unwrap(), &points, RESIDUAL_TOL).unwrap();
            for (b, s) in base.iter().zip(&scaled) {
                assert!(s.max_residual <= 2.0 * b.max_residual + 1e-12, "{name}: residual grew");
                for (j, row) in b.c1.iter().enumerate() {
                    for (k, col) in row.iter().enumerate() {
                        for (l, c) in col.iter().enumerate() {
                            let factor = delta.powf(d[j] + d[k] - d[l]);
                            for (orig, new) in [(c, &s.c1[j][k][l]), (&b.c2[j][k][l], &s.c2[j][k][l]), (&b.c3[j][k][l], &s.c3[j][k][l])] {
                                let want = orig * factor;
                                assert!((new - want).norm() <= 1e-8 * (1.0 + want.norm()), "{name} ({j},{k},{l}): {new} vs {want}");
                            }
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn charts_fix_the_base_point_and_straighten_the_frame() {
    let cfg = FlowConfig::new(64).unwrap();
    for name in ["euclidean2", "heisenberg_bracket", "heisenberg_elliptic", "complex_plane", "grushin"] {
        let g = get_geometry(name).unwrap();
        for x0 in box_points(&g, 3).into_iter().filter(|p| !g.singular.near(p, 0.2)) {
            for delta in [1.0, 0.25] {
                let c = chart_at(&g.system, &x0, delta, &Domain::Everywhere, &cfg).unwrap();
                assert_eq!(c.map(&vec![0.0; c.dim()]).unwrap(), x0);
                let d = chart_diagnostics(&c, 16).unwrap();
                assert!(d.a_at_0_max <= 1e-8, "{name}: 𝒜(0) = {}", d.a_at_0_max);
                // dΦ(0) is the selected frame divided by the scale
                let dphi = c.differential(&vec![0.0; c.dim()]).unwrap();
                let frame = c.generators().real_frame(&x0).unwrap();
                assert!((dphi - frame).amax() <= 1e-6, "{name}: differential at 0");
            }
        }
    }
}
