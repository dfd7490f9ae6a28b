//! `ccgeom`: command-line front end for the geometry toolkit.
//!
//! Usage errors go to stderr with exit code 2. Analysis failures print a
//! JSON diagnostic on stdout and exit with code 1.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ccgeom::charts::{chart_at, chart_diagnostics, chart_image, chart_image_csv, pullback_density};
use ccgeom::document::GeometryDocument;
use ccgeom::flows::{halton, Domain, FlowConfig};
use ccgeom::metrics::{certify_holomorphic_chain, distance_upper, sample_ball_with, BallOptions, DiskMap, DistanceOptions};
use ccgeom::spaces::{estimators, GridFunction, NormInput};
use ccgeom::structure::{check_elliptic_pointwise, dimension_constancy, involutivity_residual, RESIDUAL_TOL};
use ccgeom::volumes::{doubling_report, lambda, Voxel, VolumeOptions};
use ccgeom::zoo::{get_geometry, NamedGeometry};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::json;

#[derive(Parser)]
#[command(name = "ccgeom", version, about = "Carnot-Carathéodory balls, distances, volumes, charts and norms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Zoo geometry name or path to a TOML geometry document.
    #[arg(long, default_value = "heisenberg")]
    geometry: String,
    /// Random seed; equal seeds give byte-identical output.
    #[arg(long)]
    seed: Option<u64>,
    /// RK4 steps per unit time (at least 16).
    #[arg(long)]
    steps: Option<usize>,
    /// Sample count for randomized estimates.
    #[arg(long)]
    samples: Option<usize>,
    /// Voxel side as a fraction of δ.
    #[arg(long)]
    voxel: Option<f64>,
    /// Absolute tolerance for distance searches.
    #[arg(long)]
    tol: Option<f64>,
    /// Write the output to a file in this directory instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample endpoints of B(x, δ) as CSV.
    Ball {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        from: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
    },
    /// Upper bound for ρ(x, y) with a witness control, as JSON.
    Dist {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        from: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        to: String,
    },
    /// Monte Carlo ball volumes against Λ over a δ grid, as CSV.
    Volume {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        from: Option<String>,
        #[arg(long, default_value = "1,0.5,0.25,0.125")]
        deltas: String,
    },
    /// Λ(x, δ) over a δ grid, as CSV.
    Lambda {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        from: Option<String>,
        #[arg(long, default_value = "1,0.5,0.25,0.125")]
        deltas: String,
    },
    /// Function-space norm estimates on the geometry's box, as CSV.
    Norms {
        #[command(flatten)]
        common: Common,
        /// Expression in the geometry's coordinate names.
        #[arg(long, allow_hyphen_values = true)]
        function: String,
        /// Estimator names (holder, zygmund, cm, cw, zygmund_w, analytic).
        #[arg(long = "estimator", default_values_t = vec!["holder".to_string(), "zygmund".to_string()])]
        estimators: Vec<String>,
        #[arg(long, default_value_t = 0)]
        m: usize,
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        /// Grid points per axis.
        #[arg(long, default_value_t = 33)]
        resolution: usize,
    },
    /// Involutivity, ellipticity and dimension constancy at sample points, as JSON.
    Check {
        #[command(flatten)]
        common: Common,
    },
    /// Exponential chart diagnostics and density pullback, as JSON.
    Chart {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        from: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
    },
    /// Check a chain of holomorphic disk maps certifying ρ_H(x, y) ≤ Σ δ_j, as JSON.
    HoloCert {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        from: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        to: String,
        /// One map per flag: coefficients of ζ⁰, ζ¹, .. separated by commas,
        /// components separated by ';' (e.g. "0,0.9" or "0,1+2i;0.5").
        #[arg(long = "map", required = true, allow_hyphen_values = true)]
        maps: Vec<String>,
        /// One δ per map.
        #[arg(long, default_value = "1")]
        deltas: String,
    },
    /// Run the self-verification suites, as JSON; exits 1 if any check fails.
    Verify {
        #[arg(long = "suite")]
        suites: Vec<String>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Analysis(ccgeom::Error),
    /// Output was written, but it reports failed checks.
    Checks,
}

impl From<ccgeom::Error> for Failure {
    fn from(e: ccgeom::Error) -> Self {
        Failure::Analysis(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn parse_list(text: &str, what: &str) -> std::result::Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|t| {
            let v: f64 = t.trim().parse().map_err(|_| usage(format!("{what}: '{t}' is not a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(usage(format!("{what}: values must be finite")))
            }
        })
        .collect()
}

fn parse_complex(text: &str) -> std::result::Result<Complex64, Failure> {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || usage(format!("map: '{text}' is not a complex number"));
    if let Some(body) = t.strip_suffix('i') {
        // split at the last sign that is not a leading sign or an exponent sign
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
        let (re, im) = match split {
            Some(k) => (&body[..k], &body[k..]),
            None => ("0", body),
        };
        let im = match im {
            "" | "+" => 1.0,
            "-" => -1.0,
            s => s.parse().map_err(|_| bad())?,
        };
        Ok(Complex64::new(re.parse().map_err(|_| bad())?, im))
    } else {
        Ok(Complex64::new(t.parse().map_err(|_| bad())?, 0.0))
    }
}

struct Context {
    geometry: NamedGeometry,
    domain: Domain,
    seed: u64,
    steps: usize,
    samples: Option<usize>,
    tol: Option<f64>,
    voxel: Option<f64>,
    out: Option<PathBuf>,
}

impl Context {
    fn new(c: &Common) -> std::result::Result<Self, Failure> {
        let path = Path::new(&c.geometry);
        let (geometry, domain, defaults) = if path.is_file() || c.geometry.ends_with(".toml") {
            let doc = GeometryDocument::load(path).map_err(|e| usage(e.to_string()))?;
            let g = doc.geometry().map_err(|e| usage(e.to_string()))?;
            (g, doc.domain(), doc.defaults.clone())
        } else {
            let g = get_geometry(&c.geometry).map_err(|e| usage(e.to_string()))?;
            (g, Domain::Everywhere, Default::default())
        };
        let steps = c.steps.or(defaults.steps).unwrap_or(FlowConfig::default().steps_per_unit_time);
        if steps < FlowConfig::MIN_STEPS {
            return Err(usage(format!("--steps must be at least {}", FlowConfig::MIN_STEPS)));
        }
        if c.samples == Some(0) {
            return Err(usage("--samples must be positive"));
        }
        if c.voxel.is_some_and(|v| !(v > 0.0 && v.is_finite())) {
            return Err(usage("--voxel must be positive"));
        }
        if c.tol.is_some_and(|v| !(v > 0.0 && v.is_finite())) {
            return Err(usage("--tol must be positive"));
        }
        Ok(Context {
            geometry,
            domain,
            seed: c.seed.or(defaults.seed).unwrap_or(0),
            steps,
            samples: c.samples.or(defaults.samples),
            tol: c.tol.or(defaults.tol),
            voxel: c.voxel,
            out: c.out.clone(),
        })
    }

    fn cfg(&self) -> FlowConfig {
        FlowConfig::new(self.steps).expect("steps validated")
    }

    fn dim(&self) -> usize {
        self.geometry.system.dim()
    }

    fn point(&self, text: Option<&str>, what: &str) -> std::result::Result<Vec<f64>, Failure> {
        let p = match text {
            Some(t) => parse_list(t, what)?,
            None => vec![0.0; self.dim()],
        };
        if p.len() != self.dim() {
            return Err(usage(format!("{what}: expected {} coordinates, got {}", self.dim(), p.len())));
        }
        Ok(p)
    }

    fn deltas(&self, text: &str) -> std::result::Result<Vec<f64>, Failure> {
        let mut d = parse_list(text, "--deltas")?;
        if d.iter().any(|v| *v <= 0.0) {
            return Err(usage("--deltas must be positive"));
        }
        d.sort_by(f64::total_cmp);
        d.dedup();
        Ok(d)
    }

    fn emit(&self, file: &str, content: &str) -> Outcome {
        match &self.out {
            Some(dir) => write_out(dir, file, content),
            None => {
                print!("{content}");
                Ok(())
            }
        }
    }
}

fn write_out(dir: &Path, file: &str, content: &str) -> Outcome {
    std::fs::create_dir_all(dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(file);
    std::fs::write(&path, content).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?;
    println!("{}", path.display());
    Ok(())
}

fn pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("outputs serialize") + "\n"
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Ball { common, from, delta } => {
            let ctx = Context::new(&common)?;
            let x = ctx.point(from.as_deref(), "--from")?;
            let opts = BallOptions {
                cfg: ctx.cfg(),
                domain: ctx.domain.clone(),
                ..BallOptions::new(ctx.samples.unwrap_or(1000), ctx.seed)
            };
            let ball = sample_ball_with(&ctx.geometry.system, &x, delta, &opts)?;
            let mut csv = ctx.geometry.system.ambient().names().join(",") + "\n";
            for p in &ball.endpoints {
                csv += &p.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",");
                csv += "\n";
            }
            ctx.emit("ball.csv", &csv)
        }
        Command::Dist { common, from, to } => {
            let ctx = Context::new(&common)?;
            let x = ctx.point(from.as_deref(), "--from")?;
            let y = ctx.point(Some(&to), "--to")?;
            let defaults = DistanceOptions::default();
            let opts = DistanceOptions {
                seed: ctx.seed,
                tol: ctx.tol.unwrap_or(defaults.tol),
                cfg: ctx.cfg(),
                domain: ctx.domain.clone(),
                ..defaults
            };
            let outcome = distance_upper(&ctx.geometry.system, &x, &y, &opts)?;
            ctx.emit(
                "dist.json",
                &pretty(&json!({
                    "geometry": ctx.geometry.name,
                    "from": x,
                    "to": y,
                    "upper": outcome.upper(),
                    "outcome": outcome,
                })),
            )
        }
        Command::Volume { common, from, deltas } => {
            let ctx = Context::new(&common)?;
            let x = ctx.point(from.as_deref(), "--from")?;
            let deltas = ctx.deltas(&deltas)?;
            let defaults = VolumeOptions::default();
            let opts = VolumeOptions {
                samples: ctx.samples.unwrap_or(defaults.samples),
                voxel: ctx.voxel.map(Voxel::Relative).unwrap_or(defaults.voxel),
                seed: ctx.seed,
                cfg: ctx.cfg(),
                domain: ctx.domain.clone(),
                ..defaults
            };
            let rep = doubling_report(&ctx.geometry.system, &x, &deltas, &ctx.geometry.density, &opts, None)?;
            ctx.emit("volume.csv", &rep.to_csv())
        }
        Command::Lambda { common, from, deltas } => {
            let ctx = Context::new(&common)?;
            let x = ctx.point(from.as_deref(), "--from")?;
            let mut csv = String::from("delta,lambda\n");
            for d in ctx.deltas(&deltas)? {
                csv += &format!("{d:?},{:?}\n", lambda(&ctx.geometry.system, &x, d, &ctx.geometry.density)?);
            }
            ctx.emit("lambda.csv", &csv)
        }
        Command::Norms {
            common,
            function,
            estimators: names,
            m,
            s,
            r,
            resolution,
        } => {
            let ctx = Context::new(&common)?;
            let f = ctx.geometry.system.ambient().parse(&function).map_err(|e| usage(e.to_string()))?;
            let gf = GridFunction::new(
                f,
                ctx.geometry.lo.clone(),
                ctx.geometry.hi.clone(),
                vec![resolution; ctx.dim()],
            )?;
            let mut input = NormInput::new(&gf);
            input.system = Some(&ctx.geometry.system);
            input.m = m;
            input.s = s;
            input.r = r;
            input.cfg = ctx.cfg();
            let registry = estimators();
            let mut csv = String::new();
            for name in &names {
                let est = registry.get(name).map_err(|e| usage(e.to_string()))?;
                let rep = est.estimate(&input)?.to_csv();
                let mut lines = rep.lines();
                let header = lines.next().unwrap_or_default();
                if csv.is_empty() {
                    csv = format!("{header}\n");
                }
                for l in lines {
                    csv += l;
                    csv += "\n";
                }
            }
            ctx.emit("norms.csv", &csv)
        }
        Command::Check { common } => {
            let ctx = Context::new(&common)?;
            let g = &ctx.geometry;
            let count = ctx.samples.unwrap_or(64).max(16) as u64;
            let points: Vec<Vec<f64>> = (1..=count)
                .map(|i| {
                    halton(i, g.system.dim())
                        .iter()
                        .zip(g.lo.iter().zip(&g.hi))
                        .map(|(u, (lo, hi))| lo + (hi - lo) * u)
                        .collect()
                })
                .collect();
            let tol = ctx.tol.unwrap_or(RESIDUAL_TOL);
            let brackets = involutivity_residual(&g.system, &points, tol)?;
            let failing: Vec<&Vec<f64>> = brackets.iter().filter(|b| !b.passes(tol)).map(|b| &b.point).collect();
            let spans = points
                .iter()
                .map(|p| check_elliptic_pointwise(&g.system, p, 1e-8))
                .collect::<ccgeom::Result<Vec<_>>>()?;
            let constancy = dimension_constancy(&g.system, &points, 1e-8)?;
            let report = json!({
                "geometry": g.name,
                "samples": points.len(),
                "involutivity": {
                    "tolerance": tol,
                    "worst_relative_residual": brackets.iter().map(|b| b.max_residual / b.scale).fold(0.0, f64::max),
                    "failing_points": failing,
                },
                "elliptic": {
                    "all_elliptic": spans.iter().all(|s| s.elliptic_ok),
                    "all_intersections_real": spans.iter().all(|s| s.intersection_ok),
                    "failing_points": spans.iter().filter(|s| !(s.elliptic_ok && s.intersection_ok)).map(|s| &s.point).collect::<Vec<_>>(),
                },
                "constancy": constancy,
                "singular_locus": g.singular,
            });
            ctx.emit("check.json", &pretty(&report))
        }
        Command::Chart { common, from, delta } => {
            let ctx = Context::new(&common)?;
            let x0 = ctx.point(from.as_deref(), "--from")?;
            let chart = chart_at(&ctx.geometry.system, &x0, delta, &ctx.domain, &ctx.cfg())?;
            let samples = ctx.samples.unwrap_or(128);
            let diag = chart_diagnostics(&chart, samples)?;
            let density = pullback_density(&chart, &ctx.geometry.density, samples)?;
            let report = json!({
                "geometry": ctx.geometry.name,
                "base": x0,
                "delta": delta,
                "diagnostics": diag,
                "density": {
                    "ratio_max_min": density.ratio_max_min,
                    "sign_constant": density.sign_constant,
                },
            });
            if let Some(dir) = &ctx.out {
                write_out(dir, "chart_density.csv", &density.to_csv())?;
                write_out(dir, "chart_image.csv", &chart_image_csv(&chart_image(&chart, samples)?))?;
            }
            ctx.emit("chart.json", &pretty(&report))
        }
        Command::HoloCert {
            common,
            from,
            to,
            maps,
            deltas,
        } => {
            let ctx = Context::new(&common)?;
            let x = ctx.point(from.as_deref(), "--from")?;
            let y = ctx.point(Some(&to), "--to")?;
            let deltas = parse_list(&deltas, "--deltas")?;
            if deltas.len() != maps.len() {
                return Err(usage(format!("{} maps but {} deltas", maps.len(), deltas.len())));
            }
            let maps = maps
                .iter()
                .map(|m| {
                    let comps = m
                        .split(';')
                        .map(|c| c.split(',').map(parse_complex).collect())
                        .collect::<std::result::Result<Vec<Vec<Complex64>>, Failure>>()?;
                    Ok(DiskMap::holomorphic(comps))
                })
                .collect::<std::result::Result<Vec<_>, Failure>>()?;
            let cert = certify_holomorphic_chain(&ctx.geometry.system, &maps, &deltas, &x, &y)?;
            ctx.emit("holo_cert.json", &pretty(&json!({ "geometry": ctx.geometry.name, "certificate": cert })))
        }
        Command::Verify { suites, seed, out } => {
            let report = ccgeom::verify::run_suites(&suites, seed).map_err(|e| match e {
                ccgeom::Error::UnknownName(_) => usage(e.to_string()),
                e => Failure::Analysis(e),
            })?;
            let text = report.to_json();
            match &out {
                Some(dir) => write_out(dir, "verify.json", &text)?,
                None => print!("{text}"),
            }
            if report.passed {
                Ok(())
            } else {
                for s in report.suites.iter().filter(|s| !s.passed) {
                    eprint!("{}", s.summary());
                }
                Err(Failure::Checks)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Analysis(e)) => {
            println!("{}", pretty(&json!({ "error": e.kind(), "message": e.to_string() })).trim_end());
            ExitCode::from(1)
        }
        Err(Failure::Checks) => ExitCode::from(1),
    }
}
