//! Scenario files, command dispatch and CSV/SVG emission.

pub mod config;
pub mod portrait;
pub mod svg;
pub mod verify;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::berwald_moor::{adapted_from_immersion, induced_metric, BmError, SurfaceImmersion};
use crate::flow::{integrate, FlowError, PtmPoint};
use crate::metric::{MetricError, PseudoFinslerMetric};
use crate::puiseux::{solve_geodesic_series, PuiseuxError, SeriesProblem};
use crate::singular::{classify_singular, locate_tangencies, trace_s_curves, SingularError};

pub use config::{load_config, parse_config, ConfigError, Mode, PuiseuxSpec, ScenarioConfig};
pub use portrait::{build_portrait, Portrait};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("writing {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Singular(#[from] SingularError),
    #[error(transparent)]
    BerwaldMoor(#[from] BmError),
    #[error(transparent)]
    Puiseux(#[from] PuiseuxError),
    #[error("{0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Classify,
    Portrait,
    Integrate,
    Singular,
    Puiseux,
    Verify,
}

/// What a command wrote and whether it succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub files: Vec<PathBuf>,
    pub report: String,
    pub ok: bool,
}

/// The metric of a scenario: the coefficients as given, or the metric
/// induced by the immersion.
pub fn scenario_metric(cfg: &ScenarioConfig) -> Result<PseudoFinslerMetric, CliError> {
    Ok(match cfg.mode {
        Mode::Metric => PseudoFinslerMetric::new(cfg.n, cfg.coefficients.clone())?,
        Mode::BerwaldMoor => induced_metric(&SurfaceImmersion::new(cfg.immersion.clone())?)?,
    })
}

fn write(out: &Path, name: &str, contents: &str, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|source| CliError::Io { path: out.display().to_string(), source })?;
    let path = out.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    files.push(path);
    Ok(())
}

pub fn run(command: Command, cfg: &ScenarioConfig, out: &Path) -> Result<CommandOutput, CliError> {
    match command {
        Command::Classify => cmd_classify(cfg, out),
        Command::Portrait => cmd_portrait(cfg, out),
        Command::Integrate => cmd_integrate(cfg, out),
        Command::Singular => cmd_singular(cfg, out),
        Command::Puiseux => cmd_puiseux(cfg, out),
        Command::Verify => cmd_verify(cfg, out),
    }
}

/// Stratum raster on a `resolution × resolution` grid of nodes.
pub fn cmd_classify(cfg: &ScenarioConfig, out: &Path) -> Result<CommandOutput, CliError> {
    let m = scenario_metric(cfg)?;
    let d = cfg.domain;
    let k = cfg.resolution;
    let mut csv = String::from("x,y,stratum\n");
    let mut counts = std::collections::BTreeMap::<String, usize>::new();
    for i in 0..k {
        for j in 0..k {
            let x = d.xmin + (d.xmax - d.xmin) * i as f64 / (k - 1) as f64;
            let y = d.ymin + (d.ymax - d.ymin) * j as f64 / (k - 1) as f64;
            let s = match m.classify_point(x, y) {
                Ok(s) => s.to_string(),
                Err(_) => "undefined".to_string(),
            };
            let _ = writeln!(csv, "{x:.9e},{y:.9e},{s}");
            *counts.entry(s).or_default() += 1;
        }
    }
    let mut files = Vec::new();
    write(out, "classify.csv", &csv, &mut files)?;
    let report = counts.iter().map(|(s, c)| format!("{s}: {c}")).collect::<Vec<_>>().join("\n");
    Ok(CommandOutput { files, report, ok: true })
}

pub fn cmd_portrait(cfg: &ScenarioConfig, out: &Path) -> Result<CommandOutput, CliError> {
    let p = build_portrait(cfg)?;
    let mut files = Vec::new();
    write(out, "portrait.svg", &p.to_svg(), &mut files)?;
    let mut report = format!(
        "{} curves, {} geodesics, {} family members",
        p.curves.len(),
        p.geodesics.len(),
        p.family.len()
    );
    for d in &p.diagnostics {
        report.push('\n');
        report.push_str(d);
    }
    Ok(CommandOutput { files, report, ok: true })
}

pub fn cmd_integrate(cfg: &ScenarioConfig, out: &Path) -> Result<CommandOutput, CliError> {
    let m = scenario_metric(cfg)?;
    if cfg.seeds.is_empty() {
        return Err(CliError::Unsupported("integrate needs at least one `seed = x y p`".into()));
    }
    let mut files = Vec::new();
    let mut report = Vec::new();
    for (k, s) in cfg.seeds.iter().enumerate() {
        let t = integrate(&m, PtmPoint::p_chart(s[0], s[1], s[2]), &cfg.integrator)?;
        write(out, &format!("trace_{k:03}.csv"), &t.to_csv(&m), &mut files)?;
        let events: Vec<String> = t.events.iter().map(|e| e.kind.to_string()).collect();
        report.push(format!("seed {k}: {} points, events [{}]", t.points.len(), events.join(", ")));
    }
    Ok(CommandOutput { files, report: report.join("\n"), ok: true })
}

pub fn cmd_singular(cfg: &ScenarioConfig, out: &Path) -> Result<CommandOutput, CliError> {
    let mut files = Vec::new();
    if cfg.mode == Mode::BerwaldMoor {
        let imm = SurfaceImmersion::new(cfg.immersion.clone())?;
        let (alm, pair, _) = adapted_from_immersion(&imm)?;
        let y0 = cfg.bm_y0.unwrap_or(0.0);
        let mut csv = String::from("u,lambda_x,lambda_u,lambda_0,du_is_eigenvector\n");
        for which in 0..3 {
            let s = alm.blowup_spectrum(y0, which)?;
            let _ = writeln!(
                csv,
                "{:.12e},{:.12e},{:.12e},{:.12e},{}",
                s.u, s.normalized[0], s.normalized[1], s.normalized[2], s.du_is_eigenvector
            );
        }
        write(out, "blowup_spectra.csv", &csv, &mut files)?;
        let report = format!("adapted chart from components f{} and f{}; spectra at (0, {y0})", pair.0, pair.1);
        return Ok(CommandOutput { files, report, ok: true });
    }
    let m = scenario_metric(cfg)?;
    let curves = trace_s_curves(&m, cfg.domain, cfg.resolution)?;
    let mut s_csv = String::from("curve,label,x,y,p\n");
    let mut pts_csv = String::from("curve,x,y,p,re1,im1,re2,im2,kind\n");
    let mut tan_csv = String::from("curve,x,y,p,sine,eigen_nonzero\n");
    let mut n_tan = 0;
    for (ci, c) in curves.iter().enumerate() {
        let slopes = c.slopes.clone().unwrap_or_default();
        for (k, q) in c.points.iter().enumerate() {
            let p = slopes.get(k).copied().unwrap_or(f64::NAN);
            let _ = writeln!(s_csv, "{ci},{},{:.12e},{:.12e},{:.12e}", c.label, q[0], q[1], p);
            if k % 5 == 0 {
                let sp = classify_singular(&m, PtmPoint::p_chart(q[0], q[1], p))?;
                let (l1, l2) = sp.pair();
                let _ = writeln!(
                    pts_csv,
                    "{ci},{:.12e},{:.12e},{:.12e},{:.9e},{:.9e},{:.9e},{:.9e},{}",
                    q[0], q[1], p, l1.re, l1.im, l2.re, l2.im, sp.kind
                );
            }
        }
        for t in locate_tangencies(&m, c)? {
            n_tan += 1;
            let _ = writeln!(tan_csv, "{ci},{:.12e},{:.12e},{:.12e},{:.3e},{}", t.x, t.y, t.p_i, t.sine, t.eigen_nonzero);
        }
    }
    write(out, "s_curves.csv", &s_csv, &mut files)?;
    write(out, "singular_points.csv", &pts_csv, &mut files)?;
    write(out, "tangencies.csv", &tan_csv, &mut files)?;
    let report = format!("{} S-curve pieces, {n_tan} tangency points", curves.len());
    Ok(CommandOutput { files, report, ok: true })
}

pub fn cmd_puiseux(cfg: &ScenarioConfig, out: &Path) -> Result<CommandOutput, CliError> {
    let Some(spec) = &cfg.puiseux else {
        return Err(CliError::Unsupported("puiseux needs puiseux_s, puiseux_seed and puiseux_order".into()));
    };
    let m = scenario_metric(cfg)?;
    let problem = SeriesProblem {
        base: spec.base,
        s: spec.s,
        seed: spec.seed.clone(),
        order: spec.order,
        free: spec.free.clone(),
    };
    let r = solve_geodesic_series(&m, problem)?;
    let mut csv = String::from("order,linear,forcing,status,value\n");
    for row in &r.rows {
        let _ = writeln!(csv, "{},{:.12e},{:.12e},{},{:.15e}", row.order, row.linear, row.forcing, row.status, row.value);
    }
    let (x, y, p) = r.curve();
    let mut series = String::from("k,x_k,y_k,p_k\n");
    for k in 0..=spec.order {
        let _ = writeln!(series, "{k},{:.15e},{:.15e},{:.15e}", x.coeff(k), y.coeff(k), p.coeff(k));
    }
    let mut files = Vec::new();
    write(out, "puiseux.csv", &csv, &mut files)?;
    write(out, "series.csv", &series, &mut files)?;
    let report = format!(
        "shift {}, normalization {}, free orders {:?}, first obstruction {:?}, max residual {:e}",
        r.sigma,
        r.normalization,
        r.free_orders(),
        r.first_obstruction(),
        r.max_residual
    );
    let ok = r.first_obstruction().is_none();
    Ok(CommandOutput { files, report, ok })
}

pub fn cmd_verify(cfg: &ScenarioConfig, out: &Path) -> Result<CommandOutput, CliError> {
    let m = scenario_metric(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng);
    let results = verify::run_verify(&m, cfg.domain, &mut rng)?;
    let mut csv = String::from("check,status,max_residual,threshold,detail\n");
    let mut report = Vec::new();
    for c in &results {
        let status = if c.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(csv, "{},{status},{:.3e},{:.1e},{}", c.name, c.max_residual, c.threshold, c.detail);
        report.push(format!("{status} {} max residual {:.3e} (< {:.0e}) {}", c.name, c.max_residual, c.threshold, c.detail));
    }
    let mut files = Vec::new();
    write(out, "verify.csv", &csv, &mut files)?;
    Ok(CommandOutput { files, report: report.join("\n"), ok: results.iter().all(|c| c.passed) })
}
