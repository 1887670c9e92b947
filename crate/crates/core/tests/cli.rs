use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use pfinsler::cli::{build_portrait, parse_config, run, scenario_metric, Command as Cmd};
use pfinsler::flow::chart_values;
use pfinsler::metric::Chart;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.cfg"))
}

fn pfinsler(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pfinsler")).args(args).output().unwrap()
}

fn run_on(cmd: &str, cfg: &Path, out: &Path, extra: &[&str]) -> std::process::Output {
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    pfinsler(&args)
}

#[test]
fn classify_writes_a_raster() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_on("classify", &scenario("fold"), dir.path(), &["--seed", "resolution=11"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("classify.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,y,stratum"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 121);
    for row in rows {
        let f: Vec<&str> = row.split(',').collect();
        let x: f64 = f[0].parse().unwrap();
        let expected = if x.abs() < 1e-12 { "M01" } else if x > 0.0 { "M+" } else { "M-" };
        assert_eq!(f[2], expected, "{row}");
    }
}

#[test]
fn puiseux_report_for_the_tongue() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_on("puiseux", &scenario("berwald_moor_tongue"), dir.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("puiseux.csv")).unwrap();
    let free: Vec<&str> = csv.lines().filter(|l| l.contains(",FREE,")).collect();
    assert_eq!(free.len(), 1);
    assert!(free[0].starts_with("4,"));
    assert!(!csv.contains("OBSTRUCTED"));
    assert!(dir.path().join("series.csv").exists());
}

#[test]
fn verify_passes_on_a_random_cubic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cubic.cfg");
    fs::write(
        &cfg,
        "name = cubic\nn = 3\na0 = 0.3*x - y + 0.2\na1 = x*y - 0.7\na2 = 1 + 0.4*y^2\na3 = 0.5 - 0.1*x\n\
         domain = -1 1 -1 1\nrng = 7\n",
    )
    .unwrap();
    let out = run_on("verify", &cfg, dir.path(), &[]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}\n{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("verify.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(1) == Some("PASS")), "{csv}");
}

#[test]
fn integrate_and_singular_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_on("integrate", &scenario("bent_fold_pos"), dir.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("trace_000.csv").exists());
    let out = run_on("singular", &scenario("bent_fold_pos"), dir.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["s_curves.csv", "singular_points.csv", "tangencies.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let out = run_on("singular", &scenario("berwald_moor_tongue"), dir.path(), &[]);
    assert!(out.status.success());
    let spectra = fs::read_to_string(dir.path().join("blowup_spectra.csv")).unwrap();
    assert_eq!(spectra.lines().count(), 4);
}

#[test]
fn bad_configs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "n = 3\na0 = -x\nmystery = 1\n").unwrap();
    let out = run_on("classify", &cfg, dir.path(), &[]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
    let out = pfinsler(&["classify", "--config", "/nonexistent/file.cfg"]);
    assert!(!out.status.success());
}

#[test]
fn portrait_is_written_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(&fs::read_to_string(scenario("fold_parabola")).unwrap(), &[]).unwrap();
    let a = run(Cmd::Portrait, &cfg, &dir.path().join("a")).unwrap();
    let b = run(Cmd::Portrait, &cfg, &dir.path().join("b")).unwrap();
    let sa = fs::read(&a.files[0]).unwrap();
    assert_eq!(sa, fs::read(&b.files[0]).unwrap());
    assert!(String::from_utf8(sa).unwrap().contains("</svg>"));
}

#[test]
fn portrait_geodesics_follow_their_slopes() {
    // dy = ∫ p dx along P-chart segments, checked with the end-corrected
    // trapezoid rule using p' = P/Δ. Segments near Δ = 0, where p' varies
    // quickly, are skipped.
    for name in ["fold", "bent_fold_pos", "berwald_moor_tongue"] {
        let cfg = parse_config(&fs::read_to_string(scenario(name)).unwrap(), &[]).unwrap();
        let portrait = build_portrait(&cfg).unwrap();
        let m = scenario_metric(&cfg).unwrap();
        let slope_rate = |x: f64, y: f64, p: f64| {
            let v = chart_values(&m, Chart::P, x, y, p).unwrap();
            (v.delta.abs() > 1e-2 * (1.0 + v.scale).powi(2)).then(|| v.p / v.delta)
        };
        let mut checked = 0;
        for tr in &portrait.geodesics {
            for w in tr.points.windows(2) {
                let (a, b) = (w[0].pt, w[1].pt);
                if a.chart != Chart::P || b.chart != Chart::P {
                    continue;
                }
                let (dx, dy) = (b.x - a.x, b.y - a.y);
                let seg = dx.hypot(dy);
                let (Some(ra), Some(rb)) = (slope_rate(a.x, a.y, a.slope), slope_rate(b.x, b.y, b.slope)) else {
                    continue;
                };
                if (rb - ra).abs() > 0.1 * (1.0 + ra.abs()) {
                    continue;
                }
                let resid = (dy - 0.5 * (a.slope + b.slope) * dx + dx * dx * (rb - ra) / 12.0).abs();
                assert!(resid <= 1e-5 * seg + 1e-12, "{name}: {resid:e} on segment {seg:e}");
                checked += 1;
            }
        }
        assert!(checked > 100, "{name}: {checked}");
    }
}
