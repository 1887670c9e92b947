//! Line-oriented `key = value` scenario files.
//!
//! ```text
//! # comments start with '#'
//! mode = metric            # or berwald-moor
//! n = 3
//! param.alpha = 1          # named constant usable in expressions
//! a0 = alpha*y^2 - x
//! a2 = 1
//! domain = -1 1 -1 1       # xmin xmax ymin ymax
//! seed = -0.5 0.2 1        # geodesic seed x y p (repeatable)
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::expr::ScalarField;
use crate::flow::{BBox, IntegratorConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Metric,
    BerwaldMoor,
}

/// Series problem settings (`puiseux_*` keys).
#[derive(Debug, Clone, PartialEq)]
pub struct PuiseuxSpec {
    pub base: (f64, f64),
    pub s: usize,
    pub seed: Vec<f64>,
    pub order: usize,
    pub free: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub mode: Mode,
    pub n: usize,
    /// `a_0..a_n` in metric mode.
    pub coefficients: Vec<ScalarField>,
    /// `f_1..f_n` in Berwald-Moor mode.
    pub immersion: Vec<ScalarField>,
    pub domain: BBox,
    pub resolution: usize,
    /// Geodesic seeds `(x, y, p)`.
    pub seeds: Vec<[f64; 3]>,
    /// Grid size for isotropic-line seeds in portraits (0 disables).
    pub isotropic_grid: usize,
    /// Grid size for singular-line seeds in portraits (0 disables).
    pub singular_grid: usize,
    /// Discriminant point and double direction `(x, y, p0)` for family shooting.
    pub family: Option<[f64; 3]>,
    /// Ordinate of the degenerate point on `x = 0` (Berwald-Moor mode).
    pub bm_y0: Option<f64>,
    pub alphas: Vec<f64>,
    /// Largest `|x|` reached by Berwald-Moor family members.
    pub family_extent: f64,
    pub integrator: IntegratorConfig,
    pub puiseux: Option<PuiseuxSpec>,
    /// Seed of the random generator used by `verify`.
    pub rng: u64,
    pub out: PathBuf,
}

struct Entry {
    line: usize,
    key: String,
    value: String,
}

const REPEATABLE: &[&str] = &["seed"];

fn known_key(key: &str, n_max: usize) -> bool {
    const FIXED: &[&str] = &[
        "name",
        "mode",
        "n",
        "domain",
        "resolution",
        "seed",
        "isotropic_grid",
        "singular_grid",
        "family",
        "bm_y0",
        "alphas",
        "family_extent",
        "rtol",
        "atol",
        "h_max",
        "max_steps",
        "max_seg",
        "max_length",
        "event_tol",
        "chart_threshold",
        "puiseux_base",
        "puiseux_s",
        "puiseux_seed",
        "puiseux_order",
        "puiseux_free",
        "rng",
        "out",
    ];
    if FIXED.contains(&key) || key.strip_prefix("param.").is_some_and(valid_ident) {
        return true;
    }
    let indexed = |prefix: &str, lo: usize| {
        key.strip_prefix(prefix).and_then(|k| k.parse::<usize>().ok()).is_some_and(|k| k >= lo && k <= n_max)
    };
    indexed("a", 0) || indexed("f", 1)
}

fn valid_ident(s: &str) -> bool {
    let mut c = s.chars();
    c.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && c.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && s != "x"
        && s != "y"
}

/// Reads and validates a scenario. `overrides` are `key=value` pairs applied
/// after the file (`seed` entries are appended, other keys replace).
pub fn load_config(path: &Path, overrides: &[String]) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
    let mut cfg = parse_config(&text, overrides)?;
    if cfg.name.is_empty() {
        cfg.name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    }
    Ok(cfg)
}

pub fn parse_config(text: &str, overrides: &[String]) -> Result<ScenarioConfig, ConfigError> {
    let mut entries: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Line { line: i + 1, message: format!("expected `key = value`, got `{line}`") });
        };
        let key = k.trim().to_string();
        if !REPEATABLE.contains(&key.as_str()) && entries.iter().any(|e| e.key == key) {
            return Err(ConfigError::Line { line: i + 1, message: format!("duplicate key `{key}`") });
        }
        entries.push(Entry { line: i + 1, key, value: v.trim().to_string() });
    }
    for o in overrides {
        let Some((k, v)) = o.split_once('=') else {
            return Err(ConfigError::Invalid(format!("override `{o}` is not of the form key=value")));
        };
        let key = k.trim().to_string();
        if !REPEATABLE.contains(&key.as_str()) {
            entries.retain(|e| e.key != key);
        }
        entries.push(Entry { line: 0, key, value: v.trim().to_string() });
    }
    build(&entries)
}

fn err(e: &Entry, message: impl Into<String>) -> ConfigError {
    let message = message.into();
    if e.line == 0 {
        ConfigError::Invalid(format!("override `{}`: {message}", e.key))
    } else {
        ConfigError::Line { line: e.line, message }
    }
}

fn numbers(e: &Entry) -> Result<Vec<f64>, ConfigError> {
    e.value
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| err(e, format!("`{s}` is not a number"))))
        .collect()
}

fn numbers_n(e: &Entry, k: usize) -> Result<Vec<f64>, ConfigError> {
    let v = numbers(e)?;
    if v.len() != k {
        return Err(err(e, format!("expected {k} numbers, got {}", v.len())));
    }
    Ok(v)
}

fn number(e: &Entry) -> Result<f64, ConfigError> {
    Ok(numbers_n(e, 1)?[0])
}

fn count(e: &Entry) -> Result<usize, ConfigError> {
    e.value.parse::<usize>().map_err(|_| err(e, format!("`{}` is not a non-negative integer", e.value)))
}

/// Replaces whole-word occurrences of each parameter by its parenthesized value.
fn substitute_params(text: &str, params: &BTreeMap<String, f64>) -> String {
    let mut out = String::new();
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut String| {
        match params.get(word.as_str()) {
            Some(v) => out.push_str(&format!("({v:?})")),
            None => out.push_str(word),
        }
        word.clear();
    };
    for c in text.chars() {
        if c.is_ascii_alphanumeric() || c == '_' || (c == '.' && !word.is_empty() && word.chars().all(|d| d.is_ascii_digit())) {
            word.push(c);
        } else {
            flush(&mut word, &mut out);
            out.push(c);
        }
    }
    flush(&mut word, &mut out);
    out
}

fn build(entries: &[Entry]) -> Result<ScenarioConfig, ConfigError> {
    let n_max = 64;
    for e in entries {
        if !known_key(&e.key, n_max) {
            return Err(err(e, format!("unknown key `{}`", e.key)));
        }
    }
    let mut params = BTreeMap::new();
    for e in entries.iter().filter(|e| e.key.starts_with("param.")) {
        params.insert(e.key["param.".len()..].to_string(), number(e)?);
    }
    let expr = |e: &Entry| {
        ScalarField::parse(&substitute_params(&e.value, &params)).map_err(|x| err(e, format!("in `{}`: {x}", e.value)))
    };

    let mut cfg = ScenarioConfig {
        name: String::new(),
        mode: Mode::Metric,
        n: 0,
        coefficients: Vec::new(),
        immersion: Vec::new(),
        domain: BBox::square(1.0),
        resolution: 120,
        seeds: Vec::new(),
        isotropic_grid: 0,
        singular_grid: 0,
        family: None,
        bm_y0: None,
        alphas: vec![-1.0, -0.5, 0.0, 0.5, 1.0],
        family_extent: 0.3,
        integrator: IntegratorConfig::default(),
        puiseux: None,
        rng: 1,
        out: PathBuf::from("out"),
    };
    let mut n_entry = None;
    let mut coeffs: BTreeMap<usize, (usize, ScalarField)> = BTreeMap::new();
    let mut immersion: BTreeMap<usize, (usize, ScalarField)> = BTreeMap::new();
    let (mut pbase, mut ps, mut pseed, mut porder, mut pfree) = (None, None, None, None, BTreeMap::new());
    for e in entries {
        match e.key.as_str() {
            "name" => cfg.name = e.value.clone(),
            "mode" => {
                cfg.mode = match e.value.as_str() {
                    "metric" => Mode::Metric,
                    "berwald-moor" => Mode::BerwaldMoor,
                    other => return Err(err(e, format!("unknown mode `{other}`"))),
                }
            }
            "n" => {
                cfg.n = count(e)?;
                n_entry = Some(e.line);
            }
            "domain" => {
                let v = numbers_n(e, 4)?;
                cfg.domain = BBox::new(v[0], v[1], v[2], v[3]);
                if !cfg.domain.is_nonempty() {
                    return Err(err(e, "domain box is empty"));
                }
            }
            "resolution" => cfg.resolution = count(e)?.max(4),
            "seed" => {
                let v = numbers_n(e, 3)?;
                cfg.seeds.push([v[0], v[1], v[2]]);
            }
            "isotropic_grid" => cfg.isotropic_grid = count(e)?,
            "singular_grid" => cfg.singular_grid = count(e)?,
            "family" => {
                let v = numbers_n(e, 3)?;
                cfg.family = Some([v[0], v[1], v[2]]);
            }
            "bm_y0" => cfg.bm_y0 = Some(number(e)?),
            "alphas" => cfg.alphas = numbers(e)?,
            "family_extent" => cfg.family_extent = number(e)?,
            "rtol" => cfg.integrator.tol.rtol = number(e)?,
            "atol" => cfg.integrator.tol.atol = number(e)?,
            "h_max" => cfg.integrator.tol.h_max = number(e)?,
            "max_steps" => cfg.integrator.max_steps = count(e)?,
            "max_seg" => cfg.integrator.max_seg = number(e)?,
            "max_length" => cfg.integrator.max_length = number(e)?,
            "event_tol" => cfg.integrator.event_tol = number(e)?,
            "chart_threshold" => cfg.integrator.chart_threshold = number(e)?,
            "puiseux_base" => {
                let v = numbers_n(e, 2)?;
                pbase = Some((v[0], v[1]));
            }
            "puiseux_s" => ps = Some(count(e)?),
            "puiseux_seed" => pseed = Some(numbers(e)?),
            "puiseux_order" => porder = Some(count(e)?),
            "puiseux_free" => {
                for item in e.value.split_whitespace() {
                    let parsed = item
                        .split_once(':')
                        .and_then(|(k, v)| Some((k.parse::<usize>().ok()?, v.parse::<f64>().ok()?)));
                    let Some((k, v)) = parsed else {
                        return Err(err(e, format!("expected `order:value`, got `{item}`")));
                    };
                    pfree.insert(k, v);
                }
            }
            "rng" => cfg.rng = e.value.parse().map_err(|_| err(e, "rng must be an unsigned integer"))?,
            "out" => cfg.out = PathBuf::from(&e.value),
            k if k.starts_with("param.") => {}
            k if k.starts_with('a') => {
                coeffs.insert(k[1..].parse().expect("validated key"), (e.line, expr(e)?));
            }
            k if k.starts_with('f') => {
                immersion.insert(k[1..].parse().expect("validated key"), (e.line, expr(e)?));
            }
            _ => unreachable!("validated key"),
        }
    }

    if n_entry.is_none() {
        return Err(ConfigError::Invalid("missing `n`".into()));
    }
    let n = cfg.n;
    match (coeffs.is_empty(), immersion.is_empty()) {
        (false, false) => {
            return Err(ConfigError::Invalid("give either coefficients a_i or an immersion f_i, not both".into()))
        }
        (true, true) => return Err(ConfigError::Invalid("no coefficients a_i or immersion f_i given".into())),
        _ => {}
    }
    if !coeffs.is_empty() {
        if cfg.mode != Mode::Metric {
            return Err(ConfigError::Invalid("coefficients a_i require mode = metric".into()));
        }
        if let Some((&k, (line, _))) = coeffs.iter().find(|(k, _)| **k > n) {
            return Err(ConfigError::Line { line: *line, message: format!("a{k} exceeds n = {n}") });
        }
        cfg.coefficients =
            (0..=n).map(|k| coeffs.get(&k).map(|(_, f)| f.clone()).unwrap_or_else(|| ScalarField::constant(0.0))).collect();
    } else {
        if cfg.mode != Mode::BerwaldMoor {
            return Err(ConfigError::Invalid("an immersion f_i requires mode = berwald-moor".into()));
        }
        if let Some(k) = (1..=n).find(|k| !immersion.contains_key(k)) {
            return Err(ConfigError::Invalid(format!("missing f{k} for n = {n}")));
        }
        if let Some((&k, (line, _))) = immersion.iter().find(|(k, _)| **k > n) {
            return Err(ConfigError::Line { line: *line, message: format!("f{k} exceeds n = {n}") });
        }
        cfg.immersion = immersion.into_values().map(|(_, f)| f).collect();
    }
    cfg.integrator.domain = cfg.domain;
    if ps.is_some() || pseed.is_some() || porder.is_some() {
        let (Some(s), Some(seed), Some(order)) = (ps, pseed, porder) else {
            return Err(ConfigError::Invalid("puiseux needs puiseux_s, puiseux_seed and puiseux_order".into()));
        };
        cfg.puiseux = Some(PuiseuxSpec { base: pbase.unwrap_or((0.0, 0.0)), s, seed, order, free: pfree });
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_loads() {
        let cfg = parse_config("n = 3\na0 = -x\na2 = 1\n", &[]).unwrap();
        assert_eq!(cfg.mode, Mode::Metric);
        assert_eq!(cfg.coefficients.len(), 4);
        assert_eq!(cfg.coefficients[0].eval(2.0, 5.0).unwrap(), -2.0);
        assert!(cfg.coefficients[1].is_identically_zero() && cfg.coefficients[3].is_identically_zero());
    }

    #[test]
    fn immersion_loads() {
        let cfg = parse_config("mode = berwald-moor\nn = 3\nf1 = x\nf2 = y\nf3 = y - 2*x^2\n", &[]).unwrap();
        assert_eq!(cfg.mode, Mode::BerwaldMoor);
        assert_eq!(cfg.immersion.len(), 3);
        assert_eq!(cfg.immersion[2].eval(1.0, 3.0).unwrap(), 1.0);
    }

    #[test]
    fn both_kinds_rejected() {
        let e = parse_config("mode = berwald-moor\nn = 3\na0 = x\nf1 = x\nf2 = y\nf3 = y\n", &[]).unwrap_err();
        assert!(matches!(e, ConfigError::Invalid(_)));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_config("n = 3\n\nbogus = 1\n", &[]).unwrap_err();
        assert_eq!(e, ConfigError::Line { line: 3, message: "unknown key `bogus`".into() });
        let e = parse_config("n = 3\na0 = x +\n", &[]).unwrap_err();
        assert!(matches!(e, ConfigError::Line { line: 2, .. }));
        let e = parse_config("n = 3\na0 = x\ndomain = 1 0 0 1\n", &[]).unwrap_err();
        assert!(matches!(e, ConfigError::Line { line: 3, .. }));
    }

    #[test]
    fn params_and_overrides() {
        let text = "n = 3\nparam.alpha = 2\na0 = alpha*y^2 - x\na2 = 1\nseed = 0 0 1\n";
        let cfg = parse_config(text, &["param.alpha=-1".into(), "seed=1 1 1".into()]).unwrap();
        assert_eq!(cfg.coefficients[0].eval(0.0, 1.0).unwrap(), -1.0);
        assert_eq!(cfg.seeds.len(), 2);
        assert_eq!(substitute_params("alpha2*alpha + 1.5", &[("alpha".to_string(), 3.0)].into()), "alpha2*(3.0) + 1.5");
    }
}
