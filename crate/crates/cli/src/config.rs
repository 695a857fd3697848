//! Experiment configuration: a flat `key = value` text file merged with
//! command-line overrides, the command line winning on conflict.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use btlab_core::{QuadratureRule, ScalarField, Theorem, Variant};

use crate::error::{CliError, CliResult, Context};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Estimate,
    Compare,
    Residual,
    MarginalTest,
    Acceptance,
}

impl Kind {
    pub fn label(&self) -> &'static str {
        match self {
            Kind::Estimate => "estimate",
            Kind::Compare => "compare",
            Kind::Residual => "residual",
            Kind::MarginalTest => "marginal-test",
            Kind::Acceptance => "acceptance",
        }
    }
}

impl FromStr for Kind {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s.trim() {
            "estimate" => Ok(Kind::Estimate),
            "compare" => Ok(Kind::Compare),
            "residual" => Ok(Kind::Residual),
            "marginal-test" => Ok(Kind::MarginalTest),
            "acceptance" | "acceptance-suite" => Ok(Kind::Acceptance),
            other => Err(CliError::Usage(format!("unknown experiment kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(CliError::Usage(format!(
                "unknown format {other:?} (expected csv or json)"
            ))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

/// Raw key/value settings in the order of precedence they were merged.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut raw = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", lineno + 1)))?;
            raw.set(k, v);
        }
        Ok(raw)
    }

    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.trim().to_string(), value.trim().to_string());
    }

    /// Parses a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> CliResult<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("override {pair:?} is not key=value")))?;
        self.set(k, v);
        Ok(())
    }

    /// Later settings win.
    pub fn merge(&mut self, other: RawConfig) {
        self.entries.extend(other.entries);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }
}

const KNOWN_KEYS: &[&str] = &[
    "kind",
    "experiment_id",
    "theorem",
    "f",
    "g",
    "c",
    "t",
    "x",
    "epsilon",
    "variant",
    "k",
    "variants",
    "n",
    "seed",
    "clock_steps",
    "s_max_multiplier",
    "n_points",
    "hermite_order",
    "grid_points",
    "half_width",
    "s_steps",
    "picard_max_iter",
    "picard_tol",
    "spectral_steps",
    "spectral_tol",
    "check_times",
    "rel_step",
    "residual_tol",
    "alpha",
    "out",
    "format",
];

/// A fully validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub experiment_id: String,
    pub theorem: Theorem,
    pub f: ScalarField,
    pub g: ScalarField,
    pub c: ScalarField,
    pub t: f64,
    pub x: Vec<f64>,
    pub epsilon: f64,
    pub variant: Variant,
    pub variants: Vec<Variant>,
    pub n: usize,
    pub seed: u64,
    pub clock_steps: usize,
    pub rule: QuadratureRule,
    pub grid_points: usize,
    pub half_width: Option<f64>,
    pub s_steps: usize,
    pub picard_max_iter: usize,
    pub picard_tol: f64,
    pub spectral_steps: usize,
    pub spectral_tol: f64,
    pub check_times: Vec<f64>,
    pub rel_step: f64,
    pub residual_tol: f64,
    pub alpha: f64,
    pub out: Option<PathBuf>,
    pub format: Format,
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> CliResult<T> {
    v.parse()
        .map_err(|_| CliError::InvalidArgument(format!("{key}: cannot parse {v:?}")))
}

fn parse_list(key: &str, v: &str) -> CliResult<Vec<f64>> {
    v.split([',', ';']).map(|p| parse_num(key, p.trim())).collect()
}

fn parse_variant(v: &str, k: Option<&str>) -> CliResult<Variant> {
    let v = v.trim();
    let spelled = match k {
        Some(k) if v.eq_ignore_ascii_case("kebtp") => format!("kebtp:{k}"),
        _ => v.to_string(),
    };
    Variant::from_str(&spelled).context("variant")
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> CliResult<Self> {
        if let Some(bad) = raw.entries.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(CliError::Usage(format!("unknown config key {bad:?}")));
        }
        let get = |k: &str| raw.get(k);
        let kind: Kind = get("kind")
            .ok_or_else(|| CliError::Usage("experiment kind is required".into()))?
            .parse()?;
        let field = |k: &str, default: &str| ScalarField::from_name(get(k).unwrap_or(default)).context(k);
        let num = |k: &str, default: f64| get(k).map_or(Ok(default), |v| parse_num::<f64>(k, v));
        let count = |k: &str, default: usize| get(k).map_or(Ok(default), |v| parse_num::<usize>(k, v));

        let theorem = match get("theorem") {
            Some(v) => Theorem::from_str(v).context("theorem")?,
            None => Theorem::T1Btbm,
        };
        let variant = parse_variant(get("variant").unwrap_or("btp"), get("k"))?;
        let variants = get("variants")
            .unwrap_or("btp,ebtp")
            .split(',')
            .map(|v| parse_variant(v, None))
            .collect::<CliResult<Vec<_>>>()?;
        let rule = QuadratureRule::new(
            num("s_max_multiplier", 8.0)?,
            count("n_points", 256)?,
            count("hermite_order", 40)?,
        )
        .context("quadrature rule")?;
        let cfg = Self {
            kind,
            experiment_id: get("experiment_id").unwrap_or(kind.label()).to_string(),
            theorem,
            f: field("f", "cos")?,
            g: field("g", "const:0")?,
            c: field("c", "neg-const:1")?,
            t: num("t", 1.0)?,
            x: get("x").map_or(Ok(vec![0.0]), |v| parse_list("x", v))?,
            epsilon: num("epsilon", 1.0)?,
            variant,
            variants,
            n: count("n", 100_000)?,
            seed: get("seed").map_or(Ok(0), |v| parse_num("seed", v))?,
            clock_steps: count("clock_steps", 200)?,
            rule,
            grid_points: count("grid_points", 256)?,
            half_width: get("half_width").map(|v| parse_num("half_width", v)).transpose()?,
            s_steps: count("s_steps", 512)?,
            picard_max_iter: count("picard_max_iter", 50)?,
            picard_tol: num("picard_tol", 1e-10)?,
            spectral_steps: count("spectral_steps", 10_000)?,
            spectral_tol: num("spectral_tol", 1e-6)?,
            check_times: get("check_times").map_or(Ok(vec![0.5, 1.0]), |v| parse_list("check_times", v))?,
            rel_step: num("rel_step", 1e-3)?,
            residual_tol: num("residual_tol", 1e-3)?,
            alpha: num("alpha", 0.01)?,
            out: get("out").map(PathBuf::from),
            format: get("format").map_or(Ok(Format::Csv), Format::from_str)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::InvalidArgument(msg));
        if !(self.t > 0.0) || !self.t.is_finite() {
            return bad(format!("t must be positive, got {}", self.t));
        }
        if self.x.is_empty() || self.x.iter().any(|v| !v.is_finite()) {
            return bad("x must be a nonempty list of finite numbers".into());
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if self.clock_steps == 0 || self.s_steps == 0 || self.spectral_steps == 0 {
            return bad("step counts must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.theorem == Theorem::T3Fk && !self.c.is_nonpositive() {
            return bad(format!("potential {} must be <= 0", self.c.name()));
        }
        if self.kind == Kind::MarginalTest && self.variants.len() < 2 {
            return bad("marginal-test needs at least two variants".into());
        }
        if self.check_times.is_empty() || self.check_times.iter().any(|t| !(*t > 0.0)) {
            return bad("check_times must be positive".into());
        }
        Ok(())
    }
}
