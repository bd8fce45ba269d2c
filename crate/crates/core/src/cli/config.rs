//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Keys may be written
//! with dashes or underscores. Command-line flags are merged in as extra
//! pairs before validation, so every problem is reported in one pass.

use std::collections::BTreeMap;
use std::fmt;

use crate::quasiequiv::KernelSign;
use crate::scalinglimit::parse_lambda_grid;
use crate::testfn::Grid;

use super::Experiment;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Which symbol the `ir-slope` experiment uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IrSymbol {
    /// Bump derivative, `int h = 0`.
    Null,
    /// Plain bump with nonzero integral.
    Charged,
}

/// Charge profile `q:a:n` for sector experiments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileSpec {
    pub q: f64,
    pub a: f64,
    pub n: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    pub grid_points: Option<usize>,
    pub half_width: Option<f64>,
    pub mass: f64,
    pub lambda_grid: Vec<f64>,
    pub lambda_grid_text: String,
    pub nodes: Option<usize>,
    pub profile: ProfileSpec,
    pub seed: u64,
    pub output: String,
    pub format: Format,
    pub sign: KernelSign,
    pub k: usize,
    pub basis_size: usize,
    pub interval: (f64, f64),
    pub samples: usize,
    pub symbol: IrSymbol,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: None,
            grid_points: None,
            half_width: None,
            mass: 1.0,
            lambda_grid: parse_lambda_grid(DEFAULT_LAMBDA_GRID).expect("default grid parses"),
            lambda_grid_text: DEFAULT_LAMBDA_GRID.to_string(),
            nodes: None,
            profile: ProfileSpec {
                q: 1.0,
                a: 1.0,
                n: 4,
            },
            seed: 0,
            output: "out".to_string(),
            format: Format::Csv,
            sign: KernelSign::Minus,
            k: 256,
            basis_size: 32,
            interval: (-1.0, 1.0),
            samples: 20,
            symbol: IrSymbol::Null,
        }
    }
}

pub const DEFAULT_LAMBDA_GRID: &str = "1:1e-3:7";

pub const KEYS: &[&str] = &[
    "experiment",
    "grid_points",
    "half_width",
    "mass",
    "lambda_grid",
    "nodes",
    "profile",
    "seed",
    "output",
    "format",
    "sign",
    "k",
    "basis_size",
    "interval",
    "samples",
    "symbol",
];

/// One problem found while validating a configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: `{}`: {}", self.key, self.message),
            None => write!(f, "`{}`: {}", self.key, self.message),
        }
    }
}

/// Raw pairs with the line they came from (`None` for flags).
pub type RawPairs = Vec<(Option<usize>, String, String)>;

fn normalize_key(k: &str) -> String {
    k.trim().to_ascii_lowercase().replace('-', "_")
}

/// Splits config text into pairs; malformed lines become errors.
pub fn parse_pairs(text: &str) -> (RawPairs, Vec<ConfigError>) {
    let mut pairs = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => pairs.push((Some(i + 1), normalize_key(k), v.trim().to_string())),
            None => errors.push(ConfigError {
                line: Some(i + 1),
                key: line.to_string(),
                message: "expected `key = value`".into(),
            }),
        }
    }
    (pairs, errors)
}

/// Validates config text alone.
pub fn validate_config(text: &str) -> Result<ExperimentConfig, Vec<ConfigError>> {
    validate_with_overrides(text, &[])
}

/// Validates config text with flag overrides applied on top; later pairs win.
pub fn validate_with_overrides(
    text: &str,
    overrides: &[(String, String)],
) -> Result<ExperimentConfig, Vec<ConfigError>> {
    let (mut pairs, mut errors) = parse_pairs(text);
    pairs.extend(
        overrides
            .iter()
            .map(|(k, v)| (None, normalize_key(k), v.clone())),
    );
    let mut cfg = ExperimentConfig::default();
    let mut seen: BTreeMap<String, Option<usize>> = BTreeMap::new();
    for (line, key, value) in &pairs {
        let err = |message: String| ConfigError {
            line: *line,
            key: key.clone(),
            message,
        };
        if let Err(message) = apply(&mut cfg, key, value) {
            errors.push(err(message));
        }
        seen.insert(key.clone(), *line);
    }
    if let (Some(n), Some(l)) = (cfg.grid_points, cfg.half_width) {
        if let Err(e) = Grid::new(n, l) {
            errors.push(ConfigError {
                line: None,
                key: "grid_points".into(),
                message: e.to_string(),
            });
        }
    }
    if cfg.interval.0 >= cfg.interval.1 {
        errors.push(ConfigError {
            line: seen.get("interval").copied().flatten(),
            key: "interval".into(),
            message: "empty interval".into(),
        });
    }
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(errors)
    }
}

fn parse_f64(v: &str) -> Result<f64, String> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| format!("`{v}` is not a finite number"))
}

fn parse_usize(v: &str) -> Result<usize, String> {
    v.parse::<usize>()
        .map_err(|_| format!("`{v}` is not a nonnegative integer"))
}

fn apply(cfg: &mut ExperimentConfig, key: &str, v: &str) -> Result<(), String> {
    match key {
        "experiment" => cfg.experiment = Some(v.parse().map_err(|e: String| e)?),
        "grid_points" => {
            let n = parse_usize(v)?;
            if n < 16 || !n.is_power_of_two() {
                return Err(format!("N = {n} must be a power of two >= 16"));
            }
            cfg.grid_points = Some(n);
        }
        "half_width" => {
            let l = parse_f64(v)?;
            if l <= 0.0 {
                return Err(format!("{l} must be positive"));
            }
            cfg.half_width = Some(l);
        }
        "mass" => {
            let m = parse_f64(v)?;
            if m <= 0.0 {
                return Err(format!("{m} must be positive"));
            }
            cfg.mass = m;
        }
        "lambda_grid" => {
            cfg.lambda_grid = parse_lambda_grid(v).map_err(|e| e.to_string())?;
            cfg.lambda_grid_text = v.to_string();
        }
        "nodes" => {
            let n = parse_usize(v)?;
            if n < 2 {
                return Err("need at least two nodes per axis".into());
            }
            cfg.nodes = Some(n);
        }
        "profile" => {
            let parts: Vec<&str> = v.split(':').collect();
            if parts.len() != 3 {
                return Err(format!("`{v}` is not of the form q:a:n"));
            }
            let q = parse_f64(parts[0])?;
            let a = parse_f64(parts[1])?;
            let n = parts[2]
                .parse::<u32>()
                .map_err(|_| format!("`{}` is not a positive integer", parts[2]))?;
            if a <= 0.0 || n < 2 {
                return Err("need a > 0 and n >= 2".into());
            }
            cfg.profile = ProfileSpec { q, a, n };
        }
        "seed" => {
            cfg.seed = v
                .parse::<u64>()
                .map_err(|_| format!("`{v}` is not a 64-bit seed"))?
        }
        "output" => {
            if v.is_empty() {
                return Err("empty output path".into());
            }
            cfg.output = v.to_string();
        }
        "format" => {
            cfg.format = match v {
                "csv" => Format::Csv,
                "json" => Format::Json,
                _ => return Err(format!("`{v}` is not csv or json")),
            }
        }
        "sign" => cfg.sign = v.parse().map_err(|e: crate::Error| e.to_string())?,
        "k" => {
            let k = parse_usize(v)?;
            if k < 64 {
                return Err(format!("K = {k} is below 64"));
            }
            cfg.k = k;
        }
        "basis_size" => {
            let n = parse_usize(v)?;
            if !(2..=crate::quasiequiv::MAX_BASIS).contains(&n) {
                return Err(format!(
                    "{n} is outside 2..={}",
                    crate::quasiequiv::MAX_BASIS
                ));
            }
            cfg.basis_size = n;
        }
        "interval" => {
            let (a, b) = v
                .split_once(':')
                .ok_or_else(|| format!("`{v}` is not of the form a:b"))?;
            cfg.interval = (parse_f64(a)?, parse_f64(b)?);
        }
        "samples" => {
            let n = parse_usize(v)?;
            if n < 20 {
                return Err(format!("{n} is below 20"));
            }
            cfg.samples = n;
        }
        "symbol" => {
            cfg.symbol = match v {
                "null" => IrSymbol::Null,
                "charged" => IrSymbol::Charged,
                _ => return Err(format!("`{v}` is not null or charged")),
            }
        }
        _ => return Err(format!("unknown key (expected one of {})", KEYS.join(", "))),
    }
    Ok(())
}

impl ExperimentConfig {
    /// Canonical `key = value` text of every setting, used for hashing.
    pub fn canonical(&self, experiment: Experiment) -> String {
        let (n, l) = self.grid_for(experiment);
        let mut out = String::new();
        let mut put = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        put("experiment", experiment.name().to_string());
        put("grid_points", n.to_string());
        put("half_width", format!("{l:?}"));
        put("mass", format!("{:?}", self.mass));
        put("lambda_grid", self.lambda_grid_text.clone());
        put("nodes", self.nodes_for(experiment).to_string());
        put(
            "profile",
            format!(
                "{:?}:{:?}:{}",
                self.profile.q, self.profile.a, self.profile.n
            ),
        );
        put("seed", self.seed.to_string());
        put("format", self.format.extension().to_string());
        put("sign", self.sign.name().to_string());
        put("k", self.k.to_string());
        put("basis_size", self.basis_size.to_string());
        put(
            "interval",
            format!("{:?}:{:?}", self.interval.0, self.interval.1),
        );
        put("samples", self.samples.to_string());
        put(
            "symbol",
            match self.symbol {
                IrSymbol::Null => "null",
                IrSymbol::Charged => "charged",
            }
            .to_string(),
        );
        out
    }

    /// `(N, L)` with per-experiment defaults for unset values.
    pub fn grid_for(&self, e: Experiment) -> (usize, f64) {
        let (n, l) = e.default_grid();
        (self.grid_points.unwrap_or(n), self.half_width.unwrap_or(l))
    }

    pub fn nodes_for(&self, e: Experiment) -> usize {
        self.nodes.unwrap_or(match e {
            Experiment::NpointLimit => 9,
            _ => 33,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(validate_config("").unwrap(), ExperimentConfig::default());
        assert_eq!(
            validate_config("# nothing\n\n").unwrap(),
            ExperimentConfig::default()
        );
    }

    #[test]
    fn single_targeted_error() {
        let errs = validate_config("grid_points = 1000\n").unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].key, "grid_points");
        assert_eq!(errs[0].line, Some(1));
    }

    #[test]
    fn all_errors_reported() {
        let errs = validate_config("mass = -1\nformat = xml\nbogus = 3\n").unwrap_err();
        assert_eq!(errs.len(), 3);
        let keys: Vec<&str> = errs.iter().map(|e| e.key.as_str()).collect();
        assert_eq!(keys, ["mass", "format", "bogus"]);
    }

    #[test]
    fn overrides_win() {
        let c = validate_with_overrides(
            "mass = 2\n",
            &[
                ("mass".into(), "0.5".into()),
                ("lambda-grid".into(), "1:1e-2:3".into()),
            ],
        )
        .unwrap();
        assert_eq!(c.mass, 0.5);
        assert_eq!(c.lambda_grid.len(), 3);
    }

    #[test]
    fn structured_values() {
        let c = validate_config(
            "profile = 2:0.5:6\ninterval = -0.5:1.5\nsign = plus\nexperiment = galerkin\n",
        )
        .unwrap();
        assert_eq!(
            c.profile,
            ProfileSpec {
                q: 2.0,
                a: 0.5,
                n: 6
            }
        );
        assert_eq!(c.interval, (-0.5, 1.5));
        assert_eq!(c.sign, KernelSign::Plus);
        assert_eq!(c.experiment, Some(Experiment::Galerkin));
        assert!(validate_config("interval = 1:0\n").is_err());
        assert!(validate_config("profile = 1:1\n").is_err());
        assert!(validate_config("no equals sign\n").is_err());
    }
}
