//! Run configuration: a whitespace-separated `key=value` grammar.
//!
//! ```text
//! # comments run to end of line
//! command=gap alpha=1 k=1 n=2 h=0
//! xi=wedge sigma=vee          # or explicit increments, e.g. xi=+-+-
//! m=4,8,16 c_alpha=0.1,0.2    # lists are comma-separated
//! ```
//!
//! Later assignments override earlier ones. Every problem found is
//! reported, not just the first.

use std::fmt;
use std::str::FromStr;

use bpp_core::model::{BoundaryPair, Path};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Enumerate,
    Count,
    Gap,
    Mix,
    Sample,
    Hit,
    Blockgap,
    Envelope,
    Halo,
    Scaling,
}

impl Command {
    pub const ALL: [Command; 10] = [
        Command::Enumerate,
        Command::Count,
        Command::Gap,
        Command::Mix,
        Command::Sample,
        Command::Hit,
        Command::Blockgap,
        Command::Envelope,
        Command::Halo,
        Command::Scaling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Enumerate => "enumerate",
            Command::Count => "count",
            Command::Gap => "gap",
            Command::Mix => "mix",
            Command::Sample => "sample",
            Command::Hit => "hit",
            Command::Blockgap => "blockgap",
            Command::Envelope => "envelope",
            Command::Halo => "halo",
            Command::Scaling => "scaling",
        }
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundarySpec {
    Wedge,
    Vee,
    Increments(String),
}

impl BoundarySpec {
    pub fn path(&self, n: usize, h: i32) -> bpp_core::Result<Path> {
        match self {
            BoundarySpec::Wedge => Path::wedge(n, h),
            BoundarySpec::Vee => Path::vee(n, h),
            BoundarySpec::Increments(s) => Path::from_increments(s),
        }
    }
}

impl fmt::Display for BoundarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundarySpec::Wedge => f.write_str("wedge"),
            BoundarySpec::Vee => f.write_str("vee"),
            BoundarySpec::Increments(s) => f.write_str(s),
        }
    }
}

impl FromStr for BoundarySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "wedge" => Ok(BoundarySpec::Wedge),
            "vee" => Ok(BoundarySpec::Vee),
            _ if !s.is_empty() && s.chars().all(|c| c == '+' || c == '-') => Ok(BoundarySpec::Increments(s.into())),
            _ => Err(format!("boundary must be wedge, vee or a +/- string, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockFamily {
    Single,
    Particle,
    Polymer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub alpha: f64,
    pub k: usize,
    pub n: usize,
    pub h: i32,
    pub xi: BoundarySpec,
    pub sigma: BoundarySpec,
    /// Cube sides for the square-case commands.
    pub m: Vec<usize>,
    pub seed: u64,
    pub replicas: usize,
    pub horizon: Option<f64>,
    pub cap: Option<usize>,
    pub output: Option<String>,
    pub format: Format,
    pub max_v: usize,
    pub kind: BlockFamily,
    pub params: Vec<usize>,
    pub c_alpha: Vec<f64>,
    pub ceilings: usize,
}

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        Self {
            command,
            alpha: 1.0,
            k: 1,
            n: 4,
            h: 0,
            xi: BoundarySpec::Wedge,
            sigma: BoundarySpec::Vee,
            m: vec![4],
            seed: 0,
            replicas: 100,
            horizon: None,
            cap: None,
            output: None,
            format: Format::Csv,
            max_v: 6,
            kind: BlockFamily::Particle,
            params: vec![0, 1, 2],
            c_alpha: vec![0.1],
            ceilings: 1,
        }
    }

    pub fn bounds(&self) -> bpp_core::Result<BoundaryPair> {
        BoundaryPair::new(self.xi.path(self.n, self.h)?, self.sigma.path(self.n, self.h)?)
    }

    /// Canonical one-line form; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let list = |v: &[usize]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
        let mut parts = vec![
            format!("command={}", self.command.name()),
            format!("alpha={:?}", self.alpha),
            format!("k={}", self.k),
            format!("n={}", self.n),
            format!("h={}", self.h),
            format!("xi={}", self.xi),
            format!("sigma={}", self.sigma),
            format!("m={}", list(&self.m)),
            format!("seed={}", self.seed),
            format!("replicas={}", self.replicas),
        ];
        if let Some(h) = self.horizon {
            parts.push(format!("horizon={h:?}"));
        }
        if let Some(c) = self.cap {
            parts.push(format!("cap={c}"));
        }
        if let Some(o) = &self.output {
            parts.push(format!("output={o}"));
        }
        parts.push(format!(
            "format={}",
            match self.format {
                Format::Csv => "csv",
                Format::Json => "json",
            }
        ));
        parts.push(format!("max_v={}", self.max_v));
        parts.push(format!(
            "kind={}",
            match self.kind {
                BlockFamily::Single => "single",
                BlockFamily::Particle => "particle",
                BlockFamily::Polymer => "polymer",
            }
        ));
        parts.push(format!("params={}", list(&self.params)));
        parts.push(format!(
            "c_alpha={}",
            self.c_alpha.iter().map(|c| format!("{c:?}")).collect::<Vec<_>>().join(",")
        ));
        parts.push(format!("ceilings={}", self.ceilings));
        parts.join(" ")
    }
}

/// All violations found while parsing, in input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            f.write_str(e)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

fn parse_list<T: FromStr>(value: &str) -> Result<Vec<T>, ()> {
    value.split(',').map(|t| t.trim().parse::<T>().map_err(|_| ())).collect()
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let mut errors = Vec::new();
    let mut pairs = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        for token in line.split_whitespace() {
            match token.split_once('=') {
                Some((k, v)) if !k.is_empty() => pairs.push((k.to_string(), v.to_string())),
                _ => errors.push(format!("expected key=value, got {token:?}")),
            }
        }
    }
    let command = match pairs.iter().rev().find(|(k, _)| k == "command") {
        Some((_, v)) => match v.parse::<Command>() {
            Ok(c) => Some(c),
            Err(e) => {
                errors.push(e);
                None
            }
        },
        None => {
            errors.push("missing command".into());
            None
        }
    };
    let mut cfg = RunConfig::defaults(command.unwrap_or(Command::Gap));

    macro_rules! scalar {
        ($field:expr, $key:expr, $value:expr, $what:expr) => {
            match $value.parse() {
                Ok(v) => $field = v,
                Err(_) => errors.push(format!("{}: expected {}, got {:?}", $key, $what, $value)),
            }
        };
    }
    for (key, value) in &pairs {
        match key.as_str() {
            "command" => {}
            "alpha" => scalar!(cfg.alpha, key, value, "a number"),
            "k" => scalar!(cfg.k, key, value, "a non-negative integer"),
            "n" => scalar!(cfg.n, key, value, "a non-negative integer"),
            "h" => scalar!(cfg.h, key, value, "an integer"),
            "seed" => scalar!(cfg.seed, key, value, "a 64-bit unsigned integer"),
            "replicas" => scalar!(cfg.replicas, key, value, "a non-negative integer"),
            "max_v" => scalar!(cfg.max_v, key, value, "a non-negative integer"),
            "ceilings" => scalar!(cfg.ceilings, key, value, "a non-negative integer"),
            "xi" => match value.parse() {
                Ok(b) => cfg.xi = b,
                Err(e) => errors.push(format!("xi: {e}")),
            },
            "sigma" => match value.parse() {
                Ok(b) => cfg.sigma = b,
                Err(e) => errors.push(format!("sigma: {e}")),
            },
            "horizon" => match value.parse::<f64>() {
                Ok(v) => cfg.horizon = Some(v),
                Err(_) => errors.push(format!("horizon: expected a number, got {value:?}")),
            },
            "cap" => match value.parse::<usize>() {
                Ok(v) => cfg.cap = Some(v),
                Err(_) => errors.push(format!("cap: expected a positive integer, got {value:?}")),
            },
            "output" => cfg.output = Some(value.clone()),
            "format" => match value.as_str() {
                "csv" => cfg.format = Format::Csv,
                "json" => cfg.format = Format::Json,
                _ => errors.push(format!("format: expected csv or json, got {value:?}")),
            },
            "kind" => match value.as_str() {
                "single" => cfg.kind = BlockFamily::Single,
                "particle" => cfg.kind = BlockFamily::Particle,
                "polymer" => cfg.kind = BlockFamily::Polymer,
                _ => errors.push(format!("kind: expected single, particle or polymer, got {value:?}")),
            },
            "m" => match parse_list(value) {
                Ok(v) => cfg.m = v,
                Err(()) => errors.push(format!("m: expected a list of positive integers, got {value:?}")),
            },
            "params" => match parse_list(value) {
                Ok(v) => cfg.params = v,
                Err(()) => errors.push(format!("params: expected a list of integers, got {value:?}")),
            },
            "c_alpha" => match parse_list(value) {
                Ok(v) => cfg.c_alpha = v,
                Err(()) => errors.push(format!("c_alpha: expected a list of numbers, got {value:?}")),
            },
            _ => errors.push(format!("unknown key {key:?}")),
        }
    }

    if !(cfg.alpha > 0.0) || !cfg.alpha.is_finite() {
        errors.push(format!("alpha must be positive and finite, got {}", cfg.alpha));
    }
    if cfg.k == 0 {
        errors.push("k must be at least 1".into());
    }
    if cfg.n == 0 || (cfg.n as i64 + cfg.h as i64) % 2 != 0 || cfg.h.unsigned_abs() as usize > cfg.n {
        errors.push(format!("n={} and h={} need n ≥ 1, |h| ≤ n and n + h even", cfg.n, cfg.h));
    } else {
        let xi = cfg.xi.path(cfg.n, cfg.h);
        let sigma = cfg.sigma.path(cfg.n, cfg.h);
        for (name, p) in [("xi", &xi), ("sigma", &sigma)] {
            match p {
                Ok(p) if p.n() != cfg.n || p.h() != cfg.h => {
                    errors.push(format!("{name} has n={}, h={}; expected n={}, h={}", p.n(), p.h(), cfg.n, cfg.h))
                }
                Err(e) => errors.push(format!("{name}: {e}")),
                _ => {}
            }
        }
        if let (Ok(x), Ok(s)) = (&xi, &sigma) {
            if x.n() == s.n() && x.h() == s.h() && !x.dominates(s) {
                errors.push("ceiling lies below the floor somewhere".into());
            }
        }
    }
    if cfg.m.iter().any(|&m| m == 0) {
        errors.push("m entries must be positive".into());
    }
    if cfg.c_alpha.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
        errors.push("c_alpha entries must be positive".into());
    }
    if cfg.horizon.is_some_and(|h| !(h >= 0.0) || !h.is_finite()) {
        errors.push("horizon must be non-negative".into());
    }
    if cfg.cap == Some(0) {
        errors.push("cap must be positive".into());
    }
    let needs_replicas = matches!(
        cfg.command,
        Command::Sample | Command::Hit | Command::Envelope | Command::Halo | Command::Scaling
    );
    if needs_replicas && cfg.replicas == 0 {
        errors.push("replicas must be at least 1".into());
    }
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigErrors(errors))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_boundaries() {
        let c = parse_config("command=gap n=4 h=0 xi=wedge sigma=vee").unwrap();
        let b = c.bounds().unwrap();
        assert_eq!(b.xi().heights(), &[0, 1, 2, 1, 0]);
        assert_eq!(b.sigma().heights(), &[0, -1, -2, -1, 0]);
    }

    #[test]
    fn explicit_boundary() {
        let c = parse_config("command=gap n=4 h=0 xi=+-+-").unwrap();
        assert_eq!(c.bounds().unwrap().xi().heights(), &[0, 1, 0, 1, 0]);
    }

    #[test]
    fn zero_alpha_rejected() {
        let e = parse_config("command=gap alpha=0").unwrap_err();
        assert!(e.0.iter().any(|m| m.contains("alpha")));
    }

    #[test]
    fn all_errors_reported() {
        let e = parse_config("command=gap alpha=-1 n=3 h=0 bogus=1 xi=abc").unwrap_err();
        assert!(e.0.len() >= 4, "{e}");
        let e = parse_config("command=gap n=4 xi=-+-+ sigma=++--").unwrap_err();
        assert!(e.0.iter().any(|m| m.contains("below")), "{e}");
        assert!(parse_config("alpha=1").is_err());
    }

    #[test]
    fn round_trip() {
        let c = parse_config("command=halo m=8,16 c_alpha=0.01,0.02 horizon=12.5 seed=7 xi=+-+- n=4 cap=99").unwrap();
        assert_eq!(parse_config(&c.to_text()).unwrap(), c);
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&json).unwrap(), c);
    }

    #[test]
    fn later_keys_win() {
        let c = parse_config("command=gap alpha=2\nalpha=3 # override").unwrap();
        assert_eq!(c.alpha, 3.0);
    }
}
