//! Subcommand dispatch and table emission.

use std::io::{self, Write};
use std::time::Instant;

use bpp_core::block::{gap_trend_report, TrendKind};
use bpp_core::coupling::{cftp_sample_capped, hitting_time_max, CFTP_EVENT_CAP};
use bpp_core::equilibrium::{count_by_volume, exact_measure_capped, DEFAULT_STATE_CAP};
use bpp_core::glauber::{build_exact_chain_capped, spectral_gap_exact, tv_mixing_exact, DynamicsParams};
use bpp_core::lab::{build_envelope, check_envelope_containment, check_halo_confinement, hitting_scaling_experiment, random_ceiling};
use bpp_core::model::PolymerConfig;
use bpp_core::rng::replica_rng;
use bpp_core::Error;

use crate::config::{BlockFamily, ConfigErrors, Format, RunConfig};

/// Environment variable overriding the default state cap.
pub const CAP_ENV: &str = "BPP_STATE_CAP";

/// Horizon for `hit` when none is configured.
pub const DEFAULT_HIT_HORIZON: f64 = 1000.0;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Failure,
    ConfigError,
    CapExceeded,
    Censored,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Failure => 1,
            Status::ConfigError => 2,
            Status::CapExceeded => 3,
            Status::Censored => 4,
        }
    }
}

/// A computed table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub censored: bool,
}

impl Table {
    fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
            censored: false,
        }
    }
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigErrors),
    Core(Error),
    Io(io::Error),
}

impl RunError {
    pub fn status(&self) -> Status {
        match self {
            RunError::Config(_) => Status::ConfigError,
            RunError::Core(Error::CapExceeded { .. }) => Status::CapExceeded,
            RunError::Core(Error::Numerical { .. }) | RunError::Io(_) => Status::Failure,
            RunError::Core(_) => Status::ConfigError,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Core(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Core(e)
    }
}

impl From<io::Error> for RunError {
    fn from(e: io::Error) -> Self {
        RunError::Io(e)
    }
}

/// Seventeen significant digits, locale-free.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// `config.cap`, else the environment override, else the library default.
pub fn state_cap(config: &RunConfig, env: Option<&str>) -> Result<usize, RunError> {
    if let Some(c) = config.cap {
        return Ok(c);
    }
    match env {
        None => Ok(DEFAULT_STATE_CAP),
        Some(v) => v.trim().parse::<usize>().ok().filter(|&c| c > 0).ok_or_else(|| {
            RunError::Config(ConfigErrors(vec![format!("{CAP_ENV} must be a positive integer, got {v:?}")]))
        }),
    }
}

pub fn compute(config: &RunConfig, cap: usize) -> Result<Table, RunError> {
    use crate::config::Command::*;
    let c = config;
    let (k, n, h, alpha) = (c.k, c.n, c.h, c.alpha);
    let instance = |t: &mut Vec<String>| {
        t.extend([k.to_string(), n.to_string(), h.to_string(), float(alpha)]);
    };
    let table = match c.command {
        Enumerate => {
            let m = exact_measure_capped(&c.bounds()?, k, alpha, cap)?;
            let mut t = Table::new(&["index", "volume", "probability", "state"]);
            for (i, s) in m.states().iter().enumerate() {
                t.rows.push(vec![
                    i.to_string(),
                    m.volumes()[i].to_string(),
                    float(m.probabilities()[i]),
                    s.encode(),
                ]);
            }
            t
        }
        Count => {
            let table = count_by_volume(c.max_v, cap)?;
            let mut t = Table::new(&["v", "count"]);
            for v in 0..=c.max_v {
                t.rows.push(vec![v.to_string(), table.get(v).to_string()]);
            }
            t
        }
        Gap | Mix => {
            let chain = build_exact_chain_capped(&c.bounds()?, k, alpha, cap)?;
            let gap = spectral_gap_exact(&chain)?;
            let mut row = Vec::new();
            instance(&mut row);
            row.extend([chain.len().to_string(), float(gap)]);
            if c.command == Gap {
                let mut t = Table::new(&["k", "n", "h", "alpha", "states", "gap"]);
                t.rows.push(row);
                t
            } else {
                let t_mix = tv_mixing_exact(&chain)?;
                let min_mu = chain.measure().probabilities().iter().copied().fold(f64::INFINITY, f64::min);
                row.extend([float(t_mix), float((1.0 - min_mu.ln()) / gap)]);
                let mut t = Table::new(&["k", "n", "h", "alpha", "states", "gap", "t_mix", "bound"]);
                t.rows.push(row);
                t
            }
        }
        Sample => {
            let bounds = c.bounds()?;
            let params = DynamicsParams {
                alpha,
                bounds: bounds.clone(),
                k,
                seed: c.seed,
                horizon: 0.0,
            };
            let mut t = Table::new(&["seed", "k", "n", "h", "alpha", "sample", "volume", "window", "state"]);
            for i in 0..c.replicas as u64 {
                let out = cftp_sample_capped(&params, i, CFTP_EVENT_CAP)?;
                let mut row = vec![c.seed.to_string()];
                instance(&mut row);
                row.extend([
                    i.to_string(),
                    out.state.excess_volume(bounds.xi())?.to_string(),
                    float(out.window),
                    out.state.encode(),
                ]);
                t.rows.push(row);
            }
            t
        }
        Hit => {
            let bounds = c.bounds()?;
            let params = DynamicsParams {
                alpha,
                bounds: bounds.clone(),
                k,
                seed: c.seed,
                horizon: c.horizon.unwrap_or(DEFAULT_HIT_HORIZON),
            };
            let init = PolymerConfig::replicate(bounds.sigma(), k)?;
            let mut t = Table::new(&["seed", "k", "n", "h", "alpha", "replica", "time", "censored"]);
            for r in 0..c.replicas as u64 {
                let hit = hitting_time_max(&params, &init, r)?;
                t.censored |= hit.censored;
                let mut row = vec![c.seed.to_string()];
                instance(&mut row);
                row.extend([r.to_string(), float(hit.time), (hit.censored as u8).to_string()]);
                t.rows.push(row);
            }
            t
        }
        Blockgap => {
            let kind = match c.kind {
                BlockFamily::Single => TrendKind::SingleFlip,
                BlockFamily::Particle => TrendKind::Particle,
                BlockFamily::Polymer => TrendKind::Polymer,
            };
            let rows = gap_trend_report(kind, &[(c.bounds()?, k)], &c.params, alpha, cap)?;
            let mut t = Table::new(&["kind", "n", "k", "h", "alpha", "param", "states", "gap"]);
            let name = match c.kind {
                BlockFamily::Single => "single",
                BlockFamily::Particle => "particle",
                BlockFamily::Polymer => "polymer",
            };
            for r in rows {
                t.rows.push(vec![
                    name.to_string(),
                    r.n.to_string(),
                    r.k.to_string(),
                    r.h.to_string(),
                    float(r.alpha),
                    r.param.to_string(),
                    r.states.to_string(),
                    float(r.gap),
                ]);
            }
            t
        }
        Envelope => {
            let mut t = Table::new(&["M", "side", "alpha", "C_alpha", "replica", "first_violation_time"]);
            for &m in &c.m {
                for &ca in &c.c_alpha {
                    let schedule = build_envelope(m, ca)?;
                    let horizon = c.horizon.unwrap_or_else(|| schedule.default_horizon());
                    let report = check_envelope_containment(&schedule, alpha, horizon, c.replicas, c.seed)?;
                    for (r, v) in report.first_violations.iter().enumerate() {
                        t.rows.push(vec![
                            m.to_string(),
                            schedule.side().to_string(),
                            float(alpha),
                            float(ca),
                            r.to_string(),
                            v.map_or_else(|| "none".to_string(), float),
                        ]);
                    }
                }
            }
            t
        }
        Halo => {
            let mut t = Table::new(&[
                "M",
                "alpha",
                "C_alpha",
                "ceiling",
                "xi",
                "replica",
                "confined_checks",
                "checks",
                "confinement_flag",
                "extra_volume",
                "volume_bound",
            ]);
            for &m in &c.m {
                let mut rng = replica_rng(c.seed, u64::MAX - m as u64);
                let ceilings = (0..c.ceilings).map(|_| random_ceiling(m, &mut rng)).collect::<Result<Vec<_>, _>>()?;
                for &ca in &c.c_alpha {
                    for (ci, xi) in ceilings.iter().enumerate() {
                        let report = check_halo_confinement(xi, m, alpha, ca, c.replicas, c.seed, c.horizon)?;
                        for (r, &hits) in report.confined.iter().enumerate() {
                            t.rows.push(vec![
                                m.to_string(),
                                float(alpha),
                                float(ca),
                                ci.to_string(),
                                xi.increments(),
                                r.to_string(),
                                hits.to_string(),
                                report.checks_per_replica.to_string(),
                                ((hits == report.checks_per_replica) as u8).to_string(),
                                report.extra_volume.to_string(),
                                float(report.volume_bound),
                            ]);
                        }
                    }
                }
            }
            t
        }
        Scaling => {
            let report = hitting_scaling_experiment(&c.m, alpha, c.replicas, c.seed, c.horizon)?;
            let mut t = Table::new(&["M", "alpha", "replicas", "censored", "median", "quantile"]);
            for r in &report.rows {
                t.censored |= r.censored > 0;
                t.rows.push(vec![
                    r.m.to_string(),
                    float(alpha),
                    r.replicas.to_string(),
                    r.censored.to_string(),
                    float(r.median),
                    float(r.quantile),
                ]);
            }
            t
        }
    };
    Ok(table)
}

/// First line of every output: artifact version and the full config. The
/// output path is left out so that the same run written to two places
/// gives identical files.
pub fn header_line(config: &RunConfig) -> String {
    let echo = RunConfig {
        output: None,
        ..config.clone()
    };
    format!("# bpp {} {}", env!("CARGO_PKG_VERSION"), echo.to_text())
}

pub fn write_csv(config: &RunConfig, table: &Table, out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "{}", header_line(config))?;
    writeln!(out, "{}", table.columns.join(","))?;
    for row in &table.rows {
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_json(config: &RunConfig, table: &Table, seconds: f64, out: &mut dyn Write) -> io::Result<()> {
    let value = serde_json::json!({
        "header": header_line(config),
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "columns": table.columns,
        "rows": table.rows,
        "censored": table.censored,
        "elapsed_seconds": seconds,
    });
    serde_json::to_writer_pretty(&mut *out, &value)?;
    writeln!(out)
}

/// Computes and writes one run; returns the exit status.
pub fn run(config: &RunConfig, env_cap: Option<&str>, out: &mut dyn Write) -> Result<Status, RunError> {
    let cap = state_cap(config, env_cap)?;
    let start = Instant::now();
    let table = compute(config, cap)?;
    match config.format {
        Format::Csv => write_csv(config, &table, out)?,
        Format::Json => write_json(config, &table, start.elapsed().as_secs_f64(), out)?,
    }
    Ok(if table.censored { Status::Censored } else { Status::Ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn rows(text: &str) -> Vec<Vec<String>> {
        let cfg = parse_config(text).unwrap();
        compute(&cfg, DEFAULT_STATE_CAP).unwrap().rows
    }

    #[test]
    fn two_state_gap() {
        let alpha = 0.5 * 2f64.ln();
        let r = rows(&format!("command=gap k=1 n=2 alpha={alpha}"));
        let gap: f64 = r[0][5].parse().unwrap();
        assert!((gap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn counts() {
        let r = rows("command=count max_v=4");
        let counts: Vec<&str> = r.iter().map(|row| row[1].as_str()).collect();
        assert_eq!(counts, ["1", "1", "3", "6", "13"]);
    }

    #[test]
    fn cap_sources() {
        let cfg = parse_config("command=gap").unwrap();
        assert_eq!(state_cap(&cfg, None).unwrap(), DEFAULT_STATE_CAP);
        assert_eq!(state_cap(&cfg, Some("12")).unwrap(), 12);
        assert!(state_cap(&cfg, Some("x")).is_err());
        let cfg = parse_config("command=gap cap=5").unwrap();
        assert_eq!(state_cap(&cfg, Some("12")).unwrap(), 5);
    }

    #[test]
    fn cap_exceeded_status() {
        let cfg = parse_config("command=enumerate k=2 n=4 cap=3").unwrap();
        let err = run(&cfg, None, &mut Vec::new()).unwrap_err();
        assert_eq!(err.status(), Status::CapExceeded);
    }

    #[test]
    fn float_format() {
        assert_eq!(float(1.0), "1.0000000000000000e0");
    }
}
