use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use bpp_cli::{parse_config, run, Status, CAP_ENV};
use clap::Parser;

/// Exact chains, couplings and mixing experiments for ordered polymers.
///
/// Settings come from an optional `--config` file of `key=value` pairs,
/// then from flags, then from trailing `key=value` arguments; later
/// settings win.
#[derive(Parser, Debug)]
#[command(name = "bpp", version)]
struct Cli {
    /// enumerate | count | gap | mix | sample | hit | blockgap | envelope | halo | scaling
    command: String,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    h: Option<String>,
    /// wedge, vee or an increment string such as +-+-
    #[arg(long, allow_hyphen_values = true)]
    xi: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    sigma: Option<String>,
    /// Comma-separated cube sides.
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    replicas: Option<String>,
    #[arg(long)]
    horizon: Option<String>,
    #[arg(long)]
    cap: Option<String>,
    /// Output file (default: standard output).
    #[arg(long)]
    output: Option<String>,
    /// csv or json
    #[arg(long)]
    format: Option<String>,
    #[arg(long = "max-v")]
    max_v: Option<String>,
    /// single, particle or polymer
    #[arg(long)]
    kind: Option<String>,
    /// Comma-separated block half-widths.
    #[arg(long)]
    params: Option<String>,
    /// Comma-separated C(α) values.
    #[arg(long = "c-alpha")]
    c_alpha: Option<String>,
    #[arg(long)]
    ceilings: Option<String>,
    /// Extra `key=value` settings.
    #[arg(allow_hyphen_values = true)]
    settings: Vec<String>,
}

impl Cli {
    fn config_text(&self) -> io::Result<String> {
        let mut text = match &self.config {
            Some(path) => std::fs::read_to_string(path)?,
            None => String::new(),
        };
        text.push_str(&format!("\ncommand={}\n", self.command));
        let flags = [
            ("alpha", &self.alpha),
            ("k", &self.k),
            ("n", &self.n),
            ("h", &self.h),
            ("xi", &self.xi),
            ("sigma", &self.sigma),
            ("m", &self.m),
            ("seed", &self.seed),
            ("replicas", &self.replicas),
            ("horizon", &self.horizon),
            ("cap", &self.cap),
            ("output", &self.output),
            ("format", &self.format),
            ("max_v", &self.max_v),
            ("kind", &self.kind),
            ("params", &self.params),
            ("c_alpha", &self.c_alpha),
            ("ceilings", &self.ceilings),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                text.push_str(&format!("{key}={v}\n"));
            }
        }
        for s in &self.settings {
            text.push_str(s);
            text.push('\n');
        }
        Ok(text)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match cli.config_text() {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read config: {e}");
            return ExitCode::from(Status::ConfigError.code() as u8);
        }
    };
    let config = match parse_config(&text) {
        Ok(c) => c,
        Err(errors) => {
            for e in &errors.0 {
                eprintln!("error: {e}");
            }
            return ExitCode::from(Status::ConfigError.code() as u8);
        }
    };
    let env_cap = std::env::var(CAP_ENV).ok();
    let result = match &config.output {
        Some(path) => File::create(path).map_err(Into::into).and_then(|f| {
            let mut w = BufWriter::new(f);
            let status = run(&config, env_cap.as_deref(), &mut w)?;
            w.flush()?;
            Ok(status)
        }),
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            run(&config, env_cap.as_deref(), &mut w).and_then(|s| {
                w.flush()?;
                Ok(s)
            })
        }
    };
    match result {
        Ok(status) => {
            if status == Status::Censored {
                eprintln!("warning: some runs were censored at the horizon");
            }
            ExitCode::from(status.code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.status().code() as u8)
        }
    }
}
