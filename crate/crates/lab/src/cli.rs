//! Command-line parsing and exit-code policy.
//!
//! Exit codes: 0 success, 2 when a check fails or parameters are rejected
//! by the numerical preconditions, 1 on any other error, 64 when the
//! command line or config file cannot be parsed.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use anderson_core::Error;
use clap::{Args, Parser};

use crate::config::{Command, ExperimentConfig, FitAxis, KernelSpec, U0Spec, VariantName};
use crate::io::{Manifest, Versions};
use crate::pool::Pool;
use crate::study;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "anderson-moments", version, about = "Moment, event and bound studies for the parabolic Anderson model")]
#[command(allow_negative_numbers = true)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Flat JSON config; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub flags: Flags,
}

/// Every config field as an optional flag.
#[derive(Debug, Default, Args)]
pub struct Flags {
    /// constant:σ², fbm:α[:d] or tabulated:file.csv
    #[arg(long)]
    pub kernel: Option<KernelSpec>,
    #[arg(long = "H")]
    pub h: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub d: Option<usize>,
    /// constant:c or tabulated:file.csv
    #[arg(long)]
    pub u0: Option<U0Spec>,
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub t: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub x: Option<Vec<f64>>,
    #[arg(long = "K")]
    pub steps: Option<usize>,
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, env = "ANDERSON_MOMENTS_THREADS")]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub variant: Option<Vec<VariantName>>,
    /// Lift the desk-scale limits on n, t, K and samples.
    #[arg(long)]
    pub allow_large: bool,
    #[arg(long)]
    pub dump_paths: Option<u64>,
    #[arg(long)]
    pub dump_gram: Option<u64>,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub c2: Option<f64>,
    #[arg(long)]
    pub kernel_c1: Option<f64>,
    #[arg(long)]
    pub kernel_c2: Option<f64>,
    #[arg(long)]
    pub c_h: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub c_eps: Option<f64>,
    #[arg(long)]
    pub m_override: Option<f64>,
    #[arg(long = "M")]
    pub m: Option<f64>,
    #[arg(long)]
    pub x_j: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub r: Option<Vec<f64>>,
    #[arg(long)]
    pub r_nodes: Option<usize>,
    #[arg(long)]
    pub gj_samples: Option<u64>,
    #[arg(long)]
    pub grid_check: bool,
    #[arg(long)]
    pub c_eps_samples: Option<u64>,
    #[arg(long)]
    pub draws: Option<u64>,
    #[arg(long)]
    pub inner_samples: Option<u64>,
    #[arg(long)]
    pub z_half_width: Option<f64>,
    #[arg(long)]
    pub z_nodes: Option<usize>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<FitAxis>,
}

macro_rules! overlay {
    ($flags:expr, $cfg:expr; $($f:ident),* ; opt $($o:ident),*) => {
        $(if let Some(v) = $flags.$f.clone() { $cfg.$f = v; })*
        $(if let Some(v) = $flags.$o.clone() { $cfg.$o = Some(v); })*
    };
}

impl Flags {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        overlay!(self, cfg;
            kernel, h, u0, n, t, x, steps, samples, seed, threads, output, variant, dump_paths, dump_gram,
            c_h, eps, m, x_j, r, r_nodes, c_eps_samples, draws, inner_samples, z_half_width, z_nodes, mode;
            opt alpha, beta, d, c1, c2, kernel_c1, kernel_c2, c_eps, m_override, gj_samples, input);
        cfg.allow_large |= self.allow_large;
        cfg.grid_check |= self.grid_check;
    }
}

impl Cli {
    pub fn into_config(self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        cfg.subcommand = self.command;
        self.flags.apply(&mut cfg);
        if cfg.subcommand == Command::Fit && cfg.input.is_none() {
            anyhow::bail!("fit needs --input <moments.csv>");
        }
        Ok(cfg)
    }
}

/// Parameter problems the user can fix, as opposed to failures.
fn is_validation(e: &anyhow::Error) -> bool {
    matches!(
        e.downcast_ref::<Error>(),
        Some(Error::Domain(_) | Error::Divergent { .. } | Error::SideConditions(_) | Error::Envelope(_) | Error::InsufficientData(_))
    )
}

/// Parses `args`, runs the study, writes the manifest and returns the exit
/// code. Reports go to `out`, diagnostics to `err`.
pub fn execute<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{}", e.render()) } else { write!(out, "{}", e.render()) };
            return code;
        }
    };
    let cfg = match cli.into_config() {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            return EXIT_USAGE;
        }
    };
    let pool = match Pool::new(cfg.threads) {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            return EXIT_ERROR;
        }
    };
    let start = Instant::now();
    let result = study::run(&cfg, &pool);
    let wall = start.elapsed().as_secs_f64();
    let (code, outcome, error) = match result {
        Ok(o) => (if o.ok { EXIT_OK } else { EXIT_CHECK_FAILED }, o, None),
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            let code = if is_validation(&e) { EXIT_CHECK_FAILED } else { EXIT_ERROR };
            (code, study::Outcome::default(), Some(format!("{e:#}")))
        }
    };
    let _ = write!(out, "{}", outcome.report);
    for w in &outcome.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    let manifest = Manifest {
        run_id: cfg.run_id(),
        subcommand: cfg.subcommand.name().to_string(),
        config_digest: cfg.digest(),
        versions: Versions::default(),
        threads: pool.threads(),
        wall_time_s: wall,
        outputs: outcome.outputs,
        warnings: outcome.warnings,
        error,
        success: code == EXIT_OK,
        config: cfg,
    };
    match manifest.write() {
        Ok(p) => {
            let _ = writeln!(err, "manifest: {}", p.display());
            code
        }
        Err(e) => {
            let _ = writeln!(err, "error: writing manifest: {e:#}");
            EXIT_ERROR
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> ExperimentConfig {
        Cli::try_parse_from(args).unwrap().into_config().unwrap()
    }

    #[test]
    fn flags_reach_the_config() {
        let c = parse(&["x", "moments", "--kernel", "constant:1.0", "--H", "0.25", "--n", "2,3", "--t", "1", "--samples", "1", "--x", "-0.5"]);
        assert_eq!(c.kernel, KernelSpec::Constant { sigma2: 1.0 });
        assert_eq!((c.h, c.n.clone(), c.t.clone(), c.samples, c.x.clone()), (0.25, vec![2, 3], vec![1.0], 1, vec![-0.5]));
        assert_eq!(c.subcommand, Command::Moments);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"H":0.4,"samples":77,"kernel":{"kind":"constant","sigma2":0.5}}"#).unwrap();
        let c = parse(&["x", "bounds", "--config", p.to_str().unwrap(), "--H", "0.25"]);
        assert_eq!((c.h, c.samples, c.subcommand), (0.25, 77, Command::Bounds));
        assert_eq!(c.kernel, KernelSpec::Constant { sigma2: 0.5 });
    }

    #[test]
    fn bad_usage_is_64() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(execute(["x", "nonsense"], &mut o, &mut e), EXIT_USAGE);
        assert_eq!(execute(["x", "moments", "--kernel", "gauss:1"], &mut o, &mut e), EXIT_USAGE);
        assert_eq!(execute(["x", "moments", "--config", "/nonexistent/c.json"], &mut o, &mut e), EXIT_USAGE);
        assert_eq!(execute(["x", "fit", "--mode", "t"], &mut o, &mut e), EXIT_USAGE);
        assert_eq!(execute(["x", "--help"], &mut o, &mut e), EXIT_OK);
    }
}
