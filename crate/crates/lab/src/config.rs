//! Experiment configuration: a flat JSON object whose keys mirror the CLI
//! flags, plus the kernel and initial-condition specs.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anderson_core::kernels::TabulatedKernel;
use anderson_core::{CovarianceKernel, InitialCondition, Variant};
use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Moments,
    Solution,
    Events,
    Bounds,
    Validate,
    Fit,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Moments => "moments",
            Command::Solution => "solution",
            Command::Events => "events",
            Command::Bounds => "bounds",
            Command::Validate => "validate",
            Command::Fit => "fit",
        }
    }
}

/// Spatial kernel as written in configs. On the command line the short
/// forms `constant:1.0`, `fbm:0.25`, `fbm:0.25:2` and `tabulated:file.csv`
/// are accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelSpec {
    Constant {
        sigma2: f64,
    },
    Fbm {
        alpha: f64,
        #[serde(default = "one")]
        dim: usize,
    },
    /// `(x, y, Q)` triples in a CSV file.
    Tabulated {
        path: PathBuf,
        #[serde(default = "unit")]
        alpha: f64,
        #[serde(default)]
        beta: f64,
        #[serde(default = "unit")]
        c1: f64,
        #[serde(default)]
        c2: f64,
    },
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

impl KernelSpec {
    pub fn build(&self) -> anyhow::Result<CovarianceKernel> {
        Ok(match self {
            KernelSpec::Constant { sigma2 } => CovarianceKernel::constant(*sigma2)?,
            KernelSpec::Fbm { alpha, dim } => CovarianceKernel::fbm_sum(*alpha, *dim)?,
            KernelSpec::Tabulated { path, alpha, beta, c1, c2 } => {
                let triples = read_triples(path)?;
                CovarianceKernel::tabulated(TabulatedKernel::from_triples(&triples)?, *alpha, *beta, *c1, *c2)?
            }
        })
    }
}

impl FromStr for KernelSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut it = s.splitn(3, ':');
        let kind = it.next().unwrap_or_default();
        let a = it.next();
        let b = it.next();
        let num = |v: Option<&str>, what: &str| -> Result<f64, String> {
            v.ok_or_else(|| format!("kernel `{kind}` needs {what}"))?
                .parse::<f64>()
                .map_err(|e| format!("bad {what} in `{s}`: {e}"))
        };
        match kind {
            "constant" if b.is_none() => Ok(KernelSpec::Constant { sigma2: num(a, "σ²")? }),
            "fbm" => {
                let dim = match b {
                    Some(d) => d.parse().map_err(|e| format!("bad dimension in `{s}`: {e}"))?,
                    None => 1,
                };
                Ok(KernelSpec::Fbm { alpha: num(a, "α")?, dim })
            }
            "tabulated" => {
                let rest = match b {
                    Some(b) => format!("{}:{b}", a.unwrap_or_default()),
                    None => a.ok_or("kernel `tabulated` needs a file")?.to_string(),
                };
                Ok(KernelSpec::Tabulated {
                    path: rest.into(),
                    alpha: 1.0,
                    beta: 0.0,
                    c1: 1.0,
                    c2: 0.0,
                })
            }
            _ => Err(format!("unknown kernel `{s}` (expected constant:σ², fbm:α[:d] or tabulated:file)")),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Constant { sigma2 } => write!(f, "constant:{sigma2}"),
            KernelSpec::Fbm { alpha, dim: 1 } => write!(f, "fbm:{alpha}"),
            KernelSpec::Fbm { alpha, dim } => write!(f, "fbm:{alpha}:{dim}"),
            KernelSpec::Tabulated { path, .. } => write!(f, "tabulated:{}", path.display()),
        }
    }
}

/// Initial datum. `constant:c` (or a bare number) and `tabulated:file.csv`
/// with `(x, u0)` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum U0Spec {
    Constant { value: f64 },
    Tabulated { path: PathBuf },
}

impl U0Spec {
    pub fn build(&self) -> anyhow::Result<InitialCondition> {
        let u0 = match self {
            U0Spec::Constant { value } => InitialCondition::Constant(*value),
            U0Spec::Tabulated { path } => {
                let rows = read_rows(path, 2)?;
                InitialCondition::Tabulated {
                    nodes: rows.iter().map(|r| r[0]).collect(),
                    values: rows.iter().map(|r| r[1]).collect(),
                }
            }
        };
        u0.validate()?;
        Ok(u0)
    }
}

impl FromStr for U0Spec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Ok(value) = s.parse::<f64>() {
            return Ok(U0Spec::Constant { value });
        }
        match s.split_once(':') {
            Some(("constant", v)) => v
                .parse()
                .map(|value| U0Spec::Constant { value })
                .map_err(|e| format!("bad constant in `{s}`: {e}")),
            Some(("tabulated", p)) => Ok(U0Spec::Tabulated { path: p.into() }),
            _ => Err(format!("unknown initial condition `{s}` (expected constant:c or tabulated:file)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum VariantName {
    Skorohod,
    Stratonovich,
}

impl From<VariantName> for Variant {
    fn from(v: VariantName) -> Variant {
        match v {
            VariantName::Skorohod => Variant::Skorohod,
            VariantName::Stratonovich => Variant::Stratonovich,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FitAxis {
    N,
    T,
}

/// Everything a run depends on. Unset optional fields fall back to values
/// derived from the kernel or, for `C_ε`, to a measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub subcommand: Command,
    pub kernel: KernelSpec,
    #[serde(rename = "H")]
    pub h: f64,
    /// Overrides the kernel's declared regularity exponent.
    pub alpha: Option<f64>,
    /// Overrides the kernel's declared far-field exponent.
    pub beta: Option<f64>,
    /// Spatial dimension; defaults to the length of `x`.
    pub d: Option<usize>,
    pub u0: U0Spec,
    pub n: Vec<usize>,
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    #[serde(rename = "K")]
    pub steps: usize,
    pub samples: u64,
    pub seed: u64,
    /// Worker threads; 0 picks the machine default. Never affects results.
    pub threads: usize,
    /// Output directory.
    pub output: PathBuf,
    pub variant: Vec<VariantName>,
    pub allow_large: bool,
    /// Samples whose paths are dumped to CSV (moments only).
    pub dump_paths: u64,
    /// Samples whose Gram matrices are dumped to CSV (moments only).
    pub dump_gram: u64,

    /// Derived constant `c1`; when given together with `c2` the kernel
    /// metadata is bypassed.
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    /// Regularity constant of the kernel; defaults to its metadata.
    pub kernel_c1: Option<f64>,
    /// Far-field constant of the kernel; defaults to its metadata.
    pub kernel_c2: Option<f64>,
    pub c_h: f64,
    pub eps: f64,
    /// Kolmogorov constant; measured when unset.
    pub c_eps: Option<f64>,
    /// Evaluate the lower bound at this `M` instead of the region's choice.
    pub m_override: Option<f64>,

    #[serde(rename = "M")]
    pub m: f64,
    pub x_j: f64,
    /// Pinning values; empty means `{2M, 2.5M, 3M}`.
    pub r: Vec<f64>,
    pub r_nodes: usize,
    /// Samples per node for the `G^j` pinning check; defaults to `samples`.
    pub gj_samples: Option<u64>,
    /// Rerun the floors at `2K` and compare verdicts.
    pub grid_check: bool,
    /// Samples for the `C_ε` measurement.
    pub c_eps_samples: u64,

    pub draws: u64,
    pub inner_samples: u64,
    /// Half width of the spatial grid, in units of `√t`.
    pub z_half_width: f64,
    pub z_nodes: usize,

    /// Moments CSV to fit.
    pub input: Option<PathBuf>,
    pub mode: FitAxis,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            subcommand: Command::Moments,
            kernel: KernelSpec::Fbm { alpha: 0.25, dim: 1 },
            h: 0.3,
            alpha: None,
            beta: None,
            d: None,
            u0: U0Spec::Constant { value: 1.0 },
            n: vec![2],
            t: vec![1.0],
            x: vec![0.0],
            steps: 64,
            samples: 10_000,
            seed: 1,
            threads: 0,
            output: PathBuf::from("results"),
            variant: vec![VariantName::Skorohod],
            allow_large: false,
            dump_paths: 0,
            dump_gram: 0,
            c1: None,
            c2: None,
            kernel_c1: None,
            kernel_c2: None,
            c_h: 1.0,
            eps: 0.25,
            c_eps: None,
            m_override: None,
            m: 4.0,
            x_j: 0.5,
            r: Vec::new(),
            r_nodes: anderson_core::events::DEFAULT_R_NODES,
            gj_samples: None,
            grid_check: false,
            c_eps_samples: 100_000,
            draws: 1000,
            inner_samples: 2000,
            z_half_width: 4.5,
            z_nodes: 321,
            input: None,
            mode: FitAxis::N,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }

    /// Identifier of the results: the digest with the fields that cannot
    /// change any number (threads, output directory) normalized away.
    pub fn run_id(&self) -> String {
        let mut c = self.clone();
        c.threads = 0;
        c.output = PathBuf::new();
        c.digest()[..16].to_string()
    }

    pub fn kernel(&self) -> anyhow::Result<CovarianceKernel> {
        let k = self.kernel.build()?;
        if self.alpha.is_none() && self.beta.is_none() {
            return Ok(k);
        }
        let (a, b, c1, c2) = (self.alpha.unwrap_or(k.alpha), self.beta.unwrap_or(k.beta), k.c1, k.c2);
        Ok(k.with_metadata(a, b, c1, c2))
    }

    pub fn dim(&self) -> usize {
        self.d.unwrap_or(self.x.len().max(1))
    }

    /// The starting point, broadcast to `d` coordinates when only one is
    /// given.
    pub fn point(&self) -> anyhow::Result<Vec<f64>> {
        let d = self.dim();
        match self.x.len() {
            0 => Ok(vec![0.0; d]),
            1 => Ok(vec![self.x[0]; d]),
            l if l == d => Ok(self.x.clone()),
            l => bail!("x has {l} coordinates but d = {d}"),
        }
    }

    pub fn r_values(&self) -> Vec<f64> {
        if self.r.is_empty() {
            vec![2.0 * self.m, 2.5 * self.m, 3.0 * self.m]
        } else {
            self.r.clone()
        }
    }
}

/// Rows of `width` numbers from a CSV file; a non-numeric first row is
/// taken as a header.
fn read_rows(path: &Path, width: usize) -> anyhow::Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) if v.len() == width => out.push(v),
            Err(_) if i == 0 => continue,
            _ => bail!("{}: row {} is not {width} numbers", path.display(), i + 1),
        }
    }
    Ok(out)
}

fn read_triples(path: &Path) -> anyhow::Result<Vec<(f64, f64, f64)>> {
    Ok(read_rows(path, 3)?.into_iter().map(|r| (r[0], r[1], r[2])).collect())
}
