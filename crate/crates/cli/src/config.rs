//! Run configuration: an optional JSON file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use kstw::{FluxLimiter, ModelParams};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LimiterName {
    Linear,
    Relativistic,
    Larson,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimiterConfig {
    pub kind: Option<LimiterName>,
    pub mu: Option<f64>,
    pub c: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamConfig {
    pub a: Option<f64>,
    pub sigma: Option<f64>,
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
    pub limiter: LimiterConfig,
}

/// Model parameter flags, shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct ParamFlags {
    #[arg(long, global = true)]
    pub a: Option<f64>,
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub limiter: Option<LimiterName>,
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    #[arg(long, global = true)]
    pub c: Option<f64>,
    /// Larson exponent.
    #[arg(long, global = true)]
    pub p: Option<f64>,
}

impl ParamConfig {
    pub fn overlay(mut self, f: &ParamFlags) -> Self {
        fn set(slot: &mut Option<f64>, flag: Option<f64>) {
            if flag.is_some() {
                *slot = flag;
            }
        }
        set(&mut self.a, f.a);
        set(&mut self.sigma, f.sigma);
        set(&mut self.gamma, f.gamma);
        set(&mut self.lambda, f.lambda);
        set(&mut self.limiter.mu, f.mu);
        set(&mut self.limiter.c, f.c);
        set(&mut self.limiter.p, f.p);
        if f.limiter.is_some() {
            self.limiter.kind = f.limiter;
        }
        self
    }

    pub fn limiter(&self) -> Result<FluxLimiter<f64>, CliError> {
        let l = &self.limiter;
        let mu = l.mu.unwrap_or(1.0);
        let c = l.c.unwrap_or(1.0);
        let lim = match l.kind.unwrap_or(LimiterName::Linear) {
            LimiterName::Linear => FluxLimiter::linear(mu),
            LimiterName::Relativistic => FluxLimiter::relativistic(mu, c),
            LimiterName::Larson => {
                let p = l.p.ok_or_else(|| CliError::Config("the larson limiter needs --p".into()))?;
                FluxLimiter::larson(mu, c, p)
            }
        };
        Ok(lim?)
    }

    /// Full parameter set; `a` and `sigma` must be present.
    pub fn params(&self) -> Result<ModelParams<f64>, CliError> {
        let a = self.a.ok_or_else(|| CliError::Config("missing --a".into()))?;
        let sigma = self.sigma.ok_or_else(|| CliError::Config("missing --sigma".into()))?;
        self.params_with(a, sigma)
    }

    pub fn params_with(&self, a: f64, sigma: f64) -> Result<ModelParams<f64>, CliError> {
        Ok(ModelParams::new(a, sigma, self.gamma.unwrap_or(1.0), self.lambda.unwrap_or(1.0), self.limiter()?)?)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PortraitConfig {
    pub v_grid: Option<Vec<f64>>,
    pub w_grid: Option<Vec<f64>>,
    pub span: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShootConfig {
    pub v0: Option<f64>,
    pub bracket: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BranchName {
    Above,
    Below,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileConfig {
    pub w0: Option<f64>,
    pub v0: Option<f64>,
    pub s0: Option<f64>,
    #[serde(rename = "S0")]
    pub big_s0: Option<f64>,
    pub branch: Option<BranchName>,
    pub critical: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub a_values: Option<Vec<f64>>,
    pub sigma_factors: Option<Vec<f64>>,
    /// `v0` as a multiple of `v*`.
    pub v0_factor: Option<f64>,
    pub samples: Option<usize>,
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub params: ParamConfig,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub portrait: PortraitConfig,
    pub shoot: ShootConfig,
    pub profile: ProfileConfig,
    pub sweep: SweepConfig,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// A list of values parsed from one flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

pub fn grid_flag(text: &str) -> Result<Grid, String> {
    parse_grid(text).map(Grid)
}

/// A grid given either as `lo:hi:n` or as a comma-separated list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let lo: f64 = parts[0].trim().parse().map_err(|e| format!("bad grid start: {e}"))?;
        let hi: f64 = parts[1].trim().parse().map_err(|e| format!("bad grid end: {e}"))?;
        let n: usize = parts[2].trim().parse().map_err(|e| format!("bad grid count: {e}"))?;
        return Ok(match n {
            0 => Vec::new(),
            1 => vec![lo],
            _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
        });
    }
    text.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| format!("bad grid value {x:?}: {e}"))).collect()
}

/// A pair `lo,hi`.
pub fn parse_pair(text: &str) -> Result<(f64, f64), String> {
    match parse_grid(text)?.as_slice() {
        &[lo, hi] => Ok((lo, hi)),
        other => Err(format!("expected two values, got {}", other.len())),
    }
}
