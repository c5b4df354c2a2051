//! Campaign configuration: command-line flags override the `--config` file, which
//! overrides the per-subcommand defaults.

use std::path::{Path, PathBuf};

use clap::Args;
use entrocheck::continuity::{ContinuitySpec, Correction, CorrectionForm};
use serde::{Deserialize, Serialize};

pub const SEED_ENV: &str = "ENTROCHECK_SEED";

/// Options shared by all subcommands; each subcommand reads the ones it needs.
#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Options {
    /// Dimensions: `2..8` (inclusive), `2,3,5` or `4`.
    #[arg(long, global = true)]
    pub d: Option<String>,
    /// Subsystem dimensions of a sampled state, e.g. `2,2`.
    #[arg(long, global = true)]
    pub dims: Option<String>,
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Base seed; falls back to the config file, then $ENTROCHECK_SEED, then the clock.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON file with any of these options (kebab-case keys).
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    /// Outcome / ensemble budget `m`.
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    /// Functional id: entropy, sa, mi, cond.
    #[arg(long, global = true)]
    pub functional: Option<String>,
    /// Bound constant `K`.
    #[arg(long, global = true)]
    pub k: Option<f64>,
    /// Correction form: zero, linear, binary-entropy, binary-entropy-envelope, eta, eta-envelope, sqrt.
    #[arg(long, global = true)]
    pub correction: Option<String>,
    /// Correction coefficient.
    #[arg(long, global = true)]
    pub coeff: Option<f64>,
    /// Perturbation-sampler radius.
    #[arg(long, global = true)]
    pub radius: Option<f64>,
    /// Input file (state, ensemble or joint distribution, depending on the subcommand).
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Convex-set file for relative-entropy distances.
    #[arg(long, global = true)]
    pub set: Option<PathBuf>,
    /// Number of random generators of the convex set (besides I/d).
    #[arg(long, global = true)]
    pub generators: Option<usize>,
    /// Ensemble size for donation campaigns.
    #[arg(long, global = true)]
    pub members: Option<usize>,
    /// Measurement class for `arrow`: general or rank-one.
    #[arg(long, global = true)]
    pub kind: Option<String>,
    /// Transfer direction for `prop1`: robustness-to-continuity or continuity-to-robustness.
    #[arg(long, global = true)]
    pub direction: Option<String>,
    /// `arrow`: take the supremum instead of the infimum.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub sup: Option<bool>,
    /// `roof`: mixed instead of pure convex roof.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub mixed: Option<bool>,
}

macro_rules! merge_fields {
    ($a:ident, $b:ident; $($f:ident),*) => { $( if $a.$f.is_none() { $a.$f = $b.$f; } )* };
}

impl Options {
    /// Fills unset flags from the config file named by `--config`, if any.
    pub fn with_file(mut self) -> Result<Self, String> {
        let Some(path) = self.config.clone() else { return Ok(self) };
        let file: Options = read_json(&path)?;
        merge_fields!(self, file; d, dims, trials, seed, out_dir, restarts, budget, functional, k, correction, coeff,
            radius, input, set, generators, members, kind, direction, sup, mixed);
        Ok(self)
    }

    pub fn seed(&self) -> Result<u64, String> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v.trim().parse().map_err(|_| format!("{SEED_ENV}={v:?} is not an unsigned integer")),
            Err(_) => {
                let now = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).unwrap_or_default();
                Ok(now.as_nanos() as u64)
            }
        }
    }

    pub fn dim_list(&self, default: &str) -> Result<Vec<usize>, String> {
        parse_dim_list(self.d.as_deref().unwrap_or(default))
    }

    pub fn subsystem_dims(&self, default: &str) -> Result<Vec<usize>, String> {
        let s = self.dims.as_deref().unwrap_or(default);
        let dims = s
            .split(',')
            .map(|x| x.trim().parse::<usize>().map_err(|_| format!("bad subsystem dims {s:?}")))
            .collect::<Result<Vec<_>, _>>()?;
        if dims.iter().any(|&x| x == 0) {
            return Err(format!("bad subsystem dims {s:?}"));
        }
        Ok(dims)
    }

    pub fn trials(&self, default: u64) -> Result<u64, String> {
        let t = self.trials.unwrap_or(default);
        if t == 0 {
            return Err("--trials must be at least 1".into());
        }
        Ok(t)
    }

    pub fn spec(&self, k: f64, form: CorrectionForm, coeff: f64) -> Result<ContinuitySpec, String> {
        let form = match &self.correction {
            Some(name) => parse_form(name)?,
            None => form,
        };
        ContinuitySpec::new(self.k.unwrap_or(k), Correction::new(form, self.coeff.unwrap_or(coeff))).map_err(|e| e.to_string())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("entrocheck-out"))
    }
}

pub fn parse_form(name: &str) -> Result<CorrectionForm, String> {
    serde_json::from_value(serde_json::Value::String(name.to_string())).map_err(|_| format!("unknown correction form {name:?}"))
}

/// `a..b` and `a..=b` are both inclusive.
pub fn parse_dim_list(s: &str) -> Result<Vec<usize>, String> {
    let bad = || format!("bad dimension list {s:?}");
    let dims: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim_start_matches('=').trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if dims.is_empty() || dims.iter().any(|&d| d < 1) {
        return Err(bad());
    }
    Ok(dims)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// The configuration actually used, echoed into every summary.
#[derive(Clone, Debug, Serialize)]
pub struct Effective {
    pub subcommand: &'static str,
    pub seed: u64,
    #[serde(flatten)]
    pub fields: serde_json::Map<String, serde_json::Value>,
}

impl Effective {
    pub fn new(subcommand: &'static str, seed: u64) -> Self {
        Effective { subcommand, seed, fields: Default::default() }
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.fields.insert(key.into(), serde_json::to_value(value).expect("serialisable"));
        self
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("serialisable")
    }
}
