//! Run settings: a TOML file whose keys mirror the command-line flags, with
//! flags taking precedence.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Every tunable. Each field is both a `--flag` and a TOML key of the same
/// name (`tau-schedule` on the command line is `tau_schedule` in TOML).
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Blocklength.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,

    /// Number of points (wendel).
    #[arg(long = "N", global = true)]
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub points: Option<u64>,

    /// Codebook exponent, M = round(n^d).
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,

    /// User density, K_a = round(beta n).
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,

    /// Explicit active-user count; overrides beta.
    #[arg(long = "K", global = true)]
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub active_users: Option<usize>,

    /// Per-symbol power.
    #[arg(long = "P", global = true)]
    #[serde(rename = "P", skip_serializing_if = "Option::is_none")]
    pub power: Option<f64>,

    /// Monte Carlo trials.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,

    /// Base seed; required by every stochastic subcommand.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,

    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,

    /// zero | power:GAMMA | log:SCALE
    #[arg(long = "tau-schedule", global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_schedule: Option<String>,

    /// exact | local
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,

    /// Largest C(|retained|, K_a) searched exactly.
    #[arg(long = "enumeration-cap", global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enumeration_cap: Option<u64>,

    /// Comma-separated blocklengths (exponent, sweep).
    #[arg(long, global = true, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ns: Option<Vec<usize>>,

    /// Difference order l (delta).
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,

    /// JSON summary path.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,

    /// CSV table path.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($field:ident),*) => {
        $( if $dst.$field.is_none() { $dst.$field = $src.$field; } )*
    };
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Param(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Param(format!("bad config {}: {e}", path.display())))
    }

    /// Flags in `self` win over `file`.
    pub fn overlay(mut self, file: Settings) -> Self {
        overlay!(self, file; n, points, d, beta, active_users, power, trials, seed, threads,
            tau_schedule, strategy, enumeration_cap, ns, l, output, csv);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file: Settings = toml::from_str("n = 10\nbeta = 0.2\nP = 2.0\nns = [1, 2]").unwrap();
        let flags = Settings {
            n: Some(20),
            ..Default::default()
        };
        let s = flags.overlay(file);
        assert_eq!(s.n, Some(20));
        assert_eq!(s.beta, Some(0.2));
        assert_eq!(s.power, Some(2.0));
        assert_eq!(s.ns, Some(vec![1, 2]));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<Settings>("bogus = 1").is_err());
    }
}
