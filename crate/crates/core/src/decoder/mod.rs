//! Two-stage geometric decoder.
//!
//! 1. Direction estimate `u_hat = y / |y|`.
//! 2. Cap pre-filter: keep codeword `j` iff `<x_j, u_hat> / sqrt(nP) >= tau_n`.
//! 3. Maximum-likelihood subset selection over the retained codewords,
//!    `argmin |y - sum_{i in S'} x_i|^2` over `K_a`-subsets.

mod ml;

pub use ml::{ml_decode_exact, ml_decode_local, DEFAULT_ENUMERATION_CAP};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::channel::{Codebook, Observation};
use crate::error::{invalid, DecodeError, Error, Result};
use crate::special::{choose_f64, dot, norm_sq};

/// Threshold schedule `tau_n = -a_n / sqrt(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TauSchedule {
    /// `tau = 0`: the plain hemisphere about `u_hat`.
    Zero,
    /// `a_n = n^gamma`, `0 < gamma < 1/2`.
    PowerLaw { gamma: f64 },
    /// `a_n = scale * ln n`, `scale > 0`.
    LogGrowth { scale: f64 },
}

impl Default for TauSchedule {
    fn default() -> Self {
        TauSchedule::PowerLaw { gamma: 0.25 }
    }
}

impl TauSchedule {
    pub fn power_law(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 0.5) {
            return Err(invalid(format!(
                "power-law exponent {gamma} not in (0, 1/2)"
            )));
        }
        Ok(TauSchedule::PowerLaw { gamma })
    }

    pub fn log_growth(scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(invalid(format!("log-growth scale {scale} must be > 0")));
        }
        Ok(TauSchedule::LogGrowth { scale })
    }

    /// `a_n`, the enlargement in units of `1/sqrt(n)`.
    pub fn enlargement(&self, n: usize) -> f64 {
        let nf = n as f64;
        match *self {
            TauSchedule::Zero => 0.0,
            TauSchedule::PowerLaw { gamma } => nf.powf(gamma),
            TauSchedule::LogGrowth { scale } => scale * nf.ln(),
        }
    }
}

impl fmt::Display for TauSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TauSchedule::Zero => write!(f, "zero"),
            TauSchedule::PowerLaw { gamma } => write!(f, "power:{gamma}"),
            TauSchedule::LogGrowth { scale } => write!(f, "log:{scale}"),
        }
    }
}

impl FromStr for TauSchedule {
    type Err = Error;

    /// `zero`, `power:<gamma>` or `log:<scale>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "zero" {
            return Ok(TauSchedule::Zero);
        }
        let (kind, value) = s
            .split_once(':')
            .ok_or_else(|| invalid(format!("unknown tau schedule '{s}'")))?;
        let value: f64 = value
            .parse()
            .map_err(|_| invalid(format!("bad number in tau schedule '{s}'")))?;
        match kind {
            "power" => TauSchedule::power_law(value),
            "log" => TauSchedule::log_growth(value),
            _ => Err(invalid(format!("unknown tau schedule '{s}'"))),
        }
    }
}

/// `tau_n = -a_n / sqrt(n)`, clamped to `[-1, 0]`.
pub fn tau_value(schedule: &TauSchedule, n: usize) -> f64 {
    let tau = -schedule.enlargement(n) / (n as f64).sqrt();
    tau.max(-1.0)
}

/// `y / |y|`.
pub fn direction_estimate(y: &[f64]) -> Result<Vec<f64>> {
    let norm = norm_sq(y).sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(DecodeError::DegenerateObservation.into());
    }
    Ok(y.iter().map(|v| v / norm).collect())
}

/// Normalized projection `<x, u_hat> / radius`; the filter statistic.
pub fn cap_score(codeword: &[f64], u_hat: &[f64], radius: f64) -> f64 {
    dot(codeword, u_hat) / radius
}

/// Result of the cap pre-filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapFilter {
    pub u_hat: Vec<f64>,
    pub tau: f64,
    /// Retained indices, ascending.
    pub retained: Vec<usize>,
    /// `<s_j, u_hat>` for each retained index.
    pub scores: Vec<f64>,
    /// Retained transmitted codewords, when ground truth was supplied.
    pub retained_true_count: Option<usize>,
    /// Retained non-transmitted codewords, when ground truth was supplied.
    pub retained_other_count: Option<usize>,
}

impl CapFilter {
    pub fn summary(&self) -> FilterSummary {
        FilterSummary {
            tau: self.tau,
            retained_count: self.retained.len(),
            retained_true_count: self.retained_true_count,
            retained_other_count: self.retained_other_count,
        }
    }
}

/// Counts-only view of a [`CapFilter`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub tau: f64,
    pub retained_count: usize,
    pub retained_true_count: Option<usize>,
    pub retained_other_count: Option<usize>,
}

const SCORE_CHUNK: usize = 2048;

/// Scores `<s_j, u_hat>` for every codeword, in index order.
pub fn cap_scores(codebook: &Codebook, u_hat: &[f64]) -> Result<Vec<f64>> {
    if u_hat.len() != codebook.dim() {
        return Err(invalid("direction has the wrong dimension"));
    }
    let (n, radius) = (codebook.dim(), codebook.radius());
    let mut scores = vec![0.0; codebook.size()];
    scores
        .par_chunks_mut(SCORE_CHUNK)
        .enumerate()
        .try_for_each(|(chunk, out)| -> Result<()> {
            let start = chunk * SCORE_CHUNK;
            let mut buf = vec![0.0; n];
            for (offset, score) in out.iter_mut().enumerate() {
                let m = start + offset;
                let row = match codebook.row(m) {
                    Some(row) => row,
                    None => {
                        codebook.write_codeword(m, &mut buf)?;
                        &buf
                    }
                };
                *score = cap_score(row, u_hat, radius);
            }
            Ok(())
        })?;
    Ok(scores)
}

/// Keeps `{ j : <s_j, u_hat> >= tau }`.
pub fn prefilter(
    codebook: &Codebook,
    u_hat: &[f64],
    tau: f64,
    ground_truth: Option<&[usize]>,
) -> Result<CapFilter> {
    if !(-1.0..=0.0).contains(&tau) {
        return Err(Error::Domain {
            what: "tau",
            value: tau,
            domain: "[-1, 0]",
        });
    }
    let all = cap_scores(codebook, u_hat)?;
    let mut retained = Vec::new();
    let mut scores = Vec::new();
    for (j, &s) in all.iter().enumerate() {
        if s >= tau {
            retained.push(j);
            scores.push(s);
        }
    }
    let (true_count, other_count) = match ground_truth {
        Some(truth) => {
            let t = truth
                .iter()
                .filter(|&&m| m < all.len() && all[m] >= tau)
                .count();
            (Some(t), Some(retained.len() - t))
        }
        None => (None, None),
    };
    Ok(CapFilter {
        u_hat: u_hat.to_vec(),
        tau,
        retained,
        scores,
        retained_true_count: true_count,
        retained_other_count: other_count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecodeMethod {
    ExactEnumeration,
    LocalSearch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeStrategy {
    /// Exact search when `C(|retained|, K_a)` is within the enumeration cap,
    /// local search otherwise.
    ExactIfFeasible,
    LocalOnly,
}

impl FromStr for DecodeStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" | "exact_if_feasible" => Ok(DecodeStrategy::ExactIfFeasible),
            "local" | "local_only" => Ok(DecodeStrategy::LocalOnly),
            _ => Err(invalid(format!("unknown decode strategy '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoderSettings {
    pub enumeration_cap: u64,
    /// Swap-round limit for local search; `None` means `50 K_a`.
    pub max_rounds: Option<usize>,
}

impl Default for DecoderSettings {
    fn default() -> Self {
        Self {
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            max_rounds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeOutcome {
    /// `S_hat`, ascending, exactly `K_a` indices.
    pub estimated_set: Vec<usize>,
    /// `|S \ S_hat|`, when ground truth is known.
    pub misses: Option<usize>,
    pub residual_norm_sq: f64,
    pub method: DecodeMethod,
    /// Set when exact search was requested but refused by the cap.
    pub heuristic: bool,
    pub filter: Option<FilterSummary>,
    /// Residual after each greedy step (local search only).
    pub greedy_trace: Vec<f64>,
    /// Residual after each accepted swap (local search only).
    pub swap_trace: Vec<f64>,
    /// Complete subsets whose residual was evaluated (exact search only).
    pub subsets_evaluated: u64,
}

/// `|truth \ estimate|` for ascending index lists.
pub fn count_misses(truth: &[usize], estimate: &[usize]) -> usize {
    truth
        .iter()
        .filter(|m| estimate.binary_search(m).is_err())
        .count()
}

pub fn decode(
    observation: &Observation,
    codebook: &Codebook,
    schedule: &TauSchedule,
    strategy: DecodeStrategy,
) -> Result<DecodeOutcome> {
    decode_with(
        observation,
        codebook,
        schedule,
        strategy,
        &DecoderSettings::default(),
    )
}

pub fn decode_with(
    observation: &Observation,
    codebook: &Codebook,
    schedule: &TauSchedule,
    strategy: DecodeStrategy,
    settings: &DecoderSettings,
) -> Result<DecodeOutcome> {
    let u_hat = direction_estimate(&observation.y)?;
    let tau = tau_value(schedule, codebook.dim());
    let filter = prefilter(codebook, &u_hat, tau, Some(&observation.active_set))?;
    decode_filtered(observation, codebook, &filter, strategy, settings)
}

/// ML stage on an existing filter; records misses against the observation.
pub fn decode_filtered(
    observation: &Observation,
    codebook: &Codebook,
    filter: &CapFilter,
    strategy: DecodeStrategy,
    settings: &DecoderSettings,
) -> Result<DecodeOutcome> {
    let k = codebook.params().active_users;
    let y = &observation.y;
    let mut outcome = match strategy {
        DecodeStrategy::LocalOnly => {
            ml_decode_local(y, codebook, &filter.retained, k, settings.max_rounds)?
        }
        DecodeStrategy::ExactIfFeasible => {
            let r = filter.retained.len();
            if r >= k && choose_f64(r as u64, k as u64) > settings.enumeration_cap as f64 {
                let mut out =
                    ml_decode_local(y, codebook, &filter.retained, k, settings.max_rounds)?;
                out.heuristic = true;
                out
            } else {
                ml_decode_exact(y, codebook, &filter.retained, k, settings.enumeration_cap)?
            }
        }
    };
    outcome.misses = Some(count_misses(
        &observation.active_set,
        &outcome.estimated_set,
    ));
    outcome.filter = Some(filter.summary());
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_codebook, transmit, ChannelParams};

    #[test]
    fn direction_of_simple_vector() {
        let u = direction_estimate(&[3.0, 4.0, 0.0, 0.0]).unwrap();
        assert_eq!(u, vec![0.6, 0.8, 0.0, 0.0]);
        assert_eq!(
            direction_estimate(&[0.0, 0.0]),
            Err(Error::Decode(DecodeError::DegenerateObservation))
        );
    }

    #[test]
    fn tau_values() {
        let t = tau_value(&TauSchedule::PowerLaw { gamma: 0.25 }, 10_000);
        assert!((t + 0.1).abs() < 1e-15);
        assert_eq!(tau_value(&TauSchedule::Zero, 77), 0.0);
        let t = tau_value(&TauSchedule::LogGrowth { scale: 2.0 }, 100);
        assert!((t + 2.0 * 100f64.ln() / 10.0).abs() < 1e-15);
        // clamped
        assert_eq!(tau_value(&TauSchedule::LogGrowth { scale: 100.0 }, 4), -1.0);
    }

    #[test]
    fn tau_trends_for_power_law() {
        let s = TauSchedule::default();
        let mut prev_tau = -1.0;
        let mut prev_gamma = 0.0;
        for n in [16usize, 100, 1_000, 10_000, 100_000, 1_000_000] {
            let tau = tau_value(&s, n);
            let gamma_n = (n as f64).sqrt() * tau;
            assert!(tau < 0.0 && tau > prev_tau);
            assert!(gamma_n < prev_gamma);
            prev_tau = tau;
            prev_gamma = gamma_n;
        }
    }

    #[test]
    fn schedule_parsing() {
        assert_eq!("zero".parse::<TauSchedule>().unwrap(), TauSchedule::Zero);
        assert_eq!(
            "power:0.25".parse::<TauSchedule>().unwrap(),
            TauSchedule::PowerLaw { gamma: 0.25 }
        );
        assert_eq!(
            "log:1.5".parse::<TauSchedule>().unwrap(),
            TauSchedule::LogGrowth { scale: 1.5 }
        );
        assert!("power:0.7".parse::<TauSchedule>().is_err());
        assert!("cubic:1".parse::<TauSchedule>().is_err());
        let s = TauSchedule::PowerLaw { gamma: 0.3 };
        assert_eq!(s.to_string().parse::<TauSchedule>().unwrap(), s);
    }

    #[test]
    fn filter_partition_is_exact_and_monotone() {
        let params = ChannelParams::new(10, 2.5, 0.2, 1.0).unwrap();
        let cb = build_codebook(&params, 8, None).unwrap();
        let obs = transmit(&cb, &[3, 50], 1).unwrap();
        let u = direction_estimate(&obs.y).unwrap();
        let all = cap_scores(&cb, &u).unwrap();
        let mut prev: Option<Vec<usize>> = None;
        for tau in [0.0, -0.1, -0.3, -0.6, -1.0] {
            let f = prefilter(&cb, &u, tau, Some(&obs.active_set)).unwrap();
            for j in 0..cb.size() {
                assert_eq!(f.retained.binary_search(&j).is_ok(), all[j] >= tau);
            }
            assert_eq!(
                f.retained_true_count.unwrap() + f.retained_other_count.unwrap(),
                f.retained.len()
            );
            if let Some(p) = prev {
                assert!(p.iter().all(|j| f.retained.binary_search(j).is_ok()));
            }
            prev = Some(f.retained);
        }
        let full = prefilter(&cb, &u, -1.0, None).unwrap();
        assert_eq!(full.retained.len(), cb.size());
        assert!(prefilter(&cb, &u, 0.2, None).is_err());
    }

    #[test]
    fn decode_is_deterministic() {
        let params = ChannelParams::new(16, 2.2, 0.125, 1.0).unwrap();
        let cb = build_codebook(&params, 21, None).unwrap();
        let obs = transmit(&cb, &[4, 300], 2).unwrap();
        let s = TauSchedule::default();
        let a = decode(&obs, &cb, &s, DecodeStrategy::ExactIfFeasible).unwrap();
        let b = decode(&obs, &cb, &s, DecodeStrategy::ExactIfFeasible).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.estimated_set.len(), 2);
    }

    #[test]
    fn misses_count() {
        assert_eq!(count_misses(&[1, 2, 3], &[1, 3, 9]), 1);
        assert_eq!(count_misses(&[1, 2], &[1, 2]), 0);
    }
}
