//! Deterministic Monte Carlo trials.
//!
//! Trial `t` of an experiment with base seed `s` draws its active set, noise
//! and auxiliary randomness from streams derived from `(s, t)`; the codebook
//! stream uses `(s, t)` as well unless the codebook is held fixed, in which
//! case `(s, 0)` is shared. Records are collected in trial order and folded
//! sequentially, so reports are identical for any worker-thread count.

mod output;
mod stats;

use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{delta_norm_sq_samples, LimitReport};
use crate::channel::{
    collision_bound, draw_active_set, superpose, ActiveSetMode, ChannelParams, Codebook,
    CollisionBound, NoiseMode, Observation,
};
use crate::decoder::{
    cap_score, decode_filtered, direction_estimate, prefilter, tau_value, DecodeStrategy,
    DecoderSettings, TauSchedule,
};
use crate::error::{invalid, DecodeError, Error, Result};
use crate::geometry::{fill_uniform_sphere, is_hemispherical_unit, DEFAULT_TOL};
use crate::rng::{derive_seed, derived_stream, StreamTag};
use crate::special::{dot, norm_sq};

pub use output::{write_trial_csv, CSV_HEADER};
pub use stats::{clopper_pearson_upper, estimate_rate_slope, mean_stderr, MeanStderr};

/// Codebooks with at most this many coordinates are held in memory when a
/// trial touches every codeword.
const DENSE_LIMIT: usize = 1 << 23;

/// Largest active set passed to the hemisphericity test inside a trial.
pub const WENDEL_MC_MAX_POINTS: usize = 256;

/// Confidence level of the reported upper bound on the decoding error rate.
const ML_BOUND_ALPHA: f64 = 0.05;

/// Quantities a trial can record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measurement {
    /// `<u, u_hat>`, plus `|Y|/n` and `<Y, u>/n` (conditioned mode).
    Alignment,
    /// Transmitted codewords inside the cap.
    Retention,
    /// Non-transmitted codewords inside the cap; scans the whole codebook.
    UnsentRetention,
    /// Cap cardinality and underflow; scans the whole codebook.
    CapCardinality,
    /// Full pre-filter plus ML decoding.
    Decode,
    /// Whether the active codewords lie in a common open hemisphere.
    WendelMc,
    /// One draw of `|Delta_1|^2 / n`.
    DeltaConcentration,
}

impl Measurement {
    fn scans_codebook(self) -> bool {
        matches!(
            self,
            Measurement::UnsentRetention | Measurement::CapCardinality | Measurement::Decode
        )
    }
}

impl std::str::FromStr for Measurement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "alignment" => Measurement::Alignment,
            "retention" => Measurement::Retention,
            "unsent_retention" => Measurement::UnsentRetention,
            "cap_cardinality" => Measurement::CapCardinality,
            "decode" => Measurement::Decode,
            "wendel_mc" => Measurement::WendelMc,
            "delta_concentration" => Measurement::DeltaConcentration,
            _ => return Err(invalid(format!("unknown measurement '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub params: ChannelParams,
    pub schedule: TauSchedule,
    pub strategy: DecodeStrategy,
    pub decoder: DecoderSettings,
    pub trials: usize,
    pub base_seed: u64,
    pub measurements: BTreeSet<Measurement>,
    /// Share one codebook across trials (full-sphere mode only; conditioned
    /// codebooks depend on the active set).
    pub fixed_codebook: bool,
    /// Fill `runtime_ms`. Off by default because wall-clock time is not
    /// reproducible.
    pub record_timing: bool,
}

impl ExperimentConfig {
    pub fn new(params: ChannelParams, trials: usize, base_seed: u64) -> Self {
        Self {
            params,
            schedule: TauSchedule::default(),
            strategy: DecodeStrategy::ExactIfFeasible,
            decoder: DecoderSettings::default(),
            trials,
            base_seed,
            measurements: BTreeSet::new(),
            fixed_codebook: false,
            record_timing: false,
        }
    }

    pub fn measure(mut self, measurements: &[Measurement]) -> Self {
        self.measurements.extend(measurements.iter().copied());
        self
    }

    pub fn with_schedule(mut self, schedule: TauSchedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_strategy(mut self, strategy: DecodeStrategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_decoder(mut self, decoder: DecoderSettings) -> Self {
        self.decoder = decoder;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("trials must be >= 1"));
        }
        if self.measurements.is_empty() {
            return Err(invalid("no measurements requested"));
        }
        if self.measurements.contains(&Measurement::WendelMc)
            && self.params.active_users > WENDEL_MC_MAX_POINTS
        {
            return Err(invalid(format!(
                "hemisphericity per trial needs K_a <= {WENDEL_MC_MAX_POINTS}, got {}",
                self.params.active_users
            )));
        }
        if self.fixed_codebook && self.params.axis().is_some() {
            return Err(invalid(
                "a fixed codebook is incompatible with hemisphere-conditioned sampling",
            ));
        }
        Ok(())
    }

    fn scans_codebook(&self) -> bool {
        self.measurements.iter().any(|m| m.scans_codebook())
    }
}

/// Per-trial outputs; fields of unrequested measurements are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub alignment: Option<f64>,
    pub output_norm: Option<f64>,
    pub parallel_component: Option<f64>,
    pub sent_retained: Option<usize>,
    pub unsent_retained: Option<usize>,
    pub retained_count: Option<usize>,
    pub cap_underflow: Option<bool>,
    pub misses: Option<usize>,
    pub heuristic: Option<bool>,
    /// `S_hat` from the ML stage.
    pub estimated_set: Option<Vec<usize>>,
    pub hemispherical: Option<bool>,
    pub delta_sq_per_n: Option<f64>,
    /// `Y = 0`, so no direction estimate exists.
    pub degenerate: bool,
    pub runtime_ms: Option<f64>,
}

impl TrialRecord {
    fn empty(trial_index: usize) -> Self {
        Self {
            trial_index,
            alignment: None,
            output_norm: None,
            parallel_component: None,
            sent_retained: None,
            unsent_retained: None,
            retained_count: None,
            cap_underflow: None,
            misses: None,
            heuristic: None,
            estimated_set: None,
            hemispherical: None,
            delta_sq_per_n: None,
            degenerate: false,
            runtime_ms: None,
        }
    }
}

fn trial_codebook(config: &ExperimentConfig, trial: usize, active: &[usize]) -> Result<Codebook> {
    let params = &config.params;
    let index = if config.fixed_codebook {
        0
    } else {
        trial as u64
    };
    let mut codebook = Codebook::generate(
        params,
        derive_seed(config.base_seed, index, StreamTag::Codebook),
    );
    if params.axis().is_some() {
        codebook = codebook.with_hemisphere_members(active)?;
    }
    if config.scans_codebook() && params.codebook_size.saturating_mul(params.n) <= DENSE_LIMIT {
        codebook.materialize()?;
    }
    Ok(codebook)
}

/// Runs trial `trial` of `config`. A shared codebook may be supplied when
/// `config.fixed_codebook` is set.
pub fn run_trial(config: &ExperimentConfig, trial: usize) -> Result<TrialRecord> {
    run_trial_inner(config, trial, None)
}

fn run_trial_inner(
    config: &ExperimentConfig,
    trial: usize,
    shared: Option<&Codebook>,
) -> Result<TrialRecord> {
    let start = config.record_timing.then(Instant::now);
    let params = &config.params;
    let (n, k) = (params.n, params.active_users);
    let t = trial as u64;
    let base = config.base_seed;
    let wants = |m: Measurement| config.measurements.contains(&m);
    let mut record = TrialRecord::empty(trial);

    let mut rng = derived_stream(base, t, StreamTag::ActiveSet);
    let active = draw_active_set(params, &mut rng, ActiveSetMode::DistinctSubset).indices;
    let owned;
    let codebook = match shared {
        Some(cb) => cb,
        None => {
            owned = trial_codebook(config, trial, &active)?;
            &owned
        }
    };
    let rows = codebook.rows_for(&active)?;
    let noise_seed = derive_seed(base, t, StreamTag::Noise);
    let y = superpose(&rows, n, noise_seed, NoiseMode::Standard);

    if wants(Measurement::WendelMc) {
        let radius = codebook.radius();
        let unit: Vec<Vec<f64>> = rows
            .chunks_exact(n)
            .map(|r| r.iter().map(|x| x / radius).collect())
            .collect();
        let refs: Vec<&[f64]> = unit.iter().map(Vec::as_slice).collect();
        record.hemispherical = Some(is_hemispherical_unit(&refs, DEFAULT_TOL)?.is_hemispherical);
    }
    if wants(Measurement::DeltaConcentration) {
        let seed = derive_seed(base, t, StreamTag::Auxiliary);
        let sample = delta_norm_sq_samples(n, params.power, 1, 1, seed)?;
        record.delta_sq_per_n = Some(sample[0] / n as f64);
    }
    if wants(Measurement::Alignment) {
        record.output_norm = Some(norm_sq(&y).sqrt() / n as f64);
        if let Some(axis) = params.axis() {
            record.parallel_component = Some(dot(&y, axis) / n as f64);
        }
    }

    let u_hat = match direction_estimate(&y) {
        Ok(u) => u,
        Err(Error::Decode(DecodeError::DegenerateObservation)) => {
            record.degenerate = true;
            record.runtime_ms = start.map(|s| s.elapsed().as_secs_f64() * 1e3);
            return Ok(record);
        }
        Err(e) => return Err(e),
    };
    if wants(Measurement::Alignment) {
        if let Some(axis) = params.axis() {
            record.alignment = Some(dot(axis, &u_hat));
        }
    }
    let tau = tau_value(&config.schedule, n);
    if wants(Measurement::Retention) {
        let radius = codebook.radius();
        record.sent_retained = Some(
            rows.chunks_exact(n)
                .filter(|r| cap_score(r, &u_hat, radius) >= tau)
                .count(),
        );
    }
    if config.scans_codebook() {
        let filter = prefilter(codebook, &u_hat, tau, Some(&active))?;
        let retained = filter.retained.len();
        if wants(Measurement::UnsentRetention) {
            record.unsent_retained = filter.retained_other_count;
        }
        if wants(Measurement::CapCardinality) || wants(Measurement::Decode) {
            record.retained_count = Some(retained);
            record.cap_underflow = Some(retained < k);
        }
        if wants(Measurement::Decode) && retained >= k {
            let observation = Observation {
                y,
                active_set: active,
                axis: params.axis().map(<[f64]>::to_vec),
                noise_seed,
            };
            let outcome = decode_filtered(
                &observation,
                codebook,
                &filter,
                config.strategy,
                &config.decoder,
            )?;
            record.misses = outcome.misses;
            record.heuristic = Some(outcome.heuristic);
            record.estimated_set = Some(outcome.estimated_set);
        }
    }
    record.runtime_ms = start.map(|s| s.elapsed().as_secs_f64() * 1e3);
    Ok(record)
}

/// Aggregate estimators over all trials of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub trials: usize,
    pub degenerate_trials: usize,
    /// Fraction of transmitted codewords retained by the cap.
    pub p_ret_hat: Option<f64>,
    /// Per-user error of the pre-filter alone, `1 - p_ret_hat`.
    pub pupe_p_hat: Option<f64>,
    /// Mean non-transmitted codewords retained per trial.
    pub unsent_retained_mean: Option<MeanStderr>,
    pub retained_count_mean: Option<MeanStderr>,
    pub cap_underflow_rate: Option<f64>,
    /// Trials that reached the ML stage.
    pub decoded_trials: usize,
    pub total_misses: usize,
    /// Per-user error after ML decoding; cap-underflow trials count every
    /// user as missed.
    pub pupe_ml_hat: Option<f64>,
    /// One-sided 95% Clopper-Pearson upper bound on the ML per-user error.
    pub pupe_ml_upper95: Option<f64>,
    pub heuristic_trials: usize,
    pub alignment: Option<MeanStderr>,
    pub output_norm: Option<MeanStderr>,
    pub parallel_component: Option<MeanStderr>,
    /// Retained fraction of non-transmitted codewords, pooled over trials.
    pub p_n_hat: Option<f64>,
    /// Fraction of trials whose active set is hemispherical.
    pub hemispherical_hat: Option<f64>,
    pub delta_sq_per_n: Option<MeanStderr>,
    pub collision: CollisionBound,
    pub limits: Option<LimitReport>,
    #[serde(skip)]
    pub records: Vec<TrialRecord>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Output(e.to_string()))
    }

    /// Per-trial CSV with the columns of [`CSV_HEADER`].
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        write_trial_csv(&self.records, out)
    }

    fn aggregate(config: &ExperimentConfig, records: Vec<TrialRecord>) -> Result<Self> {
        let k = config.params.active_users;
        let collect_f = |f: fn(&TrialRecord) -> Option<f64>| -> Vec<f64> {
            records.iter().filter_map(f).collect()
        };
        let rate = |hits: usize, total: usize| (total > 0).then(|| hits as f64 / total as f64);

        let sent: Vec<usize> = records.iter().filter_map(|r| r.sent_retained).collect();
        let p_ret_hat = rate(sent.iter().sum(), sent.len() * k);

        let underflows: Vec<bool> = records.iter().filter_map(|r| r.cap_underflow).collect();
        let cap_underflow_rate = rate(underflows.iter().filter(|&&u| u).count(), underflows.len());

        let decode_requested = config.measurements.contains(&Measurement::Decode);
        let mut decoded_trials = 0;
        let mut total_misses = 0;
        let mut ml_users = 0usize;
        let mut ml_errors = 0usize;
        let mut heuristic_trials = 0;
        if decode_requested {
            for r in &records {
                match (r.misses, r.cap_underflow) {
                    (Some(m), _) => {
                        decoded_trials += 1;
                        total_misses += m;
                        ml_errors += m;
                        ml_users += k;
                        heuristic_trials += usize::from(r.heuristic == Some(true));
                    }
                    (None, Some(true)) => {
                        ml_errors += k;
                        ml_users += k;
                    }
                    _ => {}
                }
            }
        }
        let pupe_ml_hat = rate(ml_errors, ml_users);
        let pupe_ml_upper95 = if ml_users > 0 {
            Some(clopper_pearson_upper(
                ml_errors as u64,
                ml_users as u64,
                ML_BOUND_ALPHA,
            )?)
        } else {
            None
        };

        let unsent: Vec<usize> = records.iter().filter_map(|r| r.unsent_retained).collect();
        let hemi: Vec<bool> = records.iter().filter_map(|r| r.hemispherical).collect();
        let limits = LimitReport::new(config.params.beta, config.params.power).ok();

        Ok(Self {
            config: config.clone(),
            trials: records.len(),
            degenerate_trials: records.iter().filter(|r| r.degenerate).count(),
            p_ret_hat,
            pupe_p_hat: p_ret_hat.map(|p| 1.0 - p),
            unsent_retained_mean: mean_stderr(
                &records
                    .iter()
                    .filter_map(|r| r.unsent_retained.map(|u| u as f64))
                    .collect::<Vec<_>>(),
            ),
            retained_count_mean: mean_stderr(
                &records
                    .iter()
                    .filter_map(|r| r.retained_count.map(|u| u as f64))
                    .collect::<Vec<_>>(),
            ),
            cap_underflow_rate,
            decoded_trials,
            total_misses,
            pupe_ml_hat,
            pupe_ml_upper95,
            heuristic_trials,
            alignment: mean_stderr(&collect_f(|r| r.alignment)),
            output_norm: mean_stderr(&collect_f(|r| r.output_norm)),
            parallel_component: mean_stderr(&collect_f(|r| r.parallel_component)),
            p_n_hat: rate(
                unsent.iter().sum(),
                unsent.len() * (config.params.codebook_size - k),
            ),
            hemispherical_hat: rate(hemi.iter().filter(|&&h| h).count(), hemi.len()),
            delta_sq_per_n: mean_stderr(&collect_f(|r| r.delta_sq_per_n)),
            collision: collision_bound(&config.params),
            limits,
            records,
        })
    }
}

/// Runs every trial (in parallel on the current rayon pool) and aggregates.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let shared = if config.fixed_codebook {
        Some(trial_codebook(config, 0, &[])?)
    } else {
        None
    };
    let records = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial_inner(config, t, shared.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    ExperimentReport::aggregate(config, records)
}

/// Monte Carlo estimate of the probability that `points` i.i.d. uniform
/// points on the unit sphere in `R^n` lie in a common open hemisphere.
/// Returns the estimate and its binomial standard error.
pub fn estimate_wendel_mc(n: usize, points: usize, trials: usize, seed: u64) -> Result<(f64, f64)> {
    if n < 2 || points == 0 || trials == 0 {
        return Err(invalid(format!(
            "need n >= 2, N >= 1, trials >= 1 (got n={n}, N={points}, trials={trials})"
        )));
    }
    let hits = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<usize> {
            let mut rng = derived_stream(seed, t as u64, StreamTag::Auxiliary);
            let mut pts = vec![vec![0.0; n]; points];
            for p in pts.iter_mut() {
                fill_uniform_sphere(p, 1.0, &mut rng)?;
            }
            let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
            Ok(usize::from(
                is_hemispherical_unit(&refs, DEFAULT_TOL)?.is_hemispherical,
            ))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    let p = hits as f64 / trials as f64;
    Ok((p, (p * (1.0 - p) / trials as f64).sqrt()))
}

/// Fraction of `trials` i.i.d. message draws in which two users collide.
pub fn collision_frequency(params: &ChannelParams, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(invalid("trials must be >= 1"));
    }
    let hits: usize = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = derived_stream(seed, t as u64, StreamTag::ActiveSet);
            usize::from(draw_active_set(params, &mut rng, ActiveSetMode::IidMessages).collision)
        })
        .sum();
    Ok(hits as f64 / trials as f64)
}
