use std::fmt::Write as _;

use serde_json::{json, Value};

use hemicap::asymptotics::{
    error_term_log, error_term_log_ratios, sent_retention_limit_at_zero,
    unsent_retention_probability,
};
use hemicap::decoder::tau_value;
use hemicap::harness::{estimate_wendel_mc, mean_stderr, run_experiment};
use hemicap::special::log_sum_exp;
use hemicap::wendel::{
    classify_regime, wendel_fraction, wendel_log_complement, wendel_probability,
    wendel_probability_log_domain, EXACT_MAX_POINTS,
};
use hemicap::{
    ChannelParams, DecodeStrategy, DecoderSettings, ExperimentConfig, ExperimentReport,
    LimitReport, Measurement, TauSchedule,
};

use crate::config::Settings;
use crate::{CliError, Command};

const DEFAULT_D: f64 = 2.2;
const DEFAULT_POWER: f64 = 1.0;

/// What a subcommand produced: text for stdout, a JSON result, and an
/// optional CSV table.
pub struct Output {
    pub text: String,
    pub result: Value,
    pub csv: Option<Vec<u8>>,
}

fn req<T: Clone>(v: &Option<T>, flag: &str) -> Result<T, CliError> {
    v.clone()
        .ok_or_else(|| CliError::Param(format!("missing --{flag}")))
}

fn seed(s: &Settings) -> Result<u64, CliError> {
    req(&s.seed, "seed")
}

fn power(s: &Settings) -> f64 {
    s.power.unwrap_or(DEFAULT_POWER)
}

fn params(s: &Settings, n: usize, conditioned: bool) -> Result<ChannelParams, CliError> {
    let d = s.d.unwrap_or(DEFAULT_D);
    let p = match s.active_users {
        Some(k) => {
            if !(d > 2.0) {
                return Err(CliError::Param(format!("d = {d} must be > 2")));
            }
            let m = (n as f64).powf(d).round() as usize;
            let mut p = ChannelParams::from_sizes(n, m, k, power(s))?;
            p.d = d;
            p
        }
        None => ChannelParams::new(n, d, req(&s.beta, "beta")?, power(s))?,
    };
    Ok(if conditioned {
        p.conditioned_on_e1()?
    } else {
        p
    })
}

fn schedule(s: &Settings, default: TauSchedule) -> Result<TauSchedule, CliError> {
    match &s.tau_schedule {
        Some(text) => Ok(text.parse()?),
        None => Ok(default),
    }
}

fn experiment(
    s: &Settings,
    params: ChannelParams,
    schedule: TauSchedule,
    measurements: &[Measurement],
) -> Result<ExperimentConfig, CliError> {
    let mut decoder = DecoderSettings::default();
    if let Some(cap) = s.enumeration_cap {
        decoder.enumeration_cap = cap;
    }
    let strategy = match &s.strategy {
        Some(text) => text.parse()?,
        None => DecodeStrategy::ExactIfFeasible,
    };
    Ok(
        ExperimentConfig::new(params, req(&s.trials, "trials")?, seed(s)?)
            .with_schedule(schedule)
            .with_strategy(strategy)
            .with_decoder(decoder)
            .measure(measurements),
    )
}

fn pair(text: &mut String, key: &str, measured: f64, predicted: f64) {
    let _ = writeln!(
        text,
        "{key:<22} measured {measured:.6}  predicted {predicted:.6}"
    );
}

fn pair_se(text: &mut String, key: &str, measured: f64, stderr: f64, predicted: f64) {
    let _ = writeln!(
        text,
        "{key:<22} measured {measured:.6} +- {stderr:.6}  predicted {predicted:.6}"
    );
}

fn csv_table(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

fn report_output(text: String, report: &ExperimentReport) -> Result<Output, CliError> {
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    Ok(Output {
        text,
        result: serde_json::to_value(report).map_err(|e| CliError::Runtime(e.to_string()))?,
        csv: Some(csv),
    })
}

pub fn dispatch(command: Command, s: &Settings) -> Result<Output, CliError> {
    match command {
        Command::Wendel => wendel(s),
        Command::Regime => regime(s),
        Command::Limits => limits(s),
        Command::Align => align(s),
        Command::Retention => retention(s),
        Command::Capcount => capcount(s),
        Command::Decode => decode(s),
        Command::Exponent => exponent(s),
        Command::Delta => delta(s),
        Command::Sweep => sweep(s),
    }
}

fn wendel(s: &Settings) -> Result<Output, CliError> {
    let n = req(&s.n, "n")? as u64;
    let points = req(&s.points, "N")?;
    let p = wendel_probability(n, points)?;
    let log_domain = wendel_probability_log_domain(n, points)?;
    let fraction = if points <= EXACT_MAX_POINTS {
        let (num, den) = wendel_fraction(n, points)?;
        Some(format!("{num}/{den}"))
    } else {
        None
    };
    let mut text = String::new();
    match &fraction {
        Some(f) => writeln!(text, "probability {p} ({f})"),
        None => writeln!(text, "probability {p:.12}"),
    }
    .ok();
    writeln!(text, "log_domain {log_domain:.15}").ok();
    let log_complement = if p < 1.0 {
        let lc = wendel_log_complement(n, points)?;
        writeln!(text, "log_complement {lc:.12}").ok();
        Some(lc)
    } else {
        None
    };
    let mc = match s.seed {
        Some(seed) => {
            let trials = req(&s.trials, "trials")?;
            let (est, se) = estimate_wendel_mc(n as usize, points as usize, trials, seed)?;
            pair_se(&mut text, "monte_carlo", est, se, p);
            Some(json!({ "estimate": est, "stderr": se, "trials": trials }))
        }
        None => None,
    };
    Ok(Output {
        text,
        result: json!({
            "probability": p,
            "fraction": fraction,
            "log_domain": log_domain,
            "log_complement": log_complement,
            "monte_carlo": mc,
        }),
        csv: None,
    })
}

fn regime(s: &Settings) -> Result<Output, CliError> {
    let class = classify_regime(req(&s.beta, "beta")?)?;
    let text = match class.rate {
        Some(rate) => format!("regime {:?} rate {rate:.6}\n", class.kind),
        None => format!("regime {:?}\n", class.kind),
    };
    Ok(Output {
        text,
        result: json!(class),
        csv: None,
    })
}

fn limit_lines(r: &LimitReport) -> String {
    let mut text = String::new();
    for (k, v) in [
        ("c", r.c),
        ("retention_at_zero", r.retention_at_zero),
        ("pupe_prefilter_at_zero", r.pupe_prefilter_at_zero),
        ("sent_retention_at_zero", r.sent_retention_at_zero),
        ("parallel_limit", r.parallel_limit),
        ("perp_sq_limit", r.perp_sq_limit),
        ("output_norm_limit", r.output_norm_limit),
        ("ml_exponent", r.ml_exponent),
    ] {
        writeln!(text, "{k:<22} {v:.6}").ok();
    }
    text
}

fn limits(s: &Settings) -> Result<Output, CliError> {
    let r = LimitReport::new(req(&s.beta, "beta")?, power(s))?;
    Ok(Output {
        text: limit_lines(&r),
        result: json!(r),
        csv: None,
    })
}

fn align(s: &Settings) -> Result<Output, CliError> {
    let params = params(s, req(&s.n, "n")?, true)?;
    let config = experiment(s, params, TauSchedule::Zero, &[Measurement::Alignment])?;
    let report = run_experiment(&config)?;
    let limits = LimitReport::new(config.params.beta, config.params.power)?;
    let mut text = format!(
        "M {}, K_a {}\n",
        config.params.codebook_size, config.params.active_users
    );
    if let Some(a) = report.alignment {
        pair_se(&mut text, "alignment", a.mean, a.stderr, limits.c);
    }
    if let Some(a) = report.output_norm {
        pair_se(
            &mut text,
            "output_norm",
            a.mean,
            a.stderr,
            limits.output_norm_limit,
        );
    }
    if let Some(a) = report.parallel_component {
        pair_se(
            &mut text,
            "parallel_component",
            a.mean,
            a.stderr,
            limits.parallel_limit,
        );
    }
    report_output(text, &report)
}

fn retention(s: &Settings) -> Result<Output, CliError> {
    let n = req(&s.n, "n")?;
    let params = params(s, n, true)?;
    let schedule = schedule(s, TauSchedule::default())?;
    let config = experiment(s, params, schedule, &[Measurement::Retention])?;
    let report = run_experiment(&config)?;
    let tau = tau_value(&config.schedule, n) + 0.0;
    let (beta, p) = (config.params.beta, config.params.power);
    let limits = LimitReport::new(beta, p)?;
    let ret = report.p_ret_hat.unwrap_or(f64::NAN);
    let mut text = format!("tau {tau:.6} ({})\n", config.schedule);
    if tau == 0.0 {
        let sent = sent_retention_limit_at_zero(beta, p)?;
        pair(&mut text, "sent_retention", ret, sent);
        pair(&mut text, "pupe_prefilter", 1.0 - ret, 1.0 - sent);
        writeln!(
            text,
            "{:<22} {:.6}",
            "independent_point", limits.retention_at_zero
        )
        .ok();
    } else {
        // tau_n -> 0- with sqrt(n) tau_n -> -inf: retention tends to one
        pair(&mut text, "sent_retention", ret, 1.0);
        pair(&mut text, "pupe_prefilter", 1.0 - ret, 0.0);
    }
    report_output(text, &report)
}

fn capcount(s: &Settings) -> Result<Output, CliError> {
    let n = req(&s.n, "n")?;
    let params = params(s, n, false)?;
    let schedule = schedule(s, TauSchedule::default())?;
    let config = experiment(
        s,
        params,
        schedule,
        &[
            Measurement::Retention,
            Measurement::UnsentRetention,
            Measurement::CapCardinality,
        ],
    )?;
    let report = run_experiment(&config)?;
    let tau = tau_value(&config.schedule, n) + 0.0;
    let p_unsent = unsent_retention_probability(n, tau)?;
    let unsent_total = (config.params.codebook_size - config.params.active_users) as f64;
    let mut text = format!(
        "tau {tau:.6} ({}), M {}, K_a {}\n",
        config.schedule, config.params.codebook_size, config.params.active_users
    );
    if let Some(p) = report.p_n_hat {
        pair(&mut text, "unsent_retention", p, p_unsent);
    }
    if let Some(m) = report.unsent_retained_mean {
        pair_se(
            &mut text,
            "unsent_retained",
            m.mean,
            m.stderr,
            unsent_total * p_unsent,
        );
    }
    if let Some(m) = report.retained_count_mean {
        writeln!(
            text,
            "{:<22} measured {:.3} +- {:.3}",
            "cap_size", m.mean, m.stderr
        )
        .ok();
    }
    if let Some(r) = report.cap_underflow_rate {
        pair(&mut text, "cap_underflow_rate", r, 0.0);
    }
    report_output(text, &report)
}

fn decode(s: &Settings) -> Result<Output, CliError> {
    let n = req(&s.n, "n")?;
    let params = params(s, n, false)?;
    let schedule = schedule(s, TauSchedule::default())?;
    let config = experiment(
        s,
        params,
        schedule,
        &[
            Measurement::Retention,
            Measurement::CapCardinality,
            Measurement::Decode,
        ],
    )?;
    let report = run_experiment(&config)?;
    let (k, p) = (config.params.active_users, config.params.power);
    let beta_eff = k as f64 / n as f64;
    let union = (1..=k)
        .map(|l| error_term_log(n, config.params.d, beta_eff, p, l))
        .collect::<Result<Vec<_>, _>>()
        .map(|logs| log_sum_exp(&logs).exp().min(1.0))
        .ok();
    let mut text = format!(
        "M {}, K_a {}, tau {:.6} ({}), strategy {:?}\n",
        config.params.codebook_size,
        k,
        tau_value(&config.schedule, n) + 0.0,
        config.schedule,
        config.strategy
    );
    if let Some(pupe) = report.pupe_ml_hat {
        match union {
            Some(u) => pair(&mut text, "pupe_ml", pupe, u),
            None => writeln!(text, "{:<22} measured {pupe:.6}", "pupe_ml").map_or((), |_| ()),
        }
    }
    if let Some(u) = report.pupe_ml_upper95 {
        writeln!(text, "{:<22} {u:.6}", "pupe_ml_upper95").ok();
    }
    if let Some(pp) = report.pupe_p_hat {
        pair(&mut text, "pupe_prefilter", pp, 0.0);
    }
    if let Some(r) = report.cap_underflow_rate {
        pair(&mut text, "cap_underflow_rate", r, 0.0);
    }
    writeln!(
        text,
        "{:<22} {} of {} decoded trials",
        "heuristic_trials", report.heuristic_trials, report.decoded_trials
    )
    .ok();
    writeln!(text, "{:<22} {:.6}", "ml_exponent", p / 4.0).ok();
    report_output(text, &report)
}

fn exponent(s: &Settings) -> Result<Output, CliError> {
    let ns = s.ns.clone().unwrap_or_else(|| vec![100, 1_000, 10_000]);
    let d = s.d.unwrap_or(2.5);
    let beta = s.beta.unwrap_or(0.1);
    let p = power(s);
    let target = p / 4.0;
    let mut text = format!("d {d}, beta {beta}, P {p}\n");
    let mut rows = Vec::new();
    let mut result = Vec::new();
    for &n in &ns {
        let rate = -error_term_log(n, d, beta, p, 1)? / n as f64;
        let max_ratio = error_term_log_ratios(n, d, beta, p)?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        writeln!(
            text,
            "n {n:<8} measured {rate:.6}  predicted {target:.6}  gap {:.6}  max_log_ratio {max_ratio:.3}",
            target - rate
        )
        .ok();
        rows.push(vec![
            n.to_string(),
            rate.to_string(),
            target.to_string(),
            (target - rate).to_string(),
            max_ratio.to_string(),
        ]);
        result.push(json!({
            "n": n,
            "neg_log_e1_per_n": rate,
            "exponent": target,
            "gap": target - rate,
            "max_log_successor_ratio": max_ratio,
        }));
    }
    Ok(Output {
        text,
        result: Value::Array(result),
        csv: Some(csv_table(
            &[
                "n",
                "neg_log_e1_per_n",
                "exponent",
                "gap",
                "max_log_successor_ratio",
            ],
            &rows,
        )),
    })
}

fn delta(s: &Settings) -> Result<Output, CliError> {
    let n = req(&s.n, "n")?;
    let l = s.l.unwrap_or(1);
    let p = power(s);
    let samples =
        hemicap::asymptotics::delta_norm_sq_samples(n, p, l, req(&s.trials, "trials")?, seed(s)?)?;
    let scaled: Vec<f64> = samples.iter().map(|x| x / n as f64).collect();
    let stats = mean_stderr(&scaled).expect("trials >= 1");
    let predicted = 2.0 * l as f64 * p;
    let mut text = String::new();
    pair_se(
        &mut text,
        "delta_sq_per_n",
        stats.mean,
        stats.stderr,
        predicted,
    );
    let rows: Vec<Vec<String>> = scaled
        .iter()
        .enumerate()
        .map(|(i, v)| vec![i.to_string(), v.to_string()])
        .collect();
    Ok(Output {
        text,
        result: json!({ "l": l, "mean": stats.mean, "stderr": stats.stderr, "predicted": predicted, "samples": scaled }),
        csv: Some(csv_table(&["trial_index", "delta_sq_per_n"], &rows)),
    })
}

fn sweep(s: &Settings) -> Result<Output, CliError> {
    let ns = req(&s.ns, "ns")?;
    let mut text = String::new();
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &n in &ns {
        let params = params(s, n, true)?;
        let schedule = schedule(s, TauSchedule::default())?;
        let config = experiment(
            s,
            params,
            schedule,
            &[Measurement::Alignment, Measurement::Retention],
        )?;
        let report = run_experiment(&config)?;
        let limits = LimitReport::new(config.params.beta, config.params.power)?;
        let a = report.alignment.expect("alignment measured");
        let norm = report.output_norm.expect("alignment measured");
        let ret = report.p_ret_hat.unwrap_or(f64::NAN);
        let tau = tau_value(&config.schedule, n) + 0.0;
        writeln!(
            text,
            "n {n:<7} alignment {:.6} +- {:.6} (c {:.6})  output_norm {:.6} ({:.6})  sent_retention {ret:.6} at tau {tau:.6}",
            a.mean, a.stderr, limits.c, norm.mean, limits.output_norm_limit
        )
        .ok();
        rows.push(vec![
            n.to_string(),
            config.params.active_users.to_string(),
            a.mean.to_string(),
            a.stderr.to_string(),
            limits.c.to_string(),
            norm.mean.to_string(),
            limits.output_norm_limit.to_string(),
            ret.to_string(),
            tau.to_string(),
        ]);
        reports.push(report);
    }
    Ok(Output {
        text,
        result: serde_json::to_value(&reports).map_err(|e| CliError::Runtime(e.to_string()))?,
        csv: Some(csv_table(
            &[
                "n",
                "active_users",
                "alignment",
                "alignment_stderr",
                "alignment_limit",
                "output_norm",
                "output_norm_limit",
                "sent_retention",
                "tau",
            ],
            &rows,
        )),
    })
}
