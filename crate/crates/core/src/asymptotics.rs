//! Closed-form limits and bounds for the two-stage decoder, plus the small
//! simulations that check the pairwise-error ingredients directly.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::channel::derive_sizes;
use crate::error::{invalid, Error, Result};
use crate::geometry::{fill_uniform_sphere, projection_log_pdf};
use crate::rng::{derived_stream, StreamTag};
use crate::special::{dot, erfc, ln_choose, norm_sq, q_function};

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(invalid(format!("beta = {beta} must be >= 0")));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(invalid(format!("{name} = {v} must be > 0")));
    }
    Ok(())
}

/// In-probability limit of `<u, u_hat>`: `c = sqrt(2 beta / (2 beta + pi))`.
pub fn alignment_limit(beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok((2.0 * beta / (2.0 * beta + PI)).sqrt())
}

/// Limits at `tau = 0`: retention `1/2 + arcsin(c)/pi` and the pre-filter
/// per-user error `1 - retention`.
pub fn retention_limit_at_zero(beta: f64) -> Result<(f64, f64)> {
    let retention = 0.5 + alignment_limit(beta)?.asin() / PI;
    Ok((retention, 1.0 - retention))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentLimits {
    /// `S_par / n -> beta sqrt(2P/pi)`; also the limit of `<Y, u>/n`.
    pub parallel: f64,
    /// `|S_perp|^2 / n^2 -> P beta`.
    pub perp_sq: f64,
    /// `|Y| / n -> sqrt(2 P beta^2 / pi + P beta)`.
    pub output_norm: f64,
}

pub fn component_limits(beta: f64, power: f64) -> Result<ComponentLimits> {
    check_positive("beta", beta)?;
    check_positive("P", power)?;
    let parallel = beta * (2.0 * power / PI).sqrt();
    let perp_sq = power * beta;
    Ok(ComponentLimits {
        parallel,
        perp_sq,
        output_norm: (parallel * parallel + perp_sq).sqrt(),
    })
}

/// Limit of the `tau = 0` retention of a *transmitted* codeword, accounting
/// for its own contribution to `Y`.
///
/// With `T = sqrt(n) <s_i, u_hat>`, the self term `|x_i|^2 / (sqrt(P) |Y|)`
/// tends to the constant `sqrt(P) / L`, `L` the limit of `|Y|/n`, so
///
/// ```text
/// T -> c |N_1| + sqrt(1 - c^2) N_2 + sqrt(P) / L
/// ```
///
/// and the retention is `E[Phi((c |N_1| + sqrt(P)/L) / sqrt(1 - c^2))]`.
/// Without the shift this is `1/2 + arcsin(c)/pi`, the retention of a
/// hemisphere point independent of `u_hat`.
pub fn sent_retention_limit_at_zero(beta: f64, power: f64) -> Result<f64> {
    let c = alignment_limit(beta)?;
    let shift = power.sqrt() / component_limits(beta, power)?.output_norm;
    let s = (1.0 - c * c).sqrt();
    let phi = |x: f64| 0.5 * erfc(-x / std::f64::consts::SQRT_2);
    let f = |a: f64| (2.0 / PI).sqrt() * (-0.5 * a * a).exp() * phi((c * a + shift) / s);
    // Simpson's rule; the half-normal weight is below 1e-300 past 38.
    let (upper, steps) = (38.0, 7600);
    let h = upper / steps as f64;
    let mut acc = f(0.0) + f(upper);
    for i in 1..steps {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    Ok(acc * h / 3.0)
}

/// Exact probability that a non-transmitted codeword lies in the cap
/// `{<s, u_hat> >= tau}` in dimension `n`. Such a codeword is independent of
/// `u_hat`, so this is the mass of the projection density above `tau`; it is
/// `1/2` at `tau = 0`.
pub fn unsent_retention_probability(n: usize, tau: f64) -> Result<f64> {
    if !(-1.0..=0.0).contains(&tau) {
        return Err(Error::Domain {
            what: "tau",
            value: tau,
            domain: "[-1, 0]",
        });
    }
    projection_log_pdf(0.0, n)?;
    if tau == -1.0 {
        return Ok(1.0);
    }
    // t = sin(theta) on [asin(tau), 0]; the upper half contributes 1/2
    let lo = tau.asin();
    let steps = 4000;
    let h = -lo / steps as f64;
    let f = |theta: f64| projection_log_pdf(theta.sin(), n).map_or(0.0, f64::exp) * theta.cos();
    if h == 0.0 {
        return Ok(0.5);
    }
    let mut acc = f(lo) + f(0.0);
    for i in 1..steps {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(lo + i as f64 * h);
    }
    Ok((0.5 + acc * h / 3.0).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseError {
    /// `Q(|Delta| / 2)`.
    pub q_value: f64,
    /// `exp(-|Delta|^2 / 8)`.
    pub chernoff_bound: f64,
}

/// Probability of preferring a wrong set at distance `|Delta|`, and its
/// Chernoff bound.
pub fn pairwise_error(delta_norm_sq: f64) -> Result<PairwiseError> {
    if !(delta_norm_sq >= 0.0) {
        return Err(invalid(format!("|Delta|^2 = {delta_norm_sq} must be >= 0")));
    }
    Ok(PairwiseError {
        q_value: q_function(delta_norm_sq.sqrt() / 2.0),
        chernoff_bound: (-delta_norm_sq / 8.0).exp(),
    })
}

const PAIRWISE_BLOCK: u64 = 1 << 16;

/// Monte Carlo frequency of the pairwise error event
/// `<Z, Delta> <= -|Delta|^2 / 2` with `Z ~ N(0, I)`.
pub fn pairwise_error_frequency(delta: &[f64], draws: u64, seed: u64) -> Result<f64> {
    if delta.is_empty() || draws == 0 {
        return Err(invalid("need a non-empty Delta and at least one draw"));
    }
    let threshold = -norm_sq(delta) / 2.0;
    let blocks = draws.div_ceil(PAIRWISE_BLOCK);
    let hits: u64 = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = derived_stream(seed, b, StreamTag::Noise);
            let len = PAIRWISE_BLOCK.min(draws - b * PAIRWISE_BLOCK);
            let mut z = vec![0.0; delta.len()];
            let mut count = 0u64;
            for _ in 0..len {
                for zi in z.iter_mut() {
                    *zi = rng.sample(StandardNormal);
                }
                if dot(&z, delta) <= threshold {
                    count += 1;
                }
            }
            count
        })
        .sum();
    Ok(hits as f64 / draws as f64)
}

/// Samples of `|Delta_l|^2` where `Delta_l` is the sum of `l` independent
/// uniform codewords minus the sum of `l` others, radius `sqrt(nP)`.
pub fn delta_norm_sq_samples(
    n: usize,
    power: f64,
    l: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n < 2 || l == 0 || trials == 0 {
        return Err(invalid(format!(
            "need n >= 2, l >= 1, trials >= 1 (got n={n}, l={l}, trials={trials})"
        )));
    }
    check_positive("P", power)?;
    let radius = (n as f64 * power).sqrt();
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = derived_stream(seed, t as u64, StreamTag::Auxiliary);
            let mut delta = vec![0.0; n];
            let mut x = vec![0.0; n];
            for j in 0..2 * l {
                fill_uniform_sphere(&mut x, radius, &mut rng)?;
                let sign = if j < l { 1.0 } else { -1.0 };
                for (d, xi) in delta.iter_mut().zip(&x) {
                    *d += sign * xi;
                }
            }
            Ok(norm_sq(&delta))
        })
        .collect()
}

/// Sample mean of `|Delta_l|^2 / n`; concentrates at `2 l P`.
pub fn delta_concentration_check(
    n: usize,
    power: f64,
    l: usize,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let samples = delta_norm_sq_samples(n, power, l, trials, seed)?;
    Ok(samples.iter().sum::<f64>() / (samples.len() as f64 * n as f64))
}

/// `ln E_l` with
///
/// ```text
/// E_l = C(K_a - 1, l - 1) * C(round((M_n - K_a)/2), l) * exp(-l n P / 4)
/// ```
///
/// The `o(n)` correction in the exponent is taken as zero.
pub fn error_term_log(n: usize, d: f64, beta: f64, power: f64, l: usize) -> Result<f64> {
    let (m, k) = derive_sizes(n, d, beta)?;
    check_positive("P", power)?;
    if l == 0 || l > k {
        return Err(invalid(format!("l = {l} must lie in [1, K_a = {k}]")));
    }
    let half_unsent = ((m - k) as f64 / 2.0).round() as u64;
    Ok(
        ln_choose(k as u64 - 1, l as u64 - 1) + ln_choose(half_unsent, l as u64)
            - l as f64 * n as f64 * power / 4.0,
    )
}

/// `ln E_{l+1} - ln E_l` for `l = 1 .. K_a - 1`.
pub fn error_term_log_ratios(n: usize, d: f64, beta: f64, power: f64) -> Result<Vec<f64>> {
    let (_, k) = derive_sizes(n, d, beta)?;
    let logs = (1..=k)
        .map(|l| error_term_log(n, d, beta, power, l))
        .collect::<Result<Vec<_>>>()?;
    Ok(logs.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Error exponent of the ML stage, `P / 4` nats per symbol.
pub fn ml_error_exponent(power: f64) -> Result<f64> {
    check_positive("P", power)?;
    Ok(power / 4.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SumRate {
    /// `beta d ln n` nats per channel use.
    pub r_sum: f64,
    /// `ln(1 + n beta P) / 2`.
    pub c_sum: f64,
    pub feasible: bool,
}

/// Sum rate against the sum capacity. `n` is real so that `n = e` can be used
/// as a check of the logarithm base.
pub fn sum_rate_feasibility(n: f64, d: f64, beta: f64, power: f64) -> Result<SumRate> {
    check_positive("n", n)?;
    check_positive("d", d)?;
    check_positive("beta", beta)?;
    check_positive("P", power)?;
    let r_sum = beta * d * n.ln();
    let c_sum = 0.5 * (n * beta * power).ln_1p();
    Ok(SumRate {
        r_sum,
        c_sum,
        feasible: r_sum <= c_sum,
    })
}

/// Analytic companion of an experiment at `(beta, P)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub c: f64,
    /// `1/2 + arcsin(c)/pi`: retention of a hemisphere point independent of
    /// `u_hat`.
    pub retention_at_zero: f64,
    pub pupe_prefilter_at_zero: f64,
    /// Retention of a transmitted codeword, see
    /// [`sent_retention_limit_at_zero`].
    pub sent_retention_at_zero: f64,
    pub parallel_limit: f64,
    pub perp_sq_limit: f64,
    pub output_norm_limit: f64,
    pub ml_exponent: f64,
}

impl LimitReport {
    pub fn new(beta: f64, power: f64) -> Result<Self> {
        let c = alignment_limit(beta)?;
        let (retention, pupe) = retention_limit_at_zero(beta)?;
        let comps = component_limits(beta, power)?;
        Ok(Self {
            c,
            retention_at_zero: retention,
            pupe_prefilter_at_zero: pupe,
            sent_retention_at_zero: sent_retention_limit_at_zero(beta, power)?,
            parallel_limit: comps.parallel,
            perp_sq_limit: comps.perp_sq,
            output_norm_limit: comps.output_norm,
            ml_exponent: ml_error_exponent(power)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unsent_retention_values() {
        assert_eq!(unsent_retention_probability(50, 0.0).unwrap(), 0.5);
        assert!((unsent_retention_probability(50, -1.0).unwrap() - 1.0).abs() < 1e-9);
        // n = 3: t uniform on [-1, 1]
        assert!((unsent_retention_probability(3, -0.4).unwrap() - 0.7).abs() < 1e-10);
        // large n: approximately Phi(-tau sqrt(n))
        let p = unsent_retention_probability(10_000, -0.01).unwrap();
        assert!((p - 0.841_344_746).abs() < 1e-4);
        assert!(unsent_retention_probability(10, 0.1).is_err());
    }

    #[test]
    fn sent_retention_limit_values() {
        let v = sent_retention_limit_at_zero(0.2, 1.0).unwrap();
        assert!((v - 0.993_277_790).abs() < 1e-7);
        // self term dominates as beta -> 0 (|Y|/n -> 0)
        assert!(sent_retention_limit_at_zero(1e-4, 1.0).unwrap() > 1.0 - 1e-12);
        assert!(v > retention_limit_at_zero(0.2).unwrap().0);
    }

    #[test]
    fn alignment_values() {
        assert_eq!(alignment_limit(0.0).unwrap(), 0.0);
        assert!((alignment_limit(0.2).unwrap() - 0.336_070_731_756_2).abs() < 1e-12);
        assert!((alignment_limit(PI / 2.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(alignment_limit(-0.1).is_err());
    }

    #[test]
    fn retention_values() {
        assert_eq!(retention_limit_at_zero(0.0).unwrap(), (0.5, 0.5));
        let (r, p) = retention_limit_at_zero(0.2).unwrap();
        assert!((r - 0.609_098_120_787_7).abs() < 1e-12);
        assert!((p - 0.390_901_879_212_3).abs() < 1e-12);
    }

    #[test]
    fn monotone_and_complementary_on_grid() {
        let mut prev = (-1.0, -1.0);
        for i in 0..=1000 {
            let beta = i as f64 / 100.0;
            let c = alignment_limit(beta).unwrap();
            let (r, p) = retention_limit_at_zero(beta).unwrap();
            assert_eq!(r + p, 1.0);
            if i > 0 {
                assert!(c > prev.0 && r > prev.1);
                assert!(c - prev.0 < 0.1 && r - prev.1 < 0.05);
            }
            prev = (c, r);
        }
    }

    #[test]
    fn component_values_and_homogeneity() {
        let l = component_limits(0.2, 1.0).unwrap();
        assert!((l.parallel - 0.159_576_912_160_6).abs() < 1e-12);
        assert!((l.perp_sq - 0.2).abs() < 1e-15);
        assert!((l.output_norm - 0.474_831_328_889_2).abs() < 1e-12);
        let l4 = component_limits(0.2, 4.0).unwrap();
        assert!((l4.parallel - 2.0 * l.parallel).abs() < 1e-15);
        assert!((l4.perp_sq - 4.0 * l.perp_sq).abs() < 1e-15);
        assert!((l4.output_norm - 2.0 * l.output_norm).abs() < 1e-15);
        let tiny = component_limits(1e-9, 1.0).unwrap();
        assert!((tiny.output_norm / (1e-9f64).sqrt() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn pairwise_values() {
        let e = pairwise_error(0.0).unwrap();
        assert_eq!((e.q_value, e.chernoff_bound), (0.5, 1.0));
        let e = pairwise_error(200.0).unwrap();
        assert!((e.chernoff_bound - (-25.0f64).exp()).abs() < 1e-25);
        assert!(e.q_value < e.chernoff_bound);
        assert!(pairwise_error(-1.0).is_err());
    }

    #[test]
    fn error_term_reference_value() {
        let v = error_term_log(100, 2.5, 0.1, 1.0, 1).unwrap();
        assert!((v - (49_995f64.ln() - 25.0)).abs() < 1e-12);
        assert!(error_term_log(100, 2.5, 0.1, 1.0, 0).is_err());
        assert!(error_term_log(100, 2.5, 0.1, 1.0, 11).is_err());
    }

    #[test]
    fn exponent_and_sum_rate() {
        assert_eq!(ml_error_exponent(1.0).unwrap(), 0.25);
        assert_eq!(ml_error_exponent(2.0).unwrap(), 0.5);
        let s = sum_rate_feasibility(std::f64::consts::E, 2.5, 0.3, 1.0).unwrap();
        assert!((s.r_sum - 0.75).abs() < 1e-15);
        assert!(sum_rate_feasibility(1e6, 2.5, 0.1, 1.0).unwrap().feasible);
        assert!(!sum_rate_feasibility(1e6, 2.5, 0.3, 1.0).unwrap().feasible);
        let ratio = sum_rate_feasibility(1e4, 2.5, 1.0, 1.0).unwrap().c_sum
            / sum_rate_feasibility(1e2, 2.5, 1.0, 1.0).unwrap().c_sum;
        assert!((ratio - 2.0).abs() < 0.2);
    }
}
