//! Probability that `N` uniform points on the sphere in `R^n` lie in a common
//! hemisphere, and its large-deviation behaviour when `N = beta * n`.
//!
//! ```text
//! p(n, N) = 2^-(N-1) * sum_{i=0}^{n-1} C(N-1, i) = P[B <= n-1],  B ~ Bin(N-1, 1/2)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::special::{log_sum_exp, LN2};

/// Largest `N` evaluated with exact integer arithmetic.
pub const EXACT_MAX_POINTS: u64 = 64;

/// Exact hemisphere probability as the unreduced fraction
/// `sum_{i<n} C(N-1, i) / 2^(N-1)`. Only available for `N <= 64`.
pub fn wendel_fraction(n: u64, points: u64) -> Result<(u128, u128)> {
    validate(n, points)?;
    if points > EXACT_MAX_POINTS {
        return Err(invalid(format!(
            "exact fraction only for N <= {EXACT_MAX_POINTS}, got {points}"
        )));
    }
    let m = points - 1;
    let mut numerator: u128 = 0;
    let mut binom: u128 = 1;
    for i in 0..n.min(points) {
        numerator += binom;
        // C(m, i+1) = C(m, i) (m - i) / (i + 1)
        binom = binom * (m - i) as u128 / (i as u128 + 1);
    }
    Ok((numerator, 1u128 << m))
}

fn validate(n: u64, points: u64) -> Result<()> {
    if n < 1 || points < 1 {
        return Err(invalid(format!(
            "need n >= 1 and N >= 1, got n={n}, N={points}"
        )));
    }
    Ok(())
}

/// `ln C(m, i)` for `i = 0..=m`, via the ratio recurrence (error grows
/// linearly in `i`, far below the cancellation of log-Gamma differences).
fn log_binomial_row(m: u64) -> Vec<f64> {
    let mut row = Vec::with_capacity(m as usize + 1);
    let mut acc = 0.0;
    row.push(acc);
    for i in 0..m {
        acc += ((m - i) as f64).ln() - ((i + 1) as f64).ln();
        row.push(acc);
    }
    row
}

/// `ln p(n, N)` and `ln(1 - p(n, N))` on the log-domain path.
fn log_parts(n: u64, points: u64) -> (f64, f64) {
    let m = points - 1;
    if n > m {
        return (0.0, f64::NEG_INFINITY);
    }
    let row = log_binomial_row(m);
    let shift = m as f64 * LN2;
    let lower = log_sum_exp(&row[..n as usize]) - shift;
    let upper = log_sum_exp(&row[n as usize..]) - shift;
    (lower, upper)
}

/// Log-domain evaluation, used above the exact threshold and exposed so the
/// two paths can be compared.
pub fn wendel_probability_log_domain(n: u64, points: u64) -> Result<f64> {
    validate(n, points)?;
    if points <= n {
        return Ok(1.0);
    }
    let (lower, upper) = log_parts(n, points);
    // Take whichever side is the small one in log form so the large side is
    // recovered without cancellation.
    Ok(if upper < lower {
        -upper.exp_m1()
    } else {
        lower.exp()
    })
}

/// Probability that `N` uniform points on the sphere in `R^n` are
/// hemispherical.
pub fn wendel_probability(n: u64, points: u64) -> Result<f64> {
    validate(n, points)?;
    if points <= n {
        return Ok(1.0);
    }
    if points <= EXACT_MAX_POINTS {
        let (num, den) = wendel_fraction(n, points)?;
        return Ok(num as f64 / den as f64);
    }
    wendel_probability_log_domain(n, points)
}

/// `ln(1 - p(n, N))`, the log of the non-hemispherical probability. Finite
/// even when `1 - p` underflows.
pub fn wendel_log_complement(n: u64, points: u64) -> Result<f64> {
    validate(n, points)?;
    if points <= n {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(log_parts(n, points).1)
}

/// Binary relative entropy to the fair coin,
/// `I(x) = x ln(2x) + (1-x) ln(2(1-x))`, with `0 ln 0 = 0`.
pub fn binary_divergence(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain {
            what: "x",
            value: x,
            domain: "[0, 1]",
        });
    }
    let term = |p: f64| if p == 0.0 { 0.0 } else { p * (2.0 * p).ln() };
    Ok(term(x) + term(1.0 - x))
}

/// Exponential rate (nats per symbol) at which the non-hemispherical
/// probability of `beta * n` points vanishes: `beta * I(1/beta)`, defined on
/// `1 < beta < 2`.
pub fn hemispherical_rate(beta: f64) -> Result<f64> {
    if !(beta > 1.0 && beta < 2.0) {
        return Err(Error::Domain {
            what: "beta",
            value: beta,
            domain: "(1, 2)",
        });
    }
    Ok(beta * binary_divergence(1.0 / beta)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeKind {
    /// `0 < beta <= 1`: the active set is hemispherical for every `n`.
    AlwaysOne,
    /// `1 < beta < 2`: probability tends to one exponentially fast.
    ExponentialToOne,
    /// `beta = 2`: probability tends to one half.
    Half,
    /// `beta > 2`: probability tends to zero.
    ToZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeClass {
    pub kind: RegimeKind,
    /// Rate in nats per symbol, present only for `ExponentialToOne`.
    pub rate: Option<f64>,
}

pub fn classify_regime(beta: f64) -> Result<RegimeClass> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(invalid(format!("beta = {beta} must be positive")));
    }
    let class = if beta <= 1.0 {
        RegimeClass {
            kind: RegimeKind::AlwaysOne,
            rate: None,
        }
    } else if beta < 2.0 {
        RegimeClass {
            kind: RegimeKind::ExponentialToOne,
            rate: Some(hemispherical_rate(beta)?),
        }
    } else if beta == 2.0 {
        RegimeClass {
            kind: RegimeKind::Half,
            rate: None,
        }
    } else {
        RegimeClass {
            kind: RegimeKind::ToZero,
            rate: None,
        }
    };
    Ok(class)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_values() {
        assert_eq!(wendel_probability(2, 3).unwrap(), 0.75);
        assert_eq!(wendel_fraction(4, 6).unwrap(), (26, 32));
        assert_eq!(wendel_probability(4, 6).unwrap(), 0.8125);
        assert_eq!(wendel_probability(5, 4).unwrap(), 1.0);
        assert_eq!(wendel_probability(1, 1).unwrap(), 1.0);
        // one dimension: only the single all-same-sign orthant pair
        assert_eq!(wendel_probability(1, 3).unwrap(), 0.25);
    }

    #[test]
    fn rejects_zero_arguments() {
        assert!(wendel_probability(0, 3).is_err());
        assert!(wendel_probability(3, 0).is_err());
        assert!(wendel_fraction(3, 65).is_err());
    }

    #[test]
    fn exact_and_log_paths_agree() {
        for points in 1..=60 {
            for n in 1..=60 {
                let exact = wendel_probability(n, points).unwrap();
                let log = wendel_probability_log_domain(n, points).unwrap();
                assert!(
                    ((exact - log) / exact).abs() <= 1e-12,
                    "n={n} N={points}: {exact} vs {log}"
                );
            }
        }
    }

    #[test]
    fn monotone_in_both_arguments() {
        for n in 1..=40 {
            for points in 1..=40 {
                let p = wendel_probability(n, points).unwrap();
                assert!(wendel_probability(n, points + 1).unwrap() <= p);
                assert!(wendel_probability(n + 1, points).unwrap() >= p);
            }
        }
    }

    #[test]
    fn log_complement_matches_direct() {
        let p = wendel_probability(4, 6).unwrap();
        let lc = wendel_log_complement(4, 6).unwrap();
        assert!((lc.exp() - (1.0 - p)).abs() < 1e-15);
        assert_eq!(wendel_log_complement(8, 6).unwrap(), f64::NEG_INFINITY);
        // deep tail stays finite
        assert!(wendel_log_complement(2000, 3000).unwrap().is_finite());
    }

    #[test]
    fn divergence_values() {
        assert_eq!(binary_divergence(0.5).unwrap(), 0.0);
        assert!((binary_divergence(1.0).unwrap() - LN2).abs() < 1e-15);
        assert!((binary_divergence(0.0).unwrap() - LN2).abs() < 1e-15);
        assert!((binary_divergence(2.0 / 3.0).unwrap() - 0.056_633_012_265_13).abs() < 1e-12);
        assert!((binary_divergence(0.3).unwrap() - binary_divergence(0.7).unwrap()).abs() < 1e-15);
        assert!(binary_divergence(1.1).is_err());
    }

    #[test]
    fn rate_values_and_domain() {
        assert!((hemispherical_rate(1.5).unwrap() - 0.084_949_518_397_7).abs() < 1e-12);
        assert!(hemispherical_rate(2.0 - 1e-9).unwrap() < 1e-8);
        assert!((hemispherical_rate(1.0 + 1e-9).unwrap() - crate::special::LN2).abs() < 1e-7);
        assert!(hemispherical_rate(1.0).is_err());
        assert!(hemispherical_rate(2.0).is_err());
    }

    #[test]
    fn regime_classes() {
        assert_eq!(classify_regime(0.5).unwrap().kind, RegimeKind::AlwaysOne);
        assert_eq!(classify_regime(1.0).unwrap().kind, RegimeKind::AlwaysOne);
        let r = classify_regime(1.5).unwrap();
        assert_eq!(r.kind, RegimeKind::ExponentialToOne);
        assert!((r.rate.unwrap() - 0.084_950).abs() < 1e-6);
        assert_eq!(classify_regime(2.0).unwrap().kind, RegimeKind::Half);
        assert_eq!(classify_regime(3.0).unwrap().kind, RegimeKind::ToZero);
        assert!(classify_regime(0.0).is_err());
        assert!(classify_regime(-1.0).is_err());
    }

    #[test]
    fn rate_positive_and_continuous_inside() {
        let mut prev: Option<f64> = None;
        for k in 1..1000 {
            let beta = 1.0 + k as f64 / 1000.0;
            let r = classify_regime(beta).unwrap().rate.unwrap();
            assert!(r > 0.0);
            if let Some(p) = prev {
                assert!((r - p).abs() < 1e-2);
            }
            prev = Some(r);
        }
    }
}
