use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::special::{ln_choose, log_sum_exp};

/// Sample mean with its standard error `s / sqrt(count)` (`s` uses `count - 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

/// Sequential fold in slice order, so the result does not depend on how the
/// samples were produced.
pub fn mean_stderr(samples: &[f64]) -> Option<MeanStderr> {
    let count = samples.len();
    if count == 0 {
        return None;
    }
    let mean = samples.iter().sum::<f64>() / count as f64;
    let stderr = if count > 1 {
        let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (count - 1) as f64;
        (var / count as f64).sqrt()
    } else {
        0.0
    };
    Some(MeanStderr {
        mean,
        stderr,
        count,
    })
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn estimate_rate_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(invalid("xs and ys differ in length"));
    }
    if xs.len() < 3 {
        return Err(invalid(format!("need at least 3 points, got {}", xs.len())));
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("xs must be strictly increasing"));
    }
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(invalid("ys must be finite"));
    }
    let count = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / count;
    let y_mean = ys.iter().sum::<f64>() / count;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - x_mean) * (y - y_mean);
        sxx += (x - x_mean) * (x - x_mean);
    }
    Ok(sxy / sxx)
}

fn binomial_log_cdf(k: u64, m: u64, p: f64) -> f64 {
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let terms: Vec<f64> = (0..=k)
        .map(|i| ln_choose(m, i) + i as f64 * lp + (m - i) as f64 * lq)
        .collect();
    log_sum_exp(&terms)
}

/// One-sided Clopper-Pearson upper confidence bound for a binomial
/// proportion with `k` successes out of `m` at level `1 - alpha`.
pub fn clopper_pearson_upper(k: u64, m: u64, alpha: f64) -> Result<f64> {
    if m == 0 || k > m {
        return Err(invalid(format!("need 0 <= k <= m, m > 0 (k={k}, m={m})")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha = {alpha} not in (0, 1)")));
    }
    if k == m {
        return Ok(1.0);
    }
    if k == 0 {
        return Ok(-(alpha.ln() / m as f64).exp_m1());
    }
    let target = alpha.ln();
    let (mut lo, mut hi) = (k as f64 / m as f64, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if binomial_log_cdf(k, m, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}
