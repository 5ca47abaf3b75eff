//! Log-domain special functions used throughout the crate.

use std::f64::consts::{LN_2, SQRT_2};

/// Natural log of the Gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma_r(x).0
}

/// `ln C(m, k)`; `-inf` when `k > m`.
///
/// Small `min(k, m - k)` uses a direct product so that huge upper indices
/// (codebook halves around `1e10`) do not lose precision to the
/// cancellation of two enormous log-Gamma values.
pub fn ln_choose(m: u64, k: u64) -> f64 {
    if k > m {
        return f64::NEG_INFINITY;
    }
    let k = k.min(m - k);
    if k == 0 {
        return 0.0;
    }
    if k <= 64 {
        let mut acc = KahanSum::default();
        for i in 0..k {
            acc.add(((m - i) as f64).ln() - ((i + 1) as f64).ln());
        }
        acc.total()
    } else {
        ln_gamma(m as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((m - k) as f64 + 1.0)
    }
}

/// Exact `C(m, k)` as an integer, `None` on overflow.
pub fn choose_exact(m: u64, k: u64) -> Option<u128> {
    if k > m {
        return Some(0);
    }
    let k = k.min(m - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (m - i) is divisible by (i + 1) at every step
        acc = acc.checked_mul((m - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// `C(m, k)` as a float, saturating at `+inf`.
pub fn choose_f64(m: u64, k: u64) -> f64 {
    match choose_exact(m, k) {
        Some(v) => v as f64,
        None => ln_choose(m, k).exp(),
    }
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Standard normal upper tail `Q(x) = P[N(0,1) > x]`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// `ln 2`, re-exported for callers doing base conversions.
pub const LN2: f64 = LN_2;

/// Kahan-Babuska compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `ln sum exp(terms)` with a max shift and compensated accumulation.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let mut acc = KahanSum::default();
    for &t in terms {
        acc.add((t - max).exp());
    }
    max + acc.total().ln()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}
