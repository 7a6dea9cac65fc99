//! Small numerical helpers shared across modules: compensated summation,
//! log-sum-exp, Gaussian interval probabilities and ℓ^p ball volumes.

use libm::{erf, erfc, lgamma as ln_gamma};

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.carry += (self.sum - t) + value;
        } else {
            self.carry += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<CompensatedSum>().total()
}

/// `log(Σ exp(v_i))`, returning `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let s = compensated_sum(values.iter().map(|v| (v - max).exp()));
    max + s.ln()
}

/// P(a < Z < b) for a standard normal Z, accurate in both tails.
pub fn std_normal_interval(a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let s = std::f64::consts::SQRT_2;
    if a >= 0.0 {
        0.5 * (erfc(a / s) - erfc(b / s))
    } else if b <= 0.0 {
        0.5 * (erfc(-b / s) - erfc(-a / s))
    } else {
        0.5 * (erf(b / s) - erf(a / s))
    }
}

/// P(c - w < X < c + w) for X ~ N(0, sigma²).
pub fn normal_interval_mass(center: f64, half_width: f64, sigma: f64) -> f64 {
    std_normal_interval((center - half_width) / sigma, (center + half_width) / sigma)
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Natural log of the Lebesgue volume of the ℓ^p ball of radius `radius` in ℝ^dim.
pub fn ln_lp_ball_volume(dim: usize, p: f64, radius: f64) -> f64 {
    let k = dim as f64;
    k * (2.0f64.ln() + ln_gamma(1.0 + 1.0 / p)) - ln_gamma(1.0 + k / p) + k * radius.ln()
}
