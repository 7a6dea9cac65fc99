//! Ball masses μ(B_δ(x)), posterior ball masses, their ratios, and the
//! analytic ball-ratio bounds they are checked against.
//!
//! Monte-Carlo ratios use common random numbers: one pool of offsets
//! `x_i ∈ B_δ(0)` serves every center, so the numerator and denominator of a
//! ratio (and ball masses at different centers) share their noise. The pool is
//! built either from centred prior draws that land in the ball, with the
//! Cameron–Martin weight dμ/dμ_c at `c + x_i`, or, when the ball is too small
//! for prior draws to hit it, from uniform draws in the ball weighted by the
//! Gaussian density.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gaussian::{log_density_fast, DiagonalGaussian};
use crate::inverse::Potential;
use crate::numeric::{compensated_sum, ln_lp_ball_volume, normal_interval_mass};
use crate::quadrature::{integrate, integrate_lp_ball};
use crate::rng::{self, derive_seed};
use crate::sequence::{
    cm_norm_sq_fast, derived_constants, lp_norm, lp_norm_fast, lp_norm_pow_fast, project_tail,
    Point, PriorSpec,
};

/// Minimum sample count accepted by the Monte-Carlo estimators.
pub const MIN_SAMPLES: usize = 1000;
/// Ratios whose denominator has a smaller effective sample size are flagged.
pub const MIN_EFFECTIVE_SAMPLES: f64 = 100.0;
/// Prior hits in the ball needed before the prior-draw pool is preferred.
const AUTO_MIN_HITS: usize = 1000;
/// Absolute error target of the quadrature estimates.
pub const QUADRATURE_TOL: f64 = 1e-10;

const TAG_UNIFORM: u64 = 0x756e_6966;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    NaiveMc,
    CmShiftedMc,
    UniformBallMc,
    Quadrature,
}

/// A ball B_δ(center) in the ℓ^p norm.
#[derive(Debug, Clone, PartialEq)]
pub struct BallQuery {
    pub center: Point,
    pub delta: f64,
    pub p: f64,
}

impl BallQuery {
    pub fn new(center: Point, delta: f64, p: f64) -> Result<Self> {
        validate_delta(delta)?;
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::invalid("p", format!("exponent must be finite and >= 1, got {p}")));
        }
        Ok(BallQuery { center, delta, p })
    }
}

fn validate_delta(delta: f64) -> Result<()> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::invalid("delta", format!("radius must be positive, got {delta}")));
    }
    Ok(())
}

/// An estimated ball probability or ratio of ball masses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallMassEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub method: Method,
    /// Set when the estimate rests on too few effective samples.
    #[serde(default)]
    pub unreliable: bool,
}

impl BallMassEstimate {
    fn exact(value: f64, method: Method, n_samples: usize) -> Self {
        BallMassEstimate {
            value,
            std_error: 0.0,
            n_samples,
            method,
            unreliable: false,
        }
    }
}

fn check_samples(n: usize) -> Result<()> {
    if n < MIN_SAMPLES {
        return Err(Error::invalid("n", format!("at least {MIN_SAMPLES} samples required, got {n}")));
    }
    Ok(())
}

/// Draw a point uniformly from the ℓ^p ball of radius `radius` in ℝ^dim.
///
/// With G_j ~ Gamma(1/p), random signs, and W ~ Exp(1), the point
/// `r · (±G_j^{1/p}) / (Σ G_j + W)^{1/p}` is uniform on the ball.
pub fn uniform_lp_ball<R: Rng + ?Sized>(rng: &mut R, p: f64, radius: f64, out: &mut [f64]) {
    if p == 2.0 {
        let mut sq = 0.0;
        for o in out.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *o = z;
            sq += z * z;
        }
        let w: f64 = Exp1.sample(rng);
        let scale = radius / (sq + 2.0 * w).sqrt();
        out.iter_mut().for_each(|o| *o *= scale);
        return;
    }
    let gamma = Gamma::new(1.0 / p, 1.0).expect("valid shape");
    let mut total = 0.0;
    for o in out.iter_mut() {
        let g: f64 = gamma.sample(rng);
        total += g;
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        *o = sign * g.powf(1.0 / p);
    }
    let w: f64 = Exp1.sample(rng);
    let scale = radius / (total + w).powf(1.0 / p);
    out.iter_mut().for_each(|o| *o *= scale);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMode {
    /// Prior draws when enough of them land in the ball, uniform otherwise.
    Auto,
    Prior,
    UniformBall,
}

/// Log-scale estimate of a ball integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogEstimate {
    pub log_value: f64,
    /// Standard error relative to the value.
    pub rel_error: f64,
    pub effective_samples: f64,
}

/// Common-random-number pool of offsets in B_δ(0).
#[derive(Debug, Clone)]
pub struct OffsetPool {
    sigmas: Vec<f64>,
    p: f64,
    delta: f64,
    uniform: bool,
    /// Row-major offsets; in prior mode only the draws inside the ball.
    offsets: Vec<f64>,
    n_total: usize,
    log_volume: f64,
    log_norm: f64,
}

impl OffsetPool {
    pub fn build(
        g: &DiagonalGaussian,
        p: f64,
        delta: f64,
        n: usize,
        seed: u64,
        mode: SamplingMode,
    ) -> Result<Self> {
        validate_delta(delta)?;
        check_samples(n)?;
        let k = g.dim();
        let log_norm = g.log_normalizer();
        let mut uniform = mode == SamplingMode::UniformBall;
        let mut offsets = Vec::new();
        if !uniform {
            let draws = g.sample_flat(n, seed);
            let dp = delta.powf(p);
            offsets = draws
                .chunks_exact(k)
                .filter(|x| lp_norm_pow_fast(x, p) < dp)
                .flatten()
                .copied()
                .collect();
            let hits = offsets.len() / k;
            if mode == SamplingMode::Auto && hits < AUTO_MIN_HITS {
                uniform = true;
            }
        }
        if uniform {
            let useed = derive_seed(seed, TAG_UNIFORM);
            offsets = vec![0.0; n * k];
            offsets
                .par_chunks_mut(k)
                .enumerate()
                .for_each(|(i, row)| {
                    let mut r = rng::stream(useed, i as u64);
                    uniform_lp_ball(&mut r, p, delta, row);
                });
        }
        Ok(OffsetPool {
            sigmas: g.sigmas().to_vec(),
            p,
            delta,
            uniform,
            offsets,
            n_total: n,
            log_volume: ln_lp_ball_volume(k, p, delta),
            log_norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.sigmas.len()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn offsets(&self) -> impl Iterator<Item = &[f64]> {
        self.offsets.chunks_exact(self.dim())
    }

    pub fn method(&self) -> Method {
        if self.uniform {
            Method::UniformBallMc
        } else {
            Method::CmShiftedMc
        }
    }

    /// log of the importance weight of offset `x` for the ball at `c`:
    /// prior mode uses dμ/dμ_c(c + x) = exp(−⟨c, x⟩_E − ½|c|_E²),
    /// uniform mode uses vol(B_δ) · φ_μ(c + x).
    #[inline]
    fn log_weight(&self, c: &[f64], x: &[f64], shifted: &[f64]) -> f64 {
        if self.uniform {
            self.log_volume - 0.5 * cm_norm_sq_fast(shifted, &self.sigmas) - self.log_norm
        } else {
            let mut inner = 0.0;
            let mut cc = 0.0;
            for ((ci, xi), s) in c.iter().zip(x).zip(&self.sigmas) {
                let s2 = s * s;
                inner += ci * xi / s2;
                cc += ci * ci / s2;
            }
            -inner - 0.5 * cc
        }
    }

    /// Per-offset log integrand values `log w_i + h(c + x_i)`.
    pub fn log_terms<H>(&self, c: &[f64], h: &H) -> Vec<f64>
    where
        H: Fn(&[f64]) -> f64 + Sync,
    {
        let k = self.dim();
        self.offsets
            .par_chunks(k)
            .map_init(
                || vec![0.0; k],
                |buf, x| {
                    for ((b, ci), xi) in buf.iter_mut().zip(c).zip(x) {
                        *b = ci + xi;
                    }
                    self.log_weight(c, x, buf) + h(buf)
                },
            )
            .collect()
    }

    /// Estimate of ∫_{B_δ(c)} e^{h} dμ on the log scale.
    pub fn estimate<H>(&self, c: &[f64], h: &H) -> LogEstimate
    where
        H: Fn(&[f64]) -> f64 + Sync,
    {
        let terms = self.log_terms(c, h);
        let n = self.n_total as f64;
        let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return LogEstimate {
                log_value: f64::NEG_INFINITY,
                rel_error: f64::INFINITY,
                effective_samples: 0.0,
            };
        }
        let s1 = compensated_sum(terms.iter().map(|t| (t - m).exp()));
        let s2 = compensated_sum(terms.iter().map(|t| (2.0 * (t - m)).exp()));
        let mean = s1 / n;
        let var = (s2 / n - mean * mean).max(0.0);
        LogEstimate {
            log_value: m + mean.ln(),
            rel_error: (var / n).sqrt() / mean,
            effective_samples: s1 * s1 / s2,
        }
    }

    /// Ratio ∫_{B_δ(w)} e^{h} dμ / ∫_{B_δ(z)} e^{h} dμ with a delta-method
    /// standard error on the log ratio.
    pub fn ratio<H>(&self, w: &[f64], z: &[f64], h: &H) -> BallMassEstimate
    where
        H: Fn(&[f64]) -> f64 + Sync,
    {
        let a = self.log_terms(w, h);
        let b = if w == z { a.clone() } else { self.log_terms(z, h) };
        ratio_from_terms(&a, &b, self.n_total, self.method())
    }
}

pub(crate) fn ratio_from_terms(a: &[f64], b: &[f64], n_total: usize, method: Method) -> BallMassEstimate {
    let n = n_total as f64;
    let ma = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mb = b.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !mb.is_finite() {
        return BallMassEstimate {
            value: f64::NAN,
            std_error: f64::INFINITY,
            n_samples: n_total,
            method,
            unreliable: true,
        };
    }
    if !ma.is_finite() {
        return BallMassEstimate {
            value: 0.0,
            std_error: 0.0,
            n_samples: n_total,
            method,
            unreliable: true,
        };
    }
    let ea: Vec<f64> = a.iter().map(|t| (t - ma).exp()).collect();
    let eb: Vec<f64> = b.iter().map(|t| (t - mb).exp()).collect();
    let sa = compensated_sum(ea.iter().copied());
    let sb = compensated_sum(eb.iter().copied());
    let saa = compensated_sum(ea.iter().map(|v| v * v));
    let sbb = compensated_sum(eb.iter().map(|v| v * v));
    let sab = compensated_sum(ea.iter().zip(&eb).map(|(x, y)| x * y));
    let (abar, bbar) = (sa / n, sb / n);
    let var_a = saa / n - abar * abar;
    let var_b = sbb / n - bbar * bbar;
    let cov = sab / n - abar * bbar;
    let var_log = ((var_a / (abar * abar) + var_b / (bbar * bbar) - 2.0 * cov / (abar * bbar)) / n).max(0.0);
    let value = if a == b { 1.0 } else { (ma - mb).exp() * (sa / sb) };
    let ess = sb * sb / sbb;
    BallMassEstimate {
        value,
        std_error: value * var_log.sqrt(),
        n_samples: n_total,
        method,
        unreliable: ess < MIN_EFFECTIVE_SAMPLES,
    }
}

/// Indicator-mean estimate of μ(B_δ(center)) from centred prior draws.
pub fn ball_mass_mc(g: &DiagonalGaussian, q: &BallQuery, n: usize, seed: u64) -> Result<BallMassEstimate> {
    check_dim(g.dim(), q.center.dim())?;
    check_samples(n)?;
    let k = g.dim();
    let dp = q.delta.powf(q.p);
    let hits: usize = (0..n)
        .into_par_iter()
        .map_init(
            || vec![0.0; k],
            |buf, i| {
                g.draw_into(seed, i as u64, buf);
                for (b, c) in buf.iter_mut().zip(q.center.iter()) {
                    *b -= c;
                }
                usize::from(lp_norm_pow_fast(buf, q.p) < dp)
            },
        )
        .sum();
    let v = hits as f64 / n as f64;
    Ok(BallMassEstimate {
        value: v,
        std_error: (v * (1.0 - v) / n as f64).sqrt(),
        n_samples: n,
        method: Method::NaiveMc,
        unreliable: false,
    })
}

/// Cameron–Martin shifted estimate of μ(B_δ(center)): the mean over centred
/// draws `u` of `dμ/dμ_c(u + c) · 1{‖u‖_p < δ}`.
pub fn ball_mass_shifted(g: &DiagonalGaussian, q: &BallQuery, n: usize, seed: u64) -> Result<BallMassEstimate> {
    check_dim(g.dim(), q.center.dim())?;
    let pool = OffsetPool::build(g, q.p, q.delta, n, seed, SamplingMode::Prior)?;
    Ok(pool_mass(&pool, &q.center))
}

/// Estimate of μ(B_δ(center)) from uniform draws in the ball weighted by the
/// Gaussian density; suited to radii far below the prior scale.
pub fn ball_mass_uniform(g: &DiagonalGaussian, q: &BallQuery, n: usize, seed: u64) -> Result<BallMassEstimate> {
    check_dim(g.dim(), q.center.dim())?;
    let pool = OffsetPool::build(g, q.p, q.delta, n, seed, SamplingMode::UniformBall)?;
    Ok(pool_mass(&pool, &q.center))
}

fn pool_mass(pool: &OffsetPool, c: &[f64]) -> BallMassEstimate {
    let est = pool.estimate(c, &|_: &[f64]| 0.0);
    let value = if est.log_value.is_finite() { est.log_value.exp() } else { 0.0 };
    BallMassEstimate {
        value,
        std_error: if value > 0.0 { value * est.rel_error } else { 0.0 },
        n_samples: pool.n_total(),
        method: pool.method(),
        unreliable: est.effective_samples < MIN_EFFECTIVE_SAMPLES,
    }
}

/// μ(B_δ(center)) with the sampler chosen from the prior hit count: prior
/// draws when at least `MIN_SAMPLES` land in the ball, uniform ball draws
/// otherwise.
pub fn ball_mass(g: &DiagonalGaussian, q: &BallQuery, n: usize, seed: u64) -> Result<BallMassEstimate> {
    check_dim(g.dim(), q.center.dim())?;
    let pool = OffsetPool::build(g, q.p, q.delta, n, seed, SamplingMode::Auto)?;
    Ok(pool_mass(&pool, &q.center))
}

/// Iterated quadrature of μ(B_δ(center)) for dim ≤ 3; the innermost axis is
/// integrated in closed form.
pub fn ball_mass_quadrature(g: &DiagonalGaussian, q: &BallQuery) -> Result<BallMassEstimate> {
    let k = g.dim();
    check_dim(k, q.center.dim())?;
    if k > 3 {
        return Err(Error::QuadratureDimension(k));
    }
    let sigmas = g.sigmas();
    let c = q.center.coords();
    let inner = |prefix: &[f64], w: f64| {
        let mut dens = 1.0;
        for (j, &u) in prefix.iter().enumerate() {
            let s = sigmas[j];
            dens *= (-0.5 * (u / s) * (u / s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
        }
        (dens * normal_interval_mass(c[k - 1], w, sigmas[k - 1]), 0.0)
    };
    let res = integrate_lp_ball(c, q.delta, q.p, QUADRATURE_TOL, &inner);
    let mut est = BallMassEstimate::exact(res.value.clamp(0.0, 1.0), Method::Quadrature, res.evaluations);
    est.std_error = res.error;
    Ok(est)
}

/// Posterior ball-mass ratio ∫_{B_δ(w)} e^{−Φ} dμ / ∫_{B_δ(z)} e^{−Φ} dμ.
/// The normalising constant cancels and is never formed.
#[allow(clippy::too_many_arguments)]
pub fn posterior_ball_ratio(
    g: &DiagonalGaussian,
    phi: &Potential,
    w: &Point,
    z: &Point,
    delta: f64,
    p: f64,
    n: usize,
    seed: u64,
) -> Result<BallMassEstimate> {
    check_dim(g.dim(), w.dim())?;
    check_dim(g.dim(), z.dim())?;
    check_dim(g.dim(), phi.input_dim())?;
    let pool = OffsetPool::build(g, p, delta, n, seed, SamplingMode::Auto)?;
    Ok(pool.ratio(w, z, &|u: &[f64]| -phi.phi_unchecked(u)))
}

/// Prior ball-mass ratio μ(B_δ(w)) / μ(B_δ(z)).
pub fn prior_ball_ratio(
    g: &DiagonalGaussian,
    w: &Point,
    z: &Point,
    delta: f64,
    p: f64,
    n: usize,
    seed: u64,
) -> Result<BallMassEstimate> {
    check_dim(g.dim(), w.dim())?;
    check_dim(g.dim(), z.dim())?;
    let pool = OffsetPool::build(g, p, delta, n, seed, SamplingMode::Auto)?;
    Ok(pool.ratio(w, z, &|_: &[f64]| 0.0))
}

/// Quadrature ratio of (posterior, when `phi` is given) ball masses for
/// dim ≤ 3. Each ball integral is taken relative to its center value
/// exp(−I(c)) so that far-apart centers do not underflow.
pub fn quadrature_ratio(
    g: &DiagonalGaussian,
    phi: Option<&Potential>,
    w: &Point,
    z: &Point,
    delta: f64,
    p: f64,
) -> Result<BallMassEstimate> {
    let k = g.dim();
    check_dim(k, w.dim())?;
    check_dim(k, z.dim())?;
    validate_delta(delta)?;
    if k > 3 {
        return Err(Error::QuadratureDimension(k));
    }
    if let Some(phi) = phi {
        check_dim(k, phi.input_dim())?;
    }
    let om = |u: &[f64]| {
        let pot = phi.map_or(0.0, |f| f.phi_unchecked(u));
        pot + 0.5 * cm_norm_sq_fast(u, g.sigmas())
    };
    let relative = |c: &Point| {
        let ic = om(c);
        let inner = |prefix: &[f64], half: f64| {
            let mut u = prefix.to_vec();
            u.push(0.0);
            let last = c[k - 1];
            let r = integrate(
                |t| {
                    u[k - 1] = t;
                    (ic - om(&u)).exp()
                },
                last - half,
                last + half,
                QUADRATURE_TOL * 1e-2,
                1e-13,
                200,
            );
            (r.value, r.error)
        };
        (ic, integrate_lp_ball(c, delta, p, QUADRATURE_TOL, &inner))
    };
    let (iw, jw) = relative(w);
    let (iz, jz) = relative(z);
    let value = (iz - iw).exp() * jw.value / jz.value;
    let rel = jw.error / jw.value.abs() + jz.error / jz.value.abs();
    Ok(BallMassEstimate {
        value,
        std_error: value * rel,
        n_samples: jw.evaluations + jz.evaluations,
        method: Method::Quadrature,
        unreliable: !value.is_finite(),
    })
}

/// Tail-norm bound for Hilbert-space priors (p = 2):
/// R^μ_δ(z, 0) ≤ exp(−(a_n/2)[(‖Π_{n−1} z‖_2 − δ)² − δ²]) with a_n = σ_n^{−2}.
/// `n_index` is 1-based.
pub fn hilbert_ratio_bound(prior: &PriorSpec, z: &[f64], delta: f64, n_index: usize) -> Result<f64> {
    if prior.p() != 2.0 {
        return Err(Error::RequiresHilbert(prior.p()));
    }
    check_dim(prior.dim(), z.len())?;
    validate_delta(delta)?;
    if n_index == 0 || n_index > prior.dim() {
        return Err(Error::OutOfRange(format!("n_index {n_index} outside 1..={}", prior.dim())));
    }
    let a_n = prior.precision(n_index - 1);
    let tail = lp_norm(&project_tail(z, n_index - 1)?, 2.0)?;
    Ok((-(a_n / 2.0) * ((tail - delta).powi(2) - delta * delta)).exp())
}

/// ℓ^p ball-ratio bound
/// R^μ_δ(z, 0) ≤ exp(−γ^{2−α} / (4 q σ_{k+1}^α) · [(‖P_k z‖_p − δ)^α − γ^α S^α − δ^α]).
///
/// `k_index` counts the leading coordinates dropped by P_k. A tail norm below
/// δ enters as zero, since the infimum of ‖P_k v‖_p over B_δ(z) is then zero.
pub fn lp_ratio_bound(prior: &PriorSpec, z: &[f64], delta: f64, k_index: usize, gamma: f64) -> Result<f64> {
    check_dim(prior.dim(), z.len())?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", format!("must lie in (0, 1), got {delta}")));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::invalid("gamma", format!("must be positive, got {gamma}")));
    }
    if k_index >= prior.dim() {
        return Err(Error::OutOfRange(format!("k_index {k_index} >= dim {}", prior.dim())));
    }
    let dc = derived_constants(prior);
    let alpha = dc.alpha;
    let sigma = prior.sigmas()[k_index];
    let tail = lp_norm(&project_tail(z, k_index)?, prior.p())?;
    let lead = (tail - delta).max(0.0).powf(alpha);
    let bracket = lead - gamma.powf(alpha) * dc.s.powf(alpha) - delta.powf(alpha);
    let rate = gamma.powf(2.0 - alpha) / (4.0 * dc.q * sigma.powf(alpha));
    Ok((-rate * bracket).exp())
}

/// Outcome of comparing a shifted ball with the centred ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AndersonOutcome {
    pub holds: bool,
    /// μ(B_δ(center)) − μ(B_δ(0)).
    pub margin: f64,
    pub shifted: BallMassEstimate,
    pub centred: BallMassEstimate,
}

/// Monte-Carlo check of μ(B_δ(center)) ≤ μ(B_δ(0)) with common random numbers.
pub fn anderson_check(g: &DiagonalGaussian, q: &BallQuery, n: usize, seed: u64) -> Result<AndersonOutcome> {
    check_dim(g.dim(), q.center.dim())?;
    let pool = OffsetPool::build(g, q.p, q.delta, n, seed, SamplingMode::Auto)?;
    let shifted = pool_mass(&pool, &q.center);
    let centred = pool_mass(&pool, &vec![0.0; g.dim()]);
    let margin = shifted.value - centred.value;
    let combined = shifted.std_error.hypot(centred.std_error);
    Ok(AndersonOutcome {
        holds: margin <= 3.0 * combined,
        margin,
        shifted,
        centred,
    })
}

/// Quadrature version of [`anderson_check`] for dim ≤ 3; the tolerance is
/// the sum of the declared quadrature errors.
pub fn anderson_check_quadrature(g: &DiagonalGaussian, q: &BallQuery) -> Result<AndersonOutcome> {
    let shifted = ball_mass_quadrature(g, q)?;
    let zero = BallQuery::new(Point::zeros(g.dim()), q.delta, q.p)?;
    let centred = ball_mass_quadrature(g, &zero)?;
    let margin = shifted.value - centred.value;
    Ok(AndersonOutcome {
        holds: margin <= shifted.std_error + centred.std_error,
        margin,
        shifted,
        centred,
    })
}

/// The ℓ^p norm of the offset, exposed for tests of the pool geometry.
pub fn offset_norm(x: &[f64], p: f64) -> f64 {
    lp_norm_fast(x, p)
}

/// log φ_μ(u), used by callers that need the raw density on the fast path.
pub fn prior_log_density(g: &DiagonalGaussian, u: &[f64]) -> f64 {
    log_density_fast(g, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::std_normal_interval;

    fn unit(k: usize) -> DiagonalGaussian {
        DiagonalGaussian::new(vec![1.0; k]).unwrap()
    }

    fn query(c: Vec<f64>, delta: f64, p: f64) -> BallQuery {
        BallQuery::new(Point::new(c), delta, p).unwrap()
    }

    #[test]
    fn naive_mass_in_one_dimension() {
        let est = ball_mass_mc(&unit(1), &query(vec![0.0], 1.0, 3.0), 100_000, 1).unwrap();
        let oracle = std_normal_interval(-1.0, 1.0);
        assert!((est.value - oracle).abs() < 4.0 * est.std_error, "{est:?}");
    }

    #[test]
    fn naive_mass_of_a_disc() {
        let est = ball_mass_mc(&unit(2), &query(vec![0.0, 0.0], 1.0, 2.0), 100_000, 2).unwrap();
        let oracle = 1.0 - (-0.5f64).exp();
        assert!((est.value - oracle).abs() < 4.0 * est.std_error, "{est:?}");
    }

    #[test]
    fn huge_ball_has_full_mass() {
        let g = DiagonalGaussian::new(vec![1.0, 0.7, 0.3]).unwrap();
        let est = ball_mass_mc(&g, &query(vec![0.0; 3], 30.0, 1.5), 10_000, 3).unwrap();
        assert_eq!(est.value, 1.0);
    }

    #[test]
    fn rejects_degenerate_queries() {
        assert!(BallQuery::new(Point::zeros(1), 0.0, 2.0).is_err());
        assert!(BallQuery::new(Point::zeros(1), -1.0, 2.0).is_err());
        let q = query(vec![0.0], 1.0, 2.0);
        assert!(ball_mass_mc(&unit(1), &q, 10, 0).is_err());
        assert!(ball_mass_quadrature(&unit(4), &query(vec![0.0; 4], 1.0, 2.0)).is_err());
    }

    #[test]
    fn shifted_equals_naive_at_the_origin() {
        let q = query(vec![0.0, 0.0], 0.8, 1.0);
        let a = ball_mass_mc(&unit(2), &q, 20_000, 9).unwrap();
        let b = ball_mass_shifted(&unit(2), &q, 20_000, 9).unwrap();
        assert_eq!(a.value, b.value);
        assert!((a.std_error - b.std_error).abs() < 1e-15);
    }

    #[test]
    fn shifted_reaches_far_centers() {
        let q = query(vec![5.0], 0.5, 2.0);
        let oracle = std_normal_interval(4.5, 5.5);
        let naive = ball_mass_mc(&unit(1), &q, 10_000, 4).unwrap();
        assert_eq!(naive.value, 0.0);
        let est = ball_mass_shifted(&unit(1), &q, 10_000, 4).unwrap();
        assert!((est.value - oracle).abs() < 4.0 * est.std_error, "{est:?} vs {oracle:e}");
        let uni = ball_mass_uniform(&unit(1), &q, 10_000, 4).unwrap();
        assert!((uni.value - oracle).abs() < 4.0 * uni.std_error);
    }

    #[test]
    fn quadrature_closed_forms() {
        let g = DiagonalGaussian::new(vec![1.3]).unwrap();
        let est = ball_mass_quadrature(&g, &query(vec![0.4], 0.7, 1.0)).unwrap();
        let exact = std_normal_interval((0.4 - 0.7) / 1.3, (0.4 + 0.7) / 1.3);
        assert!((est.value - exact).abs() < 1e-14);
        let disc = ball_mass_quadrature(&unit(2), &query(vec![0.0, 0.0], 1.0, 2.0)).unwrap();
        assert!((disc.value - (1.0 - (-0.5f64).exp())).abs() < 1e-8);
        assert!(disc.std_error <= 1e-8);
    }

    #[test]
    fn identical_centers_have_unit_ratio() {
        let w = Point::new(vec![0.3, -0.2]);
        let r = prior_ball_ratio(&unit(2), &w, &w, 0.1, 2.0, 5_000, 1).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.std_error, 0.0);
    }

    #[test]
    fn hilbert_bound_values() {
        let prior = PriorSpec::new(2.0, vec![1.0, 0.5]).unwrap();
        let b = hilbert_ratio_bound(&prior, &[3.0, 0.0], 0.1, 1).unwrap();
        assert!((b - (-0.5f64 * (2.9 * 2.9 - 0.01)).exp()).abs() < 1e-15);
        assert!((b - (-4.2f64).exp()).abs() < 1e-15);
        // tail norm 2δ: exponent vanishes
        let one = hilbert_ratio_bound(&prior, &[0.0, 0.2], 0.1, 2).unwrap();
        assert!((one - 1.0).abs() < 1e-15);
        let lp = PriorSpec::new(1.0, vec![1.0, 0.5]).unwrap();
        assert!(matches!(hilbert_ratio_bound(&lp, &[0.0, 0.0], 0.1, 1), Err(Error::RequiresHilbert(_))));
    }

    #[test]
    fn lp_bound_is_vacuous_for_small_z_and_validates() {
        let prior = PriorSpec::new(1.5, vec![1.0, 0.5, 0.25]).unwrap();
        assert!(lp_ratio_bound(&prior, &[0.01, 0.0, 0.0], 0.5, 0, 1.0).unwrap() > 1.0);
        assert!(lp_ratio_bound(&prior, &[0.0; 3], 1.0, 0, 1.0).is_err());
        assert!(lp_ratio_bound(&prior, &[0.0; 3], 0.5, 3, 1.0).is_err());
        assert!(lp_ratio_bound(&prior, &[0.0; 3], 0.5, 0, 0.0).is_err());
    }

    #[test]
    fn lp_bound_shares_the_hilbert_decay_order() {
        // p = 2, k = 0, γ = 1: exponent rate 1/(8σ_1²) against ½σ_1^{−2}
        let prior = PriorSpec::new(2.0, vec![1.0, 0.5]).unwrap();
        let s2 = 1.25;
        for norm in [5.0, 10.0, 20.0] {
            let z = [norm, 0.0];
            let lp = lp_ratio_bound(&prior, &z, 0.1, 0, 1.0).unwrap().ln();
            let expected = -((norm - 0.1f64).powi(2) - s2 - 0.01) / 8.0;
            assert!((lp - expected).abs() < 1e-12 * expected.abs());
            let hb = hilbert_ratio_bound(&prior, &z, 0.1, 1).unwrap().ln();
            assert!((hb / lp - 4.0).abs() < 0.1 + 4.0 * s2 / (norm * norm));
        }
    }

    #[test]
    fn anderson_at_origin_is_tight() {
        let out = anderson_check(&unit(2), &query(vec![0.0, 0.0], 0.5, 2.0), 5_000, 1).unwrap();
        assert!(out.holds);
        assert_eq!(out.margin, 0.0);
    }

    #[test]
    fn uniform_ball_draws_stay_inside() {
        let mut r = rng::stream(3, 0);
        let mut x = [0.0; 4];
        for p in [1.0, 1.7, 2.0, 3.5] {
            for _ in 0..1000 {
                uniform_lp_ball(&mut r, p, 0.3, &mut x);
                assert!(offset_norm(&x, p) < 0.3);
            }
        }
    }
}
