//! Asymptotic maximizing families over a radius schedule, the shell-bound
//! diagnostic, the small-ball limit of posterior ratios, and finite-schedule
//! trends for the vanishing conditions.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gaussian::DiagonalGaussian;
use crate::inverse::{minimize_om, om_value, Potential};
use crate::rng::derive_seed;
use crate::sequence::{lp_norm_fast, Point, PriorSpec};
use crate::smallball::{
    hilbert_ratio_bound, lp_ratio_bound, quadrature_ratio, BallMassEstimate, OffsetPool, SamplingMode,
};

const TAG_POOL: u64 = 0x706f_6f6c;
const TAG_VALIDATE: u64 = 0x7661_6c69;
const TAG_CANDIDATES: u64 = 0x6361_6e64;
const TAG_LIPSCHITZ: u64 = 0x6c69_7073;

/// Strictly decreasing radii δ_1 > … > δ_M > 0 with slacks ε^δ ∈ (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSchedule {
    deltas: Vec<f64>,
    eps: Vec<f64>,
}

impl DeltaSchedule {
    pub fn new(deltas: Vec<f64>, eps: Vec<f64>) -> Result<Self> {
        if deltas.is_empty() {
            return Err(Error::invalid("deltas", "schedule must not be empty"));
        }
        if deltas.len() != eps.len() {
            return Err(Error::invalid(
                "eps",
                format!("expected {} slacks, got {}", deltas.len(), eps.len()),
            ));
        }
        if deltas.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::invalid("deltas", "radii must be finite and positive"));
        }
        if deltas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::invalid("deltas", "radii must be strictly decreasing"));
        }
        if eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return Err(Error::invalid("eps", "slacks must lie in (0, 1)"));
        }
        if eps.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::invalid("eps", "slacks must be non-increasing"));
        }
        Ok(DeltaSchedule { deltas, eps })
    }

    /// δ_m = 2^{−m} for m = 1..=count, with ε^δ = δ.
    pub fn dyadic(count: usize) -> Result<Self> {
        let deltas: Vec<f64> = (1..=count).map(|m| 0.5f64.powi(m as i32)).collect();
        DeltaSchedule::new(deltas.clone(), deltas)
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }
}

impl Default for DeltaSchedule {
    fn default() -> Self {
        DeltaSchedule::dyadic(8).expect("valid default schedule")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmfOptions {
    /// Samples per ball estimate.
    pub n_samples: usize,
    /// Prior draws added to the candidate pool at every radius.
    pub candidates: usize,
    /// Pairs per radius level in the Lipschitz estimate used by the shell check.
    pub lipschitz_trials: usize,
}

impl Default for AmfOptions {
    fn default() -> Self {
        AmfOptions {
            n_samples: 100_000,
            candidates: 32,
            lipschitz_trials: 2_000,
        }
    }
}

/// One radius of an AMF trace; serialized as one JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmfRecord {
    pub index: usize,
    pub delta: f64,
    pub eps: f64,
    pub center: Point,
    pub achieved_ratio: BallMassEstimate,
    pub prior_ratio_to_zero: BallMassEstimate,
    pub distance_to_om: f64,
    pub positional_uncertainty: f64,
    /// Monte-Carlo error exceeds the slack at this radius.
    pub indeterminate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmfTrace {
    pub schedule: DeltaSchedule,
    pub p: f64,
    pub om_minimizer: Point,
    pub centers: Vec<Point>,
    pub achieved_ratio: Vec<BallMassEstimate>,
    pub prior_ratio_to_zero: Vec<BallMassEstimate>,
    pub distances_to_om: Vec<f64>,
    pub positional_uncertainty: Vec<f64>,
    pub indeterminate: Vec<bool>,
}

impl AmfTrace {
    pub fn records(&self) -> Vec<AmfRecord> {
        (0..self.schedule.len())
            .map(|i| AmfRecord {
                index: i + 1,
                delta: self.schedule.deltas[i],
                eps: self.schedule.eps[i],
                center: self.centers[i].clone(),
                achieved_ratio: self.achieved_ratio[i],
                prior_ratio_to_zero: self.prior_ratio_to_zero[i],
                distance_to_om: self.distances_to_om[i],
                positional_uncertainty: self.positional_uncertainty[i],
                indeterminate: self.indeterminate[i],
            })
            .collect()
    }

    /// The defining inequality R ≥ 1 − ε^δ − 3 SE at every radius.
    pub fn satisfies_amf_inequality(&self) -> bool {
        self.achieved_ratio
            .iter()
            .zip(&self.schedule.eps)
            .all(|(r, e)| r.value >= 1.0 - e - 3.0 * r.std_error)
    }

    /// Trend test on the resolved distances max(d − 3·uncertainty, 0):
    /// least-squares slope against the schedule index is ≤ 0 and the last
    /// does not exceed the first. Distances inside the Monte-Carlo
    /// resolution count as zero.
    pub fn distances_decrease_in_trend(&self) -> bool {
        let resolved: Vec<f64> = self
            .distances_to_om
            .iter()
            .zip(&self.positional_uncertainty)
            .map(|(d, u)| (d - 3.0 * u).max(0.0))
            .collect();
        decreasing_in_trend(&resolved)
    }

    /// Final distance to the OM minimizer within max(δ_M, 3·uncertainty).
    pub fn final_distance_ok(&self) -> bool {
        let m = self.schedule.len() - 1;
        self.distances_to_om[m] <= self.schedule.deltas[m].max(3.0 * self.positional_uncertainty[m])
    }
}

pub fn decreasing_in_trend(values: &[f64]) -> bool {
    let n = values.len();
    if n < 2 {
        return true;
    }
    let xm = (n - 1) as f64 / 2.0;
    let ym = values.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in values.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (y - ym);
        sxx += dx * dx;
    }
    sxy / sxx <= 0.0 && values[n - 1] <= values[0]
}

/// Builds ζ^δ for every radius by maximizing a common-random-number estimate
/// of the posterior ball mass over a candidate pool (prior draws, the OM
/// minimizer, the previous center and the origin) refined by compass search.
///
/// `achieved_ratio` compares ζ^δ with the best pool member on an independent
/// validation sample.
pub fn build_amf(
    prior: &PriorSpec,
    pot: &Potential,
    schedule: &DeltaSchedule,
    options: &AmfOptions,
    seed: u64,
) -> Result<AmfTrace> {
    let k = prior.dim();
    check_dim(k, pot.input_dim())?;
    let p = prior.p();
    let g = DiagonalGaussian::from_prior(prior);
    let om = minimize_om(pot, prior, &Point::zeros(k), 1e-10, 2_000)?;
    let om_point = om.minimizer.clone();
    let log_post = |u: &[f64]| -pot.phi_unchecked(u);

    let mut trace = AmfTrace {
        schedule: schedule.clone(),
        p,
        om_minimizer: om_point.clone(),
        centers: Vec::new(),
        achieved_ratio: Vec::new(),
        prior_ratio_to_zero: Vec::new(),
        distances_to_om: Vec::new(),
        positional_uncertainty: Vec::new(),
        indeterminate: Vec::new(),
    };
    let cand_draws = if options.candidates > 0 {
        g.sample_flat(options.candidates, derive_seed(seed, TAG_CANDIDATES))
    } else {
        Vec::new()
    };
    let mut previous: Option<Point> = None;
    for (m, (&delta, &eps)) in schedule.deltas.iter().zip(&schedule.eps).enumerate() {
        let pool = OffsetPool::build(
            &g,
            p,
            delta,
            options.n_samples,
            derive_seed(seed, TAG_POOL + m as u64),
            SamplingMode::Auto,
        )?;
        let objective = |c: &[f64]| pool.estimate(c, &log_post).log_value;

        let mut pool_points: Vec<Point> = cand_draws.chunks_exact(k).map(Point::from).collect();
        pool_points.push(om_point.clone());
        pool_points.push(Point::zeros(k));
        if let Some(prev) = &previous {
            pool_points.push(prev.clone());
        }
        let scores: Vec<f64> = pool_points.iter().map(|c| objective(c)).collect();
        let best = argmax(&scores);
        let (zeta, _) = compass_search(&objective, pool_points[best].clone(), scores[best], delta);

        let validation = OffsetPool::build(
            &g,
            p,
            delta,
            options.n_samples,
            derive_seed(seed, TAG_VALIDATE + m as u64),
            SamplingMode::Auto,
        )?;
        let val_scores: Vec<f64> = pool_points
            .iter()
            .map(|c| validation.estimate(c, &log_post).log_value)
            .collect();
        let val_best = argmax(&val_scores);
        let zeta_val = validation.estimate(&zeta, &log_post).log_value;
        let reference = if zeta_val >= val_scores[val_best] {
            zeta.clone()
        } else {
            pool_points[val_best].clone()
        };
        let achieved = validation.ratio(&zeta, &reference, &log_post);
        let prior_ratio = pool.ratio(&zeta, &vec![0.0; k], &|_: &[f64]| 0.0);
        let uncertainty = positional_uncertainty(&pool, &zeta, &log_post);

        trace.distances_to_om.push(lp_norm_fast(&zeta.sub(&om_point), p));
        trace.indeterminate.push(3.0 * achieved.std_error > eps);
        trace.achieved_ratio.push(achieved);
        trace.prior_ratio_to_zero.push(prior_ratio);
        trace.positional_uncertainty.push(uncertainty);
        trace.centers.push(zeta.clone());
        previous = Some(zeta);
    }
    Ok(trace)
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Coordinate-wise pattern search; the step starts at δ and halves until it
/// falls below 10⁻³δ.
fn compass_search<F>(objective: &F, mut x: Point, mut fx: f64, delta: f64) -> (Point, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let mut step = delta;
    let mut evaluations = 0;
    while step >= 1e-3 * delta && evaluations < 20_000 {
        let mut improved = false;
        for j in 0..x.dim() {
            for dir in [1.0, -1.0] {
                let mut y = x.clone().into_vec();
                y[j] += dir * step;
                let fy = objective(&y);
                evaluations += 1;
                if fy > fx {
                    x = Point::new(y);
                    fx = fy;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, fx)
}

/// ℓ^p norm of the per-coordinate standard errors of the weighted mean offset
/// inside B_δ(c).
fn positional_uncertainty<H>(pool: &OffsetPool, c: &[f64], h: &H) -> f64
where
    H: Fn(&[f64]) -> f64 + Sync,
{
    let terms = pool.log_terms(c, h);
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return f64::INFINITY;
    }
    let w: Vec<f64> = terms.iter().map(|t| (t - top).exp()).collect();
    let total: f64 = w.iter().sum();
    let k = pool.dim();
    let mut mean = vec![0.0; k];
    for (wi, x) in w.iter().zip(pool.offsets()) {
        for (m, xj) in mean.iter_mut().zip(x) {
            *m += wi * xj / total;
        }
    }
    let mut var = vec![0.0; k];
    for (wi, x) in w.iter().zip(pool.offsets()) {
        for ((v, xj), m) in var.iter_mut().zip(x).zip(&mean) {
            *v += (wi / total).powi(2) * (xj - m).powi(2);
        }
    }
    let se: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();
    lp_norm_fast(&se, pool.p())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShellCheck {
    pub k_empirical: f64,
    pub k_theoretical: f64,
    pub lower_bound_m: f64,
    pub lipschitz_at_one: f64,
    /// R^μ_δ(ζ^δ, 0) ≥ K_theoretical − 3 SE at every radius.
    pub holds: bool,
}

/// K_empirical = min_δ (R^μ_δ(ζ^δ, 0) − 3 SE); K_theoretical = e^{M − L(1)}/2
/// with the empirical Lipschitz estimate L(1). Diagnostic only.
pub fn check_shell_bound(trace: &AmfTrace, pot: &Potential, lipschitz_trials: usize, seed: u64) -> Result<ShellCheck> {
    let l1 = pot.lipschitz_estimate(trace.p, 1.0, lipschitz_trials, derive_seed(seed, TAG_LIPSCHITZ))?;
    let m = pot.lower_bound();
    let k_theoretical = (m - l1).exp() / 2.0;
    let k_empirical = trace
        .prior_ratio_to_zero
        .iter()
        .map(|r| r.value - 3.0 * r.std_error)
        .fold(f64::INFINITY, f64::min);
    let holds = trace
        .prior_ratio_to_zero
        .iter()
        .all(|r| r.value >= k_theoretical - 3.0 * r.std_error);
    Ok(ShellCheck {
        k_empirical,
        k_theoretical,
        lower_bound_m: m,
        lipschitz_at_one: l1,
        holds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmLimitRow {
    pub delta: f64,
    pub ratio: f64,
    pub std_error: f64,
    pub target: f64,
    pub abs_error: f64,
    /// Monte-Carlo error above 20% of |target − 1|.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmLimitTable {
    pub rows: Vec<OmLimitRow>,
}

impl OmLimitTable {
    /// Absolute errors at the three smallest radii do not increase.
    pub fn error_trend_ok(&self) -> bool {
        let n = self.rows.len();
        let tail = &self.rows[n.saturating_sub(3)..];
        tail.windows(2).all(|w| w[1].abs_error <= w[0].abs_error)
    }

    pub fn final_relative_error(&self) -> f64 {
        let last = self.rows.last().expect("non-empty table");
        last.abs_error / last.target.abs()
    }
}

/// Largest dimension for the Monte-Carlo branch of [`verify_om_limit`].
pub const OM_LIMIT_MAX_DIM: usize = 8;

/// Posterior ball ratios R^{μ^y}_δ(z1, z2) against exp(I(z2) − I(z1)):
/// quadrature for dim ≤ 3, common-random-number Monte Carlo up to dim 8.
pub fn verify_om_limit(
    prior: &PriorSpec,
    pot: &Potential,
    z1: &Point,
    z2: &Point,
    deltas: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<OmLimitTable> {
    let k = prior.dim();
    check_dim(k, z1.dim())?;
    check_dim(k, z2.dim())?;
    check_dim(k, pot.input_dim())?;
    if deltas.is_empty() || deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("deltas", "radii must be non-empty and strictly decreasing"));
    }
    if k > OM_LIMIT_MAX_DIM {
        return Err(Error::OutOfRange(format!("dimension {k} above {OM_LIMIT_MAX_DIM}")));
    }
    let g = DiagonalGaussian::from_prior(prior);
    let target = (om_value(pot, prior, z2)? - om_value(pot, prior, z1)?).exp();
    let rows = deltas
        .iter()
        .enumerate()
        .map(|(i, &delta)| {
            let est = if k <= 3 {
                quadrature_ratio(&g, Some(pot), z1, z2, delta, prior.p())?
            } else {
                let pool = OffsetPool::build(
                    &g,
                    prior.p(),
                    delta,
                    n_samples,
                    derive_seed(seed, TAG_POOL + i as u64),
                    SamplingMode::Auto,
                )?;
                pool.ratio(z1, z2, &|u: &[f64]| -pot.phi_unchecked(u))
            };
            if !est.value.is_finite() {
                return Err(Error::NonFinite(format!("ball ratio at delta {delta}")));
            }
            Ok(OmLimitRow {
                delta,
                ratio: est.value,
                std_error: est.std_error,
                target,
                abs_error: (est.value - target).abs(),
                flagged: est.std_error > 0.2 * (target - 1.0).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OmLimitTable { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VanishingScenario {
    /// x_m = m · v/‖v‖_p.
    Unbounded,
    /// x_m = (σ_1, …, σ_m) in dimension m, so |x_m|_E² = m.
    OutsideEProxy,
    /// x_m = c · e_m.
    WeakNotStrongProxy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanishingOptions {
    pub n_samples: usize,
    /// Direction of the unbounded family; all ones when absent.
    pub direction: Option<Vec<f64>>,
    /// Amplitude of the escaping bump.
    pub amplitude: f64,
}

impl Default for VanishingOptions {
    fn default() -> Self {
        VanishingOptions {
            n_samples: 100_000,
            direction: None,
            amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VanishingRow {
    pub index: usize,
    pub delta: f64,
    pub dim: usize,
    pub point: Point,
    pub ratio: BallMassEstimate,
    /// Smallest analytic bound over the projection index, γ grid and, for
    /// p = 2, the Hilbert tail bound.
    pub bound: f64,
    pub within_bound: bool,
    /// Estimate rests on too few effective samples or underflows.
    pub below_resolution_floor: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VanishingTable {
    pub scenario: VanishingScenario,
    pub rows: Vec<VanishingRow>,
}

impl VanishingTable {
    /// Ratios strictly decrease across the last `count` entries.
    pub fn strictly_decreasing_tail(&self, count: usize) -> bool {
        let n = self.rows.len();
        let tail = &self.rows[n.saturating_sub(count)..];
        tail.windows(2).all(|w| w[1].ratio.value < w[0].ratio.value)
    }

    pub fn all_within_bounds(&self) -> bool {
        self.rows.iter().all(|r| r.within_bound)
    }
}

fn gamma_grid() -> impl Iterator<Item = f64> {
    (-24..=24).map(|j| 2f64.powf(j as f64 / 2.0))
}

/// min over k_index and γ of the ℓ^p bound, and over n of the Hilbert bound
/// when p = 2.
pub fn best_ratio_bound(prior: &PriorSpec, z: &[f64], delta: f64) -> Result<f64> {
    let mut best = f64::INFINITY;
    for k_index in 0..prior.dim() {
        for gamma in gamma_grid() {
            best = best.min(lp_ratio_bound(prior, z, delta, k_index, gamma)?);
        }
    }
    if prior.p() == 2.0 {
        for n in 1..=prior.dim() {
            best = best.min(hilbert_ratio_bound(prior, z, delta, n)?);
        }
    }
    Ok(best)
}

/// Prior ratios R^μ_{δ_m}(x_m, 0) along the scenario's sequence, one entry
/// per schedule radius, each compared with [`best_ratio_bound`].
pub fn check_vanishing_conditions(
    prior: &PriorSpec,
    scenario: VanishingScenario,
    schedule: &DeltaSchedule,
    options: &VanishingOptions,
    seed: u64,
) -> Result<VanishingTable> {
    let k = prior.dim();
    let count = schedule.len();
    if matches!(
        scenario,
        VanishingScenario::OutsideEProxy | VanishingScenario::WeakNotStrongProxy
    ) && k < count
    {
        return Err(Error::invalid(
            "prior.sigmas",
            format!("scenario needs dimension >= schedule length {count}, got {k}"),
        ));
    }
    if schedule.deltas()[0] >= 1.0 {
        return Err(Error::invalid("deltas", "radii must lie below 1"));
    }
    let direction = match &options.direction {
        Some(d) => {
            check_dim(k, d.len())?;
            d.clone()
        }
        None => vec![1.0; k],
    };
    let dnorm = lp_norm_fast(&direction, prior.p());
    if scenario == VanishingScenario::Unbounded && !(dnorm > 0.0 && dnorm.is_finite()) {
        return Err(Error::invalid("direction", "direction must be finite and non-zero"));
    }
    let rows = (0..count)
        .map(|i| {
            let m = i + 1;
            let delta = schedule.deltas()[i];
            let (local, point) = match scenario {
                VanishingScenario::Unbounded => (
                    prior.clone(),
                    Point::new(direction.iter().map(|v| m as f64 * v / dnorm).collect()),
                ),
                VanishingScenario::OutsideEProxy => {
                    let local = prior.truncate(m)?;
                    let point = Point::new(local.sigmas().to_vec());
                    (local, point)
                }
                VanishingScenario::WeakNotStrongProxy => {
                    (prior.clone(), Point::basis(k, i, options.amplitude))
                }
            };
            let g = DiagonalGaussian::from_prior(&local);
            let pool = OffsetPool::build(
                &g,
                local.p(),
                delta,
                options.n_samples,
                derive_seed(seed, TAG_POOL + i as u64),
                SamplingMode::Auto,
            )?;
            let ratio = pool.ratio(&point, &vec![0.0; local.dim()], &|_: &[f64]| 0.0);
            let bound = best_ratio_bound(&local, &point, delta)?;
            Ok(VanishingRow {
                index: m,
                delta,
                dim: local.dim(),
                within_bound: ratio.value <= bound + 3.0 * ratio.std_error,
                below_resolution_floor: ratio.unreliable || ratio.value == 0.0,
                point,
                ratio,
                bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VanishingTable { scenario, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn schedule_validation() {
        let d = DeltaSchedule::default();
        assert_eq!(d.len(), 8);
        assert_eq!(d.deltas()[0], 0.5);
        assert_eq!(d.eps(), d.deltas());
        assert!(DeltaSchedule::new(vec![0.5, 0.5], vec![0.1, 0.1]).is_err());
        assert!(DeltaSchedule::new(vec![0.5, 0.25], vec![0.1]).is_err());
        assert!(DeltaSchedule::new(vec![0.5], vec![1.0]).is_err());
        assert!(DeltaSchedule::new(vec![0.5, 0.25], vec![0.1, 0.2]).is_err());
        assert!(DeltaSchedule::new(vec![], vec![]).is_err());
    }

    #[test]
    fn trend_helper() {
        assert!(decreasing_in_trend(&[3.0, 2.5, 2.7, 1.0]));
        assert!(!decreasing_in_trend(&[1.0, 2.0, 3.0]));
        assert!(!decreasing_in_trend(&[1.0, 0.1, 0.1, 1.1]));
        assert!(decreasing_in_trend(&[1.0]));
    }

    #[test]
    fn zero_potential_amf_stays_at_origin() {
        let prior = PriorSpec::new(2.0, vec![1.0, 0.5]).unwrap();
        let pot = Potential::zero(2);
        let schedule = DeltaSchedule::dyadic(3).unwrap();
        let opts = AmfOptions {
            n_samples: 5_000,
            candidates: 8,
            lipschitz_trials: 100,
        };
        let trace = build_amf(&prior, &pot, &schedule, &opts, 4).unwrap();
        for (c, d) in trace.centers.iter().zip(schedule.deltas()) {
            assert!(lp_norm_fast(c, 2.0) < 0.1 * d, "{c:?}");
        }
        assert!(trace.satisfies_amf_inequality());
        let shell = check_shell_bound(&trace, &pot, 100, 1).unwrap();
        assert_eq!(shell.k_theoretical, 0.5);
        assert!(shell.holds);
    }

    #[test]
    fn om_limit_identical_points() {
        let prior = PriorSpec::new(2.0, vec![1.0]).unwrap();
        let pot = Potential::linear_identity_noise(DMatrix::from_element(1, 1, 1.0), vec![2.0]).unwrap();
        let z = Point::new(vec![0.3]);
        let t = verify_om_limit(&prior, &pot, &z, &z, &[0.1, 0.05], 1000, 0).unwrap();
        for row in &t.rows {
            assert_eq!(row.target, 1.0);
            assert!((row.ratio - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn om_limit_prior_only_target() {
        let prior = PriorSpec::new(2.0, vec![1.0]).unwrap();
        let pot = Potential::zero(1);
        let t = verify_om_limit(&prior, &pot, &Point::zeros(1), &Point::new(vec![1.0]), &[0.1, 0.05, 0.025], 1000, 0)
            .unwrap();
        assert!((t.rows[0].target - 0.5f64.exp()).abs() < 1e-15);
        assert!(t.final_relative_error() < 0.02);
        assert!(t.error_trend_ok());
    }

    #[test]
    fn escaping_bump_without_amplitude_has_unit_ratio() {
        let prior = PriorSpec::new(2.0, (1..=4).map(|j| 1.0 / j as f64).collect()).unwrap();
        let schedule = DeltaSchedule::dyadic(4).unwrap();
        let opts = VanishingOptions {
            n_samples: 2_000,
            direction: None,
            amplitude: 0.0,
        };
        let t = check_vanishing_conditions(&prior, VanishingScenario::WeakNotStrongProxy, &schedule, &opts, 1).unwrap();
        assert!(t.rows.iter().all(|r| r.ratio.value == 1.0));
        let short = PriorSpec::new(2.0, vec![1.0, 0.5]).unwrap();
        assert!(check_vanishing_conditions(&short, VanishingScenario::OutsideEProxy, &schedule, &opts, 1).is_err());
    }
}
