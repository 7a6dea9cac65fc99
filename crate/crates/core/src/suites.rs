//! Verification suites behind `maplab verify`. Each suite returns check
//! records; a record fails only when the checked inequality is violated
//! beyond its stated tolerance.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::amf::{build_amf, check_shell_bound, check_vanishing_conditions, verify_om_limit, VanishingOptions};
use crate::config::ExperimentConfig;
use crate::convexify::{
    beta_star, convexity_certificate, figure_levelsets, nonnegativity_certificate, sandwich_check, ConvexifySpec,
    CERTIFICATE_TOL, SANDWICH_TOL,
};
use crate::error::{Error, Result};
use crate::gaussian::DiagonalGaussian;
use crate::inverse::{minimize_om, Potential};
use crate::report::CheckRecord;
use crate::rng::{self, derive_seed};
use crate::sequence::{Point, PriorSpec};
use crate::smallball::{
    anderson_check, anderson_check_quadrature, hilbert_ratio_bound, lp_ratio_bound, prior_ball_ratio, BallQuery,
};

const ANCHOR_OM_LIMIT: &str = "small-ball posterior ratios converge to exp(I(z2) - I(z1))";
const ANCHOR_HILBERT: &str =
    "Hilbert tail bound: R(z,0) <= exp(-(a_n/2)((|Pi_{n-1} z| - delta)^2 - delta^2)), a_n = sigma_n^-2";
const ANCHOR_LP: &str = "l^p bound: R(z,0) <= exp(-gamma^(2-alpha)/(4 q sigma_{k+1}^alpha) \
     ((|P_k z|_p - delta)^alpha - gamma^alpha S^alpha - delta^alpha))";
const ANCHOR_CONVEX: &str = "f = sum x_j^2/rho_j^2 - beta L is convex";
const ANCHOR_NONNEG: &str = "f = sum x_j^2/rho_j^2 - beta L is non-negative";
const ANCHOR_SANDWICH: &str = "|x|_p^alpha - gamma^alpha |rho|_p^alpha <= L(x) <= |x|_p^alpha";
const ANCHOR_NAIVE: &str = "x1^2 + x2^2 - beta (|x1| + |x2|)^2 is non-convex for every beta > 0";
const ANCHOR_QUARTIC: &str = "x^2 + y^2 - beta sqrt(x^4 + y^4) is convex for beta < sqrt(2)/3 and non-negative for beta <= 1";
const ANCHOR_ANDERSON: &str = "Anderson inequality: gamma(A + a) <= gamma(A) for symmetric convex A";
const ANCHOR_VANISH: &str = "ball ratios R(x_m, 0) vanish along unbounded, outside-E and weakly escaping sequences";
const ANCHOR_SHELL: &str = "prior ratios along an AMF stay above K = exp(M - L(1))/2";
const ANCHOR_AMF: &str = "AMF inequality: ball mass of zeta^delta exceeds (1 - eps) times the supremum";
const ANCHOR_MAP: &str = "AMF centers approach the OM minimizer";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    OmLimit,
    Bounds,
    Convexity,
    Anderson,
    Vanishing,
    Shell,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::OmLimit,
        Suite::Bounds,
        Suite::Convexity,
        Suite::Anderson,
        Suite::Vanishing,
        Suite::Shell,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::OmLimit => "om-limit",
            Suite::Bounds => "bounds",
            Suite::Convexity => "convexity",
            Suite::Anderson => "anderson",
            Suite::Vanishing => "vanishing",
            Suite::Shell => "shell",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Suite::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown suite `{s}`"))
    }
}

/// Everything a suite needs, built once from a validated config.
pub struct SuiteContext<'a> {
    pub config: &'a ExperimentConfig,
    pub prior: PriorSpec,
    pub potential: Potential,
    pub seed: u64,
}

pub fn run_suite(suite: Suite, ctx: &SuiteContext<'_>) -> Result<Vec<CheckRecord>> {
    let seed = derive_seed(ctx.seed, suite as u64 + 1);
    match suite {
        Suite::OmLimit => om_limit_suite(ctx),
        Suite::Bounds => bounds_suite(ctx, seed),
        Suite::Convexity => convexity_suite(ctx, seed),
        Suite::Anderson => anderson_suite(ctx, seed),
        Suite::Vanishing => vanishing_suite(ctx, seed),
        Suite::Shell => shell_suite(ctx, seed),
    }
}

fn om_limit_suite(ctx: &SuiteContext<'_>) -> Result<Vec<CheckRecord>> {
    let k = ctx.prior.dim();
    let cfg = &ctx.config.verify.om_limit;
    let tol = ctx.config.run.tolerances.om_limit_rel;
    if k > crate::amf::OM_LIMIT_MAX_DIM {
        return Ok(vec![CheckRecord::new("om_limit.dimension", false, k as f64, 8.0, 0.0, ANCHOR_OM_LIMIT)
            .indeterminate()]);
    }
    let z1 = cfg.z1.clone().map_or_else(|| Point::zeros(k), Point::new);
    let z2 = match &cfg.z2 {
        Some(z) => Point::new(z.clone()),
        None => {
            let t = &ctx.config.run.tolerances;
            minimize_om(&ctx.potential, &ctx.prior, &Point::zeros(k), t.om_grad, t.max_iter)?.minimizer
        }
    };
    let table = verify_om_limit(
        &ctx.prior,
        &ctx.potential,
        &z1,
        &z2,
        &cfg.deltas,
        ctx.config.run.n_samples,
        ctx.seed,
    )?;
    let mut out = Vec::new();
    for (i, row) in table.rows.iter().enumerate() {
        let rec = CheckRecord::new(
            format!("om_limit.delta_{}.ratio", i + 1),
            true,
            row.ratio,
            row.target,
            row.std_error,
            ANCHOR_OM_LIMIT,
        );
        out.push(if row.flagged { rec.indeterminate() } else { rec });
    }
    let n = table.rows.len();
    let last = &table.rows[n - 1];
    let prev = &table.rows[n.saturating_sub(2)];
    out.push(CheckRecord::new(
        "om_limit.error_trend",
        table.error_trend_ok(),
        last.abs_error,
        prev.abs_error,
        0.0,
        ANCHOR_OM_LIMIT,
    ));
    let rel = table.final_relative_error();
    out.push(CheckRecord::new(
        "om_limit.final_relative_error",
        rel <= tol,
        rel,
        0.0,
        tol,
        ANCHOR_OM_LIMIT,
    ));
    Ok(out)
}

/// A random center z with coordinates of order σ_j and a radius in (0.05, 0.9).
pub fn random_query<R: Rng>(prior: &PriorSpec, r: &mut R) -> (Point, f64) {
    let scale = r.random_range(0.2..3.0);
    let z = prior
        .sigmas()
        .iter()
        .map(|s| scale * s * r.random_range(-1.0..1.0))
        .collect();
    (Point::new(z), r.random_range(0.05..0.9))
}

fn bounds_suite(ctx: &SuiteContext<'_>, seed: u64) -> Result<Vec<CheckRecord>> {
    let prior = &ctx.prior;
    let g = DiagonalGaussian::from_prior(prior);
    let n = ctx.config.run.n_samples;
    let queries = ctx.config.verify.bounds_queries;
    let k = prior.dim();
    let mut hilbert_violations = 0usize;
    let mut lp_violations = 0usize;
    let mut worst_hilbert = f64::NEG_INFINITY;
    let mut worst_lp = f64::NEG_INFINITY;
    for q in 0..queries {
        let mut r = rng::stream(seed, q as u64);
        let (z, delta) = random_query(prior, &mut r);
        let est = prior_ball_ratio(&g, &z, &Point::zeros(k), delta, prior.p(), n, derive_seed(seed, q as u64))?;
        let slack = 3.0 * est.std_error;
        if prior.p() == 2.0 {
            let n_index = r.random_range(1..=k);
            let b = hilbert_ratio_bound(prior, &z, delta, n_index)?;
            worst_hilbert = worst_hilbert.max(est.value - b - slack);
            hilbert_violations += usize::from(est.value > b + slack);
        }
        let k_index = r.random_range(0..k);
        let gamma = (r.random_range(-1.0f64..1.0) * std::f64::consts::LN_10).exp();
        let b = lp_ratio_bound(prior, &z, delta, k_index, gamma)?;
        worst_lp = worst_lp.max(est.value - b - slack);
        lp_violations += usize::from(est.value > b + slack);
    }
    let mut out = Vec::new();
    if prior.p() == 2.0 {
        out.push(CheckRecord::new(
            "bounds.hilbert.violations",
            hilbert_violations == 0,
            hilbert_violations as f64,
            0.0,
            0.0,
            ANCHOR_HILBERT,
        ));
        out.push(CheckRecord::new(
            "bounds.hilbert.worst_excess",
            worst_hilbert <= 0.0,
            worst_hilbert,
            0.0,
            0.0,
            ANCHOR_HILBERT,
        ));
    }
    out.push(CheckRecord::new(
        "bounds.lp.violations",
        lp_violations == 0,
        lp_violations as f64,
        0.0,
        0.0,
        ANCHOR_LP,
    ));
    out.push(CheckRecord::new("bounds.lp.worst_excess", worst_lp <= 0.0, worst_lp, 0.0, 0.0, ANCHOR_LP));
    Ok(out)
}

fn convexity_records(id: &str, spec: &ConvexifySpec, trials: usize, seed: u64, anchor: &str) -> Vec<CheckRecord> {
    let c = convexity_certificate(spec, trials, seed);
    vec![
        CheckRecord::new(
            format!("{id}.convexity_violations"),
            c.violations == 0,
            c.violations as f64,
            0.0,
            CERTIFICATE_TOL,
            anchor,
        ),
        CheckRecord::new(
            format!("{id}.min_hessian_eigenvalue"),
            c.min_hessian_eigenvalue >= -CERTIFICATE_TOL,
            c.min_hessian_eigenvalue,
            0.0,
            CERTIFICATE_TOL,
            anchor,
        ),
    ]
}

fn nonnegativity_record(id: &str, spec: &ConvexifySpec, trials: usize, seed: u64, anchor: &str) -> CheckRecord {
    let c = nonnegativity_certificate(spec, trials, seed);
    CheckRecord::new(
        format!("{id}.min_value"),
        c.violations == 0 && c.min_value >= -CERTIFICATE_TOL,
        c.min_value,
        0.0,
        CERTIFICATE_TOL,
        anchor,
    )
}

fn sandwich_record<R: Rng>(id: &str, spec: &ConvexifySpec, points: usize, r: &mut R) -> Result<CheckRecord> {
    let mut failures = 0usize;
    let mut x = vec![0.0; spec.dim()];
    for _ in 0..points {
        let s = (r.random_range(-3.0f64..1.5) * std::f64::consts::LN_10).exp();
        x.iter_mut().for_each(|v| *v = s * r.random_range(-1.0..1.0));
        let (lo, hi) = sandwich_check(spec, &x)?;
        failures += usize::from(!(lo && hi));
    }
    Ok(CheckRecord::new(
        format!("{id}.sandwich_failures"),
        failures == 0,
        failures as f64,
        0.0,
        SANDWICH_TOL,
        ANCHOR_SANDWICH,
    ))
}

fn convexity_suite(ctx: &SuiteContext<'_>, seed: u64) -> Result<Vec<CheckRecord>> {
    let trials = ctx.config.verify.convexity_trials;
    let mut out = Vec::new();
    let mut sub = 0u64;
    let mut next = || {
        sub += 1;
        derive_seed(seed, sub)
    };
    for beta in [0.1, 0.3, 0.45] {
        let spec = ConvexifySpec::new(4.0, vec![1.0, 1.0], 1.0, beta)?;
        out.extend(convexity_records(&format!("quartic.beta_{beta}"), &spec, trials, next(), ANCHOR_QUARTIC));
    }
    let spec = ConvexifySpec::new(4.0, vec![1.0, 1.0], 1.0, 1.0)?;
    out.push(nonnegativity_record("quartic.beta_1", &spec, trials, next(), ANCHOR_QUARTIC));

    // random specs at 0.99 β*
    let mut r = rng::stream(next(), 0);
    for i in 0..10 {
        let p = r.random_range(1.0..4.0);
        let k = r.random_range(1..=6);
        let mut rho: Vec<f64> = (0..k).map(|_| r.random_range(0.1..2.0)).collect();
        rho.sort_by(|a, b| b.total_cmp(a));
        let gamma = (r.random_range(-1.0f64..1.0) * std::f64::consts::LN_10).exp();
        let base = ConvexifySpec::new(p, rho, gamma, 0.0)?;
        let spec = base.with_beta(0.99 * beta_star(&base))?;
        let id = format!("random_{i}");
        out.extend(convexity_records(&id, &spec, trials / 10, next(), ANCHOR_CONVEX));
        out.push(nonnegativity_record(&id, &spec, trials / 10, next(), ANCHOR_NONNEG));
        out.push(sandwich_record(&id, &spec, 10_000, &mut r)?);
    }

    if let Some((spec, cfg)) = ctx.config.convexify_spec()? {
        out.extend(convexity_records("config", &spec, trials, next(), ANCHOR_CONVEX));
        if spec.beta() <= beta_star(&spec) {
            out.push(nonnegativity_record("config", &spec, trials, next(), ANCHOR_NONNEG));
        }
        out.push(sandwich_record("config", &spec, 10_000, &mut r)?);
        if spec.dim() == 2 {
            let tables = figure_levelsets(cfg.p, cfg.beta_naive, &spec, cfg.grid)?;
            let right = tables.midpoint_violations(true, CERTIFICATE_TOL);
            out.push(CheckRecord::new(
                "figure.right.midpoint_violations",
                right == 0,
                right as f64,
                0.0,
                CERTIFICATE_TOL,
                ANCHOR_CONVEX,
            ));
            if cfg.beta_naive > 0.0 && cfg.p == 1.0 {
                let left = tables.midpoint_violations(false, CERTIFICATE_TOL);
                out.push(CheckRecord::new(
                    "figure.left.midpoint_violations",
                    left > 0,
                    left as f64,
                    1.0,
                    CERTIFICATE_TOL,
                    ANCHOR_NAIVE,
                ));
            }
        }
    }
    Ok(out)
}

fn anderson_suite(ctx: &SuiteContext<'_>, seed: u64) -> Result<Vec<CheckRecord>> {
    let prior = &ctx.prior;
    let g = DiagonalGaussian::from_prior(prior);
    let n = ctx.config.run.n_samples;
    let mut violations = 0usize;
    let mut worst = f64::NEG_INFINITY;
    for q in 0..ctx.config.verify.anderson_queries {
        let mut r = rng::stream(seed, q as u64);
        let (z, delta) = random_query(prior, &mut r);
        let out = anderson_check(&g, &BallQuery::new(z, delta, prior.p())?, n, derive_seed(seed, q as u64))?;
        violations += usize::from(!out.holds);
        worst = worst.max(out.margin);
    }
    let g1 = DiagonalGaussian::new(vec![prior.sigmas()[0]])?;
    let mut quad_violations = 0usize;
    let mut quad_worst = f64::NEG_INFINITY;
    let mut r = rng::stream(derive_seed(seed, 0x7175_6164), 0);
    for _ in 0..ctx.config.verify.anderson_queries {
        let (z, delta) = random_query(&prior.truncate(1)?, &mut r);
        let out = anderson_check_quadrature(&g1, &BallQuery::new(z, delta, prior.p())?)?;
        quad_violations += usize::from(!out.holds || out.shifted.std_error > 1e-8);
        quad_worst = quad_worst.max(out.margin);
    }
    Ok(vec![
        CheckRecord::new(
            "anderson.mc.violations",
            violations == 0,
            violations as f64,
            0.0,
            0.0,
            ANCHOR_ANDERSON,
        ),
        CheckRecord::new("anderson.mc.worst_margin", true, worst, 0.0, 0.0, ANCHOR_ANDERSON),
        CheckRecord::new(
            "anderson.quadrature_1d.violations",
            quad_violations == 0,
            quad_violations as f64,
            0.0,
            1e-8,
            ANCHOR_ANDERSON,
        ),
        CheckRecord::new(
            "anderson.quadrature_1d.worst_margin",
            quad_worst <= 1e-8,
            quad_worst,
            0.0,
            1e-8,
            ANCHOR_ANDERSON,
        ),
    ])
}

fn vanishing_suite(ctx: &SuiteContext<'_>, seed: u64) -> Result<Vec<CheckRecord>> {
    let cfg = &ctx.config.verify.vanishing;
    let schedule = ctx.config.schedule()?;
    let options = VanishingOptions {
        n_samples: ctx.config.run.n_samples,
        direction: cfg.direction.clone(),
        amplitude: cfg.amplitude,
    };
    let mut out = Vec::new();
    for (i, scenario) in cfg.scenarios.iter().enumerate() {
        let name = serde_json::to_value(scenario)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        let table = match check_vanishing_conditions(&ctx.prior, *scenario, &schedule, &options, derive_seed(seed, i as u64)) {
            Ok(t) => t,
            Err(Error::InvalidArgument { reason, .. }) => {
                let rec = CheckRecord::new(format!("vanishing.{name}.setup"), false, 0.0, 0.0, 0.0, ANCHOR_VANISH);
                out.push(CheckRecord { anchor: format!("{ANCHOR_VANISH} ({reason})"), ..rec }.indeterminate());
                continue;
            }
            Err(e) => return Err(e),
        };
        let n = table.rows.len();
        let tail = 4.min(n);
        let decreasing = table.strictly_decreasing_tail(4);
        out.push(CheckRecord::new(
            format!("vanishing.{name}.strictly_decreasing_tail"),
            decreasing,
            table.rows[n - 1].ratio.value,
            table.rows[n - tail].ratio.value,
            0.0,
            ANCHOR_VANISH,
        ));
        let outside = table.rows.iter().filter(|r| !r.within_bound).count();
        out.push(CheckRecord::new(
            format!("vanishing.{name}.bound_violations"),
            outside == 0,
            outside as f64,
            0.0,
            0.0,
            ANCHOR_LP,
        ));
        let floor = table.rows.iter().filter(|r| r.below_resolution_floor).count();
        if floor > 0 {
            out.push(
                CheckRecord::new(
                    format!("vanishing.{name}.below_resolution_floor"),
                    true,
                    floor as f64,
                    0.0,
                    0.0,
                    ANCHOR_VANISH,
                )
                .indeterminate(),
            );
        }
    }
    Ok(out)
}

fn shell_suite(ctx: &SuiteContext<'_>, seed: u64) -> Result<Vec<CheckRecord>> {
    let schedule = ctx.config.schedule()?;
    let options = ctx.config.amf_options();
    let trace = build_amf(&ctx.prior, &ctx.potential, &schedule, &options, seed)?;
    let shell = check_shell_bound(&trace, &ctx.potential, options.lipschitz_trials, seed)?;
    let m = schedule.len() - 1;
    let final_tol = ctx
        .config
        .run
        .tolerances
        .final_distance
        .unwrap_or(schedule.deltas()[m].max(3.0 * trace.positional_uncertainty[m]));
    let failures = trace
        .achieved_ratio
        .iter()
        .zip(schedule.eps())
        .filter(|(r, e)| r.value < 1.0 - *e - 3.0 * r.std_error)
        .count();
    let min_ratio = trace.achieved_ratio.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
    let first = trace.distances_to_om[0];
    let last = trace.distances_to_om[m];
    let mut out = vec![
        CheckRecord::new("shell.k_bound", shell.holds, shell.k_empirical, shell.k_theoretical, 0.0, ANCHOR_SHELL),
        CheckRecord::new(
            "amf.inequality_failures",
            failures == 0,
            failures as f64,
            0.0,
            0.0,
            ANCHOR_AMF,
        ),
        CheckRecord::new("amf.min_achieved_ratio", failures == 0, min_ratio, 1.0, schedule.eps()[0], ANCHOR_AMF),
        CheckRecord::new(
            "amf.distance_trend",
            trace.distances_decrease_in_trend(),
            last,
            first,
            0.0,
            ANCHOR_MAP,
        ),
        CheckRecord::new("amf.final_distance", last <= final_tol, last, 0.0, final_tol, ANCHOR_MAP),
    ];
    for (i, ind) in trace.indeterminate.iter().enumerate() {
        if *ind {
            out.push(
                CheckRecord::new(
                    format!("amf.delta_{}.mc_error", i + 1),
                    true,
                    3.0 * trace.achieved_ratio[i].std_error,
                    schedule.eps()[i],
                    0.0,
                    ANCHOR_AMF,
                )
                .indeterminate(),
            );
        }
    }
    Ok(out)
}
