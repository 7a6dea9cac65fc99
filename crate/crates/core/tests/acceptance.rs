//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Built with `harness = false`.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use maplab::amf::{
    build_amf, check_shell_bound, check_vanishing_conditions, verify_om_limit, AmfOptions, DeltaSchedule,
    VanishingOptions, VanishingScenario,
};
use maplab::convexify::{
    beta_star, convexity_certificate, nonnegativity_certificate, sandwich_check, ConvexifySpec,
};
use maplab::inverse::{minimize_om, tikhonov_solution, ForwardModel, Potential};
use maplab::quadrature::integrate;
use maplab::rng::{derive_seed, stream};
use maplab::sequence::{lp_norm, Point, PriorSpec};
use maplab::smallball::{
    anderson_check, anderson_check_quadrature, hilbert_ratio_bound, lp_ratio_bound, prior_ball_ratio, BallQuery,
};
use maplab::DiagonalGaussian;
use nalgebra::DMatrix;
use rand::Rng;

const SEED: u64 = 0x0acc_e97a;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn sorted_sigmas<R: Rng>(r: &mut R, k: usize) -> Vec<f64> {
    let mut s: Vec<f64> = (0..k).map(|_| r.random_range(0.2..1.5)).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn convexification_quartic() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0;
    let mut min_eig = f64::INFINITY;
    for (i, beta) in [0.1, 0.3, 0.45].into_iter().enumerate() {
        let spec = ConvexifySpec::new(4.0, vec![1.0, 1.0], 1.0, beta).unwrap();
        let c = convexity_certificate(&spec, 100_000, derive_seed(SEED, i as u64));
        violations += c.violations;
        worst = worst.max(c.worst_gap);
        min_eig = min_eig.min(c.min_hessian_eigenvalue);
    }
    let spec = ConvexifySpec::new(4.0, vec![1.0, 1.0], 1.0, 1.0).unwrap();
    let n = nonnegativity_certificate(&spec, 100_000, derive_seed(SEED, 9));
    outcome(
        violations == 0 && min_eig >= -1e-9 && n.min_value >= -1e-9,
        format!(
            "violations {violations}, worst gap {worst:.3e}, min hessian eig {min_eig:.3e}, min f at beta=1 {:.3e}",
            n.min_value
        ),
    )
}

fn convexification_general() -> Outcome {
    let mut r = stream(SEED, 2);
    let (mut conv, mut nonneg, mut sandwich) = (0usize, 0usize, 0usize);
    let mut x = Vec::new();
    for i in 0..200u64 {
        let p = r.random_range(1.0..=4.0);
        let k = r.random_range(1..=6);
        let rho = sorted_sigmas(&mut r, k);
        let gamma = 10f64.powf(r.random_range(-1.0..1.0));
        let base = ConvexifySpec::new(p, rho, gamma, 0.0).unwrap();
        let spec = base.with_beta(0.99 * beta_star(&base)).unwrap();
        let c = convexity_certificate(&spec, 10_000, derive_seed(SEED, 1000 + i));
        conv += c.violations + usize::from(c.min_hessian_eigenvalue < -1e-9);
        let n = nonnegativity_certificate(&spec, 10_000, derive_seed(SEED, 2000 + i));
        nonneg += n.violations + usize::from(n.min_value < -1e-9);
        for _ in 0..10_000 {
            let s = 10f64.powf(r.random_range(-3.0..1.5));
            x.clear();
            x.extend((0..k).map(|_| s * r.random_range(-1.0..1.0)));
            let (lo, hi) = sandwich_check(&spec, &x).unwrap();
            sandwich += usize::from(!(lo && hi));
        }
    }
    outcome(
        conv == 0 && nonneg == 0 && sandwich == 0,
        format!("200 specs: convexity {conv}, nonnegativity {nonneg}, sandwich {sandwich} violations"),
    )
}

fn om_limit() -> Outcome {
    let prior = PriorSpec::new(2.0, vec![1.0]).unwrap();
    let pot = Potential::linear_identity_noise(DMatrix::from_element(1, 1, 1.0), vec![2.0]).unwrap();
    let table = verify_om_limit(
        &prior,
        &pot,
        &Point::zeros(1),
        &Point::new(vec![1.0]),
        &[0.1, 0.05, 0.025],
        100_000,
        SEED,
    )
    .unwrap();
    let target = (-1f64).exp();
    let target_ok = table.rows.iter().all(|r| (r.target - target).abs() < 1e-14);
    let rel = table.final_relative_error();
    let errors: Vec<String> = table.rows.iter().map(|r| format!("{:.3e}", r.abs_error)).collect();
    outcome(
        target_ok && table.error_trend_ok() && rel <= 0.02,
        format!("abs errors [{}], final relative error {rel:.3e}", errors.join(", ")),
    )
}

fn ratio_bounds() -> Outcome {
    let n = 100_000;
    let mut r = stream(SEED, 4);
    let (mut hv, mut lv) = (0usize, 0usize);
    let (mut h_worst, mut l_worst) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for i in 0..200u64 {
        let hilbert = i < 100;
        let p = if hilbert { 2.0 } else { r.random_range(1.0..=4.0) };
        let k = r.random_range(1..=4);
        let prior = PriorSpec::new(p, sorted_sigmas(&mut r, k)).unwrap();
        let scale = r.random_range(0.2..3.0);
        let z: Vec<f64> = prior.sigmas().iter().map(|s| scale * s * r.random_range(-1.0..1.0)).collect();
        let delta = r.random_range(0.05..0.9);
        let g = DiagonalGaussian::from_prior(&prior);
        let est = prior_ball_ratio(&g, &Point::new(z.clone()), &Point::zeros(k), delta, p, n, derive_seed(SEED, 400 + i))
            .unwrap();
        let slack = 3.0 * est.std_error;
        if hilbert {
            let b = hilbert_ratio_bound(&prior, &z, delta, r.random_range(1..=k)).unwrap();
            h_worst = h_worst.max(est.value - b - slack);
            hv += usize::from(est.value > b + slack);
        } else {
            let gamma = 10f64.powf(r.random_range(-1.0..1.0));
            let b = lp_ratio_bound(&prior, &z, delta, r.random_range(0..k), gamma).unwrap();
            l_worst = l_worst.max(est.value - b - slack);
            lv += usize::from(est.value > b + slack);
        }
    }
    outcome(
        hv == 0 && lv == 0,
        format!("hilbert {hv}/100 violations (worst excess {h_worst:.3e}), lp {lv}/100 (worst excess {l_worst:.3e})"),
    )
}

fn anderson() -> Outcome {
    let mut r = stream(SEED, 5);
    let mut violations = 0usize;
    for i in 0..50u64 {
        let k = r.random_range(1..=4);
        let p = r.random_range(1.0..=4.0);
        let g = DiagonalGaussian::new(sorted_sigmas(&mut r, k)).unwrap();
        let c: Vec<f64> = g.sigmas().iter().map(|s| 2.0 * s * r.random_range(-1.0..1.0)).collect();
        let q = BallQuery::new(Point::new(c), r.random_range(0.05..1.5), p).unwrap();
        violations += usize::from(!anderson_check(&g, &q, 100_000, derive_seed(SEED, 500 + i)).unwrap().holds);
    }
    let mut quad_err = 0.0f64;
    let mut quad_fail = 0usize;
    for _ in 0..50 {
        let sigma = r.random_range(0.2..2.0);
        let (c, delta) = (r.random_range(-3.0..3.0), r.random_range(0.05..1.5));
        let g = DiagonalGaussian::new(vec![sigma]).unwrap();
        let out = anderson_check_quadrature(&g, &BallQuery::new(Point::new(vec![c]), delta, 2.0).unwrap()).unwrap();
        // adaptive integration of the density, independent of the erf path
        let pdf = |t: f64| (-0.5 * (t / sigma).powi(2)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        let exact_shift = integrate(pdf, c - delta, c + delta, 1e-14, 1e-14, 200).value;
        let exact_zero = integrate(pdf, -delta, delta, 1e-14, 1e-14, 200).value;
        quad_err = quad_err
            .max((out.shifted.value - exact_shift).abs())
            .max((out.centred.value - exact_zero).abs());
        quad_fail += usize::from(!out.holds);
    }
    outcome(
        violations == 0 && quad_fail == 0 && quad_err <= 1e-8,
        format!("mc violations {violations}/50, quadrature violations {quad_fail}/50, max quadrature error {quad_err:.3e}"),
    )
}

fn tikhonov() -> Outcome {
    let mut r = stream(SEED, 6);
    let k = 5;
    let prior = PriorSpec::new(2.0, sorted_sigmas(&mut r, k)).unwrap();
    let a = DMatrix::from_fn(k, k, |_, _| r.random_range(-1.0..1.0));
    let y: Vec<f64> = (0..k).map(|_| r.random_range(-2.0..2.0)).collect();
    let pot = Potential::new(ForwardModel::linear(a).unwrap(), y, DMatrix::identity(k, k)).unwrap();
    let closed = tikhonov_solution(&pot, &prior).unwrap();
    let norm = lp_norm(closed.coords(), 2.0).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let x0 = Point::new((0..k).map(|_| r.random_range(-5.0..5.0)).collect());
        let res = minimize_om(&pot, &prior, &x0, 1e-10, 1000).unwrap();
        let d = lp_norm(res.minimizer.sub(closed.coords()).coords(), 2.0).unwrap() / norm;
        worst = worst.max(if res.converged { d } else { f64::INFINITY });
    }
    outcome(worst <= 1e-6, format!("20 starts, worst relative distance {worst:.3e}"))
}

fn amf_convergence() -> Outcome {
    let prior = PriorSpec::new(2.0, vec![1.0, 0.8, 0.6, 0.45, 0.3]).unwrap();
    let a = DMatrix::from_row_slice(
        4,
        5,
        &[
            1.0, 0.5, 0.0, 0.2, 0.0, //
            0.0, 1.0, 0.3, 0.0, 0.1, //
            0.4, 0.0, 1.0, 0.5, 0.0, //
            0.0, 0.2, 0.0, 1.0, 0.6,
        ],
    );
    let pot = Potential::new(
        ForwardModel::linear(a).unwrap(),
        vec![1.2, -0.7, 0.9, 0.4],
        DMatrix::from_diagonal_element(4, 4, 2.0),
    )
    .unwrap();
    let schedule = DeltaSchedule::dyadic(8).unwrap();
    let options = AmfOptions::default();
    let trace = build_amf(&prior, &pot, &schedule, &options, SEED).unwrap();
    let shell = check_shell_bound(&trace, &pot, options.lipschitz_trials, SEED).unwrap();
    let closed = tikhonov_solution(&pot, &prior).unwrap();
    let om_gap = lp_norm(trace.om_minimizer.sub(closed.coords()).coords(), 2.0).unwrap();
    let d = &trace.distances_to_om;
    outcome(
        trace.distances_decrease_in_trend()
            && trace.final_distance_ok()
            && trace.satisfies_amf_inequality()
            && shell.holds
            && om_gap < 1e-8,
        format!(
            "distances {:.2e} -> {:.2e} (final tolerance {:.2e}), amf inequality {}, K_emp {:.3e} vs K_theo {:.3e}",
            d[0],
            d[d.len() - 1],
            schedule.deltas()[7].max(3.0 * trace.positional_uncertainty[7]),
            trace.satisfies_amf_inequality(),
            shell.k_empirical,
            shell.k_theoretical
        ),
    )
}

fn vanishing() -> Outcome {
    let schedule = DeltaSchedule::dyadic(8).unwrap();
    let sigmas: Vec<f64> = (1..=8).map(|j| 1.0 / j as f64).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, (p, scenario)) in [
        (2.0, VanishingScenario::Unbounded),
        (1.5, VanishingScenario::Unbounded),
        (2.0, VanishingScenario::OutsideEProxy),
        (1.5, VanishingScenario::OutsideEProxy),
        (2.0, VanishingScenario::WeakNotStrongProxy),
        (1.5, VanishingScenario::WeakNotStrongProxy),
    ]
    .into_iter()
    .enumerate()
    {
        let prior = PriorSpec::new(p, sigmas.clone()).unwrap();
        let mut direction = vec![0.0; 8];
        direction[0] = 1.0;
        direction[1] = 0.5;
        let options = VanishingOptions {
            n_samples: 100_000,
            direction: Some(direction),
            amplitude: 1.0,
        };
        let t = check_vanishing_conditions(&prior, scenario, &schedule, &options, derive_seed(SEED, 800 + i as u64))
            .unwrap();
        let ok = t.strictly_decreasing_tail(4) && t.all_within_bounds();
        pass &= ok;
        let last = &t.rows[t.rows.len() - 1];
        parts.push(format!(
            "{scenario:?} p={p}: {} (last ratio {:.2e} <= bound {:.2e})",
            if ok { "ok" } else { "FAILED" },
            last.ratio.value,
            last.bound
        ));
    }
    outcome(pass, parts.join("; "))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn cli_determinism() -> Outcome {
    let runs: [(&[&str], &str); 6] = [
        (&["map"], "linear_k5.json"),
        (&["amf"], "scalar_1d.json"),
        (&["figure"], "fig1.json"),
        (&["sample"], "zero_potential.json"),
        (&["verify"], "lp_verify.json"),
        (&["verify", "--suite", "om-limit", "--suite", "anderson"], "scalar_1d.json"),
    ];
    let root = tempfile::tempdir().unwrap();
    let mut shots = Vec::new();
    for rep in 0..2 {
        for (i, (args, cfg)) in runs.iter().enumerate() {
            let out = root.path().join(format!("{rep}/{i}"));
            let status = Command::new(env!("CARGO_BIN_EXE_maplab"))
                .args(*args)
                .arg("--config")
                .arg(configs().join(cfg))
                .arg("--out")
                .arg(&out)
                .output()
                .unwrap()
                .status;
            if status.code() != Some(0) {
                return outcome(false, format!("{} {cfg} exited with {status}", args[0]));
            }
        }
        shots.push(snapshot(&root.path().join(rep.to_string())));
    }
    let files = shots[0].len();
    outcome(
        files > 0 && shots[0] == shots[1],
        format!("{files} output files from {} commands compared byte-for-byte", runs.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 9] = [
        ("1 convexification quartic instance", convexification_quartic, Duration::from_secs(10)),
        ("2 convexification general suite", convexification_general, Duration::from_secs(120)),
        ("3 OM small-ball limit", om_limit, Duration::from_secs(5)),
        ("4 ball-ratio bounds", ratio_bounds, Duration::from_secs(120)),
        ("5 Anderson inequality", anderson, Duration::from_secs(60)),
        ("6 linear-Gaussian MAP = Tikhonov", tikhonov, Duration::from_secs(5)),
        ("7 AMF convergence", amf_convergence, Duration::from_secs(600)),
        ("8 vanishing-condition trends", vanishing, Duration::from_secs(300)),
        ("9 CLI determinism", cli_determinism, Duration::from_secs(600)),
    ];
    let mut failed = 0;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let o = run();
        let took = start.elapsed();
        let pass = o.pass && took <= budget;
        failed += usize::from(!pass);
        println!(
            "{} criterion {name}: {} [{:.2}s of {}s]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 9 acceptance criteria passed");
}
