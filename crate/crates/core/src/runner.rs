//! Command execution for the `maplab` binary. Every command reads a
//! validated config, writes its result files atomically and reports an exit
//! status; no output depends on thread count or wall-clock time.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::amf::{build_amf, check_shell_bound, ShellCheck};
use crate::config::{ExperimentConfig, ForwardRegistry};
use crate::convexify::figure_levelsets;
use crate::error::{Error, Result};
use crate::gaussian::{sample, DiagonalGaussian};
use crate::inverse::{minimize_om, OmResult};
use crate::report::{csv_float, to_json_lines, to_json_pretty, write_atomic, CheckRecord, Report};
use crate::rng::derive_seed;
use crate::sequence::Point;
use crate::smallball::{ball_mass, BallMassEstimate, BallQuery};
use crate::suites::{run_suite, Suite, SuiteContext};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Map,
    Verify(Vec<Suite>),
    Amf,
    Figure,
    Sample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

/// Exit status for an error that aborted a command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonFinite(_) => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

/// Loads and validates the config at `path`, then runs `cmd`. `seed` and
/// `out` override the config's `run.seed` and `output.directory`.
pub fn run_command(cmd: &Command, path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<Outcome> {
    let mut config = crate::config::load_config(path)?;
    if let Some(s) = seed {
        config.run.seed = s;
    }
    if let Some(o) = out {
        config.output.directory = o.to_path_buf();
    }
    let registry = ForwardRegistry::with_builtins();
    config.validate(&registry)?;
    run(cmd, &config, &registry)
}

pub fn run(cmd: &Command, config: &ExperimentConfig, registry: &ForwardRegistry) -> Result<Outcome> {
    let mut w = Writer {
        dir: config.output.directory.clone(),
        files: Vec::new(),
    };
    let (exit_code, summary) = match cmd {
        Command::Map => cmd_map(config, registry, &mut w)?,
        Command::Verify(suites) => cmd_verify(config, registry, suites, &mut w)?,
        Command::Amf => cmd_amf(config, registry, &mut w)?,
        Command::Figure => cmd_figure(config, &mut w)?,
        Command::Sample => cmd_sample(config, &mut w)?,
    };
    Ok(Outcome {
        exit_code,
        files: w.files,
        summary,
    })
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn put(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        write_atomic(&path, contents.as_bytes())?;
        self.files.push(path);
        Ok(())
    }
}

fn wants(config: &ExperimentConfig, format: &str) -> bool {
    config.output.formats.iter().any(|f| f == format)
}

fn finite(values: impl IntoIterator<Item = f64>, what: &str) -> Result<()> {
    if values.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

fn cmd_map(config: &ExperimentConfig, registry: &ForwardRegistry, w: &mut Writer) -> Result<(i32, String)> {
    let prior = config.prior()?;
    let pot = config.potential(registry)?;
    let t = &config.run.tolerances;
    let res: OmResult = minimize_om(&pot, &prior, &config.x0(prior.dim())?, t.om_grad, t.max_iter)?;
    finite(res.minimizer.coords().iter().copied().chain([res.value, res.grad_norm]), "map result")?;
    w.put("map_result.json", &to_json_pretty(&res)?)?;
    if wants(config, "csv") {
        let mut csv = String::from("index,value\n");
        for (j, v) in res.minimizer.coords().iter().enumerate() {
            let _ = writeln!(csv, "{},{}", j + 1, csv_float(*v));
        }
        w.put("map_minimizer.csv", &csv)?;
    }
    let code = if res.converged { EXIT_OK } else { EXIT_CHECK_FAILED };
    let summary = format!(
        "om value {:.12e} after {} iterations (gradient norm {:.3e}){}",
        res.value,
        res.iterations,
        res.grad_norm,
        if res.converged { "" } else { "; not converged" }
    );
    Ok((code, summary))
}

fn cmd_verify(
    config: &ExperimentConfig,
    registry: &ForwardRegistry,
    suites: &[Suite],
    w: &mut Writer,
) -> Result<(i32, String)> {
    let suites: Vec<Suite> = if suites.is_empty() { Suite::ALL.to_vec() } else { suites.to_vec() };
    let ctx = SuiteContext {
        config,
        prior: config.prior()?,
        potential: config.potential(registry)?,
        seed: config.run.seed,
    };
    let mut checks: Vec<CheckRecord> = Vec::new();
    for s in &suites {
        checks.extend(run_suite(*s, &ctx)?);
    }
    let report = Report {
        suites: suites.iter().map(|s| s.name().to_string()).collect(),
        seed: config.run.seed,
        checks,
    };
    w.put("verify_report.json", &to_json_pretty(&report)?)?;
    if wants(config, "csv") {
        let mut csv = String::from("check_id,status,observed,expected,tolerance\n");
        for c in &report.checks {
            let status = serde_json::to_value(c.status).map_err(|e| Error::Io(e.to_string()))?;
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                c.check_id,
                status.as_str().unwrap_or_default(),
                csv_float(c.observed),
                csv_float(c.expected),
                csv_float(c.tolerance)
            );
        }
        w.put("verify_report.csv", &csv)?;
    }
    let failed = report.failed();
    let summary = format!("{} checks, {failed} failed", report.checks.len());
    Ok((if failed == 0 { EXIT_OK } else { EXIT_CHECK_FAILED }, summary))
}

#[derive(Serialize)]
struct AmfSummary<'a> {
    seed: u64,
    p: f64,
    om_minimizer: &'a Point,
    shell: ShellCheck,
    amf_inequality: bool,
    distances_decrease_in_trend: bool,
    final_distance_ok: bool,
    indeterminate: usize,
}

fn cmd_amf(config: &ExperimentConfig, registry: &ForwardRegistry, w: &mut Writer) -> Result<(i32, String)> {
    let prior = config.prior()?;
    let pot = config.potential(registry)?;
    let schedule = config.schedule()?;
    let options = config.amf_options();
    let seed = config.run.seed;
    let trace = build_amf(&prior, &pot, &schedule, &options, seed)?;
    finite(
        trace.centers.iter().flat_map(|c| c.coords().iter().copied()),
        "amf centers",
    )?;
    let shell = check_shell_bound(&trace, &pot, options.lipschitz_trials, derive_seed(seed, 0x5348))?;
    let records = trace.records();
    w.put("amf_trace.jsonl", &to_json_lines(&records)?)?;
    if wants(config, "csv") {
        let mut csv = String::from("index,delta,eps,achieved_ratio,achieved_ratio_se,prior_ratio_to_zero,distance_to_om,positional_uncertainty,indeterminate\n");
        for r in &records {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{}",
                r.index,
                csv_float(r.delta),
                csv_float(r.eps),
                csv_float(r.achieved_ratio.value),
                csv_float(r.achieved_ratio.std_error),
                csv_float(r.prior_ratio_to_zero.value),
                csv_float(r.distance_to_om),
                csv_float(r.positional_uncertainty),
                r.indeterminate
            );
        }
        w.put("amf_trace.csv", &csv)?;
    }
    let summary = AmfSummary {
        seed,
        p: trace.p,
        om_minimizer: &trace.om_minimizer,
        amf_inequality: trace.satisfies_amf_inequality(),
        distances_decrease_in_trend: trace.distances_decrease_in_trend(),
        final_distance_ok: trace.final_distance_ok(),
        indeterminate: trace.indeterminate.iter().filter(|b| **b).count(),
        shell,
    };
    w.put("amf_summary.json", &to_json_pretty(&summary)?)?;
    let m = schedule.len() - 1;
    let text = format!(
        "{} radii, final distance to OM minimizer {:.3e}, {} indeterminate",
        schedule.len(),
        trace.distances_to_om[m],
        summary.indeterminate
    );
    let code = if summary.amf_inequality { EXIT_OK } else { EXIT_CHECK_FAILED };
    Ok((code, text))
}

fn cmd_figure(config: &ExperimentConfig, w: &mut Writer) -> Result<(i32, String)> {
    let (spec, cfg) = config
        .convexify_spec()?
        .ok_or_else(|| Error::config("convexify", "the figure command needs a `convexify` section"))?;
    if spec.dim() != 2 {
        return Err(Error::config(
            "convexify.rho",
            format!("level sets need dimension 2, got {}", spec.dim()),
        ));
    }
    let tables = figure_levelsets(cfg.p, cfg.beta_naive, &spec, cfg.grid).map_err(|e| match e {
        Error::InvalidArgument { name, reason } => Error::config(format!("convexify.{name}"), reason),
        other => other,
    })?;
    finite(tables.left.iter().chain(&tables.right).copied(), "level-set tables")?;
    w.put("fig1_left.csv", &tables.to_csv(false))?;
    w.put("fig1_right.csv", &tables.to_csv(true))?;
    Ok((EXIT_OK, format!("{0}x{0} grid written", tables.axis.len())))
}

#[derive(Serialize)]
struct BallMassRecord {
    delta: f64,
    #[serde(flatten)]
    estimate: BallMassEstimate,
}

fn cmd_sample(config: &ExperimentConfig, w: &mut Writer) -> Result<(i32, String)> {
    let prior = config.prior()?;
    let g = DiagonalGaussian::from_prior(&prior);
    let seed = config.run.seed;
    if config.run.samples == 0 {
        return Err(Error::config("run.samples", "sample count must be >= 1"));
    }
    let batch = sample(&g, config.run.samples, seed)?;
    if wants(config, "csv") {
        let k = prior.dim();
        let mut csv = (1..=k).map(|j| format!("x{j}")).collect::<Vec<_>>().join(",");
        csv.push('\n');
        for p in &batch.points {
            let row: Vec<String> = p.coords().iter().map(|v| csv_float(*v)).collect();
            csv.push_str(&row.join(","));
            csv.push('\n');
        }
        w.put("samples.csv", &csv)?;
    }
    if wants(config, "json") {
        w.put("samples.json", &to_json_pretty(&batch)?)?;
    }
    let origin = Point::zeros(prior.dim());
    let schedule = config.schedule()?;
    let masses = schedule
        .deltas()
        .iter()
        .enumerate()
        .map(|(i, &delta)| {
            let q = BallQuery::new(origin.clone(), delta, prior.p())?;
            let estimate = ball_mass(&g, &q, config.run.n_samples, derive_seed(seed, i as u64 + 1))?;
            Ok(BallMassRecord { delta, estimate })
        })
        .collect::<Result<Vec<_>>>()?;
    w.put("ball_mass.jsonl", &to_json_lines(&masses)?)?;
    Ok((EXIT_OK, format!("{} prior draws written", batch.count)))
}
