//! Experiment configuration: JSON with unknown keys rejected, re-validated
//! into the numerical types with field-path error messages.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::amf::{AmfOptions, DeltaSchedule, VanishingScenario};
use crate::convexify::ConvexifySpec;
use crate::error::{Error, Result};
use crate::inverse::{ForwardModel, Potential};
use crate::sequence::{Point, PriorSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub prior: PriorConfig,
    #[serde(default)]
    pub forward: ForwardConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub convexify: Option<ConvexifyConfig>,
    #[serde(default)]
    pub verify: VerifyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub p: f64,
    #[serde(default)]
    pub sigmas: Option<Vec<f64>>,
    #[serde(default)]
    pub sigma_law: Option<SigmaLaw>,
}

/// σ_j = c · j^{−s}, j = 1..k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaLaw {
    pub c: f64,
    pub s: f64,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForwardConfig {
    /// Φ ≡ 0.
    #[default]
    Zero,
    Linear {
        /// Row-major d×k matrix.
        matrix: Vec<Vec<f64>>,
        data: Vec<f64>,
        /// Defaults to the identity.
        #[serde(default)]
        noise_prec_sqrt: Option<Vec<Vec<f64>>>,
    },
    /// A model registered by name in the host program.
    User {
        name: String,
        data: Vec<f64>,
        #[serde(default)]
        noise_prec_sqrt: Option<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub n_samples: usize,
    pub deltas: Option<Vec<f64>>,
    pub eps: Option<Vec<f64>>,
    pub tolerances: Tolerances,
    /// Starting point of the OM minimization; the origin when absent.
    pub x0: Option<Vec<f64>>,
    pub candidates: usize,
    pub lipschitz_trials: usize,
    /// Number of prior draws written by the `sample` command.
    pub samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            n_samples: 100_000,
            deltas: None,
            eps: None,
            tolerances: Tolerances::default(),
            x0: None,
            candidates: 32,
            lipschitz_trials: 2_000,
            samples: 1_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Gradient-norm tolerance of the OM minimization.
    pub om_grad: f64,
    pub max_iter: usize,
    /// Final relative error allowed in the small-ball limit check.
    pub om_limit_rel: f64,
    /// Optional cap on the final AMF distance to the OM minimizer.
    pub final_distance: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            om_grad: 1e-10,
            max_iter: 1_000,
            om_limit_rel: 0.02,
            final_distance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: PathBuf::from("out"),
            formats: vec!["json".into(), "csv".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvexifyConfig {
    pub p: f64,
    pub rho: Vec<f64>,
    pub gamma: f64,
    pub beta: f64,
    /// β of the naive penalty in the left panel.
    #[serde(default = "default_beta_naive")]
    pub beta_naive: f64,
    #[serde(default = "default_grid")]
    pub grid: usize,
}

fn default_beta_naive() -> f64 {
    0.5
}

fn default_grid() -> usize {
    201
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub om_limit: OmLimitConfig,
    pub bounds_queries: usize,
    pub anderson_queries: usize,
    pub convexity_trials: usize,
    pub vanishing: VanishingConfig,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            om_limit: OmLimitConfig::default(),
            bounds_queries: 100,
            anderson_queries: 50,
            convexity_trials: 100_000,
            vanishing: VanishingConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OmLimitConfig {
    /// Defaults to the origin.
    pub z1: Option<Vec<f64>>,
    /// Defaults to the OM minimizer.
    pub z2: Option<Vec<f64>>,
    pub deltas: Vec<f64>,
}

impl Default for OmLimitConfig {
    fn default() -> Self {
        OmLimitConfig {
            z1: None,
            z2: None,
            deltas: vec![0.1, 0.05, 0.025],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VanishingConfig {
    pub scenarios: Vec<VanishingScenario>,
    pub amplitude: f64,
    pub direction: Option<Vec<f64>>,
}

impl Default for VanishingConfig {
    fn default() -> Self {
        VanishingConfig {
            scenarios: vec![
                VanishingScenario::Unbounded,
                VanishingScenario::OutsideEProxy,
                VanishingScenario::WeakNotStrongProxy,
            ],
            amplitude: 1.0,
            direction: None,
        }
    }
}

/// Constructor for a user forward model of input dimension k.
pub type ForwardFactory = Arc<dyn Fn(usize) -> ForwardModel + Send + Sync>;

/// Named user forward models available to configs.
#[derive(Clone, Default)]
pub struct ForwardRegistry {
    entries: Vec<(String, ForwardFactory)>,
}

impl ForwardRegistry {
    /// Registry holding the built-in `cubic` model G(u)_j = u_j + u_j³.
    pub fn with_builtins() -> Self {
        let mut r = ForwardRegistry::default();
        r.register(
            "cubic",
            Arc::new(|k| {
                ForwardModel::user(
                    "cubic",
                    k,
                    k,
                    Arc::new(|u: &[f64]| u.iter().map(|x| x + x * x * x).collect()),
                    Some(Arc::new(|u: &[f64]| {
                        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                            u.len(),
                            u.iter().map(|x| 1.0 + 3.0 * x * x),
                        ))
                    })),
                )
            }),
        );
        r
    }

    pub fn register(&mut self, name: impl Into<String>, factory: ForwardFactory) {
        let name = name.into();
        self.entries.retain(|(n, _)| *n != name);
        self.entries.push((name, factory));
    }

    pub fn get(&self, name: &str) -> Option<&ForwardFactory> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, f)| f)
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|(n, _)| n.as_str()).collect()
    }
}

/// Parses a config document; syntax and unknown-key errors carry the JSON path.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(if path == "." { String::new() } else { path }, e.into_inner().to_string())
    })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::config("", format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

/// Rewrites argument errors of a constructor as config errors under `prefix`.
fn at(prefix: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::InvalidArgument { name, reason } => {
            let path = if name.is_empty() { prefix.to_string() } else { format!("{prefix}.{name}") };
            Error::config(path, reason)
        }
        Error::DimensionMismatch { expected, actual } => {
            Error::config(prefix, format!("dimension mismatch: expected {expected}, got {actual}"))
        }
        Error::Config { .. } | Error::NonFinite(_) => e,
        other => Error::config(prefix, other.to_string()),
    }
}

fn matrix(rows: &[Vec<f64>], path: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::config(path, "rows must have equal length"));
    }
    Ok(DMatrix::from_row_iterator(n, m, rows.iter().flatten().copied()))
}

impl ExperimentConfig {
    pub fn prior(&self) -> Result<PriorSpec> {
        let pc = &self.prior;
        match (&pc.sigmas, &pc.sigma_law) {
            (Some(s), None) => PriorSpec::new(pc.p, s.clone()).map_err(at("prior")),
            (None, Some(l)) => PriorSpec::from_decay_law(pc.p, l.c, l.s, l.k).map_err(|e| match e {
                Error::InvalidArgument { name: "p", .. } => at("prior")(e),
                other => at("prior.sigma_law")(other),
            }),
            _ => Err(Error::config("prior", "exactly one of `sigmas` or `sigma_law` is required")),
        }
    }

    pub fn potential(&self, registry: &ForwardRegistry) -> Result<Potential> {
        let k = self.prior()?.dim();
        let noise = |m: &Option<Vec<Vec<f64>>>, d: usize| -> Result<DMatrix<f64>> {
            match m {
                Some(rows) => matrix(rows, "forward.noise_prec_sqrt"),
                None => Ok(DMatrix::identity(d, d)),
            }
        };
        match &self.forward {
            ForwardConfig::Zero => Ok(Potential::zero(k)),
            ForwardConfig::Linear {
                matrix: rows,
                data,
                noise_prec_sqrt,
            } => {
                let a = matrix(rows, "forward.matrix")?;
                if a.ncols() != k {
                    return Err(Error::config(
                        "forward.matrix",
                        format!("expected {k} columns to match the prior, got {}", a.ncols()),
                    ));
                }
                if data.len() != a.nrows() {
                    return Err(Error::config(
                        "forward.data",
                        format!("expected {} observations, got {}", a.nrows(), data.len()),
                    ));
                }
                let w = noise(noise_prec_sqrt, a.nrows())?;
                let fwd = ForwardModel::linear(a).map_err(at("forward.matrix"))?;
                Potential::new(fwd, data.clone(), w).map_err(at("forward"))
            }
            ForwardConfig::User {
                name,
                data,
                noise_prec_sqrt,
            } => {
                let factory = registry.get(name).ok_or_else(|| {
                    Error::config(
                        "forward.name",
                        format!("unknown model `{name}`; registered: {}", registry.names().join(", ")),
                    )
                })?;
                let fwd = factory(k);
                if data.len() != fwd.output_dim() {
                    return Err(Error::config(
                        "forward.data",
                        format!("expected {} observations, got {}", fwd.output_dim(), data.len()),
                    ));
                }
                let w = noise(noise_prec_sqrt, fwd.output_dim())?;
                Potential::new(fwd, data.clone(), w).map_err(at("forward"))
            }
        }
    }

    pub fn schedule(&self) -> Result<DeltaSchedule> {
        let run = &self.run;
        match (&run.deltas, &run.eps) {
            (None, None) => Ok(DeltaSchedule::default()),
            (Some(d), None) => DeltaSchedule::new(d.clone(), d.clone()).map_err(at("run")),
            (Some(d), Some(e)) => DeltaSchedule::new(d.clone(), e.clone()).map_err(at("run")),
            (None, Some(_)) => Err(Error::config("run.deltas", "`eps` given without `deltas`")),
        }
    }

    pub fn amf_options(&self) -> AmfOptions {
        AmfOptions {
            n_samples: self.run.n_samples,
            candidates: self.run.candidates,
            lipschitz_trials: self.run.lipschitz_trials,
        }
    }

    pub fn convexify_spec(&self) -> Result<Option<(ConvexifySpec, &ConvexifyConfig)>> {
        self.convexify
            .as_ref()
            .map(|c| {
                ConvexifySpec::new(c.p, c.rho.clone(), c.gamma, c.beta)
                    .map_err(at("convexify"))
                    .map(|s| (s, c))
            })
            .transpose()
    }

    pub fn x0(&self, k: usize) -> Result<Point> {
        match &self.run.x0 {
            None => Ok(Point::zeros(k)),
            Some(v) if v.len() == k => Ok(Point::new(v.clone())),
            Some(v) => Err(Error::config("run.x0", format!("expected {k} entries, got {}", v.len()))),
        }
    }

    /// Full validation of every section, run once at load.
    pub fn validate(&self, registry: &ForwardRegistry) -> Result<()> {
        let prior = self.prior()?;
        self.potential(registry)?;
        self.schedule()?;
        self.convexify_spec()?;
        self.x0(prior.dim())?;
        if self.run.n_samples < crate::smallball::MIN_SAMPLES {
            return Err(Error::config(
                "run.n_samples",
                format!("at least {} samples required", crate::smallball::MIN_SAMPLES),
            ));
        }
        let t = &self.run.tolerances;
        if !(t.om_grad.is_finite() && t.om_grad > 0.0) {
            return Err(Error::config("run.tolerances.om_grad", "must be positive"));
        }
        if !(t.om_limit_rel.is_finite() && t.om_limit_rel > 0.0) {
            return Err(Error::config("run.tolerances.om_limit_rel", "must be positive"));
        }
        for f in &self.output.formats {
            if !matches!(f.as_str(), "json" | "csv") {
                return Err(Error::config("output.formats", format!("unsupported format `{f}`")));
            }
        }
        let ol = &self.verify.om_limit;
        if ol.deltas.is_empty() || ol.deltas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::config("verify.om_limit.deltas", "radii must be strictly decreasing"));
        }
        for (name, z) in [("z1", &ol.z1), ("z2", &ol.z2)] {
            if let Some(z) = z {
                if z.len() != prior.dim() {
                    return Err(Error::config(
                        format!("verify.om_limit.{name}"),
                        format!("expected {} entries, got {}", prior.dim(), z.len()),
                    ));
                }
            }
        }
        Ok(())
    }
}
