//! Forward models, the Gaussian misfit potential Φ and the Onsager–Machlup
//! functional I(u) = Φ(u) + ½|u|_E².

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::{self, derive_seed};
use crate::sequence::{cm_norm_sq_fast, lp_norm_fast, Point, PriorSpec};
use crate::smallball::uniform_lp_ball;

pub type MapFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

#[derive(Clone)]
pub enum ForwardKind {
    Linear(DMatrix<f64>),
    User {
        name: String,
        map: MapFn,
        jacobian: Option<JacobianFn>,
    },
}

/// The forward map G: ℝ^k → ℝ^d.
#[derive(Clone)]
pub struct ForwardModel {
    kind: ForwardKind,
    input_dim: usize,
    output_dim: usize,
}

impl fmt::Debug for ForwardModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            ForwardKind::Linear(_) => "linear".to_string(),
            ForwardKind::User { name, .. } => format!("user({name})"),
        };
        f.debug_struct("ForwardModel")
            .field("kind", &kind)
            .field("input_dim", &self.input_dim)
            .field("output_dim", &self.output_dim)
            .finish()
    }
}

impl ForwardModel {
    pub fn linear(a: DMatrix<f64>) -> Result<Self> {
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("forward matrix".into()));
        }
        Ok(ForwardModel {
            input_dim: a.ncols(),
            output_dim: a.nrows(),
            kind: ForwardKind::Linear(a),
        })
    }

    /// A user-supplied map. Without a Jacobian, derivatives fall back to
    /// central differences.
    pub fn user(
        name: impl Into<String>,
        input_dim: usize,
        output_dim: usize,
        map: MapFn,
        jacobian: Option<JacobianFn>,
    ) -> Self {
        ForwardModel {
            kind: ForwardKind::User {
                name: name.into(),
                map,
                jacobian,
            },
            input_dim,
            output_dim,
        }
    }

    pub fn kind(&self) -> &ForwardKind {
        &self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn matrix(&self) -> Option<&DMatrix<f64>> {
        match &self.kind {
            ForwardKind::Linear(a) => Some(a),
            ForwardKind::User { .. } => None,
        }
    }

    pub fn has_jacobian(&self) -> bool {
        match &self.kind {
            ForwardKind::Linear(_) => true,
            ForwardKind::User { jacobian, .. } => jacobian.is_some(),
        }
    }

    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim, u.len())?;
        let out = self.apply_unchecked(u);
        check_dim(self.output_dim, out.len())?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("forward map output".into()));
        }
        Ok(out)
    }

    fn apply_unchecked(&self, u: &[f64]) -> Vec<f64> {
        match &self.kind {
            ForwardKind::Linear(a) => (a * DVector::from_column_slice(u)).as_slice().to_vec(),
            ForwardKind::User { map, .. } => map(u),
        }
    }

    /// d×k derivative at `u`: analytic when available, otherwise central
    /// differences with step 1e−6·(1 + ‖u‖_∞).
    pub fn jacobian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        check_dim(self.input_dim, u.len())?;
        match &self.kind {
            ForwardKind::Linear(a) => Ok(a.clone()),
            ForwardKind::User {
                jacobian: Some(j), ..
            } => {
                let m = j(u);
                if m.nrows() != self.output_dim || m.ncols() != self.input_dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.output_dim * self.input_dim,
                        actual: m.nrows() * m.ncols(),
                    });
                }
                Ok(m)
            }
            ForwardKind::User { .. } => {
                let h = 1e-6 * (1.0 + u.iter().fold(0.0f64, |m, v| m.max(v.abs())));
                let mut m = DMatrix::zeros(self.output_dim, self.input_dim);
                let mut x = u.to_vec();
                for j in 0..self.input_dim {
                    x[j] = u[j] + h;
                    let plus = self.apply(&x)?;
                    x[j] = u[j] - h;
                    let minus = self.apply(&x)?;
                    x[j] = u[j];
                    for i in 0..self.output_dim {
                        m[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
                    }
                }
                Ok(m)
            }
        }
    }
}

/// Gaussian misfit Φ(u) = ½‖Γ^{−1/2}(y − G(u))‖² − offset, normalised so
/// that Φ(0) = 0. The raw misfit is non-negative, so Φ ≥ M = −offset.
#[derive(Debug, Clone)]
pub struct Potential {
    forward: ForwardModel,
    data: DVector<f64>,
    noise_prec_sqrt: DMatrix<f64>,
    offset: f64,
    // Γ^{−1/2}A and Γ^{−1/2}y for linear models
    whitened: Option<(DMatrix<f64>, DVector<f64>)>,
}

impl Potential {
    pub fn new(forward: ForwardModel, data: Vec<f64>, noise_prec_sqrt: DMatrix<f64>) -> Result<Self> {
        let d = forward.output_dim();
        check_dim(d, data.len())?;
        if noise_prec_sqrt.nrows() != d || noise_prec_sqrt.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                actual: noise_prec_sqrt.nrows() * noise_prec_sqrt.ncols(),
            });
        }
        if data.iter().chain(noise_prec_sqrt.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("observation data or noise matrix".into()));
        }
        let scale = noise_prec_sqrt.amax().max(f64::MIN_POSITIVE);
        if (&noise_prec_sqrt - noise_prec_sqrt.transpose()).amax() > 1e-12 * scale {
            return Err(Error::invalid("noise_prec_sqrt", "matrix must be symmetric"));
        }
        if d > 0 && noise_prec_sqrt.clone().cholesky().is_none() {
            return Err(Error::invalid("noise_prec_sqrt", "matrix must be positive definite"));
        }
        let data = DVector::from_vec(data);
        let whitened = forward
            .matrix()
            .map(|a| (&noise_prec_sqrt * a, &noise_prec_sqrt * &data));
        let mut pot = Potential {
            forward,
            data,
            noise_prec_sqrt,
            offset: 0.0,
            whitened,
        };
        pot.offset = pot.raw_misfit(&vec![0.0; pot.input_dim()]);
        if !pot.offset.is_finite() {
            return Err(Error::NonFinite("misfit at the origin".into()));
        }
        Ok(pot)
    }

    /// Linear model with identity noise.
    pub fn linear_identity_noise(a: DMatrix<f64>, data: Vec<f64>) -> Result<Self> {
        let d = a.nrows();
        Potential::new(ForwardModel::linear(a)?, data, DMatrix::identity(d, d))
    }

    /// Φ ≡ 0 on ℝ^k.
    pub fn zero(k: usize) -> Self {
        Potential::new(
            ForwardModel::linear(DMatrix::zeros(0, k)).expect("finite"),
            Vec::new(),
            DMatrix::zeros(0, 0),
        )
        .expect("valid empty potential")
    }

    pub fn forward(&self) -> &ForwardModel {
        &self.forward
    }

    pub fn data(&self) -> &[f64] {
        self.data.as_slice()
    }

    pub fn noise_prec_sqrt(&self) -> &DMatrix<f64> {
        &self.noise_prec_sqrt
    }

    pub fn input_dim(&self) -> usize {
        self.forward.input_dim()
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// The global lower bound M = −offset.
    pub fn lower_bound(&self) -> f64 {
        -self.offset
    }

    fn raw_misfit(&self, u: &[f64]) -> f64 {
        if let Some((b, wy)) = &self.whitened {
            // allocation-free path for sampling loops
            let mut acc = 0.0;
            for i in 0..b.nrows() {
                let mut r = wy[i];
                for (j, uj) in u.iter().enumerate() {
                    r -= b[(i, j)] * uj;
                }
                acc += r * r;
            }
            return 0.5 * acc;
        }
        0.5 * self.residual(u).norm_squared()
    }

    /// Whitened residual Γ^{−1/2}(y − G(u)).
    fn residual(&self, u: &[f64]) -> DVector<f64> {
        match &self.whitened {
            Some((b, wy)) => wy - b * DVector::from_column_slice(u),
            None => {
                let g = DVector::from_vec(self.forward.apply_unchecked(u));
                &self.noise_prec_sqrt * (&self.data - g)
            }
        }
    }

    pub fn phi(&self, u: &[f64]) -> Result<f64> {
        check_dim(self.input_dim(), u.len())?;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("argument of the potential".into()));
        }
        if self.whitened.is_none() {
            self.forward.apply(u)?;
        }
        let v = self.phi_unchecked(u);
        if !v.is_finite() {
            return Err(Error::NonFinite("potential value".into()));
        }
        Ok(v)
    }

    /// Φ without validation, for sampling loops.
    pub(crate) fn phi_unchecked(&self, u: &[f64]) -> f64 {
        self.raw_misfit(u) - self.offset
    }

    /// ∇Φ(u) = −J(u)ᵀ Γ^{−1/2} Γ^{−1/2}(y − G(u)).
    pub fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), u.len())?;
        let g = match &self.whitened {
            Some((b, _)) => -(b.transpose() * self.residual(u)),
            None => {
                let r = self.noise_prec_sqrt.transpose() * self.residual(u);
                -(self.forward.jacobian(u)?.transpose() * r)
            }
        };
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("potential gradient".into()));
        }
        Ok(g.as_slice().to_vec())
    }

    /// Empirical lower estimate of the local Lipschitz constant L(r) in the
    /// ℓ^p norm.
    ///
    /// Pairs are drawn uniformly from balls on the fixed radius grid
    /// 2^{j/8}, each level with its own seeded stream; the estimate is the
    /// largest difference quotient over all levels ≤ r. Nested levels make the
    /// estimate non-decreasing in r for a fixed seed.
    pub fn lipschitz_estimate(&self, p: f64, r: f64, trials: usize, seed: u64) -> Result<f64> {
        self.graded_max(p, r, trials, seed, LIPSCHITZ_TAG, |pot, u1, u2, p| {
            let d = lp_norm_fast(&sub(u1, u2), p);
            if d == 0.0 {
                return 0.0;
            }
            (pot.phi_unchecked(u1) - pot.phi_unchecked(u2)).abs() / d
        })
    }

    /// Empirical lower estimate of K(r) = sup_{‖u‖_p < r} Φ(u), on the same
    /// radius grid as [`Potential::lipschitz_estimate`].
    pub fn upper_bound_estimate(&self, p: f64, r: f64, trials: usize, seed: u64) -> Result<f64> {
        self.graded_max(p, r, trials, seed, UPPER_TAG, |pot, u1, u2, _| {
            pot.phi_unchecked(u1).max(pot.phi_unchecked(u2))
        })
    }

    fn graded_max<F>(&self, p: f64, r: f64, trials: usize, seed: u64, tag: u64, stat: F) -> Result<f64>
    where
        F: Fn(&Potential, &[f64], &[f64], f64) -> f64 + Sync,
    {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::invalid("r", format!("radius must be positive, got {r}")));
        }
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::invalid("p", format!("exponent must be >= 1, got {p}")));
        }
        let k = self.input_dim();
        if k == 0 || trials == 0 {
            return Ok(0.0);
        }
        let top = (8.0 * r.log2()).floor().max(GRID_MIN as f64) as i64;
        let best = (GRID_MIN..=top)
            .into_par_iter()
            .map(|j| {
                let radius = 2f64.powf(j as f64 / 8.0);
                let level_seed = derive_seed(seed ^ tag, (j - GRID_MIN) as u64);
                let mut u1 = vec![0.0; k];
                let mut u2 = vec![0.0; k];
                let mut m = 0.0f64;
                for t in 0..trials {
                    let mut g = rng::stream(level_seed, t as u64);
                    uniform_lp_ball(&mut g, p, radius, &mut u1);
                    uniform_lp_ball(&mut g, p, radius, &mut u2);
                    let v = stat(self, &u1, &u2, p);
                    if v.is_finite() {
                        m = m.max(v);
                    }
                }
                m
            })
            .reduce(|| 0.0, f64::max);
        Ok(best)
    }
}

const GRID_MIN: i64 = -80;
const LIPSCHITZ_TAG: u64 = 0x4c69_7073;
const UPPER_TAG: u64 = 0x5570_7072;

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// I(u) = Φ(u) + ½|u|_E².
pub fn om_value(pot: &Potential, prior: &PriorSpec, u: &[f64]) -> Result<f64> {
    check_dim(prior.dim(), u.len())?;
    Ok(pot.phi(u)? + 0.5 * cm_norm_sq_fast(u, prior.sigmas()))
}

/// ∇I(u) = ∇Φ(u) + C^{−1}u.
pub fn om_gradient(pot: &Potential, prior: &PriorSpec, u: &[f64]) -> Result<Vec<f64>> {
    check_dim(prior.dim(), u.len())?;
    let mut g = pot.gradient(u)?;
    for ((gi, ui), s) in g.iter_mut().zip(u).zip(prior.sigmas()) {
        *gi += ui / (s * s);
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmResult {
    pub minimizer: Point,
    pub value: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

const LBFGS_MEMORY: usize = 8;
const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// Local minimisation of I by limited-memory BFGS with Armijo backtracking.
///
/// Stops once ‖∇I‖₂ ≤ tol or after `max_iter` iterations; non-convergence is
/// reported through the flag. A non-finite objective at the start is an error.
pub fn minimize_om(pot: &Potential, prior: &PriorSpec, x0: &Point, tol: f64, max_iter: usize) -> Result<OmResult> {
    check_dim(prior.dim(), pot.input_dim())?;
    check_dim(prior.dim(), x0.dim())?;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::invalid("tol", format!("tolerance must be positive, got {tol}")));
    }
    let objective = |u: &[f64]| -> Option<(f64, Vec<f64>)> {
        let v = om_value(pot, prior, u).ok()?;
        let g = om_gradient(pot, prior, u).ok()?;
        Some((v, g))
    };
    let mut x = x0.coords().to_vec();
    let (mut f, mut g) = objective(&x).ok_or_else(|| Error::NonFinite("objective at the starting point".into()))?;
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut iterations = 0;
    let mut gnorm = norm2(&g);
    while gnorm > tol && iterations < max_iter {
        iterations += 1;
        let mut dir = two_loop(&g, &s_hist, &y_hist);
        if dot(&dir, &g) >= 0.0 {
            s_hist.clear();
            y_hist.clear();
            dir = g.iter().map(|v| -v).collect();
        }
        let Some((x_new, f_new, g_new)) = line_search(&objective, &x, f, &g, &dir).or_else(|| {
            // fall back to steepest descent with a fresh memory
            let sd: Vec<f64> = g.iter().map(|v| -v / gnorm.max(1.0)).collect();
            line_search(&objective, &x, f, &g, &sd)
        }) else {
            break;
        };
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        if dot(&s, &y) > 1e-12 * norm2(&s) * norm2(&y) {
            if s_hist.len() == LBFGS_MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
        }
        x = x_new;
        f = f_new;
        g = g_new;
        gnorm = norm2(&g);
    }
    Ok(OmResult {
        minimizer: Point::new(x),
        value: f,
        iterations,
        grad_norm: gnorm,
        converged: gnorm <= tol,
    })
}

type Objective<'a> = dyn Fn(&[f64]) -> Option<(f64, Vec<f64>)> + 'a;

fn line_search(
    objective: &Objective<'_>,
    x: &[f64],
    f: f64,
    g: &[f64],
    dir: &[f64],
) -> Option<(Vec<f64>, f64, Vec<f64>)> {
    let slope = dot(g, dir);
    if slope >= 0.0 {
        return None;
    }
    // Once the predicted decrease drops below the rounding level of f, the
    // Armijo test cannot tell steps apart; require a smaller gradient instead.
    let resolution = 16.0 * f64::EPSILON * (1.0 + f.abs());
    let gnorm = norm2(g);
    let mut step = 1.0;
    for _ in 0..MAX_BACKTRACKS {
        let trial: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + step * d).collect();
        if let Some((ft, gt)) = objective(&trial) {
            let decrease = -ARMIJO_C1 * step * slope;
            let accept = if decrease > resolution {
                ft <= f - decrease
            } else {
                ft <= f + resolution && norm2(&gt) < gnorm
            };
            if ft.is_finite() && accept {
                return Some((trial, ft, gt));
            }
        }
        step *= 0.5;
    }
    None
}

fn two_loop(g: &[f64], s_hist: &[Vec<f64>], y_hist: &[Vec<f64>]) -> Vec<f64> {
    let mut q = g.to_vec();
    let m = s_hist.len();
    let mut alpha = vec![0.0; m];
    for i in (0..m).rev() {
        let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
        alpha[i] = rho * dot(&s_hist[i], &q);
        for (qj, yj) in q.iter_mut().zip(&y_hist[i]) {
            *qj -= alpha[i] * yj;
        }
    }
    if let (Some(s), Some(y)) = (s_hist.last(), y_hist.last()) {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for i in 0..m {
        let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
        let beta = rho * dot(&y_hist[i], &q);
        for (qj, sj) in q.iter_mut().zip(&s_hist[i]) {
            *qj += (alpha[i] - beta) * sj;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Closed-form minimiser of I for a linear model:
/// (AᵀΓ^{−1}A + C^{−1}) u = AᵀΓ^{−1} y.
pub fn tikhonov_solution(pot: &Potential, prior: &PriorSpec) -> Result<Point> {
    let a = pot
        .forward()
        .matrix()
        .ok_or_else(|| Error::invalid("forward", "closed form needs a linear model"))?;
    check_dim(prior.dim(), a.ncols())?;
    let w = pot.noise_prec_sqrt();
    let b = w * a;
    let mut h = b.transpose() * &b;
    for (j, s) in prior.sigmas().iter().enumerate() {
        h[(j, j)] += 1.0 / (s * s);
    }
    let rhs = b.transpose() * (w * DVector::from_column_slice(pot.data()));
    let chol = h
        .cholesky()
        .ok_or_else(|| Error::NonFinite("normal equations are not positive definite".into()))?;
    Ok(Point::new(chol.solve(&rhs).as_slice().to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_problem() -> (Potential, PriorSpec) {
        let pot = Potential::linear_identity_noise(DMatrix::from_element(1, 1, 1.0), vec![2.0]).unwrap();
        (pot, PriorSpec::new(2.0, vec![1.0]).unwrap())
    }

    #[test]
    fn phi_vanishes_at_origin_and_matches_identity_example() {
        let pot = Potential::linear_identity_noise(DMatrix::identity(2, 2), vec![0.0, 0.0]).unwrap();
        assert_eq!(pot.phi(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(pot.phi(&[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(pot.offset(), 0.0);
        let (s, _) = scalar_problem();
        assert_eq!(s.phi(&[0.0]).unwrap(), 0.0);
        assert_eq!(s.offset(), 2.0);
        // Φ(u) = ½(2 − u)² − 2
        assert!((s.phi(&[1.0]).unwrap() + 1.5).abs() < 1e-15);
    }

    #[test]
    fn noise_scaling_is_quadratic() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.3, 2.0]);
        let y = vec![0.7, -1.1];
        let p1 = Potential::new(ForwardModel::linear(a.clone()).unwrap(), y.clone(), DMatrix::identity(2, 2)).unwrap();
        let p3 = Potential::new(ForwardModel::linear(a).unwrap(), y, DMatrix::identity(2, 2) * 3.0).unwrap();
        let u = [0.4, -0.9];
        let raw1 = p1.phi(&u).unwrap() + p1.offset();
        let raw3 = p3.phi(&u).unwrap() + p3.offset();
        assert!((raw3 - 9.0 * raw1).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = DMatrix::identity(2, 2);
        let nonsym = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 1.0]);
        assert!(Potential::new(ForwardModel::linear(a.clone()).unwrap(), vec![0.0; 2], nonsym).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(Potential::new(ForwardModel::linear(a.clone()).unwrap(), vec![0.0; 2], indefinite).is_err());
        assert!(Potential::new(ForwardModel::linear(a).unwrap(), vec![0.0; 3], DMatrix::identity(2, 2)).is_err());
        let (pot, _) = scalar_problem();
        assert!(matches!(pot.phi(&[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
        let bad = ForwardModel::user("blowup", 1, 1, Arc::new(|u: &[f64]| vec![1.0 / u[0]]), None);
        let pot = Potential::new(bad, vec![1.0], DMatrix::identity(1, 1));
        assert!(pot.is_err());
    }

    #[test]
    fn finite_difference_jacobian_matches_linear() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, -2.0, 0.5, 0.3, 0.0, 4.0]);
        let a2 = a.clone();
        let user = ForwardModel::user(
            "lin",
            3,
            2,
            Arc::new(move |u: &[f64]| (&a2 * DVector::from_column_slice(u)).as_slice().to_vec()),
            None,
        );
        let j = user.jacobian(&[0.3, -1.0, 2.0]).unwrap();
        assert!((j - a).amax() < 1e-8);
    }

    #[test]
    fn zero_potential() {
        let z = Potential::zero(3);
        assert_eq!(z.phi(&[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(z.gradient(&[1.0, 2.0, 3.0]).unwrap(), vec![0.0; 3]);
        assert_eq!(z.lipschitz_estimate(2.0, 1.0, 100, 0).unwrap(), 0.0);
        let prior = PriorSpec::new(2.0, vec![1.0, 0.5, 0.25]).unwrap();
        let r = minimize_om(&z, &prior, &Point::new(vec![1.0, -1.0, 2.0]), 1e-10, 200).unwrap();
        assert!(r.converged);
        assert!(r.minimizer.iter().all(|v| v.abs() < 1e-10));
        assert!(r.value.abs() < 1e-18);
    }

    #[test]
    fn scalar_map_is_one() {
        let (pot, prior) = scalar_problem();
        let r = minimize_om(&pot, &prior, &Point::zeros(1), 1e-12, 100).unwrap();
        assert!(r.converged);
        assert!((r.minimizer[0] - 1.0).abs() < 1e-12);
        assert!((r.value + 1.0).abs() < 1e-12);
        assert!((tikhonov_solution(&pot, &prior).unwrap()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nonconvergence_is_flagged_not_raised() {
        let (pot, prior) = scalar_problem();
        let r = minimize_om(&pot, &prior, &Point::new(vec![50.0]), 1e-12, 0).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn lipschitz_estimate_is_monotone_and_bounded() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.5]);
        let pot = Potential::linear_identity_noise(a.clone(), vec![0.0, 0.0]).unwrap();
        let op = a.singular_values().max();
        let mut last = 0.0;
        for r in [0.1, 0.5, 1.0, 2.0] {
            let est = pot.lipschitz_estimate(2.0, r, 200, 5).unwrap();
            assert!(est >= last);
            assert!(est <= op * op * r);
            last = est;
        }
        assert!(last > 0.3 * op * op * 2.0);
    }
}
