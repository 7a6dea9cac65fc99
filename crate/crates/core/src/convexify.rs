//! The convexified surrogate L_{ρ,γ} of ‖x‖_p^α, the function
//! f_{ρ,β,γ}(x) = Σ x_j²/ρ_j² − β L_{ρ,γ}(x), and randomized certificates for
//! its convexity and non-negativity.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::rng;
use crate::sequence::{lp_norm_fast, lp_norm_pow_fast};

/// Absolute slack for convexity and non-negativity gaps.
pub const CERTIFICATE_TOL: f64 = 1e-9;
/// Relative slack for the sandwich inequality.
pub const SANDWICH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexifySpec {
    p: f64,
    rho: Vec<f64>,
    gamma: f64,
    beta: f64,
}

impl ConvexifySpec {
    pub fn new(p: f64, rho: Vec<f64>, gamma: f64, beta: f64) -> Result<Self> {
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::invalid("p", format!("exponent must be finite and >= 1, got {p}")));
        }
        if rho.is_empty() {
            return Err(Error::invalid("rho", "at least one scale is required"));
        }
        if rho.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::invalid("rho", "scales must be finite and positive"));
        }
        if rho.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::invalid("rho", "scales must be non-increasing"));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::invalid("gamma", format!("must be positive, got {gamma}")));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::invalid("beta", format!("must be non-negative, got {beta}")));
        }
        Ok(ConvexifySpec { p, rho, gamma, beta })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.rho.len()
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        ConvexifySpec::new(self.p, self.rho.clone(), self.gamma, beta)
    }

    fn alpha(&self) -> f64 {
        self.p.min(2.0)
    }

    /// True when β lies strictly below the guaranteed threshold β*.
    pub fn is_admissible(&self) -> bool {
        self.beta < beta_star(self)
    }
}

/// β* = 2γ^{2−α} / (q ρ_1^α) with α = min(p, 2) and q = max(p, 2(p−1)²).
pub fn beta_star(spec: &ConvexifySpec) -> f64 {
    let p = spec.p;
    let alpha = spec.alpha();
    let q = p.max(2.0 * (p - 1.0).powi(2));
    2.0 * spec.gamma.powf(2.0 - alpha) / (q * spec.rho[0].powf(alpha))
}

pub fn big_l(spec: &ConvexifySpec, x: &[f64]) -> Result<f64> {
    check_dim(spec.dim(), x.len())?;
    Ok(big_l_fast(spec, x))
}

fn big_l_fast(spec: &ConvexifySpec, x: &[f64]) -> f64 {
    let p = spec.p;
    if p <= 2.0 {
        // (τ² + x²)^{p/2} − τ^p = τ^p · expm1((p/2) ln(1 + (x/τ)²))
        x.iter()
            .zip(&spec.rho)
            .map(|(xj, r)| {
                let tau = spec.gamma * r;
                let t = xj / tau;
                tau.powf(p) * (0.5 * p * (t * t).ln_1p()).exp_m1()
            })
            .sum()
    } else {
        let n = lp_norm_fast(x, p);
        n * n
    }
}

pub fn big_f(spec: &ConvexifySpec, x: &[f64]) -> Result<f64> {
    check_dim(spec.dim(), x.len())?;
    Ok(big_f_fast(spec, x))
}

fn big_f_fast(spec: &ConvexifySpec, x: &[f64]) -> f64 {
    let quad: f64 = x.iter().zip(&spec.rho).map(|(xj, r)| (xj / r).powi(2)).sum();
    if spec.beta == 0.0 {
        return quad;
    }
    quad - spec.beta * big_l_fast(spec, x)
}

/// Checks ‖x‖_p^α − γ^α‖ρ‖_p^α ≤ L(x) ≤ ‖x‖_p^α up to a relative slack.
pub fn sandwich_check(spec: &ConvexifySpec, x: &[f64]) -> Result<(bool, bool)> {
    check_dim(spec.dim(), x.len())?;
    let alpha = spec.alpha();
    let upper = lp_norm_fast(x, spec.p).powf(alpha);
    let shift = (spec.gamma * lp_norm_fast(&spec.rho, spec.p)).powf(alpha);
    let l = big_l_fast(spec, x);
    let tol = SANDWICH_TOL * (1.0 + upper + shift);
    Ok((upper - shift <= l + tol, l <= upper + tol))
}

/// Analytic gradient of f.
pub fn gradient_f(spec: &ConvexifySpec, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(spec.dim(), x.len())?;
    let p = spec.p;
    let beta = spec.beta;
    let mut g: Vec<f64> = x.iter().zip(&spec.rho).map(|(xj, r)| 2.0 * xj / (r * r)).collect();
    if beta == 0.0 {
        return Ok(g);
    }
    if p <= 2.0 {
        for ((gj, xj), r) in g.iter_mut().zip(x).zip(&spec.rho) {
            let t2 = (spec.gamma * r).powi(2);
            *gj -= beta * p * xj * (t2 + xj * xj).powf(0.5 * p - 1.0);
        }
    } else {
        let n = lp_norm_fast(x, p);
        if n > 0.0 {
            for (gj, xj) in g.iter_mut().zip(x) {
                // ∇‖x‖_p² = 2‖x‖_p · h(x)
                let h = xj * xj.abs().powf(p - 2.0) / n.powf(p - 1.0);
                *gj -= beta * 2.0 * n * h;
            }
        }
    }
    Ok(g)
}

/// Analytic Hessian of f. Diagonal for p ≤ 2; for p > 2
/// diag(2/ρ_j² − 2β(p−1)g_j) + 2β(p−2) h hᵀ, undefined at the origin.
pub fn hessian_f(spec: &ConvexifySpec, x: &[f64]) -> Result<DMatrix<f64>> {
    check_dim(spec.dim(), x.len())?;
    let k = spec.dim();
    let p = spec.p;
    let beta = spec.beta;
    let mut h = DMatrix::zeros(k, k);
    for (j, r) in spec.rho.iter().enumerate() {
        h[(j, j)] = 2.0 / (r * r);
    }
    if beta == 0.0 {
        return Ok(h);
    }
    if p <= 2.0 {
        for (j, (xj, r)) in x.iter().zip(&spec.rho).enumerate() {
            let t2 = (spec.gamma * r).powi(2);
            let x2 = xj * xj;
            h[(j, j)] -= beta * p * (t2 + (p - 1.0) * x2) / (t2 + x2).powf(2.0 - 0.5 * p);
        }
    } else {
        let n = lp_norm_fast(x, p);
        if n == 0.0 {
            return Err(Error::OriginSingularity);
        }
        let hv: Vec<f64> = x.iter().map(|xj| xj * xj.abs().powf(p - 2.0) / n.powf(p - 1.0)).collect();
        for j in 0..k {
            let g = x[j].abs().powf(p - 2.0) / n.powf(p - 2.0);
            h[(j, j)] -= 2.0 * beta * (p - 1.0) * g;
            for i in 0..k {
                h[(i, j)] += 2.0 * beta * (p - 2.0) * hv[i] * hv[j];
            }
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvexityCertificate {
    /// Failed midpoint tests plus Hessian spot-checks with a negative eigenvalue.
    pub violations: usize,
    /// Largest f(λx+(1−λ)y) − λf(x) − (1−λ)f(y) seen.
    pub worst_gap: f64,
    pub hessian_checks: usize,
    pub min_hessian_eigenvalue: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NonnegativityCertificate {
    pub violations: usize,
    pub min_value: f64,
}

/// Random point whose coordinates range over several orders of magnitude
/// around the smoothing scale max(1, γ)·ρ_j.
fn sample_point<R: Rng>(spec: &ConvexifySpec, rng: &mut R, out: &mut [f64]) {
    let s = (rng.random_range(-2.0f64..1.0) * std::f64::consts::LN_10).exp();
    let base = spec.gamma.max(1.0);
    for (o, r) in out.iter_mut().zip(&spec.rho) {
        *o = s * base * r * rng.random_range(-1.0..1.0);
    }
}

/// Randomized midpoint certificate of convexity.
///
/// Trial `i` draws (x, y, λ) from its own stream. One third of the trials use
/// a generic pair, one third a segment through the origin (y = −t x), one
/// third y = 0. Every tenth trial also checks that the Hessian at x has no
/// eigenvalue below −1e−9. β is not required to be below β*.
pub fn convexity_certificate(spec: &ConvexifySpec, trials: usize, seed: u64) -> ConvexityCertificate {
    let k = spec.dim();
    let per_trial = |i: usize| -> (usize, f64, usize, f64) {
        let mut r = rng::stream(seed, i as u64);
        let mut x = vec![0.0; k];
        let mut y = vec![0.0; k];
        sample_point(spec, &mut r, &mut x);
        match i % 3 {
            0 => sample_point(spec, &mut r, &mut y),
            1 => {
                let t = (r.random_range(-1.5f64..1.5) * std::f64::consts::LN_10).exp();
                y.iter_mut().zip(&x).for_each(|(yj, xj)| *yj = -t * xj);
            }
            _ => {}
        }
        let lambda: f64 = r.random();
        let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
        let gap = big_f_fast(spec, &z) - lambda * big_f_fast(spec, &x) - (1.0 - lambda) * big_f_fast(spec, &y);
        let mut bad = usize::from(gap > CERTIFICATE_TOL);
        let (mut checks, mut min_eig) = (0, f64::INFINITY);
        if i.is_multiple_of(10) && x.iter().any(|v| *v != 0.0) {
            if let Ok(h) = hessian_f(spec, &x) {
                checks = 1;
                min_eig = SymmetricEigen::new(h).eigenvalues.min();
                bad += usize::from(min_eig < -CERTIFICATE_TOL);
            }
        }
        (bad, gap, checks, min_eig)
    };
    let (violations, worst_gap, hessian_checks, min_hessian_eigenvalue) = (0..trials)
        .into_par_iter()
        .map(per_trial)
        .reduce(
            || (0, f64::NEG_INFINITY, 0, f64::INFINITY),
            |a, b| (a.0 + b.0, a.1.max(b.1), a.2 + b.2, a.3.min(b.3)),
        );
    ConvexityCertificate {
        violations,
        worst_gap,
        hessian_checks,
        min_hessian_eigenvalue,
    }
}

/// Random search for the minimum of f, followed by compass descent from the
/// lowest max(10, trials/100) starts.
pub fn nonnegativity_certificate(spec: &ConvexifySpec, trials: usize, seed: u64) -> NonnegativityCertificate {
    let k = spec.dim();
    let mut starts: Vec<(f64, Vec<f64>)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            let mut x = vec![0.0; k];
            sample_point(spec, &mut r, &mut x);
            (big_f_fast(spec, &x), x)
        })
        .collect();
    let sampled_violations = starts.iter().filter(|(v, _)| *v < -CERTIFICATE_TOL).count();
    starts.sort_by(|a, b| a.0.total_cmp(&b.0));
    starts.truncate(10.max(trials / 100).min(starts.len()));
    let refined: Vec<f64> = starts.into_par_iter().map(|(v, x)| compass_descent(spec, x, v)).collect();
    let refined_violations = refined.iter().filter(|v| **v < -CERTIFICATE_TOL).count();
    let min_value = refined.iter().copied().fold(f64::INFINITY, f64::min);
    NonnegativityCertificate {
        violations: sampled_violations + refined_violations,
        min_value: if trials == 0 { 0.0 } else { min_value },
    }
}

fn compass_descent(spec: &ConvexifySpec, mut x: Vec<f64>, mut fx: f64) -> f64 {
    let mut step = 0.25 * x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-3);
    let mut iterations = 0;
    while step > 1e-12 && iterations < 5000 {
        iterations += 1;
        let mut improved = false;
        for j in 0..x.len() {
            for dir in [1.0, -1.0] {
                let old = x[j];
                x[j] = old + dir * step;
                let v = big_f_fast(spec, &x);
                if v < fx {
                    fx = v;
                    improved = true;
                    break;
                }
                x[j] = old;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    fx
}

/// Gridded values over [−3, 3]² for the two panels comparing the naive
/// penalty with its convexified replacement.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetTables {
    pub axis: Vec<f64>,
    /// Σ x_j²/ρ_j² − β_naive ‖x‖_p², row-major with x1 outer.
    pub left: Vec<f64>,
    /// f_{ρ,β,γ}(x), same layout.
    pub right: Vec<f64>,
}

pub fn figure_levelsets(p: f64, beta_naive: f64, spec: &ConvexifySpec, grid: usize) -> Result<LevelSetTables> {
    if spec.dim() != 2 {
        return Err(Error::invalid("rho", format!("level sets need dimension 2, got {}", spec.dim())));
    }
    if grid < 2 {
        return Err(Error::invalid("grid", "at least two grid points per axis are required"));
    }
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::invalid("p", format!("exponent must be finite and >= 1, got {p}")));
    }
    // symmetric construction so that axis[n−1−i] = −axis[i] exactly
    let m = (grid - 1) as f64;
    let axis: Vec<f64> = (0..grid).map(|i| 3.0 * (2.0 * i as f64 - m) / m).collect();
    let mut left = Vec::with_capacity(grid * grid);
    let mut right = Vec::with_capacity(grid * grid);
    for &a in &axis {
        for &b in &axis {
            let x = [a, b];
            let quad = (a / spec.rho[0]).powi(2) + (b / spec.rho[1]).powi(2);
            let n2 = lp_norm_pow_fast(&x, p).powf(2.0 / p);
            left.push(quad - beta_naive * n2);
            right.push(big_f_fast(spec, &x));
        }
    }
    Ok(LevelSetTables { axis, left, right })
}

impl LevelSetTables {
    /// CSV with header `x1,x2,value`.
    pub fn to_csv(&self, right: bool) -> String {
        let values = if right { &self.right } else { &self.left };
        let n = self.axis.len();
        let mut out = String::from("x1,x2,value\n");
        for (i, a) in self.axis.iter().enumerate() {
            for (j, b) in self.axis.iter().enumerate() {
                out.push_str(&format!("{a:.16e},{b:.16e},{:.16e}\n", values[i * n + j]));
            }
        }
        out
    }

    /// Number of grid triples (along rows, columns and both diagonals) whose
    /// middle value exceeds the mean of its neighbours by more than `tol`.
    pub fn midpoint_violations(&self, right: bool, tol: f64) -> usize {
        let values = if right { &self.right } else { &self.left };
        let n = self.axis.len() as isize;
        let at = |i: isize, j: isize| values[(i * n + j) as usize];
        let mut count = 0;
        for i in 0..n {
            for j in 0..n {
                for (di, dj) in [(1, 0), (0, 1), (1, 1), (1, -1)] {
                    let (i0, j0, i1, j1) = (i - di, j - dj, i + di, j + dj);
                    if i0 < 0 || j0 < 0 || i1 >= n || j1 >= n || j0 >= n || j1 < 0 {
                        continue;
                    }
                    if at(i, j) > 0.5 * (at(i0, j0) + at(i1, j1)) + tol {
                        count += 1;
                    }
                }
            }
        }
        count
    }
}
