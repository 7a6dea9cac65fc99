//! Finite-dimensional sequence-space primitives.
//!
//! Everything lives on the truncation ℝ^k of a sequence space: the prior is the
//! product measure ⊗ N(0, σ_j²), points are coordinate vectors in the canonical
//! basis, and the infinite-dimensional objects (ℓ^p norms, the Cameron–Martin
//! norm, head/tail projections) are their finite counterparts.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::numeric::CompensatedSum;

/// A finite coordinate vector `(x_1, …, x_k)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    /// The canonical basis vector `scale · e_index` (0-based index).
    pub fn basis(dim: usize, index: usize, scale: f64) -> Self {
        let mut v = vec![0.0; dim];
        v[index] = scale;
        Point(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn add(&self, other: &[f64]) -> Point {
        Point(self.0.iter().zip(other).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &[f64]) -> Point {
        Point(self.0.iter().zip(other).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, factor: f64) -> Point {
        Point(self.0.iter().map(|a| a * factor).collect())
    }

    /// Concatenation `self ⊕ tail`.
    pub fn concat(&self, tail: &Point) -> Point {
        let mut v = self.0.clone();
        v.extend_from_slice(&tail.0);
        Point(v)
    }
}

impl Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

impl From<&[f64]> for Point {
    fn from(v: &[f64]) -> Self {
        Point(v.to_vec())
    }
}

/// Constants derived from the exponent and the σ-sequence: α = min(p, 2),
/// q = max(p, 2(p−1)²) and S = (Σ σ_j^p)^{1/p}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedConstants {
    pub alpha: f64,
    pub q: f64,
    pub s: f64,
}

/// Truncated diagonal Gaussian prior on ℓ^p: exponent `p` and the ordered
/// standard deviations σ_1 ≥ σ_2 ≥ … ≥ σ_k > 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriorSpec {
    p: f64,
    sigmas: Vec<f64>,
    /// Upper bound on Σ_{j>k} σ_j^p when the sequence came from a decay law.
    tail_bound: Option<f64>,
}

impl PriorSpec {
    pub fn new(p: f64, sigmas: Vec<f64>) -> Result<Self> {
        validate_exponent(p)?;
        if sigmas.is_empty() {
            return Err(Error::invalid("sigmas", "at least one coordinate is required"));
        }
        for (j, &s) in sigmas.iter().enumerate() {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::invalid(
                    "sigmas",
                    format!("sigma_{} = {s} is not a positive finite number", j + 1),
                ));
            }
            if j > 0 && s > sigmas[j - 1] {
                return Err(Error::invalid(
                    "sigmas",
                    format!(
                        "sequence must be non-increasing, but sigma_{} = {} < sigma_{} = {s}",
                        j,
                        sigmas[j - 1],
                        j + 1
                    ),
                ));
            }
        }
        Ok(PriorSpec {
            p,
            sigmas,
            tail_bound: None,
        })
    }

    /// σ_j = c · j^{−s} for j = 1..k, requiring s·p > 1 so that Σ σ_j^p converges.
    pub fn from_decay_law(p: f64, c: f64, s: f64, k: usize) -> Result<Self> {
        validate_exponent(p)?;
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::invalid("c", "scale must be positive"));
        }
        if !(s.is_finite() && s * p > 1.0) {
            return Err(Error::invalid(
                "s",
                format!("decay exponent must satisfy s*p > 1, got s*p = {}", s * p),
            ));
        }
        if k == 0 {
            return Err(Error::invalid("k", "truncation dimension must be >= 1"));
        }
        let sigmas = (1..=k).map(|j| c * (j as f64).powf(-s)).collect();
        let mut prior = PriorSpec::new(p, sigmas)?;
        // Σ_{j>k} j^{-sp} ≤ ∫_k^∞ x^{-sp} dx
        let sp = s * p;
        prior.tail_bound = Some(c.powf(p) * (k as f64).powf(1.0 - sp) / (sp - 1.0));
        Ok(prior)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn dim(&self) -> usize {
        self.sigmas.len()
    }

    /// Precision a_j = σ_j^{−2} of coordinate `j` (0-based).
    pub fn precision(&self, j: usize) -> f64 {
        self.sigmas[j].powi(-2)
    }

    pub fn tail_bound(&self) -> Option<f64> {
        self.tail_bound
    }

    /// The same σ-sequence restricted to the first `k` coordinates.
    pub fn truncate(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.dim() {
            return Err(Error::OutOfRange(format!(
                "truncation {k} outside 1..={}",
                self.dim()
            )));
        }
        Ok(PriorSpec {
            p: self.p,
            sigmas: self.sigmas[..k].to_vec(),
            tail_bound: None,
        })
    }

    /// Same σ-sequence measured in a different ℓ^p norm.
    pub fn with_exponent(&self, p: f64) -> Result<Self> {
        validate_exponent(p)?;
        Ok(PriorSpec {
            p,
            ..self.clone()
        })
    }
}

fn validate_exponent(p: f64) -> Result<()> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::invalid("p", format!("exponent must be finite and >= 1, got {p}")));
    }
    Ok(())
}

/// ‖x‖_p = (Σ |x_j|^p)^{1/p}, accumulated with compensated summation.
pub fn lp_norm(x: &[f64], p: f64) -> Result<f64> {
    validate_exponent(p)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("lp_norm input".into()));
    }
    if p == 2.0 {
        let s: CompensatedSum = x.iter().map(|v| v * v).collect();
        return Ok(s.total().sqrt());
    }
    let max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return Ok(0.0);
    }
    // scale by the largest entry so |x_j|^p cannot overflow
    let s: CompensatedSum = x.iter().map(|v| (v.abs() / max).powf(p)).collect();
    Ok(max * s.total().powf(1.0 / p))
}

/// Unchecked ℓ^p norm for inner loops.
#[inline]
pub(crate) fn lp_norm_fast(x: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    } else if p == 1.0 {
        x.iter().map(|v| v.abs()).sum()
    } else {
        x.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Unchecked Σ|x_j|^p, i.e. ‖x‖_p^p.
#[inline]
pub(crate) fn lp_norm_pow_fast(x: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        x.iter().map(|v| v * v).sum()
    } else if p == 1.0 {
        x.iter().map(|v| v.abs()).sum()
    } else {
        x.iter().map(|v| v.abs().powf(p)).sum()
    }
}

/// Squared Cameron–Martin norm |x|_E² = Σ x_j² / σ_j².
pub fn cm_norm_sq(x: &[f64], prior: &PriorSpec) -> Result<f64> {
    check_dim(prior.dim(), x.len())?;
    let s: CompensatedSum = x
        .iter()
        .zip(&prior.sigmas)
        .map(|(v, s)| (v / s) * (v / s))
        .collect();
    Ok(s.total())
}

/// Cameron–Martin inner product ⟨h, u⟩_E = Σ h_j u_j / σ_j².
pub(crate) fn cm_inner_fast(h: &[f64], u: &[f64], sigmas: &[f64]) -> f64 {
    h.iter()
        .zip(u)
        .zip(sigmas)
        .map(|((a, b), s)| a * b / (s * s))
        .sum()
}

pub(crate) fn cm_norm_sq_fast(x: &[f64], sigmas: &[f64]) -> f64 {
    x.iter().zip(sigmas).map(|(v, s)| (v / s) * (v / s)).sum()
}

/// Head projection P^k: the first `k` coordinates.
pub fn project_head(x: &[f64], k: usize) -> Result<Point> {
    if k > x.len() {
        return Err(Error::OutOfRange(format!("head index {k} > dim {}", x.len())));
    }
    Ok(Point(x[..k].to_vec()))
}

/// Tail projection P_k: coordinates k+1, …, dim.
pub fn project_tail(x: &[f64], k: usize) -> Result<Point> {
    if k > x.len() {
        return Err(Error::OutOfRange(format!("tail index {k} > dim {}", x.len())));
    }
    Ok(Point(x[k..].to_vec()))
}

/// Band projection P_k^K: coordinates k+1, …, K.
pub fn project_band(x: &[f64], k: usize, upper: usize) -> Result<Point> {
    if k > upper || upper > x.len() {
        return Err(Error::OutOfRange(format!(
            "band ({k}, {upper}] not within 0 <= k <= K <= {}",
            x.len()
        )));
    }
    Ok(Point(x[k..upper].to_vec()))
}

pub fn derived_constants(prior: &PriorSpec) -> DerivedConstants {
    let p = prior.p;
    let alpha = p.min(2.0);
    let q = p.max(2.0 * (p - 1.0) * (p - 1.0));
    let s = lp_norm(&prior.sigmas, p).expect("validated prior");
    DerivedConstants { alpha, q, s }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_of_simple_vectors() {
        assert_eq!(lp_norm(&[3.0, 4.0], 2.0).unwrap(), 5.0);
        assert_eq!(lp_norm(&[1.0, 1.0], 1.0).unwrap(), 2.0);
        let two = lp_norm(&[1.0, 1.0], 2.0).unwrap();
        assert!((two - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(lp_norm(&[0.0, 0.0, 0.0], 3.0).unwrap(), 0.0);
    }

    #[test]
    fn fractional_exponent_matches_high_precision_reference() {
        // mpmath at 30 digits: (0.3^1.5 + 0.7^1.5 + 0.2^1.5)^(1/1.5)
        let v = lp_norm(&[0.3, -0.7, 0.2], 1.5).unwrap();
        assert!((v - 0.889_856_671_331_086_8).abs() < 1e-12, "{v}");
    }

    #[test]
    fn norm_rejects_bad_input() {
        assert!(matches!(lp_norm(&[1.0], 0.5), Err(Error::InvalidArgument { .. })));
        assert!(matches!(lp_norm(&[f64::NAN], 2.0), Err(Error::NonFinite(_))));
        assert!(lp_norm(&[1.0], f64::INFINITY).is_err());
    }

    #[test]
    fn cameron_martin_norm() {
        let unit = PriorSpec::new(2.0, vec![1.0, 1.0]).unwrap();
        assert_eq!(cm_norm_sq(&[0.0, 0.0], &unit).unwrap(), 0.0);
        assert_eq!(cm_norm_sq(&[3.0, 4.0], &unit).unwrap(), 25.0);
        let prior = PriorSpec::new(2.0, vec![2.0, 1.0]).unwrap();
        assert_eq!(cm_norm_sq(&[2.0, 1.0], &prior).unwrap(), 2.0);
        assert!(matches!(
            cm_norm_sq(&[1.0], &prior),
            Err(Error::DimensionMismatch { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn projections() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(project_head(&x[..3], 0).unwrap().dim(), 0);
        assert_eq!(project_tail(&x[..3], 1).unwrap().coords(), &[2.0, 3.0]);
        assert_eq!(project_band(&x, 1, 3).unwrap().coords(), &[2.0, 3.0]);
        assert!(project_band(&x, 3, 2).is_err());
        assert!(project_head(&x, 5).is_err());
        assert!(project_tail(&x, 5).is_err());
    }

    #[test]
    fn constants_for_selected_exponents() {
        let c2 = derived_constants(&PriorSpec::new(2.0, vec![1.0]).unwrap());
        assert_eq!((c2.alpha, c2.q), (2.0, 2.0));
        let c4 = derived_constants(&PriorSpec::new(4.0, vec![1.0]).unwrap());
        assert_eq!((c4.alpha, c4.q), (2.0, 18.0));
        let c1 = derived_constants(&PriorSpec::new(1.0, vec![1.0, 0.5]).unwrap());
        assert_eq!((c1.alpha, c1.q), (1.0, 1.0));
        assert!((c1.s - 1.5).abs() < 1e-15);
    }

    #[test]
    fn prior_validation() {
        assert!(PriorSpec::new(2.0, vec![1.0, 2.0]).is_err());
        assert!(PriorSpec::new(2.0, vec![1.0, 0.0]).is_err());
        assert!(PriorSpec::new(0.9, vec![1.0]).is_err());
        assert!(PriorSpec::new(2.0, vec![]).is_err());
        assert!(PriorSpec::from_decay_law(2.0, 1.0, 0.5, 4).is_err());
        let law = PriorSpec::from_decay_law(2.0, 1.0, 1.0, 4).unwrap();
        assert_eq!(law.sigmas(), &[1.0, 0.5, 1.0 / 3.0, 0.25]);
        // Σ_{j>4} j^-2 = π²/6 − 1.4236… ≈ 0.2213 ≤ 1/4
        let tail = law.tail_bound().unwrap();
        assert!((tail - 0.25).abs() < 1e-15);
        let exact_tail = std::f64::consts::PI.powi(2) / 6.0 - (1.0 + 0.25 + 1.0 / 9.0 + 1.0 / 16.0);
        assert!(exact_tail <= tail);
    }
}
