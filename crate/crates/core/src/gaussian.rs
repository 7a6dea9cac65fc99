//! Diagonal Gaussian measures on the truncation: sampling, log-density,
//! Cameron–Martin shifts and the Gaussian density-ratio extraction.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::numeric::CompensatedSum;
use crate::rng;
use crate::sequence::{cm_inner_fast, cm_norm_sq_fast, Point, PriorSpec};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Relative margin below σ_j^{-2} that extraction weights must respect.
pub const EXTRACTION_MARGIN: f64 = 1e-12;

/// Centred product measure ⊗_j N(0, σ_j²).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagonalGaussian {
    sigmas: Vec<f64>,
}

impl DiagonalGaussian {
    pub fn new(sigmas: Vec<f64>) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(Error::invalid("sigmas", "empty covariance"));
        }
        if let Some(s) = sigmas.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::invalid("sigmas", format!("degenerate standard deviation {s}")));
        }
        Ok(DiagonalGaussian { sigmas })
    }

    pub fn from_prior(prior: &PriorSpec) -> Self {
        DiagonalGaussian {
            sigmas: prior.sigmas().to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.sigmas.len()
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn variances(&self) -> Vec<f64> {
        self.sigmas.iter().map(|s| s * s).collect()
    }

    /// Σ_j log(σ_j √(2π)).
    pub(crate) fn log_normalizer(&self) -> f64 {
        self.sigmas.iter().map(|s| s.ln() + LN_SQRT_2PI).sum()
    }

    /// Fill `out` with draw `index` of the stream family `seed`.
    #[inline]
    pub(crate) fn draw_into(&self, seed: u64, index: u64, out: &mut [f64]) {
        let mut r = rng::stream(seed, index);
        for (o, s) in out.iter_mut().zip(&self.sigmas) {
            let z: f64 = StandardNormal.sample(&mut r);
            *o = s * z;
        }
    }

    /// `n` draws as a flat row-major buffer of length `n · dim`.
    pub(crate) fn sample_flat(&self, n: usize, seed: u64) -> Vec<f64> {
        let k = self.dim();
        let mut buf = vec![0.0; n * k];
        buf.par_chunks_mut(k)
            .enumerate()
            .for_each(|(i, row)| self.draw_into(seed, i as u64, row));
        buf
    }
}

/// Per-coordinate extraction weights γ_j ≥ 0 of a diagonal operator Γ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaDiagonal {
    entries: Vec<f64>,
}

impl GammaDiagonal {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if let Some(g) = entries.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(Error::invalid("gamma", format!("entries must be finite and >= 0, got {g}")));
        }
        Ok(GammaDiagonal { entries })
    }

    pub fn zeros(dim: usize) -> Self {
        GammaDiagonal {
            entries: vec![0.0; dim],
        }
    }

    /// Weight `r` on coordinates `n..` (0-based) and zero before, the shape
    /// used to extract the tail norm ‖Π_{n} u‖².
    pub fn tail(dim: usize, from: usize, r: f64) -> Result<Self> {
        GammaDiagonal::new((0..dim).map(|j| if j >= from { r } else { 0.0 }).collect())
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    fn validate_against(&self, g: &DiagonalGaussian) -> Result<()> {
        check_dim(g.dim(), self.dim())?;
        for (index, (&gamma, &s)) in self.entries.iter().zip(&g.sigmas).enumerate() {
            let limit = s.powi(-2);
            if gamma > (1.0 - EXTRACTION_MARGIN) * limit {
                return Err(Error::ExtractionViolation { index, gamma, limit });
            }
        }
        Ok(())
    }
}

/// A reproducible batch of prior draws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleBatch {
    pub points: Vec<Point>,
    pub seed: u64,
    pub count: usize,
}

pub fn sample(g: &DiagonalGaussian, n: usize, seed: u64) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::invalid("n", "sample count must be >= 1"));
    }
    let k = g.dim();
    let flat = g.sample_flat(n, seed);
    let points = flat.chunks_exact(k).map(Point::from).collect();
    Ok(SampleBatch {
        points,
        seed,
        count: n,
    })
}

/// log of the Lebesgue density of `g` at `x`.
pub fn log_density(g: &DiagonalGaussian, x: &[f64]) -> Result<f64> {
    check_dim(g.dim(), x.len())?;
    let quad: CompensatedSum = x
        .iter()
        .zip(&g.sigmas)
        .map(|(v, s)| (v / s) * (v / s))
        .collect();
    Ok(-0.5 * quad.total() - g.log_normalizer())
}

#[inline]
pub(crate) fn log_density_fast(g: &DiagonalGaussian, x: &[f64]) -> f64 {
    -0.5 * cm_norm_sq_fast(x, &g.sigmas) - g.log_normalizer()
}

/// log dμ_h/dμ (u) = ⟨h, u⟩_E − ½|h|_E², where μ_h is the law of X + h.
pub fn cm_shift_log_ratio(g: &DiagonalGaussian, h: &[f64], u: &[f64]) -> Result<f64> {
    check_dim(g.dim(), h.len())?;
    check_dim(g.dim(), u.len())?;
    Ok(cm_shift_log_ratio_fast(&g.sigmas, h, u))
}

#[inline]
pub(crate) fn cm_shift_log_ratio_fast(sigmas: &[f64], h: &[f64], u: &[f64]) -> f64 {
    cm_inner_fast(h, u, sigmas) - 0.5 * cm_norm_sq_fast(h, sigmas)
}

/// Result of extracting exp(−½⟨Γu, u⟩) from a Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    /// log dμ/dν at the evaluation point.
    pub log_ratio: f64,
    /// ν = N(0, (Q^{-1} − Γ)^{-1}).
    pub modified: DiagonalGaussian,
}

/// For μ = N(0, Q) diagonal and Γ diagonal with γ_j < σ_j^{-2}:
/// dμ/dν(u) = exp(−½ Σ γ_j u_j²) / sqrt(Π (1 − γ_j σ_j²)) with
/// ν = N(0, diag((σ_j^{-2} − γ_j)^{-1})).
pub fn normextraction_log_ratio(
    g: &DiagonalGaussian,
    gamma: &GammaDiagonal,
    u: &[f64],
) -> Result<Extraction> {
    gamma.validate_against(g)?;
    check_dim(g.dim(), u.len())?;
    let modified = extraction_modified(g, gamma);
    Ok(Extraction {
        log_ratio: extraction_log_ratio_fast(g, gamma, u),
        modified,
    })
}

fn extraction_modified(g: &DiagonalGaussian, gamma: &GammaDiagonal) -> DiagonalGaussian {
    let sigmas = g
        .sigmas
        .iter()
        .zip(&gamma.entries)
        .map(|(s, gm)| s * (-0.5 * (-gm * s * s).ln_1p()).exp())
        .collect();
    DiagonalGaussian { sigmas }
}

#[inline]
fn extraction_log_ratio_fast(g: &DiagonalGaussian, gamma: &GammaDiagonal, u: &[f64]) -> f64 {
    let mut quad = CompensatedSum::new();
    let mut logdet = CompensatedSum::new();
    for ((&gm, &s), &x) in gamma.entries.iter().zip(&g.sigmas).zip(u) {
        quad.add(gm * x * x);
        logdet.add((-gm * s * s).ln_1p());
    }
    -0.5 * quad.total() - 0.5 * logdet.total()
}

/// The modified measure alone, for callers that evaluate many points.
pub fn extraction_measure(g: &DiagonalGaussian, gamma: &GammaDiagonal) -> Result<DiagonalGaussian> {
    gamma.validate_against(g)?;
    Ok(extraction_modified(g, gamma))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(k: usize) -> DiagonalGaussian {
        DiagonalGaussian::new(vec![1.0; k]).unwrap()
    }

    #[test]
    fn density_at_mode_and_ratio() {
        let g = unit(1);
        let at_zero = log_density(&g, &[0.0]).unwrap();
        assert!((at_zero + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
        let x = [1.7];
        let ratio = (log_density(&g, &x).unwrap() - at_zero).exp();
        assert!((ratio - (-0.5f64 * 1.7 * 1.7).exp()).abs() < 1e-15);
    }

    #[test]
    fn density_equals_product_of_univariate_densities() {
        let g = DiagonalGaussian::new(vec![1.0, 2.0]).unwrap();
        let x = [1.0, 2.0];
        let pdf = |v: f64, s: f64| {
            (-(v * v) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
        };
        let oracle = (pdf(1.0, 1.0) * pdf(2.0, 2.0)).ln();
        let expected = -0.5 * (1.0 + 1.0) - (2.0 * std::f64::consts::PI * 2.0).ln();
        let got = log_density(&g, &x).unwrap();
        assert!((got - oracle).abs() < 1e-14);
        assert!((got - expected).abs() < 1e-14);
        assert_eq!(got, log_density(&g, &[-1.0, -2.0]).unwrap());
    }

    #[test]
    fn shift_ratio_direct_values() {
        let g = unit(1);
        assert_eq!(cm_shift_log_ratio(&g, &[0.0], &[3.0]).unwrap(), 0.0);
        assert_eq!(cm_shift_log_ratio(&g, &[1.0], &[2.0]).unwrap(), 1.5);
        assert!(cm_shift_log_ratio(&g, &[1.0, 0.0], &[2.0]).is_err());
    }

    #[test]
    fn extraction_in_one_dimension() {
        let g = unit(1);
        let gm = GammaDiagonal::new(vec![0.5]).unwrap();
        let ex = normextraction_log_ratio(&g, &gm, &[1.0]).unwrap();
        assert!((ex.log_ratio - (-0.25 - 0.5 * 0.5f64.ln())).abs() < 1e-15);
        assert!((ex.modified.variances()[0] - 2.0).abs() < 1e-15);

        let none = normextraction_log_ratio(&g, &GammaDiagonal::zeros(1), &[1.3]).unwrap();
        assert_eq!(none.log_ratio, 0.0);
        assert_eq!(none.modified, g);
    }

    #[test]
    fn extraction_rejects_weights_at_the_boundary() {
        let g = DiagonalGaussian::new(vec![2.0]).unwrap();
        let gm = GammaDiagonal::new(vec![0.25]).unwrap();
        assert!(matches!(
            normextraction_log_ratio(&g, &gm, &[0.0]),
            Err(Error::ExtractionViolation { index: 0, .. })
        ));
        assert!(GammaDiagonal::new(vec![-0.1]).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = DiagonalGaussian::new(vec![1.0, 0.5, 0.25]).unwrap();
        let a = sample(&g, 500, 11).unwrap();
        let b = sample(&g, 500, 11).unwrap();
        assert_eq!(a, b);
        let c = sample(&g, 500, 12).unwrap();
        assert_ne!(a.points, c.points);
        // a prefix of a larger batch is the smaller batch
        let d = sample(&g, 800, 11).unwrap();
        assert_eq!(&d.points[..500], &a.points[..]);
    }
}
