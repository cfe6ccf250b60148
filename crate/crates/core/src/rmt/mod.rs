//! Fixed-`K`, large-`N` limiting laws of the sample-covariance eigenvalue
//! fluctuations `β_i = √N(λ_i − 1)`.

mod density;
mod laws;
mod table;

pub use density::{importance_normalization, joint_density, sample_wigner, JointDensity};
pub use laws::{
    cnd_s0_law, cnd_s0_pdf_closed_form, cnd_s0_pdf_quadrature, default_grid, marginal, marginal_pdf_quadrature,
    s1_cnd_law, s1_cnd_law_with_form, s1_med_law, ConvolutionForm, LawCache, QUADRATURE_MAX_K, QUAD_TOL,
    SAMPLED_DRAWS,
};
pub use table::{DistributionTable, GridSpec, Law, TableMeta, TableMethod, DEFAULT_POINTS, TABLE_FORMAT_VERSION};

use crate::eigen::EigenSpectrum;
use crate::error::{Result, SenseError};

/// Ordered fluctuation coordinates `β_1 ≥ … ≥ β_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationVector {
    betas: Vec<f64>,
}

impl FluctuationVector {
    pub fn new(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(SenseError::arg("fluctuation vector must be nonempty"));
        }
        if betas.windows(2).any(|w| w[0] < w[1]) {
            return Err(SenseError::arg("fluctuation coordinates must be in descending order"));
        }
        Ok(Self { betas })
    }

    /// `β_i = √N (λ̂_i / σ_u² − 1)`.
    pub fn from_spectrum(spec: &EigenSpectrum, sigma_u2: f64, n: usize) -> Self {
        let root_n = (n as f64).sqrt();
        Self {
            betas: spec.values().iter().map(|l| root_n * (l / sigma_u2 - 1.0)).collect(),
        }
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub fn largest(&self) -> f64 {
        self.betas[0]
    }

    pub fn smallest(&self) -> f64 {
        *self.betas.last().expect("nonempty")
    }
}

/// `γ_1 = √N(λ̂_1/μ_1 − 1)` and `γ_K = √N(λ̂_K/μ_r − 1)` under S1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct S1FluctuationPair {
    pub gamma1: f64,
    pub gamma_k: f64,
}

impl S1FluctuationPair {
    pub fn from_spectrum(spec: &EigenSpectrum, mu1: f64, mur: f64, n: usize) -> Self {
        let root_n = (n as f64).sqrt();
        Self {
            gamma1: root_n * (spec.largest() / mu1 - 1.0),
            gamma_k: root_n * (spec.smallest() / mur - 1.0),
        }
    }
}
