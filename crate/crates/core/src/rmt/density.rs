use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use super::FluctuationVector;
use crate::eigen::hermitian_eigenvalues;
use crate::matrix::{ComplexMatrix, RealMatrix};
use crate::rng::{stream, StreamDomain};
use crate::signal::ValueCase;

/// Joint density of the ordered limits `(β_1, …, β_K)`.
///
/// Real case (GOE scaling, diagonal variance 2):
/// `C₁(K) exp(−¼Σβ²) Π_{i<j}(β_i − β_j)` with
/// `C₁(K) = 1 / (2^{K(K+3)/4} Π_i Γ((K+1−i)/2))`.
///
/// Complex case (GUE scaling, diagonal variance 1):
/// `C₂(K) exp(−½Σβ²) Π_{i<j}(β_i − β_j)²` with
/// `C₂(K) = K! (2π)^{−K/2} Π_j 1/Γ(1+j)`.
#[derive(Debug, Clone, Copy)]
pub struct JointDensity {
    k: usize,
    case: ValueCase,
    ln_norm: f64,
}

impl JointDensity {
    pub fn new(k: usize, case: ValueCase) -> Self {
        assert!(k >= 1, "joint density needs K >= 1");
        let kf = k as f64;
        let ln_norm = match case {
            ValueCase::Real => {
                let gammas: f64 = (1..=k).map(|i| ln_gamma(0.5 * (kf + 1.0 - i as f64))).sum();
                -(kf * (kf + 3.0) / 4.0) * 2f64.ln() - gammas
            }
            ValueCase::Complex => {
                let gammas: f64 = (1..=k).map(|j| ln_gamma(1.0 + j as f64)).sum();
                ln_gamma(kf + 1.0) - 0.5 * kf * (2.0 * PI).ln() - gammas
            }
        };
        Self { k, case, ln_norm }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn case(&self) -> ValueCase {
        self.case
    }

    /// Normalizing constant `C₁(K)` or `C₂(K)`.
    pub fn norm_constant(&self) -> f64 {
        self.ln_norm.exp()
    }

    /// Density at `betas`, which must be in descending order; the density is
    /// zero outside the ordered cone.
    #[inline]
    pub fn eval(&self, betas: &[f64]) -> f64 {
        debug_assert_eq!(betas.len(), self.k);
        let mut sq = 0.0;
        let mut vandermonde = 1.0;
        for (i, &bi) in betas.iter().enumerate() {
            sq += bi * bi;
            for &bj in &betas[i + 1..] {
                let d = bi - bj;
                if d < 0.0 {
                    return 0.0;
                }
                vandermonde *= d;
            }
        }
        match self.case {
            ValueCase::Real => (self.ln_norm - 0.25 * sq).exp() * vandermonde,
            ValueCase::Complex => (self.ln_norm - 0.5 * sq).exp() * vandermonde * vandermonde,
        }
    }
}

pub fn joint_density(betas: &FluctuationVector, case: ValueCase) -> f64 {
    JointDensity::new(betas.len(), case).eval(betas.betas())
}

#[inline]
fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

/// Ordered eigenvalues of a Gaussian Wigner matrix whose eigenvalue law is
/// exactly the joint density above.
///
/// Real: symmetric, diagonal `N(0, 2)`, off-diagonal `N(0, 1)`.
/// Complex: Hermitian, diagonal `N(0, 1)`, off-diagonal real and imaginary
/// parts independent `N(0, ½)`.
pub fn sample_wigner<R: Rng + ?Sized>(k: usize, case: ValueCase, rng: &mut R) -> FluctuationVector {
    assert!(k >= 1, "Wigner sampler needs K >= 1");
    let spec = match case {
        ValueCase::Real => {
            let mut m = RealMatrix::zeros(k, k);
            for i in 0..k {
                m[(i, i)] = 2f64.sqrt() * std_normal(rng);
                for j in (i + 1)..k {
                    let v = std_normal(rng);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            hermitian_eigenvalues(&m)
        }
        ValueCase::Complex => {
            let half = 0.5f64.sqrt();
            let mut m = ComplexMatrix::zeros(k, k);
            for i in 0..k {
                m[(i, i)] = Complex64::new(std_normal(rng), 0.0);
                for j in (i + 1)..k {
                    let v = Complex64::new(half * std_normal(rng), half * std_normal(rng));
                    m[(i, j)] = v;
                    m[(j, i)] = v.conj();
                }
            }
            hermitian_eigenvalues(&m)
        }
    }
    .expect("Wigner matrices are Hermitian by construction");
    FluctuationVector::new(spec.values().to_vec()).expect("spectrum is ordered")
}

/// Monte Carlo estimate of `∫ g_K` over the ordered cone, with the mean and
/// its standard error.
///
/// The proposal draws `K` i.i.d. `N(0, s²)` coordinates and sorts them, so its
/// density on the cone is `K! Π φ_s(β_i)`; `s` is wide enough that the ratio
/// `g_K / proposal` stays bounded.
pub fn importance_normalization(k: usize, case: ValueCase, draws: usize, seed: u64) -> (f64, f64) {
    const CHUNK: usize = 10_000;
    let density = JointDensity::new(k, case);
    let diag_sd = match case {
        ValueCase::Real => 2f64.sqrt(),
        ValueCase::Complex => 1.0,
    };
    let s = 1.5 * diag_sd * (k as f64).sqrt();
    let ln_kfact = ln_gamma(k as f64 + 1.0);
    let ln_phi_norm = -0.5 * (2.0 * PI).ln() - s.ln();
    let chunks = draws.div_ceil(CHUNK);
    let (sum, sum_sq) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, StreamDomain::Ensemble, c as u64);
            let count = CHUNK.min(draws - c * CHUNK);
            let mut x = vec![0.0; k];
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                for v in x.iter_mut() {
                    *v = s * std_normal(&mut rng);
                }
                x.sort_by(|a, b| b.total_cmp(a));
                let ln_q: f64 = ln_kfact + x.iter().map(|v| ln_phi_norm - 0.5 * (v / s).powi(2)).sum::<f64>();
                let w = density.eval(&x) / ln_q.exp();
                s1 += w;
                s2 += w * w;
            }
            (s1, s2)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d));
    let n = draws as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_examples() {
        let d1 = JointDensity::new(1, ValueCase::Real);
        assert!((d1.eval(&[0.0]) - 1.0 / (2.0 * PI.sqrt())).abs() < 1e-14);
        assert!((d1.eval(&[0.0]) - 0.282_095).abs() < 1e-6);

        let two_real = JointDensity::new(2, ValueCase::Real).eval(&[1.0, 0.0]);
        let want = (-0.25f64).exp() / (2f64.powf(2.5) * PI.sqrt());
        assert!((two_real - want).abs() < 1e-14);
        assert!((two_real - 0.077_674).abs() < 1e-6);

        let two_cplx = JointDensity::new(2, ValueCase::Complex).eval(&[1.0, 0.0]);
        assert!((two_cplx - (-0.5f64).exp() / (2.0 * PI)).abs() < 1e-14);
        assert!((two_cplx - 0.096_532).abs() < 1e-6);
    }

    #[test]
    fn k1_density_is_gaussian() {
        // N(0, 2) real, N(0, 1) complex.
        for x in [-3.0, -0.7, 0.0, 1.9] {
            let r = JointDensity::new(1, ValueCase::Real).eval(&[x]);
            let c = JointDensity::new(1, ValueCase::Complex).eval(&[x]);
            assert!((r - (-x * x / 4.0).exp() / (4.0 * PI).sqrt()).abs() < 1e-14);
            assert!((c - (-x * x / 2.0).exp() / (2.0 * PI).sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn unordered_points_have_zero_density() {
        assert_eq!(JointDensity::new(2, ValueCase::Real).eval(&[0.0, 1.0]), 0.0);
        assert!(FluctuationVector::new(vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn wigner_k1_moments() {
        for (case, var) in [(ValueCase::Real, 2.0), (ValueCase::Complex, 1.0)] {
            let mut rng = stream(11, StreamDomain::Ensemble, 0);
            let n = 100_000;
            let xs: Vec<f64> = (0..n).map(|_| sample_wigner(1, case, &mut rng).largest()).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let v = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!((v - var).abs() < 0.05, "{case:?}: variance {v}");
        }
    }

    #[test]
    fn wigner_output_is_ordered() {
        let mut rng = stream(5, StreamDomain::Ensemble, 1);
        for k in 1..=5 {
            for case in [ValueCase::Real, ValueCase::Complex] {
                let b = sample_wigner(k, case, &mut rng);
                assert_eq!(b.len(), k);
                assert!(b.betas().windows(2).all(|w| w[0] >= w[1]));
            }
        }
    }
}
