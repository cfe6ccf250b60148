//! Maximum-eigenvalue (MED) and condition-number (CND) detectors.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::eigen::EigenSpectrum;
use crate::error::{Result, SenseError};
use crate::rmt::{cnd_s0_law, marginal, DistributionTable};
use crate::signal::ValueCase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    /// `T = λ̂_1 / σ_u²`; needs the noise power.
    Med,
    /// `T = λ̂_1 / λ̂_K`; noise-power free.
    Cnd,
}

impl DetectorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DetectorKind::Med => "med",
            DetectorKind::Cnd => "cnd",
        }
    }
}

impl std::str::FromStr for DetectorKind {
    type Err = SenseError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "med" => Ok(DetectorKind::Med),
            "cnd" => Ok(DetectorKind::Cnd),
            other => Err(SenseError::config("detector", format!("expected med|cnd, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub statistic: f64,
    pub threshold: f64,
    pub hypothesis: Hypothesis,
}

pub fn med_statistic(spec: &EigenSpectrum, sigma_u2: f64) -> Result<f64> {
    if !(sigma_u2 > 0.0) {
        return Err(SenseError::arg("MED needs a positive noise variance"));
    }
    Ok(spec.largest() / sigma_u2)
}

pub fn cnd_statistic(spec: &EigenSpectrum) -> Result<f64> {
    let smallest = spec.smallest();
    if !(smallest > 0.0) {
        return Err(SenseError::RankDeficient(smallest));
    }
    Ok(spec.largest() / smallest)
}

/// Test statistic of `kind` for one spectrum.
pub fn statistic(kind: DetectorKind, spec: &EigenSpectrum, sigma_u2: f64) -> Result<f64> {
    match kind {
        DetectorKind::Med => med_statistic(spec, sigma_u2),
        DetectorKind::Cnd => cnd_statistic(spec),
    }
}

/// `√N (T − 1)`.
pub fn regulated(statistic: f64, n: usize) -> f64 {
    (n as f64).sqrt() * (statistic - 1.0)
}

/// Limiting law of the regulated statistic under S0.
pub fn s0_law(kind: DetectorKind, k: usize, case: ValueCase) -> Result<Arc<DistributionTable>> {
    match kind {
        DetectorKind::Med => marginal(k, 1, case),
        DetectorKind::Cnd => {
            if k < 2 {
                return Err(SenseError::arg("CND needs K >= 2"));
            }
            cnd_s0_law(k, case)
        }
    }
}

/// `ε = 1 + F⁻¹(1 − P̄_f) / √N` with `F` the S0 law of the detector.
pub fn threshold_for_pfa(kind: DetectorKind, k: usize, n: usize, case: ValueCase, target_pfa: f64) -> Result<f64> {
    if !(target_pfa > 0.0 && target_pfa < 1.0) {
        return Err(SenseError::arg(format!("target false-alarm probability must lie in (0, 1), got {target_pfa}")));
    }
    if n == 0 {
        return Err(SenseError::arg("N must be at least 1"));
    }
    let law = s0_law(kind, k, case)?;
    Ok(1.0 + law.quantile(1.0 - target_pfa)? / (n as f64).sqrt())
}

/// Declares H1 only when `statistic > threshold`; ties go to H0.
pub fn decide(statistic: f64, threshold: f64) -> Decision {
    let hypothesis = if statistic > threshold { Hypothesis::H1 } else { Hypothesis::H0 };
    Decision {
        statistic,
        threshold,
        hypothesis,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(v: &[f64]) -> EigenSpectrum {
        EigenSpectrum::new(v.to_vec()).unwrap()
    }

    #[test]
    fn statistics() {
        assert!((med_statistic(&spec(&[2.2, 0.8]), 2.0).unwrap() - 1.1).abs() < 1e-15);
        assert_eq!(med_statistic(&spec(&[2.0, 1.0]), 2.0).unwrap(), 1.0);
        assert!(med_statistic(&spec(&[2.0]), 0.0).is_err());
        assert_eq!(cnd_statistic(&spec(&[3.0, 1.0])).unwrap(), 3.0);
        assert_eq!(cnd_statistic(&spec(&[1.0, 1.0])).unwrap(), 1.0);
        assert!(matches!(cnd_statistic(&spec(&[1.0, 0.0])), Err(SenseError::RankDeficient(_))));
    }

    #[test]
    fn cnd_threshold_k2_real() {
        let eps = threshold_for_pfa(DetectorKind::Cnd, 2, 10_000, ValueCase::Real, 0.1).unwrap();
        let want = 1.0 + (8.0 * 10f64.ln()).sqrt() / 100.0;
        assert!((eps - want).abs() < 1e-6, "{eps} vs {want}");
        assert!((eps - 1.042_919).abs() < 1e-6);
    }

    #[test]
    fn med_threshold_k1_real() {
        let eps = threshold_for_pfa(DetectorKind::Med, 1, 1000, ValueCase::Real, 0.05).unwrap();
        let want = 1.0 + 1.644_853_626_951_472_2 * 2f64.sqrt() / 1000f64.sqrt();
        assert!((eps - want).abs() < 1e-5, "{eps} vs {want}");
        assert!((eps - 1.073_558).abs() < 1e-5);
    }

    #[test]
    fn threshold_arguments() {
        assert!(threshold_for_pfa(DetectorKind::Cnd, 1, 100, ValueCase::Real, 0.1).is_err());
        assert!(threshold_for_pfa(DetectorKind::Med, 2, 100, ValueCase::Real, 0.0).is_err());
        assert!(threshold_for_pfa(DetectorKind::Med, 2, 100, ValueCase::Real, 1.0).is_err());
        assert!(threshold_for_pfa(DetectorKind::Med, 2, 0, ValueCase::Real, 0.5).is_err());
    }

    #[test]
    fn cnd_threshold_approaches_one() {
        let eps = threshold_for_pfa(DetectorKind::Cnd, 2, 10_000, ValueCase::Real, 1.0 - 1e-12).unwrap();
        assert!(eps >= 1.0 && eps - 1.0 < 1e-3);
    }

    #[test]
    fn threshold_monotonicity() {
        for kind in [DetectorKind::Med, DetectorKind::Cnd] {
            let pfas = [0.02, 0.05, 0.1, 0.2, 0.5];
            let eps: Vec<f64> = pfas.iter().map(|&p| threshold_for_pfa(kind, 2, 1000, ValueCase::Real, p).unwrap()).collect();
            assert!(eps.windows(2).all(|w| w[0] > w[1]), "{kind:?}: {eps:?}");
            let by_n: Vec<f64> = [100, 1000, 10_000]
                .iter()
                .map(|&n| threshold_for_pfa(kind, 2, n, ValueCase::Real, 0.1).unwrap())
                .collect();
            assert!(by_n.windows(2).all(|w| w[0] > w[1] && w[1] > 1.0));
        }
    }

    #[test]
    fn decision_rule() {
        assert_eq!(decide(1.05, 1.042919).hypothesis, Hypothesis::H1);
        assert_eq!(decide(1.04, 1.04).hypothesis, Hypothesis::H0);
        assert_eq!(decide(0.99, 1.04).hypothesis, Hypothesis::H0);
    }

    proptest! {
        #[test]
        fn cnd_scale_invariant(a in 0.1f64..10.0, b in 0.01f64..1.0, c in 1e-3f64..1e3) {
            let s = spec(&[a, a * b]);
            let (t, scaled) = (cnd_statistic(&s).unwrap(), cnd_statistic(&s.scaled(c)).unwrap());
            // Exact up to the rounding of the two products.
            prop_assert!((t - scaled).abs() <= 4.0 * f64::EPSILON * t);
        }

        #[test]
        fn med_scale_covariant(a in 0.1f64..10.0, b in 0.01f64..1.0, c in 1e-3f64..1e3, s2 in 0.1f64..5.0) {
            let s = spec(&[a, a * b]);
            let lhs = med_statistic(&s.scaled(c), s2).unwrap();
            let rhs = c * med_statistic(&s, s2).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-14 * rhs.abs());
        }
    }
}
