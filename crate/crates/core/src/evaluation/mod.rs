//! False-alarm / detection probabilities, rate estimates and goodness of fit.

mod baseline;

pub use baseline::{
    large_k_baseline_cdf, large_k_baseline_pd, large_k_baseline_threshold, large_k_cnd_ratio, large_k_formula,
    TracyWidomInput, TracyWidomOrder,
};

use serde::Serialize;

use crate::detectors::{s0_law, Decision, DetectorKind, Hypothesis};
use crate::eigen::{multiplicity_partition, EigenSpectrum};
use crate::error::{Result, SenseError};
use crate::rmt::{s1_cnd_law_with_form, s1_med_law, ConvolutionForm, DistributionTable};
use crate::signal::ValueCase;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// `P̄_f = 1 − F(√N(ε − 1))` under the matching S0 law.
pub fn theoretical_pfa(kind: DetectorKind, k: usize, n: usize, case: ValueCase, eps: f64) -> Result<f64> {
    let law = s0_law(kind, k, case)?;
    Ok(1.0 - law.cdf((n as f64).sqrt() * (eps - 1.0)))
}

/// Population quantities that drive the S1 limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct S1LawParams {
    pub mu1: f64,
    pub mur: f64,
    pub q1: usize,
    pub qr: usize,
    /// `σ_u² / μ_1`.
    pub alpha_m: f64,
    /// `μ_r / μ_1`.
    pub alpha_c: f64,
}

pub fn s1_params(pop: &EigenSpectrum, sigma_u2: f64, rel_tol: f64) -> Result<S1LawParams> {
    if !(sigma_u2 > 0.0) {
        return Err(SenseError::arg("sigma_u2 must be positive"));
    }
    let part = multiplicity_partition(pop, rel_tol);
    if part.distinct() < 2 {
        return Err(SenseError::IdenticalEigenvalues);
    }
    let (mu1, mur) = (part.mus[0], part.mus[part.distinct() - 1]);
    if !(mur > 0.0) {
        return Err(SenseError::arg("population eigenvalues must be positive"));
    }
    Ok(S1LawParams {
        mu1,
        mur,
        q1: part.qs[0],
        qr: part.qs[part.distinct() - 1],
        alpha_m: sigma_u2 / mu1,
        alpha_c: mur / mu1,
    })
}

/// Regulated S1 law and scaling `α` for a detector.
pub fn s1_law(
    kind: DetectorKind,
    case: ValueCase,
    params: &S1LawParams,
    form: ConvolutionForm,
) -> Result<(std::sync::Arc<DistributionTable>, f64)> {
    match kind {
        DetectorKind::Med => Ok((s1_med_law(params.q1, case)?, params.alpha_m)),
        DetectorKind::Cnd => Ok((s1_cnd_law_with_form(params.q1, params.qr, case, form)?, params.alpha_c)),
    }
}

/// `P_d = 1 − F(√N(α ε − 1))` with the S1 law of the detector.
pub fn theoretical_pd(kind: DetectorKind, _k: usize, n: usize, case: ValueCase, eps: f64, params: &S1LawParams) -> Result<f64> {
    theoretical_pd_with_form(kind, n, case, eps, params, ConvolutionForm::General)
}

pub fn theoretical_pd_with_form(
    kind: DetectorKind,
    n: usize,
    case: ValueCase,
    eps: f64,
    params: &S1LawParams,
    form: ConvolutionForm,
) -> Result<f64> {
    let (law, alpha) = s1_law(kind, case, params, form)?;
    Ok(1.0 - law.cdf((n as f64).sqrt() * (alpha * eps - 1.0)))
}

/// A rate with its 95% Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateEstimate {
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

/// Wilson score interval for `hits` successes out of `n` trials.
pub fn wilson(hits: usize, n: usize) -> Result<RateEstimate> {
    if n == 0 {
        return Err(SenseError::arg("rate of an empty sample is undefined"));
    }
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    Ok(RateEstimate {
        rate: p,
        ci_low: (center - half).clamp(0.0, p),
        ci_high: (center + half).clamp(p, 1.0),
        n,
    })
}

/// Fraction of H1 decisions with a Wilson interval.
pub fn empirical_rate(decisions: &[Decision]) -> Result<RateEstimate> {
    let hits = decisions.iter().filter(|d| d.hypothesis == Hypothesis::H1).count();
    wilson(hits, decisions.len())
}

/// Measured versus predicted rate at one target false-alarm level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePoint {
    pub target_pfa: f64,
    pub threshold: f64,
    pub empirical_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub theoretical_rate: f64,
    pub n_runs: usize,
}

impl RatePoint {
    pub fn new(target_pfa: f64, threshold: f64, measured: RateEstimate, theoretical_rate: f64) -> Self {
        Self {
            target_pfa,
            threshold,
            empirical_rate: measured.rate,
            ci_low: measured.ci_low,
            ci_high: measured.ci_high,
            theoretical_rate,
            n_runs: measured.n,
        }
    }
}

/// One-sample Kolmogorov–Smirnov distance between the empirical CDF of
/// `samples` and the tabulated CDF.
pub fn ks_distance(samples: &[f64], law: &DistributionTable) -> Result<f64> {
    ks_distance_with(samples, |x| law.cdf(x))
}

/// As [`ks_distance`] for an arbitrary CDF.
pub fn ks_distance_with(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.len() < 2 {
        return Err(SenseError::arg("KS distance needs at least two samples"));
    }
    let mut sorted = samples.to_vec();
    if sorted.windows(2).any(|w| w[0] > w[1]) {
        sorted.sort_by(f64::total_cmp);
    }
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

/// Sample Pearson correlation.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Empirical `(1 − p)`-quantile, the simulation-calibrated threshold.
pub fn upper_quantile(sorted: &[f64], p: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(SenseError::arg("empty sample"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(SenseError::arg(format!("probability must lie in (0, 1), got {p}")));
    }
    let n = sorted.len();
    // Smallest order statistic with at most a fraction p of the sample above it.
    let above = (p * n as f64).floor() as usize;
    Ok(sorted[n - 1 - above.min(n - 1)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::{decide, threshold_for_pfa};
    use crate::rmt::{GridSpec, Law, TableMethod};
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn pfa_examples() {
        let p = theoretical_pfa(DetectorKind::Cnd, 2, 10_000, ValueCase::Real, 1.042_919).unwrap();
        assert!((p - 0.1).abs() < 1e-3);
        assert_eq!(theoretical_pfa(DetectorKind::Cnd, 2, 10_000, ValueCase::Real, 1.0).unwrap(), 1.0);
        let half = theoretical_pfa(DetectorKind::Med, 1, 1000, ValueCase::Real, 1.0).unwrap();
        assert!((half - 0.5).abs() < 1e-6);
    }

    #[test]
    fn pfa_round_trip() {
        for kind in [DetectorKind::Med, DetectorKind::Cnd] {
            for case in [ValueCase::Real, ValueCase::Complex] {
                for p in [0.02, 0.1, 0.37] {
                    let eps = threshold_for_pfa(kind, 2, 1000, case, p).unwrap();
                    let back = theoretical_pfa(kind, 2, 1000, case, eps).unwrap();
                    assert!((back - p).abs() < 1e-6, "{kind:?} {case:?} {p}: {back}");
                }
            }
        }
    }

    #[test]
    fn s1_params_examples() {
        let p = s1_params(&EigenSpectrum::new(vec![3.0, 1.0]).unwrap(), 1.0, 1e-9).unwrap();
        assert_eq!((p.mu1, p.mur, p.q1, p.qr), (3.0, 1.0, 1, 1));
        assert!((p.alpha_m - 1.0 / 3.0).abs() < 1e-15 && (p.alpha_c - 1.0 / 3.0).abs() < 1e-15);
        let p = s1_params(&EigenSpectrum::new(vec![5.0, 2.0, 2.0]).unwrap(), 2.0, 1e-9).unwrap();
        assert_eq!((p.q1, p.qr), (1, 2));
        assert!((p.alpha_c - 0.4).abs() < 1e-15);
        assert!(matches!(
            s1_params(&EigenSpectrum::new(vec![1.0, 1.0]).unwrap(), 1.0, 1e-9),
            Err(SenseError::IdenticalEigenvalues)
        ));
    }

    #[test]
    fn pd_gaussian_reduction() {
        let params = S1LawParams { mu1: 3.0, mur: 1.0, q1: 1, qr: 1, alpha_m: 1.0 / 3.0, alpha_c: 1.0 / 3.0 };
        let std = Normal::new(0.0, 1.0).unwrap();
        for eps in [2.9, 3.0, 3.02, 3.1] {
            let pd = theoretical_pd(DetectorKind::Cnd, 2, 10_000, ValueCase::Real, eps, &params).unwrap();
            let arg = 100.0 * (eps / 3.0 - 1.0) / 2.0;
            assert!((pd - (1.0 - std.cdf(arg))).abs() < 1e-5, "eps={eps}");
        }
        let centered = theoretical_pd(DetectorKind::Cnd, 2, 10_000, ValueCase::Real, 3.0, &params).unwrap();
        assert!((centered - 0.5).abs() < 1e-6);
        let saturated = theoretical_pd(DetectorKind::Cnd, 2, 10_000, ValueCase::Real, 1.042_919, &params).unwrap();
        assert!(saturated > 1.0 - 1e-9);
    }

    #[test]
    fn pd_monotone_in_threshold_and_snr() {
        let params = |mu1: f64| S1LawParams { mu1, mur: 1.0, q1: 1, qr: 1, alpha_m: 1.0 / mu1, alpha_c: 1.0 / mu1 };
        let pd = |eps, mu1| theoretical_pd(DetectorKind::Cnd, 2, 10_000, ValueCase::Real, eps, &params(mu1)).unwrap();
        assert!(pd(1.03, 1.06) >= pd(1.04, 1.06));
        assert!(pd(1.04, 1.08) >= pd(1.04, 1.06));
    }

    #[test]
    fn wilson_examples() {
        let r = wilson(100, 1000).unwrap();
        assert_eq!(r.rate, 0.1);
        assert!((r.ci_low - 0.083).abs() < 5e-4 && (r.ci_high - 0.120).abs() < 5e-4, "{r:?}");
        let zero = wilson(0, 50).unwrap();
        assert_eq!((zero.rate, zero.ci_low), (0.0, 0.0));
        assert_eq!(wilson(50, 50).unwrap().rate, 1.0);
        assert!(wilson(0, 0).is_err());
        assert!(empirical_rate(&[]).is_err());
        let ds = [decide(2.0, 1.0), decide(0.5, 1.0)];
        assert_eq!(empirical_rate(&ds).unwrap().rate, 0.5);
    }

    #[test]
    fn ks_examples() {
        let law = crate::rmt::marginal(1, 1, ValueCase::Complex).unwrap();
        let far: Vec<f64> = (0..100).map(|i| 10.0 + i as f64 * 0.01).collect();
        assert!(ks_distance(&far, &law).unwrap() > 0.999);
        assert!(ks_distance(&[1.0], &law).is_err());

        let samples: Vec<f64> = (0..10_000).map(|i| (i as f64 + 0.5) / 10_000.0).collect();
        let grid = GridSpec::new(-0.5, 1.5, 4001);
        let own = DistributionTable::from_samples(&samples, grid, Law::Empirical, ValueCase::Real, TableMethod::Empirical { samples: 10_000 }).unwrap();
        let d = ks_distance(&samples, &own).unwrap();
        assert!(d <= 1.0 / 10_000.0 + 1e-12 + own.resolution(), "{d}");
    }

    #[test]
    fn upper_quantile_picks_order_statistic() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(upper_quantile(&xs, 0.1).unwrap(), 90.0);
        assert_eq!(upper_quantile(&xs, 0.02).unwrap(), 98.0);
        assert!(upper_quantile(&xs, 1.0).is_err());
    }
}
