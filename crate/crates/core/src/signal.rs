//! Received-sample generation for the noise-only (S0) and signal-present (S1)
//! scenarios, plus SNR bookkeeping.
//!
//! Complex Gaussians are circularly symmetric: a total variance `σ²` is split
//! evenly between the real and imaginary parts.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SenseError};
use crate::matrix::{ComplexMatrix, RealMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueCase {
    Real,
    Complex,
}

impl ValueCase {
    pub fn as_str(self) -> &'static str {
        match self {
            ValueCase::Real => "real",
            ValueCase::Complex => "complex",
        }
    }
}

impl std::str::FromStr for ValueCase {
    type Err = SenseError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "real" => Ok(ValueCase::Real),
            "complex" => Ok(ValueCase::Complex),
            other => Err(SenseError::config("case", format!("expected real|complex, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Noise only.
    S0,
    /// Noise plus `t` active primary signals.
    S1,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::S0 => "s0",
            Scenario::S1 => "s1",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "s0" => Ok(Scenario::S0),
            "s1" => Ok(Scenario::S1),
            _ => Err(format!("unknown scenario `{s}` (s0|s1)")),
        }
    }
}

/// Everything needed to draw one `K × N` block of received samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Antenna count.
    pub k: usize,
    /// Samples per antenna.
    pub n: usize,
    pub case: ValueCase,
    pub scenario: Scenario,
    pub sigma_s2: f64,
    pub sigma_u2: f64,
    /// `K × t` channel gains; required under S1.
    pub channel: Option<ComplexMatrix>,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn noise_only(k: usize, n: usize, case: ValueCase, sigma_u2: f64, seed: u64) -> Self {
        Self {
            k,
            n,
            case,
            scenario: Scenario::S0,
            sigma_s2: 0.0,
            sigma_u2,
            channel: None,
            seed,
        }
    }

    pub fn with_signal(
        k: usize,
        n: usize,
        case: ValueCase,
        channel: ComplexMatrix,
        sigma_s2: f64,
        sigma_u2: f64,
        seed: u64,
    ) -> Self {
        Self {
            k,
            n,
            case,
            scenario: Scenario::S1,
            sigma_s2,
            sigma_u2,
            channel: Some(channel),
            seed,
        }
    }

    /// Number of active primary users (columns of the channel).
    pub fn pu_count(&self) -> usize {
        self.channel.as_ref().map_or(0, ComplexMatrix::cols)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(SenseError::config("K", "antenna count must be at least 1"));
        }
        if self.n == 0 {
            return Err(SenseError::config("N", "sample count must be at least 1"));
        }
        if !(self.sigma_u2 > 0.0 && self.sigma_u2.is_finite()) {
            return Err(SenseError::config("sigma_u2", "noise variance must be positive and finite"));
        }
        if self.scenario == Scenario::S1 {
            if !(self.sigma_s2 >= 0.0 && self.sigma_s2.is_finite()) {
                return Err(SenseError::config("sigma_s2", "signal variance must be nonnegative and finite"));
            }
            let h = self
                .channel
                .as_ref()
                .ok_or_else(|| SenseError::config("channel", "scenario S1 requires a channel matrix"))?;
            if h.rows() != self.k || h.cols() == 0 {
                return Err(SenseError::config(
                    "channel",
                    format!("expected {} x t with t >= 1, got {} x {}", self.k, h.rows(), h.cols()),
                ));
            }
            if h.is_zero() {
                return Err(SenseError::config("channel", "channel must have at least one nonzero entry"));
            }
            if self.case == ValueCase::Real && h.as_slice().iter().any(|z| z.im != 0.0) {
                return Err(SenseError::config("channel", "real-valued case requires real channel gains"));
            }
        }
        Ok(())
    }
}

/// Received samples `X = [x(0), …, x(N−1)]`, one row per antenna.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleMatrix {
    Real(RealMatrix),
    Complex(ComplexMatrix),
}

impl SampleMatrix {
    pub fn case(&self) -> ValueCase {
        match self {
            SampleMatrix::Real(_) => ValueCase::Real,
            SampleMatrix::Complex(_) => ValueCase::Complex,
        }
    }

    pub fn antennas(&self) -> usize {
        match self {
            SampleMatrix::Real(m) => m.rows(),
            SampleMatrix::Complex(m) => m.rows(),
        }
    }

    pub fn samples(&self) -> usize {
        match self {
            SampleMatrix::Real(m) => m.cols(),
            SampleMatrix::Complex(m) => m.cols(),
        }
    }
}

#[inline]
fn normal<R: Rng + ?Sized>(rng: &mut R, sd: f64) -> f64 {
    sd * rng.sample::<f64, _>(StandardNormal)
}

#[inline]
fn complex_normal<R: Rng + ?Sized>(rng: &mut R, part_sd: f64) -> Complex64 {
    Complex64::new(normal(rng, part_sd), normal(rng, part_sd))
}

/// Draws a noise-only block: i.i.d. zero-mean entries with variance `sigma_u2`.
pub fn generate_noise<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<SampleMatrix> {
    if cfg.scenario != Scenario::S0 {
        return Err(SenseError::arg("generate_noise requires scenario S0"));
    }
    cfg.validate()?;
    Ok(noise_block(cfg.k, cfg.n, cfg.case, cfg.sigma_u2, rng))
}

fn noise_block<R: Rng + ?Sized>(k: usize, n: usize, case: ValueCase, sigma_u2: f64, rng: &mut R) -> SampleMatrix {
    match case {
        ValueCase::Real => {
            let sd = sigma_u2.sqrt();
            let data = (0..k * n).map(|_| normal(rng, sd)).collect();
            SampleMatrix::Real(RealMatrix::from_vec(k, n, data))
        }
        ValueCase::Complex => {
            let sd = (sigma_u2 / 2.0).sqrt();
            let data = (0..k * n).map(|_| complex_normal(rng, sd)).collect();
            SampleMatrix::Complex(ComplexMatrix::from_vec(k, n, data))
        }
    }
}

/// Draws `x(n) = H s(n) + u(n)` with `s(n)` i.i.d. of variance `sigma_s2`
/// independent of the noise.
///
/// Signal samples for column `n` are drawn before the noise of that column, so
/// the same stream always yields the same block.
pub fn generate_received<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<SampleMatrix> {
    if cfg.scenario != Scenario::S1 {
        return Err(SenseError::arg("generate_received requires scenario S1"));
    }
    cfg.validate()?;
    let h = cfg.channel.as_ref().expect("validated");
    let (k, n, t) = (cfg.k, cfg.n, h.cols());
    match cfg.case {
        ValueCase::Real => {
            let s_sd = cfg.sigma_s2.sqrt();
            let gains: Vec<f64> = h.as_slice().iter().map(|z| z.re).collect();
            let u_sd = cfg.sigma_u2.sqrt();
            let mut x = RealMatrix::zeros(k, n);
            let mut s = vec![0.0; t];
            for col in 0..n {
                s.iter_mut().for_each(|v| *v = normal(rng, s_sd));
                for i in 0..k {
                    let row = &gains[i * t..(i + 1) * t];
                    let signal: f64 = row.iter().zip(&s).map(|(g, v)| g * v).sum();
                    x[(i, col)] = signal + normal(rng, u_sd);
                }
            }
            Ok(SampleMatrix::Real(x))
        }
        ValueCase::Complex => {
            let s_part = (cfg.sigma_s2 / 2.0).sqrt();
            let u_part = (cfg.sigma_u2 / 2.0).sqrt();
            let mut x = ComplexMatrix::zeros(k, n);
            let mut s = vec![Complex64::new(0.0, 0.0); t];
            for col in 0..n {
                s.iter_mut().for_each(|v| *v = complex_normal(rng, s_part));
                for i in 0..k {
                    let signal: Complex64 = (0..t).map(|l| h[(i, l)] * s[l]).sum();
                    x[(i, col)] = signal + complex_normal(rng, u_part);
                }
            }
            Ok(SampleMatrix::Complex(x))
        }
    }
}

/// Average received SNR as a linear power ratio.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Snr(pub f64);

impl Snr {
    pub fn from_db(db: f64) -> Self {
        Snr(10f64.powf(db / 10.0))
    }

    pub fn linear(self) -> f64 {
        self.0
    }

    pub fn db(self) -> f64 {
        10.0 * self.0.log10()
    }
}

/// `Σ‖h_ℓ‖² σ_s² / (K σ_u²)`.
pub fn compute_snr(channel: &ComplexMatrix, sigma_s2: f64, sigma_u2: f64, k: usize) -> Result<Snr> {
    if !(sigma_u2 > 0.0) {
        return Err(SenseError::arg("sigma_u2 must be positive"));
    }
    if k == 0 {
        return Err(SenseError::arg("K must be at least 1"));
    }
    Ok(Snr(channel.frobenius_sqr() * sigma_s2 / (k as f64 * sigma_u2)))
}

/// Rescales `channel` so that [`compute_snr`] returns `target_snr_db`.
pub fn scale_channel_to_snr(
    channel: &ComplexMatrix,
    sigma_s2: f64,
    sigma_u2: f64,
    k: usize,
    target_snr_db: f64,
) -> Result<ComplexMatrix> {
    if channel.is_zero() {
        return Err(SenseError::arg("cannot scale an all-zero channel"));
    }
    if !target_snr_db.is_finite() {
        return Err(SenseError::arg(format!("target SNR must be finite, got {target_snr_db} dB")));
    }
    if !(sigma_s2 > 0.0) {
        return Err(SenseError::arg("sigma_s2 must be positive to reach a target SNR"));
    }
    let current = compute_snr(channel, sigma_s2, sigma_u2, k)?.linear();
    let target = Snr::from_db(target_snr_db).linear();
    Ok(channel.scaled((target / current).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamDomain};

    fn col(v: &[f64]) -> ComplexMatrix {
        ComplexMatrix::from_vec(v.len(), 1, v.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    #[test]
    fn snr_definition() {
        let h = col(&[1.0, 1.0]);
        let snr = compute_snr(&h, 1.0, 1.0, 2).unwrap();
        assert_eq!(snr.linear(), 1.0);
        assert_eq!(snr.db(), 0.0);
        let scaled = compute_snr(&h.scaled(3.0), 1.0, 1.0, 2).unwrap();
        assert!((scaled.linear() - 9.0).abs() < 1e-12);
        assert!(compute_snr(&h, 1.0, 0.0, 2).is_err());
    }

    #[test]
    fn snr_minus_15_db_power_budget() {
        // ‖H‖² σ_s² / σ_u² = K · 10^(−1.5)
        let h = scale_channel_to_snr(&col(&[1.0, 1.0]), 1.0, 1.0, 2, -15.0).unwrap();
        assert!((h.frobenius_sqr() - 2.0 * 10f64.powf(-1.5)).abs() < 1e-12);
        assert!((h.frobenius_sqr() - 0.063_245_553).abs() < 1e-8);
    }

    #[test]
    fn scale_to_snr() {
        let h = col(&[1.0, 1.0]);
        let same = scale_channel_to_snr(&h, 1.0, 1.0, 2, 0.0).unwrap();
        assert!(same.max_abs_diff(&h) < 1e-15);
        let halved = scale_channel_to_snr(&col(&[2.0, 2.0]), 1.0, 1.0, 2, 0.0).unwrap();
        assert!(halved.max_abs_diff(&h) < 1e-15);
        for db in [-20.0, -15.0, -3.3, 7.0] {
            let s = scale_channel_to_snr(&col(&[0.3, -1.7]), 2.0, 0.5, 2, db).unwrap();
            let got = compute_snr(&s, 2.0, 0.5, 2).unwrap().linear();
            let want = Snr::from_db(db).linear();
            assert!(((got - want) / want).abs() < 1e-12);
        }
        assert!(scale_channel_to_snr(&h, 1.0, 1.0, 2, f64::NEG_INFINITY).is_err());
        assert!(scale_channel_to_snr(&col(&[0.0, 0.0]), 1.0, 1.0, 2, 0.0).is_err());
    }

    #[test]
    fn noise_rejects_bad_configs() {
        let mut rng = stream(1, StreamDomain::Custom(0), 0);
        let cfg = ScenarioConfig::noise_only(2, 8, ValueCase::Real, 0.0, 1);
        assert!(generate_noise(&cfg, &mut rng).is_err());
        let s1 = ScenarioConfig::with_signal(2, 8, ValueCase::Real, col(&[1.0, 1.0]), 1.0, 1.0, 1);
        assert!(generate_noise(&s1, &mut rng).is_err());
        let s0 = ScenarioConfig::noise_only(2, 8, ValueCase::Real, 1.0, 1);
        assert!(generate_received(&s0, &mut rng).is_err());
    }

    #[test]
    fn received_rejects_bad_channels() {
        let mut rng = stream(1, StreamDomain::Custom(0), 0);
        let zero = ScenarioConfig::with_signal(2, 8, ValueCase::Real, col(&[0.0, 0.0]), 1.0, 1.0, 1);
        assert!(generate_received(&zero, &mut rng).is_err());
        let wrong = ScenarioConfig::with_signal(3, 8, ValueCase::Real, col(&[1.0, 1.0]), 1.0, 1.0, 1);
        assert!(generate_received(&wrong, &mut rng).is_err());
        let mut missing = zero.clone();
        missing.channel = None;
        assert!(generate_received(&missing, &mut rng).is_err());
        let cplx = ComplexMatrix::from_vec(2, 1, vec![Complex64::new(0.0, 1.0), Complex64::new(1.0, 0.0)]);
        let real_with_complex = ScenarioConfig::with_signal(2, 8, ValueCase::Real, cplx.clone(), 1.0, 1.0, 1);
        assert!(generate_received(&real_with_complex, &mut rng).is_err());
        let ok = ScenarioConfig::with_signal(2, 8, ValueCase::Complex, cplx, 1.0, 1.0, 1);
        assert_eq!(generate_received(&ok, &mut rng).unwrap().case(), ValueCase::Complex);
    }

    #[test]
    fn deterministic_given_stream() {
        let cfg = ScenarioConfig::noise_only(3, 50, ValueCase::Complex, 1.0, 9);
        let a = generate_noise(&cfg, &mut stream(9, StreamDomain::NoiseOnly, 5)).unwrap();
        let b = generate_noise(&cfg, &mut stream(9, StreamDomain::NoiseOnly, 5)).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.antennas(), a.samples()), (3, 50));
    }

    #[test]
    fn zero_signal_power_is_noise() {
        // Same stream: signal draws still consume numbers, so compare laws through moments.
        let cfg = ScenarioConfig::with_signal(2, 200_000, ValueCase::Real, col(&[1.0, 1.0]), 0.0, 1.0, 3);
        let SampleMatrix::Real(x) = generate_received(&cfg, &mut stream(3, StreamDomain::SignalPresent, 0)).unwrap() else {
            unreachable!()
        };
        let m = x.as_slice().len() as f64;
        let var = x.as_slice().iter().map(|v| v * v).sum::<f64>() / m;
        assert!((var - 1.0).abs() < 0.02);
    }
}
