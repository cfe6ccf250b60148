//! Large-(K, N) comparison curves built on Tracy–Widom quantiles.
//!
//! Tracy–Widom values are never computed here: the caller supplies them,
//! either as a tabulated CDF or as the parameters of a shifted-gamma
//! approximation, together with a provenance string that ends up in
//! experiment metadata.

use std::path::Path;

use statrs::distribution::{ContinuousCDF, Gamma};

use crate::detectors::DetectorKind;
use crate::error::{Result, SenseError};
use crate::evaluation::S1LawParams;
use crate::signal::ValueCase;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TracyWidomOrder {
    /// Real-valued samples.
    Beta1,
    /// Complex-valued samples.
    Beta2,
}

impl TracyWidomOrder {
    pub fn for_case(case: ValueCase) -> Self {
        match case {
            ValueCase::Real => TracyWidomOrder::Beta1,
            ValueCase::Complex => TracyWidomOrder::Beta2,
        }
    }
}

/// Externally supplied Tracy–Widom law.
#[derive(Debug, Clone, PartialEq)]
pub enum TracyWidomInput {
    /// `Gamma(shape, scale) − shift`.
    ShiftedGamma { shape: f64, scale: f64, shift: f64 },
    /// Tabulated CDF, linearly interpolated.
    Table { x: Vec<f64>, cdf: Vec<f64>, source: String },
}

impl TracyWidomInput {
    /// Parses `gamma:<shape>:<scale>:<shift>` or `table:<path>`.
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = |reason: String| SenseError::config("tw_source", reason);
        if let Some(rest) = spec.strip_prefix("gamma:") {
            let vals: Vec<f64> = rest
                .split(':')
                .map(|v| v.trim().parse::<f64>().map_err(|e| bad(format!("`{v}`: {e}"))))
                .collect::<Result<_>>()?;
            let [shape, scale, shift] = vals[..] else {
                return Err(bad(format!("expected gamma:<shape>:<scale>:<shift>, got `{spec}`")));
            };
            if !(shape > 0.0 && scale > 0.0) {
                return Err(bad("gamma shape and scale must be positive".into()));
            }
            Ok(TracyWidomInput::ShiftedGamma { shape, scale, shift })
        } else if let Some(path) = spec.strip_prefix("table:") {
            Self::read_table(Path::new(path))
        } else {
            Err(bad(format!("expected gamma:... or table:..., got `{spec}`")))
        }
    }

    /// Reads `x,cdf` rows (a header line and `#` comments are skipped).
    pub fn read_table(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| SenseError::Io { path: path.to_path_buf(), source })?;
        let bad = |reason: String| SenseError::Parse { path: path.to_path_buf(), reason };
        let (mut x, mut cdf) = (Vec::new(), Vec::new());
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with('x') {
                continue;
            }
            let (a, b) = line.split_once(',').ok_or_else(|| bad(format!("line {}: expected x,cdf", n + 1)))?;
            x.push(a.trim().parse::<f64>().map_err(|e| bad(format!("line {}: {e}", n + 1)))?);
            cdf.push(b.trim().parse::<f64>().map_err(|e| bad(format!("line {}: {e}", n + 1)))?);
        }
        if x.len() < 2 || x.windows(2).any(|w| w[1] <= w[0]) || cdf.windows(2).any(|w| w[1] < w[0]) {
            return Err(bad("table must have >= 2 rows, increasing x and nondecreasing cdf".into()));
        }
        Ok(TracyWidomInput::Table { x, cdf, source: path.display().to_string() })
    }

    pub fn provenance(&self) -> String {
        match self {
            TracyWidomInput::ShiftedGamma { shape, scale, shift } => {
                format!("shifted-gamma approximation Gamma(shape={shape}, scale={scale}) - {shift} (user supplied)")
            }
            TracyWidomInput::Table { source, .. } => format!("tabulated CDF from {source}"),
        }
    }

    fn gamma(shape: f64, scale: f64) -> Gamma {
        Gamma::new(shape, 1.0 / scale).expect("validated parameters")
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            TracyWidomInput::ShiftedGamma { shape, scale, shift } => {
                let y = x + shift;
                if y <= 0.0 {
                    0.0
                } else {
                    Self::gamma(*shape, *scale).cdf(y)
                }
            }
            TracyWidomInput::Table { x: xs, cdf, .. } => {
                if x <= xs[0] {
                    return cdf[0];
                }
                if x >= xs[xs.len() - 1] {
                    return cdf[cdf.len() - 1];
                }
                let i = xs.partition_point(|&v| v <= x);
                let w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
                cdf[i - 1] + w * (cdf[i] - cdf[i - 1])
            }
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(SenseError::arg(format!("Tracy-Widom quantile needs p in (0, 1), got {p}")));
        }
        match self {
            TracyWidomInput::ShiftedGamma { shape, scale, shift } => Ok(Self::gamma(*shape, *scale).inverse_cdf(p) - shift),
            TracyWidomInput::Table { x, cdf, .. } => {
                if p < cdf[0] || p > cdf[cdf.len() - 1] {
                    return Err(SenseError::arg(format!("p = {p} lies outside the supplied Tracy-Widom table")));
                }
                let i = cdf.partition_point(|&c| c < p).max(1);
                let (c0, c1) = (cdf[i - 1], cdf[i]);
                if c1 == c0 {
                    return Ok(x[i - 1]);
                }
                Ok(x[i - 1] + (p - c0) / (c1 - c0) * (x[i] - x[i - 1]))
            }
        }
    }
}

/// Centering and scaling of the largest eigenvalue of `X Xᴴ` for white noise
/// of unit variance.
fn edge_scaling(k: usize, n: usize, case: ValueCase) -> (f64, f64) {
    let kk = (k as f64).sqrt();
    let nn = match case {
        ValueCase::Real => ((n - 1) as f64).sqrt(),
        ValueCase::Complex => (n as f64).sqrt(),
    };
    let mu = (nn + kk).powi(2);
    let sigma = (nn + kk) * (1.0 / nn + 1.0 / kk).cbrt();
    (mu, sigma)
}

/// `(√N + √K)² / (√N − √K)²`, the large-(K, N) limit of the condition number.
pub fn large_k_cnd_ratio(k: usize, n: usize) -> Result<f64> {
    if n <= k {
        return Err(SenseError::arg("large-K condition-number limit needs N > K"));
    }
    let (nn, kk) = ((n as f64).sqrt(), (k as f64).sqrt());
    Ok(((nn + kk) / (nn - kk)).powi(2))
}

fn cnd_tw_scale(k: usize, n: usize) -> f64 {
    let (nn, kk) = ((n as f64).sqrt(), (k as f64).sqrt());
    (nn + kk).powf(-2.0 / 3.0) / ((n * k) as f64).powf(1.0 / 6.0)
}

fn require_n(kind: DetectorKind, k: usize, n: usize) -> Result<()> {
    if k == 0 || n < 2 {
        return Err(SenseError::arg("large-K baseline needs K >= 1 and N >= 2"));
    }
    if kind == DetectorKind::Cnd && k < 2 {
        return Err(SenseError::arg("CND needs K >= 2"));
    }
    Ok(())
}

/// Human-readable formula behind each baseline quantity, for metadata.
pub fn large_k_formula(kind: DetectorKind, case: ValueCase) -> &'static str {
    match (kind, case) {
        (DetectorKind::Med, ValueCase::Real) => {
            "threshold eps=(mu+sigma*q)/N, mu=(sqrt(N-1)+sqrt(K))^2, sigma=(sqrt(N-1)+sqrt(K))*(1/sqrt(N-1)+1/sqrt(K))^(1/3), q=TW1^-1(1-Pfa); \
             Pd=1-TW1((N*eps*sigma_u2/rho1-mu)/sigma)"
        }
        (DetectorKind::Med, ValueCase::Complex) => {
            "threshold eps=(mu+sigma*q)/N, mu=(sqrt(N)+sqrt(K))^2, sigma=(sqrt(N)+sqrt(K))*(1/sqrt(N)+1/sqrt(K))^(1/3), q=TW2^-1(1-Pfa); \
             Pd=1-TW2((N*eps*sigma_u2/rho1-mu)/sigma)"
        }
        (DetectorKind::Cnd, _) => {
            "threshold eps=((sqrt(N)+sqrt(K))^2/(sqrt(N)-sqrt(K))^2)*(1+(sqrt(N)+sqrt(K))^(-2/3)*(N*K)^(-1/6)*q), q=TW^-1(1-Pfa); \
             Pd=1-TW((N*eps*sigma_u2*(1-sqrt(K/N))^2/rho1-mu)/sigma) with (mu, sigma) the MED edge scaling"
        }
    }
}

fn tw_missing() -> SenseError {
    SenseError::arg("large-K baseline needs Tracy-Widom input (tw_source)")
}

/// Large-(K, N) threshold for a target false-alarm probability.
pub fn large_k_baseline_threshold(
    kind: DetectorKind,
    k: usize,
    n: usize,
    case: ValueCase,
    target_pfa: f64,
    tw: Option<&TracyWidomInput>,
) -> Result<f64> {
    let tw = tw.ok_or_else(tw_missing)?;
    require_n(kind, k, n)?;
    let q = tw.quantile(1.0 - target_pfa)?;
    match kind {
        DetectorKind::Med => {
            let (mu, sigma) = edge_scaling(k, n, case);
            Ok((mu + sigma * q) / n as f64)
        }
        DetectorKind::Cnd => Ok(large_k_cnd_ratio(k, n)? * (1.0 + cnd_tw_scale(k, n) * q)),
    }
}

/// CDF of the regulated statistic `√N(T − 1)` predicted by the large-K theory.
pub fn large_k_baseline_cdf(
    kind: DetectorKind,
    k: usize,
    n: usize,
    case: ValueCase,
    x: f64,
    tw: Option<&TracyWidomInput>,
) -> Result<f64> {
    let tw = tw.ok_or_else(tw_missing)?;
    require_n(kind, k, n)?;
    let t = 1.0 + x / (n as f64).sqrt();
    match kind {
        DetectorKind::Med => {
            let (mu, sigma) = edge_scaling(k, n, case);
            Ok(tw.cdf((n as f64 * t - mu) / sigma))
        }
        DetectorKind::Cnd => {
            let ratio = large_k_cnd_ratio(k, n)?;
            Ok(tw.cdf((t / ratio - 1.0) / cnd_tw_scale(k, n)))
        }
    }
}

/// Detection probability predicted by the large-K theory: the smallest
/// eigenvalue is replaced by its deterministic edge `σ_u²(1 − √(K/N))²` and
/// `λ̂_1 / ρ_1` is treated as the largest eigenvalue of white noise.
#[allow(clippy::too_many_arguments)]
pub fn large_k_baseline_pd(
    kind: DetectorKind,
    k: usize,
    n: usize,
    case: ValueCase,
    eps: f64,
    sigma_u2: f64,
    params: &S1LawParams,
    tw: Option<&TracyWidomInput>,
) -> Result<f64> {
    let tw = tw.ok_or_else(tw_missing)?;
    require_n(kind, k, n)?;
    let (mu, sigma) = edge_scaling(k, n, case);
    let nf = n as f64;
    let floor = match kind {
        DetectorKind::Med => sigma_u2,
        DetectorKind::Cnd => sigma_u2 * (1.0 - (k as f64 / nf).sqrt()).powi(2),
    };
    Ok(1.0 - tw.cdf((nf * eps * floor / params.mu1 - mu) / sigma))
}
