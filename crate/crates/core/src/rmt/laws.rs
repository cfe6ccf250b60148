//! Tabulated limiting laws: extreme-eigenvalue marginals, the S0 condition
//! number law and the S1 laws for both detectors.
//!
//! For `K ≤ 3` the laws come from nested adaptive quadrature of the joint
//! density over the ordered cone (at most two nested integrals). For larger
//! `K` they are empirical CDFs of Wigner-ensemble draws.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use super::density::{sample_wigner, JointDensity};
use super::table::{DistributionTable, GridSpec, Law, TableMeta, TableMethod, DEFAULT_POINTS};
use crate::error::{Result, SenseError};
use crate::quad::integrate;
use crate::rng::{stream, StreamDomain};
use crate::signal::ValueCase;

/// Absolute tolerance for every inner and outer integral.
pub const QUAD_TOL: f64 = 1e-8;

/// Largest `K` handled by quadrature; beyond it tables are sampled.
pub const QUADRATURE_MAX_K: usize = 3;

/// Wigner draws behind each sampled table.
pub const SAMPLED_DRAWS: usize = 1_000_000;

const SAMPLING_SEED: u64 = 0x7AB1_E5EE_D000_0001;
const SAMPLING_CHUNK: usize = 10_000;

/// Which top-block law enters the S1 condition-number convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvolutionForm {
    /// `∫ ḡ_{q1,1}(x+y) ḡ_{qr,qr}(y) dy`.
    #[default]
    General,
    /// `∫ ḡ_{1,1}(x+y) ḡ_{qr,qr}(y) dy` regardless of `q1`; identical to
    /// `General` when `q1 = 1`.
    Printed,
}

impl ConvolutionForm {
    pub fn as_str(self) -> &'static str {
        match self {
            ConvolutionForm::General => "general",
            ConvolutionForm::Printed => "printed",
        }
    }
}

impl fmt::Display for ConvolutionForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConvolutionForm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "general" => Ok(ConvolutionForm::General),
            "printed" => Ok(ConvolutionForm::Printed),
            _ => Err(format!("unknown convolution form `{s}` (general|printed)")),
        }
    }
}

/// Half-width beyond which the Gaussian factor of the joint density is
/// negligible.
fn truncation(k: usize) -> f64 {
    8.0 * (k as f64).sqrt()
}

/// Grid used when a law is tabulated with `points` abscissae.
pub fn default_grid(law: Law, points: usize) -> Result<GridSpec> {
    match law {
        Law::Marginal { k, .. } | Law::S1Med { q1: k } => {
            let l = truncation(k);
            Ok(GridSpec::new(-l, l, points))
        }
        Law::CndS0 { k } => Ok(GridSpec::new(0.0, 2.0 * truncation(k), points)),
        Law::S1Cnd { q1, qr, form } => {
            let top = match form {
                ConvolutionForm::General => q1,
                ConvolutionForm::Printed => 1,
            };
            let w = truncation(top) + truncation(qr);
            Ok(GridSpec::new(-w, w, points))
        }
        Law::Empirical => Err(SenseError::arg("empirical tables have no default grid")),
    }
}

fn check_marginal_args(k: usize, index: usize) -> Result<()> {
    if k == 0 {
        return Err(SenseError::arg("K must be at least 1"));
    }
    if index == 0 || index > k {
        return Err(SenseError::arg(format!("marginal index must lie in 1..={k}, got {index}")));
    }
    Ok(())
}

/// `ḡ_{K,i}(x)` by integrating the joint density over every other ordered
/// coordinate, for `K ≤ 3`.
pub fn marginal_pdf_quadrature(k: usize, index: usize, case: ValueCase, x: f64) -> Result<f64> {
    check_marginal_args(k, index)?;
    if k > QUADRATURE_MAX_K {
        return Err(SenseError::arg(format!("quadrature marginals are limited to K <= {QUADRATURE_MAX_K}")));
    }
    let g = JointDensity::new(k, case);
    let l = truncation(k);
    let tol = QUAD_TOL;
    let value = match (k, index) {
        (1, 1) => g.eval(&[x]),
        (2, 1) => integrate(|b2| g.eval(&[x, b2]), -l, x.min(l), tol),
        (2, 2) => integrate(|b1| g.eval(&[b1, x]), x.max(-l), l, tol),
        (3, 1) => integrate(
            |b2| integrate(|b3| g.eval(&[x, b2, b3]), -l, b2, tol),
            -l,
            x.min(l),
            tol,
        ),
        (3, 2) => integrate(
            |b1| integrate(|b3| g.eval(&[b1, x, b3]), -l, x.min(l), tol),
            x.max(-l),
            l,
            tol,
        ),
        (3, 3) => integrate(
            |b2| integrate(|b1| g.eval(&[b1, b2, x]), b2, l, tol),
            x.max(-l),
            l,
            tol,
        ),
        _ => unreachable!("checked above"),
    };
    Ok(value.max(0.0))
}

/// `f_K^{(c)}(x) = ∫ g̃_K(β_K + x, β_K) dβ_K` where `g̃_K` is the joint law of
/// the extreme coordinates (for `K = 3` the middle one is integrated out).
pub fn cnd_s0_pdf_quadrature(k: usize, case: ValueCase, x: f64) -> Result<f64> {
    if !(2..=QUADRATURE_MAX_K).contains(&k) {
        return Err(SenseError::arg(format!("quadrature condition-number law needs 2 <= K <= {QUADRATURE_MAX_K}")));
    }
    if x < 0.0 {
        return Ok(0.0);
    }
    let g = JointDensity::new(k, case);
    let l = truncation(k);
    let tol = QUAD_TOL;
    let upper = l - x;
    if upper <= -l {
        return Ok(0.0);
    }
    let value = if k == 2 {
        integrate(|b| g.eval(&[b + x, b]), -l, upper, tol)
    } else {
        integrate(
            |b3| integrate(|b2| g.eval(&[b3 + x, b2, b3]), b3, b3 + x, tol),
            -l,
            upper,
            tol,
        )
    };
    Ok(value.max(0.0))
}

/// Closed-form `K = 2` density of the condition-number limit:
/// `(x/4) e^{−x²/8}` (real) or `x² e^{−x²/4} / (2√π)` (complex), `x ≥ 0`.
pub fn cnd_s0_pdf_closed_form(case: ValueCase, x: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    match case {
        ValueCase::Real => 0.25 * x * (-x * x / 8.0).exp(),
        ValueCase::Complex => x * x * (-x * x / 4.0).exp() / (2.0 * std::f64::consts::PI.sqrt()),
    }
}

fn sampling_stream_base(law: Law, case: ValueCase) -> u64 {
    let case_bit = match case {
        ValueCase::Real => 0,
        ValueCase::Complex => 1,
    };
    let (tag, a, b) = match law {
        Law::Marginal { k, index } => (1u64, k as u64, index as u64),
        Law::CndS0 { k } => (2, k as u64, 0),
        _ => (3, 0, 0),
    };
    (tag << 56) | (case_bit << 52) | (a << 36) | (b << 20)
}

/// Draws `SAMPLED_DRAWS` Wigner spectra and maps each to one scalar.
fn sampled_values(k: usize, case: ValueCase, base: u64, f: impl Fn(&[f64]) -> f64 + Sync) -> Vec<f64> {
    let chunks = SAMPLED_DRAWS / SAMPLING_CHUNK;
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = stream(SAMPLING_SEED, StreamDomain::Ensemble, base + c as u64);
            (0..SAMPLING_CHUNK)
                .map(|_| f(sample_wigner(k, case, &mut rng).betas()))
                .collect::<Vec<_>>()
        })
        .collect()
}

fn tabulate(
    grid: GridSpec,
    law: Law,
    case: ValueCase,
    method: TableMethod,
    pdf: impl Fn(f64) -> Result<f64> + Sync,
) -> Result<DistributionTable> {
    let xs = grid.abscissae();
    let values = xs.par_iter().map(|&x| pdf(x)).collect::<Result<Vec<_>>>()?;
    DistributionTable::from_pdf(xs, values, TableMeta { law, case, method })
}

/// Uncached construction of `ḡ_{K,i}` on `points` grid points.
pub(crate) fn build_marginal(k: usize, index: usize, case: ValueCase, points: usize) -> Result<DistributionTable> {
    check_marginal_args(k, index)?;
    let law = Law::Marginal { k, index };
    let grid = default_grid(law, points)?;
    if k <= QUADRATURE_MAX_K {
        tabulate(grid, law, case, TableMethod::Quadrature, |x| marginal_pdf_quadrature(k, index, case, x))
    } else {
        let values = sampled_values(k, case, sampling_stream_base(law, case), |b| b[index - 1]);
        DistributionTable::from_samples(&values, grid, law, case, TableMethod::Sampled { draws: values.len() })
    }
}

/// Uncached construction of the S0 condition-number law.
pub(crate) fn build_cnd_s0(k: usize, case: ValueCase, points: usize) -> Result<DistributionTable> {
    if k < 2 {
        return Err(SenseError::arg("the condition number needs K >= 2"));
    }
    let law = Law::CndS0 { k };
    let grid = default_grid(law, points)?;
    match k {
        2 => {
            let xs = grid.abscissae();
            let pdf: Vec<f64> = xs.iter().map(|&x| cnd_s0_pdf_closed_form(case, x)).collect();
            let cdf: Vec<f64> = match case {
                ValueCase::Real => xs.iter().map(|&x| 1.0 - (-x * x / 8.0).exp()).collect(),
                ValueCase::Complex => {
                    let mut acc = 0.0;
                    let mut out = vec![0.0];
                    for w in xs.windows(2) {
                        acc += integrate(|t| cnd_s0_pdf_closed_form(case, t), w[0], w[1], 1e-13);
                        out.push(acc.min(1.0));
                    }
                    out
                }
            };
            DistributionTable::from_parts(xs, pdf, cdf, TableMeta { law, case, method: TableMethod::ClosedForm })
        }
        3 => tabulate(grid, law, case, TableMethod::Quadrature, |x| cnd_s0_pdf_quadrature(k, case, x)),
        _ => {
            let values = sampled_values(k, case, sampling_stream_base(law, case), |b| b[0] - b[b.len() - 1]);
            DistributionTable::from_samples(&values, grid, law, case, TableMethod::Sampled { draws: values.len() })
        }
    }
}

/// Density of `γ_1 − γ_K` for independent `γ_1 ~ top`, `γ_K ~ bottom`:
/// `w(x) = ∫ top(x + y) bottom(y) dy`, trapezoidal over the bottom grid.
pub(crate) fn convolve_difference(
    top: &DistributionTable,
    bottom: &DistributionTable,
    grid: GridSpec,
    law: Law,
    case: ValueCase,
) -> Result<DistributionTable> {
    let ys = bottom.grid();
    let fy = bottom.pdf_values();
    let weights: Vec<f64> = (0..ys.len())
        .map(|j| {
            let left = if j > 0 { ys[j] - ys[j - 1] } else { 0.0 };
            let right = if j + 1 < ys.len() { ys[j + 1] - ys[j] } else { 0.0 };
            0.5 * (left + right) * fy[j]
        })
        .collect();
    tabulate(grid, law, case, TableMethod::Convolution, |x| {
        Ok(ys.iter().zip(&weights).map(|(&y, &w)| w * top.pdf(x + y)).sum())
    })
}

/// Memoized tables, optionally persisted to a directory.
#[derive(Debug, Default)]
pub struct LawCache {
    tables: Mutex<HashMap<(Law, ValueCase), Arc<DistributionTable>>>,
    disk: Mutex<Option<PathBuf>>,
}

impl LawCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Process-wide cache used by the free functions of this module.
    pub fn global() -> &'static LawCache {
        static GLOBAL: OnceLock<LawCache> = OnceLock::new();
        GLOBAL.get_or_init(LawCache::new)
    }

    /// Directory for on-disk tables; `None` keeps the cache in memory only.
    pub fn set_disk_dir(&self, dir: Option<PathBuf>) {
        *self.disk.lock().expect("cache lock") = dir;
    }

    pub fn disk_dir(&self) -> Option<PathBuf> {
        self.disk.lock().expect("cache lock").clone()
    }

    /// File name of a cached table, e.g. `marginal-k2-i1-real-n4001.table`.
    pub fn file_name(law: Law, case: ValueCase) -> String {
        format!("{law}-{}-n{DEFAULT_POINTS}.table", case.as_str())
    }

    pub fn get(&self, law: Law, case: ValueCase) -> Result<Arc<DistributionTable>> {
        if let Some(t) = self.tables.lock().expect("cache lock").get(&(law, case)) {
            return Ok(Arc::clone(t));
        }
        let table = Arc::new(self.load_or_build(law, case)?);
        let mut tables = self.tables.lock().expect("cache lock");
        Ok(Arc::clone(tables.entry((law, case)).or_insert(table)))
    }

    fn load_or_build(&self, law: Law, case: ValueCase) -> Result<DistributionTable> {
        let path = self.disk_dir().map(|d| d.join(Self::file_name(law, case)));
        if let Some(p) = path.as_deref().filter(|p| p.exists()) {
            let table = DistributionTable::read_from(p)?;
            if table.meta().law != law || table.meta().case != case || table.grid().len() != DEFAULT_POINTS {
                return Err(SenseError::Parse {
                    path: p.to_path_buf(),
                    reason: format!("cached table does not describe {law} ({})", case.as_str()),
                });
            }
            return Ok(table);
        }
        let table = self.build(law, case)?;
        if let Some(p) = path {
            write_atomically(&table, &p)?;
        }
        Ok(table)
    }

    fn build(&self, law: Law, case: ValueCase) -> Result<DistributionTable> {
        match law {
            Law::Marginal { k, index } => build_marginal(k, index, case, DEFAULT_POINTS),
            Law::CndS0 { k } => build_cnd_s0(k, case, DEFAULT_POINTS),
            Law::S1Med { q1 } => {
                check_marginal_args(q1, 1)?;
                Ok((*self.get(Law::Marginal { k: q1, index: 1 }, case)?).clone().with_law(law))
            }
            Law::S1Cnd { q1, qr, form } => {
                check_marginal_args(q1, 1)?;
                check_marginal_args(qr, qr)?;
                let top_k = match form {
                    ConvolutionForm::General => q1,
                    ConvolutionForm::Printed => 1,
                };
                let top = self.get(Law::Marginal { k: top_k, index: 1 }, case)?;
                let bottom = self.get(Law::Marginal { k: qr, index: qr }, case)?;
                convolve_difference(&top, &bottom, default_grid(law, DEFAULT_POINTS)?, law, case)
            }
            Law::Empirical => Err(SenseError::arg("empirical tables cannot be rebuilt")),
        }
    }
}

fn write_atomically(table: &DistributionTable, path: &Path) -> Result<()> {
    static WRITES: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| SenseError::Io { path: dir.to_path_buf(), source })?;
    }
    let n = WRITES.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
    let tmp = path.with_extension(format!("tmp{}-{n}", std::process::id()));
    table.write_to(&tmp)?;
    std::fs::rename(&tmp, path).map_err(|source| SenseError::Io { path: path.to_path_buf(), source })
}

/// `ḡ_{K,i}`, the limiting law of the `i`-th largest `β`.
pub fn marginal(k: usize, index: usize, case: ValueCase) -> Result<Arc<DistributionTable>> {
    check_marginal_args(k, index)?;
    LawCache::global().get(Law::Marginal { k, index }, case)
}

/// Law of `lim √N(λ̂_1/λ̂_K − 1)` under S0 (support `x ≥ 0`).
pub fn cnd_s0_law(k: usize, case: ValueCase) -> Result<Arc<DistributionTable>> {
    if k < 2 {
        return Err(SenseError::arg("the condition number needs K >= 2"));
    }
    LawCache::global().get(Law::CndS0 { k }, case)
}

/// Law of `√N(α_m T_med − 1)` under S1: `ḡ_{q1,1}`.
pub fn s1_med_law(q1: usize, case: ValueCase) -> Result<Arc<DistributionTable>> {
    check_marginal_args(q1, 1)?;
    LawCache::global().get(Law::S1Med { q1 }, case)
}

/// Law of `√N(α_c T_cnd − 1)` under S1, general top-block form.
pub fn s1_cnd_law(q1: usize, qr: usize, case: ValueCase) -> Result<Arc<DistributionTable>> {
    s1_cnd_law_with_form(q1, qr, case, ConvolutionForm::General)
}

pub fn s1_cnd_law_with_form(q1: usize, qr: usize, case: ValueCase, form: ConvolutionForm) -> Result<Arc<DistributionTable>> {
    check_marginal_args(q1, 1)?;
    check_marginal_args(qr, qr)?;
    LawCache::global().get(Law::S1Cnd { q1, qr, form }, case)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn argument_validation() {
        assert!(marginal(2, 0, ValueCase::Real).is_err());
        assert!(marginal(2, 3, ValueCase::Real).is_err());
        assert!(marginal(0, 1, ValueCase::Real).is_err());
        assert!(cnd_s0_law(1, ValueCase::Real).is_err());
        assert!(marginal_pdf_quadrature(4, 1, ValueCase::Real, 0.0).is_err());
        assert!(cnd_s0_pdf_quadrature(4, ValueCase::Real, 1.0).is_err());
        assert!(s1_cnd_law(1, 0, ValueCase::Real).is_err());
    }

    #[test]
    fn k1_marginal_is_gaussian() {
        for (case, var) in [(ValueCase::Real, 2.0), (ValueCase::Complex, 1.0)] {
            let t = marginal(1, 1, case).unwrap();
            let n = Normal::new(0.0, f64::sqrt(var)).unwrap();
            let worst = t.grid().iter().zip(t.cdf_values()).map(|(&x, &c)| (c - n.cdf(x)).abs()).fold(0.0, f64::max);
            assert!(worst < 1e-4, "{case:?}: {worst}");
            assert_eq!(t.meta().method, TableMethod::Quadrature);
        }
    }

    #[test]
    fn cnd_k2_closed_form_values() {
        let t = cnd_s0_law(2, ValueCase::Real).unwrap();
        assert!((t.pdf(2.0) - 0.5 * (-0.5f64).exp()).abs() < 1e-6);
        assert!((t.pdf(2.0) - 0.303_265).abs() < 1e-6);
        let x90 = (8.0 * 10f64.ln()).sqrt();
        assert!((t.cdf(x90) - 0.9).abs() < 1e-6);
        assert!((t.quantile(0.9).unwrap() - x90).abs() < 1e-4);
        let c = cnd_s0_law(2, ValueCase::Complex).unwrap();
        assert!((c.pdf(2.0) - 0.415_107).abs() < 1e-5);
        assert!((cnd_s0_pdf_closed_form(ValueCase::Complex, 2.0) - 0.415_107).abs() < 1e-6);
    }

    #[test]
    fn complex_cnd_cdf_matches_erf_identity() {
        // ∫_0^x t² e^{−t²/4} / (2√π) dt = erf(x/2) − x e^{−x²/4} / √π
        let c = cnd_s0_law(2, ValueCase::Complex).unwrap();
        for x in [0.5, 1.0, 2.5, 4.0, 7.0] {
            let want = statrs::function::erf::erf(x / 2.0) - x * (-x * x / 4.0).exp() / std::f64::consts::PI.sqrt();
            assert!((c.cdf(x) - want).abs() < 1e-8, "x={x}: {}", c.cdf(x) - want);
        }
    }

    #[test]
    fn s1_laws_gaussian_special_cases() {
        let med = s1_med_law(1, ValueCase::Real).unwrap();
        assert!((med.variance() - 2.0).abs() < 1e-5);
        assert_eq!(med.meta().law, Law::S1Med { q1: 1 });
        let cnd = s1_cnd_law(1, 1, ValueCase::Real).unwrap();
        let peak = 1.0 / (2.0 * (2.0 * std::f64::consts::PI).sqrt());
        assert!((cnd.pdf(0.0) - peak).abs() < 1e-5);
        assert!((cnd.pdf(0.0) - 0.199_471).abs() < 1e-5);
        let cplx = s1_cnd_law(1, 1, ValueCase::Complex).unwrap();
        assert!((cplx.variance() - 2.0).abs() < 0.01);
        assert!(cplx.mean().abs() < 1e-6);
    }

    #[test]
    fn printed_and_general_agree_for_simple_top() {
        let a = s1_cnd_law_with_form(1, 2, ValueCase::Real, ConvolutionForm::General).unwrap();
        let b = s1_cnd_law_with_form(1, 2, ValueCase::Real, ConvolutionForm::Printed).unwrap();
        assert_eq!(a.cdf_values(), b.cdf_values());
    }

    #[test]
    fn disk_cache_reuses_tables() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("not").join("yet");
        let cache = LawCache::new();
        cache.set_disk_dir(Some(dir.clone()));
        let law = Law::CndS0 { k: 2 };
        let built = cache.get(law, ValueCase::Real).unwrap();
        let file = dir.join(LawCache::file_name(law, ValueCase::Real));
        assert!(file.exists());
        assert_eq!(std::fs::read_dir(&dir).unwrap().count(), 1, "temporary files left behind");
        let fresh = LawCache::new();
        fresh.set_disk_dir(Some(dir));
        assert_eq!(*fresh.get(law, ValueCase::Real).unwrap(), *built);
    }
}
