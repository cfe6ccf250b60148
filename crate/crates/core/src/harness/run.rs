//! Monte Carlo experiments.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::detectors::{regulated, s0_law, statistic, threshold_for_pfa, DetectorKind};
use crate::eigen::{eigenvalues, population_covariance, sample_covariance};
use crate::error::{Result, SenseError};
use crate::evaluation::{
    ks_distance, ks_distance_with, large_k_baseline_cdf, large_k_baseline_pd, large_k_baseline_threshold,
    large_k_formula, s1_law, s1_params, theoretical_pd_with_form, upper_quantile, wilson, S1LawParams,
    TracyWidomInput,
};
use crate::harness::config::{Calibration, Experiment, ExperimentSpec};
use crate::rmt::LawCache;
use crate::rng::{stream, StreamDomain};
use crate::signal::{compute_snr, generate_noise, generate_received, Scenario, ScenarioConfig};

type CdfFn<'a> = Box<dyn Fn(f64) -> Result<f64> + 'a>;

pub const VERSION_TAG: &str = concat!("eigensense v", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CdfRow {
    pub x: f64,
    pub empirical_cdf: f64,
    pub fixedk_cdf: f64,
    pub largek_cdf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub target_pfa: f64,
    pub eps_fixedk: f64,
    pub eps_largek: f64,
    pub eps_simulated: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionRow {
    pub target_pfa: f64,
    pub eps_sim: f64,
    pub pd_empirical: f64,
    pub pd_ci_low: f64,
    pub pd_ci_high: f64,
    pub pd_fixedk: f64,
    pub pd_largek: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub target_pfa: f64,
    pub eps_sim: f64,
    pub pd_empirical: f64,
    pub pd_ci_low: f64,
    pub pd_ci_high: f64,
    pub pd_fixedk: f64,
    pub pd_largek: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "rows", rename_all = "lowercase")]
pub enum Records {
    Cdf(Vec<CdfRow>),
    Threshold(Vec<ThresholdRow>),
    Detection(Vec<DetectionRow>),
    Sweep(Vec<SweepRow>),
}

impl Records {
    pub fn len(&self) -> usize {
        match self {
            Records::Cdf(r) => r.len(),
            Records::Threshold(r) => r.len(),
            Records::Detection(r) => r.len(),
            Records::Sweep(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub seed: u64,
    pub version: String,
    pub methods: BTreeMap<String, String>,
    pub stats: BTreeMap<String, f64>,
    /// Not written to output files unless asked for, so that they stay
    /// reproducible.
    #[serde(skip)]
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub metadata: Metadata,
    pub records: Records,
}

/// Dispatches on `spec.experiment`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    match spec.experiment {
        Experiment::Cdf => run_cdf_experiment(spec),
        Experiment::Threshold => run_threshold_experiment(spec),
        Experiment::Detection => run_detection_experiment(spec),
        Experiment::Sweep => run_sweep(spec),
    }
}

struct Context {
    started: Instant,
    pool: rayon::ThreadPool,
    tw: TracyWidomInput,
    methods: BTreeMap<String, String>,
    stats: BTreeMap<String, f64>,
}

impl Context {
    fn new(spec: &ExperimentSpec, expected: Experiment) -> Result<Self> {
        if spec.experiment != expected {
            return Err(SenseError::config(
                "experiment",
                format!("expected `{}`, got `{}`", expected.as_str(), spec.experiment.as_str()),
            ));
        }
        spec.validate()?;
        let tw = spec.tracy_widom()?.ok_or_else(|| {
            SenseError::config("tw_source", "the large-K baseline needs Tracy-Widom input (gamma:... or table:...)")
        })?;
        if let Some(dir) = &spec.cache_dir {
            LawCache::global().set_disk_dir(Some(dir.clone()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.workers.unwrap_or(0))
            .build()
            .map_err(|e| SenseError::arg(format!("cannot start worker pool: {e}")))?;
        let mut methods = BTreeMap::new();
        methods.insert("largek_baseline".into(), large_k_formula(spec.detector, spec.case).into());
        let mut tw_label = tw.provenance();
        if let Some(p) = &spec.tw_provenance {
            tw_label = format!("{tw_label}; {p}");
        }
        methods.insert("tracy_widom".into(), tw_label);
        methods.insert("rng".into(), "ChaCha8 stream per run, keyed by (seed, domain), stream id = run index".into());
        Ok(Self { started: Instant::now(), pool, tw, methods, stats: BTreeMap::new() })
    }

    fn finish(self, spec: &ExperimentSpec, records: Records) -> ExperimentResult {
        ExperimentResult {
            spec: spec.echo(),
            metadata: Metadata {
                seed: spec.seed,
                version: VERSION_TAG.into(),
                methods: self.methods,
                stats: self.stats,
                wall_time_s: self.started.elapsed().as_secs_f64(),
            },
            records,
        }
    }
}

/// Raw statistic `T` for runs `0..runs` of `cfg`, in run order.
pub fn simulate_statistics(
    cfg: &ScenarioConfig,
    kind: DetectorKind,
    runs: usize,
    domain: StreamDomain,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    (0..runs as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(cfg.seed, domain, i);
            let x = match cfg.scenario {
                Scenario::S0 => generate_noise(cfg, &mut rng)?,
                Scenario::S1 => generate_received(cfg, &mut rng)?,
            };
            let spec = eigenvalues(&sample_covariance(&x)?)?;
            statistic(kind, &spec, cfg.sigma_u2)
        })
        .collect()
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn params_for(spec: &ExperimentSpec, cfg: &ScenarioConfig) -> Result<S1LawParams> {
    let h = cfg.channel.as_ref().expect("signal config");
    let pop = eigenvalues(&population_covariance(h, cfg.sigma_s2, cfg.sigma_u2))?;
    s1_params(&pop, cfg.sigma_u2, spec.rel_tol)
}

fn insert_params(stats: &mut BTreeMap<String, f64>, prefix: &str, p: &S1LawParams) {
    stats.insert(format!("{prefix}mu1"), p.mu1);
    stats.insert(format!("{prefix}mur"), p.mur);
    stats.insert(format!("{prefix}q1"), p.q1 as f64);
    stats.insert(format!("{prefix}qr"), p.qr as f64);
    stats.insert(format!("{prefix}alpha"), p.alpha_m);
    stats.insert(format!("{prefix}alpha_c"), p.alpha_c);
}

/// Empirical versus theoretical CDF of the regulated statistic.
pub fn run_cdf_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let mut ctx = Context::new(spec, Experiment::Cdf)?;
    let (k, n, case, kind) = (spec.k, spec.n, spec.case, spec.detector);
    let sqrt_n = (n as f64).sqrt();
    let rows = ctx.pool.install(|| -> Result<Vec<CdfRow>> {
        let (xs, law, largek): (Vec<f64>, _, CdfFn<'_>) = match spec.scenario() {
            Scenario::S0 => {
                let cfg = spec.noise_config();
                let t = simulate_statistics(&cfg, kind, spec.n_runs, StreamDomain::NoiseOnly)?;
                let xs = sorted(t.into_iter().map(|t| regulated(t, n)).collect());
                let tw = &ctx.tw;
                (xs, s0_law(kind, k, case)?, Box::new(move |x| large_k_baseline_cdf(kind, k, n, case, x, Some(tw))))
            }
            Scenario::S1 => {
                let cfg = spec.signal_config(None)?;
                let params = params_for(spec, &cfg)?;
                let (law, alpha) = s1_law(kind, case, &params, spec.convolution)?;
                let t = simulate_statistics(&cfg, kind, spec.n_runs, StreamDomain::SignalPresent)?;
                let xs = sorted(t.into_iter().map(|t| sqrt_n * (alpha * t - 1.0)).collect());
                insert_params(&mut ctx.stats, "", &params);
                let (tw, u2) = (&ctx.tw, spec.sigma_u2);
                let f: CdfFn<'_> = Box::new(move |x| {
                    let t = (1.0 + x / sqrt_n) / alpha;
                    Ok(1.0 - large_k_baseline_pd(kind, k, n, case, t, u2, &params, Some(tw))?)
                });
                (xs, law, f)
            }
        };
        let m = xs.len() as f64;
        let rows = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                Ok(CdfRow { x, empirical_cdf: (i + 1) as f64 / m, fixedk_cdf: law.cdf(x), largek_cdf: largek(x)? })
            })
            .collect::<Result<Vec<_>>>()?;
        if xs.len() >= 2 {
            ctx.stats.insert("ks_fixedk".into(), ks_distance(&xs, &law)?);
            ctx.stats.insert("ks_largek".into(), ks_distance_with(&xs, |x| largek(x).unwrap_or(f64::NAN))?);
        }
        ctx.methods.insert("fixedk_law".into(), format!("{} ({})", law.meta().law, law.meta().method));
        Ok(rows)
    })?;
    Ok(ctx.finish(spec, Records::Cdf(rows)))
}

/// Fixed-K, large-K and simulation-calibrated thresholds over `pfa_grid`.
pub fn run_threshold_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let mut ctx = Context::new(spec, Experiment::Threshold)?;
    let (k, n, case, kind) = (spec.k, spec.n, spec.case, spec.detector);
    let rows = ctx.pool.install(|| -> Result<Vec<ThresholdRow>> {
        let t = sorted(simulate_statistics(&spec.noise_config(), kind, spec.n_runs, StreamDomain::NoiseOnly)?);
        spec.pfa_grid
            .iter()
            .map(|&p| {
                Ok(ThresholdRow {
                    target_pfa: p,
                    eps_fixedk: threshold_for_pfa(kind, k, n, case, p)?,
                    eps_largek: large_k_baseline_threshold(kind, k, n, case, p, Some(&ctx.tw))?,
                    eps_simulated: upper_quantile(&t, p)?,
                })
            })
            .collect()
    })?;
    let err = |f: fn(&ThresholdRow) -> f64| rows.iter().map(|r| (f(r) - r.eps_simulated).abs()).fold(0.0, f64::max);
    ctx.stats.insert("max_abs_err_fixedk".into(), err(|r| r.eps_fixedk));
    ctx.stats.insert("max_abs_err_largek".into(), err(|r| r.eps_largek));
    ctx.methods.insert("eps_simulated".into(), "empirical (1 - Pfa)-quantile of T over n_runs noise-only runs".into());
    Ok(ctx.finish(spec, Records::Threshold(rows)))
}

/// Thresholds for every grid point: simulated from noise-only runs or taken
/// from the fixed-K theory.
fn detection_thresholds(spec: &ExperimentSpec) -> Result<Vec<f64>> {
    match spec.calibration {
        Calibration::Simulated => {
            let t = sorted(simulate_statistics(&spec.noise_config(), spec.detector, spec.n_runs, StreamDomain::NoiseOnly)?);
            spec.pfa_grid.iter().map(|&p| upper_quantile(&t, p)).collect()
        }
        Calibration::Theory => {
            spec.pfa_grid.iter().map(|&p| threshold_for_pfa(spec.detector, spec.k, spec.n, spec.case, p)).collect()
        }
    }
}

fn calibration_label(c: Calibration) -> &'static str {
    match c {
        Calibration::Simulated => "simulated: empirical (1 - Pfa)-quantile of T over n_runs noise-only runs",
        Calibration::Theory => "theory: fixed-K threshold from the noise-only limit law",
    }
}

fn detection_rows(
    spec: &ExperimentSpec,
    tw: &TracyWidomInput,
    eps: &[f64],
    snr_db: Option<f64>,
    stats: &mut BTreeMap<String, f64>,
    prefix: &str,
) -> Result<Vec<DetectionRow>> {
    let cfg = spec.signal_config(snr_db)?;
    let params = params_for(spec, &cfg)?;
    let h = cfg.channel.as_ref().expect("signal config");
    stats.insert(format!("{prefix}snr_db"), compute_snr(h, cfg.sigma_s2, cfg.sigma_u2, cfg.k)?.db());
    insert_params(stats, prefix, &params);
    let t = simulate_statistics(&cfg, spec.detector, spec.n_runs, StreamDomain::SignalPresent)?;
    spec.pfa_grid
        .iter()
        .zip(eps)
        .map(|(&p, &e)| {
            let hits = t.iter().filter(|&&v| v > e).count();
            let rate = wilson(hits, t.len())?;
            Ok(DetectionRow {
                target_pfa: p,
                eps_sim: e,
                pd_empirical: rate.rate,
                pd_ci_low: rate.ci_low,
                pd_ci_high: rate.ci_high,
                pd_fixedk: theoretical_pd_with_form(spec.detector, spec.n, spec.case, e, &params, spec.convolution)?,
                pd_largek: large_k_baseline_pd(spec.detector, spec.k, spec.n, spec.case, e, spec.sigma_u2, &params, Some(tw))?,
            })
        })
        .collect()
}

fn detection_errors(stats: &mut BTreeMap<String, f64>, rows: &[DetectionRow]) {
    let max = |f: fn(&DetectionRow) -> f64| rows.iter().map(|r| (f(r) - r.pd_empirical).abs()).fold(0.0, f64::max);
    let mean = |f: fn(&DetectionRow) -> f64| rows.iter().map(|r| f(r) - r.pd_empirical).sum::<f64>() / rows.len() as f64;
    stats.insert("max_abs_err_fixedk".into(), max(|r| r.pd_fixedk));
    stats.insert("max_abs_err_largek".into(), max(|r| r.pd_largek));
    stats.insert("mean_signed_err_fixedk".into(), mean(|r| r.pd_fixedk));
    stats.insert("mean_signed_err_largek".into(), mean(|r| r.pd_largek));
}

/// Detection probability per target false-alarm level at one SNR.
pub fn run_detection_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let mut ctx = Context::new(spec, Experiment::Detection)?;
    let rows = ctx.pool.install(|| -> Result<Vec<DetectionRow>> {
        let eps = detection_thresholds(spec)?;
        detection_rows(spec, &ctx.tw, &eps, None, &mut ctx.stats, "")
    })?;
    detection_errors(&mut ctx.stats, &rows);
    ctx.methods.insert("threshold".into(), calibration_label(spec.calibration).into());
    ctx.methods.insert("pd_fixedk".into(), format!("{} convolution", spec.convolution));
    Ok(ctx.finish(spec, Records::Detection(rows)))
}

/// Detection experiment repeated over `snr_grid_db`, sharing one calibration.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let mut ctx = Context::new(spec, Experiment::Sweep)?;
    let rows = ctx.pool.install(|| -> Result<Vec<SweepRow>> {
        let eps = detection_thresholds(spec)?;
        let mut out = Vec::new();
        for &snr in &spec.snr_grid_db {
            let prefix = format!("snr[{snr}].");
            for r in detection_rows(spec, &ctx.tw, &eps, Some(snr), &mut ctx.stats, &prefix)? {
                out.push(SweepRow {
                    snr_db: snr,
                    target_pfa: r.target_pfa,
                    eps_sim: r.eps_sim,
                    pd_empirical: r.pd_empirical,
                    pd_ci_low: r.pd_ci_low,
                    pd_ci_high: r.pd_ci_high,
                    pd_fixedk: r.pd_fixedk,
                    pd_largek: r.pd_largek,
                });
            }
        }
        Ok(out)
    })?;
    ctx.methods.insert("threshold".into(), calibration_label(spec.calibration).into());
    ctx.methods.insert("pd_fixedk".into(), format!("{} convolution", spec.convolution));
    Ok(ctx.finish(spec, Records::Sweep(rows)))
}
