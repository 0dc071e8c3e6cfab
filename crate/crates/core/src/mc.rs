//! Seeded, parallel Monte Carlo experiments on the estimators.
//!
//! Every replication is a pure function of `(config, horizon index, replication)`,
//! so the raw table does not depend on the worker count. Summaries are computed
//! from the raw table only; see [`summarize`].

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{b_constant, fluctuation_law, FluctuationCase, FluctuationLaw, LimitLaw};
use crate::error::{Error, Result};
use crate::estimators::{estimate, gt_regime, GtSampler, GT_POINTS_PER_RATE};
use crate::hermite::{GridSpec, HermiteSimulator, HermiteSpec, SamplePath, SimOptions};
use crate::seed::replication_seed;
use crate::stats::{self, linear_fit, LogLogFit, Moments};
use crate::vasicek::{vasicek_path, VasicekParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Consistency,
    Rate,
    Distribution,
    GtConverge,
}

impl std::str::FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "consistency" => Ok(Self::Consistency),
            "rate" => Ok(Self::Rate),
            "distribution" => Ok(Self::Distribution),
            "gt-converge" => Ok(Self::GtConverge),
            _ => Err(Error::config(format!("unknown experiment {s:?}"))),
        }
    }
}

impl std::fmt::Display for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Consistency => "consistency",
            Self::Rate => "rate",
            Self::Distribution => "distribution",
            Self::GtConverge => "gt-converge",
        })
    }
}

/// What drives the state equation. `Zero` is a noiseless control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriverKind {
    #[default]
    Hermite,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCConfig {
    pub experiment: Experiment,
    pub spec: HermiteSpec,
    pub params: VasicekParams,
    pub horizons: Vec<f64>,
    pub dt: f64,
    pub replications: usize,
    pub master_seed: u64,
    /// Worker threads; 0 picks the number of available cores.
    pub workers: usize,
    pub sim: SimOptions,
    pub driver: DriverKind,
    /// Distribution runs: fail instead of skipping components without a Gaussian target.
    pub require_ks: bool,
    /// G_T runs: inner grid points per unit of T on [0, 1] (at least 64).
    pub gt_points_per_rate: f64,
}

impl MCConfig {
    /// Desk-scale defaults for `experiment`.
    pub fn new(experiment: Experiment, spec: HermiteSpec, params: VasicekParams) -> Self {
        let (horizons, replications) = match experiment {
            Experiment::Consistency => (vec![100.0, 400.0, 1600.0], 200),
            Experiment::Rate => (vec![100.0, 200.0, 400.0, 800.0, 1600.0], 200),
            Experiment::Distribution => (vec![1600.0], 500),
            Experiment::GtConverge => (vec![5.0, 10.0, 20.0, 40.0], 1000),
        };
        Self {
            experiment,
            spec,
            params,
            horizons,
            dt: 0.05,
            replications,
            master_seed: 20_240_601,
            workers: 0,
            sim: SimOptions::default(),
            driver: DriverKind::Hermite,
            require_ks: false,
            gt_points_per_rate: GT_POINTS_PER_RATE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizons.is_empty() {
            return Err(Error::config("at least one horizon is required"));
        }
        if self.horizons.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::config("horizons must be positive"));
        }
        if self.horizons.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("horizons must be strictly increasing"));
        }
        if self.replications < 2 {
            return Err(Error::config("at least two replications are required"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config(format!("dt must be positive, got {}", self.dt)));
        }
        match self.experiment {
            Experiment::Rate => {
                let span = self.horizons[self.horizons.len() - 1] / self.horizons[0];
                if self.horizons.len() < 4 || span < 8.0 {
                    return Err(Error::config(
                        "rate fits need at least 4 horizons spanning at least 3 octaves",
                    ));
                }
            }
            Experiment::GtConverge => {
                if !gt_regime(&self.spec) {
                    return Err(Error::config(format!(
                        "G_T needs q >= 2 or H > 3/4; got q = {}, H = {}",
                        self.spec.q(),
                        self.spec.h()
                    )));
                }
                if self.gt_points_per_rate < GT_POINTS_PER_RATE {
                    return Err(Error::config(format!(
                        "gt_points_per_rate must be at least {GT_POINTS_PER_RATE}"
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn grid(&self, horizon: f64) -> Result<GridSpec> {
        GridSpec::with_step(horizon, self.dt)
    }
}

/// One replication of an estimator experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub horizon: f64,
    pub replication: usize,
    pub seed: u64,
    /// NaN when excluded.
    pub a_hat: f64,
    pub b_hat: f64,
    pub alpha_t: f64,
    pub excluded: bool,
}

/// One replication of a G_T experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GtRecord {
    pub horizon: f64,
    pub replication: usize,
    pub seed: u64,
    pub g_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "rows", rename_all = "kebab-case")]
pub enum RawTable {
    Estimates(Vec<EstimateRecord>),
    Gt(Vec<GtRecord>),
}

/// Per-horizon statistics of `â - a` and `b̂ - b` over included replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonSummary {
    pub horizon: f64,
    pub used: usize,
    pub excluded: usize,
    pub mean_abs_err_a: f64,
    pub mean_abs_err_b: f64,
    pub mean_err_a: f64,
    pub mean_err_b: f64,
    pub sd_a: f64,
    pub sd_b: f64,
    pub skew_a: f64,
    pub skew_b: f64,
    pub kurt_a: f64,
    pub kurt_b: f64,
    /// Correlation of the two error components (equal to that of their standardized versions).
    pub corr_ab: f64,
    /// `sd_a` times the rate normalizer of `â`.
    pub normalized_sd_a: f64,
    /// `sd_b` times `T^{1-H}`.
    pub normalized_sd_b: f64,
}

/// Per-horizon statistics of `G_T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GtSummary {
    pub horizon: f64,
    pub n: usize,
    pub mean: f64,
    pub se_mean: f64,
    pub variance: f64,
    pub skewness: f64,
    /// `Var(G_T) / B_{H,q}²`.
    pub variance_ratio: f64,
    /// `|Var(G_T) - Var(G_{T_prev})| / Var(G_{T_prev})`; NaN for the first horizon.
    pub variance_change: f64,
}

/// Slopes of `ln sd` against `ln T` (against `ln(T / ln T)` for `â` in the critical case).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub a: LogLogFit,
    pub b: LogLogFit,
    pub a_target: f64,
    pub b_target: f64,
    pub a_uses_log_normalizer: bool,
}

/// Standardized errors at one horizon compared with their limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub horizon: f64,
    /// KS distance to Φ of the standardized `â` errors; absent without a Gaussian target.
    pub ks_a: Option<f64>,
    pub ks_b: Option<f64>,
    pub corr_ab: f64,
    pub a_scale: Option<f64>,
    pub b_scale: Option<f64>,
    /// Moments of `normalizer(T)·(â - a)` and `T^{1-H}(b̂ - b)`, unstandardized.
    pub scaled_a: Moments,
    pub scaled_b: Moments,
}

/// Strict decrease of mean absolute errors across horizons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trend {
    pub a_decreasing: bool,
    pub b_decreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub law: Option<FluctuationLaw>,
    pub rows: Vec<HorizonSummary>,
    pub gt_rows: Vec<GtSummary>,
    pub trend: Option<Trend>,
    pub rate_fit: Option<RateFit>,
    pub distribution: Vec<DistributionSummary>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCResult {
    pub config: MCConfig,
    pub raw: RawTable,
    pub summary: Summary,
    pub wall_time_secs: f64,
}

/// Share of excluded replications above which a warning is attached.
const EXCLUSION_WARNING: f64 = 0.05;

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if workers > 0 {
        b = b.num_threads(workers);
    }
    b.build().map_err(|e| Error::config(format!("cannot start worker pool: {e}")))
}

fn expect_experiment(config: &MCConfig, want: Experiment) -> Result<()> {
    if config.experiment != want {
        return Err(Error::config(format!(
            "configuration is for the {} experiment, not {want}",
            config.experiment
        )));
    }
    Ok(())
}

/// Simulates and estimates every replication.
pub fn simulate_estimates(config: &MCConfig) -> Result<Vec<EstimateRecord>> {
    config.validate()?;
    let pool = pool(config.workers)?;
    let mut out = Vec::with_capacity(config.horizons.len() * config.replications);
    for (hi, &horizon) in config.horizons.iter().enumerate() {
        let grid = config.grid(horizon)?;
        let sim = match config.driver {
            DriverKind::Hermite => Some(HermiteSimulator::with_options(config.spec, grid, config.sim)?),
            DriverKind::Zero => None,
        };
        if let Some(s) = &sim {
            if s.clipped_modes() > 0 {
                log::warn!("T = {horizon}: {} clipped embedding modes", s.clipped_modes());
            }
        }
        let rows: Vec<Result<EstimateRecord>> = pool.install(|| {
            (0..config.replications)
                .into_par_iter()
                .map(|r| {
                    let seed = replication_seed(config.master_seed, hi, r);
                    let driver = match &sim {
                        Some(s) => s.sample(seed),
                        None => SamplePath::constant(grid, 0.0),
                    };
                    let x = vasicek_path(config.params, &driver)?;
                    let rec = match estimate(&x, &config.spec) {
                        Ok(e) => EstimateRecord {
                            horizon,
                            replication: r,
                            seed,
                            a_hat: e.a_hat,
                            b_hat: e.b_hat,
                            alpha_t: e.alpha_t,
                            excluded: false,
                        },
                        Err(Error::DegenerateVariance { alpha, b_hat }) => EstimateRecord {
                            horizon,
                            replication: r,
                            seed,
                            a_hat: f64::NAN,
                            b_hat,
                            alpha_t: alpha,
                            excluded: true,
                        },
                        Err(e) => return Err(e),
                    };
                    Ok(rec)
                })
                .collect()
        });
        for r in rows {
            out.push(r?);
        }
    }
    Ok(out)
}

/// Draws `G_T` for every replication.
pub fn simulate_gt(config: &MCConfig) -> Result<Vec<GtRecord>> {
    config.validate()?;
    let pool = pool(config.workers)?;
    let mut out = Vec::with_capacity(config.horizons.len() * config.replications);
    for (hi, &horizon) in config.horizons.iter().enumerate() {
        let n = (config.gt_points_per_rate * horizon).ceil() as usize;
        let sampler = GtSampler::with_options(config.spec, horizon, GridSpec::new(1.0, n)?, config.sim)?;
        let rows: Vec<GtRecord> = pool.install(|| {
            (0..config.replications)
                .into_par_iter()
                .map(|r| {
                    let seed = replication_seed(config.master_seed, hi, r);
                    GtRecord { horizon, replication: r, seed, g_t: sampler.sample(seed).g_t }
                })
                .collect()
        });
        out.extend(rows);
    }
    Ok(out)
}

fn summarize_estimates(config: &MCConfig, law: Option<&FluctuationLaw>, raw: &[EstimateRecord]) -> (Vec<HorizonSummary>, Vec<String>) {
    let (a, b) = (config.params.a, config.params.b);
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for &horizon in &config.horizons {
        let here: Vec<&EstimateRecord> = raw.iter().filter(|r| r.horizon == horizon).collect();
        let used: Vec<&&EstimateRecord> = here.iter().filter(|r| !r.excluded).collect();
        let excluded = here.len() - used.len();
        if !here.is_empty() && excluded as f64 / here.len() as f64 > EXCLUSION_WARNING {
            warnings.push(format!(
                "T = {horizon}: {excluded} of {} replications had a degenerate empirical variance and were excluded",
                here.len()
            ));
        }
        let ea: Vec<f64> = used.iter().map(|r| r.a_hat - a).collect();
        // b_hat is defined for every replication, excluded or not
        let eb: Vec<f64> = here.iter().map(|r| r.b_hat - b).collect();
        let eb_used: Vec<f64> = used.iter().map(|r| r.b_hat - b).collect();
        let mabs = |v: &[f64]| v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64;
        let (na, nb) = law.map_or((f64::NAN, f64::NAN), |l| (l.a_normalizer(horizon), l.b_normalizer(horizon)));
        let sd_a = stats::sd(&ea);
        let sd_b = stats::sd(&eb);
        rows.push(HorizonSummary {
            horizon,
            used: used.len(),
            excluded,
            mean_abs_err_a: if ea.is_empty() { f64::NAN } else { mabs(&ea) },
            mean_abs_err_b: mabs(&eb),
            mean_err_a: stats::mean(&ea),
            mean_err_b: stats::mean(&eb),
            sd_a,
            sd_b,
            skew_a: stats::skewness(&ea),
            skew_b: stats::skewness(&eb),
            kurt_a: stats::excess_kurtosis(&ea),
            kurt_b: stats::excess_kurtosis(&eb),
            corr_ab: if ea.len() >= 2 { stats::correlation(&ea, &eb_used) } else { f64::NAN },
            normalized_sd_a: sd_a * na,
            normalized_sd_b: sd_b * nb,
        });
    }
    (rows, warnings)
}

fn rate_fit(law: &FluctuationLaw, rows: &[HorizonSummary]) -> Result<RateFit> {
    let log_norm = law.a_rate_log;
    let ax: Vec<f64> = rows
        .iter()
        .map(|r| if log_norm { (r.horizon / r.horizon.ln()).ln() } else { r.horizon.ln() })
        .collect();
    let bx: Vec<f64> = rows.iter().map(|r| r.horizon.ln()).collect();
    let ay: Vec<f64> = rows.iter().map(|r| r.sd_a.ln()).collect();
    let by: Vec<f64> = rows.iter().map(|r| r.sd_b.ln()).collect();
    if ay.iter().chain(&by).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("a horizon has no usable spread for the rate fit".into()));
    }
    Ok(RateFit {
        a: linear_fit(&ax, &ay)?,
        b: linear_fit(&bx, &by)?,
        a_target: -law.a_rate_exponent,
        b_target: -law.b_rate_exponent,
        a_uses_log_normalizer: log_norm,
    })
}

fn gaussian_sd(l: &LimitLaw) -> Option<f64> {
    match *l {
        LimitLaw::Gaussian { sd } => Some(sd),
        _ => None,
    }
}

fn distribution(config: &MCConfig, law: &FluctuationLaw, raw: &[EstimateRecord]) -> Result<Vec<DistributionSummary>> {
    let a_scale = gaussian_sd(&law.a_limit);
    let b_scale = gaussian_sd(&law.b_limit);
    if config.require_ks && (a_scale.is_none() || b_scale.is_none()) {
        return Err(Error::UnsupportedDistributionTarget(format!(
            "the limit for q = {}, H = {} ({:?}) is not Gaussian in both components; \
             no CDF is available for a KS test",
            config.spec.q(),
            config.spec.h(),
            law.case_id
        )));
    }
    let (a, b) = (config.params.a, config.params.b);
    let mut out = Vec::new();
    for &horizon in &config.horizons {
        let used: Vec<&EstimateRecord> = raw.iter().filter(|r| r.horizon == horizon && !r.excluded).collect();
        if used.len() < 2 {
            continue;
        }
        let na = law.a_normalizer(horizon);
        let nb = law.b_normalizer(horizon);
        let sa: Vec<f64> = used.iter().map(|r| na * (r.a_hat - a)).collect();
        let sb: Vec<f64> = used.iter().map(|r| nb * (r.b_hat - b)).collect();
        let std = |v: &[f64], s: f64| v.iter().map(|x| x / s).collect::<Vec<f64>>();
        out.push(DistributionSummary {
            horizon,
            ks_a: a_scale.map(|s| stats::ks_statistic_normal(&std(&sa, s))),
            ks_b: b_scale.map(|s| stats::ks_statistic_normal(&std(&sb, s))),
            corr_ab: stats::correlation(&sa, &sb),
            a_scale,
            b_scale,
            scaled_a: Moments::of(&sa),
            scaled_b: Moments::of(&sb),
        });
    }
    Ok(out)
}

fn summarize_gt(config: &MCConfig, raw: &[GtRecord]) -> Result<Vec<GtSummary>> {
    let b2 = b_constant(&config.spec)?.powi(2);
    let mut rows: Vec<GtSummary> = Vec::new();
    for &horizon in &config.horizons {
        let g: Vec<f64> = raw.iter().filter(|r| r.horizon == horizon).map(|r| r.g_t).collect();
        let var = stats::variance(&g);
        let variance_change = rows.last().map_or(f64::NAN, |p| (var - p.variance).abs() / p.variance);
        rows.push(GtSummary {
            horizon,
            n: g.len(),
            mean: stats::mean(&g),
            se_mean: (var / g.len() as f64).sqrt(),
            variance: var,
            skewness: stats::skewness(&g),
            variance_ratio: var / b2,
            variance_change,
        });
    }
    Ok(rows)
}

/// Every reported statistic as a pure function of the configuration and the raw table.
pub fn summarize(config: &MCConfig, raw: &RawTable) -> Result<Summary> {
    let mut summary = Summary {
        law: None,
        rows: Vec::new(),
        gt_rows: Vec::new(),
        trend: None,
        rate_fit: None,
        distribution: Vec::new(),
        warnings: Vec::new(),
    };
    match raw {
        RawTable::Gt(rows) => {
            summary.gt_rows = summarize_gt(config, rows)?;
        }
        RawTable::Estimates(rows) => {
            let law = fluctuation_law(&config.spec, config.params.a)?;
            let (hs, warnings) = summarize_estimates(config, Some(&law), rows);
            summary.warnings = warnings;
            match config.experiment {
                Experiment::Consistency => {
                    let dec = |f: fn(&HorizonSummary) -> f64| hs.windows(2).all(|w| f(&w[1]) < f(&w[0]));
                    summary.trend = Some(Trend {
                        a_decreasing: dec(|r| r.mean_abs_err_a),
                        b_decreasing: dec(|r| r.mean_abs_err_b),
                    });
                }
                Experiment::Rate => summary.rate_fit = Some(rate_fit(&law, &hs)?),
                Experiment::Distribution => {
                    if law.case_id == FluctuationCase::HermiteDriven || !law.components_independent {
                        summary.warnings.push(
                            "limit components are dependent; the reported correlation has no target".into(),
                        );
                    }
                    summary.distribution = distribution(config, &law, rows)?;
                }
                Experiment::GtConverge => {}
            }
            summary.rows = hs;
            summary.law = Some(law);
        }
    }
    Ok(summary)
}

fn run_estimates(config: &MCConfig) -> Result<MCResult> {
    let start = Instant::now();
    // fail before simulating when no target can exist
    if config.experiment == Experiment::Distribution {
        let law = fluctuation_law(&config.spec, config.params.a)?;
        distribution(config, &law, &[])?;
    }
    let raw = RawTable::Estimates(simulate_estimates(config)?);
    let summary = summarize(config, &raw)?;
    for w in &summary.warnings {
        log::warn!("{w}");
    }
    Ok(MCResult { config: config.clone(), raw, summary, wall_time_secs: start.elapsed().as_secs_f64() })
}

/// Mean absolute errors per horizon and their trend.
pub fn run_consistency(config: &MCConfig) -> Result<MCResult> {
    expect_experiment(config, Experiment::Consistency)?;
    run_estimates(config)
}

/// Log-log slopes of the error spread against the horizon.
pub fn run_rate(config: &MCConfig) -> Result<MCResult> {
    expect_experiment(config, Experiment::Rate)?;
    run_estimates(config)
}

/// Standardized errors against their limit laws.
pub fn run_distribution(config: &MCConfig) -> Result<MCResult> {
    expect_experiment(config, Experiment::Distribution)?;
    run_estimates(config)
}

/// Mean and variance of `G_T` across horizons.
pub fn run_gt_converge(config: &MCConfig) -> Result<MCResult> {
    expect_experiment(config, Experiment::GtConverge)?;
    let start = Instant::now();
    let raw = RawTable::Gt(simulate_gt(config)?);
    let summary = summarize(config, &raw)?;
    Ok(MCResult { config: config.clone(), raw, summary, wall_time_secs: start.elapsed().as_secs_f64() })
}

/// Dispatches on `config.experiment`.
pub fn run(config: &MCConfig) -> Result<MCResult> {
    match config.experiment {
        Experiment::Consistency => run_consistency(config),
        Experiment::Rate => run_rate(config),
        Experiment::Distribution => run_distribution(config),
        Experiment::GtConverge => run_gt_converge(config),
    }
}
