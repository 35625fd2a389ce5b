//! Simulation studies: volatility-curve recovery, out-of-sample RMSE against
//! the local linear smoother, and integrated volatility against realized volatility.

use rayon::prelude::*;

use crate::baselines::{integrated_vol, realized_vol, regression_pairs, rmse, KernelConfig, LocalLinear};
use crate::error::{Error, Result};
use crate::estimation::{drift_lse, theta_qmle_fit, DriftEstimate, ThetaSearchConfig};
use crate::presets;
use crate::sde::{generate_scenario_indexed, subsample, ModelSpec, Path, SimConfig};
use crate::volfilter::{run_filter, Diagnostics, FilterParams, DEFAULT_Y_FLOOR};

/// Filter settings that are not estimated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSettings {
    pub y1_init: f64,
    pub y_floor: f64,
}

impl Default for FilterSettings {
    fn default() -> Self {
        Self { y1_init: 0.0, y_floor: DEFAULT_Y_FLOOR }
    }
}

/// Mean and sample standard deviation (`n - 1` denominator; `None` for a single value).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats {
    pub mean: f64,
    pub std: Option<f64>,
    pub n: usize,
}

/// Two-pass mean and standard deviation, accumulated in input order.
pub fn summarize(values: &[f64]) -> Result<SummaryStats> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("cannot summarize an empty sample".into()));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = (n > 1).then(|| {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1) as f64).sqrt()
    });
    Ok(SummaryStats { mean, std, n })
}

/// Out-of-sample study for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: ModelSpec,
    pub sim: SimConfig,
    pub n_paths: usize,
    /// Leading observations dropped before estimation.
    pub discard_len: usize,
    pub estimation_len: usize,
    pub evaluation_len: usize,
    pub init_window_len: usize,
    pub kernel: KernelConfig,
    pub theta_search: ThetaSearchConfig,
    pub filter: FilterSettings,
}

impl ExperimentConfig {
    /// The reference protocol for a preset model.
    pub fn table_preset(named: &presets::NamedModel, n_paths: usize, seed: u64) -> Self {
        Self {
            name: named.name.to_string(),
            model: named.model,
            sim: presets::table_sim(seed),
            n_paths,
            discard_len: presets::TABLE_SEGMENT,
            estimation_len: presets::TABLE_SEGMENT,
            evaluation_len: presets::TABLE_SEGMENT,
            init_window_len: presets::init_window_for(presets::TABLE_DT),
            kernel: KernelConfig { bandwidth: named.bandwidth },
            theta_search: ThetaSearchConfig::default(),
            filter: FilterSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.kernel.validate()?;
        self.theta_search.validate()?;
        let layout = self.sim.layout()?;
        if self.n_paths == 0 {
            return Err(Error::InvalidArgument("n_paths must be at least 1".into()));
        }
        let needed = self.discard_len + self.estimation_len + self.evaluation_len;
        if needed > layout.n_obs + 1 {
            return Err(Error::InvalidArgument(format!(
                "discard + estimation + evaluation = {needed} exceeds the {} simulated observations",
                layout.n_obs + 1
            )));
        }
        if self.evaluation_len < 2 {
            return Err(Error::InvalidArgument("evaluation_len must be at least 2".into()));
        }
        if self.init_window_len < 2 || self.init_window_len >= self.estimation_len {
            return Err(Error::InitWindow { window: self.init_window_len, path_len: self.estimation_len });
        }
        Ok(())
    }
}

/// Everything measured on one simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathOutcome {
    pub path_index: u64,
    pub drift: DriftEstimate,
    pub theta: f64,
    pub rmse_semi: f64,
    /// `None` when the local linear fit produced no estimate at any held-out state.
    pub rmse_ker: Option<f64>,
    /// Realized volatility over the held-out segment.
    pub realized: f64,
    pub v_semi: f64,
    /// `None` when any held-out local linear estimate is missing.
    pub v_ker: Option<f64>,
    /// Riemann sum of the true spot volatility.
    pub v_true: f64,
    pub diagnostics: Diagnostics,
}

/// Fits both estimators on the estimation segment of path `path_index` and scores them on the held-out segment.
pub fn run_path(config: &ExperimentConfig, path_index: u64) -> Result<PathOutcome> {
    let full = generate_scenario_indexed(&config.model, &config.sim, path_index)?;
    let start = config.discard_len;
    let est_end = start + config.estimation_len;
    let end = est_end + config.evaluation_len;
    let est = full.slice(start..est_end)?;
    let drift = drift_lse(&est)?;
    let base = FilterParams::new(1.0, drift.alpha_hat, drift.beta_hat)?
        .with_y1_init(config.filter.y1_init)?
        .with_y_floor(config.filter.y_floor)?;
    let fit = theta_qmle_fit(&est, &drift, &config.theta_search, config.init_window_len, &base)?;
    let params = FilterParams { theta: fit.theta, ..base };

    // the filter runs on from the estimation segment into the held-out one
    let span = full.slice(start..end)?;
    let out = run_filter(&span, &params, config.init_window_len)?;
    let rows = &out.series.rows[out.series.len() - config.evaluation_len..];
    let held_out = full.slice(est_end..end)?;
    debug_assert!(rows.iter().zip(&held_out.values).all(|(r, x)| r.x == *x));

    let truth: Vec<f64> = held_out.values.iter().map(|&x| config.model.spot_variance(x)).collect();
    let semi: Vec<f64> = rows.iter().map(|r| r.y_filtered).collect();
    let rmse_semi = rmse(&semi.iter().map(|&v| Some(v)).collect::<Vec<_>>(), &truth)?;

    let ll = LocalLinear::new(&regression_pairs(&est), config.kernel)?;
    let ker: Vec<Option<f64>> = held_out.values.iter().map(|&x| ll.fit(x).ok().map(|f| f.0)).collect();
    let rmse_ker = rmse(&ker, &truth).ok();
    let v_ker = ker.iter().copied().collect::<Option<Vec<f64>>>().map(|k| integrated_vol(&k, full.dt));

    Ok(PathOutcome {
        path_index,
        drift,
        theta: fit.theta,
        rmse_semi,
        rmse_ker,
        realized: realized_vol(&held_out),
        v_semi: integrated_vol(&semi, full.dt),
        v_ker,
        v_true: integrated_vol(&truth, full.dt),
        diagnostics: out.diagnostics,
    })
}

/// Runs `f` over `0..n` on at most `workers` threads; results come back in index order.
pub fn par_map_indexed<T, F>(n: usize, workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    let run = || (0..n as u64).into_par_iter().map(&f).collect::<Vec<T>>();
    match workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(run))
        }
        None => Ok(run()),
    }
}

/// Outcomes of every path, in path order; failed paths are kept as errors.
pub fn run_paths(config: &ExperimentConfig, workers: Option<usize>) -> Result<Vec<Result<PathOutcome>>> {
    config.validate()?;
    par_map_indexed(config.n_paths, workers, |i| run_path(config, i))
}

/// One line of a summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub model: String,
    pub method: String,
    pub stats: SummaryStats,
    pub dropped: usize,
}

/// Largest tolerated fraction of dropped paths.
pub const MAX_DROP_FRACTION: f64 = 0.05;

fn table_row(model: &str, method: &str, values: Vec<Option<f64>>) -> Result<TableRow> {
    let total = values.len();
    let kept: Vec<f64> = values.into_iter().flatten().collect();
    let dropped = total - kept.len();
    if dropped as f64 > MAX_DROP_FRACTION * total as f64 {
        return Err(Error::TooManyFailures { dropped, total });
    }
    Ok(TableRow { model: model.to_string(), method: method.to_string(), stats: summarize(&kept)?, dropped })
}

/// RMSE rows (`semi`, `ker`) from per-path outcomes.
pub fn table1_rows(model: &str, outcomes: &[Result<PathOutcome>]) -> Result<Vec<TableRow>> {
    let semi = outcomes.iter().map(|o| o.as_ref().ok().map(|o| o.rmse_semi)).collect();
    let ker = outcomes.iter().map(|o| o.as_ref().ok().and_then(|o| o.rmse_ker)).collect();
    Ok(vec![table_row(model, "semi", semi)?, table_row(model, "ker", ker)?])
}

/// `R - V` rows (`semi`, `ker`) from per-path outcomes.
pub fn table2_rows(model: &str, outcomes: &[Result<PathOutcome>]) -> Result<Vec<TableRow>> {
    let semi = outcomes.iter().map(|o| o.as_ref().ok().map(|o| o.realized - o.v_semi)).collect();
    let ker = outcomes.iter().map(|o| o.as_ref().ok().and_then(|o| o.v_ker.map(|v| o.realized - v))).collect();
    Ok(vec![table_row(model, "semi", semi)?, table_row(model, "ker", ker)?])
}

/// Both tables from one pass over the paths of every model.
pub fn run_tables(configs: &[ExperimentConfig], workers: Option<usize>) -> Result<(Vec<TableRow>, Vec<TableRow>)> {
    let (mut t1, mut t2) = (Vec::new(), Vec::new());
    for config in configs {
        let outcomes = run_paths(config, workers)?;
        t1.extend(table1_rows(&config.name, &outcomes)?);
        t2.extend(table2_rows(&config.name, &outcomes)?);
    }
    Ok((t1, t2))
}

/// Mean and spread of the held-out RMSE per model and method.
pub fn run_table1(configs: &[ExperimentConfig], workers: Option<usize>) -> Result<Vec<TableRow>> {
    let mut rows = Vec::new();
    for config in configs {
        rows.extend(table1_rows(&config.name, &run_paths(config, workers)?)?);
    }
    Ok(rows)
}

/// Mean and spread of realized minus integrated volatility per model and method.
pub fn run_table2(configs: &[ExperimentConfig], workers: Option<usize>) -> Result<Vec<TableRow>> {
    let mut rows = Vec::new();
    for config in configs {
        rows.extend(table2_rows(&config.name, &run_paths(config, workers)?)?);
    }
    Ok(rows)
}

/// In-sample curve study: one simulated path observed at several steps.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveConfig {
    pub name: String,
    pub model: ModelSpec,
    pub gen_dt: f64,
    pub burn_in_span: f64,
    pub total_span: f64,
    /// Observation steps; each must be an integer multiple of the smallest.
    pub dts: Vec<f64>,
    /// Span of the leading window that sets the initial volatility.
    pub init_span: f64,
    pub seed: u64,
    pub kernel: KernelConfig,
    pub theta_search: ThetaSearchConfig,
    pub filter: FilterSettings,
}

impl CurveConfig {
    pub fn preset(named: &presets::NamedModel, seed: u64) -> Self {
        Self {
            name: named.name.to_string(),
            model: named.model,
            gen_dt: presets::CURVE_GEN_DT,
            burn_in_span: presets::CURVE_BURN_IN,
            total_span: presets::CURVE_SPAN,
            dts: presets::CURVE_DTS.to_vec(),
            init_span: 1.0 / 40.0,
            seed,
            kernel: KernelConfig { bandwidth: named.bandwidth },
            theta_search: ThetaSearchConfig::default(),
            filter: FilterSettings::default(),
        }
    }

    fn finest(&self) -> f64 {
        self.dts.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.kernel.validate()?;
        self.theta_search.validate()?;
        if self.dts.is_empty() {
            return Err(Error::InvalidArgument("at least one observation step is needed".into()));
        }
        let finest = self.finest();
        self.sim(finest).layout()?;
        for &dt in &self.dts {
            let r = dt / finest;
            if (r - r.round()).abs() > 1e-6 * r {
                return Err(Error::InvalidArgument(format!("step {dt} is not a multiple of {finest}")));
            }
            self.sim(dt).layout()?;
        }
        if !(self.init_span > 0.0 && self.init_span < self.total_span) {
            return Err(Error::InvalidArgument("init_span must lie inside (0, total_span)".into()));
        }
        Ok(())
    }

    fn sim(&self, dt: f64) -> SimConfig {
        SimConfig {
            gen_dt: self.gen_dt,
            sample_dt: dt,
            burn_in_span: self.burn_in_span,
            total_span: self.total_span,
            seed: self.seed,
        }
    }

    /// Init window length at step `dt`, endpoints included.
    pub fn init_window_len(&self, dt: f64) -> usize {
        (self.init_span / dt).round() as usize + 1
    }
}

/// One point of a volatility curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub x: f64,
    pub g_true: f64,
    pub y_semi: f64,
    pub y_local_linear: Option<f64>,
}

/// Curve data at one observation step, sorted by `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    pub dt: f64,
    pub drift: DriftEstimate,
    pub theta: f64,
    pub diagnostics: Diagnostics,
    pub rows: Vec<CurveRow>,
}

impl CurveTable {
    pub fn rmse_semi(&self) -> Result<f64> {
        let est: Vec<Option<f64>> = self.rows.iter().map(|r| Some(r.y_semi)).collect();
        rmse(&est, &self.rows.iter().map(|r| r.g_true).collect::<Vec<_>>())
    }

    pub fn rmse_local_linear(&self) -> Result<f64> {
        let est: Vec<Option<f64>> = self.rows.iter().map(|r| r.y_local_linear).collect();
        rmse(&est, &self.rows.iter().map(|r| r.g_true).collect::<Vec<_>>())
    }
}

/// Path `path_index` at every configured step. All steps subsample one fine
/// path, so the curves differ only through the sampling frequency.
pub fn curve_paths(config: &CurveConfig, path_index: u64) -> Result<Vec<Path>> {
    config.validate()?;
    let finest = config.finest();
    let base = generate_scenario_indexed(&config.model, &config.sim(finest), path_index)?;
    config
        .dts
        .iter()
        .map(|&dt| {
            let stride = (dt / finest).round() as usize;
            subsample(&base, stride)
        })
        .collect()
}

/// Estimates both curves on one path at one step.
pub fn curve_table(config: &CurveConfig, path: &Path) -> Result<CurveTable> {
    let window = config.init_window_len(path.dt);
    let drift = drift_lse(path)?;
    let base = FilterParams::new(1.0, drift.alpha_hat, drift.beta_hat)?
        .with_y1_init(config.filter.y1_init)?
        .with_y_floor(config.filter.y_floor)?;
    let fit = theta_qmle_fit(path, &drift, &config.theta_search, window, &base)?;
    let out = run_filter(path, &FilterParams { theta: fit.theta, ..base }, window)?;
    let ll = LocalLinear::new(&regression_pairs(path), config.kernel)?;
    let mut rows: Vec<CurveRow> = out
        .series
        .rows
        .iter()
        .map(|r| CurveRow {
            x: r.x,
            g_true: config.model.spot_variance(r.x),
            y_semi: r.y_filtered,
            y_local_linear: ll.fit(r.x).ok().map(|f| f.0),
        })
        .collect();
    rows.sort_by(|a, b| a.x.total_cmp(&b.x));
    Ok(CurveTable { dt: path.dt, drift, theta: fit.theta, diagnostics: out.diagnostics, rows })
}

/// Curve tables for path `path_index`, one per configured step.
pub fn run_curves(config: &CurveConfig, path_index: u64) -> Result<Vec<CurveTable>> {
    curve_paths(config, path_index)?.iter().map(|p| curve_table(config, p)).collect()
}

/// Curve RMSE against the true volatility at one step, over many paths.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveTrend {
    pub dt: f64,
    pub semi: SummaryStats,
    pub local_linear: SummaryStats,
    pub dropped: usize,
}

/// Mean curve RMSE per step over paths `0..n_paths`.
pub fn curve_trend(config: &CurveConfig, n_paths: usize, workers: Option<usize>) -> Result<Vec<CurveTrend>> {
    config.validate()?;
    let per_path = par_map_indexed(n_paths, workers, |i| -> Result<Vec<(f64, Option<f64>)>> {
        run_curves(config, i)?.iter().map(|t| Ok((t.rmse_semi()?, t.rmse_local_linear().ok()))).collect()
    })?;
    config
        .dts
        .iter()
        .enumerate()
        .map(|(j, &dt)| {
            let semi =
                table_row(&config.name, "semi", per_path.iter().map(|p| p.as_ref().ok().map(|v| v[j].0)).collect())?;
            let ll = table_row(
                &config.name,
                "ker",
                per_path.iter().map(|p| p.as_ref().ok().and_then(|v| v[j].1)).collect(),
            )?;
            Ok(CurveTrend { dt, semi: semi.stats, local_linear: ll.stats, dropped: semi.dropped })
        })
        .collect()
}
