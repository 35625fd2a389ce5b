//! Run configuration: strict TOML sections, `--set` overrides and resolution
//! into the library's typed configs.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use spotvol::baselines::KernelConfig;
use spotvol::estimation::ThetaSearchConfig;
use spotvol::experiments::{CurveConfig, ExperimentConfig, FilterSettings};
use spotvol::presets::{self, NamedModel};
use spotvol::volfilter::DEFAULT_Y_FLOOR;
use spotvol::{Diffusion, ModelSpec, SimConfig};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub sim: SimSection,
    pub filter: FilterSection,
    pub kernel: KernelSection,
    pub theta_search: ThetaSection,
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift_alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift_beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub gen_dt: f64,
    pub sample_dt: f64,
    pub burn_in_span: f64,
    pub total_span: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            gen_dt: presets::TABLE_GEN_DT,
            sample_dt: presets::TABLE_DT,
            burn_in_span: 0.0,
            total_span: presets::TABLE_SEGMENT as f64 * presets::TABLE_DT,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSection {
    pub init_span: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_window_len: Option<usize>,
    pub y1_init: f64,
    pub y_floor: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

impl Default for FilterSection {
    fn default() -> Self {
        Self { init_span: 1.0 / 40.0, init_window_len: None, y1_init: 0.0, y_floor: DEFAULT_Y_FLOOR, theta: None }
    }
}

impl FilterSection {
    /// Window length at step `dt`: the explicit length, else `init_span` worth of steps plus one.
    pub fn window_for(&self, dt: f64) -> usize {
        self.init_window_len.unwrap_or_else(|| (self.init_span / dt).round() as usize + 1)
    }

    pub fn settings(&self) -> FilterSettings {
        FilterSettings { y1_init: self.y1_init, y_floor: self.y_floor }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThetaSection {
    pub theta_min_abs: f64,
    pub theta_max_abs: f64,
    pub grid_points: usize,
    pub refine_iters: usize,
}

impl Default for ThetaSection {
    fn default() -> Self {
        let d = ThetaSearchConfig::default();
        Self {
            theta_min_abs: d.theta_min_abs,
            theta_max_abs: d.theta_max_abs,
            grid_points: d.grid_points,
            refine_iters: d.refine_iters,
        }
    }
}

impl ThetaSection {
    pub fn search(&self) -> ThetaSearchConfig {
        ThetaSearchConfig {
            theta_min_abs: self.theta_min_abs,
            theta_max_abs: self.theta_max_abs,
            grid_points: self.grid_points,
            refine_iters: self.refine_iters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub n_paths: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub models: Option<Vec<String>>,
    pub discard_len: usize,
    pub estimation_len: usize,
    pub evaluation_len: usize,
    pub dts: Vec<f64>,
    pub curve_gen_dt: f64,
    pub curve_burn_in: f64,
    pub curve_span: f64,
    pub path_index: u64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            n_paths: 1000,
            models: None,
            discard_len: presets::TABLE_SEGMENT,
            estimation_len: presets::TABLE_SEGMENT,
            evaluation_len: presets::TABLE_SEGMENT,
            dts: presets::CURVE_DTS.to_vec(),
            curve_gen_dt: presets::CURVE_GEN_DT,
            curve_burn_in: presets::CURVE_BURN_IN,
            curve_span: presets::CURVE_SPAN,
            path_index: 0,
        }
    }
}

/// Every accepted key with its default as shown in `--help`.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("model.name", "none", "preset: lin, quad, cube, nlin, sqrt, linear, pow1.5, gauss"),
    ("model.drift_alpha", "from preset", "drift intercept"),
    ("model.drift_beta", "from preset", "drift slope"),
    ("model.diffusion", "power", "power (s0 * x^rho) or gauss_damped"),
    ("model.s0", "from preset", "power diffusion scale"),
    ("model.rho", "from preset", "power diffusion exponent"),
    ("model.x0", "from preset", "starting value"),
    ("sim.gen_dt", "3.125e-6", "Euler step"),
    ("sim.sample_dt", "6.25e-5", "observation step"),
    ("sim.burn_in_span", "0", "simulated time discarded before the first observation"),
    ("sim.total_span", "0.125", "observed time span (simulate)"),
    ("sim.seed", "none", "random seed; required by simulate, curves, table1, table2"),
    ("filter.init_span", "0.025", "time span of the init window"),
    ("filter.init_window_len", "auto", "init window length in values; overrides init_span"),
    ("filter.y1_init", "0", "initial slope state"),
    ("filter.y_floor", "1e-12", "positivity floor of the filtered volatility"),
    ("filter.theta", "estimated", "fixed curvature; skips the likelihood search (filter)"),
    ("kernel.bandwidth", "preset or 0.15", "local linear bandwidth"),
    ("theta_search.theta_min_abs", "1e-4", "smallest |theta| on the grid"),
    ("theta_search.theta_max_abs", "1e3", "largest |theta| on the grid"),
    ("theta_search.grid_points", "41", "grid magnitudes per sign"),
    ("theta_search.refine_iters", "40", "golden-section evaluations"),
    ("experiment.n_paths", "1000", "Monte Carlo paths (table1, table2)"),
    ("experiment.models", "all four of the study", "preset names (curves, table1, table2)"),
    ("experiment.discard_len", "2000", "burn-in observations per path"),
    ("experiment.estimation_len", "2000", "observations used for estimation"),
    ("experiment.evaluation_len", "2000", "held-out observations"),
    ("experiment.dts", "[2.5e-4, 1.25e-4, 6.25e-5]", "observation steps (curves)"),
    ("experiment.curve_gen_dt", "7.8125e-7", "Euler step (curves)"),
    ("experiment.curve_burn_in", "0.5", "burn-in span (curves)"),
    ("experiment.curve_span", "1", "observed span (curves)"),
    ("experiment.path_index", "0", "Monte Carlo path simulated (simulate, curves)"),
];

/// The `--help` section listing every configuration key.
pub fn keys_help() -> String {
    let mut s = String::from("Configuration keys (TOML sections, or --set section.key=value):\n");
    let width = KEYS.iter().map(|k| k.0.len()).max().unwrap_or(0);
    for (key, default, doc) in KEYS {
        let _ = writeln!(s, "  {key:width$}  {doc} [default: {default}]");
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Parses `text`, applies `section.key=value` overrides, then checks every key.
pub fn load(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut table: toml::Table =
        text.parse().map_err(|e: toml::de::Error| ConfigError(format!("config: {}", e.message())))?;
    for o in overrides {
        let (path, raw) =
            o.split_once('=').ok_or_else(|| ConfigError(format!("override `{o}` is not section.key=value")))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| ConfigError(format!("override key `{path}` is not section.key")))?;
        let value = parse_value(raw.trim());
        let entry = table.entry(section.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        match entry {
            toml::Value::Table(t) => {
                t.insert(key.to_string(), value);
            }
            _ => return err(format!("`{section}` is not a section")),
        }
    }
    toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| ConfigError(format!("config: {}", e.message())))
}

/// A TOML literal if it parses as one, else a bare string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl RunConfig {
    pub fn seed(&self) -> Result<u64, ConfigError> {
        self.sim.seed.ok_or_else(|| ConfigError("sim.seed is required (or pass --seed)".into()))
    }

    fn preset(&self) -> Result<Option<NamedModel>, ConfigError> {
        match &self.model.name {
            None => Ok(None),
            Some(n) => presets::model_by_name(n).map(Some).ok_or_else(|| ConfigError(format!("unknown model `{n}`"))),
        }
    }

    /// The model from `[model]`: a preset, optionally with fields replaced.
    pub fn model(&self) -> Result<ModelSpec, ConfigError> {
        let m = &self.model;
        let base = self.preset()?.map(|p| p.model);
        let pick = |v: Option<f64>, from: Option<f64>, key: &str| {
            v.or(from).ok_or_else(|| ConfigError(format!("model.{key} is required when model.name is not set")))
        };
        let base_power = match base.map(|b| b.diffusion) {
            Some(Diffusion::Power { s0, rho }) => Some((s0, rho)),
            _ => None,
        };
        let kind = m.diffusion.clone().unwrap_or_else(|| match base.map(|b| b.diffusion) {
            Some(Diffusion::GaussDamped) => "gauss_damped".into(),
            _ => "power".into(),
        });
        let diffusion = match kind.as_str() {
            "power" => Diffusion::Power {
                s0: pick(m.s0, base_power.map(|p| p.0), "s0")?,
                rho: pick(m.rho, base_power.map(|p| p.1), "rho")?,
            },
            "gauss_damped" => {
                if m.s0.is_some() || m.rho.is_some() {
                    return err("model.s0 and model.rho do not apply to the gauss_damped diffusion");
                }
                Diffusion::GaussDamped
            }
            other => return err(format!("model.diffusion must be `power` or `gauss_damped`, got `{other}`")),
        };
        let spec = ModelSpec {
            drift_alpha: pick(m.drift_alpha, base.map(|b| b.drift_alpha), "drift_alpha")?,
            drift_beta: pick(m.drift_beta, base.map(|b| b.drift_beta), "drift_beta")?,
            diffusion,
            x0: pick(m.x0, base.map(|b| b.x0), "x0")?,
        };
        spec.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(spec)
    }

    /// Bandwidth: `[kernel]` first, then the preset's, then 0.15.
    pub fn kernel_for(&self, preset: Option<&NamedModel>) -> Result<KernelConfig, ConfigError> {
        let h = self.kernel.bandwidth.or(preset.map(|p| p.bandwidth)).unwrap_or(0.15);
        KernelConfig::new(h).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn kernel(&self) -> Result<KernelConfig, ConfigError> {
        self.kernel_for(self.preset()?.as_ref())
    }

    pub fn sim_config(&self) -> Result<SimConfig, ConfigError> {
        let s = &self.sim;
        let c = SimConfig {
            gen_dt: s.gen_dt,
            sample_dt: s.sample_dt,
            burn_in_span: s.burn_in_span,
            total_span: s.total_span,
            seed: self.seed()?,
        };
        c.layout().map_err(|e| ConfigError(e.to_string()))?;
        Ok(c)
    }

    fn models_or(
        &self,
        defaults: [NamedModel; 4],
        lookup: fn(&str) -> Option<NamedModel>,
        what: &str,
    ) -> Result<Vec<NamedModel>, ConfigError> {
        match &self.experiment.models {
            None => Ok(defaults.to_vec()),
            Some(names) if names.is_empty() => err("experiment.models is empty"),
            Some(names) => names
                .iter()
                .map(|n| lookup(n).ok_or_else(|| ConfigError(format!("`{n}` is not a {what} model"))))
                .collect(),
        }
    }

    /// One out-of-sample study per model in `experiment.models`.
    pub fn table_configs(&self) -> Result<Vec<ExperimentConfig>, ConfigError> {
        let seed = self.seed()?;
        let e = &self.experiment;
        let n_values = e.discard_len + e.estimation_len + e.evaluation_len;
        self.models_or(presets::table_models(), presets::table_model, "table")?
            .iter()
            .map(|named| {
                let sim = SimConfig {
                    gen_dt: self.sim.gen_dt,
                    sample_dt: self.sim.sample_dt,
                    burn_in_span: self.sim.burn_in_span,
                    total_span: n_values.saturating_sub(1) as f64 * self.sim.sample_dt,
                    seed,
                };
                let c = ExperimentConfig {
                    name: named.name.to_string(),
                    model: named.model,
                    sim,
                    n_paths: e.n_paths,
                    discard_len: e.discard_len,
                    estimation_len: e.estimation_len,
                    evaluation_len: e.evaluation_len,
                    init_window_len: self.filter.window_for(self.sim.sample_dt),
                    kernel: self.kernel_for(Some(named))?,
                    theta_search: self.theta_search.search(),
                    filter: self.filter.settings(),
                };
                c.validate().map_err(|e| ConfigError(format!("{}: {e}", named.name)))?;
                Ok(c)
            })
            .collect()
    }

    /// One curve study per model in `experiment.models`.
    pub fn curve_configs(&self) -> Result<Vec<CurveConfig>, ConfigError> {
        let seed = self.seed()?;
        let e = &self.experiment;
        self.models_or(presets::curve_models(), presets::curve_model, "curve")?
            .iter()
            .map(|named| {
                let c = CurveConfig {
                    name: named.name.to_string(),
                    model: named.model,
                    gen_dt: e.curve_gen_dt,
                    burn_in_span: e.curve_burn_in,
                    total_span: e.curve_span,
                    dts: e.dts.clone(),
                    init_span: self.filter.init_span,
                    seed,
                    kernel: self.kernel_for(Some(named))?,
                    theta_search: self.theta_search.search(),
                    filter: self.filter.settings(),
                };
                c.validate().map_err(|e| ConfigError(format!("{}: {e}", named.name)))?;
                Ok(c)
            })
            .collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
