//! The simulation settings of the reference studies.

use crate::sde::{Diffusion, ModelSpec, SimConfig};

/// A model with its name and default kernel bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NamedModel {
    pub name: &'static str,
    pub model: ModelSpec,
    pub bandwidth: f64,
}

const fn power(alpha: f64, beta: f64, s0: f64, rho: f64, x0: f64) -> ModelSpec {
    ModelSpec { drift_alpha: alpha, drift_beta: beta, diffusion: Diffusion::Power { s0, rho }, x0 }
}

/// Starting value of the interest-rate models.
pub const TABLE_X0: f64 = 0.1;
/// Fine grid of the interest-rate studies.
pub const TABLE_GEN_DT: f64 = 1.0 / 3.2e5;
/// Observation step of the interest-rate studies.
pub const TABLE_DT: f64 = 1.0 / 16000.0;
/// Observations discarded, used for estimation, and held out, per path.
pub const TABLE_SEGMENT: usize = 2000;

/// Fine grid of the volatility-curve study.
pub const CURVE_GEN_DT: f64 = 1.0 / 1.28e6;
pub const CURVE_BURN_IN: f64 = 0.5;
pub const CURVE_SPAN: f64 = 1.0;
pub const CURVE_DTS: [f64; 3] = [1.0 / 4000.0, 1.0 / 8000.0, 1.0 / 16000.0];

/// Init window length covering 1/40 time unit at step `dt`, endpoints included.
pub fn init_window_for(dt: f64) -> usize {
    (1.0 / (40.0 * dt)).round() as usize + 1
}

/// Interest-rate models `lin`, `quad`, `cube`, `nlin`.
pub fn table_models() -> [NamedModel; 4] {
    [
        NamedModel { name: "lin", model: power(0.184, -0.2146, 0.0783, 0.5, TABLE_X0), bandwidth: 0.15 },
        NamedModel { name: "quad", model: power(0.0073, -0.1409, 0.2596, 1.0, TABLE_X0), bandwidth: 0.13 },
        NamedModel { name: "cube", model: power(0.0408, -0.5921, 1.2924, 1.5, TABLE_X0), bandwidth: 0.12 },
        NamedModel { name: "nlin", model: power(0.0074, -0.1180, 0.0713, 0.7296, TABLE_X0), bandwidth: 0.10 },
    ]
}

/// Mean-reverting models `dX = (1 - X) dt + sigma(X) dB` from `X_0 = 1`.
pub fn curve_models() -> [NamedModel; 4] {
    let gauss = ModelSpec { drift_alpha: 1.0, drift_beta: -1.0, diffusion: Diffusion::GaussDamped, x0: 1.0 };
    [
        NamedModel { name: "sqrt", model: power(1.0, -1.0, 1.0, 0.5, 1.0), bandwidth: 0.15 },
        NamedModel { name: "linear", model: power(1.0, -1.0, 1.0, 1.0, 1.0), bandwidth: 0.13 },
        NamedModel { name: "pow1.5", model: power(1.0, -1.0, 1.0, 1.5, 1.0), bandwidth: 0.12 },
        NamedModel { name: "gauss", model: gauss, bandwidth: 0.10 },
    ]
}

pub fn table_model(name: &str) -> Option<NamedModel> {
    table_models().into_iter().find(|m| m.name == name)
}

pub fn curve_model(name: &str) -> Option<NamedModel> {
    curve_models().into_iter().find(|m| m.name == name)
}

/// Any preset by name.
pub fn model_by_name(name: &str) -> Option<NamedModel> {
    table_model(name).or_else(|| curve_model(name))
}

/// One contiguous path of `3 * TABLE_SEGMENT` observations from `X_0 = 0.1`.
pub fn table_sim(seed: u64) -> SimConfig {
    SimConfig {
        gen_dt: TABLE_GEN_DT,
        sample_dt: TABLE_DT,
        burn_in_span: 0.0,
        total_span: (3 * TABLE_SEGMENT - 1) as f64 * TABLE_DT,
        seed,
    }
}

/// Half a time unit of burn-in, then one time unit observed at `dt`.
pub fn curve_sim(dt: f64, seed: u64) -> SimConfig {
    SimConfig { gen_dt: CURVE_GEN_DT, sample_dt: dt, burn_in_span: CURVE_BURN_IN, total_span: CURVE_SPAN, seed }
}
