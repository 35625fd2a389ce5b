//! Fixtures shared by the benchmarks.

use spotvol::presets::{table_model, table_sim};
use spotvol::sde::generate_scenario_indexed;
use spotvol::Path;

/// The estimation segment (2000 observations) of a reference `model` path.
pub fn estimation_segment(model: &str, seed: u64) -> Path {
    let m = table_model(model).expect("preset");
    let full = generate_scenario_indexed(&m.model, &table_sim(seed), 0).expect("simulation");
    full.slice(2000..4000).expect("segment")
}
