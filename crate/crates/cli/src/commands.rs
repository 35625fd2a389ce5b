//! The subcommands. Each writes its outputs plus a manifest holding the
//! resolved configuration.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path as FsPath, PathBuf};

use spotvol::baselines::LocalLinear;
use spotvol::estimation::{drift_lse, theta_qmle_fit, DriftEstimate};
use spotvol::experiments::{par_map_indexed, run_curves, run_tables, CurveTable, TableRow};
use spotvol::io;
use spotvol::sde::generate_scenario_indexed;
use spotvol::volfilter::{run_filter, FilterParams};
use spotvol::{Error, Path};

use crate::config::{ConfigError, RunConfig};

/// Why a command failed; decides the exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad input, configuration or file system trouble.
    Usage(String),
    /// The numerics broke down on valid input.
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }

    fn with_context(self, what: &str) -> Self {
        match self {
            Failure::Usage(m) => Failure::Usage(format!("{what}: {m}")),
            Failure::Numerical(m) => Failure::Numerical(format!("{what}: {m}")),
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

type Outcome = Result<(), Failure>;

fn io_failure(path: &FsPath, e: std::io::Error) -> Failure {
    Failure::Usage(format!("{}: {e}", path.display()))
}

fn create(path: &FsPath) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| io_failure(path, e))
}

fn create_dir(dir: &FsPath) -> Outcome {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))
}

fn read_input(path: &FsPath) -> Result<Path, Failure> {
    let f = File::open(path).map_err(|e| io_failure(path, e))?;
    io::read_path(std::io::BufReader::new(f)).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

/// `<file>.<suffix>` next to an output file.
fn sidecar(out: &FsPath, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

/// Manifest: the resolved configuration plus a `[run]` table and any extra tables.
fn write_manifest(path: &FsPath, command: &str, config: &RunConfig, extra: toml::Table) -> Outcome {
    let mut doc: toml::Table = config.to_toml().parse().expect("config round-trips");
    let mut run = toml::Table::new();
    run.insert("command".into(), command.into());
    run.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    doc.insert("run".into(), run.into());
    doc.extend(extra);
    let text = toml::to_string(&doc).expect("manifest serializes");
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn drift_table(d: &DriftEstimate, theta: f64) -> toml::Table {
    let mut t = toml::Table::new();
    t.insert("alpha_hat".into(), d.alpha_hat.into());
    t.insert("beta_hat".into(), d.beta_hat.into());
    t.insert("theta".into(), theta.into());
    t
}

pub fn simulate(config: &RunConfig, out: &FsPath) -> Outcome {
    let model = config.model()?;
    let sim = config.sim_config()?;
    let path = generate_scenario_indexed(&model, &sim, config.experiment.path_index)?;
    io::write_path(create(out)?, &path)?;
    write_manifest(&sidecar(out, "manifest.toml"), "simulate", config, toml::Table::new())
}

pub fn filter(config: &RunConfig, input: &FsPath, out: &FsPath) -> Outcome {
    let path = read_input(input)?;
    let window = config.filter.window_for(path.dt);
    if window < 2 || path.len() <= window {
        return Err(Error::InitWindow { window, path_len: path.len() }.into());
    }
    let drift = drift_lse(&path)?;
    let base = FilterParams::new(config.filter.theta.unwrap_or(1.0), drift.alpha_hat, drift.beta_hat)?
        .with_y1_init(config.filter.y1_init)?
        .with_y_floor(config.filter.y_floor)?;
    let theta = match config.filter.theta {
        Some(t) => t,
        None => theta_qmle_fit(&path, &drift, &config.theta_search.search(), window, &base)?.theta,
    };
    let output = run_filter(&path, &FilterParams { theta, ..base }, window)?;
    io::write_estimates(create(out)?, &output.series)?;
    io::write_key_values(create(&sidecar(out, "diagnostics"))?, &io::diagnostics_entries(&output.diagnostics))?;
    let mut extra = toml::Table::new();
    let mut est = drift_table(&drift, theta);
    est.insert("init_window_len".into(), (window as i64).into());
    extra.insert("estimates".into(), est.into());
    write_manifest(&sidecar(out, "manifest.toml"), "filter", config, extra)
}

pub fn local_linear(config: &RunConfig, input: &FsPath, out: &FsPath) -> Outcome {
    let path = read_input(input)?;
    let smoother = LocalLinear::from_path(&path, config.kernel()?)?;
    let estimates: Vec<Option<f64>> = path.values.iter().map(|&x| smoother.fit(x).ok().map(|f| f.0)).collect();
    io::write_spot_series(create(out)?, &path, &estimates)?;
    write_manifest(&sidecar(out, "manifest.toml"), "local-linear", config, toml::Table::new())
}

fn curve_file_name(model: &str, dt: f64) -> String {
    let per_unit = 1.0 / dt;
    if (per_unit - per_unit.round()).abs() < 1e-9 * per_unit {
        format!("curve_{model}_dt{}.csv", per_unit.round() as u64)
    } else {
        format!("curve_{model}_dt{dt:e}.csv")
    }
}

pub fn curves(config: &RunConfig, out_dir: &FsPath, workers: Option<usize>) -> Outcome {
    let configs = config.curve_configs()?;
    create_dir(out_dir)?;
    let index = config.experiment.path_index;
    let results: Vec<Result<Vec<CurveTable>, Error>> =
        par_map_indexed(configs.len(), workers, |i| run_curves(&configs[i as usize], index))?;
    let mut fits = toml::Table::new();
    for (c, tables) in configs.iter().zip(results) {
        let tables = tables.map_err(|e| Failure::from(e).with_context(&c.name))?;
        let mut per_dt = toml::Table::new();
        for t in &tables {
            let name = curve_file_name(&c.name, t.dt);
            io::write_curve(create(&out_dir.join(&name))?, t)?;
            let mut entry = drift_table(&t.drift, t.theta);
            entry.insert("dt".into(), t.dt.into());
            per_dt.insert(name, entry.into());
        }
        fits.insert(c.name.clone(), per_dt.into());
    }
    let mut extra = toml::Table::new();
    extra.insert("estimates".into(), fits.into());
    let mut notes = toml::Table::new();
    notes.insert(
        "init_window".into(),
        "the init window covers the first init_span of the observed span; curve rows start after it".into(),
    );
    extra.insert("notes".into(), notes.into());
    write_manifest(&out_dir.join("curves.manifest.toml"), "curves", config, extra)
}

fn tables(config: &RunConfig, out_dir: &FsPath, workers: Option<usize>, which: &str) -> Outcome {
    let configs = config.table_configs()?;
    create_dir(out_dir)?;
    let (t1, t2) = run_tables(&configs, workers)?;
    let rows: &[TableRow] = if which == "table1" { &t1 } else { &t2 };
    io::write_table(create(&out_dir.join(format!("{which}.csv")))?, rows)?;
    write_manifest(&out_dir.join(format!("{which}.manifest.toml")), which, config, toml::Table::new())
}

pub fn table1(config: &RunConfig, out_dir: &FsPath, workers: Option<usize>) -> Outcome {
    tables(config, out_dir, workers, "table1")
}

pub fn table2(config: &RunConfig, out_dir: &FsPath, workers: Option<usize>) -> Outcome {
    tables(config, out_dir, workers, "table2")
}
