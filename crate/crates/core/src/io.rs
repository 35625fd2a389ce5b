//! CSV files for paths, filtered series, curves and summary tables, and the
//! key=value diagnostics side file.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::experiments::{CurveTable, TableRow};
use crate::sde::Path;
use crate::volfilter::{Diagnostics, EstimateSeries};

/// Data files carry 15 significant digits.
pub fn fmt_data(v: f64) -> String {
    format!("{v:.14e}")
}

/// Summary tables carry 6 significant digits.
pub fn fmt_summary(v: f64) -> String {
    format!("{v:.5e}")
}

fn fmt_opt(v: Option<f64>, f: fn(f64) -> String) -> String {
    v.map(f).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e.to_string()),
        kind => Error::Csv { line, msg: format!("{kind:?}") },
    }
}

fn writer<W: Write>(w: W, header: &[&str]) -> Result<csv::Writer<W>> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header).map_err(csv_err)?;
    Ok(out)
}

fn finish<W: Write>(mut out: csv::Writer<W>) -> Result<()> {
    out.flush()?;
    Ok(())
}

/// `t,x` rows.
pub fn write_path<W: Write>(w: W, path: &Path) -> Result<()> {
    let mut out = writer(w, &["t", "x"])?;
    for (k, &x) in path.values.iter().enumerate() {
        out.write_record([fmt_data(path.time(k)), fmt_data(x)]).map_err(csv_err)?;
    }
    finish(out)
}

/// Reads `t,x` rows. Times must be equidistant; the step is taken from the
/// first and last time.
pub fn read_path<R: Read>(r: R) -> Result<Path> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header = rdr.headers().map_err(csv_err)?;
    if header.iter().collect::<Vec<_>>() != ["t", "x"] {
        return Err(Error::Csv {
            line: 1,
            msg: format!("expected header `t,x`, got `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut rows: Vec<(usize, f64, f64)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let parse = |i: usize| -> Result<f64> {
            let s = &rec[i];
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Csv { line, msg: format!("not a finite number: `{s}`") })
        };
        rows.push((line, parse(0)?, parse(1)?));
    }
    if rows.len() < 2 {
        return Err(Error::Csv {
            line: rows.first().map_or(1, |r| r.0),
            msg: format!("a path needs at least 2 rows, got {}", rows.len()),
        });
    }
    let t0 = rows[0].1;
    let dt = (rows[rows.len() - 1].1 - t0) / (rows.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::Csv { line: rows[1].0, msg: "times must increase".into() });
    }
    for (k, &(line, t, _)) in rows.iter().enumerate() {
        if (t - (t0 + k as f64 * dt)).abs() > 1e-6 * dt {
            return Err(Error::Csv { line, msg: format!("time {t} breaks the equidistant grid with step {dt}") });
        }
    }
    Path::with_start(t0, dt, rows.into_iter().map(|r| r.2).collect())
}

/// `t,x,y_filtered` rows.
pub fn write_estimates<W: Write>(w: W, series: &EstimateSeries) -> Result<()> {
    let mut out = writer(w, &["t", "x", "y_filtered"])?;
    for (i, r) in series.rows.iter().enumerate() {
        out.write_record([fmt_data(series.time(i)), fmt_data(r.x), fmt_data(r.y_filtered)]).map_err(csv_err)?;
    }
    finish(out)
}

/// `t,x,y_estimate` rows, one per path value; a missing estimate is an empty field.
pub fn write_spot_series<W: Write>(w: W, path: &Path, estimates: &[Option<f64>]) -> Result<()> {
    if estimates.len() != path.len() {
        return Err(Error::InvalidArgument(format!("{} estimates for {} path values", estimates.len(), path.len())));
    }
    let mut out = writer(w, &["t", "x", "y_estimate"])?;
    for (k, (&x, &y)) in path.values.iter().zip(estimates).enumerate() {
        out.write_record([fmt_data(path.time(k)), fmt_data(x), fmt_opt(y, fmt_data)]).map_err(csv_err)?;
    }
    finish(out)
}

/// `x,g_true,y_semi,y_local_linear` rows in the table's order.
pub fn write_curve<W: Write>(w: W, table: &CurveTable) -> Result<()> {
    let mut out = writer(w, &["x", "g_true", "y_semi", "y_local_linear"])?;
    for r in &table.rows {
        out.write_record([fmt_data(r.x), fmt_data(r.g_true), fmt_data(r.y_semi), fmt_opt(r.y_local_linear, fmt_data)])
            .map_err(csv_err)?;
    }
    finish(out)
}

pub const TABLE_HEADER: [&str; 6] = ["model", "method", "mean", "std", "n", "dropped"];

/// `model,method,mean,std,n,dropped`; `std` is empty for a single path.
pub fn write_table<W: Write>(w: W, rows: &[TableRow]) -> Result<()> {
    let mut out = writer(w, &TABLE_HEADER)?;
    for r in rows {
        out.write_record([
            r.model.clone(),
            r.method.clone(),
            fmt_summary(r.stats.mean),
            fmt_opt(r.stats.std, fmt_summary),
            r.stats.n.to_string(),
            r.dropped.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(out)
}

/// Filter counters as `key=value` entries.
pub fn diagnostics_entries(d: &Diagnostics) -> Vec<(String, String)> {
    vec![
        ("steps".into(), d.steps.to_string()),
        ("skipped_updates".into(), d.skipped_updates.to_string()),
        ("floor_activations".into(), d.floor_activations.to_string()),
        ("degenerate_kernel".into(), d.degenerate_kernel.to_string()),
    ]
}

/// One `key=value` line per entry.
pub fn write_key_values<W: Write>(mut w: W, entries: &[(String, String)]) -> Result<()> {
    for (k, v) in entries {
        writeln!(w, "{k}={v}")?;
    }
    w.flush()?;
    Ok(())
}
