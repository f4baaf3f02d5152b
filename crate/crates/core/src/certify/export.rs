//! CSV and JSON writers. Floats are written with 17 significant digits;
//! NaN (a column that does not apply) is written as an empty field.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::grid::{Grid, GridState};

use super::{SweepItem, TimeSeries};

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// Columns `t, d, W, lower_bound, upper_bound, y_comparison, envelope`.
pub fn write_series<W: Write>(out: W, series: &TimeSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "d", "W", "lower_bound", "upper_bound", "y_comparison", "envelope"])?;
    for k in 0..series.len() {
        let row = [series.t[k], series.d[k], series.w[k], series.lower[k], series.upper[k], series.y[k], series.envelope[k]];
        w.write_record(row.iter().map(|&x| fmt_f64(x)))?;
    }
    w.flush()?;
    Ok(())
}

/// Full fields at one time: columns `x, u, v`.
pub fn write_snapshot<W: Write>(out: W, grid: &Grid, state: &GridState) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "u", "v"])?;
    for i in 0..grid.len() {
        w.write_record([fmt_f64(grid.x(i)), fmt_f64(state.u[i]), fmt_f64(state.v[i])])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per sweep item.
pub fn write_sweep_summary<W: Write>(out: W, items: &[SweepItem]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sigma", "t0", "shape", "verdict", "delta", "d_t0", "d_below_sigma_margin", "first_violation", "error"])?;
    for item in items {
        let mut row = vec![fmt_f64(item.sigma), fmt_f64(item.t0), item.shape.to_string()];
        match &item.certificate {
            Some(c) => {
                let margin = c.clause("d_below_sigma").map_or(f64::NAN, |m| m.margin.to_f64());
                row.push(c.verdict.as_str().to_string());
                row.extend([fmt_f64(c.inputs.delta), fmt_f64(c.inputs.d_t0), fmt_f64(margin), c.first_violation.map_or(String::new(), fmt_f64)]);
                row.push(String::new());
            }
            None => {
                row.extend(["error".to_string(), String::new(), String::new(), String::new(), String::new()]);
                row.push(item.error.clone().unwrap_or_default());
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}
