//! CSV export and import. Floats use Rust's shortest round-trip formatting,
//! so identical inputs give byte-identical files.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::carleman::SweepReport;
use crate::discretize::{Grid, Trajectory};
use crate::error::{Error, Result};
use crate::model::ValidationReport;
use crate::stability::ExperimentRecord;

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    Ok(csv::WriterBuilder::new().flexible(true).from_path(path)?)
}

/// Columns `x, component, value`.
pub fn write_grid_function(path: &Path, field: ArrayView2<f64>, grid: &Grid) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["x", "component", "value"])?;
    for (i, row) in field.outer_iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            w.write_record([fmt(grid.x(i)), k.to_string(), fmt(*v)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_grid_function`] onto `grid`.
pub fn read_grid_function(path: &Path, grid: &Grid) -> Result<Array2<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut cells: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let h = grid.h();
    let mut components = 0;
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad =
            |what: &str| Error::Config(format!("{}: row {}: {what}", path.display(), line + 2));
        if rec.len() != 3 {
            return Err(bad("expected columns x, component, value"));
        }
        let x: f64 = rec[0]
            .trim()
            .parse()
            .map_err(|_| bad("x is not a number"))?;
        let k: usize = rec[1]
            .trim()
            .parse()
            .map_err(|_| bad("component is not an index"))?;
        let v: f64 = rec[2]
            .trim()
            .parse()
            .map_err(|_| bad("value is not a number"))?;
        let i = (x / h).round();
        if i < 0.0
            || i as usize >= grid.nodes()
            || (x - grid.x(i as usize)).abs() > 1e-9 * grid.length
        {
            return Err(bad(&format!("x = {x} is not a grid node")));
        }
        components = components.max(k + 1);
        cells.insert((i as usize, k), v);
    }
    if cells.len() != grid.nodes() * components || components == 0 {
        return Err(Error::Config(format!(
            "{}: expected {} nodes per component, found {} values for {components} components",
            path.display(),
            grid.nodes(),
            cells.len()
        )));
    }
    Ok(Array2::from_shape_fn(
        (grid.nodes(), components),
        |(i, k)| cells[&(i, k)],
    ))
}

/// Columns `t, x, component, value`, every `stride`-th time level plus the last.
pub fn write_trajectory(path: &Path, traj: &Trajectory, stride: usize) -> Result<()> {
    let grid = traj.grid();
    let stride = stride.max(1);
    let mut w = writer(path)?;
    w.write_record(["t", "x", "component", "value"])?;
    for m in (0..=grid.nt).filter(|m| m % stride == 0 || *m == grid.nt) {
        let t = fmt(grid.t(m));
        for (i, row) in traj.slice(m).outer_iter().enumerate() {
            let x = fmt(grid.x(i));
            for (k, v) in row.iter().enumerate() {
                w.write_record([t.as_str(), x.as_str(), &k.to_string(), &fmt(*v)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per `(s, λ)` cell; weighted fields are mantissas of `e^{lhs_exponent}`.
pub fn write_sweep(path: &Path, report: &SweepReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "s",
        "lambda",
        "lhs_mantissa",
        "lhs_exponent",
        "rhs_interior",
        "rhs_terminal",
        "rhs_initial",
        "c_star",
        "bc_warning",
    ])?;
    for c in &report.cells {
        let b = &c.budget;
        w.write_record([
            fmt(c.s),
            fmt(c.lambda),
            fmt(b.lhs),
            fmt(b.exponent),
            fmt(b.rhs_interior),
            fmt(b.rhs_terminal),
            fmt(b.rhs_initial),
            fmt(b.c_star),
            b.bc_warning.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Experiment records followed by a `# summary` line.
pub fn write_records(
    path: &Path,
    records: &[ExperimentRecord],
    theta: Option<f64>,
    slope: Option<f64>,
    summary: &str,
) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "epsilon", "E_T", "E_t0", "E_0", "D", "theta", "slope", "product", "margin", "note",
    ])?;
    for r in records {
        let note = r
            .failure
            .as_deref()
            .map(|f| format!("failed: {f}"))
            .or_else(|| r.excluded.as_ref().map(|e| format!("excluded: {e}")))
            .unwrap_or_default();
        w.write_record([
            fmt(r.epsilon),
            opt(r.e_t),
            opt(r.e_t0),
            opt(r.e_0),
            opt(r.d),
            opt(theta),
            opt(slope),
            opt(r.product),
            opt(r.margin),
            note,
        ])?;
    }
    w.write_record([format!("# summary: {summary}")])?;
    w.flush()?;
    Ok(())
}

/// `quantity, value` pairs of a validation run.
pub fn write_validation(
    path: &Path,
    report: &ValidationReport,
    extra: &[(&str, f64)],
) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["quantity", "value"])?;
    let rows = [
        ("passed", if report.passed { 1.0 } else { 0.0 }),
        ("samples", report.samples as f64),
        ("symmetry_defect", report.symmetry_defect),
        ("min_form_eigenvalue", report.min_form_eigenvalue),
        ("min_probe_quotient", report.min_probe_quotient),
        ("ellipticity_margin", report.ellipticity_margin),
        ("sigma", report.sigma),
    ];
    for (name, v) in rows.iter().chain(extra) {
        w.write_record([name.to_string(), fmt(*v)])?;
    }
    w.flush()?;
    Ok(())
}

/// Generic table with a header and numeric rows.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| fmt(*v)))?;
    }
    w.flush()?;
    Ok(())
}
