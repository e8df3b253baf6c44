//! Artifact writers: CSV tables and the run manifest. Floating-point
//! values are written in scientific notation with 17 significant digits so
//! identical runs produce identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use geoheat::grid::StructuredGrid;
use geoheat::phases::{PHASES, PhaseState};
use geoheat::scenarios::{ErrorReport, LayeredRun};

pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

/// Per-step series: time, step control, iteration effort, extrema, and
/// phase totals.
pub fn write_series(dir: &Path, run: &LayeredRun) -> Result<PathBuf> {
    let mut out = String::from(
        "step,time,tau,cfl,fixed_point_iterations,min,max,total_mobile,total_immobile,total_adsorbed,total_immobile_adsorbed\n",
    );
    for d in &run.series {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            d.step,
            fmt(d.time),
            fmt(d.tau),
            fmt(d.cfl),
            d.fixed_point_iterations,
            fmt(d.min),
            fmt(d.max),
            fmt(d.phase_totals[0]),
            fmt(d.phase_totals[1]),
            fmt(d.phase_totals[2]),
            fmt(d.phase_totals[3]),
        ));
    }
    let path = dir.join("series.csv");
    fs::write(&path, out).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

/// Field snapshot: one row per (cell, species, phase).
pub fn write_snapshot(
    dir: &Path,
    step: usize,
    state: &PhaseState,
    grid: &StructuredGrid,
) -> Result<PathBuf> {
    let mut out = String::from("x,y,species,phase,value\n");
    for &phase in &PHASES {
        for species in 0..state.species() {
            for cell in 0..state.cells() {
                let (x, y) = grid.cell_center(cell);
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    fmt(x),
                    fmt(y),
                    species,
                    phase.name(),
                    fmt(state.get(phase, species, cell)),
                ));
            }
        }
    }
    let path = dir.join(format!("snapshot_{step}.csv"));
    fs::write(&path, out).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

/// Error table of a benchmark or convergence study.
pub fn write_errors(dir: &Path, reports: &[ErrorReport]) -> Result<PathBuf> {
    let mut out = String::from("scheme,k,tau,linf,l2,fitted_order\n");
    for report in reports {
        let order = report
            .order
            .as_ref()
            .map(|o| fmt(o.slope))
            .unwrap_or_default();
        for row in &report.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.scheme,
                row.k.map(|k| k.to_string()).unwrap_or_default(),
                row.tau.map(fmt).unwrap_or_default(),
                fmt(row.linf),
                fmt(row.l2),
                order,
            ));
        }
    }
    let path = dir.join("errors.csv");
    fs::write(&path, out).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

/// Manifest: config echo, package version, wall time, produced files.
pub fn write_manifest(
    dir: &Path,
    config: &crate::config::RunConfig,
    wall_seconds: f64,
    outputs: &[PathBuf],
    extra: serde_json::Value,
) -> Result<PathBuf> {
    let manifest = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time_seconds": wall_seconds,
        "outputs": outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "diagnostics": extra,
        "config": config,
    });
    let path = dir.join("run.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}
