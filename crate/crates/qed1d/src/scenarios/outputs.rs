//! Artifact emission: CSV series, field profiles, plot scripts, and the
//! machine-readable run summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::modes::SpectralResponse;

use super::pipeline::RunSeries;
use super::{RunRecord, ScenarioError};

/// Format a float with 17 significant digits so the text round-trips to the
/// identical f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_text(path: &Path, text: &str) -> Result<(), ScenarioError> {
    fs::write(path, text)?;
    Ok(())
}

/// Write one CSV of named float columns; all columns must share a length.
pub fn write_csv(
    path: &Path,
    headers: &[&str],
    columns: &[&[f64]],
) -> Result<(), ScenarioError> {
    assert_eq!(headers.len(), columns.len());
    let rows = columns.first().map_or(0, |c| c.len());
    for c in columns {
        assert_eq!(c.len(), rows, "ragged CSV columns");
    }
    let mut text = String::new();
    text.push_str(&headers.join(","));
    text.push('\n');
    for r in 0..rows {
        for (i, col) in columns.iter().enumerate() {
            if i > 0 {
                text.push(',');
            }
            text.push_str(&fmt_f64(col[r]));
        }
        text.push('\n');
    }
    write_text(path, &text)
}

/// Population series: time, one column per atom, total, and quanta.
pub fn write_population_csv(
    dir: &Path,
    series: &RunSeries,
) -> Result<PathBuf, ScenarioError> {
    let path = dir.join("populations.csv");
    let mut headers: Vec<String> = vec!["t".into()];
    for j in 0..series.populations.len() {
        headers.push(format!("p_atom{j}"));
    }
    headers.push("total_excitation".into());
    headers.push("quanta".into());
    let header_refs: Vec<&str> = headers.iter().map(|s| s.as_str()).collect();
    let mut columns: Vec<&[f64]> = vec![&series.t];
    for p in &series.populations {
        columns.push(p);
    }
    columns.push(&series.total_excitation);
    columns.push(&series.quanta);
    write_csv(&path, &header_refs, &columns)?;
    Ok(path)
}

/// Entanglement series in the 3x-scaled parametrization of the two-atom
/// density matrix.
pub fn write_concurrence_csv(
    dir: &Path,
    series: &RunSeries,
) -> Result<Option<PathBuf>, ScenarioError> {
    let (Some(c), Some(ee), Some(gg), Some(z)) = (
        series.concurrence.as_ref(),
        series.ee_pop.as_ref(),
        series.gg_pop.as_ref(),
        series.z_abs.as_ref(),
    ) else {
        return Ok(None);
    };
    let path = dir.join("concurrence.csv");
    write_csv(
        &path,
        &["t", "concurrence", "ee", "gg", "z_abs"],
        &[&series.t, c, ee, gg, z],
    )?;
    Ok(Some(path))
}

/// Spectral scan samples with magnitude, for resonance inspection.
pub fn write_scan_csv(dir: &Path, scan: &SpectralResponse) -> Result<PathBuf, ScenarioError> {
    let path = dir.join("scan.csv");
    let re: Vec<f64> = scan.amplitudes.iter().map(|a| a.re).collect();
    let im: Vec<f64> = scan.amplitudes.iter().map(|a| a.im).collect();
    let mag: Vec<f64> = scan.amplitudes.iter().map(|a| a.norm()).collect();
    write_csv(
        &path,
        &["omega", "re_amp", "im_amp", "abs_amp"],
        &[&scan.omegas, &re, &im, &mag],
    )?;
    Ok(path)
}

/// One-photon field profile at a fixed time.
pub fn write_field_csv(
    dir: &Path,
    t: f64,
    xs: &[f64],
    field: &[f64],
) -> Result<PathBuf, ScenarioError> {
    // Millisecond-scale tag keeps names unique and sortable.
    let tag = format!("{:012.6}", t).replace('.', "_");
    let path = dir.join(format!("field-t{tag}.csv"));
    write_csv(&path, &["x", "E"], &[xs, field])?;
    Ok(path)
}

/// Machine-readable summary of the run.
pub fn write_summary(dir: &Path, record: &RunRecord) -> Result<PathBuf, ScenarioError> {
    let path = dir.join("summary.toml");
    let text = toml::to_string(record).map_err(|e| ScenarioError::Config(e.to_string()))?;
    write_text(&path, &text)?;
    Ok(path)
}

/// Minimal matplotlib script plotting the named CSV columns against the
/// first column.
pub fn write_plot_script(
    dir: &Path,
    stem: &str,
    csv_name: &str,
    ylabel: &str,
    logy: bool,
) -> Result<PathBuf, ScenarioError> {
    let path = dir.join(format!("plot_{stem}.py"));
    let mut s = String::new();
    let _ = writeln!(s, "#!/usr/bin/env python3");
    let _ = writeln!(s, "import csv, os");
    let _ = writeln!(s, "import matplotlib");
    let _ = writeln!(s, "matplotlib.use(\"Agg\")");
    let _ = writeln!(s, "import matplotlib.pyplot as plt");
    let _ = writeln!(s);
    let _ = writeln!(s, "here = os.path.dirname(os.path.abspath(__file__))");
    let _ = writeln!(s, "with open(os.path.join(here, \"{csv_name}\")) as f:");
    let _ = writeln!(s, "    rows = list(csv.reader(f))");
    let _ = writeln!(s, "names = rows[0]");
    let _ = writeln!(s, "data = [[float(v) for v in r] for r in rows[1:]]");
    let _ = writeln!(s, "cols = list(zip(*data))");
    let _ = writeln!(s, "for name, col in zip(names[1:], cols[1:]):");
    let _ = writeln!(s, "    plt.plot(cols[0], col, label=name)");
    if logy {
        let _ = writeln!(s, "plt.yscale(\"log\")");
    }
    let _ = writeln!(s, "plt.xlabel(names[0])");
    let _ = writeln!(s, "plt.ylabel(\"{ylabel}\")");
    let _ = writeln!(s, "plt.legend()");
    let _ = writeln!(s, "plt.tight_layout()");
    let _ = writeln!(s, "plt.savefig(os.path.join(here, \"{stem}.png\"), dpi=160)");
    write_text(&path, &s)?;
    Ok(path)
}
