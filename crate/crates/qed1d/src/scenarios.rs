//! End-to-end simulation runs: configuration, geometry, the extraction and
//! propagation pipeline, artifact emission, and the mode cache.
//!
//! A run proceeds through fixed stages: mesh the geometry, scan the band,
//! build the adaptive frequency grid, extract the selected mode families,
//! coarse-grain, compress degeneracies, prune by coupling coverage, assemble
//! the quanta basis and Hamiltonian, propagate, and emit observables. Any
//! failure aborts with the offending stage named in the error.

mod cache;
pub mod config;
pub mod geometry;
pub mod outputs;
pub mod pipeline;
mod presets;

use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::fem::FemError;
use crate::modes::{ModesError, SpectralResponse};
use crate::observables::ObsError;
use crate::quanta::{coupling_strengths, enumerate_basis, QuantaError};

pub use config::{
    GeometryKind, InitialKind, ScenarioConfig, Scheme, Variant,
};
pub use geometry::{build_scene, Scene};
pub use pipeline::{
    compress_degeneracies, extract_modes, initial_mixture, propagate_and_record,
    prune_by_coverage, scan_band, RunSeries,
};
pub use presets::{preset, preset_names};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Modes(#[from] ModesError),
    #[error(transparent)]
    Quanta(#[from] QuantaError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Observables(#[from] ObsError),
    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        source: Box<ScenarioError>,
    },
}

impl ScenarioError {
    /// Name of the pipeline stage that failed, if the error carries one.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            ScenarioError::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}

/// Where a run reads its cache and writes its artifacts.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Artifact directory; nothing is written when absent.
    pub out_dir: Option<PathBuf>,
    /// Mode cache directory; extraction is skipped on a hit.
    pub cache_dir: Option<PathBuf>,
}

/// Machine-readable summary of one completed run.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub name: String,
    pub variant: String,
    /// Hash of the full configuration.
    pub config_hash: String,
    /// Hash of the mode-determining configuration subset.
    pub cache_key: String,
    pub cache_hit: bool,
    pub n_frequencies: usize,
    /// Modes extracted before compression and pruning.
    pub n_modes_raw: usize,
    /// Modes entering the quantum model.
    pub n_modes: usize,
    pub block_dims: Vec<usize>,
    pub n_steps: usize,
    /// Worst mixture-member norm drift over the whole propagation.
    pub norm_drift: f64,
    pub wall_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_warning: Option<String>,
    /// Scan peak location, when the band contains a clear resonance.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_c: Option<f64>,
    /// Cavity field decay rate: half the full width at half maximum of the
    /// squared scan amplitude.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// First-atom decay rate from the 1/e lifetime.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_lifetime: Option<f64>,
    /// First-atom decay rate from log-linear regression.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_regression: Option<f64>,
    /// Oscillation visibility of the first atom's population.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub visibility: Option<f64>,
    /// First time the concurrence reaches zero.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_concurrence_zero: Option<f64>,
    /// Peak concurrence of each post-death revival.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub rebirth_peaks: Vec<f64>,
    /// Artifacts written, relative to the output directory.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub outputs: Vec<String>,
}

/// Everything a caller needs from a completed run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: ScenarioConfig,
    pub record: RunRecord,
    pub series: RunSeries,
    pub scan: SpectralResponse,
    /// Frequencies of the modes entering the quantum model.
    pub mode_omegas: Vec<f64>,
}

fn stage_err<E: Into<ScenarioError>>(stage: &'static str, e: E) -> ScenarioError {
    ScenarioError::Stage {
        stage,
        source: Box::new(e.into()),
    }
}

/// Execute a configured run end to end.
///
/// The same configuration always produces bit-identical series and CSV
/// artifacts, with or without a warm cache.
pub fn run(config: &ScenarioConfig, options: &RunOptions) -> Result<RunResult, ScenarioError> {
    let started = Instant::now();
    config.validate()?;
    if !config.outputs.field_times.is_empty() && config.basis.max_quanta != 1 {
        return Err(ScenarioError::Config(
            "field profiles are defined for single-quanta runs only".into(),
        ));
    }

    let scene = build_scene(config)?;
    let (grid, scan) = scan_band(&scene, config)?;

    // Mode set: cache hit or extract-compress-prune.
    let cache_key = config.mode_cache_key();
    let cache_file = options
        .cache_dir
        .as_ref()
        .map(|d| cache::cache_path(d, cache_key));
    let mut cache_hit = false;
    let mut cached = None;
    if let Some(path) = &cache_file {
        cached = cache::load_modes(path, scene.mesh.n_nodes())?;
    }
    let (modes, n_modes_raw) = match cached {
        Some((modes, n_raw)) => {
            cache_hit = true;
            (modes, n_raw)
        }
        None => {
            let raw = extract_modes(&scene, config, &grid)?;
            let n_raw = raw.len();
            let compressed = if config.modes.compress {
                compress_degeneracies(raw, &scene, config.atoms.dipole)
            } else {
                raw
            };
            let kept = prune_by_coverage(
                compressed,
                &scene,
                config.atoms.dipole,
                config.modes.coverage,
            )?;
            if let Some(path) = &cache_file {
                cache::save_modes(path, scene.mesh.n_nodes(), n_raw, &kept)?;
            }
            (kept, n_raw)
        }
    };
    if modes.is_empty() {
        return Err(stage_err(
            "pruning",
            ScenarioError::Config("no modes survived compression and pruning".into()),
        ));
    }

    // Quantum model.
    let basis = enumerate_basis(config.atoms.count, modes.len(), config.basis.max_quanta)
        .map_err(|e| stage_err("basis", e))?;
    let gamma = coupling_strengths(&modes, &scene.mesh, &scene.atom_positions, config.atoms.dipole)
        .map_err(|e| stage_err("couplings", e))?;
    let mode_omegas: Vec<f64> = modes.iter().map(|m| m.omega).collect();
    let h = crate::quanta::assemble_hamiltonian(&basis, config.atoms.omega, &mode_omegas, &gamma);
    let mix = initial_mixture(&basis, config.initial.kind, config.initial.a)?;

    // Optional field snapshots along the way.
    let out_dir = options.out_dir.clone();
    if let Some(dir) = &out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut field_outputs: Vec<String> = Vec::new();
    let mut field_targets: Vec<f64> = config.outputs.field_times.clone();
    field_targets.sort_by(f64::total_cmp);
    let record_dt = config.propagation.dt * config.propagation.record_stride as f64;
    // Sample the physical window only; the stretched PML field is not meaningful.
    let lo_phys = scene.mesh.lo()
        + scene.medium.pml_left.as_ref().map_or(0.0, |p| p.thickness);
    let hi_phys = scene.mesh.hi()
        - scene.medium.pml_right.as_ref().map_or(0.0, |p| p.thickness);
    let sample_xs: Vec<f64> = scene
        .mesh
        .nodes()
        .iter()
        .copied()
        .filter(|&x| x >= lo_phys - 1e-12 && x <= hi_phys + 1e-12)
        .collect();
    let mut hook = |t: f64, mix: &crate::dynamics::Mixture| -> Result<(), ScenarioError> {
        let due = field_targets
            .iter()
            .any(|&target| (t - target).abs() <= 0.5 * record_dt);
        if !due {
            return Ok(());
        }
        let Some(dir) = &out_dir else {
            return Ok(());
        };
        debug_assert_eq!(mix.len(), 1, "field output requires a pure state");
        let field = crate::observables::one_photon_field(
            &basis, &mix[0].1, &modes, &scene.mesh, &sample_xs,
        )
        .map_err(|e| stage_err("observables", e))?;
        let path = outputs::write_field_csv(dir, t, &sample_xs, &field)?;
        field_outputs.push(file_name(&path));
        Ok(())
    };

    let (series, norm_drift) = if field_targets.is_empty() {
        propagate_and_record(&h, &basis, config, mix, None)?
    } else {
        propagate_and_record(&h, &basis, config, mix, Some(&mut hook))?
    };

    // Post-run analysis for the summary.
    let stats = scan.peak_stats().ok();
    let single_quanta = config.basis.max_quanta == 1;
    let p0 = &series.populations[0];
    let gamma_lifetime = if single_quanta {
        crate::observables::fit_decay(&series.t, p0).ok().map(|f| f.gamma)
    } else {
        None
    };
    let gamma_regression = if single_quanta {
        crate::observables::fit_decay_regression(&series.t, p0, 1e-12)
            .ok()
            .map(|f| f.gamma)
    } else {
        None
    };
    let visibility = single_quanta.then(|| crate::observables::visibility(p0));
    let (first_zero, rebirth_peaks) = match &series.concurrence {
        Some(c) => {
            let ev = crate::observables::concurrence_events(&series.t, c, 1e-12);
            (ev.first_zero, ev.rebirth_peaks)
        }
        None => (None, Vec::new()),
    };

    let n_steps = (config.propagation.t_final / config.propagation.dt)
        .round()
        .max(1.0) as usize;
    let mut record = RunRecord {
        name: config.name.clone(),
        variant: config.variant.as_str().to_string(),
        config_hash: format!("{:016x}", config.config_hash()),
        cache_key: format!("{cache_key:016x}"),
        cache_hit,
        n_frequencies: grid.omegas.len(),
        n_modes_raw,
        n_modes: modes.len(),
        block_dims: basis.block_dims(),
        n_steps,
        norm_drift,
        wall_ms: 0,
        grid_warning: grid.warning.clone(),
        omega_c: stats.map(|s| s.omega_c),
        kappa: stats.map(|s| 0.5 * s.fwhm),
        gamma_lifetime,
        gamma_regression,
        visibility,
        first_concurrence_zero: first_zero,
        rebirth_peaks,
        outputs: Vec::new(),
    };

    // Artifacts.
    if let Some(dir) = &out_dir {
        let mut written: Vec<String> = Vec::new();
        let p = outputs::write_population_csv(dir, &series)?;
        written.push(file_name(&p));
        if let Some(p) = outputs::write_concurrence_csv(dir, &series)? {
            written.push(file_name(&p));
        }
        let p = outputs::write_scan_csv(dir, &scan)?;
        written.push(file_name(&p));
        written.extend(field_outputs);
        if config.outputs.emit_plots {
            let p =
                outputs::write_plot_script(dir, "populations", "populations.csv", "population", false)?;
            written.push(file_name(&p));
            if series.concurrence.is_some() {
                let p = outputs::write_plot_script(
                    dir,
                    "concurrence",
                    "concurrence.csv",
                    "concurrence",
                    false,
                )?;
                written.push(file_name(&p));
            }
            let p = outputs::write_plot_script(dir, "scan", "scan.csv", "|A|", true)?;
            written.push(file_name(&p));
        }
        record.outputs = written;
        record.wall_ms = started.elapsed().as_millis() as u64;
        let p = outputs::write_summary(dir, &record)?;
        record.outputs.push(file_name(&p));
    } else {
        record.wall_ms = started.elapsed().as_millis() as u64;
    }

    Ok(RunResult {
        config: config.clone(),
        record,
        series,
        scan,
        mode_omegas,
    })
}

fn file_name(p: &std::path::Path) -> String {
    p.file_name().unwrap_or_default().to_string_lossy().into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_errors_carry_their_stage_name() {
        let mut config = ScenarioConfig::default();
        // A band this narrow cannot host the default budget's initial grid,
        // which surfaces as a band-scan failure.
        config.refinement.budget = 8;
        let err = run(&config, &RunOptions::default()).unwrap_err();
        assert_eq!(err.stage(), Some("band-scan"));
    }
}
