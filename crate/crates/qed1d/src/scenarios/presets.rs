//! Built-in scenario presets.
//!
//! Each preset pins a geometry, a frequency band, and propagation settings
//! sized for a single-core run. Parameters follow the conventions of the
//! rest of the crate: natural units, lengths in transition wavelengths.

use super::config::{
    GeometryKind, InitialKind, ScenarioConfig, Scheme, Variant,
};
use super::ScenarioError;

/// Names accepted by [`preset`].
pub fn preset_names() -> &'static [&'static str] {
    &[
        "free-space",
        "pec-mirror",
        "lossy-cavity",
        "superradiance",
        "esd-free-space",
        "esd-lossy-cavity",
    ]
}

/// Returns the named baseline configuration.
///
/// All presets share the transition frequency omega_a = 50 so that one
/// wavelength is 2 pi / 50, and every geometry length is chosen to land on
/// the default lambda/40 vacuum grid exactly.
pub fn preset(name: &str) -> Result<ScenarioConfig, ScenarioError> {
    let mut c = ScenarioConfig::default();
    c.name = name.to_string();
    match name {
        // Single atom radiating into open vacuum. Exponential decay at
        // gamma = d^2 * omega_a serves as the reference rate for the
        // mirror and superradiance runs.
        "free-space" => {
            c.variant = Variant::Ba;
            c.geometry.kind = GeometryKind::FreeSpace;
            c.geometry.padding_lam = 2.5;
            c.atoms.count = 1;
            c.atoms.dipole = 0.075;
            c.band.fractional_width = 0.2;
            c.refinement.budget = 48;
            c.basis.max_quanta = 1;
            c.propagation.dt = 5e-4;
            c.propagation.t_final = 12.0;
            c.propagation.record_stride = 20;
            c.initial.kind = InitialKind::Excited;
        }
        // Single atom at a tunable distance from a perfect mirror. The
        // default offset 1.25 lambda sits on an antinode, doubling the
        // free-space rate; sweeping the offset traces the standing-wave
        // modulation. Wide padding delays the absorber echo well past
        // the recorded window.
        "pec-mirror" => {
            c.variant = Variant::Bama;
            c.geometry.kind = GeometryKind::PecMirror;
            c.geometry.padding_lam = 25.0;
            c.atoms.count = 1;
            c.atoms.dipole = 0.1;
            c.atoms.offset_lam = 1.25;
            c.band.fractional_width = 0.2;
            c.refinement.budget = 64;
            c.basis.max_quanta = 1;
            c.propagation.dt = 5e-4;
            c.propagation.t_final = 8.0;
            c.propagation.record_stride = 20;
            c.initial.kind = InitialKind::Excited;
        }
        // Atom centered in a half-wavelength cavity bounded by thin
        // conductive walls. At the default conductivity the cavity is deep
        // in the strong-coupling regime; lowering sigma through the sweep
        // range walks the dynamics into overdamped spontaneous emission.
        "lossy-cavity" => {
            c.variant = Variant::Bama;
            c.geometry.kind = GeometryKind::LossyCavity;
            c.geometry.padding_lam = 1.0;
            c.geometry.cavity_len_lam = 0.5;
            c.geometry.wall_thickness_lam = 1e-4;
            c.geometry.sigma = 1e11;
            // Dense vacuum grid: the grid dispersion shift of the cavity
            // line must stay well under the linewidth tolerances.
            c.geometry.points_per_wavelength = 80.0;
            c.atoms.count = 1;
            c.atoms.dipole = 0.075;
            c.band.fractional_width = 0.2;
            c.refinement.budget = 128;
            c.basis.max_quanta = 1;
            c.propagation.dt = 5e-4;
            // Six vacuum Rabi periods at g = d sqrt(omega_a / L_cav).
            c.propagation.t_final = 8.9098;
            c.propagation.record_stride = 20;
            c.initial.kind = InitialKind::Excited;
        }
        // Ten atoms packed well inside a wavelength, started in the
        // symmetric one-excitation state. The collective emission rate
        // scales with the atom number; the band is widened so the
        // accelerated decay stays inside the resolved spectrum.
        "superradiance" => {
            c.variant = Variant::Ba;
            c.geometry.kind = GeometryKind::FreeSpace;
            c.geometry.padding_lam = 2.5;
            c.geometry.points_per_wavelength = 200.0;
            c.atoms.count = 10;
            c.atoms.dipole = 0.1;
            c.atoms.spacing_lam = 0.01;
            c.band.fractional_width = 1.0;
            c.refinement.budget = 48;
            c.basis.max_quanta = 1;
            c.propagation.dt = 2.5e-4;
            c.propagation.t_final = 1.5;
            c.propagation.record_stride = 10;
            c.initial.kind = InitialKind::Dicke;
        }
        // Two atoms one wavelength apart in open space, prepared in a
        // mixed state whose entanglement dies at a finite time under
        // purely local-looking decay.
        "esd-free-space" => {
            c.variant = Variant::Bama;
            c.geometry.kind = GeometryKind::FreeSpace;
            c.geometry.padding_lam = 2.5;
            c.atoms.count = 2;
            c.atoms.dipole = 0.075;
            c.atoms.spacing_lam = 1.0;
            c.band.fractional_width = 0.1;
            c.refinement.budget = 32;
            c.basis.max_quanta = 2;
            c.propagation.dt = 1e-3;
            // Five Rabi periods of the matching cavity run, for overlay.
            c.propagation.t_final = 7.4248;
            c.propagation.record_stride = 10;
            c.initial.kind = InitialKind::EsdMixture;
            c.initial.a = 0.2;
        }
        // The same mixed state with each atom in its own moderately lossy
        // cavity. Photon exchange with the cavities revives the
        // entanglement after each death.
        "esd-lossy-cavity" => {
            c.variant = Variant::Bama;
            c.geometry.kind = GeometryKind::DoubleCavity;
            c.geometry.padding_lam = 1.0;
            c.geometry.cavity_len_lam = 0.5;
            c.geometry.wall_thickness_lam = 1e-4;
            c.geometry.sigma = 4.943e6;
            c.atoms.count = 2;
            c.atoms.dipole = 0.075;
            c.atoms.spacing_lam = 1.0;
            c.band.fractional_width = 0.1;
            c.refinement.budget = 32;
            c.basis.max_quanta = 2;
            c.propagation.dt = 1e-3;
            // Four Rabi periods: enough for two death-revival cycles.
            c.propagation.t_final = 5.9399;
            c.propagation.record_stride = 10;
            c.initial.kind = InitialKind::EsdMixture;
            c.initial.a = 0.2;
        }
        other => {
            return Err(ScenarioError::Config(format!(
                "unknown preset '{other}'; expected one of {}",
                preset_names().join(", ")
            )));
        }
    }
    c.propagation.scheme = Scheme::Cn;
    c.validate()?;
    Ok(c)
}
