//! Translates a geometry section into a meshed medium with atom placements.

use crate::fem::{build_mesh, MediumProfile, Mesh1D, Pml, Resolution, Wall};

use super::config::{GeometryKind, ScenarioConfig};
use super::ScenarioError;

/// Meshed environment with atoms snapped onto mesh nodes.
#[derive(Debug, Clone)]
pub struct Scene {
    pub mesh: Mesh1D,
    pub medium: MediumProfile,
    /// Snapped atom coordinates, one per atom, in mesh order of the config.
    pub atom_positions: Vec<f64>,
    pub atom_nodes: Vec<usize>,
    /// Transition wavelength 2 pi / omega_a used as the length unit.
    pub lambda: f64,
}

fn pml(thickness: f64) -> Pml {
    Pml {
        thickness,
        order: 3,
        target_reflection: 1e-6,
    }
}

fn cavity_walls(center: f64, len: f64, thickness: f64, sigma: f64) -> [Wall; 2] {
    [
        Wall {
            x0: center - 0.5 * len - thickness,
            x1: center - 0.5 * len,
            sigma,
        },
        Wall {
            x0: center + 0.5 * len,
            x1: center + 0.5 * len + thickness,
            sigma,
        },
    ]
}

/// Nominal (pre-snap) atom coordinates for a configuration.
pub fn requested_atom_positions(config: &ScenarioConfig) -> Vec<f64> {
    let lambda = 2.0 * std::f64::consts::PI / config.atoms.omega;
    let n = config.atoms.count;
    match config.geometry.kind {
        GeometryKind::PecMirror => vec![config.atoms.offset_lam * lambda],
        GeometryKind::LossyCavity => vec![0.0],
        GeometryKind::DoubleCavity => {
            let half = 0.5 * config.atoms.spacing_lam * lambda;
            vec![-half, half]
        }
        GeometryKind::FreeSpace => {
            let pitch = config.atoms.spacing_lam * lambda;
            let span = pitch * (n as f64 - 1.0);
            (0..n).map(|j| -0.5 * span + pitch * j as f64).collect()
        }
    }
}

/// Builds the medium, meshes it, and snaps atoms to their nearest nodes.
///
/// Snapping keeps couplings exactly nodal; the displacement is bounded by
/// half an element, so presets pick mesh densities where that is negligible.
pub fn build_scene(config: &ScenarioConfig) -> Result<Scene, ScenarioError> {
    let lambda = 2.0 * std::f64::consts::PI / config.atoms.omega;
    let g = &config.geometry;
    let sigma = g.sigma;
    let pad = g.padding_lam * lambda;
    let cavity_len = g.cavity_len_lam * lambda;
    let wall_thickness = g.wall_thickness_lam * lambda;
    let pml_thickness = g.pml_lam * lambda;

    let requested = requested_atom_positions(config);
    let mut medium = MediumProfile {
        pml_left: Some(pml(pml_thickness)),
        pml_right: Some(pml(pml_thickness)),
        ..MediumProfile::default()
    };

    let interior = match g.kind {
        GeometryKind::FreeSpace => {
            let span = requested.last().unwrap() - requested.first().unwrap();
            0.5 * span + pad
        }
        GeometryKind::PecMirror => {
            medium.pec_planes.push(0.0);
            pad
        }
        GeometryKind::LossyCavity => {
            if sigma > 0.0 {
                medium
                    .walls
                    .extend(cavity_walls(0.0, cavity_len, wall_thickness, sigma));
                0.5 * cavity_len + wall_thickness + pad
            } else {
                // The sigma -> 0 limit degenerates to open vacuum.
                pad
            }
        }
        GeometryKind::DoubleCavity => {
            let half = 0.5 * config.atoms.spacing_lam * lambda;
            medium
                .walls
                .extend(cavity_walls(-half, cavity_len, wall_thickness, sigma));
            medium
                .walls
                .extend(cavity_walls(half, cavity_len, wall_thickness, sigma));
            half + 0.5 * cavity_len + wall_thickness + pad
        }
    };

    let domain = (-interior - pml_thickness, interior + pml_thickness);
    let (band_lo, band_hi) = config.band.bounds();
    if band_lo <= 0.0 {
        return Err(ScenarioError::Config(format!(
            "band lower edge {band_lo} must be positive"
        )));
    }
    let mut resolution = Resolution::new(lambda, band_hi);
    resolution.points_per_wavelength = g.points_per_wavelength;
    let mesh = build_mesh(domain, &medium, &resolution)?;

    let mut atom_nodes = Vec::with_capacity(requested.len());
    let mut atom_positions = Vec::with_capacity(requested.len());
    for &x in &requested {
        let node = mesh.nearest_node(x);
        let snapped = mesh.nodes()[node];
        if atom_nodes.contains(&node) {
            return Err(ScenarioError::Config(format!(
                "two atoms snap to the same mesh node near x = {snapped:.6}; \
                 raise geometry.points_per_wavelength"
            )));
        }
        if mesh.pec_nodes().contains(&node) {
            return Err(ScenarioError::Config(format!(
                "atom at x = {snapped:.6} coincides with a perfect-conductor plane"
            )));
        }
        if medium.sigma_at(snapped) > 0.0 {
            return Err(ScenarioError::Config(format!(
                "atom at x = {snapped:.6} lies inside a conductive wall"
            )));
        }
        if snapped <= domain.0 + pml_thickness || snapped >= domain.1 - pml_thickness {
            return Err(ScenarioError::Config(format!(
                "atom at x = {snapped:.6} lies inside the absorbing layer"
            )));
        }
        atom_nodes.push(node);
        atom_positions.push(snapped);
    }

    Ok(Scene {
        mesh,
        medium,
        atom_positions,
        atom_nodes,
        lambda,
    })
}
