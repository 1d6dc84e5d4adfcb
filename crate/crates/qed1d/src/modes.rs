//! Numerically exact continuum modes of an open, lossy 1D environment.
//!
//! Two families together carry the field fluctuations seen by embedded
//! emitters:
//!
//! * boundary-assisted (BA) modes: plane waves incident from either end of
//!   the domain, scattered by walls and perfect conductors. One mode per
//!   frequency and incidence direction.
//! * medium-assisted (MA) modes: fields radiated by noise point sources
//!   placed on every mesh node inside a lossy wall, with amplitude
//!   proportional to sqrt(Im chi). One mode per frequency and source node.
//!
//! Raw mode fields are continuum-normalized densities; [`coarse_grain`]
//! attaches a quadrature volume D (frequency bin width, times source cell
//! length for MA modes) and rescales fields by sqrt(D), turning integrals
//! over the continuum into discrete sums.

use crate::fem::{
    assemble_system, evaluate_field, BandedComplexSystem, BandedLu, FemError, MediumProfile,
    Mesh1D, Region,
};
use crate::C64;

const SQRT_2PI: f64 = 2.5066282746310002;

#[derive(Debug, thiserror::Error)]
pub enum ModesError {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error("MA source node {node} at x = {x} is not inside a lossy wall")]
    SourceNotInWall { node: usize, x: f64 },
    #[error("spectral peak sits on the band edge; center/width statistics unreliable")]
    PeakOnBandEdge,
    #[error("spectral response needs at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("frequency budget {0} is too small (minimum 16)")]
    BudgetTooSmall(usize),
    #[error("frequency band [{lo}, {hi}] is invalid")]
    BadBand { lo: f64, hi: f64 },
    #[error("mode set is empty after filtering")]
    EmptyModeSet,
}

/// Incidence direction of a boundary-assisted mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Plane wave travelling toward +x (incident from the left end).
    Plus,
    /// Plane wave travelling toward -x (incident from the right end).
    Minus,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Plus => 1.0,
            Direction::Minus => -1.0,
        }
    }
}

/// Degeneracy label distinguishing modes that share a frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DegeneracyLabel {
    Ba { direction: Direction },
    /// Noise point source at mesh node `node` (position `x_source`).
    Ma { x_source: f64, node: usize },
}

impl DegeneracyLabel {
    pub fn kind(&self) -> &'static str {
        match self {
            DegeneracyLabel::Ba { .. } => "ba",
            DegeneracyLabel::Ma { .. } => "ma",
        }
    }
}

/// One extracted mode: nodal field samples at a single frequency.
///
/// `volume` is None for raw (continuum-density) modes and holds the
/// quadrature weight D after coarse graining, at which point `field` has
/// absorbed a factor sqrt(D).
#[derive(Debug, Clone)]
pub struct DiscreteMode {
    pub omega: f64,
    pub label: DegeneracyLabel,
    pub field: Vec<C64>,
    pub volume: Option<f64>,
}

impl DiscreteMode {
    /// Interpolated (possibly coarse-grained) field at a point.
    pub fn field_at(&self, mesh: &Mesh1D, x: f64) -> Result<C64, FemError> {
        evaluate_field(mesh, &self.field, x)
    }
}

/// Exact traveling-wave solution of the uniform consistent-mass stencil:
/// the wavenumber kappa and the nodal amplitude of the response to a unit
/// nodal load, u_j = amp * exp(i kappa h |j|). Both reduce to the continuum
/// values k = omega and i / (2 k) as h -> 0.
fn discrete_free_wave(omega: f64, h: f64) -> (f64, C64) {
    let w2h2 = omega * omega * h * h;
    let cos_kh = (1.0 - w2h2 / 3.0) / (1.0 + w2h2 / 6.0);
    // Past two points per wavelength the stencil carries no traveling wave.
    assert!(cos_kh.abs() < 1.0, "spacing {h} cannot resolve omega {omega}");
    let kappa = cos_kh.acos() / h;
    let a = C64::new(0.0, kappa * h).exp();
    let denom = (C64::new(1.0, 0.0) - a) * (2.0 / h) - (a + 2.0) * (omega * omega * h / 3.0);
    (kappa, denom.inv())
}

/// Node a few elements inside the pad next to the end the wave comes from.
fn launch_node(mesh: &Mesh1D, direction: Direction) -> usize {
    let regions = mesh.regions();
    let n_el = mesh.n_elements();
    // Clear of the absorbing layer so the rows around the load carry only
    // unstretched coefficients.
    const MARGIN: usize = 4;
    match direction {
        Direction::Plus => {
            let e0 = (0..n_el)
                .find(|&e| regions[e] != Region::PmlLeft)
                .expect("mesh has interior elements");
            e0 + MARGIN
        }
        Direction::Minus => {
            let e1 = (0..n_el)
                .rev()
                .find(|&e| regions[e] != Region::PmlRight)
                .expect("mesh has interior elements");
            e1 + 1 - MARGIN
        }
    }
}

/// Solve one boundary-assisted mode, reusing an assembled and factored
/// system at the same frequency.
///
/// The scattering state is launched by a unit nodal load placed in the
/// vacuum pad on the incidence side, so the solve returns the exact
/// response of the discrete operator with no background-field cancellation
/// error anywhere, including deep inside opaque walls. Dividing by the
/// closed-form load response of the uniform stencil normalizes the incident
/// wave to unit amplitude; the returned samples are that state times the
/// flux prefactor (i / sqrt(2 pi)) sqrt(omega / 2).
///
/// Samples between the launch node and its absorbing layer hold only the
/// outbound half of the load response and carry no physical meaning;
/// emitters and probes must sit on the structure side.
pub fn solve_ba_mode_with(
    mesh: &Mesh1D,
    sys: &BandedComplexSystem,
    lu: &BandedLu,
    direction: Direction,
) -> Result<DiscreteMode, ModesError> {
    let omega = sys.omega;
    let n = mesh.n_nodes();
    let src = launch_node(mesh, direction);
    let xs = mesh.nodes()[src];
    let h = mesh.nodes()[src + 1] - xs;
    // The closed-form response assumes locally uniform vacuum around the
    // load; pads are meshed that way.
    for e in src.saturating_sub(2)..(src + 2).min(mesh.n_elements()) {
        assert_eq!(mesh.regions()[e], Region::Vacuum, "launch element {e} is not vacuum");
        let he = mesh.nodes()[e + 1] - mesh.nodes()[e];
        assert!((he - h).abs() <= 1e-9 * h, "nonuniform spacing at the launch node");
    }
    let (kappa, amp) = discrete_free_wave(omega, h);

    let mut rhs = vec![C64::new(0.0, 0.0); n];
    rhs[src] = C64::new(1.0, 0.0);
    let u = sys.solve_factored(lu, &rhs)?;

    let k = direction.sign() * kappa;
    let pref = C64::new(0.0, 1.0) / SQRT_2PI * (omega / 2.0).sqrt();
    // Unit incident amplitude, with the phase referenced to x = 0 as an
    // analytic plane wave would be.
    let scale = pref * C64::new(0.0, k * xs).exp() / amp;
    let field = u.iter().map(|&ui| scale * ui).collect();
    Ok(DiscreteMode {
        omega,
        label: DegeneracyLabel::Ba { direction },
        field,
        volume: None,
    })
}

/// Assemble, factor, and solve one boundary-assisted mode.
pub fn solve_ba_mode(
    mesh: &Mesh1D,
    medium: &MediumProfile,
    omega: f64,
    direction: Direction,
) -> Result<DiscreteMode, ModesError> {
    let sys = assemble_system(mesh, medium, omega)?;
    let lu = sys.factor()?;
    solve_ba_mode_with(mesh, &sys, &lu, direction)
}

/// Solve one medium-assisted mode: the field of a noise point source at a
/// wall node, scaled by i omega^2 sqrt(Im chi / pi).
///
/// The Green column G(., x_source) is obtained from a unit nodal load (the
/// hat-function test of a delta source). `source_node` must lie inside or on
/// the boundary of a lossy wall.
pub fn solve_ma_mode_with(
    mesh: &Mesh1D,
    medium: &MediumProfile,
    sys: &BandedComplexSystem,
    lu: &BandedLu,
    source_node: usize,
) -> Result<DiscreteMode, ModesError> {
    let omega = sys.omega;
    let x_source = mesh.nodes()[source_node];
    let chi_i = medium.chi_imag(x_source, omega);
    if chi_i <= 0.0 {
        return Err(ModesError::SourceNotInWall {
            node: source_node,
            x: x_source,
        });
    }
    let mut rhs = vec![C64::new(0.0, 0.0); mesh.n_nodes()];
    rhs[source_node] = C64::new(1.0, 0.0);
    sys.zero_pec_rows(&mut rhs);
    let green = sys.solve_factored(lu, &rhs)?;
    let pref = C64::new(0.0, omega * omega) * (chi_i / std::f64::consts::PI).sqrt();
    Ok(DiscreteMode {
        omega,
        label: DegeneracyLabel::Ma {
            x_source,
            node: source_node,
        },
        field: green.into_iter().map(|g| pref * g).collect(),
        volume: None,
    })
}

/// Assemble, factor, and solve one medium-assisted mode.
pub fn solve_ma_mode(
    mesh: &Mesh1D,
    medium: &MediumProfile,
    omega: f64,
    source_node: usize,
) -> Result<DiscreteMode, ModesError> {
    let sys = assemble_system(mesh, medium, omega)?;
    let lu = sys.factor()?;
    solve_ma_mode_with(mesh, medium, &sys, &lu, source_node)
}

/// Noise source site inside a wall: mesh node, Voronoi cell length clipped
/// to the wall, and the wall conductivity.
#[derive(Debug, Clone, Copy)]
pub struct SourceNode {
    pub node: usize,
    pub x: f64,
    /// Source quadrature cell: half the adjacent element lengths, clipped to
    /// the wall. Cells of one wall sum exactly to the wall thickness.
    pub dx: f64,
    pub sigma: f64,
}

/// Enumerate MA source sites: every mesh node lying inside or on the
/// boundary of a lossy wall, with its clipped Voronoi cell length.
pub fn wall_source_nodes(mesh: &Mesh1D, medium: &MediumProfile) -> Vec<SourceNode> {
    let nodes = mesh.nodes();
    let tol = 1e-12 * (mesh.hi() - mesh.lo()).max(1.0);
    let mut out = Vec::new();
    for (i, &x) in nodes.iter().enumerate() {
        for w in &medium.walls {
            if x >= w.x0 - tol && x <= w.x1 + tol {
                let cell_lo = if i == 0 { nodes[0] } else { 0.5 * (nodes[i - 1] + x) };
                let cell_hi = if i + 1 == nodes.len() {
                    x
                } else {
                    0.5 * (x + nodes[i + 1])
                };
                let dx = (cell_hi.min(w.x1) - cell_lo.max(w.x0)).max(0.0);
                if dx > 0.0 {
                    out.push(SourceNode {
                        node: i,
                        x,
                        dx,
                        sigma: w.sigma,
                    });
                }
                break;
            }
        }
    }
    out
}

/// Complex response of the environment at a probe node as a function of
/// frequency: the field at the probe of a unit point load at the probe.
#[derive(Debug, Clone)]
pub struct SpectralResponse {
    pub omegas: Vec<f64>,
    pub amplitudes: Vec<C64>,
}

/// Peak statistics of a spectral response magnitude.
#[derive(Debug, Clone, Copy)]
pub struct SpectralStats {
    /// Frequency of the sampled |A| maximum.
    pub omega_c: f64,
    /// Full width at half maximum of |A|^2, by linear interpolation.
    pub fwhm: f64,
}

impl SpectralResponse {
    /// Locate the |A|^2 peak and its full width at half maximum.
    /// Errors if the peak sits on the band edge (stats unreliable) or either
    /// half-maximum crossing lies outside the sampled band.
    pub fn peak_stats(&self) -> Result<SpectralStats, ModesError> {
        let n = self.omegas.len();
        if n < 3 {
            return Err(ModesError::TooFewSamples(n));
        }
        let mag2: Vec<f64> = self.amplitudes.iter().map(|a| a.norm_sqr()).collect();
        let (imax, &peak) = mag2
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        if imax == 0 || imax == n - 1 {
            return Err(ModesError::PeakOnBandEdge);
        }
        let half = 0.5 * peak;
        let interp = |i0: usize, i1: usize| {
            let (y0, y1) = (mag2[i0], mag2[i1]);
            let t = (half - y0) / (y1 - y0);
            self.omegas[i0] + t * (self.omegas[i1] - self.omegas[i0])
        };
        let mut lo = None;
        for i in (0..imax).rev() {
            if mag2[i] <= half {
                lo = Some(interp(i, i + 1));
                break;
            }
        }
        let mut hi = None;
        for i in imax + 1..n {
            if mag2[i] <= half {
                hi = Some(interp(i - 1, i));
                break;
            }
        }
        match (lo, hi) {
            (Some(l), Some(h)) => Ok(SpectralStats {
                omega_c: self.omegas[imax],
                fwhm: h - l,
            }),
            _ => Err(ModesError::PeakOnBandEdge),
        }
    }
}

/// Scan the spectral response at a probe node over a list of frequencies.
pub fn spectral_response(
    mesh: &Mesh1D,
    medium: &MediumProfile,
    omegas: &[f64],
    probe_node: usize,
) -> Result<SpectralResponse, ModesError> {
    let mut amplitudes = Vec::with_capacity(omegas.len());
    for &omega in omegas {
        let sys = assemble_system(mesh, medium, omega)?;
        let mut rhs = vec![C64::new(0.0, 0.0); mesh.n_nodes()];
        rhs[probe_node] = C64::new(1.0, 0.0);
        sys.zero_pec_rows(&mut rhs);
        let x = sys.solve(&rhs)?;
        amplitudes.push(x[probe_node]);
    }
    Ok(SpectralResponse {
        omegas: omegas.to_vec(),
        amplitudes,
    })
}

/// Adaptively refined frequency grid with per-point quadrature widths.
#[derive(Debug, Clone)]
pub struct FrequencyGrid {
    pub omegas: Vec<f64>,
    /// Midpoint half-gap widths; they sum exactly to the band width.
    pub deltas: Vec<f64>,
    /// Set when the refinement budget ran out while the response was still
    /// poorly resolved.
    pub warning: Option<String>,
}

/// Greedy adaptive sampling of a frequency band.
///
/// Starting from a uniform coarse grid (32 points, fewer if the budget is
/// tighter), repeatedly bisect the interval with the largest jump in
/// |amplitude| relative to the running peak |amplitude|, until every jump is
/// below `tol` or `budget` evaluations have been spent. Widths are midpoint
/// half-gaps, with the edge points absorbing their outer half-gap so that
/// the widths telescope to exactly the band width.
pub fn adaptive_frequency_grid<F>(
    mut eval: F,
    band: (f64, f64),
    budget: usize,
    tol: f64,
) -> Result<FrequencyGrid, ModesError>
where
    F: FnMut(f64) -> Result<C64, ModesError>,
{
    let (lo, hi) = band;
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(ModesError::BadBand { lo, hi });
    }
    if budget < 16 {
        return Err(ModesError::BudgetTooSmall(budget));
    }
    // tol <= 0 disables refinement and spends the whole budget on a uniform
    // grid, so two geometries scanned over the same band share identical
    // frequency samples.
    let n0 = if tol <= 0.0 { budget } else { budget.min(32) };
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(budget); // (omega, |A|)
    for i in 0..n0 {
        let w = lo + (hi - lo) * (i as f64) / ((n0 - 1) as f64);
        pts.push((w, eval(w)?.norm()));
    }

    while pts.len() < budget {
        let peak = pts.iter().map(|p| p.1).fold(0.0f64, f64::max);
        if peak == 0.0 {
            break;
        }
        let m = pts.len() - 1;
        let raw: Vec<f64> = (0..m)
            .map(|i| (pts[i + 1].1 - pts[i].1).abs() / peak)
            .collect();
        if raw.iter().all(|&j| j <= tol) {
            break;
        }
        // Jumps alone miss a resonance dead-centered in an interval (equal
        // flank amplitudes, vanishing jump), so each interval also scores
        // the polyline bend at its endpoints: a kink in |A| means the wider
        // adjacent interval hides unresolved structure.
        let mut score = raw.clone();
        for v in 1..m {
            let hl = pts[v].0 - pts[v - 1].0;
            let hr = pts[v + 1].0 - pts[v].0;
            let sl = (pts[v].1 - pts[v - 1].1) / hl;
            let sr = (pts[v + 1].1 - pts[v].1) / hr;
            let bend = (sr - sl).abs() * hl.max(hr) / peak;
            let target = if hl >= hr { v - 1 } else { v };
            score[target] = score[target].max(bend);
        }
        let mut worst = 0;
        for (i, &s) in score.iter().enumerate().skip(1) {
            if s > score[worst] {
                worst = i;
            }
        }
        let w = 0.5 * (pts[worst].0 + pts[worst + 1].0);
        let a = eval(w)?.norm();
        pts.insert(worst + 1, (w, a));
    }

    let peak = pts.iter().map(|p| p.1).fold(0.0f64, f64::max);
    let worst_jump = pts
        .windows(2)
        .map(|w| (w[1].1 - w[0].1).abs() / peak.max(f64::MIN_POSITIVE))
        .fold(0.0f64, f64::max);
    let warning = if pts.len() >= budget && worst_jump > 10.0 * tol {
        Some(format!(
            "frequency budget {budget} exhausted with worst relative jump {worst_jump:.2e} (target {tol:.1e}); spectral features may be under-resolved"
        ))
    } else {
        None
    };

    let omegas: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let deltas = midpoint_deltas(&omegas);
    Ok(FrequencyGrid {
        omegas,
        deltas,
        warning,
    })
}

/// Midpoint half-gap quadrature widths for a sorted grid; edge points absorb
/// their outer half-gap, so the widths sum exactly to the grid span.
pub fn midpoint_deltas(omegas: &[f64]) -> Vec<f64> {
    let n = omegas.len();
    assert!(n >= 2);
    let mut deltas = vec![0.0; n];
    for i in 0..n {
        let left = if i == 0 { omegas[0] } else { 0.5 * (omegas[i - 1] + omegas[i]) };
        let right = if i + 1 == n {
            omegas[n - 1]
        } else {
            0.5 * (omegas[i] + omegas[i + 1])
        };
        deltas[i] = right - left;
    }
    deltas
}

/// Attach quadrature volumes to raw modes and absorb sqrt(D) into the
/// fields.
///
/// `grid_index[i]` maps mode i to its frequency grid point. BA modes get
/// D = delta_omega; MA modes get D = delta_omega * dx_source where
/// dx_source is the clipped Voronoi cell of the source node (looked up from
/// `sources`). Panics if an MA mode's source node is missing from `sources`.
pub fn coarse_grain(
    mut modes: Vec<DiscreteMode>,
    grid_index: &[usize],
    grid: &FrequencyGrid,
    sources: &[SourceNode],
) -> Vec<DiscreteMode> {
    assert_eq!(modes.len(), grid_index.len());
    for (m, &gi) in modes.iter_mut().zip(grid_index) {
        let d_omega = grid.deltas[gi];
        let d = match m.label {
            DegeneracyLabel::Ba { .. } => d_omega,
            DegeneracyLabel::Ma { node, .. } => {
                let src = sources
                    .iter()
                    .find(|s| s.node == node)
                    .expect("MA mode source node missing from source table");
                d_omega * src.dx
            }
        };
        assert!(d > 0.0, "quadrature volume must be positive");
        let scale = d.sqrt();
        for v in &mut m.field {
            *v *= scale;
        }
        m.volume = Some(d);
    }
    modes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{build_mesh, Pml, Resolution, Wall};

    fn lambda() -> f64 {
        2.0 * std::f64::consts::PI / 50.0
    }

    #[test]
    fn free_space_ba_mode_is_plane_wave() {
        // No walls, no PEC: on the structure side of the launch node the
        // mode is the traveling wave of the discrete stencil, with unit
        // amplitude times the flux prefactor and the dispersion-corrected
        // wavenumber.
        let lam = lambda();
        let medium = MediumProfile {
            pml_left: Some(Pml { thickness: 1.75 * lam, order: 3, target_reflection: 1e-6 }),
            pml_right: Some(Pml { thickness: 1.75 * lam, order: 3, target_reflection: 1e-6 }),
            ..Default::default()
        };
        let res = Resolution::new(lam, 55.0);
        let mesh = build_mesh((-1.75 * lam, 5.0 * lam + 1.75 * lam), &medium, &res).unwrap();
        let omega = 50.0;
        let nodes = mesh.nodes();
        let h = nodes[1] - nodes[0];
        let (kappa, _) = discrete_free_wave(omega, h);
        assert!((kappa - omega).abs() < 2e-3 * omega, "kappa {kappa}");
        let (x_lo, x_hi) = (nodes[0] + 1.75 * lam, nodes[nodes.len() - 1] - 1.75 * lam);
        for dir in [Direction::Plus, Direction::Minus] {
            let m = solve_ba_mode(&mesh, &medium, omega, dir).unwrap();
            let pref = C64::new(0.0, 1.0) / SQRT_2PI * (omega / 2.0f64).sqrt();
            let src = launch_node(&mesh, dir);
            for (i, &x) in nodes.iter().enumerate() {
                let physical_side = match dir {
                    Direction::Plus => i >= src,
                    Direction::Minus => i <= src,
                };
                if !physical_side || x < x_lo - 1e-12 || x > x_hi + 1e-12 {
                    continue;
                }
                let want = pref * C64::new(0.0, dir.sign() * kappa * x).exp();
                assert!(
                    (m.field[i] - want).norm() < 1e-5 * pref.norm(),
                    "node {i} dir {dir:?}"
                );
            }
        }
    }

    #[test]
    fn ma_mode_requires_lossy_source() {
        let lam = lambda();
        let medium = MediumProfile {
            pml_left: Some(Pml { thickness: 1.75 * lam, order: 3, target_reflection: 1e-6 }),
            pml_right: Some(Pml { thickness: 1.75 * lam, order: 3, target_reflection: 1e-6 }),
            ..Default::default()
        };
        let res = Resolution::new(lam, 55.0);
        let mesh = build_mesh((0.0, 5.0 * lam), &medium, &res).unwrap();
        let err = solve_ma_mode(&mesh, &medium, 50.0, mesh.n_nodes() / 2);
        assert!(matches!(err, Err(ModesError::SourceNotInWall { .. })));
    }

    #[test]
    fn source_cells_tile_the_wall() {
        let lam = lambda();
        let w = Wall { x0: 2.0 * lam, x1: 2.0 * lam + 1e-4 * lam, sigma: 1.0e11 };
        let medium = MediumProfile { walls: vec![w], ..Default::default() };
        let res = Resolution::new(lam, 55.0);
        let mesh = build_mesh((0.0, 4.0 * lam), &medium, &res).unwrap();
        let sources = wall_source_nodes(&mesh, &medium);
        assert!(sources.len() >= 3);
        let total: f64 = sources.iter().map(|s| s.dx).sum();
        assert!(
            (total - (w.x1 - w.x0)).abs() < 1e-12 * lam,
            "cells sum to wall thickness"
        );
        assert!(sources.iter().all(|s| s.sigma == w.sigma));
    }

    #[test]
    fn midpoint_deltas_telescope() {
        let omegas = [45.0, 45.5, 47.25, 50.0, 50.1, 55.0];
        let deltas = midpoint_deltas(&omegas);
        let sum: f64 = deltas.iter().sum();
        assert!((sum - 10.0).abs() < 1e-12);
        assert!(deltas.iter().all(|&d| d > 0.0));
    }

    #[test]
    fn adaptive_grid_resolves_lorentzian() {
        // Analytic single-pole response: refinement must cluster samples
        // inside the linewidth.
        let (w0, gamma) = (50.0, 0.05);
        let eval = |w: f64| -> Result<C64, ModesError> {
            Ok(C64::new(1.0, 0.0) / C64::new(w - w0, -0.5 * gamma))
        };
        let grid = adaptive_frequency_grid(eval, (45.0, 55.0), 256, 1e-3).unwrap();
        assert!(grid.omegas.len() <= 256);
        let sum: f64 = grid.deltas.iter().sum();
        assert!((sum - 10.0).abs() < 1e-9);
        let inside = grid
            .omegas
            .iter()
            .filter(|&&w| (w - w0).abs() < 0.5 * gamma)
            .count();
        assert!(inside >= 8, "only {inside} samples inside the FWHM");
        assert!(grid.omegas.windows(2).all(|w| w[1] > w[0]), "sorted grid");
        // Determinism: a second run reproduces the grid bit for bit.
        let grid2 = adaptive_frequency_grid(eval, (45.0, 55.0), 256, 1e-3).unwrap();
        assert_eq!(grid.omegas, grid2.omegas);
    }

    #[test]
    fn adaptive_grid_rejects_tiny_budget() {
        let eval = |_w: f64| Ok(C64::new(1.0, 0.0));
        assert!(matches!(
            adaptive_frequency_grid(eval, (45.0, 55.0), 8, 1e-3),
            Err(ModesError::BudgetTooSmall(8))
        ));
    }

    #[test]
    fn lorentzian_peak_stats_recovered() {
        let (w0, gamma) = (49.98, 0.12);
        let omegas: Vec<f64> = (0..2001).map(|i| 49.0 + 2.0 * (i as f64) / 2000.0).collect();
        let amplitudes: Vec<C64> = omegas
            .iter()
            .map(|&w| C64::new(1.0, 0.0) / C64::new(w - w0, -0.5 * gamma))
            .collect();
        let resp = SpectralResponse { omegas, amplitudes };
        let stats = resp.peak_stats().unwrap();
        assert!((stats.omega_c - w0).abs() < 1e-3);
        assert!((stats.fwhm - gamma).abs() < 1e-3 * gamma.max(1e-3));
    }

    #[test]
    fn peak_on_edge_is_flagged() {
        let omegas: Vec<f64> = (0..50).map(|i| 50.0 + 0.1 * i as f64).collect();
        let amplitudes: Vec<C64> = omegas
            .iter()
            .map(|&w| C64::new(1.0 / (1.0 + (w - 50.0)), 0.0))
            .collect();
        let resp = SpectralResponse { omegas, amplitudes };
        assert!(matches!(resp.peak_stats(), Err(ModesError::PeakOnBandEdge)));
    }

    #[test]
    fn coarse_grain_scales_by_sqrt_volume() {
        let raw = DiscreteMode {
            omega: 50.0,
            label: DegeneracyLabel::Ba { direction: Direction::Plus },
            field: vec![C64::new(2.0, -1.0); 4],
            volume: None,
        };
        let grid = FrequencyGrid {
            omegas: vec![49.0, 50.0, 51.0],
            deltas: vec![0.5, 1.0, 0.5],
            warning: None,
        };
        let out = coarse_grain(vec![raw], &[1], &grid, &[]);
        assert_eq!(out[0].volume, Some(1.0));
        assert!((out[0].field[0] - C64::new(2.0, -1.0)).norm() < 1e-15);
    }
}
