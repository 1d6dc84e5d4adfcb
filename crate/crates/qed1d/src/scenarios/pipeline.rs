//! Run stages: band scan, mode extraction, degeneracy compression, coverage
//! pruning, initial-state preparation, and propagation with recording.

use std::collections::BTreeMap;

use faer::{Mat, Side};
use rayon::prelude::*;

use crate::dynamics::{CnPropagator, Mixture};
use crate::fem::assemble_system;
use crate::modes::{
    adaptive_frequency_grid, coarse_grain, solve_ba_mode_with, solve_ma_mode_with,
    wall_source_nodes, DiscreteMode, Direction, FrequencyGrid, SpectralResponse,
};
use crate::quanta::{Basis, BasisState, BlockVec, PhotonConf};
use crate::C64;

use super::config::{InitialKind, ScenarioConfig, Scheme, Variant};
use super::geometry::Scene;
use super::ScenarioError;

/// Relative eigenvalue floor below which a degenerate combination counts as
/// dark during compression.
const COMPRESSION_RANK_TOL: f64 = 1e-24;

fn stage<E: Into<ScenarioError>>(name: &'static str) -> impl Fn(E) -> ScenarioError {
    move |e| {
        let inner = e.into();
        ScenarioError::Stage {
            stage: name,
            source: Box::new(inner),
        }
    }
}

/// Classical spectral scan: adaptive grid driven by the probe response at
/// the first atom's node, plus the response samples on the final grid.
pub fn scan_band(
    scene: &Scene,
    config: &ScenarioConfig,
) -> Result<(FrequencyGrid, SpectralResponse), ScenarioError> {
    let probe = scene.atom_nodes[0];
    let mut cache: BTreeMap<u64, C64> = BTreeMap::new();
    let eval = |omega: f64| -> Result<C64, crate::modes::ModesError> {
        let sys = assemble_system(&scene.mesh, &scene.medium, omega)?;
        let mut rhs = vec![C64::new(0.0, 0.0); scene.mesh.n_nodes()];
        rhs[probe] = C64::new(1.0, 0.0);
        sys.zero_pec_rows(&mut rhs);
        let x = sys.solve(&rhs)?;
        Ok(x[probe])
    };
    let mut memo_eval = |omega: f64| {
        let amp = eval(omega)?;
        cache.insert(omega.to_bits(), amp);
        Ok(amp)
    };
    let grid = adaptive_frequency_grid(
        &mut memo_eval,
        config.band.bounds(),
        config.refinement.budget,
        config.refinement.tol,
    )
    .map_err(stage("band-scan"))?;
    let amplitudes = grid
        .omegas
        .iter()
        .map(|w| cache[&w.to_bits()])
        .collect::<Vec<_>>();
    let scan = SpectralResponse {
        omegas: grid.omegas.clone(),
        amplitudes,
    };
    Ok((grid, scan))
}

/// Extract the variant's mode families on every grid frequency and fold in
/// the coarse-graining volumes. Frequencies solve independently in parallel.
pub fn extract_modes(
    scene: &Scene,
    config: &ScenarioConfig,
    grid: &FrequencyGrid,
) -> Result<Vec<DiscreteMode>, ScenarioError> {
    let sources = wall_source_nodes(&scene.mesh, &scene.medium);
    let want_ba = config.variant != Variant::Ma;
    let want_ma = config.variant != Variant::Ba;
    if want_ma && !want_ba && sources.is_empty() {
        return Err(ScenarioError::Stage {
            stage: "extraction",
            source: Box::new(ScenarioError::Config(
                "medium-assisted variant selected but the geometry has no lossy nodes".into(),
            )),
        });
    }

    let per_freq: Vec<Vec<DiscreteMode>> = grid
        .omegas
        .par_iter()
        .map(|&omega| -> Result<Vec<DiscreteMode>, ScenarioError> {
            let sys = assemble_system(&scene.mesh, &scene.medium, omega)
                .map_err(stage("extraction"))?;
            let lu = sys.factor().map_err(stage("extraction"))?;
            let mut modes = Vec::new();
            if want_ba {
                for dir in [Direction::Plus, Direction::Minus] {
                    modes.push(
                        solve_ba_mode_with(&scene.mesh, &sys, &lu, dir)
                            .map_err(stage("extraction"))?,
                    );
                }
            }
            if want_ma {
                for src in &sources {
                    modes.push(
                        solve_ma_mode_with(&scene.mesh, &scene.medium, &sys, &lu, src.node)
                            .map_err(stage("extraction"))?,
                    );
                }
            }
            Ok(modes)
        })
        .collect::<Result<_, _>>()?;

    let mut modes = Vec::new();
    let mut grid_index = Vec::new();
    for (gi, group) in per_freq.into_iter().enumerate() {
        grid_index.extend(std::iter::repeat(gi).take(group.len()));
        modes.extend(group);
    }
    if modes.is_empty() {
        return Err(ScenarioError::Stage {
            stage: "extraction",
            source: Box::new(ScenarioError::Config("variant leaves no modes".into())),
        });
    }
    Ok(coarse_grain(modes, &grid_index, grid, &sources))
}

/// Rotate each frequency's degenerate modes onto the atom-coupled subspace
/// and drop the dark complement.
///
/// At fixed frequency the modes are energy-degenerate, so any unitary mixing
/// of them leaves the field Hamiltonian invariant. The rotation is chosen
/// from the singular value decomposition of the atoms-by-modes coupling
/// matrix G (computed via its Gram matrix G G^H): combinations with singular
/// value zero couple to no atom and, starting from a photon-vacuum state,
/// stay in vacuum for all time, so removing them is exact rather than an
/// approximation. At most one combination per atom survives per frequency.
///
/// A kept combination's nodal field is the same linear combination of the
/// member fields, which keeps couplings consistent: d * E_new(x_j) equals
/// the rotated coupling exactly, so downstream code recomputes couplings
/// from the compressed fields as usual.
pub fn compress_degeneracies(
    modes: Vec<DiscreteMode>,
    scene: &Scene,
    d_eg: f64,
) -> Vec<DiscreteMode> {
    let n_atoms = scene.atom_nodes.len();
    let mut out = Vec::with_capacity(modes.len().min(scene.atom_nodes.len() * 256));

    let mut i = 0;
    while i < modes.len() {
        let omega = modes[i].omega;
        let mut j = i + 1;
        while j < modes.len() && modes[j].omega == omega {
            j += 1;
        }
        let group = &modes[i..j];
        let s = group.len();

        // Coupling matrix G[j][s] at the snapped atom nodes (exact nodal
        // samples, no interpolation).
        let g = Mat::<C64>::from_fn(n_atoms, s, |a, m| {
            group[m].field[scene.atom_nodes[a]] * d_eg
        });
        let gram = Mat::<C64>::from_fn(n_atoms, n_atoms, |r, c| {
            let mut acc = C64::new(0.0, 0.0);
            for m in 0..s {
                acc += g[(r, m)] * g[(c, m)].conj();
            }
            acc
        });
        let total: f64 = (0..n_atoms).map(|r| gram[(r, r)].re).sum();
        if total <= 0.0 {
            // Entirely dark frequency; nothing to keep.
            i = j;
            continue;
        }
        let eig = gram
            .self_adjoint_eigen(Side::Lower)
            .expect("small Hermitian Gram matrix diagonalizes");
        let u = eig.U();
        let lam = eig.S();

        let mut kept: Vec<(f64, DiscreteMode)> = Vec::new();
        for k in 0..n_atoms {
            let l = lam[k].re;
            if l <= COMPRESSION_RANK_TOL * total {
                continue;
            }
            let sigma = l.sqrt();
            // Right singular vector w = G^H u / sigma; the combined field is
            // sum_m w_m * field_m.
            let mut field = vec![C64::new(0.0, 0.0); group[0].field.len()];
            let mut w_best = 0.0;
            let mut label = group[0].label;
            for m in 0..s {
                let mut w = C64::new(0.0, 0.0);
                for a in 0..n_atoms {
                    w += g[(a, m)].conj() * u[(a, k)];
                }
                w /= sigma;
                if w.norm_sqr() > w_best {
                    w_best = w.norm_sqr();
                    label = group[m].label;
                }
                for (f, &v) in field.iter_mut().zip(&group[m].field) {
                    *f += w * v;
                }
            }
            // The combination spans one frequency cell; keep that as its
            // quadrature volume (sqrt factors are already inside `field`).
            let volume = group
                .iter()
                .filter_map(|m| m.volume)
                .fold(f64::INFINITY, f64::min);
            kept.push((
                l,
                DiscreteMode {
                    omega,
                    label,
                    field,
                    volume: Some(volume),
                },
            ));
        }
        kept.sort_by(|a, b| b.0.total_cmp(&a.0));
        out.extend(kept.into_iter().map(|(_, m)| m));
        i = j;
    }
    out
}

/// Keep the smallest mode subset whose coupling weight max_j |gamma_j|^2
/// reaches `coverage` of the total, preserving the original mode order.
pub fn prune_by_coverage(
    modes: Vec<DiscreteMode>,
    scene: &Scene,
    d_eg: f64,
    coverage: f64,
) -> Result<Vec<DiscreteMode>, ScenarioError> {
    let scores: Vec<f64> = modes
        .iter()
        .map(|m| {
            scene
                .atom_nodes
                .iter()
                .map(|&n| (m.field[n] * d_eg).norm_sqr())
                .fold(0.0, f64::max)
        })
        .collect();
    let total: f64 = scores.iter().sum();
    if total <= 0.0 {
        return Err(ScenarioError::Stage {
            stage: "pruning",
            source: Box::new(ScenarioError::Config(
                "every mode decouples from every atom; check atom placement".into(),
            )),
        });
    }
    let mut order: Vec<usize> = (0..modes.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let target = coverage * total;
    let mut acc = 0.0;
    let mut keep = vec![false; modes.len()];
    for idx in order {
        keep[idx] = true;
        acc += scores[idx];
        if acc >= target {
            break;
        }
    }
    Ok(modes
        .into_iter()
        .zip(keep)
        .filter_map(|(m, k)| k.then_some(m))
        .collect())
}

/// Builds the (possibly mixed) initial state. All supported kinds start in
/// the photon vacuum, which is what makes degeneracy compression exact.
pub fn initial_mixture(
    basis: &Basis,
    kind: InitialKind,
    a: f64,
) -> Result<Mixture, ScenarioError> {
    let n_atoms = basis.n_atoms;
    let pure = |weight: f64, entries: &[(u32, C64)]| -> Result<(f64, BlockVec), ScenarioError> {
        let mut v = BlockVec::zeros(basis);
        for &(atoms, amp) in entries {
            let state = BasisState {
                atoms,
                photons: PhotonConf::Vacuum,
            };
            let (b, p) = basis.position(&state).ok_or_else(|| {
                ScenarioError::Config(format!("initial state {atoms:#b} missing from basis"))
            })?;
            v.blocks[b][p] = amp;
        }
        Ok((weight, v))
    };
    let one = C64::new(1.0, 0.0);
    match kind {
        InitialKind::Excited => Ok(vec![pure(1.0, &[(1, one)])?]),
        InitialKind::Dicke => {
            let amp = C64::new(1.0 / (n_atoms as f64).sqrt(), 0.0);
            let entries: Vec<(u32, C64)> = (0..n_atoms).map(|j| (1u32 << j, amp)).collect();
            Ok(vec![pure(1.0, &entries)?])
        }
        InitialKind::EsdMixture => {
            if n_atoms != 2 {
                return Err(ScenarioError::Config(
                    "the mixed entangled initial state requires two atoms".into(),
                ));
            }
            let bell = C64::new(0.5f64.sqrt(), 0.0);
            Ok(vec![
                pure(a / 3.0, &[(0b11, one)])?,
                pure(2.0 / 3.0, &[(0b01, bell), (0b10, bell)])?,
                pure((1.0 - a) / 3.0, &[(0b00, one)])?,
            ])
        }
    }
}

/// Time series recorded along a propagation.
#[derive(Debug, Clone, Default)]
pub struct RunSeries {
    pub t: Vec<f64>,
    /// Excited-state population per atom.
    pub populations: Vec<Vec<f64>>,
    /// Sum of the atomic populations.
    pub total_excitation: Vec<f64>,
    /// Mixture-averaged total-quanta expectation.
    pub quanta: Vec<f64>,
    pub concurrence: Option<Vec<f64>>,
    /// Two-atom density entries, scaled by 3 to match the mixture weights.
    pub ee_pop: Option<Vec<f64>>,
    pub gg_pop: Option<Vec<f64>>,
    pub z_abs: Option<Vec<f64>>,
}

/// Optional per-record sink for the full mixture, used for field snapshots.
pub type RecordHook<'a> = dyn FnMut(f64, &Mixture) -> Result<(), ScenarioError> + 'a;

/// Propagate the mixture and record observables every `record_stride` steps
/// (including step zero). Returns the series and the worst norm drift among
/// the mixture members.
pub fn propagate_and_record(
    h: &[Mat<C64>],
    basis: &Basis,
    config: &ScenarioConfig,
    mut mix: Mixture,
    mut hook: Option<&mut RecordHook<'_>>,
) -> Result<(RunSeries, f64), ScenarioError> {
    let dt = config.propagation.dt;
    let n_steps = (config.propagation.t_final / dt).round().max(1.0) as usize;
    let stride = config.propagation.record_stride;
    let n_atoms = basis.n_atoms;

    let track_entanglement = n_atoms == 2 && config.initial.kind == InitialKind::EsdMixture;
    let tracer = if track_entanglement {
        Some(crate::observables::TwoAtomTracer::new(basis).map_err(stage("observables"))?)
    } else {
        None
    };

    // One propagator per mixture member, each factoring only the blocks that
    // member populates; the members' active sets are disjoint for the mixed
    // state, so no block is factored twice.
    let mut props: Vec<CnPropagator> = Vec::with_capacity(mix.len());
    let mut rk4 = false;
    match config.propagation.scheme {
        Scheme::Cn => {
            for (_, member) in &mix {
                let active: Vec<bool> = member
                    .blocks
                    .iter()
                    .map(|b| b.iter().any(|c| c.norm_sqr() > 0.0))
                    .collect();
                props.push(CnPropagator::new(h, dt, &active).map_err(stage("propagation"))?);
            }
        }
        Scheme::Rk4 => rk4 = true,
    }

    let norms0: Vec<f64> = mix.iter().map(|(_, m)| m.norm_sqr().sqrt()).collect();
    let mut series = RunSeries {
        populations: vec![Vec::new(); n_atoms],
        ..Default::default()
    };
    if tracer.is_some() {
        series.concurrence = Some(Vec::new());
        series.ee_pop = Some(Vec::new());
        series.gg_pop = Some(Vec::new());
        series.z_abs = Some(Vec::new());
    }

    let record =
        |t: f64, mix: &Mixture, series: &mut RunSeries| -> Result<(), ScenarioError> {
            series.t.push(t);
            let mut total = 0.0;
            for atom in 0..n_atoms {
                let p = crate::observables::mixture_population(basis, mix, atom);
                series.populations[atom].push(p);
                total += p;
            }
            series.total_excitation.push(total);
            let quanta: f64 = mix
                .iter()
                .map(|(w, m)| w * crate::quanta::expectation_quanta(m))
                .sum();
            series.quanta.push(quanta);
            if let Some(tr) = &tracer {
                let rho = tr.evaluate(mix).map_err(stage("observables"))?;
                let c = crate::observables::concurrence(&rho).map_err(stage("observables"))?;
                series.concurrence.as_mut().unwrap().push(c);
                series.ee_pop.as_mut().unwrap().push(3.0 * rho.a());
                series.gg_pop.as_mut().unwrap().push(3.0 * rho.d());
                series.z_abs.as_mut().unwrap().push(3.0 * rho.z().norm());
            }
            Ok(())
        };

    record(0.0, &mix, &mut series)?;
    if let Some(hk) = hook.as_mut() {
        hk(0.0, &mix)?;
    }
    for s in 1..=n_steps {
        if rk4 {
            for (_, member) in mix.iter_mut() {
                crate::dynamics::rk4_step(h, member, dt);
            }
        } else {
            for ((_, member), prop) in mix.iter_mut().zip(&props) {
                prop.step(member).map_err(stage("propagation"))?;
            }
        }
        if s % stride == 0 || s == n_steps {
            let t = dt * s as f64;
            record(t, &mix, &mut series)?;
            if let Some(hk) = hook.as_mut() {
                hk(t, &mix)?;
            }
        }
    }

    let drift = mix
        .iter()
        .zip(&norms0)
        .map(|((_, m), &n0)| (m.norm_sqr().sqrt() - n0).abs())
        .fold(0.0, f64::max);
    Ok((series, drift))
}
