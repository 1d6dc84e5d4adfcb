//! Truncated emitter + field Hilbert space and Hamiltonian assembly.
//!
//! The excitation-number-conserving (rotating-wave) Hamiltonian
//!
//! ```text
//! H = sum_j (omega_a/2) sigma_z^j + sum_l omega_l a_l^dag a_l
//!     - sum_{jl} ( gamma_jl sigma_+^j a_l + h.c. )
//! ```
//!
//! commutes with the total quanta operator, so the basis splits into blocks
//! of fixed total excitation number q. Truncation keeps q <= max_quanta with
//! max_quanta in {1, 2}; the two-quanta sector is the largest supported and
//! its states are represented explicitly (two photons may share one mode).

use std::collections::HashMap;

use faer::Mat;

use crate::fem::{evaluate_field, FemError, Mesh1D};
use crate::modes::DiscreteMode;
use crate::C64;

#[derive(Debug, thiserror::Error)]
pub enum QuantaError {
    #[error("unsupported quanta truncation M = {0}; supported: 1, 2")]
    UnsupportedTruncation(u32),
    #[error("basis needs at least one atom and one mode, got {atoms} atoms, {modes} modes")]
    EmptySystem { atoms: usize, modes: usize },
    #[error("atom count {0} exceeds the supported bitmask width (32)")]
    TooManyAtoms(usize),
    #[error(transparent)]
    Fem(#[from] FemError),
}

/// Photon part of a basis state, truncated at two total photons.
/// `Two(l0, l1)` keeps `l0 <= l1`; equal indices mean double occupation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PhotonConf {
    Vacuum,
    One(u32),
    Two(u32, u32),
}

impl PhotonConf {
    pub fn count(&self) -> u32 {
        match self {
            PhotonConf::Vacuum => 0,
            PhotonConf::One(_) => 1,
            PhotonConf::Two(_, _) => 2,
        }
    }

    /// Occupation of mode `l`.
    pub fn occupation(&self, l: u32) -> u32 {
        match *self {
            PhotonConf::Vacuum => 0,
            PhotonConf::One(a) => (a == l) as u32,
            PhotonConf::Two(a, b) => (a == l) as u32 + (b == l) as u32,
        }
    }

    /// Add one photon in mode `l` (normalized ordering).
    pub fn raised(&self, l: u32) -> Option<PhotonConf> {
        match *self {
            PhotonConf::Vacuum => Some(PhotonConf::One(l)),
            PhotonConf::One(a) => Some(PhotonConf::Two(a.min(l), a.max(l))),
            PhotonConf::Two(_, _) => None,
        }
    }

    /// Total photon energy given per-mode frequencies.
    pub fn energy(&self, mode_omegas: &[f64]) -> f64 {
        match *self {
            PhotonConf::Vacuum => 0.0,
            PhotonConf::One(a) => mode_omegas[a as usize],
            PhotonConf::Two(a, b) => mode_omegas[a as usize] + mode_omegas[b as usize],
        }
    }
}

/// One basis state: excited-atom bitmask (bit j = atom j excited) plus the
/// photon configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisState {
    pub atoms: u32,
    pub photons: PhotonConf,
}

impl BasisState {
    pub fn quanta(&self) -> u32 {
        self.atoms.count_ones() + self.photons.count()
    }
}

/// Block-structured basis of all states with q <= max_quanta.
///
/// Ordering inside a block is deterministic: states with more atomic
/// excitations come first, ties broken lexicographically by excited-atom
/// index tuple and then by photon mode indices.
#[derive(Debug, Clone)]
pub struct Basis {
    pub n_atoms: usize,
    pub n_modes: usize,
    pub max_quanta: u32,
    /// blocks[q] lists the states with exactly q total quanta.
    pub blocks: Vec<Vec<BasisState>>,
    index: HashMap<BasisState, (usize, usize)>,
}

impl Basis {
    /// Dimensions of the quanta blocks, indexed by q.
    pub fn block_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.len()).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).sum()
    }

    /// (block, position) of a state, if present.
    pub fn position(&self, s: &BasisState) -> Option<(usize, usize)> {
        self.index.get(s).copied()
    }
}

/// Enumerate the truncated basis.
pub fn enumerate_basis(
    n_atoms: usize,
    n_modes: usize,
    max_quanta: u32,
) -> Result<Basis, QuantaError> {
    if !(1..=2).contains(&max_quanta) {
        return Err(QuantaError::UnsupportedTruncation(max_quanta));
    }
    if n_atoms == 0 || n_modes == 0 {
        return Err(QuantaError::EmptySystem {
            atoms: n_atoms,
            modes: n_modes,
        });
    }
    if n_atoms > 32 {
        return Err(QuantaError::TooManyAtoms(n_atoms));
    }

    let mut blocks: Vec<Vec<BasisState>> = Vec::with_capacity(max_quanta as usize + 1);
    blocks.push(vec![BasisState {
        atoms: 0,
        photons: PhotonConf::Vacuum,
    }]);

    // q = 1: single atomic excitations, then single photons.
    let mut q1 = Vec::with_capacity(n_atoms + n_modes);
    for j in 0..n_atoms {
        q1.push(BasisState {
            atoms: 1 << j,
            photons: PhotonConf::Vacuum,
        });
    }
    for l in 0..n_modes {
        q1.push(BasisState {
            atoms: 0,
            photons: PhotonConf::One(l as u32),
        });
    }
    blocks.push(q1);

    if max_quanta == 2 {
        let mut q2 = Vec::new();
        for j in 0..n_atoms {
            for j2 in j + 1..n_atoms {
                q2.push(BasisState {
                    atoms: (1 << j) | (1 << j2),
                    photons: PhotonConf::Vacuum,
                });
            }
        }
        for j in 0..n_atoms {
            for l in 0..n_modes {
                q2.push(BasisState {
                    atoms: 1 << j,
                    photons: PhotonConf::One(l as u32),
                });
            }
        }
        for l in 0..n_modes {
            for l2 in l..n_modes {
                q2.push(BasisState {
                    atoms: 0,
                    photons: PhotonConf::Two(l as u32, l2 as u32),
                });
            }
        }
        blocks.push(q2);
    }

    let mut index = HashMap::new();
    for (q, block) in blocks.iter().enumerate() {
        for (i, s) in block.iter().enumerate() {
            debug_assert_eq!(s.quanta() as usize, q);
            index.insert(*s, (q, i));
        }
    }
    Ok(Basis {
        n_atoms,
        n_modes,
        max_quanta,
        blocks,
        index,
    })
}

/// Block-aligned complex state vector.
#[derive(Debug, Clone)]
pub struct BlockVec {
    pub blocks: Vec<Vec<C64>>,
}

impl BlockVec {
    pub fn zeros(basis: &Basis) -> Self {
        BlockVec {
            blocks: basis.blocks.iter().map(|b| vec![C64::new(0.0, 0.0); b.len()]).collect(),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| b.iter())
            .map(|c| c.norm_sqr())
            .sum()
    }

    /// Squared norm per quanta block.
    pub fn block_norms_sqr(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .map(|b| b.iter().map(|c| c.norm_sqr()).sum())
            .collect()
    }

    pub fn scale(&mut self, s: f64) {
        for b in &mut self.blocks {
            for v in b {
                *v *= s;
            }
        }
    }
}

/// Dipole coupling strengths gamma[atom][mode] = d_eg * E_mode(x_atom),
/// evaluated on coarse-grained mode fields.
pub fn coupling_strengths(
    modes: &[DiscreteMode],
    mesh: &Mesh1D,
    atom_positions: &[f64],
    d_eg: f64,
) -> Result<Vec<Vec<C64>>, QuantaError> {
    let mut gamma = Vec::with_capacity(atom_positions.len());
    for &xa in atom_positions {
        let mut row = Vec::with_capacity(modes.len());
        for m in modes {
            debug_assert!(m.volume.is_some(), "couplings need coarse-grained modes");
            row.push(d_eg * evaluate_field(mesh, &m.field, xa)?);
        }
        gamma.push(row);
    }
    Ok(gamma)
}

/// Assemble the per-block Hamiltonian matrices.
///
/// Diagonal: sum_j (+-omega_a/2) over atoms (excited +, ground -) plus the
/// photon energy. Off-diagonal: -gamma_jl sqrt(n_l + 1) between states
/// differing exactly by one (atom j: e -> g, mode l: n_l -> n_l + 1), filled
/// symmetrically with the conjugate so each block is exactly Hermitian.
pub fn assemble_hamiltonian(
    basis: &Basis,
    omega_a: f64,
    mode_omegas: &[f64],
    gamma: &[Vec<C64>],
) -> Vec<Mat<C64>> {
    assert_eq!(gamma.len(), basis.n_atoms);
    assert_eq!(mode_omegas.len(), basis.n_modes);
    let n_atoms = basis.n_atoms as u32;

    basis
        .blocks
        .iter()
        .map(|block| {
            let dim = block.len();
            let mut h = Mat::<C64>::zeros(dim, dim);
            for (p, sp) in block.iter().enumerate() {
                let n_exc = sp.atoms.count_ones() as f64;
                let e_atoms = (2.0 * n_exc - n_atoms as f64) * 0.5 * omega_a;
                h[(p, p)] = C64::new(e_atoms + sp.photons.energy(mode_omegas), 0.0);

                // Lower the atom, raise a mode; the partner lies in the same
                // block. Fill (p, partner) and its conjugate.
                for j in 0..basis.n_atoms {
                    if sp.atoms & (1 << j) == 0 {
                        continue;
                    }
                    for l in 0..basis.n_modes {
                        let n_l = sp.photons.occupation(l as u32);
                        let raised = sp
                            .photons
                            .raised(l as u32)
                            .expect("raising stays within the block");
                        let partner = BasisState {
                            atoms: sp.atoms & !(1 << j),
                            photons: raised,
                        };
                        let (qb, qp) = basis
                            .position(&partner)
                            .expect("partner state must exist in the basis");
                        debug_assert_eq!(&basis.blocks[qb][qp], &partner);
                        let amp = -gamma[j][l] * ((n_l + 1) as f64).sqrt();
                        h[(p, qp)] = amp;
                        h[(qp, p)] = amp.conj();
                    }
                }
            }
            h
        })
        .collect()
}

/// Expectation value of the total quanta operator.
pub fn expectation_quanta(state: &BlockVec) -> f64 {
    state
        .blocks
        .iter()
        .enumerate()
        .map(|(q, b)| q as f64 * b.iter().map(|c| c.norm_sqr()).sum::<f64>())
        .sum()
}
