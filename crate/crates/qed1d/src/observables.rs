//! Physical quantities extracted from propagated states: atomic populations,
//! one-photon field profiles, decay fits, reduced two-atom density matrices,
//! and concurrence.

use faer::{Mat, Side};

use crate::dynamics::Mixture;
use crate::fem::{evaluate_field, FemError, Mesh1D};
use crate::modes::DiscreteMode;
use crate::quanta::{Basis, BlockVec, PhotonConf};
use crate::C64;

/// Runs that never decay below 1/e are certified as non-decaying (rate zero)
/// only once they have been watched at least this long.
pub const DECAY_CUTOFF_TIME: f64 = 30.0;

#[derive(Debug, thiserror::Error)]
pub enum ObsError {
    #[error("observable needs exactly 2 atoms, basis has {0}")]
    NotTwoAtoms(usize),
    #[error(
        "one-photon field is defined on the single-excitation sector; state carries {norm:.3e} amplitude in blocks with >= 2 quanta"
    )]
    MultiQuantaField { norm: f64 },
    #[error("decay fit inconclusive: series never crosses 1/e and ends at t = {t_end} < {DECAY_CUTOFF_TIME}")]
    Inconclusive { t_end: f64 },
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),
    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
    #[error(transparent)]
    Fem(#[from] FemError),
}

/// Population of atom `j` (probability of finding it excited) in a pure
/// block state.
pub fn atomic_population(basis: &Basis, state: &BlockVec, atom: usize) -> f64 {
    assert!(atom < basis.n_atoms, "atom index out of range");
    let bit = 1u32 << atom;
    let mut p = 0.0;
    for (block, amps) in basis.blocks.iter().zip(&state.blocks) {
        for (s, a) in block.iter().zip(amps) {
            if s.atoms & bit != 0 {
                p += a.norm_sqr();
            }
        }
    }
    p
}

/// Weight-combined population of atom `j` over a mixture.
pub fn mixture_population(basis: &Basis, mix: &Mixture, atom: usize) -> f64 {
    mix.iter()
        .map(|(w, psi)| w * atomic_population(basis, psi, atom))
        .sum()
}

/// One-photon electric field amplitude profile
///
/// ```text
/// E(x, t) = sum_l E_l(x) C_{g,1_l}(t) + c.c.
/// ```
///
/// over the requested points, using the sqrt(D)-absorbed mode fields. The
/// mode list must be ordered exactly as the basis mode indices. Defined on
/// the single-excitation sector only: any amplitude in blocks with two or
/// more quanta is rejected.
pub fn one_photon_field(
    basis: &Basis,
    state: &BlockVec,
    modes: &[DiscreteMode],
    mesh: &Mesh1D,
    xs: &[f64],
) -> Result<Vec<f64>, ObsError> {
    assert_eq!(modes.len(), basis.n_modes);
    let high: f64 = state
        .blocks
        .iter()
        .enumerate()
        .filter(|(q, _)| *q >= 2)
        .map(|(_, b)| b.iter().map(|c| c.norm_sqr()).sum::<f64>())
        .sum();
    if high > 1e-18 {
        return Err(ObsError::MultiQuantaField { norm: high.sqrt() });
    }

    // Amplitudes C_{g,1_l}: all atoms ground, one photon in mode l.
    let mut c_l = vec![C64::new(0.0, 0.0); basis.n_modes];
    if state.blocks.len() > 1 {
        for (s, a) in basis.blocks[1].iter().zip(&state.blocks[1]) {
            if s.atoms == 0 {
                if let PhotonConf::One(l) = s.photons {
                    c_l[l as usize] = *a;
                }
            }
        }
    }

    let mut out = Vec::with_capacity(xs.len());
    for &x in xs {
        let mut acc = C64::new(0.0, 0.0);
        for (m, c) in modes.iter().zip(&c_l) {
            if c.norm_sqr() > 0.0 {
                acc += evaluate_field(mesh, &m.field, x)? * c;
            }
        }
        out.push(2.0 * acc.re);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMethod {
    /// 1/e lifetime crossing by linear interpolation.
    Lifetime,
    /// Least squares on ln P.
    Regression,
}

/// Result of an exponential decay fit. `gamma = 0` with infinite `tau`
/// encodes a certified non-decaying series (watched past the cutoff time).
#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    pub gamma: f64,
    pub tau: f64,
    pub method: FitMethod,
}

/// Fit a decay rate from a population series starting at 1.
///
/// The lifetime tau is the first crossing of 1/e, located by linear
/// interpolation, and gamma = 1/tau. A series that never crosses counts as
/// non-decaying (gamma = 0) once it extends past t = 30; shorter runs are
/// inconclusive. Apply only to envelope-decaying series; a raw Rabi
/// oscillation crosses 1/e within its first period and the crossing would
/// reflect the oscillation, not a decay.
pub fn fit_decay(t: &[f64], p: &[f64]) -> Result<DecayFit, ObsError> {
    if t.len() != p.len() || t.len() < 2 {
        return Err(ObsError::InvalidSeries(
            "need equal-length series with at least 2 samples".into(),
        ));
    }
    if !t.windows(2).all(|w| w[1] > w[0]) {
        return Err(ObsError::InvalidSeries("time grid must increase".into()));
    }
    if (p[0] - 1.0).abs() > 0.05 {
        return Err(ObsError::InvalidSeries(format!(
            "series must start at 1, got {}",
            p[0]
        )));
    }
    let thresh = (-1.0f64).exp();
    for i in 1..p.len() {
        if p[i] <= thresh {
            let f = (thresh - p[i - 1]) / (p[i] - p[i - 1]);
            let tau = t[i - 1] + f * (t[i] - t[i - 1]);
            return Ok(DecayFit {
                gamma: 1.0 / tau,
                tau,
                method: FitMethod::Lifetime,
            });
        }
    }
    let t_end = *t.last().unwrap();
    if t_end >= DECAY_CUTOFF_TIME {
        Ok(DecayFit {
            gamma: 0.0,
            tau: f64::INFINITY,
            method: FitMethod::Lifetime,
        })
    } else {
        Err(ObsError::Inconclusive { t_end })
    }
}

/// Least-squares exponential fit on ln P over the samples with P above
/// `floor` (protects the regression from late-time noise).
pub fn fit_decay_regression(t: &[f64], p: &[f64], floor: f64) -> Result<DecayFit, ObsError> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(p)
        .filter(|(_, &pi)| pi > floor)
        .map(|(&ti, &pi)| (ti, pi.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(ObsError::InvalidSeries(
            "regression needs at least 3 samples above the floor".into(),
        ));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let gamma = (-slope).max(0.0);
    Ok(DecayFit {
        gamma,
        tau: if gamma > 0.0 { 1.0 / gamma } else { f64::INFINITY },
        method: FitMethod::Regression,
    })
}

/// Local maxima of a sampled oscillation (plateau-tolerant); the first
/// sample counts when it starts a descent, so a damped cos^2 includes its
/// t = 0 peak.
pub fn oscillation_peaks(t: &[f64], p: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = p.len();
    let mut ts = Vec::new();
    let mut ps = Vec::new();
    if n >= 2 && p[0] >= p[1] {
        ts.push(t[0]);
        ps.push(p[0]);
    }
    for i in 1..n.saturating_sub(1) {
        if p[i] > p[i - 1] && p[i] >= p[i + 1] {
            ts.push(t[i]);
            ps.push(p[i]);
        }
    }
    (ts, ps)
}

/// Oscillation visibility (max - min) / (max + min) of a series.
pub fn visibility(p: &[f64]) -> f64 {
    let max = p.iter().cloned().fold(f64::MIN, f64::max);
    let min = p.iter().cloned().fold(f64::MAX, f64::min);
    if max + min == 0.0 {
        0.0
    } else {
        (max - min) / (max + min)
    }
}

/// Collective decay rate of a population series relative to the one-atom
/// rate: fits the total population and returns gamma / gamma0.
pub fn superradiance_rate(t: &[f64], total_pop: &[f64], gamma0: f64) -> Result<f64, ObsError> {
    let fit = fit_decay(t, total_pop)?;
    Ok(fit.gamma / gamma0)
}

/// Death and rebirth structure of a concurrence time series.
#[derive(Debug, Clone, Default)]
pub struct ConcurrenceEvents {
    /// First time the concurrence hits zero after having been positive.
    pub first_zero: Option<f64>,
    /// Maximum of each positive stretch that follows a zero stretch, in
    /// time order.
    pub rebirth_peaks: Vec<f64>,
}

/// Segment a concurrence series into dead (== 0 within `tol`) and alive
/// stretches. The closed-form concurrence clamps at exactly zero, so a tiny
/// tolerance only guards float noise.
pub fn concurrence_events(t: &[f64], c: &[f64], tol: f64) -> ConcurrenceEvents {
    assert_eq!(t.len(), c.len());
    let mut events = ConcurrenceEvents::default();
    let mut was_alive = false;
    let mut dead_seen = false;
    let mut current_peak: Option<f64> = None;
    for (&ti, &ci) in t.iter().zip(c) {
        if ci <= tol {
            if was_alive && events.first_zero.is_none() {
                events.first_zero = Some(ti);
            }
            if let Some(peak) = current_peak.take() {
                events.rebirth_peaks.push(peak);
            }
            was_alive = false;
            dead_seen = true;
        } else {
            if dead_seen {
                let peak = current_peak.get_or_insert(0.0);
                *peak = peak.max(ci);
            }
            was_alive = true;
        }
    }
    if let Some(peak) = current_peak {
        events.rebirth_peaks.push(peak);
    }
    events
}

/// Reduced density matrix of two atoms in the ordered basis
/// {|ee>, |eg>, |ge>, |gg>} (|eg> = atom 0 excited, atom 1 ground).
#[derive(Debug, Clone, Copy)]
pub struct TwoAtomDensity {
    pub m: [[C64; 4]; 4],
}

impl TwoAtomDensity {
    pub fn a(&self) -> f64 {
        self.m[0][0].re
    }
    pub fn b(&self) -> f64 {
        self.m[1][1].re
    }
    pub fn c(&self) -> f64 {
        self.m[2][2].re
    }
    pub fn d(&self) -> f64 {
        self.m[3][3].re
    }
    /// Cross coherence rho_23 between |eg> and |ge>.
    pub fn z(&self) -> C64 {
        self.m[1][2]
    }

    pub fn trace(&self) -> f64 {
        (0..4).map(|i| self.m[i][i].re).sum()
    }

    fn to_mat(self) -> Mat<C64> {
        Mat::from_fn(4, 4, |i, j| self.m[i][j])
    }

    /// Hermitian eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>, ObsError> {
        self.to_mat()
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| ObsError::Eigen(format!("{e:?}")))
    }

    /// Enforce Hermiticity, unit trace, and positive semidefiniteness.
    pub fn validate(&self) -> Result<(), ObsError> {
        for i in 0..4 {
            for j in 0..4 {
                if (self.m[i][j] - self.m[j][i].conj()).norm() > 1e-9 {
                    return Err(ObsError::InvalidDensity(format!(
                        "not Hermitian at ({i},{j})"
                    )));
                }
            }
        }
        if (self.trace() - 1.0).abs() > 1e-9 {
            return Err(ObsError::InvalidDensity(format!(
                "trace {} != 1",
                self.trace()
            )));
        }
        let eigs = self.eigenvalues()?;
        if eigs.iter().any(|&l| l < -1e-9) {
            return Err(ObsError::InvalidDensity(format!(
                "negative eigenvalue {:?}",
                eigs
            )));
        }
        Ok(())
    }
}

/// Precomputed index table for the partial trace over field occupations:
/// for every photon configuration in the basis, the positions of the four
/// atomic configurations sharing it.
pub struct TwoAtomTracer {
    /// (block, positions of [ee, eg, ge, gg], some may be absent when the
    /// quanta cutoff excludes them).
    groups: Vec<(usize, [Option<usize>; 4])>,
}

/// Atomic configuration index in {ee, eg, ge, gg} order for a 2-atom mask.
fn atom_config_index(mask: u32) -> usize {
    match mask {
        0b11 => 0,
        0b01 => 1,
        0b10 => 2,
        0b00 => 3,
        _ => unreachable!("two-atom mask"),
    }
}

impl TwoAtomTracer {
    pub fn new(basis: &Basis) -> Result<Self, ObsError> {
        if basis.n_atoms != 2 {
            return Err(ObsError::NotTwoAtoms(basis.n_atoms));
        }
        let mut groups = Vec::new();
        for (q, block) in basis.blocks.iter().enumerate() {
            let mut seen: std::collections::HashMap<PhotonConf, [Option<usize>; 4]> =
                std::collections::HashMap::new();
            for (pos, s) in block.iter().enumerate() {
                seen.entry(s.photons).or_insert([None; 4])[atom_config_index(s.atoms)] = Some(pos);
            }
            let mut confs: Vec<(PhotonConf, [Option<usize>; 4])> = seen.into_iter().collect();
            confs.sort_by_key(|&(c, _)| c);
            for (_, slots) in confs {
                groups.push((q, slots));
            }
        }
        Ok(TwoAtomTracer { groups })
    }

    /// rho_atoms = sum_k w_k Tr_field |psi_k><psi_k|.
    pub fn evaluate(&self, mix: &Mixture) -> Result<TwoAtomDensity, ObsError> {
        let mut m = [[C64::new(0.0, 0.0); 4]; 4];
        for (w, psi) in mix {
            for &(q, slots) in &self.groups {
                let amps = &psi.blocks[q];
                let v: [C64; 4] = std::array::from_fn(|i| {
                    slots[i].map_or(C64::new(0.0, 0.0), |pos| amps[pos])
                });
                for r in 0..4 {
                    if v[r].norm_sqr() == 0.0 {
                        continue;
                    }
                    for c in 0..4 {
                        m[r][c] += v[r] * v[c].conj() * *w;
                    }
                }
            }
        }
        let rho = TwoAtomDensity { m };
        rho.validate()?;
        Ok(rho)
    }
}

/// Partial trace over field occupations for a two-atom ensemble.
pub fn reduced_two_atom_density(basis: &Basis, mix: &Mixture) -> Result<TwoAtomDensity, ObsError> {
    TwoAtomTracer::new(basis)?.evaluate(mix)
}

/// Entries outside the X pattern (diagonal plus the two anti-diagonal
/// coherences) below this threshold allow the closed-form X concurrence.
const X_STATE_TOL: f64 = 1e-8;

fn is_x_state(m: &[[C64; 4]; 4]) -> bool {
    let off = [(0, 1), (0, 2), (1, 0), (2, 0), (1, 3), (3, 1), (2, 3), (3, 2)];
    off.iter().all(|&(i, j)| m[i][j].norm() < X_STATE_TOL)
}

/// Closed-form concurrence of an X-state.
pub(crate) fn concurrence_x(rho: &TwoAtomDensity) -> f64 {
    let m = &rho.m;
    let t1 = m[1][2].norm() - (m[0][0].re * m[3][3].re).max(0.0).sqrt();
    let t2 = m[0][3].norm() - (m[1][1].re * m[2][2].re).max(0.0).sqrt();
    (2.0 * t1.max(t2)).max(0.0)
}

/// General Wootters concurrence: C = max(0, l1 - l2 - l3 - l4) with l_i the
/// descending square roots of the eigenvalues of rho * rho_tilde, computed
/// through the Hermitian product sqrt(rho) rho_tilde sqrt(rho).
pub(crate) fn concurrence_wootters(rho: &TwoAtomDensity) -> Result<f64, ObsError> {
    // Spin-flip matrix sigma_y x sigma_y in the {ee,eg,ge,gg} basis.
    let f: [[f64; 4]; 4] = [
        [0.0, 0.0, 0.0, -1.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0, 0.0],
    ];
    let mut tilde = [[C64::new(0.0, 0.0); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..4 {
                for l in 0..4 {
                    acc += f[i][k] * rho.m[k][l].conj() * f[l][j];
                }
            }
            tilde[i][j] = acc;
        }
    }

    // sqrt(rho) by Hermitian eigendecomposition with clamped eigenvalues.
    let eig = rho
        .to_mat()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| ObsError::Eigen(format!("{e:?}")))?;
    let u = eig.U();
    let s = eig.S();
    let mut sqrt_rho = [[C64::new(0.0, 0.0); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..4 {
                let lam = s[k].re.max(0.0).sqrt();
                acc += u[(i, k)] * lam * u[(j, k)].conj();
            }
            sqrt_rho[i][j] = acc;
        }
    }

    let mul = |a: &[[C64; 4]; 4], b: &[[C64; 4]; 4]| -> [[C64; 4]; 4] {
        let mut out = [[C64::new(0.0, 0.0); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..4 {
                    acc += a[i][k] * b[k][j];
                }
                out[i][j] = acc;
            }
        }
        out
    };
    let prod = mul(&mul(&sqrt_rho, &tilde), &sqrt_rho);
    let herm = Mat::from_fn(4, 4, |i, j| (prod[i][j] + prod[j][i].conj()) * 0.5);
    let mut lams: Vec<f64> = herm
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| ObsError::Eigen(format!("{e:?}")))?
        .into_iter()
        .map(|l: f64| l.max(0.0).sqrt())
        .collect();
    lams.sort_by(|a, b| b.total_cmp(a));
    Ok((lams[0] - lams[1] - lams[2] - lams[3]).max(0.0))
}

/// Concurrence of a two-atom density matrix: the closed form when the
/// matrix has X structure, the general Wootters spin-flip formula otherwise.
pub fn concurrence(rho: &TwoAtomDensity) -> Result<f64, ObsError> {
    if is_x_state(&rho.m) {
        Ok(concurrence_x(rho))
    } else {
        concurrence_wootters(rho)
    }
}
