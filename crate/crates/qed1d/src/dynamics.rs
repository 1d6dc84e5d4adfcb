//! Time propagation of block state vectors under block-diagonal Hermitian
//! Hamiltonians.
//!
//! The workhorse is the Crank-Nicolson (Cayley) update
//!
//! ```text
//! (H - (2i/dt) I) psi_{n+1} = (-H - (2i/dt) I) psi_n,
//! ```
//!
//! which is unconditionally stable and exactly norm-preserving in exact
//! arithmetic; each block's left-hand operator is LU-factored once and
//! reused every step. A classical RK4 stepper with identical call shape
//! serves as an independent cross-check (norm-preserving only to O(dt^5)
//! per step).

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;

use crate::quanta::BlockVec;
use crate::C64;

/// Mixed state as a weighted ensemble of pure block states.
pub type Mixture = Vec<(f64, BlockVec)>;

#[derive(Debug, thiserror::Error)]
pub enum DynamicsError {
    #[error("time step must be a nonzero finite number, got {0}")]
    BadTimeStep(f64),
    #[error("state has {got} blocks, Hamiltonian has {want}")]
    BlockMismatch { got: usize, want: usize },
    #[error("block {block} is not factored but carries amplitude {amp:.3e}")]
    InactiveBlockPopulated { block: usize, amp: f64 },
}

struct CnBlock {
    /// Right-hand operator -H - (2i/dt) I.
    rhs_op: Mat<C64>,
    /// Factored left-hand operator H - (2i/dt) I.
    lu: PartialPivLu<C64>,
}

/// Crank-Nicolson propagator with per-block cached LU factorizations.
pub struct CnPropagator {
    dt: f64,
    blocks: Vec<Option<CnBlock>>,
}

impl CnPropagator {
    /// Factor the update operators for every block flagged in `active`
    /// (blocks the initial state populates). `dt` may be negative, which
    /// propagates backwards in time.
    pub fn new(h: &[Mat<C64>], dt: f64, active: &[bool]) -> Result<Self, DynamicsError> {
        if !(dt.is_finite() && dt != 0.0) {
            return Err(DynamicsError::BadTimeStep(dt));
        }
        assert_eq!(h.len(), active.len());
        let shift = C64::new(0.0, -2.0 / dt);
        let blocks = h
            .iter()
            .zip(active)
            .map(|(hb, &on)| {
                if !on {
                    return None;
                }
                let n = hb.nrows();
                let mut lhs = hb.clone();
                let mut rhs_op = Mat::<C64>::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        rhs_op[(i, j)] = -hb[(i, j)];
                    }
                    lhs[(i, i)] += shift;
                    rhs_op[(i, i)] += shift;
                }
                Some(CnBlock {
                    rhs_op,
                    lu: lhs.partial_piv_lu(),
                })
            })
            .collect();
        Ok(CnPropagator { dt, blocks })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advance one step in place.
    pub fn step(&self, psi: &mut BlockVec) -> Result<(), DynamicsError> {
        if psi.blocks.len() != self.blocks.len() {
            return Err(DynamicsError::BlockMismatch {
                got: psi.blocks.len(),
                want: self.blocks.len(),
            });
        }
        for (q, (blk, amps)) in self.blocks.iter().zip(psi.blocks.iter_mut()).enumerate() {
            match blk {
                None => {
                    let amp: f64 = amps.iter().map(|c| c.norm_sqr()).sum();
                    if amp > 1e-24 {
                        return Err(DynamicsError::InactiveBlockPopulated {
                            block: q,
                            amp: amp.sqrt(),
                        });
                    }
                }
                Some(cb) => {
                    let n = amps.len();
                    let mut v = Mat::<C64>::zeros(n, 1);
                    for i in 0..n {
                        v[(i, 0)] = amps[i];
                    }
                    let w = &cb.rhs_op * &v;
                    let x = cb.lu.solve(&w);
                    for i in 0..n {
                        amps[i] = x[(i, 0)];
                    }
                }
            }
        }
        Ok(())
    }

    /// Advance every component of a mixture one step.
    pub fn step_mixture(&self, mix: &mut Mixture) -> Result<(), DynamicsError> {
        for (_, psi) in mix.iter_mut() {
            self.step(psi)?;
        }
        Ok(())
    }
}

/// Propagate `n_steps` Crank-Nicolson steps, invoking `observer(step, psi)`
/// after every step (step counts from 1). Returns the global norm drift
/// |norm(final) - norm(initial)|.
pub fn cn_propagate<F: FnMut(usize, &BlockVec)>(
    h: &[Mat<C64>],
    psi0: &BlockVec,
    dt: f64,
    n_steps: usize,
    mut observer: F,
) -> Result<(BlockVec, f64), DynamicsError> {
    let active: Vec<bool> = psi0
        .blocks
        .iter()
        .map(|b| b.iter().any(|c| c.norm_sqr() > 0.0))
        .collect();
    let prop = CnPropagator::new(h, dt, &active)?;
    let norm0 = psi0.norm_sqr().sqrt();
    let mut psi = psi0.clone();
    for s in 1..=n_steps {
        prop.step(&mut psi)?;
        observer(s, &psi);
    }
    Ok((psi.clone(), (psi.norm_sqr().sqrt() - norm0).abs()))
}

/// One classical RK4 step of i d/dt psi = H psi, in place.
pub fn rk4_step(h: &[Mat<C64>], psi: &mut BlockVec, dt: f64) {
    let minus_i = C64::new(0.0, -1.0);
    for (hb, amps) in h.iter().zip(psi.blocks.iter_mut()) {
        let n = amps.len();
        if n == 0 {
            continue;
        }
        let mut v = Mat::<C64>::zeros(n, 1);
        for i in 0..n {
            v[(i, 0)] = amps[i];
        }
        let f = |x: &Mat<C64>| -> Mat<C64> {
            let mut out = hb * x;
            for i in 0..n {
                out[(i, 0)] *= minus_i;
            }
            out
        };
        let k1 = f(&v);
        let mut t = v.clone();
        for i in 0..n {
            t[(i, 0)] += k1[(i, 0)] * (0.5 * dt);
        }
        let k2 = f(&t);
        let mut t2 = v.clone();
        for i in 0..n {
            t2[(i, 0)] += k2[(i, 0)] * (0.5 * dt);
        }
        let k3 = f(&t2);
        let mut t3 = v.clone();
        for i in 0..n {
            t3[(i, 0)] += k3[(i, 0)] * dt;
        }
        let k4 = f(&t3);
        for i in 0..n {
            amps[i] = v[(i, 0)]
                + (k1[(i, 0)] + (k2[(i, 0)] + k3[(i, 0)]) * 2.0 + k4[(i, 0)]) * (dt / 6.0);
        }
    }
}

/// Propagate with RK4; returns the final state and the norm drift (RK4 does
/// not preserve the norm exactly; drift beyond ~1e-6 flags too coarse a
/// step).
pub fn rk4_propagate<F: FnMut(usize, &BlockVec)>(
    h: &[Mat<C64>],
    psi0: &BlockVec,
    dt: f64,
    n_steps: usize,
    mut observer: F,
) -> Result<(BlockVec, f64), DynamicsError> {
    if !(dt.is_finite() && dt != 0.0) {
        return Err(DynamicsError::BadTimeStep(dt));
    }
    if h.len() != psi0.blocks.len() {
        return Err(DynamicsError::BlockMismatch {
            got: psi0.blocks.len(),
            want: h.len(),
        });
    }
    let norm0 = psi0.norm_sqr().sqrt();
    let mut psi = psi0.clone();
    for s in 1..=n_steps {
        rk4_step(h, &mut psi, dt);
        observer(s, &psi);
    }
    Ok((psi.clone(), (psi.norm_sqr().sqrt() - norm0).abs()))
}
