//! Exhaustive cross-checks of the truncated basis: an independent
//! brute-force enumerator, closed-form block counts, and direct
//! matrix-element checks of the ladder algebra.

use num_complex::Complex64 as C64;
use qed1d::quanta::{assemble_hamiltonian, enumerate_basis, BasisState, PhotonConf};

/// Every (atom mask, photon configuration) with the given total quanta,
/// generated without any shared code with the production enumerator.
fn brute_force_block(n_atoms: usize, n_modes: usize, quanta: u32) -> Vec<BasisState> {
    let mut out = Vec::new();
    for atoms in 0u32..(1 << n_atoms) {
        let excited = atoms.count_ones();
        if excited > quanta {
            continue;
        }
        let photons_needed = quanta - excited;
        match photons_needed {
            0 => out.push(BasisState { atoms, photons: PhotonConf::Vacuum }),
            1 => {
                for l in 0..n_modes as u32 {
                    out.push(BasisState { atoms, photons: PhotonConf::One(l) });
                }
            }
            2 => {
                for l in 0..n_modes as u32 {
                    for l2 in l..n_modes as u32 {
                        out.push(BasisState { atoms, photons: PhotonConf::Two(l, l2) });
                    }
                }
            }
            _ => unreachable!("truncation is at two quanta"),
        }
    }
    out
}

fn choose2(n: usize) -> usize {
    n * (n.saturating_sub(1)) / 2
}

#[test]
fn enumeration_matches_brute_force_for_all_small_systems() {
    for n_atoms in 1..=4 {
        for n_modes in 1..=6 {
            for max_quanta in 1..=2u32 {
                let basis = enumerate_basis(n_atoms, n_modes, max_quanta).unwrap();
                assert_eq!(basis.blocks.len(), max_quanta as usize + 1);
                for q in 0..=max_quanta {
                    let brute = brute_force_block(n_atoms, n_modes, q);
                    let block = &basis.blocks[q as usize];
                    assert_eq!(
                        block.len(),
                        brute.len(),
                        "block {q} size for {n_atoms} atoms, {n_modes} modes"
                    );
                    // Same states, and the index must locate each one.
                    for s in &brute {
                        let (qb, p) = basis
                            .position(s)
                            .unwrap_or_else(|| panic!("missing state {s:?}"));
                        assert_eq!(qb, q as usize);
                        assert_eq!(&block[p], s);
                    }
                }
            }
        }
    }
}

#[test]
fn block_sizes_match_the_closed_forms() {
    for n_atoms in 1..=4usize {
        for n_modes in 1..=6usize {
            let basis = enumerate_basis(n_atoms, n_modes, 2).unwrap();
            let dims = basis.block_dims();
            assert_eq!(dims[0], 1);
            assert_eq!(dims[1], n_atoms + n_modes);
            let two = choose2(n_atoms) + n_atoms * n_modes + n_modes * (n_modes + 1) / 2;
            assert_eq!(dims[2], two);
            assert_eq!(basis.total_dim(), dims.iter().sum::<usize>());
        }
    }
}

#[test]
fn hamiltonian_entries_follow_the_ladder_algebra() {
    // Two atoms, two modes, two quanta; couplings with distinct complex
    // values so misplaced conjugates or indices cannot cancel.
    let basis = enumerate_basis(2, 2, 2).unwrap();
    let omega_a = 50.0;
    let mode_omegas = [49.0, 51.5];
    let gamma = vec![
        vec![C64::new(0.10, 0.02), C64::new(-0.03, 0.07)],
        vec![C64::new(0.04, -0.05), C64::new(0.08, 0.01)],
    ];
    let h = assemble_hamiltonian(&basis, omega_a, &mode_omegas, &gamma);

    let pos = |atoms: u32, photons: PhotonConf| {
        let (q, p) = basis.position(&BasisState { atoms, photons }).unwrap();
        (q, p)
    };

    // Diagonal: half the atom inversion times omega_a plus photon energy.
    let (q, p) = pos(0b01, PhotonConf::One(1));
    assert_eq!(q, 2);
    let want = 0.0 * omega_a + mode_omegas[1];
    assert!((h[q][(p, p)] - C64::new(want, 0.0)).norm() < 1e-14);

    let (q2, p2) = pos(0b00, PhotonConf::Two(1, 1));
    assert_eq!(q2, 2);
    let want = -omega_a + 2.0 * mode_omegas[1];
    assert!((h[q2][(p2, p2)] - C64::new(want, 0.0)).norm() < 1e-14);

    // One-quantum exchange between atom 1 and mode 0, read from both
    // triangles of the block.
    let (qa, pa) = pos(0b10, PhotonConf::Vacuum);
    let (qb, pb) = pos(0b00, PhotonConf::One(0));
    assert_eq!(qa, 1);
    assert_eq!(qa, qb);
    let amp = h[qa][(pa, pb)];
    assert!((amp - -gamma[1][0]).norm() < 1e-14, "exchange amp {amp}");
    assert!((h[qa][(pb, pa)] - (-gamma[1][0]).conj()).norm() < 1e-14);

    // Bosonic enhancement: lowering atom 0 into an already occupied mode
    // carries sqrt(2).
    let (qc, pc) = pos(0b01, PhotonConf::One(1));
    let (qd, pd) = pos(0b00, PhotonConf::Two(1, 1));
    assert_eq!(qc, 2);
    assert_eq!(qc, qd);
    let amp = h[qc][(pc, pd)];
    let want = -gamma[0][1] * 2.0f64.sqrt();
    assert!((amp - want).norm() < 1e-14, "sqrt(2) amp {amp} vs {want}");

    // Mixed two-photon state Two(0,1) connects to both single-photon
    // atom-excited states without the enhancement factor.
    let (qe, pe) = pos(0b01, PhotonConf::One(0));
    let (qf, pf) = pos(0b00, PhotonConf::Two(0, 1));
    assert_eq!(qe, qf);
    let amp = h[qe][(pe, pf)];
    assert!((amp - -gamma[0][1]).norm() < 1e-14, "cross-mode amp {amp}");

    // Every block is exactly Hermitian.
    for hb in &h {
        for i in 0..hb.nrows() {
            for j in 0..hb.ncols() {
                assert_eq!(hb[(i, j)], hb[(j, i)].conj());
            }
        }
    }
}
