//! Cross-checks of every efficient contraction against the dense oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rage_core::graph::AdjacencyPhaseMatrix;
use rage_core::linalg::CVec;
use rage_core::mps::{mps_norm_sq, mps_overlap, Boundary, MpsTensorSet};
use rage_core::oracle;
use rage_core::state::{from_wgs, RageState, WgsSuperposition};

fn random_enhanced(
    rng: &mut ChaCha8Rng,
    n: usize,
    d: usize,
    boundary: Boundary,
) -> RageState {
    let mut state = RageState::random(rng, n, d, boundary);
    for j in 0..n {
        for k in (j + 1)..n {
            state
                .phi
                .set_phase(j, k, rng.gen::<f64>() * std::f64::consts::TAU)
                .unwrap();
        }
    }
    for j in 0..n {
        state.set_rotation(j, oracle::random_unitary_2x2(rng));
    }
    state
}

#[test]
fn norm_matches_dense_expansion() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for trial in 0..20 {
        let n = 4 + trial % 5;
        let d = 1 + trial % 4;
        let boundary = if trial % 2 == 0 {
            Boundary::Open
        } else {
            Boundary::Periodic
        };
        let state = random_enhanced(&mut rng, n, d, boundary);
        let dense = oracle::expand(&state).unwrap();
        let fast = state.norm_sq().unwrap();
        assert!(
            (fast - dense.norm_sq()).abs() <= 1e-10 * dense.norm_sq().max(1.0),
            "trial {trial}: {fast} vs {}",
            dense.norm_sq()
        );
    }
}

#[test]
fn mps_norm_and_overlap_match_dense() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for trial in 0..10 {
        let n = 4 + trial % 4;
        let a = MpsTensorSet::random_gaussian(&mut rng, n, 3, Boundary::Periodic);
        let b = MpsTensorSet::random_gaussian(&mut rng, n, 2, Boundary::Periodic);
        let da = oracle::expand(&RageState::from_mps(a.clone())).unwrap();
        let db = oracle::expand(&RageState::from_mps(b.clone())).unwrap();
        assert!((mps_norm_sq(&a) - da.norm_sq()).abs() < 1e-10 * da.norm_sq().max(1.0));
        let fast = mps_overlap(&a, &b).unwrap();
        let slow = oracle::inner(&da.amplitudes, &db.amplitudes);
        assert!((fast - slow).norm() < 1e-10 * slow.norm().max(1.0));
    }
}

#[test]
fn reduced_density_matrices_match_partial_trace() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for trial in 0..30 {
        let n = 4 + trial % 5;
        let d = 1 + trial % 4;
        let boundary = if trial % 2 == 0 {
            Boundary::Open
        } else {
            Boundary::Periodic
        };
        let state = random_enhanced(&mut rng, n, d, boundary);
        let dense = oracle::expand(&state).unwrap();
        for a in 0..n {
            for b in (a + 1)..n {
                let fast = state.reduced_density_matrix(&[a, b]).unwrap();
                let slow = oracle::exact_rdm(&dense, &[a, b]).unwrap();
                let worst = fast
                    .matrix
                    .iter()
                    .zip(slow.matrix.iter())
                    .map(|(x, y)| (x - y).norm())
                    .fold(0.0_f64, f64::max);
                assert!(worst < 1e-10, "trial {trial} S=({a},{b}): {worst:e}");
            }
        }
    }
}

#[test]
fn wgs_embedding_matches_direct_superposition() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for &m_terms in &[1usize, 2, 4] {
        let n = 6;
        let mut phi = AdjacencyPhaseMatrix::zeros(n);
        for j in 0..n {
            for k in (j + 1)..n {
                phi.set_phase(j, k, rng.gen::<f64>() * std::f64::consts::TAU)
                    .unwrap();
            }
        }
        let w = WgsSuperposition {
            amplitudes: (0..m_terms)
                .map(|_| rage_core::linalg::C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect(),
            deformations: (0..m_terms)
                .map(|_| {
                    (0..n)
                        .map(|_| {
                            rage_core::linalg::C64::new(
                                rng.gen::<f64>() - 0.5,
                                rng.gen::<f64>() - 0.5,
                            )
                        })
                        .collect()
                })
                .collect(),
            phi,
            rotations: (0..n).map(|_| oracle::random_unitary_2x2(&mut rng)).collect(),
        };
        let direct = oracle::expand_wgs_direct(&w).unwrap();
        let embedded = oracle::expand(&from_wgs(&w).unwrap()).unwrap();
        let diff: CVec = &direct.amplitudes - &embedded.amplitudes;
        let err = diff.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
        assert!(err < 1e-10, "M={m_terms}: max deviation {err:e}");
    }
}

#[test]
fn entropy_agrees_with_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let state = random_enhanced(&mut rng, 6, 2, Boundary::Open);
    let dense = oracle::expand(&state).unwrap();
    let profile = state.entanglement_entropy_profile(&[1, 2, 3]).unwrap();
    for (i, &l) in [1usize, 2, 3].iter().enumerate() {
        let want = oracle::exact_entropy(&dense, l).unwrap();
        assert!((profile[i] - want).abs() < 1e-10);
    }
}
