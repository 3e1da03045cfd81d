//! Weighted-graph phase bookkeeping: the adjacency matrix of pairwise phases,
//! its restriction to support/complement couplings, and the phase-modified
//! transfer operators used by the reduced-density-matrix contraction.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{RageError, Result};
use crate::linalg::{kron, CMat};
use crate::mps::MpsTensorSet;

pub const DEFAULT_S_MAX: usize = 4;

/// Symmetric N x N matrix of pairwise phases in [0, 2pi), zero diagonal.
/// A sparse edge list (upper triangle, nonzero entries) is kept alongside the
/// dense matrix for O(degree) lookups.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyPhaseMatrix {
    n_sites: usize,
    phases: Array2<f64>,
    edges: BTreeSet<(usize, usize)>,
}

fn wrap_phase(phi: f64) -> f64 {
    let mut p = phi % TAU;
    if p < 0.0 {
        p += TAU;
    }
    // -1e-18 % TAU rounds to TAU itself
    if p >= TAU {
        p = 0.0;
    }
    p
}

impl AdjacencyPhaseMatrix {
    pub fn zeros(n_sites: usize) -> Self {
        Self {
            n_sites,
            phases: Array2::zeros((n_sites, n_sites)),
            edges: BTreeSet::new(),
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn phase(&self, k: usize, l: usize) -> f64 {
        self.phases[(k, l)]
    }

    pub fn dense(&self) -> &Array2<f64> {
        &self.phases
    }

    /// Stores phi mod 2pi at (k,l) and (l,k). The diagonal is untouchable.
    pub fn set_phase(&mut self, k: usize, l: usize, phi: f64) -> Result<()> {
        self.check(k)?;
        self.check(l)?;
        if k == l {
            return Err(RageError::EqualSites(k));
        }
        let p = wrap_phase(phi);
        self.phases[(k, l)] = p;
        self.phases[(l, k)] = p;
        let key = (k.min(l), k.max(l));
        if p == 0.0 {
            self.edges.remove(&key);
        } else {
            self.edges.insert(key);
        }
        Ok(())
    }

    pub fn add_phase(&mut self, k: usize, l: usize, phi: f64) -> Result<()> {
        let cur = self.phase(k, l);
        self.set_phase(k, l, cur + phi)
    }

    /// Upper-triangle nonzero edges.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.edges.iter().map(move |&(k, l)| (k, l, self.phases[(k, l)]))
    }

    pub fn is_zero(&self) -> bool {
        self.edges.is_empty()
    }

    fn check(&self, site: usize) -> Result<()> {
        if site >= self.n_sites {
            return Err(RageError::SiteOutOfRange {
                site,
                n_sites: self.n_sites,
            });
        }
        Ok(())
    }
}

/// The boundary-coupling restriction omega of an adjacency matrix: entries
/// survive exactly when one index is in the support and the other in its
/// complement.
#[derive(Debug, Clone)]
pub struct RestrictedPhaseMatrix {
    pub omega: Array2<f64>,
    pub support: Vec<usize>,
}

/// A support set together with one bit per support site.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportAssignment {
    pub support: Vec<usize>,
    pub bits: Vec<u8>,
}

impl SupportAssignment {
    pub fn new(support: Vec<usize>, bits: Vec<u8>) -> Self {
        assert_eq!(support.len(), bits.len());
        debug_assert!(support.windows(2).all(|w| w[0] < w[1]));
        Self { support, bits }
    }
}

pub fn validate_support(support: &[usize], n_sites: usize) -> Result<Vec<usize>> {
    let mut sorted = support.to_vec();
    sorted.sort_unstable();
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            return Err(RageError::DuplicateSite(w[0]));
        }
    }
    for &s in &sorted {
        if s >= n_sites {
            return Err(RageError::SiteOutOfRange {
                site: s,
                n_sites,
            });
        }
    }
    Ok(sorted)
}

/// omega[k,l] = phi[k,l] when exactly one of k,l is in the support, zero
/// otherwise. Phases internal to the support are reported separately by
/// [`intra_support_phases`].
pub fn restrict_phases(
    phi: &AdjacencyPhaseMatrix,
    support: &[usize],
) -> Result<RestrictedPhaseMatrix> {
    let n = phi.n_sites();
    let support = validate_support(support, n)?;
    let mut omega = Array2::zeros((n, n));
    let in_s = |k: usize| support.binary_search(&k).is_ok();
    for (k, l, p) in phi.edges() {
        if in_s(k) != in_s(l) {
            omega[(k, l)] = p;
            omega[(l, k)] = p;
        }
    }
    Ok(RestrictedPhaseMatrix { omega, support })
}

/// |S| x |S| matrix of phases internal to the support, indexed by position in
/// the sorted support list.
pub fn intra_support_phases(phi: &AdjacencyPhaseMatrix, support: &[usize]) -> Result<Array2<f64>> {
    let support = validate_support(support, phi.n_sites())?;
    let m = support.len();
    let mut intra = Array2::zeros((m, m));
    for p in 0..m {
        for q in 0..m {
            if p != q {
                intra[(p, q)] = phi.phase(support[p], support[q]);
            }
        }
    }
    Ok(intra)
}

/// Diagonal of the 2^{|S|} unitary collecting all phase gates internal to the
/// support: entry for bits (s_{m_1},...,s_{m_|S|}) is
/// exp(i sum_{p<q} phi[m_p, m_q] s_{m_p} s_{m_q}). The first support site maps
/// to the most significant bit.
pub fn intra_support_phase_gate(
    phi: &AdjacencyPhaseMatrix,
    support: &[usize],
    s_max: usize,
) -> Result<Vec<Complex64>> {
    let support = validate_support(support, phi.n_sites())?;
    let m = support.len();
    if m > s_max {
        return Err(RageError::SupportTooLarge { got: m, max: s_max });
    }
    let intra = intra_support_phases(phi, &support)?;
    let dim = 1usize << m;
    let mut diag = Vec::with_capacity(dim);
    for idx in 0..dim {
        let bit = |p: usize| (idx >> (m - 1 - p)) & 1;
        let mut total = 0.0;
        for p in 0..m {
            if bit(p) == 0 {
                continue;
            }
            for q in (p + 1)..m {
                if bit(q) == 1 {
                    total += intra[(p, q)];
                }
            }
        }
        diag.push(Complex64::from_polar(1.0, total));
    }
    Ok(diag)
}

/// Scalar phase picked up by the l = 1 branch of the transfer operator at a
/// complement site: exp(i sum over support sites with bit 1 of omega[m, site]).
pub fn branch_phase(omega: &RestrictedPhaseMatrix, assign: &SupportAssignment, site: usize) -> Complex64 {
    let mut total = 0.0;
    for (p, &m) in assign.support.iter().enumerate() {
        if assign.bits[p] == 1 {
            total += omega.omega[(m, site)];
        }
    }
    Complex64::from_polar(1.0, total)
}

/// B_l at a complement site: A_l multiplied by the support-conditional phase
/// on the l = 1 branch, unchanged for l = 0. The phase is controlled by the
/// physical index l of the tensor being multiplied.
pub fn phase_modified_b(
    mps: &MpsTensorSet,
    site: usize,
    omega: &RestrictedPhaseMatrix,
    assign: &SupportAssignment,
    l: u8,
) -> Result<CMat> {
    mps.check_site(site)?;
    if assign.support.binary_search(&site).is_ok() {
        return Err(RageError::SiteInSupport(site));
    }
    let a = mps.tensor(site, l).clone();
    if l == 0 {
        return Ok(a);
    }
    let phase = branch_phase(omega, assign, site);
    Ok(a.mapv(|z| z * phase))
}

/// Phase-modified transfer operator at a complement site:
/// sum_l B_l(ket bits) (x) conj(B_l(bra bits)).
pub fn phase_modified_transfer(
    mps: &MpsTensorSet,
    site: usize,
    omega: &RestrictedPhaseMatrix,
    assign_s: &SupportAssignment,
    assign_r: &SupportAssignment,
) -> Result<CMat> {
    if assign_s.support != assign_r.support {
        return Err(RageError::SupportMismatch);
    }
    let b0s = phase_modified_b(mps, site, omega, assign_s, 0)?;
    let b0r = phase_modified_b(mps, site, omega, assign_r, 0)?;
    let b1s = phase_modified_b(mps, site, omega, assign_s, 1)?;
    let b1r = phase_modified_b(mps, site, omega, assign_r, 1)?;
    let mut t = kron(&b0s, &b0r.mapv(|z| z.conj()));
    t += &kron(&b1s, &b1r.mapv(|z| z.conj()));
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;
    use crate::mps::Boundary;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn phases_stored_mod_two_pi_and_symmetric() {
        let mut phi = AdjacencyPhaseMatrix::zeros(4);
        phi.set_phase(0, 2, 3.0 * TAU + 1.25).unwrap();
        assert!((phi.phase(0, 2) - 1.25).abs() < 1e-12);
        assert!((phi.phase(2, 0) - 1.25).abs() < 1e-12);
        phi.set_phase(0, 2, -0.5).unwrap();
        assert!((phi.phase(0, 2) - (TAU - 0.5)).abs() < 1e-12);
        assert!(phi.set_phase(1, 1, 0.3).is_err());
        assert_eq!(phi.edges().count(), 1);
    }

    #[test]
    fn restrict_zero_matrix() {
        let phi = AdjacencyPhaseMatrix::zeros(5);
        let r = restrict_phases(&phi, &[1, 3]).unwrap();
        assert!(r.omega.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn restrict_single_site_support() {
        // Sites are 0-based here: edges (0,1) = pi and (1,2) = pi/2, S = {1}.
        let mut phi = AdjacencyPhaseMatrix::zeros(3);
        phi.set_phase(0, 1, PI).unwrap();
        phi.set_phase(1, 2, PI / 2.0).unwrap();
        let r = restrict_phases(&phi, &[1]).unwrap();
        assert!((r.omega[(0, 1)] - PI).abs() < 1e-15);
        assert!((r.omega[(1, 0)] - PI).abs() < 1e-15);
        assert!((r.omega[(1, 2)] - PI / 2.0).abs() < 1e-15);
        assert!((r.omega[(2, 1)] - PI / 2.0).abs() < 1e-15);
        assert_eq!(r.omega.iter().filter(|&&x| x != 0.0).count(), 4);
    }

    #[test]
    fn restrict_excludes_intra_support_edge() {
        let mut phi = AdjacencyPhaseMatrix::zeros(3);
        phi.set_phase(0, 1, PI).unwrap();
        phi.set_phase(1, 2, PI / 2.0).unwrap();
        let r = restrict_phases(&phi, &[0, 1]).unwrap();
        assert_eq!(r.omega[(0, 1)], 0.0);
        assert!((r.omega[(1, 2)] - PI / 2.0).abs() < 1e-15);
        assert_eq!(r.omega.iter().filter(|&&x| x != 0.0).count(), 2);
    }

    #[test]
    fn restrict_rejects_bad_support() {
        let phi = AdjacencyPhaseMatrix::zeros(3);
        assert!(restrict_phases(&phi, &[1, 1]).is_err());
        assert!(restrict_phases(&phi, &[3]).is_err());
    }

    #[test]
    fn restriction_is_idempotent() {
        let mut phi = AdjacencyPhaseMatrix::zeros(6);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for k in 0..6 {
            for l in (k + 1)..6 {
                phi.set_phase(k, l, rng.gen::<f64>() * TAU).unwrap();
            }
        }
        let s = [1, 4];
        let r1 = restrict_phases(&phi, &s).unwrap();
        // re-restrict: rebuild an adjacency matrix from omega and restrict again
        let mut phi2 = AdjacencyPhaseMatrix::zeros(6);
        for k in 0..6 {
            for l in (k + 1)..6 {
                phi2.set_phase(k, l, r1.omega[(k, l)]).unwrap();
            }
        }
        let r2 = restrict_phases(&phi2, &s).unwrap();
        assert!(r1
            .omega
            .iter()
            .zip(r2.omega.iter())
            .all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn single_site_gate_is_identity() {
        let phi = AdjacencyPhaseMatrix::zeros(4);
        let g = intra_support_phase_gate(&phi, &[2], DEFAULT_S_MAX).unwrap();
        assert_eq!(g.len(), 2);
        assert!(g.iter().all(|z| (z - ONE).norm() < 1e-15));
    }

    #[test]
    fn pi_gate_is_controlled_z() {
        let mut phi = AdjacencyPhaseMatrix::zeros(2);
        phi.set_phase(0, 1, PI).unwrap();
        let g = intra_support_phase_gate(&phi, &[0, 1], DEFAULT_S_MAX).unwrap();
        let want = [1.0, 1.0, 1.0, -1.0];
        for (z, w) in g.iter().zip(want.iter()) {
            assert!((z - Complex64::new(*w, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn three_site_gate_matches_pairwise_product() {
        let mut phi = AdjacencyPhaseMatrix::zeros(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (k, l) in [(0, 1), (0, 2), (1, 2)] {
            phi.set_phase(k, l, rng.gen::<f64>() * TAU).unwrap();
        }
        let g = intra_support_phase_gate(&phi, &[0, 1, 2], DEFAULT_S_MAX).unwrap();
        // dense oracle: apply each controlled-phase gate to the 8-dim basis
        for idx in 0..8usize {
            let bit = |p: usize| (idx >> (2 - p)) & 1;
            let mut phase = Complex64::new(1.0, 0.0);
            for (k, l) in [(0, 1), (0, 2), (1, 2)] {
                if bit(k) == 1 && bit(l) == 1 {
                    phase *= Complex64::from_polar(1.0, phi.phase(k, l));
                }
            }
            assert!((g[idx] - phase).norm() < 1e-13);
        }
    }

    #[test]
    fn support_too_large_rejected() {
        let phi = AdjacencyPhaseMatrix::zeros(8);
        assert!(matches!(
            intra_support_phase_gate(&phi, &[0, 1, 2, 3, 4], 4),
            Err(RageError::SupportTooLarge { got: 5, max: 4 })
        ));
    }

    #[test]
    fn gate_entries_have_unit_modulus() {
        let mut phi = AdjacencyPhaseMatrix::zeros(4);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for k in 0..4 {
            for l in (k + 1)..4 {
                phi.set_phase(k, l, rng.gen::<f64>() * TAU).unwrap();
            }
        }
        let g = intra_support_phase_gate(&phi, &[0, 1, 2, 3], DEFAULT_S_MAX).unwrap();
        assert!(g.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn zero_omega_leaves_b_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mps = MpsTensorSet::random_gaussian(&mut rng, 4, 2, Boundary::Periodic);
        let phi = AdjacencyPhaseMatrix::zeros(4);
        let omega = restrict_phases(&phi, &[1]).unwrap();
        let assign = SupportAssignment::new(vec![1], vec![1]);
        for l in 0..2u8 {
            let b = phase_modified_b(&mps, 2, &omega, &assign, l).unwrap();
            assert!(b
                .iter()
                .zip(mps.tensor(2, l).iter())
                .all(|(x, y)| (x - y).norm() < 1e-15));
        }
    }

    #[test]
    fn pi_phase_flips_sign_of_b1() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mps = MpsTensorSet::random_gaussian(&mut rng, 4, 2, Boundary::Periodic);
        let mut phi = AdjacencyPhaseMatrix::zeros(4);
        phi.set_phase(1, 2, PI).unwrap();
        let omega = restrict_phases(&phi, &[1]).unwrap();
        let assign = SupportAssignment::new(vec![1], vec![1]);
        let b = phase_modified_b(&mps, 2, &omega, &assign, 1).unwrap();
        assert!(b
            .iter()
            .zip(mps.tensor(2, 1).iter())
            .all(|(x, y)| (x + y).norm() < 1e-14));
    }

    #[test]
    fn branch_phase_factorizes_over_support_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut phi = AdjacencyPhaseMatrix::zeros(5);
        for k in 0..5 {
            for l in (k + 1)..5 {
                phi.set_phase(k, l, rng.gen::<f64>() * TAU).unwrap();
            }
        }
        let omega = restrict_phases(&phi, &[0, 3]).unwrap();
        let both = SupportAssignment::new(vec![0, 3], vec![1, 1]);
        let only0 = SupportAssignment::new(vec![0, 3], vec![1, 0]);
        let only3 = SupportAssignment::new(vec![0, 3], vec![0, 1]);
        let site = 2;
        let lhs = branch_phase(&omega, &both, site);
        let rhs = branch_phase(&omega, &only0, site) * branch_phase(&omega, &only3, site);
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn site_in_support_rejected() {
        let mps = MpsTensorSet::product_state(Boundary::Open, &[0, 0, 0]);
        let phi = AdjacencyPhaseMatrix::zeros(3);
        let omega = restrict_phases(&phi, &[1]).unwrap();
        let assign = SupportAssignment::new(vec![1], vec![0]);
        assert!(matches!(
            phase_modified_b(&mps, 1, &omega, &assign, 0),
            Err(RageError::SiteInSupport(1))
        ));
    }

    #[test]
    fn zero_omega_transfer_reduces_to_norm_transfer() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mps = MpsTensorSet::random_gaussian(&mut rng, 4, 3, Boundary::Periodic);
        let phi = AdjacencyPhaseMatrix::zeros(4);
        let omega = restrict_phases(&phi, &[0]).unwrap();
        let a = SupportAssignment::new(vec![0], vec![1]);
        let t = phase_modified_transfer(&mps, 2, &omega, &a, &a).unwrap();
        let want = mps.norm_transfer(2);
        assert!(t.iter().zip(want.iter()).all(|(x, y)| (x - y).norm() < 1e-13));
    }

    #[test]
    fn equal_assignments_cancel_phases_entrywise() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let mps = MpsTensorSet::random_gaussian(&mut rng, 5, 2, Boundary::Periodic);
        let mut phi = AdjacencyPhaseMatrix::zeros(5);
        for k in 0..5 {
            for l in (k + 1)..5 {
                phi.set_phase(k, l, rng.gen::<f64>() * TAU).unwrap();
            }
        }
        let omega = restrict_phases(&phi, &[1, 3]).unwrap();
        let a = SupportAssignment::new(vec![1, 3], vec![1, 0]);
        let t = phase_modified_transfer(&mps, 4, &omega, &a, &a).unwrap();
        // matching bra/ket assignments: e^{i theta} * conj(e^{i theta}) = 1
        let want = mps.norm_transfer(4);
        assert!(t.iter().zip(want.iter()).all(|(x, y)| (x - y).norm() < 1e-13));
    }

    #[test]
    fn pi_phase_two_term_expansion() {
        // single support bit difference: T = E00 + sign * E11 with
        // sign = e^{i pi (delta_s - delta_r)}.
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let mps = MpsTensorSet::random_gaussian(&mut rng, 3, 2, Boundary::Periodic);
        let mut phi = AdjacencyPhaseMatrix::zeros(3);
        phi.set_phase(0, 1, PI).unwrap();
        let omega = restrict_phases(&phi, &[0]).unwrap();
        let s1 = SupportAssignment::new(vec![0], vec![1]);
        let r0 = SupportAssignment::new(vec![0], vec![0]);
        let t = phase_modified_transfer(&mps, 1, &omega, &s1, &r0).unwrap();
        let e00 = kron(mps.tensor(1, 0), &mps.tensor(1, 0).mapv(|z| z.conj()));
        let e11 = kron(mps.tensor(1, 1), &mps.tensor(1, 1).mapv(|z| z.conj()));
        let want = &e00 - &e11; // e^{i pi (1 - 0)} = -1
        assert!(t.iter().zip(want.iter()).all(|(x, y)| (x - y).norm() < 1e-13));
    }

    #[test]
    fn mismatched_supports_rejected() {
        let mps = MpsTensorSet::product_state(Boundary::Open, &[0, 0, 0]);
        let phi = AdjacencyPhaseMatrix::zeros(3);
        let omega = restrict_phases(&phi, &[0]).unwrap();
        let a = SupportAssignment::new(vec![0], vec![0]);
        let b = SupportAssignment::new(vec![1], vec![0]);
        assert!(matches!(
            phase_modified_transfer(&mps, 2, &omega, &a, &b),
            Err(RageError::SupportMismatch)
        ));
    }
}
