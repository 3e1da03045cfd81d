//! The graph-enhanced MPS state class and its efficient observables.
//!
//! A state is an MPS followed by commuting two-site phase gates (weighted by
//! an adjacency matrix) and single-qubit rotations. Reduced density matrices
//! on a small support are contracted with phase-modified transfer operators,
//! so local observables cost O(N D^5 4^{|S|}) instead of 2^N.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{RageError, Result};
use crate::graph::{
    intra_support_phase_gate, restrict_phases, validate_support, AdjacencyPhaseMatrix,
    RestrictedPhaseMatrix, DEFAULT_S_MAX,
};
use crate::linalg::{dagger, kron, unitarity_defect, CMat, C64, ONE, ZERO};
use crate::mps::{chain_close, mps_norm_sq, Boundary, MpsTensorSet};

pub const UNITARITY_TOL: f64 = 1e-10;

/// MPS part + adjacency phases + per-site 2x2 rotations.
#[derive(Debug, Clone)]
pub struct RageState {
    pub mps: MpsTensorSet,
    pub phi: AdjacencyPhaseMatrix,
    pub rotations: Vec<CMat>,
    unitary_rotations: bool,
    pub s_max: usize,
}

/// Hermitian 2^{|S|} matrix on an ordered support.
#[derive(Debug, Clone)]
pub struct ReducedDensityMatrix {
    pub support: Vec<usize>,
    pub matrix: CMat,
}

/// Superposition of deformed graph-state terms: amplitudes alpha_m and
/// per-term, per-site deformations d_{m,n}, sharing one adjacency matrix and
/// one set of rotations.
#[derive(Debug, Clone)]
pub struct WgsSuperposition {
    pub amplitudes: Vec<C64>,
    pub deformations: Vec<Vec<C64>>,
    pub phi: AdjacencyPhaseMatrix,
    pub rotations: Vec<CMat>,
}

impl RageState {
    pub fn new(
        mps: MpsTensorSet,
        phi: AdjacencyPhaseMatrix,
        rotations: Vec<CMat>,
    ) -> Result<Self> {
        let n = mps.n_sites();
        if phi.n_sites() != n {
            return Err(RageError::LengthMismatch(phi.n_sites(), n));
        }
        if rotations.len() != n {
            return Err(RageError::LengthMismatch(rotations.len(), n));
        }
        let unitary_rotations = rotations.iter().all(|v| unitarity_defect(v) <= UNITARITY_TOL);
        Ok(Self {
            mps,
            phi,
            rotations,
            unitary_rotations,
            s_max: DEFAULT_S_MAX,
        })
    }

    pub fn from_mps(mps: MpsTensorSet) -> Self {
        let n = mps.n_sites();
        Self {
            phi: AdjacencyPhaseMatrix::zeros(n),
            rotations: vec![CMat::eye(2); n],
            mps,
            unitary_rotations: true,
            s_max: DEFAULT_S_MAX,
        }
    }

    /// Seeded random MPS part, zero phases, identity rotations.
    pub fn random(rng: &mut impl Rng, n_sites: usize, bond_dim: usize, boundary: Boundary) -> Self {
        Self::from_mps(MpsTensorSet::random_gaussian(rng, n_sites, bond_dim, boundary))
    }

    pub fn n_sites(&self) -> usize {
        self.mps.n_sites()
    }

    pub fn rotations_unitary(&self) -> bool {
        self.unitary_rotations
    }

    /// Recompute the unitarity flag after mutating rotations.
    pub fn set_rotation(&mut self, site: usize, v: CMat) {
        self.rotations[site] = v;
        self.unitary_rotations = self
            .rotations
            .iter()
            .all(|v| unitarity_defect(v) <= UNITARITY_TOL);
    }

    pub fn rotations_are_identity(&self) -> bool {
        self.rotations.iter().all(|v| {
            (v[(0, 0)] - ONE).norm() < 1e-14
                && (v[(1, 1)] - ONE).norm() < 1e-14
                && v[(0, 1)].norm() < 1e-14
                && v[(1, 0)].norm() < 1e-14
        })
    }

    /// Squared norm. Phase gates and unitary rotations preserve the MPS norm;
    /// non-unitary rotations on at most s_max sites are handled by tracing
    /// the gram operators of those sites against the reduced state.
    pub fn norm_sq(&self) -> Result<f64> {
        if self.unitary_rotations {
            return Ok(mps_norm_sq(&self.mps));
        }
        let bad: Vec<usize> = (0..self.n_sites())
            .filter(|&j| unitarity_defect(&self.rotations[j]) > UNITARITY_TOL)
            .collect();
        if bad.len() > self.s_max {
            return Err(RageError::SupportTooLarge {
                got: bad.len(),
                max: self.s_max,
            });
        }
        let mut gram = CMat::eye(1);
        for &j in &bad {
            gram = kron(&gram, &dagger(&self.rotations[j]).dot(&self.rotations[j]));
        }
        let rho = self.assemble_rdm(&bad, false, false)?;
        let val = (&rho.matrix * &gram.t()).sum();
        Ok(val.re)
    }

    /// Reduced density matrix on `support`, normalized to unit trace.
    pub fn reduced_density_matrix(&self, support: &[usize]) -> Result<ReducedDensityMatrix> {
        let rdm = self.assemble_rdm(support, true, true)?;
        Ok(rdm)
    }

    /// tr(rho_S O) for a Hermitian observable on a strictly ascending support.
    pub fn expectation(&self, support: &[usize], observable: &CMat) -> Result<f64> {
        let rho = self.assemble_rdm(support, true, true)?;
        let val = trace_prod(&rho.matrix, observable);
        debug_assert!(val.im.abs() < 1e-8, "imaginary residue {}", val.im);
        Ok(val.re)
    }

    /// Unnormalized tr(rho~_S O) with intra-support gates and rotations
    /// folded in; O may be non-Hermitian. Used by the local update solvers.
    pub fn expectation_raw(&self, support: &[usize], observable: &CMat) -> Result<C64> {
        let rho = self.assemble_rdm(support, true, false)?;
        Ok(trace_prod(&rho.matrix, observable))
    }

    /// <op_j op_k> - <op_j><op_k> for single-site Hermitian op_j, op_k.
    pub fn two_point_correlation(
        &self,
        j: usize,
        k: usize,
        op_j: &CMat,
        op_k: &CMat,
    ) -> Result<f64> {
        if j == k {
            return Err(RageError::EqualSites(j));
        }
        let (a, b, oa, ob) = if j < k {
            (j, k, op_j, op_k)
        } else {
            (k, j, op_k, op_j)
        };
        let joint = self.expectation(&[a, b], &kron(oa, ob))?;
        let ea = self.expectation(&[a], oa)?;
        let eb = self.expectation(&[b], ob)?;
        Ok(joint - ea * eb)
    }

    /// Von Neumann block entropies (natural log) of the first L sites for
    /// each L in `cut_sizes`, via the dense oracle.
    pub fn entanglement_entropy_profile(&self, cut_sizes: &[usize]) -> Result<Vec<f64>> {
        let dense = crate::oracle::expand(self)?;
        cut_sizes
            .iter()
            .map(|&l| crate::oracle::exact_entropy(&dense, l))
            .collect()
    }

    /// Core contraction: unnormalized reduced matrix on `support` with
    /// intra-support phase gates always applied, rotation conjugation and
    /// normalization optional. Entries are computed for s >= r only and
    /// mirrored by Hermiticity.
    pub(crate) fn assemble_rdm(
        &self,
        support: &[usize],
        apply_rotations: bool,
        normalize: bool,
    ) -> Result<ReducedDensityMatrix> {
        let support = validate_support(support, self.n_sites())?;
        let m = support.len();
        if m > self.s_max {
            return Err(RageError::SupportTooLarge {
                got: m,
                max: self.s_max,
            });
        }
        let omega = restrict_phases(&self.phi, &support)?;
        let cache = TransferCache::new(&self.mps, &support);
        let spec = ChainSpec {
            mps: &self.mps,
            support: &support,
            omega: &omega,
        };
        let dim = 1usize << m;
        let mut raw = CMat::zeros((dim, dim));
        for s_idx in 0..dim {
            for r_idx in 0..=s_idx {
                let val = spec.chain_value(&cache, s_idx, r_idx);
                raw[(s_idx, r_idx)] = val;
                raw[(r_idx, s_idx)] = val.conj();
            }
        }
        // intra-support phase gates act as a diagonal conjugation
        let gate = intra_support_phase_gate(&self.phi, &support, self.s_max)?;
        for s in 0..dim {
            for r in 0..dim {
                raw[(s, r)] *= gate[s] * gate[r].conj();
            }
        }
        let mut rho = raw;
        if apply_rotations {
            let mut r_op = CMat::eye(1);
            for &j in &support {
                r_op = kron(&r_op, &self.rotations[j]);
            }
            rho = r_op.dot(&rho).dot(&dagger(&r_op));
        }
        if normalize {
            let n2 = self.norm_sq()?;
            if n2 <= 0.0 || !n2.is_finite() {
                return Err(RageError::ZeroNorm);
            }
            rho.mapv_inplace(|z| z / n2);
        }
        Ok(ReducedDensityMatrix {
            support,
            matrix: rho,
        })
    }
}

/// tr(A B) without forming the product.
pub(crate) fn trace_prod(a: &CMat, b: &CMat) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Per-site Kronecker transfer blocks K[s][r] = A_s (x) conj(A_r). Diagonal
/// blocks are built everywhere; off-diagonal blocks only at support sites.
pub(crate) struct TransferCache {
    pub blocks: Vec<[[Option<CMat>; 2]; 2]>,
}

impl TransferCache {
    pub fn new(mps: &MpsTensorSet, support: &[usize]) -> Self {
        let n = mps.n_sites();
        let mut blocks: Vec<[[Option<CMat>; 2]; 2]> = Vec::with_capacity(n);
        for k in 0..n {
            let full = support.binary_search(&k).is_ok();
            let mut site: [[Option<CMat>; 2]; 2] = [[None, None], [None, None]];
            for s in 0..2usize {
                for r in 0..2usize {
                    if s == r || full {
                        site[s][r] = Some(kron(
                            mps.tensor(k, s as u8),
                            &mps.tensor(k, r as u8).mapv(|z| z.conj()),
                        ));
                    }
                }
            }
            blocks.push(site);
        }
        Self { blocks }
    }

    pub fn block(&self, site: usize, s: u8, r: u8) -> &CMat {
        self.blocks[site][s as usize][r as usize]
            .as_ref()
            .expect("transfer block not cached")
    }
}

/// One contraction chain for a fixed support: plain transfer operators inside
/// the support, phase-modified ones outside.
pub(crate) struct ChainSpec<'a> {
    pub mps: &'a MpsTensorSet,
    pub support: &'a [usize],
    pub omega: &'a RestrictedPhaseMatrix,
}

impl<'a> ChainSpec<'a> {
    fn bit(idx: usize, pos: usize, m: usize) -> u8 {
        ((idx >> (m - 1 - pos)) & 1) as u8
    }

    /// Phase of the l = 1 branch at complement site `k` for combo indices
    /// (s_idx, r_idx): exp(i (theta_s - theta_r)).
    pub fn complement_phase(&self, k: usize, s_idx: usize, r_idx: usize) -> C64 {
        let m = self.support.len();
        let mut total = 0.0;
        for (p, &mp) in self.support.iter().enumerate() {
            let w = self.omega.omega[(mp, k)];
            if w == 0.0 {
                continue;
            }
            if Self::bit(s_idx, p, m) == 1 {
                total += w;
            }
            if Self::bit(r_idx, p, m) == 1 {
                total -= w;
            }
        }
        if total == 0.0 {
            ONE
        } else {
            C64::from_polar(1.0, total)
        }
    }

    /// Branches (ket bit, bra bit, weight) of the site operator at `k`.
    pub fn branches(&self, k: usize, s_idx: usize, r_idx: usize) -> Vec<(u8, u8, C64)> {
        let m = self.support.len();
        match self.support.iter().position(|&x| x == k) {
            Some(p) => vec![(Self::bit(s_idx, p, m), Self::bit(r_idx, p, m), ONE)],
            None => vec![(0, 0, ONE), (1, 1, self.complement_phase(k, s_idx, r_idx))],
        }
    }

    /// Site operator matrix at `k` for the given combo.
    pub fn site_op(&self, cache: &TransferCache, k: usize, s_idx: usize, r_idx: usize) -> CMat {
        let branches = self.branches(k, s_idx, r_idx);
        let mut acc: Option<CMat> = None;
        for (s, r, w) in branches {
            let blk = cache.block(k, s, r);
            let term = if w == ONE { blk.clone() } else { blk.mapv(|z| z * w) };
            acc = Some(match acc {
                None => term,
                Some(mut a) => {
                    a += &term;
                    a
                }
            });
        }
        acc.expect("at least one branch")
    }

    /// tr prod_k T_k for the given combo.
    pub fn chain_value(&self, cache: &TransferCache, s_idx: usize, r_idx: usize) -> C64 {
        chain_close((0..self.mps.n_sites()).map(|k| self.site_op(cache, k, s_idx, r_idx)))
    }
}

/// Embeds a superposition of M deformed graph-state terms as a state with
/// bond dimension M: diagonal MPS matrices with eta amplitudes (1 for l = 0,
/// exp(d_{m,n}) for l = 1), the first site additionally carrying alpha_m.
pub fn from_wgs(w: &WgsSuperposition) -> Result<RageState> {
    let m_terms = w.amplitudes.len();
    assert!(m_terms >= 1, "superposition needs at least one term");
    let n = w.phi.n_sites();
    if w.rotations.len() != n {
        return Err(RageError::LengthMismatch(w.rotations.len(), n));
    }
    for d in &w.deformations {
        if d.len() != n {
            return Err(RageError::LengthMismatch(d.len(), n));
        }
    }
    if w.deformations.len() != m_terms {
        return Err(RageError::LengthMismatch(w.deformations.len(), m_terms));
    }
    let mut tensors = Vec::with_capacity(n);
    for site in 0..n {
        let mut a0 = CMat::zeros((m_terms, m_terms));
        let mut a1 = CMat::zeros((m_terms, m_terms));
        for t in 0..m_terms {
            let head = if site == 0 { w.amplitudes[t] } else { ONE };
            a0[(t, t)] = head;
            a1[(t, t)] = head * w.deformations[t][site].exp();
        }
        tensors.push([a0, a1]);
    }
    let mps = MpsTensorSet::new(Boundary::Periodic, m_terms, tensors)?;
    RageState::new(mps, w.phi.clone(), w.rotations.clone())
}

impl ReducedDensityMatrix {
    pub fn hermiticity_defect(&self) -> f64 {
        let d = &self.matrix - &dagger(&self.matrix);
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn trace(&self) -> C64 {
        self.matrix.diag().sum()
    }

    /// Smallest eigenvalue; for PSD checks.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let (w, _) = crate::linalg::eigh_ascending(&self.matrix)?;
        Ok(w[0])
    }
}

/// Entropy -sum x ln x of a probability-like eigenvalue list; values below
/// 1e-12 are dropped.
pub fn entropy_from_eigenvalues(eigs: &[f64]) -> f64 {
    eigs.iter()
        .filter(|&&x| x > 1e-12)
        .map(|&x| -x * x.ln())
        .sum()
}

pub fn pauli_x() -> CMat {
    Array2::from_shape_vec((2, 2), vec![ZERO, ONE, ONE, ZERO]).unwrap()
}

pub fn pauli_y() -> CMat {
    Array2::from_shape_vec(
        (2, 2),
        vec![
            ZERO,
            Complex64::new(0.0, -1.0),
            Complex64::new(0.0, 1.0),
            ZERO,
        ],
    )
    .unwrap()
}

pub fn pauli_z() -> CMat {
    Array2::from_shape_vec((2, 2), vec![ONE, ZERO, ZERO, -ONE]).unwrap()
}

pub fn identity2() -> CMat {
    CMat::eye(2)
}

pub fn hadamard() -> CMat {
    let h = 1.0 / 2.0_f64.sqrt();
    Array2::from_shape_vec(
        (2, 2),
        vec![
            Complex64::new(h, 0.0),
            Complex64::new(h, 0.0),
            Complex64::new(h, 0.0),
            Complex64::new(-h, 0.0),
        ],
    )
    .unwrap()
}
