//! Matrix product state storage and the plain (graph-free) transfer-operator
//! contractions: norms, overlaps and local expectation values.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{RageError, Result};
use crate::linalg::{kron, trace, CMat, ONE, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Open,
    Periodic,
}

/// Per-site pair of complex matrices A_0, A_1 describing a spin-1/2 chain.
/// Open-boundary chains hold a 1xD row at the first site and a Dx1 column at
/// the last; every other tensor is DxD.
#[derive(Debug, Clone)]
pub struct MpsTensorSet {
    n_sites: usize,
    bond_dim: usize,
    boundary: Boundary,
    tensors: Vec<[CMat; 2]>,
}

/// Transfer operator E = A_s (x) conj(A_r); D^2 x D^2 in the bulk.
#[derive(Debug, Clone)]
pub struct TransferOperator {
    pub matrix: CMat,
}

impl MpsTensorSet {
    pub fn new(boundary: Boundary, bond_dim: usize, tensors: Vec<[CMat; 2]>) -> Result<Self> {
        assert!(bond_dim > 0, "bond dimension must be positive");
        let n_sites = tensors.len();
        assert!(n_sites >= 1, "chain must have at least one site");
        let set = Self {
            n_sites,
            bond_dim,
            boundary,
            tensors,
        };
        for site in 0..n_sites {
            let (wr, wc) = set.site_shape(site);
            for a in &set.tensors[site] {
                if a.dim() != (wr, wc) {
                    return Err(RageError::BadTensorShape {
                        site,
                        got_rows: a.nrows(),
                        got_cols: a.ncols(),
                        want_rows: wr,
                        want_cols: wc,
                    });
                }
                if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(RageError::NonFiniteEntry(site));
                }
            }
        }
        Ok(set)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn bond_dim(&self) -> usize {
        self.bond_dim
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Expected (rows, cols) of the tensors at `site`.
    pub fn site_shape(&self, site: usize) -> (usize, usize) {
        match self.boundary {
            Boundary::Periodic => (self.bond_dim, self.bond_dim),
            Boundary::Open => {
                let r = if site == 0 { 1 } else { self.bond_dim };
                let c = if site == self.n_sites - 1 { 1 } else { self.bond_dim };
                (r, c)
            }
        }
    }

    pub fn tensor(&self, site: usize, s: u8) -> &CMat {
        &self.tensors[site][s as usize]
    }

    pub fn tensor_mut(&mut self, site: usize, s: u8) -> &mut CMat {
        &mut self.tensors[site][s as usize]
    }

    pub fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.n_sites {
            return Err(RageError::SiteOutOfRange {
                site,
                n_sites: self.n_sites,
            });
        }
        Ok(())
    }

    /// Computational-basis product state with the given bits, D = 1.
    pub fn product_state(boundary: Boundary, bits: &[u8]) -> Self {
        let tensors = bits
            .iter()
            .map(|&b| {
                let mut pair = [CMat::zeros((1, 1)), CMat::zeros((1, 1))];
                pair[b as usize][(0, 0)] = ONE;
                pair
            })
            .collect();
        Self::new(boundary, 1, tensors).expect("product state tensors are valid")
    }

    /// D = 1 product state with per-site amplitude pairs (a0, a1).
    pub fn product_state_amplitudes(boundary: Boundary, amps: &[(Complex64, Complex64)]) -> Self {
        let tensors = amps
            .iter()
            .map(|&(a0, a1)| {
                [
                    Array2::from_elem((1, 1), a0),
                    Array2::from_elem((1, 1), a1),
                ]
            })
            .collect();
        Self::new(boundary, 1, tensors).expect("product state tensors are valid")
    }

    /// Seedable complex Gaussian tensors, normalized to unit state norm.
    pub fn random_gaussian(
        rng: &mut impl Rng,
        n_sites: usize,
        bond_dim: usize,
        boundary: Boundary,
    ) -> Self {
        let mut tensors = Vec::with_capacity(n_sites);
        for site in 0..n_sites {
            let (r, c) = match boundary {
                Boundary::Periodic => (bond_dim, bond_dim),
                Boundary::Open => (
                    if site == 0 { 1 } else { bond_dim },
                    if site == n_sites - 1 { 1 } else { bond_dim },
                ),
            };
            let mut pair = [CMat::zeros((r, c)), CMat::zeros((r, c))];
            for a in pair.iter_mut() {
                for z in a.iter_mut() {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    *z = Complex64::new(re, im);
                }
            }
            tensors.push(pair);
        }
        let mut set = Self::new(boundary, bond_dim, tensors).expect("gaussian tensors are valid");
        set.normalize();
        set
    }

    /// Rescales tensors uniformly so the state norm is 1.
    pub fn normalize(&mut self) {
        let n2 = mps_norm_sq(self);
        if n2 > 0.0 {
            let s = Complex64::new(n2.powf(-0.5 / self.n_sites as f64), 0.0);
            for pair in self.tensors.iter_mut() {
                for a in pair.iter_mut() {
                    a.mapv_inplace(|z| z * s);
                }
            }
        }
    }

    /// Sum over the physical index of E_{l,l}: the norm transfer operator.
    pub fn norm_transfer(&self, site: usize) -> CMat {
        let mut t = kron(self.tensor(site, 0), &self.tensor(site, 0).mapv(|z| z.conj()));
        t += &kron(self.tensor(site, 1), &self.tensor(site, 1).mapv(|z| z.conj()));
        t
    }
}

/// E^{(site)}_{s,r} = A_s (x) conj(A_r).
pub fn transfer_operator(mps: &MpsTensorSet, site: usize, s: u8, r: u8) -> Result<TransferOperator> {
    mps.check_site(site)?;
    Ok(TransferOperator {
        matrix: kron(mps.tensor(site, s), &mps.tensor(site, r).mapv(|z| z.conj())),
    })
}

/// Multiplies the chain of operators and closes it: trace for periodic
/// chains, the trivial 1x1 entry for open ones (boundary vectors are the
/// chain-end tensors themselves).
pub fn chain_close(ops: impl IntoIterator<Item = CMat>) -> Complex64 {
    let mut acc: Option<CMat> = None;
    for op in ops {
        acc = Some(match acc {
            None => op,
            Some(p) => p.dot(&op),
        });
    }
    match acc {
        None => ONE,
        Some(p) => trace(&p),
    }
}

/// Squared 2-norm of the expanded amplitude vector.
pub fn mps_norm_sq(mps: &MpsTensorSet) -> f64 {
    chain_close((0..mps.n_sites()).map(|k| mps.norm_transfer(k))).re
}

/// <bra|ket> of the expanded vectors. Bond dimensions may differ; lengths and
/// boundary must match.
pub fn mps_overlap(bra: &MpsTensorSet, ket: &MpsTensorSet) -> Result<Complex64> {
    if bra.n_sites() != ket.n_sites() {
        return Err(RageError::LengthMismatch(bra.n_sites(), ket.n_sites()));
    }
    if bra.boundary() != ket.boundary() {
        return Err(RageError::BoundaryMismatch);
    }
    Ok(chain_close((0..bra.n_sites()).map(|k| {
        let mut t = kron(ket.tensor(k, 0), &bra.tensor(k, 0).mapv(|z| z.conj()));
        t += &kron(ket.tensor(k, 1), &bra.tensor(k, 1).mapv(|z| z.conj()));
        t
    })))
}

/// Unnormalized <psi| O |psi> for a product observable on `support` (sorted
/// ascending, matrices in the same order), using plain transfer operators
/// only. This is the graph-free MPS code path.
pub fn mps_local_expectation_raw(
    mps: &MpsTensorSet,
    support: &[usize],
    ops: &[CMat],
) -> Result<Complex64> {
    assert_eq!(support.len(), ops.len());
    for &s in support {
        mps.check_site(s)?;
    }
    Ok(chain_close((0..mps.n_sites()).map(|k| {
        match support.iter().position(|&m| m == k) {
            None => mps.norm_transfer(k),
            Some(pos) => {
                let o = &ops[pos];
                let mut t = CMat::zeros((0, 0));
                let mut first = true;
                for s in 0..2u8 {
                    for r in 0..2u8 {
                        let w = o[(r as usize, s as usize)];
                        if w == ZERO {
                            continue;
                        }
                        let e = kron(mps.tensor(k, s), &mps.tensor(k, r).mapv(|z| z.conj()))
                            .mapv(|z| z * w);
                        if first {
                            t = e;
                            first = false;
                        } else {
                            t += &e;
                        }
                    }
                }
                if first {
                    let (rr, cc) = mps.site_shape(k);
                    CMat::zeros((rr * rr, cc * cc))
                } else {
                    t
                }
            }
        }
    })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Brute-force amplitude of a bitstring by direct matrix products.
    fn amplitude(mps: &MpsTensorSet, bits: u32) -> Complex64 {
        let n = mps.n_sites();
        let mut acc: Option<CMat> = None;
        for k in 0..n {
            let b = ((bits >> (n - 1 - k)) & 1) as u8;
            let a = mps.tensor(k, b).clone();
            acc = Some(match acc {
                None => a,
                Some(p) => p.dot(&a),
            });
        }
        trace(&acc.unwrap())
    }

    fn dense(mps: &MpsTensorSet) -> Vec<Complex64> {
        (0..1u32 << mps.n_sites()).map(|b| amplitude(mps, b)).collect()
    }

    #[test]
    fn scalar_transfer_operator() {
        let a = c(0.3, 0.7);
        let b = c(-0.2, 0.5);
        let mps = MpsTensorSet::product_state_amplitudes(Boundary::Periodic, &[(a, b), (a, b)]);
        let e = transfer_operator(&mps, 1, 0, 1).unwrap();
        assert_eq!(e.matrix.dim(), (1, 1));
        assert!((e.matrix[(0, 0)] - a * b.conj()).norm() < 1e-15);
    }

    #[test]
    fn identity_tensors_give_identity_transfer() {
        let id = CMat::eye(2);
        let tensors = vec![[id.clone(), id.clone()]; 3];
        let mps = MpsTensorSet::new(Boundary::Periodic, 2, tensors).unwrap();
        for s in 0..2u8 {
            for r in 0..2u8 {
                let e = transfer_operator(&mps, 0, s, r).unwrap();
                assert!((&e.matrix - &CMat::eye(4)).iter().all(|z| z.norm() < 1e-15));
            }
        }
    }

    #[test]
    fn transfer_operator_matches_fourindex_bruteforce() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mps = MpsTensorSet::random_gaussian(&mut rng, 4, 3, Boundary::Periodic);
        let (s, r) = (1u8, 0u8);
        let e = transfer_operator(&mps, 2, s, r).unwrap();
        let a_s = mps.tensor(2, s);
        let a_r = mps.tensor(2, r);
        for i in 0..3 {
            for j in 0..3 {
                for p in 0..3 {
                    for q in 0..3 {
                        let want = a_s[(i, p)] * a_r[(j, q)].conj();
                        assert!((e.matrix[(i * 3 + j, p * 3 + q)] - want).norm() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn transfer_conjugation_symmetry() {
        // E_{s,r} equals E_{r,s} with the Kronecker factors swapped and
        // conjugated.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = 2;
        let mps = MpsTensorSet::random_gaussian(&mut rng, 3, d, Boundary::Periodic);
        let e01 = transfer_operator(&mps, 1, 0, 1).unwrap().matrix;
        let e10 = transfer_operator(&mps, 1, 1, 0).unwrap().matrix;
        for i in 0..d {
            for j in 0..d {
                for p in 0..d {
                    for q in 0..d {
                        let lhs = e01[(i * d + j, p * d + q)];
                        let rhs = e10[(j * d + i, q * d + p)].conj();
                        assert!((lhs - rhs).norm() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn site_out_of_range_rejected() {
        let mps = MpsTensorSet::product_state(Boundary::Open, &[0, 0]);
        assert!(matches!(
            transfer_operator(&mps, 2, 0, 0),
            Err(RageError::SiteOutOfRange { .. })
        ));
    }

    #[test]
    fn unit_product_state_norm() {
        let mps = MpsTensorSet::product_state(Boundary::Open, &[0, 0, 0, 0]);
        assert_abs_diff_eq!(mps_norm_sq(&mps), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn ghz_periodic_norm_is_two() {
        let a0 = array![[c(1.0, 0.0), ZERO], [ZERO, ZERO]];
        let a1 = array![[ZERO, ZERO], [ZERO, c(1.0, 0.0)]];
        let tensors = vec![[a0, a1]; 4];
        let mps = MpsTensorSet::new(Boundary::Periodic, 2, tensors).unwrap();
        assert_abs_diff_eq!(mps_norm_sq(&mps), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn norm_matches_dense_expansion() {
        for boundary in [Boundary::Open, Boundary::Periodic] {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let mps = MpsTensorSet::random_gaussian(&mut rng, 8, 3, boundary);
            let dense_norm: f64 = dense(&mps).iter().map(|z| z.norm_sqr()).sum();
            let fast = mps_norm_sq(&mps);
            assert!((fast - dense_norm).abs() <= 1e-12 * dense_norm.max(1.0));
        }
    }

    #[test]
    fn overlap_self_and_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = MpsTensorSet::random_gaussian(&mut rng, 5, 2, Boundary::Open);
        let self_ov = mps_overlap(&x, &x).unwrap();
        assert_abs_diff_eq!(self_ov.re, mps_norm_sq(&x), epsilon = 1e-12);
        assert_abs_diff_eq!(self_ov.im, 0.0, epsilon = 1e-12);

        let p00 = MpsTensorSet::product_state(Boundary::Open, &[0, 0]);
        let p11 = MpsTensorSet::product_state(Boundary::Open, &[1, 1]);
        assert!(mps_overlap(&p00, &p11).unwrap().norm() < 1e-14);
    }

    #[test]
    fn overlap_matches_dense_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let bra = MpsTensorSet::random_gaussian(&mut rng, 6, 3, Boundary::Periodic);
        let ket = MpsTensorSet::random_gaussian(&mut rng, 6, 2, Boundary::Periodic);
        let want: Complex64 = dense(&bra)
            .iter()
            .zip(dense(&ket).iter())
            .map(|(b, k)| b.conj() * k)
            .sum();
        let got = mps_overlap(&bra, &ket).unwrap();
        assert!((got - want).norm() < 1e-12);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let a = MpsTensorSet::product_state(Boundary::Open, &[0, 0]);
        let b = MpsTensorSet::product_state(Boundary::Open, &[0, 0, 0]);
        assert!(matches!(
            mps_overlap(&a, &b),
            Err(RageError::LengthMismatch(2, 3))
        ));
    }

    #[test]
    fn local_expectation_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mps = MpsTensorSet::random_gaussian(&mut rng, 6, 3, Boundary::Open);
        let z = array![[ONE, ZERO], [ZERO, -ONE]];
        let x = array![[ZERO, ONE], [ONE, ZERO]];
        let got = mps_local_expectation_raw(&mps, &[1, 4], &[z.clone(), x.clone()]).unwrap();
        // dense reference
        let v = dense(&mps);
        let n = 6;
        let mut want = ZERO;
        for (i, amp) in v.iter().enumerate() {
            let b1 = (i >> (n - 1 - 1)) & 1;
            let b4 = (i >> (n - 1 - 4)) & 1;
            // z diagonal, x flips bit 4
            let j = i ^ (1 << (n - 1 - 4));
            let zfac = if b1 == 0 { 1.0 } else { -1.0 };
            let _ = b4;
            want += v[j].conj() * amp * zfac;
        }
        assert!((got - want).norm() < 1e-11, "got {got} want {want}");
    }
}
