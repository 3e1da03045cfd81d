//! Two-body Hamiltonians as sums of Pauli-like terms, rotation conjugation,
//! energy evaluation, and the 2D transverse-field Ising builder with a snake
//! mapping onto the chain.

use rand::Rng;

use crate::error::{RageError, Result};
use crate::linalg::{dagger, kron, unitarity_defect, CMat, C64};
#[cfg(test)]
use crate::linalg::ONE;
use crate::state::{identity2, pauli_x, pauli_y, pauli_z, RageState};

/// One interaction term: a complex coefficient times a product of single-site
/// 2x2 matrices on at most two distinct sites.
#[derive(Debug, Clone)]
pub struct PauliTerm {
    pub coefficient: C64,
    pub factors: Vec<(usize, CMat)>,
}

impl PauliTerm {
    pub fn single(coefficient: C64, site: usize, op: CMat) -> Self {
        Self {
            coefficient,
            factors: vec![(site, op)],
        }
    }

    pub fn two_site(coefficient: C64, a: usize, op_a: CMat, b: usize, op_b: CMat) -> Self {
        assert_ne!(a, b, "two-site term needs distinct sites");
        let mut factors = vec![(a, op_a), (b, op_b)];
        factors.sort_by_key(|f| f.0);
        Self {
            coefficient,
            factors,
        }
    }

    /// Ascending site list.
    pub fn support(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.0).collect()
    }

    /// Kronecker product of the factors, ordered by site.
    pub fn observable(&self) -> CMat {
        let mut m = CMat::eye(1);
        for (_, op) in &self.factors {
            m = kron(&m, op);
        }
        m
    }
}

#[derive(Debug, Clone)]
pub struct Hamiltonian {
    pub n_sites: usize,
    pub terms: Vec<PauliTerm>,
}

impl Hamiltonian {
    /// Validates that term sites are in range and distinct per term, and that
    /// the operator sum is Hermitian support set by support set.
    pub fn new(n_sites: usize, terms: Vec<PauliTerm>) -> Result<Self> {
        for t in &terms {
            let supp = t.support();
            if supp.len() > 2 {
                return Err(RageError::SupportTooLarge {
                    got: supp.len(),
                    max: 2,
                });
            }
            for w in supp.windows(2) {
                if w[0] == w[1] {
                    return Err(RageError::DuplicateSite(w[0]));
                }
            }
            for &s in &supp {
                if s >= n_sites {
                    return Err(RageError::SiteOutOfRange {
                        site: s,
                        n_sites,
                    });
                }
            }
            if !t.coefficient.is_finite() {
                return Err(RageError::NonFiniteEntry(supp[0]));
            }
        }
        let h = Self { n_sites, terms };
        let defect = h.hermiticity_defect();
        if defect > 1e-10 {
            return Err(RageError::NonHermitianHamiltonian(defect));
        }
        Ok(h)
    }

    /// Largest Hermiticity violation over the per-support-set summed blocks.
    fn hermiticity_defect(&self) -> f64 {
        use std::collections::HashMap;
        let mut blocks: HashMap<Vec<usize>, CMat> = HashMap::new();
        for t in &self.terms {
            let supp = t.support();
            let dim = 1usize << supp.len();
            let obs = t.observable().mapv(|z| z * t.coefficient);
            blocks
                .entry(supp)
                .and_modify(|b| *b += &obs)
                .or_insert_with(|| {
                    let mut m = CMat::zeros((dim, dim));
                    m += &obs;
                    m
                });
        }
        let mut worst = 0.0_f64;
        for b in blocks.values() {
            let d = b - &dagger(b);
            worst = worst.max(d.iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
        worst
    }
}

/// Bijection between lattice coordinates and chain positions.
#[derive(Debug, Clone)]
pub struct LatticeMap {
    pub rows: usize,
    pub cols: usize,
    order: Vec<usize>, // order[r * cols + c] = chain index
}

impl LatticeMap {
    /// Boustrophedon path: even rows left-to-right, odd rows right-to-left.
    pub fn snake(rows: usize, cols: usize) -> Self {
        let mut order = vec![0usize; rows * cols];
        let mut chain = 0usize;
        for r in 0..rows {
            let cs: Vec<usize> = if r % 2 == 0 {
                (0..cols).collect()
            } else {
                (0..cols).rev().collect()
            };
            for c in cs {
                order[r * cols + c] = chain;
                chain += 1;
            }
        }
        Self { rows, cols, order }
    }

    pub fn custom(rows: usize, cols: usize, order: Vec<usize>) -> Result<Self> {
        if order.len() != rows * cols {
            return Err(RageError::BadLatticeMap(format!(
                "order has {} entries for a {}x{} lattice",
                order.len(),
                rows,
                cols
            )));
        }
        let mut seen = vec![false; order.len()];
        for &x in &order {
            if x >= order.len() || seen[x] {
                return Err(RageError::BadLatticeMap(format!(
                    "order is not a bijection (offending entry {x})"
                )));
            }
            seen[x] = true;
        }
        Ok(Self { rows, cols, order })
    }

    pub fn chain_index(&self, r: usize, c: usize) -> usize {
        self.order[r * self.cols + c]
    }
}

/// 2D transverse-field Ising on a periodic lattice:
/// H = J sum_<a,b> Z_a Z_b + B sum_a X_a, J = +1 by default. Wrap edges on
/// 2-wide lattices duplicate direct edges and are kept (doubled coefficient),
/// matching a literal sum over the periodic edge multiset.
pub fn build_ising_2d(
    rows: usize,
    cols: usize,
    field_b: f64,
    coupling: f64,
    map: &LatticeMap,
) -> Hamiltonian {
    assert!(rows >= 2 && cols >= 2, "lattice must be at least 2x2");
    let j = C64::new(coupling, 0.0);
    let b = C64::new(field_b, 0.0);
    let mut terms = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let here = map.chain_index(r, c);
            let right = map.chain_index(r, (c + 1) % cols);
            let down = map.chain_index((r + 1) % rows, c);
            terms.push(PauliTerm::two_site(j, here, pauli_z(), right, pauli_z()));
            terms.push(PauliTerm::two_site(j, here, pauli_z(), down, pauli_z()));
        }
    }
    for r in 0..rows {
        for c in 0..cols {
            terms.push(PauliTerm::single(b, map.chain_index(r, c), pauli_x()));
        }
    }
    Hamiltonian::new(rows * cols, terms).expect("Ising terms are Hermitian")
}

/// Open 1D chain: H = J sum Z_i Z_{i+1} + B sum X_i.
pub fn build_ising_1d(n: usize, field_b: f64, coupling: f64) -> Hamiltonian {
    let j = C64::new(coupling, 0.0);
    let b = C64::new(field_b, 0.0);
    let mut terms = Vec::new();
    for i in 0..n.saturating_sub(1) {
        terms.push(PauliTerm::two_site(j, i, pauli_z(), i + 1, pauli_z()));
    }
    for i in 0..n {
        terms.push(PauliTerm::single(b, i, pauli_x()));
    }
    Hamiltonian::new(n, terms).expect("Ising terms are Hermitian")
}

/// Periodic 1D ring: H = J sum Z_i Z_{i+1 mod N} + B sum X_i.
pub fn build_ising_ring(n: usize, field_b: f64, coupling: f64) -> Hamiltonian {
    assert!(n >= 3, "a ring needs at least 3 sites");
    let j = C64::new(coupling, 0.0);
    let b = C64::new(field_b, 0.0);
    let mut terms = Vec::new();
    for i in 0..n {
        terms.push(PauliTerm::two_site(j, i, pauli_z(), (i + 1) % n, pauli_z()));
    }
    for i in 0..n {
        terms.push(PauliTerm::single(b, i, pauli_x()));
    }
    Hamiltonian::new(n, terms).expect("Ising terms are Hermitian")
}

/// H_V: every single-site factor P is replaced by V^dagger P V on its site.
pub fn conjugate_by_rotations(h: &Hamiltonian, rotations: &[CMat]) -> Result<Hamiltonian> {
    if rotations.len() != h.n_sites {
        return Err(RageError::LengthMismatch(rotations.len(), h.n_sites));
    }
    for (j, v) in rotations.iter().enumerate() {
        if unitarity_defect(v) > 1e-10 {
            return Err(RageError::NonUnitaryRotation(j));
        }
    }
    let terms = h
        .terms
        .iter()
        .map(|t| PauliTerm {
            coefficient: t.coefficient,
            factors: t
                .factors
                .iter()
                .map(|(site, op)| {
                    let v = &rotations[*site];
                    (*site, dagger(v).dot(op).dot(v))
                })
                .collect(),
        })
        .collect();
    Hamiltonian::new(h.n_sites, terms)
}

/// Unnormalized <psi| H |psi>.
pub fn energy_numerator(state: &RageState, h: &Hamiltonian) -> Result<C64> {
    let mut num = C64::new(0.0, 0.0);
    for term in &h.terms {
        let raw = state.expectation_raw(&term.support(), &term.observable())?;
        num += term.coefficient * raw;
    }
    Ok(num)
}

/// <psi|H|psi> / <psi|psi> with a single norm division.
pub fn energy(state: &RageState, h: &Hamiltonian) -> Result<f64> {
    let n2 = state.norm_sq()?;
    if n2 <= 0.0 || !n2.is_finite() {
        return Err(RageError::ZeroNorm);
    }
    let num = energy_numerator(state, h)?;
    debug_assert!(
        num.im.abs() <= 1e-8 * num.re.abs().max(1.0),
        "imaginary energy residue {}",
        num.im
    );
    Ok(num.re / n2)
}

/// Random 2-local Hamiltonian for property tests: `n_terms` two-site Pauli
/// products with real coefficients uniform in [-1, 1).
pub fn random_two_local(rng: &mut impl Rng, n_sites: usize, n_terms: usize) -> Hamiltonian {
    assert!(n_sites >= 2);
    let paulis = [identity2(), pauli_x(), pauli_y(), pauli_z()];
    let mut terms = Vec::with_capacity(n_terms);
    for _ in 0..n_terms {
        let a = rng.gen_range(0..n_sites);
        let mut b = rng.gen_range(0..n_sites);
        while b == a {
            b = rng.gen_range(0..n_sites);
        }
        let c = C64::new(rng.gen_range(-1.0..1.0), 0.0);
        let pa = paulis[rng.gen_range(0..4)].clone();
        let pb = paulis[rng.gen_range(1..4)].clone();
        terms.push(PauliTerm::two_site(c, a, pa, b, pb));
    }
    Hamiltonian::new(n_sites, terms).expect("Pauli products with real weights are Hermitian")
}

/// X terms become Z terms under Hadamard conjugation; used in tests.
pub fn hadamard_everywhere(n: usize) -> Vec<CMat> {
    vec![crate::state::hadamard(); n]
}

/// Identity rotations.
pub fn identity_rotations(n: usize) -> Vec<CMat> {
    vec![identity2(); n]
}
