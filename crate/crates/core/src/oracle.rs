//! Dense 2^N reference implementations used to verify every efficient code
//! path: state expansion, partial traces, exact diagonalization, fidelity and
//! block entropy. Everything here scales exponentially and is capped.

use ndarray::Array1;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{RageError, Result};
use crate::hamiltonian::Hamiltonian;
use crate::linalg::{eigh_ascending, CMat, CVec, C64, ONE, ZERO};
use crate::mps::Boundary;
use crate::state::{entropy_from_eigenvalues, RageState, ReducedDensityMatrix, WgsSuperposition};

pub const DEFAULT_ORACLE_CAP: usize = 16;

/// Full amplitude vector; site 0 maps to the most significant bit.
#[derive(Debug, Clone)]
pub struct DenseState {
    pub n_qubits: usize,
    pub amplitudes: CVec,
}

impl DenseState {
    pub fn new(n_qubits: usize, amplitudes: CVec) -> Self {
        assert_eq!(amplitudes.len(), 1usize << n_qubits);
        Self {
            n_qubits,
            amplitudes,
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn bit(&self, index: usize, site: usize) -> u8 {
        ((index >> (self.n_qubits - 1 - site)) & 1) as u8
    }

    pub fn site_mask(&self, site: usize) -> usize {
        1usize << (self.n_qubits - 1 - site)
    }
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(RageError::OracleCap { n, cap });
    }
    Ok(())
}

/// Dense expansion of a state: MPS amplitudes by direct matrix products,
/// then the pairwise phases, then the local rotations.
pub fn expand(state: &RageState) -> Result<DenseState> {
    expand_with_cap(state, DEFAULT_ORACLE_CAP)
}

pub fn expand_with_cap(state: &RageState, cap: usize) -> Result<DenseState> {
    let n = state.n_sites();
    check_cap(n, cap)?;
    let dim = 1usize << n;
    let mut amps = CVec::zeros(dim);

    // depth-first walk carrying the running matrix product
    fn walk(
        state: &RageState,
        site: usize,
        prefix: CMat,
        index: usize,
        amps: &mut CVec,
    ) {
        let n = state.n_sites();
        if site == n {
            let tr: C64 = prefix.diag().sum();
            amps[index] = tr;
            return;
        }
        for b in 0..2u8 {
            let next = prefix.dot(state.mps.tensor(site, b));
            walk(state, site + 1, next, (index << 1) | b as usize, amps);
        }
    }
    let init = match state.mps.boundary() {
        Boundary::Periodic => CMat::eye(state.mps.bond_dim()),
        Boundary::Open => CMat::eye(1),
    };
    walk(state, 0, init, 0, &mut amps);

    // phase layer
    let edges: Vec<(usize, usize, f64)> = state.phi.edges().collect();
    if !edges.is_empty() {
        for (idx, amp) in amps.iter_mut().enumerate() {
            let mut total = 0.0;
            for &(k, l, p) in &edges {
                let bk = (idx >> (n - 1 - k)) & 1;
                let bl = (idx >> (n - 1 - l)) & 1;
                if bk == 1 && bl == 1 {
                    total += p;
                }
            }
            if total != 0.0 {
                *amp *= C64::from_polar(1.0, total);
            }
        }
    }

    // rotation layer
    for j in 0..n {
        let v = &state.rotations[j];
        let is_id = (v[(0, 0)] - ONE).norm() < 1e-15
            && (v[(1, 1)] - ONE).norm() < 1e-15
            && v[(0, 1)].norm() < 1e-15
            && v[(1, 0)].norm() < 1e-15;
        if is_id {
            continue;
        }
        apply_single_site(&mut amps, n, j, v);
    }
    Ok(DenseState::new(n, amps))
}

/// In-place application of a 2x2 operator at `site`.
pub fn apply_single_site(amps: &mut CVec, n: usize, site: usize, m: &CMat) {
    let mask = 1usize << (n - 1 - site);
    for idx in 0..amps.len() {
        if idx & mask != 0 {
            continue;
        }
        let lo = amps[idx];
        let hi = amps[idx | mask];
        amps[idx] = m[(0, 0)] * lo + m[(0, 1)] * hi;
        amps[idx | mask] = m[(1, 0)] * lo + m[(1, 1)] * hi;
    }
}

/// Direct summation of a deformed-graph-state superposition: product states
/// |0> + e^{d}|1> weighted by alpha, then phase gates, then rotations.
pub fn expand_wgs_direct(w: &WgsSuperposition) -> Result<DenseState> {
    let n = w.phi.n_sites();
    check_cap(n, DEFAULT_ORACLE_CAP)?;
    let dim = 1usize << n;
    let mut amps = CVec::zeros(dim);
    for (t, alpha) in w.amplitudes.iter().enumerate() {
        for idx in 0..dim {
            let mut amp = *alpha;
            for site in 0..n {
                let b = (idx >> (n - 1 - site)) & 1;
                if b == 1 {
                    amp *= w.deformations[t][site].exp();
                }
            }
            amps[idx] += amp;
        }
    }
    for idx in 0..dim {
        let mut total = 0.0;
        for (k, l, p) in w.phi.edges() {
            if (idx >> (n - 1 - k)) & 1 == 1 && (idx >> (n - 1 - l)) & 1 == 1 {
                total += p;
            }
        }
        if total != 0.0 {
            amps[idx] *= C64::from_polar(1.0, total);
        }
    }
    for j in 0..n {
        apply_single_site(&mut amps, n, j, &w.rotations[j]);
    }
    Ok(DenseState::new(n, amps))
}

/// Applies the Hamiltonian to a dense vector term by term.
pub fn apply_hamiltonian(h: &Hamiltonian, v: &CVec, n: usize) -> CVec {
    let mut out = CVec::zeros(v.len());
    let mut scratch = CVec::zeros(v.len());
    for term in &h.terms {
        scratch.assign(v);
        for (site, op) in &term.factors {
            apply_single_site(&mut scratch, n, *site, op);
        }
        let c = term.coefficient;
        for (o, s) in out.iter_mut().zip(scratch.iter()) {
            *o += c * s;
        }
    }
    out
}

/// Lowest eigenpair of the dense Hamiltonian. Dense eigendecomposition up to
/// 12 qubits, restarted Lanczos with full reorthogonalization above.
pub fn exact_ground(h: &Hamiltonian) -> Result<(f64, DenseState)> {
    exact_ground_with_cap(h, DEFAULT_ORACLE_CAP)
}

pub fn exact_ground_with_cap(h: &Hamiltonian, cap: usize) -> Result<(f64, DenseState)> {
    let n = h.n_sites;
    check_cap(n, cap)?;
    if n <= 12 {
        let dim = 1usize << n;
        let mut mat = CMat::zeros((dim, dim));
        let mut basis = CVec::zeros(dim);
        for col in 0..dim {
            basis.fill(ZERO);
            basis[col] = ONE;
            let out = apply_hamiltonian(h, &basis, n);
            for row in 0..dim {
                mat[(row, col)] = out[row];
            }
        }
        let (w, v) = eigh_ascending(&mat)?;
        let ground = v.column(0).to_owned();
        let energy = w[0];
        let residual = residual_norm(h, &ground, energy, n);
        if residual > 1e-8 {
            return Err(RageError::EigenNoConvergence(residual));
        }
        Ok((energy, DenseState::new(n, ground)))
    } else {
        lanczos_ground(h, n)
    }
}

fn residual_norm(h: &Hamiltonian, v: &CVec, e: f64, n: usize) -> f64 {
    let hv = apply_hamiltonian(h, v, n);
    let mut acc = 0.0;
    for (a, b) in hv.iter().zip(v.iter()) {
        acc += (a - b * e).norm_sqr();
    }
    acc.sqrt()
}

fn lanczos_ground(h: &Hamiltonian, n: usize) -> Result<(f64, DenseState)> {
    use rand::SeedableRng;
    let dim = 1usize << n;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x4c414e43);
    let mut v0 = CVec::from_shape_fn(dim, |_| {
        C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    normalize(&mut v0);
    let krylov = 100.min(dim);
    for _restart in 0..30 {
        let mut basis: Vec<CVec> = vec![v0.clone()];
        let mut alphas = Vec::new();
        let mut betas = Vec::new();
        for j in 0..krylov {
            let mut w = apply_hamiltonian(h, &basis[j], n);
            let alpha = inner(&basis[j], &w).re;
            alphas.push(alpha);
            // full reorthogonalization, twice for stability
            for _ in 0..2 {
                for b in &basis {
                    let c = inner(b, &w);
                    for (wi, bi) in w.iter_mut().zip(b.iter()) {
                        *wi -= c * bi;
                    }
                }
            }
            let beta = norm(&w);
            if beta < 1e-13 {
                break;
            }
            if j + 1 < krylov {
                betas.push(beta);
                let scale = 1.0 / beta;
                basis.push(w.mapv(|z| z * scale));
            }
        }
        // tridiagonal eigenproblem via the dense Hermitian solver
        let m = alphas.len();
        let mut tri = CMat::zeros((m, m));
        for i in 0..m {
            tri[(i, i)] = C64::new(alphas[i], 0.0);
            if i + 1 < m && i < betas.len() {
                tri[(i, i + 1)] = C64::new(betas[i], 0.0);
                tri[(i + 1, i)] = C64::new(betas[i], 0.0);
            }
        }
        let (w, z) = eigh_ascending(&tri)?;
        let theta = w[0];
        let mut ritz = CVec::zeros(dim);
        for (j, b) in basis.iter().enumerate() {
            let c = z[(j, 0)];
            for (r, bi) in ritz.iter_mut().zip(b.iter()) {
                *r += c * bi;
            }
        }
        normalize(&mut ritz);
        let res = residual_norm(h, &ritz, theta, n);
        if res <= 1e-8 {
            return Ok((theta, DenseState::new(n, ritz)));
        }
        v0 = ritz;
    }
    let final_res = residual_norm(h, &v0, inner(&v0, &apply_hamiltonian(h, &v0, n)).re, n);
    Err(RageError::EigenNoConvergence(final_res))
}

pub fn inner(a: &CVec, b: &CVec) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

fn norm(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(v: &mut CVec) {
    let s = norm(v);
    if s > 0.0 {
        v.mapv_inplace(|z| z / s);
    }
}

/// |<a|b>|^2 / (|a|^2 |b|^2).
pub fn fidelity(a: &DenseState, b: &DenseState) -> Result<f64> {
    if a.n_qubits != b.n_qubits {
        return Err(RageError::LengthMismatch(a.n_qubits, b.n_qubits));
    }
    let na = a.norm_sq();
    let nb = b.norm_sq();
    if na <= 0.0 || nb <= 0.0 {
        return Err(RageError::ZeroNorm);
    }
    Ok(inner(&a.amplitudes, &b.amplitudes).norm_sqr() / (na * nb))
}

/// Partial trace onto an ordered support set by index summation; normalized
/// to unit trace.
pub fn exact_rdm(v: &DenseState, support: &[usize]) -> Result<ReducedDensityMatrix> {
    let n = v.n_qubits;
    let support = crate::graph::validate_support(support, n)?;
    let m = support.len();
    let dim_s = 1usize << m;
    let env_sites: Vec<usize> = (0..n).filter(|s| !support.contains(s)).collect();
    let dim_e = 1usize << env_sites.len();
    let mut rho = CMat::zeros((dim_s, dim_s));
    let index_of = |s_idx: usize, e_idx: usize| -> usize {
        let mut full = 0usize;
        for (p, &site) in support.iter().enumerate() {
            if (s_idx >> (m - 1 - p)) & 1 == 1 {
                full |= 1 << (n - 1 - site);
            }
        }
        for (p, &site) in env_sites.iter().enumerate() {
            if (e_idx >> (env_sites.len() - 1 - p)) & 1 == 1 {
                full |= 1 << (n - 1 - site);
            }
        }
        full
    };
    for e in 0..dim_e {
        for s in 0..dim_s {
            let zs = v.amplitudes[index_of(s, e)];
            if zs == ZERO {
                continue;
            }
            for r in 0..dim_s {
                rho[(s, r)] += zs * v.amplitudes[index_of(r, e)].conj();
            }
        }
    }
    let tr: C64 = rho.diag().sum();
    if tr.re <= 0.0 {
        return Err(RageError::ZeroNorm);
    }
    rho.mapv_inplace(|z| z / tr.re);
    Ok(ReducedDensityMatrix {
        support,
        matrix: rho,
    })
}

/// Von Neumann entropy (natural log) of the first `l` sites.
pub fn exact_entropy(v: &DenseState, l: usize) -> Result<f64> {
    let support: Vec<usize> = (0..l).collect();
    if l == 0 {
        return Ok(0.0);
    }
    let rho = exact_rdm(v, &support)?;
    let (w, _) = eigh_ascending(&rho.matrix)?;
    Ok(entropy_from_eigenvalues(w.as_slice().unwrap()))
}

/// Haar-random single-qubit unitary from two random complex Gaussians.
pub fn random_unitary_2x2(rng: &mut impl Rng) -> CMat {
    use rand_distr::StandardNormal;
    let mut draw = || -> C64 {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    };
    let a = draw();
    let b = draw();
    let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
    let (a, b) = (a / n, b / n);
    // second column orthogonal, random relative phase
    let phase = C64::from_polar(1.0, rng.gen::<f64>() * std::f64::consts::TAU);
    let mut u = CMat::zeros((2, 2));
    u[(0, 0)] = a;
    u[(1, 0)] = b;
    u[(0, 1)] = -b.conj() * phase;
    u[(1, 1)] = a.conj() * phase;
    u
}

/// Random dense state with unit norm.
pub fn random_dense(rng: &mut impl Rng, n: usize) -> DenseState {
    let dim = 1usize << n;
    let mut amps = Array1::from_shape_fn(dim, |_| {
        C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    let s = amps.iter().map(|z: &Complex64| z.norm_sqr()).sum::<f64>().sqrt();
    amps.mapv_inplace(|z| z / s);
    DenseState::new(n, amps)
}
