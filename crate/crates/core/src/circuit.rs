//! Quantum-circuit simulation on graph-enhanced states with identity
//! rotations: diagonal gates are exact (adjacency or tensor updates),
//! non-diagonal single-qubit gates are applied variationally by maximizing
//! the overlap with the exactly evolved state. A plain-MPS path mirrors the
//! same gate set for baseline comparisons.

use std::f64::consts::{PI, TAU};

use crate::error::{RageError, Result};
use crate::linalg::{kron, solve_psd_linear, unitarity_defect, CMat, CVec, C64, ONE};
use crate::mps::{chain_close, mps_norm_sq, MpsTensorSet};
use crate::optimize::{accumulate_block, environment, write_site};
use crate::state::RageState;

#[derive(Debug, Clone)]
pub enum Gate {
    /// Two-qubit controlled phase: diag(1, 1, 1, e^{i phi}).
    DiagonalPhase { j: usize, k: usize, phi: f64 },
    /// Single-qubit diagonal: diag(1, e^{i alpha}).
    LocalDiagonal { j: usize, alpha: f64 },
    /// Arbitrary single-qubit unitary.
    SingleQubit { j: usize, u: CMat },
}

#[derive(Debug, Clone)]
pub struct Circuit {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
}

fn wrap_phase(phi: f64) -> f64 {
    let mut p = phi.rem_euclid(TAU);
    if p >= TAU {
        p = 0.0;
    }
    p
}

impl Circuit {
    pub fn new(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        for g in &gates {
            match g {
                Gate::DiagonalPhase { j, k, .. } => {
                    if *j == *k {
                        return Err(RageError::EqualSites(*j));
                    }
                    for &s in [j, k] {
                        if s >= n_qubits {
                            return Err(RageError::SiteOutOfRange {
                                site: s,
                                n_sites: n_qubits,
                            });
                        }
                    }
                }
                Gate::LocalDiagonal { j, .. } => {
                    if *j >= n_qubits {
                        return Err(RageError::SiteOutOfRange {
                            site: *j,
                            n_sites: n_qubits,
                        });
                    }
                }
                Gate::SingleQubit { j, u } => {
                    if *j >= n_qubits {
                        return Err(RageError::SiteOutOfRange {
                            site: *j,
                            n_sites: n_qubits,
                        });
                    }
                    if unitarity_defect(u) > 1e-10 {
                        return Err(RageError::NonUnitaryRotation(*j));
                    }
                }
            }
        }
        Ok(Self { n_qubits, gates })
    }

    /// Line-oriented text format, one gate per line, 1-based site indices,
    /// phases in radians:
    ///   CP j k phi
    ///   LP j alpha
    ///   U1 j u00re u00im u01re u01im u10re u10im u11re u11im
    /// Blank lines and lines starting with '#' are skipped.
    pub fn parse(n_qubits: usize, text: &str) -> Result<Self> {
        let err = |line: usize, message: String| RageError::ParseError { line, message };
        let mut gates = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let tok: Vec<&str> = trimmed.split_whitespace().collect();
            let site = |s: &str| -> Result<usize> {
                let v: usize = s
                    .parse()
                    .map_err(|_| err(line, format!("bad site index '{s}'")))?;
                if v == 0 || v > n_qubits {
                    return Err(err(
                        line,
                        format!("site {v} out of range 1..={n_qubits}"),
                    ));
                }
                Ok(v - 1)
            };
            let real = |s: &str| -> Result<f64> {
                s.parse()
                    .map_err(|_| err(line, format!("bad number '{s}'")))
            };
            match tok[0] {
                "CP" => {
                    if tok.len() != 4 {
                        return Err(err(line, "CP needs: CP j k phi".to_string()));
                    }
                    gates.push(Gate::DiagonalPhase {
                        j: site(tok[1])?,
                        k: site(tok[2])?,
                        phi: wrap_phase(real(tok[3])?),
                    });
                }
                "LP" => {
                    if tok.len() != 3 {
                        return Err(err(line, "LP needs: LP j alpha".to_string()));
                    }
                    gates.push(Gate::LocalDiagonal {
                        j: site(tok[1])?,
                        alpha: wrap_phase(real(tok[2])?),
                    });
                }
                "U1" => {
                    if tok.len() != 10 {
                        return Err(err(line, "U1 needs: U1 j and 8 floats".to_string()));
                    }
                    let j = site(tok[1])?;
                    let mut vals = [0.0_f64; 8];
                    for (slot, s) in tok[2..].iter().enumerate() {
                        vals[slot] = real(s)?;
                    }
                    let mut u = CMat::zeros((2, 2));
                    u[(0, 0)] = C64::new(vals[0], vals[1]);
                    u[(0, 1)] = C64::new(vals[2], vals[3]);
                    u[(1, 0)] = C64::new(vals[4], vals[5]);
                    u[(1, 1)] = C64::new(vals[6], vals[7]);
                    if unitarity_defect(&u) > 1e-10 {
                        return Err(err(line, "U1 block is not unitary".to_string()));
                    }
                    gates.push(Gate::SingleQubit { j, u });
                }
                other => return Err(err(line, format!("unknown gate '{other}'"))),
            }
        }
        Circuit::new(n_qubits, gates)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for g in &self.gates {
            match g {
                Gate::DiagonalPhase { j, k, phi } => {
                    out.push_str(&format!("CP {} {} {:?}\n", j + 1, k + 1, phi));
                }
                Gate::LocalDiagonal { j, alpha } => {
                    out.push_str(&format!("LP {} {:?}\n", j + 1, alpha));
                }
                Gate::SingleQubit { j, u } => {
                    out.push_str(&format!(
                        "U1 {} {:?} {:?} {:?} {:?} {:?} {:?} {:?} {:?}\n",
                        j + 1,
                        u[(0, 0)].re,
                        u[(0, 0)].im,
                        u[(0, 1)].re,
                        u[(0, 1)].im,
                        u[(1, 0)].re,
                        u[(1, 0)].im,
                        u[(1, 1)].re,
                        u[(1, 1)].im,
                    ));
                }
            }
        }
        out
    }
}

fn require_identity_rotations(state: &RageState) -> Result<()> {
    if !state.rotations_are_identity() {
        let bad = (0..state.n_sites())
            .find(|&j| {
                let v = &state.rotations[j];
                (v[(0, 0)] - ONE).norm() >= 1e-14
                    || (v[(1, 1)] - ONE).norm() >= 1e-14
                    || v[(0, 1)].norm() >= 1e-14
                    || v[(1, 0)].norm() >= 1e-14
            })
            .unwrap_or(0);
        return Err(RageError::RotationsNotIdentity(bad));
    }
    Ok(())
}

/// Controlled-phase gate: exact, only the adjacency matrix changes.
pub fn apply_diagonal_two_qubit(state: &mut RageState, j: usize, k: usize, phi: f64) -> Result<()> {
    require_identity_rotations(state)?;
    state.phi.add_phase(j, k, phi)
}

/// Single-qubit diagonal gate: folds exactly into the site tensor.
pub fn apply_local_diagonal(state: &mut RageState, j: usize, alpha: f64) -> Result<()> {
    require_identity_rotations(state)?;
    state.mps.check_site(j)?;
    let ph = C64::from_polar(1.0, alpha);
    state.mps.tensor_mut(j, 1).mapv_inplace(|z| z * ph);
    Ok(())
}

/// Exact single-qubit gate on a bare MPS: A'_l = sum_m U[l, m] A_m.
pub fn mps_apply_single_qubit(mps: &mut MpsTensorSet, j: usize, u: &CMat) -> Result<()> {
    mps.check_site(j)?;
    let a0 = mps.tensor(j, 0).clone();
    let a1 = mps.tensor(j, 1).clone();
    *mps.tensor_mut(j, 0) = a0.mapv(|z| z * u[(0, 0)]) + a1.mapv(|z| z * u[(0, 1)]);
    *mps.tensor_mut(j, 1) = a0.mapv(|z| z * u[(1, 0)]) + a1.mapv(|z| z * u[(1, 1)]);
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SingleQubitConfig {
    /// Alternation passes (site updates + phase updates).
    pub max_passes: usize,
    /// Relative overlap improvement below which the alternation stops.
    pub overlap_tol: f64,
    pub pencil_cutoff: f64,
}

impl Default for SingleQubitConfig {
    fn default() -> Self {
        Self {
            max_passes: 20,
            overlap_tol: 1e-9,
            pencil_cutoff: crate::linalg::DEFAULT_PENCIL_CUTOFF,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VariationalOutcome {
    /// Achieved |<candidate|target>| / (|candidate| |target|).
    pub overlap: f64,
    /// False when the pass budget ran out before the tolerance was met.
    pub converged: bool,
    /// Normalized overlap after each alternation pass.
    pub history: Vec<f64>,
}

/// Cross-overlap setup: <bra(A', row')| U_j |ket(A, row)>, where the two
/// adjacency matrices agree except in the row/column of the pivot site `j`,
/// whose phases are given explicitly per state.
struct CrossSpec<'a> {
    ket: &'a MpsTensorSet,
    bra: &'a MpsTensorSet,
    pivot: usize,
    ket_row: &'a [f64],
    bra_row: &'a [f64],
    u: &'a CMat,
}

impl<'a> CrossSpec<'a> {
    /// Transfer-style operator at complement site `k`: the l = 1 branch
    /// carries the conditional phase exp(i (row[k] s_j - row'[k] r_j)).
    fn complement_op(&self, k: usize, s_j: u8, r_j: u8) -> CMat {
        let mut t = kron(self.ket.tensor(k, 0), &self.bra.tensor(k, 0).mapv(|z| z.conj()));
        let theta = self.ket_row[k] * s_j as f64 - self.bra_row[k] * r_j as f64;
        let ph = if theta == 0.0 {
            ONE
        } else {
            C64::from_polar(1.0, theta)
        };
        t += &kron(self.ket.tensor(k, 1), &self.bra.tensor(k, 1).mapv(|z| z.conj()))
            .mapv(|z| z * ph);
        t
    }

    fn site_op(&self, k: usize, s_j: u8, r_j: u8) -> CMat {
        if k == self.pivot {
            kron(
                self.ket.tensor(k, s_j),
                &self.bra.tensor(k, r_j).mapv(|z| z.conj()),
            )
        } else {
            self.complement_op(k, s_j, r_j)
        }
    }

    /// Full cross overlap, summed over the pivot's bra/ket bits weighted by
    /// the gate matrix element.
    fn overlap(&self) -> C64 {
        let n = self.ket.n_sites();
        let mut total = C64::new(0.0, 0.0);
        for s_j in 0..2u8 {
            for r_j in 0..2u8 {
                let w = self.u[(r_j as usize, s_j as usize)];
                if w.norm() < 1e-300 {
                    continue;
                }
                let val = chain_close((0..n).map(|k| self.site_op(k, s_j, r_j)));
                total += w * val;
            }
        }
        total
    }

    /// Derivative of the cross overlap with respect to the conjugated bra
    /// tensor entries at `site` (same vectorization as the update solvers).
    fn bra_site_vector(&self, site: usize) -> CVec {
        let (dl, dr) = self.bra.site_shape(site);
        let dd = dl * dr;
        let mut w_vec = CVec::zeros(2 * dd);
        for s_j in 0..2u8 {
            for r_j in 0..2u8 {
                let w = self.u[(r_j as usize, s_j as usize)];
                if w.norm() < 1e-300 {
                    continue;
                }
                let f = environment(self.bra, site, |k| self.site_op(k, s_j, r_j));
                // chain = sum F[(p,q),(i,l_bra-entry)] ket[i,p] conj(bra[jb,q])
                if site == self.pivot {
                    let a = self.ket.tensor(site, s_j);
                    for jb in 0..dl {
                        for q in 0..dr {
                            let mut acc = C64::new(0.0, 0.0);
                            for i in 0..dl {
                                for p in 0..dr {
                                    acc += f[(p * dr + q, i * dl + jb)] * a[(i, p)];
                                }
                            }
                            w_vec[r_j as usize * dd + jb * dr + q] += w * acc;
                        }
                    }
                } else {
                    for l in 0..2u8 {
                        let theta =
                            self.ket_row[site] * s_j as f64 - self.bra_row[site] * r_j as f64;
                        let ph = if l == 1 && theta != 0.0 {
                            C64::from_polar(1.0, theta)
                        } else {
                            ONE
                        };
                        let a = self.ket.tensor(site, l);
                        for jb in 0..dl {
                            for q in 0..dr {
                                let mut acc = C64::new(0.0, 0.0);
                                for i in 0..dl {
                                    for p in 0..dr {
                                        acc += f[(p * dr + q, i * dl + jb)] * a[(i, p)];
                                    }
                                }
                                w_vec[l as usize * dd + jb * dr + q] += w * ph * acc;
                            }
                        }
                    }
                }
            }
        }
        w_vec
    }
}

fn bra_norm_matrix(bra: &MpsTensorSet, site: usize) -> CMat {
    let (dl, dr) = bra.site_shape(site);
    let mut n_eff = CMat::zeros((2 * dl * dr, 2 * dl * dr));
    let f = environment(bra, site, |k| bra.norm_transfer(k));
    // the bra norm is the same quadratic form as the ket norm with the bra
    // tensor in both slots; F here is built on bra chains
    accumulate_block(&mut n_eff, &f, 0, 0, ONE, dl, dr);
    accumulate_block(&mut n_eff, &f, 1, 1, ONE, dl, dr);
    n_eff
}

fn normalized_overlap(cross: C64, bra: &MpsTensorSet, ket_norm_sq: f64) -> f64 {
    let denom = (mps_norm_sq(bra) * ket_norm_sq).sqrt();
    if denom <= 0.0 {
        0.0
    } else {
        cross.norm() / denom
    }
}

/// Alternating maximization of the normalized cross overlap over the bra
/// tensors and (optionally) the bra's pivot-row phases. Both maximization
/// substeps are exact, so the objective is non-decreasing.
#[allow(clippy::too_many_arguments)]
fn maximize_overlap(
    ket: &MpsTensorSet,
    ket_row: &[f64],
    pivot: usize,
    u: &CMat,
    mut bra: MpsTensorSet,
    mut bra_row: Vec<f64>,
    vary_phases: bool,
    cfg: &SingleQubitConfig,
) -> Result<(MpsTensorSet, Vec<f64>, VariationalOutcome)> {
    let n = ket.n_sites();
    let ket_norm_sq = mps_norm_sq(ket);
    let eval = |bra: &MpsTensorSet, row: &[f64]| -> C64 {
        CrossSpec {
            ket,
            bra,
            pivot,
            ket_row,
            bra_row: row,
            u,
        }
        .overlap()
    };
    let mut best = normalized_overlap(eval(&bra, &bra_row), &bra, ket_norm_sq);
    let mut history = vec![best];
    let mut converged = false;

    for _ in 0..cfg.max_passes {
        for site in 0..n {
            let w_vec = {
                let spec = CrossSpec {
                    ket,
                    bra: &bra,
                    pivot,
                    ket_row,
                    bra_row: &bra_row,
                    u,
                };
                spec.bra_site_vector(site)
            };
            let n_eff = bra_norm_matrix(&bra, site);
            match solve_psd_linear(&n_eff, &w_vec, cfg.pencil_cutoff) {
                Ok(v) => {
                    write_site(&mut bra, site, &v);
                    bra.normalize();
                }
                Err(RageError::DegenerateNorm) => continue,
                Err(e) => return Err(e),
            }
        }
        if vary_phases {
            for k in 0..n {
                if k == pivot {
                    continue;
                }
                let saved = bra_row[k];
                bra_row[k] = 0.0;
                let c0 = eval(&bra, &bra_row);
                bra_row[k] = PI;
                let cpi = eval(&bra, &bra_row);
                let alpha = (c0 + cpi) / 2.0;
                let beta = (c0 - cpi) / 2.0;
                if alpha.norm() < 1e-14 || beta.norm() < 1e-14 {
                    bra_row[k] = saved;
                    continue;
                }
                bra_row[k] = wrap_phase(beta.arg() - alpha.arg());
            }
        }
        let now = normalized_overlap(eval(&bra, &bra_row), &bra, ket_norm_sq);
        history.push(now);
        let improvement = now - best;
        let done = improvement.abs() <= cfg.overlap_tol * best.max(1e-300);
        best = best.max(now);
        if done {
            converged = true;
            break;
        }
    }
    Ok((
        bra,
        bra_row,
        VariationalOutcome {
            overlap: best,
            converged,
            history,
        },
    ))
}

/// Variational single-qubit gate: replaces the state by the best
/// approximation (within the class, varying all tensors and the phases on
/// the pivot's row) to U_j applied to it. Returns the achieved normalized
/// overlap.
pub fn apply_single_qubit(
    state: &mut RageState,
    j: usize,
    u: &CMat,
    cfg: &SingleQubitConfig,
) -> Result<VariationalOutcome> {
    require_identity_rotations(state)?;
    state.mps.check_site(j)?;
    if unitarity_defect(u) > 1e-10 {
        return Err(RageError::NonUnitaryRotation(j));
    }
    let n = state.n_sites();
    let ket = state.mps.clone();
    let ket_row: Vec<f64> = (0..n).map(|k| state.phi.phase(j, k)).collect();
    // initial guess: gate folded into the pivot tensor, phases unchanged
    let mut bra = ket.clone();
    mps_apply_single_qubit(&mut bra, j, u)?;
    let (bra, bra_row, outcome) =
        maximize_overlap(&ket, &ket_row, j, u, bra, ket_row.clone(), true, cfg)?;
    state.mps = bra;
    state.mps.normalize();
    for k in 0..n {
        if k != j {
            state.phi.set_phase(j, k, bra_row[k])?;
        }
    }
    Ok(outcome)
}

/// Variational controlled-phase gate on a bare MPS (the exact result leaves
/// the MPS class, so the best fixed-D approximation is found instead). The
/// target is the current state with one extra adjacency edge (j, k, phi).
pub fn mps_apply_cp_variational(
    mps: &mut MpsTensorSet,
    j: usize,
    k: usize,
    phi: f64,
    cfg: &SingleQubitConfig,
) -> Result<VariationalOutcome> {
    if j == k {
        return Err(RageError::EqualSites(j));
    }
    mps.check_site(j)?;
    mps.check_site(k)?;
    let n = mps.n_sites();
    let mut ket_row = vec![0.0; n];
    ket_row[k] = wrap_phase(phi);
    let bra_row = vec![0.0; n];
    let id = crate::state::identity2();
    let ket = mps.clone();
    let (bra, _row, outcome) =
        maximize_overlap(&ket, &ket_row, j, &id, ket.clone(), bra_row, false, cfg)?;
    *mps = bra;
    mps.normalize();
    Ok(outcome)
}

fn dense_apply_gate(amps: &mut CVec, n: usize, gate: &Gate) {
    match gate {
        Gate::DiagonalPhase { j, k, phi } => {
            let ph = C64::from_polar(1.0, *phi);
            let mj = 1usize << (n - 1 - j);
            let mk = 1usize << (n - 1 - k);
            for (idx, a) in amps.iter_mut().enumerate() {
                if idx & mj != 0 && idx & mk != 0 {
                    *a *= ph;
                }
            }
        }
        Gate::LocalDiagonal { j, alpha } => {
            let ph = C64::from_polar(1.0, *alpha);
            let mj = 1usize << (n - 1 - j);
            for (idx, a) in amps.iter_mut().enumerate() {
                if idx & mj != 0 {
                    *a *= ph;
                }
            }
        }
        Gate::SingleQubit { j, u } => crate::oracle::apply_single_site(amps, n, *j, u),
    }
}

/// Runs the circuit on a graph-enhanced state. With `track_fidelity`, the
/// exactly evolved dense vector is maintained alongside and the fidelity
/// after each gate is returned (requires N within the oracle cap).
pub fn run_circuit(
    state: &mut RageState,
    circuit: &Circuit,
    track_fidelity: bool,
    cfg: &SingleQubitConfig,
) -> Result<Vec<f64>> {
    if circuit.n_qubits != state.n_sites() {
        return Err(RageError::LengthMismatch(circuit.n_qubits, state.n_sites()));
    }
    let mut exact = if track_fidelity {
        Some(crate::oracle::expand(state)?)
    } else {
        None
    };
    let mut fidelities = Vec::new();
    for gate in &circuit.gates {
        match gate {
            Gate::DiagonalPhase { j, k, phi } => {
                apply_diagonal_two_qubit(state, *j, *k, *phi)?;
            }
            Gate::LocalDiagonal { j, alpha } => apply_local_diagonal(state, *j, *alpha)?,
            Gate::SingleQubit { j, u } => {
                apply_single_qubit(state, *j, u, cfg)?;
            }
        }
        if let Some(dense) = exact.as_mut() {
            let n = dense.n_qubits;
            dense_apply_gate(&mut dense.amplitudes, n, gate);
            let current = crate::oracle::expand(state)?;
            fidelities.push(crate::oracle::fidelity(&current, dense)?);
        }
    }
    Ok(fidelities)
}

/// Same circuit on a bare MPS: single-qubit gates exact, controlled phases
/// variational at fixed bond dimension.
pub fn run_circuit_mps(
    mps: &mut MpsTensorSet,
    circuit: &Circuit,
    track_fidelity: bool,
    cfg: &SingleQubitConfig,
) -> Result<Vec<f64>> {
    if circuit.n_qubits != mps.n_sites() {
        return Err(RageError::LengthMismatch(circuit.n_qubits, mps.n_sites()));
    }
    let mut exact = if track_fidelity {
        Some(crate::oracle::expand(&RageState::from_mps(mps.clone()))?)
    } else {
        None
    };
    let mut fidelities = Vec::new();
    for gate in &circuit.gates {
        match gate {
            Gate::DiagonalPhase { j, k, phi } => {
                mps_apply_cp_variational(mps, *j, *k, *phi, cfg)?;
            }
            Gate::LocalDiagonal { j, alpha } => {
                let ph = C64::from_polar(1.0, *alpha);
                mps.check_site(*j)?;
                mps.tensor_mut(*j, 1).mapv_inplace(|z| z * ph);
            }
            Gate::SingleQubit { j, u } => mps_apply_single_qubit(mps, *j, u)?,
        }
        if let Some(dense) = exact.as_mut() {
            let n = dense.n_qubits;
            dense_apply_gate(&mut dense.amplitudes, n, gate);
            let current = crate::oracle::expand(&RageState::from_mps(mps.clone()))?;
            fidelities.push(crate::oracle::fidelity(&current, dense)?);
        }
    }
    Ok(fidelities)
}

/// Dense-oracle evaluation of the same normalized overlap objective, for
/// cross-checking the efficient contraction.
pub fn dense_gate_overlap(candidate: &RageState, before: &RageState, gate: &Gate) -> Result<f64> {
    let mut target = crate::oracle::expand(before)?;
    let n = target.n_qubits;
    dense_apply_gate(&mut target.amplitudes, n, gate);
    let cand = crate::oracle::expand(candidate)?;
    let num = crate::oracle::inner(&cand.amplitudes, &target.amplitudes).norm();
    let den = (cand.norm_sq() * target.norm_sq()).sqrt();
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ZERO;
    use crate::mps::Boundary;
    use crate::oracle;
    use crate::state::hadamard;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(seed: u64, n: usize, d: usize, edge_prob: f64) -> RageState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = RageState::random(&mut rng, n, d, Boundary::Open);
        for j in 0..n {
            for k in (j + 1)..n {
                if rng.gen_bool(edge_prob) {
                    state.phi.set_phase(j, k, rng.gen::<f64>() * TAU).unwrap();
                }
            }
        }
        state
    }

    #[test]
    fn zero_phase_gate_is_identity() {
        let mut state = random_state(1, 4, 2, 0.5);
        let before = oracle::expand(&state).unwrap();
        apply_diagonal_two_qubit(&mut state, 0, 2, 0.0).unwrap();
        let after = oracle::expand(&state).unwrap();
        for (a, b) in before.amplitudes.iter().zip(after.amplitudes.iter()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn phase_gate_and_inverse_cancel() {
        let mut state = random_state(2, 4, 2, 0.5);
        let phi0 = state.phi.dense().clone();
        apply_diagonal_two_qubit(&mut state, 1, 3, 1.234).unwrap();
        apply_diagonal_two_qubit(&mut state, 1, 3, TAU - 1.234).unwrap();
        for (a, b) in phi0.iter().zip(state.phi.dense().iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn phase_gate_exact_against_oracle() {
        let mut state = random_state(3, 5, 2, 0.4);
        let mut dense = oracle::expand(&state).unwrap();
        let gate = Gate::DiagonalPhase {
            j: 1,
            k: 4,
            phi: 2.2,
        };
        apply_diagonal_two_qubit(&mut state, 1, 4, 2.2).unwrap();
        dense_apply_gate(&mut dense.amplitudes, 5, &gate);
        let now = oracle::expand(&state).unwrap();
        assert!(oracle::fidelity(&now, &dense).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn local_diagonal_pi_turns_plus_into_minus() {
        let amp = C64::new(0.5_f64.sqrt(), 0.0);
        let mps = MpsTensorSet::product_state_amplitudes(Boundary::Open, &[(amp, amp)]);
        let mut state = RageState::from_mps(mps);
        apply_local_diagonal(&mut state, 0, PI).unwrap();
        let dense = oracle::expand(&state).unwrap();
        assert!((dense.amplitudes[0] - amp).norm() < 1e-12);
        assert!((dense.amplitudes[1] + amp).norm() < 1e-12);
    }

    #[test]
    fn local_diagonal_exact_against_oracle() {
        let mut state = random_state(4, 5, 2, 0.4);
        let mut dense = oracle::expand(&state).unwrap();
        let gate = Gate::LocalDiagonal { j: 2, alpha: 0.9 };
        apply_local_diagonal(&mut state, 2, 0.9).unwrap();
        dense_apply_gate(&mut dense.amplitudes, 5, &gate);
        let now = oracle::expand(&state).unwrap();
        assert!(oracle::fidelity(&now, &dense).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn diagonal_gates_commute() {
        let base = random_state(5, 5, 2, 0.3);
        let gates = [(0usize, 2usize, 0.7), (1, 3, 1.9), (0, 4, 2.4)];
        let mut a = base.clone();
        for &(j, k, phi) in &gates {
            apply_diagonal_two_qubit(&mut a, j, k, phi).unwrap();
        }
        let mut b = base.clone();
        for &(j, k, phi) in gates.iter().rev() {
            apply_diagonal_two_qubit(&mut b, j, k, phi).unwrap();
        }
        for (x, y) in a.phi.dense().iter().zip(b.phi.dense().iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
        let da = oracle::expand(&a).unwrap();
        let db = oracle::expand(&b).unwrap();
        for (x, y) in da.amplitudes.iter().zip(db.amplitudes.iter()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn diagonal_unitary_absorbed_exactly() {
        let mut state = random_state(6, 5, 2, 0.5);
        let mut u = CMat::zeros((2, 2));
        u[(0, 0)] = ONE;
        u[(1, 1)] = C64::from_polar(1.0, 1.1);
        let before = state.clone();
        let out = apply_single_qubit(&mut state, 2, &u, &SingleQubitConfig::default()).unwrap();
        assert!(out.overlap > 1.0 - 1e-12, "overlap {}", out.overlap);
        let gate = Gate::SingleQubit { j: 2, u };
        let dense = dense_gate_overlap(&state, &before, &gate).unwrap();
        assert!(dense > 1.0 - 1e-10);
    }

    #[test]
    fn mps_without_graph_takes_any_single_qubit_gate_exactly() {
        let mut state = random_state(7, 5, 2, 0.0);
        assert!(state.phi.is_zero());
        let mut rng = ChaCha8Rng::seed_from_u64(70);
        let u = oracle::random_unitary_2x2(&mut rng);
        let before = state.clone();
        let out = apply_single_qubit(&mut state, 3, &u, &SingleQubitConfig::default()).unwrap();
        assert!(out.overlap > 1.0 - 1e-12, "overlap {}", out.overlap);
        let gate = Gate::SingleQubit { j: 3, u };
        assert!(dense_gate_overlap(&state, &before, &gate).unwrap() > 1.0 - 1e-10);
    }

    #[test]
    fn variational_gate_beats_naive_fold_and_matches_oracle_overlap() {
        let mut state = random_state(8, 6, 2, 1.0);
        let before = state.clone();
        let u = hadamard();
        let gate = Gate::SingleQubit { j: 3, u: u.clone() };

        // naive fold-only candidate
        let mut folded = before.clone();
        mps_apply_single_qubit(&mut folded.mps, 3, &u).unwrap();
        let naive = dense_gate_overlap(&folded, &before, &gate).unwrap();

        let out = apply_single_qubit(&mut state, 3, &u, &SingleQubitConfig::default()).unwrap();
        let achieved_dense = dense_gate_overlap(&state, &before, &gate).unwrap();
        // the efficient contraction agrees with the dense objective
        assert_abs_diff_eq!(out.overlap, achieved_dense, epsilon = 1e-9);
        assert!(
            out.overlap >= naive - 1e-10,
            "variational {} vs naive {naive}",
            out.overlap
        );
        // inner alternation is monotone
        for w in out.history.windows(2) {
            assert!(w[1] >= w[0] - 1e-10, "history {:?}", out.history);
        }
    }

    #[test]
    fn norm_preserved_by_exact_gate_paths() {
        let mut state = random_state(9, 5, 2, 0.5);
        let n0 = state.norm_sq().unwrap();
        apply_diagonal_two_qubit(&mut state, 0, 3, 1.3).unwrap();
        apply_local_diagonal(&mut state, 2, 0.4).unwrap();
        assert_abs_diff_eq!(state.norm_sq().unwrap(), n0, epsilon = 1e-10 * n0.max(1.0));
    }

    #[test]
    fn all_diagonal_circuit_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 6;
        let mut gates = Vec::new();
        for _ in 0..40 {
            if rng.gen_bool(0.5) {
                let j = rng.gen_range(0..n);
                let mut k = rng.gen_range(0..n);
                while k == j {
                    k = rng.gen_range(0..n);
                }
                gates.push(Gate::DiagonalPhase {
                    j,
                    k,
                    phi: rng.gen::<f64>() * TAU,
                });
            } else {
                gates.push(Gate::LocalDiagonal {
                    j: rng.gen_range(0..n),
                    alpha: rng.gen::<f64>() * TAU,
                });
            }
        }
        let circuit = Circuit::new(n, gates).unwrap();
        let mut state = random_state(11, n, 2, 0.3);
        let fids = run_circuit(&mut state, &circuit, true, &SingleQubitConfig::default()).unwrap();
        assert_eq!(fids.len(), 40);
        for f in fids {
            assert!(f > 1.0 - 1e-10, "fidelity {f}");
        }
    }

    #[test]
    fn empty_circuit_perfect_fidelity() {
        let circuit = Circuit::new(4, vec![]).unwrap();
        let mut state = random_state(12, 4, 2, 0.4);
        let fids = run_circuit(&mut state, &circuit, true, &SingleQubitConfig::default()).unwrap();
        assert!(fids.is_empty());
        // and the state is untouched
        assert!(state.norm_sq().unwrap() > 0.0);
    }

    #[test]
    fn mixed_circuit_keeps_reasonable_fidelity_and_runs_mps_baseline() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 5;
        let mut gates = Vec::new();
        for _ in 0..4 {
            gates.push(Gate::SingleQubit {
                j: rng.gen_range(0..n),
                u: oracle::random_unitary_2x2(&mut rng),
            });
            let j = rng.gen_range(0..n);
            let mut k = rng.gen_range(0..n);
            while k == j {
                k = rng.gen_range(0..n);
            }
            gates.push(Gate::DiagonalPhase {
                j,
                k,
                phi: rng.gen::<f64>() * TAU,
            });
        }
        let circuit = Circuit::new(n, gates).unwrap();
        let mut state = random_state(14, n, 2, 0.0);
        let fids = run_circuit(&mut state, &circuit, true, &SingleQubitConfig::default()).unwrap();
        assert!(fids.iter().all(|&f| (0.0..=1.0 + 1e-12).contains(&f)));

        let mut rng2 = ChaCha8Rng::seed_from_u64(14);
        let mut mps = MpsTensorSet::random_gaussian(&mut rng2, n, 2, Boundary::Open);
        let fids_mps =
            run_circuit_mps(&mut mps, &circuit, true, &SingleQubitConfig::default()).unwrap();
        assert_eq!(fids_mps.len(), circuit.gates.len());
        assert!(fids_mps.iter().all(|&f| (0.0..=1.0 + 1e-12).contains(&f)));
    }

    #[test]
    fn cp_variational_on_mps_matches_dense_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let n = 5;
        let mut mps = MpsTensorSet::random_gaussian(&mut rng, n, 2, Boundary::Open);
        let before = RageState::from_mps(mps.clone());
        let gate = Gate::DiagonalPhase {
            j: 1,
            k: 3,
            phi: 1.7,
        };
        let out =
            mps_apply_cp_variational(&mut mps, 1, 3, 1.7, &SingleQubitConfig::default()).unwrap();
        let after = RageState::from_mps(mps.clone());
        let dense = dense_gate_overlap(&after, &before, &gate).unwrap();
        assert_abs_diff_eq!(out.overlap, dense, epsilon = 1e-9);
        for w in out.history.windows(2) {
            assert!(w[1] >= w[0] - 1e-10);
        }
    }

    #[test]
    fn parser_round_trip() {
        let text = "# demo circuit\nCP 1 3 1.25\nLP 2 0.5\nU1 1 0.7071067811865476 0.0 0.7071067811865476 0.0 0.7071067811865476 0.0 -0.7071067811865476 0.0\n";
        let circuit = Circuit::parse(4, text).unwrap();
        assert_eq!(circuit.gates.len(), 3);
        match &circuit.gates[0] {
            Gate::DiagonalPhase { j, k, phi } => {
                assert_eq!((*j, *k), (0, 2));
                assert_abs_diff_eq!(*phi, 1.25, epsilon = 1e-15);
            }
            _ => panic!("wrong gate kind"),
        }
        let round = Circuit::parse(4, &circuit.to_text()).unwrap();
        assert_eq!(round.gates.len(), 3);
        match (&circuit.gates[2], &round.gates[2]) {
            (Gate::SingleQubit { u: a, .. }, Gate::SingleQubit { u: b, .. }) => {
                for (x, y) in a.iter().zip(b.iter()) {
                    assert_eq!(x, y);
                }
            }
            _ => panic!("wrong gate kind"),
        }
    }

    #[test]
    fn parser_reports_line_numbers() {
        let text = "CP 1 2 0.5\nXX 1 2\n";
        match Circuit::parse(4, text) {
            Err(RageError::ParseError { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let text2 = "CP 1 9 0.5\n";
        match Circuit::parse(4, text2) {
            Err(RageError::ParseError { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
        let text3 = "U1 1 1 0 0 0 0 0 1 1\n";
        assert!(matches!(
            Circuit::parse(4, text3),
            Err(RageError::ParseError { line: 1, .. })
        ));
    }

    #[test]
    fn gate_on_rotated_state_rejected() {
        let mut state = random_state(16, 3, 2, 0.0);
        state.set_rotation(1, hadamard());
        assert!(matches!(
            apply_diagonal_two_qubit(&mut state, 0, 2, 1.0),
            Err(RageError::RotationsNotIdentity(1))
        ));
    }

    #[test]
    fn wrap_phase_range() {
        assert_abs_diff_eq!(wrap_phase(-1.0), TAU - 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_phase(TAU + 0.25), 0.25, epsilon = 1e-15);
        assert_eq!(wrap_phase(0.0), 0.0);
        let _ = ZERO;
    }
}
