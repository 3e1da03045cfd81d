//! Ground-state search: sweeping exact local updates (MPS tensor, graph
//! phase, local rotation), each a small closed-form problem, plus a
//! gradient-based global refinement. A graph-free MPS-only path is kept as an
//! independent baseline.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{RageError, Result};
use crate::graph::{intra_support_phase_gate, restrict_phases};
use crate::hamiltonian::{conjugate_by_rotations, energy, energy_numerator, Hamiltonian};
use crate::linalg::{
    dagger, hermitize, kron, solve_hermitian_pencil_with_incumbent, unitarity_defect, CMat, CVec,
    HermitianPencil, PencilSide, C64, DEFAULT_PENCIL_CUTOFF, ONE,
};
use crate::mps::{mps_local_expectation_raw, mps_norm_sq, MpsTensorSet};
use crate::state::{identity2, pauli_x, pauli_y, pauli_z, trace_prod, ChainSpec, RageState, TransferCache, UNITARITY_TOL};

/// Which adjacency entries the sweep optimizes.
#[derive(Debug, Clone, PartialEq)]
pub enum PhasePairs {
    /// Every pair j < k.
    All,
    /// An explicit pair list (for large chains).
    EdgeList(Vec<(usize, usize)>),
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub max_sweeps: usize,
    /// Relative energy decrease per full sweep below which we stop.
    pub energy_tol: f64,
    pub pencil_cutoff: f64,
    pub phase_pairs: PhasePairs,
    pub rotation_updates: bool,
    /// Run a gradient refinement stage after the sweeps.
    pub gradient_refine: bool,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            max_sweeps: 100,
            energy_tol: 1e-8,
            pencil_cutoff: DEFAULT_PENCIL_CUTOFF,
            phase_pairs: PhasePairs::All,
            rotation_updates: true,
            gradient_refine: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateKind {
    MpsTensor,
    GraphPhase,
    Rotation,
    GradientStep,
}

#[derive(Debug, Clone)]
pub struct UpdateRecord {
    pub kind: UpdateKind,
    pub sites: Vec<usize>,
    pub energy: f64,
}

#[derive(Debug, Clone, Default)]
pub struct EnergyTrace {
    pub records: Vec<UpdateRecord>,
    /// Energy at the end of each full sweep.
    pub sweep_energies: Vec<f64>,
    pub warnings: Vec<String>,
    pub converged: bool,
    pub line_search_failed: bool,
}

impl EnergyTrace {
    /// Energies never increase by more than `slack` between consecutive
    /// records.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.records
            .windows(2)
            .all(|w| w[1].energy <= w[0].energy + slack)
    }

    pub fn final_energy(&self) -> Option<f64> {
        self.records.last().map(|r| r.energy)
    }
}

fn combo_bit(idx: usize, pos: usize, m: usize) -> u8 {
    ((idx >> (m - 1 - pos)) & 1) as u8
}

/// Product of all chain operators except the one at `site`, folded so the
/// chain value is sum_{x,y} F[y,x] K[x,y] for the site operator K.
pub(crate) fn environment<F: Fn(usize) -> CMat>(mps: &MpsTensorSet, site: usize, op: F) -> CMat {
    let n = mps.n_sites();
    let (dl, dr) = mps.site_shape(site);
    let mut prefix: Option<CMat> = None;
    for k in 0..site {
        let o = op(k);
        prefix = Some(match prefix {
            None => o,
            Some(p) => p.dot(&o),
        });
    }
    let mut suffix: Option<CMat> = None;
    for k in (site + 1)..n {
        let o = op(k);
        suffix = Some(match suffix {
            None => o,
            Some(p) => p.dot(&o),
        });
    }
    let p = prefix.unwrap_or_else(|| CMat::eye(dl * dl));
    let s = suffix.unwrap_or_else(|| CMat::eye(dr * dr));
    s.dot(&p)
}

/// Adds w * F into the (l_ket, l_bra) block of the site quadratic form. The
/// vectorization is v[(l, i, p)] = l*dl*dr + i*dr + p for the dl x dr tensor
/// pair.
pub(crate) fn accumulate_block(
    m: &mut CMat,
    f: &CMat,
    l_ket: u8,
    l_bra: u8,
    w: C64,
    dl: usize,
    dr: usize,
) {
    let dd = dl * dr;
    for j in 0..dl {
        for q in 0..dr {
            let row = l_bra as usize * dd + j * dr + q;
            for i in 0..dl {
                for p in 0..dr {
                    let col = l_ket as usize * dd + i * dr + p;
                    m[(row, col)] += w * f[(p * dr + q, i * dl + j)];
                }
            }
        }
    }
}

/// Hermitian pencil (H_eff, N_eff) for the tensor pair at `site`: energy and
/// norm are quadratic forms in the 2*dl*dr entries. Rotations are ignored
/// (callers fold them into the Hamiltonian first); adjacency phases are fully
/// accounted for.
pub(crate) fn site_pencil(state: &RageState, h: &Hamiltonian, site: usize) -> Result<HermitianPencil> {
    let mps = &state.mps;
    mps.check_site(site)?;
    let (dl, dr) = mps.site_shape(site);
    let dim = 2 * dl * dr;

    let mut n_eff = CMat::zeros((dim, dim));
    let f_norm = environment(mps, site, |k| mps.norm_transfer(k));
    accumulate_block(&mut n_eff, &f_norm, 0, 0, ONE, dl, dr);
    accumulate_block(&mut n_eff, &f_norm, 1, 1, ONE, dl, dr);

    let mut h_eff = CMat::zeros((dim, dim));
    for term in &h.terms {
        let support = term.support();
        let omega = restrict_phases(&state.phi, &support)?;
        let cache = TransferCache::new(mps, &support);
        let spec = ChainSpec {
            mps,
            support: &support,
            omega: &omega,
        };
        let gate = intra_support_phase_gate(&state.phi, &support, state.s_max)?;
        let obs = term.observable();
        let m = support.len();
        let combos = 1usize << m;
        let pos = support.iter().position(|&x| x == site);
        for s_idx in 0..combos {
            for r_idx in 0..combos {
                let w = term.coefficient * obs[(r_idx, s_idx)] * gate[s_idx] * gate[r_idx].conj();
                if w.norm() < 1e-300 {
                    continue;
                }
                let f = environment(mps, site, |k| spec.site_op(&cache, k, s_idx, r_idx));
                match pos {
                    Some(p) => {
                        let l_ket = combo_bit(s_idx, p, m);
                        let l_bra = combo_bit(r_idx, p, m);
                        accumulate_block(&mut h_eff, &f, l_ket, l_bra, w, dl, dr);
                    }
                    None => {
                        accumulate_block(&mut h_eff, &f, 0, 0, w, dl, dr);
                        let ph = spec.complement_phase(site, s_idx, r_idx);
                        accumulate_block(&mut h_eff, &f, 1, 1, w * ph, dl, dr);
                    }
                }
            }
        }
    }
    Ok(HermitianPencil::new(hermitize(&h_eff), hermitize(&n_eff)))
}

pub(crate) fn vectorize_site(mps: &MpsTensorSet, site: usize) -> CVec {
    let (dl, dr) = mps.site_shape(site);
    let mut v = CVec::zeros(2 * dl * dr);
    for l in 0..2u8 {
        let a = mps.tensor(site, l);
        for i in 0..dl {
            for p in 0..dr {
                v[l as usize * dl * dr + i * dr + p] = a[(i, p)];
            }
        }
    }
    v
}

pub(crate) fn write_site(mps: &mut MpsTensorSet, site: usize, v: &CVec) {
    let (dl, dr) = mps.site_shape(site);
    for l in 0..2u8 {
        let a = mps.tensor_mut(site, l);
        for i in 0..dl {
            for p in 0..dr {
                a[(i, p)] = v[l as usize * dl * dr + i * dr + p];
            }
        }
    }
}

/// Replaces the tensor pair at `site` by the minimal eigenvector of its
/// effective pencil and returns the new energy (the pencil eigenvalue).
/// `h_v` must already carry any rotation conjugation; the state's rotation
/// layer is treated as identity here.
pub fn local_mps_update(
    state: &mut RageState,
    h_v: &Hamiltonian,
    site: usize,
    cutoff: f64,
) -> Result<f64> {
    let pencil = site_pencil(state, h_v, site)?;
    let incumbent = vectorize_site(&state.mps, site);
    let (e, v) =
        solve_hermitian_pencil_with_incumbent(&pencil, PencilSide::Min, cutoff, Some(&incumbent))?;
    write_site(&mut state.mps, site, &v);
    state.mps.normalize();
    Ok(e)
}

/// Indices of Hamiltonian terms whose support intersects {j, k}; only those
/// numerators depend on the phase at (j, k).
fn phase_affected_terms(h: &Hamiltonian, j: usize, k: usize) -> Vec<usize> {
    h.terms
        .iter()
        .enumerate()
        .filter(|(_, t)| t.support().iter().any(|&s| s == j || s == k))
        .map(|(i, _)| i)
        .collect()
}

fn numerator_over(state: &RageState, h: &Hamiltonian, idx: &[usize]) -> Result<f64> {
    let mut acc = C64::new(0.0, 0.0);
    for &i in idx {
        let t = &h.terms[i];
        acc += t.coefficient * state.expectation_raw(&t.support(), &t.observable())?;
    }
    Ok(acc.re)
}

/// Coefficients of the exact single-phase model: the energy numerator as a
/// function of phi at (j, k) is c0 + 2 Re(c1 e^{i phi}) plus a constant from
/// unaffected terms. Extracted from three evaluations at phi in
/// {0, pi/2, pi}. The phase is restored before returning.
pub fn phase_model_coefficients(
    state: &mut RageState,
    h: &Hamiltonian,
    j: usize,
    k: usize,
) -> Result<(f64, C64)> {
    let idx = phase_affected_terms(h, j, k);
    let phi0 = state.phi.phase(j, k);
    let mut vals = [0.0_f64; 3];
    for (slot, phi) in [0.0, FRAC_PI_2, PI].into_iter().enumerate() {
        state.phi.set_phase(j, k, phi)?;
        vals[slot] = numerator_over(state, h, &idx)?;
    }
    state.phi.set_phase(j, k, phi0)?;
    let c0 = (vals[0] + vals[2]) / 2.0;
    let re = (vals[0] - vals[2]) / 4.0;
    let im = (c0 - vals[1]) / 2.0;
    Ok((c0, C64::new(re, im)))
}

/// Sets the phase at (j, k) to its exact minimizer and returns the change of
/// the energy numerator (zero when the direction is flat, |c1| < 1e-14).
fn phase_update_step(state: &mut RageState, h: &Hamiltonian, j: usize, k: usize) -> Result<f64> {
    let phi0 = state.phi.phase(j, k);
    let (_c0, c1) = phase_model_coefficients(state, h, j, k)?;
    if c1.norm() < 1e-14 {
        return Ok(0.0);
    }
    let target = PI - c1.arg();
    state.phi.set_phase(j, k, target)?;
    let before = 2.0 * (c1 * C64::from_polar(1.0, phi0)).re;
    let after = 2.0 * (c1 * C64::from_polar(1.0, target)).re;
    Ok(after - before)
}

/// Exact closed-form update of the phase at (j, k); returns the new energy.
/// Requires unitary rotations (the norm must be phase-independent).
pub fn local_phase_update(
    state: &mut RageState,
    h: &Hamiltonian,
    j: usize,
    k: usize,
) -> Result<f64> {
    if j == k {
        return Err(RageError::EqualSites(j));
    }
    if !state.rotations_unitary() {
        let bad = (0..state.n_sites())
            .find(|&m| unitarity_defect(&state.rotations[m]) > UNITARITY_TOL)
            .unwrap_or(0);
        return Err(RageError::NonUnitaryRotation(bad));
    }
    phase_update_step(state, h, j, k)?;
    energy(state, h)
}

/// Basis whose real span is exactly the unitaries up to scale:
/// (1, i sigma_x, i sigma_y, i sigma_z); V is unitary at unit coefficient
/// norm.
pub fn rotation_basis() -> [CMat; 4] {
    let i = C64::new(0.0, 1.0);
    [
        identity2(),
        pauli_x().mapv(|z| z * i),
        pauli_y().mapv(|z| z * i),
        pauli_z().mapv(|z| z * i),
    ]
}

/// Assembles V from real coefficients in the rotation basis.
pub fn rotation_from_coefficients(x: &[f64; 4]) -> CMat {
    let basis = rotation_basis();
    let mut v = CMat::zeros((2, 2));
    for (a, g) in basis.iter().enumerate() {
        v += &g.mapv(|z| z * x[a]);
    }
    v
}

fn embed_at(support: &[usize], site: usize, g: &CMat) -> CMat {
    let id = identity2();
    let mut m = CMat::eye(1);
    for &s in support {
        m = kron(&m, if s == site { g } else { &id });
    }
    m
}

fn union_with(support: &[usize], site: usize) -> Vec<usize> {
    let mut u = support.to_vec();
    if !u.contains(&site) {
        u.push(site);
        u.sort_unstable();
    }
    u
}

/// Exact update of the rotation at `site`: energy and norm are quadratic
/// forms in the four real basis coefficients, giving a 4x4 real symmetric
/// pencil. The minimal eigenvector, renormalized to unit length, is an
/// exactly unitary V. Returns the new energy; on a degenerate pencil the
/// rotation is left unchanged. Rotations on all other sites must be unitary.
pub fn local_rotation_update(
    state: &mut RageState,
    h: &Hamiltonian,
    site: usize,
    cutoff: f64,
) -> Result<f64> {
    state.mps.check_site(site)?;
    for m in 0..state.n_sites() {
        if m != site && unitarity_defect(&state.rotations[m]) > UNITARITY_TOL {
            return Err(RageError::NonUnitaryRotation(m));
        }
    }
    let basis = rotation_basis();
    let saved = state.rotations[site].clone();
    state.set_rotation(site, identity2());

    let attempt = (|| -> Result<Option<[f64; 4]>> {
        // norm form: tr(G_b^dag G_a rho_site), other (unitary) rotations
        // cancel in the norm
        let rho_site = state.assemble_rdm(&[site], true, false)?;
        let mut n4 = CMat::zeros((4, 4));
        for a in 0..4 {
            for b in 0..4 {
                let prod = basis[a].dot(&rho_site.matrix).dot(&dagger(&basis[b]));
                n4[(b, a)] = prod.diag().sum();
            }
        }
        // energy form: per term, one raw reduced matrix on the support joined
        // with `site`, traced against all basis pairs
        let mut h4 = CMat::zeros((4, 4));
        for term in &h.terms {
            let support = term.support();
            let joined = union_with(&support, site);
            let rho = state.assemble_rdm(&joined, true, false)?;
            let mut obs = CMat::eye(1);
            let mut f_iter = term.factors.iter().peekable();
            for &s in &joined {
                let next = match f_iter.peek() {
                    Some((fs, _)) if *fs == s => {
                        let (_, op) = f_iter.next().unwrap();
                        op.clone()
                    }
                    _ => identity2(),
                };
                obs = kron(&obs, &next);
            }
            let embeds: Vec<CMat> = (0..4).map(|a| embed_at(&joined, site, &basis[a])).collect();
            for a in 0..4 {
                let left = embeds[a].dot(&rho.matrix);
                for b in 0..4 {
                    let rotated = left.dot(&dagger(&embeds[b]));
                    h4[(b, a)] += term.coefficient * trace_prod(&rotated, &obs);
                }
            }
        }
        // For real coefficient vectors x the forms reduce to x^T Re(M) x:
        // the imaginary parts of the Hermitian forms are antisymmetric and
        // vanish. The unitary constraint demands real x, so the pencil to
        // solve is the real symmetric one.
        let realify = |m: &CMat| m.mapv(|z| C64::new(z.re, 0.0));
        let pencil = HermitianPencil::new(
            hermitize(&realify(&h4)),
            hermitize(&realify(&n4)),
        );
        let mut x0 = CVec::zeros(4);
        for a in 0..4 {
            let tr = dagger(&basis[a]).dot(&saved).diag().sum();
            x0[a] = C64::new(tr.re / 2.0, 0.0);
        }
        let incumbent = if x0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() > 1e-8 {
            Some(&x0)
        } else {
            None
        };
        let (_, v) = match solve_hermitian_pencil_with_incumbent(
            &pencil,
            PencilSide::Min,
            cutoff,
            incumbent,
        ) {
            Ok(sol) => sol,
            Err(RageError::DegenerateNorm) => return Ok(None),
            Err(e) => return Err(e),
        };
        // real symmetric pencil: the eigenvector is real up to a global
        // phase; strip it and take the real part
        let lead = v
            .iter()
            .cloned()
            .max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
            .unwrap();
        if lead.norm() < 1e-14 {
            return Ok(None);
        }
        let phase = lead / lead.norm();
        let mut x = [0.0_f64; 4];
        let mut norm_sq = 0.0;
        for a in 0..4 {
            x[a] = (v[a] * phase.conj()).re;
            norm_sq += x[a] * x[a];
        }
        if norm_sq < 1e-28 {
            return Ok(None);
        }
        let s = norm_sq.sqrt();
        for xa in x.iter_mut() {
            *xa /= s;
        }
        Ok(Some(x))
    })();

    match attempt {
        Ok(Some(x)) => {
            state.set_rotation(site, rotation_from_coefficients(&x));
            energy(state, h)
        }
        Ok(None) => {
            state.set_rotation(site, saved);
            energy(state, h)
        }
        Err(e) => {
            state.set_rotation(site, saved);
            Err(e)
        }
    }
}

fn phase_pair_list(pairs: &PhasePairs, n: usize) -> Vec<(usize, usize)> {
    match pairs {
        PhasePairs::All => {
            let mut v = Vec::new();
            for j in 0..n {
                for k in (j + 1)..n {
                    v.push((j, k));
                }
            }
            v
        }
        PhasePairs::EdgeList(list) => list.clone(),
    }
}

/// Alternating local optimization: per sweep, MPS tensor updates
/// left-to-right then right-to-left, phase updates over the configured pair
/// list, rotation updates per site. Rotations are folded into the
/// Hamiltonian first so the tensor and phase stages run with an identity
/// rotation layer. Local-update failures become trace warnings, never
/// aborts.
pub fn sweep(state: &mut RageState, h: &Hamiltonian, cfg: &SweepConfig) -> Result<EnergyTrace> {
    let n = state.n_sites();
    let mut trace = EnergyTrace::default();
    let mut e_prev = energy(state, h)?;
    let pairs = phase_pair_list(&cfg.phase_pairs, n);

    for _ in 0..cfg.max_sweeps {
        // fold the rotation layer so tensor and phase updates see V = 1
        let h_v = if state.rotations_are_identity() {
            h.clone()
        } else {
            conjugate_by_rotations(h, &state.rotations)?
        };
        let saved: Vec<CMat> = state.rotations.clone();
        for j in 0..n {
            state.set_rotation(j, identity2());
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.extend((0..n.saturating_sub(1)).rev());
        for site in order {
            match local_mps_update(state, &h_v, site, cfg.pencil_cutoff) {
                Ok(e) => trace.records.push(UpdateRecord {
                    kind: UpdateKind::MpsTensor,
                    sites: vec![site],
                    energy: e,
                }),
                Err(err) => trace
                    .warnings
                    .push(format!("tensor update at site {site} skipped: {err}")),
            }
        }

        if !pairs.is_empty() {
            let den = state.norm_sq()?;
            let mut num = energy_numerator(state, &h_v)?.re;
            for &(j, k) in &pairs {
                match phase_update_step(state, &h_v, j, k) {
                    Ok(delta) => {
                        num += delta;
                        trace.records.push(UpdateRecord {
                            kind: UpdateKind::GraphPhase,
                            sites: vec![j, k],
                            energy: num / den,
                        });
                    }
                    Err(err) => trace
                        .warnings
                        .push(format!("phase update at ({j},{k}) skipped: {err}")),
                }
            }
        }

        for (j, v) in saved.into_iter().enumerate() {
            state.set_rotation(j, v);
        }

        if cfg.rotation_updates {
            for site in 0..n {
                match local_rotation_update(state, h, site, cfg.pencil_cutoff) {
                    Ok(e) => trace.records.push(UpdateRecord {
                        kind: UpdateKind::Rotation,
                        sites: vec![site],
                        energy: e,
                    }),
                    Err(err) => trace
                        .warnings
                        .push(format!("rotation update at site {site} skipped: {err}")),
                }
            }
        }

        let e_now = energy(state, h)?;
        trace.sweep_energies.push(e_now);
        let scale = e_now.abs().max(1.0);
        if (e_prev - e_now).abs() <= cfg.energy_tol * scale {
            trace.converged = true;
            break;
        }
        e_prev = e_now;
    }

    if cfg.gradient_refine {
        let refine = gradient_refine(state, h, &GradientConfig::default())?;
        trace.records.extend(refine.records);
        trace.warnings.extend(refine.warnings);
        trace.line_search_failed = refine.line_search_failed;
    }
    Ok(trace)
}

// ---------------------------------------------------------------------------
// Graph-free MPS baseline: same update structure built from plain transfer
// operators only. Used for matched-parameter comparisons and as an
// independent check of the graph path at zero phases.
// ---------------------------------------------------------------------------

/// <psi|H|psi> / <psi|psi> for a bare MPS via plain transfer operators.
pub fn mps_energy(mps: &MpsTensorSet, h: &Hamiltonian) -> Result<f64> {
    let n2 = mps_norm_sq(mps);
    if n2 <= 0.0 || !n2.is_finite() {
        return Err(RageError::ZeroNorm);
    }
    let mut num = C64::new(0.0, 0.0);
    for t in &h.terms {
        let support = t.support();
        let ops: Vec<CMat> = t.factors.iter().map(|(_, op)| op.clone()).collect();
        num += t.coefficient * mps_local_expectation_raw(mps, &support, &ops)?;
    }
    Ok(num.re / n2)
}

fn mps_site_pencil(mps: &MpsTensorSet, h: &Hamiltonian, site: usize) -> Result<HermitianPencil> {
    mps.check_site(site)?;
    let (dl, dr) = mps.site_shape(site);
    let dim = 2 * dl * dr;

    let mut n_eff = CMat::zeros((dim, dim));
    let f_norm = environment(mps, site, |k| mps.norm_transfer(k));
    accumulate_block(&mut n_eff, &f_norm, 0, 0, ONE, dl, dr);
    accumulate_block(&mut n_eff, &f_norm, 1, 1, ONE, dl, dr);

    let mut h_eff = CMat::zeros((dim, dim));
    for term in &h.terms {
        let support = term.support();
        let obs = term.observable();
        let m = support.len();
        let combos = 1usize << m;
        let pos = support.iter().position(|&x| x == site);
        for s_idx in 0..combos {
            for r_idx in 0..combos {
                let w = term.coefficient * obs[(r_idx, s_idx)];
                if w.norm() < 1e-300 {
                    continue;
                }
                let f = environment(mps, site, |k| {
                    match support.iter().position(|&x| x == k) {
                        Some(p) => kron(
                            mps.tensor(k, combo_bit(s_idx, p, m)),
                            &mps.tensor(k, combo_bit(r_idx, p, m)).mapv(|z| z.conj()),
                        ),
                        None => mps.norm_transfer(k),
                    }
                });
                match pos {
                    Some(p) => accumulate_block(
                        &mut h_eff,
                        &f,
                        combo_bit(s_idx, p, m),
                        combo_bit(r_idx, p, m),
                        w,
                        dl,
                        dr,
                    ),
                    None => {
                        accumulate_block(&mut h_eff, &f, 0, 0, w, dl, dr);
                        accumulate_block(&mut h_eff, &f, 1, 1, w, dl, dr);
                    }
                }
            }
        }
    }
    Ok(HermitianPencil::new(hermitize(&h_eff), hermitize(&n_eff)))
}

/// Graph-free tensor update; see [`local_mps_update`].
pub fn mps_local_update(
    mps: &mut MpsTensorSet,
    h: &Hamiltonian,
    site: usize,
    cutoff: f64,
) -> Result<f64> {
    let pencil = mps_site_pencil(mps, h, site)?;
    let incumbent = vectorize_site(mps, site);
    let (e, v) =
        solve_hermitian_pencil_with_incumbent(&pencil, PencilSide::Min, cutoff, Some(&incumbent))?;
    write_site(mps, site, &v);
    mps.normalize();
    Ok(e)
}

/// Plain DMRG-style alternating sweep on a bare MPS.
pub fn mps_sweep(mps: &mut MpsTensorSet, h: &Hamiltonian, cfg: &SweepConfig) -> Result<EnergyTrace> {
    let n = mps.n_sites();
    let mut trace = EnergyTrace::default();
    let mut e_prev = mps_energy(mps, h)?;
    for _ in 0..cfg.max_sweeps {
        let mut order: Vec<usize> = (0..n).collect();
        order.extend((0..n.saturating_sub(1)).rev());
        for site in order {
            match mps_local_update(mps, h, site, cfg.pencil_cutoff) {
                Ok(e) => trace.records.push(UpdateRecord {
                    kind: UpdateKind::MpsTensor,
                    sites: vec![site],
                    energy: e,
                }),
                Err(err) => trace
                    .warnings
                    .push(format!("tensor update at site {site} skipped: {err}")),
            }
        }
        let e_now = mps_energy(mps, h)?;
        trace.sweep_energies.push(e_now);
        let scale = e_now.abs().max(1.0);
        if (e_prev - e_now).abs() <= cfg.energy_tol * scale {
            trace.converged = true;
            break;
        }
        e_prev = e_now;
    }
    Ok(trace)
}

// ---------------------------------------------------------------------------
// Gradient refinement
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct GradientConfig {
    pub max_steps: usize,
    pub grad_tol: f64,
    pub armijo: f64,
    pub shrink: f64,
    pub init_step: f64,
}

impl Default for GradientConfig {
    fn default() -> Self {
        Self {
            max_steps: 200,
            grad_tol: 1e-6,
            armijo: 1e-4,
            shrink: 0.5,
            init_step: 1.0,
        }
    }
}

/// Exact gradient of the Rayleigh quotient. Per site, the Wirtinger
/// derivative with respect to the conjugated tensor entries,
/// (H_eff v - E N_eff v) / <psi|psi>; per pair (j, k), dE/dphi =
/// -2 Im(c1 e^{i phi}) / <psi|psi>. The state's rotation layer must be
/// identity (fold it into `h_v` first).
pub fn rayleigh_gradient(
    state: &mut RageState,
    h_v: &Hamiltonian,
) -> Result<(f64, Vec<CVec>, Vec<((usize, usize), f64)>)> {
    let n = state.n_sites();
    let den = state.norm_sq()?;
    let e = energy(state, h_v)?;
    let mut site_grads = Vec::with_capacity(n);
    for site in 0..n {
        let pencil = site_pencil(state, h_v, site)?;
        let v = vectorize_site(&state.mps, site);
        let hv = pencil.h_mat.dot(&v);
        let nv = pencil.n_mat.dot(&v);
        let g = (&hv - &nv.mapv(|z| z * e)).mapv(|z| z / den);
        site_grads.push(g);
    }
    let mut phase_grads = Vec::new();
    for j in 0..n {
        for k in (j + 1)..n {
            let phi0 = state.phi.phase(j, k);
            let (_c0, c1) = phase_model_coefficients(state, h_v, j, k)?;
            let d = -2.0 * (c1 * C64::from_polar(1.0, phi0)).im / den;
            phase_grads.push(((j, k), d));
        }
    }
    Ok((e, site_grads, phase_grads))
}

fn apply_gradient_step(
    state: &RageState,
    site_grads: &[CVec],
    phase_grads: &[((usize, usize), f64)],
    alpha: f64,
) -> Result<RageState> {
    let mut trial = state.clone();
    for (site, g) in site_grads.iter().enumerate() {
        let mut v = vectorize_site(&trial.mps, site);
        for (x, gi) in v.iter_mut().zip(g.iter()) {
            *x -= C64::new(2.0 * alpha, 0.0) * gi;
        }
        write_site(&mut trial.mps, site, &v);
    }
    for &((j, k), d) in phase_grads {
        if d != 0.0 {
            trial.phi.add_phase(j, k, -alpha * d)?;
        }
    }
    Ok(trial)
}

/// Steepest descent on all tensor entries and all phases with Armijo
/// backtracking. Rotations are folded into the Hamiltonian and restored
/// afterwards; they are not varied.
pub fn gradient_refine(
    state: &mut RageState,
    h: &Hamiltonian,
    cfg: &GradientConfig,
) -> Result<EnergyTrace> {
    let n = state.n_sites();
    let mut trace = EnergyTrace::default();
    let h_v = if state.rotations_are_identity() {
        h.clone()
    } else {
        conjugate_by_rotations(h, &state.rotations)?
    };
    let saved: Vec<CMat> = state.rotations.clone();
    for j in 0..n {
        state.set_rotation(j, identity2());
    }

    let result = (|| -> Result<()> {
        let mut alpha = cfg.init_step;
        for _ in 0..cfg.max_steps {
            let (e, site_grads, phase_grads) = rayleigh_gradient(state, &h_v)?;
            // real-parameter gradient norm: complex entries contribute twice
            // their Wirtinger derivative per real component
            let grad_sq: f64 = site_grads
                .iter()
                .flat_map(|g| g.iter())
                .map(|z| 4.0 * z.norm_sqr())
                .sum::<f64>()
                + phase_grads.iter().map(|&(_, d)| d * d).sum::<f64>();
            if grad_sq.sqrt() < cfg.grad_tol {
                trace.converged = true;
                return Ok(());
            }
            let mut step = alpha;
            loop {
                let trial = apply_gradient_step(state, &site_grads, &phase_grads, step)?;
                let et = energy(&trial, &h_v)?;
                if et <= e - cfg.armijo * step * grad_sq {
                    *state = trial;
                    state.mps.normalize();
                    trace.records.push(UpdateRecord {
                        kind: UpdateKind::GradientStep,
                        sites: vec![],
                        energy: et,
                    });
                    alpha = (step * 2.0).min(cfg.init_step);
                    break;
                }
                step *= cfg.shrink;
                if step < 1e-12 {
                    trace.line_search_failed = true;
                    trace
                        .warnings
                        .push("line search stalled below step 1e-12".to_string());
                    return Ok(());
                }
            }
        }
        Ok(())
    })();

    for (j, v) in saved.into_iter().enumerate() {
        state.set_rotation(j, v);
    }
    result?;
    Ok(trace)
}
