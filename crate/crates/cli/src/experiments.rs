//! The two benchmark experiments plus result emission.
//!
//! Output contract: a CSV with the fixed header
//! `experiment,seed,point,metric,value,wall_ms` and a JSON sidecar holding
//! the fully resolved configuration. Every value column except `wall_ms`
//! is a pure function of (config, seeds): runs are single-threaded per
//! seed, seeds are processed in order, and each seed owns independent
//! ChaCha streams (stream 0: state initialization, stream 1: baseline
//! initialization, stream 2: circuit drawing), so re-running a config
//! reproduces every value bit-for-bit.

use std::f64::consts::TAU;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rage_core::circuit::{
    run_circuit, run_circuit_mps, Circuit, Gate, SingleQubitConfig,
};
use rage_core::hamiltonian::{build_ising_2d, energy, LatticeMap};
use rage_core::linalg::CMat;
use rage_core::mps::{Boundary, MpsTensorSet};
use rage_core::optimize::{
    mps_energy, mps_sweep, rotation_from_coefficients, sweep, PhasePairs, SweepConfig,
};
use rage_core::oracle;
use rage_core::state::{pauli_z, RageState};
use rage_core::{RageError, Result};

use crate::config::{ExperimentConfig, ExperimentKind, GateEnsemble};

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub experiment: String,
    /// Seed as text; aggregate rows use "all".
    pub seed: String,
    /// Parameter point, e.g. "B=2" or "depth=4".
    pub point: String,
    pub metric: String,
    pub value: f64,
    pub wall_ms: f64,
}

impl ResultRecord {
    fn new(
        experiment: &str,
        seed: impl ToString,
        point: impl Into<String>,
        metric: impl Into<String>,
        value: f64,
        wall_ms: f64,
    ) -> Self {
        Self {
            experiment: experiment.to_string(),
            seed: seed.to_string(),
            point: point.into(),
            metric: metric.into(),
            value,
            wall_ms,
        }
    }
}

pub const CSV_HEADER: &str = "experiment,seed,point,metric,value,wall_ms";

pub fn records_to_csv(records: &[ResultRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{:?},{:?}\n",
            r.experiment, r.seed, r.point, r.metric, r.value, r.wall_ms
        ));
    }
    out
}

/// Writes results.csv plus config.json into `dir` (created if missing).
pub fn write_outputs(
    dir: &Path,
    cfg: &ExperimentConfig,
    records: &[ResultRecord],
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("results.csv"), records_to_csv(records))?;
    let json = serde_json::to_string_pretty(cfg).expect("config serializes");
    std::fs::write(dir.join("config.json"), json)?;
    Ok(())
}

/// Real-parameter budget of a graph-enhanced state at bond dimension d:
/// tensors (4 d^2 per site) plus phases plus rotations.
fn enhanced_parameter_count(n: usize, d: usize, graph: bool, rotations: bool) -> usize {
    let mut p = 4 * d * d * n;
    if graph {
        p += n * (n - 1) / 2;
    }
    if rotations {
        p += 4 * n;
    }
    p
}

/// Smallest bare-MPS bond dimension whose parameter count matches or
/// exceeds the enhanced budget (rounding up favors the baseline).
pub fn matched_mps_bond_dim(n: usize, d: usize, graph: bool, rotations: bool) -> usize {
    let budget = enhanced_parameter_count(n, d, graph, rotations);
    let mut dm = d;
    while 4 * dm * dm * n < budget {
        dm += 1;
    }
    dm
}

fn sweep_config(cfg: &ExperimentConfig) -> SweepConfig {
    SweepConfig {
        max_sweeps: cfg.max_sweeps,
        energy_tol: cfg.energy_tol,
        phase_pairs: if cfg.graph_enabled {
            PhasePairs::All
        } else {
            PhasePairs::EdgeList(vec![])
        },
        rotation_updates: cfg.rotations_enabled,
        gradient_refine: cfg.gradient_refine,
        ..SweepConfig::default()
    }
}

/// Correlation pairs recorded for a rows x cols lattice: one horizontal
/// and one vertical nearest-neighbor pair plus the maximal-distance pair;
/// which pairs matter is left to post-processing.
fn correlation_pairs(rows: usize, cols: usize, map: &LatticeMap) -> Vec<(usize, usize)> {
    let mut pairs = vec![
        (map.chain_index(0, 0), map.chain_index(0, 1)),
        (map.chain_index(0, 0), map.chain_index(1, 0)),
        (map.chain_index(0, 0), map.chain_index(rows / 2, cols / 2)),
    ];
    pairs.sort_unstable();
    pairs.dedup();
    pairs.retain(|(a, b)| a != b);
    pairs
}

/// Ground-state benchmark on the periodic rows x cols transverse-field
/// Ising lattice: for each field value and seed, optimizes a
/// graph-enhanced state at bond dimension D and a bare-MPS baseline at the
/// matched parameter count, and records energies, errors against exact
/// diagonalization, convergence flags and Z-Z correlations.
pub fn run_ising_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let n = cfg.rows * cfg.cols;
    let map = LatticeMap::snake(cfg.rows, cfg.cols);
    let d_mps = matched_mps_bond_dim(n, cfg.bond_dim, cfg.graph_enabled, cfg.rotations_enabled);
    let pairs = correlation_pairs(cfg.rows, cfg.cols, &map);
    let scfg = sweep_config(cfg);
    let mut records = Vec::new();

    for &b in &cfg.field_grid {
        let h = build_ising_2d(cfg.rows, cfg.cols, b, cfg.coupling, &map);
        let point = format!("B={b}");
        let (e_exact, _) = oracle::exact_ground(&h)?;
        records.push(ResultRecord::new(
            "ising2d", "all", &point, "exact_energy", e_exact, 0.0,
        ));

        for &seed in &cfg.seeds {
            let t0 = Instant::now();
            let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
            init_rng.set_stream(0);
            let init =
                MpsTensorSet::random_gaussian(&mut init_rng, n, cfg.bond_dim, Boundary::Open);

            let mut state = RageState::from_mps(init.clone());
            // With enhancements on, phi = 0 / V = 1 is a stationary point,
            // so converge the bare tensors first and then break the
            // symmetry with a small random perturbation of both layers.
            if cfg.graph_enabled || cfg.rotations_enabled {
                mps_sweep(&mut state.mps, &h, &scfg)?;
                if cfg.graph_enabled {
                    for j in 0..n {
                        for k in (j + 1)..n {
                            state
                                .phi
                                .set_phase(j, k, 0.2 * (init_rng.gen::<f64>() - 0.5))?;
                        }
                    }
                }
                if cfg.rotations_enabled {
                    for j in 0..n {
                        let mut x = [1.0, 0.0, 0.0, 0.0];
                        for v in x.iter_mut().skip(1) {
                            *v = 0.2 * (init_rng.gen::<f64>() - 0.5);
                        }
                        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                        for v in x.iter_mut() {
                            *v /= norm;
                        }
                        state.set_rotation(j, rotation_from_coefficients(&x));
                    }
                }
            }
            let trace = sweep(&mut state, &h, &scfg)?;
            let e_rage = energy(&state, &h)?;
            let wall = t0.elapsed().as_secs_f64() * 1e3;
            records.push(ResultRecord::new(
                "ising2d", seed, &point, "rage_energy", e_rage, wall,
            ));
            records.push(ResultRecord::new(
                "ising2d", seed, &point, "rage_energy_error", e_rage - e_exact, wall,
            ));
            records.push(ResultRecord::new(
                "ising2d",
                seed,
                &point,
                "rage_converged",
                if trace.converged { 1.0 } else { 0.0 },
                wall,
            ));
            for &(a, c) in &pairs {
                let zz = state.two_point_correlation(a, c, &pauli_z(), &pauli_z())?;
                records.push(ResultRecord::new(
                    "ising2d",
                    seed,
                    &point,
                    format!("rage_zz({a};{c})"),
                    zz,
                    wall,
                ));
            }

            let t1 = Instant::now();
            let mut base_rng = ChaCha8Rng::seed_from_u64(seed);
            base_rng.set_stream(1);
            let mut baseline = if d_mps == cfg.bond_dim {
                init
            } else {
                MpsTensorSet::random_gaussian(&mut base_rng, n, d_mps, Boundary::Open)
            };
            let btrace = mps_sweep(&mut baseline, &h, &scfg)?;
            let e_mps = mps_energy(&baseline, &h)?;
            let bwall = t1.elapsed().as_secs_f64() * 1e3;
            records.push(ResultRecord::new(
                "ising2d", seed, &point, "mps_energy", e_mps, bwall,
            ));
            records.push(ResultRecord::new(
                "ising2d", seed, &point, "mps_energy_error", e_mps - e_exact, bwall,
            ));
            records.push(ResultRecord::new(
                "ising2d",
                seed,
                &point,
                "mps_converged",
                if btrace.converged { 1.0 } else { 0.0 },
                bwall,
            ));
            let base_state = RageState::from_mps(baseline);
            for &(a, c) in &pairs {
                let zz = base_state.two_point_correlation(a, c, &pauli_z(), &pauli_z())?;
                records.push(ResultRecord::new(
                    "ising2d",
                    seed,
                    &point,
                    format!("mps_zz({a};{c})"),
                    zz,
                    bwall,
                ));
            }
        }
    }
    Ok(records)
}

fn haar_unitary(rng: &mut impl Rng) -> CMat {
    oracle::random_unitary_2x2(rng)
}

/// Draws a `depth`-block circuit: each block is one single-site gate (per
/// the ensemble) followed by a controlled phase on a uniform pair.
pub fn draw_circuit(
    rng: &mut impl Rng,
    n: usize,
    depth: usize,
    ensemble: GateEnsemble,
) -> Circuit {
    let mut gates = Vec::with_capacity(2 * depth);
    for _ in 0..depth {
        let j = rng.gen_range(0..n);
        match ensemble {
            GateEnsemble::Mixed => gates.push(Gate::SingleQubit {
                j,
                u: haar_unitary(rng),
            }),
            GateEnsemble::AllDiagonal => gates.push(Gate::LocalDiagonal {
                j,
                alpha: rng.gen::<f64>() * TAU,
            }),
        }
        let a = rng.gen_range(0..n);
        let b = loop {
            let b = rng.gen_range(0..n);
            if b != a {
                break b;
            }
        };
        gates.push(Gate::DiagonalPhase {
            j: a.min(b),
            k: a.max(b),
            phi: rng.gen::<f64>() * TAU,
        });
    }
    Circuit::new(n, gates).expect("drawn gates are valid")
}

/// Random-circuit fidelity benchmark: for each seed one max-depth circuit
/// is drawn and evolved on both backends with per-gate fidelity tracking;
/// rows are emitted at each grid depth, plus per-depth means over seeds.
pub fn run_random_circuit_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let n = cfg.n_sites;
    if n > oracle::DEFAULT_ORACLE_CAP {
        return Err(RageError::OracleCap {
            n,
            cap: oracle::DEFAULT_ORACLE_CAP,
        });
    }
    let max_depth = *cfg.depth_grid.iter().max().expect("non-empty grid");
    let gate_cfg = SingleQubitConfig::default();
    let mut records = Vec::new();
    let mut sums: Vec<(f64, f64)> = vec![(0.0, 0.0); cfg.depth_grid.len()];
    let mut counted = 0usize;

    for &seed in &cfg.seeds {
        let t0 = Instant::now();
        let mut circuit_rng = ChaCha8Rng::seed_from_u64(seed);
        circuit_rng.set_stream(2);
        let circuit = draw_circuit(&mut circuit_rng, n, max_depth, cfg.ensemble);

        let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
        init_rng.set_stream(0);
        let init = MpsTensorSet::random_gaussian(&mut init_rng, n, cfg.bond_dim, Boundary::Open);

        let outcome = (|| -> Result<(Vec<f64>, Vec<f64>)> {
            let mut rage = RageState::from_mps(init.clone());
            let rage_fid = run_circuit(&mut rage, &circuit, true, &gate_cfg)?;
            let mut mps = init.clone();
            let mps_fid = run_circuit_mps(&mut mps, &circuit, true, &gate_cfg)?;
            Ok((rage_fid, mps_fid))
        })();
        let wall = t0.elapsed().as_secs_f64() * 1e3;
        let (rage_fid, mps_fid) = match outcome {
            Ok(pair) => pair,
            Err(e) => {
                // record the failure, keep the run going
                records.push(ResultRecord::new(
                    "random_circuit",
                    seed,
                    "depth=0",
                    "failed",
                    1.0,
                    wall,
                ));
                eprintln!("seed {seed}: {e}");
                continue;
            }
        };
        counted += 1;
        for (gi, &depth) in cfg.depth_grid.iter().enumerate() {
            // fidelity after the last gate of block `depth`
            let idx = (2 * depth).min(rage_fid.len()) - 1;
            let point = format!("depth={depth}");
            records.push(ResultRecord::new(
                "random_circuit", seed, &point, "rage_fidelity", rage_fid[idx], wall,
            ));
            records.push(ResultRecord::new(
                "random_circuit", seed, &point, "mps_fidelity", mps_fid[idx], wall,
            ));
            sums[gi].0 += rage_fid[idx];
            sums[gi].1 += mps_fid[idx];
        }
    }

    if counted > 0 {
        for (gi, &depth) in cfg.depth_grid.iter().enumerate() {
            let point = format!("depth={depth}");
            records.push(ResultRecord::new(
                "random_circuit",
                "all",
                &point,
                "mean_rage_fidelity",
                sums[gi].0 / counted as f64,
                0.0,
            ));
            records.push(ResultRecord::new(
                "random_circuit",
                "all",
                &point,
                "mean_mps_fidelity",
                sums[gi].1 / counted as f64,
                0.0,
            ));
        }
    }
    Ok(records)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    match cfg.experiment {
        ExperimentKind::Ising2d => run_ising_experiment(cfg),
        ExperimentKind::RandomCircuit => run_random_circuit_experiment(cfg),
        ExperimentKind::Verify => Ok(Vec::new()),
    }
}

/// Quick self-check against the dense oracle: reduced density matrices,
/// norms and a small ground-state run. Returns human-readable failures.
pub fn verify_suite(seeds: u64) -> Vec<String> {
    let mut failures = Vec::new();
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 4 + (seed as usize % 4);
        let d = 1 + (seed as usize % 3);
        let mut state = RageState::random(&mut rng, n, d, Boundary::Open);
        for j in 0..n {
            for k in (j + 1)..n {
                let _ = state.phi.set_phase(j, k, rng.gen::<f64>() * TAU);
            }
        }
        for j in 0..n {
            state.set_rotation(j, oracle::random_unitary_2x2(&mut rng));
        }
        let dense = match oracle::expand(&state) {
            Ok(v) => v,
            Err(e) => {
                failures.push(format!("seed {seed}: expand failed: {e}"));
                continue;
            }
        };
        let norm_err = (state.norm_sq().unwrap_or(f64::NAN) - dense.norm_sq()).abs();
        if !(norm_err < 1e-8) {
            failures.push(format!("seed {seed}: norm mismatch {norm_err:e}"));
        }
        for a in 0..n {
            for bsite in (a + 1)..n {
                let fast = state.reduced_density_matrix(&[a, bsite]);
                let slow = oracle::exact_rdm(&dense, &[a, bsite]);
                match (fast, slow) {
                    (Ok(f), Ok(s)) => {
                        let worst = f
                            .matrix
                            .iter()
                            .zip(s.matrix.iter())
                            .map(|(x, y)| (x - y).norm())
                            .fold(0.0_f64, f64::max);
                        if !(worst < 1e-10) {
                            failures.push(format!(
                                "seed {seed}: rdm({a},{bsite}) mismatch {worst:e}"
                            ));
                        }
                    }
                    (Err(e), _) | (_, Err(e)) => {
                        failures.push(format!("seed {seed}: rdm({a},{bsite}) error: {e}"))
                    }
                }
            }
        }
    }
    failures
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matched_bond_dim_rounds_up() {
        // N=16, D=4 enhanced budget: 4*16*16 + 120 + 64 = 1208;
        // bare MPS needs 4*d^2*16 >= 1208 -> d = 5.
        assert_eq!(matched_mps_bond_dim(16, 4, true, true), 5);
        assert_eq!(matched_mps_bond_dim(16, 4, false, false), 4);
    }

    #[test]
    fn csv_header_is_fixed() {
        let rec = ResultRecord::new("x", 1u64, "B=1", "energy", -1.0, 2.0);
        let csv = records_to_csv(&[rec]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "experiment,seed,point,metric,value,wall_ms");
        assert_eq!(lines.next().unwrap(), "x,1,B=1,energy,-1.0,2.0");
    }

    #[test]
    fn all_diagonal_circuit_stays_exact() {
        let cfg = ExperimentConfig {
            experiment: ExperimentKind::RandomCircuit,
            n_sites: 6,
            depth_grid: vec![1, 3],
            ensemble: GateEnsemble::AllDiagonal,
            bond_dim: 2,
            seeds: vec![1, 2],
            ..Default::default()
        };
        let records = run_random_circuit_experiment(&cfg).unwrap();
        for r in &records {
            if r.metric == "rage_fidelity" || r.metric == "mean_rage_fidelity" {
                assert!(r.value > 1.0 - 1e-10, "{}: {}", r.metric, r.value);
            }
        }
    }

    #[test]
    fn ising_smoke_run_2x2_reaches_exact() {
        let cfg = ExperimentConfig {
            experiment: ExperimentKind::Ising2d,
            rows: 2,
            cols: 2,
            field_grid: vec![2.0],
            bond_dim: 4,
            max_sweeps: 60,
            energy_tol: 1e-11,
            seeds: vec![3],
            ..Default::default()
        };
        let records = run_ising_experiment(&cfg).unwrap();
        let err = records
            .iter()
            .find(|r| r.metric == "rage_energy_error")
            .unwrap();
        assert!(err.value.abs() < 1e-6, "error {}", err.value);
    }

    #[test]
    fn determinism_across_reruns() {
        let cfg = ExperimentConfig {
            experiment: ExperimentKind::RandomCircuit,
            n_sites: 5,
            depth_grid: vec![2],
            bond_dim: 2,
            seeds: vec![11, 12],
            ..Default::default()
        };
        let a = run_random_circuit_experiment(&cfg).unwrap();
        let b = run_random_circuit_experiment(&cfg).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.value.to_bits(), y.value.to_bits(), "{}", x.metric);
        }
    }
}
