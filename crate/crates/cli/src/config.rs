//! Experiment configuration: TOML file plus `--set key=value` overrides.
//! The fully resolved config is echoed next to the results as a JSON
//! sidecar so every output directory records exactly what produced it.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Ising2d,
    RandomCircuit,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateEnsemble {
    /// Haar-random single-qubit unitary on a uniform site, then a
    /// controlled phase with phase uniform in [0, 2pi) on a uniform pair.
    Mixed,
    /// Random local diagonal then a random controlled phase; every gate is
    /// diagonal, so the graph-enhanced simulation is exact.
    AllDiagonal,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,

    // lattice ground-state experiment
    pub rows: usize,
    pub cols: usize,
    pub field_grid: Vec<f64>,
    pub coupling: f64,

    // random-circuit experiment
    pub n_sites: usize,
    pub depth_grid: Vec<usize>,
    pub ensemble: GateEnsemble,

    // shared variational knobs
    pub bond_dim: usize,
    pub graph_enabled: bool,
    pub rotations_enabled: bool,
    pub max_sweeps: usize,
    pub energy_tol: f64,
    pub gradient_refine: bool,

    pub seeds: Vec<u64>,
    pub output_dir: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::Ising2d,
            rows: 4,
            cols: 4,
            field_grid: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
            coupling: 1.0,
            n_sites: 10,
            depth_grid: (1..=10).collect(),
            ensemble: GateEnsemble::Mixed,
            bond_dim: 4,
            graph_enabled: true,
            rotations_enabled: true,
            max_sweeps: 40,
            energy_tol: 1e-9,
            gradient_refine: false,
            seeds: (1..=10).collect(),
            output_dir: "results".to_string(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), String> {
        match self.experiment {
            ExperimentKind::Ising2d => {
                if self.rows < 2 || self.cols < 2 {
                    return Err("lattice must be at least 2x2".into());
                }
                if self.field_grid.is_empty() {
                    return Err("field_grid must be non-empty".into());
                }
            }
            ExperimentKind::RandomCircuit => {
                if self.n_sites < 2 {
                    return Err("n_sites must be at least 2".into());
                }
                if self.depth_grid.is_empty() {
                    return Err("depth_grid must be non-empty".into());
                }
            }
            ExperimentKind::Verify => {}
        }
        if self.bond_dim == 0 {
            return Err("bond_dim must be positive".into());
        }
        if self.seeds.is_empty() {
            return Err("seeds must be non-empty".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err("seeds must be distinct".into());
        }
        Ok(())
    }
}

/// Parses the TOML text, applies dotted `key=value` overrides, and
/// validates. Override values are parsed as TOML scalars/arrays; bare
/// words fall back to strings.
pub fn load_config(text: &str, overrides: &[String]) -> Result<ExperimentConfig, String> {
    let mut value: toml::Value = text
        .parse()
        .map_err(|e| format!("config parse error: {e}"))?;
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| format!("override '{item}' is not key=value"))?;
        // a bare scalar is not a valid TOML document; wrap it in a key
        let parsed: toml::Value = match format!("v = {raw}").parse::<toml::Value>() {
            Ok(toml::Value::Table(mut t)) => t.remove("v").unwrap(),
            _ => toml::Value::String(raw.to_string()),
        };
        set_path(&mut value, key.trim(), parsed)?;
    }
    let cfg: ExperimentConfig = value
        .try_into()
        .map_err(|e| format!("config field error: {e}"))?;
    cfg.validate()?;
    Ok(cfg)
}

fn set_path(root: &mut toml::Value, key: &str, new: toml::Value) -> Result<(), String> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = cur
            .as_table_mut()
            .ok_or_else(|| format!("override path '{key}' does not address a table"))?;
        if i + 1 == parts.len() {
            table.insert(part.to_string(), new);
            return Ok(());
        }
        cur = table
            .entry(part.to_string())
            .or_insert(toml::Value::Table(Default::default()));
    }
    Err(format!("empty override key in '{key}'"))
}
