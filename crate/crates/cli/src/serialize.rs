//! Plain-text state files.
//!
//! Format, one section per line group:
//!   header:   `RAGE1 N D boundary`   (boundary: `open` | `periodic`)
//!   tensors:  for each site 0..N, for each physical index s in {0, 1},
//!             one line per matrix row holding `re im` pairs
//!   phases:   for each j in 0..N-1, one line with the upper-triangle
//!             entries phi(j, j+1) .. phi(j, N-1)
//!   rotations: one line per site with the 2x2 entries row-major as
//!             `re im` pairs (8 numbers)
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! deserialize(serialize(s)) reproduces s bit-exactly.

use std::fmt::Write as _;
use std::str::FromStr;

use rage_core::graph::AdjacencyPhaseMatrix;
use rage_core::linalg::{CMat, C64};
use rage_core::mps::{Boundary, MpsTensorSet};
use rage_core::state::RageState;
use rage_core::{RageError, Result};

pub const FORMAT_TAG: &str = "RAGE1";

fn push_pairs(out: &mut String, values: impl Iterator<Item = C64>) {
    let mut first = true;
    for z in values {
        if !first {
            out.push(' ');
        }
        write!(out, "{:?} {:?}", z.re, z.im).unwrap();
        first = false;
    }
    out.push('\n');
}

pub fn state_to_text(state: &RageState) -> String {
    let n = state.n_sites();
    let d = state.mps.bond_dim();
    let boundary = match state.mps.boundary() {
        Boundary::Open => "open",
        Boundary::Periodic => "periodic",
    };
    let mut out = String::new();
    writeln!(out, "{FORMAT_TAG} {n} {d} {boundary}").unwrap();
    for site in 0..n {
        for s in 0..2u8 {
            let m = state.mps.tensor(site, s);
            for row in m.rows() {
                push_pairs(&mut out, row.iter().cloned());
            }
        }
    }
    for j in 0..n.saturating_sub(1) {
        let mut first = true;
        for k in (j + 1)..n {
            if !first {
                out.push(' ');
            }
            write!(out, "{:?}", state.phi.phase(j, k)).unwrap();
            first = false;
        }
        out.push('\n');
    }
    for site in 0..n {
        push_pairs(&mut out, state.rotations[site].iter().cloned());
    }
    out
}

struct LineReader<'a> {
    lines: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> LineReader<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines(),
            line_no: 0,
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        loop {
            let line = self.lines.next().ok_or_else(|| RageError::ParseError {
                line: self.line_no + 1,
                message: format!("unexpected end of file while reading {what}"),
            })?;
            self.line_no += 1;
            if !line.trim().is_empty() {
                return Ok((self.line_no, line));
            }
        }
    }
}

fn parse_floats(line_no: usize, line: &str, want: usize, what: &str) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(want);
    for tok in line.split_whitespace() {
        let x = f64::from_str(tok).map_err(|_| RageError::ParseError {
            line: line_no,
            message: format!("bad number '{tok}' in {what}"),
        })?;
        out.push(x);
    }
    if out.len() != want {
        return Err(RageError::ParseError {
            line: line_no,
            message: format!("{what}: expected {want} numbers, found {}", out.len()),
        });
    }
    Ok(out)
}

pub fn state_from_text(text: &str) -> Result<RageState> {
    let mut rd = LineReader::new(text);
    let (hline_no, header) = rd.next("header")?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.first() != Some(&FORMAT_TAG) {
        return Err(RageError::ParseError {
            line: hline_no,
            message: format!(
                "unsupported state-file version '{}' (expected {FORMAT_TAG})",
                fields.first().unwrap_or(&"")
            ),
        });
    }
    if fields.len() != 4 {
        return Err(RageError::ParseError {
            line: hline_no,
            message: "header must be 'RAGE1 N D boundary'".to_string(),
        });
    }
    let n: usize = fields[1].parse().map_err(|_| RageError::ParseError {
        line: hline_no,
        message: format!("bad site count '{}'", fields[1]),
    })?;
    let d: usize = fields[2].parse().map_err(|_| RageError::ParseError {
        line: hline_no,
        message: format!("bad bond dimension '{}'", fields[2]),
    })?;
    let boundary = match fields[3] {
        "open" => Boundary::Open,
        "periodic" => Boundary::Periodic,
        other => {
            return Err(RageError::ParseError {
                line: hline_no,
                message: format!("unknown boundary '{other}'"),
            })
        }
    };
    if n == 0 || d == 0 {
        return Err(RageError::ParseError {
            line: hline_no,
            message: "N and D must be positive".to_string(),
        });
    }

    let shape = |site: usize| -> (usize, usize) {
        match boundary {
            Boundary::Periodic => (d, d),
            Boundary::Open => (
                if site == 0 { 1 } else { d },
                if site == n - 1 { 1 } else { d },
            ),
        }
    };

    let mut tensors = Vec::with_capacity(n);
    for site in 0..n {
        let (rows, cols) = shape(site);
        let mut pair: [CMat; 2] = [CMat::zeros((rows, cols)), CMat::zeros((rows, cols))];
        for (s, m) in pair.iter_mut().enumerate() {
            for r in 0..rows {
                let what = format!("tensor block of site {site} (physical index {s}, row {r})");
                let (no, line) = rd.next(&what)?;
                let vals = parse_floats(no, line, 2 * cols, &what)?;
                for c in 0..cols {
                    m[(r, c)] = C64::new(vals[2 * c], vals[2 * c + 1]);
                }
            }
        }
        tensors.push(pair);
    }
    let mps = MpsTensorSet::new(boundary, d, tensors)?;

    let mut phi = AdjacencyPhaseMatrix::zeros(n);
    for j in 0..n.saturating_sub(1) {
        let what = format!("phase row {j}");
        let (no, line) = rd.next(&what)?;
        let vals = parse_floats(no, line, n - 1 - j, &what)?;
        for (idx, k) in ((j + 1)..n).enumerate() {
            phi.set_phase(j, k, vals[idx])?;
        }
    }

    let mut rotations = Vec::with_capacity(n);
    for site in 0..n {
        let what = format!("rotation of site {site}");
        let (no, line) = rd.next(&what)?;
        let vals = parse_floats(no, line, 8, &what)?;
        let mut v = CMat::zeros((2, 2));
        for r in 0..2 {
            for c in 0..2 {
                let base = 4 * r + 2 * c;
                v[(r, c)] = C64::new(vals[base], vals[base + 1]);
            }
        }
        rotations.push(v);
    }

    RageState::new(mps, phi, rotations)
}

pub fn write_state(state: &RageState, path: &std::path::Path) -> std::io::Result<()> {
    std::fs::write(path, state_to_text(state))
}

pub fn read_state(path: &std::path::Path) -> Result<RageState> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RageError::Backend(format!("cannot read {}: {e}", path.display())))?;
    state_from_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_state(seed: u64, n: usize, d: usize, boundary: Boundary) -> RageState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = RageState::random(&mut rng, n, d, boundary);
        for j in 0..n {
            for k in (j + 1)..n {
                state
                    .phi
                    .set_phase(j, k, rand::Rng::gen::<f64>(&mut rng) * std::f64::consts::TAU)
                    .unwrap();
            }
        }
        for j in 0..n {
            state.set_rotation(j, rage_core::oracle::random_unitary_2x2(&mut rng));
        }
        state
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for (seed, boundary) in [(1, Boundary::Open), (2, Boundary::Periodic)] {
            let state = random_state(seed, 5, 3, boundary);
            let text = state_to_text(&state);
            let back = state_from_text(&text).unwrap();
            for site in 0..5 {
                for s in 0..2u8 {
                    assert_eq!(state.mps.tensor(site, s), back.mps.tensor(site, s));
                }
                assert_eq!(state.rotations[site], back.rotations[site]);
            }
            for j in 0..5 {
                for k in (j + 1)..5 {
                    assert_eq!(
                        state.phi.phase(j, k).to_bits(),
                        back.phi.phase(j, k).to_bits()
                    );
                }
            }
        }
    }

    #[test]
    fn truncated_tensor_block_names_the_site() {
        let state = random_state(3, 4, 2, Boundary::Open);
        let text = state_to_text(&state);
        let cut: String = text.lines().take(6).collect::<Vec<_>>().join("\n");
        let err = state_from_text(&cut).unwrap_err();
        match err {
            RageError::ParseError { message, .. } => {
                assert!(message.contains("site 1"), "message was: {message}")
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn version_mismatch_is_explicit() {
        let err = state_from_text("RAGE9 2 2 open\n").unwrap_err();
        match err {
            RageError::ParseError { line, message } => {
                assert_eq!(line, 1);
                assert!(message.contains("version"), "message was: {message}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn bad_number_reports_line() {
        let state = random_state(4, 3, 2, Boundary::Open);
        let text = state_to_text(&state).replace("RAGE1 3 2 open", "RAGE1 3 2 open");
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[2] = "zorp 1.0 2.0 3.0".to_string();
        let err = state_from_text(&lines.join("\n")).unwrap_err();
        match err {
            RageError::ParseError { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
