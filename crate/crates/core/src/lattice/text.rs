//! Lattice text format.
//!
//! ```text
//! num_frames V frame_shift_ms
//! lp(0,0) lp(0,1) ... lp(0,V)      <- blank last
//! ...
//! ```

use std::fmt::Write as _;

use super::{EmissionLattice, LatticeError};

pub fn format_lattice(lattice: &EmissionLattice) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} {} {}",
        lattice.num_frames(),
        lattice.num_phonemes(),
        lattice.frame_shift_ms()
    );
    for row in lattice.rows() {
        let cols: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        out.push_str(&cols.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_lattice(text: &str) -> Result<EmissionLattice, LatticeError> {
    let err = |line: usize, msg: String| LatticeError::Parse { line, msg };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines
        .next()
        .ok_or_else(|| err(1, "missing header".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(err(
            hline,
            format!("expected 3 header fields, got {}", fields.len()),
        ));
    }
    let num_frames: usize = fields[0]
        .parse()
        .map_err(|e| err(hline, format!("num_frames: {e}")))?;
    let vocab: usize = fields[1]
        .parse()
        .map_err(|e| err(hline, format!("V: {e}")))?;
    let shift: f64 = fields[2]
        .parse()
        .map_err(|e| err(hline, format!("frame_shift_ms: {e}")))?;

    let mut rows = Vec::with_capacity(num_frames);
    for (lineno, line) in lines {
        let row = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| err(lineno, e.to_string()))?;
        if row.len() != vocab + 1 {
            return Err(err(
                lineno,
                format!("expected {} columns, got {}", vocab + 1, row.len()),
            ));
        }
        rows.push(row);
    }
    if rows.len() != num_frames {
        return Err(err(
            hline,
            format!("header promises {num_frames} frames, found {}", rows.len()),
        ));
    }
    EmissionLattice::from_rows(rows, shift)
}
