use std::io::{self, Write};

use super::TransitionMatrix;

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes `state,probability` rows with 17 significant digits.
pub fn write_distribution_csv<W: Write>(mut out: W, labels: &[String], probs: &[f64]) -> io::Result<()> {
    writeln!(out, "state,probability")?;
    for (l, p) in labels.iter().zip(probs) {
        writeln!(out, "{},{:.16e}", quote(l), p)?;
    }
    Ok(())
}

/// Writes a dense matrix, one row per source state.
pub fn write_matrix_csv<W: Write>(mut out: W, labels: &[String], t: &TransitionMatrix) -> io::Result<()> {
    write!(out, "from")?;
    for l in labels {
        write!(out, ",{}", quote(l))?;
    }
    writeln!(out)?;
    for (i, l) in labels.iter().enumerate() {
        write!(out, "{}", quote(l))?;
        for p in t.row(i) {
            write!(out, ",{p:.16e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
