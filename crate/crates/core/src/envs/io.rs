//! File formats (version 1):
//!
//! - Trajectory dump: JSON-lines, one [`Transition`] per line with field names
//!   `{s, a, r, s_next, done}`; counterfactual rows additionally carry
//!   `"synthetic": true`.
//! - SEM datasets: CSV with a header row `x1..xp`, one generated sample per
//!   row.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{CoreError, Result};
use crate::numkit::Matrix;

use super::Transition;

pub fn write_transitions_jsonl(path: &Path, transitions: &[Transition]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for t in transitions {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a transition file, reporting the 1-based line number of any
/// malformed row.
pub fn read_transitions_jsonl(path: &Path) -> Result<Vec<Transition>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t: Transition = serde_json::from_str(&line).map_err(|e| CoreError::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        if !t.is_finite() {
            return Err(CoreError::Parse {
                line: idx + 1,
                message: "non-finite value in transition".to_string(),
            });
        }
        out.push(t);
    }
    Ok(out)
}

/// Writes an `n x p` data matrix as CSV with header `x1..xp`.
pub fn write_sem_csv(path: &Path, data: &Matrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let header: Vec<String> = (1..=data.cols()).map(|c| format!("x{c}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for r in 0..data.rows() {
        let row: Vec<String> = data.row(r).iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Strict CSV reader for SEM datasets: fixed `x1..xp` header, no ragged rows.
pub fn read_sem_csv(path: &Path) -> Result<Matrix> {
    let r = BufReader::new(File::open(path)?);
    let mut lines = r.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| CoreError::Parse {
        line: 1,
        message: "empty file".to_string(),
    })?;
    let header = header?;
    let cols: Vec<&str> = header.split(',').collect();
    for (i, c) in cols.iter().enumerate() {
        let expect = format!("x{}", i + 1);
        if *c != expect {
            return Err(CoreError::Parse {
                line: 1,
                message: format!("expected header column {expect}, found `{c}`"),
            });
        }
    }
    let p = cols.len();
    let mut data = Vec::new();
    let mut n = 0usize;
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != p {
            return Err(CoreError::Parse {
                line: idx + 1,
                message: format!("expected {p} fields, found {}", fields.len()),
            });
        }
        for f in fields {
            let v: f64 = f.parse().map_err(|e| CoreError::Parse {
                line: idx + 1,
                message: format!("bad float `{f}`: {e}"),
            })?;
            data.push(v);
        }
        n += 1;
    }
    Ok(Matrix::from_vec(n, p, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{random_rollout, EnvSpec};

    fn tmpdir(tag: &str) -> std::path::PathBuf {
        let d = std::env::temp_dir().join(format!("envio_{tag}_{}", std::process::id()));
        std::fs::create_dir_all(&d).unwrap();
        d
    }

    #[test]
    fn transitions_round_trip_and_line_errors_are_reported() {
        let dir = tmpdir("jsonl");
        let path = dir.join("t.jsonl");
        let ts = random_rollout(&EnvSpec::distractor_reacher(1), 50, 0);
        write_transitions_jsonl(&path, &ts).unwrap();
        let back = read_transitions_jsonl(&path).unwrap();
        assert_eq!(ts, back);

        let mut raw = std::fs::read_to_string(&path).unwrap();
        raw.push_str("{\"broken\": true}\n");
        std::fs::write(&path, raw).unwrap();
        match read_transitions_jsonl(&path) {
            Err(CoreError::Parse { line, .. }) => assert_eq!(line, 51),
            other => panic!("expected parse error, got {other:?}"),
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn sem_csv_round_trips_with_strict_header() {
        let dir = tmpdir("csv");
        let path = dir.join("d.csv");
        let m = Matrix::from_rows(&[vec![1.0, -0.5, 0.25], vec![0.125, 2.0, -4.0]]);
        write_sem_csv(&path, &m).unwrap();
        let back = read_sem_csv(&path).unwrap();
        assert_eq!(m, back);

        std::fs::write(&path, "x1,wrong\n1,2\n").unwrap();
        assert!(read_sem_csv(&path).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn header_only_csv_is_valid_and_empty() {
        let dir = tmpdir("csv_empty");
        let path = dir.join("e.csv");
        write_sem_csv(&path, &Matrix::zeros(0, 3)).unwrap();
        let back = read_sem_csv(&path).unwrap();
        assert_eq!(back.rows(), 0);
        assert_eq!(back.cols(), 3);
        std::fs::remove_dir_all(&dir).ok();
    }
}
