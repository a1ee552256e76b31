//! Per-episode training metrics and their CSV form.
//!
//! Schema (version 1), one row per finished episode:
//!
//! ```text
//! step,episode,return,success,critic_loss,policy_loss,inverse_nll,empowerment_mean,synthetic_fraction,wallclock_s
//! ```
//!
//! `success` is 0/1. Losses are means over the episode's gradient steps
//! (0 when no gradient step ran, e.g. during warmup). `wallclock_s` is the
//! only non-deterministic column; determinism comparisons exclude it.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{CoreError, Result};

pub const METRICS_HEADER: &str = "step,episode,return,success,critic_loss,policy_loss,inverse_nll,empowerment_mean,synthetic_fraction,wallclock_s";

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRow {
    pub step: usize,
    pub episode: usize,
    pub ret: f64,
    pub success: bool,
    pub critic_loss: f64,
    pub policy_loss: f64,
    pub inverse_nll: f64,
    pub empowerment_mean: f64,
    pub synthetic_fraction: f64,
    pub wallclock_s: f64,
}

pub fn write_metrics_csv(path: &Path, rows: &[EpisodeRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{METRICS_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.step,
            r.episode,
            r.ret,
            u8::from(r.success),
            r.critic_loss,
            r.policy_loss,
            r.inverse_nll,
            r.empowerment_mean,
            r.synthetic_fraction,
            r.wallclock_s
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Strict reader: fixed header, no ragged rows.
pub fn read_metrics_csv(path: &Path) -> Result<Vec<EpisodeRow>> {
    let r = BufReader::new(File::open(path)?);
    let mut lines = r.lines().enumerate();
    let header = lines
        .next()
        .ok_or_else(|| CoreError::Parse {
            line: 1,
            message: "empty metrics file".to_string(),
        })?
        .1?;
    if header != METRICS_HEADER {
        return Err(CoreError::Parse {
            line: 1,
            message: format!("unexpected header `{header}`"),
        });
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(CoreError::Parse {
                line: idx + 1,
                message: format!("expected 10 fields, found {}", f.len()),
            });
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse().map_err(|e| CoreError::Parse {
                line: idx + 1,
                message: format!("bad {what} `{s}`: {e}"),
            })
        };
        rows.push(EpisodeRow {
            step: num(f[0], "step")? as usize,
            episode: num(f[1], "episode")? as usize,
            ret: num(f[2], "return")?,
            success: f[3] == "1",
            critic_loss: num(f[4], "critic_loss")?,
            policy_loss: num(f[5], "policy_loss")?,
            inverse_nll: num(f[6], "inverse_nll")?,
            empowerment_mean: num(f[7], "empowerment_mean")?,
            synthetic_fraction: num(f[8], "synthetic_fraction")?,
            wallclock_s: num(f[9], "wallclock_s")?,
        });
    }
    Ok(rows)
}
