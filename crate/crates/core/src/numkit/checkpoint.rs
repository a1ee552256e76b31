//! Binary parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   8 bytes  b"NKCKPT\0" + version byte (currently 1)
//! count   u32      number of records
//! record:
//!   kind        u8   0 = weight matrix, 1 = bias vector
//!   role_len    u16  UTF-8 byte length of the role tag
//!   role        [u8] role tag, e.g. "policy", "q1", "inverse_dynamics"
//!   layer_index u32
//!   rows        u32
//!   cols        u32  (1 for bias vectors)
//!   payload     rows*cols f64, little-endian bit patterns
//! ```
//!
//! Floats round-trip bit-exactly: payloads are written and read as raw IEEE-754
//! bit patterns.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{CoreError, Result};

use super::matrix::Matrix;
use super::mlp::{Dense, MlpParams};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"NKCKPT\0\x01";

/// Writes named networks to `path`. Role tags must be unique.
pub fn save_networks(path: &Path, networks: &[(&str, &MlpParams)]) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(CHECKPOINT_MAGIC)?;
    let count: u32 = networks
        .iter()
        .map(|(_, p)| 2 * p.layers().len() as u32)
        .sum();
    w.write_all(&count.to_le_bytes())?;
    for (role, params) in networks {
        for (li, layer) in params.layers().iter().enumerate() {
            write_record(&mut w, 0, role, li as u32, layer.w.rows() as u32, layer.w.cols() as u32, layer.w.data())?;
            write_record(&mut w, 1, role, li as u32, layer.b.len() as u32, 1, &layer.b)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_record<W: Write>(
    w: &mut W,
    kind: u8,
    role: &str,
    layer_index: u32,
    rows: u32,
    cols: u32,
    payload: &[f64],
) -> Result<()> {
    w.write_all(&[kind])?;
    let role_bytes = role.as_bytes();
    w.write_all(&(role_bytes.len() as u16).to_le_bytes())?;
    w.write_all(role_bytes)?;
    w.write_all(&layer_index.to_le_bytes())?;
    w.write_all(&rows.to_le_bytes())?;
    w.write_all(&cols.to_le_bytes())?;
    for v in payload {
        w.write_all(&v.to_bits().to_le_bytes())?;
    }
    Ok(())
}

/// Reads every network in the checkpoint, keyed by role tag.
pub fn load_networks(path: &Path) -> Result<BTreeMap<String, MlpParams>> {
    let file = File::open(path)?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(CoreError::Checkpoint(format!(
            "bad magic/version: {magic:02x?}"
        )));
    }
    let count = read_u32(&mut r)?;

    // (role, layer) -> (weight, bias)
    let mut parts: BTreeMap<(String, u32), (Option<Matrix>, Option<Vec<f64>>)> = BTreeMap::new();
    for _ in 0..count {
        let mut kind = [0u8; 1];
        r.read_exact(&mut kind)?;
        let role_len = read_u16(&mut r)? as usize;
        let mut role_bytes = vec![0u8; role_len];
        r.read_exact(&mut role_bytes)?;
        let role = String::from_utf8(role_bytes)
            .map_err(|e| CoreError::Checkpoint(format!("role tag not UTF-8: {e}")))?;
        let layer_index = read_u32(&mut r)?;
        let rows = read_u32(&mut r)? as usize;
        let cols = read_u32(&mut r)? as usize;
        let mut payload = Vec::with_capacity(rows * cols);
        let mut buf = [0u8; 8];
        for _ in 0..rows * cols {
            r.read_exact(&mut buf)?;
            payload.push(f64::from_bits(u64::from_le_bytes(buf)));
        }
        let slot = parts.entry((role, layer_index)).or_insert((None, None));
        match kind[0] {
            0 => slot.0 = Some(Matrix::from_vec(rows, cols, payload)),
            1 => slot.1 = Some(payload),
            k => return Err(CoreError::Checkpoint(format!("unknown record kind {k}"))),
        }
    }

    let mut networks: BTreeMap<String, Vec<(u32, Dense)>> = BTreeMap::new();
    for ((role, li), (w, b)) in parts {
        let (w, b) = match (w, b) {
            (Some(w), Some(b)) => (w, b),
            _ => {
                return Err(CoreError::Checkpoint(format!(
                    "incomplete record pair for role {role} layer {li}"
                )))
            }
        };
        networks.entry(role).or_default().push((li, Dense { w, b }));
    }

    let mut out = BTreeMap::new();
    for (role, mut layers) in networks {
        layers.sort_by_key(|(li, _)| *li);
        for (expect, (li, _)) in layers.iter().enumerate() {
            if *li as usize != expect {
                return Err(CoreError::Checkpoint(format!(
                    "role {role}: missing layer {expect}"
                )));
            }
        }
        let dense: Vec<Dense> = layers.into_iter().map(|(_, d)| d).collect();
        out.insert(role, MlpParams::from_layers(dense));
    }
    Ok(out)
}

fn read_u16<R: Read>(r: &mut R) -> Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let a = MlpParams::new(&[3, 8, 2], &mut rng);
        let b = MlpParams::new(&[6, 4, 4, 12], &mut rng);
        let dir = std::env::temp_dir().join(format!("ckpt_test_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("nets.bin");
        save_networks(&path, &[("policy", &a), ("inverse_dynamics", &b)]).unwrap();
        let loaded = load_networks(&path).unwrap();
        assert!(loaded["policy"].bit_eq(&a));
        assert!(loaded["inverse_dynamics"].bit_eq(&b));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = std::env::temp_dir().join(format!("ckpt_bad_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.bin");
        std::fs::write(&path, b"NOTACKPT____").unwrap();
        assert!(load_networks(&path).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}
