//! Run manifest: config snapshot, content hash, seed list, output layout, and
//! cached normalization references.

use std::path::Path;

use serde::{Deserialize, Serialize};

use causal_rl::agent::AgentConfig;
use causal_rl::eval::ReferenceReturns;
use causal_rl::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: AgentConfig,
    /// Content hash over the canonical config JSON, crate version, env name,
    /// and mode.
    pub content_hash: String,
    pub seeds: Vec<u64>,
    pub env: String,
    pub baseline: bool,
    /// Paths relative to the manifest's directory; every listed file exists
    /// when the run ends successfully.
    pub outputs: Vec<String>,
    /// Cached normalization references (computed, never hardcoded).
    pub references: ReferenceReturns,
}

impl RunManifest {
    pub fn content_hash_for(config: &AgentConfig, env: &str, baseline: bool) -> String {
        let blob = format!(
            "{}|{}|{}|{}",
            serde_json::to_string(config).expect("config serializes"),
            env!("CARGO_PKG_VERSION"),
            env,
            baseline
        );
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in blob.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100_0000_01b3);
        }
        format!("{h:016x}")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RunManifest> {
        let data = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&data)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trips() {
        let m = RunManifest {
            config: AgentConfig::default(),
            content_hash: RunManifest::content_hash_for(
                &AgentConfig::default(),
                "distractor-reacher-8",
                false,
            ),
            seeds: vec![0, 1, 2, 3],
            env: "distractor-reacher-8".to_string(),
            baseline: false,
            outputs: vec!["seed_0/metrics.csv".to_string()],
            references: ReferenceReturns {
                random: -150.0,
                oracle: -20.0,
            },
        };
        let dir = std::env::temp_dir().join(format!("manifest_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("manifest.json");
        m.save(&path).unwrap();
        let back = RunManifest::load(&path).unwrap();
        assert_eq!(m, back);
        std::fs::remove_dir_all(&dir).ok();
    }
}
