//! Metadata header shared by every output file.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Hex SHA-256 of the compact JSON form of `config`.
pub fn config_hash<C: Serialize>(config: &C) -> Result<String> {
    let json = serde_json::to_string(config)?;
    let digest = Sha256::digest(json.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// `#`-prefixed lines: tool version, command, config hash, seed, any extra
/// parameter lines, and the full config as JSON.
pub fn header<C: Serialize>(command: &str, config: &C, seed: Option<u64>, extra: &[String]) -> Result<String> {
    let mut out = format!("# kcmlab {VERSION}\n# command: {command}\n# config_sha256: {}\n", config_hash(config)?);
    match seed {
        Some(s) => out.push_str(&format!("# seed: {s}\n")),
        None => out.push_str("# seed: none\n"),
    }
    for line in extra {
        out.push_str(&format!("# {line}\n"));
    }
    out.push_str(&format!("# config: {}\n", serde_json::to_string(config)?));
    Ok(out)
}

/// Writes to `out` when given, stdout otherwise.
pub fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = config_hash(&("fa2f", 0.1)).unwrap();
        assert_eq!(a, config_hash(&("fa2f", 0.1)).unwrap());
        assert_ne!(a, config_hash(&("fa2f", 0.2)).unwrap());
        assert_eq!(a.len(), 64);
    }
}
