//! Per-run manifests: enough to reproduce a command and verify its
//! outputs, with no timestamps so reruns are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        write!(hex, "{byte:02x}").expect("string write");
    }
    hex
}

fn hash_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

/// Accumulates the facts of one command invocation and renders them as a
/// deterministic `key value` text file.
pub struct Manifest {
    command: String,
    config_hash: String,
    inputs: Vec<(PathBuf, String)>,
    outputs: Vec<(PathBuf, String)>,
}

impl Manifest {
    pub fn new(command: &str, canonical_config: &str) -> Self {
        Manifest {
            command: command.to_string(),
            config_hash: sha256_hex(canonical_config.as_bytes()),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn record_input(&mut self, path: &Path) -> CliResult<()> {
        let hash = hash_file(path)?;
        self.inputs.push((path.to_path_buf(), hash));
        Ok(())
    }

    pub fn record_output(&mut self, path: &Path) -> CliResult<()> {
        let hash = hash_file(path)?;
        self.outputs.push((path.to_path_buf(), hash));
        Ok(())
    }

    fn render(&self) -> String {
        let mut s = String::new();
        writeln!(s, "command {}", self.command).expect("string write");
        writeln!(s, "version {}", env!("CARGO_PKG_VERSION")).expect("string write");
        writeln!(s, "library {}", eventscope::VERSION).expect("string write");
        writeln!(s, "config sha256:{}", self.config_hash).expect("string write");
        for (path, hash) in &self.inputs {
            writeln!(s, "input {} sha256:{hash}", path.display()).expect("string write");
        }
        for (path, hash) in &self.outputs {
            writeln!(s, "output {} sha256:{hash}", path.display()).expect("string write");
        }
        s
    }

    /// Writes `<command>.manifest` into `dir`.
    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let path = dir.join(format!("{}.manifest", self.command));
        fs::write(&path, self.render())
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_matches_known_vector() {
        // SHA-256 of the empty string and of "abc" are fixed by the standard.
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_renders_deterministically_without_timestamps() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        fs::write(&input, "hello").unwrap();

        let build = || {
            let mut m = Manifest::new("label", "k = v\n");
            m.record_input(&input).unwrap();
            m.render()
        };
        let first = build();
        std::thread::sleep(std::time::Duration::from_millis(5));
        assert_eq!(first, build());
        assert!(first.starts_with("command label\n"));
        assert!(first.contains("config sha256:"));
        assert!(first.contains("in.txt sha256:"));
    }

    #[test]
    fn write_places_file_next_to_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = Manifest::new("ingest", "");
        manifest.write(dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("ingest.manifest")).unwrap();
        assert!(text.contains("command ingest"));
    }
}
