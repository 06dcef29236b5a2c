//! Output directory bookkeeping: CSV tables, JSON summaries and the run
//! manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Single writer for one run's output directory. Every file written through
/// it is listed, with its hash, in the manifest.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<(String, String)>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[(String, String)] {
        &self.files
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, bytes)?;
        self.files.push((name.to_string(), sha256_hex(bytes)));
        Ok(path)
    }

    /// Write a CSV table built by `fill`.
    pub fn csv<F>(&mut self, name: &str, fill: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        fill(&mut w)?;
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        self.put(name, &bytes)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.put(name, &bytes)
    }

    /// Plain-text manifest; not itself listed.
    pub fn manifest(&self, header: &[(String, String)], tasks: &[String]) -> Result<PathBuf> {
        let path = self.root.join("manifest.txt");
        let mut f = fs::File::create(&path)?;
        for (k, v) in header {
            writeln!(f, "{k} {v}")?;
        }
        for t in tasks {
            writeln!(f, "{t}")?;
        }
        for (name, hash) in &self.files {
            writeln!(f, "file {name} sha256 {hash}")?;
        }
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn files_are_hashed_and_listed() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(&dir.path().join("run")).unwrap();
        out.csv("t.csv", |w| {
            w.write_record(["a", "b,c"])?;
            Ok(())
        })
        .unwrap();
        out.json("s.json", &vec![1.5, 2.0]).unwrap();
        let m = out
            .manifest(&[("seed".into(), "7".into())], &["task 1 x passed".into()])
            .unwrap();
        let text = fs::read_to_string(m).unwrap();
        assert!(text.starts_with("seed 7\ntask 1 x passed\nfile t.csv sha256 "));
        let csv = fs::read_to_string(dir.path().join("run/t.csv")).unwrap();
        assert_eq!(csv, "a,\"b,c\"\n");
        assert_eq!(sha256_hex(b"abc").len(), 64);
    }
}
