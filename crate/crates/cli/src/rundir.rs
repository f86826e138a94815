//! Run directory: staged artifact writes and the hash manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";
const TMP_SUFFIX: &str = ".partial";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    /// Relative path (forward slashes) to sha256 hex digest.
    pub artifacts: BTreeMap<String, String>,
}

pub struct RunDir {
    root: PathBuf,
}

/// Artifacts produced by one command, written together on `commit`.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, rel: &str, bytes: Vec<u8>) {
        self.files.push((rel.to_string(), bytes));
    }

    /// Buffer the output of a writer closure.
    pub fn with<F>(&mut self, rel: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> har_audit::Result<()>,
    {
        let mut buf = Vec::new();
        f(&mut buf).with_context(|| format!("cannot render {rel}"))?;
        self.add(rel, buf);
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("cannot create run directory {}", root.display()))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Path of an artifact an earlier command must have produced.
    pub fn require(&self, rel: &str, producer: &str) -> Result<PathBuf> {
        let p = self.path(rel);
        if !p.is_file() {
            bail!("missing {} (run `{producer}` first)", p.display());
        }
        Ok(p)
    }

    /// Write every output through a temporary file and rename it into place.
    /// On failure, everything this call wrote is removed again.
    pub fn commit(&self, outputs: Outputs) -> Result<Vec<String>> {
        let mut done: Vec<PathBuf> = Vec::new();
        let mut names = Vec::new();
        for (rel, bytes) in outputs.files {
            let target = self.path(&rel);
            let tmp = PathBuf::from(format!("{}{TMP_SUFFIX}", target.display()));
            let res = (|| -> Result<()> {
                if let Some(parent) = target.parent() {
                    fs::create_dir_all(parent)?;
                }
                fs::write(&tmp, &bytes)?;
                fs::rename(&tmp, &target)?;
                Ok(())
            })();
            if let Err(e) = res {
                let _ = fs::remove_file(&tmp);
                for p in &done {
                    let _ = fs::remove_file(p);
                }
                return Err(e.context(format!("cannot write {}", target.display())));
            }
            done.push(target);
            names.push(rel);
        }
        self.write_manifest()?;
        Ok(names)
    }

    fn collect(&self, dir: &Path, out: &mut BTreeMap<String, String>) -> Result<()> {
        let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
        entries.sort_by_key(|e| e.file_name());
        for e in entries {
            let path = e.path();
            if path.is_dir() {
                self.collect(&path, out)?;
                continue;
            }
            let rel = path
                .strip_prefix(&self.root)
                .expect("inside run directory")
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect::<Vec<_>>()
                .join("/");
            if rel == MANIFEST || rel.ends_with(TMP_SUFFIX) {
                continue;
            }
            out.insert(rel, sha256_hex(&fs::read(&path)?));
        }
        Ok(())
    }

    pub fn manifest(&self) -> Result<Manifest> {
        let mut artifacts = BTreeMap::new();
        self.collect(&self.root, &mut artifacts)?;
        Ok(Manifest { artifacts })
    }

    fn write_manifest(&self) -> Result<()> {
        let mut buf = serde_json::to_vec_pretty(&self.manifest()?)?;
        buf.push(b'\n');
        let target = self.path(MANIFEST);
        let tmp = self.path(&format!("{MANIFEST}{TMP_SUFFIX}"));
        fs::write(&tmp, buf)?;
        fs::rename(&tmp, &target)?;
        Ok(())
    }
}
