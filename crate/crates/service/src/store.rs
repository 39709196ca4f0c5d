//! On-disk layout under the data directory:
//!
//! ```text
//! sessions/<id>.json        one document per session
//! corpora/<id>.jsonl        uploaded corpora, verbatim
//! artifacts/<key>/*.json    graph dump and landscape, keyed by content hash
//! ```

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use litnav_core::agent::{Artifacts, Session};
use serde::{Deserialize, Serialize};

use crate::payload::landscape;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PersistedSession {
    pub corpus_id: Option<String>,
    pub session: Session,
}

#[derive(Debug, Clone)]
pub struct DataDir {
    root: PathBuf,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)
}

fn read_dir_sorted(dir: &Path, ext: &str) -> io::Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = match fs::read_dir(dir) {
        Ok(entries) => entries.filter_map(|e| e.ok().map(|e| e.path())).collect(),
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    paths.retain(|p| p.extension().is_some_and(|x| x == ext));
    paths.sort();
    Ok(paths)
}

impl DataDir {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<DataDir> {
        let root = root.into();
        for sub in ["sessions", "corpora", "artifacts"] {
            fs::create_dir_all(root.join(sub))?;
        }
        Ok(DataDir { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn save_session(&self, s: &PersistedSession) -> io::Result<()> {
        let bytes = serde_json::to_vec_pretty(s).map_err(io::Error::other)?;
        write_atomic(&self.root.join("sessions").join(format!("{}.json", s.session.id)), &bytes)
    }

    /// Every readable session document; unreadable ones are logged and skipped.
    pub fn load_sessions(&self) -> io::Result<Vec<PersistedSession>> {
        let mut out = Vec::new();
        for path in read_dir_sorted(&self.root.join("sessions"), "json")? {
            match fs::read(&path).map_err(|e| e.to_string()).and_then(|b| serde_json::from_slice(&b).map_err(|e| e.to_string())) {
                Ok(s) => out.push(s),
                Err(e) => tracing::warn!(path = %path.display(), error = %e, "skipping unreadable session"),
            }
        }
        Ok(out)
    }

    pub fn save_corpus(&self, id: &str, body: &str) -> io::Result<()> {
        write_atomic(&self.root.join("corpora").join(format!("{id}.jsonl")), body.as_bytes())
    }

    pub fn load_corpora(&self) -> io::Result<Vec<(String, String)>> {
        read_dir_sorted(&self.root.join("corpora"), "jsonl")?
            .into_iter()
            .map(|p| {
                let id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                Ok((id, fs::read_to_string(&p)?))
            })
            .collect()
    }

    pub fn artifact_dir(&self, key: &str) -> PathBuf {
        self.root.join("artifacts").join(key)
    }

    /// Writes the graph dump and landscape once per artifact key.
    pub fn save_artifacts(&self, a: &Artifacts) -> io::Result<()> {
        let dir = self.artifact_dir(a.key());
        if dir.join("landscape.json").exists() {
            return Ok(());
        }
        fs::create_dir_all(&dir)?;
        write_atomic(&dir.join("graph.json"), &serde_json::to_vec(&a.bkg.dump()).map_err(io::Error::other)?)?;
        write_atomic(&dir.join("landscape.json"), &serde_json::to_vec(&landscape(a)).map_err(io::Error::other)?)
    }
}
