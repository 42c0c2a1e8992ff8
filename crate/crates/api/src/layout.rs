//! Directory layout under the data root. The CLI writes it, the server
//! reads it.

use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataRoot {
    root: PathBuf,
}

impl DataRoot {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DataRoot { root: root.into() }
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    /// One `<source_id>.json` descriptor per source.
    pub fn catalog(&self) -> PathBuf {
        self.root.join("catalog")
    }

    pub fn window(&self) -> PathBuf {
        self.root.join("window")
    }

    pub fn history(&self) -> PathBuf {
        self.root.join("history")
    }

    pub fn context(&self) -> PathBuf {
        self.root.join("context")
    }

    pub fn models(&self) -> PathBuf {
        self.root.join("models")
    }

    pub fn registry(&self) -> PathBuf {
        self.models().join("registry.json")
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }

    /// Per-source last-success instants kept by `ingest`.
    pub fn ingest_state(&self) -> PathBuf {
        self.root.join("ingest-state.json")
    }
}
