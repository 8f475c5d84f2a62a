use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const FILES_MANIFEST: &str = "files.txt";

/// Output directory that records every file written through it.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    files: Vec<PathBuf>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Path for `name` inside the run, registered as produced.
    pub fn register(&mut self, name: &str) -> PathBuf {
        let rel = PathBuf::from(name);
        if !self.files.contains(&rel) {
            self.files.push(rel);
        }
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.register(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.files
    }

    /// Writes the list of produced files, one relative path per line.
    pub fn finish(self) -> Result<PathBuf> {
        let mut s = String::new();
        for f in &self.files {
            s.push_str(&f.to_string_lossy());
            s.push('\n');
        }
        let path = self.root.join(FILES_MANIFEST);
        fs::write(&path, s).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
