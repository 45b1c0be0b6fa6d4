//! Output directory staged in a sibling temporary directory and renamed into place on commit.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempfile::TempDir;
use volform_core::geometry::io::FieldFile;

pub const SCHEMA_VERSION: u32 = 1;

pub struct Staging {
    dir: TempDir,
    target: PathBuf,
}

impl Staging {
    /// Fails if `target` exists and is not an empty directory.
    pub fn begin(target: &Path) -> io::Result<Self> {
        if target.exists() && (!target.is_dir() || fs::read_dir(target)?.next().is_some()) {
            return Err(io::Error::new(
                io::ErrorKind::AlreadyExists,
                format!("output directory {} exists and is not empty", target.display()),
            ));
        }
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent)?;
        let dir = tempfile::Builder::new().prefix(".volform-staging-").tempdir_in(&parent)?;
        Ok(Self { dir, target: target.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> io::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(io::Error::other)?;
        bytes.push(b'\n');
        fs::write(self.path(name), bytes)
    }

    pub fn field(&self, name: &str, file: &FieldFile) -> io::Result<()> {
        file.save(&self.path(name)).map_err(io::Error::other)
    }

    pub fn csv<R: Serialize>(&self, name: &str, rows: &[R]) -> io::Result<()> {
        let mut w = csv::Writer::from_path(self.path(name)).map_err(io::Error::other)?;
        for r in rows {
            w.serialize(r).map_err(io::Error::other)?;
        }
        w.flush()
    }

    pub fn text(&self, name: &str, body: &str) -> io::Result<()> {
        fs::write(self.path(name), body)
    }

    /// Moves the staged directory to the target; nothing is visible there before this call.
    pub fn commit(self) -> io::Result<PathBuf> {
        if self.target.is_dir() {
            fs::remove_dir(&self.target)?;
        }
        let staged = self.dir.keep();
        fs::rename(&staged, &self.target)?;
        Ok(self.target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nothing_appears_until_commit() {
        let root = tempfile::tempdir().unwrap();
        let target = root.path().join("run");
        let st = Staging::begin(&target).unwrap();
        st.text("a.txt", "x").unwrap();
        assert!(!target.exists());
        drop(st);
        assert!(!target.exists());
        assert_eq!(fs::read_dir(root.path()).unwrap().count(), 0);

        let st = Staging::begin(&target).unwrap();
        st.text("a.txt", "x").unwrap();
        st.commit().unwrap();
        assert_eq!(fs::read_to_string(target.join("a.txt")).unwrap(), "x");
        assert!(Staging::begin(&target).is_err());
    }
}
