//! Provenance-stamped writers. Every file carries the manifest hash and the
//! calibration ledger version: JSON documents as top-level fields, JSON lines
//! on every line, CSV files as leading `#` comment lines.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Stamp {
    pub manifest_sha256: String,
    pub ledger_version: String,
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    #[serde(flatten)]
    stamp: &'a Stamp,
    #[serde(flatten)]
    body: &'a T,
}

pub struct OutputDir {
    root: PathBuf,
    stamp: Stamp,
}

impl OutputDir {
    pub fn create(root: &Path, stamp: Stamp) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(CliError::io(format!("creating {}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            stamp,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn stamp(&self) -> &Stamp {
        &self.stamp
    }

    fn open(&self, name: &str) -> Result<BufWriter<fs::File>, CliError> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(CliError::io(format!("creating {}", parent.display())))?;
        }
        let f = fs::File::create(&path).map_err(CliError::io(format!("creating {}", path.display())))?;
        Ok(BufWriter::new(f))
    }

    fn finish(&self, name: &str, mut w: BufWriter<fs::File>) -> Result<(), CliError> {
        w.flush().map_err(CliError::io(format!("writing {name}")))
    }

    pub fn json<T: Serialize>(&self, name: &str, body: &T) -> Result<(), CliError> {
        let mut w = self.open(name)?;
        let doc = Stamped { stamp: &self.stamp, body };
        serde_json::to_writer_pretty(&mut w, &doc).map_err(scalesep::Error::from)?;
        w.write_all(b"\n").map_err(CliError::io(format!("writing {name}")))?;
        self.finish(name, w)
    }

    pub fn json_lines<T: Serialize>(&self, name: &str, rows: impl IntoIterator<Item = T>) -> Result<(), CliError> {
        let mut w = self.open(name)?;
        for body in rows {
            serde_json::to_writer(&mut w, &Stamped { stamp: &self.stamp, body: &body }).map_err(scalesep::Error::from)?;
            w.write_all(b"\n").map_err(CliError::io(format!("writing {name}")))?;
        }
        self.finish(name, w)
    }

    /// CSV body produced by `fill`, preceded by the provenance comments.
    pub fn csv(
        &self,
        name: &str,
        fill: impl FnOnce(&mut dyn Write) -> Result<(), scalesep::Error>,
    ) -> Result<(), CliError> {
        let mut w = self.open(name)?;
        writeln!(w, "# manifest_sha256={}", self.stamp.manifest_sha256)
            .and_then(|_| writeln!(w, "# ledger_version={}", self.stamp.ledger_version))
            .map_err(CliError::io(format!("writing {name}")))?;
        fill(&mut w)?;
        self.finish(name, w)
    }

    /// Raw bytes, for binary snapshots.
    pub fn raw(
        &self,
        name: &str,
        fill: impl FnOnce(&mut dyn Write) -> Result<(), scalesep::Error>,
    ) -> Result<(), CliError> {
        let mut w = self.open(name)?;
        fill(&mut w)?;
        self.finish(name, w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stamp() -> Stamp {
        Stamp {
            manifest_sha256: "ab".into(),
            ledger_version: "v".into(),
        }
    }

    #[test]
    fn every_format_carries_the_stamp() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutputDir::create(dir.path(), stamp()).unwrap();
        out.json("a.json", &serde_json::json!({"x": 1})).unwrap();
        out.json_lines("b.jsonl", [serde_json::json!({"y": 2}), serde_json::json!({"y": 3})]).unwrap();
        out.csv("c.csv", |w| Ok(w.write_all(b"h\n1\n")?)).unwrap();
        let a: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.path("a.json")).unwrap()).unwrap();
        assert_eq!(a["manifest_sha256"], "ab");
        assert_eq!(a["x"], 1);
        for line in fs::read_to_string(out.path("b.jsonl")).unwrap().lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert_eq!(v["ledger_version"], "v");
        }
        let c = fs::read_to_string(out.path("c.csv")).unwrap();
        assert!(c.starts_with("# manifest_sha256=ab\n# ledger_version=v\nh\n"));
    }
}
