use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

/// One file written by a run.
#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub format: &'static str,
    /// Data rows (CSV without header, JSON-lines records, 1 for JSON).
    pub rows: usize,
}

/// Full-precision, round-trippable number formatting.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Writer for a run's output directory; records every file it writes.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<FileRecord>,
    events: Vec<serde_json::Value>,
}

impl Outputs {
    pub fn create(dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            events: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }

    fn record(&mut self, name: &str, format: &'static str, rows: usize) {
        self.files.retain(|f| f.path != name);
        self.files.push(FileRecord {
            path: name.to_string(),
            format,
            rows,
        });
    }

    /// CSV with a header row; the header is written even when `rows` is empty.
    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> anyhow::Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        let mut count = 0;
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            w.write_record(&row).with_context(|| format!("writing {}", path.display()))?;
            count += 1;
        }
        w.flush().with_context(|| format!("writing {}", path.display()))?;
        self.record(name, "csv", count);
        Ok(())
    }

    /// CSV produced by a custom writer; rows are counted from the file.
    pub fn csv_with(
        &mut self,
        name: &str,
        write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        let file = File::create(&path).with_context(|| format!("writing {}", path.display()))?;
        let mut w = BufWriter::new(file);
        write(&mut w).with_context(|| format!("writing {}", path.display()))?;
        w.flush()?;
        let lines = fs::read_to_string(&path)?.lines().count();
        self.record(name, "csv", lines.saturating_sub(1));
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        let text = serde_json::to_string_pretty(value)?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        self.record(name, "json", 1);
        Ok(())
    }

    /// Queue an event for `events.jsonl`.
    pub fn event(&mut self, kind: &str, payload: serde_json::Value) {
        self.events.push(serde_json::json!({ "event": kind, "data": payload }));
    }

    pub fn flush_events(&mut self) -> anyhow::Result<()> {
        let path = self.dir.join("events.jsonl");
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("writing {}", path.display()))?);
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        let n = self.events.len();
        self.record("events.jsonl", "jsonl", n);
        Ok(())
    }

    /// Write `manifest.json` through a temporary file and a rename.
    pub fn write_manifest<T: Serialize>(&self, manifest: &T) -> anyhow::Result<()> {
        let tmp = self.dir.join(".manifest.json.tmp");
        let dst = self.dir.join("manifest.json");
        {
            let mut f = File::create(&tmp).with_context(|| format!("writing {}", tmp.display()))?;
            f.write_all(serde_json::to_string_pretty(manifest)?.as_bytes())?;
            f.write_all(b"\n")?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &dst).with_context(|| format!("renaming manifest into {}", dst.display()))?;
        Ok(())
    }
}
