//! Output files: CSV tables and JSON documents, each carrying the resolved
//! configuration, written atomically.

use std::path::{Path, PathBuf};

use anyhow::Context;
use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::RunConfig;

/// Provenance lines shared by every file of one invocation.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub command: &'static str,
    pub config: RunConfig,
}

impl Provenance {
    /// `#`-prefixed lines: command, derived seeds and the config as TOML.
    pub fn comment_block(&self) -> String {
        let seeds = self.config.seeds();
        let mut out = format!(
            "# influence {} {}\n# derived seeds: split={} bootstrap={} random_baseline={}\n# resolved config:\n",
            self.command,
            env!("CARGO_PKG_VERSION"),
            seeds.split,
            seeds.bootstrap,
            seeds.random_baseline
        );
        for line in self.config.to_toml().lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out
    }
}

/// Shortest round-trip text of a float, in exponent form when very small
/// or very large.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:?}")
    }
}

/// A CSV table assembled in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Table for matrix blocks: `prefix` columns, `row`, then `c0..c{width-1}`.
    pub fn matrix<S: Into<String>>(prefix: impl IntoIterator<Item = S>, width: usize) -> Self {
        let mut t = Self::new(prefix);
        t.columns.push("row".into());
        t.columns.extend((0..width).map(|j| format!("c{j}")));
        t
    }

    /// One line per matrix row; narrower matrices leave trailing cells empty.
    pub fn push_matrix(&mut self, prefix: &[String], m: &DMatrix<f64>) {
        let width = self.columns.len() - prefix.len() - 1;
        for i in 0..m.nrows() {
            let mut row = prefix.to_vec();
            row.push(i.to_string());
            row.extend((0..width).map(|j| if j < m.ncols() { num(m[(i, j)]) } else { String::new() }));
            self.push(row);
        }
    }

    fn render(&self, provenance: &Provenance) -> anyhow::Result<Vec<u8>> {
        let mut buf = provenance.comment_block().into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&self.columns)?;
            for r in &self.rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        Ok(buf)
    }
}

/// Writes `bytes` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

/// Collects the files one command writes under its output directory.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    provenance: Provenance,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn new(root: PathBuf, provenance: Provenance) -> Self {
        Self { root, provenance, written: Vec::new() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn csv(&mut self, name: &str, table: &Table) -> anyhow::Result<()> {
        let path = self.root.join(name);
        write_atomic(&path, &table.render(&self.provenance)?)?;
        self.written.push(path);
        Ok(())
    }

    /// `{"config": ..., "seeds": ..., "command": ..., "data": value}`.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let doc = serde_json::json!({
            "command": self.provenance.command,
            "config": self.provenance.config,
            "seeds": self.provenance.config.seeds(),
            "data": value,
        });
        let path = self.root.join(name);
        write_atomic(&path, serde_json::to_string_pretty(&doc)?.as_bytes())?;
        self.written.push(path);
        Ok(())
    }

    /// A file whose format has no comment syntax (session documents).
    pub fn raw(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let path = self.root.join(name);
        write_atomic(&path, bytes)?;
        self.written.push(path);
        Ok(())
    }
}

/// Reads a CSV written by [`OutputDir::csv`], skipping the comment block.
pub fn read_table(path: &Path) -> anyhow::Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let columns = rdr.headers()?.iter().map(str::to_string).collect();
    let rows = rdr.records().map(|r| r.map(|r| r.iter().map(str::to_string).collect())).collect::<Result<_, _>>()?;
    Ok(Table { columns, rows })
}
