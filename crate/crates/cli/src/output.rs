//! Output files. Each one starts with a header block carrying the program
//! version and the config echo; everything after it is a pure function of
//! the config.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sigma_forest::sampler::SampleBatch;

use crate::config::RunConfig;
use crate::CliError;

pub const PROGRAM: &str = "sigma-forest";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Serialize)]
pub struct Header {
    pub program: &'static str,
    pub version: &'static str,
    /// `key = value` lines, readable back as a config file.
    pub config: Vec<String>,
}

impl Header {
    pub fn new(cfg: &RunConfig) -> Self {
        Header {
            program: PROGRAM,
            version: VERSION,
            config: cfg.echo().into_iter().map(|(k, v)| format!("{k} = {v}")).collect(),
        }
    }

    fn comment_block(&self) -> String {
        let mut s = format!("# {} {}\n", self.program, self.version);
        for line in &self.config {
            s.push_str("# ");
            s.push_str(line);
            s.push('\n');
        }
        s
    }
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    header: &'a Header,
    #[serde(flatten)]
    body: &'a T,
}

pub struct Writer {
    dir: PathBuf,
    header: Header,
    written: Vec<PathBuf>,
}

impl Writer {
    pub fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        fs::create_dir_all(&cfg.out).map_err(|e| CliError::config(format!("{}: {e}", cfg.out.display())))?;
        Ok(Writer {
            dir: cfg.out.clone(),
            header: Header::new(cfg),
            written: Vec::new(),
        })
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn put(&mut self, name: &str, contents: String) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    /// CSV with `#` header lines; cells are written as given.
    pub fn csv(&mut self, name: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut s = self.header.comment_block();
        s.push_str(&columns.join(","));
        s.push('\n');
        for row in rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        self.put(name, s)
    }

    /// JSON object `{"header": …, <fields of body>}`.
    pub fn json<T: Serialize>(&mut self, name: &str, body: &T) -> Result<(), CliError> {
        let doc = Document {
            header: &self.header,
            body,
        };
        let mut s = serde_json::to_string_pretty(&doc).map_err(|e| CliError::numerical(e.to_string()))?;
        s.push('\n');
        self.put(name, s)
    }

    /// Draw records, one per line, after a `{"header": …}` line.
    pub fn jsonl(&mut self, name: &str, batch: &SampleBatch) -> Result<(), CliError> {
        let mut buf = serde_json::to_vec(&Document {
            header: &self.header,
            body: &serde_json::Map::new(),
        })
        .map_err(|e| CliError::numerical(e.to_string()))?;
        buf.push(b'\n');
        batch.write_jsonl(&mut buf)?;
        self.put(name, String::from_utf8(buf).expect("serde_json writes UTF-8"))
    }
}

/// Shortest round-trip decimal; NaN and infinities as `nan`, `inf`, `-inf`.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        x.to_string()
    }
}

pub fn file_name(p: &Path) -> String {
    p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default()
}
