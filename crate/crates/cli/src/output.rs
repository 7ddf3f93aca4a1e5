//! CSV artifacts and the run summary. Files are written next to their final
//! name and renamed into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

/// Fixed 17-significant-digit formatting.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct Csv {
    body: String,
    columns: usize,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut body = String::new();
        let names: Vec<&str> = header.iter().map(|h| h.as_ref()).collect();
        let _ = writeln!(body, "{}", names.join(","));
        Self {
            body,
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        debug_assert_eq!(cells.len(), self.columns);
        let _ = writeln!(self.body, "{}", cells.join(","));
    }

    pub fn numbers(&mut self, values: &[f64]) {
        let cells: Vec<String> = values.iter().map(|&v| num(v)).collect();
        self.row(&cells);
    }

    pub fn as_str(&self) -> &str {
        &self.body
    }
}

pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact");
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub status: String,
    pub config_sha256: String,
    pub seed: u64,
    pub wall_time_s: f64,
    pub artifacts: Vec<String>,
    pub certificates: Vec<Certificate>,
    pub messages: Vec<String>,
}

/// Collects artifacts and certificates of one run.
pub struct Sink {
    pub dir: PathBuf,
    pub quiet: bool,
    pub artifacts: Vec<String>,
    pub certificates: Vec<Certificate>,
    pub messages: Vec<String>,
}

impl Sink {
    pub fn new(dir: PathBuf, quiet: bool) -> Self {
        Self {
            dir,
            quiet,
            artifacts: Vec::new(),
            certificates: Vec::new(),
            messages: Vec::new(),
        }
    }

    pub fn write(&mut self, name: &str, csv: &Csv) -> std::io::Result<()> {
        write_atomic(&self.dir.join(name), csv.as_str())?;
        self.artifacts.push(name.to_string());
        if !self.quiet {
            println!("wrote {}", self.dir.join(name).display());
        }
        Ok(())
    }

    pub fn certify(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        let c = Certificate {
            name: name.into(),
            pass,
            detail: detail.into(),
        };
        if !self.quiet {
            println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        self.certificates.push(c);
    }

    pub fn note(&mut self, message: impl Into<String>) {
        let m = message.into();
        if !self.quiet {
            println!("{m}");
        }
        self.messages.push(m);
    }
}
