//! Files written by the subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// Shortest round-trip decimal, switching to exponent form for very small
/// or very large magnitudes.
pub fn num(x: f64) -> String {
    let m = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&m) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Optional value as a CSV field (empty when absent).
pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[derive(Debug)]
pub struct OutDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    /// Writes `header` and `rows`, one line each, and returns the text.
    pub fn csv<I>(&mut self, name: &str, header: &str, rows: I) -> Result<String>
    where
        I: IntoIterator<Item = String>,
    {
        let mut text = String::with_capacity(64);
        text.push_str(header);
        text.push('\n');
        for row in rows {
            text.push_str(&row);
            text.push('\n');
        }
        self.write(name, &text)?;
        Ok(text)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<String> {
        let mut text = serde_json::to_string_pretty(value).context("serializing report")?;
        text.push('\n');
        self.write(name, &text)?;
        Ok(text)
    }
}

/// One item of a run that could not be completed.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Failure {
    pub item: String,
    pub message: String,
}

impl Failure {
    pub fn new(item: impl Into<String>, err: impl std::fmt::Display) -> Self {
        Self {
            item: item.into(),
            message: err.to_string(),
        }
    }
}

#[derive(Serialize)]
pub struct ErrorReport<'a> {
    pub failed: usize,
    pub errors: &'a [Failure],
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, 1.0, -2.5, 1.0 / 12.0, 1e-20, 3.2e300, 123456.789] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(0.5), "0.5");
        assert_eq!(num(1e-20), "1e-20");
        assert_eq!(opt(None), "");
    }
}
