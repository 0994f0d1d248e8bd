//! Report rendering. Every row appears in `kv` output; rows marked for text
//! also appear in the human-readable form, so `kv` is always a superset.

use std::fmt::Display;
use std::io::{self, Write};

use clap::ValueEnum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Kv,
}

struct Row {
    key: String,
    value: String,
    text: Option<&'static str>,
}

#[derive(Default)]
pub struct Report {
    rows: Vec<Row>,
}

impl Report {
    /// A row shown in both formats, labelled `label` in text output.
    pub fn show(&mut self, key: impl Into<String>, label: &'static str, value: impl Display) {
        self.rows.push(Row {
            key: key.into(),
            value: value.to_string(),
            text: Some(label),
        });
    }

    /// A row shown in `kv` output only.
    pub fn kv(&mut self, key: impl Into<String>, value: impl Display) {
        self.rows.push(Row {
            key: key.into(),
            value: value.to_string(),
            text: None,
        });
    }

    pub fn write(&self, format: Format, out: &mut impl Write) -> io::Result<()> {
        match format {
            Format::Kv => {
                for r in &self.rows {
                    writeln!(out, "{}={}", r.key, r.value)?;
                }
            }
            Format::Text => {
                let width = self.rows.iter().filter_map(|r| r.text).map(str::len).max().unwrap_or(0);
                for r in &self.rows {
                    if let Some(label) = r.text {
                        writeln!(out, "{label:<width$}  {}", r.value)?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Values print in shortest round-trip form; infinity as `inf`.
pub fn value(v: f64) -> String {
    if v.is_infinite() && v > 0.0 {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

pub fn seconds(s: f64) -> String {
    format!("{s:.3}")
}
