//! Line-delimited JSON records and CSV tables.
//!
//! Every JSON line has the shape
//! `{"schema":1,"kind":...,"config":{...},"result":{...}}`. A CSV table
//! starts with a `# config: {...}` comment carrying the same config.

use std::io::Write;

use serde::{Serialize, Serializer};

use quench_core::glauber::Boundary;

use crate::config::Settings;
use crate::Error;

pub const SCHEMA: u32 = 1;

pub fn boundary_name<S: Serializer>(b: &Boundary, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(b.name())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn parse(s: &str) -> Result<Format, Error> {
        match s {
            "json" | "jsonl" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(Error::Usage(format!("unknown format {s:?} (json or csv)"))),
        }
    }
}

#[derive(Serialize)]
struct Record<'a, T: Serialize> {
    schema: u32,
    kind: &'a str,
    config: &'a Settings,
    result: &'a T,
}

/// Serialized access to the output stream.
pub struct Sink<'w> {
    out: &'w mut dyn Write,
    format: Format,
    config: Settings,
    csv_started: bool,
}

impl<'w> Sink<'w> {
    pub fn new(out: &'w mut dyn Write, format: Format, config: Settings) -> Self {
        Sink { out, format, config, csv_started: false }
    }

    pub fn format(&self) -> Format {
        self.format
    }

    pub fn config(&self) -> &Settings {
        &self.config
    }

    /// One JSON record; ignored in CSV mode.
    pub fn record<T: Serialize>(&mut self, kind: &str, result: &T) -> Result<(), Error> {
        if self.format != Format::Json {
            return Ok(());
        }
        let line = serde_json::to_string(&Record { schema: SCHEMA, kind, config: &self.config, result })?;
        writeln!(self.out, "{line}")?;
        Ok(())
    }

    /// Rows of the CSV summary table; ignored in JSON mode.
    pub fn rows<T: Serialize>(&mut self, rows: &[T]) -> Result<(), Error> {
        if self.format != Format::Csv {
            return Ok(());
        }
        if !self.csv_started {
            writeln!(self.out, "# config: {}", serde_json::to_string(&self.config)?)?;
        }
        let mut w = csv::WriterBuilder::new().has_headers(!self.csv_started).from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Usage(e.to_string()))?;
        self.out.write_all(&bytes)?;
        self.csv_started = true;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), Error> {
        self.out.flush()?;
        Ok(())
    }
}
