//! Byte-stable writers. Numbers use the shortest representation that parses
//! back to the same f64, so identical inputs give identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use optospec_core::{to_hz, Spectrum};
use serde::Serialize;

use crate::error::CliResult;

pub fn fmt_f64(v: f64) -> String {
    let mut buf = ryu::Buffer::new();
    buf.format(v).to_owned()
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create directory {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// Two-column CSV of a spectrum. `f_hz` labels the rows; without it the
/// grid is converted from rad/s.
pub fn write_spectrum_csv(
    path: &Path,
    column: &str,
    s: &Spectrum,
    f_hz: Option<&[f64]>,
) -> CliResult<()> {
    let converted: Vec<f64>;
    let f = match f_hz {
        Some(f) => f,
        None => {
            converted = s.grid().points().iter().map(|&w| to_hz(w)).collect();
            &converted
        }
    };
    assert_eq!(f.len(), s.len(), "row labels must match the grid");
    let mut w = create(path)?;
    writeln!(w, "f_hz,{column}")?;
    for (i, (&f, &v)) in f.iter().zip(s.values()).enumerate() {
        let v = if s.is_valid(i) { v } else { f64::NAN };
        writeln!(w, "{},{}", fmt_f64(f), fmt_f64(v))?;
    }
    w.flush()?;
    Ok(())
}

/// CSV with a leading `#` provenance line, a header and numeric rows.
pub fn write_table(
    path: &Path,
    comment: &str,
    header: &[&str],
    rows: impl Iterator<Item = Vec<f64>>,
) -> CliResult<()> {
    let mut w = create(path)?;
    writeln!(w, "# {comment}")?;
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let line: Vec<String> = row.into_iter().map(fmt_f64).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).context("serializing JSON")?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    out.with_file_name(name)
}

pub fn write_sidecar<T: Serialize>(out: &Path, meta: &T) -> CliResult<()> {
    write_json(&sidecar_path(out), meta)
}
