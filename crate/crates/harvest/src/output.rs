//! CSV, JSON and plot files, each written to a temporary sibling and renamed
//! into place.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Io(format!("not a file path: {}", path.display())))?;
    let tmp: PathBuf = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Shortest decimal that reads back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[derive(Debug, Default)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Csv {
        let mut text = header.join(",");
        text.push('\n');
        Csv { text }
    }

    pub fn row(&mut self, cells: &[String]) {
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_atomic(path, self.text.as_bytes())
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// Two-column plot data and a gnuplot script that draws it.
pub fn write_plot(dir: &Path, stem: &str, title: &str, xy: &[(f64, f64)], ylabel: &str) -> Result<(), CliError> {
    let mut dat = String::new();
    for (x, y) in xy {
        let _ = writeln!(dat, "{} {}", num(*x), num(*y));
    }
    write_atomic(&dir.join(format!("{stem}.dat")), dat.as_bytes())?;
    let gp = format!(
        "set terminal pngcairo size 800,600\n\
         set output '{stem}.png'\n\
         set title \"{title}\"\n\
         set xlabel \"lambda\"\n\
         set ylabel \"{ylabel}\"\n\
         set key off\n\
         set grid\n\
         plot '{stem}.dat' using 1:2 with linespoints pt 7 ps 0.4\n"
    );
    write_atomic(&dir.join(format!("{stem}.gp")), gp.as_bytes())
}
