//! CSV output with a fixed float format.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Scientific notation with 17 significant digits, so values round-trip.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `header` and `rows` to `dir/file_name`, returning the path.
pub fn write_csv(
    dir: &Path,
    file_name: &str,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<PathBuf> {
    let mut text = header.join(",");
    text.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        writeln!(text, "{}", row.join(",")).unwrap();
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(file_name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
