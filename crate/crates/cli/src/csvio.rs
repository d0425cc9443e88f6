//! CSV and file plumbing shared by the commands.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// 17 significant digits; parses back to the identical f64.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes via a temp file in the same directory, then renames into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).map(Path::to_path_buf);
    if let Some(dir) = &dir {
        fs::create_dir_all(dir)?;
    }
    let tmp: PathBuf = {
        let mut name = path.file_name().map(|n| n.to_os_string()).ok_or_else(|| {
            CliError::usage(format!("not a writable file path: {}", path.display()))
        })?;
        name.push(".tmp");
        match dir {
            Some(d) => d.join(name),
            None => PathBuf::from(name),
        }
    };
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Two-column series, e.g. `x,psi` or `z,g`.
pub fn series_csv(header: (&str, &str), rows: &[(f64, f64)]) -> String {
    let mut out = String::with_capacity(rows.len() * 48 + 16);
    out.push_str(header.0);
    out.push(',');
    out.push_str(header.1);
    out.push('\n');
    for &(a, b) in rows {
        out.push_str(&fmt17(a));
        out.push(',');
        out.push_str(&fmt17(b));
        out.push('\n');
    }
    out
}

/// Matrix with a header row.
pub fn matrix_csv(names: &[String], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    out.push_str(&names.join(","));
    out.push('\n');
    for row in rows {
        let fields: Vec<String> = row.iter().map(|&v| fmt17(v)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Reads a headered all-numeric CSV into column names and rows.
pub fn read_matrix_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate();
    let (_, header) =
        lines.next().ok_or_else(|| CliError::data(format!("{} is empty", path.display())))?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> =
            line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| {
            CliError::data(format!("{} line {}: {e}", path.display(), lineno + 1))
        })?;
        if row.len() != names.len() {
            return Err(CliError::data(format!(
                "{} line {}: {} fields, expected {}",
                path.display(),
                lineno + 1,
                row.len(),
                names.len()
            )));
        }
        rows.push(row);
    }
    Ok((names, rows))
}
