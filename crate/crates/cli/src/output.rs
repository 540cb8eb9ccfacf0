//! Result files. Every file is first written with a `.partial` suffix and
//! renamed only once all files of the run are complete.

use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;

fn io(path: &Path, e: std::io::Error) -> CliError {
    CliError::Run(format!("{}: {e}", path.display()))
}

fn partial(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

/// Write `(file name, contents)` pairs under `dir`; returns the final paths.
pub fn write_all(dir: &Path, files: &[(String, String)]) -> Result<Vec<PathBuf>, CliError> {
    let mut staged = Vec::new();
    for (name, contents) in files {
        let path = dir.join(name);
        let tmp = partial(&path);
        fs::write(&tmp, contents).map_err(|e| io(&tmp, e))?;
        staged.push((tmp, path));
    }
    for (tmp, path) in &staged {
        fs::rename(tmp, path).map_err(|e| io(path, e))?;
    }
    Ok(staged.into_iter().map(|(_, p)| p).collect())
}

/// Append a `run_config_hash` column to a CSV table that lacks one.
pub fn with_hash_column(csv: &str, hash: &str) -> String {
    let mut lines = csv.lines();
    let Some(header) = lines.next() else {
        return String::new();
    };
    if header.split(',').any(|c| c == "run_config_hash") {
        return csv.to_string();
    }
    let mut out = format!("{header},run_config_hash\n");
    for line in lines {
        out.push_str(line);
        out.push(',');
        out.push_str(hash);
        out.push('\n');
    }
    out
}
