pub mod adapter_check;
pub mod bench;
pub mod overlay;
pub mod render;
pub mod simulate;

use std::path::Path;

use crate::CliError;

/// Parses `a,b` or `a` (second component 0).
pub fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |p: &str| p.parse::<f64>().map_err(|e| format!("bad number `{p}`: {e}"));
    match parts.as_slice() {
        [a] => Ok([num(a)?, 0.0]),
        [a, b] => Ok([num(a)?, num(b)?]),
        _ => Err(format!("expected X or X,Y, got `{s}`")),
    }
}

pub fn parse_rgb(s: &str) -> Result<[u8; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected R,G,B, got `{s}`"));
    }
    let mut out = [0u8; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|e| format!("bad channel `{p}`: {e}"))?;
    }
    Ok(out)
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
