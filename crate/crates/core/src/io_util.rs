//! Shared text-format helpers: numeric formatting, line parsing and atomic writes.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Nine significant digits, the precision used by every dataset CSV.
pub fn fmt_sig9(x: f64) -> String {
    format!("{x:.8e}")
}

/// Seventeen significant digits; round-trips any finite `f64` exactly.
pub fn fmt_exact(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn round_sig9(x: f64) -> f64 {
    fmt_sig9(x).parse().expect("formatted float parses")
}

pub(crate) fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid number {field:?}"),
    })
}

pub(crate) fn parse_int<T: std::str::FromStr>(field: &str, line: usize) -> Result<T> {
    field.trim().parse::<T>().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid integer {field:?}"),
    })
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `contents` to a temporary file beside `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents.as_bytes())
        .and_then(|_| tmp.flush())
        .map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// SplitMix64 finalizer applied to `seed + (index + 1) * golden_gamma`.
///
/// Every per-item random substream (scenarios, per-class shuffles) is seeded
/// through this function so item `i` never depends on how many items precede it.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
