//! Output formatting shared by the CSV writers: locale-independent numbers
//! with six significant digits, and atomic file writes (temp file + rename).

use std::fs;
use std::io::Write;
use std::path::Path;

/// Format with `sig` significant digits, plain decimal notation, `.` as the
/// decimal separator. NaN/inf render as `NaN`/`inf` (they never appear in
/// valid reports).
pub fn fmt_sig(x: f64, sig: u32) -> String {
    assert!(sig >= 1);
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (sig as i32 - 1 - exp).max(0);
    let factor = 10f64.powi(decimals);
    let rounded = (x * factor).round() / factor;
    // Rounding can bump the magnitude (0.99995 -> 1.0000); recompute once.
    let exp = rounded.abs().log10().floor() as i32;
    let decimals = (sig as i32 - 1 - exp).max(0) as usize;
    format!("{rounded:.decimals$}")
}

/// Six significant digits; integral values are written without a fraction.
pub fn fmt_num(x: f64) -> String {
    if x.is_finite() && x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        fmt_sig(x, 6)
    }
}

/// Write `contents` to `path` atomically: write a sibling temp file, then
/// rename over the target.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = path.with_extension(format!(
        "{}.tmp{}",
        path.extension().and_then(|e| e.to_str()).unwrap_or(""),
        std::process::id()
    ));
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
    }
    let mut file = fs::File::create(&tmp)?;
    file.write_all(contents)?;
    file.sync_all()?;
    drop(file);
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_sig_gives_six_significant_digits() {
        assert_eq!(fmt_sig(0.5849625007211562, 6), "0.584963");
        assert_eq!(fmt_sig(13.540251005511896, 6), "13.5403");
        assert_eq!(fmt_sig(27.725887222397812, 6), "27.7259");
        assert_eq!(fmt_sig(0.75, 6), "0.750000");
        assert_eq!(fmt_sig(-3.0, 6), "-3.00000");
        assert_eq!(fmt_sig(0.0, 6), "0");
        assert_eq!(fmt_sig(1234567.0, 6), "1234567");
        assert_eq!(fmt_sig(0.000012345678, 6), "0.0000123457");
    }

    #[test]
    fn fmt_sig_handles_rounding_carry() {
        assert_eq!(fmt_sig(0.9999999, 6), "1.00000");
    }

    #[test]
    fn fmt_num_writes_integers_plainly() {
        assert_eq!(fmt_num(3.0), "3");
        assert_eq!(fmt_num(0.1), "0.100000");
    }

    #[test]
    fn write_atomic_replaces_target() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_atomic(&path, b"a,b\n").unwrap();
        write_atomic(&path, b"c,d\n").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"c,d\n");
        // no stray temp files left behind
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
