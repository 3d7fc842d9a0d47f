//! Deterministic CSV artifacts and trajectory ingestion.
//!
//! Written files are byte-reproducible: header row, LF line endings, UTF-8,
//! floats at 17 significant digits (`{:.16e}`), no locale involvement.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use greenline_core::signals::Trajectory;

/// A float at 17 significant digits, round-trip exact for `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write a CSV file: mandatory header plus rows, LF endings.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::with_capacity(rows.len() * 32 + 64);
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Write a plain-text dump (already formatted, e.g. matrix dumps).
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Read a trajectory from CSV with columns `t, x_1..x_d[, xdot_1..xdot_d], y`.
///
/// The time column must be uniformly spaced (the recursions assume a fixed
/// step); derivatives are computed by finite differences when the `xdot`
/// columns are absent. The period defaults to `N * tau` unless overridden.
pub fn read_trajectory(path: &Path, period_override: Option<f64>) -> Result<Trajectory> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let headers: Vec<String> =
        reader.headers()?.iter().map(|h| h.to_string()).collect();
    if headers.first().map(String::as_str) != Some("t") {
        bail!("{}: first column must be `t`", path.display());
    }
    if headers.last().map(String::as_str) != Some("y") {
        bail!("{}: last column must be `y`", path.display());
    }
    let x_cols: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("x_"))
        .map(|(i, _)| i)
        .collect();
    let xdot_cols: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("xdot_"))
        .map(|(i, _)| i)
        .collect();
    if x_cols.is_empty() {
        bail!("{}: need at least one `x_*` column", path.display());
    }
    if !xdot_cols.is_empty() && xdot_cols.len() != x_cols.len() {
        bail!(
            "{}: {} `xdot_*` columns for {} inputs",
            path.display(),
            xdot_cols.len(),
            x_cols.len()
        );
    }
    let y_col = headers.len() - 1;

    let mut t = Vec::new();
    let mut x = Vec::new();
    let mut xdot = Vec::new();
    let mut y = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let get = |col: usize| -> Result<f64> {
            record
                .get(col)
                .ok_or_else(|| anyhow::anyhow!("row {}: missing column {col}", line + 2))?
                .parse::<f64>()
                .with_context(|| format!("row {}: bad number in column {col}", line + 2))
        };
        t.push(get(0)?);
        x.push(x_cols.iter().map(|&c| get(c)).collect::<Result<Vec<f64>>>()?);
        if !xdot_cols.is_empty() {
            xdot.push(xdot_cols.iter().map(|&c| get(c)).collect::<Result<Vec<f64>>>()?);
        }
        y.push(get(y_col)?);
    }
    if t.len() < 2 {
        bail!("{}: need at least 2 samples", path.display());
    }
    let tau = t[1] - t[0];
    if !(tau > 0.0) {
        bail!("{}: time column must be strictly increasing", path.display());
    }
    for w in t.windows(2) {
        if (w[1] - w[0] - tau).abs() > 1e-9 * tau.max(1.0) {
            bail!("{}: time column is not uniformly spaced", path.display());
        }
    }
    let period = period_override.unwrap_or(t.len() as f64 * tau);
    if period < *t.last().unwrap() {
        bail!(
            "{}: period {period} ends before the last sample at {}",
            path.display(),
            t.last().unwrap()
        );
    }
    let xdot = if xdot.is_empty() { None } else { Some(xdot) };
    Ok(Trajectory::from_samples(tau, period, t, x, xdot, y)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn header_only_for_empty_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.csv");
        write_csv(&p, &["a", "b"], &[]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "a,b\n");
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.05, 1.0, -3.25e-9, 1234567.89, f64::MIN_POSITIVE] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }

    #[test]
    fn identical_rows_identical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![vec![fmt_f64(0.1), fmt_f64(-2.0)]];
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        write_csv(&p1, &["u", "v"], &rows).unwrap();
        write_csv(&p2, &["u", "v"], &rows).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn trajectory_round_trip_via_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("data.csv");
        let mut f = fs::File::create(&p).unwrap();
        writeln!(f, "t,x_1,y").unwrap();
        for k in 0..10 {
            let t = 0.05 + 0.1 * k as f64;
            writeln!(f, "{},{},{}", t, (2.0 * t).sin(), t * 0.5).unwrap();
        }
        drop(f);
        let traj = read_trajectory(&p, None).unwrap();
        assert_eq!(traj.len(), 10);
        assert!((traj.tau - 0.1).abs() < 1e-12);
        // derivatives appear by finite differences
        assert!(traj.xdot.iter().all(|row| row.len() == 1));
        assert!(traj.b.iter().all(|b| *b >= 1.0));
    }

    #[test]
    fn nonuniform_time_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "t,x_1,y\n0.0,1.0,0.0\n0.1,1.0,0.0\n0.3,1.0,0.0\n").unwrap();
        let err = read_trajectory(&p, None).unwrap_err().to_string();
        assert!(err.contains("uniformly"), "{err}");
    }
}
