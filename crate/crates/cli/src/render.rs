//! Output shaping shared by the subcommands: 6-significant-digit text
//! tables, full-precision CSV, and the versioned JSON envelope
//! `{version, command, config_echo, results, diagnostics}`.

use serde::Serialize;

use crate::Failure;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Text,
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "text" => Ok(OutputFormat::Text),
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format '{other}' (expected text, csv, or json)")),
        }
    }
}

/// Top-level JSON shape, identical across subcommands.
#[derive(Serialize)]
pub struct Envelope<C: Serialize, R: Serialize, D: Serialize> {
    pub version: u32,
    pub command: &'static str,
    pub config_echo: C,
    pub results: R,
    pub diagnostics: D,
}

pub fn to_json<C: Serialize, R: Serialize, D: Serialize>(
    env: &Envelope<C, R, D>,
) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(env)
        .map_err(|e| Failure::Numerical(format!("report serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Six significant digits, plain notation in mid-range, scientific outside.
pub fn sig6(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&exp) {
        format!("{x:.5e}")
    } else {
        let decimals = (5 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    }
}

/// `sig6` with a dash for absent values.
pub fn opt_sig6(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => sig6(v),
        _ => "-".into(),
    }
}

/// Left-aligned fixed-width table with a header row.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (j, cell) in row.iter().enumerate().take(cols) {
            widths[j] = widths[j].max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let emit = |out: &mut String, cells: &[String]| {
        let mut line = String::new();
        for (j, cell) in cells.iter().enumerate().take(cols) {
            line.push_str(cell);
            if j + 1 < cols {
                for _ in cell.chars().count()..widths[j] + 2 {
                    line.push(' ');
                }
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    };
    emit(&mut out, &header.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    for row in rows {
        emit(&mut out, row);
    }
    out
}

/// Serialize records to CSV text; full double precision via `Display`.
pub fn csv_text(header: &[&str], rows: &[Vec<String>]) -> Result<String, Failure> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(header)
        .and_then(|_| rows.iter().try_for_each(|r| wtr.write_record(r)))
        .map_err(|e| Failure::Numerical(format!("CSV write failed: {e}")))?;
    let bytes = wtr
        .into_inner()
        .map_err(|e| Failure::Numerical(format!("CSV write failed: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Failure::Numerical(format!("CSV not UTF-8: {e}")))
}

/// Full-precision text for CSV cells: shortest round-trip form, empty for
/// absent/non-finite values.
pub fn full(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => format!("{v}"),
        _ => String::new(),
    }
}

/// Type-7 quantile on a sorted slice (the spreadsheet/R default).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Write to `--out` or stdout.
pub fn deliver(text: &str, out: Option<&std::path::Path>) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::Data(format!("cannot write '{}': {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig6_ranges() {
        assert_eq!(sig6(0.5), "0.500000");
        assert_eq!(sig6(1.959964), "1.95996");
        assert_eq!(sig6(-123456.0), "-123456");
        assert_eq!(sig6(0.000123456789), "0.000123457");
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(f64::NAN), "NaN");
        assert_eq!(opt_sig6(None), "-");
    }

    #[test]
    fn table_aligns_columns() {
        let t = table(
            &["a", "bb"],
            &[vec!["x".into(), "y".into()], vec!["long".into(), "z".into()]],
        );
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "a     bb");
        assert_eq!(lines[1], "x     y");
        assert_eq!(lines[2], "long  z");
    }

    #[test]
    fn full_precision_round_trips() {
        let v = 0.1 + 0.2;
        assert_eq!(full(Some(v)).parse::<f64>().unwrap().to_bits(), v.to_bits());
        assert_eq!(full(None), "");
        assert_eq!(full(Some(f64::NAN)), "");
    }

    #[test]
    fn quantile_endpoints_and_midpoint() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 4.0);
        assert_eq!(quantile(&xs, 0.5), 2.5);
    }
}
