//! CSV → numeric design. Numeric columns parse as f64; categorical columns
//! expand to one dummy per observed level with the first observed level
//! dropped as the reference, so K is predictable from the data; collinearity
//! pruning still runs downstream as a safety net. Rows with a missing value
//! in any used column are dropped and counted.

use std::collections::HashMap;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::Failure;
use manycov::design::RegressionData;

/// Which CSV columns play which role.
#[derive(Debug, Clone, Default)]
pub struct Roles {
    pub y: Option<String>,
    pub x: Vec<String>,
    pub w: Vec<String>,
    pub factor: Vec<String>,
    /// Interaction specs like `"county:cohort"`; each produces product-level
    /// dummies over the *observed* cells, reference cell dropped.
    pub interact: Vec<String>,
}

/// The assembled numeric design plus naming/bookkeeping for reports.
#[derive(Debug)]
pub struct DesignTable {
    pub y: Option<Array1<f64>>,
    pub x: Array2<f64>,
    pub w: Array2<f64>,
    pub x_names: Vec<String>,
    /// One name per expanded W column: raw numeric names, then
    /// `factor=level`, then `a:b=va:vb`, in flag order.
    pub w_names: Vec<String>,
    pub rows_used: usize,
    pub rows_dropped: usize,
}

impl DesignTable {
    /// Consume into the library's validated container (regress path).
    pub fn into_regression_data(self) -> Result<(RegressionData, Vec<String>, Vec<String>), Failure> {
        let y = self
            .y
            .ok_or_else(|| Failure::Usage("this command needs a --y column".into()))?;
        let data = RegressionData::new(y, self.x, self.w)
            .map_err(|e| Failure::Data(e.to_string()))?;
        Ok((data, self.x_names, self.w_names))
    }
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t == "." || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

fn parse_numeric(cell: &str, column: &str, row: usize) -> Result<f64, Failure> {
    let v: f64 = cell.trim().parse().map_err(|_| {
        Failure::Data(format!(
            "non-numeric value '{}' in column '{column}' at data row {row}",
            cell.trim()
        ))
    })?;
    if !v.is_finite() {
        return Err(Failure::Data(format!(
            "non-finite value '{}' in column '{column}' at data row {row}",
            cell.trim()
        )));
    }
    Ok(v)
}

/// Expand one categorical column (already filtered to used rows) into
/// reference-dropped dummies. `display` names the factor in errors and
/// column labels.
fn expand_factor(values: &[String], display: &str) -> Result<(Vec<Vec<f64>>, Vec<String>), Failure> {
    let n = values.len();
    let mut levels: Vec<&str> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut codes = Vec::with_capacity(n);
    for v in values {
        let id = *index.entry(v.as_str()).or_insert_with(|| {
            levels.push(v.as_str());
            levels.len() - 1
        });
        codes.push(id);
    }
    if levels.len() == n && n > 1 {
        return Err(Failure::Data(format!(
            "factor '{display}' is unit-identifying: {n} distinct levels across {n} rows"
        )));
    }
    // reference = first observed level → level 0 gets no column
    let mut cols = vec![vec![0.0; n]; levels.len().saturating_sub(1)];
    for (row, &code) in codes.iter().enumerate() {
        if code > 0 {
            cols[code - 1][row] = 1.0;
        }
    }
    let names = levels[1..]
        .iter()
        .map(|lvl| format!("{display}={lvl}"))
        .collect();
    Ok((cols, names))
}

/// Read `path` and assemble the design described by `roles`.
pub fn ingest(path: &Path, roles: &Roles) -> Result<DesignTable, Failure> {
    check_roles(roles)?;

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Failure::Data(format!("cannot open '{}': {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| Failure::Data(format!("cannot read header row: {e}")))?
        .clone();
    let mut col_index: HashMap<&str, usize> = HashMap::new();
    let mut duplicated: Vec<&str> = Vec::new();
    for (i, name) in headers.iter().enumerate() {
        if col_index.insert(name, i).is_some() {
            duplicated.push(name);
        }
    }

    let interactions: Vec<Vec<String>> = roles
        .interact
        .iter()
        .map(|spec| {
            let parts: Vec<String> = spec.split(':').map(|s| s.trim().to_string()).collect();
            if parts.len() < 2 || parts.iter().any(String::is_empty) {
                return Err(Failure::Usage(format!(
                    "interaction '{spec}' must name at least two columns as a:b"
                )));
            }
            Ok(parts)
        })
        .collect::<Result<_, _>>()?;

    let mut used_columns: Vec<&str> = Vec::new();
    used_columns.extend(roles.y.as_deref());
    used_columns.extend(roles.x.iter().map(String::as_str));
    used_columns.extend(roles.w.iter().map(String::as_str));
    used_columns.extend(roles.factor.iter().map(String::as_str));
    for parts in &interactions {
        used_columns.extend(parts.iter().map(String::as_str));
    }
    for name in &used_columns {
        if !col_index.contains_key(name) {
            return Err(Failure::Data(format!(
                "column '{name}' not found in '{}' (available: {})",
                path.display(),
                headers.iter().collect::<Vec<_>>().join(", ")
            )));
        }
        if duplicated.contains(name) {
            return Err(Failure::Data(format!(
                "column '{name}' appears more than once in the header"
            )));
        }
    }
    let idx = |name: &str| col_index[name];

    // column-major storage for the kept rows
    let mut y_vals: Vec<f64> = Vec::new();
    let mut x_vals: Vec<Vec<f64>> = vec![Vec::new(); roles.x.len()];
    let mut w_vals: Vec<Vec<f64>> = vec![Vec::new(); roles.w.len()];
    let mut factor_vals: Vec<Vec<String>> = vec![Vec::new(); roles.factor.len()];
    let mut interact_vals: Vec<Vec<String>> = vec![Vec::new(); interactions.len()];
    let mut rows_dropped = 0usize;

    for (rec_no, record) in reader.records().enumerate() {
        let row = rec_no + 1; // 1-based, header excluded
        let record =
            record.map_err(|e| Failure::Data(format!("malformed CSV at data row {row}: {e}")))?;
        let field = |name: &str| record.get(idx(name)).unwrap_or("");

        if used_columns.iter().any(|name| is_missing(field(name))) {
            rows_dropped += 1;
            continue;
        }

        if let Some(yname) = &roles.y {
            y_vals.push(parse_numeric(field(yname), yname, row)?);
        }
        for (j, name) in roles.x.iter().enumerate() {
            x_vals[j].push(parse_numeric(field(name), name, row)?);
        }
        for (j, name) in roles.w.iter().enumerate() {
            w_vals[j].push(parse_numeric(field(name), name, row)?);
        }
        for (j, name) in roles.factor.iter().enumerate() {
            factor_vals[j].push(field(name).trim().to_string());
        }
        for (j, parts) in interactions.iter().enumerate() {
            let cell: Vec<&str> = parts.iter().map(|p| field(p).trim()).collect();
            interact_vals[j].push(cell.join(":"));
        }
    }

    let rows_used = if let Some(v) = x_vals.first() {
        v.len()
    } else if !w_vals.is_empty() {
        w_vals[0].len()
    } else if !factor_vals.is_empty() {
        factor_vals[0].len()
    } else if !interact_vals.is_empty() {
        interact_vals[0].len()
    } else {
        y_vals.len()
    };
    if rows_used == 0 {
        return Err(Failure::Data(format!(
            "no usable rows in '{}' after dropping {rows_dropped} with missing values",
            path.display()
        )));
    }

    let mut w_cols: Vec<Vec<f64>> = Vec::new();
    let mut w_names: Vec<String> = Vec::new();
    for (j, name) in roles.w.iter().enumerate() {
        w_cols.push(std::mem::take(&mut w_vals[j]));
        w_names.push(name.clone());
    }
    for (j, name) in roles.factor.iter().enumerate() {
        let (cols, names) = expand_factor(&factor_vals[j], name)?;
        w_cols.extend(cols);
        w_names.extend(names);
    }
    for (j, parts) in interactions.iter().enumerate() {
        let display = parts.join(":");
        let (cols, names) = expand_factor(&interact_vals[j], &display)?;
        w_cols.extend(cols);
        w_names.extend(names);
    }

    let to_matrix = |cols: &[Vec<f64>]| -> Array2<f64> {
        let mut m = Array2::zeros((rows_used, cols.len()));
        for (j, col) in cols.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    };

    Ok(DesignTable {
        y: roles.y.as_ref().map(|_| Array1::from_vec(y_vals)),
        x: to_matrix(&x_vals),
        w: to_matrix(&w_cols),
        x_names: roles.x.clone(),
        w_names,
        rows_used,
        rows_dropped,
    })
}

fn check_roles(roles: &Roles) -> Result<(), Failure> {
    let mut seen: HashMap<String, &'static str> = HashMap::new();
    let mut claim = |name: &str, role: &'static str| -> Result<(), Failure> {
        if let Some(prev) = seen.insert(name.to_string(), role) {
            return Err(Failure::Usage(format!(
                "column '{name}' is assigned to both {prev} and {role}"
            )));
        }
        Ok(())
    };
    if let Some(y) = &roles.y {
        claim(y, "--y")?;
    }
    for name in &roles.x {
        claim(name, "--x")?;
    }
    for name in &roles.w {
        claim(name, "--w")?;
    }
    for name in &roles.factor {
        claim(name, "--factor")?;
    }
    // interaction columns may repeat factor columns by design (county +
    // cohort + county:cohort is the canonical use), so they are not claimed
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn csv_file(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    fn roles(y: &str, x: &[&str], w: &[&str], factor: &[&str], interact: &[&str]) -> Roles {
        Roles {
            y: Some(y.to_string()),
            x: x.iter().map(|s| s.to_string()).collect(),
            w: w.iter().map(|s| s.to_string()).collect(),
            factor: factor.iter().map(|s| s.to_string()).collect(),
            interact: interact.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn two_level_factor_gives_one_dummy() {
        let f = csv_file("y,x,g\n1.0,0.1,a\n2.0,0.2,b\n3.0,0.3,a\n");
        let t = ingest(f.path(), &roles("y", &["x"], &[], &["g"], &[])).unwrap();
        assert_eq!(t.w.ncols(), 1);
        assert_eq!(t.w_names, vec!["g=b"]);
        assert_eq!(t.w.column(0).to_vec(), vec![0.0, 1.0, 0.0]);
        assert_eq!(t.rows_used, 3);
        assert_eq!(t.rows_dropped, 0);
    }

    #[test]
    fn unit_identifying_factor_is_rejected() {
        let f = csv_file("y,x,id\n1,0.1,a\n2,0.2,b\n3,0.3,c\n");
        let err = ingest(f.path(), &roles("y", &["x"], &[], &["id"], &[])).unwrap_err();
        assert_eq!(err.code(), 3);
        assert!(err.message().contains("unit-identifying"), "{}", err.message());
    }

    #[test]
    fn county_cohort_interaction_counts() {
        // 2 counties × 3 cohorts, 3 observed cells → 1 + 2 + 2 columns
        let f = csv_file(
            "y,x,county,cohort\n\
             1,0.1,A,1\n2,0.2,A,1\n3,0.3,A,2\n4,0.4,A,2\n5,0.5,B,3\n6,0.6,B,3\n",
        );
        let t = ingest(
            f.path(),
            &roles("y", &["x"], &[], &["county", "cohort"], &["county:cohort"]),
        )
        .unwrap();
        assert_eq!(t.w.ncols(), 5);
        assert_eq!(
            t.w_names,
            vec!["county=B", "cohort=2", "cohort=3", "county:cohort=A:2", "county:cohort=B:3"]
        );
        // interaction cell A:2 marks rows 2,3
        let a2 = t.w.column(3).to_vec();
        assert_eq!(a2, vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn missing_values_drop_rows_and_count() {
        let f = csv_file("y,x,w1\n1,0.1,5\n,0.2,6\n3,NA,7\n4,0.4,.\n5,0.5,8\n");
        let t = ingest(f.path(), &roles("y", &["x"], &["w1"], &[], &[])).unwrap();
        assert_eq!(t.rows_used, 2);
        assert_eq!(t.rows_dropped, 3);
        assert_eq!(t.y.unwrap().to_vec(), vec![1.0, 5.0]);
    }

    #[test]
    fn non_numeric_cell_names_row_and_column() {
        let f = csv_file("y,x\n1,0.1\n2,abc\n");
        let err = ingest(f.path(), &roles("y", &["x"], &[], &[], &[])).unwrap_err();
        assert_eq!(err.code(), 3);
        let msg = err.message();
        assert!(msg.contains("'abc'") && msg.contains("'x'") && msg.contains("row 2"), "{msg}");
    }

    #[test]
    fn role_overlap_is_usage_error() {
        let f = csv_file("y,x\n1,0.1\n");
        let mut r = roles("y", &["x"], &["x"], &[], &[]);
        let err = ingest(f.path(), &r).unwrap_err();
        assert_eq!(err.code(), 2);
        r = roles("y", &["x"], &[], &[], &[]);
        r.y = Some("x".into());
        assert_eq!(ingest(f.path(), &r).unwrap_err().code(), 2);
    }

    #[test]
    fn missing_column_is_data_error() {
        let f = csv_file("y,x\n1,0.1\n");
        let err = ingest(f.path(), &roles("y", &["x", "z"], &[], &[], &[])).unwrap_err();
        assert_eq!(err.code(), 3);
        assert!(err.message().contains("'z'"));
    }

    #[test]
    fn quoted_fields_and_crlf_parse() {
        let f = csv_file("y,x,g\r\n\"1.5\",0.1,\"north, east\"\r\n2.5,0.2,south\r\n2.0,0.3,\"north, east\"\r\n");
        let t = ingest(f.path(), &roles("y", &["x"], &[], &["g"], &[])).unwrap();
        assert_eq!(t.w_names, vec!["g=south"]);
        assert_eq!(t.y.unwrap().to_vec(), vec![1.5, 2.5, 2.0]);
    }

    #[test]
    fn all_levels_after_reference_have_columns() {
        let f = csv_file("y,x,g\n1,1,u\n2,2,v\n3,3,w\n4,4,u\n");
        let t = ingest(f.path(), &roles("y", &["x"], &[], &["g"], &[])).unwrap();
        assert_eq!(t.w_names, vec!["g=v", "g=w"]);
        assert_eq!(t.w.column(0).to_vec(), vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(t.w.column(1).to_vec(), vec![0.0, 0.0, 1.0, 0.0]);
    }
}
