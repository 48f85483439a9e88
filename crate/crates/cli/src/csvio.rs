//! CSV ingestion with line-numbered errors, and CSV writers.

use std::collections::HashMap;
use std::path::Path;

use mixreg_core::Dataset;
use mixreg_functional::CurveSample;
use nalgebra::{DMatrix, DVector};

use crate::error::{CliError, Result};

/// Raw string cells plus the 1-based file line of every record.
#[derive(Debug, Clone)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub lines: Vec<u64>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_table(file, &path.display().to_string())
}

pub fn parse_table<R: std::io::Read>(reader: R, origin: &str) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Data(format!("{origin}: line 1: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.iter().all(|h| h.is_empty()) {
        return Err(CliError::Data(format!("{origin}: line 1: missing header")));
    }
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Data(format!("{origin}: line {line}: {e}"))
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        rows.push(rec.iter().map(str::to_string).collect());
        lines.push(line);
    }
    Ok(Table { headers, rows, lines })
}

/// Parses a finite number; NaN and infinities are rejected.
pub fn parse_number(token: &str, origin: &str, line: u64, column: &str) -> Result<f64> {
    match token.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(CliError::Data(format!(
            "{origin}: line {line}, column {column}: non-finite value {token:?}"
        ))),
        Err(_) => Err(CliError::Data(format!(
            "{origin}: line {line}, column {column}: cannot parse {token:?} as a number"
        ))),
    }
}

fn parse_label(token: &str, origin: &str, line: u64) -> Result<usize> {
    match token.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v - 1),
        _ => Err(CliError::Data(format!(
            "{origin}: line {line}, column truth: expected a group label 1, 2, ..., got {token:?}"
        ))),
    }
}

fn indexed(name: &str, prefix: char) -> Option<usize> {
    let rest = name.strip_prefix(prefix)?;
    rest.parse::<usize>().ok().filter(|&i| i >= 1 && !rest.starts_with('0'))
}

/// Dataset CSV: `y`, covariates `x1..xp`, invariants `z1..zq`, optional
/// 1-based `truth`. `invariant_cols`, when non-empty, names the invariant
/// columns explicitly (in order) and replaces the `z*` convention.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetCsv {
    pub y: Option<DVector<f64>>,
    pub x: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub truth: Option<Vec<usize>>,
    pub x_names: Vec<String>,
    pub z_names: Vec<String>,
}

impl DatasetCsv {
    pub fn into_dataset(self) -> Result<Dataset> {
        let y = self
            .y
            .ok_or_else(|| CliError::Data("dataset has no y column".into()))?;
        Ok(Dataset::new(y, self.x, Some(self.z), self.truth)?)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }
}

pub fn read_dataset(path: &Path, invariant_cols: &[String], require_y: bool) -> Result<DatasetCsv> {
    let table = read_table(path)?;
    dataset_from_table(&table, &path.display().to_string(), invariant_cols, require_y)
}

pub fn dataset_from_table(
    table: &Table,
    origin: &str,
    invariant_cols: &[String],
    require_y: bool,
) -> Result<DatasetCsv> {
    let mut seen = HashMap::new();
    for (j, h) in table.headers.iter().enumerate() {
        if seen.insert(h.as_str(), j).is_some() {
            return Err(CliError::Data(format!("{origin}: line 1: duplicate column {h:?}")));
        }
    }
    let y_col = table.column("y");
    if require_y && y_col.is_none() {
        return Err(CliError::Data(format!("{origin}: line 1: missing column \"y\"")));
    }
    let truth_col = table.column("truth");
    let mut z_cols: Vec<(String, usize)> = Vec::new();
    for name in invariant_cols {
        let j = table
            .column(name)
            .ok_or_else(|| CliError::Data(format!("{origin}: line 1: invariant column {name:?} not found")))?;
        z_cols.push((name.clone(), j));
    }
    let mut x_cols: Vec<(usize, String, usize)> = Vec::new();
    let mut conv_z: Vec<(usize, String, usize)> = Vec::new();
    for (j, h) in table.headers.iter().enumerate() {
        if Some(j) == y_col || Some(j) == truth_col || invariant_cols.contains(h) {
            continue;
        }
        if let Some(i) = indexed(h, 'x') {
            x_cols.push((i, h.clone(), j));
        } else if let (Some(i), true) = (indexed(h, 'z'), invariant_cols.is_empty()) {
            conv_z.push((i, h.clone(), j));
        } else {
            return Err(CliError::Data(format!("{origin}: line 1: unexpected column {h:?}")));
        }
    }
    x_cols.sort();
    conv_z.sort();
    z_cols.extend(conv_z.into_iter().map(|(_, n, j)| (n, j)));
    if x_cols.is_empty() {
        return Err(CliError::Data(format!("{origin}: line 1: no covariate columns x1, x2, ...")));
    }
    let n = table.rows.len();
    if n == 0 {
        return Err(CliError::Data(format!("{origin}: no data rows")));
    }
    let (p, q) = (x_cols.len(), z_cols.len());
    let mut y = DVector::zeros(n);
    let mut x = DMatrix::zeros(n, p);
    let mut z = DMatrix::zeros(n, q);
    let mut truth = truth_col.map(|_| Vec::with_capacity(n));
    for (i, row) in table.rows.iter().enumerate() {
        let line = table.lines[i];
        if row.len() != table.headers.len() {
            return Err(CliError::Data(format!(
                "{origin}: line {line}: expected {} fields, found {}",
                table.headers.len(),
                row.len()
            )));
        }
        if let Some(j) = y_col {
            y[i] = parse_number(&row[j], origin, line, "y")?;
        }
        for (a, (_, name, j)) in x_cols.iter().enumerate() {
            x[(i, a)] = parse_number(&row[*j], origin, line, name)?;
        }
        for (a, (name, j)) in z_cols.iter().enumerate() {
            z[(i, a)] = parse_number(&row[*j], origin, line, name)?;
        }
        if let (Some(t), Some(j)) = (truth.as_mut(), truth_col) {
            t.push(parse_label(&row[j], origin, line)?);
        }
    }
    Ok(DatasetCsv {
        y: y_col.map(|_| y),
        x,
        z,
        truth,
        x_names: x_cols.into_iter().map(|(_, n, _)| n).collect(),
        z_names: z_cols.into_iter().map(|(n, _)| n).collect(),
    })
}

/// Curve CSV `subject_id,t,value`; subjects keep first-appearance order.
pub fn read_curves(path: &Path, domain: Option<(f64, f64)>) -> Result<CurveSample> {
    let table = read_table(path)?;
    let origin = path.display().to_string();
    if table.headers != ["subject_id", "t", "value"] {
        return Err(CliError::Data(format!(
            "{origin}: line 1: expected header subject_id,t,value, found {}",
            table.headers.join(",")
        )));
    }
    let mut order: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut times: Vec<Vec<f64>> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for (row, &line) in table.rows.iter().zip(&table.lines) {
        if row.len() != 3 {
            return Err(CliError::Data(format!("{origin}: line {line}: expected 3 fields")));
        }
        let t = parse_number(&row[1], &origin, line, "t")?;
        let v = parse_number(&row[2], &origin, line, "value")?;
        let k = *index.entry(row[0].clone()).or_insert_with(|| {
            order.push(row[0].clone());
            times.push(Vec::new());
            values.push(Vec::new());
            order.len() - 1
        });
        if times[k].last().is_some_and(|&last| t <= last) {
            return Err(CliError::Data(format!(
                "{origin}: line {line}: times for subject {:?} must increase",
                row[0]
            )));
        }
        times[k].push(t);
        values[k].push(v);
    }
    if order.is_empty() {
        return Err(CliError::Data(format!("{origin}: no data rows")));
    }
    Ok(match domain {
        Some((a, b)) => CurveSample::new(order, times, values, a, b)?,
        None => CurveSample::with_observed_domain(order, times, values)?,
    })
}

/// Subject-level table `subject_id,<columns...>`, optional 1-based `truth`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectTable {
    pub ids: Vec<String>,
    pub columns: Vec<(String, Vec<f64>)>,
    pub truth: Option<Vec<usize>>,
}

impl SubjectTable {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }
}

pub fn read_subject_table(path: &Path) -> Result<SubjectTable> {
    let table = read_table(path)?;
    let origin = path.display().to_string();
    if table.headers.first().map(String::as_str) != Some("subject_id") {
        return Err(CliError::Data(format!("{origin}: line 1: first column must be subject_id")));
    }
    let truth_col = table.column("truth");
    let mut ids = Vec::with_capacity(table.rows.len());
    let mut columns: Vec<(String, Vec<f64>)> = table
        .headers
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(j, _)| Some(*j) != truth_col)
        .map(|(_, h)| (h.clone(), Vec::new()))
        .collect();
    let mut truth = truth_col.map(|_| Vec::new());
    for (row, &line) in table.rows.iter().zip(&table.lines) {
        if row.len() != table.headers.len() {
            return Err(CliError::Data(format!(
                "{origin}: line {line}: expected {} fields, found {}",
                table.headers.len(),
                row.len()
            )));
        }
        ids.push(row[0].clone());
        let mut c = 0;
        for (j, cell) in row.iter().enumerate().skip(1) {
            if Some(j) == truth_col {
                truth.as_mut().expect("truth column").push(parse_label(cell, &origin, line)?);
            } else {
                let name = &table.headers[j];
                columns[c].1.push(parse_number(cell, &origin, line, name)?);
                c += 1;
            }
        }
    }
    Ok(SubjectTable { ids, columns, truth })
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Data(format!("csv: {}", e.error())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes `y,x1..xp,z1..zq[,truth]` with shortest round-trip numbers.
pub fn dataset_to_csv(d: &Dataset) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["y".to_string()];
    header.extend((1..=d.p()).map(|j| format!("x{j}")));
    header.extend((1..=d.q()).map(|j| format!("z{j}")));
    if d.truth.is_some() {
        header.push("truth".into());
    }
    w.write_record(&header)?;
    for i in 0..d.n() {
        let mut row = vec![d.y[i].to_string()];
        row.extend(d.x.row(i).iter().map(f64::to_string));
        row.extend(d.z.row(i).iter().map(f64::to_string));
        if let Some(t) = &d.truth {
            row.push((t[i] + 1).to_string());
        }
        w.write_record(&row)?;
    }
    finish(w)
}

/// Generic writer for a header and rows of cells.
pub fn rows_to_csv(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    finish(w)
}
