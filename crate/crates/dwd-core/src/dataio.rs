//! Dataset ingestion (CSV and sparse libsvm-style files), emission, and
//! the stratified train/test split.
//!
//! CSV: comma-separated, UTF-8, decimal point, optional header row, lines
//! starting with `#` are comments. Sparse format: `label idx:value ...`
//! with 1-based ascending indices; absent indices are zero.
//!
//! Labels may be arbitrary tokens; exactly two distinct values are mapped
//! to {-1, +1}. When both parse as numbers the numerically smaller one
//! becomes -1, otherwise the lexicographically smaller one does; the
//! mapping is returned alongside the data.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::data::Dataset;
use crate::error::{DwdError, Result};

/// Which CSV column holds the label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    /// Requires a header row.
    Name(String),
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub has_header: bool,
    pub label_column: LabelColumn,
    /// Center each feature column to mean 0 and scale to variance 1;
    /// constant columns are left untouched.
    pub standardize: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            has_header: false,
            label_column: LabelColumn::Index(0),
            standardize: false,
        }
    }
}

/// A loaded dataset together with the label mapping that produced it.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    /// Original token mapped to -1.
    pub negative_label: String,
    /// Original token mapped to +1.
    pub positive_label: String,
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_cell(token: &str, line_no: usize, col: usize) -> Result<f64> {
    let token = token.trim();
    if token.is_empty() {
        return Err(DwdError::Parse(format!(
            "missing value at line {line_no}, column {}",
            col + 1
        )));
    }
    token.parse::<f64>().map_err(|_| {
        DwdError::Parse(format!(
            "non-numeric feature '{token}' at line {line_no}, column {}",
            col + 1
        ))
    })
}

/// Maps the (exactly two) distinct label tokens to -1/+1 and validates.
fn map_labels(tokens: &[String]) -> Result<(Vec<f64>, String, String)> {
    let mut distinct: Vec<&String> = Vec::new();
    for t in tokens {
        if !distinct.iter().any(|d| *d == t) {
            distinct.push(t);
        }
    }
    if distinct.len() > 2 {
        let names: Vec<&str> = distinct.iter().map(|s| s.as_str()).collect();
        return Err(DwdError::Parse(format!(
            "more than two classes: {{{}}}",
            names.join(", ")
        )));
    }
    if distinct.len() < 2 {
        return Err(DwdError::InvalidData(format!(
            "only one label value present ('{}'); two classes are required",
            distinct.first().map(|s| s.as_str()).unwrap_or("")
        )));
    }
    let (a, b) = (distinct[0].clone(), distinct[1].clone());
    let numeric = (a.parse::<f64>(), b.parse::<f64>());
    let (neg, pos) = match numeric {
        (Ok(na), Ok(nb)) => {
            if na < nb {
                (a, b)
            } else {
                (b, a)
            }
        }
        _ => {
            if a < b {
                (a, b)
            } else {
                (b, a)
            }
        }
    };
    let y = tokens
        .iter()
        .map(|t| if *t == neg { -1.0 } else { 1.0 })
        .collect();
    Ok((y, neg, pos))
}

/// Standardizes columns in place: mean 0, variance 1 (population variance);
/// constant columns are left untouched.
pub fn standardize_columns(x: &mut DMatrix<f64>) {
    let n = x.nrows() as f64;
    for j in 0..x.ncols() {
        let mean = x.column(j).sum() / n;
        let var = x.column(j).iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        if var > 0.0 {
            let sd = var.sqrt();
            for i in 0..x.nrows() {
                x[(i, j)] = (x[(i, j)] - mean) / sd;
            }
        }
    }
}

/// Loads a labeled CSV file.
pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<LoadedDataset> {
    let text = fs::read_to_string(&path)?;
    load_csv_str(&text, options)
}

pub fn load_csv_str(text: &str, options: &CsvOptions) -> Result<LoadedDataset> {
    let mut lines = data_lines(text);
    let label_idx;
    let mut width = None;
    let mut header: Option<Vec<String>> = None;
    if options.has_header {
        let (line_no, head) = lines
            .next()
            .ok_or_else(|| DwdError::Parse("empty file".into()))?;
        let cols: Vec<String> = head.split(',').map(|c| c.trim().to_string()).collect();
        label_idx = match &options.label_column {
            LabelColumn::Index(i) => *i,
            LabelColumn::Name(name) => cols
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| {
                    DwdError::Parse(format!(
                        "label column '{name}' not found in header at line {line_no}"
                    ))
                })?,
        };
        width = Some(cols.len());
        header = Some(cols);
    } else {
        label_idx = match &options.label_column {
            LabelColumn::Index(i) => *i,
            LabelColumn::Name(name) => {
                return Err(DwdError::Parse(format!(
                    "label column by name ('{name}') requires a header row"
                )));
            }
        };
    }
    let _ = header;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    for (line_no, line) in lines {
        let cells: Vec<&str> = line.split(',').collect();
        match width {
            Some(w) if cells.len() != w => {
                return Err(DwdError::Parse(format!(
                    "line {line_no} has {} cells, expected {w}",
                    cells.len()
                )));
            }
            None => width = Some(cells.len()),
            _ => {}
        }
        if label_idx >= cells.len() {
            return Err(DwdError::Parse(format!(
                "label column {label_idx} out of range at line {line_no}"
            )));
        }
        labels.push(cells[label_idx].trim().to_string());
        if labels.last().map(|s| s.is_empty()).unwrap_or(false) {
            return Err(DwdError::Parse(format!("missing label at line {line_no}")));
        }
        let mut row = Vec::with_capacity(cells.len() - 1);
        for (c, cell) in cells.iter().enumerate() {
            if c == label_idx {
                continue;
            }
            row.push(parse_cell(cell, line_no, c)?);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(DwdError::Parse("no data rows".into()));
    }
    let p = rows[0].len();
    if p == 0 {
        return Err(DwdError::Parse("no feature columns".into()));
    }
    let (y, negative_label, positive_label) = map_labels(&labels)?;
    let mut x = DMatrix::zeros(rows.len(), p);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            x[(i, j)] = v;
        }
    }
    if options.standardize {
        standardize_columns(&mut x);
    }
    Ok(LoadedDataset {
        dataset: Dataset::new(x, DVector::from_vec(y))?,
        negative_label,
        positive_label,
    })
}

/// Loads an unlabeled feature matrix from CSV (for prediction inputs).
pub fn load_features_csv(path: impl AsRef<Path>, has_header: bool) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(&path)?;
    load_features_csv_str(&text, has_header)
}

/// Like [`load_features_csv`] but from a string. An input with no data rows
/// yields a 0 x 0 matrix.
pub fn load_features_csv_str(text: &str, has_header: bool) -> Result<DMatrix<f64>> {
    let mut lines = data_lines(text);
    if has_header {
        lines.next();
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (line_no, line) in lines {
        let cells: Vec<&str> = line.split(',').collect();
        match width {
            Some(w) if cells.len() != w => {
                return Err(DwdError::Parse(format!(
                    "line {line_no} has {} cells, expected {w}",
                    cells.len()
                )));
            }
            None => width = Some(cells.len()),
            _ => {}
        }
        let mut row = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            row.push(parse_cell(cell, line_no, c)?);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Ok(DMatrix::zeros(0, 0));
    }
    let p = rows[0].len();
    let mut x = DMatrix::zeros(rows.len(), p);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            x[(i, j)] = v;
        }
    }
    Ok(x)
}

/// Loads a sparse `label idx:value ...` file with 1-based ascending indices.
pub fn load_libsvm(path: impl AsRef<Path>) -> Result<LoadedDataset> {
    let text = fs::read_to_string(&path)?;
    load_libsvm_str(&text)
}

pub fn load_libsvm_str(text: &str) -> Result<LoadedDataset> {
    let mut labels: Vec<String> = Vec::new();
    let mut sparse_rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_index = 0usize;
    for (line_no, line) in data_lines(text) {
        let mut tokens = line.split_whitespace();
        let label = tokens
            .next()
            .ok_or_else(|| DwdError::Parse(format!("missing label at line {line_no}")))?;
        labels.push(label.to_string());
        let mut row: Vec<(usize, f64)> = Vec::new();
        let mut last_index = 0usize;
        for tok in tokens {
            let (idx_str, val_str) = tok.split_once(':').ok_or_else(|| {
                DwdError::Parse(format!("malformed pair '{tok}' at line {line_no}"))
            })?;
            let idx: usize = idx_str.parse().map_err(|_| {
                DwdError::Parse(format!("bad index '{idx_str}' at line {line_no}"))
            })?;
            if idx == 0 {
                return Err(DwdError::Parse(format!(
                    "indices are 1-based, got 0 at line {line_no}"
                )));
            }
            if idx <= last_index {
                return Err(DwdError::Parse(format!(
                    "indices must be strictly ascending at line {line_no}"
                )));
            }
            last_index = idx;
            let val: f64 = val_str.parse().map_err(|_| {
                DwdError::Parse(format!("bad value '{val_str}' at line {line_no}"))
            })?;
            max_index = max_index.max(idx);
            row.push((idx, val));
        }
        sparse_rows.push(row);
    }
    if sparse_rows.is_empty() {
        return Err(DwdError::Parse("no data rows".into()));
    }
    if max_index == 0 {
        return Err(DwdError::Parse("no feature columns".into()));
    }
    let (y, negative_label, positive_label) = map_labels(&labels)?;
    let mut x = DMatrix::zeros(sparse_rows.len(), max_index);
    for (i, row) in sparse_rows.iter().enumerate() {
        for &(idx, val) in row {
            x[(i, idx - 1)] = val;
        }
    }
    Ok(LoadedDataset {
        dataset: Dataset::new(x, DVector::from_vec(y))?,
        negative_label,
        positive_label,
    })
}

/// Writes a dataset as CSV with `label,x1,...,xp` columns, preceded by
/// `# key=value` comment lines (scenario, seed, generator version, ...).
pub fn save_dataset_csv(
    path: impl AsRef<Path>,
    data: &Dataset,
    comments: &[(&str, String)],
) -> Result<()> {
    let mut out = String::new();
    for (key, value) in comments {
        out.push_str(&format!("# {key}={value}\n"));
    }
    out.push_str("label");
    for j in 1..=data.p() {
        out.push_str(&format!(",x{j}"));
    }
    out.push('\n');
    for i in 0..data.n() {
        out.push_str(if data.y()[i] > 0.0 { "1" } else { "-1" });
        for j in 0..data.p() {
            out.push(',');
            out.push_str(&format!("{}", data.x()[(i, j)]));
        }
        out.push('\n');
    }
    let mut file = fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// Stratified split into (train, test) with `ratio` the training fraction.
/// Deterministic given the seed; per-class sizes are rounded so the overall
/// sizes are within one of the exact ratio. Fails when a class has fewer
/// than 2 members.
pub fn train_test_split(data: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(DwdError::InvalidParameter(format!(
            "split ratio must lie strictly between 0 and 1, got {ratio}"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut train_idx: Vec<usize> = Vec::new();
    let mut test_idx: Vec<usize> = Vec::new();
    for label in [-1.0, 1.0] {
        let mut members: Vec<usize> = (0..data.n()).filter(|&i| data.y()[i] == label).collect();
        if members.len() < 2 {
            return Err(DwdError::InvalidData(format!(
                "class {label} has {} members; need at least 2 to split",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        let n_train = ((members.len() as f64) * ratio)
            .round()
            .clamp(1.0, (members.len() - 1) as f64) as usize;
        train_idx.extend_from_slice(&members[..n_train]);
        test_idx.extend_from_slice(&members[n_train..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((data.subset(&train_idx)?, data.subset(&test_idx)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_example, GENERATOR_VERSION};

    #[test]
    fn csv_fixture_parses_exactly() {
        let text = "# a comment\n1,0.5,-2.0\n-1,1.5,3.25\n1,0.0,7.0\n";
        let loaded = load_csv_str(text, &CsvOptions::default()).unwrap();
        let d = &loaded.dataset;
        assert_eq!(d.n(), 3);
        assert_eq!(d.p(), 2);
        assert_eq!(d.y().as_slice(), &[1.0, -1.0, 1.0]);
        assert_eq!(d.x()[(1, 1)], 3.25);
        assert_eq!(loaded.negative_label, "-1");
        assert_eq!(loaded.positive_label, "1");
    }

    #[test]
    fn csv_header_and_named_label_column() {
        let text = "f1,target,f2\n0.5,yes,1.0\n1.5,no,2.0\n";
        let opts = CsvOptions {
            has_header: true,
            label_column: LabelColumn::Name("target".into()),
            standardize: false,
        };
        let loaded = load_csv_str(text, &opts).unwrap();
        // Lexicographic: "no" < "yes", so "no" -> -1.
        assert_eq!(loaded.negative_label, "no");
        assert_eq!(loaded.positive_label, "yes");
        assert_eq!(loaded.dataset.y().as_slice(), &[1.0, -1.0]);
        assert_eq!(loaded.dataset.x()[(0, 1)], 1.0);
    }

    #[test]
    fn numeric_labels_map_by_numeric_order() {
        // "+1" is lexicographically smaller than "-1"; numeric order wins.
        let text = "+1,0.5\n-1,1.5\n";
        let loaded = load_csv_str(text, &CsvOptions::default()).unwrap();
        assert_eq!(loaded.negative_label, "-1");
        assert_eq!(loaded.positive_label, "+1");
        assert_eq!(loaded.dataset.y().as_slice(), &[1.0, -1.0]);
    }

    #[test]
    fn three_classes_error_names_them() {
        let text = "a,1.0\nb,2.0\nc,3.0\n";
        match load_csv_str(text, &CsvOptions::default()) {
            Err(DwdError::Parse(msg)) => {
                assert!(msg.contains('a') && msg.contains('b') && msg.contains('c'), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_rows_are_rejected() {
        assert!(load_csv_str("1,2.0\n-1,2.0,3.0\n", &CsvOptions::default()).is_err());
        assert!(load_csv_str("1,abc\n-1,2.0\n", &CsvOptions::default()).is_err());
        assert!(load_csv_str("1,\n-1,2.0\n", &CsvOptions::default()).is_err());
    }

    #[test]
    fn standardize_centers_and_scales_nonconstant_columns() {
        let text = "1,2.0,7.0\n-1,4.0,7.0\n1,6.0,7.0\n-1,8.0,7.0\n";
        let opts = CsvOptions {
            standardize: true,
            ..Default::default()
        };
        let d = load_csv_str(text, &opts).unwrap().dataset;
        let col0: Vec<f64> = d.x().column(0).iter().cloned().collect();
        let mean: f64 = col0.iter().sum::<f64>() / 4.0;
        let var: f64 = col0.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);
        // Constant column untouched.
        assert!(d.x().column(1).iter().all(|&v| v == 7.0));
    }

    #[test]
    fn sparse_row_fills_zeros() {
        let text = "1 3:2.5 7:1\n-1 1:1.0\n";
        let d = load_libsvm_str(text).unwrap().dataset;
        assert_eq!(d.p(), 7);
        assert_eq!(d.x()[(0, 2)], 2.5);
        assert_eq!(d.x()[(0, 6)], 1.0);
        assert_eq!(d.x()[(0, 0)], 0.0);
        assert_eq!(d.x()[(1, 0)], 1.0);
    }

    #[test]
    fn sparse_rejects_bad_indices() {
        assert!(load_libsvm_str("1 0:2.5\n-1 1:1\n").is_err());
        assert!(load_libsvm_str("1 3:2.5 2:1\n-1 1:1\n").is_err());
        assert!(load_libsvm_str("1 x\n-1 1:1\n").is_err());
    }

    #[test]
    fn save_then_load_round_trips() {
        let data = gen_example(1, 40, 5, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        save_dataset_csv(
            &path,
            &data,
            &[
                ("scenario", "ex1".to_string()),
                ("seed", "3".to_string()),
                ("generator", GENERATOR_VERSION.to_string()),
            ],
        )
        .unwrap();
        let opts = CsvOptions {
            has_header: true,
            ..Default::default()
        };
        let back = load_csv(&path, &opts).unwrap().dataset;
        assert_eq!(back.n(), data.n());
        assert_eq!(back.p(), data.p());
        assert_eq!(back.y(), data.y());
        // Shortest-round-trip float formatting makes this exact.
        assert_eq!(back.x(), data.x());
    }

    #[test]
    fn empty_feature_input_gives_empty_matrix() {
        let x = load_features_csv_str("# only a comment\n", false).unwrap();
        assert_eq!(x.nrows(), 0);
    }

    #[test]
    fn split_honors_ratio_exactly_when_divisible() {
        let data = gen_example(1, 300, 5, 9).unwrap();
        let (train, test) = train_test_split(&data, 2.0 / 3.0, 17).unwrap();
        assert_eq!(train.n(), 200);
        assert_eq!(test.n(), 100);
        let (tn, tp) = train.class_counts();
        assert_eq!((tn, tp), (100, 100));
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let data = gen_example(1, 100, 4, 10).unwrap();
        let (a_train, a_test) = train_test_split(&data, 0.7, 5).unwrap();
        let (b_train, b_test) = train_test_split(&data, 0.7, 5).unwrap();
        assert_eq!(a_train, b_train);
        assert_eq!(a_test, b_test);
        assert_eq!(a_train.n() + a_test.n(), 100);

        // Union is the original multiset: count rows by their first feature.
        let mut seen: Vec<f64> = a_train
            .x()
            .column(0)
            .iter()
            .chain(a_test.x().column(0).iter())
            .cloned()
            .collect();
        let mut original: Vec<f64> = data.x().column(0).iter().cloned().collect();
        seen.sort_by(|x, y| x.partial_cmp(y).unwrap());
        original.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(seen, original);
    }

    #[test]
    fn split_rejects_tiny_classes() {
        let x = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, -1.0, -1.0]);
        let d = Dataset::new(x, y).unwrap();
        assert!(train_test_split(&d, 0.5, 0).is_err());
    }

    #[test]
    fn split_rejects_bad_ratio() {
        let data = gen_example(1, 20, 3, 11).unwrap();
        assert!(train_test_split(&data, 0.0, 0).is_err());
        assert!(train_test_split(&data, 1.0, 0).is_err());
    }
}
