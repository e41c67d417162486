//! Tabular dataset loading and preprocessing: CSV ingestion, one-hot
//! expansion of categorical/ordinal columns, z-scoring fit on a chosen
//! row subset, and stable (lexicographic) column indexing.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use crate::error::{Result, X2gError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ColumnKind {
    Numeric,
    Ordinal,
    Categorical,
}

impl ColumnKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "numeric" => Ok(ColumnKind::Numeric),
            "ordinal" => Ok(ColumnKind::Ordinal),
            "categorical" => Ok(ColumnKind::Categorical),
            other => Err(X2gError::Schema(format!("unknown column kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

/// Per-column storage. Categorical/ordinal columns hold raw strings until
/// one-hot encoding turns them into binary numeric columns.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Text(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub spec: ColumnSpec,
    pub data: ColumnData,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    pub columns: Vec<Column>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
}

/// Fitted preprocessing statistics, reusable on held-out rows.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PreprocessStats {
    /// (column name, mean, std). std == 0.0 marks a constant column,
    /// transformed to all-zeros.
    pub per_column: Vec<(String, f64, f64)>,
}

/// Column-kind schema for CSV loading; columns not listed default to numeric.
#[derive(Debug, Clone, Default)]
pub struct CsvSchema {
    pub kinds: HashMap<String, ColumnKind>,
}

impl CsvSchema {
    /// Parses `name=kind` lines; `#` comments and blank lines are skipped.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| X2gError::io(path.display().to_string(), e))?;
        let mut kinds = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, kind) = line.split_once('=').ok_or_else(|| {
                X2gError::Format(format!(
                    "{}:{}: expected `name=kind`",
                    path.display(),
                    lineno + 1
                ))
            })?;
            kinds.insert(name.trim().to_string(), ColumnKind::parse(kind.trim())?);
        }
        Ok(CsvSchema { kinds })
    }
}

impl TabularDataset {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.spec.name.clone()).collect()
    }

    /// Builds a fully numeric dataset, e.g. from the synthetic generator.
    pub fn from_numeric(
        names: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let d = names.len();
        for row in &rows {
            if row.len() != d {
                return Err(X2gError::Format(format!(
                    "row has {} values, expected {}",
                    row.len(),
                    d
                )));
            }
        }
        if rows.len() != labels.len() {
            return Err(X2gError::Label("labels do not match row count".into()));
        }
        for &l in &labels {
            if l >= class_names.len() {
                return Err(X2gError::Label(format!("label index {l} out of range")));
            }
        }
        let columns = names
            .into_iter()
            .enumerate()
            .map(|(j, name)| Column {
                spec: ColumnSpec {
                    name,
                    kind: ColumnKind::Numeric,
                },
                data: ColumnData::Numeric(rows.iter().map(|r| r[j]).collect()),
            })
            .collect();
        let ds = TabularDataset {
            columns,
            labels,
            class_names,
        };
        ds.check_unique_names()?;
        Ok(ds)
    }

    fn check_unique_names(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for c in &self.columns {
            if !seen.insert(c.spec.name.as_str()) {
                return Err(X2gError::Schema(format!(
                    "duplicate column name `{}`",
                    c.spec.name
                )));
            }
        }
        Ok(())
    }

    /// Numeric cell accessor; panics if the column still holds raw text.
    pub fn value(&self, row: usize, col: usize) -> f64 {
        match &self.columns[col].data {
            ColumnData::Numeric(v) => v[row],
            ColumnData::Text(_) => panic!("column {} not yet encoded", col),
        }
    }

    pub fn is_fully_numeric(&self) -> bool {
        self.columns
            .iter()
            .all(|c| matches!(c.data, ColumnData::Numeric(_)))
    }
}

/// Loads a CSV with a header row. `label_col` names the class column;
/// remaining columns take their kind from `schema` (default numeric).
pub fn load_csv(path: &Path, label_col: &str, schema: &CsvSchema) -> Result<TabularDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| X2gError::Format(format!("{}: {}", path.display(), e)))?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| X2gError::Format(format!("{}: missing header: {}", path.display(), e)))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if headers.is_empty() {
        return Err(X2gError::Format(format!(
            "{}: empty header row",
            path.display()
        )));
    }
    let label_idx = headers
        .iter()
        .position(|h| h == label_col)
        .ok_or_else(|| {
            X2gError::Schema(format!(
                "label column `{label_col}` not found in {}",
                path.display()
            ))
        })?;

    let feature_cols: Vec<(usize, String, ColumnKind)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(i, name)| {
            let kind = schema
                .kinds
                .get(name)
                .copied()
                .unwrap_or(ColumnKind::Numeric);
            (i, name.clone(), kind)
        })
        .collect();

    let mut raw: Vec<Vec<String>> = vec![Vec::new(); feature_cols.len()];
    let mut raw_labels: Vec<String> = Vec::new();
    for (recno, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| X2gError::Format(format!("{}: {}", path.display(), e)))?;
        if record.len() != headers.len() {
            return Err(X2gError::Format(format!(
                "{}: row {} has {} fields, header has {}",
                path.display(),
                recno + 2,
                record.len(),
                headers.len()
            )));
        }
        for (k, (i, _, _)) in feature_cols.iter().enumerate() {
            raw[k].push(record[*i].to_string());
        }
        let label = record[label_idx].trim();
        if label.is_empty() {
            return Err(X2gError::Label(format!(
                "{}: row {} has an empty label",
                path.display(),
                recno + 2
            )));
        }
        raw_labels.push(label.to_string());
    }

    // Class names deterministic by sorted order of distinct label strings.
    let class_names: Vec<String> = raw_labels
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let labels: Vec<usize> = raw_labels
        .iter()
        .map(|l| class_names.iter().position(|c| c == l).unwrap())
        .collect();

    let mut columns = Vec::with_capacity(feature_cols.len());
    for ((_, name, kind), cells) in feature_cols.into_iter().zip(raw) {
        let data = match kind {
            ColumnKind::Numeric => {
                let mut vals = Vec::with_capacity(cells.len());
                for (row, cell) in cells.iter().enumerate() {
                    let trimmed = cell.trim();
                    if trimmed.is_empty() {
                        return Err(X2gError::Format(format!(
                            "{}: missing numeric value at row {}, column `{}`",
                            path.display(),
                            row + 2,
                            name
                        )));
                    }
                    let v: f64 = trimmed.parse().map_err(|_| {
                        X2gError::Format(format!(
                            "{}: cannot parse `{}` as numeric at row {}, column `{}`",
                            path.display(),
                            trimmed,
                            row + 2,
                            name
                        ))
                    })?;
                    if !v.is_finite() {
                        return Err(X2gError::Format(format!(
                            "{}: non-finite value at row {}, column `{}`",
                            path.display(),
                            row + 2,
                            name
                        )));
                    }
                    vals.push(v);
                }
                ColumnData::Numeric(vals)
            }
            ColumnKind::Ordinal | ColumnKind::Categorical => ColumnData::Text(cells),
        };
        columns.push(Column {
            spec: ColumnSpec { name, kind },
            data,
        });
    }

    let ds = TabularDataset {
        columns,
        labels,
        class_names,
    };
    ds.check_unique_names()?;
    if ds.n_rows() == 0 {
        return Err(X2gError::Format(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    Ok(ds)
}

/// Writes the dataset back out as a header-first CSV, with the label
/// column (class names, not indices) appended last.
pub fn write_csv(ds: &TabularDataset, label_col: &str, path: &Path) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)
        .map_err(|e| X2gError::Format(format!("{}: {e}", path.display())))?;
    let mut header = ds.column_names();
    header.push(label_col.to_string());
    let write_err = |e: csv::Error| X2gError::Format(format!("{}: {e}", path.display()));
    wtr.write_record(&header).map_err(write_err)?;
    for r in 0..ds.n_rows() {
        let mut record: Vec<String> = Vec::with_capacity(ds.n_cols() + 1);
        for col in &ds.columns {
            record.push(match &col.data {
                ColumnData::Numeric(v) => {
                    // round-trippable float formatting
                    let mut s = format!("{:?}", v[r]);
                    if s.ends_with(".0") {
                        s.truncate(s.len() - 2);
                    }
                    s
                }
                ColumnData::Text(v) => v[r].clone(),
            });
        }
        record.push(ds.class_names[ds.labels[r]].clone());
        wtr.write_record(&record).map_err(write_err)?;
    }
    wtr.flush()
        .map_err(|e| X2gError::io(path.display().to_string(), e))?;
    Ok(())
}

/// Replaces each categorical/ordinal column of k distinct values with k
/// binary columns named `<col>=<value>` (values in sorted order), expansions
/// in place of the original column. Numeric columns pass through.
pub fn one_hot_encode(ds: &TabularDataset) -> TabularDataset {
    let mut columns = Vec::new();
    for col in &ds.columns {
        match &col.data {
            ColumnData::Numeric(_) => columns.push(col.clone()),
            ColumnData::Text(cells) => {
                let values: Vec<&String> = cells
                    .iter()
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                for value in values {
                    let data: Vec<f64> = cells
                        .iter()
                        .map(|c| if c == value { 1.0 } else { 0.0 })
                        .collect();
                    columns.push(Column {
                        spec: ColumnSpec {
                            name: format!("{}={}", col.spec.name, value),
                            kind: ColumnKind::Numeric,
                        },
                        data: ColumnData::Numeric(data),
                    });
                }
            }
        }
    }
    TabularDataset {
        columns,
        labels: ds.labels.clone(),
        class_names: ds.class_names.clone(),
    }
}

/// Z-scores every column with mean/std computed over `fit_rows` only
/// (population std). Constant columns map to all-zeros.
pub fn z_score(
    ds: &TabularDataset,
    fit_rows: &[usize],
) -> Result<(TabularDataset, PreprocessStats)> {
    if fit_rows.is_empty() {
        return Err(X2gError::Config("z_score: empty fit_rows".into()));
    }
    if !ds.is_fully_numeric() {
        return Err(X2gError::Schema(
            "z_score requires fully numeric data; run one_hot_encode first".into(),
        ));
    }
    let mut stats = Vec::with_capacity(ds.n_cols());
    let mut columns = Vec::with_capacity(ds.n_cols());
    for col in &ds.columns {
        let ColumnData::Numeric(vals) = &col.data else {
            unreachable!()
        };
        let n = fit_rows.len() as f64;
        let mean = fit_rows.iter().map(|&r| vals[r]).sum::<f64>() / n;
        let var = fit_rows
            .iter()
            .map(|&r| (vals[r] - mean).powi(2))
            .sum::<f64>()
            / n;
        let std = var.sqrt();
        let transformed: Vec<f64> = if std == 0.0 {
            vec![0.0; vals.len()]
        } else {
            vals.iter().map(|v| (v - mean) / std).collect()
        };
        stats.push((col.spec.name.clone(), mean, std));
        columns.push(Column {
            spec: col.spec.clone(),
            data: ColumnData::Numeric(transformed),
        });
    }
    Ok((
        TabularDataset {
            columns,
            labels: ds.labels.clone(),
            class_names: ds.class_names.clone(),
        },
        PreprocessStats { per_column: stats },
    ))
}

/// Applies previously fitted stats to a dataset with identical columns.
pub fn apply_z_score(ds: &TabularDataset, stats: &PreprocessStats) -> Result<TabularDataset> {
    if ds.n_cols() != stats.per_column.len() {
        return Err(X2gError::Schema(
            "stats do not match dataset column count".into(),
        ));
    }
    let mut columns = Vec::with_capacity(ds.n_cols());
    for (col, (name, mean, std)) in ds.columns.iter().zip(&stats.per_column) {
        if &col.spec.name != name {
            return Err(X2gError::Schema(format!(
                "stats column `{}` does not match dataset column `{}`",
                name, col.spec.name
            )));
        }
        let ColumnData::Numeric(vals) = &col.data else {
            return Err(X2gError::Schema("column not numeric".into()));
        };
        let transformed = if *std == 0.0 {
            vec![0.0; vals.len()]
        } else {
            vals.iter().map(|v| (v - mean) / std).collect()
        };
        columns.push(Column {
            spec: col.spec.clone(),
            data: ColumnData::Numeric(transformed),
        });
    }
    Ok(TabularDataset {
        columns,
        labels: ds.labels.clone(),
        class_names: ds.class_names.clone(),
    })
}

/// Stable column indices by lexicographic name order, independent of the
/// on-disk column order.
pub fn column_index_map(ds: &TabularDataset) -> Result<BTreeMap<String, usize>> {
    ds.check_unique_names()?;
    let mut names = ds.column_names();
    names.sort();
    Ok(names
        .into_iter()
        .enumerate()
        .map(|(i, n)| (n, i))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_basic_csv() {
        let f = write_csv("a,b,label\n1.0,2.0,x\n3.0,4.0,y\n5.0,6.0,x\n");
        let ds = load_csv(f.path(), "label", &CsvSchema::default()).unwrap();
        assert_eq!(ds.n_rows(), 3);
        assert_eq!(ds.n_cols(), 2);
        assert_eq!(ds.class_names, vec!["x", "y"]);
        assert_eq!(ds.labels, vec![0, 1, 0]);
        assert_eq!(ds.value(1, 0), 3.0);
    }

    #[test]
    fn ragged_row_is_format_error() {
        let f = write_csv("a,b,c,label\n1,2,3,x\n1,2,3,4,x\n");
        let err = load_csv(f.path(), "label", &CsvSchema::default()).unwrap_err();
        assert!(matches!(err, X2gError::Format(_)), "{err}");
    }

    #[test]
    fn fig2_style_header_row() {
        // One header row f1..f8, one value row.
        let f = write_csv("f1,f2,f3,f4,f5,f6,f7,f8,label\n0,1,2,3,4,5,6,7,c0\n");
        let ds = load_csv(f.path(), "label", &CsvSchema::default()).unwrap();
        assert_eq!(ds.n_cols(), 8);
        assert_eq!(ds.n_rows(), 1);
    }

    #[test]
    fn missing_numeric_cell_rejected() {
        let f = write_csv("a,label\n,x\n");
        let err = load_csv(f.path(), "label", &CsvSchema::default()).unwrap_err();
        assert!(matches!(err, X2gError::Format(_)));
    }

    #[test]
    fn reload_is_bit_identical() {
        let f = write_csv("a,b,label\n1.5,-0.25,x\n2.5,0.125,y\n");
        let ds1 = load_csv(f.path(), "label", &CsvSchema::default()).unwrap();
        let ds2 = load_csv(f.path(), "label", &CsvSchema::default()).unwrap();
        assert_eq!(ds1, ds2);
    }

    #[test]
    fn one_hot_basic() {
        let f = write_csv("sex,label\nM,x\nF,y\nM,x\n");
        let mut schema = CsvSchema::default();
        schema.kinds.insert("sex".into(), ColumnKind::Categorical);
        let ds = load_csv(f.path(), "label", &schema).unwrap();
        let enc = one_hot_encode(&ds);
        assert_eq!(enc.column_names(), vec!["sex=F", "sex=M"]);
        let sex_f: Vec<f64> = (0..3).map(|r| enc.value(r, 0)).collect();
        let sex_m: Vec<f64> = (0..3).map(|r| enc.value(r, 1)).collect();
        assert_eq!(sex_m, vec![1.0, 0.0, 1.0]);
        assert_eq!(sex_f, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn one_hot_identity_on_numeric() {
        let f = write_csv("a,b,label\n1,2,x\n3,4,y\n");
        let ds = load_csv(f.path(), "label", &CsvSchema::default()).unwrap();
        let enc = one_hot_encode(&ds);
        assert_eq!(enc, ds);
        // idempotent
        assert_eq!(one_hot_encode(&enc), enc);
    }

    #[test]
    fn one_hot_expansion_count() {
        // 3 categorical columns with 2,3,4 values on D=5 -> D' = 5-3+9 = 11.
        let f = write_csv(
            "c1,c2,c3,n1,n2,label\n\
             a,p,w,1,2,x\n\
             b,q,x,3,4,y\n\
             a,r,y,5,6,x\n\
             b,p,z,7,8,y\n",
        );
        let mut schema = CsvSchema::default();
        for c in ["c1", "c2", "c3"] {
            schema.kinds.insert(c.into(), ColumnKind::Categorical);
        }
        let ds = load_csv(f.path(), "label", &schema).unwrap();
        let enc = one_hot_encode(&ds);
        assert_eq!(enc.n_cols(), 11);
    }

    #[test]
    fn z_score_hand_example() {
        let ds = TabularDataset::from_numeric(
            vec!["a".into()],
            vec![vec![1.0], vec![2.0], vec![3.0]],
            vec![0, 0, 1],
            vec!["x".into(), "y".into()],
        )
        .unwrap();
        let (z, stats) = z_score(&ds, &[0, 1, 2]).unwrap();
        let col: Vec<f64> = (0..3).map(|r| z.value(r, 0)).collect();
        // mu=2, population sigma=sqrt(2/3)
        assert!((col[0] + 1.2247448713915890).abs() < 1e-12);
        assert!(col[1].abs() < 1e-12);
        assert!((col[2] - 1.2247448713915890).abs() < 1e-12);
        assert_eq!(stats.per_column[0].1, 2.0);
    }

    #[test]
    fn z_score_constant_column() {
        let ds = TabularDataset::from_numeric(
            vec!["a".into()],
            vec![vec![5.0], vec![5.0], vec![5.0]],
            vec![0, 0, 1],
            vec!["x".into(), "y".into()],
        )
        .unwrap();
        let (z, _) = z_score(&ds, &[0, 1, 2]).unwrap();
        for r in 0..3 {
            assert_eq!(z.value(r, 0), 0.0);
        }
    }

    #[test]
    fn z_score_train_stats_apply_to_heldout() {
        let ds = TabularDataset::from_numeric(
            vec!["a".into()],
            vec![vec![1.0], vec![3.0], vec![10.0]],
            vec![0, 1, 0],
            vec!["x".into(), "y".into()],
        )
        .unwrap();
        // fit on rows 0,1: mu=2, sigma=1
        let (z, stats) = z_score(&ds, &[0, 1]).unwrap();
        assert_eq!(z.value(2, 0), (10.0 - 2.0) / 1.0);
        let applied = apply_z_score(&ds, &stats).unwrap();
        assert_eq!(applied, z);
    }

    #[test]
    fn z_score_fitted_moments() {
        let ds = TabularDataset::from_numeric(
            vec!["a".into(), "b".into()],
            vec![
                vec![1.0, 10.0],
                vec![4.0, -3.0],
                vec![2.5, 7.0],
                vec![-1.0, 0.5],
            ],
            vec![0, 1, 0, 1],
            vec!["x".into(), "y".into()],
        )
        .unwrap();
        let (z, _) = z_score(&ds, &[0, 1, 2, 3]).unwrap();
        for c in 0..2 {
            let vals: Vec<f64> = (0..4).map(|r| z.value(r, c)).collect();
            let mean = vals.iter().sum::<f64>() / 4.0;
            let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0).sqrt();
            assert!(mean.abs() < 1e-9);
            assert!((std - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn column_index_map_lexicographic() {
        let ds = TabularDataset::from_numeric(
            vec!["g2".into(), "g1".into(), "g3".into()],
            vec![vec![0.0, 0.0, 0.0]],
            vec![0],
            vec!["x".into(), "y".into()],
        )
        .unwrap();
        let map = column_index_map(&ds).unwrap();
        assert_eq!(map["g1"], 0);
        assert_eq!(map["g2"], 1);
        assert_eq!(map["g3"], 2);

        let permuted = TabularDataset::from_numeric(
            vec!["g3".into(), "g1".into(), "g2".into()],
            vec![vec![0.0, 0.0, 0.0]],
            vec![0],
            vec!["x".into(), "y".into()],
        )
        .unwrap();
        assert_eq!(column_index_map(&permuted).unwrap(), map);
    }

    #[test]
    fn column_index_map_sorted_alphabet() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut names: Vec<String> = ('a'..='z').map(|c| c.to_string()).collect();
        let sorted = names.clone();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        names.shuffle(&mut rng);
        let ds = TabularDataset::from_numeric(
            names.clone(),
            vec![vec![0.0; 26]],
            vec![0],
            vec!["x".into(), "y".into()],
        )
        .unwrap();
        let map = column_index_map(&ds).unwrap();
        for (i, n) in sorted.iter().enumerate() {
            assert_eq!(map[n], i);
        }
    }
}
