//! Partially labeled data: the observation matrix, ternary labels, CSV
//! ingestion, centering and rotation to a diagonal sample covariance.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Observed class label of one row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Pos,
    Neg,
    Unlabeled,
}

impl Label {
    pub fn is_observed(self) -> bool {
        self != Label::Unlabeled
    }

    /// `+1` / `-1` for observed labels.
    pub fn sign(self) -> Option<f64> {
        match self {
            Label::Pos => Some(1.0),
            Label::Neg => Some(-1.0),
            Label::Unlabeled => None,
        }
    }

    fn parse(raw: &str) -> Option<Label> {
        match raw.trim() {
            "+1" | "1" => Some(Label::Pos),
            "-1" => Some(Label::Neg),
            "NA" | "" => Some(Label::Unlabeled),
            _ => None,
        }
    }

    fn as_csv(self) -> &'static str {
        match self {
            Label::Pos => "1",
            Label::Neg => "-1",
            Label::Unlabeled => "NA",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_csv())
    }
}

/// `n x d` covariates with a per-row [`Label`].
///
/// Construction validates that there are at least two rows, at least one
/// column, that every entry is finite and that there is one label per row.
/// Predicted labels never live here; they belong to a
/// [`ClusterAssignment`](crate::cluster_index::ClusterAssignment).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartiallyLabeledDataset {
    x: Array2<f64>,
    labels: Vec<Label>,
    columns: Option<Vec<String>>,
}

impl PartiallyLabeledDataset {
    pub fn new(x: Array2<f64>, labels: Vec<Label>) -> Result<Self> {
        if x.nrows() < 2 {
            return Err(Error::TooFewRows {
                min: 2,
                found: x.nrows(),
            });
        }
        if x.ncols() == 0 {
            return Err(Error::InvalidData("at least one covariate column is required".into()));
        }
        if labels.len() != x.nrows() {
            return Err(Error::InvalidData(format!(
                "{} labels for {} rows",
                labels.len(),
                x.nrows()
            )));
        }
        if let Some(((r, c), _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: r + 1,
                column: format!("x{}", c + 1),
            });
        }
        Ok(PartiallyLabeledDataset {
            x,
            labels,
            columns: None,
        })
    }

    /// Dataset with every row unlabeled.
    pub fn unlabeled(x: Array2<f64>) -> Result<Self> {
        let n = x.nrows();
        Self::new(x, vec![Label::Unlabeled; n])
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.d() {
            return Err(Error::InvalidData(format!(
                "{} column names for {} columns",
                names.len(),
                self.d()
            )));
        }
        self.columns = Some(names);
        Ok(self)
    }

    /// Same covariates, new labels.
    pub fn relabel(&self, labels: Vec<Label>) -> Result<Self> {
        let mut out = Self::new(self.x.clone(), labels)?;
        out.columns = self.columns.clone();
        Ok(out)
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.columns.as_deref()
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_labeled(&self) -> usize {
        self.labels.iter().filter(|l| l.is_observed()).count()
    }

    pub fn n_unlabeled(&self) -> usize {
        self.n() - self.n_labeled()
    }

    pub fn n_pos(&self) -> usize {
        self.labels.iter().filter(|&&l| l == Label::Pos).count()
    }

    pub fn n_neg(&self) -> usize {
        self.labels.iter().filter(|&&l| l == Label::Neg).count()
    }

    /// Fraction of rows with an observed label.
    pub fn theta(&self) -> f64 {
        self.n_labeled() as f64 / self.n() as f64
    }

    pub fn into_parts(self) -> (Array2<f64>, Vec<Label>) {
        (self.x, self.labels)
    }

    fn with_x(&self, x: Array2<f64>) -> Self {
        PartiallyLabeledDataset {
            x,
            labels: self.labels.clone(),
            columns: self.columns.clone(),
        }
    }

    /// Writes the dataset as CSV with a `label` first column.
    ///
    /// Values use the shortest decimal form that parses back to the same
    /// `f64`, so [`load_csv`] reproduces the dataset exactly.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["label".to_string()];
        match &self.columns {
            Some(names) => header.extend(names.iter().cloned()),
            None => header.extend((1..=self.d()).map(|j| format!("x{j}"))),
        }
        out.write_record(&header)?;
        for (row, label) in self.x.rows().into_iter().zip(&self.labels) {
            let mut rec = Vec::with_capacity(self.d() + 1);
            rec.push(label.as_csv().to_string());
            rec.extend(row.iter().map(|v| format!("{v:?}")));
            out.write_record(&rec)?;
        }
        out.flush().map_err(|e| Error::Io {
            path: "<writer>".into(),
            source: e,
        })?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        self.write_csv(f)
    }
}

/// Which CSV column carries the labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    /// Zero-based column index.
    Index(usize),
}

impl Default for LabelColumn {
    fn default() -> Self {
        LabelColumn::Name("label".into())
    }
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    /// All-digit strings select by index, anything else by name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

fn parse_number(raw: &str) -> Option<f64> {
    raw.trim().parse::<f64>().ok()
}

/// Reads a partially labeled dataset from a CSV file.
pub fn load_csv(path: impl AsRef<Path>, label_column: &LabelColumn) -> Result<PartiallyLabeledDataset> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    read_csv(f, label_column)
}

/// Reads a partially labeled dataset from any CSV source.
///
/// The first record is a header when it contains a cell that is neither a
/// number nor a label token. Row numbers in errors are 1-based data rows.
pub fn read_csv<R: Read>(reader: R, label_column: &LabelColumn) -> Result<PartiallyLabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        records.push(rec);
    }
    let Some(first) = records.first() else {
        return Err(Error::TooFewRows { min: 2, found: 0 });
    };
    let has_header = first
        .iter()
        .any(|cell| parse_number(cell).is_none() && Label::parse(cell).is_none());
    let width = first.len();
    let header: Option<Vec<String>> = has_header.then(|| first.iter().map(str::to_string).collect());
    let label_idx = match label_column {
        LabelColumn::Index(i) if *i < width => *i,
        LabelColumn::Index(i) => return Err(Error::MissingLabelColumn(format!("#{i}"))),
        LabelColumn::Name(name) => header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| Error::MissingLabelColumn(name.clone()))?,
    };
    let column_name = |j: usize| -> String { header.as_ref().map(|h| h[j].clone()).unwrap_or_else(|| format!("#{j}")) };
    let data = if has_header { &records[1..] } else { &records[..] };
    if data.len() < 2 {
        return Err(Error::TooFewRows {
            min: 2,
            found: data.len(),
        });
    }
    let d = width - 1;
    if d == 0 {
        return Err(Error::InvalidData("no covariate columns".into()));
    }
    let mut values = Vec::with_capacity(data.len() * d);
    let mut labels = Vec::with_capacity(data.len());
    for (i, rec) in data.iter().enumerate() {
        let row = i + 1;
        if rec.len() != width {
            return Err(Error::RaggedRow {
                row,
                found: rec.len(),
                expected: width,
            });
        }
        for (j, cell) in rec.iter().enumerate() {
            if j == label_idx {
                labels.push(Label::parse(cell).ok_or_else(|| Error::BadLabel {
                    row,
                    value: cell.to_string(),
                })?);
                continue;
            }
            let v = parse_number(cell).ok_or_else(|| Error::NonNumeric {
                row,
                column: column_name(j),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row,
                    column: column_name(j),
                });
            }
            values.push(v);
        }
    }
    let x = Array2::from_shape_vec((data.len(), d), values).map_err(|e| Error::InvalidData(e.to_string()))?;
    let ds = PartiallyLabeledDataset::new(x, labels)?;
    match header {
        Some(h) => {
            let names = h
                .into_iter()
                .enumerate()
                .filter(|(j, _)| *j != label_idx)
                .map(|(_, s)| s)
                .collect();
            ds.with_column_names(names)
        }
        None => Ok(ds),
    }
}

/// Subtracts column means. Returns the centered dataset and the means.
pub fn center(dataset: &PartiallyLabeledDataset) -> (PartiallyLabeledDataset, Array1<f64>) {
    let (c, mean) = linalg::centered(dataset.x());
    (dataset.with_x(c), mean)
}

/// Output of [`rotate_to_diagonal`].
#[derive(Clone, Debug)]
pub struct RotationResult {
    pub rotated: PartiallyLabeledDataset,
    /// `d x d` orthogonal matrix; column `j` is the `j`-th principal axis.
    pub rotation: Array2<f64>,
    pub center: Array1<f64>,
}

/// Centers the data and rotates it onto the eigenvectors of its sample
/// covariance, so the rotated sample covariance is diagonal with
/// nonincreasing variances.
///
/// Each rotation column is signed so its first nonzero component is
/// nonnegative. Column names are dropped since rotated columns are principal
/// coordinates.
pub fn rotate_to_diagonal(dataset: &PartiallyLabeledDataset) -> Result<RotationResult> {
    let (c, mean) = linalg::centered(dataset.x());
    let total: f64 = c.iter().map(|v| v * v).sum();
    if total == 0.0 {
        return Err(Error::Degenerate("all rows are identical".into()));
    }
    let cov = linalg::covariance_of_centered(c.view());
    let (_, mut rotation) = linalg::symmetric_eigen(cov.view());
    for mut col in rotation.columns_mut() {
        let scale = col.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if let Some(first) = col.iter().copied().find(|v| v.abs() > 1e-12 * scale) {
            if first < 0.0 {
                col.mapv_inplace(|v| -v);
            }
        }
    }
    let rotated_x = c.dot(&rotation);
    let rotated = PartiallyLabeledDataset {
        x: rotated_x,
        labels: dataset.labels.clone(),
        columns: None,
    };
    Ok(RotationResult {
        rotated,
        rotation,
        center: mean,
    })
}
