//! Tabular data ingestion, one-hot encoding and deterministic splits.
//!
//! A [`FeatureSchema`] (loaded from JSON) names every column of a CSV file
//! and how to encode it. Categorical columns expand to one indicator column
//! per admissible value, numeric columns are min-max scaled to [0, 1] on the
//! full table, and the label / group columns are binarized and excluded from
//! the feature matrix. Group 0 is the protected group by convention.

use crate::exec::mix_seed;
use crate::matrix::Matrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv parse error: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("column `{0}` missing from the CSV header")]
    MissingColumn(String),
    #[error("row {row}: value `{value}` not admissible for categorical column `{column}`")]
    UnknownCategoricalValue {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: cannot parse `{value}` in numeric column `{column}`")]
    UnparseableNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("table has {0} data rows; at least 2 required")]
    TooFewRows(usize),
    #[error("only one group value present after encoding")]
    SingleGroup,
    #[error("invalid split spec: {0}")]
    InvalidSplit(String),
    #[error("partition `{0}` lacks both group values or both label values")]
    EmptyPartition(&'static str),
}

/// How a raw column is interpreted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    /// Expands to one indicator column per admissible value.
    Categorical { values: Vec<String> },
    /// Min-max scaled to [0, 1] over the full table.
    Numeric,
    /// Already 0/1.
    Binary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

/// Declares the columns of a dataset and which of them carry the label and
/// the group membership.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub columns: Vec<ColumnSpec>,
    pub label_column: String,
    /// Raw value mapped to Y = 1.
    pub positive_label: String,
    pub group_column: String,
    /// Raw value mapped to G = 0 (the protected group).
    pub protected_value: String,
}

impl FeatureSchema {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let schema: FeatureSchema = serde_json::from_str(&text)
            .map_err(|e| DataError::Schema(format!("{}: {e}", path.display())))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let mut seen = std::collections::HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(DataError::Schema(format!("duplicate column `{}`", c.name)));
            }
            if let ColumnKind::Categorical { values } = &c.kind {
                if values.is_empty() {
                    return Err(DataError::Schema(format!(
                        "categorical column `{}` lists no admissible values",
                        c.name
                    )));
                }
                let mut vals = std::collections::HashSet::new();
                for v in values {
                    if !vals.insert(v.as_str()) {
                        return Err(DataError::Schema(format!(
                            "categorical column `{}` lists `{v}` twice",
                            c.name
                        )));
                    }
                }
            }
        }
        for (role, name) in [("label", &self.label_column), ("group", &self.group_column)] {
            let count = self.columns.iter().filter(|c| &c.name == name).count();
            if count != 1 {
                return Err(DataError::Schema(format!(
                    "{role} column `{name}` appears {count} times in columns; expected exactly once"
                )));
            }
        }
        Ok(())
    }

    /// Width of the encoded feature matrix (label/group columns excluded).
    pub fn encoded_width(&self) -> usize {
        self.columns
            .iter()
            .filter(|c| c.name != self.label_column && c.name != self.group_column)
            .map(|c| match &c.kind {
                ColumnKind::Categorical { values } => values.len(),
                ColumnKind::Numeric | ColumnKind::Binary => 1,
            })
            .sum()
    }
}

/// Validated raw string cells, columns parallel to the schema.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Drop rows containing non-admissible categorical values instead of
    /// returning an error. Meant for ingesting unfiltered public datasets.
    pub drop_unknown_rows: bool,
}

/// Reads a CSV file, keeping the schema's columns in schema order and
/// validating every cell against its declared kind.
pub fn load_csv(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<RawTable, DataError> {
    load_csv_opts(path, schema, LoadOptions::default())
}

pub fn load_csv_opts(
    path: impl AsRef<Path>,
    schema: &FeatureSchema,
    opts: LoadOptions,
) -> Result<RawTable, DataError> {
    schema.validate()?;
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => DataError::Io {
                path: path.display().to_string(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => DataError::Csv(e),
        })?;

    let header = reader.headers()?.clone();
    let mut col_idx = Vec::with_capacity(schema.columns.len());
    for c in &schema.columns {
        let idx = header
            .iter()
            .position(|h| h == c.name)
            .ok_or_else(|| DataError::MissingColumn(c.name.clone()))?;
        col_idx.push(idx);
    }

    let mut rows = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        let mut cells = Vec::with_capacity(schema.columns.len());
        let mut drop_row = false;
        for (c, &idx) in schema.columns.iter().zip(&col_idx) {
            let value = record.get(idx).unwrap_or("").to_string();
            match &c.kind {
                ColumnKind::Categorical { values } => {
                    if !values.contains(&value) {
                        if opts.drop_unknown_rows {
                            drop_row = true;
                            break;
                        }
                        return Err(DataError::UnknownCategoricalValue {
                            row: row_no,
                            column: c.name.clone(),
                            value,
                        });
                    }
                }
                ColumnKind::Numeric => {
                    if value.parse::<f64>().is_err() {
                        return Err(DataError::UnparseableNumeric {
                            row: row_no,
                            column: c.name.clone(),
                            value,
                        });
                    }
                }
                ColumnKind::Binary => {
                    if value != "0" && value != "1" {
                        return Err(DataError::UnparseableNumeric {
                            row: row_no,
                            column: c.name.clone(),
                            value,
                        });
                    }
                }
            }
            cells.push(value);
        }
        if !drop_row {
            rows.push(cells);
        }
    }
    if rows.len() < 2 {
        return Err(DataError::TooFewRows(rows.len()));
    }
    Ok(RawTable {
        columns: schema.columns.iter().map(|c| c.name.clone()).collect(),
        rows,
    })
}

/// Non-fatal encoding diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EncodeWarning {
    /// Min == max: scaling is undefined, the column was emitted as all zeros.
    ConstantNumericColumn { column: String },
}

impl fmt::Display for EncodeWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EncodeWarning::ConstantNumericColumn { column } => {
                write!(f, "numeric column `{column}` is constant; emitted as zeros")
            }
        }
    }
}

/// Identifies which split a dataset came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Partition {
    Train,
    Suing,
    Test,
}

impl Partition {
    pub fn as_str(&self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Suing => "suing",
            Partition::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitProvenance {
    pub seed: u64,
    pub resample_index: u32,
    pub partition: Partition,
    /// Fingerprint of the parent dataset; partitions with equal origin and
    /// different partition tags are disjoint by construction.
    pub origin: u64,
}

/// One-hot encoded dataset with binary label and group vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<u8>,
    pub groups: Vec<u8>,
    pub schema: FeatureSchema,
    pub feature_names: Vec<String>,
    pub provenance: Option<SplitProvenance>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.n_cols()
    }

    /// New dataset holding the given rows in the given order; carries no
    /// split provenance.
    pub fn take_rows(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            groups: idx.iter().map(|&i| self.groups[i]).collect(),
            schema: self.schema.clone(),
            feature_names: self.feature_names.clone(),
            provenance: None,
        }
    }

    fn select(&self, idx: &[usize], provenance: SplitProvenance) -> Dataset {
        Dataset {
            provenance: Some(provenance),
            ..self.take_rows(idx)
        }
    }

    /// FNV-1a over row count and feature names; ties split partitions to
    /// their parent dataset.
    pub fn origin_fingerprint(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        eat(&(self.len() as u64).to_le_bytes());
        for name in &self.feature_names {
            eat(name.as_bytes());
            eat(&[0x1f]);
        }
        h
    }
}

/// One-hot encodes a validated raw table.
///
/// Returns the dataset and any non-fatal warnings. Label and group columns
/// are mapped to {0, 1} and excluded from the features.
pub fn encode(raw: &RawTable, schema: &FeatureSchema) -> Result<(Dataset, Vec<EncodeWarning>), DataError> {
    schema.validate()?;
    let n = raw.rows.len();
    let mut warnings = Vec::new();

    let mut feature_names = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut labels = vec![0u8; n];
    let mut groups = vec![0u8; n];

    for (c_idx, c) in schema.columns.iter().enumerate() {
        let cell = |row: usize| raw.rows[row][c_idx].as_str();
        if c.name == schema.label_column {
            for (row, l) in labels.iter_mut().enumerate() {
                *l = (cell(row) == schema.positive_label) as u8;
            }
            continue;
        }
        if c.name == schema.group_column {
            for (row, g) in groups.iter_mut().enumerate() {
                // Protected group is G = 0.
                *g = (cell(row) != schema.protected_value) as u8;
            }
            continue;
        }
        match &c.kind {
            ColumnKind::Categorical { values } => {
                for v in values {
                    feature_names.push(format!("{}={}", c.name, v));
                    columns.push((0..n).map(|row| (cell(row) == v.as_str()) as u8 as f64).collect());
                }
            }
            ColumnKind::Binary => {
                feature_names.push(c.name.clone());
                columns.push((0..n).map(|row| (cell(row) == "1") as u8 as f64).collect());
            }
            ColumnKind::Numeric => {
                let vals: Vec<f64> = (0..n)
                    .map(|row| cell(row).parse::<f64>().expect("validated at load"))
                    .collect();
                let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
                let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                feature_names.push(c.name.clone());
                if min == max {
                    warnings.push(EncodeWarning::ConstantNumericColumn {
                        column: c.name.clone(),
                    });
                    columns.push(vec![0.0; n]);
                } else {
                    columns.push(vals.iter().map(|v| (v - min) / (max - min)).collect());
                }
            }
        }
    }

    let mut features = Matrix::zeros(n, columns.len());
    for (j, col) in columns.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            features.set(i, j, v);
        }
    }

    if n > 0 {
        let g0 = groups.contains(&0);
        let g1 = groups.contains(&1);
        if !(g0 && g1) {
            return Err(DataError::SingleGroup);
        }
    }

    Ok((
        Dataset {
            features,
            labels,
            groups,
            schema: schema.clone(),
            feature_names,
            provenance: None,
        },
        warnings,
    ))
}

/// Fractions and seeding for the train / suing / test partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// (train, suing, test) fractions summing to 1.
    pub ratios: (f64, f64, f64),
    pub seed: u64,
    /// Number of independent resampled splits.
    pub n_resamples: u32,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            ratios: (0.67, 0.165, 0.165),
            seed: 0,
            n_resamples: 10,
        }
    }
}

/// Deterministically partitions a dataset into train / suing / test.
///
/// The shuffle is keyed by `(spec.seed, resample_index)`, so each index
/// yields a distinct reproducible partition. Fractional sizes are floored
/// for suing and test; remainder rows go to train.
pub fn split(
    data: &Dataset,
    spec: &SplitSpec,
    resample_index: u32,
) -> Result<(Dataset, Dataset, Dataset), DataError> {
    let (rt, rs, re) = spec.ratios;
    if !(rt > 0.0 && rs > 0.0 && re > 0.0) {
        return Err(DataError::InvalidSplit("fractions must be positive".into()));
    }
    if (rt + rs + re - 1.0).abs() > 1e-9 {
        return Err(DataError::InvalidSplit(format!(
            "fractions sum to {}, expected 1",
            rt + rs + re
        )));
    }
    if resample_index >= spec.n_resamples {
        return Err(DataError::InvalidSplit(format!(
            "resample_index {resample_index} out of range (n_resamples = {})",
            spec.n_resamples
        )));
    }

    let n = data.len();
    let n_suing = (n as f64 * rs).floor() as usize;
    let n_test = (n as f64 * re).floor() as usize;
    let n_train = n - n_suing - n_test;

    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, resample_index as u64));
    idx.shuffle(&mut rng);

    let origin = data.origin_fingerprint();
    let prov = |partition| SplitProvenance {
        seed: spec.seed,
        resample_index,
        partition,
        origin,
    };
    let train = data.select(&idx[..n_train], prov(Partition::Train));
    let suing = data.select(&idx[n_train..n_train + n_suing], prov(Partition::Suing));
    let test = data.select(&idx[n_train + n_suing..], prov(Partition::Test));

    for (part, name) in [(&train, "train"), (&suing, "suing"), (&test, "test")] {
        let has = |v: &[u8]| v.contains(&0) && v.contains(&1);
        if !has(&part.groups) || !has(&part.labels) {
            return Err(DataError::EmptyPartition(match name {
                "train" => "train",
                "suing" => "suing",
                _ => "test",
            }));
        }
    }
    Ok((train, suing, test))
}

/// Generates a binary-feature dataset with a controlled label-rate gap
/// between the groups: P(Y=1 | G=0) − P(Y=1 | G=1) ≈ `bias`.
///
/// The label mixes three channels: with probability `bias` it is the group
/// rule 1[G=0] (this alone produces the requested gap, since the other
/// channels are balanced); with probability 0.25·(1−bias)⁴ it is the XOR of
/// two dedicated feature columns; otherwise an independent coin. Feature 0
/// is a noisy proxy of the group, columns 1 and 2 feed the XOR channel, and
/// the remaining columns are noisy copies of the label (every fourth column
/// pure noise). Higher bias therefore means both a larger gap and a more
/// linearly-learnable label, mirroring the way strongly encoded group
/// structure makes real black-boxes easy to imitate.
pub fn synth_generate(n: usize, n_features: usize, bias: f64, seed: u64) -> Dataset {
    assert!(n >= 20, "need at least 20 rows");
    assert!(n_features >= 2, "need at least 2 features");
    assert!((0.0..=1.0).contains(&bias), "bias must be in [0, 1]");

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xor_channel = n_features >= 4;
    let xor_share = 0.25 * (1.0 - bias).powi(4);

    let mut groups = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut features = Matrix::zeros(n, n_features);
    for i in 0..n {
        let g: u8 = rng.gen_range(0..2);
        let x1: u8 = rng.gen_range(0..2);
        let x2: u8 = rng.gen_range(0..2);
        let u = rng.gen::<f64>();
        let y = if u < bias {
            1 - g
        } else if xor_channel && u < bias + (1.0 - bias) * xor_share {
            let x = x1 ^ x2;
            if rng.gen::<f64>() < 0.05 {
                1 - x
            } else {
                x
            }
        } else {
            rng.gen_range(0..2u8)
        };
        groups.push(g);
        labels.push(y);

        // Group proxy with 10% flips.
        let f0 = if rng.gen::<f64>() < 0.9 { g } else { 1 - g };
        features.set(i, 0, f0 as f64);
        for j in 1..n_features {
            let v = if xor_channel && j == 1 {
                x1
            } else if xor_channel && j == 2 {
                x2
            } else if j % 4 == 0 {
                rng.gen_range(0..2u8)
            } else {
                let flip_p = 0.15 + 0.1 * ((j - 1) % 3) as f64;
                if rng.gen::<f64>() < flip_p {
                    1 - y
                } else {
                    y
                }
            };
            features.set(i, j, v as f64);
        }
    }
    // n >= 20 makes a single-group draw vanishingly unlikely, but guarantee it.
    if !groups.contains(&0) {
        groups[0] = 0;
    }
    if !groups.contains(&1) {
        groups[1] = 1;
    }

    let columns: Vec<ColumnSpec> = (0..n_features)
        .map(|j| ColumnSpec {
            name: format!("f{j}"),
            kind: ColumnKind::Binary,
        })
        .chain([
            ColumnSpec {
                name: "label".into(),
                kind: ColumnKind::Binary,
            },
            ColumnSpec {
                name: "group".into(),
                kind: ColumnKind::Binary,
            },
        ])
        .collect();
    let schema = FeatureSchema {
        columns,
        label_column: "label".into(),
        positive_label: "1".into(),
        group_column: "group".into(),
        protected_value: "0".into(),
    };
    let feature_names = (0..n_features).map(|j| format!("f{j}")).collect();
    Dataset {
        features,
        labels,
        groups,
        schema,
        feature_names,
        provenance: None,
    }
}

/// Writes an encoded dataset as CSV: feature columns, then label and group.
/// Integral cells are written without a decimal point.
pub fn write_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    })?;
    let mut header: Vec<String> = data.feature_names.clone();
    header.push(data.schema.label_column.clone());
    header.push(data.schema.group_column.clone());
    w.write_record(&header)?;
    let fmt_cell = |v: f64| {
        if v == v.trunc() {
            format!("{}", v as i64)
        } else {
            format!("{v}")
        }
    };
    for i in 0..data.len() {
        let mut rec: Vec<String> = data.features.row(i).iter().map(|&v| fmt_cell(v)).collect();
        rec.push(data.labels[i].to_string());
        rec.push(data.groups[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}
