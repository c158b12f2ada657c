use std::ops::Range;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::schema::{DatasetSchema, FeatureKind};
use super::DataError;
use crate::cost::FeatureVector;

/// Fraction of rows assigned to the training split.
pub const TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnEncoding {
    Continuous { name: String, min: f64, max: f64 },
    Categorical { name: String, categories: Vec<String> },
}

impl ColumnEncoding {
    pub fn name(&self) -> &str {
        match self {
            ColumnEncoding::Continuous { name, .. } | ColumnEncoding::Categorical { name, .. } => name,
        }
    }

    fn width(&self) -> usize {
        match self {
            ColumnEncoding::Continuous { .. } => 1,
            ColumnEncoding::Categorical { categories, .. } => categories.len(),
        }
    }
}

/// A feature value in original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureValue {
    Number(f64),
    Category(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedFeature {
    pub name: String,
    pub value: FeatureValue,
}

/// Min-max scaling and one-hot layout of the encoded feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoding {
    pub columns: Vec<ColumnEncoding>,
}

impl Encoding {
    pub fn dim(&self) -> usize {
        self.columns.iter().map(ColumnEncoding::width).sum()
    }

    /// Encoded index ranges of the categorical columns.
    pub fn one_hot_blocks(&self) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut offset = 0;
        for col in &self.columns {
            let w = col.width();
            if matches!(col, ColumnEncoding::Categorical { .. }) {
                out.push(offset..offset + w);
            }
            offset += w;
        }
        out
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for col in &self.columns {
            match col {
                ColumnEncoding::Continuous { name, .. } => out.push(name.clone()),
                ColumnEncoding::Categorical { name, categories } => {
                    out.extend(categories.iter().map(|c| format!("{name}={c}")))
                }
            }
        }
        out
    }

    pub fn scale(&self, column: usize, raw: f64) -> f64 {
        match &self.columns[column] {
            ColumnEncoding::Continuous { min, max, .. } => (raw - min) / (max - min),
            ColumnEncoding::Categorical { .. } => panic!("column {column} is categorical"),
        }
    }

    pub fn unscale(&self, column: usize, scaled: f64) -> f64 {
        match &self.columns[column] {
            ColumnEncoding::Continuous { min, max, .. } => min + scaled * (max - min),
            ColumnEncoding::Categorical { .. } => panic!("column {column} is categorical"),
        }
    }

    /// Encodes one record given in original units, column order as in `columns`.
    pub fn encode(&self, values: &[FeatureValue]) -> Result<FeatureVector, DataError> {
        if values.len() != self.columns.len() {
            return Err(DataError::Schema(format!(
                "expected {} feature values, got {}",
                self.columns.len(),
                values.len()
            )));
        }
        let mut out = Vec::with_capacity(self.dim());
        for (k, (col, v)) in self.columns.iter().zip(values).enumerate() {
            match (col, v) {
                (ColumnEncoding::Continuous { .. }, FeatureValue::Number(x)) => out.push(self.scale(k, *x)),
                (ColumnEncoding::Categorical { name, categories }, FeatureValue::Category(c)) => {
                    let hit = categories.iter().position(|x| x == c).ok_or_else(|| DataError::UnseenCategory {
                        column: name.clone(),
                        value: c.clone(),
                    })?;
                    out.extend((0..categories.len()).map(|i| if i == hit { 1.0 } else { 0.0 }));
                }
                _ => {
                    return Err(DataError::Schema(format!("wrong value kind for `{}`", col.name())));
                }
            }
        }
        FeatureVector::from_slice(&out).map_err(|e| DataError::Schema(e.to_string()))
    }

    /// Back to original units; a one-hot block decodes to its largest entry.
    pub fn decode(&self, x: &FeatureVector) -> Vec<DecodedFeature> {
        let v = x.as_slice();
        let mut offset = 0;
        let mut out = Vec::with_capacity(self.columns.len());
        for (k, col) in self.columns.iter().enumerate() {
            let value = match col {
                ColumnEncoding::Continuous { .. } => FeatureValue::Number(self.unscale(k, v[offset])),
                ColumnEncoding::Categorical { categories, .. } => {
                    let block = &v[offset..offset + categories.len()];
                    let best = (0..block.len()).fold(0, |b, i| if block[i] > block[b] { i } else { b });
                    FeatureValue::Category(categories[best].clone())
                }
            };
            out.push(DecodedFeature {
                name: col.name().to_string(),
                value,
            });
            offset += col.width();
        }
        out
    }
}

/// A preprocessed dataset: scaled rows, labels and a train/test split.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    rows: Vec<FeatureVector>,
    labels: Vec<bool>,
    train: Vec<usize>,
    test: Vec<usize>,
    encoding: Encoding,
}

impl Dataset {
    pub fn new(
        name: &str,
        rows: Vec<FeatureVector>,
        labels: Vec<bool>,
        encoding: Encoding,
        split_seed: u64,
    ) -> Result<Self, DataError> {
        if rows.len() < 2 {
            return Err(DataError::TooFewRows(rows.len()));
        }
        if rows.len() != labels.len() {
            return Err(DataError::Schema("row and label counts differ".into()));
        }
        let (train, test) = split(rows.len(), split_seed);
        Ok(Self {
            name: name.to_string(),
            rows,
            labels,
            train,
            test,
            encoding,
        })
    }

    pub fn dim(&self) -> usize {
        self.encoding.dim()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[FeatureVector] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &FeatureVector {
        &self.rows[i]
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn train_indices(&self) -> &[usize] {
        &self.train
    }

    pub fn test_indices(&self) -> &[usize] {
        &self.test
    }

    pub fn encoding(&self) -> &Encoding {
        &self.encoding
    }
}

/// Uniform 80/20 split; both index lists are returned sorted.
fn split(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((n as f64) * TRAIN_FRACTION).round() as usize;
    let n_train = n_train.clamp(1, n - 1);
    let mut train = idx[..n_train].to_vec();
    let mut test = idx[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

fn labels_match(value: &str, positive: &str) -> bool {
    if value == positive {
        return true;
    }
    match (value.parse::<f64>(), positive.parse::<f64>()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

/// Reads a CSV with a header row and encodes it according to `schema`.
pub fn load_csv(path: &Path, schema: &DatasetSchema, split_seed: u64) -> Result<Dataset, DataError> {
    let reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let name = if schema.name.is_empty() {
        path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset").to_string()
    } else {
        schema.name.clone()
    };
    read_csv(reader, schema, &name, split_seed)
}

pub fn read_csv<R: std::io::Read>(
    mut reader: csv::Reader<R>,
    schema: &DatasetSchema,
    name: &str,
    split_seed: u64,
) -> Result<Dataset, DataError> {
    schema.validate()?;
    let headers = reader.headers()?.clone();
    let find = |col: &str| {
        headers
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| DataError::MissingColumn(col.to_string()))
    };
    let feature_cols = schema
        .features
        .iter()
        .map(|f| find(&f.name))
        .collect::<Result<Vec<_>, _>>()?;
    let label_col = find(&schema.label)?;

    let mut raw: Vec<Vec<FeatureValue>> = Vec::new();
    let mut labels = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let mut values = Vec::with_capacity(schema.features.len());
        for (f, &col) in schema.features.iter().zip(&feature_cols) {
            let cell = record.get(col).unwrap_or("");
            values.push(match f.kind {
                FeatureKind::Continuous => {
                    let v = cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                        DataError::NonNumeric {
                            column: f.name.clone(),
                            row: line + 1,
                            value: cell.to_string(),
                        }
                    })?;
                    FeatureValue::Number(v)
                }
                FeatureKind::Categorical => {
                    if !f.categories.iter().any(|c| c == cell) {
                        return Err(DataError::UnseenCategory {
                            column: f.name.clone(),
                            value: cell.to_string(),
                        });
                    }
                    FeatureValue::Category(cell.to_string())
                }
            });
        }
        raw.push(values);
        labels.push(labels_match(record.get(label_col).unwrap_or(""), &schema.positive_label));
    }
    if raw.len() < 2 {
        return Err(DataError::TooFewRows(raw.len()));
    }

    let mut columns = Vec::with_capacity(schema.features.len());
    for (k, f) in schema.features.iter().enumerate() {
        columns.push(match f.kind {
            FeatureKind::Continuous => {
                let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
                for row in &raw {
                    if let FeatureValue::Number(v) = row[k] {
                        min = min.min(v);
                        max = max.max(v);
                    }
                }
                if min == max {
                    return Err(DataError::ConstantColumn(f.name.clone()));
                }
                ColumnEncoding::Continuous {
                    name: f.name.clone(),
                    min,
                    max,
                }
            }
            FeatureKind::Categorical => ColumnEncoding::Categorical {
                name: f.name.clone(),
                categories: f.categories.clone(),
            },
        });
    }
    let encoding = Encoding { columns };
    let rows = raw
        .iter()
        .map(|r| encoding.encode(r))
        .collect::<Result<Vec<_>, _>>()?;
    Dataset::new(name, rows, labels, encoding, split_seed)
}

/// Bounds of the synthetic sampling rectangle.
pub const SYNTHETIC_BOUNDS: [(f64, f64); 2] = [(-2.0, 4.0), (-2.0, 7.0)];

/// Favorable iff `x₂ ≥ 1 + x₁ + 2x₁² + x₁³ − x₁⁴`.
pub fn synthetic_label(x1: f64, x2: f64) -> bool {
    x2 >= 1.0 + x1 + 2.0 * x1.powi(2) + x1.powi(3) - x1.powi(4)
}

/// Two-feature synthetic dataset, uniform on the sampling rectangle and
/// scaled by the rectangle bounds.
pub fn gen_synthetic<R: Rng>(n: usize, rng: &mut R) -> Result<Dataset, DataError> {
    if n < 2 {
        return Err(DataError::TooFewRows(n));
    }
    let encoding = Encoding {
        columns: vec![
            ColumnEncoding::Continuous {
                name: "x1".into(),
                min: SYNTHETIC_BOUNDS[0].0,
                max: SYNTHETIC_BOUNDS[0].1,
            },
            ColumnEncoding::Continuous {
                name: "x2".into(),
                min: SYNTHETIC_BOUNDS[1].0,
                max: SYNTHETIC_BOUNDS[1].1,
            },
        ],
    };
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x1 = rng.random_range(SYNTHETIC_BOUNDS[0].0..SYNTHETIC_BOUNDS[0].1);
        let x2 = rng.random_range(SYNTHETIC_BOUNDS[1].0..SYNTHETIC_BOUNDS[1].1);
        labels.push(synthetic_label(x1, x2));
        let v = [encoding.scale(0, x1), encoding.scale(1, x2)];
        rows.push(FeatureVector::from_slice(&v).expect("finite"));
    }
    let split_seed = rng.random();
    Dataset::new("synthetic", rows, labels, encoding, split_seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::FeatureSpec;

    fn schema() -> DatasetSchema {
        DatasetSchema {
            name: "t".into(),
            features: vec![FeatureSpec::continuous("amount"), FeatureSpec::categorical("grade", &["A", "B", "C"])],
            label: "y".into(),
            positive_label: "1".into(),
        }
    }

    fn read(text: &str) -> Result<Dataset, DataError> {
        read_csv(csv::Reader::from_reader(text.as_bytes()), &schema(), "t", 0)
    }

    #[test]
    fn scales_and_encodes() {
        let ds = read("amount,grade,y\n10,A,0\n15,B,1\n20,C,1.0\n").unwrap();
        assert_eq!(ds.row(1).as_slice(), &[0.5, 0.0, 1.0, 0.0]);
        assert_eq!(ds.labels(), &[false, true, true]);
        assert_eq!(ds.train_indices().len() + ds.test_indices().len(), 3);
        assert_eq!(ds.encoding().one_hot_blocks(), vec![1..4]);
    }

    #[test]
    fn reports_bad_inputs() {
        assert!(matches!(read("amount,y\n1,0\n2,1\n"), Err(DataError::MissingColumn(c)) if c == "grade"));
        assert!(matches!(read("amount,grade,y\n1,A,0\n2,D,1\n"), Err(DataError::UnseenCategory { .. })));
        assert!(matches!(read("amount,grade,y\n1,A,0\nx,B,1\n"), Err(DataError::NonNumeric { row: 2, .. })));
        assert!(matches!(read("amount,grade,y\n3,A,0\n3,B,1\n"), Err(DataError::ConstantColumn(_))));
    }

    #[test]
    fn decode_inverts_encode() {
        let ds = read("amount,grade,y\n10,A,0\n15,B,1\n20,C,1\n").unwrap();
        let decoded = ds.encoding().decode(ds.row(1));
        assert_eq!(decoded[0].value, FeatureValue::Number(15.0));
        assert_eq!(decoded[1].value, FeatureValue::Category("B".into()));
    }

    #[test]
    fn synthetic_labels() {
        assert!(synthetic_label(0.0, 5.0));
        assert!(!synthetic_label(0.0, 0.0));
        assert!(!synthetic_label(1.0, 3.5));
    }

    #[test]
    fn split_is_disjoint_and_exhaustive() {
        let (train, test) = split(101, 9);
        assert_eq!(train.len(), 81);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..101).collect::<Vec<_>>());
    }
}
