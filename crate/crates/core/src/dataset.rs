//! Tabular data: CSV ingestion, the split and normalization protocol, and
//! small synthetic 2-D datasets.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{median_in_place, sq_dist, Points};
use crate::model::Class;
use crate::seed::rng_for;

/// Features plus one target per row. Classification targets are `±1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Points,
    pub targets: Vec<f64>,
    pub feature_names: Vec<String>,
}

/// How the target column becomes a label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Target {
    /// Exactly two distinct values; the larger one becomes `+1`.
    Labels,
    /// `+1` when the value is at least the median.
    Median,
    /// `+1` when the value is at least the given quantile.
    Quantile { p: f64 },
    /// Keep raw values.
    Regression,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub label_column: String,
    pub target: Target,
}

impl Schema {
    pub fn new(label_column: impl Into<String>, target: Target) -> Self {
        Self {
            label_column: label_column.into(),
            target,
        }
    }
}

impl Dataset {
    pub fn new(features: Points, targets: Vec<f64>, feature_names: Vec<String>) -> Result<Self> {
        if features.n_rows() != targets.len() {
            return Err(Error::InvalidParameter(format!(
                "{} rows but {} targets",
                features.n_rows(),
                targets.len()
            )));
        }
        check_dim(features.n_cols(), feature_names.len())?;
        Ok(Self {
            features,
            targets,
            feature_names,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.n_cols()
    }

    /// Targets as classes; fails unless every target is `±1`.
    pub fn labels(&self) -> Result<Vec<Class>> {
        self.targets.iter().map(|&t| Class::from_value(t)).collect()
    }

    pub fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(rows),
            targets: rows.iter().map(|&i| self.targets[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Header of feature names followed by `label`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = self.feature_names.clone();
        header.push("label".into());
        w.write_record(&header)?;
        for (row, t) in self.features.rows().zip(&self.targets) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(t.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(File::create(path)?)
    }

    /// Reads a file written by [`Dataset::save_csv`].
    pub fn load_split(path: impl AsRef<Path>) -> Result<Dataset> {
        load_csv(path, &Schema::new("label", Target::Regression))
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    parse_csv(File::open(path)?, schema)
}

/// Parses a header-first numeric CSV. Comma and semicolon separators are
/// both accepted.
pub fn parse_csv<R: Read>(mut input: R, schema: &Schema) -> Result<Dataset> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let header_line = text.lines().next().unwrap_or("");
    let delimiter = if header_line.contains(';') && !header_line.contains(',') {
        b';'
    } else {
        b','
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let label_idx = header
        .iter()
        .position(|h| *h == schema.label_column)
        .ok_or_else(|| Error::Parse {
            row: 0,
            column: schema.label_column.clone(),
            message: "label column not found in header".into(),
        })?;
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    if feature_names.is_empty() {
        return Err(Error::InvalidParameter("no feature columns".into()));
    }

    let mut data = Vec::new();
    let mut raw_targets = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::Parse {
                row,
                column: header.get(record.len()).cloned().unwrap_or_default(),
                message: format!("expected {} cells, found {}", header.len(), record.len()),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            let parse_err = |message: String| Error::Parse {
                row,
                column: header[c].clone(),
                message,
            };
            if cell.is_empty() {
                return Err(parse_err("missing value".into()));
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(format!("`{cell}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(format!("`{cell}` is not finite")));
            }
            if c == label_idx {
                raw_targets.push(v);
            } else {
                data.push(v);
            }
        }
    }
    if raw_targets.is_empty() {
        return Err(Error::EmptySplit("CSV has no data rows".into()));
    }
    let targets = binarize(&raw_targets, &schema.target)?;
    Dataset::new(Points::new(feature_names.len(), data)?, targets, feature_names)
}

/// Linear-interpolation quantile of unsorted values.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

fn binarize(values: &[f64], target: &Target) -> Result<Vec<f64>> {
    let threshold = match target {
        Target::Regression => return Ok(values.to_vec()),
        Target::Labels => {
            let mut distinct = values.to_vec();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            if distinct.len() > 2 {
                return Err(Error::InvalidParameter(format!(
                    "label column has {} distinct values, expected 2",
                    distinct.len()
                )));
            }
            *distinct.last().expect("nonempty")
        }
        Target::Median => quantile(values, 0.5),
        Target::Quantile { p } => {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::InvalidParameter(format!("quantile {p} outside [0, 1]")));
            }
            quantile(values, *p)
        }
    };
    let labels: Vec<f64> = values
        .iter()
        .map(|&v| if v >= threshold { 1.0 } else { -1.0 })
        .collect();
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::SingleClass(format!(
            "all {} rows map to the same label",
            labels.len()
        )));
    }
    Ok(labels)
}

/// Maps raw feature vectors into model space and back: constant features are
/// dropped, the rest standardized with training statistics and divided by a
/// common scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub input_names: Vec<String>,
    pub kept: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub scale: f64,
}

/// Standard deviations at or below this fraction of the feature's magnitude
/// mark a feature as constant.
const CONSTANT_TOLERANCE: f64 = 1e-12;

/// Pairwise distances are computed exactly up to this many points.
pub const MEDIAN_EXACT_LIMIT: usize = 2000;

impl Normalization {
    /// Fits on training data. `seed` only matters above
    /// [`MEDIAN_EXACT_LIMIT`] points.
    pub fn fit(train: &Dataset, seed: u64) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptySplit("training split".into()));
        }
        let mean = train.features.column_means();
        let std = train.features.column_stds();
        let kept: Vec<usize> = (0..train.dim())
            .filter(|&k| std[k] > CONSTANT_TOLERANCE * mean[k].abs().max(1.0))
            .collect();
        if kept.is_empty() {
            return Err(Error::InvalidParameter("every feature is constant".into()));
        }
        let mut norm = Self {
            input_names: train.feature_names.clone(),
            kept,
            mean,
            std,
            scale: 1.0,
        };
        let standardized = norm.apply_points(&train.features)?;
        let median = median_pairwise_distance(&standardized, seed);
        if !(median > 0.0) {
            return Err(Error::InvalidParameter(
                "median pairwise training distance is zero".into(),
            ));
        }
        norm.scale = median;
        Ok(norm)
    }

    pub fn output_names(&self) -> Vec<String> {
        self.kept.iter().map(|&k| self.input_names[k].clone()).collect()
    }

    pub fn dropped(&self) -> Vec<String> {
        (0..self.input_names.len())
            .filter(|k| !self.kept.contains(k))
            .map(|k| self.input_names[k].clone())
            .collect()
    }

    pub fn apply(&self, raw: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_names.len(), raw.len())?;
        Ok(self
            .kept
            .iter()
            .map(|&k| (raw[k] - self.mean[k]) / self.std[k] / self.scale)
            .collect())
    }

    /// Back to raw units. Dropped features come back as their training value.
    pub fn invert(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.kept.len(), z.len())?;
        let mut raw = self.mean.clone();
        for (&k, v) in self.kept.iter().zip(z) {
            raw[k] = v * self.scale * self.std[k] + self.mean[k];
        }
        Ok(raw)
    }

    pub fn apply_points(&self, raw: &Points) -> Result<Points> {
        check_dim(self.input_names.len(), raw.n_cols())?;
        let mut data = Vec::with_capacity(raw.n_rows() * self.kept.len());
        for r in raw.rows() {
            data.extend(self.apply(r)?);
        }
        Points::new(self.kept.len(), data)
    }

    pub fn apply_dataset(&self, raw: &Dataset) -> Result<Dataset> {
        Dataset::new(
            self.apply_points(&raw.features)?,
            raw.targets.clone(),
            self.output_names(),
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_reader(File::open(path)?)?)
    }
}

/// Median Euclidean distance over distinct pairs; a seeded subsample of
/// [`MEDIAN_EXACT_LIMIT`] points stands in for larger inputs.
pub fn median_pairwise_distance(points: &Points, seed: u64) -> f64 {
    let sample;
    let pts = if points.n_rows() > MEDIAN_EXACT_LIMIT {
        let mut rng = rng_for(seed, &[0x4D454449]);
        let mut idx = index::sample(&mut rng, points.n_rows(), MEDIAN_EXACT_LIMIT).into_vec();
        idx.sort_unstable();
        sample = points.select(&idx);
        &sample
    } else {
        points
    };
    let n = pts.n_rows();
    let mut dists: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let a = pts.row(i);
            (i + 1..n).map(move |j| sq_dist(a, pts.row(j)).sqrt())
        })
        .collect();
    median_in_place(&mut dists)
}

/// Normalized splits. The explanation rows are the leading rows of the
/// validation split.
#[derive(Clone, Debug, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub validation: Dataset,
    pub explain: Dataset,
    pub normalization: Normalization,
}

pub const MAX_EXPLAIN: usize = 300;
pub const VALIDATION_FRACTION: f64 = 0.2;

/// Shuffles, holds out 20% for validation, fits the normalization on the rest
/// and applies it to every split.
pub fn preprocess(data: &Dataset, seed: u64) -> Result<Splits> {
    let n = data.len();
    let n_val = (VALIDATION_FRACTION * n as f64).round() as usize;
    if n_val == 0 || n_val >= n {
        return Err(Error::EmptySplit(format!(
            "{n} rows leave no validation or training data"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for(seed, &[0x53485546]));
    let (val_idx, train_idx) = order.split_at(n_val);
    let raw_train = data.select(train_idx);
    let raw_val = data.select(val_idx);
    let normalization = Normalization::fit(&raw_train, seed)?;
    let train = normalization.apply_dataset(&raw_train)?;
    let validation = normalization.apply_dataset(&raw_val)?;
    let n_explain = MAX_EXPLAIN.min(n_val);
    let explain = validation.select(&(0..n_explain).collect::<Vec<_>>());
    Ok(Splits {
        train,
        validation,
        explain,
        normalization,
    })
}

fn check_synthetic(n: usize, noise: f64) -> Result<()> {
    if n < 4 {
        return Err(Error::InvalidParameter(format!("synthetic data needs n ≥ 4, got {n}")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise must be ≥ 0, got {noise}")));
    }
    Ok(())
}

fn xy_names() -> Vec<String> {
    vec!["x1".into(), "x2".into()]
}

/// Two interleaved half circles; the upper moon is `+1`.
pub fn synthetic_two_moons(seed: u64, n: usize, noise: f64) -> Result<Dataset> {
    check_synthetic(n, noise)?;
    let mut rng = rng_for(seed, &[0x4D4F4F4E]);
    let n_upper = n.div_ceil(2);
    let n_lower = n - n_upper;
    let mut rows = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for i in 0..n_upper {
        let t = std::f64::consts::PI * i as f64 / (n_upper - 1).max(1) as f64;
        rows.push(vec![t.cos(), t.sin()]);
        targets.push(1.0);
    }
    for i in 0..n_lower {
        let t = std::f64::consts::PI * i as f64 / (n_lower - 1).max(1) as f64;
        rows.push(vec![1.0 - t.cos(), 0.5 - t.sin()]);
        targets.push(-1.0);
    }
    for r in &mut rows {
        for v in r.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += noise * z;
        }
    }
    Dataset::new(Points::from_rows(&rows)?, targets, xy_names())
}

/// Points cycled over the corners `(1,1), (1,−1), (−1,1), (−1,−1)`, labelled
/// by the sign of the coordinate product.
pub fn synthetic_xor(seed: u64, n: usize, noise: f64) -> Result<Dataset> {
    check_synthetic(n, noise)?;
    const CORNERS: [[f64; 2]; 4] = [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]];
    let mut rng = rng_for(seed, &[0x584F52]);
    let mut rows = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for i in 0..n {
        let c = CORNERS[i % 4];
        let row: Vec<f64> = c
            .iter()
            .map(|v| {
                let z: f64 = rng.sample(StandardNormal);
                v + noise * z
            })
            .collect();
        rows.push(row);
        targets.push(c[0] * c[1]);
    }
    Dataset::new(Points::from_rows(&rows)?, targets, xy_names())
}

/// Two blobs centred on `(±(1 + 3·noise), 0)` with offsets truncated at three
/// standard deviations, so the classes are always split by `x1 = 0`.
pub fn synthetic_gaussians(seed: u64, n: usize, noise: f64) -> Result<Dataset> {
    check_synthetic(n, noise)?;
    let mut rng = rng_for(seed, &[0x47415553]);
    let offset = 1.0 + 3.0 * noise;
    let mut rows = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for i in 0..n {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let mut draw = || {
            let z: f64 = rng.sample(StandardNormal);
            noise * z.clamp(-3.0, 3.0)
        };
        rows.push(vec![sign * offset + draw(), draw()]);
        targets.push(sign);
    }
    Dataset::new(Points::from_rows(&rows)?, targets, xy_names())
}
