//! Dataset representation, synthetic data generation, CSV ingestion, and
//! train/validation/test splitting.
//!
//! All types are immutable after construction. Labels live in {-1, +1} with
//! +1 the favorable outcome, and the sensitive attribute is carried as a
//! per-sample [`GroupTag`], never as a feature column.

use std::fmt;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// Sensitive-attribute tag of a sample.
///
/// `None` is permitted only for synthetic poison points, which are excluded
/// from fairness metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupTag {
    Privileged,
    Unprivileged,
    None,
}

impl fmt::Display for GroupTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupTag::Privileged => write!(f, "privileged"),
            GroupTag::Unprivileged => write!(f, "unprivileged"),
            GroupTag::None => write!(f, "none"),
        }
    }
}

/// An immutable dataset: an n-by-d feature matrix, labels in {-1, +1}, and a
/// group tag per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    features: Array2<f64>,
    labels: Array1<f64>,
    groups: Vec<GroupTag>,
    feature_names: Vec<String>,
}

impl SampleSet {
    /// Build a dataset, validating every invariant: n >= 1, d >= 1, finite
    /// features, labels in {-1, +1}, matching lengths.
    pub fn new(
        features: Array2<f64>,
        labels: Array1<f64>,
        groups: Vec<GroupTag>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = features.nrows();
        let d = features.ncols();
        if n < 1 {
            return Err(Error::InvalidData("dataset must contain at least one sample".into()));
        }
        if d < 1 {
            return Err(Error::InvalidData("dataset must have at least one feature".into()));
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: labels.len() });
        }
        if groups.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: groups.len() });
        }
        if feature_names.len() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: feature_names.len() });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("features contain non-finite values".into()));
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::InvalidData("labels must be -1 or +1".into()));
        }
        Ok(Self { features, labels, groups, feature_names })
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &Array1<f64> {
        &self.labels
    }

    pub fn groups(&self) -> &[GroupTag] {
        &self.groups
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Subset by row indices. The result may be empty (used by group
    /// partitions and cross-validation folds); all other constructors
    /// guarantee n >= 1.
    pub fn select(&self, indices: &[usize]) -> SampleSet {
        let d = self.dim();
        let mut features = Array2::<f64>::zeros((indices.len(), d));
        let mut labels = Array1::<f64>::zeros(indices.len());
        let mut groups = Vec::with_capacity(indices.len());
        for (row, &i) in indices.iter().enumerate() {
            features.row_mut(row).assign(&self.features.row(i));
            labels[row] = self.labels[i];
            groups.push(self.groups[i]);
        }
        SampleSet { features, labels, groups, feature_names: self.feature_names.clone() }
    }

    /// Append extra rows, typically poison points. Extra rows must share the
    /// feature dimension.
    pub fn with_appended(
        &self,
        features: &Array2<f64>,
        labels: &Array1<f64>,
        groups: &[GroupTag],
    ) -> Result<SampleSet> {
        if features.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: features.ncols() });
        }
        let extra = features.nrows();
        if labels.len() != extra || groups.len() != extra {
            return Err(Error::DimensionMismatch { expected: extra, actual: labels.len() });
        }
        let n = self.n() + extra;
        let mut f = Array2::<f64>::zeros((n, self.dim()));
        let mut y = Array1::<f64>::zeros(n);
        let mut g = Vec::with_capacity(n);
        for i in 0..self.n() {
            f.row_mut(i).assign(&self.features.row(i));
            y[i] = self.labels[i];
            g.push(self.groups[i]);
        }
        for i in 0..extra {
            f.row_mut(self.n() + i).assign(&features.row(i));
            y[self.n() + i] = labels[i];
            g.push(groups[i]);
        }
        SampleSet::new(f, y, g, self.feature_names.clone())
    }

    /// Per-feature (min, max) over all samples.
    pub fn feature_bounds(&self) -> (Array1<f64>, Array1<f64>) {
        let d = self.dim();
        let mut lo = Array1::from_elem(d, f64::INFINITY);
        let mut hi = Array1::from_elem(d, f64::NEG_INFINITY);
        for row in self.features.rows() {
            for j in 0..d {
                lo[j] = lo[j].min(row[j]);
                hi[j] = hi[j].max(row[j]);
            }
        }
        (lo, hi)
    }

    /// Per-feature mean and (population) standard deviation. Standard
    /// deviations are floored at 1e-12 so constant features stay usable.
    pub fn feature_mean_std(&self) -> (Array1<f64>, Array1<f64>) {
        let n = self.n() as f64;
        let d = self.dim();
        let mut mean = Array1::<f64>::zeros(d);
        for row in self.features.rows() {
            for j in 0..d {
                mean[j] += row[j];
            }
        }
        mean.mapv_inplace(|v| v / n);
        let mut var = Array1::<f64>::zeros(d);
        for row in self.features.rows() {
            for j in 0..d {
                let c = row[j] - mean[j];
                var[j] += c * c;
            }
        }
        let std = var.mapv(|v| (v / n).sqrt().max(1e-12));
        (mean, std)
    }

    /// True when both labels occur.
    pub fn has_both_classes(&self) -> bool {
        let mut pos = false;
        let mut neg = false;
        for &y in self.labels.iter() {
            if y > 0.0 {
                pos = true;
            } else {
                neg = true;
            }
        }
        pos && neg
    }
}

/// Train/validation/test partition of a dataset.
#[derive(Debug, Clone)]
pub struct DataSplit {
    pub train: SampleSet,
    pub validation: SampleSet,
    pub test: SampleSet,
}

/// Default group-assignment rotation of the synthetic generator. The angle
/// sets how strongly group membership tracks the class: at 0 the two
/// coincide up to sampling noise, at a right angle they are independent.
/// This value keeps the clean model's group disparity moderate and growing
/// with the separation.
pub const DEFAULT_ROTATION: f64 = 0.55 * std::f64::consts::PI;

/// Configuration of the two-Gaussian synthetic generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_samples: usize,
    /// Euclidean distance S between the two class centroids.
    pub separation: f64,
    /// Rotation angle applied to features before the group assignment, in
    /// radians; see [`DEFAULT_ROTATION`].
    pub rotation: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn new(n_samples: usize, separation: f64, seed: u64) -> Self {
        Self { n_samples, separation, rotation: DEFAULT_ROTATION, seed }
    }

    fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n_samples < 4 {
            problems.push(format!("n_samples must be >= 4, got {}", self.n_samples));
        }
        if !self.separation.is_finite() || self.separation < 0.0 {
            problems.push(format!("separation must be >= 0, got {}", self.separation));
        }
        if !self.rotation.is_finite() {
            problems.push("rotation must be finite".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems.join("; ")))
        }
    }
}

// Seed stream so the shuffle inside `split` never aliases other consumers
// of the same user-facing seed.
const STREAM_SPLIT: u64 = 0x53504c49;

const POS_MEAN: [f64; 2] = [2.0, 2.0];
const POS_COV: [[f64; 2]; 2] = [[5.0, 1.0], [1.0, 5.0]];
const NEG_COV: [[f64; 2]; 2] = [[10.0, 1.0], [1.0, 3.0]];

fn chol2(c: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let l11 = c[0][0].sqrt();
    let l21 = c[0][1] / l11;
    let l22 = (c[1][1] - l21 * l21).sqrt();
    [[l11, 0.0], [l21, l22]]
}

fn gaussian2_pdf(x: [f64; 2], mean: [f64; 2], cov: [[f64; 2]; 2]) -> f64 {
    let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    let inv = [
        [cov[1][1] / det, -cov[0][1] / det],
        [-cov[1][0] / det, cov[0][0] / det],
    ];
    let dx = [x[0] - mean[0], x[1] - mean[1]];
    let q = dx[0] * (inv[0][0] * dx[0] + inv[0][1] * dx[1])
        + dx[1] * (inv[1][0] * dx[0] + inv[1][1] * dx[1]);
    (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
}

/// Generate a two-dimensional two-Gaussian dataset.
///
/// Labels are uniform at random. Class +1 features come from
/// N([2,2], [5,1;1,5]); class -1 features from N(mu, [10,1;1,3]) with mu
/// placed diagonally below [2,2] so the centroid distance equals
/// `separation` exactly. The group tag is drawn from a Bernoulli whose
/// success probability is the class-+1 posterior evaluated at the rotated
/// feature vector; success maps to `Privileged`. Deterministic given the
/// seed.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<SampleSet> {
    config.validate()?;
    let n = config.n_samples;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let shift = config.separation / std::f64::consts::SQRT_2;
    let neg_mean = [POS_MEAN[0] - shift, POS_MEAN[1] - shift];
    let l_pos = chol2(POS_COV);
    let l_neg = chol2(NEG_COV);
    let (sin, cos) = config.rotation.sin_cos();

    let mut features = Array2::<f64>::zeros((n, 2));
    let mut labels = Array1::<f64>::zeros(n);
    let mut groups = Vec::with_capacity(n);
    for i in 0..n {
        let positive = rng.random_bool(0.5);
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        let (mean, l) = if positive { (POS_MEAN, l_pos) } else { (neg_mean, l_neg) };
        let x = [
            mean[0] + l[0][0] * z0,
            mean[1] + l[1][0] * z0 + l[1][1] * z1,
        ];
        // Group tag from the rotated point's class posterior.
        let xr = [cos * x[0] - sin * x[1], sin * x[0] + cos * x[1]];
        let p_pos = gaussian2_pdf(xr, POS_MEAN, POS_COV);
        let p_neg = gaussian2_pdf(xr, neg_mean, NEG_COV);
        let p_priv = p_pos / (p_pos + p_neg);
        let u: f64 = rng.random();
        features[[i, 0]] = x[0];
        features[[i, 1]] = x[1];
        labels[i] = if positive { 1.0 } else { -1.0 };
        groups.push(if u < p_priv { GroupTag::Privileged } else { GroupTag::Unprivileged });
    }
    SampleSet::new(features, labels, groups, vec!["x1".into(), "x2".into()])
}

/// Load a dataset from a CSV file with a header row.
///
/// Every column other than `label_column` and `sensitive_column` is parsed
/// as a numeric feature. Labels map to +1 iff the cell equals
/// `favorable_value`; groups map to `Privileged` iff the sensitive cell
/// equals `privileged_value`, to `None` for the literal cell `none`
/// (poison-point exports), and to `Unprivileged` otherwise.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: &str,
    sensitive_column: &str,
    favorable_value: &str,
    privileged_value: &str,
) -> Result<SampleSet> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    if label_column == sensitive_column {
        return Err(Error::InvalidConfig(
            "label column and sensitive column must differ".into(),
        ));
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let find = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn {
            path: path_str.clone(),
            column: name.to_string(),
        })
    };
    let label_idx = find(label_column)?;
    let sensitive_idx = find(sensitive_column)?;
    let feature_idx: Vec<usize> =
        (0..headers.len()).filter(|&i| i != label_idx && i != sensitive_idx).collect();
    if feature_idx.is_empty() {
        return Err(Error::InvalidData(format!("{path_str}: no feature columns")));
    }
    let feature_names: Vec<String> = feature_idx.iter().map(|&i| headers[i].clone()).collect();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    let mut groups: Vec<GroupTag> = Vec::new();
    for (row_num, record) in reader.records().enumerate() {
        let record = record?;
        let row = row_num + 1;
        let cell = |i: usize| record.get(i).unwrap_or("").trim();
        let mut feats = Vec::with_capacity(feature_idx.len());
        for &i in &feature_idx {
            let raw = cell(i);
            let value: f64 = raw.parse().map_err(|_| Error::NonNumericCell {
                path: path_str.clone(),
                row,
                column: headers[i].clone(),
                value: raw.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::NonNumericCell {
                    path: path_str.clone(),
                    row,
                    column: headers[i].clone(),
                    value: raw.to_string(),
                });
            }
            feats.push(value);
        }
        labels.push(if cell(label_idx) == favorable_value { 1.0 } else { -1.0 });
        let s = cell(sensitive_idx);
        groups.push(if s == privileged_value {
            GroupTag::Privileged
        } else if s.eq_ignore_ascii_case("none") {
            GroupTag::None
        } else {
            GroupTag::Unprivileged
        });
        rows.push(feats);
    }
    if rows.is_empty() {
        return Err(Error::EmptyFile { path: path_str });
    }
    let d = feature_idx.len();
    let mut features = Array2::<f64>::zeros((rows.len(), d));
    for (i, feats) in rows.iter().enumerate() {
        for (j, &v) in feats.iter().enumerate() {
            features[[i, j]] = v;
        }
    }
    SampleSet::new(features, Array1::from_vec(labels), groups, feature_names)
}

/// Write a dataset in the canonical CSV layout: feature columns, then
/// `label` (+1/-1) and `group` (privileged/unprivileged/none).
pub fn write_csv(set: &SampleSet, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = set.feature_names().to_vec();
    header.push("label".into());
    header.push("group".into());
    writer.write_record(&header)?;
    for i in 0..set.n() {
        let mut record: Vec<String> =
            set.features().row(i).iter().map(|v| format!("{v}")).collect();
        record.push(format!("{}", set.labels()[i] as i64));
        record.push(set.groups()[i].to_string());
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Shuffle by seed and partition into train/validation/test parts whose
/// sizes are the rounded fractions of n.
pub fn split(data: &SampleSet, fractions: (f64, f64, f64), seed: u64) -> Result<DataSplit> {
    let (ft, fv, fe) = fractions;
    if ft <= 0.0 || fv <= 0.0 || fe <= 0.0 {
        return Err(Error::InvalidConfig("split fractions must be positive".into()));
    }
    if (ft + fv + fe - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "split fractions must sum to 1, got {}",
            ft + fv + fe
        )));
    }
    let n = data.n();
    let n_train = (n as f64 * ft).round() as usize;
    let n_val = (n as f64 * fv).round() as usize;
    if n_train == 0 || n_val == 0 || n_train + n_val >= n {
        return Err(Error::InvalidData(format!(
            "split of {n} samples at ({ft}, {fv}, {fe}) leaves an empty part"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_SPLIT));
    use rand::seq::SliceRandom;
    indices.shuffle(&mut rng);
    Ok(DataSplit {
        train: data.select(&indices[..n_train]),
        validation: data.select(&indices[n_train..n_train + n_val]),
        test: data.select(&indices[n_train + n_val..]),
    })
}

/// Partition by group tag, preserving order: (unprivileged, privileged).
/// Either part may be empty; a `None` tag is an error.
pub fn partition_by_group(data: &SampleSet) -> Result<(SampleSet, SampleSet)> {
    let mut unpriv = Vec::new();
    let mut privl = Vec::new();
    for (i, tag) in data.groups().iter().enumerate() {
        match tag {
            GroupTag::Unprivileged => unpriv.push(i),
            GroupTag::Privileged => privl.push(i),
            GroupTag::None => return Err(Error::UngroupedSample { index: i }),
        }
    }
    Ok((data.select(&unpriv), data.select(&privl)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::io::Write;

    fn cfg(n: usize, s: f64, seed: u64) -> SyntheticConfig {
        SyntheticConfig::new(n, s, seed)
    }

    #[test]
    fn generates_requested_shape() {
        let set = generate_synthetic(&cfg(2000, 3.0, 7)).unwrap();
        assert_eq!(set.n(), 2000);
        assert_eq!(set.dim(), 2);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_synthetic(&cfg(500, 4.0, 99)).unwrap();
        let b = generate_synthetic(&cfg(500, 4.0, 99)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_tiny_n() {
        assert!(matches!(generate_synthetic(&cfg(3, 1.0, 0)), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn class_conditional_moments_match_generator() {
        let set = generate_synthetic(&cfg(100_000, 5.0, 11)).unwrap();
        let pos: Vec<usize> =
            (0..set.n()).filter(|&i| set.labels()[i] > 0.0).collect();
        let neg: Vec<usize> =
            (0..set.n()).filter(|&i| set.labels()[i] < 0.0).collect();

        let mean_of = |idx: &[usize]| {
            let mut m = [0.0f64; 2];
            for &i in idx {
                m[0] += set.features()[[i, 0]];
                m[1] += set.features()[[i, 1]];
            }
            [m[0] / idx.len() as f64, m[1] / idx.len() as f64]
        };
        let cov_of = |idx: &[usize], m: [f64; 2]| {
            let mut c = [[0.0f64; 2]; 2];
            for &i in idx {
                let dx = [set.features()[[i, 0]] - m[0], set.features()[[i, 1]] - m[1]];
                for a in 0..2 {
                    for b in 0..2 {
                        c[a][b] += dx[a] * dx[b];
                    }
                }
            }
            for a in 0..2 {
                for b in 0..2 {
                    c[a][b] /= idx.len() as f64;
                }
            }
            c
        };

        let m_pos = mean_of(&pos);
        assert_abs_diff_eq!(m_pos[0], 2.0, epsilon = 0.05);
        assert_abs_diff_eq!(m_pos[1], 2.0, epsilon = 0.05);
        let shift = 5.0 / std::f64::consts::SQRT_2;
        let m_neg = mean_of(&neg);
        assert_abs_diff_eq!(m_neg[0], 2.0 - shift, epsilon = 0.05);
        assert_abs_diff_eq!(m_neg[1], 2.0 - shift, epsilon = 0.05);

        let frob = |c: [[f64; 2]; 2], t: [[f64; 2]; 2]| {
            let mut s = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    s += (c[a][b] - t[a][b]).powi(2);
                }
            }
            s.sqrt()
        };
        assert!(frob(cov_of(&pos, m_pos), POS_COV) < 0.5);
        assert!(frob(cov_of(&neg, m_neg), NEG_COV) < 0.5);
    }

    #[test]
    fn zero_separation_centroids_coincide() {
        let set = generate_synthetic(&cfg(100_000, 0.0, 3)).unwrap();
        let mut m_pos = [0.0f64; 2];
        let mut m_neg = [0.0f64; 2];
        let (mut np, mut nn) = (0usize, 0usize);
        for i in 0..set.n() {
            if set.labels()[i] > 0.0 {
                m_pos[0] += set.features()[[i, 0]];
                m_pos[1] += set.features()[[i, 1]];
                np += 1;
            } else {
                m_neg[0] += set.features()[[i, 0]];
                m_neg[1] += set.features()[[i, 1]];
                nn += 1;
            }
        }
        let dx = m_pos[0] / np as f64 - m_neg[0] / nn as f64;
        let dy = m_pos[1] / np as f64 - m_neg[1] / nn as f64;
        assert!((dx * dx + dy * dy).sqrt() < 0.1);
    }

    #[test]
    fn both_groups_present_across_separations() {
        for s in 0..10 {
            let set = generate_synthetic(&cfg(2000, s as f64, 21)).unwrap();
            let priv_count =
                set.groups().iter().filter(|g| **g == GroupTag::Privileged).count();
            assert!(priv_count > 0 && priv_count < set.n(), "degenerate groups at S={s}");
        }
    }

    #[test]
    fn split_sizes_match_fractions() {
        let set = generate_synthetic(&cfg(2000, 2.0, 5)).unwrap();
        let parts = split(&set, (0.5, 0.3, 0.2), 17).unwrap();
        assert_eq!(parts.train.n(), 1000);
        assert_eq!(parts.validation.n(), 600);
        assert_eq!(parts.test.n(), 400);
    }

    #[test]
    fn split_small_exact() {
        let set = generate_synthetic(&cfg(10, 1.0, 5)).unwrap();
        let parts = split(&set, (0.5, 0.3, 0.2), 17).unwrap();
        assert_eq!((parts.train.n(), parts.validation.n(), parts.test.n()), (5, 3, 2));
    }

    #[test]
    fn split_is_deterministic_and_exhaustive() {
        let set = generate_synthetic(&cfg(101, 1.0, 2)).unwrap();
        let a = split(&set, (0.5, 0.3, 0.2), 9).unwrap();
        let b = split(&set, (0.5, 0.3, 0.2), 9).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.validation, b.validation);
        assert_eq!(a.test, b.test);

        // Disjoint and exhaustive: the multiset of rows equals the input.
        let mut rows: Vec<Vec<u64>> = Vec::new();
        for part in [&a.train, &a.validation, &a.test] {
            for i in 0..part.n() {
                let mut row: Vec<u64> =
                    part.features().row(i).iter().map(|v| v.to_bits()).collect();
                row.push(part.labels()[i].to_bits());
                rows.push(row);
            }
        }
        let mut original: Vec<Vec<u64>> = (0..set.n())
            .map(|i| {
                let mut row: Vec<u64> =
                    set.features().row(i).iter().map(|v| v.to_bits()).collect();
                row.push(set.labels()[i].to_bits());
                row
            })
            .collect();
        rows.sort();
        original.sort();
        assert_eq!(rows, original);
    }

    #[test]
    fn split_rejects_empty_part() {
        let set = generate_synthetic(&cfg(5, 1.0, 5)).unwrap();
        assert!(split(&set, (0.5, 0.3, 0.2), 1).is_err());
    }

    #[test]
    fn split_rejects_bad_fractions() {
        let set = generate_synthetic(&cfg(100, 1.0, 5)).unwrap();
        assert!(split(&set, (0.5, 0.3, 0.3), 1).is_err());
        assert!(split(&set, (0.5, 0.5, 0.0), 1).is_err());
    }

    fn write_temp_csv(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn csv_label_and_group_mapping() {
        let f = write_temp_csv("a,b,outcome,sex\n1,2,yes,m\n3,4,yes,f\n5,6,no,m\n7,8,no,f\n");
        let set = load_csv(f.path(), "outcome", "sex", "yes", "m").unwrap();
        assert_eq!(set.n(), 4);
        assert_eq!(set.dim(), 2);
        assert_eq!(set.labels().to_vec(), vec![1.0, 1.0, -1.0, -1.0]);
        assert_eq!(
            set.groups(),
            &[
                GroupTag::Privileged,
                GroupTag::Unprivileged,
                GroupTag::Privileged,
                GroupTag::Unprivileged
            ]
        );
        assert_eq!(set.feature_names(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn csv_missing_column_is_reported() {
        let f = write_temp_csv("a,b,outcome\n1,2,yes\n");
        let err = load_csv(f.path(), "outcome", "sex", "yes", "m").unwrap_err();
        match err {
            Error::MissingColumn { column, .. } => assert_eq!(column, "sex"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn csv_non_numeric_cell_is_located() {
        let f = write_temp_csv("a,b,outcome,sex\n1,2,yes,m\n3,oops,no,f\n");
        let err = load_csv(f.path(), "outcome", "sex", "yes", "m").unwrap_err();
        match err {
            Error::NonNumericCell { row, column, value, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "b");
                assert_eq!(value, "oops");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn csv_empty_file_is_rejected() {
        let f = write_temp_csv("a,b,outcome,sex\n");
        assert!(matches!(
            load_csv(f.path(), "outcome", "sex", "yes", "m"),
            Err(Error::EmptyFile { .. })
        ));
    }

    #[test]
    fn csv_compas_scale_row_count() {
        let mut contents = String::from("f1,f2,f3,two_year_recid,race\n");
        for i in 0..6167 {
            contents.push_str(&format!("{},{},{},{},{}\n", i % 9, i % 5, i % 3, i % 2, i % 2));
        }
        let f = write_temp_csv(&contents);
        let set = load_csv(f.path(), "two_year_recid", "race", "0", "1").unwrap();
        assert_eq!(set.n(), 6167);
        assert_eq!(set.dim(), 3);
    }

    #[test]
    fn csv_roundtrip_preserves_values() {
        let set = generate_synthetic(&cfg(50, 2.5, 13)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.csv");
        write_csv(&set, &path).unwrap();
        let back = load_csv(&path, "label", "group", "1", "privileged").unwrap();
        assert_eq!(set, back);
    }

    #[test]
    fn partition_counts_and_order() {
        let features = Array2::from_shape_vec((5, 1), vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let labels = Array1::from_vec(vec![1.0, -1.0, 1.0, -1.0, 1.0]);
        let groups = vec![
            GroupTag::Unprivileged,
            GroupTag::Privileged,
            GroupTag::Unprivileged,
            GroupTag::Privileged,
            GroupTag::Unprivileged,
        ];
        let set = SampleSet::new(features, labels, groups, vec!["f".into()]).unwrap();
        let (u, p) = partition_by_group(&set).unwrap();
        assert_eq!(u.n(), 3);
        assert_eq!(p.n(), 2);
        assert_eq!(u.features().column(0).to_vec(), vec![1.0, 3.0, 5.0]);
        assert_eq!(p.features().column(0).to_vec(), vec![2.0, 4.0]);
    }

    #[test]
    fn partition_allows_empty_side() {
        let features = Array2::from_shape_vec((2, 1), vec![1.0, 2.0]).unwrap();
        let labels = Array1::from_vec(vec![1.0, -1.0]);
        let set = SampleSet::new(
            features,
            labels,
            vec![GroupTag::Privileged, GroupTag::Privileged],
            vec!["f".into()],
        )
        .unwrap();
        let (u, p) = partition_by_group(&set).unwrap();
        assert_eq!(u.n(), 0);
        assert_eq!(p.n(), 2);
    }

    #[test]
    fn partition_rejects_none_tag() {
        let features = Array2::from_shape_vec((2, 1), vec![1.0, 2.0]).unwrap();
        let labels = Array1::from_vec(vec![1.0, -1.0]);
        let set = SampleSet::new(
            features,
            labels,
            vec![GroupTag::Privileged, GroupTag::None],
            vec!["f".into()],
        )
        .unwrap();
        assert!(matches!(partition_by_group(&set), Err(Error::UngroupedSample { index: 1 })));
    }

    #[test]
    fn sampleset_rejects_bad_labels() {
        let features = Array2::from_shape_vec((1, 1), vec![1.0]).unwrap();
        let labels = Array1::from_vec(vec![0.5]);
        assert!(SampleSet::new(features, labels, vec![GroupTag::None], vec!["f".into()]).is_err());
    }

    #[test]
    fn sampleset_rejects_non_finite() {
        let features = Array2::from_shape_vec((1, 1), vec![f64::NAN]).unwrap();
        let labels = Array1::from_vec(vec![1.0]);
        assert!(SampleSet::new(features, labels, vec![GroupTag::None], vec!["f".into()]).is_err());
    }
}
