//! Loading, normalization, clipping and synthesis of the protected data.
//!
//! Loaders scale raw bytes into `[0, 1]` and flatten each record into one row.
//! Clipping onto an L2 ball is the last step before any mechanism runs; it is
//! what bounds the sensitivity the Gaussian calibration relies on.

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayViewMut1, Axis};
use rand::seq::index;

use crate::error::{Error, Result};
use crate::rng::{self, standard_normal};
use crate::scalar::Real;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
const CIFAR_RECORD: usize = 1 + 3072;
const CIFAR_CLASSES: usize = 10;

/// Feature matrix with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset<F> {
    pub name: String,
    pub features: Array2<F>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl<F: Real> RawDataset<F> {
    /// Validates shape, label range and the `[0, 1]` feature range.
    pub fn new(
        name: impl Into<String>,
        features: Array2<F>,
        labels: Vec<usize>,
        classes: usize,
    ) -> Result<Self> {
        let (n, d) = features.dim();
        if n == 0 || d == 0 {
            return Err(Error::InvalidDataset(format!("empty feature matrix {n}x{d}")));
        }
        if labels.len() != n {
            return Err(Error::CountMismatch {
                images: n,
                labels: labels.len(),
            });
        }
        if classes < 2 {
            return Err(Error::InvalidDataset(format!("need at least 2 classes, got {classes}")));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::InvalidDataset(format!("label {bad} out of range [0, {classes})")));
        }
        if let Some(v) = features
            .iter()
            .find(|v| !v.is_finite() || **v < F::zero() || **v > F::one())
        {
            return Err(Error::InvalidDataset(format!("feature value {v} outside [0, 1]")));
        }
        Ok(Self {
            name: name.into(),
            features,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Rows `idx` in the given order.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            name: self.name.clone(),
            features: self.features.select(Axis(0), idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        }
    }

    /// Copy with every row projected onto the L2 ball of `cfg.radius`.
    pub fn clipped(&self, cfg: ClipConfig<F>) -> Self {
        let mut out = self.clone();
        clip_l2(&mut out.features, cfg);
        out
    }
}

/// Radius of the L2 ball rows are projected onto. Doubles as the L2
/// sensitivity of the Gaussian mechanism.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipConfig<F> {
    radius: F,
}

impl<F: Real> ClipConfig<F> {
    pub fn new(radius: F) -> Result<Self> {
        if !(radius > F::zero()) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!("clip radius must be positive, got {radius}")));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> F {
        self.radius
    }
}

pub fn l2_norm<F: Real>(row: ArrayView1<'_, F>) -> F {
    row.iter().map(|&v| v * v).sum::<F>().sqrt()
}

fn clip_row<F: Real>(mut row: ArrayViewMut1<'_, F>, radius: F) {
    let norm = l2_norm(row.view());
    if norm > radius {
        let scale = radius / norm;
        row.mapv_inplace(|v| v * scale);
        // Rounding can leave the computed norm an ulp above the radius; shrink
        // until it is not, so the bound holds as computed and clipping is idempotent.
        let shrink = F::one() - F::epsilon();
        while l2_norm(row.view()) > radius {
            row.mapv_inplace(|v| v * shrink);
        }
    }
}

/// Rescales every row with norm above the radius to `x * C / ||x||`; rows
/// already inside the ball are left untouched.
pub fn clip_l2<F: Real>(x: &mut Array2<F>, cfg: ClipConfig<F>) {
    for row in x.rows_mut() {
        clip_row(row, cfg.radius);
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Malformed(format!("header truncated at byte {offset}")))
}

fn classes_from_labels(labels: &[usize]) -> usize {
    labels.iter().copied().max().map_or(0, |m| m + 1).max(2)
}

/// Parses an IDX image/label pair (MNIST distribution format).
pub fn parse_idx<F: Real>(name: &str, images: &[u8], labels: &[u8]) -> Result<RawDataset<F>> {
    let magic = be_u32(images, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::BadMagic {
            expected: IDX_IMAGES_MAGIC,
            found: magic,
        });
    }
    let magic = be_u32(labels, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::BadMagic {
            expected: IDX_LABELS_MAGIC,
            found: magic,
        });
    }
    let n_images = be_u32(images, 4)? as usize;
    let rows = be_u32(images, 8)? as usize;
    let cols = be_u32(images, 12)? as usize;
    let n_labels = be_u32(labels, 4)? as usize;
    if n_images != n_labels {
        return Err(Error::CountMismatch {
            images: n_images,
            labels: n_labels,
        });
    }
    let d = rows * cols;
    let pixels = &images[16..];
    if pixels.len() != n_images * d {
        return Err(Error::Malformed(format!(
            "image payload is {} bytes, header promises {n_images}x{rows}x{cols}",
            pixels.len()
        )));
    }
    let label_bytes = &labels[8..];
    if label_bytes.len() != n_labels {
        return Err(Error::Malformed(format!(
            "label payload is {} bytes, header promises {n_labels}",
            label_bytes.len()
        )));
    }
    let scale = F::one() / F::of(255.0);
    let features = Array2::from_shape_fn((n_images, d), |(i, j)| F::of(pixels[i * d + j] as f64) * scale);
    let labels: Vec<usize> = label_bytes.iter().map(|&b| b as usize).collect();
    let classes = classes_from_labels(&labels);
    RawDataset::new(name, features, labels, classes)
}

pub fn load_idx<F: Real>(path_images: impl AsRef<Path>, path_labels: impl AsRef<Path>) -> Result<RawDataset<F>> {
    let path_images = path_images.as_ref();
    let name = path_images
        .parent()
        .and_then(|p| p.file_name())
        .map_or_else(|| "idx".to_string(), |s| s.to_string_lossy().into_owned());
    parse_idx(&name, &read(path_images)?, &read(path_labels.as_ref())?)
}

/// Parses a CIFAR-10 binary batch: per record one label byte followed by
/// 3072 pixel bytes (red plane, green plane, blue plane), kept in file order.
pub fn parse_cifar_batch<F: Real>(name: &str, bytes: &[u8]) -> Result<RawDataset<F>> {
    if bytes.is_empty() || !bytes.len().is_multiple_of(CIFAR_RECORD) {
        return Err(Error::Malformed(format!(
            "CIFAR batch length {} is not a positive multiple of {CIFAR_RECORD}",
            bytes.len()
        )));
    }
    let n = bytes.len() / CIFAR_RECORD;
    let scale = F::one() / F::of(255.0);
    let mut labels = Vec::with_capacity(n);
    let mut features = Array2::zeros((n, CIFAR_RECORD - 1));
    for (i, (record, mut row)) in bytes.chunks_exact(CIFAR_RECORD).zip(features.rows_mut()).enumerate() {
        let label = record[0] as usize;
        if label >= CIFAR_CLASSES {
            return Err(Error::Malformed(format!("record {i} has label {label}")));
        }
        labels.push(label);
        for (dst, &b) in row.iter_mut().zip(&record[1..]) {
            *dst = F::of(b as f64) * scale;
        }
    }
    RawDataset::new(name, features, labels, CIFAR_CLASSES)
}

pub fn load_cifar_batch<F: Real>(path: impl AsRef<Path>) -> Result<RawDataset<F>> {
    let path = path.as_ref();
    parse_cifar_batch("cifar10", &read(path)?)
}

/// Concatenates several CIFAR batches in the given order.
pub fn load_cifar_batches<F: Real, P: AsRef<Path>>(paths: &[P]) -> Result<RawDataset<F>> {
    let mut bytes = Vec::new();
    for p in paths {
        bytes.extend(read(p.as_ref())?);
    }
    parse_cifar_batch("cifar10", &bytes)
}

/// Reads a CSV with a header row and an integer `label` column; every other
/// column is a feature. With `normalize`, each feature column is min-max
/// scaled into `[0, 1]` (constant columns map to 0); otherwise values must
/// already lie in `[0, 1]`.
pub fn load_csv<F: Real>(path: impl AsRef<Path>, normalize: bool) -> Result<RawDataset<F>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers()?.clone();
    let label_col = headers
        .iter()
        .position(|h| h.trim() == "label")
        .ok_or_else(|| Error::Malformed("CSV has no `label` column".into()))?;
    let d = headers.len() - 1;
    let mut values: Vec<F> = Vec::new();
    let mut labels = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::Malformed(format!("CSV row {line} has {} fields", record.len())));
        }
        for (j, field) in record.iter().enumerate() {
            let field = field.trim();
            if j == label_col {
                let label: usize = field
                    .parse()
                    .map_err(|_| Error::Malformed(format!("CSV row {line}: bad label {field:?}")))?;
                labels.push(label);
            } else {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::Malformed(format!("CSV row {line}: bad value {field:?}")))?;
                values.push(F::of(v));
            }
        }
    }
    let n = labels.len();
    let mut features =
        Array2::from_shape_vec((n, d), values).map_err(|e| Error::Malformed(e.to_string()))?;
    if normalize {
        for mut col in features.columns_mut() {
            let lo = col.iter().copied().fold(F::infinity(), F::min);
            let hi = col.iter().copied().fold(F::neg_infinity(), F::max);
            let span = hi - lo;
            col.mapv_inplace(|v| if span > F::zero() { (v - lo) / span } else { F::zero() });
        }
    }
    let name = path
        .file_stem()
        .map_or_else(|| "csv".to_string(), |s| s.to_string_lossy().into_owned());
    let classes = classes_from_labels(&labels);
    RawDataset::new(name, features, labels, classes)
}

/// `classes` isotropic Gaussian clusters with means drawn uniformly in
/// `[0.1, 0.9]^d`; point `i` belongs to class `i % classes`. Values are
/// clamped to `[0, 1]`.
pub fn synthesize_blobs<F: Real>(n: usize, d: usize, classes: usize, spread: F, seed: u64) -> Result<RawDataset<F>> {
    if classes < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 classes, got {classes}")));
    }
    if n < classes {
        return Err(Error::InvalidParameter(format!("n = {n} is smaller than the class count {classes}")));
    }
    if d == 0 {
        return Err(Error::InvalidParameter("d must be positive".into()));
    }
    if spread < F::zero() || !spread.is_finite() {
        return Err(Error::InvalidParameter(format!("spread must be non-negative, got {spread}")));
    }
    let mut rng = rng::seeded(seed);
    let lo = F::of(0.1);
    let width = F::of(0.8);
    let means = Array2::from_shape_simple_fn((classes, d), || {
        lo + width * F::of(rand::Rng::random::<f64>(&mut rng))
    });
    let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    let mut features = Array2::zeros((n, d));
    for (i, mut row) in features.rows_mut().into_iter().enumerate() {
        let mean = means.row(labels[i]);
        for (dst, &m) in row.iter_mut().zip(mean.iter()) {
            let noise = if spread > F::zero() {
                spread * standard_normal::<F, _>(&mut rng)
            } else {
                F::zero()
            };
            *dst = (m + noise).max(F::zero()).min(F::one());
        }
    }
    RawDataset::new("blobs", features, labels, classes)
}

/// `m` rows drawn uniformly without replacement, in draw order.
pub fn subsample<F: Real>(ds: &RawDataset<F>, m: usize, seed: u64) -> Result<RawDataset<F>> {
    if m > ds.len() {
        return Err(Error::InvalidParameter(format!(
            "cannot subsample {m} rows from {}",
            ds.len()
        )));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("subsample size must be positive".into()));
    }
    let mut rng = rng::seeded(seed);
    let idx = index::sample(&mut rng, ds.len(), m).into_vec();
    Ok(ds.select(&idx))
}
