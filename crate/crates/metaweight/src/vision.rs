//! Image-data ingestion: IDX file loading, corrupted-label related-task
//! construction, and a synthetic cluster generator for offline runs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::classifier::LabeledImage;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::DenseMatrix;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
    Test,
}

/// Images as an n x 784 matrix with values in [0,1] plus class labels.
#[derive(Debug, Clone)]
pub struct ImageDataset {
    pub images: DenseMatrix,
    pub labels: Vec<usize>,
    pub split: Split,
}

impl ImageDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Examples with true labels shown (primary task / evaluation).
    pub fn to_examples(&self) -> Vec<LabeledImage> {
        (0..self.len())
            .map(|i| LabeledImage::clean(Arc::new(self.images.row(i).to_vec()), self.labels[i]))
            .collect()
    }

    /// First `n` examples split off as a new dataset (file-order convention).
    pub fn take(&self, range: std::ops::Range<usize>, split: Split) -> ImageDataset {
        let cols = self.images.cols();
        let mut data = Vec::with_capacity(range.len() * cols);
        for i in range.clone() {
            data.extend_from_slice(self.images.row(i));
        }
        ImageDataset {
            images: DenseMatrix::from_vec(range.len(), cols, data).expect("consistent range"),
            labels: self.labels[range].to_vec(),
            split,
        }
    }
}

/// The related task: same images, labels corrupted for a fixed fraction,
/// with ground-truth correctness indicators.
#[derive(Debug, Clone)]
pub struct CorruptedDataset {
    pub base: ImageDataset,
    pub shown_labels: Vec<usize>,
    pub indicator: Vec<bool>,
}

impl CorruptedDataset {
    pub fn to_examples(&self) -> Vec<LabeledImage> {
        (0..self.base.len())
            .map(|i| LabeledImage {
                pixels: Arc::new(self.base.images.row(i).to_vec()),
                label: self.base.labels[i],
                shown_label: self.shown_labels[i],
                indicator: Some(self.indicator[i]),
            })
            .collect()
    }

    pub fn num_correct(&self) -> usize {
        self.indicator.iter().filter(|&&c| c).count()
    }
}

fn read_u32_be(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_be_bytes(b))
}

/// Load an IDX image/label file pair. Pixels are scaled by 1/255.
pub fn load_idx(images_path: &Path, labels_path: &Path, split: Split) -> Result<ImageDataset> {
    let mut ir = BufReader::new(File::open(images_path)?);
    let magic = read_u32_be(&mut ir)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::BadMagic {
            expected: IDX_IMAGES_MAGIC,
            got: magic,
        });
    }
    let n = read_u32_be(&mut ir)? as usize;
    let rows = read_u32_be(&mut ir)? as usize;
    let cols = read_u32_be(&mut ir)? as usize;
    let mut raw = vec![0u8; n * rows * cols];
    ir.read_exact(&mut raw).map_err(|e| {
        Error::Parse {
            line: 0,
            message: format!("truncated IDX image payload: {e}"),
        }
    })?;
    let data: Vec<f64> = raw.iter().map(|&b| b as f64 / 255.0).collect();

    let mut lr = BufReader::new(File::open(labels_path)?);
    let lmagic = read_u32_be(&mut lr)?;
    if lmagic != IDX_LABELS_MAGIC {
        return Err(Error::BadMagic {
            expected: IDX_LABELS_MAGIC,
            got: lmagic,
        });
    }
    let ln = read_u32_be(&mut lr)? as usize;
    if ln != n {
        return Err(Error::Parse {
            line: 0,
            message: format!("image count {n} != label count {ln}"),
        });
    }
    let mut lraw = vec![0u8; ln];
    lr.read_exact(&mut lraw).map_err(|e| Error::Parse {
        line: 0,
        message: format!("truncated IDX label payload: {e}"),
    })?;
    Ok(ImageDataset {
        images: DenseMatrix::from_vec(n, rows * cols, data)?,
        labels: lraw.into_iter().map(|b| b as usize).collect(),
        split,
    })
}

/// Write a dataset back to the IDX byte format (images as rows x cols u8).
pub fn write_idx(
    dataset: &ImageDataset,
    rows: usize,
    cols: usize,
    images_path: &Path,
    labels_path: &Path,
) -> Result<()> {
    if rows * cols != dataset.images.cols() {
        return Err(Error::Shape(format!(
            "{}x{} does not match {} pixel columns",
            rows,
            cols,
            dataset.images.cols()
        )));
    }
    let mut iw = BufWriter::new(File::create(images_path)?);
    iw.write_all(&IDX_IMAGES_MAGIC.to_be_bytes())?;
    iw.write_all(&(dataset.len() as u32).to_be_bytes())?;
    iw.write_all(&(rows as u32).to_be_bytes())?;
    iw.write_all(&(cols as u32).to_be_bytes())?;
    for i in 0..dataset.len() {
        let bytes: Vec<u8> = dataset
            .images
            .row(i)
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        iw.write_all(&bytes)?;
    }
    let mut lw = BufWriter::new(File::create(labels_path)?);
    lw.write_all(&IDX_LABELS_MAGIC.to_be_bytes())?;
    lw.write_all(&(dataset.len() as u32).to_be_bytes())?;
    for &l in &dataset.labels {
        lw.write_all(&[l as u8])?;
    }
    Ok(())
}

/// Corrupt the labels of a seeded sample of floor(fraction * n) examples.
/// Wrong labels are drawn uniformly over the 9 other classes.
pub fn corrupt(dataset: &ImageDataset, fraction: f64, classes: usize, rng: &mut Rng) -> CorruptedDataset {
    assert!((0.0..=1.0).contains(&fraction));
    let n = dataset.len();
    let k = (fraction * n as f64).floor() as usize;
    let chosen = rng.sample_without_replacement(n, k);
    let mut shown = dataset.labels.clone();
    let mut indicator = vec![true; n];
    for &i in &chosen {
        let true_label = dataset.labels[i];
        shown[i] = (true_label + 1 + rng.index(classes - 1)) % classes;
        indicator[i] = false;
    }
    CorruptedDataset {
        base: dataset.clone(),
        shown_labels: shown,
        indicator,
    }
}

/// Gaussian clusters over sparse class-dependent bumps. A stand-in for the
/// handwritten-digit files when they are not on disk.
pub fn synth_clusters(
    n_per_class: usize,
    classes: usize,
    features: usize,
    noise: f64,
    rng: &mut Rng,
    split: Split,
) -> ImageDataset {
    assert!(n_per_class >= 1);
    // Class means: sparse bumps at class-dependent coordinates. Bump
    // amplitudes and the noise support are kept small so total feature
    // energy |x|^2 stays low; a summed-batch gradient step must remain in
    // the descent regime for a logistic model (curvature grows with |x|^2).
    let mut means = vec![vec![0.0; features]; classes];
    let mut active = vec![false; features];
    let mut mean_rng = Rng::new(0xC1A5_5E5);
    for mean in means.iter_mut() {
        for _ in 0..features / 40 {
            let j = mean_rng.index(features);
            mean[j] = 0.02 + 0.025 * mean_rng.uniform();
            active[j] = true;
        }
    }
    let n = n_per_class * classes;
    let mut data = Vec::with_capacity(n * features);
    let mut labels = Vec::with_capacity(n);
    let mut order: Vec<usize> = (0..n).map(|i| i % classes).collect();
    rng.shuffle(&mut order);
    for &c in &order {
        for j in 0..features {
            // Noise only on coordinates some class uses: off-support pixels
            // stay exactly zero and carry neither signal nor curvature.
            let v = if active[j] {
                means[c][j] + noise * rng.normal()
            } else {
                0.0
            };
            data.push(v.clamp(0.0, 1.0));
        }
        labels.push(c);
    }
    ImageDataset {
        images: DenseMatrix::from_vec(n, features, data).expect("consistent"),
        labels,
        split,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idx_round_trip_fixture() {
        let dir = std::env::temp_dir().join("metaweight_idx_test");
        std::fs::create_dir_all(&dir).unwrap();
        let images = dir.join("imgs");
        let labels = dir.join("lbls");
        // Hand-built 2-image fixture with known bytes.
        let ds = ImageDataset {
            images: DenseMatrix::from_vec(
                2,
                4,
                vec![0.0, 51.0 / 255.0, 102.0 / 255.0, 1.0, 17.0 / 255.0, 0.0, 0.0, 34.0 / 255.0],
            )
            .unwrap(),
            labels: vec![3, 7],
            split: Split::Train,
        };
        write_idx(&ds, 2, 2, &images, &labels).unwrap();
        let loaded = load_idx(&images, &labels, Split::Train).unwrap();
        assert_eq!(loaded.labels, vec![3, 7]);
        assert_eq!(loaded.images.data(), ds.images.data());
        // Byte-exactness: writing again reproduces the same files.
        let images2 = dir.join("imgs2");
        let labels2 = dir.join("lbls2");
        write_idx(&loaded, 2, 2, &images2, &labels2).unwrap();
        assert_eq!(std::fs::read(&images).unwrap(), std::fs::read(&images2).unwrap());
        assert_eq!(std::fs::read(&labels).unwrap(), std::fs::read(&labels2).unwrap());
    }

    #[test]
    fn wrong_magic_rejected() {
        let dir = std::env::temp_dir().join("metaweight_idx_magic");
        std::fs::create_dir_all(&dir).unwrap();
        let images = dir.join("imgs");
        let labels = dir.join("lbls");
        let ds = ImageDataset {
            images: DenseMatrix::from_vec(1, 1, vec![0.5]).unwrap(),
            labels: vec![1],
            split: Split::Test,
        };
        write_idx(&ds, 1, 1, &images, &labels).unwrap();
        // Labels file handed over as the images file: magic mismatch.
        match load_idx(&labels, &images, Split::Test) {
            Err(Error::BadMagic { expected, .. }) => assert_eq!(expected, IDX_IMAGES_MAGIC),
            other => panic!("expected BadMagic, got {other:?}"),
        }
    }

    #[test]
    fn corrupt_fraction_zero_changes_nothing() {
        let mut rng = Rng::new(1);
        let ds = synth_clusters(5, 10, 16, 0.05, &mut rng, Split::Train);
        let c = corrupt(&ds, 0.0, 10, &mut rng);
        assert_eq!(c.shown_labels, ds.labels);
        assert!(c.indicator.iter().all(|&b| b));
    }

    #[test]
    fn corrupt_exact_split() {
        let mut rng = Rng::new(2);
        let ds = synth_clusters(40, 10, 16, 0.05, &mut rng, Split::Train);
        let c = corrupt(&ds, 0.75, 10, &mut rng);
        assert_eq!(ds.len(), 400);
        assert_eq!(c.indicator.iter().filter(|&&b| !b).count(), 300);
        assert_eq!(c.num_correct(), 100);
    }

    #[test]
    fn corrupted_labels_never_match_truth() {
        let mut rng = Rng::new(3);
        let ds = synth_clusters(30, 10, 16, 0.05, &mut rng, Split::Train);
        let c = corrupt(&ds, 0.75, 10, &mut rng);
        for i in 0..ds.len() {
            assert_eq!(c.indicator[i], c.shown_labels[i] == ds.labels[i]);
        }
    }

    #[test]
    fn corrupt_deterministic_under_seed() {
        let mut r1 = Rng::new(4);
        let ds = synth_clusters(20, 10, 16, 0.05, &mut r1, Split::Train);
        let mut a = Rng::new(99);
        let mut b = Rng::new(99);
        let c1 = corrupt(&ds, 0.75, 10, &mut a);
        let c2 = corrupt(&ds, 0.75, 10, &mut b);
        assert_eq!(c1.shown_labels, c2.shown_labels);
        assert_eq!(c1.indicator, c2.indicator);
    }

    #[test]
    fn synth_deterministic_and_balanced() {
        let mut a = Rng::new(5);
        let mut b = Rng::new(5);
        let d1 = synth_clusters(7, 10, 32, 0.1, &mut a, Split::Train);
        let d2 = synth_clusters(7, 10, 32, 0.1, &mut b, Split::Train);
        assert_eq!(d1.images.data(), d2.images.data());
        assert_eq!(d1.labels, d2.labels);
        for c in 0..10 {
            assert_eq!(d1.labels.iter().filter(|&&l| l == c).count(), 7);
        }
    }
}
