use std::path::{Path, PathBuf};

use ndarray::{s, Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::idx::{read_idx_file, IdxTensor};
use crate::error::{Error, Result};

pub const NUM_CLASSES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn file_prefix(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "t10k",
        }
    }
}

/// Rescales bytes to `[0, 1]` by dividing by 255.
pub fn preprocess(raw: &[u8]) -> Vec<f64> {
    raw.iter().map(|&b| f64::from(b) / 255.0).collect()
}

/// Flattened images in `[0, 1]` with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub images: Array2<f64>,
    pub labels: Vec<u8>,
    pub split: Split,
}

impl Dataset {
    pub fn from_idx(images: &IdxTensor, labels: &IdxTensor, split: Split) -> Result<Self> {
        if labels.dims.len() != 1 {
            return Err(Error::Idx(format!("labels must be rank 1, got dims {:?}", labels.dims)));
        }
        if images.len() != labels.len() {
            return Err(Error::Idx(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.data.iter().find(|&&l| l as usize >= NUM_CLASSES) {
            return Err(Error::Idx(format!("label {bad} out of range")));
        }
        let images = Array2::from_shape_vec((images.len(), images.item_size()), preprocess(&images.data))
            .expect("payload length checked by the parser");
        Ok(Self {
            images,
            labels: labels.data.clone(),
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.images.ncols()
    }

    pub fn image(&self, i: usize) -> ArrayView1<'_, f64> {
        self.images.row(i)
    }

    /// The first `n` samples (all of them if `n >= len`).
    pub fn subset(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            images: self.images.slice(s![..n, ..]).to_owned(),
            labels: self.labels[..n].to_vec(),
            split: self.split,
        }
    }

    pub fn batches(&self, batch_size: usize, seed: u64, shuffle: bool) -> Result<Batches<'_>> {
        batches(self, batch_size, seed, shuffle)
    }
}

fn find_file(dir: &Path, stem: &str) -> Result<PathBuf> {
    let dotted = stem.replacen("-idx", ".idx", 1);
    for name in [stem.to_string(), format!("{stem}.gz"), dotted.clone(), format!("{dotted}.gz")] {
        let path = dir.join(&name);
        if path.is_file() {
            return Ok(path);
        }
    }
    Err(Error::Io(std::io::Error::new(
        std::io::ErrorKind::NotFound,
        format!("{stem}[.gz] not found in {}", dir.display()),
    )))
}

/// Loads `train-*` or `t10k-*` IDX files (optionally gzipped) from `dir`.
pub fn load_mnist(dir: &Path, split: Split) -> Result<Dataset> {
    let prefix = split.file_prefix();
    let images = read_idx_file(&find_file(dir, &format!("{prefix}-images-idx3-ubyte"))?)?;
    let labels = read_idx_file(&find_file(dir, &format!("{prefix}-labels-idx1-ubyte"))?)?;
    Dataset::from_idx(&images, &labels, split)
}

pub fn one_hot(label: u8) -> [f64; NUM_CLASSES] {
    let mut v = [0.0; NUM_CLASSES];
    v[label as usize] = 1.0;
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub inputs: Array2<f64>,
    pub targets: Array2<f64>,
    pub labels: Vec<u8>,
}

/// Iterator over mini-batches; the final partial batch is included.
pub struct Batches<'a> {
    ds: &'a Dataset,
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

pub fn batches(ds: &Dataset, batch_size: usize, seed: u64, shuffle: bool) -> Result<Batches<'_>> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    if shuffle {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    Ok(Batches {
        ds,
        order,
        batch_size,
        pos: 0,
    })
}

impl Iterator for Batches<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let indices = self.order[self.pos..end].to_vec();
        self.pos = end;
        let mut inputs = Array2::zeros((indices.len(), self.ds.input_dim()));
        let mut targets = Array2::zeros((indices.len(), NUM_CLASSES));
        let mut labels = Vec::with_capacity(indices.len());
        for (row, &i) in indices.iter().enumerate() {
            inputs.row_mut(row).assign(&self.ds.image(i));
            targets[[row, self.ds.labels[i] as usize]] = 1.0;
            labels.push(self.ds.labels[i]);
        }
        Some(Batch {
            indices,
            inputs,
            targets,
            labels,
        })
    }
}
