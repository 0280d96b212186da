//! MNIST-style IDX ingestion, preprocessing and batching.

mod dataset;
pub mod idx;

pub use dataset::{batches, load_mnist, one_hot, preprocess, Batch, Batches, Dataset, Split, NUM_CLASSES};
pub use idx::{encode_idx, parse_idx, read_idx_file, IdxTensor};
