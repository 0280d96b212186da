use std::fs;
use std::io::Write;

use flate2::write::GzEncoder;
use flate2::Compression;
use proptest::prelude::*;

use hopdeq::data::{encode_idx, load_mnist, parse_idx, Dataset, Split};
use hopdeq::hopfield::{checkpoint, Architecture, Variant};
use hopdeq::training::xavier_init;

proptest! {
    #[test]
    fn idx_round_trips(dims in proptest::collection::vec(1usize..5, 1..4), fill in any::<u8>()) {
        let n: usize = dims.iter().product();
        let data: Vec<u8> = (0..n).map(|i| (i as u8).wrapping_mul(31).wrapping_add(fill)).collect();
        let t = parse_idx(&encode_idx(&dims, &data)).unwrap();
        prop_assert_eq!(&t.dims, &dims);
        prop_assert_eq!(t.data, data);
    }

    #[test]
    fn truncated_idx_is_rejected(dims in proptest::collection::vec(1usize..5, 1..4), cut in 1usize..8) {
        let n: usize = dims.iter().product();
        let bytes = encode_idx(&dims, &vec![7; n]);
        let keep = bytes.len().saturating_sub(cut);
        prop_assert!(parse_idx(&bytes[..keep]).is_err());
    }

    #[test]
    fn checkpoint_bytes_round_trip(sizes in proptest::collection::vec(1usize..6, 2..6), seed in any::<u64>(), chn in any::<bool>()) {
        let variant = if chn { Variant::Chn } else { Variant::Ham };
        let p = xavier_init(&Architecture::new(sizes).unwrap(), variant, seed);
        let q = checkpoint::from_bytes(&checkpoint::to_bytes(&p)).unwrap();
        prop_assert_eq!(q.variant, p.variant);
        prop_assert_eq!(q.blocks, p.blocks);
        prop_assert_eq!(q.biases, p.biases);
    }
}

fn write_split(dir: &std::path::Path, prefix: &str, n: usize, gz: bool) {
    let images: Vec<u8> = (0..n * 4).map(|i| (i * 17 % 256) as u8).collect();
    let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
    for (name, bytes) in [
        (format!("{prefix}-images-idx3-ubyte"), encode_idx(&[n, 2, 2], &images)),
        (format!("{prefix}-labels-idx1-ubyte"), encode_idx(&[n], &labels)),
    ] {
        if gz {
            let mut enc = GzEncoder::new(Vec::new(), Compression::default());
            enc.write_all(&bytes).unwrap();
            fs::write(dir.join(format!("{name}.gz")), enc.finish().unwrap()).unwrap();
        } else {
            fs::write(dir.join(name), bytes).unwrap();
        }
    }
}

#[test]
fn loads_plain_and_gzipped_splits() {
    let dir = tempfile::tempdir().unwrap();
    write_split(dir.path(), "train", 23, false);
    write_split(dir.path(), "t10k", 7, true);
    let train = load_mnist(dir.path(), Split::Train).unwrap();
    let test = load_mnist(dir.path(), Split::Test).unwrap();
    assert_eq!((train.len(), train.input_dim()), (23, 4));
    assert_eq!(test.len(), 7);
    assert!(train.images.iter().all(|&v| (0.0..=1.0).contains(&v)));
    assert_eq!(test.labels, vec![0, 1, 2, 3, 4, 5, 6]);
}

#[test]
fn missing_split_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_mnist(dir.path(), Split::Train).unwrap_err();
    assert!(matches!(err, hopdeq::Error::Io(_)));
}

#[test]
fn batches_cover_every_sample_once() {
    let dir = tempfile::tempdir().unwrap();
    write_split(dir.path(), "train", 23, false);
    let ds: Dataset = load_mnist(dir.path(), Split::Train).unwrap();
    for shuffle in [false, true] {
        let mut seen: Vec<usize> = ds.batches(5, 9, shuffle).unwrap().flat_map(|b| b.indices).collect();
        assert_eq!(ds.batches(5, 9, shuffle).unwrap().count(), 5);
        seen.sort_unstable();
        assert_eq!(seen, (0..23).collect::<Vec<_>>());
    }
    assert!(ds.batches(0, 0, false).is_err());
    assert_eq!(ds.subset(4).len(), 4);
    assert_eq!(ds.subset(100).len(), 23);
}

#[test]
fn checkpoint_file_round_trip_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.hopdeq");
    let p = xavier_init(&Architecture::new(vec![6, 5, 4, 3]).unwrap(), Variant::Ham, 11);
    checkpoint::save(&p, &path).unwrap();
    let q = checkpoint::load(&path).unwrap();
    assert_eq!(q.blocks, p.blocks);

    let mut bytes = fs::read(&path).unwrap();
    bytes[0] ^= 0xff;
    assert!(matches!(checkpoint::from_bytes(&bytes), Err(hopdeq::Error::Checkpoint(_))));
    let bytes = fs::read(&path).unwrap();
    assert!(matches!(checkpoint::from_bytes(&bytes[..bytes.len() - 3]), Err(hopdeq::Error::Checkpoint(_))));
    let mut long = bytes.clone();
    long.push(0);
    assert!(matches!(checkpoint::from_bytes(&long), Err(hopdeq::Error::Checkpoint(_))));
}
