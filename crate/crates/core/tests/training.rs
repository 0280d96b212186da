use hopdeq::data::{encode_idx, parse_idx, Dataset, Split};
use hopdeq::hopfield::{checkpoint, Architecture, MapKind, Variant};
use hopdeq::solvers::SolverConfig;
use hopdeq::training::{evaluate, train, xavier_init, TrainConfig};

/// Two easily separated classes: bright left half versus bright right half.
fn toy_dataset(n: usize) -> Dataset {
    let mut images = Vec::with_capacity(n * 16);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 2) as u8;
        for px in 0..16 {
            let left = px % 4 < 2;
            let on = left == (label == 0);
            images.push(if on { 200 + (i * 7 + px) as u8 % 50 } else { (i * 3 + px) as u8 % 40 });
        }
        labels.push(label * 3);
    }
    let images = parse_idx(&encode_idx(&[n, 4, 4], &images)).unwrap();
    let labels = parse_idx(&encode_idx(&[n], &labels)).unwrap();
    Dataset::from_idx(&images, &labels, Split::Train).unwrap()
}

fn config(kind: MapKind) -> TrainConfig {
    TrainConfig {
        kind,
        epochs: 4,
        batch_size: 8,
        forward_iters: 30,
        backward_iters: 8,
        lr0: 0.05,
        seed: 5,
        ..TrainConfig::default()
    }
}

#[test]
fn training_reduces_loss_for_every_scheme() {
    let ds = toy_dataset(64);
    let arch = Architecture::new(vec![16, 12, 10]).unwrap();
    for kind in [MapKind::HamSync, MapKind::HamFused, MapKind::ChnSync, MapKind::ChnEvenOdd] {
        let mut p = xavier_init(&arch, kind.variant(), 1);
        let mut cfg = config(kind);
        if kind.variant() == Variant::Chn {
            // both CHN schemes backpropagate through the sync Jacobian
            cfg.backward_damping = 0.5;
            cfg.backward_iters = 16;
            cfg.epochs = 8;
        }
        if kind == MapKind::ChnSync {
            cfg.forward_damping = 0.5;
            cfg.forward_iters = 60;
        }
        let log = train(&mut p, &ds, None, &cfg, |_| {}).unwrap();
        assert_eq!(log.len(), cfg.epochs);
        let (first, last) = (log[0].loss, log[cfg.epochs - 1].loss);
        assert!(last < first, "{kind}: loss {first} -> {last}");
        let solver = SolverConfig::picard(400, 1e-4).with_damping(cfg.forward_damping);
        let report = evaluate(&p, &ds, kind, &solver, 10, 0.5).unwrap();
        assert!(report.accuracy >= 0.9, "{kind}: accuracy {}", report.accuracy);
    }
}

#[test]
fn max_epochs_truncates_without_changing_schedule() {
    let ds = toy_dataset(32);
    let arch = Architecture::new(vec![16, 6, 10]).unwrap();
    let mut full = xavier_init(&arch, Variant::Ham, 2);
    let mut short = full.clone();
    let cfg = config(MapKind::HamSync);
    let full_log = train(&mut full, &ds, None, &cfg, |_| {}).unwrap();
    let short_log = train(&mut short, &ds, None, &TrainConfig { max_epochs: Some(2), ..cfg }, |_| {}).unwrap();
    assert_eq!(short_log.len(), 2);
    assert_eq!(short_log[..], full_log[..2]);
}

#[test]
fn training_is_deterministic_per_seed() {
    let ds = toy_dataset(32);
    let arch = Architecture::new(vec![16, 6, 10]).unwrap();
    let run = |seed: u64| {
        let mut p = xavier_init(&arch, Variant::Ham, seed);
        train(&mut p, &ds, None, &TrainConfig { epochs: 1, ..config(MapKind::HamSync) }, |_| {}).unwrap();
        checkpoint::to_bytes(&p)
    };
    assert_eq!(run(3), run(3));
    assert_ne!(run(3), run(4));
}

#[test]
fn invalid_configs_are_rejected() {
    let ds = toy_dataset(8);
    let mut p = xavier_init(&Architecture::new(vec![16, 4, 10]).unwrap(), Variant::Ham, 0);
    for cfg in [
        TrainConfig { batch_size: 0, ..config(MapKind::HamSync) },
        TrainConfig { lr0: 0.0, ..config(MapKind::HamSync) },
        TrainConfig { forward_iters: 0, ..config(MapKind::HamSync) },
    ] {
        assert!(matches!(train(&mut p, &ds, None, &cfg, |_| {}), Err(hopdeq::Error::InvalidConfig(_))));
    }
}
