use minmax_core::models::{accuracy, read_checkpoint, train_natural, write_checkpoint, TrainConfig};
use minmax_core::{DenseMatrix, LabeledDataset, MlpModel, SeededRng};

fn blobs(seed: u64, n: usize, d: usize, classes: usize) -> LabeledDataset<f64> {
    let mut rng = SeededRng::new(seed);
    let centres: Vec<Vec<f64>> = (0..classes).map(|_| (0..d).map(|_| rng.uniform(0.1, 0.9)).collect()).collect();
    let mut data = Vec::with_capacity(n * d);
    for i in 0..n {
        for j in 0..d {
            data.push((centres[i % classes][j] + 0.04 * rng.normal::<f64>()).clamp(0.0, 1.0));
        }
    }
    LabeledDataset::new(DenseMatrix::new(n, d, data).unwrap(), (0..n).map(|i| i % classes).collect(), classes).unwrap()
}

fn cfg(epochs: usize) -> TrainConfig<f64> {
    TrainConfig { epochs, lr: 0.1, batch: 16 }
}

#[test]
fn natural_training_fits_separable_blobs() {
    let data = blobs(500, 300, 10, 4);
    let mut m = MlpModel::init(&[10, 32, 4], &mut SeededRng::new(501)).unwrap();
    let report = train_natural(&mut m, &data, &cfg(50), &mut SeededRng::new(502)).unwrap();
    assert!(accuracy(&m, &data).unwrap() >= 0.99);
    assert_eq!(report.epoch_accuracy.len(), 50);
    let first = report.epoch_loss[..5].iter().sum::<f64>();
    let last = report.epoch_loss[45..].iter().sum::<f64>();
    assert!(last < first, "{first} -> {last}");
}

#[test]
fn zero_epochs_leave_the_model_unchanged() {
    let data = blobs(503, 20, 5, 2);
    let init = MlpModel::init(&[5, 6, 2], &mut SeededRng::new(504)).unwrap();
    let mut m = init.clone();
    let report = train_natural(&mut m, &data, &cfg(0), &mut SeededRng::new(505)).unwrap();
    assert_eq!(m, init);
    assert!(report.epoch_loss.is_empty());
}

#[test]
fn training_is_deterministic_in_seed() {
    let data = blobs(506, 64, 6, 3);
    let init = MlpModel::init(&[6, 12, 3], &mut SeededRng::new(507)).unwrap();
    let run = |seed| {
        let mut m = init.clone();
        let r = train_natural(&mut m, &data, &cfg(5), &mut SeededRng::new(seed)).unwrap();
        (m, r)
    };
    assert_eq!(run(508), run(508));
    assert_ne!(run(508).0, run(509).0);
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let data = blobs(510, 30, 7, 3);
    let m = MlpModel::init(&[7, 9, 5, 3], &mut SeededRng::new(511)).unwrap();
    let mut buf = Vec::new();
    write_checkpoint(&m, &mut buf).unwrap();
    let back: MlpModel<f64> = read_checkpoint(&buf[..]).unwrap();
    assert_eq!(back, m);
    for (x, _) in data.iter() {
        assert_eq!(back.forward(x).unwrap(), m.forward(x).unwrap());
    }
}

#[test]
fn empty_and_mismatched_inputs_are_rejected() {
    let data = blobs(512, 10, 4, 2);
    let mut m = MlpModel::init(&[5, 4, 2], &mut SeededRng::new(513)).unwrap();
    assert!(train_natural(&mut m, &data, &cfg(1), &mut SeededRng::new(0)).is_err());
    assert!(m.forward(&[0.0; 4]).is_err());
    assert!(LabeledDataset::new(DenseMatrix::new(2, 2, vec![0.0; 4]).unwrap(), vec![0, 3], 2).is_err());
}
