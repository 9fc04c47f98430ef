use minmax_core::defense::{ampgd_train, at_objective, inner_maximize, inner_maximize_with};
use minmax_core::models::LabeledDataset;
use minmax_core::projections::Simplex;
use minmax_core::{AtConfig, AttackType, ConstraintSet, DenseMatrix, LossKind, MlpModel, Norm, SeededRng};

fn blobs(seed: u64, n: usize, d: usize, classes: usize) -> LabeledDataset<f64> {
    let mut rng = SeededRng::new(seed);
    let centres: Vec<Vec<f64>> = (0..classes).map(|_| (0..d).map(|_| rng.uniform(0.2, 0.8)).collect()).collect();
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        for j in 0..d {
            data.push((centres[c][j] + 0.05 * rng.normal::<f64>()).clamp(0.0, 1.0));
        }
        labels.push(c);
    }
    LabeledDataset::new(DenseMatrix::new(n, d, data).unwrap(), labels, classes).unwrap()
}

/// Madry-style training written out directly: shuffled batches, an R-step
/// projected ascent per example, then one SGD step on the mixed loss.
fn vanilla_at(model: &mut MlpModel<f64>, data: &LabeledDataset<f64>, cfg: &AtConfig<f64>) {
    let attack = cfg.attack_types[0];
    let s = cfg.loss.adversarial_sign();
    let mut rng = SeededRng::new(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for chunk in order.chunks(cfg.batch) {
            let mut advs = Vec::new();
            for &i in chunk {
                let x = data.input(i);
                let set = ConstraintSet::around_input(attack.norm, attack.eps, x).unwrap();
                let mut delta = vec![0.0; x.len()];
                for _ in 0..cfg.inner_steps {
                    let xp: Vec<f64> = x.iter().zip(&delta).map(|(a, b)| a + b).collect();
                    let g = model.grad_input(&xp, &cfg.loss, data.label(i)).unwrap();
                    let moved: Vec<f64> = delta.iter().zip(&g).map(|(d, gi)| d + cfg.delta_lr * (s * gi)).collect();
                    delta = set.project(&moved).unwrap();
                }
                advs.push(x.iter().zip(&delta).map(|(a, b)| a + b).collect::<Vec<f64>>());
            }
            let inv_n = 1.0 / chunk.len() as f64;
            let mut grad = vec![0.0; model.num_params()];
            for (&i, xp) in chunk.iter().zip(&advs) {
                let y = data.label(i);
                model.accumulate_grad_params(xp, y, &cfg.loss, s * cfg.adv_ratio * 1.0 * inv_n, &mut grad).unwrap();
                let clean = s * (1.0 - cfg.adv_ratio) * inv_n;
                model.accumulate_grad_params(data.input(i), y, &cfg.loss, clean, &mut grad).unwrap();
            }
            model.sgd_step(&grad, cfg.lr).unwrap();
        }
    }
}

#[test]
fn single_type_without_diversity_is_vanilla_at() {
    let data = blobs(400, 40, 8, 3);
    for (norm, eps, loss) in [
        (Norm::Linf, 0.1, LossKind::CrossEntropy),
        (Norm::L2, 0.5, LossKind::cw_default()),
        (Norm::L1, 1.0, LossKind::CrossEntropy),
    ] {
        let init = MlpModel::init(&[8, 10, 3], &mut SeededRng::new(401)).unwrap();
        let cfg = AtConfig {
            epochs: 2,
            batch: 7,
            inner_steps: 5,
            seed: 402,
            loss,
            ..AtConfig::new(vec![AttackType::new(norm, eps)])
        };
        let mut a = init.clone();
        let trace = ampgd_train(&mut a, &data, &cfg).unwrap();
        let mut b = init.clone();
        vanilla_at(&mut b, &data, &cfg);
        assert_eq!(a.params(), b.params(), "{norm}");
        assert_ne!(a.params(), init.params());
        assert!(trace.batch_weights.iter().flatten().all(|w| w == &[1.0]));
    }
}

#[test]
fn inner_objective_is_non_decreasing_on_concave_quadratic() {
    // f_n(δ) = b_n − ½‖δ − c_n‖² is concave; the target c_n sits inside one
    // set and outside the other.
    let d = 4;
    let targets: Vec<Vec<f64>> = vec![vec![0.05, -0.02, 0.03, 0.0], vec![0.3, 0.3, -0.3, 0.2], vec![-0.1, 0.0, 0.02, 0.04]];
    let offsets = [0.4, -0.2, 0.1];
    let loss = |n: usize, delta: &[f64]| -> minmax_core::Result<(f64, Vec<f64>)> {
        let g: Vec<f64> = delta.iter().zip(&targets[n]).map(|(x, c)| c - x).collect();
        let v = offsets[n] - 0.5 * g.iter().map(|x| x * x).sum::<f64>();
        Ok((v, g))
    };
    let types = vec![AttackType::new(Norm::Linf, 0.1), AttackType::new(Norm::L2, 0.4)];
    let sets: Vec<Vec<ConstraintSet<f64>>> = types
        .iter()
        .map(|t| (0..targets.len()).map(|_| ConstraintSet::with_symmetric_box(t.norm, t.eps, d, 1.0).unwrap()).collect())
        .collect();
    for gamma in [0.5, 4.0] {
        let cfg = AtConfig { gamma, delta_lr: 0.2, weight_lr: 0.02, inner_steps: 50, ..AtConfig::new(types.clone()) };
        let res = inner_maximize_with(&sets, loss, &cfg).unwrap();
        for r in 1..res.trace.objective.len() {
            assert!(
                res.trace.objective[r] >= res.trace.objective[r - 1] - 1e-12,
                "gamma {gamma}, round {r}: {:?}",
                &res.trace.objective[r - 1..=r]
            );
        }
        assert!(res.trace.weights.iter().all(|w| Simplex::new(2).contains(w)));
    }
}

#[test]
fn ascent_improves_most_batches() {
    let data = blobs(403, 96, 10, 3);
    let mut model = MlpModel::init(&[10, 16, 3], &mut SeededRng::new(404)).unwrap();
    let cfg = AtConfig {
        epochs: 3,
        batch: 8,
        seed: 405,
        ..AtConfig::new(vec![AttackType::new(Norm::Linf, 0.1), AttackType::new(Norm::L2, 0.5)])
    };
    let trace = ampgd_train(&mut model, &data, &cfg).unwrap();
    let improved = trace.ascent.iter().filter(|(start, end)| end >= start).count();
    assert!(improved as f64 >= 0.95 * trace.ascent.len() as f64, "{improved}/{}", trace.ascent.len());
}

#[test]
fn diversity_term_keeps_iterates_feasible_and_is_non_positive() {
    let data = blobs(406, 12, 6, 3);
    let model = MlpModel::init(&[6, 12, 3], &mut SeededRng::new(407)).unwrap();
    let types = vec![AttackType::new(Norm::Linf, 0.1), AttackType::new(Norm::L2, 0.4), AttackType::new(Norm::L1, 1.0)];
    let cfg = AtConfig { lambda: 0.1, inner_steps: 10, ..AtConfig::new(types.clone()) };
    let batch: Vec<(&[f64], usize)> = data.iter().take(6).collect();
    let res = inner_maximize(&model, &batch, &cfg).unwrap();
    for (i, t) in types.iter().enumerate() {
        for (n, &(x, _)) in batch.iter().enumerate() {
            assert!(t.constraint_for(x).unwrap().contains(&res.deltas[i][n], 1e-9));
        }
    }
    // With λ > 0 the objective includes log det ≤ 0, so it sits below the
    // λ = 0 value at the same point.
    let plain = AtConfig { lambda: 0.0, ..cfg.clone() };
    let (x, y) = batch[0];
    let ds: Vec<Vec<f64>> = (0..3).map(|i| res.deltas[i][0].clone()).collect();
    let with = at_objective(&model, x, y, &res.weights, &ds, &cfg).unwrap();
    let without = at_objective(&model, x, y, &res.weights, &ds, &plain).unwrap();
    assert!(with <= without);
}

#[test]
fn training_is_deterministic_in_seed() {
    let data = blobs(408, 30, 6, 3);
    let init = MlpModel::init(&[6, 8, 3], &mut SeededRng::new(409)).unwrap();
    let cfg = AtConfig {
        epochs: 2,
        batch: 6,
        inner_steps: 4,
        lambda: 0.1,
        seed: 410,
        ..AtConfig::new(vec![AttackType::new(Norm::Linf, 0.1), AttackType::new(Norm::L2, 0.3)])
    };
    let (mut a, mut b) = (init.clone(), init);
    let ta = ampgd_train(&mut a, &data, &cfg).unwrap();
    let tb = ampgd_train(&mut b, &data, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ta, tb);
}
