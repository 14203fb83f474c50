//! Mini-batch training loop shared by the extractor and the classifier.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::graph::{Grads, ParamStore};
use super::optim::{clip_grad_norm, Adam, LinearSchedule};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSpec {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub warmup_fraction: f64,
    pub max_grad_norm: f64,
    pub seed: u64,
}

/// Run Adam over shuffled mini-batches; per-example losses and gradients come
/// from `loss_fn` and are computed in parallel. Returns the mean example
/// loss of each epoch.
pub fn train_loop<T, F>(store: &mut ParamStore, items: &[T], spec: &TrainSpec, loss_fn: F) -> Vec<f64>
where
    T: Sync,
    F: Fn(&ParamStore, &T) -> (f64, Grads) + Sync,
{
    if items.is_empty() || spec.epochs == 0 {
        return Vec::new();
    }
    let batch = spec.batch_size.max(1);
    let steps_per_epoch = items.len().div_ceil(batch);
    let schedule = LinearSchedule::new(spec.learning_rate, spec.warmup_fraction, steps_per_epoch * spec.epochs);
    let mut adam = Adam::new(store);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut step = 0;
    let mut epoch_losses = Vec::with_capacity(spec.epochs);
    for epoch in 0..spec.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch) {
            let frozen: &ParamStore = store;
            // collected in order so the gradient sum is deterministic
            let results: Vec<(f64, Grads)> = chunk.par_iter().map(|&i| loss_fn(frozen, &items[i])).collect();
            let mut grads = Grads::new(store.len());
            for (loss, g) in &results {
                total += loss;
                grads.merge(g);
            }
            grads.scale(1.0 / chunk.len() as f32);
            clip_grad_norm(&mut grads, spec.max_grad_norm);
            adam.step(store, &grads, schedule.lr_at(step));
            step += 1;
        }
        let mean = total / items.len() as f64;
        log::info!("epoch {}/{}: mean loss {mean:.4}", epoch + 1, spec.epochs);
        epoch_losses.push(mean);
    }
    epoch_losses
}
