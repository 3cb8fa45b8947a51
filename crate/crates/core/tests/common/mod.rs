#![allow(dead_code)]

use std::sync::Arc;

use pike_core::dynamics::{self, Region, SystemSpec};
use pike_core::{EmbeddingMode, FittedEmbedding, KernelSpec, PriorModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Noiseless unicycle fitted on a box around the origin.
pub fn unicycle_embedding(m: usize, mode: EmbeddingMode, seed: u64) -> (FittedEmbedding, SystemSpec) {
    let system = SystemSpec::unicycle(0.1, None);
    let states = Region::new(vec![-1.0, -1.0, -0.5], vec![1.0, 1.0, 2.0]).unwrap();
    let actions = Region::new(vec![0.0, -2.0], vec![1.0, 2.0]).unwrap();
    let data = dynamics::sample_transitions(&system, &states, Some(&actions), m, &mut rng(seed)).unwrap();
    let prior: Arc<dyn PriorModel> = Arc::new(system.prior());
    let emb = FittedEmbedding::fit(
        data,
        Some(prior),
        KernelSpec::gaussian(0.6).unwrap(),
        KernelSpec::gaussian(0.8).unwrap(),
        1e-3,
        mode,
    )
    .unwrap();
    (emb, system)
}

/// Unicycle data paired with a deliberately wrong prior (speed scaled by 0.7).
pub fn biased_unicycle_embedding(m: usize, seed: u64) -> FittedEmbedding {
    let system = SystemSpec::unicycle(0.1, None);
    let states = Region::new(vec![-1.0, -1.0, -0.5], vec![1.0, 1.0, 2.0]).unwrap();
    let actions = Region::new(vec![0.0, -2.0], vec![1.0, 2.0]).unwrap();
    let data = dynamics::sample_transitions(&system, &states, Some(&actions), m, &mut rng(seed)).unwrap();
    let prior: Arc<dyn PriorModel> = Arc::new(pike_core::embedding::FnPrior(|x: &[f64], u: &[f64]| {
        let th = x[2] + 0.1 * u[1];
        vec![x[0] + 0.07 * u[0] * th.cos(), x[1] + 0.07 * u[0] * th.sin(), th]
    }));
    FittedEmbedding::fit(
        data,
        Some(prior),
        KernelSpec::gaussian(0.6).unwrap(),
        KernelSpec::gaussian(0.8).unwrap(),
        1e-3,
        EmbeddingMode::PhysicsInformed,
    )
    .unwrap()
}
