use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{adam_step, AdamParams, AdamState, Gradients, ToyNet};
use crate::raster::{BinaryMask, ProbabilityMap};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lambda: f64,
    pub steps: usize,
    pub rng_seed: u64,
    pub adam: AdamParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 4,
            lambda: 0.0,
            steps: 100,
            rng_seed: 0,
            adam: AdamParams::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter(
                "batch_size must be positive".into(),
            ));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be a finite non-negative number, got {}",
                self.lambda
            )));
        }
        self.adam.validate()
    }
}

/// Mean batch loss before the update at `step`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossRecord {
    pub step: usize,
    pub bce: f64,
    pub penalty: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: ToyNet,
    pub state: AdamState,
    pub trace: Vec<LossRecord>,
}

/// Mini-batch Adam on `bce + λ‖w‖²`.
///
/// Samples are visited in a fresh seeded shuffle each epoch and batches may
/// straddle epoch boundaries. Pass `state` to resume an optimizer.
pub fn train(
    mut net: ToyNet,
    state: Option<AdamState>,
    data: &[(ProbabilityMap, BinaryMask)],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    net.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    let mut state = state.unwrap_or_else(|| AdamState::new(&net));
    state.check_matches(&net)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut cursor = order.len();
    let mut trace = Vec::with_capacity(cfg.steps);
    let scale = 1.0 / cfg.batch_size as f64;

    for step in 0..cfg.steps {
        let mut grads: Option<Gradients> = None;
        let mut bce = 0.0;
        for _ in 0..cfg.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let (img, gt) = &data[order[cursor]];
            cursor += 1;
            let (g, b) = net.data_gradient(img, gt, scale)?;
            bce += b * scale;
            match grads.as_mut() {
                Some(acc) => acc.accumulate(&g),
                None => grads = Some(g),
            }
        }
        let mut grads = grads.expect("batch_size is positive");
        grads.add_penalty(&net, cfg.lambda);
        let penalty = net.penalty(cfg.lambda);
        trace.push(LossRecord {
            step,
            bce,
            penalty,
            total: bce + penalty,
        });
        adam_step(&mut net, &mut state, &grads, &cfg.adam)?;
    }
    Ok(TrainOutcome { net, state, trace })
}
