//! A miniature U-Net trained with `BCE + λ‖w‖²`.
//!
//! Topology (all 3×3 convolutions use zero "same" padding):
//!
//! ```text
//! input (H×W×1)
//!   enc1: conv3×3 1→8, ReLU ───────────────┐
//!   pool: 2×2 max                           │ skip
//!   enc2: conv3×3 8→16, ReLU                │
//!   up:   2× nearest-neighbour              │
//!   concat(enc1, up) → 24 channels ◄────────┘
//!   dec1: conv3×3 24→8, ReLU
//!   head: conv1×1 8→1, sigmoid
//! ```
//!
//! The L2 penalty covers kernel weights of every layer, frozen or not, and
//! never biases. Frozen layers receive no gradient and are never updated.

mod adam;
mod layers;
mod train;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

pub use adam::{adam_step, AdamParams, AdamState};
pub use layers::{ConvLayer, FeatureMap};
pub use train::{train, LossRecord, TrainConfig, TrainOutcome};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::metrics::{bce_sum, BCE_EPSILON};
use crate::raster::{BinaryMask, ProbabilityMap};
use crate::{Error, Result};

/// Layer identifiers, shallowest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LayerId {
    Enc1,
    Enc2,
    Dec1,
    Head,
}

impl LayerId {
    pub const ALL: [LayerId; 4] = [LayerId::Enc1, LayerId::Enc2, LayerId::Dec1, LayerId::Head];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            LayerId::Enc1 => "enc1",
            LayerId::Enc2 => "enc2",
            LayerId::Dec1 => "dec1",
            LayerId::Head => "head",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.name() == name)
    }

    /// `(kernel size, input channels, output channels)`.
    pub fn shape(self) -> (usize, usize, usize) {
        match self {
            LayerId::Enc1 => (3, 1, 8),
            LayerId::Enc2 => (3, 8, 16),
            LayerId::Dec1 => (3, 24, 8),
            LayerId::Head => (1, 8, 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ToyNet {
    layers: Vec<ConvLayer>,
}

impl ToyNet {
    /// Every weight and bias zero; the output is 0.5 everywhere.
    pub fn zeros() -> Self {
        Self {
            layers: LayerId::ALL
                .iter()
                .map(|&id| {
                    let (k, i, o) = id.shape();
                    ConvLayer::zeros(k, i, o)
                })
                .collect(),
        }
    }

    /// He-uniform kernels (bound `sqrt(6 / fan_in)`), zero biases.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Self::zeros();
        for layer in &mut net.layers {
            let bound = libm::sqrt(6.0 / layer.fan_in() as f64);
            for w in layer.kernel_mut() {
                *w = rng.gen_range(-bound..bound);
            }
        }
        net
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.len() != LayerId::ALL.len() {
            return Err(Error::Shape(format!(
                "expected {} layers, found {}",
                LayerId::ALL.len(),
                self.layers.len()
            )));
        }
        for (layer, id) in self.layers.iter().zip(LayerId::ALL) {
            let (k, i, o) = id.shape();
            layer.check_shape(k, i, o).map_err(|e| match e {
                Error::Shape(m) => Error::Shape(format!("{}: {m}", id.name())),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn layer(&self, id: LayerId) -> &ConvLayer {
        &self.layers[id.index()]
    }

    pub fn layer_mut(&mut self, id: LayerId) -> &mut ConvLayer {
        &mut self.layers[id.index()]
    }

    pub fn set_trainable(&mut self, id: LayerId, trainable: bool) {
        self.layers[id.index()].trainable = trainable;
    }

    pub fn trainable_layers(&self) -> Vec<LayerId> {
        LayerId::ALL
            .into_iter()
            .filter(|&id| self.layer(id).trainable)
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.kernel().len() + l.bias().len())
            .sum()
    }

    /// Σ of squared kernel weights over all layers.
    pub fn weight_norm_sq(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.kernel())
            .map(|w| w * w)
            .sum()
    }

    pub fn penalty(&self, lambda: f64) -> f64 {
        lambda * self.weight_norm_sq()
    }

    fn run(&self, image: &ProbabilityMap) -> Result<Activations> {
        let (h, w) = (image.height(), image.width());
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::OddDimensions {
                width: w,
                height: h,
            });
        }
        let x = FeatureMap::from_vec(h, w, 1, image.values().to_vec());
        let z1 = self.layers[0].forward(&x);
        let a1 = z1.relu();
        let (p, argmax) = a1.max_pool2();
        let z2 = self.layers[1].forward(&p);
        let a2 = z2.relu();
        let u = a2.upsample2();
        let cat = a1.concat(&u);
        let z3 = self.layers[2].forward(&cat);
        let a3 = z3.relu();
        let z4 = self.layers[3].forward(&a3);
        let y = z4.data().iter().map(|&z| sigmoid(z)).collect();
        Ok(Activations {
            x,
            z1,
            p,
            argmax,
            z2,
            cat,
            z3,
            a3,
            y,
        })
    }

    /// Predicted boundary probabilities, same size as the input.
    pub fn forward(&self, image: &ProbabilityMap) -> Result<ProbabilityMap> {
        let act = self.run(image)?;
        // Sigmoid can round to exactly 0 or 1 but never leaves [0, 1].
        ProbabilityMap::new(image.width(), image.height(), act.y)
    }

    /// `bce(forward(image), gt) + λ‖w‖²`.
    pub fn objective(&self, image: &ProbabilityMap, gt: &BinaryMask, lambda: f64) -> Result<f64> {
        let pred = self.forward(image)?;
        loss(self, &pred, gt, lambda)
    }

    /// Gradient of `bce + λ‖w‖²` for one sample.
    pub fn backward(
        &self,
        image: &ProbabilityMap,
        gt: &BinaryMask,
        lambda: f64,
    ) -> Result<Gradients> {
        image.grid().check_same_shape(gt)?;
        let (mut g, _) = self.data_gradient(image, gt, 1.0)?;
        g.add_penalty(self, lambda);
        Ok(g)
    }

    /// Gradient of `scale · bce` alone (no penalty), plus the unscaled bce.
    pub(crate) fn data_gradient(
        &self,
        image: &ProbabilityMap,
        gt: &BinaryMask,
        scale: f64,
    ) -> Result<(Gradients, f64)> {
        image.grid().check_same_shape(gt)?;
        let act = self.run(image)?;
        let n = act.y.len() as f64;
        let (h, w) = (image.height(), image.width());
        let bce = bce_sum(&act.y, gt.as_slice()) / n;

        let dz4: Vec<f64> = act
            .y
            .iter()
            .zip(gt.as_slice())
            .map(|(&p, &t)| {
                // The clamp inside BCE is flat outside [ε, 1 − ε].
                if (BCE_EPSILON..=1.0 - BCE_EPSILON).contains(&p) {
                    scale * (p - f64::from(u8::from(t))) / n
                } else {
                    0.0
                }
            })
            .collect();
        let dz4 = FeatureMap::from_vec(h, w, 1, dz4);

        let mut grads = Gradients::empty(self);
        let need = |id: LayerId| self.layer(id).trainable;

        let (gk, gb, da3) = self.layers[3].backward(&act.a3, &dz4, need(LayerId::Head), true);
        grads.set(LayerId::Head, gk, gb);
        let dz3 = da3
            .expect("input gradient requested")
            .relu_backward(&act.z3);

        let (gk, gb, dcat) = self.layers[2].backward(&act.cat, &dz3, need(LayerId::Dec1), true);
        grads.set(LayerId::Dec1, gk, gb);
        let dcat = dcat.expect("input gradient requested");
        let (mut da1, du) = dcat.split_channels(8);

        let dz2 = du.upsample2_backward().relu_backward(&act.z2);
        let (gk, gb, dp) =
            self.layers[1].backward(&act.p, &dz2, need(LayerId::Enc2), need(LayerId::Enc1));
        grads.set(LayerId::Enc2, gk, gb);

        if let Some(dp) = dp {
            da1.add_assign(&dp.max_pool2_backward(&act.argmax, h, w));
            let dz1 = da1.relu_backward(&act.z1);
            let (gk, gb, _) = self.layers[0].backward(&act.x, &dz1, true, false);
            grads.set(LayerId::Enc1, gk, gb);
        }
        Ok((grads, bce))
    }
}

struct Activations {
    x: FeatureMap,
    z1: FeatureMap,
    p: FeatureMap,
    argmax: Vec<usize>,
    z2: FeatureMap,
    cat: FeatureMap,
    z3: FeatureMap,
    a3: FeatureMap,
    y: Vec<f64>,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `bce(pred, gt) + λ · Σ kernel weights²`.
pub fn loss(net: &ToyNet, pred: &ProbabilityMap, gt: &BinaryMask, lambda: f64) -> Result<f64> {
    pred.grid().check_same_shape(gt)?;
    Ok(bce_sum(pred.values(), gt.as_slice()) / pred.len() as f64 + net.penalty(lambda))
}

/// Kernel and bias gradient of one layer.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerGrad {
    pub kernel: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Gradients of trainable layers; frozen layers have no entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    layers: Vec<Option<LayerGrad>>,
}

impl Gradients {
    fn empty(net: &ToyNet) -> Self {
        Self {
            layers: LayerId::ALL
                .iter()
                .map(|&id| {
                    let l = net.layer(id);
                    l.trainable.then(|| LayerGrad {
                        kernel: vec![0.0; l.kernel().len()],
                        bias: vec![0.0; l.bias().len()],
                    })
                })
                .collect(),
        }
    }

    fn set(&mut self, id: LayerId, kernel: Option<Vec<f64>>, bias: Option<Vec<f64>>) {
        if let (Some(slot), Some(kernel), Some(bias)) = (&mut self.layers[id.index()], kernel, bias)
        {
            slot.kernel = kernel;
            slot.bias = bias;
        }
    }

    pub fn layer(&self, id: LayerId) -> Option<&LayerGrad> {
        self.layers[id.index()].as_ref()
    }

    /// Layers that carry gradient entries.
    pub fn support(&self) -> Vec<LayerId> {
        LayerId::ALL
            .into_iter()
            .filter(|id| self.layers[id.index()].is_some())
            .collect()
    }

    /// Number of scalar gradient entries.
    pub fn entry_count(&self) -> usize {
        self.layers
            .iter()
            .flatten()
            .map(|g| g.kernel.len() + g.bias.len())
            .sum()
    }

    pub(crate) fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            if let (Some(a), Some(b)) = (a, b) {
                for (x, y) in a.kernel.iter_mut().zip(&b.kernel) {
                    *x += y;
                }
                for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                    *x += y;
                }
            }
        }
    }

    pub(crate) fn add_penalty(&mut self, net: &ToyNet, lambda: f64) {
        if lambda == 0.0 {
            return;
        }
        for (id, slot) in LayerId::ALL.iter().zip(&mut self.layers) {
            if let Some(g) = slot {
                for (gw, w) in g.kernel.iter_mut().zip(net.layer(*id).kernel()) {
                    *gw += 2.0 * lambda * w;
                }
            }
        }
    }

    /// Largest absolute gradient entry.
    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flatten()
            .flat_map(|g| g.kernel.iter().chain(&g.bias))
            .fold(
                0.0,
                |m, &v| if libm::fabs(v) > m { libm::fabs(v) } else { m },
            )
    }
}
