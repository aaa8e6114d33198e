//! Toy network checkpoints and the built-in training fixture.

use std::path::Path;

use gbeval_core::synth::{soften, voronoi_grains, SynthSpec};
use gbeval_core::toynet::{AdamState, LayerId, ToyNet, TrainConfig};
use gbeval_core::{BinaryMask, ProbabilityMap};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub kernel_size: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

/// Architecture description stored alongside the weights.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSpec {
    pub name: String,
    pub layers: Vec<LayerSpec>,
}

impl NetSpec {
    pub fn current() -> Self {
        Self {
            name: "toy-unet".into(),
            layers: LayerId::ALL
                .iter()
                .map(|&id| {
                    let (k, i, o) = id.shape();
                    LayerSpec {
                        name: id.name().into(),
                        kernel_size: k,
                        in_channels: i,
                        out_channels: o,
                    }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub spec: NetSpec,
    /// Per-layer kernels, biases and trainable flags.
    pub net: ToyNet,
    pub adam: AdamState,
    pub step: u64,
    pub train: TrainConfig,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        crate::report::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        let ck: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        if ck.spec != NetSpec::current() {
            return Err(Error::Data(format!(
                "{}: checkpoint was written for a different architecture",
                path.display()
            )));
        }
        ck.net.validate().map_err(Error::core(path.display()))?;
        ck.adam
            .check_matches(&ck.net)
            .map_err(Error::core(path.display()))?;
        Ok(ck)
    }
}

/// Small Voronoi masks paired with softened copies of themselves as inputs.
pub fn toy_fixture(
    count: usize,
    size: usize,
    seed: u64,
) -> Result<Vec<(ProbabilityMap, BinaryMask)>> {
    (0..count as u64)
        .map(|i| {
            let spec = SynthSpec {
                boundary_thickness: 2,
                draw_frame: false,
                ..SynthSpec::new(size, size, 4, seed.wrapping_add(i))
            };
            let truth = voronoi_grains(&spec).map_err(Error::core("toy fixture"))?;
            let img = soften(&truth.annotation, 0.5, 0.15, seed.wrapping_add(i) ^ 0xa5a5)
                .map_err(Error::core("toy fixture"))?;
            Ok((img, truth.annotation))
        })
        .collect()
}
