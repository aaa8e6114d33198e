use alloc::format;
use alloc::vec::Vec;

use super::{Gradients, LayerGrad, LayerId, ToyNet};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "bad Adam parameters {self:?}"
            )))
        }
    }
}

/// First and second moment estimates for every layer.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<LayerGrad>,
    pub v: Vec<LayerGrad>,
}

impl AdamState {
    pub fn new(net: &ToyNet) -> Self {
        let zeros: Vec<LayerGrad> = LayerId::ALL
            .iter()
            .map(|&id| {
                let l = net.layer(id);
                LayerGrad {
                    kernel: alloc::vec![0.0; l.kernel().len()],
                    bias: alloc::vec![0.0; l.bias().len()],
                }
            })
            .collect();
        Self {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn check_matches(&self, net: &ToyNet) -> Result<()> {
        if self.m.len() != LayerId::ALL.len() || self.v.len() != LayerId::ALL.len() {
            return Err(Error::Shape(
                "optimizer state has the wrong layer count".into(),
            ));
        }
        for id in LayerId::ALL {
            let l = net.layer(id);
            for s in [&self.m[id.index()], &self.v[id.index()]] {
                if s.kernel.len() != l.kernel().len() || s.bias.len() != l.bias().len() {
                    return Err(Error::Shape(format!(
                        "optimizer state for {} does not match the layer",
                        id.name()
                    )));
                }
            }
        }
        Ok(())
    }
}

fn update(
    w: &mut [f64],
    g: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    p: &AdamParams,
    c1: f64,
    c2: f64,
) {
    for i in 0..w.len() {
        m[i] = p.beta1 * m[i] + (1.0 - p.beta1) * g[i];
        v[i] = p.beta2 * v[i] + (1.0 - p.beta2) * g[i] * g[i];
        let mh = m[i] / c1;
        let vh = v[i] / c2;
        w[i] -= p.learning_rate * mh / (libm::sqrt(vh) + p.epsilon);
    }
}

/// One bias-corrected Adam update of the trainable layers.
///
/// Frozen layers are left untouched, as are their moment estimates.
pub fn adam_step(
    net: &mut ToyNet,
    state: &mut AdamState,
    grads: &Gradients,
    params: &AdamParams,
) -> Result<()> {
    state.check_matches(net)?;
    for id in LayerId::ALL {
        let trainable = net.layer(id).trainable;
        match (trainable, grads.layer(id)) {
            (true, None) => {
                return Err(Error::Shape(format!("missing gradient for {}", id.name())));
            }
            (true, Some(g)) => {
                let l = net.layer(id);
                if g.kernel.len() != l.kernel().len() || g.bias.len() != l.bias().len() {
                    return Err(Error::Shape(format!(
                        "gradient shape mismatch for {}",
                        id.name()
                    )));
                }
            }
            _ => {}
        }
    }
    state.step += 1;
    let t = state.step as f64;
    let c1 = 1.0 - libm::pow(params.beta1, t);
    let c2 = 1.0 - libm::pow(params.beta2, t);
    for id in LayerId::ALL {
        if !net.layer(id).trainable {
            continue;
        }
        let g = grads.layer(id).expect("checked above");
        let (m, v) = (&mut state.m[id.index()], &mut state.v[id.index()]);
        let layer = net.layer_mut(id);
        update(
            layer.kernel_mut(),
            &g.kernel,
            &mut m.kernel,
            &mut v.kernel,
            params,
            c1,
            c2,
        );
        update(
            layer.bias_mut(),
            &g.bias,
            &mut m.bias,
            &mut v.bias,
            params,
            c1,
            c2,
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{Grid, ProbabilityMap};

    #[test]
    fn first_step_moves_by_learning_rate() {
        // With bias correction the first update is lr · sign(g) for |g| ≫ ε.
        let mut net = ToyNet::random(1);
        let before = net.clone();
        let img = ProbabilityMap::new(8, 8, (0..64).map(|i| i as f64 / 64.0).collect()).unwrap();
        let gt = Grid::from_fn(8, 8, |r, c| r == c);
        let g = net.backward(&img, &gt, 0.0).unwrap();
        let mut st = AdamState::new(&net);
        let p = AdamParams::default();
        adam_step(&mut net, &mut st, &g, &p).unwrap();
        let b = g.layer(LayerId::Head).unwrap().bias[0];
        let moved = before.layer(LayerId::Head).bias()[0] - net.layer(LayerId::Head).bias()[0];
        assert!((moved - p.learning_rate * b.signum()).abs() < 1e-9);
    }

    #[test]
    fn frozen_layer_is_bitwise_unchanged() {
        let mut net = ToyNet::random(2);
        net.set_trainable(LayerId::Enc1, false);
        let before = net.layer(LayerId::Enc1).clone();
        let img = ProbabilityMap::filled(8, 8, 0.3).unwrap();
        let gt = Grid::from_fn(8, 8, |_, c| c == 2);
        let mut st = AdamState::new(&net);
        for _ in 0..3 {
            let g = net.backward(&img, &gt, 1e-2).unwrap();
            adam_step(&mut net, &mut st, &g, &AdamParams::default()).unwrap();
        }
        let after = net.layer(LayerId::Enc1);
        assert!(before
            .kernel()
            .iter()
            .zip(after.kernel())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!(st.m[0].kernel.iter().all(|&m| m == 0.0));
        assert_eq!(st.step, 3);
    }

    #[test]
    fn missing_gradient_is_an_error() {
        let mut frozen = ToyNet::random(3);
        frozen.set_trainable(LayerId::Head, false);
        let img = ProbabilityMap::filled(4, 4, 0.5).unwrap();
        let gt = Grid::filled(4, 4, false);
        let g = frozen.backward(&img, &gt, 0.0).unwrap();
        let mut net = ToyNet::random(3);
        let mut st = AdamState::new(&net);
        assert!(adam_step(&mut net, &mut st, &g, &AdamParams::default()).is_err());
    }
}
