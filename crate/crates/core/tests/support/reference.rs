//! Channel-major reference implementation of the toy network and a
//! finite-difference gradient check built on it.

#![allow(dead_code, clippy::needless_range_loop)]

use gbeval_core::toynet::{ConvLayer, LayerId, ToyNet};
use gbeval_core::{BinaryMask, Grid, ProbabilityMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Chw = Vec<Vec<Vec<f64>>>;

pub fn conv(layer: &ConvLayer, x: &Chw) -> Chw {
    let (h, w) = (x[0].len(), x[0][0].len());
    let k = layer.kernel_size() as isize;
    let pad = k / 2;
    let mut out = vec![vec![vec![0.0; w]; h]; layer.out_channels()];
    for (co, plane) in out.iter_mut().enumerate() {
        for r in 0..h {
            for c in 0..w {
                let mut s = layer.bias()[co];
                for ky in 0..k {
                    for kx in 0..k {
                        let sr = r as isize + ky - pad;
                        let sc = c as isize + kx - pad;
                        if sr < 0 || sc < 0 || sr >= h as isize || sc >= w as isize {
                            continue;
                        }
                        for (ci, xin) in x.iter().enumerate() {
                            s += layer.weight(ky as usize, kx as usize, ci, co)
                                * xin[sr as usize][sc as usize];
                        }
                    }
                }
                plane[r][c] = s;
            }
        }
    }
    out
}

/// Records which side of every ReLU and pooling kink the input lies on.
#[derive(PartialEq, Default)]
pub struct Pattern(pub Vec<bool>, pub Vec<usize>);

pub fn relu(x: &Chw, pat: &mut Pattern) -> Chw {
    x.iter()
        .map(|p| {
            p.iter()
                .map(|row| {
                    row.iter()
                        .map(|&v| {
                            pat.0.push(v > 0.0);
                            v.max(0.0)
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

pub fn pool(x: &Chw, pat: &mut Pattern) -> Chw {
    x.iter()
        .map(|p| {
            (0..p.len() / 2)
                .map(|r| {
                    (0..p[0].len() / 2)
                        .map(|c| {
                            let cand = [
                                p[2 * r][2 * c],
                                p[2 * r][2 * c + 1],
                                p[2 * r + 1][2 * c],
                                p[2 * r + 1][2 * c + 1],
                            ];
                            let mut best = 0;
                            for i in 1..4 {
                                if cand[i] > cand[best] {
                                    best = i;
                                }
                            }
                            pat.1.push(best);
                            cand[best]
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

pub fn upsample(x: &Chw) -> Chw {
    x.iter()
        .map(|p| {
            (0..p.len() * 2)
                .map(|r| (0..p[0].len() * 2).map(|c| p[r / 2][c / 2]).collect())
                .collect()
        })
        .collect()
}

pub fn reference_forward(net: &ToyNet, img: &ProbabilityMap) -> (Vec<f64>, Pattern) {
    let (h, w) = (img.height(), img.width());
    let x: Chw = vec![(0..h)
        .map(|r| (0..w).map(|c| img.values()[r * w + c]).collect())
        .collect()];
    let mut pat = Pattern::default();
    let a1 = relu(&conv(net.layer(LayerId::Enc1), &x), &mut pat);
    let p = pool(&a1, &mut pat);
    let a2 = relu(&conv(net.layer(LayerId::Enc2), &p), &mut pat);
    let mut cat = a1.clone();
    cat.extend(upsample(&a2));
    let a3 = relu(&conv(net.layer(LayerId::Dec1), &cat), &mut pat);
    let z = conv(net.layer(LayerId::Head), &a3);
    let y = z[0]
        .iter()
        .flatten()
        .map(|&v| 1.0 / (1.0 + (-v).exp()))
        .collect();
    (y, pat)
}

pub fn reference_objective(
    net: &ToyNet,
    img: &ProbabilityMap,
    gt: &BinaryMask,
    lambda: f64,
) -> (f64, Pattern) {
    let (y, pat) = reference_forward(net, img);
    let eps = 1e-7;
    let bce: f64 = y
        .iter()
        .zip(gt.as_slice())
        .map(|(&p, &t)| {
            let p = p.clamp(eps, 1.0 - eps);
            if t {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum::<f64>()
        / y.len() as f64;
    let mut sq = 0.0;
    for id in LayerId::ALL {
        for w in net.layer(id).kernel() {
            sq += w * w;
        }
    }
    (bce + lambda * sq, pat)
}

pub fn fixture(seed: u64, n: usize) -> (ProbabilityMap, BinaryMask) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let img = ProbabilityMap::new(n, n, (0..n * n).map(|_| rng.gen()).collect()).unwrap();
    let gt = Grid::from_vec(n, n, (0..n * n).map(|_| rng.gen_bool(0.3)).collect()).unwrap();
    (img, gt)
}

/// Relative error with a floor so that entries which are zero up to
/// rounding do not dominate.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-7)
}

pub struct Check {
    pub max_rel: f64,
    pub checked: usize,
    /// Parameters that needed a step below 1e-4 to stay off a kink.
    pub shrunk: usize,
}

pub fn gradient_check(net: &ToyNet, img: &ProbabilityMap, gt: &BinaryMask, lambda: f64) -> Check {
    let grads = net.backward(img, gt, lambda).unwrap();
    let mut out = Check {
        max_rel: 0.0,
        checked: 0,
        shrunk: 0,
    };
    for id in net.trainable_layers() {
        let g = grads.layer(id).unwrap();
        let nk = net.layer(id).kernel().len();
        for i in 0..nk + net.layer(id).bias().len() {
            let eval = |delta: f64| {
                let mut p = net.clone();
                let l = p.layer_mut(id);
                if i < nk {
                    l.kernel_mut()[i] += delta;
                } else {
                    l.bias_mut()[i - nk] += delta;
                }
                reference_objective(&p, img, gt, lambda)
            };
            // Step down until both probes see the same ReLU and pooling pattern.
            let mut numeric = None;
            for (k, h) in [1e-4, 1e-5, 1e-6].into_iter().enumerate() {
                let (fp, pp) = eval(h);
                let (fm, pm) = eval(-h);
                if pp == pm {
                    numeric = Some((fp - fm) / (2.0 * h));
                    out.shrunk += usize::from(k > 0);
                    break;
                }
            }
            let numeric = numeric.expect("parameter sits on a kink");
            let analytic = if i < nk { g.kernel[i] } else { g.bias[i - nk] };
            out.max_rel = out.max_rel.max(rel_err(analytic, numeric));
            out.checked += 1;
        }
    }
    out
}
