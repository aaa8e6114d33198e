use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Channels-last activation tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), height * width * channels);
        Self {
            height,
            width,
            channels,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> usize {
        (r * self.width + c) * self.channels
    }

    pub fn get(&self, r: usize, c: usize, ch: usize) -> f64 {
        self.data[self.at(r, c) + ch]
    }

    pub(crate) fn relu(&self) -> Self {
        Self {
            data: self.data.iter().map(|&v| v.max(0.0)).collect(),
            ..*self
        }
    }

    /// Masks `self` (a gradient) by the positive part of `pre`.
    pub(crate) fn relu_backward(&self, pre: &FeatureMap) -> Self {
        Self {
            data: self
                .data
                .iter()
                .zip(&pre.data)
                .map(|(&g, &z)| if z > 0.0 { g } else { 0.0 })
                .collect(),
            ..*self
        }
    }

    /// 2×2 max pooling; also returns the flat source index of every output.
    pub(crate) fn max_pool2(&self) -> (Self, Vec<usize>) {
        let (h, w, ch) = (self.height / 2, self.width / 2, self.channels);
        let mut out = Self::zeros(h, w, ch);
        let mut argmax = vec![0usize; h * w * ch];
        for r in 0..h {
            for c in 0..w {
                for k in 0..ch {
                    let mut best = self.at(2 * r, 2 * c) + k;
                    for (dr, dc) in [(0, 1), (1, 0), (1, 1)] {
                        let i = self.at(2 * r + dr, 2 * c + dc) + k;
                        if self.data[i] > self.data[best] {
                            best = i;
                        }
                    }
                    let o = out.at(r, c) + k;
                    out.data[o] = self.data[best];
                    argmax[o] = best;
                }
            }
        }
        (out, argmax)
    }

    pub(crate) fn max_pool2_backward(&self, argmax: &[usize], height: usize, width: usize) -> Self {
        let mut out = Self::zeros(height, width, self.channels);
        for (g, &src) in self.data.iter().zip(argmax) {
            out.data[src] += g;
        }
        out
    }

    pub(crate) fn upsample2(&self) -> Self {
        let mut out = Self::zeros(self.height * 2, self.width * 2, self.channels);
        for r in 0..out.height {
            for c in 0..out.width {
                let src = self.at(r / 2, c / 2);
                let dst = out.at(r, c);
                out.data[dst..dst + self.channels]
                    .copy_from_slice(&self.data[src..src + self.channels]);
            }
        }
        out
    }

    pub(crate) fn upsample2_backward(&self) -> Self {
        let mut out = Self::zeros(self.height / 2, self.width / 2, self.channels);
        for r in 0..self.height {
            for c in 0..self.width {
                let src = self.at(r, c);
                let dst = out.at(r / 2, c / 2);
                for k in 0..self.channels {
                    out.data[dst + k] += self.data[src + k];
                }
            }
        }
        out
    }

    /// Channel concatenation `[self, other]`.
    pub(crate) fn concat(&self, other: &FeatureMap) -> Self {
        let ch = self.channels + other.channels;
        let mut data = Vec::with_capacity(self.height * self.width * ch);
        for (a, b) in self
            .data
            .chunks_exact(self.channels)
            .zip(other.data.chunks_exact(other.channels))
        {
            data.extend_from_slice(a);
            data.extend_from_slice(b);
        }
        Self::from_vec(self.height, self.width, ch, data)
    }

    pub(crate) fn split_channels(&self, first: usize) -> (Self, Self) {
        let second = self.channels - first;
        let mut a = Vec::with_capacity(self.height * self.width * first);
        let mut b = Vec::with_capacity(self.height * self.width * second);
        for px in self.data.chunks_exact(self.channels) {
            a.extend_from_slice(&px[..first]);
            b.extend_from_slice(&px[first..]);
        }
        (
            Self::from_vec(self.height, self.width, first, a),
            Self::from_vec(self.height, self.width, second, b),
        )
    }

    pub(crate) fn add_assign(&mut self, other: &FeatureMap) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// Square convolution with zero "same" padding.
///
/// Kernel layout is `[ky][kx][in][out]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConvLayer {
    kernel_size: usize,
    in_channels: usize,
    out_channels: usize,
    kernel: Vec<f64>,
    bias: Vec<f64>,
    pub trainable: bool,
}

impl ConvLayer {
    pub fn zeros(kernel_size: usize, in_channels: usize, out_channels: usize) -> Self {
        Self {
            kernel_size,
            in_channels,
            out_channels,
            kernel: vec![0.0; kernel_size * kernel_size * in_channels * out_channels],
            bias: vec![0.0; out_channels],
            trainable: true,
        }
    }

    pub(crate) fn check_shape(&self, k: usize, i: usize, o: usize) -> Result<()> {
        if (self.kernel_size, self.in_channels, self.out_channels) != (k, i, o) {
            return Err(Error::Shape(format!(
                "expected {k}x{k} kernel {i}->{o}, found {0}x{0} kernel {1}->{2}",
                self.kernel_size, self.in_channels, self.out_channels
            )));
        }
        if self.kernel.len() != k * k * i * o || self.bias.len() != o {
            return Err(Error::Shape("parameter array lengths do not match".into()));
        }
        if self.kernel.iter().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(Error::Shape("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }
    pub fn in_channels(&self) -> usize {
        self.in_channels
    }
    pub fn out_channels(&self) -> usize {
        self.out_channels
    }
    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }
    pub fn kernel_mut(&mut self) -> &mut [f64] {
        &mut self.kernel
    }
    pub fn bias(&self) -> &[f64] {
        &self.bias
    }
    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn fan_in(&self) -> usize {
        self.kernel_size * self.kernel_size * self.in_channels
    }

    #[inline]
    pub fn weight_index(&self, ky: usize, kx: usize, ci: usize, co: usize) -> usize {
        ((ky * self.kernel_size + kx) * self.in_channels + ci) * self.out_channels + co
    }

    pub fn weight(&self, ky: usize, kx: usize, ci: usize, co: usize) -> f64 {
        self.kernel[self.weight_index(ky, kx, ci, co)]
    }

    /// Iterates `(output offset, input row, input col, ky, kx)` for in-bounds taps.
    fn taps(
        &self,
        h: usize,
        w: usize,
        r: usize,
        c: usize,
    ) -> impl Iterator<Item = (usize, usize, usize, usize)> + '_ {
        let pad = self.kernel_size / 2;
        let k = self.kernel_size;
        (0..k)
            .flat_map(move |ky| (0..k).map(move |kx| (ky, kx)))
            .filter_map(move |(ky, kx)| {
                let sr = (r + ky).checked_sub(pad)?;
                let sc = (c + kx).checked_sub(pad)?;
                (sr < h && sc < w).then_some((sr, sc, ky, kx))
            })
    }

    pub(crate) fn forward(&self, x: &FeatureMap) -> FeatureMap {
        debug_assert_eq!(x.channels, self.in_channels);
        let (h, w) = (x.height, x.width);
        let (ci_n, co_n) = (self.in_channels, self.out_channels);
        let mut out = FeatureMap::zeros(h, w, co_n);
        for r in 0..h {
            for c in 0..w {
                let o = out.at(r, c);
                let acc = &mut out.data[o..o + co_n];
                acc.copy_from_slice(&self.bias);
                for (sr, sc, ky, kx) in self.taps(h, w, r, c) {
                    let xi = x.at(sr, sc);
                    for ci in 0..ci_n {
                        let xv = x.data[xi + ci];
                        let wi = self.weight_index(ky, kx, ci, 0);
                        for (a, &wv) in acc.iter_mut().zip(&self.kernel[wi..wi + co_n]) {
                            *a += xv * wv;
                        }
                    }
                }
            }
        }
        out
    }

    /// Returns `(kernel grad, bias grad, input grad)`, each only if requested.
    pub(crate) fn backward(
        &self,
        x: &FeatureMap,
        dz: &FeatureMap,
        want_params: bool,
        want_input: bool,
    ) -> (Option<Vec<f64>>, Option<Vec<f64>>, Option<FeatureMap>) {
        let (h, w) = (x.height, x.width);
        let (ci_n, co_n) = (self.in_channels, self.out_channels);
        let mut gk = want_params.then(|| vec![0.0; self.kernel.len()]);
        let mut gb = want_params.then(|| vec![0.0; co_n]);
        let mut dx = want_input.then(|| FeatureMap::zeros(h, w, ci_n));
        for r in 0..h {
            for c in 0..w {
                let o = dz.at(r, c);
                let g = &dz.data[o..o + co_n];
                if let Some(gb) = gb.as_mut() {
                    for (b, &v) in gb.iter_mut().zip(g) {
                        *b += v;
                    }
                }
                for (sr, sc, ky, kx) in self.taps(h, w, r, c) {
                    let xi = x.at(sr, sc);
                    for ci in 0..ci_n {
                        let wi = self.weight_index(ky, kx, ci, 0);
                        if let Some(gk) = gk.as_mut() {
                            let xv = x.data[xi + ci];
                            for (k, &v) in gk[wi..wi + co_n].iter_mut().zip(g) {
                                *k += xv * v;
                            }
                        }
                        if let Some(dx) = dx.as_mut() {
                            let s: f64 = self.kernel[wi..wi + co_n]
                                .iter()
                                .zip(g)
                                .map(|(a, b)| a * b)
                                .sum();
                            dx.data[xi + ci] += s;
                        }
                    }
                }
            }
        }
        (gk, gb, dx)
    }
}
