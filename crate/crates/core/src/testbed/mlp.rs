use rand::Rng;
use rand_distr::StandardNormal;

use crate::numkit::Generator;
use crate::{Error, Result};

/// Fully connected layer with weights stored row-major as `outputs × inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl DenseLayer {
    pub fn new(inputs: usize, outputs: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weights.len() != inputs * outputs {
            return Err(Error::DimensionMismatch { expected: inputs * outputs, found: weights.len() });
        }
        if bias.len() != outputs {
            return Err(Error::DimensionMismatch { expected: outputs, found: bias.len() });
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("layer parameters must be finite".into()));
        }
        Ok(DenseLayer { inputs, outputs, weights, bias })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.bias
                .iter()
                .zip(self.weights.chunks_exact(self.inputs))
                .map(|(b, row)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()),
        );
    }
}

/// Multilayer perceptron with ReLU on every hidden layer and linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layers: Vec<DenseLayer>,
}

/// Activations of one forward pass, kept for backpropagation.
pub(crate) struct ForwardTrace {
    /// `activations[0]` is the input, `activations[l]` the output of layer
    /// `l − 1` after its nonlinearity; the last entry holds the logits.
    activations: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub(crate) fn logits(&self) -> &[f64] {
        self.activations.last().unwrap()
    }
}

impl MlpParams {
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::DimensionMismatch { expected: pair[0].outputs, found: pair[1].inputs });
            }
        }
        Ok(MlpParams { layers })
    }

    fn with_init(dims: &[usize], mut init: impl FnMut(usize, usize) -> (Vec<f64>, Vec<f64>)) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("invalid layer sizes {dims:?}")));
        }
        let layers = dims
            .windows(2)
            .map(|w| {
                let (weights, bias) = init(w[0], w[1]);
                DenseLayer::new(w[0], w[1], weights, bias)
            })
            .collect::<Result<Vec<_>>>()?;
        MlpParams::from_layers(layers)
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        MlpParams::with_init(dims, |i, o| (vec![0.0; i * o], vec![0.0; o]))
    }

    /// Weights `N(0, 1/fan_in)`, zero biases: the random generative family.
    pub fn gaussian(dims: &[usize], g: &mut Generator) -> Result<Self> {
        MlpParams::with_init(dims, |i, o| {
            let sd = (1.0 / i as f64).sqrt();
            ((0..i * o).map(|_| sd * g.sample::<f64, _>(StandardNormal)).collect(), vec![0.0; o])
        })
    }

    /// Weights and biases uniform on `±1/√fan_in`.
    pub fn fan_in_uniform(dims: &[usize], g: &mut Generator) -> Result<Self> {
        MlpParams::with_init(dims, |i, o| {
            let bound = (1.0 / i as f64).sqrt();
            let mut draw = || g.random_range(-bound..bound);
            let weights = (0..i * o).map(|_| draw()).collect();
            let bias = (0..o).map(|_| draw()).collect();
            (weights, bias)
        })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    /// Input size followed by every layer's output size.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs).chain(self.layers.iter().map(|l| l.outputs)).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().outputs
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn locate(&self, mut index: usize) -> (usize, bool, usize) {
        for (l, layer) in self.layers.iter().enumerate() {
            if index < layer.weights.len() {
                return (l, true, index);
            }
            index -= layer.weights.len();
            if index < layer.bias.len() {
                return (l, false, index);
            }
            index -= layer.bias.len();
        }
        panic!("parameter index out of range");
    }

    /// Parameter by flat index: each layer's weights then its biases.
    pub fn param(&self, index: usize) -> f64 {
        let (l, w, i) = self.locate(index);
        if w {
            self.layers[l].weights[i]
        } else {
            self.layers[l].bias[i]
        }
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        let (l, w, i) = self.locate(index);
        let layer = &mut self.layers[l];
        if w {
            layer.weights[i] = value;
        } else {
            layer.bias[i] = value;
        }
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn squared_norm(&self) -> f64 {
        self.values().map(|v| v * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    /// `self += alpha · other`; shapes must agree.
    pub fn axpy(&mut self, alpha: f64, other: &MlpParams) {
        debug_assert_eq!(self.dims(), other.dims());
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += alpha * b;
        }
    }

    pub fn fill(&mut self, value: f64) {
        self.values_mut().for_each(|v| *v = value);
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            layer.apply(&cur, &mut next);
            if l < last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    pub(crate) fn forward_trace(&self, x: &[f64]) -> ForwardTrace {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.apply(activations.last().unwrap(), &mut out);
            if l < last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            activations.push(out);
        }
        ForwardTrace { activations }
    }

    /// Adds the gradient of a scalar with logit gradient `dlogits` to `grad`.
    pub(crate) fn backprop(&self, trace: &ForwardTrace, dlogits: &[f64], grad: &mut MlpParams) {
        let mut delta = dlogits.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &trace.activations[l];
            let g = &mut grad.layers[l];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                g.bias[o] += d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (gw, xi) in row.iter_mut().zip(input) {
                    *gw += d * xi;
                }
            }
            if l == 0 {
                break;
            }
            let mut prev = vec![0.0; layer.inputs];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            // ReLU mask: a hidden unit passes gradient only when active.
            for (p, a) in prev.iter_mut().zip(input) {
                if *a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
    }

    /// Little-endian checkpoint: `u64` layer count, `u64` sizes (input then
    /// each layer output), then per layer the row-major `f64` weights
    /// followed by the biases.
    pub fn to_bytes(&self) -> Vec<u8> {
        let dims = self.dims();
        let mut out = Vec::with_capacity(8 * (1 + dims.len() + self.num_params()));
        out.extend_from_slice(&(self.layers.len() as u64).to_le_bytes());
        for d in dims {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in self.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut words = bytes.chunks_exact(8);
        if !words.remainder().is_empty() {
            return Err(Error::Checkpoint("length is not a multiple of 8".into()));
        }
        let mut next_u64 = || -> Result<u64> {
            words
                .next()
                .map(|w| u64::from_le_bytes(w.try_into().unwrap()))
                .ok_or_else(|| Error::Checkpoint("truncated checkpoint".into()))
        };
        let count = next_u64()? as usize;
        if count == 0 || count > 1024 {
            return Err(Error::Checkpoint(format!("implausible layer count {count}")));
        }
        let dims = (0..=count).map(|_| next_u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let expected: usize = dims.windows(2).map(|w| w[0].saturating_mul(w[1]).saturating_add(w[1])).sum();
        let header = 8 * (count + 2);
        if bytes.len() != header + 8 * expected {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter bytes, found {}",
                8 * expected,
                bytes.len() - header
            )));
        }
        let mut params = MlpParams::zeros(&dims).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let values = bytes[header..].chunks_exact(8).map(|w| f64::from_le_bytes(w.try_into().unwrap()));
        for (slot, v) in params.values_mut().zip(values) {
            if !v.is_finite() {
                return Err(Error::Checkpoint("non-finite parameter".into()));
            }
            *slot = v;
        }
        Ok(params)
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::RngStream;

    fn tiny() -> MlpParams {
        // 2 inputs, 2 hidden, 2 outputs.
        let hidden = DenseLayer::new(2, 2, vec![1.0, -1.0, 0.5, 0.5], vec![0.0, -1.0]).unwrap();
        let out = DenseLayer::new(2, 2, vec![1.0, 2.0, -1.0, 0.0], vec![0.1, 0.0]).unwrap();
        MlpParams::from_layers(vec![hidden, out]).unwrap()
    }

    #[test]
    fn hand_forward_pass() {
        // x = (2, 1): hidden pre = (1, 0.5) → relu (1, 0.5); logits = (2.1, -1).
        let logits = tiny().logits(&[2.0, 1.0]);
        assert_eq!(logits, vec![2.1, -1.0]);
        // x = (0, 1): hidden pre = (-1, -0.5) → (0, 0); logits = bias.
        assert_eq!(tiny().logits(&[0.0, 1.0]), vec![0.1, 0.0]);
    }

    #[test]
    fn softmax_is_normalized_and_stable() {
        let p = softmax(&[1000.0, 0.0, -1000.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(p[0], 1.0);
        let p = softmax(&[0.0, 0.0]);
        assert_eq!(p, vec![0.5, 0.5]);
        let lp = log_softmax(&[1.0, 2.0]);
        assert!((lp[0].exp() + lp[1].exp() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn flat_indexing_round_trip() {
        let mut net = tiny();
        assert_eq!(net.num_params(), 12);
        assert_eq!(net.param(4), 0.0);
        assert_eq!(net.param(5), -1.0);
        assert_eq!(net.param(6), 1.0);
        net.set_param(11, 7.0);
        assert_eq!(net.layers()[1].bias()[1], 7.0);
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut g = RngStream::new(1, 0).generator();
        let net = MlpParams::fan_in_uniform(&[3, 5, 4, 2], &mut g).unwrap();
        let bytes = net.to_bytes();
        assert_eq!(&bytes[..8], &3u64.to_le_bytes());
        assert_eq!(&bytes[8..16], &3u64.to_le_bytes());
        assert_eq!(&bytes[32..40], &2u64.to_le_bytes());
        assert_eq!(MlpParams::from_bytes(&bytes).unwrap(), net);
        assert!(MlpParams::from_bytes(&bytes[..bytes.len() - 8]).is_err());
        assert!(MlpParams::from_bytes(&bytes[..5]).is_err());
    }

    #[test]
    fn shape_validation() {
        assert!(MlpParams::zeros(&[3]).is_err());
        assert!(MlpParams::zeros(&[3, 0, 2]).is_err());
        let a = DenseLayer::new(2, 3, vec![0.0; 6], vec![0.0; 3]).unwrap();
        let b = DenseLayer::new(2, 1, vec![0.0; 2], vec![0.0; 1]).unwrap();
        assert!(MlpParams::from_layers(vec![a, b]).is_err());
        assert!(DenseLayer::new(2, 2, vec![0.0; 3], vec![0.0; 2]).is_err());
    }

    #[test]
    fn gaussian_init_scale() {
        let mut g = RngStream::new(2, 0).generator();
        let net = MlpParams::gaussian(&[400, 300], &mut g).unwrap();
        let w = net.layers()[0].weights();
        let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        assert!((var * 400.0 - 1.0).abs() < 0.02);
        assert!(net.layers()[0].bias().iter().all(|b| *b == 0.0));
    }
}
