//! Model builders and the forward/backward passes.
//!
//! EMEV-IdNet is a dual-branch network: three 3x3x3 Conv3D layers over the
//! stacked eigenmatrices U (real/imag channels), three 3x3 Conv2D layers over
//! the singular-value rows S, concatenation, then a Dense 128-32-5 head with
//! softmax. CSI-IdNet runs the same Conv3D stack and head directly on the
//! full CSI tensor H.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::*;
use super::Scalar;
use crate::{Error, Result};

pub const NUM_CLASSES: usize = 5;
const CONV_FILTERS: [usize; 3] = [16, 32, 16];
const HEAD_UNITS: [usize; 2] = [128, 32];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arch {
    EmevIdNet,
    CsiIdNet,
}

impl Arch {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "emev" => Ok(Arch::EmevIdNet),
            "csi" => Ok(Arch::CsiIdNet),
            other => Err(Error::Domain(format!("unknown arch {other:?} (expected emev|csi)"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Arch::EmevIdNet => "emev",
            Arch::CsiIdNet => "csi",
        }
    }
}

/// Architecture plus the channel dimensions it is instantiated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub arch: Arch,
    pub n_rb: usize,
    pub n_r: usize,
    pub n_t: usize,
}

impl ModelSpec {
    pub fn new(arch: Arch, n_rb: usize, n_r: usize, n_t: usize) -> Self {
        ModelSpec { arch, n_rb, n_r, n_t }
    }

    /// Dimensions from the default link configuration.
    pub fn at_default_dims(arch: Arch) -> Self {
        ModelSpec::new(arch, 13, 4, 64)
    }

    /// Spatial dims and input channels of the Conv3D branch.
    pub fn u_branch_input(&self) -> ([usize; 3], usize) {
        match self.arch {
            Arch::EmevIdNet => ([self.n_rb, self.n_r, self.n_r], 2),
            Arch::CsiIdNet => ([self.n_rb, self.n_r, self.n_t], 2),
        }
    }

    /// Spatial dims and input channels of the Conv2D branch (EMEV only).
    pub fn s_branch_input(&self) -> ([usize; 2], usize) {
        ([self.n_rb, self.n_r], 1)
    }

    /// Flattened feature length entering the dense head.
    pub fn head_input_len(&self) -> usize {
        let ([d0, d1, d2], _) = self.u_branch_input();
        let last = *CONV_FILTERS.last().unwrap();
        match self.arch {
            Arch::EmevIdNet => d0 * d1 * d2 * last + self.n_rb * self.n_r * last,
            Arch::CsiIdNet => d0 * d1 * d2 * last,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<F> {
    pub weights: Vec<F>,
    pub bias: Vec<F>,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kvol: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams<F> {
    pub weights: Vec<F>,
    pub bias: Vec<F>,
    pub in_dim: usize,
    pub out_dim: usize,
}

/// Trainable state: the three weight groups (3D convs, 2D convs, dense head)
/// plus Adam moment buffers and the step counter.
#[derive(Debug, Clone)]
pub struct ModelState<F> {
    pub spec: ModelSpec,
    pub branch_u: Vec<ConvParams<F>>,
    pub branch_s: Vec<ConvParams<F>>,
    pub head: Vec<DenseParams<F>>,
    pub adam_m: Vec<Vec<F>>,
    pub adam_v: Vec<Vec<F>>,
    pub step: u64,
}

/// Per-sample gradients, one buffer per parameter tensor in declaration
/// order.
#[derive(Debug, Clone)]
pub struct Grads<F> {
    pub bufs: Vec<Vec<F>>,
}

impl<F: Scalar> Grads<F> {
    pub fn zeros_like(state: &ModelState<F>) -> Self {
        Grads { bufs: state.param_slices().iter().map(|p| vec![F::zero(); p.len()]).collect() }
    }

    pub fn accumulate(&mut self, other: &Grads<F>) {
        for (a, b) in self.bufs.iter_mut().zip(&other.bufs) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    pub fn scale(&mut self, factor: F) {
        for buf in self.bufs.iter_mut() {
            for x in buf.iter_mut() {
                *x *= factor;
            }
        }
    }
}

/// One sample's network input: the primary tensor (U features or raw H) and,
/// for EMEV, the singular-value tensor.
#[derive(Debug, Clone)]
pub struct SampleInput<F> {
    pub primary: Vec<F>,
    pub secondary: Option<Vec<F>>,
}

/// A set of ready-to-ingest samples.
#[derive(Debug, Clone, Default)]
pub struct FeatureSet<F> {
    pub inputs: Vec<SampleInput<F>>,
    pub labels: Vec<u8>,
}

impl<F> FeatureSet<F> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Forward activations cached for the backward pass.
pub struct ForwardCache<F> {
    /// Inputs to each conv layer of the U branch (post-activation of the
    /// previous layer), then the pre-activation outputs.
    u_inputs: Vec<Vec<F>>,
    u_pre: Vec<Vec<F>>,
    s_inputs: Vec<Vec<F>>,
    s_pre: Vec<Vec<F>>,
    head_inputs: Vec<Vec<F>>,
    head_pre: Vec<Vec<F>>,
    pub probs: Vec<F>,
}

impl<F: Scalar> ModelState<F> {
    /// Fresh state with seeded uniform fan-in initialization. Weights are
    /// drawn in declaration order from a single stream, in f64, so the init
    /// is identical across scalar types.
    pub fn init(spec: ModelSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut conv = |kvol: usize, in_ch: usize, out_ch: usize| -> ConvParams<F> {
            let fan_in = (kvol * in_ch) as f64;
            let bound = 1.0 / fan_in.sqrt();
            let weights = (0..out_ch * kvol * in_ch)
                .map(|_| F::from_f64(rng.gen_range(-bound..bound)))
                .collect();
            let bias = vec![F::zero(); out_ch];
            ConvParams { weights, bias, in_ch, out_ch, kvol }
        };
        let (_, u_cin) = spec.u_branch_input();
        let mut branch_u = Vec::new();
        let mut cin = u_cin;
        for &f in &CONV_FILTERS {
            branch_u.push(conv(27, cin, f));
            cin = f;
        }
        let mut branch_s = Vec::new();
        if spec.arch == Arch::EmevIdNet {
            let (_, s_cin) = spec.s_branch_input();
            let mut cin = s_cin;
            for &f in &CONV_FILTERS {
                branch_s.push(conv(9, cin, f));
                cin = f;
            }
        }
        let mut head = Vec::new();
        let mut in_dim = spec.head_input_len();
        for &units in HEAD_UNITS.iter().chain(std::iter::once(&NUM_CLASSES)) {
            let bound = 1.0 / (in_dim as f64).sqrt();
            let weights = (0..in_dim * units)
                .map(|_| F::from_f64(rng.gen_range(-bound..bound)))
                .collect();
            head.push(DenseParams { weights, bias: vec![F::zero(); units], in_dim, out_dim: units });
            in_dim = units;
        }
        let mut state = ModelState {
            spec,
            branch_u,
            branch_s,
            head,
            adam_m: Vec::new(),
            adam_v: Vec::new(),
            step: 0,
        };
        state.adam_m = state.param_slices().iter().map(|p| vec![F::zero(); p.len()]).collect();
        state.adam_v = state.adam_m.clone();
        state
    }

    /// Parameter tensors in canonical declaration order (also the checkpoint
    /// payload order).
    pub fn param_slices(&self) -> Vec<&[F]> {
        let mut out = Vec::new();
        for l in &self.branch_u {
            out.push(l.weights.as_slice());
            out.push(l.bias.as_slice());
        }
        for l in &self.branch_s {
            out.push(l.weights.as_slice());
            out.push(l.bias.as_slice());
        }
        for l in &self.head {
            out.push(l.weights.as_slice());
            out.push(l.bias.as_slice());
        }
        out
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [F]> {
        let mut out: Vec<&mut [F]> = Vec::new();
        for l in self.branch_u.iter_mut() {
            out.push(l.weights.as_mut_slice());
            out.push(l.bias.as_mut_slice());
        }
        for l in self.branch_s.iter_mut() {
            out.push(l.weights.as_mut_slice());
            out.push(l.bias.as_mut_slice());
        }
        for l in self.head.iter_mut() {
            out.push(l.weights.as_mut_slice());
            out.push(l.bias.as_mut_slice());
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.param_slices().iter().map(|p| p.len()).sum()
    }

    fn expect_input_lens(&self) -> (usize, Option<usize>) {
        let ([d0, d1, d2], cin) = self.spec.u_branch_input();
        let primary = d0 * d1 * d2 * cin;
        let secondary = match self.spec.arch {
            Arch::EmevIdNet => {
                let ([s0, s1], s_cin) = self.spec.s_branch_input();
                Some(s0 * s1 * s_cin)
            }
            Arch::CsiIdNet => None,
        };
        (primary, secondary)
    }

    /// Forward pass returning class probabilities and the activation cache.
    pub fn forward(&self, input: &SampleInput<F>) -> Result<ForwardCache<F>> {
        let (want_primary, want_secondary) = self.expect_input_lens();
        if input.primary.len() != want_primary {
            return Err(Error::Shape(format!(
                "primary input length {} != expected {want_primary}",
                input.primary.len()
            )));
        }
        match (want_secondary, &input.secondary) {
            (Some(want), Some(s)) if s.len() == want => {}
            (None, None) => {}
            _ => return Err(Error::Shape("secondary input missing or mis-sized".into())),
        }

        let (u_dims, _) = self.spec.u_branch_input();
        let mut u_inputs = Vec::with_capacity(self.branch_u.len());
        let mut u_pre = Vec::with_capacity(self.branch_u.len());
        let mut cur = input.primary.clone();
        for layer in &self.branch_u {
            let pre = conv3d_forward(&cur, u_dims, layer.in_ch, &layer.weights, &layer.bias, layer.out_ch)?;
            u_inputs.push(cur);
            let mut post = pre.clone();
            leaky_relu(&mut post);
            u_pre.push(pre);
            cur = post;
        }
        let u_out = cur;

        let mut s_inputs = Vec::new();
        let mut s_pre = Vec::new();
        let s_out = if self.spec.arch == Arch::EmevIdNet {
            let (s_dims, _) = self.spec.s_branch_input();
            let mut cur = input.secondary.clone().unwrap();
            for layer in &self.branch_s {
                let pre = conv2d_forward(&cur, s_dims, layer.in_ch, &layer.weights, &layer.bias, layer.out_ch)?;
                s_inputs.push(cur);
                let mut post = pre.clone();
                leaky_relu(&mut post);
                s_pre.push(pre);
                cur = post;
            }
            cur
        } else {
            Vec::new()
        };

        let mut features = u_out;
        features.extend_from_slice(&s_out);
        debug_assert_eq!(features.len(), self.spec.head_input_len());

        let mut head_inputs = Vec::with_capacity(self.head.len());
        let mut head_pre = Vec::with_capacity(self.head.len());
        let mut cur = features;
        for (i, layer) in self.head.iter().enumerate() {
            let pre = dense_forward(&cur, &layer.weights, &layer.bias)?;
            head_inputs.push(cur);
            let mut post = pre.clone();
            if i + 1 < self.head.len() {
                relu(&mut post);
            }
            head_pre.push(pre);
            cur = post;
        }
        let probs = softmax(&cur);
        Ok(ForwardCache { u_inputs, u_pre, s_inputs, s_pre, head_inputs, head_pre, probs })
    }

    /// Backward pass from the softmax/cross-entropy gradient `probs - onehot`.
    pub fn backward(&self, cache: &ForwardCache<F>, label: u8) -> Result<Grads<F>> {
        let mut grads = Grads::zeros_like(self);
        let mut grad: Vec<F> = cache.probs.clone();
        grad[label as usize] -= F::one();

        // Index of each parameter buffer in canonical order.
        let n_u = self.branch_u.len() * 2;
        let n_s = self.branch_s.len() * 2;

        for (i, layer) in self.head.iter().enumerate().rev() {
            let (d_in, d_w, d_b) = dense_backward(&cache.head_inputs[i], &layer.weights, &grad)?;
            grads.bufs[n_u + n_s + 2 * i] = d_w;
            grads.bufs[n_u + n_s + 2 * i + 1] = d_b;
            grad = d_in;
            if i > 0 {
                relu_backward(&cache.head_pre[i - 1], &mut grad);
            }
        }

        let ([d0, d1, d2], _) = self.spec.u_branch_input();
        let u_len = d0 * d1 * d2 * CONV_FILTERS.last().unwrap();
        let (mut u_grad, s_grad) = {
            let (u, s) = grad.split_at(u_len);
            (u.to_vec(), s.to_vec())
        };

        let u_dims = [d0, d1, d2];
        for (i, layer) in self.branch_u.iter().enumerate().rev() {
            leaky_relu_backward(&cache.u_pre[i], &mut u_grad);
            let (d_in, d_w, d_b) =
                conv3d_backward(&cache.u_inputs[i], u_dims, layer.in_ch, &layer.weights, layer.out_ch, &u_grad)?;
            grads.bufs[2 * i] = d_w;
            grads.bufs[2 * i + 1] = d_b;
            u_grad = d_in;
        }

        if self.spec.arch == Arch::EmevIdNet {
            let (s_dims, _) = self.spec.s_branch_input();
            let mut s_grad = s_grad;
            for (i, layer) in self.branch_s.iter().enumerate().rev() {
                leaky_relu_backward(&cache.s_pre[i], &mut s_grad);
                let (d_in, d_w, d_b) =
                    conv2d_backward(&cache.s_inputs[i], s_dims, layer.in_ch, &layer.weights, layer.out_ch, &s_grad)?;
                grads.bufs[n_u + 2 * i] = d_w;
                grads.bufs[n_u + 2 * i + 1] = d_b;
                s_grad = d_in;
            }
        }
        Ok(grads)
    }

    /// Class probabilities for one sample.
    pub fn predict(&self, input: &SampleInput<F>) -> Result<Vec<F>> {
        Ok(self.forward(input)?.probs)
    }
}
