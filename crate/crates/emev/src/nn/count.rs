//! Parameter and FLOP accounting.
//!
//! Conventions: Conv3D kernels are 3x3x3 and Conv2D kernels 3x3, biases are
//! counted, and one multiply-accumulate is two FLOPs. A convolution costs
//! `output_positions x filters x 2 x kernel_volume x input_channels`; a dense
//! layer costs `2 x in x out`. Bias adds and activations are not counted.

use serde::{Deserialize, Serialize};

use super::model::{Arch, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Conv3d,
    Conv2d,
    Dense,
    Concat,
}

/// One row of the model's layer table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub output_shape: Vec<usize>,
    pub params: usize,
    pub flops: usize,
}

/// The per-layer table for an architecture at given dimensions.
pub fn layer_table(spec: &ModelSpec) -> Vec<LayerSpec> {
    let mut table = Vec::new();
    let filters = [16usize, 32, 16];

    let ([d0, d1, d2], mut cin) = spec.u_branch_input();
    let positions3d = d0 * d1 * d2;
    for (i, &f) in filters.iter().enumerate() {
        table.push(LayerSpec {
            name: format!("conv3d_{}", i + 1),
            kind: LayerKind::Conv3d,
            output_shape: vec![d0, d1, d2, f],
            params: f * 27 * cin + f,
            flops: positions3d * f * 2 * 27 * cin,
        });
        cin = f;
    }

    if spec.arch == Arch::EmevIdNet {
        let ([s0, s1], mut s_cin) = spec.s_branch_input();
        let positions2d = s0 * s1;
        for (i, &f) in filters.iter().enumerate() {
            table.push(LayerSpec {
                name: format!("conv2d_{}", i + 1),
                kind: LayerKind::Conv2d,
                output_shape: vec![s0, s1, f],
                params: f * 9 * s_cin + f,
                flops: positions2d * f * 2 * 9 * s_cin,
            });
            s_cin = f;
        }
    }

    let mut in_dim = spec.head_input_len();
    table.push(LayerSpec {
        name: "concat".into(),
        kind: LayerKind::Concat,
        output_shape: vec![in_dim],
        params: 0,
        flops: 0,
    });
    for (i, &units) in [128usize, 32, 5].iter().enumerate() {
        table.push(LayerSpec {
            name: format!("fc_{}", i + 1),
            kind: LayerKind::Dense,
            output_shape: vec![units],
            params: in_dim * units + units,
            flops: 2 * in_dim * units,
        });
        in_dim = units;
    }
    table
}

/// Total trainable parameter count (weights + biases).
pub fn count_params(spec: &ModelSpec) -> usize {
    layer_table(spec).iter().map(|l| l.params).sum()
}

/// Total forward-pass FLOPs under the MAC = 2 convention.
pub fn count_flops(spec: &ModelSpec) -> usize {
    layer_table(spec).iter().map(|l| l.flops).sum()
}
