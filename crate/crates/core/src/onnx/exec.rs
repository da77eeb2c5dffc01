//! Float32 executor.

use super::model::{Network, Op};
use super::tensor::{broadcast_binary, Tensor};
use super::OnnxError;

/// `[.., k] x [k, n]` (or `[k]`) with a fixed left-to-right accumulation
/// order over `k`.
pub(crate) fn matmul(a: &Tensor<f32>, b: &Tensor<f32>, out_shape: &[usize]) -> Tensor<f32> {
    let k = *a.shape.last().unwrap();
    let n = if b.shape.len() == 2 { b.shape[1] } else { 1 };
    let rows = a.data.len() / k.max(1);
    let mut out = Vec::with_capacity(rows * n);
    for r in 0..rows {
        let row = &a.data[r * k..(r + 1) * k];
        for j in 0..n {
            let mut acc = 0.0f32;
            for (kk, &av) in row.iter().enumerate() {
                acc += av * b.data[kk * n + j];
            }
            out.push(acc);
        }
    }
    Tensor { shape: out_shape.to_vec(), data: out }
}

pub(crate) fn gemm(
    a: &Tensor<f32>,
    b: &Tensor<f32>,
    c: Option<&Tensor<f32>>,
    alpha: f32,
    beta: f32,
    trans_a: bool,
    trans_b: bool,
) -> Tensor<f32> {
    let (m, k) = if trans_a { (a.shape[1], a.shape[0]) } else { (a.shape[0], a.shape[1]) };
    let n = if trans_b { b.shape[0] } else { b.shape[1] };
    let a_at = |i: usize, kk: usize| if trans_a { a.data[kk * m + i] } else { a.data[i * k + kk] };
    let b_at = |kk: usize, j: usize| if trans_b { b.data[j * k + kk] } else { b.data[kk * n + j] };
    let mut data = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0f32;
            for kk in 0..k {
                acc += a_at(i, kk) * b_at(kk, j);
            }
            data.push(alpha * acc);
        }
    }
    let mut y = Tensor { shape: vec![m, n], data };
    if let Some(c) = c {
        y = broadcast_binary(&y, c, |v, cv| v + beta * cv);
    }
    y
}

pub fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Network {
    /// Runs the network on `x`. Any tensor whose element count matches the
    /// graph input is accepted and reshaped to the input shape.
    pub fn infer(&self, x: &Tensor<f32>) -> Result<Tensor<f32>, OnnxError> {
        if x.len() != self.num_inputs() {
            return Err(OnnxError::ShapeMismatch { expected: self.num_inputs(), got: x.len() });
        }
        let mut values: Vec<Option<Tensor<f32>>> = vec![None; self.num_slots()];
        values[self.input_slot()] = Some(x.reshaped(self.input_shape.clone()));

        for node in &self.nodes {
            let get = |i: usize| -> &Tensor<f32> {
                let slot = node.inputs[i];
                self.constant(slot).or(values[slot].as_ref()).expect("operand computed before use")
            };
            let out = match &node.op {
                Op::Constant => self.constant(node.output).cloned().expect("constant value"),
                Op::MatMul => matmul(get(0), get(1), &node.output_shape),
                Op::Gemm { alpha, beta, trans_a, trans_b } => {
                    let c = (node.inputs.len() > 2).then(|| get(2));
                    gemm(get(0), get(1), c, *alpha, *beta, *trans_a, *trans_b)
                }
                Op::Add => broadcast_binary(get(0), get(1), |a, b| a + b),
                Op::Sub => broadcast_binary(get(0), get(1), |a, b| a - b),
                Op::Mul => broadcast_binary(get(0), get(1), |a, b| a * b),
                Op::Div => broadcast_binary(get(0), get(1), |a, b| a / b),
                Op::Relu => get(0).map(|v| if v > 0.0 { v } else { 0.0 }),
                Op::Sigmoid => get(0).map(sigmoid),
                Op::Tanh => get(0).map(f32::tanh),
                Op::Flatten | Op::Reshape => get(0).reshaped(node.output_shape.clone()),
                Op::Transpose { perm } => get(0).transpose(perm),
                Op::Concat { axis } => {
                    let parts: Vec<&Tensor<f32>> = (0..node.inputs.len()).map(get).collect();
                    Tensor::concat(&parts, *axis)
                }
                Op::Slice { axes } => get(0).slice(axes),
            };
            debug_assert_eq!(out.shape, node.output_shape, "node {}", node.name);
            values[node.output] = Some(out);
        }

        let out_slot = self.output_slot();
        self.constant(out_slot)
            .cloned()
            .or_else(|| values[out_slot].take())
            .ok_or_else(|| OnnxError::MalformedModel("graph output was not computed".into()))
    }

    /// Flat-vector convenience wrapper around [`Network::infer`].
    pub fn infer_flat(&self, x: &[f32]) -> Result<Vec<f32>, OnnxError> {
        Ok(self.infer(&Tensor::from_vec(x.to_vec()))?.data)
    }

    /// Promotes `x` to float32, runs the network and promotes the result
    /// back to float64.
    pub fn infer_f64(&self, x: &[f64]) -> Result<Vec<f64>, OnnxError> {
        let x32: Vec<f32> = x.iter().map(|&v| v as f32).collect();
        Ok(self.infer_flat(&x32)?.into_iter().map(f64::from).collect())
    }
}
