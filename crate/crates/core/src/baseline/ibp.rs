//! Interval bound propagation.
//!
//! Bounds are computed in float64 and widened so they also contain what the
//! float32 engine computes: inputs are rounded outward to float32, every
//! dot product is widened by the classical bound on its float32 rounding
//! error, and the final bounds get a small relative slack.

use std::borrow::Cow;

use super::BaselineError;
use crate::onnx::{broadcast_binary, Network, Op, Tensor};

/// Unit roundoff of float32.
const U32: f64 = 1.0 / 16_777_216.0;
/// Relative slack applied to the final output bounds.
pub const OUTPUT_SLACK: f64 = 1e-6;
/// Absolute widening after Sigmoid and Tanh, above their float32 error.
const ACTIVATION_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn mag(self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    fn add(self, o: Interval) -> Interval {
        Interval::new(self.lo + o.lo, self.hi + o.hi)
    }

    fn sub(self, o: Interval) -> Interval {
        Interval::new(self.lo - o.hi, self.hi - o.lo)
    }

    fn mul(self, o: Interval) -> Interval {
        if o.lo == o.hi {
            return self.scale(o.lo);
        }
        if self.lo == self.hi {
            return o.scale(self.lo);
        }
        let p = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        Interval::new(
            p.iter().copied().fold(f64::INFINITY, f64::min),
            p.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    }

    fn scale(self, c: f64) -> Interval {
        if c >= 0.0 {
            Interval::new(self.lo * c, self.hi * c)
        } else {
            Interval::new(self.hi * c, self.lo * c)
        }
    }

    fn div(self, o: Interval) -> Interval {
        if o.lo <= 0.0 && o.hi >= 0.0 {
            return Interval::new(f64::NEG_INFINITY, f64::INFINITY);
        }
        self.mul(Interval::new(1.0 / o.hi, 1.0 / o.lo))
    }

    fn widen(self, w: f64) -> Interval {
        Interval::new(self.lo - w, self.hi + w)
    }

    /// Widening for one float32 rounding of a value in this interval.
    fn round_once(self) -> Interval {
        self.widen(1.01 * U32 * self.mag() + f64::from(f32::from_bits(1)))
    }

    fn monotone(self, f: impl Fn(f64) -> f64) -> Interval {
        Interval::new(f(self.lo), f(self.hi))
    }
}

/// Element-wise bounds on a vector.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalVector {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl IntervalVector {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        IntervalVector { lower, upper }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn get(&self, i: usize) -> Interval {
        Interval::new(self.lower[i], self.upper[i])
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.len() && x.iter().enumerate().all(|(i, &v)| self.lower[i] <= v && v <= self.upper[i])
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| l + (u - l) / 2.0).collect()
    }

    /// Index and width of the widest dimension.
    pub fn widest(&self) -> Option<(usize, f64)> {
        (0..self.len())
            .map(|i| (i, self.upper[i] - self.lower[i]))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
    }

    /// Halves along dimension `dim`.
    pub fn bisect(&self, dim: usize) -> (IntervalVector, IntervalVector) {
        let mid = self.lower[dim] + (self.upper[dim] - self.lower[dim]) / 2.0;
        let mut left = self.clone();
        let mut right = self.clone();
        left.upper[dim] = mid;
        right.lower[dim] = mid;
        (left, right)
    }

    pub fn is_subset_of(&self, other: &IntervalVector) -> bool {
        self.len() == other.len()
            && (0..self.len()).all(|i| other.lower[i] <= self.lower[i] && self.upper[i] <= other.upper[i])
    }
}

/// Largest float32 value not above `v`, as f64.
fn f32_down(v: f64) -> f64 {
    let r = v as f32;
    if f64::from(r) > v {
        f64::from(next_f32_down(r))
    } else {
        f64::from(r)
    }
}

/// Smallest float32 value not below `v`, as f64.
fn f32_up(v: f64) -> f64 {
    -f32_down(-v)
}

fn next_f32_down(r: f32) -> f32 {
    if r.is_nan() || r == f32::NEG_INFINITY {
        r
    } else if r == 0.0 {
        -f32::from_bits(1)
    } else if r > 0.0 {
        f32::from_bits(r.to_bits() - 1)
    } else {
        f32::from_bits(r.to_bits() + 1)
    }
}

fn point_tensor(t: &Tensor<f32>) -> Tensor<Interval> {
    t.map(|v| Interval::point(f64::from(v)))
}

/// `[.., k] x [k, n]` (or `[k]`) dot products with float32 error widening.
fn matmul_iv(a: &Tensor<Interval>, b: &Tensor<Interval>, out_shape: &[usize]) -> Tensor<Interval> {
    let k = *a.shape.last().unwrap();
    let n = if b.shape.len() == 2 { b.shape[1] } else { 1 };
    let rows = a.data.len() / k.max(1);
    let gamma = 1.01 * (k as f64 + 1.0) * U32;
    let mut data = Vec::with_capacity(rows * n);
    for r in 0..rows {
        let row = &a.data[r * k..(r + 1) * k];
        for j in 0..n {
            let mut acc = Interval::point(0.0);
            let mut mag = 0.0;
            for (kk, &av) in row.iter().enumerate() {
                let bv = b.data[kk * n + j];
                acc = acc.add(av.mul(bv));
                mag += av.mag() * bv.mag();
            }
            data.push(acc.widen(gamma * mag));
        }
    }
    Tensor::new(out_shape.to_vec(), data)
}

#[allow(clippy::too_many_arguments)]
fn gemm_iv(
    a: &Tensor<Interval>,
    b: &Tensor<Interval>,
    c: Option<&Tensor<Interval>>,
    alpha: f64,
    beta: f64,
    trans_a: bool,
    trans_b: bool,
) -> Tensor<Interval> {
    let (m, k) = if trans_a { (a.shape[1], a.shape[0]) } else { (a.shape[0], a.shape[1]) };
    let n = if trans_b { b.shape[0] } else { b.shape[1] };
    let a_at = |i: usize, kk: usize| if trans_a { a.data[kk * m + i] } else { a.data[i * k + kk] };
    let b_at = |kk: usize, j: usize| if trans_b { b.data[j * k + kk] } else { b.data[kk * n + j] };
    let gamma = 1.01 * (k as f64 + 2.0) * U32;
    let mut data = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            let mut acc = Interval::point(0.0);
            let mut mag = 0.0;
            for kk in 0..k {
                let (x, w) = (a_at(i, kk), b_at(kk, j));
                acc = acc.add(x.mul(w));
                mag += x.mag() * w.mag();
            }
            data.push(acc.scale(alpha).widen(gamma * alpha.abs() * mag));
        }
    }
    let y = Tensor::new(vec![m, n], data);
    match c {
        // beta * c and the sum are two more float32 roundings.
        Some(c) => broadcast_binary(&y, c, |v, cv| v.add(cv.scale(beta).round_once()).round_once()),
        None => y,
    }
}

/// Bounds on the network output for all inputs in `input`.
pub fn ibp_forward(net: &Network, input: &IntervalVector) -> Result<IntervalVector, BaselineError> {
    if input.len() != net.num_inputs() {
        return Err(BaselineError::DimensionMismatch { expected: net.num_inputs(), got: input.len() });
    }
    let x: Vec<Interval> =
        (0..input.len()).map(|i| Interval::new(f32_down(input.lower[i]), f32_up(input.upper[i]))).collect();
    let mut values: Vec<Option<Tensor<Interval>>> = vec![None; net.num_slots()];
    values[net.input_slot()] = Some(Tensor::new(net.input_shape.clone(), x));

    for node in &net.nodes {
        let get = |i: usize| -> Cow<'_, Tensor<Interval>> {
            let slot = node.inputs[i];
            match net.constant(slot) {
                Some(t) => Cow::Owned(point_tensor(t)),
                None => Cow::Borrowed(values[slot].as_ref().expect("operand computed before use")),
            }
        };
        let out = match &node.op {
            Op::Constant => point_tensor(net.constant(node.output).expect("constant value")),
            Op::MatMul => matmul_iv(&get(0), &get(1), &node.output_shape),
            Op::Gemm { alpha, beta, trans_a, trans_b } => {
                let c = (node.inputs.len() > 2).then(|| get(2));
                gemm_iv(&get(0), &get(1), c.as_deref(), f64::from(*alpha), f64::from(*beta), *trans_a, *trans_b)
            }
            Op::Add => broadcast_binary(&get(0), &get(1), |a, b| a.add(b).round_once()),
            Op::Sub => broadcast_binary(&get(0), &get(1), |a, b| a.sub(b).round_once()),
            Op::Mul => broadcast_binary(&get(0), &get(1), |a, b| a.mul(b).round_once()),
            Op::Div => broadcast_binary(&get(0), &get(1), |a, b| a.div(b).round_once()),
            Op::Relu => get(0).map(|v| v.monotone(|t| t.max(0.0))),
            Op::Sigmoid => get(0).map(|v| {
                let s = v.monotone(|t| 1.0 / (1.0 + (-t).exp())).widen(ACTIVATION_SLACK);
                Interval::new(s.lo.max(0.0), s.hi.min(1.0))
            }),
            Op::Tanh => get(0).map(|v| {
                let s = v.monotone(f64::tanh).widen(ACTIVATION_SLACK);
                Interval::new(s.lo.max(-1.0), s.hi.min(1.0))
            }),
            Op::Flatten | Op::Reshape => get(0).reshaped(node.output_shape.clone()),
            Op::Transpose { perm } => get(0).transpose(perm),
            Op::Concat { axis } => {
                let parts: Vec<Cow<'_, Tensor<Interval>>> = (0..node.inputs.len()).map(get).collect();
                let refs: Vec<&Tensor<Interval>> = parts.iter().map(|p| p.as_ref()).collect();
                Tensor::concat(&refs, *axis)
            }
            Op::Slice { axes } => get(0).slice(axes),
        };
        values[node.output] = Some(out);
    }

    let out_slot = net.output_slot();
    let out = match net.constant(out_slot) {
        Some(t) => point_tensor(t),
        None => values[out_slot].take().expect("graph output computed"),
    };
    let lower = out.data.iter().map(|v| v.lo - OUTPUT_SLACK * v.lo.abs()).collect();
    let upper = out.data.iter().map(|v| v.hi + OUTPUT_SLACK * v.hi.abs()).collect();
    Ok(IntervalVector::new(lower, upper))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::onnx::builder::{encode, identity_model, GraphBuilder};

    #[test]
    fn identity_box() {
        let net = Network::from_bytes(&encode(&identity_model(3))).unwrap();
        let b = IntervalVector::new(vec![0.0; 3], vec![1.0; 3]);
        let out = ibp_forward(&net, &b).unwrap();
        for i in 0..3 {
            assert!(out.lower[i] <= 0.0 && out.lower[i] > -1e-6);
            assert!(out.upper[i] >= 1.0 && out.upper[i] < 1.0 + 1e-5);
        }
    }

    #[test]
    fn single_relu() {
        let mut g = GraphBuilder::new("x", &[1]);
        let y = g.node("Relu", &["x"], vec![]);
        let net = Network::from_bytes(&encode(&g.finish(&y, &[1]))).unwrap();
        let out = ibp_forward(&net, &IntervalVector::new(vec![-1.0], vec![2.0])).unwrap();
        assert_eq!(out.lower[0], 0.0);
        assert!(out.upper[0] >= 2.0 && out.upper[0] <= 2.0 + 1e-5);
    }

    #[test]
    fn f32_rounding_is_outward() {
        let v = 0.1f64;
        assert!(f32_down(v) <= v && f64::from(f32_down(v) as f32) == f32_down(v));
        assert!(f32_up(v) >= v);
        assert!(f32_down(v) <= f64::from(v as f32) && f64::from(v as f32) <= f32_up(v));
        assert_eq!(f32_down(0.5), 0.5);
        assert_eq!(f32_up(0.5), 0.5);
        assert!(f32_down(0.0) <= 0.0);
        assert!(f32_up(-1e-50) >= -1e-50);
    }

    #[test]
    fn bisect_and_widest() {
        let b = IntervalVector::new(vec![0.0, 0.0], vec![1.0, 3.0]);
        assert_eq!(b.widest(), Some((1, 3.0)));
        let (l, r) = b.bisect(1);
        assert_eq!((l.upper[1], r.lower[1]), (1.5, 1.5));
        assert!(l.is_subset_of(&b) && r.is_subset_of(&b));
    }

    #[test]
    fn interval_ops() {
        let a = Interval::new(-1.0, 2.0);
        assert_eq!(a.mul(Interval::new(-3.0, 1.0)), Interval::new(-6.0, 3.0));
        assert_eq!(a.scale(-2.0), Interval::new(-4.0, 2.0));
        assert_eq!(a.sub(Interval::new(0.0, 1.0)), Interval::new(-2.0, 2.0));
        assert!(a.div(Interval::new(-1.0, 1.0)).lo.is_infinite());
        assert_eq!(a.div(Interval::new(2.0, 2.0)), Interval::new(-0.5, 1.0));
    }
}
