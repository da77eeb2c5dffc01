//! ONNX graph loading with static shape inference.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use prost::Message;

use super::proto::{self, data_type, AttributeProto, DimValue, GraphProto, ModelProto, NodeProto, TensorProto};
use super::tensor::{broadcast_shape, numel, SliceAxis, Tensor};
use super::OnnxError;

/// Operators the engine executes, with attributes resolved at load time.
#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    MatMul,
    Gemm { alpha: f32, beta: f32, trans_a: bool, trans_b: bool },
    Add,
    Sub,
    Mul,
    Div,
    Relu,
    Sigmoid,
    Tanh,
    Flatten,
    Reshape,
    Transpose { perm: Vec<usize> },
    Concat { axis: usize },
    Slice { axes: Vec<SliceAxis> },
    Constant,
}

impl Op {
    pub fn is_linear(&self) -> bool {
        !matches!(self, Op::Relu | Op::Sigmoid | Op::Tanh)
    }
}

/// One executable node. Operand and result references are value slots.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub op_type: String,
    pub op: Op,
    /// Float operands only; integer parameter inputs (Reshape shape, Slice
    /// bounds) are folded into `op` or `output_shape` at load time.
    pub inputs: Vec<usize>,
    pub output: usize,
    pub output_shape: Vec<usize>,
}

/// A loaded feed-forward network. Immutable after loading.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub input_name: String,
    pub input_shape: Vec<usize>,
    pub output_name: String,
    pub output_shape: Vec<usize>,
    pub nodes: Vec<Node>,
    pub opset: i64,
    pub(crate) input_slot: usize,
    pub(crate) output_slot: usize,
    pub(crate) slot_names: Vec<String>,
    /// Constant tensors (initializers and Constant outputs) by slot.
    pub(crate) constants: Vec<Option<Tensor<f32>>>,
}

impl Network {
    pub fn num_inputs(&self) -> usize {
        numel(&self.input_shape)
    }

    pub fn num_outputs(&self) -> usize {
        numel(&self.output_shape)
    }

    /// Total number of float constant elements (weights and biases).
    pub fn parameter_count(&self) -> usize {
        self.constants.iter().flatten().map(Tensor::len).sum()
    }

    pub fn slot_name(&self, slot: usize) -> &str {
        &self.slot_names[slot]
    }

    pub fn constant(&self, slot: usize) -> Option<&Tensor<f32>> {
        self.constants[slot].as_ref()
    }

    pub fn constant_by_name(&self, name: &str) -> Option<&Tensor<f32>> {
        let slot = self.slot_names.iter().position(|n| n == name)?;
        self.constant(slot)
    }

    pub(crate) fn input_slot(&self) -> usize {
        self.input_slot
    }

    pub(crate) fn output_slot(&self) -> usize {
        self.output_slot
    }

    pub(crate) fn num_slots(&self) -> usize {
        self.slot_names.len()
    }

    /// Whether every node is piecewise-linear-free (no activations).
    pub fn is_linear(&self) -> bool {
        self.nodes.iter().all(|n| n.op.is_linear())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, OnnxError> {
        let model = ModelProto::decode(bytes).map_err(|e| OnnxError::MalformedModel(e.to_string()))?;
        Self::from_model(&model)
    }

    pub fn from_model(model: &ModelProto) -> Result<Self, OnnxError> {
        let opset = model
            .opset_import
            .iter()
            .find(|o| o.domain.is_empty() || o.domain == "ai.onnx")
            .map(|o| o.version)
            .unwrap_or(13);
        let graph = model.graph.as_ref().ok_or_else(|| OnnxError::MalformedModel("model has no graph".into()))?;
        Loader::new(opset).load(graph)
    }
}

impl fmt::Display for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "input  {} {:?}", self.input_name, self.input_shape)?;
        writeln!(f, "output {} {:?}", self.output_name, self.output_shape)?;
        writeln!(f, "opset  {}", self.opset)?;
        writeln!(f, "nodes  {}", self.nodes.len())?;
        for n in &self.nodes {
            writeln!(f, "  {:<10} {:<24} -> {:?}", n.op_type, n.name, n.output_shape)?;
        }
        write!(f, "parameters {}", self.parameter_count())
    }
}

/// Reads and loads an `.onnx` file.
pub fn load_network(path: impl AsRef<Path>) -> Result<Network, OnnxError> {
    let path = path.as_ref();
    let bytes =
        std::fs::read(path).map_err(|e| OnnxError::Io { path: path.display().to_string(), message: e.to_string() })?;
    Network::from_bytes(&bytes)
}

enum Value {
    Float(Tensor<f32>),
    Int(Vec<i64>),
}

fn decode_tensor(t: &TensorProto) -> Result<Value, OnnxError> {
    let shape: Vec<usize> = t
        .dims
        .iter()
        .map(|&d| usize::try_from(d).map_err(|_| malformed(format!("tensor {} has negative dim", t.name))))
        .collect::<Result<_, _>>()?;
    let n = numel(&shape);
    let raw = &t.raw_data;
    let value = match t.data_type {
        data_type::FLOAT => {
            let data: Vec<f32> = if !raw.is_empty() {
                raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect()
            } else {
                t.float_data.clone()
            };
            check_len(&t.name, n, data.len())?;
            Value::Float(Tensor { shape, data })
        }
        data_type::DOUBLE => {
            let data: Vec<f32> = if !raw.is_empty() {
                raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()) as f32).collect()
            } else {
                t.double_data.iter().map(|&v| v as f32).collect()
            };
            check_len(&t.name, n, data.len())?;
            Value::Float(Tensor { shape, data })
        }
        data_type::INT64 => {
            let data: Vec<i64> = if !raw.is_empty() {
                raw.chunks_exact(8).map(|c| i64::from_le_bytes(c.try_into().unwrap())).collect()
            } else {
                t.int64_data.clone()
            };
            check_len(&t.name, n, data.len())?;
            Value::Int(data)
        }
        data_type::INT32 => {
            let data: Vec<i64> = if !raw.is_empty() {
                raw.chunks_exact(4).map(|c| i32::from_le_bytes(c.try_into().unwrap()) as i64).collect()
            } else {
                t.int32_data.iter().map(|&v| v as i64).collect()
            };
            check_len(&t.name, n, data.len())?;
            Value::Int(data)
        }
        other => return Err(malformed(format!("tensor {} has unsupported data type {other}", t.name))),
    };
    Ok(value)
}

fn check_len(name: &str, expected: usize, got: usize) -> Result<(), OnnxError> {
    if expected != got {
        return Err(malformed(format!("tensor {name} declares {expected} elements but stores {got}")));
    }
    Ok(())
}

fn malformed(msg: String) -> OnnxError {
    OnnxError::MalformedModel(msg)
}

fn attr<'a>(node: &'a NodeProto, name: &str) -> Option<&'a AttributeProto> {
    node.attribute.iter().find(|a| a.name == name)
}

fn attr_int(node: &NodeProto, name: &str, default: i64) -> i64 {
    attr(node, name).map_or(default, |a| a.i)
}

fn attr_float(node: &NodeProto, name: &str, default: f32) -> f32 {
    attr(node, name).map_or(default, |a| a.f)
}

fn attr_ints(node: &NodeProto, name: &str) -> Option<Vec<i64>> {
    attr(node, name).map(|a| a.ints.clone())
}

fn normalize_axis(axis: i64, rank: usize) -> Option<usize> {
    let r = rank as i64;
    let a = if axis < 0 { axis + r } else { axis };
    (0..r).contains(&a).then_some(a as usize)
}

struct Loader {
    opset: i64,
    slots: HashMap<String, usize>,
    slot_names: Vec<String>,
    shapes: Vec<Option<Vec<usize>>>,
    constants: Vec<Option<Tensor<f32>>>,
    ints: HashMap<String, Vec<i64>>,
}

impl Loader {
    fn new(opset: i64) -> Self {
        Loader {
            opset,
            slots: HashMap::new(),
            slot_names: Vec::new(),
            shapes: Vec::new(),
            constants: Vec::new(),
            ints: HashMap::new(),
        }
    }

    fn define(&mut self, name: &str, shape: Vec<usize>, constant: Option<Tensor<f32>>) -> Result<usize, OnnxError> {
        if self.slots.contains_key(name) {
            return Err(malformed(format!("value `{name}` is defined twice")));
        }
        let slot = self.slot_names.len();
        self.slots.insert(name.to_string(), slot);
        self.slot_names.push(name.to_string());
        self.shapes.push(Some(shape));
        self.constants.push(constant);
        Ok(slot)
    }

    fn float_operand(&self, node: &NodeProto, i: usize) -> Result<usize, OnnxError> {
        let name = node
            .input
            .get(i)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| shape_err(node, format!("missing input #{i}")))?;
        match self.slots.get(name) {
            Some(&s) => Ok(s),
            None if self.ints.contains_key(name) => {
                Err(shape_err(node, format!("integer tensor `{name}` used as a float operand")))
            }
            None => Err(malformed(format!(
                "node `{}` reads `{name}`, which is neither the graph input, an initializer nor a prior output",
                node_label(node)
            ))),
        }
    }

    fn int_operand(&self, node: &NodeProto, i: usize) -> Result<Option<Vec<i64>>, OnnxError> {
        match node.input.get(i).filter(|s| !s.is_empty()) {
            None => Ok(None),
            Some(name) => self
                .ints
                .get(name)
                .cloned()
                .map(Some)
                .ok_or_else(|| shape_err(node, format!("`{name}` must be a constant integer tensor"))),
        }
    }

    fn shape(&self, slot: usize) -> &[usize] {
        self.shapes[slot].as_deref().expect("defined slot")
    }

    fn load(mut self, graph: &GraphProto) -> Result<Network, OnnxError> {
        for init in &graph.initializer {
            match decode_tensor(init)? {
                Value::Float(t) => {
                    let shape = t.shape.clone();
                    self.define(&init.name, shape, Some(t))?;
                }
                Value::Int(v) => {
                    self.ints.insert(init.name.clone(), v);
                }
            }
        }

        let real_inputs: Vec<_> = graph
            .input
            .iter()
            .filter(|vi| !self.slots.contains_key(&vi.name) && !self.ints.contains_key(&vi.name))
            .collect();
        let [input] = real_inputs.as_slice() else {
            return Err(malformed(format!("expected exactly one graph input, found {}", real_inputs.len())));
        };
        let [output] = graph.output.as_slice() else {
            return Err(malformed(format!("expected exactly one graph output, found {}", graph.output.len())));
        };
        let input_shape = value_info_shape(input)?;
        let input_slot = self.define(&input.name, input_shape.clone(), None)?;

        let mut nodes = Vec::with_capacity(graph.node.len());
        for node in &graph.node {
            if let Some(n) = self.load_node(node)? {
                nodes.push(n);
            }
        }

        let output_slot = *self
            .slots
            .get(&output.name)
            .ok_or_else(|| malformed(format!("graph output `{}` is never produced", output.name)))?;
        let output_shape = self.shape(output_slot).to_vec();

        Ok(Network {
            input_name: input.name.clone(),
            input_shape,
            output_name: output.name.clone(),
            output_shape,
            nodes,
            opset: self.opset,
            input_slot,
            output_slot,
            slot_names: self.slot_names,
            constants: self.constants,
        })
    }

    fn load_node(&mut self, node: &NodeProto) -> Result<Option<Node>, OnnxError> {
        if !(node.domain.is_empty() || node.domain == "ai.onnx") {
            return Err(OnnxError::UnsupportedOperator(format!("{}::{}", node.domain, node.op_type)));
        }
        let [out_name] = node.output.as_slice() else {
            return Err(shape_err(node, format!("expected one output, found {}", node.output.len())));
        };

        let (op, inputs, out_shape, constant) = match node.op_type.as_str() {
            "Constant" => {
                let t = attr(node, "value")
                    .and_then(|a| a.t.as_ref())
                    .ok_or_else(|| shape_err(node, "Constant without a tensor `value`".into()))?;
                match decode_tensor(t)? {
                    Value::Int(v) => {
                        self.ints.insert(out_name.clone(), v);
                        return Ok(None);
                    }
                    Value::Float(t) => (Op::Constant, vec![], t.shape.clone(), Some(t)),
                }
            }
            "MatMul" => {
                let (a, b) = (self.float_operand(node, 0)?, self.float_operand(node, 1)?);
                let shape = matmul_shape(self.shape(a), self.shape(b)).ok_or_else(|| {
                    shape_err(node, format!("cannot multiply {:?} by {:?}", self.shape(a), self.shape(b)))
                })?;
                (Op::MatMul, vec![a, b], shape, None)
            }
            "Gemm" => {
                let a = self.float_operand(node, 0)?;
                let b = self.float_operand(node, 1)?;
                let c = node.input.get(2).filter(|s| !s.is_empty()).map(|_| self.float_operand(node, 2)).transpose()?;
                let op = Op::Gemm {
                    alpha: attr_float(node, "alpha", 1.0),
                    beta: attr_float(node, "beta", 1.0),
                    trans_a: attr_int(node, "transA", 0) != 0,
                    trans_b: attr_int(node, "transB", 0) != 0,
                };
                let Op::Gemm { trans_a, trans_b, .. } = op else { unreachable!() };
                let (sa, sb) = (self.shape(a), self.shape(b));
                if sa.len() != 2 || sb.len() != 2 {
                    return Err(shape_err(node, format!("Gemm needs 2-D operands, got {sa:?} and {sb:?}")));
                }
                let (m, k) = if trans_a { (sa[1], sa[0]) } else { (sa[0], sa[1]) };
                let (k2, n) = if trans_b { (sb[1], sb[0]) } else { (sb[0], sb[1]) };
                if k != k2 {
                    return Err(shape_err(node, format!("inner dimensions differ: {k} vs {k2}")));
                }
                let mut inputs = vec![a, b];
                if let Some(c) = c {
                    if broadcast_shape(self.shape(c), &[m, n]).as_deref() != Some(&[m, n][..]) {
                        return Err(shape_err(
                            node,
                            format!("bias {:?} does not broadcast to [{m}, {n}]", self.shape(c)),
                        ));
                    }
                    inputs.push(c);
                }
                (op, inputs, vec![m, n], None)
            }
            kind @ ("Add" | "Sub" | "Mul" | "Div") => {
                let (a, b) = (self.float_operand(node, 0)?, self.float_operand(node, 1)?);
                let shape = broadcast_shape(self.shape(a), self.shape(b)).ok_or_else(|| {
                    shape_err(node, format!("{:?} and {:?} do not broadcast", self.shape(a), self.shape(b)))
                })?;
                let (a_const, b_const) = (self.constants[a].is_some(), self.constants[b].is_some());
                let op = match kind {
                    "Add" => Op::Add,
                    "Sub" => Op::Sub,
                    "Mul" if a_const || b_const => Op::Mul,
                    "Div" if b_const => Op::Div,
                    "Mul" => return Err(OnnxError::UnsupportedOperator("Mul (both operands variable)".into())),
                    _ => return Err(OnnxError::UnsupportedOperator("Div (variable divisor)".into())),
                };
                (op, vec![a, b], shape, None)
            }
            kind @ ("Relu" | "Sigmoid" | "Tanh") => {
                let a = self.float_operand(node, 0)?;
                let op = match kind {
                    "Relu" => Op::Relu,
                    "Sigmoid" => Op::Sigmoid,
                    _ => Op::Tanh,
                };
                (op, vec![a], self.shape(a).to_vec(), None)
            }
            "Flatten" => {
                let a = self.float_operand(node, 0)?;
                let s = self.shape(a);
                let rank = s.len() as i64;
                let raw = attr_int(node, "axis", 1);
                let axis = if raw < 0 { raw + rank } else { raw };
                if !(0..=rank).contains(&axis) {
                    return Err(shape_err(node, "axis out of range".into()));
                }
                let axis = axis as usize;
                let shape = vec![s[..axis].iter().product(), s[axis..].iter().product()];
                (Op::Flatten, vec![a], shape, None)
            }
            "Reshape" => {
                let a = self.float_operand(node, 0)?;
                let target = self
                    .int_operand(node, 1)?
                    .or_else(|| attr_ints(node, "shape"))
                    .ok_or_else(|| shape_err(node, "Reshape without a constant shape".into()))?;
                let allow_zero = attr_int(node, "allowzero", 0) != 0;
                let shape = reshape_shape(self.shape(a), &target, allow_zero).map_err(|r| shape_err(node, r))?;
                (Op::Reshape, vec![a], shape, None)
            }
            "Transpose" => {
                let a = self.float_operand(node, 0)?;
                let rank = self.shape(a).len();
                let perm: Vec<usize> = match attr_ints(node, "perm") {
                    Some(p) => p
                        .iter()
                        .map(|&v| normalize_axis(v, rank))
                        .collect::<Option<_>>()
                        .ok_or_else(|| shape_err(node, "perm out of range".into()))?,
                    None => (0..rank).rev().collect(),
                };
                let mut seen = perm.clone();
                seen.sort_unstable();
                if seen != (0..rank).collect::<Vec<_>>() {
                    return Err(shape_err(node, format!("{perm:?} is not a permutation of rank {rank}")));
                }
                let shape = perm.iter().map(|&p| self.shape(a)[p]).collect();
                (Op::Transpose { perm }, vec![a], shape, None)
            }
            "Concat" => {
                let inputs: Vec<usize> =
                    (0..node.input.len()).map(|i| self.float_operand(node, i)).collect::<Result<_, _>>()?;
                let first = inputs.first().ok_or_else(|| shape_err(node, "Concat without inputs".into()))?;
                let rank = self.shape(*first).len();
                let axis = normalize_axis(attr_int(node, "axis", 0), rank)
                    .ok_or_else(|| shape_err(node, "axis out of range".into()))?;
                let mut shape = self.shape(*first).to_vec();
                shape[axis] = 0;
                for &i in &inputs {
                    let s = self.shape(i);
                    let compatible = s.len() == rank && (0..rank).all(|d| d == axis || s[d] == shape[d]);
                    if !compatible {
                        return Err(shape_err(node, format!("input {s:?} incompatible with {:?}", self.shape(*first))));
                    }
                    shape[axis] += s[axis];
                }
                (Op::Concat { axis }, inputs, shape, None)
            }
            "Slice" => {
                let a = self.float_operand(node, 0)?;
                let in_shape = self.shape(a).to_vec();
                let rank = in_shape.len();
                let (starts, ends, axes, steps) = if self.opset < 10 {
                    (attr_ints(node, "starts"), attr_ints(node, "ends"), attr_ints(node, "axes"), None)
                } else {
                    (
                        self.int_operand(node, 1)?,
                        self.int_operand(node, 2)?,
                        self.int_operand(node, 3)?,
                        self.int_operand(node, 4)?,
                    )
                };
                let starts = starts.ok_or_else(|| shape_err(node, "Slice without starts".into()))?;
                let ends = ends.ok_or_else(|| shape_err(node, "Slice without ends".into()))?;
                let axes = axes.unwrap_or_else(|| (0..starts.len() as i64).collect());
                let steps = steps.unwrap_or_else(|| vec![1; starts.len()]);
                if ends.len() != starts.len() || axes.len() != starts.len() || steps.len() != starts.len() {
                    return Err(shape_err(node, "starts/ends/axes/steps lengths differ".into()));
                }
                let mut resolved: Vec<SliceAxis> = in_shape.iter().map(|&d| SliceAxis::full(d)).collect();
                for i in 0..starts.len() {
                    let ax =
                        normalize_axis(axes[i], rank).ok_or_else(|| shape_err(node, "axis out of range".into()))?;
                    resolved[ax] = SliceAxis::resolve(in_shape[ax], starts[i], ends[i], steps[i])
                        .ok_or_else(|| shape_err(node, "zero step".into()))?;
                }
                let shape = resolved.iter().map(|a| a.count).collect();
                (Op::Slice { axes: resolved }, vec![a], shape, None)
            }
            other => return Err(OnnxError::UnsupportedOperator(other.to_string())),
        };

        let output = self.define(out_name, out_shape.clone(), constant)?;
        Ok(Some(Node {
            name: node_label(node),
            op_type: node.op_type.clone(),
            op,
            inputs,
            output,
            output_shape: out_shape,
        }))
    }
}

fn node_label(node: &NodeProto) -> String {
    if node.name.is_empty() {
        node.output.first().cloned().unwrap_or_default()
    } else {
        node.name.clone()
    }
}

fn shape_err(node: &NodeProto, reason: String) -> OnnxError {
    OnnxError::ShapeInferenceFailure { node: format!("{} ({})", node_label(node), node.op_type), reason }
}

fn value_info_shape(vi: &proto::ValueInfoProto) -> Result<Vec<usize>, OnnxError> {
    let dims = vi
        .r#type
        .as_ref()
        .and_then(|t| t.tensor_type.as_ref())
        .and_then(|t| t.shape.as_ref())
        .map(|s| s.dim.as_slice())
        .ok_or_else(|| malformed(format!("graph input `{}` has no tensor shape", vi.name)))?;
    dims.iter()
        .enumerate()
        .map(|(i, d)| match &d.value {
            Some(DimValue::DimValue(v)) if *v > 0 => Ok(*v as usize),
            // A symbolic or unset leading dimension is the batch; fix it to 1.
            _ if i == 0 => Ok(1),
            _ => Err(OnnxError::ShapeInferenceFailure {
                node: vi.name.clone(),
                reason: format!("dimension {i} of the graph input is dynamic"),
            }),
        })
        .collect()
}

/// `[.., k] x [k, n] -> [.., n]` and `[.., k] x [k] -> [..]`.
pub(crate) fn matmul_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let k = *a.last()?;
    match b {
        [kb, n] if *kb == k => {
            let mut s = a[..a.len() - 1].to_vec();
            s.push(*n);
            Some(s)
        }
        [kb] if *kb == k => Some(a[..a.len() - 1].to_vec()),
        _ => None,
    }
}

fn reshape_shape(input: &[usize], target: &[i64], allow_zero: bool) -> Result<Vec<usize>, String> {
    let total = numel(input);
    let mut out = Vec::with_capacity(target.len());
    let mut infer_at = None;
    for (i, &t) in target.iter().enumerate() {
        match t {
            -1 if infer_at.is_none() => {
                infer_at = Some(i);
                out.push(1);
            }
            0 if !allow_zero => out.push(*input.get(i).ok_or("0 refers past the input rank")?),
            t if t >= 0 => out.push(t as usize),
            _ => return Err(format!("invalid target shape {target:?}")),
        }
    }
    if let Some(i) = infer_at {
        let known: usize = out.iter().product();
        if known == 0 || total % known != 0 {
            return Err(format!("cannot infer -1 in {target:?} for {total} elements"));
        }
        out[i] = total / known;
    }
    if numel(&out) != total {
        return Err(format!("cannot reshape {input:?} to {target:?}"));
    }
    Ok(out)
}
