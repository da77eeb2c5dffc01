//! Programmatic construction of ONNX models, used for fixtures and tests.

use prost::Message;

use super::proto::{
    attribute_type, data_type, AttributeProto, DimValue, Dimension, GraphProto, ModelProto, NodeProto,
    OperatorSetIdProto, TensorProto, TensorShapeProto, TypeProto, TypeProtoTensor, ValueInfoProto,
};

pub const DEFAULT_OPSET: i64 = 13;

pub fn float_tensor(name: &str, dims: &[usize], data: &[f32]) -> TensorProto {
    TensorProto {
        dims: dims.iter().map(|&d| d as i64).collect(),
        data_type: data_type::FLOAT,
        raw_data: data.iter().flat_map(|v| v.to_le_bytes()).collect(),
        name: name.to_string(),
        ..Default::default()
    }
}

pub fn int64_tensor(name: &str, data: &[i64]) -> TensorProto {
    TensorProto {
        dims: vec![data.len() as i64],
        data_type: data_type::INT64,
        int64_data: data.to_vec(),
        name: name.to_string(),
        ..Default::default()
    }
}

pub fn attr_int(name: &str, v: i64) -> AttributeProto {
    AttributeProto { name: name.into(), i: v, r#type: attribute_type::INT, ..Default::default() }
}

pub fn attr_float(name: &str, v: f32) -> AttributeProto {
    AttributeProto { name: name.into(), f: v, r#type: attribute_type::FLOAT, ..Default::default() }
}

pub fn attr_ints(name: &str, v: &[i64]) -> AttributeProto {
    AttributeProto { name: name.into(), ints: v.to_vec(), r#type: attribute_type::INTS, ..Default::default() }
}

pub fn attr_tensor(name: &str, t: TensorProto) -> AttributeProto {
    AttributeProto { name: name.into(), t: Some(t), r#type: attribute_type::TENSOR, ..Default::default() }
}

fn value_info(name: &str, dims: &[usize]) -> ValueInfoProto {
    ValueInfoProto {
        name: name.to_string(),
        r#type: Some(TypeProto {
            tensor_type: Some(TypeProtoTensor {
                elem_type: data_type::FLOAT,
                shape: Some(TensorShapeProto {
                    dim: dims.iter().map(|&d| Dimension { value: Some(DimValue::DimValue(d as i64)) }).collect(),
                }),
            }),
        }),
    }
}

/// Incremental builder over a single graph.
#[derive(Debug, Clone)]
pub struct GraphBuilder {
    graph: GraphProto,
    opset: i64,
    counter: usize,
}

impl GraphBuilder {
    pub fn new(input: &str, input_dims: &[usize]) -> Self {
        GraphBuilder {
            graph: GraphProto {
                name: "graph".into(),
                input: vec![value_info(input, input_dims)],
                ..Default::default()
            },
            opset: DEFAULT_OPSET,
            counter: 0,
        }
    }

    pub fn opset(mut self, opset: i64) -> Self {
        self.opset = opset;
        self
    }

    pub fn fresh(&mut self, prefix: &str) -> String {
        self.counter += 1;
        format!("{prefix}_{}", self.counter)
    }

    pub fn initializer(&mut self, t: TensorProto) -> String {
        let name = t.name.clone();
        self.graph.initializer.push(t);
        name
    }

    /// Adds a node with a fresh output name and returns that name.
    pub fn node(&mut self, op_type: &str, inputs: &[&str], attrs: Vec<AttributeProto>) -> String {
        let out = self.fresh(&op_type.to_lowercase());
        self.graph.node.push(NodeProto {
            input: inputs.iter().map(|s| s.to_string()).collect(),
            output: vec![out.clone()],
            name: out.clone(),
            op_type: op_type.into(),
            attribute: attrs,
            ..Default::default()
        });
        out
    }

    pub fn finish(mut self, output: &str, output_dims: &[usize]) -> ModelProto {
        self.graph.output = vec![value_info(output, output_dims)];
        ModelProto {
            ir_version: 8,
            producer_name: "vnnharness".into(),
            producer_version: env!("CARGO_PKG_VERSION").into(),
            graph: Some(self.graph),
            opset_import: vec![OperatorSetIdProto { domain: String::new(), version: self.opset }],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    fn op_type(self) -> &'static str {
        match self {
            Activation::Relu => "Relu",
            Activation::Sigmoid => "Sigmoid",
            Activation::Tanh => "Tanh",
        }
    }
}

/// Fully connected layer `y = x W + b` with `W` stored `[inputs, outputs]`
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl DenseLayer {
    pub fn new(inputs: usize, outputs: usize, weights: Vec<f32>, bias: Vec<f32>) -> Self {
        assert_eq!(weights.len(), inputs * outputs);
        assert_eq!(bias.len(), outputs);
        DenseLayer { inputs, outputs, weights, bias }
    }

    pub fn weight(&self, i: usize, j: usize) -> f32 {
        self.weights[i * self.outputs + j]
    }
}

/// How dense layers are encoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenseStyle {
    /// `MatMul` followed by `Add`.
    MatMulAdd,
    /// A single `Gemm` with `transB = 1` (weights stored `[outputs, inputs]`).
    Gemm,
}

/// Builds an MLP with input shape `[1, n]`; `activation` follows every
/// layer except the last.
pub fn mlp_model(layers: &[DenseLayer], activation: Activation, style: DenseStyle) -> ModelProto {
    assert!(!layers.is_empty());
    let mut g = GraphBuilder::new("input", &[1, layers[0].inputs]);
    let mut cur = "input".to_string();
    for (li, layer) in layers.iter().enumerate() {
        let b = g.initializer(float_tensor(&format!("b{li}"), &[layer.outputs], &layer.bias));
        cur = match style {
            DenseStyle::MatMulAdd => {
                let w = g.initializer(float_tensor(&format!("w{li}"), &[layer.inputs, layer.outputs], &layer.weights));
                let mm = g.node("MatMul", &[&cur, &w], vec![]);
                g.node("Add", &[&mm, &b], vec![])
            }
            DenseStyle::Gemm => {
                let mut wt = Vec::with_capacity(layer.weights.len());
                for j in 0..layer.outputs {
                    for i in 0..layer.inputs {
                        wt.push(layer.weight(i, j));
                    }
                }
                let w = g.initializer(float_tensor(&format!("w{li}"), &[layer.outputs, layer.inputs], &wt));
                g.node("Gemm", &[&cur, &w, &b], vec![attr_int("transB", 1)])
            }
        };
        if li + 1 < layers.len() {
            cur = g.node(activation.op_type(), &[&cur], vec![]);
        }
    }
    g.finish(&cur, &[1, layers.last().unwrap().outputs])
}

pub fn encode(model: &ModelProto) -> Vec<u8> {
    model.encode_to_vec()
}

/// Single Gemm computing the identity on `n` inputs.
pub fn identity_model(n: usize) -> ModelProto {
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        w[i * n + i] = 1.0;
    }
    mlp_model(&[DenseLayer::new(n, n, w, vec![0.0; n])], Activation::Relu, DenseStyle::Gemm)
}
