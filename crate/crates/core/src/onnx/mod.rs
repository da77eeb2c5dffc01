//! Minimal ONNX runtime for fully connected networks.
//!
//! Supported operators: MatMul, Gemm, Add, Sub, Mul and Div (by a constant),
//! Relu, Sigmoid, Tanh, Flatten, Reshape, Transpose, Concat, Slice and
//! Constant. Shapes are inferred statically when the model is loaded, and
//! execution is float32 with a fixed accumulation order, so repeated runs
//! are bit-identical.

pub mod builder;
mod exec;
mod model;
pub mod proto;
mod tensor;

pub use exec::sigmoid;
pub use model::{load_network, Network, Node, Op};
pub use tensor::{broadcast_binary, broadcast_shape, numel, SliceAxis, Tensor};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OnnxError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed model: {0}")]
    MalformedModel(String),
    #[error("unsupported operator: {0}")]
    UnsupportedOperator(String),
    #[error("shape inference failed at {node}: {reason}")]
    ShapeInferenceFailure { node: String, reason: String },
    #[error("input has {got} elements, network expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },
}
