//! High-order graph tensors and the operator stack for high-order GNNs.
//!
//! Layers, bottom to top:
//! - [`tensor`]: sparse and masked tuple tensors.
//! - [`backend`]: matmul / add / reduce / expand with no graph semantics.
//! - [`graph_ops`]: message passing, pooling, unpooling and diagonal along
//!   tuple dimensions.
//! - [`model`]: forward-only HOGNN architectures built from those operators.
//!
//! [`data`] covers ingestion, tuple sampling, cached preprocessing and
//! batching.

pub mod backend;
pub mod data;
pub mod error;
pub mod graph_ops;
pub mod model;
pub mod scalar;
pub mod tensor;

pub use backend::Aggregator;
pub use error::{HotError, Result};
pub use scalar::Scalar;
pub use tensor::{MaskedTensor, Representation, SparseTensor, Tensor};
