//! Tensor algebra without graph semantics: generalized matrix
//! multiplication, addition, reduction and expansion over both
//! representations.

mod matmul;
mod reduce;

pub use matmul::{matmul, matmul_scored, Contribution, ScoreFn};
pub use reduce::{expand, reduce};

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use crate::error::{shape_err, HotError, Result};
use crate::scalar::Scalar;
use crate::tensor::{unravel, MaskedTensor, SparseTensor, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Aggregator {
    Sum,
    Mean,
    Max,
    Min,
    /// Weighted sum with weights `softmax(score)` over the contributing set.
    SoftmaxWeighted,
}

impl Aggregator {
    pub const ALL: [Aggregator; 5] =
        [Aggregator::Sum, Aggregator::Mean, Aggregator::Max, Aggregator::Min, Aggregator::SoftmaxWeighted];

    pub fn name(self) -> &'static str {
        match self {
            Aggregator::Sum => "sum",
            Aggregator::Mean => "mean",
            Aggregator::Max => "max",
            Aggregator::Min => "min",
            Aggregator::SoftmaxWeighted => "softmax",
        }
    }
}

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Aggregator {
    type Err = HotError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sum" => Ok(Aggregator::Sum),
            "mean" => Ok(Aggregator::Mean),
            "max" => Ok(Aggregator::Max),
            "min" => Ok(Aggregator::Min),
            "softmax" | "softmax-weighted" | "softmax_weighted" => Ok(Aggregator::SoftmaxWeighted),
            other => Err(HotError::Config(format!("unknown aggregator `{other}`"))),
        }
    }
}

/// Index set restricting which output positions are computed.
#[derive(Clone, Debug)]
pub struct OutputPattern<'a> {
    shape: Vec<usize>,
    coords: Cow<'a, [i64]>,
    nnz: usize,
}

impl<'a> OutputPattern<'a> {
    pub fn of<U: Scalar>(t: &'a SparseTensor<U>) -> Self {
        Self { shape: t.sparse_shape().to_vec(), coords: Cow::Borrowed(t.coords()), nnz: t.nnz() }
    }

    /// Index set of an arbitrary tensor; masked tensors contribute their
    /// mask-true positions (batch axes included).
    pub fn from_tensor<U: Scalar>(t: &'a Tensor<U>) -> Self {
        match t {
            Tensor::Sparse(s) => Self::of(s),
            Tensor::Masked(m) => Self::from_mask(m),
        }
    }

    pub fn from_mask<U: Scalar>(m: &MaskedTensor<U>) -> OutputPattern<'static> {
        let mut coords = Vec::new();
        let mut nnz = 0;
        for (pos, &v) in m.mask().iter().enumerate() {
            if v {
                coords.extend(unravel(pos, m.masked_shape()));
                nnz += 1;
            }
        }
        OutputPattern { shape: m.masked_shape().to_vec(), coords: Cow::Owned(coords), nnz }
    }

    pub fn from_indices(shape: Vec<usize>, indices: &[Vec<i64>]) -> Result<OutputPattern<'static>> {
        let t = SparseTensor::<i64>::from_entries(shape, vec![0], indices.iter().map(|i| (i.clone(), vec![])))?;
        Ok(OutputPattern { shape: t.sparse_shape().to_vec(), coords: Cow::Owned(t.coords().to_vec()), nnz: t.nnz() })
    }

    /// Every position of `shape`.
    pub fn full(shape: Vec<usize>) -> OutputPattern<'static> {
        let total: usize = shape.iter().product();
        let mut coords = Vec::with_capacity(total * shape.len());
        for pos in 0..total {
            coords.extend(unravel(pos, &shape));
        }
        OutputPattern { shape, coords: Cow::Owned(coords), nnz: total }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn nnz(&self) -> usize {
        self.nnz
    }

    pub fn index(&self, e: usize) -> &[i64] {
        let sd = self.shape.len();
        &self.coords[e * sd..(e + 1) * sd]
    }

    /// The pattern as an empty-row sparse tensor.
    pub fn to_sparse<T: Scalar>(&self) -> SparseTensor<T> {
        SparseTensor::from_sorted_parts(self.shape.clone(), vec![0], self.nnz, self.coords.to_vec(), Vec::new())
    }
}

/// Elementwise sum. Sparse + sparse keeps the union of supports; any masked
/// operand makes the result masked with the union of masks.
pub fn add<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.index_shape() != b.index_shape() || a.dense_shape() != b.dense_shape() {
        return shape_err(format!(
            "add: {:?}++{:?} vs {:?}++{:?}",
            a.index_shape(),
            a.dense_shape(),
            b.index_shape(),
            b.dense_shape()
        ));
    }
    match (a, b) {
        (Tensor::Sparse(x), Tensor::Sparse(y)) => Ok(Tensor::Sparse(add_sparse(x, y))),
        _ => {
            let bd = match (a, b) {
                (Tensor::Masked(x), Tensor::Masked(y)) if x.batch_dims() != y.batch_dims() => {
                    return shape_err("add: masked operands disagree on batch dims");
                }
                (Tensor::Masked(x), _) | (_, Tensor::Masked(x)) => x.batch_dims(),
                _ => unreachable!(),
            };
            let x = a.to_masked();
            let y = b.to_masked();
            let data = x.data().iter().zip(y.data()).map(|(&p, &q)| p + q).collect();
            let mask = x.mask().iter().zip(y.mask()).map(|(&p, &q)| p || q).collect();
            Ok(Tensor::Masked(MaskedTensor::from_raw(
                x.masked_shape().to_vec(),
                x.dense_shape().to_vec(),
                bd,
                data,
                mask,
            )))
        }
    }
}

fn add_sparse<T: Scalar>(x: &SparseTensor<T>, y: &SparseTensor<T>) -> SparseTensor<T> {
    let rl = x.row_len();
    let mut coords = Vec::with_capacity(x.coords().len() + y.coords().len());
    let mut values = Vec::with_capacity(x.values().len() + y.values().len());
    let (mut i, mut j, mut nnz) = (0, 0, 0);
    while i < x.nnz() || j < y.nnz() {
        let ord = if i == x.nnz() {
            std::cmp::Ordering::Greater
        } else if j == y.nnz() {
            std::cmp::Ordering::Less
        } else {
            x.index(i).cmp(y.index(j))
        };
        match ord {
            std::cmp::Ordering::Less => {
                coords.extend_from_slice(x.index(i));
                values.extend_from_slice(x.value(i));
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                coords.extend_from_slice(y.index(j));
                values.extend_from_slice(y.value(j));
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                coords.extend_from_slice(x.index(i));
                values.extend(x.value(i).iter().zip(y.value(j)).map(|(&p, &q)| p + q));
                i += 1;
                j += 1;
            }
        }
        nnz += 1;
    }
    debug_assert_eq!(values.len(), nnz * rl);
    SparseTensor::from_sorted_parts(x.sparse_shape().to_vec(), x.dense_shape().to_vec(), nnz, coords, values)
}
