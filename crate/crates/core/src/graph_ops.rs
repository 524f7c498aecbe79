//! Graph operators on tuple tensors: message passing `M_d`, pooling `P_d`,
//! unpooling `U_d` and the diagonal `D`, each acting on tuple dimension `d`
//! and dispatching over sparse and masked representations.

use crate::backend::{self, Aggregator, OutputPattern, ScoreFn};
use crate::error::{shape_err, HotError, Result};
use crate::scalar::Scalar;
use crate::tensor::{MaskedTensor, SparseTensor, Tensor};

/// Tuple dimension an operator acts on (0-based, batch axes excluded).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct OpDim(pub usize);

/// Which output positions message passing produces.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PatternPolicy {
    /// Output exists exactly where the input tuple tensor exists. Exact for
    /// supports induced by per-root node sets.
    #[default]
    InputPattern,
    /// Output support is the structural product support.
    FullPattern,
}

fn check_dim<T: Scalar>(h: &Tensor<T>, dim: OpDim) -> Result<()> {
    if dim.0 >= h.tuple_order() {
        return Err(HotError::Rank(format!("tuple dim {} out of range for order {}", dim.0, h.tuple_order())));
    }
    Ok(())
}

/// Permutation that moves tuple dim `d` last, batch axes fixed.
fn to_last_perm(batch: usize, order: usize, d: usize) -> Vec<usize> {
    (0..batch).chain((batch..batch + order).filter(|&k| k != batch + d)).chain(std::iter::once(batch + d)).collect()
}

fn inverse(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    inv
}

fn permute<T: Scalar>(t: &Tensor<T>, perm: &[usize]) -> Result<Tensor<T>> {
    Ok(match t {
        Tensor::Sparse(s) => Tensor::Sparse(s.permute_dims(perm)?),
        Tensor::Masked(m) => Tensor::Masked(m.permute_dims(perm)?),
    })
}

/// Message passing along tuple dimension `dim`:
/// `out[.., i_dim, ..] = AGG_k A[k, i_dim] * H[.., k, ..]`.
///
/// For a 2-D `H`, dim 1 is `H A` (exchange within each subgraph) and dim 0
/// is `Aᵀ H` (exchange between copies of the same node across subgraphs).
pub fn message_passing<T: Scalar>(
    h: &Tensor<T>,
    adj: &Tensor<T>,
    dim: OpDim,
    aggregator: Aggregator,
    policy: PatternPolicy,
) -> Result<Tensor<T>> {
    run_message_passing(h, adj, dim, policy, |x, a, pat| backend::matmul(x, a, aggregator, pat))
}

/// Softmax-weighted message passing with a caller-supplied score. The
/// contribution's `out` index is in the layout where `dim` is the last tuple
/// dim, `left` is the source tuple row and `inner` the source node.
pub fn message_passing_scored<T: Scalar>(
    h: &Tensor<T>,
    adj: &Tensor<T>,
    dim: OpDim,
    score: &ScoreFn<'_, T>,
    policy: PatternPolicy,
) -> Result<Tensor<T>> {
    run_message_passing(h, adj, dim, policy, |x, a, pat| backend::matmul_scored(x, a, score, pat))
}

fn run_message_passing<T: Scalar>(
    h: &Tensor<T>,
    adj: &Tensor<T>,
    dim: OpDim,
    policy: PatternPolicy,
    mm: impl Fn(&Tensor<T>, &Tensor<T>, Option<&OutputPattern<'_>>) -> Result<Tensor<T>>,
) -> Result<Tensor<T>> {
    check_dim(h, dim)?;
    let batch = h.batch_dims();
    let n = h.index_shape()[batch + dim.0];
    let ashape = adj.index_shape();
    if ashape.len() != batch + 2
        || ashape[batch] != n
        || ashape[batch + 1] != n
        || ashape[..batch] != h.index_shape()[..batch]
    {
        return shape_err(format!(
            "adjacency {:?} does not match dim {} of tuple tensor {:?}",
            ashape,
            dim.0,
            h.index_shape()
        ));
    }
    let perm = to_last_perm(batch, h.tuple_order(), dim.0);
    let hp = permute(h, &perm)?;
    let out = match &hp {
        Tensor::Sparse(hs) => {
            let a = match adj {
                Tensor::Sparse(s) => Tensor::Sparse(s.clone()),
                Tensor::Masked(m) if m.batch_dims() == 0 => Tensor::Sparse(m.to_sparse()),
                Tensor::Masked(_) => return shape_err("batched adjacency with a sparse tuple tensor"),
            };
            match policy {
                PatternPolicy::InputPattern => {
                    let pat = OutputPattern::of(hs);
                    let out = mm(&hp, &a, Some(&pat))?;
                    Tensor::Sparse(out.to_sparse().align_to(hs)?)
                }
                PatternPolicy::FullPattern => mm(&hp, &a, None)?,
            }
        }
        Tensor::Masked(hm) => {
            let a = Tensor::Masked(adj.to_masked().with_batch_dims(batch)?);
            let out = mm(&hp, &a, None)?;
            match policy {
                PatternPolicy::InputPattern => Tensor::Masked(out.to_masked().with_mask(hm.mask().to_vec())?),
                PatternPolicy::FullPattern => out,
            }
        }
    };
    permute(&out, &inverse(&perm))
}

/// Collapses tuple dimension `dim`. For a 2-D `H`, dim 0 merges a node's
/// copies across subgraphs and dim 1 merges a subgraph's nodes.
pub fn pooling<T: Scalar>(h: &Tensor<T>, dim: OpDim, op: Aggregator) -> Result<Tensor<T>> {
    check_dim(h, dim)?;
    backend::reduce(h, h.batch_dims() + dim.0, op)
}

/// Reverse of pooling: broadcasts `h` onto the support of `target`, which
/// has one more tuple dimension. Entry `(.., i_dim, ..)` takes `h` at the
/// index with position `dim` deleted.
pub fn unpooling<T: Scalar, U: Scalar>(h: &Tensor<T>, dim: OpDim, target: &Tensor<U>) -> Result<Tensor<T>> {
    if target.tuple_order() != h.tuple_order() + 1 {
        return shape_err(format!(
            "unpooling order-{} tensor onto order-{} target",
            h.tuple_order(),
            target.tuple_order()
        ));
    }
    check_dim(target, dim)?;
    let pattern = OutputPattern::from_tensor(target);
    backend::expand(h, h.batch_dims() + dim.0, &pattern)
}

/// `out[i, ..] = H[i, i, ..]` over the first two tuple dimensions.
pub fn diagonal<T: Scalar>(h: &Tensor<T>) -> Result<Tensor<T>> {
    if h.tuple_order() < 2 {
        return Err(HotError::Rank("diagonal needs tuple order >= 2".into()));
    }
    let b = h.batch_dims();
    let shape = h.index_shape();
    if shape[b] != shape[b + 1] {
        return shape_err(format!("diagonal over unequal dims {} and {}", shape[b], shape[b + 1]));
    }
    let out_shape: Vec<usize> = shape[..b + 1].iter().chain(&shape[b + 2..]).copied().collect();
    match h {
        Tensor::Sparse(s) => {
            let mut coords = Vec::new();
            let mut values = Vec::new();
            for (idx, row) in s.iter() {
                if idx[0] == idx[1] {
                    coords.push(idx[0]);
                    coords.extend_from_slice(&idx[2..]);
                    values.extend_from_slice(row);
                }
            }
            // (i, i, rest) entries are already in (i, rest) order
            let nnz = coords.len() / out_shape.len();
            Ok(Tensor::Sparse(SparseTensor::from_sorted_parts(
                out_shape,
                s.dense_shape().to_vec(),
                nnz,
                coords,
                values,
            )))
        }
        Tensor::Masked(m) => {
            let rl = m.row_len();
            let positions: usize = out_shape.iter().product();
            let in_strides = m.strides();
            let mut data = Vec::with_capacity(positions * rl);
            let mut mask = Vec::with_capacity(positions);
            for pos in 0..positions {
                let idx = crate::tensor::unravel(pos, &out_shape);
                let mut src = 0usize;
                for (k, &i) in idx.iter().enumerate() {
                    let i = i as usize;
                    if k < b {
                        src += i * in_strides[k];
                    } else if k == b {
                        src += i * (in_strides[b] + in_strides[b + 1]);
                    } else {
                        src += i * in_strides[k + 1];
                    }
                }
                mask.push(m.mask()[src]);
                data.extend_from_slice(m.row(src));
            }
            Ok(Tensor::Masked(MaskedTensor::new(out_shape, m.dense_shape().to_vec(), data, mask)?.with_batch_dims(b)?))
        }
    }
}
