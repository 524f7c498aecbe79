use crate::backend::{Aggregator, OutputPattern};
use crate::error::{shape_err, HotError, Result};
use crate::scalar::Scalar;
use crate::tensor::{strides_of, MaskedTensor, SparseTensor, Tensor};

/// Collapses index dimension `dim` (batch axes count for masked tensors).
///
/// Only existing tuples contribute; mean divides by the number of existing
/// contributors. A group without contributors yields no output entry
/// (sparse) or a mask-false slot (masked).
pub fn reduce<T: Scalar>(t: &Tensor<T>, dim: usize, op: Aggregator) -> Result<Tensor<T>> {
    if op == Aggregator::SoftmaxWeighted {
        return Err(HotError::Unsupported("reduce with softmax-weighted aggregator".into()));
    }
    let rank = t.index_shape().len();
    if dim >= rank {
        return Err(HotError::Rank(format!("reduce dim {dim} out of range for rank {rank}")));
    }
    match t {
        Tensor::Sparse(s) => Ok(Tensor::Sparse(reduce_sparse(s, dim, op)?)),
        Tensor::Masked(m) => Ok(Tensor::Masked(reduce_masked(m, dim, op))),
    }
}

fn fold_row<T: Scalar>(op: Aggregator, acc: &mut [T], row: &[T], first: bool) {
    for (a, &v) in acc.iter_mut().zip(row) {
        *a = if first {
            v
        } else {
            match op {
                Aggregator::Max => a.max_of(v),
                Aggregator::Min => a.min_of(v),
                _ => *a + v,
            }
        };
    }
}

fn finish_row<T: Scalar>(op: Aggregator, acc: &mut [T], count: usize) {
    if op == Aggregator::Mean && count > 0 {
        for a in acc.iter_mut() {
            *a = a.div_count(count);
        }
    }
}

fn reduce_sparse<T: Scalar>(s: &SparseTensor<T>, dim: usize, op: Aggregator) -> Result<SparseTensor<T>> {
    let sd = s.sparse_dim();
    // move `dim` last so each output group is a contiguous run
    let perm: Vec<usize> = (0..sd).filter(|&k| k != dim).chain(std::iter::once(dim)).collect();
    let p = s.permute_dims(&perm)?;
    let out_shape: Vec<usize> = p.sparse_shape()[..sd - 1].to_vec();
    let mut coords = Vec::new();
    let mut values: Vec<T> = Vec::new();
    let mut nnz = 0;
    let mut e = 0;
    while e < p.nnz() {
        let key = &p.index(e)[..sd - 1];
        let start = values.len();
        values.extend_from_slice(p.value(e));
        let mut count = 1;
        let mut f = e + 1;
        while f < p.nnz() && &p.index(f)[..sd - 1] == key {
            fold_row(op, &mut values[start..], p.value(f), false);
            count += 1;
            f += 1;
        }
        finish_row(op, &mut values[start..], count);
        coords.extend_from_slice(key);
        nnz += 1;
        e = f;
    }
    Ok(SparseTensor::from_sorted_parts(out_shape, p.dense_shape().to_vec(), nnz, coords, values))
}

fn reduce_masked<T: Scalar>(m: &MaskedTensor<T>, dim: usize, op: Aggregator) -> MaskedTensor<T> {
    let shape = m.masked_shape();
    let outer: usize = shape[..dim].iter().product();
    let mid = shape[dim];
    let inner: usize = shape[dim + 1..].iter().product();
    let rl = m.row_len();
    let out_shape: Vec<usize> = shape.iter().enumerate().filter(|&(k, _)| k != dim).map(|(_, &s)| s).collect();
    let mut data = vec![T::zero(); outer * inner * rl];
    let mut mask = vec![false; outer * inner];
    for o in 0..outer {
        for i in 0..inner {
            let q = o * inner + i;
            let acc = &mut data[q * rl..(q + 1) * rl];
            let mut count = 0;
            for k in 0..mid {
                let pos = (o * mid + k) * inner + i;
                if m.mask()[pos] {
                    fold_row(op, acc, m.row(pos), count == 0);
                    count += 1;
                }
            }
            finish_row(op, acc, count);
            mask[q] = count > 0;
        }
    }
    let bd = if dim < m.batch_dims() { m.batch_dims() - 1 } else { m.batch_dims() };
    MaskedTensor::from_raw(out_shape, m.dense_shape().to_vec(), bd, data, mask)
}

/// Inserts a new index dimension at `dim`. The output exists exactly on
/// `target`; the entry at index `(.., i, ..)` copies the input row at the
/// index with position `dim` deleted, or zeros when that row is absent.
pub fn expand<T: Scalar>(t: &Tensor<T>, dim: usize, target: &OutputPattern<'_>) -> Result<Tensor<T>> {
    let in_shape = t.index_shape();
    let tshape = target.shape();
    if tshape.len() != in_shape.len() + 1 || dim >= tshape.len() {
        return shape_err(format!("expand: target shape {tshape:?} does not extend {in_shape:?} at dim {dim}"));
    }
    let reduced: Vec<usize> = tshape.iter().enumerate().filter(|&(k, _)| k != dim).map(|(_, &s)| s).collect();
    if reduced != in_shape {
        return shape_err(format!("expand: target shape {tshape:?} does not extend {in_shape:?} at dim {dim}"));
    }
    let rl = t.row_len();
    let mut key: Vec<i64> = Vec::with_capacity(in_shape.len());
    match t {
        Tensor::Sparse(s) => {
            let mut values = Vec::with_capacity(target.nnz() * rl);
            for e in 0..target.nnz() {
                key.clear();
                key.extend(target.index(e).iter().enumerate().filter(|&(k, _)| k != dim).map(|(_, &i)| i));
                match s.get(&key) {
                    Some(row) => values.extend_from_slice(row),
                    None => values.extend(std::iter::repeat_n(T::zero(), rl)),
                }
            }
            let pat = target.to_sparse::<T>();
            Ok(Tensor::Sparse(pat.with_values(s.dense_shape().to_vec(), values)?))
        }
        Tensor::Masked(m) => {
            if dim < m.batch_dims() {
                return Err(HotError::Rank("expand cannot insert a batch dimension".into()));
            }
            let out_strides = strides_of(tshape);
            let in_strides = m.strides();
            let positions: usize = tshape.iter().product();
            let mut data = vec![T::zero(); positions * rl];
            let mut mask = vec![false; positions];
            for e in 0..target.nnz() {
                let idx = target.index(e);
                let po: usize = idx.iter().zip(&out_strides).map(|(&i, &s)| i as usize * s).sum();
                let pi: usize = idx
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != dim)
                    .zip(&in_strides)
                    .map(|((_, &i), &s)| i as usize * s)
                    .sum();
                mask[po] = true;
                if m.mask()[pi] {
                    data[po * rl..(po + 1) * rl].copy_from_slice(m.row(pi));
                }
            }
            Ok(Tensor::Masked(MaskedTensor::from_raw(
                tshape.to_vec(),
                m.dense_shape().to_vec(),
                m.batch_dims(),
                data,
                mask,
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(shape: &[usize], entries: &[(&[i64], f64)]) -> Tensor<f64> {
        Tensor::Sparse(
            SparseTensor::from_entries(shape.to_vec(), vec![], entries.iter().map(|(i, v)| (i.to_vec(), vec![*v])))
                .unwrap(),
        )
    }

    fn h() -> Tensor<f64> {
        sp(&[2, 2], &[(&[0, 0], 2.0), (&[0, 1], 3.0), (&[1, 1], 5.0)])
    }

    #[test]
    fn reduce_sum_dim1() {
        assert_eq!(reduce(&h(), 1, Aggregator::Sum).unwrap(), sp(&[2], &[(&[0], 5.0), (&[1], 5.0)]));
    }

    #[test]
    fn reduce_mean_counts_existing() {
        assert_eq!(reduce(&h(), 1, Aggregator::Mean).unwrap(), sp(&[2], &[(&[0], 2.5), (&[1], 5.0)]));
    }

    #[test]
    fn reduce_dim0_regroups() {
        assert_eq!(reduce(&h(), 0, Aggregator::Max).unwrap(), sp(&[2], &[(&[0], 2.0), (&[1], 5.0)]));
    }

    #[test]
    fn reduce_masked_max_ignores_invalid() {
        let m = MaskedTensor::new(vec![2, 2], vec![], vec![1.0, 3.0, 5.0, 7.0], vec![true, false, true, true]).unwrap();
        let out = reduce(&Tensor::Masked(m), 1, Aggregator::Max).unwrap();
        let om = out.as_masked().unwrap();
        assert_eq!(om.data(), &[1.0, 7.0]);
        assert_eq!(om.mask(), &[true, true]);
    }

    #[test]
    fn reduce_masked_empty_slice_is_invalid() {
        let m =
            MaskedTensor::new(vec![2, 2], vec![], vec![1.0, 3.0, 5.0, 7.0], vec![false, false, true, true]).unwrap();
        let om = reduce(&Tensor::Masked(m), 1, Aggregator::Mean).unwrap();
        assert_eq!(om.as_masked().unwrap().mask(), &[false, true]);
        assert_eq!(om.as_masked().unwrap().data(), &[0.0, 6.0]);
    }

    #[test]
    fn reduce_errors() {
        assert!(matches!(reduce(&h(), 2, Aggregator::Sum), Err(HotError::Rank(_))));
        assert!(matches!(reduce(&h(), 0, Aggregator::SoftmaxWeighted), Err(HotError::Unsupported(_))));
    }

    #[test]
    fn expand_dim0_takes_last_index() {
        let v = sp(&[2], &[(&[0], 4.0), (&[1], 9.0)]);
        let target = OutputPattern::from_indices(vec![2, 2], &[vec![0, 0], vec![0, 1], vec![1, 1]]).unwrap();
        let out = expand(&v, 0, &target).unwrap();
        assert_eq!(out, sp(&[2, 2], &[(&[0, 0], 4.0), (&[0, 1], 9.0), (&[1, 1], 9.0)]));
        let outm = expand(&Tensor::Masked(v.to_masked()), 0, &target).unwrap();
        assert_eq!(outm.to_sparse(), out.to_sparse());
    }

    #[test]
    fn expand_then_reduce_diag_roundtrip() {
        let v = sp(&[3], &[(&[0], 1.0), (&[1], -2.0), (&[2], 7.0)]);
        let diag = OutputPattern::from_indices(vec![3, 3], &[vec![0, 0], vec![1, 1], vec![2, 2]]).unwrap();
        let up = expand(&v, 1, &diag).unwrap();
        assert_eq!(reduce(&up, 1, Aggregator::Sum).unwrap(), v);
    }

    #[test]
    fn expand_empty_target() {
        let v = sp(&[2], &[(&[0], 4.0)]);
        let target = OutputPattern::from_indices(vec![2, 2], &[]).unwrap();
        assert_eq!(expand(&v, 1, &target).unwrap().num_existing(), 0);
    }

    #[test]
    fn expand_incompatible_target() {
        let v = sp(&[2], &[(&[0], 4.0)]);
        let target = OutputPattern::full(vec![3, 2]);
        assert!(matches!(expand(&v, 1, &target), Err(HotError::Shape(_))));
    }
}
