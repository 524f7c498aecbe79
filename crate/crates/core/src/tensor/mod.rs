//! Sparse and masked-dense tuple tensors.
//!
//! A tuple tensor of order `m` is indexed by `m` node indices plus trailing
//! hidden dimensions. [`SparseTensor`] stores only existing tuples;
//! [`MaskedTensor`] stores everything and marks existence in a mask.
//! [`Tensor`] lets operators dispatch over both.

mod masked;
mod sparse;

pub use masked::MaskedTensor;
pub use sparse::SparseTensor;

pub(crate) use masked::{strides_of, unravel};
pub(crate) use sparse::row_len_of;

use crate::error::{shape_err, HotError, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq, Copy)]
pub enum Representation {
    Sparse,
    Dense,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Tensor<T> {
    Sparse(SparseTensor<T>),
    Masked(MaskedTensor<T>),
}

impl<T: Scalar> From<SparseTensor<T>> for Tensor<T> {
    fn from(t: SparseTensor<T>) -> Self {
        Tensor::Sparse(t)
    }
}

impl<T: Scalar> From<MaskedTensor<T>> for Tensor<T> {
    fn from(t: MaskedTensor<T>) -> Self {
        Tensor::Masked(t)
    }
}

pub fn sparse_to_masked<T: Scalar>(sp: &SparseTensor<T>) -> MaskedTensor<T> {
    sp.to_masked()
}

pub fn masked_to_sparse<T: Scalar>(mt: &MaskedTensor<T>) -> SparseTensor<T> {
    mt.to_sparse()
}

impl<T: Scalar> Tensor<T> {
    pub fn representation(&self) -> Representation {
        match self {
            Tensor::Sparse(_) => Representation::Sparse,
            Tensor::Masked(_) => Representation::Dense,
        }
    }

    /// Number of tuple dimensions (batch axes of masked tensors excluded).
    pub fn tuple_order(&self) -> usize {
        match self {
            Tensor::Sparse(t) => t.sparse_dim(),
            Tensor::Masked(t) => t.tuple_order(),
        }
    }

    pub fn batch_dims(&self) -> usize {
        match self {
            Tensor::Sparse(_) => 0,
            Tensor::Masked(t) => t.batch_dims(),
        }
    }

    pub fn dense_shape(&self) -> &[usize] {
        match self {
            Tensor::Sparse(t) => t.dense_shape(),
            Tensor::Masked(t) => t.dense_shape(),
        }
    }

    /// Sparse shape or masked shape, batch axes included.
    pub fn index_shape(&self) -> &[usize] {
        match self {
            Tensor::Sparse(t) => t.sparse_shape(),
            Tensor::Masked(t) => t.masked_shape(),
        }
    }

    pub fn row_len(&self) -> usize {
        row_len_of(self.dense_shape())
    }

    /// Number of existing tuples.
    pub fn num_existing(&self) -> usize {
        match self {
            Tensor::Sparse(t) => t.nnz(),
            Tensor::Masked(t) => t.count_valid(),
        }
    }

    pub fn get(&self, idx: &[i64]) -> Option<&[T]> {
        match self {
            Tensor::Sparse(t) => t.get(idx),
            Tensor::Masked(t) => t.get(idx),
        }
    }

    pub fn as_sparse(&self) -> Option<&SparseTensor<T>> {
        match self {
            Tensor::Sparse(t) => Some(t),
            Tensor::Masked(_) => None,
        }
    }

    pub fn as_masked(&self) -> Option<&MaskedTensor<T>> {
        match self {
            Tensor::Masked(t) => Some(t),
            Tensor::Sparse(_) => None,
        }
    }

    pub fn to_sparse(&self) -> SparseTensor<T> {
        match self {
            Tensor::Sparse(t) => t.clone(),
            Tensor::Masked(t) => t.to_sparse(),
        }
    }

    pub fn to_masked(&self) -> MaskedTensor<T> {
        match self {
            Tensor::Sparse(t) => t.to_masked(),
            Tensor::Masked(t) => t.clone(),
        }
    }

    /// Visits every existing tuple with its full index (batch axes included).
    pub fn for_each_existing(&self, mut f: impl FnMut(&[i64], &[T])) {
        match self {
            Tensor::Sparse(t) => t.iter().for_each(|(i, r)| f(i, r)),
            Tensor::Masked(t) => {
                for (pos, &m) in t.mask().iter().enumerate() {
                    if m {
                        f(&t.unravel(pos), t.row(pos));
                    }
                }
            }
        }
    }

    pub fn map_values<U: Scalar>(&self, f: impl Fn(T) -> U) -> Tensor<U> {
        match self {
            Tensor::Sparse(t) => Tensor::Sparse(t.map_values(f)),
            Tensor::Masked(t) => Tensor::Masked(t.map_values(f)),
        }
    }

    /// Applies `f` to every existing value row. All output rows must have the
    /// same length; the output keeps the input dense shape when the length is
    /// unchanged and becomes `[len]` otherwise.
    pub fn tuplewise_apply<U: Scalar>(&self, f: impl Fn(&[T]) -> Vec<U>) -> Result<Tensor<U>> {
        let mut out_len: Option<usize> = None;
        let mut rows: Vec<Vec<U>> = Vec::new();
        let mut err = None;
        self.for_each_existing(|_, row| {
            let r = f(row);
            match out_len {
                None => out_len = Some(r.len()),
                Some(l) if l != r.len() && err.is_none() => {
                    err = Some(format!("tuplewise function returned rows of length {l} and {}", r.len()));
                }
                _ => {}
            }
            rows.push(r);
        });
        if let Some(msg) = err {
            return shape_err(msg);
        }
        let dense_shape = match out_len {
            Some(l) if l != self.row_len() => vec![l],
            _ => self.dense_shape().to_vec(),
        };
        self.tuplewise_map(dense_shape, |i, _, out| out.copy_from_slice(&rows[i]))
    }

    /// Fills each output row from the existing input row. The closure gets
    /// the running index of the existing tuple, its input row and the output
    /// row to fill.
    pub fn tuplewise_map<U: Scalar>(
        &self,
        dense_shape: Vec<usize>,
        mut f: impl FnMut(usize, &[T], &mut [U]),
    ) -> Result<Tensor<U>> {
        let ol = row_len_of(&dense_shape);
        match self {
            Tensor::Sparse(t) => {
                let mut values = vec![U::zero(); t.nnz() * ol];
                for e in 0..t.nnz() {
                    f(e, t.value(e), &mut values[e * ol..(e + 1) * ol]);
                }
                Ok(Tensor::Sparse(t.with_values(dense_shape, values)?))
            }
            Tensor::Masked(t) => {
                let mut data = vec![U::zero(); t.num_positions() * ol];
                let mut e = 0;
                for (pos, &m) in t.mask().iter().enumerate() {
                    if m {
                        f(e, t.row(pos), &mut data[pos * ol..(pos + 1) * ol]);
                        e += 1;
                    }
                }
                Ok(Tensor::Masked(t.with_data(dense_shape, data)?))
            }
        }
    }

    /// Applies `f` to tuples whose first two tuple indices coincide; all
    /// other tuples are copied unchanged.
    pub fn diagonal_apply(&self, f: impl Fn(&[T]) -> Vec<T>) -> Result<Tensor<T>> {
        if self.tuple_order() < 2 {
            return Err(HotError::Rank(format!("diagonal_apply needs tuple order >= 2, got {}", self.tuple_order())));
        }
        let b = self.batch_dims();
        let rl = self.row_len();
        let mut err = None;
        let mut apply = |idx: &[i64], row: &[T], out: &mut [T]| {
            if idx[b] == idx[b + 1] {
                let r = f(row);
                if r.len() != rl {
                    err.get_or_insert_with(|| format!("diagonal function changed row length {rl} -> {}", r.len()));
                    out.copy_from_slice(row);
                } else {
                    out.copy_from_slice(&r);
                }
            } else {
                out.copy_from_slice(row);
            }
        };
        let out = match self {
            Tensor::Sparse(t) => {
                let mut values = t.values().to_vec();
                for e in 0..t.nnz() {
                    apply(t.index(e), t.value(e), &mut values[e * rl..(e + 1) * rl]);
                }
                Tensor::Sparse(t.with_values(t.dense_shape().to_vec(), values)?)
            }
            Tensor::Masked(t) => {
                let mut data = t.data().to_vec();
                for (pos, &m) in t.mask().iter().enumerate() {
                    if m {
                        apply(&t.unravel(pos), t.row(pos), &mut data[pos * rl..(pos + 1) * rl]);
                    }
                }
                Tensor::Masked(t.with_data(t.dense_shape().to_vec(), data)?)
            }
        };
        match err {
            Some(msg) => shape_err(msg),
            None => Ok(out),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(entries: &[(&[i64], f64)], shape: &[usize]) -> Tensor<f64> {
        Tensor::Sparse(
            SparseTensor::from_entries(shape.to_vec(), vec![], entries.iter().map(|(i, v)| (i.to_vec(), vec![*v])))
                .unwrap(),
        )
    }

    #[test]
    fn tuplewise_square_sparse() {
        let t = sp(&[(&[0, 1], 2.0), (&[1, 0], 3.0)], &[2, 2]);
        let out = t.tuplewise_apply(|r| vec![r[0] * r[0]]).unwrap();
        assert_eq!(out, sp(&[(&[0, 1], 4.0), (&[1, 0], 9.0)], &[2, 2]));
    }

    #[test]
    fn tuplewise_masked_rezeroes() {
        let m = MaskedTensor::new(vec![2, 2], vec![], vec![1.0; 4], vec![true, false, true, true]).unwrap();
        let out = Tensor::Masked(m).tuplewise_apply(|r| vec![r[0] + 1.0]).unwrap();
        assert_eq!(out.as_masked().unwrap().data(), &[2.0, 0.0, 2.0, 2.0]);
    }

    #[test]
    fn tuplewise_identity() {
        let t = sp(&[(&[0, 1], 2.0), (&[1, 1], -1.0)], &[2, 2]);
        assert_eq!(t.tuplewise_apply(|r| r.to_vec()).unwrap(), t);
        let m = Tensor::Masked(t.to_masked());
        assert_eq!(m.tuplewise_apply(|r| r.to_vec()).unwrap(), m);
    }

    #[test]
    fn tuplewise_changes_width() {
        let t = sp(&[(&[0, 1], 2.0)], &[2, 2]);
        let out = t.tuplewise_apply(|r| vec![r[0], r[0], r[0]]).unwrap();
        assert_eq!(out.dense_shape(), &[3]);
    }

    #[test]
    fn tuplewise_inconsistent_width_is_error() {
        let t = sp(&[(&[0, 0], 1.0), (&[0, 1], 2.0)], &[2, 2]);
        let err = t.tuplewise_apply(|r| vec![0.0; r[0] as usize]).unwrap_err();
        assert!(matches!(err, HotError::Shape(_)));
    }

    #[test]
    fn diagonal_scaled_only() {
        let t = sp(&[(&[0, 0], 1.0), (&[0, 1], 1.0)], &[2, 2]);
        let out = t.diagonal_apply(|r| vec![10.0 * r[0]]).unwrap();
        assert_eq!(out, sp(&[(&[0, 0], 10.0), (&[0, 1], 1.0)], &[2, 2]));
    }

    #[test]
    fn diagonal_zeroed_masked() {
        let m = MaskedTensor::new(vec![2, 2], vec![], vec![1.0, 2.0, 3.0, 4.0], vec![true; 4]).unwrap();
        let out = Tensor::Masked(m).diagonal_apply(|_| vec![0.0]).unwrap();
        assert_eq!(out.as_masked().unwrap().data(), &[0.0, 2.0, 3.0, 0.0]);
    }

    #[test]
    fn diagonal_absent_unchanged() {
        let t = sp(&[(&[0, 1], 1.0), (&[1, 0], 2.0)], &[2, 2]);
        assert_eq!(t.diagonal_apply(|_| vec![99.0]).unwrap(), t);
    }

    #[test]
    fn diagonal_needs_rank_two() {
        let t = sp(&[(&[0], 1.0)], &[2]);
        assert!(matches!(t.diagonal_apply(|r| r.to_vec()), Err(HotError::Rank(_))));
    }
}
