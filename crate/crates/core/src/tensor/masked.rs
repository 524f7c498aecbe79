use crate::error::{shape_err, HotError, Result};
use crate::scalar::Scalar;
use crate::tensor::sparse::{check_perm, row_len_of, SparseTensor};

/// Dense data plus a boolean existence mask over the leading masked dims.
///
/// The first `batch_dims` masked dimensions index independent graphs of a
/// padded batch; the rest are tuple dimensions. Rows at mask-false positions
/// always hold zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskedTensor<T> {
    masked_shape: Vec<usize>,
    dense_shape: Vec<usize>,
    batch_dims: usize,
    data: Vec<T>,
    mask: Vec<bool>,
}

impl<T: Scalar> MaskedTensor<T> {
    /// Validates shapes and zeroes every row whose mask slot is false.
    pub fn new(masked_shape: Vec<usize>, dense_shape: Vec<usize>, data: Vec<T>, mask: Vec<bool>) -> Result<Self> {
        let positions: usize = masked_shape.iter().product();
        let rl = row_len_of(&dense_shape);
        if mask.len() != positions {
            return shape_err(format!(
                "mask has {} slots, masked shape {masked_shape:?} needs {positions}",
                mask.len()
            ));
        }
        if data.len() != positions * rl {
            return shape_err(format!(
                "data has {} elements, shape {masked_shape:?} ++ {dense_shape:?} needs {}",
                data.len(),
                positions * rl
            ));
        }
        let mut t = Self { masked_shape, dense_shape, batch_dims: 0, data, mask };
        t.rezero();
        Ok(t)
    }

    pub fn zeros(masked_shape: Vec<usize>, dense_shape: Vec<usize>) -> Self {
        let positions: usize = masked_shape.iter().product();
        let rl = row_len_of(&dense_shape);
        Self {
            masked_shape,
            dense_shape,
            batch_dims: 0,
            data: vec![T::zero(); positions * rl],
            mask: vec![false; positions],
        }
    }

    pub(crate) fn from_raw(
        masked_shape: Vec<usize>,
        dense_shape: Vec<usize>,
        batch_dims: usize,
        data: Vec<T>,
        mask: Vec<bool>,
    ) -> Self {
        let mut t = Self { masked_shape, dense_shape, batch_dims, data, mask };
        t.rezero();
        t
    }

    /// Marks the leading `batch_dims` masked dimensions as batch axes.
    pub fn with_batch_dims(mut self, batch_dims: usize) -> Result<Self> {
        if batch_dims > self.masked_shape.len() {
            return Err(HotError::Rank(format!("{batch_dims} batch dims for masked rank {}", self.masked_shape.len())));
        }
        self.batch_dims = batch_dims;
        Ok(self)
    }

    pub(crate) fn rezero(&mut self) {
        let rl = self.row_len();
        if rl == 0 {
            return;
        }
        for (p, &m) in self.mask.iter().enumerate() {
            if !m {
                self.data[p * rl..(p + 1) * rl].fill(T::zero());
            }
        }
    }

    pub fn masked_shape(&self) -> &[usize] {
        &self.masked_shape
    }

    pub fn dense_shape(&self) -> &[usize] {
        &self.dense_shape
    }

    pub fn batch_dims(&self) -> usize {
        self.batch_dims
    }

    /// Number of tuple (non-batch) masked dimensions.
    pub fn tuple_order(&self) -> usize {
        self.masked_shape.len() - self.batch_dims
    }

    pub fn rank(&self) -> usize {
        self.masked_shape.len()
    }

    pub fn row_len(&self) -> usize {
        row_len_of(&self.dense_shape)
    }

    pub fn num_positions(&self) -> usize {
        self.mask.len()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn count_valid(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn row(&self, pos: usize) -> &[T] {
        let rl = self.row_len();
        &self.data[pos * rl..(pos + 1) * rl]
    }

    pub fn strides(&self) -> Vec<usize> {
        strides_of(&self.masked_shape)
    }

    /// Flat position of a masked-shape index, `None` when out of range.
    pub fn position(&self, idx: &[i64]) -> Option<usize> {
        if idx.len() != self.masked_shape.len() {
            return None;
        }
        let mut pos = 0usize;
        for (&i, &s) in idx.iter().zip(&self.masked_shape) {
            if i < 0 || i as usize >= s {
                return None;
            }
            pos = pos * s + i as usize;
        }
        Some(pos)
    }

    pub fn unravel(&self, pos: usize) -> Vec<i64> {
        unravel(pos, &self.masked_shape)
    }

    /// Row at `idx` if that slot exists.
    pub fn get(&self, idx: &[i64]) -> Option<&[T]> {
        let pos = self.position(idx)?;
        self.mask[pos].then(|| self.row(pos))
    }

    /// Reorders masked dimensions: output dim `k` is input dim `perm[k]`.
    /// Batch dimensions must stay in place.
    pub fn permute_dims(&self, perm: &[usize]) -> Result<Self> {
        let r = self.rank();
        check_perm(perm, r)?;
        if perm[..self.batch_dims].iter().enumerate().any(|(k, &p)| k != p) {
            return Err(HotError::Rank("permutation moves a batch dimension".into()));
        }
        if perm.iter().enumerate().all(|(k, &p)| k == p) {
            return Ok(self.clone());
        }
        let shape: Vec<usize> = perm.iter().map(|&p| self.masked_shape[p]).collect();
        let in_strides = self.strides();
        let rl = self.row_len();
        let n = self.num_positions();
        let mut data = vec![T::zero(); self.data.len()];
        let mut mask = vec![false; n];
        let mut idx = vec![0usize; r];
        for out_pos in 0..n {
            let src: usize = idx.iter().zip(perm).map(|(&i, &p)| i * in_strides[p]).sum();
            mask[out_pos] = self.mask[src];
            data[out_pos * rl..(out_pos + 1) * rl].copy_from_slice(self.row(src));
            for k in (0..r).rev() {
                idx[k] += 1;
                if idx[k] < shape[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Ok(Self { masked_shape: shape, dense_shape: self.dense_shape.clone(), batch_dims: self.batch_dims, data, mask })
    }

    pub fn map_values<U: Scalar>(&self, f: impl Fn(T) -> U) -> MaskedTensor<U> {
        MaskedTensor {
            masked_shape: self.masked_shape.clone(),
            dense_shape: self.dense_shape.clone(),
            batch_dims: self.batch_dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
            mask: self.mask.clone(),
        }
    }

    /// Same mask, replaced data. Rows at mask-false slots are re-zeroed.
    pub fn with_data<U: Scalar>(&self, dense_shape: Vec<usize>, data: Vec<U>) -> Result<MaskedTensor<U>> {
        if data.len() != self.num_positions() * row_len_of(&dense_shape) {
            return shape_err("data length does not match mask and dense shape");
        }
        Ok(MaskedTensor::from_raw(self.masked_shape.clone(), dense_shape, self.batch_dims, data, self.mask.clone()))
    }

    /// Same data, mask replaced by `mask` (positions leaving the mask are
    /// zeroed; positions entering it keep whatever data they hold, which is
    /// zero by the padding invariant).
    pub fn with_mask(&self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.num_positions() {
            return shape_err("mask length mismatch");
        }
        Ok(Self::from_raw(
            self.masked_shape.clone(),
            self.dense_shape.clone(),
            self.batch_dims,
            self.data.clone(),
            mask,
        ))
    }

    /// Entries at mask-true positions, coalesced. Batch dims become plain
    /// sparse dims.
    pub fn to_sparse(&self) -> SparseTensor<T> {
        let rl = self.row_len();
        let mut coords = Vec::new();
        let mut values = Vec::new();
        let mut nnz = 0;
        for (pos, &m) in self.mask.iter().enumerate() {
            if m {
                coords.extend(self.unravel(pos));
                values.extend_from_slice(&self.data[pos * rl..(pos + 1) * rl]);
                nnz += 1;
            }
        }
        SparseTensor::from_sorted_parts(self.masked_shape.clone(), self.dense_shape.clone(), nnz, coords, values)
    }
}

impl<T: Scalar> SparseTensor<T> {
    /// Scatters entries into a dense tensor; the mask is true exactly at the
    /// stored index set.
    pub fn to_masked(&self) -> MaskedTensor<T> {
        let mut out = MaskedTensor::zeros(self.sparse_shape().to_vec(), self.dense_shape().to_vec());
        let strides = out.strides();
        let rl = self.row_len();
        for (idx, row) in self.iter() {
            let pos: usize = idx.iter().zip(&strides).map(|(&i, &s)| i as usize * s).sum();
            out.mask[pos] = true;
            out.data[pos * rl..(pos + 1) * rl].copy_from_slice(row);
        }
        out
    }
}

pub(crate) fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    strides
}

pub(crate) fn unravel(mut pos: usize, shape: &[usize]) -> Vec<i64> {
    let mut idx = vec![0i64; shape.len()];
    for k in (0..shape.len()).rev() {
        idx[k] = (pos % shape[k]) as i64;
        pos /= shape[k];
    }
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scatter_single_entry() {
        let sp = SparseTensor::from_entries(vec![2, 2], vec![], vec![(vec![0, 1], vec![7i64])]).unwrap();
        let m = sp.to_masked();
        assert_eq!(m.data(), &[0, 7, 0, 0]);
        assert_eq!(m.mask(), &[false, true, false, false]);
    }

    #[test]
    fn empty_sparse_scatters_to_zeros() {
        let sp = SparseTensor::<f64>::empty(vec![2, 2], vec![]);
        let m = sp.to_masked();
        assert!(m.data().iter().all(|&v| v == 0.0));
        assert!(m.mask().iter().all(|&b| !b));
    }

    #[test]
    fn gather_inverse() {
        let m = MaskedTensor::new(vec![2, 2], vec![], vec![0i64, 7, 0, 0], vec![false, true, false, false]).unwrap();
        let sp = m.to_sparse();
        assert_eq!(sp.indices(), vec![vec![0], vec![1]]);
        assert_eq!(sp.values(), &[7]);
    }

    #[test]
    fn all_false_mask_gives_empty_sparse() {
        let m = MaskedTensor::new(vec![2, 2], vec![], vec![1.0, 2.0, 3.0, 4.0], vec![false; 4]).unwrap();
        assert_eq!(m.to_sparse().nnz(), 0);
    }

    #[test]
    fn mask_true_zero_value_is_kept() {
        let m = MaskedTensor::new(vec![2], vec![], vec![0i64, 5], vec![true, false]).unwrap();
        let sp = m.to_sparse();
        assert_eq!(sp.nnz(), 1);
        assert_eq!(sp.get(&[0]), Some(&[0][..]));
    }

    #[test]
    fn construction_zeroes_padding() {
        let m = MaskedTensor::new(vec![2], vec![2], vec![1.0, 2.0, 3.0, 4.0], vec![false, true]).unwrap();
        assert_eq!(m.data(), &[0.0, 0.0, 3.0, 4.0]);
    }

    #[test]
    fn shape_mismatch_rejected() {
        assert!(MaskedTensor::new(vec![2, 2], vec![], vec![0i64; 3], vec![true; 4]).is_err());
        assert!(MaskedTensor::new(vec![2, 2], vec![], vec![0i64; 4], vec![true; 3]).is_err());
    }

    #[test]
    fn permute_transposes_and_keeps_batch() {
        let m = MaskedTensor::new(vec![2, 3], vec![], (0..6i64).collect(), vec![true; 6]).unwrap();
        let t = m.permute_dims(&[1, 0]).unwrap();
        assert_eq!(t.masked_shape(), &[3, 2]);
        assert_eq!(t.data(), &[0, 3, 1, 4, 2, 5]);
        let b = m.with_batch_dims(1).unwrap();
        assert!(b.permute_dims(&[1, 0]).is_err());
    }
}
