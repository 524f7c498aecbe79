use std::cmp::Ordering;

use crate::error::{shape_err, HotError, Result};
use crate::scalar::Scalar;

/// Coalesced coordinate-format tensor.
///
/// Entry `e` has index tuple `index(e)` (length `sparse_dim`) and value row
/// `value(e)` (length `row_len`, the product of `dense_shape`). Entries are
/// kept strictly sorted by index tuple, so lookups are binary searches and
/// two tensors with the same entries compare equal.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseTensor<T> {
    sparse_shape: Vec<usize>,
    dense_shape: Vec<usize>,
    nnz: usize,
    coords: Vec<i64>,
    values: Vec<T>,
}

pub(crate) fn row_len_of(dense_shape: &[usize]) -> usize {
    dense_shape.iter().product()
}

impl<T: Scalar> SparseTensor<T> {
    pub fn empty(sparse_shape: Vec<usize>, dense_shape: Vec<usize>) -> Self {
        Self { sparse_shape, dense_shape, nnz: 0, coords: Vec::new(), values: Vec::new() }
    }

    /// Builds a coalesced tensor from `(index, value row)` pairs. Duplicate
    /// indices have their rows summed.
    pub fn from_entries<I>(sparse_shape: Vec<usize>, dense_shape: Vec<usize>, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<i64>, Vec<T>)>,
    {
        let sd = sparse_shape.len();
        let rl = row_len_of(&dense_shape);
        let mut coords = Vec::new();
        let mut values = Vec::new();
        for (idx, row) in entries {
            if idx.len() != sd {
                return shape_err(format!("index tuple has length {}, expected {sd}", idx.len()));
            }
            if row.len() != rl {
                return shape_err(format!("value row has length {}, expected {rl}", row.len()));
            }
            coords.extend_from_slice(&idx);
            values.extend_from_slice(&row);
        }
        Self::from_coo(sparse_shape, dense_shape, coords, values)
    }

    /// Coalesces flat entry-major coordinates (`nnz * sparse_dim`) and
    /// value rows (`nnz * row_len`).
    pub fn from_coo(
        sparse_shape: Vec<usize>,
        dense_shape: Vec<usize>,
        coords: Vec<i64>,
        values: Vec<T>,
    ) -> Result<Self> {
        let sd = sparse_shape.len();
        let rl = row_len_of(&dense_shape);
        let nnz = if sd > 0 {
            if !coords.len().is_multiple_of(sd) {
                return shape_err("coordinate buffer is not a multiple of sparse_dim");
            }
            coords.len() / sd
        } else if rl > 0 {
            values.len() / rl
        } else {
            return shape_err("cannot infer entry count for a 0-d tensor with empty rows");
        };
        if values.len() != nnz * rl {
            return shape_err(format!("{} values for {nnz} entries of row length {rl}", values.len()));
        }
        check_bounds(&sparse_shape, &coords)?;

        let mut order: Vec<usize> = (0..nnz).collect();
        let sorted = (1..nnz).all(|e| coords[(e - 1) * sd..e * sd] < coords[e * sd..(e + 1) * sd]);
        if sorted {
            return Ok(Self { sparse_shape, dense_shape, nnz, coords, values });
        }
        order.sort_by(|&a, &b| coords[a * sd..(a + 1) * sd].cmp(&coords[b * sd..(b + 1) * sd]));

        let mut out_coords: Vec<i64> = Vec::with_capacity(coords.len());
        let mut out_values: Vec<T> = Vec::with_capacity(values.len());
        let mut out_nnz = 0usize;
        for &e in &order {
            let idx = &coords[e * sd..(e + 1) * sd];
            let row = &values[e * rl..(e + 1) * rl];
            let dup = out_nnz > 0 && (sd == 0 || &out_coords[(out_nnz - 1) * sd..] == idx);
            if dup {
                let acc = &mut out_values[(out_nnz - 1) * rl..];
                for (a, &v) in acc.iter_mut().zip(row) {
                    *a = *a + v;
                }
            } else {
                out_coords.extend_from_slice(idx);
                out_values.extend_from_slice(row);
                out_nnz += 1;
            }
        }
        Ok(Self { sparse_shape, dense_shape, nnz: out_nnz, coords: out_coords, values: out_values })
    }

    /// Caller guarantees coordinates are in bounds and strictly sorted.
    pub(crate) fn from_sorted_parts(
        sparse_shape: Vec<usize>,
        dense_shape: Vec<usize>,
        nnz: usize,
        coords: Vec<i64>,
        values: Vec<T>,
    ) -> Self {
        let t = Self { sparse_shape, dense_shape, nnz, coords, values };
        debug_assert!(t.check_invariants().is_ok(), "{:?}", t.check_invariants());
        t
    }

    pub fn check_invariants(&self) -> Result<()> {
        let sd = self.sparse_dim();
        if self.coords.len() != self.nnz * sd || self.values.len() != self.nnz * self.row_len() {
            return shape_err("buffer lengths disagree with nnz");
        }
        check_bounds(&self.sparse_shape, &self.coords)?;
        for e in 1..self.nnz {
            if self.index(e - 1) >= self.index(e) {
                return shape_err(format!("entries {} and {e} are not strictly increasing", e - 1));
            }
        }
        Ok(())
    }

    pub fn sparse_shape(&self) -> &[usize] {
        &self.sparse_shape
    }

    pub fn dense_shape(&self) -> &[usize] {
        &self.dense_shape
    }

    pub fn sparse_dim(&self) -> usize {
        self.sparse_shape.len()
    }

    pub fn nnz(&self) -> usize {
        self.nnz
    }

    pub fn row_len(&self) -> usize {
        row_len_of(&self.dense_shape)
    }

    pub fn is_empty(&self) -> bool {
        self.nnz == 0
    }

    pub fn index(&self, e: usize) -> &[i64] {
        let sd = self.sparse_dim();
        &self.coords[e * sd..(e + 1) * sd]
    }

    pub fn value(&self, e: usize) -> &[T] {
        let rl = self.row_len();
        &self.values[e * rl..(e + 1) * rl]
    }

    /// Flat entry-major coordinate buffer.
    pub fn coords(&self) -> &[i64] {
        &self.coords
    }

    /// Flat value buffer, `nnz * row_len`.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// The `sparse_dim x nnz` index matrix.
    pub fn indices(&self) -> Vec<Vec<i64>> {
        (0..self.sparse_dim()).map(|k| (0..self.nnz).map(|e| self.index(e)[k]).collect()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[i64], &[T])> + '_ {
        (0..self.nnz).map(move |e| (self.index(e), self.value(e)))
    }

    /// Position of `idx` among the entries.
    pub fn find(&self, idx: &[i64]) -> Option<usize> {
        let (mut lo, mut hi) = (0, self.nnz);
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.index(mid).cmp(idx) {
                Ordering::Less => lo = mid + 1,
                Ordering::Greater => hi = mid,
                Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    pub fn get(&self, idx: &[i64]) -> Option<&[T]> {
        self.find(idx).map(|e| self.value(e))
    }

    /// Entries whose first index equals `i`, as a half-open entry range.
    pub fn first_dim_range(&self, i: i64) -> std::ops::Range<usize> {
        let lo = self.partition_point(|idx| idx[0] < i);
        let hi = self.partition_point(|idx| idx[0] <= i);
        lo..hi
    }

    fn partition_point(&self, pred: impl Fn(&[i64]) -> bool) -> usize {
        let (mut lo, mut hi) = (0, self.nnz);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if pred(self.index(mid)) {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Reorders the sparse dimensions: output dimension `k` is input
    /// dimension `perm[k]`.
    pub fn permute_dims(&self, perm: &[usize]) -> Result<Self> {
        let sd = self.sparse_dim();
        check_perm(perm, sd)?;
        if perm.iter().enumerate().all(|(k, &p)| k == p) {
            return Ok(self.clone());
        }
        let shape: Vec<usize> = perm.iter().map(|&p| self.sparse_shape[p]).collect();
        let mut coords = Vec::with_capacity(self.coords.len());
        for e in 0..self.nnz {
            let idx = self.index(e);
            coords.extend(perm.iter().map(|&p| idx[p]));
        }
        Self::from_coo(shape, self.dense_shape.clone(), coords, self.values.clone())
    }

    pub fn map_values<U: Scalar>(&self, f: impl Fn(T) -> U) -> SparseTensor<U> {
        SparseTensor {
            sparse_shape: self.sparse_shape.clone(),
            dense_shape: self.dense_shape.clone(),
            nnz: self.nnz,
            coords: self.coords.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Same index set, new value rows.
    pub fn with_values<U: Scalar>(&self, dense_shape: Vec<usize>, values: Vec<U>) -> Result<SparseTensor<U>> {
        if values.len() != self.nnz * row_len_of(&dense_shape) {
            return shape_err(format!(
                "{} values do not fit {} entries with dense shape {dense_shape:?}",
                values.len(),
                self.nnz
            ));
        }
        Ok(SparseTensor {
            sparse_shape: self.sparse_shape.clone(),
            dense_shape,
            nnz: self.nnz,
            coords: self.coords.clone(),
            values,
        })
    }

    /// Index set only, with zero-length value rows.
    pub fn pattern(&self) -> SparseTensor<T> {
        SparseTensor {
            sparse_shape: self.sparse_shape.clone(),
            dense_shape: vec![0],
            nnz: self.nnz,
            coords: self.coords.clone(),
            values: Vec::new(),
        }
    }

    pub fn same_pattern<U: Scalar>(&self, other: &SparseTensor<U>) -> bool {
        self.sparse_shape == other.sparse_shape && self.coords == other.coords && self.nnz == other.nnz
    }

    /// Restricts to the index set of `pattern` exactly: entries of `self`
    /// outside the pattern are dropped, pattern positions missing from
    /// `self` receive zero rows.
    pub fn align_to<U: Scalar>(&self, pattern: &SparseTensor<U>) -> Result<Self> {
        if self.sparse_shape != pattern.sparse_shape {
            return shape_err(format!(
                "cannot align shape {:?} to pattern {:?}",
                self.sparse_shape, pattern.sparse_shape
            ));
        }
        let rl = self.row_len();
        let mut values = Vec::with_capacity(pattern.nnz * rl);
        let mut e = 0;
        for p in 0..pattern.nnz {
            let target = pattern.index(p);
            while e < self.nnz && self.index(e) < target {
                e += 1;
            }
            if e < self.nnz && self.index(e) == target {
                values.extend_from_slice(self.value(e));
                e += 1;
            } else {
                values.extend(std::iter::repeat_n(T::zero(), rl));
            }
        }
        Ok(SparseTensor {
            sparse_shape: pattern.sparse_shape.clone(),
            dense_shape: self.dense_shape.clone(),
            nnz: pattern.nnz,
            coords: pattern.coords.clone(),
            values,
        })
    }
}

pub(crate) fn check_perm(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(HotError::Rank(format!("permutation of length {} for {n} dims", perm.len())));
    }
    for &p in perm {
        if p >= n || seen[p] {
            return Err(HotError::Rank(format!("{perm:?} is not a permutation of 0..{n}")));
        }
        seen[p] = true;
    }
    Ok(())
}

fn check_bounds(shape: &[usize], coords: &[i64]) -> Result<()> {
    let sd = shape.len();
    if sd == 0 {
        return Ok(());
    }
    for idx in coords.chunks_exact(sd) {
        for (dim, (&i, &size)) in idx.iter().zip(shape).enumerate() {
            if i < 0 || i as u64 >= size as u64 {
                return Err(HotError::Bounds { dim, index: i, size });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_entries(list: &[(&[i64], i64)]) -> Vec<(Vec<i64>, Vec<i64>)> {
        list.iter().map(|(i, v)| (i.to_vec(), vec![*v])).collect()
    }

    #[test]
    fn permutation_matrix_is_already_coalesced() {
        let t = SparseTensor::from_entries(vec![2, 2], vec![], scalar_entries(&[(&[0, 1], 1), (&[1, 0], 1)])).unwrap();
        assert_eq!(t.indices(), vec![vec![0, 1], vec![1, 0]]);
        assert_eq!(t.values(), &[1, 1]);
    }

    #[test]
    fn duplicates_are_summed() {
        let t = SparseTensor::from_entries(vec![2, 2], vec![], scalar_entries(&[(&[0, 0], 2), (&[0, 0], 3)])).unwrap();
        assert_eq!(t.nnz(), 1);
        assert_eq!(t.get(&[0, 0]), Some(&[5][..]));
    }

    #[test]
    fn entries_sorted_lexicographically() {
        let t = SparseTensor::from_entries(
            vec![3, 3],
            vec![2],
            vec![(vec![2, 1], vec![1.0, 0.0]), (vec![0, 2], vec![0.0, 1.0])],
        )
        .unwrap();
        assert_eq!(t.index(0), &[0, 2]);
        assert_eq!(t.index(1), &[2, 1]);
        assert_eq!(t.value(0), &[0.0, 1.0]);
    }

    #[test]
    fn out_of_range_index_is_bounds_error() {
        let err = SparseTensor::from_entries(vec![2, 2], vec![], scalar_entries(&[(&[0, 2], 1)])).unwrap_err();
        assert!(matches!(err, HotError::Bounds { dim: 1, index: 2, size: 2 }));
        let err = SparseTensor::from_entries(vec![2, 2], vec![], scalar_entries(&[(&[-1, 0], 1)])).unwrap_err();
        assert!(matches!(err, HotError::Bounds { dim: 0, .. }));
    }

    #[test]
    fn mismatched_row_is_shape_error() {
        let err = SparseTensor::from_entries(vec![2, 2], vec![2], vec![(vec![0, 0], vec![1.0])]).unwrap_err();
        assert!(matches!(err, HotError::Shape(_)));
    }

    #[test]
    fn explicit_zero_is_retained() {
        let t = SparseTensor::from_entries(vec![2], vec![], vec![(vec![1], vec![0i64])]).unwrap();
        assert_eq!(t.nnz(), 1);
    }

    #[test]
    fn permute_dims_resorts() {
        let t = SparseTensor::from_entries(vec![2, 3], vec![], scalar_entries(&[(&[0, 2], 1), (&[1, 0], 2)])).unwrap();
        let p = t.permute_dims(&[1, 0]).unwrap();
        assert_eq!(p.sparse_shape(), &[3, 2]);
        assert_eq!(p.index(0), &[0, 1]);
        assert_eq!(p.value(0), &[2]);
        assert_eq!(p.index(1), &[2, 0]);
        assert!(t.permute_dims(&[0, 0]).is_err());
    }

    #[test]
    fn align_fills_and_drops() {
        let t = SparseTensor::from_entries(vec![3], vec![], scalar_entries(&[(&[0], 4), (&[2], 6)])).unwrap();
        let pat = SparseTensor::from_entries(vec![3], vec![], scalar_entries(&[(&[1], 0), (&[2], 0)])).unwrap();
        let a = t.align_to(&pat).unwrap();
        assert_eq!(a.indices(), vec![vec![1, 2]]);
        assert_eq!(a.values(), &[0, 6]);
    }

    #[test]
    fn first_dim_range_finds_rows() {
        let t =
            SparseTensor::from_entries(vec![3, 3], vec![], scalar_entries(&[(&[0, 1], 1), (&[2, 0], 1), (&[2, 2], 1)]))
                .unwrap();
        assert_eq!(t.first_dim_range(0), 0..1);
        assert_eq!(t.first_dim_range(1), 1..1);
        assert_eq!(t.first_dim_range(2), 1..3);
    }
}
