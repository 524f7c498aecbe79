//! Generalized matrix multiplication.
//!
//! `C[i.., j..] = AGG_k msg(A[i.., k], B[k, j..])`, contracting the last
//! index dimension of `A` against the first index dimension of `B`. The
//! message is the product of the two value rows: a row times a scalar when
//! only one side carries hidden dims, channel-wise when both carry the same
//! hidden dims.

use std::collections::{HashMap, HashSet};

use crate::backend::{Aggregator, OutputPattern};
use crate::error::{shape_err, HotError, Result};
use crate::scalar::Scalar;
use crate::tensor::{row_len_of, unravel, MaskedTensor, SparseTensor, Tensor};

/// One term of an aggregation, handed to softmax score functions.
pub struct Contribution<'a, T> {
    /// Output index (batch axes included for masked operands).
    pub out: &'a [i64],
    /// Contracted index.
    pub inner: i64,
    pub left: &'a [T],
    pub right: &'a [T],
    /// `left * right`, the row being aggregated.
    pub message: &'a [T],
}

pub type ScoreFn<'s, T> = dyn Fn(&Contribution<'_, T>) -> f64 + 's;

/// Generalized matmul with one of the built-in aggregators.
///
/// Softmax weighting scores each contribution by the sum of its message
/// row; use [`matmul_scored`] for a custom score.
pub fn matmul<T: Scalar>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    aggregator: Aggregator,
    pattern: Option<&OutputPattern<'_>>,
) -> Result<Tensor<T>> {
    let default_score = |c: &Contribution<'_, T>| c.message.iter().map(|v| v.to_f64()).sum::<f64>();
    let score: Option<&ScoreFn<'_, T>> =
        if aggregator == Aggregator::SoftmaxWeighted { Some(&default_score) } else { None };
    dispatch(a, b, aggregator, score, pattern)
}

/// Softmax-weighted matmul: each output is the weighted sum of its messages
/// with weights `softmax(score)` over the contributing set.
pub fn matmul_scored<T: Scalar>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    score: &ScoreFn<'_, T>,
    pattern: Option<&OutputPattern<'_>>,
) -> Result<Tensor<T>> {
    dispatch(a, b, Aggregator::SoftmaxWeighted, Some(score), pattern)
}

fn dispatch<T: Scalar>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    agg: Aggregator,
    score: Option<&ScoreFn<'_, T>>,
    pattern: Option<&OutputPattern<'_>>,
) -> Result<Tensor<T>> {
    if agg == Aggregator::SoftmaxWeighted && !T::IS_FLOAT {
        return Err(HotError::Unsupported("softmax-weighted aggregation on integer values".into()));
    }
    match (a, b, pattern) {
        (Tensor::Sparse(x), Tensor::Sparse(y), _) => Ok(Tensor::Sparse(spspmm(x, y, agg, score, pattern)?)),
        (Tensor::Masked(_), Tensor::Masked(_), Some(_)) => {
            Err(HotError::Unsupported("output patterns apply to the sparse path; both operands are masked".into()))
        }
        (_, _, Some(_)) => {
            let x = sparse_operand(a)?;
            let y = sparse_operand(b)?;
            Ok(Tensor::Sparse(spspmm(&x, &y, agg, score, pattern)?))
        }
        (_, _, None) => {
            let x = a.to_masked();
            let y = b.to_masked();
            Ok(Tensor::Masked(masked_matmul(&x, &y, agg, score)?))
        }
    }
}

fn sparse_operand<T: Scalar>(t: &Tensor<T>) -> Result<SparseTensor<T>> {
    match t {
        Tensor::Masked(m) if m.batch_dims() > 0 => {
            Err(HotError::Unsupported("batched masked operand on the sparse path".into()))
        }
        _ => Ok(t.to_sparse()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Combine {
    Scalar,
    /// Left carries the row, right is a scalar.
    LeftRow,
    RightRow,
    Channelwise,
}

fn combine_mode(left: &[usize], right: &[usize]) -> Result<(Combine, Vec<usize>)> {
    match (left.is_empty(), right.is_empty()) {
        (true, true) => Ok((Combine::Scalar, vec![])),
        (false, true) => Ok((Combine::LeftRow, left.to_vec())),
        (true, false) => Ok((Combine::RightRow, right.to_vec())),
        (false, false) if left == right => Ok((Combine::Channelwise, left.to_vec())),
        (false, false) => {
            Err(HotError::Unsupported(format!("both operands carry different hidden dims {left:?} and {right:?}")))
        }
    }
}

#[inline]
fn write_message<T: Scalar>(mode: Combine, a: &[T], b: &[T], out: &mut [T]) {
    match mode {
        Combine::Scalar => out[0] = a[0] * b[0],
        Combine::LeftRow => {
            let s = b[0];
            for (o, &x) in out.iter_mut().zip(a) {
                *o = x * s;
            }
        }
        Combine::RightRow => {
            let s = a[0];
            for (o, &x) in out.iter_mut().zip(b) {
                *o = s * x;
            }
        }
        Combine::Channelwise => {
            for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
                *o = x * y;
            }
        }
    }
}

/// Per-slot aggregation state.
struct Acc<T> {
    agg: Aggregator,
    width: usize,
    vals: Vec<T>,
    count: Vec<u32>,
    sm_max: Vec<f64>,
    sm_den: Vec<f64>,
    sm_num: Vec<f64>,
}

impl<T: Scalar> Acc<T> {
    fn new(agg: Aggregator, width: usize) -> Self {
        Self {
            agg,
            width,
            vals: Vec::new(),
            count: Vec::new(),
            sm_max: Vec::new(),
            sm_den: Vec::new(),
            sm_num: Vec::new(),
        }
    }

    fn reset(&mut self, slot: usize) {
        let w = self.width;
        if self.count.len() <= slot {
            let n = slot + 1;
            self.count.resize(n, 0);
            self.vals.resize(n * w, T::zero());
            if self.agg == Aggregator::SoftmaxWeighted {
                self.sm_max.resize(n, 0.0);
                self.sm_den.resize(n, 0.0);
                self.sm_num.resize(n * w, 0.0);
            }
        }
        self.count[slot] = 0;
        self.vals[slot * w..(slot + 1) * w].fill(T::zero());
    }

    #[inline]
    fn push(&mut self, slot: usize, msg: &[T], score: f64) {
        let w = self.width;
        let first = self.count[slot] == 0;
        self.count[slot] += 1;
        let acc = &mut self.vals[slot * w..(slot + 1) * w];
        match self.agg {
            Aggregator::Sum | Aggregator::Mean => {
                for (a, &m) in acc.iter_mut().zip(msg) {
                    *a = *a + m;
                }
            }
            Aggregator::Max => {
                for (a, &m) in acc.iter_mut().zip(msg) {
                    *a = if first { m } else { a.max_of(m) };
                }
            }
            Aggregator::Min => {
                for (a, &m) in acc.iter_mut().zip(msg) {
                    *a = if first { m } else { a.min_of(m) };
                }
            }
            Aggregator::SoftmaxWeighted => {
                let num = &mut self.sm_num[slot * w..(slot + 1) * w];
                if first {
                    self.sm_max[slot] = score;
                    self.sm_den[slot] = 1.0;
                    for (n, &m) in num.iter_mut().zip(msg) {
                        *n = m.to_f64();
                    }
                } else if score > self.sm_max[slot] {
                    // rescale the running sums to the new maximum
                    let scale = (self.sm_max[slot] - score).exp();
                    self.sm_max[slot] = score;
                    self.sm_den[slot] = self.sm_den[slot] * scale + 1.0;
                    for (n, &m) in num.iter_mut().zip(msg) {
                        *n = *n * scale + m.to_f64();
                    }
                } else {
                    let wgt = (score - self.sm_max[slot]).exp();
                    self.sm_den[slot] += wgt;
                    for (n, &m) in num.iter_mut().zip(msg) {
                        *n += wgt * m.to_f64();
                    }
                }
            }
        }
    }

    fn has(&self, slot: usize) -> bool {
        self.count[slot] > 0
    }

    fn finish(&self, slot: usize, out: &mut [T]) {
        let w = self.width;
        let acc = &self.vals[slot * w..(slot + 1) * w];
        let c = self.count[slot] as usize;
        match self.agg {
            Aggregator::Sum | Aggregator::Max | Aggregator::Min => out.copy_from_slice(acc),
            Aggregator::Mean => {
                for (o, &a) in out.iter_mut().zip(acc) {
                    *o = if c == 0 { T::zero() } else { a.div_count(c) };
                }
            }
            Aggregator::SoftmaxWeighted => {
                if c == 0 {
                    out.fill(T::zero());
                } else {
                    let den = self.sm_den[slot];
                    for (o, &n) in out.iter_mut().zip(&self.sm_num[slot * w..(slot + 1) * w]) {
                        *o = T::from_f64(n / den);
                    }
                }
            }
        }
    }
}

const NO_SLOT: u32 = u32::MAX;
const DENSE_SLOT_LIMIT: usize = 1 << 24;

/// Maps linearized output columns of the current row to accumulator slots.
enum SlotMap {
    Dense { slot: Vec<u32>, allowed: Vec<u32>, stamp: u32 },
    Hashed { slot: HashMap<usize, u32>, allowed: HashSet<usize> },
}

impl SlotMap {
    fn new(cols: Option<usize>) -> Self {
        match cols {
            Some(n) if n <= DENSE_SLOT_LIMIT => {
                SlotMap::Dense { slot: vec![NO_SLOT; n], allowed: vec![0; n], stamp: 1 }
            }
            _ => SlotMap::Hashed { slot: HashMap::new(), allowed: HashSet::new() },
        }
    }

    fn allow(&mut self, col: usize) {
        match self {
            SlotMap::Dense { allowed, stamp, .. } => allowed[col] = *stamp,
            SlotMap::Hashed { allowed, .. } => {
                allowed.insert(col);
            }
        }
    }

    /// Slot for `col`, allocating one on first touch. `None` when a pattern
    /// is active and excludes `col`.
    #[inline]
    fn slot(&mut self, col: usize, restricted: bool, touched: &mut Vec<(usize, u32)>) -> Option<(u32, bool)> {
        match self {
            SlotMap::Dense { slot, allowed, stamp } => {
                if restricted && allowed[col] != *stamp {
                    return None;
                }
                if slot[col] == NO_SLOT {
                    let s = touched.len() as u32;
                    slot[col] = s;
                    touched.push((col, s));
                    Some((s, true))
                } else {
                    Some((slot[col], false))
                }
            }
            SlotMap::Hashed { slot, allowed } => {
                if restricted && !allowed.contains(&col) {
                    return None;
                }
                let next = touched.len() as u32;
                let s = *slot.entry(col).or_insert(next);
                let fresh = s == next;
                if fresh {
                    touched.push((col, s));
                }
                Some((s, fresh))
            }
        }
    }

    fn end_row(&mut self, touched: &[(usize, u32)]) {
        match self {
            SlotMap::Dense { slot, stamp, allowed } => {
                for &(c, _) in touched {
                    slot[c] = NO_SLOT;
                }
                *stamp = stamp.wrapping_add(1);
                if *stamp == 0 {
                    allowed.fill(0);
                    *stamp = 1;
                }
            }
            SlotMap::Hashed { slot, allowed } => {
                slot.clear();
                allowed.clear();
            }
        }
    }
}

fn linearize(idx: &[i64], shape: &[usize]) -> usize {
    idx.iter().zip(shape).fold(0usize, |acc, (&i, &s)| acc * s + i as usize)
}

/// Row-wise merge: for each output row prefix, every `A[prefix, k]` is
/// multiplied into the row `B[k, ..]` and accumulated per output column.
/// Output rows are emitted in order and columns sorted within each row, so
/// the result is coalesced by construction.
fn spspmm<T: Scalar>(
    a: &SparseTensor<T>,
    b: &SparseTensor<T>,
    agg: Aggregator,
    score: Option<&ScoreFn<'_, T>>,
    pattern: Option<&OutputPattern<'_>>,
) -> Result<SparseTensor<T>> {
    let p = a.sparse_dim();
    let q = b.sparse_dim();
    if p == 0 || q == 0 {
        return Err(HotError::Rank("matmul operands need at least one sparse dim".into()));
    }
    let kdim = a.sparse_shape()[p - 1];
    if kdim != b.sparse_shape()[0] {
        return shape_err(format!("matmul inner dims disagree: {:?} x {:?}", a.sparse_shape(), b.sparse_shape()));
    }
    let pre = p - 1;
    let rest_shape = &b.sparse_shape()[1..];
    let out_shape: Vec<usize> = a.sparse_shape()[..pre].iter().chain(rest_shape).copied().collect();
    if let Some(pat) = pattern {
        if pat.shape() != out_shape.as_slice() {
            return shape_err(format!("pattern shape {:?} vs output shape {out_shape:?}", pat.shape()));
        }
    }
    let (mode, out_dense) = combine_mode(a.dense_shape(), b.dense_shape())?;
    let width = row_len_of(&out_dense);
    let rest_size = rest_shape.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s));

    let mut b_ptr = vec![0usize; kdim + 1];
    for e in 0..b.nnz() {
        b_ptr[b.index(e)[0] as usize + 1] += 1;
    }
    for k in 0..kdim {
        b_ptr[k + 1] += b_ptr[k];
    }
    let b_rest: Vec<usize> = (0..b.nnz()).map(|e| linearize(&b.index(e)[1..], rest_shape)).collect();

    let mut slots = SlotMap::new(rest_size);
    let mut acc = Acc::<T>::new(agg, width);
    let mut touched: Vec<(usize, u32)> = Vec::new();
    let mut msg = vec![T::zero(); width];
    let mut out_idx: Vec<i64> = Vec::with_capacity(out_shape.len());
    let mut coords = Vec::new();
    let mut values = Vec::new();
    let mut nnz = 0usize;
    let mut pe = 0usize;

    let mut e = 0;
    while e < a.nnz() {
        let prefix = &a.index(e)[..pre];
        let mut end = e + 1;
        while end < a.nnz() && &a.index(end)[..pre] == prefix {
            end += 1;
        }
        if let Some(pat) = pattern {
            while pe < pat.nnz() && &pat.index(pe)[..pre] < prefix {
                pe += 1;
            }
            let start = pe;
            while pe < pat.nnz() && &pat.index(pe)[..pre] == prefix {
                slots.allow(linearize(&pat.index(pe)[pre..], rest_shape));
                pe += 1;
            }
            if start == pe {
                slots.end_row(&[]);
                e = end;
                continue;
            }
        }
        let restricted = pattern.is_some();
        for ae in e..end {
            let k = a.index(ae)[pre];
            let arow = a.value(ae);
            for be in b_ptr[k as usize]..b_ptr[k as usize + 1] {
                let Some((slot, fresh)) = slots.slot(b_rest[be], restricted, &mut touched) else {
                    continue;
                };
                if fresh {
                    acc.reset(slot as usize);
                }
                write_message(mode, arow, b.value(be), &mut msg);
                let s = match score {
                    Some(f) => {
                        out_idx.clear();
                        out_idx.extend_from_slice(prefix);
                        out_idx.extend_from_slice(&b.index(be)[1..]);
                        f(&Contribution { out: &out_idx, inner: k, left: arow, right: b.value(be), message: &msg })
                    }
                    None => 0.0,
                };
                acc.push(slot as usize, &msg, s);
            }
        }
        touched.sort_unstable_by_key(|t| t.0);
        for &(col, slot) in &touched {
            coords.extend_from_slice(prefix);
            coords.extend(unravel(col, rest_shape));
            let start = values.len();
            values.resize(start + width, T::zero());
            acc.finish(slot as usize, &mut values[start..]);
            nnz += 1;
        }
        slots.end_row(&touched);
        touched.clear();
        e = end;
    }
    Ok(SparseTensor::from_sorted_parts(out_shape, out_dense, nnz, coords, values))
}

/// Batched dense kernel. Both operands share their leading batch axes;
/// `A` is `(batch.., L.., K)` and `B` is `(batch.., K, R..)`.
fn masked_matmul<T: Scalar>(
    a: &MaskedTensor<T>,
    b: &MaskedTensor<T>,
    agg: Aggregator,
    score: Option<&ScoreFn<'_, T>>,
) -> Result<MaskedTensor<T>> {
    let bd = a.batch_dims();
    if b.batch_dims() != bd || a.masked_shape()[..bd] != b.masked_shape()[..bd] {
        return shape_err(format!(
            "batched matmul: batch axes {:?} vs {:?}",
            &a.masked_shape()[..bd.min(a.rank())],
            &b.masked_shape()[..b.batch_dims()]
        ));
    }
    if a.rank() <= bd || b.rank() <= bd {
        return Err(HotError::Rank("matmul operands need at least one tuple dim".into()));
    }
    let ash = a.masked_shape();
    let bsh = b.masked_shape();
    let kdim = ash[ash.len() - 1];
    if bsh[bd] != kdim {
        return shape_err(format!("matmul inner dims disagree: {ash:?} x {bsh:?}"));
    }
    let nb: usize = ash[..bd].iter().product();
    let lsz: usize = ash[bd..ash.len() - 1].iter().product();
    let rsz: usize = bsh[bd + 1..].iter().product();
    let out_shape: Vec<usize> = ash[..ash.len() - 1].iter().chain(&bsh[bd + 1..]).copied().collect();
    let (mode, out_dense) = combine_mode(a.dense_shape(), b.dense_shape())?;
    let w = row_len_of(&out_dense);
    let (la, lb) = (a.row_len(), b.row_len());
    let (ad, am, bdata, bm) = (a.data(), a.mask(), b.data(), b.mask());

    let mut data = vec![T::zero(); nb * lsz * rsz * w];
    let mut mask = vec![false; nb * lsz * rsz];

    if agg == Aggregator::Sum && score.is_none() {
        // padding rows are zero, so the plain dense product is mask-oblivious
        for bt in 0..nb {
            for i in 0..lsz {
                let orow = (bt * lsz + i) * rsz;
                let out = &mut data[orow * w..(orow + rsz) * w];
                let omask = &mut mask[orow..orow + rsz];
                for k in 0..kdim {
                    let pa = (bt * lsz + i) * kdim + k;
                    let arow = &ad[pa * la..(pa + 1) * la];
                    let pb = (bt * kdim + k) * rsz;
                    let bblock = &bdata[pb * lb..(pb + rsz) * lb];
                    match mode {
                        Combine::Scalar | Combine::LeftRow => {
                            for (j, &s) in bblock.iter().enumerate() {
                                let o = &mut out[j * w..(j + 1) * w];
                                for (x, &y) in o.iter_mut().zip(arow) {
                                    *x = *x + y * s;
                                }
                            }
                        }
                        Combine::RightRow => {
                            let s = arow[0];
                            for (x, &y) in out.iter_mut().zip(bblock) {
                                *x = *x + s * y;
                            }
                        }
                        Combine::Channelwise => {
                            for (j, o) in out.chunks_exact_mut(w).enumerate() {
                                let br = &bblock[j * w..(j + 1) * w];
                                for ((x, &y), &z) in o.iter_mut().zip(arow).zip(br) {
                                    *x = *x + y * z;
                                }
                            }
                        }
                    }
                    if am[pa] {
                        for (o, &m) in omask.iter_mut().zip(&bm[pb..pb + rsz]) {
                            *o |= m;
                        }
                    }
                }
            }
        }
    } else {
        let mut acc = Acc::<T>::new(agg, w);
        let mut msg = vec![T::zero(); w];
        for bt in 0..nb {
            for i in 0..lsz {
                for j in 0..rsz {
                    let po = (bt * lsz + i) * rsz + j;
                    acc.reset(0);
                    let out_idx = if score.is_some() { unravel(po, &out_shape) } else { Vec::new() };
                    for k in 0..kdim {
                        let pa = (bt * lsz + i) * kdim + k;
                        let pb = (bt * kdim + k) * rsz + j;
                        if !(am[pa] && bm[pb]) {
                            continue;
                        }
                        let arow = &ad[pa * la..(pa + 1) * la];
                        let brow = &bdata[pb * lb..(pb + 1) * lb];
                        write_message(mode, arow, brow, &mut msg);
                        let s = match score {
                            Some(f) => f(&Contribution {
                                out: &out_idx,
                                inner: k as i64,
                                left: arow,
                                right: brow,
                                message: &msg,
                            }),
                            None => 0.0,
                        };
                        acc.push(0, &msg, s);
                    }
                    if acc.has(0) {
                        mask[po] = true;
                        acc.finish(0, &mut data[po * w..(po + 1) * w]);
                    }
                }
            }
        }
    }
    Ok(MaskedTensor::from_raw(out_shape, out_dense, bd, data, mask))
}
