//! Brute-force dense references for the sparse kernels and graph operators.
//!
//! Everything here loops over every index position and shares no code with
//! the kernels it checks.

use hot_core::data::Graph;
use hot_core::{Aggregator, Scalar, Tensor};

/// Dense tensor with one optional scalar per index position (row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    pub shape: Vec<usize>,
    pub cells: Vec<Option<T>>,
}

impl<T: Scalar> Dense<T> {
    pub fn empty(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self { shape, cells: vec![None; len] }
    }

    /// Reads a tensor with scalar rows (batch axes count as index dims).
    pub fn of(t: &Tensor<T>) -> Self {
        let mut out = Self::empty(t.index_shape().to_vec());
        t.for_each_existing(|idx, row| {
            let p = out.flat(idx);
            out.cells[p] = Some(row[0]);
        });
        out
    }

    pub fn flat(&self, idx: &[i64]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &s)| acc * s + i as usize)
    }

    pub fn at(&self, idx: &[i64]) -> Option<T> {
        self.cells[self.flat(idx)]
    }

    fn at2(&self, i: usize, j: usize) -> Option<T> {
        self.cells[i * self.shape[1] + j]
    }
}

fn aggregate<T: Scalar>(agg: Aggregator, msgs: &[T]) -> Option<T> {
    let first = *msgs.first()?;
    let rest = msgs[1..].iter().copied();
    Some(match agg {
        Aggregator::Sum => rest.fold(first, |a, b| a + b),
        Aggregator::Mean => rest.fold(first, |a, b| a + b).div_count(msgs.len()),
        Aggregator::Max => rest.fold(first, |a, b| if b > a { b } else { a }),
        Aggregator::Min => rest.fold(first, |a, b| if b < a { b } else { a }),
        Aggregator::SoftmaxWeighted => {
            let m = msgs.iter().map(|v| v.to_f64()).fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = msgs.iter().map(|v| (v.to_f64() - m).exp()).collect();
            let z: f64 = w.iter().sum();
            T::from_f64(msgs.iter().zip(&w).map(|(v, w)| v.to_f64() * w / z).sum())
        }
    })
}

/// `C[i][j] = AGG_k A[i][k] * B[k][j]` over `k` where both exist; the entry
/// exists iff at least one `k` contributes and `(i, j)` is in `pattern`.
pub fn matmul<T: Scalar>(a: &Dense<T>, b: &Dense<T>, agg: Aggregator, pattern: Option<&Dense<T>>) -> Dense<T> {
    let (n, m, p) = (a.shape[0], a.shape[1], b.shape[1]);
    let mut out = Dense::empty(vec![n, p]);
    for i in 0..n {
        for j in 0..p {
            if pattern.is_some_and(|pat| pat.at2(i, j).is_none()) {
                continue;
            }
            let msgs: Vec<T> = (0..m).filter_map(|k| Some(a.at2(i, k)? * b.at2(k, j)?)).collect();
            out.cells[i * p + j] = aggregate(agg, &msgs);
        }
    }
    out
}

pub fn add<T: Scalar>(a: &Dense<T>, b: &Dense<T>) -> Dense<T> {
    let cells = a
        .cells
        .iter()
        .zip(&b.cells)
        .map(|(x, y)| match (x, y) {
            (Some(x), Some(y)) => Some(*x + *y),
            (Some(v), None) | (None, Some(v)) => Some(*v),
            (None, None) => None,
        })
        .collect();
    Dense { shape: a.shape.clone(), cells }
}

/// Collapses dim `dim` of a 2-D reference.
pub fn reduce<T: Scalar>(a: &Dense<T>, dim: usize, agg: Aggregator) -> Dense<T> {
    let (n, m) = (a.shape[0], a.shape[1]);
    let keep = if dim == 0 { m } else { n };
    let mut out = Dense::empty(vec![keep]);
    for q in 0..keep {
        let vals: Vec<T> = (0..if dim == 0 { n } else { m })
            .filter_map(|k| if dim == 0 { a.at2(k, q) } else { a.at2(q, k) })
            .collect();
        out.cells[q] = aggregate(agg, &vals);
    }
    out
}

/// 1-D `v` broadcast onto the 2-D `target` support along `dim`.
pub fn expand<T: Scalar>(v: &Dense<T>, dim: usize, target: &Dense<T>) -> Dense<T> {
    let (n, m) = (target.shape[0], target.shape[1]);
    let mut out = Dense::empty(vec![n, m]);
    for i in 0..n {
        for j in 0..m {
            if target.at2(i, j).is_some() {
                let src = if dim == 0 { j } else { i };
                out.cells[i * m + j] = Some(v.cells[src].unwrap_or_else(T::zero));
            }
        }
    }
    out
}

/// Compares existence exactly and values within `rel_tol` (exact when 0).
pub fn compare<T: Scalar>(got: &Dense<T>, want: &Dense<T>, rel_tol: f64) -> Result<(), String> {
    if got.shape != want.shape {
        return Err(format!("shape {:?} vs {:?}", got.shape, want.shape));
    }
    for (p, (g, w)) in got.cells.iter().zip(&want.cells).enumerate() {
        match (g, w) {
            (None, None) => {}
            (Some(g), Some(w)) => {
                let ok = if rel_tol == 0.0 { g == w } else { close(g.to_f64(), w.to_f64(), rel_tol) };
                if !ok {
                    return Err(format!("position {p}: {g:?} vs {w:?}"));
                }
            }
            _ => return Err(format!("position {p}: existence {} vs {}", g.is_some(), w.is_some())),
        }
    }
    Ok(())
}

/// `|a - b| <= tol * max(|a|, |b|)`, with an absolute floor for values
/// that cancel to round-off.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-12)
}

/// All-pairs shortest path distances by Floyd–Warshall.
pub fn all_pairs_spd(g: &Graph) -> Vec<Vec<Option<usize>>> {
    let n = g.num_nodes();
    let mut d = vec![vec![None; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = Some(0);
    }
    for &(u, v) in g.edges() {
        d[u][v] = Some(1);
    }
    for k in 0..n {
        for i in 0..n {
            let Some(dik) = d[i][k] else { continue };
            for j in 0..n {
                if let Some(dkj) = d[k][j] {
                    if d[i][j].is_none_or(|x| dik + dkj < x) {
                        d[i][j] = Some(dik + dkj);
                    }
                }
            }
        }
    }
    d
}

/// The within-subgraph update `out_ij = Σ_k H_ik A_kj` evaluated by three
/// nested loops for every `(i, j)` in the support of `h`.
pub fn triple_loop(h: &Dense<i64>, g: &Graph) -> Dense<i64> {
    let n = g.num_nodes();
    let mut a = vec![vec![0i64; n]; n];
    for &(u, v) in g.edges() {
        a[u][v] = 1;
    }
    let mut out = Dense::empty(vec![n, n]);
    for i in 0..n {
        for j in 0..n {
            if h.at2(i, j).is_none() {
                continue;
            }
            let mut acc = 0;
            for (k, row) in a.iter().enumerate() {
                acc += h.at2(i, k).unwrap_or(0) * row[j];
            }
            out.cells[i * n + j] = Some(acc);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(shape: Vec<usize>, cells: Vec<Option<i64>>) -> Dense<i64> {
        Dense { shape, cells }
    }

    #[test]
    fn matmul_reference() {
        let a = d(vec![2, 2], vec![Some(1), Some(2), None, Some(3)]);
        let b = d(vec![2, 2], vec![Some(4), None, Some(5), Some(6)]);
        let c = matmul(&a, &b, Aggregator::Sum, None);
        assert_eq!(c.cells, vec![Some(14), Some(12), Some(15), Some(18)]);
        let mx = matmul(&a, &b, Aggregator::Max, None);
        assert_eq!(mx.cells, vec![Some(10), Some(12), Some(15), Some(18)]);
    }

    #[test]
    fn spd_path() {
        let (g, _) = Graph::new(4, &[(0, 1), (1, 2)], vec![vec![0.0]; 4], None, None).unwrap();
        let s = all_pairs_spd(&g);
        assert_eq!(s[0], vec![Some(0), Some(1), Some(2), None]);
    }

    #[test]
    fn close_is_relative() {
        assert!(close(1.0, 1.0 + 1e-7, 1e-6));
        assert!(!close(1.0, 1.1, 1e-6));
        assert!(close(1e9, 1e9 + 1.0, 1e-6));
    }
}
