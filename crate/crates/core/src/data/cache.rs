//! Parallel preprocessing and the binary cache.
//!
//! Layout (little-endian):
//! header `b"HOT1"`, version `u8`, sampler kind `u8`, hop `u32`, input
//! fingerprint `u32`, graph count `u64`; then per graph: `n u64`, directed
//! edge count `u64` and pairs `u32 u32`, node feature width `u64` and rows
//! `f64`, edge feature flag `u8` (width `u64` and rows `f64` when set),
//! target flag `u8` and `f64`, tuple `sparse_dim u8`, `nnz u64`, entry-major
//! indices `u32`, values `i64`; trailer CRC32 of everything before it.

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::data::{Graph, Sampler};
use crate::error::{HotError, Result};
use crate::tensor::SparseTensor;

pub const CACHE_MAGIC: &[u8; 4] = b"HOT1";
pub const CACHE_VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 1 + 4 + 4 + 8;

/// A graph together with its sampled tuple annotations.
#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessedGraph {
    pub graph: Graph,
    pub tuple_feature: SparseTensor<i64>,
}

impl PreprocessedGraph {
    pub fn new(graph: Graph, sampler: Sampler) -> Self {
        let tuple_feature = sampler.apply(&graph);
        Self { graph, tuple_feature }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CacheStatus {
    Loaded,
    Computed,
}

#[derive(Clone, Debug)]
pub struct CacheContents {
    pub sampler: Sampler,
    pub fingerprint: u32,
    pub items: Vec<PreprocessedGraph>,
}

/// CRC32 over the encoded input graphs.
pub fn fingerprint(graphs: &[Graph]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    let mut buf = Vec::new();
    for g in graphs {
        buf.clear();
        encode_graph(&mut buf, g);
        h.update(&buf);
    }
    h.finalize()
}

/// Samples every graph on a pool of `workers` threads, reusing `cache_path`
/// when it already holds a matching cache.
pub fn preprocess_parallel(
    graphs: &[Graph],
    sampler: Sampler,
    workers: usize,
    cache_path: impl AsRef<Path>,
) -> Result<(Vec<PreprocessedGraph>, CacheStatus)> {
    let path = cache_path.as_ref();
    let fp = fingerprint(graphs);
    if path.exists() {
        match read_cache(path) {
            Ok(c) if c.sampler == sampler && c.fingerprint == fp => return Ok((c.items, CacheStatus::Loaded)),
            Ok(_) => log::warn!("cache {} was built for other inputs; recomputing", path.display()),
            Err(e) => log::warn!("cache {} unusable ({e}); recomputing", path.display()),
        }
    }
    let items = preprocess(graphs, sampler, workers)?;
    write_cache(path, sampler, fp, &items)?;
    Ok((items, CacheStatus::Computed))
}

/// Sampling only, no cache. Output order follows input order.
pub fn preprocess(graphs: &[Graph], sampler: Sampler, workers: usize) -> Result<Vec<PreprocessedGraph>> {
    if workers == 0 {
        return Err(HotError::Config("workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HotError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| graphs.par_iter().map(|g| PreprocessedGraph::new(g.clone(), sampler)).collect()))
}

pub fn encode_cache(sampler: Sampler, fingerprint: u32, items: &[PreprocessedGraph]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 4);
    buf.extend_from_slice(CACHE_MAGIC);
    buf.push(CACHE_VERSION);
    let (kind, hop) = sampler.tag();
    buf.push(kind);
    buf.extend_from_slice(&hop.to_le_bytes());
    buf.extend_from_slice(&fingerprint.to_le_bytes());
    put_u64(&mut buf, items.len());
    for it in items {
        encode_graph(&mut buf, &it.graph);
        let t = &it.tuple_feature;
        buf.push(t.sparse_dim() as u8);
        put_u64(&mut buf, t.nnz());
        for &c in t.coords() {
            buf.extend_from_slice(&(c as u32).to_le_bytes());
        }
        for &v in t.values() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

/// Writes via a sibling temp file and rename.
pub fn write_cache(path: &Path, sampler: Sampler, fingerprint: u32, items: &[PreprocessedGraph]) -> Result<()> {
    let bytes = encode_cache(sampler, fingerprint, items);
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_cache(path: impl AsRef<Path>) -> Result<CacheContents> {
    decode_cache(&fs::read(path)?)
}

pub fn decode_cache(bytes: &[u8]) -> Result<CacheContents> {
    if bytes.len() < HEADER_LEN + 4 {
        return Err(HotError::Cache(format!("file too short ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != CACHE_MAGIC {
        return Err(HotError::Cache("bad magic".into()));
    }
    if bytes[4] != CACHE_VERSION {
        return Err(HotError::Cache(format!("version {} != {CACHE_VERSION}", bytes[4])));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(trailer.try_into().unwrap()) {
        return Err(HotError::Cache("checksum mismatch".into()));
    }
    let mut r = Reader { buf: body, pos: 5 };
    let kind = r.u8()?;
    let hop = r.u32()?;
    let sampler = Sampler::from_tag(kind, hop).ok_or_else(|| HotError::Cache("unknown sampler tag".into()))?;
    let fingerprint = r.u32()?;
    let count = r.len()?;
    let mut items = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let graph = decode_graph(&mut r)?;
        let sd = r.u8()? as usize;
        let nnz = r.len()?;
        let mut coords = Vec::with_capacity(nnz * sd);
        for _ in 0..nnz * sd {
            coords.push(i64::from(r.u32()?));
        }
        let mut values = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            values.push(r.i64()?);
        }
        let n = graph.num_nodes();
        let tuple_feature = SparseTensor::from_coo(vec![n; sd], vec![], coords, values)
            .map_err(|e| HotError::Cache(format!("tuple tensor: {e}")))?;
        items.push(PreprocessedGraph { graph, tuple_feature });
    }
    if r.pos != body.len() {
        return Err(HotError::Cache(format!("{} trailing bytes", body.len() - r.pos)));
    }
    Ok(CacheContents { sampler, fingerprint, items })
}

fn put_u64(buf: &mut Vec<u8>, v: usize) {
    buf.extend_from_slice(&(v as u64).to_le_bytes());
}

fn put_rows(buf: &mut Vec<u8>, rows: &[Vec<f64>]) {
    put_u64(buf, rows.first().map_or(0, Vec::len));
    for v in rows.iter().flatten() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

fn encode_graph(buf: &mut Vec<u8>, g: &Graph) {
    put_u64(buf, g.num_nodes());
    put_u64(buf, g.edges().len());
    for &(u, v) in g.edges() {
        buf.extend_from_slice(&(u as u32).to_le_bytes());
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    put_rows(buf, g.node_feat());
    match g.edge_feat() {
        Some(ef) => {
            buf.push(1);
            put_rows(buf, ef);
        }
        None => buf.push(0),
    }
    match g.target() {
        Some(y) => {
            buf.push(1);
            buf.extend_from_slice(&y.to_le_bytes());
        }
        None => buf.push(0),
    }
}

fn decode_graph(r: &mut Reader<'_>) -> Result<Graph> {
    let n = r.len()?;
    let m = r.len()?;
    let mut edges = Vec::with_capacity(m.min(1 << 24));
    for _ in 0..m {
        edges.push((i64::from(r.u32()?), i64::from(r.u32()?)));
    }
    let node_feat = r.rows(n)?;
    let edge_feat = if r.u8()? == 1 { Some(r.rows(m)?) } else { None };
    let target = if r.u8()? == 1 { Some(r.f64()?) } else { None };
    let (g, _) = Graph::new(n, &edges, node_feat, edge_feat, target)
        .map_err(|e| HotError::Cache(format!("graph record: {e}")))?;
    Ok(g)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        if end > self.buf.len() {
            return Err(HotError::Cache("unexpected end of data".into()));
        }
        let out = self.buf[self.pos..end].try_into().unwrap();
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }

    /// A `u64` count, rejected when it could not fit in the remaining bytes.
    fn len(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take()?);
        if v > (self.buf.len() - self.pos) as u64 * 8 + 1 {
            return Err(HotError::Cache(format!("implausible length {v}")));
        }
        Ok(v as usize)
    }

    fn rows(&mut self, count: usize) -> Result<Vec<Vec<f64>>> {
        let width = self.len()?;
        (0..count).map(|_| (0..width).map(|_| self.f64()).collect()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graphs() -> Vec<Graph> {
        vec![
            Graph::new(3, &[(0, 1), (1, 2)], vec![vec![1.0]; 3], None, Some(0.5)).unwrap().0,
            Graph::new(2, &[(0, 1)], vec![vec![2.0], vec![3.0]], Some(vec![vec![1.0, 2.0]]), None).unwrap().0,
            Graph::new(1, &[], vec![vec![0.0]], None, None).unwrap().0,
        ]
    }

    #[test]
    fn round_trip() {
        let items = preprocess(&graphs(), Sampler::KHop(2), 2).unwrap();
        let bytes = encode_cache(Sampler::KHop(2), 7, &items);
        let back = decode_cache(&bytes).unwrap();
        assert_eq!(back.sampler, Sampler::KHop(2));
        assert_eq!(back.fingerprint, 7);
        assert_eq!(back.items, items);
    }

    #[test]
    fn empty_list_has_valid_header() {
        let bytes = encode_cache(Sampler::I2(1), fingerprint(&[]), &[]);
        assert_eq!(bytes.len(), HEADER_LEN + 4);
        assert_eq!(&bytes[..4], CACHE_MAGIC);
        assert!(decode_cache(&bytes).unwrap().items.is_empty());
    }

    #[test]
    fn worker_count_does_not_change_bytes() {
        let gs = graphs();
        let a = encode_cache(Sampler::I2(1), 0, &preprocess(&gs, Sampler::I2(1), 1).unwrap());
        let b = encode_cache(Sampler::I2(1), 0, &preprocess(&gs, Sampler::I2(1), 8).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn corruption_detected() {
        let bytes = encode_cache(Sampler::KHop(1), 0, &preprocess(&graphs(), Sampler::KHop(1), 1).unwrap());
        assert!(matches!(decode_cache(&bytes[..bytes.len() - 9]), Err(HotError::Cache(_))));
        assert!(matches!(decode_cache(&bytes[..10]), Err(HotError::Cache(_))));
        let mut flipped = bytes.clone();
        flipped[30] ^= 0xff;
        assert!(matches!(decode_cache(&flipped), Err(HotError::Cache(_))));
        let mut old = bytes;
        old[4] = 0;
        assert!(matches!(decode_cache(&old), Err(HotError::Cache(_))));
    }

    #[test]
    fn second_call_loads_and_mismatch_recomputes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.hot");
        let gs = graphs();
        let (a, s1) = preprocess_parallel(&gs, Sampler::KHop(1), 2, &path).unwrap();
        let (b, s2) = preprocess_parallel(&gs, Sampler::KHop(1), 2, &path).unwrap();
        assert_eq!((s1, s2), (CacheStatus::Computed, CacheStatus::Loaded));
        assert_eq!(a, b);
        let (_, s3) = preprocess_parallel(&gs, Sampler::KHop(2), 2, &path).unwrap();
        assert_eq!(s3, CacheStatus::Computed);
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        let (c, s4) = preprocess_parallel(&gs, Sampler::KHop(2), 2, &path).unwrap();
        assert_eq!(s4, CacheStatus::Computed);
        assert_eq!(fs::read(&path).unwrap(), bytes);
        assert_eq!(c.len(), 3);
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let r = preprocess_parallel(&graphs(), Sampler::KHop(1), 1, "/nonexistent-dir/x/cache.hot");
        assert!(matches!(r, Err(HotError::Io(_))));
    }
}
