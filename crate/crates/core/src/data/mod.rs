//! Graph ingestion, tuple sampling, cached preprocessing and batching.

mod batch;
mod cache;
pub mod generate;
mod graph;
mod sampler;

pub use batch::{collate_dense, collate_sparse, slice_block, Batch, DenseBatch, SparseBatch};
pub use cache::{
    decode_cache, encode_cache, fingerprint, preprocess, preprocess_parallel, read_cache, write_cache, CacheContents,
    CacheStatus, PreprocessedGraph, CACHE_MAGIC, CACHE_VERSION,
};
pub use graph::{load_graphs, read_graphs, write_graphs, Graph};
pub use sampler::{bfs_distances, i2_sampler, khop_sampler, Sampler};
