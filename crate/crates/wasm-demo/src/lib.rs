//! Browser demo over `hot-core`. Each export takes plain numbers and
//! strings and returns a JSON string; the `*_json` functions hold the logic
//! and run natively too.

use hot_core::data::generate::erdos_renyi;
use hot_core::data::{khop_sampler, Batch, Graph, PreprocessedGraph, Sampler};
use hot_core::graph_ops::{message_passing, OpDim, PatternPolicy};
use hot_core::model::{parse_representation, Arch, Model, ModelConfig};
use hot_core::{Aggregator, HotError, Representation, Result, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Largest graph the page will build.
pub const MAX_NODES: usize = 300;

fn demo_graph(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n == 0 || n > MAX_NODES {
        return Err(HotError::Config(format!("node count must be in 1..={MAX_NODES}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(HotError::Config(format!("edge probability {p} is not in [0, 1]")));
    }
    Ok(erdos_renyi(n, p, &mut ChaCha8Rng::seed_from_u64(seed)))
}

fn entries(t: &Tensor<f64>) -> Value {
    let mut out = Vec::new();
    t.for_each_existing(|idx, row| out.push(json!([idx[0], idx[1], row[0]])));
    Value::Array(out)
}

/// Edges and the k-hop support with shortest-path distances.
pub fn support_json(n: usize, p: f64, seed: u64, hop: usize) -> Result<String> {
    let g = demo_graph(n, p, seed)?;
    let s = khop_sampler(&g, hop);
    let support: Vec<Value> = s.iter().map(|(i, v)| json!([i[0], i[1], v[0]])).collect();
    let edges: Vec<Value> = g.edges().iter().filter(|(u, v)| u < v).map(|(u, v)| json!([u, v])).collect();
    Ok(json!({ "n": n, "edges": edges, "support": support, "stored": s.nnz(), "dense_cells": n * n }).to_string())
}

/// One within-subgraph message-passing step on H = distance values.
pub fn message_step_json(n: usize, p: f64, seed: u64, hop: usize, aggregator: &str, full: bool) -> Result<String> {
    let g = demo_graph(n, p, seed)?;
    let agg: Aggregator = aggregator.parse()?;
    if agg == Aggregator::SoftmaxWeighted {
        return Err(HotError::Unsupported("the demo step takes sum, mean, max or min".into()));
    }
    let h = Tensor::Sparse(khop_sampler(&g, hop).map_values(|v| v as f64));
    let a = Tensor::Sparse(g.adjacency::<f64>());
    let policy = if full { PatternPolicy::FullPattern } else { PatternPolicy::InputPattern };
    let out = message_passing(&h, &a, OpDim(1), agg, policy)?;
    Ok(json!({ "n": n, "before": entries(&h), "after": entries(&out) }).to_string())
}

/// Prediction of an untrained model on either representation.
pub fn forward_json(n: usize, p: f64, seed: u64, hop: u32, arch: &str, representation: &str) -> Result<String> {
    let g = demo_graph(n, p, seed)?;
    let arch: Arch = arch.parse()?;
    let rep = parse_representation(representation)?;
    let mut cfg = ModelConfig::new(arch);
    cfg.hidden = 8;
    cfg.representation = rep;
    cfg.cross_representation = rep != arch.native_representation();
    let sampler = if arch.tuple_order() == 3 { Sampler::I2(hop) } else { Sampler::KHop(hop) };
    let item = PreprocessedGraph::new(g, sampler);
    let stored = match rep {
        Representation::Sparse => item.tuple_feature.nnz(),
        Representation::Dense => n.pow(arch.tuple_order() as u32),
    };
    let batch = Batch::collate(std::slice::from_ref(&item), rep)?;
    let prediction = Model::for_batch(cfg, &batch)?.forward(&batch)?[0];
    Ok(json!({ "arch": arch.name(), "representation": representation, "prediction": prediction, "stored": stored })
        .to_string())
}

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn khop_support(n: usize, p: f64, seed: u64, hop: usize) -> std::result::Result<String, JsError> {
    js(support_json(n, p, seed, hop))
}

#[wasm_bindgen]
pub fn message_step(
    n: usize,
    p: f64,
    seed: u64,
    hop: usize,
    aggregator: &str,
    full: bool,
) -> std::result::Result<String, JsError> {
    js(message_step_json(n, p, seed, hop, aggregator, full))
}

#[wasm_bindgen]
pub fn forward(
    n: usize,
    p: f64,
    seed: u64,
    hop: u32,
    arch: &str,
    representation: &str,
) -> std::result::Result<String, JsError> {
    js(forward_json(n, p, seed, hop, arch, representation))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: String) -> Value {
        serde_json::from_str(&s).unwrap()
    }

    #[test]
    fn support_contains_diagonal() {
        let v = parse(support_json(12, 0.3, 1, 2).unwrap());
        let support = v["support"].as_array().unwrap();
        assert_eq!(v["stored"].as_u64().unwrap() as usize, support.len());
        for i in 0..12 {
            assert!(support.iter().any(|e| e[0] == i && e[1] == i && e[2] == 0));
        }
    }

    #[test]
    fn step_keeps_input_support() {
        let v = parse(message_step_json(10, 0.3, 2, 1, "sum", false).unwrap());
        assert_eq!(v["before"].as_array().unwrap().len(), v["after"].as_array().unwrap().len());
        assert!(message_step_json(10, 0.3, 2, 1, "softmax", false).is_err());
    }

    #[test]
    fn routes_agree() {
        let s = parse(forward_json(9, 0.4, 3, 2, "NGNN", "sparse").unwrap());
        let d = parse(forward_json(9, 0.4, 3, 2, "NGNN", "dense").unwrap());
        let (a, b) = (s["prediction"].as_f64().unwrap(), d["prediction"].as_f64().unwrap());
        assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        assert_eq!(d["stored"], 81);
    }

    #[test]
    fn rejects_oversized_graph() {
        assert!(support_json(MAX_NODES + 1, 0.1, 0, 1).is_err());
    }
}
