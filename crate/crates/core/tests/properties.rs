use std::collections::VecDeque;

use hot_core::backend::{self, OutputPattern};
use hot_core::data::{collate_sparse, khop_sampler, preprocess, Graph, PreprocessedGraph, Sampler};
use hot_core::graph_ops::{message_passing, OpDim, PatternPolicy};
use hot_core::{Aggregator, SparseTensor, Tensor};
use proptest::prelude::*;

type Grid = Vec<Vec<Option<i64>>>;

fn grid(rows: usize, cols: usize, density: f64) -> impl Strategy<Value = Grid> {
    prop::collection::vec(prop::collection::vec(prop::option::weighted(density, -5i64..6), cols), rows)
}

fn to_sparse(g: &Grid) -> SparseTensor<i64> {
    let entries = g.iter().enumerate().flat_map(|(i, r)| {
        r.iter().enumerate().filter_map(move |(j, v)| v.map(|v| (vec![i as i64, j as i64], vec![v])))
    });
    SparseTensor::from_entries(vec![g.len(), g[0].len()], vec![], entries).unwrap()
}

fn to_grid(t: &Tensor<i64>, rows: usize, cols: usize) -> Grid {
    let mut g = vec![vec![None; cols]; rows];
    t.for_each_existing(|idx, v| g[idx[0] as usize][idx[1] as usize] = Some(v[0]));
    g
}

fn oracle_matmul(a: &Grid, b: &Grid, agg: Aggregator) -> Grid {
    let (n, m, p) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![None; p]; n];
    for i in 0..n {
        for j in 0..p {
            let msgs: Vec<i64> = (0..m).filter_map(|k| Some(a[i][k]? * b[k][j]?)).collect();
            if msgs.is_empty() {
                continue;
            }
            out[i][j] = Some(match agg {
                Aggregator::Sum => msgs.iter().sum(),
                Aggregator::Mean => msgs.iter().sum::<i64>() / msgs.len() as i64,
                Aggregator::Max => *msgs.iter().max().unwrap(),
                Aggregator::Min => *msgs.iter().min().unwrap(),
                Aggregator::SoftmaxWeighted => unreachable!(),
            });
        }
    }
    out
}

fn agg_strategy() -> impl Strategy<Value = Aggregator> {
    prop::sample::select(vec![Aggregator::Sum, Aggregator::Mean, Aggregator::Max, Aggregator::Min])
}

fn shapes() -> impl Strategy<Value = (usize, usize, usize, f64)> {
    (1usize..8, 1usize..8, 1usize..8, prop::sample::select(vec![0.1, 0.3, 1.0]))
}

fn bfs_all(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<Option<usize>>> {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
    }
    (0..n)
        .map(|s| {
            let mut d = vec![None; n];
            d[s] = Some(0);
            let mut q = VecDeque::from([s]);
            while let Some(u) = q.pop_front() {
                for &v in &adj[u] {
                    if d[v].is_none() {
                        d[v] = Some(d[u].unwrap() + 1);
                        q.push_back(v);
                    }
                }
            }
            d
        })
        .collect()
}

fn graph_strategy(max_n: usize) -> impl Strategy<Value = Graph> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec((0..n as i64, 0..n as i64), 0..=2 * n).prop_map(move |edges| {
            let feat = (0..n).map(|v| vec![(v % 3) as f64]).collect();
            Graph::new(n, &edges, feat, None, Some(1.0)).unwrap().0
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coalesce_ignores_entry_order(entries in prop::collection::vec(((0i64..4, 0i64..4), -3i64..4), 0..20), seed in any::<u64>()) {
        let mk = |es: &[((i64, i64), i64)]| SparseTensor::from_entries(
            vec![4, 4], vec![], es.iter().map(|&((i, j), v)| (vec![i, j], vec![v]))).unwrap();
        let a = mk(&entries);
        let mut shuffled = entries.clone();
        let k = if shuffled.is_empty() { 0 } else { (seed as usize) % shuffled.len() };
        shuffled.rotate_left(k);
        shuffled.reverse();
        prop_assert_eq!(&mk(&shuffled), &a);
        let again = SparseTensor::from_coo(vec![4, 4], vec![], a.coords().to_vec(), a.values().to_vec()).unwrap();
        prop_assert_eq!(&again, &a);
        prop_assert!(a.check_invariants().is_ok());
    }

    #[test]
    fn masked_round_trip(g in grid(5, 4, 0.4)) {
        let s = to_sparse(&g);
        prop_assert_eq!(s.to_masked().to_sparse(), s);
    }

    #[test]
    fn matmul_matches_oracle((n, m, p, dens) in shapes(), agg in agg_strategy(), seed in any::<u64>()) {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let a = random_grid(&mut rng, n, m, dens);
        let b = random_grid(&mut rng, m, p, dens);
        let want = oracle_matmul(&a, &b, agg);
        let (sa, sb) = (Tensor::Sparse(to_sparse(&a)), Tensor::Sparse(to_sparse(&b)));
        let sparse = backend::matmul(&sa, &sb, agg, None).unwrap();
        prop_assert_eq!(to_grid(&sparse, n, p), want.clone());
        let dense = backend::matmul(&Tensor::Masked(sa.to_masked()), &Tensor::Masked(sb.to_masked()), agg, None).unwrap();
        prop_assert_eq!(to_grid(&dense, n, p), want.clone());
        let full = OutputPattern::full(vec![n, p]);
        let patterned = backend::matmul(&sa, &sb, agg, Some(&full)).unwrap();
        prop_assert_eq!(patterned, sparse);
    }

    #[test]
    fn add_commutes(a in grid(4, 4, 0.5), b in grid(4, 4, 0.5)) {
        let (x, y) = (Tensor::Sparse(to_sparse(&a)), Tensor::Sparse(to_sparse(&b)));
        prop_assert_eq!(backend::add(&x, &y).unwrap(), backend::add(&y, &x).unwrap());
    }

    #[test]
    fn mean_times_count_is_sum(g in grid(5, 5, 0.5), dim in 0usize..2) {
        let t = Tensor::Sparse(to_sparse(&g).map_values(|v| v as f64));
        let sum = backend::reduce(&t, dim, Aggregator::Sum).unwrap();
        let mean = backend::reduce(&t, dim, Aggregator::Mean).unwrap();
        let ones = t.map_values(|_| 1.0);
        let count = backend::reduce(&ones, dim, Aggregator::Sum).unwrap();
        let (s, m, c) = (sum.to_sparse(), mean.to_sparse(), count.to_sparse());
        prop_assert!(s.same_pattern(&m));
        for e in 0..s.nnz() {
            prop_assert!((m.value(e)[0] * c.value(e)[0] - s.value(e)[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn khop_matches_bfs(g in graph_strategy(12), hop in 1usize..4) {
        let dist = bfs_all(g.num_nodes(), g.edges());
        let t = khop_sampler(&g, hop);
        let n = g.num_nodes();
        for i in 0..n {
            for j in 0..n {
                let want = dist[i][j].filter(|&d| d <= hop).map(|d| d as i64);
                prop_assert_eq!(t.get(&[i as i64, j as i64]).map(|v| v[0]), want);
            }
        }
    }

    #[test]
    fn message_passing_triple_loop(g in graph_strategy(10), hop in 1usize..3) {
        let h = khop_sampler(&g, hop);
        let a = g.adjacency::<i64>();
        let out = message_passing(&Tensor::Sparse(h.clone()), &Tensor::Sparse(a.clone()), OpDim(1),
            Aggregator::Sum, PatternPolicy::InputPattern).unwrap();
        let n = g.num_nodes() as i64;
        for (idx, _) in h.iter() {
            let (i, j) = (idx[0], idx[1]);
            let mut want = 0;
            for k in 0..n {
                if let (Some(hv), Some(av)) = (h.get(&[i, k]), a.get(&[k, j])) {
                    want += hv[0] * av[0];
                }
            }
            prop_assert_eq!(out.get(idx).unwrap()[0], want);
        }
        prop_assert_eq!(out.num_existing(), h.nnz());
        let full = message_passing(&Tensor::Sparse(h.clone()), &Tensor::Sparse(a), OpDim(1),
            Aggregator::Sum, PatternPolicy::FullPattern).unwrap();
        for (idx, v) in out.to_sparse().iter() {
            prop_assert_eq!(full.get(idx).map_or(0, |r| r[0]), v[0]);
        }
    }

    #[test]
    fn message_passing_is_equivariant(g in graph_strategy(9), seed in any::<u64>(), dim in 0usize..2) {
        let n = g.num_nodes();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        let pg = g.permute(&perm).unwrap();
        let run = |g: &Graph| message_passing(&Tensor::Sparse(khop_sampler(g, 2)), &Tensor::Sparse(g.adjacency()),
            OpDim(dim), Aggregator::Max, PatternPolicy::InputPattern).unwrap();
        let (base, moved) = (run(&g), run(&pg));
        prop_assert_eq!(base.num_existing(), moved.num_existing());
        for (idx, v) in base.to_sparse().iter() {
            let pi = [perm[idx[0] as usize] as i64, perm[idx[1] as usize] as i64];
            prop_assert_eq!(moved.get(&pi), Some(v));
        }
    }

    #[test]
    fn collate_then_slice_recovers(gs in prop::collection::vec(graph_strategy(7), 1..6)) {
        let items: Vec<PreprocessedGraph> = gs.into_iter().map(|g| PreprocessedGraph::new(g, Sampler::KHop(2))).collect();
        let b = collate_sparse(&items).unwrap();
        for (k, it) in items.iter().enumerate() {
            prop_assert_eq!(&b.item(k).unwrap(), it);
        }
    }

    #[test]
    fn preprocessing_ignores_workers_and_chunking(gs in prop::collection::vec(graph_strategy(8), 0..12), split in 0usize..12) {
        let one = preprocess(&gs, Sampler::I2(1), 1).unwrap();
        let many = preprocess(&gs, Sampler::I2(1), 4).unwrap();
        prop_assert_eq!(&one, &many);
        let k = split.min(gs.len());
        let mut chunked = preprocess(&gs[..k], Sampler::I2(1), 2).unwrap();
        chunked.extend(preprocess(&gs[k..], Sampler::I2(1), 3).unwrap());
        prop_assert_eq!(&one, &chunked);
    }
}

fn random_grid(rng: &mut impl rand::Rng, rows: usize, cols: usize, density: f64) -> Grid {
    (0..rows).map(|_| (0..cols).map(|_| rng.gen_bool(density).then(|| rng.gen_range(-5..6))).collect()).collect()
}
