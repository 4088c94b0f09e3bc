//! Graph alignment: structural descriptors of the sampled topology, the
//! cosine-similarity training target with its precomputed per-edge sums, the
//! boosted-tree scorer over (feature, edge) pairs, and the weighted edge
//! assignment that turns feature rows into placed flows.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boost::{BoostParams, BoostedScorer};
use crate::error::{Error, Result};
use crate::features::{EncodedFeature, FeatureEncoder};
use crate::model::{DynamicMultigraph, NetflowRecord, StaticGraph};

const EIGEN_TOL: f64 = 1e-8;
const EIGEN_MAX_ITERS: usize = 1000;

/// Centrality bundle for one structural edge (u, v). Node measures are taken
/// on the undirected simple view except degree, which is the directed in+out
/// sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralDescriptor {
    pub degree_src: f64,
    pub degree_dst: f64,
    pub betweenness_src: f64,
    pub betweenness_dst: f64,
    pub eigenvector_src: f64,
    pub eigenvector_dst: f64,
    pub laplacian_src: f64,
    pub laplacian_dst: f64,
    pub edge_betweenness: f64,
}

impl StructuralDescriptor {
    pub const DIM: usize = 9;

    pub fn to_array(self) -> [f64; Self::DIM] {
        [
            self.degree_src,
            self.degree_dst,
            self.betweenness_src,
            self.betweenness_dst,
            self.eigenvector_src,
            self.eigenvector_dst,
            self.laplacian_src,
            self.laplacian_dst,
            self.edge_betweenness,
        ]
    }
}

/// Node and edge betweenness via Brandes' accumulation, unnormalized,
/// undirected convention (each unordered pair counted once).
pub fn betweenness(adj: &[Vec<u32>]) -> (Vec<f64>, BTreeMap<(u32, u32), f64>) {
    let n = adj.len();
    let mut node_b = vec![0.0; n];
    let mut edge_b: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    let mut stack: Vec<u32> = Vec::with_capacity(n);
    let mut queue: VecDeque<u32> = VecDeque::new();
    for s in 0..n as u32 {
        let mut pred: Vec<Vec<u32>> = vec![Vec::new(); n];
        let mut sigma = vec![0.0f64; n];
        let mut dist = vec![-1i64; n];
        stack.clear();
        queue.clear();
        sigma[s as usize] = 1.0;
        dist[s as usize] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in &adj[v as usize] {
                if dist[w as usize] < 0 {
                    dist[w as usize] = dist[v as usize] + 1;
                    queue.push_back(w);
                }
                if dist[w as usize] == dist[v as usize] + 1 {
                    sigma[w as usize] += sigma[v as usize];
                    pred[w as usize].push(v);
                }
            }
        }
        let mut delta = vec![0.0f64; n];
        while let Some(w) = stack.pop() {
            for &v in &pred[w as usize] {
                let c = sigma[v as usize] / sigma[w as usize] * (1.0 + delta[w as usize]);
                let key = (v.min(w), v.max(w));
                *edge_b.entry(key).or_insert(0.0) += c;
                delta[v as usize] += c;
            }
            if w != s {
                node_b[w as usize] += delta[w as usize];
            }
        }
    }
    for b in &mut node_b {
        *b /= 2.0;
    }
    for b in edge_b.values_mut() {
        *b /= 2.0;
    }
    (node_b, edge_b)
}

/// Power iteration on the undirected adjacency, L2-normalized, nonnegative.
/// Iterates on A + I so bipartite components cannot oscillate; the dominant
/// eigenvector is unchanged by the shift.
pub fn eigenvector_centrality(adj: &[Vec<u32>]) -> Vec<f64> {
    let n = adj.len();
    if n == 0 {
        return Vec::new();
    }
    if adj.iter().all(|nb| nb.is_empty()) {
        return vec![0.0; n];
    }
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut next = vec![0.0; n];
    for _ in 0..EIGEN_MAX_ITERS {
        for (u, (nxt, nbrs)) in next.iter_mut().zip(adj).enumerate() {
            *nxt = x[u];
            for &w in nbrs {
                *nxt += x[w as usize];
            }
        }
        let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut change = 0.0f64;
        for (xi, ni) in x.iter_mut().zip(next.iter()) {
            let v = ni / norm;
            change = change.max((v - *xi).abs());
            *xi = v;
        }
        if change < EIGEN_TOL {
            break;
        }
    }
    x
}

/// Relative drop in Laplacian energy (sum of squared degrees plus twice the
/// edge count) when the node is removed; computed on the undirected view.
pub fn laplacian_centrality(adj: &[Vec<u32>]) -> Vec<f64> {
    let n = adj.len();
    let deg: Vec<f64> = adj.iter().map(|nb| nb.len() as f64).collect();
    let m: f64 = deg.iter().sum::<f64>() / 2.0;
    let energy: f64 = deg.iter().map(|d| d * d).sum::<f64>() + 2.0 * m;
    if energy == 0.0 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|v| {
            let dv = deg[v];
            let removed: f64 = adj[v].iter().map(|&u| {
                let du = deg[u as usize];
                du * du - (du - 1.0) * (du - 1.0)
            }).sum();
            // energy of G - v: drop v's own d^2, its neighbors' d^2 deltas,
            // and 2 * d_v edges
            let drop = dv * dv + removed + 2.0 * dv;
            drop / energy
        })
        .collect()
}

/// Per-edge structural descriptors of a static graph. A zero-edge graph
/// yields an empty map; self-loop edges use 0 for edge betweenness (the
/// undirected simple view has no loops).
pub fn structural_features(g: &StaticGraph) -> BTreeMap<(u32, u32), StructuralDescriptor> {
    if g.edge_count() == 0 {
        return BTreeMap::new();
    }
    let adj = g.undirected_adjacency();
    let degrees = g.total_degrees();
    let (node_b, edge_b) = betweenness(&adj);
    let eigen = eigenvector_centrality(&adj);
    let lap = laplacian_centrality(&adj);
    g.edges()
        .iter()
        .map(|&(u, v)| {
            let (ui, vi) = (u as usize, v as usize);
            let eb = if u == v {
                0.0
            } else {
                edge_b.get(&(u.min(v), u.max(v))).copied().unwrap_or(0.0)
            };
            let desc = StructuralDescriptor {
                degree_src: degrees[ui] as f64,
                degree_dst: degrees[vi] as f64,
                betweenness_src: node_b[ui],
                betweenness_dst: node_b[vi],
                eigenvector_src: eigen[ui],
                eigenvector_dst: eigen[vi],
                laplacian_src: lap[ui],
                laplacian_dst: lap[vi],
                edge_betweenness: eb,
            };
            ((u, v), desc)
        })
        .collect()
}

/// Training targets for the alignment scorer: for each reference edge e_i the
/// normalized-feature sum over its flows is precomputed once, so the target
/// for a pair (e_i, f_j) — the mean cosine similarity between f_j and the
/// flows of e_i — costs one dot product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentTargets {
    /// Reference static edges that carried at least one usable flow.
    pub edges: Vec<(u32, u32)>,
    /// Per edge: sum of f / |f| over its flows.
    pub edge_norm_sums: Vec<Vec<f64>>,
    /// Per edge: |k_i|.
    pub edge_flow_counts: Vec<usize>,
    /// Encoded reference flows, in flow order.
    pub flow_vectors: Vec<Vec<f64>>,
    /// (edge index, flow index, target) over the possibly subsampled cross
    /// product.
    pub pairs: Vec<(u32, u32, f64)>,
    /// Flows dropped for a zero-norm encoding (cannot happen with one-hot
    /// blocks present, but guarded anyway).
    pub skipped_zero_norm: usize,
}

/// Builds the cosine-similarity target set over the (edge, flow) cross
/// product. `sample_fraction` in (0, 1] keeps each pair with that
/// probability (seeded), mirroring structural-edge subsampling for large
/// node counts.
pub fn build_targets(
    reference: &DynamicMultigraph,
    encoder: &FeatureEncoder,
    sample_fraction: f64,
    seed: u64,
) -> Result<AlignmentTargets> {
    if reference.flow_count() == 0 {
        return Err(Error::Data("cannot build alignment targets without flows".to_string()));
    }
    if !(sample_fraction > 0.0 && sample_fraction <= 1.0) {
        return Err(Error::Data(format!(
            "sample fraction must lie in (0, 1], got {sample_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flow_vectors = Vec::with_capacity(reference.flow_count());
    let mut norms = Vec::with_capacity(reference.flow_count());
    let mut skipped = 0usize;
    for f in reference.flows() {
        let v = encoder.to_vector(&encoder.encode(f, &mut rng)?);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        norms.push(norm);
        flow_vectors.push(v);
    }
    let dim = encoder.vector_len();
    let mut edge_index: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    let mut edges = Vec::new();
    let mut edge_norm_sums: Vec<Vec<f64>> = Vec::new();
    let mut edge_flow_counts: Vec<usize> = Vec::new();
    for (f, norm) in reference.flows().iter().zip(&norms) {
        if *norm == 0.0 {
            skipped += 1;
            continue;
        }
        let idx = *edge_index.entry((f.src, f.dst)).or_insert_with(|| {
            edges.push((f.src, f.dst));
            edge_norm_sums.push(vec![0.0; dim]);
            edge_flow_counts.push(0);
            edges.len() - 1
        });
        edge_flow_counts[idx] += 1;
    }
    // second pass accumulates the normalized sums (flow order is stable)
    for ((f, v), norm) in reference.flows().iter().zip(&flow_vectors).zip(&norms) {
        if *norm == 0.0 {
            continue;
        }
        let idx = edge_index[&(f.src, f.dst)];
        for (acc, x) in edge_norm_sums[idx].iter_mut().zip(v) {
            *acc += x / norm;
        }
    }
    let mut pairs = Vec::new();
    for (ei, sum) in edge_norm_sums.iter().enumerate() {
        let count = edge_flow_counts[ei] as f64;
        for (fj, (v, norm)) in flow_vectors.iter().zip(&norms).enumerate() {
            if *norm == 0.0 {
                continue;
            }
            if sample_fraction < 1.0 && rng.random::<f64>() >= sample_fraction {
                continue;
            }
            let dot: f64 = v.iter().zip(sum).map(|(a, b)| a * b).sum();
            let target = dot / (norm * count);
            pairs.push((ei as u32, fj as u32, target));
        }
    }
    if skipped > 0 {
        eprintln!("warning: {skipped} flows dropped from alignment targets (zero-norm encoding)");
    }
    Ok(AlignmentTargets {
        edges,
        edge_norm_sums,
        edge_flow_counts,
        flow_vectors,
        pairs,
        skipped_zero_norm: skipped,
    })
}

/// Mean-of-cosines oracle used to cross-check the precomputed targets.
pub fn naive_mean_cosine(flow: &[f64], edge_flows: &[&Vec<f64>]) -> f64 {
    let norm_f = flow.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut total = 0.0;
    for ef in edge_flows {
        let norm_e = ef.iter().map(|x| x * x).sum::<f64>().sqrt();
        let dot: f64 = flow.iter().zip(ef.iter()).map(|(a, b)| a * b).sum();
        total += dot / (norm_f * norm_e);
    }
    total / edge_flows.len() as f64
}

/// Trains the boosted scorer on concat(flow vector, edge descriptor) rows.
pub fn train_scorer(
    targets: &AlignmentTargets,
    descriptors: &BTreeMap<(u32, u32), StructuralDescriptor>,
    params: &BoostParams,
) -> Result<BoostedScorer> {
    if targets.pairs.is_empty() {
        return Err(Error::Data("no training pairs for the alignment scorer".to_string()));
    }
    let edge_vecs: Vec<[f64; StructuralDescriptor::DIM]> = targets
        .edges
        .iter()
        .map(|e| {
            descriptors
                .get(e)
                .map(|d| d.to_array())
                .ok_or_else(|| Error::Data(format!("no structural descriptor for edge {e:?}")))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(targets.pairs.len());
    let mut y = Vec::with_capacity(targets.pairs.len());
    for &(ei, fj, target) in &targets.pairs {
        let mut row = targets.flow_vectors[fj as usize].clone();
        row.extend_from_slice(&edge_vecs[ei as usize]);
        rows.push(row);
        y.push(target);
    }
    BoostedScorer::train(&rows, &y, params)
}

/// Knobs for the weighted edge assignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssignOptions {
    /// Scores below this become probability zero.
    pub threshold: f64,
    /// Fraction of the synthetic edges scored per feature row; 1.0 scores
    /// them all.
    pub score_sample: f64,
    pub seed: u64,
}

impl Default for AssignOptions {
    fn default() -> Self {
        Self {
            threshold: 0.0,
            score_sample: 1.0,
            seed: 0,
        }
    }
}

/// Assigns every feature row a (src, dst) edge of the synthetic structure by
/// weighted sampling of the thresholded scores; decoded features become the
/// flow fields. Falls back to a uniform choice when every score is zeroed.
/// Deterministic given the options seed.
pub fn assign_edges(
    scorer: &BoostedScorer,
    syn_graph: &StaticGraph,
    encoder: &FeatureEncoder,
    syn_features: &[EncodedFeature],
    opts: &AssignOptions,
) -> Result<DynamicMultigraph> {
    if syn_graph.edge_count() == 0 {
        return Err(Error::Data("synthetic structure has no edges to assign onto".to_string()));
    }
    if opts.threshold < 0.0 {
        return Err(Error::Data(format!("threshold must be >= 0, got {}", opts.threshold)));
    }
    if !(opts.score_sample > 0.0 && opts.score_sample <= 1.0) {
        return Err(Error::Data(format!(
            "score sample fraction must lie in (0, 1], got {}",
            opts.score_sample
        )));
    }
    let descriptors = structural_features(syn_graph);
    let edges = syn_graph.edges();
    let edge_vecs: Vec<[f64; StructuralDescriptor::DIM]> = edges
        .iter()
        .map(|e| descriptors[e].to_array())
        .collect();

    let flows: Vec<NetflowRecord> = syn_features
        .par_iter()
        .enumerate()
        .map(|(j, feature)| -> Result<NetflowRecord> {
            // per-feature stream keeps the result independent of scheduling
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (j as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let fvec = encoder.to_vector(feature);
            let candidates: Vec<usize> = if opts.score_sample < 1.0 {
                let want = ((edges.len() as f64 * opts.score_sample).ceil() as usize).max(1);
                sample_indices(edges.len(), want, &mut rng)
            } else {
                (0..edges.len()).collect()
            };
            let mut row = Vec::with_capacity(fvec.len() + StructuralDescriptor::DIM);
            let mut weights = Vec::with_capacity(candidates.len());
            let mut total = 0.0;
            for &ei in &candidates {
                row.clear();
                row.extend_from_slice(&fvec);
                row.extend_from_slice(&edge_vecs[ei]);
                let mut w = scorer.predict(&row).max(0.0);
                if w < opts.threshold {
                    w = 0.0;
                }
                weights.push(w);
                total += w;
            }
            let pick = if total > 0.0 {
                let mut u = rng.random::<f64>() * total;
                let mut chosen = candidates.len() - 1;
                for (i, &w) in weights.iter().enumerate() {
                    if u < w {
                        chosen = i;
                        break;
                    }
                    u -= w;
                }
                candidates[chosen]
            } else {
                candidates[rng.random_range(0..candidates.len())]
            };
            let (src, dst) = edges[pick];
            let (start, duration, port_protocol) = encoder.decode(feature)?;
            Ok(NetflowRecord {
                src,
                dst,
                // record fields must stay non-negative
                start_time: start.max(0.0),
                duration,
                port_protocol,
            })
        })
        .collect::<Result<_>>()?;

    let n = syn_graph.node_count();
    let ip_map = (0..n).map(|i| i.to_string()).collect();
    DynamicMultigraph::new(n, flows, ip_map, 0.0)
}

/// `want` distinct indices out of `len`, partial Fisher-Yates.
fn sample_indices(len: usize, want: usize, rng: &mut impl Rng) -> Vec<usize> {
    let want = want.min(len);
    let mut pool: Vec<usize> = (0..len).collect();
    for i in 0..want {
        let j = rng.random_range(i..len);
        pool.swap(i, j);
    }
    pool.truncate(want);
    pool.sort_unstable();
    pool
}
