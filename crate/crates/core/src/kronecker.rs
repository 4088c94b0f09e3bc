//! Stochastic Kronecker graph machinery: the recursive edge sampler, the
//! maximum-likelihood initiator fit with permutation sampling, and BIC-based
//! initiator-size selection.

use std::collections::HashSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::StaticGraph;

/// Entries are clamped to this band during fitting so the log-likelihood
/// stays finite.
pub const ENTRY_CLAMP: f64 = 1e-4;

/// Hard cap on the side length materialized by [`InitiatorMatrix::kron_power`];
/// the dense expansion exists only for small-instance oracles.
const MAX_DENSE_SIDE: usize = 2048;

/// The n1 x n1 probability matrix whose k-fold Kronecker power defines the
/// edge distribution, plus fit metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitiatorMatrix {
    n1: usize,
    /// Row-major entries, each in [0, 1].
    entries: Vec<f64>,
    pub log_likelihood: f64,
    pub bic: f64,
    pub fit_seed: u64,
}

impl InitiatorMatrix {
    pub fn new(n1: usize, entries: Vec<f64>) -> Result<Self> {
        if n1 < 2 {
            return Err(Error::Fit(format!("initiator side must be >= 2, got {n1}")));
        }
        if entries.len() != n1 * n1 {
            return Err(Error::Fit(format!(
                "expected {} entries for a {n1}x{n1} initiator, got {}",
                n1 * n1,
                entries.len()
            )));
        }
        if entries.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::Fit("initiator entries must lie in [0, 1]".to_string()));
        }
        Ok(Self {
            n1,
            entries,
            log_likelihood: 0.0,
            bic: 0.0,
            fit_seed: 0,
        })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n1 = rows.len();
        let entries = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(n1, entries)
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n1 + j]
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().sum()
    }

    /// Smallest k >= 1 with n1^k >= target_nodes. Ceiling (rather than the
    /// floor of log_{n1} N) so that every node is addressable; sampled
    /// indices beyond the target are rejected.
    pub fn required_power(&self, target_nodes: usize) -> usize {
        let mut k = 1usize;
        let mut side = self.n1;
        while side < target_nodes {
            side = side.saturating_mul(self.n1);
            k += 1;
        }
        k
    }

    /// Dense k-fold Kronecker power. Entry (i, j) is the product over digit
    /// positions of the initiator entry addressed by the base-n1 digits of
    /// i and j.
    pub fn kron_power(&self, k: usize) -> Result<SquareMatrix> {
        if k < 1 {
            return Err(Error::Infeasible("kronecker power requires k >= 1".to_string()));
        }
        let mut side = 1usize;
        for _ in 0..k {
            side = side
                .checked_mul(self.n1)
                .filter(|&s| s <= MAX_DENSE_SIDE)
                .ok_or_else(|| {
                    Error::Infeasible(format!(
                        "dense expansion side {}^{k} exceeds the {MAX_DENSE_SIDE} cap",
                        self.n1
                    ))
                })?;
        }
        // Build by repeated Kronecker product: out = out (X) A.
        let mut data = vec![1.0];
        let mut cur = 1usize;
        for _ in 0..k {
            let next = cur * self.n1;
            let mut out = vec![0.0; next * next];
            for i in 0..cur {
                for j in 0..cur {
                    let base = data[i * cur + j];
                    for a in 0..self.n1 {
                        for b in 0..self.n1 {
                            out[(i * self.n1 + a) * next + (j * self.n1 + b)] =
                                base * self.get(a, b);
                        }
                    }
                }
            }
            data = out;
            cur = next;
        }
        Ok(SquareMatrix { side, data })
    }

    /// Draws one cell of the k-fold power, k successive categorical choices
    /// over the normalized initiator. Digit t carries place value n1^t, so
    /// indices span exactly [0, n1^k).
    pub fn sample_cell(&self, k: usize, cum: &[f64], rng: &mut impl Rng) -> (u64, u64) {
        let mut i = 0u64;
        let mut j = 0u64;
        let mut place = 1u64;
        for _ in 0..k {
            let cell = draw_categorical(cum, rng);
            let (a, b) = ((cell / self.n1) as u64, (cell % self.n1) as u64);
            i += a * place;
            j += b * place;
            place *= self.n1 as u64;
        }
        (i, j)
    }

    /// Reorders digits into the canonical gauge: the initiator is only
    /// identified up to a simultaneous row/column permutation, so fits pin
    /// the heavy-marginal digits to the low indices. Keeps sampled hub nodes
    /// at low ids, matching how Kronecker-ordered references lay out.
    pub fn canonicalize(&mut self) {
        let n1 = self.n1;
        let mass = |i: usize| -> f64 {
            let row: f64 = (0..n1).map(|j| self.get(i, j)).sum();
            let col: f64 = (0..n1).map(|j| self.get(j, i)).sum();
            row + col
        };
        let mut order: Vec<usize> = (0..n1).collect();
        order.sort_by(|&a, &b| {
            mass(b)
                .partial_cmp(&mass(a))
                .unwrap()
                .then(self.get(b, b).partial_cmp(&self.get(a, a)).unwrap())
        });
        let mut out = vec![0.0; n1 * n1];
        for i in 0..n1 {
            for j in 0..n1 {
                out[i * n1 + j] = self.get(order[i], order[j]);
            }
        }
        self.entries = out;
    }

    /// Cumulative weights of the initiator normalized to total mass 1.
    pub fn normalized_cumulative(&self) -> Result<Vec<f64>> {
        let total = self.sum();
        if total <= 0.0 {
            return Err(Error::Fit("cannot normalize an all-zero initiator".to_string()));
        }
        let mut cum = Vec::with_capacity(self.entries.len());
        let mut acc = 0.0;
        for &p in &self.entries {
            acc += p / total;
            cum.push(acc);
        }
        if let Some(last) = cum.last_mut() {
            *last = 1.0;
        }
        Ok(cum)
    }
}

fn draw_categorical(cum: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    match cum.binary_search_by(|p| p.partial_cmp(&u).unwrap()) {
        Ok(i) => i + 1,
        Err(i) => i,
    }
    .min(cum.len() - 1)
}

/// Small dense probability matrix produced by [`InitiatorMatrix::kron_power`].
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    pub side: usize,
    /// Row-major.
    pub data: Vec<f64>,
}

impl SquareMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.side + j]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}

/// Targets for one structure sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KronSampleSpec {
    pub target_nodes: usize,
    pub target_edges: usize,
    /// Kronecker power; n1^k must reach target_nodes.
    pub k: usize,
    pub seed: u64,
}

impl KronSampleSpec {
    /// Builds a spec with k = ceil(log_{n1} N).
    pub fn for_targets(
        initiator: &InitiatorMatrix,
        target_nodes: usize,
        target_edges: usize,
        seed: u64,
    ) -> Result<Self> {
        if target_nodes == 0 {
            return Err(Error::Infeasible("target node count must be positive".to_string()));
        }
        let spec = Self {
            target_nodes,
            target_edges,
            k: initiator.required_power(target_nodes),
            seed,
        };
        spec.validate(initiator)?;
        Ok(spec)
    }

    pub fn validate(&self, initiator: &InitiatorMatrix) -> Result<()> {
        let side = initiator
            .n1()
            .checked_pow(self.k as u32)
            .ok_or_else(|| Error::Infeasible("n1^k overflows".to_string()))?;
        if self.k < 1 || side < self.target_nodes {
            return Err(Error::Infeasible(format!(
                "n1^k = {side} cannot address {} nodes",
                self.target_nodes
            )));
        }
        let max_edges = (self.target_nodes as u128) * (self.target_nodes as u128);
        if self.target_edges as u128 > max_edges {
            return Err(Error::Infeasible(format!(
                "{} edges requested but only {} node pairs exist",
                self.target_edges, max_edges
            )));
        }
        Ok(())
    }
}

/// Per-sample bookkeeping, used by the collision-rate property checks.
#[derive(Debug, Clone, Copy, Default)]
pub struct SampleStats {
    /// Total cell draws, including rejected ones.
    pub draws: usize,
    /// Draws rejected because the cell was already an edge.
    pub duplicate_draws: usize,
    /// Draws rejected because an index fell outside the target node range.
    pub out_of_range_draws: usize,
}

/// Fast recursive Kronecker edge sampling: each edge is placed by k
/// categorical digit choices; duplicate cells and cells beyond the target
/// node range are redrawn. Deterministic given the sample seed.
pub fn sample_graph(initiator: &InitiatorMatrix, spec: &KronSampleSpec) -> Result<StaticGraph> {
    sample_graph_with_stats(initiator, spec).map(|(g, _)| g)
}

pub fn sample_graph_with_stats(
    initiator: &InitiatorMatrix,
    spec: &KronSampleSpec,
) -> Result<(StaticGraph, SampleStats)> {
    spec.validate(initiator)?;
    let cum = initiator.normalized_cumulative()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.target_nodes as u64;
    let mut edges: HashSet<(u32, u32)> = HashSet::with_capacity(spec.target_edges);
    let mut stats = SampleStats::default();
    // Generous stall guard for initiators whose reachable support is smaller
    // than the requested edge count.
    let max_draws = 1_000_000 + 200 * spec.target_edges;
    while edges.len() < spec.target_edges {
        if stats.draws >= max_draws {
            return Err(Error::Infeasible(format!(
                "sampling stalled after {} draws with {}/{} edges placed",
                stats.draws,
                edges.len(),
                spec.target_edges
            )));
        }
        stats.draws += 1;
        let (i, j) = initiator.sample_cell(spec.k, &cum, &mut rng);
        if i >= n || j >= n {
            stats.out_of_range_draws += 1;
            continue;
        }
        if !edges.insert((i as u32, j as u32)) {
            stats.duplicate_draws += 1;
        }
    }
    let graph = StaticGraph::new(spec.target_nodes, true, edges.into_iter().collect())?;
    Ok((graph, stats))
}

/// Knobs for the maximum-likelihood initiator fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KronFitOptions {
    pub iterations: usize,
    pub learning_rate: f64,
    /// Metropolis swap proposals per gradient estimate, as a multiple of the
    /// graph's node count.
    pub swaps_per_node: usize,
    pub seed: u64,
}

impl Default for KronFitOptions {
    fn default() -> Self {
        Self {
            iterations: 300,
            learning_rate: 0.05,
            swaps_per_node: 10,
            seed: 0,
        }
    }
}

/// Gradient ascent on the permutation-sampled log-likelihood of the graph
/// under the Kronecker model. Returns the fitted initiator plus the
/// per-iteration likelihood trace.
pub fn kronfit_with_trace(
    graph: &StaticGraph,
    n1: usize,
    opts: &KronFitOptions,
) -> Result<(InitiatorMatrix, Vec<f64>)> {
    if n1 < 2 {
        return Err(Error::Fit(format!("initiator side must be >= 2, got {n1}")));
    }
    if graph.edge_count() == 0 {
        return Err(Error::Fit("cannot fit an initiator to an empty graph".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut state = FitState::new(graph, n1, &mut rng);
    let mut trace = Vec::with_capacity(opts.iterations);
    let swaps = opts.swaps_per_node * graph.node_count();
    for iter in 0..opts.iterations {
        state.metropolis(swaps, &mut rng);
        let (ll, grad) = state.likelihood_and_gradient();
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Fit(format!(
                "non-finite gradient at iteration {iter}; entries {:?}",
                state.a
            )));
        }
        trace.push(ll);
        state.ascend(&grad, opts.learning_rate);
    }
    state.metropolis(swaps, &mut rng);
    let (final_ll, _) = state.likelihood_and_gradient();
    let mut fitted = InitiatorMatrix::new(n1, state.a)?;
    fitted.log_likelihood = final_ll;
    fitted.fit_seed = opts.seed;
    fitted.canonicalize();
    Ok((fitted, trace))
}

pub fn kronfit(graph: &StaticGraph, n1: usize, opts: &KronFitOptions) -> Result<InitiatorMatrix> {
    kronfit_with_trace(graph, n1, opts).map(|(m, _)| m)
}

/// BIC of one fitted initiator: -l(A) + n1^2/2 * log(N^2), natural log.
pub fn bic_score(log_likelihood: f64, n1: usize, node_count: usize) -> f64 {
    let n = node_count as f64;
    -log_likelihood + 0.5 * (n1 * n1) as f64 * (n * n).ln()
}

/// Fits every candidate size and returns the fit minimizing BIC; ties go to
/// the smaller initiator. Per-candidate failures are tolerated unless every
/// candidate fails.
pub fn select_n1(
    graph: &StaticGraph,
    candidates: &[usize],
    opts: &KronFitOptions,
) -> Result<InitiatorMatrix> {
    if candidates.is_empty() {
        return Err(Error::Fit("no initiator size candidates supplied".to_string()));
    }
    let mut sorted: Vec<usize> = candidates.to_vec();
    sorted.sort_unstable();
    let mut best: Option<InitiatorMatrix> = None;
    let mut failures = Vec::new();
    for &n1 in &sorted {
        match kronfit(graph, n1, opts) {
            Ok(mut fit) => {
                fit.bic = bic_score(fit.log_likelihood, n1, graph.node_count());
                let better = match &best {
                    None => true,
                    Some(cur) => fit.bic < cur.bic,
                };
                if better {
                    best = Some(fit);
                }
            }
            Err(e) => failures.push(format!("n1={n1}: {e}")),
        }
    }
    best.ok_or_else(|| Error::Fit(format!("all initiator candidates failed: {}", failures.join("; "))))
}

/// Shared state of one fit: current entries, the sampled node-to-slot
/// permutation, and the edge bookkeeping needed for O(deg) swap deltas.
struct FitState {
    n1: usize,
    k: usize,
    a: Vec<f64>,
    /// Graph node -> model slot, over all n1^k slots (nodes beyond the graph
    /// are phantoms without edges).
    perm: Vec<u64>,
    model_nodes: usize,
    edges: Vec<(u32, u32)>,
    incident: Vec<Vec<u32>>,
}

impl FitState {
    fn new(graph: &StaticGraph, n1: usize, rng: &mut ChaCha8Rng) -> Self {
        let probe = InitiatorMatrix::new(n1, vec![0.5; n1 * n1]).expect("valid probe");
        let k = probe.required_power(graph.node_count());
        let model_nodes = n1.pow(k as u32);
        let mut a: Vec<f64> = (0..n1 * n1)
            .map(|_| 0.25 + 0.5 * rng.random::<f64>())
            .collect();
        clamp_entries(&mut a);
        let edges = graph.edges().to_vec();
        let mut incident = vec![Vec::new(); graph.node_count()];
        for (idx, &(u, v)) in edges.iter().enumerate() {
            incident[u as usize].push(idx as u32);
            if v != u {
                incident[v as usize].push(idx as u32);
            }
        }
        Self {
            n1,
            k,
            a,
            perm: (0..model_nodes as u64).collect(),
            model_nodes,
            edges,
            incident,
        }
    }

    fn cell_prob(&self, slot_u: u64, slot_v: u64) -> f64 {
        let mut p = 1.0;
        let mut i = slot_u;
        let mut j = slot_v;
        let n1 = self.n1 as u64;
        for _ in 0..self.k {
            p *= self.a[(i % n1) as usize * self.n1 + (j % n1) as usize];
            i /= n1;
            j /= n1;
        }
        p
    }

    /// Edge term of the sparse likelihood: log p + p + p^2/2 (the last two
    /// undo the global Taylor expansion at edge cells).
    fn edge_term(&self, u: u32, v: u32) -> f64 {
        let p = self.cell_prob(self.perm[u as usize], self.perm[v as usize]);
        p.ln() + p + 0.5 * p * p
    }

    fn edge_terms_around(&self, nodes: &[u32]) -> f64 {
        let mut seen = [u32::MAX; 8];
        let mut seen_len = 0;
        let mut sum = 0.0;
        for &n in nodes {
            if (n as usize) < self.incident.len() {
                for &e in &self.incident[n as usize] {
                    if seen[..seen_len].contains(&e) {
                        continue;
                    }
                    if seen_len < seen.len() {
                        seen[seen_len] = e;
                        seen_len += 1;
                        let (u, v) = self.edges[e as usize];
                        sum += self.edge_term(u, v);
                    } else {
                        // fall back for high-degree nodes
                        return self.edge_terms_around_slow(nodes);
                    }
                }
            }
        }
        sum
    }

    fn edge_terms_around_slow(&self, nodes: &[u32]) -> f64 {
        let mut idxs: Vec<u32> = nodes
            .iter()
            .filter(|&&n| (n as usize) < self.incident.len())
            .flat_map(|&n| self.incident[n as usize].iter().copied())
            .collect();
        idxs.sort_unstable();
        idxs.dedup();
        idxs.iter()
            .map(|&e| {
                let (u, v) = self.edges[e as usize];
                self.edge_term(u, v)
            })
            .sum()
    }

    /// Metropolis chain over node-slot assignments; only terms incident to
    /// the swapped nodes change, the global Taylor term is
    /// permutation-invariant.
    fn metropolis(&mut self, proposals: usize, rng: &mut ChaCha8Rng) {
        for _ in 0..proposals {
            let u = rng.random_range(0..self.model_nodes) as u32;
            let v = rng.random_range(0..self.model_nodes) as u32;
            if u == v {
                continue;
            }
            let graph_nodes = self.incident.len();
            if u as usize >= graph_nodes && v as usize >= graph_nodes {
                // phantom-phantom swaps never change the likelihood
                self.perm.swap(u as usize, v as usize);
                continue;
            }
            let pair = [u, v];
            let before = self.edge_terms_around(&pair);
            self.perm.swap(u as usize, v as usize);
            let after = self.edge_terms_around(&pair);
            let delta = after - before;
            if delta >= 0.0 || rng.random::<f64>() < delta.exp() {
                continue;
            }
            self.perm.swap(u as usize, v as usize);
        }
    }

    /// Estimated log-likelihood at the current permutation and its gradient
    /// with respect to the initiator entries.
    fn likelihood_and_gradient(&self) -> (f64, Vec<f64>) {
        let n1 = self.n1;
        let sum_a: f64 = self.a.iter().sum();
        let sum_a2: f64 = self.a.iter().map(|x| x * x).sum();
        let kf = self.k as f64;
        let global = -sum_a.powi(self.k as i32) - 0.5 * sum_a2.powi(self.k as i32);
        let mut ll = global;
        let mut grad = vec![0.0; n1 * n1];
        let d_global_flat = kf * sum_a.powi(self.k as i32 - 1);
        let d_global_sq = kf * sum_a2.powi(self.k as i32 - 1);
        let mut counts = vec![0u32; n1 * n1];
        for &(u, v) in &self.edges {
            let mut i = self.perm[u as usize];
            let mut j = self.perm[v as usize];
            counts.fill(0);
            let mut p = 1.0;
            let n1_u = n1 as u64;
            for _ in 0..self.k {
                let cell = (i % n1_u) as usize * n1 + (j % n1_u) as usize;
                counts[cell] += 1;
                p *= self.a[cell];
                i /= n1_u;
                j /= n1_u;
            }
            ll += p.ln() + p + 0.5 * p * p;
            let weight = 1.0 + p + p * p;
            for (cell, &c) in counts.iter().enumerate() {
                if c > 0 {
                    grad[cell] += c as f64 * weight / self.a[cell];
                }
            }
        }
        for (cell, g) in grad.iter_mut().enumerate() {
            *g -= d_global_flat + d_global_sq * self.a[cell];
        }
        (ll, grad)
    }

    fn ascend(&mut self, grad: &[f64], lr: f64) {
        let max_abs = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let scale = if max_abs > 1.0 { lr / max_abs } else { lr };
        for (a, g) in self.a.iter_mut().zip(grad) {
            *a += scale * g;
        }
        clamp_entries(&mut self.a);
    }
}

fn clamp_entries(a: &mut [f64]) {
    for x in a.iter_mut() {
        *x = x.clamp(ENTRY_CLAMP, 1.0 - ENTRY_CLAMP);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn initiator(rows: &[&[f64]]) -> InitiatorMatrix {
        InitiatorMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn kron_power_of_identity_is_identity() {
        let a = initiator(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let m = a.kron_power(2).unwrap();
        assert_eq!(m.side, 4);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn kron_power_first_order_is_the_initiator() {
        let a = initiator(&[&[0.9, 0.5], &[0.5, 0.1]]);
        let m = a.kron_power(1).unwrap();
        assert_eq!(m.side, 2);
        assert_eq!(m.get(0, 0), 0.9);
        assert_eq!(m.get(1, 1), 0.1);
    }

    #[test]
    fn kron_power_corner_entries() {
        let a = initiator(&[&[0.9, 0.5], &[0.5, 0.1]]);
        let m = a.kron_power(2).unwrap();
        assert!((m.get(0, 0) - 0.81).abs() < 1e-15);
        assert!((m.get(3, 3) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn kron_power_matches_digit_product_oracle() {
        let a = initiator(&[&[0.7, 0.2, 0.4], &[0.1, 0.9, 0.3], &[0.5, 0.6, 0.05]]);
        let k = 3;
        let m = a.kron_power(k).unwrap();
        for i in 0..m.side {
            for j in 0..m.side {
                let mut p = 1.0;
                let (mut di, mut dj) = (i, j);
                for _ in 0..k {
                    p *= a.get(di % 3, dj % 3);
                    di /= 3;
                    dj /= 3;
                }
                assert!((m.get(i, j) - p).abs() <= 1e-12 * p.max(1e-300));
            }
        }
    }

    #[test]
    fn kron_power_rejects_oversized_expansion() {
        let a = initiator(&[&[0.9, 0.5], &[0.5, 0.1]]);
        assert!(matches!(a.kron_power(40), Err(Error::Infeasible(_))));
    }

    #[test]
    fn sample_graph_with_all_mass_at_origin() {
        let a = initiator(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let spec = KronSampleSpec {
            target_nodes: 8,
            target_edges: 1,
            k: 3,
            seed: 7,
        };
        let g = sample_graph(&a, &spec).unwrap();
        assert_eq!(g.edges(), &[(0, 0)]);
    }

    #[test]
    fn sample_graph_is_deterministic_and_exact() {
        let a = initiator(&[&[0.9, 0.5], &[0.5, 0.1]]);
        let spec = KronSampleSpec::for_targets(&a, 16, 30, 99).unwrap();
        assert_eq!(spec.k, 4);
        let g1 = sample_graph(&a, &spec).unwrap();
        let g2 = sample_graph(&a, &spec).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(g1.edge_count(), 30);
        let g3 = sample_graph(
            &a,
            &KronSampleSpec {
                seed: 100,
                ..spec.clone()
            },
        )
        .unwrap();
        assert_ne!(g1, g3);
    }

    #[test]
    fn sample_graph_emits_exact_edge_counts_exhaustively() {
        // every feasible E at N <= 8
        let a = initiator(&[&[0.9, 0.6], &[0.6, 0.2]]);
        for n in [4usize, 8] {
            for e in 1..=(n * n) {
                let spec = KronSampleSpec::for_targets(&a, n, e, 3).unwrap();
                let g = sample_graph(&a, &spec).unwrap();
                assert_eq!(g.edge_count(), e, "N={n} E={e}");
                assert!(g.edges().iter().all(|&(u, v)| (u as usize) < n && (v as usize) < n));
            }
        }
    }

    #[test]
    fn sample_graph_rejects_infeasible_edge_counts() {
        let a = initiator(&[&[0.9, 0.5], &[0.5, 0.1]]);
        let err = KronSampleSpec::for_targets(&a, 4, 17, 0).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn sample_graph_rejects_all_zero_initiator() {
        let a = initiator(&[&[0.0, 0.0], &[0.0, 0.0]]);
        let spec = KronSampleSpec {
            target_nodes: 4,
            target_edges: 1,
            k: 2,
            seed: 0,
        };
        assert!(matches!(sample_graph(&a, &spec), Err(Error::Fit(_))));
    }

    #[test]
    fn required_power_is_ceiling() {
        let a = initiator(&[&[0.9, 0.5], &[0.5, 0.1]]);
        assert_eq!(a.required_power(2), 1);
        assert_eq!(a.required_power(3), 2);
        assert_eq!(a.required_power(16), 4);
        assert_eq!(a.required_power(17), 5);
    }

    #[test]
    fn kronfit_rejects_degenerate_initiator_size() {
        let g = StaticGraph::new(2, true, vec![(0, 1)]).unwrap();
        assert!(matches!(
            kronfit(&g, 1, &KronFitOptions::default()),
            Err(Error::Fit(_))
        ));
    }

    #[test]
    fn kronfit_likelihood_trend_is_upward() {
        let a = initiator(&[&[0.9, 0.6], &[0.6, 0.2]]);
        let spec = KronSampleSpec::for_targets(&a, 64, 150, 11).unwrap();
        let g = sample_graph(&a, &spec).unwrap();
        let opts = KronFitOptions {
            iterations: 120,
            seed: 5,
            ..KronFitOptions::default()
        };
        let (_, trace) = kronfit_with_trace(&g, 2, &opts).unwrap();
        let head = median(&trace[..trace.len() / 10]);
        let tail = median(&trace[trace.len() - trace.len() / 10..]);
        assert!(
            tail >= head,
            "likelihood regressed: first-decile median {head}, last-decile median {tail}"
        );
    }

    fn median(xs: &[f64]) -> f64 {
        let mut v = xs.to_vec();
        v.sort_by(|x, y| x.partial_cmp(y).unwrap());
        v[v.len() / 2]
    }

    #[test]
    fn bic_formula_matches_direct_evaluation() {
        // l = -100, n1 = 2, N = 16 -> 100 + 2 ln 256
        let expected = 100.0 + 2.0 * 256f64.ln();
        assert!((bic_score(-100.0, 2, 16) - expected).abs() < 1e-12);
        assert!((bic_score(-100.0, 2, 16) - 111.09035488895912).abs() < 1e-9);
    }

    #[test]
    fn select_n1_breaks_ties_toward_smaller() {
        // With equal BIC the ascending scan keeps the smaller candidate; here
        // we only check the scan order is ascending regardless of input order.
        let a = initiator(&[&[0.9, 0.6], &[0.6, 0.2]]);
        let spec = KronSampleSpec::for_targets(&a, 32, 80, 21).unwrap();
        let g = sample_graph(&a, &spec).unwrap();
        let opts = KronFitOptions {
            iterations: 40,
            seed: 9,
            ..KronFitOptions::default()
        };
        let picked = select_n1(&g, &[3, 2], &opts).unwrap();
        let again = select_n1(&g, &[2, 3], &opts).unwrap();
        assert_eq!(picked.n1(), again.n1());
        assert_eq!(picked.bic, again.bic);
    }

    #[test]
    fn select_n1_requires_candidates() {
        let g = StaticGraph::new(2, true, vec![(0, 1)]).unwrap();
        assert!(select_n1(&g, &[], &KronFitOptions::default()).is_err());
    }
}
