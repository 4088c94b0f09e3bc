//! Reference generators for comparison: uniform-random structure, a
//! preferential-attachment scale-free structure, and the 2x2 special case of
//! the Kronecker sampler, each paired with uniform resampling of the
//! reference feature rows.

use std::collections::HashSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kronecker::{kronfit, sample_graph, InitiatorMatrix, KronFitOptions, KronSampleSpec};
use crate::model::{DynamicMultigraph, NetflowRecord, StaticGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Random,
    ScaleFree,
    Rmat2,
}

impl std::fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BaselineKind::Random => write!(f, "random"),
            BaselineKind::ScaleFree => write!(f, "scale_free"),
            BaselineKind::Rmat2 => write!(f, "rmat2"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub kind: BaselineKind,
    pub target_nodes: usize,
    pub target_edges: usize,
    pub flow_count: usize,
    pub seed: u64,
}

/// Generates one baseline dataset: the requested structure with exactly the
/// target edge count, plus `flow_count` flows resampled uniformly (with
/// replacement) from the reference rows and placed on uniform structure
/// edges. For `Rmat2` the 2x2 initiator is fit to the reference first.
pub fn generate_baseline(
    spec: &BaselineSpec,
    reference: &DynamicMultigraph,
    kron_opts: &KronFitOptions,
) -> Result<DynamicMultigraph> {
    let prefit = match spec.kind {
        BaselineKind::Rmat2 => Some(kronfit(&reference.to_static(true), 2, kron_opts)?),
        _ => None,
    };
    generate_baseline_prefit(spec, reference, prefit.as_ref())
}

/// Like [`generate_baseline`] but reusing an already-fitted 2x2 initiator,
/// so ensemble drivers fit once and sample many members.
pub fn generate_baseline_prefit(
    spec: &BaselineSpec,
    reference: &DynamicMultigraph,
    rmat2_initiator: Option<&InitiatorMatrix>,
) -> Result<DynamicMultigraph> {
    if reference.flow_count() == 0 {
        return Err(Error::Data("baselines resample reference features; reference is empty".to_string()));
    }
    let n = spec.target_nodes;
    if n == 0 {
        return Err(Error::Infeasible("baseline needs at least one node".to_string()));
    }
    if spec.target_edges > n * n {
        return Err(Error::Infeasible(format!(
            "{} edges requested but only {} node pairs exist",
            spec.target_edges,
            n * n
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let structure = match spec.kind {
        BaselineKind::Random => random_structure(n, spec.target_edges, &mut rng)?,
        BaselineKind::ScaleFree => scale_free_structure(n, spec.target_edges, &mut rng)?,
        BaselineKind::Rmat2 => {
            let fitted = rmat2_initiator.ok_or_else(|| {
                Error::Fit("rmat2 baseline needs a fitted 2x2 initiator".to_string())
            })?;
            let kron_spec =
                KronSampleSpec::for_targets(fitted, n, spec.target_edges, spec.seed)?;
            sample_graph(fitted, &kron_spec)?
        }
    };
    let flows = resample_flows(reference, &structure, spec.flow_count, &mut rng);
    let ip_map = (0..n).map(|i| i.to_string()).collect();
    DynamicMultigraph::new(n, flows, ip_map, reference.epoch())
}

/// E distinct directed pairs drawn uniformly from the N^2 cells (self-loops
/// included). Near saturation the sampling switches to a partial shuffle of
/// the whole cell space.
fn random_structure(n: usize, e: usize, rng: &mut ChaCha8Rng) -> Result<StaticGraph> {
    let cells = n * n;
    let edges: Vec<(u32, u32)> = if e * 2 > cells {
        let mut all: Vec<usize> = (0..cells).collect();
        for i in 0..e {
            let j = rng.random_range(i..cells);
            all.swap(i, j);
        }
        all.truncate(e);
        all.into_iter()
            .map(|c| ((c / n) as u32, (c % n) as u32))
            .collect()
    } else {
        let mut set = HashSet::with_capacity(e);
        while set.len() < e {
            let u = rng.random_range(0..n) as u32;
            let v = rng.random_range(0..n) as u32;
            set.insert((u, v));
        }
        set.into_iter().collect()
    };
    StaticGraph::new(n, true, edges)
}

/// Preferential-attachment growth (new node -> degree-proportional targets),
/// then uniform top-up or trim to hit the edge target exactly.
fn scale_free_structure(n: usize, e: usize, rng: &mut ChaCha8Rng) -> Result<StaticGraph> {
    let m = (((e as f64) / (n as f64)).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let mut set: HashSet<(u32, u32)> = HashSet::with_capacity(e);
    // repeated-endpoint list: uniform draws from it are degree-proportional
    let mut endpoints: Vec<u32> = Vec::new();
    let seed_nodes = (m + 1).min(n);
    for v in 1..seed_nodes {
        set.insert((v as u32, (v - 1) as u32));
        endpoints.push(v as u32);
        endpoints.push((v - 1) as u32);
    }
    for v in seed_nodes..n {
        let mut chosen: Vec<u32> = Vec::with_capacity(m);
        let mut guard = 0;
        while chosen.len() < m && guard < 100 * m {
            guard += 1;
            let t = endpoints[rng.random_range(0..endpoints.len())];
            if t != v as u32 && !chosen.contains(&t) {
                chosen.push(t);
            }
        }
        for t in chosen {
            set.insert((v as u32, t));
            endpoints.push(v as u32);
            endpoints.push(t);
        }
    }
    // top-up or trim to exactly e edges
    while set.len() < e {
        let u = rng.random_range(0..n) as u32;
        let v = rng.random_range(0..n) as u32;
        set.insert((u, v));
    }
    if set.len() > e {
        let mut edges: Vec<(u32, u32)> = set.into_iter().collect();
        edges.sort_unstable();
        for i in 0..e {
            let j = rng.random_range(i..edges.len());
            edges.swap(i, j);
        }
        edges.truncate(e);
        return StaticGraph::new(n, true, edges);
    }
    StaticGraph::new(n, true, set.into_iter().collect())
}

fn resample_flows(
    reference: &DynamicMultigraph,
    structure: &StaticGraph,
    flow_count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<NetflowRecord> {
    let edges = structure.edges();
    (0..flow_count)
        .map(|_| {
            let row = &reference.flows()[rng.random_range(0..reference.flow_count())];
            let (src, dst) = edges[rng.random_range(0..edges.len())];
            NetflowRecord {
                src,
                dst,
                start_time: row.start_time,
                duration: row.duration,
                port_protocol: row.port_protocol.clone(),
            }
        })
        .collect()
}
