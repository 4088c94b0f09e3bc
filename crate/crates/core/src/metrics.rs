//! Ensemble evaluation: the per-day edit-distance sum, the sphere metrics
//! (accuracy, diversity, radius, bias, variability, generalization error),
//! secondary structural measures, and empirical feature CDF tables.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DailyTensor, DynamicMultigraph, StaticGraph};

/// Sum over day blocks of the entrywise L1 difference between the two
/// graphs' daily flow-count matrices. Requires node correspondence; the
/// shorter day range is padded with zero matrices.
pub fn edit_distance_sum(
    g: &DynamicMultigraph,
    h: &DynamicMultigraph,
    day_length: f64,
) -> Result<f64> {
    if g.node_count() != h.node_count() {
        return Err(Error::Data(format!(
            "node correspondence required: {} vs {} nodes",
            g.node_count(),
            h.node_count()
        )));
    }
    g.daily_tensor(day_length)?.l1_distance(&h.daily_tensor(day_length)?)
}

/// A set of synthetic datasets sharing the reference's node universe.
#[derive(Debug, Clone)]
pub struct Ensemble {
    members: Vec<DynamicMultigraph>,
    day_length: f64,
}

impl Ensemble {
    pub fn new(members: Vec<DynamicMultigraph>, day_length: f64) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Data("an ensemble needs at least one member".to_string()));
        }
        if !day_length.is_finite() || day_length <= 0.0 {
            return Err(Error::Data(format!("day length must be > 0, got {day_length}")));
        }
        let n = members[0].node_count();
        if members.iter().any(|m| m.node_count() != n) {
            return Err(Error::Data("ensemble members disagree on node count".to_string()));
        }
        Ok(Self {
            members,
            day_length,
        })
    }

    pub fn members(&self) -> &[DynamicMultigraph] {
        &self.members
    }

    pub fn day_length(&self) -> f64 {
        self.day_length
    }

    pub fn node_count(&self) -> usize {
        self.members[0].node_count()
    }
}

/// Sphere metrics of one ensemble against a reference. Diversity and radius
/// need at least two members; bias, variability and the error are undefined
/// (None) when the radius vanishes — a collapsed ensemble, not a perfect one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    #[serde(rename = "A")]
    pub accuracy: f64,
    #[serde(rename = "D")]
    pub diversity: Option<f64>,
    #[serde(rename = "R")]
    pub radius: Option<f64>,
    pub bias: Option<f64>,
    pub variability: Option<f64>,
    #[serde(rename = "E")]
    pub error: Option<f64>,
    /// Per-member distances to the reference.
    pub members: Vec<f64>,
}

/// Computes accuracy as the distance from the reference to the entrywise
/// member mean, diversity as the (n-1) standard deviation of member
/// distances, and the radius as the root mean square member distance.
pub fn evaluate_ensemble(reference: &DynamicMultigraph, ensemble: &Ensemble) -> Result<EnsembleReport> {
    if reference.node_count() != ensemble.node_count() {
        return Err(Error::Data(format!(
            "node correspondence required: reference has {} nodes, ensemble {}",
            reference.node_count(),
            ensemble.node_count()
        )));
    }
    let day_length = ensemble.day_length();
    let ref_tensor = reference.daily_tensor(day_length)?;
    let member_tensors: Vec<DailyTensor> = ensemble
        .members()
        .iter()
        .map(|m| m.daily_tensor(day_length))
        .collect::<Result<_>>()?;
    let distances: Vec<f64> = member_tensors
        .iter()
        .map(|t| ref_tensor.l1_distance(t))
        .collect::<Result<_>>()?;
    let mean_tensor = DailyTensor::mean_of(&member_tensors)?;
    let accuracy = ref_tensor.l1_distance(&mean_tensor)?;

    let n = distances.len();
    let (diversity, radius) = if n >= 2 {
        let mean_d = distances.iter().sum::<f64>() / n as f64;
        let var = distances.iter().map(|d| (d - mean_d).powi(2)).sum::<f64>() / (n - 1) as f64;
        let r2 = distances.iter().map(|d| d * d).sum::<f64>() / (n - 1) as f64;
        (Some(var.sqrt()), Some(r2.sqrt()))
    } else {
        (None, None)
    };
    let (bias, variability, error) = match (diversity, radius) {
        (Some(d), Some(r)) if r > 0.0 => {
            let bias = accuracy / r;
            let variability = d / r;
            (Some(bias), Some(variability), Some(bias * bias + variability))
        }
        _ => (None, None, None),
    };
    Ok(EnsembleReport {
        accuracy,
        diversity,
        radius,
        bias,
        variability,
        error,
        members: distances,
    })
}

/// Secondary structural measures of a synthetic static graph against the
/// reference's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralReport {
    pub degree_similarity: f64,
    pub avg_path_length: f64,
    pub effective_diameter: f64,
    pub distinct_edges: usize,
    pub density: f64,
    pub clustering: f64,
}

pub fn structural_report(g: &StaticGraph, reference: &StaticGraph) -> Result<StructuralReport> {
    if g.node_count() != reference.node_count() {
        return Err(Error::Data(format!(
            "node correspondence required: {} vs {} nodes",
            g.node_count(),
            reference.node_count()
        )));
    }
    let (avg_path_length, effective_diameter) = path_measures(g);
    let n = g.node_count() as f64;
    Ok(StructuralReport {
        degree_similarity: degree_similarity(g, reference),
        avg_path_length,
        effective_diameter,
        distinct_edges: g.edge_count(),
        density: g.edge_count() as f64 / (n * n),
        clustering: mean_local_clustering(g),
    })
}

/// Cosine similarity of the two descending-sorted total-degree sequences;
/// equals 1 at self-comparison and lives in [0, 1] for nonnegative degrees.
pub fn degree_similarity(g: &StaticGraph, reference: &StaticGraph) -> f64 {
    let mut a: Vec<f64> = g.total_degrees().iter().map(|&d| d as f64).collect();
    let mut b: Vec<f64> = reference.total_degrees().iter().map(|&d| d as f64).collect();
    a.sort_unstable_by(|x, y| y.partial_cmp(x).unwrap());
    b.sort_unstable_by(|x, y| y.partial_cmp(x).unwrap());
    let len = a.len().max(b.len());
    a.resize(len, 0.0);
    b.resize(len, 0.0);
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let na2: f64 = a.iter().map(|x| x * x).sum();
    let nb2: f64 = b.iter().map(|x| x * x).sum();
    if na2 == 0.0 && nb2 == 0.0 {
        1.0
    } else if na2 == 0.0 || nb2 == 0.0 {
        0.0
    } else {
        // integer-valued degree sums keep self-comparison exactly 1
        (dot / (na2 * nb2).sqrt()).min(1.0)
    }
}

/// Mean shortest-path length over reachable pairs and the 90th-percentile
/// path length (linear interpolation), both on the undirected simple view.
/// Zero-edge graphs report 0 for both by convention.
fn path_measures(g: &StaticGraph) -> (f64, f64) {
    let adj = g.undirected_adjacency();
    let n = adj.len();
    let mut distances: Vec<f64> = Vec::new();
    let mut dist = vec![u32::MAX; n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        dist.iter_mut().for_each(|d| *d = u32::MAX);
        queue.clear();
        dist[s] = 0;
        queue.push_back(s as u32);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v as usize] {
                if dist[w as usize] == u32::MAX {
                    dist[w as usize] = dist[v as usize] + 1;
                    queue.push_back(w);
                }
            }
        }
        for &d in dist.iter().skip(s + 1) {
            if d != u32::MAX {
                distances.push(d as f64);
            }
        }
    }
    if distances.is_empty() {
        return (0.0, 0.0);
    }
    distances.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let avg = distances.iter().sum::<f64>() / distances.len() as f64;
    (avg, percentile_interpolated(&distances, 0.9))
}

/// Linear-interpolated percentile of a sorted slice.
pub fn percentile_interpolated(sorted: &[f64], q: f64) -> f64 {
    let rank = q * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (rank - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Mean local clustering coefficient on the undirected simple view; nodes of
/// degree < 2 contribute 0 and every node is averaged.
fn mean_local_clustering(g: &StaticGraph) -> f64 {
    let adj = g.undirected_adjacency();
    let n = adj.len();
    if n == 0 {
        return 0.0;
    }
    let sets: Vec<std::collections::BTreeSet<u32>> = adj
        .iter()
        .map(|nb| nb.iter().copied().collect())
        .collect();
    let mut total = 0.0;
    for nbrs in &adj {
        let k = nbrs.len();
        if k < 2 {
            continue;
        }
        let mut links = 0usize;
        for i in 0..k {
            for j in (i + 1)..k {
                if sets[nbrs[i] as usize].contains(&nbrs[j]) {
                    links += 1;
                }
            }
        }
        total += 2.0 * links as f64 / (k * (k - 1)) as f64;
    }
    total / n as f64
}

/// Empirical CDF as sorted (value, cumulative fraction) jump points; the
/// final fraction is 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfTable {
    pub points: Vec<(f64, f64)>,
}

impl CdfTable {
    pub fn from_values(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        let n = sorted.len() as f64;
        let mut points: Vec<(f64, f64)> = Vec::new();
        for (i, &v) in sorted.iter().enumerate() {
            let frac = (i + 1) as f64 / n;
            match points.last_mut() {
                Some(last) if last.0 == v => last.1 = frac,
                _ => points.push((v, frac)),
            }
        }
        Self { points }
    }

    /// Right-continuous step evaluation: fraction of mass at values <= x.
    pub fn eval(&self, x: f64) -> f64 {
        let mut frac = 0.0;
        for &(v, f) in &self.points {
            if v <= x {
                frac = f;
            } else {
                break;
            }
        }
        frac
    }
}

/// Kolmogorov-Smirnov distance between two CDF tables: the largest vertical
/// gap over the union of jump points, by a single merge walk.
pub fn ks_distance(a: &CdfTable, b: &CdfTable) -> f64 {
    let (mut ia, mut ib) = (0usize, 0usize);
    let (mut fa, mut fb) = (0.0f64, 0.0f64);
    let mut worst = 0.0f64;
    while ia < a.points.len() || ib < b.points.len() {
        let va = a.points.get(ia).map(|p| p.0);
        let vb = b.points.get(ib).map(|p| p.0);
        match (va, vb) {
            (Some(x), Some(y)) if x == y => {
                fa = a.points[ia].1;
                fb = b.points[ib].1;
                ia += 1;
                ib += 1;
            }
            (Some(x), Some(y)) if x < y => {
                fa = a.points[ia].1;
                ia += 1;
            }
            (Some(_), Some(_)) | (None, Some(_)) => {
                fb = b.points[ib].1;
                ib += 1;
            }
            (Some(_), None) => {
                fa = a.points[ia].1;
                ia += 1;
            }
            (None, None) => break,
        }
        worst = worst.max((fa - fb).abs());
    }
    worst
}

/// Per-feature CDF tables of a dataset. Port-protocol labels map to integer
/// indices, ordered by the supplied category order (typically the
/// reference's frequency order) with unseen labels appended by their own
/// frequency; without an order, the dataset's own frequency order is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCdfs {
    pub start_time: CdfTable,
    pub duration: CdfTable,
    pub port_protocol: CdfTable,
    pub category_order: Vec<String>,
}

pub fn feature_cdfs(
    g: &DynamicMultigraph,
    category_order: Option<&[String]>,
) -> Result<FeatureCdfs> {
    if g.flow_count() == 0 {
        return Err(Error::Data("cannot build CDF tables for an empty dataset".to_string()));
    }
    let starts: Vec<f64> = g.flows().iter().map(|f| f.start_time).collect();
    let durations: Vec<f64> = g.flows().iter().map(|f| f.duration).collect();

    let mut counts: std::collections::BTreeMap<&str, usize> = std::collections::BTreeMap::new();
    for f in g.flows() {
        *counts.entry(f.port_protocol.as_str()).or_insert(0) += 1;
    }
    let mut order: Vec<String> = match category_order {
        Some(o) => o.to_vec(),
        None => Vec::new(),
    };
    let mut rest: Vec<(&str, usize)> = counts
        .iter()
        .filter(|(label, _)| !order.iter().any(|o| o == *label))
        .map(|(&l, &c)| (l, c))
        .collect();
    // frequency-descending, label-ascending for ties (counts map is sorted)
    rest.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    order.extend(rest.into_iter().map(|(l, _)| l.to_string()));

    let index_of = |label: &str| -> f64 {
        order.iter().position(|o| o == label).unwrap() as f64
    };
    let cat_values: Vec<f64> = g.flows().iter().map(|f| index_of(&f.port_protocol)).collect();
    Ok(FeatureCdfs {
        start_time: CdfTable::from_values(&starts),
        duration: CdfTable::from_values(&durations),
        port_protocol: CdfTable::from_values(&cat_values),
        category_order: order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NetflowRecord;

    fn flow(src: u32, dst: u32, start: f64, dur: f64) -> NetflowRecord {
        NetflowRecord {
            src,
            dst,
            start_time: start,
            duration: dur,
            port_protocol: "x".to_string(),
        }
    }

    fn graph(n: usize, flows: Vec<NetflowRecord>) -> DynamicMultigraph {
        let ip_map = (0..n).map(|i| i.to_string()).collect();
        DynamicMultigraph::new(n, flows, ip_map, 0.0).unwrap()
    }

    #[test]
    fn edit_distance_of_identical_graphs_is_zero() {
        let g = graph(3, vec![flow(0, 1, 0.0, 1.0), flow(1, 2, 50.0, 2.0)]);
        assert_eq!(edit_distance_sum(&g, &g, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn one_extra_flow_costs_one() {
        let g = graph(3, vec![flow(0, 1, 5.0, 1.0)]);
        let mut flows = g.flows().to_vec();
        flows.push(flow(2, 1, 25.0, 1.0)); // lands on day 2 with day_length 10
        let h = graph(3, flows);
        assert_eq!(edit_distance_sum(&g, &h, 10.0).unwrap(), 1.0);
    }

    #[test]
    fn edit_distance_requires_node_correspondence() {
        let g = graph(3, vec![flow(0, 1, 0.0, 1.0)]);
        let h = graph(4, vec![flow(0, 1, 0.0, 1.0)]);
        assert!(edit_distance_sum(&g, &h, 10.0).is_err());
    }

    #[test]
    fn edit_distance_matches_brute_force_on_random_fixtures() {
        // 3 nodes, 4 days, pseudo-random flows via a tiny LCG
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as f64 / (1u64 << 31) as f64
        };
        for _ in 0..20 {
            let mk = |next: &mut dyn FnMut() -> f64| {
                let m = 3 + (next() * 10.0) as usize;
                let flows = (0..m)
                    .map(|_| {
                        flow(
                            (next() * 3.0) as u32,
                            (next() * 3.0) as u32,
                            next() * 40.0,
                            next() * 15.0,
                        )
                    })
                    .collect();
                graph(3, flows)
            };
            let g = mk(&mut next);
            let h = mk(&mut next);
            let day = 10.0;
            let fast = edit_distance_sum(&g, &h, day).unwrap();
            // brute force over the dense 3x3xT array
            let tg = g.daily_tensor(day).unwrap();
            let th = h.daily_tensor(day).unwrap();
            let days = tg.day_count().max(th.day_count());
            let mut slow = 0.0;
            for t in 0..days {
                for i in 0..3u32 {
                    for j in 0..3u32 {
                        let a = tg.day(t).and_then(|d| d.get(&(i, j))).copied().unwrap_or(0.0);
                        let b = th.day(t).and_then(|d| d.get(&(i, j))).copied().unwrap_or(0.0);
                        slow += (a - b).abs();
                    }
                }
            }
            assert_eq!(fast, slow);
        }
    }

    #[test]
    fn collapsed_ensemble_flags_undefined_ratios() {
        let r = graph(2, vec![flow(0, 1, 0.0, 1.0)]);
        let ens = Ensemble::new(vec![r.clone(), r.clone()], 10.0).unwrap();
        let report = evaluate_ensemble(&r, &ens).unwrap();
        assert_eq!(report.accuracy, 0.0);
        assert_eq!(report.diversity, Some(0.0));
        assert_eq!(report.radius, Some(0.0));
        assert_eq!(report.bias, None);
        assert_eq!(report.variability, None);
        assert_eq!(report.error, None);
    }

    #[test]
    fn two_member_report_matches_direct_formulas() {
        // distances 3 and 5, member-mean distance 2
        let day = 10.0;
        let reference = graph(2, vec![flow(0, 1, 15.0, 1.0), flow(0, 1, 15.0, 1.0)]);
        // member 1: (0,0) x1, (0,1) x4 on day 1 -> |1-0| + |4-2| = 3
        let m1 = graph(
            2,
            vec![
                flow(0, 0, 15.0, 1.0),
                flow(0, 1, 15.0, 1.0),
                flow(0, 1, 15.0, 1.0),
                flow(0, 1, 15.0, 1.0),
                flow(0, 1, 15.0, 1.0),
            ],
        );
        // member 2: (0,0) x3 -> |3-0| + |0-2| = 5
        let m2 = graph(
            2,
            vec![flow(0, 0, 15.0, 1.0), flow(0, 0, 15.0, 1.0), flow(0, 0, 15.0, 1.0)],
        );
        let ens = Ensemble::new(vec![m1, m2], day).unwrap();
        let report = evaluate_ensemble(&reference, &ens).unwrap();
        assert_eq!(report.members, vec![3.0, 5.0]);
        // mean tensor: (0,0) -> 2, (0,1) -> 2; ref: (0,1) -> 2
        assert_eq!(report.accuracy, 2.0);
        assert!((report.diversity.unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert!((report.radius.unwrap() - 34f64.sqrt()).abs() < 1e-12);
        let b = report.bias.unwrap();
        let v = report.variability.unwrap();
        assert_eq!(report.error.unwrap(), b * b + v);
    }

    #[test]
    fn singleton_accuracy_is_plain_distance() {
        let r = graph(2, vec![flow(0, 1, 0.0, 1.0)]);
        let m = graph(2, vec![flow(0, 1, 0.0, 1.0), flow(1, 0, 0.0, 1.0)]);
        let ens = Ensemble::new(vec![m.clone()], 10.0).unwrap();
        let report = evaluate_ensemble(&r, &ens).unwrap();
        assert_eq!(report.accuracy, edit_distance_sum(&r, &m, 10.0).unwrap());
        assert_eq!(report.diversity, None);
        assert_eq!(report.radius, None);
    }

    #[test]
    fn triangle_graph_structural_measures() {
        let tri = StaticGraph::new(3, true, vec![(0, 1), (1, 2), (2, 0)]).unwrap();
        let report = structural_report(&tri, &tri).unwrap();
        assert_eq!(report.clustering, 1.0);
        assert_eq!(report.avg_path_length, 1.0);
        assert_eq!(report.degree_similarity, 1.0);
        assert_eq!(report.distinct_edges, 3);
    }

    #[test]
    fn five_node_path_effective_diameter() {
        let path = StaticGraph::new(5, true, vec![(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap();
        let report = structural_report(&path, &path).unwrap();
        // pair distances {1,1,1,1,2,2,2,3,3,4}: rank 0.9*9 = 8.1 -> 3 + 0.1
        let mut dists = vec![1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 3.0, 3.0, 4.0];
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected = percentile_interpolated(&dists, 0.9);
        assert!((report.effective_diameter - expected).abs() < 1e-12);
        assert!((report.effective_diameter - 3.1).abs() < 1e-12);
        assert!((report.avg_path_length - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_edge_graph_reports_zero_paths() {
        let empty = StaticGraph::new(4, true, vec![]).unwrap();
        let report = structural_report(&empty, &empty).unwrap();
        assert_eq!(report.avg_path_length, 0.0);
        assert_eq!(report.effective_diameter, 0.0);
        assert_eq!(report.degree_similarity, 1.0);
        assert_eq!(report.clustering, 0.0);
    }

    #[test]
    fn single_flow_cdf_jumps_to_one() {
        let g = graph(2, vec![flow(0, 1, 7.0, 3.0)]);
        let cdfs = feature_cdfs(&g, None).unwrap();
        assert_eq!(cdfs.duration.points, vec![(3.0, 1.0)]);
        assert_eq!(cdfs.start_time.points, vec![(7.0, 1.0)]);
    }

    #[test]
    fn repeated_values_accumulate_fractions() {
        let vals = CdfTable::from_values(&[1.0, 1.0, 3.0]);
        assert_eq!(vals.points, vec![(1.0, 2.0 / 3.0), (3.0, 1.0)]);
        assert_eq!(vals.eval(1.0), 2.0 / 3.0);
        assert_eq!(vals.eval(2.9), 2.0 / 3.0);
        assert_eq!(vals.eval(3.0), 1.0);
        assert_eq!(vals.eval(0.0), 0.0);
    }

    #[test]
    fn ks_distance_matches_direct_two_sample_oracle() {
        let a = [0.42, 0.24, 0.86, 0.85, 0.82, 0.82, 0.25, 0.78, 0.13, 0.27];
        let b = [0.24, 0.27, 0.87, 0.29, 0.57, 0.44, 0.5, 0.0, 0.56, 0.03];
        let ta = CdfTable::from_values(&a);
        let tb = CdfTable::from_values(&b);
        let ks = ks_distance(&ta, &tb);
        // direct oracle: scan all sample points
        let mut all: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
        all.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let ecdf = |xs: &[f64], x: f64| xs.iter().filter(|&&v| v <= x).count() as f64 / xs.len() as f64;
        let direct = all
            .iter()
            .map(|&x| (ecdf(&a, x) - ecdf(&b, x)).abs())
            .fold(0.0, f64::max);
        assert!((ks - direct).abs() <= 1e-9);
        assert!((ks - 0.4).abs() <= 1e-9);
    }

    #[test]
    fn category_order_prefers_reference_frequencies() {
        let mut flows = vec![];
        for _ in 0..3 {
            flows.push(NetflowRecord {
                src: 0,
                dst: 1,
                start_time: 0.0,
                duration: 1.0,
                port_protocol: "53/udp".to_string(),
            });
        }
        flows.push(NetflowRecord {
            src: 0,
            dst: 1,
            start_time: 0.0,
            duration: 1.0,
            port_protocol: "443/tcp".to_string(),
        });
        let g = graph(2, flows);
        let own = feature_cdfs(&g, None).unwrap();
        assert_eq!(own.category_order, vec!["53/udp".to_string(), "443/tcp".to_string()]);
        let forced = vec!["443/tcp".to_string()];
        let with_ref = feature_cdfs(&g, Some(&forced)).unwrap();
        assert_eq!(
            with_ref.category_order,
            vec!["443/tcp".to_string(), "53/udp".to_string()]
        );
    }
}
