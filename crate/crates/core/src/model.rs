//! Netflow data model: timed multi-edges over IP nodes, reduction to a
//! static simple graph, and the per-day flow-count tensor used by the
//! ensemble metrics.
//!
//! Node ids are dense integers assigned at ingestion; original IP strings
//! survive only in the id map. All types are immutable after construction.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One flow 5-tuple row. The end time is stored as a duration, so
/// `end >= start` holds by construction (`duration >= 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetflowRecord {
    pub src: u32,
    pub dst: u32,
    /// Seconds since the dataset epoch; non-negative.
    pub start_time: f64,
    /// Seconds; non-negative.
    pub duration: f64,
    /// Categorical key, e.g. `"443/tcp"`.
    pub port_protocol: String,
}

impl NetflowRecord {
    pub fn end_time(&self) -> f64 {
        self.start_time + self.duration
    }
}

/// The full reference or synthetic dataset: N nodes, M timed multi-edges.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicMultigraph {
    node_count: usize,
    flows: Vec<NetflowRecord>,
    /// node id -> original identifier (IP string for ingested data,
    /// synthetic labels otherwise).
    ip_map: Vec<String>,
    /// Absolute timestamp of dataset time zero.
    epoch: f64,
}

impl DynamicMultigraph {
    pub fn new(
        node_count: usize,
        flows: Vec<NetflowRecord>,
        ip_map: Vec<String>,
        epoch: f64,
    ) -> Result<Self> {
        if ip_map.len() != node_count {
            return Err(Error::Data(format!(
                "ip map has {} entries for {} nodes",
                ip_map.len(),
                node_count
            )));
        }
        for (i, f) in flows.iter().enumerate() {
            if f.src as usize >= node_count || f.dst as usize >= node_count {
                return Err(Error::Data(format!(
                    "flow {i} references node outside [0, {node_count})"
                )));
            }
            if f.duration < 0.0 || f.start_time < 0.0 {
                return Err(Error::Data(format!("flow {i} has a negative time field")));
            }
        }
        Ok(Self {
            node_count,
            flows,
            ip_map,
            epoch,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn flow_count(&self) -> usize {
        self.flows.len()
    }

    pub fn flows(&self) -> &[NetflowRecord] {
        &self.flows
    }

    pub fn ip_map(&self) -> &[String] {
        &self.ip_map
    }

    pub fn epoch(&self) -> f64 {
        self.epoch
    }

    /// Distinct (src, dst) pairs over all flows. With `directed = false`
    /// the pair is stored with the smaller id first.
    pub fn to_static(&self, directed: bool) -> StaticGraph {
        let mut set = BTreeSet::new();
        for f in &self.flows {
            let pair = if directed || f.src <= f.dst {
                (f.src, f.dst)
            } else {
                (f.dst, f.src)
            };
            set.insert(pair);
        }
        StaticGraph {
            node_count: self.node_count,
            directed,
            edges: set.into_iter().collect(),
        }
    }

    /// Per-day N x N flow-count matrices. Entry (i, j) of day t counts the
    /// flows from i to j active during `[t*day_length, (t+1)*day_length)`.
    /// A flow is active on every day block its `[start, end)` interval
    /// overlaps; zero-duration flows count on the single day containing
    /// their start instant.
    pub fn daily_tensor(&self, day_length: f64) -> Result<DailyTensor> {
        if !day_length.is_finite() || day_length <= 0.0 {
            return Err(Error::Data(format!("day length must be > 0, got {day_length}")));
        }
        let mut spans = Vec::with_capacity(self.flows.len());
        let mut max_day = None::<usize>;
        for f in &self.flows {
            let first = (f.start_time / day_length).floor() as usize;
            let last = if f.duration == 0.0 {
                first
            } else {
                let q = f.end_time() / day_length;
                let fl = q.floor();
                // [start, end) excludes an end sitting exactly on a boundary
                let last = if q == fl { fl as usize - 1 } else { fl as usize };
                last.max(first)
            };
            spans.push((first, last));
            max_day = Some(max_day.map_or(last, |m: usize| m.max(last)));
        }
        let day_count = max_day.map_or(0, |m| m + 1);
        let mut days: Vec<BTreeMap<(u32, u32), f64>> = vec![BTreeMap::new(); day_count];
        for (f, (first, last)) in self.flows.iter().zip(&spans) {
            for day in days.iter_mut().take(last + 1).skip(*first) {
                *day.entry((f.src, f.dst)).or_insert(0.0) += 1.0;
            }
        }
        Ok(DailyTensor {
            node_count: self.node_count,
            day_length,
            days,
        })
    }

    /// Writes the fixed-order pipeline dialect:
    /// `src,dst,start_time,duration,port_protocol`, node ids as integers.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["src", "dst", "start_time", "duration", "port_protocol"])?;
        for f in &self.flows {
            w.write_record([
                f.src.to_string(),
                f.dst.to_string(),
                f.start_time.to_string(),
                f.duration.to_string(),
                f.port_protocol.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reads the pipeline dialect written by [`write_csv`](Self::write_csv).
    /// Node ids are preserved literally (no remapping, no time rebasing), so
    /// node correspondence with the generating reference survives the round
    /// trip. `node_count` defaults to `max id + 1`.
    pub fn read_csv<R: Read>(reader: R, node_count: Option<usize>, epoch: f64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let expected = ["src", "dst", "start_time", "duration", "port_protocol"];
        let mut idx = [0usize; 5];
        for (slot, name) in idx.iter_mut().zip(expected) {
            *slot = headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Schema(name.to_string()))?;
        }
        let mut flows = Vec::new();
        let mut max_id = None::<u32>;
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let field = |i: usize| -> Result<&str> {
                rec.get(idx[i])
                    .ok_or_else(|| Error::Data(format!("row {line}: short record")))
            };
            let src: u32 = field(0)?
                .parse()
                .map_err(|_| Error::Data(format!("row {line}: bad src id")))?;
            let dst: u32 = field(1)?
                .parse()
                .map_err(|_| Error::Data(format!("row {line}: bad dst id")))?;
            let start_time: f64 = field(2)?
                .parse()
                .map_err(|_| Error::Data(format!("row {line}: bad start_time")))?;
            let duration: f64 = field(3)?
                .parse()
                .map_err(|_| Error::Data(format!("row {line}: bad duration")))?;
            let port_protocol = field(4)?.to_string();
            max_id = Some(max_id.map_or(src.max(dst), |m| m.max(src).max(dst)));
            flows.push(NetflowRecord {
                src,
                dst,
                start_time,
                duration,
                port_protocol,
            });
        }
        let inferred = max_id.map_or(0, |m| m as usize + 1);
        let n = node_count.unwrap_or(inferred);
        if n < inferred {
            return Err(Error::Data(format!(
                "node_count {n} is below the highest referenced id ({})",
                inferred - 1
            )));
        }
        let ip_map = (0..n).map(|i| i.to_string()).collect();
        Self::new(n, flows, ip_map, epoch)
    }

    pub fn read_csv_file(path: &Path, node_count: Option<usize>, epoch: f64) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file), node_count, epoch)
    }
}

/// Column-name mapping for ingesting foreign netflow CSVs. Exactly one of
/// `end` / `duration` must resolve, and either the combined `port_protocol`
/// column or the `port` + `protocol` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub src: String,
    pub dst: String,
    pub start: String,
    pub end: Option<String>,
    pub duration: Option<String>,
    pub port: Option<String>,
    pub protocol: Option<String>,
    pub port_protocol: Option<String>,
}

impl Default for CsvSchema {
    /// The pipeline's own serialization dialect.
    fn default() -> Self {
        Self {
            src: "src".into(),
            dst: "dst".into(),
            start: "start_time".into(),
            end: None,
            duration: Some("duration".into()),
            port: None,
            protocol: None,
            port_protocol: Some("port_protocol".into()),
        }
    }
}

/// Ingestion side effects worth surfacing to the caller.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    /// Rows dropped because their duration (or `end - start`) was negative.
    pub rejected_rows: usize,
}

/// Ingests a foreign netflow CSV: node ids are assigned in first-appearance
/// order, start times are rebased so the earliest accepted flow starts at 0
/// (the offset is kept as the epoch), and port + protocol are concatenated
/// into one categorical key.
pub fn ingest_csv(path: &Path, schema: &CsvSchema) -> Result<(DynamicMultigraph, IngestReport)> {
    let file = std::fs::File::open(path)?;
    ingest_csv_reader(std::io::BufReader::new(file), schema)
}

pub fn ingest_csv_reader<R: Read>(
    reader: R,
    schema: &CsvSchema,
) -> Result<(DynamicMultigraph, IngestReport)> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(name.to_string()))
    };
    let src_i = col(&schema.src)?;
    let dst_i = col(&schema.dst)?;
    let start_i = col(&schema.start)?;
    let time_spec = match (&schema.end, &schema.duration) {
        (_, Some(d)) => TimeSpec::Duration(col(d)?),
        (Some(e), None) => TimeSpec::End(col(e)?),
        (None, None) => return Err(Error::Schema("end-or-duration".to_string())),
    };
    let pp_spec = match (&schema.port_protocol, &schema.port, &schema.protocol) {
        (Some(pp), _, _) => PortSpec::Combined(col(pp)?),
        (None, Some(p), Some(pr)) => PortSpec::Split(col(p)?, col(pr)?),
        _ => return Err(Error::Schema("port/protocol".to_string())),
    };

    let mut ids: HashMap<String, u32> = HashMap::new();
    let mut ip_map: Vec<String> = Vec::new();
    let mut intern = |key: &str, ip_map: &mut Vec<String>| -> u32 {
        if let Some(&id) = ids.get(key) {
            id
        } else {
            let id = ip_map.len() as u32;
            ids.insert(key.to_string(), id);
            ip_map.push(key.to_string());
            id
        }
    };

    let mut flows = Vec::new();
    let mut rejected = 0usize;
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| -> Result<&str> {
            rec.get(i)
                .map(str::trim)
                .ok_or_else(|| Error::Data(format!("row {line}: short record")))
        };
        let start: f64 = field(start_i)?
            .parse()
            .map_err(|_| Error::Data(format!("row {line}: bad start timestamp")))?;
        let duration = match time_spec {
            TimeSpec::Duration(i) => field(i)?
                .parse::<f64>()
                .map_err(|_| Error::Data(format!("row {line}: bad duration")))?,
            TimeSpec::End(i) => {
                let end: f64 = field(i)?
                    .parse()
                    .map_err(|_| Error::Data(format!("row {line}: bad end timestamp")))?;
                end - start
            }
        };
        if duration < 0.0 {
            rejected += 1;
            continue;
        }
        let port_protocol = match pp_spec {
            PortSpec::Combined(i) => field(i)?.to_string(),
            PortSpec::Split(p, pr) => format!("{}/{}", field(p)?, field(pr)?),
        };
        let src = intern(field(src_i)?, &mut ip_map);
        let dst = intern(field(dst_i)?, &mut ip_map);
        flows.push(NetflowRecord {
            src,
            dst,
            start_time: start,
            duration,
            port_protocol,
        });
    }
    if flows.is_empty() {
        return Err(Error::Data("no usable flow rows in input".to_string()));
    }
    let epoch = flows
        .iter()
        .map(|f| f.start_time)
        .fold(f64::INFINITY, f64::min);
    for f in &mut flows {
        f.start_time -= epoch;
    }
    let g = DynamicMultigraph::new(ip_map.len(), flows, ip_map, epoch)?;
    Ok((g, IngestReport { rejected_rows: rejected }))
}

enum TimeSpec {
    End(usize),
    Duration(usize),
}

enum PortSpec {
    Combined(usize),
    Split(usize, usize),
}

/// Static simple graph: deduplicated node pairs, optionally undirected.
/// Self-loops are allowed; edges are kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaticGraph {
    node_count: usize,
    directed: bool,
    edges: Vec<(u32, u32)>,
}

impl StaticGraph {
    pub fn new(node_count: usize, directed: bool, mut edges: Vec<(u32, u32)>) -> Result<Self> {
        if !directed {
            for e in &mut edges {
                if e.0 > e.1 {
                    *e = (e.1, e.0);
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();
        if let Some(&(u, v)) = edges.iter().find(|&&(u, v)| {
            u as usize >= node_count || v as usize >= node_count
        }) {
            return Err(Error::Data(format!(
                "edge ({u}, {v}) outside node range [0, {node_count})"
            )));
        }
        Ok(Self {
            node_count,
            directed,
            edges,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn contains(&self, u: u32, v: u32) -> bool {
        let key = if !self.directed && u > v { (v, u) } else { (u, v) };
        self.edges.binary_search(&key).is_ok()
    }

    /// Total degree per node: in + out for directed graphs (a self-loop
    /// contributes twice), plain incidence count for undirected ones.
    pub fn total_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.node_count];
        for &(u, v) in &self.edges {
            deg[u as usize] += 1;
            deg[v as usize] += 1;
        }
        deg
    }

    /// Undirected simple view used by the path and centrality measures:
    /// direction collapsed, self-loops dropped, pairs deduplicated.
    pub fn undirected_simple_edges(&self) -> Vec<(u32, u32)> {
        let mut set = BTreeSet::new();
        for &(u, v) in &self.edges {
            if u != v {
                set.insert((u.min(v), u.max(v)));
            }
        }
        set.into_iter().collect()
    }

    /// Adjacency lists of the undirected simple view.
    pub fn undirected_adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for (u, v) in self.undirected_simple_edges() {
            adj[u as usize].push(v);
            adj[v as usize].push(u);
        }
        adj
    }
}

/// Ordered list of per-day sparse flow-count matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyTensor {
    node_count: usize,
    day_length: f64,
    days: Vec<BTreeMap<(u32, u32), f64>>,
}

impl DailyTensor {
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn day_length(&self) -> f64 {
        self.day_length
    }

    pub fn day_count(&self) -> usize {
        self.days.len()
    }

    pub fn day(&self, t: usize) -> Option<&BTreeMap<(u32, u32), f64>> {
        self.days.get(t)
    }

    pub fn total(&self) -> f64 {
        self.days.iter().flat_map(|d| d.values()).sum()
    }

    /// Sum over days of the entrywise L1 difference; the shorter tensor is
    /// padded with zero matrices.
    pub fn l1_distance(&self, other: &DailyTensor) -> Result<f64> {
        if self.node_count != other.node_count {
            return Err(Error::Data(format!(
                "node correspondence required: {} vs {} nodes",
                self.node_count, other.node_count
            )));
        }
        let empty = BTreeMap::new();
        let days = self.days.len().max(other.days.len());
        let mut sum = 0.0;
        for t in 0..days {
            let a = self.days.get(t).unwrap_or(&empty);
            let b = other.days.get(t).unwrap_or(&empty);
            for (key, &va) in a {
                sum += (va - b.get(key).copied().unwrap_or(0.0)).abs();
            }
            for (key, &vb) in b {
                if !a.contains_key(key) {
                    sum += vb.abs();
                }
            }
        }
        Ok(sum)
    }

    /// Entrywise mean of a nonempty slice of tensors (padded to the longest).
    pub fn mean_of(tensors: &[DailyTensor]) -> Result<DailyTensor> {
        let first = tensors
            .first()
            .ok_or_else(|| Error::Data("mean of an empty tensor set".to_string()))?;
        let n = first.node_count;
        if tensors.iter().any(|t| t.node_count != n) {
            return Err(Error::Data("tensor node counts differ".to_string()));
        }
        let days = tensors.iter().map(|t| t.days.len()).max().unwrap_or(0);
        let scale = 1.0 / tensors.len() as f64;
        let mut out: Vec<BTreeMap<(u32, u32), f64>> = vec![BTreeMap::new(); days];
        for t in tensors {
            for (day, acc) in t.days.iter().zip(out.iter_mut()) {
                for (key, v) in day {
                    *acc.entry(*key).or_insert(0.0) += v;
                }
            }
        }
        for day in &mut out {
            for v in day.values_mut() {
                *v *= scale;
            }
        }
        Ok(DailyTensor {
            node_count: n,
            day_length: first.day_length,
            days: out,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flow(src: u32, dst: u32, start: f64, dur: f64, pp: &str) -> NetflowRecord {
        NetflowRecord {
            src,
            dst,
            start_time: start,
            duration: dur,
            port_protocol: pp.to_string(),
        }
    }

    fn graph(node_count: usize, flows: Vec<NetflowRecord>) -> DynamicMultigraph {
        let ip_map = (0..node_count).map(|i| i.to_string()).collect();
        DynamicMultigraph::new(node_count, flows, ip_map, 0.0).unwrap()
    }

    #[test]
    fn ingest_counts_nodes_and_flows() {
        let csv = "\
source,target,ts,dur,port,proto
10.0.0.1,10.0.0.2,100,1,443,tcp
10.0.0.2,10.0.0.1,101,2,53,udp
10.0.0.1,10.0.0.2,102,0,443,tcp
";
        let schema = CsvSchema {
            src: "source".into(),
            dst: "target".into(),
            start: "ts".into(),
            duration: Some("dur".into()),
            port: Some("port".into()),
            protocol: Some("proto".into()),
            port_protocol: None,
            end: None,
        };
        let (g, report) = ingest_csv_reader(csv.as_bytes(), &schema).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.flow_count(), 3);
        assert_eq!(report.rejected_rows, 0);
        assert_eq!(g.flows()[0].port_protocol, "443/tcp");
        assert_eq!(g.epoch(), 100.0);
        assert_eq!(g.flows()[0].start_time, 0.0);
        assert_eq!(g.ip_map()[0], "10.0.0.1");
    }

    #[test]
    fn ingest_rejects_negative_duration_rows() {
        let csv = "\
src,dst,start_time,end,port_protocol
a,b,10,5,443/tcp
a,b,10,12,443/tcp
";
        let schema = CsvSchema {
            end: Some("end".into()),
            duration: None,
            ..CsvSchema::default()
        };
        let (g, report) = ingest_csv_reader(csv.as_bytes(), &schema).unwrap();
        assert_eq!(g.flow_count(), 1);
        assert_eq!(report.rejected_rows, 1);
        assert_eq!(g.flows()[0].duration, 2.0);
    }

    #[test]
    fn ingest_rebases_large_timestamps() {
        let csv = "\
src,dst,start_time,duration,port_protocol
a,b,1700000005,1,443/tcp
b,a,1700000000,1,443/tcp
";
        let (g, _) = ingest_csv_reader(csv.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(g.epoch(), 1_700_000_000.0);
        assert_eq!(g.flows()[0].start_time, 5.0);
        assert_eq!(g.flows()[1].start_time, 0.0);
    }

    #[test]
    fn ingest_reports_missing_column() {
        let csv = "src,dst,start_time,duration\na,b,0,1\n";
        let err = ingest_csv_reader(csv.as_bytes(), &CsvSchema::default()).unwrap_err();
        match err {
            Error::Schema(col) => assert_eq!(col, "port_protocol"),
            other => panic!("expected schema error, got {other}"),
        }
    }

    #[test]
    fn ingest_rejects_empty_input() {
        let csv = "src,dst,start_time,duration,port_protocol\n";
        assert!(matches!(
            ingest_csv_reader(csv.as_bytes(), &CsvSchema::default()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn to_static_dedupes_pairs() {
        let flows = (0..5).map(|_| flow(0, 1, 0.0, 0.0, "x")).collect();
        let g = graph(2, flows);
        assert_eq!(g.to_static(true).edge_count(), 1);
    }

    #[test]
    fn to_static_respects_directedness() {
        let g = graph(2, vec![flow(0, 1, 0.0, 0.0, "x"), flow(1, 0, 0.0, 0.0, "x")]);
        assert_eq!(g.to_static(true).edge_count(), 2);
        assert_eq!(g.to_static(false).edge_count(), 1);
    }

    #[test]
    fn to_static_of_empty_multigraph() {
        let g = graph(3, vec![]);
        let s = g.to_static(true);
        assert_eq!(s.edge_count(), 0);
        assert!(s.edges().is_empty());
    }

    #[test]
    fn daily_tensor_point_interval() {
        let g = graph(2, vec![flow(0, 1, 0.0, 0.0, "x")]);
        let t = g.daily_tensor(86400.0).unwrap();
        assert_eq!(t.day_count(), 1);
        assert_eq!(t.day(0).unwrap()[&(0, 1)], 1.0);
    }

    #[test]
    fn daily_tensor_spanning_flow_counts_on_both_days() {
        let g = graph(2, vec![flow(0, 1, 0.0, 1.5 * 86400.0, "x")]);
        let t = g.daily_tensor(86400.0).unwrap();
        assert_eq!(t.day_count(), 2);
        assert_eq!(t.day(0).unwrap()[&(0, 1)], 1.0);
        assert_eq!(t.day(1).unwrap()[&(0, 1)], 1.0);
    }

    #[test]
    fn daily_tensor_counts_duplicates() {
        let day = 100.0;
        let flows = vec![flow(2, 5, 3.0 * day + 1.0, 1.0, "x"); 2];
        let g = graph(6, flows);
        let t = g.daily_tensor(day).unwrap();
        assert_eq!(t.day_count(), 4);
        assert_eq!(t.day(3).unwrap()[&(2, 5)], 2.0);
    }

    #[test]
    fn daily_tensor_boundary_end_stays_in_first_day() {
        // end exactly on the boundary belongs to [start, end)
        let g = graph(2, vec![flow(0, 1, 0.0, 100.0, "x")]);
        let t = g.daily_tensor(100.0).unwrap();
        assert_eq!(t.day_count(), 1);
    }

    #[test]
    fn daily_tensor_total_counts_each_flow_at_least_once() {
        let g = graph(
            3,
            vec![
                flow(0, 1, 0.0, 10.0, "x"),
                flow(1, 2, 50.0, 500.0, "x"),
                flow(2, 0, 20.0, 0.0, "x"),
            ],
        );
        let t = g.daily_tensor(100.0).unwrap();
        assert!(t.total() >= g.flow_count() as f64);
        // every flow inside one block -> equality
        let g2 = graph(2, vec![flow(0, 1, 1.0, 2.0, "x"), flow(1, 0, 3.0, 4.0, "x")]);
        assert_eq!(g2.daily_tensor(100.0).unwrap().total(), 2.0);
    }

    #[test]
    fn csv_round_trip_is_identical() {
        let g = graph(
            3,
            vec![
                flow(0, 1, 0.25, 1.5, "443/tcp"),
                flow(2, 0, 3.0, 0.0, "53/udp"),
            ],
        );
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let back = DynamicMultigraph::read_csv(buf.as_slice(), Some(3), 0.0).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn read_csv_preserves_node_ids_literally() {
        let csv = "\
src,dst,start_time,duration,port_protocol
5,3,0,1,a
0,1,2,1,b
";
        let g = DynamicMultigraph::read_csv(csv.as_bytes(), None, 0.0).unwrap();
        assert_eq!(g.node_count(), 6);
        assert_eq!(g.flows()[0].src, 5);
        assert_eq!(g.flows()[0].dst, 3);
    }

    #[test]
    fn ingest_then_serialize_then_ingest_is_stable() {
        let csv = "\
src,dst,start_time,duration,port_protocol
10.0.0.1,10.0.0.2,1500,2,443/tcp
10.0.0.3,10.0.0.1,1510,0,53/udp
";
        let (g1, _) = ingest_csv_reader(csv.as_bytes(), &CsvSchema::default()).unwrap();
        let mut buf = Vec::new();
        g1.write_csv(&mut buf).unwrap();
        let (g2, _) = ingest_csv_reader(buf.as_slice(), &CsvSchema::default()).unwrap();
        assert_eq!(g1.node_count(), g2.node_count());
        assert_eq!(g1.flows(), g2.flows());
    }

    #[test]
    fn static_graph_rejects_out_of_range_edges() {
        assert!(StaticGraph::new(2, true, vec![(0, 2)]).is_err());
    }

    #[test]
    fn undirected_simple_view_drops_loops_and_direction() {
        let g = StaticGraph::new(3, true, vec![(0, 1), (1, 0), (2, 2), (1, 2)]).unwrap();
        assert_eq!(g.undirected_simple_edges(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn l1_distance_pads_shorter_tensor() {
        let g = graph(2, vec![flow(0, 1, 0.0, 0.0, "x")]);
        let h = graph(
            2,
            vec![flow(0, 1, 0.0, 0.0, "x"), flow(0, 1, 250.0, 0.0, "x")],
        );
        let tg = g.daily_tensor(100.0).unwrap();
        let th = h.daily_tensor(100.0).unwrap();
        assert_eq!(tg.l1_distance(&th).unwrap(), 1.0);
        assert_eq!(th.l1_distance(&tg).unwrap(), 1.0);
    }
}
