//! End-to-end pipeline drivers behind the CLI subcommands: configuration,
//! model persistence, ensemble generation, and report emission. Every run is
//! a pure function of (input, config, master seed); per-member seeds are
//! master seed + member index.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alignment::{
    assign_edges, build_targets, structural_features, train_scorer, AssignOptions,
};
use crate::baselines::{generate_baseline_prefit, BaselineKind, BaselineSpec};
use crate::boost::{BoostParams, BoostedScorer};
use crate::error::{Error, Result};
use crate::features::{FeatureEncoder, FeatureSampler};
use crate::kronecker::{kronfit, sample_graph, select_n1, InitiatorMatrix, KronFitOptions, KronSampleSpec};
use crate::metrics::{
    evaluate_ensemble, feature_cdfs, structural_report, CdfTable, Ensemble, EnsembleReport,
    FeatureCdfs, StructuralReport,
};
use crate::model::{ingest_csv, CsvSchema, DynamicMultigraph};

pub const INITIATOR_FILE: &str = "initiator.json";
pub const ENCODER_FILE: &str = "encoder.json";
pub const SAMPLER_FILE: &str = "sampler.json";
pub const SCORER_FILE: &str = "scorer.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const ENSEMBLE_MANIFEST_FILE: &str = "ensemble.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignmentConfig {
    /// Scores below this become probability zero during assignment.
    pub threshold: f64,
    pub trees: usize,
    pub depth: usize,
    pub learning_rate: f64,
    /// Fraction of the (edge, flow) cross product used as training pairs.
    pub sample_fraction: f64,
    /// Fraction of synthetic edges scored per feature row.
    pub score_sample: f64,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        Self {
            threshold: 0.0,
            trees: 200,
            depth: 4,
            learning_rate: 0.1,
            sample_fraction: 1.0,
            score_sample: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub model_dir: PathBuf,
    pub output_dir: PathBuf,
    pub schema: CsvSchema,
    pub n1_candidates: Vec<usize>,
    pub fit_iterations: usize,
    pub fit_learning_rate: f64,
    pub feature_modes: usize,
    pub alignment: AlignmentConfig,
    pub ensemble_size: usize,
    pub day_length: f64,
    pub seed: u64,
    /// Worker threads for ensemble generation/evaluation; 0 = all cores.
    pub workers: usize,
    /// Generation overrides; the reference values are used when absent.
    pub target_nodes: Option<usize>,
    pub target_edges: Option<usize>,
    pub target_flows: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::from("reference.csv"),
            model_dir: PathBuf::from("model"),
            output_dir: PathBuf::from("out"),
            schema: CsvSchema::default(),
            n1_candidates: vec![2, 3],
            fit_iterations: 300,
            fit_learning_rate: 0.05,
            feature_modes: 10,
            alignment: AlignmentConfig::default(),
            ensemble_size: 20,
            day_length: 86_400.0,
            seed: 42,
            workers: 0,
            target_nodes: None,
            target_edges: None,
            target_flows: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ensemble_size < 1 {
            return Err(Error::Data("ensemble size must be >= 1".to_string()));
        }
        if !self.day_length.is_finite() || self.day_length <= 0.0 {
            return Err(Error::Data("day length must be > 0".to_string()));
        }
        if self.n1_candidates.is_empty() || self.n1_candidates.iter().any(|&c| c < 2) {
            return Err(Error::Data("n1 candidates must be a nonempty list of sizes >= 2".to_string()));
        }
        if self.fit_iterations == 0 || !(self.fit_learning_rate.is_finite() && self.fit_learning_rate > 0.0) {
            return Err(Error::Data("fit iterations and learning rate must be positive".to_string()));
        }
        if self.feature_modes < 1 {
            return Err(Error::Data("feature mode count must be >= 1".to_string()));
        }
        let a = &self.alignment;
        if a.threshold < 0.0
            || a.trees == 0
            || a.depth == 0
            || !(a.learning_rate > 0.0 && a.learning_rate < 2.0)
            || !(a.sample_fraction > 0.0 && a.sample_fraction <= 1.0)
            || !(a.score_sample > 0.0 && a.score_sample <= 1.0)
        {
            return Err(Error::Data("alignment knobs out of range".to_string()));
        }
        Ok(())
    }

    /// Hash of the canonical JSON form; identical configs hash identically.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        hex::encode(hasher.finalize())
    }

    fn kron_opts(&self, seed: u64) -> KronFitOptions {
        KronFitOptions {
            iterations: self.fit_iterations,
            learning_rate: self.fit_learning_rate,
            swaps_per_node: 10,
            seed,
        }
    }

    fn boost_params(&self) -> BoostParams {
        BoostParams {
            trees: self.alignment.trees,
            depth: self.alignment.depth,
            learning_rate: self.alignment.learning_rate,
            min_leaf: 1,
        }
    }
}

/// Distinct sub-streams of the master seed for the fit stages.
fn stage_seed(master: u64, tag: u64) -> u64 {
    let mut z = master ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const SEED_KRONFIT: u64 = 1;
const SEED_ENCODER: u64 = 2;
const SEED_SAMPLER: u64 = 3;
const SEED_TARGETS: u64 = 4;
const SEED_MEMBER_GRAPH: u64 = 5;
const SEED_MEMBER_FEATURES: u64 = 6;
const SEED_MEMBER_ASSIGN: u64 = 7;

fn with_stage(stage: &str, e: Error) -> Error {
    match e {
        Error::Schema(s) => Error::Schema(format!("{stage}: {s}")),
        Error::Data(s) => Error::Data(format!("{stage}: {s}")),
        Error::Infeasible(s) => Error::Infeasible(format!("{stage}: {s}")),
        Error::Fit(s) => Error::Fit(format!("{stage}: {s}")),
        Error::Encoding(s) => Error::Encoding(format!("{stage}: {s}")),
        other => other,
    }
}

/// Everything `fit` persists to the model directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelManifest {
    pub config_hash: String,
    pub seed: u64,
    pub node_count: usize,
    pub static_edges: usize,
    pub flow_count: usize,
    pub epoch: f64,
    pub day_length: f64,
    /// Encoder vocabulary order, used to align CDF category indices.
    pub category_order: Vec<String>,
    pub artifacts: Vec<String>,
}

pub struct ModelBundle {
    pub initiator: InitiatorMatrix,
    pub encoder: FeatureEncoder,
    pub sampler: FeatureSampler,
    pub scorer: BoostedScorer,
    pub manifest: ModelManifest,
}

/// fit: ingest -> static reduction -> initiator selection -> feature encoder
/// and sampler -> alignment targets -> scorer; persists five artifacts. On
/// any error no partial artifacts remain.
pub fn cmd_fit(config: &PipelineConfig) -> Result<ModelBundle> {
    config.validate()?;
    let (reference, ingest_report) =
        ingest_csv(&config.input, &config.schema).map_err(|e| with_stage("ingest", e))?;
    if ingest_report.rejected_rows > 0 {
        eprintln!(
            "warning: {} rows rejected for negative duration",
            ingest_report.rejected_rows
        );
    }
    let bundle = fit_reference(config, &reference)?;
    persist_bundle(&config.model_dir, &bundle)?;
    Ok(bundle)
}

/// The fit stages on an already-loaded reference.
pub fn fit_reference(config: &PipelineConfig, reference: &DynamicMultigraph) -> Result<ModelBundle> {
    config.validate()?;
    let ref_static = reference.to_static(true);
    let mut initiator = select_n1(
        &ref_static,
        &config.n1_candidates,
        &config.kron_opts(stage_seed(config.seed, SEED_KRONFIT)),
    )
    .map_err(|e| with_stage("select_n1", e))?;
    // the BIC already reflects the fit; keep the seed visible in the artifact
    initiator.fit_seed = stage_seed(config.seed, SEED_KRONFIT);
    let encoder = FeatureEncoder::fit(
        reference,
        config.feature_modes,
        stage_seed(config.seed, SEED_ENCODER),
    )
    .map_err(|e| with_stage("fit_encoder", e))?;
    let sampler = FeatureSampler::fit(
        reference,
        &encoder,
        config.feature_modes,
        stage_seed(config.seed, SEED_SAMPLER),
    )
    .map_err(|e| with_stage("fit_sampler", e))?;
    let targets = build_targets(
        reference,
        &encoder,
        config.alignment.sample_fraction,
        stage_seed(config.seed, SEED_TARGETS),
    )
    .map_err(|e| with_stage("build_targets", e))?;
    let descriptors = structural_features(&ref_static);
    let scorer = train_scorer(&targets, &descriptors, &config.boost_params())
        .map_err(|e| with_stage("train_scorer", e))?;
    let manifest = ModelManifest {
        config_hash: config.hash(),
        seed: config.seed,
        node_count: reference.node_count(),
        static_edges: ref_static.edge_count(),
        flow_count: reference.flow_count(),
        epoch: reference.epoch(),
        day_length: config.day_length,
        category_order: encoder.vocabulary.clone(),
        artifacts: vec![
            INITIATOR_FILE.to_string(),
            ENCODER_FILE.to_string(),
            SAMPLER_FILE.to_string(),
            SCORER_FILE.to_string(),
            MANIFEST_FILE.to_string(),
        ],
    };
    Ok(ModelBundle {
        initiator,
        encoder,
        sampler,
        scorer,
        manifest,
    })
}

fn persist_bundle(dir: &Path, bundle: &ModelBundle) -> Result<()> {
    fs::create_dir_all(dir)?;
    let files = [
        (INITIATOR_FILE, serde_json::to_string_pretty(&bundle.initiator)?),
        (ENCODER_FILE, serde_json::to_string_pretty(&bundle.encoder)?),
        (SAMPLER_FILE, serde_json::to_string_pretty(&bundle.sampler)?),
        (SCORER_FILE, serde_json::to_string_pretty(&bundle.scorer)?),
        (MANIFEST_FILE, serde_json::to_string_pretty(&bundle.manifest)?),
    ];
    let mut written: Vec<PathBuf> = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, body) {
            for w in &written {
                let _ = fs::remove_file(w);
            }
            return Err(e.into());
        }
        written.push(path);
    }
    Ok(())
}

pub fn load_bundle(dir: &Path) -> Result<ModelBundle> {
    let read = |name: &str| -> Result<String> {
        fs::read_to_string(dir.join(name)).map_err(|e| {
            Error::Data(format!("model artifact `{name}` unreadable in {}: {e}", dir.display()))
        })
    };
    Ok(ModelBundle {
        initiator: serde_json::from_str(&read(INITIATOR_FILE)?)?,
        encoder: serde_json::from_str(&read(ENCODER_FILE)?)?,
        sampler: serde_json::from_str(&read(SAMPLER_FILE)?)?,
        scorer: serde_json::from_str(&read(SCORER_FILE)?)?,
        manifest: serde_json::from_str(&read(MANIFEST_FILE)?)?,
    })
}

/// Where one generated ensemble lives and how to reload it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub config_hash: String,
    pub seed: u64,
    pub node_count: usize,
    pub target_edges: usize,
    pub flow_count: usize,
    pub day_length: f64,
    pub epoch: f64,
    pub members: Vec<String>,
    /// Which generator produced this ensemble (pipeline or a baseline name).
    pub generator: String,
}

fn member_file(index: usize) -> String {
    format!("member_{index:03}.csv")
}

fn run_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        job()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool")
            .install(job)
    }
}

/// generate: samples `count` independent members (structure -> features ->
/// alignment) with member seed = master seed + index, writing one CSV per
/// member plus the ensemble manifest.
pub fn cmd_generate(config: &PipelineConfig, bundle: &ModelBundle, count: usize) -> Result<EnsembleManifest> {
    config.validate()?;
    if count == 0 {
        return Err(Error::Data("ensemble size must be >= 1".to_string()));
    }
    let n = config.target_nodes.unwrap_or(bundle.manifest.node_count);
    let e = config.target_edges.unwrap_or(bundle.manifest.static_edges);
    let m = config.target_flows.unwrap_or(bundle.manifest.flow_count);
    // fail fast on an infeasible override before any member work
    KronSampleSpec::for_targets(&bundle.initiator, n, e, config.seed)
        .map_err(|err| with_stage("generate", err))?;
    fs::create_dir_all(&config.output_dir)?;
    let members: Vec<String> = run_pool(config.workers, || {
        (0..count)
            .into_par_iter()
            .map(|index| -> Result<String> {
                let member = generate_member(config, bundle, n, e, m, index)?;
                let name = member_file(index);
                member.write_csv_file(&config.output_dir.join(&name))?;
                Ok(name)
            })
            .collect::<Result<_>>()
    })?;
    let manifest = EnsembleManifest {
        config_hash: config.hash(),
        seed: config.seed,
        node_count: n,
        target_edges: e,
        flow_count: m,
        day_length: config.day_length,
        epoch: bundle.manifest.epoch,
        members,
        generator: "pipeline".to_string(),
    };
    fs::write(
        config.output_dir.join(ENSEMBLE_MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

/// One synthetic member: Kronecker structure, sampled features, aligned
/// edges.
pub fn generate_member(
    config: &PipelineConfig,
    bundle: &ModelBundle,
    target_nodes: usize,
    target_edges: usize,
    flow_count: usize,
    index: usize,
) -> Result<DynamicMultigraph> {
    let member_seed = config.seed.wrapping_add(index as u64);
    let spec = KronSampleSpec::for_targets(
        &bundle.initiator,
        target_nodes,
        target_edges,
        stage_seed(member_seed, SEED_MEMBER_GRAPH),
    )
    .map_err(|e| with_stage("member structure", e))?;
    let structure = sample_graph(&bundle.initiator, &spec)
        .map_err(|e| with_stage("member structure", e))?;
    let (_, encoded) = bundle
        .sampler
        .sample(
            &bundle.encoder,
            flow_count,
            stage_seed(member_seed, SEED_MEMBER_FEATURES),
        )
        .map_err(|e| with_stage("member features", e))?;
    if encoded.is_empty() {
        // structure-only member
        let n = structure.node_count();
        let ip_map = (0..n).map(|i| i.to_string()).collect();
        return DynamicMultigraph::new(n, Vec::new(), ip_map, bundle.manifest.epoch);
    }
    assign_edges(
        &bundle.scorer,
        &structure,
        &bundle.encoder,
        &encoded,
        &AssignOptions {
            threshold: config.alignment.threshold,
            score_sample: config.alignment.score_sample,
            seed: stage_seed(member_seed, SEED_MEMBER_ASSIGN),
        },
    )
    .map_err(|e| with_stage("member alignment", e))
}

/// baseline: same ensemble layout as `generate`, but members come from one of
/// the comparison generators with features resampled from the reference.
pub fn cmd_baseline(
    config: &PipelineConfig,
    kind: BaselineKind,
    count: usize,
) -> Result<EnsembleManifest> {
    config.validate()?;
    if count == 0 {
        return Err(Error::Data("ensemble size must be >= 1".to_string()));
    }
    let (reference, _) =
        ingest_csv(&config.input, &config.schema).map_err(|e| with_stage("ingest", e))?;
    let ref_static = reference.to_static(true);
    let n = config.target_nodes.unwrap_or(reference.node_count());
    let e = config.target_edges.unwrap_or(ref_static.edge_count());
    let m = config.target_flows.unwrap_or(reference.flow_count());
    let prefit = match kind {
        BaselineKind::Rmat2 => Some(
            kronfit(
                &ref_static,
                2,
                &config.kron_opts(stage_seed(config.seed, SEED_KRONFIT)),
            )
            .map_err(|err| with_stage("rmat2 fit", err))?,
        ),
        _ => None,
    };
    fs::create_dir_all(&config.output_dir)?;
    let members: Vec<String> = run_pool(config.workers, || {
        (0..count)
            .into_par_iter()
            .map(|index| -> Result<String> {
                let spec = BaselineSpec {
                    kind,
                    target_nodes: n,
                    target_edges: e,
                    flow_count: m,
                    seed: config.seed.wrapping_add(index as u64),
                };
                let member = generate_baseline_prefit(&spec, &reference, prefit.as_ref())
                    .map_err(|err| with_stage("baseline member", err))?;
                let name = member_file(index);
                member.write_csv_file(&config.output_dir.join(&name))?;
                Ok(name)
            })
            .collect::<Result<_>>()
    })?;
    let manifest = EnsembleManifest {
        config_hash: config.hash(),
        seed: config.seed,
        node_count: n,
        target_edges: e,
        flow_count: m,
        day_length: config.day_length,
        epoch: reference.epoch(),
        members,
        generator: kind.to_string(),
    };
    fs::write(
        config.output_dir.join(ENSEMBLE_MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

/// Everything `evaluate` writes.
pub struct EvaluationOutput {
    pub ensemble: EnsembleReport,
    pub structural: Vec<(String, StructuralReport)>,
    pub reference_cdfs: FeatureCdfs,
    pub member_cdfs: Vec<(String, FeatureCdfs)>,
}

/// evaluate: loads an ensemble directory, checks node correspondence against
/// the reference, and writes report.json (the sphere metrics), and
/// structural.json + CDF tables alongside it.
pub fn cmd_evaluate(
    config: &PipelineConfig,
    reference_path: &Path,
    ensemble_dir: &Path,
    out_dir: &Path,
) -> Result<EvaluationOutput> {
    config.validate()?;
    let (reference, _) =
        ingest_csv(reference_path, &config.schema).map_err(|e| with_stage("ingest", e))?;
    let manifest: EnsembleManifest = serde_json::from_str(
        &fs::read_to_string(ensemble_dir.join(ENSEMBLE_MANIFEST_FILE)).map_err(|e| {
            Error::Data(format!(
                "ensemble manifest unreadable in {}: {e}",
                ensemble_dir.display()
            ))
        })?,
    )?;
    if manifest.node_count != reference.node_count() {
        return Err(Error::Data(format!(
            "node correspondence required: ensemble has {} nodes, reference {}",
            manifest.node_count,
            reference.node_count()
        )));
    }
    let members: Vec<DynamicMultigraph> = run_pool(config.workers, || {
        manifest
            .members
            .par_iter()
            .map(|name| {
                DynamicMultigraph::read_csv_file(
                    &ensemble_dir.join(name),
                    Some(manifest.node_count),
                    manifest.epoch,
                )
            })
            .collect::<Result<_>>()
    })?;
    let ensemble = Ensemble::new(members, config.day_length)?;
    let report = evaluate_ensemble(&reference, &ensemble)?;

    let ref_static = reference.to_static(true);
    let mut structural = Vec::with_capacity(ensemble.members().len() + 1);
    structural.push((
        "reference".to_string(),
        structural_report(&ref_static, &ref_static)?,
    ));
    for (name, member) in manifest.members.iter().zip(ensemble.members()) {
        structural.push((
            name.clone(),
            structural_report(&member.to_static(true), &ref_static)?,
        ));
    }

    let reference_cdfs = feature_cdfs(&reference, None)?;
    let order = reference_cdfs.category_order.clone();
    let mut member_cdfs = Vec::new();
    for (name, member) in manifest.members.iter().zip(ensemble.members()) {
        if member.flow_count() > 0 {
            member_cdfs.push((name.clone(), feature_cdfs(member, Some(&order))?));
        }
    }

    write_evaluation(out_dir, &report, &structural, &reference_cdfs, &member_cdfs)?;
    Ok(EvaluationOutput {
        ensemble: report,
        structural,
        reference_cdfs,
        member_cdfs,
    })
}

fn write_evaluation(
    out_dir: &Path,
    report: &EnsembleReport,
    structural: &[(String, StructuralReport)],
    reference_cdfs: &FeatureCdfs,
    member_cdfs: &[(String, FeatureCdfs)],
) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(report)?,
    )?;
    #[derive(Serialize)]
    struct StructuralRow<'a> {
        member: &'a str,
        #[serde(flatten)]
        report: &'a StructuralReport,
    }
    let rows: Vec<StructuralRow> = structural
        .iter()
        .map(|(member, report)| StructuralRow { member, report })
        .collect();
    fs::write(
        out_dir.join("structural.json"),
        serde_json::to_string_pretty(&rows)?,
    )?;
    let cdf_dir = out_dir.join("cdfs");
    fs::create_dir_all(&cdf_dir)?;
    write_cdf_set(&cdf_dir, "reference", reference_cdfs)?;
    for (name, cdfs) in member_cdfs {
        let stem = name.trim_end_matches(".csv");
        write_cdf_set(&cdf_dir, stem, cdfs)?;
    }
    Ok(())
}

fn write_cdf_set(dir: &Path, stem: &str, cdfs: &FeatureCdfs) -> Result<()> {
    write_cdf(&dir.join(format!("{stem}_start_time.csv")), &cdfs.start_time)?;
    write_cdf(&dir.join(format!("{stem}_duration.csv")), &cdfs.duration)?;
    write_cdf(
        &dir.join(format!("{stem}_port_protocol.csv")),
        &cdfs.port_protocol,
    )?;
    Ok(())
}

fn write_cdf(path: &Path, table: &CdfTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(std::fs::File::create(path)?);
    w.write_record(["value", "cumulative_fraction"])?;
    for &(v, f) in &table.points {
        w.write_record([v.to_string(), f.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
