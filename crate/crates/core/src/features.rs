//! Flow-feature synthesis: mode-specific normalization of the continuous
//! columns (start time, duration), one-hot port-protocol encoding, and a
//! category-conditional mixture sampler that stands behind the feature
//! synthesizer interface.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::{Gmm1, Gmm2};
use crate::model::{DynamicMultigraph, NetflowRecord};

/// Mode-specific normalization divisor: values are expressed as
/// (x - mean) / (4 std) of their responsible mode.
const MODE_SPAN: f64 = 4.0;

/// Per-column mixtures plus the port-protocol vocabulary (first-appearance
/// order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    pub start_time: Gmm1,
    pub duration: Gmm1,
    pub vocabulary: Vec<String>,
}

/// One flow after mode-specific normalization + one-hot encoding. The vector
/// form is `[start scalar, start mode one-hot, duration scalar, duration mode
/// one-hot, category one-hot]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedFeature {
    pub start_scalar: f64,
    pub start_mode: usize,
    pub duration_scalar: f64,
    pub duration_mode: usize,
    pub category: usize,
}

impl FeatureEncoder {
    /// Fits the per-column mixtures by EM and collects the vocabulary.
    pub fn fit(g: &DynamicMultigraph, modes: usize, seed: u64) -> Result<Self> {
        if g.flow_count() < modes {
            return Err(Error::Fit(format!(
                "{} flows cannot support {} mixture modes",
                g.flow_count(),
                modes
            )));
        }
        let starts: Vec<f64> = g.flows().iter().map(|f| f.start_time).collect();
        let durations: Vec<f64> = g.flows().iter().map(|f| f.duration).collect();
        let mut vocabulary = Vec::new();
        for f in g.flows() {
            if !vocabulary.iter().any(|v| v == &f.port_protocol) {
                vocabulary.push(f.port_protocol.clone());
            }
        }
        Ok(Self {
            start_time: Gmm1::fit(&starts, modes, seed),
            duration: Gmm1::fit(&durations, modes, seed.wrapping_add(1)),
            vocabulary,
        })
    }

    pub fn category_index(&self, label: &str) -> Option<usize> {
        self.vocabulary.iter().position(|v| v == label)
    }

    /// Width of the flat vector form.
    pub fn vector_len(&self) -> usize {
        2 + self.start_time.component_count()
            + self.duration.component_count()
            + self.vocabulary.len()
    }

    /// Encodes one record. The responsible mode of each continuous column is
    /// sampled from the posterior responsibilities, so encoding is stochastic
    /// for multi-mode columns.
    pub fn encode(&self, rec: &NetflowRecord, rng: &mut impl Rng) -> Result<EncodedFeature> {
        let category = self.category_index(&rec.port_protocol).ok_or_else(|| {
            Error::Encoding(format!(
                "port-protocol `{}` not in the fitted vocabulary",
                rec.port_protocol
            ))
        })?;
        let (start_mode, start_scalar) = encode_column(&self.start_time, rec.start_time, rng);
        let (duration_mode, duration_scalar) = encode_column(&self.duration, rec.duration, rng);
        Ok(EncodedFeature {
            start_scalar,
            start_mode,
            duration_scalar,
            duration_mode,
            category,
        })
    }

    /// Inverse of [`encode`](Self::encode): x = scalar * 4 std + mean of the
    /// indicated mode. Negative decoded durations are cleaned up to 0.
    pub fn decode(&self, f: &EncodedFeature) -> Result<(f64, f64, String)> {
        if f.start_mode >= self.start_time.component_count()
            || f.duration_mode >= self.duration.component_count()
        {
            return Err(Error::Encoding("mode index out of range".to_string()));
        }
        let label = self
            .vocabulary
            .get(f.category)
            .ok_or_else(|| Error::Encoding(format!("category index {} out of range", f.category)))?
            .clone();
        let start = f.start_scalar * MODE_SPAN * self.start_time.stds[f.start_mode]
            + self.start_time.means[f.start_mode];
        let duration = f.duration_scalar * MODE_SPAN * self.duration.stds[f.duration_mode]
            + self.duration.means[f.duration_mode];
        Ok((start, duration.max(0.0), label))
    }

    pub fn to_vector(&self, f: &EncodedFeature) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.vector_len());
        v.push(f.start_scalar);
        push_one_hot(&mut v, self.start_time.component_count(), f.start_mode);
        v.push(f.duration_scalar);
        push_one_hot(&mut v, self.duration.component_count(), f.duration_mode);
        push_one_hot(&mut v, self.vocabulary.len(), f.category);
        v
    }

    /// Parses the flat vector form, validating that every one-hot block has
    /// exactly one active entry.
    pub fn feature_from_vector(&self, v: &[f64]) -> Result<EncodedFeature> {
        if v.len() != self.vector_len() {
            return Err(Error::Encoding(format!(
                "expected a vector of width {}, got {}",
                self.vector_len(),
                v.len()
            )));
        }
        let mut pos = 0;
        let start_scalar = v[pos];
        pos += 1;
        let start_mode = read_one_hot(&v[pos..pos + self.start_time.component_count()])?;
        pos += self.start_time.component_count();
        let duration_scalar = v[pos];
        pos += 1;
        let duration_mode = read_one_hot(&v[pos..pos + self.duration.component_count()])?;
        pos += self.duration.component_count();
        let category = read_one_hot(&v[pos..])?;
        Ok(EncodedFeature {
            start_scalar,
            start_mode,
            duration_scalar,
            duration_mode,
            category,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn encode_column(gmm: &Gmm1, x: f64, rng: &mut impl Rng) -> (usize, f64) {
    let resp = gmm.responsibilities(x);
    let mode = if resp.len() == 1 {
        0
    } else {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = resp.len() - 1;
        for (i, r) in resp.iter().enumerate() {
            acc += r;
            if u < acc {
                pick = i;
                break;
            }
        }
        pick
    };
    let scalar = ((x - gmm.means[mode]) / (MODE_SPAN * gmm.stds[mode])).clamp(-1.0, 1.0);
    (mode, scalar)
}

fn push_one_hot(v: &mut Vec<f64>, width: usize, index: usize) {
    for i in 0..width {
        v.push(if i == index { 1.0 } else { 0.0 });
    }
}

fn read_one_hot(block: &[f64]) -> Result<usize> {
    let mut found = None;
    for (i, &x) in block.iter().enumerate() {
        if x == 1.0 {
            if found.is_some() {
                return Err(Error::Encoding("one-hot block has multiple active entries".to_string()));
            }
            found = Some(i);
        } else if x != 0.0 {
            return Err(Error::Encoding(format!("one-hot block holds non-binary value {x}")));
        }
    }
    found.ok_or_else(|| Error::Encoding("one-hot block has no active entry".to_string()))
}

/// A sampled feature row before graph alignment assigns it an edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub start_time: f64,
    pub duration: f64,
    pub port_protocol: String,
}

/// Category-conditional joint sampler over (start time, duration): an
/// empirical category marginal plus one 2-D mixture per observed category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSampler {
    /// Aligned with the encoder vocabulary.
    pub categories: Vec<String>,
    pub marginal: Vec<f64>,
    /// None for categories absent from the reference (marginal 0).
    pub joints: Vec<Option<Gmm2>>,
}

impl FeatureSampler {
    pub fn fit(
        g: &DynamicMultigraph,
        encoder: &FeatureEncoder,
        modes: usize,
        seed: u64,
    ) -> Result<Self> {
        if g.flow_count() == 0 {
            return Err(Error::Fit("cannot fit a sampler to an empty dataset".to_string()));
        }
        let categories = encoder.vocabulary.clone();
        let mut counts = vec![0usize; categories.len()];
        let mut groups: Vec<Vec<[f64; 2]>> = vec![Vec::new(); categories.len()];
        for f in g.flows() {
            let c = encoder.category_index(&f.port_protocol).ok_or_else(|| {
                Error::Encoding(format!(
                    "port-protocol `{}` not in the fitted vocabulary",
                    f.port_protocol
                ))
            })?;
            counts[c] += 1;
            groups[c].push([f.start_time, f.duration]);
        }
        let total = g.flow_count() as f64;
        let marginal = counts.iter().map(|&c| c as f64 / total).collect();
        let joints = groups
            .iter()
            .enumerate()
            .map(|(c, pts)| {
                if pts.is_empty() {
                    None
                } else {
                    Some(Gmm2::fit(pts, modes, seed.wrapping_add(c as u64)))
                }
            })
            .collect();
        Ok(Self {
            categories,
            marginal,
            joints,
        })
    }

    /// Draws `count` feature rows plus their encoded forms. Durations (and
    /// start times, which must stay non-negative) are post-processed to 0
    /// when a mixture tail dips below it. Deterministic given the seed.
    pub fn sample(
        &self,
        encoder: &FeatureEncoder,
        count: usize,
        seed: u64,
    ) -> Result<(Vec<FeatureRow>, Vec<EncodedFeature>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::with_capacity(count);
        let mut encoded = Vec::with_capacity(count);
        for _ in 0..count {
            let c = self.sample_category(&mut rng)?;
            let joint = self.joints[c]
                .as_ref()
                .ok_or_else(|| Error::Fit(format!("category `{}` has no sampler", self.categories[c])))?;
            let [start, duration] = joint.sample(&mut rng);
            let row = FeatureRow {
                start_time: start.max(0.0),
                duration: duration.max(0.0),
                port_protocol: self.categories[c].clone(),
            };
            let rec = NetflowRecord {
                src: 0,
                dst: 0,
                start_time: row.start_time,
                duration: row.duration,
                port_protocol: row.port_protocol.clone(),
            };
            encoded.push(encoder.encode(&rec, &mut rng)?);
            rows.push(row);
        }
        Ok((rows, encoded))
    }

    fn sample_category(&self, rng: &mut impl Rng) -> Result<usize> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last_positive = None;
        for (i, &w) in self.marginal.iter().enumerate() {
            if w > 0.0 {
                acc += w;
                last_positive = Some(i);
                if u < acc {
                    return Ok(i);
                }
            }
        }
        last_positive.ok_or_else(|| Error::Fit("sampler has an all-zero category marginal".to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
