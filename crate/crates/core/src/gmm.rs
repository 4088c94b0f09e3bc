//! Gaussian mixtures fit by expectation-maximization, seeded k-means++
//! initialization. The 1-D variant backs the mode-specific feature encoders;
//! the 2-D variant backs the per-category joint samplers.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Floor on standard deviations so densities and the mode-normalized scalars
/// stay finite; also the spread of degenerate (spike) components.
pub const STD_FLOOR: f64 = 1e-6;

const EM_MAX_ITERS: usize = 100;
const EM_REL_TOL: f64 = 1e-6;
const WEIGHT_PRUNE: f64 = 1e-3;
const KMEANS_SUBSAMPLE: usize = 10_000;

/// One-dimensional Gaussian mixture. Weights sum to 1, stds are positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gmm1 {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Gmm1 {
    pub fn component_count(&self) -> usize {
        self.weights.len()
    }

    /// Fits up to `modes` components; zero-variance inputs collapse to a
    /// single spike and components lighter than 1e-3 are pruned.
    pub fn fit(values: &[f64], modes: usize, seed: u64) -> Self {
        assert!(!values.is_empty(), "cannot fit a mixture to no data");
        let modes = modes.max(1);
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo <= 0.0 {
            return Self {
                weights: vec![1.0],
                means: vec![lo],
                stds: vec![STD_FLOOR],
            };
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = kmeans_pp_1d(values, modes, &mut rng);
        let m = init.len();
        let mut weights = vec![1.0 / m as f64; m];
        let mut means = init;
        let spread = (hi - lo) / m as f64;
        let mut stds = vec![(spread / 2.0).max(STD_FLOOR); m];

        let mut resp = vec![0.0; m];
        let mut prev_ll = f64::NEG_INFINITY;
        for _ in 0..EM_MAX_ITERS {
            let mut ll = 0.0;
            let mut w_acc = vec![0.0; m];
            let mut mean_acc = vec![0.0; m];
            let mut var_acc = vec![0.0; m];
            for &x in values {
                let norm = posterior_1d(x, &weights, &means, &stds, &mut resp);
                ll += norm;
                for c in 0..m {
                    w_acc[c] += resp[c];
                    mean_acc[c] += resp[c] * x;
                }
            }
            for c in 0..m {
                if w_acc[c] > 0.0 {
                    means[c] = mean_acc[c] / w_acc[c];
                }
            }
            for &x in values {
                posterior_1d(x, &weights, &means, &stds, &mut resp);
                for c in 0..m {
                    var_acc[c] += resp[c] * (x - means[c]).powi(2);
                }
            }
            let n = values.len() as f64;
            for c in 0..m {
                weights[c] = w_acc[c] / n;
                stds[c] = if w_acc[c] > 0.0 {
                    (var_acc[c] / w_acc[c]).sqrt().max(STD_FLOOR)
                } else {
                    STD_FLOOR
                };
            }
            if (ll - prev_ll).abs() <= EM_REL_TOL * ll.abs().max(1.0) {
                break;
            }
            prev_ll = ll;
        }

        let mut out = Self {
            weights,
            means,
            stds,
        };
        out.prune();
        out
    }

    fn prune(&mut self) {
        let keep: Vec<usize> = (0..self.weights.len())
            .filter(|&c| self.weights[c] >= WEIGHT_PRUNE)
            .collect();
        if keep.len() != self.weights.len() && !keep.is_empty() {
            self.weights = keep.iter().map(|&c| self.weights[c]).collect();
            self.means = keep.iter().map(|&c| self.means[c]).collect();
            self.stds = keep.iter().map(|&c| self.stds[c]).collect();
        }
        let total: f64 = self.weights.iter().sum();
        for w in &mut self.weights {
            *w /= total;
        }
    }

    /// Posterior responsibility of each component for `x`.
    pub fn responsibilities(&self, x: f64) -> Vec<f64> {
        let mut resp = vec![0.0; self.component_count()];
        posterior_1d(x, &self.weights, &self.means, &self.stds, &mut resp);
        resp
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        let c = sample_index(&self.weights, rng);
        let z: f64 = StandardNormal.sample(rng);
        self.means[c] + self.stds[c] * z
    }
}

/// Log-sum-exp posterior; returns the log-density of x under the mixture.
fn posterior_1d(x: f64, weights: &[f64], means: &[f64], stds: &[f64], out: &mut [f64]) -> f64 {
    let m = weights.len();
    let mut max_lp = f64::NEG_INFINITY;
    for c in 0..m {
        let lp = if weights[c] > 0.0 {
            weights[c].ln() + log_normal_pdf(x, means[c], stds[c])
        } else {
            f64::NEG_INFINITY
        };
        out[c] = lp;
        max_lp = max_lp.max(lp);
    }
    if !max_lp.is_finite() {
        let u = 1.0 / m as f64;
        out.iter_mut().for_each(|r| *r = u);
        return f64::NEG_INFINITY;
    }
    let mut total = 0.0;
    for r in out.iter_mut() {
        *r = (*r - max_lp).exp();
        total += *r;
    }
    for r in out.iter_mut() {
        *r /= total;
    }
    max_lp + total.ln()
}

fn log_normal_pdf(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    -0.5 * z * z - std.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

fn sample_index(weights: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

fn kmeans_pp_1d(values: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let sample: Vec<f64> = if values.len() > KMEANS_SUBSAMPLE {
        (0..KMEANS_SUBSAMPLE)
            .map(|_| values[rng.random_range(0..values.len())])
            .collect()
    } else {
        values.to_vec()
    };
    let mut centers = vec![sample[rng.random_range(0..sample.len())]];
    let mut d2: Vec<f64> = sample.iter().map(|&x| (x - centers[0]).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break; // fewer distinct values than requested centers
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = sample.len() - 1;
        for (i, &d) in d2.iter().enumerate() {
            if u < d {
                pick = i;
                break;
            }
            u -= d;
        }
        let c = sample[pick];
        centers.push(c);
        for (i, &x) in sample.iter().enumerate() {
            d2[i] = d2[i].min((x - c).powi(2));
        }
    }
    centers
}

/// Two-dimensional Gaussian mixture with full covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gmm2 {
    pub weights: Vec<f64>,
    pub means: Vec<[f64; 2]>,
    /// Row-major symmetric covariance [c00, c01, c10, c11].
    pub covs: Vec<[f64; 4]>,
}

impl Gmm2 {
    pub fn component_count(&self) -> usize {
        self.weights.len()
    }

    pub fn fit(points: &[[f64; 2]], modes: usize, seed: u64) -> Self {
        assert!(!points.is_empty(), "cannot fit a mixture to no data");
        let modes = modes.max(1).min(points.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut centers = kmeans_pp_2d(points, modes, &mut rng);
        let m = centers.len();
        if m == 1 {
            let (mean, cov) = moments(points);
            return Self {
                weights: vec![1.0],
                means: vec![mean],
                covs: vec![regularize(cov)],
            };
        }
        let (_, full_cov) = moments(points);
        let base_cov = regularize([
            full_cov[0] / m as f64,
            0.0,
            0.0,
            full_cov[3] / m as f64,
        ]);
        let mut weights = vec![1.0 / m as f64; m];
        let mut covs = vec![base_cov; m];

        let mut resp = vec![0.0; m];
        let mut prev_ll = f64::NEG_INFINITY;
        for _ in 0..EM_MAX_ITERS {
            let mut ll = 0.0;
            let mut w_acc = vec![0.0; m];
            let mut mean_acc = vec![[0.0; 2]; m];
            for p in points {
                let norm = posterior_2d(p, &weights, &centers, &covs, &mut resp);
                ll += norm;
                for c in 0..m {
                    w_acc[c] += resp[c];
                    mean_acc[c][0] += resp[c] * p[0];
                    mean_acc[c][1] += resp[c] * p[1];
                }
            }
            for c in 0..m {
                if w_acc[c] > 0.0 {
                    centers[c] = [mean_acc[c][0] / w_acc[c], mean_acc[c][1] / w_acc[c]];
                }
            }
            let mut cov_acc = vec![[0.0; 4]; m];
            for p in points {
                posterior_2d(p, &weights, &centers, &covs, &mut resp);
                for c in 0..m {
                    let dx = p[0] - centers[c][0];
                    let dy = p[1] - centers[c][1];
                    cov_acc[c][0] += resp[c] * dx * dx;
                    cov_acc[c][1] += resp[c] * dx * dy;
                    cov_acc[c][3] += resp[c] * dy * dy;
                }
            }
            let n = points.len() as f64;
            for c in 0..m {
                weights[c] = w_acc[c] / n;
                if w_acc[c] > 0.0 {
                    let inv = 1.0 / w_acc[c];
                    covs[c] = regularize([
                        cov_acc[c][0] * inv,
                        cov_acc[c][1] * inv,
                        cov_acc[c][1] * inv,
                        cov_acc[c][3] * inv,
                    ]);
                }
            }
            if (ll - prev_ll).abs() <= EM_REL_TOL * ll.abs().max(1.0) {
                break;
            }
            prev_ll = ll;
        }

        let mut out = Self {
            weights,
            means: centers,
            covs,
        };
        out.prune();
        out
    }

    fn prune(&mut self) {
        let keep: Vec<usize> = (0..self.weights.len())
            .filter(|&c| self.weights[c] >= WEIGHT_PRUNE)
            .collect();
        if keep.len() != self.weights.len() && !keep.is_empty() {
            self.weights = keep.iter().map(|&c| self.weights[c]).collect();
            self.means = keep.iter().map(|&c| self.means[c]).collect();
            self.covs = keep.iter().map(|&c| self.covs[c]).collect();
        }
        let total: f64 = self.weights.iter().sum();
        for w in &mut self.weights {
            *w /= total;
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> [f64; 2] {
        let c = sample_index(&self.weights, rng);
        let cov = self.covs[c];
        // Cholesky of a 2x2 SPD matrix
        let l00 = cov[0].sqrt();
        let l10 = cov[1] / l00;
        let l11 = (cov[3] - l10 * l10).max(0.0).sqrt();
        let z0: f64 = StandardNormal.sample(rng);
        let z1: f64 = StandardNormal.sample(rng);
        [
            self.means[c][0] + l00 * z0,
            self.means[c][1] + l10 * z0 + l11 * z1,
        ]
    }
}

fn moments(points: &[[f64; 2]]) -> ([f64; 2], [f64; 4]) {
    let n = points.len() as f64;
    let mut mean = [0.0; 2];
    for p in points {
        mean[0] += p[0];
        mean[1] += p[1];
    }
    mean[0] /= n;
    mean[1] /= n;
    let mut cov = [0.0; 4];
    for p in points {
        let dx = p[0] - mean[0];
        let dy = p[1] - mean[1];
        cov[0] += dx * dx;
        cov[1] += dx * dy;
        cov[3] += dy * dy;
    }
    cov[0] /= n;
    cov[1] /= n;
    cov[2] = cov[1];
    cov[3] /= n;
    (mean, cov)
}

/// Keeps the covariance comfortably positive definite.
fn regularize(mut cov: [f64; 4]) -> [f64; 4] {
    let floor = STD_FLOOR * STD_FLOOR;
    cov[0] = cov[0].max(floor);
    cov[3] = cov[3].max(floor);
    // cap correlation magnitude at ~0.999
    let max_off = 0.999 * (cov[0] * cov[3]).sqrt();
    cov[1] = cov[1].clamp(-max_off, max_off);
    cov[2] = cov[1];
    cov
}

fn posterior_2d(
    p: &[f64; 2],
    weights: &[f64],
    means: &[[f64; 2]],
    covs: &[[f64; 4]],
    out: &mut [f64],
) -> f64 {
    let m = weights.len();
    let mut max_lp = f64::NEG_INFINITY;
    for c in 0..m {
        let lp = if weights[c] > 0.0 {
            weights[c].ln() + log_normal2_pdf(p, &means[c], &covs[c])
        } else {
            f64::NEG_INFINITY
        };
        out[c] = lp;
        max_lp = max_lp.max(lp);
    }
    if !max_lp.is_finite() {
        let u = 1.0 / m as f64;
        out.iter_mut().for_each(|r| *r = u);
        return f64::NEG_INFINITY;
    }
    let mut total = 0.0;
    for r in out.iter_mut() {
        *r = (*r - max_lp).exp();
        total += *r;
    }
    for r in out.iter_mut() {
        *r /= total;
    }
    max_lp + total.ln()
}

fn log_normal2_pdf(p: &[f64; 2], mean: &[f64; 2], cov: &[f64; 4]) -> f64 {
    let det = cov[0] * cov[3] - cov[1] * cov[2];
    let det = det.max(1e-300);
    let inv = [cov[3] / det, -cov[1] / det, -cov[2] / det, cov[0] / det];
    let dx = p[0] - mean[0];
    let dy = p[1] - mean[1];
    let quad = inv[0] * dx * dx + (inv[1] + inv[2]) * dx * dy + inv[3] * dy * dy;
    -0.5 * quad - 0.5 * det.ln() - (2.0 * std::f64::consts::PI).ln()
}

fn kmeans_pp_2d(points: &[[f64; 2]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let sample: Vec<[f64; 2]> = if points.len() > KMEANS_SUBSAMPLE {
        (0..KMEANS_SUBSAMPLE)
            .map(|_| points[rng.random_range(0..points.len())])
            .collect()
    } else {
        points.to_vec()
    };
    let dist2 = |a: &[f64; 2], b: &[f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    let mut centers = vec![sample[rng.random_range(0..sample.len())]];
    let mut d2: Vec<f64> = sample.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = sample.len() - 1;
        for (i, &d) in d2.iter().enumerate() {
            if u < d {
                pick = i;
                break;
            }
            u -= d;
        }
        let c = sample[pick];
        centers.push(c);
        for (i, p) in sample.iter().enumerate() {
            d2[i] = d2[i].min(dist2(p, &c));
        }
    }
    centers
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_input_collapses_to_one_spike() {
        let g = Gmm1::fit(&[5.0; 40], 10, 1);
        assert_eq!(g.component_count(), 1);
        assert_eq!(g.means[0], 5.0);
        assert!(g.stds[0] > 0.0);
    }

    #[test]
    fn weights_sum_to_one_and_stds_positive() {
        let values: Vec<f64> = (0..500).map(|i| (i % 7) as f64 + 0.1 * (i as f64).sin()).collect();
        let g = Gmm1::fit(&values, 5, 3);
        let total: f64 = g.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(g.stds.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn recovers_two_well_separated_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut values = Vec::new();
        for _ in 0..1000 {
            let z: f64 = StandardNormal.sample(&mut rng);
            values.push(1.0 + 0.1 * z);
        }
        for _ in 0..1000 {
            let z: f64 = StandardNormal.sample(&mut rng);
            values.push(100.0 + 1.0 * z);
        }
        let g = Gmm1::fit(&values, 2, 7);
        assert_eq!(g.component_count(), 2);
        let mut comps: Vec<(f64, f64)> = g.means.iter().cloned().zip(g.weights.iter().cloned()).collect();
        comps.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        assert!((comps[0].0 - 1.0).abs() < 0.5, "low mean {}", comps[0].0);
        assert!((comps[1].0 - 100.0).abs() < 0.5, "high mean {}", comps[1].0);
        assert!((comps[0].1 - 0.5).abs() < 0.1);
        assert!((comps[1].1 - 0.5).abs() < 0.1);
    }

    #[test]
    fn gmm2_single_point_is_a_spike() {
        let g = Gmm2::fit(&[[3.0, 4.0]], 10, 0);
        assert_eq!(g.component_count(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let s = g.sample(&mut rng);
            assert!((s[0] - 3.0).abs() < 1e-3);
            assert!((s[1] - 4.0).abs() < 1e-3);
        }
    }

    #[test]
    fn gmm2_samples_track_the_fitted_cloud() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let points: Vec<[f64; 2]> = (0..2000)
            .map(|_| {
                let z0: f64 = StandardNormal.sample(&mut rng);
                let z1: f64 = StandardNormal.sample(&mut rng);
                if rng.random::<f64>() < 0.5 {
                    [z0, 10.0 + z1]
                } else {
                    [20.0 + z0, z1]
                }
            })
            .collect();
        let g = Gmm2::fit(&points, 2, 3);
        let mut sample_mean = [0.0; 2];
        let count = 4000;
        for _ in 0..count {
            let s = g.sample(&mut rng);
            sample_mean[0] += s[0];
            sample_mean[1] += s[1];
        }
        sample_mean[0] /= count as f64;
        sample_mean[1] /= count as f64;
        let mut data_mean = [0.0; 2];
        for p in &points {
            data_mean[0] += p[0];
            data_mean[1] += p[1];
        }
        data_mean[0] /= points.len() as f64;
        data_mean[1] /= points.len() as f64;
        assert!((sample_mean[0] - data_mean[0]).abs() < 1.0);
        assert!((sample_mean[1] - data_mean[1]).abs() < 1.0);
    }
}
