//! Gradient-boosted regression trees, squared loss, exact greedy splits.
//! Small and dependency-free; the alignment scorer persists these as plain
//! structured text.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        /// Index of the left child in the node arena; right = left + 1.
        left: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Depth-limited regression tree stored as a node arena, root at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *left + 1
                    };
                }
            }
        }
    }

    fn fit(
        columns: &[Vec<f64>],
        targets: &[f64],
        rows: Vec<u32>,
        max_depth: usize,
        min_leaf: usize,
    ) -> Self {
        let nodes = vec![TreeNode::Leaf { value: 0.0 }];
        let mut tree = Self { nodes };
        tree.grow(0, columns, targets, rows, max_depth, min_leaf);
        tree
    }

    fn grow(
        &mut self,
        at: usize,
        columns: &[Vec<f64>],
        targets: &[f64],
        rows: Vec<u32>,
        depth_left: usize,
        min_leaf: usize,
    ) {
        let mean = rows.iter().map(|&r| targets[r as usize]).sum::<f64>() / rows.len() as f64;
        if depth_left == 0 || rows.len() < 2 * min_leaf {
            self.nodes[at] = TreeNode::Leaf { value: mean };
            return;
        }
        let Some(split) = best_split(columns, targets, &rows, min_leaf) else {
            self.nodes[at] = TreeNode::Leaf { value: mean };
            return;
        };
        let (mut left_rows, mut right_rows) = (Vec::new(), Vec::new());
        for &r in &rows {
            if columns[split.feature][r as usize] <= split.threshold {
                left_rows.push(r);
            } else {
                right_rows.push(r);
            }
        }
        let left = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { value: 0.0 });
        self.nodes.push(TreeNode::Leaf { value: 0.0 });
        self.nodes[at] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
        };
        self.grow(left, columns, targets, left_rows, depth_left - 1, min_leaf);
        self.grow(left + 1, columns, targets, right_rows, depth_left - 1, min_leaf);
    }
}

struct Split {
    feature: usize,
    threshold: f64,
}

/// Exact greedy search over all features and thresholds, maximizing the
/// variance reduction of a squared-error split.
fn best_split(
    columns: &[Vec<f64>],
    targets: &[f64],
    rows: &[u32],
    min_leaf: usize,
) -> Option<Split> {
    let n = rows.len();
    let total_sum: f64 = rows.iter().map(|&r| targets[r as usize]).sum();
    let mut best_gain = 1e-12;
    let mut best: Option<Split> = None;
    let mut order: Vec<u32> = Vec::with_capacity(n);
    for (feature, column) in columns.iter().enumerate() {
        order.clear();
        order.extend_from_slice(rows);
        order.sort_unstable_by(|&a, &b| {
            column[a as usize]
                .partial_cmp(&column[b as usize])
                .expect("non-finite feature value")
        });
        let mut left_sum = 0.0;
        for i in 0..n - 1 {
            left_sum += targets[order[i] as usize];
            let here = column[order[i] as usize];
            let next = column[order[i + 1] as usize];
            if here == next {
                continue;
            }
            let left_n = i + 1;
            let right_n = n - left_n;
            if left_n < min_leaf || right_n < min_leaf {
                continue;
            }
            let right_sum = total_sum - left_sum;
            let gain = left_sum * left_sum / left_n as f64
                + right_sum * right_sum / right_n as f64
                - total_sum * total_sum / n as f64;
            if gain > best_gain {
                best_gain = gain;
                best = Some(Split {
                    feature,
                    threshold: here + 0.5 * (next - here),
                });
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub trees: usize,
    pub depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            trees: 200,
            depth: 4,
            learning_rate: 0.1,
            min_leaf: 1,
        }
    }
}

/// Additive tree ensemble: prediction = base + lr * sum of tree outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedScorer {
    pub base: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
    /// Training MSE after each boosting round (diagnostic).
    pub train_mse: Vec<f64>,
}

impl BoostedScorer {
    /// Trains on row-major inputs. Training MSE is non-increasing per added
    /// tree with any learning rate in (0, 2).
    pub fn train(rows: &[Vec<f64>], targets: &[f64], params: &BoostParams) -> Result<Self> {
        if rows.is_empty() || rows.len() != targets.len() {
            return Err(Error::Fit(format!(
                "scorer needs matched nonempty inputs, got {} rows / {} targets",
                rows.len(),
                targets.len()
            )));
        }
        if !(0.0..2.0).contains(&params.learning_rate) || params.learning_rate == 0.0 {
            return Err(Error::Fit(format!(
                "boosting learning rate must lie in (0, 2), got {}",
                params.learning_rate
            )));
        }
        let width = rows[0].len();
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Fit("ragged feature rows".to_string()));
        }
        let n = rows.len();
        let mut columns = vec![vec![0.0; n]; width];
        for (i, row) in rows.iter().enumerate() {
            for (f, &x) in row.iter().enumerate() {
                if !x.is_finite() {
                    return Err(Error::Fit(format!("non-finite feature value at row {i}")));
                }
                columns[f][i] = x;
            }
        }
        let base = targets.iter().sum::<f64>() / n as f64;
        let mut residuals: Vec<f64> = targets.iter().map(|&y| y - base).collect();
        let all_rows: Vec<u32> = (0..n as u32).collect();
        let mut trees = Vec::with_capacity(params.trees);
        let mut train_mse = Vec::with_capacity(params.trees);
        for _ in 0..params.trees {
            let tree = RegressionTree::fit(
                &columns,
                &residuals,
                all_rows.clone(),
                params.depth,
                params.min_leaf,
            );
            for (i, row) in rows.iter().enumerate() {
                residuals[i] -= params.learning_rate * tree.predict(row);
            }
            train_mse.push(residuals.iter().map(|r| r * r).sum::<f64>() / n as f64);
            trees.push(tree);
        }
        Ok(Self {
            base,
            learning_rate: params.learning_rate,
            trees,
            train_mse,
        })
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.base
            + self.learning_rate
                * self
                    .trees
                    .iter()
                    .map(|t| t.predict(row))
                    .sum::<f64>()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_rows(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| vec![i as f64, ((i * 7) % 13) as f64, ((i * 3) % 5) as f64])
            .collect()
    }

    #[test]
    fn constant_targets_degenerate_to_base() {
        let rows = grid_rows(50);
        let targets = vec![0.7; 50];
        let scorer = BoostedScorer::train(&rows, &targets, &BoostParams::default()).unwrap();
        for row in &rows {
            assert!((scorer.predict(row) - 0.7).abs() <= 1e-9);
        }
    }

    #[test]
    fn training_mse_is_monotone_non_increasing() {
        let rows = grid_rows(200);
        let targets: Vec<f64> = rows
            .iter()
            .map(|r| (r[0] * 0.03).sin() + 0.5 * r[1] - 0.2 * r[2])
            .collect();
        let scorer = BoostedScorer::train(
            &rows,
            &targets,
            &BoostParams {
                trees: 50,
                depth: 3,
                ..BoostParams::default()
            },
        )
        .unwrap();
        for pair in scorer.train_mse.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "MSE rose: {pair:?}");
        }
        assert!(scorer.train_mse[49] <= scorer.train_mse[0]);
    }

    #[test]
    fn step_function_is_learned_by_stumps() {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64]).collect();
        let targets: Vec<f64> = rows.iter().map(|r| if r[0] > 5.0 { 1.0 } else { 0.0 }).collect();
        let scorer = BoostedScorer::train(
            &rows,
            &targets,
            &BoostParams {
                trees: 100,
                depth: 1,
                ..BoostParams::default()
            },
        )
        .unwrap();
        assert!(
            *scorer.train_mse.last().unwrap() <= 1e-3,
            "final MSE {}",
            scorer.train_mse.last().unwrap()
        );
    }

    #[test]
    fn json_round_trip_preserves_predictions() {
        let rows = grid_rows(80);
        let targets: Vec<f64> = rows.iter().map(|r| r[0] - r[2]).collect();
        let scorer = BoostedScorer::train(
            &rows,
            &targets,
            &BoostParams {
                trees: 20,
                depth: 3,
                ..BoostParams::default()
            },
        )
        .unwrap();
        let back = BoostedScorer::from_json(&scorer.to_json().unwrap()).unwrap();
        for row in rows.iter().take(10) {
            assert_eq!(scorer.predict(row), back.predict(row));
        }
    }

    #[test]
    fn rejects_empty_and_ragged_inputs() {
        assert!(BoostedScorer::train(&[], &[], &BoostParams::default()).is_err());
        let rows = vec![vec![1.0, 2.0], vec![1.0]];
        assert!(BoostedScorer::train(&rows, &[0.0, 1.0], &BoostParams::default()).is_err());
    }
}
