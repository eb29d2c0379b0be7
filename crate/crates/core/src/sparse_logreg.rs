//! L1-regularized logistic regression whose predicted probability is the
//! mistrust score.
//!
//! The fitted objective is
//!
//! ```text
//! F(w, b) = sum_i s_i * log(1 + exp(-y_i (w.x_i + b))) + ||w||_1 / C,   y_i in {-1, +1}
//! ```
//!
//! with per-sample weights `s_i` (all 1 unless class weighting is on) and an
//! unpenalized intercept. It is minimized by accelerated proximal gradient
//! (soft-thresholding prox, backtracking line search). An iterate is only
//! accepted if it does not increase `F`; otherwise momentum is reset, so the
//! objective trace is non-increasing.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chart_features::FeatureMatrix;
use crate::data_model::write_csv;
use crate::error::{Error, Result};
use crate::noncompliance::LabelVector;

pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_ITER: usize = 5000;

const INTERCEPT_ROW: &str = "__intercept__";
const C_ROW: &str = "__C__";
const ITERATIONS_ROW: &str = "__iterations__";
const OBJECTIVE_ROW: &str = "__objective__";
const CONVERGED_ROW: &str = "__converged__";

/// `log(1 + exp(-t))` without overflow.
fn log1p_exp_neg(t: f64) -> f64 {
    if t > 0.0 {
        (-t).exp().ln_1p()
    } else {
        -t + t.exp().ln_1p()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn soft_threshold(v: f64, threshold: f64) -> f64 {
    if v > threshold {
        v - threshold
    } else if v < -threshold {
        v + threshold
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassWeight {
    #[default]
    None,
    /// `n / (2 * n_class)` per sample, as in the common "balanced" heuristic.
    Balanced,
}

/// Design matrix in sparse row form with `{-1, +1}` targets.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    rows: Vec<Vec<(u32, f64)>>,
    n_features: usize,
    targets: Vec<f64>,
    sample_weights: Vec<f64>,
}

impl TrainingSet {
    pub fn from_sparse(
        rows: Vec<Vec<(u32, f64)>>,
        n_features: usize,
        labels: &[bool],
    ) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                found: labels.len(),
            });
        }
        for row in &rows {
            for &(j, v) in row {
                if j as usize >= n_features {
                    return Err(Error::DimensionMismatch {
                        expected: n_features,
                        found: j as usize + 1,
                    });
                }
                if !v.is_finite() {
                    return Err(Error::NonFinite("design matrix"));
                }
            }
        }
        Ok(TrainingSet {
            rows,
            n_features,
            targets: labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect(),
            sample_weights: vec![1.0; labels.len()],
        })
    }

    pub fn from_dense(x: &[Vec<f64>], labels: &[bool]) -> Result<Self> {
        let d = x.first().map_or(0, Vec::len);
        let mut rows = Vec::with_capacity(x.len());
        for r in x {
            if r.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: r.len(),
                });
            }
            rows.push(
                r.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, &v)| (j as u32, v))
                    .collect(),
            );
        }
        Self::from_sparse(rows, d, labels)
    }

    /// Pairs every matrix row with its label; a row without a label is an error.
    pub fn from_features(x: &FeatureMatrix, labels: &LabelVector) -> Result<Self> {
        let mut y = Vec::with_capacity(x.n_rows());
        for id in x.row_ids() {
            match labels.get(id) {
                Some(&l) => y.push(l),
                None => {
                    return Err(Error::InvalidArgument(format!(
                        "no noncompliance label for admission `{id}`"
                    )))
                }
            }
        }
        let rows = x
            .rows()
            .iter()
            .map(|r| r.iter().map(|&j| (j, 1.0)).collect())
            .collect();
        Self::from_sparse(rows, x.n_cols(), &y)
    }

    pub fn with_class_weight(mut self, weighting: ClassWeight) -> Self {
        match weighting {
            ClassWeight::None => self.sample_weights.iter_mut().for_each(|s| *s = 1.0),
            ClassWeight::Balanced => {
                let n = self.targets.len() as f64;
                let pos = self.targets.iter().filter(|&&t| t > 0.0).count() as f64;
                let neg = n - pos;
                for (s, &t) in self.sample_weights.iter_mut().zip(&self.targets) {
                    let class_n = if t > 0.0 { pos } else { neg };
                    *s = if class_n > 0.0 { n / (2.0 * class_n) } else { 0.0 };
                }
            }
        }
        self
    }

    pub fn n_samples(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    fn check_params(&self, w: &[f64], b: f64) -> Result<()> {
        if w.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: w.len(),
            });
        }
        if !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model parameters"));
        }
        Ok(())
    }

    fn margins_into(&self, w: &[f64], b: f64, out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.rows
                .iter()
                .map(|r| b + r.iter().map(|&(j, v)| w[j as usize] * v).sum::<f64>()),
        );
    }

    fn loss_from_margins(&self, margins: &[f64]) -> f64 {
        margins
            .iter()
            .zip(&self.targets)
            .zip(&self.sample_weights)
            .map(|((m, y), s)| s * log1p_exp_neg(y * m))
            .sum()
    }

    fn gradient_from_margins(&self, margins: &[f64], grad_w: &mut [f64]) -> f64 {
        grad_w.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (((row, m), y), s) in self
            .rows
            .iter()
            .zip(margins)
            .zip(&self.targets)
            .zip(&self.sample_weights)
        {
            let coef = -s * y * sigmoid(-y * m);
            grad_b += coef;
            for &(j, v) in row {
                grad_w[j as usize] += coef * v;
            }
        }
        grad_b
    }

    /// Weighted logistic loss without the penalty.
    pub fn smooth_loss(&self, w: &[f64], b: f64) -> Result<f64> {
        self.check_params(w, b)?;
        let mut m = Vec::with_capacity(self.rows.len());
        self.margins_into(w, b, &mut m);
        Ok(self.loss_from_margins(&m))
    }

    /// Gradient of [`Self::smooth_loss`] as `(d/dw, d/db)`.
    pub fn smooth_gradient(&self, w: &[f64], b: f64) -> Result<(Vec<f64>, f64)> {
        self.check_params(w, b)?;
        let mut m = Vec::with_capacity(self.rows.len());
        self.margins_into(w, b, &mut m);
        let mut g = vec![0.0; self.n_features];
        let gb = self.gradient_from_margins(&m, &mut g);
        Ok((g, gb))
    }

    /// Intercept minimizing the loss when all weights are zero.
    pub fn intercept_only_optimum(&self) -> f64 {
        let (mut pos, mut total) = (0.0, 0.0);
        for (y, s) in self.targets.iter().zip(&self.sample_weights) {
            total += s;
            if *y > 0.0 {
                pos += s;
            }
        }
        (pos / (total - pos)).ln()
    }

    /// Smallest penalty weight `1/C` at which `w = 0` is optimal:
    /// the sup-norm of the loss gradient in `w` at `(0, b*)`.
    pub fn lambda_max(&self) -> f64 {
        let b = self.intercept_only_optimum();
        let mut m = Vec::with_capacity(self.rows.len());
        self.margins_into(&vec![0.0; self.n_features], b, &mut m);
        let mut g = vec![0.0; self.n_features];
        self.gradient_from_margins(&m, &mut g);
        g.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
    }

    fn class_counts(&self) -> (usize, usize) {
        let pos = self.targets.iter().filter(|&&t| t > 0.0).count();
        (pos, self.targets.len() - pos)
    }
}

/// Full penalized objective.
pub fn objective(w: &[f64], b: f64, set: &TrainingSet, c: f64) -> Result<f64> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidArgument(format!("C must be positive and finite, got {c}")));
    }
    let loss = set.smooth_loss(w, b)?;
    Ok(loss + w.iter().map(|v| v.abs()).sum::<f64>() / c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Inverse regularization strength.
    pub c: f64,
    /// Relative objective change that counts as converged.
    pub tol: f64,
    pub max_iter: usize,
    pub class_weight: ClassWeight,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            c: DEFAULT_C,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            class_weight: ClassWeight::None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MistrustModel {
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub c: f64,
    pub iterations: usize,
    pub objective: f64,
    /// False when `max_iter` was reached before the tolerance was met.
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MistrustScore {
    pub admission_id: String,
    pub score: f64,
}

/// Fit plus the objective value after every iteration (index 0 is the start).
#[derive(Clone, Debug)]
pub struct FitTrace {
    pub model: MistrustModel,
    pub objective_trace: Vec<f64>,
}

pub fn fit(x: &FeatureMatrix, labels: &LabelVector, config: &FitConfig) -> Result<MistrustModel> {
    let set = TrainingSet::from_features(x, labels)?.with_class_weight(config.class_weight);
    let names = x.vocabulary().names().to_vec();
    Ok(fit_training_set(&set, names, config)?.model)
}

pub fn fit_training_set(
    set: &TrainingSet,
    feature_names: Vec<String>,
    config: &FitConfig,
) -> Result<FitTrace> {
    if !(config.c.is_finite() && config.c > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "C must be positive and finite, got {}",
            config.c
        )));
    }
    if !(config.tol.is_finite() && config.tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be >= 0, got {}", config.tol)));
    }
    if feature_names.len() != set.n_features {
        return Err(Error::DimensionMismatch {
            expected: set.n_features,
            found: feature_names.len(),
        });
    }
    let (pos, neg) = set.class_counts();
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass {
            positives: pos,
            negatives: neg,
        });
    }

    let d = set.n_features;
    let penalty = 1.0 / config.c;
    let l1 = |w: &[f64]| w.iter().map(|v| v.abs()).sum::<f64>() * penalty;

    // Start from the intercept-only optimum so that the all-zero solution is
    // recovered exactly when the penalty dominates.
    let mut x_w = vec![0.0; d];
    let mut x_b = set.intercept_only_optimum();
    let mut margins = Vec::with_capacity(set.n_samples());
    set.margins_into(&x_w, x_b, &mut margins);
    let mut x_obj = set.loss_from_margins(&margins) + l1(&x_w);

    let mut y_w = x_w.clone();
    let mut y_b = x_b;
    let mut momentum = 1.0_f64;

    let mut grad_w = vec![0.0; d];
    let mut z_w = vec![0.0; d];
    let mut z_margins = Vec::with_capacity(set.n_samples());
    let mut step = initial_step(set);

    let mut trace = vec![x_obj];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iter {
        iterations += 1;

        set.margins_into(&y_w, y_b, &mut margins);
        let y_loss = set.loss_from_margins(&margins);
        let grad_b = set.gradient_from_margins(&margins, &mut grad_w);

        step *= 1.25;
        let (z_b, z_loss) = loop {
            for j in 0..d {
                z_w[j] = soft_threshold(y_w[j] - step * grad_w[j], step * penalty);
            }
            let z_b = y_b - step * grad_b;
            set.margins_into(&z_w, z_b, &mut z_margins);
            let z_loss = set.loss_from_margins(&z_margins);
            // quadratic upper bound at y
            let mut lin = grad_b * (z_b - y_b);
            let mut sq = (z_b - y_b).powi(2);
            for j in 0..d {
                let diff = z_w[j] - y_w[j];
                lin += grad_w[j] * diff;
                sq += diff * diff;
            }
            if z_loss <= y_loss + lin + sq / (2.0 * step) || step < 1e-300 {
                break (z_b, z_loss);
            }
            step *= 0.5;
        };
        let z_obj = z_loss + l1(&z_w);

        if z_obj <= x_obj {
            let next_momentum = (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0;
            let beta = (momentum - 1.0) / next_momentum;
            for j in 0..d {
                y_w[j] = z_w[j] + beta * (z_w[j] - x_w[j]);
            }
            y_b = z_b + beta * (z_b - x_b);
            momentum = next_momentum;

            let change = x_obj - z_obj;
            x_w.copy_from_slice(&z_w);
            x_b = z_b;
            x_obj = z_obj;
            trace.push(x_obj);
            if change <= config.tol * x_obj.abs().max(1.0) {
                converged = true;
                break;
            }
        } else {
            // Reject the extrapolated step and restart momentum from x.
            y_w.copy_from_slice(&x_w);
            y_b = x_b;
            momentum = 1.0;
            trace.push(x_obj);
        }
    }

    Ok(FitTrace {
        model: MistrustModel {
            feature_names,
            weights: x_w,
            intercept: x_b,
            c: config.c,
            iterations,
            objective: x_obj,
            converged,
        },
        objective_trace: trace,
    })
}

/// `1/L` for the Frobenius bound on the Lipschitz constant of the loss gradient.
fn initial_step(set: &TrainingSet) -> f64 {
    let frob: f64 = set
        .rows
        .iter()
        .zip(&set.sample_weights)
        .map(|(r, s)| s * (1.0 + r.iter().map(|(_, v)| v * v).sum::<f64>()))
        .sum();
    if frob > 0.0 {
        4.0 / frob
    } else {
        1.0
    }
}

impl MistrustModel {
    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    /// `sigmoid(w.x + b)` for a dense feature vector in model column order.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                found: x.len(),
            });
        }
        let z = self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        if !z.is_finite() {
            return Err(Error::NonFinite("linear predictor"));
        }
        Ok(sigmoid(z))
    }

    /// Scores every row of `x`, matching columns to model features by name.
    /// Matrix columns unknown to the model contribute nothing.
    pub fn score_matrix(&self, x: &FeatureMatrix) -> Vec<MistrustScore> {
        let by_name: HashMap<&str, f64> = self
            .feature_names
            .iter()
            .map(String::as_str)
            .zip(self.weights.iter().copied())
            .collect();
        let col_weight: Vec<f64> = x
            .vocabulary()
            .names()
            .iter()
            .map(|name| by_name.get(name.as_str()).copied().unwrap_or(0.0))
            .collect();
        x.row_ids()
            .iter()
            .zip(x.rows())
            .map(|(id, row)| {
                let z = self.intercept + row.iter().map(|&j| col_weight[j as usize]).sum::<f64>();
                MistrustScore {
                    admission_id: id.clone(),
                    score: sigmoid(z),
                }
            })
            .collect()
    }

    pub fn top_features(&self, k: usize) -> Result<TopFeatures> {
        if k == 0 {
            return Err(Error::InvalidArgument("top_features needs k >= 1".into()));
        }
        let mut order: Vec<usize> = (0..self.weights.len()).collect();
        order.sort_by(|&a, &b| {
            self.weights[b]
                .total_cmp(&self.weights[a])
                .then_with(|| self.feature_names[a].cmp(&self.feature_names[b]))
        });
        let positive: Vec<usize> = order.iter().copied().take(k).collect();
        let mut rest: Vec<usize> = order.into_iter().skip(k).collect();
        rest.sort_by(|&a, &b| {
            self.weights[a]
                .total_cmp(&self.weights[b])
                .then_with(|| self.feature_names[a].cmp(&self.feature_names[b]))
        });
        let entry = |i: usize| WeightedFeature {
            feature: self.feature_names[i].clone(),
            weight: self.weights[i],
        };
        Ok(TopFeatures {
            positive: positive.into_iter().map(entry).collect(),
            negative: rest.into_iter().take(k).map(entry).collect(),
        })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let dir = path.parent().unwrap_or(Path::new("."));
        let file = path.file_name().and_then(|f| f.to_str()).unwrap_or("model.csv");
        write_csv(dir, file, |w| {
            w.write_record(["feature_name", "weight"])?;
            w.write_record([INTERCEPT_ROW, &self.intercept.to_string()])?;
            w.write_record([C_ROW, &self.c.to_string()])?;
            w.write_record([ITERATIONS_ROW, &self.iterations.to_string()])?;
            w.write_record([OBJECTIVE_ROW, &self.objective.to_string()])?;
            w.write_record([CONVERGED_ROW, if self.converged { "1" } else { "0" }])?;
            for (name, weight) in self.feature_names.iter().zip(&self.weights) {
                w.write_record([name.as_str(), &weight.to_string()])?;
            }
            Ok(())
        })
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = path.display().to_string();
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let mut model = MistrustModel {
            feature_names: Vec::new(),
            weights: Vec::new(),
            intercept: f64::NAN,
            c: f64::NAN,
            iterations: 0,
            objective: f64::NAN,
            converged: false,
        };
        let mut features: Vec<(String, f64)> = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::csv(path, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            let name = rec.get(0).unwrap_or("");
            let raw = rec.get(1).unwrap_or("").trim();
            let value: f64 = raw.parse().map_err(|_| Error::Row {
                file: file.clone(),
                row: line,
                message: format!("unparseable weight {raw:?}"),
            })?;
            match name {
                INTERCEPT_ROW => model.intercept = value,
                C_ROW => model.c = value,
                ITERATIONS_ROW => model.iterations = value as usize,
                OBJECTIVE_ROW => model.objective = value,
                CONVERGED_ROW => model.converged = value != 0.0,
                _ => features.push((name.to_string(), value)),
            }
        }
        if !model.intercept.is_finite() {
            return Err(Error::Schema {
                file,
                column: INTERCEPT_ROW.into(),
            });
        }
        features.sort_by(|a, b| a.0.cmp(&b.0));
        if features.windows(2).any(|p| p[0].0 == p[1].0) {
            return Err(Error::InvalidArgument(format!("{file}: duplicate feature rows")));
        }
        (model.feature_names, model.weights) = features.into_iter().unzip();
        Ok(model)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedFeature {
    pub feature: String,
    pub weight: f64,
}

/// `positive` holds the k largest weights (descending); `negative` the k
/// smallest of the remaining features (ascending). Ties break by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopFeatures {
    pub positive: Vec<WeightedFeature>,
    pub negative: Vec<WeightedFeature>,
}

pub fn write_scores_csv(path: impl AsRef<Path>, scores: &[MistrustScore]) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().unwrap_or(Path::new("."));
    let file = path.file_name().and_then(|f| f.to_str()).unwrap_or("scores.csv");
    write_csv(dir, file, |w| {
        w.write_record(["admission_id", "score"])?;
        for s in scores {
            w.write_record([s.admission_id.as_str(), &s.score.to_string()])?;
        }
        Ok(())
    })
}

pub fn read_scores_csv(path: impl AsRef<Path>) -> Result<Vec<MistrustScore>> {
    let path = path.as_ref();
    let file = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let raw = rec.get(1).unwrap_or("").trim();
        let score: f64 = raw
            .parse()
            .ok()
            .filter(|s: &f64| (0.0..=1.0).contains(s))
            .ok_or_else(|| Error::Row {
                file: file.clone(),
                row: line,
                message: format!("score must be a number in [0, 1], got {raw:?}"),
            })?;
        out.push(MistrustScore {
            admission_id: rec.get(0).unwrap_or("").trim().to_string(),
            score,
        });
    }
    Ok(out)
}
