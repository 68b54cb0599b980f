//! Reference learners: logistic regression, GLMTron with the sigmoid link,
//! and SLIsotron.

use serde::{Deserialize, Serialize};

use crate::chain::pava_isotonic;
use crate::data::{dot, Dataset};
use crate::error::{Error, Result};
use crate::loss::{sigmoid, softplus};
use crate::train::{mean_operator_gap, score_order};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Logistic,
    Glmtron,
    Slisotron,
}

/// Monotone score-to-probability table, interpolated linearly and clamped to
/// its end values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotonicTable {
    pub scores: Vec<f64>,
    pub values: Vec<f64>,
}

impl IsotonicTable {
    /// Fits PAVA to `labels` along sorted `scores`, pooling tied scores
    /// first so the table is a function of the score.
    pub fn fit(scores: &[f64], labels: &[f64]) -> Result<Self> {
        let order = score_order(scores);
        let mut table_scores = Vec::new();
        let mut sums = Vec::new();
        let mut counts = Vec::new();
        for &i in &order {
            if table_scores.last() == Some(&scores[i]) {
                *sums.last_mut().expect("non-empty") += labels[i];
                *counts.last_mut().expect("non-empty") += 1.0;
            } else {
                table_scores.push(scores[i]);
                sums.push(labels[i]);
                counts.push(1.0);
            }
        }
        let means: Vec<f64> = sums.iter().zip(&counts).map(|(s, c)| s / c).collect();
        let values = pava_isotonic(&means, &counts)?;
        Ok(Self {
            scores: table_scores,
            values,
        })
    }

    pub fn eval(&self, z: f64) -> f64 {
        let k = self.scores.partition_point(|&s| s <= z);
        if k == 0 {
            return self.values[0];
        }
        if k == self.scores.len() {
            return self.values[k - 1];
        }
        let (z0, z1) = (self.scores[k - 1], self.scores[k]);
        let (v0, v1) = (self.values[k - 1], self.values[k]);
        v0 + (v1 - v0) * (z - z0) / (z1 - z0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub kind: BaselineKind,
    pub w: Vec<f64>,
    pub table: Option<IsotonicTable>,
    /// Training squared loss of the returned iterate, where tracked.
    pub train_loss: Option<f64>,
    /// Weights after the final iteration, which may differ from `w`.
    pub last_w: Vec<f64>,
}

impl BaselineModel {
    /// `(wᵀx, probability)`.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let z = dot(x, &self.w);
        let p = match &self.table {
            Some(table) => table.eval(z),
            None => sigmoid(z),
        };
        (z, p)
    }

    /// A ranking key per example: the score for sigmoid models (the
    /// sigmoid is strictly increasing but rounds to 1 for large scores),
    /// the table probability otherwise.
    pub fn ranking(&self, dataset: &Dataset) -> Vec<f64> {
        dataset
            .rows()
            .map(|x| {
                let (z, p) = self.predict(x);
                if self.table.is_some() {
                    p
                } else {
                    z
                }
            })
            .collect()
    }
}

/// Mean logistic loss of `w`, labels in {0, 1}.
pub fn logistic_loss(dataset: &Dataset, w: &[f64]) -> f64 {
    dataset
        .rows()
        .zip(dataset.labels())
        .map(|(x, &y)| {
            let z = dot(x, w);
            if y == 1.0 {
                softplus(-z)
            } else {
                softplus(z)
            }
        })
        .sum::<f64>()
        / dataset.len() as f64
}

/// Gradient of [`logistic_loss`]: `E_S[(σ(wᵀx) − y) x]`.
pub fn logistic_gradient(dataset: &Dataset, w: &[f64]) -> Result<Vec<f64>> {
    let predictions: Vec<f64> = dataset.rows().map(|x| sigmoid(dot(x, w))).collect();
    Ok(mean_operator_gap(dataset, &predictions)?
        .into_iter()
        .map(|g| -g)
        .collect())
}

/// `4 / λ_max(E_S[x xᵀ])`, the reciprocal of the logistic loss's smoothness
/// constant, with the eigenvalue from power iteration.
pub fn logistic_step_size(dataset: &Dataset) -> f64 {
    let d = dataset.dim();
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut lambda = 0.0;
    for _ in 0..50 {
        let mut next = vec![0.0; d];
        for x in dataset.rows() {
            let s = dot(x, &v);
            for (acc, xi) in next.iter_mut().zip(x) {
                *acc += s * xi;
            }
        }
        let m = dataset.len() as f64;
        next.iter_mut().for_each(|a| *a /= m);
        let len = next.iter().map(|a| a * a).sum::<f64>().sqrt();
        if len == 0.0 {
            return 1.0;
        }
        lambda = len;
        v = next.into_iter().map(|a| a / len).collect();
    }
    4.0 / lambda
}

/// Full-batch gradient descent on the mean logistic loss from `w = 0`.
pub fn logistic_fit(dataset: &Dataset, epochs: usize, step_size: f64) -> Result<BaselineModel> {
    if !(step_size > 0.0 && step_size.is_finite()) {
        return Err(Error::domain(format!("step size must be positive, got {step_size}")));
    }
    let mut w = vec![0.0; dataset.dim()];
    for epoch in 0..epochs {
        let grad = logistic_gradient(dataset, &w)?;
        w.iter_mut().zip(&grad).for_each(|(wi, g)| *wi -= step_size * g);
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("logistic weights after epoch {epoch}")));
        }
    }
    let train_loss = Some(logistic_loss(dataset, &w));
    Ok(BaselineModel {
        kind: BaselineKind::Logistic,
        last_w: w.clone(),
        w,
        table: None,
        train_loss,
    })
}

fn squared_loss(labels: &[f64], predictions: &[f64]) -> f64 {
    labels
        .iter()
        .zip(predictions)
        .map(|(y, p)| (y - p) * (y - p))
        .sum::<f64>()
        / labels.len() as f64
}

/// One GLMTron update `w + E_S[(y − σ(wᵀx)) x]`.
pub fn glmtron_step(dataset: &Dataset, w: &[f64]) -> Result<Vec<f64>> {
    let predictions: Vec<f64> = dataset.rows().map(|x| sigmoid(dot(x, w))).collect();
    let gap = mean_operator_gap(dataset, &predictions)?;
    Ok(w.iter().zip(&gap).map(|(a, b)| a + b).collect())
}

/// `iterations` GLMTron updates from `w = 0`, returning the iterate with the
/// lowest training squared loss.
pub fn glmtron_fit(dataset: &Dataset, iterations: usize) -> Result<BaselineModel> {
    let mut w = vec![0.0; dataset.dim()];
    let mut best = (f64::INFINITY, w.clone());
    for _ in 0..=iterations {
        let predictions: Vec<f64> = dataset.rows().map(|x| sigmoid(dot(x, &w))).collect();
        let loss = squared_loss(dataset.labels(), &predictions);
        if loss < best.0 {
            best = (loss, w.clone());
        }
        let gap = mean_operator_gap(dataset, &predictions)?;
        w.iter_mut().zip(&gap).for_each(|(a, b)| *a += b);
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("GLMTron weights".into()));
        }
    }
    Ok(BaselineModel {
        kind: BaselineKind::Glmtron,
        w: best.1,
        table: None,
        train_loss: Some(best.0),
        last_w: w,
    })
}

/// SLIsotron: the gradient step with the current fitted values, then PAVA
/// of the labels along the new scores. Returns the iterate with the lowest
/// training squared loss.
pub fn slisotron_fit(dataset: &Dataset, iterations: usize) -> Result<BaselineModel> {
    if iterations == 0 {
        return Err(Error::domain("SLIsotron needs at least one iteration"));
    }
    let labels = dataset.labels();
    let mut w = vec![0.0; dataset.dim()];
    let mut fitted: Vec<f64> = Vec::new();
    let mut best: Option<(f64, Vec<f64>, IsotonicTable)> = None;
    for t in 0..iterations {
        if t > 0 {
            let gap = mean_operator_gap(dataset, &fitted)?;
            w.iter_mut().zip(&gap).for_each(|(a, b)| *a += b);
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("SLIsotron weights at iteration {t}")));
            }
        }
        let scores = dataset.scores(&w);
        let table = IsotonicTable::fit(&scores, labels)?;
        fitted = scores.iter().map(|&z| table.eval(z)).collect();
        let loss = squared_loss(labels, &fitted);
        if best.as_ref().map_or(true, |(b, _, _)| loss < *b) {
            best = Some((loss, w.clone(), table));
        }
    }
    let (loss, best_w, table) = best.expect("at least one iteration");
    Ok(BaselineModel {
        kind: BaselineKind::Slisotron,
        w: best_w,
        table: Some(table),
        train_loss: Some(loss),
        last_w: w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_interpolates_and_clamps() {
        let table = IsotonicTable::fit(&[0.0, 1.0, 1.0, 2.0], &[0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(table.scores, vec![0.0, 1.0, 2.0]);
        assert_eq!(table.values, vec![0.0, 0.5, 1.0]);
        assert_eq!(table.eval(-5.0), 0.0);
        assert_eq!(table.eval(1.5), 0.75);
        assert_eq!(table.eval(9.0), 1.0);
    }

    #[test]
    fn predictions_follow_their_links() {
        let model = BaselineModel {
            kind: BaselineKind::Logistic,
            w: vec![1.0],
            table: None,
            train_loss: None,
            last_w: vec![1.0],
        };
        assert_eq!(model.predict(&[0.0]).1, 0.5);
        assert!(model.predict(&[50.0]).1 > 1.0 - 1e-12);
    }

    #[test]
    fn separable_logistic_loss_vanishes() {
        let d = Dataset::new(vec![1.0, -1.0], vec![1.0, 0.0], 1).unwrap();
        let short = logistic_fit(&d, 10, 1.0).unwrap().train_loss.unwrap();
        let long = logistic_fit(&d, 2000, 1.0).unwrap().train_loss.unwrap();
        assert!(long < short && long < 1e-2);
    }

    #[test]
    fn glmtron_fixed_point_at_perfect_fit() {
        // σ(0) = 1/2 matches every label exactly
        let d = Dataset::new(vec![1.0, 1.0], vec![1.0, 0.0], 1).unwrap();
        assert_eq!(glmtron_step(&d, &[0.0]).unwrap(), vec![0.0]);
    }
}
