//! Multinomial logistic regression standing in for a deep classifier.
//!
//! Supplies predictions, hypothesized labels, last-layer gradient embeddings
//! and uncertainty scores. Training is full-batch and deterministic.

use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::similarity::EmbeddingMatrix;

const MAX_HALVINGS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
    /// Standard deviation of the initial weights.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 300,
            l2: 1e-4,
            seed: 0,
            init_scale: 0.01,
        }
    }
}

/// Softmax classifier `p = softmax(W [x; 1])` with `W` of shape `C × (d+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateModel {
    weights: Array2<f64>,
    config: TrainConfig,
    /// Learning-rate halvings used during training.
    halvings: usize,
    final_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyScores {
    pub entropy: Vec<f64>,
    pub margin: Vec<f64>,
    pub least_confidence: Vec<f64>,
}

fn augment(x: ArrayView2<f64>) -> Array2<f64> {
    let (m, d) = x.dim();
    let mut out = Array2::<f64>::ones((m, d + 1));
    out.slice_mut(s![.., ..d]).assign(&x);
    out
}

fn softmax_rows(mut logits: Array2<f64>) -> Array2<f64> {
    for mut row in logits.axis_iter_mut(Axis(0)) {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    logits
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

impl SurrogateModel {
    /// A model with explicit weights, mainly for tests.
    pub fn from_weights(weights: Array2<f64>) -> Self {
        Self {
            weights,
            config: TrainConfig::default(),
            halvings: 0,
            final_loss: f64::NAN,
        }
    }

    /// Trains from a fresh seeded initialization.
    ///
    /// Examples are put in a canonical order first, so the result does not
    /// depend on how the training set is listed.
    pub fn train(
        features: ArrayView2<f64>,
        labels: &[usize],
        num_classes: usize,
        config: &TrainConfig,
    ) -> Result<Self> {
        let (m, d) = features.dim();
        if m == 0 {
            return Err(Error::config("empty training set"));
        }
        if labels.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "{m} feature rows but {} labels",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::config(format!(
                "label {bad} outside [0, {num_classes})"
            )));
        }
        if labels.iter().all(|&y| y == labels[0]) {
            return Err(Error::config("training set contains a single class"));
        }
        if !(config.learning_rate > 0.0) || config.l2 < 0.0 {
            return Err(Error::config("learning rate must be positive and l2 nonnegative"));
        }

        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| {
            labels[a].cmp(&labels[b]).then_with(|| {
                features
                    .row(a)
                    .iter()
                    .zip(features.row(b).iter())
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| *o != Ordering::Equal)
                    .unwrap_or(Ordering::Equal)
            })
        });
        let x = augment(features.select(Axis(0), &order).view());
        let mut onehot = Array2::<f64>::zeros((m, num_classes));
        for (r, &i) in order.iter().enumerate() {
            onehot[[r, labels[i]]] = 1.0;
        }

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut w = Array2::from_shape_fn((num_classes, d + 1), |_| {
            config.init_scale * rng.sample::<f64, _>(StandardNormal)
        });
        let loss_of = |w: &Array2<f64>| -> (f64, Array2<f64>) {
            let p = softmax_rows(x.dot(&w.t()));
            let ce: f64 = p
                .axis_iter(Axis(0))
                .zip(onehot.axis_iter(Axis(0)))
                .map(|(pr, yr)| -pr.dot(&yr).max(f64::MIN_POSITIVE).ln())
                .sum::<f64>()
                / m as f64;
            let reg = 0.5 * config.l2 * w.slice(s![.., ..d]).iter().map(|v| v * v).sum::<f64>();
            (ce + reg, p)
        };

        let mut lr = config.learning_rate;
        let mut halvings = 0;
        let (mut loss, mut p) = loss_of(&w);
        for _ in 0..config.epochs {
            let mut grad = (&p - &onehot).t().dot(&x) / m as f64;
            grad.slice_mut(s![.., ..d])
                .scaled_add(config.l2, &w.slice(s![.., ..d]));
            let candidate = &w - &(lr * &grad);
            let (new_loss, new_p) = loss_of(&candidate);
            if new_loss <= loss {
                w = candidate;
                loss = new_loss;
                p = new_p;
            } else {
                if halvings == MAX_HALVINGS {
                    break;
                }
                halvings += 1;
                lr *= 0.5;
            }
        }
        Ok(Self {
            weights: w,
            config: *config,
            halvings,
            final_loss: loss,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols() - 1
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn halvings(&self) -> usize {
        self.halvings
    }

    pub fn final_loss(&self) -> f64 {
        self.final_loss
    }

    fn check_dim(&self, features: ArrayView2<f64>) -> Result<()> {
        if features.ncols() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "model expects {} features, got {}",
                self.dim(),
                features.ncols()
            )));
        }
        Ok(())
    }

    pub fn predict_proba(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_dim(features)?;
        Ok(softmax_rows(augment(features).dot(&self.weights.t())))
    }

    /// Argmax class per row, lowest index on ties.
    pub fn hypothesized_labels(&self, features: ArrayView2<f64>) -> Result<Vec<usize>> {
        let p = self.predict_proba(features)?;
        Ok(p.axis_iter(Axis(0))
            .map(|r| argmax(r.as_slice().expect("row-major")))
            .collect())
    }

    /// Argmax over the first `classes` classes only; used to ignore the
    /// appended OOD class at test time.
    pub fn predict_restricted(&self, features: ArrayView2<f64>, classes: usize) -> Result<Vec<usize>> {
        let p = self.predict_proba(features)?;
        let k = classes.min(self.num_classes());
        Ok(p.axis_iter(Axis(0))
            .map(|r| argmax(&r.as_slice().expect("row-major")[..k]))
            .collect())
    }

    /// Cross-entropy gradient with respect to `W` for each point, flattened
    /// class-major: row `i` is `(p_i - e_{y_i}) ⊗ [x_i; 1]`.
    pub fn gradient_embeddings(
        &self,
        features: ArrayView2<f64>,
        labels: &[usize],
    ) -> Result<EmbeddingMatrix> {
        let p = self.predict_proba(features)?;
        let (m, d) = features.dim();
        if labels.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "{m} feature rows but {} labels",
                labels.len()
            )));
        }
        let c = self.num_classes();
        let mut out = Array2::<f64>::zeros((m, c * (d + 1)));
        for i in 0..m {
            let y = labels[i];
            if y >= c {
                return Err(Error::config(format!("label {y} outside [0, {c})")));
            }
            let mut row = out.row_mut(i);
            let row = row.as_slice_mut().expect("row-major");
            // p_y - 1 written as -Σ_{k≠y} p_k avoids cancellation when p_y ≈ 1.
            let rest: f64 = (0..c).filter(|&k| k != y).map(|k| p[[i, k]]).sum();
            for k in 0..c {
                let r = if k == y { -rest } else { p[[i, k]] };
                let block = &mut row[k * (d + 1)..(k + 1) * (d + 1)];
                for (b, &x) in block.iter_mut().zip(features.row(i).iter()) {
                    *b = r * x;
                }
                block[d] = r;
            }
        }
        EmbeddingMatrix::from_rows(out)
    }

    /// Per-point cross-entropy `-ln p_y`.
    pub fn point_losses(&self, features: ArrayView2<f64>, labels: &[usize]) -> Result<Vec<f64>> {
        self.check_dim(features)?;
        if labels.len() != features.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        // Log-sum-exp around the top logit keeps full precision when p_y is
        // close to 1.
        let z = augment(features).dot(&self.weights.t());
        Ok(labels
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                let row = z.row(i);
                let m = argmax(row.as_slice().expect("row-major"));
                let tail: f64 = (0..row.len())
                    .filter(|&k| k != m)
                    .map(|k| (row[k] - row[m]).exp())
                    .sum();
                (row[m] - row[y]) + tail.ln_1p()
            })
            .collect())
    }

    pub fn uncertainty(&self, features: ArrayView2<f64>) -> Result<UncertaintyScores> {
        Ok(uncertainty_from_proba(&self.predict_proba(features)?))
    }

    /// Fraction of rows whose prediction matches `labels`; with `restrict`
    /// the argmax runs over the first that many classes only.
    pub fn accuracy(
        &self,
        features: ArrayView2<f64>,
        labels: &[usize],
        restrict: Option<usize>,
    ) -> Result<f64> {
        if labels.is_empty() {
            return Ok(0.0);
        }
        let pred = match restrict {
            Some(k) => self.predict_restricted(features, k)?,
            None => self.hypothesized_labels(features)?,
        };
        let hits = pred.iter().zip(labels).filter(|(a, b)| a == b).count();
        Ok(hits as f64 / labels.len() as f64)
    }

    /// Writes the weight matrix as CSV, one class per line.
    pub fn write_weights_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        let d = self.dim();
        let header: Vec<String> = (0..d).map(|j| format!("w{j}")).chain(["bias".into()]).collect();
        writeln!(f, "class,{}", header.join(","))?;
        for (k, row) in self.weights.axis_iter(Axis(0)).enumerate() {
            let vals: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(f, "{k},{}", vals.join(","))?;
        }
        f.flush()?;
        Ok(())
    }
}

pub fn uncertainty_from_proba(p: &Array2<f64>) -> UncertaintyScores {
    let mut entropy = Vec::with_capacity(p.nrows());
    let mut margin = Vec::with_capacity(p.nrows());
    let mut least_confidence = Vec::with_capacity(p.nrows());
    for row in p.axis_iter(Axis(0)) {
        entropy.push(
            -row.iter()
                .filter(|&&v| v > 0.0)
                .map(|&v| v * v.ln())
                .sum::<f64>(),
        );
        let (mut first, mut second) = (0.0f64, 0.0f64);
        for &v in row {
            if v > first {
                second = first;
                first = v;
            } else if v > second {
                second = v;
            }
        }
        margin.push(first - second);
        least_confidence.push(1.0 - first);
    }
    UncertaintyScores {
        entropy,
        margin,
        least_confidence,
    }
}

/// Central-difference gradient of the per-point loss with respect to every
/// weight, flattened like [`SurrogateModel::gradient_embeddings`].
pub fn numeric_gradient(model: &SurrogateModel, x: &Array1<f64>, y: usize, step: f64) -> Vec<f64> {
    let feats = x.clone().insert_axis(Axis(0));
    let loss = |w: &Array2<f64>| {
        SurrogateModel::from_weights(w.clone())
            .point_losses(feats.view(), &[y])
            .expect("dimension checked")[0]
    };
    let mut w = model.weights.clone();
    let mut out = Vec::with_capacity(w.len());
    for k in 0..w.nrows() {
        for j in 0..w.ncols() {
            let orig = w[[k, j]];
            w[[k, j]] = orig + step;
            let plus = loss(&w);
            w[[k, j]] = orig - step;
            let minus = loss(&w);
            w[[k, j]] = orig;
            out.push((plus - minus) / (2.0 * step));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;

    fn blobs(seed: u64, per: usize) -> (Array2<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::<f64>::zeros((2 * per, 2));
        let mut y = Vec::new();
        for i in 0..2 * per {
            let c = i / per;
            let center = if c == 0 { -2.0 } else { 2.0 };
            x[[i, 0]] = center + 0.5 * rng.sample::<f64, _>(StandardNormal);
            x[[i, 1]] = 0.5 * rng.sample::<f64, _>(StandardNormal);
            y.push(c);
        }
        (x, y)
    }

    #[test]
    fn separable_blobs_are_learned() {
        let (x, y) = blobs(1, 50);
        let m = SurrogateModel::train(x.view(), &y, 2, &TrainConfig::default()).unwrap();
        assert!(m.accuracy(x.view(), &y, None).unwrap() >= 0.98);
    }

    #[test]
    fn training_is_deterministic_and_order_free() {
        let (x, y) = blobs(2, 20);
        let cfg = TrainConfig {
            seed: 5,
            epochs: 50,
            ..Default::default()
        };
        let a = SurrogateModel::train(x.view(), &y, 2, &cfg).unwrap();
        let b = SurrogateModel::train(x.view(), &y, 2, &cfg).unwrap();
        assert_eq!(a.weights(), b.weights());
        let perm: Vec<usize> = (0..40).rev().collect();
        let xp = x.select(Axis(0), &perm);
        let yp: Vec<usize> = perm.iter().map(|&i| y[i]).collect();
        let c = SurrogateModel::train(xp.view(), &yp, 2, &cfg).unwrap();
        assert_eq!(a.weights(), c.weights());
    }

    #[test]
    fn degenerate_training_sets_are_rejected() {
        let x = array![[0.0, 1.0], [1.0, 0.0]];
        let cfg = TrainConfig::default();
        assert!(SurrogateModel::train(x.view(), &[1, 1], 2, &cfg).is_err());
        assert!(SurrogateModel::train(x.slice(s![..0, ..]), &[], 2, &cfg).is_err());
        assert!(SurrogateModel::train(x.view(), &[0, 2], 2, &cfg).is_err());
    }

    #[test]
    fn zero_weights_give_uniform_rows() {
        let m = SurrogateModel::from_weights(Array2::zeros((4, 3)));
        let p = m.predict_proba(array![[1.0, -2.0], [0.3, 0.1]].view()).unwrap();
        assert!(p.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        assert_eq!(m.hypothesized_labels(array![[1.0, 2.0]].view()).unwrap(), vec![0]);
        assert!(m.predict_proba(array![[1.0]].view()).is_err());
    }

    #[test]
    fn large_logit_dominates() {
        let mut prev = 0.0;
        for logit in [1.0, 5.0, 20.0, 50.0] {
            let mut w = Array2::zeros((3, 2));
            w[[1, 1]] = logit;
            let p = SurrogateModel::from_weights(w)
                .predict_proba(array![[0.0]].view())
                .unwrap();
            assert!((p.row(0).sum() - 1.0).abs() < 1e-12);
            assert!(p[[0, 1]] > prev);
            prev = p[[0, 1]];
        }
        assert!(prev >= 1.0 - 1e-15);
    }

    #[test]
    fn uncertainty_examples() {
        let u = uncertainty_from_proba(&Array2::from_elem((1, 10), 0.1));
        assert!((u.entropy[0] - 10f64.ln()).abs() < 1e-12);
        let u = uncertainty_from_proba(&array![[0.0, 1.0, 0.0]]);
        assert_eq!((u.entropy[0], u.margin[0], u.least_confidence[0]), (0.0, 1.0, 0.0));
        let u = uncertainty_from_proba(&array![[0.6, 0.4]]);
        assert!((u.margin[0] - 0.2).abs() < 1e-15);
        assert!((u.least_confidence[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn gradient_embedding_shape_and_zero_case() {
        let mut w = Array2::zeros((3, 3));
        w[[2, 2]] = 1000.0;
        let m = SurrogateModel::from_weights(w);
        let x = array![[0.5, -1.0], [1.0, 1.0]];
        let e = m.gradient_embeddings(x.view(), &[2, 0]).unwrap();
        assert_eq!(e.dim(), 9);
        assert!(e.row(0).iter().all(|&v| v == 0.0));
        assert!(e.row(1).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = Array2::from_shape_fn((4, 6), |_| rng.sample::<f64, _>(StandardNormal));
        let m = SurrogateModel::from_weights(w);
        for _ in 0..20 {
            let x: Array1<f64> = (0..5).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let y = rng.random_range(0..4);
            let e = m
                .gradient_embeddings(x.clone().insert_axis(Axis(0)).view(), &[y])
                .unwrap();
            let num = numeric_gradient(&m, &x, y, 1e-6);
            for (a, b) in e.row(0).iter().zip(&num) {
                assert!((a - b).abs() <= 1e-5 * a.abs().max(1e-3), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn appending_a_class_keeps_id_ordering_at_zero() {
        let x = array![[0.2, 0.7]];
        let small = SurrogateModel::from_weights(Array2::zeros((3, 3)));
        let big = SurrogateModel::from_weights(Array2::zeros((4, 3)));
        assert_eq!(small.gradient_embeddings(x.view(), &[0]).unwrap().dim(), 9);
        assert_eq!(big.gradient_embeddings(x.view(), &[0]).unwrap().dim(), 12);
        assert_eq!(
            small.hypothesized_labels(x.view()).unwrap(),
            big.predict_restricted(x.view(), 3).unwrap()
        );
    }
}
