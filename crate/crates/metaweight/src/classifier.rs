//! Image-classification models: a softmax linear classifier and the
//! single-layer perceptron that generates per-example weights.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{MetaExample, TaskModel, WeightModel};
use crate::ops::{argmax, sigmoid, softmax_cross_entropy};
use crate::tensor::{DenseMatrix, ParamVector};

pub const MNIST_FEATURES: usize = 784;
pub const MNIST_CLASSES: usize = 10;

/// A flattened image with its true label, the label shown to the model
/// (possibly corrupted), and a correctness indicator for related-task data.
#[derive(Debug, Clone)]
pub struct LabeledImage {
    pub pixels: Arc<Vec<f64>>,
    pub label: usize,
    pub shown_label: usize,
    pub indicator: Option<bool>,
}

impl LabeledImage {
    pub fn clean(pixels: Arc<Vec<f64>>, label: usize) -> Self {
        LabeledImage {
            pixels,
            label,
            shown_label: label,
            indicator: None,
        }
    }
}

impl MetaExample for LabeledImage {
    fn indicator(&self) -> Option<bool> {
        self.indicator
    }
}

/// Softmax linear classifier: logits = x W + b.
#[derive(Debug, Clone)]
pub struct LinearClassifier {
    params: ParamVector,
    features: usize,
    classes: usize,
}

impl LinearClassifier {
    pub fn new(features: usize, classes: usize) -> Self {
        // Convex problem: deterministic zero initialization.
        let params = ParamVector::new(vec![
            ("W", DenseMatrix::zeros(features, classes)),
            ("b", DenseMatrix::zeros(1, classes)),
        ])
        .expect("fresh segments");
        LinearClassifier {
            params,
            features,
            classes,
        }
    }

    pub fn mnist() -> Self {
        let m = Self::new(MNIST_FEATURES, MNIST_CLASSES);
        assert_eq!(m.params.len(), 7850);
        m
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    fn logits_for(&self, pixels: &[f64]) -> Vec<f64> {
        let w = self.params.segment("W");
        let b = self.params.segment("b");
        let mut logits = b.data().to_vec();
        for (j, &x) in pixels.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (l, &wj) in logits.iter_mut().zip(w.row(j)) {
                *l += x * wj;
            }
        }
        logits
    }

    /// Mean loss, per-example losses and the logit matrix for a batch.
    pub fn classify_forward(
        &self,
        batch: &[&LabeledImage],
    ) -> Result<(f64, Vec<f64>, DenseMatrix)> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch("classify_forward".into()));
        }
        let mut losses = Vec::with_capacity(batch.len());
        let mut logits_all = DenseMatrix::zeros(batch.len(), self.classes);
        for (i, ex) in batch.iter().enumerate() {
            let logits = self.logits_for(&ex.pixels);
            let (loss, _) = softmax_cross_entropy(&logits, ex.shown_label)?;
            losses.push(loss);
            logits_all.row_mut(i).copy_from_slice(&logits);
        }
        let mean = losses.iter().sum::<f64>() / losses.len() as f64;
        Ok((mean, losses, logits_all))
    }

    /// Gradient of sum_i scale_i * L_i w.r.t. W and b. Linear in `scale`.
    pub fn classify_backward(
        &self,
        batch: &[&LabeledImage],
        scale: &[f64],
    ) -> Result<ParamVector> {
        if scale.len() != batch.len() {
            return Err(Error::Length {
                expected: batch.len(),
                got: scale.len(),
                context: "classify_backward scale".into(),
            });
        }
        let mut grad = self.params.zeros_like();
        for (ex, &s) in batch.iter().zip(scale) {
            if s == 0.0 {
                continue;
            }
            let logits = self.logits_for(&ex.pixels);
            let (_, mut d) = softmax_cross_entropy(&logits, ex.shown_label)?;
            for dk in d.iter_mut() {
                *dk *= s;
            }
            let gw = grad.segment_mut("W");
            for (j, &x) in ex.pixels.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                for (g, &dk) in gw.row_mut(j).iter_mut().zip(&d) {
                    *g += x * dk;
                }
            }
            let gb = grad.segment_mut("b").data_mut();
            for (g, &dk) in gb.iter_mut().zip(&d) {
                *g += dk;
            }
        }
        Ok(grad)
    }

    pub fn predict(&self, ex: &LabeledImage) -> usize {
        argmax(&self.logits_for(&ex.pixels))
    }
}

impl TaskModel for LinearClassifier {
    type Ex = LabeledImage;

    fn params(&self) -> &ParamVector {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamVector {
        &mut self.params
    }

    fn batch_losses(&self, batch: &[&LabeledImage]) -> Result<Vec<f64>> {
        Ok(self.classify_forward(batch)?.1)
    }

    fn grad_weighted(&self, batch: &[&LabeledImage], scale: &[f64]) -> Result<ParamVector> {
        self.classify_backward(batch, scale)
    }

    fn correct(&self, ex: &LabeledImage) -> bool {
        self.predict(ex) == ex.label
    }

    // g_i . v = d_i . (V_W^T x_i + v_b), avoiding per-example outer products.
    fn grad_dots(&self, batch: &[&LabeledImage], v: &ParamVector) -> Result<Vec<f64>> {
        let vw = v.segment("W");
        let vb = v.segment("b").data();
        batch
            .iter()
            .map(|ex| {
                let logits = self.logits_for(&ex.pixels);
                let (_, d) = softmax_cross_entropy(&logits, ex.shown_label)?;
                let mut t = vb.to_vec();
                for (j, &x) in ex.pixels.iter().enumerate() {
                    if x == 0.0 {
                        continue;
                    }
                    for (tk, &vjk) in t.iter_mut().zip(vw.row(j)) {
                        *tk += x * vjk;
                    }
                }
                Ok(d.iter().zip(&t).map(|(a, b)| a * b).sum())
            })
            .collect()
    }
}

/// Single-layer perceptron with a sigmoid output that maps
/// (image, shown label, correctness indicator) to a weight in (0,1).
#[derive(Debug, Clone)]
pub struct WeightPerceptron {
    params: ParamVector,
    features: usize,
    classes: usize,
}

impl WeightPerceptron {
    /// Input layout: image features ++ one-hot shown label ++ 2-dim one-hot
    /// indicator ([1,0] = correct, [0,1] = incorrect).
    pub fn new(features: usize, classes: usize, init_scale: f64, rng: &mut crate::rng::Rng) -> Self {
        let d = features + classes + 2;
        let mut v = DenseMatrix::zeros(d, 1);
        for x in v.data_mut() {
            *x = rng.uniform_range(-init_scale, init_scale);
        }
        let params = ParamVector::new(vec![("V", v), ("c", DenseMatrix::zeros(1, 1))])
            .expect("fresh segments");
        WeightPerceptron {
            params,
            features,
            classes,
        }
    }

    pub fn mnist(rng: &mut crate::rng::Rng) -> Self {
        let p = Self::new(MNIST_FEATURES, MNIST_CLASSES, 0.01, rng);
        assert_eq!(p.params.len(), 797);
        p
    }

    pub fn input_dim(&self) -> usize {
        self.features + self.classes + 2
    }

    fn logit_for(&self, ex: &LabeledImage) -> Result<f64> {
        let indicator = ex.indicator.ok_or(Error::MissingIndicator)?;
        let v = self.params.segment("V").data();
        let c = self.params.segment("c").data()[0];
        let mut z = c;
        for (&x, &vj) in ex.pixels.iter().zip(v) {
            z += x * vj;
        }
        z += v[self.features + ex.shown_label];
        z += if indicator {
            v[self.features + self.classes]
        } else {
            v[self.features + self.classes + 1]
        };
        Ok(z)
    }

    pub fn weight_forward(&self, batch: &[&LabeledImage]) -> Result<Vec<f64>> {
        batch.iter().map(|ex| Ok(sigmoid(self.logit_for(ex)?))).collect()
    }

    /// Gradient of sum_i upstream_i * w_i w.r.t. V and c.
    pub fn weight_backward(
        &self,
        batch: &[&LabeledImage],
        upstream: &[f64],
    ) -> Result<ParamVector> {
        if upstream.len() != batch.len() {
            return Err(Error::Length {
                expected: batch.len(),
                got: upstream.len(),
                context: "weight_backward upstream".into(),
            });
        }
        let mut grad = self.params.zeros_like();
        for (ex, &u) in batch.iter().zip(upstream) {
            if u == 0.0 {
                continue;
            }
            let w = sigmoid(self.logit_for(ex)?);
            let dz = u * w * (1.0 - w);
            let gv = grad.segment_mut("V").data_mut();
            for (g, &x) in gv.iter_mut().zip(ex.pixels.iter()) {
                *g += dz * x;
            }
            gv[self.features + ex.shown_label] += dz;
            let ind = ex.indicator.ok_or(Error::MissingIndicator)?;
            let off = self.features + self.classes + if ind { 0 } else { 1 };
            gv[off] += dz;
            grad.segment_mut("c").data_mut()[0] += dz;
        }
        Ok(grad)
    }
}

impl WeightModel for WeightPerceptron {
    type Ex = LabeledImage;

    fn params(&self) -> &ParamVector {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamVector {
        &mut self.params
    }

    fn weights(&self, batch: &[&LabeledImage]) -> Result<Vec<f64>> {
        self.weight_forward(batch)
    }

    fn grad_weights(&self, batch: &[&LabeledImage], upstream: &[f64]) -> Result<ParamVector> {
        self.weight_backward(batch, upstream)
    }
}
