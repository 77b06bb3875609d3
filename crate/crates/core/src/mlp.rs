//! Fully connected binary classifier: tanh hidden layers, sigmoid output,
//! binary cross-entropy, Adam, best-validation checkpointing.
//!
//! Everything is `f64`. Inside a mini-batch the gradient is accumulated over
//! fixed 64-row blocks (in parallel when the batch is larger than one block)
//! and the block sums are added in block order, so a run is bit-identical
//! for any thread count.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::CrpSet;
use crate::error::{Error, Result};
use crate::features::{FeatureMap, FeatureMatrix};
use crate::puf::{seeded_rng, sub_stream, Bit};

const BLOCK: usize = 64;
const SHUFFLE_STREAM: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Return the weights with the best validation accuracy instead of the
    /// final ones.
    pub keep_best: bool,
}

impl MlpConfig {
    /// Three hidden layers `(2^(l-1), 2^l, 2^(l-1))`.
    pub fn three_layer(input_dim: usize, l: u32) -> Self {
        assert!(l >= 1, "l must be >= 1");
        let h = 1usize << (l - 1);
        Self::with_hidden(input_dim, vec![h, 2 * h, h])
    }

    /// One hidden layer of `2^(k+1)` units.
    pub fn single_hidden(input_dim: usize, k: usize) -> Self {
        Self::with_hidden(input_dim, vec![1 << (k + 1)])
    }

    pub fn with_hidden(input_dim: usize, hidden: Vec<usize>) -> Self {
        Self {
            input_dim,
            hidden,
            epochs: 100,
            batch_size: 20,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            keep_best: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.input_dim == 0 {
            return bad("input_dim must be positive".into());
        }
        if self.hidden.contains(&0) {
            return bad(format!("hidden widths must be positive, got {:?}", self.hidden));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return bad("Adam coefficients out of range".into());
        }
        Ok(())
    }
}

/// Parameters of every layer in one flat vector: for each layer the
/// row-major `out × in` weight matrix followed by the `out` biases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    dims: Vec<usize>,
    params: Vec<f64>,
}

impl MlpModel {
    /// Glorot-uniform weights in `(-sqrt(6/(in+out)), sqrt(6/(in+out)))`,
    /// zero biases.
    pub fn init(cfg: &MlpConfig) -> Result<Self> {
        cfg.validate()?;
        let mut m = Self::zeros(cfg.input_dim, &cfg.hidden);
        let mut rng = seeded_rng(cfg.seed);
        for l in 0..m.layers() {
            let (inp, out) = (m.dims[l], m.dims[l + 1]);
            let limit = (6.0 / (inp + out) as f64).sqrt();
            let w = m.layer_offset(l);
            for p in &mut m.params[w..w + inp * out] {
                *p = rng.random_range(-limit..limit);
            }
        }
        Ok(m)
    }

    pub fn zeros(input_dim: usize, hidden: &[usize]) -> Self {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let count = dims.windows(2).map(|d| d[0] * d[1] + d[1]).sum();
        Self {
            dims,
            params: vec![0.0; count],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    /// Layer widths from input to output.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layer_offset(&self, layer: usize) -> usize {
        self.dims[..layer + 1].windows(2).map(|d| d[0] * d[1] + d[1]).sum()
    }

    /// Index of the output bias inside `params`.
    pub fn output_bias_index(&self) -> usize {
        self.params.len() - 1
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        let mut ws = Workspace::new(&self.dims);
        Ok(sigmoid(self.logit(x, &mut ws)))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Bit> {
        Ok((self.forward(x)? >= 0.5) as Bit)
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dims[0] {
            return Err(Error::DimensionMismatch {
                expected: self.dims[0],
                found,
            });
        }
        Ok(())
    }

    fn logit(&self, x: &[f64], ws: &mut Workspace) -> f64 {
        ws.acts[0].copy_from_slice(x);
        let mut off = 0;
        let last = self.layers() - 1;
        for l in 0..self.layers() {
            let (inp, out) = (self.dims[l], self.dims[l + 1]);
            let w = &self.params[off..off + inp * out];
            let b = &self.params[off + inp * out..off + inp * out + out];
            let (lo, hi) = ws.acts.split_at_mut(l + 1);
            let a = &lo[l];
            let z = &mut hi[0];
            for o in 0..out {
                let row = &w[o * inp..(o + 1) * inp];
                let s = b[o] + dot(row, a);
                z[o] = if l == last { s } else { s.tanh() };
            }
            off += inp * out + out;
        }
        ws.acts[self.layers()][0]
    }

    /// Adds the gradient of the unnormalized BCE of one sample into `grad`
    /// and returns that sample's loss.
    fn backprop(&self, x: &[f64], y: f64, grad: &mut [f64], ws: &mut Workspace) -> f64 {
        let z = self.logit(x, ws);
        let loss = bce_with_logit(z, y);
        let top = self.layers();
        ws.deltas[top][0] = sigmoid(z) - y;
        let mut off = self.params.len();
        for l in (0..top).rev() {
            let (inp, out) = (self.dims[l], self.dims[l + 1]);
            off -= inp * out + out;
            let w = &self.params[off..off + inp * out];
            let a = &ws.acts[l];
            let (dlo, dhi) = ws.deltas.split_at_mut(l + 1);
            let d = &dhi[0];
            let (gw, gb) = grad[off..off + inp * out + out].split_at_mut(inp * out);
            for o in 0..out {
                let dv = d[o];
                gb[o] += dv;
                for (g, &ai) in gw[o * inp..(o + 1) * inp].iter_mut().zip(a) {
                    *g += dv * ai;
                }
            }
            if l > 0 {
                let prev = &mut dlo[l];
                for i in 0..inp {
                    let mut s = 0.0;
                    for o in 0..out {
                        s += w[o * inp + i] * d[o];
                    }
                    prev[i] = s * (1.0 - a[i] * a[i]);
                }
            }
        }
        loss
    }

    /// Mean BCE over `batch` and its gradient with respect to every parameter.
    pub fn loss_and_grad(&self, batch: &[(Vec<f64>, Bit)]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::EmptyDataset("gradient batch"));
        }
        let mut grad = vec![0.0; self.params.len()];
        let mut ws = Workspace::new(&self.dims);
        let mut loss = 0.0;
        for (x, y) in batch {
            self.check_dim(x.len())?;
            loss += self.backprop(x, *y as f64, &mut grad, &mut ws);
        }
        let scale = 1.0 / batch.len() as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        Ok((loss * scale, grad))
    }

    pub fn loss(&self, batch: &[(Vec<f64>, Bit)]) -> Result<f64> {
        let mut ws = Workspace::new(&self.dims);
        let mut total = 0.0;
        for (x, y) in batch {
            self.check_dim(x.len())?;
            total += bce_with_logit(self.logit(x, &mut ws), *y as f64);
        }
        Ok(total / batch.len() as f64)
    }
}

struct Workspace {
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    fn new(dims: &[usize]) -> Self {
        Self {
            acts: dims.iter().map(|&d| vec![0.0; d]).collect(),
            deltas: dims.iter().map(|&d| vec![0.0; d]).collect(),
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler keep several multiplies in flight.
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for j in 0..4 {
            acc[j] += a[4 * c + j] * b[4 * c + j];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for j in 4 * chunks..a.len() {
        s += a[j] * b[j];
    }
    s
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `-y ln p - (1-y) ln(1-p)` with `p = sigmoid(z)`, computed stably.
#[inline]
fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

/// Central-difference check of [`MlpModel::loss_and_grad`]; returns the
/// largest `|analytic - numeric| / max(|analytic|, |numeric|, 1e-6)`.
pub fn gradient_check(model: &MlpModel, batch: &[(Vec<f64>, Bit)]) -> Result<f64> {
    const STEP: f64 = 1e-5;
    let (_, analytic) = model.loss_and_grad(batch)?;
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = probe.params[i];
        probe.params[i] = orig + STEP;
        let plus = probe.loss(batch)?;
        probe.params[i] = orig - STEP;
        let minus = probe.loss(batch)?;
        probe.params[i] = orig;
        let numeric = (plus - minus) / (2.0 * STEP);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub history: Vec<EpochStats>,
    /// 1-based epoch whose weights were returned.
    pub best_epoch: usize,
    pub best_val_accuracy: Option<f64>,
    pub seconds: f64,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &MlpConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g;
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= cfg.learning_rate * mh / (vh.sqrt() + cfg.epsilon);
        }
    }
}

fn row_f64(row: &[i8], out: &mut [f64]) {
    for (o, &v) in out.iter_mut().zip(row) {
        *o = v as f64;
    }
}

/// Gradient sum and loss sum over `rows` of `data`.
fn block_grad(model: &MlpModel, data: &FeatureMatrix, rows: &[usize]) -> (Vec<f64>, f64) {
    let mut grad = vec![0.0; model.params.len()];
    let mut ws = Workspace::new(&model.dims);
    let mut x = vec![0.0; data.dim()];
    let mut loss = 0.0;
    for &r in rows {
        row_f64(data.row(r), &mut x);
        loss += model.backprop(&x, data.label(r) as f64, &mut grad, &mut ws);
    }
    (grad, loss)
}

pub fn train(cfg: &MlpConfig, train: &FeatureMatrix, val: &FeatureMatrix) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset("training set"));
    }
    for m in [train, val] {
        if m.dim() != cfg.input_dim && !m.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: cfg.input_dim,
                found: m.dim(),
            });
        }
    }
    let start = Instant::now();
    let mut model = MlpModel::init(cfg)?;
    let mut adam = Adam {
        m: vec![0.0; model.params.len()],
        v: vec![0.0; model.params.len()],
        t: 0,
    };
    let mut rng = sub_stream(cfg.seed, SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..train.rows()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Vec<f64>)> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (mut grad, loss) = if batch.len() <= BLOCK {
                block_grad(&model, train, batch)
            } else {
                let parts: Vec<(Vec<f64>, f64)> = batch
                    .par_chunks(BLOCK)
                    .map(|rows| block_grad(&model, train, rows))
                    .collect();
                let mut it = parts.into_iter();
                let (mut g, mut l) = it.next().expect("non-empty batch");
                for (pg, pl) in it {
                    g.iter_mut().zip(&pg).for_each(|(a, b)| *a += b);
                    l += pl;
                }
                (g, l)
            };
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            adam.step(&mut model.params, &grad, cfg);
            epoch_loss += loss;
        }
        let train_loss = epoch_loss / train.rows() as f64;
        if !train_loss.is_finite() || model.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Divergence {
                epoch,
                loss: train_loss,
            });
        }
        let val_accuracy = if val.is_empty() {
            None
        } else {
            Some(accuracy(&model, val)?)
        };
        if let Some(acc) = val_accuracy {
            if best.as_ref().is_none_or(|(b, _, _)| acc > *b) {
                best = Some((acc, epoch, model.params.clone()));
            }
        }
        history.push(EpochStats {
            epoch,
            train_loss,
            val_accuracy,
        });
    }

    let (best_epoch, best_val_accuracy) = match best {
        Some((acc, epoch, params)) if cfg.keep_best => {
            model.params = params;
            (epoch, Some(acc))
        }
        _ => (cfg.epochs, history.last().and_then(|h| h.val_accuracy)),
    };
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
        best_val_accuracy,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Fraction of rows where `p >= 0.5` agrees with the label.
/// Accuracy on a CRP set after applying `map`.
pub fn evaluate(model: &MlpModel, test: &CrpSet, map: &FeatureMap) -> Result<f64> {
    accuracy(model, &test.features(map)?)
}

pub fn accuracy(model: &MlpModel, data: &FeatureMatrix) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("evaluation set"));
    }
    model.check_dim(data.dim())?;
    let rows: Vec<usize> = (0..data.rows()).collect();
    let correct: usize = rows
        .par_chunks(1024)
        .map(|rows| {
            let mut ws = Workspace::new(&model.dims);
            let mut x = vec![0.0; data.dim()];
            rows.iter()
                .filter(|&&r| {
                    row_f64(data.row(r), &mut x);
                    let pred = (model.logit(&x, &mut ws) >= 0.0) as Bit;
                    pred == data.label(r)
                })
                .count()
        })
        .sum();
    Ok(correct as f64 / data.rows() as f64)
}

/// Architecture parameters that determine the hidden-layer exponent `l`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LTarget {
    Apuf,
    Ff { k: usize },
    XorFf { z: usize, k: usize },
    OaxFf { x: usize, y: usize, z: usize, k: usize },
    Mn,
    Ipuf { x: usize, y: usize },
}

/// Candidate values of `l`, default first.
pub fn l_candidates(t: LTarget) -> Vec<u32> {
    let c = |v: i64| v.max(1) as u32;
    match t {
        LTarget::Apuf => vec![1],
        LTarget::Ff { k } => vec![c(k as i64 + 1)],
        LTarget::XorFf { z, k } => vec![c((z + k + 1) as i64), c((z + k) as i64)],
        LTarget::OaxFf { x, y, z, k } => {
            let s = (x + y + z + k) as i64;
            vec![c(s + 1), c(s), c((x + y + k) as i64 - 1)]
        }
        LTarget::Mn => vec![4],
        LTarget::Ipuf { x, y } => {
            let base = (x as i64 + 2 * y as i64 + 1) / 2;
            vec![c(base), c(base + 1), c(base - 1)]
        }
    }
}

pub fn choose_l(t: LTarget) -> u32 {
    l_candidates(t)[0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetFingerprints {
    pub train: String,
    pub val: String,
    pub test: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub test_accuracy: f64,
    pub best_epoch: usize,
    pub best_val_accuracy: Option<f64>,
    pub train_seconds: f64,
    pub feature_dim: usize,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub config: MlpConfig,
    pub fingerprints: DatasetFingerprints,
    pub history: Vec<EpochStats>,
}

/// Features, training and evaluation in one call.
pub fn attack(
    cfg: &MlpConfig,
    map: &FeatureMap,
    train_set: &CrpSet,
    val_set: &CrpSet,
    test_set: &CrpSet,
) -> Result<(MlpModel, AttackReport)> {
    if cfg.input_dim != map.dim() {
        return Err(Error::DimensionMismatch {
            expected: map.dim(),
            found: cfg.input_dim,
        });
    }
    let tr = train_set.features(map)?;
    let va = val_set.features(map)?;
    let te = test_set.features(map)?;
    let out = train(cfg, &tr, &va)?;
    let test_accuracy = accuracy(&out.model, &te)?;
    let report = AttackReport {
        test_accuracy,
        best_epoch: out.best_epoch,
        best_val_accuracy: out.best_val_accuracy,
        train_seconds: out.seconds,
        feature_dim: map.dim(),
        train_size: tr.rows(),
        val_size: va.rows(),
        test_size: te.rows(),
        config: cfg.clone(),
        fingerprints: DatasetFingerprints {
            train: train_set.fingerprint(),
            val: val_set.fingerprint(),
            test: test_set.fingerprint(),
        },
        history: out.history,
    };
    Ok((out.model, report))
}

/// Trains `trials` models with seeds `cfg.seed, cfg.seed + 1, ...` on the same
/// data. Returns the index of the run with the best validation accuracy (lowest
/// final training loss when there is no validation set) and all reports.
pub fn attack_trials(
    cfg: &MlpConfig,
    map: &FeatureMap,
    train_set: &CrpSet,
    val_set: &CrpSet,
    test_set: &CrpSet,
    trials: usize,
) -> Result<(usize, Vec<AttackReport>)> {
    if trials == 0 {
        return Err(Error::Config("trials must be positive".into()));
    }
    let mut reports = Vec::with_capacity(trials);
    for t in 0..trials {
        let mut c = cfg.clone();
        c.seed = c.seed.wrapping_add(t as u64);
        reports.push(attack(&c, map, train_set, val_set, test_set)?.1);
    }
    let score = |r: &AttackReport| match r.best_val_accuracy {
        Some(v) => v,
        None => -r.history.last().map_or(f64::INFINITY, |e| e.train_loss),
    };
    let mut best = 0;
    for (i, r) in reports.iter().enumerate() {
        if score(r) > score(&reports[best]) {
            best = i;
        }
    }
    Ok((best, reports))
}
