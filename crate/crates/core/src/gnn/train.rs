use std::io::Write;
use std::path::Path;

use ndarray::{concatenate, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{Dataset, GraphSpec, NUM_STATIC};
use super::model::{backward, loss_gradient, Dense, NormalizedSample, Normalizer, SurrogateModel};
use super::Head;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Train, validation and test fractions.
    pub split: [f64; 3],
    pub learning_rate: f64,
    /// Cosine-anneal the learning rate down to this value over `epochs`;
    /// `None` keeps it constant.
    pub final_learning_rate: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop after this many epochs without a better validation loss.
    pub patience: usize,
    pub seed: u64,
    pub bound_penalty: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            split: [0.7, 0.1, 0.2],
            learning_rate: 1e-3,
            final_learning_rate: None,
            beta1: 0.9,
            beta2: 0.999,
            batch_size: 32,
            epochs: 500,
            patience: 50,
            seed: 1,
            bound_penalty: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.split.iter().sum();
        if self.split.iter().any(|f| !(*f >= 0.0)) || (sum - 1.0).abs() > 1e-9 || self.split[0] <= 0.0 {
            return Err(Error::InvalidParameter(format!("split {:?} must be nonnegative and sum to 1", self.split)));
        }
        if !(self.learning_rate > 0.0)
            || self.final_learning_rate.is_some_and(|lr| !(lr > 0.0 && lr <= self.learning_rate))
            || self.batch_size == 0
            || self.epochs == 0
        {
            return Err(Error::InvalidParameter("learning rate, batch size and epochs must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.bound_penalty >= 0.0) {
            return Err(Error::InvalidParameter("Adam betas must lie in [0, 1) and the penalty be >= 0".into()));
        }
        Ok(())
    }
}

/// Sample positions of each partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle of `0..n` cut by the given fractions.
pub fn split_indices(n: usize, fractions: [f64; 3], seed: u64) -> Split {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    idx.shuffle(&mut rng);
    let n_train = ((fractions[0] * n as f64).round() as usize).min(n);
    let n_val = ((fractions[1] * n as f64).round() as usize).min(n - n_train);
    let mut test = idx.split_off(n_train + n_val);
    let mut val = idx.split_off(n_train);
    let mut train = idx;
    for part in [&mut train, &mut val, &mut test] {
        part.sort_unstable();
    }
    Split { train, val, test }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub head: Head,
    pub epochs: Vec<EpochStats>,
    /// Epoch whose weights were kept (1-based).
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub split: Split,
    pub config_hash: Option<String>,
}

/// Input and target z-scores over the training samples. Series features
/// are centered per bus; every feature has one scale.
pub fn fit_normalizer(dataset: &Dataset, train: &[usize]) -> Normalizer {
    let (v, d) = dataset.samples.first().map_or((0, 0), |s| s.features.dim());
    let count = train.len().max(1) as f64;
    let mut node_mean = Array2::<f64>::zeros((v, d));
    for &i in train {
        node_mean += &dataset.samples[i].features;
    }
    node_mean /= count;
    // Static columns are shifted by their grid-wide mean, series columns by
    // each bus's own mean.
    let grid_mean = node_mean.mean_axis(Axis(0)).unwrap_or_else(|| ndarray::Array1::zeros(d));
    let mut feature_mean = node_mean;
    for j in 0..d.min(NUM_STATIC) {
        feature_mean.column_mut(j).fill(grid_mean[j]);
    }
    let mut sq = vec![0.0; d];
    for &i in train {
        let dev = &dataset.samples[i].features - &feature_mean;
        for row in dev.rows() {
            for (j, &x) in row.iter().enumerate() {
                sq[j] += x * x;
            }
        }
    }
    let rows = (count * v.max(1) as f64).max(1.0);
    let feature_std = sq.iter().map(|q| if q / rows > 1e-18 { (q / rows).sqrt() } else { 1.0 }).collect();

    let (rows, horizon) = dataset.samples.first().map_or((0, dataset.horizon), |s| s.target.dim());
    let mut sum = Array2::<f64>::zeros((rows, horizon));
    let mut sq = Array2::<f64>::zeros((rows, horizon));
    for &i in train {
        let y = &dataset.samples[i].target;
        sum += y;
        sq += &(y * y);
    }
    let n = train.len().max(1) as f64;
    let target_mean = sum / n;
    let target_std = Array2::from_shape_fn((rows, horizon), |(k, t)| {
        let var = (sq[[k, t]] / n - target_mean[[k, t]].powi(2)).max(0.0);
        if var > 1e-12 {
            var.sqrt()
        } else {
            1.0
        }
    });
    Normalizer { feature_mean, feature_std, target_mean, target_std }
}

fn stack(batch: &[&NormalizedSample]) -> [Array2<f64>; 4] {
    let cat = |f: fn(&NormalizedSample) -> &Array2<f64>| {
        let views: Vec<_> = batch.iter().map(|s| f(s).view()).collect();
        concatenate(Axis(0), &views).expect("uniform sample shapes")
    };
    [cat(|s| &s.x), cat(|s| &s.target), cat(|s| &s.lower), cat(|s| &s.upper)]
}

/// Mean loss over a batch of normalized samples.
pub fn batch_loss(model: &SurrogateModel, graph: &GraphSpec, batch: &[&NormalizedSample], penalty: f64) -> f64 {
    let [x, y, lo, hi] = stack(batch);
    let cache = model.forward(graph, &x);
    loss_gradient(cache.output(), &y, &lo, &hi, penalty).0
}

/// Mean loss over a batch and its gradient with respect to every layer.
pub fn batch_loss_and_gradients(
    model: &SurrogateModel,
    graph: &GraphSpec,
    batch: &[&NormalizedSample],
    penalty: f64,
) -> (f64, Vec<Dense>) {
    let [x, y, lo, hi] = stack(batch);
    let cache = model.forward(graph, &x);
    let (l, d_pred) = loss_gradient(cache.output(), &y, &lo, &hi, penalty);
    (l, backward(model, graph, &cache, &d_pred))
}

struct Adam {
    m: Vec<Dense>,
    v: Vec<Dense>,
    step: i32,
}

impl Adam {
    fn new(model: &SurrogateModel) -> Self {
        let zeros: Vec<Dense> = model.layers.iter().map(|l| Dense::zeros(l.w.nrows(), l.w.ncols())).collect();
        Self { m: zeros.clone(), v: zeros, step: 0 }
    }

    fn update(&mut self, model: &mut SurrogateModel, grads: &[Dense], cfg: &TrainConfig, lr: f64) {
        self.step += 1;
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        for (k, g) in grads.iter().enumerate() {
            let layer = &mut model.layers[k];
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            let params = layer.w.iter_mut().chain(layer.b.iter_mut());
            let moments = m.w.iter_mut().chain(m.b.iter_mut()).zip(v.w.iter_mut().chain(v.b.iter_mut()));
            for ((p, (mi, vi)), &gi) in params.zip(moments).zip(g.w.iter().chain(g.b.iter())) {
                *mi = b1 * *mi + (1.0 - b1) * gi;
                *vi = b2 * *vi + (1.0 - b2) * gi * gi;
                *p -= lr * (*mi / c1) / ((*vi / c2).sqrt() + 1e-8);
            }
        }
    }
}

/// Learning rate of a 1-based epoch.
pub fn learning_rate(cfg: &TrainConfig, epoch: usize) -> f64 {
    match cfg.final_learning_rate {
        None => cfg.learning_rate,
        Some(end) => {
            let frac = if cfg.epochs > 1 { (epoch - 1) as f64 / (cfg.epochs - 1) as f64 } else { 1.0 };
            end + 0.5 * (cfg.learning_rate - end) * (1.0 + (std::f64::consts::PI * frac).cos())
        }
    }
}

fn mean_loss(model: &SurrogateModel, graph: &GraphSpec, data: &[NormalizedSample], idx: &[usize], cfg: &TrainConfig) -> f64 {
    if idx.is_empty() {
        return f64::NAN;
    }
    let mut total = 0.0;
    for chunk in idx.chunks(cfg.batch_size) {
        let batch: Vec<&NormalizedSample> = chunk.iter().map(|&i| &data[i]).collect();
        total += batch_loss(model, graph, &batch, cfg.bound_penalty) * chunk.len() as f64;
    }
    total / idx.len() as f64
}

/// Adam training with early stopping on the validation loss. Returns the
/// weights of the best validation epoch.
pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<(SurrogateModel, TrainReport)> {
    cfg.validate()?;
    if dataset.samples.is_empty() {
        return Err(Error::InvalidParameter("training set is empty".into()));
    }
    let split = split_indices(dataset.samples.len(), cfg.split, cfg.seed);
    if split.train.is_empty() {
        return Err(Error::InvalidParameter("training split is empty".into()));
    }
    let graph = &dataset.graph;
    let mut model = SurrogateModel::new(dataset.head, dataset.horizon, cfg.seed);
    model.norm = fit_normalizer(dataset, &split.train);
    let data: Vec<NormalizedSample> = dataset.samples.iter().map(|s| model.normalize(s)).collect();

    let mut adam = Adam::new(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order = split.train.clone();
    let mut best = (model.clone(), 0usize, f64::INFINITY);
    let mut epochs = Vec::new();
    for epoch in 1..=cfg.epochs {
        let lr = learning_rate(cfg, epoch);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&NormalizedSample> = chunk.iter().map(|&i| &data[i]).collect();
            let (l, grads) = batch_loss_and_gradients(&model, graph, &batch, cfg.bound_penalty);
            if !l.is_finite() {
                return Err(Error::Diverged { epoch, detail: format!("batch {b} loss is {l}") });
            }
            total += l * chunk.len() as f64;
            adam.update(&mut model, &grads, cfg, lr);
        }
        let train_loss = total / order.len() as f64;
        let val_loss = if split.val.is_empty() { train_loss } else { mean_loss(&model, graph, &data, &split.val, cfg) };
        if !val_loss.is_finite() {
            return Err(Error::Diverged { epoch, detail: format!("validation loss is {val_loss}") });
        }
        epochs.push(EpochStats { epoch, train_loss, val_loss });
        if val_loss < best.2 {
            best = (model.clone(), epoch, val_loss);
        } else if epoch - best.1 >= cfg.patience {
            break;
        }
    }
    let (model, best_epoch, best_val_loss) = best;
    Ok((model, TrainReport { head: dataset.head, epochs, best_epoch, best_val_loss, split, config_hash: None }))
}

pub fn write_report_csv(report: &TrainReport, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    if let Some(h) = &report.config_hash {
        writeln!(w, "# config={h}").map_err(io)?;
    }
    writeln!(w, "epoch,train_loss,val_loss").map_err(io)?;
    for e in &report.epochs {
        writeln!(w, "{},{},{}", e.epoch, e.train_loss, e.val_loss).map_err(io)?;
    }
    w.flush().map_err(io)
}
