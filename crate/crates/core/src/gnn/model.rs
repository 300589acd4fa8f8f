use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::features::{input_dim, GraphSample, GraphSpec};
use super::Head;

pub const LAYER_NAMES: [&str; 6] = ["encoder1", "encoder2", "sage1", "sage2", "decoder1", "decoder2"];
const SAGE: [usize; 2] = [2, 3];
const DECODER: usize = 4;

/// Affine layer `y = x Wᵀ + b` with `w` stored as `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    pub fn zeros(out: usize, inp: usize) -> Self {
        Self { w: Array2::zeros((out, inp)), b: Array1::zeros(out) }
    }

    /// Uniform in `±1/sqrt(in)` for weights and biases.
    fn random(out: usize, inp: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (inp as f64).sqrt();
        let w = Array2::from_shape_simple_fn((out, inp), || rng.random_range(-bound..bound));
        let b = Array1::from_shape_simple_fn(out, || rng.random_range(-bound..bound));
        Self { w, b }
    }

    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.w.t()) + &self.b
    }

    pub fn num_params(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

/// Layer widths for a head and horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub input: usize,
    pub encoder: usize,
    pub hidden: usize,
    pub decoder: usize,
    pub output: usize,
}

impl Dims {
    pub fn new(head: Head, horizon: usize) -> Self {
        let input = input_dim(horizon);
        let hidden = if head.is_graph_level() { 2 * input } else { 4 * input };
        Self { input, encoder: 2 * input, hidden, decoder: 2 * horizon, output: horizon }
    }

    /// `(out, in)` of each layer in [`LAYER_NAMES`] order.
    pub fn shapes(&self) -> [(usize, usize); 6] {
        [
            (self.encoder, self.input),
            (self.hidden, self.encoder),
            (self.hidden, 2 * self.hidden),
            (self.hidden, 2 * self.hidden),
            (self.decoder, self.hidden),
            (self.output, self.decoder),
        ]
    }
}

/// Training-set z-scores of the node features (`|V| × features` means,
/// one scale per feature) and of every output element (`rows × T`). Empty
/// statistics leave values unshifted.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub feature_mean: Array2<f64>,
    pub feature_std: Vec<f64>,
    pub target_mean: Array2<f64>,
    pub target_std: Array2<f64>,
}

impl Normalizer {
    pub fn identity(features: usize, rows: usize, horizon: usize) -> Self {
        Self {
            feature_mean: Array2::zeros((0, features)),
            feature_std: vec![1.0; features],
            target_mean: Array2::zeros((rows, horizon)),
            target_std: Array2::ones((rows, horizon)),
        }
    }

    pub fn features(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut z = if self.feature_mean.is_empty() { x.clone() } else { x - &self.feature_mean };
        for (j, mut col) in z.columns_mut().into_iter().enumerate() {
            let s = self.feature_std[j];
            col.mapv_inplace(|v| v / s);
        }
        z
    }

    /// MW to model units.
    pub fn targets(&self, y: &Array2<f64>) -> Array2<f64> {
        if self.target_mean.is_empty() {
            return y.clone();
        }
        (y - &self.target_mean) / &self.target_std
    }

    /// Model units to MW.
    pub fn denormalize(&self, z: &Array2<f64>) -> Array2<f64> {
        if self.target_mean.is_empty() {
            return z.clone();
        }
        z * &self.target_std + &self.target_mean
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateModel {
    pub head: Head,
    pub horizon: usize,
    pub seed: u64,
    /// In [`LAYER_NAMES`] order.
    pub layers: Vec<Dense>,
    pub norm: Normalizer,
    pub config_hash: Option<String>,
}

/// Intermediate values of one forward pass over stacked samples.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input of each layer (the concatenation for SAGE layers, the pooled
    /// embeddings for the first decoder of a graph head).
    pub inputs: Vec<Array2<f64>>,
    /// Pre-activations of each layer.
    pub pre: Vec<Array2<f64>>,
}

impl ForwardCache {
    /// Predictions in model units, `(samples · rows) × T`.
    pub fn output(&self) -> &Array2<f64> {
        &self.pre[5]
    }
}

/// One sample in model units.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSample {
    pub x: Array2<f64>,
    pub target: Array2<f64>,
    pub lower: Array2<f64>,
    pub upper: Array2<f64>,
}

impl SurrogateModel {
    pub fn new(head: Head, horizon: usize, seed: u64) -> Self {
        let dims = Dims::new(head, horizon);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims.shapes().iter().map(|&(o, i)| Dense::random(o, i, &mut rng)).collect();
        Self { head, horizon, seed, layers, norm: Normalizer::identity(dims.input, 0, horizon), config_hash: None }
    }

    pub fn zeros(head: Head, horizon: usize) -> Self {
        let dims = Dims::new(head, horizon);
        let layers = dims.shapes().iter().map(|&(o, i)| Dense::zeros(o, i)).collect();
        Self { head, horizon, seed: 0, layers, norm: Normalizer::identity(dims.input, 0, horizon), config_hash: None }
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.head, self.horizon)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Dense::num_params).sum()
    }

    pub fn normalize(&self, sample: &GraphSample) -> NormalizedSample {
        NormalizedSample {
            x: self.norm.features(&sample.features),
            target: self.norm.targets(&sample.target),
            lower: self.norm.targets(&sample.lower),
            upper: self.norm.targets(&sample.upper),
        }
    }

    /// Forward pass over `x`, which stacks whole samples row-wise. Graph
    /// heads mean-pool the node embeddings of every pool before decoding.
    pub fn forward(&self, graph: &GraphSpec, x: &Array2<f64>) -> ForwardCache {
        let mut inputs = Vec::with_capacity(6);
        let mut pre = Vec::with_capacity(6);
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let input = if SAGE.contains(&i) {
                let agg = neighbor_mean(&h, &graph.adjacency);
                concatenate(Axis(1), &[h.view(), agg.view()]).expect("matching rows")
            } else if i == DECODER && !graph.pools.is_empty() {
                mean_pool(&h, graph)
            } else {
                h
            };
            let z = layer.apply(&input);
            h = if i + 1 < self.layers.len() { z.mapv(relu) } else { z.clone() };
            inputs.push(input);
            pre.push(z);
        }
        ForwardCache { inputs, pre }
    }
}

/// Mean of the node rows in each pool, for stacked copies of one graph:
/// `(samples · |V|) × d` to `(samples · pools) × d`.
pub fn mean_pool(h: &Array2<f64>, graph: &GraphSpec) -> Array2<f64> {
    let v = graph.num_nodes();
    let p = graph.pools.len();
    let mut r = Array2::zeros((h.nrows() / v * p, h.ncols()));
    for s in 0..h.nrows() / v {
        for (k, pool) in graph.pools.iter().enumerate() {
            let mut row = r.row_mut(s * p + k);
            for &node in pool {
                row += &h.row(s * v + node);
            }
            row /= pool.len().max(1) as f64;
        }
    }
    r
}

fn mean_pool_backward(d: &Array2<f64>, graph: &GraphSpec) -> Array2<f64> {
    let v = graph.num_nodes();
    let p = graph.pools.len();
    let mut out = Array2::zeros((d.nrows() / p * v, d.ncols()));
    for s in 0..d.nrows() / p {
        for (k, pool) in graph.pools.iter().enumerate() {
            let g = &d.row(s * p + k) / pool.len().max(1) as f64;
            for &node in pool {
                let mut row = out.row_mut(s * v + node);
                row += &g;
            }
        }
    }
    out
}

fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

/// Mean of neighbor rows for stacked copies of one graph; a node without
/// neighbors gets zeros.
pub fn neighbor_mean(h: &Array2<f64>, adjacency: &[Vec<usize>]) -> Array2<f64> {
    let v = adjacency.len();
    let mut out = Array2::zeros(h.dim());
    for s in 0..h.nrows() / v {
        for (u, nbrs) in adjacency.iter().enumerate() {
            if nbrs.is_empty() {
                continue;
            }
            let mut row = out.row_mut(s * v + u);
            for &w in nbrs {
                row += &h.row(s * v + w);
            }
            row /= nbrs.len() as f64;
        }
    }
    out
}

fn neighbor_mean_backward(d: &Array2<f64>, adjacency: &[Vec<usize>]) -> Array2<f64> {
    let v = adjacency.len();
    let mut out = Array2::zeros(d.dim());
    for s in 0..d.nrows() / v {
        for (u, nbrs) in adjacency.iter().enumerate() {
            if nbrs.is_empty() {
                continue;
            }
            let g = &d.row(s * v + u) / nbrs.len() as f64;
            for &w in nbrs {
                let mut row = out.row_mut(s * v + w);
                row += &g;
            }
        }
    }
    out
}

/// One GraphSAGE layer: `ReLU(W [h_u, mean_{v∈N(u)} h_v] + b)`.
pub fn sage_layer(h: &Array2<f64>, adjacency: &[Vec<usize>], layer: &Dense) -> Array2<f64> {
    let agg = neighbor_mean(h, adjacency);
    let m = concatenate(Axis(1), &[h.view(), agg.view()]).expect("matching rows");
    layer.apply(&m).mapv(relu)
}

/// Mean squared error plus `penalty` times the mean squared bound violation.
pub fn loss(pred: &Array2<f64>, target: &Array2<f64>, lower: &Array2<f64>, upper: &Array2<f64>, penalty: f64) -> f64 {
    loss_gradient(pred, target, lower, upper, penalty).0
}

/// Loss and its gradient with respect to `pred`.
pub fn loss_gradient(
    pred: &Array2<f64>,
    target: &Array2<f64>,
    lower: &Array2<f64>,
    upper: &Array2<f64>,
    penalty: f64,
) -> (f64, Array2<f64>) {
    assert_eq!(pred.dim(), target.dim(), "prediction and target shapes");
    let n = pred.len().max(1) as f64;
    let mut mse = 0.0;
    let mut bound = 0.0;
    let mut grad = Array2::zeros(pred.dim());
    for (((g, &p), &y), (&lo, &hi)) in
        grad.iter_mut().zip(pred).zip(target).zip(lower.iter().zip(upper))
    {
        let e = p - y;
        let over = (p - hi).max(0.0);
        let under = (lo - p).max(0.0);
        mse += e * e;
        bound += over * over + under * under;
        *g = 2.0 * (e + penalty * (over - under)) / n;
    }
    (mse / n + penalty * bound / n, grad)
}

/// Gradients of the loss with respect to every layer, given the gradient
/// with respect to the output.
pub fn backward(model: &SurrogateModel, graph: &GraphSpec, cache: &ForwardCache, d_pred: &Array2<f64>) -> Vec<Dense> {
    let mut d_h = d_pred.clone();
    let mut grads: Vec<Dense> = Vec::with_capacity(6);
    for i in (0..model.layers.len()).rev() {
        let dz = if i + 1 == model.layers.len() {
            d_h
        } else {
            let mut dz = d_h;
            dz.zip_mut_with(&cache.pre[i], |g, &z| {
                if z <= 0.0 {
                    *g = 0.0
                }
            });
            dz
        };
        grads.push(Dense { w: dz.t().dot(&cache.inputs[i]), b: dz.sum_axis(Axis(0)) });
        if i == 0 {
            break;
        }
        let d_in = dz.dot(&model.layers[i].w);
        d_h = if SAGE.contains(&i) {
            let width = d_in.ncols() / 2;
            let own = d_in.slice(s![.., ..width]).to_owned();
            own + neighbor_mean_backward(&d_in.slice(s![.., width..]).to_owned(), &graph.adjacency)
        } else if i == DECODER && !graph.pools.is_empty() {
            mean_pool_backward(&d_in, graph)
        } else {
            d_in
        };
    }
    grads.reverse();
    grads
}
