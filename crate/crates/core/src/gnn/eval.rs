use ndarray::Array2;

use super::features::{Dataset, GraphSpec};
use super::model::SurrogateModel;
use super::Head;
use crate::error::{Error, Result};
use crate::grid::PtdfMatrix;

/// Denominator floor of the relative error, MW.
pub const MRE_FLOOR: f64 = 1.0;

/// Prediction in MW, `rows × T`, projected onto `[lower, upper]`.
pub fn predict(
    model: &SurrogateModel,
    graph: &GraphSpec,
    features: &Array2<f64>,
    lower: &Array2<f64>,
    upper: &Array2<f64>,
) -> Result<Array2<f64>> {
    let dims = model.dims();
    if features.dim() != (graph.num_nodes(), dims.input) {
        return Err(Error::Dimension(format!(
            "features are {:?}, model expects ({}, {})",
            features.dim(),
            graph.num_nodes(),
            dims.input
        )));
    }
    let cache = model.forward(graph, &model.norm.features(features));
    let mut y = model.norm.denormalize(cache.output());
    for ((v, &lo), &hi) in y.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(lo, hi.max(lo));
    }
    Ok(y)
}

/// Branch flows `T × Q` of bus injections `|V| × T`, after shifting each
/// step's injections by an equal share of their imbalance.
pub fn injections_to_flows(injections: &Array2<f64>, ptdf: &PtdfMatrix) -> Array2<f64> {
    let (v, horizon) = injections.dim();
    let mut flows = Array2::zeros((horizon, ptdf.num_branches()));
    for t in 0..horizon {
        let col = injections.column(t);
        let shift = col.sum() / v as f64;
        let balanced: Vec<f64> = col.iter().map(|p| p - shift).collect();
        for (q, f) in ptdf.flows(&balanced).into_iter().enumerate() {
            flows[[t, q]] = f;
        }
    }
    flows
}

/// Branch flows `T × Q` predicted by an injection model.
pub fn predict_branch_flows(
    model: &SurrogateModel,
    graph: &GraphSpec,
    features: &Array2<f64>,
    lower: &Array2<f64>,
    upper: &Array2<f64>,
    ptdf: &PtdfMatrix,
) -> Result<Array2<f64>> {
    if model.head != Head::BranchFlow {
        return Err(Error::InvalidParameter(format!("{} model cannot predict branch flows", model.head)));
    }
    let inj = predict(model, graph, features, lower, upper)?;
    Ok(injections_to_flows(&inj, ptdf))
}

/// Per-row, per-step mean relative error in percent,
/// `|pred - truth| / max(|truth|, floor)` averaged over samples.
pub fn mean_relative_error(pred: &[Array2<f64>], truth: &[Array2<f64>], floor: f64) -> Array2<f64> {
    assert_eq!(pred.len(), truth.len(), "sample counts");
    let Some(first) = truth.first() else {
        return Array2::zeros((0, 0));
    };
    let mut acc = Array2::zeros(first.dim());
    for (p, y) in pred.iter().zip(truth) {
        for ((a, &pv), &yv) in acc.iter_mut().zip(p).zip(y) {
            *a += (pv - yv).abs() / yv.abs().max(floor);
        }
    }
    acc * (100.0 / pred.len() as f64)
}

/// Mean relative errors, one row per named target.
#[derive(Debug, Clone, PartialEq)]
pub struct MreTable {
    pub names: Vec<String>,
    /// `[target][t]`, percent.
    pub values: Vec<Vec<f64>>,
}

impl MreTable {
    fn from_array(names: Vec<String>, a: Array2<f64>) -> Self {
        Self { names, values: a.rows().into_iter().map(|r| r.to_vec()).collect() }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().flatten().cloned().fold(0.0, f64::max)
    }

    pub fn row(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i].as_slice())
    }

    pub fn to_csv(&self) -> String {
        let horizon = self.values.first().map_or(0, Vec::len);
        let mut s = String::from("target");
        for t in 1..=horizon {
            s.push_str(&format!(",t{t}"));
        }
        s.push('\n');
        for (n, row) in self.names.iter().zip(&self.values) {
            s.push_str(n);
            for v in row {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }
}

/// MRE of the model's outputs (MW) on the samples at `idx`.
pub fn evaluate_mre(model: &SurrogateModel, dataset: &Dataset, idx: &[usize]) -> Result<MreTable> {
    let mut pred = Vec::with_capacity(idx.len());
    let mut truth = Vec::with_capacity(idx.len());
    for &i in idx {
        let s = &dataset.samples[i];
        pred.push(predict(model, &dataset.graph, &s.features, &s.lower, &s.upper)?);
        truth.push(s.target.clone());
    }
    Ok(MreTable::from_array(dataset.graph.row_names.clone(), mean_relative_error(&pred, &truth, MRE_FLOOR)))
}

/// MRE of predicted branch flows against the flows of the labelled
/// injections, for the branch positions in `branches`.
pub fn evaluate_flow_mre(
    model: &SurrogateModel,
    dataset: &Dataset,
    idx: &[usize],
    ptdf: &PtdfMatrix,
    branches: &[usize],
    branch_ids: &[usize],
) -> Result<MreTable> {
    let pick = |flows: Array2<f64>| Array2::from_shape_fn((branches.len(), flows.nrows()), |(k, t)| flows[[t, branches[k]]]);
    let mut pred = Vec::with_capacity(idx.len());
    let mut truth = Vec::with_capacity(idx.len());
    for &i in idx {
        let s = &dataset.samples[i];
        pred.push(pick(predict_branch_flows(model, &dataset.graph, &s.features, &s.lower, &s.upper, ptdf)?));
        truth.push(pick(injections_to_flows(&s.target, ptdf)));
    }
    let names = branches.iter().map(|&q| format!("branch_{}", branch_ids[q])).collect();
    Ok(MreTable::from_array(names, mean_relative_error(&pred, &truth, MRE_FLOOR)))
}
