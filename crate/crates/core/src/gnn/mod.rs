//! GraphSAGE surrogates for the SCUC labels.
//!
//! Every head shares the same layer sequence: two dense encoders, two
//! GraphSAGE layers, two dense decoders. Graph-level heads (thermal
//! generation, load shedding) mean-pool the node embeddings within each zone
//! and over the whole grid before decoding; the injection head keeps one
//! output per node and maps it to branch flows through the PTDF matrix.

mod checkpoint;
mod eval;
mod features;
mod model;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use eval::{
    evaluate_flow_mre, evaluate_mre, injections_to_flows, mean_relative_error, predict, predict_branch_flows,
    MreTable, MRE_FLOOR,
};
pub use features::{
    bounds, encode_features, input_dim, node_features, static_features, targets, Dataset, GraphSample, GraphSpec,
    NUM_STATIC,
};
pub use model::{
    backward, loss, loss_gradient, neighbor_mean, sage_layer, Dense, Dims, ForwardCache, NormalizedSample,
    Normalizer, SurrogateModel, LAYER_NAMES,
};
pub use train::{
    batch_loss, batch_loss_and_gradients, fit_normalizer, split_indices, train, write_report_csv, EpochStats,
    Split, TrainConfig, TrainReport,
};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Head {
    /// Zonal and system thermal generation.
    Generation,
    /// Zonal and system load shedding.
    Shedding,
    /// Bus net injections, converted to branch flows.
    BranchFlow,
}

impl Head {
    pub const ALL: [Head; 3] = [Head::Generation, Head::Shedding, Head::BranchFlow];

    pub fn is_graph_level(self) -> bool {
        self != Head::BranchFlow
    }

    pub fn code(self) -> u8 {
        match self {
            Head::Generation => 0,
            Head::Shedding => 1,
            Head::BranchFlow => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Head::ALL.into_iter().find(|h| h.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            Head::Generation => "generation",
            Head::Shedding => "shedding",
            Head::BranchFlow => "branch-flow",
        }
    }
}

impl fmt::Display for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Head {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Head::ALL
            .into_iter()
            .find(|h| h.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown head `{s}` (generation, shedding, branch-flow)")))
    }
}
