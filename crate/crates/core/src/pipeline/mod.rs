//! End-to-end orchestration: sample, label, train, assess, compare, report.
//!
//! One [`PipelineConfig`] describes an experiment. Every artifact carries the
//! hash of the settings it depends on ([`StageHashes`]), and a stage refuses
//! inputs stamped with a different hash, so editing a risk setting keeps the
//! labels while editing the solver invalidates everything downstream.

mod figures;

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gnn::{
    bounds, encode_features, evaluate_flow_mre, evaluate_mre, node_features, predict, predict_branch_flows,
    read_checkpoint, split_indices, static_features, train, write_checkpoint, write_report_csv, GraphSpec, Head,
    MreTable, SurrogateModel, TrainConfig, TrainReport,
};
use crate::grid::{compute_ptdf, parse_case, validate_grid, PowerGrid, PtdfMatrix};
use crate::risk::{
    assess, compare_pathways, read_report_json, significant_branches, write_divergence_csv, write_report_csv as
    write_risk_csv, write_report_json, CompareThresholds, Divergence, RiskConfig, RiskInputs, RiskReport,
    ShedCause, Source,
};
use crate::scenario::{generate_scenarios, read_scenarios_csv, write_scenarios_csv, ScenarioConfig, ScenarioSet};
use crate::scuc::{label_scenarios, read_labels_csv, LabelOptions, LabelSet, LabelStatus, ScucConfig};

pub use figures::write_figures;

/// Scenarios the risk stages run on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssessOn {
    /// The held-out test split of the training protocol.
    Test,
    /// Every successfully labelled scenario.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Case file; relative paths are taken from the config file's directory.
    pub case: PathBuf,
    /// Artifact directory; relative paths are taken from the config file's
    /// directory.
    pub output: PathBuf,
    pub scenarios: usize,
    pub horizon: usize,
    pub seed: u64,
    pub assess_on: AssessOn,
    /// `None` uses the reference marginal table for the grid's zones.
    pub scenario: Option<ScenarioConfig>,
    pub solver: ScucConfig,
    pub train: TrainConfig,
    pub risk: RiskConfig,
    pub compare: CompareThresholds,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            case: PathBuf::from("case.txt"),
            output: PathBuf::from("out"),
            scenarios: 1000,
            horizon: 12,
            seed: 1,
            assess_on: AssessOn::Test,
            scenario: None,
            solver: ScucConfig::default(),
            train: TrainConfig::default(),
            risk: RiskConfig::default(),
            compare: CompareThresholds::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::format("pipeline config", e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::format("pipeline config", e.to_string()))
    }

    /// Reads a TOML config and resolves its relative paths against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        Self::load_with_overrides(path, &[] as &[&str])
    }

    /// Like [`PipelineConfig::load`], after setting each `key.path=value`
    /// override. Values are TOML literals; anything else is a string.
    pub fn load_with_overrides<S: AsRef<str>>(path: &Path, overrides: &[S]) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut table: toml::Table = toml::from_str(&text).map_err(|e| Error::format("pipeline config", e.to_string()))?;
        for spec in overrides {
            apply_override(&mut table, spec.as_ref())?;
        }
        let mut cfg: Self = table.try_into().map_err(|e: toml::de::Error| Error::format("pipeline config", e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.case = base.join(&cfg.case);
        cfg.output = base.join(&cfg.output);
        Ok(cfg)
    }

    pub fn validate(&self, grid: &PowerGrid) -> Result<()> {
        if self.scenarios == 0 {
            return Err(Error::InvalidParameter("scenario count must be at least 1".into()));
        }
        if self.horizon < 2 {
            return Err(Error::InvalidParameter(format!("horizon {} must be at least 2", self.horizon)));
        }
        self.solver.validate(grid)?;
        self.train.validate()?;
        self.risk.validate(self.horizon)?;
        let th = &self.compare;
        if !(th.probability >= 0.0 && th.risk_relative >= 0.0 && th.risk_floor > 0.0) {
            return Err(Error::InvalidParameter("compare thresholds must be >= 0 and the floor > 0".into()));
        }
        Ok(())
    }

    /// Chained hashes of the settings each stage depends on. Paths and the
    /// comparison thresholds never enter.
    pub fn hashes(&self, case_text: &str) -> StageHashes {
        let scenarios = digest(&[
            case_text,
            &json(&(self.scenarios, self.horizon, self.seed)),
            &json(&self.scenario),
        ]);
        let labels = digest(&[&scenarios, &json(&self.solver)]);
        let models = digest(&[&labels, &json(&self.train)]);
        let reports = digest(&[&models, &json(&self.risk), &json(&self.assess_on)]);
        StageHashes { scenarios, labels, models, reports }
    }
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("config serializes")
}

fn digest(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    format!("{:x}", h.finalize())
}

/// Hex SHA-256 stamps: scenarios cover the case and sampling settings,
/// labels add the solver, models add training, reports add the risk
/// settings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageHashes {
    pub scenarios: String,
    pub labels: String,
    pub models: String,
    pub reports: String,
}

/// A loaded experiment: config, grid and the derived hash.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub config: PipelineConfig,
    pub grid: PowerGrid,
    pub ptdf: PtdfMatrix,
    pub hashes: StageHashes,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        let text = fs::read_to_string(&config.case).map_err(|e| Error::io(&config.case, e))?;
        let grid = parse_case(&text)?;
        let issues = validate_grid(&grid);
        if !issues.is_empty() {
            return Err(Error::InvalidGrid(format!("{issues:?}")));
        }
        config.validate(&grid)?;
        let ptdf = compute_ptdf(&grid)?;
        let hashes = config.hashes(&text);
        Ok(Self { config, grid, ptdf, hashes })
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.config.output.join(name)
    }

    pub fn scenarios_path(&self) -> PathBuf {
        self.out("scenarios.csv")
    }

    pub fn labels_path(&self) -> PathBuf {
        self.out("labels.csv")
    }

    pub fn checkpoint_path(&self, head: Head) -> PathBuf {
        self.out(&format!("model_{}.bin", head.name()))
    }

    pub fn train_report_path(&self, head: Head) -> PathBuf {
        self.out(&format!("train_{}.csv", head.name()))
    }

    pub fn mre_path(&self, head: Head) -> PathBuf {
        self.out(&format!("mre_{}.csv", head.name()))
    }

    pub fn report_path(&self, source: Source, ext: &str) -> PathBuf {
        let name = match source {
            Source::Milp => "milp",
            Source::Gnn => "gnn",
        };
        self.out(&format!("report_{name}.{ext}"))
    }

    pub fn divergence_path(&self) -> PathBuf {
        self.out("divergence.csv")
    }

    pub fn figures_dir(&self) -> PathBuf {
        self.out("figures")
    }

    fn ensure_output(&self) -> Result<()> {
        fs::create_dir_all(&self.config.output).map_err(|e| Error::io(&self.config.output, e))
    }

    fn check_hash(&self, what: &Path, found: Option<&str>, expected: &str) -> Result<()> {
        if found != Some(expected) {
            return Err(Error::ConfigMismatch(format!(
                "{} was produced with config {}, current config is {}",
                what.display(),
                found.unwrap_or("<none>"),
                expected
            )));
        }
        Ok(())
    }

    pub fn sample(&self) -> Result<ScenarioSet> {
        self.ensure_output()?;
        let cfg = self.config.scenario.clone().unwrap_or_else(|| ScenarioConfig::for_grid(&self.grid));
        let c = &self.config;
        let (mut set, _) = generate_scenarios(&self.grid, &cfg, c.scenarios, c.horizon, c.seed)?;
        set.config_hash = Some(self.hashes.scenarios.clone());
        write_scenarios_csv(&set, &self.scenarios_path())?;
        Ok(set)
    }

    pub fn load_scenarios(&self) -> Result<ScenarioSet> {
        let path = self.scenarios_path();
        let set = read_scenarios_csv(&path)?;
        self.check_hash(&path, set.config_hash.as_deref(), &self.hashes.scenarios)?;
        set.check_grid(&self.grid)?;
        Ok(set)
    }

    /// Labels every scenario, resuming a partial label file.
    pub fn label(&self, opts: &LabelOptions) -> Result<LabelSet> {
        let set = self.load_scenarios()?;
        let c = &self.config;
        label_scenarios(&self.grid, &self.ptdf, &set, &c.solver, opts, &self.labels_path(), Some(&self.hashes.labels))
    }

    pub fn load_labels(&self) -> Result<LabelSet> {
        let path = self.labels_path();
        let labels = read_labels_csv(&path)?;
        self.check_hash(&path, labels.config_hash.as_deref(), &self.hashes.labels)?;
        labels.check_grid(&self.grid)?;
        if labels.records.len() != self.config.scenarios {
            return Err(Error::Dimension(format!(
                "{} holds {} of {} records; finish labelling first",
                path.display(),
                labels.records.len(),
                self.config.scenarios
            )));
        }
        Ok(labels)
    }

    /// Scenario indices of the assessment set, in ascending order.
    pub fn assessed_scenarios(&self, labels: &LabelSet) -> Vec<usize> {
        let ok: Vec<usize> =
            labels.records.iter().filter(|r| r.status != LabelStatus::Failed).map(|r| r.scenario).collect();
        let mut idx = match self.config.assess_on {
            AssessOn::All => ok,
            AssessOn::Test => {
                let split = split_indices(ok.len(), self.config.train.split, self.config.train.seed);
                split.test.iter().map(|&i| ok[i]).collect()
            }
        };
        idx.sort_unstable();
        idx
    }

    /// Branch positions for the overloading sums, ranked on the MILP flows of
    /// the assessment set.
    pub fn branch_set(&self, labels: &LabelSet) -> Result<Vec<usize>> {
        let inputs = RiskInputs::from_labels(&self.grid, labels, &self.assessed_scenarios(labels))?;
        let q = self.grid.num_branches();
        let k = self.config.risk.significant.unwrap_or(q);
        Ok(significant_branches(inputs.flows.view(), &inputs.flow_limits, &inputs.branch_ids, k))
    }

    /// Trains one head, writes its checkpoint, epoch log and test-set MRE.
    pub fn train(&self, head: Head) -> Result<(SurrogateModel, TrainReport, MreTable)> {
        let set = self.load_scenarios()?;
        let labels = self.load_labels()?;
        let dataset = encode_features(&self.grid, &set, &labels, head)?;
        let (mut model, mut report) = train(&dataset, &self.config.train)?;
        model.config_hash = Some(self.hashes.models.clone());
        report.config_hash = Some(self.hashes.models.clone());
        let mre = if head.is_graph_level() {
            evaluate_mre(&model, &dataset, &report.split.test)?
        } else {
            let ids: Vec<usize> = self.grid.branches.iter().map(|b| b.id).collect();
            let set = self.branch_set(&labels)?;
            evaluate_flow_mre(&model, &dataset, &report.split.test, &self.ptdf, &set, &ids)?
        };
        self.ensure_output()?;
        write_checkpoint(&model, &self.checkpoint_path(head))?;
        write_report_csv(&report, &self.train_report_path(head))?;
        let mre_path = self.mre_path(head);
        fs::write(&mre_path, format!("# config={}\n{}", self.hashes.models, mre.to_csv())).map_err(|e| Error::io(&mre_path, e))?;
        Ok((model, report, mre))
    }

    pub fn load_model(&self, head: Head) -> Result<SurrogateModel> {
        let path = self.checkpoint_path(head);
        if !path.exists() {
            return Err(Error::InvalidParameter(format!(
                "no {head} checkpoint at {}; run the train stage first",
                path.display()
            )));
        }
        let model = read_checkpoint(&path)?;
        self.check_hash(&path, model.config_hash.as_deref(), &self.hashes.models)?;
        if model.head != head || model.horizon != self.config.horizon {
            return Err(Error::ConfigMismatch(format!("{} is not a {head} model for this horizon", path.display())));
        }
        Ok(model)
    }

    /// Risk inputs of the GNN pathway: zonal shedding from the shedding head
    /// and branch flows from the injection head.
    pub fn gnn_inputs(&self, set: &ScenarioSet, idx: &[usize]) -> Result<RiskInputs> {
        let shed_model = self.load_model(Head::Shedding)?;
        let flow_model = self.load_model(Head::BranchFlow)?;
        let shed_graph = GraphSpec::for_grid(&self.grid, Head::Shedding);
        let flow_graph = GraphSpec::for_grid(&self.grid, Head::BranchFlow);
        let statics = static_features(&self.grid);
        let (z, q, horizon) = (self.grid.num_zones(), self.grid.num_branches(), set.horizon);
        let mut shed = Array3::zeros((idx.len(), z, horizon));
        let mut flows = Array3::zeros((idx.len(), horizon, q));
        for (k, &n) in idx.iter().enumerate() {
            let profile = set.bus_profile(&self.grid, n)?;
            let x = node_features(&statics, &profile);
            let (lo, hi) = bounds(&self.grid, Head::Shedding, &profile);
            let zonal = predict(&shed_model, &shed_graph, &x, &lo, &hi)?;
            for zi in 0..z {
                for t in 0..horizon {
                    shed[[k, zi, t]] = zonal[[zi, t]];
                }
            }
            let (lo, hi) = bounds(&self.grid, Head::BranchFlow, &profile);
            let f = predict_branch_flows(&flow_model, &flow_graph, &x, &lo, &hi, &self.ptdf)?;
            flows.index_axis_mut(ndarray::Axis(0), k).assign(&f);
        }
        Ok(RiskInputs {
            source: Source::Gnn,
            scenarios: idx.to_vec(),
            zone_names: self.grid.zones.iter().map(|z| z.name.clone()).collect(),
            shed: vec![(ShedCause::Total, shed)],
            flows,
            branch_ids: self.grid.branches.iter().map(|b| b.id).collect(),
            flow_limits: self.grid.branches.iter().map(|b| b.flow_limit).collect(),
        })
    }

    /// Computes and writes the risk report of one pathway.
    pub fn assess(&self, source: Source) -> Result<RiskReport> {
        let set = self.load_scenarios()?;
        let labels = self.load_labels()?;
        let idx = self.assessed_scenarios(&labels);
        let inputs = match source {
            Source::Milp => RiskInputs::from_labels(&self.grid, &labels, &idx)?,
            Source::Gnn => self.gnn_inputs(&set, &idx)?,
        };
        let mut report = assess(&inputs, &self.config.risk, &self.branch_set(&labels)?)?;
        report.config_hash = Some(self.hashes.reports.clone());
        self.ensure_output()?;
        write_report_json(&report, &self.report_path(source, "json"))?;
        write_risk_csv(&report, &self.report_path(source, "csv"))?;
        Ok(report)
    }

    pub fn load_report(&self, source: Source) -> Result<RiskReport> {
        let path = self.report_path(source, "json");
        let report = read_report_json(&path)?;
        self.check_hash(&path, report.config_hash.as_deref(), &self.hashes.reports)?;
        Ok(report)
    }

    /// Divergence of the GNN report from the MILP report.
    pub fn compare(&self) -> Result<Divergence> {
        let reference = self.load_report(Source::Milp)?;
        let candidate = self.load_report(Source::Gnn)?;
        let div = compare_pathways(&reference, &candidate, &self.config.compare)?;
        write_divergence_csv(&div, &self.divergence_path())?;
        Ok(div)
    }

    /// Writes the per-figure CSVs from whichever reports and MRE tables
    /// exist. Returns the files written.
    pub fn report(&self) -> Result<Vec<PathBuf>> {
        let mut reports = Vec::new();
        for source in [Source::Milp, Source::Gnn] {
            if self.report_path(source, "json").exists() {
                reports.push(self.load_report(source)?);
            }
        }
        if reports.is_empty() {
            return Err(Error::InvalidParameter("no risk report found; run the assess stage first".into()));
        }
        let mut mre = Vec::new();
        for head in Head::ALL {
            let path = self.mre_path(head);
            if path.exists() {
                mre.push((head, read_mre_csv(&path)?));
            }
        }
        let dir = self.figures_dir();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_figures(&dir, &self.hashes.reports, &reports, &mre)
    }
}

pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) =
        spec.split_once('=').ok_or_else(|| Error::InvalidParameter(format!("override `{spec}` is not KEY=VALUE")))?;
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, parents) = parts.split_last().expect("split yields one part");
    let mut node = table;
    for p in parents {
        node = node
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::InvalidParameter(format!("`{p}` in `{key}` is not a table")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

fn read_mre_csv(path: &Path) -> Result<MreTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut names = Vec::new();
    let mut values = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let mut cells = line.split(',');
        names.push(cells.next().unwrap_or_default().to_string());
        let row = cells.map(str::parse).collect::<std::result::Result<Vec<f64>, _>>();
        values.push(row.map_err(|e| Error::format("MRE table", format!("{}: {e}", path.display())))?);
    }
    Ok(MreTable { names, values })
}
