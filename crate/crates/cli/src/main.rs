use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use gridrisk::gnn::Head;
use gridrisk::pipeline::{Pipeline, PipelineConfig};
use gridrisk::risk::{MetricKind, Source};
use gridrisk::scuc::{LabelOptions, LabelStatus};

#[derive(Parser)]
#[command(name = "gridrisk", version, about = "Hours-ahead grid risk assessment pipeline")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(short, long, global = true, default_value = "gridrisk.toml")]
    config: PathBuf,
    /// Override a config field, e.g. `--set train.epochs=200`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Artifact directory, relative to the working directory.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of scenarios.
    #[arg(short = 'n', long, global = true)]
    scenarios: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw correlated load and wind scenarios.
    Sample,
    /// Solve the SCUC for every scenario, resuming a partial label file.
    Label {
        /// Worker threads; the labels do not depend on this.
        #[arg(short, long, default_value_t = 1)]
        workers: usize,
        /// Scenarios solved between two appends to the label file.
        #[arg(long, default_value_t = 16)]
        chunk: usize,
    },
    /// Train surrogate heads on the labels.
    Train {
        #[arg(long, value_enum, default_value_t = HeadArg::All)]
        head: HeadArg,
    },
    /// Compute reliability and risk metrics for one pathway.
    Assess {
        #[arg(long, value_enum, default_value_t = SourceArg::Milp)]
        source: SourceArg,
    },
    /// Compare the GNN report with the MILP report; exits 1 when a
    /// difference exceeds the configured thresholds.
    Compare,
    /// Write per-figure CSVs from the reports and error tables.
    Report,
}

#[derive(Clone, Copy, ValueEnum)]
enum HeadArg {
    Generation,
    Shedding,
    BranchFlow,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Milp,
    Gnn,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load_with_overrides(&cli.config, &cli.overrides)
        .with_context(|| format!("loading config {}", cli.config.display()))?;
    if let Some(o) = &cli.output {
        cfg.output = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.scenarios {
        cfg.scenarios = n;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let p = Pipeline::new(load_config(cli)?)?;
    match &cli.command {
        Command::Sample => {
            let set = p.sample()?;
            println!("wrote {} scenarios x {} steps to {}", set.n, set.horizon, p.scenarios_path().display());
            println!("config {}", p.hashes.scenarios);
        }
        Command::Label { workers, chunk } => {
            let opts = LabelOptions { workers: *workers, chunk: *chunk, limit: None };
            let labels = p.label(&opts)?;
            let failed = labels.records.iter().filter(|r| r.status == LabelStatus::Failed).count();
            let gap = labels.records.iter().filter(|r| r.status == LabelStatus::GapLimited).count();
            println!(
                "{} labels in {} ({failed} failed, {gap} gap-limited)",
                labels.records.len(),
                p.labels_path().display()
            );
            println!("config {}", p.hashes.labels);
        }
        Command::Train { head } => {
            let heads = match head {
                HeadArg::Generation => vec![Head::Generation],
                HeadArg::Shedding => vec![Head::Shedding],
                HeadArg::BranchFlow => vec![Head::BranchFlow],
                HeadArg::All => Head::ALL.to_vec(),
            };
            println!("config {}", p.hashes.models);
            for h in heads {
                let (_, report, mre) = p.train(h)?;
                println!(
                    "{h}: best epoch {} of {}, val loss {:.4e}, max test MRE {:.2}%",
                    report.best_epoch,
                    report.epochs.len(),
                    report.best_val_loss,
                    mre.max()
                );
                for (name, row) in mre.names.iter().zip(&mre.values) {
                    let cells: Vec<String> = row.iter().map(|v| format!("{v:.1}")).collect();
                    println!("  {name:>12}: {}", cells.join(" "));
                }
            }
        }
        Command::Assess { source } => {
            println!("config {}", p.hashes.reports);
            let source = match source {
                SourceArg::Milp => Source::Milp,
                SourceArg::Gnn => Source::Gnn,
            };
            let report = p.assess(source)?;
            println!(
                "{} scenarios, branch set {:?}; wrote {}",
                report.scenarios,
                report.branch_set,
                p.report_path(source, "json").display()
            );
        }
        Command::Compare => {
            println!("config {}", p.hashes.reports);
            let div = p.compare()?;
            let exceeded = div.rows.iter().filter(|r| r.exceeds).count();
            println!(
                "{} rows, {exceeded} beyond thresholds; max probability diff {:.4}, max risk rel diff {:.4}",
                div.rows.len(),
                div.max_abs(MetricKind::Probability),
                div.max_rel()
            );
            println!("wrote {}", p.divergence_path().display());
            if div.any_exceeds() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Report => {
            for path in p.report()? {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
