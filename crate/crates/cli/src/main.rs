use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qinc::data::SplitName;
use qinc::gen::{ScenarioConfig, ScheduleSource};
use qinc_cli::{
    cmd_experiment, cmd_features, cmd_gen, cmd_gradcheck, render_gradcheck, with_schedule_file, CliResult,
    ExperimentConfig, FeaturesArgs,
};

#[derive(Parser)]
#[command(name = "qinc", version, about = "Hybrid quantum-classical traffic incident detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a corridor and write bsm.csv, schedule.json and topology.json.
    Gen(GenArgs),
    /// Aggregate a BSM CSV into labeled feature rows.
    Features(FeaturesCmd),
    /// Train and evaluate models over repeated seeds.
    Experiment(ExperimentArgs),
    /// Check the simulator and gradients against independent references.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long)]
    zones: Option<usize>,
    /// Scenario length in seconds.
    #[arg(long)]
    duration: Option<u64>,
    #[arg(long, env = "QINC_SEED")]
    seed: Option<u64>,
    /// Fixed incident count instead of the prevalence target.
    #[arg(long, conflicts_with = "schedule")]
    incidents: Option<usize>,
    /// JSON list of {zone, start_s, duration_s}.
    #[arg(long)]
    schedule: Option<PathBuf>,
}

impl ScenarioArgs {
    fn apply(&self, mut config: ScenarioConfig) -> CliResult<ScenarioConfig> {
        if let Some(z) = self.zones {
            config.n_zones = z;
        }
        if let Some(d) = self.duration {
            config.duration_s = d;
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if let Some(n) = self.incidents {
            config.schedule = ScheduleSource::Auto { n_incidents: Some(n) };
        }
        with_schedule_file(config, self.schedule.as_deref())
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct FeaturesCmd {
    #[arg(long)]
    bsm: PathBuf,
    /// Without a schedule every label is 0.
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Neighbor table; defaults to a two-direction corridor of --zones.
    #[arg(long)]
    topology: Option<PathBuf>,
    #[arg(long, default_value_t = 56)]
    zones: usize,
    /// Aggregation bucket in seconds.
    #[arg(long, default_value_t = 1)]
    bucket: u64,
    /// Fill empty buckets up to this many seconds.
    #[arg(long)]
    duration: Option<u64>,
    #[arg(long, default_value = "features.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Comma-separated: DS-1,DS-2,DS-3.
    #[arg(long, value_delimiter = ',')]
    splits: Option<Vec<SplitName>>,
    /// Comma-separated: classical, hybrid-<n>q.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl ExperimentArgs {
    fn resolve(&self) -> CliResult<ExperimentConfig> {
        let mut config = match &self.config {
            Some(p) => ExperimentConfig::read(p)?,
            None => ExperimentConfig::default(),
        };
        config.scenario = self.scenario.apply(config.scenario)?;
        if let Some(s) = self.scenario.seed {
            config.base_seed = s;
        }
        if let Some(s) = &self.splits {
            config.splits = s.clone();
        }
        if let Some(m) = &self.models {
            config.models = m.clone();
        }
        if let Some(r) = self.runs {
            config.n_runs = r;
        }
        if let Some(e) = self.epochs {
            config.train.epochs = e;
        }
        if let Some(b) = self.batch {
            config.train.batch_size = b;
        }
        if let Some(lr) = self.lr {
            config.train.learning_rate = lr;
        }
        if let Some(j) = self.jobs {
            config.jobs = j;
        }
        Ok(config)
    }
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, env = "QINC_SEED", default_value_t = 0)]
    seed: u64,
    /// Perturb analytic gradients to confirm the check can fail.
    #[arg(long, hide = true)]
    corrupt_gradient: bool,
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Gen(args) => {
            let config = args.scenario.apply(ScenarioConfig::default())?;
            let s = cmd_gen(&config, &args.out)?;
            println!(
                "wrote {} records, {} rows, {} incidents, prevalence {:.4} to {}",
                s.records,
                s.rows,
                s.incidents,
                s.prevalence,
                args.out.display()
            );
        }
        Command::Features(args) => {
            if args.schedule.is_none() {
                eprintln!("warning: no --schedule given; all labels are 0");
            }
            let s = cmd_features(&FeaturesArgs {
                bsm: args.bsm,
                schedule: args.schedule,
                topology: args.topology,
                n_zones: args.zones,
                n_directions: 2,
                bucket_seconds: args.bucket,
                horizon_s: args.duration,
                out: args.out.clone(),
            })?;
            println!("wrote {} rows, prevalence {:.4} to {}", s.rows, s.prevalence, args.out.display());
        }
        Command::Experiment(args) => {
            let config = args.resolve()?;
            let report = cmd_experiment(&config, &args.out)?;
            print!("{}", report.render_tables()?);
        }
        Command::Gradcheck(args) => {
            let reports = cmd_gradcheck(args.seed, args.corrupt_gradient)?;
            print!("{}", render_gradcheck(&reports));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
