use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hipmdp::env::Domain;
use hipmdp::error::HipError;
use hipmdp::harness::{
    describe_model, eval_control, eval_regression, filter_demo, fit, gen_data, load_batches, ExperimentConfig, AGENTS,
    IBP, METHODS,
};
use hipmdp::model::load_model;

#[derive(Parser, Debug)]
#[command(name = "hipmdp", version, about = "Hidden-parameter MDP experiments")]
struct Cli {
    /// Log progress to stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Collect Sarsa trajectories on every training setting.
    GenData(Common),
    /// Fit the latent model and the average model from collected data.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Directory written by gen-data [default: <output_dir>/data].
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Held-out prediction error against the GP baselines.
    EvalRegression {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        /// [default: <output_dir>/model.hipmdp]
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Learning curves of the true-model, average-model and latent-model agents.
    EvalControl {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        /// [default: <output_dir>/average.hipmdp]
        #[arg(long)]
        average: Option<PathBuf>,
    },
    /// Filter the weights of one sampled instance transition by transition.
    FilterDemo {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Transitions to filter.
        #[arg(long, default_value_t = 50)]
        points: usize,
    },
    /// Print K, the active features per (action, dimension) and the weight posteriors.
    InspectModel {
        model: PathBuf,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// TOML experiment config.
    #[arg(long, required_unless_present = "domain")]
    config: Option<PathBuf>,
    /// Use the domain defaults instead of a config file.
    #[arg(long, conflicts_with = "config")]
    domain: Option<Domain>,
    /// Base seed of every random stream.
    #[arg(long)]
    seed: u64,
    /// Override a config value, e.g. `--set gibbs.iterations=50`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Paper-scale budgets instead of desk scale.
    #[arg(long)]
    paper_scale: bool,
}

impl Common {
    fn config(&self) -> hipmdp::error::Result<ExperimentConfig> {
        let mut table: toml::Table = match (&self.config, self.domain) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| HipError::Config(format!("cannot read config {}: {e}", path.display())))?;
                text.parse()
                    .map_err(|e: toml::de::Error| HipError::Config(format!("{}: {e}", path.display())))?
            }
            (None, Some(domain)) => toml::Table::from_iter([("domain".to_string(), toml::Value::from(domain.to_string()))]),
            (None, None) => return Err(HipError::Config("either --config or --domain is required".into())),
        };
        for o in &self.overrides {
            apply_override(&mut table, o)?;
        }
        if let Some(out) = &self.out {
            table.insert("output_dir".into(), toml::Value::from(out.display().to_string()));
        }
        let cfg = ExperimentConfig::from_toml(&table.to_string())?;
        if self.paper_scale {
            cfg.paper_scale()
        } else {
            Ok(cfg)
        }
    }
}

/// `a.b.c=value`; the value is parsed as TOML and falls back to a string.
fn apply_override(table: &mut toml::Table, spec: &str) -> hipmdp::error::Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| HipError::Config(format!("override `{spec}` is not KEY=VALUE")))?;
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::from(raw));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        node = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| HipError::Config(format!("override `{key}`: `{part}` is not a table")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn write_config(cfg: &ExperimentConfig, dir: &Path) -> hipmdp::error::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HipError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let path = dir.join("resolved_config.toml");
    std::fs::write(&path, cfg.to_toml()).map_err(|e| HipError::Io { path, source: e })
}

fn run(cli: Cli) -> hipmdp::error::Result<()> {
    match cli.command {
        Command::GenData(c) => {
            let cfg = c.config()?;
            let dir = cfg.output_dir.join("data");
            let manifest = gen_data(&cfg, c.seed, &dir)?;
            println!("wrote {} instances to {}", manifest.instances.len(), dir.display());
        }
        Command::Fit { common: c, data } => {
            let cfg = c.config()?;
            let data = data.unwrap_or_else(|| cfg.output_dir.join("data"));
            let (_, batches) = load_batches(&data)?;
            write_config(&cfg, &cfg.output_dir)?;
            let out = fit(&cfg, &batches, c.seed, &cfg.output_dir)?;
            println!(
                "K = {} (chain {}, iteration {}); active rows per feature {:?}",
                out.model.num_features(),
                out.gibbs.chain,
                out.gibbs.iteration,
                out.model.active_counts()
            );
        }
        Command::EvalRegression { common: c, data, model } => {
            let cfg = c.config()?;
            let data = data.unwrap_or_else(|| cfg.output_dir.join("data"));
            let model = load_model(model.unwrap_or_else(|| cfg.output_dir.join("model.hipmdp")))?;
            let (_, batches) = load_batches(&data)?;
            let report = eval_regression(&cfg, &model, &batches, c.seed, &cfg.output_dir)?;
            for (m, name) in METHODS.iter().enumerate() {
                let v: Vec<String> = (0..model.dim())
                    .map(|d| {
                        let all: Vec<f64> = report.settings.iter().map(|s| s.mse(m, d).0).collect();
                        format!("{:.3e}", all.iter().sum::<f64>() / all.len() as f64)
                    })
                    .collect();
                println!("{name:<24} mean MSE per dimension [{}]", v.join(", "));
            }
            for (m, name) in METHODS.iter().enumerate().filter(|(m, _)| *m != IBP) {
                let (d, ci, _) = report.loglik_difference(m);
                println!("{name:<24} test log-likelihood minus ibp_gp: {d:.3} +/- {ci:.3}");
            }
        }
        Command::EvalControl { common: c, model, average } => {
            let cfg = c.config()?;
            let model = load_model(model.unwrap_or_else(|| cfg.output_dir.join("model.hipmdp")))?;
            let average = load_model(average.unwrap_or_else(|| cfg.output_dir.join("average.hipmdp")))?;
            let report = eval_control(&cfg, &model, &average, c.seed, &cfg.output_dir)?;
            for (a, name) in AGENTS.iter().enumerate() {
                println!(
                    "{name:<14} median episodes to threshold {}",
                    report.median_episodes_to_threshold(a)
                );
            }
        }
        Command::FilterDemo { common: c, model, points } => {
            let cfg = c.config()?;
            let model = load_model(model.unwrap_or_else(|| cfg.output_dir.join("model.hipmdp")))?;
            let trace = filter_demo(&cfg, &model, c.seed, points, &cfg.output_dir)?;
            if let Some(last) = trace.last() {
                println!("weights after {} transitions: {last:?}", trace.len() - 1);
            }
        }
        Command::InspectModel { model } => {
            print!("{}", describe_model(&load_model(model)?));
        }
    }
    Ok(())
}

fn exit_code(e: &HipError) -> u8 {
    match e {
        HipError::Config(_) => 2,
        HipError::NumericalFailure(_) | HipError::Divergence { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
