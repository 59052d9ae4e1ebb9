use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use focalray::environment::RewardMode;
use focalray::harness::{self, ExperimentConfig, Scheme, Summary, TrainEval};
use focalray::marl::{MappoModel, TrainOptions};
use focalray::reflector::Grouping;

#[derive(Parser)]
#[command(name = "focalray", version, about = "Reflector focal-point control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment config; unspecified keys take the desk defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Full-scale profile: 7×9 array, 3000 episodes, 300 eval steps.
    #[arg(long)]
    full: bool,
    /// Overrides the config scheme (none, flat, sa_focus, col_ma, ma_focus).
    #[arg(long)]
    scheme: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Train a learned scheme; writes metrics.csv and model.json.
    Train {
        #[command(flatten)]
        common: Common,
        /// Also save a checkpoint every this many episodes.
        #[arg(long, default_value_t = 0)]
        checkpoint_every: usize,
    },
    /// Evaluate one scheme under mobility; writes eval.csv and summary.json.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Evaluate the static baselines (and a checkpoint, if given).
    Baseline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Evaluate a checkpoint at several user counts.
    SweepUsers {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
        users: Vec<usize>,
    },
    /// Evaluate a checkpoint on arrays with different row counts.
    SweepRows {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "5,7,9,11")]
        rows: Vec<usize>,
    },
    /// Train and evaluate at several position-noise levels.
    SweepNoise {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.3,0.5,1.0")]
        sigmas: Vec<f64>,
    },
    /// Train and evaluate column and shifted tile grouping.
    AblateGrouping {
        #[command(flatten)]
        common: Common,
    },
    /// Train and evaluate distance-normalized reward variants.
    AblateReward {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
        exponents: Vec<u32>,
    },
    /// RSSI heatmap over the user region (CSV, PGM, user sidecar).
    Heatmap {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// File stem inside the output directory.
        #[arg(long, default_value = "heatmap")]
        name: String,
    },
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentConfig::desk(),
    };
    if c.full {
        let f = ExperimentConfig::full();
        cfg.rows = f.rows;
        cfg.cols = f.cols;
        cfg.episodes = f.episodes;
        cfg.eval_steps = f.eval_steps;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(s) = &c.scheme {
        cfg.scheme = Scheme::parse(s)?;
    }
    cfg.validate()?;
    std::fs::create_dir_all(&c.out).with_context(|| format!("creating {}", c.out.display()))?;
    Ok(cfg)
}

fn load_model(path: &Path) -> Result<MappoModel> {
    MappoModel::load(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn report_runs(runs: &[TrainEval], label: impl Fn(&ExperimentConfig) -> String, out: &Path) -> Result<()> {
    for r in runs {
        let tag = label(&r.config);
        r.run.curve.write_csv(out.join(format!("metrics_{tag}.csv")))?;
        r.run.model.save(out.join(format!("model_{tag}.json")))?;
        println!("{{\"run\":\"{tag}\",\"summary\":{}}}", Summary::from_report(&r.report).to_json());
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train { common, checkpoint_every } => {
            let cfg = load_config(&common)?;
            let opts = TrainOptions {
                checkpoint_dir: (checkpoint_every > 0).then(|| common.out.clone()),
                checkpoint_every,
            };
            let run = harness::train_scheme(&cfg, &opts)?;
            run.curve.write_csv(common.out.join("metrics.csv"))?;
            run.model.save(common.out.join("model.json"))?;
            let n = run.curve.episodes.len();
            let q = (n / 4).max(1);
            println!(
                "trained {} for {n} episodes: first-quartile reward {:.2}, last-quartile reward {:.2}",
                cfg.scheme.name(),
                run.curve.window_mean(0, q),
                run.curve.window_mean(n.saturating_sub(q), n)
            );
        }
        Command::Eval { common, checkpoint } => {
            let cfg = load_config(&common)?;
            let report = harness::run_baseline(&cfg, checkpoint.as_deref())?;
            write(&common.out.join("eval.csv"), &report.to_csv())?;
            let summary = Summary::from_report(&report).to_json();
            write(&common.out.join("summary.json"), &summary)?;
            println!("{summary}");
        }
        Command::Baseline { common, checkpoint } => {
            let cfg = load_config(&common)?;
            let mut schemes = vec![Scheme::None, Scheme::Flat];
            if checkpoint.is_some() {
                if !cfg.scheme.is_learned() {
                    bail!("--checkpoint needs a learned --scheme");
                }
                schemes.push(cfg.scheme);
            }
            for s in schemes {
                let c = ExperimentConfig { scheme: s, ..cfg.clone() };
                let report = harness::run_baseline(&c, checkpoint.as_deref().filter(|_| s.is_learned()))?;
                write(&common.out.join(format!("eval_{}.csv", s.name())), &report.to_csv())?;
                println!("{}", Summary::from_report(&report).to_json());
            }
        }
        Command::SweepUsers { common, checkpoint, users } => {
            let cfg = load_config(&common)?;
            let model = load_model(&checkpoint)?;
            for (k, r) in harness::sweep_users(&cfg, &model, &users)? {
                println!("{{\"users\":{k},\"summary\":{}}}", Summary::from_report(&r).to_json());
            }
        }
        Command::SweepRows { common, checkpoint, rows } => {
            let cfg = load_config(&common)?;
            let model = load_model(&checkpoint)?;
            for (n, r) in harness::sweep_rows(&cfg, &model, &rows)? {
                println!("{{\"rows\":{n},\"summary\":{}}}", Summary::from_report(&r).to_json());
            }
        }
        Command::SweepNoise { common, sigmas } => {
            let cfg = load_config(&common)?;
            let runs = harness::sweep_noise(&cfg, &sigmas)?;
            report_runs(&runs, |c| format!("noise{}", c.noise_m), &common.out)?;
        }
        Command::AblateGrouping { common } => {
            let cfg = load_config(&common)?;
            let runs = harness::ablate_grouping(&cfg, &[Grouping::Columns, Grouping::Shifted])?;
            report_runs(&runs, |c| format!("{:?}", c.grouping).to_lowercase(), &common.out)?;
        }
        Command::AblateReward { common, exponents } => {
            let cfg = load_config(&common)?;
            let runs = harness::ablate_reward(&cfg, &exponents)?;
            report_runs(
                &runs,
                |c| match c.reward {
                    RewardMode::DistNorm { n } => format!("f{n}"),
                    RewardMode::Mean => "mean".into(),
                },
                &common.out,
            )?;
        }
        Command::Heatmap { common, checkpoint, name } => {
            let cfg = load_config(&common)?;
            let model = checkpoint.as_deref().map(load_model).transpose()?;
            let files = harness::emit_heatmap(&cfg, model.as_ref(), &common.out.join(&name))?;
            println!(
                "wrote {}, {} and {} (mean {:.2} dBm)",
                files.csv.display(),
                files.pgm.display(),
                files.users.display(),
                files.heatmap.mean()
            );
        }
    }
    Ok(())
}
