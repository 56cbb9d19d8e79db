use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use relmimic::checkpoint::Checkpoint;
use relmimic::core::env::record_demos;
use relmimic::core::metrics::ccdf;
use relmimic::core::nn::{AgentConfig, Policy};
use relmimic::report::{self, curves_svg};
use relmimic::train::{self, evaluate_policy, eval_seeds};
use relmimic::{demo_file, run, Error, Result, TrainConfig, Variant};

#[derive(Parser)]
#[command(name = "relmimic", version, about = "Adversarial imitation from pixels with relational reward networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Record scripted-expert demonstrations to a file.
    DemoRecord {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        episodes: usize,
        #[arg(long, default_value_t = 10_000)]
        seed: u64,
        #[arg(long, default_value_t = 32)]
        resolution: usize,
    },
    /// Train one variant over one or more seeds.
    Train(TrainArgs),
    /// Roll out a checkpointed policy deterministically.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
    },
    /// Aggregate finished runs into curves, CCDF tables and a plot.
    Report {
        /// Run directories (repeatable).
        #[arg(long = "run", required = true)]
        runs: Vec<PathBuf>,
        /// Write learning curves as SVG.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Print the default configuration.
    Config,
}

#[derive(Args)]
struct TrainArgs {
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from the reduced single-core schedule instead of the defaults.
    #[arg(long, conflicts_with = "config")]
    desk: bool,
    /// local, non-local-reward, non-local-value or non-local-all.
    #[arg(long)]
    variant: Option<Variant>,
    /// Frames per stacked state.
    #[arg(long)]
    k: Option<usize>,
    /// A count (`3` means 0,1,2) or a comma list.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    learners: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    /// Demonstration file; recorded on the fly when omitted.
    #[arg(long)]
    demos: Option<PathBuf>,
    /// Further `key=value` overrides (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    quiet: bool,
}

impl TrainArgs {
    fn resolve(&self) -> Result<TrainConfig> {
        let mut cfg = match &self.config {
            Some(p) => TrainConfig::load(p)?,
            None if self.desk => TrainConfig::desk(),
            None => TrainConfig::default(),
        };
        if let Some(v) = self.variant {
            cfg.variant = v;
        }
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = relmimic::config::parse_seeds(s)?;
        }
        if let Some(l) = self.learners {
            cfg.learners = l;
        }
        if let Some(i) = self.iters {
            cfg.iterations = i;
        }
        if let Some(d) = &self.demos {
            cfg.demos = Some(d.clone());
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("`--set {kv}`: expected KEY=VALUE")))?;
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.3}"))
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::DemoRecord {
            out,
            episodes,
            seed,
            resolution,
        } => {
            if resolution < 32 {
                return Err(Error::Config("resolution must be at least 32".into()));
            }
            let (demos, progress) = record_demos(episodes, seed, resolution)?;
            demo_file::save(&demos, &out)?;
            println!(
                "wrote {} episodes ({} frames) to {}, mean progress {progress:.2} m",
                demos.len(),
                demos.episodes().iter().map(Vec::len).sum::<usize>(),
                out.display()
            );
        }
        Command::Train(args) => {
            let cfg = args.resolve()?;
            let quiet = args.quiet;
            let outcome = run::run_training(&cfg, &args.out, |seed, row| {
                if !quiet {
                    println!(
                        "seed {seed} iter {:4} t {:7.1}s surrogate {} progress {} eval {} disc_acc {}",
                        row.iteration,
                        row.wall_time,
                        fmt_opt(row.surrogate_return),
                        fmt_opt(row.train_progress),
                        fmt_opt(row.eval_progress),
                        fmt_opt(row.disc_accuracy)
                    );
                }
            })?;
            println!(
                "{}: final mean progress {:.3} m, CCDF area {:.3}, expert {:.3} m",
                cfg.variant.label(),
                outcome.report.final_mean,
                outcome.report.ccdf.area,
                outcome.expert_mean
            );
        }
        Command::Eval { checkpoint, episodes } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let cfg = &ck.config;
            let agent = AgentConfig::new(cfg.k, cfg.resolution, cfg.variant.policy_stack(), train::ACTION_DIM);
            let mut policy = Policy::new(&agent, 0)?;
            ck.restore(&mut policy.params)?;
            let returns = evaluate_policy(&policy, cfg, &eval_seeds(episodes))?;
            let rep = ccdf(&returns)?;
            for (i, r) in returns.iter().enumerate() {
                println!("episode {i}: {r:.3} m");
            }
            println!(
                "mean {:.3} m, CCDF area {:.3}",
                returns.iter().sum::<f64>() / returns.len() as f64,
                rep.area
            );
        }
        Command::Report { runs, svg } => {
            let mut series = Vec::new();
            for run in &runs {
                let label = TrainConfig::load(&run.join("config.txt"))
                    .map(|c| c.variant.label().to_string())
                    .unwrap_or_else(|_| run.display().to_string());
                let rep = report::report_run(run, &label, None)?;
                println!(
                    "{label}: {} seeds, final mean {:.3} m, CCDF area {:.3}",
                    rep.seeds.len(),
                    rep.final_mean,
                    rep.ccdf.area
                );
                series.push((label, rep.curve));
            }
            if let Some(path) = svg {
                std::fs::write(&path, curves_svg(&series)).map_err(|e| Error::io(&path, e))?;
            }
        }
        Command::Config => print!("{}", TrainConfig::default().to_text()),
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
