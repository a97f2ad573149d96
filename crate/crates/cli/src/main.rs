use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use palpation::experiment::{
    eval_ply, export_gt, run_experiment, run_matrix, table_one_conditions, ExperimentConfig,
};
use palpation::palpation::{Mode, Strategy};

#[derive(Parser)]
#[command(name = "palpate", version, about = "Simulated tactile palpation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one condition.
    Run(Overrides),
    /// Run the 8-condition comparison table.
    Matrix(Overrides),
    /// Write the ground-truth tumor cloud as PLY.
    ExportGt {
        #[command(flatten)]
        overrides: Overrides,
        /// Output file; defaults to `<out>/gt.ply`.
        #[arg(long)]
        path: Option<PathBuf>,
    },
    /// Score a reconstructed PLY cloud against a ground-truth PLY cloud.
    Eval {
        #[arg(long)]
        recon: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Distance threshold in metres.
        #[arg(long, default_value_t = 0.003)]
        r: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Bo,
    Rs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Cf,
    Discrete,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Hemisphere,
    Ellipsoid,
    Crescent,
}

#[derive(Args)]
struct Overrides {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    shape: Option<ShapeArg>,
    /// Palpation budget.
    #[arg(long)]
    budget: Option<usize>,
}

impl Overrides {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)
                .with_context(|| format!("loading config {}", p.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(b) = self.budget {
            cfg.budget = b;
        }
        if let Some(s) = self.strategy {
            cfg.strategy = match s {
                StrategyArg::Bo => Strategy::Bo,
                StrategyArg::Rs => Strategy::Rs,
            };
        }
        if let Some(m) = self.mode {
            cfg.mode = match m {
                ModeArg::Cf => Mode::Cf,
                ModeArg::Discrete => Mode::Discrete,
            };
        }
        if let Some(s) = self.shape {
            cfg.set_shape(match s {
                ShapeArg::Hemisphere => "hemisphere",
                ShapeArg::Ellipsoid => "ellipsoid",
                ShapeArg::Crescent => "crescent",
            })?;
        }
        Ok(cfg)
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(o) => {
            let cfg = o.resolve()?;
            let rep = run_experiment(&cfg)?;
            println!(
                "{} {}: mean F {:.3}, max F {:.3}, {} failed of {} trials -> {}",
                rep.label,
                rep.shape,
                rep.mean_f,
                rep.max_f,
                rep.failed(),
                rep.trials.len(),
                rep.output_dir.display()
            );
        }
        Command::Matrix(o) => {
            let base = o.resolve()?;
            let root = base.output_dir.clone();
            let cfgs = table_one_conditions(&base, &root)?;
            let rep = run_matrix(&cfgs, &root)?;
            println!("{:<14} {:<11} {:>7} {:>7} {:>4}", "condition", "shape", "mean_F", "max_F", "#P");
            for r in &rep.rows {
                let status = r.error.as_deref().unwrap_or("");
                println!(
                    "{:<14} {:<11} {:>7.3} {:>7.3} {:>4} {}",
                    r.condition, r.shape, r.mean_f, r.max_f, r.budget, status
                );
            }
            for (shape, c) in &rep.combined {
                println!("{:<14} {:<11} {:>7.3}", "combined", shape, c.fscore);
            }
            println!("tables written to {}", root.display());
        }
        Command::ExportGt { overrides, path } => {
            let cfg = overrides.resolve()?;
            let path = path.unwrap_or_else(|| cfg.output_dir.join("gt.ply"));
            let gt = export_gt(&cfg, &path)?;
            println!("wrote {} points to {}", gt.len(), path.display());
        }
        Command::Eval { recon, gt, r } => {
            let rep = eval_ply(&recon, &gt, r)?;
            println!(
                "precision {:.4} recall {:.4} F {:.4} (r = {} m, {} vs {} points)",
                rep.precision, rep.recall, rep.fscore, rep.r, rep.n_recon, rep.n_gt
            );
        }
    }
    Ok(())
}
