//! Command-line surface.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use grasped_core::bench::{inject_contextual, inject_structural, roc_auc, DatasetStats};
use grasped_core::train::{score_with_context, TrainingContext};
use grasped_core::{train, Graph};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::dataset::{load_dataset, require_labels, save_dataset};
use crate::error::{CliError, Result};
use crate::formats::{
    auc_summary, loss_csv, mean_std, parse_scores, scores_tsv, stats_row, InjectionParams, Provenance, STATS_HEADER,
};
use crate::gridsearch;

#[derive(Debug, Parser)]
#[command(name = "grasped", version, about = "Spectral graph autoencoder anomaly detection")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Dataset directory.
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    /// Run configuration file (`key = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base random seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Number of runs with consecutive seeds.
    #[arg(long, global = true)]
    pub repeat: Option<usize>,
    /// Override a configuration key, e.g. `--set lambda_x=1`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    pub dump_config: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InjectKind {
    /// Contextual: feature replacement.
    Ctx,
    /// Structural: planted cliques.
    Str,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Neighborhood similarity and degree statistics of a labeled dataset.
    Stats,
    /// Write a copy of a dataset with injected anomalies.
    Inject {
        #[arg(long = "type", value_enum)]
        kind: InjectKind,
        /// Fraction of nodes to inject.
        #[arg(long)]
        rate: f64,
        /// Candidate pool size for contextual injection.
        #[arg(long, default_value_t = grasped_core::bench::DEFAULT_CANDIDATES)]
        candidates: usize,
        /// Clique size for structural injection.
        #[arg(long, default_value_t = grasped_core::bench::DEFAULT_CLIQUE_SIZE)]
        clique_size: usize,
    },
    /// Train one model per seed; writes checkpoint, loss history and scores.
    Train,
    /// Score a dataset with saved checkpoints.
    Score {
        /// Checkpoint files written by `train`.
        #[arg(long, required = true, num_args = 1..)]
        checkpoint: Vec<PathBuf>,
        /// Degree loss weight for scoring (default: from the checkpoint).
        #[arg(long)]
        lambda_d: Option<f64>,
        /// Neighborhood loss weight for scoring.
        #[arg(long)]
        lambda_n: Option<f64>,
        /// Attribute loss weight for scoring.
        #[arg(long)]
        lambda_x: Option<f64>,
    },
    /// ROC-AUC of score files against dataset labels.
    Eval {
        /// Score files, or directories searched for `scores*.tsv`.
        #[arg(long, required = true, num_args = 1..)]
        scores: Vec<PathBuf>,
    },
    /// Grid search over `grid.<key>` axes.
    Gridsearch {
        /// Run cells in parallel.
        #[arg(long)]
        parallel: bool,
    },
}

impl Cli {
    /// Config file, then `--set` overrides, then the dedicated flags.
    pub fn run_config(&self) -> Result<RunConfig> {
        let c = &self.common;
        let mut cfg = match &c.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        for o in &c.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {o:?}")))?;
            cfg.set(k.trim(), v.trim())
                .map_err(|m| CliError::Usage(format!("--set {o}: {m}")))?;
        }
        if let Some(d) = &c.dataset {
            cfg.dataset = Some(d.clone());
        }
        if let Some(o) = &c.out {
            cfg.out = Some(o.clone());
        }
        if let Some(s) = c.seed {
            cfg.hyper.seed = s;
            cfg.seeds = None;
        }
        if let Some(r) = c.repeat {
            cfg.repeat = Some(r);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn dataset_dir(cfg: &RunConfig) -> Result<&Path> {
    cfg.dataset
        .as_deref()
        .ok_or_else(|| CliError::Usage("--dataset is required".into()))
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    let out = cfg
        .out
        .as_deref()
        .ok_or_else(|| CliError::Usage("--out is required".into()))?;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    Ok(out)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn warn_clamped(count: usize, what: &str) {
    if count > 0 {
        eprintln!("warning: {what}: log-variance clamped to ±30 for {count} nodes");
    }
}

/// Runs a parsed command line; stdout output is returned for printing.
pub fn run(cli: &Cli) -> Result<String> {
    let cfg = cli.run_config()?;
    if cli.common.dump_config {
        return Ok(cfg.to_text());
    }
    match &cli.command {
        Command::Stats => cmd_stats(&cfg),
        Command::Inject {
            kind,
            rate,
            candidates,
            clique_size,
        } => cmd_inject(&cfg, *kind, *rate, *candidates, *clique_size),
        Command::Train => cmd_train(&cfg),
        Command::Score {
            checkpoint,
            lambda_d,
            lambda_n,
            lambda_x,
        } => cmd_score(&cfg, checkpoint, [*lambda_d, *lambda_n, *lambda_x]),
        Command::Eval { scores } => cmd_eval(&cfg, scores),
        Command::Gridsearch { parallel } => cmd_gridsearch(&cfg, *parallel),
    }
}

fn cmd_stats(cfg: &RunConfig) -> Result<String> {
    let dir = dataset_dir(cfg)?;
    let g = load_dataset(dir)?;
    require_labels(&g, dir)?;
    let stats = DatasetStats::compute(&g)?;
    let name = dir
        .file_name()
        .map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned());
    let text = format!("{STATS_HEADER}\n{}\n", stats_row(&name, &stats));
    if let Some(out) = &cfg.out {
        fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
        write(&out.join("stats.csv"), &text)?;
    }
    Ok(text)
}

fn cmd_inject(cfg: &RunConfig, kind: InjectKind, rate: f64, candidates: usize, clique_size: usize) -> Result<String> {
    let dir = dataset_dir(cfg)?;
    let g = load_dataset(dir)?;
    let seed = cfg.hyper.seed;
    let (inj, kind_name, parameters) = match kind {
        InjectKind::Ctx => (
            inject_contextual(&g, rate, candidates, seed)?,
            "ctx",
            InjectionParams::Contextual { candidates },
        ),
        InjectKind::Str => (
            inject_structural(&g, rate, clique_size, seed)?,
            "str",
            InjectionParams::Structural { clique_size },
        ),
    };
    let out = out_dir(cfg)?;
    save_dataset(out, &inj.graph)?;
    let prov = Provenance {
        source: dir.display().to_string(),
        kind: kind_name,
        rate,
        seed,
        parameters,
        injected_nodes: inj.targets.len(),
        added_edges: inj.added_edges,
    };
    write(&out.join("provenance.json"), &prov.to_json())?;
    Ok(format!(
        "injected {} nodes ({} new edges) into {}\n",
        inj.targets.len(),
        inj.added_edges,
        out.display()
    ))
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}

fn cmd_train(cfg: &RunConfig) -> Result<String> {
    let dir = dataset_dir(cfg)?;
    let g = load_dataset(dir)?;
    let out = out_dir(cfg)?;
    let mut report = String::new();
    for seed in cfg.run_seeds() {
        let hyper = grasped_core::HyperParams {
            seed,
            ..cfg.hyper.clone()
        };
        let start = Instant::now();
        let (params, history) = train(&g, &hyper)?;
        let ctx = TrainingContext::new(&g, &hyper)?;
        let eval = score_with_context(&ctx, &params, &hyper)?;
        warn_clamped(eval.clamped_nodes, &format!("seed {seed}"));

        let run_dir = seed_dir(out, seed);
        fs::create_dir_all(&run_dir).map_err(|e| CliError::io(&run_dir, e))?;
        let ckpt = Checkpoint {
            hyper,
            feature_dim: g.feature_dim(),
            params,
        };
        ckpt.save(&run_dir.join("checkpoint.txt"))?;
        write(&run_dir.join("loss.csv"), &loss_csv(&history.history))?;
        write(&run_dir.join("scores.tsv"), &scores_tsv(&eval.scores))?;
        let last = history.history.last().map_or(f64::NAN, |r| r.total);
        report.push_str(&format!(
            "seed {seed}: final loss {last:.6} ({:.1}s) -> {}\n",
            start.elapsed().as_secs_f64(),
            run_dir.display()
        ));
    }
    Ok(report)
}

fn load_checkpoint_for(g: &Graph, path: &Path) -> Result<Checkpoint> {
    let ckpt = Checkpoint::load(path)?;
    if ckpt.feature_dim != g.feature_dim() {
        return Err(CliError::Data(format!(
            "{}: trained on {} features, dataset has {}",
            path.display(),
            ckpt.feature_dim,
            g.feature_dim()
        )));
    }
    Ok(ckpt)
}

fn cmd_score(cfg: &RunConfig, checkpoints: &[PathBuf], weights: [Option<f64>; 3]) -> Result<String> {
    let dir = dataset_dir(cfg)?;
    let g = load_dataset(dir)?;
    let out = out_dir(cfg)?;
    let mut report = String::new();
    for path in checkpoints {
        let mut ckpt = load_checkpoint_for(&g, path)?;
        let h = &mut ckpt.hyper;
        for (slot, w) in [&mut h.lambda_d, &mut h.lambda_n, &mut h.lambda_x]
            .into_iter()
            .zip(weights)
        {
            if let Some(w) = w {
                *slot = w;
            }
        }
        h.validate()?;
        let ctx = TrainingContext::new(&g, &ckpt.hyper)?;
        let eval = score_with_context(&ctx, &ckpt.params, &ckpt.hyper)?;
        warn_clamped(eval.clamped_nodes, &path.display().to_string());
        let target = out.join(format!("scores-seed{}.tsv", ckpt.hyper.seed));
        write(&target, &scores_tsv(&eval.scores))?;
        report.push_str(&format!("{} -> {}\n", path.display(), target.display()));
    }
    Ok(report)
}

/// Score files named on the command line; directories expand to the
/// `scores*.tsv` files in them and in their immediate subdirectories.
fn collect_score_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    fn matching(dir: &Path) -> Result<Vec<PathBuf>> {
        let mut found = Vec::new();
        let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| CliError::io(dir, e))?.path();
            let name = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            if path.is_file() && name.starts_with("scores") && name.ends_with(".tsv") {
                found.push(path);
            }
        }
        Ok(found)
    }
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found = matching(p)?;
            let subdirs = fs::read_dir(p).map_err(|e| CliError::io(p, e))?;
            for entry in subdirs {
                let sub = entry.map_err(|e| CliError::io(p, e))?.path();
                if sub.is_dir() {
                    found.extend(matching(&sub)?);
                }
            }
            found.sort();
            if found.is_empty() {
                return Err(CliError::Data(format!("no scores*.tsv files under {}", p.display())));
            }
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn cmd_eval(cfg: &RunConfig, paths: &[PathBuf]) -> Result<String> {
    let dir = dataset_dir(cfg)?;
    let g = load_dataset(dir)?;
    let labels = require_labels(&g, dir)?;
    let mut report = String::new();
    let mut aucs = Vec::new();
    for path in collect_score_files(paths)? {
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let scores = parse_scores(&text, g.num_nodes(), &path)?;
        let auc = roc_auc(&scores, labels)?.auc;
        report.push_str(&format!("{}\t{auc:.6}\n", path.display()));
        aucs.push(auc);
    }
    report.push_str(&format!("AUC {} over {} runs\n", auc_summary(&aucs), aucs.len()));
    Ok(report)
}

fn cmd_gridsearch(cfg: &RunConfig, parallel: bool) -> Result<String> {
    let dir = dataset_dir(cfg)?;
    let g = load_dataset(dir)?;
    let labels = require_labels(&g, dir)?;
    let out = out_dir(cfg)?;
    let axes: Vec<(String, Vec<f64>)> = if cfg.grid.is_empty() {
        grasped_core::HyperParams::default_grid()
            .into_iter()
            .map(|(a, v)| (a.to_string(), v))
            .collect()
    } else {
        cfg.grid.clone()
    };
    let cells = gridsearch::cells(&cfg.hyper, &axes)?;
    let seeds = cfg.run_seeds();
    let results = gridsearch::run_grid(&g, labels, &cells, &seeds, out, parallel)?;
    write(&out.join("grid.csv"), &gridsearch::grid_csv(&results))?;

    let Some(best) = gridsearch::best(&results) else {
        let first = results.iter().find_map(|r| r.runs.as_ref().err().cloned());
        return Err(CliError::Numerical(format!(
            "every grid cell failed; first error: {}",
            first.unwrap_or_default()
        )));
    };
    let best_cfg = RunConfig {
        dataset: cfg.dataset.clone(),
        hyper: best.cell.hyper.clone(),
        seeds: Some(seeds),
        ..RunConfig::default()
    };
    write(&out.join("best.conf"), &best_cfg.to_text())?;
    let aucs: Vec<f64> = best
        .runs
        .as_ref()
        .map(|r| r.iter().map(|x| x.1).collect())
        .unwrap_or_default();
    let failed = results.iter().filter(|r| r.runs.is_err()).count();
    let (mean, _) = mean_std(&aucs);
    let mut report = format!(
        "{} cells, {} failed\nbest cell {} ({}): AUC {} (mean {mean:.6})\n",
        results.len(),
        failed,
        best.cell.index,
        best.cell.params(),
        auc_summary(&aucs)
    );
    report.push_str(&format!("wrote {}\n", out.join("best.conf").display()));
    Ok(report)
}
