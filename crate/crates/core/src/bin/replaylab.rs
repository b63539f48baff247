use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use replaylab::harness::config::env_overrides;
use replaylab::harness::sweep::{default_workers, stage_seeds, sweep_with, two_stage_select_with, CellSummary};
use replaylab::harness::{preset, preset_names, run, ExperimentConfig, RunResult};
use replaylab::io;
use replaylab::Error;

#[derive(Parser)]
#[command(name = "replaylab", version, about = "Prioritized replay experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// TOML experiment file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment (see `replaylab presets`).
    #[arg(long)]
    preset: Option<String>,
    /// Override a config field, e.g. `--set agent.learning_rate=0.01`.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    set: Vec<String>,
    /// Output directory; defaults to `output.dir`, then `results/<name>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration for one seed.
    Run {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run every cell of the sweep for every configured seed.
    Sweep {
        #[command(flatten)]
        source: Source,
        /// Use seeds 0..N instead of the configured list.
        #[arg(long)]
        seeds: Option<u64>,
        /// Worker threads; defaults to the available cores.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Two-stage learning-rate selection.
    Select {
        #[command(flatten)]
        source: Source,
        /// Seeds per cell in the screening stage (`select.stage1_seeds`).
        #[arg(long)]
        stage1: Option<usize>,
        /// Fresh seeds for each group winner (`select.stage2_seeds`).
        #[arg(long)]
        stage2: Option<usize>,
        /// Worker threads; defaults to the available cores.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Summarise the run files in a directory into summary.csv.
    Aggregate {
        #[arg(long)]
        dir: PathBuf,
    },
    /// List built-in experiments or print one as TOML.
    Presets {
        #[arg(long, value_name = "NAME")]
        dump: Option<String>,
    },
}

fn load(source: &Source) -> replaylab::Result<ExperimentConfig> {
    let mut overrides = Vec::new();
    for s in &source.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::config(s.as_str(), "expected PATH=VALUE"))?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    match (&source.config, &source.preset) {
        (Some(path), _) => {
            let base = ExperimentConfig::load(path)?;
            base.with_overrides(&overrides)
        }
        (None, Some(name)) => {
            let mut all = env_overrides(std::env::vars());
            all.extend(overrides);
            preset(name)?.with_overrides(&all)
        }
        (None, None) => Err(Error::config("--config", "either --config or --preset is required")),
    }
}

fn out_dir(source: &Source, cfg: &ExperimentConfig) -> PathBuf {
    source
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| Path::new("results").join(&cfg.name))
}

fn progress(total: usize) -> impl Fn(&RunResult) + Sync {
    let done = AtomicUsize::new(0);
    move |r: &RunResult| {
        let n = done.fetch_add(1, Ordering::Relaxed) + 1;
        eprintln!(
            "[{n}/{total}] {} seed {} ({:.1}s)",
            r.config_hash, r.seed, r.wall_clock_secs
        );
    }
}

fn write_cells(path: &Path, cells: &[CellSummary]) -> anyhow::Result<()> {
    let mut out = String::from("label,group,config_hash,metric,learning_rate,seeds,mean_auc\n");
    for c in cells {
        out.push_str(&format!(
            "\"{}\",\"{}\",{},{},{},{},{}\n",
            c.label,
            c.group,
            c.config_hash,
            c.metric.name(),
            io::fmt_f64(c.learning_rate),
            c.per_seed.len(),
            io::fmt_f64(c.mean_auc)
        ));
    }
    io::atomic_write(path, out.as_bytes())?;
    Ok(())
}

fn write_results(dir: &Path, results: &[RunResult]) -> anyhow::Result<()> {
    for r in results {
        io::write_run(r, dir)?;
    }
    let (path, agg) = io::write_summary(dir)?;
    for w in &agg.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn execute(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Run { source, seed } => {
            let cfg = load(&source)?;
            let dir = out_dir(&source, &cfg);
            let result = run(&cfg, seed)?;
            let files = io::write_run(&result, &dir)?;
            io::write_metadata(
                &dir,
                &cfg.to_toml(),
                json!({ "command": "run", "config_hash": cfg.hash(), "seed": seed,
                        "wall_clock_secs": result.wall_clock_secs }),
            )?;
            for s in &result.series {
                println!(
                    "{} auc {} final {}",
                    s.metric.name(),
                    s.auc(),
                    s.last().map_or("-".into(), |v| v.to_string())
                );
            }
            eprintln!("wrote {}", files.run.display());
        }
        Command::Sweep { source, seeds, jobs } => {
            let cfg = load(&source)?;
            let dir = out_dir(&source, &cfg);
            let seeds: Vec<u64> = seeds.map_or_else(|| cfg.seeds.clone(), |n| (0..n).collect());
            let cells = replaylab::harness::sweep::expand(&cfg)?.len();
            let out = sweep_with(
                &cfg,
                &seeds,
                jobs.unwrap_or_else(default_workers),
                run,
                progress(cells * seeds.len()),
            )?;
            write_results(&dir, &out.results)?;
            write_cells(&dir.join("cells.csv"), &out.cells)?;
            io::write_metadata(&dir, &cfg.to_toml(), json!({ "command": "sweep", "seeds": seeds }))?;
            for c in &out.cells {
                println!("{}\t{}\t{}", c.label, c.config_hash, c.mean_auc);
            }
        }
        Command::Select { source, stage1, stage2, jobs } => {
            let mut cfg = load(&source)?;
            if let Some(n) = stage1 {
                cfg.select.stage1_seeds = n;
            }
            if let Some(n) = stage2 {
                cfg.select.stage2_seeds = n;
            }
            cfg.validate()?;
            let dir = out_dir(&source, &cfg);
            let (s1, s2) = stage_seeds(&cfg)?;
            let cells = replaylab::harness::sweep::expand(&cfg)?;
            let groups = cells.iter().map(|c| &c.group).collect::<std::collections::BTreeSet<_>>().len();
            let sel = two_stage_select_with(
                &cfg,
                &s1,
                &s2,
                jobs.unwrap_or_else(default_workers),
                run,
                progress(cells.len() * s1.len() + groups * s2.len()),
            )?;
            write_results(&dir.join("stage1"), &sel.stage1_results)?;
            write_results(&dir.join("stage2"), &sel.stage2_results)?;
            let stage1_cells: Vec<CellSummary> = sel.groups.iter().flat_map(|g| g.stage1.clone()).collect();
            write_cells(&dir.join("stage1").join("cells.csv"), &stage1_cells)?;
            let winners: Vec<CellSummary> = sel.groups.iter().map(|g| g.stage2.clone()).collect();
            write_cells(&dir.join("stage2").join("cells.csv"), &winners)?;
            let groups_meta: Vec<_> = sel
                .groups
                .iter()
                .map(|g| {
                    json!({
                        "group": g.group,
                        "winner": g.stage1[g.winner].label,
                        "learning_rate": g.stage2.learning_rate,
                        "tie_broken_by_learning_rate": g.tie_broken_by_learning_rate,
                        "stage2_mean_auc": g.stage2.mean_auc,
                    })
                })
                .collect();
            io::write_metadata(
                &dir,
                &cfg.to_toml(),
                json!({ "command": "select", "stage1_seeds": s1, "stage2_seeds": s2, "groups": groups_meta }),
            )?;
            for g in &sel.groups {
                println!(
                    "{}\t{}\tstage2 mean AUC {}",
                    if g.group.is_empty() { "-" } else { &g.group },
                    g.stage1[g.winner].label,
                    g.stage2.mean_auc
                );
            }
        }
        Command::Aggregate { dir } => {
            let (path, agg) = io::write_summary(&dir).with_context(|| format!("aggregating {}", dir.display()))?;
            for w in &agg.warnings {
                eprintln!("warning: {w}");
            }
            for (hash, ci) in &agg.intervals {
                println!("{hash}\tseeds {}\tmean {}\t95% CI [{}, {}]", ci.seeds, ci.mean, ci.lo, ci.hi);
            }
            eprintln!("wrote {}", path.display());
            if !agg.warnings.is_empty() {
                return Ok(ExitCode::from(3));
            }
        }
        Command::Presets { dump } => match dump {
            Some(name) => print!("{}", preset(&name)?.to_toml()),
            None => {
                for (name, description) in preset_names() {
                    println!("{name:<28} {description}");
                }
            }
        },
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(err) if err.is_config() => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
