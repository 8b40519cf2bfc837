//! Thin command-line front end over the library.
//!
//! Every subcommand reads one optional TOML config (see [`crate::config`]),
//! applies a few flag overrides, runs a library entry point, and writes its
//! outputs plus a reproducibility manifest into the run directory. Exit
//! codes: 0 on success, 2 on usage errors (clap), 1 with a one-line reason
//! on stderr for everything else. `grad-check` additionally exits 1 when the
//! gradient error is at or above tolerance.
//!
//! Output directory resolution: `--out` flag, else `LEGWORK_RUN_DIR`, else
//! `[run] dir` from the config (default `runs`).

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::RunConfig;
use crate::data::Dataset;
use crate::env::config::TaskConfig;
use crate::env::skill::SkillId;
use crate::heuristic::collect_with;
use crate::metrics::{
    ablation_csv, ablation_suite, dataset_skill_set, evaluate, export_embeddings,
    generalization_eval, noise_sweep, sweep_csv, Evaluation,
};
use crate::model::checkpoint::Checkpoint;
use crate::model::featurize::BatchOptions;
use crate::model::gradcheck::grad_check;
use crate::rollout::EpisodeRecord;
use crate::train::train_with_checkpoints;
use crate::Result;

/// Gradient-check failure threshold on max relative error.
pub const GRAD_TOL: f64 = 1e-4;

#[derive(Parser, Debug)]
#[command(
    name = "legwork",
    version,
    about = "Planar furniture assembly: demonstration collection, offline training, evaluation"
)]
struct Cli {
    /// TOML run config; all keys optional, defaults apply when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory (overrides LEGWORK_RUN_DIR and [run] dir).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Collect scripted demonstrations into <out>/dataset.bin.
    Collect {
        /// Override [collect] seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train on a dataset; writes model.bin, per-iteration checkpoints, and
    /// train_log.csv.
    Train {
        /// Override [train] seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Dataset path (default <out>/dataset.bin).
        #[arg(long, value_name = "FILE")]
        dataset: Option<PathBuf>,
    },
    /// Evaluate a checkpoint against its paired scripted baseline; writes
    /// metrics.csv and per-episode summaries.
    Eval {
        /// Trained checkpoint to evaluate.
        #[arg(long, value_name = "FILE")]
        checkpoint: PathBuf,
        /// Override [eval] seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override [eval] n_episodes.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Re-evaluate one checkpoint across the vision-noise grid; writes
    /// sweep.csv.
    Sweep {
        #[arg(long, value_name = "FILE")]
        checkpoint: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Train and evaluate the full model and both ablations under shared
    /// seeds; writes ablations.csv.
    Ablate {
        /// Dataset path (default <out>/dataset.bin).
        #[arg(long, value_name = "FILE")]
        dataset: Option<PathBuf>,
        /// Override both [train] and [eval] seeds.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Evaluate a checkpoint zero-shot on the other furniture preset; writes
    /// generalization.csv.
    Generalize {
        #[arg(long, value_name = "FILE")]
        checkpoint: PathBuf,
        /// Training dataset, used to verify skill coverage (default
        /// <out>/dataset.bin).
        #[arg(long, value_name = "FILE")]
        dataset: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Dump one state-token embedding per dataset step to embeddings.csv.
    ExportEmbeddings {
        #[arg(long, value_name = "FILE")]
        checkpoint: PathBuf,
        /// Dataset path (default <out>/dataset.bin).
        #[arg(long, value_name = "FILE")]
        dataset: Option<PathBuf>,
    },
    /// Compare both losses' analytic gradients against central differences;
    /// exits 1 if max relative error >= 1e-4.
    GradCheck {
        /// Probe batch seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Finite-difference step.
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
    },
}

/// Parse `args` and run. Returns the process exit code instead of exiting so
/// the dispatcher is testable.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(ExitReason::Error(e)) => {
            eprintln!("error: {e}");
            1
        }
        Err(ExitReason::Failed(msg)) => {
            eprintln!("{msg}");
            1
        }
    }
}

enum ExitReason {
    /// Library or I/O error.
    Error(crate::Error),
    /// The command ran but its check failed (grad-check over tolerance).
    Failed(String),
}

impl From<crate::Error> for ExitReason {
    fn from(e: crate::Error) -> Self {
        ExitReason::Error(e)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    /// The seed the command actually used after flag overrides.
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    config_path: Option<String>,
    config: &'a RunConfig,
}

fn write_manifest(
    out: &Path,
    command: &str,
    seed: u64,
    config_path: &Option<PathBuf>,
    cfg: &RunConfig,
) -> Result<()> {
    let manifest = Manifest {
        command,
        seed,
        config_path: config_path.as_ref().map(|p| p.display().to_string()),
        config: cfg,
    };
    let text = toml::to_string_pretty(&manifest)
        .map_err(|e| crate::Error::Config(format!("manifest serialization: {e}")))?;
    write_text(&out.join(format!("manifest_{command}.toml")), &text)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)
        .map_err(|e| crate::Error::Config(format!("write {}: {e}", path.display())))
}

fn episodes_csv(records: &[EpisodeRecord]) -> String {
    let mut out = String::from(EpisodeRecord::summary_header());
    out.push('\n');
    for (i, rec) in records.iter().enumerate() {
        out.push_str(&rec.summary_line(i));
        out.push('\n');
    }
    out
}

fn eval_metrics_csv(ev: &Evaluation) -> String {
    format!(
        "policy,{}\nmodel,{}\nheuristic,{}\n",
        crate::metrics::MetricsReport::csv_header(),
        ev.model.csv_row(),
        ev.heuristic.csv_row()
    )
}

fn dispatch(cli: Cli) -> std::result::Result<(), ExitReason> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let out = cli.out.clone().unwrap_or_else(|| cfg.run_dir());
    std::fs::create_dir_all(&out)
        .map_err(|e| crate::Error::Config(format!("create {}: {e}", out.display())))?;
    let task = cfg.task_config()?;

    match cli.cmd {
        Cmd::Collect { seed } => {
            let mut section = cfg.collect;
            if let Some(s) = seed {
                section.seed = s;
            }
            let ds = collect_with(&task, &cfg.heuristic, &section.options())?;
            let path = out.join("dataset.bin");
            ds.save(&path)?;
            write_manifest(&out, "collect", section.seed, &cli.config, &cfg)?;
            println!(
                "collected {} trajectories ({} steps) -> {}",
                ds.trajectories.len(),
                ds.trajectories.iter().map(|t| t.len()).sum::<usize>(),
                path.display()
            );
        }
        Cmd::Train { seed, dataset } => {
            let mut train_cfg = cfg.train;
            if let Some(s) = seed {
                train_cfg.seed = s;
            }
            let ds_path = dataset.unwrap_or_else(|| out.join("dataset.bin"));
            let ds = Dataset::load(&ds_path)?;
            let result =
                train_with_checkpoints(&ds, &train_cfg, cfg.model, BatchOptions::default(), Some(&out))?;
            result.log.save_csv(&out.join("train_log.csv"))?;
            write_manifest(&out, "train", train_cfg.seed, &cli.config, &cfg)?;
            let last = result.log.iterations.last();
            println!(
                "trained {} iterations (final l_stm {:.4}, l_tepo {:.4}) -> {}",
                train_cfg.iterations,
                last.map_or(f64::NAN, |l| l.l_stm),
                last.map_or(f64::NAN, |l| l.l_tepo),
                out.join("model.bin").display()
            );
        }
        Cmd::Eval { checkpoint, seed, episodes } => {
            let mut section = cfg.eval.clone();
            if let Some(s) = seed {
                section.seed = s;
            }
            if let Some(n) = episodes {
                section.n_episodes = n;
            }
            let eval_cfg = section.config(cfg.heuristic);
            let ck = Checkpoint::load(&checkpoint)?;
            let ev = evaluate(&task, &cfg.reward, &ck, &eval_cfg)?;
            write_text(&out.join("metrics.csv"), &eval_metrics_csv(&ev))?;
            write_text(&out.join("episodes_model.csv"), &episodes_csv(&ev.model_records))?;
            write_text(
                &out.join("episodes_heuristic.csv"),
                &episodes_csv(&ev.heuristic_records),
            )?;
            write_manifest(&out, "eval", section.seed, &cli.config, &cfg)?;
            println!(
                "model: AR {:.3} ASR {:.2} AS {:.1} | heuristic: ASR {:.2} AS {:.1} ({} episodes)",
                ev.model.ar,
                ev.model.asr,
                ev.model.as_,
                ev.heuristic.asr,
                ev.heuristic.as_,
                eval_cfg.n_episodes
            );
        }
        Cmd::Sweep { checkpoint, seed, episodes } => {
            let mut section = cfg.eval.clone();
            if let Some(s) = seed {
                section.seed = s;
            }
            if let Some(n) = episodes {
                section.n_episodes = n;
            }
            let eval_cfg = section.config(cfg.heuristic);
            let ck = Checkpoint::load(&checkpoint)?;
            let rows = noise_sweep(&task, &cfg.reward, &ck, &eval_cfg, &section.sweep_sigmas)?;
            write_text(&out.join("sweep.csv"), &sweep_csv(&rows))?;
            write_manifest(&out, "sweep", section.seed, &cli.config, &cfg)?;
            for (sigma, ev) in &rows {
                println!(
                    "sigma {:.3}: ASR {:.2} AS {:.1} (heuristic ASR {:.2})",
                    sigma, ev.model.asr, ev.model.as_, ev.heuristic.asr
                );
            }
        }
        Cmd::Ablate { dataset, seed, episodes } => {
            let mut train_cfg = cfg.train;
            let mut section = cfg.eval.clone();
            if let Some(s) = seed {
                train_cfg.seed = s;
                section.seed = s;
            }
            if let Some(n) = episodes {
                section.n_episodes = n;
            }
            let eval_cfg = section.config(cfg.heuristic);
            let ds_path = dataset.unwrap_or_else(|| out.join("dataset.bin"));
            let ds = Dataset::load(&ds_path)?;
            let rows = ablation_suite(&ds, &train_cfg, cfg.model, &eval_cfg);
            write_text(&out.join("ablations.csv"), &ablation_csv(&rows))?;
            write_manifest(&out, "ablate", train_cfg.seed, &cli.config, &cfg)?;
            for row in &rows {
                match &row.outcome {
                    Ok(ev) => println!(
                        "{}: ASR {:.2} AS {:.1} AR {:.3}",
                        row.variant, ev.model.asr, ev.model.as_, ev.model.ar
                    ),
                    Err(e) => println!("{}: failed ({e})", row.variant),
                }
            }
        }
        Cmd::Generalize { checkpoint, dataset, seed, episodes } => {
            let mut section = cfg.eval.clone();
            if let Some(s) = seed {
                section.seed = s;
            }
            if let Some(n) = episodes {
                section.n_episodes = n;
            }
            let eval_cfg = section.config(cfg.heuristic);
            let ck = Checkpoint::load(&checkpoint)?;
            let ds_path = dataset.unwrap_or_else(|| out.join("dataset.bin"));
            let trained: BTreeSet<usize> = match Dataset::load(&ds_path) {
                Ok(ds) => dataset_skill_set(&ds),
                // Without the dataset, assume the full skill set was seen.
                Err(_) => (0..crate::env::skill::SKILL_COUNT).collect(),
            };
            let target = other_preset(&task);
            let report = generalization_eval(&target, &cfg.reward, &ck, &eval_cfg, &trained)?;
            let ev = &report.evaluation;
            let skills: Vec<&str> = report
                .skills_used
                .iter()
                .map(|&i| SkillId::from_index(i).map_or("?", SkillId::name))
                .collect();
            let csv = format!(
                "task,ar,asr,as,heuristic_asr,heuristic_as,skills_used,subset_ok\n{},{},{},{},{},{},{},{}\n",
                target.furniture.name(),
                ev.model.ar,
                ev.model.asr,
                ev.model.as_,
                ev.heuristic.asr,
                ev.heuristic.as_,
                skills.join(";"),
                report.subset_ok
            );
            write_text(&out.join("generalization.csv"), &csv)?;
            write_manifest(&out, "generalize", section.seed, &cli.config, &cfg)?;
            println!(
                "zero-shot {}: ASR {:.2} (heuristic {:.2}), skills {} , subset_ok {}",
                target.furniture.name(),
                ev.model.asr,
                ev.heuristic.asr,
                skills.join(";"),
                report.subset_ok
            );
        }
        Cmd::ExportEmbeddings { checkpoint, dataset } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let ds_path = dataset.unwrap_or_else(|| out.join("dataset.bin"));
            let ds = Dataset::load(&ds_path)?;
            let csv = export_embeddings(&ck, &ds)?;
            let path = out.join("embeddings.csv");
            write_text(&path, &csv)?;
            write_manifest(&out, "export-embeddings", 0, &cli.config, &cfg)?;
            println!("wrote {} rows -> {}", csv.lines().count().saturating_sub(1), path.display());
        }
        Cmd::GradCheck { seed, eps } => {
            let report = grad_check(seed, eps)?;
            let mut lines = String::new();
            for c in &report.checks {
                lines.push_str(&format!(
                    "{}: max rel err {:.3e} at {} ({} elements)\n",
                    c.loss, c.max_rel_err, c.worst_param, c.n_elements
                ));
            }
            let verdict = if report.passed(GRAD_TOL) { "PASS" } else { "FAIL" };
            lines.push_str(&format!(
                "max rel err {:.3e} (tol {GRAD_TOL:.0e}): {verdict}\n",
                report.max_rel_err()
            ));
            print!("{lines}");
            write_text(&out.join("gradcheck.txt"), &lines)?;
            write_manifest(&out, "grad-check", seed, &cli.config, &cfg)?;
            if !report.passed(GRAD_TOL) {
                return Err(ExitReason::Failed(format!(
                    "grad-check failed: max rel err {:.3e} >= {GRAD_TOL:.0e}",
                    report.max_rel_err()
                )));
            }
        }
    }
    Ok(())
}

/// The furniture preset the checkpoint was not configured for.
fn other_preset(task: &TaskConfig) -> TaskConfig {
    use crate::env::config::Furniture;
    match task.furniture {
        Furniture::SquareTable => TaskConfig::stool(),
        Furniture::Stool => TaskConfig::square_table(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(list: &[&str]) -> Vec<OsString> {
        list.iter().map(OsString::from).collect()
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(args(&["legwork", "frobnicate"])), 2);
        assert_eq!(run(args(&["legwork", "eval"])), 2);
        assert_eq!(run(args(&["legwork", "collect", "--bogus-flag"])), 2);
        assert_eq!(run(args(&["legwork"])), 2);
    }

    #[test]
    fn help_exits_0() {
        assert_eq!(run(args(&["legwork", "--help"])), 0);
        assert_eq!(run(args(&["legwork", "eval", "--help"])), 0);
    }

    #[test]
    fn missing_config_file_exits_1() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        assert_eq!(
            run(args(&[
                "legwork",
                "collect",
                "--config",
                "/nonexistent/cfg.toml",
                "--out",
                out.to_str().unwrap(),
            ])),
            1
        );
    }

    #[test]
    fn pipeline_collect_train_eval() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let cfg_path = dir.path().join("tiny.toml");
        std::fs::write(
            &cfg_path,
            "[collect]\nnum_trajectories = 6\nseed = 3\n\n\
             [model]\nd_model = 16\nn_layers = 1\nn_heads = 2\nd_ff = 32\n\n\
             [train]\niterations = 1\ntrajectories_per_iter = 6\nbatch_size = 4\nhorizon = 6\n\n\
             [eval]\nn_episodes = 1\nmax_phases = 2\nper_skill_cap = 12\n",
        )
        .unwrap();
        let base = ["legwork"];
        let common = [
            "--config",
            cfg_path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ];

        let collect: Vec<&str> =
            base.iter().chain(["collect"].iter()).chain(common.iter()).copied().collect();
        assert_eq!(run(args(&collect)), 0);
        assert!(out.join("dataset.bin").is_file());
        assert!(out.join("manifest_collect.toml").is_file());

        let train: Vec<&str> =
            base.iter().chain(["train"].iter()).chain(common.iter()).copied().collect();
        assert_eq!(run(args(&train)), 0);
        assert!(out.join("model.bin").is_file());
        assert!(out.join("checkpoint_000.bin").is_file());
        assert!(out.join("train_log.csv").is_file());

        let model = out.join("model.bin");
        let eval: Vec<&str> = base
            .iter()
            .chain(["eval", "--checkpoint", model.to_str().unwrap()].iter())
            .chain(common.iter())
            .copied()
            .collect();
        assert_eq!(run(args(&eval)), 0);
        let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
        assert!(metrics.starts_with("policy,ar,asr,as,"));
        assert_eq!(metrics.lines().count(), 3);
        assert!(out.join("episodes_model.csv").is_file());
        assert!(out.join("episodes_heuristic.csv").is_file());

        let manifest =
            std::fs::read_to_string(out.join("manifest_eval.toml")).unwrap();
        assert!(manifest.contains("command = \"eval\""));
        assert!(manifest.contains("n_episodes = 1"));
    }

    #[test]
    fn grad_check_passes_and_writes_report() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("gc");
        assert_eq!(
            run(args(&["legwork", "grad-check", "--out", out.to_str().unwrap()])),
            0
        );
        let text = std::fs::read_to_string(out.join("gradcheck.txt")).unwrap();
        assert!(text.contains("PASS"), "{text}");
    }
}
