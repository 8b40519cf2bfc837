//! Evaluation harness: success rate, steps per completed skill phase, and
//! heuristic-normalized return, all computed from episode records so every
//! number is recomputable from stored rollouts. Includes the observation
//! noise sweep, the ablation table, zero-shot transfer, and the embedding
//! export.

use std::collections::BTreeSet;

use crate::data::Dataset;
use crate::env::config::{RewardParams, TaskConfig};
use crate::env::skill::{SkillId, SKILL_COUNT};
use crate::heuristic::{HeuristicConfig, MAX_PHASES};
use crate::model::checkpoint::Checkpoint;
use crate::model::featurize::Featurizer;
use crate::model::net::forward;
use crate::rollout::{
    rollout, EpisodeRecord, HeuristicController, ModelController, RolloutConfig,
};
use crate::train::{train_with_checkpoints, TrainConfig};
use crate::model::featurize::BatchOptions;
use crate::model::net::ModelConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Mean labeled return divided by the paired heuristic's mean.
    pub ar: f64,
    /// Successes / episodes, exactly.
    pub asr: f64,
    /// Total timesteps / total completed skill phases; total timesteps when
    /// no phase completed.
    pub as_: f64,
    /// Mean steps spent in each skill per episode, indexed by skill.
    pub per_skill_steps: [f64; SKILL_COUNT],
    pub n_episodes: usize,
}

impl MetricsReport {
    pub fn csv_header() -> &'static str {
        "ar,asr,as,n_episodes,steps_pick,steps_reach,steps_insert,steps_screw,steps_adjust"
    }

    pub fn csv_row(&self) -> String {
        let p = &self.per_skill_steps;
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.ar, self.asr, self.as_, self.n_episodes, p[0], p[1], p[2], p[3], p[4]
        )
    }
}

/// Mean labeled return of a batch of episodes.
pub fn mean_return(records: &[EpisodeRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().map(|r| r.raw_return).sum::<f64>() / records.len() as f64
}

/// Pure reducer from episode records to a report. `baseline_return` is the
/// paired heuristic's mean labeled return (its own report passes its own
/// mean, making its AR exactly 1).
pub fn report_from_records(records: &[EpisodeRecord], baseline_return: f64) -> MetricsReport {
    let n = records.len();
    let successes = records.iter().filter(|r| r.success).count();
    let total_steps: usize = records.iter().map(|r| r.steps).sum();
    let completed: usize = records.iter().map(|r| r.completed_phases).sum();
    let as_ = if completed == 0 {
        total_steps as f64
    } else {
        total_steps as f64 / completed as f64
    };
    let mut per_skill_steps = [0.0; SKILL_COUNT];
    for r in records {
        for (acc, &c) in per_skill_steps.iter_mut().zip(&r.per_skill_steps) {
            *acc += c as f64;
        }
    }
    if n > 0 {
        for acc in &mut per_skill_steps {
            *acc /= n as f64;
        }
    }
    MetricsReport {
        ar: mean_return(records) / baseline_return,
        asr: if n == 0 { 0.0 } else { successes as f64 / n as f64 },
        as_,
        per_skill_steps,
        n_episodes: n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub n_episodes: usize,
    pub seed: u64,
    /// Phase cap for model episodes.
    pub max_phases: usize,
    /// Per-phase step cap for model episodes.
    pub per_skill_cap: usize,
    /// Baseline policy parameters.
    pub heuristic: HeuristicConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_episodes: 10,
            seed: 0,
            max_phases: 80,
            per_skill_cap: 100,
            heuristic: HeuristicConfig::default(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_episodes == 0 {
            return Err(Error::Config("n_episodes must be >= 1".to_string()));
        }
        Ok(())
    }
}

/// Per-episode seeds. The environment seed is shared between the model and
/// its paired baseline so both face identical initial states and noise.
fn episode_seeds(seed: u64, episode: usize) -> (u64, u64) {
    let i = episode as u64;
    let env = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(i.wrapping_mul(0xD1B5_4A32_D192_ED03))
        .wrapping_add(0x2545_F491_4F6C_DD1D);
    let policy = env.wrapping_mul(0xBF58_476D_1CE4_E5B9).wrapping_add(1);
    (env, policy)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub model: MetricsReport,
    pub heuristic: MetricsReport,
    pub model_records: Vec<EpisodeRecord>,
    pub heuristic_records: Vec<EpisodeRecord>,
}

/// Runs the paired heuristic baseline alone.
pub fn evaluate_heuristic(
    task: &TaskConfig,
    reward: &RewardParams,
    cfg: &EvalConfig,
) -> Result<(MetricsReport, Vec<EpisodeRecord>)> {
    cfg.validate()?;
    let mut records = Vec::with_capacity(cfg.n_episodes);
    for ep in 0..cfg.n_episodes {
        let (env_seed, policy_seed) = episode_seeds(cfg.seed, ep);
        let mut ctrl = HeuristicController::new(cfg.heuristic);
        let rc = RolloutConfig {
            max_phases: MAX_PHASES,
            per_skill_cap: cfg.heuristic.max_steps_per_skill,
            initial_skill: SkillId::Pick,
            env_seed,
            policy_seed,
        };
        records.push(rollout(task, reward, &mut ctrl, &rc)?);
    }
    let own_mean = mean_return(&records);
    Ok((report_from_records(&records, own_mean), records))
}

/// Evaluates a checkpoint against its paired heuristic baseline: identical
/// task config and per-episode environment seeds.
pub fn evaluate(
    task: &TaskConfig,
    reward: &RewardParams,
    ck: &Checkpoint,
    cfg: &EvalConfig,
) -> Result<Evaluation> {
    cfg.validate()?;
    let (heuristic, heuristic_records) = evaluate_heuristic(task, reward, cfg)?;
    let baseline = mean_return(&heuristic_records);

    let mut model_records = Vec::with_capacity(cfg.n_episodes);
    for ep in 0..cfg.n_episodes {
        let (env_seed, policy_seed) = episode_seeds(cfg.seed, ep);
        let mut ctrl = ModelController::new(ck);
        let rc = RolloutConfig {
            max_phases: cfg.max_phases,
            per_skill_cap: cfg.per_skill_cap,
            initial_skill: SkillId::Pick,
            env_seed,
            policy_seed,
        };
        model_records.push(rollout(task, reward, &mut ctrl, &rc)?);
    }
    let model = report_from_records(&model_records, baseline);
    Ok(Evaluation { model, heuristic, model_records, heuristic_records })
}

// ---------------------------------------------------------------------------
// Observation-noise sweep.

/// Std levels for the vision-noise robustness sweep, meters.
pub const SWEEP_SIGMAS: [f64; 5] = [0.0, 0.001, 0.002, 0.005, 0.010];

/// One evaluation per noise level; the model and its baseline share each
/// level's environment config.
pub fn noise_sweep(
    task: &TaskConfig,
    reward: &RewardParams,
    ck: &Checkpoint,
    cfg: &EvalConfig,
    sigmas: &[f64],
) -> Result<Vec<(f64, Evaluation)>> {
    let mut rows = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        let mut noisy = *task;
        noisy.noise_sigma = sigma;
        rows.push((sigma, evaluate(&noisy, reward, ck, cfg)?));
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[(f64, Evaluation)]) -> String {
    let mut out = String::from("sigma,ar,asr,as,heuristic_asr,heuristic_as\n");
    for (sigma, ev) in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            sigma, ev.model.ar, ev.model.asr, ev.model.as_, ev.heuristic.asr, ev.heuristic.as_
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Ablation table.

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: &'static str,
    /// `Err` text when training or evaluation failed; the row still exists.
    pub outcome: std::result::Result<Evaluation, String>,
}

/// Trains and evaluates the full model and both ablations under shared
/// seeds. A failed variant yields a flagged row, never a missing one.
pub fn ablation_suite(
    ds: &Dataset,
    train_cfg: &TrainConfig,
    model_cfg: ModelConfig,
    eval_cfg: &EvalConfig,
) -> Vec<AblationRow> {
    let variants: [(&'static str, BatchOptions); 3] = [
        ("full", BatchOptions::default()),
        ("no_stm", BatchOptions { flat_skill: true, tactile_ablated: false }),
        ("no_tactile", BatchOptions { flat_skill: false, tactile_ablated: true }),
    ];
    variants
        .into_iter()
        .map(|(variant, opts)| {
            let outcome = train_with_checkpoints(ds, train_cfg, model_cfg, opts, None)
                .and_then(|out| evaluate(&ds.task, &ds.reward, &out.checkpoint, eval_cfg))
                .map_err(|e| e.to_string());
            AblationRow { variant, outcome }
        })
        .collect()
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("variant,status,ar,asr,as,heuristic_asr,heuristic_as,error\n");
    for row in rows {
        match &row.outcome {
            Ok(ev) => out.push_str(&format!(
                "{},ok,{},{},{},{},{},\n",
                row.variant, ev.model.ar, ev.model.asr, ev.model.as_, ev.heuristic.asr,
                ev.heuristic.as_
            )),
            Err(e) => out.push_str(&format!(
                "{},failed,,,,,,\"{}\"\n",
                row.variant,
                e.replace('"', "'")
            )),
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Zero-shot transfer.

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizationReport {
    pub evaluation: Evaluation,
    /// Skills the model actually used on the new task.
    pub skills_used: BTreeSet<usize>,
    /// Whether every used skill appeared in the training data.
    pub subset_ok: bool,
}

/// Skills present in a dataset's steps.
pub fn dataset_skill_set(ds: &Dataset) -> BTreeSet<usize> {
    let mut set = BTreeSet::new();
    for traj in &ds.trajectories {
        for s in &traj.steps {
            set.insert(s.skill.index());
        }
    }
    set
}

/// Evaluates a table-trained checkpoint on another task config without any
/// retraining, normalized by the heuristic on that same task.
pub fn generalization_eval(
    new_task: &TaskConfig,
    reward: &RewardParams,
    ck: &Checkpoint,
    cfg: &EvalConfig,
    trained_skills: &BTreeSet<usize>,
) -> Result<GeneralizationReport> {
    let evaluation = evaluate(new_task, reward, ck, cfg)?;
    let mut skills_used = BTreeSet::new();
    for rec in &evaluation.model_records {
        for s in &rec.trajectory.steps {
            skills_used.insert(s.skill.index());
        }
    }
    let subset_ok = skills_used.is_subset(trained_skills);
    Ok(GeneralizationReport { evaluation, skills_used, subset_ok })
}

// ---------------------------------------------------------------------------
// Embedding export.

/// Writes one CSV row per step: the final hidden vector at the step's state
/// token plus the step's skill label. Windows are non-overlapping so each
/// step is exported exactly once; re-export of the same inputs is
/// byte-identical.
pub fn export_embeddings(ck: &Checkpoint, ds: &Dataset) -> Result<String> {
    let h = ck.params.cfg.horizon;
    let d = ck.params.cfg.d_model;
    let featurizer = Featurizer::new(ck.normalizer.clone(), h);

    let mut out = String::from("trajectory,step,skill");
    for j in 0..d {
        out.push_str(&format!(",h{j}"));
    }
    out.push('\n');

    // (traj, window end, first step to emit).
    let mut samples: Vec<(usize, usize, usize)> = Vec::new();
    for (ti, traj) in ds.trajectories.iter().enumerate() {
        let len = traj.len();
        if len == 0 {
            continue;
        }
        let mut emit_from = 0usize;
        loop {
            let t_end = (emit_from + h - 1).min(len - 1);
            samples.push((ti, t_end, emit_from));
            emit_from = t_end + 1;
            if emit_from >= len {
                break;
            }
        }
    }

    for chunk in samples.chunks(64) {
        let window_samples: Vec<(usize, usize)> =
            chunk.iter().map(|&(ti, t, _)| (ti, t)).collect();
        let batch = featurizer.training_batch(ds, &window_samples, &ck.options);
        let fwd = forward(&ck.params, &batch)?;
        let hidden = fwd.tape.value(fwd.hidden);
        // Policy rows appear sequence by sequence, one per real step, in
        // step order; `row` walks them in lockstep.
        let mut row = 0usize;
        for &(ti, t_end, emit_from) in chunk {
            let traj = &ds.trajectories[ti];
            let n_real = (t_end + 1).min(h);
            let first_global = t_end + 1 - n_real;
            for g in first_global..=t_end {
                if g >= emit_from {
                    let pos = batch.policy_pos[row];
                    out.push_str(&format!("{},{},{}", ti, g, traj.steps[g].skill.name()));
                    for &v in hidden.row(pos) {
                        out.push_str(&format!(",{v}"));
                    }
                    out.push('\n');
                }
                row += 1;
            }
        }
    }
    Ok(out)
}
