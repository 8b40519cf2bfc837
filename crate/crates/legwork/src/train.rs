//! Training loop: label rewards once, then per iteration draw an epoch pool,
//! augment it with fresh hindsight relabels, and run alternating updates —
//! the transition loss steps first, the policy loss second, within every
//! batch. Training is a pure function of (dataset, config): every random
//! choice comes from a named ChaCha stream derived from the config seed.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{augment, label_dataset, Dataset};
use crate::env::skill;
use crate::model::adam::Adam;
use crate::model::checkpoint::Checkpoint;
use crate::model::featurize::{BatchOptions, Featurizer, Normalizer};
use crate::model::net::{
    action_mse, forward, loss_stm, loss_tepo, stm_accuracy, ModelConfig, ModelParams,
};
use crate::{Error, Result};

/// Held-out trajectory fraction for supervised evaluation.
const HOLDOUT_FRACTION: f64 = 0.1;
/// Boundary contexts scored per in-training holdout pass; the standalone
/// [`holdout_eval`] uses every boundary.
const INLINE_EVAL_CAP: usize = 256;
/// Sequences per evaluation forward pass.
const EVAL_CHUNK: usize = 64;

// RNG stream ids under the config seed.
const STREAM_INIT: u64 = 0;
const STREAM_BATCH: u64 = 1;
const STREAM_AUGMENT: u64 = 2;
const STREAM_SPLIT: u64 = 3;
const STREAM_POOL: u64 = 4;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Outer iterations (K).
    pub iterations: usize,
    /// Trajectories drawn into each iteration's pool (M).
    pub trajectories_per_iter: usize,
    /// Context windows per gradient step.
    pub batch_size: usize,
    /// Context horizon in steps (H); becomes the model horizon.
    pub horizon: usize,
    /// Learning rate.
    pub eta: f64,
    /// Entropy-regularizer weight in the policy loss.
    pub lambda: f64,
    /// Hindsight relabels added per segment of the pool, each iteration.
    pub augment_copies: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 12,
            trajectories_per_iter: 240,
            batch_size: 32,
            horizon: 10,
            eta: 1e-3,
            lambda: 0.05,
            augment_copies: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trajectories_per_iter == 0 || self.batch_size == 0 || self.horizon == 0 {
            return Err(Error::Config(
                "trajectories_per_iter, batch_size, and horizon must be positive".to_string(),
            ));
        }
        if !(self.eta > 0.0) || !(self.lambda >= 0.0) {
            return Err(Error::Config("eta must be > 0 and lambda >= 0".to_string()));
        }
        Ok(())
    }
}

/// One iteration's record. Losses are means over the iteration's batches;
/// the per-batch values are kept for curve inspection. Holdout metrics are
/// `None` when the split produced no holdout.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    pub l_stm: f64,
    pub l_tepo: f64,
    pub stm_accuracy: Option<f64>,
    pub action_mse: Option<f64>,
    pub batches: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub iterations: Vec<IterationLog>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,l_stm,l_tepo,stm_accuracy,action_mse\n");
        for it in &self.iterations {
            let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                it.iteration,
                it.l_stm,
                it.l_tepo,
                opt(it.stm_accuracy),
                opt(it.action_mse)
            ));
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

pub struct TrainOutput {
    pub checkpoint: Checkpoint,
    pub log: TrainLog,
    /// Trajectory indices of the held-out split, for external evaluation.
    pub holdout_indices: Vec<usize>,
}

/// Seeded 90/10 trajectory split; returns (train, holdout) index sets.
fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream(seed, STREAM_SPLIT));
    let holdout_n = if n >= 2 { ((n as f64) * HOLDOUT_FRACTION).ceil() as usize } else { 0 };
    let holdout = idx.split_off(n - holdout_n);
    (idx, holdout)
}

/// Mean labeled return of successful episodes (assembly finished), the
/// conditioning target rollouts start from. Falls back to the mean over all
/// trajectories when nothing succeeded.
fn initial_rtg(ds: &Dataset, indices: &[usize]) -> f64 {
    let returns = |filter: bool| -> Vec<f64> {
        indices
            .iter()
            .map(|&i| &ds.trajectories[i])
            .filter(|t| !filter || skill::success(&t.final_state, &ds.task))
            .filter_map(|t| t.steps.first().map(|s| s.rtg))
            .collect()
    };
    let succ = returns(true);
    let vals = if succ.is_empty() { returns(false) } else { succ };
    if vals.is_empty() {
        return 0.0;
    }
    vals.iter().sum::<f64>() / vals.len() as f64
}

/// Cumulative step counts for uniform-over-steps sampling.
struct StepIndex {
    cumulative: Vec<usize>,
    total: usize,
}

impl StepIndex {
    fn new(ds: &Dataset) -> StepIndex {
        let mut cumulative = Vec::with_capacity(ds.trajectories.len());
        let mut total = 0;
        for t in &ds.trajectories {
            total += t.len();
            cumulative.push(total);
        }
        StepIndex { cumulative, total }
    }

    fn locate(&self, global: usize) -> (usize, usize) {
        let ti = self.cumulative.partition_point(|&c| c <= global);
        let before = if ti == 0 { 0 } else { self.cumulative[ti - 1] };
        (ti, global - before)
    }
}

/// Trains a model on `ds`. Rewards are labeled once up front (they are
/// identical across iterations for fixed reward parameters, so the per-
/// iteration relabel collapses to a single pass). When `checkpoint_dir` is
/// given, a checkpoint is written every iteration, and a diagnostic
/// checkpoint is written on a non-finite abort.
pub fn train_with_checkpoints(
    ds: &Dataset,
    cfg: &TrainConfig,
    model_cfg: ModelConfig,
    opts: BatchOptions,
    checkpoint_dir: Option<&Path>,
) -> Result<TrainOutput> {
    cfg.validate()?;
    if ds.trajectories.is_empty() {
        return Err(Error::Invalid("cannot train on an empty dataset".to_string()));
    }
    let mut model_cfg = model_cfg;
    model_cfg.horizon = cfg.horizon;
    model_cfg.validate()?;

    let mut base = ds.clone();
    label_dataset(&mut base);
    let (train_idx, holdout_idx) = split_indices(base.trajectories.len(), cfg.seed);

    let train_view = Dataset {
        task: base.task,
        reward: base.reward,
        trajectories: train_idx.iter().map(|&i| base.trajectories[i].clone()).collect(),
    };
    let holdout_view = Dataset {
        task: base.task,
        reward: base.reward,
        trajectories: holdout_idx.iter().map(|&i| base.trajectories[i].clone()).collect(),
    };

    let normalizer = Normalizer::fit(&train_view);
    let rtg_init = initial_rtg(&base, &train_idx);
    let featurizer = Featurizer::new(normalizer.clone(), cfg.horizon);

    let mut params = ModelParams::init(model_cfg, &mut stream(cfg.seed, STREAM_INIT))?;
    let mut adam = Adam::new(&params, cfg.eta);
    let mut batch_rng = stream(cfg.seed, STREAM_BATCH);
    let mut aug_rng = stream(cfg.seed, STREAM_AUGMENT);
    let mut pool_rng = stream(cfg.seed, STREAM_POOL);

    let mut log = TrainLog::default();
    for k in 0..cfg.iterations {
        // Epoch pool: M trajectories drawn with replacement, then augmented
        // with fresh hindsight relabels before any batch is sampled.
        let mut pool = Dataset {
            task: base.task,
            reward: base.reward,
            trajectories: (0..cfg.trajectories_per_iter)
                .map(|_| {
                    let i = pool_rng.gen_range(0..train_view.trajectories.len());
                    train_view.trajectories[i].clone()
                })
                .collect(),
        };
        augment(&mut pool, cfg.augment_copies, &mut aug_rng)?;
        let index = StepIndex::new(&pool);

        let n_batches = (index.total / (cfg.batch_size * cfg.horizon)).max(1);
        let mut batch_losses = Vec::with_capacity(n_batches);
        for b in 0..n_batches {
            let samples: Vec<(usize, usize)> = (0..cfg.batch_size)
                .map(|_| index.locate(batch_rng.gen_range(0..index.total)))
                .collect();
            let batch = featurizer.training_batch(&pool, &samples, &opts);

            // Transition head first, policy head second, every batch.
            let mut out = forward(&params, &batch)?;
            let root = loss_stm(&mut out, &batch);
            let l_stm = out.tape.scalar_value(root);
            if !l_stm.is_finite() {
                abort_snapshot(&params, &normalizer, &opts, rtg_init, checkpoint_dir);
                return Err(Error::NonFiniteLoss { loss_name: "stm", iteration: k, batch: b });
            }
            out.tape.backward(root);
            let grads = out.grads(&params)?;
            adam.step(&mut params, &grads)?;

            let mut out = forward(&params, &batch)?;
            let root = loss_tepo(&mut out, &batch, cfg.lambda);
            let l_tepo = out.tape.scalar_value(root);
            if !l_tepo.is_finite() {
                abort_snapshot(&params, &normalizer, &opts, rtg_init, checkpoint_dir);
                return Err(Error::NonFiniteLoss { loss_name: "tepo", iteration: k, batch: b });
            }
            out.tape.backward(root);
            let grads = out.grads(&params)?;
            adam.step(&mut params, &grads)?;

            batch_losses.push((l_stm, l_tepo));
        }

        let ck = Checkpoint {
            params: params.clone(),
            normalizer: normalizer.clone(),
            options: opts,
            rtg_init,
        };
        let (acc, mse) = if holdout_view.trajectories.is_empty() {
            (None, None)
        } else {
            let r = holdout_eval_capped(&ck, &holdout_view, Some(INLINE_EVAL_CAP))?;
            (r.stm_accuracy, Some(r.action_mse))
        };
        let n = batch_losses.len() as f64;
        log.iterations.push(IterationLog {
            iteration: k,
            l_stm: batch_losses.iter().map(|x| x.0).sum::<f64>() / n,
            l_tepo: batch_losses.iter().map(|x| x.1).sum::<f64>() / n,
            stm_accuracy: acc,
            action_mse: mse,
            batches: batch_losses,
        });
        if let Some(dir) = checkpoint_dir {
            ck.save(&dir.join(format!("checkpoint_{k:03}.bin")))?;
        }
    }

    let checkpoint =
        Checkpoint { params, normalizer, options: opts, rtg_init };
    if let Some(dir) = checkpoint_dir {
        checkpoint.save(&dir.join("model.bin"))?;
    }
    Ok(TrainOutput { checkpoint, log, holdout_indices: holdout_idx })
}

pub fn train(
    ds: &Dataset,
    cfg: &TrainConfig,
    model_cfg: ModelConfig,
    opts: BatchOptions,
) -> Result<TrainOutput> {
    train_with_checkpoints(ds, cfg, model_cfg, opts, None)
}

fn abort_snapshot(
    params: &ModelParams,
    normalizer: &Normalizer,
    opts: &BatchOptions,
    rtg_init: f64,
    dir: Option<&Path>,
) {
    if let Some(dir) = dir {
        let ck = Checkpoint {
            params: params.clone(),
            normalizer: normalizer.clone(),
            options: *opts,
            rtg_init,
        };
        // Best-effort: the abort error is the primary signal.
        let _ = ck.save(&dir.join("diagnostic_nonfinite.bin"));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutReport {
    /// Fraction of segment-boundary contexts whose argmax next-skill matches
    /// the demonstration; `None` when the holdout has no boundaries.
    pub stm_accuracy: Option<f64>,
    pub n_boundaries: usize,
    /// Mean squared error of the policy mean against demonstrated actions,
    /// in normalized action units.
    pub action_mse: f64,
    pub n_action_rows: usize,
}

/// Supervised evaluation on held-out trajectories: next-skill accuracy at
/// segment boundaries, action error over strided context windows.
pub fn holdout_eval(ck: &Checkpoint, holdout: &Dataset) -> Result<HoldoutReport> {
    holdout_eval_capped(ck, holdout, None)
}

fn holdout_eval_capped(
    ck: &Checkpoint,
    holdout: &Dataset,
    cap: Option<usize>,
) -> Result<HoldoutReport> {
    let h = ck.params.cfg.horizon;
    let featurizer = Featurizer::new(ck.normalizer.clone(), h);

    // Boundary samples: the last step of every non-final segment.
    let mut boundaries = Vec::new();
    for (ti, traj) in holdout.trajectories.iter().enumerate() {
        for seg in &traj.segments[..traj.segments.len().saturating_sub(1)] {
            boundaries.push((ti, seg.end - 1));
        }
    }
    if let Some(cap) = cap {
        if boundaries.len() > cap {
            let stride = boundaries.len().div_ceil(cap);
            boundaries = boundaries.into_iter().step_by(stride).collect();
        }
    }
    let n_boundaries = boundaries.len();
    let mut hits = 0usize;
    for chunk in boundaries.chunks(EVAL_CHUNK) {
        let batch = featurizer.training_batch(holdout, chunk, &ck.options);
        let out = forward(&ck.params, &batch)?;
        let logits = out.tape.value(out.stm_logits);
        // One row per real step; the query boundary is the last row of its
        // sequence, identified by its token position.
        for (si, &(ti, t)) in chunk.iter().enumerate() {
            let want_pos = si * batch.seq_len + batch.seq_len - 1;
            let row = batch
                .stm_pos
                .iter()
                .position(|&p| p == want_pos)
                .expect("boundary query row present");
            debug_assert!(batch.stm_mask[row]);
            let target = holdout.trajectories[ti].steps[t + 1].skill.index();
            debug_assert_eq!(batch.stm_target[row], target);
            let r = logits.row(row);
            let mut best = 0usize;
            for c in 1..r.len() {
                if r[c] > r[best] {
                    best = c;
                }
            }
            if best == target {
                hits += 1;
            }
        }
    }
    let stm_acc = (n_boundaries > 0).then(|| hits as f64 / n_boundaries as f64);

    // Action error over strided windows covering the holdout.
    let index = StepIndex::new(holdout);
    let max_windows = cap.unwrap_or(512).max(1);
    let stride = (index.total / max_windows).max(1);
    let samples: Vec<(usize, usize)> =
        (0..index.total).step_by(stride).map(|g| index.locate(g)).collect();
    let mut se_sum = 0.0;
    let mut n_rows = 0usize;
    for chunk in samples.chunks(EVAL_CHUNK) {
        let batch = featurizer.training_batch(holdout, chunk, &ck.options);
        let out = forward(&ck.params, &batch)?;
        if let Some(mse) = action_mse(&out, &batch) {
            let rows = batch.action_target.rows;
            se_sum += mse * rows as f64;
            n_rows += rows;
        }
        // Keep the accuracy helper honest on real batches.
        debug_assert!(stm_accuracy(&out, &batch).is_some());
    }
    let mse = if n_rows == 0 { 0.0 } else { se_sum / n_rows as f64 };
    Ok(HoldoutReport { stm_accuracy: stm_acc, n_boundaries, action_mse: mse, n_action_rows: n_rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{reward_to_go, Segment, Step, Trajectory};
    use crate::env::config::{RewardParams, TaskConfig};
    use crate::env::skill::SkillId;
    use crate::env::world::{
        Action, GripperCmd, Observation, Proprio, Tactile, Vision, WorldState,
    };
    use crate::heuristic::{collect_with, CollectOptions, HeuristicConfig};
    use crate::pose::Pose;

    fn tiny_model() -> ModelConfig {
        ModelConfig { d_model: 16, n_layers: 1, n_heads: 2, d_ff: 32, horizon: 4 }
    }

    fn obs_at(ee: Pose) -> Observation {
        Observation {
            proprio: Proprio { ee, aperture: 0.02 },
            vision: Vision {
                table_est: Pose::IDENTITY,
                leg_est: Pose { x: 0.1, y: 0.05, theta: 0.3 },
                valid: true,
            },
            tactile: Tactile { contact: false, normal_force: 0.0, slip_flow: 0.0 },
        }
    }

    fn state_at(ee: Pose) -> WorldState {
        WorldState {
            table: Pose::IDENTITY,
            leg: Pose { x: 0.1, y: 0.05, theta: 0.3 },
            ee,
            aperture: 0.02,
            grasped: None,
            thread_angle: 0.0,
            assembled: false,
        }
    }

    /// Synthetic trajectory: `pattern` segments of `steps_per_seg` steps.
    /// Observations trace a deterministic path; each step's action comes
    /// from `act`.
    fn synth_traj(
        pattern: &[SkillId],
        steps_per_seg: usize,
        mut act: impl FnMut(SkillId, usize) -> Action,
        offset: f64,
    ) -> Trajectory {
        let mut steps = Vec::new();
        let mut segments = Vec::new();
        let mut cursor = 0usize;
        for (si, &sk) in pattern.iter().enumerate() {
            for j in 0..steps_per_seg {
                let t = (cursor + j) as f64;
                let ee = Pose { x: 0.01 * t + offset, y: -0.005 * t, theta: 0.02 * t };
                steps.push(Step {
                    obs: obs_at(ee),
                    state: state_at(ee),
                    action: act(sk, j),
                    reward: -0.1,
                    skill: sk,
                    rtg: 0.0,
                });
            }
            segments.push(Segment {
                skill: sk,
                start: cursor,
                end: cursor + steps_per_seg,
                goal: Pose::IDENTITY,
                achieved: true,
            });
            cursor += steps_per_seg;
            let _ = si;
        }
        let final_ee = Pose { x: 0.01 * cursor as f64 + offset, y: 0.0, theta: 0.0 };
        let mut traj = Trajectory {
            steps,
            final_state: state_at(final_ee),
            segments,
            relabeled: false,
            truncated: false,
        };
        reward_to_go(&mut traj);
        traj
    }

    /// Five-skill cyclic corpus with skill-dependent actions.
    fn cyclic_dataset(n: usize) -> Dataset {
        let pattern = [SkillId::Pick, SkillId::Reach, SkillId::Insert, SkillId::Screw, SkillId::Adjust];
        let mut ds = Dataset::new(TaskConfig::square_table(), RewardParams::default());
        for i in 0..n {
            let traj = synth_traj(
                &pattern,
                3,
                |sk, j| Action {
                    dx: 0.002 * (sk.index() as f64 + 1.0),
                    dy: -0.001 + 0.0005 * (j as f64 - 1.0),
                    dtheta: if sk.index() % 2 == 0 { 0.05 } else { -0.05 },
                    gripper: GripperCmd::Hold,
                },
                0.001 * i as f64,
            );
            ds.trajectories.push(traj);
        }
        ds
    }

    #[test]
    fn zero_iterations_returns_initialized_params() {
        let ds = cyclic_dataset(6);
        let cfg = TrainConfig { iterations: 0, trajectories_per_iter: 4, batch_size: 4, horizon: 4, ..TrainConfig::default() };
        let out = train(&ds, &cfg, tiny_model(), BatchOptions::default()).unwrap();
        assert!(out.log.iterations.is_empty());
        let mut expected_cfg = tiny_model();
        expected_cfg.horizon = cfg.horizon;
        let expected = ModelParams::init(expected_cfg, &mut stream(cfg.seed, STREAM_INIT)).unwrap();
        assert_eq!(out.checkpoint.params, expected);
    }

    #[test]
    fn same_seed_gives_identical_logs_and_params() {
        let ds = cyclic_dataset(8);
        let cfg = TrainConfig {
            iterations: 2,
            trajectories_per_iter: 6,
            batch_size: 4,
            horizon: 4,
            augment_copies: 1,
            seed: 42,
            ..TrainConfig::default()
        };
        let a = train(&ds, &cfg, tiny_model(), BatchOptions::default()).unwrap();
        let b = train(&ds, &cfg, tiny_model(), BatchOptions::default()).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.checkpoint, b.checkpoint);
    }

    #[test]
    fn losses_decrease_on_the_cyclic_corpus() {
        let ds = cyclic_dataset(12);
        let cfg = TrainConfig {
            iterations: 10,
            trajectories_per_iter: 10,
            batch_size: 8,
            horizon: 4,
            eta: 3e-3,
            lambda: 0.01,
            augment_copies: 0,
            seed: 7,
        };
        let out = train(&ds, &cfg, tiny_model(), BatchOptions::default()).unwrap();
        let iters = &out.log.iterations;
        assert_eq!(iters.len(), 10);
        let drops = |f: &dyn Fn(&IterationLog) -> f64| {
            iters.windows(2).filter(|w| f(&w[1]) < f(&w[0])).count()
        };
        let stm_drops = drops(&|it| it.l_stm);
        let tepo_drops = drops(&|it| it.l_tepo);
        assert!(stm_drops >= 8, "transition loss fell in only {stm_drops}/9 steps");
        assert!(tepo_drops >= 8, "policy loss fell in only {tepo_drops}/9 steps");
    }

    #[test]
    fn conditioning_flips_the_rotation_sign() {
        // Identical observations, opposite dtheta by skill: the trained mean
        // must take its sign from the skill token.
        let mut ds = Dataset::new(TaskConfig::square_table(), RewardParams::default());
        for i in 0..24 {
            let skill = if i % 2 == 0 { SkillId::Pick } else { SkillId::Reach };
            let dtheta = if skill == SkillId::Pick { 0.05 } else { -0.05 };
            // Small intra-skill wobble keeps residual variance nonzero so
            // sigma settles instead of collapsing onto constant targets.
            ds.trajectories.push(synth_traj(
                &[skill],
                8,
                |_, j| Action {
                    dx: 0.001,
                    dy: 0.0,
                    dtheta: dtheta + 0.002 * ((j % 5) as f64 - 2.0),
                    gripper: GripperCmd::Hold,
                },
                0.0,
            ));
        }
        let cfg = TrainConfig {
            iterations: 40,
            trajectories_per_iter: 20,
            batch_size: 8,
            horizon: 4,
            eta: 1e-3,
            lambda: 0.1,
            augment_copies: 0,
            seed: 3,
        };
        let out = train(&ds, &cfg, tiny_model(), BatchOptions::default()).unwrap();
        let ck = &out.checkpoint;
        let featurizer = Featurizer::new(ck.normalizer.clone(), 4);

        let mu_for = |skill: SkillId| {
            let mut ctx = crate::data::sample_context(&ds.trajectories[0], 3, 4);
            for s in &mut ctx.steps {
                s.skill = skill;
            }
            ctx.steps.last_mut().unwrap().action = None;
            let b = featurizer.query_batch(&ctx, &ck.options);
            let o = forward(&ck.params, &b).unwrap();
            let mu = ck.normalizer.denorm_action(o.tape.value(o.mu).row(0));
            mu[2]
        };
        let pick = mu_for(SkillId::Pick);
        let reach = mu_for(SkillId::Reach);
        assert!(pick > 0.0, "Pick-conditioned dtheta mean {pick} not positive");
        assert!(reach < 0.0, "Reach-conditioned dtheta mean {reach} not negative");
    }

    #[test]
    fn nonfinite_losses_abort_with_an_error() {
        let ds = cyclic_dataset(8);
        let cfg = TrainConfig {
            iterations: 3,
            trajectories_per_iter: 6,
            batch_size: 4,
            horizon: 4,
            eta: 1e25,
            ..TrainConfig::default()
        };
        assert!(train(&ds, &cfg, tiny_model(), BatchOptions::default()).is_err());
    }

    #[test]
    fn holdout_eval_counts_boundaries_and_scores_chance_when_untrained() {
        let task = TaskConfig::square_table();
        let opts = CollectOptions {
            num_trajectories: 12,
            seed: 23,
            full_task_fraction: 1.0,
            randomize_speed: false,
        };
        let ds = collect_with(&task, &HeuristicConfig::default(), &opts).unwrap();
        let expected: usize =
            ds.trajectories.iter().map(|t| t.segments.len() - 1).sum();
        let mut rng = stream(5, STREAM_INIT);
        let mut cfg = tiny_model();
        cfg.horizon = 4;
        let ck = Checkpoint {
            params: ModelParams::init(cfg, &mut rng).unwrap(),
            normalizer: Normalizer::fit(&ds),
            options: BatchOptions::default(),
            rtg_init: 0.0,
        };
        let report = holdout_eval(&ck, &ds).unwrap();
        assert_eq!(report.n_boundaries, expected);
        let acc = report.stm_accuracy.unwrap();
        assert!((0.0..=0.7).contains(&acc), "untrained accuracy {acc} out of band");
        assert!(report.action_mse.is_finite() && report.n_action_rows > 0);
    }

    #[test]
    fn checkpoints_are_written_every_iteration() {
        let ds = cyclic_dataset(6);
        let dir = tempfile::tempdir().unwrap();
        let cfg = TrainConfig {
            iterations: 2,
            trajectories_per_iter: 4,
            batch_size: 4,
            horizon: 4,
            augment_copies: 0,
            ..TrainConfig::default()
        };
        let out =
            train_with_checkpoints(&ds, &cfg, tiny_model(), BatchOptions::default(), Some(dir.path()))
                .unwrap();
        assert!(dir.path().join("checkpoint_000.bin").exists());
        assert!(dir.path().join("checkpoint_001.bin").exists());
        let reloaded = Checkpoint::load(&dir.path().join("model.bin")).unwrap();
        assert_eq!(reloaded, out.checkpoint);
    }
}
