//! Turns context windows into the flat tensors the sequence model consumes.
//!
//! Every step contributes six tokens in a fixed order: return-to-go,
//! proprioception, vision, tactile, state estimate, action. The state token
//! is assembled from the vision estimates and proprioception, never from the
//! simulator's ground-truth state, so training and deployment see the same
//! information. Features are z-scored with dataset statistics and clamped, so
//! off-distribution inputs degrade gracefully instead of exploding.

use crate::data::{sample_context, Context, Dataset};
use crate::env::world::{Action, Observation};

use super::tensor::Tensor;

pub const F_RTG: usize = 1;
pub const F_PROPRIO: usize = 5;
pub const F_VISION: usize = 8;
pub const F_TACTILE: usize = 3;
pub const F_STATE: usize = 13;
pub const F_ACTION: usize = 4;

pub const TOKENS_PER_STEP: usize = 6;
pub const SLOT_RTG: usize = 0;
pub const SLOT_PROPRIO: usize = 1;
pub const SLOT_VISION: usize = 2;
pub const SLOT_TACTILE: usize = 3;
pub const SLOT_STATE: usize = 4;
pub const SLOT_ACTION: usize = 5;

/// Skill-embedding row used by the flat (transition-blind) ablation.
pub const FLAT_SKILL_ID: usize = 5;
/// Skill-embedding vocabulary: the five skills plus the flat token.
pub const SKILL_VOCAB: usize = 6;

/// Normalized features outside this band are clamped.
const Z_CLAMP: f64 = 8.0;
/// Stds below this are floored so constant features stay finite.
const STD_FLOOR: f64 = 1e-6;

fn pose4(p: &crate::pose::Pose) -> [f64; 4] {
    [p.x, p.y, p.theta.cos(), p.theta.sin()]
}

pub fn proprio_features(o: &Observation) -> [f64; F_PROPRIO] {
    let [x, y, c, s] = pose4(&o.proprio.ee);
    [x, y, c, s, o.proprio.aperture]
}

pub fn vision_features(o: &Observation) -> [f64; F_VISION] {
    let [tx, ty, tc, ts] = pose4(&o.vision.table_est);
    let [lx, ly, lc, ls] = pose4(&o.vision.leg_est);
    [tx, ty, tc, ts, lx, ly, lc, ls]
}

pub fn tactile_features(o: &Observation) -> [f64; F_TACTILE] {
    [if o.tactile.contact { 1.0 } else { 0.0 }, o.tactile.normal_force, o.tactile.slip_flow]
}

/// Vision-estimated world snapshot: leg, table, end effector, aperture.
pub fn state_features(o: &Observation) -> [f64; F_STATE] {
    let [lx, ly, lc, ls] = pose4(&o.vision.leg_est);
    let [tx, ty, tc, ts] = pose4(&o.vision.table_est);
    let [ex, ey, ec, es] = pose4(&o.proprio.ee);
    [lx, ly, lc, ls, tx, ty, tc, ts, ex, ey, ec, es, o.proprio.aperture]
}

pub fn action_features(a: &Action) -> [f64; F_ACTION] {
    [a.dx, a.dy, a.dtheta, a.gripper.logit()]
}

/// Per-dimension mean and (floored) standard deviation of one feature group.
#[derive(Debug, Clone, PartialEq)]
pub struct Stats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Stats {
    fn identity(dim: usize) -> Stats {
        Stats { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    fn fit(dim: usize, rows: &[Vec<f64>]) -> Stats {
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for row in rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut std = vec![0.0; dim];
        for row in rows {
            for (s, (v, m)) in std.iter_mut().zip(row.iter().zip(&mean)) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut std {
            *s = (*s / n).sqrt().max(STD_FLOOR);
        }
        Stats { mean, std }
    }

    fn norm_clamped(&self, xs: &[f64], out: &mut [f64]) {
        for ((o, x), (m, s)) in out.iter_mut().zip(xs).zip(self.mean.iter().zip(&self.std)) {
            *o = ((x - m) / s).clamp(-Z_CLAMP, Z_CLAMP);
        }
    }
}

/// Z-scoring statistics for every feature group, fit on one dataset and
/// shipped inside the checkpoint so inference normalizes identically.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub rtg: Stats,
    pub proprio: Stats,
    pub vision: Stats,
    pub tactile: Stats,
    pub state: Stats,
    pub action: Stats,
}

impl Normalizer {
    /// Mean 0, std 1: features pass through (minus the clamp).
    pub fn identity() -> Normalizer {
        Normalizer {
            rtg: Stats::identity(F_RTG),
            proprio: Stats::identity(F_PROPRIO),
            vision: Stats::identity(F_VISION),
            tactile: Stats::identity(F_TACTILE),
            state: Stats::identity(F_STATE),
            action: Stats::identity(F_ACTION),
        }
    }

    pub fn fit(ds: &Dataset) -> Normalizer {
        let mut rtg = Vec::new();
        let mut proprio = Vec::new();
        let mut vision = Vec::new();
        let mut tactile = Vec::new();
        let mut state = Vec::new();
        let mut action = Vec::new();
        for traj in &ds.trajectories {
            for step in &traj.steps {
                rtg.push(vec![step.rtg]);
                proprio.push(proprio_features(&step.obs).to_vec());
                vision.push(vision_features(&step.obs).to_vec());
                tactile.push(tactile_features(&step.obs).to_vec());
                state.push(state_features(&step.obs).to_vec());
                action.push(action_features(&step.action).to_vec());
            }
        }
        Normalizer {
            rtg: Stats::fit(F_RTG, &rtg),
            proprio: Stats::fit(F_PROPRIO, &proprio),
            vision: Stats::fit(F_VISION, &vision),
            tactile: Stats::fit(F_TACTILE, &tactile),
            state: Stats::fit(F_STATE, &state),
            action: Stats::fit(F_ACTION, &action),
        }
    }

    /// Normalized action vector, used both as token features and as the
    /// regression target.
    pub fn norm_action(&self, a: &Action) -> [f64; F_ACTION] {
        let raw = action_features(a);
        let mut out = [0.0; F_ACTION];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (raw[i] - self.action.mean[i]) / self.action.std[i];
        }
        out
    }

    /// Maps a policy-head mean back to raw action units.
    pub fn denorm_action(&self, v: &[f64]) -> [f64; F_ACTION] {
        debug_assert_eq!(v.len(), F_ACTION);
        let mut out = [0.0; F_ACTION];
        for (i, o) in out.iter_mut().enumerate() {
            *o = v[i] * self.action.std[i] + self.action.mean[i];
        }
        out
    }
}

/// Input-shaping switches for the two ablations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BatchOptions {
    /// Tactile tokens carry the pad embedding instead of tactile features.
    pub tactile_ablated: bool,
    /// Every token is conditioned on the dedicated flat skill row instead of
    /// the step's true skill.
    pub flat_skill: bool,
}

/// One forward pass worth of token features and supervision.
///
/// Feature tensors hold one row per token *of that modality*; the matching
/// `*_pos` vector gives each row's global token position (sequences are
/// concatenated, `seq * seq_len + offset`). Head supervision aligns with
/// `policy_pos` / `stm_pos` row by row.
#[derive(Debug, Clone)]
pub struct Batch {
    pub n_seqs: usize,
    pub seq_len: usize,
    pub rtg: Tensor,
    pub rtg_pos: Vec<usize>,
    pub proprio: Tensor,
    pub proprio_pos: Vec<usize>,
    pub vision: Tensor,
    pub vision_pos: Vec<usize>,
    pub tactile: Tensor,
    pub tactile_pos: Vec<usize>,
    pub state: Tensor,
    pub state_pos: Vec<usize>,
    pub action_tok: Tensor,
    pub action_pos: Vec<usize>,
    /// Positions that receive the pad embedding (pad steps and, under the
    /// tactile ablation, tactile slots).
    pub pad_pos: Vec<usize>,
    /// Skill conditioning, one entry per non-pad token.
    pub skill_ids: Vec<usize>,
    pub skill_pos: Vec<usize>,
    /// Window-position embedding, one entry per non-pad token.
    pub time_ids: Vec<usize>,
    pub time_pos: Vec<usize>,
    /// State-token positions the policy head reads.
    pub policy_pos: Vec<usize>,
    /// Normalized action targets, one row per `policy_pos` entry; empty rows
    /// at inference.
    pub action_target: Tensor,
    /// Action-token positions the transition head reads.
    pub stm_pos: Vec<usize>,
    /// Next-skill class per `stm_pos` entry.
    pub stm_target: Vec<usize>,
    /// False where the next skill is unknown (episode-final step).
    pub stm_mask: Vec<bool>,
}

impl Batch {
    pub fn total_tokens(&self) -> usize {
        self.n_seqs * self.seq_len
    }
}

struct BatchBuilder {
    rtg: Vec<f64>,
    rtg_pos: Vec<usize>,
    proprio: Vec<f64>,
    proprio_pos: Vec<usize>,
    vision: Vec<f64>,
    vision_pos: Vec<usize>,
    tactile: Vec<f64>,
    tactile_pos: Vec<usize>,
    state: Vec<f64>,
    state_pos: Vec<usize>,
    action_tok: Vec<f64>,
    action_pos: Vec<usize>,
    pad_pos: Vec<usize>,
    skill_ids: Vec<usize>,
    skill_pos: Vec<usize>,
    time_ids: Vec<usize>,
    time_pos: Vec<usize>,
    policy_pos: Vec<usize>,
    action_target: Vec<f64>,
    stm_pos: Vec<usize>,
    stm_target: Vec<usize>,
    stm_mask: Vec<bool>,
}

impl BatchBuilder {
    fn new() -> BatchBuilder {
        BatchBuilder {
            rtg: Vec::new(),
            rtg_pos: Vec::new(),
            proprio: Vec::new(),
            proprio_pos: Vec::new(),
            vision: Vec::new(),
            vision_pos: Vec::new(),
            tactile: Vec::new(),
            tactile_pos: Vec::new(),
            state: Vec::new(),
            state_pos: Vec::new(),
            action_tok: Vec::new(),
            action_pos: Vec::new(),
            pad_pos: Vec::new(),
            skill_ids: Vec::new(),
            skill_pos: Vec::new(),
            time_ids: Vec::new(),
            time_pos: Vec::new(),
            policy_pos: Vec::new(),
            action_target: Vec::new(),
            stm_pos: Vec::new(),
            stm_target: Vec::new(),
            stm_mask: Vec::new(),
        }
    }

    /// A whole step of pad tokens.
    fn pad_step(&mut self, tok0: usize, include_action: bool) {
        let slots = if include_action { TOKENS_PER_STEP } else { TOKENS_PER_STEP - 1 };
        for slot in 0..slots {
            self.pad_pos.push(tok0 + slot);
        }
    }

    /// One real step's tokens. `action` is absent only at an inference query.
    #[allow(clippy::too_many_arguments)]
    fn real_step(
        &mut self,
        nz: &Normalizer,
        tok0: usize,
        window_k: usize,
        cs: &crate::data::ContextStep,
        opts: &BatchOptions,
    ) {
        let mut buf = [0.0; F_STATE];

        nz.rtg.norm_clamped(&[cs.rtg], &mut buf[..F_RTG]);
        self.rtg.extend_from_slice(&buf[..F_RTG]);
        self.rtg_pos.push(tok0 + SLOT_RTG);

        nz.proprio.norm_clamped(&proprio_features(&cs.obs), &mut buf[..F_PROPRIO]);
        self.proprio.extend_from_slice(&buf[..F_PROPRIO]);
        self.proprio_pos.push(tok0 + SLOT_PROPRIO);

        nz.vision.norm_clamped(&vision_features(&cs.obs), &mut buf[..F_VISION]);
        self.vision.extend_from_slice(&buf[..F_VISION]);
        self.vision_pos.push(tok0 + SLOT_VISION);

        if opts.tactile_ablated {
            self.pad_pos.push(tok0 + SLOT_TACTILE);
        } else {
            nz.tactile.norm_clamped(&tactile_features(&cs.obs), &mut buf[..F_TACTILE]);
            self.tactile.extend_from_slice(&buf[..F_TACTILE]);
            self.tactile_pos.push(tok0 + SLOT_TACTILE);
        }

        nz.state.norm_clamped(&state_features(&cs.obs), &mut buf[..F_STATE]);
        self.state.extend_from_slice(&buf[..F_STATE]);
        self.state_pos.push(tok0 + SLOT_STATE);

        let n_tokens = match &cs.action {
            Some(a) => {
                let na = nz.norm_action(a);
                for (i, v) in na.iter().enumerate() {
                    buf[i] = v.clamp(-Z_CLAMP, Z_CLAMP);
                }
                self.action_tok.extend_from_slice(&buf[..F_ACTION]);
                self.action_pos.push(tok0 + SLOT_ACTION);
                TOKENS_PER_STEP
            }
            None => TOKENS_PER_STEP - 1,
        };

        let skill = if opts.flat_skill { FLAT_SKILL_ID } else { cs.skill.index() };
        for slot in 0..n_tokens {
            self.skill_ids.push(skill);
            self.skill_pos.push(tok0 + slot);
            self.time_ids.push(window_k);
            self.time_pos.push(tok0 + slot);
        }
    }

    fn finish(self, n_seqs: usize, seq_len: usize) -> Batch {
        let t = |data: Vec<f64>, cols: usize| {
            let rows = data.len() / cols;
            Tensor::from_vec(rows, cols, data)
        };
        Batch {
            n_seqs,
            seq_len,
            rtg: t(self.rtg, F_RTG),
            rtg_pos: self.rtg_pos,
            proprio: t(self.proprio, F_PROPRIO),
            proprio_pos: self.proprio_pos,
            vision: t(self.vision, F_VISION),
            vision_pos: self.vision_pos,
            tactile: t(self.tactile, F_TACTILE),
            tactile_pos: self.tactile_pos,
            state: t(self.state, F_STATE),
            state_pos: self.state_pos,
            action_tok: t(self.action_tok, F_ACTION),
            action_pos: self.action_pos,
            pad_pos: self.pad_pos,
            skill_ids: self.skill_ids,
            skill_pos: self.skill_pos,
            time_ids: self.time_ids,
            time_pos: self.time_pos,
            policy_pos: self.policy_pos,
            action_target: t(self.action_target, F_ACTION),
            stm_pos: self.stm_pos,
            stm_target: self.stm_target,
            stm_mask: self.stm_mask,
        }
    }
}

/// Batch assembly parameterized by normalization statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Featurizer {
    pub normalizer: Normalizer,
    pub horizon: usize,
}

impl Featurizer {
    pub fn new(normalizer: Normalizer, horizon: usize) -> Featurizer {
        assert!(horizon >= 1);
        Featurizer { normalizer, horizon }
    }

    /// Training batch: each `(trajectory, end step)` sample becomes one full
    /// window of `horizon` steps (6 tokens each). Every real step is
    /// supervised: the policy head at its state token, the transition head at
    /// its action token with the next step's skill as target (masked at the
    /// episode end).
    pub fn training_batch(
        &self,
        ds: &Dataset,
        samples: &[(usize, usize)],
        opts: &BatchOptions,
    ) -> Batch {
        let h = self.horizon;
        let seq_len = TOKENS_PER_STEP * h;
        let mut b = BatchBuilder::new();
        for (si, &(ti, t)) in samples.iter().enumerate() {
            let traj = &ds.trajectories[ti];
            let ctx = sample_context(traj, t, h);
            let n_real = ctx.num_real();
            let first_global = t + 1 - n_real;
            let base = si * seq_len;
            for (k, cs) in ctx.steps.iter().enumerate() {
                let tok0 = base + k * TOKENS_PER_STEP;
                if cs.pad {
                    b.pad_step(tok0, true);
                    continue;
                }
                b.real_step(&self.normalizer, tok0, k, cs, opts);
                let g = first_global + (k - (h - n_real));
                let a = cs.action.as_ref().expect("training windows keep every action");
                b.policy_pos.push(tok0 + SLOT_STATE);
                b.action_target.extend_from_slice(&self.normalizer.norm_action(a));
                b.stm_pos.push(tok0 + SLOT_ACTION);
                match traj.steps.get(g + 1) {
                    Some(next) => {
                        b.stm_target.push(next.skill.index());
                        b.stm_mask.push(true);
                    }
                    None => {
                        b.stm_target.push(0);
                        b.stm_mask.push(false);
                    }
                }
            }
        }
        b.finish(samples.len(), seq_len)
    }

    /// Single-sequence inference batch. When the final step's action is
    /// `None` the sequence is one token short and the policy head reads the
    /// final state token; when it is present the transition head reads the
    /// final action token. No supervision is attached.
    pub fn query_batch(&self, ctx: &Context, opts: &BatchOptions) -> Batch {
        let h = self.horizon;
        assert_eq!(ctx.horizon(), h, "query window must match the model horizon");
        for cs in &ctx.steps[..h - 1] {
            assert!(cs.pad || cs.action.is_some(), "only the query step may lack an action");
        }
        let last = ctx.steps.last().expect("context is never empty");
        assert!(!last.pad, "query step cannot be a pad");
        let action_query = last.action.is_none();
        let seq_len = if action_query { TOKENS_PER_STEP * h - 1 } else { TOKENS_PER_STEP * h };
        let mut b = BatchBuilder::new();
        for (k, cs) in ctx.steps.iter().enumerate() {
            let tok0 = k * TOKENS_PER_STEP;
            if cs.pad {
                b.pad_step(tok0, true);
                continue;
            }
            b.real_step(&self.normalizer, tok0, k, cs, opts);
        }
        let last_tok0 = (h - 1) * TOKENS_PER_STEP;
        if action_query {
            b.policy_pos.push(last_tok0 + SLOT_STATE);
        } else {
            b.stm_pos.push(last_tok0 + SLOT_ACTION);
        }
        b.finish(1, seq_len)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ContextStep;
    use crate::env::config::TaskConfig;
    use crate::env::skill::SkillId;
    use crate::heuristic::{collect_with, CollectOptions, HeuristicConfig};

    fn small_dataset() -> Dataset {
        let task = TaskConfig::square_table();
        let opts = CollectOptions {
            num_trajectories: 3,
            seed: 5,
            full_task_fraction: 1.0,
            randomize_speed: false,
        };
        collect_with(&task, &HeuristicConfig::default(), &opts).unwrap()
    }

    #[test]
    fn stats_fit_recovers_mean_and_std() {
        let rows = vec![vec![1.0, -2.0], vec![3.0, -2.0], vec![5.0, -2.0]];
        let s = Stats::fit(2, &rows);
        assert!((s.mean[0] - 3.0).abs() < 1e-12);
        assert!((s.mean[1] + 2.0).abs() < 1e-12);
        assert!((s.std[0] - (8.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(s.std[1], 1e-6);
    }

    #[test]
    fn action_norm_round_trips() {
        let ds = small_dataset();
        let nz = Normalizer::fit(&ds);
        let a = &ds.trajectories[0].steps[3].action;
        let na = nz.norm_action(a);
        let back = nz.denorm_action(&na);
        let raw = action_features(a);
        for (x, y) in raw.iter().zip(&back) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn training_batch_geometry() {
        let ds = small_dataset();
        let f = Featurizer::new(Normalizer::fit(&ds), 4);
        let samples = [(0usize, 1usize), (1, 10)];
        let b = f.training_batch(&ds, &samples, &BatchOptions::default());
        assert_eq!(b.n_seqs, 2);
        assert_eq!(b.seq_len, 24);
        // Window ending at step 1 holds 2 real steps, so 2 pad steps.
        assert_eq!(b.policy_pos.len(), 2 + 4);
        assert_eq!(b.stm_pos.len(), b.policy_pos.len());
        assert_eq!(b.action_target.rows, b.policy_pos.len());
        assert_eq!(b.pad_pos.len(), 2 * TOKENS_PER_STEP);
        // Every token position is covered exactly once by a modality or pad.
        let mut seen = vec![0u32; b.total_tokens()];
        for &p in b
            .rtg_pos
            .iter()
            .chain(&b.proprio_pos)
            .chain(&b.vision_pos)
            .chain(&b.tactile_pos)
            .chain(&b.state_pos)
            .chain(&b.action_pos)
            .chain(&b.pad_pos)
        {
            seen[p] += 1;
        }
        assert!(seen.iter().all(|&c| c == 1));
        // Conditioning covers exactly the non-pad tokens.
        assert_eq!(b.skill_pos.len(), b.total_tokens() - b.pad_pos.len());
        assert_eq!(b.time_pos, b.skill_pos);
    }

    #[test]
    fn stm_targets_follow_the_next_step_and_mask_the_end() {
        let ds = small_dataset();
        let traj = &ds.trajectories[0];
        let last = traj.len() - 1;
        let f = Featurizer::new(Normalizer::fit(&ds), 3);
        let b = f.training_batch(&ds, &[(0, last)], &BatchOptions::default());
        assert_eq!(b.stm_mask, vec![true, true, false]);
        assert_eq!(b.stm_target[0], traj.steps[last - 1].skill.index());
        assert_eq!(b.stm_target[1], traj.steps[last].skill.index());
    }

    #[test]
    fn tactile_ablation_moves_tokens_to_pad() {
        let ds = small_dataset();
        let f = Featurizer::new(Normalizer::fit(&ds), 3);
        let opts = BatchOptions { tactile_ablated: true, flat_skill: false };
        let b = f.training_batch(&ds, &[(0, 5)], &opts);
        assert_eq!(b.tactile_pos.len(), 0);
        assert_eq!(b.tactile.rows, 0);
        // 3 real steps' tactile slots joined the pad set.
        assert_eq!(b.pad_pos.iter().filter(|&&p| p % TOKENS_PER_STEP == SLOT_TACTILE).count(), 3);
    }

    #[test]
    fn flat_skill_uses_the_dedicated_row() {
        let ds = small_dataset();
        let f = Featurizer::new(Normalizer::fit(&ds), 3);
        let opts = BatchOptions { tactile_ablated: false, flat_skill: true };
        let b = f.training_batch(&ds, &[(0, 5)], &opts);
        assert!(b.skill_ids.iter().all(|&s| s == FLAT_SKILL_ID));
    }

    fn query_ctx(ds: &Dataset, t: usize, h: usize, strip_action: bool) -> Context {
        let mut ctx = sample_context(&ds.trajectories[0], t, h);
        if strip_action {
            ctx.steps.last_mut().unwrap().action = None;
        }
        ctx
    }

    #[test]
    fn action_query_is_one_token_short() {
        let ds = small_dataset();
        let f = Featurizer::new(Normalizer::fit(&ds), 4);
        let b = f.query_batch(&query_ctx(&ds, 6, 4, true), &BatchOptions::default());
        assert_eq!(b.seq_len, 23);
        assert_eq!(b.policy_pos, vec![3 * TOKENS_PER_STEP + SLOT_STATE]);
        assert!(b.stm_pos.is_empty());
        assert_eq!(b.action_pos.len(), 3);
    }

    #[test]
    fn skill_query_reads_the_final_action_token() {
        let ds = small_dataset();
        let f = Featurizer::new(Normalizer::fit(&ds), 4);
        let b = f.query_batch(&query_ctx(&ds, 6, 4, false), &BatchOptions::default());
        assert_eq!(b.seq_len, 24);
        assert!(b.policy_pos.is_empty());
        assert_eq!(b.stm_pos, vec![3 * TOKENS_PER_STEP + SLOT_ACTION]);
    }

    #[test]
    fn pad_steps_emit_nothing_but_pad_positions() {
        use crate::env::world::{Proprio, Tactile, Vision, WorldState};
        use crate::pose::Pose;
        let obs = Observation {
            proprio: Proprio { ee: Pose::IDENTITY, aperture: 0.0 },
            vision: Vision { table_est: Pose::IDENTITY, leg_est: Pose::IDENTITY, valid: true },
            tactile: Tactile { contact: false, normal_force: 0.0, slip_flow: 0.0 },
        };
        let state = WorldState {
            table: Pose::IDENTITY,
            leg: Pose::IDENTITY,
            ee: Pose::IDENTITY,
            aperture: 0.0,
            grasped: None,
            thread_angle: 0.0,
            assembled: false,
        };
        let zero = ContextStep {
            rtg: 0.0,
            obs,
            state,
            action: None,
            skill: SkillId::Pick,
            pad: true,
        };
        let real = ContextStep {
            rtg: 1.0,
            obs,
            state,
            action: Some(Action::HOLD),
            skill: SkillId::Pick,
            pad: false,
        };
        let ctx = Context { steps: vec![zero, real] };
        let f = Featurizer::new(Normalizer::identity(), 2);
        let b = f.query_batch(&ctx, &BatchOptions::default());
        assert_eq!(b.pad_pos, vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(b.rtg_pos, vec![6]);
        assert_eq!(b.stm_pos, vec![11]);
    }
}
