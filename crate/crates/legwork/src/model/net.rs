//! The sequence model: token embedding, pre-norm causal transformer trunk,
//! and the two output heads. The transition head reads the hidden state at
//! action tokens and scores the next skill; the policy head reads the hidden
//! state at state tokens and emits a diagonal Gaussian over the action.

use std::collections::HashMap;

use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

use super::featurize::{
    Batch, F_ACTION, F_PROPRIO, F_RTG, F_STATE, F_TACTILE, F_VISION, SKILL_VOCAB,
    TOKENS_PER_STEP,
};
use super::tape::{Tape, Var};
use super::tensor::Tensor;

/// Skill classes the transition head scores (the flat ablation token is an
/// input-only embedding row, never a prediction target).
pub const STM_CLASSES: usize = 5;

pub const LOG_SIGMA_MIN: f64 = -5.0;
pub const LOG_SIGMA_MAX: f64 = 2.0;

const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    /// Context window length in steps; sequences hold 6 tokens per step.
    pub horizon: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { d_model: 32, n_layers: 2, n_heads: 4, d_ff: 128, horizon: 10 }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.n_heads == 0 || self.d_ff == 0 || self.horizon == 0 {
            return Err(Error::Config("model dimensions must be positive".to_string()));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        Ok(())
    }

    pub fn max_tokens(&self) -> usize {
        TOKENS_PER_STEP * self.horizon
    }

    /// Tiny configuration for the finite-difference gradient oracle; must
    /// stay under 1e4 parameters.
    pub fn gradcheck() -> ModelConfig {
        ModelConfig { d_model: 12, n_layers: 1, n_heads: 2, d_ff: 24, horizon: 3 }
    }
}

/// All learned tensors in a fixed, named order. The order is the contract
/// for optimizer state and checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub cfg: ModelConfig,
    pub tensors: Vec<(String, Tensor)>,
}

fn layout(cfg: &ModelConfig) -> Vec<(String, usize, usize, Init)> {
    let d = cfg.d_model;
    let mut v: Vec<(String, usize, usize, Init)> = Vec::new();
    let mut w = |name: &str, r: usize, c: usize| v.push((name.to_string(), r, c, Init::Randn));
    w("embed.rtg.w", F_RTG, d);
    w("embed.proprio.w", F_PROPRIO, d);
    w("embed.vision.w", F_VISION, d);
    w("embed.tactile.w", F_TACTILE, d);
    w("embed.state.w", F_STATE, d);
    w("embed.action.w", F_ACTION, d);
    w("embed.skill", SKILL_VOCAB, d);
    w("embed.time", cfg.horizon, d);
    w("embed.pad", 1, d);
    for (name, r, c) in [
        ("embed.rtg.b", 1, d),
        ("embed.proprio.b", 1, d),
        ("embed.vision.b", 1, d),
        ("embed.tactile.b", 1, d),
        ("embed.state.b", 1, d),
        ("embed.action.b", 1, d),
    ] {
        v.push((name.to_string(), r, c, Init::Zero));
    }
    for l in 0..cfg.n_layers {
        let p = |s: &str| format!("layer{l}.{s}");
        v.push((p("ln1.g"), 1, d, Init::One));
        v.push((p("ln1.b"), 1, d, Init::Zero));
        v.push((p("attn.wq"), d, d, Init::Randn));
        v.push((p("attn.bq"), 1, d, Init::Zero));
        v.push((p("attn.wk"), d, d, Init::Randn));
        v.push((p("attn.bk"), 1, d, Init::Zero));
        v.push((p("attn.wv"), d, d, Init::Randn));
        v.push((p("attn.bv"), 1, d, Init::Zero));
        v.push((p("attn.wo"), d, d, Init::Randn));
        v.push((p("attn.bo"), 1, d, Init::Zero));
        v.push((p("ln2.g"), 1, d, Init::One));
        v.push((p("ln2.b"), 1, d, Init::Zero));
        v.push((p("ffn.w1"), d, cfg.d_ff, Init::Randn));
        v.push((p("ffn.b1"), 1, cfg.d_ff, Init::Zero));
        v.push((p("ffn.w2"), cfg.d_ff, d, Init::Randn));
        v.push((p("ffn.b2"), 1, d, Init::Zero));
    }
    v.push(("final_ln.g".to_string(), 1, d, Init::One));
    v.push(("final_ln.b".to_string(), 1, d, Init::Zero));
    v.push(("head.stm.w".to_string(), d, STM_CLASSES, Init::Randn));
    v.push(("head.stm.b".to_string(), 1, STM_CLASSES, Init::Zero));
    v.push(("head.policy.w".to_string(), d, 2 * F_ACTION, Init::Randn));
    v.push(("head.policy.b".to_string(), 1, 2 * F_ACTION, Init::Zero));
    v
}

enum Init {
    Randn,
    Zero,
    One,
}

impl ModelParams {
    pub fn init(cfg: ModelConfig, rng: &mut ChaCha8Rng) -> Result<ModelParams> {
        cfg.validate()?;
        let tensors = layout(&cfg)
            .into_iter()
            .map(|(name, r, c, init)| {
                let t = match init {
                    Init::Randn => Tensor::randn(r, c, INIT_STD, rng),
                    Init::Zero => Tensor::zeros(r, c),
                    Init::One => Tensor::from_vec(1, c, vec![1.0; c]),
                };
                (name, t)
            })
            .collect();
        Ok(ModelParams { cfg, tensors })
    }

    pub fn n_params(&self) -> usize {
        self.tensors.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn get(&self, name: &str) -> &Tensor {
        &self.tensors.iter().find(|(n, _)| n == name).expect("unknown parameter").1
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Tensor {
        &mut self.tensors.iter_mut().find(|(n, _)| n == name).expect("unknown parameter").1
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|(_, t)| t.all_finite())
    }
}

/// One recorded forward pass. Losses are pushed onto `tape` by the caller;
/// after `tape.backward`, per-parameter gradients come out of
/// [`ForwardOut::grads`].
pub struct ForwardOut {
    pub tape: Tape,
    /// Parameter vars in `ModelParams::tensors` order.
    pub param_vars: Vec<Var>,
    /// Final-norm hidden states for every token, `total_tokens x d_model`.
    pub hidden: Var,
    /// Gaussian mean at each `policy_pos`, normalized action units.
    pub mu: Var,
    /// Clamped log standard deviation, aligned with `mu`.
    pub log_sigma: Var,
    /// Next-skill logits at each `stm_pos`.
    pub stm_logits: Var,
    /// Attention nodes, one per layer, for probability inspection.
    pub attn: Vec<Var>,
}

impl ForwardOut {
    /// Per-parameter gradients in tensor order; `None` for parameters the
    /// loss never touched. Errors on any non-finite gradient, naming the
    /// parameter.
    pub fn grads(&self, params: &ModelParams) -> Result<Vec<Option<Tensor>>> {
        let mut out = Vec::with_capacity(self.param_vars.len());
        for (v, (name, _)) in self.param_vars.iter().zip(&params.tensors) {
            let g = self.tape.grad(*v).cloned();
            if let Some(t) = &g {
                if !t.all_finite() {
                    return Err(Error::NonFinite(format!("gradient of {name}")));
                }
            }
            out.push(g);
        }
        Ok(out)
    }
}

fn scatter_into(
    tape: &mut Tape,
    acc: Option<Var>,
    src: Var,
    pos: &[usize],
    total: usize,
) -> Option<Var> {
    if pos.is_empty() {
        return acc;
    }
    let s = tape.scatter_add_rows(src, pos, total);
    Some(match acc {
        Some(a) => tape.add(a, s),
        None => s,
    })
}

/// Records the full computation of both heads on `batch`.
pub fn forward(params: &ModelParams, batch: &Batch) -> Result<ForwardOut> {
    let cfg = &params.cfg;
    if batch.seq_len > cfg.max_tokens() {
        return Err(Error::Overlength {
            got: batch.seq_len.div_ceil(TOKENS_PER_STEP),
            max: cfg.horizon,
        });
    }
    let total = batch.total_tokens();
    let mut tape = Tape::new();
    let mut param_vars = Vec::with_capacity(params.tensors.len());
    let mut by_name: HashMap<&str, Var> = HashMap::with_capacity(params.tensors.len());
    for (name, t) in &params.tensors {
        let v = tape.param(t.clone());
        param_vars.push(v);
        by_name.insert(name.as_str(), v);
    }
    let p = |n: &str| *by_name.get(n).expect("parameter name");

    // Token assembly: modality projections, pad rows, then skill and
    // timestep conditioning added onto every real token.
    let mut acc: Option<Var> = None;
    for (feats, pos, wname, bname) in [
        (&batch.rtg, &batch.rtg_pos, "embed.rtg.w", "embed.rtg.b"),
        (&batch.proprio, &batch.proprio_pos, "embed.proprio.w", "embed.proprio.b"),
        (&batch.vision, &batch.vision_pos, "embed.vision.w", "embed.vision.b"),
        (&batch.tactile, &batch.tactile_pos, "embed.tactile.w", "embed.tactile.b"),
        (&batch.state, &batch.state_pos, "embed.state.w", "embed.state.b"),
        (&batch.action_tok, &batch.action_pos, "embed.action.w", "embed.action.b"),
    ] {
        if pos.is_empty() {
            continue;
        }
        let x = tape.constant(feats.clone());
        let h = tape.matmul(x, p(wname));
        let h = tape.add_row_broadcast(h, p(bname));
        acc = scatter_into(&mut tape, acc, h, pos, total);
    }
    if !batch.pad_pos.is_empty() {
        let rows = vec![0usize; batch.pad_pos.len()];
        let pads = tape.gather_rows(p("embed.pad"), &rows);
        acc = scatter_into(&mut tape, acc, pads, &batch.pad_pos, total);
    }
    if !batch.skill_pos.is_empty() {
        let sk = tape.gather_rows(p("embed.skill"), &batch.skill_ids);
        acc = scatter_into(&mut tape, acc, sk, &batch.skill_pos, total);
        let tm = tape.gather_rows(p("embed.time"), &batch.time_ids);
        acc = scatter_into(&mut tape, acc, tm, &batch.time_pos, total);
    }
    let mut x = acc.expect("batch has at least one token");

    let mut attn = Vec::with_capacity(cfg.n_layers);
    for l in 0..cfg.n_layers {
        let n = |s: &str| format!("layer{l}.{s}");
        let ln1 = tape.layer_norm(x, p(&n("ln1.g")), p(&n("ln1.b")));
        let q = tape.matmul(ln1, p(&n("attn.wq")));
        let q = tape.add_row_broadcast(q, p(&n("attn.bq")));
        let k = tape.matmul(ln1, p(&n("attn.wk")));
        let k = tape.add_row_broadcast(k, p(&n("attn.bk")));
        let v = tape.matmul(ln1, p(&n("attn.wv")));
        let v = tape.add_row_broadcast(v, p(&n("attn.bv")));
        let a = tape.causal_attention(q, k, v, cfg.n_heads, batch.seq_len);
        attn.push(a);
        let o = tape.matmul(a, p(&n("attn.wo")));
        let o = tape.add_row_broadcast(o, p(&n("attn.bo")));
        x = tape.add(x, o);
        let ln2 = tape.layer_norm(x, p(&n("ln2.g")), p(&n("ln2.b")));
        let f = tape.matmul(ln2, p(&n("ffn.w1")));
        let f = tape.add_row_broadcast(f, p(&n("ffn.b1")));
        let f = tape.gelu(f);
        let f = tape.matmul(f, p(&n("ffn.w2")));
        let f = tape.add_row_broadcast(f, p(&n("ffn.b2")));
        x = tape.add(x, f);
    }
    let hidden = tape.layer_norm(x, p("final_ln.g"), p("final_ln.b"));

    let pol_h = tape.gather_rows(hidden, &batch.policy_pos);
    let pol = tape.matmul(pol_h, p("head.policy.w"));
    let pol = tape.add_row_broadcast(pol, p("head.policy.b"));
    let mu = tape.slice_cols(pol, 0, F_ACTION);
    let ls_raw = tape.slice_cols(pol, F_ACTION, F_ACTION);
    let log_sigma = tape.clamp(ls_raw, LOG_SIGMA_MIN, LOG_SIGMA_MAX);

    let stm_h = tape.gather_rows(hidden, &batch.stm_pos);
    let stm = tape.matmul(stm_h, p("head.stm.w"));
    let stm_logits = tape.add_row_broadcast(stm, p("head.stm.b"));

    Ok(ForwardOut { tape, param_vars, hidden, mu, log_sigma, stm_logits, attn })
}

/// Mean next-skill cross-entropy over unmasked transition targets.
pub fn loss_stm(out: &mut ForwardOut, batch: &Batch) -> Var {
    out.tape.cross_entropy_rows(out.stm_logits, &batch.stm_target, &batch.stm_mask)
}

/// Mean Gaussian action NLL with entropy regularizer weight `lambda`.
pub fn loss_tepo(out: &mut ForwardOut, batch: &Batch, lambda: f64) -> Var {
    let mask = vec![true; batch.action_target.rows];
    out.tape.gaussian_nll_entropy(
        out.mu,
        out.log_sigma,
        batch.action_target.clone(),
        &mask,
        lambda,
    )
}

/// Softmax of the transition logits: one probability row per `stm_pos`.
pub fn stm_distribution(out: &mut ForwardOut) -> Tensor {
    let probs = out.tape.softmax_rows(out.stm_logits);
    out.tape.value(probs).clone()
}

/// Fraction of unmasked transition targets the argmax gets right.
/// `None` when every row is masked.
pub fn stm_accuracy(out: &ForwardOut, batch: &Batch) -> Option<f64> {
    let logits = out.tape.value(out.stm_logits);
    let mut hits = 0usize;
    let mut n = 0usize;
    for r in 0..logits.rows {
        if !batch.stm_mask[r] {
            continue;
        }
        let row = logits.row(r);
        let mut best = 0usize;
        for c in 1..row.len() {
            if row[c] > row[best] {
                best = c;
            }
        }
        if best == batch.stm_target[r] {
            hits += 1;
        }
        n += 1;
    }
    (n > 0).then(|| hits as f64 / n as f64)
}

/// Mean squared error of the Gaussian mean against the normalized action
/// targets. `None` when the batch has no targets.
pub fn action_mse(out: &ForwardOut, batch: &Batch) -> Option<f64> {
    let mu = out.tape.value(out.mu);
    if mu.rows == 0 {
        return None;
    }
    let t = &batch.action_target;
    debug_assert_eq!((mu.rows, mu.cols), (t.rows, t.cols));
    let se: f64 = mu.data.iter().zip(&t.data).map(|(a, b)| (a - b) * (a - b)).sum();
    Some(se / mu.data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::env::config::TaskConfig;
    use crate::heuristic::{collect_with, CollectOptions, HeuristicConfig};
    use crate::model::featurize::{BatchOptions, Featurizer, Normalizer};
    use rand::SeedableRng;

    fn tiny_cfg() -> ModelConfig {
        ModelConfig { d_model: 8, n_layers: 1, n_heads: 2, d_ff: 16, horizon: 3 }
    }

    fn dataset() -> Dataset {
        let task = TaskConfig::square_table();
        let opts = CollectOptions {
            num_trajectories: 2,
            seed: 11,
            full_task_fraction: 1.0,
            randomize_speed: false,
        };
        collect_with(&task, &HeuristicConfig::default(), &opts).unwrap()
    }

    fn batch(ds: &Dataset, h: usize) -> super::super::featurize::Batch {
        let f = Featurizer::new(Normalizer::fit(ds), h);
        f.training_batch(ds, &[(0, 4), (1, 9)], &BatchOptions::default())
    }

    #[test]
    fn gradcheck_config_stays_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = ModelParams::init(ModelConfig::gradcheck(), &mut rng).unwrap();
        assert!(p.n_params() <= 10_000, "gradcheck model has {} params", p.n_params());
    }

    #[test]
    fn forward_is_deterministic() {
        let ds = dataset();
        let b = batch(&ds, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = ModelParams::init(tiny_cfg(), &mut rng).unwrap();
        let o1 = forward(&params, &b).unwrap();
        let o2 = forward(&params, &b).unwrap();
        assert_eq!(o1.tape.value(o1.mu), o2.tape.value(o2.mu));
        assert_eq!(o1.tape.value(o1.stm_logits), o2.tape.value(o2.stm_logits));
    }

    #[test]
    fn overlength_batch_is_rejected() {
        let ds = dataset();
        let b = batch(&ds, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = ModelParams::init(tiny_cfg(), &mut rng).unwrap();
        assert!(matches!(forward(&params, &b), Err(Error::Overlength { .. })));
    }

    #[test]
    fn zero_layer_model_is_embeddings_plus_norm() {
        let ds = dataset();
        let b = batch(&ds, 3);
        let cfg = ModelConfig { n_layers: 0, ..tiny_cfg() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = ModelParams::init(cfg, &mut rng).unwrap();
        let out = forward(&params, &b).unwrap();
        assert!(out.attn.is_empty());
        assert_eq!(out.tape.value(out.hidden).rows, b.total_tokens());
        assert_eq!(out.tape.value(out.mu).rows, b.policy_pos.len());
    }

    #[test]
    fn skill_conditioning_changes_the_outputs() {
        let ds = dataset();
        let f = Featurizer::new(Normalizer::fit(&ds), 3);
        let plain = f.training_batch(&ds, &[(0, 4)], &BatchOptions::default());
        let flat = f.training_batch(
            &ds,
            &[(0, 4)],
            &BatchOptions { flat_skill: true, tactile_ablated: false },
        );
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let params = ModelParams::init(tiny_cfg(), &mut rng).unwrap();
        let a = forward(&params, &plain).unwrap();
        let b = forward(&params, &flat).unwrap();
        assert_ne!(a.tape.value(a.mu), b.tape.value(b.mu));
    }

    #[test]
    fn zeroed_stm_head_predicts_uniform() {
        let ds = dataset();
        let b = batch(&ds, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut params = ModelParams::init(tiny_cfg(), &mut rng).unwrap();
        params.get_mut("head.stm.w").fill(0.0);
        params.get_mut("head.stm.b").fill(0.0);
        let mut out = forward(&params, &b).unwrap();
        let dist = stm_distribution(&mut out);
        for r in 0..dist.rows {
            for c in 0..dist.cols {
                assert!((dist.at(r, c) - 1.0 / STM_CLASSES as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn untouched_parameters_get_no_gradient() {
        let ds = dataset();
        let b = batch(&ds, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let params = ModelParams::init(tiny_cfg(), &mut rng).unwrap();
        let mut out = forward(&params, &b).unwrap();
        let loss = loss_stm(&mut out, &b);
        out.tape.backward(loss);
        let grads = out.grads(&params).unwrap();
        for (g, (name, _)) in grads.iter().zip(&params.tensors) {
            if name.starts_with("head.policy") {
                assert!(g.is_none(), "{name} got a gradient from the transition loss");
            }
            if name == "head.stm.w" {
                assert!(g.is_some());
            }
        }
    }

    #[test]
    fn gradient_of_summed_losses_is_the_sum() {
        let ds = dataset();
        let b = batch(&ds, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let params = ModelParams::init(tiny_cfg(), &mut rng).unwrap();

        let grads_of = |which: u8| -> Vec<Option<Tensor>> {
            let mut out = forward(&params, &b).unwrap();
            let root = match which {
                0 => loss_stm(&mut out, &b),
                1 => loss_tepo(&mut out, &b, 0.5),
                _ => {
                    let a = loss_stm(&mut out, &b);
                    let c = loss_tepo(&mut out, &b, 0.5);
                    out.tape.add(a, c)
                }
            };
            out.tape.backward(root);
            out.grads(&params).unwrap()
        };
        let gs = grads_of(0);
        let gt = grads_of(1);
        let gsum = grads_of(2);
        for ((a, b2), s) in gs.iter().zip(&gt).zip(&gsum) {
            let total = |x: &Option<Tensor>, i: usize| x.as_ref().map_or(0.0, |t| t.data[i]);
            if let Some(st) = s {
                for i in 0..st.data.len() {
                    let want = total(a, i) + total(b2, i);
                    assert!((st.data[i] - want).abs() < 1e-12);
                }
            } else {
                assert!(a.is_none() && b2.is_none());
            }
        }
    }

    #[test]
    fn attention_rows_sum_to_one_on_a_real_batch() {
        let ds = dataset();
        let b = batch(&ds, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let params = ModelParams::init(tiny_cfg(), &mut rng).unwrap();
        let out = forward(&params, &b).unwrap();
        for &a in &out.attn {
            for p in out.tape.attention_probs(a) {
                for i in 0..p.rows {
                    let s: f64 = p.row(i)[..=i].iter().sum();
                    assert!((s - 1.0).abs() <= 1e-9);
                }
            }
        }
    }
}
