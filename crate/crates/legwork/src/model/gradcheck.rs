//! Finite-difference oracle for the reverse-mode gradients. Runs a tiny
//! model (well under 1e4 parameters) on a real collected batch and compares
//! every parameter's analytic gradient against central differences, for both
//! losses. This is the load-bearing numerical check: everything downstream
//! trusts these gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::config::TaskConfig;
use crate::heuristic::{collect_with, CollectOptions, HeuristicConfig};
use crate::Result;

use super::featurize::{Batch, BatchOptions, Featurizer, Normalizer};
use super::net::{forward, loss_stm, loss_tepo, ModelConfig, ModelParams};

/// Relative error uses `max(|analytic|, |numeric|, REL_FLOOR)` as the
/// denominator so near-zero gradients are judged on absolute error.
pub const REL_FLOOR: f64 = 1e-5;

/// Entropy weight used for the policy-loss check; nonzero so the entropy
/// term's gradient is exercised.
const CHECK_LAMBDA: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct LossCheck {
    pub loss: &'static str,
    pub max_rel_err: f64,
    pub worst_param: String,
    pub n_elements: usize,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub n_params: usize,
    pub checks: Vec<LossCheck>,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.checks.iter().map(|c| c.max_rel_err).fold(0.0, f64::max)
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.max_rel_err() < tol
    }
}

fn loss_value(params: &ModelParams, batch: &Batch, which: usize) -> Result<f64> {
    let mut out = forward(params, batch)?;
    let root = match which {
        0 => loss_stm(&mut out, batch),
        _ => loss_tepo(&mut out, batch, CHECK_LAMBDA),
    };
    Ok(out.tape.scalar_value(root))
}

/// Checks both losses' gradients on a `ModelConfig::gradcheck()`-sized model
/// against central differences with step `eps`.
pub fn grad_check(seed: u64, eps: f64) -> Result<GradCheckReport> {
    let task = TaskConfig::square_table();
    let opts = CollectOptions {
        num_trajectories: 2,
        seed,
        full_task_fraction: 1.0,
        randomize_speed: false,
    };
    let ds = collect_with(&task, &HeuristicConfig::default(), &opts)?;

    let cfg = ModelConfig::gradcheck();
    let feat = Featurizer::new(Normalizer::fit(&ds), cfg.horizon);
    // Two windows: one with pads and an episode-final boundary, one interior.
    let last = ds.trajectories[0].len() - 1;
    let samples = [(0usize, 1usize), (0, last), (1, 7)];
    let batch = feat.training_batch(&ds, &samples, &BatchOptions::default());

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let mut params = ModelParams::init(cfg, &mut rng)?;
    let n_params = params.n_params();

    let mut checks = Vec::new();
    for (which, name) in [(0usize, "stm"), (1, "tepo")] {
        let mut out = forward(&params, &batch)?;
        let root = match which {
            0 => loss_stm(&mut out, &batch),
            _ => loss_tepo(&mut out, &batch, CHECK_LAMBDA),
        };
        out.tape.backward(root);
        let analytic = out.grads(&params)?;

        let mut max_rel = 0.0f64;
        let mut worst = String::new();
        let mut n_elements = 0usize;
        for ti in 0..params.tensors.len() {
            let pname = params.tensors[ti].0.clone();
            for idx in 0..params.tensors[ti].1.len() {
                let orig = params.tensors[ti].1.data[idx];
                params.tensors[ti].1.data[idx] = orig + eps;
                let plus = loss_value(&params, &batch, which)?;
                params.tensors[ti].1.data[idx] = orig - eps;
                let minus = loss_value(&params, &batch, which)?;
                params.tensors[ti].1.data[idx] = orig;
                let numeric = (plus - minus) / (2.0 * eps);
                let ana = analytic[ti].as_ref().map_or(0.0, |t| t.data[idx]);
                let denom = ana.abs().max(numeric.abs()).max(REL_FLOOR);
                let rel = (numeric - ana).abs() / denom;
                if rel > max_rel {
                    max_rel = rel;
                    worst = format!("{pname}[{idx}]");
                }
                n_elements += 1;
            }
        }
        checks.push(LossCheck { loss: name, max_rel_err: max_rel, worst_param: worst, n_elements });
    }
    Ok(GradCheckReport { n_params, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_losses_match_central_differences() {
        let report = grad_check(17, 1e-5).unwrap();
        assert!(report.n_params <= 10_000, "oracle model has {} params", report.n_params);
        assert_eq!(report.checks.len(), 2);
        for c in &report.checks {
            assert!(
                c.max_rel_err < 1e-4,
                "{} loss: max rel err {} at {}",
                c.loss,
                c.max_rel_err,
                c.worst_param
            );
        }
    }
}
