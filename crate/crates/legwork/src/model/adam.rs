//! Adam with bias correction. State is kept per parameter tensor; a
//! parameter absent from a step's gradients (its loss never touched it)
//! keeps its moments and timestep untouched, so the two losses can
//! alternate updates without corrupting each other's statistics.

use crate::{Error, Result};

use super::net::ModelParams;
use super::tensor::Tensor;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-8;

pub struct Adam {
    pub eta: f64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: Vec<u64>,
}

impl Adam {
    pub fn new(params: &ModelParams, eta: f64) -> Adam {
        let m = params.tensors.iter().map(|(_, t)| Tensor::zeros(t.rows, t.cols)).collect();
        let v = params.tensors.iter().map(|(_, t)| Tensor::zeros(t.rows, t.cols)).collect();
        Adam { eta, m, v, t: vec![0; params.tensors.len()] }
    }

    /// Applies one update. `grads` aligns with `params.tensors`; `None`
    /// entries are skipped entirely. Errors if an update would write a
    /// non-finite value, naming the parameter.
    pub fn step(&mut self, params: &mut ModelParams, grads: &[Option<Tensor>]) -> Result<()> {
        assert_eq!(grads.len(), params.tensors.len(), "gradient/parameter count mismatch");
        for (i, g) in grads.iter().enumerate() {
            let Some(g) = g else { continue };
            let (name, p) = &mut params.tensors[i];
            assert_eq!((g.rows, g.cols), (p.rows, p.cols), "gradient shape mismatch on {name}");
            self.t[i] += 1;
            let bc1 = 1.0 - BETA1.powi(self.t[i] as i32);
            let bc2 = 1.0 - BETA2.powi(self.t[i] as i32);
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            for ((pv, gv), (mv, vv)) in
                p.data.iter_mut().zip(&g.data).zip(m.data.iter_mut().zip(&mut v.data))
            {
                *mv = BETA1 * *mv + (1.0 - BETA1) * gv;
                *vv = BETA2 * *vv + (1.0 - BETA2) * gv * gv;
                let mhat = *mv / bc1;
                let vhat = *vv / bc2;
                *pv -= self.eta * mhat / (vhat.sqrt() + EPS);
            }
            if !p.all_finite() {
                return Err(Error::NonFinite(format!("parameter {name} after Adam step")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::net::ModelConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(seed: u64) -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = ModelConfig { d_model: 8, n_layers: 1, n_heads: 2, d_ff: 16, horizon: 2 };
        ModelParams::init(cfg, &mut rng).unwrap()
    }

    #[test]
    fn zero_gradients_leave_params_bit_identical() {
        let mut p = params(1);
        let before = p.clone();
        let mut opt = Adam::new(&p, 1e-3);
        let zeros: Vec<Option<Tensor>> =
            p.tensors.iter().map(|(_, t)| Some(Tensor::zeros(t.rows, t.cols))).collect();
        opt.step(&mut p, &zeros).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn absent_gradients_are_skipped() {
        let mut p = params(2);
        let before = p.clone();
        let mut opt = Adam::new(&p, 1e-2);
        let mut grads: Vec<Option<Tensor>> = vec![None; p.tensors.len()];
        let (r, c) = (p.tensors[0].1.rows, p.tensors[0].1.cols);
        grads[0] = Some(Tensor::from_vec(r, c, vec![1.0; r * c]));
        opt.step(&mut p, &grads).unwrap();
        assert_ne!(p.tensors[0].1, before.tensors[0].1);
        assert_eq!(&p.tensors[1..], &before.tensors[1..]);
    }

    #[test]
    fn single_step_descends_a_quadratic() {
        // f(w) = w^2 from w = 1: any reasonable first step shrinks |w|.
        let mut p = params(3);
        p.tensors[0].1 = Tensor::from_vec(1, 1, vec![1.0]);
        p.tensors[0].0 = "w".to_string();
        let mut opt = Adam::new(&p, 0.1);
        let mut grads: Vec<Option<Tensor>> = vec![None; p.tensors.len()];
        grads[0] = Some(Tensor::from_vec(1, 1, vec![2.0]));
        opt.step(&mut p, &grads).unwrap();
        let w = p.tensors[0].1.data[0];
        assert!(w.abs() < 1.0 && w > 0.0);
    }

    #[test]
    fn updates_are_deterministic() {
        let run = || {
            let mut p = params(4);
            let mut opt = Adam::new(&p, 3e-3);
            for k in 0..5 {
                let grads: Vec<Option<Tensor>> = p
                    .tensors
                    .iter()
                    .map(|(_, t)| {
                        let mut rng = ChaCha8Rng::seed_from_u64(100 + k);
                        Some(Tensor::randn(t.rows, t.cols, 1.0, &mut rng))
                    })
                    .collect();
                opt.step(&mut p, &grads).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_update_is_reported_with_the_parameter_name() {
        let mut p = params(5);
        let mut opt = Adam::new(&p, 1e-3);
        let mut grads: Vec<Option<Tensor>> = vec![None; p.tensors.len()];
        let (r, c) = (p.tensors[2].1.rows, p.tensors[2].1.cols);
        grads[2] = Some(Tensor::from_vec(r, c, vec![f64::NAN; r * c]));
        let err = opt.step(&mut p, &grads).unwrap_err();
        assert!(err.to_string().contains(&p.tensors[2].0));
    }
}
