//! Model checkpoint: architecture, input-shaping flags, normalization
//! statistics, the initial return-to-go for rollouts, and every parameter
//! tensor, in one CRC-guarded container. Serialization is byte-exact under
//! round-trips, which is what makes retraining-free reproducibility checks
//! possible.

use std::path::Path;

use crate::data::codec::{Dec, Enc};
use crate::data::container::{
    from_container_bytes, read_container, to_container_bytes, write_container, MODEL_MAGIC,
};
use crate::Result;

use super::featurize::{BatchOptions, Normalizer, Stats};
use super::net::{ModelConfig, ModelParams};
use super::tensor::Tensor;

/// Checkpoint format version.
pub const MODEL_VERSION: u32 = 1;

const MAX_DIM: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub normalizer: Normalizer,
    /// Input-shaping the model was trained with; rollouts must match.
    pub options: BatchOptions,
    /// Mean labeled return of successful training episodes; the conditioning
    /// target rollouts start from.
    pub rtg_init: f64,
}

fn enc_stats(e: &mut Enc, s: &Stats) {
    e.f64s(&s.mean);
    e.f64s(&s.std);
}

fn dec_stats(d: &mut Dec) -> Result<Stats> {
    let mean = d.f64s(MAX_DIM)?;
    let std = d.f64s(MAX_DIM)?;
    if mean.len() != std.len() {
        return Err(d.bad("normalizer mean/std length mismatch"));
    }
    Ok(Stats { mean, std })
}

impl Checkpoint {
    fn to_payload(&self) -> Vec<u8> {
        let mut e = Enc::new();
        let cfg = &self.params.cfg;
        e.u64(cfg.d_model as u64);
        e.u64(cfg.n_layers as u64);
        e.u64(cfg.n_heads as u64);
        e.u64(cfg.d_ff as u64);
        e.u64(cfg.horizon as u64);
        e.bool(self.options.tactile_ablated);
        e.bool(self.options.flat_skill);
        e.f64(self.rtg_init);
        for s in [
            &self.normalizer.rtg,
            &self.normalizer.proprio,
            &self.normalizer.vision,
            &self.normalizer.tactile,
            &self.normalizer.state,
            &self.normalizer.action,
        ] {
            enc_stats(&mut e, s);
        }
        e.u64(self.params.tensors.len() as u64);
        for (name, t) in &self.params.tensors {
            e.str(name);
            e.u64(t.rows as u64);
            e.u64(t.cols as u64);
            e.f64s(&t.data);
        }
        e.into_bytes()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        to_container_bytes(MODEL_MAGIC, MODEL_VERSION, &self.to_payload())
    }

    pub fn from_bytes(bytes: &[u8], path: &str) -> Result<Checkpoint> {
        let (_, payload) = from_container_bytes(MODEL_MAGIC, MODEL_VERSION, bytes, path)?;
        Checkpoint::from_payload(payload, path)
    }

    fn from_payload(payload: &[u8], path: &str) -> Result<Checkpoint> {
        let mut d = Dec::new(payload, path);
        let cfg = ModelConfig {
            d_model: d.len(MAX_DIM)?,
            n_layers: d.len(MAX_DIM)?,
            n_heads: d.len(MAX_DIM)?,
            d_ff: d.len(MAX_DIM)?,
            horizon: d.len(MAX_DIM)?,
        };
        cfg.validate()?;
        let options =
            BatchOptions { tactile_ablated: d.bool()?, flat_skill: d.bool()? };
        let rtg_init = d.f64()?;
        let rtg = dec_stats(&mut d)?;
        let proprio = dec_stats(&mut d)?;
        let vision = dec_stats(&mut d)?;
        let tactile = dec_stats(&mut d)?;
        let state = dec_stats(&mut d)?;
        let action = dec_stats(&mut d)?;
        let n = d.len(1 << 16)?;
        let mut tensors = Vec::with_capacity(n);
        for _ in 0..n {
            let name = d.str(1 << 10)?;
            let rows = d.len(MAX_DIM)?;
            let cols = d.len(MAX_DIM)?;
            let data = d.f64s(MAX_DIM)?;
            if data.len() != rows * cols {
                return Err(d.bad(&format!(
                    "tensor {name}: {rows}x{cols} header but {} values",
                    data.len()
                )));
            }
            tensors.push((name, Tensor::from_vec(rows, cols, data)));
        }
        d.finish()?;
        Ok(Checkpoint {
            params: ModelParams { cfg, tensors },
            normalizer: Normalizer { rtg, proprio, vision, tactile, state, action },
            options,
            rtg_init,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_container(path, MODEL_MAGIC, MODEL_VERSION, &self.to_payload())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let payload = read_container(path, MODEL_MAGIC, MODEL_VERSION)?;
        Checkpoint::from_payload(&payload, &path.to_string_lossy())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn checkpoint() -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = ModelConfig { d_model: 8, n_layers: 1, n_heads: 2, d_ff: 16, horizon: 2 };
        Checkpoint {
            params: ModelParams::init(cfg, &mut rng).unwrap(),
            normalizer: Normalizer::identity(),
            options: BatchOptions { tactile_ablated: true, flat_skill: false },
            rtg_init: 4.25,
        }
    }

    #[test]
    fn round_trips_byte_exactly() {
        let ck = checkpoint();
        let bytes = ck.to_bytes();
        let back = Checkpoint::from_bytes(&bytes, "mem").unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let ck = checkpoint();
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
    }

    #[test]
    fn corruption_is_detected() {
        let ck = checkpoint();
        let mut bytes = ck.to_bytes();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xFF;
        assert!(Checkpoint::from_bytes(&bytes, "mem").is_err());
    }
}
