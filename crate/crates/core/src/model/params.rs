use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub hidden_size: usize,
    pub embed_size: usize,
    pub action_vocab_size: usize,
    pub char_vocab_size: usize,
    pub feature_dim: usize,
    pub use_patches: bool,
    pub seed: u64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("hidden_size", self.hidden_size),
            ("embed_size", self.embed_size),
            ("action_vocab_size", self.action_vocab_size),
            ("char_vocab_size", self.char_vocab_size),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    /// Decoder GRU input: previous-action embedding, attended encoder
    /// output, feature vector.
    pub fn decoder_input_size(&self) -> usize {
        self.embed_size + self.hidden_size + self.feature_dim
    }
}

/// One GRU cell: `w_*` act on the input, `u_*` on the hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub w_z: Tensor,
    pub w_r: Tensor,
    pub w_h: Tensor,
    pub u_z: Tensor,
    pub u_r: Tensor,
    pub u_h: Tensor,
    pub b_z: Tensor,
    pub b_r: Tensor,
    pub b_h: Tensor,
}

impl GruParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = || Tensor::zeros(&[hidden, input]);
        let u = || Tensor::zeros(&[hidden, hidden]);
        let b = || Tensor::zeros(&[hidden]);
        GruParams {
            w_z: w(),
            w_r: w(),
            w_h: w(),
            u_z: u(),
            u_r: u(),
            u_h: u(),
            b_z: b(),
            b_r: b(),
            b_h: b(),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.b_z.len()
    }

    pub fn input_size(&self) -> usize {
        self.w_z.cols()
    }

    fn tensors(&self) -> [(&'static str, &Tensor); 9] {
        [
            ("w_z", &self.w_z),
            ("w_r", &self.w_r),
            ("w_h", &self.w_h),
            ("u_z", &self.u_z),
            ("u_r", &self.u_r),
            ("u_h", &self.u_h),
            ("b_z", &self.b_z),
            ("b_r", &self.b_r),
            ("b_h", &self.b_h),
        ]
    }

    fn tensors_mut(&mut self) -> [(&'static str, &mut Tensor); 9] {
        [
            ("w_z", &mut self.w_z),
            ("w_r", &mut self.w_r),
            ("w_h", &mut self.w_h),
            ("u_z", &mut self.u_z),
            ("u_r", &mut self.u_r),
            ("u_h", &mut self.u_h),
            ("b_z", &mut self.b_z),
            ("b_r", &mut self.b_r),
            ("b_h", &mut self.b_h),
        ]
    }
}

/// All trainable tensors. `action_embeddings` has one extra final row for
/// the begin-of-sequence action fed at the first decoder step.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub char_embeddings: Tensor,
    pub action_embeddings: Tensor,
    pub encoder_fwd: GruParams,
    pub encoder_bwd: GruParams,
    pub decoder: GruParams,
    pub output_proj: Tensor,
    pub output_bias: Tensor,
}

impl ModelParams {
    pub fn zeros(config: &ModelConfig) -> Self {
        let (h, e) = (config.hidden_size, config.embed_size);
        ModelParams {
            char_embeddings: Tensor::zeros(&[config.char_vocab_size, e]),
            action_embeddings: Tensor::zeros(&[config.action_vocab_size + 1, e]),
            encoder_fwd: GruParams::zeros(e, h),
            encoder_bwd: GruParams::zeros(e, h),
            decoder: GruParams::zeros(config.decoder_input_size(), h),
            output_proj: Tensor::zeros(&[config.action_vocab_size, h]),
            output_bias: Tensor::zeros(&[config.action_vocab_size]),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.for_each_mut(|_, t| t.fill(0.0));
        z
    }

    pub fn hidden_size(&self) -> usize {
        self.output_proj.cols()
    }

    pub fn bos_index(&self) -> usize {
        self.action_embeddings.rows() - 1
    }

    /// Every tensor with a stable dotted name, in a fixed order.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![
            ("char_embeddings".to_string(), &self.char_embeddings),
            ("action_embeddings".to_string(), &self.action_embeddings),
        ];
        for (prefix, gru) in [
            ("encoder_fwd", &self.encoder_fwd),
            ("encoder_bwd", &self.encoder_bwd),
            ("decoder", &self.decoder),
        ] {
            out.extend(gru.tensors().into_iter().map(|(n, t)| (format!("{prefix}.{n}"), t)));
        }
        out.push(("output_proj".to_string(), &self.output_proj));
        out.push(("output_bias".to_string(), &self.output_bias));
        out
    }

    pub fn for_each_mut(&mut self, mut f: impl FnMut(&str, &mut Tensor)) {
        f("char_embeddings", &mut self.char_embeddings);
        f("action_embeddings", &mut self.action_embeddings);
        for (prefix, gru) in [
            ("encoder_fwd", &mut self.encoder_fwd),
            ("encoder_bwd", &mut self.encoder_bwd),
            ("decoder", &mut self.decoder),
        ] {
            for (n, t) in gru.tensors_mut() {
                f(&format!("{prefix}.{n}"), t);
            }
        }
        f("output_proj", &mut self.output_proj);
        f("output_bias", &mut self.output_bias);
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = vec![&mut self.char_embeddings, &mut self.action_embeddings];
        for gru in [&mut self.encoder_fwd, &mut self.encoder_bwd, &mut self.decoder] {
            out.extend(gru.tensors_mut().into_iter().map(|(_, t)| t));
        }
        out.push(&mut self.output_proj);
        out.push(&mut self.output_bias);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.named_tensors().iter().all(|(_, t)| t.is_finite())
    }

    pub fn param_count(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }
}

/// GRU and linear parameters ~ U(−√(1/s), √(1/s)) with `s` the hidden size
/// (GRU) or fan-in (linear); embeddings ~ N(0, 1).
pub fn init_params<R: Rng>(config: &ModelConfig, rng: &mut R) -> Result<ModelParams> {
    config.validate()?;
    let mut params = ModelParams::zeros(config);
    let gru_bound = (1.0 / config.hidden_size as f64).sqrt();
    let gru_dist = Uniform::new_inclusive(-gru_bound, gru_bound).expect("finite bound");
    let linear_bound = (1.0 / params.output_proj.cols() as f64).sqrt();
    let linear_dist = Uniform::new_inclusive(-linear_bound, linear_bound).expect("finite bound");

    for t in [&mut params.char_embeddings, &mut params.action_embeddings] {
        t.values_mut()
            .iter_mut()
            .for_each(|v| *v = StandardNormal.sample(rng));
    }
    for gru in [&mut params.encoder_fwd, &mut params.encoder_bwd, &mut params.decoder] {
        for (_, t) in gru.tensors_mut() {
            t.values_mut().iter_mut().for_each(|v| *v = gru_dist.sample(rng));
        }
    }
    for t in [&mut params.output_proj, &mut params.output_bias] {
        t.values_mut().iter_mut().for_each(|v| *v = linear_dist.sample(rng));
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn config() -> ModelConfig {
        ModelConfig {
            hidden_size: 16,
            embed_size: 8,
            action_vocab_size: 10,
            char_vocab_size: 1250,
            feature_dim: 5,
            use_patches: false,
            seed: 3,
        }
    }

    #[test]
    fn uniform_bounds_and_determinism() {
        let cfg = config();
        let p = init_params(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let bound = (1.0 / 16.0f64).sqrt();
        for gru in [&p.encoder_fwd, &p.encoder_bwd, &p.decoder] {
            for (_, t) in gru.tensors() {
                assert!(t.values().iter().all(|v| v.abs() <= bound));
            }
        }
        assert!(p.output_proj.values().iter().all(|v| v.abs() <= bound));
        let q = init_params(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(p, q);
        assert_eq!(p.decoder.input_size(), 8 + 16 + 5);
        assert_eq!(p.action_embeddings.rows(), 11);
    }

    #[test]
    fn embeddings_are_standard_normal() {
        let p = init_params(&config(), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let v = p.char_embeddings.values();
        assert!(v.len() >= 10_000);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
        assert!(mean.abs() < 0.1, "mean {mean}");
        assert!((var - 1.0).abs() < 0.1, "var {var}");
    }

    #[test]
    fn zero_sizes_rejected() {
        let mut cfg = config();
        cfg.hidden_size = 0;
        assert!(init_params(&cfg, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
