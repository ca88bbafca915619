//! From-scratch GRU encoder-decoder predicting transducer actions.

mod adam;
mod beam;
mod checkpoint;
mod gru;
mod network;
mod params;
mod tensor;
mod train;
mod vocab;

pub use adam::{adam_update, OptimizerState};
pub use beam::{beam_decode, greedy_decode, BeamHypothesis, DecodeInput, DecodeOptions, Decoded};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use gru::gru_cell;
pub use network::{decode_step, encode, gold_pointers, loss_and_gradients, path_loss, sequence_loss, TeacherPath};
pub use params::{init_params, GruParams, ModelConfig, ModelParams};
pub use tensor::{log_softmax, sigmoid, Tensor};
pub use train::{evaluate, fit, train_sample, EpochReport, TrainOptions};
pub use vocab::CharVocab;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::actions::{derive_oracle, Action, ActionVocab};
use crate::alignment::align;
use crate::corpus::{Alphabet, FeatureVocab, InflectionSample};
use crate::error::{Error, Result};
use crate::patches::PatchTable;

/// Everything needed to predict: parameters plus the vocabularies and the
/// patch table the action indices refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct Reinflector {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub chars: CharVocab,
    pub features: FeatureVocab,
    pub actions: ActionVocab,
    pub table: PatchTable,
}

impl Reinflector {
    /// Vocabularies from the training data: encoder symbols from the whole
    /// alphabet, EMIT actions from target symbols only.
    pub fn for_samples(
        samples: &[InflectionSample],
        table: PatchTable,
        hidden_size: usize,
        embed_size: usize,
        seed: u64,
    ) -> Result<Self> {
        let alphabet = crate::corpus::extract_alphabet(samples);
        let chars = CharVocab::from_alphabet(&alphabet);
        let features = crate::corpus::extract_feature_vocab(samples);
        let targets: std::collections::BTreeSet<char> =
            samples.iter().flat_map(|s| s.target.iter().flat_map(|t| t.chars())).collect();
        let actions = ActionVocab::new(table.class_count(), targets);
        let use_patches = !table.is_empty();
        let config = ModelConfig {
            hidden_size,
            embed_size,
            action_vocab_size: actions.len(),
            char_vocab_size: chars.len(),
            feature_dim: features.len(),
            use_patches,
            seed,
        };
        Self::new(config, chars, features, actions, table)
    }

    /// Fresh parameters drawn from `config.seed`.
    pub fn new(
        config: ModelConfig,
        chars: CharVocab,
        features: FeatureVocab,
        actions: ActionVocab,
        table: PatchTable,
    ) -> Result<Self> {
        if config.action_vocab_size != actions.len()
            || config.char_vocab_size != chars.len()
            || config.feature_dim != features.len()
        {
            return Err(Error::Config("model sizes disagree with the vocabularies".into()));
        }
        let params = init_params(&config, &mut ChaCha8Rng::seed_from_u64(config.seed))?;
        Ok(Reinflector {
            config,
            params,
            chars,
            features,
            actions,
            table,
        })
    }

    pub fn decode_input(&self, lemma: &str, features: &[String]) -> DecodeInput {
        let lemma: Vec<char> = lemma.chars().collect();
        let (indices, unknown) = self.chars.encode(&lemma);
        if unknown > 0 {
            log::warn!(
                "{unknown} unseen symbol(s) in {:?} mapped to UNK",
                lemma.iter().collect::<String>()
            );
        }
        DecodeInput {
            lemma,
            indices,
            features: self.features.encode(features),
        }
    }

    pub fn predict(&self, lemma: &str, features: &[String], opts: &DecodeOptions) -> Result<Decoded> {
        let input = self.decode_input(lemma, features);
        beam_decode(&self.params, &input, &self.actions, &self.table, opts)
    }

    /// Gold action sequence for a sample with a target.
    pub fn oracle(&self, sample: &InflectionSample, alphabet: &Alphabet) -> Result<Vec<Action>> {
        let target = sample
            .target
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument(format!("sample {:?} has no target", sample.lemma)))?;
        let aligned = align(&sample.lemma, target, &self.table, alphabet.gap)?;
        Ok(derive_oracle(&aligned, &self.table))
    }

    pub fn teacher_path(&self, sample: &InflectionSample, gold: &[Action]) -> Result<TeacherPath> {
        let lemma: Vec<char> = sample.lemma.chars().collect();
        let actions = gold
            .iter()
            .map(|a| {
                self.actions
                    .index(a)
                    .ok_or_else(|| Error::InvalidArgument(format!("action {a} is not in the vocabulary")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TeacherPath {
            chars: self.chars.encode(&lemma).0,
            features: self.features.encode(&sample.features),
            actions,
            pointers: gold_pointers(&lemma, gold, &self.table)?,
        })
    }
}
