use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_update, OptimizerState};
use super::beam::DecodeOptions;
use super::network::{loss_and_gradients, TeacherPath};
use super::params::ModelParams;
use super::Reinflector;
use crate::corpus::{accuracy, avg_levenshtein, extract_alphabet, InflectionSample};
use crate::error::{Error, Result};

/// One teacher-forced forward/backward pass followed by one Adam step.
pub fn train_sample(params: &mut ModelParams, opt: &mut OptimizerState, path: &TeacherPath) -> Result<f64> {
    let (loss, grads) = loss_and_gradients(params, path)?;
    adam_update(params, &grads, opt)?;
    Ok(loss)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub max_epochs: usize,
    /// Epochs without dev improvement before stopping.
    pub patience: usize,
    /// Stop as soon as dev accuracy reaches this value.
    pub target_accuracy: Option<f64>,
    pub decode: DecodeOptions,
    pub shuffle_seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            max_epochs: 60,
            patience: 10,
            target_accuracy: None,
            decode: DecodeOptions::default(),
            shuffle_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_accuracy: Option<f64>,
    pub dev_levenshtein: Option<f64>,
}

pub fn evaluate(model: &Reinflector, dev: &[InflectionSample], opts: &DecodeOptions) -> Result<(f64, f64)> {
    let mut predictions = Vec::with_capacity(dev.len());
    let mut golds = Vec::with_capacity(dev.len());
    for s in dev {
        let gold = s
            .target
            .clone()
            .ok_or_else(|| Error::InvalidArgument(format!("dev sample {:?} has no target", s.lemma)))?;
        predictions.push(model.predict(&s.lemma, &s.features, opts)?.output);
        golds.push(gold);
    }
    Ok((accuracy(&predictions, &golds)?, avg_levenshtein(&predictions, &golds)?))
}

/// Epoch loop with per-sample updates in a seeded shuffled order. With a
/// dev set, the parameters of the best dev epoch are kept and training stops
/// after `patience` epochs without improvement.
pub fn fit(
    model: &mut Reinflector,
    train: &[InflectionSample],
    dev: &[InflectionSample],
    opts: &TrainOptions,
) -> Result<Vec<EpochReport>> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("no training samples".into()));
    }
    let alphabet = extract_alphabet(train);
    let paths = train
        .iter()
        .map(|s| {
            let gold = model.oracle(s, &alphabet)?;
            model.teacher_path(s, &gold)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut opt = OptimizerState::new(&model.params);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.shuffle_seed);
    let mut order: Vec<usize> = (0..paths.len()).collect();
    let mut best: Option<(f64, ModelParams)> = None;
    let mut since_best = 0;
    let mut reports = Vec::new();

    for epoch in 1..=opts.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            total += train_sample(&mut model.params, &mut opt, &paths[i])?;
        }
        let mut report = EpochReport {
            epoch,
            train_loss: total / paths.len() as f64,
            dev_accuracy: None,
            dev_levenshtein: None,
        };
        if dev.is_empty() {
            reports.push(report);
            continue;
        }
        let (acc, lev) = evaluate(model, dev, &opts.decode)?;
        report.dev_accuracy = Some(acc);
        report.dev_levenshtein = Some(lev);
        log::info!("epoch {epoch}: loss {:.4}, dev accuracy {acc:.4}, dev levenshtein {lev:.4}", report.train_loss);
        reports.push(report);

        if best.as_ref().is_none_or(|(b, _)| acc > *b) {
            best = Some((acc, model.params.clone()));
            since_best = 0;
        } else {
            since_best += 1;
        }
        if opts.target_accuracy.is_some_and(|t| acc >= t) || since_best >= opts.patience {
            break;
        }
    }
    if let Some((_, params)) = best {
        model.params = params;
    }
    Ok(reports)
}
