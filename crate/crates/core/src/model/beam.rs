use std::cmp::Ordering;

use super::network::{decode_step, encode};
use super::params::ModelParams;
use crate::actions::{valid_action_mask, Action, ActionVocab, TransducerState};
use crate::error::{Error, Result};
use crate::patches::PatchTable;

/// Model input for one lemma.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeInput {
    pub lemma: Vec<char>,
    /// Encoder indices, ending with the sentinel.
    pub indices: Vec<usize>,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOptions {
    pub beam_size: usize,
    /// Step cap; `None` uses the transducer default.
    pub cap: Option<usize>,
    pub forbid_empty_eow: bool,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions {
            beam_size: 1,
            cap: None,
            forbid_empty_eow: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamHypothesis {
    pub hidden: Vec<f64>,
    pub last_action: usize,
    pub log_likelihood: f64,
    pub state: TransducerState,
    pub step_loglikes: Vec<f64>,
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub output: String,
    pub log_likelihood: f64,
    pub actions: Vec<Action>,
}

impl From<BeamHypothesis> for Decoded {
    fn from(h: BeamHypothesis) -> Self {
        Decoded {
            output: h.state.output_string(),
            log_likelihood: h.log_likelihood,
            actions: h.actions,
        }
    }
}

fn start(params: &ModelParams, input: &DecodeInput, vocab: &ActionVocab, opts: &DecodeOptions) -> Result<(Vec<Vec<f64>>, BeamHypothesis)> {
    if input.indices.len() != input.lemma.len() + 1 {
        return Err(Error::LengthMismatch {
            what: "encoder indices and lemma plus sentinel",
            left: input.indices.len(),
            right: input.lemma.len() + 1,
        });
    }
    if vocab.len() != params.output_bias.len() {
        return Err(Error::Shape(format!(
            "action vocabulary has {} entries, model predicts {}",
            vocab.len(),
            params.output_bias.len()
        )));
    }
    let (enc, init) = encode(&input.indices, params)?;
    let state = match opts.cap {
        Some(cap) => TransducerState::with_cap(input.lemma.clone(), cap),
        None => TransducerState::new(&input.lemma.iter().collect::<String>()),
    };
    let hyp = BeamHypothesis {
        hidden: init,
        last_action: params.bos_index(),
        log_likelihood: 0.0,
        state,
        step_loglikes: Vec::new(),
        actions: Vec::new(),
    };
    Ok((enc, hyp))
}

fn extend(
    hyp: &BeamHypothesis,
    action_idx: usize,
    lp: f64,
    hidden: &[f64],
    vocab: &ActionVocab,
    table: &PatchTable,
) -> Result<BeamHypothesis> {
    let action = vocab.get(action_idx);
    let mut next = BeamHypothesis {
        hidden: hidden.to_vec(),
        last_action: action_idx,
        log_likelihood: hyp.log_likelihood + lp,
        state: hyp.state.clone(),
        step_loglikes: hyp.step_loglikes.clone(),
        actions: hyp.actions.clone(),
    };
    next.state.step(action, table)?;
    next.step_loglikes.push(lp);
    next.actions.push(action);
    Ok(next)
}

/// Argmax decoding; ties go to the lower action index.
pub fn greedy_decode(
    params: &ModelParams,
    input: &DecodeInput,
    vocab: &ActionVocab,
    table: &PatchTable,
    opts: &DecodeOptions,
) -> Result<Decoded> {
    let (enc, mut hyp) = start(params, input, vocab, opts)?;
    while !hyp.state.is_done() {
        let (lp, h) = decode_step(hyp.last_action, &enc[hyp.state.pointer()], &input.features, &hyp.hidden, params)?;
        let mask = valid_action_mask(&hyp.state, vocab, table, opts.forbid_empty_eow);
        let mut best: Option<usize> = None;
        for (i, &ok) in mask.iter().enumerate() {
            if ok && best.is_none_or(|b| lp[i] > lp[b]) {
                best = Some(i);
            }
        }
        let a = best.ok_or_else(|| Error::InvalidArgument("no admissible action".into()))?;
        hyp = extend(&hyp, a, lp[a], &h, vocab, table)?;
    }
    Ok(hyp.into())
}

/// Beam search over action sequences. Each round expands every live
/// hypothesis by all admissible actions and keeps the best `beam_size`
/// candidates; candidates ending in EOW or hitting the step cap are moved to
/// the finished set. Search stops once no live hypothesis can still beat the
/// best finished one. Scores are summed log-probabilities, unnormalized.
pub fn beam_decode(
    params: &ModelParams,
    input: &DecodeInput,
    vocab: &ActionVocab,
    table: &PatchTable,
    opts: &DecodeOptions,
) -> Result<Decoded> {
    if opts.beam_size == 0 {
        return Err(Error::InvalidArgument("beam size must be at least 1".into()));
    }
    let (enc, root) = start(params, input, vocab, opts)?;
    let mut live = vec![root];
    let mut finished: Vec<BeamHypothesis> = Vec::new();

    while !live.is_empty() {
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        let mut expansions = Vec::with_capacity(live.len());
        for (hi, hyp) in live.iter().enumerate() {
            let (lp, h) = decode_step(hyp.last_action, &enc[hyp.state.pointer()], &input.features, &hyp.hidden, params)?;
            let mask = valid_action_mask(&hyp.state, vocab, table, opts.forbid_empty_eow);
            for (ai, &ok) in mask.iter().enumerate() {
                if ok {
                    candidates.push((hyp.log_likelihood + lp[ai], hi, ai));
                }
            }
            expansions.push((lp, h));
        }
        candidates.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(Ordering::Equal)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        candidates.truncate(opts.beam_size);

        let mut next = Vec::with_capacity(candidates.len());
        for (_, hi, ai) in candidates {
            let (lp, h) = &expansions[hi];
            let hyp = extend(&live[hi], ai, lp[ai], h, vocab, table)?;
            if hyp.state.is_done() {
                finished.push(hyp);
            } else {
                next.push(hyp);
            }
        }
        live = next;

        let best_finished = finished.iter().map(|h| h.log_likelihood).fold(f64::NEG_INFINITY, f64::max);
        let best_live = live.iter().map(|h| h.log_likelihood).fold(f64::NEG_INFINITY, f64::max);
        if best_finished >= best_live {
            break;
        }
    }

    // First maximum in insertion order keeps the choice deterministic.
    let mut best: Option<BeamHypothesis> = None;
    for h in finished {
        if best.as_ref().is_none_or(|b| h.log_likelihood > b.log_likelihood) {
            best = Some(h);
        }
    }
    best.map(Decoded::from)
        .ok_or_else(|| Error::InvalidArgument("beam search finished without a hypothesis".into()))
}
