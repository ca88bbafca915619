//! Self-describing text checkpoints.
//!
//! ```text
//! REINFLECT-CKPT v1
//! config hidden_size=64
//! ...
//! chars 3
//! U+0061
//! ...
//! tensor decoder.w_z 64 93
//! 0.013 -0.2 ...
//! end
//! ```
//!
//! Symbols are written as `U+XXXX` so whitespace and control characters
//! survive. Values use Rust's shortest round-trip formatting, so a load
//! reproduces every bit.

use std::fmt::Write as _;
use std::path::Path;

use super::params::{ModelConfig, ModelParams};
use super::tensor::Tensor;
use super::vocab::CharVocab;
use super::Reinflector;
use crate::actions::{Action, ActionVocab};
use crate::corpus::FeatureVocab;
use crate::error::{Error, Result};
use crate::patches::PatchTable;

pub const CHECKPOINT_MAGIC: &str = "REINFLECT-CKPT v1";

fn cp(c: char) -> String {
    format!("U+{:04X}", c as u32)
}

fn parse_cp(s: &str) -> Result<char> {
    s.strip_prefix("U+")
        .and_then(|h| u32::from_str_radix(h, 16).ok())
        .and_then(char::from_u32)
        .ok_or_else(|| Error::Checkpoint(format!("bad codepoint {s:?}")))
}

fn action_token(a: &Action) -> String {
    match a {
        Action::Emit(c) => format!("EMIT:{}", cp(*c)),
        other => other.to_string(),
    }
}

fn parse_action(s: &str) -> Result<Action> {
    match s.strip_prefix("EMIT:") {
        Some(c) => Ok(Action::Emit(parse_cp(c)?)),
        None => s.parse().map_err(|_| Error::Checkpoint(format!("bad action {s:?}"))),
    }
}

pub fn write_checkpoint(model: &Reinflector) -> String {
    let mut out = String::new();
    let c = &model.config;
    out.push_str(CHECKPOINT_MAGIC);
    out.push('\n');
    for (k, v) in [
        ("hidden_size", c.hidden_size.to_string()),
        ("embed_size", c.embed_size.to_string()),
        ("action_vocab_size", c.action_vocab_size.to_string()),
        ("char_vocab_size", c.char_vocab_size.to_string()),
        ("feature_dim", c.feature_dim.to_string()),
        ("use_patches", c.use_patches.to_string()),
        ("seed", c.seed.to_string()),
        ("decoder_input", "previous_action".to_string()),
        ("gru_update", "interpolate_1-z_z".to_string()),
    ] {
        writeln!(out, "config {k}={v}").unwrap();
    }

    writeln!(out, "chars {}", model.chars.symbols().len()).unwrap();
    for &s in model.chars.symbols() {
        writeln!(out, "{}", cp(s)).unwrap();
    }
    writeln!(out, "features {}", model.features.len()).unwrap();
    for t in model.features.tags() {
        writeln!(out, "{t}").unwrap();
    }
    writeln!(out, "actions {}", model.actions.len()).unwrap();
    for a in model.actions.actions() {
        writeln!(out, "{}", action_token(a)).unwrap();
    }
    writeln!(out, "patches {}", model.table.len()).unwrap();
    for (s, k, r) in model.table.entries() {
        writeln!(out, "{} {k} {}", cp(s), cp(r)).unwrap();
    }

    for (name, t) in model.params.named_tensors() {
        let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
        writeln!(out, "tensor {name} {}", dims.join(" ")).unwrap();
        let values: Vec<String> = t.values().iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", values.join(" ")).unwrap();
    }
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str> {
        match self.inner.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok(l)
            }
            None => Err(Error::Checkpoint(format!("truncated: expected {what} after line {}", self.last))),
        }
    }

    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::Checkpoint(format!("line {}: {msg}", self.last))
    }

    fn block(&mut self, keyword: &str) -> Result<Vec<&'a str>> {
        let head = self.next(keyword)?;
        let n: usize = head
            .strip_prefix(keyword)
            .and_then(|r| r.strip_prefix(' '))
            .and_then(|r| r.parse().ok())
            .ok_or_else(|| self.err(format!("expected `{keyword} <count>`, found {head:?}")))?;
        (0..n).map(|_| self.next(keyword)).collect()
    }
}

pub fn read_checkpoint(text: &str) -> Result<Reinflector> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let magic = lines.next("header")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(format!("unsupported header {magic:?}, expected {CHECKPOINT_MAGIC:?}")));
    }

    let mut kv = std::collections::BTreeMap::new();
    let mut line = lines.next("config")?;
    while let Some(rest) = line.strip_prefix("config ") {
        let (k, v) = rest.split_once('=').ok_or_else(|| lines.err("config line without `=`"))?;
        kv.insert(k.to_string(), v.to_string());
        line = lines.next("chars")?;
    }
    let get = |k: &str| kv.get(k).ok_or_else(|| Error::Checkpoint(format!("missing config key {k}")));
    let num = |k: &str| -> Result<u64> { get(k)?.parse().map_err(|_| Error::Checkpoint(format!("bad value for {k}"))) };
    let config = ModelConfig {
        hidden_size: num("hidden_size")? as usize,
        embed_size: num("embed_size")? as usize,
        action_vocab_size: num("action_vocab_size")? as usize,
        char_vocab_size: num("char_vocab_size")? as usize,
        feature_dim: num("feature_dim")? as usize,
        use_patches: get("use_patches")?
            .parse()
            .map_err(|_| Error::Checkpoint("bad value for use_patches".into()))?,
        seed: num("seed")?,
    };
    config.validate()?;

    // `line` already holds the chars header.
    let n: usize = line
        .strip_prefix("chars ")
        .and_then(|r| r.parse().ok())
        .ok_or_else(|| lines.err(format!("expected `chars <count>`, found {line:?}")))?;
    let symbols = (0..n)
        .map(|_| lines.next("chars").and_then(parse_cp))
        .collect::<Result<Vec<_>>>()?;
    let chars = CharVocab::new(symbols);
    let features = FeatureVocab::from_tags(lines.block("features")?);
    let actions = ActionVocab::from_actions(
        lines.block("actions")?.into_iter().map(parse_action).collect::<Result<_>>()?,
    )?;
    let mut tsv = String::new();
    for row in lines.block("patches")? {
        let parts: Vec<&str> = row.split(' ').collect();
        if parts.len() != 3 {
            return Err(lines.err(format!("bad patch row {row:?}")));
        }
        writeln!(tsv, "{}\t{}\t{}", parse_cp(parts[0])?, parts[1], parse_cp(parts[2])?).unwrap();
    }
    let table = PatchTable::from_tsv(&tsv).map_err(|e| Error::Checkpoint(format!("patch table: {e}")))?;

    if chars.len() != config.char_vocab_size
        || features.len() != config.feature_dim
        || actions.len() != config.action_vocab_size
    {
        return Err(Error::Checkpoint("vocabulary sizes disagree with config".into()));
    }

    let mut params = ModelParams::zeros(&config);
    let mut failure: Option<Error> = None;
    params.for_each_mut(|name, t| {
        if failure.is_some() {
            return;
        }
        if let Err(e) = read_tensor(&mut lines, name, t) {
            failure = Some(e);
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let tail = lines.next("end")?;
    if tail != "end" {
        return Err(lines.err(format!("expected `end`, found {tail:?}")));
    }

    Ok(Reinflector {
        config,
        params,
        chars,
        features,
        actions,
        table,
    })
}

fn read_tensor(lines: &mut Lines<'_>, name: &str, t: &mut Tensor) -> Result<()> {
    let head = lines.next(name)?;
    let mut parts = head.split(' ');
    if parts.next() != Some("tensor") || parts.next() != Some(name) {
        return Err(lines.err(format!("expected tensor {name}, found {head:?}")));
    }
    let dims = parts
        .map(|d| d.parse::<usize>().map_err(|_| lines.err(format!("bad dimension {d:?}"))))
        .collect::<Result<Vec<_>>>()?;
    if dims != t.shape() {
        return Err(lines.err(format!("tensor {name} has shape {dims:?}, model expects {:?}", t.shape())));
    }
    let body = lines.next(name)?;
    let values = body
        .split(' ')
        .filter(|s| !s.is_empty())
        .map(|v| v.parse::<f64>().map_err(|_| lines.err(format!("bad value {v:?} in {name}"))))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != t.len() {
        return Err(lines.err(format!("tensor {name} has {} values, expected {}", values.len(), t.len())));
    }
    t.values_mut().copy_from_slice(&values);
    Ok(())
}

pub fn save_checkpoint(model: &Reinflector, path: &Path) -> Result<()> {
    std::fs::write(path, write_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Reinflector> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::InflectionSample;
    use crate::patches::{build_table, PatchClass};

    fn model() -> Reinflector {
        let samples = vec![
            InflectionSample::new("tá a", Some("ta a!"), &["N", "PL"]).unwrap(),
            InflectionSample::new("e", Some("é"), &["V"]).unwrap(),
        ];
        let table = build_table(&[PatchClass { xor_bits: vec![], pairs: vec![('a', 'á'), ('e', 'é')] }]).unwrap();
        Reinflector::for_samples(&samples, table, 4, 3, 17).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let text = write_checkpoint(&m);
        let back = read_checkpoint(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.config.seed, 17);
        assert_eq!(write_checkpoint(&back), text);
    }

    #[test]
    fn corruption_is_detected() {
        let text = write_checkpoint(&model());
        assert!(read_checkpoint(&text.replacen("v1", "v2", 1)).is_err());
        let cut = &text[..text.len() / 2];
        assert!(read_checkpoint(cut).is_err());
        // Drop one value from the last tensor.
        let mut lines: Vec<&str> = text.lines().collect();
        let n = lines.len();
        let shorter = lines[n - 2].rsplit_once(' ').unwrap().0.to_string();
        lines[n - 2] = &shorter;
        assert!(read_checkpoint(&lines.join("\n")).is_err());
        assert!(read_checkpoint(&text.replace("tensor output_bias", "tensor output_bias 99")).is_err());
    }
}
