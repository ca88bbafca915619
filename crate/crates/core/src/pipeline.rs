//! Orchestration behind the `reinflect` subcommands.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::actions::{derive_oracle, format_actions, run};
use crate::alignment::align;
use crate::corpus::{
    accuracy, avg_levenshtein, extract_alphabet, parse_unimorph_bytes, split_dev, write_unimorph, InflectionSample,
};
use crate::enhancer::{enhance, EnhanceConfig, RngSampler};
use crate::error::{Error, Result};
use crate::glyphs::{parse_grid, FontRasterizer, RenderConfig, DEFAULT_GRID, DEFAULT_POINT_SIZE};
use crate::model::{evaluate, fit, load_checkpoint, save_checkpoint, DecodeOptions, EpochReport, Reinflector, TrainOptions};
use crate::patches::{
    default_ranges, default_table, parse_ranges, prepopulate, BaseMap, PatchTable, DEFAULT_THRESHOLD,
};

/// Settings shared by all subcommands. Every field can be set from a
/// `key=value` file; command-line flags are applied on top.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub font: Option<PathBuf>,
    pub table: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
    pub hidden_size: usize,
    pub embed_size: usize,
    pub use_patches: bool,
    pub enhance_factor: usize,
    pub min_support: usize,
    pub beam_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub seeds: Vec<u64>,
    pub grid: (usize, usize),
    pub point_size: u32,
    pub ranges: Option<String>,
    pub patch_threshold: f64,
    pub base_overrides: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: None,
            dev: None,
            test: None,
            font: None,
            table: None,
            checkpoint: None,
            output: None,
            metrics: None,
            hidden_size: 64,
            embed_size: 16,
            use_patches: true,
            enhance_factor: 0,
            min_support: 1,
            beam_size: 1,
            max_epochs: 60,
            patience: 10,
            seed: 0,
            seeds: vec![0, 1, 2, 3, 4],
            grid: DEFAULT_GRID,
            point_size: DEFAULT_POINT_SIZE,
            ranges: None,
            patch_threshold: DEFAULT_THRESHOLD,
            base_overrides: None,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean {value:?} for {key}"))),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let path = || Some(PathBuf::from(value));
        match key {
            "train" => self.train = path(),
            "dev" => self.dev = path(),
            "test" => self.test = path(),
            "font" => self.font = path(),
            "table" => self.table = path(),
            "checkpoint" => self.checkpoint = path(),
            "output" | "out" => self.output = path(),
            "metrics" => self.metrics = path(),
            "base_overrides" => self.base_overrides = path(),
            "hidden_size" | "hidden" => self.hidden_size = parse_value(key, value)?,
            "embed_size" | "embed" => self.embed_size = parse_value(key, value)?,
            "use_patches" | "patches" => self.use_patches = parse_bool(key, value)?,
            "enhance_factor" | "factor" => self.enhance_factor = parse_value(key, value)?,
            "min_support" => self.min_support = parse_value(key, value)?,
            "beam_size" | "beam" => self.beam_size = parse_value(key, value)?,
            "max_epochs" | "epochs" => self.max_epochs = parse_value(key, value)?,
            "patience" => self.patience = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "seeds" => {
                self.seeds = value
                    .split(',')
                    .map(|s| parse_value(key, s.trim()))
                    .collect::<Result<_>>()?
            }
            "grid" => self.grid = parse_grid(value)?,
            "pt" | "point_size" => self.point_size = parse_value(key, value)?,
            "ranges" => self.ranges = Some(value.to_string()),
            "patch_threshold" => self.patch_threshold = parse_value(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a flat `key=value` document; `#` starts a comment line.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected key=value, found {line:?}"),
            })?;
            self.set(k.trim(), v.trim()).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(&read_text(path)?)?;
        Ok(cfg)
    }

    pub fn render_config(&self) -> Result<RenderConfig> {
        let mut rc = RenderConfig::default()
            .with_grid(self.grid.0, self.grid.1)?
            .with_point_size(self.point_size)?;
        if let Some(font) = &self.font {
            rc = rc.with_font(font);
        }
        Ok(rc)
    }

    fn uses_default_rendering(&self) -> bool {
        self.font.is_none()
            && self.grid == DEFAULT_GRID
            && self.point_size == DEFAULT_POINT_SIZE
            && self.ranges.is_none()
            && self.patch_threshold == DEFAULT_THRESHOLD
            && self.base_overrides.is_none()
    }

    fn decode_options(&self) -> DecodeOptions {
        DecodeOptions {
            beam_size: self.beam_size,
            ..DecodeOptions::default()
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(String::from_utf8(bytes)?)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_samples(path: &Path, covered: bool) -> Result<Vec<InflectionSample>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_unimorph_bytes(&bytes, covered)
}

fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::Config(format!("no {what} file given")))
}

/// Stable 64-bit mixing of a seed with a stream tag.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const ENHANCE_STREAM: u64 = 1;
const SPLIT_STREAM: u64 = 2;

/// Share of the training data held out when no dev file is given.
pub const DEV_FRACTION: f64 = 0.1;

/// Training and dev samples. Without a dev file a seeded tenth of the
/// training data is held out; a single sample is kept whole and trained
/// without early stopping.
fn train_and_dev(cfg: &RunConfig) -> Result<(Vec<InflectionSample>, Vec<InflectionSample>)> {
    let train = read_samples(required(&cfg.train, "training")?, false).map_err(|e| e.in_stage("parse"))?;
    match &cfg.dev {
        Some(p) => Ok((train, read_samples(p, false).map_err(|e| e.in_stage("parse"))?)),
        None if train.len() < 2 => Ok((train, Vec::new())),
        None => {
            log::info!("no dev file; holding out {DEV_FRACTION} of the training data");
            split_dev(&train, DEV_FRACTION, derive_seed(cfg.seed, SPLIT_STREAM)).map_err(|e| e.in_stage("split"))
        }
    }
}

/// The full table for the configured font and ranges: a saved TSV when
/// `table` is set, otherwise rendered (cached for the default settings).
pub fn cmd_patches(cfg: &RunConfig) -> Result<PatchTable> {
    if let Some(path) = &cfg.table {
        return PatchTable::from_tsv(&read_text(path)?);
    }
    if cfg.uses_default_rendering() {
        return Ok(default_table().clone());
    }
    let ranges = match &cfg.ranges {
        Some(spec) => parse_ranges(spec)?,
        None => default_ranges(),
    };
    let mut base = BaseMap::new();
    if let Some(path) = &cfg.base_overrides {
        base = base.with_override_file(&read_text(path)?)?;
    }
    let raster = FontRasterizer::new(cfg.render_config()?)?;
    prepopulate(&ranges, &raster, &base, cfg.patch_threshold)
}

/// Enhanced samples only; callers append them to the real data.
pub fn cmd_enhance(samples: &[InflectionSample], factor: usize, min_support: usize, seed: u64) -> Result<Vec<InflectionSample>> {
    let config = EnhanceConfig {
        factor,
        min_support,
        ..EnhanceConfig::default()
    };
    let mut sampler = RngSampler(ChaCha8Rng::seed_from_u64(seed));
    enhance(samples, &config, &mut sampler)
}

/// One line per sample: `lemma<TAB>target<TAB>actions`. Every sequence is
/// replayed through the transducer and must reproduce its target.
pub fn cmd_oracle(samples: &[InflectionSample], table: &PatchTable) -> Result<String> {
    let gap = extract_alphabet(samples).gap;
    let mut out = String::new();
    for s in samples {
        let target = s
            .target
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument(format!("{:?} has no target", s.lemma)))?;
        let actions = derive_oracle(&align(&s.lemma, target, table, gap)?, table);
        let replay = run(&s.lemma, &actions, table)?;
        if replay != target {
            return Err(Error::InvalidArgument(format!(
                "oracle for {:?} -> {target:?} replays as {replay:?}",
                s.lemma
            )));
        }
        writeln!(out, "{}\t{target}\t{}", s.lemma, format_actions(&actions)).unwrap();
    }
    Ok(out)
}

/// One line per sample: aligned lemma, aligned target, cost.
pub fn cmd_align(samples: &[InflectionSample], table: &PatchTable) -> Result<String> {
    let gap = extract_alphabet(samples).gap;
    let mut out = String::new();
    for s in samples {
        let target = s
            .target
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument(format!("{:?} has no target", s.lemma)))?;
        let a = align(&s.lemma, target, table, gap)?;
        writeln!(out, "{}\t{}\t{}", a.lemma_string(), a.target_string(), a.cost).unwrap();
    }
    Ok(out)
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: Reinflector,
    pub epochs: Vec<EpochReport>,
    /// Artificial samples added to the training data.
    pub enhanced: usize,
}

/// `epoch`, mean training loss, dev accuracy, dev Levenshtein.
pub fn epochs_tsv(reports: &[EpochReport]) -> String {
    let mut out = String::from("epoch\ttrain_loss\tdev_accuracy\tdev_levenshtein\n");
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
    for r in reports {
        writeln!(
            out,
            "{}\t{:.6}\t{}\t{}",
            r.epoch,
            r.train_loss,
            opt(r.dev_accuracy),
            opt(r.dev_levenshtein)
        )
        .unwrap();
    }
    out
}

/// Training on in-memory data; `full_table` is the unfiltered patch table.
pub fn train_on(
    cfg: &RunConfig,
    train: &[InflectionSample],
    dev: &[InflectionSample],
    full_table: &PatchTable,
) -> Result<TrainOutcome> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("training data is empty".into()).in_stage("parse"));
    }
    let mut data = train.to_vec();
    let mut enhanced = 0;
    if cfg.enhance_factor > 0 {
        let extra = cmd_enhance(train, cfg.enhance_factor, cfg.min_support, derive_seed(cfg.seed, ENHANCE_STREAM))
            .map_err(|e| e.in_stage("enhance"))?;
        enhanced = extra.len();
        log::info!("enhancer added {enhanced} samples");
        data.extend(extra);
    }
    let table = if cfg.use_patches {
        full_table.filter_for_alphabet(&extract_alphabet(&data))
    } else {
        PatchTable::empty()
    };
    log::info!("{} patch classes for this alphabet", table.class_count());
    let mut model = Reinflector::for_samples(&data, table, cfg.hidden_size, cfg.embed_size, cfg.seed)
        .map_err(|e| e.in_stage("vocabulary"))?;
    model.config.use_patches = cfg.use_patches;
    let opts = TrainOptions {
        max_epochs: cfg.max_epochs,
        patience: cfg.patience,
        target_accuracy: None,
        decode: cfg.decode_options(),
        shuffle_seed: cfg.seed,
    };
    let epochs = fit(&mut model, &data, dev, &opts).map_err(|e| e.in_stage("train"))?;
    Ok(TrainOutcome { model, epochs, enhanced })
}

fn table_for(cfg: &RunConfig) -> Result<PatchTable> {
    if cfg.use_patches {
        cmd_patches(cfg).map_err(|e| e.in_stage("patches"))
    } else {
        Ok(PatchTable::empty())
    }
}

pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutcome> {
    let (train, dev) = train_and_dev(cfg)?;
    let table = table_for(cfg)?;
    let outcome = train_on(cfg, &train, &dev, &table)?;
    if let Some(path) = &cfg.checkpoint {
        save_checkpoint(&outcome.model, path).map_err(|e| e.in_stage("checkpoint"))?;
    }
    if let Some(path) = &cfg.metrics {
        write_text(path, &epochs_tsv(&outcome.epochs)).map_err(|e| e.in_stage("metrics"))?;
    }
    Ok(outcome)
}

/// Predictions for a covered file, as 3-column UniMorph TSV. An empty
/// decoded form would make the file unparseable, so the lemma stands in.
pub fn predict_samples(model: &Reinflector, samples: &[InflectionSample], opts: &DecodeOptions) -> Result<String> {
    let mut out = Vec::with_capacity(samples.len());
    for s in samples {
        let mut form = model.predict(&s.lemma, &s.features, opts)?.output;
        if form.is_empty() {
            log::warn!("empty prediction for {:?}; writing the lemma", s.lemma);
            form = s.lemma.clone();
        }
        out.push(InflectionSample {
            lemma: s.lemma.clone(),
            target: Some(form),
            features: s.features.clone(),
        });
    }
    Ok(write_unimorph(&out))
}

pub fn cmd_predict(cfg: &RunConfig) -> Result<String> {
    let model = load_checkpoint(required(&cfg.checkpoint, "checkpoint")?).map_err(|e| e.in_stage("checkpoint"))?;
    let samples = read_samples(required(&cfg.test, "test")?, true).map_err(|e| e.in_stage("parse"))?;
    let text = predict_samples(&model, &samples, &cfg.decode_options()).map_err(|e| e.in_stage("predict"))?;
    if let Some(path) = &cfg.output {
        write_text(path, &text)?;
    }
    Ok(text)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Fraction in `[0, 1]`.
    pub accuracy: f64,
    pub levenshtein: f64,
}

impl Metrics {
    pub fn report(&self) -> String {
        format!("accuracy\t{:.4}\nlevenshtein\t{:.4}\n", 100.0 * self.accuracy, self.levenshtein)
    }
}

/// Compares the form columns of two line-aligned 3-column files.
pub fn cmd_evaluate(predictions: &Path, gold: &Path) -> Result<Metrics> {
    let pred = read_samples(predictions, false)?;
    let gold = read_samples(gold, false)?;
    if pred.len() != gold.len() {
        return Err(Error::LengthMismatch {
            what: "prediction and gold files",
            left: pred.len(),
            right: gold.len(),
        });
    }
    for (i, (p, g)) in pred.iter().zip(&gold).enumerate() {
        if p.lemma != g.lemma {
            log::warn!("line {}: lemma {:?} vs gold {:?}", i + 1, p.lemma, g.lemma);
        }
    }
    let forms = |v: &[InflectionSample]| -> Vec<String> { v.iter().map(|s| s.target.clone().unwrap_or_default()).collect() };
    let (p, g) = (forms(&pred), forms(&gold));
    Ok(Metrics {
        accuracy: accuracy(&p, &g)?,
        levenshtein: avg_levenshtein(&p, &g)?,
    })
}

pub const HIDDEN_GRID: [usize; 3] = [32, 64, 128];
pub const EMBED_GRID: [usize; 2] = [8, 16];
pub const PATCH_GRID: [bool; 2] = [true, false];
pub const ENHANCE_GRID: [usize; 3] = [0, 1, 5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridPoint {
    pub hidden_size: usize,
    pub embed_size: usize,
    pub use_patches: bool,
    pub enhance_factor: usize,
}

impl GridPoint {
    pub fn key(&self) -> String {
        format!(
            "h{}-e{}-p{}-x{}",
            self.hidden_size, self.embed_size, self.use_patches as u8, self.enhance_factor
        )
    }

    fn stream(&self, effective_patches: bool) -> u64 {
        let mut s = self.hidden_size as u64;
        s = s * 1000 + self.embed_size as u64;
        s = s * 10 + effective_patches as u64;
        s * 10 + self.enhance_factor as u64
    }
}

pub fn full_grid() -> Vec<GridPoint> {
    let mut out = Vec::new();
    for &hidden_size in &HIDDEN_GRID {
        for &embed_size in &EMBED_GRID {
            for &use_patches in &PATCH_GRID {
                for &enhance_factor in &ENHANCE_GRID {
                    out.push(GridPoint {
                        hidden_size,
                        embed_size,
                        use_patches,
                        enhance_factor,
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneCell {
    pub point: GridPoint,
    pub seed: u64,
    pub result: std::result::Result<Metrics, String>,
    pub seconds: f64,
    /// Patches requested but the table is empty for this alphabet, so the
    /// cell coincides with its patches-off twin.
    pub patches_noop: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneReport {
    pub cells: Vec<TuneCell>,
    pub best: Option<GridPoint>,
}

impl TuneReport {
    /// Wall time is left out so reruns produce identical files.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("hidden\tembed\tpatches\tenhance\tseed\taccuracy\tlevenshtein\tstatus\n");
        for c in &self.cells {
            let p = &c.point;
            let (acc, lev, status) = match &c.result {
                Ok(m) => (format!("{:.4}", m.accuracy), format!("{:.4}", m.levenshtein), "ok".to_string()),
                Err(e) => ("-".into(), "-".into(), format!("failed: {}", e.replace(['\t', '\n'], " "))),
            };
            let status = if c.patches_noop { format!("{status}; patches have no effect") } else { status };
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{acc}\t{lev}\t{status}",
                p.hidden_size, p.embed_size, p.use_patches, p.enhance_factor, c.seed
            )
            .unwrap();
        }
        match &self.best {
            Some(b) => writeln!(out, "# best\t{}", b.key()).unwrap(),
            None => out.push_str("# best\tnone\n"),
        }
        out
    }
}

/// Best configuration by mean dev accuracy over its successful seeds; ties go
/// to lower mean Levenshtein, then smaller hidden, smaller embed, then key.
pub fn select_best(cells: &[TuneCell]) -> Option<GridPoint> {
    let mut agg: BTreeMap<GridPoint, (f64, f64, usize)> = BTreeMap::new();
    for c in cells {
        if let Ok(m) = &c.result {
            let e = agg.entry(c.point).or_insert((0.0, 0.0, 0));
            e.0 += m.accuracy;
            e.1 += m.levenshtein;
            e.2 += 1;
        }
    }
    agg.into_iter()
        .map(|(p, (a, l, n))| (p, a / n as f64, l / n as f64))
        .min_by(|x, y| {
            y.1.total_cmp(&x.1)
                .then(x.2.total_cmp(&y.2))
                .then(x.0.hidden_size.cmp(&y.0.hidden_size))
                .then(x.0.embed_size.cmp(&y.0.embed_size))
                .then(x.0.key().cmp(&y.0.key()))
        })
        .map(|(p, _, _)| p)
}

/// Trains and evaluates every grid cell for every seed. Cells are independent
/// and run in parallel; each derives its seed from its grid point and seed,
/// so the report does not depend on scheduling.
pub fn tune_on(
    cfg: &RunConfig,
    grid: &[GridPoint],
    train: &[InflectionSample],
    dev: &[InflectionSample],
    full_table: &PatchTable,
) -> Result<TuneReport> {
    if dev.is_empty() {
        return Err(Error::Config("tuning needs a dev set".into()));
    }
    let alphabet = extract_alphabet(train);
    let table_empty = full_table.filter_for_alphabet(&alphabet).is_empty();
    let jobs: Vec<(GridPoint, u64)> = grid
        .iter()
        .flat_map(|p| cfg.seeds.iter().map(move |&s| (*p, s)))
        .collect();
    let cells: Vec<TuneCell> = jobs
        .par_iter()
        .map(|&(point, seed)| {
            let effective = point.use_patches && !table_empty;
            let mut cell_cfg = cfg.clone();
            cell_cfg.hidden_size = point.hidden_size;
            cell_cfg.embed_size = point.embed_size;
            cell_cfg.use_patches = effective;
            cell_cfg.enhance_factor = point.enhance_factor;
            cell_cfg.seed = derive_seed(seed, point.stream(effective));
            let start = Instant::now();
            let result = train_on(&cell_cfg, train, dev, full_table)
                .and_then(|o| evaluate(&o.model, dev, &cell_cfg.decode_options()))
                .map(|(accuracy, levenshtein)| Metrics { accuracy, levenshtein })
                .map_err(|e| e.to_string());
            let seconds = start.elapsed().as_secs_f64();
            log::info!("cell {} seed {seed}: {result:?} in {seconds:.1}s", point.key());
            TuneCell {
                point,
                seed,
                result,
                seconds,
                patches_noop: point.use_patches && table_empty,
            }
        })
        .collect();
    let best = select_best(&cells);
    Ok(TuneReport { cells, best })
}

pub fn cmd_tune(cfg: &RunConfig) -> Result<TuneReport> {
    let (train, dev) = train_and_dev(cfg)?;
    let table = cmd_patches(cfg).map_err(|e| e.in_stage("patches"))?;
    let report = tune_on(cfg, &full_grid(), &train, &dev, &table)?;
    if let Some(path) = &cfg.output {
        write_text(path, &report.to_tsv())?;
    }
    Ok(report)
}
