use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use reinflect::corpus::{extract_alphabet, write_unimorph};
use reinflect::pipeline::{self, RunConfig};
use reinflect::{Error, Result};

#[derive(Parser)]
#[command(name = "reinflect", version, about = "Morphological reinflection with transducer actions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Common {
    /// Flat key=value file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Default)]
struct Render {
    /// TrueType/OpenType font; the embedded monospace font by default.
    #[arg(long)]
    font: Option<PathBuf>,
    /// Bitmap grid as WxH.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    pt: Option<u32>,
    /// Comma-separated block names or hex spans, e.g. `latin-1,0100-017F`.
    #[arg(long)]
    ranges: Option<String>,
    #[arg(long)]
    patch_threshold: Option<f64>,
    /// Extra base-letter mappings, one `from<TAB>to` per line.
    #[arg(long)]
    base_overrides: Option<PathBuf>,
    /// Saved patch table TSV; skips rendering.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args, Default)]
struct Hyper {
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    embed: Option<usize>,
    /// Use patch actions (`true`/`false`).
    #[arg(long)]
    patches: Option<bool>,
    /// Artificial samples per qualifying pair; 0 disables enhancement.
    #[arg(long)]
    factor: Option<usize>,
    #[arg(long)]
    min_support: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    beam: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the patch lookup table.
    Patches {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        render: Render,
        /// Keep only classes observed in this UniMorph file.
        #[arg(long)]
        alphabet_from: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hallucinate artificial training samples.
    Enhance {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        factor: Option<usize>,
        #[arg(long)]
        min_support: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print gold action sequences.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        render: Render,
        #[arg(long, visible_alias = "pairs")]
        data: Option<PathBuf>,
        #[arg(long)]
        patches: Option<bool>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print patch-aware alignments.
    Align {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        render: Render,
        #[arg(long, visible_alias = "data")]
        pairs: Option<PathBuf>,
        #[arg(long)]
        patches: Option<bool>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a model and write a checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        render: Render,
        #[command(flatten)]
        hyper: Hyper,
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Per-epoch TSV log.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Predict forms for a covered file.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        beam: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Accuracy and mean Levenshtein distance of predictions against gold.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        gold: PathBuf,
    },
    /// Grid search over model size, patches, and enhancement.
    Tune {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        render: Render,
        #[command(flatten)]
        hyper: Hyper,
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        dev: Option<PathBuf>,
        /// Comma-separated seed list.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Overrides(Vec<(&'static str, String)>);

impl Overrides {
    fn new() -> Self {
        Overrides(Vec::new())
    }

    fn add<T: ToString>(&mut self, key: &'static str, value: &Option<T>) -> &mut Self {
        if let Some(v) = value {
            self.0.push((key, v.to_string()));
        }
        self
    }

    fn path(&mut self, key: &'static str, value: &Option<PathBuf>) -> &mut Self {
        if let Some(v) = value {
            self.0.push((key, v.to_string_lossy().into_owned()));
        }
        self
    }

    fn render(&mut self, r: &Render) -> &mut Self {
        self.path("font", &r.font)
            .add("grid", &r.grid)
            .add("pt", &r.pt)
            .add("ranges", &r.ranges)
            .add("patch_threshold", &r.patch_threshold)
            .path("base_overrides", &r.base_overrides)
            .path("table", &r.table)
    }

    fn hyper(&mut self, h: &Hyper) -> &mut Self {
        self.add("hidden_size", &h.hidden)
            .add("embed_size", &h.embed)
            .add("use_patches", &h.patches)
            .add("enhance_factor", &h.factor)
            .add("min_support", &h.min_support)
            .add("max_epochs", &h.epochs)
            .add("patience", &h.patience)
            .add("beam_size", &h.beam)
    }

    fn build(&self, common: &Common) -> Result<RunConfig> {
        let mut cfg = match &common.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = common.seed {
            cfg.seed = seed;
        }
        for (k, v) in &self.0 {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn data_path(cfg: &RunConfig) -> Result<&Path> {
    cfg.train
        .as_deref()
        .ok_or_else(|| Error::Config("no data file given".into()))
}

fn table_or_empty(cfg: &RunConfig) -> Result<reinflect::patches::PatchTable> {
    if cfg.use_patches {
        pipeline::cmd_patches(cfg)
    } else {
        Ok(reinflect::patches::PatchTable::empty())
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Patches { common, render, alphabet_from, out } => {
            let cfg = Overrides::new().render(&render).build(&common)?;
            let mut table = pipeline::cmd_patches(&cfg)?;
            if let Some(path) = alphabet_from {
                let samples = pipeline::read_samples(&path, false)?;
                table = table.filter_for_alphabet(&extract_alphabet(&samples));
            }
            log::info!("{} classes, {} rows", table.class_count(), table.len());
            emit(out.as_deref(), &table.to_tsv())
        }
        Command::Enhance { common, data, factor, min_support, out } => {
            let cfg = Overrides::new()
                .path("train", &data)
                .add("enhance_factor", &factor)
                .add("min_support", &min_support)
                .build(&common)?;
            let samples = pipeline::read_samples(data_path(&cfg)?, false)?;
            let extra = pipeline::cmd_enhance(&samples, cfg.enhance_factor.max(1), cfg.min_support, cfg.seed)?;
            log::info!("{} artificial samples", extra.len());
            emit(out.as_deref(), &write_unimorph(&extra))
        }
        Command::Oracle { common, render, data, patches, out } => {
            let cfg = Overrides::new()
                .render(&render)
                .path("train", &data)
                .add("use_patches", &patches)
                .build(&common)?;
            let samples = pipeline::read_samples(data_path(&cfg)?, false)?;
            let table = table_or_empty(&cfg)?.filter_for_alphabet(&extract_alphabet(&samples));
            emit(out.as_deref(), &pipeline::cmd_oracle(&samples, &table)?)
        }
        Command::Align { common, render, pairs, patches, out } => {
            let cfg = Overrides::new()
                .render(&render)
                .path("train", &pairs)
                .add("use_patches", &patches)
                .build(&common)?;
            let samples = pipeline::read_samples(data_path(&cfg)?, false)?;
            let table = table_or_empty(&cfg)?.filter_for_alphabet(&extract_alphabet(&samples));
            emit(out.as_deref(), &pipeline::cmd_align(&samples, &table)?)
        }
        Command::Train { common, render, hyper, train, dev, checkpoint, metrics } => {
            let cfg = Overrides::new()
                .render(&render)
                .hyper(&hyper)
                .path("train", &train)
                .path("dev", &dev)
                .path("checkpoint", &checkpoint)
                .path("metrics", &metrics)
                .build(&common)?;
            if cfg.checkpoint.is_none() {
                return Err(Error::Config("--checkpoint is required".into()));
            }
            let outcome = pipeline::cmd_train(&cfg)?;
            if cfg.metrics.is_none() {
                eprint!("{}", pipeline::epochs_tsv(&outcome.epochs));
            }
            Ok(())
        }
        Command::Predict { common, checkpoint, test, beam, out } => {
            let cfg = Overrides::new()
                .path("checkpoint", &checkpoint)
                .path("test", &test)
                .add("beam_size", &beam)
                .path("output", &out)
                .build(&common)?;
            let text = pipeline::cmd_predict(&cfg)?;
            if cfg.output.is_none() {
                emit(None, &text)?;
            }
            Ok(())
        }
        Command::Evaluate { common, predictions, gold } => {
            Overrides::new().build(&common)?;
            let metrics = pipeline::cmd_evaluate(&predictions, &gold)?;
            emit(None, &metrics.report())
        }
        Command::Tune { common, render, hyper, train, dev, seeds, out } => {
            let cfg = Overrides::new()
                .render(&render)
                .hyper(&hyper)
                .path("train", &train)
                .path("dev", &dev)
                .add("seeds", &seeds)
                .path("output", &out)
                .build(&common)?;
            let report = pipeline::cmd_tune(&cfg)?;
            if cfg.output.is_none() {
                emit(None, &report.to_tsv())?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Display already carries the underlying cause.
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
