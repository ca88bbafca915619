//! Monochrome glyph rendering on a fixed pixel grid.
//!
//! Every symbol of a session is drawn at the same pen position on a grid of
//! identical size, then thresholded at half coverage so no anti-aliasing
//! survives. Glyphs can also be read from a directory of plain PBM files
//! (`U+0061.pbm`), which keeps the patch builder independent of the
//! rasterizer.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ab_glyph::{point, Font, FontArc, GlyphId, PxScale, ScaleFont};

use crate::error::{Error, Result};

/// DejaVu Sans Mono, the default rendering font.
pub static DEFAULT_FONT: &[u8] = include_bytes!("../assets/DejaVuSansMono.ttf");

pub const DEFAULT_GRID: (usize, usize) = (24, 32);
pub const DEFAULT_POINT_SIZE: u32 = 21;
const MIN_GRID: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GlyphBitmap {
    pub codepoint: char,
    pub width: usize,
    pub height: usize,
    /// Row-major, `true` = set.
    pub bits: Vec<bool>,
}

impl GlyphBitmap {
    pub fn blank(codepoint: char, width: usize, height: usize) -> Self {
        GlyphBitmap {
            codepoint,
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn same_dims(&self, other: &GlyphBitmap) -> bool {
        self.width == other.width && self.height == other.height
    }
}

pub fn ink_count(bitmap: &GlyphBitmap) -> usize {
    bitmap.bits.iter().filter(|&&b| b).count()
}

/// Plain PBM (`P1`) text, one pixel row per line.
pub fn save_bitmap(bitmap: &GlyphBitmap) -> String {
    let mut out = format!("P1\n{} {}\n", bitmap.width, bitmap.height);
    for row in bitmap.bits.chunks(bitmap.width.max(1)) {
        let line: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
        writeln!(out, "{}", line.join(" ")).unwrap();
    }
    out
}

/// Parses plain PBM. Comments (`#` to end of line) are skipped; pixel digits
/// may or may not be separated by whitespace.
pub fn load_bitmap(text: &str, codepoint: char) -> Result<GlyphBitmap> {
    let body: String = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .collect::<Vec<_>>()
        .join("\n");
    let mut tokens = body.split_whitespace();
    match tokens.next() {
        Some("P1") => {}
        Some(other) => {
            return Err(Error::Bitmap(format!(
                "unsupported PBM magic {other:?}, only plain P1 is accepted"
            )))
        }
        None => return Err(Error::Bitmap("empty PBM payload".into())),
    }
    let mut dim = |name: &str| -> Result<usize> {
        tokens
            .next()
            .and_then(|t| t.parse::<usize>().ok())
            .ok_or_else(|| Error::Bitmap(format!("missing or malformed {name}")))
    };
    let width = dim("width")?;
    let height = dim("height")?;
    let mut bits = Vec::with_capacity(width * height);
    for tok in tokens {
        for ch in tok.chars() {
            match ch {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => return Err(Error::Bitmap(format!("invalid pixel value {ch:?}"))),
            }
        }
    }
    if bits.len() != width * height {
        return Err(Error::Bitmap(format!(
            "expected {} pixels for {width}x{height}, found {}",
            width * height,
            bits.len()
        )));
    }
    Ok(GlyphBitmap {
        codepoint,
        width,
        height,
        bits,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FontSource {
    Embedded,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderConfig {
    pub font: FontSource,
    pub grid: (usize, usize),
    pub point_size: u32,
    overrides: BTreeMap<char, char>,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            font: FontSource::Embedded,
            grid: DEFAULT_GRID,
            point_size: DEFAULT_POINT_SIZE,
            overrides: BTreeMap::from([('i', '\u{0131}')]),
        }
    }
}

impl RenderConfig {
    pub fn with_font(mut self, path: impl Into<PathBuf>) -> Self {
        self.font = FontSource::File(path.into());
        self
    }

    pub fn with_grid(mut self, width: usize, height: usize) -> Result<Self> {
        if width < MIN_GRID || height < MIN_GRID {
            return Err(Error::InvalidArgument(format!(
                "grid {width}x{height} is smaller than {MIN_GRID}x{MIN_GRID}"
            )));
        }
        self.grid = (width, height);
        Ok(self)
    }

    pub fn with_point_size(mut self, pt: u32) -> Result<Self> {
        if pt == 0 {
            return Err(Error::InvalidArgument("point size must be positive".into()));
        }
        self.point_size = pt;
        Ok(self)
    }

    /// Adds a rendering substitution. Chains are rejected so that the
    /// substitution stays idempotent.
    pub fn with_override(mut self, from: char, to: char) -> Result<Self> {
        if from == to {
            return Ok(self);
        }
        if self.overrides.contains_key(&to) || self.overrides.values().any(|&v| v == from) {
            return Err(Error::InvalidArgument(format!(
                "override {from:?} -> {to:?} would chain with an existing override"
            )));
        }
        self.overrides.insert(from, to);
        Ok(self)
    }

    pub fn overrides(&self) -> &BTreeMap<char, char> {
        &self.overrides
    }

    /// The codepoint actually drawn for `c`.
    pub fn substitute(&self, c: char) -> char {
        self.overrides.get(&c).copied().unwrap_or(c)
    }
}

/// Parses `WxH`.
pub fn parse_grid(spec: &str) -> Result<(usize, usize)> {
    let (w, h) = spec
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::InvalidArgument(format!("grid {spec:?} is not WxH")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| Error::InvalidArgument(format!("grid {spec:?} is not WxH")))
    };
    Ok((parse(w)?, parse(h)?))
}

/// Anything that can turn a codepoint into a bitmap. `Ok(None)` marks a
/// placeholder: the source has no real glyph for that codepoint.
pub trait GlyphSource {
    fn grid(&self) -> (usize, usize);
    fn render(&self, c: char) -> Result<Option<GlyphBitmap>>;
}

/// Rasterizes glyphs from a scalable font.
pub struct FontRasterizer {
    font: FontArc,
    config: RenderConfig,
    pen_x: f32,
    baseline: f32,
    notdef: GlyphBitmap,
}

impl FontRasterizer {
    pub fn new(config: RenderConfig) -> Result<Self> {
        let font = match &config.font {
            FontSource::Embedded => FontArc::try_from_slice(DEFAULT_FONT)
                .map_err(|e| Error::Font(format!("embedded font: {e}")))?,
            FontSource::File(path) => {
                let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
                FontArc::try_from_vec(bytes)
                    .map_err(|e| Error::Font(format!("{}: {e}", path.display())))?
            }
        };
        let (w, h) = config.grid;
        let scaled = font.as_scaled(PxScale::from(config.point_size as f32));
        let reference = scaled.h_advance(font.glyph_id('M'));
        let pen_x = ((w as f32 - reference) / 2.0).floor().max(0.0);
        let baseline = (h * 3 / 4) as f32;
        let mut raster = FontRasterizer {
            font,
            config,
            pen_x,
            baseline,
            notdef: GlyphBitmap::blank('\0', w, h),
        };
        raster.notdef = raster.draw(GlyphId(0), '\0');
        Ok(raster)
    }

    pub fn config(&self) -> &RenderConfig {
        &self.config
    }

    fn draw(&self, id: GlyphId, codepoint: char) -> GlyphBitmap {
        let (w, h) = self.config.grid;
        let mut bitmap = GlyphBitmap::blank(codepoint, w, h);
        let glyph = id.with_scale_and_position(
            PxScale::from(self.config.point_size as f32),
            point(self.pen_x, self.baseline),
        );
        if let Some(outline) = self.font.outline_glyph(glyph) {
            let bounds = outline.px_bounds();
            let (x0, y0) = (bounds.min.x as i64, bounds.min.y as i64);
            outline.draw(|x, y, coverage| {
                let (px, py) = (x0 + x as i64, y0 + y as i64);
                if coverage >= 0.5 && px >= 0 && py >= 0 && (px as usize) < w && (py as usize) < h {
                    bitmap.bits[py as usize * w + px as usize] = true;
                }
            });
        }
        bitmap
    }
}

impl GlyphSource for FontRasterizer {
    fn grid(&self) -> (usize, usize) {
        self.config.grid
    }

    fn render(&self, c: char) -> Result<Option<GlyphBitmap>> {
        let drawn = self.config.substitute(c);
        let id = self.font.glyph_id(drawn);
        if id.0 == 0 {
            return Ok(None);
        }
        let bitmap = self.draw(id, c);
        if bitmap.bits == self.notdef.bits && ink_count(&bitmap) > 0 {
            return Ok(None);
        }
        Ok(Some(bitmap))
    }
}

/// Reads pre-rendered glyphs from `<dir>/U+XXXX.pbm`. Missing files are
/// placeholders; overrides apply to the file looked up.
pub struct PbmDirectory {
    dir: PathBuf,
    grid: (usize, usize),
    overrides: BTreeMap<char, char>,
}

impl PbmDirectory {
    pub fn new(dir: impl Into<PathBuf>, config: &RenderConfig) -> Self {
        PbmDirectory {
            dir: dir.into(),
            grid: config.grid,
            overrides: config.overrides.clone(),
        }
    }

    pub fn path_for(dir: &Path, c: char) -> PathBuf {
        dir.join(format!("U+{:04X}.pbm", c as u32))
    }
}

impl GlyphSource for PbmDirectory {
    fn grid(&self) -> (usize, usize) {
        self.grid
    }

    fn render(&self, c: char) -> Result<Option<GlyphBitmap>> {
        let drawn = self.overrides.get(&c).copied().unwrap_or(c);
        let path = Self::path_for(&self.dir, drawn);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(path, e)),
        };
        let bitmap = load_bitmap(&text, c)?;
        if (bitmap.width, bitmap.height) != self.grid {
            return Err(Error::Bitmap(format!(
                "{} is {}x{}, session grid is {}x{}",
                path.display(),
                bitmap.width,
                bitmap.height,
                self.grid.0,
                self.grid.1
            )));
        }
        Ok(Some(bitmap))
    }
}

/// Bitmaps keyed by the original codepoint, plus the placeholder set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RenderedAlphabet {
    pub bitmaps: BTreeMap<char, GlyphBitmap>,
    pub placeholders: BTreeSet<char>,
}

pub fn render_alphabet<I>(chars: I, source: &dyn GlyphSource) -> Result<RenderedAlphabet>
where
    I: IntoIterator<Item = char>,
{
    let mut out = RenderedAlphabet::default();
    for c in chars {
        match source.render(c)? {
            Some(b) => {
                out.bitmaps.insert(c, b);
            }
            None => {
                out.placeholders.insert(c);
            }
        }
    }
    Ok(out)
}

/// Writes every bitmap as `<dir>/U+XXXX.pbm`.
pub fn save_glyph_dir(rendered: &RenderedAlphabet, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (c, b) in &rendered.bitmaps {
        let path = PbmDirectory::path_for(dir, *c);
        std::fs::write(&path, save_bitmap(b)).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
