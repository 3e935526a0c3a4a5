//! Benchmark interventions: value-label removal and axis expansion, per image
//! and over a whole QA manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::classify::identify_background;
use crate::eval::QaRecord;
use crate::model::Rgb;
use crate::ocr::{TextItem, TextRole};
use crate::pipeline::{convert, PipelineConfig};
use crate::raster::resample;
use crate::raster::RasterImage;

pub const MIN_FACTOR: f64 = 1.1;
pub const MAX_FACTOR: f64 = 3.0;
pub const HV_FACTORS: [f64; 3] = [1.25, 1.5, 2.0];
/// Pixels within this distance of a protected mark color are never painted over.
const PROTECT_TOLERANCE: f64 = 40.0;
/// Border pixels further than this from the background make a fill suspect.
const BORDER_TOLERANCE: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpandAxis {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbMode {
    Rl,
    Hv,
}

impl PerturbMode {
    pub fn suffix(self) -> &'static str {
        match self {
            PerturbMode::Rl => "_rl",
            PerturbMode::Hv => "_hv",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerturbError {
    #[error("expansion factor {0} outside [{MIN_FACTOR}, {MAX_FACTOR}]")]
    FactorOutOfRange(f64),
}

/// Outcome of erasing text regions.
#[derive(Debug, Clone, PartialEq)]
pub struct Removal {
    pub image: RasterImage,
    pub removed: usize,
    /// Indices into the input texts whose surroundings were not uniform background.
    pub nonuniform: Vec<usize>,
}

/// Paints the 1 px dilated box of every text whose role is in `roles` with the
/// background. Pixels matching a `protect` color are kept so marks crossing a
/// label box survive.
pub fn remove_text_roles(image: &RasterImage, texts: &[TextItem], roles: &[TextRole], protect: &[Rgb]) -> Removal {
    let background = identify_background(image);
    let mut out = image.clone();
    let (w, h) = (image.width() as i64, image.height() as i64);
    let mut removed = 0;
    let mut nonuniform = Vec::new();
    for (i, t) in texts.iter().enumerate() {
        if !roles.contains(&t.role) {
            continue;
        }
        removed += 1;
        let b = t.bbox.expand(1.0);
        let x0 = (b.x.floor() as i64).clamp(0, w);
        let y0 = (b.y.floor() as i64).clamp(0, h);
        let x1 = (b.right().ceil() as i64).clamp(0, w);
        let y1 = (b.bottom().ceil() as i64).clamp(0, h);
        let mut border_off = false;
        for y in y0..y1 {
            for x in x0..x1 {
                let c = image.get(x as u32, y as u32);
                if protect.iter().any(|p| p.distance(c) <= PROTECT_TOLERANCE) {
                    continue;
                }
                let on_border = y == y0 || y == y1 - 1 || x == x0 || x == x1 - 1;
                if on_border && c.distance(background) > BORDER_TOLERANCE {
                    border_off = true;
                }
                out.set(x as u32, y as u32, background);
            }
        }
        if border_off {
            nonuniform.push(i);
        }
    }
    Removal { image: out, removed, nonuniform }
}

/// Erases value labels and keeps every other text. `marks` holds series colors to preserve.
pub fn remove_value_labels(image: &RasterImage, texts: &[TextItem], marks: Option<&[Rgb]>) -> RasterImage {
    remove_text_roles(image, texts, &[TextRole::ValueLabel], marks.unwrap_or(&[])).image
}

/// Stretches one axis by `factor`.
pub fn expand(image: &RasterImage, axis: ExpandAxis, factor: f64) -> Result<RasterImage, PerturbError> {
    if !(MIN_FACTOR..=MAX_FACTOR).contains(&factor) {
        return Err(PerturbError::FactorOutOfRange(factor));
    }
    Ok(match axis {
        ExpandAxis::Horizontal => resample(image, factor, 1.0),
        ExpandAxis::Vertical => resample(image, 1.0, factor),
    })
}

/// Expansion factor drawn from `HV_FACTORS` with a generator seeded by the file name.
pub fn hv_factor(imgname: &str) -> f64 {
    let seed: [u8; 32] = Sha256::digest(imgname.as_bytes()).into();
    let mut rng = ChaCha8Rng::from_seed(seed);
    *HV_FACTORS.choose(&mut rng).expect("non-empty")
}

#[derive(Debug, Clone, Default)]
pub struct PerturbOptions {
    /// Extra roles erased in RL mode on top of value labels.
    pub also_strip: Vec<TextRole>,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
    pub pipeline: PipelineConfig,
}

/// Parses the `ticks,categories` list accepted by `--also-strip`.
pub fn parse_also_strip(list: &str) -> Result<Vec<TextRole>, String> {
    let mut roles = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match item {
            "ticks" => roles.extend([TextRole::TickY, TextRole::TickX]),
            "categories" => roles.push(TextRole::CategoryLabel),
            other => return Err(format!("unknown strip target {other:?}; expected ticks or categories")),
        }
    }
    Ok(roles)
}

/// What happened to one source image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageOutcome {
    pub source: String,
    pub output: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis: Option<ExpandAxis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub removed_labels: Option<usize>,
    /// Set when a label box sat on a non-uniform background.
    #[serde(default)]
    pub flagged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbRun {
    /// QA pairs pointing at perturbed images; pairs of failed images are dropped.
    pub records: Vec<QaRecord>,
    /// One entry per distinct source image, in first-appearance order.
    pub images: Vec<ImageOutcome>,
}

impl PerturbRun {
    pub fn failures(&self) -> impl Iterator<Item = &ImageOutcome> {
        self.images.iter().filter(|o| o.error.is_some())
    }
}

pub fn perturbed_name(imgname: &str, mode: PerturbMode) -> String {
    let p = Path::new(imgname);
    let stem = p.file_stem().map_or_else(|| imgname.to_string(), |s| s.to_string_lossy().into_owned());
    let name = format!("{stem}{}.png", mode.suffix());
    match p.parent().filter(|d| !d.as_os_str().is_empty()) {
        Some(dir) => dir.join(name).to_string_lossy().into_owned(),
        None => name,
    }
}

fn perturb_one(index: usize, imgname: &str, image_dir: &Path, out_dir: &Path, mode: PerturbMode, options: &PerturbOptions) -> ImageOutcome {
    let mut outcome = ImageOutcome {
        source: imgname.to_string(),
        output: None,
        axis: None,
        factor: None,
        removed_labels: None,
        flagged: false,
        error: None,
    };
    let result = (|| -> Result<String, String> {
        let image = RasterImage::load_png(image_dir.join(imgname)).map_err(|e| e.to_string())?;
        let perturbed = match mode {
            PerturbMode::Rl => {
                let conv = convert(&image, &options.pipeline).map_err(|e| e.to_string())?;
                let mut roles = vec![TextRole::ValueLabel];
                roles.extend(options.also_strip.iter().copied());
                let removal = remove_text_roles(&image, &conv.texts, &roles, &conv.profile.series_colors);
                outcome.removed_labels = Some(removal.removed);
                outcome.flagged = !removal.nonuniform.is_empty();
                removal.image
            }
            PerturbMode::Hv => {
                let axis = if index.is_multiple_of(2) { ExpandAxis::Horizontal } else { ExpandAxis::Vertical };
                let factor = hv_factor(imgname);
                outcome.axis = Some(axis);
                outcome.factor = Some(factor);
                expand(&image, axis, factor).map_err(|e| e.to_string())?
            }
        };
        let name = perturbed_name(imgname, mode);
        let path: PathBuf = out_dir.join(&name);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
        }
        perturbed.save_png(&path).map_err(|e| e.to_string())?;
        Ok(name)
    })();
    match result {
        Ok(name) => outcome.output = Some(name),
        Err(e) => {
            log::warn!("perturbing {imgname} failed: {e}");
            outcome.error = Some(e);
        }
    }
    outcome
}

/// Perturbs every distinct image of a manifest into `out_dir` and rewrites the
/// QA pairs to point at the results. Output does not depend on scheduling.
pub fn perturb_dataset(records: &[QaRecord], image_dir: &Path, out_dir: &Path, mode: PerturbMode, options: &PerturbOptions) -> PerturbRun {
    let mut order: Vec<&str> = Vec::new();
    let mut seen = BTreeMap::new();
    for r in records {
        seen.entry(r.imgname.as_str()).or_insert_with(|| {
            order.push(r.imgname.as_str());
            order.len() - 1
        });
    }
    let work = || -> Vec<ImageOutcome> {
        order
            .par_iter()
            .enumerate()
            .map(|(i, name)| perturb_one(i, name, image_dir, out_dir, mode, options))
            .collect()
    };
    let images = match options.jobs {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(work),
            Err(_) => work(),
        },
        None => work(),
    };
    let records = records
        .iter()
        .filter_map(|r| {
            let out = images[seen[r.imgname.as_str()]].output.as_ref()?;
            Some(QaRecord { imgname: out.clone(), ..r.clone() })
        })
        .collect();
    PerturbRun { records, images }
}
