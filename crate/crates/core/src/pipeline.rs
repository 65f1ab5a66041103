//! The fixed image-to-diagnosis chain, with per-stage timings, and corpus
//! loading on top of it.

use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use crate::classifier::{classify_image, ClassifierError, Diagnosis, DiseaseClass, LabeledImage, MlpModel, Sample};
use crate::features::{extract_features, FeatureVector};
use crate::imaging::{enhance, load_image, normalize_size, rgb_to_hsi, EnhanceParams, ImagingError, RgbImage};
use crate::scalar::Scalar;
use crate::segmentation::{
    binary_saturation_mask, label_components, mask_hue, masked_hue_histogram, min_spot_filter,
    threshold_segment_with_histogram, BinaryMask, Connectivity, SegmentationError, Spot, ThresholdSpec,
    DEFAULT_MIN_SPOT_AREA,
};
use crate::synth::{CorpusManifest, ManifestEntry, Split, SynthError, MANIFEST_FILE};

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Normalize,
    Enhance,
    RgbToHsi,
    BinarySaturationMask,
    MaskHue,
    Histogram,
    ThresholdSegment,
    LabelComponents,
    MinSpotFilter,
    ExtractFeatures,
    ClassifyImage,
}

impl Stage {
    pub const ALL: [Stage; 11] = [
        Stage::Normalize,
        Stage::Enhance,
        Stage::RgbToHsi,
        Stage::BinarySaturationMask,
        Stage::MaskHue,
        Stage::Histogram,
        Stage::ThresholdSegment,
        Stage::LabelComponents,
        Stage::MinSpotFilter,
        Stage::ExtractFeatures,
        Stage::ClassifyImage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Normalize => "normalize",
            Stage::Enhance => "enhance",
            Stage::RgbToHsi => "rgb_to_hsi",
            Stage::BinarySaturationMask => "binary_saturation_mask",
            Stage::MaskHue => "mask_hue",
            Stage::Histogram => "histogram",
            Stage::ThresholdSegment => "threshold_segment",
            Stage::LabelComponents => "label_components",
            Stage::MinSpotFilter => "min_spot_filter",
            Stage::ExtractFeatures => "extract_features",
            Stage::ClassifyImage => "classify_image",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub millis: f64,
}

/// Stage timings in execution order.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
#[serde(transparent)]
pub struct Timings(pub Vec<StageTiming>);

impl Timings {
    fn time<R>(&mut self, stage: Stage, f: impl FnOnce() -> R) -> R {
        let t = Instant::now();
        let r = f();
        self.0.push(StageTiming { stage, millis: t.elapsed().as_secs_f64() * 1e3 });
        r
    }

    pub fn stages(&self) -> Vec<Stage> {
        self.0.iter().map(|t| t.stage).collect()
    }
}

/// Image-side parameters of the chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisConfig<T> {
    pub enhance: EnhanceParams<T>,
    pub saturation: ThresholdSpec<T>,
    pub hue: ThresholdSpec<T>,
    pub connectivity: Connectivity,
    pub min_spot_area: usize,
}

impl<T: Scalar> Default for AnalysisConfig<T> {
    fn default() -> Self {
        AnalysisConfig {
            enhance: EnhanceParams::default(),
            saturation: ThresholdSpec::saturation_default(),
            hue: ThresholdSpec::hue_default(),
            connectivity: Connectivity::Eight,
            min_spot_area: DEFAULT_MIN_SPOT_AREA,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Decode(#[from] ImagingError),
    #[error(transparent)]
    Segmentation(#[from] SegmentationError),
    #[error(transparent)]
    Classifier(ClassifierError),
    #[error("no disease spots found in the image")]
    Undiagnosable { timings: Timings },
}

/// Everything up to and including feature extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis<T> {
    pub spots: Vec<Spot>,
    pub features: Vec<FeatureVector<T>>,
    pub segmented: BinaryMask,
    pub timings: Timings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput<T> {
    pub diagnosis: Diagnosis<T>,
    pub spots: Vec<Spot>,
    pub features: Vec<FeatureVector<T>>,
    pub timings: Timings,
}

/// A single-bin histogram has no second mode, so nothing is foreground.
fn or_empty(r: Result<BinaryMask, SegmentationError>, dims: (usize, usize)) -> Result<BinaryMask, SegmentationError> {
    match r {
        Err(SegmentationError::DegenerateHistogram { .. }) => Ok(BinaryMask::empty(dims.0, dims.1)),
        other => other,
    }
}

pub fn analyze<T: Scalar>(img: &RgbImage<T>, cfg: &AnalysisConfig<T>) -> Result<Analysis<T>, PipelineError> {
    let mut tm = Timings::default();
    let img = tm.time(Stage::Normalize, || normalize_size(img))?;
    let img = tm.time(Stage::Enhance, || enhance(&img, &cfg.enhance))?;
    let hsi = tm.time(Stage::RgbToHsi, || rgb_to_hsi(&img));
    let dims = hsi.dims();
    let bsm = tm.time(Stage::BinarySaturationMask, || {
        or_empty(binary_saturation_mask(&hsi.saturation, &cfg.saturation), dims)
    })?;
    let masked = tm.time(Stage::MaskHue, || mask_hue(&hsi.hue, &bsm))?;
    let hist = tm.time(Stage::Histogram, || masked_hue_histogram(&masked, cfg.hue.levels))?;
    let segmented = tm.time(Stage::ThresholdSegment, || {
        if masked.valid_count() == 0 {
            return Ok(BinaryMask::empty(dims.0, dims.1));
        }
        or_empty(threshold_segment_with_histogram(&masked, &cfg.hue, &hist), dims)
    })?;
    let labeled = tm.time(Stage::LabelComponents, || label_components(&segmented, cfg.connectivity));
    let kept = tm.time(Stage::MinSpotFilter, || min_spot_filter(&labeled, cfg.min_spot_area));
    let features = tm.time(Stage::ExtractFeatures, || kept.regions.iter().map(extract_features).collect());
    Ok(Analysis { spots: kept.regions, features, segmented, timings: tm })
}

/// Decodes, analyzes and classifies one image.
pub fn run_pipeline<T: Scalar>(
    bytes: &[u8],
    image_id: &str,
    cfg: &AnalysisConfig<T>,
    model: &MlpModel<T>,
) -> Result<PipelineOutput<T>, PipelineError> {
    let img = load_image(bytes)?;
    run_pipeline_on_image(&img, image_id, cfg, model)
}

pub fn run_pipeline_on_image<T: Scalar>(
    img: &RgbImage<T>,
    image_id: &str,
    cfg: &AnalysisConfig<T>,
    model: &MlpModel<T>,
) -> Result<PipelineOutput<T>, PipelineError> {
    let Analysis { spots, features, mut timings, .. } = analyze(img, cfg)?;
    match timings.time(Stage::ClassifyImage, || classify_image(model, image_id, &features)) {
        Ok(diagnosis) => Ok(PipelineOutput { diagnosis, spots, features, timings }),
        Err(ClassifierError::NoSpots) => Err(PipelineError::Undiagnosable { timings }),
        Err(e) => Err(PipelineError::Classifier(e)),
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Manifest(#[from] SynthError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("no images under {0}")]
    Empty(PathBuf),
    #[error("{path}: {source}")]
    Image { path: PathBuf, source: PipelineError },
}

/// Per-spot training samples and per-image test sets of a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusData<T> {
    pub train: Vec<Sample<T>>,
    pub train_images: usize,
    pub test: Vec<LabeledImage<T>>,
}

/// Image files of a corpus root. Uses `manifest.csv` when present; otherwise
/// scans `{train,test}/{leafblast,brownspot}/` for PNG and Netpbm files in
/// name order, which is how a hand-collected corpus is laid out.
pub fn corpus_entries(root: &Path) -> Result<Vec<ManifestEntry>, CorpusError> {
    if root.join(MANIFEST_FILE).exists() {
        return Ok(CorpusManifest::read(root)?.entries);
    }
    let mut entries = Vec::new();
    for split in [Split::Train, Split::Test] {
        for class in DiseaseClass::ALL {
            let dir = root.join(split.as_str()).join(class.slug());
            let Ok(listing) = std::fs::read_dir(&dir) else { continue };
            let mut names: Vec<String> = listing
                .filter_map(|e| e.ok())
                .filter_map(|e| e.file_name().into_string().ok())
                .filter(|n| {
                    let lower = n.to_ascii_lowercase();
                    !lower.ends_with(".truth.pgm") && IMAGE_EXTENSIONS.iter().any(|x| lower.ends_with(x))
                })
                .collect();
            names.sort();
            for n in names {
                let path = format!("{}/{}/{n}", split.as_str(), class.slug());
                entries.push(ManifestEntry { path, split, class, seed: 0 });
            }
        }
    }
    if entries.is_empty() {
        return Err(CorpusError::Empty(root.to_path_buf()));
    }
    Ok(entries)
}

const IMAGE_EXTENSIONS: [&str; 5] = [".png", ".ppm", ".pgm", ".pnm", ".pbm"];

/// Analyzes every image of the corpus under `root`.
pub fn load_corpus<T: Scalar>(root: &Path, cfg: &AnalysisConfig<T>) -> Result<CorpusData<T>, CorpusError> {
    let entries = corpus_entries(root)?;
    let mut data = CorpusData { train: Vec::new(), train_images: 0, test: Vec::new() };
    for e in &entries {
        let features = analyze_file(&root.join(&e.path), cfg)?;
        match e.split {
            Split::Train => {
                data.train_images += 1;
                data.train.extend(features.iter().map(|f| Sample::from_features(f, e.class)));
            }
            Split::Test => data.test.push(LabeledImage { id: e.path.clone(), class: e.class, spots: features }),
        }
    }
    Ok(data)
}

fn analyze_file<T: Scalar>(path: &Path, cfg: &AnalysisConfig<T>) -> Result<Vec<FeatureVector<T>>, CorpusError> {
    let bytes = std::fs::read(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    let image = |source: PipelineError| CorpusError::Image { path: path.to_path_buf(), source };
    let img = load_image(&bytes).map_err(|e| image(e.into()))?;
    Ok(analyze(&img, cfg).map_err(image)?.features)
}
