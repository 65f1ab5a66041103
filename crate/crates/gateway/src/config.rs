//! TOML service configuration. Relative paths resolve against the directory
//! of the config file.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use leafdx_core::imaging::EnhanceParams;
use leafdx_core::pipeline::AnalysisConfig;
use leafdx_core::segmentation::{Connectivity, Polarity, ThresholdMode, ThresholdSpec, DEFAULT_LEVELS, DEFAULT_MIN_SPOT_AREA};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Otsu,
    Fixed,
}

/// One thresholding stage. `threshold` is required for `mode = "fixed"`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    pub mode: ModeName,
    pub threshold: Option<f64>,
    pub polarity: Polarity,
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default)]
    pub min_mode_gap: f64,
}

fn default_levels() -> usize {
    DEFAULT_LEVELS
}

impl ThresholdConfig {
    fn from_spec(s: &ThresholdSpec<f64>) -> Self {
        let (mode, threshold) = match s.mode {
            ThresholdMode::Otsu => (ModeName::Otsu, None),
            ThresholdMode::Fixed(v) => (ModeName::Fixed, Some(v)),
        };
        ThresholdConfig { mode, threshold, polarity: s.polarity, levels: s.levels, min_mode_gap: s.min_mode_gap }
    }

    fn to_spec(self, stage: &str) -> anyhow::Result<ThresholdSpec<f64>> {
        let mode = match (self.mode, self.threshold) {
            (ModeName::Otsu, _) => ThresholdMode::Otsu,
            (ModeName::Fixed, Some(v)) => ThresholdMode::Fixed(v),
            (ModeName::Fixed, None) => bail!("{stage}: mode \"fixed\" needs a threshold"),
        };
        if self.levels < 2 {
            bail!("{stage}: levels must be at least 2");
        }
        if !(self.min_mode_gap >= 0.0) {
            bail!("{stage}: min_mode_gap must be non-negative");
        }
        Ok(ThresholdSpec { mode, polarity: self.polarity, levels: self.levels, min_mode_gap: self.min_mode_gap })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnhanceConfig {
    pub brightness_delta: f64,
    pub contrast_gain: f64,
}

/// The `[analysis]` table.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub enhance: EnhanceConfig,
    pub saturation: ThresholdConfig,
    pub hue: ThresholdConfig,
    pub connectivity: u8,
    pub min_spot_area: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        let d = AnalysisConfig::<f64>::default();
        AnalysisSection {
            enhance: EnhanceConfig { brightness_delta: d.enhance.brightness_delta, contrast_gain: d.enhance.contrast_gain },
            saturation: ThresholdConfig::from_spec(&d.saturation),
            hue: ThresholdConfig::from_spec(&d.hue),
            connectivity: 8,
            min_spot_area: DEFAULT_MIN_SPOT_AREA,
        }
    }
}

impl AnalysisSection {
    pub fn to_analysis(&self) -> anyhow::Result<AnalysisConfig<f64>> {
        let e = self.enhance;
        if !(e.contrast_gain > 0.0 && e.contrast_gain.is_finite() && e.brightness_delta.is_finite()) {
            bail!("enhance: contrast_gain must be positive and both values finite");
        }
        if self.min_spot_area == 0 {
            bail!("min_spot_area must be at least 1");
        }
        Ok(AnalysisConfig {
            enhance: EnhanceParams { brightness_delta: e.brightness_delta, contrast_gain: e.contrast_gain },
            saturation: self.saturation.to_spec("saturation")?,
            hue: self.hue.to_spec("hue")?,
            connectivity: Connectivity::try_from(self.connectivity).map_err(anyhow::Error::msg)?,
            min_spot_area: self.min_spot_area,
        })
    }
}

/// Everything `serve` needs.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_listen")]
    pub listen: SocketAddr,
    #[serde(default = "default_locale")]
    pub default_locale: String,
    pub model: PathBuf,
    pub taxonomy: PathBuf,
    pub knowledge_base: PathBuf,
    pub faq: PathBuf,
    pub messages: Option<PathBuf>,
    /// Served at `/` when set, e.g. a built front end.
    pub static_dir: Option<PathBuf>,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

fn default_listen() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 8080))
}

fn default_locale() -> String {
    leafdx_core::iconquery::DEFAULT_LOCALE.to_string()
}

impl PipelineConfig {
    pub fn from_toml(text: &str, base: &Path) -> anyhow::Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text)?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut cfg.model, &mut cfg.taxonomy, &mut cfg.knowledge_base, &mut cfg.faq] {
            resolve(p);
        }
        for p in [cfg.messages.as_mut(), cfg.static_dir.as_mut()].into_iter().flatten() {
            resolve(p);
        }
        cfg.analysis.to_analysis()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).with_context(|| format!("in {}", path.display()))
    }

    /// Every referenced file must exist before the service starts.
    pub fn check_files(&self) -> anyhow::Result<()> {
        let files = [Some(&self.model), Some(&self.taxonomy), Some(&self.knowledge_base), Some(&self.faq), self.messages.as_ref()];
        for f in files.into_iter().flatten() {
            if !f.is_file() {
                bail!("missing file {}", f.display());
            }
        }
        if let Some(d) = &self.static_dir {
            if !d.is_dir() {
                bail!("missing directory {}", d.display());
            }
        }
        Ok(())
    }
}
