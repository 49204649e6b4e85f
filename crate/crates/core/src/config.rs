//! Run configuration: the six model variants and the `key = value` config
//! file that carries every tunable the pipeline exposes.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::channels::{AugmentConfig, Normalization, VesselPolarity};
use crate::mask::LabelMap;
use crate::model::{BackboneConfig, LogisticConfig, TrainConfig};

/// The six model configurations under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// 5-channel input (RGB + vessel + reduced) with VCDR fusion.
    Proposed,
    /// RGB input with VCDR fusion.
    FundusVcdr,
    /// RGB input only.
    Fundus,
    /// Trimap rendered to gray and repeated over three channels, with fusion.
    MaskVcdr,
    /// Repeated trimap channels only.
    Mask,
    /// Logistic regression on the VCDR scalar alone.
    VcdrLogistic,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Proposed,
        Variant::FundusVcdr,
        Variant::Fundus,
        Variant::MaskVcdr,
        Variant::Mask,
        Variant::VcdrLogistic,
    ];

    pub fn code(self) -> u8 {
        match self {
            Variant::Proposed => 0,
            Variant::FundusVcdr => 1,
            Variant::Fundus => 2,
            Variant::MaskVcdr => 3,
            Variant::Mask => 4,
            Variant::VcdrLogistic => 5,
        }
    }

    pub fn from_code(code: u8) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.code() == code)
    }

    pub fn in_channels(self) -> usize {
        match self {
            Variant::Proposed => 5,
            _ => 3,
        }
    }

    pub fn uses_vcdr_fusion(self) -> bool {
        matches!(
            self,
            Variant::Proposed | Variant::FundusVcdr | Variant::MaskVcdr
        )
    }

    pub fn is_logistic(self) -> bool {
        matches!(self, Variant::VcdrLogistic)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Variant::Proposed => "proposed",
            Variant::FundusVcdr => "fundus_vcdr",
            Variant::Fundus => "fundus",
            Variant::MaskVcdr => "mask_vcdr",
            Variant::Mask => "mask",
            Variant::VcdrLogistic => "vcdr_logistic",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for Variant {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proposed" => Ok(Variant::Proposed),
            "fundus_vcdr" => Ok(Variant::FundusVcdr),
            "fundus" => Ok(Variant::Fundus),
            "mask_vcdr" => Ok(Variant::MaskVcdr),
            "mask" => Ok(Variant::Mask),
            "vcdr_logistic" => Ok(Variant::VcdrLogistic),
            _ => Err(()),
        }
    }
}

/// How quantization milestones are derived from the region statistics.
/// `MeanBand` places one milestone at `mean - band` and one at `mean + band`
/// for each region mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MilestoneStrategy {
    #[default]
    MeanBand,
}

impl std::str::FromStr for MilestoneStrategy {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean_band" => Ok(MilestoneStrategy::MeanBand),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Every tunable of the pipeline with its default. Loaded from an optional
/// `key = value` file; command-line flags override afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub variant: Variant,
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub flip_probability: f64,
    pub blur_probability: f64,
    pub blur_sigma_min: f64,
    pub blur_sigma_max: f64,
    pub norm_mean_rgb: [f64; 3],
    pub norm_std_rgb: [f64; 3],
    pub norm_mean_aux: [f64; 2],
    pub norm_std_aux: [f64; 2],
    pub milestone_strategy: MilestoneStrategy,
    /// Half-width of the tolerance band around each region mean.
    pub milestone_band: f64,
    pub label_background: u8,
    pub label_rim: u8,
    pub label_cup: u8,
    pub vessel_polarity: VesselPolarity,
    pub block_widths: Vec<usize>,
    /// Defaults to the last block width when absent.
    pub feature_dim: Option<usize>,
    /// Average-pool factor applied to assembled inputs before the backbone.
    pub input_downsample: u32,
    pub logistic_iterations: usize,
    pub logistic_learning_rate: f64,
    pub synth_samples: usize,
    pub synth_overlap: bool,
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Proposed,
            seed: 0,
            epochs: 20,
            learning_rate: 0.05,
            momentum: 0.9,
            batch_size: 32,
            flip_probability: 0.5,
            blur_probability: 0.25,
            blur_sigma_min: 0.5,
            blur_sigma_max: 1.5,
            norm_mean_rgb: [0.485, 0.456, 0.406],
            norm_std_rgb: [0.229, 0.224, 0.225],
            norm_mean_aux: [0.5, 0.5],
            norm_std_aux: [0.5, 0.5],
            milestone_strategy: MilestoneStrategy::MeanBand,
            milestone_band: 20.0,
            label_background: 255,
            label_rim: 128,
            label_cup: 0,
            vessel_polarity: VesselPolarity::DarkBelowThreshold,
            block_widths: vec![8, 16],
            feature_dim: None,
            input_downsample: 8,
            logistic_iterations: 500,
            logistic_learning_rate: 1.0,
            synth_samples: 200,
            synth_overlap: false,
            manifest: None,
            out: None,
        }
    }
}

fn parse<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse::<T>().map_err(|_| ConfigError::Parse {
        line,
        message: format!("cannot parse {key} value {value:?}"),
    })
}

fn parse_list<const N: usize>(
    line: usize,
    key: &str,
    value: &str,
) -> Result<[f64; N], ConfigError> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(ConfigError::Parse {
            line,
            message: format!("{key} needs {N} comma-separated values"),
        });
    }
    let mut out = [0.0; N];
    for (slot, part) in out.iter_mut().zip(parts) {
        *slot = parse::<f64>(line, key, part)?;
    }
    Ok(out)
}

impl RunConfig {
    /// Parse a config file, starting from the defaults. Lines are
    /// `key = value`; `#` starts a comment; unknown keys are errors.
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = RunConfig::default();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Parse {
                    line: line_no,
                    message: "expected `key = value`".into(),
                });
            };
            config.apply(line_no, key.trim(), value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }

    fn apply(&mut self, line: usize, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "variant" => {
                self.variant = value.parse().map_err(|_| ConfigError::Parse {
                    line,
                    message: format!("unknown variant {value:?}"),
                })?;
            }
            "seed" => self.seed = parse(line, key, value)?,
            "epochs" => self.epochs = parse(line, key, value)?,
            "learning_rate" => self.learning_rate = parse(line, key, value)?,
            "momentum" => self.momentum = parse(line, key, value)?,
            "batch_size" => self.batch_size = parse(line, key, value)?,
            "flip_probability" => self.flip_probability = parse(line, key, value)?,
            "blur_probability" => self.blur_probability = parse(line, key, value)?,
            "blur_sigma_min" => self.blur_sigma_min = parse(line, key, value)?,
            "blur_sigma_max" => self.blur_sigma_max = parse(line, key, value)?,
            "norm_mean_rgb" => self.norm_mean_rgb = parse_list(line, key, value)?,
            "norm_std_rgb" => self.norm_std_rgb = parse_list(line, key, value)?,
            "norm_mean_aux" => self.norm_mean_aux = parse_list(line, key, value)?,
            "norm_std_aux" => self.norm_std_aux = parse_list(line, key, value)?,
            "milestone_strategy" => {
                self.milestone_strategy = value.parse().map_err(|_| ConfigError::Parse {
                    line,
                    message: format!("unknown milestone strategy {value:?}"),
                })?;
            }
            "milestone_band" => self.milestone_band = parse(line, key, value)?,
            "label_background" => self.label_background = parse(line, key, value)?,
            "label_rim" => self.label_rim = parse(line, key, value)?,
            "label_cup" => self.label_cup = parse(line, key, value)?,
            "vessel_polarity" => {
                self.vessel_polarity = match value {
                    "dark" => VesselPolarity::DarkBelowThreshold,
                    "bright" => VesselPolarity::BrightAboveThreshold,
                    _ => {
                        return Err(ConfigError::Parse {
                            line,
                            message: format!(
                                "vessel_polarity must be dark or bright, got {value:?}"
                            ),
                        })
                    }
                };
            }
            "block_widths" => {
                let widths: Result<Vec<usize>, _> = value
                    .split(',')
                    .map(|part| part.trim().parse::<usize>())
                    .collect();
                self.block_widths = widths.map_err(|_| ConfigError::Parse {
                    line,
                    message: format!(
                        "block_widths must be comma-separated integers, got {value:?}"
                    ),
                })?;
            }
            "feature_dim" => self.feature_dim = Some(parse(line, key, value)?),
            "input_downsample" => self.input_downsample = parse(line, key, value)?,
            "logistic_iterations" => self.logistic_iterations = parse(line, key, value)?,
            "logistic_learning_rate" => self.logistic_learning_rate = parse(line, key, value)?,
            "synth_samples" => self.synth_samples = parse(line, key, value)?,
            "synth_overlap" => self.synth_overlap = parse(line, key, value)?,
            "manifest" => self.manifest = Some(PathBuf::from(value)),
            "out" => self.out = Some(PathBuf::from(value)),
            _ => {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("unknown key {key:?}"),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, p) in [
            ("flip_probability", self.flip_probability),
            ("blur_probability", self.blur_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ConfigError::Invalid(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if self.milestone_band <= 0.0 {
            return Err(ConfigError::Invalid(format!(
                "milestone_band must be positive, got {}",
                self.milestone_band
            )));
        }
        if self.block_widths.is_empty() {
            return Err(ConfigError::Invalid("block_widths is empty".into()));
        }
        if let Some(dim) = self.feature_dim {
            if Some(&dim) != self.block_widths.last() {
                return Err(ConfigError::Invalid(format!(
                    "feature_dim {dim} must equal the last block width {}",
                    self.block_widths.last().unwrap()
                )));
            }
        }
        if self.input_downsample == 0 {
            return Err(ConfigError::Invalid("input_downsample must be >= 1".into()));
        }
        if self.blur_sigma_min > self.blur_sigma_max || self.blur_sigma_min < 0.0 {
            return Err(ConfigError::Invalid("bad blur sigma range".into()));
        }
        let map = self.label_map();
        if !map.is_distinct() {
            return Err(ConfigError::Invalid(
                "label gray levels must be pairwise distinct".into(),
            ));
        }
        Ok(())
    }

    pub fn label_map(&self) -> LabelMap {
        LabelMap {
            background: self.label_background,
            rim: self.label_rim,
            cup: self.label_cup,
        }
    }

    pub fn normalization(&self) -> Normalization {
        Normalization {
            mean: [
                self.norm_mean_rgb[0],
                self.norm_mean_rgb[1],
                self.norm_mean_rgb[2],
                self.norm_mean_aux[0],
                self.norm_mean_aux[1],
            ],
            std: [
                self.norm_std_rgb[0],
                self.norm_std_rgb[1],
                self.norm_std_rgb[2],
                self.norm_std_aux[0],
                self.norm_std_aux[1],
            ],
        }
    }

    pub fn augment_config(&self) -> AugmentConfig {
        AugmentConfig {
            flip_probability: self.flip_probability,
            blur_probability: self.blur_probability,
            blur_sigma: (self.blur_sigma_min, self.blur_sigma_max),
        }
    }

    pub fn backbone_config(&self) -> BackboneConfig {
        BackboneConfig {
            in_channels: self.variant.in_channels(),
            block_widths: self.block_widths.clone(),
            feature_dim: self
                .feature_dim
                .unwrap_or_else(|| *self.block_widths.last().unwrap()),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            batch_size: self.batch_size,
            seed: self.seed,
            augment: self.augment_config(),
        }
    }

    pub fn logistic_config(&self) -> LogisticConfig {
        LogisticConfig {
            iterations: self.logistic_iterations,
            learning_rate: self.logistic_learning_rate,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load_str(body: &str) -> Result<RunConfig, ConfigError> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, body).unwrap();
        RunConfig::load(&path)
    }

    #[test]
    fn empty_config_is_defaults() {
        let config = load_str("").unwrap();
        assert_eq!(config, RunConfig::default());
    }

    #[test]
    fn keys_override_defaults() {
        let config = load_str(
            "# comment\n\
             variant = fundus\n\
             seed = 7\n\
             epochs = 3\n\
             block_widths = 4, 8\n\
             milestone_band = 15\n\
             vessel_polarity = bright\n",
        )
        .unwrap();
        assert_eq!(config.variant, Variant::Fundus);
        assert_eq!(config.seed, 7);
        assert_eq!(config.epochs, 3);
        assert_eq!(config.block_widths, vec![4, 8]);
        assert_eq!(config.milestone_band, 15.0);
        assert_eq!(config.vessel_polarity, VesselPolarity::BrightAboveThreshold);
    }

    #[test]
    fn unknown_key_is_an_error() {
        assert!(matches!(
            load_str("no_such_key = 1\n"),
            Err(ConfigError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn bad_value_reports_line() {
        assert!(matches!(
            load_str("seed = 1\nepochs = many\n"),
            Err(ConfigError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn invalid_band_is_rejected() {
        assert!(matches!(
            load_str("milestone_band = 0\n"),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn mismatched_feature_dim_is_rejected() {
        assert!(matches!(
            load_str("block_widths = 4,8\nfeature_dim = 4\n"),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn variant_codes_round_trip() {
        for variant in Variant::ALL {
            assert_eq!(Variant::from_code(variant.code()), Some(variant));
            assert_eq!(variant.to_string().parse::<Variant>(), Ok(variant));
        }
    }

    #[test]
    fn variant_channel_table() {
        assert_eq!(Variant::Proposed.in_channels(), 5);
        assert!(Variant::Proposed.uses_vcdr_fusion());
        assert_eq!(Variant::FundusVcdr.in_channels(), 3);
        assert!(Variant::FundusVcdr.uses_vcdr_fusion());
        assert!(!Variant::Fundus.uses_vcdr_fusion());
        assert!(Variant::MaskVcdr.uses_vcdr_fusion());
        assert!(!Variant::Mask.uses_vcdr_fusion());
        assert!(Variant::VcdrLogistic.is_logistic());
    }
}
