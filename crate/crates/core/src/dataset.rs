//! Dataset manifests, image loading, and disc-centered ROI cropping.
//!
//! A manifest is a UTF-8 CSV with header `image,mask,label,split`; relative
//! paths resolve against the manifest's own directory so generated datasets
//! stay relocatable.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use image::{GrayImage, RgbImage};
use thiserror::Error;

use crate::mask::{LabelMap, MaskError, TriMask};
use crate::Label;

/// Side length of the region-of-interest crop every model input uses.
pub const ROI_SIZE: u32 = 256;

/// Window side = `max(disc bounding-box side * this, ROI_SIZE)`, so enough
/// background survives the crop for the background mean to be meaningful.
pub const CROP_MARGIN_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Val => write!(f, "val"),
            Split::Test => write!(f, "test"),
        }
    }
}

impl std::str::FromStr for Split {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("manifest row {0} is malformed")]
    MalformedRow(usize),
    #[error("manifest row {line}: unknown label {value:?}")]
    UnknownLabel { line: usize, value: String },
    #[error("manifest row {line}: unknown split {value:?}")]
    UnknownSplit { line: usize, value: String },
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("failed to decode {path}: {source}")]
    Decode {
        path: PathBuf,
        source: image::ImageError,
    },
    #[error("{path}: mask is not a single-channel grayscale image")]
    NotGrayscale { path: PathBuf },
    #[error("mask error: {0}")]
    Mask(#[from] MaskError),
    #[error("image is {got_w}x{got_h}, expected {want}x{want}")]
    NotRoiSized { got_w: u32, got_h: u32, want: u32 },
}

/// One dataset entry. Paths are stored as written in the manifest and
/// resolved lazily against the manifest directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub image: PathBuf,
    pub mask: PathBuf,
    pub label: Label,
    pub split: Split,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    rows: Vec<ManifestRow>,
    base_dir: PathBuf,
}

impl Manifest {
    pub fn new(rows: Vec<ManifestRow>, base_dir: PathBuf) -> Self {
        Self { rows, base_dir }
    }

    /// Parse and validate a manifest CSV.
    pub fn load(path: &Path) -> Result<Manifest, DataError> {
        let text = std::fs::read_to_string(path).map_err(|source| {
            if source.kind() == std::io::ErrorKind::NotFound {
                DataError::MissingFile(path.to_path_buf())
            } else {
                DataError::Io {
                    path: path.to_path_buf(),
                    source,
                }
            }
        })?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "image,mask,label,split" => {}
            _ => return Err(DataError::MalformedRow(1)),
        }
        let mut rows = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 || fields.iter().any(|f| f.is_empty()) {
                return Err(DataError::MalformedRow(line_no));
            }
            let label = fields[2]
                .parse::<Label>()
                .map_err(|_| DataError::UnknownLabel {
                    line: line_no,
                    value: fields[2].to_string(),
                })?;
            let split = fields[3]
                .parse::<Split>()
                .map_err(|_| DataError::UnknownSplit {
                    line: line_no,
                    value: fields[3].to_string(),
                })?;
            rows.push(ManifestRow {
                image: PathBuf::from(fields[0]),
                mask: PathBuf::from(fields[1]),
                label,
                split,
            });
        }
        let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok(Manifest { rows, base_dir })
    }

    /// Serialize back to the CSV format accepted by [`Manifest::load`].
    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        let mut out = String::from("image,mask,label,split\n");
        for row in &self.rows {
            writeln!(
                out,
                "{},{},{},{}",
                row.image.display(),
                row.mask.display(),
                row.label,
                row.split
            )
            .expect("string write cannot fail");
        }
        std::fs::write(path, out).map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn rows(&self) -> &[ManifestRow] {
        &self.rows
    }

    pub fn split_rows(&self, split: Split) -> Vec<&ManifestRow> {
        self.rows.iter().filter(|r| r.split == split).collect()
    }

    /// Resolve a row path against the manifest directory.
    pub fn resolve(&self, relative: &Path) -> PathBuf {
        if relative.is_absolute() {
            relative.to_path_buf()
        } else {
            self.base_dir.join(relative)
        }
    }

    /// `(glaucoma, normal)` counts per split, in `Split::ALL` order.
    pub fn split_counts(&self) -> [(usize, usize); 3] {
        let mut counts = [(0usize, 0usize); 3];
        for row in &self.rows {
            let slot = match row.split {
                Split::Train => 0,
                Split::Val => 1,
                Split::Test => 2,
            };
            match row.label {
                Label::Glaucoma => counts[slot].0 += 1,
                Label::Normal => counts[slot].1 += 1,
            }
        }
        counts
    }
}

/// A 256x256 RGB region of interest. Construction validates the dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoiImage(RgbImage);

impl RoiImage {
    pub fn new(image: RgbImage) -> Result<Self, DataError> {
        if image.width() != ROI_SIZE || image.height() != ROI_SIZE {
            return Err(DataError::NotRoiSized {
                got_w: image.width(),
                got_h: image.height(),
                want: ROI_SIZE,
            });
        }
        Ok(Self(image))
    }

    pub fn zeroed() -> Self {
        Self(RgbImage::new(ROI_SIZE, ROI_SIZE))
    }

    pub fn image(&self) -> &RgbImage {
        &self.0
    }

    pub fn into_inner(self) -> RgbImage {
        self.0
    }
}

/// Load a 3-channel image (PNG or JPEG).
pub fn load_rgb(path: &Path) -> Result<RgbImage, DataError> {
    let dynamic = image::open(path).map_err(|source| match source {
        image::ImageError::IoError(e) if e.kind() == std::io::ErrorKind::NotFound => {
            DataError::MissingFile(path.to_path_buf())
        }
        source => DataError::Decode {
            path: path.to_path_buf(),
            source,
        },
    })?;
    Ok(dynamic.into_rgb8())
}

/// Load a mask as 8-bit grayscale. RGB files are accepted only when all
/// three channels agree on every pixel.
pub fn load_gray(path: &Path) -> Result<GrayImage, DataError> {
    let dynamic = image::open(path).map_err(|source| match source {
        image::ImageError::IoError(e) if e.kind() == std::io::ErrorKind::NotFound => {
            DataError::MissingFile(path.to_path_buf())
        }
        source => DataError::Decode {
            path: path.to_path_buf(),
            source,
        },
    })?;
    match dynamic {
        image::DynamicImage::ImageLuma8(gray) => Ok(gray),
        image::DynamicImage::ImageRgb8(rgb) => {
            let mut gray = GrayImage::new(rgb.width(), rgb.height());
            for (x, y, pixel) in rgb.enumerate_pixels() {
                let [r, g, b] = pixel.0;
                if r != g || g != b {
                    return Err(DataError::NotGrayscale {
                        path: path.to_path_buf(),
                    });
                }
                gray.put_pixel(x, y, image::Luma([r]));
            }
            Ok(gray)
        }
        _ => Err(DataError::NotGrayscale {
            path: path.to_path_buf(),
        }),
    }
}

/// Load and parse a mask file in one step.
pub fn load_mask(path: &Path, map: &LabelMap) -> Result<TriMask, DataError> {
    let gray = load_gray(path)?;
    Ok(crate::mask::parse_mask(&gray, map)?)
}

fn bilinear_sample(image: &RgbImage, x: f64, y: f64, channel: usize) -> f64 {
    let max_x = (image.width() - 1) as f64;
    let max_y = (image.height() - 1) as f64;
    let cx = x.clamp(0.0, max_x);
    let cy = y.clamp(0.0, max_y);
    let x0 = cx.floor() as u32;
    let y0 = cy.floor() as u32;
    let x1 = (x0 + 1).min(image.width() - 1);
    let y1 = (y0 + 1).min(image.height() - 1);
    let dx = cx - x0 as f64;
    let dy = cy - y0 as f64;
    let v00 = image.get_pixel(x0, y0).0[channel] as f64;
    let v10 = image.get_pixel(x1, y0).0[channel] as f64;
    let v01 = image.get_pixel(x0, y1).0[channel] as f64;
    let v11 = image.get_pixel(x1, y1).0[channel] as f64;
    let top = v00 * (1.0 - dx) + v10 * dx;
    let bottom = v01 * (1.0 - dx) + v11 * dx;
    top * (1.0 - dy) + bottom * dy
}

/// Crop a square window centered on the disc and resample it to
/// `size`x`size`: bilinear for the image, nearest-neighbor for the mask so
/// no spurious labels appear.
///
/// The window side is `max(disc bounding-box side * CROP_MARGIN_FACTOR,
/// size)`, clamped to the image bounds.
pub fn crop_roi(
    image: &RgbImage,
    mask: &TriMask,
    size: u32,
) -> Result<(RgbImage, TriMask), DataError> {
    let (x0, y0, x1, y1) = mask.disc_bounding_box().ok_or(MaskError::EmptyDisc)?;
    let bbox_side = (x1 - x0 + 1).max(y1 - y0 + 1) as f64;
    let mut side = (bbox_side * CROP_MARGIN_FACTOR).round().max(size as f64) as u32;
    side = side.min(image.width()).min(image.height());

    let center_x = (x0 + x1) as f64 / 2.0;
    let center_y = (y0 + y1) as f64 / 2.0;
    let origin_x = ((center_x - side as f64 / 2.0).round() as i64)
        .clamp(0, (image.width() - side) as i64) as u32;
    let origin_y = ((center_y - side as f64 / 2.0).round() as i64)
        .clamp(0, (image.height() - side) as i64) as u32;

    let scale = side as f64 / size as f64;
    let mut roi = RgbImage::new(size, size);
    for y in 0..size {
        for x in 0..size {
            let src_x = origin_x as f64 + (x as f64 + 0.5) * scale - 0.5;
            let src_y = origin_y as f64 + (y as f64 + 0.5) * scale - 0.5;
            let mut pixel = [0u8; 3];
            for (c, slot) in pixel.iter_mut().enumerate() {
                *slot = bilinear_sample(image, src_x, src_y, c)
                    .round()
                    .clamp(0.0, 255.0) as u8;
            }
            roi.put_pixel(x, y, image::Rgb(pixel));
        }
    }

    let cropped_mask = TriMask::from_fn(size, size, |x, y| {
        let src_x = (origin_x as f64 + (x as f64 + 0.5) * scale - 0.5).round();
        let src_y = (origin_y as f64 + (y as f64 + 0.5) * scale - 0.5).round();
        let sx = (src_x.max(0.0) as u32).min(mask.width() - 1);
        let sy = (src_y.max(0.0) as u32).min(mask.height() - 1);
        mask.label_at(sx, sy)
    });

    Ok((roi, cropped_mask))
}
