//! Trimap segmentation masks and the vertical cup-to-disc ratio.
//!
//! A mask assigns every pixel one of three region codes: background, rim or
//! cup. The disc is never stored; it is always the union of rim and cup.

use image::GrayImage;
use thiserror::Error;

/// Per-pixel region code of a trimap mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Background,
    Rim,
    Cup,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Background, Region::Rim, Region::Cup];

    pub fn name(self) -> &'static str {
        match self {
            Region::Background => "background",
            Region::Rim => "rim",
            Region::Cup => "cup",
        }
    }
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Mapping between mask gray levels and region codes.
///
/// The default follows the REFUGE convention: cup darkest, background
/// brightest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelMap {
    pub background: u8,
    pub rim: u8,
    pub cup: u8,
}

impl Default for LabelMap {
    fn default() -> Self {
        Self {
            background: 255,
            rim: 128,
            cup: 0,
        }
    }
}

impl LabelMap {
    pub fn region_for(&self, gray: u8) -> Option<Region> {
        if gray == self.background {
            Some(Region::Background)
        } else if gray == self.rim {
            Some(Region::Rim)
        } else if gray == self.cup {
            Some(Region::Cup)
        } else {
            None
        }
    }

    pub fn gray_for(&self, region: Region) -> u8 {
        match region {
            Region::Background => self.background,
            Region::Rim => self.rim,
            Region::Cup => self.cup,
        }
    }

    pub fn is_distinct(&self) -> bool {
        self.background != self.rim && self.rim != self.cup && self.background != self.cup
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MaskError {
    #[error("mask image is empty")]
    EmptyImage,
    #[error("gray level {gray} ({count} pixels) is not covered by the label map")]
    UnknownLabelValue { gray: u8, count: usize },
    #[error("label map gray levels must be pairwise distinct")]
    AmbiguousLabelMap,
    #[error("mask has no disc pixels (no rim and no cup)")]
    EmptyDisc,
}

/// Dense per-pixel trimap with explicit dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriMask {
    width: u32,
    height: u32,
    labels: Vec<Region>,
}

/// Vertical cup-to-disc ratio. Zero iff the cup region is empty; never
/// exceeds one because the cup is part of the disc by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VcdrValue(f64);

impl VcdrValue {
    /// Wrap a precomputed ratio. Callers normally obtain values through
    /// [`TriMask::vcdr`]; this exists for degenerate-path fallbacks and tests.
    pub fn new(value: f64) -> Self {
        debug_assert!(value.is_finite() && value >= 0.0);
        Self(value)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Decode a grayscale mask into a [`TriMask`] under the given label map.
///
/// Every gray level present in the image must be covered by the map; the
/// first unmapped level encountered in scan order is reported together with
/// its pixel count.
pub fn parse_mask(image: &GrayImage, map: &LabelMap) -> Result<TriMask, MaskError> {
    if image.width() == 0 || image.height() == 0 {
        return Err(MaskError::EmptyImage);
    }
    if !map.is_distinct() {
        return Err(MaskError::AmbiguousLabelMap);
    }
    let mut labels = Vec::with_capacity((image.width() * image.height()) as usize);
    let mut unknown: Option<u8> = None;
    let mut unknown_count = 0usize;
    for pixel in image.pixels() {
        let gray = pixel.0[0];
        match map.region_for(gray) {
            Some(region) => labels.push(region),
            None => match unknown {
                None => {
                    unknown = Some(gray);
                    unknown_count = 1;
                }
                Some(g) if g == gray => unknown_count += 1,
                Some(_) => {}
            },
        }
    }
    if let Some(gray) = unknown {
        return Err(MaskError::UnknownLabelValue {
            gray,
            count: unknown_count,
        });
    }
    Ok(TriMask {
        width: image.width(),
        height: image.height(),
        labels,
    })
}

impl TriMask {
    /// Build directly from a label buffer in row-major order.
    pub fn from_labels(width: u32, height: u32, labels: Vec<Region>) -> Self {
        assert_eq!(
            labels.len(),
            (width as usize) * (height as usize),
            "label buffer length must be width*height"
        );
        Self {
            width,
            height,
            labels,
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> Region) -> Self {
        let mut labels = Vec::with_capacity((width as usize) * (height as usize));
        for y in 0..height {
            for x in 0..width {
                labels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            labels,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn label_at(&self, x: u32, y: u32) -> Region {
        self.labels[(y as usize) * (self.width as usize) + x as usize]
    }

    pub fn labels(&self) -> &[Region] {
        &self.labels
    }

    /// All `(x, y)` coordinates carrying the given region code, in row-major
    /// scan order.
    pub fn region_coords(&self, region: Region) -> Vec<(u32, u32)> {
        let mut coords = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if self.label_at(x, y) == region {
                    coords.push((x, y));
                }
            }
        }
        coords
    }

    pub fn region_size(&self, region: Region) -> usize {
        self.labels.iter().filter(|&&l| l == region).count()
    }

    #[inline]
    pub fn is_disc(&self, x: u32, y: u32) -> bool {
        matches!(self.label_at(x, y), Region::Rim | Region::Cup)
    }

    /// Inclusive bounding box `(x0, y0, x1, y1)` of the disc (rim ∪ cup), or
    /// `None` when the disc is empty.
    pub fn disc_bounding_box(&self) -> Option<(u32, u32, u32, u32)> {
        let mut bbox: Option<(u32, u32, u32, u32)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.is_disc(x, y) {
                    bbox = Some(match bbox {
                        None => (x, y, x, y),
                        Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                    });
                }
            }
        }
        bbox
    }

    /// Vertical cup-to-disc ratio from row extents.
    ///
    /// The vertical diameter of a region is the inclusive span of image rows
    /// containing at least one of its pixels. The cup diameter is zero when
    /// the cup is empty; an empty disc is an error because the ratio is
    /// undefined.
    pub fn vcdr(&self) -> Result<VcdrValue, MaskError> {
        let disc = self.row_extent(|r| matches!(r, Region::Rim | Region::Cup));
        let (disc_min, disc_max) = disc.ok_or(MaskError::EmptyDisc)?;
        let disc_diameter = (disc_max - disc_min + 1) as f64;
        let cup_diameter = match self.row_extent(|r| matches!(r, Region::Cup)) {
            Some((cup_min, cup_max)) => (cup_max - cup_min + 1) as f64,
            None => 0.0,
        };
        Ok(VcdrValue(cup_diameter / disc_diameter))
    }

    fn row_extent(&self, mut include: impl FnMut(Region) -> bool) -> Option<(u32, u32)> {
        let mut extent: Option<(u32, u32)> = None;
        for y in 0..self.height {
            let row_has = (0..self.width).any(|x| include(self.label_at(x, y)));
            if row_has {
                extent = Some(match extent {
                    None => (y, y),
                    Some((lo, _)) => (lo, y),
                });
            }
        }
        extent
    }

    /// Render the trimap back to a grayscale image under a label map.
    pub fn render(&self, map: &LabelMap) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| {
            image::Luma([map.gray_for(self.label_at(x, y))])
        })
    }

    pub fn flip_horizontal(&self) -> TriMask {
        TriMask::from_fn(self.width, self.height, |x, y| {
            self.label_at(self.width - 1 - x, y)
        })
    }
}
