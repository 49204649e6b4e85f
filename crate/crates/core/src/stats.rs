//! Green-channel region statistics and the adaptive vessel threshold.
//!
//! Vessel boundaries contrast most strongly in the green channel, so all
//! region means are taken there. The vessel threshold sits midway between the
//! background and rim means and adapts to per-image illumination.

use image::RgbImage;
use thiserror::Error;

use crate::mask::{Region, TriMask};
use crate::plane::Plane;

/// Green-channel means of the three mask regions plus the derived threshold.
///
/// `threshold` always equals `back_mean + (rim_mean - back_mean) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionStats {
    pub back_mean: f64,
    pub rim_mean: f64,
    pub cup_mean: f64,
    pub threshold: f64,
}

impl RegionStats {
    pub fn new(back_mean: f64, rim_mean: f64, cup_mean: f64) -> Self {
        Self {
            back_mean,
            rim_mean,
            cup_mean,
            threshold: vessel_threshold(back_mean, rim_mean),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("region {0} has no pixels")]
    EmptyRegion(Region),
    #[error("coordinate ({x}, {y}) is outside the {width}x{height} plane")]
    CoordOutOfBounds {
        x: u32,
        y: u32,
        width: u32,
        height: u32,
    },
    #[error("image is {image_w}x{image_h} but mask is {mask_w}x{mask_h}")]
    DimensionMismatch {
        image_w: u32,
        image_h: u32,
        mask_w: u32,
        mask_h: u32,
    },
}

/// Extract the green plane of an RGB image as floats in `[0, 255]`.
pub fn green_channel(image: &RgbImage) -> Plane {
    Plane::from_fn(image.width(), image.height(), |x, y| {
        image.get_pixel(x, y).0[1] as f32
    })
}

/// Mean of the plane over a coordinate set, accumulated in double precision.
pub fn region_mean(plane: &Plane, coords: &[(u32, u32)]) -> Result<f64, StatsError> {
    if coords.is_empty() {
        return Err(StatsError::EmptyRegion(Region::Background));
    }
    let mut sum = 0.0f64;
    for &(x, y) in coords {
        if !plane.in_bounds(x, y) {
            return Err(StatsError::CoordOutOfBounds {
                x,
                y,
                width: plane.width(),
                height: plane.height(),
            });
        }
        sum += plane.get(x, y) as f64;
    }
    Ok(sum / coords.len() as f64)
}

/// Adaptive vessel threshold: midpoint between the background and rim means.
pub fn vessel_threshold(back_mean: f64, rim_mean: f64) -> f64 {
    back_mean + (rim_mean - back_mean) / 2.0
}

/// Compute all three region means and the vessel threshold in one pass.
///
/// Errors if the image and mask dimensions differ or any region is empty;
/// callers that tolerate an empty cup compute the means they need via
/// [`region_mean`] instead.
pub fn compute_stats(image: &RgbImage, mask: &TriMask) -> Result<RegionStats, StatsError> {
    if image.width() != mask.width() || image.height() != mask.height() {
        return Err(StatsError::DimensionMismatch {
            image_w: image.width(),
            image_h: image.height(),
            mask_w: mask.width(),
            mask_h: mask.height(),
        });
    }
    let mut sums = [0.0f64; 3];
    let mut counts = [0usize; 3];
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            let idx = match mask.label_at(x, y) {
                Region::Background => 0,
                Region::Rim => 1,
                Region::Cup => 2,
            };
            sums[idx] += image.get_pixel(x, y).0[1] as f64;
            counts[idx] += 1;
        }
    }
    for (i, &region) in Region::ALL.iter().enumerate() {
        if counts[i] == 0 {
            return Err(StatsError::EmptyRegion(region));
        }
    }
    Ok(RegionStats::new(
        sums[0] / counts[0] as f64,
        sums[1] / counts[1] as f64,
        sums[2] / counts[2] as f64,
    ))
}
