//! Image token accounting for vision chat requests.

use super::{Detail, ImageSpec};

pub const BASE_IMAGE_TOKENS: u32 = 85;
pub const TOKENS_PER_TILE: u32 = 170;
pub const TILE_PX: u32 = 512;
const MAX_LONG_SIDE: f64 = 2048.0;
const MAX_SHORT_SIDE: f64 = 768.0;

/// Dimensions after the high-detail downscale: long side capped at 2048,
/// then short side capped at 768. Images are never upscaled.
pub fn scaled_dimensions(width: u32, height: u32) -> (u32, u32) {
    let (mut w, mut h) = (f64::from(width), f64::from(height));
    let long = w.max(h);
    if long > MAX_LONG_SIDE {
        let s = MAX_LONG_SIDE / long;
        w *= s;
        h *= s;
    }
    let short = w.min(h);
    if short > MAX_SHORT_SIDE {
        let s = MAX_SHORT_SIDE / short;
        w *= s;
        h *= s;
    }
    (w.round().max(1.0) as u32, h.round().max(1.0) as u32)
}

pub fn tile_count(width: u32, height: u32) -> u32 {
    let (w, h) = scaled_dimensions(width, height);
    w.div_ceil(TILE_PX) * h.div_ceil(TILE_PX)
}

pub fn estimate_image_tokens(spec: &ImageSpec) -> u32 {
    match spec.detail {
        Detail::Low => BASE_IMAGE_TOKENS,
        Detail::High => BASE_IMAGE_TOKENS + TOKENS_PER_TILE * tile_count(spec.width, spec.height),
    }
}
