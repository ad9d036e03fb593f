//! Camera validator: variance-of-Laplacian sharpness against a per-camera threshold.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CameraId {
    Front,
    Back,
    Left,
    Right,
}

impl CameraId {
    pub const ALL: [CameraId; 4] = [CameraId::Front, CameraId::Back, CameraId::Left, CameraId::Right];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SensorValidity {
    Valid,
    Invalid,
}

impl SensorValidity {
    pub fn is_valid(self) -> bool {
        self == SensorValidity::Valid
    }
}

/// 8-bit grayscale frame, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraFrame {
    pub width: u32,
    pub height: u32,
    #[serde(with = "crate::b64")]
    pub pixels: Vec<u8>,
    pub camera_id: CameraId,
    pub timestamp_ns: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum CameraError {
    #[error("frame {width}x{height} is smaller than 3x3")]
    TooSmall { width: u32, height: u32 },
    #[error("frame holds {actual} pixels, expected {expected}")]
    SizeMismatch { expected: usize, actual: usize },
}

impl CameraFrame {
    pub fn new(camera_id: CameraId, width: u32, height: u32, pixels: Vec<u8>, timestamp_ns: u64) -> Self {
        Self { width, height, pixels, camera_id, timestamp_ns }
    }

    pub fn uniform(camera_id: CameraId, width: u32, height: u32, value: u8) -> Self {
        Self::new(camera_id, width, height, vec![value; (width * height) as usize], 0)
    }

    pub fn check(&self) -> Result<(), CameraError> {
        if self.width < 3 || self.height < 3 {
            return Err(CameraError::TooSmall { width: self.width, height: self.height });
        }
        let expected = self.width as usize * self.height as usize;
        if self.pixels.len() != expected {
            return Err(CameraError::SizeMismatch { expected, actual: self.pixels.len() });
        }
        Ok(())
    }

    /// Box-downsample by the smallest integer factor that fits `max_w x max_h`.
    pub fn thumbnail(&self, max_w: u32, max_h: u32) -> CameraFrame {
        let factor = self.width.div_ceil(max_w.max(1)).max(self.height.div_ceil(max_h.max(1))).max(1);
        if factor == 1 {
            return self.clone();
        }
        let w = self.width / factor;
        let h = self.height / factor;
        let mut pixels = Vec::with_capacity((w * h) as usize);
        for ty in 0..h {
            for tx in 0..w {
                let mut sum = 0u32;
                for y in ty * factor..(ty + 1) * factor {
                    let row = (y * self.width) as usize;
                    for x in tx * factor..(tx + 1) * factor {
                        sum += u32::from(self.pixels[row + x as usize]);
                    }
                }
                pixels.push((sum / (factor * factor)) as u8);
            }
        }
        CameraFrame { width: w, height: h, pixels, camera_id: self.camera_id, timestamp_ns: self.timestamp_ns }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidatorConfig {
    pub sharpness_threshold: f64,
    pub per_camera: BTreeMap<CameraId, f64>,
}

impl Default for ValidatorConfig {
    fn default() -> Self {
        Self { sharpness_threshold: 100.0, per_camera: BTreeMap::new() }
    }
}

impl ValidatorConfig {
    pub fn threshold_for(&self, id: CameraId) -> f64 {
        self.per_camera.get(&id).copied().unwrap_or(self.sharpness_threshold)
    }
}

/// Variance of the 4-neighbour Laplacian over interior pixels.
///
/// Accumulates in integers so the score is exact up to the final division.
pub fn sharpness(frame: &CameraFrame) -> Result<f64, CameraError> {
    frame.check()?;
    let w = frame.width as usize;
    let h = frame.height as usize;
    let px = |x: usize, y: usize| i64::from(frame.pixels[y * w + x]);
    let mut sum: i64 = 0;
    let mut sum_sq: i128 = 0;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let lap = px(x, y - 1) + px(x, y + 1) + px(x - 1, y) + px(x + 1, y) - 4 * px(x, y);
            sum += lap;
            sum_sq += i128::from(lap * lap);
        }
    }
    let n = ((w - 2) * (h - 2)) as i128;
    let numerator = n * sum_sq - i128::from(sum) * i128::from(sum);
    Ok(numerator as f64 / (n * n) as f64)
}

pub fn validate(frame: &CameraFrame, cfg: &ValidatorConfig) -> Result<SensorValidity, CameraError> {
    let score = sharpness(frame)?;
    Ok(if score < cfg.threshold_for(frame.camera_id) { SensorValidity::Invalid } else { SensorValidity::Valid })
}
