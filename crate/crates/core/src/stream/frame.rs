use std::sync::Arc;

use super::StreamError;

/// Side length of the square model input.
pub const INPUT_SIZE: usize = 112;
pub const CHANNELS: usize = 3;
/// Bytes in one preprocessed frame.
pub const FRAME_BYTES: usize = INPUT_SIZE * INPUT_SIZE * CHANNELS;

/// An undecoded-size RGB image straight from a source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawFrame {
    pub width: usize,
    pub height: usize,
    /// Row-major interleaved RGB.
    pub pixels: Vec<u8>,
    pub source_index: u64,
    pub timestamp_ms: u64,
}

impl RawFrame {
    pub fn new(
        width: usize,
        height: usize,
        pixels: Vec<u8>,
        source_index: u64,
        timestamp_ms: u64,
    ) -> Result<Self, StreamError> {
        let frame = Self {
            width,
            height,
            pixels,
            source_index,
            timestamp_ms,
        };
        frame.validate()?;
        Ok(frame)
    }

    pub fn validate(&self) -> Result<(), StreamError> {
        if self.width == 0 || self.height == 0 {
            return Err(StreamError::InvalidFrame(format!(
                "zero dimension {}x{}",
                self.width, self.height
            )));
        }
        let expected = self.width * self.height * CHANNELS;
        if self.pixels.len() != expected {
            return Err(StreamError::InvalidFrame(format!(
                "pixel buffer holds {} bytes, {}x{} RGB needs {}",
                self.pixels.len(),
                self.width,
                self.height,
                expected
            )));
        }
        Ok(())
    }
}

/// A preprocessed 112x112 RGB frame.
///
/// Pixel storage is reference counted so clips can be snapshotted and handed
/// to inference workers without copying.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub index: u64,
    pub timestamp_ms: u64,
    pixels: Arc<[u8]>,
}

impl Frame {
    pub fn new(index: u64, timestamp_ms: u64, pixels: Arc<[u8]>) -> Result<Self, StreamError> {
        if pixels.len() != FRAME_BYTES {
            return Err(StreamError::InvalidFrame(format!(
                "preprocessed frame must hold {FRAME_BYTES} bytes, got {}",
                pixels.len()
            )));
        }
        Ok(Self {
            index,
            timestamp_ms,
            pixels,
        })
    }

    /// A uniform mid-gray frame.
    pub fn blank(index: u64, timestamp_ms: u64) -> Self {
        Self {
            index,
            timestamp_ms,
            pixels: Arc::from(vec![128u8; FRAME_BYTES]),
        }
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn shared_pixels(&self) -> Arc<[u8]> {
        Arc::clone(&self.pixels)
    }
}

/// Size of the intermediate image after scaling the shorter side to
/// [`INPUT_SIZE`]. The longer side is rounded half up.
pub fn scaled_dimensions(width: usize, height: usize) -> (usize, usize) {
    let target = INPUT_SIZE;
    if width <= height {
        let scaled = (height * target * 2 + width) / (2 * width);
        (target, scaled.max(target))
    } else {
        let scaled = (width * target * 2 + height) / (2 * height);
        (scaled.max(target), target)
    }
}

/// Scales the shorter side to 112 with bilinear interpolation and
/// center-crops to 112x112.
///
/// Sampling uses pixel-center alignment: destination pixel `x` maps to source
/// coordinate `(x + 0.5) * src / dst - 0.5`, clamped to the image.
pub fn preprocess(raw: &RawFrame) -> Result<Frame, StreamError> {
    raw.validate()?;
    let (scaled_w, scaled_h) = scaled_dimensions(raw.width, raw.height);
    let crop_x = (scaled_w - INPUT_SIZE) / 2;
    let crop_y = (scaled_h - INPUT_SIZE) / 2;

    if raw.width == INPUT_SIZE && raw.height == INPUT_SIZE {
        return Frame::new(raw.source_index, raw.timestamp_ms, Arc::from(raw.pixels.as_slice()));
    }

    let x_taps = sample_taps(raw.width, scaled_w, crop_x);
    let y_taps = sample_taps(raw.height, scaled_h, crop_y);

    let stride = raw.width * CHANNELS;
    let mut out = vec![0u8; FRAME_BYTES];
    for (oy, &(y0, y1, fy)) in y_taps.iter().enumerate() {
        let row0 = &raw.pixels[y0 * stride..(y0 + 1) * stride];
        let row1 = &raw.pixels[y1 * stride..(y1 + 1) * stride];
        for (ox, &(x0, x1, fx)) in x_taps.iter().enumerate() {
            for c in 0..CHANNELS {
                let p00 = row0[x0 * CHANNELS + c] as f32;
                let p01 = row0[x1 * CHANNELS + c] as f32;
                let p10 = row1[x0 * CHANNELS + c] as f32;
                let p11 = row1[x1 * CHANNELS + c] as f32;
                let top = p00 + (p01 - p00) * fx;
                let bottom = p10 + (p11 - p10) * fx;
                let value = top + (bottom - top) * fy;
                out[(oy * INPUT_SIZE + ox) * CHANNELS + c] = (value + 0.5).floor().clamp(0.0, 255.0) as u8;
            }
        }
    }
    Frame::new(raw.source_index, raw.timestamp_ms, Arc::from(out))
}

/// For each of the 112 cropped output positions along one axis, the two
/// source indices and the interpolation fraction.
fn sample_taps(src: usize, scaled: usize, crop: usize) -> Vec<(usize, usize, f32)> {
    let ratio = src as f64 / scaled as f64;
    (0..INPUT_SIZE)
        .map(|i| {
            let pos = ((i + crop) as f64 + 0.5) * ratio - 0.5;
            let pos = pos.max(0.0);
            let lo = (pos.floor() as usize).min(src - 1);
            let hi = (lo + 1).min(src - 1);
            let frac = if lo == hi { 0.0 } else { (pos - lo as f64) as f32 };
            (lo, hi, frac)
        })
        .collect()
}
