use std::collections::VecDeque;

use super::frame::{Frame, CHANNELS, FRAME_BYTES, INPUT_SIZE};
use super::StreamError;

/// Default ring capacity: room for a 32-frame clip fused over 5 windows.
pub const DEFAULT_CAPACITY: usize = 40;

/// `depth` consecutive frames, the unit of inference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clip {
    pub start_index: u64,
    frames: Vec<Frame>,
}

impl Clip {
    /// Builds a clip from frames that must be index-contiguous.
    pub fn from_frames(frames: Vec<Frame>) -> Result<Self, StreamError> {
        let first = frames
            .first()
            .ok_or_else(|| StreamError::InvalidFrame("empty clip".into()))?
            .index;
        for (offset, frame) in frames.iter().enumerate() {
            if frame.index != first + offset as u64 {
                return Err(StreamError::StreamGap {
                    expected: first + offset as u64,
                    got: frame.index,
                });
            }
        }
        Ok(Self {
            start_index: first,
            frames,
        })
    }

    pub const fn channels(&self) -> usize {
        CHANNELS
    }

    pub fn depth(&self) -> usize {
        self.frames.len()
    }

    pub const fn height(&self) -> usize {
        INPUT_SIZE
    }

    pub const fn width(&self) -> usize {
        INPUT_SIZE
    }

    pub fn end_index(&self) -> u64 {
        self.start_index + self.frames.len() as u64 - 1
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    /// `[channels, depth, height, width]`.
    pub fn shape(&self) -> [usize; 4] {
        [CHANNELS, self.depth(), INPUT_SIZE, INPUT_SIZE]
    }

    /// Frames concatenated in temporal order, each frame row-major
    /// interleaved RGB. Length is c·d·h·w.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.frames.len() * FRAME_BYTES);
        for frame in &self.frames {
            out.extend_from_slice(frame.pixels());
        }
        out
    }
}

/// Bounded FIFO of the most recent frames.
///
/// Contents are always an index-contiguous run; a push that would break
/// contiguity is rejected and the caller decides whether to [`clear`](Self::clear).
#[derive(Debug, Clone)]
pub struct FrameBuffer {
    capacity: usize,
    frames: VecDeque<Frame>,
}

impl Default for FrameBuffer {
    fn default() -> Self {
        Self::new(DEFAULT_CAPACITY)
    }
}

impl FrameBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "frame buffer capacity must be positive");
        Self {
            capacity,
            frames: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn first_index(&self) -> Option<u64> {
        self.frames.front().map(|f| f.index)
    }

    pub fn last_index(&self) -> Option<u64> {
        self.frames.back().map(|f| f.index)
    }

    pub fn clear(&mut self) {
        self.frames.clear();
    }

    /// Appends `frame`, returning the evicted oldest frame when full.
    pub fn push(&mut self, frame: Frame) -> Result<Option<Frame>, StreamError> {
        if let Some(last) = self.last_index() {
            if frame.index != last + 1 {
                return Err(StreamError::StreamGap {
                    expected: last + 1,
                    got: frame.index,
                });
            }
        }
        let evicted = if self.frames.len() == self.capacity {
            self.frames.pop_front()
        } else {
            None
        };
        self.frames.push_back(frame);
        Ok(evicted)
    }

    /// True when every frame in `[first, last]` is held.
    pub fn covers(&self, first: i64, last: i64) -> bool {
        match (self.first_index(), self.last_index()) {
            (Some(lo), Some(hi)) => first >= lo as i64 && last <= hi as i64 && first <= last,
            _ => false,
        }
    }

    /// The clip of `depth` frames ending at `end_index`.
    pub fn extract_clip(&self, end_index: u64, depth: usize) -> Result<Clip, StreamError> {
        let first = end_index as i64 - depth as i64 + 1;
        if depth == 0 || !self.covers(first, end_index as i64) {
            return Err(self.insufficient(first, end_index));
        }
        let offset = (first as u64 - self.first_index().unwrap_or(0)) as usize;
        let frames: Vec<Frame> = self.frames.range(offset..offset + depth).cloned().collect();
        Ok(Clip {
            start_index: first as u64,
            frames,
        })
    }

    /// True when [`sliding_windows`](Self::sliding_windows) with the same
    /// arguments would succeed.
    pub fn can_supply(&self, latest: u64, depth: usize, count: usize, stride: usize) -> bool {
        let first = latest as i64 - depth as i64 - ((count.max(1) - 1) * stride) as i64 + 1;
        depth > 0 && count > 0 && self.covers(first, latest as i64)
    }

    /// `count` clips of `depth` frames whose end indices step by `stride`,
    /// the newest ending at `latest`. Returned oldest first.
    pub fn sliding_windows(
        &self,
        latest: u64,
        depth: usize,
        count: usize,
        stride: usize,
    ) -> Result<Vec<Clip>, StreamError> {
        if count == 0 {
            return Ok(Vec::new());
        }
        let span = ((count - 1) * stride) as i64;
        let first = latest as i64 - span - depth as i64 + 1;
        if depth == 0 || !self.covers(first, latest as i64) {
            return Err(self.insufficient(first, latest));
        }
        (0..count)
            .map(|i| {
                let end = latest - ((count - 1 - i) * stride) as u64;
                self.extract_clip(end, depth)
            })
            .collect()
    }

    /// Four (by default) overlapping 8-frame detector windows ending at `latest`.
    pub fn detector_windows(
        &self,
        latest: u64,
        depth: usize,
        k: usize,
        stride: usize,
    ) -> Result<Vec<Clip>, StreamError> {
        self.sliding_windows(latest, depth, k, stride)
    }

    /// `n` classifier windows ending at `latest`; the middle one is `n / 2`.
    pub fn classifier_windows(
        &self,
        latest: u64,
        depth: usize,
        n: usize,
        stride: usize,
    ) -> Result<Vec<Clip>, StreamError> {
        self.sliding_windows(latest, depth, n, stride)
    }

    fn insufficient(&self, first: i64, last: u64) -> StreamError {
        StreamError::InsufficientHistory {
            first_needed: first,
            last_needed: last,
            held: self.first_index().zip(self.last_index()),
        }
    }
}
