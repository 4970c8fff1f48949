//! Frame ingestion, preprocessing and sliding-window clip extraction.

mod buffer;
mod frame;
pub mod source;

pub use buffer::{Clip, FrameBuffer, DEFAULT_CAPACITY};
pub use frame::{preprocess, scaled_dimensions, Frame, RawFrame, CHANNELS, FRAME_BYTES, INPUT_SIZE};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StreamError {
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("stream gap: expected frame {expected}, got {got}")]
    StreamGap { expected: u64, got: u64 },
    #[error("insufficient history: need frames {first_needed}..={last_needed}, buffer holds {held:?}")]
    InsufficientHistory {
        first_needed: i64,
        last_needed: u64,
        held: Option<(u64, u64)>,
    },
    #[error("source i/o: {0}")]
    Io(String),
}
