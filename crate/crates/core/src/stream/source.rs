//! Frame sources. Each yields preprocessed [`Frame`]s with indices starting
//! at zero.

use std::io::{ErrorKind, Read};
use std::path::{Path, PathBuf};
use std::sync::mpsc::{sync_channel, Receiver};
use std::sync::Arc;
use std::thread::JoinHandle;

use super::frame::{preprocess, Frame, RawFrame, FRAME_BYTES};
use super::StreamError;

fn timestamp(index: u64, fps: f64) -> u64 {
    (index as f64 * 1000.0 / fps).round() as u64
}

/// Lists the numbered JPEG frames of one Jester-style video directory.
pub fn jpeg_frames(dir: &Path) -> Result<Vec<PathBuf>, StreamError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| StreamError::Io(format!("{}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("jpg") || e.eq_ignore_ascii_case("jpeg"))
        })
        .collect();
    // %05d names sort lexicographically; fall back to numeric for longer runs.
    files.sort_by_key(|p| {
        let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        (stem.parse::<u64>().unwrap_or(u64::MAX), stem.to_owned())
    });
    Ok(files)
}

/// Lists video directories under `root`: `root` itself when it holds JPEGs,
/// otherwise each subdirectory in name order.
pub fn video_dirs(root: &Path) -> Result<Vec<PathBuf>, StreamError> {
    if !jpeg_frames(root)?.is_empty() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| StreamError::Io(format!("{}: {e}", root.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    Ok(dirs)
}

/// Decodes `%05d.jpg` files of one video directory.
pub struct JpegDirSource {
    files: std::vec::IntoIter<PathBuf>,
    next_index: u64,
    fps: f64,
}

impl JpegDirSource {
    pub fn open(dir: &Path, fps: f64) -> Result<Self, StreamError> {
        Ok(Self {
            files: jpeg_frames(dir)?.into_iter(),
            next_index: 0,
            fps,
        })
    }

    fn decode(&self, path: &Path) -> Result<Frame, StreamError> {
        let img = image::open(path)
            .map_err(|e| StreamError::Io(format!("{}: {e}", path.display())))?
            .to_rgb8();
        let (w, h) = img.dimensions();
        let raw = RawFrame::new(
            w as usize,
            h as usize,
            img.into_raw(),
            self.next_index,
            timestamp(self.next_index, self.fps),
        )?;
        preprocess(&raw)
    }
}

impl Iterator for JpegDirSource {
    type Item = Result<Frame, StreamError>;

    fn next(&mut self) -> Option<Self::Item> {
        let path = self.files.next()?;
        let frame = self.decode(&path);
        self.next_index += 1;
        Some(frame)
    }
}

/// Length-prefixed raw RGB frames: big-endian `u32` width, `u32` height, then
/// `width * height * 3` bytes. A clean end of input between frames ends the
/// stream.
pub struct RawStreamSource<R> {
    reader: R,
    next_index: u64,
    fps: f64,
    done: bool,
}

impl<R: Read> RawStreamSource<R> {
    pub fn new(reader: R, fps: f64) -> Self {
        Self {
            reader,
            next_index: 0,
            fps,
            done: false,
        }
    }

    fn read_frame(&mut self) -> Result<Option<RawFrame>, StreamError> {
        let mut header = [0u8; 8];
        let mut filled = 0;
        while filled < header.len() {
            match self.reader.read(&mut header[filled..]) {
                Ok(0) if filled == 0 => return Ok(None),
                Ok(0) => return Err(StreamError::Io("truncated frame header".into())),
                Ok(n) => filled += n,
                Err(e) if e.kind() == ErrorKind::Interrupted => {}
                Err(e) => return Err(StreamError::Io(e.to_string())),
            }
        }
        let width = u32::from_be_bytes(header[..4].try_into().unwrap()) as usize;
        let height = u32::from_be_bytes(header[4..].try_into().unwrap()) as usize;
        if width == 0 || height == 0 {
            return Err(StreamError::InvalidFrame(format!("zero dimension {width}x{height}")));
        }
        let len = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(3))
            .ok_or_else(|| StreamError::InvalidFrame(format!("frame {width}x{height} too large")))?;
        let mut pixels = vec![0u8; len];
        self.reader
            .read_exact(&mut pixels)
            .map_err(|e| StreamError::Io(format!("truncated frame body: {e}")))?;
        let index = self.next_index;
        RawFrame::new(width, height, pixels, index, timestamp(index, self.fps)).map(Some)
    }
}

impl<R: Read> Iterator for RawStreamSource<R> {
    type Item = Result<Frame, StreamError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = match self.read_frame() {
            Ok(None) => {
                self.done = true;
                return None;
            }
            Ok(Some(raw)) => preprocess(&raw),
            Err(e) => {
                self.done = true;
                Err(e)
            }
        };
        self.next_index += 1;
        Some(item)
    }
}

/// Encodes one frame in the length-prefixed raw format.
pub fn encode_raw_frame(width: u32, height: u32, pixels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + pixels.len());
    out.extend_from_slice(&width.to_be_bytes());
    out.extend_from_slice(&height.to_be_bytes());
    out.extend_from_slice(pixels);
    out
}

/// Uniform gray frames for scripted scenarios, where backends key off frame
/// indices rather than pixels. All frames share one pixel allocation.
pub struct SyntheticSource {
    next_index: u64,
    total: u64,
    fps: f64,
    pixels: Arc<[u8]>,
}

impl SyntheticSource {
    pub fn new(total: u64, fps: f64) -> Self {
        Self {
            next_index: 0,
            total,
            fps,
            pixels: Arc::from(vec![128u8; FRAME_BYTES]),
        }
    }
}

impl Iterator for SyntheticSource {
    type Item = Result<Frame, StreamError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next_index >= self.total {
            return None;
        }
        let index = self.next_index;
        self.next_index += 1;
        Some(Frame::new(index, timestamp(index, self.fps), Arc::clone(&self.pixels)))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.total - self.next_index) as usize;
        (left, Some(left))
    }
}

/// Runs a source on its own thread behind a bounded channel. When the
/// consumer falls behind, the producer blocks instead of dropping frames.
pub struct BoundedSource {
    rx: Receiver<Result<Frame, StreamError>>,
    handle: Option<JoinHandle<()>>,
}

impl BoundedSource {
    pub fn spawn<I>(source: I, depth: usize) -> Self
    where
        I: Iterator<Item = Result<Frame, StreamError>> + Send + 'static,
    {
        let (tx, rx) = sync_channel(depth.max(1));
        let handle = std::thread::spawn(move || {
            for item in source {
                let stop = item.is_err();
                if tx.send(item).is_err() || stop {
                    break;
                }
            }
        });
        Self {
            rx,
            handle: Some(handle),
        }
    }
}

impl Iterator for BoundedSource {
    type Item = Result<Frame, StreamError>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.rx.recv() {
            Ok(item) => Some(item),
            Err(_) => {
                if let Some(handle) = self.handle.take() {
                    let _ = handle.join();
                }
                None
            }
        }
    }
}
