//! The online recognition state machine.
//!
//! ```text
//!   Detecting ──positive detection──▶ Classifying ──early/late event──▶ Cooldown(n)
//!       ▲                                  │                                │
//!       └──── detector negative ×queue ────┘                                │
//!       └────────────────────────── countdown reaches zero ◀───────────────┘
//! ```
//!
//! Each arriving frame costs one detector inference (the queue keeps the
//! previous results of the overlapping windows). While classifying, the
//! classifier windows are re-scored every frame until a decision fires.

mod config;
mod latency;
mod offline;

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

pub use config::{ConfigError, PipelineConfig};
pub use latency::{latency_table, LatencyStats};
pub use offline::{run_offline, OfflineResult};

use crate::backend::{Backend, BackendError};
use crate::classifier::{classify, ClassificationOutcome, ClassifierError, FusionWeights, OutcomeKind};
use crate::detector::{DetectionLabel, DetectionQueue, DetectorError};
use crate::eval::EventRecord;
use crate::stream::{Frame, FrameBuffer, StreamError};
use crate::Scalar;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error("incompatible backend: {0}")]
    Incompatible(String),
    #[error("event sink: {0}")]
    Sink(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Detecting,
    Classifying,
    /// Frames left before detection resumes; always positive.
    Cooldown(u64),
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Detecting => "detecting",
            Phase::Classifying => "classifying",
            Phase::Cooldown(_) => "cooldown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Transition {
    pub frame: u64,
    pub from: Phase,
    pub to: Phase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionKind {
    Early,
    Late,
}

impl DetectionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DetectionKind::Early => "early",
            DetectionKind::Late => "late",
        }
    }
}

/// A recognized gesture.
#[derive(Debug, Clone, PartialEq)]
pub struct GestureEvent<T> {
    pub label: String,
    pub class_index: usize,
    /// Frame at which the decision was made.
    pub trigger_frame: u64,
    pub detection_kind: DetectionKind,
    pub max1: T,
    pub margin: T,
    pub window_count: usize,
}

impl<T: Scalar> GestureEvent<T> {
    fn from_outcome(
        outcome: &ClassificationOutcome<T>,
        labels: &crate::backend::LabelSet,
        trigger_frame: u64,
        window_count: usize,
    ) -> Option<Self> {
        let class_index = outcome.class_index?;
        let detection_kind = match outcome.kind {
            OutcomeKind::Early => DetectionKind::Early,
            OutcomeKind::Late => DetectionKind::Late,
            OutcomeKind::None => return None,
        };
        Some(Self {
            label: labels.name(class_index).unwrap_or("?").to_string(),
            class_index,
            trigger_frame,
            detection_kind,
            max1: outcome.max1,
            margin: outcome.margin,
            window_count,
        })
    }

    pub fn to_record(&self, video: &str) -> EventRecord {
        EventRecord {
            video: video.to_string(),
            frame: self.trigger_frame,
            label: self.label.clone(),
            kind: self.detection_kind.as_str().to_string(),
            max1: self.max1.as_f64(),
            margin: self.margin.as_f64(),
        }
    }

    /// `{"video":..,"frame":..,"label":..,"kind":..,"max1":..,"margin":..}`
    pub fn to_json_line(&self, video: &str) -> String {
        serde_json::to_string(&self.to_record(video)).expect("event serializes")
    }
}

/// Receives events as they are emitted.
pub trait EventSink<T> {
    fn emit(&mut self, event: &GestureEvent<T>) -> std::io::Result<()>;
}

impl<T: Clone> EventSink<T> for Vec<GestureEvent<T>> {
    fn emit(&mut self, event: &GestureEvent<T>) -> std::io::Result<()> {
        self.push(event.clone());
        Ok(())
    }
}

/// Discards events.
pub struct NullSink;

impl<T> EventSink<T> for NullSink {
    fn emit(&mut self, _: &GestureEvent<T>) -> std::io::Result<()> {
        Ok(())
    }
}

/// Writes one JSON line per event and flushes after each, so the output is
/// valid however the run ends.
pub struct JsonLinesSink<W: Write> {
    writer: W,
    video: String,
}

impl<W: Write> JsonLinesSink<W> {
    pub fn new(writer: W, video: impl Into<String>) -> Self {
        Self {
            writer,
            video: video.into(),
        }
    }

    pub fn set_video(&mut self, video: impl Into<String>) {
        self.video = video.into();
    }

    pub fn into_inner(self) -> W {
        self.writer
    }
}

impl<T: Scalar, W: Write> EventSink<T> for JsonLinesSink<W> {
    fn emit(&mut self, event: &GestureEvent<T>) -> std::io::Result<()> {
        writeln!(self.writer, "{}", event.to_json_line(&self.video))?;
        self.writer.flush()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary<T> {
    #[serde(skip)]
    pub events: Vec<GestureEvent<T>>,
    pub detection: LatencyStats,
    pub classification: LatencyStats,
    pub frames_processed: u64,
    /// Set when the source failed mid-stream.
    pub truncated: Option<String>,
    pub stream_gaps: u64,
    pub max_buffer_len: usize,
    pub buffer_capacity: usize,
    pub n_windows: usize,
    #[serde(skip)]
    pub transitions: Vec<Transition>,
    pub wall_time_s: f64,
}

impl<T> RunSummary<T> {
    /// Frames per second of wall time.
    pub fn throughput_fps(&self) -> f64 {
        if self.wall_time_s > 0.0 {
            self.frames_processed as f64 / self.wall_time_s
        } else {
            0.0
        }
    }
}

/// Per-stage latency table for a finished run.
pub fn latency_report<T>(summary: &RunSummary<T>) -> String {
    latency_table(&summary.detection, &summary.classification, summary.n_windows)
}

/// Online pipeline state: frame buffer, detection queue and current phase.
#[derive(Debug)]
pub struct Pipeline<T> {
    config: PipelineConfig,
    weights: FusionWeights<T>,
    tau_early: T,
    tau_late: T,
    buffer: FrameBuffer,
    queue: DetectionQueue<T>,
    phase: Phase,
    armed: bool,
    negative_streak: usize,
    summary: RunSummary<T>,
}

impl<T: Scalar> Pipeline<T> {
    pub fn new(config: PipelineConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let weights = FusionWeights::for_windows(config.n_windows)?;
        Ok(Self {
            weights,
            tau_early: T::of(config.tau_early),
            tau_late: T::of(config.tau_late),
            buffer: FrameBuffer::new(config.buffer_capacity),
            queue: DetectionQueue::new(config.detector_queue),
            phase: Phase::Detecting,
            armed: true,
            negative_streak: 0,
            summary: RunSummary {
                events: Vec::new(),
                detection: LatencyStats::default(),
                classification: LatencyStats::default(),
                frames_processed: 0,
                truncated: None,
                stream_gaps: 0,
                max_buffer_len: 0,
                buffer_capacity: config.buffer_capacity,
                n_windows: config.n_windows,
                transitions: Vec::new(),
                wall_time_s: 0.0,
            },
            config,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn buffer(&self) -> &FrameBuffer {
        &self.buffer
    }

    pub fn summary(&self) -> &RunSummary<T> {
        &self.summary
    }

    pub fn into_summary(self) -> RunSummary<T> {
        self.summary
    }

    /// Checks the backends' advertised shapes against the configuration.
    pub fn check_backends(&self, detector: &dyn Backend<T>, classifier: &dyn Backend<T>) -> Result<(), PipelineError> {
        let d = detector.info();
        if d.clip_depth != self.config.detector_depth {
            return Err(PipelineError::Incompatible(format!(
                "detector expects {}-frame clips, config uses {}",
                d.clip_depth, self.config.detector_depth
            )));
        }
        if !d.label_set.is_detector() {
            return Err(PipelineError::Incompatible(format!(
                "detector labels {:?} are not [gesture, no_gesture]",
                d.label_set.labels()
            )));
        }
        let c = classifier.info();
        if c.clip_depth != self.config.classifier_depth {
            return Err(PipelineError::Incompatible(format!(
                "classifier expects {}-frame clips, config uses {}",
                c.clip_depth, self.config.classifier_depth
            )));
        }
        Ok(())
    }

    fn transition(&mut self, frame: u64, to: Phase) {
        if self.phase != to {
            let from = self.phase;
            self.phase = to;
            if std::mem::discriminant(&from) != std::mem::discriminant(&to) {
                self.summary.transitions.push(Transition { frame, from, to });
            }
        }
    }

    fn reset(&mut self, frame: u64) {
        self.buffer.clear();
        self.queue.clear();
        self.negative_streak = 0;
        self.armed = true;
        self.transition(frame, Phase::Detecting);
    }

    /// Advances the state machine by one frame and returns any events it
    /// produced. A stream gap clears the history and restarts detection.
    pub fn step(
        &mut self,
        frame: Frame,
        detector: &dyn Backend<T>,
        classifier: &dyn Backend<T>,
    ) -> Result<Vec<GestureEvent<T>>, PipelineError> {
        let t = frame.index;
        self.summary.frames_processed += 1;
        if self.buffer.last_index().is_some_and(|last| t != last + 1) {
            self.summary.stream_gaps += 1;
            self.reset(t);
        }
        self.buffer.push(frame)?;
        self.summary.max_buffer_len = self.summary.max_buffer_len.max(self.buffer.len());
        self.advance(t, detector, classifier)
    }

    fn advance(
        &mut self,
        t: u64,
        detector: &dyn Backend<T>,
        classifier: &dyn Backend<T>,
    ) -> Result<Vec<GestureEvent<T>>, PipelineError> {
        if let Phase::Cooldown(remaining) = self.phase {
            let next = if remaining <= 1 {
                Phase::Detecting
            } else {
                Phase::Cooldown(remaining - 1)
            };
            self.transition(t, next);
            return Ok(Vec::new());
        }

        let cfg = &self.config;
        if !self
            .buffer
            .can_supply(t, cfg.detector_depth, cfg.detector_queue, cfg.detector_stride)
        {
            return Ok(Vec::new());
        }
        let clip = self.buffer.extract_clip(t, cfg.detector_depth)?;
        let started = Instant::now();
        let probs = detector.infer(&clip)?;
        self.summary.detection.record(started.elapsed());
        if DetectionLabel::of(&probs) == DetectionLabel::NoGesture {
            self.armed = true;
        }
        self.queue.push(probs);
        if !self.queue.is_full() {
            return Ok(Vec::new());
        }
        let decision = self.queue.decide(self.config.detector_mode)?;

        match self.phase {
            Phase::Detecting => {
                let armed = self.armed || !self.config.rearm_on_negative;
                if decision.is_gesture() && armed {
                    self.negative_streak = 0;
                    self.transition(t, Phase::Classifying);
                } else {
                    return Ok(Vec::new());
                }
            }
            Phase::Classifying => {
                if decision.is_gesture() {
                    self.negative_streak = 0;
                } else {
                    self.negative_streak += 1;
                }
            }
            Phase::Cooldown(_) => unreachable!("handled above"),
        }

        self.classify_round(t, classifier)
    }

    fn classify_round(&mut self, t: u64, classifier: &dyn Backend<T>) -> Result<Vec<GestureEvent<T>>, PipelineError> {
        let cfg = &self.config;
        if !self
            .buffer
            .can_supply(t, cfg.classifier_depth, cfg.n_windows, cfg.classifier_stride)
        {
            return Ok(Vec::new());
        }
        let clips = self
            .buffer
            .classifier_windows(t, cfg.classifier_depth, cfg.n_windows, cfg.classifier_stride)?;
        let started = Instant::now();
        let window_probs = classifier.infer_batch(&clips)?;
        self.summary.classification.record(started.elapsed());
        let outcome = classify(&window_probs, &self.weights, self.tau_early, self.tau_late)?;

        match GestureEvent::from_outcome(&outcome, &classifier.info().label_set, t, self.config.n_windows) {
            Some(event) => {
                self.queue.clear();
                self.armed = false;
                self.negative_streak = 0;
                self.transition(t, Phase::Cooldown(self.config.cooldown() as u64));
                self.summary.events.push(event.clone());
                Ok(vec![event])
            }
            None => {
                if self.negative_streak >= self.config.detector_queue {
                    self.negative_streak = 0;
                    self.transition(t, Phase::Detecting);
                }
                Ok(Vec::new())
            }
        }
    }

    /// Drives every frame of `source` through [`step`](Self::step),
    /// forwarding events to `sink` as they occur. A failing source ends the
    /// run with a truncated summary; backend and sink errors abort it.
    pub fn run<I>(
        mut self,
        source: I,
        detector: &dyn Backend<T>,
        classifier: &dyn Backend<T>,
        sink: &mut dyn EventSink<T>,
    ) -> Result<RunSummary<T>, PipelineError>
    where
        I: IntoIterator<Item = Result<Frame, StreamError>>,
    {
        self.check_backends(detector, classifier)?;
        let started = Instant::now();
        for item in source {
            let frame = match item {
                Ok(frame) => frame,
                Err(e) => {
                    self.summary.truncated = Some(e.to_string());
                    break;
                }
            };
            for event in self.step(frame, detector, classifier)? {
                sink.emit(&event).map_err(|e| PipelineError::Sink(e.to_string()))?;
            }
        }
        self.summary.wall_time_s = started.elapsed().as_secs_f64();
        Ok(self.summary)
    }
}

/// Builds a pipeline from `config` and runs it over `source`.
pub fn run<T: Scalar, I>(
    config: PipelineConfig,
    source: I,
    detector: &dyn Backend<T>,
    classifier: &dyn Backend<T>,
    sink: &mut dyn EventSink<T>,
) -> Result<RunSummary<T>, PipelineError>
where
    I: IntoIterator<Item = Result<Frame, StreamError>>,
{
    Pipeline::new(config)?.run(source, detector, classifier, sink)
}
