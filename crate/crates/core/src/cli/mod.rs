//! Command-line front end. [`main_with_args`] is the whole program; the
//! binary only forwards `std::env::args` and exits with its return value.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::backend::{Backend, LabelSet, OracleBackend, OracleScript, RemoteBackend, StubBackend};
use crate::backend::{BackendInfo, DEFAULT_TIMEOUT};
use crate::eval::{evaluate, parse_events_jsonl, parse_truth_csv, write_truth_csv, EvalError};
use crate::pipeline::{latency_report, latency_table, run_offline, JsonLinesSink, LatencyStats, NullSink};
use crate::pipeline::{Pipeline, PipelineConfig, PipelineError, RunSummary};
use crate::scenario::{generate, ground_truth, Scenario, ScenarioError, ScenarioParams};
use crate::stream::source::{video_dirs, JpegDirSource, RawStreamSource, SyntheticSource};
use crate::stream::{Frame, StreamError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_BACKEND: i32 = 2;
pub const EXIT_SOURCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "handgest", version, about = "Online hand-gesture recognition pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the online detector/classifier pipeline over a frame source.
    Run(RunArgs),
    /// Run proposal-based recognition over complete videos.
    Offline(OfflineArgs),
    /// Write synthetic scenarios and their ground truth.
    Simulate(SimulateArgs),
    /// Score event output against ground truth with Levenshtein accuracy.
    Eval(EvalArgs),
    /// Measure per-stage latency with fixed-latency stub backends.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    /// Pipeline config TOML; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// frames:DIR | scenario:FILE_OR_DIR | stdin
    #[arg(long)]
    pub source: SourceSpec,
    /// oracle | tcp:HOST:PORT | stdio:CMD
    #[arg(long, default_value = "oracle")]
    pub detector: BackendSpec,
    /// oracle | tcp:HOST:PORT | stdio:CMD
    #[arg(long, default_value = "oracle")]
    pub classifier: BackendSpec,
    /// Event JSON lines; stdout when omitted.
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Per-request timeout for remote backends.
    #[arg(long, default_value_t = DEFAULT_TIMEOUT.as_millis() as u64)]
    pub timeout_ms: u64,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: SourceArgs,
}

#[derive(Debug, Args)]
pub struct OfflineArgs {
    #[command(flatten)]
    pub common: SourceArgs,
    /// Also write the amended proposals as JSON lines.
    #[arg(long)]
    pub proposals: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Output directory for scenario TOMLs and truth.csv.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of scenario videos.
    #[arg(long, default_value_t = 20)]
    pub videos: usize,
    #[arg(long, default_value_t = 4)]
    pub gestures: usize,
    #[arg(long, default_value_t = 600)]
    pub duration: u64,
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Print the report as JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub stub_latency_ms: u64,
    #[arg(long, default_value_t = 1000)]
    pub frames: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    Frames(PathBuf),
    Scenario(PathBuf),
    Stdin,
}

impl FromStr for SourceSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "stdin" {
            Ok(Self::Stdin)
        } else if let Some(dir) = s.strip_prefix("frames:") {
            Ok(Self::Frames(dir.into()))
        } else if let Some(path) = s.strip_prefix("scenario:") {
            Ok(Self::Scenario(path.into()))
        } else {
            Err(format!(
                "unknown source {s:?}; expected frames:DIR, scenario:PATH or stdin"
            ))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BackendSpec {
    Oracle,
    Tcp(String),
    Stdio(String),
}

impl FromStr for BackendSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "oracle" {
            Ok(Self::Oracle)
        } else if let Some(addr) = s.strip_prefix("tcp:") {
            Ok(Self::Tcp(addr.to_string()))
        } else if let Some(cmd) = s.strip_prefix("stdio:") {
            Ok(Self::Stdio(cmd.to_string()))
        } else {
            Err(format!(
                "unknown backend {s:?}; expected oracle, tcp:HOST:PORT or stdio:CMD"
            ))
        }
    }
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn config(e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: e.to_string(),
        }
    }

    fn backend(e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_BACKEND,
            message: e.to_string(),
        }
    }

    fn source(e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_SOURCE,
            message: e.to_string(),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(_) | PipelineError::Sink(_) => Self::config(e),
            PipelineError::Stream(_) => Self::source(e),
            PipelineError::Backend(_)
            | PipelineError::Incompatible(_)
            | PipelineError::Classifier(_)
            | PipelineError::Detector(_) => Self::backend(e),
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Self::source(e)
    }
}

type Result<T> = std::result::Result<T, Failure>;

/// Parses `args` (program name first) and runs the command.
pub fn main_with_args<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{rendered}");
                    EXIT_OK
                }
                // Bare `handgest` prints usage but is still an error.
                _ => {
                    let _ = write!(err, "{rendered}");
                    EXIT_CONFIG
                }
            };
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args, out, err),
        Command::Offline(args) => cmd_offline(&args, out, err),
        Command::Simulate(args) => cmd_simulate(&args, out),
        Command::Eval(args) => cmd_eval(&args, out),
        Command::Bench(args) => cmd_bench(&args, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p).map_err(Failure::config),
        None => Ok(PipelineConfig::default()),
    }
}

enum VideoKind {
    Dir(PathBuf),
    Scenario(Box<Scenario>),
    Stdin,
}

struct Video {
    id: String,
    kind: VideoKind,
}

impl Video {
    fn scenario(&self) -> Option<&Scenario> {
        match &self.kind {
            VideoKind::Scenario(s) => Some(s),
            _ => None,
        }
    }

    fn frames(&self, fps: f64) -> Result<Box<dyn Iterator<Item = std::result::Result<Frame, StreamError>>>> {
        Ok(match &self.kind {
            VideoKind::Dir(dir) => Box::new(JpegDirSource::open(dir, fps).map_err(Failure::source)?),
            VideoKind::Scenario(s) => Box::new(SyntheticSource::new(s.duration_frames, s.fps)),
            VideoKind::Stdin => Box::new(RawStreamSource::new(std::io::stdin().lock(), fps)),
        })
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .or_else(|| path.file_name())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "video".to_string())
}

fn list_videos(spec: &SourceSpec) -> Result<Vec<Video>> {
    match spec {
        SourceSpec::Stdin => Ok(vec![Video {
            id: "stdin".to_string(),
            kind: VideoKind::Stdin,
        }]),
        SourceSpec::Frames(root) => {
            let dirs = video_dirs(root).map_err(Failure::source)?;
            if dirs.is_empty() {
                return Err(Failure::source(format!(
                    "no video directories under {}",
                    root.display()
                )));
            }
            Ok(dirs
                .into_iter()
                .map(|d| Video {
                    id: file_stem(&d),
                    kind: VideoKind::Dir(d),
                })
                .collect())
        }
        SourceSpec::Scenario(path) => {
            let files = if path.is_dir() {
                let mut files: Vec<PathBuf> = std::fs::read_dir(path)
                    .map_err(|e| Failure::source(format!("{}: {e}", path.display())))?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|e| e == "toml"))
                    .collect();
                files.sort();
                files
            } else {
                vec![path.clone()]
            };
            if files.is_empty() {
                return Err(Failure::source(format!("no scenario files in {}", path.display())));
            }
            files
                .into_iter()
                .map(|f| {
                    Ok(Video {
                        id: file_stem(&f),
                        kind: VideoKind::Scenario(Box::new(Scenario::load(&f)?)),
                    })
                })
                .collect()
        }
    }
}

/// Backends shared across videos. Oracle backends are scenario specific
/// and built per video; remote ones connect once.
struct Backends {
    detector: Option<Arc<dyn Backend<f64>>>,
    classifier: Option<Arc<dyn Backend<f64>>>,
}

fn connect(spec: &BackendSpec, labels: LabelSet, timeout: Duration) -> Result<Option<Arc<dyn Backend<f64>>>> {
    let backend = match spec {
        BackendSpec::Oracle => return Ok(None),
        BackendSpec::Tcp(addr) => RemoteBackend::connect_tcp(addr, labels.id(), timeout),
        BackendSpec::Stdio(cmd) => RemoteBackend::spawn_stdio(cmd, labels.id(), timeout),
    };
    Ok(Some(Arc::new(backend.map_err(Failure::backend)?)))
}

fn oracle_for(script: Option<&OracleScript>, depth: usize, labels: LabelSet) -> Result<Arc<dyn Backend<f64>>> {
    let info = BackendInfo::new(depth, labels).map_err(Failure::backend)?;
    let script = script.cloned().unwrap_or_else(OracleScript::silent);
    Ok(Arc::new(OracleBackend::new(info, script).map_err(Failure::backend)?))
}

impl Backends {
    fn connect(args: &SourceArgs) -> Result<Self> {
        let timeout = Duration::from_millis(args.timeout_ms);
        Ok(Self {
            detector: connect(&args.detector, LabelSet::detector(), timeout)?,
            classifier: connect(&args.classifier, LabelSet::jester(), timeout)?,
        })
    }

    fn for_video(
        &self,
        video: &Video,
        config: &PipelineConfig,
    ) -> Result<(Arc<dyn Backend<f64>>, Arc<dyn Backend<f64>>)> {
        let scenario = video.scenario();
        let detector = match &self.detector {
            Some(b) => Arc::clone(b),
            None => oracle_for(
                scenario.map(|s| &s.detector_script),
                config.detector_depth,
                LabelSet::detector(),
            )?,
        };
        let classifier = match &self.classifier {
            Some(b) => Arc::clone(b),
            None => oracle_for(
                scenario.map(|s| &s.classifier_script),
                config.classifier_depth,
                LabelSet::jester(),
            )?,
        };
        Ok((detector, classifier))
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| Failure::config(format!("{}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(std::io::stdout())),
    }
}

fn cmd_run(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let common = &args.common;
    let config = load_config(common.config.as_deref())?;
    let videos = list_videos(&common.source)?;
    let backends = Backends::connect(common)?;
    // Event lines own stdout when no file is given, so the report moves.
    let report: &mut dyn Write = if common.events.is_some() { out } else { err };
    let mut sink = JsonLinesSink::new(open_output(common.events.as_deref())?, "");

    let mut detection = LatencyStats::default();
    let mut classification = LatencyStats::default();
    let (mut frames, mut events, mut wall) = (0u64, 0usize, 0.0f64);
    let mut truncated = Vec::new();
    for video in &videos {
        let (detector, classifier) = backends.for_video(video, &config)?;
        sink.set_video(video.id.clone());
        let source = video.frames(config.fps_assumed)?;
        let summary: RunSummary<f64> =
            Pipeline::new(config.clone())?.run(source, detector.as_ref(), classifier.as_ref(), &mut sink)?;
        let _ = writeln!(
            report,
            "{}: {} frames, {} events, {} stream gaps, peak buffer {}/{}",
            video.id,
            summary.frames_processed,
            summary.events.len(),
            summary.stream_gaps,
            summary.max_buffer_len,
            summary.buffer_capacity
        );
        if let Some(reason) = &summary.truncated {
            truncated.push(format!("{}: {reason}", video.id));
        }
        detection.merge(&summary.detection);
        classification.merge(&summary.classification);
        frames += summary.frames_processed;
        events += summary.events.len();
        wall += summary.wall_time_s;
    }
    let _ = writeln!(
        report,
        "total: {} videos, {frames} frames, {events} events",
        videos.len()
    );
    let _ = write!(
        report,
        "{}",
        latency_table(&detection, &classification, config.n_windows)
    );
    if wall > 0.0 {
        let _ = writeln!(report, "throughput: {:.1} fps", frames as f64 / wall);
    }
    if truncated.is_empty() {
        Ok(())
    } else {
        Err(Failure::source(format!("source ended early: {}", truncated.join("; "))))
    }
}

fn cmd_offline(args: &OfflineArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let common = &args.common;
    let config = load_config(common.config.as_deref())?;
    let videos = list_videos(&common.source)?;
    let backends = Backends::connect(common)?;
    let report: &mut dyn Write = if common.events.is_some() { out } else { err };
    let mut sink = JsonLinesSink::new(open_output(common.events.as_deref())?, "");
    let mut proposals_out = match &args.proposals {
        Some(p) => Some(open_output(Some(p))?),
        None => None,
    };

    for video in &videos {
        let (detector, classifier) = backends.for_video(video, &config)?;
        let frames = video
            .frames(config.fps_assumed)?
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(Failure::source)?;
        let result = run_offline(&config, &frames, detector.as_ref(), classifier.as_ref())?;
        sink.set_video(video.id.clone());
        for event in &result.events {
            crate::pipeline::EventSink::emit(&mut sink, event).map_err(Failure::config)?;
        }
        if let Some(w) = proposals_out.as_mut() {
            for p in &result.proposals {
                let line = serde_json::json!({"video": video.id, "start": p.start_frame, "end": p.end_frame});
                writeln!(w, "{line}").map_err(Failure::config)?;
            }
            w.flush().map_err(Failure::config)?;
        }
        let _ = writeln!(
            report,
            "{}: {} frames, {} proposals, {} events",
            video.id,
            frames.len(),
            result.proposals.len(),
            result.events.len()
        );
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    std::fs::create_dir_all(&args.out).map_err(|e| Failure::config(format!("{}: {e}", args.out.display())))?;
    let width = args.videos.saturating_sub(1).to_string().len().max(2);
    let mut truth = Vec::with_capacity(args.videos);
    for i in 0..args.videos {
        let params = ScenarioParams {
            fps: args.fps,
            ..ScenarioParams::new(
                args.gestures,
                args.duration,
                args.noise,
                args.seed.wrapping_add(i as u64),
            )
        };
        let scenario = generate(&params).map_err(Failure::config)?;
        let id = format!("video_{i:0width$}");
        let path = args.out.join(format!("{id}.toml"));
        std::fs::write(&path, scenario.to_toml()).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        truth.push(ground_truth(&scenario, &id));
    }
    let truth_path = args.out.join("truth.csv");
    std::fs::write(&truth_path, write_truth_csv(&truth))
        .map_err(|e| Failure::config(format!("{}: {e}", truth_path.display())))?;
    let _ = writeln!(
        out,
        "wrote {} scenarios and {} to {}",
        args.videos,
        truth_path.display(),
        args.out.display()
    );
    Ok(())
}

fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let read_err = |p: &Path, e: std::io::Error| Failure::config(format!("{}: {e}", p.display()));
    let events_file = File::open(&args.events).map_err(|e| read_err(&args.events, e))?;
    let predictions = parse_events_jsonl(BufReader::new(events_file)).map_err(Failure::config)?;
    let truth_text = std::fs::read_to_string(&args.truth).map_err(|e| read_err(&args.truth, e))?;
    let truth = parse_truth_csv(&truth_text).map_err(Failure::config)?;
    let report = evaluate(&predictions, &truth).map_err(|e: EvalError| Failure::config(e))?;
    let text = if args.json {
        report.to_json() + "\n"
    } else {
        report.to_table()
    };
    let _ = write!(out, "{text}");
    Ok(())
}

/// Stub detector period; gives gesture stretches about as long as a real
/// gesture so the classifier stage gets exercised.
const BENCH_PERIOD: u64 = 45;

fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> Result<()> {
    let config = load_config(args.config.as_deref())?;
    let latency = Duration::from_millis(args.stub_latency_ms);
    let detector = StubBackend::detector(config.detector_depth, BENCH_PERIOD, latency).map_err(Failure::backend)?;
    let classifier = StubBackend::classifier(config.classifier_depth, LabelSet::jester(), BENCH_PERIOD * 2, latency)
        .map_err(Failure::backend)?;
    let source = SyntheticSource::new(args.frames, config.fps_assumed);
    let summary: RunSummary<f64> = Pipeline::new(config)?.run(source, &detector, &classifier, &mut NullSink)?;
    let _ = write!(out, "{}", latency_report(&summary));
    let _ = writeln!(
        out,
        "frames: {}, events: {}, peak buffer {}/{}",
        summary.frames_processed,
        summary.events.len(),
        summary.max_buffer_len,
        summary.buffer_capacity
    );
    if summary.frames_processed > 0 {
        let _ = writeln!(out, "sustained ingest: {:.1} fps", summary.throughput_fps());
    }
    Ok(())
}
