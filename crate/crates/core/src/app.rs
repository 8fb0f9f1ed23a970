//! Command-line driver behind the `asab` binary.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use crate::bench::{
    bench_batch, bench_stream, reference_table, write_reports_csv, BatchBenchConfig, BenchReport,
    StreamBenchConfig, StreamTransport,
};
use crate::bridge::{
    default_topics, BridgeClient, BridgeConfig, BridgeHandle, ClientOptions, TopicSpec,
};
use crate::fiducial::{run_averaging_experiment, ExperimentSettings};
use crate::geometry::{Pose, UnitQuaternion, Vec3};
use crate::pointcloud::{
    load_cloud, save_cloud, save_shaded_ply, shade, write_shading_csv, BatchStrategy, CloudFormat,
    PointSizing, ShadingMode, DEFAULT_CHUNK,
};
use crate::sim::{
    default_scene, frame_count, run_publisher, Drive, PublishOptions, Scene, SimConfig, Simulator,
    TeleopSegment, WaypointPlan,
};
use crate::wire::{decode_prefix, describe, hex_dump, monotonic_ns, MsgType, Role, WireMessage};

/// Failure of a subcommand. Usage errors exit with 2, everything else with 1.
#[derive(Debug)]
pub enum AppError {
    Usage(String),
    Failed(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => 2,
            AppError::Failed(_) => 1,
        }
    }
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::Usage(m) | AppError::Failed(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for AppError {}

fn failed(e: impl std::fmt::Display) -> AppError {
    AppError::Failed(e.to_string())
}

fn usage(e: impl std::fmt::Display) -> AppError {
    AppError::Usage(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "asab", version, about = "Robot point-cloud streaming toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the box-world robot simulator, offline or against a bridge.
    Simulate(SimulateArgs),
    /// Run the pub/sub bridge (framed TCP plus WebSocket gateway).
    Serve(ServeArgs),
    /// Publish a saved cloud to a bridge at a fixed rate.
    Replay(ReplayArgs),
    /// Shade a cloud file as seen from a viewer; writes a colored PLY or a per-point CSV.
    Shade(ShadeArgs),
    /// Loopback streaming benchmark: framed TCP vs chunked datagrams.
    BenchStream(BenchStreamArgs),
    /// Render-batch submission benchmark.
    BenchBatch(BenchBatchArgs),
    /// Tag averaging experiment, one CSV row per config and strategy.
    BenchTags(BenchTagsArgs),
    /// Decode a capture of concatenated frames into readable lines.
    ProtocolDump(ProtocolDumpArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Report file; the format follows the extension (.csv or .json).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Format used when writing to stdout.
    #[arg(long, value_enum, default_value = "csv")]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DriveKind {
    Stationary,
    Waypoints,
    Live,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scene JSON; the built-in two-room scene when omitted.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Full simulator configuration as JSON; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub rate: Option<f64>,
    /// Bridge address; without it the simulation runs offline.
    #[arg(long)]
    pub bridge: Option<SocketAddr>,
    /// Seconds to run. Offline runs default to 10 s; bridge runs go on until killed.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long, value_enum, default_value = "waypoints")]
    pub drive: DriveKind,
    /// JSON array of `{duration_s, linear, angular}` segments; overrides --drive.
    #[arg(long)]
    pub script: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Range noise sigma of the robot depth camera, meters.
    #[arg(long)]
    pub range_noise: Option<f64>,
    /// Publish as fast as possible instead of on the wall clock.
    #[arg(long)]
    pub no_realtime: bool,
    #[arg(long, default_value_t = 50)]
    pub connect_attempts: u32,
    /// Offline only: write the last cloud here (.ply or .pcd).
    #[arg(long)]
    pub save_cloud: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:9870")]
    pub tcp: SocketAddr,
    #[arg(long, default_value = "127.0.0.1:9871")]
    pub ws: SocketAddr,
    /// Disable the WebSocket gateway.
    #[arg(long)]
    pub no_ws: bool,
    #[arg(long, default_value_t = 1000)]
    pub heartbeat_ms: u64,
    #[arg(long, default_value_t = 5)]
    pub max_missed: u32,
    /// Extra topic as `name=msg_type[:depth][:latched]`, e.g. `lab/cloud=point_cloud:2`.
    #[arg(long = "topic")]
    pub topics: Vec<String>,
    /// Start without the standard topic table.
    #[arg(long)]
    pub no_default_topics: bool,
    /// Seconds to run; until killed when omitted.
    #[arg(long)]
    pub duration: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Cloud file (.ply or .pcd).
    #[arg(long)]
    pub cloud: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub rate: f64,
    /// Seconds to run; until killed when omitted.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long, default_value = "127.0.0.1:9870")]
    pub bridge: SocketAddr,
    #[arg(long, default_value = "map")]
    pub frame_id: String,
    #[arg(long, default_value_t = 50)]
    pub connect_attempts: u32,
}

#[derive(Debug, Args)]
pub struct ShadeArgs {
    /// Cloud file (.ply or .pcd).
    #[arg(long)]
    pub cloud: PathBuf,
    /// distance_ramp, axis_color, depth_rainbow, natural_color or sonar.
    #[arg(long, default_value = "distance_ramp")]
    pub mode: String,
    #[arg(long)]
    pub near: Option<f64>,
    #[arg(long)]
    pub far: Option<f64>,
    #[arg(long)]
    pub wavelength: Option<f64>,
    #[arg(long)]
    pub near_cutoff: Option<f64>,
    #[arg(long)]
    pub far_cutoff: Option<f64>,
    #[arg(long)]
    pub period: Option<f64>,
    #[arg(long)]
    pub max_range: Option<f64>,
    #[arg(long)]
    pub pulse_width: Option<f64>,
    /// Axis color box corner `x,y,z`.
    #[arg(long, value_parser = parse_vec3)]
    pub axis_min: Option<Vec3>,
    #[arg(long, value_parser = parse_vec3)]
    pub axis_max: Option<Vec3>,
    /// Viewer position `x,y,z` in meters.
    #[arg(long, value_parser = parse_vec3, default_value = "0,0,0", allow_hyphen_values = true)]
    pub viewer: Vec3,
    /// Viewer roll,pitch,yaw in degrees.
    #[arg(long, value_parser = parse_vec3, default_value = "0,0,0", allow_hyphen_values = true)]
    pub viewer_rpy: Vec3,
    /// Seconds, for the sonar animation.
    #[arg(long, default_value_t = 0.0)]
    pub time: f64,
    /// `.ply` for the kept points, `.csv` for every point with its keep flag.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransportArg {
    Naive,
    Chunked,
    Both,
}

#[derive(Debug, Args)]
pub struct BenchStreamArgs {
    #[arg(long, value_enum, default_value = "both")]
    pub transport: TransportArg,
    #[arg(long, default_value_t = 200 * 1024)]
    pub payload_bytes: usize,
    #[arg(long, default_value_t = 30.0)]
    pub rate: f64,
    #[arg(long, default_value_t = 5.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = crate::wire::MAX_CHUNK_PAYLOAD)]
    pub chunk_bytes: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    PerPoint,
    Chunked,
    Single,
    All,
}

#[derive(Debug, Args)]
pub struct BenchBatchArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub strategy: StrategyArg,
    /// Points per append for the chunked strategy.
    #[arg(long, default_value_t = DEFAULT_CHUNK)]
    pub chunk: usize,
    #[arg(long, default_value_t = 100_000)]
    pub count: usize,
    #[arg(long, default_value_t = 0.5)]
    pub extent: f64,
    #[arg(long, default_value_t = 5.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "distance_ramp")]
    pub mode: String,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct BenchTagsArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub seeds: usize,
    #[arg(long, default_value_t = 60.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 30.0)]
    pub rate: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ProtocolDumpArgs {
    /// Capture file: frames back to back, as written to the TCP stream.
    pub file: PathBuf,
    /// Also print each frame as hex.
    #[arg(long)]
    pub hex: bool,
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("expected x,y,z: {e}"))?;
    match parts[..] {
        [x, y, z] if parts.iter().all(|v| v.is_finite()) => Ok(Vec3::new(x, y, z)),
        _ => Err(format!("expected three finite numbers x,y,z, got {s:?}")),
    }
}

/// `name=msg_type[:depth][:latched]`
pub fn parse_topic_spec(s: &str) -> Result<TopicSpec, String> {
    let (name, rest) = s
        .split_once('=')
        .ok_or_else(|| format!("topic {s:?}: expected name=msg_type[:depth][:latched]"))?;
    let mut parts = rest.split(':');
    let type_name = parts.next().unwrap_or_default();
    let msg_type = MsgType::ALL
        .iter()
        .copied()
        .find(|t| t.name() == type_name)
        .ok_or_else(|| format!("topic {s:?}: unknown message type {type_name:?}"))?;
    let mut spec = TopicSpec::new(name, msg_type, 16);
    for p in parts {
        if p == "latched" {
            spec = spec.latched();
        } else {
            spec.queue_depth = p
                .parse()
                .map_err(|_| format!("topic {s:?}: bad queue depth {p:?}"))?;
        }
    }
    if spec.name.is_empty() || spec.queue_depth == 0 {
        return Err(format!("topic {s:?}: empty name or zero depth"));
    }
    Ok(spec)
}

fn existing(path: &Path) -> Result<&Path, AppError> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(usage(format!("no such file: {}", path.display())))
    }
}

fn cloud_format(path: &Path) -> Result<CloudFormat, AppError> {
    CloudFormat::from_path(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Parses `args` (program name first) and runs the subcommand. Returns the
/// process exit status.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("asab: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Serve(a) => serve(a),
        Command::Replay(a) => replay(a),
        Command::Shade(a) => shade_cmd(a),
        Command::BenchStream(a) => bench_stream_cmd(a),
        Command::BenchBatch(a) => bench_batch_cmd(a),
        Command::BenchTags(a) => bench_tags_cmd(a),
        Command::ProtocolDump(a) => protocol_dump(a),
    }
}

fn simulate(a: SimulateArgs) -> Result<(), AppError> {
    let scene = match &a.scene {
        Some(p) => Scene::load(existing(p)?).map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => default_scene(),
    };
    let mut config = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(existing(p)?).map_err(failed)?;
            serde_json::from_str::<SimConfig>(&text)
                .map_err(|e| usage(format!("{}: {e}", p.display())))?
        }
        None => SimConfig::default(),
    };
    if let Some(r) = a.rate {
        config.rate_hz = r;
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(n) = a.range_noise {
        config.camera.range_noise_sigma_m = n;
    }
    let drive = match &a.script {
        Some(p) => {
            let text = fs::read_to_string(existing(p)?).map_err(failed)?;
            let segments: Vec<TeleopSegment> =
                serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            Drive::Script { segments }
        }
        None => match a.drive {
            DriveKind::Stationary => Drive::Stationary,
            DriveKind::Waypoints => Drive::Waypoints(WaypointPlan::default()),
            DriveKind::Live => Drive::Live,
        },
    };
    if let Some(d) = a.duration {
        if !(d >= 0.0 && d.is_finite()) {
            return Err(usage(format!(
                "duration {d} must be a finite number of seconds"
            )));
        }
    }
    let mut sim = Simulator::new(scene, config, drive).map_err(usage)?;

    match a.bridge {
        Some(bridge) => {
            let opts = PublishOptions {
                bridge,
                duration_s: a.duration,
                realtime: !a.no_realtime,
                connect_attempts: a.connect_attempts,
            };
            let stop = AtomicBool::new(false);
            let summary = run_publisher(&mut sim, &opts, &stop).map_err(failed)?;
            println!("{}", serde_json::to_string(&summary).map_err(failed)?);
        }
        None => {
            let frames = frame_count(a.duration.unwrap_or(10.0), sim.config().rate_hz);
            let mut last = None;
            for _ in 0..frames {
                let f = sim.tick().map_err(failed)?;
                println!(
                    "tick {} t={:.3} x={:.4} y={:.4} heading={:.4} points={} tags={}",
                    f.tick,
                    f.timestamp_ns as f64 * 1e-9,
                    f.state.position.x,
                    f.state.position.y,
                    f.state.heading,
                    f.cloud.len(),
                    f.tags.len()
                );
                last = Some(f);
            }
            if let (Some(path), Some(f)) = (&a.save_cloud, last) {
                save_cloud(path, &f.cloud, cloud_format(path)?).map_err(failed)?;
            }
        }
    }
    Ok(())
}

fn serve(a: ServeArgs) -> Result<(), AppError> {
    let mut topics = if a.no_default_topics {
        Vec::new()
    } else {
        default_topics()
    };
    for t in &a.topics {
        topics.push(parse_topic_spec(t).map_err(usage)?);
    }
    if a.heartbeat_ms == 0 || a.max_missed == 0 {
        return Err(usage(
            "heartbeat interval and missed count must be positive",
        ));
    }
    let config = BridgeConfig {
        tcp_addr: a.tcp,
        ws_addr: (!a.no_ws).then_some(a.ws),
        heartbeat_interval: Duration::from_millis(a.heartbeat_ms),
        max_missed_heartbeats: a.max_missed,
        topics,
    };
    let handle = BridgeHandle::start(config).map_err(failed)?;
    let ws = handle
        .ws_addr()
        .map(|a| a.to_string())
        .unwrap_or_else(|| "off".into());
    println!("listening tcp={} ws={ws}", handle.tcp_addr());
    let _ = io::stdout().flush();

    let start = Instant::now();
    let mut last_report = Instant::now();
    loop {
        if let Some(d) = a.duration {
            if start.elapsed().as_secs_f64() >= d {
                break;
            }
        }
        std::thread::sleep(Duration::from_millis(50));
        if last_report.elapsed() >= Duration::from_secs(10) {
            let hub = handle.hub();
            info!(
                "sessions={} published={}",
                hub.session_count(),
                hub.published()
            );
            last_report = Instant::now();
        }
    }
    handle.shutdown();
    Ok(())
}

fn replay(a: ReplayArgs) -> Result<(), AppError> {
    if !(a.rate > 0.0 && a.rate.is_finite()) {
        return Err(usage(format!("rate {} must be positive", a.rate)));
    }
    let path = existing(&a.cloud)?;
    let mut cloud = load_cloud(path, cloud_format(path)?)
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    cloud.set_frame_id(a.frame_id.clone());
    cloud.set_timestamp_ns(monotonic_ns());
    let msg = WireMessage::point_cloud(&cloud);
    let frame = crate::wire::encode(&msg).map_err(failed)?;
    let client = BridgeClient::connect_with_retry(
        a.bridge,
        &ClientOptions::new("replay", Role::Publisher),
        a.connect_attempts,
        Duration::from_millis(100),
    )
    .map_err(failed)?;
    let frames = a.duration.map(|d| frame_count(d, a.rate));
    let period = Duration::from_secs_f64(1.0 / a.rate);
    let start = Instant::now();
    let mut sent = 0u64;
    while frames.is_none_or(|n| sent < n) {
        let due = start + period.mul_f64(sent as f64);
        if let Some(wait) = due.checked_duration_since(Instant::now()) {
            std::thread::sleep(wait);
        }
        client.send_frame(&frame).map_err(failed)?;
        sent += 1;
        info!("replayed frame {sent}");
    }
    println!("replayed {sent} frames of {} points", cloud.len());
    Ok(())
}

fn shading_mode(a: &ShadeArgs) -> Result<ShadingMode, AppError> {
    let mut mode = ShadingMode::default_for(&a.mode).ok_or_else(|| {
        usage(format!(
            "unknown mode {:?} (distance_ramp, axis_color, depth_rainbow, natural_color, sonar)",
            a.mode
        ))
    })?;
    match &mut mode {
        ShadingMode::DistanceRamp { near, far } => {
            *near = a.near.unwrap_or(*near);
            *far = a.far.unwrap_or(*far);
        }
        ShadingMode::AxisColor { min, max } => {
            *min = a.axis_min.unwrap_or(*min);
            *max = a.axis_max.unwrap_or(*max);
        }
        ShadingMode::DepthRainbow {
            near,
            far,
            wavelength,
        } => {
            *near = a.near.unwrap_or(*near);
            *far = a.far.unwrap_or(*far);
            *wavelength = a.wavelength.unwrap_or(*wavelength);
        }
        ShadingMode::NaturalColor {
            near_cutoff,
            far_cutoff,
        } => {
            *near_cutoff = a.near_cutoff.unwrap_or(*near_cutoff);
            *far_cutoff = a.far_cutoff.unwrap_or(*far_cutoff);
        }
        ShadingMode::Sonar {
            period,
            max_range,
            pulse_width,
        } => {
            *period = a.period.unwrap_or(*period);
            *max_range = a.max_range.unwrap_or(*max_range);
            *pulse_width = a.pulse_width.unwrap_or(*pulse_width);
        }
    }
    mode.validate().map_err(usage)?;
    Ok(mode)
}

fn shade_cmd(a: ShadeArgs) -> Result<(), AppError> {
    let path = existing(&a.cloud)?;
    let mode = shading_mode(&a)?;
    if !a.time.is_finite() {
        return Err(usage("time must be finite"));
    }
    let cloud = load_cloud(path, cloud_format(path)?)
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let rpy = a.viewer_rpy * std::f64::consts::PI / 180.0;
    let viewer = Pose::new(a.viewer, UnitQuaternion::from_euler(rpy.x, rpy.y, rpy.z));
    let shaded = shade(&cloud, &mode, &viewer, a.time, &PointSizing::default());
    let positions: Vec<[f32; 3]> = cloud.points().iter().map(|p| p.position).collect();
    let kept = match a.out.extension().and_then(|e| e.to_str()) {
        Some("csv") => {
            let text = write_shading_csv(&positions, &shaded).map_err(failed)?;
            std::fs::write(&a.out, text)
                .map_err(|e| failed(format!("{}: {e}", a.out.display())))?;
            shaded.iter().filter(|s| s.keep).count()
        }
        Some("ply") => save_shaded_ply(&a.out, &positions, &shaded).map_err(failed)?,
        _ => {
            return Err(usage(format!(
                "{}: output must end in .ply or .csv",
                a.out.display()
            )))
        }
    };
    println!(
        "{}: kept {kept} of {} points -> {}",
        mode.name(),
        cloud.len(),
        a.out.display()
    );
    Ok(())
}

fn write_reports(reports: &[BenchReport], out: &OutputArgs) -> Result<(), AppError> {
    let format = match &out.out {
        Some(p) => match p.extension().and_then(|e| e.to_str()) {
            Some("json") => OutputFormat::Json,
            Some("csv") => OutputFormat::Csv,
            _ => {
                return Err(usage(format!(
                    "{}: output must end in .csv or .json",
                    p.display()
                )))
            }
        },
        None => out.format,
    };
    let reports: Vec<BenchReport> = reports
        .iter()
        .cloned()
        .map(BenchReport::without_samples)
        .collect();
    let mut buf = Vec::new();
    match format {
        OutputFormat::Csv => write_reports_csv(&reports, &mut buf).map_err(failed)?,
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut buf, &reports).map_err(failed)?;
            buf.push(b'\n');
        }
    }
    emit(&buf, out.out.as_deref())
}

fn emit(bytes: &[u8], path: Option<&Path>) -> Result<(), AppError> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| failed(format!("{}: {e}", p.display()))),
        None => io::stdout().write_all(bytes).map_err(failed),
    }
}

fn bench_stream_cmd(a: BenchStreamArgs) -> Result<(), AppError> {
    let transports: &[StreamTransport] = match a.transport {
        TransportArg::Naive => &[StreamTransport::NaivePerMessage],
        TransportArg::Chunked => &[StreamTransport::ChunkedDatagram],
        TransportArg::Both => &[
            StreamTransport::NaivePerMessage,
            StreamTransport::ChunkedDatagram,
        ],
    };
    let mut reports = Vec::new();
    for &transport in transports {
        let cfg = StreamBenchConfig {
            payload_bytes: a.payload_bytes,
            rate_hz: a.rate,
            duration_s: a.duration,
            transport,
            seed: a.seed,
            chunk_bytes: a.chunk_bytes,
            ..StreamBenchConfig::default()
        };
        let r = bench_stream(&cfg).map_err(|e| match e {
            crate::bench::BenchError::InvalidConfig(m) => usage(m),
            other => failed(other),
        })?;
        reports.push(r);
    }
    if let [naive, chunked] = &reports[..] {
        eprint!("{}", reference_table(naive, chunked));
    }
    write_reports(&reports, &a.output)
}

fn bench_batch_cmd(a: BenchBatchArgs) -> Result<(), AppError> {
    let mode = ShadingMode::default_for(&a.mode)
        .ok_or_else(|| usage(format!("unknown mode {:?}", a.mode)))?;
    if a.chunk == 0 {
        return Err(usage("--chunk must be at least 1"));
    }
    let strategies = match a.strategy {
        StrategyArg::PerPoint => vec![BatchStrategy::PerPoint],
        StrategyArg::Chunked => vec![BatchStrategy::Chunked(a.chunk)],
        StrategyArg::Single => vec![BatchStrategy::SingleBuffer],
        StrategyArg::All => vec![
            BatchStrategy::PerPoint,
            BatchStrategy::Chunked(a.chunk),
            BatchStrategy::SingleBuffer,
        ],
    };
    let mut reports = Vec::new();
    for strategy in strategies {
        let cfg = BatchBenchConfig {
            count: a.count,
            extent_m: a.extent,
            duration_s: a.duration,
            strategy,
            seed: a.seed,
            mode,
        };
        let r = bench_batch(&cfg).map_err(|e| match e {
            crate::bench::BenchError::InvalidConfig(m) => usage(m),
            other => failed(other),
        })?;
        eprintln!("{:<24} median {:>10.2} batches/s", r.bench, r.median);
        reports.push(r);
    }
    write_reports(&reports, &a.output)
}

fn bench_tags_cmd(a: BenchTagsArgs) -> Result<(), AppError> {
    if a.seeds == 0 || !(a.duration > 0.0) || !(a.rate > 0.0) {
        return Err(usage("seeds, duration and rate must be positive"));
    }
    let settings = ExperimentSettings {
        rate_hz: a.rate,
        duration_s: a.duration,
        seed: a.seed,
        n_seeds: a.seeds,
        ..ExperimentSettings::default()
    };
    let report = run_averaging_experiment(&settings).map_err(failed)?;
    let format = match &a.output.out {
        Some(p) if p.extension().and_then(|e| e.to_str()) == Some("json") => OutputFormat::Json,
        Some(p) if p.extension().and_then(|e| e.to_str()) == Some("csv") => OutputFormat::Csv,
        Some(p) => {
            return Err(usage(format!(
                "{}: output must end in .csv or .json",
                p.display()
            )))
        }
        None => a.output.format,
    };
    let bytes = match format {
        OutputFormat::Csv => report.to_csv_string().into_bytes(),
        OutputFormat::Json => {
            let mut v = serde_json::to_vec_pretty(&report).map_err(failed)?;
            v.push(b'\n');
            v
        }
    };
    emit(&bytes, a.output.out.as_deref())
}

fn protocol_dump(a: ProtocolDumpArgs) -> Result<(), AppError> {
    let bytes = fs::read(existing(&a.file)?).map_err(failed)?;
    let mut offset = 0;
    let mut index = 0;
    let mut out = io::stdout().lock();
    while offset < bytes.len() {
        let (msg, len) = decode_prefix(&bytes[offset..])
            .map_err(|e| failed(format!("frame {index} at byte {offset}: {e}")))?;
        writeln!(out, "#{index} @{offset} len={len} {}", describe(&msg)).map_err(failed)?;
        if a.hex {
            writeln!(out, "{}", hex_dump(&bytes[offset..offset + len])).map_err(failed)?;
        }
        offset += len;
        index += 1;
    }
    writeln!(out, "{index} frames, {offset} bytes").map_err(failed)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topic_specs() {
        let t = parse_topic_spec("lab/cloud=point_cloud:2:latched").unwrap();
        assert_eq!(t.name, "lab/cloud");
        assert_eq!(t.msg_type, MsgType::PointCloud);
        assert_eq!(t.queue_depth, 2);
        assert!(t.latched);
        assert_eq!(parse_topic_spec("x=twist").unwrap().queue_depth, 16);
        for bad in ["nope", "x=bogus", "x=twist:0", "=twist", "x=twist:abc"] {
            assert!(parse_topic_spec(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn vec3_flags() {
        assert_eq!(parse_vec3("1, -2,3.5").unwrap(), Vec3::new(1.0, -2.0, 3.5));
        assert!(parse_vec3("1,2").is_err());
        assert!(parse_vec3("1,2,nan").is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_from(["asab", "--bogus"]), 2);
        assert_eq!(
            run_from([
                "asab",
                "shade",
                "--cloud",
                "/nonexistent.ply",
                "--out",
                "/tmp/x.ply"
            ]),
            2
        );
        assert_eq!(run_from(["asab", "protocol-dump", "/nonexistent.bin"]), 2);
    }

    #[test]
    fn mode_flags_override_defaults() {
        let cli = Cli::try_parse_from([
            "asab",
            "shade",
            "--cloud",
            "c.ply",
            "--out",
            "o.ply",
            "--mode",
            "natural_color",
            "--far-cutoff",
            "3.5",
        ])
        .unwrap();
        let Command::Shade(a) = cli.command else {
            panic!()
        };
        assert_eq!(
            shading_mode(&a).unwrap(),
            ShadingMode::NaturalColor {
                near_cutoff: 2.0,
                far_cutoff: 3.5
            }
        );
    }
}
