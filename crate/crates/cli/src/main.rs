use std::fs;
use std::io::{self, BufReader, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mallnav::evalmetrics::{detection_pr, overlap_percentage, OverlapReport, PrReport};
use mallnav::extract::StoreRegion;
use mallnav::fixture::{generate, FixtureParams, GroundTruth};
use mallnav::layers::{load_fused_map, save_fused_map, FusedMap, LayersError};
use mallnav::narrate::{
    describe_poi, describe_position, describe_route_to, extended_info, DistanceUnit, Frame, Utterance,
};
use mallnav::pipeline::{self, MapSettings, PipelineConfig, PipelineError};
use mallnav::raster::{BinaryMask, Point, RasterError};
use mallnav::register::{PointSet, RegistrationSummary, Transform};
use mallnav::route::{build_walk_graph, route_between_stores, Pose, Route, RouteError};
use mallnav::walk::WalkSession;

const FEATURES_FILE: &str = "features.json";
const REGISTRATION_FILE: &str = "registration.json";
const OVERLAY_FILE: &str = "overlay.png";
const FUSED_FILE: &str = "fused_map.json";

#[derive(Parser)]
#[command(name = "mallnav", version, about = "Fuse street maps with store directories and narrate walking routes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect roads, parking, walkways and stores; write masks and a feature dump.
    Extract(ConfigArgs),
    /// Register directory stores onto the map; write the transform and an overlay.
    Register(ConfigArgs),
    /// Run the whole pipeline and write the fused map.
    Fuse(FuseArgs),
    /// Route between two stores and describe it.
    Route(RouteArgs),
    /// Describe a pose: where am I, points of interest, or extended info.
    Describe(DescribeArgs),
    /// Overlap and detection metrics.
    Eval(EvalArgs),
    /// Write a synthetic map, directory and ground truth.
    Fixture(FixtureArgs),
    /// Walk a fused map interactively.
    Walk(WalkArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Pipeline config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FuseArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Print the overlap report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct NarrationArgs {
    #[arg(long, value_enum)]
    unit: Option<UnitArg>,
    #[arg(long, value_enum)]
    frame: Option<FrameArg>,
    /// Step length in feet, for step units.
    #[arg(long)]
    step_length: Option<f64>,
}

#[derive(Args)]
struct WeightArgs {
    #[arg(long)]
    walkway: Option<f64>,
    #[arg(long)]
    crossing: Option<f64>,
    #[arg(long)]
    parking: Option<f64>,
    #[arg(long)]
    unsafe_crossing: Option<f64>,
}

#[derive(Args)]
struct RouteArgs {
    /// Fused map file.
    #[arg(long)]
    map: PathBuf,
    /// Start store, by id or name.
    #[arg(long)]
    from: String,
    /// Destination store, by id or name.
    #[arg(long)]
    to: String,
    #[command(flatten)]
    weights: WeightArgs,
    #[command(flatten)]
    narration: NarrationArgs,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Where,
    Poi,
    Info,
}

#[derive(Clone, Copy, ValueEnum)]
enum UnitArg {
    Feet,
    Steps,
}

#[derive(Clone, Copy, ValueEnum)]
enum FrameArg {
    Egocentric,
    Allocentric,
}

#[derive(Args)]
struct DescribeArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    x: f64,
    #[arg(long, allow_negative_numbers = true)]
    y: f64,
    /// Degrees clockwise from North.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    heading: f64,
    #[arg(long, value_enum, default_value_t = Kind::Where)]
    kind: Kind,
    /// Landmark count for `poi`.
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[command(flatten)]
    narration: NarrationArgs,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Pipeline config; map stores are detected from its map image.
    #[arg(long, conflicts_with_all = ["mask_a", "mask_b"])]
    config: Option<PathBuf>,
    /// Fused map; defaults to the fused map in the config's output directory.
    #[arg(long, requires = "config")]
    map: Option<PathBuf>,
    /// Ground truth from `fixture`, for detection precision and recall.
    #[arg(long, requires = "config")]
    truth: Option<PathBuf>,
    /// Base-map store mask (denominator).
    #[arg(long, requires = "mask_b")]
    mask_a: Option<PathBuf>,
    /// Registered store mask.
    #[arg(long, requires = "mask_a")]
    mask_b: Option<PathBuf>,
    /// Centroid match distance in pixels.
    #[arg(long, default_value_t = 5.0)]
    match_dist: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct FixtureArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 12)]
    n_stores: u32,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    rotation_max: Option<f64>,
    #[arg(long)]
    scale_min: Option<f64>,
    #[arg(long)]
    scale_max: Option<f64>,
    #[arg(long)]
    shear_max: Option<f64>,
    #[arg(long)]
    jitter: Option<f64>,
    #[arg(long)]
    clutter: Option<u32>,
}

#[derive(Args)]
struct WalkArgs {
    #[arg(long)]
    map: PathBuf,
    /// Start position; defaults to the first walkway node.
    #[arg(long, allow_negative_numbers = true, requires = "y")]
    x: Option<f64>,
    #[arg(long, allow_negative_numbers = true, requires = "x")]
    y: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    heading: f64,
    /// Read commands from a file instead of standard input.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Save the map, with any new tags, here on exit.
    #[arg(long)]
    save: Option<PathBuf>,
    #[command(flatten)]
    narration: NarrationArgs,
}

enum Failure {
    Input(String),
    Pipeline(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 3,
            Failure::Pipeline(_) => 4,
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Pipeline(e.to_string())
        }
    }
}

impl From<LayersError> for Failure {
    fn from(e: LayersError) -> Self {
        match e {
            LayersError::Io(_) | LayersError::Parse { .. } | LayersError::Version { .. } => Failure::Input(e.to_string()),
            _ => Failure::Pipeline(e.to_string()),
        }
    }
}

impl From<RouteError> for Failure {
    fn from(e: RouteError) -> Self {
        match e {
            RouteError::UnknownStore(_) | RouteError::InvalidWeights(_) | RouteError::InvalidK => {
                Failure::Input(e.to_string())
            }
            _ => Failure::Pipeline(e.to_string()),
        }
    }
}

impl From<mallnav::narrate::NarrateError> for Failure {
    fn from(e: mallnav::narrate::NarrateError) -> Self {
        Failure::Pipeline(e.to_string())
    }
}

impl From<RasterError> for Failure {
    fn from(e: RasterError) -> Self {
        Failure::Input(e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |e| Failure::Input(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

fn pretty(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

fn load_config(args: &ConfigArgs) -> Result<(PipelineConfig, PathBuf), Failure> {
    let cfg = PipelineConfig::load(&args.config)?;
    cfg.validate()?;
    let out = args.out.clone().unwrap_or_else(|| cfg.output_dir());
    fs::create_dir_all(&out).map_err(io_err(&out))?;
    Ok((cfg, out))
}

fn load_map(path: &Path) -> Result<FusedMap, Failure> {
    Ok(load_fused_map(path)?)
}

fn settings(map: &FusedMap, n: &NarrationArgs, w: Option<&WeightArgs>) -> Result<MapSettings, Failure> {
    let mut s = MapSettings::from_map(map);
    if let Some(u) = n.unit {
        s.narration.distance_unit = match u {
            UnitArg::Feet => DistanceUnit::Feet,
            UnitArg::Steps => DistanceUnit::Steps,
        };
    }
    if let Some(f) = n.frame {
        s.narration.frame = match f {
            FrameArg::Egocentric => Frame::Egocentric,
            FrameArg::Allocentric => Frame::Allocentric,
        };
    }
    if let Some(l) = n.step_length {
        s.narration.step_length_feet = l;
    }
    if let Some(w) = w {
        let ws = &mut s.weights;
        for (slot, v) in [
            (&mut ws.walkway, w.walkway),
            (&mut ws.crossing, w.crossing),
            (&mut ws.parking, w.parking),
            (&mut ws.unsafe_street_crossing, w.unsafe_crossing),
        ] {
            if let Some(v) = v {
                *slot = v;
            }
        }
        s.weights.validate()?;
    }
    s.narration.validate().map_err(|e| Failure::Input(e.to_string()))?;
    Ok(s)
}

fn find_store(map: &FusedMap, key: &str) -> Result<u32, Failure> {
    key.parse::<u32>()
        .ok()
        .and_then(|id| map.store(id))
        .or_else(|| map.store_by_name(key))
        .map(|s| s.id)
        .ok_or_else(|| RouteError::UnknownStore(key.to_string()).into())
}

#[derive(Serialize)]
struct FeatureDump<'a> {
    map_stores: &'a [StoreRegion],
    parking: &'a [StoreRegion],
    directory_stores: &'a [StoreRegion],
    map_control_points: &'a PointSet,
    directory_control_points: &'a PointSet,
    pixel_counts: PixelCounts,
}

#[derive(Serialize)]
struct PixelCounts {
    roads: usize,
    parking: usize,
    walkways: usize,
    labels: usize,
}

fn cmd_extract(args: &ConfigArgs) -> Result<String, Failure> {
    let (cfg, out) = load_config(args)?;
    let ex = pipeline::extract(&cfg)?;
    let m = &ex.map.masks;
    let labels = m.labels.foreground();
    for (name, mask) in [("roads", &m.roads), ("parking", &m.parking), ("walkways", &m.walkways), ("labels", &labels)] {
        mask.save_png(out.join(format!("{name}_mask.png")))?;
    }
    let dump = FeatureDump {
        map_stores: &ex.map.stores,
        parking: &ex.map.parking,
        directory_stores: &ex.directory_stores,
        map_control_points: &ex.map_points,
        directory_control_points: &ex.directory_points,
        pixel_counts: PixelCounts {
            roads: m.roads.count(),
            parking: m.parking.count(),
            walkways: m.walkways.count(),
            labels: labels.count(),
        },
    };
    write_file(&out.join(FEATURES_FILE), pretty(&dump))?;
    Ok(format!(
        "{} map stores, {} parking lots, {} directory stores -> {}\n",
        ex.map.stores.len(),
        ex.map.parking.len(),
        ex.directory_stores.len(),
        out.display()
    ))
}

#[derive(Serialize)]
struct RegistrationDump<'a> {
    summary: RegistrationSummary,
    transform: &'a Transform,
    log_likelihood_trace: &'a [f64],
    warped_stores: &'a [StoreRegion],
}

fn cmd_register(args: &ConfigArgs) -> Result<String, Failure> {
    let (cfg, out) = load_config(args)?;
    let ex = pipeline::extract(&cfg)?;
    let reg = pipeline::register(&cfg, &ex)?;
    let dump = RegistrationDump {
        summary: reg.result.summary(),
        transform: &reg.result.transform,
        log_likelihood_trace: &reg.result.log_likelihood_trace,
        warped_stores: &reg.warped,
    };
    write_file(&out.join(REGISTRATION_FILE), pretty(&dump))?;
    pipeline::overlay(&ex.map_image, &reg.warped).save_png(out.join(OVERLAY_FILE))?;
    let s = dump.summary;
    Ok(format!(
        "{:?} registration of {} onto {} points: {} iterations, sigma2 {:.3e} -> {}\n",
        s.mode,
        s.source_points,
        s.target_points,
        s.iterations,
        s.sigma2,
        out.display()
    ))
}

fn cmd_fuse(args: &FuseArgs) -> Result<String, Failure> {
    let (cfg, out) = load_config(&args.cfg)?;
    let run = pipeline::run(&cfg)?;
    let path = out.join(FUSED_FILE);
    save_fused_map(&run.map, &path)?;
    pipeline::overlay(&run.extracted.map_image, &run.registered.warped).save_png(out.join(OVERLAY_FILE))?;
    if args.json {
        return Ok(pretty(&run.overlap));
    }
    Ok(format!("{}\nfused map -> {}\n", run.overlap.summary(), path.display()))
}

#[derive(Serialize)]
struct RouteOutput<'a> {
    from: u32,
    to: u32,
    route: &'a Route,
    path: Vec<Point>,
    utterance: &'a Utterance,
}

fn cmd_route(args: &RouteArgs) -> Result<String, Failure> {
    let map = load_map(&args.map)?;
    let s = settings(&map, &args.narration, Some(&args.weights))?;
    let (from, to) = (find_store(&map, &args.from)?, find_store(&map, &args.to)?);
    let g = build_walk_graph(&map, s.grid_step)?;
    let route = route_between_stores(&g, from, to, &s.weights)?;
    let u = describe_route_to(&map, &g, &route, map.store(to), None, &s.narration)?;
    if args.json {
        let path = route.positions(&g);
        return Ok(pretty(&RouteOutput { from, to, route: &route, path, utterance: &u }));
    }
    Ok(u.text())
}

fn cmd_describe(args: &DescribeArgs) -> Result<String, Failure> {
    let map = load_map(&args.map)?;
    let s = settings(&map, &args.narration, None)?;
    let pose = Pose::new(Point::new(args.x, args.y), args.heading);
    let u = match args.kind {
        Kind::Where => {
            let g = build_walk_graph(&map, s.grid_step)?;
            describe_position(&map, &g, pose, &s.narration)?
        }
        Kind::Poi => describe_poi(&map, pose, args.k, &s.narration).map_err(|e| Failure::Input(e.to_string()))?,
        Kind::Info => extended_info(&map, pose, &s.narration)?,
    };
    Ok(if args.json { u.to_json() + "\n" } else { u.text() })
}

#[derive(Serialize)]
struct EvalReport {
    overlap: OverlapReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    parking: Option<PrReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stores: Option<PrReport>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn pr_line(what: &str, r: &PrReport) -> String {
    format!("{what}: precision {:.3}, recall {:.3} ({} of {} matched)\n", r.precision, r.recall, r.matched, r.truth)
}

fn cmd_eval(args: &EvalArgs) -> Result<String, Failure> {
    if !(args.match_dist > 0.0) {
        return Err(Failure::Input("match-dist must be positive".into()));
    }
    let report = if let (Some(a), Some(b)) = (&args.mask_a, &args.mask_b) {
        let (a, b) = (BinaryMask::load_png(a)?, BinaryMask::load_png(b)?);
        EvalReport { overlap: overlap_percentage(&a, &b)?, parking: None, stores: None }
    } else if let Some(config) = &args.config {
        let cfg = PipelineConfig::load(config)?;
        cfg.validate()?;
        let map_path = args.map.clone().unwrap_or_else(|| cfg.output_dir().join(FUSED_FILE));
        let map = load_map(&map_path)?;
        let ex = pipeline::extract(&cfg)?;
        let overlap = overlap_percentage(&pipeline::map_store_mask(&ex), &pipeline::registered_store_mask(&map))
            .map_err(|e| Failure::Input(format!("fused map and config disagree: {e}")))?;
        let (mut parking, mut stores) = (None, None);
        if let Some(t) = &args.truth {
            let truth: GroundTruth = read_json(t)?;
            let pts = |r: &[mallnav::fixture::TruthRegion]| r.iter().map(|r| r.centroid).collect::<Vec<_>>();
            parking = Some(detection_pr(&ex.map.parking, &pts(&truth.parking), args.match_dist));
            stores = Some(detection_pr(&ex.map.stores, &pts(&truth.stores), args.match_dist));
        }
        EvalReport { overlap, parking, stores }
    } else {
        return Err(Failure::Input("eval needs --config or --mask-a with --mask-b".into()));
    };
    if args.json {
        return Ok(pretty(&report));
    }
    let mut out = format!("{}\n", report.overlap.summary());
    if let Some(p) = &report.parking {
        out.push_str(&pr_line("parking lots", p));
    }
    if let Some(s) = &report.stores {
        out.push_str(&pr_line("map stores", s));
    }
    Ok(out)
}

fn cmd_fixture(args: &FixtureArgs) -> Result<String, Failure> {
    let d = FixtureParams::default();
    let params = FixtureParams {
        seed: args.seed,
        n_stores: args.n_stores,
        rotation_max_deg: args.rotation_max.unwrap_or(d.rotation_max_deg),
        scale_range: (args.scale_min.unwrap_or(d.scale_range.0), args.scale_max.unwrap_or(d.scale_range.1)),
        shear_max: args.shear_max.unwrap_or(d.shear_max),
        jitter_px: args.jitter.unwrap_or(d.jitter_px),
        clutter: args.clutter.unwrap_or(d.clutter),
    };
    let fixture = generate(&params).map_err(|e| Failure::Input(e.to_string()))?;
    fixture.write(&args.out).map_err(|e| Failure::Pipeline(e.to_string()))?;
    Ok(format!(
        "seed {}: {} stores, {} directory entries -> {}\n",
        params.seed,
        fixture.truth.stores.len(),
        fixture.truth.directory.len(),
        args.out.display()
    ))
}

fn cmd_walk(args: &WalkArgs) -> Result<String, Failure> {
    let map = load_map(&args.map)?;
    let s = settings(&map, &args.narration, None)?;
    let g = build_walk_graph(&map, s.grid_step)?;
    let position = match (args.x, args.y) {
        (Some(x), Some(y)) => Point::new(x, y),
        _ => g.nodes.first().map(|n| n.position).ok_or_else(|| Failure::Input("map has no walkable area".into()))?,
    };
    let mut session = WalkSession::new(map, g, s.weights, s.narration, Pose::new(position, args.heading));
    let stdout = io::stdout();
    let result = match &args.script {
        Some(p) => {
            let f = fs::File::open(p).map_err(io_err(p))?;
            session.run(BufReader::new(f), stdout.lock(), false)
        }
        None => {
            let stdin = io::stdin();
            let prompt = stdin.is_terminal();
            session.run(stdin.lock(), stdout.lock(), prompt)
        }
    };
    result.map_err(|e| Failure::Input(e.to_string()))?;
    if let Some(p) = &args.save {
        save_fused_map(&session.map, p)?;
    }
    Ok(String::new())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Extract(a) => cmd_extract(a),
        Command::Register(a) => cmd_register(a),
        Command::Fuse(a) => cmd_fuse(a),
        Command::Route(a) => cmd_route(a),
        Command::Describe(a) => cmd_describe(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Fixture(a) => cmd_fixture(a),
        Command::Walk(a) => cmd_walk(a),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            let _ = io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(f) => {
            let (Failure::Input(m) | Failure::Pipeline(m)) = &f;
            eprintln!("error: {m}");
            ExitCode::from(f.code())
        }
    }
}
