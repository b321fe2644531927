//! Argument parsing and subcommand bodies.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use phreact_core::calibration::{fit_calibration, MeasurementTable};
use phreact_core::chemistry::{
    default_reservoirs, equilibrium_ph, mix, ChemistryError, PhValue, Solution, SolutionSpec, SpeciesDb,
    DEFAULT_PH_TOL,
};
use phreact_core::controller::{format_trace_table, run_to_setpoint, ControllerConfig, ControllerError};
use phreact_core::fluidics::{gradiator_profile, gradiator_transient, ticker_arrival_times, Boundary, Channel};
use phreact_core::materials::{CalibrationSet, PrimitiveKind};
use phreact_core::scene::{
    frame_csv_header, load_scenario, series_csv_header, shipped_scenario, write_frame_rows, write_series_row,
    Frame, Scene, SHIPPED_SCENARIOS,
};

use crate::render::write_png;
use crate::service::{router, SceneHandle, ServiceConfig};

/// Environment variable naming the default calibration file.
pub const CALIBRATION_ENV: &str = "PHREACT_CALIBRATION";

#[derive(Debug, Parser)]
#[command(name = "phreact", version, about = "pH-responsive material simulator")]
pub struct Cli {
    /// Species database (TOML); defaults to the built-in table.
    #[arg(long, global = true, value_name = "FILE")]
    species: Option<PathBuf>,
    /// Calibration file; defaults to the built-in synthetic calibration.
    #[arg(long, global = true, value_name = "FILE", env = CALIBRATION_ENV)]
    calibration: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the equilibrium pH of a solution file.
    Ph {
        solution: PathBuf,
        /// Decimal places.
        #[arg(long, default_value_t = 4)]
        digits: usize,
    },
    /// Mix two solutions by volume and print the resulting pH.
    Mix {
        a: PathBuf,
        /// Litres of `a`.
        va: f64,
        b: PathBuf,
        /// Litres of `b`.
        vb: f64,
        /// Write the mixture as a solution file.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Run the closed-loop mixer to a target pH and print its trace.
    Mixto(MixtoArgs),
    /// Run a scenario and write frames, per-frame series and a manifest.
    Simulate(SimulateArgs),
    /// Fit calibration parameters to measurement tables.
    Fit(FitArgs),
    /// Arrival times of an acid front at markers along a channel.
    Ticker(TickerArgs),
    /// pH profile of a channel between two reservoirs.
    Gradiator(GradiatorArgs),
    /// Export bundled data or a single rendered frame.
    #[command(subcommand)]
    Export(ExportCommand),
    /// Serve a live scene over HTTP on localhost.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct Reservoirs {
    /// Acid reservoir solution file; defaults to citric acid at pH 2.
    #[arg(long, value_name = "FILE")]
    acid: Option<PathBuf>,
    /// Base reservoir solution file; defaults to sodium hydroxide at pH 10.
    #[arg(long, value_name = "FILE")]
    base: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MixtoArgs {
    #[arg(long)]
    target: f64,
    #[command(flatten)]
    reservoirs: Reservoirs,
    #[arg(long, default_value_t = 0.1)]
    tolerance: f64,
    /// Sensor noise standard deviation, pH units.
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sensor lag in iterations.
    #[arg(long, default_value_t = 1)]
    lag: usize,
    #[arg(long, default_value_t = 50)]
    max_iterations: usize,
    /// Write the final batch as a solution file.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Scenario file, or the name of a bundled preset.
    scenario: String,
    /// Simulated seconds.
    #[arg(long)]
    until: f64,
    /// Step in seconds; defaults to the scenario's.
    #[arg(long)]
    dt: Option<f64>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "phreact-run")]
    out: PathBuf,
    /// Also write one PNG per frame (one pixel per cell).
    #[arg(long)]
    png: bool,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Measurement table (CSV); repeat for several tables.
    #[arg(long = "in", value_name = "FILE", required = true)]
    inputs: Vec<PathBuf>,
    /// Table kind; give once for all tables or once per table.
    #[arg(long, value_enum, required = true)]
    kind: Vec<KindArg>,
    /// Starting calibration; defaults to the active one.
    #[arg(long, value_name = "FILE")]
    initial: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Write the fit report as JSON.
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Color,
    Odor,
    Shape,
}

impl From<KindArg> for PrimitiveKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Color => PrimitiveKind::Color,
            KindArg::Odor => PrimitiveKind::Odor,
            KindArg::Shape => PrimitiveKind::Shape,
        }
    }
}

#[derive(Debug, Args)]
struct ChannelArgs {
    #[arg(long, default_value_t = 8.0)]
    length_mm: f64,
    #[arg(long, default_value_t = 0.6)]
    diameter_mm: f64,
    #[arg(long, default_value_t = 65)]
    n_cells: usize,
    /// m^2/s, applied to every species.
    #[arg(long, default_value_t = 1e-9)]
    diffusivity: f64,
}

#[derive(Debug, Args)]
struct TickerArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    /// Channel fill; defaults to 1 mM sodium bicarbonate.
    #[arg(long, value_name = "FILE")]
    fill: Option<PathBuf>,
    /// Solution held at the inlet; defaults to the acid reservoir.
    #[arg(long, value_name = "FILE")]
    inlet: Option<PathBuf>,
    /// Marker positions as fractions of the length.
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75")]
    markers: Vec<f64>,
    /// A marker switches when its pH leaves [LO, HI].
    #[arg(long, value_delimiter = ',', num_args = 2, default_value = "6,14")]
    band: Vec<f64>,
    /// Give up after this many seconds.
    #[arg(long, default_value_t = 7200.0)]
    horizon: f64,
    /// Instead of arrival times, print the pH profile every SECONDS.
    #[arg(long, value_name = "SECONDS")]
    profile_every: Option<f64>,
}

#[derive(Debug, Args)]
struct GradiatorArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    reservoirs: Reservoirs,
    /// Diffuse from a water-filled channel for SECONDS instead of using the
    /// steady profile.
    #[arg(long, value_name = "SECONDS")]
    transient: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum ExportCommand {
    /// Render the frame at a scene time.
    Frame {
        scenario: String,
        #[arg(long)]
        at: f64,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "csv")]
        format: FrameFormat,
        /// Required for PNG.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// The active calibration as a calibration file.
    Calibration {
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// The active species database.
    Species {
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// A bundled scenario preset; lists presets when NAME is omitted.
    Scenario {
        name: Option<String>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FrameFormat {
    Csv,
    Json,
    Png,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// Scenario file, or the name of a bundled preset.
    scenario: String,
    #[arg(long, default_value_t = 8787)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    #[arg(long)]
    seed: Option<u64>,
    /// Do not advance the scene in real time; only POST /v1/step moves it.
    #[arg(long)]
    paused: bool,
    #[command(flatten)]
    reservoirs: Reservoirs,
}

/// Failure classes, mapped to exit codes 2 and 1.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Domain(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Domain(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(e) | Self::Domain(e) => write!(f, "{e:#}"),
        }
    }
}

type Outcome = Result<(), Failure>;

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn domain(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Domain(e.into())
}

/// Chemistry errors split between bad input files and domain failures.
fn chem(e: ChemistryError) -> Failure {
    match e {
        ChemistryError::Config(_) | ChemistryError::InvalidSolution(_) | ChemistryError::UnknownSpecies(_) => usage(e),
        _ => domain(e),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(usage)
}

fn write_out(path: &Path, text: &str) -> Outcome {
    fs::write(path, text)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(domain)
}

struct Context2 {
    species: SpeciesDb,
    calibration: CalibrationSet,
}

impl Context2 {
    fn load(cli: &Cli) -> Result<Self, Failure> {
        let species = match &cli.species {
            Some(p) => SpeciesDb::load(p).map_err(chem)?,
            None => SpeciesDb::builtin(),
        };
        let calibration = match &cli.calibration {
            Some(p) => CalibrationSet::load(p)
                .with_context(|| format!("calibration {}", p.display()))
                .map_err(usage)?,
            None => CalibrationSet::default_synthetic(),
        };
        Ok(Self { species, calibration })
    }

    fn solution(&self, path: &Path) -> Result<Solution, Failure> {
        let text = read(path)?;
        SolutionSpec::parse(&text)
            .and_then(|s| s.resolve(&self.species))
            .with_context(|| format!("solution {}", path.display()))
            .map_err(|e| match e.downcast_ref::<ChemistryError>() {
                Some(ChemistryError::UnreachableSetpoint { .. }) => domain(e),
                _ => usage(e),
            })
    }

    fn reservoirs(&self, r: &Reservoirs) -> Result<(Solution, Solution), Failure> {
        let (acid, base) = default_reservoirs(&self.species).map_err(chem)?;
        let acid = match &r.acid {
            Some(p) => self.solution(p)?,
            None => acid,
        };
        let base = match &r.base {
            Some(p) => self.solution(p)?,
            None => base,
        };
        Ok((acid, base))
    }

    fn scene(&self, text: &str, seed: Option<u64>) -> Result<Scene, Failure> {
        load_scenario(text, &self.species, &self.calibration, seed)
            .map(|(s, _)| s)
            .map_err(usage)
    }
}

/// Scenario text from a path, falling back to a bundled preset name.
fn scenario_text(arg: &str) -> Result<(String, String), Failure> {
    let path = Path::new(arg);
    if path.exists() {
        return Ok((path.display().to_string(), read(path)?));
    }
    let name = arg.strip_suffix(".scn").unwrap_or(arg);
    match shipped_scenario(name) {
        Some(t) => Ok((format!("preset:{name}"), t.to_string())),
        None => Err(usage(anyhow!(
            "no scenario file `{arg}` and no preset of that name (presets: {})",
            preset_names()
        ))),
    }
}

fn preset_names() -> String {
    SHIPPED_SCENARIOS.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
}

fn positive(name: &str, v: f64) -> Outcome {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(usage(anyhow!("--{name} must be > 0, got {v}")))
    }
}

/// Parse `argv`, run the command and return the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    let ctx = Context2::load(cli)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match &cli.command {
        Command::Ph { solution, digits } => {
            let s = ctx.solution(solution)?;
            let ph = equilibrium_ph(&s, DEFAULT_PH_TOL).map_err(chem)?;
            writeln!(out, "{:.*}", digits, ph.value()).map_err(domain)
        }
        Command::Mix { a, va, b, vb, out: path } => {
            let (sa, sb) = (ctx.solution(a)?, ctx.solution(b)?);
            let m = mix(&sa, *va, &sb, *vb).map_err(chem)?;
            let ph = equilibrium_ph(&m, DEFAULT_PH_TOL).map_err(chem)?;
            if let Some(p) = path {
                write_out(p, &SolutionSpec::from_solution(&m).to_toml())?;
            }
            writeln!(out, "{ph}").map_err(domain)
        }
        Command::Mixto(args) => mixto(&ctx, args, &mut out),
        Command::Simulate(args) => simulate(&ctx, cli, args, &mut out),
        Command::Fit(args) => fit(&ctx, args, &mut out),
        Command::Ticker(args) => ticker(&ctx, args, &mut out),
        Command::Gradiator(args) => gradiator(&ctx, args, &mut out),
        Command::Export(cmd) => export(&ctx, cmd, &mut out),
        Command::Serve(args) => serve(ctx, args),
    }
}

fn mixto(ctx: &Context2, args: &MixtoArgs, out: &mut impl Write) -> Outcome {
    let (acid, base) = ctx.reservoirs(&args.reservoirs)?;
    let cfg = ControllerConfig {
        setpoint: PhValue::new(args.target).map_err(usage)?,
        tolerance: args.tolerance,
        max_iterations: args.max_iterations,
        sensor_noise_sigma: args.noise,
        sensor_lag: args.lag,
        rng_seed: args.seed,
        ..ControllerConfig::default()
    };
    let trace = run_to_setpoint(&cfg, &acid, &base).map_err(|e| match e {
        ControllerError::Config(_) => usage(e),
        _ => domain(e),
    })?;
    out.write_all(format_trace_table(&trace).as_bytes()).map_err(domain)?;
    if let Some(p) = &args.out {
        write_out(p, &SolutionSpec::from_solution(&trace.final_solution).to_toml())?;
    }
    if !trace.converged {
        return Err(domain(anyhow!(
            "did not hold pH {} within {} in {} iterations",
            trace.setpoint,
            trace.tolerance,
            trace.iterations.len()
        )));
    }
    Ok(())
}

fn run_frames(scene: &mut Scene, until: f64, dt: f64, mut each: impl FnMut(&Frame) -> Outcome) -> Result<usize, Failure> {
    let n = (until / dt).round() as usize;
    for _ in 0..n {
        scene.step(dt).map_err(domain)?;
        each(&scene.render_frame())?;
    }
    Ok(n)
}

fn simulate(ctx: &Context2, cli: &Cli, args: &SimulateArgs, out: &mut impl Write) -> Outcome {
    positive("until", args.until)?;
    let (source, text) = scenario_text(&args.scenario)?;
    let mut scene = ctx.scene(&text, args.seed)?;
    let dt = args.dt.unwrap_or(scene.default_dt());
    positive("dt", dt)?;

    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))
        .map_err(domain)?;
    let png_dir = args.out.join("png");
    if args.png {
        fs::create_dir_all(&png_dir).map_err(domain)?;
    }
    let csv_err = |e: csv::Error| domain(e);
    let mut frames = csv::Writer::from_path(args.out.join("frames.csv")).map_err(csv_err)?;
    let mut series = csv::Writer::from_path(args.out.join("series.csv")).map_err(csv_err)?;
    frames.write_record(frame_csv_header()).map_err(csv_err)?;
    series.write_record(series_csv_header(&scene)).map_err(csv_err)?;

    let mut index = 0usize;
    let mut clipped = 0usize;
    let n = run_frames(&mut scene, args.until, dt, |f| {
        index += 1;
        write_frame_rows(&mut frames, f).map_err(csv_err)?;
        write_series_row(&mut series, f).map_err(csv_err)?;
        if args.png {
            clipped += write_png(f, &png_dir.join(format!("frame_{index:06}.png"))).map_err(domain)?;
        }
        Ok(())
    })?;
    frames.flush().map_err(domain)?;
    series.flush().map_err(domain)?;

    let manifest = serde_json::json!({
        "tool": "phreact",
        "version": env!("CARGO_PKG_VERSION"),
        "core_version": phreact_core::VERSION,
        "scenario": source,
        "scenario_sha256": phreact_core::sha256_hex(text.as_bytes()),
        "scene": scene.name(),
        "seed": scene.seed(),
        "dt": dt,
        "until": args.until,
        "frames": n,
        "width": scene.width(),
        "height": scene.height(),
        "calibration": ctx.calibration.name,
        "calibration_source": cli.calibration.as_ref().map_or("built-in".to_string(), |p| p.display().to_string()),
        "calibration_sha256": ctx.calibration.sha256(),
        "warnings": scene.warnings(),
        "outputs": {
            "frames": "frames.csv",
            "series": "series.csv",
            "png": if args.png { Some("png/") } else { None },
        },
        "gamut_clipped_pixels": if args.png { Some(clipped) } else { None },
    });
    write_out(
        &args.out.join("manifest.json"),
        &(serde_json::to_string_pretty(&manifest).map_err(domain)? + "\n"),
    )?;
    for w in scene.warnings() {
        eprintln!("warning: {w}");
    }
    writeln!(out, "{n} frames written to {}", args.out.display()).map_err(domain)
}

fn fit(ctx: &Context2, args: &FitArgs, out: &mut impl Write) -> Outcome {
    let kinds: Vec<KindArg> = match (args.kind.len(), args.inputs.len()) {
        (1, n) => vec![args.kind[0]; n],
        (k, n) if k == n => args.kind.clone(),
        (k, n) => return Err(usage(anyhow!("{n} --in tables but {k} --kind values; give one kind or one per table"))),
    };
    let tables = args
        .inputs
        .iter()
        .zip(kinds)
        .map(|(p, k)| {
            let file = fs::File::open(p)
                .with_context(|| format!("cannot read {}", p.display()))
                .map_err(usage)?;
            MeasurementTable::from_csv(k.into(), file)
                .with_context(|| format!("table {}", p.display()))
                .map_err(usage)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let initial = match &args.initial {
        Some(p) => CalibrationSet::load(p)
            .with_context(|| format!("calibration {}", p.display()))
            .map_err(usage)?,
        None => ctx.calibration.clone(),
    };
    let (mut fitted, report) = fit_calibration(&tables, &initial).map_err(domain)?;
    fitted.synthetic = false;
    write_out(&args.out, &fitted.to_toml())?;
    let json = serde_json::to_string_pretty(&report).map_err(domain)? + "\n";
    if let Some(p) = &args.report {
        write_out(p, &json)?;
    }
    for c in &report.components {
        writeln!(
            out,
            "{:<22} rows={:<4} residual {:.6e} -> {:.6e} iterations={} converged={}",
            c.component, c.rows, c.residual_norm_before, c.residual_norm_after, c.iterations, c.converged
        )
        .map_err(domain)?;
    }
    for r in &report.retained {
        writeln!(out, "{r:<22} retained (no data)").map_err(domain)?;
    }
    Ok(())
}

fn build_channel(args: &ChannelArgs, fill: &Solution, left: Boundary, right: Boundary) -> Result<Channel, Failure> {
    Channel::new(args.length_mm * 1e-3, args.diameter_mm * 1e-3, args.n_cells, fill, left, right)
        .and_then(|c| c.with_uniform_diffusivity(args.diffusivity))
        .map_err(usage)
}

fn ticker(ctx: &Context2, args: &TickerArgs, out: &mut impl Write) -> Outcome {
    let fill = match &args.fill {
        Some(p) => ctx.solution(p)?,
        None => Solution::new(vec![(ctx.species.get("sodium_bicarbonate").map_err(chem)?.clone(), 1e-3)], 1.0)
            .map_err(chem)?,
    };
    let inlet = match &args.inlet {
        Some(p) => ctx.solution(p)?,
        None => default_reservoirs(&ctx.species).map_err(chem)?.0,
    };
    let ch = build_channel(&args.channel, &fill, Boundary::Fixed(inlet), Boundary::Closed)?;
    let mut w = csv::Writer::from_writer(out);
    if let Some(every) = args.profile_every {
        positive("profile-every", every)?;
        w.write_record(["time_s", "position_mm", "ph"]).map_err(domain)?;
        let mut ch = ch;
        let dt_max = ch.max_stable_dt();
        let n = (args.horizon / every).floor() as usize;
        for k in 0..=n {
            if k > 0 {
                ch.advance(every, dt_max).map_err(domain)?;
            }
            let p = ch.ph_profile(DEFAULT_PH_TOL).map_err(domain)?;
            for (x, ph) in p.positions.iter().zip(&p.ph_values) {
                w.write_record([
                    format!("{:.3}", k as f64 * every),
                    format!("{:.6}", x * args.channel.length_mm),
                    format!("{:.6}", ph.value()),
                ])
                .map_err(domain)?;
            }
        }
    } else {
        let band = (args.band[0], args.band[1]);
        let times = ticker_arrival_times(&ch, &args.markers, band, args.horizon, DEFAULT_PH_TOL).map_err(usage)?;
        w.write_record(["marker", "position_mm", "arrival_s"]).map_err(domain)?;
        for (m, t) in args.markers.iter().zip(times) {
            w.write_record([
                m.to_string(),
                format!("{:.6}", m * args.channel.length_mm),
                t.map_or(String::new(), |t| format!("{t:.3}")),
            ])
            .map_err(domain)?;
        }
    }
    w.flush().map_err(domain)
}

fn gradiator(ctx: &Context2, args: &GradiatorArgs, out: &mut impl Write) -> Outcome {
    let (left, right) = ctx.reservoirs(&args.reservoirs)?;
    let water = Solution::water(1.0).map_err(chem)?;
    let ch = build_channel(&args.channel, &water, Boundary::Closed, Boundary::Closed)?;
    let profile = match args.transient {
        Some(t) => gradiator_transient(&ch, &left, &right, t, DEFAULT_PH_TOL),
        None => gradiator_profile(&ch, &left, &right, DEFAULT_PH_TOL),
    }
    .map_err(domain)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["position_mm", "fraction", "ph"]).map_err(domain)?;
    for (x, ph) in profile.positions.iter().zip(&profile.ph_values) {
        w.write_record([
            format!("{:.6}", x * args.channel.length_mm),
            format!("{x:.6}"),
            format!("{:.6}", ph.value()),
        ])
        .map_err(domain)?;
    }
    w.flush().map_err(domain)
}

fn emit(out: &mut impl Write, path: &Option<PathBuf>, text: &str) -> Outcome {
    match path {
        Some(p) => write_out(p, text),
        None => out.write_all(text.as_bytes()).map_err(domain),
    }
}

fn export(ctx: &Context2, cmd: &ExportCommand, out: &mut impl Write) -> Outcome {
    match cmd {
        ExportCommand::Frame {
            scenario,
            at,
            dt,
            seed,
            format,
            out: path,
        } => {
            let (_, text) = scenario_text(scenario)?;
            let mut scene = ctx.scene(&text, *seed)?;
            let dt = dt.unwrap_or(scene.default_dt());
            positive("dt", dt)?;
            if !(*at >= 0.0) {
                return Err(usage(anyhow!("--at must be >= 0, got {at}")));
            }
            run_frames(&mut scene, *at, dt, |_| Ok(()))?;
            let frame = scene.render_frame();
            match format {
                FrameFormat::Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    w.write_record(frame_csv_header()).map_err(domain)?;
                    write_frame_rows(&mut w, &frame).map_err(domain)?;
                    let bytes = w.into_inner().map_err(|e| domain(anyhow!("{e}")))?;
                    emit(out, path, &String::from_utf8(bytes).map_err(domain)?)
                }
                FrameFormat::Json => emit(out, path, &(serde_json::to_string_pretty(&frame).map_err(domain)? + "\n")),
                FrameFormat::Png => {
                    let Some(p) = path else {
                        return Err(usage(anyhow!("--format png needs --out FILE")));
                    };
                    let clipped = write_png(&frame, p).map_err(domain)?;
                    if clipped > 0 {
                        eprintln!("warning: {clipped} pixels outside the sRGB gamut were clipped");
                    }
                    Ok(())
                }
            }
        }
        ExportCommand::Calibration { out: path } => emit(out, path, &ctx.calibration.to_toml()),
        ExportCommand::Species { out: path } => {
            let text = SpeciesDb::builtin_source();
            if ctx.species != SpeciesDb::builtin() {
                bail_usage("export species only writes the built-in table")?;
            }
            emit(out, path, text)
        }
        ExportCommand::Scenario { name: None, .. } => {
            for (n, _) in SHIPPED_SCENARIOS {
                writeln!(out, "{n}").map_err(domain)?;
            }
            Ok(())
        }
        ExportCommand::Scenario { name: Some(n), out: path } => {
            let key = n.strip_suffix(".scn").unwrap_or(n);
            let text = shipped_scenario(key)
                .ok_or_else(|| usage(anyhow!("no preset `{n}` (presets: {})", preset_names())))?;
            emit(out, path, text)
        }
    }
}

fn bail_usage(msg: &str) -> Outcome {
    let r: anyhow::Result<()> = (|| bail!("{msg}"))();
    r.map_err(usage)
}

fn serve(ctx: Context2, args: &ServeArgs) -> Outcome {
    let (_, text) = scenario_text(&args.scenario)?;
    // reject a bad scenario before binding
    let scene = ctx.scene(&text, args.seed)?;
    let period = Duration::from_secs_f64(scene.default_dt());
    let (acid, base) = ctx.reservoirs(&args.reservoirs)?;
    let config = ServiceConfig {
        scenario_text: text,
        species: ctx.species,
        calibration: ctx.calibration,
        seed: args.seed,
        acid,
        base,
        controller: ControllerConfig::default(),
    };
    let addr = SocketAddr::new(args.host, args.port);
    let paused = args.paused;
    let rt = tokio::runtime::Runtime::new().map_err(domain)?;
    rt.block_on(async move {
        let handle = SceneHandle::spawn(config).map_err(|e| usage(anyhow!("{}", e.code())))?;
        if !paused {
            handle.drive(period);
        }
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("cannot bind {addr}"))
            .map_err(usage)?;
        eprintln!("phreact: serving {} on http://{addr}/v1", scene.name());
        axum::serve(listener, router(handle)).await.map_err(domain)
    })
}
