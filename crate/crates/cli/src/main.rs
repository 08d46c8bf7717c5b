use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use swathcube::calibration::{CalibrationSet, IlluminationSpectrum};
use swathcube::cube_io::{read_header, read_pose_log, CubeHandle, DataType};
use swathcube::job::{read_cube_list, run_export, validate_config, Collection, CollectionOptions, JobConfig};
use swathcube_oracle::{write_fixture, AttitudeNoise, FixtureSpec, SyntheticScene};
use swathcube_service::{ServiceConfig, Session};

#[derive(Parser, Debug)]
#[command(name = "swathcube", version, about = "Georectify pushbroom hyperspectral cubes by mesh rasterization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render cubes onto a north-up grid and write an ENVI cube.
    Export(JobArgs),
    /// Check a job configuration and list every problem.
    Validate(JobArgs),
    /// Serve the viewer API for a collection.
    Serve(ServeArgs),
    /// Write a synthetic survey (cubes, cube list, pose log).
    Fixture(FixtureArgs),
}

/// Job options. Flags override values from `--config`.
#[derive(Args, Debug, Clone, Default)]
struct JobArgs {
    /// `key = value` job file
    #[arg(long)]
    config: Option<PathBuf>,
    /// File listing cube paths in capture order
    #[arg(long)]
    cubes: Option<String>,
    /// Cube path (repeatable), used when no list is given
    #[arg(long = "cube")]
    cube: Vec<String>,
    /// Pose log (CSV)
    #[arg(long)]
    poses: Option<String>,
    /// Dark/radiance calibration cube
    #[arg(long)]
    calib: Option<String>,
    /// Illumination spectrum CSV for reflectance mode
    #[arg(long)]
    illumination: Option<String>,
    /// Comma-separated wavelengths in nm, or `all`
    #[arg(long)]
    wavelengths: Option<String>,
    /// Output pixel size, meters
    #[arg(long)]
    gsd: Option<String>,
    /// Ground altitude in meters, or `auto`
    #[arg(long)]
    ground: Option<String>,
    /// Flight height above ground assumed by `--ground auto`
    #[arg(long)]
    nominal_agl: Option<String>,
    /// Full field of view, degrees
    #[arg(long)]
    fov: Option<String>,
    /// Cube index range `a:b`, inclusive
    #[arg(long)]
    range: Option<String>,
    /// raw, relative, radiance or reflectance
    #[arg(long)]
    mode: Option<String>,
    /// Output data file (header written next to it)
    #[arg(long)]
    output: Option<String>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    jobs: Option<String>,
    /// Value for uncovered pixels
    #[arg(long)]
    no_data: Option<String>,
    /// Output sample type: u8, i16, u16, i32, u32, f32, f64
    #[arg(long)]
    data_type: Option<String>,
    /// Also write a coverage mask cube
    #[arg(long)]
    mask: bool,
    /// Read all input bands into memory first
    #[arg(long)]
    preload: bool,
}

impl JobArgs {
    fn config(&self) -> Result<JobConfig> {
        let mut cfg = match &self.config {
            Some(p) => JobConfig::load(p).map_err(|e| anyhow::anyhow!("{}", e.join("\n")))?,
            None => JobConfig::default(),
        };
        let cwd = std::env::current_dir()?;
        let flags = [
            ("cubes", &self.cubes),
            ("poses", &self.poses),
            ("calib", &self.calib),
            ("illumination", &self.illumination),
            ("wavelengths", &self.wavelengths),
            ("gsd", &self.gsd),
            ("ground", &self.ground),
            ("nominal_agl", &self.nominal_agl),
            ("fov", &self.fov),
            ("range", &self.range),
            ("mode", &self.mode),
            ("output", &self.output),
            ("jobs", &self.jobs),
            ("no_data", &self.no_data),
            ("data_type", &self.data_type),
        ];
        let mut errors = Vec::new();
        for (key, value) in flags {
            if let Some(v) = value {
                if let Err(e) = cfg.set(key, v, &cwd) {
                    errors.push(format!("--{}: {e}", key.replace('_', "-")));
                }
            }
        }
        for c in &self.cube {
            cfg.set("cube", c, &cwd).expect("cube paths always parse");
        }
        cfg.mask |= self.mask;
        cfg.preload |= self.preload;
        if !errors.is_empty() {
            bail!("{}", errors.join("\n"));
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[command(flatten)]
    job: JobArgs,
    #[arg(long, default_value = "127.0.0.1:8750")]
    bind: SocketAddr,
    /// Tile cache budget, MiB
    #[arg(long, default_value_t = 256)]
    cache_mb: usize,
    #[arg(long, default_value_t = 24)]
    max_zoom: u32,
    /// Background band reader threads
    #[arg(long, default_value_t = 2)]
    loaders: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    /// 2 passes of 300 lines, 200 samples, 8 bands
    Small,
    /// Ten 900×1000 cubes in five passes, ±5° attitude noise
    Desk,
    /// One 900×1000×300 cube
    FullBand,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Scene {
    Stripes,
    Checker,
    Gradient,
    Constant,
}

#[derive(Args, Debug)]
struct FixtureArgs {
    /// Directory to write into
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = Preset::Small)]
    preset: Preset,
    #[arg(long)]
    bands: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    passes: Option<usize>,
    #[arg(long)]
    lines_per_pass: Option<usize>,
    #[arg(long)]
    cubes_per_pass: Option<usize>,
    /// Peak attitude noise per axis, degrees (0 disables)
    #[arg(long)]
    noise_deg: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    scene: Option<Scene>,
    /// Inject dark current and radiance response; writes calibration files
    #[arg(long)]
    radiometry: bool,
    /// Cube sample type
    #[arg(long, default_value = "u16")]
    data_type: String,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SWATHCUBE_LOG", "info")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Export(args) => export(&args),
        Command::Validate(args) => {
            let cfg = args.config()?;
            match validate_config(&cfg) {
                Ok(job) => {
                    println!(
                        "ok: {} cubes, {} pose records, gsd {} m → {}",
                        job.cubes.len(),
                        job.records.len(),
                        job.gsd,
                        job.output.display()
                    );
                    Ok(())
                }
                Err(errors) => bail!("invalid configuration:\n  {}", errors.join("\n  ")),
            }
        }
        Command::Serve(args) => serve(args),
        Command::Fixture(args) => fixture(&args),
    }
}

fn set_jobs(jobs: Option<usize>) -> Result<()> {
    if let Some(n) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    Ok(())
}

fn export(args: &JobArgs) -> Result<()> {
    let cfg = args.config()?;
    set_jobs(cfg.jobs)?;
    let mut last = 0;
    let mut progress = |done: usize, total: usize| {
        let pct = done * 100 / total.max(1);
        if pct / 10 != last / 10 || done == total {
            info!("band {done}/{total}");
            last = pct;
        }
    };
    let report = run_export(&cfg, &mut progress, &|| false)?;

    // exit status reflects a complete, readable output
    let header = read_header(&report.header).context("re-reading output header")?;
    header
        .validate()
        .map_err(|e| anyhow::anyhow!("output header invalid: {e}"))?;
    let size = std::fs::metadata(&report.data)?.len();
    if size != header.data_bytes() {
        bail!("output data is {size} bytes, header implies {}", header.data_bytes());
    }
    info!(
        "wrote {} ({}×{}×{}, {} covered pixels)",
        report.data.display(),
        report.width,
        report.height,
        report.bands,
        report.covered_pixels
    );
    print!("{}", report.timings.report());
    Ok(())
}

/// Opens cubes, poses and calibration without requiring export settings.
fn open_collection(cfg: &JobConfig) -> Result<Collection> {
    let paths = match &cfg.cubes {
        Some(list) => read_cube_list(list).with_context(|| format!("reading {}", list.display()))?,
        None => cfg.cube_paths.clone(),
    };
    if paths.is_empty() {
        bail!("no cubes given (--cubes or --cube)");
    }
    let poses = cfg.poses.as_ref().context("no pose log given (--poses)")?;
    let cubes = paths
        .iter()
        .map(|p| CubeHandle::open(p))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let records = read_pose_log(poses)?;
    let opts = CollectionOptions {
        fov_deg: cfg.fov,
        ground: cfg.ground,
        nominal_agl: cfg.nominal_agl,
    };
    let mut c = Collection::from_records(cubes, &records, &opts)?;
    let calib = cfg.calib.as_deref().map(CalibrationSet::load).transpose()?;
    let illum = cfg
        .illumination
        .as_deref()
        .map(IlluminationSpectrum::load_csv)
        .transpose()?;
    c.set_calibration(calib.map(Arc::new), illum.map(Arc::new));
    Ok(c)
}

fn serve(args: ServeArgs) -> Result<()> {
    let cfg = args.job.config()?;
    set_jobs(cfg.jobs)?;
    let collection = open_collection(&cfg)?;
    if !args.bind.ip().is_loopback() {
        warn!("binding {}: the viewer API has no authentication", args.bind);
    }
    let session = Session::new(
        collection,
        ServiceConfig {
            max_zoom: args.max_zoom,
            cache_bytes: args.cache_mb << 20,
            loader_threads: args.loaders,
            base_job: Some(cfg),
            ..ServiceConfig::default()
        },
    )?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(swathcube_service::serve(session, args.bind))?;
    Ok(())
}

fn fixture(args: &FixtureArgs) -> Result<()> {
    let mut spec = match args.preset {
        Preset::Desk => FixtureSpec::desk_scale(8),
        Preset::FullBand => FixtureSpec::full_band(),
        Preset::Small => {
            let mut s = FixtureSpec::desk_scale(8);
            s.plan.passes = 2;
            s.plan.lines_per_pass = 300;
            s.plan.cubes_per_pass = 1;
            s.samples = 200;
            s
        }
    };
    if let Some(b) = args.bands {
        spec.bands = b;
    }
    if let Some(s) = args.samples {
        spec.samples = s;
    }
    if let Some(p) = args.passes {
        spec.plan.passes = p;
    }
    if let Some(l) = args.lines_per_pass {
        spec.plan.lines_per_pass = l;
    }
    if let Some(c) = args.cubes_per_pass {
        spec.plan.cubes_per_pass = c;
    }
    if args.noise_deg.is_some() || args.seed.is_some() {
        let amp = args.noise_deg.unwrap_or(5.0);
        let seed = args.seed.unwrap_or(42);
        spec.plan.noise = (amp > 0.0).then(|| AttitudeNoise::uniform(amp, seed));
    }
    if let Some(s) = args.scene {
        spec.scene = match s {
            Scene::Stripes => swathcube_oracle::fixture::default_scene(),
            Scene::Checker => SyntheticScene::Checker {
                size: 1.0,
                low: 800.0,
                high: 2400.0,
            },
            Scene::Gradient => SyntheticScene::Gradient {
                base: 1000.0,
                per_north: 5.0,
                per_east: 3.0,
            },
            Scene::Constant => SyntheticScene::Constant(1500.0),
        };
    }
    spec.radiometry = args.radiometry;
    spec.data_type = parse_data_type(&args.data_type)?;
    if spec.plan.lines_per_pass % spec.plan.cubes_per_pass.max(1) != 0 {
        bail!("--lines-per-pass must be a multiple of --cubes-per-pass");
    }
    let files = write_fixture(Path::new(&args.output), &spec)?;
    info!(
        "wrote {} cubes ({:.3} s of capture) to {}",
        files.cubes.len(),
        files.capture_duration,
        files.dir.display()
    );
    println!("cubes={}", files.cube_list.display());
    println!("poses={}", files.poses.display());
    if let Some(c) = &files.calib {
        println!("calib={}", c.display());
    }
    if let Some(i) = &files.illumination {
        println!("illumination={}", i.display());
    }
    println!("capture_s={:.6}", files.capture_duration);
    Ok(())
}

fn parse_data_type(s: &str) -> Result<DataType> {
    let mut probe = JobConfig::default();
    probe
        .set("data_type", s, Path::new("."))
        .map_err(|e| anyhow::anyhow!("--data-type: {e}"))?;
    Ok(probe.data_type)
}
