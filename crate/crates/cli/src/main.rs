use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use multireg::bench::{self, BenchConfig, Cell, OutlierBand};
use multireg::eval::{score_dataset, score_sample, HitCriteria, SampleScore, ORIGIN};
use multireg::io::{self, ResultFile};
use multireg::pipeline::{register_with_matrix, PipelineConfig};
use multireg::synthgen::{generate_scene, SceneSpec};
use multireg::Error;

#[derive(Parser)]
#[command(name = "multireg", version, about = "Multi-instance rigid registration from point correspondences")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Register every instance in a correspondence file.
    Register(RegisterArgs),
    /// Write synthetic scenes and their ground truth.
    Synth(SynthArgs),
    /// Score result files against ground truth files.
    Eval(EvalArgs),
    /// Run a seeded generate → register → score sweep.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct PipelineFlags {
    /// JSON pipeline configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    min_dist_thresh: Option<f64>,
    /// Squared alignment error threshold.
    #[arg(long)]
    inlier_thresh: Option<f64>,
    #[arg(long)]
    gamma_thresh: Option<f64>,
    /// Sampling budget, or `off` to cluster every correspondence.
    #[arg(long, value_parser = parse_downsample)]
    downsample: Option<Downsample>,
    #[arg(long)]
    max_iters: Option<usize>,
}

#[derive(Clone, Copy)]
enum Downsample {
    Off,
    Size(usize),
}

fn parse_downsample(s: &str) -> Result<Downsample, String> {
    match s {
        "off" | "none" => Ok(Downsample::Off),
        _ => s
            .parse()
            .map(Downsample::Size)
            .map_err(|_| format!("expected a correspondence count or `off`, got `{s}`")),
    }
}

impl PipelineFlags {
    fn resolve(&self) -> multireg::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|source| Error::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                serde_json::from_str(&text).map_err(|source| Error::Json {
                    path: path.display().to_string(),
                    source,
                })?
            }
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.rng_seed = v;
        }
        if let Some(v) = self.min_dist_thresh {
            cfg.min_dist_thresh = v;
        }
        if let Some(v) = self.inlier_thresh {
            cfg.refinement.inlier_thresh = v;
        }
        if let Some(v) = self.gamma_thresh {
            cfg.extraction.gamma_thresh = v;
        }
        match self.downsample {
            Some(Downsample::Off) => cfg.downsample = false,
            Some(Downsample::Size(n)) => {
                cfg.downsample = true;
                cfg.downsample_size = n;
            }
            None => {}
        }
        if let Some(v) = self.max_iters {
            cfg.refinement.max_iterations = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RegisterArgs {
    /// Correspondence file (6 or 7 columns).
    input: PathBuf,
    /// Result file to write.
    #[arg(short, long)]
    output: PathBuf,
    #[command(flatten)]
    pipeline: PipelineFlags,
    /// Also write the compatibility matrix as comma-separated text.
    #[arg(long)]
    dump_matrix: Option<PathBuf>,
    /// Leave stage timings out of the result file.
    #[arg(long)]
    no_timings: bool,
}

#[derive(Args)]
struct SceneFlags {
    #[arg(long, default_value_t = 1)]
    instances: usize,
    #[arg(long, default_value_t = 0.0)]
    outlier_lo: f64,
    #[arg(long, default_value_t = 0.0)]
    outlier_hi: f64,
    #[arg(long, default_value_t = SceneSpec::default().num_points_per_instance)]
    points: usize,
    #[arg(long, default_value_t = SceneSpec::default().noise_sigma)]
    noise: f64,
    #[arg(long, default_value_t = SceneSpec::default().workspace_extent)]
    extent: f64,
    #[arg(long, default_value_t = SceneSpec::default().min_instance_separation)]
    separation: f64,
    /// Share of outliers placed on the distractor object.
    #[arg(long, default_value_t = SceneSpec::default().clutter_fraction)]
    clutter: f64,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    scene: SceneFlags,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory of `<name>.json` result files.
    #[arg(long)]
    results: PathBuf,
    /// Directory of `<name>.truth` files.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value_t = 15.0)]
    rot_thresh_deg: f64,
    #[arg(long, default_value_t = 0.1)]
    trans_thresh: f64,
    /// Write a per-sample score table here.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated outlier bands such as `0.1-0.5,0.5-0.7`.
    #[arg(long, conflicts_with = "outlier")]
    bands: Option<String>,
    /// Fixed outlier ratio.
    #[arg(long)]
    outlier: Option<f64>,
    /// Instance count, or an inclusive range `lo..hi`.
    #[arg(long, default_value = "20")]
    instances: String,
    /// Scenes per cell.
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 15.0)]
    rot_thresh_deg: f64,
    #[arg(long, default_value_t = 0.1)]
    trans_thresh: f64,
    #[arg(long, default_value_t = SceneSpec::default().clutter_fraction)]
    clutter: f64,
    #[arg(long, default_value_t = SceneSpec::default().noise_sigma)]
    noise: f64,
    /// Also write the table here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Leave the timing column out.
    #[arg(long)]
    no_timings: bool,
    /// Pipeline settings; `--seed` is the sweep seed (scene `i` uses `seed + i`).
    #[command(flatten)]
    pipeline: PipelineFlags,
}

/// Process exit status for a library error.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Parse { .. }
        | Error::Io { .. }
        | Error::Json { .. }
        | Error::InvalidConfig(_)
        | Error::SeparationInfeasible { .. } => 2,
        Error::InsufficientInput { .. } => 3,
        _ => 1,
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn cmd_register(args: &RegisterArgs) -> multireg::Result<()> {
    let cfg = args.pipeline.resolve()?;
    let data = io::read_correspondences(&args.input)?;
    let (result, matrix) = register_with_matrix(&data.correspondences, &cfg)?;
    ResultFile::from_result(&result, &cfg, !args.no_timings).write(&args.output)?;
    if let Some(path) = &args.dump_matrix {
        fs::write(path, matrix.to_csv()).map_err(io_err(path))?;
    }
    let outliers = result.labels.iter().filter(|l| l.is_none()).count();
    eprintln!(
        "{} instances, {} of {} correspondences unassigned, {} refinement iterations",
        result.instances.len(),
        outliers,
        result.labels.len(),
        result.stats.iterations
    );
    for (stage, d) in result.timings.stages() {
        eprintln!("  {stage:<11} {:>9.2} ms", d.as_secs_f64() * 1e3);
    }
    eprintln!("  {:<11} {:>9.2} ms", "total", result.timings.total().as_secs_f64() * 1e3);
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> multireg::Result<()> {
    let s = &args.scene;
    let band = OutlierBand::new(s.outlier_lo, s.outlier_hi)?;
    let template = SceneSpec {
        num_points_per_instance: s.points,
        num_instances: s.instances,
        outlier_ratio: s.outlier_lo,
        noise_sigma: s.noise,
        workspace_extent: s.extent,
        min_instance_separation: s.separation,
        clutter_fraction: s.clutter,
        seed: args.seed,
    };
    template.validate()?;
    fs::create_dir_all(&args.out_dir).map_err(io_err(&args.out_dir))?;
    for i in 0..args.count {
        let seed = args.seed.wrapping_add(i as u64);
        let spec = SceneSpec {
            outlier_ratio: band.draw(seed),
            seed,
            ..template
        };
        let (corrs, truth) = generate_scene(&spec)?;
        let stem = format!("scene_{i:04}");
        io::write_correspondences(&args.out_dir.join(format!("{stem}.corr")), &corrs, Some(&truth.labels))?;
        io::write_truth(&args.out_dir.join(format!("{stem}.truth")), &truth.transforms)?;
        info!("{stem}: {} correspondences, outlier ratio {:.3}", corrs.len(), spec.outlier_ratio);
    }
    eprintln!("wrote {} scenes to {}", args.count, args.out_dir.display());
    Ok(())
}

/// File stems with the given extension, sorted.
fn stems(dir: &Path, ext: &str) -> multireg::Result<Vec<String>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.extension().is_some_and(|e| e == ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.push(stem.to_string());
            }
        }
    }
    out.sort();
    Ok(out)
}

fn cmd_eval(args: &EvalArgs) -> multireg::Result<()> {
    let results = stems(&args.results, "json")?;
    let truths = stems(&args.truth, "truth")?;
    if let Some(orphan) = results.iter().find(|s| truths.binary_search(s).is_err()) {
        let path = args.results.join(format!("{orphan}.json"));
        return Err(Error::InvalidConfig(format!("{} has no matching truth file", path.display())));
    }
    if let Some(orphan) = truths.iter().find(|s| results.binary_search(s).is_err()) {
        let path = args.truth.join(format!("{orphan}.truth"));
        return Err(Error::InvalidConfig(format!("{} has no matching result file", path.display())));
    }
    let crit = HitCriteria {
        max_rotation_error: args.rot_thresh_deg.to_radians(),
        max_translation_error: args.trans_thresh,
    };
    let mut scores: Vec<SampleScore> = Vec::with_capacity(results.len());
    let mut times = Vec::new();
    let mut table = String::from("sample\thits\tgt\tpred\trecall\tprecision\tf1\n");
    for stem in &results {
        let result = ResultFile::read(&args.results.join(format!("{stem}.json")))?;
        let truth = io::read_truth(&args.truth.join(format!("{stem}.truth")))?;
        let s = score_sample(&result.transforms(), &truth, &ORIGIN, &crit);
        if let Some(t) = &result.timings_ms {
            times.push(t.total_ms);
        }
        table.push_str(&format!(
            "{stem}\t{}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}\n",
            s.hits, s.num_gt, s.num_pred, s.recall, s.precision, s.f1
        ));
        scores.push(s);
    }
    let d = score_dataset(&scores)?;
    println!("MHR {:.2} MHP {:.2} MHF1 {:.2}", 100.0 * d.mhr, 100.0 * d.mhp, 100.0 * d.mhf1);
    if times.is_empty() {
        println!("mean runtime n/a (no timings recorded)");
    } else {
        println!("mean runtime {:.2} ms over {} samples", times.iter().sum::<f64>() / times.len() as f64, times.len());
    }
    if let Some(path) = &args.table {
        fs::write(path, table).map_err(io_err(path))?;
    }
    Ok(())
}

fn parse_instances(s: &str) -> multireg::Result<Vec<usize>> {
    let bad = || Error::InvalidConfig(format!("--instances expects `K` or `lo..hi`, got `{s}`"));
    let range = match s.split_once("..") {
        Some((lo, hi)) => {
            let lo: usize = lo.trim().parse().map_err(|_| bad())?;
            let hi: usize = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
            lo..=hi
        }
        None => {
            let k: usize = s.trim().parse().map_err(|_| bad())?;
            k..=k
        }
    };
    if range.is_empty() || *range.start() == 0 {
        return Err(bad());
    }
    Ok(range.collect())
}

fn parse_bands(s: &str) -> multireg::Result<Vec<OutlierBand>> {
    s.split(',')
        .map(|part| {
            let bad = || Error::InvalidConfig(format!("bad outlier band `{part}`, expected `lo-hi`"));
            let (lo, hi) = part.split_once('-').ok_or_else(bad)?;
            OutlierBand::new(lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?)
        })
        .collect()
}

fn cmd_bench(args: &BenchArgs) -> multireg::Result<()> {
    let bands = match (&args.bands, args.outlier) {
        (Some(b), _) => parse_bands(b)?,
        (None, Some(r)) => vec![OutlierBand::fixed(r)?],
        (None, None) => bench::default_bands(),
    };
    let instances = parse_instances(&args.instances)?;
    let cells = bands
        .iter()
        .flat_map(|&band| instances.iter().map(move |&k| Cell { band, instances: k }))
        .collect();
    let cfg = BenchConfig {
        cells,
        scenes: args.count,
        seed: args.pipeline.seed.unwrap_or(0),
        scene: SceneSpec {
            clutter_fraction: args.clutter,
            noise_sigma: args.noise,
            ..SceneSpec::default()
        },
        pipeline: args.pipeline.resolve()?,
        criteria: HitCriteria {
            max_rotation_error: args.rot_thresh_deg.to_radians(),
            max_translation_error: args.trans_thresh,
        },
    };
    cfg.scene.validate()?;
    let table = bench::format_table(&bench::run(&cfg)?, !args.no_timings);
    print!("{table}");
    if let Some(path) = &args.out {
        fs::write(path, &table).map_err(io_err(path))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            warn!("could not size the thread pool: {e}");
        }
    }
    let outcome = match &cli.command {
        Command::Register(a) => cmd_register(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
