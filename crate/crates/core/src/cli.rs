//! Command-line front end. [`run`] parses arguments, dispatches to a
//! subcommand and returns the process exit code: 0 on success, 1 when some
//! inputs failed, 2 for usage and configuration errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{ModelCache, PipelineConfig};
use crate::dataset::{corpus_stats, frame_file_name, parse_frame_ev, write_stack};
use crate::error::{Error, Result};
use crate::fusion::{fuse_flat, Engine, FusionConfig};
use crate::imgcore::{load_srgb, save_gray, save_srgb, SrgbImage};
use crate::iqa::{fit_niqe_model, DEFAULT_CONCURRENCY, DEFAULT_PATCH_SIZE, DEFAULT_SHARPNESS_FRACTION};
use crate::pipeline::{build_stack, discover_inputs, generate_dataset, source_id};
use crate::preview::contact_sheet;
use crate::process::Limiter;
use crate::synth::{natural_srgb, write_fixture_corpus};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "pseudogt", version, about = "Multi-exposure synthesis, fusion and pseudo-GT dataset generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render exposure stacks plus a contact-sheet preview per source.
    RenderMes(RenderMesArgs),
    /// Fuse one stack directory with a single engine.
    Fuse(FuseArgs),
    /// Score images and print `path,metric,value,polarity` CSV.
    Score(ScoreArgs),
    /// Fit a NIQE pristine model from clean images.
    FitNiqe(FitNiqeArgs),
    /// Run the full pipeline over a directory of sources.
    GenDataset(GenDatasetArgs),
    /// Print corpus statistics for a manifest.
    Stats(StatsArgs),
    /// Write seeded synthetic fixture images.
    MakeFixtures(MakeFixturesArgs),
}

#[derive(Args, Debug)]
struct RenderMesArgs {
    /// Source PNG file or directory of PNGs.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated EV offsets for linear sources.
    #[arg(long, allow_hyphen_values = true, default_value = "-3,-2,-1,0,1,2,3")]
    evs: String,
    /// Treat sources as 8-bit sRGB and retarget them to style codes.
    #[arg(long)]
    from_srgb: bool,
    /// Comma-separated mean-intensity targets used with --from-srgb.
    #[arg(long, default_value = "0.25,0.5,0.75")]
    targets: String,
}

#[derive(Args, Debug)]
struct FuseArgs {
    /// Directory holding the frames (`*_ev±N.NN.png`, or any PNGs in name order).
    #[arg(long)]
    stack: PathBuf,
    /// mertens, gradient, flat-weighted or ext:<command>.
    #[arg(long)]
    engine: String,
    /// Pixel-wise blend instead of the pyramid.
    #[arg(long)]
    flat: bool,
    #[arg(long, default_value_t = crate::fusion::DEFAULT_EPSILON)]
    epsilon: f64,
    /// Also write each normalized weight map as a grayscale PNG.
    #[arg(long)]
    dump_weights: bool,
    /// Output PNG (default: `<stack>/fused/<engine>.png`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    /// Glob pattern of images to score.
    #[arg(long = "in")]
    input: String,
    /// Comma-separated metrics: niqe, brisque, ext:<command>.
    #[arg(long, default_value = "niqe")]
    metrics: String,
    #[arg(long)]
    niqe_model: Option<PathBuf>,
    /// Linear BRISQUE regressor file; without it a built-in ranking-only fallback is used.
    #[arg(long)]
    brisque_model: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitNiqeArgs {
    /// Glob pattern of clean sRGB images.
    #[arg(long)]
    corpus: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PATCH_SIZE)]
    patch_size: usize,
    #[arg(long, default_value_t = DEFAULT_SHARPNESS_FRACTION)]
    sharpness_fraction: f64,
}

#[derive(Args, Debug)]
struct GenDatasetArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: logical CPU count).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Also write the stats as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MakeFixturesArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    count: usize,
    #[arg(long, default_value_t = 320)]
    width: usize,
    #[arg(long, default_value_t = 240)]
    height: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write 8-bit sRGB scenes instead of 16-bit linear sources.
    #[arg(long)]
    srgb: bool,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::RenderMes(a) => render_mes_cmd(a),
        Command::Fuse(a) => fuse_cmd(a),
        Command::Score(a) => score_cmd(a),
        Command::FitNiqe(a) => fit_niqe_cmd(a),
        Command::GenDataset(a) => gen_dataset_cmd(a),
        Command::Stats(a) => stats_cmd(a),
        Command::MakeFixtures(a) => make_fixtures_cmd(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Config { .. }
        | Error::InvalidEnsembleConfig(_)
        | Error::InvalidFusionConfig(_)
        | Error::UnknownEngine(_)
        | Error::UnknownMetric(_)
        | Error::InvalidStyleCode(_)
        | Error::ModelFormat { .. }
        | Error::InvalidModel(_) => EXIT_USAGE,
        _ => EXIT_PARTIAL,
    }
}

fn usage(cause: String) -> Error {
    Error::Config {
        path: PathBuf::from("<command line>"),
        line: 0,
        cause,
    }
}

fn floats(flag: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| usage(format!("--{flag} {s:?}: {e}"))))
        .collect()
}

fn glob_paths(pattern: &str) -> Result<Vec<PathBuf>> {
    let paths = glob::glob(pattern).map_err(|e| usage(format!("bad glob {pattern:?}: {e}")))?;
    let mut out: Vec<PathBuf> = paths.filter_map(|p| p.ok()).filter(|p| p.is_file()).collect();
    out.sort();
    if out.is_empty() {
        return Err(Error::io(pattern, std::io::Error::new(std::io::ErrorKind::NotFound, "no files match")));
    }
    Ok(out)
}

fn render_mes_cmd(a: RenderMesArgs) -> Result<i32> {
    let cfg = PipelineConfig {
        evs: floats("evs", &a.evs)?,
        from_srgb: a.from_srgb,
        targets: floats("targets", &a.targets)?,
        ..PipelineConfig::default()
    };
    let inputs = discover_inputs(&a.input)?;
    if inputs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut failed = 0;
    for path in &inputs {
        let id = source_id(path);
        let done = build_stack(path, &id, &cfg).and_then(|stack| {
            write_stack(&stack, &a.out)?;
            save_srgb(a.out.join("preview").join(format!("{id}.png")), &contact_sheet(&stack))
        });
        match done {
            Ok(()) => log::info!("{id}: stack written"),
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                failed += 1;
            }
        }
    }
    println!("rendered {} of {} sources", inputs.len() - failed, inputs.len());
    Ok(if failed == 0 { EXIT_OK } else { EXIT_PARTIAL })
}

/// Frames of a stack directory, ordered by the EV in their file names
/// (falling back to file-name order).
fn load_stack_dir(dir: &Path) -> Result<Vec<(PathBuf, SrgbImage)>> {
    let mut paths = discover_inputs(dir)?;
    paths.sort_by(|a, b| {
        let ev = |p: &PathBuf| p.file_name().and_then(|n| n.to_str()).and_then(parse_frame_ev);
        match (ev(a), ev(b)) {
            (Some(x), Some(y)) => x.total_cmp(&y),
            _ => a.cmp(b),
        }
    });
    if paths.len() < 2 {
        return Err(Error::StackTooShort(paths.len()));
    }
    paths
        .into_iter()
        .map(|p| {
            let img = load_srgb(&p)?;
            Ok((p, img))
        })
        .collect()
}

fn fuse_cmd(a: FuseArgs) -> Result<i32> {
    let engine = Engine::parse(&a.engine)?;
    let cfg = FusionConfig {
        epsilon: a.epsilon,
        ..FusionConfig::default()
    };
    cfg.validate()?;
    let loaded = load_stack_dir(&a.stack)?;
    let frames: Vec<SrgbImage> = loaded.iter().map(|(_, f)| f.clone()).collect();
    let safe_name: String = engine
        .name()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    let out = a.out.unwrap_or_else(|| a.stack.join("fused").join(format!("{safe_name}.png")));
    let weights = match engine.weights(&frames, &cfg) {
        Some(w) => Some(w?),
        None if a.flat || a.dump_weights => {
            return Err(usage("--flat and --dump-weights need a built-in engine".into()))
        }
        None => None,
    };
    let fused = match (&weights, a.flat) {
        (Some(w), true) => fuse_flat(&frames, w)?,
        _ => engine.fuse(&frames, &cfg)?,
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    save_srgb(&out, &fused)?;
    println!("{}", out.display());
    if let (Some(w), true) = (&weights, a.dump_weights) {
        let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("fused").to_owned();
        for (j, (path, _)) in loaded.iter().enumerate() {
            let label = path
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(parse_frame_ev)
                .map(|ev| frame_file_name(&format!("{stem}_w"), ev))
                .unwrap_or_else(|| format!("{stem}_w{j}.png"));
            let p = out.with_file_name(label);
            save_gray(&p, &w.plane(j))?;
            println!("{}", p.display());
        }
    }
    Ok(EXIT_OK)
}

fn score_cmd(a: ScoreArgs) -> Result<i32> {
    let cfg = PipelineConfig {
        niqe_model: a.niqe_model,
        brisque_model: a.brisque_model,
        ..PipelineConfig::default()
    };
    let limiter = Limiter::new(DEFAULT_CONCURRENCY);
    let mut cache = ModelCache::default();
    let names: Vec<&str> = a.metrics.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if names.is_empty() {
        return Err(usage("--metrics is empty".into()));
    }
    let scorers = names
        .iter()
        .map(|m| cfg.scorer(m, &limiter, &mut cache))
        .collect::<Result<Vec<_>>>()?;
    let paths = glob_paths(&a.input)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let _ = writeln!(out, "path,metric,value,polarity");
    let mut failed = 0;
    for path in &paths {
        let img = match load_srgb(path) {
            Ok(i) => i,
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                failed += 1;
                continue;
            }
        };
        for s in &scorers {
            match s.score(&img) {
                Ok(v) => {
                    let _ = writeln!(
                        out,
                        "{},{},{},{}",
                        csv_field(&path.display().to_string()),
                        csv_field(s.name()),
                        v.value,
                        v.polarity
                    );
                }
                Err(e) => {
                    eprintln!("{} [{}]: {e}", path.display(), s.name());
                    failed += 1;
                }
            }
        }
    }
    Ok(if failed == 0 { EXIT_OK } else { EXIT_PARTIAL })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn fit_niqe_cmd(a: FitNiqeArgs) -> Result<i32> {
    let paths = glob_paths(&a.corpus)?;
    let corpus = paths.iter().map(load_srgb).collect::<Result<Vec<_>>>()?;
    let model = fit_niqe_model(&corpus, a.patch_size, a.sharpness_fraction)?;
    model.save(&a.out)?;
    println!(
        "fitted NIQE model from {} images (covariance rank {}) -> {}",
        corpus.len(),
        model.covariance_rank(),
        a.out.display()
    );
    Ok(EXIT_OK)
}

fn gen_dataset_cmd(a: GenDatasetArgs) -> Result<i32> {
    let mut cfg = PipelineConfig::load(&a.config).map_err(|e| match e {
        Error::Io { path, cause } => Error::Config { path, line: 0, cause },
        e => e,
    })?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let inputs = discover_inputs(&a.input)?;
    if inputs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.workers.unwrap_or(0))
        .build()
        .map_err(|e| usage(format!("--workers: {e}")))?;
    let summary = pool.install(|| generate_dataset(&inputs, &a.out, &cfg))?;
    println!(
        "{} sources: {} accepted, {} rejected, {} failed; {} records",
        summary.sources,
        summary.accepted,
        summary.rejected.len(),
        summary.failed.len(),
        summary.records.len()
    );
    print!("{}", summary.stats.to_table());
    Ok(if summary.all_processed() { EXIT_OK } else { EXIT_PARTIAL })
}

fn stats_cmd(a: StatsArgs) -> Result<i32> {
    let stats = corpus_stats(&a.manifest)?;
    print!("{}", stats.to_table());
    if let Some(p) = a.csv {
        std::fs::write(&p, stats.to_csv()).map_err(|e| Error::io(&p, e))?;
    }
    Ok(EXIT_OK)
}

fn make_fixtures_cmd(a: MakeFixturesArgs) -> Result<i32> {
    if a.srgb {
        std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
        for i in 0..a.count {
            let p = a.out.join(format!("natural_{i:03}.png"));
            save_srgb(&p, &natural_srgb(a.seed.wrapping_add(i as u64), a.width, a.height))?;
        }
    } else {
        write_fixture_corpus(&a.out, a.count, a.width, a.height, a.seed)?;
    }
    println!("wrote {} fixtures to {}", a.count, a.out.display());
    Ok(EXIT_OK)
}
