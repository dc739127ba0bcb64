//! `timbre`: every offline stage of the surface pipeline, plus the server.
//!
//! Each stage reads the previous stage's file and records that file's content
//! hash, so `surface build` can refuse a model trained on other features.

mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use timbre::artifact::hash_file;
use timbre::corpus::{build_corpus, CorpusManifest, ExploreConfig, OctavePolicy};
use timbre::features::{extract_candidates, CandidateMatrix, FeatureMatrix, SelectionCriterion};
use timbre::gtm::{self, GtmConfig, SavedModel};
use timbre::session::{replay, NoLookup, ParamLookup, Session};
use timbre::surface::{TimbreSurface, DEFAULT_CLUSTERS, INTERPOLATION_K};
use timbre::synth::{render_with, RenderSettings, DEFAULT_DURATION, DEFAULT_RATE};
use timbre::{wav, ParameterVector};
use timbre_service::ServiceConfig;

#[derive(Debug, Parser)]
#[command(
    name = "timbre",
    version,
    about = "Build, query and serve Timbre Surfaces"
)]
struct Cli {
    /// TOML file with a table per subcommand (`[corpus.build]`, `[serve]`, ...)
    /// whose keys are flag names. Command line flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    #[allow(dead_code)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render synthesizer parameters to a WAV file.
    #[command(subcommand)]
    Synth(SynthCmd),
    /// Search the parameter space between presets and render a corpus.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Extract candidate statistics and select the feature subset.
    #[command(subcommand)]
    Features(FeaturesCmd),
    /// Train the latent-space projection.
    #[command(subcommand)]
    Gtm(GtmCmd),
    /// Build and query the 2D surface.
    #[command(subcommand)]
    Surface(SurfaceCmd),
    /// Serve the surface over HTTP and WebSocket.
    Serve(ServeArgs),
    /// Inspect recorded session logs.
    #[command(subcommand)]
    Session(SessionCmd),
}

#[derive(Debug, Subcommand)]
enum SynthCmd {
    /// Render one sound.
    Render(SynthRenderArgs),
}

#[derive(Debug, Args)]
struct SynthRenderArgs {
    /// 16 values in [0, 1], space or comma separated; `0.5x16` repeats a value.
    #[arg(long, allow_hyphen_values = true)]
    params: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    octave: i32,
    /// Transposition in semitones.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pitch: i32,
    #[arg(long, default_value_t = DEFAULT_DURATION)]
    duration: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Subcommand)]
enum CorpusCmd {
    /// Explore the hypercubes spanned by preset pairs and render every member.
    Build(CorpusBuildArgs),
}

#[derive(Debug, Args)]
struct CorpusBuildArgs {
    /// Presets file: 16 decimals per line, `#` comments.
    #[arg(long)]
    presets: PathBuf,
    /// Output directory for WAVs and `manifest.jsonl`.
    #[arg(long)]
    out: PathBuf,
    /// Stop splitting a cube once every side similarity reaches this.
    #[arg(long, default_value_t = 0.85)]
    threshold: f64,
    #[arg(long, default_value_t = 1e-12)]
    min_volume: f64,
    #[arg(long, default_value_t = 12)]
    max_depth: u32,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = -2, allow_hyphen_values = true)]
    octave_low: i32,
    #[arg(long, default_value_t = 2, allow_hyphen_values = true)]
    octave_high: i32,
    #[arg(long, default_value_t = DEFAULT_DURATION)]
    duration: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Subcommand)]
enum FeaturesCmd {
    /// Compute the candidate statistics of every corpus sound.
    Extract(ExtractArgs),
    /// Select the feature subset and standardize.
    Select(SelectArgs),
}

#[derive(Debug, Args)]
struct ExtractArgs {
    /// Corpus directory or manifest file.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Criterion {
    /// Variance minus redundancy with already chosen columns.
    Relevance,
    /// Likelihood of a small GTM fitted to the chosen columns.
    Gtm,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[arg(long)]
    candidates: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Criterion::Relevance)]
    criterion: Criterion,
}

#[derive(Debug, Subcommand)]
enum GtmCmd {
    /// Fit a GTM to the standardized feature matrix.
    Train(TrainArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Latent grid side (K = side²).
    #[arg(long, default_value_t = 20)]
    latent: usize,
    /// Basis grid side (M = side²).
    #[arg(long, default_value_t = 6)]
    basis: usize,
    #[arg(long, default_value_t = 2.0)]
    width: f64,
    #[arg(long, default_value_t = 1e-4)]
    lambda: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
}

#[derive(Debug, Subcommand)]
enum SurfaceCmd {
    /// Project the features through the model, cluster and write the surface.
    Build(SurfaceBuildArgs),
    /// Print the parameters at a surface position, optionally rendering them.
    Query(QueryArgs),
}

#[derive(Debug, Args)]
struct SurfaceBuildArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CLUSTERS)]
    clusters: usize,
}

#[derive(Debug, Args)]
struct QueryArgs {
    #[arg(long)]
    surface: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    x: f64,
    #[arg(long, allow_hyphen_values = true)]
    y: f64,
    /// Blend the 8 nearest points instead of taking the nearest one.
    #[arg(long)]
    interpolate: bool,
    /// Also render the parameters to this WAV file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Octave for `--out`; defaults to the nearest point's octave.
    #[arg(long, allow_hyphen_values = true)]
    octave: Option<i32>,
    #[arg(long, default_value_t = DEFAULT_DURATION)]
    duration: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    #[arg(long, env = "SURFACE_PATH")]
    surface: Option<PathBuf>,
    /// Directory with corpus WAVs, served under `/sounds/{id}`.
    #[arg(long)]
    corpus_dir: Option<PathBuf>,
    /// Append each session's accepted events to `<dir>/<session>.jsonl`.
    #[arg(long)]
    session_log_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum SessionCmd {
    /// Replay an event log and print the resulting state hash.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
struct ReplayArgs {
    #[arg(long)]
    log: PathBuf,
    /// Surface used to resolve node parameters, as the server did.
    #[arg(long)]
    surface: Option<PathBuf>,
}

fn synth_render(a: SynthRenderArgs) -> Result<()> {
    let params: ParameterVector = a.params.parse().context("--params")?;
    let sound = render_with(
        &params,
        &RenderSettings {
            octave: a.octave,
            transpose_semitones: a.pitch,
            duration: a.duration,
            rate: DEFAULT_RATE,
            seed: a.seed,
        },
    )?;
    wav::write(&a.out, &sound.samples, sound.sample_rate)?;
    println!("{}", a.out.display());
    Ok(())
}

fn corpus_build(a: CorpusBuildArgs) -> Result<()> {
    let cfg = ExploreConfig {
        similarity_threshold: a.threshold,
        min_volume: a.min_volume,
        max_depth: a.max_depth,
        duration: a.duration,
        sample_rate: DEFAULT_RATE,
        seed: a.seed,
        octaves: OctavePolicy {
            low: a.octave_low,
            high: a.octave_high,
        },
        workers: a.workers,
    };
    cfg.validate()?;
    let manifest = build_corpus(&a.presets, &cfg, &a.out)?;
    println!("{} sounds in {}", manifest.records.len(), a.out.display());
    Ok(())
}

fn features_extract(a: ExtractArgs) -> Result<()> {
    let manifest = CorpusManifest::load(&a.corpus)?;
    let candidates = extract_candidates(&manifest, a.workers)?;
    candidates.save(&a.out)?;
    println!(
        "{} x {} candidates in {}",
        candidates.rows.nrows(),
        candidates.rows.ncols(),
        a.out.display()
    );
    Ok(())
}

fn features_select(a: SelectArgs) -> Result<()> {
    let candidates = CandidateMatrix::load(&a.candidates)?;
    let criterion = match a.criterion {
        Criterion::Relevance => SelectionCriterion::RelevanceRedundancy,
        Criterion::Gtm => SelectionCriterion::gtm_default(),
    };
    let fm = FeatureMatrix::build(&candidates, &hash_file(&a.candidates)?, criterion)?;
    fm.save(&a.out)?;
    println!(
        "{} x {} features in {}",
        fm.rows.nrows(),
        fm.rows.ncols(),
        a.out.display()
    );
    Ok(())
}

fn gtm_train(a: TrainArgs) -> Result<()> {
    let fm = FeatureMatrix::load(&a.features)?;
    let cfg = GtmConfig {
        latent_grid: (a.latent, a.latent),
        basis_grid: (a.basis, a.basis),
        width_factor: a.width,
        lambda: a.lambda,
        max_iter: a.max_iter,
        rel_tol: a.tol,
    };
    let (model, trace) = gtm::fit(&fm.standardized(), &cfg)?;
    let saved = SavedModel {
        model,
        standardizer: fm.standardizer.clone(),
        input_hash: hash_file(&a.features)?,
    };
    saved.save(&a.out)?;
    println!(
        "{} iterations, objective {:.6} in {}",
        trace.len() - 1,
        trace.last().copied().unwrap_or(f64::NAN),
        a.out.display()
    );
    Ok(())
}

fn surface_build(a: SurfaceBuildArgs) -> Result<()> {
    let fm = FeatureMatrix::load(&a.features)?;
    let model = SavedModel::load(&a.model)?;
    let features_hash = hash_file(&a.features)?;
    if model.input_hash != features_hash {
        return Err(timbre::Error::Chain(format!(
            "{} was trained on features {}, but {} hashes to {}",
            a.model.display(),
            model.input_hash,
            a.features.display(),
            features_hash
        ))
        .into());
    }
    let surface = TimbreSurface::from_artifacts(&fm, &model, a.clusters, &hash_file(&a.model)?)?;
    surface.export(&a.out)?;
    println!("{} points in {}", surface.len(), a.out.display());
    Ok(())
}

fn surface_query(a: QueryArgs) -> Result<()> {
    let surface = TimbreSurface::import(&a.surface)?;
    let q = [a.x, a.y];
    let nearest = surface.nearest(q, 1)?;
    let Some((point, _)) = nearest.first() else {
        bail!("surface {} has no points", a.surface.display());
    };
    let params = if a.interpolate {
        surface.interpolate(q, INTERPOLATION_K.min(surface.len()))?
    } else {
        point.params
    };
    log::info!("nearest point {} at ({}, {})", point.id, point.x, point.y);
    println!("{params}");
    if let Some(out) = &a.out {
        let sound = render_with(
            &params,
            &RenderSettings {
                octave: a.octave.unwrap_or(point.octave),
                transpose_semitones: 0,
                duration: a.duration,
                rate: DEFAULT_RATE,
                seed: a.seed,
            },
        )?;
        wav::write(out, &sound.samples, sound.sample_rate)?;
    }
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let cfg = ServiceConfig {
        addr: std::net::SocketAddr::new(a.host, a.port),
        surface_path: a.surface,
        corpus_dir: a.corpus_dir,
        session_log_dir: a.session_log_dir,
    };
    let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
    rt.block_on(async {
        let (addr, server) = timbre_service::bind(&cfg).await?;
        eprintln!("listening on http://{addr}");
        server.await.context("serving")
    })
}

fn session_replay(a: ReplayArgs) -> Result<()> {
    let text =
        std::fs::read_to_string(&a.log).with_context(|| format!("reading {}", a.log.display()))?;
    let records = Session::parse_jsonl(&text)?;
    let surface = a
        .surface
        .as_deref()
        .map(TimbreSurface::import)
        .transpose()?;
    let lookup: &dyn ParamLookup = match &surface {
        Some(s) => s,
        None => &NoLookup,
    };
    let state = replay(&records, lookup)?;
    println!("{} {}", state.seq, state.hash());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(SynthCmd::Render(a)) => synth_render(a),
        Command::Corpus(CorpusCmd::Build(a)) => corpus_build(a),
        Command::Features(FeaturesCmd::Extract(a)) => features_extract(a),
        Command::Features(FeaturesCmd::Select(a)) => features_select(a),
        Command::Gtm(GtmCmd::Train(a)) => gtm_train(a),
        Command::Surface(SurfaceCmd::Build(a)) => surface_build(a),
        Command::Surface(SurfaceCmd::Query(a)) => surface_query(a),
        Command::Serve(a) => serve(a),
        Command::Session(SessionCmd::Replay(a)) => session_replay(a),
    }
}

fn override_self(cmd: clap::Command) -> clap::Command {
    cmd.args_override_self(true).mut_subcommands(override_self)
}

/// The error chain on one line, skipping causes already quoted by their parent.
fn one_line(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if out.ends_with(&msg) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&msg);
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn parse() -> Result<Cli> {
    let args = config::expand(std::env::args_os().collect())?;
    let matches = override_self(Cli::command())
        .try_get_matches_from(args)
        .unwrap_or_else(|e| e.exit());
    Ok(Cli::from_arg_matches(&matches)?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match parse().and_then(run) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("timbre: error: {}", one_line(&e));
            ExitCode::FAILURE
        }
    }
}
