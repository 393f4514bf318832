//! `latentscope`: feature extraction, latent trend analysis, distortion
//! measures and the grid listening experiment from one binary.

use std::fmt::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use latentscope_core::distortion::{distortion_report, DistortionConfig, ReportTable};
use latentscope_core::experiment::{
    build_grid, effective_answers, generate_synthetic_stimuli, random_baseline, read_answer_log,
    score_answers, slope_test, BaselineMethod, BaselineScheme, GridSpec, ScoreOptions,
    SlopeStatistic, SynthConfig, DEFAULT_RESOLUTION,
};
use latentscope_core::features::{extract_feature_table, extract_frame_descriptors, FrameConfig};
use latentscope_core::latent::{
    export_trend_map, fit_all_trends, fit_pca, select_features, EliminationReason, Projection,
    SelectionConfig, TrendModel,
};
use latentscope_core::table::{export_feature_table, import_feature_table, load_embeddings};
use latentscope_core::{audio::load_audio, table::EmbeddingSet};
use latentscope_service::{Server, ServiceConfig, TASKS_PER_SESSION};

#[derive(Parser)]
#[command(name = "latentscope", version, about = "Latent-space controllability toolkit")]
struct Cli {
    /// Print machine-readable JSON instead of tables.
    #[arg(long, global = true)]
    json: bool,
    /// Seed for every random draw (sessions, Monte-Carlo, synthesis).
    #[arg(long, global = true, default_value_t = 2013)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Frame-level analysis and utterance functionals for a directory of WAV files.
    ExtractFeatures(ExtractArgs),
    /// Validate and normalize an externally computed feature table.
    ImportFeatures {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the two-component projection of an embedding set.
    FitPca {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a plane per feature over the projected space and rank by APCC.
    AnalyzeTrends {
        #[command(flatten)]
        latent: LatentInputs,
        /// Write the trends as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Drop redundant and weakly predicted features.
    SelectFeatures {
        #[command(flatten)]
        latent: LatentInputs,
        #[arg(long, default_value_t = 0.8)]
        redundancy_cutoff: f64,
        #[arg(long, default_value_t = 0.3)]
        prediction_cutoff: f64,
    },
    /// Scatter of the projected space with trend arrows (SVG plus CSV).
    TrendMap {
        #[command(flatten)]
        latent: LatentInputs,
        /// Feature used to color the points.
        #[arg(long)]
        color: String,
        #[arg(long)]
        svg: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// MCD, VDE and F0 errors between a reference and a predicted utterance.
    Distortion {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        predicted: PathBuf,
        /// Highest cepstral coefficient compared.
        #[arg(long, default_value_t = 13)]
        order: usize,
        /// Multiply MCD by (10 / ln 10) * sqrt(2).
        #[arg(long)]
        scaled: bool,
        #[arg(long, default_value_t = 50)]
        max_shift: usize,
    },
    /// Lay the sampling lattice and anchors over the projected embeddings.
    BuildGrid {
        #[arg(long)]
        embeddings: PathBuf,
        /// Reuse a fitted projection instead of fitting one.
        #[arg(long)]
        projection: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize a stimulus for every lattice point of a grid.
    GenStimuli {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        texts: usize,
        #[arg(long, default_value_t = 16_000)]
        sample_rate: u32,
    },
    /// Run the experiment service.
    Serve(ServeArgs),
    /// Score a log of answers against a grid.
    Score {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        /// Snap each click to its nearest anchor first.
        #[arg(long)]
        snap: bool,
        /// Keep superseded resubmissions instead of the last answer per task.
        #[arg(long)]
        all_records: bool,
    },
    /// Expected distance of a random answer.
    Baseline {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, value_enum, default_value_t = SchemeArg::AnchorToAnchor)]
        scheme: SchemeArg,
        /// Monte-Carlo draws; exact enumeration when omitted (where possible).
        #[arg(long)]
        draws: Option<usize>,
    },
    /// Linear trend of a per-index statistic with a two-sided t-test.
    SlopeTest {
        /// CSV with columns `index,value`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = StatisticArg::MedianByIndex)]
        statistic: StatisticArg,
    },
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    audio_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 60.0)]
    f0_min: f64,
    #[arg(long, default_value_t = 500.0)]
    f0_max: f64,
    #[arg(long, default_value_t = 0.45)]
    voicing_threshold: f64,
    /// Pitch window in seconds (default: two periods at --f0-min).
    #[arg(long)]
    pitch_window: Option<f64>,
}

#[derive(Args)]
struct LatentInputs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    features: PathBuf,
    /// Fitted projection; fitted on the embeddings when omitted.
    #[arg(long)]
    projection: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "LATENTSCOPE_PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, env = "LATENTSCOPE_HOST", default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    #[arg(long, env = "LATENTSCOPE_MANIFEST")]
    manifest: PathBuf,
    #[arg(long, env = "LATENTSCOPE_LOG")]
    log: PathBuf,
    #[arg(long, env = "LATENTSCOPE_ADMIN_KEY", hide_env_values = true)]
    admin_key: String,
    #[arg(long, env = "LATENTSCOPE_STATIC_DIR")]
    static_dir: Option<PathBuf>,
    #[arg(long, default_value_t = TASKS_PER_SESSION)]
    tasks: u32,
}

#[derive(Clone, Copy, ValueEnum)]
#[allow(clippy::enum_variant_names)]
enum SchemeArg {
    AnchorToAnchor,
    AnchorToLattice,
    AnchorToUniformClick,
}

impl From<SchemeArg> for BaselineScheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::AnchorToAnchor => BaselineScheme::AnchorToAnchor,
            SchemeArg::AnchorToLattice => BaselineScheme::AnchorToLattice,
            SchemeArg::AnchorToUniformClick => BaselineScheme::AnchorToUniformClick,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StatisticArg {
    MedianByIndex,
    MeanByIndex,
}

/// Fails with the flag name when an input path does not exist.
fn input<'a>(flag: &str, path: &'a Path) -> Result<&'a Path> {
    if !path.exists() {
        bail!("--{flag}: {} does not exist", path.display());
    }
    Ok(path)
}

fn emit(json_mode: bool, value: serde_json::Value, text: impl FnOnce() -> String) -> Result<()> {
    if json_mode {
        println!("{}", serde_json::to_string_pretty(&value)?);
    } else {
        print!("{}", text());
    }
    Ok(())
}

fn load_latent(l: &LatentInputs) -> Result<(EmbeddingSet, Projection, latentscope_core::table::FeatureTable)> {
    let emb = load_embeddings(input("embeddings", &l.embeddings)?).context("--embeddings")?;
    let feats = import_feature_table(input("features", &l.features)?).context("--features")?;
    let proj = match &l.projection {
        Some(p) => Projection::load(input("projection", p)?).context("--projection")?,
        None => fit_pca(&emb).context("--embeddings")?,
    };
    Ok((emb, proj, feats))
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map_or("-".into(), |x| format!("{x:.prec$}"))
}

fn trend_table(trends: &[TrendModel]) -> String {
    let width = trends.iter().map(|t| t.feature.len()).max().unwrap_or(7).max(7);
    let mut s = format!(
        "{:<width$}  {:>6}  {:>7}  {:>8}  {:>10}  {:>5}\n",
        "feature", "APCC", "CV APCC", "angle", "slope", "n"
    );
    for t in trends {
        let angle = t.gradient.map(|g| g[1].atan2(g[0]).to_degrees());
        let _ = writeln!(
            s,
            "{:<width$}  {:>6}  {:>7}  {:>8}  {:>10.4e}  {:>5}",
            t.feature,
            fmt_opt(t.apcc, 3),
            fmt_opt(t.cv_apcc, 3),
            fmt_opt(angle, 1),
            t.slope(),
            t.n
        );
    }
    s
}

fn run(cli: Cli) -> Result<()> {
    let json_mode = cli.json;
    match cli.command {
        Command::ExtractFeatures(a) => {
            let cfg = FrameConfig {
                f0_min: a.f0_min,
                f0_max: a.f0_max,
                voicing_threshold: a.voicing_threshold,
                pitch_window_secs: a.pitch_window,
                ..FrameConfig::default()
            };
            let table = extract_feature_table(input("audio-dir", &a.audio_dir)?, &cfg)?;
            export_feature_table(&table, &a.out).context("--out")?;
            emit(
                json_mode,
                json!({ "rows": table.n_rows(), "columns": table.names().len(), "out": a.out }),
                || format!("{} utterances x {} features -> {}\n", table.n_rows(), table.names().len(), a.out.display()),
            )
        }
        Command::ImportFeatures { input: path, out } => {
            let table = import_feature_table(input("input", &path)?).context("--input")?;
            export_feature_table(&table, &out).context("--out")?;
            let missing = table.rows().iter().flatten().filter(|v| v.is_none()).count();
            emit(
                json_mode,
                json!({ "rows": table.n_rows(), "columns": table.names(), "missing": missing }),
                || format!("{} rows, {} columns, {missing} missing cells -> {}\n", table.n_rows(), table.names().len(), out.display()),
            )
        }
        Command::FitPca { embeddings, out } => {
            let emb = load_embeddings(input("embeddings", &embeddings)?).context("--embeddings")?;
            let p = fit_pca(&emb)?;
            p.save(&out).context("--out")?;
            emit(
                json_mode,
                json!({
                    "explained_variance": p.explained_variance,
                    "explained_ratio": p.explained_ratio(),
                    "dim": p.dim(),
                }),
                || {
                    format!(
                        "dim {}  PC1 var {:.6}  PC2 var {:.6}  explained {:.2}%\n",
                        p.dim(),
                        p.explained_variance[0],
                        p.explained_variance[1],
                        100.0 * p.explained_ratio()
                    )
                },
            )
        }
        Command::AnalyzeTrends { latent, out } => {
            let (emb, proj, feats) = load_latent(&latent)?;
            let trends = fit_all_trends(&emb, &proj, &feats)?;
            if let Some(out) = &out {
                std::fs::write(out, serde_json::to_string_pretty(&trends)? + "\n")
                    .with_context(|| format!("--out: {}", out.display()))?;
            }
            emit(json_mode, serde_json::to_value(&trends)?, || trend_table(&trends))
        }
        Command::SelectFeatures { latent, redundancy_cutoff, prediction_cutoff } => {
            let (emb, proj, feats) = load_latent(&latent)?;
            let trends = fit_all_trends(&emb, &proj, &feats)?;
            let cfg = SelectionConfig { redundancy_cutoff, prediction_cutoff };
            let sel = select_features(&trends, &feats, &cfg)?;
            emit(json_mode, serde_json::to_value(&sel)?, || {
                let mut s = String::from("kept:\n");
                for name in &sel.kept {
                    let apcc = trends.iter().find(|t| &t.feature == name).and_then(|t| t.apcc);
                    let _ = writeln!(s, "  {name}  APCC {}", fmt_opt(apcc, 3));
                }
                s.push_str("eliminated:\n");
                for e in &sel.eliminated {
                    let why = match &e.reason {
                        EliminationReason::Redundant { with, apcc } => format!("redundant with {with} (|r| = {apcc:.3})"),
                        EliminationReason::Weak { apcc } => format!("weak (APCC {})", fmt_opt(*apcc, 3)),
                    };
                    let _ = writeln!(s, "  {}  {why}", e.name);
                }
                s
            })
        }
        Command::TrendMap { latent, color, svg, data } => {
            let (emb, proj, feats) = load_latent(&latent)?;
            let trends = fit_all_trends(&emb, &proj, &feats)?;
            let map = export_trend_map(&proj, &emb, &feats, &trends, &color, &svg, &data)
                .with_context(|| format!("--color {color}"))?;
            let drawn = map.arrows.iter().filter(|a| a.gradient.is_some()).count();
            emit(
                json_mode,
                json!({ "points": map.points.len(), "arrows": map.arrows.len(), "drawn_arrows": drawn, "svg": svg, "data": data }),
                || format!("{} points, {drawn} arrows -> {}, {}\n", map.points.len(), svg.display(), data.display()),
            )
        }
        Command::Distortion { reference, predicted, order, scaled, max_shift } => {
            let cfg = FrameConfig::default();
            let r = extract_frame_descriptors(&load_audio(input("reference", &reference)?).context("--reference")?, &cfg)?;
            let p = extract_frame_descriptors(&load_audio(input("predicted", &predicted)?).context("--predicted")?, &cfg)?;
            let reports = distortion_report(&r, &p, &DistortionConfig { order, scaled, max_shift })?;
            emit(json_mode, serde_json::to_value(&reports)?, || ReportTable(&reports).to_string())
        }
        Command::BuildGrid { embeddings, projection, resolution, out } => {
            let emb = load_embeddings(input("embeddings", &embeddings)?).context("--embeddings")?;
            let proj = match &projection {
                Some(p) => Projection::load(input("projection", p)?).context("--projection")?,
                None => fit_pca(&emb)?,
            };
            let grid = build_grid(&proj, &emb, resolution).context("--resolution")?;
            grid.save(&out).context("--out")?;
            let b = grid.geometry.bounds;
            emit(
                json_mode,
                json!({ "bounds": b, "resolution": resolution, "anchors": grid.anchors, "unit": grid.unit }),
                || {
                    format!(
                        "x [{:.4}, {:.4}]  y [{:.4}, {:.4}]  {resolution}x{resolution} lattice, {cells}x{cells} anchors -> {}\n",
                        b.x_min,
                        b.x_max,
                        b.y_min,
                        b.y_max,
                        out.display(),
                        cells = grid.geometry.cells,
                    )
                },
            )
        }
        Command::GenStimuli { grid, out, texts, sample_rate } => {
            let spec = GridSpec::load(input("grid", &grid)?).context("--grid")?;
            let cfg = SynthConfig {
                resolution: spec.geometry.resolution,
                n_texts: texts,
                sample_rate,
                seed: cli.seed,
                ..SynthConfig::default()
            };
            let m = generate_synthetic_stimuli(&out, &cfg, Some(&spec.geometry))?;
            emit(
                json_mode,
                json!({ "files": m.entries.len(), "texts": m.texts, "manifest": out.join(latentscope_core::experiment::MANIFEST_FILE) }),
                || format!("{} stimuli for {} texts -> {}\n", m.entries.len(), m.texts.len(), out.display()),
            )
        }
        Command::Serve(a) => serve(a, cli.seed),
        Command::Score { log, grid, snap, all_records } => {
            let spec = GridSpec::load(input("grid", &grid)?).context("--grid")?;
            let mut answers = read_answer_log(input("log", &log)?).context("--log")?;
            if !all_records {
                answers = effective_answers(&answers);
            }
            let report = score_answers(&spec.geometry, &answers, ScoreOptions { snap })?;
            emit(json_mode, serde_json::to_value(&report)?, || report.to_string())
        }
        Command::Baseline { grid, scheme, draws } => {
            let spec = GridSpec::load(input("grid", &grid)?).context("--grid")?;
            let r = random_baseline(&spec.geometry, scheme.into(), draws, cli.seed).context("--draws")?;
            emit(json_mode, serde_json::to_value(r)?, || {
                let how = match r.method {
                    BaselineMethod::ExactEnumeration { pairs } => format!("exact, {pairs} pairs"),
                    BaselineMethod::MonteCarlo { draws, ci95, .. } => format!("Monte-Carlo, {draws} draws, ± {ci95:.6}"),
                };
                format!("{:?}: expected distance {:.6} grid units ({how})\n", r.scheme, r.expected)
            })
        }
        Command::SlopeTest { input: path, statistic } => {
            let mut reader = csv::Reader::from_path(input("input", &path)?).context("--input")?;
            let mut series = Vec::new();
            for (i, row) in reader.records().enumerate() {
                let row = row.context("--input")?;
                let field = |k: usize| -> Result<f64> {
                    row.get(k)
                        .and_then(|v| v.trim().parse().ok())
                        .with_context(|| format!("--input: row {} needs numeric index,value", i + 2))
                };
                series.push((field(0)?, field(1)?));
            }
            let stat = match statistic {
                StatisticArg::MedianByIndex => SlopeStatistic::MedianByIndex,
                StatisticArg::MeanByIndex => SlopeStatistic::MeanByIndex,
            };
            let t = slope_test(&series, stat)?;
            emit(json_mode, serde_json::to_value(t)?, || {
                format!(
                    "slope {:+.6} (se {:.6})  intercept {:.6}  p = {:.6}  over {} indices\n",
                    t.slope, t.std_error, t.intercept, t.p_value, t.n
                )
            })
        }
    }
}

fn serve(a: ServeArgs, seed: u64) -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let mut config = ServiceConfig::new(
        SocketAddr::new(a.host, a.port),
        input("manifest", &a.manifest)?,
        &a.log,
        a.admin_key,
    );
    config.seed = seed;
    config.tasks_per_session = a.tasks;
    config.static_dir = a.static_dir;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let server = Server::bind(&config).await?;
        // first stdout line: scripts read the bound port from it
        println!("listening on http://{}", server.local_addr());
        server
            .run(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
