use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use drawup_net::bowtie::{self, BowtieThresholds};
use drawup_net::centrality;
use drawup_net::comovement::{self, FilterMeta};
use drawup_net::config::RunConfig;
use drawup_net::drawup::{self, EpsilonPolicy, VariationKind};
use drawup_net::graph;
use drawup_net::ingest::{self, PeriodSpec};
use drawup_net::pipeline;
use drawup_net::synth::{self, SynthSpec};

/// Dependency-network analysis of price drawups.
#[derive(Parser)]
#[command(name = "drawup-net", version, about)]
struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic panel with planted lagged dependencies.
    Synth(SynthArgs),
    /// Parse, forward-fill and optionally slice a price CSV into a panel cache.
    Ingest(IngestArgs),
    /// Detect drawup events for every entity of a panel.
    Detect(DetectArgs),
    /// Build the permutation-filtered dependency matrix and its network stats.
    Network(NetworkArgs),
    /// Feedback centralities (impacting, impacted, ratio) on the LSCC.
    Centrality(CentralityArgs),
    /// Bow-tie classification and link filtering.
    Bowtie(BowtieArgs),
    /// Render the circular bow-tie figure as SVG.
    Render(RenderArgs),
    /// Run the full pipeline per configured period.
    Run(RunArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Write the panel CSV here.
    #[arg(long, default_value = "panel.csv")]
    out: PathBuf,
    /// Write the ground truth JSON here.
    #[arg(long, default_value = "truth.json")]
    truth: PathBuf,
    /// Full SynthSpec as JSON (overrides the individual flags).
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    entities: usize,
    #[arg(long, default_value_t = 3000)]
    days: usize,
    /// Coupling probability along planted edges.
    #[arg(long, default_value_t = 0.3)]
    alpha: f64,
    /// Base jump probability per day.
    #[arg(long, default_value_t = 0.0067)]
    p0: f64,
    /// Baseline random-walk sigma in bp.
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
    /// Probability a jump triggers a same-entity follow-up.
    #[arg(long, default_value_t = 0.0)]
    self_excitation: f64,
    /// Volatility regimes as start:end:multiplier, comma separated.
    #[arg(long)]
    regimes: Option<String>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct IngestArgs {
    /// Long-format price CSV (date,entity,price).
    #[arg(long)]
    input: PathBuf,
    /// Panel cache JSON output.
    #[arg(long, default_value = "panel.json")]
    out: PathBuf,
    /// Optional slice start (inclusive, ISO date).
    #[arg(long)]
    start: Option<String>,
    /// Optional slice end (exclusive, ISO date).
    #[arg(long)]
    end: Option<String>,
}

#[derive(Args)]
struct DetectArgs {
    /// Panel cache JSON from `ingest` (or a raw CSV via --input).
    #[arg(long, conflicts_with = "input")]
    panel: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value = "events.csv")]
    out_events: PathBuf,
    #[arg(long, default_value = "episodes.json")]
    out_episodes: PathBuf,
    #[arg(long)]
    window: Option<usize>,
    /// stddev | range
    #[arg(long)]
    variation: Option<String>,
    #[arg(long)]
    event_day_offset: Option<i64>,
}

#[derive(Args)]
struct NetworkArgs {
    /// Events CSV from `detect`.
    #[arg(long)]
    events: PathBuf,
    #[arg(long, default_value = "dependency.csv")]
    out_w: PathBuf,
    #[arg(long, default_value = "dependency.json")]
    out_edges: PathBuf,
    /// Also write the connectivity report JSON here.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    n_perm: Option<usize>,
    #[arg(long)]
    confidence: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    conditional: bool,
    #[arg(long, default_value = "adhoc")]
    period_label: String,
}

#[derive(Args)]
struct CentralityArgs {
    /// Dense dependency CSV from `network`.
    #[arg(long)]
    w: PathBuf,
    #[arg(long, default_value = "centrality.csv")]
    out_csv: PathBuf,
    #[arg(long, default_value = "centrality.json")]
    out_json: PathBuf,
    #[arg(long)]
    beta: Option<f64>,
    /// column | row
    #[arg(long)]
    normalization: Option<String>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Args)]
struct BowtieArgs {
    #[arg(long)]
    w: PathBuf,
    #[arg(long, default_value = "bowtie_regions.csv")]
    out_regions: PathBuf,
    #[arg(long, default_value = "bowtie_edges.json")]
    out_edges: PathBuf,
    #[arg(long)]
    delta: Option<f64>,
    /// reciprocal | additive
    #[arg(long)]
    mode: Option<String>,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    w: PathBuf,
    #[arg(long, default_value = "layout.svg")]
    out: PathBuf,
    /// Coordinates JSON output.
    #[arg(long)]
    coords: Option<PathBuf>,
    /// entity,attribute_value CSV for glyph sizing.
    #[arg(long)]
    size_attr: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run only the named period (repeatable).
    #[arg(long)]
    period: Vec<String>,
    /// Reuse cached stages whose input hashes match.
    #[arg(long)]
    resume: bool,
    /// After the run, recompute the summary from the persisted
    /// intermediates and fail on any mismatch.
    #[arg(long)]
    audit: bool,
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)
            .with_context(|| format!("loading config {}", path.display()))?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Ingest(args) => cmd_ingest(args),
        Command::Detect(args) => cmd_detect(args, config),
        Command::Network(args) => cmd_network(args, config),
        Command::Centrality(args) => cmd_centrality(args, config),
        Command::Bowtie(args) => cmd_bowtie(args, config),
        Command::Render(args) => cmd_render(args, config),
        Command::Run(args) => cmd_run(args, config),
    }
}

fn parse_regimes(text: &str) -> anyhow::Result<Vec<synth::Regime>> {
    text.split(',')
        .filter(|part| !part.trim().is_empty())
        .map(|part| {
            let fields: Vec<&str> = part.trim().split(':').collect();
            anyhow::ensure!(fields.len() == 3, "regime `{part}` is not start:end:multiplier");
            Ok(synth::Regime {
                start: fields[0].parse()?,
                end: fields[1].parse()?,
                multiplier: fields[2].parse()?,
            })
        })
        .collect()
}

fn cmd_synth(args: SynthArgs) -> anyhow::Result<()> {
    let spec = match &args.spec {
        Some(path) => serde_json::from_slice(&std::fs::read(path)?)
            .with_context(|| format!("parsing synth spec {}", path.display()))?,
        None => SynthSpec {
            n_entities: args.entities,
            days: args.days,
            edges: synth::cycle_edges(args.entities, &[1, 2, 3]),
            alpha: args.alpha,
            base_jump_prob: args.p0,
            noise_sigma: args.noise_sigma,
            self_excitation: args.self_excitation,
            regimes: args
                .regimes
                .as_deref()
                .map(parse_regimes)
                .transpose()?
                .unwrap_or_default(),
            rng_seed: args.seed,
            ..SynthSpec::default()
        },
    };
    let (panel, truth) = synth::generate_panel(&spec)?;
    ingest::write_panel_csv(&panel, std::fs::File::create(&args.out)?)?;
    let truth_json = serde_json::json!({
        "n_entities": spec.n_entities,
        "days": spec.days,
        "alpha": truth.alpha,
        "edges": truth.edges,
        "events": truth.events,
    });
    std::fs::write(&args.truth, serde_json::to_string_pretty(&truth_json)? + "\n")?;
    log::info!(
        "wrote {} ({} entities x {} days) and {}",
        args.out.display(),
        spec.n_entities,
        spec.days,
        args.truth.display()
    );
    Ok(())
}

fn load_panel(panel: &Option<PathBuf>, input: &Option<PathBuf>) -> anyhow::Result<ingest::PricePanel> {
    match (panel, input) {
        (Some(path), _) => {
            let value = serde_json::from_slice(&std::fs::read(path)?)?;
            Ok(ingest::PricePanel::from_cache_json(&value)?)
        }
        (None, Some(path)) => {
            let raw = ingest::parse_panel(std::fs::File::open(path)?)?;
            Ok(ingest::forward_fill(&raw)?)
        }
        (None, None) => anyhow::bail!("pass --panel <cache.json> or --input <prices.csv>"),
    }
}

fn cmd_ingest(args: IngestArgs) -> anyhow::Result<()> {
    let raw = ingest::parse_panel(std::fs::File::open(&args.input)?)?;
    let mut panel = ingest::forward_fill(&raw)?;
    if args.start.is_some() || args.end.is_some() {
        let start = args.start.as_deref().unwrap_or("1900-01-01").parse()?;
        let end = args.end.as_deref().unwrap_or("9999-12-31").parse()?;
        let spec = PeriodSpec::new("slice", start, end)?;
        panel = ingest::slice_period(&panel, &spec)?;
    }
    std::fs::write(
        &args.out,
        serde_json::to_string_pretty(&panel.to_cache_json())? + "\n",
    )?;
    log::info!(
        "panel cache: {} entities x {} days -> {}",
        panel.n_entities(),
        panel.n_days(),
        args.out.display()
    );
    Ok(())
}

fn epsilon_policy(args: &DetectArgs, config: &RunConfig) -> anyhow::Result<EpsilonPolicy> {
    let mut policy = config.epsilon.clone();
    if let Some(window) = args.window {
        policy.window = window;
    }
    if let Some(kind) = &args.variation {
        policy.variation_kind = match kind.as_str() {
            "stddev" | "stddev_of_daily_changes" => VariationKind::StddevOfDailyChanges,
            "range" => VariationKind::Range,
            other => anyhow::bail!("unknown variation kind `{other}` (stddev | range)"),
        };
    }
    if let Some(offset) = args.event_day_offset {
        policy.event_day_offset = offset;
    }
    Ok(policy)
}

fn cmd_detect(args: DetectArgs, config: RunConfig) -> anyhow::Result<()> {
    let panel = load_panel(&args.panel, &args.input)?;
    let policy = epsilon_policy(&args, &config)?;
    let drawups = drawup::detect_panel(&panel, &policy)?;
    pipeline::write_events_csv(&args.out_events, &panel, &drawups)?;
    let episodes = serde_json::json!({
        "skipped": drawups.skipped,
        "entities": drawups.vectors.iter().map(|v| serde_json::json!({
            "entity": v.entity_id,
            "episodes": v.episodes,
        })).collect::<Vec<_>>(),
    });
    std::fs::write(&args.out_episodes, serde_json::to_string_pretty(&episodes)? + "\n")?;
    let total: usize = drawups.vectors.iter().map(|v| v.event_count()).sum();
    log::info!(
        "{total} events across {} entities ({} skipped) -> {}",
        panel.n_entities(),
        drawups.skipped.len(),
        args.out_events.display()
    );
    Ok(())
}

fn cmd_network(args: NetworkArgs, config: RunConfig) -> anyhow::Result<()> {
    let vectors = pipeline::read_event_vectors_csv(&args.events)?;
    let mut opts = config.comovement_options();
    if let Some(n) = args.n_perm {
        opts.n_perm = n;
    }
    if let Some(c) = args.confidence {
        opts.confidence = c;
    }
    if let Some(s) = args.seed {
        opts.seed = s;
    }
    opts.conditional |= args.conditional;
    let out = comovement::dependency_from_vectors(&vectors, &args.period_label, &opts)?;
    pipeline::write_dependency_csv(&args.out_w, &out.dependency)?;
    pipeline::write_edge_list_json(&args.out_edges, &out.dependency)?;
    if let Some(report_path) = &args.report {
        let network = graph::build_network(&out.dependency);
        let report = graph::connectivity_report(&network);
        let sccs = graph::strongly_connected_components(&network);
        let acyclic = graph::is_acyclic(&graph::condensation(&network, &sccs));
        let value = serde_json::json!({ "report": report, "condensation_acyclic": acyclic });
        std::fs::write(report_path, serde_json::to_string_pretty(&value)? + "\n")?;
    }
    log::info!(
        "dependency matrix over {} entities -> {}",
        out.dependency.n(),
        args.out_w.display()
    );
    Ok(())
}

fn cmd_centrality(args: CentralityArgs, config: RunConfig) -> anyhow::Result<()> {
    let meta = FilterMeta {
        n_perm: config.comovement.n_perm,
        confidence: config.comovement.confidence,
        seed: config.seed,
    };
    let dep = pipeline::read_dependency_csv(&args.w, "adhoc", meta)?;
    let mut opts = config.centrality_options();
    if let Some(beta) = args.beta {
        opts.beta = beta;
    }
    if let Some(t) = args.tolerance {
        opts.tolerance = t;
    }
    if let Some(mode) = &args.normalization {
        opts.normalization = match mode.as_str() {
            "column" => centrality::NormalizationMode::Column,
            "row" => centrality::NormalizationMode::Row,
            other => anyhow::bail!("unknown normalization `{other}` (column | row)"),
        };
    }
    let delta = args.delta.unwrap_or(config.bowtie.delta);
    let thresholds = BowtieThresholds::from_delta(delta, config.bowtie.mode)?;
    let analysis = pipeline::analyze_dependency(&dep, &opts, thresholds)?;
    pipeline::write_centrality_files(&args.out_csv, &args.out_json, &analysis, &opts)?;
    log::info!("centrality profiles -> {}", args.out_csv.display());
    Ok(())
}

fn cmd_bowtie(args: BowtieArgs, config: RunConfig) -> anyhow::Result<()> {
    let meta = FilterMeta {
        n_perm: config.comovement.n_perm,
        confidence: config.comovement.confidence,
        seed: config.seed,
    };
    let dep = pipeline::read_dependency_csv(&args.w, "adhoc", meta)?;
    let mode = match args.mode.as_deref() {
        None => config.bowtie.mode,
        Some("reciprocal") => bowtie::ThresholdMode::Reciprocal,
        Some("additive") => bowtie::ThresholdMode::Additive,
        Some(other) => anyhow::bail!("unknown threshold mode `{other}`"),
    };
    let thresholds = BowtieThresholds::from_delta(args.delta.unwrap_or(config.bowtie.delta), mode)?;
    let analysis = pipeline::analyze_dependency(&dep, &config.centrality_options(), thresholds)?;
    for warning in &analysis.diagnostics.warnings {
        log::warn!("{warning}");
    }
    pipeline::write_bowtie_files(&args.out_regions, &args.out_edges, &analysis)?;
    log::info!("bow-tie regions -> {}", args.out_regions.display());
    Ok(())
}

fn cmd_render(args: RenderArgs, config: RunConfig) -> anyhow::Result<()> {
    let meta = FilterMeta {
        n_perm: config.comovement.n_perm,
        confidence: config.comovement.confidence,
        seed: config.seed,
    };
    let dep = pipeline::read_dependency_csv(&args.w, "adhoc", meta)?;
    let mut layout_opts = config.layout_options()?;
    if let Some(path) = &args.size_attr {
        let attrs = ingest::parse_node_attributes(std::fs::File::open(path)?)?;
        layout_opts.size_attribute = Some(attrs.into_iter().collect());
    }
    let analysis = pipeline::analyze_dependency(
        &dep,
        &config.centrality_options(),
        BowtieThresholds::from_delta(config.bowtie.delta, config.bowtie.mode)?,
    )?;
    let (svg, glyphs) = pipeline::render_layout(&analysis, &layout_opts, &config.layout.style)?;
    std::fs::write(&args.out, svg)?;
    if let Some(coords) = &args.coords {
        std::fs::write(
            coords,
            serde_json::to_string_pretty(&serde_json::json!({ "glyphs": glyphs }))? + "\n",
        )?;
    }
    log::info!("figure -> {}", args.out.display());
    Ok(())
}

fn cmd_run(args: RunArgs, mut config: RunConfig) -> anyhow::Result<()> {
    if let Some(input) = args.input {
        config.input = input;
    }
    if let Some(out_dir) = args.out_dir {
        config.out_dir = out_dir;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if !args.period.is_empty() {
        config.periods.retain(|p| args.period.contains(&p.label));
        anyhow::ensure!(
            !config.periods.is_empty(),
            "no configured period matches {:?}",
            args.period
        );
    }
    let summary = pipeline::run_pipeline(&config, args.resume)?;
    if args.audit {
        let checked = pipeline::audit_run(&config.out_dir)?;
        log::info!("audit passed for periods {:?}", checked);
    }
    for p in &summary.periods {
        log::info!(
            "{}: {} events, {:.1}% significant pairs, LSCC {} of {}, density {:.3}",
            p.period,
            p.total_events,
            100.0 * p.significant_pair_fraction,
            p.lscc_size,
            p.n_entities,
            p.density
        );
    }
    log::info!("summary -> {}", config.out_dir.join("summary.json").display());
    Ok(())
}
