//! End-to-end orchestration: ingest → detect → co-movement → network →
//! centrality → bow-tie → layout, once per configured period, persisting every
//! intermediate artifact so any stage can be re-run or audited in isolation.
//!
//! The expensive stages (detection, permutation filtering) are cached by a
//! content hash of their inputs plus the owning config section; a resumed run
//! reloads matching artifacts instead of recomputing them.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bowtie::{self, BowtieAssignment, BowtieDiagnostics, BowtieThresholds, Region};
use crate::centrality::{self, CentralityOptions, CentralityProfile};
use crate::comovement::{self, ComovementOutput, DependencyMatrix, FilterMeta, LaggedJointMatrix};
use crate::config::RunConfig;
use crate::drawup::{self, DrawupVector, Episode, PanelDrawups};
use crate::error::{Error, Result};
use crate::graph::{self, ConnectivityReport, DependencyNetwork};
use crate::ingest::{self, PricePanel};
use crate::layout::{self, LayoutOptions, NodeGlyph, SvgStyle};

/// Region membership counts for one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionCounts {
    pub r#in: usize,
    pub scc: usize,
    pub out: usize,
    pub disconnected: usize,
}

/// The per-period statistics block of the run summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodSummary {
    pub period: String,
    pub start: chrono::NaiveDate,
    pub end: chrono::NaiveDate,
    pub n_entities: usize,
    pub n_days: usize,
    /// Entities that passed the minimum-observation rule.
    pub n_active: usize,
    pub skipped_entities: Vec<String>,
    pub total_events: usize,
    /// Off-diagonal W entries > 0 over active ordered pairs.
    pub significant_pair_fraction: f64,
    /// Surviving (pair, lag) cells over 4·n·(n−1) — the per-test rate.
    pub significant_cell_fraction: f64,
    /// Active entities with W_ii > 0.
    pub trend_reinforcement_fraction: f64,
    pub n_edges: usize,
    pub lscc_size: usize,
    pub n_disconnected: usize,
    pub n_peripheral: usize,
    pub density: f64,
    pub mean_out_degree: f64,
    pub stddev_out_degree: f64,
    pub mean_path_length: Option<f64>,
    pub condensation_acyclic: bool,
    pub regions: RegionCounts,
    pub middle_strongly_connected: bool,
    pub filter: FilterMeta,
}

/// Top-level summary written to `<out_dir>/summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub input: PathBuf,
    pub seed: u64,
    pub periods: Vec<PeriodSummary>,
}

/// Everything one period run produced, in memory.
pub struct PeriodArtifacts {
    pub panel: PricePanel,
    pub drawups: PanelDrawups,
    pub comovement: ComovementOutput,
    pub analysis: AnalysisStage,
    pub glyphs: Vec<NodeGlyph>,
    pub summary: PeriodSummary,
}

/// Network, centrality and bow-tie results derived from one dependency
/// matrix — the shared back half of the pipeline.
pub struct AnalysisStage {
    pub network: DependencyNetwork,
    pub report: ConnectivityReport,
    pub condensation_acyclic: bool,
    /// Centrality profiles of the LSCC nodes (empty if the LSCC has < 2 nodes).
    pub profiles: Vec<CentralityProfile>,
    /// Region per node, aligned with `network.nodes`.
    pub regions: Vec<Region>,
    pub assignment: BowtieAssignment,
    pub diagnostics: BowtieDiagnostics,
}

/// Run network analysis, LSCC centralities and the bow-tie classification on
/// a filtered dependency matrix.
pub fn analyze_dependency(
    dep: &DependencyMatrix,
    cent_opts: &CentralityOptions,
    thresholds: BowtieThresholds,
) -> Result<AnalysisStage> {
    let network = graph::build_network(dep);
    let report = graph::connectivity_report(&network);
    let sccs = graph::strongly_connected_components(&network);
    let condensation_acyclic = graph::is_acyclic(&graph::condensation(&network, &sccs));

    let lscc: Vec<usize> = sccs.first().cloned().unwrap_or_default();
    let profiles = if lscc.len() >= 2 {
        let sub = DependencyMatrix {
            entities: lscc.iter().map(|&i| network.nodes[i].clone()).collect(),
            w: DMatrix::from_fn(lscc.len(), lscc.len(), |a, b| dep.w[(lscc[a], lscc[b])]),
            period_label: dep.period_label.clone(),
            filter_meta: dep.filter_meta.clone(),
        };
        centrality::centrality_profiles(&sub, cent_opts).map_err(|e| e.in_stage("centrality"))?
    } else {
        Vec::new()
    };

    // ratio vector over all nodes; NaN (disconnected sentinel) outside the LSCC
    let mut r_all = vec![f64::NAN; network.n_nodes()];
    for (slot, &i) in lscc.iter().enumerate() {
        if let Some(p) = profiles.get(slot) {
            debug_assert_eq!(p.entity_id, network.nodes[i]);
            r_all[i] = p.r;
        }
    }
    let regions =
        bowtie::classify_regions(&r_all, &thresholds).map_err(|e| e.in_stage("bowtie"))?;
    let assignment =
        bowtie::filter_links(&network, &regions, thresholds).map_err(|e| e.in_stage("bowtie"))?;
    let diagnostics =
        bowtie::validate_bowtie(&network, &assignment).map_err(|e| e.in_stage("bowtie"))?;
    Ok(AnalysisStage {
        network,
        report,
        condensation_acyclic,
        profiles,
        regions,
        assignment,
        diagnostics,
    })
}

// ---------------------------------------------------------------------------
// artifact (de)serialization helpers
// ---------------------------------------------------------------------------

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::ShapeMismatch("matrix rows are ragged".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

#[derive(Serialize, Deserialize)]
struct JointFile {
    lags: Vec<usize>,
    t: usize,
    marginals: Vec<f64>,
    d: Vec<Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct PerLagFile {
    lags: Vec<usize>,
    matrices: Vec<Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct EpisodesFile {
    skipped: Vec<String>,
    entities: Vec<EntityEpisodes>,
}

#[derive(Serialize, Deserialize)]
struct EntityEpisodes {
    entity: String,
    episodes: Vec<Episode>,
}

#[derive(Serialize, Deserialize)]
struct EdgeListFile {
    period: String,
    filter: FilterMeta,
    entities: Vec<String>,
    edges: Vec<NamedEdge>,
    self_loops: Vec<NamedLoop>,
}

#[derive(Serialize, Deserialize)]
struct NamedEdge {
    source: String,
    target: String,
    weight: f64,
}

#[derive(Serialize, Deserialize)]
struct NamedLoop {
    entity: String,
    weight: f64,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}

/// Dense headered CSV of W (`entity` column then one column per entity).
pub fn write_dependency_csv(path: &Path, dep: &DependencyMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    let mut header = vec!["entity".to_string()];
    header.extend(dep.entities.iter().cloned());
    w.write_record(&header).map_err(csv_error)?;
    for i in 0..dep.n() {
        let mut row = vec![dep.entities[i].clone()];
        row.extend((0..dep.n()).map(|j| format!("{}", dep.w[(i, j)])));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Parse the dense W CSV back (inverse of [`write_dependency_csv`]).
pub fn read_dependency_csv(path: &Path, period_label: &str, meta: FilterMeta) -> Result<DependencyMatrix> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_error)?;
    let header = reader.headers().map_err(csv_error)?.clone();
    let entities: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let n = entities.len();
    let mut w = DMatrix::zeros(n, n);
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        if record.len() != n + 1 {
            return Err(Error::ShapeMismatch(format!(
                "dependency CSV row {} has {} fields, want {}",
                i + 2,
                record.len(),
                n + 1
            )));
        }
        for j in 0..n {
            w[(i, j)] = record[j + 1].parse().map_err(|_| Error::MalformedRow {
                line: i as u64 + 2,
                reason: format!("bad weight `{}`", &record[j + 1]),
            })?;
        }
    }
    Ok(DependencyMatrix {
        entities,
        w,
        period_label: period_label.to_string(),
        filter_meta: meta,
    })
}

fn csv_error(e: csv::Error) -> Error {
    Error::MalformedRow {
        line: 0,
        reason: e.to_string(),
    }
}

/// Event vectors as `entity,date,event` rows covering every panel day.
pub fn write_events_csv(path: &Path, panel: &PricePanel, drawups: &PanelDrawups) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(["entity", "date", "event"]).map_err(csv_error)?;
    for v in &drawups.vectors {
        for (t, &event) in v.events.iter().enumerate() {
            w.write_record([
                v.entity_id.as_str(),
                &panel.calendar[t].to_string(),
                if event { "1" } else { "0" },
            ])
            .map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_events_csv(path: &Path, panel: &PricePanel) -> Result<Vec<DrawupVector>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_error)?;
    let day_index: BTreeMap<String, usize> = panel
        .calendar
        .iter()
        .enumerate()
        .map(|(t, d)| (d.to_string(), t))
        .collect();
    let mut events: BTreeMap<String, Vec<bool>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let entity = record[0].to_string();
        let t = *day_index.get(&record[1]).ok_or_else(|| Error::MalformedRow {
            line: 0,
            reason: format!("unknown date `{}` in events CSV", &record[1]),
        })?;
        let flag = &record[2] == "1";
        events
            .entry(entity)
            .or_insert_with(|| vec![false; panel.n_days()])[t] = flag;
    }
    panel
        .entities
        .iter()
        .map(|entity| {
            let ev = events.remove(entity).ok_or_else(|| Error::MalformedRow {
                line: 0,
                reason: format!("events CSV is missing entity `{entity}`"),
            })?;
            Ok(DrawupVector {
                entity_id: entity.clone(),
                events: ev,
                episodes: Vec::new(),
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// stage cache
// ---------------------------------------------------------------------------

#[derive(Default, Serialize, Deserialize)]
struct StageHashes(BTreeMap<String, String>);

fn content_hash(parts: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update((p.len() as u64).to_le_bytes());
        hasher.update(p);
    }
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn load_hashes(dir: &Path) -> StageHashes {
    fs::read(dir.join("stage_hashes.json"))
        .ok()
        .and_then(|bytes| serde_json::from_slice(&bytes).ok())
        .unwrap_or_default()
}

// ---------------------------------------------------------------------------
// the pipeline
// ---------------------------------------------------------------------------

/// Run every configured period. With `resume`, stages whose input hash matches
/// the previous run are reloaded from disk instead of recomputed.
pub fn run_pipeline(config: &RunConfig, resume: bool) -> Result<RunSummary> {
    config.validate()?;
    fs::create_dir_all(&config.out_dir)?;
    fs::write(
        config.out_dir.join("config.toml"),
        config.to_toml_string()?,
    )?;

    log::info!("ingest: {}", config.input.display());
    let raw = ingest::parse_panel(fs::File::open(&config.input)?)
        .map_err(|e| e.in_stage("ingest"))?;
    let filled = ingest::forward_fill(&raw).map_err(|e| e.in_stage("ingest"))?;
    write_json(&config.out_dir.join("panel.json"), &filled.to_cache_json())?;

    let mut summaries = Vec::new();
    for period in &config.periods {
        let artifacts = run_period(config, &filled, period, resume)?;
        summaries.push(artifacts.summary);
    }
    let summary = RunSummary {
        input: config.input.clone(),
        seed: config.seed,
        periods: summaries,
    };
    write_json(&config.out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Run one period against an already filled panel.
pub fn run_period(
    config: &RunConfig,
    filled: &PricePanel,
    period: &ingest::PeriodSpec,
    resume: bool,
) -> Result<PeriodArtifacts> {
    let dir = config.out_dir.join(&period.label);
    fs::create_dir_all(&dir)?;
    let mut hashes = if resume { load_hashes(&dir) } else { StageHashes::default() };

    let panel =
        ingest::slice_period(filled, period).map_err(|e| e.in_stage("slice"))?;
    let panel_json = serde_json::to_vec(&panel.to_cache_json())?;
    write_json(&dir.join("panel.json"), &panel.to_cache_json())?;

    // --- detect ---------------------------------------------------------
    let epsilon_key = serde_json::to_vec(&config.epsilon)?;
    let detect_hash = content_hash(&[&panel_json, &epsilon_key]);
    let events_path = dir.join("drawups.csv");
    let episodes_path = dir.join("episodes.json");
    let drawups = if resume
        && hashes.0.get("detect") == Some(&detect_hash)
        && events_path.exists()
        && episodes_path.exists()
    {
        log::info!("{}: detect stage cached", period.label);
        let vectors = read_events_csv(&events_path, &panel)?;
        let file: EpisodesFile = serde_json::from_slice(&fs::read(&episodes_path)?)?;
        let mut by_entity: BTreeMap<String, Vec<Episode>> = file
            .entities
            .into_iter()
            .map(|e| (e.entity, e.episodes))
            .collect();
        let vectors = vectors
            .into_iter()
            .map(|mut v| {
                v.episodes = by_entity.remove(&v.entity_id).unwrap_or_default();
                v
            })
            .collect();
        PanelDrawups {
            vectors,
            skipped: file.skipped,
        }
    } else {
        log::info!("{}: detecting drawups", period.label);
        let drawups =
            drawup::detect_panel(&panel, &config.epsilon).map_err(|e| e.in_stage("detect"))?;
        write_events_csv(&events_path, &panel, &drawups)?;
        write_json(
            &episodes_path,
            &EpisodesFile {
                skipped: drawups.skipped.clone(),
                entities: drawups
                    .vectors
                    .iter()
                    .map(|v| EntityEpisodes {
                        entity: v.entity_id.clone(),
                        episodes: v.episodes.clone(),
                    })
                    .collect(),
            },
        )?;
        hashes.0.insert("detect".into(), detect_hash.clone());
        drawups
    };

    // --- co-movement ------------------------------------------------------
    let comove_opts = config.comovement_options();
    let comove_key = serde_json::to_vec(&comove_opts)?;
    let events_bytes = fs::read(&events_path)?;
    let comove_hash = content_hash(&[&events_bytes, &comove_key]);
    let co_paths = [
        dir.join("joint_matrices.json"),
        dir.join("wraw.json"),
        dir.join("thresholds.json"),
        dir.join("dependency.csv"),
        dir.join("dependency.json"),
    ];
    let meta = FilterMeta {
        n_perm: comove_opts.n_perm,
        confidence: comove_opts.confidence,
        seed: comove_opts.seed,
    };
    let comovement = if resume
        && hashes.0.get("comovement") == Some(&comove_hash)
        && co_paths.iter().all(|p| p.exists())
    {
        log::info!("{}: co-movement stage cached", period.label);
        load_comovement(&dir, &period.label, meta.clone())?
    } else {
        log::info!(
            "{}: permutation filtering ({} pairs x {} lags x {} permutations)",
            period.label,
            panel.n_entities() * panel.n_entities(),
            comovement::LAGS.len(),
            comove_opts.n_perm
        );
        let out = run_comovement(config, &drawups.vectors, &period.label, &comove_opts)
            .map_err(|e| e.in_stage("comovement"))?;
        write_json(
            &co_paths[0],
            &JointFile {
                lags: out.joint.lags.clone(),
                t: out.joint.t,
                marginals: out.joint.marginals.iter().copied().collect(),
                d: out.joint.d.iter().map(matrix_rows).collect(),
            },
        )?;
        write_json(
            &co_paths[1],
            &PerLagFile {
                lags: out.joint.lags.clone(),
                matrices: out.wraw.iter().map(matrix_rows).collect(),
            },
        )?;
        write_json(
            &co_paths[2],
            &PerLagFile {
                lags: out.joint.lags.clone(),
                matrices: out.thresholds.iter().map(matrix_rows).collect(),
            },
        )?;
        write_dependency_csv(&co_paths[3], &out.dependency)?;
        write_edge_list_json(&co_paths[4], &out.dependency)?;
        hashes.0.insert("comovement".into(), comove_hash.clone());
        out
    };
    write_json(&dir.join("stage_hashes.json"), &hashes)?;

    // --- network, centrality, bow-tie --------------------------------------
    let cent_opts = config.centrality_options();
    let analysis = analyze_dependency(&comovement.dependency, &cent_opts, config.bowtie_thresholds()?)?;
    for warning in &analysis.diagnostics.warnings {
        log::warn!("{}: {}", period.label, warning);
    }
    write_json(
        &dir.join("network_report.json"),
        &serde_json::json!({
            "report": analysis.report,
            "condensation_acyclic": analysis.condensation_acyclic,
        }),
    )?;
    write_centrality_files(
        &dir.join("centrality.csv"),
        &dir.join("centrality.json"),
        &analysis,
        &cent_opts,
    )?;
    write_bowtie_files(
        &dir.join("bowtie_regions.csv"),
        &dir.join("bowtie_edges.json"),
        &analysis,
    )?;

    // --- layout -------------------------------------------------------------
    let layout_opts = config.layout_options()?;
    let (svg, glyphs) = render_layout(&analysis, &layout_opts, &config.layout.style)?;
    fs::write(dir.join("layout.svg"), &svg)?;
    write_json(&dir.join("layout_coords.json"), &serde_json::json!({ "glyphs": glyphs }))?;

    // --- summary ------------------------------------------------------------
    let summary = period_summary(period, &panel, &drawups, &comovement, &analysis, meta);
    write_json(&dir.join("summary.json"), &summary)?;

    Ok(PeriodArtifacts {
        panel,
        drawups,
        comovement,
        analysis,
        glyphs,
        summary,
    })
}

/// Place glyphs and render the SVG for an analyzed dependency matrix.
pub fn render_layout(
    analysis: &AnalysisStage,
    layout_opts: &LayoutOptions,
    style: &SvgStyle,
) -> Result<(String, Vec<NodeGlyph>)> {
    let glyphs = layout::place_nodes(
        &analysis.assignment,
        &analysis.profiles,
        &analysis.network.nodes,
        layout_opts,
    )
    .map_err(|e| e.in_stage("layout"))?;
    let svg = layout::render_svg(
        &glyphs,
        &analysis.assignment.filtered_edges,
        &analysis.network.nodes,
        style,
    )
    .map_err(|e| e.in_stage("layout"))?;
    Ok((svg, glyphs))
}

fn run_comovement(
    config: &RunConfig,
    vectors: &[DrawupVector],
    label: &str,
    opts: &comovement::ComovementOptions,
) -> Result<ComovementOutput> {
    if config.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
        pool.install(|| comovement::dependency_from_vectors(vectors, label, opts))
    } else {
        comovement::dependency_from_vectors(vectors, label, opts)
    }
}

/// Edge-list JSON of a dependency matrix (entity-named edges, self-loops and
/// filter metadata embedded for reproducibility).
pub fn write_edge_list_json(path: &Path, dep: &DependencyMatrix) -> Result<()> {
    let n = dep.n();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && dep.w[(i, j)] > 0.0 {
                edges.push(NamedEdge {
                    source: dep.entities[i].clone(),
                    target: dep.entities[j].clone(),
                    weight: dep.w[(i, j)],
                });
            }
        }
    }
    let self_loops = (0..n)
        .filter(|&i| dep.w[(i, i)] > 0.0)
        .map(|i| NamedLoop {
            entity: dep.entities[i].clone(),
            weight: dep.w[(i, i)],
        })
        .collect();
    write_json(
        path,
        &EdgeListFile {
            period: dep.period_label.clone(),
            filter: dep.filter_meta.clone(),
            entities: dep.entities.clone(),
            edges,
            self_loops,
        },
    )
}

fn load_comovement(dir: &Path, label: &str, meta: FilterMeta) -> Result<ComovementOutput> {
    let joint_file: JointFile = serde_json::from_slice(&fs::read(dir.join("joint_matrices.json"))?)?;
    let wraw_file: PerLagFile = serde_json::from_slice(&fs::read(dir.join("wraw.json"))?)?;
    let thr_file: PerLagFile = serde_json::from_slice(&fs::read(dir.join("thresholds.json"))?)?;
    let dependency = read_dependency_csv(&dir.join("dependency.csv"), label, meta)?;
    let joint = LaggedJointMatrix {
        lags: joint_file.lags,
        d: joint_file
            .d
            .iter()
            .map(|rows| matrix_from_rows(rows))
            .collect::<Result<_>>()?,
        marginals: nalgebra::DVector::from_vec(joint_file.marginals),
        t: joint_file.t,
    };
    Ok(ComovementOutput {
        joint,
        wraw: wraw_file
            .matrices
            .iter()
            .map(|rows| matrix_from_rows(rows))
            .collect::<Result<_>>()?,
        thresholds: thr_file
            .matrices
            .iter()
            .map(|rows| matrix_from_rows(rows))
            .collect::<Result<_>>()?,
        dependency,
    })
}

/// `entity,b,c,r,region` CSV plus the JSON twin (non-finite ratios become
/// null in the JSON; non-LSCC entities have empty b/c/r).
pub fn write_centrality_files(
    csv_path: &Path,
    json_path: &Path,
    analysis: &AnalysisStage,
    opts: &CentralityOptions,
) -> Result<()> {
    let by_id: BTreeMap<&str, &CentralityProfile> = analysis
        .profiles
        .iter()
        .map(|p| (p.entity_id.as_str(), p))
        .collect();
    let mut w = csv::Writer::from_path(csv_path).map_err(csv_error)?;
    w.write_record(["entity", "b", "c", "r", "region"]).map_err(csv_error)?;
    for (i, entity) in analysis.network.nodes.iter().enumerate() {
        let (b, c, r) = by_id
            .get(entity.as_str())
            .map_or((String::new(), String::new(), String::new()), |p| {
                (format!("{}", p.b), format!("{}", p.c), format!("{}", p.r))
            });
        w.write_record([entity.as_str(), &b, &c, &r, analysis.regions[i].as_str()])
            .map_err(csv_error)?;
    }
    w.flush()?;

    let rows: Vec<serde_json::Value> = analysis
        .network
        .nodes
        .iter()
        .enumerate()
        .map(|(i, entity)| {
            let p = by_id.get(entity.as_str());
            serde_json::json!({
                "entity": entity,
                "b": p.map(|p| p.b),
                "c": p.map(|p| p.c),
                "r": p.and_then(|p| p.r.is_finite().then_some(p.r)),
                "region": analysis.regions[i],
            })
        })
        .collect();
    write_json(
        json_path,
        &serde_json::json!({
            "beta": opts.beta,
            "normalization": opts.normalization,
            "profiles": rows,
        }),
    )
}

/// Region CSV plus the filtered edge list JSON with diagnostics.
pub fn write_bowtie_files(
    regions_path: &Path,
    edges_path: &Path,
    analysis: &AnalysisStage,
) -> Result<()> {
    let mut w = csv::Writer::from_path(regions_path).map_err(csv_error)?;
    w.write_record(["entity", "region"]).map_err(csv_error)?;
    for (i, entity) in analysis.network.nodes.iter().enumerate() {
        w.write_record([entity.as_str(), analysis.regions[i].as_str()])
            .map_err(csv_error)?;
    }
    w.flush()?;

    let edges: Vec<NamedEdge> = analysis
        .assignment
        .filtered_edges
        .iter()
        .map(|e| NamedEdge {
            source: analysis.network.nodes[e.source].clone(),
            target: analysis.network.nodes[e.target].clone(),
            weight: e.weight,
        })
        .collect();
    write_json(
        edges_path,
        &serde_json::json!({
            "thresholds": analysis.assignment.thresholds,
            "edges": edges,
            "diagnostics": analysis.diagnostics,
        }),
    )
}

fn period_summary(
    period: &ingest::PeriodSpec,
    panel: &PricePanel,
    drawups: &PanelDrawups,
    comovement: &ComovementOutput,
    analysis: &AnalysisStage,
    filter: FilterMeta,
) -> PeriodSummary {
    let (network, report, regions) = (&analysis.network, &analysis.report, &analysis.regions);
    let n = network.n_nodes();
    let skipped = &drawups.skipped;
    let active: Vec<usize> = (0..n)
        .filter(|&i| !skipped.contains(&network.nodes[i]))
        .collect();
    let n_active = active.len();
    let w = &comovement.dependency.w;
    let significant_pairs = active
        .iter()
        .flat_map(|&i| active.iter().map(move |&j| (i, j)))
        .filter(|&(i, j)| i != j && w[(i, j)] > 0.0)
        .count();
    let significant_pair_fraction = if n_active >= 2 {
        significant_pairs as f64 / (n_active * (n_active - 1)) as f64
    } else {
        0.0
    };
    let trend_nodes = active.iter().filter(|&&i| w[(i, i)] > 0.0).count();
    let trend_reinforcement_fraction = if n_active > 0 {
        trend_nodes as f64 / n_active as f64
    } else {
        0.0
    };
    PeriodSummary {
        period: period.label.clone(),
        start: period.start,
        end: period.end,
        n_entities: panel.n_entities(),
        n_days: panel.n_days(),
        n_active,
        skipped_entities: skipped.clone(),
        total_events: drawups.vectors.iter().map(|v| v.event_count()).sum(),
        significant_pair_fraction,
        significant_cell_fraction: comovement.significant_cell_fraction(),
        trend_reinforcement_fraction,
        n_edges: network.edges.len(),
        lscc_size: report.lscc_size,
        n_disconnected: report.n_disconnected,
        n_peripheral: report.n_peripheral,
        density: report.density,
        mean_out_degree: report.mean_out_degree,
        stddev_out_degree: report.stddev_out_degree,
        mean_path_length: report.mean_path_length,
        condensation_acyclic: analysis.condensation_acyclic,
        regions: RegionCounts {
            r#in: regions.iter().filter(|&&r| r == Region::In).count(),
            scc: regions.iter().filter(|&&r| r == Region::Scc).count(),
            out: regions.iter().filter(|&&r| r == Region::Out).count(),
            disconnected: regions.iter().filter(|&&r| r == Region::Disconnected).count(),
        },
        middle_strongly_connected: analysis.diagnostics.middle_strongly_connected,
        filter,
    }
}

/// Rebuild event vectors from a standalone `entity,date,event` CSV; the
/// calendar is the sorted set of dates the file mentions.
pub fn read_event_vectors_csv(path: &Path) -> Result<Vec<DrawupVector>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_error)?;
    let mut rows: Vec<(String, String, bool)> = Vec::new();
    let mut dates: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        if record.len() != 3 {
            return Err(Error::MalformedRow {
                line: 0,
                reason: format!("expected 3 fields `entity,date,event`, got {}", record.len()),
            });
        }
        dates.insert(record[1].to_string());
        rows.push((record[0].to_string(), record[1].to_string(), &record[2] == "1"));
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let index: BTreeMap<&str, usize> = dates
        .iter()
        .enumerate()
        .map(|(i, d)| (d.as_str(), i))
        .collect();
    let mut vectors: BTreeMap<String, Vec<bool>> = BTreeMap::new();
    for (entity, date, flag) in &rows {
        vectors
            .entry(entity.clone())
            .or_insert_with(|| vec![false; dates.len()])[index[date.as_str()]] = *flag;
    }
    Ok(vectors
        .into_iter()
        .map(|(entity_id, events)| DrawupVector {
            entity_id,
            events,
            episodes: Vec::new(),
        })
        .collect())
}

// ---------------------------------------------------------------------------
// audit: recompute the summary from the persisted intermediates
// ---------------------------------------------------------------------------

/// Recompute every summary statistic from the persisted intermediates and
/// compare with the written summary, field by field, at exact equality.
pub fn audit_run(out_dir: &Path) -> Result<Vec<String>> {
    let summary: RunSummary =
        serde_json::from_slice(&fs::read(out_dir.join("summary.json"))?)?;
    let mut checked = Vec::new();
    for period in &summary.periods {
        audit_period(&out_dir.join(&period.period), period)?;
        checked.push(period.period.clone());
    }
    Ok(checked)
}

fn audit_period(dir: &Path, written: &PeriodSummary) -> Result<()> {
    let mismatch = |field: &str, got: String, want: String| {
        Err(Error::InvalidParameter(format!(
            "audit mismatch in `{}` {field}: recomputed {got}, summary has {want}",
            written.period
        )))
    };

    // events and skip list
    let episodes: EpisodesFile = serde_json::from_slice(&fs::read(dir.join("episodes.json"))?)?;
    let panel = PricePanel::from_cache_json(&serde_json::from_slice(&fs::read(
        dir.join("panel.json"),
    )?)?)?;
    let vectors = read_events_csv(&dir.join("drawups.csv"), &panel)?;
    let total_events: usize = vectors.iter().map(|v| v.event_count()).sum();
    if total_events != written.total_events {
        return mismatch(
            "total_events",
            total_events.to_string(),
            written.total_events.to_string(),
        );
    }

    // dependency matrix and derived statistics
    let dep = read_dependency_csv(
        &dir.join("dependency.csv"),
        &written.period,
        written.filter.clone(),
    )?;
    let active: Vec<usize> = (0..dep.n())
        .filter(|&i| !episodes.skipped.contains(&dep.entities[i]))
        .collect();
    let n_active = active.len();
    if n_active != written.n_active {
        return mismatch("n_active", n_active.to_string(), written.n_active.to_string());
    }
    let significant_pairs = active
        .iter()
        .flat_map(|&i| active.iter().map(move |&j| (i, j)))
        .filter(|&(i, j)| i != j && dep.w[(i, j)] > 0.0)
        .count();
    let pair_fraction = if n_active >= 2 {
        significant_pairs as f64 / (n_active * (n_active - 1)) as f64
    } else {
        0.0
    };
    if pair_fraction != written.significant_pair_fraction {
        return mismatch(
            "significant_pair_fraction",
            pair_fraction.to_string(),
            written.significant_pair_fraction.to_string(),
        );
    }
    let trend = active.iter().filter(|&&i| dep.w[(i, i)] > 0.0).count();
    let trend_fraction = if n_active > 0 {
        trend as f64 / n_active as f64
    } else {
        0.0
    };
    if trend_fraction != written.trend_reinforcement_fraction {
        return mismatch(
            "trend_reinforcement_fraction",
            trend_fraction.to_string(),
            written.trend_reinforcement_fraction.to_string(),
        );
    }

    // per-cell survival fraction from the persisted raw/threshold matrices
    let wraw_file: PerLagFile = serde_json::from_slice(&fs::read(dir.join("wraw.json"))?)?;
    let thr_file: PerLagFile = serde_json::from_slice(&fs::read(dir.join("thresholds.json"))?)?;
    let n = dep.n();
    let mut surviving = 0usize;
    for (wm, tm) in wraw_file.matrices.iter().zip(&thr_file.matrices) {
        for i in 0..n {
            for j in 0..n {
                if i != j && wm[i][j] > tm[i][j] {
                    surviving += 1;
                }
            }
        }
    }
    let cell_fraction = if n >= 2 {
        surviving as f64 / (wraw_file.matrices.len() * n * (n - 1)) as f64
    } else {
        0.0
    };
    if cell_fraction != written.significant_cell_fraction {
        return mismatch(
            "significant_cell_fraction",
            cell_fraction.to_string(),
            written.significant_cell_fraction.to_string(),
        );
    }

    // graph statistics from the dependency matrix
    let network = graph::build_network(&dep);
    let report = graph::connectivity_report(&network);
    if network.edges.len() != written.n_edges {
        return mismatch("n_edges", network.edges.len().to_string(), written.n_edges.to_string());
    }
    if report.lscc_size != written.lscc_size
        || report.n_disconnected != written.n_disconnected
        || report.n_peripheral != written.n_peripheral
    {
        return mismatch(
            "lscc/disconnected/peripheral",
            format!(
                "{}/{}/{}",
                report.lscc_size, report.n_disconnected, report.n_peripheral
            ),
            format!(
                "{}/{}/{}",
                written.lscc_size, written.n_disconnected, written.n_peripheral
            ),
        );
    }
    if report.density != written.density
        || report.mean_out_degree != written.mean_out_degree
        || report.stddev_out_degree != written.stddev_out_degree
        || report.mean_path_length != written.mean_path_length
    {
        return mismatch(
            "connectivity",
            format!(
                "{}/{}/{}/{:?}",
                report.density,
                report.mean_out_degree,
                report.stddev_out_degree,
                report.mean_path_length
            ),
            format!(
                "{}/{}/{}/{:?}",
                written.density,
                written.mean_out_degree,
                written.stddev_out_degree,
                written.mean_path_length
            ),
        );
    }

    // region counts from the bow-tie CSV
    let mut reader = csv::Reader::from_path(dir.join("bowtie_regions.csv")).map_err(csv_error)?;
    let mut counts = RegionCounts { r#in: 0, scc: 0, out: 0, disconnected: 0 };
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        match &record[1] {
            "IN" => counts.r#in += 1,
            "SCC" => counts.scc += 1,
            "OUT" => counts.out += 1,
            "DISCONNECTED" => counts.disconnected += 1,
            other => {
                return Err(Error::MalformedRow {
                    line: 0,
                    reason: format!("unknown region `{other}`"),
                })
            }
        }
    }
    if counts != written.regions {
        return mismatch(
            "regions",
            serde_json::to_string(&counts)?,
            serde_json::to_string(&written.regions)?,
        );
    }
    Ok(())
}
