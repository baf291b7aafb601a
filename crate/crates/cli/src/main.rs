use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use spatial_diar::beamformer::{
    design_cddma, design_cdma, design_delay_and_sum, performance_curves, Beamformer,
    ConstraintSpec,
};
use spatial_diar::clustering::{fit_doa_identity, DoaIdentityModel};
use spatial_diar::geometry::{ElementPattern, FrequencyGrid, GeometryConfig};
use spatial_diar::metrics::{der, read_rttm, segmentation_accuracy, write_rttm};
use spatial_diar::pipeline::{check_audio, EmbeddingConfig, Pipeline, PipelineConfig, PipelineOutput, VadConfig};
use spatial_diar::scenesim::{synthesize, GroundTruth, SceneConfig};
use spatial_diar::wav::{read_wav, write_wav, Audio};

#[derive(Parser)]
#[command(name = "spatial-diar", version, about = "Microphone-array speaker diarization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design a beam bank and write its weights.
    Design(DesignArgs),
    /// Write WNG and DI curves for delay-and-sum, CDMA and CDDMA designs.
    Analyze(AnalyzeArgs),
    /// Render a scene to multichannel WAV with ground truth.
    Simulate(SimulateArgs),
    /// Per-frame DOA estimates.
    Localize(LocalizeArgs),
    /// Speaker-homogeneous segments and change events.
    Segment(SegmentArgs),
    /// Per-frame source count.
    Overlap(RunArgs),
    /// Full pipeline to RTTM.
    Diarize(DiarizeArgs),
    /// DER of a hypothesis RTTM against a reference.
    Score(ScoreArgs),
    /// Fit the DOA identity model from labeled angle pairs.
    FitDoa(FitDoaArgs),
}

#[derive(Args)]
struct DesignArgs {
    /// Array geometry JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Weights file; a JSON header is written next to it.
    #[arg(long, visible_alias = "out")]
    output: PathBuf,
    #[arg(long, default_value_t = 36)]
    beams: usize,
    #[arg(long, value_enum, default_value_t = Kind::Cddma)]
    kind: Kind,
    #[arg(long, default_value_t = 512)]
    fft_size: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Cddma,
    Cdma,
    DelayAndSum,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, visible_alias = "out")]
    output: PathBuf,
    #[arg(long, default_value_t = 512)]
    fft_size: usize,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scene JSON.
    #[arg(long, visible_alias = "scene")]
    config: PathBuf,
    /// WAV path; `<stem>.truth.json` and `<stem>.rttm` go alongside.
    #[arg(long, visible_alias = "out")]
    output: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    /// Multichannel WAV.
    #[arg(long)]
    input: PathBuf,
    /// Pipeline JSON; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, visible_alias = "out")]
    output: PathBuf,
    /// `frame_index,posterior` CSV replacing the energy VAD.
    #[arg(long)]
    vad: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct LocalizeArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Also write the smoothed spectrum, one row per frame.
    #[arg(long)]
    spectrum: Option<PathBuf>,
}

#[derive(Args)]
struct SegmentArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    events: Option<PathBuf>,
}

#[derive(Args)]
struct DiarizeArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Scene ground truth, needed by synthetic embeddings.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Embedding file replacing the configured provider.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    events: Option<PathBuf>,
    #[arg(long, default_value = "meeting")]
    file_id: String,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    hyp: PathBuf,
    #[arg(long, default_value_t = 0.25)]
    collar: f64,
    /// Scene ground truth; adds segmentation accuracy of `--events`.
    #[arg(long, requires = "events")]
    truth: Option<PathBuf>,
    #[arg(long)]
    events: Option<PathBuf>,
}

#[derive(Args)]
struct FitDoaArgs {
    /// CSV of `distance_deg,same` with same in {0, 1}.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, visible_alias = "out")]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Design(a) => design(a),
        Command::Analyze(a) => analyze(a),
        Command::Simulate(a) => simulate(a),
        Command::Localize(a) => localize(a),
        Command::Segment(a) => segment(a),
        Command::Overlap(a) => overlap(a),
        Command::Diarize(a) => diarize(a),
        Command::Score(a) => score(a),
        Command::FitDoa(a) => fit_doa(a),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn geometry_config(path: Option<&Path>) -> Result<GeometryConfig> {
    path.map_or(Ok(GeometryConfig::default()), read_json)
}

fn design_bank(geom: &GeometryConfig, kind: Kind, beams: usize, fft_size: usize) -> Result<Vec<Beamformer<f64>>> {
    let array = geom.build::<f64>()?;
    let grid = FrequencyGrid::new(geom.sample_rate as f64, fft_size)?;
    let spec = ConstraintSpec::super_cardioid();
    let omni = array.with_pattern(ElementPattern::Omni);
    (0..beams)
        .map(|b| {
            let look = std::f64::consts::TAU * b as f64 / beams as f64;
            Ok(match kind {
                Kind::Cddma => design_cddma(&array, &grid, look, &spec)?,
                Kind::Cdma => design_cdma(&array, &grid, look, &spec)?,
                Kind::DelayAndSum => design_delay_and_sum(&omni, &grid, look),
            })
        })
        .collect()
}

fn design(a: DesignArgs) -> Result<()> {
    if a.beams == 0 {
        bail!("--beams must be at least 1");
    }
    let geom = geometry_config(a.config.as_deref())?;
    let bank = design_bank(&geom, a.kind, a.beams, a.fft_size)?;
    let mut w = create(&a.output)?;
    for beam in &bank {
        for row in beam.all_weights() {
            for h in row {
                w.write_all(&(h.re as f32).to_le_bytes())?;
                w.write_all(&(h.im as f32).to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    let header = serde_json::json!({
        "kind": bank[0].kind().name(),
        "layout": "beam-major, then bin, then element; little-endian complex64 (re, im as f32)",
        "beams": bank.len(),
        "bins": bank[0].num_bins(),
        "elements": geom.elements,
        "fft_size": a.fft_size,
        "geometry": geom,
        "look_directions_deg": bank.iter().map(|b| b.look_direction().to_degrees()).collect::<Vec<_>>(),
        "flagged": bank.iter().map(|b| &b.report().flagged).collect::<Vec<_>>(),
    });
    let hpath = a.output.with_extension("json");
    serde_json::to_writer_pretty(create(&hpath)?, &header)?;
    info!("wrote {} beams to {}", bank.len(), a.output.display());
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let geom = geometry_config(a.config.as_deref())?;
    let mut w = create(&a.output)?;
    writeln!(w, "design,freq_hz,wng_db,di_db")?;
    for (name, kind) in [("delay_and_sum", Kind::DelayAndSum), ("cdma", Kind::Cdma), ("cddma", Kind::Cddma)] {
        let beam = &design_bank(&geom, kind, 1, a.fft_size)?[0];
        for p in performance_curves(beam) {
            writeln!(w, "{name},{:.3},{:.6},{:.6}", p.freq_hz, p.wng_db, p.di_db)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map_or_else(|| "scene".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}{suffix}"))
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut cfg: SceneConfig = read_json(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let scene = synthesize(&cfg)?;
    write_wav(&a.output, &scene.audio)?;
    serde_json::to_writer_pretty(create(&sibling(&a.output, ".truth.json"))?, &scene.truth)?;
    let id = a.output.file_stem().map_or_else(|| "scene".into(), |s| s.to_string_lossy().into_owned());
    let mut r = create(&sibling(&a.output, ".rttm"))?;
    write_rttm(&mut r, &id, &scene.truth.reference())?;
    r.flush()?;
    info!(
        "{:.1} s, {} utterances, {} interims",
        scene.audio.duration_s(),
        scene.truth.utterances.len(),
        scene.truth.interims.len()
    );
    Ok(())
}

fn pipeline_config(a: &RunArgs) -> Result<PipelineConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            PipelineConfig::from_json(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(v) = &a.vad {
        cfg.vad = VadConfig::File { path: v.clone() };
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Streams the file through the pipeline in 100 ms chunks.
fn stream(audio: &Audio, mut pipeline: Pipeline) -> Result<PipelineOutput> {
    check_audio(audio, pipeline.config())?;
    let chunk = (audio.sample_rate as usize / 10).max(1);
    let mut out = PipelineOutput::default();
    let mut at = 0;
    while at < audio.len() {
        let end = (at + chunk).min(audio.len());
        let part: Vec<Vec<f64>> = audio.channels.iter().map(|c| c[at..end].to_vec()).collect();
        out.extend(pipeline.push(&part)?);
        at = end;
    }
    out.extend(pipeline.finish()?);
    Ok(out)
}

fn front_end(a: &RunArgs, keep_spectrum: bool) -> Result<PipelineOutput> {
    let mut cfg = pipeline_config(a)?;
    cfg.embeddings = EmbeddingConfig::None;
    cfg.output.keep_spectrum |= keep_spectrum;
    let audio = read_wav(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    stream(&audio, Pipeline::from_config(cfg, None)?)
}

fn opt_deg(v: Option<f64>) -> String {
    v.map_or(String::new(), |r| format!("{:.2}", r.to_degrees()))
}

fn localize(a: LocalizeArgs) -> Result<()> {
    let out = front_end(&a.run, a.spectrum.is_some())?;
    let mut w = create(&a.run.output)?;
    writeln!(w, "frame_index,time_s,theta_deg,confidence,theta_filtered_deg")?;
    for f in &out.frames {
        writeln!(
            w,
            "{},{:.4},{},{:.4},{}",
            f.frame_index,
            f.time_s,
            opt_deg(f.theta_raw),
            f.confidence,
            opt_deg(f.theta_filtered)
        )?;
    }
    w.flush()?;
    if let Some(path) = &a.spectrum {
        let mut s = create(path)?;
        for f in &out.frames {
            let row: Vec<String> = f.spectrum.iter().flatten().map(|p| format!("{p:.6e}")).collect();
            writeln!(s, "{}", row.join(","))?;
        }
        s.flush()?;
    }
    Ok(())
}

fn write_events(path: &Path, out: &PipelineOutput) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "time_s,kind,frame_index,detected_at")?;
    for e in &out.events {
        writeln!(w, "{:.4},{},{},{}", e.timestamp, e.kind.name(), e.frame_index, e.detected_at)?;
    }
    w.flush()?;
    Ok(())
}

fn segment(a: SegmentArgs) -> Result<()> {
    let out = front_end(&a.run, false)?;
    let mut w = create(&a.run.output)?;
    writeln!(w, "start_s,end_s,doa_deg,stream")?;
    for s in &out.segments {
        let stream = if s.secondary { "secondary" } else { "primary" };
        writeln!(w, "{:.4},{:.4},{},{stream}", s.start, s.end, opt_deg(s.doa))?;
    }
    w.flush()?;
    if let Some(p) = &a.events {
        write_events(p, &out)?;
    }
    Ok(())
}

fn overlap(a: RunArgs) -> Result<()> {
    let out = front_end(&a, false)?;
    let mut w = create(&a.output)?;
    writeln!(w, "frame,vad,dip,state,secondary_deg")?;
    for f in &out.frames {
        writeln!(
            w,
            "{},{:.4},{:.5},{},{}",
            f.frame_index,
            f.vad,
            f.dip,
            f.state.name(),
            opt_deg(f.secondary_theta)
        )?;
    }
    w.flush()?;
    Ok(())
}

fn diarize(a: DiarizeArgs) -> Result<()> {
    let mut cfg = pipeline_config(&a.run)?;
    if let Some(p) = &a.embeddings {
        cfg.embeddings = EmbeddingConfig::File { path: p.clone() };
    }
    let truth: Option<GroundTruth> = a.truth.as_deref().map(read_json).transpose()?;
    let gap = cfg.output.merge_gap_s;
    let audio = read_wav(&a.run.input).with_context(|| format!("reading {}", a.run.input.display()))?;
    let out = stream(&audio, Pipeline::from_config(cfg, truth.as_ref())?)?;
    let mut w = create(&a.run.output)?;
    write_rttm(&mut w, &a.file_id, &out.annotation(gap))?;
    w.flush()?;
    let tentative: Vec<_> = out.segments.iter().filter(|s| s.tentative).collect();
    serde_json::to_writer_pretty(create(&sibling(&a.run.output, ".tentative.json"))?, &tentative)?;
    if let Some(p) = &a.events {
        write_events(p, &out)?;
    }
    info!("{} segments, {} tentative", out.segments.len(), tentative.len());
    Ok(())
}

fn read_rttm_file(path: &Path) -> Result<spatial_diar::metrics::Annotation> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_rttm(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

fn score(a: ScoreArgs) -> Result<()> {
    let reference = read_rttm_file(&a.reference)?;
    let hyp = read_rttm_file(&a.hyp)?;
    let d = der(&reference, &hyp, a.collar)?;
    let mut report = serde_json::to_value(d)?;
    report["collar_s"] = a.collar.into();
    if let (Some(t), Some(e)) = (&a.truth, &a.events) {
        let truth: GroundTruth = read_json(t)?;
        let changes = read_change_times(e)?;
        report["segmentation"] = serde_json::to_value(segmentation_accuracy(&truth.interim_bounds(), &changes))?;
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    println!(
        "DER {:.2}% (miss {:.2} s, false alarm {:.2} s, confusion {:.2} s of {:.2} s)",
        100.0 * d.der,
        d.missed_speech_s,
        d.false_alarm_s,
        d.speaker_confusion_s,
        d.total_reference_speech_s
    );
    Ok(())
}

/// Angle-change times from an events CSV.
fn read_change_times(path: &Path) -> Result<Vec<f64>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        let cols: Vec<&str> = line.split(',').collect();
        if i == 0 && cols[0] == "time_s" {
            continue;
        }
        if cols.get(1) == Some(&"angle_change") {
            out.push(cols[0].trim().parse().with_context(|| format!("{}:{}", path.display(), i + 1))?);
        }
    }
    Ok(out)
}

fn fit_doa(a: FitDoaArgs) -> Result<()> {
    let f = File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?;
    let mut pairs = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with("distance")) {
            continue;
        }
        let (d, s) = line
            .split_once(',')
            .with_context(|| format!("line {}: expected distance_deg,same", i + 1))?;
        let d: f64 = d.trim().parse().with_context(|| format!("line {}: bad distance", i + 1))?;
        let same = match s.trim() {
            "1" | "true" => true,
            "0" | "false" => false,
            other => bail!("line {}: same must be 0 or 1, got {other:?}", i + 1),
        };
        pairs.push((d.to_radians(), same));
    }
    let model: DoaIdentityModel = fit_doa_identity(&pairs)?;
    let report = serde_json::json!({
        "model": model,
        "boundary_deg": model.boundary().map(f64::to_degrees),
        "pairs": pairs.len(),
    });
    let text = serde_json::to_string_pretty(&report)?;
    match &a.output {
        Some(p) => std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}
