use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spatial-diar"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SCENE: &str = r#"{
  "sources": [{"angle_deg": 0}, {"angle_deg": 120}, {"angle_deg": 240}],
  "round_robin": {"utterances": 6, "interim_ms": 300},
  "noise": {"kind": "white", "snr_db": 20},
  "seed": 4
}"#;

#[test]
fn usage_errors_exit_2() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(run(&["score", "--ref", "a.rttm"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1_with_context() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["diarize", "--input", "missing.wav", "--output", p(&dir.path().join("x.rttm"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.wav"));
}

#[test]
fn analyze_writes_three_curves() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("curves.csv");
    ok(&["analyze", "--out", p(&csv)]);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("design,freq_hz,wng_db,di_db"));
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 3 * 257);
    for design in ["delay_and_sum", "cdma", "cddma"] {
        assert_eq!(rows.iter().filter(|r| r.starts_with(&format!("{design},"))).count(), 257);
    }
}

#[test]
fn design_writes_weights_and_header() {
    let dir = tempfile::tempdir().unwrap();
    let geom = dir.path().join("array.json");
    std::fs::write(&geom, r#"{"elements": 8, "diameter_m": 0.06, "pattern": "cardioid", "sample_rate": 16000}"#).unwrap();
    let weights = dir.path().join("bank.bin");
    ok(&["design", "--config", p(&geom), "--output", p(&weights), "--beams", "4", "--fft-size", "256"]);
    assert_eq!(std::fs::metadata(&weights).unwrap().len(), 4 * 129 * 8 * 8);
    let header: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("bank.json")).unwrap()).unwrap();
    assert_eq!(header["beams"], 4);
    assert_eq!(header["look_directions_deg"][1], 90.0);
}

#[test]
fn simulate_diarize_score_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.json");
    std::fs::write(&scene, SCENE).unwrap();
    let wav = dir.path().join("meet.wav");
    ok(&["simulate", "--scene", p(&scene), "--out", p(&wav)]);
    let truth = dir.path().join("meet.truth.json");
    let reference = dir.path().join("meet.rttm");
    assert!(truth.exists() && reference.exists());

    let hyp = dir.path().join("hyp.rttm");
    let events = dir.path().join("events.csv");
    ok(&[
        "diarize",
        "--input",
        p(&wav),
        "--truth",
        p(&truth),
        "--output",
        p(&hyp),
        "--events",
        p(&events),
    ]);
    assert!(std::fs::read_to_string(&hyp).unwrap().starts_with("SPEAKER meeting 1 "));
    assert!(dir.path().join("hyp.tentative.json").exists());

    let stdout = ok(&[
        "score",
        "--ref",
        p(&reference),
        "--hyp",
        p(&hyp),
        "--truth",
        p(&truth),
        "--events",
        p(&events),
    ]);
    let json_end = stdout.rfind('}').unwrap() + 1;
    let report: serde_json::Value = serde_json::from_str(&stdout[..json_end]).unwrap();
    assert!(report["der"].as_f64().unwrap() < 0.05, "{report}");
    assert_eq!(report["segmentation"]["accuracy"], 1.0);
    assert!(stdout.trim_end().lines().last().unwrap().starts_with("DER "));
}

#[test]
fn front_end_commands_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.json");
    std::fs::write(&scene, SCENE).unwrap();
    let wav = dir.path().join("s.wav");
    ok(&["simulate", "--config", p(&scene), "--output", p(&wav), "--seed", "9"]);

    let doa = dir.path().join("doa.csv");
    let spec = dir.path().join("spec.csv");
    ok(&["localize", "--input", p(&wav), "--output", p(&doa), "--spectrum", p(&spec)]);
    let text = std::fs::read_to_string(&doa).unwrap();
    assert!(text.starts_with("frame_index,time_s,theta_deg,confidence"));
    let frames = text.lines().count() - 1;
    let spectrum = std::fs::read_to_string(&spec).unwrap();
    assert_eq!(spectrum.lines().count(), frames);
    assert_eq!(spectrum.lines().next().unwrap().split(',').count(), 72);

    let segs = dir.path().join("segs.csv");
    let events = dir.path().join("ev.csv");
    ok(&["segment", "--input", p(&wav), "--output", p(&segs), "--events", p(&events)]);
    assert!(std::fs::read_to_string(&segs).unwrap().starts_with("start_s,end_s,doa_deg"));
    assert!(std::fs::read_to_string(&events).unwrap().contains("angle_change"));

    let ov = dir.path().join("ov.csv");
    ok(&["overlap", "--input", p(&wav), "--output", p(&ov)]);
    let text = std::fs::read_to_string(&ov).unwrap();
    assert!(text.starts_with("frame,vad,dip,state"));
    assert!(text.contains("one_source"));
}

#[test]
fn silent_input_gives_empty_rttm() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("quiet.wav");
    let spec = hound::WavSpec {
        channels: 12,
        sample_rate: 16000,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut w = hound::WavWriter::create(&wav, spec).unwrap();
    for _ in 0..12 * 16000 {
        w.write_sample(0.0f32).unwrap();
    }
    w.finalize().unwrap();
    let rttm = dir.path().join("quiet.rttm");
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"embeddings": {"kind": "none"}}"#).unwrap();
    ok(&["diarize", "--input", p(&wav), "--config", p(&cfg), "--output", p(&rttm)]);
    assert_eq!(std::fs::read_to_string(&rttm).unwrap(), "");
}

#[test]
fn fit_doa_reports_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = dir.path().join("pairs.csv");
    let mut text = String::from("distance_deg,same\n");
    for d in 0..90 {
        text += &format!("{d},{}\n", u8::from(d < 25));
    }
    std::fs::write(&pairs, text).unwrap();
    let out: serde_json::Value = serde_json::from_str(&ok(&["fit-doa", "--input", p(&pairs)])).unwrap();
    let b = out["boundary_deg"].as_f64().unwrap();
    assert!((20.0..30.0).contains(&b), "{b}");
    assert_eq!(out["pairs"], 90);
}
