use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use moodflow::dsp::{read_features, write_wav_i16, AudioClip, SAMPLE_RATE};

fn moodflow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_moodflow"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn tone(seconds: f64) -> AudioClip {
    let n = (seconds * SAMPLE_RATE as f64) as usize;
    let samples = (0..n)
        .map(|i| 0.3 * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / SAMPLE_RATE as f64).sin())
        .collect();
    AudioClip::new(samples, SAMPLE_RATE).unwrap()
}

#[test]
fn features_manifest_and_failures() {
    let dir = tempfile::tempdir().unwrap();
    let wavs = dir.path().join("wav");
    fs::create_dir(&wavs).unwrap();

    let o = moodflow(dir.path(), &["features", "--in", "wav", "--out", "empty"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read_to_string(dir.path().join("empty/manifest.csv")).unwrap(), "song_id,n_clips\n");

    write_wav_i16(&wavs.join("song7.wav"), &tone(45.0)).unwrap();
    let o = moodflow(dir.path(), &["features", "--in", "wav", "--out", "mel"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read_to_string(dir.path().join("mel/manifest.csv")).unwrap(),
        "song_id,n_clips\nsong7,90\n"
    );
    let clips = read_features(&dir.path().join("mel/song7.melf")).unwrap();
    assert_eq!(clips.len(), 90);
    assert_eq!(clips[0].shape(), (128, 44));

    fs::write(wavs.join("broken.wav"), b"not a wav file").unwrap();
    let o = moodflow(dir.path(), &["features", "--in", "wav", "--out", "mel2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("broken.wav"));
    assert_eq!(
        fs::read_to_string(dir.path().join("mel2/manifest.csv")).unwrap(),
        "song_id,n_clips\nsong7,90\n"
    );
}

#[test]
fn train_defaults_echo_and_constant_tracks() {
    let dir = tempfile::tempdir().unwrap();
    let o = moodflow(dir.path(), &["train", "--task", "next", "--synthetic", "constant"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    for line in [
        "learning-rate = 1e-4",
        "hidden-size = 32",
        "n-modules = 1",
        "layers-per-module = 2",
        "dropout = 0",
        "max-epochs = 10",
        "batch-size = 64",
    ] {
        assert!(out.contains(line), "missing {line:?} in\n{out}");
    }
    let curve = fs::read_to_string(dir.path().join("loss.csv")).unwrap();
    let vals: Vec<f64> = curve
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap())
        .collect();

    // the kept checkpoint scores the same on the validation songs
    let o = moodflow(
        dir.path(),
        &["eval", "--model", "model.ckpt", "--synthetic", "constant", "--split", "validation", "--csv"],
    );
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    assert!(csv.starts_with("song_id,n,mse,rmse\n"));
    let all: Vec<&str> = csv.lines().last().unwrap().split(',').collect();
    assert_eq!(all[0], "all");
    let mse: f64 = all[2].parse().unwrap();
    let rmse: f64 = all[3].parse().unwrap();
    assert!(mse < 1e-3, "val mse {mse}; curve {vals:?}");
    assert!(vals.iter().any(|v| (v - mse).abs() < 1e-8));
    assert!((rmse - mse.sqrt()).abs() < 1e-8);

    let o = moodflow(dir.path(), &["predict", "--model", "model.ckpt", "--synthetic", "constant", "--synthetic-songs", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.lines().next(), Some("song_id,pred_valence,pred_arousal"));
    assert_eq!(out.lines().count(), 4);
}

#[test]
fn task1_default_echo() {
    let dir = tempfile::tempdir().unwrap();
    // no data: config is echoed before the data error
    let o = moodflow(dir.path(), &["train", "--task", "emotion"]);
    assert_eq!(o.status.code(), Some(3));
    let out = stdout(&o);
    for line in ["learning-rate = 5e-5", "hidden-size = 20", "n-modules = 2", "dropout = 0.1", "batch-size = song"] {
        assert!(out.contains(line), "missing {line:?} in\n{out}");
    }
}

#[test]
fn gradcheck_default_passes() {
    let o = moodflow(Path::new("."), &["gradcheck"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("max relative error"));
    assert!(out.contains("PASS"));
}

#[test]
fn queue_single_candidate_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("one.csv"), "clip_id,valence,arousal\nonly,-0.9,0.9\n").unwrap();
    let o = moodflow(dir.path(), &["queue", "--candidates", "one.csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("step,chosen_id,pred_valence,pred_arousal,distance"));
    assert!(lines.next().unwrap().starts_with("1,only,"));

    fs::write(
        dir.path().join("lib.csv"),
        "clip_id,valence,arousal\nb,0.05,0\na,0.3,0.3\nc,-0.5,-0.5\n",
    )
    .unwrap();
    let run = |seed: &str| stdout(&moodflow(dir.path(), &["queue", "--candidates", "lib.csv", "--seed", seed]));
    assert_eq!(run("4"), run("4"));
    assert!(run("4").lines().nth(1).unwrap().starts_with("1,b,"));
}

#[test]
fn baseline_on_synthetic_tracks() {
    let dir = tempfile::tempdir().unwrap();
    let o = moodflow(
        dir.path(),
        &["synth", "--kind", "linear", "--songs", "3", "--length", "20", "--noise", "0", "--out", "tracks.csv"],
    );
    assert_eq!(o.status.code(), Some(0));
    let o = moodflow(dir.path(), &["baseline", "--annotations", "tracks.csv", "--csv"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.lines().next(), Some("song_id,channel,predictor,mse"));
    assert_eq!(out.lines().count(), 1 + 3 * 3 * 3);
    for l in out.lines().filter(|l| l.contains(",linear_")) {
        let mse: f64 = l.rsplit(',').next().unwrap().parse().unwrap();
        assert!(mse < 1e-12, "{l}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(moodflow(dir.path(), &["eval", "--model", "missing.ckpt", "--synthetic", "linear"]).status.code(), Some(1));
    assert_eq!(moodflow(dir.path(), &["train", "--task", "sideways"]).status.code(), Some(3));
    fs::write(dir.path().join("bad.conf"), "learning_rate = 1e-3\n").unwrap();
    let o = moodflow(dir.path(), &["train", "--task", "next", "--config", "bad.conf"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("learning-rate"));
    assert_eq!(
        moodflow(dir.path(), &["gradcheck", "--hidden-size", "3", "--threshold", "1e-30"]).status.code(),
        Some(2)
    );
    let help = stdout(&moodflow(dir.path(), &["train", "--help"]));
    for flag in ["--learning-rate", "--batch-size", "--patience", "--min-delta", "--seed", "--config", "--grad-clip"] {
        assert!(help.contains(flag), "{flag}");
    }
}
