use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{
    BaselineArgs, Command, DspArgs, EvalArgs, FeaturesArgs, GradcheckArgs, PredictArgs, PredictorKind, QueueArgs,
    SynthArgs, TrainArgs,
};
use crate::annotations::{read_long_csv, synth_tracks, write_long_csv};
use crate::baseline::{compare_baseline, ConstantHold, LocalLinear};
use crate::circumplex::EmotionPoint;
use crate::dsp::{load_wav, read_features, slice_clips, write_features, DspConfig, LogMelExtractor};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{
    evaluate, history_matrix, predict_emotion, predict_next, train, Batching, Model, NextPointPredictor, Task,
    TrainConfig, WINDOW_LENGTH,
};
use crate::nn::{random_gradient_check, Architecture};
use crate::par::par_map;
use crate::queue::{opening_from_features, read_manifest, run_session, write_trace, Candidate, OpeningSource, QueuePolicy};

pub(super) fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Features(a) => cmd_features(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Baseline(a) => cmd_baseline(&a),
        Command::Queue(a) => cmd_queue(&a),
        Command::Gradcheck(a) => cmd_gradcheck(&a),
        Command::Synth(a) => cmd_synth(&a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn stdout_err(e: io::Error) -> Error {
    Error::io("<stdout>", e)
}

impl DspArgs {
    fn config(&self) -> Result<DspConfig> {
        let cfg = DspConfig {
            clip_seconds: self.clip_seconds,
            n_mels: self.n_mels,
            fft_size: self.fft_size,
            hop_length: self.hop_length,
            ..DspConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Log-mel matrices of every full clip of a WAV file.
fn wav_features(path: &Path, extractor: &LogMelExtractor) -> Result<Vec<Matrix>> {
    let audio = load_wav(path)?;
    slice_clips(&audio, extractor.config().clip_seconds)?
        .iter()
        .map(|c| Ok(extractor.extract(c)?.values))
        .collect()
}

fn features_of(path: &Path) -> Result<Vec<Matrix>> {
    if path.extension().is_some_and(|e| e == "melf") {
        read_features(path)
    } else {
        wav_features(path, &LogMelExtractor::new(DspConfig::default())?)
    }
}

pub fn cmd_features(args: &FeaturesArgs) -> Result<()> {
    let extractor = LogMelExtractor::new(args.dsp.config()?)?;
    let mut wavs: Vec<PathBuf> = fs::read_dir(&args.input)
        .map_err(|e| Error::io(&args.input, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")))
        .collect();
    wavs.sort();
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;

    let results = par_map(&wavs, |_, path| -> Result<(String, usize)> {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let clips = wav_features(path, &extractor)?;
        write_features(&args.out.join(format!("{stem}.melf")), &clips)?;
        Ok((stem, clips.len()))
    });

    let manifest = args.out.join("manifest.csv");
    let mut w = csv::Writer::from_writer(create(&manifest)?);
    w.write_record(["song_id", "n_clips"])?;
    let mut failures = 0;
    for (path, r) in wavs.iter().zip(results) {
        match r {
            Ok((id, n)) => w.write_record([id, n.to_string()])?,
            Err(e) => {
                failures += 1;
                log::error!("{}: {e}", path.display());
                eprintln!("failed: {}: {e}", path.display());
            }
        }
    }
    w.flush().map_err(|e| Error::io(&manifest, e))?;
    println!("{} of {} files written to {}", wavs.len() - failures, wavs.len(), args.out.display());
    if failures > 0 {
        return Err(Error::Format(format!("{failures} file(s) failed")));
    }
    Ok(())
}

fn train_config(args: &TrainArgs) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default_for(args.task);
    cfg.seed = args.data.seed;
    cfg.validation_fraction = args.data.validation_fraction;
    macro_rules! set {
        ($($flag:ident => $field:ident),*) => {
            $(if let Some(v) = args.$flag { cfg.$field = v; })*
        };
    }
    set!(learning_rate => learning_rate, hidden_size => hidden_size, n_modules => n_modules,
        layers_per_module => layers_per_module, dropout => dropout_p, max_epochs => max_epochs,
        patience => early_stop_patience, min_delta => early_stop_min_delta, noise_sigma => noise_sigma);
    if args.grad_clip.is_some() {
        cfg.grad_clip = args.grad_clip;
    }
    if let Some(b) = &args.batch_size {
        cfg.batching = match b.as_str() {
            "song" => Batching::PerSong,
            n => Batching::Shuffled(n.parse().map_err(|_| {
                Error::InvalidArgument(format!("batch size {n:?} is neither a number nor `song`"))
            })?),
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

/// The effective configuration as `key = value` lines usable with `--config`.
pub fn config_echo(cfg: &TrainConfig) -> String {
    let task = match cfg.task {
        Task::Emotion => "emotion",
        Task::NextPoint => "next",
    };
    let batch = match cfg.batching {
        Batching::PerSong => "song".to_string(),
        Batching::Shuffled(n) => n.to_string(),
    };
    let mut lines = vec![
        format!("task = {task}"),
        format!("learning-rate = {:e}", cfg.learning_rate),
        format!("hidden-size = {}", cfg.hidden_size),
        format!("n-modules = {}", cfg.n_modules),
        format!("layers-per-module = {}", cfg.layers_per_module),
        format!("dropout = {}", cfg.dropout_p),
        format!("max-epochs = {}", cfg.max_epochs),
        format!("batch-size = {batch}"),
        format!("patience = {}", cfg.early_stop_patience),
        format!("min-delta = {:e}", cfg.early_stop_min_delta),
        format!("noise-sigma = {}", cfg.noise_sigma),
        format!("validation-fraction = {}", cfg.validation_fraction),
        format!("seed = {}", cfg.seed),
    ];
    if let Some(c) = cfg.grad_clip {
        lines.push(format!("grad-clip = {c}"));
    }
    lines.join("\n")
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let cfg = train_config(args)?;
    println!("{}", config_echo(&cfg));
    let (train_set, val_set) = args.data.split_examples(cfg.task)?;
    let input_size = train_set
        .first()
        .ok_or_else(|| Error::Empty("training split has no examples".into()))?
        .input
        .rows();
    println!(
        "# {} training and {} validation examples",
        train_set.len(),
        val_set.len()
    );
    let model = Model::from_config(&cfg, input_size)?;
    let (model, report) = train(model, &train_set, &val_set, &cfg)?;
    model.save(&args.out)?;
    let mut w = create(&args.loss_csv)?;
    report.write_loss_csv(&mut w)?;
    w.flush().map_err(|e| Error::io(&args.loss_csv, e))?;
    println!("epochs_run = {}", report.epochs_run);
    println!("best_epoch = {}", report.best_epoch);
    println!("stopped_early = {}", report.stopped_early);
    println!("train_mse = {:.4}  train_rmse = {:.4}", report.train_mse, report.train_rmse);
    println!("val_mse = {:.4}  val_rmse = {:.4}", report.val_mse, report.val_rmse);
    println!("wall_seconds = {:.1}", report.wall_seconds);
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let model = Model::load(&args.model)?;
    let examples = args.data.examples(model.task, args.split)?;
    let report = evaluate(&model, &examples)?;
    let mut out = io::stdout().lock();
    if args.csv {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["song_id", "n", "mse", "rmse"])?;
        for g in &report.per_group {
            w.write_record([g.group.clone(), g.n.to_string(), format!("{:.9}", g.mse), format!("{:.9}", g.rmse)])?;
        }
        w.write_record(["all".into(), report.n.to_string(), format!("{:.9}", report.mse), format!("{:.9}", report.rmse)])?;
        w.flush().map_err(stdout_err)?;
    } else {
        writeln!(out, "examples = {}", report.n).map_err(stdout_err)?;
        writeln!(out, "mse = {:.4}", report.mse).map_err(stdout_err)?;
        writeln!(out, "rmse = {:.4}", report.rmse).map_err(stdout_err)?;
    }
    Ok(())
}

pub fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let model = Model::load(&args.model)?;
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    match model.task {
        Task::Emotion => {
            if args.input.is_empty() {
                return Err(Error::InvalidArgument("emotion prediction needs --input files".into()));
            }
            w.write_record(["file", "clip", "time_s", "valence", "arousal"])?;
            for path in &args.input {
                for (j, m) in features_of(path)?.iter().enumerate() {
                    let p = predict_emotion(&model, m)?;
                    w.write_record([
                        path.display().to_string(),
                        j.to_string(),
                        format!("{:.1}", j as f64 * args.data.clip_seconds),
                        format!("{:.6}", p.valence),
                        format!("{:.6}", p.arousal),
                    ])?;
                }
            }
        }
        Task::NextPoint => {
            w.write_record(["song_id", "pred_valence", "pred_arousal"])?;
            for t in args.data.load_tracks()? {
                if t.len() < WINDOW_LENGTH {
                    log::warn!("track {} shorter than {WINDOW_LENGTH} points; skipped", t.song_id);
                    continue;
                }
                let p = predict_next(&model, &history_matrix(&t.points[t.len() - WINDOW_LENGTH..]))?;
                w.write_record([t.song_id.clone(), format!("{:.6}", p.valence), format!("{:.6}", p.arousal)])?;
            }
        }
    }
    w.flush().map_err(stdout_err)?;
    Ok(())
}

fn load_next_model(path: &Path) -> Result<Model> {
    let m = Model::load(path)?;
    if m.task != Task::NextPoint {
        return Err(Error::InvalidArgument(format!("{} is not a next-point model", path.display())));
    }
    Ok(m)
}

pub fn cmd_baseline(args: &BaselineArgs) -> Result<()> {
    let tracks = args.data.load_tracks()?;
    let model = args.model.as_deref().map(load_next_model).transpose()?;
    let report = compare_baseline(&tracks, model.as_ref().map(|m| m as &(dyn NextPointPredictor + Sync)))?;
    if let Some(path) = &args.out {
        let mut w = create(path)?;
        report.write_csv(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    if args.csv {
        report.write_csv(io::stdout().lock())?;
    } else {
        let mut out = io::stdout().lock();
        writeln!(out, "{} tracks; mean next-point MSE per predictor:", report.rows.len()).map_err(stdout_err)?;
        for (name, mse) in report.summary() {
            writeln!(out, "  {name:<14} mse = {mse:.6}  rmse = {:.4}", mse.sqrt()).map_err(stdout_err)?;
        }
    }
    Ok(())
}

pub fn cmd_queue(args: &QueueArgs) -> Result<()> {
    let policy = QueuePolicy {
        tolerance: args.tolerance,
        opening_window_k: args.opening_k,
        seed: args.seed,
    };
    policy.validate()?;
    let manifest = read_manifest(File::open(&args.candidates).map_err(|e| Error::io(&args.candidates, e))?)?;
    let emotion_model = args.emotion_model.as_deref().map(Model::load).transpose()?;
    let candidates = manifest
        .into_iter()
        .map(|entry| {
            let opening = match entry.source {
                OpeningSource::Annotated(p) => p,
                OpeningSource::Audio(path) => {
                    let model = emotion_model.as_ref().ok_or_else(|| {
                        Error::InvalidArgument(format!(
                            "candidate {} is given by path; pass --emotion-model",
                            entry.clip_id
                        ))
                    })?;
                    let path = if path.is_relative() {
                        args.candidates.parent().unwrap_or(Path::new(".")).join(path)
                    } else {
                        path
                    };
                    opening_from_features(model, &features_of(&path)?, policy.opening_window_k)?
                }
            };
            Ok(Candidate {
                clip_id: entry.clip_id,
                opening,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let history: Vec<EmotionPoint> = match &args.history {
        Some(path) => {
            let tracks = read_long_csv(File::open(path).map_err(|e| Error::io(path, e))?)?;
            let first = tracks
                .into_iter()
                .next()
                .ok_or_else(|| Error::Empty(format!("{} holds no tracks", path.display())))?;
            if first.len() < WINDOW_LENGTH {
                return Err(Error::InvalidArgument(format!(
                    "history track has {} points, need {WINDOW_LENGTH}",
                    first.len()
                )));
            }
            first.points[..WINDOW_LENGTH].to_vec()
        }
        None => vec![EmotionPoint::clamp(args.start_valence, args.start_arousal)?; WINDOW_LENGTH],
    };

    let kind = args.predictor.unwrap_or(if args.model.is_some() {
        PredictorKind::Lstm
    } else {
        PredictorKind::Constant
    });
    let lstm;
    let predictor: &dyn NextPointPredictor = match kind {
        PredictorKind::Constant => &ConstantHold,
        PredictorKind::Linear => &LocalLinear { step: 0.5 },
        PredictorKind::Lstm => {
            let path = args
                .model
                .as_deref()
                .ok_or_else(|| Error::InvalidArgument("the lstm predictor needs --model".into()))?;
            lstm = load_next_model(path)?;
            &lstm
        }
    };
    let steps = args.steps.unwrap_or(candidates.len());
    let trace = run_session(&history, predictor, &candidates, &policy, steps)?;
    write_trace(io::stdout().lock(), &trace)
}

pub fn cmd_gradcheck(args: &GradcheckArgs) -> Result<()> {
    let arch = Architecture::uniform(
        args.input_size,
        args.hidden_size,
        args.n_modules,
        args.layers_per_module,
        0.0,
    );
    let report = random_gradient_check(&arch, args.steps, args.seed, args.fd_step)?;
    let pass = report.max_rel_error < args.threshold;
    let verdict = if pass { "PASS" } else { "FAIL" };
    if args.csv {
        println!("max_rel_error,n_params,threshold,result");
        println!("{:e},{},{:e},{verdict}", report.max_rel_error, report.n_params, args.threshold);
    } else {
        println!("parameters checked = {}", report.n_params);
        println!("max relative error = {:.3e}", report.max_rel_error);
        println!("{verdict} (threshold {:e})", args.threshold);
    }
    if pass {
        Ok(())
    } else {
        Err(Error::InvalidValue(format!(
            "gradient check failed: {:.3e} ≥ {:e}",
            report.max_rel_error, args.threshold
        )))
    }
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let tracks = synth_tracks(args.songs, args.length, args.kind, args.noise, args.seed)?;
    match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            write_long_csv(&mut w, &tracks)?;
            w.flush().map_err(|e| Error::io(path, e))
        }
        None => write_long_csv(io::stdout().lock(), &tracks),
    }
}
