//! Implementations of the six subcommands.
//!
//! Every command resolves its configuration first, writes the resolved
//! snapshot into the output directory, then does its work. Output-directory
//! contents are a pure function of the resolved configuration plus the input
//! files: nothing here consults clocks, hostnames, or unseeded randomness.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use trajnet::data::{
    load_checkpoint, read_manifest, read_sequence, save_checkpoint, write_sequence_text,
    write_synthetic_dataset, LoadedSplit, Windowing,
};
use trajnet::eval::{
    ablation_sweep, dataset_report, zero_velocity_prediction, MetricKind, MetricReport,
    SweepOutcome,
};
use trajnet::model::{AblationCell, ModelConfig, TrajectoryNetModel};
use trajnet::skeleton::{
    from_output_tensor, to_input_tensor, InputLayout, MotionSequence, Units,
};
use trajnet::training::{
    predict, preprocess_window_pair, Checkpoint, DatasetMeta, PreprocessConfig, TrainError,
    TrainSample, Trainer,
};

use crate::config::{self, ExperimentConfig};
use crate::error::{io_error, CliError};

/// The units the model works in once `pp` has run over `raw`-unit captures.
fn working_units(pp: PreprocessConfig, raw: Units) -> Units {
    if pp.convert_to_millimeters {
        Units::Millimeters
    } else {
        raw
    }
}

/// Resolves the manifest path from an explicit flag or the config file.
fn require_manifest<'a>(
    cfg: &'a ExperimentConfig,
    flag: Option<&'a Path>,
) -> Result<&'a Path, CliError> {
    flag.or(cfg.data.manifest.as_deref()).ok_or_else(|| {
        CliError::Config(
            "no dataset manifest: pass --manifest or set data.manifest in the config file".into(),
        )
    })
}

/// Rejects dataset/model combinations that cannot line up.
fn check_model_fits_dataset(
    model_cfg: &ModelConfig,
    windowing: &Windowing,
    split: &LoadedSplit,
) -> Result<(), CliError> {
    if split.spec.n_joints() != model_cfg.n_joints || split.spec.dim != model_cfg.dim {
        return Err(CliError::Data(format!(
            "dataset skeleton `{}` has {} joints x {} coords but the model expects {} x {}",
            split.spec.name,
            split.spec.n_joints(),
            split.spec.dim,
            model_cfg.n_joints,
            model_cfg.dim
        )));
    }
    if windowing.input_frames != model_cfg.input_frames {
        return Err(CliError::Data(format!(
            "manifest windows observe {} frames but the model expects {}",
            windowing.input_frames, model_cfg.input_frames
        )));
    }
    if windowing.output_frames < model_cfg.output_frames {
        return Err(CliError::Data(format!(
            "manifest windows carry {} future frames but the model predicts {}",
            windowing.output_frames, model_cfg.output_frames
        )));
    }
    Ok(())
}

/// Preprocesses every window pair of a split.
fn preprocess_split(
    split: &LoadedSplit,
    pp: PreprocessConfig,
) -> Result<Vec<(MotionSequence, MotionSequence)>, CliError> {
    split
        .windows
        .iter()
        .map(|(o, f)| Ok(preprocess_window_pair(o, f, pp)?))
        .collect()
}

/// Builds training samples in the model's input layout, truncating futures
/// to the model's prediction horizon.
fn build_samples(
    split: &LoadedSplit,
    pp: PreprocessConfig,
    layout: InputLayout,
    horizon: usize,
) -> Result<Vec<TrainSample>, CliError> {
    split
        .windows
        .iter()
        .map(|(o, f)| {
            let (obs, fut) = preprocess_window_pair(o, f, pp)?;
            let fut = fut.window(0, horizon.min(fut.len()));
            Ok(TrainSample::from_window_pair(&obs, &fut, layout)?)
        })
        .collect()
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content).map_err(|e| io_error(path, e))
}

/// `gen-synth`: write a seeded synthetic dataset plus its manifest.
pub fn cmd_gen_synth(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    config::write_snapshot(out, cfg)?;
    let windowing = Windowing {
        input_frames: cfg.model.input_frames,
        output_frames: cfg.model.output_frames,
        stride: cfg.data.stride,
    };
    let summary = write_synthetic_dataset(out, &cfg.synth, windowing, cfg.data.eval_fraction)?;
    log::info!(
        "generated {} sequences of {} frames ({} train, {} eval)",
        cfg.synth.n_sequences,
        cfg.synth.frames,
        summary.n_train,
        summary.n_eval
    );
    println!("manifest: {}", summary.manifest_path.display());
    Ok(())
}

/// `train`: fit the configured model (or resume a checkpoint) on the train
/// split, logging one CSV row per epoch and saving the result as
/// `model.trajn`. On divergence the last finite checkpoint is kept and the
/// process exits with the divergence code.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path, resume: Option<&Path>) -> Result<(), CliError> {
    let manifest_path = require_manifest(cfg, None)?;
    let manifest = read_manifest(manifest_path)?;
    let split = manifest.load_split(manifest_path, &cfg.data.train_split)?;

    let (mut trainer, preprocess) = match resume {
        Some(ckpt_path) => {
            let ckpt = load_checkpoint(ckpt_path)?;
            if ckpt.skeleton_preset != split.spec.name {
                return Err(CliError::Data(format!(
                    "checkpoint was trained on skeleton `{}` but this dataset uses `{}`",
                    ckpt.skeleton_preset, split.spec.name
                )));
            }
            let mut trainer = Trainer::from_checkpoint(&ckpt)?;
            // The config file may raise the epoch target; everything else
            // about the optimization continues exactly as checkpointed.
            trainer.set_epochs(cfg.train.epochs.max(ckpt.epoch));
            log::info!(
                "resumed {} at epoch {} (target {})",
                ckpt_path.display(),
                ckpt.epoch,
                trainer.train_config().epochs
            );
            (trainer, ckpt.preprocess)
        }
        None => {
            let model = TrajectoryNetModel::init(cfg.model.clone(), cfg.ablations, cfg.train.seed)?;
            (Trainer::new(model, cfg.train.clone())?, cfg.preprocess)
        }
    };

    let model_cfg = trainer.model().config().clone();
    check_model_fits_dataset(&model_cfg, &manifest.windowing, &split)?;

    let resolved = ExperimentConfig {
        model: model_cfg.clone(),
        ablations: *trainer.model().ablations(),
        train: trainer.train_config().clone(),
        preprocess,
        synth: cfg.synth.clone(),
        data: cfg.data.clone(),
    };
    config::write_snapshot(out, &resolved)?;

    let layout = trainer.model().input_layout();
    let samples = build_samples(&split, preprocess, layout, model_cfg.output_frames)?;
    log::info!(
        "training on {} windows from split `{}` ({} sequences skipped as too short)",
        samples.len(),
        cfg.data.train_split,
        split.skipped_sequences
    );

    let meta = DatasetMeta {
        skeleton_preset: split.spec.name.clone(),
        units: working_units(preprocess, split.units),
        frame_interval_ms: split.frame_interval_ms,
        preprocess,
    };
    let ckpt_path = out.join("model.trajn");
    let log_path = out.join("training-log.csv");
    let mut log_csv = String::from("epoch,train_loss,wall_ms\n");
    let mut last_finite: Option<Checkpoint> = None;
    let target = trainer.train_config().epochs;
    let stop_at = trainer.train_config().stop_at_loss;

    while trainer.epoch() < target {
        let t0 = Instant::now();
        match trainer.train_epoch(&samples) {
            Ok(loss) => {
                let ms = t0.elapsed().as_millis();
                log::info!("epoch {:>4}/{target}  loss {loss:.6e}  ({ms} ms)", trainer.epoch());
                log_csv.push_str(&format!("{},{loss:.17},{ms}\n", trainer.epoch()));
                last_finite = Some(trainer.to_checkpoint(&meta));
                if stop_at.is_some_and(|th| loss <= th) {
                    log::info!("stopping early: loss {loss:.6e} reached the configured threshold");
                    break;
                }
            }
            Err(TrainError::Diverged { epoch, loss }) => {
                write_file(&log_path, &log_csv)?;
                let mut msg = format!("training diverged at epoch {epoch} (batch loss {loss:e})");
                if let Some(c) = &last_finite {
                    save_checkpoint(&ckpt_path, c)?;
                    msg.push_str(&format!(
                        "; kept the last finite checkpoint (epoch {}) at {}",
                        c.epoch,
                        ckpt_path.display()
                    ));
                }
                return Err(CliError::Diverged(msg));
            }
            Err(e) => return Err(e.into()),
        }
    }

    write_file(&log_path, &log_csv)?;
    save_checkpoint(&ckpt_path, &trainer.to_checkpoint(&meta))?;
    let final_loss = trainer.loss_history().last().copied().unwrap_or(f64::NAN);
    println!("trained to epoch {}; final training loss {final_loss:.6e}", trainer.epoch());
    println!("checkpoint: {}", ckpt_path.display());
    Ok(())
}

#[derive(Serialize)]
struct EvalSummary<'a> {
    checkpoint: String,
    manifest: String,
    split: &'a str,
    n_windows: usize,
    horizon_frames: usize,
    reports: &'a [MetricReport],
    zero_velocity_mpjpe: &'a MetricReport,
}

/// `eval`: score a checkpoint on a manifest split, emitting one per-frame
/// CSV per metric, a horizon-column CSV, and a JSON summary that includes
/// the zero-velocity baseline.
pub fn cmd_eval(
    cfg: &ExperimentConfig,
    out: &Path,
    ckpt_path: &Path,
    manifest_flag: Option<&Path>,
    split_flag: Option<&str>,
    horizon_frames: Option<usize>,
) -> Result<(), CliError> {
    let ckpt = load_checkpoint(ckpt_path)?;
    let model = ckpt.model().map_err(|e| {
        CliError::Data(format!("checkpoint {} does not reconstruct: {e}", ckpt_path.display()))
    })?;
    let horizon = match horizon_frames {
        None => model.config().output_frames,
        Some(h) if h <= model.config().output_frames => h,
        Some(h) => {
            return Err(CliError::Config(format!(
                "requested horizon of {h} frames, but the checkpoint predicts only {}",
                model.config().output_frames
            )))
        }
    };

    let manifest_path = require_manifest(cfg, manifest_flag)?;
    let manifest = read_manifest(manifest_path)?;
    let split_name = split_flag.unwrap_or(&cfg.data.eval_split);
    let split = manifest.load_split(manifest_path, split_name)?;

    if split.spec.name != ckpt.skeleton_preset {
        return Err(CliError::Data(format!(
            "checkpoint was trained on skeleton `{}` but manifest sequences use `{}`",
            ckpt.skeleton_preset, split.spec.name
        )));
    }
    if manifest.windowing.input_frames != model.config().input_frames {
        return Err(CliError::Data(format!(
            "manifest windows observe {} frames but the checkpoint expects {}",
            manifest.windowing.input_frames,
            model.config().input_frames
        )));
    }
    if manifest.windowing.output_frames < horizon {
        return Err(CliError::Data(format!(
            "manifest windows carry {} future frames but the evaluation horizon needs {horizon}",
            manifest.windowing.output_frames
        )));
    }
    let units = working_units(ckpt.preprocess, split.units);
    if units != ckpt.units {
        return Err(CliError::Data(format!(
            "checkpoint expects {} data but this dataset yields {} after preprocessing",
            ckpt.units.label(),
            units.label()
        )));
    }

    let resolved = ExperimentConfig {
        model: ckpt.model_config.clone(),
        ablations: ckpt.ablations,
        train: ckpt.train_config.clone(),
        preprocess: ckpt.preprocess,
        synth: cfg.synth.clone(),
        data: cfg.data.clone(),
    };
    config::write_snapshot(out, &resolved)?;

    let layout = model.input_layout();
    let mut pairs = Vec::with_capacity(split.windows.len());
    let mut baseline = Vec::with_capacity(split.windows.len());
    for (o, f) in &split.windows {
        let (obs, fut) = preprocess_window_pair(o, f, ckpt.preprocess)?;
        let input = to_input_tensor(&obs, layout, obs.len())?;
        let raw = model.forward(&input)?;
        let pred_seq =
            from_output_tensor(&raw, InputLayout::TimeAsChannels, &obs.spec, obs.frame_interval_ms)?;
        let pred = to_input_tensor(&pred_seq.window(0, horizon), InputLayout::TimeAsChannels, horizon)?;
        let fut = fut.window(0, horizon);
        let target = to_input_tensor(&fut, InputLayout::TimeAsChannels, horizon)?;
        baseline.push((zero_velocity_prediction(&obs, horizon)?, target.clone()));
        pairs.push((pred, target));
    }
    log::info!("evaluating {} windows from split `{split_name}` at {horizon} future frames", pairs.len());

    let mut reports = Vec::new();
    for kind in MetricKind::ALL {
        let report = dataset_report(kind, &pairs, units, split.frame_interval_ms)?;
        let path = out.join(format!("eval-{}.csv", kind.label()));
        write_file(&path, &report.to_csv())?;
        reports.push(report);
    }
    let zv = dataset_report(MetricKind::MpjpeMm, &baseline, units, split.frame_interval_ms)?;

    let mut horizons_csv = String::from("metric");
    for h in &reports[0].horizons {
        horizons_csv.push_str(&format!(",{}ms", h.ms));
    }
    horizons_csv.push_str(",average\n");
    for r in &reports {
        horizons_csv.push_str(&r.metric);
        for h in &r.horizons {
            horizons_csv.push_str(&format!(",{:.17}", h.value));
        }
        horizons_csv.push_str(&format!(",{:.17}\n", r.average));
    }
    write_file(&out.join("horizons.csv"), &horizons_csv)?;

    let summary = EvalSummary {
        checkpoint: ckpt_path.display().to_string(),
        manifest: manifest_path.display().to_string(),
        split: split_name,
        n_windows: pairs.len(),
        horizon_frames: horizon,
        reports: &reports,
        zero_velocity_mpjpe: &zv,
    };
    write_file(
        &out.join("eval-summary.json"),
        &serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;

    for r in &reports {
        let cols: Vec<String> =
            r.horizons.iter().map(|h| format!("{}ms {:.4}", h.ms, h.value)).collect();
        println!("{:<9} average {:.6}  [{}]", r.metric, r.average, cols.join(", "));
    }
    println!(
        "zero-velocity mpjpe_mm average {:.6}  (model/baseline ratio {:.4})",
        zv.average,
        reports[0].average / zv.average
    );
    Ok(())
}

/// `predict`: run one observed sequence file through a checkpoint and write
/// the predicted future as a `trajseq` text file, mapped back into the
/// input's coordinate frame (in the model's working units).
pub fn cmd_predict(
    cfg: &ExperimentConfig,
    out: &Path,
    ckpt_path: &Path,
    input_path: &Path,
) -> Result<(), CliError> {
    let ckpt = load_checkpoint(ckpt_path)?;
    let model = ckpt.model().map_err(|e| {
        CliError::Data(format!("checkpoint {} does not reconstruct: {e}", ckpt_path.display()))
    })?;
    let raw = read_sequence(input_path)?;
    if raw.spec.name != ckpt.skeleton_preset {
        return Err(CliError::Data(format!(
            "checkpoint was trained on skeleton `{}` but {} uses `{}`",
            ckpt.skeleton_preset,
            input_path.display(),
            raw.spec.name
        )));
    }
    let expected = model.config().input_frames;
    if raw.len() != expected {
        return Err(CliError::Data(format!(
            "{}: the model observes exactly {expected} frames but the file has {}",
            input_path.display(),
            raw.len()
        )));
    }

    let resolved = ExperimentConfig {
        model: ckpt.model_config.clone(),
        ablations: ckpt.ablations,
        train: ckpt.train_config.clone(),
        preprocess: ckpt.preprocess,
        synth: cfg.synth.clone(),
        data: cfg.data.clone(),
    };
    config::write_snapshot(out, &resolved)?;

    let mut observed = raw;
    if ckpt.preprocess.convert_to_millimeters {
        observed = observed.to_millimeters();
    }
    let origin = if ckpt.preprocess.root_center {
        let last = observed.last_pose().expect("length checked above");
        Some(last.joint(observed.spec.root_joint).to_vec())
    } else {
        None
    };
    if let Some(o) = &origin {
        observed = observed.translated(o)?;
    }
    let mut prediction = predict(&model, &observed)?;
    if let Some(o) = &origin {
        let back: Vec<f64> = o.iter().map(|v| -v).collect();
        prediction = prediction.translated(&back)?;
    }

    let path = out.join("prediction.trajseq");
    write_sequence_text(&path, &prediction)?;
    println!(
        "wrote {} predicted frames ({} ms ahead) to {}",
        prediction.len(),
        prediction.len() as f64 * prediction.frame_interval_ms,
        path.display()
    );
    Ok(())
}

/// Renders the per-layer architecture table plus the receptive-field
/// coverage verdict.
fn render_architecture(model: &TrajectoryNetModel, origin: &str) -> String {
    let cfg = model.config();
    let layout = match model.input_layout() {
        InputLayout::TimeAsChannels => "frames as channels",
        InputLayout::CoordsAsChannels => "coordinates as channels",
    };
    let mut out = String::new();
    out.push_str(&format!("architecture from {origin}\n"));
    out.push_str(&format!("input: {:?} ({layout})\n", model.expected_input_shape()));
    out.push_str(&format!("output: [{}, {}, {}]\n", cfg.output_frames, cfg.dim, cfg.n_joints));
    out.push_str(&format!("parameters: {}\n\n", model.count_parameters()));
    out.push_str(&format!(
        "{:<12} {:>5} {:>5} {:>7} {:>4} {:>9}\n",
        "layer", "in", "out", "kernel", "rf", "params"
    ));
    for info in model.layer_report() {
        out.push_str(&format!(
            "{:<12} {:>5} {:>5} {:>7} {:>4} {:>9}\n",
            info.name,
            info.in_channels,
            info.out_channels,
            format!("{0}x{0}", info.kernel),
            info.receptive_field,
            info.parameter_count
        ));
    }
    out.push('\n');
    match model.coverage_layer() {
        Some(k) => {
            let rf = model.receptive_field(k).expect("coverage layer is in range");
            let block = (k - 1) / cfg.layers_per_block + 1;
            let stage = (k - 1) % cfg.layers_per_block + 1;
            out.push_str(&format!(
                "full-body coverage: receptive field spans all {} joints at encoder layer {k} (enc.b{block}.l{stage}, rf {rf})\n",
                cfg.n_joints
            ));
        }
        None => {
            let last = cfg.n_blocks * cfg.layers_per_block;
            let rf = if last >= 1 { model.receptive_field(last).unwrap_or(1) } else { 1 };
            out.push_str(&format!(
                "receptive field never covers all {} joints within the encoder (final rf {rf})\n",
                cfg.n_joints
            ));
        }
    }
    out
}

/// `inspect`: print and save the architecture report for the configured
/// model or a checkpoint.
pub fn cmd_inspect(cfg: &ExperimentConfig, out: &Path, ckpt_flag: Option<&Path>) -> Result<(), CliError> {
    let (model, origin, resolved) = match ckpt_flag {
        Some(p) => {
            let ckpt = load_checkpoint(p)?;
            let model = ckpt.model().map_err(|e| {
                CliError::Data(format!("checkpoint {} does not reconstruct: {e}", p.display()))
            })?;
            let resolved = ExperimentConfig {
                model: ckpt.model_config.clone(),
                ablations: ckpt.ablations,
                train: ckpt.train_config.clone(),
                preprocess: ckpt.preprocess,
                synth: cfg.synth.clone(),
                data: cfg.data.clone(),
            };
            (model, format!("checkpoint {}", p.display()), resolved)
        }
        None => (
            TrajectoryNetModel::init(cfg.model.clone(), cfg.ablations, cfg.train.seed)?,
            "configuration".to_string(),
            cfg.clone(),
        ),
    };
    config::write_snapshot(out, &resolved)?;
    let text = render_architecture(&model, &origin);
    write_file(&out.join("architecture.txt"), &text)?;
    print!("{text}");
    Ok(())
}

/// `ablate`: train and score all eight named variant cells on the manifest's
/// train/eval splits. Failing cells are recorded in the table and warned
/// about; the sweep itself still succeeds.
pub fn cmd_ablate(cfg: &ExperimentConfig, out: &Path, kind: MetricKind) -> Result<(), CliError> {
    let manifest_path = require_manifest(cfg, None)?;
    let manifest = read_manifest(manifest_path)?;
    let train_split = manifest.load_split(manifest_path, &cfg.data.train_split)?;
    let eval_split = manifest.load_split(manifest_path, &cfg.data.eval_split)?;
    check_model_fits_dataset(&cfg.model, &manifest.windowing, &train_split)?;
    config::write_snapshot(out, cfg)?;

    let train_pairs = preprocess_split(&train_split, cfg.preprocess)?;
    let eval_pairs = preprocess_split(&eval_split, cfg.preprocess)?;
    log::info!(
        "sweeping {} cells over {} train / {} eval windows",
        AblationCell::ALL.len(),
        train_pairs.len(),
        eval_pairs.len()
    );
    let table = ablation_sweep(&cfg.model, &AblationCell::ALL, &cfg.train, kind, &train_pairs, &eval_pairs)?;

    for row in &table.rows {
        match &row.outcome {
            SweepOutcome::Completed { .. } => {}
            SweepOutcome::Diverged { epoch, loss } => {
                log::warn!("cell {} diverged at epoch {epoch} (loss {loss:e})", row.cell.label());
            }
            SweepOutcome::Failed { what } => {
                log::warn!("cell {} failed: {what}", row.cell.label());
            }
        }
    }
    write_file(&out.join("sweep.csv"), &table.to_csv())?;
    write_file(&out.join("sweep.txt"), &table.to_text())?;
    print!("{}", table.to_text());
    Ok(())
}
