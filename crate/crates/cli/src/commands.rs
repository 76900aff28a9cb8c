use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use softblend::config::ExperimentConfig;
use softblend::harness::io::{load_dataset, load_log, load_model, load_report, save_dataset, save_log, save_model, save_report, SavedModel};
use softblend::harness::{
    run_stiffness_probe, run_tracking, train_model, CollectionInfo, ExperimentSetup, StiffnessReport, TrajectoryLog,
};
use softblend::Error;

use crate::args::{Cli, CollectArgs, Command, ProbeArgs, ReportArgs, TrackArgs, TrainArgs};
use crate::Failure;

type Outcome = Result<(), Failure>;

/// Every run leaves one of these next to its output.
#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    tool_version: &'static str,
    subcommand: &'static str,
    config: Option<&'a Path>,
    dataset: Option<&'a Path>,
    model: Option<&'a Path>,
    log: Option<&'a Path>,
    inputs: Vec<&'a Path>,
    output: &'a Path,
    seed: Option<u64>,
    excitation_seed: u64,
    training_seed: u64,
    parameters: Value,
}

struct Context {
    config_path: Option<PathBuf>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    config: ExperimentConfig,
}

impl Context {
    fn output(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }

    fn manifest<'a>(&'a self, subcommand: &'static str, output: &'a Path, parameters: Value) -> RunManifest<'a> {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION"),
            subcommand,
            config: self.config_path.as_deref(),
            dataset: None,
            model: None,
            log: None,
            inputs: Vec::new(),
            output,
            seed: self.seed,
            excitation_seed: self.config.excitation.seed,
            training_seed: self.config.training.seed,
            parameters,
        }
    }
}

fn write_manifest(manifest: &RunManifest<'_>) -> Outcome {
    let mut path = manifest.output.as_os_str().to_owned();
    path.push(".manifest.json");
    let path = PathBuf::from(path);
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(&path, text).map_err(|source| Failure::Core(Error::Io { path, source }))
}

fn require(path: &Path) -> Outcome {
    if path.exists() {
        Ok(())
    } else {
        Err(Failure::MissingInput(path.to_path_buf()))
    }
}

fn emit(value: Value) {
    println!("{}", serde_json::to_string(&value).expect("json serializes"));
}

/// Sub-seeds drawn in a fixed order from one generator.
fn derive_seeds(master: u64) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (rng.next_u64(), rng.next_u64())
}

pub fn run(cli: Cli) -> Outcome {
    let mut config = match &cli.config {
        Some(path) => {
            require(path)?;
            ExperimentConfig::from_file(path)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(master) = cli.seed {
        let (excitation, training) = derive_seeds(master);
        config.excitation.seed = excitation;
        config.training.seed = training;
    }
    let mut ctx = Context {
        config_path: cli.config,
        seed: cli.seed,
        out: cli.out,
        config,
    };
    match cli.command {
        Command::Collect(a) => collect(&mut ctx, a),
        Command::Train(a) => train(&mut ctx, a),
        Command::Track(a) => track(&mut ctx, a),
        Command::Probe(a) => probe(&mut ctx, a),
        Command::Report(a) => report(&ctx, a),
    }
}

fn collect(ctx: &mut Context, a: CollectArgs) -> Outcome {
    let cfg = &mut ctx.config;
    let ex = &mut cfg.excitation;
    ex.duration = a.duration.unwrap_or(ex.duration);
    ex.kind = a.kind.unwrap_or(ex.kind);
    ex.amplitude = a.amplitude.unwrap_or(ex.amplitude);
    ex.offset = a.offset.unwrap_or(ex.offset);
    ex.band_low = a.band_low.unwrap_or(ex.band_low);
    ex.band_high = a.band_high.unwrap_or(ex.band_high);
    cfg.collection.samples = a.samples.unwrap_or(cfg.collection.samples);
    cfg.collection.estimated_model = a.estimated_model.unwrap_or(cfg.collection.estimated_model);
    cfg.validate()?;
    let info = cfg.collection_info();

    let out = ctx.output("dataset.csv");
    eprintln!("collecting {} s of {:?} excitation", info.excitation.duration, info.excitation.kind);
    let data = info.collect()?;
    save_dataset(&data, &out)?;

    let targets = data.recording.dataset.targets();
    let n = targets.len() as f64;
    let mean = targets.sum() / n;
    let std = (targets.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n).sqrt();
    emit(json!({
        "dataset": out,
        "rows": data.recording.dataset.len(),
        "fingerprint": data.fingerprint,
        "residual": { "mean": mean, "std": std, "min": targets.min(), "max": targets.max() },
    }));
    let mut m = ctx.manifest("collect", &out, json!({ "collection": info }));
    m.dataset = Some(&out);
    write_manifest(&m)
}

fn train(ctx: &mut Context, a: TrainArgs) -> Outcome {
    require(&a.dataset)?;
    let restarts = a.restarts.unwrap_or(ctx.config.training.restarts);
    if restarts == 0 {
        return Err(Error::Config("training.restarts must be at least 1".into()).into());
    }
    ctx.config.training.restarts = restarts;
    let data = load_dataset(&a.dataset, None)?;
    let seed = ctx.config.training.seed;
    eprintln!("training on {} points, {restarts} restarts, seed {seed}", data.recording.dataset.len());
    let model = train_model(&data, restarts, seed)?;
    let out = ctx.output("model.json");
    save_model(&model, &out)?;
    emit(json!({
        "model": out,
        "log_marginal_likelihood": model.log_likelihood,
        "hyperparameters": model.gp.hyperparameters(),
        "points": data.recording.dataset.len(),
    }));
    let mut m = ctx.manifest("train", &out, json!({ "restarts": restarts, "seed": seed }));
    m.dataset = Some(&a.dataset);
    m.model = Some(&out);
    write_manifest(&m)
}

/// Loads the model and checks it was trained on the configured robot.
fn open_model(ctx: &Context, path: &Path) -> Result<SavedModel, Failure> {
    require(path)?;
    let model = load_model(path, None)?;
    if model.collection.robot != ctx.config.robot {
        let expected = CollectionInfo {
            robot: ctx.config.robot.clone(),
            ..model.collection.clone()
        };
        eprintln!("model was trained on a different robot than the configured one");
        return Err(Error::FingerprintMismatch {
            found: model.fingerprint.clone(),
            expected: expected.fingerprint(),
        }
        .into());
    }
    Ok(model)
}

fn setup<'a>(ctx: &'a Context, model: &'a SavedModel, h: &'a dyn softblend::controller::EstimatedModel) -> Result<ExperimentSetup<'a>, Failure> {
    Ok(ExperimentSetup {
        robot: &ctx.config.robot,
        gp: &model.gp,
        model: h,
        pid: ctx.config.pid,
        blend: ctx.config.blend.resolve(model.gp.hyperparameters())?,
        dt: ctx.config.collection.dt,
    })
}

fn track(ctx: &mut Context, a: TrackArgs) -> Outcome {
    let t = &mut ctx.config.tracking;
    t.reference.offset = a.offset.unwrap_or(t.reference.offset);
    t.reference.amplitude = a.amplitude.unwrap_or(t.reference.amplitude);
    t.reference.frequency = a.frequency.unwrap_or(t.reference.frequency);
    t.duration = a.duration.unwrap_or(t.duration);
    if a.mirrored {
        t.reference = t.reference.mirrored();
    }
    ctx.config.validate()?;
    let model = open_model(ctx, &a.model)?;
    let h = model.collection.settings.estimated_model.build(&ctx.config.robot);
    let setup = setup(ctx, &model, h.as_ref())?;
    let tracking = ctx.config.tracking;
    let out = ctx.output("track.csv");

    let result = run_tracking(&setup, &tracking.reference, tracking.duration, None);
    let log: &TrajectoryLog = match &result {
        Ok(run) => &run.log,
        Err(f) => &f.partial,
    };
    save_log(log, &out)?;
    let mut m = ctx.manifest("track", &out, json!({ "tracking": tracking, "blend": setup.blend, "pid": setup.pid }));
    m.model = Some(&a.model);
    m.log = Some(&out);
    write_manifest(&m)?;
    let run = result.map_err(|f| {
        eprintln!("run stopped after {} steps; partial log written to {}", f.partial.rows.len(), out.display());
        Failure::Core(f.error)
    })?;
    emit(json!({ "log": out, "metrics": run.metrics }));
    Ok(())
}

fn probe(ctx: &mut Context, a: ProbeArgs) -> Outcome {
    let p = &mut ctx.config.probe;
    p.torque = a.torque.unwrap_or(p.torque);
    p.operating_point = a.operating_point.unwrap_or(p.operating_point);
    p.segment_index = a.segment.unwrap_or(p.segment_index);
    ctx.config.validate()?;
    let model = open_model(ctx, &a.model)?;
    let h = model.collection.settings.estimated_model.build(&ctx.config.robot);
    let setup = setup(ctx, &model, h.as_ref())?;
    let report = run_stiffness_probe(&setup, &ctx.config.probe)?;
    let out = ctx.output("probe.json");
    save_report(&report, &out)?;
    if report.compliance_ratio.is_none() {
        eprintln!("out-region deflection is zero; compliance ratio undefined");
    }
    emit(json!({
        "report": out,
        "in_region_deflection": report.in_region.peak_deflection,
        "out_region_deflection": report.out_region.peak_deflection,
        "compliance_ratio": ratio_value(&report),
    }));
    let mut m = ctx.manifest("probe", &out, json!({ "probe": ctx.config.probe, "blend": setup.blend }));
    m.model = Some(&a.model);
    write_manifest(&m)
}

fn ratio_value(report: &StiffnessReport) -> Value {
    match report.compliance_ratio {
        Some(r) => json!(r),
        None => json!("undefined"),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| x.to_string())
}

/// Tab-separated metric table on stdout; long-format CSV of every log
/// (`source,time,y_desired,y_actual,alpha`) to the output file.
fn report(ctx: &Context, a: ReportArgs) -> Outcome {
    if a.logs.is_empty() && a.probes.is_empty() {
        return Err(Error::Config("report needs at least one --log or --probe file".into()).into());
    }
    for p in a.logs.iter().chain(&a.probes) {
        require(p)?;
    }
    let out = ctx.output("report.csv");
    let mut plot = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| Failure::Core(Error::MalformedFile { path: out.clone(), reason: e.to_string() });
    plot.write_record(["source", "time", "y_desired", "y_actual", "alpha"]).map_err(csv_err)?;

    println!("source\trms_error\tpeak_error\tmean_alpha\tmean_alpha_in_region\tmean_alpha_out_region\tin_region_deflection\tout_region_deflection\tcompliance_ratio");
    for path in &a.logs {
        let log = load_log(path)?;
        let m = log.metrics();
        println!(
            "{}\t{}\t{}\t{}\t{}\t{}\t-\t-\t-",
            path.display(),
            m.rms_error,
            m.peak_error,
            m.mean_alpha,
            fmt_opt(m.mean_alpha_in_region),
            fmt_opt(m.mean_alpha_out_region)
        );
        let source = path.display().to_string();
        for r in &log.rows {
            plot.write_record([
                source.clone(),
                r.time.to_string(),
                r.y_desired.to_string(),
                r.y_actual.to_string(),
                r.alpha.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    for path in &a.probes {
        let r = load_report(path)?;
        let ratio = r.compliance_ratio.map_or_else(|| "undefined".into(), |x| x.to_string());
        println!(
            "{}\t-\t-\t-\t-\t-\t{}\t{}\t{ratio}",
            path.display(),
            r.in_region.peak_deflection,
            r.out_region.peak_deflection
        );
    }
    let bytes = plot
        .into_inner()
        .map_err(|e| Failure::Core(Error::MalformedFile { path: out.clone(), reason: e.to_string() }))?;
    std::fs::write(&out, bytes).map_err(|source| Failure::Core(Error::Io { path: out.clone(), source }))?;
    let mut m = ctx.manifest("report", &out, json!({ "logs": a.logs, "probes": a.probes }));
    m.inputs = a.logs.iter().chain(&a.probes).map(PathBuf::as_path).collect();
    write_manifest(&m)
}
