//! Collect, train, track in and out of the training region, and probe
//! stiffness on the default (or a given TOML) configuration.
//!
//!     cargo run --release -p softblend --example pipeline [config.toml]

use std::path::Path;

use softblend::config::ExperimentConfig;
use softblend::harness::{run_stiffness_probe, run_tracking, train_model, ExperimentSetup};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = match std::env::args().nth(1) {
        Some(p) => ExperimentConfig::from_file(Path::new(&p))?,
        None => ExperimentConfig::default(),
    };
    let data = cfg.collection_info().collect()?;
    let model = train_model(&data, cfg.training.restarts, cfg.training.seed)?;
    println!("trained on {} points, lml {:.3}", model.gp.dataset().len(), model.log_likelihood);

    let h = data.info.settings.estimated_model.build(&cfg.robot);
    let setup = ExperimentSetup {
        robot: &cfg.robot,
        gp: &model.gp,
        model: h.as_ref(),
        pid: cfg.pid,
        blend: cfg.blend.resolve(model.gp.hyperparameters())?,
        dt: cfg.collection.dt,
    };
    let r = cfg.tracking.reference;
    for (name, reference) in [("in-region", r), ("mirrored", r.mirrored())] {
        let run = run_tracking(&setup, &reference, cfg.tracking.duration, None).map_err(|f| f.error)?;
        println!("{name}: rms {:.3e} rad, mean alpha {:.3}", run.metrics.rms_error, run.metrics.mean_alpha);
    }
    let probe = run_stiffness_probe(&setup, &cfg.probe)?;
    match probe.compliance_ratio {
        Some(ratio) => println!("compliance ratio {ratio:.2}"),
        None => println!("compliance ratio undefined"),
    }
    Ok(())
}
