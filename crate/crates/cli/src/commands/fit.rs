use std::path::{Path, PathBuf};

use clap::Args;
use ectensor::estimation::{fit_gsm, fit_tvn, fit_tyler, fit_uncorrelated_ec};
use ectensor::{DensityGenerator, EcParams, FitReport, Tensor};
use serde::Serialize;

use super::{error_model, parse_generator};
use crate::config::{ConfigFile, FitFlags};
use crate::dataset::{self, write_json};
use crate::error::{usage, CliResult};

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Dataset manifest; the `y` tensors are fitted.
    #[arg(long)]
    pub data: PathBuf,
    /// `tvn`, `uncorrelated-ec`, `gsm`, `t` or `tyler`.
    #[arg(long)]
    pub model: Option<String>,
    /// Generator for `uncorrelated-ec` and `gsm`, or the starting `t:nu` for `t`.
    #[arg(long = "gen")]
    pub generator: Option<String>,
    /// Estimate a location in Tyler's fit (zero location otherwise).
    #[arg(long)]
    pub location: bool,
    #[command(flatten)]
    pub fit: FitFlags,
    /// Output parameter manifest; the fit report goes to `<stem>_report.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct TylerReport {
    model: &'static str,
    /// Tyler's estimator determines the scale matrices only; `sigma2` in the manifest is fixed at 1.
    shape_only: bool,
    angular_loglik: Option<f64>,
    loglik_trace: Vec<f64>,
    iterations: usize,
    converged: bool,
    deltas: Vec<f64>,
    skipped_samples: usize,
}

pub fn report_path(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    out.with_file_name(format!("{stem}_{suffix}"))
}

fn print_summary(model: &str, r: &FitReport) {
    let mut line = format!(
        "model={model} sigma2={:.10e} loglik={} iterations={} converged={}",
        r.params.sigma2(),
        r.final_loglik().map_or("n/a".into(), |v| format!("{v:.10e}")),
        r.iterations,
        r.converged
    );
    if let Some(nu) = r.nu_trace.last() {
        line.push_str(&format!(" nu={nu:.6}"));
    }
    println!("{line}");
}

pub fn run(args: &FitArgs, cfg: &ConfigFile) -> CliResult<()> {
    let data = dataset::load(&args.data)?;
    let ys = data.responses()?;
    let opts = args.fit.resolve(cfg, cfg.seed)?;
    let model = args.model.as_deref().or(cfg.model.as_deref()).unwrap_or("tvn");
    let gen = args.generator.as_deref().or(cfg.generator.as_deref());
    let report_file = report_path(&args.out, "report.json");
    let report = match model {
        "tyler" => {
            let fit = fit_tyler(ys, &opts, args.location)?;
            let mean = fit.mean.clone().unwrap_or_else(|| Tensor::zeros(ys[0].shape()));
            EcParams::new(mean, fit.scales.clone(), 1.0, DensityGenerator::Normal)?.save(&args.out)?;
            println!(
                "model=tyler angular_loglik={} iterations={} converged={}",
                fit.loglik_trace.last().map_or("n/a".into(), |v| format!("{v:.10e}")),
                fit.iterations,
                fit.converged
            );
            return write_json(
                &report_file,
                &TylerReport {
                    model: "tyler",
                    shape_only: true,
                    angular_loglik: fit.loglik_trace.last().copied(),
                    loglik_trace: fit.loglik_trace,
                    iterations: fit.iterations,
                    converged: fit.converged,
                    deltas: fit.deltas,
                    skipped_samples: fit.skipped_samples,
                },
            );
        }
        "tvn" | "normal" => fit_tvn(ys, &opts)?,
        "uncorrelated-ec" => {
            let Some(g) = gen else { return usage("--model uncorrelated-ec needs --gen") };
            fit_uncorrelated_ec(ys, parse_generator(g)?, &opts)?
        }
        "gsm" | "t" => fit_gsm(ys, error_model(model, gen)?, &opts)?,
        other => return usage(format!("unknown model {other:?} (expected tvn, uncorrelated-ec, gsm, t or tyler)")),
    };
    report.params.save(&args.out)?;
    print_summary(model, &report);
    write_json(&report_file, &report.summary())
}
