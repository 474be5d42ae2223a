use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use ectensor::totr::fit_totr;
use ectensor::{CoefFormat, ToTRModel};

use super::error_model;
use crate::config::{parse_list, ConfigFile, FitFlags};
use crate::dataset::{self, write_json};
use crate::error::{CliError, CliResult};

#[derive(Args, Debug)]
pub struct TotrArgs {
    /// Dataset manifest with `x` and `y` entries.
    #[arg(long)]
    pub data: PathBuf,
    /// `full` or `cp:R`.
    #[arg(long)]
    pub format: Option<String>,
    /// Fit CP coefficients of each listed rank and keep the lowest BIC, e.g. `1,2,3,5,8`.
    #[arg(long)]
    pub ranks: Option<String>,
    /// Error law: `tvn`, `gsm` or `t`.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long = "gen")]
    pub generator: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub fit: FitFlags,
    /// Output model manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional CSV with one row per fitted format.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

struct Row {
    format: CoefFormat,
    params: usize,
    loglik: f64,
    bic: f64,
}

pub fn run(args: &TotrArgs, cfg: &ConfigFile) -> CliResult<()> {
    let data = dataset::load(&args.data)?;
    let (xs, ys) = (data.covariates()?, data.responses()?);
    let opts = args.fit.resolve(cfg, args.seed.or(cfg.seed))?;
    let model = error_model(
        args.model.as_deref().or(cfg.model.as_deref()).unwrap_or("tvn"),
        args.generator.as_deref().or(cfg.generator.as_deref()),
    )?;
    let formats: Vec<CoefFormat> = match &args.ranks {
        Some(r) => parse_list::<usize>(r, "--ranks")?.into_iter().map(|rank| CoefFormat::Cp { rank }).collect(),
        None => vec![args.format.as_deref().or(cfg.format.as_deref()).unwrap_or("full").parse()?],
    };
    let mut rows = Vec::new();
    let mut best: Option<(f64, ToTRModel, ectensor::FitReport)> = None;
    for format in formats {
        let (fit, report) = fit_totr(xs, ys, format, model, &opts)?;
        let loglik = fit.loglik(xs, ys)?;
        let bic = fit.bic(xs, ys)?;
        rows.push(Row { format, params: fit.num_params(), loglik, bic });
        if best.as_ref().is_none_or(|(b, _, _)| bic < *b) {
            best = Some((bic, fit, report));
        }
    }
    let (best_bic, fit, report) = best.expect("at least one format");

    let mut out = std::io::stdout().lock();
    let w = |e: std::io::Error| CliError::Io { path: "<stdout>".into(), source: e };
    writeln!(out, "{:<8} {:>8} {:>18} {:>18}", "format", "params", "loglik", "bic").map_err(w)?;
    for r in &rows {
        let mark = if r.bic == best_bic { " *" } else { "" };
        writeln!(out, "{:<8} {:>8} {:>18.6} {:>18.6}{mark}", r.format.to_string(), r.params, r.loglik, r.bic)
            .map_err(w)?;
    }
    if let Some(path) = &args.table {
        let mut csv = csv::Writer::from_path(path)?;
        csv.write_record(["format", "params", "loglik", "bic", "lowest"])?;
        for r in &rows {
            csv.write_record([
                r.format.to_string(),
                r.params.to_string(),
                r.loglik.to_string(),
                r.bic.to_string(),
                (r.bic == best_bic).to_string(),
            ])?;
        }
        csv.flush().map_err(|e| CliError::Io { path: path.clone(), source: e })?;
    }
    fit.save(&args.out)?;
    write_json(&super::fit::report_path(&args.out, "report.json"), &report.summary())
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Fitted regression manifest.
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset manifest with `x` entries (and optionally `y`, for the error report).
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for the predicted responses.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn predict(args: &PredictArgs) -> CliResult<()> {
    let model = ToTRModel::load(&args.model).map_err(|e| CliError::at(&args.model, e))?;
    let data = dataset::load(&args.data)?;
    let xs = data.covariates()?;
    let preds = xs.iter().map(|x| model.predict(x)).collect::<ectensor::Result<Vec<_>>>()?;
    let path = dataset::write(&args.out, Some(xs), Some(&preds), data.labels.as_deref())?;
    println!("wrote {} predictions to {}", preds.len(), path.display());
    if let Some(ys) = &data.ys {
        let mut sq = 0.0;
        let mut count = 0usize;
        for (p, y) in preds.iter().zip(ys) {
            sq += p.sub(y)?.norm().powi(2);
            count += y.numel();
        }
        println!("rmse={:.10e}", (sq / count.max(1) as f64).sqrt());
    }
    Ok(())
}
