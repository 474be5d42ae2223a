use std::path::PathBuf;

use clap::{Args, Subcommand};
use ectensor::classify::{train_lda, train_qda};
use ectensor::ClassifierModel;

use super::error_model;
use crate::config::{parse_list, ConfigFile, FitFlags};
use crate::dataset;
use crate::error::{usage, CliError, CliResult};

#[derive(Subcommand, Debug)]
pub enum ClassifyCommand {
    /// Fit a discriminant rule to labelled samples.
    Train(TrainArgs),
    /// Score and label samples with a fitted rule.
    Predict(PredictArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// `lda` (shared scatter) or `qda` (per-class fits).
    #[arg(long, default_value = "qda")]
    pub kind: String,
    /// Error law: `tvn`, `gsm` or `t`.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long = "gen")]
    pub generator: Option<String>,
    /// Class priors in label order, e.g. `0.5,0.5` (empirical frequencies if omitted).
    #[arg(long)]
    pub priors: Option<String>,
    #[command(flatten)]
    pub fit: FitFlags,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Fitted classifier manifest.
    #[arg(long)]
    pub classifier: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Replace the stored priors.
    #[arg(long)]
    pub priors: Option<String>,
    /// CSV of `index,label,predicted,score`; `score` is the log-likelihood ratio
    /// of the second class against the first.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Distinct labels, in numeric order when all are numbers and lexicographic otherwise.
fn class_names(labels: &[String]) -> Vec<String> {
    let mut names: Vec<String> = labels.to_vec();
    names.sort();
    names.dedup();
    if names.iter().all(|l| l.parse::<f64>().is_ok()) {
        names.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
    }
    names
}

pub fn run(cmd: &ClassifyCommand, cfg: &ConfigFile) -> CliResult<()> {
    match cmd {
        ClassifyCommand::Train(a) => train(a, cfg),
        ClassifyCommand::Predict(a) => predict(a, cfg),
    }
}

fn train(args: &TrainArgs, cfg: &ConfigFile) -> CliResult<()> {
    let data = dataset::load(&args.data)?;
    let ys = data.responses()?;
    let labels = data.require_labels()?;
    let names = class_names(labels);
    if names.len() < 2 {
        return usage("training needs at least two classes");
    }
    let idx: Vec<usize> = labels.iter().map(|l| names.iter().position(|n| n == l).unwrap()).collect();
    let opts = args.fit.resolve(cfg, cfg.seed)?;
    let model = error_model(
        args.model.as_deref().or(cfg.model.as_deref()).unwrap_or("tvn"),
        args.generator.as_deref().or(cfg.generator.as_deref()),
    )?;
    let priors = args.priors.as_ref().or(cfg.priors.as_ref()).map(|p| parse_list::<f64>(p, "--priors")).transpose()?;
    let clf = match args.kind.as_str() {
        "lda" => train_lda(ys, &idx, names.len(), model, priors.as_deref(), &opts)?,
        "qda" => train_qda(ys, &idx, names.len(), model, priors.as_deref(), &opts)?,
        other => return usage(format!("unknown discriminant kind {other:?} (expected lda or qda)")),
    }
    .with_labels(names.clone())?;
    clf.save(&args.out)?;
    println!("trained {} classifier on {} samples, classes {}", args.kind, ys.len(), names.join(","));
    Ok(())
}

fn predict(args: &PredictArgs, cfg: &ConfigFile) -> CliResult<()> {
    let mut clf = ClassifierModel::load(&args.classifier).map_err(|e| CliError::at(&args.classifier, e))?;
    if let Some(p) = args.priors.as_ref().or(cfg.priors.as_ref()) {
        clf = clf.with_priors(&parse_list::<f64>(p, "--priors")?)?;
    }
    let data = dataset::load(&args.data)?;
    let ys = data.responses()?;
    let truth = data.labels.as_deref();
    let mut writer = args.out.as_ref().map(csv::Writer::from_path).transpose()?;
    if let Some(w) = writer.as_mut() {
        w.write_record(["index", "label", "predicted", "score"])?;
    }
    let mut correct = 0usize;
    for (i, y) in ys.iter().enumerate() {
        let predicted = &clf.labels()[clf.predict(y)?];
        let score = if clf.n_classes() == 2 { clf.llr(y, 1, 0)?.to_string() } else { String::new() };
        let label = truth.map_or("", |t| t[i].as_str());
        if truth.is_some() && label == predicted {
            correct += 1;
        }
        if let Some(w) = writer.as_mut() {
            w.write_record([i.to_string().as_str(), label, predicted, &score])?;
        }
    }
    if let (Some(w), Some(path)) = (writer.as_mut(), args.out.as_ref()) {
        w.flush().map_err(|e| CliError::Io { path: path.clone(), source: e })?;
    }
    if truth.is_some() {
        println!("accuracy={:.6} ({correct}/{})", correct as f64 / ys.len() as f64, ys.len());
    } else {
        println!("scored {} samples", ys.len());
    }
    Ok(())
}
