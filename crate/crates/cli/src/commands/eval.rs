use std::path::PathBuf;

use clap::Args;
use ectensor::classify::roc_pr;

use crate::error::{usage, CliError, CliResult};

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// CSV with `score` and `label` columns.
    #[arg(long)]
    pub scores: PathBuf,
    /// Label value of the positive class (`true` is also accepted as positive).
    #[arg(long, default_value = "1")]
    pub positive: String,
    /// Optional CSV of the curves as `curve,x,y` rows.
    #[arg(long)]
    pub curves: Option<PathBuf>,
}

pub fn run(args: &EvalArgs) -> CliResult<()> {
    let mut reader = csv::Reader::from_path(&args.scores)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> CliResult<usize> {
        match headers.iter().position(|h| h.trim() == name) {
            Some(i) => Ok(i),
            None => usage(format!("{}: missing column {name:?}", args.scores.display())),
        }
    };
    let (si, li) = (col("score")?, col("label")?);
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let s = rec.get(si).unwrap_or("").trim();
        let score: f64 = match s.parse() {
            Ok(v) => v,
            Err(_) => return usage(format!("{}: row {}: bad score {s:?}", args.scores.display(), row + 1)),
        };
        let l = rec.get(li).unwrap_or("").trim();
        scores.push(score);
        labels.push(l == args.positive || l.eq_ignore_ascii_case("true"));
    }
    let r = roc_pr(&scores, &labels)?;
    println!("auc_roc={:.10}", r.auc_roc);
    println!("auc_pr={:.10}", r.auc_pr);
    if let Some(path) = &args.curves {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["curve", "x", "y"])?;
        for (name, pts) in [("roc", &r.roc), ("pr", &r.pr)] {
            for (x, y) in pts.iter() {
                w.write_record([name, &x.to_string(), &y.to_string()])?;
            }
        }
        w.flush().map_err(|e| CliError::Io { path: path.clone(), source: e })?;
    }
    Ok(())
}
