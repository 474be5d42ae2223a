pub mod classify;
pub mod eval;
pub mod fit;
pub mod simulate;
pub mod totr;

use ectensor::{DensityGenerator, ErrorModel};

use crate::error::{usage, CliResult};

pub fn parse_generator(s: &str) -> CliResult<DensityGenerator> {
    Ok(s.parse::<DensityGenerator>()?)
}

/// Error law for the EM-type fits: `tvn`, `gsm` (with `--gen gsm:a,b`, default
/// `gsm:3,15`) or `t` (degrees of freedom estimated, started at `--gen t:nu` or 10).
pub fn error_model(model: &str, gen: Option<&str>) -> CliResult<ErrorModel> {
    let gen = gen.map(parse_generator).transpose()?;
    match model {
        "tvn" | "normal" => Ok(ErrorModel::fixed(DensityGenerator::Normal)),
        "gsm" => Ok(ErrorModel::fixed(gen.unwrap_or(DensityGenerator::GammaScaleMixture { a: 3.0, b: 15.0 }))),
        "t" => match gen {
            None => Ok(ErrorModel::estimate_nu(10.0)),
            Some(DensityGenerator::GammaScaleMixture { a, b }) if a == b => Ok(ErrorModel::estimate_nu(a)),
            Some(g) => usage(format!("--model t starts from a Student-t generator (t:nu), got {g}")),
        },
        other => usage(format!("unknown error model {other:?} (expected tvn, gsm or t)")),
    }
}
