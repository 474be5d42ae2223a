use std::path::PathBuf;

use clap::Args;
use ectensor::sim::random_scale_matrix;
use ectensor::{CpCoefficient, DensityGenerator, EcParams, Matrix, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::parse_generator;
use crate::config::{parse_list, require_seed, ConfigFile};
use crate::dataset;
use crate::error::{usage, CliResult};

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Parameter manifest to sample from (overrides --shape/--gen/--sigma2).
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Tensor shape, e.g. `4,5,3`.
    #[arg(long)]
    pub shape: Option<String>,
    /// Density generator, e.g. `normal`, `gsm:3,15`, `t:4`.
    #[arg(long = "gen")]
    pub generator: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    /// Draw each scale matrix from a Wishart law (condition number at most 50,
    /// unit (1,1) entry) instead of using identities.
    #[arg(long)]
    pub random_scales: bool,
    /// Samples per class.
    #[arg(long)]
    pub n: usize,
    /// Number of classes; class `g` has every mean entry shifted by `g * separation * sigma`.
    #[arg(long, default_value_t = 1)]
    pub classes: usize,
    #[arg(long, default_value_t = 3.0)]
    pub separation: f64,
    /// Covariate shape for regression data `Y = <X | B> + E`, e.g. `4,3`.
    #[arg(long)]
    pub covariates: Option<String>,
    /// CP rank of the random coefficient (full Gaussian coefficient if omitted).
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn gaussian_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape, |_| StandardNormal.sample(rng))
}

pub fn run(args: &SimulateArgs, cfg: &ConfigFile) -> CliResult<()> {
    let seed = require_seed(args.seed, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = match &args.params {
        Some(p) => EcParams::load(p).map_err(|e| crate::error::CliError::at(p, e))?,
        None => {
            let Some(shape) = args.shape.as_ref() else { return usage("simulate needs --params or --shape") };
            let shape = parse_list::<usize>(shape, "--shape")?;
            let gen = match args.generator.as_ref().or(cfg.generator.as_ref()) {
                Some(g) => parse_generator(g)?,
                None => DensityGenerator::Normal,
            };
            let scales = shape
                .iter()
                .map(|&m| if args.random_scales { random_scale_matrix(m, &mut rng) } else { Ok(Matrix::identity(m, m)) })
                .collect::<ectensor::Result<Vec<_>>>()?;
            EcParams::new(Tensor::zeros(&shape), scales, args.sigma2, gen)?
        }
    };
    if args.classes == 0 {
        return usage("--classes must be at least 1");
    }
    std::fs::create_dir_all(&args.out).map_err(|source| crate::error::CliError::Io { path: args.out.clone(), source })?;

    let coef = match &args.covariates {
        None => None,
        Some(h) => {
            let h = parse_list::<usize>(h, "--covariates")?;
            let b = match args.rank {
                Some(0) => return usage("--rank must be at least 1"),
                Some(r) => {
                    let mut factor = |d: usize| Matrix::from_fn(d, r, |_, _| StandardNormal.sample(&mut rng));
                    let u = h.iter().map(|&d| factor(d)).collect();
                    let v = params.shape().iter().map(|&d| factor(d)).collect();
                    CpCoefficient::new(u, v)?.to_tensor()
                }
                None => {
                    let mut shape = h.clone();
                    shape.extend_from_slice(params.shape());
                    gaussian_tensor(&shape, &mut rng)
                }
            };
            ectensor::io::save_tensor(args.out.join("coef.ten"), &b)?;
            Some((h, b))
        }
    };

    let sd = params.sigma2().sqrt();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut labels = Vec::new();
    for g in 0..args.classes {
        let shift = g as f64 * args.separation * sd;
        let class = params.clone().with_mean(params.mean().add(&Tensor::filled(params.shape(), shift))?)?;
        let name = if args.classes == 1 { "truth.json".to_string() } else { format!("truth_class{g}.json") };
        class.save(args.out.join(name))?;
        for mut y in class.sample(args.n, &mut rng)? {
            if let Some((h, b)) = &coef {
                let x = gaussian_tensor(h, &mut rng);
                y = y.add(&x.partial_contraction(b)?)?;
                xs.push(x);
            }
            ys.push(y);
            labels.push(g.to_string());
        }
    }
    let path = dataset::write(
        &args.out,
        coef.as_ref().map(|_| xs.as_slice()),
        Some(&ys),
        (args.classes > 1).then_some(labels.as_slice()),
    )?;
    println!("wrote {} samples to {}", ys.len(), path.display());
    Ok(())
}
