//! Save/load round trips for fitted models.

use ectensor::classify::{train_lda, train_qda};
use ectensor::totr::fit_totr;
use ectensor::{
    ClassifierModel, CoefFormat, DensityGenerator, EcParams, ErrorModel, FitOptions, Matrix, Tensor, ToTRModel,
};

fn sample_params() -> EcParams {
    let s1 = Matrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]);
    let s2 = Matrix::from_row_slice(3, 3, &[1.0, 0.1, 0.0, 0.1, 1.5, 0.2, 0.0, 0.2, 0.7]);
    let mean = Tensor::from_fn(&[2, 3], |i| i[0] as f64 - 0.5 * i[1] as f64);
    EcParams::new(mean, vec![s1, s2], 0.8, DensityGenerator::student_t(5.0)).unwrap()
}

#[test]
fn ec_params_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let p = sample_params();
    let path = dir.path().join("params.json");
    p.save(&path).unwrap();
    let q = EcParams::load(&path).unwrap();
    assert_eq!(p, q);
}

#[test]
fn totr_models_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let noise = sample_params().with_mean(Tensor::zeros(&[2, 3])).unwrap();
    let xs: Vec<Tensor> = (0..40).map(|i| Tensor::from_fn(&[3], |j| ((i * 3 + j[0] * 5) % 7) as f64 - 3.0)).collect();
    let errs = noise.sample_seeded(40, 3).unwrap();
    let b = Tensor::from_fn(&[3, 2, 3], |i| (i[0] + 2 * i[1]) as f64 - i[2] as f64);
    let ys: Vec<Tensor> = xs.iter().zip(&errs).map(|(x, e)| x.partial_contraction(&b).unwrap().add(e).unwrap()).collect();
    for format in [CoefFormat::Full, CoefFormat::Cp { rank: 2 }] {
        let (model, _) = fit_totr(&xs, &ys, format, ErrorModel::estimate_nu(8.0), &FitOptions::default()).unwrap();
        let path = dir.path().join(format!("model_{}.json", format.to_string().replace(':', "")));
        model.save(&path).unwrap();
        let back = ToTRModel::load(&path).unwrap();
        assert_eq!(back.coefficient.format(), format);
        assert_eq!(back.coefficient.to_tensor(), model.coefficient.to_tensor());
        assert_eq!(back.noise, model.noise);
        assert_eq!(back.loglik(&xs, &ys).unwrap(), model.loglik(&xs, &ys).unwrap());
    }
}

#[test]
fn classifiers_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let p = sample_params();
    let shifted = p.clone().with_mean(p.mean().scaled(-1.0)).unwrap();
    let mut samples = p.sample_seeded(30, 1).unwrap();
    samples.extend(shifted.sample_seeded(30, 2).unwrap());
    let labels: Vec<usize> = (0..60).map(|i| i / 30).collect();
    let opts = FitOptions::default();
    let lda = train_lda(&samples, &labels, 2, ErrorModel::fixed(DensityGenerator::Normal), None, &opts).unwrap();
    let qda = train_qda(&samples, &labels, 2, ErrorModel::estimate_nu(8.0), Some(&[0.3, 0.7]), &opts).unwrap();
    for (name, model) in [("lda", lda), ("qda", qda)] {
        let path = dir.path().join(format!("{name}.json"));
        model.save(&path).unwrap();
        let back = ClassifierModel::load(&path).unwrap();
        assert_eq!(back.kind(), model.kind());
        assert_eq!(back.priors(), model.priors());
        // Reloading renormalizes, which may move the last bit.
        for y in &samples[..5] {
            for (a, b) in back.log_scores(y).unwrap().iter().zip(model.log_scores(y).unwrap()) {
                assert!((a - b).abs() <= 1e-12 * b.abs());
            }
        }
    }
}

#[test]
fn loading_a_missing_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert!(EcParams::load(dir.path().join("nope.json")).is_err());
    std::fs::write(dir.path().join("bad.json"), "{not json").unwrap();
    assert!(ToTRModel::load(dir.path().join("bad.json")).is_err());
}
