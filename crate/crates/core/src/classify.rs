//! Discriminant analysis with EC class-conditional laws, and ROC/PR evaluation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dist::{Density, EcParams};
use crate::error::{Error, Result};
use crate::estimation::{fit_gsm, ErrorModel, FitOptions};
use crate::tensor::Tensor;
use crate::totr::{fit_totr, CoefFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscriminantKind {
    /// Shared scale matrices, `sigma2` and generator.
    Lda,
    /// Separate fits per class.
    Qda,
}

/// Fitted discriminant rule: assign `y` to `argmax_g log eta_g + log f_g(y)`.
#[derive(Debug, Clone)]
pub struct ClassifierModel {
    kind: DiscriminantKind,
    labels: Vec<String>,
    classes: Vec<EcParams>,
    densities: Vec<Density>,
    priors: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ClassifierManifest {
    kind: DiscriminantKind,
    labels: Vec<String>,
    priors: Vec<f64>,
    classes: Vec<String>,
}

impl ClassifierModel {
    pub fn new(kind: DiscriminantKind, labels: Vec<String>, classes: Vec<EcParams>, priors: Vec<f64>) -> Result<Self> {
        if classes.is_empty() || labels.len() != classes.len() {
            return Err(Error::Class(format!("{} labels for {} classes", labels.len(), classes.len())));
        }
        if classes.iter().any(|c| c.shape() != classes[0].shape()) {
            return Err(Error::ShapeMismatch("class laws have different shapes".into()));
        }
        let priors = check_priors(&priors, classes.len())?;
        let densities = classes.iter().map(EcParams::density).collect::<Result<_>>()?;
        Ok(ClassifierModel { kind, labels, classes, densities, priors })
    }

    pub fn kind(&self) -> DiscriminantKind {
        self.kind
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_params(&self) -> &[EcParams] {
        &self.classes
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    /// Replaces the class names.
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.classes.len() {
            return Err(Error::Class(format!("{} labels for {} classes", labels.len(), self.classes.len())));
        }
        self.labels = labels;
        Ok(self)
    }

    /// Replaces the priors (normalized to sum to one).
    pub fn with_priors(mut self, priors: &[f64]) -> Result<Self> {
        self.priors = check_priors(priors, self.classes.len())?;
        Ok(self)
    }

    /// `log eta_g + log f_g(y)` for each class.
    pub fn log_scores(&self, y: &Tensor) -> Result<Vec<f64>> {
        self.densities.iter().zip(&self.priors).map(|(d, &p)| Ok(p.ln() + d.log_pdf(y)?)).collect()
    }

    /// Index of the highest score; ties go to the lowest index.
    pub fn predict(&self, y: &Tensor) -> Result<usize> {
        Ok(argmax(&self.log_scores(y)?))
    }

    /// `log f_g(y) - log f_h(y) + log(eta_g / eta_h)`.
    pub fn llr(&self, y: &Tensor, g: usize, h: usize) -> Result<f64> {
        let n = self.n_classes();
        if g >= n || h >= n {
            return Err(Error::Class(format!("class index out of range ({g}, {h}) for {n} classes")));
        }
        let s = self.log_scores(y)?;
        Ok(s[g] - s[h])
    }

    /// Writes `<stem>.json` and one parameter manifest per class.
    pub fn save(&self, json_path: impl AsRef<Path>) -> Result<()> {
        let json_path = json_path.as_ref();
        let dir = json_path.parent().unwrap_or_else(|| Path::new(""));
        let stem = json_path.file_stem().and_then(|s| s.to_str()).unwrap_or("classifier").to_string();
        let mut names = vec![];
        for (g, c) in self.classes.iter().enumerate() {
            let name = format!("{stem}_class{}.json", g + 1);
            c.save(dir.join(&name))?;
            names.push(name);
        }
        let manifest =
            ClassifierManifest { kind: self.kind, labels: self.labels.clone(), priors: self.priors.clone(), classes: names };
        std::fs::write(json_path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load(json_path: impl AsRef<Path>) -> Result<Self> {
        let json_path = json_path.as_ref();
        let dir = json_path.parent().unwrap_or_else(|| Path::new(""));
        let manifest: ClassifierManifest = serde_json::from_str(&std::fs::read_to_string(json_path)?)?;
        let classes = manifest.classes.iter().map(|c| EcParams::load(dir.join(c))).collect::<Result<_>>()?;
        ClassifierModel::new(manifest.kind, manifest.labels, classes, manifest.priors)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn check_priors(priors: &[f64], g: usize) -> Result<Vec<f64>> {
    if priors.len() != g {
        return Err(Error::Class(format!("{} priors for {g} classes", priors.len())));
    }
    if priors.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
        return Err(Error::Class("priors must be positive".into()));
    }
    let s: f64 = priors.iter().sum();
    Ok(priors.iter().map(|p| p / s).collect())
}

fn class_counts(labels: &[usize], n_classes: usize, n: usize) -> Result<Vec<usize>> {
    if labels.len() != n {
        return Err(Error::Class(format!("{} labels for {n} samples", labels.len())));
    }
    let mut counts = vec![0usize; n_classes];
    for &l in labels {
        if l >= n_classes {
            return Err(Error::Class(format!("label {l} out of range for {n_classes} classes")));
        }
        counts[l] += 1;
    }
    if let Some(g) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Class(format!("class {g} has no samples")));
    }
    Ok(counts)
}

fn resolve_priors(priors: Option<&[f64]>, counts: &[usize]) -> Vec<f64> {
    match priors {
        Some(p) => p.to_vec(),
        None => counts.iter().map(|&c| c as f64).collect(),
    }
}

fn default_labels(g: usize) -> Vec<String> {
    (0..g).map(|i| i.to_string()).collect()
}

/// Linear discriminant rule: a tensor-on-tensor regression on one-hot class
/// indicators gives the class means (slices of `B`) and the shared noise law.
/// Priors default to the empirical class frequencies.
pub fn train_lda(
    samples: &[Tensor],
    labels: &[usize],
    n_classes: usize,
    model: ErrorModel,
    priors: Option<&[f64]>,
    opts: &FitOptions,
) -> Result<ClassifierModel> {
    let counts = class_counts(labels, n_classes, samples.len())?;
    let xs: Vec<Tensor> = labels
        .iter()
        .map(|&l| Tensor::from_fn(&[n_classes], |i| if i[0] == l { 1.0 } else { 0.0 }))
        .collect();
    let (fit, _) = fit_totr(&xs, samples, CoefFormat::Full, model, opts)?;
    let b = fit.coefficient.to_tensor();
    let shape = samples[0].shape().to_vec();
    let classes = (0..n_classes)
        .map(|g| {
            let mean = b.select(0, &[g])?.reshape(shape.clone())?;
            fit.noise.clone().with_mean(mean)
        })
        .collect::<Result<_>>()?;
    ClassifierModel::new(DiscriminantKind::Lda, default_labels(n_classes), classes, resolve_priors(priors, &counts))
}

/// Quadratic discriminant rule from independent per-class fits (TVN or
/// gamma scale mixture, with per-class `nu` when estimated).
pub fn train_qda(
    samples: &[Tensor],
    labels: &[usize],
    n_classes: usize,
    model: ErrorModel,
    priors: Option<&[f64]>,
    opts: &FitOptions,
) -> Result<ClassifierModel> {
    let counts = class_counts(labels, n_classes, samples.len())?;
    let classes = (0..n_classes)
        .map(|g| {
            let data: Vec<Tensor> =
                samples.iter().zip(labels).filter(|(_, &l)| l == g).map(|(y, _)| y.clone()).collect();
            Ok(fit_gsm(&data, model, opts)?.params)
        })
        .collect::<Result<_>>()?;
    ClassifierModel::new(DiscriminantKind::Qda, default_labels(n_classes), classes, resolve_priors(priors, &counts))
}

/// ROC and precision-recall curves from a threshold sweep.
#[derive(Debug, Clone, Serialize)]
pub struct RocPr {
    /// `(false positive rate, true positive rate)`, starting at `(0, 0)`.
    pub roc: Vec<(f64, f64)>,
    /// `(recall, precision)`, starting at `(0, 1)`.
    pub pr: Vec<(f64, f64)>,
    pub auc_roc: f64,
    pub auc_pr: f64,
}

fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points.windows(2).map(|w| (w[1].0 - w[0].0) * 0.5 * (w[0].1 + w[1].1)).sum()
}

/// Sweeps the unique scores in decreasing order, predicting positive for
/// `score >= threshold`; areas are trapezoidal.
pub fn roc_pr(scores: &[f64], labels: &[bool]) -> Result<RocPr> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidParameter(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidParameter("scores contain NaN".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Class("ROC/PR needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut roc = vec![(0.0, 0.0)];
    let mut pr = vec![(0.0, 1.0)];
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        roc.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
        pr.push((tp as f64 / pos as f64, tp as f64 / (tp + fp) as f64));
    }
    Ok(RocPr { auc_roc: trapezoid(&roc), auc_pr: trapezoid(&pr), roc, pr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::DensityGenerator;
    use crate::linalg::SpdFactor;
    use crate::tensor::Matrix;

    #[test]
    fn four_point_example() {
        let r = roc_pr(&[0.9, 0.8, 0.3, 0.1], &[true, false, true, false]).unwrap();
        assert!((r.auc_roc - 0.75).abs() < 1e-15);
        for w in r.roc.windows(2) {
            assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        }
        assert!(roc_pr(&[1.0, 0.0], &[true, true]).unwrap_err().to_string().contains("both"));
    }

    #[test]
    fn separated_and_tied_scores() {
        let r = roc_pr(&[3.0, 2.0, 1.0, 0.0], &[true, true, false, false]).unwrap();
        assert_eq!(r.auc_roc, 1.0);
        assert_eq!(r.auc_pr, 1.0);
        let t = roc_pr(&[1.0; 4], &[true, false, true, false]).unwrap();
        assert!((t.auc_roc - 0.5).abs() < 1e-15);
    }

    fn two_class_data(shift: f64, n: usize, seed: u64) -> (Vec<Tensor>, Vec<usize>) {
        let base = EcParams::new(
            Tensor::zeros(&[3]),
            vec![Matrix::from_row_slice(3, 3, &[1.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 0.8])],
            1.0,
            DensityGenerator::Normal,
        )
        .unwrap();
        let mut data = base.sample_seeded(n, seed).unwrap();
        let mut labels = vec![0; n];
        let shifted = base.with_mean(Tensor::from_vector(&[shift, 0.0, shift])).unwrap();
        data.extend(shifted.sample_seeded(n, seed + 1).unwrap());
        labels.extend(vec![1; n]);
        (data, labels)
    }

    #[test]
    fn lda_matches_classical_gaussian_lda() {
        let (data, labels) = two_class_data(1.5, 100, 4);
        let model = train_lda(&data, &labels, 2, ErrorModel::fixed(DensityGenerator::Normal), None, &FitOptions::default()).unwrap();
        // Oracle: class means and pooled covariance divided by n.
        let n = data.len() as f64;
        let means: Vec<_> = (0..2)
            .map(|g| {
                let pts: Vec<_> = data.iter().zip(&labels).filter(|(_, &l)| l == g).map(|(y, _)| y.vectorize()).collect();
                pts.iter().fold(crate::tensor::Vector::zeros(3), |a, b| a + b) / pts.len() as f64
            })
            .collect();
        let mut s = Matrix::zeros(3, 3);
        for (y, &l) in data.iter().zip(&labels) {
            let d = y.vectorize() - &means[l];
            s += &d * d.transpose();
        }
        s /= n;
        let sinv = SpdFactor::new(&s).unwrap().inverse();
        for y in &data {
            let v = y.vectorize();
            let sc: Vec<f64> = (0..2)
                .map(|g| {
                    let d = &v - &means[g];
                    (0.5f64).ln() - 0.5 * (d.transpose() * &sinv * &d)[(0, 0)]
                })
                .collect();
            let oracle = usize::from(sc[1] > sc[0]);
            assert_eq!(model.predict(y).unwrap(), oracle);
            let llr = model.llr(y, 1, 0).unwrap();
            assert!((llr - (sc[1] - sc[0])).abs() < 1e-8, "{llr} {}", sc[1] - sc[0]);
        }
    }

    #[test]
    fn identical_classes_reduce_to_prior_ratio() {
        let p = EcParams::standard(&[2, 2], DensityGenerator::student_t(4.0));
        let m = ClassifierModel::new(DiscriminantKind::Qda, default_labels(2), vec![p.clone(), p], vec![0.7, 0.3]).unwrap();
        let y = Tensor::from_fn(&[2, 2], |i| i[0] as f64 - 0.3 * i[1] as f64);
        assert!((m.llr(&y, 0, 1).unwrap() - (0.7f64 / 0.3).ln()).abs() < 1e-12);
        assert_eq!(m.predict(&y).unwrap(), 0);
        let eq = m.with_priors(&[1.0, 1.0]).unwrap();
        assert_eq!(eq.predict(&y).unwrap(), 0);
    }

    #[test]
    fn lda_llr_is_affine_for_normal() {
        let (data, labels) = two_class_data(1.0, 60, 8);
        let model = train_lda(&data, &labels, 2, ErrorModel::fixed(DensityGenerator::Normal), None, &FitOptions::default()).unwrap();
        let (a, b) = (&data[0], &data[70]);
        for t in [0.2, 0.5, 0.9] {
            let mix = a.scaled(t).add(&b.scaled(1.0 - t)).unwrap();
            let lhs = model.llr(&mix, 1, 0).unwrap();
            let rhs = t * model.llr(a, 1, 0).unwrap() + (1.0 - t) * model.llr(b, 1, 0).unwrap();
            assert!((lhs - rhs).abs() < 1e-9);
        }
    }

    #[test]
    fn errors() {
        let data = vec![Tensor::zeros(&[2]); 3];
        assert!(matches!(
            train_qda(&data, &[0, 0, 0], 2, ErrorModel::fixed(DensityGenerator::Normal), None, &FitOptions::default()),
            Err(Error::Class(_))
        ));
    }
}
