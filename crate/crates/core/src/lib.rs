// Negated comparisons such as `!(x > 0.0)` deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod dist;
pub mod error;
pub mod estimation;
pub mod generators;
pub mod io;
pub mod linalg;
pub mod quadrature;
pub mod sim;
pub mod tensor;
pub mod totr;

pub use classify::{roc_pr, ClassifierModel, DiscriminantKind, RocPr};
pub use dist::{Density, EcParams, UnnormalizedEcParams};
pub use error::{Error, Result};
pub use estimation::{ErrorModel, FitOptions, FitReport, Sigma2Update};
pub use generators::DensityGenerator;
pub use linalg::{kron_logdet, mahalanobis_sq, KronFactor, SpdFactor};
pub use totr::{CoefFormat, Coefficient, CpCoefficient, ToTRModel};
pub use tensor::{Matrix, Tensor, Vector};
