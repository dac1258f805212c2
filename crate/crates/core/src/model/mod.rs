//! The three distance-based model families, their inference, the minimal
//! trainers and the JSON model format.

mod io;
mod knn;
mod krr;
mod smo;
mod svm;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::ModelDocument;
pub use knn::KnnModel;
pub use krr::{train_krr, KrrModel};
pub use smo::{train_svm, train_svm_with, SmoConfig};
pub use svm::SvmModel;

/// Binary class label, serialized as `+1` / `-1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Class {
    Positive,
    Negative,
}

impl Class {
    pub fn sign(self) -> f64 {
        match self {
            Class::Positive => 1.0,
            Class::Negative => -1.0,
        }
    }

    /// Class of a real-valued decision. Zero maps to the negative class.
    pub fn of(value: f64) -> Class {
        if value > 0.0 {
            Class::Positive
        } else {
            Class::Negative
        }
    }

    pub fn from_value(v: f64) -> Result<Class> {
        if v == 1.0 {
            Ok(Class::Positive)
        } else if v == -1.0 {
            Ok(Class::Negative)
        } else {
            Err(Error::InvalidParameter(format!("label {v} is not ±1")))
        }
    }
}

impl TryFrom<i8> for Class {
    type Error = Error;

    fn try_from(v: i8) -> Result<Class> {
        Class::from_value(v as f64)
    }
}

impl From<Class> for i8 {
    fn from(c: Class) -> i8 {
        c.sign() as i8
    }
}

/// Any of the supported models, as loaded from a model file.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Svm(SvmModel),
    Knn(KnnModel),
    Krr(KrrModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Svm(_) => "svm",
            Model::Knn(_) => "knn",
            Model::Krr(_) => "krr",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Model::Svm(m) => m.dim(),
            Model::Knn(m) => m.dim(),
            Model::Krr(m) => m.dim(),
        }
    }

    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        match self {
            Model::Svm(m) => m.decision(x),
            Model::Knn(m) => m.decision(x),
            Model::Krr(m) => m.decision(x),
        }
    }

    /// Analytic input gradient. KNN is piecewise constant and has none.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Model::Svm(m) => m.gradient(x),
            Model::Knn(_) => Err(Error::GradientInapplicable("knn")),
            Model::Krr(m) => m.gradient(x),
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match self {
            Model::Svm(m) => Some(m.gamma()),
            Model::Knn(_) => None,
            Model::Krr(m) => Some(m.gamma()),
        }
    }
}

impl From<SvmModel> for Model {
    fn from(m: SvmModel) -> Self {
        Model::Svm(m)
    }
}

impl From<KnnModel> for Model {
    fn from(m: KnnModel) -> Self {
        Model::Knn(m)
    }
}

impl From<KrrModel> for Model {
    fn from(m: KrrModel) -> Self {
        Model::Krr(m)
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!("gamma must be positive, got {gamma}")))
    }
}
