use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Points;

use super::{Class, KnnModel, KrrModel, Model, SvmModel};

/// On-disk JSON form shared by all model kinds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default)]
    pub bias: f64,
    pub points: Points,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coeffs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<Class>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ridge: Option<f64>,
    #[serde(default)]
    pub feature_names: Vec<String>,
}

impl ModelDocument {
    pub fn from_model(model: &Model, feature_names: Vec<String>) -> Self {
        match model {
            Model::Svm(m) => Self {
                kind: "svm".into(),
                gamma: Some(m.gamma()),
                k: None,
                bias: m.bias(),
                points: m.support_vectors().clone(),
                coeffs: m.dual_coeffs().to_vec(),
                labels: m.labels().to_vec(),
                ridge: None,
                feature_names,
            },
            Model::Knn(m) => Self {
                kind: "knn".into(),
                gamma: None,
                k: Some(m.k()),
                bias: 0.0,
                points: m.points().clone(),
                coeffs: Vec::new(),
                labels: m.labels().to_vec(),
                ridge: None,
                feature_names,
            },
            Model::Krr(m) => Self {
                kind: "krr".into(),
                gamma: Some(m.gamma()),
                k: None,
                bias: 0.0,
                points: m.points().clone(),
                coeffs: m.coeffs().to_vec(),
                labels: Vec::new(),
                ridge: Some(m.ridge()),
                feature_names,
            },
        }
    }

    pub fn to_model(&self) -> Result<Model> {
        let missing = |field: &str| Error::InvalidModel(format!("{} model lacks `{field}`", self.kind));
        if !self.feature_names.is_empty() && self.feature_names.len() != self.points.n_cols() {
            return Err(Error::InvalidModel(format!(
                "{} feature names for {} columns",
                self.feature_names.len(),
                self.points.n_cols()
            )));
        }
        match self.kind.as_str() {
            "svm" => Ok(Model::Svm(SvmModel::new(
                self.points.clone(),
                self.coeffs.clone(),
                self.labels.clone(),
                self.gamma.ok_or_else(|| missing("gamma"))?,
                self.bias,
            )?)),
            "knn" => Ok(Model::Knn(KnnModel::new(
                self.points.clone(),
                self.labels.clone(),
                self.k.ok_or_else(|| missing("k"))?,
            )?)),
            "krr" => Ok(Model::Krr(KrrModel::new(
                self.points.clone(),
                self.coeffs.clone(),
                self.gamma.ok_or_else(|| missing("gamma"))?,
                self.ridge.unwrap_or(0.0),
            )?)),
            other => Err(Error::InvalidModel(format!("unknown model kind `{other}`"))),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
