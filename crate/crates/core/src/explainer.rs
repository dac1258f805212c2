//! Uniform front end over LRP and the baseline explainers.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    gradient_x_input, integrated_gradients, occlusion, sensitivity, shapley_sampling,
    BaselineConfig,
};
use crate::error::{check_dim, Error, Result};
use crate::lrp::{explain, LrpHyperparams};
use crate::model::{Class, Model};
use crate::neuralize::{neuralize, NeuralizedNet};
use crate::seed::{derive_seed, rng_for};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Neuralization followed by LRP.
    Lrp,
    /// Gradient × input on the original model.
    Gi,
    /// Gradient × input on the neuralized model.
    GiNeural,
    Ig,
    Sensitivity,
    Occlusion,
    Shap,
    /// Uniform noise scores; a floor for sanity checks.
    Random,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Lrp,
        Method::Gi,
        Method::GiNeural,
        Method::Ig,
        Method::Sensitivity,
        Method::Occlusion,
        Method::Shap,
        Method::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Lrp => "lrp",
            Method::Gi => "gi",
            Method::GiNeural => "gi-neural",
            Method::Ig => "ig",
            Method::Sensitivity => "sensitivity",
            Method::Occlusion => "occlusion",
            Method::Shap => "shap",
            Method::Random => "random",
        }
    }

    /// True when the sign of a score says which class it supports. Squared
    /// gradients and random scores carry magnitude only.
    pub fn is_signed(self) -> bool {
        !matches!(self, Method::Sensitivity | Method::Random)
    }

    pub fn needs_gradient(self) -> bool {
        matches!(
            self,
            Method::Gi | Method::GiNeural | Method::Ig | Method::Sensitivity
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method `{s}`")))
    }
}

/// A method bound to a model and its hyperparameters.
pub struct Explainer<'a> {
    model: &'a Model,
    net: Option<NeuralizedNet>,
    method: Method,
    lrp: Option<LrpHyperparams>,
    baseline: BaselineConfig,
}

impl<'a> Explainer<'a> {
    /// Fails early when the method cannot be applied to the model.
    pub fn new(
        model: &'a Model,
        method: Method,
        lrp: Option<LrpHyperparams>,
        baseline: BaselineConfig,
    ) -> Result<Self> {
        baseline.validate()?;
        if method.needs_gradient() && matches!(model, Model::Knn(_)) {
            return Err(Error::GradientInapplicable("knn"));
        }
        if matches!(method, Method::Occlusion | Method::Shap) {
            check_dim(model.dim(), baseline.occlusion_fill.len())?;
        }
        let net = match method {
            Method::Lrp | Method::GiNeural => Some(neuralize(model)?),
            _ => None,
        };
        if method == Method::Lrp {
            lrp.ok_or_else(|| Error::InvalidParameter("lrp needs hyperparameters".into()))?
                .validate()?;
        }
        Ok(Self {
            model,
            net,
            method,
            lrp,
            baseline,
        })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn net(&self) -> Option<&NeuralizedNet> {
        self.net.as_ref()
    }

    /// Relevance scores for `x`. `sample_id` keys the random streams of the
    /// stochastic methods.
    pub fn attribute(&self, x: &[f64], sample_id: u64) -> Result<Vec<f64>> {
        check_dim(self.model.dim(), x.len())?;
        match self.method {
            Method::Lrp => {
                let net = self.net.as_ref().expect("neuralized");
                Ok(explain(net, x, self.lrp.as_ref().expect("validated"))?.relevance)
            }
            Method::Gi => gradient_x_input(self.model, x),
            Method::GiNeural => gradient_x_input(self.net.as_ref().expect("neuralized"), x),
            Method::Ig => integrated_gradients(self.model, x, &self.baseline),
            Method::Sensitivity => sensitivity(self.model, x),
            Method::Occlusion => occlusion(self.model, x, &self.baseline),
            Method::Shap => {
                let config = BaselineConfig {
                    rng_seed: derive_seed(self.baseline.rng_seed, &[sample_id]),
                    ..self.baseline.clone()
                };
                shapley_sampling(self.model, x, &config)
            }
            Method::Random => {
                let mut rng = rng_for(self.baseline.rng_seed, &[0x52414E44, sample_id]);
                Ok((0..x.len()).map(|_| rng.gen::<f64>()).collect())
            }
        }
    }
}

impl Explainer<'_> {
    /// Scores oriented towards the predicted class, so that larger always
    /// means more support for the decision being explained. This is the
    /// ranking used by feature flipping; a negatively classified sample's
    /// most important features carry the most negative relevance.
    pub fn importance(&self, x: &[f64], sample_id: u64) -> Result<Vec<f64>> {
        let mut scores = self.attribute(x, sample_id)?;
        if self.method.is_signed() {
            let sign = Class::of(self.model.decision(x)?).sign();
            scores.iter_mut().for_each(|s| *s *= sign);
        }
        Ok(scores)
    }
}

/// Writes `feature,relevance,input_value` rows.
pub fn write_explanation_csv<W: Write>(
    out: W,
    feature_names: &[String],
    relevance: &[f64],
    input: &[f64],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["feature", "relevance", "input_value"])?;
    for (k, (r, v)) in relevance.iter().zip(input).enumerate() {
        let name = feature_names.get(k).cloned().unwrap_or_else(|| format!("x{k}"));
        w.write_record([name, r.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Points;
    use crate::model::{KnnModel, SvmModel};

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_value(m).unwrap(), m.name());
        }
        assert!("lrp-svm".parse::<Method>().is_err());
    }

    #[test]
    fn gradient_methods_refused_for_knn_at_construction() {
        let m = Model::Knn(
            KnnModel::new(
                Points::from_rows(&[vec![1.0], vec![-1.0]]).unwrap(),
                vec![Class::Positive, Class::Negative],
                1,
            )
            .unwrap(),
        );
        for method in [Method::Gi, Method::GiNeural, Method::Ig, Method::Sensitivity] {
            let err = Explainer::new(&m, method, None, BaselineConfig::new(vec![0.0], 0))
                .err()
                .unwrap();
            assert!(err.is_incompatibility());
        }
        let ok = Explainer::new(
            &m,
            Method::Lrp,
            Some(LrpHyperparams::knn(0.8, 0)),
            BaselineConfig::new(vec![0.0], 0),
        )
        .unwrap();
        assert_eq!(ok.attribute(&[0.5], 0).unwrap().len(), 1);
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_explanation_csv(&mut buf, &["a".into(), "b".into()], &[0.5, -1.0], &[1.0, 2.0])
            .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "feature,relevance,input_value\na,0.5,1\nb,-1,2\n"
        );
    }

    #[test]
    fn importance_points_towards_the_predicted_class() {
        let svm = SvmModel::new(
            Points::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap(),
            vec![1.0, 1.0],
            vec![Class::Positive, Class::Negative],
            1.0,
            0.0,
        )
        .unwrap();
        let m = Model::Svm(svm);
        let config = BaselineConfig::new(vec![0.0, 0.0], 0);
        let x = [-0.7, 0.3];
        for method in [Method::Lrp, Method::Gi, Method::Sensitivity] {
            let ex = Explainer::new(&m, method, Some(LrpHyperparams::svm(0.5, 1.0)), config.clone())
                .unwrap();
            let raw = ex.attribute(&x, 0).unwrap();
            let oriented = ex.importance(&x, 0).unwrap();
            let sign = if method.is_signed() { -1.0 } else { 1.0 };
            for (r, o) in raw.iter().zip(&oriented) {
                assert_eq!(*o, sign * r);
            }
        }
        let lrp = Explainer::new(&m, Method::Lrp, Some(LrpHyperparams::svm(0.5, 1.0)), config)
            .unwrap();
        assert!(lrp.importance(&x, 0).unwrap()[0] > 0.0);
        assert_eq!(lrp.importance(&[0.7, 0.3], 0).unwrap(), lrp.attribute(&[0.7, 0.3], 0).unwrap());
    }
}
