//! Held-out metrics: average conditional log-likelihood and the RMSE
//! of the predicted conditional mean and standard deviation, plus the
//! bundled report the CLI and benchmark write out.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{CdeError, Result};
use crate::estimators::ConditionalDensity;
use crate::evaluation::hellinger::{conditional_hellinger, EvalProtocol};
use crate::simulators::DensitySimulator;
use crate::stats::{mean, population_std};

/// All metrics of one model against one validation set. The Hellinger
/// mean is present only when ground truth is available (simulator
/// evaluations); plain CSV evaluations carry the other three.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Mean held-out log-density; `-inf` flags a zero-density point.
    #[serde(with = "flagged_f64")]
    pub avg_log_likelihood: f64,
    pub rmse_mean: f64,
    pub rmse_std: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hellinger_mean: Option<f64>,
}

/// Computes the full report: likelihood and moment errors against
/// `data`, plus the conditional Hellinger distance when the generating
/// simulator is supplied.
pub fn evaluate(
    est: &dyn ConditionalDensity,
    data: &Dataset,
    truth: Option<(&dyn DensitySimulator, &EvalProtocol)>,
) -> Result<MetricsReport> {
    let avg_ll = avg_log_likelihood(est, data)?;
    let (rm, rs) = moment_errors(est, data)?;
    let hellinger_mean = match truth {
        Some((sim, protocol)) => Some(conditional_hellinger(est, sim, protocol)?),
        None => None,
    };
    Ok(MetricsReport { avg_log_likelihood: avg_ll, rmse_mean: rm, rmse_std: rs, hellinger_mean })
}

/// `(1/N) sum log p(y_i | x_i)`. A zero density makes the result `-inf`
/// rather than an error, so sweep tables can record the failure.
pub fn avg_log_likelihood(est: &dyn ConditionalDensity, data: &Dataset) -> Result<f64> {
    check_dims(est, data)?;
    let mut sum = 0.0;
    for i in 0..data.n() {
        sum += est.log_pdf(data.x_row(i), data.y_row(i))?;
    }
    let avg = sum / data.n() as f64;
    if avg.is_nan() {
        return Err(CdeError::InvalidDensity(
            "log-likelihood sum is NaN; the model emitted conflicting infinities".into(),
        ));
    }
    Ok(avg)
}

/// Root-mean-square error of the conditional mean against realized y.
pub fn rmse_mean(est: &dyn ConditionalDensity, data: &Dataset) -> Result<f64> {
    Ok(moment_errors(est, data)?.0)
}

/// Root-mean-square error of the predicted conditional std against the
/// realized absolute deviation from the predicted mean.
pub fn rmse_std(est: &dyn ConditionalDensity, data: &Dataset) -> Result<f64> {
    Ok(moment_errors(est, data)?.1)
}

fn moment_errors(est: &dyn ConditionalDensity, data: &Dataset) -> Result<(f64, f64)> {
    check_dims(est, data)?;
    if est.y_dim() != 1 {
        return Err(CdeError::UnsupportedDimension(format!(
            "moment RMSEs need 1-D y, got dimension {}",
            est.y_dim()
        )));
    }
    let mut sq_mean = 0.0;
    let mut sq_std = 0.0;
    for i in 0..data.n() {
        let m = est.conditional_moments(data.x_row(i))?;
        let dev = data.y_row(i)[0] - m.mean[0];
        sq_mean += dev * dev;
        let gap = dev.abs() - m.std[0];
        sq_std += gap * gap;
    }
    let n = data.n() as f64;
    Ok(((sq_mean / n).sqrt(), (sq_std / n).sqrt()))
}

fn check_dims(est: &dyn ConditionalDensity, data: &Dataset) -> Result<()> {
    if data.n() == 0 {
        return Err(CdeError::InvalidParameter("evaluation data is empty".into()));
    }
    if est.x_dim() != data.x_dim() || est.y_dim() != data.y_dim() {
        return Err(CdeError::ShapeMismatch {
            context: "evaluation model vs data",
            expected: format!("x {}, y {}", est.x_dim(), est.y_dim()),
            got: format!("x {}, y {}", data.x_dim(), data.y_dim()),
        });
    }
    Ok(())
}

/// Across-seed view of one metric: the raw per-seed values with their
/// mean and population standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub per_seed: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

pub fn summarize_metric(per_seed: &[f64]) -> MetricSummary {
    MetricSummary {
        per_seed: per_seed.to_vec(),
        mean: mean(per_seed),
        std: population_std(per_seed),
    }
}

/// JSON (de)serialization of f64 that keeps non-finite flags readable:
/// `-inf`, `inf`, and `nan` become strings instead of JSON null.
pub mod flagged_f64 {
    use serde::de::Error as DeError;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(D::Error::custom(format!("unrecognized float flag {other:?}"))),
            },
        }
    }
}
