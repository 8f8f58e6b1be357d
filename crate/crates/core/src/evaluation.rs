//! Quality measures: MSE on both scales, squared Pearson correlation and the
//! coefficient of determination, plus CSV exports of observed/predicted pairs.

use crate::dataset::{gather, Dataset};
use crate::error::{Error, Result};
use crate::model::TrainedModel;

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("series of length {} and {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::DegenerateVariance(format!(
            "correlation needs at least 2 points, got {}",
            a.len()
        )));
    }
    Ok(())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn centered_sum_of_squares(x: &[f64], m: f64) -> f64 {
    x.iter().map(|v| (v - m) * (v - m)).sum()
}

/// Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let (mx, my) = (mean(x), mean(y));
    let sxx = centered_sum_of_squares(x, mx);
    let syy = centered_sum_of_squares(y, my);
    if sxx == 0.0 {
        return Err(Error::DegenerateVariance("first series is constant".into()));
    }
    if syy == 0.0 {
        return Err(Error::DegenerateVariance("second series is constant".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Squared Pearson correlation between observed and predicted values.
pub fn r_squared(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    let r = pearson(observed, predicted)?;
    Ok((r * r).min(1.0))
}

/// `1 - SSE/SST`; negative when the predictions are worse than the mean.
pub fn r2_determination(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(observed, predicted)?;
    let sst = centered_sum_of_squares(observed, mean(observed));
    if sst == 0.0 {
        return Err(Error::DegenerateVariance("observed series is constant".into()));
    }
    let sse: f64 = observed.iter().zip(predicted).map(|(o, p)| (o - p) * (o - p)).sum();
    Ok(1.0 - sse / sst)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Mean and extrema of one parameter, native units.
pub fn summary_stats(d: &Dataset, parameter: &str) -> Result<Summary> {
    let values = d.column(parameter)?;
    if values.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(Summary {
        mean: mean(&values),
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub scope: String,
    pub target: String,
    pub n_samples: usize,
    pub mse_normalized: f64,
    /// Squared target units.
    pub mse_native: f64,
    /// `None` when the correlation is undefined; see `note`.
    pub r_squared: Option<f64>,
    pub r2_determination: Option<f64>,
    pub note: Option<String>,
    /// `(observed, predicted)` in native units, dataset order.
    pub pairs: Vec<(f64, f64)>,
    pub mean_observed: f64,
    pub mean_predicted: f64,
    pub range_observed: (f64, f64),
    /// Samples with at least one input outside the training range.
    pub extrapolated_samples: usize,
}

impl EvalReport {
    pub fn observed(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.0).collect()
    }

    pub fn predicted(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.1).collect()
    }

    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "omitted".to_string(), |v| format!("{v:.16e}"));
        let mut s = String::new();
        s.push_str(&format!("scope = {}\n", self.scope));
        s.push_str(&format!("target = {}\n", self.target));
        s.push_str(&format!("n_samples = {}\n", self.n_samples));
        s.push_str(&format!("mse_normalized = {:.16e}\n", self.mse_normalized));
        s.push_str(&format!("mse_native = {:.16e}\n", self.mse_native));
        s.push_str(&format!("r_squared = {}\n", opt(self.r_squared)));
        s.push_str(&format!("r2_determination = {}\n", opt(self.r2_determination)));
        s.push_str(&format!("mean_observed = {:.16e}\n", self.mean_observed));
        s.push_str(&format!("mean_predicted = {:.16e}\n", self.mean_predicted));
        s.push_str(&format!(
            "range_observed = {:.16e},{:.16e}\n",
            self.range_observed.0, self.range_observed.1
        ));
        s.push_str(&format!("extrapolated_samples = {}\n", self.extrapolated_samples));
        if let Some(note) = &self.note {
            s.push_str(&format!("note = {note}\n"));
        }
        s
    }

    /// `index,observed_ph,predicted_ph`
    pub fn pairs_csv(&self) -> String {
        let mut s = String::from("index,observed_ph,predicted_ph\n");
        for (i, (o, p)) in self.pairs.iter().enumerate() {
            s.push_str(&format!("{i},{o},{p}\n"));
        }
        s
    }

    /// `observed,predicted`
    pub fn scatter_csv(&self) -> String {
        let mut s = String::from("observed,predicted\n");
        for (o, p) in &self.pairs {
            s.push_str(&format!("{o},{p}\n"));
        }
        s
    }
}

/// Runs the model over every sample of `d` and scores the first target.
pub fn evaluate(model: &TrainedModel, d: &Dataset) -> Result<EvalReport> {
    if !d.schema().same_names(&model.schema) {
        return Err(Error::SchemaMismatch(format!(
            "dataset columns [{}] differ from model schema [{}]",
            d.schema().names().collect::<Vec<_>>().join(","),
            model.schema.names().collect::<Vec<_>>().join(",")
        )));
    }
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let net = &model.network;
    let in_idx = model.layout.input_indices(d.schema())?;
    let out_idx = model.layout.target_indices(d.schema())?;
    let target_norm = net.target_normalizer();

    let mut pairs = Vec::with_capacity(d.len());
    let mut sq_norm = 0.0;
    let mut sq_native = 0.0;
    let mut extrapolated_samples = 0;
    for s in d.samples() {
        let raw = gather(&s.values, &in_idx);
        if !net.input_normalizer().out_of_range(&raw).is_empty() {
            extrapolated_samples += 1;
        }
        let y_norm = net.forward(&net.input_normalizer().apply(&raw)?)?;
        let predicted = target_norm.invert(&y_norm)?[0];
        let observed = s.values[out_idx[0]];
        let observed_norm = target_norm.apply(&gather(&s.values, &out_idx))?[0];
        sq_norm += (y_norm[0] - observed_norm).powi(2);
        sq_native += (predicted - observed).powi(2);
        pairs.push((observed, predicted));
    }
    let n = pairs.len() as f64;
    let observed: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let predicted: Vec<f64> = pairs.iter().map(|p| p.1).collect();

    let (r_sq, note) = match r_squared(&observed, &predicted) {
        Ok(v) => (Some(v), None),
        Err(Error::DegenerateVariance(m)) => (None, Some(format!("r_squared omitted: DegenerateVariance ({m})"))),
        Err(e) => return Err(e),
    };
    let r2_det = r2_determination(&observed, &predicted).ok();

    Ok(EvalReport {
        scope: scope_of(d),
        target: model.layout.targets[0].clone(),
        n_samples: pairs.len(),
        mse_normalized: sq_norm / n,
        mse_native: sq_native / n,
        r_squared: r_sq,
        r2_determination: r2_det,
        note,
        mean_observed: mean(&observed),
        mean_predicted: mean(&predicted),
        range_observed: (
            observed.iter().copied().fold(f64::INFINITY, f64::min),
            observed.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ),
        pairs,
        extrapolated_samples,
    })
}

fn scope_of(d: &Dataset) -> String {
    match d.locations().as_slice() {
        [one] => format!("location-{one}"),
        ids => format!(
            "locations {}",
            ids.iter().map(u8::to_string).collect::<Vec<_>>().join(",")
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ParameterSchema, Sample};
    use proptest::prelude::*;

    #[test]
    fn perfect_and_affine_predictions_score_one() {
        let y = [7.1, 7.4, 6.9, 7.8];
        assert_eq!(r_squared(&y, &y).unwrap(), 1.0);
        let affine: Vec<f64> = y.iter().map(|v| 3.0 * v - 2.0).collect();
        assert!((r_squared(&y, &affine).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn hand_computed_correlation() {
        // mean 2 and 5/3; sxy = 1, sxx = 2, syy = 2/3 -> r^2 = 1 / (4/3) = 0.75
        assert!((r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 2.0]).unwrap() - 0.75).abs() < 1e-15);
        // SSE = 1, SST = 2
        assert!((r2_determination(&[1.0, 2.0, 3.0], &[1.0, 2.0, 2.0]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn degenerate_and_mismatched_inputs() {
        assert!(matches!(r_squared(&[2.0, 2.0], &[1.0, 3.0]), Err(Error::DegenerateVariance(_))));
        assert!(matches!(r_squared(&[1.0], &[1.0]), Err(Error::DegenerateVariance(_))));
        assert!(matches!(r_squared(&[1.0, 2.0], &[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn summary_cases() {
        let schema = ParameterSchema::from_names(&["pH"]).unwrap();
        let mk = |vals: &[f64]| {
            Dataset::new(
                schema.clone(),
                vals.iter()
                    .enumerate()
                    .map(|(i, &v)| Sample {
                        location_id: 1,
                        sequence_index: i as u64,
                        values: vec![v],
                    })
                    .collect(),
            )
            .unwrap()
        };
        let s = summary_stats(&mk(&[6.8, 7.9]), "pH").unwrap();
        assert!((s.mean - 7.35).abs() < 1e-12);
        assert_eq!((s.min, s.max), (6.8, 7.9));
        assert_eq!(summary_stats(&mk(&[7.0]), "pH").unwrap(), Summary { mean: 7.0, min: 7.0, max: 7.0 });
        assert!(matches!(summary_stats(&mk(&[7.0]), "iron"), Err(Error::SchemaMismatch(_))));
        assert!(matches!(summary_stats(&mk(&[]), "pH"), Err(Error::EmptyDataset)));
    }

    proptest! {
        #[test]
        fn r_squared_is_affine_invariant_and_symmetric(
            y in proptest::collection::vec(-10.0f64..10.0, 3..50),
            noise in proptest::collection::vec(-1.0f64..1.0, 50),
            a in 0.1f64..10.0,
            b in -5.0f64..5.0,
        ) {
            let yhat: Vec<f64> = y.iter().zip(&noise).map(|(v, e)| v + e).collect();
            prop_assume!(pearson(&y, &yhat).is_ok());
            let base = r_squared(&y, &yhat).unwrap();
            let moved: Vec<f64> = yhat.iter().map(|v| a * v + b).collect();
            prop_assert!((r_squared(&y, &moved).unwrap() - base).abs() <= 1e-12);
            prop_assert!((r_squared(&yhat, &y).unwrap() - base).abs() <= 1e-15);
            prop_assert!((0.0..=1.0).contains(&base));
        }
    }
}
