//! End-to-end training run: seeded 70/30 split, normalizers fitted on the
//! training partition, seeded initialization, training, and evaluation on
//! both partitions.

use crate::dataset::{fit_normalizer, split_70_30, Dataset, FeatureLayout, TARGET};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, EvalReport};
use crate::model::TrainedModel;
use crate::network::init_weights;
use crate::training::{train_with, TrainConfig, TrainReport, TrainingData};

pub const DEFAULT_HIDDEN_UNITS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub train: TrainConfig,
    pub hidden_units: usize,
    pub target: String,
    /// Feed the target parameter to the network as an input as well.
    pub include_target_input: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            train: TrainConfig::default(),
            hidden_units: DEFAULT_HIDDEN_UNITS,
            target: TARGET.to_string(),
            include_target_input: false,
        }
    }
}

impl PipelineConfig {
    /// Parses `key = value` lines. Keys are the [`TrainConfig`] fields plus
    /// `hidden_units`, `target` and `include_target_input`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config(format!("config line {}: expected `key = value`", i + 1)))?;
            if cfg.train.set(key, value)? {
                continue;
            }
            match key {
                "hidden_units" => {
                    cfg.hidden_units = value
                        .parse()
                        .map_err(|_| Error::Config(format!("`hidden_units`: cannot parse `{value}`")))?
                }
                "target" => cfg.target = value.to_string(),
                "include_target_input" => {
                    cfg.include_target_input = value
                        .parse()
                        .map_err(|_| Error::Config(format!("`include_target_input`: cannot parse `{value}`")))?
                }
                _ => return Err(Error::Config(format!("config line {}: unknown key `{key}`", i + 1))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.hidden_units == 0 {
            return Err(Error::Config("hidden_units must be positive".into()));
        }
        Ok(())
    }

    /// Every setting as `key = value` pairs, in a fixed order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> =
            self.train.entries().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        out.push(("hidden_units".into(), self.hidden_units.to_string()));
        out.push(("target".into(), self.target.clone()));
        out.push(("include_target_input".into(), self.include_target_input.to_string()));
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub report: TrainReport,
    pub train_eval: EvalReport,
    /// `None` when the held-out partition could not be scored.
    pub test_eval: Option<EvalReport>,
    pub n_train: usize,
    pub n_test: usize,
}

/// Splits `d` with the configured seed, trains on the 70% partition and
/// scores both partitions. The test partition is only read after training.
pub fn train_pipeline(d: &Dataset, cfg: &PipelineConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let seed = cfg.train.seed;
    let (train_set, test_set) = split_70_30(d, seed)?;
    let layout = FeatureLayout::for_target(d.schema(), &cfg.target, cfg.include_target_input)?;
    let in_idx = layout.input_indices(d.schema())?;
    let out_idx = layout.target_indices(d.schema())?;

    let stats = fit_normalizer(&train_set)?;
    let net = init_weights(in_idx.len(), cfg.hidden_units, out_idx.len(), seed)?
        .with_normalizers(stats.select(&in_idx), stats.select(&out_idx))?;
    let data = TrainingData::from_dataset(&train_set, &layout, &net)?;
    let (trained, report) = train_with(&net, &data, &cfg.train)?;

    let model = TrainedModel {
        schema: d.schema().clone(),
        layout,
        network: trained,
        seed,
        config: cfg.entries(),
    };
    let train_eval = evaluate(&model, &train_set)?;
    let test_eval = evaluate(&model, &test_set).ok();
    Ok(TrainOutcome {
        model,
        report,
        train_eval,
        test_eval,
        n_train: train_set.len(),
        n_test: test_set.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_round_trip() {
        let text = "# comment\nmax_epochs = 50\nhidden_units = 4\nalgorithm = gradient_descent\n";
        let cfg = PipelineConfig::parse(text).unwrap();
        assert_eq!(cfg.train.max_epochs, 50);
        assert_eq!(cfg.hidden_units, 4);
        let echoed: String = cfg.entries().iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        assert_eq!(PipelineConfig::parse(&echoed).unwrap(), cfg);
    }

    #[test]
    fn config_errors() {
        assert!(PipelineConfig::parse("bogus = 1\n").is_err());
        assert!(PipelineConfig::parse("hidden_units = 0\n").is_err());
        assert!(PipelineConfig::parse("max_epochs\n").is_err());
        assert!(PipelineConfig::parse("lambda_down = 2\n").is_err());
    }
}
