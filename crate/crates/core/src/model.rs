//! Self-describing text format for trained networks.
//!
//! ```text
//! phnet-model 1
//! param = iron,0,5
//! param = param16
//! inputs = iron,...
//! targets = pH
//! n_in = 16
//! n_hidden = 10
//! n_out = 1
//! seed = 7
//! config.mse_goal = 0.0025
//! input_min = ...
//! input_max = ...
//! target_min = ...
//! target_max = ...
//! params = ...
//! ```
//!
//! Reals are written with 17 significant digits, which round-trips every
//! `f64` exactly. Parameters follow the [`ParamVector`](crate::network::ParamVector)
//! packing order.

use std::path::Path;

use crate::dataset::{FeatureLayout, Normalizer, Parameter, ParameterSchema};
use crate::error::{Error, Result};
use crate::network::MlpNetwork;

const MAGIC: &str = "phnet-model 1";

/// A trained network together with everything needed to apply it to raw
/// sampling records.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub schema: ParameterSchema,
    pub layout: FeatureLayout,
    pub network: MlpNetwork,
    pub seed: u64,
    /// Settings the model was trained with, echoed verbatim.
    pub config: Vec<(String, String)>,
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(",")
}

impl TrainedModel {
    pub fn to_text(&self) -> String {
        let net = &self.network;
        let mut s = format!("{MAGIC}\n");
        for p in self.schema.params() {
            match p.range {
                Some((lo, hi)) => s.push_str(&format!("param = {},{lo},{hi}\n", p.name)),
                None => s.push_str(&format!("param = {}\n", p.name)),
            }
        }
        s.push_str(&format!("inputs = {}\n", self.layout.inputs.join(",")));
        s.push_str(&format!("targets = {}\n", self.layout.targets.join(",")));
        s.push_str(&format!("n_in = {}\n", net.n_in()));
        s.push_str(&format!("n_hidden = {}\n", net.n_hidden()));
        s.push_str(&format!("n_out = {}\n", net.n_out()));
        s.push_str(&format!("seed = {}\n", self.seed));
        for (k, v) in &self.config {
            s.push_str(&format!("config.{k} = {v}\n"));
        }
        s.push_str(&format!("input_min = {}\n", join(net.input_normalizer().min())));
        s.push_str(&format!("input_max = {}\n", join(net.input_normalizer().max())));
        s.push_str(&format!("target_min = {}\n", join(net.target_normalizer().min())));
        s.push_str(&format!("target_max = {}\n", join(net.target_normalizer().max())));
        s.push_str(&format!("params = {}\n", join(net.params().as_slice())));
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TrainedModel::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::ModelFormat { line, message };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.next() {
            Some((_, MAGIC)) => {}
            _ => return Err(err(1, format!("expected header `{MAGIC}`"))),
        }

        let mut params_schema = Vec::new();
        let mut fields: Vec<(usize, &str, &str)> = Vec::new();
        let mut config = Vec::new();
        for (lineno, line) in lines {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(lineno, "expected `key = value`".into()))?;
            if key == "param" {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                let range = match parts.len() {
                    1 => None,
                    3 => {
                        let num = |s: &str| s.parse::<f64>().map_err(|_| err(lineno, format!("bad bound `{s}`")));
                        Some((num(parts[1])?, num(parts[2])?))
                    }
                    _ => return Err(err(lineno, "expected `param = name[,min,max]`".into())),
                };
                params_schema.push(Parameter {
                    name: parts[0].to_string(),
                    range,
                });
            } else if let Some(k) = key.strip_prefix("config.") {
                config.push((k.to_string(), value.to_string()));
            } else if fields.iter().any(|(_, k, _)| *k == key) {
                return Err(err(lineno, format!("duplicate key `{key}`")));
            } else {
                fields.push((lineno, key, value));
            }
        }

        let get = |key: &str| -> Result<(usize, &str)> {
            fields
                .iter()
                .find(|(_, k, _)| *k == key)
                .map(|(l, _, v)| (*l, *v))
                .ok_or_else(|| err(0, format!("missing key `{key}`")))
        };
        let count = |key: &str| -> Result<usize> {
            let (l, v) = get(key)?;
            v.parse().map_err(|_| err(l, format!("`{key}` is not a count")))
        };
        let reals = |key: &str, expected: usize| -> Result<Vec<f64>> {
            let (l, v) = get(key)?;
            let out = v
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| err(l, format!("`{key}`: bad number `{s}`"))))
                .collect::<Result<Vec<_>>>()?;
            if out.len() != expected {
                return Err(err(l, format!("`{key}` has {} values, expected {expected}", out.len())));
            }
            Ok(out)
        };
        let names = |key: &str| -> Result<Vec<String>> {
            let (_, v) = get(key)?;
            Ok(v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
        };

        let schema = ParameterSchema::new(params_schema).map_err(|e| err(0, e.to_string()))?;
        let layout = FeatureLayout {
            inputs: names("inputs")?,
            targets: names("targets")?,
        };
        let (n_in, n_hidden, n_out) = (count("n_in")?, count("n_hidden")?, count("n_out")?);
        if layout.inputs.len() != n_in || layout.targets.len() != n_out {
            return Err(err(0, "input/target name lists disagree with n_in/n_out".into()));
        }
        layout.input_indices(&schema).map_err(|e| err(0, e.to_string()))?;
        layout.target_indices(&schema).map_err(|e| err(0, e.to_string()))?;
        let (seed_line, seed) = get("seed")?;
        let seed = seed.parse().map_err(|_| err(seed_line, "bad seed".into()))?;

        let input_norm = Normalizer::new(reals("input_min", n_in)?, reals("input_max", n_in)?)
            .map_err(|e| err(0, e.to_string()))?;
        let target_norm = Normalizer::new(reals("target_min", n_out)?, reals("target_max", n_out)?)
            .map_err(|e| err(0, e.to_string()))?;
        let p = crate::network::parameter_count(n_in, n_hidden, n_out);
        let params = reals("params", p)?;
        let params_line = get("params")?.0;
        let network = MlpNetwork::zeros(n_in, n_hidden, n_out)
            .and_then(|n| n.with_params(&params))
            .and_then(|n| n.with_normalizers(input_norm, target_norm))
            .map_err(|e| err(params_line, e.to_string()))?;

        Ok(TrainedModel {
            schema,
            layout,
            network,
            seed,
            config,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::TARGET;
    use crate::network::init_weights;

    fn sample_model() -> TrainedModel {
        let schema = ParameterSchema::default();
        let layout = FeatureLayout::for_target(&schema, TARGET, false).unwrap();
        let in_norm = Normalizer::new((0..16).map(|k| k as f64 / 3.0).collect(), (0..16).map(|k| k as f64 + 1.0).collect())
            .unwrap();
        let out_norm = Normalizer::new(vec![6.8], vec![7.9]).unwrap();
        let network = init_weights(16, 10, 1, 99).unwrap().with_normalizers(in_norm, out_norm).unwrap();
        TrainedModel {
            schema,
            layout,
            network,
            seed: 99,
            config: vec![("mse_goal".into(), "0.0025".into())],
        }
    }

    #[test]
    fn text_round_trip_is_exact() {
        let m = sample_model();
        let text = m.to_text();
        let back = TrainedModel::parse(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn corrupted_files_report_line() {
        assert!(matches!(TrainedModel::parse("garbage"), Err(Error::ModelFormat { line: 1, .. })));
        let text = sample_model().to_text().replace("n_hidden = 10", "n_hidden = ten");
        match TrainedModel::parse(&text) {
            Err(Error::ModelFormat { line, .. }) => assert!(line > 1),
            other => panic!("{other:?}"),
        }
        let mut truncated = sample_model().to_text();
        truncated.truncate(truncated.len() - 40);
        assert!(matches!(TrainedModel::parse(&truncated), Err(Error::ModelFormat { .. })));
    }
}
