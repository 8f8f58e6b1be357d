//! Sampling records, CSV ingestion, min-max normalization and the seeded
//! 70/30 train/test split.
//!
//! CSV layout: UTF-8, comma separated, one header row. The columns
//! `location` and `seq` are required, followed by one column per schema
//! parameter in any order.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Name of the predicted parameter in the default schema.
pub const TARGET: &str = "pH";

/// Physically admissible pH interval.
pub const PH_BOUNDS: (f64, f64) = (0.0, 14.0);

pub const LOCATION_COLUMN: &str = "location";
pub const SEQ_COLUMN: &str = "seq";

/// Sampling locations are numbered 1 through 10.
pub const LOCATION_IDS: std::ops::RangeInclusive<u8> = 1..=10;

/// Default parameter list with plausibility ranges in native units.
/// The last two slots are placeholders for unnamed measurands.
const DEFAULT_PARAMETERS: [(&str, Option<(f64, f64)>); 17] = [
    ("iron", Some((0.0, 5.0))),
    ("chlorine_total", Some((0.0, 5.0))),
    ("chlorine_free", Some((0.0, 5.0))),
    ("calcium", Some((0.0, 500.0))),
    ("magnesium", Some((0.0, 300.0))),
    ("hardness", Some((0.0, 1000.0))),
    ("total_suspended_solids", Some((0.0, 2000.0))),
    ("sulfates", Some((0.0, 1000.0))),
    ("turbidity", Some((0.0, 1000.0))),
    (TARGET, Some(PH_BOUNDS)),
    ("electrical_conductivity", Some((0.0, 5000.0))),
    ("total_dissolved_solids", Some((0.0, 3000.0))),
    ("salinity", Some((0.0, 5.0))),
    ("temperature", Some((0.0, 45.0))),
    ("dissolved_oxygen", Some((0.0, 20.0))),
    ("param16", None),
    ("param17", None),
];

#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub name: String,
    /// Plausibility range `(min, max)`; `None` means unbounded.
    pub range: Option<(f64, f64)>,
}

impl Parameter {
    pub fn in_range(&self, value: f64) -> bool {
        self.range.is_none_or(|(lo, hi)| (lo..=hi).contains(&value))
    }
}

/// Ordered, uniquely named list of measured parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterSchema {
    params: Vec<Parameter>,
}

impl Default for ParameterSchema {
    fn default() -> Self {
        let params = DEFAULT_PARAMETERS
            .iter()
            .map(|&(name, range)| Parameter {
                name: name.to_string(),
                range,
            })
            .collect();
        ParameterSchema { params }
    }
}

impl ParameterSchema {
    pub fn new(params: Vec<Parameter>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::Config("schema has no parameters".into()));
        }
        let mut seen = HashSet::new();
        for p in &params {
            if p.name.is_empty() || p.name.contains(',') {
                return Err(Error::Config(format!("invalid parameter name `{}`", p.name)));
            }
            if p.name == LOCATION_COLUMN || p.name == SEQ_COLUMN {
                return Err(Error::Config(format!("`{}` is a reserved column name", p.name)));
            }
            if !seen.insert(p.name.as_str()) {
                return Err(Error::Config(format!("duplicate parameter `{}`", p.name)));
            }
            if let Some((lo, hi)) = p.range {
                if !(lo <= hi) {
                    return Err(Error::Config(format!("parameter `{}` has min > max", p.name)));
                }
            }
        }
        Ok(ParameterSchema { params })
    }

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        ParameterSchema::new(
            names
                .iter()
                .map(|n| Parameter {
                    name: n.as_ref().to_string(),
                    range: None,
                })
                .collect(),
        )
    }

    /// Parses a schema file: one parameter per line, either `name` or
    /// `name,min,max`. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut params = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let range = match fields.len() {
                1 => None,
                3 => {
                    let num = |s: &str| {
                        s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                            Error::Config(format!("schema line {}: bad number `{s}`", lineno + 1))
                        })
                    };
                    Some((num(fields[1])?, num(fields[2])?))
                }
                _ => {
                    return Err(Error::Config(format!(
                        "schema line {}: expected `name` or `name,min,max`",
                        lineno + 1
                    )))
                }
            };
            params.push(Parameter {
                name: fields[0].to_string(),
                range,
            });
        }
        ParameterSchema::new(params)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ParameterSchema::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.params {
            match p.range {
                Some((lo, hi)) => out.push_str(&format!("{},{lo},{hi}\n", p.name)),
                None => out.push_str(&format!("{}\n", p.name)),
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|p| p.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::SchemaMismatch(format!("parameter `{name}` is not in the schema")))
    }

    /// True when both schemas list the same names, in any order.
    pub fn same_names(&self, other: &ParameterSchema) -> bool {
        self.len() == other.len() && self.names().all(|n| other.index_of(n).is_some())
    }
}

/// One sampling record.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub location_id: u8,
    /// Weekly observation order within the location.
    pub sequence_index: u64,
    /// One value per schema parameter, native units.
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    schema: ParameterSchema,
    samples: Vec<Sample>,
}

impl Dataset {
    /// Validates every sample against the schema. Rows in errors are
    /// 1-based positions in `samples`.
    pub fn new(schema: ParameterSchema, samples: Vec<Sample>) -> Result<Self> {
        let ph = schema.index_of(TARGET);
        for (i, s) in samples.iter().enumerate() {
            let row = i + 1;
            if s.values.len() != schema.len() {
                return Err(Error::Shape(format!(
                    "sample {row} has {} values, schema has {}",
                    s.values.len(),
                    schema.len()
                )));
            }
            if !LOCATION_IDS.contains(&s.location_id) {
                return Err(Error::Range {
                    row,
                    message: format!("location {} outside 1-10", s.location_id),
                });
            }
            if let Some(k) = s.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    row,
                    column: schema.params[k].name.clone(),
                    message: "value is not finite".into(),
                });
            }
            if let Some(k) = ph {
                let v = s.values[k];
                if !(PH_BOUNDS.0..=PH_BOUNDS.1).contains(&v) {
                    return Err(Error::Range {
                        row,
                        message: format!("pH {v} outside 0-14"),
                    });
                }
            }
        }
        Ok(Dataset { schema, samples })
    }

    pub fn schema(&self) -> &ParameterSchema {
        &self.schema
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let k = self.schema.require(name)?;
        Ok(self.samples.iter().map(|s| s.values[k]).collect())
    }

    /// Distinct location ids in ascending order.
    pub fn locations(&self) -> Vec<u8> {
        let mut ids: Vec<u8> = self.samples.iter().map(|s| s.location_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn filter_location(&self, location_id: u8) -> Dataset {
        self.select(|s| s.location_id == location_id)
    }

    fn select(&self, keep: impl Fn(&Sample) -> bool) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            samples: self.samples.iter().filter(|s| keep(s)).cloned().collect(),
        }
    }

    fn pick(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    /// Re-expresses the samples in `schema`'s column order. Both schemas must
    /// carry the same names.
    pub fn reorder_to(&self, schema: &ParameterSchema) -> Result<Dataset> {
        if !self.schema.same_names(schema) {
            return Err(Error::SchemaMismatch(format!(
                "dataset columns [{}] do not match [{}]",
                self.schema.names().collect::<Vec<_>>().join(","),
                schema.names().collect::<Vec<_>>().join(",")
            )));
        }
        let map: Vec<usize> = schema.names().map(|n| self.schema.index_of(n).unwrap()).collect();
        let samples = self
            .samples
            .iter()
            .map(|s| Sample {
                values: map.iter().map(|&k| s.values[k]).collect(),
                ..s.clone()
            })
            .collect();
        Ok(Dataset {
            schema: schema.clone(),
            samples,
        })
    }
}

/// Reads a dataset from a CSV file whose header matches `schema`.
pub fn load_csv(path: impl AsRef<Path>, schema: &ParameterSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema).map_err(|e| match e {
        Error::Csv { source, .. } => Error::csv(path, source),
        other => other,
    })
}

pub fn read_csv<R: Read>(reader: R, schema: &ParameterSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::csv("<csv>", e))?.clone();
    let find = |name: &str| -> Result<usize> {
        let hits: Vec<usize> = header.iter().enumerate().filter(|(_, h)| *h == name).map(|(i, _)| i).collect();
        match hits.as_slice() {
            [i] => Ok(*i),
            [] => Err(Error::SchemaMismatch(format!("missing column `{name}`"))),
            _ => Err(Error::SchemaMismatch(format!("duplicate column `{name}`"))),
        }
    };
    let loc_col = find(LOCATION_COLUMN)?;
    let seq_col = find(SEQ_COLUMN)?;
    let value_cols = schema.names().map(find).collect::<Result<Vec<_>>>()?;

    let mut samples = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::csv("<csv>", e))?;
        let cell = |col: usize| record.get(col).unwrap_or("");
        let parse_err = |col: usize, message: String| Error::Parse {
            row,
            column: header.get(col).unwrap_or("").to_string(),
            message,
        };

        let location_id: u8 = cell(loc_col)
            .parse()
            .map_err(|_| parse_err(loc_col, format!("`{}` is not a location id", cell(loc_col))))?;
        let sequence_index: u64 = cell(seq_col)
            .parse()
            .map_err(|_| parse_err(seq_col, format!("`{}` is not a sequence index", cell(seq_col))))?;
        let values = value_cols
            .iter()
            .map(|&col| {
                cell(col)
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(col, format!("`{}` is not a number", cell(col))))
            })
            .collect::<Result<Vec<_>>>()?;
        samples.push(Sample {
            location_id,
            sequence_index,
            values,
        });
    }
    Dataset::new(schema.clone(), samples)
}

pub fn write_csv(path: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_csv_to(&mut w, dataset).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_csv_to<W: Write>(w: &mut W, dataset: &Dataset) -> std::io::Result<()> {
    let mut header = vec![LOCATION_COLUMN, SEQ_COLUMN];
    header.extend(dataset.schema.names());
    writeln!(w, "{}", header.join(","))?;
    for s in &dataset.samples {
        write!(w, "{},{}", s.location_id, s.sequence_index)?;
        for v in &s.values {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Per-feature affine map from `[min, max]` onto `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalizer {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl Normalizer {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.is_empty() || min.len() != max.len() {
            return Err(Error::Shape(format!(
                "normalizer needs equally long non-empty bounds, got {} and {}",
                min.len(),
                max.len()
            )));
        }
        for (i, (lo, hi)) in min.iter().zip(&max).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || hi < lo {
                return Err(Error::Config(format!("normalizer feature {i}: invalid bounds [{lo}, {hi}]")));
            }
        }
        Ok(Normalizer { min, max })
    }

    /// Fits per-feature extrema over a non-empty set of rows.
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyDataset)?.as_ref();
        let mut min = first.to_vec();
        let mut max = first.to_vec();
        for r in rows {
            let r = r.as_ref();
            if r.len() != min.len() {
                return Err(Error::Shape(format!("row of length {} in {}-feature data", r.len(), min.len())));
            }
            for (k, &v) in r.iter().enumerate() {
                min[k] = min[k].min(v);
                max[k] = max[k].max(v);
            }
        }
        Normalizer::new(min, max)
    }

    pub fn len(&self) -> usize {
        self.min.len()
    }

    pub fn is_empty(&self) -> bool {
        self.min.is_empty()
    }

    pub fn min(&self) -> &[f64] {
        &self.min
    }

    pub fn max(&self) -> &[f64] {
        &self.max
    }

    /// A feature is degenerate when it was constant in the fitted data.
    pub fn is_degenerate(&self, feature: usize) -> bool {
        self.min[feature] == self.max[feature]
    }

    /// Native-units distance covered by one normalized unit.
    pub fn half_range(&self, feature: usize) -> f64 {
        (self.max[feature] - self.min[feature]) / 2.0
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.len() {
            return Err(Error::Shape(format!(
                "feature vector has length {}, normalizer expects {}",
                x.len(),
                self.len()
            )));
        }
        Ok(())
    }

    /// Maps min to -1 and max to +1. Values outside the fitted range
    /// extrapolate linearly; degenerate features map to 0.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        Ok(x.iter()
            .enumerate()
            .map(|(k, &v)| {
                if self.is_degenerate(k) {
                    0.0
                } else {
                    2.0 * (v - self.min[k]) / (self.max[k] - self.min[k]) - 1.0
                }
            })
            .collect())
    }

    /// Inverse of [`apply`](Self::apply); degenerate features map back to
    /// their constant value.
    pub fn invert(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_len(y)?;
        Ok(y.iter()
            .enumerate()
            .map(|(k, &v)| {
                if self.is_degenerate(k) {
                    self.min[k]
                } else {
                    (v + 1.0) / 2.0 * (self.max[k] - self.min[k]) + self.min[k]
                }
            })
            .collect())
    }

    /// Indices of features of `x` that fall outside the fitted range.
    pub fn out_of_range(&self, x: &[f64]) -> Vec<usize> {
        x.iter()
            .enumerate()
            .filter(|&(k, &v)| k < self.len() && (v < self.min[k] || v > self.max[k]))
            .map(|(k, _)| k)
            .collect()
    }

    /// Restricts the normalizer to the given features, in the given order.
    pub fn select(&self, features: &[usize]) -> Normalizer {
        Normalizer {
            min: features.iter().map(|&k| self.min[k]).collect(),
            max: features.iter().map(|&k| self.max[k]).collect(),
        }
    }
}

/// Fits a normalizer over every schema parameter of `d`.
pub fn fit_normalizer(d: &Dataset) -> Result<Normalizer> {
    let rows: Vec<&[f64]> = d.samples.iter().map(|s| s.values.as_slice()).collect();
    Normalizer::fit(&rows)
}

pub fn normalize(n: &Normalizer, x: &[f64]) -> Result<Vec<f64>> {
    n.apply(x)
}

/// Number of training samples out of `n`: `round(0.7 n)`, half rounded up,
/// with at least one sample on each side.
pub fn train_size(n: usize) -> usize {
    ((7 * n + 5) / 10).clamp(1, n.saturating_sub(1).max(1))
}

/// Seeded shuffle followed by a 70/30 cut. The same `(d, seed)` always
/// yields the same partition.
pub fn split_70_30(d: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = d.len();
    if n < 4 {
        return Err(Error::TooFewSamples { needed: 4, got: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, test) = order.split_at(train_size(n));
    Ok((d.pick(train), d.pick(test)))
}

/// Which schema parameters feed the network and which it predicts.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureLayout {
    pub inputs: Vec<String>,
    pub targets: Vec<String>,
}

impl FeatureLayout {
    /// Every schema parameter except `target` becomes an input, unless
    /// `include_target_input` is set, in which case the target is fed in too.
    pub fn for_target(schema: &ParameterSchema, target: &str, include_target_input: bool) -> Result<Self> {
        schema.require(target)?;
        let inputs = schema
            .names()
            .filter(|&n| include_target_input || n != target)
            .map(String::from)
            .collect();
        Ok(FeatureLayout {
            inputs,
            targets: vec![target.to_string()],
        })
    }

    pub fn input_indices(&self, schema: &ParameterSchema) -> Result<Vec<usize>> {
        self.inputs.iter().map(|n| schema.require(n)).collect()
    }

    pub fn target_indices(&self, schema: &ParameterSchema) -> Result<Vec<usize>> {
        self.targets.iter().map(|n| schema.require(n)).collect()
    }
}

pub(crate) fn gather(values: &[f64], indices: &[usize]) -> Vec<f64> {
    indices.iter().map(|&k| values[k]).collect()
}
