//! Command-line front end. Exit codes: 0 success, 2 input or configuration
//! error, 3 numerical failure.

use std::fmt::Write as _;
use std::fs::File;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::dataset::{load_csv, split_70_30, write_csv, Dataset, ParameterSchema, TARGET};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, summary_stats};
use crate::model::TrainedModel;
use crate::pipeline::{train_pipeline, PipelineConfig, TrainOutcome};
use crate::synthgen::{generate, shipped_profile, LocationProfile};
use crate::training::Termination;

/// Normalized training MSE at or below which a run that hit `max_epochs`
/// still counts as a success.
pub const MSE_CEILING: f64 = 0.05;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "phnet", version, about = "pH prediction with a Levenberg-Marquardt trained perceptron")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic sampling campaign.
    Gen(GenArgs),
    /// Write a built-in location profile to a file.
    Profile(ProfileArgs),
    /// Split a dataset 70/30 into `<out>_train.csv` and `<out>_test.csv`.
    Split(SplitArgs),
    /// Split, train and write the model with its reports.
    Train(TrainArgs),
    /// Score a model on a dataset.
    Evaluate(EvaluateArgs),
    /// Append predictions to the rows of a CSV file.
    Predict(PredictArgs),
    /// Mean and range of one parameter.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Profile file; see `phnet profile`.
    #[arg(long, conflicts_with = "location", required_unless_present = "location")]
    pub profile: Option<PathBuf>,
    /// Use the built-in profile of this location instead of a file.
    #[arg(long)]
    pub location: Option<u8>,
    #[arg(long, short = 'n', default_value_t = 48)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(long)]
    pub location: u8,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output stem.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// `key = value` training settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config file's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Train one model per sampling location.
    #[arg(long)]
    pub per_location: bool,
    /// Feed the target parameter to the network as an input too.
    #[arg(long)]
    pub include_target_input: bool,
    /// Model file. Reports are written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Report file; pair and scatter CSVs are written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long, default_value = TARGET)]
    pub parameter: String,
    #[arg(long)]
    pub per_location: bool,
}

/// Record of one invocation, written next to its outputs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub config: Vec<(String, String)>,
    /// `(path, sha256)` of every file read.
    pub inputs: Vec<(String, String)>,
    pub seed: Option<u64>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    fn new(command: &[String]) -> Self {
        RunManifest {
            command: command.to_vec(),
            ..Default::default()
        }
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        self.inputs.push((path.display().to_string(), hex::encode(Sha256::digest(&bytes))));
        Ok(())
    }

    fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "tool = phnet {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "command = {}", self.command.join(" "));
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "seed = {seed}");
        }
        for (k, v) in &self.config {
            let _ = writeln!(s, "config.{k} = {v}");
        }
        for (p, h) in &self.inputs {
            let _ = writeln!(s, "input = {p} sha256:{h}");
        }
        for p in &self.outputs {
            let _ = writeln!(s, "output = {p}");
        }
        s
    }

    fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_text())
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// `dir/name.ext` -> `dir/name<suffix>`
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

/// `dir/name.ext` -> `dir/name<infix>.ext`
fn with_infix(path: &Path, infix: &str) -> PathBuf {
    match path.extension() {
        Some(ext) => sibling(path, &format!("{infix}.{}", ext.to_string_lossy())),
        None => sibling(path, infix),
    }
}

fn load_schema(path: Option<&Path>, manifest: &mut RunManifest) -> Result<ParameterSchema> {
    match path {
        Some(p) => {
            manifest.input(p)?;
            ParameterSchema::load(p)
        }
        None => Ok(ParameterSchema::default()),
    }
}

pub fn cmd_gen(args: &GenArgs, command: &[String]) -> Result<()> {
    let mut manifest = RunManifest::new(command);
    let profile = match (&args.profile, args.location) {
        (Some(path), _) => {
            if !path.is_file() {
                return Err(Error::Config(format!("profile not found: {}", path.display())));
            }
            manifest.input(path)?;
            LocationProfile::load(path)?
        }
        (None, Some(id)) => shipped_profile(id)?,
        (None, None) => return Err(Error::Config("either --profile or --location is required".into())),
    };
    let schema = load_schema(args.schema.as_deref(), &mut manifest)?;
    let d = generate(&profile, &schema, args.n, args.seed)?;
    write_csv(&args.out, &d)?;
    manifest.seed = Some(args.seed);
    manifest.config = vec![
        ("location".into(), profile.location_id.to_string()),
        ("n".into(), args.n.to_string()),
    ];
    manifest.output(&args.out);
    manifest.write(&sibling(&args.out, ".manifest.txt"))
}

pub fn cmd_profile(args: &ProfileArgs, command: &[String]) -> Result<()> {
    let profile = shipped_profile(args.location)?;
    write_file(&args.out, &profile.to_text())?;
    let mut manifest = RunManifest::new(command);
    manifest.output(&args.out);
    manifest.write(&sibling(&args.out, ".manifest.txt"))
}

pub fn cmd_split(args: &SplitArgs, command: &[String]) -> Result<()> {
    let mut manifest = RunManifest::new(command);
    let schema = load_schema(args.schema.as_deref(), &mut manifest)?;
    manifest.input(&args.data)?;
    let d = load_csv(&args.data, &schema)?;
    let (train, test) = split_70_30(&d, args.seed)?;
    let train_path = sibling(&args.out, "_train.csv");
    let test_path = sibling(&args.out, "_test.csv");
    write_csv(&train_path, &train)?;
    write_csv(&test_path, &test)?;
    manifest.seed = Some(args.seed);
    manifest.output(&train_path);
    manifest.output(&test_path);
    manifest.write(&sibling(&args.out, ".manifest.txt"))
}

/// Whether a finished training run counts as a success.
pub fn training_succeeded(outcome: &TrainOutcome) -> bool {
    match outcome.report.termination {
        Termination::GoalReached => true,
        Termination::MaxEpochs => outcome.report.final_train_mse <= MSE_CEILING,
        Termination::GradientVanished | Termination::LambdaExceeded => false,
    }
}

fn train_report_text(outcome: &TrainOutcome) -> String {
    let mut s = outcome.report.to_text();
    let _ = writeln!(s, "n_train = {}", outcome.n_train);
    let _ = writeln!(s, "n_test = {}", outcome.n_test);
    let _ = writeln!(s, "n_inputs = {}", outcome.model.network.n_in());
    let _ = writeln!(s, "parameter_count = {}", outcome.model.network.parameter_count());
    let half = outcome.model.network.target_normalizer().half_range(0);
    let _ = writeln!(s, "final_train_mse_native = {:.16e}", outcome.report.final_train_mse * half * half);
    for line in outcome.train_eval.to_text().lines() {
        let _ = writeln!(s, "train.{line}");
    }
    match &outcome.test_eval {
        Some(e) => {
            for line in e.to_text().lines() {
                let _ = writeln!(s, "test.{line}");
            }
        }
        None => s.push_str("test = omitted\n"),
    }
    s
}

/// Trains one model (or one per location) and returns whether every run
/// succeeded.
pub fn cmd_train(args: &TrainArgs, command: &[String]) -> Result<bool> {
    let mut manifest = RunManifest::new(command);
    let schema = load_schema(args.schema.as_deref(), &mut manifest)?;
    let mut cfg = match &args.config {
        Some(p) => {
            manifest.input(p)?;
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            PipelineConfig::parse(&text)?
        }
        None => PipelineConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    cfg.include_target_input |= args.include_target_input;
    manifest.input(&args.data)?;
    let d = load_csv(&args.data, &schema)?;
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    manifest.seed = Some(cfg.train.seed);
    manifest.config = cfg.entries();

    let jobs: Vec<(PathBuf, Dataset)> = if args.per_location {
        d.locations()
            .into_iter()
            .map(|id| (with_infix(&args.out, &format!("_loc{id}")), d.filter_location(id)))
            .collect()
    } else {
        vec![(args.out.clone(), d)]
    };

    let mut all_ok = true;
    for (model_path, subset) in &jobs {
        let outcome = train_pipeline(subset, &cfg)?;
        outcome.model.save(model_path)?;
        let report_path = sibling(model_path, ".train.txt");
        let trace_path = sibling(model_path, ".trace.csv");
        write_file(&report_path, &train_report_text(&outcome))?;
        write_file(&trace_path, &outcome.report.trace_csv())?;
        manifest.output(model_path);
        manifest.output(&report_path);
        manifest.output(&trace_path);
        let ok = training_succeeded(&outcome);
        if !ok {
            eprintln!(
                "{}: training ended with {} at normalized MSE {:e}",
                model_path.display(),
                outcome.report.termination,
                outcome.report.final_train_mse
            );
        }
        all_ok &= ok;
    }
    manifest.write(&sibling(&args.out, ".manifest.txt"))?;
    Ok(all_ok)
}

pub fn cmd_evaluate(args: &EvaluateArgs, command: &[String]) -> Result<()> {
    let mut manifest = RunManifest::new(command);
    manifest.input(&args.model)?;
    let model = TrainedModel::load(&args.model)?;
    manifest.input(&args.data)?;
    let d = load_csv(&args.data, &model.schema)?;
    let report = evaluate(&model, &d)?;
    if let Some(note) = &report.note {
        eprintln!("{note}");
    }
    let pairs = sibling(&args.out, ".pairs.csv");
    let scatter = sibling(&args.out, ".scatter.csv");
    write_file(&args.out, &report.to_text())?;
    write_file(&pairs, &report.pairs_csv())?;
    write_file(&scatter, &report.scatter_csv())?;
    manifest.seed = Some(model.seed);
    manifest.output(&args.out);
    manifest.output(&pairs);
    manifest.output(&scatter);
    manifest.write(&sibling(&args.out, ".manifest.txt"))
}

/// Copies every input row and appends the prediction and a warnings field.
/// Warnings name inputs outside their schema range (`name:schema_range`)
/// or outside the training range (`name:extrapolated`).
pub fn cmd_predict(args: &PredictArgs, command: &[String]) -> Result<()> {
    let mut manifest = RunManifest::new(command);
    manifest.input(&args.model)?;
    let model = TrainedModel::load(&args.model)?;
    manifest.input(&args.data)?;

    let file = File::open(&args.data).map_err(|e| Error::io(&args.data, e))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header = rdr.headers().map_err(|e| Error::csv(&args.data, e))?.clone();
    let predicted_col = format!("predicted_{}", model.layout.targets[0].to_lowercase());
    let out_file = File::create(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(out_file));
    let io_err = |e: csv::Error| Error::csv(&args.out, e);

    if header.is_empty() {
        let mut h: Vec<String> = vec!["location".into(), "seq".into()];
        h.extend(model.schema.names().map(String::from));
        h.push(predicted_col);
        h.push("warnings".into());
        w.write_record(&h).map_err(io_err)?;
    } else {
        let columns = model
            .layout
            .inputs
            .iter()
            .map(|name| {
                header
                    .iter()
                    .position(|h| h.trim() == name)
                    .ok_or_else(|| Error::SchemaMismatch(format!("missing column `{name}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out_header: Vec<&str> = header.iter().collect();
        out_header.push(&predicted_col);
        out_header.push("warnings");
        w.write_record(&out_header).map_err(io_err)?;

        let net = &model.network;
        let params: Vec<_> = model
            .layout
            .inputs
            .iter()
            .map(|n| &model.schema.params()[model.schema.index_of(n).expect("validated on load")])
            .collect();
        for (i, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::csv(&args.data, e))?;
            let raw = columns
                .iter()
                .map(|&c| {
                    let cell = record.get(c).unwrap_or("").trim();
                    cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                        row: i + 1,
                        column: header.get(c).unwrap_or("").to_string(),
                        message: format!("`{cell}` is not a number"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let extrapolated = net.input_normalizer().out_of_range(&raw);
            let warnings: Vec<String> = raw
                .iter()
                .enumerate()
                .filter_map(|(k, &v)| {
                    if !params[k].in_range(v) {
                        Some(format!("{}:schema_range", params[k].name))
                    } else if extrapolated.contains(&k) {
                        Some(format!("{}:extrapolated", params[k].name))
                    } else {
                        None
                    }
                })
                .collect();
            let prediction = net.predict(&raw)?[0];
            let mut fields: Vec<String> = record.iter().map(String::from).collect();
            fields.push(prediction.to_string());
            fields.push(warnings.join(";"));
            w.write_record(&fields).map_err(io_err)?;
        }
    }
    w.flush().map_err(|e| Error::io(&args.out, e))?;
    manifest.seed = Some(model.seed);
    manifest.output(&args.out);
    manifest.write(&sibling(&args.out, ".manifest.txt"))
}

pub fn cmd_stats(args: &StatsArgs) -> Result<String> {
    let mut scratch = RunManifest::default();
    let schema = load_schema(args.schema.as_deref(), &mut scratch)?;
    let d = load_csv(&args.data, &schema)?;
    let mut out = String::from("scope,n,mean,min,max\n");
    let mut line = |scope: String, d: &Dataset| -> Result<()> {
        let s = summary_stats(d, &args.parameter)?;
        let _ = writeln!(out, "{scope},{},{},{},{}", d.len(), s.mean, s.min, s.max);
        Ok(())
    };
    if args.per_location {
        for id in d.locations() {
            line(format!("location-{id}"), &d.filter_location(id))?;
        }
    } else {
        line("all".into(), &d)?;
    }
    Ok(out)
}

/// Exit code for an error: numerical failures map to 3, the rest to 2.
pub fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::NotPositiveDefinite { .. } | Error::NonFinite(_) => EXIT_NUMERICAL,
        _ => EXIT_INPUT,
    }
}

/// Runs a parsed command line. `command` is echoed into the run manifest.
pub fn run(cli: Cli, command: &[String]) -> ExitCode {
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a, command).map(|_| EXIT_OK),
        Command::Profile(a) => cmd_profile(a, command).map(|_| EXIT_OK),
        Command::Split(a) => cmd_split(a, command).map(|_| EXIT_OK),
        Command::Train(a) => cmd_train(a, command).map(|ok| if ok { EXIT_OK } else { EXIT_NUMERICAL }),
        Command::Evaluate(a) => cmd_evaluate(a, command).map(|_| EXIT_OK),
        Command::Predict(a) => cmd_predict(a, command).map(|_| EXIT_OK),
        Command::Stats(a) => cmd_stats(a).map(|text| {
            let _ = std::io::stdout().write_all(text.as_bytes());
            EXIT_OK
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
