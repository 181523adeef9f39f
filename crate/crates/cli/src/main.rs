mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use condflow::datagen::{Dataset, META_SCHEMA};
use condflow::experiments::{self as exp, ExperimentConfig, OutputDir};
use condflow::flow::{FlowModel, MODEL_SCHEMA};
use condflow::training::metrics_csv;

#[derive(Parser, Debug)]
#[command(name = "condflow", version, about = "Conditional normalizing-flow classifier experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Starting configuration: blobs, annuli or glyph.
    #[arg(long, global = true, default_value = "blobs")]
    preset: String,

    /// TOML file merged over the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Worker threads; 0 lets the runtime decide. Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Config overrides such as `--train.epochs 5` or `--train.epochs=5`.
    #[arg(global = true, trailing_var_arg = true, allow_hyphen_values = true, num_args = 0..)]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Generate the configured dataset and save it with its train/test split.
    GenData,
    /// Train a model and write it with its training curve.
    Train,
    /// Accuracy, NLL and detection rates of a saved model.
    Eval,
    /// Attack suite against a saved model.
    Attack,
    /// Likelihood along straight lines between test points of different classes.
    Interpolate,
    /// Correct-class vs best-wrong-class NLL per test sample.
    Histogram,
    /// Solve and verify the two-annulus counter-example.
    Verify,
    /// One model per background blur bandwidth on glyph data.
    Sweep,
    /// Print the effective configuration as TOML.
    ShowConfig,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::GenData => "gen-data",
            Command::Train => "train",
            Command::Eval => "eval",
            Command::Attack => "attack",
            Command::Interpolate => "interpolate",
            Command::Histogram => "histogram",
            Command::Verify => "verify",
            Command::Sweep => "sweep",
            Command::ShowConfig => "show-config",
        }
    }
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<condflow::Error> for Failure {
    fn from(e: condflow::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global().map_err(|e| Failure::Config(e.to_string()))?;
    }
    let mut cfg = config::load(&cli.preset, cli.config.as_deref(), &cli.overrides).map_err(Failure::Config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.out_dir = dir.clone();
    }
    cfg.validate()?;
    if cli.command == Command::ShowConfig {
        print!("{}", toml::to_string_pretty(&cfg).map_err(|e| Failure::Config(e.to_string()))?);
        return Ok(());
    }
    let mut out = OutputDir::open(&cfg.out_dir, cli.command.name(), cfg.seed)?;
    match cli.command {
        Command::GenData => gen_data(&cfg, &mut out)?,
        Command::Train => train(&cfg, &mut out)?,
        Command::Eval => eval(&cfg, &mut out)?,
        Command::Attack => attack(&cfg, &mut out)?,
        Command::Interpolate => interpolate(&cfg, &mut out)?,
        Command::Histogram => histogram(&cfg, &mut out)?,
        Command::Verify => verify(&cfg, &mut out)?,
        Command::Sweep => sweep(&cfg, &mut out)?,
        Command::ShowConfig => unreachable!(),
    }
    out.finish()?;
    Ok(())
}

fn write_json<T: serde::Serialize>(out: &mut OutputDir, name: &str, schema: &str, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    out.write(name, schema, &text)?;
    Ok(())
}

fn load_model(cfg: &ExperimentConfig) -> Result<FlowModel, Failure> {
    let path = cfg.model.as_ref().ok_or_else(|| Failure::Config("this command needs --model <path> (see `train`)".into()))?;
    if !path.exists() {
        return Err(Failure::Config(format!("model file {} does not exist", path.display())));
    }
    Ok(FlowModel::load(path)?)
}

fn load_data(cfg: &ExperimentConfig, model: &FlowModel) -> Result<Dataset, Failure> {
    let ds = cfg.data.build(cfg.seed)?;
    if ds.dim != model.dim || ds.classes != model.classes {
        return Err(Failure::Config(format!(
            "dataset ({} dims, {} classes) does not match the model ({} dims, {} classes)",
            ds.dim, ds.classes, model.dim, model.classes
        )));
    }
    Ok(ds)
}

fn gen_data(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), Failure> {
    let ds = cfg.data.build(cfg.seed)?;
    let name = "data.txt";
    ds.save(out.path(name))?;
    out.record(name, "condflow.dataset/1");
    let meta = Dataset::meta_path(&out.path(name));
    out.record(&meta.file_name().unwrap().to_string_lossy(), META_SCHEMA);
    println!("{} samples ({} dims, {} classes) -> {}", ds.len(), ds.dim, ds.classes, out.path(name).display());
    Ok(())
}

fn train(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), Failure> {
    let ds = cfg.data.build(cfg.seed)?;
    let outcome = exp::train_model(cfg, &ds)?;
    let model = &outcome.model;
    let threshold = exp::calibrate(cfg, model, &ds)?;
    let model_path = cfg.model.clone().unwrap_or_else(|| out.path("model.json"));
    model.save(&model_path)?;
    if let Ok(rel) = model_path.strip_prefix(out.root()) {
        out.record(&rel.to_string_lossy(), MODEL_SCHEMA);
    }
    out.write("metrics.csv", "condflow.metrics/1", &metrics_csv(&outcome.metrics))?;
    write_json(out, "threshold.json", "condflow.threshold/1", &threshold)?;
    let rows = [
        exp::evaluate_split(model, "train", &ds.train_samples(), &threshold)?,
        exp::evaluate_split(model, "test", &ds.test_samples(), &threshold)?,
    ];
    out.write("eval.csv", "condflow.eval/1", &exp::eval_csv(&rows))?;
    print!("{}", exp::eval_csv(&rows));
    println!("model -> {}", model_path.display());
    Ok(())
}

fn eval(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), Failure> {
    let model = load_model(cfg)?;
    let ds = load_data(cfg, &model)?;
    let threshold = exp::calibrate(cfg, &model, &ds)?;
    let rows = [
        exp::evaluate_split(&model, "train", &ds.train_samples(), &threshold)?,
        exp::evaluate_split(&model, "test", &ds.test_samples(), &threshold)?,
    ];
    out.write("eval.csv", "condflow.eval/1", &exp::eval_csv(&rows))?;
    print!("{}", exp::eval_csv(&rows));
    Ok(())
}

fn attack(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), Failure> {
    let model = load_model(cfg)?;
    let ds = load_data(cfg, &model)?;
    let threshold = exp::calibrate(cfg, &model, &ds)?;
    let objective = format!("{:?}", cfg.objective.kind).to_lowercase();
    let result = exp::run_attack_eval(&model, &ds, &threshold, &cfg.attack, &objective)?;
    out.write("attacks.csv", "condflow.attacks/1", &result.to_csv())?;
    print!("{}", result.to_csv());
    Ok(())
}

fn interpolate(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), Failure> {
    let model = load_model(cfg)?;
    let ds = load_data(cfg, &model)?;
    let threshold = exp::calibrate(cfg, &model, &ds)?;
    let i = &cfg.interpolation;
    let result = exp::run_interpolation(&model, &ds.test_samples(), &threshold, i.pairs, i.alphas, cfg.seed)?;
    out.write("interpolation.csv", "condflow.interpolation/1", &result.to_csv())?;
    write_json(out, "interpolation_summary.json", "condflow.interpolation-summary/1", &result.summary)?;
    let s = &result.summary;
    println!(
        "pairs {} fully in-distribution {:.4} endpoint NLL {:.4} interior NLL {:.4}",
        s.pairs, s.fraction_fully_in_distribution, s.endpoint_mean_nll, s.interior_mean_nll
    );
    Ok(())
}

fn histogram(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), Failure> {
    let model = load_model(cfg)?;
    let ds = load_data(cfg, &model)?;
    let result = exp::run_wrongclass_histogram(&model, &ds.test_samples())?;
    out.write("wrongclass.csv", "condflow.wrongclass/1", &result.to_csv())?;
    write_json(out, "wrongclass_summary.json", "condflow.wrongclass-summary/1", &result.summary)?;
    let s = &result.summary;
    println!("accuracy {:.4} median gap {:.4} NLL IQR {:.4} overlap {}", s.accuracy, s.median_gap, s.nll_iqr, s.overlap);
    Ok(())
}

fn verify(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), Failure> {
    let v = &cfg.verify;
    let result = exp::run_verify(v.epsilon, v.delta, v.shell, v.samples, v.mc_samples, cfg.seed)?;
    out.write("verify.csv", "condflow.verify/1", &result.to_csv())?;
    out.write("conditions.csv", "condflow.conditions/1", &result.report.conditions_csv())?;
    out.write("verify.txt", "text", &result.to_text())?;
    print!("{}", result.to_text());
    Ok(())
}

fn sweep(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), Failure> {
    let rows = exp::run_entropy_sweep(cfg);
    out.write("sweep.csv", "condflow.sweep/1", &exp::sweep_csv(&rows))?;
    print!("{}", exp::sweep_csv(&rows));
    Ok(())
}
