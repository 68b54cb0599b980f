use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use bregmantron::train::{EtaMode, SlopeSchedule, Variant};
use bregmantron::PiecewiseAffineLink;
use bregmantron_harness::criteria::{run_criterion, IDS};
use bregmantron_harness::curves::{asymmetry_at_zero, export_curves, write_curves};
use bregmantron_harness::output::read_json;
use bregmantron_harness::tasks::default_data_dir;
use bregmantron_harness::{
    run_experiment, run_transfer, DatasetSpec, ExperimentSpec, HarnessError, Method, Result,
    TrainedModel, TransferSpec,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "bregmantron", version, about = "Learn a proper loss with a linear classifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one method on one dataset and write its trace and summary.
    Train(TrainArgs),
    /// Score a saved model on a dataset's test split.
    Eval(EvalArgs),
    /// Learn a link on one task and reuse it on another.
    Transfer(TransferArgs),
    /// Write link and loss curves of a saved link as CSV.
    ExportCurves(CurveArgs),
    /// Run the acceptance checks.
    Selftest(SelftestArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Logistic,
    Glmtron,
    Slisotron,
    Bregmantron,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Standard,
    Approx,
    Label,
    Stability,
}

/// Overrides applied on top of a JSON config.
#[derive(Args)]
struct Overrides {
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    nt: Option<f64>,
    #[arg(long = "Nt")]
    big_nt: Option<f64>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Band for `--variant stability`.
    #[arg(long, default_value_t = 0.1)]
    band: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Experiment spec as JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct EvalArgs {
    /// `model.json` written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dataset: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// The model was trained without a bias feature.
    #[arg(long)]
    no_bias: bool,
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TransferArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    source: Option<String>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct CurveArgs {
    /// `link.json` written by `train`.
    #[arg(long)]
    link: PathBuf,
    #[arg(long, default_value_t = 201)]
    grid: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SelftestArgs {
    /// Criteria to run, e.g. `--only 1,2,8`; all by default.
    #[arg(long, value_delimiter = ',')]
    only: Vec<u8>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Print results as JSON lines.
    #[arg(long)]
    json: bool,
}

fn method(arg: MethodArg) -> Method {
    match arg {
        MethodArg::Logistic => Method::logistic(),
        MethodArg::Glmtron => Method::Glmtron,
        MethodArg::Slisotron => Method::Slisotron,
        MethodArg::Bregmantron => Method::Bregmantron,
    }
}

fn apply(config: &mut bregmantron::TrainConfig, o: &Overrides) -> Result<()> {
    if let Some(iters) = o.iters {
        config.iterations = iters;
    }
    if let Some(eta) = o.eta {
        config.eta = EtaMode::Fixed { eta };
    }
    if o.nt.is_some() || o.big_nt.is_some() {
        match &mut config.slopes {
            SlopeSchedule::Constant { n, big_n, .. } => {
                *n = o.nt.unwrap_or(*n);
                *big_n = o.big_nt.unwrap_or(*big_n);
            }
            SlopeSchedule::Adaptive { .. } => {
                return Err(HarnessError::Spec("--nt/--Nt apply to constant slope bounds only".into()))
            }
        }
    }
    if let Some(variant) = o.variant {
        config.variant = match variant {
            VariantArg::Standard => Variant::Standard,
            VariantArg::Approx => Variant::Approx,
            VariantArg::Label => Variant::Label,
            VariantArg::Stability => Variant::Stability {
                alpha: o.band,
                beta: o.band,
            },
        };
    }
    if let Some(seed) = o.seed {
        config.seed = seed;
    }
    Ok(())
}

/// Pretty JSON on stdout; a reader that hung up early is not an error.
fn print(value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(HarnessError::Write {
            path: PathBuf::from("<stdout>"),
            source: e,
        }),
        _ => Ok(()),
    }
}

fn train(args: TrainArgs) -> Result<()> {
    let mut spec = match &args.config {
        Some(path) => read_json::<ExperimentSpec>(path)?,
        None => {
            let dataset = args
                .dataset
                .as_deref()
                .ok_or_else(|| HarnessError::Spec("--dataset or --config is required".into()))?;
            let method = args.method.map_or(Method::Bregmantron, method);
            ExperimentSpec::new(dataset.parse()?, method, Default::default())
        }
    };
    if args.config.is_some() {
        if let Some(dataset) = &args.dataset {
            spec.dataset = dataset.parse()?;
        }
        if let Some(m) = args.method {
            spec.method = method(m);
        }
    }
    apply(&mut spec.config, &args.overrides)?;
    if let Some(dir) = &args.overrides.data_dir {
        spec.data_dir = dir.clone();
    }
    if args.out.is_some() {
        spec.output = args.out;
    }
    print(&run_experiment(&spec)?.summary)
}

fn eval(args: EvalArgs) -> Result<()> {
    let model: TrainedModel = read_json(&args.model)?;
    let dataset: DatasetSpec = args.dataset.parse()?;
    let data_dir = args.data_dir.unwrap_or_else(default_data_dir);
    let split = dataset.load(&data_dir, args.seed, !args.no_bias)?;
    print(&json!({
        "dataset": dataset.to_string(),
        "auc_train": model.auc(&split.train)?,
        "auc_test": model.auc(&split.test)?,
    }))
}

fn transfer(args: TransferArgs) -> Result<()> {
    let mut spec = match &args.config {
        Some(path) => read_json::<TransferSpec>(path)?,
        None => {
            let missing = || HarnessError::Spec("--source and --target, or --config, are required".into());
            TransferSpec {
                source: args.source.as_deref().ok_or_else(missing)?.parse()?,
                target: args.target.as_deref().ok_or_else(missing)?.parse()?,
                config: Default::default(),
                data_dir: default_data_dir(),
                output: None,
            }
        }
    };
    if args.config.is_some() {
        if let Some(source) = &args.source {
            spec.source = source.parse()?;
        }
        if let Some(target) = &args.target {
            spec.target = target.parse()?;
        }
    }
    apply(&mut spec.config, &args.overrides)?;
    if let Some(dir) = &args.overrides.data_dir {
        spec.data_dir = dir.clone();
    }
    if args.out.is_some() {
        spec.output = args.out;
    }
    print(&run_transfer(&spec)?)
}

fn curves(args: CurveArgs) -> Result<()> {
    let link: PiecewiseAffineLink = read_json(&args.link)?;
    let rows = export_curves(&link, args.grid)?;
    write_curves(&args.out, &rows)?;
    print(&json!({
        "rows": rows.len(),
        "u_at_zero": link.eval(0.0),
        "asymmetry_at_zero": asymmetry_at_zero(&link),
    }))
}

fn selftest(args: SelftestArgs) -> Result<bool> {
    let data_dir = args.data_dir.unwrap_or_else(default_data_dir);
    let ids = if args.only.is_empty() { IDS.to_vec() } else { args.only };
    let mut all_passed = true;
    for id in ids {
        let result = run_criterion(id, &data_dir);
        all_passed &= result.passed;
        if args.json {
            println!("{}", serde_json::to_string(&result)?);
        } else {
            println!("{}", result.line());
        }
    }
    Ok(all_passed)
}

fn fail(error: &HarnessError) -> ExitCode {
    let report = json!({ "kind": error.kind(), "message": error.to_string() });
    eprintln!("{report}");
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Train(args) => train(args).map(|()| true),
        Command::Eval(args) => eval(args).map(|()| true),
        Command::Transfer(args) => transfer(args).map(|()| true),
        Command::ExportCurves(args) => curves(args).map(|()| true),
        Command::Selftest(args) => selftest(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => fail(&e),
    }
}
