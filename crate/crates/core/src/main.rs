use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use medqn::agents::{AgentKind, LossReduction};
use medqn::diagnostics::{
    check_bound_suite, check_gradients_suite, linear_recovery_suite, run_sine_two_stage,
};
use medqn::envs::Task;
use medqn::harness::{emit_plot, run_sweep, run_training, ConfigFile, Overrides, RunConfig, SweepConfig, Summary};
use medqn::{Error, Result};

#[derive(Parser)]
#[command(name = "medqn", version, about = "Memory-efficient DQN experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent and write its metrics CSV.
    Train(TrainArgs),
    /// Train every agent × buffer size × seed combination and summarize final returns.
    Sweep(SweepArgs),
    /// Two-stage sine regression with and without consolidation.
    SineDemo(SineArgs),
    /// Run the numerical self-checks.
    Check(CheckArgs),
    /// Plot mean return curves from metrics CSVs as SVG.
    Plot(PlotArgs),
}

#[derive(Args, Default)]
struct HyperArgs {
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    lambda_start: Option<f64>,
    #[arg(long)]
    lambda_end: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    c_target: Option<u64>,
    #[arg(long)]
    c_current: Option<u64>,
    #[arg(long)]
    warmup: Option<u64>,
    /// `mean` (default) or `sum` normalization of the loss terms.
    #[arg(long)]
    loss_reduction: Option<LossReduction>,
}

impl HyperArgs {
    fn overrides(&self, buffer_size: Option<usize>) -> Overrides {
        Overrides {
            steps: self.steps,
            buffer_size,
            lr: self.lr,
            lambda_start: self.lambda_start,
            lambda_end: self.lambda_end,
            epochs: self.epochs,
            c_target: self.c_target,
            c_current: self.c_current,
            warmup_steps: self.warmup,
            loss_reduction: self.loss_reduction,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// JSON run description; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<Task>,
    /// Output directory for metrics files.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    log_every: Option<u64>,
    /// Disable the MountainCar greedy-action probe.
    #[arg(long)]
    no_probe: bool,
    #[command(flatten)]
    hyper: HyperArgs,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    agent: Option<AgentKind>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    buffer_size: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated agents.
    #[arg(long, value_delimiter = ',', default_values = ["dqn", "dqn_s", "medqn_u"])]
    agent: Vec<AgentKind>,
    /// Seeds as a list (`0,1,2`) or half-open range (`0..20`).
    #[arg(long, default_value = "0..20", value_parser = parse_seeds)]
    seed: SeedList,
    /// Comma-separated buffer sizes; each agent's preset when omitted.
    #[arg(long, value_delimiter = ',')]
    buffer_size: Vec<usize>,
}

#[derive(Args)]
struct SineArgs {
    #[arg(long, default_value = "0..10", value_parser = parse_seeds)]
    seed: SeedList,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Gradients,
    Bound,
    Linear,
    All,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(value_enum, default_value = "all")]
    suite: Suite,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PlotArgs {
    /// Metrics CSV files; files differing only in the `_s<seed>` suffix are averaged.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[arg(long, default_value = "returns.svg")]
    out: PathBuf,
}

#[derive(Clone)]
struct SeedList(Vec<u64>);

fn parse_seeds(text: &str) -> std::result::Result<SeedList, String> {
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| format!("bad seed range start: {e}"))?;
        let b: u64 = b.trim().parse().map_err(|e| format!("bad seed range end: {e}"))?;
        if a >= b {
            return Err(format!("empty seed range {text}"));
        }
        return Ok(SeedList((a..b).collect()));
    }
    text.split(',')
        .map(|s| s.trim().parse::<u64>().map_err(|e| format!("bad seed '{s}': {e}")))
        .collect::<std::result::Result<_, _>>()
        .map(SeedList)
}

struct Resolved {
    file: ConfigFile,
    overrides: Overrides,
}

fn resolve(run: &RunArgs, buffer_size: Option<usize>) -> Result<Resolved> {
    let file = match &run.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let overrides = file.overrides.merged_with(&run.hyper.overrides(buffer_size));
    Ok(Resolved { file, overrides })
}

fn finish_run(cfg: &mut RunConfig, run: &RunArgs, file: &ConfigFile) -> Result<()> {
    if let Some(v) = run.log_every.or(file.log_every) {
        cfg.log_every = v;
    }
    if run.no_probe {
        cfg.probe = false;
    } else if let Some(p) = file.probe {
        cfg.probe = p;
    }
    if let Some(out) = run.out.clone().or_else(|| file.out.clone()) {
        cfg.out_dir = out;
    }
    cfg.validate()
}

fn train(args: &TrainArgs) -> Result<()> {
    let Resolved { file, overrides } = resolve(&args.run, args.buffer_size)?;
    let task = args.run.task.or(file.task).unwrap_or(Task::MountainCar);
    let agent = args.agent.or(file.agent).unwrap_or(AgentKind::MedqnU);
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let mut cfg = RunConfig::from_preset(task, agent, seed, &overrides)?;
    finish_run(&mut cfg, &args.run, &file)?;
    let (path, outcome) = run_training(&cfg)?;
    println!(
        "{}: {} episodes, final avg return {:.2}, metrics in {}",
        cfg.label(),
        outcome.episode_returns.len(),
        outcome.final_avg_return(),
        path.display()
    );
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let Resolved { file, overrides } = resolve(&args.run, None)?;
    let task = args.run.task.or(file.task).unwrap_or(Task::MountainCar);
    // A probe setting is validated per run, so derive defaults from a template run.
    let mut template = RunConfig::from_preset(task, args.agent[0], 0, &overrides)?;
    finish_run(&mut template, &args.run, &file)?;
    let buffer_sizes = if args.buffer_size.is_empty() {
        vec![overrides.buffer_size]
    } else {
        args.buffer_size.iter().copied().map(Some).collect()
    };
    let cfg = SweepConfig {
        task,
        agents: args.agent.clone(),
        buffer_sizes,
        seeds: args.seed.0.clone(),
        overrides,
        log_every: template.log_every,
        probe: template.probe,
        out_dir: template.out_dir,
    };
    let (path, rows) = run_sweep(&cfg)?;
    for r in &rows {
        println!(
            "{:<10} buffer {:>6}: {:>8.2} ± {:.2} over {} runs ({} failed)",
            r.agent,
            r.buffer_size,
            r.mean_final_return,
            r.two_se,
            r.runs - r.failed,
            r.failed
        );
    }
    println!("summary in {}", path.display());
    Ok(())
}

fn sine_demo(args: &SineArgs) -> Result<()> {
    let mut plain = Vec::new();
    let mut consolidated = Vec::new();
    for &seed in &args.seed.0 {
        let a = run_sine_two_stage(false, seed)?;
        let b = run_sine_two_stage(true, seed)?;
        println!(
            "seed {seed}: stage-1 region mse {:.4} without, {:.4} with consolidation",
            a.mse_stage1_region, b.mse_stage1_region
        );
        plain.push(a.mse_stage1_region);
        consolidated.push(b.mse_stage1_region);
    }
    let (a, b) = (Summary::of(&plain), Summary::of(&consolidated));
    println!("mean: {:.4} without, {:.4} with consolidation", a.mean, b.mean);
    Ok(())
}

fn check(args: &CheckArgs) -> Result<bool> {
    let all = matches!(args.suite, Suite::All);
    let mut ok = true;
    if all || matches!(args.suite, Suite::Gradients) {
        let r = check_gradients_suite(100, args.seed)?;
        println!(
            "gradients: {} instances, max relative error {:.2e}: {}",
            r.instances.len(),
            r.max_rel_error,
            verdict(r.passed())
        );
        ok &= r.passed();
    }
    if all || matches!(args.suite, Suite::Bound) {
        let r = check_bound_suite(1000, args.seed)?;
        println!(
            "bound: {} instances, {} violations, worst margin {:.3e}: {}",
            r.instances,
            r.violations,
            r.worst_margin,
            verdict(r.passed())
        );
        ok &= r.passed();
    }
    if all || matches!(args.suite, Suite::Linear) {
        let r = linear_recovery_suite(100, 32, args.seed)?;
        println!(
            "linear: {} trials, max error {:.2e}, max residual {:.2e}, resample rate {:.3}: {}",
            r.trials,
            r.max_abs_error,
            r.max_residual,
            r.resample_rate(),
            verdict(r.passed())
        );
        ok &= r.passed();
    }
    Ok(ok)
}

fn verdict(passed: bool) -> &'static str {
    if passed {
        "ok"
    } else {
        "FAILED"
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(a) => train(a),
        Command::Sweep(a) => sweep(a),
        Command::SineDemo(a) => sine_demo(a),
        Command::Check(a) => check(a).and_then(|ok| {
            if ok {
                Ok(())
            } else {
                Err(Error::NonFinite("a numerical check failed".into()))
            }
        }),
        Command::Plot(a) => emit_plot(&a.files, &a.out).map(|()| println!("wrote {}", a.out.display())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
