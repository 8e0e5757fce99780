//! `taskexec`: plan, run and evaluate blocks-world tasks, and generate
//! expert arm demonstrations.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use taskexec_core::domain::{ground_skills, parse_domain, Domain};
use taskexec_core::executor::{trace_event_json, write_trace_jsonl};
use taskexec_core::experiment::{
    run_episode, run_mode, trial_seed, ExperimentSpec, Mode, ModeResult, ResetPolicy, ResultsTable,
};
use taskexec_core::expert::{build_dataset, write_dataset, ArmModel, CSpaceGrid, ExpertConfig, Obstacle};
use taskexec_core::logic::Vocabulary;
use taskexec_core::planner::{Planner, PlannerConfig};
use taskexec_core::sim::{goal_achieved, parse_scenario, FailureModel, Scenario, SensorModel};

const STANDARD_DOMAIN: &str = include_str!("../../../domains/blocks.domain");
const STACKING: &str = include_str!("../../../scenarios/stacking.scn");
const REORDER: &str = include_str!("../../../scenarios/reorder.scn");

const EXIT_USAGE: u8 = 1;
const EXIT_NO_PLAN: u8 = 2;

#[derive(Parser)]
#[command(name = "taskexec", version, about = "Reactive task execution over a skill library")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the shortest plan for a scenario's first goal.
    Plan(ProblemArgs),
    /// Run one simulated episode.
    Run {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long, value_enum, default_value = "full")]
        mode: ModeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the execution trace as JSON lines.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Run Monte-Carlo trials for one or all execution modes.
    Experiment {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        /// Defaults to all three modes.
        #[arg(long, value_enum)]
        mode: Vec<ModeArg>,
        #[arg(long, default_value_t = 250)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "episode")]
        reset: ResetArg,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        trace_out: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Generate an expert dataset for the planar arm as JSON lines.
    GenExpert(ExpertArgs),
}

#[derive(Args)]
struct ProblemArgs {
    /// Domain file (default: the built-in blocks-world domain).
    #[arg(long)]
    domain: Option<PathBuf>,
    #[arg(long, conflicts_with = "task")]
    scenario: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "stacking")]
    task: Task,
    #[arg(long, default_value_t = PlannerConfig::default().max_depth)]
    max_depth: usize,
    #[arg(long, default_value_t = PlannerConfig::default().max_expansions)]
    max_expansions: usize,
}

#[derive(Args)]
struct NoiseArgs {
    #[arg(long, default_value_t = 0.10)]
    p_fail: f64,
    #[arg(long, default_value_t = 0.05)]
    topple_base: f64,
    #[arg(long, default_value_t = 0.3)]
    p_eject: f64,
    #[arg(long, default_value_t = 0.1)]
    p_eject_hard: f64,
    #[arg(long, default_value_t = 0.3)]
    p_drop_close: f64,
    /// False-positive rate of learned predicates.
    #[arg(long, default_value_t = 0.02)]
    fp: f64,
    /// False-negative rate of learned predicates.
    #[arg(long = "fn", default_value_t = 0.02)]
    fn_: f64,
}

#[derive(Args)]
struct ExpertArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    trajectories: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Grasp goal as three joint angles.
    #[arg(long, num_args = 3, value_delimiter = ',', default_values_t = ExpertConfig::default().goal)]
    goal: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    dense_k: usize,
    /// L-infinity radius (radians) for terminal samples.
    #[arg(long, default_value_t = 0.3)]
    dense_delta: f64,
    /// Record every n-th state along each path.
    #[arg(long, default_value_t = 1, value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..))]
    record_every: usize,
    /// Grid resolution in radians per cell.
    #[arg(long, default_value_t = 0.15)]
    resolution: f64,
    /// Circle obstacle as `x,y,radius`; repeatable.
    #[arg(long, value_parser = parse_obstacle)]
    obstacle: Vec<Obstacle>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Task {
    Stacking,
    Reordering,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    None,
    Retrials,
    Full,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::None => Mode::None,
            ModeArg::Retrials => Mode::RetrialsOnly,
            ModeArg::Full => Mode::Full,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ResetArg {
    Episode,
    Failure,
}

fn parse_obstacle(s: &str) -> Result<Obstacle, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y, r] if r > 0.0 => Ok(Obstacle {
            center: [x, y],
            radius: r,
        }),
        _ => Err("expected x,y,radius with radius > 0".into()),
    }
}

/// Everything needed to plan and simulate one scenario.
struct Problem {
    vocab: Vocabulary,
    scenario: Scenario,
    planner: Planner,
}

impl ProblemArgs {
    fn load(&self) -> Result<Problem> {
        let domain: Domain = match &self.domain {
            Some(p) => parse_domain(&read(p)?).with_context(|| format!("{}", p.display()))?,
            None => parse_domain(STANDARD_DOMAIN).expect("built-in domain parses"),
        };
        let (name, text) = match (&self.scenario, self.task) {
            (Some(p), _) => (p.display().to_string(), read(p)?),
            (None, Task::Stacking) => ("stacking".to_string(), STACKING.to_string()),
            (None, Task::Reordering) => ("reordering".to_string(), REORDER.to_string()),
        };
        let (vocab, scenario) = parse_scenario(&name, &text, &domain.predicates).with_context(|| name.clone())?;
        let skills = ground_skills(&domain.skills, &vocab).context("grounding skills")?;
        let cfg = PlannerConfig {
            max_depth: self.max_depth,
            max_expansions: self.max_expansions,
        };
        Ok(Problem {
            vocab,
            scenario,
            planner: Planner::new(skills, cfg),
        })
    }
}

impl NoiseArgs {
    fn models(&self, vocab: &Vocabulary) -> Result<(FailureModel, SensorModel)> {
        let failures = FailureModel {
            p_fail_default: self.p_fail,
            topple_base: self.topple_base,
            p_eject: self.p_eject,
            p_eject_hard: self.p_eject_hard,
            p_drop_close: self.p_drop_close,
            ..FailureModel::default()
        };
        failures.validate().map_err(anyhow::Error::msg)?;
        let sensor = SensorModel::learned(vocab, self.fp, self.fn_);
        sensor.validate().map_err(anyhow::Error::msg)?;
        Ok((failures, sensor))
    }
}

fn read(p: &Path) -> Result<String> {
    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
}

fn create(p: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(p).with_context(|| format!("creating {}", p.display()))?,
    ))
}

fn set_jobs(jobs: Option<usize>) -> Result<()> {
    if let Some(j) = jobs {
        if j == 0 {
            bail!("--jobs must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global()?;
    }
    Ok(())
}

fn plan_cmd(args: &ProblemArgs) -> Result<u8> {
    let p = args.load()?;
    let n = p.vocab.universe().len();
    let world = p.scenario.reset(n, 0)?;
    let state = taskexec_core::sim::project_ground_truth(&world, &p.vocab);
    match p.planner.plan(&state, p.scenario.goal(0)) {
        Ok(plan) => {
            print!("{}", plan.to_text(p.vocab.universe()));
            Ok(0)
        }
        Err(e) => {
            println!("NO PLAN");
            log::info!("{e}");
            Ok(EXIT_NO_PLAN)
        }
    }
}

fn run_cmd(problem: &ProblemArgs, noise: &NoiseArgs, mode: ModeArg, seed: u64, trace_out: Option<&Path>) -> Result<u8> {
    let p = problem.load()?;
    let (failures, sensor) = noise.models(&p.vocab)?;
    let world = p.scenario.reset(p.vocab.universe().len(), seed)?;
    let goal = p.scenario.goal(0);
    let mode = Mode::from(mode);
    let (outcome, env) = run_episode(
        &p.vocab,
        &p.planner,
        goal,
        world,
        &mode.exec_config(),
        &failures,
        &sensor,
    );
    let success = goal_achieved(&env.world, &p.vocab, goal);
    println!("mode: {mode}");
    println!("success: {success}");
    println!("plans: {}", outcome.replans_used);
    println!("executions: {}", outcome.executions());
    println!("precondition backtracks: {}", outcome.backtracks());
    println!("tallest tower: {}", env.world.tallest_tower());
    if let Some(path) = trace_out {
        let mut w = create(path)?;
        write_trace_jsonl(&outcome, &p.vocab, &mut w)?;
        w.flush()?;
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn experiment_cmd(
    problem: &ProblemArgs,
    noise: &NoiseArgs,
    modes: &[ModeArg],
    trials: usize,
    seed: u64,
    reset: ResetArg,
    csv_out: Option<&Path>,
    trace_out: Option<&Path>,
) -> Result<u8> {
    if trials == 0 {
        bail!("--trials must be positive");
    }
    let p = problem.load()?;
    let (failures, sensor) = noise.models(&p.vocab)?;
    let modes: Vec<Mode> = if modes.is_empty() {
        Mode::ALL.to_vec()
    } else {
        modes.iter().map(|&m| m.into()).collect()
    };
    let spec = ExperimentSpec {
        scenario: p.scenario.clone(),
        modes: modes.clone(),
        trials,
        master_seed: seed,
        failures,
        sensor,
        reset: match reset {
            ResetArg::Episode => ResetPolicy::EveryEpisode,
            ResetArg::Failure => ResetPolicy::OnFailureOnly,
        },
    };
    let mut traces = trace_out.map(create).transpose()?;
    let mut rows = Vec::new();
    for &mode in &modes {
        let episodes = run_mode(&spec, &p.vocab, &p.planner, mode)?;
        if let Some(w) = traces.as_mut() {
            for (trial, ep) in episodes.iter().enumerate() {
                for e in &ep.outcome.trace {
                    let mut row = trace_event_json(e, &p.vocab);
                    row["mode"] = mode.name().into();
                    row["trial"] = trial.into();
                    row["seed"] = trial_seed(seed, trial).into();
                    serde_json::to_writer(&mut *w, &row)?;
                    w.write_all(b"\n")?;
                }
            }
        }
        rows.push(ModeResult::summarize(mode, &episodes));
    }
    if let Some(w) = traces.as_mut() {
        w.flush()?;
    }
    let table = ResultsTable {
        task: spec.scenario.name.clone(),
        reset: spec.reset,
        trials,
        rows,
    };
    print!("{}", table.to_text());
    if let Some(path) = csv_out {
        write_csv(&table, path)?;
    }
    Ok(0)
}

fn write_csv(table: &ResultsTable, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record([
        "task",
        "reset",
        "mode",
        "trials",
        "successes",
        "failures",
        "success_rate",
        "successful_replans",
        "failures_by_plan_length",
        "tallest_tower",
    ])?;
    for r in &table.rows {
        w.write_record([
            table.task.clone(),
            table.reset.name().to_string(),
            r.mode.name().to_string(),
            r.trials.to_string(),
            r.successes.to_string(),
            r.failures.to_string(),
            format!("{:.4}", r.success_rate()),
            r.successful_replans.to_string(),
            ResultsTable::failure_breakdown(r),
            ResultsTable::tower_breakdown(r),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn gen_expert_cmd(args: &ExpertArgs) -> Result<u8> {
    if args.trajectories == 0 {
        bail!("--trajectories must be positive");
    }
    let arm = ArmModel::default();
    let grid = CSpaceGrid::new(arm, [args.resolution; 3], args.obstacle.clone())?;
    let cfg = ExpertConfig {
        trajectories: args.trajectories,
        goal: [args.goal[0], args.goal[1], args.goal[2]],
        dense_k: args.dense_k,
        dense_delta: args.dense_delta,
        record_every: args.record_every,
        seed: args.seed,
        ..ExpertConfig::default()
    };
    if !grid.is_valid(grid.snap(&cfg.goal)) {
        bail!("goal configuration collides with an obstacle");
    }
    let rows = build_dataset(&grid, &cfg);
    let mut w = create(&args.out)?;
    write_dataset(&rows, &mut w)?;
    w.flush()?;
    println!("{} rows", rows.len());
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Plan(args) => plan_cmd(&args),
        Command::Run {
            problem,
            noise,
            mode,
            seed,
            trace_out,
        } => run_cmd(&problem, &noise, mode, seed, trace_out.as_deref()),
        Command::Experiment {
            problem,
            noise,
            mode,
            trials,
            seed,
            reset,
            csv,
            trace_out,
            jobs,
        } => {
            set_jobs(jobs)?;
            experiment_cmd(
                &problem,
                &noise,
                &mode,
                trials,
                seed,
                reset,
                csv.as_deref(),
                trace_out.as_deref(),
            )
        }
        Command::GenExpert(args) => {
            set_jobs(args.jobs)?;
            gen_expert_cmd(&args)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
