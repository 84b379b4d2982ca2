//! Command-line front end: tuning studies, evaluation on randomized test
//! scenarios, sampler comparison and history plots.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

pub mod svg;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use fabtune::autotune::{
    continue_study, load_study, ParameterSet, Sampler, SearchSpace, Study, StudyHeader, StudyWriter,
};
use fabtune::planner::{CompiledPlanner, RolloutEvaluator};
use fabtune::world::{Metrics, Perturbation, RobotModel, Scenario, Termination, Weights};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

fn usage(msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(msg.to_string())
}

fn runtime(msg: impl std::fmt::Display) -> CliError {
    CliError::Runtime(msg.to_string())
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "fabtune", version, about = "Autotuning of symbolic fabric motion planners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a tuning study and write it as JSON Lines.
    Tune(TuneArgs),
    /// Evaluate one parameter set on randomized test scenarios.
    Eval(EvalArgs),
    /// Evaluate several parameter sources on the same test scenarios.
    Compare(CompareArgs),
    /// Plot trial costs and the best-so-far line of a study.
    PlotHistory(PlotArgs),
}

#[derive(Debug, Args)]
struct SceneArgs {
    /// Robot description (JSON).
    #[arg(long)]
    robot: PathBuf,
    /// Scenario description (JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Search space (JSON); the built-in default when omitted.
    #[arg(long)]
    space: Option<PathBuf>,
    /// Objective weights (JSON); 0.7 / 0.1 / 0.2 when omitted.
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SamplerKind {
    Tpe,
    Random,
}

#[derive(Debug, Args)]
struct TuneArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// Total number of trials in the study.
    #[arg(long)]
    trials: usize,
    #[arg(long, value_enum, default_value = "tpe")]
    sampler: SamplerKind,
    /// Master seed; per-trial seeds derive from it.
    #[arg(long)]
    seed: u64,
    /// Study file to write.
    #[arg(long)]
    out: PathBuf,
    /// Candidates evaluated concurrently per round.
    #[arg(long, default_value_t = 1)]
    batch: usize,
    /// Append to an existing study at `--out` instead of starting over.
    #[arg(long)]
    resume: bool,
    /// Also write the best parameter set as JSON.
    #[arg(long)]
    best_params: Option<PathBuf>,
    /// Print a JSON summary.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct TestSetArgs {
    /// Number of randomized test scenarios.
    #[arg(long, default_value_t = 10)]
    scenarios: usize,
    /// Seed of the test-scenario randomization.
    #[arg(long)]
    seed: u64,
    /// Uniform jitter of obstacle centers per coordinate.
    #[arg(long, default_value_t = 0.1)]
    obstacle_jitter: f64,
    /// Uniform jitter of the goal per coordinate.
    #[arg(long, default_value_t = 0.1)]
    goal_jitter: f64,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    scene: SceneArgs,
    #[command(flatten)]
    tests: TestSetArgs,
    /// Parameter set (JSON object of name to value).
    #[arg(long, group = "source")]
    params: Option<PathBuf>,
    /// Use the best trial of a study.
    #[arg(long, group = "source")]
    from_study: Option<PathBuf>,
    /// Use the manual values of the search space.
    #[arg(long, group = "source")]
    manual: bool,
    /// Write the trajectory of the first test scenario as SVG.
    #[arg(long)]
    traj: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    scene: SceneArgs,
    #[command(flatten)]
    tests: TestSetArgs,
    /// `NAME=SOURCE` where SOURCE is `manual`, a study (`.jsonl`, best
    /// trial) or a parameter file (`.json`). Repeat for each source.
    #[arg(long = "source", required = true)]
    sources: Vec<String>,
    /// Box plot output.
    #[arg(long)]
    svg: PathBuf,
    /// Per-scenario costs output.
    #[arg(long)]
    csv: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Study file (JSON Lines).
    #[arg(long)]
    study: PathBuf,
    /// SVG output.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    json: bool,
}

/// Runs the command line with stdout and stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

/// Runs the command line, writing reports to `out` and diagnostics to `err`.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return if code == 0 { EXIT_OK } else { EXIT_USAGE };
        }
    };
    let result = match cli.command {
        Command::Tune(a) => cmd_tune(&a, out),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Compare(a) => cmd_compare(&a, out),
        Command::PlotHistory(a) => cmd_plot_history(&a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{what} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{what} {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, text: impl std::fmt::Display) -> CliResult<()> {
    write!(out, "{text}").map_err(|e| runtime(format!("stdout: {e}")))
}

/// Robot, scenario, space and weights loaded and cross-checked.
struct Scene {
    robot: RobotModel,
    scenario: Scenario,
    space: SearchSpace,
    weights: Weights,
}

fn load_scene(a: &SceneArgs, fallback_space: Option<&SearchSpace>) -> CliResult<Scene> {
    let robot: RobotModel = read_json(&a.robot, "robot")?;
    robot.validate().map_err(|e| usage(format!("robot {}: {e}", a.robot.display())))?;
    let scenario: Scenario = read_json(&a.scenario, "scenario")?;
    scenario
        .validate(&robot)
        .map_err(|e| usage(format!("scenario {}: {e}", a.scenario.display())))?;
    let space = match (&a.space, fallback_space) {
        (Some(p), _) => read_json::<SearchSpace>(p, "space")?,
        (None, Some(s)) => s.clone(),
        (None, None) => SearchSpace::default_space(),
    };
    space.validate_for_planner().map_err(|e| usage(format!("space: {e}")))?;
    let weights = match &a.weights {
        Some(p) => read_json::<Weights>(p, "weights")?,
        None => Weights::default(),
    };
    weights.validate().map_err(|e| usage(format!("weights: {e}")))?;
    Ok(Scene {
        robot,
        scenario,
        space,
        weights,
    })
}

fn build_planner(scene: &Scene) -> CliResult<CompiledPlanner> {
    CompiledPlanner::build(&scene.robot, scene.scenario.obstacles.len()).map_err(runtime)
}

fn format_params(p: &ParameterSet) -> String {
    p.values.iter().map(|(k, v)| format!("  {k} = {v}\n")).collect()
}

fn cmd_tune(a: &TuneArgs, out: &mut dyn Write) -> CliResult<()> {
    if a.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    if a.batch == 0 {
        return Err(usage("--batch must be at least 1"));
    }
    let scene = load_scene(&a.scene, None)?;
    let planner = build_planner(&scene)?;
    let evaluator = RolloutEvaluator {
        planner: &planner,
        space: &scene.space,
        scenario: &scene.scenario,
        weights: scene.weights,
    };
    evaluator.check().map_err(usage)?;

    let sampler = match a.sampler {
        SamplerKind::Tpe => Sampler::tpe(),
        SamplerKind::Random => Sampler::Random,
    };
    let mut header = StudyHeader::new(scene.space.clone(), sampler, a.seed);
    header.weights = Some(scene.weights);
    header.scenario = Some(a.scene.scenario.display().to_string());
    header.robot = Some(scene.robot.name.clone());
    header.planner = Some(planner.metadata().clone());
    header.batch = a.batch;

    let (mut writer, mut study) = if a.resume && a.out.exists() {
        let (writer, loaded) = StudyWriter::resume(&a.out).map_err(runtime)?;
        let old = &loaded.study.header;
        if old.space != header.space
            || old.sampler != header.sampler
            || old.master_seed != header.master_seed
            || old.robot != header.robot
            || old.batch != header.batch
            || old.planner != header.planner
        {
            return Err(usage(format!(
                "{}: existing study was created with different settings",
                a.out.display()
            )));
        }
        log::info!("resuming {} at trial {}", a.out.display(), loaded.study.trials.len());
        (writer, loaded.study)
    } else {
        let study = Study::new(header);
        (StudyWriter::create(&a.out, &study).map_err(runtime)?, study)
    };
    continue_study(&mut study, &evaluator, a.trials, |t| {
        log::info!("trial {} cost {}", t.index, t.cost);
        writer.append(t)
    })
    .map_err(runtime)?;

    let best = study.best().map_err(runtime)?;
    if let Some(p) = &a.best_params {
        let text = serde_json::to_string_pretty(&best.params).map_err(runtime)?;
        write_file(p, &(text + "\n"))?;
    }
    if a.json {
        let summary = json!({
            "command": "tune",
            "out": a.out.display().to_string(),
            "sampler": study.header.sampler.name(),
            "seed": a.seed,
            "trials": study.trials.len(),
            "best": {"index": best.index, "cost": best.cost, "params": best.params},
        });
        emit(out, format!("{summary}\n"))
    } else {
        emit(
            out,
            format!(
                "{} trials ({} sampler, seed {}) written to {}\nbest trial {}: cost {}\n{}",
                study.trials.len(),
                study.header.sampler.name(),
                a.seed,
                a.out.display(),
                best.index,
                best.cost,
                format_params(&best.params)
            ),
        )
    }
}

/// Outcome of one test scenario.
#[derive(Debug, Clone, Serialize)]
struct ScenarioResult {
    index: usize,
    seed: u64,
    cost: f64,
    metrics: Metrics,
    termination: Termination,
}

fn termination_label(t: &Termination) -> String {
    match t {
        Termination::Completed => "completed".into(),
        Termination::Collided(s) => format!("collided@{s}"),
        Termination::Nonfinite(s) => format!("nonfinite@{s}"),
    }
}

fn test_set(scene: &Scene, a: &TestSetArgs) -> CliResult<Vec<Scenario>> {
    if a.scenarios == 0 {
        return Err(usage("--scenarios must be at least 1"));
    }
    let cfg = Perturbation {
        obstacle_jitter: a.obstacle_jitter,
        goal_jitter: a.goal_jitter,
        ..Perturbation::default()
    };
    if !(cfg.obstacle_jitter >= 0.0 && cfg.goal_jitter >= 0.0) {
        return Err(usage("jitter must be nonnegative"));
    }
    scene
        .scenario
        .test_set(&scene.robot, &cfg, a.scenarios, a.seed)
        .map_err(usage)
}

/// Scores `params` on every test scenario, concurrently, in index order.
fn evaluate_all(
    planner: &CompiledPlanner,
    scene: &Scene,
    tests: &[Scenario],
    params: &ParameterSet,
) -> CliResult<Vec<ScenarioResult>> {
    scene.space.check(params).map_err(usage)?;
    tests
        .par_iter()
        .enumerate()
        .map(|(index, sc)| {
            let (log, metrics, cost) = planner
                .score(params, &scene.space, sc, &scene.weights)
                .map_err(|e| runtime(format!("scenario {index}: {e}")))?;
            Ok(ScenarioResult {
                index,
                seed: sc.seed,
                cost,
                metrics,
                termination: log.termination,
            })
        })
        .collect()
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// A named parameter source and where it came from.
struct Source {
    name: String,
    origin: String,
    params: ParameterSet,
    robot: Option<String>,
    space: Option<SearchSpace>,
}

fn study_best(path: &Path) -> CliResult<(ParameterSet, Study)> {
    let loaded = load_study(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let best = loaded
        .study
        .best()
        .map_err(|e| usage(format!("{}: {e}", path.display())))?
        .params
        .clone();
    Ok((best, loaded.study))
}

fn parse_source(spec: &str) -> CliResult<Source> {
    let (name, origin) = match spec.split_once('=') {
        Some((n, o)) if !n.is_empty() => (n.to_string(), o.to_string()),
        _ => {
            let stem = Path::new(spec).file_stem().map_or(spec.to_string(), |s| s.to_string_lossy().into_owned());
            (stem, spec.to_string())
        }
    };
    if origin == "manual" {
        return Ok(Source {
            name,
            origin,
            params: ParameterSet::default(),
            robot: None,
            space: None,
        });
    }
    let path = Path::new(&origin);
    if path.extension().is_some_and(|e| e == "jsonl") {
        let (params, study) = study_best(path)?;
        Ok(Source {
            name,
            params,
            robot: study.header.robot.clone(),
            space: Some(study.header.space),
            origin,
        })
    } else {
        let params: ParameterSet = read_json(path, "parameters")?;
        Ok(Source {
            name,
            origin,
            params,
            robot: None,
            space: None,
        })
    }
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> CliResult<()> {
    let (source, fallback_space) = match (&a.params, &a.from_study, a.manual) {
        (Some(p), _, _) => (p.display().to_string(), None),
        (_, Some(s), _) => {
            let (_, study) = study_best(s)?;
            (format!("{}", s.display()), Some(study.header.space))
        }
        (_, _, true) => ("manual".to_string(), None),
        _ => return Err(usage("one of --params, --from-study or --manual is required")),
    };
    let scene = load_scene(&a.scene, fallback_space.as_ref())?;
    let params = match (&a.params, &a.from_study) {
        (Some(p), _) => read_json(p, "parameters")?,
        (_, Some(s)) => study_best(s)?.0,
        _ => scene.space.manual(),
    };
    let tests = test_set(&scene, &a.tests)?;
    let planner = build_planner(&scene)?;
    let results = evaluate_all(&planner, &scene, &tests, &params)?;
    let mean_cost = mean(results.iter().map(|r| r.cost));

    if let Some(path) = &a.traj {
        let log = planner
            .simulate(&params, &scene.space, &tests[0])
            .map_err(runtime)?;
        let meta = [
            ("params", source.clone()),
            ("scenario", a.scene.scenario.display().to_string()),
            ("test scenario", "0".to_string()),
            ("seed", a.tests.seed.to_string()),
        ];
        write_file(
            path,
            &svg::trajectory(&scene.robot, &tests[0], &log, "End-effector trajectory", &meta),
        )?;
    }

    if a.json {
        let summary = json!({
            "command": "eval",
            "source": source,
            "robot": scene.robot.name,
            "seed": a.tests.seed,
            "params": params,
            "scenarios": results,
            "mean_cost": mean_cost,
        });
        return emit(out, format!("{summary}\n"));
    }
    let mut text = format!(
        "parameters: {source}\nrobot: {}  test scenarios: {}  seed: {}\n{:>4} {:>20} {:>12} {:>12} {:>12} {:>8} {:>14} {:>12}\n",
        scene.robot.name,
        results.len(),
        a.tests.seed,
        "idx",
        "seed",
        "c_distance",
        "c_path",
        "c_clearance",
        "reached",
        "termination",
        "objective"
    );
    for r in &results {
        text.push_str(&format!(
            "{:>4} {:>20} {:>12.6} {:>12.6} {:>12.6} {:>8} {:>14} {:>12.6}\n",
            r.index,
            r.seed,
            r.metrics.cost_distance,
            r.metrics.cost_path,
            r.metrics.cost_clearance,
            r.metrics.reached,
            termination_label(&r.termination),
            r.cost
        ));
    }
    text.push_str(&format!("mean objective: {mean_cost:.6}\n"));
    emit(out, text)
}

#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    source: &'a str,
    scenario: usize,
    seed: u64,
    cost: f64,
    cost_distance: f64,
    cost_path: f64,
    cost_clearance: f64,
    reached: bool,
    termination: String,
}

fn cmd_compare(a: &CompareArgs, out: &mut dyn Write) -> CliResult<()> {
    if a.sources.len() < 2 {
        return Err(usage("compare needs at least two --source entries"));
    }
    let mut sources: Vec<Source> = a.sources.iter().map(|s| parse_source(s)).collect::<Result<_, _>>()?;
    let mut names: Vec<&str> = sources.iter().map(|s| s.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(usage("source names must be distinct"));
    }
    let study_space = sources.iter().find_map(|s| s.space.clone());
    let scene = load_scene(&a.scene, study_space.as_ref())?;
    for s in &sources {
        if let Some(r) = &s.robot {
            if *r != scene.robot.name {
                return Err(usage(format!(
                    "source `{}` was tuned on robot `{r}`, expected `{}`",
                    s.name, scene.robot.name
                )));
            }
        }
    }
    for s in &mut sources {
        if s.origin == "manual" {
            s.params = scene.space.manual();
        }
    }
    let tests = test_set(&scene, &a.tests)?;
    let planner = build_planner(&scene)?;
    let mut per_source = Vec::with_capacity(sources.len());
    for s in &sources {
        let r = evaluate_all(&planner, &scene, &tests, &s.params)
            .map_err(|e| match e {
                CliError::Usage(m) => usage(format!("source `{}`: {m}", s.name)),
                CliError::Runtime(m) => runtime(format!("source `{}`: {m}", s.name)),
            })?;
        per_source.push(r);
    }

    let mut w = csv::Writer::from_path(&a.csv).map_err(|e| runtime(format!("{}: {e}", a.csv.display())))?;
    for (s, results) in sources.iter().zip(&per_source) {
        for r in results {
            w.serialize(CsvRow {
                source: &s.name,
                scenario: r.index,
                seed: r.seed,
                cost: r.cost,
                cost_distance: r.metrics.cost_distance,
                cost_path: r.metrics.cost_path,
                cost_clearance: r.metrics.cost_clearance,
                reached: r.metrics.reached,
                termination: termination_label(&r.termination),
            })
            .map_err(|e| runtime(format!("{}: {e}", a.csv.display())))?;
        }
    }
    w.flush().map_err(|e| runtime(format!("{}: {e}", a.csv.display())))?;

    let boxes: Vec<(String, Vec<f64>)> = sources
        .iter()
        .zip(&per_source)
        .map(|(s, r)| (s.name.clone(), r.iter().map(|x| x.cost).collect()))
        .collect();
    let meta = [
        ("sources", sources.iter().map(|s| format!("{}={}", s.name, s.origin)).collect::<Vec<_>>().join(", ")),
        ("scenario", a.scene.scenario.display().to_string()),
        ("seed", a.tests.seed.to_string()),
        ("test scenarios", tests.len().to_string()),
    ];
    write_file(&a.svg, &svg::boxplot(&boxes, "Test objective per parameter source", &meta))?;

    let summaries: Vec<serde_json::Value> = boxes
        .iter()
        .zip(&sources)
        .map(|((name, costs), s)| {
            let stats = svg::BoxStats::of(costs);
            json!({
                "name": name,
                "source": s.origin,
                "mean": mean(costs.iter().copied()),
                "median": stats.as_ref().map(|b| b.median),
                "q1": stats.as_ref().map(|b| b.q1),
                "q3": stats.as_ref().map(|b| b.q3),
                "failed": stats.as_ref().map_or(costs.len(), |b| b.failed),
            })
        })
        .collect();
    if a.json {
        let summary = json!({
            "command": "compare",
            "seed": a.tests.seed,
            "scenarios": tests.len(),
            "sources": summaries,
            "svg": a.svg.display().to_string(),
            "csv": a.csv.display().to_string(),
        });
        return emit(out, format!("{summary}\n"));
    }
    let mut text = format!(
        "{} test scenarios, seed {}\n{:<16} {:>12} {:>12} {:>8}\n",
        tests.len(),
        a.tests.seed,
        "source",
        "median",
        "mean",
        "failed"
    );
    for ((name, costs), s) in boxes.iter().zip(&summaries) {
        text.push_str(&format!(
            "{:<16} {:>12} {:>12.6} {:>8}\n",
            name,
            s["median"].as_f64().map_or("-".into(), |m| format!("{m:.6}")),
            mean(costs.iter().copied()),
            s["failed"]
        ));
    }
    text.push_str(&format!("wrote {} and {}\n", a.svg.display(), a.csv.display()));
    emit(out, text)
}

fn cmd_plot_history(a: &PlotArgs, out: &mut dyn Write) -> CliResult<()> {
    let loaded = load_study(&a.study).map_err(|e| runtime(format!("{}: {e}", a.study.display())))?;
    let study = loaded.study;
    let best = study
        .best()
        .map_err(|e| runtime(format!("{}: {e}", a.study.display())))?;
    let costs: Vec<f64> = study.trials.iter().map(|t| t.cost).collect();
    let running = study.running_best();
    let meta = [
        ("study", a.study.display().to_string()),
        ("sampler", study.header.sampler.name().to_string()),
        ("seed", study.header.master_seed.to_string()),
        ("trials", study.trials.len().to_string()),
    ];
    write_file(&a.out, &svg::history(&costs, &running, "Optimization history", &meta))?;
    if a.json {
        let summary = json!({
            "command": "plot-history",
            "study": a.study.display().to_string(),
            "trials": study.trials.len(),
            "best_index": best.index,
            "best_cost": best.cost,
            "out": a.out.display().to_string(),
        });
        return emit(out, format!("{summary}\n"));
    }
    emit(
        out,
        format!(
            "{} trials, best trial {} cost {}; wrote {}\n",
            study.trials.len(),
            best.index,
            best.cost,
            a.out.display()
        ),
    )
}
