use std::path::{Path, PathBuf};

use fabtune::autotune::{load_study, run_study, save_study, Evaluation, ParameterSet, Sampler, SearchSpace, StudyHeader};
use fabtune_cli::{run_with, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE};

fn config(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .display()
        .to_string()
}

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn cli(args: &[&str]) -> Output {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_with(std::iter::once("fabtune").chain(args.iter().copied()), &mut out, &mut err);
    Output {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn p(path: &Path) -> String {
    path.display().to_string()
}

fn tune(dir: &Path, file: &str, trials: usize, sampler: &str, seed: u64) -> PathBuf {
    let out = dir.join(file);
    let r = cli(&[
        "tune",
        "--robot",
        &config("robot_planar3.json"),
        "--scenario",
        &config("ring_planar3.json"),
        "--space",
        &config("space.json"),
        "--trials",
        &trials.to_string(),
        "--sampler",
        sampler,
        "--seed",
        &seed.to_string(),
        "--out",
        &p(&out),
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    out
}

fn svg_doc(path: &Path) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("invalid XML in {}: {e}", path.display()));
    text
}

fn attr_values<'a>(doc: &'a roxmltree::Document, class: &str, attr: &str) -> Vec<&'a str> {
    doc.descendants()
        .filter(|n| n.attribute("class").is_some_and(|c| c.split(' ').any(|w| w == class)))
        .filter_map(|n| n.attribute(attr))
        .collect()
}

#[test]
fn tune_writes_requested_trials_and_reports_best() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("study.jsonl");
    let r = cli(&[
        "tune",
        "--robot",
        &config("robot_planar3.json"),
        "--scenario",
        &config("ring_planar3.json"),
        "--trials",
        "12",
        "--seed",
        "7",
        "--out",
        &p(&out),
        "--json",
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let study = load_study(&out).unwrap().study;
    assert_eq!(study.trials.len(), 12);
    assert_eq!(study.header.sampler.name(), "tpe");
    assert_eq!(study.header.robot.as_deref(), Some("planar3"));
    assert!(study.header.planner.is_some());
    let summary: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    let best = study.best().unwrap();
    assert_eq!(summary["best"]["index"], best.index);
    assert_eq!(summary["best"]["cost"].as_f64().unwrap(), best.cost);
    assert_eq!(summary["trials"], 12);
}

#[test]
fn random_sampler_and_seed_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let a = load_study(&tune(dir.path(), "a.jsonl", 6, "random", 3)).unwrap().study;
    let b = load_study(&tune(dir.path(), "b.jsonl", 6, "random", 3)).unwrap().study;
    assert_eq!(a.header.sampler, Sampler::Random);
    assert!(a.same_outcome(&b));
}

#[test]
fn resumed_study_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let full = load_study(&tune(dir.path(), "full.jsonl", 14, "tpe", 5)).unwrap().study;
    let part = tune(dir.path(), "part.jsonl", 11, "tpe", 5);
    let r = cli(&[
        "tune",
        "--robot",
        &config("robot_planar3.json"),
        "--scenario",
        &config("ring_planar3.json"),
        "--space",
        &config("space.json"),
        "--trials",
        "14",
        "--seed",
        "5",
        "--out",
        &p(&part),
        "--resume",
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let resumed = load_study(&part).unwrap().study;
    assert_eq!(resumed.trials.len(), 14);
    assert_eq!(resumed.header.scenario, full.header.scenario);
    assert!(resumed.same_outcome(&full));

    let r = cli(&[
        "tune",
        "--robot",
        &config("robot_planar3.json"),
        "--scenario",
        &config("ring_planar3.json"),
        "--trials",
        "16",
        "--seed",
        "6",
        "--out",
        &p(&part),
        "--resume",
    ]);
    assert_eq!(r.code, EXIT_USAGE, "seed change must be rejected");
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(&dir.path().join("s.jsonl"));
    let base = [
        "tune",
        "--robot",
        &config("robot_planar3.json"),
        "--scenario",
        &config("ring_planar3.json"),
        "--out",
        &out,
    ];
    let with = |extra: &[&str]| {
        let mut v: Vec<&str> = base.to_vec();
        v.extend_from_slice(extra);
        cli(&v)
    };
    assert_eq!(with(&["--trials", "0", "--seed", "1"]).code, EXIT_USAGE);
    let missing_seed = with(&["--trials", "3"]);
    assert_eq!(missing_seed.code, EXIT_USAGE);
    assert!(missing_seed.stderr.contains("--seed"));
    assert_eq!(with(&["--trials", "3", "--seed", "1", "--sampler", "grid"]).code, EXIT_USAGE);
    assert_eq!(cli(&["frobnicate"]).code, EXIT_USAGE);
    assert_eq!(cli(&["--help"]).code, EXIT_OK);

    let bad_robot = dir.path().join("robot.json");
    let mut robot: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(config("robot_planar3.json")).unwrap()).unwrap();
    robot["colour"] = "red".into();
    std::fs::write(&bad_robot, serde_json::to_string_pretty(&robot).unwrap()).unwrap();
    let r = cli(&[
        "tune",
        "--robot",
        &p(&bad_robot),
        "--scenario",
        &config("ring_planar3.json"),
        "--trials",
        "3",
        "--seed",
        "1",
        "--out",
        &out,
    ]);
    assert_eq!(r.code, EXIT_USAGE);
    assert!(r.stderr.contains("colour") && r.stderr.contains("line"), "{}", r.stderr);

    let r = cli(&[
        "tune",
        "--robot",
        &config("robot_planar2.json"),
        "--scenario",
        &config("ring_planar3.json"),
        "--trials",
        "3",
        "--seed",
        "1",
        "--out",
        &out,
    ]);
    assert_eq!(r.code, EXIT_USAGE, "scenario for another robot");
}

fn eval(extra: &[&str]) -> Output {
    let mut args = vec![
        "eval",
        "--robot",
        "ROBOT",
        "--scenario",
        "SCENARIO",
        "--scenarios",
        "4",
    ];
    let robot = config("robot_planar3.json");
    let scenario = config("ring_planar3.json");
    args[2] = &robot;
    args[4] = &scenario;
    args.extend_from_slice(extra);
    cli(&args)
}

#[test]
fn eval_is_deterministic_and_prints_cost_components() {
    let a = eval(&["--manual", "--seed", "3"]);
    let b = eval(&["--manual", "--seed", "3"]);
    assert_eq!(a.code, EXIT_OK, "{}", a.stderr);
    assert_eq!(a.stdout, b.stdout);
    for col in ["c_distance", "c_path", "c_clearance", "objective", "mean objective"] {
        assert!(a.stdout.contains(col), "missing {col}");
    }
    let c = eval(&["--manual", "--seed", "4"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn eval_json_mean_matches_scenarios() {
    let r = eval(&["--manual", "--seed", "3", "--json"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    let costs: Vec<f64> = v["scenarios"].as_array().unwrap().iter().map(|s| s["cost"].as_f64().unwrap()).collect();
    assert_eq!(costs.len(), 4);
    let mean = costs.iter().sum::<f64>() / 4.0;
    assert!((v["mean_cost"].as_f64().unwrap() - mean).abs() <= 1e-12 * mean.abs());
    let manual: ParameterSet = serde_json::from_value(v["params"].clone()).unwrap();
    assert_eq!(manual, SearchSpace::default_space().manual());
}

#[test]
fn eval_from_study_uses_best_trial_and_draws_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let study_path = tune(dir.path(), "s.jsonl", 12, "tpe", 2);
    let study = load_study(&study_path).unwrap().study;
    let traj = dir.path().join("traj.svg");
    let r = eval(&["--from-study", &p(&study_path), "--seed", "1", "--json", "--traj", &p(&traj)]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    let params: ParameterSet = serde_json::from_value(v["params"].clone()).unwrap();
    assert_eq!(params, study.best().unwrap().params);
    let text = svg_doc(&traj);
    let doc = roxmltree::Document::parse(&text).unwrap();
    assert_eq!(attr_values(&doc, "obstacle", "data-radius").len(), 5);
    assert_eq!(attr_values(&doc, "goal", "data-goal").len(), 1);
    assert_eq!(attr_values(&doc, "ee-path", "data-steps").len(), 1);
    assert!(text.contains("<!-- seed: 1 -->"));
}

#[test]
fn eval_parameter_file_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(eval(&["--seed", "1"]).code, EXIT_USAGE);
    let bad = dir.path().join("p.json");
    let mut m = SearchSpace::default_space().manual();
    m.set("b_max", 1e9);
    std::fs::write(&bad, serde_json::to_string(&m).unwrap()).unwrap();
    assert_eq!(eval(&["--params", &p(&bad), "--seed", "1"]).code, EXIT_USAGE);
    let ok = dir.path().join("ok.json");
    std::fs::write(&ok, serde_json::to_string(&SearchSpace::default_space().manual()).unwrap()).unwrap();
    let a = eval(&["--params", &p(&ok), "--seed", "1"]);
    let b = eval(&["--manual", "--seed", "1"]);
    assert_eq!(a.code, EXIT_OK, "{}", a.stderr);
    assert_eq!(a.stdout.lines().skip(1).collect::<Vec<_>>(), b.stdout.lines().skip(1).collect::<Vec<_>>());
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn compare(dir: &Path, sources: &[String], robot: &str, scenario: &str) -> (Output, PathBuf, PathBuf) {
    let svg = dir.join("cmp.svg");
    let csv = dir.join("cmp.csv");
    let mut args = vec![
        "compare".to_string(),
        "--robot".into(),
        config(robot),
        "--scenario".into(),
        config(scenario),
        "--scenarios".into(),
        "10".into(),
        "--seed".into(),
        "9".into(),
        "--svg".into(),
        p(&svg),
        "--csv".into(),
        p(&csv),
    ];
    for s in sources {
        args.push("--source".into());
        args.push(s.clone());
    }
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    (cli(&refs), svg, csv)
}

#[test]
fn compare_emits_box_plot_and_consistent_csv() {
    let dir = tempfile::tempdir().unwrap();
    let tuned = tune(dir.path(), "tuned.jsonl", 12, "tpe", 1);
    let random = tune(dir.path(), "random.jsonl", 12, "random", 1);
    let sources = vec![
        format!("tuned={}", p(&tuned)),
        format!("random={}", p(&random)),
        "manual=manual".to_string(),
    ];
    let (r, svg, csv) = compare(dir.path(), &sources, "robot_planar3.json", "ring_planar3.json");
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);

    let mut rdr = csv::Reader::from_path(&csv).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 30);
    let text = svg_doc(&svg);
    let doc = roxmltree::Document::parse(&text).unwrap();
    let boxes: Vec<roxmltree::Node> = doc
        .descendants()
        .filter(|n| n.attribute("class") == Some("box"))
        .collect();
    assert_eq!(boxes.len(), 3);
    for b in boxes {
        let name = b.attribute("data-source").unwrap();
        let costs: Vec<f64> = rows.iter().filter(|r| &r[0] == name).map(|r| r[3].parse().unwrap()).collect();
        assert_eq!(costs.len(), 10);
        let plotted: f64 = b.attribute("data-median").unwrap().parse().unwrap();
        assert_eq!(plotted, median(costs.clone()), "{name}");
        let points: Vec<f64> = b
            .descendants()
            .filter_map(|n| n.attribute("data-cost"))
            .map(|c| c.parse().unwrap())
            .collect();
        assert_eq!(points, costs);
    }
}

#[test]
fn identical_sources_give_identical_boxes() {
    let dir = tempfile::tempdir().unwrap();
    let (r, svg, _) = compare(
        dir.path(),
        &["a=manual".to_string(), "b=manual".to_string()],
        "robot_planar2.json",
        "ring_planar2.json",
    );
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let text = svg_doc(&svg);
    let doc = roxmltree::Document::parse(&text).unwrap();
    let stats: Vec<Vec<&str>> = doc
        .descendants()
        .filter(|n| n.attribute("class") == Some("box"))
        .map(|n| ["data-min", "data-q1", "data-median", "data-q3", "data-max"].map(|a| n.attribute(a).unwrap()).to_vec())
        .collect();
    assert_eq!(stats.len(), 2);
    assert_eq!(stats[0], stats[1]);
}

#[test]
fn compare_rejects_mismatched_robots_and_single_source() {
    let dir = tempfile::tempdir().unwrap();
    let tuned = tune(dir.path(), "tuned.jsonl", 3, "random", 1);
    let (r, _, _) = compare(
        dir.path(),
        &[format!("tuned={}", p(&tuned)), "manual=manual".to_string()],
        "robot_planar2.json",
        "ring_planar2.json",
    );
    assert_eq!(r.code, EXIT_USAGE);
    assert!(r.stderr.contains("planar3"), "{}", r.stderr);
    let (r, _, _) = compare(dir.path(), &["manual=manual".to_string()], "robot_planar2.json", "ring_planar2.json");
    assert_eq!(r.code, EXIT_USAGE);
}

fn synthetic_study(dir: &Path, n: usize) -> PathBuf {
    let header = StudyHeader::new(SearchSpace::default_space(), Sampler::tpe(), 13);
    let eval = |p: &ParameterSet, _: u64| {
        let k = p.get("k_attractor").unwrap();
        let m = p.get("m_base").unwrap();
        Evaluation::cost_only(if m > 0.95 { f64::INFINITY } else { (k - 7.0).powi(2) + m })
    };
    let study = run_study(header, &eval, n).unwrap();
    let path = dir.join("hist.jsonl");
    save_study(&path, &study).unwrap();
    path
}

#[test]
fn plot_history_matches_study_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = synthetic_study(dir.path(), 60);
    let study = load_study(&path).unwrap().study;
    let out = dir.path().join("h.svg");
    let r = cli(&["plot-history", "--study", &p(&path), "--out", &p(&out), "--json"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let text = svg_doc(&out);
    let doc = roxmltree::Document::parse(&text).unwrap();
    let costs: Vec<&str> = attr_values(&doc, "trial", "data-cost");
    assert_eq!(costs.len(), 60);
    for (c, t) in costs.iter().zip(&study.trials) {
        let v: f64 = c.parse().unwrap();
        assert_eq!(v, t.cost);
    }
    let line: Vec<f64> = attr_values(&doc, "best-so-far", "data-values")[0]
        .split(' ')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(line.len(), 60);
    assert!(line.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(*line.last().unwrap(), study.best().unwrap().cost);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["best_cost"].as_f64().unwrap(), study.best().unwrap().cost);
    assert!(text.contains(&format!("<!-- study: {} -->", p(&path))));
}

#[test]
fn plot_history_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = synthetic_study(dir.path(), 5);
    let text = std::fs::read_to_string(&path).unwrap();
    let header_only = dir.path().join("empty.jsonl");
    std::fs::write(&header_only, text.lines().next().unwrap().to_string() + "\n").unwrap();
    let out = p(&dir.path().join("h.svg"));
    let r = cli(&["plot-history", "--study", &p(&header_only), "--out", &out]);
    assert_eq!(r.code, EXIT_RUNTIME);

    let mut lines: Vec<&str> = text.lines().collect();
    lines[2] = "{\"record\":\"trial\",";
    let corrupt = dir.path().join("corrupt.jsonl");
    std::fs::write(&corrupt, lines.join("\n")).unwrap();
    let r = cli(&["plot-history", "--study", &p(&corrupt), "--out", &out]);
    assert_eq!(r.code, EXIT_RUNTIME);
    assert!(r.stderr.contains("line 3"), "{}", r.stderr);
}
