use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn optscale(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optscale"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_PLAN: &str = r#"
s_values = [0.5, 1.0]
n_values = [10, 20, 40]
optimizers = ["GD", "Diagonal", "FullNG", "SignGD", "MatrixSign"]
seeds = [0, 1]
dim = 30
teacher_width = 5
steps = 100
n_test = 300
"#;

fn small_run(dir: &Path) -> std::path::PathBuf {
    let plan = dir.join("plan.toml");
    fs::write(&plan, SMALL_PLAN).unwrap();
    let out = dir.join("run");
    let o = optscale(&[
        "run",
        "--plan",
        plan.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--workers",
        "2",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out
}

#[test]
fn run_writes_results_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_run(dir.path());
    let mut names: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, vec!["manifest.toml", "results.csv"]);
    let manifest = optscale::experiment::Manifest::read(&out.join("manifest.toml")).unwrap();
    assert!(manifest.verify(&out).unwrap());
    assert_eq!(manifest.plan.dim, 30);
    assert_eq!(manifest.plan.lambda_reg, 1e-6);
}

#[test]
fn run_prints_plan_size_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.toml");
    fs::write(&plan, SMALL_PLAN).unwrap();
    let o = optscale(&["run", "--plan", plan.to_str().unwrap(), "--out", dir.path().join("r").to_str().unwrap()]);
    let text = stdout(&o);
    assert!(text.starts_with("planned runs: 60 "), "{text}");
    assert!(text.contains("cells run: 12, failed cells: 0"), "{text}");
    assert!(stderr(&o).is_empty(), "silent by default: {}", stderr(&o));
}

#[test]
fn verbose_run_reports_each_cell() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.toml");
    fs::write(&plan, SMALL_PLAN).unwrap();
    let o = optscale(&[
        "run",
        "--plan",
        plan.to_str().unwrap(),
        "--out",
        dir.path().join("r").to_str().unwrap(),
        "--verbosity",
        "1",
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(stderr(&o).lines().count(), 12);
}

#[test]
fn replaying_a_manifest_reproduces_the_digest() {
    let dir = tempfile::tempdir().unwrap();
    let first = small_run(dir.path());
    let replay = dir.path().join("replay");
    let o = optscale(&[
        "run",
        "--plan",
        first.join("manifest.toml").to_str().unwrap(),
        "--out",
        replay.to_str().unwrap(),
        "--workers",
        "1",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        fs::read(first.join("results.csv")).unwrap(),
        fs::read(replay.join("results.csv")).unwrap()
    );
}

#[test]
fn seed_override_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let first = small_run(dir.path());
    let other = dir.path().join("other");
    let o = optscale(&[
        "run",
        "--plan",
        dir.path().join("plan.toml").to_str().unwrap(),
        "--out",
        other.to_str().unwrap(),
        "--seed",
        "99",
    ]);
    assert_eq!(code(&o), 0);
    assert_ne!(
        fs::read(first.join("results.csv")).unwrap(),
        fs::read(other.join("results.csv")).unwrap()
    );
}

#[test]
fn report_tables_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_run(dir.path());
    let results = out.join("results.csv");
    let r = results.to_str().unwrap();

    let a = optscale(&["report", r, "--which", "alpha", "--n-min", "10"]);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    let table = stdout(&a);
    for name in ["GD", "Diagonal", "FullNG", "SignGD", "MatrixSign", "s=0.5", "s=1"] {
        assert!(table.contains(name), "{table}");
    }
    let again = optscale(&["report", r, "--which", "alpha", "--n-min", "10"]);
    assert_eq!(a.stdout, again.stdout);

    let g = optscale(&["report", r, "--which", "gaps"]);
    assert_eq!(code(&g), 0);
    assert!(!stdout(&g).contains("FullNG"), "{}", stdout(&g));

    for which in ["r2", "delta", "multiplier"] {
        let o = optscale(&["report", out.to_str().unwrap(), "--which", which, "--n-min", "10"]);
        assert_eq!(code(&o), 0, "{which}: {}", stderr(&o));
    }

    let csv_dir = dir.path().join("tables");
    let o = optscale(&["report", r, "--which", "alpha", "--n-min", "10", "--out", csv_dir.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(csv_dir.join("alpha.csv").exists());
}

#[test]
fn report_insufficient_data_names_the_pair() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_run(dir.path());
    let o = optscale(&["report", out.to_str().unwrap(), "--which", "alpha", "--n-min", "40"]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("GD") && err.contains("s=0.5"), "{err}");
}

#[test]
fn report_rejects_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    assert_eq!(code(&optscale(&["report", empty.to_str().unwrap(), "--which", "alpha"])), 2);

    let header_only = dir.path().join("header.csv");
    fs::write(&header_only, optscale::experiment::RESULTS_COLUMNS.join(",") + "\n").unwrap();
    assert_eq!(code(&optscale(&["report", header_only.to_str().unwrap(), "--which", "alpha"])), 2);

    let wrong = dir.path().join("wrong.csv");
    fs::write(&wrong, "a,b,c\n1,2,3\n").unwrap();
    let o = optscale(&["report", wrong.to_str().unwrap(), "--which", "gaps"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("schema"), "{}", stderr(&o));

    let missing = dir.path().join("nope.csv");
    assert_eq!(code(&optscale(&["report", missing.to_str().unwrap(), "--which", "alpha"])), 2);
}

#[test]
fn usage_errors_exit_1() {
    let o = optscale(&["run", "--preset", "nosuch", "--out", "/tmp/unused"]);
    assert_eq!(code(&o), 1);
    assert_eq!(stderr(&o).lines().count(), 1);
    assert_eq!(code(&optscale(&[])), 1);
    assert_eq!(code(&optscale(&["report", "x.csv", "--which", "beta"])), 1);
    assert_eq!(code(&optscale(&["plot-data", "x.csv", "--figure", "fig7", "--out", "o"])), 1);
    assert_eq!(code(&optscale(&["diagnose", "e.txt", "--range", "5:2"])), 1);
    assert_eq!(code(&optscale(&["run", "--preset", "reduced", "--out", "o", "--workers", "0"])), 1);
}

#[test]
fn unwritable_output_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let plan = dir.path().join("plan.toml");
    fs::write(&plan, SMALL_PLAN).unwrap();
    let o = optscale(&[
        "run",
        "--plan",
        plan.to_str().unwrap(),
        "--out",
        blocker.join("sub").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn invalid_plan_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.toml");
    fs::write(&plan, "n_values = [20, 10]\n").unwrap();
    let o = optscale(&["run", "--plan", plan.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    fs::write(&plan, "bogus_key = 1\n").unwrap();
    let o = optscale(&["run", "--plan", plan.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn main_preset_plans_2400_runs() {
    let dir = tempfile::tempdir().unwrap();
    let o = optscale(&["run", "--preset", "main", "--out", dir.path().to_str().unwrap(), "--dry-run"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("planned runs: 2400"));
}

#[test]
fn theory_check_exit_codes() {
    let o = optscale(&["theory-check"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let text = stdout(&o);
    assert_eq!(text.matches("satisfied").count(), 3, "{text}");

    let flat = optscale(&["theory-check", "--flat"]);
    assert_eq!(code(&flat), 0);
    assert!(stdout(&flat).contains("s=0"), "{}", stdout(&flat));

    assert_eq!(code(&optscale(&["theory-check", "--epsilon", "1.5"])), 1);
    assert_eq!(code(&optscale(&["theory-check", "--s-grid", "0,1"])), 1);
    assert_eq!(code(&optscale(&["theory-check", "--n", "0"])), 1);

    let dir = tempfile::tempdir().unwrap();
    let o = optscale(&["theory-check", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(dir.path().join("theory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5 * 3);
}

#[test]
fn diagnose_eigenvalue_files() {
    let dir = tempfile::tempdir().unwrap();
    let planted = dir.path().join("planted.txt");
    let text: String = (1..=1000).map(|i| format!("{}\n", (i as f64).powf(-2.0))).collect();
    fs::write(&planted, text).unwrap();
    let o = optscale(&["diagnose", planted.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("s = 1.000") && out.contains("large"), "{out}");

    let o = optscale(&["diagnose", planted.to_str().unwrap(), "--range", "10:500"]);
    assert_eq!(code(&o), 0);

    let flat = dir.path().join("flat.txt");
    fs::write(&flat, "2.0\n".repeat(50)).unwrap();
    let o = optscale(&["diagnose", flat.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("negligible"), "{}", stdout(&o));

    let zero = dir.path().join("zero.txt");
    fs::write(&zero, "1.0\n0.5\n0\n0.1\n").unwrap();
    let o = optscale(&["diagnose", zero.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn plot_data_figures() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_run(dir.path());
    let r = out.join("results.csv");
    let plots = dir.path().join("plots");
    for fig in ["fig1", "fig2", "fig3", "fig4"] {
        let o = optscale(&[
            "plot-data",
            r.to_str().unwrap(),
            "--figure",
            fig,
            "--out",
            plots.to_str().unwrap(),
            "--n-min",
            "10",
        ]);
        assert_eq!(code(&o), 0, "{fig}: {}", stderr(&o));
    }
    let mut names: Vec<_> = fs::read_dir(&plots)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        vec!["fig1_s0.5.csv", "fig1_s1.csv", "fig2.csv", "fig3.csv", "fig4_s0.5.csv", "fig4_s1.csv"]
    );
    let fig2 = fs::read_to_string(plots.join("fig2.csv")).unwrap();
    assert_eq!(fig2.lines().count(), 1 + 5 * 2);

    // Drop GD rows: the multiplier figure needs the baseline.
    let text = fs::read_to_string(&r).unwrap();
    let no_gd: String = text.lines().filter(|l| !l.contains(",GD,")).map(|l| format!("{l}\n")).collect();
    let no_gd_path = dir.path().join("no_gd.csv");
    fs::write(&no_gd_path, no_gd).unwrap();
    let o = optscale(&[
        "plot-data",
        no_gd_path.to_str().unwrap(),
        "--figure",
        "fig3",
        "--out",
        plots.to_str().unwrap(),
        "--n-min",
        "10",
    ]);
    assert_eq!(code(&o), 2);
}
