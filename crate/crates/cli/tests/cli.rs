use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use amopt::commands::{OptimizationResult, SimulationSummary};
use amopt::config::{Algorithm, Variable};
use amopt::{load_config, parse_config};
use amopt_core::deposition::Geometry;

const TINY: &str = r#"
[build]
width = 4.0
height = 2.0
nx = 4
layers = 2
dt_element = 0.01
cooldown = 5.0
"#;

fn amopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amopt"))
        .args(args)
        .output()
        .expect("running amopt")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn scenario(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

#[test]
fn minimal_config_gets_defaults() {
    let cfg = parse_config(TINY).unwrap();
    assert_eq!(cfg.build.rows_per_layer, 1);
    assert_eq!(cfg.build.dwell_factor, 0.5);
    assert!(cfg.solver.reuse_factorization);
    assert!(cfg.optimizer.is_none());
    assert_eq!(cfg.verify.h_values, vec![32.0, 40.0, 50.0]);
    let p = cfg.material();
    assert_eq!(p, amopt_core::material::MaterialParams::default());
    let plan = cfg.plan();
    assert_eq!((plan.nx, plan.ny, plan.n_layers), (4, 2, 2));
}

#[test]
fn invalid_configs_name_the_problem() {
    let cases = [
        (format!("{TINY}\n[optimizer]\nalgorithm = \"lv\"\nvariables = [\"dt_element\"]\nlower = [0.01]\nupper = [0.005]\nstart = [0.01]\ntau0 = [0.001]\ntau_min = [1e-4]\n"), "lower"),
        (format!("{TINY}\n[output]\ndirr = \"x\"\n"), "dirr"),
        (TINY.replace("nx = 4", "nx = 0"), "nx"),
        (TINY.replace("layers = 2", "layers = 2\nrows_per_layer = 0"), "n_layers"),
        (format!("{TINY}\n[objective]\nsurface = \"step-edge\"\n"), "hole_radius"),
        (format!("{TINY}\n[optimizer]\nalgorithm = \"gd\"\nvariables = [\"layers\"]\nlower = [2.0]\nupper = [4.0]\nstart = [2.0]\n"), "gradient descent"),
        (format!("{TINY}\n[optimizer]\nalgorithm = \"lv\"\nvariables = [\"layers\"]\nlower = [2.5]\nupper = [4.0]\nstart = [3.0]\ntau0 = [1.0]\ntau_min = [0.5]\n"), "integer"),
        ("[build]\nwidth = 1.0\n".to_string(), "missing field"),
    ];
    for (text, needle) in cases {
        let err = format!("{:#}", parse_config(&text).unwrap_err());
        assert!(err.contains(needle), "expected `{needle}` in: {err}");
    }
    let err = format!("{:#}", parse_config("[build\nwidth = 1").unwrap_err());
    assert!(err.contains("line 1"), "{err}");
}

#[test]
fn shipped_scenarios_load() {
    let cfg = load_config(&scenario("wall_gd.toml")).unwrap();
    let plan = cfg.plan();
    assert_eq!((plan.width, plan.height, plan.nx, plan.ny), (20.0, 10.0, 40, 30));
    let opt = cfg.optimizer.unwrap();
    assert_eq!(opt.algorithm, Algorithm::Gd);
    assert_eq!(opt.variables, vec![Variable::H]);
    assert_eq!((opt.lower[0], opt.upper[0]), (30.0, 55.0));

    let hole = load_config(&scenario("hole_lv.toml")).unwrap();
    assert_eq!(hole.plan().geometry, Geometry::QuarterHole { radius: 3.0 });
    for name in ["wall_lv", "wall_bo", "hole_gd", "hole_bo", "desk_verify", "reduced_wall"] {
        load_config(&scenario(&format!("{name}.toml"))).unwrap_or_else(|e| panic!("{name}: {e:#}"));
    }
}

#[test]
fn simulate_summary_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &format!("{TINY}\n[output]\nsnapshot_interval = 20\n"));
    let out = dir.path().join("run");
    let o = amopt(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let from_stdout: SimulationSummary = toml::from_str(&String::from_utf8(o.stdout).unwrap()).unwrap();
    let from_file: SimulationSummary = toml::from_str(&fs::read_to_string(out.join("summary.toml")).unwrap()).unwrap();
    assert_eq!(from_stdout, from_file);
    assert!(from_file.f > 0.0);
    assert!(from_file.max_birth_stress < 1e-10);
    assert_eq!(from_file.elements, 8);
    let snaps: Vec<_> = fs::read_dir(out.join("snapshots")).unwrap().collect();
    assert_eq!(snaps.len(), from_file.snapshots);
    assert!(from_file.snapshots >= 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();

    let missing = dir.path().join("nope.toml");
    let o = amopt(&["simulate", "--config", missing.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(2));

    let bad = write_config(dir.path(), "bad.toml", &TINY.replace("width = 4.0", "width = -4.0"));
    assert_eq!(amopt(&["simulate", "--config", &bad, "--out", out]).status.code(), Some(2));

    let stuck = write_config(dir.path(), "stuck.toml", &format!("{TINY}\n[solver]\nmax_iterations = 1\ntol = 1e-14\n"));
    let o = amopt(&["simulate", "--config", &stuck, "--out", out]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));

    let strict = write_config(
        dir.path(),
        "strict.toml",
        &format!("{TINY}\n[verify]\nh_values = [40.0]\ntolerance = 1e-300\n"),
    );
    let o = amopt(&["verify-gradient", "--config", &strict, "--out", out]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn verify_gradient_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "v.toml", &format!("{TINY}\n[verify]\nh_values = [35.0, 45.0]\n"));
    let out = dir.path().join("v");
    let o = amopt(&["verify-gradient", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("gradient_check.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("h,f,analytic,finite_difference,rel_error"));
    assert_eq!(lines.count(), 2);
}

fn optimize(dir: &Path, name: &str, block: &str, extra: &[&str]) -> (OptimizationResult, std::path::PathBuf) {
    let cfg = write_config(dir, &format!("{name}.toml"), &format!("{TINY}\n{block}"));
    let out = dir.join(name);
    let mut args = vec!["optimize", "--config", &cfg, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = amopt(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let res: OptimizationResult = toml::from_str(&String::from_utf8(o.stdout).unwrap()).unwrap();
    let file: OptimizationResult = toml::from_str(&fs::read_to_string(out.join("result.toml")).unwrap()).unwrap();
    assert_eq!(res, file);
    assert!(out.join(&res.history).exists());
    (res, out)
}

#[test]
fn optimize_gd_and_lv() {
    let dir = tempfile::tempdir().unwrap();
    let (gd, _) = optimize(
        dir.path(),
        "gd",
        "[optimizer]\nalgorithm = \"gd\"\nvariables = [\"h\"]\nlower = [30.0]\nupper = [55.0]\nstart = [53.0]\n",
        &[],
    );
    // the short cooldown leaves the tiny wall warm, so only the box matters here
    assert!(gd.y[0] >= 30.0 && gd.y[0] <= 55.0);
    assert!(gd.status == "converged" || gd.status == "zerogradient", "{}", gd.status);

    let (lv, out) = optimize(
        dir.path(),
        "lv",
        "[optimizer]\nalgorithm = \"lv\"\nvariables = [\"dt_element\", \"layers\"]\nlower = [0.005, 1.0]\nupper = [0.01, 3.0]\nstart = [0.0075, 2.0]\ntau0 = [0.002, 2.0]\ntau_min = [1e-3, 1.0]\n",
        &["--jobs", "2"],
    );
    assert_eq!(lv.status, "converged");
    let probes = fs::read_to_string(out.join("lv_probes.csv")).unwrap();
    assert!(probes.starts_with("iteration,y0,y1,f,accepted"));
}

#[test]
fn bayesian_runs_are_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let block = "[optimizer]\nalgorithm = \"bo\"\nvariables = [\"h\"]\nlower = [30.0]\nupper = [55.0]\nmax_proposals = 2\n";
    let (a, out_a) = optimize(dir.path(), "a", block, &["--seed", "5", "--jobs", "2"]);
    let (b, out_b) = optimize(dir.path(), "b", block, &["--seed", "5"]);
    assert_eq!(a, b);
    let ha = fs::read_to_string(out_a.join("bo_history.csv")).unwrap();
    assert_eq!(ha, fs::read_to_string(out_b.join("bo_history.csv")).unwrap());
    assert!(ha.starts_with("iteration,y0,f,theta,ei"));
}
