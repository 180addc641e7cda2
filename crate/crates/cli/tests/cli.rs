use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsd-eig")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

const DDM: [&str; 4] = ["--problem", "laplace-fd:h=2^-4", "--precond", "ddm:H=2^-2,overlap=0.5"];

#[test]
fn solve_converges_and_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    let result = dir.path().join("r.json");
    let trace = dir.path().join("t.csv");
    let mut args = vec!["solve"];
    args.extend(DDM);
    args.extend(["--seed", "1", "--result", result.to_str().unwrap(), "--trace", trace.to_str().unwrap()]);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&result).unwrap()).unwrap();
    assert_eq!(r["termination"], "ResidualTol");
    assert!(r["abs_error"].as_f64().unwrap() < 1e-8);
    let t = std::fs::read_to_string(&trace).unwrap();
    assert!(t.starts_with("t,lambda,f,resnorm,distB,eta,eta_star,beta,xi,contraction"));
}

#[test]
fn solve_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut outs = Vec::new();
    for (i, extra) in [None, Some("--sequential")].into_iter().enumerate() {
        let path = dir.path().join(format!("t{i}.csv"));
        let mut args = vec!["solve"];
        args.extend(DDM);
        args.extend(["--seed", "3", "--trace", path.to_str().unwrap()]);
        args.extend(extra);
        assert_eq!(code(&run(&args)), 0);
        outs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn maxit_exhaustion_exits_2() {
    let mut args = vec!["solve"];
    args.extend(DDM);
    args.extend(["--maxit", "3"]);
    assert_eq!(code(&run(&args)), 2);
}

#[test]
fn config_errors_exit_1() {
    assert_eq!(code(&run(&["solve", "--problem", "mtx:/nonexistent/a.mtx", "--precond", "identity"])), 1);
    let mut args = vec!["solve"];
    args.extend(DDM);
    args.extend(["--step", "fixed:1e9"]);
    assert_eq!(code(&run(&args)), 1);
    assert_eq!(code(&run(&["solve", "--problem", "laplace-fd:h=0.3", "--precond", "identity"])), 1);
    assert_eq!(code(&run(&["table", "no-such-table"])), 1);
}

#[test]
fn eigenvector_start_always_succeeds() {
    let o = run(&["prob", "--problem", "laplace-fd:h=2^-3", "--precond", "exact", "--trials", "1", "--init", "eigvec"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = String::from_utf8_lossy(&o.stdout);
    assert!(s.lines().any(|l| l.starts_with("new,1,1,")), "{s}");
}

#[test]
fn validate_flags_injected_fault() {
    let base = ["validate", "--seeds", "1", "--sizes", "6", "--kinds", "random-spd", "--samples", "50"];
    let o = run(&[&base[..], &["--fault", "flip-sign-in-a"]].concat());
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("property (iii:"));
}

#[test]
fn phi_reports_ddm_angle() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("q.json");
    let o = run(&["phi", "--problem", "laplace-fem:h=2^-4", "--precond", "ddm:H=2^-2", "--json", json.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("cos2_phi"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let c2 = v["cos2_phi"].as_f64().unwrap();
    assert!((c2 - 0.1961).abs() < 0.01, "{c2}");
}
