use std::path::Path;
use std::process::{Command, Output};

use imputation_audit::simlab::fixtures;
use serde_json::Value;

const OUTCOME_CONFIG: &str = r#"{"outcome": "y", "binary": true, "x": ["group"]}"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_imputation-audit"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

fn close(v: &Value, expected: f64) {
    let got = v.as_f64().unwrap_or_else(|| panic!("{v} is not a number"));
    assert!((got - expected).abs() < 1e-12, "{got} != {expected}");
}

/// Group `a` has outcomes 1, 0, 1, 1 and one nonrespondent; group `b` has two respondents.
fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("data.csv"), "y,group\n1,a\n0,a\n1,a\n1,a\n,a\n0,b\n1,b\n").unwrap();
    std::fs::write(d.join("config.json"), OUTCOME_CONFIG).unwrap();
    std::fs::write(
        d.join("q.json"),
        r#"{"strata": [{"x": "group=a", "y": [[0, 0.9], [1, 0.1]]}]}"#,
    )
    .unwrap();
    dir
}

const DATA: [&str; 6] = ["--data", "data.csv", "--config", "config.json", "--xi", "group=a"];

#[test]
fn bounds_on_small_table() {
    let dir = workspace();
    let out = run(dir.path(), &[&["bounds"][..], &DATA, &["--out", "res"]].concat());
    let r = report(&out);
    assert_eq!(r["command"], "bounds");
    assert_eq!(r["tool"], "imputation-audit");
    close(&r["result"]["interval"]["lo"], 0.6);
    close(&r["result"]["interval"]["hi"], 0.8);
    close(&r["result"]["midpoint"], 0.7);
    let series = std::fs::read_to_string(dir.path().join("res/series.csv")).unwrap();
    let lines: Vec<&str> = series.lines().collect();
    assert_eq!(lines[0], "gamma,max_squared_bias");
    assert_eq!(lines.len(), 102);
    let written = std::fs::read(dir.path().join("res/report.json")).unwrap();
    assert_eq!(written, out.stdout);
}

#[test]
fn ecological_example() {
    let dir = tempfile::tempdir().unwrap();
    let r = report(&run(dir.path(), &["ecological", "--py", "0.6", "--pw", "0.5"]));
    close(&r["result"]["interval"]["lo"], 0.2);
    close(&r["result"]["interval"]["hi"], 1.0);
    close(&r["result"]["midpoint"], 0.6);
}

#[test]
fn estimate_with_explicit_distribution() {
    let dir = workspace();
    let r = report(&run(
        dir.path(),
        &[
            &["estimate"][..],
            &DATA,
            &["--model", "q:q.json", "--m", "5", "--seed", "3"],
        ]
        .concat(),
    ));
    let res = &r["result"];
    close(&res["e_q"], 0.1);
    // observed part 3/5 plus the missing share 1/5 times 0.1
    close(&res["q_mean"], 0.62);
    assert_eq!(res["imputation"]["m"], 5);
    let draws = res["imputation"]["per_draw_estimates"].as_array().unwrap();
    assert!(draws.iter().all(|d| [0.6, 0.8].contains(&d.as_f64().unwrap())));
}

#[test]
fn single_imputation_audit_lies_in_interval() {
    let dir = workspace();
    let args = [&["audit"][..], &DATA, &["--model", "mar", "--m", "1", "--seed", "9"]].concat();
    let out = run(dir.path(), &args);
    let r = report(&out);
    let res = &r["result"];
    let est = res["imputation"]["pooled_mean"].as_f64().unwrap();
    assert_eq!(res["imputation"]["per_draw_estimates"][0].as_f64().unwrap(), est);
    assert_eq!(res["imputation"]["pooled_dispersion"].as_f64().unwrap(), 0.0);
    assert!((0.6..=0.8).contains(&est));
    assert_eq!(res["estimate_in_interval"], true);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("assumption-free interval [0.6000, 0.8000]"), "{stderr}");
}

#[test]
fn audit_against_population() {
    let dir = workspace();
    std::fs::write(
        dir.path().join("pop.json"),
        fixtures::mnar_outcome_population().to_json_string().unwrap(),
    )
    .unwrap();
    let args = [
        &["audit"][..],
        &DATA,
        &["--model", "mar", "--m", "4", "--seed", "1", "--population", "pop.json"],
    ]
    .concat();
    let r = report(&run(dir.path(), &args));
    let gap = &r["result"]["bias_gap"];
    close(&gap["plim"], 0.7);
    close(&gap["truth"], 0.8);
    assert_eq!(gap["conditions_hold"], false);
    assert_eq!(gap["truth_covered"], true);
}

#[test]
fn covariate_bounds_and_mixture() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("data.csv"),
        "y,group,geno\n1,a,p\n1,a,p\n1,a,p\n0,a,p\n1,a,q\n0,a,q\n1,a,\n0,a,\n",
    )
    .unwrap();
    std::fs::write(
        d.join("config.json"),
        r#"{"outcome": "y", "binary": true, "x": ["group"], "w": ["geno"]}"#,
    )
    .unwrap();
    let cov = [
        "--data",
        "data.csv",
        "--config",
        "config.json",
        "--xi",
        "group=a",
        "--omega",
        "geno=p",
    ];
    let r = report(&run(d, &[&["bounds"][..], &cov].concat()));
    close(&r["result"]["interval"]["lo"], 0.6);
    close(&r["result"]["interval"]["hi"], 0.8);
    let r = report(&run(
        d,
        &[&["estimate"][..], &cov, &["--model", "marcov", "--m", "10"]].concat(),
    ));
    let mixture = r["result"]["mixture"].as_f64().unwrap();
    assert!((0.6..=0.8).contains(&mixture), "{mixture}");
}

#[test]
fn simulate_writes_series() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("pop.json"),
        fixtures::mar_outcome_population().to_json_string().unwrap(),
    )
    .unwrap();
    std::fs::write(
        d.join("sim.json"),
        r#"{"population": "pop.json", "model": "mar", "estimator": "imputation_mean", "xi": "group=a",
            "n_grid": [200, 2000, 20000], "reps": 30, "seed": 4, "tolerance": 0.05}"#,
    )
    .unwrap();
    let r = report(&run(d, &["simulate", "--spec", "sim.json", "--out", "sim"]));
    close(&r["result"]["plim"], 0.6);
    assert_eq!(r["result"]["rows"].as_array().unwrap().len(), 3);
    assert_eq!(r["config"]["spec"]["population"]["regime"], "outcome");
    let series = std::fs::read_to_string(d.join("sim/series.csv")).unwrap();
    assert_eq!(
        series.lines().next().unwrap(),
        "n,mean_abs_dev,max_abs_dev,mean_estimate,sd_estimate,skipped"
    );
    assert_eq!(series.lines().count(), 4);
}

#[test]
fn exit_codes() {
    let dir = workspace();
    let d = dir.path();
    assert_eq!(run(d, &[]).status.code(), Some(2));
    assert_eq!(run(d, &["bounds", "--data", "data.csv"]).status.code(), Some(2));
    assert_eq!(run(d, &["--help"]).status.code(), Some(0));

    let missing = run(
        d,
        &[
            "bounds",
            "--data",
            "nope.csv",
            "--config",
            "config.json",
            "--xi",
            "group=a",
        ],
    );
    assert_eq!(missing.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error[Io]"));

    std::fs::write(d.join("bad.csv"), "y,group\n1,a\n7,a\n").unwrap();
    let bad = run(
        d,
        &[
            "bounds",
            "--data",
            "bad.csv",
            "--config",
            "config.json",
            "--xi",
            "group=a",
        ],
    );
    assert_eq!(bad.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("OutcomeOutOfDomain"));

    let guard = run(d, &["ecological", "--py", "0.6", "--pw", "0"]);
    assert_eq!(guard.status.code(), Some(4));

    std::fs::write(d.join("nofit.csv"), "y,group\n1,a\n,b\n").unwrap();
    let nofit = run(
        d,
        &[
            "estimate",
            "--data",
            "nofit.csv",
            "--config",
            "config.json",
            "--xi",
            "group=b",
            "--model",
            "mar",
        ],
    );
    assert_eq!(
        nofit.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&nofit.stderr)
    );
}

#[test]
fn replay_reproduces_report() {
    let dir = workspace();
    let d = dir.path();
    let first = run(
        d,
        &[
            &["estimate"][..],
            &DATA,
            &["--model", "mar", "--m", "50", "--seed", "21", "--out", "r"],
        ]
        .concat(),
    );
    assert!(first.status.success());
    let again = run(d, &["replay", "--report", "r/report.json"]);
    assert!(again.status.success());
    assert_eq!(first.stdout, again.stdout);
    let other = run(
        d,
        &[
            &["estimate"][..],
            &DATA,
            &["--model", "mar", "--m", "50", "--seed", "22"],
        ]
        .concat(),
    );
    assert_ne!(first.stdout, other.stdout);
}

#[test]
fn bounds_contain_every_estimate() {
    use rand::Rng;
    let mut rng = imputation_audit::rng::stream_rng(12, 0);
    for case in 0..6 {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let p_missing = rng.random::<f64>() * 0.6;
        let mut rows = String::from("y,group\n");
        for i in 0..40 {
            let y = if rng.random::<f64>() < p_missing {
                String::new()
            } else {
                format!("{}", rng.random_range(0..=4) as f64 / 4.0)
            };
            rows.push_str(&format!("{y},{}\n", ["a", "b"][i % 2]));
        }
        std::fs::write(d.join("data.csv"), rows).unwrap();
        std::fs::write(
            d.join("config.json"),
            r#"{"outcome": "y", "y_lo": 0, "y_hi": 1, "x": ["group"]}"#,
        )
        .unwrap();
        std::fs::write(d.join("q.json"), r#"{"strata": [{"x": "group=a", "y": [[0, 0.2], [0.5, 0.3], [1, 0.5]]}, {"x": "group=b", "y": [[0.25, 1]]}]}"#).unwrap();
        let b = report(&run(d, &[&["bounds"][..], &DATA].concat()));
        let (lo, hi) = (
            b["result"]["interval"]["lo"].as_f64().unwrap(),
            b["result"]["interval"]["hi"].as_f64().unwrap(),
        );
        for model in ["mar", "q:q.json"] {
            let seed = case.to_string();
            let e = report(&run(
                d,
                &[
                    &["estimate"][..],
                    &DATA,
                    &["--model", model, "--m", "25", "--seed", &seed],
                ]
                .concat(),
            ));
            for draw in e["result"]["imputation"]["per_draw_estimates"].as_array().unwrap() {
                let v = draw.as_f64().unwrap();
                assert!(
                    lo - 1e-12 <= v && v <= hi + 1e-12,
                    "case {case} {model}: {v} outside [{lo}, {hi}]"
                );
            }
        }
    }
}
