use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dynrisk"))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn gexp_square_payoff() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&configs_dir().join("gexp_square.json"), &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(&out);
    for engine in ["lattice", "pde"] {
        let v = r["results"][engine]["ask"].as_f64().unwrap();
        assert!((v - 0.04).abs() <= 2e-3, "{engine}: {v}");
    }
    assert_eq!(r["tolerance"]["expected"], 2e-3);
    assert!(out.join("gexp_lattice.csv").is_file() && out.join("gexp_pde.csv").is_file());
}

#[test]
fn fixture_consistency() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&configs_dir().join("consistency_fix_a.json"), &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(&out);
    assert!(r["max_violations"]["recursion"].as_f64().unwrap() <= 1e-9);
    assert!(r["max_violations"]["cocycle"].as_f64().unwrap() <= 1e-6);
    assert_eq!(r["results"]["samples"], 100);
}

#[test]
fn cfl_violation_is_numeric() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "cfl.json",
        r#"{"task":"gexp","gexp":{"sigma_low":0.1,"sigma_high":0.2,"maturity":1,"dt":0.01,"h":0.01,
            "payoff":{"kind":"square"}}}"#,
    );
    let o = run(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("CFL") && e.contains("h^2 / sigma_high^2"), "{e}");
}

#[test]
fn shipped_configs_validate() {
    let mut n = 0;
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "json") {
            let o = bin().arg("--config").arg(&p).arg("--validate-only").output().unwrap();
            assert_eq!(o.status.code(), Some(0), "{}: {}", p.display(), stderr(&o));
            n += 1;
        }
    }
    assert!(n >= 8);
}

#[test]
fn diagnostics_are_listed_with_lines() {
    let dir = tempfile::tempdir().unwrap();
    let missing = write_config(
        dir.path(),
        "missing.json",
        "{\n  \"task\": \"stability\",\n  \"lattice\": \"FIX-A\",\n  \"measures\": [\"FIX-A/Q1\", \"nowhere.json\"]\n}\n",
    );
    let o = bin().arg("--config").arg(&missing).arg("--validate-only").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert_eq!(e.lines().count(), 1, "{e}");
    assert!(e.contains("line 4") && e.contains("nowhere.json"), "{e}");

    let negative_p = write_config(
        dir.path(),
        "p.json",
        "{\n\"task\":\"eval\",\n\"lattice\":\"FIX-A\",\n\"sublinear\":{\"s\":0,\"t\":2},\n\"measures\":[\"FIX-A/Q1\"],\n\"p\":-2,\n\"variable\":{\"kind\":\"coordinate\",\"time\":2}\n}\n",
    );
    let o = bin().arg("--config").arg(&negative_p).arg("--validate-only").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert_eq!(e.lines().count(), 1, "{e}");
    assert!(e.contains("line 6") && e.contains("`p`"), "{e}");

    // A full run refuses the same config with exit 1.
    let o = run(&negative_p, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn schema_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", "{\n  \"task\": \"gexp\",\n  \"gexp\": {\"sigma_low\": \"high\"}\n}\n");
    let o = run(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn failed_check_exits_three_and_still_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "wrong.json",
        r#"{"task":"gexp","gexp":{"sigma_low":0.1,"sigma_high":0.2,"maturity":0.1,"dt":0.01,
            "payoff":{"kind":"square"},"engine":"lattice","expected":1.0}}"#,
    );
    let out = dir.path().join("out");
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(3));
    let r = report(&out);
    assert_eq!(r["passed"], false);
    assert!(r["max_violations"]["expected"].as_f64().unwrap() > 0.9);
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = configs_dir().join("data");
    let cfg = write_config(
        dir.path(),
        "eval.json",
        &format!(
            r#"{{"task":"eval","lattice":"{}","sublinear":{{"s":0,"t":2}},
                "measures":["FIX-A/Q1","{}"],"p":2,"seed":3,
                "variable":{{"kind":"random","time":2,"count":5,"scale":2.0}}}}"#,
            data.join("fix_a_lattice.json").display(),
            data.join("iid_09.json").display()
        ),
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run(&cfg, &a, &[]).status.code(), Some(0));
    assert_eq!(run(&cfg, &b, &[]).status.code(), Some(0));
    for f in ["report.json", "eval.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(report(&a)["seed"], 3);

    let c = dir.path().join("c");
    assert_eq!(run(&cfg, &c, &["--seed", "4"]).status.code(), Some(0));
    let (ra, rc) = (report(&a), report(&c));
    assert_eq!(rc["seed"], 4);
    assert_eq!(ra["inputs_digest"], rc["inputs_digest"]);
    assert_ne!(ra["results"], rc["results"]);
}

#[test]
fn penalty_of_iid_query_is_infinite() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&configs_dir().join("penalty_fix_a.json"), &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let q = &report(&out)["results"]["queries"];
    let values: Vec<Value> = (0..4).map(|i| q[i]["penalty"][0].clone()).collect();
    assert_eq!(values[0], 0.0);
    assert_eq!(values[1], 0.0);
    assert!(values[2].as_f64().unwrap().abs() <= 1e-9);
    assert_eq!(values[3], "inf");
}

#[test]
fn stability_of_fixture_pair() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&configs_dir().join("stability_fix_a.json"), &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = &report(&out)["results"];
    assert_eq!(r["family"]["stable"], false);
    assert_eq!(r["hull"]["stable"], true);
    assert_eq!(r["hull_selections"], 8);
    assert_eq!(r["paste"]["kernels"][0]["weights"][0], 0.6);
    assert_eq!(r["paste"]["kernels"][1]["weights"][0], 0.5);
}

#[test]
fn skorokhod_example_pair() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&configs_dir().join("skorokhod_dm.json"), &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = report(&out)["results"]["pairs"][0]["value"].as_f64().unwrap();
    assert!((v - 0.1).abs() <= 1e-6);
}
