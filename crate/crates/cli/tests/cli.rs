use std::path::{Path, PathBuf};
use std::process::Command;

use cohcsp::structures::{linear_instance, LinearEquation};
use cohcsp_cli::{run, CommandOutcome, Verdict};
use serde_json::Value;

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn cli(args: &[&str]) -> CommandOutcome {
    run(std::iter::once("cohcsp").chain(args.iter().copied()))
}

fn validator() -> jsonschema::Validator {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/output.schema.json"))
        .unwrap();
    let schema: Value = serde_json::from_str(&text).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn check(outcome: &CommandOutcome) {
    let expected = match outcome.verdict {
        Verdict::Yes => 0,
        Verdict::No => 1,
        Verdict::Error => 2,
    };
    assert_eq!(outcome.exit_code(), expected);
    let doc: Value = serde_json::from_str(&outcome.render()).unwrap();
    let v = validator();
    let errors: Vec<String> = v.iter_errors(&doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{}: {errors:?}", outcome.render());
    assert_eq!(outcome.verdict == Verdict::Error, outcome.stderr.is_some());
}

/// TRI instance and template written to a scratch directory.
fn tri(dir: &Path) -> (PathBuf, PathBuf) {
    let (a, t) = linear_instance(
        2,
        &[
            LinearEquation::new(&["x", "y"], &[1, 1], 1),
            LinearEquation::new(&["y", "z"], &[1, 1], 1),
            LinearEquation::new(&["x", "z"], &[1, 1], 1),
        ],
    )
    .unwrap();
    let (pa, pt) = (dir.join("TRI.json"), dir.join("TRI.template.json"));
    std::fs::write(&pa, a.serialize()).unwrap();
    std::fs::write(&pt, t.to_json().to_string()).unwrap();
    (pa, pt)
}

#[test]
fn documented_examples() {
    let (k3, k2) = (fixture("K3.json"), fixture("K2.json"));
    let out = cli(&["cohcon", "--k", "2", &k3, &k2]);
    assert_eq!((out.verdict, out.exit_code()), (Verdict::No, 1));
    let out = cli(&["kcon", "--k", "2", &k3, &k2]);
    assert_eq!((out.verdict, out.exit_code()), (Verdict::Yes, 0));
    let out = cli(&["hom", &k2, &k2]);
    assert_eq!(out.verdict, Verdict::Yes);
    assert_eq!(out.detail["witnesses"].as_array().unwrap().len(), 2);
    let out = cli(&["equiv", "--logic", "ck", "--k", "2", &fixture("C6.json"), &fixture("2C3.json")]);
    assert_eq!((out.verdict, out.exit_code()), (Verdict::Yes, 0));
}

#[test]
fn avn_on_the_triangle_system() {
    let dir = tempfile::tempdir().unwrap();
    let (a, t) = tri(dir.path());
    let out = cli(&["avn", "--k", "3", a.to_str().unwrap(), t.to_str().unwrap()]);
    check(&out);
    assert_eq!(out.verdict, Verdict::Yes);
    assert_eq!(out.detail["instance_theory"].as_array().unwrap().len(), 3);
    assert_eq!(out.detail["instance_unsatisfiable"], true);
    assert_eq!(out.detail["vacuous_contexts"], serde_json::json!([["x", "y", "z"]]));
    let out = cli(&["cohcon", "--k", "3", "--one-step", a.to_str().unwrap(), t.to_str().unwrap()]);
    assert_eq!(out.verdict, Verdict::No);
}

#[test]
fn exit_codes_hold_across_the_fixtures() {
    let names = ["K2.json", "K3.json", "C5.json", "C6.json", "2C3.json"];
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let trace = trace.to_str().unwrap();
    for a in names {
        for b in names {
            let (a, b) = (fixture(a), fixture(b));
            let runs: Vec<Vec<&str>> = vec![
                vec!["hom", &a, &b],
                vec!["hom", "--mode", "embed", &a, &b],
                vec!["hom", "--mode", "iso", &a, &b],
                vec!["kcon", "--k", "2", &a, &b],
                vec!["cohcon", "--k", "2", &a, &b],
                vec!["cohcon", "--k", "2", "--one-step", &a, &b],
                vec!["csc", "--k", "2", &a, &b],
                vec!["equiv", "--logic", "el", "--k", "2", &a, &b],
                vec!["equiv", "--logic", "lk", "--k", "2", &a, &b],
                vec!["equiv", "--logic", "ck", "--k", "2", &a, &b],
                vec!["equiv", "--logic", "z", "--k", "2", "--trace", trace, &a, &b],
                vec!["wl", &a, &b],
                vec!["dump", "--what", "strategy", "--k", "2", &a, &b],
                vec!["dump", "--what", "strategy", "--k", "2", "--mode", "iso", "--stage", "coh", &a, &b],
                vec!["kcon", "--k", "1", &a, &b],
            ];
            for args in runs {
                check(&cli(&args));
            }
        }
    }
    for args in [
        vec!["gen", "--kind", "clique", "--n", "4"],
        vec!["gen", "--kind", "linear", "--n", "5", "--p", "3", "--seed", "4", "--planted"],
        vec!["gen", "--kind", "linear", "--p", "4"],
        vec!["gen", "--kind", "random", "--n", "6", "--seed", "2"],
        vec!["gen", "--kind", "union"],
        vec!["dump", "--what", "ztest", "--k", "2", "--context", "0,1", "--section", "0,1"],
        vec!["frobnicate"],
        vec!["kcon", "--k"],
    ] {
        check(&cli(&args));
    }
}

#[test]
fn bad_invocations_are_errors_with_usage() {
    let out = cli(&["kcon", "--k", "2", "--bogus", &fixture("K2.json"), &fixture("K2.json")]);
    assert_eq!(out.exit_code(), 2);
    assert!(out.stderr.as_deref().unwrap().contains("Usage"));
    let out = cli(&["hom", "/no/such/file.json", &fixture("K2.json")]);
    assert_eq!(out.exit_code(), 2);
    assert!(out.detail["error"].as_str().unwrap().contains("/no/such/file.json"));
    let out = cli(&["--jobs", "0", "wl", &fixture("K2.json"), &fixture("K2.json")]);
    assert_eq!(out.exit_code(), 2);
    let out = cli(&["--help"]);
    assert!(out.help.as_deref().unwrap().contains("cohcon"));
}

#[test]
fn trace_lines_follow_rounds() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    let out = cli(&["cohcon", "--k", "2", "--trace", trace.to_str().unwrap(), &fixture("K3.json"), &fixture("K2.json")]);
    let text = std::fs::read_to_string(&trace).unwrap();
    let rounds = out.detail["rounds"].as_u64().unwrap() as usize;
    assert_eq!(text.lines().count(), rounds + 1);
    let last: Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(last["total_sections"], 0);
    assert_eq!(out.detail["trace"], trace.to_str().unwrap());
}

#[test]
fn dumps_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let (k3, k2) = (fixture("K3.json"), fixture("K2.json"));
    let mm = dir.path().join("z.mtx");
    let out = cli(&["dump", "--what", "ztest", "--k", "2", "--out", mm.to_str().unwrap(), &k3, &k2]);
    check(&out);
    assert_eq!(out.verdict, Verdict::No);
    let text = std::fs::read_to_string(&mm).unwrap();
    assert!(text.starts_with("%%MatrixMarket"));
    assert_eq!(out.detail["index"]["columns"].as_array().unwrap().len(), 6);

    let out = cli(&["dump", "--what", "strategy", "--k", "2", &k3, &k2]);
    let family = &out.detail["family"];
    assert_eq!(family["total_sections"], 13);
    assert_eq!(family["sections"]["[\"0\",\"1\"]"], serde_json::json!([["0", "1"], ["1", "0"]]));

    let g = dir.path().join("g.json");
    let out = cli(&["gen", "--kind", "cycle", "--n", "6", "--out", g.to_str().unwrap()]);
    check(&out);
    let again = cli(&["hom", "--mode", "iso", g.to_str().unwrap(), &fixture("C6.json")]);
    assert_eq!(again.verdict, Verdict::Yes);
}

fn binary(args: &[&str], envs: &[(&str, &str)]) -> (i32, Vec<u8>, Vec<u8>) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cohcsp"));
    cmd.args(args).env_remove(cohcsp_cli::BUDGET_VAR);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let out = cmd.output().unwrap();
    (out.status.code().unwrap(), out.stdout, out.stderr)
}

#[test]
fn binary_output_is_byte_identical() {
    let (c6, two) = (fixture("C6.json"), fixture("2C3.json"));
    for args in [
        vec!["equiv", "--logic", "z", "--k", "2", &c6, &two],
        vec!["dump", "--what", "strategy", "--k", "2", &c6, &two],
        vec!["gen", "--kind", "linear", "--n", "6", "--p", "3", "--seed", "9"],
    ] {
        let first = binary(&args, &[]);
        let second = binary(&args, &[]);
        let sequential = binary(&[&["--jobs", "1"], args.as_slice()].concat(), &[]);
        assert_eq!(first, second);
        assert_eq!(first.1, sequential.1);
    }
}

#[test]
fn budget_comes_from_the_environment() {
    let (k3, c6) = (fixture("K3.json"), fixture("C6.json"));
    let (code, stdout, _) = binary(&["hom", &c6, &k3], &[("COHCSP_BUDGET", "10")]);
    assert_eq!(code, 2);
    assert!(String::from_utf8(stdout).unwrap().contains("budget"));
    let (code, _, _) = binary(&["hom", &c6, &k3], &[]);
    assert_eq!(code, 0);
    let (code, _, stderr) = binary(&["hom", &c6, &k3], &[("COHCSP_BUDGET", "lots")]);
    assert_eq!(code, 2);
    assert!(!stderr.is_empty());
}
