use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn circalloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_circalloc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn synth(dir: &Path) -> String {
    let root = dir.to_str().unwrap();
    ok(&circalloc(&["synth", "--out", root]));
    dir.join("run.conf").to_str().unwrap().to_string()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file() && p.file_name().unwrap() != "config.txt")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn synth_writes_a_runnable_config() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = synth(tmp.path());
    assert_eq!(fs::read_dir(tmp.path().join("tm")).unwrap().count(), 63);
    let out = circalloc(&["--config", &conf, "--dump-config", "fit"]);
    ok(&out);
    let dump = String::from_utf8(out.stdout).unwrap();
    assert!(dump.contains("window = Wed 15:00-15:30"));
    assert!(dump.contains("split = 2004-06-19"));
}

#[test]
fn allocation_outputs_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = synth(tmp.path());
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        ok(&circalloc(&["allocate", "--config", &conf, "--mode", "history", "--out", out.to_str().unwrap()]));
        runs.push(files(&out));
    }
    let names: Vec<&str> = runs[0].iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        ["allocation.csv", "circuits.txt", "demand.tm", "flows.txt", "residuals.txt"]
    );
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn simulation_report_is_deterministic_and_readable() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = synth(tmp.path());
    let mut csvs = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        ok(&circalloc(&[
            "simulate",
            "--config",
            &conf,
            "--strategies",
            "OSPF,RT-OptRR,HIST-NoRR",
            "--loads",
            "0.67,1.17",
            "--set",
            "measure-secs=30",
            "--out",
            out.to_str().unwrap(),
        ]));
        csvs.push(fs::read(out.join("simulation.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    let input = tmp.path().join("a/simulation.csv");
    let plots = tmp.path().join("plots");
    let out = circalloc(&["report", "--input", input.to_str().unwrap(), "--plots", "--out", plots.to_str().unwrap()]);
    ok(&out);
    let table = String::from_utf8(out.stdout).unwrap();
    assert_eq!(table.lines().count(), 4, "{table}");
    assert!(table.lines().nth(2).unwrap().starts_with("RT-OptRR"));
    let svg = fs::read_to_string(plots.join("drop_rate.svg")).unwrap();
    assert!(svg.contains("<text") && svg.contains("HIST-NoRR"));
}

#[test]
fn disaggregate_reproduces_allocated_circuits() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = synth(tmp.path());
    let alloc = tmp.path().join("alloc");
    ok(&circalloc(&["allocate", "--config", &conf, "--out", alloc.to_str().unwrap()]));
    let dis = tmp.path().join("dis");
    ok(&circalloc(&[
        "disaggregate",
        "--config",
        &conf,
        "--flows",
        alloc.join("flows.txt").to_str().unwrap(),
        "--demand",
        alloc.join("demand.tm").to_str().unwrap(),
        "--out",
        dis.to_str().unwrap(),
    ]));
    assert_eq!(
        fs::read(alloc.join("circuits.txt")).unwrap(),
        fs::read(dis.join("circuits.txt")).unwrap()
    );
}

#[test]
fn effective_config_round_trips_through_a_file() {
    let tmp = tempfile::tempdir().unwrap();
    let first = circalloc(&[
        "--dump-config",
        "--alpha",
        "0.5",
        "--mode",
        "history",
        "--window",
        "Tue 08:00-09:30",
        "--merge",
        "ATLA-M5:ATLA",
        "--loads",
        "1,1.5",
        "--set",
        "buffer-secs=2",
        "fit",
    ]);
    ok(&first);
    let path = tmp.path().join("dumped.conf");
    fs::write(&path, &first.stdout).unwrap();
    let second = circalloc(&["--config", path.to_str().unwrap(), "--dump-config", "fit"]);
    ok(&second);
    assert_eq!(first.stdout, second.stdout);
    let text = String::from_utf8(first.stdout).unwrap();
    assert!(text.contains("alpha = 0.5\n") && text.contains("buffer-secs = 2\n"));
}

#[test]
fn exit_codes_separate_input_errors_from_solver_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = synth(tmp.path());
    let out = tmp.path().join("o");
    let out = out.to_str().unwrap();

    let history_without_window = circalloc(&["allocate", "--mode", "history", "--set", "window="]);
    assert_eq!(history_without_window.status.code(), Some(2));
    let missing_topology = circalloc(&["allocate", "--out", out]);
    assert_eq!(missing_topology.status.code(), Some(2));
    let bad_alpha = circalloc(&["allocate", "--config", &conf, "--alpha", "-1", "--out", out]);
    assert_eq!(bad_alpha.status.code(), Some(2));
    let unknown_key = circalloc(&["fit", "--set", "colour=red"]);
    assert_eq!(unknown_key.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown_key.stderr).contains("colour"));

    let starved = circalloc(&["allocate", "--config", &conf, "--set", "max-iter=1", "--out", out]);
    assert_eq!(starved.status.code(), Some(3), "{}", String::from_utf8_lossy(&starved.stderr));
}
