use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use quick_xml::events::Event;
use quick_xml::Reader;

fn cei(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cei-sim"))
        .args(args)
        .env("CEI_SIM_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Parses the whole document and rejects anything that points outside it.
fn assert_self_contained_svg(path: &Path) {
    let text = fs::read_to_string(path).unwrap();
    let mut reader = Reader::from_str(&text);
    let mut saw_svg = false;
    let mut depth = 0i32;
    loop {
        match reader.read_event() {
            Ok(Event::Eof) => break,
            Ok(Event::Start(e)) => {
                depth += 1;
                saw_svg |= e.name().as_ref() == b"svg";
                check_attrs(&e, path);
            }
            Ok(Event::Empty(e)) => check_attrs(&e, path),
            Ok(Event::End(_)) => depth -= 1,
            Ok(_) => {}
            Err(err) => panic!("{} is not well-formed: {err}", path.display()),
        }
    }
    assert!(saw_svg, "{} has no svg root", path.display());
    assert_eq!(depth, 0, "{} has unbalanced tags", path.display());
}

fn check_attrs(e: &quick_xml::events::BytesStart<'_>, path: &Path) {
    for attr in e.attributes() {
        let attr = attr.unwrap();
        let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
        let value = String::from_utf8_lossy(&attr.value).into_owned();
        if key == "xmlns" || key.starts_with("xmlns:") {
            continue;
        }
        assert!(!key.ends_with("href"), "{}: external reference {key}={value}", path.display());
        assert!(!value.contains("://"), "{}: external URL in {key}", path.display());
        assert!(!value.contains("url("), "{}: url() in {key}", path.display());
    }
}

#[test]
fn run_writes_trace_outcome_and_four_panels() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = cei(&["run", "A", "--out", out, "--plot"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("collided=false"));

    let trace = fs::read_to_string(dir.path().join("A_trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "time,side,s,v,a_in,a_net,max_risk,event");
    assert!(trace.lines().count() > 100);

    let outcome: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("A_outcome.json")).unwrap()).unwrap();
    assert_eq!(outcome["collided"], serde_json::Value::Bool(false));
    assert_eq!(outcome["scenario"], "A");

    let svgs: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "svg"))
        .collect();
    assert_eq!(svgs.len(), 4, "{svgs:?}");
    for svg in &svgs {
        assert_self_contained_svg(svg);
    }
}

#[test]
fn repeated_runs_write_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert!(cei(&["run", "B", "--out", d.path().to_str().unwrap()]).status.success());
    }
    for f in ["B_trace.csv", "B_outcome.json", "B_replans.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_file_overrides_preset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "schema_version = 1\nname = \"C_slow\"\n[left]\nvd = 8.0\n").unwrap();
    let o = cei(&["run", "C", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("C_slow_trace.csv").exists());
}

#[test]
fn bad_config_exits_2_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "schema_version = 1\npreset = \"A\"\n[right]\nrho_u = 1.5\n").unwrap();
    let o = cei(&["run", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("right.rho_u"), "{}", stderr(&o));
}

#[test]
fn unknown_scenario_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = cei(&["run", "nope", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error:"));
}

#[test]
fn sweep_writes_table_and_fit_plot() {
    let dir = tempfile::tempdir().unwrap();
    let o = cei(&["sweep", "--velocities", "6..10:2", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("fit:"));
    let table = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert_self_contained_svg(&dir.path().join("sweep.svg"));
}

#[test]
fn malformed_velocity_range_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = cei(&["sweep", "--velocities", "14..6", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_suites_pass() {
    for suite in ["bounds", "posterior", "risk"] {
        let o = cei(&["verify", suite]);
        assert_eq!(o.status.code(), Some(0), "{suite}: {}{}", stdout(&o), stderr(&o));
        assert!(stdout(&o).contains("PASS"), "{suite}: {}", stdout(&o));
    }
}

#[test]
fn list_scenarios_names_every_preset() {
    let o = cei(&["list-scenarios"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in ["A", "B", "C", "D", "car_following"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing");
    }
}
