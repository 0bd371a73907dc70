use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn radshock(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radshock"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

fn value<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(" = ")))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
}

const BURGERS: &[&str] = &["--flux", "u^2/2", "--uminus", "1", "--uplus", "-1", "--out", "out"];

#[test]
fn burgers_profile_has_one_admissible_jump() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["profile"];
    args.extend_from_slice(BURGERS);
    let out = radshock(dir.path(), &args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let jumps = read(&dir.path().join("out"), "jumps.csv");
    let rows: Vec<&str> = jumps.lines().collect();
    assert_eq!(rows[0], "xi0,u_left,u_right,rh_residual,oleinik_margin");
    assert_eq!(rows.len(), 2);
    let cols: Vec<f64> = rows[1].split(',').map(|c| c.parse().unwrap()).collect();
    assert!(cols[1] > 0.0 && cols[2] < 0.0);
    assert!((cols[1] + cols[2]).abs() < 1e-12);
    assert!(cols[3] < 1e-8 && cols[4] > 0.0);
    let summary = read(&dir.path().join("out"), "profile.txt");
    assert_eq!(value(&summary, "jumps"), "1");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &str| {
        let o = radshock(
            dir.path(),
            &[
                "profile",
                "--flux",
                "u^4/4 - u^2/2",
                "--size",
                "4",
                "--eps",
                "0.1",
                "--out",
                out,
            ],
        );
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    };
    run("a");
    run("b");
    for f in ["profile.csv", "jumps.csv", "profile.txt"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap()
        );
    }
    assert_eq!(read(&dir.path().join("a"), "jumps.csv").lines().count(), 3);
}

#[test]
fn regularity_classifies_a_burgers_shock() {
    let dir = tempfile::tempdir().unwrap();
    let o = radshock(
        dir.path(),
        &["regularity", "--flux", "u^2/2", "--size", "1.3", "--out", "out"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(&dir.path().join("out"), "regularity.txt");
    assert_eq!(value(&text, "predicted_class"), "C2");
    assert!(dir.path().join("out/orbit.csv").exists());
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.cfg"),
        "# Burgers\nflux = \"u^2/2\"\numinus = 1\nuplus = -1\neps = 4\nout = cfg\n",
    )
    .unwrap();
    let o = radshock(dir.path(), &["profile", "--config", "run.cfg", "--eps=1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(&dir.path().join("cfg"), "profile.txt");
    assert_eq!(value(&text, "eps").parse::<f64>().unwrap(), 1.0);
}

#[test]
fn sweep_writes_one_run_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["profile"];
    args.extend_from_slice(BURGERS);
    args.extend_from_slice(&["--sweep", "eps:0.5|1|2"]);
    let o = radshock(dir.path(), &args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let summary = read(&out, "sweep.csv");
    assert_eq!(summary.lines().count(), 4, "{summary}");
    for i in 0..3 {
        assert!(out.join(format!("sweep_{i:03}")).join("jumps.csv").exists());
    }
}

#[test]
fn exit_codes_follow_the_failure_class() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| radshock(dir.path(), args).status.code();
    // Unknown key.
    assert_eq!(
        code(&["profile", "--flux", "u^2/2", "--size", "1", "--colour", "red"]),
        Some(2)
    );
    // Unparsable flux.
    assert_eq!(code(&["profile", "--flux", "u^^2", "--size", "1"]), Some(2));
    assert_eq!(code(&["nonsense"]), Some(2));
    // Coincident and reversed states.
    assert_eq!(
        code(&["profile", "--flux", "u^2/2", "--uminus", "1", "--uplus", "1"]),
        Some(3)
    );
    assert_eq!(
        code(&["profile", "--flux", "u^2/2", "--uminus", "-1", "--uplus", "1"]),
        Some(3)
    );
    // Quartic above its intermediate threshold.
    assert_eq!(
        code(&["profile", "--flux", "u^4/4 - u^2/2", "--size", "4", "--eps", "10"]),
        Some(3)
    );
}

#[test]
fn system_mode_writes_lifted_jumps() {
    let dir = tempfile::tempdir().unwrap();
    let a = 0.1 / 2f64.sqrt();
    let (up, s) = (format!("{},{}", 1.0 - a, 0.2 - a), format!("{}", 1.2 - a));
    let o = radshock(
        dir.path(),
        &[
            "system",
            "--flux",
            "u1^2/2 + u2^2/2; u1*u2",
            "--uminus",
            "1,0.2",
            "--uplus",
            &up,
            "--s",
            &s,
            "--L",
            "1,0",
            "--G",
            "1,0",
            "--R",
            "60",
            "--k",
            "2",
            "--out",
            "sys",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let jumps = read(&dir.path().join("sys"), "system_jumps.csv");
    let mut rows = jumps.lines();
    let header: Vec<&str> = rows.next().unwrap().split(',').collect();
    let lax = header.iter().position(|h| *h == "lax").unwrap();
    let liu = header.iter().position(|h| *h == "liu").unwrap();
    let body: Vec<Vec<&str>> = rows.map(|r| r.split(',').collect()).collect();
    assert_eq!(body.len(), 1);
    assert_eq!(body[0][lax], "true");
    assert_eq!(body[0][liu], "true");
}
