//! Batch front-end. A run is a flat `key = value` configuration, read from a
//! file and overridden by `--key value` flags:
//!
//! ```text
//! radshock profile --flux "u^2/2" --uminus 1 --uplus -1 --eps 1 --out run1
//! radshock system --config coupled.cfg
//! ```
//!
//! Every artifact is written to a temporary file in the output directory and
//! renamed into place. Exit codes: 0 success, 2 config, 3 admissibility,
//! 4 numerical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use crate::error::{Error, Failure};
use crate::evolution::{snapshot_csv, Boundary, Evolver, FieldState, Grid1D, ScalarSolver, SystemSolver};
use crate::evolution::{verify_system_wave, verify_traveling_wave, VerifyOptions};
use crate::flux::{FluxModel, ScalarFlux};
use crate::profile::{assemble_profile_with, fmt_num, EpsilonForm, ProfileOptions, RadiativeProfile};
use crate::regularity::{
    critical_regularity, regularity_report, scaled_flux, scaled_orbit, CriticalRegularity, RegularityError,
};
use crate::shock::{shock_speed, ChordFunction};
use crate::system::{build_reduction, system_profile, ReductionMap, SystemModel, SystemProfile, SystemTriple};

pub const USAGE: &str = "usage: radshock <profile|regularity|system|evolve|verify> [--config FILE] [--key value ...]";

const KEYS: &[&str] = &[
    "mode",
    "flux",
    "uminus",
    "uplus",
    "size",
    "eps",
    "R",
    "L",
    "G",
    "k",
    "s",
    "cells",
    "domain",
    "t_end",
    "out",
    "order",
    "snapshots",
    "initial",
    "boundary",
    "rtol",
    "atol",
    "offset",
    "dense",
    "continuity_tol",
    "enforce_threshold",
    "sweep",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Profile,
    Regularity,
    System,
    Evolve,
    Verify,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Mode, Error> {
        Ok(match s {
            "profile" => Mode::Profile,
            "regularity" => Mode::Regularity,
            "system" => Mode::System,
            "evolve" => Mode::Evolve,
            "verify" => Mode::Verify,
            other => return Err(Error::Config(format!("unknown mode `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Initial {
    Riemann,
    Profile,
}

/// Raw keys before validation, in file order of precedence: later
/// assignments win.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub values: BTreeMap<String, String>,
}

impl RawConfig {
    /// `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<RawConfig, Error> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            values.insert(k.trim().to_string(), unquote(v.trim()).to_string());
        }
        Ok(RawConfig { values })
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    /// One configuration per `sweep` value; `sweep = key:v1|v2|...`. Each
    /// copy writes below `<out>/sweep_NNN`.
    pub fn expand_sweep(&self) -> Result<Vec<(String, RawConfig)>, Error> {
        let Some(spec) = self.get("sweep") else {
            return Ok(vec![]);
        };
        let (key, vals) = spec
            .split_once(':')
            .ok_or_else(|| Error::Config("sweep must be `key:v1|v2|...`".into()))?;
        let key = key.trim();
        if key == "sweep" || key == "out" || !KEYS.contains(&key) && !is_component_key(key) {
            return Err(Error::Config(format!("cannot sweep over `{key}`")));
        }
        let out = PathBuf::from(self.get("out").unwrap_or("."));
        let mut runs = Vec::new();
        for (i, v) in vals.split('|').enumerate() {
            let mut c = self.clone();
            c.values.remove("sweep");
            c.set(key, v.trim());
            c.set("out", &out.join(format!("sweep_{i:03}")).to_string_lossy());
            runs.push((v.trim().to_string(), c));
        }
        Ok(runs)
    }
}

fn unquote(v: &str) -> &str {
    let b = v.as_bytes();
    if b.len() >= 2 && (b[0] == b'"' && b[b.len() - 1] == b'"' || b[0] == b'\'' && b[b.len() - 1] == b'\'') {
        &v[1..v.len() - 1]
    } else {
        v
    }
}

fn is_component_key(k: &str) -> bool {
    k.strip_prefix('f')
        .is_some_and(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
}

/// Integrator and classification overrides.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub profile: ProfileOptions,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    /// One expression per component.
    pub flux: Vec<String>,
    pub u_minus: Vec<f64>,
    pub u_plus: Vec<f64>,
    pub eps: f64,
    pub r: Option<f64>,
    pub l: Option<Vec<f64>>,
    pub g: Option<Vec<f64>>,
    /// Characteristic family, 1-based.
    pub family: Option<usize>,
    pub speed: Option<f64>,
    pub cells: Option<usize>,
    pub domain: Option<(f64, f64)>,
    pub t_end: Option<f64>,
    pub out: PathBuf,
    pub order: usize,
    pub snapshots: usize,
    pub initial: Initial,
    pub periodic: bool,
    pub tolerances: Tolerances,
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<RunConfig, Error> {
        for k in raw.values.keys() {
            if !KEYS.contains(&k.as_str()) && !is_component_key(k) {
                return Err(Error::Config(format!("unknown key `{k}`")));
            }
        }
        let mode = Mode::parse(raw.get("mode").ok_or_else(|| Error::Config("missing mode".into()))?)?;
        let num = |k: &str| -> Result<Option<f64>, Error> {
            raw.get(k)
                .map(|v| {
                    v.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| Error::Config(format!("`{k}` must be a finite number, got `{v}`")))
                })
                .transpose()
        };
        let vec = |k: &str| -> Result<Option<Vec<f64>>, Error> {
            raw.get(k)
                .map(|v| {
                    v.split(',')
                        .map(|p| p.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
                        .collect::<Option<Vec<f64>>>()
                        .ok_or_else(|| {
                            Error::Config(format!("`{k}` must be finite numbers separated by commas, got `{v}`"))
                        })
                })
                .transpose()
        };
        let count = |k: &str| -> Result<Option<usize>, Error> {
            raw.get(k)
                .map(|v| {
                    v.parse::<usize>()
                        .map_err(|_| Error::Config(format!("`{k}` must be a nonnegative integer, got `{v}`")))
                })
                .transpose()
        };

        let mut comps: Vec<(usize, String)> = raw
            .values
            .iter()
            .filter(|(k, _)| is_component_key(k))
            .map(|(k, v)| (k[1..].parse().unwrap_or(0), v.clone()))
            .collect();
        comps.sort();
        let flux = if !comps.is_empty() {
            if raw.get("flux").is_some() {
                return Err(Error::Config("give either `flux` or `f1..fn`, not both".into()));
            }
            if comps.iter().enumerate().any(|(i, (j, _))| *j != i + 1) {
                return Err(Error::Config(
                    "flux components must be numbered f1..fn without gaps".into(),
                ));
            }
            comps.into_iter().map(|(_, v)| v).collect()
        } else {
            raw.get("flux")
                .ok_or_else(|| Error::Config("missing `flux`".into()))?
                .split(';')
                .map(|s| s.trim().to_string())
                .collect::<Vec<_>>()
        };
        let n = flux.len();

        let (u_minus, u_plus) = match (vec("uminus")?, vec("uplus")?, num("size")?) {
            (Some(a), Some(b), None) => (a, b),
            (None, None, Some(d)) if n == 1 && d > 0.0 => (vec![d / 2.0], vec![-d / 2.0]),
            (None, None, Some(d)) => {
                return Err(Error::Config(format!(
                    "`size` needs a scalar flux and a positive value, got {d}"
                )))
            }
            (_, _, Some(_)) => return Err(Error::Config("give either `size` or `uminus`/`uplus`".into())),
            _ => return Err(Error::Config("missing `uminus` or `uplus`".into())),
        };
        for (k, v) in [("uminus", &u_minus), ("uplus", &u_plus)] {
            if v.len() != n {
                return Err(Error::Config(format!("`{k}` has {} components, flux has {n}", v.len())));
            }
        }
        let eps = num("eps")?.unwrap_or(1.0);
        if eps <= 0.0 {
            return Err(Error::Config(format!("eps must be positive, got {eps}")));
        }
        let r = num("R")?;
        if let Some(r) = r {
            if r <= 0.0 {
                return Err(Error::Config(format!("R must be positive, got {r}")));
            }
        }
        let (l, g) = (vec("L")?, vec("G")?);
        for (k, v) in [("L", &l), ("G", &g)] {
            if let Some(v) = v {
                if v.len() != n {
                    return Err(Error::Config(format!("`{k}` has {} components, flux has {n}", v.len())));
                }
            }
        }
        let coupled = [r.is_some(), l.is_some(), g.is_some()];
        if coupled.iter().any(|b| *b) && !coupled.iter().all(|b| *b) {
            return Err(Error::Config("`R`, `L` and `G` go together".into()));
        }
        let family = count("k")?;
        if mode == Mode::System && n < 2 {
            return Err(Error::Config("system mode needs at least two flux components".into()));
        }
        if n > 1 {
            if r.is_none() {
                return Err(Error::Config("systems need `R`, `L` and `G`".into()));
            }
            if family.is_none() {
                return Err(Error::Config("systems need the family `k`".into()));
            }
            if mode == Mode::Regularity {
                return Err(Error::Config("regularity mode needs a scalar flux".into()));
            }
        }
        let domain = match vec("domain")? {
            None => None,
            Some(d) if d.len() == 2 && d[0] < d[1] => Some((d[0], d[1])),
            Some(_) => return Err(Error::Config("`domain` must be `a,b` with a < b".into())),
        };
        let t_end = num("t_end")?;
        if t_end.is_some_and(|t| t <= 0.0) {
            return Err(Error::Config("t_end must be positive".into()));
        }
        let cells = count("cells")?;
        if cells.is_some_and(|m| m < 8) {
            return Err(Error::Config("cells must be at least 8".into()));
        }
        let initial = match raw.get("initial").unwrap_or("riemann") {
            "riemann" => Initial::Riemann,
            "profile" => Initial::Profile,
            other => {
                return Err(Error::Config(format!(
                    "initial must be riemann or profile, got `{other}`"
                )))
            }
        };
        if initial == Initial::Profile && n > 1 {
            return Err(Error::Config("initial = profile is available for scalar fluxes".into()));
        }
        let periodic = match raw.get("boundary").unwrap_or("outflow") {
            "outflow" => false,
            "periodic" => true,
            other => {
                return Err(Error::Config(format!(
                    "boundary must be outflow or periodic, got `{other}`"
                )))
            }
        };

        let mut profile = ProfileOptions::default();
        if let Some(v) = num("rtol")? {
            profile.arc.rtol = positive("rtol", v)?;
        }
        if let Some(v) = num("atol")? {
            profile.arc.atol = positive("atol", v)?;
        }
        if let Some(v) = num("offset")? {
            profile.arc.offset = positive("offset", v)?;
        }
        if let Some(v) = count("dense")? {
            profile.dense = v;
        }
        if let Some(v) = num("continuity_tol")? {
            profile.continuity_tol = positive("continuity_tol", v)?;
        }
        if let Some(v) = raw.get("enforce_threshold") {
            profile.enforce_threshold = match v {
                "true" => true,
                "false" => false,
                _ => {
                    return Err(Error::Config(format!(
                        "enforce_threshold must be true or false, got `{v}`"
                    )))
                }
            };
        }

        Ok(RunConfig {
            mode,
            flux,
            u_minus,
            u_plus,
            eps,
            r,
            l,
            g,
            family,
            speed: num("s")?,
            cells,
            domain,
            t_end,
            out: PathBuf::from(raw.get("out").unwrap_or(".")),
            order: count("order")?.unwrap_or(3),
            snapshots: count("snapshots")?.unwrap_or(4).max(1),
            initial,
            periodic,
            tolerances: Tolerances { profile },
        })
    }

    fn is_system(&self) -> bool {
        self.flux.len() > 1
    }
}

fn positive(k: &str, v: f64) -> Result<f64, Error> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Config(format!("`{k}` must be positive, got {v}")))
    }
}

/// Parses `args` (without the program name) into a raw configuration.
pub fn parse_args<I, S>(args: I) -> Result<RawConfig, Error>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let args: Vec<String> = args.into_iter().map(|a| a.as_ref().to_string()).collect();
    let mut it = args.iter().peekable();
    let mut mode = None;
    if let Some(first) = it.peek() {
        if !first.starts_with("--") {
            mode = Some(first.to_string());
            it.next();
        }
    }
    let mut flags = Vec::new();
    let mut config = None;
    while let Some(a) = it.next() {
        let key = a
            .strip_prefix("--")
            .ok_or_else(|| Error::Config(format!("unexpected argument `{a}`")))?;
        let (key, value) = match key.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| Error::Config(format!("flag --{key} needs a value")))?;
                (key.to_string(), v.clone())
            }
        };
        if key == "config" {
            config = Some(value);
        } else {
            flags.push((key, value));
        }
    }
    let mut raw = match config {
        Some(path) => {
            let text = std::fs::read_to_string(&path).map_err(|e| Error::Config(format!("reading {path}: {e}")))?;
            RawConfig::parse(&text)?
        }
        None => RawConfig::default(),
    };
    for (k, v) in flags {
        raw.set(&k, &v);
    }
    if let Some(m) = mode {
        raw.set("mode", &m);
    }
    Ok(raw)
}

/// Entry point for the binary: runs and reports, returning the exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let raw = match parse_args(args) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}\n{USAGE}");
            return e.exit_code();
        }
    };
    match run_raw(&raw) {
        Ok(summary) => {
            print!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs one configuration, or all members of its sweep in parallel.
/// Returns a short human-readable summary.
pub fn run_raw(raw: &RawConfig) -> Result<String, Error> {
    let runs = raw.expand_sweep()?;
    if runs.is_empty() {
        return run(&RunConfig::from_raw(raw)?);
    }
    let configs = runs
        .iter()
        .map(|(_, r)| RunConfig::from_raw(r))
        .collect::<Result<Vec<_>, _>>()?;
    let results = run_parallel(&configs);
    let mut index = String::from("index,value,status,message\n");
    let mut worst: Option<Error> = None;
    for (i, ((value, _), res)) in runs.iter().zip(results).enumerate() {
        let (status, message) = match res {
            Ok(_) => (0, String::new()),
            Err(e) => {
                let line = (e.exit_code(), e.to_string().replace([',', '\n'], ";"));
                if worst.as_ref().is_none_or(|w| w.exit_code() < e.exit_code()) {
                    worst = Some(e);
                }
                line
            }
        };
        let _ = writeln!(index, "{i},{value},{status},{message}");
    }
    let out = PathBuf::from(raw.get("out").unwrap_or("."));
    write_artifact(&out, "sweep.csv", &index)?;
    match worst {
        Some(e) => Err(e),
        None => Ok(format!(
            "sweep: {} runs written below {}\n",
            configs.len(),
            out.display()
        )),
    }
}

/// Each configuration runs in its own worker; nothing is shared but the
/// queue position.
pub fn run_parallel(configs: &[RunConfig]) -> Vec<Result<String, Error>> {
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(configs.len())
        .max(1);
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<String, Error>>>> = configs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= configs.len() {
                    break;
                }
                let r = run(&configs[i]);
                *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| {
            m.into_inner()
                .unwrap_or_else(|e| e.into_inner())
                .unwrap_or_else(|| Err(Error::Config("worker did not run".into())))
        })
        .collect()
}

pub fn run(cfg: &RunConfig) -> Result<String, Error> {
    match (cfg.mode, cfg.is_system()) {
        (Mode::Profile, false) => run_profile(cfg),
        (Mode::Profile, true) | (Mode::System, _) => run_system(cfg),
        (Mode::Regularity, _) => run_regularity(cfg),
        (Mode::Evolve, false) => run_evolve_scalar(cfg),
        (Mode::Evolve, true) => run_evolve_system(cfg),
        (Mode::Verify, false) => run_verify_scalar(cfg),
        (Mode::Verify, true) => run_verify_system(cfg),
    }
}

/// Writes `name` inside `dir` through a temporary file and a rename.
pub fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Error> {
    let path = dir.join(name);
    let io = |source| Error::Io {
        path: path.clone(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(&path).map_err(|e| io(e.error))?;
    Ok(path)
}

/// Scalar problem in the unit-coefficient form, after the optional
/// `(L, G, R)` rescaling.
struct ScalarSetup {
    flux: FluxModel,
    eps: f64,
    form: Option<EpsilonForm>,
}

fn scalar_setup(cfg: &RunConfig) -> Result<ScalarSetup, Error> {
    let flux = FluxModel::from_spec(&cfg.flux[0]).map_err(|e| Error::op("flux", "parse")(e.into()))?;
    match (cfg.r, &cfg.l, &cfg.g) {
        (Some(r), Some(l), Some(g)) => {
            let form = EpsilonForm::new(l[0], g[0], r, cfg.eps)
                .ok_or_else(|| Error::Config("scalar rescaling needs L G > 0, R > 0".into()))?;
            Ok(ScalarSetup {
                flux: flux.scaled(form.kappa),
                eps: form.epsilon,
                form: Some(form),
            })
        }
        _ => Ok(ScalarSetup {
            flux,
            eps: cfg.eps,
            form: None,
        }),
    }
}

fn scalar_chord(setup: &ScalarSetup, cfg: &RunConfig) -> Result<ChordFunction, Error> {
    let triple = shock_speed(&setup.flux, cfg.u_minus[0], cfg.u_plus[0])
        .map_err(|e| Error::op("shock", "shock_speed")(e.into()))?;
    ChordFunction::new(&setup.flux, triple).map_err(|e| Error::op("shock", "chord_function")(e.into()))
}

fn scalar_profile(setup: &ScalarSetup, cfg: &RunConfig) -> Result<RadiativeProfile, Error> {
    let chord = scalar_chord(setup, cfg)?;
    let p = assemble_profile_with(&chord, setup.eps, &cfg.tolerances.profile)
        .map_err(|e| Error::op("profile", "assemble_profile")(e.into()))?;
    check_jumps(&p)?;
    Ok(p)
}

/// Every recorded jump must satisfy the chord relation and Oleinik.
fn check_jumps(p: &RadiativeProfile) -> Result<(), Error> {
    for j in p.jumps() {
        if !(j.rh_residual < 1e-8) {
            return Err(Error::Check {
                check: "jump rh_residual < 1e-8",
                detail: format!("jump at xi = {} has residual {:e}", j.xi0, j.rh_residual),
                failure: Failure::Numerical,
            });
        }
        if !(j.oleinik_margin > 0.0) {
            return Err(Error::Check {
                check: "jump oleinik_margin > 0",
                detail: format!("jump at xi = {} has margin {:e}", j.xi0, j.oleinik_margin),
                failure: Failure::Admissibility,
            });
        }
    }
    Ok(())
}

fn form_text(s: &mut String, setup: &ScalarSetup) {
    if let Some(f) = setup.form {
        let _ = writeln!(s, "kappa = {}", fmt_num(f.kappa));
        let _ = writeln!(s, "epsilon = {}", fmt_num(f.epsilon));
        let _ = writeln!(s, "time_scale = {}", fmt_num(f.time_scale));
    }
}

fn profile_summary(p: &RadiativeProfile) -> String {
    let t = p.chord().triple();
    let mut s = String::new();
    let _ = writeln!(s, "u_minus = {}", fmt_num(t.u_minus));
    let _ = writeln!(s, "u_plus = {}", fmt_num(t.u_plus));
    let _ = writeln!(s, "speed = {}", fmt_num(t.s));
    let _ = writeln!(s, "eps = {}", fmt_num(p.epsilon()));
    let _ = writeln!(s, "jumps = {}", p.jumps().len());
    let _ = writeln!(s, "max_jump = {}", fmt_num(p.max_jump()));
    let _ = writeln!(s, "decay_length = {}", fmt_num(p.decay_length()));
    let _ = writeln!(s, "points = {}", p.grid().len());
    s
}

fn run_profile(cfg: &RunConfig) -> Result<String, Error> {
    let setup = scalar_setup(cfg)?;
    let p = scalar_profile(&setup, cfg)?;
    let mut summary = profile_summary(&p);
    form_text(&mut summary, &setup);
    write_artifact(&cfg.out, "profile.csv", &p.to_csv())?;
    write_artifact(&cfg.out, "jumps.csv", &p.jumps_csv())?;
    write_artifact(&cfg.out, "profile.txt", &summary)?;
    Ok(summary)
}

fn run_regularity(cfg: &RunConfig) -> Result<String, Error> {
    let setup = scalar_setup(cfg)?;
    let chord = scalar_chord(&setup, cfg)?;
    let op = Error::op("regularity", "regularity_report");
    let mut text = String::new();
    match regularity_report(&chord, setup.eps, cfg.order) {
        Ok(report) => {
            text = report.to_text();
            if report.vbar2.is_some() {
                let sf =
                    scaled_flux(&chord, setup.eps).map_err(|e| Error::op("regularity", "scaled_flux")(e.into()))?;
                let mut csv = String::from("side,u,v\n");
                for (side, right) in [("left", false), ("right", true)] {
                    let orbit =
                        scaled_orbit(&sf, right, 3).map_err(|e| Error::op("regularity", "scaled_orbit")(e.into()))?;
                    for (u, v) in orbit {
                        let _ = writeln!(csv, "{side},{},{}", fmt_num(u), fmt_num(v));
                    }
                }
                write_artifact(&cfg.out, "orbit.csv", &csv)?;
            }
        }
        Err(RegularityError::NotConvex(_)) => {
            let list = critical_regularity(&chord, setup.eps, cfg.order);
            let _ = writeln!(text, "shock_size = {}", fmt_num(chord.size()));
            let _ = writeln!(text, "radiation = {}", fmt_num(setup.eps));
            let _ = writeln!(text, "critical_points = {}", list.len());
            for (i, c) in list.iter().enumerate() {
                match c {
                    CriticalRegularity::RegularCrossing {
                        point,
                        unstable,
                        stable,
                    } => {
                        let _ = writeln!(
                            text,
                            "critical_{i} = crossing {} {} {}",
                            fmt_num(*point),
                            fmt_num(*unstable),
                            fmt_num(*stable)
                        );
                    }
                    CriticalRegularity::Sink {
                        point,
                        discriminant,
                        class,
                    } => {
                        let _ = writeln!(
                            text,
                            "critical_{i} = sink {} {} {class}",
                            fmt_num(*point),
                            fmt_num(*discriminant)
                        );
                    }
                }
            }
        }
        Err(e) => return Err(op(e.into())),
    }
    form_text(&mut text, &setup);
    write_artifact(&cfg.out, "regularity.txt", &text)?;
    Ok(text)
}

fn system_map(cfg: &RunConfig) -> Result<(SystemModel, ReductionMap), Error> {
    let flux = FluxModel::parse_components(&cfg.flux).map_err(|e| Error::op("flux", "parse")(e.into()))?;
    let (Some(r), Some(l), Some(g), Some(k)) = (cfg.r, &cfg.l, &cfg.g, cfg.family) else {
        return Err(Error::Config("systems need `R`, `L`, `G` and `k`".into()));
    };
    let sys = SystemModel::new(flux, l, g, r).map_err(|e| Error::op("system", "system_model")(e.into()))?;
    let triple = match cfg.speed {
        Some(s) => SystemTriple::new(&sys, &cfg.u_minus, &cfg.u_plus, s),
        None => SystemTriple::with_speed(&sys, &cfg.u_minus, &cfg.u_plus),
    }
    .map_err(|e| Error::op("system", "system_triple")(e.into()))?;
    let map = build_reduction(&sys, &triple, k).map_err(|e| Error::op("system", "build_reduction")(e.into()))?;
    Ok((sys, map))
}

fn lifted_profile(cfg: &RunConfig, map: &ReductionMap) -> Result<SystemProfile, Error> {
    let sp = system_profile(map, cfg.eps, &cfg.tolerances.profile)
        .map_err(|e| Error::op("system", "system_profile")(e.into()))?;
    check_jumps(&sp.scalar)?;
    for (xi, j) in &sp.jumps {
        if !j.no_jump && !j.lax {
            return Err(Error::Check {
                check: "Lax inequalities at lifted jumps",
                detail: format!(
                    "jump at xi = {xi}: lambda_left = {}, lambda_right = {}",
                    j.lambda_left, j.lambda_right
                ),
                failure: Failure::Admissibility,
            });
        }
    }
    Ok(sp)
}

fn run_system(cfg: &RunConfig) -> Result<String, Error> {
    let (sys, map) = system_map(cfg)?;
    let sp = lifted_profile(cfg, &map)?;
    let n = sys.dimension();
    let t = map.triple();
    let samples = map
        .sign_samples(50)
        .map_err(|e| Error::op("system", "sign_samples")(e.into()))?;
    let consistent = samples.iter().filter(|s| s.consistent()).count();

    let mut jumps = String::from("xi0,rh_residual,lambda_left,lambda_right,lax,liu");
    for side in ["left", "right"] {
        for c in 1..=n {
            let _ = write!(jumps, ",u{c}_{side}");
        }
    }
    jumps.push('\n');
    for (xi, j) in &sp.jumps {
        let liu = j
            .liu
            .as_ref()
            .map_or("none", |l| if l.satisfied { "true" } else { "false" });
        let _ = write!(
            jumps,
            "{},{},{},{},{},{liu}",
            fmt_num(*xi),
            fmt_num(j.rh_residual),
            fmt_num(j.lambda_left),
            fmt_num(j.lambda_right),
            j.lax
        );
        for v in j.u_left.iter().chain(&j.u_right) {
            let _ = write!(jumps, ",{}", fmt_num(*v));
        }
        jumps.push('\n');
    }

    let mut s = String::new();
    let _ = writeln!(s, "dimension = {n}");
    let _ = writeln!(s, "family = {}", map.family());
    let _ = writeln!(s, "speed = {}", fmt_num(t.s));
    let _ = writeln!(s, "w_minus = {}", fmt_num(map.w_minus()));
    let _ = writeln!(s, "w_plus = {}", fmt_num(map.w_plus()));
    let (lo, hi) = map.validated_range();
    let _ = writeln!(s, "validated_range = {} {}", fmt_num(lo), fmt_num(hi));
    let _ = writeln!(s, "jumps = {}", sp.jumps.iter().filter(|(_, j)| !j.no_jump).count());
    let _ = writeln!(s, "residual_flux = {}", fmt_num(sp.residuals.0));
    let _ = writeln!(s, "residual_elliptic = {}", fmt_num(sp.residuals.1));
    let _ = writeln!(s, "sign_samples = {}", samples.len());
    let _ = writeln!(s, "sign_consistent = {consistent}");
    write_artifact(&cfg.out, "system_profile.csv", &sp.to_csv())?;
    write_artifact(&cfg.out, "jumps.csv", &sp.scalar.jumps_csv())?;
    write_artifact(&cfg.out, "system_jumps.csv", &jumps)?;
    write_artifact(&cfg.out, "system.txt", &s)?;
    Ok(s)
}

/// Snapshot times: `snapshots` equal intervals of `[0, t_end]`.
fn snapshot_times(cfg: &RunConfig, t_end: f64) -> Vec<f64> {
    (1..=cfg.snapshots)
        .map(|i| t_end * i as f64 / cfg.snapshots as f64)
        .collect()
}

fn evolution_grid(cfg: &RunConfig, far: (Vec<f64>, Vec<f64>), default_domain: (f64, f64)) -> Result<Grid1D, Error> {
    let (a, b) = cfg.domain.unwrap_or(default_domain);
    let boundary = if cfg.periodic {
        Boundary::Periodic
    } else {
        Boundary::Outflow {
            left: far.0,
            right: far.1,
        }
    };
    Grid1D::new(a, b, cfg.cells.unwrap_or(2048), boundary).map_err(|e| Error::op("evolution", "grid")(e.into()))
}

fn run_evolve_scalar(cfg: &RunConfig) -> Result<String, Error> {
    let setup = scalar_setup(cfg)?;
    let (um, up) = (cfg.u_minus[0], cfg.u_plus[0]);
    let grid = evolution_grid(cfg, (vec![um], vec![up]), (-20.0, 20.0))?;
    let u0: Vec<f64> = match cfg.initial {
        Initial::Riemann => grid.centers().iter().map(|&x| if x < 0.0 { um } else { up }).collect(),
        Initial::Profile => {
            let p = scalar_profile(&setup, cfg)?;
            grid.centers().iter().map(|&x| p.eval(x).u).collect()
        }
    };
    let flux: Arc<dyn ScalarFlux> = Arc::new(setup.flux.clone());
    let solver = ScalarSolver::new(grid.clone(), flux, setup.eps)
        .map_err(|e| Error::op("evolution", "scalar_solver")(e.into()))?;
    let mut state = FieldState::scalar(u0);
    let mass0 = state.mass(grid.dx)[0];
    let mut csv = snapshot_csv(&solver, &state, true);
    let mut steps = 0;
    for t in snapshot_times(cfg, cfg.t_end.unwrap_or(10.0)) {
        steps += solver
            .run(&mut state, t, |_| {})
            .map_err(|e| Error::op("evolution", "run")(e.into()))?;
        csv.push_str(&snapshot_csv(&solver, &state, false));
    }
    let mut s = String::new();
    let _ = writeln!(s, "t_end = {}", fmt_num(state.t));
    let _ = writeln!(s, "cells = {}", grid.m);
    let _ = writeln!(s, "dx = {}", fmt_num(grid.dx));
    let _ = writeln!(s, "steps = {steps}");
    let _ = writeln!(s, "mass_initial = {}", fmt_num(mass0));
    let _ = writeln!(s, "mass_final = {}", fmt_num(state.mass(grid.dx)[0]));
    form_text(&mut s, &setup);
    write_artifact(&cfg.out, "evolution.csv", &csv)?;
    write_artifact(&cfg.out, "evolution.txt", &s)?;
    Ok(s)
}

fn system_snapshot(solver: &SystemSolver, state: &FieldState, header: bool) -> String {
    let n = state.n;
    let mut s = String::new();
    if header {
        s.push_str("t,xi");
        for c in 1..=n {
            let _ = write!(s, ",u{c}");
        }
        s.push_str(",q\n");
    }
    let q = solver.q(state);
    for (i, x) in solver.grid().centers().into_iter().enumerate() {
        let _ = write!(s, "{},{}", fmt_num(state.t), fmt_num(x));
        for c in 0..n {
            let _ = write!(s, ",{}", fmt_num(state.u[i * n + c]));
        }
        let _ = writeln!(s, ",{}", fmt_num(q[i]));
    }
    s
}

fn run_evolve_system(cfg: &RunConfig) -> Result<String, Error> {
    let flux = FluxModel::parse_components(&cfg.flux).map_err(|e| Error::op("flux", "parse")(e.into()))?;
    let (Some(r), Some(l), Some(g)) = (cfg.r, &cfg.l, &cfg.g) else {
        return Err(Error::Config("systems need `R`, `L` and `G`".into()));
    };
    let sys = SystemModel::new(flux, l, g, r).map_err(|e| Error::op("system", "system_model")(e.into()))?;
    let n = sys.dimension();
    let grid = evolution_grid(cfg, (cfg.u_minus.clone(), cfg.u_plus.clone()), (-20.0, 20.0))?;
    let mut u0 = Vec::with_capacity(grid.m * n);
    for x in grid.centers() {
        u0.extend_from_slice(if x < 0.0 { &cfg.u_minus } else { &cfg.u_plus });
    }
    let solver =
        SystemSolver::new(grid.clone(), sys, cfg.eps).map_err(|e| Error::op("evolution", "system_solver")(e.into()))?;
    let mut state = FieldState { n, u: u0, t: 0.0 };
    let mass0 = state.mass(grid.dx);
    let mut csv = system_snapshot(&solver, &state, true);
    let mut steps = 0;
    for t in snapshot_times(cfg, cfg.t_end.unwrap_or(10.0)) {
        steps += solver
            .run(&mut state, t, |_| {})
            .map_err(|e| Error::op("evolution", "run")(e.into()))?;
        csv.push_str(&system_snapshot(&solver, &state, false));
    }
    let list = |v: &[f64]| v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(" ");
    let mut s = String::new();
    let _ = writeln!(s, "t_end = {}", fmt_num(state.t));
    let _ = writeln!(s, "cells = {}", grid.m);
    let _ = writeln!(s, "dx = {}", fmt_num(grid.dx));
    let _ = writeln!(s, "steps = {steps}");
    let _ = writeln!(s, "mass_initial = {}", list(&mass0));
    let _ = writeln!(s, "mass_final = {}", list(&state.mass(grid.dx)));
    write_artifact(&cfg.out, "evolution.csv", &csv)?;
    write_artifact(&cfg.out, "evolution.txt", &s)?;
    Ok(s)
}

fn verify_options(cfg: &RunConfig) -> VerifyOptions {
    let d = VerifyOptions::default();
    VerifyOptions {
        domain: cfg.domain,
        cells: cfg.cells.unwrap_or(d.cells),
        t_end: cfg.t_end.unwrap_or(d.t_end),
        enforce_domain: d.enforce_domain,
    }
}

fn run_verify_scalar(cfg: &RunConfig) -> Result<String, Error> {
    let setup = scalar_setup(cfg)?;
    let p = scalar_profile(&setup, cfg)?;
    let report = verify_traveling_wave(&p, &verify_options(cfg))
        .map_err(|e| Error::op("evolution", "verify_traveling_wave")(e.into()))?;
    let mut text = report.to_text();
    form_text(&mut text, &setup);
    write_artifact(&cfg.out, "profile.csv", &p.to_csv())?;
    write_artifact(&cfg.out, "verify.txt", &text)?;
    Ok(text)
}

fn run_verify_system(cfg: &RunConfig) -> Result<String, Error> {
    let (_, map) = system_map(cfg)?;
    let sp = lifted_profile(cfg, &map)?;
    let report = verify_system_wave(&sp, &map, cfg.eps, &verify_options(cfg))
        .map_err(|e| Error::op("evolution", "verify_system_wave")(e.into()))?;
    let text = report.to_text();
    write_artifact(&cfg.out, "system_profile.csv", &sp.to_csv())?;
    write_artifact(&cfg.out, "verify.txt", &text)?;
    Ok(text)
}
