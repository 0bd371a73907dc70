//! Steadiness of computed profiles under the time-dependent model, and the
//! qualitative properties of the scalar semigroup.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::flux::{Reflected, ScalarFlux};
use crate::profile::{fmt_num, RadiativeProfile};
use crate::system::{ReductionMap, SystemProfile};

use super::{Boundary, EvolutionError, Evolver, FieldState, Grid1D, ScalarSolver, SystemSolver};

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    /// Domain; centered on the profile at 20 decay lengths (at least 80
    /// units) when absent.
    pub domain: Option<(f64, f64)>,
    pub cells: usize,
    pub t_end: f64,
    /// Reject domains shorter than 20 decay lengths.
    pub enforce_domain: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            domain: None,
            cells: 4096,
            t_end: 10.0,
            enforce_domain: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    pub t_end: f64,
    pub dx: f64,
    pub cells: usize,
    pub steps: usize,
    /// Shock speed of the profile.
    pub speed: f64,
    /// Speed of the tracked mid-level front, fitted over `[T/2, T]`.
    pub speed_hat: f64,
    /// `min_h |u(T) - U(. - sT - h)|_1`.
    pub error_l1: f64,
    pub best_shift: f64,
    /// Fitted speeds of the profile's interior jumps, by initial position.
    pub jump_speeds: Vec<(f64, f64)>,
}

impl DriftReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "t_end = {}", fmt_num(self.t_end));
        let _ = writeln!(s, "dx = {}", fmt_num(self.dx));
        let _ = writeln!(s, "cells = {}", self.cells);
        let _ = writeln!(s, "steps = {}", self.steps);
        let _ = writeln!(s, "speed = {}", fmt_num(self.speed));
        let _ = writeln!(s, "speed_hat = {}", fmt_num(self.speed_hat));
        let _ = writeln!(s, "error_l1 = {}", fmt_num(self.error_l1));
        let _ = writeln!(s, "best_shift = {}", fmt_num(self.best_shift));
        let js: Vec<String> = self
            .jump_speeds
            .iter()
            .map(|(x, v)| format!("{}:{}", fmt_num(*x), fmt_num(*v)))
            .collect();
        let _ = writeln!(s, "jump_speeds = {}", js.join(" "));
        s
    }
}

/// Least-squares slope of `(t, x)` samples with `t >= t_min`.
fn fit_speed(samples: &[(f64, f64)], t_min: f64) -> f64 {
    let pts: Vec<_> = samples.iter().filter(|p| p.0 >= t_min).collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let (mt, mx) = (
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let num: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mx)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    num / den
}

/// Crossing of `level` by the piecewise-linear interpolant of `u` nearest
/// to `guess`.
fn crossing(grid: &Grid1D, u: &[f64], level: f64, guess: Option<f64>) -> Option<f64> {
    let mut best: Option<f64> = None;
    for i in 0..u.len() - 1 {
        let (a, b) = (u[i] - level, u[i + 1] - level);
        if a == 0.0 || a * b < 0.0 {
            let x = grid.center(i) + grid.dx * a / (a - b);
            match guess {
                None => return Some(x),
                Some(g) => {
                    if best.is_none_or(|y| (x - g).abs() < (y - g).abs()) {
                        best = Some(x);
                    }
                }
            }
        }
    }
    best
}

/// Golden-section minimization after a coarse scan.
fn minimize(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let n = 80;
    let (mut bx, mut bv) = (lo, f64::INFINITY);
    for i in 0..=n {
        let x = lo + (hi - lo) * i as f64 / n as f64;
        let v = f(x);
        if v < bv {
            bx = x;
            bv = v;
        }
    }
    let h = (hi - lo) / n as f64;
    let (mut a, mut b) = (bx - h, bx + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let v = f(x);
    if v < bv {
        (x, v)
    } else {
        (bx, bv)
    }
}

fn domain_for(decay: f64, opts: &VerifyOptions) -> Result<(f64, f64), EvolutionError> {
    let needed = 20.0 * decay;
    let (a, b) = opts.domain.unwrap_or_else(|| {
        let half = (0.5 * needed).max(40.0);
        (-half, half)
    });
    if opts.enforce_domain && b - a < needed {
        return Err(EvolutionError::DomainTooSmall { length: b - a, needed });
    }
    Ok((a, b))
}

/// Evolves a scalar profile and measures how far it drifts from a
/// translate of itself.
pub fn verify_traveling_wave(profile: &RadiativeProfile, opts: &VerifyOptions) -> Result<DriftReport, EvolutionError> {
    let chord = profile.chord();
    let work = chord.flux().clone();
    let flux: Arc<dyn ScalarFlux> = if chord.reflected() {
        Arc::new(Reflected(work))
    } else {
        work
    };
    let triple = chord.triple();
    let (a, b) = domain_for(profile.decay_length(), opts)?;
    let grid = Grid1D::new(
        a,
        b,
        opts.cells,
        Boundary::Outflow {
            left: vec![triple.u_minus],
            right: vec![triple.u_plus],
        },
    )?;
    let solver = ScalarSolver::new(grid.clone(), flux, profile.epsilon())?;
    let u0: Vec<f64> = grid.centers().iter().map(|&x| profile.eval(x).u).collect();
    let jumps: Vec<(f64, f64)> = profile
        .jumps()
        .iter()
        .map(|j| (j.xi0, 0.5 * (j.u_left + j.u_right)))
        .collect();
    let s = triple.s;
    let exact = |x: f64, h: f64| profile.eval(x - s * opts.t_end - h).u;
    drift(
        &solver,
        FieldState::scalar(u0),
        opts,
        s,
        0.5 * (triple.u_minus + triple.u_plus),
        &jumps,
        |u| u.to_vec(),
        |x, h| vec![exact(x, h)],
    )
}

/// Same for a lifted system profile; the front is tracked on `w = G.u`.
pub fn verify_system_wave(
    profile: &SystemProfile,
    map: &ReductionMap,
    eps: f64,
    opts: &VerifyOptions,
) -> Result<DriftReport, EvolutionError> {
    let sys = map.system().clone();
    let n = sys.dimension();
    let t = map.triple();
    let (a, b) = domain_for(profile.scalar.decay_length(), opts)?;
    let grid = Grid1D::new(
        a,
        b,
        opts.cells,
        Boundary::Outflow {
            left: t.u_minus.clone(),
            right: t.u_plus.clone(),
        },
    )?;
    let g = sys.g().clone();
    let solver = SystemSolver::new(grid.clone(), sys, eps)?;
    let state_at = |x: f64| -> Vec<f64> {
        let w = profile.scalar.eval(x).u;
        map.phi(w)
            .map(|u| u.iter().copied().collect())
            .unwrap_or_else(|_| vec![f64::NAN; n])
    };
    let mut u0 = Vec::with_capacity(opts.cells * n);
    for x in grid.centers() {
        u0.extend(state_at(x));
    }
    let jumps: Vec<(f64, f64)> = profile
        .scalar
        .jumps()
        .iter()
        .map(|j| (j.xi0, 0.5 * (j.u_left + j.u_right)))
        .collect();
    let s = t.s;
    let project = |u: &[f64]| -> Vec<f64> {
        u.chunks(n)
            .map(|c| c.iter().zip(g.iter()).map(|(a, b)| a * b).sum())
            .collect()
    };
    let (wm, wp) = (map.w_minus(), map.w_plus());
    drift(
        &solver,
        FieldState { n, u: u0, t: 0.0 },
        opts,
        s,
        0.5 * (wm + wp),
        &jumps,
        project,
        |x, h| state_at(x - s * opts.t_end - h),
    )
}

#[allow(clippy::too_many_arguments)]
fn drift<E: Evolver>(
    solver: &E,
    mut state: FieldState,
    opts: &VerifyOptions,
    s: f64,
    level: f64,
    jumps: &[(f64, f64)],
    track: impl Fn(&[f64]) -> Vec<f64>,
    exact: impl Fn(f64, f64) -> Vec<f64>,
) -> Result<DriftReport, EvolutionError> {
    let grid = solver.grid().clone();
    let t_end = opts.t_end;
    let margin = 0.05 * (grid.b - grid.a);
    let mut front = vec![];
    let mut jump_tracks: Vec<Vec<(f64, f64)>> = vec![vec![]; jumps.len()];
    let mut last = jumps.iter().map(|j| j.0).collect::<Vec<_>>();
    let mut observe_err = None;
    let mut sample = |st: &FieldState| {
        if observe_err.is_some() {
            return;
        }
        let w = track(&st.u);
        if let Some(x) = crossing(&grid, &w, level, None) {
            if x < grid.a + margin || x > grid.b - margin {
                observe_err = Some(EvolutionError::WaveExited {
                    front: x,
                    a: grid.a,
                    b: grid.b,
                });
            }
            front.push((st.t, x));
        }
        for (k, j) in jumps.iter().enumerate() {
            if let Some(x) = crossing(&grid, &w, j.1, Some(last[k])) {
                last[k] = x;
                jump_tracks[k].push((st.t, x));
            }
        }
    };
    sample(&state);
    let steps = solver.run(&mut state, t_end, &mut sample)?;
    if let Some(e) = observe_err {
        return Err(e);
    }
    let n = state.n;
    let centers = grid.centers();
    let l1 = |h: f64| -> f64 {
        centers
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let ex = exact(x, h);
                (0..n).map(|c| (state.u[i * n + c] - ex[c]).abs()).sum::<f64>()
            })
            .sum::<f64>()
            * grid.dx
    };
    let span = 2.0f64.max(40.0 * grid.dx);
    let (best_shift, error_l1) = minimize(l1, -span, span);
    Ok(DriftReport {
        t_end,
        dx: grid.dx,
        cells: grid.m,
        steps,
        speed: s,
        speed_hat: fit_speed(&front, 0.5 * t_end),
        error_l1,
        best_shift,
        jump_speeds: jumps
            .iter()
            .zip(&jump_tracks)
            .map(|(j, tr)| (j.0, fit_speed(tr, 0.5 * t_end)))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport {
    /// `(t, |u - v|_1)` after every step.
    pub distances: Vec<(f64, f64)>,
    /// Largest one-step increase of the distance.
    pub max_increase: f64,
    pub contraction: bool,
    /// Present when `u0 <= v0`.
    pub ordered: Option<bool>,
    /// Present when `u0` is monotone.
    pub monotone: Option<bool>,
    /// Drift of `sum u dx`; periodic grids only.
    pub mass_drift: Option<f64>,
}

fn monotone_sign(u: &[f64]) -> Option<f64> {
    if u.windows(2).all(|w| w[1] <= w[0]) {
        Some(-1.0)
    } else if u.windows(2).all(|w| w[1] >= w[0]) {
        Some(1.0)
    } else {
        None
    }
}

/// L1 contraction, comparison and monotonicity over `[0, t_end]` for two
/// scalar solutions advanced with a common time step.
pub fn property_suite(
    solver: &ScalarSolver,
    u0: Vec<f64>,
    v0: Vec<f64>,
    t_end: f64,
) -> Result<PropertyReport, EvolutionError> {
    let dx = solver.grid().dx;
    let mut u = FieldState::scalar(u0);
    let mut v = FieldState::scalar(v0);
    let ordered0 = u.u.iter().zip(&v.u).all(|(a, b)| a <= b);
    let mono = monotone_sign(&u.u);
    let mass0 = u.mass(dx)[0];
    let dist =
        |u: &FieldState, v: &FieldState| -> f64 { u.u.iter().zip(&v.u).map(|(a, b)| (a - b).abs()).sum::<f64>() * dx };
    let mut distances = vec![(0.0, dist(&u, &v))];
    let mut max_increase = f64::NEG_INFINITY;
    let mut ordered = ordered0;
    let mut monotone = mono.is_some();
    let scale = u.u.iter().chain(&v.u).fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    while u.t < t_end {
        let dt = solver.max_dt(&u).min(solver.max_dt(&v)).min(t_end - u.t);
        solver.step(&mut u, dt)?;
        solver.step(&mut v, dt)?;
        let d = dist(&u, &v);
        max_increase = max_increase.max(d - distances[distances.len() - 1].1);
        distances.push((u.t, d));
        if ordered0 {
            ordered &= u.u.iter().zip(&v.u).all(|(a, b)| *a <= *b + 1e-12 * scale);
        }
        if let Some(sg) = mono {
            monotone &= u.u.windows(2).all(|w| sg * (w[1] - w[0]) >= -1e-12 * scale);
        }
        if u.t + 1e-12 * t_end >= t_end {
            break;
        }
    }
    Ok(PropertyReport {
        contraction: max_increase <= 1e-10 * scale,
        max_increase,
        distances,
        ordered: ordered0.then_some(ordered),
        monotone: mono.map(|_| monotone),
        mass_drift: solver.grid().periodic().then(|| u.mass(dx)[0] - mass0),
    })
}
