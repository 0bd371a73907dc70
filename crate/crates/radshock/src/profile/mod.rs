//! Radiative shock profiles of the scalar model
//!
//! ```text
//! u_t + f(u)_x + q_x = 0,   -eps q_xx + q + u_x = 0
//! ```
//!
//! A traveling wave with `q = -z'` and `u = z - eps z''` satisfies
//! `z' = F(z - eps z''; s)`. The profile is assembled from one maximal
//! solution per monotone branch of `F`, glued pairwise in the `(z, z')`
//! plane at the local minima of `F`. Where the two one-sided values of
//! `u` differ the profile carries an inviscid shock.

mod arc;

use std::fmt::Write as _;

use thiserror::Error;

use crate::ode::OdeError;
use crate::shock::{oleinik_margin, ChordFunction, ShockError};

pub use arc::{ArcOptions, ArcOrigin, Linearization, PhaseTrajectory, Terminal};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error(transparent)]
    Shock(#[from] ShockError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("profile not constructed: eps |F| |F''| = {product} >= 2 at the local maximum u = {point}")]
    EpsilonTooLarge { point: f64, product: f64 },
    #[error("no profile at this epsilon: arc from u = {point} ends at z = {z_end}, short of {bound}")]
    NoProfileAtEpsilon { point: f64, z_end: f64, bound: f64 },
    #[error("equilibrium at u = {point} is not a saddle (a = {a:e})")]
    NonSaddle { point: f64, a: f64 },
    #[error("{origin:?} arc did not terminate within eta = {budget:e}")]
    BudgetExceeded { origin: ArcOrigin, budget: f64 },
    #[error("{origin:?} arc left its branch at u = {u}")]
    LeftBranch { origin: ArcOrigin, u: f64 },
    #[error("arcs glued at u = {point} do not overlap in z")]
    NoOverlap { point: f64 },
    #[error("phase-plane graphs meeting at u = {point} intersect more than once")]
    MultipleIntersections { point: f64 },
}

/// Map from a model with coefficients to the unit-coefficient form used
/// here. `u_t + f~(u)_x + L q_x = 0, -eps_q q_xx + R q + G u_x = 0` becomes
/// the model above with flux `kappa f~`, `kappa = R / (L G)`,
/// `eps = eps_q / R`, in time `tau = t L G / R` and the original `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonForm {
    pub kappa: f64,
    pub epsilon: f64,
    pub time_scale: f64,
}

impl EpsilonForm {
    pub fn new(l: f64, g: f64, r: f64, eps_q: f64) -> Option<EpsilonForm> {
        let lg = l * g;
        if !(lg > 0.0 && r > 0.0 && eps_q > 0.0) || !lg.is_finite() {
            return None;
        }
        Some(EpsilonForm {
            kappa: r / lg,
            epsilon: eps_q / r,
            time_scale: lg / r,
        })
    }

    /// `q` of the original model from the unit-form `q`: `q = (G / R) q_unit`.
    pub fn q_original(&self, q_unit: f64, g: f64, r: f64) -> f64 {
        q_unit * g / r
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ProfileOptions {
    pub arc: ArcOptions,
    /// Interior samples per integrator step in the exported grid.
    pub dense: usize,
    /// Jumps with `|u_l - u_r| < continuity_tol * size` are continuous.
    pub continuity_tol: f64,
    /// Refuse to build when the sufficient smallness condition fails at
    /// some local maximum of `F`.
    pub enforce_threshold: bool,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            arc: ArcOptions::default(),
            dense: 3,
            continuity_tol: 1e-6,
            enforce_threshold: true,
        }
    }
}

/// Glue point of two consecutive arcs in the `(z, z')` plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchPoint {
    /// Index of the local minimum in the critical point list.
    pub critical: usize,
    pub z_bar: f64,
    pub z_tilde: f64,
    /// Translations applied to the arcs left and right of the glue point.
    pub shift_left: f64,
    pub shift_right: f64,
}

/// One-sided states at a glue point, in the caller's frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GluePoint {
    pub xi0: f64,
    pub z: f64,
    pub dz: f64,
    pub u_left: f64,
    pub u_right: f64,
    pub jump: bool,
    /// `|u_l - u_r|` relative to the shock size; near the continuity
    /// threshold this replaces a hard classification.
    pub margin: f64,
    pub rh_residual: f64,
    pub oleinik_margin: f64,
}

impl GluePoint {
    pub fn magnitude(&self) -> f64 {
        (self.u_left - self.u_right).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub xi: f64,
    pub z: f64,
    pub dz: f64,
    pub ddz: f64,
    pub u: f64,
    pub q: f64,
}

#[derive(Debug, Clone)]
struct Piece {
    arc: usize,
    eta_end: f64,
    shift: f64,
    /// xi range (ascending) after the shift.
    xi_lo: f64,
    xi_hi: f64,
}

#[derive(Debug, Clone)]
pub struct RadiativeProfile {
    chord: ChordFunction,
    epsilon: f64,
    arcs: Vec<PhaseTrajectory>,
    matches: Vec<MatchPoint>,
    glues: Vec<GluePoint>,
    pieces: Vec<Piece>,
    grid: Vec<ProfilePoint>,
}

/// Sufficient bound on `eps` for the intermediate arcs at the local maximum
/// `c`: `eps |F(c)| |F''(c)| < 2`.
pub fn intermediate_threshold(chord: &ChordFunction, c: f64) -> f64 {
    2.0 / (chord.value(c).abs() * chord.derivative(c, 2).abs())
}

fn arc_spec(chord: &ChordFunction, i: usize) -> (ArcOrigin, f64, f64, f64) {
    let crit = chord.critical_points();
    let last = crit.len();
    if i == 0 {
        (ArcOrigin::TailPlus, chord.lo(), 1.0, crit[0])
    } else if i == last {
        (ArcOrigin::TailMinus, chord.hi(), -1.0, crit[last - 1])
    } else if i % 2 == 1 {
        (ArcOrigin::IntermediateLeft(i), crit[i], -1.0, crit[i - 1])
    } else {
        (ArcOrigin::IntermediateRight(i - 1), crit[i - 1], 1.0, crit[i])
    }
}

/// Tail arc at `u+` (`right`) or `u-`.
pub fn tail_trajectory(
    chord: &ChordFunction,
    right: bool,
    eps: f64,
    opts: &ArcOptions,
) -> Result<PhaseTrajectory, ProfileError> {
    check_eps(eps)?;
    let i = if right { 0 } else { chord.branch_count() - 1 };
    let (origin, source, dir, target) = arc_spec(chord, i);
    arc::integrate_arc(chord, origin, i, source, target, dir, eps, opts)
}

/// The two arcs leaving the `k`-th local maximum of `F` (`k = 1..n-1`),
/// lower `u` first.
pub fn intermediate_trajectories(
    chord: &ChordFunction,
    k: usize,
    eps: f64,
    opts: &ArcOptions,
) -> Result<(PhaseTrajectory, PhaseTrajectory), ProfileError> {
    check_eps(eps)?;
    let j = (2 * k).saturating_sub(1);
    if k == 0 || j >= chord.critical_points().len() {
        return Err(ShockError::BadBranch {
            index: k,
            count: chord.branch_count(),
        }
        .into());
    }
    check_threshold(chord, j, eps)?;
    let build = |i: usize| {
        let (origin, source, dir, target) = arc_spec(chord, i);
        arc::integrate_arc(chord, origin, i, source, target, dir, eps, opts)
    };
    let (left, right) = (build(j)?, build(j + 1)?);
    check_reach(chord, &left, &right)?;
    Ok((left, right))
}

fn check_eps(eps: f64) -> Result<(), ProfileError> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(ProfileError::InvalidEpsilon(eps))
    }
}

fn check_threshold(chord: &ChordFunction, j: usize, eps: f64) -> Result<(), ProfileError> {
    let c = chord.critical_points()[j];
    let product = eps * chord.value(c).abs() * chord.derivative(c, 2).abs();
    if product >= 2.0 {
        return Err(ProfileError::EpsilonTooLarge {
            point: chord.orient(c),
            product,
        });
    }
    Ok(())
}

fn check_reach(chord: &ChordFunction, left: &PhaseTrajectory, right: &PhaseTrajectory) -> Result<(), ProfileError> {
    let tol = 1e-9 * chord.scale();
    let (zl, zr) = (left.end()[0], right.end()[0]);
    if zl > left.target + tol {
        return Err(ProfileError::NoProfileAtEpsilon {
            point: chord.orient(left.source),
            z_end: chord.orient(zl),
            bound: chord.orient(left.target),
        });
    }
    if zr < right.target - tol {
        return Err(ProfileError::NoProfileAtEpsilon {
            point: chord.orient(right.source),
            z_end: chord.orient(zr),
            bound: chord.orient(right.target),
        });
    }
    Ok(())
}

/// Intersection of the graphs `z -> F(u(z))` of the arcs above (`up`) and
/// below (`down`) the local minimum `c`. Returns `(z_bar, z_tilde)`.
pub fn match_pair(
    chord: &ChordFunction,
    up: &PhaseTrajectory,
    down: &PhaseTrajectory,
) -> Result<(f64, f64), ProfileError> {
    let c = down.target;
    if up.terminal.converged() && down.terminal.converged() {
        return Ok((c, chord.value(c)));
    }
    let (u0, u1) = up.z_range();
    let (d0, d1) = down.z_range();
    let lo = u0.min(u1).max(d0.min(d1));
    let hi = u0.max(u1).min(d0.max(d1));
    if !(lo <= hi) {
        // Both arcs ended on u = c within roundoff of each other: grazing.
        if lo - hi <= 1e-9 * chord.scale() {
            return Ok((0.5 * (lo + hi), chord.value(c)));
        }
        return Err(ProfileError::NoOverlap { point: chord.orient(c) });
    }
    let g = |z: f64| chord.value(up.u_of_z(z)) - chord.value(down.u_of_z(z));
    // Both graphs are monotone, so the difference changes sign once.
    let samples = 64;
    let mut changes = 0;
    let mut prev = g(lo);
    for i in 1..=samples {
        let v = g(lo + (hi - lo) * i as f64 / samples as f64);
        if v != 0.0 && prev != 0.0 && (v > 0.0) != (prev > 0.0) {
            changes += 1;
        }
        if v != 0.0 {
            prev = v;
        }
    }
    if changes > 1 {
        return Err(ProfileError::MultipleIntersections { point: chord.orient(c) });
    }
    let (mut a, mut b) = (lo, hi);
    let ga = g(a);
    if ga == 0.0 {
        return Ok((a, chord.value(up.u_of_z(a))));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m);
        if gm == 0.0 {
            a = m;
            b = m;
            break;
        }
        if (gm > 0.0) == (ga > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    let z = 0.5 * (a + b);
    let zt = 0.5 * (chord.value(up.u_of_z(z)) + chord.value(down.u_of_z(z)));
    Ok((z, zt))
}

pub fn assemble_profile(chord: &ChordFunction, eps: f64) -> Result<RadiativeProfile, ProfileError> {
    assemble_profile_with(chord, eps, &ProfileOptions::default())
}

pub fn assemble_profile_with(
    chord: &ChordFunction,
    eps: f64,
    opts: &ProfileOptions,
) -> Result<RadiativeProfile, ProfileError> {
    check_eps(eps)?;
    if !chord.structured() {
        return Err(
            ShockError::NoBranchStructure(chord.critical_points().iter().map(|&z| chord.orient(z)).collect()).into(),
        );
    }
    let crit = chord.critical_points().to_vec();
    if opts.enforce_threshold {
        for j in (1..crit.len()).step_by(2) {
            check_threshold(chord, j, eps)?;
        }
    }
    let count = chord.branch_count();
    let arcs = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..count)
            .map(|i| {
                scope.spawn(move || {
                    let (origin, source, dir, target) = arc_spec(chord, i);
                    arc::integrate_arc(chord, origin, i, source, target, dir, eps, &opts.arc)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("arc worker panicked"))
            .collect::<Result<Vec<_>, _>>()
    })?;
    for j in (1..crit.len()).step_by(2) {
        check_reach(chord, &arcs[j], &arcs[j + 1])?;
    }

    // Glue from the u- end: arcs[count-1] sits leftmost in xi.
    let mut shifts = vec![0.0; count];
    let mut eta_glue = vec![0.0; count];
    let mut matches = Vec::new();
    let mut glues = Vec::new();
    let scale = chord.scale();
    let mut j = crit.len() - 1;
    loop {
        let (up, down) = (&arcs[j + 1], &arcs[j]);
        let (z_bar, z_tilde) = match_pair(chord, up, down)?;
        let both = up.terminal.converged() && down.terminal.converged();
        let (eu, ed) = if both {
            (up.eta_end(), down.eta_end())
        } else {
            (up.eta_at(0, z_bar), down.eta_at(0, z_bar))
        };
        eta_glue[j + 1] = eu;
        eta_glue[j] = ed;
        if j + 1 == count - 1 {
            shifts[j + 1] = -up.state(eu)[2];
        }
        let xi0 = up.state(eu)[2] + shifts[j + 1];
        shifts[j] = xi0 - down.state(ed)[2];
        if j >= 1 {
            // The other arc of the same intermediate piece.
            shifts[j - 1] = shifts[j];
        }
        let (u_l, u_r) = if both {
            (crit[j], crit[j])
        } else {
            (chord.invert_branch(j + 1, z_tilde)?, chord.invert_branch(j, z_tilde)?)
        };
        matches.push(MatchPoint {
            critical: j,
            z_bar: chord.orient(z_bar),
            z_tilde: chord.orient(z_tilde),
            shift_left: shifts[j + 1],
            shift_right: shifts[j],
        });
        let mag = (u_l - u_r).abs();
        let flux = chord.flux();
        let (rh, margin) = if mag > 0.0 {
            let slope = (flux.value(u_l) - flux.value(u_r)) / (u_l - u_r);
            ((slope - chord.speed()).abs(), oleinik_margin(flux.as_ref(), u_r, u_l))
        } else {
            (0.0, 0.0)
        };
        glues.push(GluePoint {
            xi0,
            z: chord.orient(z_bar),
            dz: chord.orient(z_tilde),
            u_left: chord.orient(u_l),
            u_right: chord.orient(u_r),
            jump: mag >= opts.continuity_tol * scale,
            margin: mag / scale,
            rh_residual: rh,
            oleinik_margin: margin,
        });
        if j < 2 {
            break;
        }
        j -= 2;
    }

    let mut pieces = Vec::with_capacity(count);
    for i in (0..count).rev() {
        let a = &arcs[i];
        let x0 = a.start[2] + shifts[i];
        let x1 = a.state(eta_glue[i])[2] + shifts[i];
        pieces.push(Piece {
            arc: i,
            eta_end: eta_glue[i],
            shift: shifts[i],
            xi_lo: x0.min(x1),
            xi_hi: x0.max(x1),
        });
    }
    let mut profile = RadiativeProfile {
        chord: chord.clone(),
        epsilon: eps,
        arcs,
        matches,
        glues,
        pieces,
        grid: Vec::new(),
    };
    profile.grid = profile.build_grid(opts.dense);
    Ok(profile)
}

impl RadiativeProfile {
    pub fn chord(&self) -> &ChordFunction {
        &self.chord
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn arcs(&self) -> &[PhaseTrajectory] {
        &self.arcs
    }

    pub fn matches(&self) -> &[MatchPoint] {
        &self.matches
    }

    /// All glue points, ordered by `xi`.
    pub fn glue_points(&self) -> Vec<GluePoint> {
        let mut g = self.glues.clone();
        g.sort_by(|a, b| a.xi0.total_cmp(&b.xi0));
        g
    }

    /// Glue points carrying a jump of `u`, ordered by `xi`.
    pub fn jumps(&self) -> Vec<GluePoint> {
        self.glue_points().into_iter().filter(|g| g.jump).collect()
    }

    /// Largest `|u_l - u_r|` over all glue points.
    pub fn max_jump(&self) -> f64 {
        self.glues.iter().map(GluePoint::magnitude).fold(0.0, f64::max)
    }

    pub fn grid(&self) -> &[ProfilePoint] {
        &self.grid
    }

    /// Exponential decay rates in `xi` at the `u-` and `u+` ends.
    pub fn decay_rates(&self) -> (f64, f64) {
        let rate = |a: &PhaseTrajectory| (a.mu / (self.epsilon * self.chord.derivative(a.source, 1))).abs();
        (rate(&self.arcs[self.arcs.len() - 1]), rate(&self.arcs[0]))
    }

    /// Longest of the two decay lengths.
    pub fn decay_length(&self) -> f64 {
        let (a, b) = self.decay_rates();
        1.0 / a.min(b)
    }

    fn point(&self, xi: f64, z: f64, u: f64) -> ProfilePoint {
        let dz = self.chord.value(u);
        let ddz = (z - u) / self.epsilon;
        let o = |v: f64| self.chord.orient(v);
        ProfilePoint {
            xi,
            z: o(z),
            dz: o(dz),
            ddz: o(ddz),
            u: o(u),
            q: o(-dz),
        }
    }

    /// Profile at an arbitrary `xi`. At a glue point the value left of the
    /// jump is returned.
    pub fn eval(&self, xi: f64) -> ProfilePoint {
        let first = &self.pieces[0];
        let last = &self.pieces[self.pieces.len() - 1];
        if xi < first.xi_lo {
            return self.tail_extension(first, xi);
        }
        if xi > last.xi_hi {
            return self.tail_extension(last, xi);
        }
        let mut gap: Option<(&Piece, &Piece)> = None;
        for (k, p) in self.pieces.iter().enumerate() {
            if xi >= p.xi_lo && xi <= p.xi_hi {
                let a = &self.arcs[p.arc];
                let eta = a.eta_at(2, xi - p.shift).min(p.eta_end);
                let y = a.state(eta);
                return self.point(xi, y[0], y[1]);
            }
            if k + 1 < self.pieces.len() && xi > p.xi_hi && xi < self.pieces[k + 1].xi_lo {
                gap = Some((p, &self.pieces[k + 1]));
            }
        }
        // Inside the tiny gap around a local maximum between two arc starts.
        let (p, q) = gap.unwrap_or((first, last));
        let (a, b) = (&self.arcs[p.arc], &self.arcs[q.arc]);
        let (xa, xb) = (a.start[2] + p.shift, b.start[2] + q.shift);
        let t = if xb > xa {
            ((xi - xa) / (xb - xa)).clamp(0.0, 1.0)
        } else {
            0.5
        };
        let z = a.start[0] + t * (b.start[0] - a.start[0]);
        let u = a.start[1] + t * (b.start[1] - a.start[1]);
        self.point(xi, z, u)
    }

    fn tail_extension(&self, p: &Piece, xi: f64) -> ProfilePoint {
        let a = &self.arcs[p.arc];
        let c = a.source;
        let rate = a.mu / (self.epsilon * self.chord.derivative(c, 1));
        let x0 = a.start[2] + p.shift;
        let k = (rate * (xi - x0)).exp();
        self.point(xi, c + (a.start[0] - c) * k, c + (a.start[1] - c) * k)
    }

    fn build_grid(&self, dense: usize) -> Vec<ProfilePoint> {
        let mut out = Vec::new();
        let ext = 40;
        let decay = 18.5;
        // Left tail extension.
        let first = &self.pieces[0];
        let (r0, _) = self.decay_rates();
        for k in (1..=ext).rev() {
            let xi = first.xi_lo - decay / r0 * k as f64 / ext as f64;
            out.push(self.tail_extension(first, xi));
        }
        for p in &self.pieces {
            let a = &self.arcs[p.arc];
            let mut pts: Vec<ProfilePoint> = a
                .samples(p.eta_end, dense)
                .into_iter()
                .map(|(_, y)| self.point(y[2] + p.shift, y[0], y[1]))
                .collect();
            let end = a.state(p.eta_end);
            if pts.last().is_none_or(|q| q.xi != end[2] + p.shift) {
                pts.push(self.point(end[2] + p.shift, end[0], end[1]));
            }
            if pts.len() > 1 && pts[0].xi > pts[pts.len() - 1].xi {
                pts.reverse();
            }
            out.extend(pts);
        }
        let last = &self.pieces[self.pieces.len() - 1];
        let (_, r1) = self.decay_rates();
        for k in 1..=ext {
            let xi = last.xi_hi + decay / r1 * k as f64 / ext as f64;
            out.push(self.tail_extension(last, xi));
        }
        // Samples converging into a sink stall in xi and can step back by
        // roundoff; keep xi nondecreasing (equal values mark a jump).
        let mut grid: Vec<ProfilePoint> = Vec::with_capacity(out.len());
        for p in out {
            if grid.last().is_none_or(|q| p.xi >= q.xi) {
                grid.push(p);
            }
        }
        grid
    }

    /// `xi,z,dz,ddz,u,q` with one row per grid point.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("xi,z,dz,ddz,u,q\n");
        for p in &self.grid {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                fmt_num(p.xi),
                fmt_num(p.z),
                fmt_num(p.dz),
                fmt_num(p.ddz),
                fmt_num(p.u),
                fmt_num(p.q)
            );
        }
        s
    }

    /// `xi0,u_left,u_right,rh_residual,oleinik_margin`, one row per jump.
    pub fn jumps_csv(&self) -> String {
        let mut s = String::from("xi0,u_left,u_right,rh_residual,oleinik_margin\n");
        for g in self.jumps() {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                fmt_num(g.xi0),
                fmt_num(g.u_left),
                fmt_num(g.u_right),
                fmt_num(g.rh_residual),
                fmt_num(g.oleinik_margin)
            );
        }
        s
    }
}

/// 17 significant digits, fixed exponent form; `-0` prints as `0`.
pub fn fmt_num(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.16e}")
}
