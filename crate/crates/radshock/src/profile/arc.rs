//! Maximal solutions of `eps z'' = z - h_i(z')` on one branch.
//!
//! The branch equation is singular where `F'` vanishes, so arcs are
//! integrated in the plane `(z, u)` with `u = z - eps z''` and the time
//! change `d xi = eps F'(u) d eta`:
//!
//! ```text
//! dz/deta  = eps F(u) F'(u)
//! du/deta  = z - u
//! dxi/deta = eps F'(u)
//! ```
//!
//! End states and branch extrema become equilibria on the diagonal `z = u`:
//! saddles where `F = 0` or `F` has a local maximum, sinks where `F` has a
//! local minimum. Every arc leaves a saddle along its unstable manifold and
//! stops either where `u` crosses the target critical point (the branch
//! ends with `z' = F(z*)`) or on convergence to the sink.

use crate::ode::{locate, Control, Dopri5, Step};
use crate::shock::ChordFunction;

use super::ProfileError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcOrigin {
    /// Tail at `u+`, `xi -> +inf`.
    TailPlus,
    /// Tail at `u-`, `xi -> -inf`.
    TailMinus,
    /// Arc with `u` below the local maximum at the given critical index.
    IntermediateLeft(usize),
    /// Arc with `u` above the local maximum at the given critical index.
    IntermediateRight(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Terminal {
    /// `u` reached the target critical point with `z != z*`.
    Crossed { eta: f64 },
    /// Converged to the sink `(z*, z*)`.
    Converged { eta: f64 },
    /// Converged to a sink of focus type: only possible in the grazing
    /// case, where the classification depends on tolerances.
    Grazing { eta: f64 },
}

impl Terminal {
    pub fn eta(&self) -> f64 {
        match *self {
            Terminal::Crossed { eta } | Terminal::Converged { eta } | Terminal::Grazing { eta } => eta,
        }
    }

    pub fn converged(&self) -> bool {
        !matches!(self, Terminal::Crossed { .. })
    }
}

/// Linearization at a diagonal equilibrium `(c, c)`:
/// `mu^2 + mu - a = 0` with `a = eps (F'^2 + F F'')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linearization {
    pub a: f64,
    /// Real parts of the two eigenvalues in eta-time, larger first.
    pub re: [f64; 2],
    /// Imaginary part (zero unless the equilibrium is a focus).
    pub im: f64,
}

impl Linearization {
    pub fn at(chord: &ChordFunction, c: f64, eps: f64) -> Linearization {
        let d1 = chord.derivative(c, 1);
        let a = eps * (d1 * d1 + chord.value(c) * chord.derivative(c, 2));
        let disc = 1.0 + 4.0 * a;
        if disc >= 0.0 {
            let r = disc.sqrt();
            Linearization {
                a,
                re: [(-1.0 + r) / 2.0, (-1.0 - r) / 2.0],
                im: 0.0,
            }
        } else {
            Linearization {
                a,
                re: [-0.5, -0.5],
                im: (-disc).sqrt() / 2.0,
            }
        }
    }

    pub fn is_saddle(&self) -> bool {
        self.a > 0.0
    }

    pub fn is_focus(&self) -> bool {
        self.im > 0.0
    }

    /// Jacobian of `(dz/deta, du/deta)`.
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[0.0, self.a], [1.0, -1.0]]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ArcOptions {
    pub rtol: f64,
    /// Absolute tolerance relative to the shock size.
    pub atol: f64,
    /// Distance of the first point from the saddle, relative to the shock size.
    pub offset: f64,
}

impl Default for ArcOptions {
    fn default() -> Self {
        ArcOptions {
            rtol: 1e-10,
            atol: 1e-12,
            offset: 1e-8,
        }
    }
}

/// One integrated arc. States are `[z, u, xi]` in the oriented frame,
/// with `xi = 0` at the saddle for intermediate arcs and at the first
/// point for tails.
#[derive(Debug, Clone)]
pub struct PhaseTrajectory {
    pub origin: ArcOrigin,
    pub branch: usize,
    pub source: f64,
    pub target: f64,
    /// Direction in which `u` leaves the source.
    pub dir: f64,
    pub epsilon: f64,
    /// Unstable eigenvalue at the source, eta-time.
    pub mu: f64,
    pub start: [f64; 3],
    /// Integrator steps, with `z` and `u` measured from `target`.
    pub steps: Vec<Step<3>>,
    pub terminal: Terminal,
}

// States are taken relative to the target so that relative tolerances
// still resolve convergence to a sink far from the origin.
fn rhs(chord: &ChordFunction, eps: f64, c: f64, y: &[f64; 3]) -> [f64; 3] {
    let (z, u) = (y[0] + c, y[1] + c);
    let d1 = chord.derivative(u, 1);
    [eps * chord.value(u) * d1, z - u, eps * d1]
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn integrate_arc(
    chord: &ChordFunction,
    origin: ArcOrigin,
    branch: usize,
    source: f64,
    target: f64,
    dir: f64,
    eps: f64,
    opts: &ArcOptions,
) -> Result<PhaseTrajectory, ProfileError> {
    let scale = chord.scale();
    let lin = Linearization::at(chord, source, eps);
    if !lin.is_saddle() {
        return Err(ProfileError::NonSaddle {
            point: chord.orient(source),
            a: lin.a,
        });
    }
    let mu = lin.re[0];
    // Unstable eigenvector (1 + mu, 1), oriented so u moves into the branch.
    let norm = ((1.0 + mu) * (1.0 + mu) + 1.0).sqrt();
    let delta = opts.offset * scale;
    let du = dir * delta / norm;
    let dz = (1.0 + mu) * du;
    let xi0 = match origin {
        ArcOrigin::TailPlus | ArcOrigin::TailMinus => 0.0,
        _ => eps * chord.derivative(source, 2) * du / mu,
    };
    let start = [source + dz, source + du, xi0];

    let sink = Linearization::at(chord, target, eps);
    let slowest = mu.min(sink.re[0].abs()).min(sink.re[1].abs());
    let budget = 1e3 / slowest;
    let conv_tol = 1e-12 * scale;
    let (blo, bhi) = (source.min(target), source.max(target));
    let leave_tol = 1e-9 * scale;

    let solver = Dopri5 {
        rtol: opts.rtol,
        atol: opts.atol * scale,
        max_steps: 1_000_000,
        ..Dopri5::default()
    };
    let event = |y: &[f64; 3]| -y[1] * dir;
    let mut terminal = None;
    let mut left_branch = None;
    let steps = solver.solve(
        |_, y| rhs(chord, eps, target, y),
        0.0,
        [start[0] - target, start[1] - target, start[2]],
        budget,
        |step| {
            let y = &step.y1;
            if event(y) <= 0.0 {
                let eta = locate(step, event, 1e-15 * step.t1().abs().max(1.0));
                let at = step.eval(eta);
                let near = at[0].abs().max(at[1].abs()) <= conv_tol;
                terminal = Some(if near {
                    converged(sink.is_focus(), eta)
                } else {
                    Terminal::Crossed { eta }
                });
                return Control::Stop;
            }
            if y[0].abs().max(y[1].abs()) <= conv_tol {
                terminal = Some(converged(sink.is_focus(), step.t1()));
                return Control::Stop;
            }
            let u = y[1] + target;
            if u < blo - leave_tol || u > bhi + leave_tol {
                left_branch = Some(u);
                return Control::Stop;
            }
            Control::Continue
        },
    )?;
    if let Some(u) = left_branch {
        return Err(ProfileError::LeftBranch {
            origin,
            u: chord.orient(u),
        });
    }
    let terminal = terminal.ok_or(ProfileError::BudgetExceeded { origin, budget })?;
    Ok(PhaseTrajectory {
        origin,
        branch,
        source,
        target,
        dir,
        epsilon: eps,
        mu,
        start,
        steps,
        terminal,
    })
}

fn converged(focus: bool, eta: f64) -> Terminal {
    if focus {
        Terminal::Grazing { eta }
    } else {
        Terminal::Converged { eta }
    }
}

impl PhaseTrajectory {
    fn abs(&self, y: [f64; 3]) -> [f64; 3] {
        [y[0] + self.target, y[1] + self.target, y[2]]
    }

    fn offset(&self, comp: usize) -> f64 {
        if comp < 2 {
            self.target
        } else {
            0.0
        }
    }

    pub fn eta_end(&self) -> f64 {
        self.terminal.eta()
    }

    /// State `[z, u, xi]` at `eta`, clamped to the integrated range.
    pub fn state(&self, eta: f64) -> [f64; 3] {
        let eta = eta.clamp(0.0, self.eta_end());
        let i = self.steps.partition_point(|s| s.t1() < eta);
        match self.steps.get(i) {
            Some(s) => self.abs(s.eval(eta)),
            None => self.steps.last().map_or(self.start, |s| self.abs(s.y1)),
        }
    }

    pub fn end(&self) -> [f64; 3] {
        self.state(self.eta_end())
    }

    /// Range of `z` covered, as (start, end).
    pub fn z_range(&self) -> (f64, f64) {
        (self.start[0], self.end()[0])
    }

    /// Parameter `eta` at which a monotone component (`0` for `z`, `2` for
    /// `xi`) takes the value `v`; values beyond the ends are clamped.
    pub fn eta_at(&self, comp: usize, v: f64) -> f64 {
        let end = self.eta_end();
        let (v0, v1) = (self.start[comp], self.state(end)[comp]);
        let sign = if v1 >= v0 { 1.0 } else { -1.0 };
        if (v - v0) * sign <= 0.0 {
            return 0.0;
        }
        if (v - v1) * sign >= 0.0 {
            return end;
        }
        let v = v - self.offset(comp);
        let i = self
            .steps
            .partition_point(|s| s.t1() < end && (s.y1[comp] - v) * sign < 0.0);
        let step = &self.steps[i.min(self.steps.len() - 1)];
        let (mut a, mut b) = (step.t0, step.t1().min(end));
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if (step.eval(m)[comp] - v) * sign < 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    /// `u` as a function of `z` along the arc.
    pub fn u_of_z(&self, z: f64) -> f64 {
        self.state(self.eta_at(0, z))[1]
    }

    /// Samples `(eta, [z, u, xi])` at every step end plus `dense` interior
    /// points per step, up to `eta_max`.
    pub fn samples(&self, eta_max: f64, dense: usize) -> Vec<(f64, [f64; 3])> {
        let eta_max = eta_max.min(self.eta_end());
        let mut out = vec![(0.0, self.start)];
        for s in &self.steps {
            if s.t0 >= eta_max {
                break;
            }
            let t1 = s.t1().min(eta_max);
            for k in 1..=dense + 1 {
                let t = s.t0 + (t1 - s.t0) * k as f64 / (dense + 1) as f64;
                out.push((t, self.abs(s.eval(t))));
            }
        }
        out
    }

    /// Samples `(xi, z, z', z'')` along the arc.
    pub fn phase_samples(&self, chord: &ChordFunction) -> Vec<[f64; 4]> {
        self.samples(self.eta_end(), 0)
            .into_iter()
            .map(|(_, y)| [y[2], y[0], chord.value(y[1]), (y[0] - y[1]) / self.epsilon])
            .collect()
    }

    /// Value of `z'` at the terminal event.
    pub fn terminal_slope(&self, chord: &ChordFunction) -> f64 {
        if self.terminal.converged() {
            chord.value(self.target)
        } else {
            chord.value(self.end()[1])
        }
    }
}
