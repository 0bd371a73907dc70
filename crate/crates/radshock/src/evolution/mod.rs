//! Explicit finite-volume solvers for the time-dependent model.
//!
//! Scalar form: `u_t + f(u)_x = -(u - K * u) / eps` with
//! `K(x) = exp(-|x| / sqrt(eps)) / (2 sqrt(eps))`, the Green's function of
//! `1 - eps d_xx`. System form: `u_t + (f(u) + L q)_x = 0` with `q` from the
//! discrete Helmholtz problem `-eps D2 q + R q = -G.D1 u`, solved every step.
//! Both use the local Lax-Friedrichs flux and forward Euler.

mod verify;

use std::sync::Arc;

use thiserror::Error;

use crate::flux::ScalarFlux;
use crate::profile::{fmt_num, ProfileError};
use crate::system::{SystemError, SystemModel};

pub use verify::{
    property_suite, verify_system_wave, verify_traveling_wave, DriftReport, PropertyReport, VerifyOptions,
};

pub const CFL: f64 = 0.45;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolutionError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("time step {dt} exceeds the stability limit {limit}")]
    Cfl { dt: f64, limit: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("state has {got} values, expected {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("the wave left the domain (front at {front}, domain [{a}, {b}])")]
    WaveExited { front: f64, a: f64, b: f64 },
    #[error("domain length {length} is below 20 decay lengths ({needed})")]
    DomainTooSmall { length: f64, needed: f64 },
    #[error("radiation coefficient must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    System(#[from] SystemError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Boundary {
    /// Ghost cells frozen at the far-field states; `q = 0` outside.
    Outflow {
        left: Vec<f64>,
        right: Vec<f64>,
    },
    Periodic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    pub a: f64,
    pub b: f64,
    pub m: usize,
    pub dx: f64,
    pub boundary: Boundary,
}

impl Grid1D {
    pub fn new(a: f64, b: f64, m: usize, boundary: Boundary) -> Result<Grid1D, EvolutionError> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(EvolutionError::Grid(format!("empty domain [{a}, {b}]")));
        }
        if m < 3 {
            return Err(EvolutionError::Grid(format!("need at least 3 cells, got {m}")));
        }
        if let Boundary::Outflow { left, right } = &boundary {
            if left.len() != right.len() || left.is_empty() {
                return Err(EvolutionError::Grid("far-field states differ in length".into()));
            }
        }
        Ok(Grid1D {
            a,
            b,
            m,
            dx: (b - a) / m as f64,
            boundary,
        })
    }

    pub fn center(&self, i: usize) -> f64 {
        self.a + (i as f64 + 0.5) * self.dx
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.m).map(|i| self.center(i)).collect()
    }

    pub fn periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    fn far(&self, comp: usize) -> (f64, f64) {
        match &self.boundary {
            Boundary::Outflow { left, right } => (left[comp], right[comp]),
            Boundary::Periodic => (0.0, 0.0),
        }
    }
}

/// Cell averages of `n` components, stored cell by cell.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub n: usize,
    pub u: Vec<f64>,
    pub t: f64,
}

impl FieldState {
    pub fn scalar(u: Vec<f64>) -> FieldState {
        FieldState { n: 1, u, t: 0.0 }
    }

    pub fn cells(&self) -> usize {
        self.u.len() / self.n
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.u.iter().skip(c).step_by(self.n).copied().collect()
    }

    /// `sum u dx` per component.
    pub fn mass(&self, dx: f64) -> Vec<f64> {
        (0..self.n)
            .map(|c| self.component(c).iter().sum::<f64>() * dx)
            .collect()
    }
}

/// Discrete `K`: weights `c r^|k|` with `r = exp(-dx / sqrt(eps))` and
/// `c = (1 - r) / (1 + r)`, which sum to one over all integers.
/// Applied by a forward and a backward first-order recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiationKernel {
    pub eps: f64,
    pub dx: f64,
    pub r: f64,
    pub c: f64,
}

impl RadiationKernel {
    pub fn new(eps: f64, dx: f64) -> Result<RadiationKernel, EvolutionError> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(EvolutionError::InvalidEpsilon(eps));
        }
        let r = (-dx / eps.sqrt()).exp();
        Ok(RadiationKernel {
            eps,
            dx,
            r,
            c: (1.0 - r) / (1.0 + r),
        })
    }

    /// Truncation radius `40 sqrt(eps)` in cells.
    pub fn radius(&self) -> usize {
        (40.0 * self.eps.sqrt() / self.dx).ceil() as usize
    }

    /// Explicit weights for offsets `-radius..=radius`, renormalized.
    pub fn weights(&self) -> Vec<f64> {
        let k = self.radius() as i64;
        let w: Vec<f64> = (-k..=k)
            .map(|j| self.c * self.r.powi(j.unsigned_abs() as i32))
            .collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    }

    /// `K * u` for one component; `far` gives the constant extension used
    /// for outflow grids.
    pub fn apply(&self, u: &[f64], periodic: bool, far: (f64, f64)) -> Vec<f64> {
        let m = u.len();
        let r = self.r;
        let mut fwd = vec![0.0; m];
        let mut bwd = vec![0.0; m];
        if periodic {
            // Sum over all periodic images: prev = sum_{k>=1} r^k u_{-k}.
            let rm = r.powi(m as i32);
            let mut acc = 0.0;
            for k in 1..=m {
                acc += r.powi(k as i32) * u[m - k];
            }
            let mut prev = acc / (1.0 - rm);
            for i in 0..m {
                fwd[i] = u[i] + prev;
                prev = r * fwd[i];
            }
            let mut acc = 0.0;
            for k in 1..=m {
                acc += r.powi(k as i32) * u[k - 1];
            }
            let mut next = acc / (1.0 - rm);
            for i in (0..m).rev() {
                bwd[i] = u[i] + next;
                next = r * bwd[i];
            }
        } else {
            let mut prev = far.0 * r / (1.0 - r);
            for i in 0..m {
                fwd[i] = u[i] + prev;
                prev = r * fwd[i];
            }
            let mut next = far.1 * r / (1.0 - r);
            for i in (0..m).rev() {
                bwd[i] = u[i] + next;
                next = r * bwd[i];
            }
        }
        (0..m).map(|i| self.c * (fwd[i] + bwd[i] - u[i])).collect()
    }
}

/// Solves `-eps D2 q + R q = rhs` on the grid, Dirichlet zero outside an
/// outflow grid, cyclic for periodic grids.
pub fn helmholtz(grid: &Grid1D, eps: f64, r: f64, rhs: &[f64]) -> Vec<f64> {
    let m = rhs.len();
    let off = -eps / (grid.dx * grid.dx);
    let diag = r - 2.0 * off;
    if !grid.periodic() {
        return thomas(off, diag, rhs);
    }
    // Sherman-Morrison on the cyclic system.
    let gamma = -diag;
    let mut d = vec![diag; m];
    d[0] = diag - gamma;
    d[m - 1] = diag - off * off / gamma;
    let y = thomas_general(off, &d, rhs);
    let mut corr = vec![0.0; m];
    corr[0] = gamma;
    corr[m - 1] = off;
    let z = thomas_general(off, &d, &corr);
    let fact = (y[0] + off * y[m - 1] / gamma) / (1.0 + z[0] + off * z[m - 1] / gamma);
    y.iter().zip(&z).map(|(a, b)| a - fact * b).collect()
}

fn thomas(off: f64, diag: f64, rhs: &[f64]) -> Vec<f64> {
    thomas_general(off, &vec![diag; rhs.len()], rhs)
}

fn thomas_general(off: f64, diag: &[f64], rhs: &[f64]) -> Vec<f64> {
    let m = rhs.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    c[0] = off / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..m {
        let den = diag[i] - off * c[i - 1];
        c[i] = off / den;
        d[i] = (rhs[i] - off * d[i - 1]) / den;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = d[m - 1];
    for i in (0..m - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// `q` from `-eps D2 q + R q = -G.D1 u` with centered `D1`.
pub fn solve_elliptic(grid: &Grid1D, eps: f64, r: f64, g: &[f64], state: &FieldState) -> Vec<f64> {
    let (m, n) = (state.cells(), state.n);
    let at = |i: isize, c: usize| -> f64 {
        if grid.periodic() {
            state.u[(i.rem_euclid(m as isize) as usize) * n + c]
        } else if i < 0 {
            grid.far(c).0
        } else if i >= m as isize {
            grid.far(c).1
        } else {
            state.u[i as usize * n + c]
        }
    };
    let rhs: Vec<f64> = (0..m as isize)
        .map(|i| {
            let du: f64 = (0..n).map(|c| g[c] * (at(i + 1, c) - at(i - 1, c))).sum();
            -du / (2.0 * grid.dx)
        })
        .collect();
    helmholtz(grid, eps, r, &rhs)
}

/// Common interface of the scalar and system solvers.
pub trait Evolver {
    fn grid(&self) -> &Grid1D;

    /// Largest stable time step for `state`, including the `CFL` factor.
    fn max_dt(&self, state: &FieldState) -> f64;

    /// Advances by `dt`, or when `dt` is `None` by the largest stable step
    /// not passing `t_end`. Returns the step taken.
    fn advance(&self, state: &mut FieldState, dt: Option<f64>, t_end: f64) -> Result<f64, EvolutionError>;

    fn step(&self, state: &mut FieldState, dt: f64) -> Result<(), EvolutionError> {
        self.advance(state, Some(dt), f64::INFINITY).map(|_| ())
    }

    /// Runs to `t_end`, calling `observe` after every step.
    fn run(
        &self,
        state: &mut FieldState,
        t_end: f64,
        mut observe: impl FnMut(&FieldState),
    ) -> Result<usize, EvolutionError>
    where
        Self: Sized,
    {
        let mut steps = 0;
        while state.t < t_end {
            self.advance(state, None, t_end)?;
            if state.t + 1e-12 * t_end.abs() >= t_end {
                state.t = t_end;
            }
            steps += 1;
            observe(state);
        }
        Ok(steps)
    }
}

fn check_state(grid: &Grid1D, state: &FieldState, n: usize) -> Result<(), EvolutionError> {
    if state.n != n || state.u.len() != grid.m * n {
        return Err(EvolutionError::Dimension {
            got: state.u.len(),
            expected: grid.m * n,
        });
    }
    Ok(())
}

fn choose_dt(dt: Option<f64>, limit: f64, t: f64, t_end: f64) -> Result<f64, EvolutionError> {
    match dt {
        Some(dt) if dt > limit * (1.0 + 1e-12) => Err(EvolutionError::Cfl { dt, limit }),
        Some(dt) => Ok(dt),
        None => Ok(limit.min(t_end - t)),
    }
}

/// Scalar kernel-form solver.
#[derive(Debug, Clone)]
pub struct ScalarSolver {
    grid: Grid1D,
    flux: Arc<dyn ScalarFlux>,
    kernel: RadiationKernel,
}

/// Ghost-extended values with fluxes and interface speeds.
struct Stencil {
    u: Vec<f64>,
    f: Vec<f64>,
    alpha: Vec<f64>,
    limit: f64,
}

impl ScalarSolver {
    pub fn new(grid: Grid1D, flux: Arc<dyn ScalarFlux>, eps: f64) -> Result<ScalarSolver, EvolutionError> {
        let kernel = RadiationKernel::new(eps, grid.dx)?;
        Ok(ScalarSolver { grid, flux, kernel })
    }

    pub fn kernel(&self) -> &RadiationKernel {
        &self.kernel
    }

    fn stencil(&self, u: &[f64]) -> Stencil {
        let m = u.len();
        let (left, right) = if self.grid.periodic() {
            (u[m - 1], u[0])
        } else {
            self.grid.far(0)
        };
        let mut ext = Vec::with_capacity(m + 2);
        ext.push(left);
        ext.extend_from_slice(u);
        ext.push(right);
        let fl = &self.flux;
        let f: Vec<f64> = ext.iter().map(|&x| fl.value(x)).collect();
        let d: Vec<f64> = ext.iter().map(|&x| fl.derivative(x, 1).abs()).collect();
        // The midpoint catches extrema of f' between neighbours.
        let alpha: Vec<f64> = (0..=m)
            .map(|i| {
                d[i].max(d[i + 1])
                    .max(fl.derivative(0.5 * (ext[i] + ext[i + 1]), 1).abs())
            })
            .collect();
        let a = alpha.iter().fold(0.0f64, |m, x| m.max(*x));
        let hyp = if a > 0.0 { self.grid.dx / a } else { f64::INFINITY };
        Stencil {
            u: ext,
            f,
            alpha,
            limit: CFL * hyp.min(self.kernel.eps),
        }
    }

    /// Values `z = K*u`, `q`, for export.
    pub fn radiation(&self, state: &FieldState) -> (Vec<f64>, Vec<f64>) {
        let far = self.grid.far(0);
        let z = self.kernel.apply(&state.u, self.grid.periodic(), far);
        let q = solve_elliptic(&self.grid, self.kernel.eps, 1.0, &[1.0], state);
        (z, q)
    }
}

impl Evolver for ScalarSolver {
    fn grid(&self) -> &Grid1D {
        &self.grid
    }

    fn max_dt(&self, state: &FieldState) -> f64 {
        self.stencil(&state.u).limit
    }

    fn advance(&self, state: &mut FieldState, dt: Option<f64>, t_end: f64) -> Result<f64, EvolutionError> {
        check_state(&self.grid, state, 1)?;
        let st = self.stencil(&state.u);
        let dt = choose_dt(dt, st.limit, state.t, t_end)?;
        let m = state.u.len();
        let fx: Vec<f64> = (0..=m)
            .map(|i| 0.5 * (st.f[i] + st.f[i + 1]) - 0.5 * st.alpha[i] * (st.u[i + 1] - st.u[i]))
            .collect();
        let u = &state.u;
        let ku = self.kernel.apply(u, self.grid.periodic(), self.grid.far(0));
        let lam = dt / self.grid.dx;
        let next: Vec<f64> = (0..m)
            .map(|i| u[i] - lam * (fx[i + 1] - fx[i]) - dt / self.kernel.eps * (u[i] - ku[i]))
            .collect();
        state.t += dt;
        if next.iter().any(|x| !x.is_finite()) {
            return Err(EvolutionError::NonFinite { t: state.t });
        }
        state.u = next;
        Ok(dt)
    }
}

/// System solver: elliptic solve, then a conservative update with
/// `f(u) + L q`.
#[derive(Debug, Clone)]
pub struct SystemSolver {
    grid: Grid1D,
    sys: SystemModel,
    eps: f64,
}

impl SystemSolver {
    pub fn new(grid: Grid1D, sys: SystemModel, eps: f64) -> Result<SystemSolver, EvolutionError> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(EvolutionError::InvalidEpsilon(eps));
        }
        if let Boundary::Outflow { left, .. } = &grid.boundary {
            if left.len() != sys.dimension() {
                return Err(EvolutionError::Dimension {
                    got: left.len(),
                    expected: sys.dimension(),
                });
            }
        }
        Ok(SystemSolver { grid, sys, eps })
    }

    pub fn system(&self) -> &SystemModel {
        &self.sys
    }

    pub fn q(&self, state: &FieldState) -> Vec<f64> {
        solve_elliptic(&self.grid, self.eps, self.sys.r(), self.sys.g().as_slice(), state)
    }

    /// Ghost-extended cells, `m + 2` of them.
    fn extended(&self, state: &FieldState) -> Vec<Vec<f64>> {
        let n = state.n;
        let cells = state.u.chunks(n).map(<[f64]>::to_vec);
        let (left, right) = match &self.grid.boundary {
            Boundary::Periodic => (state.u[state.u.len() - n..].to_vec(), state.u[..n].to_vec()),
            Boundary::Outflow { left, right } => (left.clone(), right.clone()),
        };
        std::iter::once(left)
            .chain(cells)
            .chain(std::iter::once(right))
            .collect()
    }

    fn radius(&self, u: &[f64]) -> f64 {
        let n = self.sys.dimension();
        let j = nalgebra::DMatrix::from_row_slice(n, n, &self.sys.flux().jacobian(u));
        j.schur().complex_eigenvalues().iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    fn limit(&self, radii: &[f64]) -> f64 {
        let a = radii.iter().fold(0.0f64, |m, x| m.max(*x));
        let hyp = if a > 0.0 { self.grid.dx / a } else { f64::INFINITY };
        let coupling = self.eps / (self.sys.l().norm() * self.sys.g().norm());
        CFL * hyp.min(coupling)
    }
}

impl Evolver for SystemSolver {
    fn grid(&self) -> &Grid1D {
        &self.grid
    }

    fn max_dt(&self, state: &FieldState) -> f64 {
        let radii: Vec<f64> = self.extended(state).iter().map(|u| self.radius(u)).collect();
        self.limit(&radii)
    }

    fn advance(&self, state: &mut FieldState, dt: Option<f64>, t_end: f64) -> Result<f64, EvolutionError> {
        let n = self.sys.dimension();
        check_state(&self.grid, state, n)?;
        let ext = self.extended(state);
        let radii: Vec<f64> = ext.iter().map(|u| self.radius(u)).collect();
        let dt = choose_dt(dt, self.limit(&radii), state.t, t_end)?;
        let m = state.cells();
        let q = self.q(state);
        let qe = |i: usize| -> f64 {
            // Index into the ghost-extended range.
            if self.grid.periodic() {
                q[(i + m - 1) % m]
            } else if i == 0 || i == m + 1 {
                0.0
            } else {
                q[i - 1]
            }
        };
        let fv: Vec<Vec<f64>> = ext.iter().map(|u| self.sys.flux().eval(u)).collect();
        let l = self.sys.l();
        let mut fx = Vec::with_capacity((m + 1) * n);
        for i in 0..=m {
            let alpha = radii[i].max(radii[i + 1]);
            let qm = 0.5 * (qe(i) + qe(i + 1));
            for c in 0..n {
                fx.push(0.5 * (fv[i][c] + fv[i + 1][c]) - 0.5 * alpha * (ext[i + 1][c] - ext[i][c]) + l[c] * qm);
            }
        }
        let lam = dt / self.grid.dx;
        let next: Vec<f64> = (0..m * n)
            .map(|k| {
                let (i, c) = (k / n, k % n);
                state.u[k] - lam * (fx[(i + 1) * n + c] - fx[i * n + c])
            })
            .collect();
        state.t += dt;
        if next.iter().any(|x| !x.is_finite()) {
            return Err(EvolutionError::NonFinite { t: state.t });
        }
        state.u = next;
        Ok(dt)
    }
}

/// Scalar snapshot rows `t,xi,z,dz,ddz,u,q`, with `z = K*u` and `dz = -q`.
pub fn snapshot_csv(solver: &ScalarSolver, state: &FieldState, header: bool) -> String {
    let (z, q) = solver.radiation(state);
    let eps = solver.kernel.eps;
    let mut s = String::new();
    if header {
        s.push_str("t,xi,z,dz,ddz,u,q\n");
    }
    for (i, x) in solver.grid.centers().into_iter().enumerate() {
        let u = state.u[i];
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_num(state.t),
            fmt_num(x),
            fmt_num(z[i]),
            fmt_num(-q[i]),
            fmt_num((z[i] - u) / eps),
            fmt_num(u),
            fmt_num(q[i])
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::FluxModel;

    #[test]
    fn kernel_unit_mass_and_positive() {
        for (eps, dx) in [(1.0, 0.01), (0.1, 0.05), (4.0, 0.3)] {
            let k = RadiationKernel::new(eps, dx).unwrap();
            let w = k.weights();
            assert!(w.iter().all(|x| *x > 0.0));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn recursive_filter_matches_weights() {
        let k = RadiationKernel::new(0.05, 0.1).unwrap();
        let m = 64;
        let u: Vec<f64> = (0..m).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let fast = k.apply(&u, true, (0.0, 0.0));
        let w = k.weights();
        let rad = k.radius() as isize;
        for i in 0..m {
            let slow: f64 = (-rad..=rad)
                .map(|j| w[(j + rad) as usize] * u[(i as isize - j).rem_euclid(m as isize) as usize])
                .sum();
            assert!((fast[i] - slow).abs() < 1e-13, "{i}: {} vs {slow}", fast[i]);
        }
    }

    #[test]
    fn outflow_filter_of_constant() {
        let k = RadiationKernel::new(1.0, 0.1).unwrap();
        let u = vec![2.5; 50];
        for v in k.apply(&u, false, (2.5, 2.5)) {
            assert!((v - 2.5).abs() < 1e-13);
        }
    }

    #[test]
    fn helmholtz_periodic_residual() {
        let grid = Grid1D::new(0.0, 1.0, 40, Boundary::Periodic).unwrap();
        let rhs: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let q = helmholtz(&grid, 0.3, 2.0, &rhs);
        let h2 = grid.dx * grid.dx;
        for i in 0..40 {
            let (l, r) = (q[(i + 39) % 40], q[(i + 1) % 40]);
            let lhs = -0.3 * (l - 2.0 * q[i] + r) / h2 + 2.0 * q[i];
            assert!((lhs - rhs[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_state_is_steady() {
        let f: Arc<dyn ScalarFlux> = Arc::new(FluxModel::parse("u^2/2", 1).unwrap());
        let grid = Grid1D::new(
            -1.0,
            1.0,
            50,
            Boundary::Outflow {
                left: vec![0.7],
                right: vec![0.7],
            },
        )
        .unwrap();
        let solver = ScalarSolver::new(grid, f, 0.5).unwrap();
        let mut s = FieldState::scalar(vec![0.7; 50]);
        solver.run(&mut s, 1.0, |_| {}).unwrap();
        assert!(s.u.iter().all(|x| (x - 0.7).abs() < 1e-15));
    }
}
