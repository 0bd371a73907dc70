//! Reduction of `u_t + f(u)_x + L q_x = 0`, `-eps q_xx + R q + G.u_x = 0`
//! to the scalar model.
//!
//! Along a traveling wave the first equation integrates to
//! `f(u) - f(u-) - s (u - u-) = L z'` with `q = -z'`. Its components
//! transverse to `L` do not involve `z` and define a curve `u = Phi(w)`
//! parametrized by `w = G.u`; the component along `L` gives the reduced
//! chord `Fhat(w) = Q.(f(Phi(w)) - f(u-) - s (Phi(w) - u-))`. The second
//! equation becomes `eps z'' - R z + w = 0`, which is the scalar profile
//! problem for the flux `R Fhat` with coefficient `eps / R` after the
//! substitution `Z = R z`.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::flux::{FluxModel, ScalarFlux};
use crate::profile::{assemble_profile_with, fmt_num, ProfileError, ProfileOptions, RadiativeProfile};
use crate::shock::{ChordFunction, ShockError, ShockTriple};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("{0} must be a nonzero vector")]
    ZeroVector(&'static str),
    #[error("R must be positive and finite, got {0}")]
    InvalidR(f64),
    #[error("family index {k} out of range 1..={n}")]
    BadFamily { k: usize, n: usize },
    #[error("not strictly hyperbolic at {u:?}: {detail}")]
    NotStrictlyHyperbolic { u: Vec<f64>, detail: String },
    #[error("main assumption fails at {u:?}: (l.L)(G.r) = {value}")]
    MainAssumption { u: Vec<f64>, value: f64 },
    #[error("coincident states")]
    CoincidentStates,
    #[error("Rankine-Hugoniot residual {residual} too large")]
    RankineHugoniot { residual: f64 },
    #[error("G.(u+ - u-) vanishes; w does not parametrize the wave")]
    DegenerateCoupling,
    #[error("complement rows must annihilate L and have full rank")]
    InvalidComplement,
    #[error("Newton continuation diverged at w = {w}")]
    NewtonDivergence { w: f64 },
    #[error("continuation reached w+ at {got:?}, not at u+")]
    WrongEndpoint { got: Vec<f64> },
    #[error("w = {w} outside the validated range [{lo}, {hi}]")]
    OutsideNeighborhood { w: f64, lo: f64, hi: f64 },
    #[error("singular constraint Jacobian at w = {w}")]
    Singular { w: f64 },
    #[error(transparent)]
    Shock(#[from] ShockError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

fn norm_inf(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[derive(Debug, Clone)]
pub struct SystemModel {
    flux: FluxModel,
    l: DVector<f64>,
    g: DVector<f64>,
    r: f64,
    p: DMatrix<f64>,
    q: DVector<f64>,
}

impl SystemModel {
    pub fn new(flux: FluxModel, l: &[f64], g: &[f64], r: f64) -> Result<SystemModel, SystemError> {
        let n = flux.dimension();
        for (what, v) in [("L", l), ("G", g)] {
            if v.len() != n {
                return Err(SystemError::Dimension {
                    what,
                    got: v.len(),
                    expected: n,
                });
            }
            if v.iter().all(|x| *x == 0.0) {
                return Err(SystemError::ZeroVector(what));
            }
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(SystemError::InvalidR(r));
        }
        let l = DVector::from_column_slice(l);
        let g = DVector::from_column_slice(g);
        let ll = l.norm_squared();
        let p = DMatrix::identity(n, n) - &l * l.transpose() / ll;
        let q = &l / ll;
        Ok(SystemModel { flux, l, g, r, p, q })
    }

    pub fn dimension(&self) -> usize {
        self.flux.dimension()
    }

    pub fn flux(&self) -> &FluxModel {
        &self.flux
    }

    pub fn l(&self) -> &DVector<f64> {
        &self.l
    }

    pub fn g(&self) -> &DVector<f64> {
        &self.g
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Orthogonal projector with kernel `span{L}`.
    pub fn projector(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// Covector `Q` with `Q.L = 1`.
    pub fn covector(&self) -> &DVector<f64> {
        &self.q
    }

    pub fn eval(&self, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(self.flux.eval(u.as_slice()))
    }

    pub fn jacobian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dimension();
        DMatrix::from_row_slice(n, n, &self.flux.jacobian(u.as_slice()))
    }

    /// Orthonormal rows spanning the complement of `L`.
    fn complement(&self) -> DMatrix<f64> {
        let n = self.dimension();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| self.l[a].abs().total_cmp(&self.l[b].abs()));
        let mut basis = vec![self.l.normalize()];
        for i in order {
            let mut v = DVector::zeros(n);
            v[i] = 1.0;
            for b in &basis {
                v -= b * b.dot(&v);
            }
            if v.norm() > 0.5 && basis.len() < n {
                basis.push(v.normalize());
            }
        }
        let rows: Vec<_> = basis[1..].iter().map(|b| b.transpose()).collect();
        DMatrix::from_rows(&rows)
    }
}

/// Eigenstructure of `Df(u)`, sorted by eigenvalue, with `l_i . r_j = delta_ij`.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub values: Vec<f64>,
    pub right: Vec<DVector<f64>>,
    pub left: Vec<DVector<f64>>,
}

fn null_vector(m: DMatrix<f64>) -> DVector<f64> {
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let i = svd.singular_values.argmin().0;
    vt.row(i).transpose()
}

pub fn spectral(sys: &SystemModel, u: &[f64]) -> Result<SpectralData, SystemError> {
    let n = sys.dimension();
    if u.len() != n {
        return Err(SystemError::Dimension {
            what: "state",
            got: u.len(),
            expected: n,
        });
    }
    let a = sys.jacobian(&DVector::from_column_slice(u));
    let eig = a.clone().schur().complex_eigenvalues();
    let scale = eig.iter().fold(a.norm().max(1e-300), |m, z| m.max(z.norm()));
    let fail = |detail: String| SystemError::NotStrictlyHyperbolic { u: u.to_vec(), detail };
    if let Some(z) = eig.iter().find(|z| z.im.abs() > 1e-10 * scale) {
        return Err(fail(format!("complex eigenvalue {} + {}i", z.re, z.im)));
    }
    let mut values: Vec<f64> = eig.iter().map(|z| z.re).collect();
    values.sort_by(f64::total_cmp);
    if let Some(w) = values.windows(2).find(|w| w[1] - w[0] <= 1e-8 * scale) {
        return Err(fail(format!("eigenvalues {} and {} coalesce", w[0], w[1])));
    }
    let mut right = Vec::with_capacity(n);
    let mut left = Vec::with_capacity(n);
    for &lam in &values {
        let shifted = &a - DMatrix::identity(n, n) * lam;
        let mut r = null_vector(shifted.clone());
        let big = r.iamax();
        if r[big] < 0.0 {
            r = -r;
        }
        let l = null_vector(shifted.transpose());
        let d = l.dot(&r);
        if d.abs() < 1e-12 {
            return Err(fail(format!("left and right eigenvectors orthogonal at {lam}")));
        }
        right.push(r);
        left.push(l / d);
    }
    Ok(SpectralData { values, right, left })
}

fn check_family(sys: &SystemModel, k: usize) -> Result<usize, SystemError> {
    let n = sys.dimension();
    if k == 0 || k > n {
        return Err(SystemError::BadFamily { k, n });
    }
    Ok(k - 1)
}

/// `(l_k . L)(G . r_k)` at `u`; `k` counts from 1.
pub fn main_assumption(sys: &SystemModel, u: &[f64], k: usize) -> Result<f64, SystemError> {
    let i = check_family(sys, k)?;
    let sd = spectral(sys, u)?;
    Ok(sd.left[i].dot(&sys.l) * sys.g.dot(&sd.right[i]))
}

/// `grad lambda_k . r_k` by central differencing along `r_k`.
pub fn genuine_nonlinearity(sys: &SystemModel, u: &[f64], k: usize) -> Result<f64, SystemError> {
    let i = check_family(sys, k)?;
    let sd = spectral(sys, u)?;
    let r = &sd.right[i];
    let u0 = DVector::from_column_slice(u);
    let h = 1e-5 * u0.amax().max(1.0);
    let lam = |v: DVector<f64>| spectral(sys, v.as_slice()).map(|d| d.values[i]);
    Ok((lam(&u0 + r * h)? - lam(&u0 - r * h)?) / (2.0 * h))
}

/// End states and speed of a system shock.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemTriple {
    pub u_minus: Vec<f64>,
    pub u_plus: Vec<f64>,
    pub s: f64,
}

impl SystemTriple {
    /// Validates the vector Rankine-Hugoniot relation at the given speed.
    pub fn new(sys: &SystemModel, u_minus: &[f64], u_plus: &[f64], s: f64) -> Result<SystemTriple, SystemError> {
        let n = sys.dimension();
        for (what, v) in [("uminus", u_minus), ("uplus", u_plus)] {
            if v.len() != n {
                return Err(SystemError::Dimension {
                    what,
                    got: v.len(),
                    expected: n,
                });
            }
        }
        let t = SystemTriple {
            u_minus: u_minus.to_vec(),
            u_plus: u_plus.to_vec(),
            s,
        };
        let residual = t.rh_residual(sys);
        if u_minus == u_plus {
            return Err(SystemError::CoincidentStates);
        }
        if !(residual <= 1e-12 * t.scale(sys)) {
            return Err(SystemError::RankineHugoniot { residual });
        }
        Ok(t)
    }

    /// Least-squares speed for the given states, then validated.
    pub fn with_speed(sys: &SystemModel, u_minus: &[f64], u_plus: &[f64]) -> Result<SystemTriple, SystemError> {
        if u_minus.len() != u_plus.len() {
            return Err(SystemError::Dimension {
                what: "uplus",
                got: u_plus.len(),
                expected: u_minus.len(),
            });
        }
        let du = DVector::from_column_slice(u_plus) - DVector::from_column_slice(u_minus);
        if du.norm() == 0.0 {
            return Err(SystemError::CoincidentStates);
        }
        let df = DVector::from_vec(sys.flux.eval(u_plus)) - DVector::from_vec(sys.flux.eval(u_minus));
        SystemTriple::new(sys, u_minus, u_plus, df.dot(&du) / du.norm_squared())
    }

    pub fn rh_residual(&self, sys: &SystemModel) -> f64 {
        let um = DVector::from_column_slice(&self.u_minus);
        let up = DVector::from_column_slice(&self.u_plus);
        norm_inf(&(sys.eval(&up) - sys.eval(&um) - (up - um) * self.s))
    }

    fn scale(&self, sys: &SystemModel) -> f64 {
        let um = DVector::from_column_slice(&self.u_minus);
        let up = DVector::from_column_slice(&self.u_plus);
        norm_inf(&sys.eval(&um))
            .max(norm_inf(&sys.eval(&up)))
            .max(norm_inf(&um))
            .max(norm_inf(&up))
            .max(1.0)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReductionOptions {
    /// Rows annihilating `L`, replacing the default orthonormal complement.
    pub complement: Option<DMatrix<f64>>,
    /// Extra range covered beyond each end state, relative to `|w+ - w-|`.
    pub margin: Option<f64>,
}

/// Second derivative of `Fhat` at an end state against its small-shock
/// leading-order value `grad lambda_k . r_k / ((l_k.L)(G.r_k)^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityProbe {
    pub w: f64,
    pub numeric: f64,
    pub predicted: f64,
}

/// `Phi(w)` on the validated range, plus the reduced chord.
#[derive(Debug, Clone)]
pub struct ReductionMap {
    sys: SystemModel,
    triple: SystemTriple,
    k: usize,
    b: DMatrix<f64>,
    um: DVector<f64>,
    fm: DVector<f64>,
    w_minus: f64,
    w_plus: f64,
    /// Continuation nodes sorted by `w`.
    nodes: Vec<(f64, DVector<f64>)>,
    scale: f64,
    probes: [ConvexityProbe; 2],
}

pub fn build_reduction(sys: &SystemModel, triple: &SystemTriple, k: usize) -> Result<ReductionMap, SystemError> {
    build_reduction_with(sys, triple, k, &ReductionOptions::default())
}

pub fn build_reduction_with(
    sys: &SystemModel,
    triple: &SystemTriple,
    k: usize,
    opts: &ReductionOptions,
) -> Result<ReductionMap, SystemError> {
    let triple = SystemTriple::new(sys, &triple.u_minus, &triple.u_plus, triple.s)?;
    check_family(sys, k)?;
    for u in [&triple.u_minus, &triple.u_plus] {
        let value = main_assumption(sys, u, k)?;
        if !(value > 0.0) {
            return Err(SystemError::MainAssumption { u: u.clone(), value });
        }
    }
    let n = sys.dimension();
    let b = match &opts.complement {
        Some(b) => {
            if b.nrows() != n - 1 || b.ncols() != n {
                return Err(SystemError::Dimension {
                    what: "complement rows",
                    got: b.nrows(),
                    expected: n - 1,
                });
            }
            let scale = b.amax() * sys.l.amax();
            if (b * &sys.l).amax() > 1e-12 * scale || b.rank(1e-10 * b.amax()) != n - 1 {
                return Err(SystemError::InvalidComplement);
            }
            b.clone()
        }
        None => sys.complement(),
    };
    let um = DVector::from_column_slice(&triple.u_minus);
    let up = DVector::from_column_slice(&triple.u_plus);
    let (w_minus, w_plus) = (sys.g.dot(&um), sys.g.dot(&up));
    let width = (w_plus - w_minus).abs();
    if width <= 1e-14 * um.amax().max(1.0) {
        return Err(SystemError::DegenerateCoupling);
    }
    let mut map = ReductionMap {
        sys: sys.clone(),
        fm: sys.eval(&um),
        triple,
        k,
        b,
        um: um.clone(),
        w_minus,
        w_plus,
        nodes: vec![(w_minus, um.clone())],
        scale: (um.amax().max(up.amax()) + (&up - &um).amax()).max(1e-300),
        probes: [ConvexityProbe {
            w: 0.0,
            numeric: 0.0,
            predicted: 0.0,
        }; 2],
    };
    let margin = opts.margin.unwrap_or(0.25) * width;
    let dir = (w_plus - w_minus).signum();
    let forward = map.continue_from(&um, w_minus, w_plus, width, true)?;
    let reached = forward.last().map(|n| n.1.clone()).unwrap_or_else(|| um.clone());
    if (&reached - &up).amax() > 1e-9 * map.scale {
        return Err(SystemError::WrongEndpoint {
            got: reached.iter().copied().collect(),
        });
    }
    let beyond = map.continue_from(&up, w_plus, w_plus + dir * margin, width, false)?;
    let behind = map.continue_from(&um, w_minus, w_minus - dir * margin, width, false)?;
    let mut nodes = forward;
    nodes.extend(beyond);
    nodes.extend(behind);
    nodes.push((w_plus, up.clone()));
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    nodes.dedup_by(|a, b| a.0 == b.0);
    map.nodes.extend(nodes);
    map.nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    map.nodes.dedup_by(|a, b| a.0 == b.0);

    map.probes = [map.probe(w_minus)?, map.probe(w_plus)?];
    Ok(map)
}

impl ReductionMap {
    pub fn system(&self) -> &SystemModel {
        &self.sys
    }

    pub fn triple(&self) -> &SystemTriple {
        &self.triple
    }

    pub fn family(&self) -> usize {
        self.k
    }

    pub fn w_minus(&self) -> f64 {
        self.w_minus
    }

    pub fn w_plus(&self) -> f64 {
        self.w_plus
    }

    /// Range of `w` on which Newton converged during construction.
    pub fn validated_range(&self) -> (f64, f64) {
        (self.nodes[0].0, self.nodes[self.nodes.len() - 1].0)
    }

    pub fn convexity_probes(&self) -> [ConvexityProbe; 2] {
        self.probes
    }

    fn constraint(&self, u: &DVector<f64>, w: f64) -> DVector<f64> {
        let n = self.sys.dimension();
        let v = self.sys.eval(u) - &self.fm - (u - &self.um) * self.triple.s;
        let top = &self.b * v;
        let mut out = DVector::zeros(n);
        out.rows_mut(0, n - 1).copy_from(&top);
        out[n - 1] = self.sys.g.dot(u) - w;
        out
    }

    fn constraint_jacobian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let n = self.sys.dimension();
        let a = self.sys.jacobian(u) - DMatrix::identity(n, n) * self.triple.s;
        let top = &self.b * a;
        let mut j = DMatrix::zeros(n, n);
        j.rows_mut(0, n - 1).copy_from(&top);
        j.row_mut(n - 1).copy_from(&self.sys.g.transpose());
        j
    }

    fn newton(&self, guess: &DVector<f64>, w: f64) -> Option<DVector<f64>> {
        let tol = 1e-13 * self.scale.max(norm_inf(&self.fm)).max(1.0);
        let mut u = guess.clone();
        let mut e = self.constraint(&u, w);
        let mut en = norm_inf(&e);
        for _ in 0..60 {
            let du = self.constraint_jacobian(&u).lu().solve(&(-&e))?;
            let mut t = 1.0;
            let (next, nn) = loop {
                let cand = &u + &du * t;
                let ce = self.constraint(&cand, w);
                let cn = norm_inf(&ce);
                if cn.is_finite() && (cn <= en * (1.0 - 1e-4 * t) || cn <= tol) {
                    break (Some((cand, ce)), cn);
                }
                t *= 0.5;
                if t < 1.0 / 1024.0 {
                    break (None, cn);
                }
            };
            let (cand, ce) = next?;
            let step = norm_inf(&du) * t;
            u = cand;
            e = ce;
            en = nn;
            if en <= tol && step <= 1e-12 * self.scale {
                return Some(u);
            }
        }
        (en <= tol).then_some(u)
    }

    fn tangent(&self, u: &DVector<f64>) -> Option<DVector<f64>> {
        let n = self.sys.dimension();
        let mut rhs = DVector::zeros(n);
        rhs[n - 1] = 1.0;
        self.constraint_jacobian(u).lu().solve(&rhs)
    }

    /// Continuation from `(w0, u0)` to `w1`. With `strict` a failure is an
    /// error; otherwise the covered part is returned.
    fn continue_from(
        &self,
        u0: &DVector<f64>,
        w0: f64,
        w1: f64,
        width: f64,
        strict: bool,
    ) -> Result<Vec<(f64, DVector<f64>)>, SystemError> {
        let (h_max, h_min) = (width / 64.0, width / 4096.0);
        let dir = (w1 - w0).signum();
        let mut h = h_max;
        let (mut w, mut u) = (w0, u0.clone());
        let mut out = Vec::new();
        while (w1 - w) * dir > 0.0 {
            let wn = if (w1 - w) * dir <= h * (1.0 + 1e-12) {
                w1
            } else {
                w + dir * h
            };
            let pred = self.tangent(&u).map(|t| &u + t * (wn - w));
            match pred.and_then(|p| self.newton(&p, wn)) {
                Some(un) => {
                    w = wn;
                    u = un.clone();
                    out.push((wn, un));
                    h = (2.0 * h).min(h_max);
                }
                None => {
                    h *= 0.5;
                    if h < h_min {
                        if strict {
                            return Err(SystemError::NewtonDivergence { w: wn });
                        }
                        break;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `Phi(w)`.
    pub fn phi(&self, w: f64) -> Result<DVector<f64>, SystemError> {
        let (lo, hi) = self.validated_range();
        if !(w >= lo && w <= hi) {
            return Err(SystemError::OutsideNeighborhood { w, lo, hi });
        }
        let i = self.nodes.partition_point(|n| n.0 < w);
        if i < self.nodes.len() && self.nodes[i].0 == w {
            return Ok(self.nodes[i].1.clone());
        }
        let (a, b) = (&self.nodes[i - 1], &self.nodes[i]);
        let t = (w - a.0) / (b.0 - a.0);
        let guess = &a.1 * (1.0 - t) + &b.1 * t;
        self.newton(&guess, w).ok_or(SystemError::NewtonDivergence { w })
    }

    /// `Phi'(w)`.
    pub fn phi_prime(&self, w: f64) -> Result<DVector<f64>, SystemError> {
        let u = self.phi(w)?;
        self.tangent(&u).ok_or(SystemError::Singular { w })
    }

    /// `Fhat(w) = Q.(f(Phi) - f(u-) - s (Phi - u-))`.
    pub fn reduced_chord(&self, w: f64) -> Result<f64, SystemError> {
        let u = self.phi(w)?;
        Ok(self.residual_vector(&u).dot(&self.sys.q))
    }

    /// `Fhat'(w)`.
    pub fn reduced_slope(&self, w: f64) -> Result<f64, SystemError> {
        let u = self.phi(w)?;
        let t = self.tangent(&u).ok_or(SystemError::Singular { w })?;
        let n = self.sys.dimension();
        let a = self.sys.jacobian(&u) - DMatrix::identity(n, n) * self.triple.s;
        Ok(self.sys.q.dot(&(a * t)))
    }

    fn fd_step(&self) -> f64 {
        1e-4 * (self.w_plus - self.w_minus).abs()
    }

    /// `Fhat''(w)` by central differences of `Fhat'`.
    pub fn reduced_curvature(&self, w: f64) -> Result<f64, SystemError> {
        let h = self.fd_step();
        Ok((self.reduced_slope(w + h)? - self.reduced_slope(w - h)?) / (2.0 * h))
    }

    fn reduced_third(&self, w: f64) -> Result<f64, SystemError> {
        let h = 20.0 * self.fd_step();
        Ok((self.reduced_slope(w + h)? - 2.0 * self.reduced_slope(w)? + self.reduced_slope(w - h)?) / (h * h))
    }

    /// `f(u) - f(u-) - s (u - u-)`.
    pub fn residual_vector(&self, u: &DVector<f64>) -> DVector<f64> {
        self.sys.eval(u) - &self.fm - (u - &self.um) * self.triple.s
    }

    /// Constraint residuals `(|B.(f(Phi) - ...)|, |G.Phi - w|)` at `w`.
    pub fn constraint_residuals(&self, w: f64) -> Result<(f64, f64), SystemError> {
        let u = self.phi(w)?;
        let v = self.residual_vector(&u);
        Ok((norm_inf(&(&self.sys.p * v)), (self.sys.g.dot(&u) - w).abs()))
    }

    fn probe(&self, w: f64) -> Result<ConvexityProbe, SystemError> {
        let u = self.phi(w)?;
        let sd = spectral(&self.sys, u.as_slice())?;
        let i = self.k - 1;
        let gnl = genuine_nonlinearity(&self.sys, u.as_slice(), self.k)?;
        let gr = self.sys.g.dot(&sd.right[i]);
        Ok(ConvexityProbe {
            w,
            numeric: self.reduced_curvature(w)?,
            predicted: gnl / (sd.left[i].dot(&self.sys.l) * gr * gr),
        })
    }

    /// Scalar flux whose chord at speed `s` between `w-` and `w+` is `R Fhat`.
    pub fn reduced_flux(&self) -> ReducedFlux {
        ReducedFlux { map: self.clone() }
    }

    pub fn reduced_chord_function(&self) -> Result<ChordFunction, SystemError> {
        let triple = ShockTriple {
            u_minus: self.w_minus,
            u_plus: self.w_plus,
            s: self.triple.s,
        };
        Ok(ChordFunction::decompose(Arc::new(self.reduced_flux()), triple)?)
    }

    /// `sign(lambda_k(Phi(w)) - s)` against `sign(Fhat'(w))` at `count`
    /// states evenly spaced strictly between `w-` and `w+`.
    pub fn sign_samples(&self, count: usize) -> Result<Vec<SignSample>, SystemError> {
        (1..=count)
            .map(|i| {
                let w = self.w_minus + (self.w_plus - self.w_minus) * i as f64 / (count + 1) as f64;
                let u = self.phi(w)?;
                let sd = spectral(&self.sys, u.as_slice())?;
                Ok(SignSample {
                    w,
                    speed_gap: sd.values[self.k - 1] - self.triple.s,
                    slope: self.reduced_slope(w)?,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignSample {
    pub w: f64,
    /// `lambda_k(u) - s`.
    pub speed_gap: f64,
    /// `Fhat'(w)`.
    pub slope: f64,
}

impl SignSample {
    pub fn consistent(&self) -> bool {
        self.speed_gap.signum() == self.slope.signum()
    }
}

/// `R Q.(f(Phi(w)) - s Phi(w)) + s w`, shifted so its chord is `R Fhat`.
#[derive(Debug, Clone)]
pub struct ReducedFlux {
    map: ReductionMap,
}

impl ScalarFlux for ReducedFlux {
    fn value(&self, w: f64) -> f64 {
        let m = &self.map;
        m.reduced_chord(w)
            .map(|f| m.sys.r * f + m.triple.s * w)
            .unwrap_or(f64::NAN)
    }

    fn derivative(&self, w: f64, order: usize) -> f64 {
        let m = &self.map;
        let r = m.sys.r;
        let v = match order {
            1 => m.reduced_slope(w).map(|d| r * d + m.triple.s),
            2 => m.reduced_curvature(w).map(|d| r * d),
            3 => m.reduced_third(w).map(|d| r * d),
            _ => Ok(f64::NAN),
        };
        v.unwrap_or(f64::NAN)
    }
}

/// Admissibility of one jump of a lifted profile.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpTranslation {
    pub u_left: Vec<f64>,
    pub u_right: Vec<f64>,
    /// Left and right states coincide: vacuously admissible.
    pub no_jump: bool,
    pub rh_residual: f64,
    pub lambda_left: f64,
    pub lambda_right: f64,
    /// `lambda_k(u_r) < s < lambda_k(u_l)`.
    pub lax: bool,
    /// Signs of `lambda_k - s` and `Fhat'` agree at both states.
    pub sign_consistent: bool,
    pub liu: Option<LiuTrace>,
}

/// Speeds along the k-shock curve from `u_l`, up to the point nearest `u_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiuTrace {
    /// `(|u - u_l|, sigma)` at each traced point, including `u_r`.
    pub samples: Vec<(f64, f64)>,
    /// Distance from the traced curve to `u_r`.
    pub miss: f64,
    /// Smallest `sigma - s` strictly before `u_r`.
    pub min_margin: f64,
    pub satisfied: bool,
}

pub fn translate_admissibility(
    map: &ReductionMap,
    u_left: &[f64],
    u_right: &[f64],
) -> Result<JumpTranslation, SystemError> {
    let sys = &map.sys;
    let s = map.triple.s;
    let i = map.k - 1;
    let (ul, ur) = (DVector::from_column_slice(u_left), DVector::from_column_slice(u_right));
    let rh = norm_inf(&(sys.eval(&ur) - sys.eval(&ul) - (&ur - &ul) * s));
    let (sl, sr) = (spectral(sys, u_left)?, spectral(sys, u_right)?);
    let (lambda_left, lambda_right) = (sl.values[i], sr.values[i]);
    let slope = |u: &DVector<f64>| map.reduced_slope(sys.g.dot(u));
    let sign_consistent =
        (lambda_left - s).signum() == slope(&ul)?.signum() && (lambda_right - s).signum() == slope(&ur)?.signum();
    let no_jump = (&ul - &ur).amax() <= 1e-6 * map.scale;
    let liu = if no_jump {
        None
    } else {
        Some(liu_trace(sys, &ul, &ur, s, map.k)?)
    };
    Ok(JumpTranslation {
        u_left: u_left.to_vec(),
        u_right: u_right.to_vec(),
        no_jump,
        rh_residual: rh,
        lambda_left,
        lambda_right,
        lax: no_jump || (lambda_right < s && s < lambda_left),
        sign_consistent,
        liu,
    })
}

/// Continuation of the k-shock curve through `u_l`, written as
/// `u = u_l + tau d`, `|d| = 1`, with the divided difference
/// `(f(u) - f(u_l)) / tau = sigma d` so that `tau = 0` is regular.
/// Stepped in `tau` over 200 steps to 1.5 times `|u_r - u_l|`.
pub fn liu_trace(
    sys: &SystemModel,
    ul: &DVector<f64>,
    ur: &DVector<f64>,
    s: f64,
    k: usize,
) -> Result<LiuTrace, SystemError> {
    const STEPS: usize = 200;
    let n = sys.dimension();
    let i = check_family(sys, k)?;
    let sd = spectral(sys, ul.as_slice())?;
    let dist = (ur - ul).norm();
    let mut d = sd.right[i].normalize();
    if d.dot(&(ur - ul)) < 0.0 {
        d = -d;
    }
    let fl = sys.eval(ul);
    let fscale = norm_inf(&fl).max(ul.amax()).max(1.0);
    let solve = |tau: f64, d0: &DVector<f64>, sigma0: f64| -> Option<(DVector<f64>, f64)> {
        let (mut d, mut sigma) = (d0.clone(), sigma0);
        for _ in 0..50 {
            let u = ul + &d * tau;
            let a = sys.jacobian(&u);
            let slope = if tau == 0.0 {
                &a * &d
            } else {
                (sys.eval(&u) - &fl) / tau
            };
            let mut e = DVector::zeros(n + 1);
            e.rows_mut(0, n).copy_from(&(slope - &d * sigma));
            e[n] = d.norm_squared() - 1.0;
            let mut m = DMatrix::zeros(n + 1, n + 1);
            m.view_mut((0, 0), (n, n))
                .copy_from(&(a - DMatrix::identity(n, n) * sigma));
            m.view_mut((0, n), (n, 1)).copy_from(&(-&d));
            m.view_mut((n, 0), (1, n)).copy_from(&(d.transpose() * 2.0));
            let dy = m.lu().solve(&(-e))?;
            d += dy.rows(0, n);
            sigma += dy[n];
            if dy.amax() <= 1e-15 * fscale {
                break;
            }
        }
        let u = ul + &d * tau;
        let res = if tau == 0.0 {
            0.0
        } else {
            norm_inf(&(sys.eval(&u) - &fl - (&u - ul) * sigma))
        };
        (res <= 1e-11 * fscale).then_some((d, sigma))
    };
    let (mut d, mut sigma) = solve(0.0, &d, sd.values[i]).ok_or(SystemError::NewtonDivergence { w: sys.g.dot(ul) })?;
    let h = 1.5 * dist / STEPS as f64;
    let mut samples = vec![(0.0, sigma)];
    let mut at_ur = None;
    for j in 1..=STEPS {
        let tau = h * j as f64;
        if at_ur.is_none() && tau >= dist {
            if let Some((dr, sr)) = solve(dist, &d, sigma) {
                at_ur = Some((ul + &dr * dist - ur).norm());
                samples.push((dist, sr));
            }
        }
        let Some((dn, sn)) = solve(tau, &d, sigma) else { break };
        d = dn;
        sigma = sn;
        samples.push((tau, sigma));
    }
    let miss = at_ur.unwrap_or(f64::INFINITY);
    let min_margin = samples
        .iter()
        .filter(|p| p.0 > 0.0 && p.0 < dist * (1.0 - 1e-9))
        .map(|p| p.1 - s)
        .fold(f64::INFINITY, f64::min);
    Ok(LiuTrace {
        satisfied: miss <= 1e-8 * fscale && min_margin >= -1e-10 * fscale,
        samples,
        miss,
        min_margin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemPoint {
    pub xi: f64,
    pub w: f64,
    pub z: f64,
    pub dz: f64,
    pub ddz: f64,
    pub q: f64,
}

/// A scalar profile for `R Fhat` lifted through `Phi`.
#[derive(Debug, Clone)]
pub struct SystemProfile {
    pub scalar: RadiativeProfile,
    pub points: Vec<SystemPoint>,
    pub states: Vec<Vec<f64>>,
    pub jumps: Vec<(f64, JumpTranslation)>,
    /// Sup norms of the residuals of `L z' = f(u) - f(u-) - s(u - u-)` and
    /// `eps z'' - R z + G.u = 0`.
    pub residuals: (f64, f64),
}

/// Profile of the system with `eps` the coefficient of `q_xx`.
pub fn system_profile(map: &ReductionMap, eps: f64, opts: &ProfileOptions) -> Result<SystemProfile, SystemError> {
    let chord = map.reduced_chord_function()?;
    let r = map.sys.r;
    let scalar = assemble_profile_with(&chord, eps / r, opts)?;
    let mut points = Vec::with_capacity(scalar.grid().len());
    let mut states = Vec::with_capacity(scalar.grid().len());
    let (mut res1, mut res2) = (0.0f64, 0.0f64);
    for p in scalar.grid() {
        let u = map.phi(p.u)?;
        let pt = SystemPoint {
            xi: p.xi,
            w: p.u,
            z: p.z / r,
            dz: p.dz / r,
            ddz: p.ddz / r,
            q: -p.dz / r,
        };
        res1 = res1.max(norm_inf(&(&map.sys.l * pt.dz - map.residual_vector(&u))));
        res2 = res2.max((eps * pt.ddz - r * pt.z + map.sys.g.dot(&u)).abs());
        points.push(pt);
        states.push(u.iter().copied().collect());
    }
    let jumps = scalar
        .jumps()
        .iter()
        .map(|j| {
            let ul = map.phi(j.u_left)?;
            let ur = map.phi(j.u_right)?;
            Ok((j.xi0, translate_admissibility(map, ul.as_slice(), ur.as_slice())?))
        })
        .collect::<Result<Vec<_>, SystemError>>()?;
    Ok(SystemProfile {
        scalar,
        points,
        states,
        jumps,
        residuals: (res1, res2),
    })
}

impl SystemProfile {
    /// Columns `xi,w,u1..un,z,dz,ddz,q`.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, Vec::len);
        let mut s = String::from("xi,w");
        for i in 1..=n {
            let _ = write!(s, ",u{i}");
        }
        s.push_str(",z,dz,ddz,q\n");
        for (p, u) in self.points.iter().zip(&self.states) {
            let _ = write!(s, "{},{}", fmt_num(p.xi), fmt_num(p.w));
            for x in u {
                let _ = write!(s, ",{}", fmt_num(*x));
            }
            let _ = writeln!(
                s,
                ",{},{},{},{}",
                fmt_num(p.z),
                fmt_num(p.dz),
                fmt_num(p.ddz),
                fmt_num(p.q)
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decoupled() -> SystemModel {
        let f = FluxModel::parse_components(&["u1^2/2", "3*u2"]).unwrap();
        SystemModel::new(f, &[1.0, 0.0], &[1.0, 0.0], 1.0).unwrap()
    }

    #[test]
    fn projector_and_covector() {
        let f = FluxModel::parse_components(&["u1^2/2 + u2^2/2", "u1*u2"]).unwrap();
        let sys = SystemModel::new(f, &[1.0, 2.0], &[1.0, 0.0], 1.0).unwrap();
        assert!((sys.projector() * sys.l()).amax() < 1e-15);
        assert!((sys.covector().dot(sys.l()) - 1.0).abs() < 1e-15);
        assert!((sys.complement() * sys.l()).amax() < 1e-15);
    }

    #[test]
    fn spectral_diagonal() {
        let sd = spectral(&decoupled(), &[1.0, 0.0]).unwrap();
        assert_eq!(sd.values, vec![1.0, 3.0]);
        assert!((sd.right[0][0] - 1.0).abs() < 1e-14 && sd.right[0][1].abs() < 1e-14);
        assert!((sd.left[0][0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn jordan_block_rejected() {
        let f = FluxModel::parse_components(&["u1 + u2", "u2"]).unwrap();
        let sys = SystemModel::new(f, &[1.0, 0.0], &[1.0, 0.0], 1.0).unwrap();
        assert!(matches!(
            spectral(&sys, &[0.0, 0.0]),
            Err(SystemError::NotStrictlyHyperbolic { .. })
        ));
    }

    #[test]
    fn decoupled_reduction_is_burgers() {
        let sys = decoupled();
        let t = SystemTriple::new(&sys, &[1.0, 0.3], &[-1.0, 0.3], 0.0).unwrap();
        let map = build_reduction(&sys, &t, 1).unwrap();
        for i in 0..=20 {
            let w = -1.0 + 0.1 * i as f64;
            let u = map.phi(w).unwrap();
            assert!((u[0] - w).abs() < 1e-14 && (u[1] - 0.3).abs() < 1e-14);
            assert!((map.reduced_chord(w).unwrap() - (w * w / 2.0 - 0.5)).abs() < 1e-12);
        }
    }
}
