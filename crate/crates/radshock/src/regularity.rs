//! Smoothness of convex-flux profiles as a function of the shock size.
//!
//! With `d = |u- - u+|` the scaled flux is `f_d(u) = F(u+ + d u; s) / d^2`
//! on `[0, 1]`, and the profile is an orbit of
//!
//! ```text
//! u' = f_d'(u) v,   v' = (-d^2 f_d''(u) v^2 - v + f_d(u)) / d^2
//! ```
//!
//! joining the saddles `(0, 0)` and `(1, 0)` through the sink
//! `(ubar, vbar2)`, `f_d'(ubar) = 0`. The orbit is `C^n` in `u` at the sink
//! as long as the expansion coefficients `wbar_j`, `j <= n`, can be solved
//! for, which needs `beta_j < 0`. Every quantity below depends on the sink
//! only through `D = 1 - 4 d^2 f_d''(ubar) |f_d(ubar)|`, and
//! `beta_j = 0` exactly when `sqrt(D) = j / (j + 2)`.
//!
//! A radiation coefficient `eps` in `-eps q_xx + q + u_x = 0` is absorbed by
//! rescaling `x` by `sqrt(eps)`, which multiplies the flux by `sqrt(eps)`.

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::flux::{Jet, ScalarFlux};
use crate::ode::{Control, Dopri5};
use crate::profile::fmt_num;
use crate::shock::{ChordFunction, ShockError};

pub const MAX_ORDER: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegularityError {
    #[error(transparent)]
    Shock(#[from] ShockError),
    #[error("chord has {0} critical points; the scaled analysis needs exactly one")]
    NotConvex(usize),
    #[error("shock size {size} is not below eps0 = {eps0}: the sink equilibrium is complex")]
    AboveThreshold { size: f64, eps0: f64 },
    #[error("expansion order {0} exceeds the supported maximum {MAX_ORDER}")]
    OrderTooHigh(usize),
    #[error("flux provides no Taylor coefficients of order {0}")]
    NotDifferentiable(usize),
    #[error("radiation coefficient must be positive, got {0}")]
    InvalidRadiation(f64),
}

/// `f_d` for one chord, in the oriented frame.
#[derive(Debug, Clone)]
pub struct ScaledFlux {
    chord: ChordFunction,
    radiation: f64,
    k: f64,
    size: f64,
    ubar: f64,
}

pub fn scaled_flux(chord: &ChordFunction, radiation: f64) -> Result<ScaledFlux, RegularityError> {
    if !(radiation > 0.0 && radiation.is_finite()) {
        return Err(RegularityError::InvalidRadiation(radiation));
    }
    let crit = chord.critical_points();
    if crit.len() != 1 || !chord.structured() {
        return Err(RegularityError::NotConvex(crit.len()));
    }
    Ok(ScaledFlux {
        chord: chord.clone(),
        radiation,
        k: radiation.sqrt(),
        size: chord.size(),
        ubar: (crit[0] - chord.lo()) / chord.size(),
    })
}

impl ScaledFlux {
    pub fn size(&self) -> f64 {
        self.size
    }

    pub fn radiation(&self) -> f64 {
        self.radiation
    }

    pub fn ubar(&self) -> f64 {
        self.ubar
    }

    fn x(&self, u: f64) -> f64 {
        self.chord.lo() + self.size * u
    }

    pub fn value(&self, u: f64) -> f64 {
        self.k * self.chord.value(self.x(u)) / (self.size * self.size)
    }

    /// Derivative of order 0..=3.
    pub fn derivative(&self, u: f64, order: usize) -> f64 {
        self.k * self.chord.derivative(self.x(u), order) * self.size.powi(order as i32 - 2)
    }

    /// Taylor coefficients of `f_d` about `u`.
    pub fn taylor(&self, u: f64, order: usize) -> Option<Jet> {
        let mut j = self.chord.taylor(self.x(u), order)?;
        for (i, c) in j.0.iter_mut().enumerate() {
            *c *= self.k * self.size.powi(i as i32 - 2);
        }
        Some(j)
    }

    /// `D = 1 - 4 d^2 f_d''(ubar) |f_d(ubar)|`.
    pub fn discriminant(&self) -> f64 {
        let d2 = self.size * self.size;
        1.0 - 4.0 * d2 * self.derivative(self.ubar, 2) * self.value(self.ubar).abs()
    }

    /// `D` with roundoff below zero (`|D| < 1e-12`, the size sitting on
    /// `eps_0`) read as zero; `None` above the threshold.
    fn sink_discriminant(&self) -> Option<f64> {
        let d = self.discriminant();
        if d >= 0.0 {
            Some(d)
        } else if d > -1e-12 {
            Some(0.0)
        } else {
            None
        }
    }

    fn above(&self) -> RegularityError {
        RegularityError::AboveThreshold {
            size: self.size,
            eps0: threshold(&self.chord, self.radiation, 0),
        }
    }
}

/// `(ubar, vbar2)`.
pub fn sink_equilibrium(sf: &ScaledFlux) -> Result<(f64, f64), RegularityError> {
    let d = sf.sink_discriminant().ok_or_else(|| sf.above())?;
    // Rationalized root nearer zero; avoids cancellation for small shocks.
    let fbar = sf.value(sf.ubar).abs();
    Ok((sf.ubar, -2.0 * fbar / (1.0 + d.sqrt())))
}

/// `(lambda1, lambda2)`, the eigenvalues at the sink.
pub fn sink_eigenvalues(sf: &ScaledFlux) -> Result<(f64, f64), RegularityError> {
    let (u, v) = sink_equilibrium(sf)?;
    let d2 = sf.size * sf.size;
    let disc = sf.sink_discriminant().unwrap_or(0.0);
    Ok((sf.derivative(u, 2) * v, -disc.sqrt() / d2))
}

/// Jacobian of the orbit system at the sink; lower triangular since
/// `f_d'(ubar) = 0`.
pub fn sink_jacobian(sf: &ScaledFlux) -> Result<[[f64; 2]; 2], RegularityError> {
    let (u, v) = sink_equilibrium(sf)?;
    let (f2, f3) = (sf.derivative(u, 2), sf.derivative(u, 3));
    let d2 = sf.size * sf.size;
    Ok([[f2 * v, 0.0], [-f3 * v * v, -2.0 * f2 * v - 1.0 / d2]])
}

/// Expansion `v = sum wbar_j (u - ubar)^j` of the orbit at the sink.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub wbar: Vec<f64>,
    /// `beta_j` from the closed form.
    pub beta: Vec<f64>,
    /// `beta_j` read off as the coefficient of `wbar_j` in `c_j`.
    pub beta_extracted: Vec<f64>,
}

/// Taylor coefficients of `F_n = -d^2 A'' W^2 - W + A - d^2 A' W' W` about
/// `ubar`, with `A = f_d` and `W = sum wbar_j t^j`.
fn residual_coeffs(a: &Jet, w: &[f64], d2: f64, order: usize) -> Vec<f64> {
    let a0 = a.truncate(order);
    let a1 = a.deriv().truncate(order);
    let a2 = a.deriv().deriv().truncate(order);
    let mut wc = w.to_vec();
    wc.resize(order + 1, 0.0);
    let wj = Jet(wc);
    let w1 = wj.deriv().truncate(order);
    let f = a2
        .mul(&wj.mul(&wj))
        .scale(-d2)
        .sub(&wj)
        .add(&a0)
        .sub(&a1.mul(&w1).mul(&wj).scale(d2));
    f.0
}

pub fn expansion(sf: &ScaledFlux, n_max: usize) -> Result<Expansion, RegularityError> {
    if n_max > MAX_ORDER {
        return Err(RegularityError::OrderTooHigh(n_max));
    }
    let (u, w0) = sink_equilibrium(sf)?;
    let a = sf
        .taylor(u, n_max + 2)
        .ok_or(RegularityError::NotDifferentiable(n_max + 2))?;
    let d2 = sf.size * sf.size;
    let f2 = sf.derivative(u, 2);
    let mut wbar = vec![w0];
    let mut beta = vec![-(d2 * 2.0 * f2 * w0 + 1.0)];
    let mut beta_extracted = vec![beta[0]];
    for j in 1..=n_max {
        let mut trial = wbar.clone();
        trial.push(0.0);
        let alpha = residual_coeffs(&a, &trial, d2, n_max)[j];
        trial[j] = 1.0;
        let with_one = residual_coeffs(&a, &trial, d2, n_max)[j];
        let b = -(d2 * (2.0 + j as f64) * f2 * w0 + 1.0);
        beta.push(b);
        beta_extracted.push(with_one - alpha);
        wbar.push(-alpha / b);
    }
    Ok(Expansion {
        wbar,
        beta,
        beta_extracted,
    })
}

// Sink data of the family with u+ fixed and size d: (F''(z*), F(z*)).
fn family_sink(flux: &dyn ScalarFlux, lo: f64, d: f64) -> Option<(f64, f64, f64)> {
    let hi = lo + d;
    let fhi = flux.value(hi);
    let s = (fhi - flux.value(lo)) / d;
    let fp = |u: f64| flux.derivative(u, 1) - s;
    let n = 64;
    let mut bracket = None;
    let mut prev = (lo, fp(lo));
    for i in 1..=n {
        let x = lo + d * i as f64 / n as f64;
        let v = fp(x);
        if (v > 0.0) != (prev.1 > 0.0) {
            if bracket.is_some() {
                return None;
            }
            bracket = Some((prev.0, x, prev.1));
        }
        prev = (x, v);
    }
    let (mut a, mut b, fa) = bracket?;
    if fa > 0.0 {
        return None;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if fp(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let z = 0.5 * (a + b);
    let big_f = flux.value(z) - fhi - s * (z - hi);
    if !(big_f < 0.0) {
        return None;
    }
    Some((z, flux.derivative(z, 2), big_f))
}

fn bisect_size(chord: &ChordFunction, g: impl Fn(f64) -> f64) -> f64 {
    let d0 = chord.size();
    let (mut a, mut b) = (d0, d0);
    if g(d0) > 0.0 {
        let mut k = 0;
        while g(b) > 0.0 {
            b *= 2.0;
            k += 1;
            if k > 64 {
                return f64::INFINITY;
            }
        }
        a = b / 2.0;
    } else {
        let mut k = 0;
        while g(a) <= 0.0 {
            a /= 2.0;
            k += 1;
            if k > 64 {
                return 0.0;
            }
        }
        b = a * 2.0;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if g(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Size `eps_j` at which `beta_j` vanishes along the family of shocks with
/// the same `u+` and flux: the profile is `C^{j+1}` below it.
pub fn threshold(chord: &ChordFunction, radiation: f64, j: usize) -> f64 {
    let flux = chord.flux().clone();
    let lo = chord.lo();
    let target = j as f64 / (j as f64 + 2.0);
    bisect_size(chord, |d| match family_sink(flux.as_ref(), lo, d) {
        Some((_, f2, big_f)) => {
            let disc = 1.0 - 4.0 * radiation * f2 * big_f.abs();
            disc.signum() * disc.abs().sqrt() - target
        }
        None => -1.0,
    })
}

/// Largest size for which `1 - 4 d^2 f_d'' |f_d|` stays nonnegative on
/// all of `[0, 1]`.
pub fn epsilon_bar(chord: &ChordFunction, radiation: f64) -> f64 {
    let flux = chord.flux().clone();
    let lo = chord.lo();
    bisect_size(chord, |d| {
        let Some((z, _, _)) = family_sink(flux.as_ref(), lo, d) else {
            return -1.0;
        };
        let hi = lo + d;
        let fhi = flux.value(hi);
        let s = (fhi - flux.value(lo)) / d;
        let big_f = |u: f64| flux.value(u) - fhi - s * (u - hi);
        let n = 512;
        let worst = (0..=n)
            .map(|i| lo + d * i as f64 / n as f64)
            .chain(std::iter::once(z))
            .map(|u| flux.derivative(u, 2) * big_f(u).abs())
            .fold(f64::NEG_INFINITY, f64::max);
        1.0 - 4.0 * radiation * worst
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictedClass {
    /// `C^k` with `k >= 1`.
    Smooth(usize),
    /// Continuous, smoothness not covered by the thresholds.
    Continuous,
    Discontinuous,
}

impl fmt::Display for PredictedClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredictedClass::Smooth(k) => write!(f, "C{k}"),
            PredictedClass::Continuous => write!(f, "C0"),
            PredictedClass::Discontinuous => write!(f, "discontinuous"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub shock_size: f64,
    pub radiation: f64,
    pub epsilon_bar: f64,
    /// `eps_0 > eps_1 > ...`; sufficient, not necessarily sharp.
    pub thresholds: Vec<f64>,
    pub ubar: f64,
    /// Present below `eps_0`.
    pub vbar2: Option<f64>,
    pub lambdas: Option<(f64, f64)>,
    pub expansion: Option<Expansion>,
    pub class: PredictedClass,
}

pub fn regularity_report(
    chord: &ChordFunction,
    radiation: f64,
    n_max: usize,
) -> Result<RegularityReport, RegularityError> {
    if n_max > MAX_ORDER {
        return Err(RegularityError::OrderTooHigh(n_max));
    }
    let sf = scaled_flux(chord, radiation)?;
    let thresholds: Vec<f64> = (0..=n_max).map(|j| threshold(chord, radiation, j)).collect();
    let eps_bar = epsilon_bar(chord, radiation);
    let size = sf.size;
    let below = sf.sink_discriminant().is_some();
    let (vbar2, lambdas, exp) = if below {
        (
            Some(sink_equilibrium(&sf)?.1),
            Some(sink_eigenvalues(&sf)?),
            Some(expansion(&sf, n_max)?),
        )
    } else {
        (None, None, None)
    };
    let class = match thresholds.iter().rposition(|&t| size < t.min(eps_bar)) {
        Some(n) => PredictedClass::Smooth(n + 1),
        None if size < thresholds[0] => PredictedClass::Continuous,
        None => PredictedClass::Discontinuous,
    };
    Ok(RegularityReport {
        shock_size: size,
        radiation,
        epsilon_bar: eps_bar,
        thresholds,
        ubar: sf.ubar,
        vbar2,
        lambdas,
        expansion: exp,
        class,
    })
}

impl RegularityReport {
    /// Key-value text: one `key = value` per line, lists space separated.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("none".to_string(), fmt_num);
        let list = |v: &[f64]| v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(" ");
        let mut s = String::new();
        let _ = writeln!(s, "shock_size = {}", fmt_num(self.shock_size));
        let _ = writeln!(s, "radiation = {}", fmt_num(self.radiation));
        let _ = writeln!(s, "epsilon_bar = {}", fmt_num(self.epsilon_bar));
        let _ = writeln!(s, "eps0 = {}", fmt_num(self.thresholds[0]));
        let _ = writeln!(s, "eps_n = {}", list(&self.thresholds));
        let _ = writeln!(s, "thresholds = sufficient");
        let _ = writeln!(s, "ubar = {}", fmt_num(self.ubar));
        let _ = writeln!(s, "vbar2 = {}", opt(self.vbar2));
        let _ = writeln!(s, "lambda1 = {}", opt(self.lambdas.map(|l| l.0)));
        let _ = writeln!(s, "lambda2 = {}", opt(self.lambdas.map(|l| l.1)));
        let w = self.expansion.as_ref().map_or("none".to_string(), |e| list(&e.wbar));
        let _ = writeln!(s, "wbar = {w}");
        let _ = writeln!(s, "predicted_class = {}", self.class);
        s
    }
}

/// Orbit of the scaled system leaving the saddle at `u = 0` (or `u = 1`
/// when `from_right`) and running into the sink. Returns `(u, v)` samples
/// at every step end and `dense` interior points per step.
pub fn scaled_orbit(sf: &ScaledFlux, from_right: bool, dense: usize) -> Result<Vec<(f64, f64)>, RegularityError> {
    let (ubar, vbar) = sink_equilibrium(sf)?;
    let d2 = sf.size * sf.size;
    let u0 = if from_right { 1.0 } else { 0.0 };
    let fp = sf.derivative(u0, 1);
    // Unstable eigenvalue of [[0, f'], [f'/d^2, -1/d^2]].
    let lam = (-1.0 / d2 + (1.0 / (d2 * d2) + 4.0 * fp * fp / d2).sqrt()) / 2.0;
    let dir = if from_right { -1.0 } else { 1.0 };
    let slope = lam / fp;
    let norm = (1.0 + slope * slope).sqrt();
    let delta = 1e-9;
    let y0 = [u0 + dir * delta / norm, dir * slope * delta / norm];
    let rhs = |_: f64, y: &[f64; 2]| {
        let (u, v) = (y[0], y[1]);
        [
            sf.derivative(u, 1) * v,
            (-d2 * sf.derivative(u, 2) * v * v - v + sf.value(u)) / d2,
        ]
    };
    let solver = Dopri5 {
        rtol: 1e-12,
        atol: 1e-14,
        max_steps: 2_000_000,
        ..Dopri5::default()
    };
    let steps = solver
        .solve(rhs, 0.0, y0, 1e7, |s| {
            if (s.y1[0] - ubar).abs() < 1e-9 && (s.y1[1] - vbar).abs() < 1e-9 {
                Control::Stop
            } else {
                Control::Continue
            }
        })
        .map_err(|_| RegularityError::NotDifferentiable(0))?;
    let mut out = vec![(y0[0], y0[1])];
    for s in &steps {
        for k in 1..=dense + 1 {
            let y = s.eval(s.t0 + s.h * k as f64 / (dense + 1) as f64);
            out.push((y[0], y[1]));
        }
    }
    Ok(out)
}

/// Classification of one critical point of a nonconvex chord.
#[derive(Debug, Clone, PartialEq)]
pub enum CriticalRegularity {
    /// Local maximum: the orbit crosses through a saddle of the profile
    /// system; `unstable` is its positive eigenvalue.
    RegularCrossing { point: f64, unstable: f64, stable: f64 },
    /// Local minimum, classified like the convex sink through its
    /// discriminant.
    Sink {
        point: f64,
        discriminant: f64,
        class: PredictedClass,
    },
}

/// Per-critical-point classification for any number of branch pairs, at
/// radiation coefficient `eps`.
pub fn critical_regularity(chord: &ChordFunction, eps: f64, n_max: usize) -> Vec<CriticalRegularity> {
    chord
        .critical_points()
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let f = chord.value(c);
            let f2 = chord.derivative(c, 2);
            let point = chord.orient(c);
            if i % 2 == 1 {
                let v = (-1.0 + (1.0 + 4.0 * eps * (f2 * f).abs()).sqrt()) / (2.0 * eps * f2);
                let unstable = f2 * v;
                CriticalRegularity::RegularCrossing {
                    point,
                    unstable,
                    stable: -2.0 * unstable - 1.0 / eps,
                }
            } else {
                let disc = 1.0 - 4.0 * eps * f2 * f.abs();
                let class = if disc < 0.0 {
                    PredictedClass::Discontinuous
                } else {
                    let r = disc.sqrt();
                    let n = (0..=n_max).take_while(|&j| r > j as f64 / (j as f64 + 2.0)).count();
                    if n == 0 {
                        PredictedClass::Continuous
                    } else {
                        PredictedClass::Smooth(n)
                    }
                };
                CriticalRegularity::Sink {
                    point,
                    discriminant: disc,
                    class,
                }
            }
        })
        .collect()
}
