//! Shock triples, the chord function `F(u;s) = f(u) - f(u±) - s(u - u±)`
//! and its decomposition into monotone branches.
//!
//! A shock with `u- < u+` is handled through the reflection `v = -u`,
//! `g(v) = -f(-v)`, which maps it onto one with `v- > v+` and the same
//! speed. All branch data on [`ChordFunction`] live in this oriented
//! frame: `lo = u+ < hi = u-` and `F < 0` on `(lo, hi)` for admissible
//! data.

use std::sync::Arc;

use thiserror::Error;

use crate::flux::{FluxModel, Jet, Mollified, Reflected, ScalarFlux};

const SCAN_INTERVALS: usize = 1 << 12;
const DEGENERATE_TOL: f64 = 1e-8;
const MOLLIFY_ETA: f64 = 1e-6;
const STRICT_MARGIN: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShockError {
    #[error("coincident states u- = u+ = {0}")]
    CoincidentStates(f64),
    #[error("flux has dimension {0}; scalar flux required")]
    NotScalar(usize),
    #[error("Rankine-Hugoniot residual {residual:e} exceeds tolerance")]
    RankineHugoniot { residual: f64 },
    #[error("Oleinik violated: F({u}) = {value:e} >= 0 strictly inside the shock")]
    OleinikViolated { u: f64, value: f64 },
    #[error("chord has no admissible branch structure (critical points {0:?})")]
    NoBranchStructure(Vec<f64>),
    #[error("non-finite flux value at u = {0}")]
    NonFinite(f64),
    #[error("branch index {index} out of range (chord has {count} branches)")]
    BadBranch { index: usize, count: usize },
    #[error("value {y:e} outside the range [{lo:e}, {hi:e}] of branch {branch}")]
    OutsideBranch { branch: usize, y: f64, lo: f64, hi: f64 },
}

/// End states and speed of a scalar shock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShockTriple {
    pub u_minus: f64,
    pub u_plus: f64,
    pub s: f64,
}

impl ShockTriple {
    pub fn size(&self) -> f64 {
        (self.u_minus - self.u_plus).abs()
    }
}

/// Chord speed `s = (f(u+) - f(u-)) / (u+ - u-)`.
pub fn shock_speed(f: &FluxModel, u_minus: f64, u_plus: f64) -> Result<ShockTriple, ShockError> {
    if f.dimension() != 1 {
        return Err(ShockError::NotScalar(f.dimension()));
    }
    shock_speed_with(f, u_minus, u_plus)
}

pub fn shock_speed_with(f: &dyn ScalarFlux, u_minus: f64, u_plus: f64) -> Result<ShockTriple, ShockError> {
    if u_minus == u_plus {
        return Err(ShockError::CoincidentStates(u_minus));
    }
    let (fm, fp) = (f.value(u_minus), f.value(u_plus));
    if !fm.is_finite() {
        return Err(ShockError::NonFinite(u_minus));
    }
    if !fp.is_finite() {
        return Err(ShockError::NonFinite(u_plus));
    }
    Ok(ShockTriple {
        u_minus,
        u_plus,
        s: (fp - fm) / (u_plus - u_minus),
    })
}

/// A maximal monotonicity interval of `F` in the oriented frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
    pub decreasing: bool,
}

#[derive(Debug, Clone)]
pub struct ChordFunction {
    flux: Arc<dyn ScalarFlux>,
    triple: ShockTriple,
    reflected: bool,
    lo: f64,
    hi: f64,
    s: f64,
    f_ref: f64,
    critical: Vec<f64>,
    structured: bool,
    degenerate: Vec<f64>,
    mollification: Option<f64>,
    m: f64,
}

impl ChordFunction {
    /// Decompose and require strict Oleinik admissibility.
    pub fn new(f: &FluxModel, triple: ShockTriple) -> Result<ChordFunction, ShockError> {
        if f.dimension() != 1 {
            return Err(ShockError::NotScalar(f.dimension()));
        }
        build_chord(Arc::new(f.clone()), triple)
    }

    /// Decompose `F` without rejecting inadmissible data; used by
    /// [`check_admissibility`] on arbitrary triples.
    pub fn decompose(f: Arc<dyn ScalarFlux>, triple: ShockTriple) -> Result<ChordFunction, ShockError> {
        if triple.u_minus == triple.u_plus {
            return Err(ShockError::CoincidentStates(triple.u_minus));
        }
        let (fm, fp) = (f.value(triple.u_minus), f.value(triple.u_plus));
        if !fm.is_finite() || !fp.is_finite() {
            return Err(ShockError::NonFinite(triple.u_minus));
        }
        let fscale = fm
            .abs()
            .max(fp.abs())
            .max(triple.s.abs() * triple.u_minus.abs().max(triple.u_plus.abs()))
            .max(f64::MIN_POSITIVE);
        let residual = fp - fm - triple.s * (triple.u_plus - triple.u_minus);
        if residual.abs() > 1e-12 * fscale {
            return Err(ShockError::RankineHugoniot { residual });
        }
        let reflected = triple.u_minus < triple.u_plus;
        let working: Arc<dyn ScalarFlux> = if reflected { Arc::new(Reflected(f)) } else { f };
        let (lo, hi) = if reflected {
            (-triple.u_plus, -triple.u_minus)
        } else {
            (triple.u_plus, triple.u_minus)
        };
        let mut chord = ChordFunction {
            f_ref: working.value(hi),
            flux: working,
            triple,
            reflected,
            lo,
            hi,
            s: triple.s,
            critical: Vec::new(),
            structured: false,
            degenerate: Vec::new(),
            mollification: None,
            m: 0.0,
        };
        (chord.critical, chord.structured) = chord.scan_critical()?;
        let curv = chord.curvature_scale();
        let degenerate: Vec<f64> = chord
            .critical
            .iter()
            .copied()
            .filter(|&z| chord.derivative(z, 2).abs() < DEGENERATE_TOL * curv)
            .collect();
        if !degenerate.is_empty() {
            // Lift degenerate critical points with a small cubic; the speed
            // moves by eta (hi - lo)^2 to keep the chord through both ends.
            let width = hi - lo;
            let eta = MOLLIFY_ETA * chord.slope_scale() / (width * width);
            let flux: Arc<dyn ScalarFlux> = Arc::new(Mollified {
                inner: chord.flux.clone(),
                eta,
                u0: lo,
            });
            chord.s += eta * width * width;
            chord.f_ref = flux.value(hi);
            chord.flux = flux;
            chord.triple.s = chord.s;
            chord.mollification = Some(eta);
            (chord.critical, chord.structured) = chord.scan_critical()?;
            chord.degenerate = degenerate;
        }
        chord.m = chord
            .critical
            .iter()
            .step_by(2)
            .map(|&z| -chord.value(z))
            .fold(0.0, f64::max);
        Ok(chord)
    }

    /// Chord value in the oriented frame.
    pub fn value(&self, u: f64) -> f64 {
        self.flux.value(u) - self.f_ref - self.s * (u - self.hi)
    }

    /// Derivative of `F` of order 1..=3 in the oriented frame.
    pub fn derivative(&self, u: f64, order: usize) -> f64 {
        match order {
            0 => self.value(u),
            1 => self.flux.derivative(u, 1) - self.s,
            k => self.flux.derivative(u, k),
        }
    }

    /// Taylor coefficients of `F` about `u`, when the flux provides them.
    pub fn taylor(&self, u: f64, order: usize) -> Option<Jet> {
        let mut j = self.flux.taylor(u, order)?;
        j.0[0] = self.value(u);
        if order >= 1 {
            j.0[1] = self.derivative(u, 1);
        }
        Some(j)
    }

    pub fn flux(&self) -> &Arc<dyn ScalarFlux> {
        &self.flux
    }

    pub fn triple(&self) -> ShockTriple {
        self.triple
    }

    pub fn speed(&self) -> f64 {
        self.s
    }

    pub fn reflected(&self) -> bool {
        self.reflected
    }

    /// Map a state between the caller's frame and the oriented frame
    /// (the map is an involution).
    pub fn orient(&self, u: f64) -> f64 {
        if self.reflected {
            -u
        } else {
            u
        }
    }

    /// Oriented `u+`.
    pub fn lo(&self) -> f64 {
        self.lo
    }

    /// Oriented `u-`.
    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn size(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    /// Interior critical points `z*_1 < ... < z*_{2n-1}` (oriented frame).
    pub fn critical_points(&self) -> &[f64] {
        &self.critical
    }

    /// Whether the critical points alternate min/max starting with a
    /// minimum, as required for a profile.
    pub fn structured(&self) -> bool {
        self.structured
    }

    /// Critical points found degenerate before mollification.
    pub fn degenerate_points(&self) -> &[f64] {
        &self.degenerate
    }

    pub fn mollification(&self) -> Option<f64> {
        self.mollification
    }

    /// Number of branch pairs `n`.
    pub fn pairs(&self) -> usize {
        self.critical.len().div_ceil(2)
    }

    pub fn branch_count(&self) -> usize {
        self.critical.len() + 1
    }

    /// Branch `i` spans the critical points around it; even indices are
    /// decreasing, odd increasing.
    pub fn branch(&self, i: usize) -> Result<Branch, ShockError> {
        let count = self.branch_count();
        if i >= count {
            return Err(ShockError::BadBranch { index: i, count });
        }
        let lo = if i == 0 { self.lo } else { self.critical[i - 1] };
        let hi = if i + 1 == count { self.hi } else { self.critical[i] };
        Ok(Branch {
            index: i,
            lo,
            hi,
            decreasing: i.is_multiple_of(2),
        })
    }

    pub fn branches(&self) -> Vec<Branch> {
        (0..self.branch_count()).filter_map(|i| self.branch(i).ok()).collect()
    }

    /// Scale of states: the shock size.
    pub fn scale(&self) -> f64 {
        self.hi - self.lo
    }

    /// Scale of chord slopes, `max |F'(u±)|`.
    pub fn slope_scale(&self) -> f64 {
        self.derivative(self.lo, 1)
            .abs()
            .max(self.derivative(self.hi, 1).abs())
            .max(f64::MIN_POSITIVE)
    }

    fn curvature_scale(&self) -> f64 {
        self.slope_scale() / self.scale()
    }

    /// Scale of chord values.
    pub fn value_scale(&self) -> f64 {
        (self.slope_scale() * self.scale()).max(self.m)
    }

    /// Inverse of `F` on branch `i`.
    pub fn invert_branch(&self, i: usize, y: f64) -> Result<f64, ShockError> {
        let b = self.branch(i)?;
        let (fa, fb) = (self.value(b.lo), self.value(b.hi));
        let (ymin, ymax) = (fa.min(fb), fa.max(fb));
        let tol = 1e-12 * self.value_scale();
        if !(y >= ymin - tol && y <= ymax + tol) {
            return Err(ShockError::OutsideBranch {
                branch: i,
                y,
                lo: ymin,
                hi: ymax,
            });
        }
        if y <= ymin {
            return Ok(if fa <= fb { b.lo } else { b.hi });
        }
        if y >= ymax {
            return Ok(if fa >= fb { b.lo } else { b.hi });
        }
        // g increasing in u after the sign flip on decreasing branches.
        let sign = if b.decreasing { -1.0 } else { 1.0 };
        let g = |u: f64| sign * (self.value(u) - y);
        let (mut a, mut c) = (b.lo, b.hi);
        let mut u = 0.5 * (a + c);
        for _ in 0..200 {
            let gu = g(u);
            if gu == 0.0 {
                return Ok(u);
            }
            if gu < 0.0 {
                a = u;
            } else {
                c = u;
            }
            if c - a <= 2.0 * f64::EPSILON * u.abs().max(self.scale()) {
                break;
            }
            let d = sign * self.derivative(u, 1);
            let newton = u - gu / d;
            u = if d > 0.0 && newton > a && newton < c {
                newton
            } else {
                0.5 * (a + c)
            };
        }
        Ok(u)
    }

    // Roots of F' from a sign-change scan, and whether they form the
    // expected min/max alternation (odd count, starting with a minimum).
    fn scan_critical(&self) -> Result<(Vec<f64>, bool), ShockError> {
        let (lo, hi) = (self.lo, self.hi);
        let width = hi - lo;
        let mut roots = Vec::new();
        let mut last: Option<(f64, f64)> = None;
        let mut first_sign = 0.0;
        for i in 1..SCAN_INTERVALS {
            let x = lo + width * i as f64 / SCAN_INTERVALS as f64;
            let d = self.derivative(x, 1);
            if !d.is_finite() {
                return Err(ShockError::NonFinite(self.orient(x)));
            }
            if d == 0.0 {
                continue;
            }
            match last {
                Some((xl, dl)) if (dl > 0.0) != (d > 0.0) => roots.push(self.refine_critical(xl, x)),
                None => first_sign = d.signum(),
                _ => {}
            }
            last = Some((x, d));
        }
        let structured = roots.len() % 2 == 1 && first_sign < 0.0;
        Ok((roots, structured))
    }

    fn refine_critical(&self, mut a: f64, mut b: f64) -> f64 {
        let da = self.derivative(a, 1);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let dm = self.derivative(m, 1);
            if dm == 0.0 {
                return m;
            }
            if (dm > 0.0) == (da > 0.0) {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    /// First sampled interior point with `F >= 0`, if any.
    pub fn oleinik_violation(&self) -> Option<(f64, f64)> {
        let width = self.hi - self.lo;
        let sampled = (1..SCAN_INTERVALS).map(|i| self.lo + width * i as f64 / SCAN_INTERVALS as f64);
        sampled
            .chain(self.critical.iter().copied())
            .map(|u| (u, self.value(u)))
            .find(|&(_, v)| !(v < 0.0))
            .map(|(u, v)| (self.orient(u), v))
    }
}

/// Decompose and reject data violating strict Oleinik.
pub fn build_chord(f: Arc<dyn ScalarFlux>, triple: ShockTriple) -> Result<ChordFunction, ShockError> {
    let chord = ChordFunction::decompose(f, triple)?;
    if let Some((u, value)) = chord.oleinik_violation() {
        return Err(ShockError::OleinikViolated { u, value });
    }
    if !chord.structured {
        return Err(ShockError::NoBranchStructure(
            chord.critical.iter().map(|&z| chord.orient(z)).collect(),
        ));
    }
    Ok(chord)
}

/// Outcome of the Oleinik / Lax / nondegeneracy checks.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub oleinik_strict: bool,
    pub lax_strict: bool,
    pub nondegenerate: bool,
    /// Smallest normalized gap `-F (u- - u+) / ((u - u+)(u- - u))` over the
    /// shock; positive iff Oleinik holds, and equal to the Lax margins at
    /// the end states.
    pub worst_margin: f64,
    /// Smallest `|f''|` at the interior critical points.
    pub min_curvature: f64,
    /// Margin is zero up to tolerance: Oleinik holds only weakly.
    pub weak_contact: bool,
    pub mollified: Option<f64>,
}

pub fn check_admissibility(chord: &ChordFunction) -> AdmissibilityReport {
    let slope = chord.slope_scale();
    let (margin, certified) = slope_gap(|u| chord.value(u), |u| chord.derivative(u, 1), chord.lo, chord.hi);
    let lax_strict =
        chord.derivative(chord.lo, 1) < -STRICT_MARGIN * slope && chord.derivative(chord.hi, 1) > STRICT_MARGIN * slope;
    let min_curvature = chord
        .critical
        .iter()
        .map(|&z| chord.derivative(z, 2).abs())
        .fold(f64::INFINITY, f64::min);
    let oleinik_strict = margin > STRICT_MARGIN * slope && certified > 0.0;
    AdmissibilityReport {
        oleinik_strict,
        lax_strict,
        nondegenerate: lax_strict && chord.structured && chord.degenerate.is_empty(),
        worst_margin: margin,
        min_curvature,
        weak_contact: !oleinik_strict && margin >= -STRICT_MARGIN * slope,
        mollified: chord.mollification,
    }
}

/// Oleinik margin of the chord joining `(a, f(a))` and `(b, f(b))`
/// (`a < b`), with `F` measured from that chord.
pub fn oleinik_margin(f: &dyn ScalarFlux, a: f64, b: f64) -> f64 {
    let s = (f.value(b) - f.value(a)) / (b - a);
    let fb = f.value(b);
    slope_gap(|u| f.value(u) - fb - s * (u - b), |u| f.derivative(u, 1) - s, a, b).0
}

// Returns (sampled margin, Lipschitz-certified lower bound). The gap
// -F(u) (b - a) / ((u - a)(b - u)) is positive iff F < 0 and tends to the
// Lax margins -F'(a) and F'(b) at the end points.
fn slope_gap(big_f: impl Fn(f64) -> f64, big_f1: impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let n = SCAN_INTERVALS;
    let h = (b - a) / n as f64;
    let mut gaps = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let u = a + h * i as f64;
        let g = if i == 0 {
            -big_f1(a)
        } else if i == n {
            big_f1(b)
        } else {
            let v = big_f(u);
            -v / (u - a) - v / (b - u)
        };
        gaps.push(if g.is_nan() { f64::NEG_INFINITY } else { g });
    }
    let margin = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let lip = gaps.windows(2).map(|w| (w[1] - w[0]).abs() / h).fold(0.0, f64::max);
    (margin, margin - lip * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn burgers() -> FluxModel {
        FluxModel::parse("u^2/2", 1).unwrap()
    }

    #[test]
    fn speeds() {
        assert_eq!(shock_speed(&burgers(), 1.0, -1.0).unwrap().s, 0.0);
        assert_eq!(shock_speed(&burgers(), 2.0, 0.0).unwrap().s, 1.0);
        let cubic = FluxModel::parse("u^3", 1).unwrap();
        assert_eq!(shock_speed(&cubic, 1.0, 0.0).unwrap().s, 1.0);
        assert!(matches!(
            shock_speed(&burgers(), 1.0, 1.0),
            Err(ShockError::CoincidentStates(_))
        ));
    }

    #[test]
    fn burgers_chord() {
        let f = burgers();
        let c = ChordFunction::new(&f, shock_speed(&f, 1.0, -1.0).unwrap()).unwrap();
        assert_eq!(c.critical_points().len(), 1);
        assert!(c.critical_points()[0].abs() < 1e-15);
        assert!((c.m() - 0.5).abs() < 1e-15);
        assert_eq!(c.branch_count(), 2);
        assert_eq!(c.invert_branch(0, 0.0).unwrap(), -1.0);
        assert_eq!(c.invert_branch(1, 0.0).unwrap(), 1.0);
        assert!(c.invert_branch(0, -0.5).unwrap().abs() < 1e-8);
        assert!(c.invert_branch(1, -0.5).unwrap().abs() < 1e-8);
        assert!(c.invert_branch(0, 0.3).is_err());
    }

    #[test]
    fn quartic_chord() {
        let f = FluxModel::parse("u^4/4 - u^2/2", 1).unwrap();
        let c = ChordFunction::new(&f, shock_speed(&f, 2.0, -2.0).unwrap()).unwrap();
        let z = c.critical_points();
        assert_eq!(z.len(), 3);
        for (got, want) in z.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
        assert!((c.value(1.0) + 2.25).abs() < 1e-14);
        assert!((c.value(0.0) + 2.0).abs() < 1e-14);
        assert_eq!(c.branch_count(), 4);
        let r = check_admissibility(&c);
        assert!(r.oleinik_strict && r.lax_strict && r.nondegenerate);
    }

    #[test]
    fn cubic_oleinik_violation() {
        let f = FluxModel::parse("u^3", 1).unwrap();
        let t = ShockTriple {
            u_minus: 1.0,
            u_plus: -1.0,
            s: 1.0,
        };
        match ChordFunction::new(&f, t) {
            Err(ShockError::OleinikViolated { u, value }) => {
                assert!(u < 0.0 && u > -1.0);
                assert!(value > 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reversed_burgers_reports_violation() {
        let f = Arc::new(burgers());
        let t = ShockTriple {
            u_minus: -1.0,
            u_plus: 1.0,
            s: 0.0,
        };
        assert!(build_chord(f.clone(), t).is_err());
        let c = ChordFunction::decompose(f, t).unwrap();
        assert!(!c.structured());
        let r = check_admissibility(&c);
        assert!(!r.oleinik_strict && r.worst_margin < 0.0);
    }

    #[test]
    fn increasing_shock_via_reflection() {
        // Concave flux: admissible shocks jump upward.
        let f = FluxModel::parse("-u^2/2", 1).unwrap();
        let t = shock_speed(&f, -1.0, 1.0).unwrap();
        let c = ChordFunction::new(&f, t).unwrap();
        assert!(c.reflected());
        assert_eq!((c.lo(), c.hi()), (-1.0, 1.0));
        assert!(check_admissibility(&c).oleinik_strict);
    }

    #[test]
    fn degenerate_critical_point_is_mollified() {
        // F' = (u - 0.2)^3 has a degenerate minimum.
        let f = FluxModel::parse("(u - 0.2)^4/4", 1).unwrap();
        let t = shock_speed(&f, 1.2, -0.8).unwrap();
        let c = ChordFunction::new(&f, t).unwrap();
        assert_eq!(c.degenerate_points().len(), 1);
        assert!(c.mollification().is_some());
        let z = c.critical_points()[0];
        assert!(c.derivative(z, 2).abs() > 0.0);
    }
}
