//! Flux functions: a small expression language with symbolic derivatives.

mod expr;
mod jet;
mod parse;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use expr::{Expr, Func};
pub use jet::Jet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FluxError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("non-differentiable construct `{name}` at offset {offset}")]
    NonDifferentiable { name: String, offset: usize },
    #[error("derivative order {0} unsupported (maximum 3)")]
    OrderUnsupported(usize),
    #[error("expected {expected} flux components, found {found}")]
    ComponentCount { expected: usize, found: usize },
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("operation requires a scalar flux, this one has dimension {0}")]
    NotScalar(usize),
    #[error("unknown builtin flux `{0}`")]
    UnknownBuiltin(String),
}

const BUILTINS: &[(&str, &str)] = &[("burgers", "u^2/2"), ("quartic", "u^4/4 - u^2/2"), ("cubic", "u^3")];

#[derive(Debug, Clone, PartialEq)]
pub enum FluxKind {
    Builtin(String),
    Parsed(String),
}

/// Flux function `f: R^n -> R^n` with symbolic first partials, and for
/// scalar fluxes symbolic derivatives up to third order.
#[derive(Debug, Clone)]
pub struct FluxModel {
    kind: FluxKind,
    components: Vec<Expr>,
    jacobian: Vec<Expr>,
    higher: Vec<Expr>,
}

impl FluxModel {
    /// Parse `expr`; a system flux lists its `dimension` components
    /// separated by `;`.
    pub fn parse(expr: &str, dimension: usize) -> Result<FluxModel, FluxError> {
        if dimension == 0 {
            return Err(FluxError::ZeroDimension);
        }
        if dimension == 1 {
            let e = parse::parse_expr(expr, 1)?;
            return Ok(Self::from_exprs(FluxKind::Parsed(expr.to_string()), vec![e]));
        }
        let parts: Vec<&str> = expr.split(';').collect();
        if parts.len() != dimension {
            return Err(FluxError::ComponentCount {
                expected: dimension,
                found: parts.len(),
            });
        }
        let mut comps = Vec::with_capacity(dimension);
        let mut base = 0;
        for p in &parts {
            let e = parse::parse_expr(p, dimension).map_err(|e| shift_offset(e, base))?;
            comps.push(e);
            base += p.len() + 1;
        }
        Ok(Self::from_exprs(FluxKind::Parsed(expr.to_string()), comps))
    }

    /// Parse a system flux given one expression per component.
    pub fn parse_components<S: AsRef<str>>(parts: &[S]) -> Result<FluxModel, FluxError> {
        let joined: Vec<&str> = parts.iter().map(|s| s.as_ref()).collect();
        Self::parse(&joined.join(";"), parts.len())
    }

    pub fn builtin(name: &str) -> Result<FluxModel, FluxError> {
        let (_, src) = BUILTINS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| FluxError::UnknownBuiltin(name.to_string()))?;
        let e = parse::parse_expr(src, 1)?;
        Ok(Self::from_exprs(FluxKind::Builtin(name.to_string()), vec![e]))
    }

    /// Builtin name or scalar expression.
    pub fn from_spec(spec: &str) -> Result<FluxModel, FluxError> {
        match BUILTINS.iter().find(|(n, _)| *n == spec.trim()) {
            Some((n, _)) => Self::builtin(n),
            None => Self::parse(spec, 1),
        }
    }

    pub fn from_exprs(kind: FluxKind, components: Vec<Expr>) -> FluxModel {
        let n = components.len();
        let mut jacobian = Vec::with_capacity(n * n);
        for c in &components {
            for j in 0..n {
                jacobian.push(c.diff(j));
            }
        }
        let higher = if n == 1 {
            let d2 = jacobian[0].diff(0);
            let d3 = d2.diff(0);
            vec![d2, d3]
        } else {
            Vec::new()
        };
        FluxModel {
            kind,
            components,
            jacobian,
            higher,
        }
    }

    pub fn kind(&self) -> &FluxKind {
        &self.kind
    }

    pub fn dimension(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn eval(&self, u: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c.eval(u)).collect()
    }

    /// Row-major Jacobian `df_i/du_j`.
    pub fn jacobian(&self, u: &[f64]) -> Vec<f64> {
        self.jacobian.iter().map(|c| c.eval(u)).collect()
    }

    /// Scalar value `f(u)`; panics in debug builds for systems.
    pub fn value(&self, u: f64) -> f64 {
        debug_assert_eq!(self.dimension(), 1);
        self.components[0].eval(&[u])
    }

    /// Derivative of order 0..=3 of a scalar flux.
    pub fn eval_deriv(&self, u: f64, order: usize) -> Result<f64, FluxError> {
        if self.dimension() != 1 {
            return Err(FluxError::NotScalar(self.dimension()));
        }
        let x = [u];
        match order {
            0 => Ok(self.components[0].eval(&x)),
            1 => Ok(self.jacobian[0].eval(&x)),
            2 | 3 => Ok(self.higher[order - 2].eval(&x)),
            k => Err(FluxError::OrderUnsupported(k)),
        }
    }

    /// Taylor coefficients of a scalar flux about `u` to arbitrary order.
    pub fn taylor(&self, u: f64, order: usize) -> Result<Jet, FluxError> {
        if self.dimension() != 1 {
            return Err(FluxError::NotScalar(self.dimension()));
        }
        Ok(self.components[0].eval_jet(u, order))
    }

    /// `k * f`, used to move between physical and normalized scalings.
    pub fn scaled(&self, k: f64) -> FluxModel {
        let comps = self
            .components
            .iter()
            .map(|c| expr::mul(expr::num(k), c.clone()))
            .collect();
        Self::from_exprs(FluxKind::Parsed(format!("{k:e}*({self})")), comps)
    }
}

fn shift_offset(e: FluxError, base: usize) -> FluxError {
    match e {
        FluxError::Syntax { offset, message } => FluxError::Syntax {
            offset: offset + base,
            message,
        },
        FluxError::UnknownIdentifier { name, offset } => FluxError::UnknownIdentifier {
            name,
            offset: offset + base,
        },
        FluxError::NonDifferentiable { name, offset } => FluxError::NonDifferentiable {
            name,
            offset: offset + base,
        },
        other => other,
    }
}

impl fmt::Display for FluxModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.dimension();
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{}", c.display(n))?;
        }
        Ok(())
    }
}

/// Scalar flux interface shared by parsed fluxes and derived fluxes
/// (reflected, mollified, reduced from a system).
pub trait ScalarFlux: fmt::Debug + Send + Sync {
    fn value(&self, u: f64) -> f64;

    /// Derivative of order 1..=3. Non-finite results signal evaluation
    /// outside the flux's domain of validity.
    fn derivative(&self, u: f64, order: usize) -> f64;

    /// Taylor coefficients about `u`, when available to the requested order.
    fn taylor(&self, _u: f64, _order: usize) -> Option<Jet> {
        None
    }
}

impl ScalarFlux for FluxModel {
    fn value(&self, u: f64) -> f64 {
        self.components[0].eval(&[u])
    }

    fn derivative(&self, u: f64, order: usize) -> f64 {
        self.eval_deriv(u, order).unwrap_or(f64::NAN)
    }

    fn taylor(&self, u: f64, order: usize) -> Option<Jet> {
        FluxModel::taylor(self, u, order).ok()
    }
}

/// `g(v) = -f(-v)`: maps a shock with `u- < u+` onto one with `v- > v+`.
#[derive(Debug, Clone)]
pub struct Reflected(pub Arc<dyn ScalarFlux>);

impl ScalarFlux for Reflected {
    fn value(&self, v: f64) -> f64 {
        -self.0.value(-v)
    }

    fn derivative(&self, v: f64, order: usize) -> f64 {
        let sign = if order % 2 == 1 { 1.0 } else { -1.0 };
        sign * self.0.derivative(-v, order)
    }

    fn taylor(&self, v: f64, order: usize) -> Option<Jet> {
        let j = self.0.taylor(-v, order)?;
        let c = j
            .coeffs()
            .iter()
            .enumerate()
            .map(|(k, c)| if k % 2 == 0 { -c } else { *c })
            .collect();
        Some(Jet(c))
    }
}

/// `f(u) + eta (u - u0)^3`, used to lift degenerate critical points.
#[derive(Debug, Clone)]
pub struct Mollified {
    pub inner: Arc<dyn ScalarFlux>,
    pub eta: f64,
    pub u0: f64,
}

impl ScalarFlux for Mollified {
    fn value(&self, u: f64) -> f64 {
        self.inner.value(u) + self.eta * (u - self.u0).powi(3)
    }

    fn derivative(&self, u: f64, order: usize) -> f64 {
        let d = u - self.u0;
        let extra = match order {
            1 => 3.0 * self.eta * d * d,
            2 => 6.0 * self.eta * d,
            3 => 6.0 * self.eta,
            _ => 0.0,
        };
        self.inner.derivative(u, order) + extra
    }

    fn taylor(&self, u: f64, order: usize) -> Option<Jet> {
        let mut j = self.inner.taylor(u, order)?;
        let d = u - self.u0;
        let extra = [d * d * d, 3.0 * d * d, 3.0 * d, 1.0];
        for (k, e) in extra.iter().enumerate().take(order + 1) {
            j.0[k] += self.eta * e;
        }
        Some(j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn burgers_derivatives() {
        let f = FluxModel::parse("u^2/2", 1).unwrap();
        assert_eq!(f.eval_deriv(3.0, 1).unwrap(), 3.0);
        assert_eq!(f.eval_deriv(1.0, 1).unwrap(), 1.0);
        assert_eq!(f.eval_deriv(0.0, 3).unwrap(), 0.0);
        assert!(matches!(f.eval_deriv(0.0, 4), Err(FluxError::OrderUnsupported(4))));
    }

    #[test]
    fn quartic_second_derivative() {
        let f = FluxModel::parse("u^4/4 - u^2/2", 1).unwrap();
        assert_eq!(f.eval_deriv(0.0, 2).unwrap(), -1.0);
        assert_eq!(f.eval_deriv(1.0, 2).unwrap(), 2.0);
    }

    #[test]
    fn system_jacobian() {
        let f = FluxModel::parse("u1^2/2 + u2^2/2; u1*u2", 2).unwrap();
        assert_eq!(f.jacobian(&[1.0, 0.2]), vec![1.0, 0.2, 0.2, 1.0]);
        assert!(matches!(
            FluxModel::parse("u1; u2; u1", 2),
            Err(FluxError::ComponentCount { .. })
        ));
    }

    #[test]
    fn system_error_offsets_are_global() {
        match FluxModel::parse("u1*u2; u1 + q", 2) {
            Err(FluxError::UnknownIdentifier { offset, .. }) => assert_eq!(offset, 12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reflected_taylor_matches_derivatives() {
        let f: Arc<dyn ScalarFlux> = Arc::new(FluxModel::parse("exp(u) + u^3", 1).unwrap());
        let g = Reflected(f);
        let j = g.taylor(0.4, 3).unwrap();
        assert!((j.coeffs()[0] - g.value(0.4)).abs() < 1e-14);
        for k in 1..=3 {
            assert!((j.derivative(k) - g.derivative(0.4, k)).abs() < 1e-12);
        }
    }

    #[test]
    fn builtins() {
        let q = FluxModel::builtin("quartic").unwrap();
        assert_eq!(q.value(2.0), 2.0);
        assert!(FluxModel::builtin("nope").is_err());
        assert!(matches!(
            FluxModel::from_spec("burgers").unwrap().kind(),
            FluxKind::Builtin(_)
        ));
    }
}
