//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use radshock::flux::{FluxModel, ScalarFlux};
use radshock::system::ReductionMap;

// Vector field of the orbit system and its sink, computed from the raw
// flux with the chain rule.
pub struct SinkOracle {
    pub f: FluxModel,
    pub s: f64,
    pub lo: f64,
    pub d: f64,
    pub k: f64,
}

impl SinkOracle {
    pub fn new(src: &str, um: f64, up: f64, radiation: f64) -> SinkOracle {
        let f = FluxModel::parse(src, 1).unwrap();
        let s = (f.value(um) - f.value(up)) / (um - up);
        SinkOracle {
            f,
            s,
            lo: up.min(um),
            d: (um - up).abs(),
            k: radiation.sqrt(),
        }
    }

    pub fn fd(&self, u: f64, order: usize) -> f64 {
        let x = self.lo + self.d * u;
        let big = match order {
            0 => self.f.value(x) - self.f.value(self.lo) - self.s * (x - self.lo),
            1 => self.f.derivative(x, 1) - self.s,
            k => self.f.derivative(x, k),
        };
        self.k * big * self.d.powi(order as i32 - 2)
    }

    pub fn bisect(mut a: f64, mut b: f64, g: impl Fn(f64) -> f64) -> f64 {
        let ga = g(a);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if (g(m) > 0.0) == (ga > 0.0) {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    pub fn sink(&self) -> (f64, f64) {
        let ubar = Self::bisect(0.0, 1.0, |u| self.fd(u, 1));
        let (f0, f2) = (self.fd(ubar, 0), self.fd(ubar, 2));
        let d2 = self.d * self.d;
        // Root of d^2 f'' v^2 + v - f = 0 nearer zero lies in
        // [-1 / (2 d^2 f''), 0].
        let v = Self::bisect(-1.0 / (2.0 * d2 * f2), 0.0, |v| d2 * f2 * v * v + v - f0);
        (ubar, v)
    }

    pub fn jacobian(&self, u: f64, v: f64) -> [[f64; 2]; 2] {
        let d2 = self.d * self.d;
        let (f1, f2, f3) = (self.fd(u, 1), self.fd(u, 2), self.fd(u, 3));
        [
            [f2 * v, f1],
            [(-d2 * f3 * v * v + f1) / d2, (-2.0 * d2 * f2 * v - 1.0) / d2],
        ]
    }

    pub fn eigenvalues(m: [[f64; 2]; 2]) -> (f64, f64) {
        let tr = m[0][0] + m[1][1];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        (tr / 2.0 + disc, tr / 2.0 - disc)
    }
}

// Constraint set written without the complement: the residual
// f(u) - f(u-) - s (u - u-) is parallel to L, and G.u = w.
pub fn constraint(map: &ReductionMap, u: [f64; 2], w: f64) -> [f64; 2] {
    let sys = map.system();
    let t = map.triple();
    let res = |u: [f64; 2]| -> [f64; 2] {
        let f = sys.flux().eval(&u);
        let fm = sys.flux().eval(&t.u_minus);
        [
            f[0] - fm[0] - t.s * (u[0] - t.u_minus[0]),
            f[1] - fm[1] - t.s * (u[1] - t.u_minus[1]),
        ]
    };
    let (l, g) = (sys.l(), sys.g());
    let r = res(u);
    [r[0] * l[1] - r[1] * l[0], g[0] * u[0] + g[1] * u[1] - w]
}

// Grid minimum of |constraint|^2 over a box around the shock, then Newton
// with a difference Jacobian.
pub fn grid_oracle(map: &ReductionMap, w: f64) -> [f64; 2] {
    let t = map.triple();
    let n = 400;
    let (lo, hi) = (t.u_minus[1].min(t.u_plus[1]) - 0.1, t.u_minus[1].max(t.u_plus[1]) + 0.1);
    let (alo, ahi) = (w - 0.05, w + 0.05);
    let mut best = ([0.0, 0.0], f64::INFINITY);
    for i in 0..=n {
        for j in 0..=n {
            let u = [
                alo + (ahi - alo) * i as f64 / n as f64,
                lo + (hi - lo) * j as f64 / n as f64,
            ];
            let c = constraint(map, u, w);
            let e = c[0] * c[0] + c[1] * c[1];
            if e < best.1 {
                best = (u, e);
            }
        }
    }
    let mut u = best.0;
    for _ in 0..30 {
        let c = constraint(map, u, w);
        let h = 1e-7;
        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            let mut up = u;
            up[k] += h;
            let mut dn = u;
            dn[k] -= h;
            let (cp, cm) = (constraint(map, up, w), constraint(map, dn, w));
            jac[0][k] = (cp[0] - cm[0]) / (2.0 * h);
            jac[1][k] = (cp[1] - cm[1]) / (2.0 * h);
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        u[0] -= (jac[1][1] * c[0] - jac[0][1] * c[1]) / det;
        u[1] -= (-jac[1][0] * c[0] + jac[0][0] * c[1]) / det;
    }
    u
}
