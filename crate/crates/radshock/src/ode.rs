//! Dormand–Prince 5(4) with continuous extension.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step with its dense-output polynomial.
#[derive(Debug, Clone)]
pub struct Step<const N: usize> {
    pub t0: f64,
    pub h: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    rcont: [[f64; N]; 5],
}

impl<const N: usize> Step<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// Interpolated state at `t` inside the step.
    pub fn eval(&self, t: f64) -> [f64; N] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let r = &self.rcont;
        let mut y = [0.0; N];
        for i in 0..N {
            y[i] = r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])));
        }
        y
    }
}

/// What the caller wants after inspecting an accepted step.
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: 0.0,
            h_max: f64::INFINITY,
            max_steps: 200_000,
        }
    }
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        if *c != 0.0 {
            for i in 0..N {
                out[i] += h * c * k[i];
            }
        }
    }
    out
}

impl Dopri5 {
    /// Integrate from `t0` until `t_end` or until `observer` returns
    /// [`Control::Stop`]. Every accepted step is handed to the observer
    /// before being stored.
    pub fn solve<const N: usize, F, O>(
        &self,
        mut rhs: F,
        t0: f64,
        y0: [f64; N],
        t_end: f64,
        mut observer: O,
    ) -> Result<Vec<Step<N>>, OdeError>
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
        O: FnMut(&Step<N>) -> Control,
    {
        let dir = if t_end >= t0 { 1.0 } else { -1.0 };
        let mut t = t0;
        let mut y = y0;
        let mut k1 = rhs(t, &y);
        let mut h = if self.h_init > 0.0 {
            self.h_init
        } else {
            self.initial_step(&mut rhs, t, &y, &k1)
        };
        h = h.min(self.h_max).min((t_end - t).abs());
        let mut steps = Vec::new();
        let mut fac_old: f64 = 1e-4;
        let mut rejected = false;
        for _ in 0..self.max_steps {
            if (t_end - t) * dir <= 1e-14 * t.abs().max(1.0) {
                return Ok(steps);
            }
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(OdeError::StepUnderflow { t });
            }
            let hs = h * dir;
            let k2 = rhs(t + C2 * hs, &axpy(&y, hs, &[(A21, &k1)]));
            let k3 = rhs(t + C3 * hs, &axpy(&y, hs, &[(A31, &k1), (A32, &k2)]));
            let k4 = rhs(t + C4 * hs, &axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = rhs(
                t + C5 * hs,
                &axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = rhs(
                t + hs,
                &axpy(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            );
            let y1 = axpy(&y, hs, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let k7 = rhs(t + hs, &y1);
            let mut err = 0.0;
            let mut finite = true;
            for i in 0..N {
                let e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = self.atol + self.rtol * y[i].abs().max(y1[i].abs());
                err += (e / sc) * (e / sc);
                finite &= y1[i].is_finite() && e.is_finite();
            }
            err = (err / N as f64).sqrt();
            if !finite {
                if h < 1e-10 * t.abs().max(1.0) {
                    return Err(OdeError::NonFinite { t });
                }
                h *= 0.25;
                rejected = true;
                continue;
            }
            // PI step-size control (Hairer's constants for DOPRI5).
            let fac11 = err.powf(0.2 - 0.04 * 0.75);
            let mut fac = fac11 / fac_old.powf(0.04);
            fac = (fac / 0.9).clamp(1.0 / 10.0, 5.0);
            let h_new = h / fac;
            if err <= 1.0 {
                fac_old = err.max(1e-4);
                let mut rcont = [[0.0; N]; 5];
                for i in 0..N {
                    let dy = y1[i] - y[i];
                    let bspl = hs * k1[i] - dy;
                    rcont[0][i] = y[i];
                    rcont[1][i] = dy;
                    rcont[2][i] = bspl;
                    rcont[3][i] = dy - hs * k7[i] - bspl;
                    rcont[4][i] = hs * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                let step = Step {
                    t0: t,
                    h: hs,
                    y0: y,
                    y1,
                    rcont,
                };
                let ctl = observer(&step);
                steps.push(step);
                t += hs;
                y = y1;
                k1 = k7;
                if let Control::Stop = ctl {
                    return Ok(steps);
                }
                let mut next = h_new.min(self.h_max);
                if rejected {
                    next = next.min(h);
                }
                rejected = false;
                h = next.min((t_end - t).abs());
            } else {
                h /= (fac11 / 0.9).min(5.0);
                rejected = true;
            }
        }
        Err(OdeError::TooManySteps(self.max_steps))
    }

    fn initial_step<const N: usize, F>(&self, rhs: &mut F, t: f64, y: &[f64; N], k1: &[f64; N]) -> f64
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
    {
        let mut dnf = 0.0;
        let mut dny = 0.0;
        for i in 0..N {
            let sk = self.atol + self.rtol * y[i].abs();
            dnf += (k1[i] / sk).powi(2);
            dny += (y[i] / sk).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
            1e-6
        } else {
            (dny / dnf).sqrt() * 0.01
        };
        h = h.min(self.h_max);
        let y1 = axpy(y, h, &[(1.0, k1)]);
        let k2 = rhs(t + h, &y1);
        let mut der2 = 0.0;
        for i in 0..N {
            let sk = self.atol + self.rtol * y[i].abs();
            der2 += ((k2[i] - k1[i]) / sk).powi(2);
        }
        let der2 = der2.sqrt() / h;
        let der12 = der2.max(dnf.sqrt());
        let h1 = if der12 <= 1e-15 {
            (h * 1e-3).max(1e-6)
        } else {
            (0.01 / der12).powf(0.2)
        };
        (100.0 * h).min(h1).min(self.h_max)
    }
}

/// Locate a sign change of `g` inside a step by bisection on the dense
/// output. Returns `t` with `|t - t*| <= tol`.
pub fn locate<const N: usize, G>(step: &Step<N>, mut g: G, tol: f64) -> f64
where
    G: FnMut(&[f64; N]) -> f64,
{
    let (mut a, mut b) = (step.t0, step.t1());
    let ga = g(&step.y0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= tol || m == a || m == b {
            break;
        }
        let gm = g(&step.eval(m));
        if gm == 0.0 {
            return m;
        }
        if (gm > 0.0) == (ga > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth_and_dense_output() {
        let solver = Dopri5 {
            rtol: 1e-10,
            atol: 1e-14,
            ..Dopri5::default()
        };
        let steps = solver
            .solve(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], 3.0, |_| Control::Continue)
            .unwrap();
        let last = steps.last().unwrap();
        assert!((last.y1[0] - 3f64.exp()).abs() < 1e-8 * 3f64.exp());
        let mut worst: f64 = 0.0;
        for s in &steps {
            for k in 1..10 {
                let t = s.t0 + s.h * k as f64 / 10.0;
                worst = worst.max((s.eval(t)[0] - t.exp()).abs() / t.exp());
            }
        }
        assert!(worst < 1e-8, "dense output error {worst}");
    }

    #[test]
    fn harmonic_oscillator_backward() {
        let solver = Dopri5::default();
        let steps = solver
            .solve(
                |_, y: &[f64; 2]| [y[1], -y[0]],
                0.0,
                [0.0, 1.0],
                -10.0,
                |_| Control::Continue,
            )
            .unwrap();
        let y = steps.last().unwrap().y1;
        assert!((y[0] - (-10f64).sin()).abs() < 1e-8);
        assert!((y[1] - (-10f64).cos()).abs() < 1e-8);
    }

    #[test]
    fn event_location() {
        let solver = Dopri5::default();
        let mut hit = None;
        solver
            .solve(
                |_, y: &[f64; 2]| [y[1], -y[0]],
                0.0,
                [1.0, 0.0],
                10.0,
                |s| {
                    if s.y0[0] > 0.0 && s.y1[0] <= 0.0 {
                        hit = Some(locate(s, |y| y[0], 1e-14));
                        Control::Stop
                    } else {
                        Control::Continue
                    }
                },
            )
            .unwrap();
        assert!((hit.unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
    }
}
