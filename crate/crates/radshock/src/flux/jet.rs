//! Truncated power series, used for high-order Taylor coefficients of
//! scalar expressions.

/// Taylor coefficients `c[k]` of a function about a point, so that
/// `f(x0 + t) = sum c[k] t^k + O(t^{order+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet(pub Vec<f64>);

impl Jet {
    pub fn constant(c: f64, order: usize) -> Jet {
        let mut v = vec![0.0; order + 1];
        v[0] = c;
        Jet(v)
    }

    pub fn variable(x0: f64, order: usize) -> Jet {
        let mut v = vec![0.0; order + 1];
        v[0] = x0;
        if order >= 1 {
            v[1] = 1.0;
        }
        Jet(v)
    }

    pub fn order(&self) -> usize {
        self.0.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    /// k-th derivative at the expansion point.
    pub fn derivative(&self, k: usize) -> f64 {
        let fact: f64 = (1..=k).map(|i| i as f64).product();
        self.0[k] * fact
    }

    pub fn neg(&self) -> Jet {
        Jet(self.0.iter().map(|c| -c).collect())
    }

    pub fn add(&self, o: &Jet) -> Jet {
        Jet(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, o: &Jet) -> Jet {
        Jet(self.0.iter().zip(&o.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet(self.0.iter().map(|c| c * s).collect())
    }

    pub fn mul(&self, o: &Jet) -> Jet {
        let n = self.0.len();
        let mut out = vec![0.0; n];
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = (0..=k).map(|i| self.0[i] * o.0[k - i]).sum();
        }
        Jet(out)
    }

    pub fn div(&self, o: &Jet) -> Jet {
        let n = self.0.len();
        let mut out = vec![0.0; n];
        for k in 0..n {
            let acc: f64 = (1..=k).map(|i| o.0[i] * out[k - i]).sum();
            out[k] = (self.0[k] - acc) / o.0[0];
        }
        Jet(out)
    }

    pub fn powi(&self, k: i32) -> Jet {
        let order = self.order();
        let mut base = self.clone();
        let mut acc = Jet::constant(1.0, order);
        let mut e = k.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        if k < 0 {
            Jet::constant(1.0, order).div(&acc)
        } else {
            acc
        }
    }

    pub fn exp(&self) -> Jet {
        let n = self.0.len();
        let mut out = vec![0.0; n];
        out[0] = self.0[0].exp();
        for k in 1..n {
            let acc: f64 = (1..=k).map(|i| i as f64 * self.0[i] * out[k - i]).sum();
            out[k] = acc / k as f64;
        }
        Jet(out)
    }

    pub fn ln(&self) -> Jet {
        let n = self.0.len();
        let mut out = vec![0.0; n];
        out[0] = self.0[0].ln();
        for k in 1..n {
            let acc: f64 = (1..k).map(|i| i as f64 * out[i] * self.0[k - i]).sum();
            out[k] = (self.0[k] - acc / k as f64) / self.0[0];
        }
        Jet(out)
    }

    pub fn sin_cos(&self) -> (Jet, Jet) {
        let n = self.0.len();
        let mut s = vec![0.0; n];
        let mut c = vec![0.0; n];
        s[0] = self.0[0].sin();
        c[0] = self.0[0].cos();
        for k in 1..n {
            let mut sa = 0.0;
            let mut ca = 0.0;
            for i in 1..=k {
                let w = i as f64 * self.0[i];
                sa += w * c[k - i];
                ca += w * s[k - i];
            }
            s[k] = sa / k as f64;
            c[k] = -ca / k as f64;
        }
        (Jet(s), Jet(c))
    }

    pub fn sqrt(&self) -> Jet {
        let n = self.0.len();
        let mut out = vec![0.0; n];
        out[0] = self.0[0].sqrt();
        for k in 1..n {
            let acc: f64 = (1..k).map(|i| out[i] * out[k - i]).sum();
            out[k] = (self.0[k] - acc) / (2.0 * out[0]);
        }
        Jet(out)
    }

    /// Formal derivative d/dt of the series (order drops by one).
    pub fn deriv(&self) -> Jet {
        if self.0.len() == 1 {
            return Jet(vec![0.0]);
        }
        Jet((1..self.0.len()).map(|k| k as f64 * self.0[k]).collect())
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let mut v = self.0.clone();
        v.resize(order + 1, 0.0);
        Jet(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_series_matches_factorials() {
        let j = Jet::variable(0.0, 6).exp();
        for (k, c) in j.coeffs().iter().enumerate() {
            let fact: f64 = (1..=k).map(|i| i as f64).product();
            assert!((c - 1.0 / fact).abs() < 1e-15);
        }
    }

    #[test]
    fn sqrt_squared_is_identity() {
        let x = Jet::variable(2.0, 7);
        let r = x.sqrt();
        let back = r.mul(&r);
        for (a, b) in back.coeffs().iter().zip(x.coeffs()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn log_inverts_exp() {
        let x = Jet::variable(0.3, 6).mul(&Jet::variable(0.3, 6));
        let back = x.exp().ln();
        for (a, b) in back.coeffs().iter().zip(x.coeffs()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn negative_power() {
        let x = Jet::variable(2.0, 4);
        let inv = x.powi(-1);
        // 1/(2+t) = 1/2 - t/4 + t^2/8 - ...
        let expect = [0.5, -0.25, 0.125, -0.0625, 0.03125];
        for (a, b) in inv.coeffs().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
