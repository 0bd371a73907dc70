use approx::assert_abs_diff_eq;
use radshock::flux::FluxModel;
use radshock::regularity::{
    epsilon_bar, expansion, regularity_report, scaled_flux, sink_eigenvalues, sink_equilibrium, threshold,
    PredictedClass,
};
use radshock::shock::{shock_speed, ChordFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::SinkOracle;

fn chord(src: &str, um: f64, up: f64) -> ChordFunction {
    let f = FluxModel::parse(src, 1).unwrap();
    ChordFunction::new(&f, shock_speed(&f, um, up).unwrap()).unwrap()
}

#[test]
fn burgers_scaled_flux_is_the_same_parabola() {
    for d in [0.3, 1.0, 1.3, 2.5] {
        let sf = scaled_flux(&chord("u^2/2", 0.2 + d, 0.2), 1.0).unwrap();
        assert_abs_diff_eq!(sf.ubar(), 0.5, epsilon = 1e-12);
        for i in 0..=10 {
            let u = i as f64 / 10.0;
            assert_abs_diff_eq!(sf.value(u), 0.5 * u * (u - 1.0), epsilon = 1e-14);
        }
        assert_abs_diff_eq!(sf.value(0.5), -0.125, epsilon = 1e-15);
    }
}

#[test]
fn small_shocks_see_the_second_derivative() {
    // f = u^4 near u+ = 1: f_d -> f''(1) u (u - 1) / 2 = 6 u (u - 1).
    let sf = scaled_flux(&chord("u^4", 1.001, 1.0), 1.0).unwrap();
    let worst = (0..=100)
        .map(|i| i as f64 / 100.0)
        .map(|u| (sf.value(u) - 6.0 * u * (u - 1.0)).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-2, "{worst}");
}

#[test]
fn burgers_sink_values() {
    let sf = scaled_flux(&chord("u^2/2", 0.5, -0.5), 1.0).unwrap();
    let (_, v) = sink_equilibrium(&sf).unwrap();
    assert_abs_diff_eq!(v, (-1.0 + 0.5f64.sqrt()) / 2.0, epsilon = 1e-15);
    let (l1, l2) = sink_eigenvalues(&sf).unwrap();
    assert_abs_diff_eq!(l1, v, epsilon = 1e-15);
    assert_abs_diff_eq!(l2, -(0.5f64.sqrt()), epsilon = 1e-15);

    let r2 = 2f64.sqrt();
    let sf = scaled_flux(&chord("u^2/2", r2 / 2.0, -r2 / 2.0), 1.0).unwrap();
    let (_, v) = sink_equilibrium(&sf).unwrap();
    assert_abs_diff_eq!(v, -0.25, epsilon = 1e-7);
    let (l1, l2) = sink_eigenvalues(&sf).unwrap();
    assert_abs_diff_eq!(l1, -0.25, epsilon = 1e-7);
    assert!(l2.abs() < 1e-7);
}

#[test]
fn tiny_shocks_approach_the_limits() {
    let sf = scaled_flux(&chord("u^2/2", 5e-4, -5e-4), 1.0).unwrap();
    let (_, v) = sink_equilibrium(&sf).unwrap();
    assert_abs_diff_eq!(v, -0.125, epsilon = 1e-6);
    let (l1, _) = sink_eigenvalues(&sf).unwrap();
    assert_abs_diff_eq!(l1, -0.125, epsilon = 1e-6);
}

#[test]
fn burgers_threshold_family() {
    let ch = chord("u^2/2", 0.5, -0.5);
    for n in 1..=8usize {
        let want = 2.0 * (2.0 * n as f64).sqrt() / (n as f64 + 1.0);
        assert_abs_diff_eq!(threshold(&ch, 1.0, n - 1), want, epsilon = 1e-12);
    }
    assert_abs_diff_eq!(epsilon_bar(&ch, 1.0), 2f64.sqrt(), epsilon = 1e-12);
}

#[test]
fn classes_just_below_each_threshold() {
    let ch = chord("u^2/2", 0.5, -0.5);
    for n in 0..=4usize {
        let eps_n = threshold(&ch, 1.0, n);
        let d = eps_n * (1.0 - 1e-6);
        let r = regularity_report(&chord("u^2/2", d / 2.0, -d / 2.0), 1.0, 6).unwrap();
        assert_eq!(r.class, PredictedClass::Smooth(n + 1), "size {d}");
    }
    let r = regularity_report(&chord("u^2/2", 0.65, -0.65), 1.0, 3).unwrap();
    assert_eq!(r.class, PredictedClass::Smooth(2));
    let r = regularity_report(&chord("u^2/2", 0.75, -0.75), 1.0, 3).unwrap();
    assert_eq!(r.class, PredictedClass::Discontinuous);
}

#[test]
fn first_coefficients_for_burgers() {
    let sf = scaled_flux(&chord("u^2/2", 0.5, -0.5), 1.0).unwrap();
    let e = expansion(&sf, 3).unwrap();
    let (_, v) = sink_equilibrium(&sf).unwrap();
    assert_eq!(e.wbar[0], v);
    assert!(e.wbar[1].abs() < 1e-15);
}

#[test]
fn sink_against_root_finder_and_eigen_oracle() {
    let fluxes = ["u^2/2", "exp(u)", "u^4 + u^2", "u^2/2 + u^3/6", "exp(u) + exp(-u)"];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    while checked < 20 {
        let src = fluxes[rng.gen_range(0..fluxes.len())];
        let up = rng.gen_range(-0.5..0.5);
        let radiation = rng.gen_range(0.3..3.0);
        let ch0 = chord(src, up + 0.5, up);
        let eps0 = threshold(&ch0, radiation, 0);
        let d = rng.gen_range(0.05..0.98) * eps0;
        let ch = chord(src, up + d, up);
        let sf = scaled_flux(&ch, radiation).unwrap();
        let oracle = SinkOracle::new(src, up + d, up, radiation);
        let (ubar, vbar) = oracle.sink();
        let (lu, lv) = sink_equilibrium(&sf).unwrap();
        assert_abs_diff_eq!(lu, ubar, epsilon = 1e-10);
        assert_abs_diff_eq!(lv, vbar, epsilon = 1e-10);
        let (o1, o2) = SinkOracle::eigenvalues(oracle.jacobian(ubar, vbar));
        let (l1, l2) = sink_eigenvalues(&sf).unwrap();
        let (l1, l2) = (l1.max(l2), l1.min(l2));
        assert_abs_diff_eq!(l1, o1, epsilon = 1e-10);
        assert_abs_diff_eq!(l2, o2, epsilon = 1e-10);
        checked += 1;
    }
}

// Orbit v(u) from the saddle at u = 0 (or 1) towards the sink, integrated
// in u by RK4 with steps shrinking near ubar, where dv/du is 0/0.
fn orbit_samples(o: &SinkOracle, from_right: bool, stop: f64) -> Vec<(f64, f64)> {
    let d2 = o.d * o.d;
    let (ubar, _) = o.sink();
    let slope = |u: f64, v: f64| (-d2 * o.fd(u, 2) * v * v - v + o.fd(u, 0)) / (d2 * o.fd(u, 1) * v);
    let (u0, dir) = if from_right { (1.0, -1.0) } else { (0.0, 1.0) };
    // Unstable direction v = c (u - u0) of u' = f' v,
    // v' = (f' (u - u0) - v) / d^2.
    let f1 = o.fd(u0, 1);
    let mu = (-1.0 + (1.0 + 4.0 * d2 * f1 * f1).sqrt()) / (2.0 * d2);
    let c = mu / f1;
    let mut u = u0 + dir * 1e-7;
    let mut v = c * (u - u0);
    let mut out = Vec::new();
    while (ubar - u) * dir > stop {
        // Bounded by the stiffness d(slope)/dv = -f''/f' - f / (d^2 f' v^2),
        // which blows up at both ends.
        let stiff = (o.fd(u, 2) / o.fd(u, 1) + o.fd(u, 0) / (d2 * o.fd(u, 1) * v * v)).abs();
        let h = dir * (1e-4f64).min(0.02 * (ubar - u).abs()).min(0.2 / stiff);
        let k1 = slope(u, v);
        let k2 = slope(u + h / 2.0, v + h / 2.0 * k1);
        let k3 = slope(u + h / 2.0, v + h / 2.0 * k2);
        let k4 = slope(u + h, v + h * k3);
        v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        u += h;
        out.push((u, v));
    }
    out
}

// Least squares for the coefficients of sum c_j t^j, by normal equations
// on scaled monomials.
fn poly_fit(pts: &[(f64, f64)], deg: usize, scale: f64) -> Vec<f64> {
    let n = deg + 1;
    let mut a = nalgebra::DMatrix::<f64>::zeros(pts.len(), n);
    let mut b = nalgebra::DVector::<f64>::zeros(pts.len());
    for (i, (t, y)) in pts.iter().enumerate() {
        for j in 0..n {
            a[(i, j)] = (t / scale).powi(j as i32);
        }
        b[i] = *y;
    }
    let c = a.svd(true, true).solve(&b, 1e-14).unwrap();
    (0..n).map(|j| c[j] / scale.powi(j as i32)).collect()
}

#[test]
fn expansion_against_orbit_fit() {
    // Besides the power series the orbit carries |u - ubar|^(lambda2 /
    // lambda1); a polynomial fit sees the first four coefficients cleanly
    // only when that exponent is well above 4.
    for (src, um, up) in [
        ("u^2/2", 0.25, -0.25),
        ("u^2/2", 0.3, -0.3),
        ("exp(u)", 0.6, 0.0),
        ("u^2/2 + u^3/6", 0.5, 0.0),
    ] {
        let o = SinkOracle::new(src, um, up, 1.0);
        let sf = scaled_flux(&chord(src, um, up), 1.0).unwrap();
        let e = expansion(&sf, 3).unwrap();
        let (l1, l2) = sink_eigenvalues(&sf).unwrap();
        assert!(l2 / l1 > 6.0);
        let (ubar, _) = o.sink();
        let window = 0.01;
        let mut pts = Vec::new();
        for right in [false, true] {
            for (u, v) in orbit_samples(&o, right, 1e-4) {
                let t = u - ubar;
                if t.abs() < window {
                    pts.push((t, v));
                }
            }
        }
        let c = poly_fit(&pts, 6, window);
        for (j, (cj, wj)) in c.iter().zip(&e.wbar).take(4).enumerate() {
            assert!(
                (cj - wj).abs() < 1e-4 * (1.0 + wj.abs()),
                "{src} {um}: wbar_{j} = {wj} fit {cj}",
            );
        }
    }
}
