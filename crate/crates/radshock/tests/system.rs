use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, DVector};
use radshock::flux::FluxModel;
use radshock::profile::{assemble_profile, ProfileOptions};
use radshock::shock::{shock_speed, ChordFunction};
use radshock::system::{
    build_reduction, build_reduction_with, main_assumption, spectral, system_profile, translate_admissibility,
    ReductionMap, ReductionOptions, SystemError, SystemModel, SystemTriple,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::grid_oracle;

const SYMMETRIC: [&str; 2] = ["u1^2/2 + u2^2/2", "u1*u2"];

fn decoupled(c: f64) -> (SystemModel, ReductionMap) {
    let f = FluxModel::parse_components(&["u1^2/2", "3*u2"]).unwrap();
    let sys = SystemModel::new(f, &[1.0, 0.0], &[1.0, 0.0], 1.0).unwrap();
    let t = SystemTriple::new(&sys, &[1.0, c], &[-1.0, c], 0.0).unwrap();
    let map = build_reduction(&sys, &t, 1).unwrap();
    (sys, map)
}

/// Symmetric example with a family-2 shock of size `size` from (1, 0.2).
fn coupled(r: f64, size: f64) -> (SystemModel, ReductionMap) {
    let f = FluxModel::parse_components(&SYMMETRIC).unwrap();
    let sys = SystemModel::new(f, &[1.0, 0.0], &[1.0, 0.0], r).unwrap();
    let a = size / 2f64.sqrt();
    let t = SystemTriple::new(&sys, &[1.0, 0.2], &[1.0 - a, 0.2 - a], 1.2 - a).unwrap();
    let map = build_reduction(&sys, &t, 2).unwrap();
    (sys, map)
}

#[test]
fn symmetric_spectrum() {
    let f = FluxModel::parse_components(&SYMMETRIC).unwrap();
    let sys = SystemModel::new(f, &[1.0, 0.0], &[1.0, 0.0], 1.0).unwrap();
    let sd = spectral(&sys, &[1.0, 0.2]).unwrap();
    assert_abs_diff_eq!(sd.values[0], 0.8, epsilon = 1e-14);
    assert_abs_diff_eq!(sd.values[1], 1.2, epsilon = 1e-14);
    let h = 0.5f64.sqrt();
    let (r, l) = (&sd.right[1], &sd.left[1]);
    assert_abs_diff_eq!(r[0].abs(), h, epsilon = 1e-14);
    assert_abs_diff_eq!(r[0], r[1], epsilon = 1e-14);
    assert_abs_diff_eq!(l.dot(r), 1.0, epsilon = 1e-14);
    assert_abs_diff_eq!(l[0], l[1], epsilon = 1e-14);
    assert_abs_diff_eq!(sd.left[0].dot(r), 0.0, epsilon = 1e-14);
}

#[test]
fn main_assumption_values() {
    let (sys, _) = decoupled(0.3);
    assert_abs_diff_eq!(main_assumption(&sys, &[1.0, 0.0], 1).unwrap(), 1.0, epsilon = 1e-14);
    let f = FluxModel::parse_components(&SYMMETRIC).unwrap();
    let sym = SystemModel::new(f.clone(), &[1.0, 0.0], &[1.0, 0.0], 1.0).unwrap();
    assert_abs_diff_eq!(main_assumption(&sym, &[1.0, 0.2], 2).unwrap(), 0.5, epsilon = 1e-14);
    // L orthogonal to l_2 = (1, 1) / sqrt 2.
    let bad = SystemModel::new(f, &[1.0, -1.0], &[1.0, 0.0], 1.0).unwrap();
    assert!(main_assumption(&bad, &[1.0, 0.2], 2).unwrap().abs() < 1e-14);
    let t = SystemTriple::new(&bad, &[1.0, 0.2], &[0.95, 0.15], 1.15).unwrap();
    assert!(matches!(
        build_reduction(&bad, &t, 2),
        Err(SystemError::MainAssumption { .. })
    ));
}

#[test]
fn decoupled_reduction_is_the_burgers_chord() {
    for c in [0.0, 0.3, -2.0] {
        let (_, map) = decoupled(c);
        for i in 0..=40 {
            let w = -1.0 + 0.05 * i as f64;
            let u = map.phi(w).unwrap();
            assert_abs_diff_eq!(u[0], w, epsilon = 1e-12);
            assert_abs_diff_eq!(u[1], c, epsilon = 1e-12);
            assert_abs_diff_eq!(map.reduced_chord(w).unwrap(), w * w / 2.0 - 0.5, epsilon = 1e-12);
        }
    }
}

#[test]
fn phi_fixes_the_end_states() {
    let (_, map) = coupled(20.0, 0.1);
    let t = map.triple().clone();
    let um = map.phi(map.w_minus()).unwrap();
    let up = map.phi(map.w_plus()).unwrap();
    for i in 0..2 {
        assert_abs_diff_eq!(um[i], t.u_minus[i], epsilon = 1e-12);
        assert_abs_diff_eq!(up[i], t.u_plus[i], epsilon = 1e-12);
    }
}

#[test]
fn coupled_reduction_against_grid_oracle() {
    let (sys, map) = coupled(20.0, 0.1);
    let t = map.triple().clone();
    let l = sys.l();
    for i in 0..=10 {
        let w = map.w_minus() + (map.w_plus() - map.w_minus()) * i as f64 / 10.0;
        let u = map.phi(w).unwrap();
        let o = grid_oracle(&map, w);
        assert_abs_diff_eq!(u[0], o[0], epsilon = 1e-6);
        assert_abs_diff_eq!(u[1], o[1], epsilon = 1e-6);
        // On the constraint set the residual is Fhat L.
        let f = sys.flux().eval(&o);
        let fm = sys.flux().eval(&t.u_minus);
        let res0 = f[0] - fm[0] - t.s * (o[0] - t.u_minus[0]);
        let fhat = res0 / l[0];
        assert_abs_diff_eq!(map.reduced_chord(w).unwrap(), fhat, epsilon = 1e-6);
    }
}

#[test]
fn coupled_phi_has_closed_form() {
    // With L = G = e1 the constraint is u1 = w and the second residual
    // vanishes: u2 = 0.2 (1 - s) / (w - s) by the RH relation of u1 u2.
    let (_, map) = coupled(20.0, 0.1);
    let s = map.triple().s;
    for i in 0..=20 {
        let w = map.w_minus() + (map.w_plus() - map.w_minus()) * i as f64 / 20.0;
        let u = map.phi(w).unwrap();
        assert_abs_diff_eq!(u[1], 0.2 * (1.0 - s) / (w - s), epsilon = 1e-12);
    }
}

fn random_complement(rng: &mut ChaCha8Rng, base: &DMatrix<f64>) -> DMatrix<f64> {
    let m = base.nrows();
    loop {
        let mix: DMatrix<f64> = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-2.0..2.0));
        if mix.determinant().abs() as f64 > 0.1 {
            return mix * base;
        }
    }
}

fn complement_of(l: &DVector<f64>) -> DMatrix<f64> {
    let n = l.len();
    let mut rows: Vec<DVector<f64>> = Vec::new();
    let ln = l.normalize();
    for k in 0..n {
        let mut v = DVector::from_fn(n, |i, _| if i == k { 1.0 } else { 0.0 });
        v -= &ln * ln.dot(&v);
        for r in &rows {
            v -= r * r.dot(&v);
        }
        if v.norm() > 1e-8 && rows.len() < n - 1 {
            rows.push(v.normalize());
        }
    }
    DMatrix::from_fn(n - 1, n, |i, j| rows[i][j])
}

fn assert_same_reduction(a: &ReductionMap, b: &ReductionMap) {
    for i in 0..=20 {
        let w = a.w_minus() + (a.w_plus() - a.w_minus()) * i as f64 / 20.0;
        let (ua, ub) = (a.phi(w).unwrap(), b.phi(w).unwrap());
        assert!((ua - ub).amax() <= 1e-10);
        assert_abs_diff_eq!(
            a.reduced_chord(w).unwrap(),
            b.reduced_chord(w).unwrap(),
            epsilon = 1e-10
        );
    }
}

#[test]
fn reduction_does_not_depend_on_the_complement() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (sys, map) = coupled(20.0, 0.1);
    for _ in 0..5 {
        let b = random_complement(&mut rng, &complement_of(sys.l()));
        let opts = ReductionOptions {
            complement: Some(b),
            margin: None,
        };
        let other = build_reduction_with(&sys, map.triple(), 2, &opts).unwrap();
        assert_same_reduction(&map, &other);
    }

    // Three components: a passive third field leaves the 2-shock intact.
    let f = FluxModel::parse_components(&["u1^2/2 + u2^2/2", "u1*u2", "3*u3 + u1*u3/10"]).unwrap();
    let l = [1.0, 0.5, 0.0];
    let sys3 = SystemModel::new(f, &l, &[1.0, 0.0, 0.2], 10.0).unwrap();
    let a = 0.05;
    let t = SystemTriple::new(&sys3, &[1.0, 0.2, 0.0], &[1.0 - a, 0.2 - a, 0.0], 1.2 - a).unwrap();
    let base = build_reduction(&sys3, &t, 2).unwrap();
    for _ in 0..5 {
        let b = random_complement(&mut rng, &complement_of(sys3.l()));
        let opts = ReductionOptions {
            complement: Some(b),
            margin: None,
        };
        let other = build_reduction_with(&sys3, &t, 2, &opts).unwrap();
        assert_same_reduction(&base, &other);
    }

    let bad = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
    let opts = ReductionOptions {
        complement: Some(bad),
        margin: None,
    };
    assert!(matches!(
        build_reduction_with(&sys, map.triple(), 2, &opts),
        Err(SystemError::InvalidComplement)
    ));
}

#[test]
fn decoupled_lift_is_burgers_and_constant() {
    let c = 0.3;
    let (_, map) = decoupled(c);
    let sp = system_profile(&map, 1.0, &ProfileOptions::default()).unwrap();
    let f = FluxModel::parse("u^2/2", 1).unwrap();
    let ch = ChordFunction::new(&f, shock_speed(&f, 1.0, -1.0).unwrap()).unwrap();
    let scalar = assemble_profile(&ch, 1.0).unwrap();
    for (p, u) in sp.points.iter().zip(&sp.states) {
        assert_abs_diff_eq!(u[1], c, epsilon = 1e-12);
        if (p.xi).abs() > 1e-6 {
            assert_abs_diff_eq!(u[0], scalar.eval(p.xi).u, epsilon = 1e-6);
        }
    }
    let first = &sp.states[0];
    let last = &sp.states[sp.states.len() - 1];
    assert_abs_diff_eq!(first[0], 1.0, epsilon = 1e-6);
    assert_abs_diff_eq!(last[0], -1.0, epsilon = 1e-6);
    assert!(sp.residuals.0 < 1e-6 && sp.residuals.1 < 1e-6);

    let jumps: Vec<_> = sp.jumps.iter().filter(|(_, j)| !j.no_jump).collect();
    assert_eq!(jumps.len(), 1);
    let j = &jumps[0].1;
    assert!(j.lax);
    assert_abs_diff_eq!(j.lambda_left, j.u_left[0], epsilon = 1e-12);
    assert!(j.u_left[0] > 0.0 && 0.0 > j.u_right[0]);
}

#[test]
fn trivial_jump_is_flagged() {
    let (_, map) = coupled(20.0, 0.1);
    let u = map.phi(0.97).unwrap();
    let j = translate_admissibility(&map, u.as_slice(), u.as_slice()).unwrap();
    assert!(j.no_jump && j.lax && j.liu.is_none());
}

#[test]
fn coupled_profile_residuals_and_signs() {
    for r in [20.0, 60.0] {
        let (_, map) = coupled(r, 0.1);
        let sp = system_profile(&map, 1.0, &ProfileOptions::default()).unwrap();
        assert!(sp.residuals.0 < 1e-6, "{:?}", sp.residuals);
        assert!(sp.residuals.1 < 1e-6, "{:?}", sp.residuals);
        let samples = map.sign_samples(50).unwrap();
        assert_eq!(samples.len(), 50);
        assert!(samples.iter().all(|s| s.consistent()));
        for (_, j) in &sp.jumps {
            assert!(j.lax && j.sign_consistent);
            assert!(j.rh_residual < 1e-8);
            if let Some(liu) = &j.liu {
                assert!(liu.satisfied, "{liu:?}");
            }
        }
    }
    // R = 60 puts the reduced shock above the continuity threshold.
    let (_, map) = coupled(60.0, 0.1);
    let sp = system_profile(&map, 1.0, &ProfileOptions::default()).unwrap();
    assert_eq!(sp.jumps.iter().filter(|(_, j)| !j.no_jump).count(), 1);
}

#[test]
fn reduced_curvature_approaches_the_genuine_nonlinearity() {
    let mut gaps = Vec::new();
    for size in [0.1, 0.01] {
        let (_, map) = coupled(20.0, size);
        let p = map.convexity_probes();
        gaps.push(
            p.iter()
                .map(|q| (q.numeric - q.predicted).abs() / q.predicted.abs())
                .fold(0.0, f64::max),
        );
    }
    assert!(gaps[1] < 0.2 * gaps[0], "{gaps:?}");
}
