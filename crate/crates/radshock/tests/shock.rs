use proptest::prelude::*;
use radshock::flux::FluxModel;
use radshock::shock::{check_admissibility, shock_speed, ChordFunction, ShockError, ShockTriple};

fn chord(src: &str, um: f64, up: f64) -> Result<ChordFunction, ShockError> {
    let f = FluxModel::parse(src, 1).unwrap();
    let t = shock_speed(&f, um, up)?;
    ChordFunction::new(&f, t)
}

#[test]
fn speeds_from_the_chord() {
    let b = FluxModel::parse("u^2/2", 1).unwrap();
    assert_eq!(shock_speed(&b, 1.0, -1.0).unwrap().s, 0.0);
    assert_eq!(shock_speed(&b, 2.0, 0.0).unwrap().s, 1.0);
    let c = FluxModel::parse("u^3", 1).unwrap();
    assert_eq!(shock_speed(&c, 1.0, 0.0).unwrap().s, 1.0);
}

#[test]
fn burgers_branch_inverses() {
    let ch = chord("u^2/2", 1.0, -1.0).unwrap();
    assert_eq!(ch.critical_points(), &[0.0]);
    assert_eq!(ch.branch_count(), 2);
    assert!((ch.m() - 0.5).abs() < 1e-15);
    assert!((ch.invert_branch(0, 0.0).unwrap() + 1.0).abs() < 1e-12);
    assert!((ch.invert_branch(1, 0.0).unwrap() - 1.0).abs() < 1e-12);
    for i in 0..2 {
        assert!(ch.invert_branch(i, -0.5).unwrap().abs() < 1e-6);
    }
    assert!(matches!(
        ch.invert_branch(0, 0.3),
        Err(ShockError::OutsideBranch { .. })
    ));
}

#[test]
fn quartic_structure() {
    let ch = chord("u^4/4 - u^2/2", 2.0, -2.0).unwrap();
    let crit = ch.critical_points();
    assert_eq!(crit.len(), 3);
    for (c, want) in crit.iter().zip([-1.0, 0.0, 1.0]) {
        assert!((c - want).abs() < 1e-12, "{crit:?}");
    }
    assert!((ch.value(-1.0) + 2.25).abs() < 1e-12);
    assert!((ch.value(0.0) + 2.0).abs() < 1e-12);
    assert_eq!(ch.pairs(), 2);
    assert_eq!(ch.branch_count(), 4);
    let r = check_admissibility(&ch);
    assert!(r.oleinik_strict && r.lax_strict && r.nondegenerate);
}

#[test]
fn cubic_violates_oleinik() {
    let f = FluxModel::parse("u^3", 1).unwrap();
    let t = ShockTriple {
        u_minus: 1.0,
        u_plus: -1.0,
        s: 1.0,
    };
    match ChordFunction::new(&f, t) {
        Err(ShockError::OleinikViolated { u, value }) => {
            assert!(value > 0.0);
            assert!(u > -1.0 && u < 1.0);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn reversed_burgers_is_rejected() {
    assert!(matches!(
        chord("u^2/2", -1.0, 1.0),
        Err(ShockError::OleinikViolated { .. })
    ));
    assert!(matches!(chord("u^2/2", 1.0, 1.0), Err(ShockError::CoincidentStates(_))));
}

fn admissible_chord() -> impl Strategy<Value = ChordFunction> {
    prop_oneof![
        (0.1f64..3.0, -2.0f64..2.0).prop_map(|(d, c)| chord("u^2/2", c + d, c).unwrap()),
        (0.1f64..2.0, -1.0f64..1.0).prop_map(|(d, c)| chord("exp(u)", c + d, c).unwrap()),
        (1.5f64..3.0).prop_map(|a| chord("u^4/4 - u^2/2", a, -a).unwrap()),
        (0.2f64..1.5, 0.1f64..2.0).prop_map(|(d, c)| chord("u^3", c + d, c).unwrap()),
    ]
}

proptest! {
    #[test]
    fn branch_inverse_recovers_state(ch in admissible_chord(), t in 0.01f64..0.99) {
        for b in ch.branches() {
            let u = b.lo + t * (b.hi - b.lo);
            let back = ch.invert_branch(b.index, ch.value(u)).unwrap();
            prop_assert!((back - u).abs() <= 1e-9 * ch.scale(), "branch {}: {u} -> {back}", b.index);
        }
    }

    #[test]
    fn chord_vanishes_at_end_states(ch in admissible_chord()) {
        let t = ch.triple();
        let scale = ch.value_scale();
        prop_assert!(ch.value(ch.lo()).abs() <= 1e-12 * scale);
        prop_assert!(ch.value(ch.hi()).abs() <= 1e-12 * scale);
        prop_assert!(ch.size() == (t.u_minus - t.u_plus).abs());
    }
}
