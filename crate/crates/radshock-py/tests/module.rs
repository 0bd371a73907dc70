use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module(code: &str) {
    Python::attach(|py| {
        let m = pyo3::wrap_pymodule!(radshock_py::radshock_py)(py);
        let globals = PyDict::new(py);
        globals.set_item("rs", m).unwrap();
        let code = std::ffi::CString::new(code).unwrap();
        if let Err(e) = py.run(&code, Some(&globals), None) {
            e.print(py);
            panic!("python failed");
        }
    });
}

#[test]
fn burgers_profile_from_python() {
    with_module(
        r#"
f = rs.Flux("u^2/2")
assert f.derivative(0.5, 1) == 0.5
assert rs.shock_speed(f, 2.0, 0.0) == 1.0
p = rs.Profile(f, 1.0, -1.0, eps=1.0)
j = p.jumps()
assert len(j) == 1 and j[0]["rh_residual"] < 1e-8
assert abs(j[0]["u_left"] + j[0]["u_right"]) < 1e-12
assert rs.regularity(f, 0.65, -0.65)["predicted_class"] == "C2"
"#,
    );
}

#[test]
fn errors_carry_their_class() {
    with_module(
        r#"
f = rs.Flux("u^2/2")
for args, exc in [((1.0, 1.0), rs.AdmissibilityError), ((-1.0, 1.0), rs.AdmissibilityError)]:
    try:
        rs.Profile(f, *args)
    except exc as e:
        assert "shock" in str(e) or "profile" in str(e)
    else:
        raise AssertionError(args)
try:
    rs.Flux("u^^2")
except rs.ConfigError:
    pass
else:
    raise AssertionError("parse")
assert issubclass(rs.NumericalError, rs.RadshockError)
"#,
    );
}

#[test]
fn coupled_system_from_python() {
    with_module(
        r#"
a = 0.1 / 2 ** 0.5
s = rs.System(["u1^2/2 + u2^2/2", "u1*u2"], [1.0, 0.0], [1.0, 0.0], 60.0)
out = s.profile([1.0, 0.2], [1.0 - a, 0.2 - a], 1.2 - a, 2)
assert max(out["residuals"]) < 1e-6
assert len(out["jumps"]) == 1 and out["jumps"][0]["lax"]
"#,
    );
}
