"""Smoke test for the radshock_py extension.

Build and install first:
    maturin build --release -m crates/radshock-py/Cargo.toml
    pip install target/wheels/radshock_py-*.whl
"""

import math

import radshock_py as rs


def main():
    f = rs.Flux("u^2/2")
    assert rs.shock_speed(f, 1.0, -1.0) == 0.0

    ch = rs.Chord(f, 1.0, -1.0)
    assert ch.critical_points == [0.0]
    assert abs(ch.value(0.0) + 0.5) < 1e-15

    # Size 2 exceeds sqrt 2: one jump.
    p = rs.Profile(f, 1.0, -1.0, eps=1.0)
    jumps = p.jumps()
    assert len(jumps) == 1, jumps
    assert jumps[0]["rh_residual"] < 1e-8 and jumps[0]["oleinik_margin"] > 0
    rows = p.grid()
    assert abs(rows[0][4] - 1.0) < 1e-6 and abs(rows[-1][4] + 1.0) < 1e-6

    small = rs.Profile(f, 0.5, -0.5)
    assert small.max_jump < 1e-6

    reg = rs.regularity(f, 0.65, -0.65)
    assert reg["predicted_class"] == "C2", reg
    assert abs(reg["thresholds"][0] - math.sqrt(2)) < 1e-12

    drift = rs.verify(small, cells=1024, t_end=1.0)
    assert drift["error_l1"] < 0.05, drift

    a = 0.1 / math.sqrt(2)
    sys = rs.System(["u1^2/2 + u2^2/2", "u1*u2"], [1.0, 0.0], [1.0, 0.0], 60.0)
    out = sys.profile([1.0, 0.2], [1.0 - a, 0.2 - a], 1.2 - a, 2)
    assert max(out["residuals"]) < 1e-6
    assert [j["lax"] for j in out["jumps"]] == [True]

    try:
        rs.Profile(f, 1.0, 1.0)
    except rs.AdmissibilityError as e:
        print("rejected:", e)
    else:
        raise AssertionError("coincident states accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
