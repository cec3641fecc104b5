"""Smoke test for the powersim_py bindings.

Build and install first:
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/powersim_py-*.whl
"""

import math
import os
import sys
import tempfile

import powersim_py as ps


def check(cond, msg):
    if not cond:
        print(f"FAIL: {msg}")
        sys.exit(1)
    print(f"ok: {msg}")


def main():
    # Phasor mode keeps this quick.
    r = ps.run_test(1, converter_model="phasor")
    check(len(r) == 5000, "test 1 records 5 s at 1 ms")
    p = r.value_at("vsc.p_mw", 4.9)
    q = r.value_at("vsc.q_mvar", 4.9)
    check(abs(p - 100.0) < 1.0 and abs(q - 30.0) < 1.0, f"converter reaches 100 MW / 30 Mvar (got {p:.2f}, {q:.2f})")
    check(r.wall_clock_s > 0.0, "integration is timed")

    m = ps.compute_metrics(r, r)
    check(all(v == 0.0 for s in m.values() for v in s.values()), "self comparison is zero")

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "run.csv")
        r.write_csv(path)
        back = ps.RunResult.read_csv(path)
        check(back.column("G1.speed") == r.column("G1.speed"), "CSV round trip is exact")

    again = ps.run_test(1, converter_model="phasor")
    check(again.to_csv() == r.to_csv(), "repeated runs are identical")

    rows = ps.timing_report([r, again])
    check(len(rows) == 1 and rows[0][2] == 1.0, "timing report of one configuration")

    empty = ps.run_scenario_toml("duration = 0.0\nevents = []\n")
    check(len(empty) == 0 and empty.to_csv().startswith("time_s,"), "zero duration gives a header-only CSV")

    try:
        ps.run_scenario_toml(
            'duration = 1.0\nevents = [{ time = 0.5, kind = "generator_trip", generator = "G9" }]\n'
        )
        check(False, "bad generator is rejected")
    except ps.ConfigError as e:
        check("G9" in str(e), "bad generator is rejected with its name")

    check(math.isclose(ps.pv_array_current(0.0, 500.0) * 2, ps.pv_array_current(0.0, 1000.0), rel_tol=1e-12),
          "short-circuit current is linear in irradiance")
    check(ps.wind_static_power(0.0, 1e6) == 0.0, "no wind, no power")
    check(ps.wind_static_power(14.0, 1e6) == 1e6, "static wind follows a reachable setpoint")
    print("all smoke checks passed")


if __name__ == "__main__":
    main()
