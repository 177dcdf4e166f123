"""Smoke test for the compiled extension.

Build and install it first:

    maturin develop -m crates/python/Cargo.toml --release

then run `python python/smoke_test.py`.
"""

import math

import proxsub


def main():
    assert proxsub.soft_threshold([2.0, -0.5, 0.1], 1.0) == [1.0, 0.0, 0.0]

    # Projection onto the unit simplex.
    x = proxsub.project([0.8, 0.6, -0.2], lower=[0.0] * 3, a_eq=[[1.0, 1.0, 1.0]], b_eq=[1.0])
    assert abs(sum(x) - 1.0) < 1e-8 and min(x) >= -1e-9, x
    assert abs(x[0] - 0.6) < 1e-8 and abs(x[1] - 0.4) < 1e-8, x

    inst = proxsub.CsInstance.generate(shape=(40, 120, 4), kind="dct", seed=3)
    assert (inst.m, inst.d) == (40, 120)
    f0 = inst.objective([0.0] * inst.d)
    runs = {s: inst.solve(s, max_iter=2000) for s in ("psg", "gppa", "pdcae")}
    for name, r in runs.items():
        assert math.isfinite(r.objective) and r.objective < f0, (name, r)
        print(f"{name:6s} {r}  error={r.error:.3e}")
    assert runs["psg"].lyapunov_max_violation <= 1e-10 * (1 + abs(f0))

    opf = proxsub.opf_run(starts=2, seed=0)
    print(opf["table"])
    assert opf["failures"] == 0
    assert opf["penetration"] >= 0.5 - 1e-6

    ok, report = proxsub.run_checks()
    print(report)
    assert ok
    print("smoke test passed")


if __name__ == "__main__":
    main()
