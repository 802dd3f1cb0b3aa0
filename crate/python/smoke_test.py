"""Smoke test for the l1sphere Python extension.

Build and install first:
    pip install --no-build-isolation ./crates/python
then run:
    python python/smoke_test.py
"""

import math
import os
import tempfile

import l1sphere


def close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    t = l1sphere.geometry_constant()
    assert close(t, 4.493409457909064, 1e-12), t
    assert close(math.tan(t), t, 1e-9)

    p = l1sphere.solve_parameters(1.0)
    assert close(p.mu * p.R, t, 1e-12)
    assert p.lambda_ < 0
    bc = p.boundary()
    assert abs(bc["phi_R"]) <= 1e-10 and abs(bc["dphi_R"]) <= 1e-8
    assert abs(p(p.R)) <= 1e-10

    prof = p.sample(4096)
    assert len(prof) == 4096 and len(prof.r) == len(prof.values)
    assert abs(prof.l2() - 1.0) <= 1e-6
    assert l1sphere.virial_check(prof, 1.0)["relerr"] < 1e-6
    assert l1sphere.helmholtz_residual(prof, p) < 1e-5

    # Rearrangement: a bump away from the origin moves in and F does not grow.
    bump = l1sphere.Profile(1.0, [math.exp(-((i / 1023 - 0.4) / 0.1) ** 2) - 1e-6 * i for i in range(1024)])
    star = l1sphere.rearrange(bump)
    assert all(a >= b for a, b in zip(star.values, star.values[1:]))
    rep = l1sphere.check_lemma1(bump, 1.0)
    assert rep["f_after"] <= rep["f_before"]

    ratio = l1sphere.nash_ratio(prof)
    assert close(l1sphere.nash_ratio(prof.scaled(3.0)), ratio, 1e-8)
    assert close(l1sphere.nash_ratio(l1sphere.rescale_unitary(prof, 2.0)), ratio, 1e-8)

    scan = l1sphere.scaling_scan([0.1 * 10 ** (k / 4) for k in range(9)], n=1024)
    for key, want in (("a", 3 / 7), ("mu", 2 / 7), ("R", -2 / 7), ("F", 4 / 7)):
        assert abs(scan["exponents"][key] - want) < 1e-6, (key, scan["exponents"][key])

    f1 = p.sample(65537).energy(1.0)["total"]
    out, report = l1sphere.minimize(1.0, n=512)
    assert report["converged"], report
    assert abs(report["energy"]["total"] - f1) / f1 < 1e-2, (report, f1)

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "profile.csv")
        out.save_csv(path)
        back = l1sphere.Profile.load_csv(path)
        assert back.values == out.values and back.r_max == out.r_max

    for bad in (lambda: l1sphere.solve_parameters(0.0), lambda: l1sphere.minimize(1.0, max_iters=0)):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")

    print(f"ok: t*={t:.15f} F1={f1:.10f} direct(n=512)={report['energy']['total']:.10f}")


if __name__ == "__main__":
    main()
