#!/usr/bin/env python3
"""Smoke test for the cconvex_py extension module.

Builds nothing itself: expects the cdylib to exist (see README). Locates
the shared library under target/, links it into a temp directory under the
importable name, and exercises the main entry points.
"""

import json
import math
import os
import sys
import tempfile


def locate_module():
    here = os.path.dirname(os.path.abspath(__file__))
    candidates = [
        os.path.join(here, "..", "target", profile, "libcconvex_py.so")
        for profile in ("release", "debug")
    ]
    for cand in candidates:
        if os.path.exists(cand):
            staging = tempfile.mkdtemp(prefix="cconvex-py-")
            dest = os.path.join(staging, "cconvex_py.so")
            os.symlink(os.path.abspath(cand), dest)
            sys.path.insert(0, staging)
            return cand
    sys.exit(
        "libcconvex_py.so not found; build it first:\n"
        "  cargo build --release -p cconvex-py"
    )


def check(name, condition, detail=""):
    status = "ok" if condition else "FAIL"
    print(f"{status:4} {name}" + (f" ({detail})" if detail else ""))
    if not condition:
        sys.exit(1)


def main():
    lib = locate_module()
    import cconvex_py as cc

    print(f"loaded {lib}")

    # geometry
    torus = cc.Manifold("flat_torus", periods=[1.0])
    check("torus wrap distance", abs(torus.distance((0, [0.1]), (0, [0.9])) - 0.2) < 1e-12)

    sphere = cc.Manifold("sphere2", radius=1.0)
    check("sphere curvature bound", sphere.curvature_bound == 1.0)
    check(
        "sphere antipodal distance",
        abs(sphere.distance((0, [0.0, 0.0]), (1, [0.0, 0.0])) - math.pi) < 1e-9,
    )
    g = sphere.metric((0, [0.0, 0.0]))
    check("sphere metric at origin", abs(g[0][0] - 4.0) < 1e-12 and abs(g[0][1]) < 1e-15)

    # mechanics
    free = cc.System(torus)
    check("free cost", abs(free.cost((0, [0.1]), (0, [0.9])) - 0.02) < 1e-12)

    torus2 = cc.Manifold("flat_torus", periods=[1.0, 1.0])
    pend = cc.System(torus2, potential="cos_x1", amplitude=1.0)
    times, pts, moms, drift = pend.flow((0, [0.1, 0.0]), [0.2, 0.1], t_end=1.0, step=1e-3)
    check("pendulum energy drift", drift <= 1e-8, f"drift {drift:.2e}")
    check("flow samples", len(times) == len(pts) == len(moms) == 1001)

    # certification
    cert = json.loads(free.certify("natural", "cos_x1", 0.01, grid=128))
    check("certified amplitude passes", cert["verdict"] == "pass", f"margin {cert['worst_margin']:.4f}")
    cert_bad = json.loads(free.certify("natural", "cos_x1", 0.05, grid=128))
    check("folded amplitude fails", cert_bad["verdict"] == "fail")

    sphere_sys = cc.System(sphere)
    cert_sphere = json.loads(sphere_sys.certify("riemannian", "height", 0.5, grid=48))
    check("sphere height certified", cert_sphere["verdict"] == "pass")

    # transform + verification
    tr = json.loads(free.c_transform("cos_x1", 0.01, grid=64))
    check("double transform within budget", tr["c_convex"], f"defect {tr['max_defect']:.2e}")

    report = json.loads(free.verify_optimality("cos_x1", 0.01, samples=40, seed=7))
    check("identity assignment optimal", report["assignment_is_identity"])
    check(
        "duality gap",
        report["duality_gap"] is not None and report["duality_gap"] <= 1e-6,
        f"gap {report['duality_gap']:.2e}",
    )

    report_bad = json.loads(free.verify_optimality("cos_x1", 0.2, samples=40, seed=7))
    check("folded map beaten by assignment", not report_bad["assignment_is_identity"])

    # riccati
    s = cc.riccati_explicit_constant(1.0, [[0.0]], 1.0)
    check("explicit tan solution", abs(s[0][0] + math.tan(1.0)) < 1e-12)
    times, final, blow_up = cc.riccati_integrate([[1.0]], [[0.0]], t_end=1.0, step=1e-3)
    check("integrator matches explicit", abs(final[0][0] + math.tan(1.0)) < 1e-8)
    check("no spurious blow-up", blow_up is None)

    coth1 = 1.0 / math.tanh(1.0)
    _, _, blow_up = cc.riccati_integrate([[-1.0]], [[-coth1]], t_end=1.0, step=1e-3)
    check("boundary blow-up detected", blow_up is not None and abs(blow_up - 1.0) <= 1e-3)

    blk = cc.riccati_explicit_block(-1.0, 2.0, [[0.0, 0.0], [0.0, 0.0]], 0.5)
    check("block solution", abs(blk[1][1] - 2.0 * math.tanh(1.0)) < 1e-12 and blk[0][0] == 0.0)

    check("threshold profile", abs(cc.threshold_xi(1.0, -1) - coth1) < 1e-12)
    try:
        cc.threshold_xi(math.pi, 1)
        check("cot domain error", False)
    except ValueError:
        check("cot domain error", True)

    # map building against the shift formula
    pts = cc.sample_uniform(torus, 5, 3)
    images = free.build_map("cos_x1", 0.01, pts)
    for (c, x), (c2, y) in zip(pts, images):
        expect = (x[0] - 0.01 * 2 * math.pi * math.sin(2 * math.pi * x[0])) % 1.0
        check(f"map at {x[0]:.3f}", abs(y[0] - expect) < 1e-9)

    print("all smoke checks passed")


if __name__ == "__main__":
    main()
