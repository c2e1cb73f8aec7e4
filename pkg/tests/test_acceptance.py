"""Acceptance suite: one test per criterion.

Run ``pytest tests/test_acceptance.py -v`` to get one pass/fail line per
criterion; each test also prints the measured numbers it judged.
"""

import json
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from spectralab.assemble import assemble
from spectralab.bounds import (
    BoundInput,
    check_cor_1_5,
    check_recursion_monotonicity,
    check_thm_1_1,
    check_cor_1_7,
    run_all,
    weyl_diagnostic,
)
from spectralab.cli import main
from spectralab.coeffs import GeometricConstants, compute_constants, preset
from spectralab.domain import (
    Annulus,
    CircleArc,
    Interval,
    Rectangle,
    build_mesh,
    immersion_data,
)
from spectralab.eigen import Spectrum, dense_oracle, solve_smallest

PI = math.pi

INTERVAL_EIGS = [float(i * i) for i in range(1, 12)]
SQUARE_EIGS = [2.0, 5.0, 5.0, 8.0, 10.0, 10.0, 13.0, 13.0, 17.0, 17.0, 18.0]

FIXTURE_CONFIGS = {
    "interval": {
        "domain": {"kind": "interval", "a": 0.0, "b": PI},
        "coefficients": {"preset": "laplacian"},
        "resolution": 1024,
    },
    "drifted_interval": {
        "domain": {"kind": "interval", "a": 0.0, "b": PI},
        "coefficients": {"preset": "drifted_linear", "c": 1.0},
        "resolution": 1024,
    },
    "circle_arc": {
        "domain": {"kind": "circle_arc", "radius": 1.0, "arc_length": PI},
        "coefficients": {"preset": "laplacian"},
        "resolution": 1024,
    },
    "square": {
        "domain": {"kind": "rectangle", "ax": 0.0, "bx": PI, "ay": 0.0, "by": PI},
        "coefficients": {"preset": "laplacian"},
        "resolution": 64,
    },
    "gaussian_annulus": {
        "domain": {"kind": "annulus", "r_inner": math.sqrt(8.0), "r_outer": 4.0},
        "coefficients": {"preset": "gaussian_soliton"},
        "resolution": 16,
    },
    "scalar_t_interval": {
        "domain": {"kind": "interval", "a": 0.0, "b": PI},
        "coefficients": {"preset": "scalar_T", "poly": [1.0, 0.0, 1.0]},
        "resolution": 1024,
    },
}


@pytest.fixture(scope="session")
def check_suite(tmp_path_factory):
    """Run `check` on every fixture once; criteria 5 and 7 both read it."""
    root = tmp_path_factory.mktemp("acceptance_checks")
    results = {}
    started = time.perf_counter()
    for name, body in FIXTURE_CONFIGS.items():
        out_dir = root / name
        config = dict(body)
        config.update({"k": 11, "tol": 1e-8, "checks": "all", "output_dir": str(out_dir)})
        cfg_path = root / f"{name}.json"
        cfg_path.write_text(json.dumps(config))
        code = main(["check", "--config", str(cfg_path)])
        results[name] = (code, out_dir)
    elapsed = time.perf_counter() - started
    return results, elapsed


def read_bounds_rows(out_dir):
    lines = (out_dir / "bounds.csv").read_text().strip().splitlines()
    header = lines[0].split(",")
    return [dict(zip(header, line.split(","))) for line in lines[1:]]


def test_criterion_01_analytic_spectra():
    lap1 = preset("laplacian", 1)

    t0 = time.perf_counter()
    mesh = build_mesh(Interval(0.0, PI), 2048)
    sp = solve_smallest(assemble(mesh, lap1), 10, 1e-8)
    interval_time = time.perf_counter() - t0
    interval_err = float(np.max(np.abs(sp.eigenvalues / np.arange(1, 11) ** 2 - 1.0)))

    drift = solve_smallest(
        assemble(mesh, preset("drifted_linear", 1, c=1.0)), 5, 1e-8
    )
    drift_err = float(
        np.max(np.abs(drift.eigenvalues / (np.arange(1, 6) ** 2 + 0.25) - 1.0))
    )

    t0 = time.perf_counter()
    sq_mesh = build_mesh(Rectangle(0.0, PI, 0.0, PI), 200)
    sq = solve_smallest(assemble(sq_mesh, preset("laplacian", 2)), 6, 1e-7)
    square_time = time.perf_counter() - t0
    square_err = float(np.max(np.abs(sq.eigenvalues / SQUARE_EIGS[:6] - 1.0)))

    print(
        f"interval: err {interval_err:.2e} in {interval_time:.2f}s; "
        f"drifted err {drift_err:.2e}; square: err {square_err:.2e} in {square_time:.2f}s"
    )
    assert sp.all_converged and drift.all_converged and sq.all_converged
    assert interval_err < 1e-3 and interval_time < 5.0
    assert drift_err < 1e-3
    assert square_err < 5e-3 and square_time < 60.0


def test_criterion_02_oracle_equivalence():
    cases = [
        (Interval(0.0, PI), 300, "laplacian", {}, 8),
        (Interval(0.0, PI), 256, "drifted_linear", {"c": 1.0}, 5),
        (Interval(0.0, PI), 128, "scalar_T", {"poly": [1.0, 0.0, 1.0]}, 5),
        (CircleArc(1.0, PI), 200, "laplacian", {}, 5),
        (Rectangle(0.0, PI, 0.0, PI), 16, "laplacian", {}, 6),
        (Annulus(math.sqrt(8.0), 4.0), 4, "gaussian_soliton", {}, 6),
    ]
    worst = 0.0
    for spec, res, name, params, k in cases:
        mesh = build_mesh(spec, res)
        dp = assemble(mesh, preset(name, spec.n, **params))
        assert dp.dimension <= 600
        sparse = solve_smallest(dp, k, 1e-10)
        dense = dense_oracle(dp)
        assert sparse.all_converged
        err = np.max(
            np.abs(sparse.eigenvalues - dense.eigenvalues[:k])
            / np.maximum(1.0, dense.eigenvalues[:k])
        )
        worst = max(worst, float(err))
        assert err <= 1e-8
    print(f"worst sparse-vs-dense relative deviation: {worst:.2e}")


@pytest.mark.parametrize(
    "name",
    ["interval", "drifted_interval", "square"],
)
def test_criterion_03_convergence_order(name, tmp_path):
    body = dict(FIXTURE_CONFIGS[name])
    body.update(
        {
            "resolution": [16, 32, 64] if name == "square" else [64, 128, 256],
            "k": 1,
            "tol": 1e-11,
            "output_dir": str(tmp_path / "out"),
        }
    )
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(body))
    assert main(["converge", "--config", str(cfg)]) == 0
    lines = (tmp_path / "out" / "convergence.csv").read_text().strip().splitlines()
    header = lines[0].split(",")
    rows = [dict(zip(header, line.split(","))) for line in lines[1:]]
    finest = [r for r in rows if r["order"]][0]
    order = float(finest["order"])
    print(f"{name}: observed order for the first eigenvalue = {order:.3f}")
    assert 1.8 <= order <= 2.2


def test_criterion_04_constants_engine():
    spec = Annulus(math.sqrt(8.0), 4.0)
    field = preset("gaussian_soliton", 2)
    mesh = build_mesh(spec, 8)
    gc = compute_constants(spec, mesh, field, immersion_data(spec, field))
    print(f"gaussian annulus: C0 = {gc.C0:.3e}, eta0 - 2 = {gc.eta0 - 2:.3e}")
    assert abs(gc.C0) < 1e-12
    assert abs(gc.eta0 - 2.0) < 1e-12
    assert gc.T0 == 0.0 and gc.H0 == 0.0
    assert gc.epsilon == 1.0 and gc.delta == 1.0

    ispec = Interval(0.0, PI)
    dfield = preset("drifted_linear", 1, c=1.0)
    imesh = build_mesh(ispec, 64)
    dgc = compute_constants(ispec, imesh, dfield, immersion_data(ispec, dfield))
    print(f"drifted interval: C0 + 1/4 = {dgc.C0 + 0.25:.3e}")
    assert abs(dgc.C0 + 0.25) < 1e-12


def test_criterion_05_inequality_suite(check_suite):
    results, elapsed = check_suite
    print(f"six fixtures checked in {elapsed:.1f}s")
    for name, (code, out_dir) in results.items():
        rows = read_bounds_rows(out_dir)
        checked = [r for r in rows if r["status"] == "checked"]
        failed = [r for r in checked if r["pass"] != "true"]
        print(f"  {name}: exit {code}, {len(checked)} checked, {len(failed)} failed")
        assert code == 0, f"{name} exited {code}"
        assert checked, f"{name} evaluated no checks"
        assert not failed
    assert elapsed < 300.0


def test_criterion_06_hand_anchors_exact():
    interval = BoundInput(
        spectrum=Spectrum.analytic(INTERVAL_EIGS),
        constants=GeometricConstants.exact(),
        n=1, volume=PI, omega_n=2.0, t_identity=True,
    )
    rep = check_thm_1_1(interval)
    assert (rep.lhs, rep.rhs) == (9.0, 12.0)
    rep = check_cor_1_7(interval)
    assert (rep.lhs, rep.rhs) == (4.0, 5.0)

    square = BoundInput(
        spectrum=Spectrum.analytic(SQUARE_EIGS),
        constants=GeometricConstants.exact(),
        n=2, volume=PI**2, omega_n=PI, t_identity=True,
    )
    rep = check_cor_1_7(square)
    assert (rep.lhs, rep.rhs) == (5.0, 6.0)

    arc = BoundInput(
        spectrum=Spectrum.analytic(INTERVAL_EIGS),
        constants=GeometricConstants.exact(H0=1.0),
        n=1, volume=PI, omega_n=2.0, t_identity=True, flat=False,
    )
    rep = check_thm_1_1(arc)
    assert (rep.lhs, rep.rhs) == (9.0, 15.0)
    print("anchors reproduced exactly: 9<=12, 4<=5, 5<=6, 9<=15")


def test_criterion_07_ordering_property(check_suite):
    results, _ = check_suite
    total = 0
    for name, (_, out_dir) in results.items():
        for row in read_bounds_rows(out_dir):
            if row["id"] == "cor_1_5_vs_eq_1_6" and row["status"] == "checked":
                assert row["pass"] == "true", f"{name} k={row['k']}"
                total += 1
    # and on the analytic fixtures, for every k with nonnegative discriminant
    for vals, n, vol, om in [
        (INTERVAL_EIGS, 1, PI, 2.0),
        (SQUARE_EIGS, 2, PI**2, PI),
    ]:
        inp = BoundInput(
            spectrum=Spectrum.analytic(vals), constants=GeometricConstants.exact(),
            n=n, volume=vol, omega_n=om, t_identity=True,
        )
        for k in range(1, 11):
            upper, _, cmp_ = check_cor_1_5(replace(inp, k=k))
            assert upper.detail["discriminant"] >= 0.0
            assert cmp_.passed
            total += 1
    print(f"solved-quadratic upper bound beat the mean bound in {total} comparisons")
    assert total >= 60


def test_criterion_08_recursion_monotonicity():
    for vals, n, label in [(INTERVAL_EIGS, 1, "interval"), (SQUARE_EIGS, 2, "square")]:
        inp = BoundInput(
            spectrum=Spectrum.analytic(vals), constants=GeometricConstants.exact(),
            n=n, volume=PI, omega_n=2.0, t_identity=True,
        )
        normalized = []
        for k in range(1, 11):
            rep = check_recursion_monotonicity(replace(inp, k=k))
            assert rep.status == "checked" and rep.passed, f"{label} k={k}"
            normalized.append(rep.lhs)
        assert all(a >= b - 1e-12 for a, b in zip(normalized, normalized[1:]))
        if label == "interval":
            assert normalized[3] == pytest.approx(80.25 / 256.0, rel=1e-12)
            assert normalized[4] == pytest.approx(167.2 / 625.0, rel=1e-12)
            print(
                f"interval F_4/4^4 = {normalized[3]:.6f} >= F_5/5^4 = {normalized[4]:.6f}"
            )


def test_criterion_09_negative_path(tmp_path):
    body = dict(FIXTURE_CONFIGS["interval"])
    body.update({"k": 11, "tol": 1e-8, "output_dir": str(tmp_path / "out")})
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(body))
    code = main(["check", "--config", str(cfg), "--inject-lambda", "2=40.0"])
    rows = read_bounds_rows(tmp_path / "out")
    thm11_failures = [
        r for r in rows
        if r["id"] == "thm_1_1" and r["status"] == "checked" and r["pass"] == "false"
    ]
    print(f"corrupted lambda_2: exit {code}, {len(thm11_failures)} quadratic-bound failures")
    assert code == 3
    assert thm11_failures


def test_criterion_10_weyl_diagnostic():
    inp = BoundInput(
        spectrum=Spectrum.analytic([float(i * i) for i in range(1, 51)]),
        constants=GeometricConstants.exact(),
        n=1, volume=PI, omega_n=2.0, t_identity=True, k=50,
    )
    rep = weyl_diagnostic(inp)
    deviation = rep.detail["relative_deviation"]
    print(f"empirical ratio {rep.lhs:.4f} vs limit 1/3, deviation {deviation:.2%}")
    assert rep.lhs == pytest.approx((51 * 101) / (6 * 50**2), rel=1e-12)
    assert deviation < 0.05


def test_full_suite_on_solver_output(check_suite):
    """Cross-check: rebuild one fixture in-process and run the bound suite
    directly on solver output, end to end."""
    spec = Annulus(math.sqrt(8.0), 4.0)
    field = preset("gaussian_soliton", 2)
    mesh = build_mesh(spec, 8)
    dp = assemble(mesh, field)
    sp = solve_smallest(dp, 11, 1e-8)
    imm = immersion_data(spec, field)
    gc = compute_constants(spec, mesh, field, imm)
    inp = BoundInput(
        spectrum=sp, constants=gc, n=2, volume=imm.volume, omega_n=imm.unit_ball_volume,
        t_identity=True, gaussian=True, inf_sq_radius=spec.r_inner**2, tol_rel=2e-2,
    )
    reports = run_all(inp, 10)
    checked = [r for r in reports if r.status == "checked"]
    assert checked and all(r.passed for r in checked)
    assert any(r.id == "cor_1_8_c0free" and r.status == "checked" for r in reports)
