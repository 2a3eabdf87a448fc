"""Acceptance suite: every exit criterion at its stated tolerance.

Each test prints one ``ACCEPTANCE <k> <name>: PASS`` line (visible with
``pytest -s`` or in the captured output); a failed assertion marks the
criterion failed.  Tolerances are pinned here, not configurable.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from biriccilab import bounds as bd
from biriccilab import charts as ch
from biriccilab import cli
from biriccilab import conformal as cf
from biriccilab import geodesics as gd
from biriccilab import neck as nk
from biriccilab import stability as stab
from biriccilab.fields import (constant_field, cos_axis_field,
                               exp_linear_field, gaussian_bump_field)

from conftest import interior_points


def _report(num: int, name: str, detail: str = "") -> None:
    print(f"\nACCEPTANCE {num} {name}: PASS {detail}")


# ---------------------------------------------------------------------------
# 1. Curvature kernel
# ---------------------------------------------------------------------------

def test_criterion_1_curvature_kernel(rng):
    t0 = time.monotonic()
    charts = ([ch.flat_chart(n) for n in (2, 3, 4, 5)]
              + [ch.sphere_chart(n) for n in (2, 3, 4)]
              + [ch.hyperbolic_plane_chart(), ch.sphere_product_circle_chart(2, 1.0, 1.0)])
    for chart in charts:
        for x in interior_points(chart, 100, rng):
            b = ch.curvature_bundle(chart, x)
            assert b.symmetry_residual() < 1e-6
            assert b.contraction_residual() < 1e-6

    b = ch.curvature_bundle(ch.sphere_chart(2), np.array([math.pi / 2, 0.4]))
    assert abs(b.scalar - 2.0) < 1e-5
    for n in (2, 3, 4):
        sphere = ch.sphere_chart(n)
        for x in interior_points(sphere, 5, rng):
            b = ch.curvature_bundle(sphere, x)
            assert np.max(np.abs(b.ricci - (n - 1) * b.metric)) < 1e-5
    hyp = ch.hyperbolic_plane_chart()
    for x in interior_points(hyp, 5, rng, margin=0.1):
        b = ch.curvature_bundle(hyp, x)
        v, w = ch.gram_schmidt(np.eye(2), b.metric)
        assert abs(ch.sectional(hyp, x, v, w, bundle=b) + 1.0) < 1e-5
    for n in (2, 3, 4, 5):
        flat = ch.flat_chart(n)
        for x in interior_points(flat, 3, rng):
            assert np.max(np.abs(ch.curvature_bundle(flat, x).riemann)) < 1e-5

    elapsed = time.monotonic() - t0
    assert elapsed < 30.0
    _report(1, "curvature-kernel", f"({elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# 2. Conformal laws
# ---------------------------------------------------------------------------

def test_criterion_2_conformal_laws(rng):
    t0 = time.monotonic()
    factors3 = [exp_linear_field([0.3, 0.0, 0.0]),
                gaussian_bump_field([0.0, 0.0, 0.0], width=2.0),
                cos_axis_field(1, 0.1, 1.2)]
    factors2 = [exp_linear_field([0.3, 0.0]),
                gaussian_bump_field([0.0, 0.5], width=2.0),
                cos_axis_field(0, 0.1, 1.2)]
    factors4 = [exp_linear_field([0.3, 0.0, 0.0, 0.0]),
                gaussian_bump_field([0.0] * 4, width=2.0),
                cos_axis_field(1, 0.1, 1.2)]

    ricci_matrix = [(ch.flat_chart(3), factors3), (ch.sphere_chart(2), factors2),
                    (ch.hyperbolic_plane_chart(), factors2)]
    worst = 0.0
    for chart, factors in ricci_matrix:
        for f in factors:
            for x in interior_points(chart, 50, rng, margin=0.15):
                worst = max(worst, cf.verify_ricci_law(chart, f, x))
    assert worst < 1e-5

    scalar_matrix = [(ch.flat_chart(3), factors3), (ch.sphere_chart(3), factors3),
                     (ch.flat_chart(4), factors4)]
    worst_s = 0.0
    for chart, factors in scalar_matrix:
        for f in factors:
            for x in interior_points(chart, 50, rng, margin=0.15):
                worst_s = max(worst_s, cf.verify_scalar_law(chart, f, x))
    assert worst_s < 1e-5

    worst_t = 0.0
    for chart in (ch.sphere_chart(3), ch.flat_chart(4)):
        f = gaussian_bump_field([0.0] * chart.dim, width=2.0, amplitude=0.3)
        for x in interior_points(chart, 20, rng, margin=0.15):
            worst_t = max(worst_t, cf.verify_yamabe_trace(chart, f, x))
    assert worst_t < 1e-5

    elapsed = time.monotonic() - t0
    assert elapsed < 60.0
    _report(2, "conformal-laws",
            f"(ricci {worst:.2e}, scalar {worst_s:.2e}, trace {worst_t:.2e}, {elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# 3. Bonnet-Myers sharpness on the round 3-sphere
# ---------------------------------------------------------------------------

def test_criterion_3_bonnet_myers_sharpness():
    t0 = time.monotonic()
    bound = bd.bound_value(bd.BoundSpec(kind="thm1", n=3, kappa=2.0, epsilon=1.0))
    assert abs(bound - math.pi) < 1e-12
    measured = gd.estimate_diameter(ch.sphere_chart(3), 2000, seed=2)
    assert 0.98 * math.pi <= measured <= math.pi
    assert measured <= bound
    elapsed = time.monotonic() - t0
    assert elapsed < 300.0
    _report(3, "bonnet-myers-sharpness",
            f"(measured {measured:.5f} <= {bound:.5f}, {elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# 4. Stability-inequality suite on round-sphere arcs
# ---------------------------------------------------------------------------

def test_criterion_4_index_form_suite():
    sphere = ch.sphere_chart(2)
    cd = cf.single_factor(constant_field(1.0), 1.0)
    start = np.array([math.pi / 2, 0.3])
    v0 = np.array([0.0, 1.0])

    for length in (math.pi / 4, math.pi / 2, 3 * math.pi / 4):
        path = gd.integrate_geodesic(sphere, start, v0, length, steps=1200)
        for phi in gd.phi_family(length):
            lhs, rhs = gd.lemma1_check(sphere, cd, path, phi)
            assert lhs >= rhs - 1e-4, (length, phi.name)

    margins = []
    for length in (0.9 * math.pi, 0.95 * math.pi, 0.99 * math.pi):
        path = gd.integrate_geodesic(sphere, start, v0, length, steps=1500)
        phi = gd.phi_family(length)[0]
        lhs, rhs = gd.lemma1_check(sphere, cd, path, phi)
        margins.append(lhs - rhs)
        assert lhs >= rhs - 1e-4
    assert margins[0] > margins[1] > margins[2] > 0.0
    _report(4, "index-form-suite", f"(closing margins {[f'{m:.4f}' for m in margins]})")


# ---------------------------------------------------------------------------
# 5. Eigen solver
# ---------------------------------------------------------------------------

def test_criterion_5_eigen_solver(rng):
    hs = stab.line_in_flat(length=2.0)
    exact = math.pi**2 / 4.0
    errors = []
    for nodes in (200, 400):
        eig = stab.first_eigenpair(hs, stab.BoxDomain(axes=(np.linspace(-1, 1, nodes + 1),)))
        errors.append(abs(eig.lambda_ - exact))
    assert errors[0] / exact < 1e-3
    order = math.log2(errors[0] / errors[1])
    assert order >= 1.9

    equator = stab.equator_hypersurface(3)
    one = constant_field(1.0)
    worst = 0.0
    for _ in range(5):
        u = np.array([0.6 + 1.8 * rng.random(), 0.6 + 1.8 * rng.random(),
                      2 * math.pi * rng.random()])
        worst = max(worst, abs(stab.jacobi_apply_pointwise(equator, one, u) + 3.0))
    assert worst < 1e-6
    _report(5, "eigen-solver",
            f"(interval rel err {errors[0]/exact:.2e}, order {order:.2f}, "
            f"closed-surface residual {worst:.2e})")


# ---------------------------------------------------------------------------
# 6. Gauss-equation and traceless-inequality suites
# ---------------------------------------------------------------------------

def test_criterion_6_lemma_suite(rng):
    equator = stab.equator_hypersurface(3)
    worst = 0.0
    for _ in range(100):
        u = np.array([0.7 + 1.7 * rng.random(), 0.7 + 1.7 * rng.random(),
                      2 * math.pi * rng.random()])
        v = rng.normal(size=3)
        intrinsic, extrinsic = stab.gauss_ricci_identity(equator, u, v)
        worst = max(worst, abs(intrinsic - extrinsic))
    assert worst < 1e-4

    violations = 0
    for n in range(2, 7):
        for _ in range(10_000):
            diag = rng.normal(size=n)
            diag -= diag.mean()
            coeff = rng.normal(size=n)
            coeff /= np.linalg.norm(coeff)
            lhs, rhs = stab.lemma4_check(diag, coeff, trace_tol=1e-8)
            if lhs < rhs - 1e-10 * max(1.0, lhs):
                violations += 1
    assert violations == 0
    _report(6, "gauss-and-traceless-suite",
            f"(identity {worst:.2e}, 0 violations in 5x10^4 trials)")


# ---------------------------------------------------------------------------
# 7. Neck construction
# ---------------------------------------------------------------------------

def test_criterion_7_neck_construction():
    t0 = time.monotonic()
    sphere = ch.sphere_chart(4)
    scanned = cli.biricci_scan(sphere, 1.0, points=30, pairs_per_point=30, seed=0)
    kappa = scanned["min"]
    assert kappa == pytest.approx(5.0, abs=1e-3)

    profile = nk.build_profile(4, 1.0, kappa, 0.3, 6.0)
    assert profile.cert_margin >= 1e-3
    neck_chart = nk.neck_metric(sphere, profile)
    report = nk.certify_neck(neck_chart, 4, 1.0, shells=20, pairs_per_shell=200, seed=0)
    assert report.samples >= 20 * 200
    assert report.min_biricci > 0.0

    sweep = nk.rho_sweep(4, 1.0, kappa, 0.3, [4.0, 6.0, 8.0, 10.0])
    rhos = [s["rho"] for s in sweep]
    assert all(b < a for a, b in zip(rhos, rhos[1:]))
    assert rhos[-1] / rhos[0] < 0.1

    elapsed = time.monotonic() - t0
    assert elapsed < 600.0
    _report(7, "neck-construction",
            f"(min B {report.min_biricci:.3f} > 0, rho ratio {rhos[-1]/rhos[0]:.2e}, "
            f"{elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# 8. Frozen bound table
# ---------------------------------------------------------------------------

def test_criterion_8_bound_calculators():
    table = [
        (bd.BoundSpec(kind="thm1", n=3, kappa=2.0, epsilon=0.37), 3.141592653589793),
        (bd.BoundSpec(kind="thm1", n=5, kappa=4.0, epsilon=1.0), 3.5124073655203634),
        (bd.BoundSpec(kind="thm1", n=4, kappa=3.0, epsilon=1e30), 3.141592653589793),
        (bd.BoundSpec(kind="cor1", n=3, kappa=1.0, sigma=1.0), 4.442882938158366),
        (bd.BoundSpec(kind="cor1", n=3, kappa=4.0, sigma=2.0), 2.221441469079183),
        (bd.BoundSpec(kind="cor1", n=4, kappa=1.0, sigma=1.0), 6.283185307179586),
        (bd.BoundSpec(kind="thm2", n=3, kappa=2.0, sigma=1.0), 3.141592653589793),
        (bd.BoundSpec(kind="lemma7", n=3, kappa=1.0, a=2.0), 4.442882938158366),
        (bd.BoundSpec(kind="prop1-case1", n=2, m=4, kappa=1.0, sigma=1.0,
                      epsilon=0.02), 6.412749150809322),
        (bd.BoundSpec(kind="prop1-case2", n=3, m=5, kappa=1.0, sigma=1.0,
                      epsilon=0.03), 6.480610820006109),
        (bd.BoundSpec(kind="thm1prime", n=3, kappa=math.pi**2 / 2.0, epsilon=1.0,
                      delta=1.0), 9.65685424949238),
        (bd.BoundSpec(kind="cor1prime", n=3, kappa=math.pi**2 / 2.0, sigma=1.0,
                      delta=1.0), 9.65685424949238),
    ]
    for spec, expected in table:
        value = bd.primed_bound(spec) if spec.kind in ("thm1prime", "cor1prime") \
            else bd.bound_value(spec)
        assert abs(value - expected) < 1e-12, spec
    assert abs(bd.bm_constant(3, 1.0) - math.sqrt(2.0)) < 1e-12
    assert abs(bd.prop1_epsilon_threshold(2, 5, 1.0, 1.0) - 1.0 / (8 * math.pi + 2)) < 1e-12
    _report(8, "bound-calculators", "(12 frozen pairs to 1e-12)")


# ---------------------------------------------------------------------------
# 9. Positive bi-Ricci without positive Ricci
# ---------------------------------------------------------------------------

def test_criterion_9_product_witness():
    chart = ch.sphere_product_circle_chart(2, 1.0, 1.0)
    bi = cli.biricci_scan(chart, 1.0, points=40, pairs_per_point=40, seed=0)
    ric = cli.ricci_scan(chart, points=40, seed=0)
    assert bi["min"] > 0.0
    assert bi["min"] == pytest.approx(1.0, abs=1e-4)
    assert ric["min"] < 1e-6
    _report(9, "product-witness",
            f"(min bi-Ricci {bi['min']:.4f} > 0, min Ricci {ric['min']:.2e})")
