"""Conformal Ricci tensor, conformal metrics, and transformation-law checks."""

from __future__ import annotations

import math

import numpy as np
import pytest

from biriccilab import charts as ch
from biriccilab import conformal as cf
from biriccilab import geodesics as gd
from biriccilab.errors import DomainError, PositivityError
from biriccilab.fields import (ScalarField, constant_field, cos_axis_field,
                               exp_linear_field, gaussian_bump_field,
                               inverse_radius_field, stereographic_field)

from conftest import interior_points


# ---------------------------------------------------------------------------
# The conformal Ricci tensor
# ---------------------------------------------------------------------------

def test_unit_factor_reduces_to_ricci(sphere3, rng):
    cd = cf.single_factor(constant_field(1.0), 0.7)
    for x in interior_points(sphere3, 4, rng):
        b = ch.curvature_bundle(sphere3, x)
        out = cf.conformal_ricci(sphere3, cd, x, bundle=b)
        assert np.max(np.abs(out - b.ricci)) < 1e-12


def test_flat_exponential_factor_closed_form(rng):
    # f = e^x on flat R^2 has f^{-1} Δf = 1, so Ric^(f,1) = -h = -I.
    chart = ch.flat_chart(2)
    cd = cf.single_factor(exp_linear_field([1.0, 0.0]), 1.0)
    for x in interior_points(chart, 4, rng):
        out = cf.conformal_ricci(chart, cd, x)
        assert np.max(np.abs(out + np.eye(2))) < 1e-8


def test_factor_splitting_is_definition_unfolding(sphere3):
    f = cos_axis_field(0, 0.1, 1.2)
    g = exp_linear_field([0.0, 0.2, 0.0])
    x = np.array([1.3, 1.0, 0.8])
    pair = cf.ConformalData(factors=(f, g), weights=np.array([0.4, 0.9]))
    b = ch.curvature_bundle(sphere3, x)
    combined = cf.conformal_ricci(sphere3, pair, x, bundle=b)
    lap_f = ch.field_laplacian(sphere3, f, x, bundle=b)
    lap_g = ch.field_laplacian(sphere3, g, x, bundle=b)
    manual = b.ricci - (0.4 * lap_f / f.value(x) + 0.9 * lap_g / g.value(x)) * b.metric
    assert np.max(np.abs(combined - manual)) < 1e-10


def test_nonpositive_factor_rejected(flat3):
    bad = ScalarField(lambda x: x[..., 0], name="linear")
    cd = cf.single_factor(bad, 1.0)
    with pytest.raises(PositivityError):
        cf.conformal_ricci(flat3, cd, np.array([-0.5, 0.0, 0.0]))


def test_weights_must_be_positive():
    with pytest.raises(PositivityError):
        cf.ConformalData(factors=(constant_field(1.0),), weights=np.array([-1.0]))


# ---------------------------------------------------------------------------
# Conformal metric construction
# ---------------------------------------------------------------------------

def test_unit_factor_leaves_metric_unchanged(sphere3, rng):
    cd = cf.single_factor(constant_field(1.0), 1.3)
    tilde = cf.conformal_metric(sphere3, cd)
    pts = interior_points(sphere3, 10, rng)
    assert np.array_equal(tilde.metric_many(pts), sphere3.metric_many(pts))


def test_constant_factor_scales_metric():
    chart = ch.flat_chart(2)
    cd = cf.single_factor(constant_field(3.0), 1.0)
    tilde = cf.conformal_metric(chart, cd)
    g = tilde.metric_at(np.array([0.1, 0.2]))
    assert np.max(np.abs(g - 9.0 * np.eye(2))) < 1e-14


def test_inverse_radius_opens_a_tube():
    # 1/r on punctured flat R^3 with weight 1: r^{-2}(dr^2 + r^2 dΩ^2) is the
    # unit tube R x S^2, scalar curvature (m-1)(m-2) = 2, approached as r -> 0.
    chart = ch.flat_polar_chart(3, r_max=2.0)
    cd = cf.single_factor(
        ScalarField(lambda x: 1.0 / x[..., 0], name="1/r"), 1.0)
    tilde = cf.conformal_metric(chart, cd)
    for r in (0.15, 0.05):
        b = ch.curvature_bundle(tilde, np.array([r, 1.3, 2.0]))
        assert b.scalar == pytest.approx(2.0, abs=0.05)
    b = ch.curvature_bundle(tilde, np.array([0.01, 1.3, 2.0]))
    assert b.scalar == pytest.approx(2.0, abs=1e-3)


# ---------------------------------------------------------------------------
# Transformation laws (both-path residuals)
# ---------------------------------------------------------------------------

def test_ricci_law_trivial_factor(sphere2):
    x = np.array([1.2, 0.7])
    assert cf.verify_ricci_law(sphere2, constant_field(1.0), x) < 1e-12


@pytest.mark.parametrize("chart_name,factor", [
    ("flat3", exp_linear_field([1.0, 0.0, 0.0])),
    ("flat3", gaussian_bump_field([0.0, 0.3, -0.2], width=1.5)),
    ("sphere2", cos_axis_field(0, 0.15, 1.1)),
    ("hyperbolic", exp_linear_field([0.3, 0.0])),
])
def test_ricci_law_residuals(chart_name, factor, flat3, sphere2, hyperbolic, rng):
    chart = {"flat3": flat3, "sphere2": sphere2, "hyperbolic": hyperbolic}[chart_name]
    for x in interior_points(chart, 10, rng):
        assert cf.verify_ricci_law(chart, factor, x) < 1e-6


def test_scalar_law_rejects_dimension_two(hyperbolic):
    with pytest.raises(DomainError):
        cf.verify_scalar_law(hyperbolic, constant_field(1.0), np.array([0.0, 1.0]))


def test_scalar_law_residuals(flat3, sphere3, rng):
    factors = [exp_linear_field([0.4, 0.0, 0.0]),
               gaussian_bump_field([0.0, 0.0, 0.0], width=2.0),
               cos_axis_field(1, 0.1, 1.2)]
    for chart in (flat3, sphere3):
        for factor in factors:
            for x in interior_points(chart, 6, rng):
                assert cf.verify_scalar_law(chart, factor, x) < 1e-6


def test_yamabe_trace_identity(flat3, sphere3, rng):
    for chart in (flat3, sphere3, ch.flat_chart(4)):
        f = gaussian_bump_field([0.0] * chart.dim, width=2.0, amplitude=0.3)
        for x in interior_points(chart, 6, rng):
            assert cf.verify_yamabe_trace(chart, f, x) < 1e-5


def test_stereographic_factor_recovers_round_sphere():
    # f = 2/(1+|x|^2) on flat R^4: f^{4/(n-2)} h is the unit round S^4
    # in stereographic coordinates, scalar curvature 12.
    chart = ch.flat_chart(4, extent=2.0)
    f = stereographic_field(scale=2.0)
    tilde = ch.scaled_chart(chart, lambda p: np.asarray(f.fn(p)) ** 2.0,
                            name="stereographic-S4")
    for x in ([0.05, 0.0, -0.1, 0.02], [0.3, 0.2, 0.1, -0.2]):
        b = ch.curvature_bundle(tilde, np.asarray(x))
        assert b.scalar == pytest.approx(12.0, abs=1e-4)
        assert cf.verify_yamabe_trace(chart, f, np.asarray(x)) < 1e-5


# ---------------------------------------------------------------------------
# The geodesic-side expression
# ---------------------------------------------------------------------------

def test_geodesic_side_trivial_factor(flat3):
    cd = cf.single_factor(constant_field(1.0), 1.0)
    path = gd.integrate_conformal_geodesic(flat3, cd, np.zeros(3),
                                           np.array([1.0, 0.0, 0.0]), 1.0, steps=400)
    assert cf.verify_2_6(flat3, cd, path, np.zeros(3)) < 1e-10


def test_geodesic_side_flat_exponential():
    chart = ch.flat_chart(2, extent=6.0)
    cd = cf.single_factor(exp_linear_field([1.0, 0.0]), 1.0)
    x0 = np.zeros(2)
    path = gd.integrate_conformal_geodesic(chart, cd, x0, np.array([1.0, 0.0]),
                                           1.0, steps=2000)
    assert cf.verify_2_6(chart, cd, path, x0) < 1e-5


def test_geodesic_side_two_factors_on_s3(sphere3):
    cd = cf.ConformalData(
        factors=(cos_axis_field(0, 0.1, 1.0), exp_linear_field([0.0, 0.1, 0.0])),
        weights=np.array([0.5, 0.8]))
    x0 = np.array([1.4, 1.2, 0.8])
    v0 = np.array([1.0, 0.0, 0.0])
    path = gd.integrate_conformal_geodesic(sphere3, cd, x0, v0, 0.8, steps=2000)
    assert cf.verify_2_6(sphere3, cd, path, x0) < 1e-4


def test_geodesic_side_midpath_evaluation(sphere2):
    cd = cf.single_factor(cos_axis_field(0, 0.1, 1.0), 0.5)
    x0 = np.array([1.3, 0.4])
    v0 = np.array([1.0, 0.0])
    path = gd.integrate_conformal_geodesic(sphere2, cd, x0, v0, 0.6, steps=1200)
    mid = path.points[600]
    assert cf.verify_2_6(sphere2, cd, path, mid) < 1e-5
