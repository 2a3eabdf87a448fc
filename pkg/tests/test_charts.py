"""Curvature kernel: tensors, symmetries, directional curvatures, field calculus."""

from __future__ import annotations

import math

import numpy as np
import pytest

from biriccilab import charts as ch
from biriccilab.errors import DomainError, FrameError, PositivityError, SubspaceError
from biriccilab.fields import ScalarField, constant_field

from conftest import interior_points

TOL = 1e-5


# ---------------------------------------------------------------------------
# Known curvature values
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("dim", [2, 3, 4, 5])
def test_flat_space_curvature_vanishes(dim, rng):
    chart = ch.flat_chart(dim)
    for x in interior_points(chart, 5, rng):
        b = ch.curvature_bundle(chart, x)
        assert np.max(np.abs(b.riemann)) < 1e-8
        assert np.max(np.abs(b.ricci)) < 1e-8
        assert abs(b.scalar) < 1e-8
        assert np.max(np.abs(b.christoffel)) < 1e-8


@pytest.mark.parametrize("dim", [2, 3, 4])
def test_round_sphere_scalar_and_ricci(dim, rng):
    chart = ch.sphere_chart(dim)
    for x in interior_points(chart, 5, rng):
        b = ch.curvature_bundle(chart, x)
        assert b.scalar == pytest.approx(dim * (dim - 1), abs=TOL)
        assert np.max(np.abs(b.ricci - (dim - 1) * b.metric)) < TOL


def test_sphere2_equator_point(sphere2):
    b = ch.curvature_bundle(sphere2, np.array([math.pi / 2, 0.3]))
    assert b.scalar == pytest.approx(2.0, abs=TOL)
    assert np.max(np.abs(b.ricci - b.metric)) < TOL


def test_hyperbolic_plane_curvature(hyperbolic, rng):
    for x in interior_points(hyperbolic, 5, rng, margin=0.1):
        b = ch.curvature_bundle(hyperbolic, x)
        assert b.scalar == pytest.approx(-2.0, abs=TOL)
        v, w = ch.gram_schmidt(np.eye(2), b.metric)
        assert ch.sectional(hyperbolic, x, v, w, bundle=b) == pytest.approx(-1.0, abs=TOL)


def test_sphere_radius_scaling():
    chart = ch.sphere_chart(2, radius=2.0)
    b = ch.curvature_bundle(chart, np.array([2.5, 1.0]))
    assert b.scalar == pytest.approx(0.5, abs=TOL)


# ---------------------------------------------------------------------------
# Tensor invariants
# ---------------------------------------------------------------------------

def _test_charts(flat3, sphere2, sphere3, sphere4, hyperbolic, s2xs1):
    return [flat3, sphere2, sphere3, sphere4, hyperbolic, s2xs1]


def test_riemann_symmetries_and_bianchi(flat3, sphere2, sphere3, sphere4,
                                        hyperbolic, s2xs1, rng):
    for chart in _test_charts(flat3, sphere2, sphere3, sphere4, hyperbolic, s2xs1):
        for x in interior_points(chart, 100, rng):
            b = ch.curvature_bundle(chart, x)
            assert b.symmetry_residual() < 1e-6
            assert b.contraction_residual() < 1e-6


def test_metric_not_positive_definite_reported():
    def metric(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = -1.0
        return out

    chart = ch.Chart(dim=2, domain=[[-1, 1], [-1, 1]], metric=metric, name="lorentz")
    with pytest.raises(PositivityError) as err:
        ch.curvature_bundle(chart, np.array([0.0, 0.0]))
    assert err.value.pivot is not None and err.value.pivot < 0


def test_point_outside_domain_rejected(sphere2, flat3):
    with pytest.raises(DomainError):
        ch.curvature_bundle(sphere2, np.array([-0.1, 0.3]))
    with pytest.raises(DomainError):
        ch.curvature_bundle(flat3, np.array([2.0001, 0.0, 0.0]))


# ---------------------------------------------------------------------------
# Sectional curvature
# ---------------------------------------------------------------------------

def test_sectional_constant_on_round_sphere(sphere3, rng):
    for x in interior_points(sphere3, 5, rng):
        b = ch.curvature_bundle(sphere3, x)
        frame = ch.gram_schmidt(rng.normal(size=(2, 3)), b.metric)
        assert ch.sectional(sphere3, x, frame[0], frame[1], bundle=b) == \
            pytest.approx(1.0, abs=TOL)


def test_sectional_plane_basis_invariance(sphere3, rng):
    x = np.array([1.2, 0.9, 0.7])
    b = ch.curvature_bundle(sphere3, x)
    v = rng.normal(size=3)
    w = rng.normal(size=3)
    k0 = ch.sectional(sphere3, x, v, w, bundle=b)
    for _ in range(20):
        a = rng.normal(size=(2, 2))
        while abs(np.linalg.det(a)) < 0.1:
            a = rng.normal(size=(2, 2))
        v2 = a[0, 0] * v + a[0, 1] * w
        w2 = a[1, 0] * v + a[1, 1] * w
        k1 = ch.sectional(sphere3, x, v2, w2, bundle=b)
        assert k1 == pytest.approx(k0, rel=1e-8)


def test_sectional_degenerate_plane_is_zero(flat3, sphere3):
    v = np.array([1.0, 0.0, 0.0])
    assert ch.sectional(flat3, np.zeros(3), v, v) == 0.0
    x = np.array([1.2, 0.9, 0.7])
    assert ch.sectional(sphere3, x, v, 2.0 * v) == 0.0


# ---------------------------------------------------------------------------
# Weighted bi-Ricci curvature
# ---------------------------------------------------------------------------

def test_bi_ricci_round_s3(sphere3, rng):
    x = np.array([1.3, 1.1, 2.0])
    b = ch.curvature_bundle(sphere3, x)
    v, w = ch.gram_schmidt(rng.normal(size=(2, 3)), b.metric)
    assert ch.bi_ricci(sphere3, x, v, w, 1.0, bundle=b) == pytest.approx(3.0, abs=TOL)
    # sign flips leave the value unchanged
    assert ch.bi_ricci(sphere3, x, -v, w, 1.0, bundle=b) == pytest.approx(3.0, abs=TOL)
    assert ch.bi_ricci(sphere3, x, v, -w, 1.0, bundle=b) == pytest.approx(3.0, abs=TOL)


def test_bi_ricci_flat_vanishes(rng):
    chart = ch.flat_chart(4)
    x = np.zeros(4)
    b = ch.curvature_bundle(chart, x)
    v, w = ch.gram_schmidt(rng.normal(size=(2, 4)), b.metric)
    assert abs(ch.bi_ricci(chart, x, v, w, 0.7, bundle=b)) < 1e-8


def test_bi_ricci_product_witness(s2xs1):
    # v tangent to the sphere factor, w the circle direction:
    # Ric(v) = 1, Ric(w) = 0, K(v, w) = 0.
    x = np.array([1.4, 0.8, 2.0])
    b = ch.curvature_bundle(s2xs1, x)
    v = np.array([1.0, 0.0, 0.0])
    w = np.array([0.0, 0.0, 1.0])
    v /= math.sqrt(b.metric[0, 0])
    w /= math.sqrt(b.metric[2, 2])
    assert ch.bi_ricci(s2xs1, x, v, w, 1.0, bundle=b) == pytest.approx(1.0, abs=TOL)


def test_bi_ricci_rejects_non_orthonormal(sphere3):
    x = np.array([1.3, 1.1, 2.0])
    v = np.array([1.0, 0.0, 0.0])
    with pytest.raises(FrameError):
        ch.bi_ricci(sphere3, x, v, 1.5 * v, 1.0)


def test_harmonic_weight_unfolds_definition(rng):
    chart = ch.sphere_chart(3)
    x = np.array([1.2, 1.0, 0.8])
    b = ch.curvature_bundle(chart, x)
    v, w = ch.gram_schmidt(rng.normal(size=(2, 3)), b.metric)
    # m = 3 gives sigma = 1/2; round S3 value 2 + 1 - 1 = 2.
    assert ch.harmonic_bi_ricci(chart, x, v, w, bundle=b) == pytest.approx(2.0, abs=TOL)
    chart4 = ch.sphere_chart(4)
    x4 = np.array([1.2, 1.0, 0.8, 1.5])
    b4 = ch.curvature_bundle(chart4, x4)
    v4, w4 = ch.gram_schmidt(rng.normal(size=(2, 4)), b4.metric)
    assert ch.harmonic_bi_ricci(chart4, x4, v4, w4, bundle=b4) == pytest.approx(
        ch.bi_ricci(chart4, x4, v4, w4, 2.0 / 3.0, bundle=b4), abs=1e-12)


def test_harmonic_flat_r4_vanishes(rng):
    chart = ch.flat_chart(4)
    x = 0.2 * rng.normal(size=4)
    b = ch.curvature_bundle(chart, x)
    v, w = ch.gram_schmidt(rng.normal(size=(2, 4)), b.metric)
    assert abs(ch.harmonic_bi_ricci(chart, x, v, w, bundle=b)) < 1e-8


def test_frame_sum_identity(flat3, sphere2, sphere3, hyperbolic, s2xs1, rng):
    # Sum of B_sigma over ordered orthonormal-frame pairs equals
    # ((n-1)(1+sigma) - 1) R; sigma = 1 gives (2(n-1)-1) R.
    for chart in (flat3, sphere2, sphere3, hyperbolic, s2xs1):
        for x in interior_points(chart, 3, rng):
            b = ch.curvature_bundle(chart, x)
            frame = ch.gram_schmidt(rng.normal(size=(chart.dim, chart.dim)), b.metric)
            assert frame.shape[0] == chart.dim
            for sigma in (1.0, 0.7):
                total = sum(
                    b.ric(frame[i]) + sigma * b.ric(frame[j]) - b.rm(frame[i], frame[j], frame[i], frame[j])
                    for i in range(chart.dim) for j in range(chart.dim) if i != j)
                n = chart.dim
                expected = ((n - 1) * (1 + sigma) - 1) * b.scalar
                assert total == pytest.approx(expected, abs=1e-6, rel=1e-6)


# ---------------------------------------------------------------------------
# Subspace curvature sum
# ---------------------------------------------------------------------------

def test_k_sigma_flat_vanishes(rng):
    chart = ch.flat_chart(5)
    x = np.zeros(5)
    b = ch.curvature_bundle(chart, x)
    basis = ch.gram_schmidt(rng.normal(size=(3, 5)), b.metric)
    assert abs(ch.k_sigma(chart, x, basis[0], basis, 1.0, bundle=b)) < 1e-8


def test_k_sigma_round_s5_term_count(rng):
    chart = ch.sphere_chart(5)
    x = np.array([1.2, 1.0, 0.9, 1.1, 0.7])
    b = ch.curvature_bundle(chart, x)
    basis = ch.gram_schmidt(rng.normal(size=(3, 5)), b.metric)
    # Two nondegenerate in-subspace planes plus 2x3 cross planes, all K = 1.
    val = ch.k_sigma(chart, x, basis[0], basis, 1.0, bundle=b)
    assert val == pytest.approx(8.0, abs=5 * TOL)


def test_k_sigma_basis_independence(sphere3, rng):
    x = np.array([1.3, 0.9, 1.4])
    b = ch.curvature_bundle(sphere3, x)
    basis = ch.gram_schmidt(rng.normal(size=(2, 3)), b.metric)
    v = basis[0]
    ref = ch.k_sigma(sphere3, x, v, basis, 0.8, bundle=b)
    for _ in range(5):
        mix = rng.normal(size=(2, 2))
        while abs(np.linalg.det(mix)) < 0.1:
            mix = rng.normal(size=(2, 2))
        other = mix @ basis
        assert ch.k_sigma(sphere3, x, v, other, 0.8, bundle=b) == \
            pytest.approx(ref, rel=1e-8, abs=1e-10)


def test_k_sigma_rejects_bad_subspaces(sphere3, rng):
    x = np.array([1.3, 0.9, 1.4])
    b = ch.curvature_bundle(sphere3, x)
    full = ch.gram_schmidt(rng.normal(size=(3, 3)), b.metric)
    with pytest.raises(SubspaceError):
        ch.k_sigma(sphere3, x, full[0], full, 1.0, bundle=b)
    two = full[:2]
    outside = full[2]
    with pytest.raises(SubspaceError):
        ch.k_sigma(sphere3, x, outside, two, 1.0, bundle=b)


# ---------------------------------------------------------------------------
# Frames
# ---------------------------------------------------------------------------

def test_gram_schmidt_orthonormal_under_metric(sphere3, rng):
    x = np.array([1.0, 1.2, 0.4])
    g = sphere3.metric_at(x)
    frame = ch.gram_schmidt(rng.normal(size=(3, 3)), g)
    tf = ch.make_frame(g, x, frame)
    assert tf.orthonormal


def test_frame_gram_matrix(flat3):
    v = np.array([[2.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    tf = ch.make_frame(flat3, np.zeros(3), v)
    assert tf.gram[0, 0] == pytest.approx(4.0)
    assert not tf.orthonormal


# ---------------------------------------------------------------------------
# Scalar-field calculus
# ---------------------------------------------------------------------------

def test_flat_laplacian_quadratic():
    chart = ch.flat_chart(2)
    f = ScalarField(lambda x: x[..., 0] ** 2 + x[..., 1] ** 2)
    assert ch.field_laplacian(chart, f, np.array([0.3, -0.7])) == \
        pytest.approx(4.0, abs=1e-8)


def test_sphere_laplacian_first_harmonic(sphere2, rng):
    # cos(theta) is the first spherical harmonic: Delta f = -2 f on S^2.
    f = ScalarField(lambda x: np.cos(x[..., 0]))
    for x in interior_points(sphere2, 5, rng):
        lap = ch.field_laplacian(sphere2, f, x)
        assert lap == pytest.approx(-2.0 * math.cos(x[0]), abs=1e-6)


def test_constant_field_derivatives(sphere3):
    f = constant_field(3.7)
    x = np.array([1.2, 1.0, 0.8])
    assert ch.field_laplacian(sphere3, f, x) == pytest.approx(0.0, abs=1e-9)
    assert np.max(np.abs(ch.field_hessian(sphere3, f, x))) < 1e-9


def test_hessian_matches_second_partials_in_flat():
    chart = ch.flat_chart(3)
    f = ScalarField(lambda x: x[..., 0] ** 2 * x[..., 1] + np.sin(x[..., 2]))
    x = np.array([0.4, -0.3, 0.9])
    hess = ch.field_hessian(chart, f, x)
    expect = np.array([
        [2 * x[1], 2 * x[0], 0.0],
        [2 * x[0], 0.0, 0.0],
        [0.0, 0.0, -math.sin(x[2])],
    ])
    assert np.max(np.abs(hess - expect)) < 1e-7


# ---------------------------------------------------------------------------
# Grid-sampled metrics
# ---------------------------------------------------------------------------

def _sphere_patch_grid(nodes):
    theta = np.linspace(0.6, math.pi - 0.6, nodes)
    phi = np.linspace(0.5, 2 * math.pi - 0.5, nodes)
    tt = theta[:, None] * np.ones_like(phi)[None, :]
    vals = np.zeros((nodes, nodes, 2, 2))
    vals[..., 0, 0] = 1.0
    vals[..., 1, 1] = np.sin(tt) ** 2
    return (theta, phi), vals


def test_grid_chart_matches_analytic_and_converges():
    pts = [np.array([1.4, 2.0]), np.array([1.1, 3.1]), np.array([1.9, 1.7])]
    errs = []
    for nodes in (17, 65):
        axes, vals = _sphere_patch_grid(nodes)
        chart = ch.grid_chart(axes, vals)
        errs.append(max(abs(ch.curvature_bundle(chart, x).scalar - 2.0) for x in pts))
    # Order over a 4x refinement; the cubic-interpolated path must be >= 2.
    order = 0.5 * math.log2(errs[0] / errs[1])
    assert errs[1] < 1e-3
    assert order >= 2.0


def test_grid_chart_rejects_points_outside_hull():
    axes, vals = _sphere_patch_grid(17)
    chart = ch.grid_chart(axes, vals)
    with pytest.raises(Exception):
        chart.metric_at(np.array([0.1, 0.1]))
