from __future__ import annotations

import numpy as np
import pytest

from biriccilab import charts as ch


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260809)


@pytest.fixture(scope="session")
def flat3():
    return ch.flat_chart(3)


@pytest.fixture(scope="session")
def sphere2():
    return ch.sphere_chart(2)


@pytest.fixture(scope="session")
def sphere3():
    return ch.sphere_chart(3)


@pytest.fixture(scope="session")
def sphere4():
    return ch.sphere_chart(4)


@pytest.fixture(scope="session")
def hyperbolic():
    return ch.hyperbolic_plane_chart()


@pytest.fixture(scope="session")
def s2xs1():
    return ch.sphere_product_circle_chart(2, 1.0, 1.0)


def interior_points(chart, count, rng, margin=0.25):
    """Seeded interior sample, inset from every non-periodic face."""
    lo = chart.domain[:, 0].copy()
    hi = chart.domain[:, 1].copy()
    for i in range(chart.dim):
        if not chart.periodic[i]:
            inset = margin * min(1.0, hi[i] - lo[i])
            lo[i] += inset
            hi[i] -= inset
    return lo + (hi - lo) * rng.random((count, chart.dim))
