"""Closed-form diameter/size bound calculators.

Every quantitative bound in the package funnels through
:func:`bound_value` (plain closed forms) or :func:`primed_bound` (decaying
curvature floors, inverted through the monotone profile θ).  The admissible
parameter windows are enforced exactly as stated; an inadmissible spec
raises :class:`~biriccilab.errors.InadmissibleSpec` naming the violated
window.

Conventions
-----------
* ``n`` is the dimension of the manifold the bound speaks about (for the
  hypersurface bounds that is the surface dimension, one below the ambient
  dimension ``m``).
* The weighted Bonnet-Myers constant is

      c(n, σ) = sqrt(n - 1 + (n-3)^2 / (4/σ - n + 1)),

  valid for σ < 4/(n-1), with the boundary value σ = 4/(n-1) admitted only
  at n = 3 where c = sqrt(2).
* The primed bounds use θ(t) = t² / (1 + t^δ) (a strictly increasing
  function for 0 < δ < 2), or the based profile
  θ_p(t) = t² / (1 + (d₀ + t)^δ) when a base-point distance d₀ is given;
  the factor 2 applies only to the un-based form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InadmissibleSpec

KINDS = ("thm1", "cor1", "thm1prime", "cor1prime", "thm2", "lemma7",
         "prop1-case1", "prop1-case2")


@dataclass(frozen=True)
class BoundSpec:
    """Inputs of one closed-form bound.

    Fields are used per ``kind``; unused ones may stay None.

    kind        parameters used
    ----        ---------------
    thm1        n, kappa, epsilon
    cor1        n, kappa, sigma
    thm1prime   n, kappa, epsilon, delta
    cor1prime   n, kappa, sigma, delta
    thm2        n, kappa, sigma            (window (n-1)/n <= σ)
    lemma7      n, kappa, a                (total weight Σ a_i)
    prop1-case1 m, kappa, sigma, epsilon   (n = 2 surfaces, 4 <= m <= 9)
    prop1-case2 m, kappa, sigma, epsilon   (n = 3 surfaces, m = 5)
    """

    kind: str
    n: int
    kappa: float
    sigma: float | None = None
    epsilon: float | None = None
    a: float | None = None
    delta: float | None = None
    m: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InadmissibleSpec(f"unknown bound kind '{self.kind}' (choose from {KINDS})")
        if not self.kappa > 0.0:
            raise InadmissibleSpec(f"kappa must be positive (got {self.kappa})")
        if self.kind in ("thm1prime", "cor1prime"):
            if self.delta is None or not (0.0 < self.delta < 2.0):
                raise InadmissibleSpec(
                    f"primed bounds need 0 < delta < 2 (got {self.delta})")


def bm_constant(n: int, sigma: float) -> float:
    """The weighted Bonnet-Myers constant c(n, σ).

    Requires σ < 4/(n-1), or σ = 4/(n-1) with n = 3 (boundary case, where
    the (n-3)² term vanishes and c = sqrt(n-1)).
    """
    limit = 4.0 / (n - 1)
    if sigma < limit:
        return math.sqrt(n - 1 + (n - 3) ** 2 / (4.0 / sigma - n + 1.0))
    if n == 3 and math.isclose(sigma, limit, rel_tol=0.0, abs_tol=1e-12):
        return math.sqrt(n - 1)
    raise InadmissibleSpec(
        f"sigma={sigma:g} outside the window sigma < 4/(n-1) = {limit:g}"
        + (" (equality admitted only at n = 3)" if n != 3 else ""))


def _check_thm2_window(n: int, sigma: float) -> None:
    lo = (n - 1) / n
    if sigma < lo - 1e-12:
        raise InadmissibleSpec(
            f"sigma={sigma:g} below the hypersurface window sigma >= (n-1)/n = {lo:g}")


def _prop1_window(kind: str, m: int | None, sigma: float | None) -> int:
    if m is None or sigma is None:
        raise InadmissibleSpec(f"{kind} needs the ambient dimension m and sigma")
    if kind == "prop1-case1":
        if not (4 <= m <= 9):
            raise InadmissibleSpec(f"case 1 needs 4 <= m <= 9 (got m={m})")
        hi = 4.0 / (m - 2)
        if not (0.5 < sigma < hi):
            raise InadmissibleSpec(
                f"case 1 needs 1/2 < sigma < 4/(m-2) = {hi:g} (got {sigma:g})")
        return m
    if m != 5:
        raise InadmissibleSpec(f"case 2 needs m = 5 (got m={m})")
    if not (2.0 / 3.0 < sigma <= 1.0):
        raise InadmissibleSpec(f"case 2 needs 2/3 < sigma <= 1 (got {sigma:g})")
    return m


def prop1_epsilon_threshold(case: int, m: int, sigma: float, kappa: float) -> float:
    """Strict upper bound on the almost-flatness parameter ε.

    Case 1 (surface dimension 2, 4 <= m <= 9):
        ε < κ² / (2 (κ + 1 + ((m-2)σ / (4 - (m-2)σ)) π²))
    Case 2 (surface dimension 3, m = 5):
        ε < κ / (8π + 2κ)
    """
    if kappa <= 0.0:
        raise InadmissibleSpec(f"kappa must be positive (got {kappa})")
    if case == 1:
        _prop1_window("prop1-case1", m, sigma)
        frac = (m - 2) * sigma / (4.0 - (m - 2) * sigma)
        return kappa**2 / (2.0 * (kappa + 1.0 + frac * math.pi**2))
    if case == 2:
        _prop1_window("prop1-case2", m, sigma)
        return kappa / (8.0 * math.pi + 2.0 * kappa)
    raise InadmissibleSpec(f"case must be 1 or 2 (got {case})")


def bound_value(spec: BoundSpec) -> float:
    """Closed-form diameter/size bound for the given spec (a length)."""
    k, n, kappa = spec.kind, spec.n, spec.kappa
    if k == "thm1":
        if spec.epsilon is None or spec.epsilon <= 0.0:
            raise InadmissibleSpec("thm1 needs epsilon > 0")
        return math.sqrt(n - 1 + (n - 3) ** 2 / (4.0 * spec.epsilon)) * math.pi / math.sqrt(kappa)
    if k == "cor1":
        if spec.sigma is None:
            raise InadmissibleSpec("cor1 needs sigma")
        return bm_constant(n, spec.sigma) * math.pi / math.sqrt(kappa)
    if k == "thm2":
        if spec.sigma is None:
            raise InadmissibleSpec("thm2 needs sigma")
        _check_thm2_window(n, spec.sigma)
        return bm_constant(n, spec.sigma) * math.pi / math.sqrt(kappa)
    if k == "lemma7":
        if spec.a is None:
            raise InadmissibleSpec("lemma7 needs the total weight a")
        return bm_constant(n, spec.a) * math.pi / math.sqrt(kappa)
    if k == "prop1-case1":
        m = _prop1_window(k, spec.m, spec.sigma)
        if spec.epsilon is None:
            raise InadmissibleSpec("prop1 needs epsilon")
        thr = prop1_epsilon_threshold(1, m, spec.sigma, kappa)
        if not spec.epsilon < thr:
            raise InadmissibleSpec(
                f"epsilon={spec.epsilon:g} not below the case-1 threshold {thr:g}")
        frac = (m - 2) * spec.sigma / (4.0 - (m - 2) * spec.sigma)
        return math.sqrt(1.0 + frac) * math.sqrt(2.0) * math.pi / math.sqrt(kappa - 2.0 * spec.epsilon)
    if k == "prop1-case2":
        m = _prop1_window(k, spec.m, spec.sigma)
        if spec.epsilon is None:
            raise InadmissibleSpec("prop1 needs epsilon")
        thr = prop1_epsilon_threshold(2, m, spec.sigma, kappa)
        if not spec.epsilon < thr:
            raise InadmissibleSpec(
                f"epsilon={spec.epsilon:g} not below the case-2 threshold {thr:g}")
        return 2.0 * math.pi / math.sqrt(kappa - 2.0 * spec.epsilon)
    if k in ("thm1prime", "cor1prime"):
        raise InadmissibleSpec(f"{k} is a primed bound; use primed_bound()")
    raise InadmissibleSpec(f"unhandled kind {k}")


def theta(t: float, delta: float) -> float:
    """θ(t) = t² / (1 + t^δ); strictly increasing on t >= 0 for δ < 2."""
    return t * t / (1.0 + t**delta)


def theta_based(t: float, delta: float, p0_dist: float) -> float:
    """θ_p(t) = t² / (1 + (d₀ + t)^δ) for a base-point distance d₀ >= 0."""
    return t * t / (1.0 + (p0_dist + t) ** delta)


def theta_inverse(y: float, delta: float, p0_dist: float | None = None,
                  hi: float = 1e6, iterations: int = 200) -> float:
    """Invert θ (or θ_p) by monotone bisection on [0, hi]."""
    if not (0.0 < delta < 2.0):
        raise InadmissibleSpec(f"theta inverse needs 0 < delta < 2 (got {delta})")
    if y <= 0.0:
        return 0.0

    def f(t):
        return theta(t, delta) if p0_dist is None else theta_based(t, delta, p0_dist)

    lo_t, hi_t = 0.0, hi
    if f(hi_t) < y:
        raise InadmissibleSpec(f"theta inverse target {y:g} above range at t={hi:g}")
    for _ in range(iterations):
        mid = 0.5 * (lo_t + hi_t)
        if f(mid) < y:
            lo_t = mid
        else:
            hi_t = mid
    return 0.5 * (lo_t + hi_t)


def primed_bound(spec: BoundSpec, p0_dist: float | None = None) -> float:
    """Bound for curvature floors decaying like κ / (1 + dist^δ).

    With no base-point distance this is the global form
    ``2 θ^{-1}(C π² / κ)``; with ``p0_dist`` given it is the single-geodesic
    form ``θ_p^{-1}(C π² / κ)`` (factor 2 removed), where

        C = n - 1 + (n-3)²/(4ε)        for kind 'thm1prime'
        C = c(n, σ)²                    for kind 'cor1prime'.

    For hypersurface use, n is the surface dimension m - 1 and the constant
    keeps its σ dependence.
    """
    if spec.kind == "thm1prime":
        if spec.epsilon is None or spec.epsilon <= 0.0:
            raise InadmissibleSpec("thm1prime needs epsilon > 0")
        big_c = spec.n - 1 + (spec.n - 3) ** 2 / (4.0 * spec.epsilon)
    elif spec.kind == "cor1prime":
        if spec.sigma is None:
            raise InadmissibleSpec("cor1prime needs sigma")
        big_c = bm_constant(spec.n, spec.sigma) ** 2
    else:
        raise InadmissibleSpec(f"primed_bound handles primed kinds only (got {spec.kind})")
    target = big_c * math.pi**2 / spec.kappa
    inv = theta_inverse(target, spec.delta, p0_dist=p0_dist)
    return inv if p0_dist is not None else 2.0 * inv


def yang_inequality_gap(n: int, epsilon: float, x: float, y: float) -> float:
    """Slack of the weighted product inequality used in the bound proofs:

        (3-n) x y <= ((n-3)²/(4ε)) x² + ε y²,

    returned as rhs - lhs (nonnegative for every real x, y and ε > 0).
    """
    lhs = (3 - n) * x * y
    rhs = (n - 3) ** 2 / (4.0 * epsilon) * x**2 + epsilon * y**2
    return rhs - lhs
