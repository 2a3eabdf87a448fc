"""Conformal factors, the conformal Ricci tensor, and transformation-law checks.

The conformal Ricci tensor associated with positive factor fields
``f_1..f_k`` and positive weights ``a_1..a_k`` is

    Ric^(f,a) = Ric - (Σ_i a_i f_i^{-1} Δf_i) h,

the single-factor case being ``Ric - σ (f^{-1} Δf) h``.  The weights also
fix the associated conformal metric ``h̃ = (Π f_i^{2 a_i}) h``; with k = 1
that is ``f^{2σ} h``.

The ``verify_*`` operations evaluate both sides of a transformation law
independently (direct curvature of the conformal chart vs. the law applied
on the base chart) and return the residual; agreement is the test.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import charts as ch
from .charts import Chart, CurvatureBundle, curvature_bundle
from .errors import DomainError, PathError, PositivityError
from .fields import ScalarField


@dataclass(frozen=True, eq=False)
class ConformalData:
    """Positive factor fields with positive weights.

    ``weights[i]`` plays the role of the exponent a_i (σ when k = 1).
    """

    factors: tuple[ScalarField, ...]
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float).ravel())
        if len(self.factors) != self.weights.size or len(self.factors) == 0:
            raise ValueError("need one positive weight per factor, k >= 1")
        if np.any(self.weights <= 0.0):
            raise PositivityError("conformal weights must be strictly positive")

    @property
    def k(self) -> int:
        return len(self.factors)

    def factor_values(self, x: np.ndarray) -> np.ndarray:
        vals = np.array([f.value(x) for f in self.factors])
        if np.any(vals <= 0.0):
            i = int(np.argmin(vals))
            raise PositivityError(
                f"conformal factor '{self.factors[i].name}' nonpositive at {np.asarray(x)}: "
                f"{vals[i]:.3e}", pivot=float(vals[i]))
        return vals

    def scale(self, x: np.ndarray) -> np.ndarray:
        """Π f_i^{2 a_i}, vectorized over leading axes."""
        x = np.asarray(x, dtype=float)
        out = np.ones(x.shape[:-1])
        for f, a in zip(self.factors, self.weights):
            out = out * np.asarray(f.fn(x), dtype=float) ** (2.0 * a)
        return out

    def log_eta_field(self) -> ScalarField:
        """ln η = Σ a_i ln f_i as a scalar field."""
        factors, weights = self.factors, self.weights

        def fn(x):
            x = np.asarray(x, dtype=float)
            out = np.zeros(x.shape[:-1])
            for f, a in zip(factors, weights):
                out = out + a * np.log(np.asarray(f.fn(x), dtype=float))
            return out

        grad = None
        if all(f.grad is not None for f in factors):
            def grad(x):  # noqa: F811
                x = np.asarray(x, dtype=float)
                out = np.zeros_like(x)
                for f, a in zip(factors, weights):
                    out = out + a * np.asarray(f.grad(x), dtype=float) \
                        / np.asarray(f.fn(x), dtype=float)[..., None]
                return out

        return ScalarField(fn, grad, name="ln(eta)")

    def eta_field(self) -> ScalarField:
        scale = self

        def fn(x):
            x = np.asarray(x, dtype=float)
            out = np.ones(x.shape[:-1])
            for f, a in zip(scale.factors, scale.weights):
                out = out * np.asarray(f.fn(x), dtype=float) ** a
            return out

        return ScalarField(fn, name="eta")

    def validate_on(self, chart: Chart, samples: int = 200, seed: int = 0) -> None:
        """Check strict positivity of every factor on a sample grid."""
        rng = np.random.default_rng(seed)
        lo, hi = chart.domain[:, 0], chart.domain[:, 1]
        pts = lo + (hi - lo) * rng.random((samples, chart.dim))
        for f in self.factors:
            vals = f.value_many(pts)
            if np.any(vals <= 0.0):
                raise PositivityError(
                    f"factor '{f.name}' nonpositive somewhere on {chart.name}",
                    pivot=float(np.min(vals)))


def single_factor(f: ScalarField, sigma: float) -> ConformalData:
    return ConformalData(factors=(f,), weights=np.array([sigma]))


def log_field(f: ScalarField) -> ScalarField:
    grad = None
    if f.grad is not None:
        def grad(x):  # noqa: F811
            return np.asarray(f.grad(x), dtype=float) \
                / np.asarray(f.fn(x), dtype=float)[..., None]
    return ScalarField(lambda x: np.log(np.asarray(f.fn(x), dtype=float)), grad,
                       name=f"ln({f.name})")


# ---------------------------------------------------------------------------
# The conformal Ricci tensor and conformal metric
# ---------------------------------------------------------------------------

def conformal_ricci(chart: Chart, cd: ConformalData, x: np.ndarray,
                    bundle: CurvatureBundle | None = None) -> np.ndarray:
    """Ric - (Σ_i a_i f_i^{-1} Δf_i) h at x, as a lowered symmetric 2-tensor."""
    b = bundle if bundle is not None else curvature_bundle(chart, x)
    vals = cd.factor_values(x)
    lap_term = 0.0
    for f, a, v in zip(cd.factors, cd.weights, vals):
        lap_term += a * ch.field_laplacian(chart, f, x, bundle=b) / v
    return b.ricci - lap_term * b.metric


def conformal_ricci_direction(chart: Chart, cd: ConformalData, x, v,
                              bundle: CurvatureBundle | None = None) -> float:
    """Ric^(f,a)(v, v) for a unit (in h) tangent vector v."""
    t = conformal_ricci(chart, cd, x, bundle=bundle)
    v = np.asarray(v, dtype=float)
    return float(v @ t @ v)


def conformal_metric(chart: Chart, cd: ConformalData) -> Chart:
    """Chart carrying h̃ = (Π f_i^{2 a_i}) h.

    The conformal chart composes base-metric and factor evaluations
    analytically; nothing is resampled, so no interpolation error stacks.
    """
    return ch.scaled_chart(chart, cd.scale, name=f"conformal({chart.name})")


# ---------------------------------------------------------------------------
# Transformation-law residual checks
# ---------------------------------------------------------------------------

def _residual_norm(lhs: np.ndarray, rhs: np.ndarray) -> float:
    """Max-norm difference, relative when entries exceed 1."""
    diff = float(np.max(np.abs(np.asarray(lhs) - np.asarray(rhs))))
    scale = max(1.0, float(np.max(np.abs(lhs))))
    return diff / scale


def verify_ricci_law(chart: Chart, eta: ScalarField, x: np.ndarray) -> float:
    """Residual of the conformal Ricci transformation law at x.

    Compares the Ricci tensor of η^2 h computed directly on the conformal
    chart against

        Ric - (Δ ln η) h - (n-2)(∇d ln η - d ln η ⊗ d ln η)
            - (n-2) |∇ ln η|^2 h

    evaluated with base-chart calculus.
    """
    n = chart.dim
    x = np.asarray(x, dtype=float)
    b = curvature_bundle(chart, x)
    ln_eta = log_field(eta)
    grad = ch.field_gradient(chart, ln_eta, x)
    hess = ch.field_hessian(chart, ln_eta, x, gamma=b.christoffel)
    lap = float(np.einsum("ij,ij->", b.inverse_metric, hess))
    norm2 = float(grad @ b.inverse_metric @ grad)
    rhs = (b.ricci - lap * b.metric
           - (n - 2) * (hess - np.outer(grad, grad))
           - (n - 2) * norm2 * b.metric)

    tilde = ch.scaled_chart(chart, lambda p: np.asarray(eta.fn(p), dtype=float) ** 2,
                            name=f"eta2({chart.name})")
    lhs = curvature_bundle(tilde, x).ricci
    return _residual_norm(lhs, rhs)


def verify_scalar_law(chart: Chart, eta: ScalarField, x: np.ndarray) -> float:
    """Residual of the conformal scalar-curvature law at x (n >= 3 only).

    Compares R of η^2 h computed directly against
    η^{-2} (R - 2(n-1) Δ ln η - (n-1)(n-2) |∇ ln η|^2).
    """
    n = chart.dim
    if n == 2:
        raise DomainError("scalar-law check requires dimension n >= 3 "
                          "(the Yamabe exponent 2/(n-2) is singular at n = 2)")
    x = np.asarray(x, dtype=float)
    b = curvature_bundle(chart, x)
    ln_eta = log_field(eta)
    lap = ch.field_laplacian(chart, ln_eta, x, bundle=b)
    norm2 = ch.grad_norm2(chart, ln_eta, x, g_inv=b.inverse_metric)
    e2 = float(eta.value(x)) ** 2
    rhs = (b.scalar - 2.0 * (n - 1) * lap - (n - 1) * (n - 2) * norm2) / e2

    tilde = ch.scaled_chart(chart, lambda p: np.asarray(eta.fn(p), dtype=float) ** 2,
                            name=f"eta2({chart.name})")
    lhs = curvature_bundle(tilde, x).scalar
    return abs(lhs - rhs) / max(1.0, abs(lhs))


def verify_yamabe_trace(chart: Chart, f: ScalarField, x: np.ndarray) -> float:
    """Residual of the scalar-curvature identity behind the trace weight.

    For n >= 3 and h̃ = f^{4/(n-2)} h (the conformal metric of the weight
    σ* = 4(n-1)/(n-2)), the scalar curvature of h̃ satisfies

        R̃ = f^{-4/(n-2)} (R - σ* f^{-1} Δf),

    which ties the σ* conformal Ricci tensor's Laplacian term to R̃.  The
    residual is |R̃ - rhs| with R̃ measured directly on the conformal chart.
    """
    n = chart.dim
    if n < 3:
        raise DomainError("trace identity requires n >= 3")
    sigma_star = 4.0 * (n - 1) / (n - 2)
    x = np.asarray(x, dtype=float)
    b = curvature_bundle(chart, x)
    fval = f.value(x)
    if fval <= 0.0:
        raise PositivityError(f"factor nonpositive at {x}: {fval:.3e}")
    lap = ch.field_laplacian(chart, f, x, bundle=b)
    rhs = fval ** (-4.0 / (n - 2)) * (b.scalar - sigma_star * lap / fval)

    tilde = ch.scaled_chart(
        chart, lambda p: np.asarray(f.fn(p), dtype=float) ** (4.0 / (n - 2)),
        name=f"yamabe({chart.name})")
    lhs = curvature_bundle(tilde, x).scalar
    return abs(lhs - rhs) / max(1.0, abs(lhs))


def verify_2_6(chart: Chart, cd: ConformalData, geodesic, x: np.ndarray) -> float:
    """Residual between the two expressions for the conformal Ricci curvature
    along a conformal geodesic.

    The direct side is ``Ric(v,v) - Σ a_i f_i^{-1} Δf_i`` at x with v the
    unit tangent of the path there.  The geodesic side is

        Ric_h̃(v, v) + (n-2) d²(ln η)/ds² - Σ_i a_i |∇ ln f_i|²,

    with ``d²/ds²`` taken by differencing ln η along the supplied
    unit-h-speed path.
    """
    x = np.asarray(x, dtype=float)
    xs = geodesic.points
    d = np.linalg.norm(chart.displacement(xs, x[None, :]), axis=-1)
    i = int(np.argmin(d))
    if d[i] > 1e-6 * max(1.0, float(np.max(np.abs(x)))):
        raise PathError(f"path does not pass through {x} (closest miss {d[i]:.3e})")
    v = geodesic.tangents[i]
    b = curvature_bundle(chart, x)
    speed = float(v @ b.metric @ v)
    if abs(speed - 1.0) > 1e-5:
        raise PathError(f"path is not unit h-speed at x (|t|^2 = {speed:.6f})")

    n = chart.dim
    lhs = conformal_ricci_direction(chart, cd, x, v, bundle=b)

    ln_eta = cd.log_eta_field()
    log_vals = ln_eta.value_many(xs)
    dd = _second_derivative_along(log_vals, geodesic.s, i)

    norm_term = 0.0
    for f, a in zip(cd.factors, cd.weights):
        norm_term += a * ch.grad_norm2(chart, log_field(f), x, g_inv=b.inverse_metric)

    tilde = conformal_metric(chart, cd)
    ric_tilde = curvature_bundle(tilde, x).ricci
    rhs = float(v @ ric_tilde @ v) + (n - 2) * dd - norm_term
    return abs(lhs - rhs) / max(1.0, abs(lhs))


def _second_derivative_along(values: np.ndarray, s: np.ndarray, i: int) -> float:
    """d²/ds² of sampled values at index i (uniform spacing assumed)."""
    m = values.size
    if m < 4:
        raise PathError("path too short to difference (need >= 4 samples)")
    ds = float(s[1] - s[0])
    if 2 <= i <= m - 3:
        w = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
        return float(w @ values[i - 2:i + 3]) / ds**2
    if i <= 1:
        w = np.array([2.0, -5.0, 4.0, -1.0])
        return float(w @ values[i:i + 4]) / ds**2
    w = np.array([-1.0, 4.0, -5.0, 2.0])
    return float(w @ values[i - 3:i + 1]) / ds**2
