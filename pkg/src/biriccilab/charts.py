"""Coordinate charts and pointwise curvature.

A :class:`Chart` is a coordinate box carrying a Riemannian metric field,
either an analytic callback or a grid of samples.  Every curvature quantity
in the package (Christoffel symbols, the fully-lowered Riemann tensor, Ricci,
scalar, sectional, weighted bi-Ricci, the subspace curvature sum, covariant
Hessians and trace Laplacians of scalar fields) is computed here from the
metric alone by high-order central finite differences.

Conventions
-----------
* Sign of the Riemann tensor is fixed so the unit round sphere has sectional
  curvature +1; ``Ric_ik = g^{jl} R_{ijkl}`` then gives ``Ric = (n-1) g`` on
  the unit n-sphere, and the scalar curvature is the g-trace of Ricci.
* The Laplacian is the trace of the covariant Hessian, so ``Δf > 0`` at a
  strict minimum.
* Degenerate 2-planes have sectional curvature 0 (consistent with the
  antisymmetry of the Riemann tensor), which keeps curvature sums over
  frames containing the reference vector well defined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, FrameError, PositivityError, SubspaceError
from .fields import ScalarField

# Shared tolerances (see the test suite for how they are exercised).
TOL_SYM = 1e-6      # Riemann symmetry / Bianchi residuals
TOL_FRAME = 1e-6    # orthonormality of supplied frames
TOL_MIN = 1e-6      # minimality residual of declared-minimal embeddings
TOL_EIG = 1e-8      # relative residual of eigenpairs

# Relative finite-difference steps.  First derivatives tolerate a smaller
# step than second derivatives, whose rounding error grows like eps/h^2;
# h2 ~ 1e-3 keeps the total error of a 4th-order stencil near 1e-10 for
# O(1) analytic metrics.
FD1_REL = 1e-4
FD2_REL = 1e-3

_FD1_OFFSETS = np.array([-2.0, -1.0, 1.0, 2.0])
# Integer stencil weights with a single final division, applied to
# center-subtracted differences (offsets -2, -1, 1, 2).
_FD1_WEIGHTS = np.array([1.0, -8.0, 8.0, -1.0])
_FD2_DIFF_WEIGHTS = np.array([-1.0, 16.0, 16.0, -1.0])


# ---------------------------------------------------------------------------
# Chart
# ---------------------------------------------------------------------------

MetricFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class PolarStructure:
    """Marks a chart as geodesic-polar around a point.

    The radial coordinate (axis 0 by convention) is the exact distance to
    the center, and the metric has warped-product form
    ``dr^2 + warp(r)^2 dΩ^2`` with ``dΩ^2`` the unit-sphere metric in the
    remaining coordinates.
    """

    warp: Callable[[np.ndarray], np.ndarray]
    warp_prime: Callable[[np.ndarray], np.ndarray] | None = None

    def radius(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(x[..., 0]) if x.ndim == 1 else x[..., 0]


@dataclass(frozen=True, eq=False)
class Chart:
    """Coordinate box with a metric field.

    Parameters
    ----------
    dim : int
        Number of coordinates n.
    domain : ndarray, shape (n, 2)
        Per-axis lower/upper bounds.
    metric : callable
        Maps ``(..., n)`` coordinate arrays to ``(..., n, n)`` symmetric
        matrices.  Must be vectorized over leading axes.
    kind : str
        ``"analytic"`` or ``"grid"``.
    periodic : tuple of bool
        Axes wrapped with period ``hi - lo`` (angles); stencils and
        samplers treat them as unbounded.
    fd_scales : callable, optional
        ``x -> (n,)`` array of per-axis stencil scales.  Defaults to
        ``max(1, |x_i|)``; polar charts use the radius on axis 0 so
        stencils shrink with the coordinate singularity.
    polar : PolarStructure, optional
        Present on geodesic-polar charts (required by the neck builder).
    meta : dict
        Free-form tags (builtin name, attached profiles, ...).
    """

    dim: int
    domain: np.ndarray
    metric: MetricFn
    kind: str = "analytic"
    name: str = "chart"
    periodic: tuple[bool, ...] = ()
    fd_scales: Callable[[np.ndarray], np.ndarray] | None = None
    polar: PolarStructure | None = None
    meta: dict | None = None

    def __post_init__(self):
        object.__setattr__(self, "domain", np.asarray(self.domain, dtype=float).reshape(self.dim, 2))
        if not self.periodic:
            object.__setattr__(self, "periodic", tuple(False for _ in range(self.dim)))

    # -- metric evaluation -------------------------------------------------

    def metric_at(self, x: np.ndarray, check: bool = False) -> np.ndarray:
        g = np.asarray(self.metric(np.asarray(x, dtype=float)), dtype=float)
        g = 0.5 * (g + np.swapaxes(g, -1, -2))
        if check:
            _require_spd(g, x)
        return g

    def metric_many(self, xs: np.ndarray) -> np.ndarray:
        g = np.asarray(self.metric(np.asarray(xs, dtype=float)), dtype=float)
        return 0.5 * (g + np.swapaxes(g, -1, -2))

    def inverse_metric_at(self, x: np.ndarray) -> np.ndarray:
        return np.linalg.inv(self.metric_at(x))

    def inner(self, x: np.ndarray, v: np.ndarray, w: np.ndarray) -> float:
        return float(v @ self.metric_at(x) @ w)

    def norm(self, x: np.ndarray, v: np.ndarray) -> float:
        return math.sqrt(max(self.inner(x, v, v), 0.0))

    # -- domain handling ---------------------------------------------------

    def contains(self, x: np.ndarray, margin: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        for i in range(self.dim):
            if self.periodic[i]:
                continue
            lo, hi = self.domain[i]
            if x[i] < lo + margin or x[i] > hi - margin:
                return False
        return True

    def require_interior(self, x: np.ndarray, margin) -> None:
        x = np.asarray(x, dtype=float)
        margins = np.broadcast_to(np.asarray(margin, dtype=float), (self.dim,))
        for i in range(self.dim):
            if self.periodic[i]:
                continue
            lo, hi = self.domain[i]
            if x[i] < lo + margins[i] or x[i] > hi - margins[i]:
                raise DomainError(
                    f"point {x} outside chart '{self.name}' on axis {i} "
                    f"(margin {margins[i]:g}, domain {self.domain.tolist()})"
                )

    def wrap(self, x: np.ndarray) -> np.ndarray:
        """Reduce periodic coordinates to their fundamental interval."""
        x = np.array(x, dtype=float)
        for i in range(self.dim):
            if self.periodic[i]:
                lo, hi = self.domain[i]
                x[..., i] = lo + np.mod(x[..., i] - lo, hi - lo)
        return x

    def displacement(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """b - a with the minimal image taken on periodic axes."""
        d = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
        for i in range(self.dim):
            if self.periodic[i]:
                period = self.domain[i, 1] - self.domain[i, 0]
                d[..., i] = (d[..., i] + 0.5 * period) % period - 0.5 * period
        return d

    def stencil_scales(self, x: np.ndarray) -> np.ndarray:
        if self.fd_scales is not None:
            return np.asarray(self.fd_scales(np.asarray(x, dtype=float)), dtype=float)
        return np.maximum(1.0, np.abs(np.asarray(x, dtype=float)))

    def extent(self) -> np.ndarray:
        return self.domain[:, 1] - self.domain[:, 0]


def _require_spd(g: np.ndarray, x) -> None:
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        ev = np.linalg.eigvalsh(g)
        raise PositivityError(
            f"metric not positive definite at {np.asarray(x)}: smallest eigenvalue {ev[0]:.3e}",
            pivot=float(ev[0]),
        ) from None


# ---------------------------------------------------------------------------
# Finite-difference jets
# ---------------------------------------------------------------------------

def _jet_stencil(x: np.ndarray, h1: np.ndarray, h2: np.ndarray):
    """All evaluation points for a full second-order jet at x.

    Layout: [center | first-derivative points (4 per axis) |
    diagonal-second points (4 per axis) | mixed points (16 per i<j pair)].
    """
    dim = x.size
    pts = [x]
    for i in range(dim):
        for o in _FD1_OFFSETS:
            p = x.copy()
            p[i] += o * h1[i]
            pts.append(p)
    for i in range(dim):
        for o in (-2.0, -1.0, 1.0, 2.0):
            p = x.copy()
            p[i] += o * h2[i]
            pts.append(p)
    for i in range(dim):
        for j in range(i + 1, dim):
            for oi in _FD1_OFFSETS:
                for oj in _FD1_OFFSETS:
                    p = x.copy()
                    p[i] += oi * h2[i]
                    p[j] += oj * h2[j]
                    pts.append(p)
    return np.array(pts)


def _jet_combine(vals: np.ndarray, dim: int, h1: np.ndarray, h2: np.ndarray):
    """Assemble value / gradient / Hessian from stencil evaluations.

    ``vals`` has shape ``(P, ...)`` where the trailing shape is that of one
    evaluation (scalar: (), metric: (n, n)).  All stencil weights sum to
    zero, so the combination is taken on center-subtracted differences:
    constants are annihilated exactly and cancellation error is reduced.
    """
    tail = vals.shape[1:]
    center = vals[0]
    diffs = vals - center[None]
    idx = 1

    first = np.zeros((dim,) + tail)
    for i in range(dim):
        block = diffs[idx:idx + 4]
        idx += 4
        first[i] = np.tensordot(_FD1_WEIGHTS, block, axes=(0, 0)) / (12.0 * h1[i])

    second = np.zeros((dim, dim) + tail)
    for i in range(dim):
        block = diffs[idx:idx + 4]
        idx += 4
        second[i, i] = np.tensordot(_FD2_DIFF_WEIGHTS, block, axes=(0, 0)) \
            / (12.0 * h2[i] ** 2)
    for i in range(dim):
        for j in range(i + 1, dim):
            block = diffs[idx:idx + 16].reshape((4, 4) + tail)
            idx += 16
            mixed = np.einsum("a,b,ab...->...", _FD1_WEIGHTS, _FD1_WEIGHTS, block)
            second[i, j] = mixed / (144.0 * h2[i] * h2[j])
            second[j, i] = second[i, j]
    return center, first, second


def metric_jet(chart: Chart, x: np.ndarray):
    """Metric with its first and second coordinate derivatives at x.

    Returns ``(g, dg, d2g)`` with ``dg[i] = ∂_i g`` and
    ``d2g[i, j] = ∂_i ∂_j g`` (symmetrized mixed stencils, so all tensor
    symmetries that follow from ``∂_i∂_j = ∂_j∂_i`` hold exactly).
    """
    x = np.asarray(x, dtype=float)
    scales = chart.stencil_scales(x)
    h1 = FD1_REL * scales
    h2 = FD2_REL * scales
    pts = _jet_stencil(x, h1, h2)
    vals = chart.metric_many(pts)
    return _jet_combine(vals, chart.dim, h1, h2)


def _first_derivative_stencil(x: np.ndarray, h1: np.ndarray):
    dim = x.size
    pts = [x]
    for i in range(dim):
        for o in _FD1_OFFSETS:
            p = x.copy()
            p[i] += o * h1[i]
            pts.append(p)
    return np.array(pts)


def metric_first_jet(chart: Chart, x: np.ndarray):
    """Metric and its first derivatives only (enough for Christoffels)."""
    x = np.asarray(x, dtype=float)
    h1 = FD1_REL * chart.stencil_scales(x)
    pts = _first_derivative_stencil(x, h1)
    vals = chart.metric_many(pts)
    g = vals[0]
    diffs = vals - g[None]
    dg = np.zeros((chart.dim,) + g.shape)
    idx = 1
    for i in range(chart.dim):
        dg[i] = np.tensordot(_FD1_WEIGHTS, diffs[idx:idx + 4], axes=(0, 0)) / (12.0 * h1[i])
        idx += 4
    return 0.5 * (g + g.T), dg


def christoffel_at(chart: Chart, x: np.ndarray) -> np.ndarray:
    """Γ^k_{ij} at x, shape (n, n, n) indexed [k, i, j]."""
    g, dg = metric_first_jet(chart, x)
    return _christoffel_from_jet(g, dg)


def _christoffel_from_jet(g: np.ndarray, dg: np.ndarray) -> np.ndarray:
    ginv = np.linalg.inv(g)
    # Γ^k_{ij} = 1/2 g^{kl} (∂_i g_{jl} + ∂_j g_{il} - ∂_l g_{ij}); dg[i] = ∂_i g
    sym = dg + np.einsum("jil->ijl", dg) - np.einsum("lij->ijl", dg)
    return 0.5 * np.einsum("kl,ijl->kij", ginv, sym)


# ---------------------------------------------------------------------------
# Curvature bundle
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CurvatureBundle:
    """All pointwise curvature tensors of a chart at one point.

    Attributes
    ----------
    point : ndarray
        Evaluation point.
    metric, inverse_metric : ndarray
        g and g^{-1} at the point.
    christoffel : ndarray, shape (n, n, n)
        Γ^k_{ij}, indexed [k, i, j].
    riemann : ndarray, shape (n, n, n, n)
        Fully lowered R_{ijkl}; round spheres give R_{ijij} > 0.
    ricci : ndarray
        Ric_{ik} = g^{jl} R_{ijkl}.
    scalar : float
        R = g^{ik} Ric_{ik}.
    """

    point: np.ndarray
    metric: np.ndarray
    inverse_metric: np.ndarray
    christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: float

    def rm(self, a, b, c, d) -> float:
        """Rm(a, b, c, d) on coordinate vectors."""
        return float(np.einsum("ijkl,i,j,k,l->", self.riemann, a, b, c, d))

    def ric(self, v, w=None) -> float:
        w = v if w is None else w
        return float(v @ self.ricci @ w)

    def symmetry_residual(self) -> float:
        """Max violation of the index symmetries and first Bianchi identity."""
        r = self.riemann
        res = max(
            float(np.max(np.abs(r + np.einsum("jikl->ijkl", r)))),
            float(np.max(np.abs(r + np.einsum("ijlk->ijkl", r)))),
            float(np.max(np.abs(r - np.einsum("klij->ijkl", r)))),
            float(np.max(np.abs(r + np.einsum("iklj->ijkl", r) + np.einsum("iljk->ijkl", r)))),
        )
        scale = max(1.0, float(np.max(np.abs(r))))
        return res / scale

    def contraction_residual(self) -> float:
        """Consistency of ricci/scalar with their definitions as contractions."""
        ric = np.einsum("jl,ijkl->ik", self.inverse_metric, self.riemann)
        sc = float(np.einsum("ik,ik->", self.inverse_metric, ric))
        scale = max(1.0, float(np.max(np.abs(ric))))
        return max(float(np.max(np.abs(ric - self.ricci))) / scale,
                   abs(sc - self.scalar) / max(1.0, abs(sc)))


def curvature_bundle(chart: Chart, x: np.ndarray) -> CurvatureBundle:
    """Compute Christoffel, Riemann, Ricci and scalar curvature at x.

    Preconditions: x interior to the chart with a margin of two stencil
    steps on every non-periodic axis, and g(x) positive definite.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (chart.dim,):
        raise DomainError(f"point shape {x.shape} does not match chart dimension {chart.dim}")
    margins = 4.0 * FD2_REL * chart.stencil_scales(x)
    chart.require_interior(x, margins)
    g, dg, d2g = metric_jet(chart, x)
    _require_spd(g, x)
    gamma = _christoffel_from_jet(g, dg)

    # R_{ijkl} = 1/2 (∂_i∂_l g_{jk} + ∂_j∂_k g_{il} - ∂_i∂_k g_{jl} - ∂_j∂_l g_{ik})
    #            + g_{pq} (Γ^p_{il} Γ^q_{jk} - Γ^p_{ik} Γ^q_{jl})
    d2 = d2g  # axes (i, j, a, b) = ∂_i ∂_j g_{ab}
    term = 0.5 * (
        np.einsum("iljk->ijkl", d2)
        + np.einsum("jkil->ijkl", d2)
        - np.einsum("ikjl->ijkl", d2)
        - np.einsum("jlik->ijkl", d2)
    )
    gg = np.einsum("pq,pil,qjk->ijkl", g, gamma, gamma) - np.einsum(
        "pq,pik,qjl->ijkl", g, gamma, gamma
    )
    riemann = term + gg
    ginv = np.linalg.inv(g)
    ricci = np.einsum("jl,ijkl->ik", ginv, riemann)
    scalar = float(np.einsum("ik,ik->", ginv, ricci))
    return CurvatureBundle(
        point=x, metric=g, inverse_metric=ginv, christoffel=gamma,
        riemann=riemann, ricci=ricci, scalar=scalar,
    )


# ---------------------------------------------------------------------------
# Frames and directional curvatures
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TangentFrame:
    """A list of tangent vectors with their Gram matrix under g."""

    vectors: np.ndarray  # (k, n)
    gram: np.ndarray     # (k, k)

    @property
    def orthonormal(self) -> bool:
        k = self.gram.shape[0]
        return bool(np.max(np.abs(self.gram - np.eye(k))) <= TOL_FRAME)


def make_frame(chart_or_g, x, vectors) -> TangentFrame:
    g = chart_or_g.metric_at(x) if isinstance(chart_or_g, Chart) else np.asarray(chart_or_g)
    v = np.asarray(vectors, dtype=float)
    return TangentFrame(vectors=v, gram=v @ g @ v.T)


def gram_schmidt(vectors: np.ndarray, g: np.ndarray, pivot: bool = True) -> np.ndarray:
    """Modified Gram-Schmidt under the inner product g, with pivoting.

    Ties are broken by input order, so frames are reproducible.  Vectors
    that become numerically dependent are dropped.
    """
    v = [np.asarray(w, dtype=float).copy() for w in vectors]
    out = []
    remaining = list(range(len(v)))
    while remaining:
        norms = [math.sqrt(max(float(v[i] @ g @ v[i]), 0.0)) for i in remaining]
        if pivot:
            j = int(np.argmax(norms))
        else:
            j = 0
        n = norms[j]
        i = remaining.pop(j)
        if n < 1e-12:
            continue
        e = v[i] / n
        out.append(e)
        for r in remaining:
            v[r] = v[r] - float(e @ g @ v[r]) * e
    return np.array(out)


def complete_frame(basis: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Extend an orthonormal set to a full orthonormal basis under g."""
    n = g.shape[0]
    candidates = list(basis) + list(np.eye(n))
    full = gram_schmidt(np.array(candidates), g, pivot=False)
    return full[:n]


def _check_unit(g: np.ndarray, v: np.ndarray, label: str) -> None:
    n2 = float(v @ g @ v)
    if abs(n2 - 1.0) > TOL_FRAME * 10:
        raise FrameError(f"{label} is not unit (|v|^2 = {n2:.3e})")


def sectional(chart: Chart, x, v, w, bundle: CurvatureBundle | None = None) -> float:
    """Sectional curvature of the plane spanned by v, w.

    Degenerate planes (v, w linearly dependent under g) return 0.
    """
    b = bundle if bundle is not None else curvature_bundle(chart, x)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    g = b.metric
    denom = float((v @ g @ v) * (w @ g @ w) - (v @ g @ w) ** 2)
    if denom <= 1e-14 * max(1.0, float(v @ g @ v) * float(w @ g @ w)):
        return 0.0
    return b.rm(v, w, v, w) / denom


def bi_ricci(chart: Chart, x, v, w, sigma: float,
             bundle: CurvatureBundle | None = None) -> float:
    """σ-weighted bi-Ricci curvature Ric(v,v) + σ Ric(w,w) - K(v,w).

    Requires (v, w) orthonormal under g(x); the plane term is then just the
    Riemann component Rm(v, w, v, w).
    """
    b = bundle if bundle is not None else curvature_bundle(chart, x)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    g = b.metric
    gram = np.array([[v @ g @ v, v @ g @ w], [v @ g @ w, w @ g @ w]])
    if np.max(np.abs(gram - np.eye(2))) > TOL_FRAME * 10:
        raise FrameError(f"(v, w) not an orthonormal pair: gram deviation "
                         f"{np.max(np.abs(gram - np.eye(2))):.3e}")
    return b.ric(v) + sigma * b.ric(w) - b.rm(v, w, v, w)


def harmonic_bi_ricci(chart: Chart, x, v, w,
                      bundle: CurvatureBundle | None = None) -> float:
    """bi_ricci at the harmonic weight σ = (m-2)/(m-1), m = chart.dim."""
    m = chart.dim
    return bi_ricci(chart, x, v, w, (m - 2) / (m - 1), bundle=bundle)


def k_sigma(chart: Chart, x, v, subspace_basis, sigma: float,
            bundle: CurvatureBundle | None = None) -> float:
    """Curvature sum Σ_i K(v, e_i) + σ Σ_{i,α} K(ν_α, e_i) over a subspace V.

    ``{e_i}`` is an orthonormal basis of V and ``{ν_α}`` of its orthogonal
    complement; terms are accumulated as Riemann components (partial Ricci
    traces), which makes the value independent of the basis supplied and
    lets degenerate planes contribute 0.  The basis need not be
    orthonormal; it is orthonormalized internally.
    """
    b = bundle if bundle is not None else curvature_bundle(chart, x)
    g = b.metric
    v = np.asarray(v, dtype=float)
    _check_unit(g, v, "v")
    raw = np.asarray(subspace_basis, dtype=float)
    basis = gram_schmidt(raw, g)
    k = basis.shape[0]
    n = chart.dim
    if k == 0 or k >= n:
        raise SubspaceError(f"V must be a nontrivial proper subspace (dim {k} of {n})")
    # v must lie in V
    proj = sum(float(e @ g @ v) * e for e in basis)
    if chart_vector_norm(g, v - proj) > 1e-8:
        raise SubspaceError("v does not lie in the supplied subspace V")
    full = complete_frame(basis, g)
    normals = full[k:]
    total = 0.0
    for e in basis:
        total += b.rm(v, e, v, e)
    for nu in normals:
        for e in basis:
            total += sigma * b.rm(nu, e, nu, e)
    return total


def chart_vector_norm(g: np.ndarray, v: np.ndarray) -> float:
    return math.sqrt(max(float(v @ g @ v), 0.0))


# ---------------------------------------------------------------------------
# Scalar-field calculus
# ---------------------------------------------------------------------------

def field_jet(chart: Chart, f: ScalarField, x: np.ndarray):
    """Value, coordinate gradient and coordinate Hessian of a scalar field."""
    x = np.asarray(x, dtype=float)
    scales = chart.stencil_scales(x)
    h1 = FD1_REL * scales
    h2 = FD2_REL * scales
    pts = _jet_stencil(x, h1, h2)
    vals = f.value_many(pts)
    val, grad, hess = _jet_combine(vals, chart.dim, h1, h2)
    if f.grad is not None:
        grad = np.asarray(f.grad(x), dtype=float)
    return float(val), grad, 0.5 * (hess + hess.T)


def field_gradient(chart: Chart, f: ScalarField, x: np.ndarray) -> np.ndarray:
    """Coordinate partials ∂_i f (a covector)."""
    if f.grad is not None:
        return np.asarray(f.grad(np.asarray(x, dtype=float)), dtype=float)
    x = np.asarray(x, dtype=float)
    h1 = FD1_REL * chart.stencil_scales(x)
    pts = _first_derivative_stencil(x, h1)
    vals = f.value_many(pts)
    diffs = vals - vals[0]
    grad = np.zeros(chart.dim)
    idx = 1
    for i in range(chart.dim):
        grad[i] = float(_FD1_WEIGHTS @ diffs[idx:idx + 4]) / (12.0 * h1[i])
        idx += 4
    return grad


def field_hessian(chart: Chart, f: ScalarField, x: np.ndarray,
                  gamma: np.ndarray | None = None) -> np.ndarray:
    """Covariant Hessian (∇df)_{ij} = ∂_i∂_j f - Γ^k_{ij} ∂_k f."""
    _, grad, hess = field_jet(chart, f, x)
    if gamma is None:
        gamma = christoffel_at(chart, x)
    return hess - np.einsum("kij,k->ij", gamma, grad)


def field_laplacian(chart: Chart, f: ScalarField, x: np.ndarray,
                    bundle: CurvatureBundle | None = None) -> float:
    """Trace Laplacian Δf = g^{ij} (∇df)_{ij}."""
    if bundle is not None:
        g_inv, gamma = bundle.inverse_metric, bundle.christoffel
    else:
        g, dg = metric_first_jet(chart, x)
        g_inv = np.linalg.inv(g)
        gamma = _christoffel_from_jet(g, dg)
    hess = field_hessian(chart, f, x, gamma=gamma)
    return float(np.einsum("ij,ij->", g_inv, hess))


def grad_vector(chart: Chart, f: ScalarField, x: np.ndarray,
                g_inv: np.ndarray | None = None) -> np.ndarray:
    """Metric gradient (∇f)^i = g^{ij} ∂_j f (a vector)."""
    if g_inv is None:
        g_inv = chart.inverse_metric_at(x)
    return g_inv @ field_gradient(chart, f, x)


def grad_norm2(chart: Chart, f: ScalarField, x: np.ndarray,
               g_inv: np.ndarray | None = None) -> float:
    """|∇f|^2 = g^{ij} ∂_i f ∂_j f."""
    if g_inv is None:
        g_inv = chart.inverse_metric_at(x)
    df = field_gradient(chart, f, x)
    return float(df @ g_inv @ df)


# ---------------------------------------------------------------------------
# Built-in charts
# ---------------------------------------------------------------------------

def flat_chart(dim: int, extent: float = 4.0, name: str | None = None) -> Chart:
    """Euclidean box [-extent/2, extent/2]^dim with the identity metric."""

    def metric(x):
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1] + (dim, dim)
        out = np.zeros(shape)
        out[...] = np.eye(dim)
        return out

    half = extent / 2.0
    return Chart(
        dim=dim,
        domain=[[-half, half]] * dim,
        metric=metric,
        name=name or f"flat-R{dim}",
        meta={"builtin": "flat", "params": {"dim": dim, "extent": extent}},
    )


def _unit_sphere_polar_diag(angles: np.ndarray, k: int) -> np.ndarray:
    """Diagonal of the unit-S^k polar metric: g_ii = Π_{j<i} sin^2 θ_j."""
    lead = angles.shape[:-1]
    diag = np.ones(lead + (k,))
    running = np.ones(lead)
    for i in range(1, k):
        running = running * np.sin(angles[..., i - 1]) ** 2
        diag[..., i] = running
    return diag


def _polar_fd_scales(dim: int, domain: np.ndarray, radial: bool):
    """Stencil scales for polar-type charts: shrink near coordinate poles."""

    def scales(x):
        x = np.asarray(x, dtype=float)
        s = np.ones(dim)
        start = 0
        if radial:
            s[0] = max(abs(float(x[0])) * 0.4, 1e-12)
            start = 1
        for i in range(start, dim - 1):
            lo, hi = domain[i]
            d = min(abs(float(x[i]) - lo), abs(hi - float(x[i])))
            s[i] = min(1.0, max(0.4 * d, 1e-12))
        return s

    return scales


def sphere_chart(dim: int, radius: float = 1.0, name: str | None = None) -> Chart:
    """Round S^dim of the given radius in geodesic polar coordinates.

    Coordinates (χ, θ_1, ..., θ_{dim-2}, φ) with χ the exact geodesic
    distance from the pole; the metric is
    dχ^2 + radius^2 sin^2(χ/radius) dΩ^2.
    """
    r = float(radius)

    def metric(x):
        x = np.asarray(x, dtype=float)
        lead = x.shape[:-1]
        diag = np.ones(lead + (dim,))
        if dim > 1:
            warp2 = (r * np.sin(x[..., 0] / r)) ** 2
            sub = _unit_sphere_polar_diag(x[..., 1:], dim - 1)
            diag[..., 1:] = warp2[..., None] * sub
        out = np.zeros(lead + (dim, dim))
        ii = np.arange(dim)
        out[..., ii, ii] = diag
        return out

    domain = [[0.0, math.pi * r]] + [[0.0, math.pi]] * (dim - 2) + [[0.0, 2.0 * math.pi]]
    if dim == 1:
        domain = [[0.0, 2.0 * math.pi * r]]
    dom = np.asarray(domain, dtype=float)
    periodic = tuple([False] * (dim - 1) + [True]) if dim > 1 else (True,)
    return Chart(
        dim=dim,
        domain=dom,
        metric=metric,
        name=name or f"S{dim}(r={r:g})",
        periodic=periodic,
        fd_scales=_polar_fd_scales(dim, dom, radial=True),
        polar=PolarStructure(
            warp=lambda rad: r * np.sin(np.asarray(rad) / r),
            warp_prime=lambda rad: np.cos(np.asarray(rad) / r),
        ),
        meta={"builtin": "sphere", "params": {"dim": dim, "radius": r}},
    )


def hyperbolic_plane_chart(x_extent: float = 4.0, y_range: tuple[float, float] = (0.05, 6.0),
                           name: str | None = None) -> Chart:
    """Upper half-plane model, g = (dx^2 + dy^2)/y^2, curvature -1."""

    def metric(x):
        x = np.asarray(x, dtype=float)
        lead = x.shape[:-1]
        out = np.zeros(lead + (2, 2))
        inv_y2 = 1.0 / x[..., 1] ** 2
        out[..., 0, 0] = inv_y2
        out[..., 1, 1] = inv_y2
        return out

    def scales(x):
        return np.array([max(1.0, abs(float(x[0]))), 0.4 * abs(float(x[1]))])

    return Chart(
        dim=2,
        domain=[[-x_extent / 2, x_extent / 2], list(y_range)],
        metric=metric,
        name=name or "hyperbolic-plane",
        fd_scales=scales,
        meta={"builtin": "hyperbolic", "params": {}},
    )


def circle_chart(radius: float = 1.0) -> Chart:
    def metric(x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape[:-1] + (1, 1), radius**2)
        return out

    return Chart(
        dim=1,
        domain=[[0.0, 2.0 * math.pi]],
        metric=metric,
        name=f"S1(r={radius:g})",
        periodic=(True,),
        meta={"builtin": "circle", "params": {"radius": radius}},
    )


def product_chart(a: Chart, b: Chart, name: str | None = None) -> Chart:
    """Riemannian product: block-diagonal metric on the product box."""
    dim = a.dim + b.dim

    def metric(x):
        x = np.asarray(x, dtype=float)
        lead = x.shape[:-1]
        out = np.zeros(lead + (dim, dim))
        out[..., : a.dim, : a.dim] = a.metric_many(x[..., : a.dim])
        out[..., a.dim:, a.dim:] = b.metric_many(x[..., a.dim:])
        return out

    def scales(x):
        x = np.asarray(x, dtype=float)
        return np.concatenate([a.stencil_scales(x[: a.dim]), b.stencil_scales(x[a.dim:])])

    return Chart(
        dim=dim,
        domain=np.vstack([a.domain, b.domain]),
        metric=metric,
        name=name or f"{a.name}x{b.name}",
        periodic=a.periodic + b.periodic,
        fd_scales=scales,
        meta={"builtin": "product", "parts": [a.meta, b.meta]},
    )


def sphere_product_circle_chart(sphere_dim: int = 2, sphere_radius: float = 1.0,
                                circle_radius: float = 1.0) -> Chart:
    """S^k(a) x S^1(c), the standard witness of positive bi-Ricci curvature
    without positive Ricci curvature."""
    return product_chart(
        sphere_chart(sphere_dim, sphere_radius), circle_chart(circle_radius),
        name=f"S{sphere_dim}(r={sphere_radius:g})xS1(r={circle_radius:g})",
    )


def cylinder_chart(dim: int, rho: float, length: float = 6.0) -> Chart:
    """R x S^{dim-1}(rho) in coordinates (s, angles)."""

    def metric(x):
        x = np.asarray(x, dtype=float)
        lead = x.shape[:-1]
        out = np.zeros(lead + (dim, dim))
        out[..., 0, 0] = 1.0
        sub = _unit_sphere_polar_diag(x[..., 1:], dim - 1)
        ii = np.arange(1, dim)
        out[..., ii, ii] = rho**2 * sub
        return out

    dom = np.asarray([[-length / 2, length / 2]] + [[0.0, math.pi]] * (dim - 2)
                     + [[0.0, 2.0 * math.pi]], dtype=float)
    return Chart(
        dim=dim,
        domain=dom,
        metric=metric,
        name=f"cylinder-RxS{dim-1}(rho={rho:g})",
        periodic=tuple([False] * (dim - 1) + [True]),
        fd_scales=_polar_fd_scales(dim, dom, radial=False),
        meta={"builtin": "cylinder", "params": {"dim": dim, "rho": rho}},
    )


def warped_polar_chart(dim: int, warp, warp_prime=None, r_max: float = math.pi,
                       name: str = "warped-polar", meta: dict | None = None) -> Chart:
    """Geodesic polar chart dr^2 + warp(r)^2 dΩ^2 around a point."""

    def metric(x):
        x = np.asarray(x, dtype=float)
        lead = x.shape[:-1]
        out = np.zeros(lead + (dim, dim))
        out[..., 0, 0] = 1.0
        w2 = np.asarray(warp(x[..., 0])) ** 2
        sub = _unit_sphere_polar_diag(x[..., 1:], dim - 1)
        ii = np.arange(1, dim)
        out[..., ii, ii] = w2[..., None] * sub
        return out

    dom = np.asarray([[0.0, r_max]] + [[0.0, math.pi]] * (dim - 2)
                     + [[0.0, 2.0 * math.pi]], dtype=float)
    return Chart(
        dim=dim,
        domain=dom,
        metric=metric,
        name=name,
        periodic=tuple([False] * (dim - 1) + [True]),
        fd_scales=_polar_fd_scales(dim, dom, radial=True),
        polar=PolarStructure(warp=warp, warp_prime=warp_prime),
        meta=meta or {"builtin": "warped-polar"},
    )


def flat_polar_chart(dim: int, r_max: float = 2.0) -> Chart:
    """Flat R^dim around the origin in polar coordinates (warp = r)."""
    return warped_polar_chart(
        dim, warp=lambda r: np.asarray(r, dtype=float),
        warp_prime=lambda r: np.ones_like(np.asarray(r, dtype=float)),
        r_max=r_max, name=f"flat-polar-R{dim}",
        meta={"builtin": "flat-polar", "params": {"dim": dim, "r_max": r_max}},
    )


def perturbed_sphere_chart(dim: int, eps: float = 0.05) -> Chart:
    """Warped polar chart with warp sin(r)(1 + eps sin^2 r): a sphere-like
    metric that is still exactly polar around its center."""

    def warp(r):
        r = np.asarray(r, dtype=float)
        return np.sin(r) * (1.0 + eps * np.sin(r) ** 2)

    def warp_prime(r):
        r = np.asarray(r, dtype=float)
        return np.cos(r) * (1.0 + 3.0 * eps * np.sin(r) ** 2)

    return warped_polar_chart(
        dim, warp=warp, warp_prime=warp_prime, r_max=math.pi * 0.9,
        name=f"perturbed-S{dim}(eps={eps:g})",
        meta={"builtin": "perturbed-sphere", "params": {"dim": dim, "eps": eps}},
    )


def torus_coordinates_s3_chart() -> Chart:
    """S^3 in torus coordinates (ξ, u, v): dξ^2 + cos^2ξ du^2 + sin^2ξ dv^2.

    The ξ = π/4 slice is the minimal flat torus used by the stability tests.
    """

    def metric(x):
        x = np.asarray(x, dtype=float)
        lead = x.shape[:-1]
        out = np.zeros(lead + (3, 3))
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = np.cos(x[..., 0]) ** 2
        out[..., 2, 2] = np.sin(x[..., 0]) ** 2
        return out

    def scales(x):
        x = np.asarray(x, dtype=float)
        d = min(abs(float(x[0])), abs(math.pi / 2 - float(x[0])))
        return np.array([min(1.0, max(0.4 * d, 1e-12)), 1.0, 1.0])

    return Chart(
        dim=3,
        domain=[[0.0, math.pi / 2], [0.0, 2 * math.pi], [0.0, 2 * math.pi]],
        metric=metric,
        name="S3-torus-coords",
        periodic=(False, True, True),
        fd_scales=scales,
        meta={"builtin": "s3-torus"},
    )


def scaled_chart(chart: Chart, factor_field, name: str | None = None) -> Chart:
    """Chart with metric pointwise-scaled by a positive function of x.

    ``factor_field`` maps ``(..., n)`` points to positive scalars; the new
    metric is factor * g.  Used by the conformal machinery.
    """

    def metric(x):
        x = np.asarray(x, dtype=float)
        return np.asarray(factor_field(x), dtype=float)[..., None, None] * chart.metric_many(x)

    return Chart(
        dim=chart.dim,
        domain=chart.domain.copy(),
        metric=metric,
        kind=chart.kind,
        name=name or f"scaled({chart.name})",
        periodic=chart.periodic,
        fd_scales=chart.fd_scales,
        polar=chart.polar,
        meta={"scaled-from": chart.name},
    )


def grid_chart(axes: Sequence[np.ndarray], values: np.ndarray,
               name: str = "grid-chart", interpolation: str = "cubic") -> Chart:
    """Chart whose metric is interpolated from grid samples.

    Parameters
    ----------
    axes : sequence of 1-D arrays
        Node coordinates per axis (uniform or not, strictly increasing).
    values : ndarray, shape (*resolution, dim, dim)
        Metric samples at the tensor-grid nodes.
    interpolation : str
        Passed to ``scipy.interpolate.RegularGridInterpolator``; the
        default cubic keeps interpolated curvature second-order accurate
        under grid refinement.
    """
    from scipy.interpolate import RegularGridInterpolator

    axes = [np.asarray(a, dtype=float) for a in axes]
    values = np.asarray(values, dtype=float)
    dim = len(axes)
    interp = RegularGridInterpolator(tuple(axes), values, method=interpolation,
                                     bounds_error=True)

    def metric(x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, dim)
        out = interp(flat)
        return out.reshape(x.shape[:-1] + (dim, dim))

    spacing = np.array([float(np.min(np.diff(a))) for a in axes])
    # Stencils must resolve the interpolant, not the (unknown) true metric:
    # tie the second-derivative step to a quarter of the grid spacing.
    def scales(x):
        return 0.25 * spacing / FD2_REL

    domain = [[float(a[0]), float(a[-1])] for a in axes]
    return Chart(
        dim=dim, domain=domain, metric=metric, kind="grid", name=name,
        fd_scales=scales,
        meta={"builtin": "grid", "resolution": [len(a) for a in axes]},
    )
