"""Minimal-submanifold geometry: second fundamental form, the stability
(Jacobi) operator in codimension one and higher, first Dirichlet eigenpairs
on structured grids, and the curvature identities that tie the induced
geometry to the ambient one.

The Jacobi operator acting on a normal deformation φν is

    L φ = -Δ_S φ + (|∇^⊥ ν|² - |A_ν|² - Σ_i Rm(e_i, ν, e_i, ν)) φ,

which in codimension one (where ∇^⊥ν = 0 and Σ_i Rm(e_i,ν,e_i,ν) = Ric(ν,ν))
reduces to the familiar -Δ_S φ - (|A|² + Ric(ν)) φ.  Stability of a domain
is first Dirichlet eigenvalue λ >= 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import charts as ch
from .charts import (Chart, TOL_EIG, TOL_FRAME, TOL_MIN, curvature_bundle,
                     christoffel_at, gram_schmidt)
from .errors import EmbeddingError, GeometryError, PositivityError, SolverError
from .fields import ScalarField


# ---------------------------------------------------------------------------
# Hypersurfaces (and lower-codimension submanifolds)
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Hypersurface:
    """A parametrized submanifold of a chart.

    Parameters
    ----------
    ambient : Chart
        Ambient chart (dimension m).
    k : int
        Parameter dimension (m-1 for hypersurfaces, lower for higher
        codimension).
    param_domain : ndarray (k, 2)
        Parameter box.
    embed : callable
        ``(..., k) -> (..., m)``, vectorized.
    normal_frame : callable
        ``(k,) -> (codim, m)`` returning unit normals, orthonormal under
        g and orthogonal to the tangent space (checked to 1e-6).
    induced : Chart
        The induced-metric chart on the parameter box (builtins supply the
        analytic form).
    declared_minimal : bool
        Whether the embedding is analytically minimal; the mean-curvature
        residual is then asserted below 1e-6 wherever forms are computed.
    param_periodic : tuple of bool
        Periodic parameter axes (closed directions).
    polar_profile : (warp, warp') pair, optional
        Present when the induced metric is geodesic-polar around the first
        parameter axis; enables 1-D radial cap eigenproblems.
    """

    ambient: Chart
    k: int
    param_domain: np.ndarray
    embed: Callable[[np.ndarray], np.ndarray]
    normal_frame: Callable[[np.ndarray], np.ndarray]
    induced: Chart
    declared_minimal: bool = True
    param_periodic: tuple[bool, ...] = ()
    polar_profile: tuple[Callable, Callable] | None = None
    name: str = "hypersurface"

    def __post_init__(self):
        object.__setattr__(self, "param_domain",
                           np.asarray(self.param_domain, dtype=float).reshape(self.k, 2))
        if not self.param_periodic:
            object.__setattr__(self, "param_periodic", tuple(False for _ in range(self.k)))

    @property
    def codim(self) -> int:
        probe = 0.5 * (self.param_domain[:, 0] + self.param_domain[:, 1])
        return np.asarray(self.normal_frame(probe)).shape[0]

    def embed_many(self, us: np.ndarray) -> np.ndarray:
        return np.asarray(self.embed(np.asarray(us, dtype=float)), dtype=float)


def embedding_jet(hs: Hypersurface, u: np.ndarray):
    """Embedding point, Jacobian (m, k) and second derivatives (k, k, m)."""
    u = np.asarray(u, dtype=float)
    scales = np.maximum(1.0, np.abs(u))
    h1 = ch.FD1_REL * scales
    h2 = ch.FD2_REL * scales
    pts = ch._jet_stencil(u, h1, h2)
    vals = hs.embed_many(pts)
    x, first, second = ch._jet_combine(vals, hs.k, h1, h2)
    return np.asarray(x, dtype=float), first.T.copy(), second


@dataclass(frozen=True, eq=False)
class FundamentalForms:
    """Second fundamental form data at one parameter point.

    ``per_normal[α]`` is A_{ν_α} expressed in the orthonormal tangent frame
    whose parameter-space rows are ``frame_param`` (orthonormal under the
    induced metric).  ``normA2`` is |A|² summed over normals.
    """

    point_param: np.ndarray
    point_ambient: np.ndarray
    normals: np.ndarray            # (codim, m)
    frame_param: np.ndarray        # (k, k)
    frame_ambient: np.ndarray      # (k, m)
    induced_metric: np.ndarray     # (k, k)
    per_normal: np.ndarray         # (codim, k, k)
    normA2: float
    mean_curvature_vector: np.ndarray
    minimality_residual: float
    normal_gram_residual: float


def second_fundamental_form(hs: Hypersurface, u: np.ndarray) -> FundamentalForms:
    """A_{ν_α}(X, Y) = <∇_X Y, ν_α> from the ambient connection.

    Also returns |A|² and the mean curvature vector; declared-minimal
    surfaces are checked against the minimality tolerance.
    """
    u = np.asarray(u, dtype=float)
    x, jac, hess = embedding_jet(hs, u)
    g = hs.ambient.metric_at(x, check=True)
    gamma = christoffel_at(hs.ambient, x)
    nus = np.asarray(hs.normal_frame(u), dtype=float)
    codim = nus.shape[0]

    # Rank check via the g-Gram matrix of the Jacobian columns.
    gram = jac.T @ g @ jac
    sv = np.linalg.svd(gram, compute_uv=False)
    if sv[-1] < 1e-10 * max(1.0, sv[0]):
        raise EmbeddingError(f"embedding rank-deficient at {u} (singular value {sv[-1]:.3e})")

    # Normal-frame sanity: unit, mutually orthogonal, orthogonal to tangent.
    ngram = nus @ g @ nus.T
    tgram = nus @ g @ jac
    frame_res = max(float(np.max(np.abs(ngram - np.eye(codim)))),
                    float(np.max(np.abs(tgram))))
    if frame_res > 10 * TOL_FRAME:
        raise EmbeddingError(f"normal frame not orthonormal/normal at {u} "
                             f"(residual {frame_res:.3e})")

    # Coordinate second fundamental form: A_α(∂_a, ∂_b)
    # = <∂²emb/∂u_a∂u_b + Γ(J_a, J_b), ν_α>_g.
    accel = hess + np.einsum("kij,ia,jb->abk", gamma, jac, jac)
    a_coord = np.einsum("abk,kl,cl->cab", accel, g, nus)

    frame_param = gram_schmidt(np.eye(hs.k), gram, pivot=False)
    if frame_param.shape[0] != hs.k:
        raise EmbeddingError(f"could not build a full tangent frame at {u}")
    per_normal = np.einsum("ia,cab,jb->cij", frame_param, a_coord, frame_param)
    per_normal = 0.5 * (per_normal + np.swapaxes(per_normal, -1, -2))

    traces = np.einsum("cii->c", per_normal)
    h_vec = np.einsum("c,ck->k", traces, nus)
    residual = math.sqrt(max(float(h_vec @ g @ h_vec), 0.0))
    if hs.declared_minimal and residual > TOL_MIN:
        raise EmbeddingError(
            f"declared-minimal surface has |H| = {residual:.3e} > {TOL_MIN:g} at {u}")

    return FundamentalForms(
        point_param=u, point_ambient=x, normals=nus, frame_param=frame_param,
        frame_ambient=frame_param @ jac.T, induced_metric=gram,
        per_normal=per_normal, normA2=float(np.sum(per_normal**2)),
        mean_curvature_vector=h_vec, minimality_residual=residual,
        normal_gram_residual=frame_res,
    )


def normal_connection_norms(hs: Hypersurface, u: np.ndarray,
                            forms: FundamentalForms | None = None) -> np.ndarray:
    """|∇^⊥ ν_α|² for each normal, traced over an orthonormal tangent frame."""
    f = forms if forms is not None else second_fundamental_form(hs, u)
    u = np.asarray(u, dtype=float)
    scales = np.maximum(1.0, np.abs(u))
    h1 = ch.FD1_REL * scales
    pts = ch._first_derivative_stencil(u, h1)
    frames = np.array([hs.normal_frame(p) for p in pts])  # (P, codim, m)
    fdiffs = frames - frames[0][None]
    dnu = np.zeros((hs.k,) + frames.shape[1:])
    idx = 1
    for a in range(hs.k):
        dnu[a] = np.tensordot(ch._FD1_WEIGHTS, fdiffs[idx:idx + 4], axes=(0, 0)) / (12.0 * h1[a])
        idx += 4

    g = hs.ambient.metric_at(f.point_ambient)
    gamma = christoffel_at(hs.ambient, f.point_ambient)
    _, jac, _ = embedding_jet(hs, u)
    ginv_ind = np.linalg.inv(f.induced_metric)
    out = np.zeros(f.normals.shape[0])
    for alpha in range(f.normals.shape[0]):
        # D_a ν_α = ∂_a ν_α + Γ(J_a, ν_α); normal part against the frame.
        cov = dnu[:, alpha, :] + np.einsum("kij,ia,j->ak", gamma, jac, f.normals[alpha])
        m_comp = np.einsum("ak,kl,bl->ba", cov, g, f.normals)  # (codim, k)
        out[alpha] = float(np.einsum("ba,ab->", m_comp @ ginv_ind, m_comp.T))
    return out


def partial_ricci(bundle, direction: np.ndarray, frame_ambient: np.ndarray) -> float:
    """Σ_i Rm(d, e_i, d, e_i) over the rows of an ambient tangent frame."""
    return float(sum(bundle.rm(direction, e, direction, e) for e in frame_ambient))


def jacobi_coefficient(hs: Hypersurface, u: np.ndarray, normal_index: int = 0,
                       forms: FundamentalForms | None = None) -> float:
    """Zeroth-order coefficient q with L = -Δ_S + q.

    q = |∇^⊥ν|² - |A_ν|² - Σ_i Rm(e_i, ν, e_i, ν); in codimension one the
    first term vanishes and the last is Ric(ν, ν).
    """
    f = forms if forms is not None else second_fundamental_form(hs, u)
    codim = f.normals.shape[0]
    if hs.ambient.dim - 1 == hs.k and hs.ambient.dim < 3:
        raise EmbeddingError("codimension-one stability needs ambient dimension >= 3")
    nu = f.normals[normal_index]
    b = curvature_bundle(hs.ambient, f.point_ambient)
    rm_sum = partial_ricci(b, nu, f.frame_ambient)
    a_nu2 = float(np.sum(f.per_normal[normal_index] ** 2))
    perp2 = 0.0
    if codim > 1:
        perp2 = float(normal_connection_norms(hs, u, forms=f)[normal_index])
    return perp2 - a_nu2 - rm_sum


def jacobi_apply_pointwise(hs: Hypersurface, phi: ScalarField, u: np.ndarray,
                           normal_index: int = 0) -> float:
    """(L φ)(u) with Δ_S taken by the induced chart's stencil calculus."""
    lap = ch.field_laplacian(hs.induced, phi, np.asarray(u, dtype=float))
    q = jacobi_coefficient(hs, u, normal_index=normal_index)
    return -lap + q * phi.value(u)


# ---------------------------------------------------------------------------
# Structured Dirichlet domains and the discretized operator
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BoxDomain:
    """Tensor grid on a sub-box of the parameter space, Dirichlet on
    non-periodic faces.

    ``axes[i]`` are the node coordinates (boundary included on Dirichlet
    axes; for periodic axes supply one period without the duplicate
    endpoint).
    """

    axes: tuple[np.ndarray, ...]
    periodic: tuple[bool, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(np.asarray(a, dtype=float) for a in self.axes))
        if not self.periodic:
            object.__setattr__(self, "periodic", tuple(False for _ in self.axes))

    @property
    def k(self) -> int:
        return len(self.axes)

    def spacing(self) -> np.ndarray:
        return np.array([float(a[1] - a[0]) for a in self.axes])

    def interior_shape(self) -> tuple[int, ...]:
        return tuple(len(a) if p else len(a) - 2
                     for a, p in zip(self.axes, self.periodic))

    def interior_nodes(self) -> np.ndarray:
        slices = [a if p else a[1:-1] for a, p in zip(self.axes, self.periodic)]
        mesh = np.meshgrid(*slices, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True, eq=False)
class RadialCapDomain:
    """Geodesic cap 0 <= θ <= radius of a polar induced metric, reduced to
    the radial line (first Dirichlet eigenfunctions of caps are radial).

    Uses a staggered grid θ_j = (j + 1/2) h with even reflection at θ = 0
    and Dirichlet at θ = radius.
    """

    radius: float
    nodes: int = 400

    def grid(self) -> np.ndarray:
        h = self.radius / self.nodes
        return (np.arange(self.nodes) + 0.5) * h


def _box_operator(hs: Hypersurface, domain: BoxDomain, normal_index: int):
    """Sparse L = -Δ_S + q on the interior nodes of a box domain."""
    from scipy.sparse import lil_matrix

    kdim = domain.k
    shape = domain.interior_shape()
    n_unknown = int(np.prod(shape))
    hgrid = domain.spacing()
    nodes = domain.interior_nodes()

    ginv = np.linalg.inv(hs.induced.metric_many(nodes))

    # b^j = (1/sqrt(G)) ∂_i (sqrt(G) G^{ij}) by 4th-order differences of the
    # analytic induced metric around every node.
    def w_matrix(pts):
        gm = hs.induced.metric_many(pts)
        det = np.linalg.det(gm)
        return np.sqrt(np.maximum(det, 0.0))[..., None, None] * np.linalg.inv(gm)

    sqrtg = np.sqrt(np.maximum(np.linalg.det(hs.induced.metric_many(nodes)), 0.0))
    bvec = np.zeros((n_unknown, kdim))
    hd = ch.FD1_REL * np.maximum(1.0, np.abs(nodes))
    for i in range(kdim):
        acc = np.zeros((n_unknown, kdim, kdim))
        for off, wgt in zip(ch._FD1_OFFSETS, ch._FD1_WEIGHTS):
            shifted = nodes.copy()
            shifted[:, i] += off * hd[:, i]
            acc += wgt * w_matrix(shifted)
        acc /= 12.0 * hd[:, i][:, None, None]
        bvec += acc[:, i, :]
    bvec /= sqrtg[:, None]

    q = np.array([jacobi_coefficient(hs, u, normal_index=normal_index) for u in nodes])

    mat = lil_matrix((n_unknown, n_unknown))
    strides = np.cumprod((1,) + shape[::-1][:-1])[::-1]

    def flat(idx):
        return int(np.dot(idx, strides))

    def neighbor(idx, axis, step):
        j = list(idx)
        j[axis] += step
        size = shape[axis]
        if domain.periodic[axis]:
            j[axis] %= size
            return flat(j)
        if 0 <= j[axis] < size:
            return flat(j)
        return None  # Dirichlet ghost (value 0)

    for row, idx_tuple in enumerate(np.ndindex(*shape)):
        idx = np.array(idx_tuple)
        gi = ginv[row]
        b = bvec[row]
        # -Δ: diagonal second differences + first-order drift.
        diag = 0.0
        for a in range(kdim):
            c2 = gi[a, a] / hgrid[a] ** 2
            diag += 2.0 * c2
            for step, sgn in ((1, 1.0), (-1, -1.0)):
                col = neighbor(idx, a, step)
                val = -c2 - sgn * b[a] / (2.0 * hgrid[a])
                if col is not None:
                    mat[row, col] += val
        # Mixed terms (factor 2 for the i<j symmetric pair).
        for a in range(kdim):
            for bb in range(a + 1, kdim):
                c = 2.0 * gi[a, bb] / (4.0 * hgrid[a] * hgrid[bb])
                for sa, sb, sgn in ((1, 1, -1.0), (-1, -1, -1.0), (1, -1, 1.0), (-1, 1, 1.0)):
                    j = list(idx)
                    j[a] += sa
                    j[bb] += sb
                    ok = True
                    for axx in (a, bb):
                        if domain.periodic[axx]:
                            j[axx] %= shape[axx]
                        elif not (0 <= j[axx] < shape[axx]):
                            ok = False
                    if ok:
                        mat[row, flat(j)] += sgn * c
        mat[row, row] += diag + q[row]
    return mat.tocsr(), nodes, q


def _radial_operator(hs: Hypersurface, domain: RadialCapDomain, normal_index: int):
    """Sparse radial L on the staggered cap grid."""
    from scipy.sparse import lil_matrix

    if hs.polar_profile is None:
        raise GeometryError("radial cap domains need a polar induced metric")
    warp, warp_prime = hs.polar_profile
    theta = domain.grid()
    n = theta.size
    h = theta[1] - theta[0]
    mid = 0.5 * (hs.param_domain[1:, 0] + hs.param_domain[1:, 1])

    def param_point(t):
        return np.concatenate([[t], mid])

    # The coordinate frame degenerates at the cap center; evaluate the
    # smooth coefficient q at safe angles and extrapolate quadratically
    # into the (measure-starved) collar near θ = 0.
    theta_safe = max(0.5 * h, 0.03 * domain.radius, 8e-3)
    safe = theta >= theta_safe
    if np.count_nonzero(safe) < 4:
        safe = np.zeros_like(safe, dtype=bool)
        safe[-4:] = True
    q = np.empty(n)
    q[safe] = [jacobi_coefficient(hs, param_point(t), normal_index=normal_index)
               for t in theta[safe]]
    if not np.all(safe):
        t_fit = theta[safe][:4]
        coef = np.polyfit(t_fit, q[safe][:4], 2)
        q[~safe] = np.polyval(coef, theta[~safe])
    drift = (hs.k - 1) * np.asarray(warp_prime(theta)) / np.asarray(warp(theta))

    mat = lil_matrix((n, n))
    for j in range(n):
        c2 = 1.0 / h**2
        c1 = drift[j] / (2.0 * h)
        mat[j, j] = 2.0 * c2 + q[j]
        if j + 1 < n:
            mat[j, j + 1] = -c2 - c1
        # Dirichlet at θ = radius: ghost value -f_{n-1} (boundary midpoint 0).
        if j == n - 1:
            mat[j, j] += c2 + c1
        if j - 1 >= 0:
            mat[j, j - 1] = -c2 + c1
        else:
            # Even reflection across θ = 0.
            mat[j, j] += -c2 + c1
    nodes = np.array([param_point(t) for t in theta])
    return mat.tocsr(), nodes, q


def assemble_jacobi(hs: Hypersurface, domain, normal_index: int = 0):
    """Sparse matrix of L on the domain's unknowns, plus node coordinates."""
    if isinstance(domain, BoxDomain):
        return _box_operator(hs, domain, normal_index)
    if isinstance(domain, RadialCapDomain):
        return _radial_operator(hs, domain, normal_index)
    raise GeometryError(f"unsupported domain type {type(domain).__name__}")


def jacobi_operator(hs: Hypersurface, domain, phi_values: np.ndarray,
                    normal_index: int = 0) -> np.ndarray:
    """Apply the discretized L to interior grid values (Dirichlet ghosts 0)."""
    mat, _, _ = assemble_jacobi(hs, domain, normal_index=normal_index)
    flat = np.asarray(phi_values, dtype=float).ravel()
    if flat.size != mat.shape[0]:
        raise GeometryError(f"grid function has {flat.size} values, operator expects {mat.shape[0]}")
    out = mat @ flat
    return out.reshape(np.asarray(phi_values).shape)


# ---------------------------------------------------------------------------
# First Dirichlet eigenpair
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EigenResult:
    """Smallest Dirichlet eigenpair of the discretized Jacobi operator."""

    lambda_: float
    eigenfunction: np.ndarray
    residual: float
    domain: object
    hs: Hypersurface
    normal_index: int
    nodes: np.ndarray

    def as_field(self) -> ScalarField:
        """Interpolate the eigenfunction to a field on the induced chart."""
        if isinstance(self.domain, RadialCapDomain):
            from scipy.interpolate import CubicSpline

            theta = self.domain.grid()
            # Even extension through 0 and the Dirichlet zero at the rim.
            xs = np.concatenate([-theta[::-1], theta, [self.domain.radius]])
            ys = np.concatenate([self.eigenfunction[::-1], self.eigenfunction, [0.0]])
            spline = CubicSpline(xs, ys)

            def fn(x):
                x = np.asarray(x, dtype=float)
                return spline(x[..., 0])

            return ScalarField(fn, name="cap-eigenfunction")
        if isinstance(self.domain, BoxDomain):
            from scipy.interpolate import RegularGridInterpolator

            if any(self.domain.periodic):
                raise GeometryError("field interpolation supports non-periodic boxes only")
            axes = self.domain.axes
            shape = tuple(len(a) for a in axes)
            full = np.zeros(shape)
            core = tuple(slice(1, -1) for _ in axes)
            full[core] = self.eigenfunction.reshape(self.domain.interior_shape())
            interp = RegularGridInterpolator(axes, full, method="cubic", bounds_error=True)

            def fn(x):
                x = np.asarray(x, dtype=float)
                return interp(x.reshape(-1, len(axes))).reshape(x.shape[:-1])

            return ScalarField(fn, name="box-eigenfunction")
        raise GeometryError("unsupported domain for field interpolation")


def first_eigenpair(hs: Hypersurface, domain, normal_index: int = 0,
                    max_iterations: int = 500) -> EigenResult:
    """Smallest eigenvalue and positive eigenfunction of L on the domain.

    Shifted inverse power iteration, shift initialized below the Gershgorin
    lower bound, with a Rayleigh-quotient refinement once the residual is
    small.  The eigenfunction is sign-normalized positive with max 1;
    failed interior positivity is a hard error (it flags a broken
    discretization, the first eigenfunction cannot change sign).
    """
    from scipy.sparse import eye as speye
    from scipy.sparse.linalg import splu

    mat, nodes, _ = assemble_jacobi(hs, domain, normal_index=normal_index)
    n = mat.shape[0]
    row_abs = np.abs(mat).sum(axis=1).A1 if hasattr(np.abs(mat).sum(axis=1), "A1") \
        else np.asarray(np.abs(mat).sum(axis=1)).ravel()
    diag = mat.diagonal()
    gersh = float(np.min(2.0 * diag - row_abs))
    shift = gersh - 1.0

    def factor(s):
        return splu((mat - s * speye(n, format="csr")).tocsc())

    lu = factor(shift)
    v = np.ones(n) / math.sqrt(n)
    lam = float(v @ (mat @ v))
    res = math.inf
    refined = 0
    for it in range(max_iterations):
        y = lu.solve(v)
        nrm = np.linalg.norm(y)
        if not np.isfinite(nrm) or nrm == 0.0:
            raise SolverError("inverse iteration produced a null vector", residual=res)
        v = y / nrm
        lv = mat @ v
        lam = float(v @ lv)
        res = float(np.linalg.norm(lv - lam * v) / max(1.0, abs(lam)))
        if res < TOL_EIG:
            break
        # Rayleigh acceleration: refactor near the current estimate.
        if res < 1e-4 and refined < 3:
            shift = lam - max(1e-8, 1e-8 * abs(lam))
            lu = factor(shift)
            refined += 1
    else:
        raise SolverError(
            f"eigen iteration did not converge in {max_iterations} steps", residual=res)

    if np.sum(v) < 0:
        v = -v
    if np.min(v) <= 0.0:
        raise SolverError(
            f"first eigenfunction not interior-positive (min {np.min(v):.3e}); "
            "discretization is suspect", residual=res)
    v = v / np.max(v)
    return EigenResult(lambda_=lam, eigenfunction=v, residual=res, domain=domain,
                       hs=hs, normal_index=normal_index, nodes=nodes)


def lambda_s(hs: Hypersurface, domains, normal_index: int = 0) -> float:
    """inf of the first Dirichlet eigenvalue over a family of domains."""
    return min(first_eigenpair(hs, d, normal_index=normal_index).lambda_ for d in domains)


# ---------------------------------------------------------------------------
# Curvature identities on minimal submanifolds
# ---------------------------------------------------------------------------

def _unit_param_vector(forms: FundamentalForms, v_param: np.ndarray) -> np.ndarray:
    v = np.asarray(v_param, dtype=float)
    n2 = float(v @ forms.induced_metric @ v)
    if n2 <= 0.0:
        raise GeometryError("zero tangent vector")
    return v / math.sqrt(n2)


def lemma3_conformal_ricci(hs: Hypersurface, u: np.ndarray, v_param: np.ndarray,
                           sigma: float, eig: EigenResult) -> float:
    """Conformal Ricci curvature of the domain with the first eigenfunction
    as conformal factor, assembled from ambient data:

        Ric(v) + σ Ric(ν) - K(v, ν) + σ|A|² - Σ_i a_i² A_ii² + σλ,

    where A is diagonalized at the point and v = Σ a_i e_i in the
    diagonalizing frame.  The value is frame-independent; repeated
    eigenvalues of A simply leave the diagonalizing frame non-unique.
    """
    if hs.codim != 1:
        raise EmbeddingError("the eigenfunction identity is a codimension-one statement")
    forms = second_fundamental_form(hs, u)
    v = _unit_param_vector(forms, v_param)
    nu = forms.normals[0]
    b = curvature_bundle(hs.ambient, forms.point_ambient)

    a_on = forms.per_normal[0]
    evals, q_rot = np.linalg.eigh(a_on)
    coeff_on = forms.frame_param @ forms.induced_metric @ v  # v in the ON frame
    a_coeff = q_rot.T @ coeff_on

    _, jac, _ = embedding_jet(hs, u)
    v_amb = jac @ v
    value = (b.ric(v_amb) + sigma * b.ric(nu) - b.rm(v_amb, nu, v_amb, nu)
             + sigma * forms.normA2 - float(np.sum(a_coeff**2 * evals**2))
             + sigma * eig.lambda_)
    return float(value)


def gauss_ricci_identity(hs: Hypersurface, u: np.ndarray, v_param: np.ndarray) -> tuple[float, float]:
    """Both routes to the induced Ricci curvature Ric_S(v, v).

    Intrinsic: curvature bundle of the induced chart.  Extrinsic (via the
    Gauss equation and minimality): Ric(v) - K(v, ν) - Σ a_i² A_ii² in
    codimension one, or Σ_i Rm(v, e_i, v, e_i) - Σ_α Σ_i a_{i,α}² A_α,ii²
    in general.  Returns (intrinsic, extrinsic).
    """
    forms = second_fundamental_form(hs, u)
    v = _unit_param_vector(forms, v_param)
    intrinsic_b = curvature_bundle(hs.induced, u)
    intrinsic = intrinsic_b.ric(v)

    b = curvature_bundle(hs.ambient, forms.point_ambient)
    _, jac, _ = embedding_jet(hs, u)
    v_amb = jac @ v
    coeff_on = forms.frame_param @ forms.induced_metric @ v
    extrinsic = partial_ricci(b, v_amb, forms.frame_ambient)
    for alpha in range(forms.normals.shape[0]):
        evals, q_rot = np.linalg.eigh(forms.per_normal[alpha])
        a_coeff = q_rot.T @ coeff_on
        extrinsic -= float(np.sum(a_coeff**2 * evals**2))
    return float(intrinsic), float(extrinsic)


def lemma4_check(a_diag: np.ndarray, coeffs: np.ndarray,
                 trace_tol: float = 1e-10) -> tuple[float, float]:
    """Both sides of the traceless-diagonal inequality
    Σ A_ii² >= (n/(n-1)) Σ a_i² A_ii².

    ``a_diag`` is the diagonal of a trace-free A, ``coeffs`` a unit vector.
    Returns (lhs, rhs); the caller asserts lhs >= rhs.
    """
    a = np.asarray(a_diag, dtype=float)
    c = np.asarray(coeffs, dtype=float)
    if a.size != c.size or a.size < 2:
        raise GeometryError("need matching diagonal and coefficient vectors, n >= 2")
    tr = float(np.sum(a))
    if abs(tr) > trace_tol * max(1.0, float(np.max(np.abs(a)))):
        raise GeometryError(f"matrix not trace-free (trace {tr:.3e})")
    if abs(float(np.sum(c**2)) - 1.0) > 1e-10:
        raise GeometryError("coefficient vector not unit")
    n = a.size
    lhs = float(np.sum(a**2))
    rhs = n / (n - 1) * float(np.sum(c**2 * a**2))
    return lhs, rhs


def lemma9_lower_bound(hs: Hypersurface, u: np.ndarray, v_param: np.ndarray,
                       sigma_vec) -> float:
    """Lower-bound expression for the multi-factor conformal Ricci curvature
    of a stable domain with eigenfunction factors:

        Σ_i K(v, e_i) + Σ_α σ_α Σ_i K(ν_α, e_i) + Σ_α σ_α |A_{ν_α}|²
        - ((n-1)/n)|A|² - Σ_α σ_α |∇^⊥ ν_α|²,

    with the curvature sums taken as Riemann traces over an orthonormal
    tangent frame (basis independent).
    """
    sig = np.asarray(sigma_vec, dtype=float).ravel()
    forms = second_fundamental_form(hs, u)
    codim = forms.normals.shape[0]
    if codim == 0:
        raise EmbeddingError("codimension zero has no normal deformations")
    if sig.size != codim:
        raise GeometryError(f"need one weight per normal ({codim}), got {sig.size}")
    v = _unit_param_vector(forms, v_param)
    _, jac, _ = embedding_jet(hs, u)
    v_amb = jac @ v
    b = curvature_bundle(hs.ambient, forms.point_ambient)
    n = hs.k

    total = partial_ricci(b, v_amb, forms.frame_ambient)
    perp = normal_connection_norms(hs, u, forms=forms) if codim > 1 \
        else np.zeros(1)
    for alpha in range(codim):
        total += sig[alpha] * partial_ricci(b, forms.normals[alpha], forms.frame_ambient)
        total += sig[alpha] * float(np.sum(forms.per_normal[alpha] ** 2))
        total -= sig[alpha] * float(perp[alpha])
    total -= (n - 1) / n * forms.normA2
    return float(total)


def almost_flat_epsilon(hs: Hypersurface, us: np.ndarray, sigma: float,
                        boundary_dist: np.ndarray) -> float:
    """Smallest ε making the almost-flat normal-frame condition hold on the
    sampled points:

        Σ_α |∇^⊥ ν_α|² <= (σ - (n-1)/n)|A|² + ε (1 + dist²(p, ∂S')).
    """
    us = np.asarray(us, dtype=float)
    d = np.asarray(boundary_dist, dtype=float)
    n = hs.k
    worst = 0.0
    for u, dist in zip(us, d):
        forms = second_fundamental_form(hs, u)
        perp = float(np.sum(normal_connection_norms(hs, u, forms=forms)))
        slack = perp - (sigma - (n - 1) / n) * forms.normA2
        if slack > 0.0:
            worst = max(worst, slack / (1.0 + dist**2))
    return worst


def second_variation_quadrature(hs: Hypersurface, domain, phi_values: np.ndarray,
                                normal_index: int = 0) -> float:
    """Quadrature of the second variation of area for the deformation φν:

        I(φν) = ∫ (|∇φ|² + (|∇^⊥ν|² - |A_ν|² - Σ Rm(e_i,ν,e_i,ν)) φ²) dA.

    Stability of the domain makes this nonnegative for admissible φ.
    """
    if isinstance(domain, RadialCapDomain):
        if hs.polar_profile is None:
            raise GeometryError("radial quadrature needs a polar profile")
        warp, _ = hs.polar_profile
        theta = domain.grid()
        h = theta[1] - theta[0]
        mid = 0.5 * (hs.param_domain[1:, 0] + hs.param_domain[1:, 1])
        phi = np.asarray(phi_values, dtype=float)
        # Even at 0, Dirichlet at the rim.
        dphi = np.gradient(phi, h)
        q = np.array([jacobi_coefficient(hs, np.concatenate([[t], mid]),
                                         normal_index=normal_index) for t in theta])
        weight = np.asarray(warp(theta)) ** (hs.k - 1)
        return float(np.sum((dphi**2 + q * phi**2) * weight) * h)
    if isinstance(domain, BoxDomain):
        mat, nodes, _ = assemble_jacobi(hs, domain, normal_index=normal_index)
        phi = np.asarray(phi_values, dtype=float).ravel()
        vol = np.sqrt(np.maximum(np.linalg.det(hs.induced.metric_many(nodes)), 0.0))
        cell = float(np.prod(domain.spacing()))
        # ∫ φ (Lφ) dA is the discrete I(φν) after integration by parts.
        return float(np.sum(phi * (mat @ phi) * vol) * cell)
    raise GeometryError(f"unsupported domain type {type(domain).__name__}")


# ---------------------------------------------------------------------------
# Built-in submanifolds
# ---------------------------------------------------------------------------

def equator_hypersurface(n: int) -> Hypersurface:
    """Totally geodesic equator S^n inside the round S^{n+1}."""
    ambient = ch.sphere_chart(n + 1)
    induced = ch.sphere_chart(n)

    def embed(u):
        u = np.asarray(u, dtype=float)
        out = np.empty(u.shape[:-1] + (n + 1,))
        out[..., 0] = math.pi / 2
        out[..., 1:] = u
        return out

    def normal_frame(u):
        e = np.zeros((1, n + 1))
        e[0, 0] = 1.0
        return e

    return Hypersurface(
        ambient=ambient, k=n, param_domain=induced.domain, embed=embed,
        normal_frame=normal_frame, induced=induced, declared_minimal=True,
        param_periodic=induced.periodic,
        polar_profile=(lambda t: np.sin(np.asarray(t, dtype=float)),
                       lambda t: np.cos(np.asarray(t, dtype=float))),
        name=f"equator-S{n}-in-S{n+1}",
    )


def plane_in_flat(extent: float = 2.0) -> Hypersurface:
    """A coordinate 2-plane inside flat R^3."""
    ambient = ch.flat_chart(3, extent=extent + 2.0)
    induced = ch.flat_chart(2, extent=extent)

    def embed(u):
        u = np.asarray(u, dtype=float)
        out = np.zeros(u.shape[:-1] + (3,))
        out[..., :2] = u
        return out

    return Hypersurface(
        ambient=ambient, k=2, param_domain=induced.domain, embed=embed,
        normal_frame=lambda u: np.array([[0.0, 0.0, 1.0]]), induced=induced,
        declared_minimal=True, name="plane-in-R3",
    )


def line_in_flat(length: float = 2.0) -> Hypersurface:
    """A straight line in flat R^3 (codimension 2); L reduces to -d²/ds²."""
    ambient = ch.flat_chart(3, extent=length + 2.0)

    def embed(u):
        u = np.asarray(u, dtype=float)
        out = np.zeros(u.shape[:-1] + (3,))
        out[..., 0] = u[..., 0]
        return out

    induced = Chart(dim=1, domain=[[-length / 2, length / 2]],
                    metric=lambda x: np.ones(np.asarray(x).shape[:-1] + (1, 1)),
                    name="line")
    return Hypersurface(
        ambient=ambient, k=1, param_domain=induced.domain, embed=embed,
        normal_frame=lambda u: np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
        induced=induced, declared_minimal=True, name="line-in-R3",
    )


def sphere_in_flat(m: int, radius: float = 1.0) -> Hypersurface:
    """Round S^{m-1}(r) in flat R^m with the inward normal (A = G/r).

    Not minimal; used to exercise the second-fundamental-form closed form.
    """
    ambient = ch.flat_chart(m, extent=4.0 * radius)
    induced = ch.sphere_chart(m - 1, radius=radius)

    def direction(u):
        u = np.asarray(u, dtype=float)
        k = m - 1
        out = np.empty(u.shape[:-1] + (m,))
        sin_prod = np.ones(u.shape[:-1])
        for i in range(k):
            out[..., i] = sin_prod * np.cos(u[..., i])
            sin_prod = sin_prod * np.sin(u[..., i])
        out[..., k] = sin_prod
        return out

    def embed(u):
        # Induced polar coordinates of sphere_chart are arc-length in the
        # first axis (χ = r θ); convert to unit angles before embedding.
        u = np.asarray(u, dtype=float)
        ang = u.copy()
        ang[..., 0] = u[..., 0] / radius
        return radius * direction(ang)

    def normal_frame(u):
        u = np.asarray(u, dtype=float)
        ang = u.copy()
        ang[0] = u[0] / radius
        return -direction(ang)[None, :]

    return Hypersurface(
        ambient=ambient, k=m - 1, param_domain=induced.domain, embed=embed,
        normal_frame=normal_frame, induced=induced, declared_minimal=False,
        param_periodic=induced.periodic,
        polar_profile=(lambda t: radius * np.sin(np.asarray(t, dtype=float) / radius),
                       lambda t: np.cos(np.asarray(t, dtype=float) / radius)),
        name=f"S{m-1}(r={radius:g})-in-R{m}",
    )


def clifford_torus() -> Hypersurface:
    """The minimal square torus inside S^3 (torus coordinates ξ = π/4)."""
    ambient = ch.torus_coordinates_s3_chart()

    def embed(u):
        u = np.asarray(u, dtype=float)
        out = np.empty(u.shape[:-1] + (3,))
        out[..., 0] = math.pi / 4
        out[..., 1:] = u
        return out

    def metric(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = 0.5
        out[..., 1, 1] = 0.5
        return out

    induced = Chart(dim=2, domain=[[0.0, 2 * math.pi]] * 2, metric=metric,
                    periodic=(True, True), name="clifford-torus")
    return Hypersurface(
        ambient=ambient, k=2, param_domain=induced.domain, embed=embed,
        normal_frame=lambda u: np.array([[1.0, 0.0, 0.0]]), induced=induced,
        declared_minimal=True, param_periodic=(True, True), name="clifford-torus-in-S3",
    )


def equator2_in_s4() -> Hypersurface:
    """Totally geodesic S^2 in S^4 (codimension 2, flat normal bundle)."""
    ambient = ch.sphere_chart(4)
    induced = ch.sphere_chart(2)

    def embed(u):
        u = np.asarray(u, dtype=float)
        out = np.empty(u.shape[:-1] + (4,))
        out[..., 0] = math.pi / 2
        out[..., 1] = math.pi / 2
        out[..., 2:] = u
        return out

    def normal_frame(u):
        return np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])

    return Hypersurface(
        ambient=ambient, k=2, param_domain=induced.domain, embed=embed,
        normal_frame=normal_frame, induced=induced, declared_minimal=True,
        param_periodic=induced.periodic,
        polar_profile=(lambda t: np.sin(np.asarray(t, dtype=float)),
                       lambda t: np.cos(np.asarray(t, dtype=float))),
        name="S2-in-S4",
    )


def plane2_in_flat4(extent: float = 2.0) -> Hypersurface:
    """A flat 2-plane in flat R^4 with the constant normal frame."""
    ambient = ch.flat_chart(4, extent=extent + 2.0)
    induced = ch.flat_chart(2, extent=extent)

    def embed(u):
        u = np.asarray(u, dtype=float)
        out = np.zeros(u.shape[:-1] + (4,))
        out[..., :2] = u
        return out

    def normal_frame(u):
        return np.array([[0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]])

    return Hypersurface(
        ambient=ambient, k=2, param_domain=induced.domain, embed=embed,
        normal_frame=normal_frame, induced=induced, declared_minimal=True,
        name="plane2-in-R4",
    )
