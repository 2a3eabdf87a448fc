"""Constructive conformal neck: open a puncture into an asymptotic tube
while keeping the weighted bi-Ricci curvature positive.

Given a geodesic ball (polar chart) on which the σ-weighted bi-Ricci
curvature has a positive floor κ, the builder constructs a radial profile
φ(r) with τ' = -φ/r, η = e^τ, such that the conformal metric η² g satisfies
the pointwise certificate

    κ + φ(c₀ - c₁ φ)/r² + c₁ φ'(r)/r > 0,          (certificate C)

with c₀ = min{1, σ}/2 and c₁ = m + (m-2)σ, which forces positivity of the
conformal bi-Ricci curvature for r <= r₀.  In the log-radial variable
t = ln(r₀/r) (φ(r) = ψ(t)) the certificate is the strict differential
inequality

    ψ' < c₁⁻¹ κ r₀² e^{-2t} + ψ (c₁⁻¹ c₀ - ψ),     (certificate C')

whose homogeneous solutions are the logistic family
ψ_c(t) = ratio·c e^{ratio·t} / (1 + c e^{ratio·t}), ratio = c₀/c₁.  The
builder clips that family with a monotone cutoff β and halves the constant
c until C' holds with a strict relative margin on the whole grid.

Note on the far field: the clipped profile saturates at the constant
plateau value ratio·cB/(1+cB) < 1 (B the cutoff ceiling), so the metric
near the puncture is a cone of angle factor (1 - plateau) rather than an
exact cylinder; the scaling identity e^{2τ(r)} = e^{2τ(r₁)} (r₁/r)^{2P} is
asserted with the actual plateau P, and the tube radius is
ρ = e^{τ(r₁)} r₁.  See README for discussion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import charts as ch
from .charts import Chart, curvature_bundle, gram_schmidt
from .errors import (CertificationError, ConstructionError, DomainError,
                     GeometryError)


def smoothstep(x: np.ndarray) -> np.ndarray:
    """Quintic smoothstep: 0 to 1 with vanishing first/second derivatives."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return x**3 * (10.0 - 15.0 * x + 6.0 * x**2)


def smoothstep_prime(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    inside = (x > 0.0) & (x < 1.0)
    out = np.zeros_like(x)
    xx = x[inside]
    out[inside] = 30.0 * xx**2 * (xx - 1.0) ** 2
    return out


def psi_solution(c: float, ratio: float, t) -> np.ndarray:
    """Logistic solution ψ_c(t) = ratio·c e^{ratio t} / (1 + c e^{ratio t}).

    Satisfies ψ' = ψ (ratio - ψ); c = 0 is the zero equilibrium.
    """
    if c < 0.0:
        raise ConstructionError(f"logistic constant must be >= 0 (got {c})")
    t = np.asarray(t, dtype=float)
    u = c * np.exp(ratio * t)
    return ratio * u / (1.0 + u)


_LN2 = math.log(2.0)


def cutoff_beta(t1: float, t, ratio: float) -> np.ndarray:
    """Monotone C² cutoff: 0 below ln 2, e^{ratio t} on [2 ln 2, t1], and the
    constant e^{ratio (t1+1)} above t1 + 1, blended by quintic smoothsteps.
    """
    if not t1 > 2.0 * _LN2:
        raise ConstructionError(f"need t1 > 2 ln 2 = {2*_LN2:.4f} (got {t1})")
    t = np.asarray(t, dtype=float)
    grow = np.exp(ratio * t)
    ceil = math.exp(ratio * (t1 + 1.0))
    w_lo = smoothstep((t - _LN2) / _LN2)
    w_hi = smoothstep(t - t1)
    out = np.where(t <= _LN2, 0.0,
                   np.where(t < 2.0 * _LN2, w_lo * grow,
                            np.where(t <= t1, grow,
                                     np.where(t < t1 + 1.0,
                                              (1.0 - w_hi) * grow + w_hi * ceil,
                                              ceil))))
    return out


def cutoff_beta_prime(t1: float, t, ratio: float) -> np.ndarray:
    """Exact derivative of :func:`cutoff_beta` (piecewise analytic)."""
    if not t1 > 2.0 * _LN2:
        raise ConstructionError(f"need t1 > 2 ln 2 = {2*_LN2:.4f} (got {t1})")
    t = np.asarray(t, dtype=float)
    grow = np.exp(ratio * t)
    ceil = math.exp(ratio * (t1 + 1.0))
    x_lo = (t - _LN2) / _LN2
    x_hi = t - t1
    d_lo = smoothstep_prime(x_lo) / _LN2 * grow + smoothstep(x_lo) * ratio * grow
    d_hi = smoothstep_prime(x_hi) * (ceil - grow) + (1.0 - smoothstep(x_hi)) * ratio * grow
    out = np.where(t <= _LN2, 0.0,
                   np.where(t < 2.0 * _LN2, d_lo,
                            np.where(t <= t1, ratio * grow,
                                     np.where(t < t1 + 1.0, d_hi, 0.0))))
    return out


def clipped_psi(c: float, ratio: float, t1: float, t) -> np.ndarray:
    """ψ̃_c(t) = ratio·c β(t) / (1 + c β(t))."""
    b = cutoff_beta(t1, t, ratio)
    return ratio * c * b / (1.0 + c * b)


def clipped_psi_prime(c: float, ratio: float, t1: float, t) -> np.ndarray:
    b = cutoff_beta(t1, t, ratio)
    bp = cutoff_beta_prime(t1, t, ratio)
    return ratio * c * bp / (1.0 + c * b) ** 2


@dataclass(frozen=True, eq=False)
class NeckProfile:
    """A certified radial neck profile on the log-radial grid.

    ``grid_t`` spans [0, t1 + 1 + tail] uniformly; ``phi`` equals ``psi``
    read as a function of r = r0 e^{-t}.  ``tau`` is the cumulative integral
    of ψ (so τ' = -φ/r in r), ``eta = e^τ``, ``rho = e^{τ(r1)} r1``.
    ``cert_margin`` is the smallest relative slack of the strict
    differential certificate on the grid.
    """

    m: int
    sigma: float
    kappa: float
    r0: float
    t1: float
    c: float
    c0: float
    c1: float
    grid_t: np.ndarray
    psi: np.ndarray
    beta: np.ndarray
    phi: np.ndarray
    tau: np.ndarray
    eta: np.ndarray
    r1: float
    rho: float
    plateau: float
    cert_margin: float
    certified: bool
    _tau_fine_t: np.ndarray
    _tau_fine: np.ndarray

    @property
    def ratio(self) -> float:
        return self.c0 / self.c1

    @property
    def grid_r(self) -> np.ndarray:
        return self.r0 * np.exp(-self.grid_t)

    def tau_at_t(self, t) -> np.ndarray:
        """τ as a function of the log-radial variable, linear beyond the grid."""
        t = np.asarray(t, dtype=float)
        tmax = self._tau_fine_t[-1]
        inner = np.interp(np.clip(t, 0.0, tmax), self._tau_fine_t, self._tau_fine)
        plat = self._tau_fine[-1] + self.plateau * (t - tmax)
        return np.where(t <= 0.0, 0.0, np.where(t <= tmax, inner, plat))

    def eta_at_r(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            t = np.log(self.r0 / np.maximum(r, 1e-300))
        return np.exp(self.tau_at_t(t))

    def phi_at_t(self, t) -> np.ndarray:
        return clipped_psi(self.c, self.ratio, self.t1, t)

    def scaled(self, factor: float) -> "NeckProfile":
        """Profile with φ (hence τ, linearly) scaled; certification dropped.

        Used to build deliberately violating profiles for failure-path
        tests; τ scales exactly because it is linear in φ.
        """
        return replace(
            self, psi=factor * self.psi, phi=factor * self.phi,
            tau=factor * self.tau, eta=np.exp(factor * self.tau),
            rho=float(math.exp(factor * self._tau_r1()) * self.r1),
            plateau=factor * self.plateau, certified=False,
            cert_margin=float("nan"), _tau_fine=factor * self._tau_fine,
        )

    def _tau_r1(self) -> float:
        return float(np.interp(self.t1 + 1.0, self._tau_fine_t, self._tau_fine))

    def as_dict(self) -> dict:
        return {
            "m": self.m, "sigma": self.sigma, "kappa": self.kappa,
            "r0": self.r0, "t1": self.t1, "c": self.c, "c0": self.c0,
            "c1": self.c1, "r1": self.r1, "rho": self.rho,
            "plateau": self.plateau, "cert_margin": self.cert_margin,
            "certified": self.certified,
            "grid_t": self.grid_t.tolist(), "psi": self.psi.tolist(),
            "beta": self.beta.tolist(), "phi": self.phi.tolist(),
            "tau": self.tau.tolist(), "eta": self.eta.tolist(),
        }


def certificate_slack(profile_or_params, t: np.ndarray, c: float | None = None):
    """Relative slack of the strict certificate C' at the nodes t.

    Returns (slack, rhs) with slack = (rhs - ψ') / rhs; positivity of the
    slack at every node is the constructive heart of the build.
    """
    p = profile_or_params
    ratio = p.c0 / p.c1
    cc = p.c if c is None else c
    psi = clipped_psi(cc, ratio, p.t1, t)
    dpsi = clipped_psi_prime(cc, ratio, p.t1, t)
    rhs = p.kappa * p.r0**2 * np.exp(-2.0 * t) / p.c1 + psi * (ratio - psi)
    return (rhs - dpsi) / rhs, rhs


@dataclass(frozen=True)
class _BuildParams:
    kappa: float
    r0: float
    t1: float
    c0: float
    c1: float
    c: float = 0.0


def build_profile(m: int, sigma: float, kappa: float, r0: float, t1: float,
                  c_hint: float | None = None, *, nodes: int = 400,
                  margin_frac: float = 1e-3, tail: float = 2.0) -> NeckProfile:
    """Select the logistic constant and assemble a certified neck profile.

    The constant c is halved from ``c_hint`` (default 1) until the strict
    inequality C' holds at every node of the certification grid (and a 4x
    denser check grid) with relative margin >= ``margin_frac``; the
    integrated τ, η, the tube radius ρ and the certificate margins are
    returned in a :class:`NeckProfile`.
    """
    if m < 3:
        raise ConstructionError(f"need ambient dimension m >= 3 (got {m})")
    if sigma <= 0.0 or kappa <= 0.0 or r0 <= 0.0:
        raise ConstructionError("sigma, kappa, r0 must all be positive")
    if not t1 > 2.0 * _LN2:
        raise ConstructionError(f"need t1 > 2 ln 2 = {2*_LN2:.4f} (got {t1})")
    c0 = min(1.0, sigma) / 2.0
    c1 = m + (m - 2) * sigma
    params = _BuildParams(kappa=kappa, r0=r0, t1=t1, c0=c0, c1=c1)

    t_max = t1 + 1.0 + tail
    grid = np.linspace(0.0, t_max, nodes)
    dense = np.linspace(0.0, t_max, 4 * nodes + 1)

    c = 1.0 if c_hint is None else float(c_hint)
    while True:
        slack_g, _ = certificate_slack(params, grid, c=c)
        slack_d, _ = certificate_slack(params, dense, c=c)
        worst = min(float(np.min(slack_g)), float(np.min(slack_d)))
        if worst >= margin_frac:
            break
        c *= 0.5
        if c < 1e-12:
            i = int(np.argmin(slack_d))
            raise ConstructionError(
                f"no admissible constant above 1e-12; worst node t={dense[i]:.4f} "
                f"slack {slack_d[i]:.3e}")

    ratio = c0 / c1
    fine_t = np.linspace(0.0, t_max, 8001)
    psi_fine = clipped_psi(c, ratio, t1, fine_t)
    from scipy.integrate import cumulative_simpson

    tau_fine = np.concatenate([[0.0], cumulative_simpson(psi_fine, x=fine_t)])

    psi = clipped_psi(c, ratio, t1, grid)
    beta = cutoff_beta(t1, grid, ratio)
    tau = np.interp(grid, fine_t, tau_fine)
    eta = np.exp(tau)
    r1 = r0 * math.exp(-(t1 + 1.0))
    ceil = math.exp(ratio * (t1 + 1.0))
    plateau = ratio * c * ceil / (1.0 + c * ceil)
    tau_r1 = float(np.interp(t1 + 1.0, fine_t, tau_fine))
    rho = math.exp(tau_r1) * r1
    slack_g, _ = certificate_slack(params, grid, c=c)

    profile = NeckProfile(
        m=m, sigma=sigma, kappa=kappa, r0=r0, t1=t1, c=c, c0=c0, c1=c1,
        grid_t=grid, psi=psi, beta=beta, phi=psi.copy(), tau=tau, eta=eta,
        r1=r1, rho=rho, plateau=plateau, cert_margin=float(np.min(slack_g)),
        certified=True, _tau_fine_t=fine_t, _tau_fine=tau_fine,
    )
    # Redundant but cheap: the r-space certificate C is C' rescaled.
    pointwise = pointwise_certificate(profile, grid)
    if np.any(pointwise <= 0.0):
        i = int(np.argmin(pointwise))
        raise CertificationError(
            f"r-space certificate violated at t={grid[i]:.4f}: {pointwise[i]:.3e}")
    return profile


def pointwise_certificate(profile: NeckProfile, t: np.ndarray) -> np.ndarray:
    """κ r² + φ(c₀ - c₁ φ) + c₁ r φ'(r), evaluated in the t variable.

    Positivity is the r-space certificate C multiplied through by r².
    """
    t = np.asarray(t, dtype=float)
    psi = profile.phi_at_t(t)
    dpsi = clipped_psi_prime(profile.c, profile.ratio, profile.t1, t)
    r2 = (profile.r0 * np.exp(-t)) ** 2
    return profile.kappa * r2 + psi * (profile.c0 - profile.c1 * psi) - profile.c1 * dpsi


# ---------------------------------------------------------------------------
# Conformal neck chart and certification scans
# ---------------------------------------------------------------------------

def neck_metric(chart: Chart, profile: NeckProfile, r_min: float | None = None) -> Chart:
    """Conformal chart η² g on the punctured ball, clipped at r_min.

    The chart must be geodesic-polar (radial coordinate = exact distance to
    the center); the output chart keeps that radial coordinate but is no
    longer polar for its own metric, so ``polar`` is cleared and the base
    structure moves to ``meta``.
    """
    if chart.polar is None:
        raise GeometryError(f"chart '{chart.name}' lacks a geodesic-polar structure")
    if r_min is None:
        r_min = profile.r1 / 4.0
    lo, hi = chart.domain[0]
    if r_min <= lo:
        r_min = lo if lo > 0 else r_min
    if r_min >= hi:
        raise DomainError(f"clip radius {r_min:g} outside the chart's radial range")

    def metric(x):
        x = np.asarray(x, dtype=float)
        scale = profile.eta_at_r(x[..., 0]) ** 2
        return scale[..., None, None] * chart.metric_many(x)

    domain = chart.domain.copy()
    domain[0, 0] = r_min
    return Chart(
        dim=chart.dim, domain=domain, metric=metric, kind=chart.kind,
        name=f"neck({chart.name})", periodic=chart.periodic,
        fd_scales=chart.fd_scales, polar=None,
        meta={"neck_profile": profile, "base_polar": chart.polar,
              "base_chart": chart},
    )


def pure_cylinder_factor_chart(m: int, r0: float = 1.0, r_min: float = 1e-3) -> Chart:
    """Flat polar chart scaled by the exact tube factor η = r0/r.

    The result is isometric to the round tube R x S^{m-1}(r0); used as the
    asymptotic reference for the neck construction.
    """
    base = ch.flat_polar_chart(m, r_max=2.0 * r0)

    def factor(x):
        x = np.asarray(x, dtype=float)
        return (r0 / x[..., 0]) ** 2

    out = ch.scaled_chart(base, factor, name=f"tube-factor-R{m}")
    domain = out.domain.copy()
    domain[0, 0] = r_min
    return Chart(dim=out.dim, domain=domain, metric=out.metric, name=out.name,
                 periodic=out.periodic, fd_scales=out.fd_scales, polar=None,
                 meta={"builtin": "tube-factor"})


@dataclass(frozen=True, eq=False)
class NeckReport:
    """Result of a bi-Ricci positivity scan over a neck chart."""

    min_biricci: float
    argmin_point: np.ndarray
    argmin_pair: np.ndarray
    shell_radii: np.ndarray
    shell_minima: np.ndarray
    bound_curve: np.ndarray
    samples: int

    @property
    def positive(self) -> bool:
        return self.min_biricci > 0.0


def _shell_points(chart: Chart, r: float, count: int, rng: np.random.Generator) -> np.ndarray:
    dim = chart.dim
    pts = np.empty((count, dim))
    pts[:, 0] = r
    for i in range(1, dim - 1):
        pts[:, i] = 0.4 + (math.pi - 0.8) * rng.random(count)
    pts[:, dim - 1] = 2.0 * math.pi * rng.random(count)
    return pts


def certify_neck(neck_chart: Chart, m: int, sigma: float,
                 shells: int = 20, pairs_per_shell: int = 200,
                 seed: int = 0, r_range: tuple[float, float] | None = None) -> NeckReport:
    """Scan the σ-weighted bi-Ricci curvature of the neck chart directly.

    Shells are log-spaced in radius; on each shell a few base points carry
    a bundle evaluation and many random orthonormal pairs.  The report also
    carries the analytic lower-bound curve
    e^{-2τ} (κ + [φ(c₀ - c₁φ) + c₁ r φ'(r)]/r²) for comparison with the
    measured shell minima.
    """
    profile: NeckProfile | None = (neck_chart.meta or {}).get("neck_profile")
    if profile is None:
        raise GeometryError("chart carries no neck profile (build it with neck_metric)")
    lo, hi = neck_chart.domain[0]
    if r_range is None:
        r_range = (max(lo * 1.1, profile.r1 / 3.0), min(0.95 * profile.r0, hi * 0.98))
    if r_range[0] < lo or r_range[1] > hi:
        raise DomainError(f"scan range {r_range} outside the clipped radial domain [{lo:g}, {hi:g}]")

    rng = np.random.default_rng(seed)
    radii = np.geomspace(r_range[0], r_range[1], shells)
    pts_per_shell = max(1, pairs_per_shell // 20)
    pairs_per_point = max(1, pairs_per_shell // pts_per_shell)

    best = math.inf
    best_pt = None
    best_pair = None
    shell_min = np.empty(shells)
    total = 0
    for si, r in enumerate(radii):
        mins = math.inf
        for x in _shell_points(neck_chart, r, pts_per_shell, rng):
            b = curvature_bundle(neck_chart, x)
            for _ in range(pairs_per_point):
                raw = rng.normal(size=(2, neck_chart.dim))
                frame = gram_schmidt(raw, b.metric)
                if frame.shape[0] < 2:
                    continue
                v, w = frame[0], frame[1]
                val = b.ric(v) + sigma * b.ric(w) - b.rm(v, w, v, w)
                total += 1
                if val < mins:
                    mins = val
                if val < best:
                    best, best_pt, best_pair = val, x.copy(), np.array([v, w])
        shell_min[si] = mins

    t = np.log(profile.r0 / radii)
    bound = np.exp(-2.0 * profile.tau_at_t(t)) * pointwise_certificate(profile, t) / radii**2
    return NeckReport(
        min_biricci=float(best), argmin_point=best_pt, argmin_pair=best_pair,
        shell_radii=radii, shell_minima=shell_min, bound_curve=bound,
        samples=total,
    )


# ---------------------------------------------------------------------------
# Interpolation onto the round tube
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class InterpolationReport:
    chart: Chart
    min_biricci: float
    mismatch: float
    window: tuple[float, float]


def interpolate_to_cylinder(neck_chart: Chart, profile: NeckProfile,
                            blend_window: tuple[float, float],
                            sigma: float | None = None,
                            shells: int = 8, pairs_per_shell: int = 80,
                            seed: int = 0) -> InterpolationReport:
    """Blend the neck metric onto the exact product R⁺ x S^{m-1}(ρ).

    The output chart equals the neck for r >= r_b, the exact tube metric
    (ρ²/r²) dr² + ρ² dΩ² for r <= r_a, and a quintic blend of the
    warped-product coefficients in between.  The report carries the C²
    mismatch of the two coefficient sets over the window (relative,
    measured in d/d ln r) and the minimal bi-Ricci value over the window;
    positivity is only meaningful when the mismatch is small.
    """
    r_a, r_b = blend_window
    if not (0.0 < r_a < r_b):
        raise DomainError(f"blend window must satisfy 0 < r_a < r_b (got {blend_window})")
    if r_b >= profile.r1:
        raise DomainError(
            f"blend window must sit in the near-tube region r < r1 = {profile.r1:g}")
    meta = neck_chart.meta or {}
    base_polar = meta.get("base_polar")
    if base_polar is None:
        raise GeometryError("neck chart lacks its base polar structure")
    lo = neck_chart.domain[0, 0]
    if r_a < lo:
        raise DomainError(f"blend window extends below the clipped radius {lo:g}")
    warp = base_polar.warp
    rho = profile.rho
    sig = profile.sigma if sigma is None else sigma
    dim = neck_chart.dim

    def coeffs(r):
        r = np.asarray(r, dtype=float)
        eta2 = profile.eta_at_r(r) ** 2
        a_neck = eta2
        c_neck = eta2 * np.asarray(warp(r)) ** 2
        a_cyl = rho**2 / r**2
        c_cyl = np.full_like(r, rho**2)
        x = (np.log(r) - math.log(r_a)) / (math.log(r_b) - math.log(r_a))
        b = smoothstep(x)
        return b * a_neck + (1.0 - b) * a_cyl, b * c_neck + (1.0 - b) * c_cyl

    def metric(x):
        x = np.asarray(x, dtype=float)
        lead = x.shape[:-1]
        a_rr, c_ang = coeffs(x[..., 0])
        out = np.zeros(lead + (dim, dim))
        out[..., 0, 0] = a_rr
        sub = ch._unit_sphere_polar_diag(x[..., 1:], dim - 1)
        ii = np.arange(1, dim)
        out[..., ii, ii] = c_ang[..., None] * sub
        return out

    blended = Chart(
        dim=dim, domain=neck_chart.domain.copy(), metric=metric,
        name=f"blend({neck_chart.name})", periodic=neck_chart.periodic,
        fd_scales=neck_chart.fd_scales, polar=None,
        meta={"neck_profile": profile, "base_polar": base_polar},
    )

    # Relative C² mismatch of the two warped-product coefficient sets over
    # the window, with derivatives in s = ln r.
    s_grid = np.linspace(math.log(r_a), math.log(r_b), 41)
    r_grid = np.exp(s_grid)
    eta2 = profile.eta_at_r(r_grid) ** 2
    pairs = [(eta2, rho**2 / r_grid**2),
             (eta2 * np.asarray(warp(r_grid)) ** 2, np.full_like(r_grid, rho**2))]
    mismatch = 0.0
    ds = s_grid[1] - s_grid[0]
    for neckc, cylc in pairs:
        # One value-scale per coefficient; d/d ln r keeps orders comparable.
        scale = max(float(np.max(np.abs(cylc))), 1e-30)
        for order in range(3):
            mismatch = max(mismatch, float(np.max(np.abs(neckc - cylc))) / scale)
            neckc = np.gradient(neckc, ds)
            cylc = np.gradient(cylc, ds)

    rng = np.random.default_rng(seed)
    radii = np.geomspace(r_a * 1.02, r_b * 0.98, shells)
    worst = math.inf
    for r in radii:
        for x in _shell_points(blended, r, max(1, pairs_per_shell // 20), rng):
            b = curvature_bundle(blended, x)
            for _ in range(20):
                frame = gram_schmidt(rng.normal(size=(2, dim)), b.metric)
                if frame.shape[0] < 2:
                    continue
                v, w = frame
                worst = min(worst, b.ric(v) + sig * b.ric(w) - b.rm(v, w, v, w))
    return InterpolationReport(chart=blended, min_biricci=float(worst),
                               mismatch=float(mismatch), window=(r_a, r_b))


def rho_sweep(m: int, sigma: float, kappa: float, r0: float, t1_values,
              **build_kw) -> list[dict]:
    """Build profiles across transition parameters; ρ should shrink with t1."""
    out = []
    for t1 in t1_values:
        p = build_profile(m, sigma, kappa, r0, float(t1), **build_kw)
        out.append({"t1": float(t1), "rho": p.rho, "c": p.c,
                    "cert_margin": p.cert_margin, "plateau": p.plateau})
    return out
