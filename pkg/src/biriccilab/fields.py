"""Scalar fields on coordinate charts.

A field is a plain function of the chart coordinates.  Fields are used as
conformal factors, cutoff profiles and interpolated eigenfunctions; the
curvature machinery only ever needs point values (derivatives are taken by
the chart's stencils), but a field may carry an analytic gradient which the
geodesic integrator will prefer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Scalar function of chart coordinates.

    Parameters
    ----------
    fn : callable
        Maps an array of shape ``(..., dim)`` to values of shape ``(...,)``.
        Must be vectorized over leading axes.
    grad : callable, optional
        Analytic coordinate gradient, same batching convention, returning
        shape ``(..., dim)``.  Purely an accuracy/speed shortcut.
    name : str
        Label used in reports.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = "field"

    def value(self, x: np.ndarray) -> float:
        return float(self.fn(np.asarray(x, dtype=float)))

    def value_many(self, xs: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(np.asarray(xs, dtype=float)), dtype=float)

    def __call__(self, x: np.ndarray):
        return self.fn(np.asarray(x, dtype=float))


def constant_field(value: float = 1.0) -> ScalarField:
    def fn(x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], float(value))

    def grad(x):
        x = np.asarray(x, dtype=float)
        return np.zeros_like(x)

    return ScalarField(fn, grad, name=f"const({value:g})")


def exp_linear_field(coeffs) -> ScalarField:
    """exp(c . x); the workhorse analytic conformal factor."""
    c = np.asarray(coeffs, dtype=float)

    def fn(x):
        return np.exp(np.asarray(x, dtype=float) @ c)

    def grad(x):
        x = np.asarray(x, dtype=float)
        return np.exp(x @ c)[..., None] * c

    return ScalarField(fn, grad, name="exp(c.x)")


def cos_axis_field(axis: int, amplitude: float = 0.1, offset: float = 1.0) -> ScalarField:
    """offset + amplitude * cos(x_axis), positive for |amplitude| < offset."""

    def fn(x):
        x = np.asarray(x, dtype=float)
        return offset + amplitude * np.cos(x[..., axis])

    def grad(x):
        x = np.asarray(x, dtype=float)
        g = np.zeros_like(x)
        g[..., axis] = -amplitude * np.sin(x[..., axis])
        return g

    return ScalarField(fn, grad, name=f"{offset:g}+{amplitude:g}cos(x{axis})")


def gaussian_bump_field(center, width: float = 1.0, amplitude: float = 0.2) -> ScalarField:
    """1 + amplitude * exp(-|x-center|^2 / width^2); smooth and positive."""
    c = np.asarray(center, dtype=float)

    def fn(x):
        x = np.asarray(x, dtype=float)
        d2 = np.sum((x - c) ** 2, axis=-1)
        return 1.0 + amplitude * np.exp(-d2 / width**2)

    def grad(x):
        x = np.asarray(x, dtype=float)
        d = x - c
        e = np.exp(-np.sum(d**2, axis=-1) / width**2)
        return (-2.0 * amplitude / width**2) * e[..., None] * d

    return ScalarField(fn, grad, name="gaussian-bump")


def inverse_radius_field(floor: float = 0.0) -> ScalarField:
    """1/|x| on a punctured chart (optionally 1/max(|x|, floor))."""

    def fn(x):
        x = np.asarray(x, dtype=float)
        r = np.sqrt(np.sum(x**2, axis=-1))
        if floor > 0.0:
            r = np.maximum(r, floor)
        return 1.0 / r

    return ScalarField(fn, name="1/r")


def stereographic_field(scale: float = 2.0) -> ScalarField:
    """scale / (1 + |x|^2); with scale=2 its Yamabe metric is the unit round sphere."""

    def fn(x):
        x = np.asarray(x, dtype=float)
        return scale / (1.0 + np.sum(x**2, axis=-1))

    def grad(x):
        x = np.asarray(x, dtype=float)
        denom = (1.0 + np.sum(x**2, axis=-1)) ** 2
        return (-2.0 * scale) * x / denom[..., None]

    return ScalarField(fn, grad, name="stereographic")


def power_field(base: ScalarField, exponent: float, name: str | None = None) -> ScalarField:
    def fn(x):
        return np.asarray(base.fn(x), dtype=float) ** exponent

    grad = None
    if base.grad is not None:
        def grad(x):  # noqa: F811 - deliberate conditional definition
            v = np.asarray(base.fn(x), dtype=float)
            return exponent * v[..., None] ** (exponent - 1.0) * base.grad(x)

    return ScalarField(fn, grad, name=name or f"{base.name}^{exponent:g}")


def expression_field(expr: str, dim: int) -> ScalarField:
    """Field from a sympy-parsed expression in symbols x0..x{dim-1}.

    Only used for manifest-declared factors; the numerical core never
    touches symbolic algebra.
    """
    import sympy as sp

    symbols = sp.symbols(f"x0:{dim}")
    parsed = sp.sympify(expr)
    fn_l = sp.lambdify(symbols, parsed, modules="numpy")
    grads = [sp.lambdify(symbols, sp.diff(parsed, s), modules="numpy") for s in symbols]

    def fn(x):
        x = np.asarray(x, dtype=float)
        vals = fn_l(*(x[..., i] for i in range(dim)))
        return np.broadcast_to(np.asarray(vals, dtype=float), x.shape[:-1]).copy()

    def grad(x):
        x = np.asarray(x, dtype=float)
        cols = [np.broadcast_to(np.asarray(g(*(x[..., i] for i in range(dim))), dtype=float),
                                x.shape[:-1])
                for g in grads]
        return np.stack(cols, axis=-1)

    return ScalarField(fn, grad, name=f"expr({expr})")
