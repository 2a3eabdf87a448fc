"""Manifest loading and grid-file I/O.

Charts, conformal factors and hypersurfaces are declared in JSON documents:

    chart:        {"dim": 2, "metric": {"kind": "builtin", "name": "sphere",
                   "params": {"dim": 2}}}
                  {"metric": {"kind": "grid", "file": "g.bin"}}
    conformal:    {"factors": [{"kind": "builtin", "name": "exp-linear",
                   "params": {"coeffs": [0, 1]}}], "weights": [1.0]}
    hypersurface: {"embedding": {"kind": "builtin", "name": "equator",
                   "params": {"n": 2}}}

Grid metric files are little-endian binary: magic ``BLAB``, a uint32 JSON
header length, the UTF-8 JSON header ``{"dims", "resolution", "domain"}``,
then float64 row-major samples of shape ``resolution + (dims, dims)``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from . import charts as ch
from . import fields as fl
from .charts import Chart
from .conformal import ConformalData
from .errors import ManifestError
from . import stability as st

_MAGIC = b"BLAB"


# ---------------------------------------------------------------------------
# Grid files
# ---------------------------------------------------------------------------

def write_metric_grid(path, axes, values) -> None:
    """Write metric samples on a uniform tensor grid to a binary file."""
    axes = [np.asarray(a, dtype=float) for a in axes]
    values = np.asarray(values, dtype=float)
    dims = len(axes)
    resolution = [len(a) for a in axes]
    if values.shape != tuple(resolution) + (dims, dims):
        raise ManifestError(
            f"grid values shape {values.shape} does not match resolution {resolution}")
    header = json.dumps({
        "dims": dims,
        "resolution": resolution,
        "domain": [[float(a[0]), float(a[-1])] for a in axes],
    }, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(values.astype("<f8").tobytes(order="C"))


def read_metric_grid(path):
    """Read a grid metric file; returns (axes, values)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ManifestError(f"{path}: not a grid metric file (bad magic {magic!r})")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        dims = int(header["dims"])
        resolution = [int(r) for r in header["resolution"]]
        domain = header["domain"]
        count = int(np.prod(resolution)) * dims * dims
        data = np.frombuffer(fh.read(count * 8), dtype="<f8", count=count)
    axes = [np.linspace(lo, hi, n) for (lo, hi), n in zip(domain, resolution)]
    values = data.reshape(tuple(resolution) + (dims, dims))
    return axes, values


# ---------------------------------------------------------------------------
# Charts
# ---------------------------------------------------------------------------

_BUILTIN_CHARTS = {
    "flat": lambda p: ch.flat_chart(int(p.get("dim", 3)), extent=float(p.get("extent", 4.0))),
    "sphere": lambda p: ch.sphere_chart(int(p.get("dim", 2)), radius=float(p.get("radius", 1.0))),
    "hyperbolic": lambda p: ch.hyperbolic_plane_chart(),
    "circle": lambda p: ch.circle_chart(radius=float(p.get("radius", 1.0))),
    "sphere-circle": lambda p: ch.sphere_product_circle_chart(
        int(p.get("sphere_dim", 2)), float(p.get("sphere_radius", 1.0)),
        float(p.get("circle_radius", 1.0))),
    "cylinder": lambda p: ch.cylinder_chart(int(p.get("dim", 3)), float(p.get("rho", 1.0)),
                                            length=float(p.get("length", 6.0))),
    "flat-polar": lambda p: ch.flat_polar_chart(int(p.get("dim", 3)),
                                                r_max=float(p.get("r_max", 2.0))),
    "perturbed-sphere": lambda p: ch.perturbed_sphere_chart(int(p.get("dim", 3)),
                                                            eps=float(p.get("eps", 0.05))),
    "s3-torus": lambda p: ch.torus_coordinates_s3_chart(),
}


def chart_from_manifest(doc, base_dir: Path | str = ".") -> Chart:
    """Build a chart from a manifest dict or a JSON file path."""
    if isinstance(doc, (str, Path)):
        path = Path(base_dir) / doc
        doc = json.loads(path.read_text())
        base_dir = path.parent
    if "metric" not in doc:
        raise ManifestError("chart manifest needs a 'metric' entry")
    spec = doc["metric"]
    kind = spec.get("kind", "builtin")
    if kind == "builtin":
        name = spec.get("name")
        if name not in _BUILTIN_CHARTS:
            raise ManifestError(
                f"unknown builtin metric '{name}' (have {sorted(_BUILTIN_CHARTS)})")
        chart = _BUILTIN_CHARTS[name](spec.get("params", {}))
    elif kind == "grid":
        axes, values = read_metric_grid(Path(base_dir) / spec["file"])
        chart = ch.grid_chart(axes, values, name=doc.get("name", "grid-chart"))
    else:
        raise ManifestError(f"unknown metric kind '{kind}'")
    if "dim" in doc and int(doc["dim"]) != chart.dim:
        raise ManifestError(f"manifest dim {doc['dim']} != chart dim {chart.dim}")
    return chart


# ---------------------------------------------------------------------------
# Conformal factors
# ---------------------------------------------------------------------------

def _factor_from_spec(spec: dict, dim: int) -> fl.ScalarField:
    kind = spec.get("kind", "builtin")
    if kind == "expr":
        return fl.expression_field(spec["expr"], dim)
    if kind != "builtin":
        raise ManifestError(f"unknown factor kind '{kind}'")
    name = spec.get("name")
    p = spec.get("params", {})
    if name in ("one", "unit"):
        return fl.constant_field(1.0)
    if name == "constant":
        return fl.constant_field(float(p.get("value", 1.0)))
    if name == "exp-linear":
        return fl.exp_linear_field(p.get("coeffs", [0.0] * dim))
    if name == "cos-axis":
        return fl.cos_axis_field(int(p.get("axis", 0)),
                                 amplitude=float(p.get("amplitude", 0.1)),
                                 offset=float(p.get("offset", 1.0)))
    if name == "gaussian":
        return fl.gaussian_bump_field(p.get("center", [0.0] * dim),
                                      width=float(p.get("width", 1.0)),
                                      amplitude=float(p.get("amplitude", 0.2)))
    if name == "inverse-radius":
        return fl.inverse_radius_field(floor=float(p.get("floor", 0.0)))
    if name == "stereographic":
        return fl.stereographic_field(scale=float(p.get("scale", 2.0)))
    raise ManifestError(f"unknown builtin factor '{name}'")


def conformal_from_manifest(chart: Chart, doc: dict) -> ConformalData:
    factors = doc.get("factors")
    weights = doc.get("weights")
    if not factors or not weights:
        raise ManifestError("conformal manifest needs 'factors' and 'weights'")
    return ConformalData(
        factors=tuple(_factor_from_spec(f, chart.dim) for f in factors),
        weights=np.asarray(weights, dtype=float),
    )


# ---------------------------------------------------------------------------
# Hypersurfaces
# ---------------------------------------------------------------------------

_BUILTIN_SURFACES = {
    "equator": lambda p: st.equator_hypersurface(int(p.get("n", 2))),
    "plane": lambda p: st.plane_in_flat(extent=float(p.get("extent", 2.0))),
    "line": lambda p: st.line_in_flat(length=float(p.get("length", 2.0))),
    "sphere-in-flat": lambda p: st.sphere_in_flat(int(p.get("m", 3)),
                                                  radius=float(p.get("radius", 1.0))),
    "clifford-like": lambda p: st.clifford_torus(),
    "equator2-s4": lambda p: st.equator2_in_s4(),
    "plane2-r4": lambda p: st.plane2_in_flat4(extent=float(p.get("extent", 2.0))),
}


def hypersurface_from_manifest(doc, base_dir: Path | str = ".") -> st.Hypersurface:
    if isinstance(doc, (str, Path)):
        path = Path(base_dir) / doc
        doc = json.loads(path.read_text())
    spec = doc.get("embedding", {})
    if spec.get("kind", "builtin") != "builtin":
        raise ManifestError("only builtin embeddings are supported")
    name = spec.get("name")
    if name not in _BUILTIN_SURFACES:
        raise ManifestError(
            f"unknown builtin embedding '{name}' (have {sorted(_BUILTIN_SURFACES)})")
    return _BUILTIN_SURFACES[name](spec.get("params", {}))


def domain_from_manifest(doc: dict) -> object:
    kind = doc.get("kind", "box")
    if kind == "box":
        axes = tuple(np.linspace(lo, hi, int(n))
                     for (lo, hi), n in zip(doc["ranges"], doc["resolution"]))
        return st.BoxDomain(axes=axes, periodic=tuple(doc.get("periodic", ())))
    if kind == "radial-cap":
        return st.RadialCapDomain(radius=float(doc["radius"]),
                                  nodes=int(doc.get("nodes", 400)))
    raise ManifestError(f"unknown domain kind '{kind}'")
