"""Batch experiment runner and command-line surface (``blab``).

Subcommands mirror the library: curvature and bi-Ricci scans, diameter
estimation, closed-form bounds, Dirichlet eigenpairs, and the neck
pipeline.  ``blab run manifest.json`` executes a task list; every task
appends one JSON record to a JSON-lines report (sorted keys, no
timestamps, so identical manifests and seeds give byte-identical output)
and optionally writes CSV mirrors for plotting.

Exit codes: 0 ok, 2 manifest error, 3 assertion failure, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import bounds as bd
from . import charts as ch
from . import geodesics as gd
from . import manifests as mf
from . import neck as nk
from . import stability as st
from .charts import Chart, curvature_bundle, gram_schmidt
from .conformal import ConformalData, conformal_ricci, log_field
from .errors import GeometryError, InadmissibleSpec, ManifestError

EXIT_OK = 0
EXIT_MANIFEST = 2
EXIT_ASSERTION = 3
EXIT_NUMERIC = 4


# ---------------------------------------------------------------------------
# Direction sampling (low-discrepancy with seeded jitter)
# ---------------------------------------------------------------------------

def _kronecker_sequence(count: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Additive low-discrepancy sequence in [0,1)^dim with seeded jitter."""
    # Generalized golden-ratio constants (the R_d recurrence).
    phi = 2.0
    for _ in range(32):
        phi = (1.0 + phi) ** (1.0 / (dim + 1))
    alpha = np.array([(1.0 / phi) ** (k + 1) for k in range(dim)])
    base = (np.arange(1, count + 1)[:, None] * alpha[None, :]) % 1.0
    jitter = rng.random(dim)[None, :] * 1e-3
    return (base + jitter) % 1.0


def _unit_directions(count: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Low-discrepancy points on the Euclidean unit sphere S^{dim-1}."""
    from scipy.special import ndtri

    u = _kronecker_sequence(count, dim, rng)
    z = ndtri(np.clip(u, 1e-12, 1.0 - 1e-12))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def direction_pairs(g: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """g-orthonormal pairs (v, w) with low-discrepancy coverage.

    Works in the Cholesky frame of g (where g-orthonormality is Euclidean),
    takes Householder completions of the first vector and sub-samples the
    orthogonal sphere for the second.
    """
    n = g.shape[0]
    chol = np.linalg.cholesky(g)
    inv_t = np.linalg.inv(chol.T)
    firsts = _unit_directions(count, n, rng)
    if n == 2:
        seconds_coeff = np.ones((count, 1))
    else:
        seconds_coeff = _unit_directions(count, n - 1, rng)
    pairs = np.empty((count, 2, n))
    for i in range(count):
        v = firsts[i]
        # Householder reflection sending e1 to v; its trailing columns span v⊥.
        u = v.copy()
        u[0] -= 1.0
        nu = np.linalg.norm(u)
        if nu < 1e-14:
            basis = np.eye(n)[:, 1:]
        else:
            h = np.eye(n) - 2.0 * np.outer(u, u) / (nu * nu)
            basis = h[:, 1:]
        w = basis @ seconds_coeff[i]
        pairs[i, 0] = inv_t @ v
        pairs[i, 1] = inv_t @ (w / np.linalg.norm(w))
    return pairs


# ---------------------------------------------------------------------------
# Scans
# ---------------------------------------------------------------------------

def _scan_points(chart: Chart, count: int, rng: np.random.Generator,
                 margin_frac: float = 0.04) -> np.ndarray:
    return gd.sample_chart_points(chart, count, rng, margin_frac=margin_frac,
                                  include_corners=False)


def biricci_scan(chart: Chart, sigma: float, points: int = 60,
                 pairs_per_point: int = 40, seed: int = 0,
                 threads: int | None = None) -> dict:
    """Empirical min of the σ-weighted bi-Ricci curvature over the chart.

    Returns min, argmin, and a histogram of sampled values; the minimum is
    the empirical curvature floor κ fed to the bound calculators.
    """
    rng = np.random.default_rng(seed)
    pts = _scan_points(chart, points, rng)
    pair_seeds = rng.integers(0, 2**63 - 1, size=pts.shape[0])

    def one(i: int):
        b = curvature_bundle(chart, pts[i])
        prs = direction_pairs(b.metric, pairs_per_point, np.random.default_rng(pair_seeds[i]))
        vals = np.array([b.ric(v) + sigma * b.ric(w) - b.rm(v, w, v, w)
                         for v, w in prs])
        return vals

    workers = threads if threads is not None else gd.threads_cap()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            all_vals = list(ex.map(one, range(pts.shape[0])))
    else:
        all_vals = [one(i) for i in range(pts.shape[0])]
    vals = np.concatenate(all_vals)
    flat_idx = int(np.argmin(vals))
    point_idx = flat_idx // pairs_per_point
    hist, edges = np.histogram(vals, bins=24)
    return {
        "min": float(np.min(vals)),
        "argmin_point": pts[point_idx].tolist(),
        "samples": int(vals.size),
        "histogram": {"counts": hist.tolist(), "edges": edges.tolist()},
    }


def ricci_scan(chart: Chart, points: int = 60, seed: int = 0) -> dict:
    """Min Ricci curvature over unit directions (generalized eigenvalue)."""
    from scipy.linalg import eigh

    rng = np.random.default_rng(seed)
    pts = _scan_points(chart, points, rng)
    best = math.inf
    arg = None
    for x in pts:
        b = curvature_bundle(chart, x)
        ev = eigh(b.ricci, b.metric, eigvals_only=True)
        if ev[0] < best:
            best, arg = float(ev[0]), x
    return {"min": best, "argmin_point": arg.tolist(), "samples": int(pts.shape[0])}


def bonnet_myers_condition_scan(chart: Chart, cd: ConformalData, epsilon: float,
                                points: int = 40, dirs_per_point: int = 32,
                                seed: int = 0) -> dict:
    """Empirical floor κ of the conformal Bonnet-Myers hypothesis

        Ric^(f,σ)(v,v) + σ|∇ln f|² - ((n-1)/4 + a(n) ε) σ² (∇_v ln f)²,

    minimized over sample points and unit directions (single factor;
    a(3) = 0 and a(n) = 1 otherwise).
    """
    if cd.k != 1:
        raise GeometryError("the hypothesis scan is a single-factor check")
    f = cd.factors[0]
    sigma = float(cd.weights[0])
    n = chart.dim
    a_n = 0.0 if n == 3 else 1.0
    rng = np.random.default_rng(seed)
    pts = _scan_points(chart, points, rng)
    lf = log_field(f)
    best = math.inf
    arg = None
    for x in pts:
        b = curvature_bundle(chart, x)
        cr = np.asarray(conformal_ricci(chart, cd, x, bundle=b))
        grad = ch.field_gradient(chart, lf, x)
        norm2 = float(grad @ b.inverse_metric @ grad)
        dirs = direction_pairs(b.metric, dirs_per_point, rng)[:, 0, :]
        for v in dirs:
            dv = float(grad @ v)
            val = float(v @ cr @ v) + sigma * norm2 \
                - ((n - 1) / 4.0 + a_n * epsilon) * sigma**2 * dv**2
            if val < best:
                best, arg = val, x
    return {"min": best, "argmin_point": arg.tolist(), "samples": int(pts.shape[0] * dirs_per_point)}


def ksigma_scan(chart: Chart, sigma: float, subspace_dim: int, points: int = 30,
                trials_per_point: int = 20, seed: int = 0) -> dict:
    """Empirical floor of K_σ(v, V) over points, subspaces and directions."""
    rng = np.random.default_rng(seed)
    pts = _scan_points(chart, points, rng)
    best = math.inf
    arg = None
    for x in pts:
        b = curvature_bundle(chart, x)
        for _ in range(trials_per_point):
            basis = gram_schmidt(rng.normal(size=(subspace_dim, chart.dim)), b.metric)
            if basis.shape[0] < subspace_dim:
                continue
            v = basis[0]
            val = ch.k_sigma(chart, x, v, basis, sigma, bundle=b)
            if val < best:
                best, arg = float(val), x
    return {"min": best, "argmin_point": arg.tolist(),
            "samples": int(pts.shape[0] * trials_per_point)}


# ---------------------------------------------------------------------------
# Report plumbing
# ---------------------------------------------------------------------------

def _write_jsonl(path: Path, records: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_geodesic_csv(path, path_obj: gd.GeodesicPath) -> None:
    dim = path_obj.points.shape[1]
    header = ["s"] + [f"x{i}" for i in range(dim)] + [f"t{i}" for i in range(dim)]
    rows = [[f"{v:.17g}" for v in (s, *x, *t)]
            for s, x, t in zip(path_obj.s, path_obj.points, path_obj.tangents)]
    _write_csv(Path(path), header, rows)


def write_profile_csv(path, profile: nk.NeckProfile) -> None:
    header = ["t", "r", "psi", "beta", "phi", "tau", "eta"]
    rows = [[f"{v:.17g}" for v in row]
            for row in zip(profile.grid_t, profile.grid_r, profile.psi,
                           profile.beta, profile.phi, profile.tau, profile.eta)]
    _write_csv(Path(path), header, rows)


def write_eigen_csv(path, eig: st.EigenResult) -> None:
    k = eig.nodes.shape[1]
    header = [f"u{i}" for i in range(k)] + ["f"]
    rows = [[f"{v:.17g}" for v in (*u, f)]
            for u, f in zip(eig.nodes, np.ravel(eig.eigenfunction))]
    _write_csv(Path(path), header, rows)


# ---------------------------------------------------------------------------
# Manifest runner
# ---------------------------------------------------------------------------

_TASK_KINDS = ("curvature-scan", "biricci-scan", "ricci-scan", "diameter",
               "bound", "lemma1", "eigen", "neck-build", "neck-certify",
               "rho-sweep")


def _validate_manifest(doc: dict) -> list[dict]:
    tasks = doc.get("tasks", [])
    seen: set[str] = set()
    for t in tasks:
        tid = t.get("id")
        if not tid or tid in seen:
            raise ManifestError(f"task ids must be unique and nonempty (got {tid!r})")
        kind = t.get("kind")
        if kind not in _TASK_KINDS:
            raise ManifestError(f"task {tid}: unknown kind {kind!r}")
        for key, val in t.items():
            if isinstance(val, str) and val.startswith("task:"):
                ref = val[5:]
                if ref == tid:
                    raise ManifestError(f"task {tid}: self-reference (cyclic dependency)")
                if ref not in seen:
                    raise ManifestError(
                        f"task {tid}: reference to '{ref}' which is not an earlier task "
                        "(tasks must be topologically ordered)")
        seen.add(tid)
    return tasks


def run_manifest(doc: dict, base_dir: Path, out_dir: Path | None = None) -> int:
    """Execute a task list; returns the process exit code."""
    tasks = _validate_manifest(doc)
    out_dir = Path(out_dir or doc.get("output_dir", "."))
    seed = int(doc.get("seed", 0))
    records: list[dict] = []
    produced: dict[str, object] = {}
    failed_assertion = False

    def resolve_chart(t: dict) -> Chart:
        ref = t.get("chart")
        if ref is None:
            raise ManifestError(f"task {t['id']}: missing chart reference")
        if isinstance(ref, str) and ref.startswith("task:"):
            obj = produced.get(ref[5:])
            if not isinstance(obj, Chart):
                raise ManifestError(f"task {t['id']}: '{ref}' is not a chart")
            return obj
        return mf.chart_from_manifest(ref, base_dir)

    for t in tasks:
        tid, kind = t["id"], t["kind"]
        rec: dict = {"task": tid, "kind": kind}
        try:
            if kind == "curvature-scan":
                chart = resolve_chart(t)
                rng = np.random.default_rng(seed + t.get("seed", 0))
                pts = _scan_points(chart, int(t.get("points", 40)), rng)
                worst_sym = worst_con = 0.0
                for x in pts:
                    b = curvature_bundle(chart, x)
                    worst_sym = max(worst_sym, b.symmetry_residual())
                    worst_con = max(worst_con, b.contraction_residual())
                rec.update(symmetry_residual=worst_sym, contraction_residual=worst_con,
                           points=int(pts.shape[0]))
                if "assert_max_residual" in t and worst_sym > float(t["assert_max_residual"]):
                    rec["assertion"] = "failed"
                    failed_assertion = True
            elif kind in ("biricci-scan", "ricci-scan"):
                chart = resolve_chart(t)
                if kind == "biricci-scan":
                    res = biricci_scan(chart, float(t.get("sigma", 1.0)),
                                       points=int(t.get("points", 60)),
                                       pairs_per_point=int(t.get("pairs", 40)),
                                       seed=seed + int(t.get("seed", 0)))
                else:
                    res = ricci_scan(chart, points=int(t.get("points", 60)),
                                     seed=seed + int(t.get("seed", 0)))
                rec.update(res)
                produced[tid] = res["min"]
                if "assert_min_above" in t and res["min"] <= float(t["assert_min_above"]):
                    rec["assertion"] = "failed"
                    failed_assertion = True
            elif kind == "diameter":
                chart = resolve_chart(t)
                cd = None
                if "conformal" in t:
                    cd = mf.conformal_from_manifest(chart, t["conformal"])
                rep = gd.estimate_diameter(
                    chart, int(t.get("samples", 800)),
                    mode=t.get("mode", "base"), cd=cd,
                    seed=seed + int(t.get("seed", 0)), detail=True)
                rec.update(measured_diameter=rep.value, raw_graph_value=rep.raw_graph_value,
                           sample_count=rep.sample_count,
                           grid_resolution=rep.mean_edge_length)
                produced[tid] = rep.value
                if "assert_at_most" in t:
                    bound = t["assert_at_most"]
                    if isinstance(bound, str) and bound.startswith("task:"):
                        bound = produced[bound[5:]]
                    rec["bound"] = float(bound)
                    rec["margin"] = float(bound) - rep.value
                    if rep.value > float(bound):
                        rec["assertion"] = "failed"
                        failed_assertion = True
            elif kind == "bound":
                spec = bd.BoundSpec(
                    kind=t["bound_kind"], n=int(t["n"]), kappa=_num(t, "kappa", produced),
                    sigma=t.get("sigma"), epsilon=t.get("epsilon"), a=t.get("a"),
                    delta=t.get("delta"), m=t.get("m"))
                if spec.kind in ("thm1prime", "cor1prime"):
                    val = bd.primed_bound(spec, p0_dist=t.get("p0_dist"))
                else:
                    val = bd.bound_value(spec)
                rec.update(spec=t.get("bound_kind"), bound=val)
                produced[tid] = val
            elif kind == "lemma1":
                chart = resolve_chart(t)
                cd = mf.conformal_from_manifest(chart, t["conformal"])
                length = float(t["length"])
                x0 = np.asarray(t["x0"], dtype=float)
                v0 = np.asarray(t["v0"], dtype=float)
                path = gd.integrate_conformal_geodesic(chart, cd, x0, v0, length)
                worst = math.inf
                for phi in gd.phi_family(length):
                    lhs, rhs = gd.lemma1_check(chart, cd, path, phi)
                    worst = min(worst, lhs - rhs)
                rec.update(min_margin=worst)
                if worst < -float(t.get("tolerance", 1e-4)):
                    rec["assertion"] = "failed"
                    failed_assertion = True
                if "csv" in t:
                    write_geodesic_csv(out_dir / t["csv"], path)
            elif kind == "eigen":
                hs = mf.hypersurface_from_manifest(t["surface"], base_dir)
                domain = mf.domain_from_manifest(t["domain"])
                eig = st.first_eigenpair(hs, domain,
                                         normal_index=int(t.get("normal_index", 0)))
                rec.update(**{"lambda": eig.lambda_, "residual": eig.residual})
                produced[tid] = eig
                if "csv" in t:
                    write_eigen_csv(out_dir / t["csv"], eig)
            elif kind == "neck-build":
                profile = nk.build_profile(
                    int(t["m"]), float(t["sigma"]), _num(t, "kappa", produced),
                    float(t["r0"]), float(t["t1"]), c_hint=t.get("c"))
                rec.update(c=profile.c, rho=profile.rho, r1=profile.r1,
                           plateau=profile.plateau, cert_margin=profile.cert_margin)
                produced[tid] = profile
                if "csv" in t:
                    write_profile_csv(out_dir / t["csv"], profile)
                if "json" in t:
                    p = out_dir / t["json"]
                    p.parent.mkdir(parents=True, exist_ok=True)
                    p.write_text(json.dumps(profile.as_dict(), sort_keys=True))
            elif kind == "neck-certify":
                chart = resolve_chart(t)
                prof_ref = t["profile"]
                profile = produced.get(prof_ref[5:]) if isinstance(prof_ref, str) \
                    and prof_ref.startswith("task:") else None
                if profile is None:
                    raise ManifestError(f"task {tid}: profile must reference a neck-build task")
                neck_chart = nk.neck_metric(chart, profile)
                rep = nk.certify_neck(neck_chart, profile.m, profile.sigma,
                                      shells=int(t.get("shells", 20)),
                                      pairs_per_shell=int(t.get("pairs", 200)),
                                      seed=seed + int(t.get("seed", 0)))
                rec.update(min_biricci=rep.min_biricci,
                           argmin=rep.argmin_point.tolist(),
                           margin=float(np.min(rep.shell_minima - 0.0)),
                           samples=rep.samples)
                if rep.min_biricci <= 0.0:
                    rec["assertion"] = "failed"
                    failed_assertion = True
            elif kind == "rho-sweep":
                rows = nk.rho_sweep(int(t["m"]), float(t["sigma"]),
                                    _num(t, "kappa", produced), float(t["r0"]),
                                    [float(v) for v in t["t1_values"]])
                rec.update(sweep=rows)
                if "csv" in t:
                    _write_csv(out_dir / t["csv"], ["t1", "rho", "c", "cert_margin"],
                               [[r["t1"], r["rho"], r["c"], r["cert_margin"]] for r in rows])
                rhos = [r["rho"] for r in rows]
                if t.get("assert_decreasing") and any(b >= a for a, b in zip(rhos, rhos[1:])):
                    rec["assertion"] = "failed"
                    failed_assertion = True
            records.append(rec)
        except ManifestError:
            raise
        except GeometryError as exc:
            rec.update(error=str(exc))
            records.append(rec)
            _write_jsonl(out_dir / doc.get("report", "report.jsonl"), records)
            return EXIT_NUMERIC
    _write_jsonl(out_dir / doc.get("report", "report.jsonl"), records)
    return EXIT_ASSERTION if failed_assertion else EXIT_OK


def _num(t: dict, key: str, produced: dict) -> float:
    val = t[key]
    if isinstance(val, str) and val.startswith("task:"):
        val = produced[val[5:]]
    return float(val)


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blab",
                                description="bi-Ricci curvature workbench")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a manifest of tasks")
    run.add_argument("manifest")
    run.add_argument("--out", default=None, help="output directory override")

    scan = sub.add_parser("scan", help="bi-Ricci curvature floor scan")
    scan.add_argument("--chart", required=True)
    scan.add_argument("--sigma", type=float, default=1.0)
    scan.add_argument("--points", type=int, default=60)
    scan.add_argument("--pairs", type=int, default=40)
    scan.add_argument("--seed", type=int, default=0)
    scan.add_argument("--ricci", action="store_true", help="scan Ricci instead")
    scan.add_argument("--out", default=None)

    diam = sub.add_parser("diameter", help="graph-based diameter estimate")
    diam.add_argument("--chart", required=True)
    diam.add_argument("--samples", type=int, default=800)
    diam.add_argument("--seed", type=int, default=0)
    diam.add_argument("--out", default=None)

    bound = sub.add_parser("bound", help="closed-form bound calculators")
    bound.add_argument("--kind", required=True, choices=bd.KINDS)
    bound.add_argument("--n", type=int, required=True)
    bound.add_argument("--kappa", type=float, required=True)
    bound.add_argument("--sigma", type=float, default=None)
    bound.add_argument("--epsilon", type=float, default=None)
    bound.add_argument("--a", type=float, default=None)
    bound.add_argument("--delta", type=float, default=None)
    bound.add_argument("--m", type=int, default=None)
    bound.add_argument("--p0-dist", type=float, default=None)

    eig = sub.add_parser("eigen", help="first Dirichlet eigenpair")
    eig.add_argument("--surface", required=True)
    eig.add_argument("--cap-radius", type=float, default=None)
    eig.add_argument("--nodes", type=int, default=400)
    eig.add_argument("--csv", default=None)

    neck = sub.add_parser("neck", help="neck construction pipeline")
    nsub = neck.add_subparsers(dest="neck_command", required=True)
    nb = nsub.add_parser("build")
    nb.add_argument("--m", type=int, required=True)
    nb.add_argument("--sigma", type=float, required=True)
    nb.add_argument("--kappa", type=float, required=True)
    nb.add_argument("--r0", type=float, required=True)
    nb.add_argument("--t1", type=float, required=True)
    nb.add_argument("--c", type=float, default=None)
    nb.add_argument("--out-prefix", default="neck")
    nc = nsub.add_parser("certify")
    nc.add_argument("--profile", required=True)
    nc.add_argument("--chart", required=True)
    nc.add_argument("--shells", type=int, default=20)
    nc.add_argument("--pairs", type=int, default=200)
    nc.add_argument("--seed", type=int, default=0)
    nc.add_argument("--out", default=None)
    nr = nsub.add_parser("rho-sweep")
    nr.add_argument("--m", type=int, required=True)
    nr.add_argument("--sigma", type=float, required=True)
    nr.add_argument("--kappa", type=float, required=True)
    nr.add_argument("--r0", type=float, required=True)
    nr.add_argument("--t1", required=True, help="comma-separated list")
    nr.add_argument("--out", default="rho_sweep.csv")
    return p


def _profile_from_json(path: str) -> nk.NeckProfile:
    doc = json.loads(Path(path).read_text())
    rebuilt = nk.build_profile(int(doc["m"]), float(doc["sigma"]), float(doc["kappa"]),
                               float(doc["r0"]), float(doc["t1"]), c_hint=float(doc["c"]))
    return rebuilt


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            path = Path(args.manifest)
            doc = json.loads(path.read_text())
            return run_manifest(doc, path.parent, out_dir=args.out)
        if args.command == "scan":
            chart = mf.chart_from_manifest(args.chart)
            res = ricci_scan(chart, points=args.points, seed=args.seed) if args.ricci \
                else biricci_scan(chart, args.sigma, points=args.points,
                                  pairs_per_point=args.pairs, seed=args.seed)
            line = json.dumps(res, sort_keys=True)
            print(line)
            if args.out:
                Path(args.out).write_text(line + "\n")
            return EXIT_OK
        if args.command == "diameter":
            chart = mf.chart_from_manifest(args.chart)
            rep = gd.estimate_diameter(chart, args.samples, seed=args.seed, detail=True)
            line = json.dumps({"measured_diameter": rep.value,
                               "raw_graph_value": rep.raw_graph_value,
                               "sample_count": rep.sample_count,
                               "grid_resolution": rep.mean_edge_length}, sort_keys=True)
            print(line)
            if args.out:
                Path(args.out).write_text(line + "\n")
            return EXIT_OK
        if args.command == "bound":
            spec = bd.BoundSpec(kind=args.kind, n=args.n, kappa=args.kappa,
                                sigma=args.sigma, epsilon=args.epsilon, a=args.a,
                                delta=args.delta, m=args.m)
            val = bd.primed_bound(spec, p0_dist=args.p0_dist) \
                if args.kind in ("thm1prime", "cor1prime") else bd.bound_value(spec)
            print(json.dumps({"spec": args.kind, "bound": val}, sort_keys=True))
            return EXIT_OK
        if args.command == "eigen":
            hs = mf.hypersurface_from_manifest(args.surface)
            if args.cap_radius is None:
                raise ManifestError("supply --cap-radius for the radial eigenproblem")
            eig = st.first_eigenpair(hs, st.RadialCapDomain(radius=args.cap_radius,
                                                            nodes=args.nodes))
            print(json.dumps({"lambda": eig.lambda_, "residual": eig.residual},
                             sort_keys=True))
            if args.csv:
                write_eigen_csv(args.csv, eig)
            return EXIT_OK
        if args.command == "neck":
            if args.neck_command == "build":
                profile = nk.build_profile(args.m, args.sigma, args.kappa, args.r0,
                                           args.t1, c_hint=args.c)
                Path(args.out_prefix + ".json").write_text(
                    json.dumps(profile.as_dict(), sort_keys=True))
                write_profile_csv(args.out_prefix + ".csv", profile)
                print(json.dumps({"c": profile.c, "rho": profile.rho,
                                  "cert_margin": profile.cert_margin}, sort_keys=True))
                return EXIT_OK
            if args.neck_command == "certify":
                profile = _profile_from_json(args.profile)
                chart = mf.chart_from_manifest(args.chart)
                rep = nk.certify_neck(nk.neck_metric(chart, profile), profile.m,
                                      profile.sigma, shells=args.shells,
                                      pairs_per_shell=args.pairs, seed=args.seed)
                line = json.dumps({"min_biricci": rep.min_biricci,
                                   "argmin": rep.argmin_point.tolist(),
                                   "margin": rep.min_biricci,
                                   "samples": rep.samples}, sort_keys=True)
                print(line)
                if args.out:
                    Path(args.out).write_text(line + "\n")
                return EXIT_OK if rep.min_biricci > 0 else EXIT_ASSERTION
            if args.neck_command == "rho-sweep":
                t1s = [float(v) for v in args.t1.split(",")]
                rows = nk.rho_sweep(args.m, args.sigma, args.kappa, args.r0, t1s)
                _write_csv(Path(args.out), ["t1", "rho", "c", "cert_margin"],
                           [[r["t1"], r["rho"], r["c"], r["cert_margin"]] for r in rows])
                print(json.dumps({"rho": [r["rho"] for r in rows]}, sort_keys=True))
                return EXIT_OK
        raise ManifestError(f"unhandled command {args.command}")
    except (ManifestError, InadmissibleSpec) as exc:
        print(f"manifest error: {exc}", file=sys.stderr)
        return EXIT_MANIFEST
    except GeometryError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
