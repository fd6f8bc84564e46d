"""Command-line suite runner: catalog listing, verification runs and report rendering.

Exit codes: 0 when every verdict holds or has a failed hypothesis, 1 when any
verdict is violated, 2 for usage and I/O errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from . import inequalities as ineq
from .catalog import CatalogError, SurfaceCatalogEntry, load_catalog
from .inequalities import HOLDS, HYPOTHESIS_FAILED, THEOREMS, VIOLATED, InequalityReport
from .varifold import BALL_EPS

DEFAULT_RESOLUTIONS = (16, 32, 64)
BUNDLE_FILE = "reports.json"
THREADS_ENV = "VARIGEOM_THREADS"
CSV_FIELDS = ("surface", "theorem", "resolution", "verdict", "lhs", "rhs", "margin", "tol",
              "hypotheses_ok", "failed_hypotheses", "diagnostics")

MONOTONICITY = ("monotonicity_pos", "monotonicity_m", "monotonicity_neg")


class UsageError(ValueError):
    pass


@dataclass
class RunSpec:
    surfaces: list
    theorems: Optional[list] = None  # None: each surface's catalog theorems
    resolutions: tuple = DEFAULT_RESOLUTIONS
    format: str = "json"
    ball_eps: float = BALL_EPS
    tol_factor: float = ineq.TOL_FACTOR
    grid: int = 10
    catalog: Optional[str] = None
    threads: int = 1
    entries: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.resolutions = tuple(int(r) for r in self.resolutions)
        if not self.surfaces:
            raise UsageError("at least one surface is required")
        if self.theorems is not None and not self.theorems:
            raise UsageError("at least one theorem is required")
        if not self.resolutions or any(r < 2 for r in self.resolutions):
            raise UsageError("resolutions must be integers >= 2")
        if any(b <= a for a, b in zip(self.resolutions, self.resolutions[1:])):
            raise UsageError("resolutions must be strictly increasing")
        if self.format not in ("json", "csv", "table"):
            raise UsageError(f"unknown format {self.format!r}")
        if not (self.ball_eps > 0 and self.tol_factor > 0 and self.grid >= 1):
            raise UsageError("ball eps, tolerance factor and grid size must be positive")
        bad = [t for t in (self.theorems or ()) if t not in THEOREMS]
        if bad:
            raise UsageError(f"unknown theorems {bad}; available: {', '.join(THEOREMS)}")
        if not self.entries:
            self.entries = load_catalog(self.catalog)
        missing = [s for s in self.surfaces if s not in self.entries]
        if missing:
            raise UsageError(f"unknown surfaces {missing}; available: {', '.join(self.entries)}")

    def cells(self):
        """(surface, theorem) pairs in run order."""
        out = []
        for s in self.surfaces:
            ths = self.theorems if self.theorems is not None else self.entries[s].theorems
            out.extend((s, t) for t in ths)
        return out


# -- running ----------------------------------------------------------------------------


def run_theorem(entry: SurfaceCatalogEntry, V, theorem: str, p, rho_max=None,
                eps=BALL_EPS, grid=10) -> InequalityReport:
    """One verifier on one sampled surface, with catalog options applied."""
    opts = dict(entry.options.get(theorem, {}) or {})
    if theorem in MONOTONICITY:
        return ineq.monotonicity_suite(theorem, V, p, rho_max=rho_max, count=grid,
                                       b=opts.get("b"), eps=eps)
    if theorem == "li_yau":
        return ineq.check_li_yau(V, p, b=opts.get("b"), C=opts.get("C"))
    if theorem == "diameter_pinching":
        return ineq.check_diameter_pinching(V, i=opts.get("i"), b=opts.get("b"))
    if theorem == "min_diameter":
        return ineq.check_min_diameter(V, b=opts.get("b"), i_p=opts.get("i_p"), rho=rho_max)
    if theorem == "asymptotic_bound":
        kw = {"b": opts["b"]} if "b" in opts else {}
        return ineq.check_asymptotic_bound(V, p, rho=rho_max, **kw)
    if theorem == "sobolev":
        b = opts.get("b")
        claims = [ineq.check_sobolev(V, ineq.ConstantOne(), b=b, eps=eps)]
        if "bump_radius" in opts:
            h = ineq.RadialBump(V.space, p, float(opts["bump_radius"]))
            claims.append(ineq.check_sobolev(V, h, b=b, eps=eps))
        return ineq._combine("sobolev", claims, diagnostics={"test_functions": len(claims)})
    if theorem == "isoperimetric":
        return ineq.check_isoperimetric(V, b=opts.get("b"))
    if theorem == "good_radius":
        return ineq.sobolev_good_radius(V, p, b=opts.get("b"), eps=eps)
    raise UsageError(f"unknown theorem {theorem!r}")


def _run_surface(spec: RunSpec, name: str, theorems: list):
    entry = spec.entries[name]
    p = entry.point()
    # finest resolution first: it fixes the radii of every statement for the whole
    # ladder, so margins at different resolutions test the same inequality
    rho_max = {}
    out = []
    for n in sorted(spec.resolutions, reverse=True):
        V = entry.build(n)
        for t in theorems:
            if t in MONOTONICITY and t not in rho_max:
                b = (entry.options.get(t) or {}).get("b")
                rho_max[t] = ineq.default_rho_max(V, p, t, b)
            elif t not in rho_max:
                # min_diameter measures from the surface's own centre
                rho_max[t] = ineq.default_radius(V, None if t == "min_diameter" else p, t)
            rep = run_theorem(entry, V, t, p, rho_max.get(t), spec.ball_eps, spec.grid)
            out.append((name, t, n, rep))
    return out


def _ladder(records):
    """Attach margin drift between consecutive resolutions of each (surface, theorem)."""
    prev = {}
    for rec in records:
        key = (rec["surface"], rec["theorem"])
        if key in prev:
            last = prev[key]
            drift = float(rec["margin"]) - float(last["margin"])
            rec["diagnostics"]["margin_drift"] = drift if math.isfinite(drift) else repr(drift)
            rec["diagnostics"]["previous_resolution"] = last["resolution"]
        prev[key] = rec
    return records


def run(spec: RunSpec) -> dict:
    """Report bundle for every (surface, theorem, resolution) of the spec."""
    order = {}
    for s, t in spec.cells():
        order.setdefault(s, []).append(t)
    old = ineq.TOL_FACTOR
    ineq.TOL_FACTOR = spec.tol_factor
    try:
        if spec.threads > 1 and len(order) > 1:
            with ThreadPoolExecutor(spec.threads) as pool:
                parts = list(pool.map(lambda kv: _run_surface(spec, *kv), order.items()))
        else:
            parts = [_run_surface(spec, s, ts) for s, ts in order.items()]
    finally:
        ineq.TOL_FACTOR = old
    srank = {s: i for i, s in enumerate(order)}
    rows = sorted((r for part in parts for r in part),
                  key=lambda r: (srank[r[0]], order[r[0]].index(r[1]), r[2]))
    records = []
    for s, t, n, rep in rows:
        rec = {"surface": s, "resolution": n, **rep.to_dict()}
        records.append(rec)
    overrides = {}
    if spec.ball_eps != BALL_EPS:
        overrides["ball_eps"] = spec.ball_eps
    if spec.tol_factor != old:
        overrides["tol_factor"] = spec.tol_factor
    if spec.grid != 10:
        overrides["grid"] = spec.grid
    bundle = {"version": 1, "resolutions": list(spec.resolutions), "reports": _ladder(records)}
    if overrides:
        bundle["overrides"] = overrides
    return bundle


def exit_status(bundle: dict) -> int:
    return 1 if any(r["verdict"] == VIOLATED for r in bundle["reports"]) else 0


# -- rendering --------------------------------------------------------------------------


def _dump(x, indent=0) -> str:
    """JSON text with every float written to 17 significant digits."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(x, bool) or x is None:
        return json.dumps(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            return json.dumps(repr(x))
        s = "%.17g" % x
        return s if any(c in s for c in ".en") else s + ".0"
    if isinstance(x, (int, str)):
        return json.dumps(x)
    if isinstance(x, dict):
        if not x:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {_dump(v, indent + 1)}" for k, v in x.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(x, (list, tuple)):
        if not x:
            return "[]"
        items = [inner + _dump(v, indent + 1) for v in x]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    raise TypeError(f"cannot serialise {type(x).__name__}")


def to_json(bundle: dict) -> str:
    return _dump(bundle) + "\n"


def to_csv(bundle: dict) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in bundle["reports"]:
        failed = [h["name"] for h in r["hypotheses"] if not h["satisfied"]]
        row = {k: r[k] for k in ("surface", "theorem", "resolution", "verdict")}
        for k in ("lhs", "rhs", "margin", "tol"):
            row[k] = "%.17g" % r[k] if isinstance(r[k], float) else r[k]
        row["hypotheses_ok"] = not failed
        row["failed_hypotheses"] = "; ".join(failed)
        row["diagnostics"] = json.dumps(r["diagnostics"], sort_keys=True)
        w.writerow(row)
    return buf.getvalue()


def _sci(x):
    return f"{x:.3e}" if isinstance(x, (int, float)) else str(x)


def to_table(bundle: dict) -> str:
    head = ("surface", "theorem", "n", "verdict", "margin", "tol")
    rows = [(r["surface"], r["theorem"], str(r["resolution"]), r["verdict"], _sci(r["margin"]), _sci(r["tol"]))
            for r in bundle["reports"]]
    widths = [max(len(h), *(len(row[i]) for row in rows)) for i, h in enumerate(head)]
    line = lambda cells: "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    out = [line(head), line(["-" * w for w in widths])] + [line(r) for r in rows]
    counts = {v: sum(r["verdict"] == v for r in bundle["reports"]) for v in (HOLDS, VIOLATED, HYPOTHESIS_FAILED)}
    out.append("")
    out.append(", ".join(f"{v}: {c}" for v, c in counts.items()))
    return "\n".join(out) + "\n"


RENDER = {"json": to_json, "csv": to_csv, "table": to_table}
SUFFIX = {"json": "json", "csv": "csv", "table": "txt"}


def load_schema() -> dict:
    return json.loads(resources.files("varigeom").joinpath("data/report.schema.json").read_text())


def write_bundle(bundle: dict, out_dir, fmt: str) -> list:
    """Write the JSON bundle plus the requested format into out_dir."""
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    paths = [d / BUNDLE_FILE]
    paths[0].write_text(to_json(bundle))
    if fmt != "json":
        paths.append(d / f"reports.{SUFFIX[fmt]}")
        paths[-1].write_text(RENDER[fmt](bundle))
    return paths


def read_bundle(in_dir) -> dict:
    path = Path(in_dir) / BUNDLE_FILE
    bundle = json.loads(path.read_text())
    if not isinstance(bundle, dict) or not bundle.get("reports"):
        raise UsageError(f"{path} holds no reports")
    return bundle


# -- entry point ------------------------------------------------------------------------


def _parser():
    ap = argparse.ArgumentParser(prog="varigeom", description="Verify varifold inequalities on analytic surfaces.")
    ap.add_argument("--catalog", help="catalog YAML file (default: the shipped catalog)")
    sub = ap.add_subparsers(dest="command", required=True)

    cat = sub.add_parser("catalog", help="inspect the surface catalog")
    cat_sub = cat.add_subparsers(dest="action", required=True)
    ls = cat_sub.add_parser("list", help="list catalog surfaces")
    ls.add_argument("--format", choices=("table", "json"), default="table")

    r = sub.add_parser("run", help="run verifiers over catalog surfaces")
    r.add_argument("--surfaces", nargs="+", help="catalog names (default: all)")
    r.add_argument("--theorems", nargs="+", help=f"theorem ids (default: catalog choices); one of {', '.join(THEOREMS)}")
    r.add_argument("--resolutions", nargs="+", type=int, default=list(DEFAULT_RESOLUTIONS))
    r.add_argument("--out", help="output directory (default: print to stdout)")
    r.add_argument("--format", choices=tuple(RENDER), default="json")
    r.add_argument("--ball-eps", type=float, default=BALL_EPS, help="relative ball refinement tolerance")
    r.add_argument("--tol-factor", type=float, default=ineq.TOL_FACTOR, help="report tolerance multiplier")
    r.add_argument("--grid", type=int, default=10, help="monotonicity grid size per axis")

    rep = sub.add_parser("report", help="render a stored report bundle")
    rep.add_argument("--in", dest="in_dir", required=True)
    rep.add_argument("--format", choices=tuple(RENDER), default="table")
    return ap


def _threads():
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {raw!r}")
    if n < 1:
        raise UsageError(f"{THREADS_ENV} must be at least 1")
    return n


def main(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        if args.command == "catalog":
            entries = load_catalog(args.catalog)
            if args.format == "json":
                sys.stdout.write(_dump([e.summary() for e in entries.values()]) + "\n")
            else:
                for e in entries.values():
                    params = ", ".join(f"{k}={v:g}" for k, v in e.parameters.items())
                    print(f"{e.name:22s} {e.kind:20s} b={e.b:g}  {params}")
            return 0
        if args.command == "run":
            entries = load_catalog(args.catalog)
            spec = RunSpec(args.surfaces or list(entries), args.theorems, tuple(args.resolutions),
                           args.format, args.ball_eps, args.tol_factor, args.grid, args.catalog,
                           _threads(), entries)
            bundle = run(spec)
            if args.out:
                write_bundle(bundle, args.out, args.format)
            else:
                sys.stdout.write(RENDER[args.format](bundle))
            return exit_status(bundle)
        bundle = read_bundle(args.in_dir)
        sys.stdout.write(RENDER[args.format](bundle))
        return exit_status(bundle)
    except (UsageError, CatalogError, OSError, json.JSONDecodeError) as exc:
        print(f"varigeom: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
