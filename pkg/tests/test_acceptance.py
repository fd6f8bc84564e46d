"""Acceptance suite: one PASS/FAIL line per criterion, every tolerance pinned below."""
import json
import math
import os
import subprocess
import sys
import time

import jsonschema
import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from varigeom import cli
from varigeom import comparison as cmp
from varigeom import inequalities as I
from varigeom import surfaces as S
from varigeom.catalog import catalog_build, catalog_entry, catalog_list
from varigeom.immersion import first_variation_numeric
from varigeom.model_space import ModelSpace

# -- pinned tolerances --------------------------------------------------------------
WILLMORE_TOL = 1e-6
WILLMORE_SECONDS = 10.0
PAIR_MARGIN_TOL = 5e-3
MONO_RESOLUTIONS = (32, 64)
MONO_GRID = 10
FV_REL_TOL = 1e-4
FV_STEP = 1e-4
FV_LADDER = (1e-2, 5e-3)
FV_RATIO = 3.5
FV_FIELDS = 20
HESS_SAMPLES = 100_000
HESS_TOL = 1e-10
CMP_TOL = 1e-10
CROSSOVER_TOL = 1e-12
PINCH_B = 1e-4
PINCH_RADII = (0.5, 1.0, 2.0)
ISO_COUNT = 10
ISO_TOL = 1e-10
CLI_SECONDS = 300.0

E3, S3, H3 = ModelSpace(3, 0.0), ModelSpace(3, 1.0), ModelSpace(3, -1.0)


def record(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


# -- 1 --------------------------------------------------------------------------------

def test_criterion_01_willmore_anchors():
    radii = {E3: (0.25, 0.5, 1.0, 2.0, 4.0), S3: (0.3, 0.7, 1.2, 2.0, 2.8), H3: (0.3, 0.7, 1.2, 2.0, 3.0)}
    t0 = time.perf_counter()
    worst = 0.0
    for space, rs in radii.items():
        for rho in rs:
            V = S.geodesic_sphere(space, rho).sample_varifold(64)
            # 1/4 int |H|^2 + b |M| = 4 pi on every geodesic sphere
            worst = max(worst, abs(V.willmore_energy() + space.b * V.area() - 4 * math.pi))
    dt = time.perf_counter() - t0
    record(1, worst < WILLMORE_TOL and dt < WILLMORE_SECONDS,
           f"max |W + bA - 4pi| = {worst:.2e} over 15 spheres, {dt:.1f} s")


# -- 2 --------------------------------------------------------------------------------

def test_criterion_02_li_yau_pair():
    V = catalog_build("tangent_sphere_pair", 64)
    rep = I.check_li_yau(V, catalog_entry("tangent_sphere_pair").point(), b=0.0, C=1.0)
    ok = (rep.verdict == I.HOLDS and abs(rep.lhs - 8 * math.pi) < PAIR_MARGIN_TOL
          and abs(rep.rhs - rep.lhs) < PAIR_MARGIN_TOL)
    record(2, ok, f"lhs - 8pi = {rep.lhs - 8 * math.pi:.2e}, margin = {rep.margin:.2e}, {rep.verdict}")


# -- 3 --------------------------------------------------------------------------------

def test_criterion_03_monotonicity_suites():
    entries = catalog_list()
    spec = cli.RunSpec([e.name for e in entries], list(cli.MONOTONICITY), MONO_RESOLUTIONS, grid=MONO_GRID)
    bundle = cli.run(spec)
    dims = {e.name: e.build(4).m for e in entries}
    violations, cells, missing = 0, 0, []
    for rec in bundle["reports"]:
        counts = rec["diagnostics"].get("counts", {})
        violations += counts.get(I.VIOLATED, 0)
        cells += sum(counts.values())
        # the sigma^2 and phi forms are statements about 2-varifolds; phi needs b < 0
        t, s = rec["theorem"], rec["surface"]
        applicable = (t == "monotonicity_m"
                      or (dims[s] == 2 and (t == "monotonicity_pos" or catalog_entry(s).b < 0)))
        if applicable and rec["verdict"] != I.HOLDS:
            missing.append((rec["surface"], rec["theorem"], rec["resolution"], rec["verdict"]))
    ok = violations == 0 and not missing
    record(3, ok, f"{cells} (sigma, rho) cells on {len(entries)} surfaces at {MONO_RESOLUTIONS}, "
                  f"{violations} violations, non-holding applicable suites: {missing or 'none'}")


# -- 4 --------------------------------------------------------------------------------

def _random_field(rng, D):
    A = 0.7 * rng.standard_normal((D, D))
    c = rng.uniform(0, 2 * math.pi, D)
    w = rng.standard_normal(D)
    return lambda x: w * np.sin(x @ A.T + c)


def test_criterion_04_first_variation():
    n = 48
    rng = np.random.default_rng(2024)
    worst_rel, worst_ratio = 0.0, math.inf
    for e in catalog_list():
        V, imms = e.build(n), e.immersions()
        sp = V.space
        # floor for the relative error: on minimal surfaces delta V(X) vanishes
        radius = math.sqrt(V.area() / (4 * math.pi))
        for _ in range(FV_FIELDS):
            X = _random_field(rng, sp.dim)
            ana = V.first_variation(X)
            num = lambda t: sum(first_variation_numeric(i, X, t, n) for i in imms)
            scale = V.integrate_weight(lambda x: sp.norm(sp.project_tangent(x, X(x)))) / radius
            worst_rel = max(worst_rel, abs(num(FV_STEP) - ana) / max(abs(ana), scale))
            e1, e2 = (abs(num(t) - ana) for t in FV_LADDER)
            worst_ratio = min(worst_ratio, e1 / e2)
    ok = worst_rel < FV_REL_TOL and worst_ratio >= FV_RATIO
    record(4, ok, f"max relative error {worst_rel:.1e} at t = {FV_STEP:g}, "
                  f"min error ratio {worst_ratio:.2f} for t {FV_LADDER[0]:g} -> {FV_LADDER[1]:g}")


# -- 5 --------------------------------------------------------------------------------

def _frames(space, rng, q):
    return space.orthonormal_frame(q, rng.standard_normal(q.shape[:-1] + (2, space.dim)))


def test_criterion_05_hessian_comparison():
    rng = np.random.default_rng(5)
    p, q = S3.random_point(rng, HESS_SAMPLES), S3.random_point(rng, HESS_SAMPLES)
    r = S3.distance(p, q)
    keep = (r > 1e-6) & (r < (1 - 1e-6) * math.pi)
    p, q, r = p[keep], q[keep], r[keep]
    lo = float(np.min(S3.div_T_r_grad_r(p, q, _frames(S3, rng, q)) - 2 * cmp.a_b(1.0, r)))
    worst_eq = 0.0
    for D in (2, 3, 5):
        E = ModelSpace(D, 0.0)
        a, b = E.random_point(rng, 20_000), E.random_point(rng, 20_000)
        worst_eq = max(worst_eq, float(np.max(np.abs(E.div_T_r_grad_r(a, b, _frames(E, rng, b)) - 2))))
    ok = lo >= -HESS_TOL and worst_eq <= HESS_TOL and len(r) >= 0.99 * HESS_SAMPLES
    record(5, ok, f"min(div_T - m a_b) = {lo:.2e} on {len(r)} samples in S^3; "
                  f"max |div_T - m| = {worst_eq:.1e} in R^n")


# -- 6 --------------------------------------------------------------------------------

def test_criterion_06_comparison_functions():
    errs = {}
    errs["a(0)=1"] = abs(cmp.a_b(1.0, 0.0) - 1)
    errs["a(pi/3)"] = abs(cmp.a_b(1.0, math.pi / 3) - math.pi / (3 * math.sqrt(3)))
    errs["c(0)=1/3"] = abs(cmp.c_quad(1.0, 0.0) - 1 / 3)
    errs["c(pi/2)=4/pi^2"] = abs(cmp.c_quad(1.0, math.pi / 2) - 4 / math.pi**2)
    errs["c_lin(pi/2)=2/pi"] = abs(cmp.c_lin(1.0, math.pi / 2) - 2 / math.pi)
    x = np.linspace(0, math.pi / 2, 20001)
    a, c, cl = cmp.a_b(1.0, x), cmp.c_quad(1.0, x), cmp.c_lin(1.0, x)
    bounds = [
        np.all(a <= 1 + CMP_TOL), np.all(np.diff(a) < 0), np.all(a[:-1] > 0),
        np.all(a[x <= math.pi / 3] >= 0.5 - CMP_TOL), np.all(np.diff(c) > 0),
        np.all((c >= 1 / 3 - CMP_TOL) & (c <= 4 / math.pi**2 + CMP_TOL)),
        np.all(cl <= 1 + CMP_TOL), np.all(np.diff(cl) > 0),
    ]
    t = np.linspace(0.1, 5.0, 200)
    phi_err = 0.0
    for b in (-0.25, -1.0, -4.0):
        ident = 2 * cmp.phi(b, t) * cmp.c_b(b, t) + cmp.phi_prime(b, t) * cmp.s_b(b, t)
        phi_err = max(phi_err, float(np.max(np.abs(ident - abs(b)))))
    errs["phi identity"] = phi_err
    th = cmp.SERIES_THRESHOLD
    jump = max(abs(fn(1.0, th * (1 + 1e-12)) - fn(1.0, th * (1 - 1e-12))) for fn in (cmp.a_b, cmp.c_quad, cmp.c_lin))
    ok = max(errs.values()) <= CMP_TOL and all(bounds) and jump <= CROSSOVER_TOL
    record(6, ok, f"max endpoint/identity error {max(errs.values()):.1e}, bounds {sum(map(bool, bounds))}/"
                  f"{len(bounds)}, crossover jump {jump:.1e}")


# -- 7 --------------------------------------------------------------------------------

def test_criterion_07_minimal_diameter():
    parts, ok = [], True
    for name in ("clifford_torus", "great_sphere"):
        V = catalog_build(name, 64)
        rep = I.check_min_diameter(V)
        th = rep.claims[1]
        d, gap = th.diagnostics["d_ext"], th.diagnostics["d_ext_gap"]
        good = th.verdict == I.HOLDS and d >= math.pi / 2 and abs(d - math.pi) <= 2 * V.mesh_gap()
        ok &= good
        parts.append(f"{name} d_ext = {d:.12f} (gap {gap:.1e})")
    record(7, ok, "; ".join(parts))


# -- 8 --------------------------------------------------------------------------------

def test_criterion_08_diameter_pinching():
    parts, ok = [], True
    for R in PINCH_RADII:
        V = S.round_sphere(R).sample_varifold(64)
        rep = I.check_diameter_pinching(V, i=math.inf, b=PINCH_B)
        lower = rep.claims[0]
        good = rep.verdict == I.HOLDS and all(c.verdict == I.HOLDS for c in rep.claims) and lower.margin > 0
        ok &= good
        parts.append(f"R={R:g}: margins " + ", ".join(f"{c.margin:.3g}" for c in rep.claims))
    record(8, ok, "; ".join(parts))


# -- 9 --------------------------------------------------------------------------------

def test_criterion_09_sobolev_isoperimetric():
    verdicts = []
    for name in ("flat_disk", "unit_sphere"):
        V = catalog_build(name, 64)
        p = catalog_entry(name).point()
        verdicts.append(I.check_sobolev(V, I.ConstantOne(), b=1e-6).verdict)
        verdicts.append(I.check_sobolev(V, I.RadialBump(V.space, p, 0.8), b=1e-6).verdict)
        verdicts.append(I.check_isoperimetric(V, b=1e-6).verdict)
    V = catalog_build("unit_sphere", 64)
    gr = I.sobolev_good_radius(V, catalog_entry("unit_sphere").point())
    witness = gr.diagnostics.get("witness")
    ok = all(v == I.HOLDS for v in verdicts) and gr.verdict == I.HOLDS and witness is not None
    record(9, ok, f"{verdicts.count(I.HOLDS)}/{len(verdicts)} Sobolev/isoperimetric checks hold; "
                  f"good radius witness {witness} (rho0 = {gr.diagnostics.get('rho0'):.4g})")


# -- 10 and 11 share one run of the default CLI suite --------------------------------

@pytest.fixture(scope="module")
def default_suite(tmp_path_factory):
    out = tmp_path_factory.mktemp("suite")
    env = dict(os.environ)
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "varigeom.cli", "run", "--out", str(out)],
                          capture_output=True, text=True, env=env)
    dt = time.perf_counter() - t0
    return proc, dt, out


def _margins(space, V, W, iso, p):
    q = iso(p)
    pairs = [
        (I.check_li_yau(V, p), I.check_li_yau(W, q)),
        (I.check_monotonicity_m(V, p, 0.3, 1.2), I.check_monotonicity_m(W, q, 0.3, 1.2)),
        (I.check_sobolev(V, I.RadialBump(space, p, 0.6), b=1e-6 if space.b <= 0 else None),
         I.check_sobolev(W, I.RadialBump(space, q, 0.6), b=1e-6 if space.b <= 0 else None)),
    ]
    if space.b > 0:
        pairs.append((I.check_monotonicity_pos(V, p, 0.3, 1.2), I.check_monotonicity_pos(W, q, 0.3, 1.2)))
    if space.b < 0:
        pairs.append((I.check_monotonicity_neg(V, p, 0.3, 1.2), I.check_monotonicity_neg(W, q, 0.3, 1.2)))
    return max(abs(a.margin - b.margin) for a, b in pairs)


def test_criterion_10_invariance_and_refinement(default_suite):
    rng = np.random.default_rng(10)
    fixtures = [(E3, S.torus_of_revolution(2.0, 1.0)), (S3, S.geodesic_sphere(S3, 0.7)),
                (H3, S.geodesic_sphere(H3, 0.8))]
    worst = 0.0
    for space, imm in fixtures:
        V = imm.sample_varifold(32)
        p = V.atoms.points[17]
        for _ in range(ISO_COUNT):
            iso = space.random_isometry(rng, boost=0.5)
            worst = max(worst, _margins(space, V, V.transform(iso), iso, p))
    bundle = cli.read_bundle(default_suite[2])
    recs = {(r["surface"], r["theorem"], r["resolution"]): r for r in bundle["reports"]}
    drift_bad, pairs = [], 0
    for (s, t, n), r in recs.items():
        if n == 64 and (s, t, 32) in recs:
            q = recs[(s, t, 32)]
            pairs += 1
            if not abs(r["margin"] - q["margin"]) <= r["tol"] + q["tol"]:
                drift_bad.append((s, t))
    ok = worst <= ISO_TOL and not drift_bad and pairs > 0
    record(10, ok, f"max margin change under {3 * ISO_COUNT} isometries {worst:.1e}; "
                   f"{pairs - len(drift_bad)}/{pairs} reports drift within their error bound 32 -> 64")


def test_criterion_11_cli_suite(default_suite):
    proc, dt, out = default_suite
    valid = False
    try:
        doc = json.loads((out / cli.BUNDLE_FILE).read_text())
        jsonschema.validate(doc, cli.load_schema())
        valid = True
        n = len(doc["reports"])
        verdicts = {r["verdict"] for r in doc["reports"]}
    except (OSError, ValueError, jsonschema.ValidationError):
        n, verdicts = 0, set()
    ok = proc.returncode == 0 and dt < CLI_SECONDS and valid
    record(11, ok, f"exit {proc.returncode}, {dt:.0f} s, {n} reports, schema-valid={valid}, "
                   f"verdicts {sorted(verdicts)}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
