"""Numerical verifiers for monotonicity, Li--Yau, diameter, Sobolev and
isoperimetric inequalities on sampled varifolds.

Every verifier measures its hypotheses first, evaluates both sides with a
propagated error estimate, and returns an :class:`InequalityReport`. A failed
hypothesis downgrades the verdict instead of raising.

Error model. Integrals over balls carry the indicator error of the refined
ball sample (``BallSample.err``) plus the varifold's relative quadrature error
times the absolute integral; global integrals carry the latter only. The
report tolerance is ``3 * (error(lhs) + error(rhs) + extra)`` plus a few ulps
of the magnitudes, where ``extra`` holds density residuals and mesh gaps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import comparison as cmp
from .varifold import BALL_EPS, BALL_MAX_DEPTH, ResolutionError, SampledVarifold

HOLDS = "holds"
VIOLATED = "violated-within-tolerance"
HYPOTHESIS_FAILED = "hypothesis-failed"

TOL_FACTOR = 3.0
H_NORMAL_TOL = 1e-7
HINT_TOL = 1e-6
DEFAULT_B_UPPER = 1e-6  # curvature bound used for b > 0 statements in flat/hyperbolic spaces
LI_YAU_C_POS = 16.0 / math.pi**2

THEOREMS = (
    "monotonicity_pos", "monotonicity_m", "monotonicity_neg", "li_yau", "diameter_pinching",
    "min_diameter", "asymptotic_bound", "sobolev", "isoperimetric", "good_radius",
)


# -- report types ----------------------------------------------------------------


@dataclass
class Hypothesis:
    name: str
    satisfied: bool
    measured: object = None

    def to_dict(self):
        return {"name": self.name, "satisfied": bool(self.satisfied), "measured": _jsonable(self.measured)}


@dataclass
class InequalityReport:
    theorem: str
    hypotheses: list
    lhs: float
    rhs: float
    margin: float
    tol: float
    verdict: str
    diagnostics: dict = field(default_factory=dict)
    claims: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.verdict != VIOLATED

    def to_dict(self):
        out = {
            "theorem": self.theorem,
            "hypotheses": [h.to_dict() for h in self.hypotheses],
            "lhs": _jsonable(self.lhs),
            "rhs": _jsonable(self.rhs),
            "margin": _jsonable(self.margin),
            "tol": _jsonable(self.tol),
            "verdict": self.verdict,
            "diagnostics": {k: _jsonable(v) for k, v in self.diagnostics.items()},
        }
        if self.claims:
            out["claims"] = [c.to_dict() for c in self.claims]
        return out


def _jsonable(x):
    """Plain JSON value; non-finite floats become strings."""
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    return x


class _Side:
    """Running sum of terms with their error bounds."""

    def __init__(self):
        self.value = 0.0
        self.err = 0.0
        self.terms = {}

    def add(self, name, value, err=0.0, sign=1.0):
        self.value += sign * value
        self.err += abs(err)
        self.terms[name] = sign * value
        return self


def _finish(theorem, hyps, lhs: _Side, rhs: _Side, extra=0.0, diagnostics=None, claims=()):
    lv, rv = float(lhs.value), float(rhs.value)
    margin = rv - lv
    scale = (abs(lv) if math.isfinite(lv) else 0.0) + (abs(rv) if math.isfinite(rv) else 0.0)
    tol = TOL_FACTOR * (lhs.err + rhs.err + extra) + 64 * np.finfo(float).eps * scale
    if not all(h.satisfied for h in hyps):
        verdict = HYPOTHESIS_FAILED
    elif math.isnan(margin):
        verdict = VIOLATED
    else:
        verdict = HOLDS if margin >= -tol else VIOLATED
    diag = {"lhs_terms": dict(lhs.terms), "rhs_terms": dict(rhs.terms),
            "lhs_error": lhs.err, "rhs_error": rhs.err, "extra_error": extra}
    diag.update(diagnostics or {})
    return InequalityReport(theorem, list(hyps), lv, rv, margin, float(tol), verdict, diag, list(claims))


def _combine(theorem, claims, hyps=(), diagnostics=None):
    """Report over several claims: violated if any claim is, failed if all are."""
    verdicts = [c.verdict for c in claims]
    if VIOLATED in verdicts:
        verdict = VIOLATED
    elif all(v == HYPOTHESIS_FAILED for v in verdicts) or not all(h.satisfied for h in hyps):
        verdict = HYPOTHESIS_FAILED
    else:
        verdict = HOLDS
    # the headline numbers are those of the tightest asserted claim
    live = [c for c in claims if c.verdict != HYPOTHESIS_FAILED] or list(claims)
    head = min(live, key=lambda c: c.margin + c.tol if math.isfinite(c.margin) else math.inf)
    return InequalityReport(theorem, list(hyps) + list(head.hypotheses), head.lhs, head.rhs,
                            head.margin, head.tol, verdict, dict(diagnostics or {}), list(claims))


# -- shared measurements -----------------------------------------------------------


def _ball_int(V: SampledVarifold, bs, values):
    values = np.broadcast_to(np.asarray(values, float), bs.weights.shape)
    val, err = bs.integrate(values)
    return val, err + V.quad_error * float(np.sum(bs.weights * np.abs(values)))


def _global_int(V: SampledVarifold, weights, values):
    values = np.broadcast_to(np.asarray(values, float), weights.shape)
    return float(np.sum(weights * values)), V.quad_error * float(np.sum(weights * np.abs(values)))


def h_normal_defect(V: SampledVarifold) -> float:
    """Largest tangential component of H relative to |H| over the atoms.

    |H| is floored at 1e-4 / area^(1/m) so that round-off on minimal
    surfaces does not read as a tangential defect.
    """
    a = V.atoms
    if len(a) == 0:
        return 0.0
    Hn = V.space.norm(a.H)
    floor = 1e-4 / max(float(a.weights.sum()), 1e-300) ** (1.0 / V.m)
    tang = np.sqrt(np.sum(V.space.inner(a.vectors, a.H[:, None, :]) ** 2, axis=-1))
    return float(np.max(tang / np.maximum(Hn, floor)))


def _h_normal_hyp(V):
    d = h_normal_defect(V)
    return Hypothesis("mean curvature normal to tangent planes", d <= H_NORMAL_TOL, d)


def support_radius(V: SampledVarifold, p) -> tuple[float, float]:
    """Largest distance from p to the atoms, and the mesh gap bounding the true value."""
    pts = V.atoms.points
    if V.has_boundary:
        pts = np.concatenate([pts, V.boundary.points])
    d = V.space.distance(np.asarray(p, float), pts)
    return float(d.max()), V.mesh_gap()


def _radial_unit(V, p, pts):
    return V.space.radial_unit(np.asarray(p, float), pts)


def _curvature_hyp(V, b):
    return Hypothesis("curvature bound b >= ambient curvature", b >= V.space.b, {"b": b, "K": V.space.b})


def _dim_hyp(V, m=2):
    return Hypothesis(f"varifold dimension is {m}", V.m == m, V.m)


def default_b_upper(V: SampledVarifold) -> float:
    """A positive sectional curvature bound for statements requiring b > 0."""
    return V.space.b if V.space.b > 0 else DEFAULT_B_UPPER


def theta_at(V: SampledVarifold, p, tol=HINT_TOL):
    """Density at p from multiplicity hints if any apply, else by extrapolation.

    Returns (theta, residual, source).
    """
    p = np.asarray(p, float)
    hits = [k for q, k in V.hints if float(V.space.distance(p, q)) <= tol]
    if hits:
        return float(sum(hits)), 0.0, "multiplicity-hint"
    est = V.density_estimate(p)
    return est.value, est.residual, "density-estimate"


# -- monotonicity --------------------------------------------------------------------


def _balls(V, p, r, closed, ball_kw):
    inner, outer = V.ball(p, r, closed=closed, **ball_kw)
    return inner, outer


def _grad_r(V, p, bs):
    g, _ = V.space.radial_unit(np.asarray(p, float), bs.points)
    return g


def _monotonicity_pos_variant(V, p, sigma, rho, b, closed, ball_kw, hyps):
    sp = V.space
    Hs, Hb = _balls(V, p, sigma, closed, ball_kw)
    Rs, Rb = _balls(V, p, rho, closed, ball_kw)
    lhs, rhs = _Side(), _Side()
    val, err = _ball_int(V, Hs, 1.0)
    lhs.add("mass_sigma/sigma^2", val / sigma**2, err / sigma**2)

    val, err = _ball_int(V, Rs, 1.0)
    rhs.add("mass_rho/rho^2", val / rho**2, err / rho**2)
    H2r = sp.norm(Rs.H) ** 2
    if closed:
        v, e = _ball_int(V, Rs, H2r)
        rhs.add("H^2/16 over closed rho-ball", v / 16.0, e / 16.0)
    else:
        v1, e1 = _ball_int(V, Rs, H2r)
        v2, e2 = _ball_int(V, Hs, sp.norm(Hs.H) ** 2)
        rhs.add("H^2/16 over annulus", (v1 - v2) / 16.0, (e1 + e2) / 16.0)
    cq = cmp.c_quad(b, Rs.dist) if b > 0 else np.zeros_like(Rs.dist)
    v, e = _ball_int(V, Rs, cq)
    rhs.add("(1 - a_b)/r^2", v, e)
    with np.errstate(divide="ignore"):
        if closed:
            v, e = _ball_int(V, Rb, 1.0 / Rb.dist)
            rhs.add("boundary 1/r", v, e)
        else:
            v, e = _ball_int(V, Rb, 0.5 / Rb.dist)
            rhs.add("boundary 1/(2r)", v, e)
            v, e = _ball_int(V, Rb, Rb.dist / (2.0 * rho**2))
            rhs.add("boundary r/(2 rho^2)", v, e)
    v, e = _ball_int(V, Hs, sp.norm(Hs.H) / (2.0 * sigma))
    rhs.add("|H|/(2 sigma) over sigma-ball", v, e)
    v, e = _ball_int(V, Rs, sp.norm(Rs.H) / (2.0 * rho))
    rhs.add("|H|/(2 rho) over rho-ball", v, e)
    diag = {"closed": closed, "ball_depth": max(Hs.depth, Rs.depth),
            "straddle_mass": Hs.straddle_mass + Rs.straddle_mass}
    return _finish("monotonicity_pos" + ("/closed" if closed else "/open"), hyps, lhs, rhs,
                   diagnostics=diag)


def check_monotonicity_pos(V: SampledVarifold, p, sigma, rho, b=None,
                           eps=BALL_EPS, max_depth=BALL_MAX_DEPTH) -> InequalityReport:
    """Density-ratio monotonicity for 2-varifolds under K <= b (b >= 0), open and closed balls."""
    b = default_b_upper(V) if b is None else float(b)
    hyps = [
        _dim_hyp(V),
        Hypothesis("b >= 0", b >= 0, b),
        _curvature_hyp(V, b),
        Hypothesis("0 < sigma < rho", 0 < sigma < rho, {"sigma": sigma, "rho": rho}),
        Hypothesis("rho below pi/sqrt(b)", b <= 0 or math.sqrt(b) * rho < math.pi, rho),
        Hypothesis("rho inside injectivity radius", rho < V.space.injectivity_radius, rho),
        _h_normal_hyp(V),
    ]
    if not all(h.satisfied for h in hyps[1:5]):
        return _failed("monotonicity_pos", hyps)
    kw = {"eps": eps, "max_depth": max_depth}
    claims = [_monotonicity_pos_variant(V, p, sigma, rho, b, closed, kw, hyps) for closed in (False, True)]
    return _combine("monotonicity_pos", claims, diagnostics={"sigma": sigma, "rho": rho, "b": b})


def _failed(theorem, hyps, diagnostics=None):
    nan = float("nan")
    return InequalityReport(theorem, list(hyps), nan, nan, nan, 0.0, HYPOTHESIS_FAILED,
                            dict(diagnostics or {}))


def _fubini_kernel(r, sigma, rho, m):
    """int_{max(r, sigma)}^{rho} t^(-m) dt for r <= rho."""
    lo = np.maximum(r, sigma)
    if m == 1:
        return np.log(rho / lo)
    return (lo ** (1 - m) - rho ** (1 - m)) / (m - 1)


def _smooth_kernel(r, sigma, rho, q, order=5):
    """int_r^rho t^-q dt for r >= sigma, continued below sigma by its Taylor
    polynomial of the given order at sigma."""
    r = np.asarray(r, float)
    out = _fubini_kernel(np.maximum(r, sigma), sigma, rho, q)
    below = r < sigma
    if below.any():
        h = r[below] - sigma
        acc = np.full(h.shape, float(_fubini_kernel(np.float64(sigma), sigma, rho, q)))
        # j-th derivative of the kernel is -(d/dr)^(j-1) r^-q
        fall, hp = 1.0, np.ones_like(h)
        for j in range(1, order + 1):
            hp = hp * h
            acc -= (fall * sigma ** (-q - j + 1) / math.factorial(j)) * hp
            fall *= -q - j + 1
        out = out.copy()
        out[below] = acc
    return out


def _kernel_int(V, inner, outer, f_in, f_out, sigma, rho, q):
    """int over the closed rho-ball of f(x) int_{max(r, sigma)}^rho t^-q dt.

    The kernel has a kink on the sigma-sphere; the integral is split as the
    rho-ball integral of a smooth continuation plus a sigma-ball correction,
    so both pieces have smooth integrands and refined sphere cuts.
    """
    k_sigma = float(_fubini_kernel(np.float64(sigma), sigma, rho, q))
    v1, e1 = _ball_int(V, outer, f_out * _smooth_kernel(outer.dist, sigma, rho, q))
    v2, e2 = _ball_int(V, inner, f_in * (k_sigma - _smooth_kernel(inner.dist, sigma, rho, q)))
    return v1 + v2, e1 + e2


def _one_minus_a(b, r, m):
    """1 - a(r) for a(r) = min over m-planes T of Div_T(r grad r) / m.

    For b > 0 the minimum is attained by planes orthogonal to grad r, giving
    a = r ct_b(r) <= 1. For b < 0 it is attained by planes containing grad r,
    giving a = (1 + (m - 1) r ct_b(r)) / m >= 1.
    """
    r = np.asarray(r, float)
    if b > 0:
        return r * cmp.c_lin(b, r)
    if b == 0:
        return np.zeros_like(r)
    x = math.sqrt(-b) * r
    return (m - 1) / m * b * r * r * cmp._coth_quotient(x)


def _one_minus_a_over_r(b, r, m):
    r = np.asarray(r, float)
    if b > 0:
        return cmp.c_lin(b, r)
    if b == 0:
        return np.zeros_like(r)
    return (m - 1) / m * b * r * cmp._coth_quotient(math.sqrt(-b) * r)


def check_monotonicity_m(V: SampledVarifold, p, sigma, rho, b=None, m=None,
                         eps=BALL_EPS, max_depth=BALL_MAX_DEPTH) -> InequalityReport:
    """Closed-ball monotonicity for m-varifolds with the sharp comparison a(r).

    The t-integral is exchanged with the ball integral, so that
    int_sigma^rho t^-m F(B_t) dt = int_{B_rho} K(r) dF with the exact kernel
    K(r) = int_{max(r, sigma)}^rho t^-m dt. The simplified bound with
    m sqrt(b) ||V|| B_t replacing the curvature integral is reported as a
    second claim when b > 0.
    """
    b = V.space.b if b is None else float(b)
    m = V.m if m is None else int(m)
    sp = V.space
    hyps = [
        Hypothesis("m matches the varifold", m == V.m, V.m),
        _curvature_hyp(V, b),
        Hypothesis("0 < sigma < rho", 0 < sigma < rho, {"sigma": sigma, "rho": rho}),
        Hypothesis("rho below pi/sqrt(b)", b <= 0 or math.sqrt(b) * rho < math.pi, rho),
        Hypothesis("rho inside injectivity radius", rho < sp.injectivity_radius, rho),
    ]
    if not all(h.satisfied for h in hyps[2:4]):
        return _failed("monotonicity_m", hyps)
    kw = {"eps": eps, "max_depth": max_depth}
    Ss, Sb = V.ball(p, sigma, closed=True, **kw)
    Rs, Rb = V.ball(p, rho, closed=True, **kw)
    Hs, Hr = sp.norm(Ss.H), sp.norm(Rs.H)

    def base():
        lhs, rhs = _Side(), _Side()
        v, e = _ball_int(V, Ss, 1.0)
        lhs.add("mass_sigma/sigma^m", v / sigma**m, e / sigma**m)
        v, e = _ball_int(V, Rs, 1.0)
        rhs.add("mass_rho/rho^m", v / rho**m, e / rho**m)
        v, e = _kernel_int(V, Ss, Rs, Hs, Hr, sigma, rho, m)
        rhs.add("t-integral of int |H|", v, e)
        v, e = _kernel_int(V, Sb, Rb, 1.0, 1.0, sigma, rho, m)
        rhs.add("t-integral of boundary mass", v, e)
        return lhs, rhs

    lhs, rhs = base()
    diag = {"ball_depth": max(Ss.depth, Rs.depth), "kernel": "exact Fubini"}
    v_r, e_r = _kernel_int(V, Ss, Rs, m * _one_minus_a_over_r(b, Ss.dist, m),
                           m * _one_minus_a_over_r(b, Rs.dist, m), sigma, rho, m)
    if b < 0:
        # here 1 - a < 0, and weighting it by 1/r instead of 1/t would claim
        # more than the first-variation argument gives; the 1/r form fails on
        # totally geodesic disks
        v, e = _kernel_int(V, Ss, Rs, m * _one_minus_a(b, Ss.dist, m),
                           m * _one_minus_a(b, Rs.dist, m), sigma, rho, m + 1)
        rhs.add("t-integral of m int (1 - a)/t", v, e)
        diag["margin_with_1/r_weight"] = rhs.value - v + v_r - lhs.value
    else:
        rhs.add("t-integral of m int (1 - a)/r", v_r, e_r)
    claims = [_finish("monotonicity_m", hyps, lhs, rhs, diagnostics=diag)]
    if b > 0:
        rem_hyp = Hypothesis("rho below pi/(2 sqrt(b)) for the simplified bound",
                             math.sqrt(b) * rho < math.pi / 2, rho)
        lhs2, rhs2 = base()
        v, e = _kernel_int(V, Ss, Rs, m * math.sqrt(b), m * math.sqrt(b), sigma, rho, m)
        rhs2.add("t-integral of m sqrt(b) mass", v, e)
        claims.append(_finish("monotonicity_m/simplified", hyps + [rem_hyp], lhs2, rhs2, diagnostics=diag))
    return _combine("monotonicity_m", claims, diagnostics={"sigma": sigma, "rho": rho, "b": b, "m": m})


def check_monotonicity_neg(V: SampledVarifold, p, sigma, rho, b=None,
                           eps=BALL_EPS, max_depth=BALL_MAX_DEPTH) -> InequalityReport:
    """phi-weighted closed-ball monotonicity for 2-varifolds under K <= b < 0."""
    b = V.space.b if b is None else float(b)
    sp = V.space
    hyps = [
        _dim_hyp(V),
        Hypothesis("b < 0", b < 0, b),
        _curvature_hyp(V, b),
        Hypothesis("0 < sigma < rho", 0 < sigma < rho, {"sigma": sigma, "rho": rho}),
        Hypothesis("phi argument admissible", sigma >= cmp.PHI_MIN_ARG, sigma),
        _h_normal_hyp(V),
    ]
    if not all(h.satisfied for h in hyps[1:5]):
        return _failed("monotonicity_neg", hyps)
    kw = {"eps": eps, "max_depth": max_depth}
    Ss, Sb = V.ball(p, sigma, closed=True, **kw)
    Rs, Rb = V.ball(p, rho, closed=True, **kw)
    # continuity radii: open and closed masses must agree
    jumps = {}
    for name, r, cl in (("sigma", sigma, Ss), ("rho", rho, Rs)):
        op, _ = V.ball(p, r, closed=False, **kw)
        jumps[name] = abs(cl.mass - op.mass)
    hyps.append(Hypothesis("sigma and rho are continuity radii",
                           all(j <= Ss.mass_error + Rs.mass_error for j in jumps.values()), jumps))

    phs, phr = cmp.phi(b, sigma), cmp.phi(b, rho)
    lhs, rhs = _Side(), _Side()
    v, e = _ball_int(V, Ss, cmp.c_b(b, Ss.dist))
    lhs.add("2 phi(sigma) int c_b", 2 * phs * v, 2 * phs * e)
    v1, e1 = _ball_int(V, Rs, 1.0)
    v2, e2 = _ball_int(V, Ss, 1.0)
    lhs.add("|b| annulus mass", -b * (v1 - v2), -b * (e1 + e2))

    v, e = _ball_int(V, Rs, cmp.c_b(b, Rs.dist))
    rhs.add("2 phi(rho) int c_b", 2 * phr * v, 2 * phr * e)
    v1, e1 = _ball_int(V, Rs, sp.norm(Rs.H) ** 2)
    v2, e2 = _ball_int(V, Ss, sp.norm(Ss.H) ** 2)
    rhs.add("H^2/4 over annulus", 0.25 * (v1 - v2), 0.25 * (e1 + e2))

    def sgH(bs):
        return cmp.s_b(b, bs.dist) * sp.inner(_grad_r(V, p, bs), bs.H)

    def sgeta(bs):
        return cmp.s_b(b, bs.dist) * sp.inner(_grad_r(V, p, bs), bs.vectors[:, 0, :])

    v, e = _ball_int(V, Ss, sgH(Ss))
    rhs.add("-phi(sigma) int s_b g(grad r, H)", -phs * v, phs * e)
    v, e = _ball_int(V, Rs, sgH(Rs))
    rhs.add("phi(rho) int s_b g(grad r, H)", phr * v, phr * e)
    v, e = _ball_int(V, Sb, sgeta(Sb))
    rhs.add("phi(sigma) boundary s_b g(grad r, eta)", phs * v, phs * e)
    v, e = _ball_int(V, Rb, sgeta(Rb))
    rhs.add("-phi(rho) boundary s_b g(grad r, eta)", -phr * v, phr * e)
    outside = Rb.dist > sigma
    vals = np.zeros_like(Rb.dist)
    if outside.any():
        gr = _grad_r(V, p, Rb)
        vals[outside] = cmp.phi_s_b(b, Rb.dist[outside]) * sp.inner(gr, Rb.vectors[:, 0, :])[outside]
    # the annulus boundary term is read off the rho-ball atoms beyond sigma
    v, e = _ball_int(V, Rb, vals)
    e += Sb.integrate(np.abs(cmp.phi_s_b(b, np.maximum(Sb.dist, sigma))))[1]
    rhs.add("annulus boundary phi s_b g(grad r, eta)", v, e)
    diag = {"sigma": sigma, "rho": rho, "b": b, "ball_depth": max(Ss.depth, Rs.depth)}
    return _finish("monotonicity_neg", hyps, lhs, rhs, diagnostics=diag)


def monotonicity_grid(rho_max, count=10):
    """The (sigma, rho) grid: sigma in the lower half of (0, rho_max), rho in the upper half."""
    s = rho_max * (np.arange(count) + 0.5) / (2 * count)
    r = rho_max * (count + np.arange(count) + 0.5) / (2 * count)
    return s, r


def default_rho_max(V: SampledVarifold, p, theorem: str, b=None) -> float:
    """Outer radius for monotonicity grids, kept inside every radius restriction."""
    sup, gap = support_radius(V, p)
    r = 1.05 * (sup + gap)
    if theorem in ("monotonicity_pos", "monotonicity_m"):
        bb = (default_b_upper(V) if theorem == "monotonicity_pos" else V.space.b) if b is None else b
        if bb > 0:
            r = min(r, 0.99 * math.pi / math.sqrt(bb))
    return min(r, 0.99 * V.space.injectivity_radius)


def default_radius(V: SampledVarifold, p, theorem: str):
    """Resolution-dependent default radius of a single-radius verifier, or None."""
    if p is None:
        p = V.metadata.get("center", V.atoms.points[0])
    sup, gap = support_radius(V, p)
    if theorem == "asymptotic_bound":
        return (sup + gap) * (1 + 1e-9)
    if theorem == "min_diameter":
        return sup + 2 * gap
    return None


# -- Li--Yau ---------------------------------------------------------------------------


def check_li_yau(V: SampledVarifold, p, b=None, C=None) -> InequalityReport:
    """4 pi Theta(p) <= W + b C ||V||(N) + int t_b(r) d||delta V||_sing."""
    sp = V.space
    b = sp.b if b is None else float(b)
    p = np.asarray(p, float)
    sup, gap = support_radius(V, p)
    hyps = [_dim_hyp(V), _curvature_hyp(V, b), _h_normal_hyp(V)]
    if b > 0:
        C = LI_YAU_C_POS if C is None else C
        hyps.append(Hypothesis("support within pi/(2 sqrt(b)) of p",
                               sup + gap < math.pi / (2 * math.sqrt(b)), sup + gap))
    else:
        C = 1.0 if C is None else C
    if V.has_boundary:
        dmin = float(sp.distance(p, V.boundary.points).min())
        hyps.append(Hypothesis("p outside the boundary support", dmin > V.mesh_gap(), dmin))
    hyps.append(Hypothesis("support inside injectivity radius", sup + gap < sp.injectivity_radius, sup + gap))
    try:
        theta, resid, source = theta_at(V, p)
    except ResolutionError as exc:
        hyps.append(Hypothesis("density computable at p", False, str(exc)))
        return _failed("li_yau", hyps)
    lhs, rhs = _Side(), _Side()
    lhs.add("4 pi Theta", 4 * math.pi * theta)
    a = V.atoms
    v, e = _global_int(V, a.weights, sp.norm(a.H) ** 2)
    rhs.add("Willmore", 0.25 * v, 0.25 * e)
    v, e = _global_int(V, a.weights, 1.0)
    rhs.add("b C area", b * C * v, abs(b * C) * e)
    if V.has_boundary:
        r = sp.distance(p, V.boundary.points)
        v, e = _global_int(V, V.boundary.weights, cmp.t_b(b, r))
        rhs.add("boundary t_b(r)", v, e)
    area = float(a.weights.sum())
    diag = {"theta": theta, "theta_source": source, "density_residual": resid, "C": C, "b": b,
            "margin_C1": rhs.value - b * C * area + b * area - lhs.value}
    return _finish("li_yau", hyps, lhs, rhs, extra=4 * math.pi * resid, diagnostics=diag)


# -- diameter statements ----------------------------------------------------------------


def _density_spot_check(V, count=2, seed=0):
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(V.atoms), size=min(count, len(V.atoms)), replace=False)
    vals = []
    for i in idx:
        est = V.density_estimate(V.atoms.points[i])
        vals.append(est.value + est.residual)
    return min(vals)


def check_diameter_pinching(V: SampledVarifold, i=None, b=None, density_checks=2) -> InequalityReport:
    """Willmore lower bound and two-sided extrinsic diameter bounds for small area."""
    sp = V.space
    i = sp.injectivity_radius if i is None else float(i)
    b = max(sp.b, 0.0) if b is None else float(b)
    a = V.atoms
    A, eA = _global_int(V, a.weights, 1.0)
    W, eW = _global_int(V, a.weights, sp.norm(a.H) ** 2)
    diam = V.extrinsic_diameter()
    d, dgap = diam.value, diam.gap
    gate = cmp.area_bound_C(i, b) if b >= 0 else math.nan
    base = [
        _dim_hyp(V),
        Hypothesis("b >= 0", b >= 0, b),
        _curvature_hyp(V, b),
        Hypothesis("area below C(i, b)", A <= gate, {"area": A, "C": gate}),
        _h_normal_hyp(V),
        Hypothesis("first variation absolutely continuous (no boundary)", not V.has_boundary,
                   len(V.boundary)),
        Hypothesis("support connected", bool(V.metadata.get("connected", False)),
                   V.metadata.get("connected")),
    ]
    if density_checks:
        try:
            th = _density_spot_check(V, density_checks)
            base.append(Hypothesis("upper density >= 1 at sampled atoms", th >= 1 - 0.02, th))
        except ResolutionError as exc:
            base.append(Hypothesis("upper density >= 1 at sampled atoms", False, str(exc)))

    l1, r1 = _Side().add("pi", math.pi), _Side().add("int |H|^2", W, eW)
    c1 = _finish("diameter_pinching/willmore", base, l1, r1)

    sA, sW = math.sqrt(A), math.sqrt(W)
    bound = 2 * sA * (sW + b * A)
    ebound = 2 * sA * (0.5 * eW / max(sW, 1e-300) + b * eA) + (sW + 2 * b * A) * eA / max(sA, 1e-300)
    l2, r2 = _Side().add("d_ext", d), _Side().add("2 sqrt(A)(sqrt(W) + b A)", bound, ebound)
    c2 = _finish("diameter_pinching/upper", base, l2, r2, extra=dgap, diagnostics={"mesh_gap": dgap})

    lim = min(i, math.pi / (3 * math.sqrt(b)) if b > 0 else math.inf)
    h3 = Hypothesis("d_ext below min{i, pi/(3 sqrt(b))}", d + dgap < lim, {"d_ext": d, "limit": lim})
    ratio = math.sqrt(A / W) if W > 0 else math.inf
    eratio = 0.5 * ratio * (eA / A + eW / W) if W > 0 else 0.0
    l3, r3 = _Side().add("sqrt(A/W)", ratio, eratio), _Side().add("d_ext", d)
    c3 = _finish("diameter_pinching/lower", base + [h3], l3, r3, diagnostics={"mesh_gap": dgap})
    return _combine("diameter_pinching", [c1, c2, c3],
                    diagnostics={"area": A, "W": W, "d_ext": d, "d_ext_gap": dgap, "i": i, "b": b})


def check_min_diameter(V: SampledVarifold, p=None, b=None, i_p=None, rho=None) -> InequalityReport:
    """Lower bound m int a_b(r) <= rho ||delta V||, and its consequence for closed minimal surfaces.

    ``rho`` defaults to the sampled support radius plus twice the mesh gap."""
    sp = V.space
    b = sp.b if b is None else float(b)
    i_p = sp.injectivity_radius if i_p is None else float(i_p)
    if p is None:
        p = V.metadata.get("center", V.atoms.points[0])
    p = np.asarray(p, float)
    sup, gap = support_radius(V, p)
    rho = sup + 2 * gap if rho is None else float(rho)
    lim = min(i_p, math.pi / (2 * math.sqrt(b))) if b > 0 else math.nan
    hyps = [Hypothesis("b > 0", b > 0, b), _curvature_hyp(V, b)]
    ok = b > 0 and sup < rho < lim
    lemma_h = hyps + [Hypothesis("support inside B_rho(p) with rho < min{i_p, pi/(2 sqrt b)}",
                                 ok, {"support": sup, "rho": rho, "limit": lim})]
    if ok:
        a = V.atoms
        r = sp.distance(p, a.points)
        lhs, rhs = _Side(), _Side()
        v, e = _global_int(V, a.weights, cmp.a_b(b, r))
        lhs.add("m int a_b(r)", V.m * v, V.m * e)
        tv, etv = _global_int(V, a.weights, sp.norm(a.H))
        if V.has_boundary:
            bv, be = _global_int(V, V.boundary.weights, 1.0)
            tv, etv = tv + bv, etv + be
        rhs.add("rho ||delta V||", rho * tv, rho * etv)
        lemma = _finish("min_diameter/lemma", lemma_h, lhs, rhs, diagnostics={"rho": rho})
    else:
        lemma = _failed("min_diameter/lemma", lemma_h, {"rho": rho})

    minimal = bool(V.metadata.get("minimal", False)) and bool(V.metadata.get("closed", False))
    th_h = hyps + [
        Hypothesis("closed minimal input", minimal and not V.has_boundary,
                   {"minimal": V.metadata.get("minimal"), "closed": V.metadata.get("closed")}),
        _h_normal_hyp(V),
    ]
    if b > 0:
        diam = V.extrinsic_diameter()
        lhs, rhs = _Side().add("min{i_p, pi/(2 sqrt b)}", lim), _Side().add("d_ext", diam.value)
        theorem = _finish("min_diameter/theorem", th_h, lhs, rhs, extra=diam.gap,
                          diagnostics={"d_ext": diam.value, "d_ext_gap": diam.gap})
    else:
        theorem = _failed("min_diameter/theorem", th_h)
    return _combine("min_diameter", [lemma, theorem], diagnostics={"b": b, "i_p": i_p})


def check_asymptotic_bound(V: SampledVarifold, p=None, rho=None, b=DEFAULT_B_UPPER, m=None) -> InequalityReport:
    """||V||(N) <= 2 rho ||delta V||(N) / (m (1 + sqrt(1 - 4b))) in flat ambient space."""
    sp = V.space
    m = V.m if m is None else int(m)
    if p is None:
        p = V.metadata.get("center", V.atoms.points[0])
    p = np.asarray(p, float)
    sup, gap = support_radius(V, p)
    if rho is None:
        rho = (sup + gap) * (1 + 1e-9)
    hyps = [
        Hypothesis("0 < b <= 1/4", 0 < b <= 0.25, b),
        Hypothesis("flat ambient space", sp.b == 0, sp.b),
        Hypothesis("m matches the varifold", m == V.m, V.m),
        # gated on the sampled support (boundary samples lie exactly on the edge);
        # the mesh gap is reported alongside
        Hypothesis("support inside B_rho(p)", sup < rho, {"support": sup, "gap": gap, "rho": rho}),
    ]
    if not hyps[0].satisfied:
        return _failed("asymptotic_bound", hyps)
    a = V.atoms
    lhs, rhs = _Side(), _Side()
    A, eA = _global_int(V, a.weights, 1.0)
    lhs.add("area", A, eA)
    tv, etv = _global_int(V, a.weights, sp.norm(a.H))
    if V.has_boundary:
        bv, be = _global_int(V, V.boundary.weights, 1.0)
        tv, etv = tv + bv, etv + be
    k = 2 * rho / (m * (1 + math.sqrt(1 - 4 * b)))
    rhs.add("2 rho ||delta V|| / (m (1 + sqrt(1 - 4b)))", k * tv, k * etv)
    return _finish("asymptotic_bound", hyps, lhs, rhs, diagnostics={"rho": rho, "b": b})


# -- Sobolev and isoperimetric ----------------------------------------------------------------


class TestFunction:
    """A C^1 function h on the model space: ``h(points) -> (values, gradients)``."""

    superlevel_ball = None  # (center, radius) when {h >= 1} is a closed ball
    smooth = False  # smooth integrands trust the spectral error model

    def __call__(self, points):
        raise NotImplementedError


class ConstantOne(TestFunction):
    """h = 1, the limit of bumps increasing to the constant function."""

    smooth = True

    def __call__(self, points):
        pts = np.asarray(points, float)
        return np.ones(pts.shape[:-1]), np.zeros_like(pts)


class RadialBump(TestFunction):
    """h = 1 on B_{R/2}(c), smoothstep down to 0 at distance R, zero beyond."""

    def __init__(self, space, center, radius):
        self.space = space
        self.center = np.asarray(center, float)
        self.radius = float(radius)
        self.superlevel_ball = (self.center, 0.5 * self.radius)

    def __call__(self, points):
        pts = np.asarray(points, float)
        grad, d = self.space.radial_unit(self.center, pts)
        s = d / self.radius
        tau = np.clip(2.0 * s - 1.0, 0.0, 1.0)
        h = 1.0 - 3.0 * tau**2 + 2.0 * tau**3
        dh = (-6.0 * tau + 6.0 * tau**2) * 2.0 / self.radius
        return h, dh[..., None] * grad


def _two_rule_int(V: SampledVarifold, kind, fn):
    """Global-rule integral of fn(points, vectors, H) over atoms or boundary atoms.

    The error adds the gap to the per-cell three-point Gauss sub-rule, which
    sees kinks of fn that the spectral error model assumes away.
    """
    atoms = V.atoms if kind == "atoms" else V.boundary
    if len(atoms) == 0:
        return 0.0, 0.0
    v, e = _global_int(V, atoms.weights, fn(atoms.points, atoms.vectors, atoms.H))
    lp, lv, lw, lH, le = (x.reshape((-1,) + x.shape[2:]) for x in V._local(kind))
    vals = np.asarray(fn(lp, lv, lH), float)
    fine = float(np.sum(lw * vals))
    return v, e + abs(v - fine) + float(np.sum(le * np.abs(vals)))


def check_sobolev(V: SampledVarifold, h: Optional[TestFunction] = None, b=None, i=None,
                  eps=BALL_EPS, max_depth=BALL_MAX_DEPTH) -> InequalityReport:
    """Sobolev inequality for a test function 0 <= h <= 1 with atom density 1."""
    sp = V.space
    h = ConstantOne() if h is None else h
    b = default_b_upper(V) if b is None else float(b)
    i = sp.injectivity_radius if i is None else float(i)
    m = V.m
    alpha = cmp.unit_ball_volume(m)
    a = V.atoms
    A = float(a.weights.sum())
    diam = V.extrinsic_diameter()
    small = min(diam.value + diam.gap, (2 ** (m + 1) * A / alpha) ** (1.0 / m))
    lim = min(i, math.pi / (2 * math.sqrt(b)) if b > 0 else math.nan)
    hv, hg = h(a.points)
    hyps = [
        Hypothesis("b > 0", b > 0, b),
        _curvature_hyp(V, b),
        Hypothesis("small support", b > 0 and small < lim, {"measured": small, "limit": lim}),
        Hypothesis("0 <= h <= 1 on the support", bool(np.all(hv >= 0) and np.all(hv <= 1)),
                   [float(hv.min()), float(hv.max())] if len(hv) else None),
    ]
    if b <= 0:
        return _failed("sobolev", hyps)
    lhs, rhs = _Side(), _Side()
    theta = float(V.metadata.get("atom_density", 1.0))
    if h.superlevel_ball is not None and theta == 1.0:
        c, r = h.superlevel_ball
        bs, _ = V.ball(c, r, closed=True, eps=eps, max_depth=max_depth)
        v, e = _ball_int(V, bs, h(bs.points)[0])
        lhs.add("int over {h Theta >= 1} of h", v, e)
    else:
        sel = hv * theta >= 1.0
        v, e = _global_int(V, a.weights[sel], hv[sel])
        lhs.add("int over {h Theta >= 1} of h", v, e)
    def tang(pts, vecs, H):
        g = h(pts)[1]
        return np.sqrt(np.sum(sp.inner(vecs, g[:, None, :]) ** 2, axis=-1))

    if h.smooth:
        Ih, eIh = _global_int(V, a.weights, hv)
        dv, edv = _global_int(V, a.weights, hv * sp.norm(a.H))
        gv, egv = _global_int(V, a.weights, tang(a.points, a.vectors, a.H))
        if V.has_boundary:
            bv, be = _global_int(V, V.boundary.weights, h(V.boundary.points)[0])
            dv, edv = dv + bv, edv + be
    else:
        Ih, eIh = _two_rule_int(V, "atoms", lambda x, T, H: h(x)[0])
        dv, edv = _two_rule_int(V, "atoms", lambda x, T, H: h(x)[0] * sp.norm(H))
        gv, egv = _two_rule_int(V, "atoms", tang)
        bv, be = _two_rule_int(V, "boundary", lambda x, T, H: h(x)[0])
        dv, edv = dv + bv, edv + be
    Cm = cmp.sobolev_constant(m)
    inner = dv + m * math.sqrt(b) * Ih + gv
    einner = edv + m * math.sqrt(b) * eIh + egv
    pre = Cm * max(Ih, 0.0) ** (1.0 / m)
    epre = Cm * (1.0 / m) * max(Ih, 1e-300) ** (1.0 / m - 1) * eIh
    rhs.add("C(m) (int h)^(1/m) (int h d||dV|| + m sqrt(b) int h + int |grad^T h|)",
            pre * inner, pre * einner + epre * inner)
    diag = {"b": b, "C(m)": Cm, "int_h": Ih, "int_h_dV": dv, "int_grad_h": gv,
            "test_function": type(h).__name__}
    return _finish("sobolev", hyps, lhs, rhs, diagnostics=diag)


def check_isoperimetric(V: SampledVarifold, b=None) -> InequalityReport:
    """||V||(N)^((m-1)/m) <= 2 C(m) ||delta V||(N) under the small-volume gate."""
    sp = V.space
    b = default_b_upper(V) if b is None else float(b)
    m = V.m
    a = V.atoms
    A, eA = _global_int(V, a.weights, 1.0)
    Cm = cmp.sobolev_constant(m)
    gate = 2 * Cm * m * math.sqrt(max(b, 0.0)) * A ** (1.0 / m)
    theta = float(V.metadata.get("atom_density", 1.0))
    hyps = [
        Hypothesis("b > 0", b > 0, b),
        _curvature_hyp(V, b),
        Hypothesis("small volume 2 C(m) m sqrt(b) ||V||^(1/m) <= 1", gate <= 1, gate),
        Hypothesis("density >= 1 almost everywhere", theta >= 1, theta),
    ]
    tv, etv = _global_int(V, a.weights, sp.norm(a.H))
    if V.has_boundary:
        bv, be = _global_int(V, V.boundary.weights, 1.0)
        tv, etv = tv + bv, etv + be
    e = (m - 1) / m
    lhs = _Side().add("area^((m-1)/m)", A**e, e * A ** (e - 1) * eA if A > 0 else 0.0)
    rhs = _Side().add("2 C(m) ||delta V||", 2 * Cm * tv, 2 * Cm * etv)
    return _finish("isoperimetric", hyps, lhs, rhs, diagnostics={"b": b, "C(m)": Cm, "gate": gate})


# -- good radius -------------------------------------------------------------------------------


def _power_integral(t0, t1, k):
    """int_{t0}^{t1} t^k dt, elementwise."""
    if k == -1:
        return np.log(t1 / t0)
    return (t1 ** (k + 1) - t0 ** (k + 1)) / (k + 1)


def _cumulative_weighted(t, g, m):
    """I[k] = int_{t[0]}^{t[k]} t^-m g(t) dt with g piecewise linear between samples."""
    t0, t1 = t[:-1], t[1:]
    slope = (g[1:] - g[:-1]) / (t1 - t0)
    icpt = g[:-1] - slope * t0
    seg = icpt * _power_integral(t0, t1, -m) + slope * _power_integral(t0, t1, 1 - m)
    return np.concatenate([[0.0], np.cumsum(seg)])


def find_good_radius(t: Sequence[float], f: Sequence[float], g: Sequence[float], m: int,
                     f_limit=None, rel_slack=1e-9, limsup_tol=1e-3, limsup_points=3,
                     f_err=None, g_err=None) -> InequalityReport:
    """Search the grid for rho <= rho0 with f(5 rho) < (5^m / 2) rho0 g(rho).

    ``f`` and ``g`` are samples on the increasing grid ``t``. ``f_limit`` is
    lim f at infinity (defaults to the last sample). The hypotheses are checked
    on the grid; f(5 rho) is bounded above by f at the next grid point at or
    beyond 5 rho (or by ``f_limit`` past the grid), so a returned witness is
    valid for the underlying function. Optional ``f_err`` and ``g_err`` are
    per-sample error bounds carried into the report tolerance.
    """
    t = np.asarray(t, float)
    f = np.asarray(f, float)
    g = np.asarray(g, float)
    fe = np.zeros_like(f) if f_err is None else np.broadcast_to(np.asarray(f_err, float), f.shape)
    ge = np.zeros_like(g) if g_err is None else np.broadcast_to(np.asarray(g_err, float), g.shape)
    if t.ndim != 1 or len(t) < 2 or f.shape != t.shape or g.shape != t.shape:
        raise ValueError("t, f, g must be one-dimensional samples of equal length >= 2")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
        raise ValueError("samples must be finite")
    if np.any(np.diff(t) <= 0) or t[0] <= 0:
        raise ValueError("grid must be positive and strictly increasing")
    f_inf = float(f[-1] if f_limit is None else f_limit)
    rho0 = (2 ** (m + 1) * f_inf) ** (1.0 / m)
    scale = max(float(np.max(np.abs(f))), 1e-300)
    hyps = [Hypothesis("f nondecreasing", bool(np.all(np.diff(f) >= -rel_slack * scale)),
                       float(np.min(np.diff(f))))]
    k = min(limsup_points, len(t))
    ls = float(np.max(f[:k] / t[:k] ** m))
    hyps.append(Hypothesis("limsup f(t)/t^m >= 1 near zero", ls >= 1 - limsup_tol, ls))
    inside = t <= rho0 * (1 + 1e-12)
    ti, fi, gi = t[inside], f[inside], g[inside]
    if len(ti) >= 2:
        I = _cumulative_weighted(ti, gi, m)
        ratio = fi / ti**m
        # viol[s, r] = f(s)/s^m - f(r)/r^m - int_s^r t^-m g, for s < r
        viol = ratio[:, None] - ratio[None, :] - (I[None, :] - I[:, None])
        upper = np.triu(np.ones_like(viol, dtype=bool), 1)
        worst = float(np.max(viol[upper])) if upper.any() else -math.inf
        bound = rel_slack * max(float(np.max(np.abs(ratio))), 1.0) + 1e-12 * float(np.max(np.abs(I)))
        hyps.append(Hypothesis("monotonicity hypothesis on the grid", worst <= bound, worst))
    else:
        hyps.append(Hypothesis("monotonicity hypothesis on the grid", False, "fewer than two grid points below rho0"))

    best = None
    for j in np.flatnonzero(inside):
        rho = t[j]
        nxt = np.flatnonzero(t >= 5 * rho * (1 - 1e-15))
        f5 = float(f[nxt[0]]) if len(nxt) else f_inf
        e5 = float(fe[nxt[0]]) if len(nxt) else float(fe[-1])
        bound = 0.5 * 5**m * rho0 * g[j]
        gap = bound - f5
        if best is None or gap > best[3]:
            best = (float(rho), f5, float(bound), gap, e5, float(0.5 * 5**m * rho0 * ge[j]))
        if gap > 0:
            break
    diag = {"rho0": rho0, "f_limit": f_inf, "grid_points": int(len(t))}
    if best is None:
        hyps.append(Hypothesis("grid reaches below rho0", False, float(t[0])))
        return _failed("good_radius", hyps, diag)
    rho, f5, bound, gap, e5, eb = best
    diag["witness"] = rho if gap > 0 else None
    lhs, rhs = _Side().add("f(5 rho)", f5, e5), _Side().add("(5^m / 2) rho0 g(rho)", bound, eb)
    rep = _finish("good_radius", hyps, lhs, rhs, diagnostics=diag)
    if rep.verdict == HOLDS and not gap > 0:
        # a witness must satisfy the strict inequality
        rep.verdict = VIOLATED
    return rep


def ball_mass_profile(V: SampledVarifold, p, radii, b=None, eps=BALL_EPS, max_depth=BALL_MAX_DEPTH,
                      return_errors=False):
    """Sobolev-proof data on closed balls: f = ||V|| B_t / alpha(m) and
    g = (||delta V|| B_t + m sqrt(b) ||V|| B_t) / alpha(m).

    With ``return_errors`` the quadrature error bounds of f and g follow."""
    b = default_b_upper(V) if b is None else float(b)
    alpha = cmp.unit_ball_volume(V.m)
    f, g, fe, ge = [], [], [], []
    for r in radii:
        inner, outer = V.ball(p, float(r), closed=True, eps=eps, max_depth=max_depth)
        mass, emass = _ball_int(V, inner, 1.0)
        hv, ehv = _ball_int(V, inner, V.space.norm(inner.H))
        bv, ebv = _ball_int(V, outer, 1.0)
        f.append(mass / alpha)
        g.append((hv + bv + V.m * math.sqrt(b) * mass) / alpha)
        fe.append(emass / alpha)
        ge.append((ehv + ebv + V.m * math.sqrt(b) * emass) / alpha)
    if return_errors:
        return np.array(f), np.array(g), np.array(fe), np.array(ge)
    return np.array(f), np.array(g)


def sobolev_good_radius(V: SampledVarifold, p, b=None, count=40, eps=BALL_EPS,
                        max_depth=BALL_MAX_DEPTH) -> InequalityReport:
    """Run the good-radius search on closed-ball data of V about p."""
    b = default_b_upper(V) if b is None else float(b)
    alpha = cmp.unit_ball_volume(V.m)
    A = V.area()
    rho0 = (2 ** (V.m + 1) * A / alpha) ** (1.0 / V.m)
    sup, gap = support_radius(V, p)
    hi = max(5 * rho0, sup + gap) * 1.01
    spacing = V.mesh_gap()
    lo = max(4 * spacing / 2**max_depth, 1e-3 * rho0)
    radii = np.unique(np.concatenate([np.geomspace(lo, rho0, count), [sup + gap + 1e-9, hi]]))
    radii = radii[radii < V.space.injectivity_radius]
    f, g, fe, ge = ball_mass_profile(V, p, radii, b, eps, max_depth, return_errors=True)
    rep = find_good_radius(radii, f, g, V.m, f_limit=A / alpha, limsup_tol=1e-3, f_err=fe, g_err=ge)
    rep.diagnostics["b"] = b
    return rep


# -- grids and dispatch --------------------------------------------------------------------------

_MONOTONICITY = {
    "monotonicity_pos": check_monotonicity_pos,
    "monotonicity_m": check_monotonicity_m,
    "monotonicity_neg": check_monotonicity_neg,
}


def monotonicity_suite(theorem: str, V: SampledVarifold, p, rho_max=None, count=10, b=None,
                       **ball_kw) -> InequalityReport:
    """Run a monotonicity verifier on the count x count (sigma, rho) grid.

    The returned report carries the tightest pair as its headline numbers and
    a per-verdict count in its diagnostics; its verdict is violated if any pair
    is, and hypothesis-failed only if every pair is.
    """
    check = _MONOTONICITY[theorem]
    if rho_max is None:
        rho_max = default_rho_max(V, p, theorem, b)
    sig, rho = monotonicity_grid(rho_max, count)
    reports = []
    for s in sig:
        for r in rho:
            kw = dict(ball_kw)
            if b is not None:
                kw["b"] = b
            reports.append(check(V, p, float(s), float(r), **kw))
    counts = {v: sum(r.verdict == v for r in reports) for v in (HOLDS, VIOLATED, HYPOTHESIS_FAILED)}
    out = _combine(theorem, reports, diagnostics={"grid": count, "rho_max": rho_max, "counts": counts})
    head = min(reports, key=lambda c: (c.verdict == HYPOTHESIS_FAILED,
                                       c.margin + c.tol if math.isfinite(c.margin) else math.inf))
    out.diagnostics["tightest"] = {"sigma": head.diagnostics.get("sigma"), "rho": head.diagnostics.get("rho")}
    out.diagnostics["max_error"] = max((r.tol for r in reports if math.isfinite(r.tol)), default=0.0)
    out.claims = []  # keep bundles compact; counts summarise the grid
    return out
