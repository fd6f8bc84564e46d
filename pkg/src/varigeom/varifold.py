"""Finite weighted point-plane measures and the queries built on them.

A :class:`SampledVarifold` stores interior atoms (point, tangent frame, weight,
mean curvature vector) and boundary atoms (point, outward conormal, line
weight) as parallel numpy arrays. When the atoms come from an immersion each
one also remembers its parameter cell, so ball queries can subdivide cells
that straddle the sphere ``d(p, .) = r``.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import comparison
from .immersion import ParametricImmersion, QuadratureSpec, _cell_offsets
from .model_space import GeometryError, Isometry, ModelSpace

BALL_EPS = 1e-4
BALL_MAX_DEPTH = 8
# the first level change can be accidentally small, so at least two are taken
BALL_MIN_DEPTH = 2
DEGENERATE_DENSITY = 1e-10
CELL_SAFETY = 1.25


class ResolutionError(ValueError):
    """Requested radii are below what the sampling can resolve."""


class NonFiniteIntegrandError(ValueError):
    pass


# -- cell samplers ----------------------------------------------------------


class _SurfaceSampler:
    def __init__(self, imm: ParametricImmersion):
        self.imm = imm
        self.k = imm.k

    def points(self, u):
        return self.imm.point(u)

    def density(self, u):
        return self.nodes(u)[1]

    def nodes(self, u):
        """Points and area density from first derivatives only."""
        f, df = self.imm.first_derivatives(u)
        G = self.imm._gram(df)
        return f, np.sqrt(np.abs(np.linalg.det(G)))

    def evaluate(self, u):
        f, frame, jac, H = self.imm.geometry(u)
        return {"points": f, "frames": frame, "density": jac, "H": H}


class _EdgeSampler:
    k = 1

    def __init__(self, imm: ParametricImmersion, edge):
        self.imm = imm
        self.edge = tuple(edge)

    def _full(self, t):
        axis, side = self.edge
        t = np.asarray(t, float)[..., 0]
        u = np.empty(t.shape + (2,))
        u[..., 1 - axis] = t
        u[..., axis] = (self.imm.domain.lower, self.imm.domain.upper)[side][axis]
        return u

    def points(self, t):
        return self.imm.point(self._full(t))

    def density(self, t):
        return self.evaluate(t)["density"]

    def nodes(self, t):
        g = self.evaluate(t)
        return g["points"], g["density"]

    def evaluate(self, t):
        f, nu, speed = self.imm.boundary_geometry(self.edge, np.asarray(t, float)[..., 0])
        return {"points": f, "conormal": nu, "density": speed}


class _Transformed:
    def __init__(self, base, iso: Isometry):
        self.base = base
        self.iso = iso
        self.k = base.k

    def points(self, u):
        return self.iso(self.base.points(u))

    def density(self, u):
        return self.base.density(u)

    def nodes(self, u):
        f, rho = self.base.nodes(u)
        return self.iso(f), rho

    def evaluate(self, u):
        out = dict(self.base.evaluate(u))
        out["points"] = self.iso(out["points"])
        for key in ("frames", "H", "conormal"):
            if key in out:
                out[key] = self.iso.push(out[key])
        return out


def _cell_probes(space, sampler, lo, hi, centers):
    """Images of cell corners and edge midpoints, and a bound on the cell's extent.

    The radius bounds the distance from the centre image to the rest of the cell.
    """
    k = lo.shape[-1]
    offs = _cell_offsets(k)
    if len(lo) == 0:
        return np.zeros(0), np.zeros((0, len(offs), space.dim))
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    pts = sampler.points(mid[:, None, :] + offs[None, :, :] * half[:, None, :])
    d = space.distance(centers[:, None, :], pts)
    return CELL_SAFETY * d.max(axis=1), pts


# -- data model ---------------------------------------------------------------


@dataclass
class AtomSet:
    """Parallel arrays for one family of atoms.

    ``vectors`` holds the tangent frame (N, m, D) for interior atoms and the
    conormal (N, 1, D) for boundary atoms. ``H`` is zero for boundary atoms.
    """

    points: np.ndarray
    vectors: np.ndarray
    weights: np.ndarray
    H: np.ndarray
    density: np.ndarray
    radius: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    source: np.ndarray
    probes: np.ndarray  # (N, 3^k - 1, D) cell corner / edge-midpoint images

    def __len__(self):
        return len(self.weights)

    @classmethod
    def empty(cls, D, m, k=1):
        return cls(
            np.zeros((0, D)), np.zeros((0, m, D)), np.zeros(0), np.zeros((0, D)),
            np.zeros(0), np.zeros(0), np.zeros((0, k)), np.zeros((0, k)), np.zeros(0, int),
            np.zeros((0, 3**k - 1, D)),
        )

    def take(self, idx):
        return AtomSet(*(getattr(self, f)[idx] for f in self.__dataclass_fields__))

    @staticmethod
    def concat(sets, offsets):
        sets = [s for s in sets]
        k = max(s.lo.shape[1] for s in sets)

        def pad(a):
            if a.shape[1] == k:
                return a
            return np.concatenate([a, np.zeros((len(a), k - a.shape[1]))], axis=1)

        return AtomSet(
            np.concatenate([s.points for s in sets]),
            np.concatenate([s.vectors for s in sets]),
            np.concatenate([s.weights for s in sets]),
            np.concatenate([s.H for s in sets]),
            np.concatenate([s.density for s in sets]),
            np.concatenate([s.radius for s in sets]),
            np.concatenate([pad(s.lo) for s in sets]),
            np.concatenate([pad(s.hi) for s in sets]),
            np.concatenate([s.source + o for s, o in zip(sets, offsets)]),
            np.concatenate([s.probes for s in sets]),
        )


@dataclass
class BallSample:
    """Atoms of a ball after adaptive refinement of straddling cells.

    ``err`` is a per-atom weight whose sum against ``|integrand|`` bounds the
    indicator-function quadrature error. Cells cut by the sphere also carry an
    embedded coarse rule: atoms sharing a ``group`` id (>= 0) are integrated
    once with ``weights`` and once with ``alt``, and the gap between the two
    is added to the error of every integrand.
    """

    points: np.ndarray
    vectors: np.ndarray
    weights: np.ndarray
    H: np.ndarray
    dist: np.ndarray
    err: np.ndarray
    alt: Optional[np.ndarray] = None
    group: Optional[np.ndarray] = None
    straddle_mass: float = 0.0
    depth: int = 0

    def _embedded_gap(self, values):
        if self.group is None or not np.any(self.group >= 0):
            return 0.0
        sel = self.group >= 0
        gap = np.bincount(self.group[sel], weights=((self.weights - self.alt) * values)[sel])
        return float(np.abs(gap).sum())

    def integrate(self, values):
        values = np.broadcast_to(np.asarray(values, float), self.weights.shape)
        err = float(np.sum(self.err * np.abs(values))) + self._embedded_gap(values)
        return float(np.sum(self.weights * values)), err

    @property
    def mass(self):
        return float(self.weights.sum())

    @property
    def mass_error(self):
        return float(self.err.sum()) + self._embedded_gap(np.ones_like(self.weights))


@dataclass
class DensityEstimate:
    value: float
    radii: np.ndarray
    ratios: np.ndarray
    residual: float
    coefficients: np.ndarray


@dataclass
class DiameterEstimate:
    value: float
    gap: float
    pair: tuple


class SampledVarifold:
    """Atoms approximating V, ||V|| and the singular part of ||delta V||."""

    def __init__(self, space: ModelSpace, m: int, atoms: AtomSet, boundary: AtomSet,
                 sources=(), bsources=(), provenance: Optional[dict] = None,
                 hints=(), metadata: Optional[dict] = None):
        self.space = space
        self.m = int(m)
        keep = atoms.weights > 0
        dropped = int((~keep).sum())
        self.atoms = atoms.take(keep) if dropped else atoms
        bkeep = boundary.weights > 0
        self.boundary = boundary.take(bkeep) if (~bkeep).any() else boundary
        self.sources = list(sources)
        self.bsources = list(bsources)
        self.provenance = dict(provenance or {})
        self.provenance["dropped_atoms"] = self.provenance.get("dropped_atoms", 0) + dropped
        self.hints = [(np.asarray(p, float), int(k)) for p, k in hints]
        self.metadata = dict(metadata or {})
        self._cache = {}
        for name in ("points", "vectors", "weights", "H"):
            if not np.all(np.isfinite(getattr(self.atoms, name))):
                bad = int(np.argwhere(~np.isfinite(getattr(self.atoms, name)))[0][0])
                raise GeometryError(f"non-finite {name} at atom {bad}")

    # -- construction -------------------------------------------------------

    @classmethod
    def from_immersion(cls, imm: ParametricImmersion, spec: QuadratureSpec, estimate_error=True):
        space = imm.space
        rules = imm.rule(spec)
        grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
        nodes = np.stack(grids, axis=-1).reshape(-1, imm.k)
        w = rules[0][1]
        for r in rules[1:]:
            w = np.multiply.outer(w, r[1])
        w = w.reshape(-1)
        lo = np.stack(np.meshgrid(*[r[2][:-1] for r in rules], indexing="ij"), -1).reshape(-1, imm.k)
        hi = np.stack(np.meshgrid(*[r[2][1:] for r in rules], indexing="ij"), -1).reshape(-1, imm.k)
        pts = imm.point(nodes)
        if not np.all(np.isfinite(pts)):
            bad = np.argwhere(~np.isfinite(pts).all(axis=-1))[0][0]
            raise GeometryError(f"immersion is not finite at node {nodes[bad].tolist()}")
        sampler = _SurfaceSampler(imm)
        g = sampler.evaluate(nodes)
        rad, probes = _cell_probes(space, sampler, lo, hi, g["points"])
        atoms = AtomSet(
            g["points"], g["frames"], w * g["density"], g["H"], np.ones(len(w)),
            rad, lo, hi, np.zeros(len(w), int), probes,
        )
        bsets, bsamplers = [], []
        for j, edge in enumerate(imm.domain.boundary):
            axis, side = edge
            t_nodes, t_w, t_edges = rules[1 - axis]
            es = _EdgeSampler(imm, edge)
            bg = es.evaluate(t_nodes[:, None])
            blo, bhi = t_edges[:-1, None], t_edges[1:, None]
            brad, bprobes = _cell_probes(space, es, blo, bhi, bg["points"])
            bsets.append(AtomSet(
                bg["points"], bg["conormal"][:, None, :], t_w * bg["density"],
                np.zeros_like(bg["points"]), np.ones(len(t_w)),
                brad, blo, bhi, np.full(len(t_w), j), bprobes,
            ))
            bsamplers.append(es)
        boundary = (
            AtomSet.concat(bsets, [0] * len(bsets)) if bsets else AtomSet.empty(space.dim, 1)
        )
        prov = {
            "sources": [imm.name or "immersion"],
            "quadrature": [list(spec.counts(imm.k))],
            "quad_error": 0.0,
        }
        V = cls(space, imm.k, atoms, boundary, [sampler], bsamplers, prov,
                imm.multiplicity_hints, imm.metadata)
        if estimate_error:
            coarse = tuple(max(2, c // 2) for c in spec.counts(imm.k))
            Vc = cls.from_immersion(imm, QuadratureSpec(coarse), estimate_error=False)
            V.provenance["quad_error"] = _relative_gap(V, Vc)
        return V

    def union(self, other: "SampledVarifold") -> "SampledVarifold":
        if other.space != self.space or other.m != self.m:
            raise GeometryError("cannot join varifolds from different spaces or dimensions")
        atoms = AtomSet.concat([self.atoms, other.atoms], [0, len(self.sources)])
        boundary = AtomSet.concat([self.boundary, other.boundary], [0, len(self.bsources)])
        prov = {
            "sources": self.provenance.get("sources", []) + other.provenance.get("sources", []),
            "quadrature": self.provenance.get("quadrature", []) + other.provenance.get("quadrature", []),
            "quad_error": max(self.provenance.get("quad_error", 0.0), other.provenance.get("quad_error", 0.0)),
            "dropped_atoms": self.provenance.get("dropped_atoms", 0) + other.provenance.get("dropped_atoms", 0),
        }
        meta = {**other.metadata, **self.metadata}
        return SampledVarifold(
            self.space, self.m, atoms, boundary, self.sources + other.sources,
            self.bsources + other.bsources, prov, self.hints + other.hints, meta,
        )

    def transform(self, iso: Isometry) -> "SampledVarifold":
        """Image of the varifold under an ambient isometry."""

        def move(s: AtomSet):
            return AtomSet(iso(s.points), iso.push(s.vectors), s.weights.copy(), iso.push(s.H),
                           s.density.copy(), s.radius.copy(), s.lo, s.hi, s.source,
                           iso(s.probes) if len(s.probes) else s.probes)

        return SampledVarifold(
            self.space, self.m, move(self.atoms), move(self.boundary),
            [_Transformed(s, iso) for s in self.sources],
            [_Transformed(s, iso) for s in self.bsources],
            dict(self.provenance), [(iso(p), k) for p, k in self.hints], self.metadata,
        )

    def __len__(self):
        return len(self.atoms)

    def __repr__(self):
        return (f"SampledVarifold({self.space!r}, m={self.m}, atoms={len(self.atoms)}, "
                f"boundary={len(self.boundary)})")

    # -- global integrals ---------------------------------------------------

    @property
    def quad_error(self) -> float:
        return float(self.provenance.get("quad_error", 0.0))

    @property
    def has_boundary(self) -> bool:
        return len(self.boundary) > 0

    def H_norm(self):
        return self.space.norm(self.atoms.H)

    def area(self) -> float:
        return float(self.atoms.weights.sum())

    def willmore_energy(self) -> float:
        return 0.25 * float(np.sum(self.atoms.weights * self.H_norm() ** 2))

    def total_mean_curvature(self) -> float:
        return float(np.sum(self.atoms.weights * self.H_norm()))

    def boundary_length(self) -> float:
        return float(self.boundary.weights.sum())

    def total_variation_bound(self) -> float:
        """Int |H| d||V|| plus the boundary measure; an upper bound for ||delta V||(N)."""
        return self.total_mean_curvature() + self.boundary_length()

    def integrate_weight(self, phi: Callable) -> float:
        vals = np.asarray(phi(self.atoms.points), float)
        vals = np.broadcast_to(vals, self.atoms.weights.shape)
        _check_finite(vals)
        return float(np.sum(self.atoms.weights * vals))

    def integrate_varifold(self, k: Callable) -> float:
        """Integral of k(points, frames) against the varifold."""
        vals = np.asarray(k(self.atoms.points, self.atoms.vectors), float)
        vals = np.broadcast_to(vals, self.atoms.weights.shape)
        _check_finite(vals)
        return float(np.sum(self.atoms.weights * vals))

    def first_variation(self, X: Callable) -> float:
        """-int g(X, H) d||V|| + int g(X, nu) over the boundary atoms."""
        sp = self.space
        a = self.atoms
        val = -np.sum(a.weights * sp.inner(X(a.points), a.H))
        if self.has_boundary:
            bd = self.boundary
            val += np.sum(bd.weights * sp.inner(X(bd.points), bd.vectors[:, 0, :]))
        return float(val)

    def mesh_gap(self) -> float:
        r = self.atoms.radius
        rb = self.boundary.radius
        vals = np.concatenate([r, rb]) if len(rb) else r
        return float(vals.max()) if len(vals) else 0.0

    def extrinsic_diameter(self, chunk=1024) -> DiameterEstimate:
        pts = self.atoms.points
        if len(self.boundary):
            pts = np.concatenate([pts, self.boundary.points])
        if len(pts) < 2:
            return DiameterEstimate(0.0, self.mesh_gap(), (0, 0))
        sp = self.space
        J = np.ones(sp.dim)
        if sp.b < 0:
            J[0] = -1.0
        sq = sp.inner(pts, pts)
        best, pair = -np.inf, (0, 0)
        for s in range(0, len(pts), chunk):
            blk = pts[s:s + chunk]
            # squared chord in the ambient form; distance is increasing in it
            c2 = sq[s:s + chunk, None] + sq[None, :] - 2.0 * (blk * J) @ pts.T
            i, j = np.unravel_index(np.argmax(c2), c2.shape)
            if c2[i, j] > best:
                best, pair = c2[i, j], (s + i, j)
        # the maximising pair from the Gram-matrix scan, rescored exactly
        d = float(sp.distance(pts[pair[0]], pts[pair[1]]))
        return DiameterEstimate(d, 2.0 * self.mesh_gap(), (int(pair[0]), int(pair[1])))

    # -- balls ----------------------------------------------------------------

    def ball(self, p, r, closed=False, eps=BALL_EPS, max_depth=BALL_MAX_DEPTH):
        """Atoms inside B_r(p) (or the closed ball) with straddling cells refined."""
        p = np.asarray(p, float)
        key = (p.tobytes(), float(r), bool(closed), eps, max_depth)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        inner = _refine(self.space, self.atoms, self._local("atoms"), self.sources,
                        p, r, closed, eps, max_depth, "H")
        outer = _refine(self.space, self.boundary, self._local("boundary"), self.bsources,
                        p, r, closed, eps, max_depth, "conormal")
        out = (inner, outer)
        if len(self._cache) > 4096:
            self._cache = {k: v for k, v in self._cache.items() if k[0] == "local"}
        self._cache[key] = out
        # open and closed balls only differ through atoms lying exactly on the sphere
        ties = any(np.any(self.space.distance(p, a.points) == r) for a in (self.atoms, self.boundary)
                   if len(a))
        if not ties:
            self._cache[key[:2] + (not closed,) + key[3:]] = out
        return out

    def _local(self, kind):
        """Three-point Gauss sub-atoms of every cell, used for cells inside a ball."""
        key = ("local", kind)
        if key in self._cache:
            return self._cache[key]
        atoms = self.atoms if kind == "atoms" else self.boundary
        samplers = self.sources if kind == "atoms" else self.bsources
        vec_key = "H" if kind == "atoms" else "conormal"
        out = _local_rule(self.space, atoms, samplers, vec_key)
        self._cache[key] = out
        return out

    def mass_in_ball(self, p, r, mode="open", **kw) -> float:
        if not r > 0:
            raise ValueError("radius must be positive")
        return self.ball(p, r, closed=(mode == "closed"), **kw)[0].mass

    def density_estimate(self, p, radii=None, max_depth=BALL_MAX_DEPTH) -> DensityEstimate:
        """Extrapolate ||V||B_r(p) / (alpha(m) r^m) to r = 0 with a quadratic fit."""
        p = np.asarray(p, float)
        if radii is None:
            diam = self.extrinsic_diameter().value
            inj = self.space.injectivity_radius
            r0 = min(0.2 * inj, 0.1 * diam) if math.isfinite(inj) else 0.1 * diam
            radii = r0 * 2.0 ** -np.arange(6)
        radii = np.asarray(radii, float)
        if np.any(np.diff(radii) >= 0):
            raise ValueError("radii must be strictly decreasing")
        if radii[0] >= self.space.injectivity_radius:
            raise ResolutionError("radii must stay inside the injectivity radius")
        d = self.space.distance(p, self.atoms.points)
        near = d < radii[0] + self.atoms.radius
        if near.any():
            spacing = float(self.atoms.radius[near].max()) / CELL_SAFETY
            if radii[-1] < 3.0 * spacing / 2**max_depth:
                raise ResolutionError(
                    f"smallest radius {radii[-1]:.3g} is below three refined cell widths"
                )
        alpha = comparison.unit_ball_volume(self.m)
        masses = np.array([self.ball(p, r, closed=True, max_depth=max_depth)[0].mass for r in radii])
        ratios = masses / (alpha * radii**self.m)
        A = np.vander(radii, 3, increasing=True)
        coef, *_ = np.linalg.lstsq(A, ratios, rcond=None)
        resid = float(np.max(np.abs(A @ coef - ratios))) if len(radii) > 3 else 0.0
        return DensityEstimate(max(float(coef[0]), 0.0), radii, ratios, resid, coef)

    # -- serialization -------------------------------------------------------

    def to_csv(self, path=None) -> str:
        D, m = self.space.dim, self.m
        cols = (["kind"] + [f"x{j}" for j in range(D)]
                + [f"e{i}_{j}" for i in range(m) for j in range(D)]
                + ["weight"] + [f"H{j}" for j in range(D)] + ["density"])
        a, bd = self.atoms, self.boundary
        rows_a = np.column_stack([
            np.zeros(len(a)), a.points, a.vectors.reshape(len(a), m * D), a.weights, a.H, a.density,
        ])
        bvec = np.zeros((len(bd), m, D))
        bvec[:, :1, :] = bd.vectors
        rows_b = np.column_stack([
            np.ones(len(bd)), bd.points, bvec.reshape(len(bd), m * D), bd.weights, bd.H, bd.density,
        ])
        buf = io.StringIO()
        header = json.dumps({"n": self.space.n, "b": self.space.b, "m": m})
        buf.write("# " + header + "\n")
        buf.write(",".join(cols) + "\n")
        np.savetxt(buf, np.vstack([rows_a, rows_b]), delimiter=",", fmt="%.17g")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "SampledVarifold":
        text = source if "\n" in str(source) else open(source).read()
        lines = text.splitlines()
        meta = json.loads(lines[0][1:].strip())
        space = ModelSpace(meta["n"], meta["b"])
        D, m = space.dim, meta["m"]
        data = np.loadtxt(io.StringIO("\n".join(lines[2:])), delimiter=",", ndmin=2)
        if data.size == 0:
            data = np.zeros((0, 1 + D + m * D + 1 + D + 1))
        kind = data[:, 0]
        pts = data[:, 1:1 + D]
        vec = data[:, 1 + D:1 + D + m * D].reshape(-1, m, D)
        w = data[:, 1 + D + m * D]
        H = data[:, 2 + D + m * D:2 + 2 * D + m * D]
        dens = data[:, 2 + 2 * D + m * D]

        def make(sel, vecs):
            n = int(sel.sum())
            return AtomSet(pts[sel], vecs, w[sel], H[sel], dens[sel], np.zeros(n),
                           np.zeros((n, 1)), np.zeros((n, 1)), np.zeros(n, int),
                           np.zeros((n, 2, D)))

        a = make(kind == 0, vec[kind == 0])
        bd = make(kind == 1, vec[kind == 1][:, :1, :])
        return cls(space, m, a, bd, provenance={"sources": ["csv"]})


def _check_finite(vals):
    bad = ~np.isfinite(vals)
    if bad.any():
        raise NonFiniteIntegrandError(f"integrand is not finite at atom {int(np.argwhere(bad)[0][0])}")


def _relative_gap(V, Vc):
    pairs = [
        (V.area(), Vc.area()),
        (V.willmore_energy(), Vc.willmore_energy()),
        (V.total_mean_curvature(), Vc.total_mean_curvature()),
        (V.boundary_length(), Vc.boundary_length()),
    ]
    scale = max(abs(a) for a, _ in pairs) or 1.0
    gap = max(abs(a - c) for a, c in pairs) / scale
    return float(max(gap, 4 * np.finfo(float).eps))


# -- ball refinement ---------------------------------------------------------

FRACTION_ROWS = 8


def _lagrange3(x):
    """Quadratic Lagrange basis on the nodes -1, 0, 1."""
    return np.stack([0.5 * x * (x - 1.0), 1.0 - x * x, 0.5 * x * (x + 1.0)], -1)


def _lagrange2(x):
    return np.stack([0.5 * (1.0 - x), 0.5 * (1.0 + x)], -1)


def _segment_inside(a, b, ra, rb, xa, xb):
    """Density integral and first moment over the part of [xa, xb] where the
    linear interpolant of (a, b) is negative, for a linear density (ra, rb)."""
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.clip(np.where(a != b, a / (a - b), 0.5), 0.0, 1.0)
    s0 = np.where(a < 0, 0.0, np.where(b < 0, t, 1.0))
    s1 = np.where(a < 0, np.where(b < 0, 1.0, t), 1.0)
    s1 = np.maximum(s0, s1)
    L = xb - xa
    m, h = 0.5 * (s0 + s1), 0.5 * (s1 - s0)
    mass = 2.0 * h * L * (ra + (rb - ra) * m)
    mom = 0.0
    for s in (m - h / math.sqrt(3.0), m + h / math.sqrt(3.0)):
        mom = mom + h * L * (ra + (rb - ra) * s) * (xa + L * s)
    return mass, mom


def _triangle_moments(R, X):
    """Integral and first moment of a linear density on a triangle of unit area."""
    mass = R.mean(axis=-1)
    mom = (np.einsum("...i,...ij->...j", R, X) + R.sum(-1)[..., None] * X.sum(-2)) / 12.0
    return mass, mom


def _triangle_inside(G, R, X, moments=True):
    """Integral (and first moment) of the linear density R over {G < 0}.

    ``G`` and ``R`` hold vertex values along the last axis (length 3) and ``X``
    the vertex coordinates (..., 3, 2); the triangle is taken to have unit
    area. Both fields are linear on the triangle, so the result is exact.
    """
    X = np.broadcast_to(X, G.shape + (X.shape[-1],))
    neg = G < 0
    count = neg.sum(axis=-1)
    mass = np.where(count == 3, R.mean(axis=-1), 0.0)
    mom = None
    if moments:
        full = _triangle_moments(R, X)[1]
        mom = np.where((count == 3)[..., None], full, 0.0)
    cut = np.flatnonzero((count == 1) | (count == 2))
    if len(cut) == 0:
        return mass, mom
    lead = G.shape[:-1]
    g, r, x, c = (a.reshape((-1,) + a.shape[len(lead):])[cut] for a in (G, R, X, count))
    ng = neg.reshape(-1, 3)[cut]
    # the vertex whose sign differs from the other two cuts off a corner triangle
    i = np.where(c == 1, np.argmax(ng, -1), np.argmin(ng, -1))
    j, k = (i + 1) % 3, (i + 2) % 3
    pick = lambda a, idx: np.take_along_axis(a, idx[:, None], 1)[:, 0]
    gi, ri = pick(g, i), pick(r, i)
    tj = gi / (gi - pick(g, j))
    tk = gi / (gi - pick(g, k))
    Rc = np.stack([ri, ri + tj * (pick(r, j) - ri), ri + tk * (pick(r, k) - ri)], -1)
    xi = np.take_along_axis(x, i[:, None, None], 1)[:, 0]
    xj = np.take_along_axis(x, j[:, None, None], 1)[:, 0]
    xk = np.take_along_axis(x, k[:, None, None], 1)[:, 0]
    Xc = np.stack([xi, xi + tj[:, None] * (xj - xi), xi + tk[:, None] * (xk - xi)], -2)
    cm, cx = _triangle_moments(Rc, Xc)
    cm, cx = tj * tk * cm, (tj * tk)[:, None] * cx
    two = c == 2
    flat_m = mass.reshape(-1)
    flat_m[cut] = np.where(two, r.mean(-1) - cm, cm)
    if moments:
        flat_x = mom.reshape(-1, mom.shape[-1])
        flat_x[cut] = np.where(two[:, None], _triangle_moments(r, x)[1] - cx, cx)
    return mass, mom


def _grid_fraction(vals, rho, xs, basis, moments=True):
    """Density-weighted inside fraction of a cell and of each of its 2^k halves.

    The interpolant of the nodal values is sampled at ``xs`` along each axis
    and integrated exactly after linear interpolation: on segments in one
    dimension and on a triangulated grid in two. Returns the fraction of the
    whole cell, then (with ``moments``) the inside mass of every half-cell as a
    fraction of the cell mass and the centroid of its inside part, both with a
    trailing half-cell axis. Centroids are in the cell coordinates [-1, 1]^k.
    """
    L = basis(xs)
    half = (len(xs) - 1) // 2
    if vals.ndim == 2:
        v = vals @ L.T
        w = rho @ L.T
        mass, mom = _segment_inside(v[:, :-1], v[:, 1:], w[:, :-1], w[:, 1:], xs[:-1], xs[1:])
        tot = (0.5 * (w[:, :-1] + w[:, 1:]) * np.diff(xs)).sum(axis=1)
        qm = np.stack([mass[:, :half].sum(1), mass[:, half:].sum(1)], -1)
        qx = np.stack([mom[:, :half].sum(1), mom[:, half:].sum(1)], -1)[..., None]
    else:
        # v[:, a, c] sits at u0 = xs[c], u1 = xs[a]
        v = L @ np.swapaxes(vals, 1, 2) @ L.T
        w = L @ np.swapaxes(rho, 1, 2) @ L.T
        X = np.stack(np.meshgrid(xs, xs, indexing="xy"), -1)
        area = 0.5 * np.diff(xs)[0] ** 2
        c = [(slice(a, a - 1 or None), slice(b_, b_ - 1 or None))
             for a, b_ in ((0, 0), (1, 0), (1, 1), (0, 1))]
        n = len(vals)
        tot = 0.0
        mass = np.zeros((n, len(xs) - 1, len(xs) - 1))
        mom = np.zeros(mass.shape + (2,))
        for tri in ((0, 1, 2), (0, 2, 3)):
            G = np.stack([v[(slice(None),) + c[t]] for t in tri], -1)
            R = np.stack([w[(slice(None),) + c[t]] for t in tri], -1)
            Xt = np.stack([X[c[t]] for t in tri], -2)
            m_, x_ = _triangle_inside(G, R, Xt[None], moments)
            mass = mass + area * m_
            if moments:
                mom = mom + area * x_
            tot = tot + area * R.mean(axis=-1).sum(axis=(1, 2))
        # half-cells ordered with u0 slowest, matching the child ordering
        lo_, hi_ = slice(None, half), slice(half, None)
        parts = [(lo_, lo_), (lo_, hi_), (hi_, lo_), (hi_, hi_)]
        qm = np.stack([mass[:, a, c0].sum(axis=(1, 2)) for c0, a in parts], -1)
        qx = np.stack([mom[:, a, c0].sum(axis=(1, 2)) for c0, a in parts], -2)
        mass = mass.reshape(n, -1)
    ins = mass.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        F = np.where(tot > 0, ins / tot, 0.0)
        if not moments:
            return F, None, None
        qF = np.where(tot[:, None] > 0, qm / tot[:, None], 0.0)
        qcen = np.where(qm[..., None] > 0, qx / qm[..., None], 0.0)
    return F, qF, np.clip(qcen, -1.0, 1.0)


def _inside_fraction(g, rho, k, q=None):
    """Fraction of each cell's mass where the interpolated signed distance is negative.

    ``g`` holds d - r and ``rho`` the area density at the nodes {-1, 0, 1}^k of
    each cell. Returns the quadratic-interpolant estimate, its gap to a
    half-resolution sweep, its gap to the linear interpolant, the centroid of
    the inside part in cell coordinates, and the per-half-cell fractions and
    centroids from :func:`_grid_fraction`.
    """
    q = q or FRACTION_ROWS
    xs = np.linspace(-1.0, 1.0, q + 1)
    xh = np.linspace(-1.0, 1.0, q // 2 + 1)
    corners = (slice(None),) + (slice(None, None, 2),) * k
    Fq, qF, qcen = _grid_fraction(g, rho, xs, _lagrange3)
    Fh, _, _ = _grid_fraction(g, rho, xh, _lagrange3, moments=False)
    Fl, _, _ = _grid_fraction(g[corners], rho[corners], xs, _lagrange2, moments=False)
    with np.errstate(invalid="ignore", divide="ignore"):
        cen = np.where(Fq[:, None] > 0, np.einsum("nq,nqk->nk", qF, qcen) / Fq[:, None], 0.0)
    return Fq, np.abs(Fq - Fh), np.abs(Fq - Fl), np.clip(cen, -1.0, 1.0), qF, qcen


_GL3 = np.polynomial.legendre.leggauss(3)


def _local_rule(space, atoms: AtomSet, samplers, vec_key):
    """Per-cell tensor three-point Gauss sub-atoms (sixth order on each cell).

    Returns arrays with a sub-atom axis: points (N, S, D), vectors, weights (N, S),
    H and a per-sub-atom error taken from the gap between the Gauss and the
    Simpson cell masses. Cells without a sampler keep the atom itself as their
    only sub-atom.
    """
    n = len(atoms)
    k = atoms.lo.shape[1]
    if n == 0 or not samplers:
        return (atoms.points[:, None], atoms.vectors[:, None], atoms.weights[:, None],
                atoms.H[:, None], np.zeros((n, 1)))
    offs = np.array(np.meshgrid(*[_GL3[0]] * k, indexing="ij")).reshape(k, -1).T
    gw = np.ones(1)
    for _ in range(k):
        gw = np.multiply.outer(gw, _GL3[1])
    gw = gw.reshape(-1) / 2.0**k
    S = len(offs)
    mid = 0.5 * (atoms.lo + atoms.hi)
    half = 0.5 * (atoms.hi - atoms.lo)
    u = mid[:, None, :] + offs[None] * half[:, None, :]
    D = space.dim
    pts = np.empty((n, S, D))
    vecs = np.empty((n, S) + atoms.vectors.shape[1:])
    H = np.zeros((n, S, D))
    w = np.empty((n, S))
    vol = np.prod(2.0 * half, axis=1)[:, None] * gw[None]
    for src in np.unique(atoms.source):
        sel = np.flatnonzero(atoms.source == src)
        g = samplers[src].evaluate(u[sel])
        pts[sel] = g["points"]
        if vec_key == "H":
            vecs[sel] = g["frames"]
            H[sel] = g["H"]
        else:
            vecs[sel] = g["conormal"][..., None, :]
        w[sel] = vol[sel] * g["density"]
    _, rho = _nodal_grid(samplers, atoms.source, atoms.lo, atoms.hi, D)
    simpson = np.prod(2.0 * half, axis=1) * np.tensordot(rho, _simpson_weights(k), axes=k)
    # the Simpson gap overstates the Gauss error by orders of magnitude
    err = np.abs(w.sum(axis=1) - simpson)[:, None] * gw[None]
    return pts, vecs, w, H, err


def _simpson_weights(k):
    """Tensor Simpson weights on the nodes {-1, 0, 1}^k, normalised to sum 1."""
    w = np.array([1.0, 4.0, 1.0]) / 6.0
    out = w
    for _ in range(k - 1):
        out = np.multiply.outer(out, w)
    return out


def _empty_sample(D, mv):
    return BallSample(np.zeros((0, D)), np.zeros((0, mv, D)), np.zeros(0), np.zeros((0, D)),
                      np.zeros(0), np.zeros(0))


def _part(points, vectors, w, H, d, err, alt=None, group=None):
    """One block of ball atoms; atoms outside any embedded rule get group -1."""
    if alt is None:
        alt, group = w, np.full(len(w), -1)
    return points, vectors, w, H, d, err, alt, group


def _assemble(parts, straddle_mass=0.0, depth=0):
    cols = [np.concatenate(c) for c in zip(*parts)]
    # embedded-rule ids are local to each block; make them global
    gid, off = [], 0
    for part in parts:
        g = part[7]
        gid.append(np.where(g >= 0, g + off, -1))
        off += int(g.max()) + 1 if len(g) and g.max() >= 0 else 0
    cols[7] = np.concatenate(gid)
    if not np.any(cols[7] >= 0):
        cols[6] = cols[7] = None
    return BallSample(*cols, straddle_mass=straddle_mass, depth=depth)


def _refine(space, atoms: AtomSet, local, samplers, p, r, closed, eps, max_depth, vec_key):
    """Weights of atoms inside a ball, subdividing cells cut by its boundary sphere.

    Cells wholly inside contribute their local sub-atoms; if every cell is
    inside, the global quadrature weights are returned unchanged. Straddling
    cells are halved until the change in ball mass between the last two levels
    drops below ``eps`` times the mass. The reported error of the final level
    is that change, split over the children of each parent, plus the gap
    between full- and half-resolution sweeps of each straddling child, plus
    the integrand-dependent gap of the embedded rule on straddling children.
    """
    D = space.dim
    mv = atoms.vectors.shape[1]
    if len(atoms) == 0:
        return _empty_sample(D, mv)
    k = atoms.lo.shape[1]
    d = space.distance(p, atoms.points)
    rad = atoms.radius
    inside = d + rad < r
    outside = d - rad > r
    strad = ~(inside | outside)
    if inside.all():
        return BallSample(atoms.points, atoms.vectors, atoms.weights, atoms.H, d,
                          np.zeros(len(atoms)))

    lp, lv, lw, lH, le = (x[inside] for x in local)
    flat = lambda a: a.reshape((-1,) + a.shape[2:])
    keep = [_part(flat(lp), flat(lv), flat(lw), flat(lH), space.distance(p, flat(lp)), flat(le))]
    mass_in = float(lw.sum())
    local_w = local[2].sum(axis=1)

    refinable = bool(samplers) and strad.any() and bool(np.all(rad[strad] > 0))
    if strad.any() and not refinable:
        # no cell geometry: classify by the atom itself
        sel = strad & ((d <= r) if closed else (d < r))
        keep.append(_part(atoms.points[sel], atoms.vectors[sel], atoms.weights[sel],
                          atoms.H[sel], d[sel], np.zeros(int(sel.sum()))))
        return _assemble(keep)
    if not strad.any():
        return _assemble(keep)

    cur = {
        "points": atoms.points[strad], "vectors": atoms.vectors[strad], "w": local_w[strad],
        "H": atoms.H[strad], "d": d[strad], "lo": atoms.lo[strad], "hi": atoms.hi[strad],
        "src": atoms.source[strad],
    }
    pts, rho = _nodal_grid(samplers, cur["src"], cur["lo"], cur["hi"], D)
    g = space.distance(p, pts) - r
    F, e_half, e_lin, cur["cen"], cur["qF"], cur["qcen"] = _inside_fraction(g, rho, k)
    contrib = cur["w"] * F
    if max_depth <= 0:
        cur["contrib"] = contrib
        every = np.ones(len(F), bool)
        keep.append(_straddle_atoms(space, samplers, p, cur, every, cur["w"] * (e_half + e_lin),
                                    vec_key))
        return _assemble(keep, float(cur["w"].sum()), 0)

    depth = 0
    while True:
        kids = _subdivide(space, samplers, cur, p, r, vec_key)
        depth += 1
        n = len(cur["w"])
        diff = np.abs(np.bincount(kids["parent"], weights=kids["contrib"], minlength=n) - contrib)
        new_in = float(kids["w"][kids["inside"]].sum())
        ball_mass = mass_in + new_in + float(kids["contrib"][kids["strad"]].sum())
        done = (depth >= max_depth or not kids["strad"].any()
                or (depth >= BALL_MIN_DEPTH and diff.sum() + kids["ferr"].sum()
                    <= eps * max(ball_mass, np.finfo(float).tiny)))
        if done:
            tot = np.bincount(kids["parent"], weights=kids["w"], minlength=n)
            with np.errstate(invalid="ignore", divide="ignore"):
                share = np.where(tot[kids["parent"]] > 0, kids["w"] / tot[kids["parent"]], 0.0)
            kerr = diff[kids["parent"]] * share + kids["ferr"]
            keep.append(_sub_atoms(kids, kids["inside"], kerr))
            keep.append(_straddle_atoms(space, samplers, p, kids, kids["strad"], kerr, vec_key))
            sel = ~(kids["inside"] | kids["strad"])
            keep.append(_part(kids["points"][sel], kids["vectors"][sel], np.zeros(int(sel.sum())),
                              kids["H"][sel], kids["d"][sel], kerr[sel]))
            straddle_mass = float(kids["w"][kids["strad"]].sum())
            break
        keep.append(_sub_atoms(kids, kids["inside"]))
        mass_in += new_in
        sel = kids["strad"]
        cur = {key: kids[key][sel] for key in ("points", "vectors", "w", "H", "d", "lo", "hi",
                                                "src")}
        contrib = kids["contrib"][sel]
    return _assemble(keep, straddle_mass, depth)


def _cell_geometry(space, samplers, src, u, vec_key, vshape):
    """Points, tangent or conormal vectors and mean curvature at parameters u."""
    m, D = len(u), space.dim
    pts = np.empty((m, D))
    vecs = np.empty((m,) + vshape)
    Hs = np.zeros((m, D))
    for s in np.unique(src):
        sel = np.flatnonzero(src == s)
        g = samplers[s].evaluate(u[sel])
        pts[sel] = g["points"]
        if vec_key == "H":
            vecs[sel] = g["frames"]
            Hs[sel] = g["H"]
        else:
            vecs[sel] = g["conormal"][:, None, :]
    return pts, vecs, Hs


def _straddle_atoms(space, samplers, p, cells, sel, err, vec_key):
    """Atoms for the inside parts of straddling cells, with an embedded coarse rule.

    Each cell yields one atom per half-cell at the centroid of that half's
    inside part (the rule used), and one zero-weight atom at the centroid of the
    whole inside part whose ``alt`` weight is the cell's inside mass (the coarse
    rule). The cell's error weight sits on the coarse atom.
    """
    idx = np.flatnonzero(sel)
    c, k = len(idx), cells["lo"].shape[1]
    D = space.dim
    vshape = cells["vectors"].shape[1:]
    if c == 0:
        z = np.zeros(0)
        return _part(np.zeros((0, D)), np.zeros((0,) + vshape), z, np.zeros((0, D)), z, z)
    lo, hi = cells["lo"][idx], cells["hi"][idx]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    qF, qcen = cells["qF"][idx], cells["qcen"][idx]
    nq = qF.shape[1]
    # empty halves fall back to their own centre so the atom stays in the cell
    offs = np.array(np.meshgrid(*[[-0.5, 0.5]] * k, indexing="ij")).reshape(k, -1).T
    qcen = np.where((qF > 0)[..., None], qcen, offs[None])
    u = np.concatenate([(mid[:, None, :] + qcen * half[:, None, :]).reshape(-1, k),
                        mid + cells["cen"][idx] * half])
    src = np.concatenate([np.repeat(cells["src"][idx], nq), cells["src"][idx]])
    pts, vecs, Hs = _cell_geometry(space, samplers, src, u, vec_key, vshape)
    w = cells["w"][idx]
    fine = (w[:, None] * qF).reshape(-1)
    weights = np.concatenate([fine, np.zeros(c)])
    alt = np.concatenate([np.zeros(c * nq), cells["contrib"][idx]])
    group = np.concatenate([np.repeat(np.arange(c), nq), np.arange(c)])
    e = np.concatenate([np.zeros(c * nq), err[idx]])
    return _part(pts, vecs, weights, Hs, space.distance(p, pts), e, alt, group)


def _nodal_grid(samplers, src, lo, hi, D):
    """Points and area density at the nodes {-1, 0, 1}^k of each cell."""
    n, k = lo.shape
    offs = np.array(np.meshgrid(*[[-1.0, 0.0, 1.0]] * k, indexing="ij")).reshape(k, -1).T
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    u = mid[:, None, :] + offs[None] * half[:, None, :]
    pts = np.empty((n, len(offs), D))
    rho = np.empty((n, len(offs)))
    for s in np.unique(src):
        sel = np.flatnonzero(src == s)
        pts[sel], rho[sel] = samplers[s].nodes(u[sel])
    shape = (n,) + (3,) * k
    return pts.reshape(shape + (D,)), np.abs(rho).reshape(shape)


def _subdivide(space, samplers, cur, p, r, vec_key):
    """Split every cell into 2^k children and classify them against the ball.

    Geometry is evaluated on each child's nodes {-1, 0, 1}^k; children found
    inside carry these nodes as Simpson sub-atoms.
    """
    lo, hi = cur["lo"], cur["hi"]
    n, k = lo.shape
    corners = np.array(np.meshgrid(*[[0, 1]] * k, indexing="ij")).reshape(k, -1).T
    nc = len(corners)
    mid = 0.5 * (lo + hi)
    clo = np.where(corners[None] == 0, lo[:, None, :], mid[:, None, :]).reshape(-1, k)
    chi = np.where(corners[None] == 0, mid[:, None, :], hi[:, None, :]).reshape(-1, k)
    parent = np.repeat(np.arange(n), nc)
    src = cur["src"][parent]
    D = space.dim
    m = len(clo)
    offs = np.array(np.meshgrid(*[[-1.0, 0.0, 1.0]] * k, indexing="ij")).reshape(k, -1).T
    u = 0.5 * (clo + chi)[:, None, :] + offs[None] * 0.5 * (chi - clo)[:, None, :]
    S = len(offs)
    c = S // 2
    grid = (m,) + (3,) * k
    npts, rho = _nodal_grid(samplers, src, clo, chi, D)
    rho = rho.reshape(m, S)
    # nodes on a degenerate chart edge carry no weight; they borrow the centre's frame
    live = rho > DEGENERATE_DENSITY * rho.max(axis=1, keepdims=True)
    live[:, c] = True
    rho = np.where(live, rho, 0.0)
    vecs = np.empty((m, S) + cur["vectors"].shape[1:])
    Hs = np.zeros((m, S, D))
    flat_src = np.repeat(src, S).reshape(m, S)
    _, vecs[live], Hs[live] = _cell_geometry(space, samplers, flat_src[live], u[live], vec_key,
                                             cur["vectors"].shape[1:])
    vecs[~live] = np.broadcast_to(vecs[:, c][:, None], vecs.shape)[~live]
    Hs[~live] = np.broadcast_to(Hs[:, c][:, None], Hs.shape)[~live]
    rho = rho.reshape(grid)
    sub_w = np.prod(chi - clo, axis=1)[:, None] * (rho * _simpson_weights(k)).reshape(m, -1)
    w = sub_w.sum(axis=1)
    pts = npts.reshape(m, -1, D)[:, c]
    dn = space.distance(p, npts)
    d = dn.reshape(m, -1)[:, c]
    spread = space.distance(pts.reshape((m,) + (1,) * k + (D,)), npts)
    rad = CELL_SAFETY * spread.reshape(m, -1).max(axis=1)
    inside = d + rad < r
    outside = d - rad > r
    strad = ~(inside | outside)
    contrib = np.where(inside, w, 0.0)
    ferr = np.zeros(m)
    cen = np.zeros((m, k))
    qF = np.zeros((m, nc))
    qcen = np.zeros((m, nc, k))
    if strad.any():
        F, e_half, _, cen[strad], qF[strad], qcen[strad] = _inside_fraction(
            dn[strad] - r, rho[strad], k)
        contrib[strad] = w[strad] * F
        ferr[strad] = w[strad] * e_half
    return {
        "points": pts, "vectors": vecs[:, c], "w": w, "H": Hs[:, c], "d": d, "lo": clo, "hi": chi,
        "src": src, "parent": parent, "inside": inside, "strad": strad, "contrib": contrib,
        "ferr": ferr, "cen": cen, "qF": qF, "qcen": qcen,
        "sub": (npts.reshape(m, -1, D), vecs, sub_w, Hs, dn.reshape(m, -1)),
    }


def _sub_atoms(kids, sel, err=None):
    """Simpson sub-atoms of the selected children, sharing each child's error."""
    sp, sv, sw, sH, sd = (a[sel] for a in kids["sub"])
    flat = lambda a: a.reshape((-1,) + a.shape[2:])
    if err is None:
        e = np.zeros(sw.size)
    else:
        with np.errstate(invalid="ignore", divide="ignore"):
            e = flat(err[sel][:, None] * np.where(sw.sum(1, keepdims=True) > 0,
                                                 sw / sw.sum(1, keepdims=True), 0.0))
    return _part(flat(sp), flat(sv), flat(sw), flat(sH), flat(sd), e)
