"""Parametric immersions into a model space and their quadrature sampling.

An immersion is a map from a rectangular parameter domain (one or two
parameters) into the ambient coordinates of a :class:`ModelSpace`. Derivatives
come from an analytic ``jet`` callable when supplied, otherwise from central
differences with one Richardson step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import ndimage, optimize

from .model_space import GeometryError, Isometry, ModelSpace


class DegenerateImmersionError(GeometryError):
    """Pullback metric is (numerically) singular."""


@dataclass(frozen=True)
class ParameterDomain:
    """Product of intervals with per-axis periodicity.

    ``poles[a] = (lo, hi)`` marks sides of axis ``a`` that collapse to a point
    (removable coordinate singularities). ``boundary`` lists ``(axis, side)``
    pairs, side 0 for the lower end and 1 for the upper end, that map onto the
    boundary of the surface.
    """

    lower: tuple
    upper: tuple
    periodic: tuple
    poles: tuple = ()
    boundary: tuple = ()

    def __post_init__(self):
        k = len(self.lower)
        if not (len(self.upper) == len(self.periodic) == k) or k not in (1, 2):
            raise ValueError("domain must have one or two axes")
        if not self.poles:
            object.__setattr__(self, "poles", tuple((False, False) for _ in range(k)))
        for axis, side in self.boundary:
            if self.periodic[axis]:
                raise ValueError("boundary edges must lie on non-periodic axes")
            if self.poles[axis][side]:
                raise ValueError("a side cannot be both a pole and a boundary edge")
        if k == 1 and self.boundary:
            raise ValueError("bordered curves are not supported")

    @property
    def k(self) -> int:
        return len(self.lower)

    @property
    def extent(self) -> np.ndarray:
        return np.asarray(self.upper, float) - np.asarray(self.lower, float)

    @property
    def is_closed(self) -> bool:
        if self.boundary:
            return False
        return all(
            self.periodic[a] or all(self.poles[a]) for a in range(self.k)
        )


@dataclass(frozen=True)
class QuadratureSpec:
    """Tensor rule: trapezoid on periodic axes, Gauss--Legendre otherwise."""

    n: object = 64  # int or per-axis tuple

    def counts(self, k):
        n = self.n if isinstance(self.n, (tuple, list)) else (self.n,) * k
        return tuple(int(c) for c in n)


def axis_rule(lo, hi, n, periodic):
    """Nodes, weights and cell edges of a one-dimensional rule on [lo, hi]."""
    L = hi - lo
    if periodic:
        edges = lo + L * np.arange(n + 1) / n
        nodes = 0.5 * (edges[1:] + edges[:-1])
        weights = np.full(n, L / n)
    else:
        x, w = np.polynomial.legendre.leggauss(n)
        nodes = lo + 0.5 * L * (x + 1.0)
        weights = 0.5 * L * w
        # cells split halfway between neighbouring nodes
        edges = np.concatenate([[lo], 0.5 * (nodes[1:] + nodes[:-1]), [hi]])
    return nodes, weights, edges


def _cell_offsets(k):
    """Corner and edge-midpoint offsets of the unit cell [-1, 1]^k."""
    if k == 1:
        return np.array([[-1.0], [1.0]])
    g = np.array([[i, j] for i in (-1, 0, 1) for j in (-1, 0, 1) if (i, j) != (0, 0)])
    return g.astype(float)


class ParametricImmersion:
    """Smooth map of a :class:`ParameterDomain` into a model space.

    ``fn(u)`` and the optional ``jet(u)`` take parameter arrays of shape
    (..., k). ``jet`` returns ``(f, df, d2f)`` with shapes (..., D),
    (..., k, D) and (..., k, k, D).
    """

    def __init__(
        self,
        space: ModelSpace,
        domain: ParameterDomain,
        fn: Callable,
        jet: Optional[Callable] = None,
        multiplicity_hints: Sequence = (),
        name: str = "",
        fd_step: float = 1e-4,
        metadata: Optional[dict] = None,
    ):
        self.space = space
        self.domain = domain
        self.fn = fn
        self._jet = jet
        self.multiplicity_hints = [(np.asarray(p, float), int(k)) for p, k in multiplicity_hints]
        self.name = name
        self.fd_step = fd_step
        self.metadata = dict(metadata or {})

    @property
    def k(self):
        return self.domain.k

    def __repr__(self):
        return f"ParametricImmersion({self.name or '?'}, {self.space!r})"

    # -- derivatives -------------------------------------------------------

    def point(self, u):
        return np.asarray(self.fn(np.asarray(u, dtype=float)), dtype=float)

    def _fd_jet(self, u):
        k = self.k
        h1 = self.fd_step * self.domain.extent
        h2 = 10.0 * h1
        f0 = self.point(u)
        D = f0.shape[-1]
        df = np.empty(u.shape[:-1] + (k, D))
        d2f = np.empty(u.shape[:-1] + (k, k, D))
        eye = np.eye(k)

        def shift(*pairs):
            du = np.zeros(k)
            for axis, s in pairs:
                du = du + s * eye[axis]
            return self.point(u + du)

        for a in range(k):
            def first(h):
                return (shift((a, h)) - shift((a, -h))) / (2 * h)

            def second(h):
                return (shift((a, h)) - 2 * f0 + shift((a, -h))) / h**2

            df[..., a, :] = (4 * first(h1[a] / 2) - first(h1[a])) / 3
            d2f[..., a, a, :] = (4 * second(h2[a] / 2) - second(h2[a])) / 3
        if k == 2:
            def mixed(ha, hb):
                return (
                    shift((0, ha), (1, hb)) - shift((0, ha), (1, -hb))
                    - shift((0, -ha), (1, hb)) + shift((0, -ha), (1, -hb))
                ) / (4 * ha * hb)

            m = (4 * mixed(h2[0] / 2, h2[1] / 2) - mixed(h2[0], h2[1])) / 3
            d2f[..., 0, 1, :] = m
            d2f[..., 1, 0, :] = m
        return f0, df, d2f

    def jet(self, u, analytic=True):
        u = np.asarray(u, dtype=float)
        if self._jet is not None and analytic:
            f, df, d2f = self._jet(u)
            return np.asarray(f, float), np.asarray(df, float), np.asarray(d2f, float)
        return self._fd_jet(u)

    def first_derivatives(self, u):
        u = np.asarray(u, dtype=float)
        if self._jet is not None:
            f, df, _ = self._jet(u)
            return np.asarray(f, float), np.asarray(df, float)
        h1 = self.fd_step * self.domain.extent
        f0 = self.point(u)
        df = np.empty(u.shape[:-1] + (self.k, f0.shape[-1]))
        for a in range(self.k):
            e = np.zeros(self.k)
            e[a] = 1.0

            def first(h):
                return (self.point(u + h * e) - self.point(u - h * e)) / (2 * h)

            df[..., a, :] = (4 * first(h1[a] / 2) - first(h1[a])) / 3
        return f0, df

    # -- intrinsic / extrinsic quantities ------------------------------------

    def _gram(self, df):
        return self.space.inner(df[..., :, None, :], df[..., None, :, :])

    def pullback_metric(self, u):
        _, df = self.first_derivatives(u)
        G = self._gram(df)
        self._check_rank(G)
        return G

    @staticmethod
    def _check_rank(G):
        ev = np.linalg.eigvalsh(G)
        if np.any(ev[..., 0] <= 0) or np.any(np.sqrt(np.abs(ev[..., 0])) < 1e-8):
            raise DegenerateImmersionError("pullback metric is singular at a node")

    def geometry(self, u, analytic=True):
        """Point, orthonormal tangent frame, area element and mean curvature at u."""
        f, df, d2f = self.jet(u, analytic=analytic)
        space = self.space
        G = self._gram(df)
        self._check_rank(G)
        Ginv = np.linalg.inv(G)
        w = np.einsum("...ij,...ijd->...d", Ginv, d2f)
        coeff = np.einsum("...ij,...j->...i", Ginv, space.inner(w[..., None, :], df))
        H = w - np.einsum("...i,...id->...d", coeff, df)
        if space.b != 0:
            H = H - (space.b * space.inner(w, f))[..., None] * f
        frame = space.orthonormal_frame(f, df)
        jac = np.sqrt(np.linalg.det(G))
        return f, frame, jac, H

    def mean_curvature(self, u, analytic=True):
        return self.geometry(u, analytic=analytic)[3]

    def boundary_geometry(self, edge, t):
        """Point, outward unit conormal and line element along a boundary edge.

        ``t`` are values of the free parameter on the edge.
        """
        axis, side = edge
        other = 1 - axis
        t = np.asarray(t, dtype=float)
        u = np.empty(t.shape + (2,))
        u[..., other] = t
        u[..., axis] = (self.domain.lower, self.domain.upper)[side][axis]
        f, df = self.first_derivatives(u)
        tang = df[..., other, :]
        nu = df[..., axis, :] * (1.0 if side == 1 else -1.0)
        tt = self.space.inner(tang, tang)
        nu = nu - (self.space.inner(nu, tang) / tt)[..., None] * tang
        nu = nu / self.space.norm(nu)[..., None]
        return f, nu, np.sqrt(tt)

    def transformed(self, iso: Isometry, name: Optional[str] = None):
        """Compose with an ambient isometry of the model space."""
        base = self

        def fn(u):
            return iso(base.point(u))

        jet = None
        if base._jet is not None:
            def jet(u):
                f, df, d2f = base._jet(u)
                return iso(f), iso.push(df), iso.push(d2f)

        hints = [(iso(p), k) for p, k in base.multiplicity_hints]
        return ParametricImmersion(
            base.space, base.domain, fn, jet, hints, name or base.name, base.fd_step, base.metadata
        )

    def deformed(self, X: Callable, t: float, name: Optional[str] = None):
        """Immersion u -> exp_{f(u)}(t X(f(u))) for an ambient vector field X."""
        return _Deformed(self, X, t, name)

    # -- sampling ------------------------------------------------------------

    def rule(self, spec: QuadratureSpec):
        """Per-axis nodes, weights and cell edges."""
        counts = spec.counts(self.k)
        d = self.domain
        return [axis_rule(d.lower[a], d.upper[a], counts[a], d.periodic[a]) for a in range(self.k)]

    def sample_varifold(self, spec=None, estimate_error=True):
        from .varifold import SampledVarifold

        if spec is None:
            spec = QuadratureSpec()
        elif not isinstance(spec, QuadratureSpec):
            spec = QuadratureSpec(spec)
        return SampledVarifold.from_immersion(self, spec, estimate_error=estimate_error)


def area(imm: ParametricImmersion, spec=None) -> float:
    """Area of an immersion by tensor quadrature (first derivatives only)."""
    spec = spec if isinstance(spec, QuadratureSpec) else QuadratureSpec(spec or 64)
    rules = imm.rule(spec)
    nodes = np.stack(np.meshgrid(*[r[0] for r in rules], indexing="ij"), axis=-1)
    w = rules[0][1]
    for r in rules[1:]:
        w = np.multiply.outer(w, r[1])
    _, df = imm.first_derivatives(nodes)
    det = np.linalg.det(imm._gram(df))
    if not np.all(np.isfinite(det)) or np.any(det <= 0):
        raise DegenerateImmersionError(f"{imm.name or 'immersion'} is degenerate at a quadrature node")
    return float(np.sum(w * np.sqrt(det)))


class _Deformed(ParametricImmersion):
    """f_t = f + g_t with g_t = exp_f(t X(f)) - f.

    First derivatives take df from the base and difference only g_t, whose
    size is O(t): the rounding error of the difference quotient then scales
    with t, so area differences across +-t do not amplify it by 1/t.
    """

    def __init__(self, base: ParametricImmersion, X: Callable, t: float, name=None):
        self.base, self.X, self.t = base, X, float(t)
        super().__init__(base.space, base.domain, self._point, None, (), name or base.name, base.fd_step)

    def _offset(self, f):
        sp = self.space
        return sp.exp_offset(f, self.t * sp.project_tangent(f, self.X(f)))

    def _point(self, u):
        f = self.base.point(u)
        return f + self._offset(f)

    def first_derivatives(self, u):
        u = np.asarray(u, dtype=float)
        f, df = self.base.first_derivatives(u)
        h1 = self.fd_step * self.domain.extent
        dg = np.empty_like(df)
        for a in range(self.k):
            e = np.zeros(self.k)
            e[a] = 1.0

            def first(h):
                up = self._offset(self.base.point(u + h * e))
                dn = self._offset(self.base.point(u - h * e))
                return (up - dn) / (2 * h)

            dg[..., a, :] = (4 * first(h1[a] / 2) - first(h1[a])) / 3
        return f + self._offset(f), df + dg


def first_variation_numeric(imm: ParametricImmersion, X: Callable, t: float, spec=None) -> float:
    """Central difference (Area(f_t) - Area(f_-t)) / 2t with f_t = exp_f(t X(f))."""
    if not t > 0:
        raise ValueError("step must be positive")
    plus = area(imm.deformed(X, t), spec)
    minus = area(imm.deformed(X, -t), spec)
    return (plus - minus) / (2.0 * t)


def _periodic_label(mask, periodic):
    labels, n = ndimage.label(mask)
    # merge components touching across periodic seams
    parent = list(range(n + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for axis, per in enumerate(periodic):
        if not per:
            continue
        first = np.take(labels, 0, axis=axis)
        last = np.take(labels, -1, axis=axis)
        for a, b in zip(first.ravel(), last.ravel()):
            if a and b:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[ra] = rb
    roots = np.array([find(i) for i in range(n + 1)])
    return roots[labels]


def multiplicity_at(immersions, p, tol=1e-6, grid=96) -> int:
    """Number of preimage clusters of p within tol, summed over immersions.

    The parameter domain is scanned on a grid; connected groups of nodes near p
    are each refined by bounded local minimisation of the distance to p.
    """
    if isinstance(immersions, ParametricImmersion):
        immersions = [immersions]
    total = 0
    for imm in immersions:
        space, d = imm.space, imm.domain
        p = np.asarray(p, float)
        axes = []
        for a in range(imm.k):
            nodes = axis_rule(d.lower[a], d.upper[a], grid, True)[0]
            axes.append(nodes)
        U = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        f = imm.point(U)
        dist = space.distance(p, f)
        step = d.extent / grid
        # bound on the distance between neighbouring grid points
        _, df = imm.first_derivatives(U)
        speed = np.sqrt(np.maximum(space.inner(df, df), 0.0))
        reach = np.einsum("...a,a->...", speed, step)
        mask = dist <= tol + 1.5 * reach
        if not mask.any():
            continue
        labels = _periodic_label(mask, d.periodic)
        lo = np.asarray(d.lower, float)
        hi = np.asarray(d.upper, float)
        for lab in np.unique(labels[mask]):
            idx = np.argwhere(labels == lab)
            vals = dist[tuple(idx.T)]
            start = U[tuple(idx[np.argmin(vals)])]
            bounds = [
                (None, None) if d.periodic[a] else (lo[a], hi[a]) for a in range(imm.k)
            ]
            res = optimize.minimize(
                lambda u: float(space.distance(p, imm.point(u))),
                start,
                method="L-BFGS-B" if any(b[0] is not None for b in bounds) else "BFGS",
                bounds=bounds if any(b[0] is not None for b in bounds) else None,
                options={"gtol": 1e-14},
            )
            best = min(res.fun, float(vals.min()))
            if best <= tol:
                total += 1
    return total
