"""Analytic test surfaces with exact jets.

Each constructor returns a :class:`ParametricImmersion` (or a list of them for
unions). Surfaces placed around the origin of a curved model space are built
from the generalised sine/cosine pair

    cs(s) = cos(sqrt(b) s),  sn(s) = sin(sqrt(b) s) / sqrt(b)      (b > 0)

with the hyperbolic versions for b < 0 and (1, s) for b = 0, so that
``cs(s) o + sn(s) w`` is the unit-speed geodesic from the origin ``o`` in the
unit tangent direction ``w``.
"""

from __future__ import annotations

import math

import numpy as np

from .immersion import ParameterDomain, ParametricImmersion
from .model_space import Isometry, ModelSpace

TWO_PI = 2.0 * math.pi


def cs_sn(b, s):
    """Generalised cosine and sine of curvature b."""
    s = np.asarray(s, dtype=float)
    if b > 0:
        k = math.sqrt(b)
        return np.cos(k * s), np.sin(k * s) / k
    if b < 0:
        k = math.sqrt(-b)
        return np.cosh(k * s), np.sinh(k * s) / k
    return np.ones_like(s), s


def _tangent_basis(space: ModelSpace, count):
    """Orthonormal tangent vectors at the origin of the space."""
    off = 0 if space.b == 0 else 1
    E = np.zeros((count, space.dim))
    for i in range(count):
        E[i, off + i] = 1.0
    return E


def _sphere_chart(u):
    th, ph = u[..., 0], u[..., 1]
    st, ct, sp, cp = np.sin(th), np.cos(th), np.sin(ph), np.cos(ph)
    z = np.zeros_like(th)
    psi = np.stack([st * cp, st * sp, ct], -1)
    d_th = np.stack([ct * cp, ct * sp, -st], -1)
    d_ph = np.stack([-st * sp, st * cp, z], -1)
    d_thph = np.stack([-ct * sp, ct * cp, z], -1)
    d_phph = np.stack([-st * cp, -st * sp, z], -1)
    dpsi = np.stack([d_th, d_ph], -2)
    d2psi = np.stack([np.stack([-psi, d_thph], -2), np.stack([d_thph, d_phph], -2)], -3)
    return psi, dpsi, d2psi


def _lift(center, scale, E, chart):
    """Immersion u -> center + scale * chart(u) @ E with matching jets."""
    center = np.asarray(center, float)

    def jet(u):
        psi, dpsi, d2psi = chart(np.asarray(u, float))
        return center + scale * psi @ E, scale * dpsi @ E, scale * d2psi @ E

    def fn(u):
        return jet(u)[0]

    return fn, jet


SPHERE_DOMAIN = ParameterDomain((0.0, 0.0), (math.pi, TWO_PI), (False, True),
                                poles=((True, True), (False, False)))


def geodesic_sphere(space: ModelSpace, rho: float, name="geodesic_sphere"):
    """Boundary of the geodesic ball of radius rho about the origin (n = 3 only)."""
    if space.n != 3:
        raise ValueError("geodesic spheres are built in three-dimensional spaces")
    if space.b > 0 and not 0 < rho < math.pi / math.sqrt(space.b):
        raise ValueError("radius must lie inside the injectivity radius")
    if rho <= 0:
        raise ValueError("radius must be positive")
    c, s = cs_sn(space.b, rho)
    fn, jet = _lift(float(c) * space.origin, float(s), _tangent_basis(space, 3), _sphere_chart)
    north = fn(np.array([0.0, 0.0]))
    return ParametricImmersion(
        space, SPHERE_DOMAIN, fn, jet, [(north, 1)], name,
        metadata={"closed": True, "connected": True, "minimal": space.b > 0 and
                  abs(rho * math.sqrt(space.b) - math.pi / 2) < 1e-15, "center": space.origin.tolist()},
    )


def round_sphere(R=1.0, center=(0.0, 0.0, 0.0), name="round_sphere"):
    space = ModelSpace(3, 0.0)
    fn, jet = _lift(center, R, np.eye(3), _sphere_chart)
    north = fn(np.array([0.0, 0.0]))
    return ParametricImmersion(
        space, SPHERE_DOMAIN, fn, jet, [(north, 1)], name,
        metadata={"closed": True, "connected": True, "minimal": False, "center": list(center)},
    )


def great_sphere(b=1.0, name="great_sphere"):
    """Totally geodesic 2-sphere in S^3(b)."""
    space = ModelSpace(3, b)
    imm = geodesic_sphere(space, math.pi / (2 * math.sqrt(b)), name)
    imm.metadata["minimal"] = True
    return imm


def _torus_chart(u):
    a, v = u[..., 0], u[..., 1]
    ca, sa, cv, sv = np.cos(a), np.sin(a), np.cos(v), np.sin(v)
    z = np.zeros_like(a)
    psi = np.stack([ca, sa, cv, sv], -1)
    du = np.stack([-sa, ca, z, z], -1)
    dv = np.stack([z, z, -sv, cv], -1)
    duu = np.stack([-ca, -sa, z, z], -1)
    dvv = np.stack([z, z, -cv, -sv], -1)
    zero = np.zeros_like(psi)
    return (psi, np.stack([du, dv], -2),
            np.stack([np.stack([duu, zero], -2), np.stack([zero, dvv], -2)], -3))


TORUS_DOMAIN = ParameterDomain((0.0, 0.0), (TWO_PI, TWO_PI), (True, True))


def clifford_torus(b=1.0, name="clifford_torus"):
    """Minimal flat torus R/sqrt(2) (cos u, sin u, cos v, sin v) in S^3(b)."""
    space = ModelSpace(3, b)
    R = space.radius
    fn, jet = _lift(np.zeros(4), R / math.sqrt(2.0), np.eye(4), _torus_chart)
    return ParametricImmersion(
        space, TORUS_DOMAIN, fn, jet, [], name,
        metadata={"closed": True, "connected": True, "minimal": True},
    )


def torus_of_revolution(R=2.0, r=1.0, name="torus_of_revolution"):
    if not 0 < r < R:
        raise ValueError("need 0 < r < R")
    space = ModelSpace(3, 0.0)

    def jet(u):
        a, v = u[..., 0], u[..., 1]
        ca, sa, cv, sv = np.cos(a), np.sin(a), np.cos(v), np.sin(v)
        rho = R + r * cv
        z = np.zeros_like(a)
        f = np.stack([rho * ca, rho * sa, r * sv], -1)
        fu = np.stack([-rho * sa, rho * ca, z], -1)
        fv = np.stack([-r * sv * ca, -r * sv * sa, r * cv], -1)
        fuu = np.stack([-rho * ca, -rho * sa, z], -1)
        fuv = np.stack([r * sv * sa, -r * sv * ca, z], -1)
        fvv = np.stack([-r * cv * ca, -r * cv * sa, -r * sv], -1)
        d2 = np.stack([np.stack([fuu, fuv], -2), np.stack([fuv, fvv], -2)], -3)
        return f, np.stack([fu, fv], -2), d2

    return ParametricImmersion(
        space, TORUS_DOMAIN, lambda u: jet(u)[0], jet, [], name,
        metadata={"closed": True, "connected": True, "minimal": False, "center": [0.0, 0.0, 0.0]},
    )


def geodesic_disk(space: ModelSpace, a: float, name="geodesic_disk"):
    """Totally geodesic disk of radius a through the origin, spanned by e1, e2."""
    if a <= 0:
        raise ValueError("radius must be positive")
    if space.b > 0 and a >= math.pi / (2 * math.sqrt(space.b)):
        raise ValueError("disk radius must stay below a quarter great circle")
    o = space.origin
    E = _tangent_basis(space, 2)
    b = space.b

    def jet(u):
        s, t = u[..., 0], u[..., 1]
        c, sn = cs_sn(b, s)
        w = np.cos(t)[..., None] * E[0] + np.sin(t)[..., None] * E[1]
        wt = -np.sin(t)[..., None] * E[0] + np.cos(t)[..., None] * E[1]
        f = c[..., None] * o + sn[..., None] * w
        fs = (-b * sn)[..., None] * o + c[..., None] * w
        ft = sn[..., None] * wt
        fss = -b * f
        fst = c[..., None] * wt
        ftt = -sn[..., None] * w
        d2 = np.stack([np.stack([fss, fst], -2), np.stack([fst, ftt], -2)], -3)
        return f, np.stack([fs, ft], -2), d2

    dom = ParameterDomain((0.0, 0.0), (a, TWO_PI), (False, True),
                          poles=((True, False), (False, False)), boundary=((0, 1),))
    return ParametricImmersion(
        space, dom, lambda u: jet(u)[0], jet, [(o, 1)], name,
        metadata={"closed": False, "connected": True, "minimal": True, "center": o.tolist()},
    )


def flat_disk(a=1.0, name="flat_disk"):
    return geodesic_disk(ModelSpace(3, 0.0), a, name)


def flat_square(side=1.0, name="flat_square"):
    """(u, v) -> (u, v, 0) on [0, side]^2 with all four sides as boundary."""
    space = ModelSpace(3, 0.0)

    def jet(u):
        u = np.asarray(u, float)
        f = np.concatenate([u, np.zeros(u.shape[:-1] + (1,))], -1)
        df = np.broadcast_to(np.eye(2, 3), u.shape[:-1] + (2, 3)).copy()
        return f, df, np.zeros(u.shape[:-1] + (2, 2, 3))

    dom = ParameterDomain((0.0, 0.0), (side, side), (False, False),
                          boundary=((0, 0), (0, 1), (1, 0), (1, 1)))
    return ParametricImmersion(space, dom, lambda u: jet(u)[0], jet, [], name,
                               metadata={"closed": False, "connected": True, "minimal": True})


def geodesic_circle(space: ModelSpace, rho: float, name="geodesic_circle"):
    """Circle of geodesic radius rho about the origin, a closed curve (m = 1)."""
    o = space.origin
    E = _tangent_basis(space, 2)
    c, s = cs_sn(space.b, rho)
    c, s = float(c), float(s)

    def jet(u):
        t = np.asarray(u, float)[..., 0]
        w = np.cos(t)[..., None] * E[0] + np.sin(t)[..., None] * E[1]
        wt = -np.sin(t)[..., None] * E[0] + np.cos(t)[..., None] * E[1]
        return c * o + s * w, (s * wt)[..., None, :], (-s * w)[..., None, None, :]

    dom = ParameterDomain((0.0,), (TWO_PI,), (True,))
    return ParametricImmersion(
        space, dom, lambda u: jet(u)[0], jet, [], name,
        metadata={"closed": True, "connected": True,
                  "minimal": space.b > 0 and abs(rho * math.sqrt(space.b) - math.pi / 2) < 1e-15},
    )


def tangent_sphere_pair(R=1.0, name="tangent_sphere_pair"):
    """Two spheres of radius R touching at the origin of R^3."""
    top = round_sphere(R, (0.0, 0.0, R), name + "/upper")
    bottom = round_sphere(R, (0.0, 0.0, -R), name + "/lower")
    contact = np.zeros(3)
    for imm in (top, bottom):
        imm.multiplicity_hints = [(contact, 1)]
        imm.metadata.update({"connected": True, "contact": contact.tolist()})
    return [top, bottom]


def hyperbolic_translation(space: ModelSpace, t: float) -> Isometry:
    """Boost along the first spatial axis (identity shift)."""
    L = np.eye(space.dim)
    L[0, 0] = L[1, 1] = math.cosh(t)
    L[0, 1] = L[1, 0] = math.sinh(t)
    return Isometry(L, np.zeros(space.dim))
