"""Closed-form geometry of the constant-curvature model spaces.

Points are plain numpy arrays in the flat ambient space of the quadric
embedding; the last axis holds coordinates, leading axes broadcast.

* ``b > 0``: sphere ``{<x,x> = 1/b}`` in Euclidean R^(n+1)
* ``b < 0``: upper sheet ``{<x,x>_L = 1/b, x_0 > 0}`` in Minkowski R^(1,n)
* ``b = 0``: R^n itself
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import comparison

QUADRIC_TOL = 1e-10
CLAMP_TOL = 1e-12


class GeometryError(ValueError):
    """Invalid point, vector, or frame for a model space."""


class CutLocusError(GeometryError):
    """Inverse exponential requested at (or across) the cut locus."""


@dataclass(frozen=True)
class Isometry:
    """Ambient affine map ``x -> linear @ x + shift`` preserving the space."""

    linear: np.ndarray
    shift: np.ndarray

    def __call__(self, x):
        return np.asarray(x) @ self.linear.T + self.shift

    def push(self, v):
        """Act on tangent vectors (or any ambient direction)."""
        return np.asarray(v) @ self.linear.T


@dataclass(frozen=True)
class ModelSpace:
    n: int
    b: float = 0.0

    def __post_init__(self):
        if self.n < 2:
            raise GeometryError("model space dimension must be at least 2")
        object.__setattr__(self, "b", float(self.b))

    def __repr__(self):
        kind = "R" if self.b == 0 else ("S" if self.b > 0 else "H")
        return f"{kind}^{self.n}(b={self.b:g})"

    # -- ambient structure -------------------------------------------------

    @property
    def dim(self) -> int:
        """Number of ambient coordinates."""
        return self.n if self.b == 0 else self.n + 1

    @property
    def radius(self) -> float:
        return math.inf if self.b == 0 else 1.0 / math.sqrt(abs(self.b))

    @property
    def injectivity_radius(self) -> float:
        return math.pi / math.sqrt(self.b) if self.b > 0 else math.inf

    @property
    def origin(self) -> np.ndarray:
        o = np.zeros(self.dim)
        if self.b != 0:
            o[0] = self.radius
        return o

    def inner(self, x, y):
        """Bilinear form of the ambient space, contracted over the last axis."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        s = np.sum(x * y, axis=-1)
        if self.b < 0:
            s = s - 2.0 * x[..., 0] * y[..., 0]
        return s

    def norm(self, v):
        return np.sqrt(np.maximum(self.inner(v, v), 0.0))

    def residual(self, x):
        """Defining-equation residual ``<x,x> - 1/b`` (zero for flat space)."""
        x = np.asarray(x, dtype=float)
        if self.b == 0:
            return np.zeros(x.shape[:-1])
        return self.inner(x, x) - 1.0 / self.b

    def check_point(self, x, tol=QUADRIC_TOL):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise GeometryError(f"expected {self.dim} coordinates, got {x.shape[-1]}")
        if not np.all(np.isfinite(x)):
            raise GeometryError("point has non-finite coordinates")
        if self.b != 0:
            scale = np.maximum(1.0, np.sum(x * x, axis=-1) * abs(self.b))
            if np.any(np.abs(self.residual(x)) * abs(self.b) > tol * scale):
                raise GeometryError("point does not lie on the model space quadric")
            if self.b < 0 and np.any(x[..., 0] <= 0):
                raise GeometryError("point lies on the lower hyperboloid sheet")
        return x

    def project_point(self, x):
        """Radially rescale an ambient point onto the quadric."""
        x = np.asarray(x, dtype=float)
        if self.b > 0:
            return x * (self.radius / np.linalg.norm(x, axis=-1))[..., None]
        if self.b < 0:
            x = x.copy()
            x[..., 0] = np.sqrt(self.radius**2 + np.sum(x[..., 1:] ** 2, axis=-1))
        return x

    def project_tangent(self, x, v):
        """Form-orthogonal projection of ambient vectors onto T_x."""
        v = np.asarray(v, dtype=float)
        if self.b == 0:
            return v
        return v - (self.b * self.inner(x, v))[..., None] * np.asarray(x)

    def check_tangent(self, x, v, tol=1e-10):
        if self.b != 0:
            off = np.abs(self.inner(x, v)) * math.sqrt(abs(self.b))
            if np.any(off > tol * np.maximum(1.0, self.norm(v))):
                raise GeometryError("vector is not tangent at its base point")
        return v

    # -- geodesics -----------------------------------------------------------

    def distance(self, p, q):
        """Geodesic distance, well conditioned at both short and long range."""
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        d = q - p
        if self.b == 0:
            return np.linalg.norm(d, axis=-1)
        R = self.radius
        if self.b > 0:
            chord = np.linalg.norm(d, axis=-1)
            co = np.linalg.norm(p + q, axis=-1)
            return 2.0 * R * np.arctan2(chord, co)
        chord2 = self.inner(d, d)
        if np.any(chord2 < -CLAMP_TOL * np.maximum(1.0, np.sum(d * d, axis=-1))):
            raise GeometryError("timelike chord: points not on the same sheet")
        return 2.0 * R * np.arcsinh(np.sqrt(np.maximum(chord2, 0.0)) / (2.0 * R))

    def exp(self, p, v):
        """Endpoint of the geodesic from p with initial velocity v."""
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.b == 0:
            return p + v
        R = self.radius
        nv = self.norm(v)[..., None]
        s = nv / R
        safe = np.where(s > 0, s, 1.0)
        if self.b > 0:
            sinc = np.where(s > 1e-8, np.sin(safe) / safe, 1.0 - s * s / 6.0)
            out = np.cos(s) * p + sinc * v
        else:
            sinc = np.where(s > 1e-8, np.sinh(safe) / safe, 1.0 + s * s / 6.0)
            out = np.cosh(s) * p + sinc * v
        return self.project_point(out)

    def exp_offset(self, p, v):
        """exp_p(v) - p, computed without cancellation for short v."""
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.b == 0:
            return v.copy()
        R = self.radius
        s = self.norm(v)[..., None] / R
        safe = np.where(s > 0, s, 1.0)
        # cos s - 1 = -2 sin^2(s/2), cosh s - 1 = 2 sinh^2(s/2)
        if self.b > 0:
            sinc = np.where(s > 1e-8, np.sin(safe) / safe, 1.0 - s * s / 6.0)
            return -2.0 * np.sin(0.5 * s) ** 2 * p + sinc * v
        sinc = np.where(s > 1e-8, np.sinh(safe) / safe, 1.0 + s * s / 6.0)
        return 2.0 * np.sinh(0.5 * s) ** 2 * p + sinc * v

    def log(self, p, q):
        """Inverse of exp inside the injectivity radius."""
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        if self.b == 0:
            return q - p
        if self.b > 0 and np.any(self.b * self.inner(p, q) <= -1.0 + CLAMP_TOL):
            raise CutLocusError("antipodal points have no unique logarithm")
        d = self.distance(p, q)[..., None]
        u = self.project_tangent(p, q - p)
        nu = self.norm(u)[..., None]
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(nu > 0, u * (d / np.where(nu > 0, nu, 1.0)), 0.0)
        return out

    def grad_dist(self, p, q):
        """Gradient at q of r = d(p, .), a unit tangent vector at q."""
        d = np.asarray(self.distance(p, q))
        if np.any(d <= 0):
            raise GeometryError("distance gradient is singular at the base point")
        return -self.log(q, p) / d[..., None]

    def radial_unit(self, p, q, eps=0.0):
        """Like grad_dist but returns zero vectors where d(p, q) <= eps."""
        d = np.asarray(self.distance(p, q))
        lg = self.log(q, p)
        good = (d > eps)[..., None]
        return np.where(good, -lg / np.where(good, d[..., None], 1.0), 0.0), d

    def div_T_r_grad_r(self, p, q, frame):
        """Tangential divergence of r grad r at q along the plane spanned by frame.

        ``frame`` has shape (..., m, dim) and must be form-orthonormal. The
        value is |grad^T r|^2 + r ct_b(r) (m - |grad^T r|^2), exact in the
        model space.
        """
        q = np.asarray(q, dtype=float)
        frame = np.asarray(frame, dtype=float)
        m = frame.shape[-2]
        gram = self.inner(frame[..., :, None, :], frame[..., None, :, :])
        if np.any(np.abs(gram - np.eye(m)) > 1e-8):
            raise GeometryError("frame is not orthonormal")
        grad, r = self.radial_unit(p, q)
        if np.any(r <= 0):
            raise GeometryError("divergence of r grad r requested at the base point")
        if self.b > 0 and np.any(r >= self.injectivity_radius):
            raise CutLocusError("point lies on the cut locus")
        tang = np.sum(self.inner(frame, grad[..., None, :]) ** 2, axis=-1)
        rc = comparison.r_cot(self.b, r)
        return tang + rc * (m - tang)

    # -- random sampling / isometries -------------------------------------

    def random_point(self, rng, size=None, scale=1.0):
        shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
        if self.b == 0:
            return scale * rng.standard_normal(shape + (self.dim,))
        if self.b > 0:
            return self.project_point(rng.standard_normal(shape + (self.dim,)))
        v = np.zeros(shape + (self.dim,))
        v[..., 1:] = scale * self.radius * rng.standard_normal(shape + (self.n,))
        return self.project_point(v)

    def random_tangent(self, rng, x, scale=1.0):
        x = np.asarray(x, dtype=float)
        v = self.project_tangent(x, rng.standard_normal(x.shape))
        return scale * v

    def orthonormal_frame(self, x, vectors):
        """Gram--Schmidt (in the space metric) of vectors projected to T_x."""
        x = np.asarray(x, dtype=float)
        vectors = self.project_tangent(x[..., None, :], vectors)
        out = []
        for i in range(vectors.shape[-2]):
            v = vectors[..., i, :]
            for e in out:
                v = v - self.inner(v, e)[..., None] * e
            nrm = self.norm(v)
            if np.any(nrm < 1e-12):
                raise GeometryError("degenerate frame")
            out.append(v / nrm[..., None])
        return np.stack(out, axis=-2)

    def random_isometry(self, rng, boost=1.0) -> Isometry:
        from scipy.stats import ortho_group

        if self.b >= 0:
            Q = ortho_group.rvs(self.dim, random_state=rng)
            shift = rng.standard_normal(self.dim) if self.b == 0 else np.zeros(self.dim)
            return Isometry(Q, shift)
        Q = np.eye(self.dim)
        Q[1:, 1:] = ortho_group.rvs(self.n, random_state=rng)
        t = boost * rng.uniform(-1, 1)
        B = np.eye(self.dim)
        B[0, 0] = B[1, 1] = math.cosh(t)
        B[0, 1] = B[1, 0] = math.sinh(t)
        Q2 = np.eye(self.dim)
        Q2[1:, 1:] = ortho_group.rvs(self.n, random_state=rng)
        return Isometry(Q2 @ B @ Q, np.zeros(self.dim))


def euclidean(n: int = 3) -> ModelSpace:
    return ModelSpace(n, 0.0)


def sphere(n: int = 3, b: float = 1.0) -> ModelSpace:
    return ModelSpace(n, b)


def hyperbolic(n: int = 3, b: float = -1.0) -> ModelSpace:
    return ModelSpace(n, b)


# module-level aliases matching the operation names
def distance(space: ModelSpace, p, q):
    return space.distance(space.check_point(p), space.check_point(q))


def exp(space: ModelSpace, p, v):
    return space.exp(space.check_point(p), space.check_tangent(p, v))


def log(space: ModelSpace, p, q):
    return space.log(space.check_point(p), space.check_point(q))


def grad_dist(space: ModelSpace, p, q):
    return space.grad_dist(space.check_point(p), space.check_point(q))


def div_T_r_grad_r(space: ModelSpace, p, q, frame):
    return space.div_T_r_grad_r(space.check_point(p), space.check_point(q), frame)
