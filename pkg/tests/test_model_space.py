import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from varigeom.model_space import CutLocusError, GeometryError, ModelSpace

SPACES = [ModelSpace(3, 0.0), ModelSpace(3, 1.0), ModelSpace(3, -1.0), ModelSpace(2, 4.0), ModelSpace(4, -0.25)]
seeds = st.integers(0, 2**31 - 1)


def _pair(space, rng):
    p = space.random_point(rng)
    v = space.random_tangent(rng, p)
    nv = float(space.norm(v))
    if space.b > 0:
        v *= rng.uniform(0.05, 0.9) * space.injectivity_radius / nv
    return p, v


def test_distance_examples():
    E = ModelSpace(3, 0.0)
    assert E.distance([0, 0, 0], [3, 4, 0]) == 5.0
    S = ModelSpace(3, 1.0)
    p = np.array([1.0, 0, 0, 0])
    assert S.distance(p, p) == 0.0
    assert S.distance(p, -p) == pytest.approx(math.pi, abs=1e-15)


def test_exp_quarter_circle_reaches_equator():
    S2 = ModelSpace(2, 1.0)
    north = np.array([0.0, 0.0, 1.0])
    q = S2.exp(north, np.array([math.pi / 2, 0.0, 0.0]))
    assert np.allclose(q, [1.0, 0.0, 0.0], atol=1e-15)
    assert S2.distance(north, q) == pytest.approx(math.pi / 2, abs=1e-15)


@pytest.mark.parametrize("space", SPACES, ids=repr)
def test_exp_of_zero_and_flat_log(space):
    rng = np.random.default_rng(1)
    p = space.random_point(rng)
    assert np.allclose(space.exp(p, np.zeros_like(p)), p)
    assert np.allclose(space.log(p, p), 0.0)


def test_origin_and_dimensions():
    for s in SPACES:
        assert s.dim == s.n + (s.b != 0)
        assert abs(s.residual(s.origin)) < 1e-15
    assert ModelSpace(3, 4.0).injectivity_radius == pytest.approx(math.pi / 2)
    assert ModelSpace(3, -1.0).injectivity_radius == math.inf
    with pytest.raises(GeometryError):
        ModelSpace(1, 0.0)


@pytest.mark.parametrize("space", SPACES, ids=repr)
def test_exp_preserves_quadric_on_many_inputs(space):
    rng = np.random.default_rng(7)
    p = space.random_point(rng, 10_000)
    v = space.random_tangent(rng, p, scale=2.0)
    q = space.exp(p, v)
    # relative to |x|^2: on the hyperboloid coordinates grow like e^r and
    # <x,x> can only be resolved to a few ulps of the coordinate size
    scale = 1.0 if space.b == 0 else abs(space.b)
    rel = np.abs(space.residual(q)) * scale / np.maximum(1.0, np.sum(q * q, axis=-1) * scale)
    assert np.max(rel) < 1e-12


@pytest.mark.parametrize("space", SPACES, ids=repr)
def test_exp_log_round_trip_1000_pairs(space):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(1000):
        p = space.random_point(rng)
        q = space.random_point(rng)
        if space.b > 0 and space.distance(p, q) > 0.95 * space.injectivity_radius:
            continue
        v = space.log(p, q)
        worst = max(worst, float(np.max(np.abs(space.exp(p, v) - q))) / max(1.0, float(np.max(np.abs(q)))))
        assert float(space.norm(v)) == pytest.approx(float(space.distance(p, q)), rel=1e-9, abs=1e-12)
    assert worst < 1e-9


@settings(max_examples=60, deadline=None)
@given(seed=seeds, idx=st.integers(0, len(SPACES) - 1))
def test_distance_of_exp_is_speed(seed, idx):
    space = SPACES[idx]
    rng = np.random.default_rng(seed)
    p, v = _pair(space, rng)
    assert float(space.distance(p, space.exp(p, v))) == pytest.approx(float(space.norm(v)), rel=1e-10, abs=1e-13)


@settings(max_examples=60, deadline=None)
@given(seed=seeds, idx=st.integers(0, len(SPACES) - 1))
def test_distance_symmetry_and_triangle(seed, idx):
    space = SPACES[idx]
    rng = np.random.default_rng(seed)
    x, y, z = (space.random_point(rng) for _ in range(3))
    dxy, dyz, dxz = space.distance(x, y), space.distance(y, z), space.distance(x, z)
    assert dxy == pytest.approx(float(space.distance(y, x)), abs=1e-10)
    assert dxz <= dxy + dyz + 1e-10
    if space.b > 0:
        assert dxy <= space.injectivity_radius + 1e-12


def test_log_at_antipode_raises():
    S = ModelSpace(3, 1.0)
    p = np.array([1.0, 0, 0, 0])
    with pytest.raises(CutLocusError):
        S.log(p, -p)


def test_grad_dist_examples():
    E = ModelSpace(3, 0.0)
    assert np.allclose(E.grad_dist(np.zeros(3), np.array([2.0, 0, 0])), [1, 0, 0])
    with pytest.raises(GeometryError):
        E.grad_dist(np.zeros(3), np.zeros(3))
    # on the sphere: the normalised projection of -p onto T_q
    S = ModelSpace(3, 1.0)
    rng = np.random.default_rng(5)
    for _ in range(20):
        p, q = S.random_point(rng), S.random_point(rng)
        w = S.project_tangent(q, -p)
        assert np.allclose(S.grad_dist(p, q), w / np.linalg.norm(w), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, idx=st.integers(0, len(SPACES) - 1))
def test_grad_dist_directional_derivative_is_one(seed, idx):
    space = SPACES[idx]
    rng = np.random.default_rng(seed)
    p, v = _pair(space, rng)
    q = space.exp(p, 0.5 * v)
    if float(space.distance(p, q)) < 1e-3:
        return
    g = space.grad_dist(p, q)
    # the Lorentz norm loses digits in proportion to the coordinate size
    assert abs(float(space.norm(g)) - 1.0) <= 1e-14 * max(1.0, float(np.sum(q * q)))
    h = 1e-5
    fd = (space.distance(p, space.exp(q, h * g)) - space.distance(p, space.exp(q, -h * g))) / (2 * h)
    assert float(fd) == pytest.approx(1.0, abs=1e-6)


def _frame(space, rng, q):
    return space.orthonormal_frame(q, rng.standard_normal((2, space.dim)))


def test_div_T_examples():
    E = ModelSpace(3, 0.0)
    rng = np.random.default_rng(0)
    for _ in range(10):
        p, q = rng.standard_normal(3), rng.standard_normal(3)
        assert E.div_T_r_grad_r(p, q, _frame(E, rng, q)) == pytest.approx(2.0, abs=1e-13)
    S = ModelSpace(3, 1.0)
    p = np.array([1.0, 0, 0, 0])
    q = S.exp(p, np.array([0, math.pi / 4, 0, 0]))
    T = np.array([[0, 0, 1.0, 0], [0, 0, 0, 1.0]])  # orthogonal to grad r
    assert S.div_T_r_grad_r(p, q, T) == pytest.approx(math.pi / 2, abs=1e-14)


def _hess_fd(space, p, q, e, h):
    """Second derivative of r^2/2 along the geodesic through q in direction e."""
    f = lambda t: 0.5 * float(space.distance(p, space.exp(q, t * e))) ** 2
    return (f(h) - 2 * f(0.0) + f(-h)) / h**2


@pytest.mark.parametrize("space", [ModelSpace(3, 1.0), ModelSpace(3, -1.0)], ids=repr)
def test_fd_hessian_converges_at_second_order(space):
    """Closed-form Div_T(r grad r) = sum of Hess(r^2/2)(e_i, e_i) against finite differences."""
    rng = np.random.default_rng(11)
    ratios = []
    for _ in range(5):
        p = space.random_point(rng)
        v = space.random_tangent(rng, p)
        v *= 1.2 / float(space.norm(v))
        q = space.exp(p, v)
        T = _frame(space, rng, q)
        exact = float(space.div_T_r_grad_r(p, q, T))
        errs = []
        for h in (4e-2, 2e-2):
            errs.append(abs(sum(_hess_fd(space, p, q, T[i], h) for i in range(2)) - exact))
        ratios.append(errs[0] / errs[1])
    assert min(ratios) >= 3.5


@pytest.mark.parametrize("b", [1.0, 4.0, -1.0, -0.3])
def test_div_T_comparison_bounds(b):
    from varigeom import comparison as cmp

    space = ModelSpace(3, b)
    rng = np.random.default_rng(2)
    for _ in range(200):
        p, q = space.random_point(rng), space.random_point(rng)
        r = float(space.distance(p, q))
        if r < 1e-6 or (b > 0 and r > 0.999 * space.injectivity_radius):
            continue
        val = float(space.div_T_r_grad_r(p, q, _frame(space, rng, q)))
        if b > 0:
            assert val >= 2 * float(cmp.a_b(b, r)) - 1e-10
        else:
            assert val >= 2.0 - 1e-10


def test_isometries_preserve_distance():
    rng = np.random.default_rng(4)
    for space in SPACES:
        iso = space.random_isometry(rng)
        p, q = space.random_point(rng, 50), space.random_point(rng, 50)
        assert np.allclose(space.distance(iso(p), iso(q)), space.distance(p, q), atol=1e-10)
        assert np.max(np.abs(space.residual(iso(p)))) < 1e-10


@pytest.mark.parametrize("space", SPACES, ids=repr)
def test_exp_offset_matches_exp_without_cancellation(space):
    rng = np.random.default_rng(11)
    p = space.random_point(rng, 200)
    v = space.random_tangent(rng, p, scale=0.3)
    assert np.allclose(space.exp_offset(p, v), space.exp(p, v) - p, atol=1e-12 * (1 + np.abs(p).max()))
    # for tiny v the offset keeps full relative precision: exp_p(v) - p = v + O(|v|^2)
    tiny = 1e-9 * v
    off = space.exp_offset(p, tiny)
    lead = np.linalg.norm(off - tiny, axis=-1) / np.linalg.norm(tiny, axis=-1)
    assert np.all(lead < 1e-8 * (1 + np.abs(p).max(axis=-1)))
