import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from regvarlab.envelope import (abp_constant, abp_measure_check, abp_ring_radii, brute_force_envelope,
                                concave_envelope, upper_hull_1d)
from regvarlab.errors import NoContactPoint
from regvarlab.kernels import KernelClass
from regvarlab.regvar import KernelProfile


def lp_envelope(points, u):
    """Independent oracle: Gamma(x_i) = max sum w_j u_j^+ over convex weights
    with sum w_j x_j = x_i."""
    pts = np.asarray(points, dtype=float).reshape(len(u), -1)
    v = np.maximum(u, 0.0)
    A = np.vstack([pts.T, np.ones(len(v))])
    out = []
    for p in pts:
        res = linprog(-v, A_eq=A, b_eq=np.append(p, 1.0), bounds=(0, None), method="highs")
        out.append(-res.fun)
    return np.array(out)


def grid_2d(k):
    ax = np.linspace(-1, 1, k)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel()])


def test_spike_tent():
    x = np.arange(-3.0, 4.0)
    u = (x == 0).astype(float)
    env = concave_envelope(x, u)
    assert np.allclose(env.gamma, np.maximum(0.0, 1.0 - np.abs(x) / 3.0))
    assert env.contact.tolist() == [3]


def test_concave_function_is_its_own_envelope():
    x = np.linspace(-1, 1, 33)
    u = 1.0 - x**2
    env = concave_envelope(x, u)
    assert np.allclose(env.gamma, u, atol=1e-15)
    assert env.contact.tolist() == list(range(1, 32))


@given(st.integers(0, 10_000), st.integers(2, 33))
def test_envelope_1d_matches_lp_oracle(seed, m):
    rng = np.random.default_rng(seed)
    x = np.sort(rng.uniform(-1, 1, m))
    x = np.unique(x)
    u = rng.normal(size=len(x))
    env = concave_envelope(x, u)
    assert np.allclose(env.gamma, lp_envelope(x, u), atol=1e-9)
    assert np.all(env.gamma >= np.maximum(u, 0) - 1e-15)


@given(st.integers(0, 10_000), st.integers(2, 6))
def test_envelope_2d_matches_lp_oracle(seed, k):
    rng = np.random.default_rng(seed)
    pts = grid_2d(k)
    u = rng.normal(size=len(pts))
    env = concave_envelope(pts, u)
    assert np.allclose(env.gamma, lp_envelope(pts, u), atol=1e-9)


@given(st.integers(0, 10_000))
def test_brute_force_agrees_with_lp(seed):
    rng = np.random.default_rng(seed)
    pts = grid_2d(4)
    u = rng.normal(size=len(pts))
    assert np.allclose(brute_force_envelope(pts, u), lp_envelope(pts, u), atol=1e-9)


@given(st.integers(0, 10_000))
def test_envelope_concave_along_grid(seed):
    rng = np.random.default_rng(seed)
    x = np.linspace(-1, 1, 21)
    env = concave_envelope(x, rng.normal(size=21))
    assert np.all(np.diff(env.gamma, 2) <= 1e-12)


@given(st.integers(0, 10_000))
def test_supergradients_support_envelope(seed):
    rng = np.random.default_rng(seed)
    pts = grid_2d(5)
    u = rng.normal(size=len(pts))
    env = concave_envelope(pts, u)
    for idx, g in zip(env.contact, env.supergradients):
        plane = env.gamma[idx] + (pts - pts[idx]) @ g
        assert np.all(plane >= env.gamma - 1e-7)


def test_flat_and_negative_inputs():
    x = np.linspace(0, 1, 5)
    env = concave_envelope(x, -np.ones(5))
    assert np.all(env.gamma == 0) and env.contact.size == 0
    env = concave_envelope(grid_2d(3), np.ones(9))
    assert np.allclose(env.gamma, 1.0) and env.contact.size == 9


def test_upper_hull_drops_collinear_points():
    assert upper_hull_1d(np.arange(4.0), np.array([0.0, 1.0, 2.0, 3.0])).tolist() == [0, 3]


def test_supergradient_at_missing_node():
    env = concave_envelope(np.arange(-3.0, 4.0), (np.arange(-3, 4) == 0).astype(float))
    with pytest.raises(NoContactPoint):
        env.supergradient_at(0)


def test_ring_radii():
    r = abp_ring_radii(0.5, 1.0 / 32.0, 1.0, 4)
    assert r[0] == pytest.approx(2.0**-6.5, rel=1e-14)
    assert np.allclose(r[1:] / r[:-1], 0.5)
    assert abp_ring_radii(0.5, 1.0 / 32.0, 1.999, 0)[0] < 1e-150


def test_abp_constant_uses_sigma_supremum():
    # sup over sigma of (1 - 2^{-2(2-s)})/(2-s) is the limit 2 log 2
    s = np.linspace(0.1, 1.999999, 200)
    sup = np.max((1 - 2.0 ** (-2 * (2 - s))) / (2 - s))
    assert sup <= math.log(4.0)
    assert abp_constant(1.0, 1.0, 1.0, 1.0) == pytest.approx(math.log(4.0))


def test_abp_concave_data_has_empty_drop_sets():
    ax = np.linspace(-1, 1, 41)
    u = 1.0 - ax**2
    env = concave_envelope(ax, u)
    kc = KernelClass(KernelProfile(1.0), 1.0, 1.0, 1)
    rep = abp_measure_check(env, 20, 1e-3, kc, 0.3, 1.0, 1.0 / 4.0, k_max=3)
    finite = rep.fractions[np.isfinite(rep.fractions)]
    assert np.all(finite == 0.0)
    assert rep.k >= 0
    with pytest.raises(NoContactPoint):
        abp_measure_check(concave_envelope(ax, -u), 20, 1.0, kc, 0.3, 1.0, 0.25)
