import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from regvarlab.errors import DomainError, EmptyFamily, UnboundedField
from regvarlab.fields import FieldFunction, bump, constant, gaussians, polynomial, random_gaussians
from regvarlab.kernels import KernelClass, KernelSpec
from regvarlab.nonlocal_ops import (OperatorFamily, QuadratureConfig, infsup_apply, inner_fit,
                                    inner_remainder_bound, linear_apply, operator_report, pucci_minus,
                                    pucci_from_samples, pucci_plus, pucci_truncated, sample,
                                    second_difference, tail_remainder_bound)
from regvarlab.regvar import KernelProfile, SlowlyVaryingSpec

Q = QuadratureConfig()


def kclass(sigma=1.0, family="Constant", beta=0.0, lam=1.0, Lam=1.0, dim=1):
    return KernelClass(KernelProfile(sigma, SlowlyVaryingSpec(family, beta)), lam, Lam, dim)


def seeded_field(seed, dim=1):
    return FieldFunction.analytic(random_gaussians(np.random.default_rng(seed), dim), dim)


def test_second_difference_examples():
    lin = FieldFunction.analytic(polynomial([0.0, 1.0]))
    sq = FieldFunction.analytic(polynomial([0.0, 0.0, 1.0]))
    c = FieldFunction.analytic(constant(3.0))
    assert second_difference(lin, [0.7], 0.4) == pytest.approx(0.0, abs=1e-15)
    assert second_difference(sq, [0.3], 0.2) == pytest.approx(0.08, rel=1e-12)
    assert second_difference(c, [0.1], np.linspace(-2, 2, 5)) == pytest.approx(np.zeros(5))


@given(st.integers(0, 10_000), st.floats(-1.0, 1.0), st.floats(-2.0, 2.0))
def test_second_difference_even_in_y(seed, x, y):
    u = seeded_field(seed)
    assert second_difference(u, [x], y) == pytest.approx(second_difference(u, [x], -y), abs=1e-15)


def test_constant_field_gives_zero():
    u = FieldFunction.analytic(constant(2.5))
    kc = kclass(1.3, "LogPow", 1.0, Lam=2.0)
    assert pucci_plus(u, [0.2], kc) == 0.0
    assert pucci_minus(u, [0.2], kc) == 0.0
    assert linear_apply(u, [0.2], kc.member("RadialBlend")) == 0.0
    assert pucci_truncated(u, [0.2], kc) == (0.0, 0.0)


@pytest.mark.parametrize("dim", [1, 2])
@pytest.mark.parametrize("sigma", [0.5, 1.0, 1.5, 1.9])
def test_bump_closed_form(dim, sigma):
    # mu(0, y) = -2|y|^2 inside the unit ball and -2 outside
    area = 2.0 if dim == 1 else 2.0 * math.pi
    exact = area * (-2.0 - 2.0 * (2.0 - sigma) / sigma)
    u = FieldFunction.analytic(bump(), dim)
    kc = kclass(sigma, dim=dim)
    x = np.zeros(dim)
    assert pucci_plus(u, x, kc) == pytest.approx(exact, rel=1e-9)
    assert pucci_minus(u, x, kc) == pytest.approx(exact, rel=1e-9)


def test_bump_examples():
    u = FieldFunction.analytic(bump())
    kc = kclass(1.0)
    assert pucci_plus(u, [0.0], kc) == pytest.approx(-8.0, abs=1e-10)
    assert pucci_minus(u, [0.0], kc) == pytest.approx(-8.0, abs=1e-10)
    plus, minus = pucci_truncated(u, [0.0], kc, radius=1.0)
    assert plus == pytest.approx(-4.0, abs=1e-10)
    assert minus == pytest.approx(-4.0, abs=1e-10)
    assert pucci_plus(u, [0.0], kclass(1.0, lam=2.0, Lam=2.0)) == pytest.approx(-16.0)


def test_two_dimensional_bump_value():
    u = FieldFunction.analytic(bump(), 2)
    assert pucci_plus(u, [0.0, 0.0], kclass(1.5, dim=2)) == pytest.approx(math.pi * (-4 - 4 / 3), rel=1e-9)


# scipy oracle: quad in t = log|y| over [1e-5, 1e12] on 600 panels, plus the exact
# second-derivative model on |y| < 1e-5
GAUSS_ORACLE = {1.0: -67.9494489993613, 1.5: -42.00997893985665,
                1.9: -24.284294875129227, 1.99: -19.28941559302151}


@pytest.mark.parametrize("sigma", sorted(GAUSS_ORACLE))
def test_pucci_minus_gaussian_oracle(sigma):
    u = FieldFunction.analytic(gaussians([[0.3]], [0.4], [1.0]))
    kc = kclass(sigma, "LogSqPow", 1.0, lam=1.0, Lam=2.0)
    assert pucci_minus(u, [0.125], kc) == pytest.approx(GAUSS_ORACLE[sigma], rel=1e-7)


def test_refinement_order():
    u = FieldFunction.analytic(gaussians([[0.3]], [0.4], [1.0]))
    for sigma in (1.0, 1.99):
        kc = kclass(sigma, "LogSqPow", 1.0, lam=1.0, Lam=2.0)
        errs = [abs(pucci_minus(u, [0.125], kc, QuadratureConfig(inner_radius=2.0**-k)) - GAUSS_ORACLE[sigma])
                for k in (4, 5, 6, 7)]
        orders = np.log2(np.array(errs[:-1]) / errs[1:])
        assert np.all(orders >= 1.0)


@given(st.integers(0, 10_000), st.floats(-0.8, 0.8), st.floats(0.3, 1.95))
def test_duality(seed, x, sigma):
    u = seeded_field(seed)
    kc = kclass(sigma, "LogSqPow", -1.0, lam=0.5, Lam=2.0)
    lhs = pucci_plus(u.scaled(-1.0), [x], kc)
    rhs = -pucci_minus(u, [x], kc)
    assert lhs == pytest.approx(rhs, abs=1e-12 * max(1.0, abs(rhs)))


@given(st.integers(0, 10_000), st.floats(0.0, 5.0), st.floats(0.3, 1.95))
def test_positive_homogeneity_on_shared_nodes(seed, c, sigma):
    u = seeded_field(seed)
    kc = kclass(sigma, "LogPow", 1.0, lam=1.0, Lam=3.0)
    s = sample(u, np.array([0.1]), Q)
    for sign in (1, -1):
        base = pucci_from_samples(s, kc, Q, sign)
        scaled = pucci_from_samples(s.scaled(c), kc, Q, sign)
        assert scaled == pytest.approx(c * base, abs=1e-12 * max(1.0, abs(c * base)))
        flipped = pucci_from_samples(s.scaled(-1.0), kc, Q, -sign)
        assert flipped == pytest.approx(-base, abs=1e-12 * max(1.0, abs(base)))


@given(st.integers(0, 10_000), st.floats(0.0, 5.0))
def test_positive_homogeneity_of_fields(seed, c):
    # re-evaluating c u rounds differently; the inner second differences amplify that
    u = seeded_field(seed)
    kc = kclass(1.2, "LogPow", 1.0, lam=1.0, Lam=3.0)
    for op in (pucci_plus, pucci_minus):
        base = op(u, [0.1], kc)
        assert op(u.scaled(c), [0.1], kc) == pytest.approx(c * base, abs=1e-8 * max(1.0, abs(c * base)))


@given(st.integers(0, 10_000), st.floats(0.3, 1.95), st.floats(0.0, 6.0))
def test_linear_sandwich(seed, sigma, phase):
    u = seeded_field(seed, 2)
    kc = kclass(sigma, "LogSqPow", 1.0, lam=0.5, Lam=2.0, dim=2)
    K = kc.member("RadialBlend", phase)
    rep = operator_report(u, [0.1, -0.2], kc, kernels=(K,))
    slack = 1e-10 * max(1.0, abs(rep["plus"]))
    assert rep["minus"] - slack <= rep["linear0"] <= rep["plus"] + slack


@given(st.integers(0, 10_000), st.integers(0, 10_000))
def test_extremal_operators_subadditive(s1, s2):
    # M+(u + v) <= M+ u + M+ v and M-(u + v) >= M- u + M- v
    u, v = seeded_field(s1), seeded_field(s2)
    w = FieldFunction.analytic(gaussians(
        u.far.params["centers"] + v.far.params["centers"], u.far.params["widths"] + v.far.params["widths"],
        u.far.params["amplitudes"] + v.far.params["amplitudes"]))
    kc = kclass(1.4, lam=1.0, Lam=2.0)
    tol = 1e-8 * (u.sup_bound + v.sup_bound) * 100.0
    assert pucci_plus(w, [0.0], kc) <= pucci_plus(u, [0.0], kc) + pucci_plus(v, [0.0], kc) + tol
    assert pucci_minus(w, [0.0], kc) >= pucci_minus(u, [0.0], kc) + pucci_minus(v, [0.0], kc) - tol


def test_infsup_examples():
    u = seeded_field(3)
    kc = kclass(1.2, "LogPow", 1.0, lam=1.0, Lam=2.5)
    lo, hi = kc.member("ConstLower"), kc.member("ConstUpper")
    assert infsup_apply(u, [0.2], OperatorFamily(((lo,),))) == pytest.approx(linear_apply(u, [0.2], lo), rel=1e-14)
    both = infsup_apply(u, [0.2], ((lo, hi),))
    assert both == pytest.approx(max(linear_apply(u, [0.2], lo), linear_apply(u, [0.2], hi)), rel=1e-14)
    # inf over rows of sup over columns
    inf_sup = infsup_apply(u, [0.2], ((lo,), (hi,)))
    assert inf_sup == pytest.approx(min(linear_apply(u, [0.2], lo), linear_apply(u, [0.2], hi)), rel=1e-14)
    with pytest.raises(EmptyFamily):
        OperatorFamily(())


@given(st.integers(0, 10_000), st.integers(0, 10_000))
def test_infsup_ellipticity(s1, s2):
    # M-(u - v) <= I u - I v <= M+(u - v) for an inf-sup operator over the class
    u, v = seeded_field(s1), seeded_field(s2)
    kc = kclass(1.5, "LogSqPow", 1.0, lam=1.0, Lam=2.0)
    ks = [kc.member("RadialBlend", ph) for ph in (0.0, 2.0, 4.0)]
    fam = OperatorFamily(((ks[0], ks[1]), (ks[2],)))
    d = FieldFunction.analytic(gaussians(
        u.far.params["centers"] + v.far.params["centers"], u.far.params["widths"] + v.far.params["widths"],
        u.far.params["amplitudes"] + [-a for a in v.far.params["amplitudes"]]))
    x = [0.05]
    diff = infsup_apply(u, x, fam) - infsup_apply(v, x, fam)
    tol = 1e-8 * max(1.0, abs(diff), 100.0 * (u.sup_bound + v.sup_bound))
    assert pucci_minus(d, x, kc) - tol <= diff <= pucci_plus(d, x, kc) + tol


@given(st.integers(0, 10_000))
def test_truncation_gap(seed):
    u = seeded_field(seed)
    kc = kclass(1.3, "LogSqPow", 1.0, lam=1.0, Lam=2.0)
    kappa = kc.Lam * tail_remainder_bound(kc, FieldFunction.analytic(constant(1.0)), 1.0) / (4.0 * kc.Lam)
    tp, tm = pucci_truncated(u, [0.1], kc, radius=1.0)
    gap = 4.0 * kappa * u.sup_bound + 1e-9
    assert abs(tp - pucci_plus(u, [0.1], kc)) <= gap
    assert abs(tm - pucci_minus(u, [0.1], kc)) <= gap


def test_inner_fit_reproduces_quadratics():
    for r_in, h in ((0.1, None), (0.08, 0.01), (0.3, 0.1)):
        rk, w = inner_fit(r_in, h)
        assert np.sum(w * 5.0 * rk**2) == pytest.approx(5.0 * r_in**2, rel=1e-14)
        assert rk[-1] == pytest.approx(r_in)


def test_grid_field_errors():
    far = bump()
    u = FieldFunction.from_grid(np.zeros(17), 0.125, 1.0, far)
    kc = kclass(1.0)
    with pytest.raises(DomainError):
        pucci_plus(u, [0.9], kc, QuadratureConfig(inner_split=4.0))
    with pytest.raises(DomainError):
        pucci_plus(u, [0.0], kc, QuadratureConfig(inner_split=1.0))
    with pytest.raises(UnboundedField):
        pucci_plus(FieldFunction.analytic(polynomial([0.0, 1.0])), [0.0], kc)
    with pytest.raises(DomainError):
        pucci_plus(FieldFunction.analytic(bump()), [0.0, 0.0], kc)


def test_remainder_bounds():
    kc = kclass(1.5, lam=1.0, Lam=2.0)
    # 2 Lam |S| M (2-s) r^{2-s}/(2-s) with M = 1
    assert inner_remainder_bound(kc, 0.01, 1.0) == pytest.approx(2.0 * 2.0 * 0.01**0.5, rel=1e-12)
    u = FieldFunction.analytic(bump())
    assert tail_remainder_bound(kc, u, 1.0) == pytest.approx(4.0 * 2.0 * 2.0 * 0.5 / 1.5, rel=1e-12)
