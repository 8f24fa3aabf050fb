import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from regvarlab.barriers import (CompositeBarrierSpec, PowerBarrierSpec, annulus_radii, check_points, choose_p,
                                comparison_barrier_field, comparison_delta_R, composite_psi,
                                eval_composite_barrier, eval_power_barrier, find_eps0,
                                power_barrier_field, verify_power_barrier, verify_subsolution)
from regvarlab.kernels import KernelClass
from regvarlab.nonlocal_ops import pucci_minus
from regvarlab.regvar import KernelProfile, SlowlyVaryingSpec


def kclass(sigma=1.0, lam=1.0, Lam=1.0, dim=1, family="Constant", beta=0.0):
    return KernelClass(KernelProfile(sigma, SlowlyVaryingSpec(family, beta)), lam, Lam, dim)


def test_choose_p_examples():
    assert choose_p(1, 1.0, 1.0) == 2
    assert choose_p(2, 1.0, 1.0) == 3
    assert choose_p(1, 1.0, 10.0) == 19
    with pytest.raises(ValueError):
        choose_p(1, 2.0, 1.0)


@given(st.integers(1, 4), st.floats(0.1, 5.0), st.floats(1.0, 20.0))
def test_choose_p_minimal(n, lam, ratio):
    Lam = lam * ratio
    p = choose_p(n, lam, Lam)
    s0 = 2 * math.pi ** (n / 2) / math.gamma(n / 2)
    s2 = s0 / n
    assert p > n
    assert (p + 2) * lam / 2 * s2 > Lam * s0
    if p - 1 > n:
        assert (p + 1) * lam / 2 * s2 <= Lam * s0


def test_power_barrier_values():
    spec = PowerBarrierSpec(0.4, 0.1, 0.05, 2, kclass())
    r0 = spec.plateau_radius
    assert r0 == pytest.approx(0.002)
    assert eval_power_barrier(spec, 0.0) == pytest.approx(r0**-2)
    assert eval_power_barrier(spec, r0 / 2) == pytest.approx(r0**-2)
    assert eval_power_barrier(spec, -0.2) == pytest.approx(25.0)
    with pytest.raises(ValueError):
        PowerBarrierSpec(0.4, 0.1, 0.2, 2, kclass())
    with pytest.raises(ValueError):
        PowerBarrierSpec(0.4, 0.1, 0.05, 1, kclass())


def test_composite_barrier_values():
    spec = CompositeBarrierSpec(0.5, 0.25, 0.75, 0.01, 3, kclass(dim=2))
    assert eval_composite_barrier(spec, [0.6, 0.0]) == 0.0
    # c0 normalization: value 2 on the sphere of radius delta2 R
    assert eval_composite_barrier(spec, [0.0, 0.75 * 0.5]) == pytest.approx(2.0, rel=1e-12)
    # the cap and the annulus part meet continuously at kappa0 R
    r0 = spec.kappa0 * spec.R
    inner = eval_composite_barrier(spec, [r0 * (1 - 1e-9), 0.0])
    outer = eval_composite_barrier(spec, [r0 * (1 + 1e-9), 0.0])
    assert inner == pytest.approx(outer, rel=1e-6)
    with pytest.raises(ValueError):
        CompositeBarrierSpec(0.5, 0.25, 0.75, 0.1, 3, kclass())


def test_delta_R_closed_form():
    assert comparison_delta_R(kclass(1.5), 0.5) == pytest.approx(2.0 * math.sqrt(2.0), rel=1e-14)
    assert comparison_delta_R(kclass(1.0), 1.0) == pytest.approx(1.0, rel=1e-14)
    assert comparison_delta_R(kclass(1.5), 0.5, method="quadrature") == pytest.approx(2.0 * math.sqrt(2.0), rel=1e-10)
    assert comparison_delta_R(kclass(1.3, lam=2.0, Lam=2.0), 0.3) == pytest.approx(
        2.0 * comparison_delta_R(kclass(1.3), 0.3))


@pytest.mark.parametrize("sigma", [1.0, 1.5, 1.9])
def test_comparison_barrier_at_origin(sigma):
    R = 0.3
    kc = kclass(sigma, Lam=2.0)
    val = pucci_minus(comparison_barrier_field(R), [0.0], kc)
    # mu(0, y) = |y|^2/(2R^2) below 2R and 2 beyond, all nonnegative, so lam applies:
    # 2(2-s)[(2R)^{2-s}/(2R^2 (2-s)) + 2(2R)^{-s}/s] = 8 (2R)^{-s} / s
    assert val == pytest.approx(8.0 * (2 * R) ** -sigma / sigma, rel=1e-9)
    assert val >= comparison_delta_R(kc, R)


def test_power_barrier_verified_at_sigma_one_and_a_half():
    kc = kclass(1.5)
    spec, rep = find_eps0(0.4, 0.1, choose_p(1, 1.0, 1.0), kc, radii=24)
    assert rep.passed and rep.min_value >= -1e-6
    again = verify_power_barrier(spec, radii=24)
    assert again.min_value == rep.min_value


def test_barrier_finite_at_plateau_point():
    spec = PowerBarrierSpec(0.4, 0.1, 0.05, 2, kclass(1.2))
    assert math.isfinite(pucci_minus(power_barrier_field(spec), [0.0], spec.kclass))


def test_verify_reports_witness():
    u = comparison_barrier_field(0.25)
    pts = check_points(1, [0.1, 0.2])
    rep = verify_subsolution(u, pts, kclass(1.0), threshold=1e9)
    assert not rep.passed
    assert rep.witness in {tuple(p) for p in pts}
    assert rep.min_value == pytest.approx(rep.values.min())


def test_check_points_layout():
    assert check_points(1, [0.1, 0.2]).shape == (4, 1)
    pts = check_points(2, [0.5], angles=8)
    assert np.allclose(np.linalg.norm(pts, axis=1), 0.5)
    r = annulus_radii(0.1, 0.5, 4)
    assert r[0] == 0.1 and r[-1] < 0.5


def test_composite_psi_finite():
    kc = kclass(1.5)
    spec = CompositeBarrierSpec(0.4, 0.5, 0.75, 0.01, 2, kc)
    psi, rep = composite_psi(spec, radii=6)
    assert psi >= 0 and math.isfinite(psi)
    assert len(rep.values) == 6
