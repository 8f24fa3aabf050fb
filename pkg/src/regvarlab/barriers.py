"""Explicit radial barriers and numerical verification of their extremal
operator inequalities."""
from dataclasses import dataclass
import math

import numpy as np

from .errors import NotFound
from .fields import FieldFunction, radial
from .kernels import KernelClass, KernelSpec, radial_moment, sphere_area, sphere_second_moment
from .nonlocal_ops import QuadratureConfig, pucci_minus
from .regvar import eval_L


def choose_p(n, lam, Lam):
    """Smallest integer p > n with (p+2)(lam/2) S2 - Lam S0 > 0."""
    if lam > Lam:
        raise ValueError("need lambda <= Lambda")
    s0 = sphere_area(n)
    s2 = sphere_second_moment(n)
    p = n + 1
    while (p + 2) * 0.5 * lam * s2 - Lam * s0 <= 0:
        p += 1
    return p


@dataclass(frozen=True)
class PowerBarrierSpec:
    R: float
    kappa1: float
    eps0: float
    p: int
    kclass: KernelClass

    def __post_init__(self):
        if not 0 < self.R < 1 or not 0 < self.kappa1 < 1:
            raise ValueError("R and kappa1 must lie in (0, 1)")
        if not 0 < self.eps0 < 0.125:
            raise ValueError("eps0 must lie in (0, 1/8)")
        if self.p <= self.kclass.dim:
            raise ValueError("p must exceed the dimension")

    @property
    def kappa0(self):
        return self.eps0 * self.kappa1

    @property
    def plateau_radius(self):
        return self.kappa0 * self.R


def eval_power_barrier(spec, x):
    r = _radius(x, spec.kclass.dim)
    out = np.maximum(r, spec.plateau_radius) ** (-float(spec.p))
    return float(out) if np.ndim(out) == 0 else out


def power_barrier_field(spec):
    r0, p = spec.plateau_radius, float(spec.p)
    far = radial(lambda r: np.maximum(r, r0) ** (-p), r0 ** (-p), 0.0, "power_barrier", (r0,))
    return FieldFunction.analytic(far, spec.kclass.dim)


@dataclass(frozen=True)
class CompositeBarrierSpec:
    R: float
    delta1: float
    delta2: float
    kappa0: float
    p: int
    kclass: KernelClass

    def __post_init__(self):
        if not 0 < self.delta1 < self.delta2 < 1:
            raise ValueError("need 0 < delta1 < delta2 < 1")
        if not 0 < self.kappa0 < self.delta1 / 16:
            raise ValueError("kappa0 must lie in (0, delta1/16)")

    @property
    def a(self):
        return 0.5 * self.p * (self.kappa0 * self.R) ** -2

    @property
    def b(self):
        return 1.0 - self.kappa0**self.p + 0.5 * self.p

    @property
    def c0(self):
        return 2.0 / (self.kappa0**self.p * (self.delta2 ** (-self.p) - 1.0))


def _radius(x, dim):
    x = np.asarray(x, dtype=float)
    if dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        return np.abs(x)
    return np.sqrt(np.sum(x * x, axis=-1))


def _composite_profile(spec):
    r0 = spec.kappa0 * spec.R
    R, p, a, b, c0 = spec.R, float(spec.p), spec.a, spec.b, spec.c0

    def prof(r):
        r = np.asarray(r, dtype=float)
        cap = c0 * (b - a * r * r)
        ann = c0 * r0**p * (np.maximum(r, r0) ** (-p) - R ** (-p))
        return np.where(r < r0, cap, np.where(r < R, ann, 0.0))

    return prof


def eval_composite_barrier(spec, x):
    out = _composite_profile(spec)(_radius(x, spec.kclass.dim))
    return float(out) if np.ndim(out) == 0 else out


def composite_barrier_field(spec):
    far = radial(_composite_profile(spec), spec.c0 * spec.b, 0.0, "composite_barrier",
                 (spec.kappa0 * spec.R, spec.R))
    return FieldFunction.analytic(far, spec.kclass.dim)


def comparison_barrier_field(R, dim=1):
    """min(1, |x|^2 / (4R^2))."""
    far = radial(lambda r: np.minimum(1.0, r * r / (4.0 * R * R)), 1.0, 1.0, "comparison_barrier", (2.0 * R,))
    return FieldFunction.analytic(far, dim)


def comparison_delta_R(kclass, R, q=QuadratureConfig(), method="auto"):
    """(2-sigma) lambda int_{B_R} |y|^2/(2R^2) l(|y|)/|y|^n dy."""
    prof = kclass.profile
    if method == "auto" and prof.l0.family == "Constant":
        return kclass.lam * sphere_area(kclass.dim) * R ** (-prof.sigma) / 2.0
    base = KernelSpec(prof, 1.0, 1.0, kclass.dim)
    m = radial_moment(base, R, k=1, rtol=q.rel_tol)[0]
    return kclass.lam * sphere_area(kclass.dim) * m / (2.0 * R * R)


@dataclass(frozen=True)
class VerifyReport:
    min_value: float
    witness: tuple
    threshold: float
    passed: bool
    values: np.ndarray
    points: np.ndarray


def check_points(dim, radii, angles=64):
    radii = np.asarray(radii, dtype=float)
    if dim == 1:
        return np.concatenate([radii, -radii])[:, None]
    th = 2.0 * math.pi * np.arange(angles) / angles
    d = np.stack([np.cos(th), np.sin(th)], axis=-1)
    return (radii[:, None, None] * d[None, :, :]).reshape(-1, 2)


def annulus_radii(r_lo, r_hi, count=64):
    """count radii in [r_lo, r_hi), equally spaced."""
    return r_lo + (r_hi - r_lo) * np.arange(count) / count


def verify_subsolution(field, points, kclass, q=QuadratureConfig(), threshold=0.0, scale=1.0):
    """Evaluate M- of `field` at every point and compare min(M-)/scale with threshold."""
    pts = np.asarray(points, dtype=float).reshape(len(points), -1)
    vals = np.array([pucci_minus(field, x, kclass, q) for x in pts]) / scale
    k = int(np.argmin(vals))
    mn = float(vals[k])
    return VerifyReport(mn, tuple(pts[k]), threshold, bool(mn >= threshold), vals, pts)


def verify_power_barrier(spec, q=QuadratureConfig(), tol=1e-6, radii=64, angles=64):
    """Check M- phi >= -tol on the annulus B_R minus B_{kappa1 R}."""
    pts = check_points(spec.kclass.dim, annulus_radii(spec.kappa1 * spec.R, spec.R, radii), angles)
    return verify_subsolution(power_barrier_field(spec), pts, spec.kclass, q, -tol)


def find_eps0(R, kappa1, p, kclass, q=QuadratureConfig(), tol=1e-6, start=1.0 / 16, max_halvings=30,
              radii=64, angles=64):
    """Halve eps0 from `start` until the power barrier passes verification."""
    eps = start
    for _ in range(max_halvings + 1):
        spec = PowerBarrierSpec(R, kappa1, eps, p, kclass)
        rep = verify_power_barrier(spec, q, tol, radii, angles)
        if rep.passed:
            return spec, rep
        eps *= 0.5
    raise NotFound("no eps0 passed verification")


def composite_psi(spec, q=QuadratureConfig(), radii=16, angles=16):
    """Realized psi: max of (M- Phi)^- / L(delta1 R) over B_{delta1 R}."""
    dim = spec.kclass.dim
    pts = check_points(dim, annulus_radii(0.0, spec.delta1 * spec.R, radii), angles)
    if dim == 1:
        pts = pts[:radii]  # the field is even
    Ld = float(eval_L(spec.kclass.profile, spec.delta1 * spec.R))
    rep = verify_subsolution(composite_barrier_field(spec), pts, spec.kclass, q, -math.inf, Ld)
    return max(0.0, -rep.min_value), rep
