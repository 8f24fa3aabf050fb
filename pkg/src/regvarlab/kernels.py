"""Symmetric kernels in the class bounded by (2-sigma) lambda l(|y|)/|y|^n and
(2-sigma) Lambda l(|y|)/|y|^n, plus their integrability checks."""
from dataclasses import dataclass
import math

import numpy as np

from .errors import DomainError, InvalidProfile, TailDivergence
from .quadrature import integrate, integrate_decay
from .regvar import KernelProfile, log_l, log_l0, potter_constants, potter_window

WEIGHTS = ("ConstLower", "ConstUpper", "RadialBlend")


def sphere_area(n):
    """|dB_1| in R^n (counting measure on {-1, 1} for n = 1)."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def sphere_second_moment(n):
    """Integral of y_1^2 over the unit sphere."""
    return sphere_area(n) / n


@dataclass(frozen=True)
class KernelClass:
    """Parameters (lambda, Lambda, l) of the kernel class, with the dimension
    and an optional truncation radius."""

    profile: KernelProfile
    lam: float = 1.0
    Lam: float = 1.0
    dim: int = 1
    truncation: float = None

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidProfile("lambda must be positive")
        if not self.Lam >= self.lam:
            raise InvalidProfile("Lambda must be at least lambda")
        if self.dim < 1:
            raise InvalidProfile("dimension must be positive")
        if self.truncation is not None and not self.truncation > 0:
            raise InvalidProfile("truncation radius must be positive")

    def member(self, weight="ConstLower", phase=0.0):
        return KernelSpec(self.profile, self.lam, self.Lam, self.dim, weight, phase, self.truncation)

    def truncated(self, radius=1.0):
        return KernelClass(self.profile, self.lam, self.Lam, self.dim, radius)


@dataclass(frozen=True)
class KernelSpec:
    profile: KernelProfile
    lam: float = 1.0
    Lam: float = 1.0
    dim: int = 1
    weight: str = "ConstLower"
    phase: float = 0.0
    truncation: float = None

    def __post_init__(self):
        # reuse the class validation
        self.kclass
        if self.weight not in WEIGHTS:
            raise InvalidProfile(f"unknown weight {self.weight!r}")

    @property
    def kclass(self):
        return KernelClass(self.profile, self.lam, self.Lam, self.dim, self.truncation)

    @property
    def sigma(self):
        return self.profile.sigma


def weight_from_log(spec, logr):
    """omega at |y| = exp(logr)."""
    logr = np.asarray(logr, dtype=float)
    if spec.weight == "ConstLower":
        return np.full(logr.shape, spec.lam)
    if spec.weight == "ConstUpper":
        return np.full(logr.shape, spec.Lam)
    c = np.cos(spec.phase + spec.dim * logr)
    return spec.lam + (spec.Lam - spec.lam) * 0.5 * (1.0 + c)


def radial_kernel(spec, rho):
    """K as a function of rho = |y| > 0."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise DomainError("kernel is singular at y = 0")
    lr = np.log(rho)
    s = spec.sigma
    val = (2.0 - s) * weight_from_log(spec, lr) * np.exp(log_l(spec.profile, lr) - spec.dim * lr)
    if spec.truncation is not None:
        val = np.where(rho <= spec.truncation, val, 0.0)
    return val


def eval_kernel(spec, y):
    y = np.asarray(y, dtype=float)
    if spec.dim == 1 and (y.ndim == 0 or y.shape[-1] != 1):
        rho = np.abs(y)
    else:
        if y.shape[-1] != spec.dim:
            raise DomainError(f"expected points in R^{spec.dim}")
        rho = np.linalg.norm(y, axis=-1)
    if np.any(rho == 0):
        raise DomainError("kernel is singular at y = 0")
    out = radial_kernel(spec, rho)
    return float(out) if out.ndim == 0 else out


def _potter_tail(spec, R):
    """Certified bound T -> int_T^inf e^{-sigma t} omega l0(R e^t)^{2-sigma} dt
    from the grid Potter constant of l on [1, inf)."""
    s = spec.sigma
    dp = 0.5 * potter_window(s)
    a_inf = potter_constants(spec.profile, dp, domain=(1.0, math.inf)).a
    rate = s - dp
    if not rate > 0:
        raise TailDivergence("Potter exponent does not certify decay")

    def bound(T):
        if R * math.exp(T) < 1.0:
            return math.inf
        return spec.Lam * a_inf * R**dp * math.exp(-rate * T) / rate

    return bound


def radial_moment(spec, r, k=1, rtol=1e-12):
    """(2-sigma) int_0^r s^k omega(s) l(s) ds for the radial profile of K."""
    s = spec.sigma
    a = k + 1.0 - s
    if not a > 0:
        raise DomainError("moment diverges at the origin")
    if spec.truncation is not None and r > spec.truncation:
        r = spec.truncation
    lr = math.log(r)

    def g(t):
        return weight_from_log(spec, lr - t) * np.exp((2.0 - s) * log_l0(spec.profile.l0, lr - t))

    val, err = integrate_decay(g, a, rtol=rtol)
    scale = (2.0 - s) * math.exp(a * lr)
    return scale * val, scale * err


def radial_tail(spec, R, rtol=1e-12, certify=True):
    """(2-sigma) int_R^inf omega(s) l(s)/s ds, i.e. the kernel mass outside B_R
    per unit sphere measure. Returns (value, error)."""
    s = spec.sigma
    if spec.truncation is not None:
        if R >= spec.truncation:
            return 0.0, 0.0
        lo, hi = math.log(R), math.log(spec.truncation)

        def f(t):
            return weight_from_log(spec, t) * np.exp(log_l(spec.profile, t))

        n_rings = max(1, int(math.ceil((hi - lo) / math.log(2.0))))
        val, err = integrate(f, np.linspace(lo, hi, n_rings + 1), rtol=rtol)
        return (2.0 - s) * val, (2.0 - s) * err
    lr = math.log(R)

    def g(t):
        return weight_from_log(spec, lr + t) * np.exp((2.0 - s) * log_l0(spec.profile.l0, lr + t))

    bound = _potter_tail(spec, R) if certify else None
    val, err = integrate_decay(g, s, rtol=rtol, tail_bound=bound)
    scale = (2.0 - s) * math.exp(-s * lr)
    return scale * val, scale * err


def tail_mass(spec, R=1.0, rtol=1e-12):
    """int_{|y|>R} K(y) dy."""
    val, _ = radial_tail(spec, R, rtol=rtol)
    return sphere_area(spec.dim) * val


def levy_integrability(spec, tol=1e-10):
    """int min(1, |y|^2) K(y) dy."""
    inner, e1 = radial_moment(spec, 1.0, k=1, rtol=tol)
    outer, e2 = radial_tail(spec, 1.0, rtol=tol)
    total = sphere_area(spec.dim) * (inner + outer)
    err = sphere_area(spec.dim) * (e1 + e2)
    if not math.isfinite(total) or err > tol * max(abs(total), 1e-300):
        raise TailDivergence(f"integrability not certified (value {total}, error {err})")
    return total


def translation_condition(spec, theta0, h, tol=1e-8, angular_order=64, outer_factor=2.0**24):
    """int over |y| > theta0 of |K(y) - K(y - h)| / |y| dy.

    The part beyond |y| = theta0 * outer_factor is not sampled; it is bounded
    through the Potter constant at infinity and folded into the tolerance check.
    """
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if h.shape != (spec.dim,):
        raise DomainError(f"shift must lie in R^{spec.dim}")
    hn = float(np.linalg.norm(h))
    if not hn < 0.5 * theta0:
        raise DomainError("translation condition needs |h| < theta0/2")
    if hn == 0.0:
        return 0.0
    n = spec.dim
    lo = math.log(theta0)
    hi = math.log(theta0 * outer_factor)
    rings = np.arange(lo, hi + 1e-12, math.log(2.0))
    if rings[-1] < hi:
        rings = np.append(rings, hi)

    if n == 1:
        def f(t):
            rho = np.exp(t)
            acc = 0.0
            for sgn in (1.0, -1.0):
                y = sgn * rho
                acc = acc + np.abs(radial_kernel(spec, np.abs(y)) - radial_kernel(spec, np.abs(y - h[0])))
            return acc  # |y|^{-1} dy = dt
    elif n == 2:
        th = 2.0 * math.pi * (np.arange(angular_order) + 0.5) / angular_order
        dirs = np.stack([np.cos(th), np.sin(th)], axis=-1)
        wth = 2.0 * math.pi / angular_order

        def f(t):
            rho = np.exp(t)[..., None]
            y = rho[..., None] * dirs
            shifted = np.linalg.norm(y - h, axis=-1)
            diff = np.abs(radial_kernel(spec, rho) - radial_kernel(spec, shifted))
            # polar measure rho d rho d theta with |y|^{-1} and d rho = rho dt
            return wth * np.sum(diff, axis=-1) * np.exp(t)
    else:
        raise DomainError("translation_condition supports n = 1, 2")

    # far rings lose relative accuracy to cancellation, so an absolute floor
    # taken from a fixed-rule pass is needed for the adaptive refinement
    rough, _ = integrate(f, rings, rtol=1.0)
    val, err = integrate(f, rings, rtol=tol, atol=tol * abs(rough))
    # |K(y)| + |K(y-h)| <= 2 sup_{|z| >= Y/2} K on the unsampled region
    Y = theta0 * outer_factor
    s = spec.sigma
    dp = 0.5 * potter_window(s)
    a_inf = potter_constants(spec.profile, dp, domain=(1.0, math.inf)).a
    expo = s - dp + 1.0
    tail = (2.0 * sphere_area(n) * (2.0 - s) * spec.Lam * a_inf
            * 2.0 ** (n + s - dp) * Y ** (-expo) / expo)
    if not math.isfinite(val) or tail > max(tol * abs(val), 1e-300) and tail > 1e-12:
        raise TailDivergence(f"translation tail not certified: bound {tail}")
    return val
