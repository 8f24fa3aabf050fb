"""Slowly and regularly varying profiles, the scale function L and the
regular-variation checks (Potter constants, Karamata ratios)."""
from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DomainError, InvalidDelta, InvalidGrid, InvalidProfile, NotFound
from .quadrature import integrate, integrate_decay

FAMILIES = ("Constant", "LogPow", "LogSqPow", "LogLogPow", "ExpLogPow", "ExpLogOverLogLog")

LOG2 = math.log(2.0)
# Right end of the formula region for the two log-log families: log(2/r) = e
# there, so log log(2/r) = 1 and the ratio T/log T is at its minimum.
LOGLOG_CUTOFF = 2.0 * math.exp(-math.e)


@dataclass(frozen=True)
class SlowlyVaryingSpec:
    """A cataloged slowly varying function l0, normalized so l0(1) = 1.

    Each family uses its raw formula on (0, cutoff) and is extended by the
    constant 1 beyond the cutoff (cutoff 1 for the log and exp-log families,
    2 e^{-e} for the log-log ones), after dividing by the raw value there.
    """

    family: str = "Constant"
    beta: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidProfile(f"unknown family {self.family!r}")
        if not math.isfinite(self.beta):
            raise InvalidProfile("beta must be finite")
        if self.family == "ExpLogPow" and not 0.0 < self.beta < 1.0:
            raise InvalidProfile("ExpLogPow needs beta in (0, 1)")

    @property
    def cutoff(self):
        if self.family in ("LogLogPow", "ExpLogOverLogLog"):
            return LOGLOG_CUTOFF
        return 1.0

    @property
    def breakpoints(self):
        """Radii in (0, 1] where l0 is not smooth."""
        return (self.cutoff,) if self.cutoff < 1.0 else ()

    def label(self):
        if self.family in ("Constant", "ExpLogOverLogLog"):
            return self.family
        return f"{self.family}({self.beta:g})"


def _log_raw(spec, logr):
    t = LOG2 - logr  # log(2/r)
    fam, beta = spec.family, spec.beta
    if fam == "LogPow":
        return beta * np.log(t)
    if fam == "LogSqPow":
        return beta * np.log(LOG2 - 2.0 * logr)
    if fam == "LogLogPow":
        return beta * np.log(np.log(t))
    if fam == "ExpLogPow":
        return t**beta
    if fam == "ExpLogOverLogLog":
        return t / np.log(t)
    raise AssertionError(fam)


def log_l0(spec, logr):
    """log l0 evaluated at r = exp(logr); works far below the float range of r."""
    logr = np.asarray(logr, dtype=float)
    out = np.zeros_like(logr)
    if spec.family == "Constant":
        return out
    lc = math.log(spec.cutoff)
    inside = logr < lc
    if np.any(inside):
        ref = float(_log_raw(spec, np.array(lc)))
        out[inside] = _log_raw(spec, logr[inside]) - ref
    return out


def eval_l0(spec, r):
    r_arr = np.asarray(r, dtype=float)
    if np.any(~np.isfinite(r_arr)) or np.any(r_arr <= 0):
        raise DomainError("l0 is defined for finite r > 0 only")
    out = np.exp(log_l0(spec, np.log(r_arr)))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class KernelProfile:
    """The pair (sigma, l0) defining l(r) = r^{-sigma} l0(r)^{2-sigma}."""

    sigma: float
    l0: SlowlyVaryingSpec = field(default_factory=SlowlyVaryingSpec)
    sigma0: float = None

    def __post_init__(self):
        if not 0.0 < self.sigma < 2.0:
            raise InvalidProfile(f"sigma must lie in (0, 2), got {self.sigma}")
        if self.sigma0 is not None:
            if not 0.0 < self.sigma0 < 2.0:
                raise InvalidProfile(f"sigma0 must lie in (0, 2), got {self.sigma0}")
            if self.sigma < self.sigma0:
                raise InvalidProfile(f"sigma={self.sigma} below the floor sigma0={self.sigma0}")

    def with_sigma(self, sigma):
        return KernelProfile(sigma, self.l0, self.sigma0)


def log_l(profile, logr):
    logr = np.asarray(logr, dtype=float)
    s = profile.sigma
    return -s * logr + (2.0 - s) * log_l0(profile.l0, logr)


def eval_l(profile, r):
    r_arr = np.asarray(r, dtype=float)
    if np.any(~np.isfinite(r_arr)) or np.any(r_arr <= 0):
        raise DomainError("l is defined for finite r > 0 only")
    out = np.exp(log_l(profile, np.log(r_arr)))
    return float(out) if out.ndim == 0 else out


def _log_breaks(profile, lo, hi):
    """Breakpoints in log r on [lo, hi]: dyadic rings plus l0 kinks."""
    k_hi = math.floor(hi / LOG2)
    k_lo = math.ceil(lo / LOG2)
    pts = [lo, hi]
    pts += [k * LOG2 for k in range(k_lo, k_hi + 1)]
    pts += [math.log(b) for b in profile.l0.breakpoints]
    pts = sorted(p for p in set(pts) if lo <= p <= hi)
    return pts


def scale_integral(profile, r, rtol=1e-12, order=10):
    """L(r) = sigma * int_r^1 l(s)/s ds by dyadic-ring quadrature.

    Returns (value, error estimate). Negative for r > 1.
    """
    if not (r > 0 and math.isfinite(r)):
        raise DomainError("L needs finite r > 0")
    if r == 1.0:
        return 0.0, 0.0
    lo, hi, sign = math.log(r), 0.0, 1.0
    if lo > hi:
        lo, hi, sign = hi, lo, -1.0

    def f(t):
        return np.exp(log_l(profile, t))

    val, err = integrate(f, _log_breaks(profile, lo, hi), rtol=rtol, order=order)
    return sign * profile.sigma * val, profile.sigma * err


def eval_L(profile, r, method="auto", rtol=1e-12):
    """Scale function L(r). The Constant family uses r^{-sigma} - 1 unless
    method="quadrature" is requested."""
    if method not in ("auto", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    r_arr = np.asarray(r, dtype=float)
    if np.any(~np.isfinite(r_arr)) or np.any(r_arr <= 0):
        raise DomainError("L needs finite r > 0")
    if method == "auto" and profile.l0.family == "Constant":
        out = np.expm1(-profile.sigma * np.log(r_arr))
    else:
        out = np.array([scale_integral(profile, float(x), rtol=rtol)[0]
                        for x in r_arr.ravel()]).reshape(r_arr.shape)
    return float(out) if out.ndim == 0 else out


def moment_below(profile, r, k, rtol=1e-12):
    """int_0^r s^k l(s) ds for k > sigma - 1. Returns (value, error).

    Written as r^a * int_0^inf e^{-a t} l0(r e^{-t})^{2-sigma} dt with
    a = k + 1 - sigma, so the slow decay as sigma -> 2 is handled by a change
    of variables instead of a long range of rings.
    """
    a = k + 1.0 - profile.sigma
    if not a > 0:
        raise DomainError("moment diverges at the origin")
    lr = math.log(r)
    w = 2.0 - profile.sigma

    def g(t):
        return np.exp(w * log_l0(profile.l0, lr - t))

    val, err = integrate_decay(g, a, rtol=rtol)
    scale = math.exp(a * lr)
    return scale * val, scale * err


def tail_integral(profile, r=1.0, rtol=1e-12):
    """int_r^inf l(s)/s ds. Returns (value, error)."""
    lr = math.log(r)
    w = 2.0 - profile.sigma

    def g(t):
        return np.exp(w * log_l0(profile.l0, lr + t))

    val, err = integrate_decay(g, profile.sigma, rtol=rtol)
    scale = math.exp(-profile.sigma * lr)
    return scale * val, scale * err


@dataclass(frozen=True)
class PotterEstimate:
    a: float
    delta: float
    domain: tuple
    valid: bool


def potter_window(sigma):
    return 0.5 * min(2.0 - sigma, sigma)


def default_grid(domain, per_decade=200, decades=8):
    lo, hi = domain
    if hi <= 1.0:
        return np.logspace(-decades, 0.0, decades * per_decade + 1)
    return np.logspace(0.0, decades, decades * per_decade + 1)


def potter_constants(profile, delta, domain=(0.0, 1.0), grid=None, cap=1e8):
    """Smallest a with l(s)/l(r) <= a max((s/r)^{-sigma+delta}, (s/r)^{-sigma-delta})
    over all pairs of grid points."""
    if not 0.0 <= delta < potter_window(profile.sigma):
        raise InvalidDelta(
            f"delta={delta} outside [0, {potter_window(profile.sigma)}) for sigma={profile.sigma}")
    pts = default_grid(domain) if grid is None else np.asarray(grid, dtype=float)
    if pts.ndim != 1 or pts.size < 2:
        raise InvalidGrid("Potter scan needs at least two grid points")
    if np.any(pts <= 0):
        raise InvalidGrid("grid points must be positive")
    lg = np.log(pts)
    ll = log_l(profile, lg)
    # log of l(s)/l(r) minus log of the envelope, for s along axis 0
    d = lg[:, None] - lg[None, :]
    excess = (ll[:, None] - ll[None, :]) + profile.sigma * d - delta * np.abs(d)
    a = max(1.0, float(np.exp(excess.max())))
    return PotterEstimate(a=a, delta=delta, domain=tuple(domain), valid=bool(a <= cap))


def karamata_ratio(profile, r):
    return eval_L(profile, r) / eval_l(profile, r)


def find_rho(profile, r_min=1e-8, per_decade=64, band=(0.5, 2.0)):
    """Largest rho with L(r)/l(r) inside `band` for every sampled r < rho.

    The crossing between the last good and first bad grid point is refined by
    bisection; the lower end of the final bracket is returned.
    """
    decades = int(round(-math.log10(r_min)))
    rs = np.logspace(0.0, -decades, decades * per_decade + 1)[1:]

    def good(r):
        q = karamata_ratio(profile, r)
        return band[0] <= q <= band[1]

    flags = [good(r) for r in rs]
    if not flags[-1]:
        raise NotFound("Karamata band not reached on the search grid")
    j = len(rs) - 1
    while j > 0 and flags[j - 1]:
        j -= 1
    good_r = rs[j]
    bad_r = 1.0 if j == 0 else rs[j - 1]
    lo, hi = math.log(good_r), math.log(bad_r)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if good(math.exp(mid)):
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13:
            break
    return math.exp(lo)


def compute_rho1(a0, a_inf, sigma0, rho=None):
    if a0 < 1 or a_inf < 1:
        raise ValueError("Potter constants are at least 1")
    if not 0.0 < sigma0 <= 2.0:
        raise ValueError("sigma0 must lie in (0, 2]")
    rho1 = (4.0 * a0 * a0 * a_inf + 1.0) ** (-2.0 / sigma0)
    if rho is not None:
        rho1 = min(rho1, rho, 0.5)
    return rho1


def sweep_delta(sigma0, shrink=0.99):
    """Potter slack exponent factor delta0 with delta = delta0 (2 - sigma).

    shrink < 1 keeps delta strictly inside the admissible window at sigma = sigma0.
    """
    return shrink * min(sigma0 / (2.0 * (2.0 - sigma0)), 0.5)
