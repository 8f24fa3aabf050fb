"""Vectorised adaptive Gauss-Legendre quadrature used by the scale-function
and kernel-moment integrals."""
from functools import lru_cache
import math

import numpy as np

from .errors import QuadratureFailure, TailDivergence


@lru_cache(maxsize=None)
def gauss_legendre(order):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_rule(a, b, order):
    """Nodes and weights of an `order`-point rule on every panel [a_i, b_i].

    Returns arrays of shape (len(a), order).
    """
    x, w = gauss_legendre(order)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    nodes = mid[:, None] + half[:, None] * x[None, :]
    weights = half[:, None] * w[None, :]
    return nodes, weights


def _panels(f, a, b, order):
    nodes, weights = panel_rule(a, b, order)
    vals = np.asarray(f(nodes), dtype=float)
    return np.sum(vals * weights, axis=1)


def integrate(f, breakpoints, rtol=1e-12, atol=0.0, order=10, max_panels=200_000):
    """Adaptive bisection with a Gauss-Legendre rule on each panel.

    `f` receives a 2-D array of abscissae and must return values of the same
    shape. A panel is accepted once its halves agree with the whole to
    `rtol` relative or to its share of `atol`. Returns (value, error_estimate).
    """
    bp = np.asarray(breakpoints, dtype=float)
    if bp.ndim != 1 or bp.size < 2:
        raise QuadratureFailure("need at least two breakpoints")
    a, b = bp[:-1], bp[1:]
    keep = b > a
    a, b = a[keep], b[keep]
    if a.size == 0:
        return 0.0, 0.0
    length = b[-1] - a[0]
    coarse = _panels(f, a, b, order)
    parts, errs = [], []
    used = a.size
    while a.size:
        mid = 0.5 * (a + b)
        left = _panels(f, a, mid, order)
        right = _panels(f, mid, b, order)
        fine = left + right
        if not np.all(np.isfinite(fine)):
            raise QuadratureFailure("non-finite integrand value")
        e = np.abs(fine - coarse)
        tiny = (b - a) <= 1e-13 * np.maximum(np.abs(a) + np.abs(b), 1e-300)
        ok = (e <= rtol * np.abs(fine)) | (e <= atol * (b - a) / length) | tiny
        parts.append(fine[ok])
        errs.append(e[ok])
        bad = ~ok
        used += 2 * int(bad.sum())
        if used > max_panels:
            raise QuadratureFailure(f"panel budget {max_panels} exhausted")
        a = np.concatenate([a[bad], mid[bad]])
        b = np.concatenate([mid[bad], b[bad]])
        coarse = np.concatenate([left[bad], right[bad]])
    value = math.fsum(np.concatenate(parts))
    err = float(np.sum(np.concatenate(errs)))
    return value, err


def integrate_decay(g, rate, rtol=1e-12, order=10, y_max=2.0**14, tail_bound=None):
    """Integral of exp(-rate t) g(t) over t in [0, inf).

    The substitution y = rate t moves the decay onto a unit exponential;
    dyadic chunks in y are added until the last one is negligible.
    `tail_bound(T)`, when given, must bound the integral over [T, inf); it is
    added to the error estimate and must itself be negligible.
    """
    if not rate > 0:
        raise TailDivergence(f"decay rate must be positive, got {rate}")

    def h(y):
        return np.exp(-y) * g(y / rate)

    bp = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0]
    value, err = integrate(h, bp, rtol=rtol, order=order)
    lo = 64.0
    while True:
        hi = 2.0 * lo
        chunk, cerr = integrate(h, [lo, 0.5 * (lo + hi), hi], rtol=rtol, order=order)
        value += chunk
        err += cerr
        if abs(chunk) <= 1e-3 * rtol * abs(value) or chunk == 0.0:
            err += abs(chunk)
            break
        lo = hi
        if lo >= y_max:
            raise TailDivergence("integrand does not decay fast enough")
    value, err = value / rate, err / rate
    if tail_bound is not None:
        b = tail_bound(hi / rate)
        if not b <= max(rtol * abs(value), 1e-300):
            raise TailDivergence(f"tail bound {b} exceeds tolerance")
        err += b
    return value, err
