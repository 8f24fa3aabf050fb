"""Bounded functions on R^n: an optional lattice sample on a ball plus an
analytic rule used everywhere else."""
from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DomainError, InvalidGrid


@dataclass(frozen=True, eq=False)
class FarField:
    """Analytic rule g(x) for points given as arrays of shape (..., n).

    limit is the value of g at infinity when it has one; it lets operator
    tails be integrated in closed form. kinks lists points of R (n = 1 only)
    where g fails to be smooth, used as extra quadrature breakpoints.
    """

    func: object
    bound: float
    limit: float = None
    name: str = "custom"
    params: dict = field(default_factory=dict)
    kinks: tuple = ()

    def __call__(self, x):
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)

    def scaled(self, c):
        f = self.func
        lim = None if self.limit is None else c * self.limit
        return FarField(lambda x: c * f(x), abs(c) * self.bound, lim,
                        f"{c}*{self.name}", dict(self.params), self.kinks)


def _norm(x):
    return np.sqrt(np.sum(x * x, axis=-1))


def constant(c):
    c = float(c)
    return FarField(lambda x: np.full(x.shape[:-1], c), abs(c), c, "constant", {"c": c})


def bump():
    """max(0, 1 - |x|^2)."""
    return FarField(lambda x: np.maximum(0.0, 1.0 - np.sum(x * x, axis=-1)), 1.0, 0.0,
                    "bump", {}, kinks=(-1.0, 1.0))


def gaussians(centers, widths, amplitudes):
    """Sum of a_i exp(-|x - c_i|^2 / (2 w_i^2))."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    widths = np.asarray(widths, dtype=float).ravel()
    amps = np.asarray(amplitudes, dtype=float).ravel()
    if not (len(centers) == len(widths) == len(amps)):
        raise ValueError("centers, widths and amplitudes must have equal length")

    def g(x):
        out = np.zeros(x.shape[:-1])
        for c, w, a in zip(centers, widths, amps):
            d2 = np.sum((x - c) ** 2, axis=-1)
            out = out + a * np.exp(-0.5 * d2 / (w * w))
        return out

    params = {"centers": centers.tolist(), "widths": widths.tolist(), "amplitudes": amps.tolist()}
    return FarField(g, float(np.sum(np.abs(amps))), 0.0, "gaussians", params)


def polynomial(coeffs):
    """Unbounded 1-D polynomial sum c_k x^k; only for local checks."""
    coeffs = [float(c) for c in coeffs]

    def g(x):
        return np.polyval(coeffs[::-1], x[..., 0])

    bound = abs(coeffs[0]) if all(c == 0 for c in coeffs[1:]) else math.inf
    return FarField(g, bound, None, "polynomial", {"coeffs": coeffs})


def radial(profile_fn, bound, limit=None, name="radial", kinks_r=(), **params):
    """g(x) = profile_fn(|x|); kinks_r are radii where the profile has kinks."""
    kinks = tuple(sorted({s * k for k in kinks_r for s in (-1.0, 1.0)}))
    return FarField(lambda x: profile_fn(_norm(x)), bound, limit, name, params, kinks)


def random_gaussians(rng, dim, count=None, center_range=(0.0, 1.0), width_range=(0.1, 0.5),
                     amp_range=(0.2, 1.0), outside=None):
    """Seeded Gaussian-bump sum; `outside` forces centers beyond that radius."""
    k = int(rng.integers(1, 4)) if count is None else count
    centers = []
    for _ in range(k):
        direction = rng.normal(size=dim)
        direction /= np.linalg.norm(direction)
        rad = rng.uniform(*center_range)
        if outside is not None:
            rad = outside + rad
        centers.append(rad * direction)
    widths = rng.uniform(*width_range, size=k)
    amps = rng.uniform(*amp_range, size=k)
    return gaussians(centers, widths, amps)


@dataclass(frozen=True, eq=False)
class FieldFunction:
    """A function u on R^n, n in {1, 2}.

    With a lattice, u is the multilinear interpolant of `values` on the ball
    |x - center| <= radius; the lattice spans the cube around that ball with
    spacing h. Outside the ball (or everywhere without lattice) u is `far`.
    """

    dim: int
    far: FarField
    center: np.ndarray = None
    radius: float = None
    h: float = None
    values: np.ndarray = None
    c11: float = None

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise DomainError("fields are supported in dimensions 1 and 2")
        c = np.zeros(self.dim) if self.center is None else np.asarray(self.center, dtype=float)
        object.__setattr__(self, "center", c.reshape(self.dim))
        if self.values is not None:
            if not (self.h and self.h > 0):
                raise InvalidGrid("grid spacing must be positive")
            vals = np.asarray(self.values, dtype=float)
            n_half = int(round(self.radius / self.h))
            if abs(n_half * self.h - self.radius) > 1e-9 * self.radius:
                raise InvalidGrid("grid spacing must divide the radius")
            if vals.shape != (2 * n_half + 1,) * self.dim:
                raise InvalidGrid(f"expected lattice of shape {(2 * n_half + 1,) * self.dim}")
            if not np.all(np.isfinite(vals)):
                raise InvalidGrid("grid values must be finite")
            object.__setattr__(self, "values", vals)

    @classmethod
    def analytic(cls, far, dim=1, c11=None):
        return cls(dim, far, c11=c11)

    @classmethod
    def from_grid(cls, values, h, radius, far, center=None, c11=None):
        values = np.asarray(values, dtype=float)
        return cls(values.ndim, far, center, radius, h, values, c11)

    @property
    def has_grid(self):
        return self.values is not None

    @property
    def n_half(self):
        return int(round(self.radius / self.h))

    def axis(self):
        k = np.arange(-self.n_half, self.n_half + 1)
        return k * self.h

    def lattice_points(self):
        ax = self.axis()
        mesh = np.meshgrid(*([ax] * self.dim), indexing="ij")
        return np.stack(mesh, axis=-1) + self.center

    @property
    def sup_bound(self):
        b = self.far.bound
        if self.has_grid:
            b = max(b, float(np.max(np.abs(self.values))))
        return b

    @property
    def limit(self):
        return self.far.limit

    def scaled(self, c):
        vals = None if self.values is None else c * self.values
        c11 = None if self.c11 is None else abs(c) * self.c11
        return FieldFunction(self.dim, self.far.scaled(c), self.center, self.radius, self.h, vals, c11)

    def lattice_weights(self, x):
        """Corner indices (flat) and multilinear weights for points x (m, n)."""
        x = np.asarray(x, dtype=float)
        m = self.n_half
        side = 2 * m + 1
        rel = (x - self.center) / self.h + m
        base = np.clip(np.floor(rel).astype(int), 0, side - 2)
        frac = rel - base
        if self.dim == 1:
            idx = np.stack([base[:, 0], base[:, 0] + 1], axis=-1)
            w = np.stack([1.0 - frac[:, 0], frac[:, 0]], axis=-1)
            return idx, w
        i, j = base[:, 0], base[:, 1]
        s, t = frac[:, 0], frac[:, 1]
        idx = np.stack([i * side + j, i * side + j + 1, (i + 1) * side + j, (i + 1) * side + j + 1], axis=-1)
        w = np.stack([(1 - s) * (1 - t), (1 - s) * t, s * (1 - t), s * t], axis=-1)
        return idx, w

    def inside(self, x):
        if not self.has_grid:
            return np.zeros(np.shape(x)[:-1], dtype=bool)
        d = np.sqrt(np.sum((np.asarray(x) - self.center) ** 2, axis=-1))
        return d <= self.radius * (1.0 + 1e-12)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        shape = x.shape[:-1]
        pts = x.reshape(-1, self.dim)
        out = np.empty(len(pts))
        ins = self.inside(pts)
        if np.any(~ins):
            out[~ins] = self.far(pts[~ins])
        if np.any(ins):
            idx, w = self.lattice_weights(pts[ins])
            flat = self.values.ravel()
            out[ins] = np.sum(flat[idx] * w, axis=-1)
        return out.reshape(shape)
