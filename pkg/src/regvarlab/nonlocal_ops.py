"""Second differences and the nonlocal operators: linear, Pucci extremal,
truncated extremal and inf-sup, all evaluated on a shared node layout.

Integrals over R^n are split into the inner ball B_{r_in}, geometric rings
r_in * factor^k up to r_max, and the exterior of B_{r_max}:

* rings are sampled with Gauss-Legendre nodes in log|y| on a half sphere of
  directions, using the symmetry of the second difference in y;
* inside B_{r_in} the second difference in each direction is replaced by its
  quadratic model mu(x, r_in e) |y|^2 / r_in^2, integrated exactly against
  the radial kernel profile;
* beyond r_max the field is replaced by its limit at infinity (when it has
  one), which makes the remaining integral a kernel tail mass.
"""
from dataclasses import dataclass, replace
from functools import lru_cache
import math

import numpy as np

from .errors import DomainError, EmptyFamily, UnboundedField
from .fields import FieldFunction
from .kernels import KernelClass, KernelSpec, radial_kernel, radial_moment, radial_tail, sphere_area
from .quadrature import panel_rule


@dataclass(frozen=True)
class QuadratureConfig:
    inner_split: float = 4.0  # r_in = inner_split * h**inner_exponent on a lattice
    inner_exponent: float = 1.0
    inner_radius: float = 2.0**-13  # r_in for fields without lattice
    ring_factor: float = 2.0
    rings: int = 48
    ring_order: int = 8
    panels: int = 1
    angular_order: int = 32
    rel_tol: float = 1e-10

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if not self.ring_factor > 1:
            raise ValueError("ring_factor must exceed 1")
        if self.rings < 1 or self.ring_order < 1 or self.panels < 1 or self.angular_order < 1:
            raise ValueError("ring, order, panel and angular counts must be positive")
        if not (self.inner_split > 0 and self.inner_radius > 0):
            raise ValueError("inner radius must be positive")
        if not 0 < self.inner_exponent <= 1:
            raise ValueError("inner_exponent must lie in (0, 1]")

    def r_in(self, u):
        if u.has_grid:
            return self.lattice_r_in(u.h, u.radius)
        return self.inner_radius

    def lattice_r_in(self, h, scale=1.0):
        """Inner radius on a lattice of spacing h covering a ball of radius `scale`."""
        if self.inner_exponent == 1.0:
            return self.inner_split * h
        # whole number of cells: mu(x, r_in e) then carries no interpolation error
        cells = round(self.inner_split * (h / scale) ** (self.inner_exponent - 1.0))
        return h * max(2, cells)


@dataclass(frozen=True, eq=False)
class NodeSet:
    """Quadrature nodes for integrals of even functions of y over |y| > r_in.

    The integral of F over R^n \\ B_{r_in} is approximated by
    sum_j sum_i 2 dir_w[j] rho_w[i] F(rho[i] dirs[j]) for even F; rho_w
    already contains the polar Jacobian rho^{n-1}.
    """

    dim: int
    r_in: float
    r_max: float
    dirs: np.ndarray
    dir_w: np.ndarray
    rho: np.ndarray
    rho_w: np.ndarray

    @property
    def sphere(self):
        return 2.0 * float(np.sum(self.dir_w))

    def points(self):
        """Nodes y of shape (n_dirs, n_rho, n)."""
        return self.rho[None, :, None] * self.dirs[:, None, :]


@lru_cache(maxsize=64)
def _half_sphere(dim, angular_order):
    if dim == 1:
        return np.array([[1.0]]), np.array([1.0])
    th = math.pi * (np.arange(angular_order) + 0.5) / angular_order
    dirs = np.stack([np.cos(th), np.sin(th)], axis=-1)
    return dirs, np.full(angular_order, math.pi / angular_order)


def build_nodes(dim, r_in, q, r_max=None, breaks=()):
    """Node layout for one evaluation; `breaks` are extra radii where the
    integrand is known to have kinks."""
    if dim not in (1, 2):
        raise DomainError("operators are evaluated in dimensions 1 and 2")
    edges = r_in * q.ring_factor ** np.arange(q.rings + 1)
    if r_max is not None:
        edges = np.append(edges[edges < r_max], r_max)
    top = edges[-1]
    extra = [b for b in breaks if r_in < b < top]
    if extra:
        edges = np.unique(np.concatenate([edges, extra]))
    logs = np.log(edges)
    if q.panels > 1:
        fr = np.linspace(0.0, 1.0, q.panels + 1)[:-1]
        starts = logs[:-1, None] + (logs[1:] - logs[:-1])[:, None] * fr[None, :]
        logs = np.append(starts.ravel(), logs[-1])
    t, w = panel_rule(logs[:-1], logs[1:], q.ring_order)
    t, w = t.ravel(), w.ravel()
    rho = np.exp(t)
    # d rho = rho dt, polar Jacobian rho^{n-1}
    rho_w = w * rho**dim
    dirs, dir_w = _half_sphere(dim, q.angular_order)
    return NodeSet(dim, float(r_in), float(top), dirs, dir_w, rho, rho_w)


def _as_point(x, dim):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (dim,):
        raise DomainError(f"expected a point of R^{dim}")
    return x


def second_difference(u, x, y):
    """mu(u, x, y) = u(x+y) + u(x-y) - 2u(x); y may be an array of points."""
    x = _as_point(x, u.dim)
    y = np.asarray(y, dtype=float)
    if u.dim == 1 and (y.ndim == 0 or y.shape[-1] != 1):
        y = y[..., None]
    return u(x + y) + u(x - y) - 2.0 * u(x)


def _kink_breaks(u, x):
    if u.dim != 1 or not u.far.kinks:
        return ()
    k = np.asarray(u.far.kinks, dtype=float)
    return tuple(np.abs(k - x[0]))


def _check_field(u, x, r_in):
    if not math.isfinite(u.sup_bound):
        raise UnboundedField("operators need a bounded field")
    if u.has_grid:
        d = float(np.linalg.norm(x - u.center))
        if d <= u.radius and d > u.radius - 2.0 * u.h + 1e-12 * u.h:
            raise DomainError("evaluation point closer than 2h to the lattice boundary")
        if r_in < 2.0 * u.h * (1 - 1e-12):
            raise DomainError("inner radius must be at least two lattice cells")


@dataclass(frozen=True, eq=False)
class Samples:
    """Second differences of a field at one point on a node layout."""

    nodes: NodeSet
    mu: np.ndarray  # (n_dirs, n_rho)
    mu_inner: np.ndarray  # (n_dirs, m) at the inner sample radii
    inner_w: np.ndarray  # (m,) least-squares weights, see inner_fit
    mu_far: float  # limit of mu beyond r_max, nan when unknown
    ux: float

    def scaled(self, c):
        """Samples of c u on the same nodes."""
        return replace(self, mu=c * self.mu, mu_inner=c * self.mu_inner, mu_far=c * self.mu_far, ux=c * self.ux)


def inner_fit(r_in, h=None):
    """Sample radii r_k = k r_in / m (m = r_in / h cells, 1 off-lattice) and
    weights w_k with sum_k w_k mu(r_k) = r_in^2 c for the least-squares fit
    mu(r) ~ c r^2. Sampling every cell keeps neighbouring nodes coupled when
    the inner model carries most of the kernel mass (sigma near 2)."""
    m = 1 if h is None else max(1, int(round(r_in / h)))
    rk = r_in * np.arange(1, m + 1) / m
    w = r_in * r_in * rk**2 / np.sum(rk**4)
    return rk, w


def sample(u, x, q, truncation=None):
    x = _as_point(x, u.dim)
    r_in = q.r_in(u)
    _check_field(u, x, r_in)
    r_max = truncation
    nodes = build_nodes(u.dim, r_in, q, r_max=r_max, breaks=_kink_breaks(u, x))
    y = nodes.points()
    ux = float(u(x))
    mu = (u(x + y) + u(x - y)) - 2.0 * ux
    rk, w_in = inner_fit(r_in, u.h if u.has_grid else None)
    yi = rk[None, :, None] * nodes.dirs[:, None, :]
    mu_in = (u(x + yi) + u(x - yi)) - 2.0 * ux
    lim = u.limit
    mu_far = math.nan if lim is None else 2.0 * lim - 2.0 * ux
    return Samples(nodes, mu, mu_in, w_in, mu_far, ux)


def _base_spec(kclass):
    return KernelSpec(kclass.profile, 1.0, 1.0, kclass.dim, "ConstLower", 0.0, kclass.truncation)


@lru_cache(maxsize=256)
def _radial_terms(spec, r_in, r_max, rel_tol):
    """Inner quadratic-model moment and exterior tail mass (per unit sphere)."""
    inner = radial_moment(spec, r_in, k=1, rtol=rel_tol)[0] / (r_in * r_in)
    tail = radial_tail(spec, r_max, rtol=rel_tol)[0]
    return inner, tail


def _assemble(s, ring_vals, inner_vals, far_val, spec, q):
    """Combine per-node integrand values (already multiplied by omega or the
    Pucci coefficient) into the integral."""
    nodes = s.nodes
    kw = radial_kernel(spec, nodes.rho) * nodes.rho_w
    inner_m, tail_m = _radial_terms(spec, nodes.r_in, nodes.r_max, q.rel_tol)
    total = 2.0 * float(nodes.dir_w @ (ring_vals @ kw))
    total += 2.0 * float(nodes.dir_w @ (inner_vals @ s.inner_w)) * inner_m
    if tail_m > 0.0 and math.isfinite(far_val):
        total += nodes.sphere * far_val * tail_m
    return total


def _pucci_vals(mu, lam, Lam, sign):
    if sign > 0:
        return np.where(mu > 0, Lam * mu, lam * mu)
    return np.where(mu > 0, lam * mu, Lam * mu)


def _pucci_from_samples(s, kclass, q, sign):
    base = _base_spec(kclass)
    lam, Lam = kclass.lam, kclass.Lam
    ring = _pucci_vals(s.mu, lam, Lam, sign)
    inner = _pucci_vals(s.mu_inner, lam, Lam, sign)
    far = float(_pucci_vals(np.array(s.mu_far), lam, Lam, sign)) if math.isfinite(s.mu_far) else math.nan
    return _assemble(s, ring, inner, far, base, q)


def _linear_from_samples(s, spec, q):
    # omega is radial, so it is carried by the kernel weights
    return _assemble(s, s.mu, s.mu_inner, s.mu_far, spec, q)


def pucci_from_samples(s, kclass, q=QuadratureConfig(), sign=1):
    """Extremal operator on precomputed samples (shared nodes)."""
    return _pucci_from_samples(s, kclass, q, sign)


def linear_from_samples(s, K, q=QuadratureConfig()):
    return _linear_from_samples(s, K, q)


def linear_apply(u, x, K, q=QuadratureConfig()):
    s = sample(u, x, q, truncation=K.truncation)
    return _linear_from_samples(s, K, q)


def pucci(u, x, kclass, q=QuadratureConfig(), sign=1):
    s = sample(u, x, q, truncation=kclass.truncation)
    return _pucci_from_samples(s, kclass, q, sign)


def pucci_plus(u, x, kclass, q=QuadratureConfig()):
    return pucci(u, x, kclass, q, 1)


def pucci_minus(u, x, kclass, q=QuadratureConfig()):
    return pucci(u, x, kclass, q, -1)


def pucci_truncated(u, x, kclass, q=QuadratureConfig(), radius=1.0):
    """(M+, M-) over the class with kernels restricted to B_radius."""
    tk = kclass.truncated(radius)
    s = sample(u, x, q, truncation=radius)
    return _pucci_from_samples(s, tk, q, 1), _pucci_from_samples(s, tk, q, -1)


@dataclass(frozen=True)
class OperatorFamily:
    """Kernels K[beta][alpha] of an inf-sup operator."""

    members: tuple

    def __post_init__(self):
        rows = tuple(tuple(r) for r in self.members)
        if not rows or any(len(r) == 0 for r in rows):
            raise EmptyFamily("operator family needs at least one kernel per index")
        object.__setattr__(self, "members", rows)
        dims = {k.dim for r in rows for k in r}
        truncs = {k.truncation for r in rows for k in r}
        if len(dims) != 1 or len(truncs) != 1:
            raise ValueError("family members must share dimension and truncation")

    @property
    def dim(self):
        return self.members[0][0].dim

    @property
    def truncation(self):
        return self.members[0][0].truncation

    def flat(self):
        return [k for r in self.members for k in r]


def family_values(s, fam, q):
    """Linear values on shared samples, as an array shaped like the family
    (ragged rows padded with nan)."""
    width = max(len(r) for r in fam.members)
    out = np.full((len(fam.members), width), np.nan)
    for b, row in enumerate(fam.members):
        for a, K in enumerate(row):
            out[b, a] = _linear_from_samples(s, K, q)
    return out


def infsup_apply(u, x, fam, q=QuadratureConfig()):
    if not isinstance(fam, OperatorFamily):
        fam = OperatorFamily(fam)
    s = sample(u, x, q, truncation=fam.truncation)
    vals = family_values(s, fam, q)
    return float(np.min(np.nanmax(vals, axis=1)))


def operator_report(u, x, kclass, q=QuadratureConfig(), kernels=()):
    """M-, M+ and the given linear operators on one shared sample."""
    s = sample(u, x, q, truncation=kclass.truncation)
    out = {"minus": _pucci_from_samples(s, kclass, q, -1),
           "plus": _pucci_from_samples(s, kclass, q, 1)}
    for i, K in enumerate(kernels):
        out[f"linear{i}"] = _linear_from_samples(s, K, q)
    return out


def inner_remainder_bound(kclass, r_in, M, q=QuadratureConfig()):
    """Bound M (2-sigma) Lambda int_{B_r_in} |y|^2 l(|y|)/|y|^n dy on the part of
    the integral handled by the quadratic model, for a field that is C^{1,1}
    with modulus M at the evaluation point."""
    base = _base_spec(kclass)
    m = radial_moment(base, r_in, k=1, rtol=q.rel_tol)[0]
    return M * kclass.Lam * sphere_area(kclass.dim) * m


def tail_remainder_bound(kclass, u, r_max, q=QuadratureConfig()):
    """Bound 4 |u|_inf Lambda (kernel mass outside B_r_max) for the part dropped
    when the field has no limit at infinity."""
    base = _base_spec(kclass)
    return 4.0 * u.sup_bound * kclass.Lam * sphere_area(kclass.dim) * radial_tail(base, r_max, rtol=q.rel_tol)[0]
