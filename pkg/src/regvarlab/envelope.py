"""Concave envelopes of grid functions, contact sets and the ring/measure
primitives of the ABP-type estimate."""
from dataclasses import dataclass
import math

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import ConvexHull, QhullError

from .errors import NoContactPoint
from .regvar import eval_l


@dataclass(frozen=True, eq=False)
class EnvelopeResult:
    points: np.ndarray  # (m, n) grid nodes
    values: np.ndarray  # u^+ at the nodes
    gamma: np.ndarray  # envelope at the nodes
    contact: np.ndarray  # indices of contact nodes
    supergradients: np.ndarray  # (len(contact), n)
    tol: float

    def supergradient_at(self, index):
        hits = np.nonzero(self.contact == index)[0]
        if hits.size == 0:
            raise NoContactPoint(f"node {index} is not a contact point")
        return self.supergradients[hits[0]]


def _as_points(points):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    return pts


def upper_hull_1d(x, v):
    """Vertex indices of the upper hull of (x_i, v_i), x strictly increasing."""
    hull = []
    for i in range(len(x)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # drop b if it lies on or below the chord a -> i
            cross = (x[b] - x[a]) * (v[i] - v[a]) - (v[b] - v[a]) * (x[i] - x[a])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.array(hull)


def _envelope_1d(x, v):
    order = np.argsort(x)
    xs, vs = x[order], v[order]
    hull = upper_hull_1d(xs, vs)
    g = np.interp(xs, xs[hull], vs[hull])
    g[hull] = vs[hull]
    slopes = np.diff(vs[hull]) / np.diff(xs[hull])
    out = np.empty_like(g)
    out[order] = g
    return out, (xs, hull, slopes, order)


def _planes_2d(pts, v):
    """Upper-hull planes (gx, gy, c) of the lifted points: z = gx x + gy y + c."""
    lifted = np.column_stack([pts, v])
    try:
        hull = ConvexHull(lifted)
    except QhullError:
        return None
    eq = hull.equations  # a x + b y + c z + d <= 0 inside
    up = eq[:, 2] > 1e-12
    eq = eq[up]
    gx = -eq[:, 0] / eq[:, 2]
    gy = -eq[:, 1] / eq[:, 2]
    c = -eq[:, 3] / eq[:, 2]
    return np.column_stack([gx, gy, c])


def _least_norm_in_hull(G):
    """Least-norm point of the convex hull of the rows of G."""
    k = len(G)
    if k == 1:
        return G[0]
    norms = np.einsum("ij,ij->i", G, G)
    x0 = np.zeros(k)
    x0[int(np.argmin(norms))] = 1.0
    Q = G @ G.T
    res = minimize(lambda w: w @ Q @ w, x0, jac=lambda w: 2.0 * Q @ w,
                   bounds=[(0.0, 1.0)] * k,
                   constraints=[{"type": "eq", "fun": lambda w: np.sum(w) - 1.0,
                                 "jac": lambda w: np.ones_like(w)}],
                   method="SLSQP", options={"ftol": 1e-15, "maxiter": 200})
    w = np.clip(res.x, 0.0, None)
    w /= w.sum()
    return w @ G


def concave_envelope(points, u, eps_rel=1e-9):
    """Least concave majorant of u^+ over the grid nodes.

    points: (m,) or (m, n) node coordinates of a 1-D or 2-D grid; u: values.
    """
    pts = _as_points(points)
    v = np.maximum(np.asarray(u, dtype=float).ravel(), 0.0)
    n = pts.shape[1]
    osc = float(v.max() - v.min()) if v.size else 0.0
    tol = eps_rel * osc if osc > 0 else 1e-300
    if n == 1:
        gamma, (xs, hull, slopes, order) = _envelope_1d(pts[:, 0], v)
    elif n == 2:
        planes = _planes_2d(pts, v)
        if planes is None:
            # coplanar lifted points: u^+ is affine on the grid
            A = np.column_stack([pts, np.ones(len(pts))])
            coef = np.linalg.lstsq(A, v, rcond=None)[0]
            planes = coef[None, :]
        vals = pts @ planes[:, :2].T + planes[:, 2]
        gamma = vals.min(axis=1)
    else:
        raise ValueError("envelopes are computed in dimensions 1 and 2")
    gamma = np.maximum(gamma, v)
    contact = np.nonzero((np.abs(gamma - v) <= tol) & (gamma > tol))[0]
    # plane evaluation leaves roundoff at contact nodes; the envelope equals u^+ there
    gamma[contact] = v[contact]
    grads = np.zeros((len(contact), n))
    if n == 1:
        rank = np.empty(len(order), dtype=int)
        rank[order] = np.arange(len(order))
        for k, idx in enumerate(contact):
            j = rank[idx]
            pos = int(np.searchsorted(hull, j))
            if pos < len(hull) and hull[pos] == j:
                # vertex: superdifferential is [right slope, left slope]
                hi = slopes[pos - 1] if pos > 0 else math.inf
                lo = slopes[pos] if pos < len(slopes) else -math.inf
            else:
                lo = hi = slopes[pos - 1]
            grads[k, 0] = min(max(0.0, lo), hi)
    else:
        for k, idx in enumerate(contact):
            act = np.abs(vals[idx] - gamma[idx]) <= max(tol, 1e-12 * max(1.0, abs(gamma[idx])))
            grads[k] = _least_norm_in_hull(planes[act, :2])
    return EnvelopeResult(pts, v, gamma, contact, grads, tol)


def brute_force_envelope(points, u, eps_rel=1e-9):
    """Oracle: minimum over all supporting hyperplanes through n+1 nodes.

    Values within eps_rel * osc(u^+) of u^+ are snapped to u^+, matching the
    contact tolerance of concave_envelope.
    """
    pts = _as_points(points)
    v = np.maximum(np.asarray(u, dtype=float).ravel(), 0.0)
    m, n = pts.shape
    scale = max(1.0, float(np.max(np.abs(v))))
    best = np.full(m, np.inf)
    if m == 1:
        return v.copy()
    if n == 1:
        x = pts[:, 0]
        i, j = np.triu_indices(m, 1)
        dx = x[j] - x[i]
        keep = dx != 0
        i, j, dx = i[keep], j[keep], dx[keep]
        slope = (v[j] - v[i]) / dx
        lines = v[i][:, None] + slope[:, None] * (x[None, :] - x[i][:, None])
    else:
        from itertools import combinations
        tri = np.array(list(combinations(range(m), 3)))
        P = pts[tri]  # (k, 3, 2)
        V = v[tri]
        M = np.concatenate([P, np.ones(P.shape[:2] + (1,))], axis=-1)
        det = np.linalg.det(M)
        keep = np.abs(det) > 1e-12
        coef = np.linalg.solve(M[keep], V[keep][..., None])[..., 0]
        lines = pts @ coef[:, :2].T + coef[:, 2]
        lines = lines.T
    support = np.all(lines >= v[None, :] - 1e-12 * scale, axis=1)
    if np.any(support):
        best = lines[support].min(axis=0)
    out = np.maximum(best, v)
    osc = float(v.max() - v.min())
    snap = np.abs(out - v) <= eps_rel * osc
    out[snap] = v[snap]
    return out


def abp_ring_radii(R, rho0, sigma, k_max):
    """r_k = rho0 2^{-1/(2(2-sigma)) - k} R for k = 0..k_max."""
    k = np.arange(k_max + 1)
    return rho0 * 2.0 ** (-1.0 / (2.0 * (2.0 - sigma)) - k) * R


def abp_constant(a0, lam, rho0, sigma0, c_n=1.0):
    """c_n a0 / (lam rho0^4) times sup over sigma in [sigma0, 2) of
    (1 - 2^{-2(2-sigma)})/(2-sigma); the sup is the limit log 4 at sigma -> 2."""
    return c_n * a0 / (lam * rho0**4) * math.log(4.0)


@dataclass(frozen=True)
class AbpReport:
    k: int  # first ring meeting the bound, -1 if none
    fraction: float
    bound: float
    fractions: np.ndarray
    bounds: np.ndarray
    counts: np.ndarray
    c_n_required: float


def abp_measure_check(env, index, f_value, kclass, R, M, rho0, a0=1.0, k_max=12, c_n=1.0, u=None):
    """Fraction of grid nodes in the ring B_{r_k}(x) minus B_{r_{k+1}}(x) where
    u(y) < u(x) + (y - x).grad Gamma(x) - M r_k^2, compared with
    (C / (l(R) R^2)) f(x) / M for each k.

    c_n_required is the smallest dimensional constant for which some ring
    meets the bound.
    """
    if index not in set(env.contact.tolist()):
        raise NoContactPoint(f"node {index} is not on the contact set")
    prof = kclass.profile
    vals = env.values if u is None else np.asarray(u, dtype=float).ravel()
    x = env.points[index]
    g = env.supergradient_at(index)
    radii = abp_ring_radii(R, rho0, prof.sigma, k_max + 1)
    d = np.linalg.norm(env.points - x, axis=1)
    C1 = abp_constant(a0, kclass.lam, rho0, prof.sigma0 or prof.sigma, 1.0)
    rhs1 = C1 / (eval_l(prof, R) * R * R) * (f_value / M)
    fractions, counts = [], []
    for k in range(k_max + 1):
        ring = (d < radii[k]) & (d >= radii[k + 1])
        cnt = int(ring.sum())
        counts.append(cnt)
        if cnt == 0:
            fractions.append(math.nan)
            continue
        affine = vals[index] + (env.points[ring] - x) @ g - M * radii[k] ** 2
        fractions.append(float(np.mean(vals[ring] < affine)))
    fractions = np.array(fractions)
    bounds = np.full(k_max + 1, c_n * rhs1)
    ok = np.nonzero(np.isfinite(fractions) & (fractions <= bounds))[0]
    k = int(ok[0]) if ok.size else -1
    finite = np.isfinite(fractions)
    if not np.any(finite):
        need = math.nan
    elif rhs1 > 0:
        need = float(np.min(fractions[finite]) / rhs1)
    else:
        need = 0.0 if np.min(fractions[finite]) == 0 else math.inf
    return AbpReport(k, float(fractions[k]) if k >= 0 else math.nan, float(bounds[0]),
                     fractions, bounds, np.array(counts), need)
