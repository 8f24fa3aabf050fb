"""Monotone quadrature-collocation scheme for nonlocal Dirichlet problems
on the ball B_{2R} with data prescribed outside."""
from dataclasses import dataclass
import math

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .errors import InvalidGrid, NonMonotoneStencil, NotConverged, UnboundedField
from .fields import FarField, FieldFunction
from .kernels import KernelClass, KernelSpec, radial_kernel
from .nonlocal_ops import OperatorFamily, QuadratureConfig, _radial_terms, build_nodes, inner_fit

OPERATORS = ("PucciMinus", "PucciPlus", "Linear", "InfSup")

# r_in ~ sqrt(h) balances the quadratic-model error r_in^{4-sigma} against the
# interpolation error h^2 r_in^{-sigma}; both are then O(h^{2-sigma/2}).
SOLVER_QUAD = QuadratureConfig(inner_split=1.0, inner_exponent=0.5)


@dataclass(frozen=True, eq=False)
class DirichletProblem:
    operator: str
    kclass: KernelClass
    R: float
    h: float
    exterior: FarField
    rhs: object = 0.0
    kernel: KernelSpec = None
    family: OperatorFamily = None
    quad: QuadratureConfig = SOLVER_QUAD

    def __post_init__(self):
        if self.operator not in OPERATORS:
            raise ValueError(f"unknown operator {self.operator!r}")
        if self.kclass.dim not in (1, 2):
            raise ValueError("the solver works in dimensions 1 and 2")
        if not (self.R > 0 and self.h > 0):
            raise InvalidGrid("R and h must be positive")
        n = 2.0 * self.R / self.h
        if abs(n - round(n)) > 1e-9 * n or round(n) < 2:
            raise InvalidGrid("h must divide 2R")
        if not math.isfinite(self.exterior.bound):
            raise UnboundedField("exterior data must be bounded")
        if self.operator == "Linear" and self.kernel is None:
            raise ValueError("Linear problems need a kernel")
        if self.operator == "InfSup" and self.family is None:
            raise ValueError("InfSup problems need an operator family")

    @property
    def dim(self):
        return self.kclass.dim

    @property
    def n_half(self):
        return int(round(2.0 * self.R / self.h))

    def kernels(self):
        """Kernels whose weights the scheme needs, in a fixed order."""
        if self.operator == "Linear":
            return [self.kernel]
        if self.operator == "InfSup":
            return self.family.flat()
        return [KernelSpec(self.kclass.profile, 1.0, 1.0, self.dim, "ConstLower", 0.0, self.kclass.truncation)]


@dataclass(eq=False)
class DiscreteOperator:
    """Rows are (node, quadrature entry) pairs; each row is a second difference
    written as sum_e coef_e (value_e - u_node), where value_e is either an
    unknown nodal value (col_e >= 0) or known exterior data."""

    problem: DirichletProblem
    nodes: np.ndarray  # (N, n) interior node coordinates
    interior: np.ndarray  # flat lattice indices of interior nodes
    lattice_values: np.ndarray  # exterior data on the lattice (interior entries unused)
    row_node: np.ndarray
    kw: np.ndarray  # (n_kernels, n_rows) kernel weights per row
    e_row: np.ndarray
    e_col: np.ndarray
    e_coef: np.ndarray
    e_val: np.ndarray

    @property
    def size(self):
        return len(self.nodes)

    def second_differences(self, u):
        vals = np.where(self.e_col >= 0, u[np.maximum(self.e_col, 0)], self.e_val)
        centre = u[self.row_node[self.e_row]]
        contrib = self.e_coef * (vals - centre)
        return np.bincount(self.e_row, contrib, minlength=len(self.row_node))

    def _node_sum(self, w):
        return np.bincount(self.row_node, w, minlength=self.size)

    def member_values(self, u, mu=None):
        mu = self.second_differences(u) if mu is None else mu
        return np.stack([self._node_sum(k * mu) for k in self.kw])

    def row_weights(self, u):
        """Weights of the linear operator active at u (policy)."""
        pb = self.problem
        mu = self.second_differences(u)
        lam, Lam = pb.kclass.lam, pb.kclass.Lam
        if pb.operator == "PucciPlus":
            return self.kw[0] * np.where(mu > 0, Lam, lam), mu
        if pb.operator == "PucciMinus":
            return self.kw[0] * np.where(mu > 0, lam, Lam), mu
        if pb.operator == "Linear":
            return self.kw[0], mu
        choice = self.infsup_choice(u, mu)
        return self.kw[choice[self.row_node], np.arange(len(self.row_node))], mu

    def infsup_choice(self, u, mu=None):
        vals = self.member_values(u, mu)
        fam = self.problem.family
        offsets = np.cumsum([0] + [len(r) for r in fam.members])
        best_val = np.full(self.size, np.inf)
        best = np.zeros(self.size, dtype=int)
        for b in range(len(fam.members)):
            block = vals[offsets[b]:offsets[b + 1]]
            a = np.argmax(block, axis=0)
            v = block[a, np.arange(self.size)]
            better = v < best_val
            best_val = np.where(better, v, best_val)
            best = np.where(better, offsets[b] + a, best)
        return best

    def apply(self, u):
        w, mu = self.row_weights(u)
        return self._node_sum(w * mu)

    def matrix(self, w):
        """Sparse G and vector b with (operator at fixed weights)(u) = G u + b."""
        rw = w[self.e_row] * self.e_coef
        node = self.row_node[self.e_row]
        unk = self.e_col >= 0
        rows = np.concatenate([node[unk], node])
        cols = np.concatenate([self.e_col[unk], node])
        data = np.concatenate([rw[unk], -rw])
        G = sp.csr_matrix((data, (rows, cols)), shape=(self.size, self.size))
        b = np.bincount(node[~unk], rw[~unk] * self.e_val[~unk], minlength=self.size)
        return G, b

    def stencil_mass(self):
        """Largest diagonal magnitude over all admissible policies."""
        pb = self.problem
        scale = pb.kclass.Lam if pb.operator.startswith("Pucci") else 1.0
        coef_sum = np.bincount(self.e_row, self.e_coef, minlength=len(self.row_node))
        return float(max(self._node_sum(k * coef_sum).max() for k in self.kw) * scale)

    def field(self, u):
        lat = self.lattice_values.copy()
        lat[self.interior] = u
        pb = self.problem
        side = 2 * pb.n_half + 1
        return FieldFunction.from_grid(lat.reshape((side,) * pb.dim), pb.h, 2.0 * pb.R, pb.exterior)


def lattice(problem):
    m = problem.n_half
    ax = np.arange(-m, m + 1) * problem.h
    mesh = np.meshgrid(*([ax] * problem.dim), indexing="ij")
    pts = np.stack(mesh, axis=-1).reshape(-1, problem.dim)
    inside = np.sqrt(np.sum(pts * pts, axis=-1)) < 2.0 * problem.R * (1.0 - 1e-12)
    return pts, inside


def assemble(problem):
    pb = problem
    q = pb.quad
    r_in = q.lattice_r_in(pb.h, 2.0 * pb.R)
    if r_in < 2.0 * pb.h * (1 - 1e-12):
        raise NonMonotoneStencil(
            f"inner radius {r_in:.3g} puts the quadratic model inside the first two lattice cells")
    pts, inside = lattice(pb)
    interior = np.nonzero(inside)[0]
    nodes = pts[interior]
    N = len(nodes)
    col_of = np.full(len(pts), -1)
    col_of[interior] = np.arange(N)
    lat_vals = np.zeros(len(pts))
    lat_vals[~inside] = pb.exterior(pts[~inside])

    ns = build_nodes(pb.dim, r_in, q, r_max=pb.kclass.truncation)
    y_ring = ns.points().reshape(-1, pb.dim)
    rho_ring = np.broadcast_to(ns.rho[None, :], (len(ns.dirs), len(ns.rho))).ravel()
    meas_ring = (2.0 * ns.dir_w[:, None] * ns.rho_w[None, :]).ravel()
    rk, w_in = inner_fit(r_in, pb.h)
    y_inner = (rk[None, :, None] * ns.dirs[:, None, :]).reshape(-1, pb.dim)
    specs = pb.kernels()
    lim = pb.exterior.limit

    # per-entry offsets y for one node, with row ids relative to the node
    ys = np.concatenate([y_ring, y_inner])
    n_ring, n_inner = len(y_ring), len(y_inner)
    rows_per_node = n_ring + n_inner + (1 if lim is not None else 0)

    kw_one = []
    for spec in specs:
        k_ring = radial_kernel(spec, rho_ring) * meas_ring
        inner_m, tail_m = _radial_terms(spec, ns.r_in, ns.r_max, q.rel_tol)
        k_inner = (2.0 * inner_m * ns.dir_w[:, None] * w_in[None, :]).ravel()
        parts = [k_ring, k_inner]
        if lim is not None:
            parts.append(np.array([ns.sphere * tail_m]))
        kw_one.append(np.concatenate(parts))
    kw = np.stack([np.tile(k, N) for k in kw_one])

    e_row, e_col, e_coef, e_val = [], [], [], []
    side = 2 * pb.n_half + 1
    proto = FieldFunction.from_grid(np.zeros((side,) * pb.dim), pb.h, 2.0 * pb.R, pb.exterior)
    local_rows = np.arange(len(ys))
    for i, x in enumerate(nodes):
        base = i * rows_per_node
        for sgn in (1.0, -1.0):
            P = x + sgn * ys
            ins = proto.inside(P)
            # exterior points: known data
            out_idx = np.nonzero(~ins)[0]
            e_row.append(base + local_rows[out_idx])
            e_col.append(np.full(len(out_idx), -1))
            e_coef.append(np.ones(len(out_idx)))
            e_val.append(pb.exterior(P[out_idx]))
            in_idx = np.nonzero(ins)[0]
            if in_idx.size:
                corners, w = proto.lattice_weights(P[in_idx])
                rr = np.repeat(base + local_rows[in_idx], corners.shape[1])
                cc = corners.ravel()
                ww = w.ravel()
                keep = ww != 0.0
                rr, cc, ww = rr[keep], cc[keep], ww[keep]
                e_row.append(rr)
                e_col.append(col_of[cc])
                e_coef.append(ww)
                e_val.append(np.where(col_of[cc] >= 0, 0.0, lat_vals[cc]))
        if lim is not None:
            r = base + rows_per_node - 1
            e_row.append(np.array([r, r]))
            e_col.append(np.array([-1, -1]))
            e_coef.append(np.ones(2))
            e_val.append(np.array([lim, lim], dtype=float))
    op = DiscreteOperator(
        pb, nodes, interior, lat_vals, np.repeat(np.arange(N), rows_per_node), kw,
        np.concatenate(e_row), np.concatenate(e_col), np.concatenate(e_coef).astype(float),
        np.concatenate(e_val).astype(float))
    if np.any(op.e_coef < 0) or np.any(op.kw < 0):
        raise NonMonotoneStencil("negative off-centre stencil weight")
    return op


@dataclass(eq=False)
class SolveResult:
    u: FieldFunction
    values: np.ndarray  # interior nodal values
    nodes: np.ndarray
    residual: float
    iterations: int
    converged: bool
    method: str


def _rhs_vector(problem, nodes):
    f = problem.rhs
    if callable(f):
        return np.asarray(f(nodes), dtype=float).reshape(len(nodes))
    arr = np.asarray(f, dtype=float)
    if arr.ndim == 0:
        return np.full(len(nodes), float(arr))
    if arr.shape != (len(nodes),):
        raise InvalidGrid("rhs must be scalar, callable or one value per interior node")
    return arr


def residual(op, u, f):
    return float(np.max(np.abs(op.apply(u) - f))) if len(u) else 0.0


def fixed_point(op, f, u0, tol, max_iter):
    """Damped iteration u <- u + tau (O u - f), tau = 1 / stencil mass."""
    tau = 1.0 / op.stencil_mass()
    u = u0.copy()
    res = residual(op, u, f)
    it = 0
    while res > tol and it < max_iter:
        u = u + tau * (op.apply(u) - f)
        res = residual(op, u, f)
        it += 1
    return u, res, it


def policy_iteration(op, f, u0, tol, max_policies):
    u = u0.copy()
    res = residual(op, u, f)
    it = 0
    last = None
    while res > tol and it < max_policies:
        w, _ = op.row_weights(u)
        if last is not None and np.array_equal(w, last):
            break
        last = w
        G, b = op.matrix(w)
        u = spsolve(G.tocsc(), f - b)
        res = residual(op, u, f)
        it += 1
    return u, res, it


def solve(problem, tol=1e-8, max_iter=20000, method="policy", op=None):
    """Solve the discrete problem; raises NotConverged when the residual stays
    above tol. Policy iteration (at most 50 policies) falls back to the damped
    fixed-point iteration."""
    op = assemble(problem) if op is None else op
    f = _rhs_vector(problem, op.nodes)
    lim = problem.exterior.limit
    u0 = np.full(op.size, 0.0 if lim is None else float(lim))
    used = method
    if method == "policy":
        u, res, it = policy_iteration(op, f, u0, tol, 50)
        if res > tol:
            used = "policy+fixed_point"
            u, res2, it2 = fixed_point(op, f, u, tol, max_iter)
            res, it = res2, it + it2
    elif method == "fixed_point":
        u, res, it = fixed_point(op, f, u0, tol, max_iter)
    else:
        raise ValueError(f"unknown method {method!r}")
    converged = res <= tol
    result = SolveResult(op.field(u), u, op.nodes, res, it, converged, used)
    if not converged:
        raise NotConverged(f"residual {res:.3e} above {tol:.1e} after {it} iterations",
                           residual=res, iterations=it, solution=result)
    return result
