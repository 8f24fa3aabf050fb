"""Experiment runners. Each returns a SweepReport whose rows depend only on
(config, seed)."""
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache
import math

import numpy as np

from ..barriers import (CompositeBarrierSpec, choose_p, composite_psi, comparison_delta_R, find_eps0)
from ..errors import NotConverged, RegvarError
from ..fields import FieldFunction, bump, constant, random_gaussians
from ..kernels import KernelClass, KernelSpec, radial_tail, sphere_area
from ..nonlocal_ops import OperatorFamily, operator_report, pucci_truncated
from ..regvar import (KernelProfile, compute_rho1, eval_L, eval_l, find_rho, karamata_ratio, moment_below,
                      potter_constants, scale_integral, sweep_delta, tail_integral)
from ..solver import DirichletProblem, solve
from .config import parse_family
from .report import Row, SweepReport


def _map(fn, jobs, workers):
    if workers is None or workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


def _profile(cfg, l0, sigma):
    return KernelProfile(sigma, l0, cfg.sigma0)


@lru_cache(maxsize=256)
def profile_constants(l0, sigma, sigma0, dim):
    """Potter constants on (0,1] and [1,inf), the Karamata radius and rho0."""
    prof = KernelProfile(sigma, l0, sigma0)
    delta = sweep_delta(sigma0) * (2.0 - sigma)
    a0 = potter_constants(prof, delta, (0.0, 1.0)).a
    a_inf = potter_constants(prof, delta, (1.0, math.inf)).a
    rho = find_rho(prof)
    rho1 = compute_rho1(a0, a_inf, sigma0, rho)
    rho0 = min(rho1, rho, 1.0 / (32.0 * math.sqrt(dim)))
    return {"delta": delta, "a0": a0, "a_inf": a_inf, "rho": rho, "rho1": rho1, "rho0": rho0}


# ---------------------------------------------------------------- lemma suite

def _lemma_rows(args):
    cfg, l0, sigma = args
    prof = _profile(cfg, l0, sigma)
    beta = l0.beta
    rows = []

    def add(q, value, bound, ok, R=math.nan):
        rows.append(("lemma-suite", sigma, beta, R, f"{l0.label()}:{q}", value, bound, bool(ok)))

    try:
        const = profile_constants(l0, sigma, cfg.sigma0, cfg.dim)
    except RegvarError as exc:
        add("constants", str(exc), "", False)
        return rows
    a0, a_inf = const["a0"], const["a_inf"]
    add("potter_a0", a0, math.inf, math.isfinite(a0))
    add("potter_a_inf", a_inf, math.inf, math.isfinite(a_inf))
    tol = cfg.tol
    rs = np.logspace(math.log10(cfg.r_min), 0.0, cfg.r_points)
    w = 2.0 - sigma
    for r in rs:
        r = float(r)
        try:
            lr = eval_l(prof, r)
            m1, e1 = moment_below(prof, r, 1)
            m3, e3 = moment_below(prof, r, 3)
            L, eL = scale_integral(prof, r)
        except RegvarError as exc:
            add("quadrature", str(exc), "", False, r)
            continue
        ok1 = e1 <= tol * abs(m1)
        base = r * r * lr / w
        add("moment1_lower", m1, base / (2.0 * a0), ok1 and m1 >= base / (2.0 * a0), r)
        add("moment1_upper", m1, 2.0 * a0 * base, ok1 and m1 <= 2.0 * a0 * base, r)
        add("moment3_upper", m3, a0 * r**4 * lr, e3 <= tol * abs(m3) and m3 <= a0 * r**4 * lr, r)
        lower = (r ** (-sigma / 2.0) - 1.0) / (2.0 * a0 * a0)
        add("scale_lower", L, lower, eL <= tol * max(abs(L), 1e-300) and L >= lower, r)
    try:
        t, et = tail_integral(prof, 1.0)
        add("tail_upper", sigma * t, 2.0 * a_inf, et <= tol * t and sigma * t <= 2.0 * a_inf)
    except RegvarError as exc:
        add("tail_upper", str(exc), "", False)
    # Karamata ratio: inside [1/2, 2] below rho, and closer to 1 as r shrinks
    rho = const["rho"]
    below = np.logspace(math.log10(cfg.r_min), math.log10(rho), 16)[:-1]
    ratios = np.array([karamata_ratio(prof, float(r)) for r in below])
    add("karamata_band_min", float(ratios.min()), 0.5, ratios.min() >= 0.5)
    add("karamata_band_max", float(ratios.max()), 2.0, ratios.max() <= 2.0)
    rk = cfg.karamata_r
    d_near = abs(karamata_ratio(prof, rk) - 1.0)
    d_far = abs(karamata_ratio(prof, min(100.0 * rk, 0.5)) - 1.0)
    add("karamata_decay", d_near, d_far, d_near <= d_far)
    return rows


def run_lemma_suite(cfg, workers=None):
    """Kernel integral bounds, Potter constants and Karamata checks over
    families x sigma x r grid."""
    rep = SweepReport("lemma-suite")
    jobs = [(cfg, l0, s) for l0 in cfg.families for s in cfg.sigmas]
    for rows in _map(_lemma_rows, jobs, workers):
        rep.extend(_rows(rows))
    rep.summary = {"rows": len(rep.rows), "failed": len(rep.failures())}
    return rep


def _rows(tuples):
    return [Row(*t) for t in tuples]


# ---------------------------------------------------------------- regvar check

def run_regvar_check(cfg, workers=None):
    """Closed-form anchors, Karamata uniformity and the radii rho, rho1, rho0."""
    rep = SweepReport("regvar-check")
    for l0 in cfg.families:
        devs = []
        for s in cfg.sigmas:
            prof = _profile(cfg, l0, s)
            name = l0.label()
            c = profile_constants(l0, s, cfg.sigma0, cfg.dim)
            for key in ("a0", "a_inf", "rho", "rho1", "rho0"):
                rep.add("regvar-check", s, l0.beta, math.nan, f"{name}:{key}", c[key], "", math.isfinite(c[key]))
            dev = abs(karamata_ratio(prof, cfg.karamata_r) - 1.0)
            devs.append(dev)
            rep.add("regvar-check", s, l0.beta, math.nan, f"{name}:karamata_dev", dev, "", math.isfinite(dev))
            below = np.logspace(math.log10(cfg.r_min), math.log10(c["rho"]), 24)[:-1]
            q = np.array([karamata_ratio(prof, float(r)) for r in below])
            rep.add("regvar-check", s, l0.beta, math.nan, f"{name}:karamata_band",
                    float(np.max(np.abs(np.log(q)))), math.log(2.0), bool(np.all((q >= 0.5) & (q <= 2.0))))
            if l0.family == "Constant":
                err_abs, err_rel = closed_form_errors(prof)
                rep.add("regvar-check", s, l0.beta, math.nan, f"{name}:closed_form_abs", err_abs, 1e-10, err_abs <= 1e-10)
                rep.add("regvar-check", s, l0.beta, math.nan, f"{name}:closed_form_rel", err_rel, 1e-12, err_rel <= 1e-12)
        spread = max(devs) - min(devs)
        rep.add("regvar-check", math.nan, l0.beta, math.nan, f"{l0.label()}:karamata_spread", spread,
                cfg.karamata_spread, spread <= cfg.karamata_spread)
    rep.summary = {"failed": len(rep.failures())}
    return rep


def closed_form_errors(prof, points=50):
    """Quadrature L against r^-sigma - 1: absolute error on [1e-2, 1] and
    relative error on [1e-8, 1e-2]."""
    s = prof.sigma
    mid = np.logspace(-2.0, 0.0, points)
    low = np.logspace(-8.0, -2.0, points)
    ea = max(abs(scale_integral(prof, float(r))[0] - math.expm1(-s * math.log(r))) for r in mid)
    er = max(abs(scale_integral(prof, float(r))[0] / math.expm1(-s * math.log(r)) - 1.0) for r in low)
    return ea, er


# ---------------------------------------------------------------- operators

def _op_field(cfg):
    sec = cfg.extra.get("op-eval", {})
    kind = sec.get("field", "bump")
    if kind == "bump":
        far = bump()
    elif kind.startswith("constant"):
        far = constant(float(kind.split(":")[1]) if ":" in kind else 1.0)
    elif kind == "gaussians":
        far = random_gaussians(np.random.default_rng(cfg.seed), cfg.dim)
    else:
        raise ValueError(f"unknown op-eval field {kind!r}")
    xs = [float(t) for t in sec.get("x", "0.0").split(",")]
    x = np.array(xs[: cfg.dim] + [0.0] * (cfg.dim - len(xs[: cfg.dim])))
    return FieldFunction.analytic(far, cfg.dim), x


def run_op_eval(cfg, workers=None):
    """Extremal operators of a configured field at one point, with the
    sandwich and truncation checks."""
    rep = SweepReport("op-eval")
    u, x = _op_field(cfg)
    for l0 in cfg.families:
        for s in cfg.sigmas:
            prof = _profile(cfg, l0, s)
            kc = KernelClass(prof, cfg.lam, cfg.Lam, cfg.dim)
            name = l0.label()
            K = KernelSpec(prof, cfg.lam, cfg.Lam, cfg.dim, "RadialBlend", 0.0)
            vals = operator_report(u, x, kc, cfg.quad, kernels=(K,))
            tp, tm = pucci_truncated(u, x, kc, cfg.quad, 1.0)
            kappa = cfg.Lam * sphere_area(cfg.dim) * radial_tail(KernelSpec(prof, 1.0, 1.0, cfg.dim), 1.0)[0]
            gap = 4.0 * kappa * u.sup_bound + cfg.tol
            add = lambda q, v, b, ok: rep.add("op-eval", s, l0.beta, math.nan, f"{name}:{q}", v, b, bool(ok))
            add("M_plus", vals["plus"], "", math.isfinite(vals["plus"]))
            add("M_minus", vals["minus"], "", math.isfinite(vals["minus"]))
            slack = cfg.tol * max(1.0, abs(vals["plus"]), abs(vals["minus"]))
            add("linear_sandwich", vals["linear0"], vals["plus"],
                vals["minus"] - slack <= vals["linear0"] <= vals["plus"] + slack)
            add("truncation_gap_plus", abs(tp - vals["plus"]), gap, abs(tp - vals["plus"]) <= gap)
            add("truncation_gap_minus", abs(tm - vals["minus"]), gap, abs(tm - vals["minus"]) <= gap)
    return rep


# ---------------------------------------------------------------- barriers

def _barrier_rows(args):
    cfg, l0, s = args
    sec = cfg.extra.get("barrier", {})
    R = float(sec.get("R", 0.4))
    kappa1 = float(sec.get("kappa1", 0.1))
    lam = float(sec.get("lam", 1.0))
    Lam = float(sec.get("Lam", 1.0))
    delta1 = float(sec.get("delta1", 0.5))
    delta2 = float(sec.get("delta2", 0.75))
    prof = _profile(cfg, l0, s)
    kc = KernelClass(prof, lam, Lam, cfg.dim)
    p = choose_p(cfg.dim, lam, Lam)
    name = l0.label()
    rows = []

    def add(q, v, b, ok, RR=R):
        rows.append(("barrier-verify", s, l0.beta, RR, f"{name}:{q}", v, b, bool(ok)))

    add("p", float(p), "", True)
    try:
        spec, rep = find_eps0(R, kappa1, p, kc, cfg.quad, cfg.tol)
        add("eps0", spec.eps0, 0.125, True)
        add("power_barrier_min", rep.min_value, -cfg.tol, rep.passed)
    except RegvarError as exc:
        add("power_barrier_min", str(exc), -cfg.tol, False)
        return rows
    dq = comparison_delta_R(kc, R, cfg.quad, method="quadrature")
    if l0.family == "Constant":
        closed = lam * sphere_area(cfg.dim) * R ** (-s) / 2.0
        add("comparison_delta_R", dq, closed, abs(dq - closed) <= 1e-6)
    else:
        add("comparison_delta_R", dq, "", math.isfinite(dq) and dq > 0)
    comp = CompositeBarrierSpec(R, delta1, delta2, spec.eps0 * delta1 / 2.0, p, kc)
    psi, _ = composite_psi(comp, cfg.quad)
    add("composite_psi", psi, "", math.isfinite(psi))
    return rows


def run_barrier_verify(cfg, workers=None):
    rep = SweepReport("barrier-verify")
    jobs = [(cfg, l0, s) for l0 in cfg.families for s in cfg.sigmas]
    for rows in _map(_barrier_rows, jobs, workers):
        rep.extend(_rows(rows))
    psis = [r.value for r in rep.rows if r.quantity.endswith("composite_psi") and isinstance(r.value, float)]
    rep.summary = {"max_psi": max(psis) if psis else math.nan, "failed": len(rep.failures())}
    return rep


# ---------------------------------------------------------------- Harnack / Hoelder

def exterior_datum(seed, sample, dim, R):
    """Seeded sum of 1-3 nonnegative Gaussian bumps centred outside B_{2R}."""
    rng = np.random.default_rng([int(seed), int(sample)])
    return random_gaussians(rng, dim, center_range=(0.0, 4.0 * R), width_range=(0.3 * R, R),
                            amp_range=(0.2, 1.0), outside=2.0 * R)


def harnack_problem(cfg, l0, sigma, R, far):
    prof = _profile(cfg, l0, sigma)
    kc = KernelClass(prof, cfg.lam, cfg.Lam, cfg.dim)
    return DirichletProblem("PucciMinus", kc, R, R / cfg.cells, far, rhs=-cfg.c0, quad=cfg.solver_quad)


def harnack_quotients(result, R, c0, L_scale):
    """(Q with C0/L(rho0 R), Q with raw C0)."""
    r = np.linalg.norm(result.nodes, axis=1)
    sup = float(np.max(result.values[r <= 0.5 * R * (1 + 1e-12)]))
    u0 = float(result.values[int(np.argmin(r))])
    return sup / (u0 + c0 / L_scale), sup / (u0 + c0)


def holder_fit(nodes, values, R, h, flat_tol=1e-12):
    """Fit osc(B_r) ~ r^s over dyadic radii R 2^-j >= 2h.

    Returns (alpha, slope, radii, osc) with alpha = min(s, 1): a Hoelder
    exponent above 1 carries no information (smooth fields decay like r^2
    where their gradient vanishes). alpha and slope are None for flat fields.
    """
    nodes = np.asarray(nodes, dtype=float).reshape(len(values), -1)
    r = np.linalg.norm(nodes, axis=1)
    radii, osc = [], []
    rad = R
    while rad >= 2.0 * h * (1 - 1e-12):
        inside = values[r <= rad * (1 + 1e-12)]
        radii.append(rad)
        osc.append(float(inside.max() - inside.min()))
        rad *= 0.5
    radii, osc = np.array(radii), np.array(osc)
    scale = max(1.0, float(np.max(np.abs(values))))
    if len(osc) < 2 or np.all(osc <= flat_tol * scale):
        return None, None, radii, osc
    keep = osc > flat_tol * scale
    slope = float(np.polyfit(np.log(radii[keep]), np.log(osc[keep]), 1)[0])
    return min(slope, 1.0), slope, radii, osc


def holder_constant(alpha, radii, osc, R, norm):
    if alpha is None:
        return 0.0
    return float(np.max(osc * (R / radii) ** alpha) / norm)


def holder_self_test(R=1.0, cells=1024):
    """Fitted exponent of |x|^{1/2} sampled on a lattice; should be 0.5."""
    h = R / cells
    x = np.arange(-cells, cells + 1) * h
    alpha = holder_fit(x[:, None], np.sqrt(np.abs(x)), R, h)[0]
    return alpha


def _solve_job(args):
    cfg, l0, sigma, R, sample = args
    far = exterior_datum(cfg.seed, sample, cfg.dim, R)
    const = profile_constants(l0, sigma, cfg.sigma0, cfg.dim)
    prof = _profile(cfg, l0, sigma)
    L_scale = float(eval_L(prof, const["rho0"] * R))
    out = {"sigma": sigma, "beta": l0.beta, "R": R, "sample": sample, "label": l0.label(),
           "rho0": const["rho0"], "L": L_scale}
    try:
        res = solve(harnack_problem(cfg, l0, sigma, R, far), tol=cfg.solver_tol)
    except NotConverged as exc:
        out["error"] = f"not converged: residual {exc.residual:.3e}"
        return out
    q_l, q_raw = harnack_quotients(res, R, cfg.c0, L_scale)
    alpha, slope, radii, osc = holder_fit(res.nodes, res.values, R, R / cfg.cells)
    norm = max(float(np.max(np.abs(res.values))), far.bound) + cfg.c0 / L_scale
    out.update(Q_L=q_l, Q_raw=q_raw, residual=res.residual, iterations=res.iterations,
               alpha=alpha, slope=slope, holder_C=holder_constant(alpha, radii, osc, R, norm))
    return out


def _solve_all(cfg, workers):
    jobs = [(cfg, l0, s, R, k) for l0 in cfg.families for R in cfg.radii
            for k in range(cfg.samples) for s in cfg.sigmas]
    return _map(_solve_job, jobs, workers)


def _group(results):
    groups = {}
    for r in results:
        groups.setdefault((r["label"], r["R"], r["sample"]), []).append(r)
    return groups


def run_harnack_sweep(cfg, workers=None, results=None):
    """Harnack quotients of seeded PucciMinus solutions across sigma."""
    rep = SweepReport("harnack-sweep")
    results = _solve_all(cfg, workers) if results is None else results
    s_lo, s_hi = min(cfg.sigmas), max(cfg.sigmas)
    ratios, q_max = [], -math.inf
    for (label, R, sample), rs in _group(results).items():
        ref = next((r for r in rs if r["sigma"] == s_lo and "error" not in r), None)
        for r in rs:
            tag = f"{label}:sample{sample}"
            if "error" in r:
                rep.add("harnack-sweep", r["sigma"], r["beta"], R, f"{tag}:solve", r["error"], "", False)
                continue
            rep.add("harnack-sweep", r["sigma"], r["beta"], R, f"{tag}:residual", r["residual"],
                    cfg.solver_tol, r["residual"] <= cfg.solver_tol)
            bound = cfg.uniformity * ref["Q_L"] if ref is not None else math.nan
            ok = ref is not None and math.isfinite(r["Q_L"]) and r["Q_L"] <= bound
            rep.add("harnack-sweep", r["sigma"], r["beta"], R, f"{tag}:Q_L", r["Q_L"], bound, ok)
            rep.add("harnack-sweep", r["sigma"], r["beta"], R, f"{tag}:Q_raw", r["Q_raw"], "",
                    math.isfinite(r["Q_raw"]))
            q_max = max(q_max, r["Q_L"])
            if ref is not None and r["sigma"] == s_hi:
                ratios.append(r["Q_L"] / ref["Q_L"])
    ratio = max(ratios) if ratios else math.nan
    rep.add("harnack-sweep", math.nan, math.nan, math.nan, "summary:max_Q_L", q_max, "", math.isfinite(q_max))
    rep.add("harnack-sweep", math.nan, math.nan, math.nan, "summary:uniformity_ratio", ratio, cfg.uniformity,
            bool(ratio <= cfg.uniformity))
    rep.summary = {"max_Q_L": q_max, "uniformity_ratio": ratio, "sigma_min": s_lo, "sigma_max": s_hi}
    return rep


def run_holder_sweep(cfg, workers=None, results=None):
    """Oscillation-decay exponents of the same seeded solutions, plus the
    |x|^{1/2} measurement self-test."""
    rep = SweepReport("holder-sweep")
    results = _solve_all(cfg, workers) if results is None else results
    s_lo = min(cfg.sigmas)
    alphas, consts = [], []
    for (label, R, sample), rs in _group(results).items():
        ref = next((r for r in rs if r["sigma"] == s_lo and "error" not in r), None)
        a_ref = None if ref is None else ref["alpha"]
        for r in rs:
            tag = f"{label}:sample{sample}"
            if "error" in r:
                rep.add("holder-sweep", r["sigma"], r["beta"], R, f"{tag}:solve", r["error"], "", False)
                continue
            a = r["alpha"]
            if a is None:
                rep.add("holder-sweep", r["sigma"], r["beta"], R, f"{tag}:alpha", "flat", "", True)
            else:
                alphas.append(a)
                ok = a > 0 and a_ref is not None and abs(a / a_ref - 1.0) <= cfg.holder_band
                rep.add("holder-sweep", r["sigma"], r["beta"], R, f"{tag}:alpha", a, a_ref, ok)
                rep.add("holder-sweep", r["sigma"], r["beta"], R, f"{tag}:osc_slope", r["slope"], "", True)
            consts.append(r["holder_C"])
            rep.add("holder-sweep", r["sigma"], r["beta"], R, f"{tag}:constant", r["holder_C"], "",
                    math.isfinite(r["holder_C"]))
    st = holder_self_test()
    rep.add("holder-sweep", math.nan, math.nan, 1.0, "selftest:alpha_sqrt", st, 0.5, abs(st - 0.5) <= 0.02)
    rep.summary = {"min_alpha": min(alphas) if alphas else math.nan,
                   "max_alpha": max(alphas) if alphas else math.nan,
                   "max_constant": max(consts) if consts else math.nan, "selftest_alpha": st}
    return rep


# ---------------------------------------------------------------- single solve

def solve_from_config(cfg):
    """Problem described by the [solve] section; returns (problem, result or exception)."""
    sec = cfg.extra.get("solve", {})
    l0 = parse_family(sec["family"]) if "family" in sec else cfg.families[0]
    sigma = float(sec.get("sigma", cfg.sigmas[0]))
    R = float(sec.get("R", cfg.radii[0]))
    cells = int(sec.get("cells", cfg.cells))
    kind = sec.get("exterior", "gaussians")
    if kind == "gaussians":
        far = exterior_datum(cfg.seed, 0, cfg.dim, R)
    elif kind == "bump":
        far = bump()
    elif kind.startswith("constant"):
        far = constant(float(kind.split(":")[1]) if ":" in kind else 1.0)
    else:
        raise ValueError(f"unknown exterior datum {kind!r}")
    op = sec.get("operator", "PucciMinus")
    prof = _profile(cfg, l0, sigma)
    kc = KernelClass(prof, cfg.lam, cfg.Lam, cfg.dim)
    kernel = KernelSpec(prof, cfg.lam, cfg.Lam, cfg.dim, "RadialBlend", 0.0) if op == "Linear" else None
    family = None
    if op == "InfSup":
        ks = [KernelSpec(prof, cfg.lam, cfg.Lam, cfg.dim, "RadialBlend", ph) for ph in (0.0, 2.0, 4.0)]
        family = OperatorFamily(((ks[0], ks[1]), (ks[2],)))
    pb = DirichletProblem(op, kc, R, R / cells, far, rhs=float(sec.get("rhs", 0.0)), kernel=kernel,
                          family=family, quad=cfg.solver_quad)
    tol = float(sec.get("tol", cfg.solver_tol))
    try:
        return pb, solve(pb, tol=tol)
    except NotConverged as exc:
        return pb, exc
