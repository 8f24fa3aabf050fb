"""Sweep configuration, read from INI-style key-value files with one section
per module."""
import configparser
from dataclasses import asdict, dataclass, field, replace
import re

from ..nonlocal_ops import QuadratureConfig
from ..regvar import FAMILIES, SlowlyVaryingSpec
from ..solver import SOLVER_QUAD

_FAMILY_RE = re.compile(r"^\s*([A-Za-z]+)\s*(?:\(\s*([-+0-9.eE]+)\s*\))?\s*$")


class ConfigError(ValueError):
    pass


def parse_family(text):
    """'LogSqPow(1)' -> SlowlyVaryingSpec('LogSqPow', 1.0); 'Constant' -> Constant."""
    m = _FAMILY_RE.match(text)
    if not m or m.group(1) not in FAMILIES:
        raise ConfigError(f"unknown profile family {text!r}")
    beta = float(m.group(2)) if m.group(2) is not None else 0.0
    return SlowlyVaryingSpec(m.group(1), beta)


def _floats(text):
    return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]


@dataclass(frozen=True)
class SweepConfig:
    families: tuple = (SlowlyVaryingSpec("Constant", 0.0),)
    sigmas: tuple = (1.0, 1.5, 1.9, 1.99)
    sigma0: float = None
    radii: tuple = (0.25,)
    lam: float = 1.0
    Lam: float = 2.0
    dim: int = 1
    cells: int = 32  # lattice cells per R
    samples: int = 5
    c0: float = 1.0
    uniformity: float = 2.5
    holder_band: float = 0.5
    r_points: int = 40
    r_min: float = 1e-6
    karamata_r: float = 1e-4
    karamata_spread: float = 0.25
    seed: int = 0
    tol: float = 1e-6
    solver_tol: float = 1e-8
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)
    solver_quad: QuadratureConfig = SOLVER_QUAD
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.sigmas:
            raise ConfigError("sigma list is empty")
        if not self.families:
            raise ConfigError("family list is empty")
        if not self.radii:
            raise ConfigError("R list is empty")
        if any(not 0 < s < 2 for s in self.sigmas):
            raise ConfigError("every sigma must lie in (0, 2)")
        s0 = min(self.sigmas) if self.sigma0 is None else self.sigma0
        if any(s < s0 for s in self.sigmas):
            raise ConfigError("every sigma must be at least sigma0")
        object.__setattr__(self, "sigma0", float(s0))
        if not 0 < self.lam <= self.Lam:
            raise ConfigError("need 0 < lambda <= Lambda")
        if self.dim not in (1, 2):
            raise ConfigError("dim must be 1 or 2")
        if self.cells < 2 or self.samples < 1:
            raise ConfigError("cells must be >= 2 and samples >= 1")

    def with_overrides(self, seed=None, tol=None):
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=int(seed))
        if tol is not None:
            cfg = replace(cfg, tol=float(tol))
        return cfg

    def echo(self):
        d = asdict(self)
        d["families"] = [f.label() for f in self.families]
        return d


_QUAD_KEYS = {"inner_split": float, "inner_exponent": float, "inner_radius": float, "ring_factor": float,
              "rings": int, "ring_order": int, "panels": int, "angular_order": int, "rel_tol": float}

_SWEEP_KEYS = {"sigma0": float, "lam": float, "Lam": float, "dim": int, "cells": int, "samples": int,
               "c0": float, "uniformity": float, "holder_band": float, "r_points": int, "r_min": float,
               "karamata_r": float, "karamata_spread": float, "seed": int, "tol": float, "solver_tol": float}


def _quad_from(section, base):
    kw = {}
    for k, v in section.items():
        if k not in _QUAD_KEYS:
            raise ConfigError(f"unknown quadrature key {k!r}")
        kw[k] = _QUAD_KEYS[k](v)
    return replace(base, **kw)


def load_config(path=None, text=None):
    """Build a SweepConfig from an INI file (or string); missing keys keep defaults.

    Sections: [sweep], [quadrature], [solver] (quadrature keys for the solver),
    and free-form sections such as [op-eval], [barrier], [solve] kept in `extra`.
    """
    cp = configparser.ConfigParser()
    cp.optionxform = str
    if path is not None:
        with open(path) as fh:
            cp.read_file(fh)
    elif text is not None:
        cp.read_string(text)
    kw = {}
    if cp.has_section("sweep"):
        for k, v in cp.items("sweep"):
            if k == "families":
                kw[k] = tuple(parse_family(t) for t in re.split(r",(?![^(]*\))", v) if t.strip())
            elif k == "sigmas":
                kw[k] = tuple(_floats(v))
            elif k == "radii":
                kw[k] = tuple(_floats(v))
            elif k in _SWEEP_KEYS:
                kw[k] = _SWEEP_KEYS[k](v)
            else:
                raise ConfigError(f"unknown sweep key {k!r}")
    if cp.has_section("quadrature"):
        kw["quad"] = _quad_from(dict(cp.items("quadrature")), QuadratureConfig())
    if cp.has_section("solver"):
        kw["solver_quad"] = _quad_from(dict(cp.items("solver")), SOLVER_QUAD)
    extra = {s: dict(cp.items(s)) for s in cp.sections() if s not in ("sweep", "quadrature", "solver")}
    try:
        return SweepConfig(extra=extra, **kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
