"""Experiment configuration: flat INI sections parsed into dataclasses.

Example::

    [problem]
    family = power
    n = 5
    rho = 2
    set = euclidean_ball
    radius = 1.0
    x_star = zero
    lipschitz_radius = reach

    [prox]
    kind = half_sq_euclid

    [algorithm]
    scheme = ball
    mode = budget
    N = 1000
    x0 = e1:0.5

    [noise]
    kind = none
    seed = 0

    [run]
    trials = 1
    sweep = 100, 1000, 10000
"""
from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field, fields, replace
import io
import math
import os

from ..geometry import PROX_KINDS
from ..proxmap import SET_KINDS

FAMILIES = ("power", "saddle", "resisting")
SCHEMES = ("da", "ball", "fixed_dilation", "adaptive", "stoca", "adaptive-s")
ADAPTIVE = ("adaptive", "stoca", "adaptive-s")
OUT_ENV = "DUALAVG_OUT"


class ConfigError(ValueError):
    """Validation failure tied to one config field."""

    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class ProblemSpec:
    family: str = "power"
    n: int = 5
    rho: float = 2.0
    set: str = "euclidean_ball"
    radius: float = 1.0
    lo: str = ""
    hi: str = ""
    x_star: str = "zero"
    q: float = 2.0
    L: float = 0.0
    lipschitz_radius: str = ""


@dataclass
class ProxSpec:
    kind: str = "half_sq_euclid"
    p: float = 0.0


@dataclass
class AlgorithmSpec:
    scheme: str = "ball"
    mode: str = "budget"
    eps: float = 0.0
    N: int = 0
    x0: str = "center"
    R0: str = "auto"
    alpha: float = 0.0
    record_every: int = 0


@dataclass
class NoiseSpec:
    kind: str = "none"
    sigma: str = "0"
    seed: int = 0


@dataclass
class RunSpec:
    trials: int = 1
    sweep: list = field(default_factory=list)
    out: str = "results"


@dataclass
class ExperimentConfig:
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    prox: ProxSpec = field(default_factory=ProxSpec)
    algorithm: AlgorithmSpec = field(default_factory=AlgorithmSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    run: RunSpec = field(default_factory=RunSpec)

    @property
    def stochastic(self):
        return self.noise.kind != "none"

    @property
    def sweep_key(self):
        if self.algorithm.mode == "eps" or self.problem.family == "resisting":
            return "eps"
        return "N"

    def at(self, value):
        """Copy with the sweep parameter (N or eps) set to ``value``."""
        if self.sweep_key == "eps":
            return replace(self, algorithm=replace(self.algorithm, eps=float(value)))
        return replace(self, algorithm=replace(self.algorithm, N=int(value)))

    def point_value(self):
        return self.algorithm.eps if self.sweep_key == "eps" else self.algorithm.N


SECTIONS = {"problem": ProblemSpec, "prox": ProxSpec, "algorithm": AlgorithmSpec,
            "noise": NoiseSpec, "run": RunSpec}


def _convert(section, name, kind, raw):
    key = f"{section}.{name}"
    raw = raw.strip()
    try:
        if kind == "int":
            return int(float(raw)) if raw else 0
        if kind == "float":
            return float(raw) if raw else 0.0
        if kind == "list":
            return [float(v) for v in raw.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(key, f"cannot parse {raw!r} as {kind}") from None
    return raw


def _field_kinds(cls):
    kinds = {}
    for f in fields(cls):
        t = f.type if isinstance(f.type, str) else f.type.__name__
        kinds[f.name] = t
    return kinds


def parse_config(text) -> ExperimentConfig:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("file", str(exc)) from None
    parts = {}
    for sec in cp.sections():
        if sec not in SECTIONS:
            raise ConfigError(sec, "unknown section")
    for sec, cls in SECTIONS.items():
        kinds = _field_kinds(cls)
        values = {}
        if cp.has_section(sec):
            for name, raw in cp.items(sec):
                if name not in kinds:
                    raise ConfigError(f"{sec}.{name}", "unknown key")
                values[name] = _convert(sec, name, kinds[name], raw)
        parts[sec] = cls(**values)
    cfg = ExperimentConfig(**parts)
    validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        cfg = parse_config(fh.read())
    override = os.environ.get(OUT_ENV)
    if override:
        cfg.run.out = override
    return cfg


def _fmt(v):
    if isinstance(v, list):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_config(cfg: ExperimentConfig) -> str:
    """Resolved config as INI text (stable key order)."""
    buf = io.StringIO()
    for sec in SECTIONS:
        buf.write(f"[{sec}]\n")
        for name, v in asdict(getattr(cfg, sec)).items():
            buf.write(f"{name} = {_fmt(v)}\n")
        buf.write("\n")
    return buf.getvalue()


def _need(cond, key, msg):
    if not cond:
        raise ConfigError(key, msg)


def validate(cfg: ExperimentConfig):
    """Check every field against the preconditions of the modules it feeds."""
    p, x, a, z, r = cfg.problem, cfg.prox, cfg.algorithm, cfg.noise, cfg.run
    _need(p.family in FAMILIES, "problem.family", f"must be one of {FAMILIES}")
    _need(p.n >= 1, "problem.n", "must be >= 1")
    _need(p.rho >= 2, "problem.rho", "must be >= 2")
    _need(p.set in SET_KINDS, "problem.set", f"must be one of {SET_KINDS}")
    _need(p.radius > 0, "problem.radius", "must be positive")
    if p.set == "box":
        _need(bool(p.lo and p.hi), "problem.lo", "box needs lo and hi")
    if p.family == "saddle":
        _need(p.q >= 2, "problem.q", "must be >= 2")
        _need(p.set != "full", "problem.set", "the saddle objective needs a bounded set")
    if p.family == "resisting":
        _need(p.L > 0, "problem.L", "the resisting oracle needs L > 0")
        _need(p.set == "euclidean_ball", "problem.set", "the resisting oracle lives on a Euclidean ball")
        _need(a.eps > 0, "algorithm.eps", "the resisting oracle needs the target eps")
        _need(a.scheme not in ("stoca", "adaptive-s") and z.kind == "none", "algorithm.scheme",
              "the resisting oracle is deterministic")
    if p.family == "power" and p.set == "full":
        _need(p.lipschitz_radius not in ("", "reach"), "problem.lipschitz_radius",
              "the full space needs a numeric radius")
    _need(x.kind in PROX_KINDS, "prox.kind", f"must be one of {PROX_KINDS}")
    _need(x.p == 0 or 1 < x.p <= 2, "prox.p", "must lie in (1, 2]")
    _need(a.scheme in SCHEMES, "algorithm.scheme", f"must be one of {SCHEMES}")
    _need(a.mode in ("eps", "budget"), "algorithm.mode", "must be eps or budget")
    if a.scheme in ADAPTIVE or a.scheme == "da":
        _need(a.mode == "budget", "algorithm.mode", f"{a.scheme} runs on a budget")
    if p.family != "resisting":
        if a.mode == "eps":
            _need(a.eps > 0 or r.sweep, "algorithm.eps", "eps mode needs eps > 0 or a sweep")
        else:
            _need(a.N >= 1 or r.sweep, "algorithm.N", "budget mode needs N >= 1 or a sweep")
    for v in r.sweep:
        _need(v > 0, "run.sweep", "values must be positive")
        if a.mode == "budget":
            _need(float(v).is_integer(), "run.sweep", "budgets must be integers")
    _need(0 <= a.alpha < 1, "algorithm.alpha", "must lie in [0, 1)")
    _need(a.record_every >= 0, "algorithm.record_every", "must be >= 0")
    if a.R0 != "auto":
        try:
            _need(float(a.R0) > 0, "algorithm.R0", "must be positive")
        except ValueError:
            raise ConfigError("algorithm.R0", "must be 'auto' or a number") from None
    _need(z.kind in ("none", "bounded", "subgaussian"), "noise.kind", "must be none, bounded or subgaussian")
    if z.sigma.strip() != "L":
        try:
            _need(float(z.sigma) >= 0 and math.isfinite(float(z.sigma)), "noise.sigma", "must be >= 0")
        except ValueError:
            raise ConfigError("noise.sigma", "must be a number or 'L'") from None
    if a.scheme in ("stoca", "adaptive-s"):
        _need(z.kind != "none", "noise.kind", f"{a.scheme} needs a noise model")
    _need(z.seed >= 0, "noise.seed", "must be >= 0")
    _need(r.trials >= 1, "run.trials", "must be >= 1")
    return cfg
