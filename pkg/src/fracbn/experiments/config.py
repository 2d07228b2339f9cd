"""Run configuration loaded from a TOML file.

Layout (all tables optional except ``problem`` and ``domain``)::

    [problem]
    s = 0.5
    lam_ratio = 0.5        # or lam = 1.2; ratio is relative to lambda_1^s
    x0 = [0.0, 0.0]

    [domain]
    kind = "disc"
    radius = 1.0
    resolution = 33

    [field]
    kind = "constant"
    A = [[1.0, 0.0], [0.0, 1.0]]

    [solver]   tolerance, max_iter, n_starts, spectrum_tol, n_eigen
    [cylinder] ratio, y_max_factor, levels, calibration_resolution
    [sweep]    kind, r, k_min, k_max, j_min, j_max, alpha, beta, delta,
               direction, reading, drop, radii
    [audit]    levels, lams
    [run]      seed, cache_dir, out_dir, threads
"""

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .._validation import check_dimension, check_exponent, check_positive
from ..domain import domain_from_dict
from ..exceptions import PreconditionError


@dataclass
class SolverSpec:
    tolerance: float = 1e-7
    max_iter: int = 2000
    n_starts: int = 5
    spectrum_tol: float = 1e-8
    n_eigen: Optional[int] = None


@dataclass
class CylinderSpec:
    ratio: float = 1.15
    y_max_factor: float = 5.0
    levels: int = 3
    calibration_resolution: Optional[int] = None


@dataclass
class SweepSpec:
    kind: str = "interior"
    r: float = 0.5
    k_min: int = 2
    k_max: int = 12
    j_min: int = 1
    j_max: int = 8
    alpha: float = 1.0
    beta: Optional[float] = None
    delta: float = 0.25
    direction: Optional[list] = None
    reading: str = "default"
    drop: int = 2
    radii: list = field(default_factory=lambda: [2.0**k for k in range(4, 13)])


@dataclass
class AuditSpec:
    levels: list = field(default_factory=lambda: [17, 33, 65])
    lams: list = field(default_factory=lambda: [0.0, -1.0])


@dataclass
class RunSpec:
    seed: int = 0
    cache_dir: Optional[str] = None
    out_dir: str = "out"
    threads: int = 1


@dataclass
class RunConfig:
    """Validated run configuration; ``raw`` is the echo written into reports."""

    s: float
    domain: dict
    resolution: object
    field: dict
    lam: Optional[float] = None
    lam_ratio: Optional[float] = None
    x0: Optional[list] = None
    solver: SolverSpec = field(default_factory=SolverSpec)
    cylinder: CylinderSpec = field(default_factory=CylinderSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    audit: AuditSpec = field(default_factory=AuditSpec)
    run: RunSpec = field(default_factory=RunSpec)
    raw: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.descriptor().dim

    def descriptor(self):
        return domain_from_dict(self.domain)

    def resolve_lam(self, lam1s):
        """Absolute lambda from ``lam`` or ``lam_ratio * lambda_1^s``."""
        if self.lam is not None:
            return float(self.lam)
        return float(self.lam_ratio) * float(lam1s)

    def echo(self):
        return copy.deepcopy(self.raw)

    @property
    def hash(self):
        return hashlib.sha256(json.dumps(self.raw, sort_keys=True).encode()).hexdigest()[:16]


def _section(raw, name, cls):
    table = dict(raw.get(name, {}))
    known = set(cls.__dataclass_fields__)
    extra = set(table) - known
    if extra:
        raise PreconditionError(f"unknown keys in [{name}]: {sorted(extra)}")
    return cls(**table)


def config_from_dict(raw):
    """Validate a parsed configuration mapping."""
    raw = copy.deepcopy(raw)
    if "problem" not in raw or "domain" not in raw:
        raise PreconditionError("configuration needs [problem] and [domain] tables")
    prob = dict(raw["problem"])
    dom = dict(raw["domain"])
    resolution = dom.pop("resolution", 33)
    s = check_exponent(prob.get("s", 0.5))
    desc = domain_from_dict(dom)
    check_dimension(desc.dim, s)
    lam, ratio = prob.get("lam"), prob.get("lam_ratio")
    if lam is not None and ratio is not None:
        raise PreconditionError("give either problem.lam or problem.lam_ratio, not both")
    if lam is None and ratio is None:
        ratio = 0.5
    fld = dict(raw.get("field", {"kind": "constant", "A": [[1.0 if i == j else 0.0 for j in range(desc.dim)]
                                                           for i in range(desc.dim)]}))
    cfg = RunConfig(
        s=s, domain=dom, resolution=resolution, field=fld, lam=lam, lam_ratio=ratio, x0=prob.get("x0"),
        solver=_section(raw, "solver", SolverSpec), cylinder=_section(raw, "cylinder", CylinderSpec),
        sweep=_section(raw, "sweep", SweepSpec), audit=_section(raw, "audit", AuditSpec),
        run=_section(raw, "run", RunSpec), raw=raw,
    )
    for name in ("tolerance", "spectrum_tol"):
        check_positive(getattr(cfg.solver, name), f"solver.{name}")
    check_positive(cfg.cylinder.ratio - 1, "cylinder.ratio - 1")
    if cfg.sweep.kind not in ("interior", "boundary"):
        raise PreconditionError(f"sweep.kind must be 'interior' or 'boundary', got {cfg.sweep.kind!r}")
    return cfg


def load_config(path, overrides=None):
    """Read a TOML file; ``overrides`` maps dotted keys to values (e.g. ``run.seed``)."""
    with open(Path(path), "rb") as fh:
        raw = tomllib.load(fh)
    for key, value in (overrides or {}).items():
        node = raw
        *parents, leaf = key.split(".")
        for p in parents:
            node = node.setdefault(p, {})
        node[leaf] = value
    return config_from_dict(raw)
