"""Typed YAML configs for the CLI.

Every section is a dataclass; loading walks the dataclass fields and rejects
unknown keys, so a misspelt option fails loudly instead of silently falling
back to a default.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import typing
from dataclasses import dataclass, field
from typing import Any, List, Optional

import yaml

from .continuum import ProfileOptions
from .core import Density, Kernel, Potential
from .experiments import BeanGeometry, eps_rule
from .solver import INITS, SolveOptions


class ConfigError(ValueError):
    """Malformed, inconsistent or out-of-range configuration."""


# ------------------------------------------------------------------ sections

@dataclass
class KernelSpec:
    shape: str = "ball"
    radius: float = 1.0
    bandwidth: float = 1.0
    cutoff: float = 2.0
    half_widths: List[float] = field(default_factory=list)
    inner: float = 0.0
    amplitude: float = 1.0

    def build(self, dim: int) -> Kernel:
        try:
            return Kernel(dim, self.shape, radius=self.radius, bandwidth=self.bandwidth, cutoff=self.cutoff,
                          half_widths=tuple(self.half_widths), inner=self.inner, amplitude=self.amplitude)
        except ValueError as exc:
            raise ConfigError(f"kernel: {exc}") from exc


@dataclass
class PotentialSpec:
    kind: str = "quartic"
    table_s: List[float] = field(default_factory=list)
    table_v: List[float] = field(default_factory=list)
    tau: Optional[float] = None
    r_v: Optional[float] = None

    def build(self) -> Potential:
        try:
            if self.kind == "quartic":
                if self.table_s or self.table_v:
                    raise ValueError("the quartic potential takes no table")
                return Potential.quartic()
            if self.kind == "tabulated":
                if self.tau is None or self.r_v is None:
                    raise ValueError("a tabulated potential needs tau and r_v")
                return Potential.tabulated(self.table_s, self.table_v, self.tau, self.r_v)
            raise ValueError(f"unknown potential kind {self.kind!r}")
        except ValueError as exc:
            raise ConfigError(f"potential: {exc}") from exc


@dataclass
class DensitySpec:
    form: str = "uniform"
    lo: List[float] = field(default_factory=lambda: [0.0, 0.0])
    hi: List[float] = field(default_factory=lambda: [1.0, 1.0])
    mean: float = 0.0
    std: float = 1.0
    axis: int = 0

    @property
    def dim(self) -> int:
        return len(self.lo)

    def build(self) -> Density:
        try:
            if self.form == "uniform":
                return Density.uniform(self.lo, self.hi)
            if self.form == "gaussian_marginal":
                return Density.gaussian_marginal(self.lo, self.hi, self.mean, self.std, self.axis)
            raise ValueError(f"density form must be uniform or gaussian_marginal, not {self.form!r}")
        except ValueError as exc:
            raise ConfigError(f"density: {exc}") from exc


@dataclass
class SolverSpec:
    dt: Optional[float] = None
    max_iters: int = 10000
    tol: float = 1e-8
    splitting: Optional[float] = None
    clamp: bool = True
    init: str = "random"
    plane_point: Optional[List[float]] = None
    plane_normal: Optional[List[float]] = None
    backtrack: bool = True

    def build(self, seed: int = 0, init_field=None) -> SolveOptions:
        if self.init not in INITS:
            raise ConfigError(f"solver.init must be one of {INITS}")
        if self.init == "field" and init_field is None:
            raise ConfigError("solver.init = field needs an initial field file")
        try:
            return SolveOptions(dt=self.dt, max_iters=self.max_iters, tol=self.tol, splitting=self.splitting,
                                clamp=self.clamp, seed=seed, init=self.init, init_field=init_field,
                                plane_point=None if self.plane_point is None else tuple(self.plane_point),
                                plane_normal=None if self.plane_normal is None else tuple(self.plane_normal),
                                backtrack=self.backtrack)
        except ValueError as exc:
            raise ConfigError(f"solver: {exc}") from exc


@dataclass
class RegionSpec:
    center: List[float] = field(default_factory=list)
    radius: float = 0.0
    value: float = 1.0


@dataclass
class FidelitySection:
    """Either labelled balls (``regions``) or a label CSV (``labels``, NaN rows unlabelled)."""

    weight: float = 0.0
    q: float = 2.0
    regions: List[RegionSpec] = field(default_factory=list)
    labels: Optional[str] = None


@dataclass
class ProfileSpec:
    L: float = 10.0
    m: int = 400
    max_iters: int = 20000
    tol: float = 1e-13

    def build(self) -> ProfileOptions:
        try:
            return ProfileOptions(L=self.L, m=self.m, max_iters=self.max_iters, tol=self.tol)
        except ValueError as exc:
            raise ConfigError(f"profile: {exc}") from exc


# ------------------------------------------------------------------ commands

@dataclass
class PointsSection:
    """Points from a CSV file, or ``n`` samples of ``density``."""

    path: Optional[str] = None
    n: int = 0
    density: DensitySpec = field(default_factory=DensitySpec)


def _resolve_eps(eps: Optional[float], eps_c: Optional[float], n: int, d: int) -> float:
    if (eps is None) == (eps_c is None):
        raise ConfigError("give exactly one of eps and eps_c")
    val = eps if eps is not None else eps_rule(n, d, eps_c)
    if not val > 0:
        raise ConfigError("eps must be positive")
    return float(val)


@dataclass
class GraphConfig:
    points: PointsSection = field(default_factory=PointsSection)
    kernel: KernelSpec = field(default_factory=KernelSpec)
    eps: Optional[float] = None
    eps_c: Optional[float] = None
    seed: int = 0

    def resolve_eps(self, n: int, d: int) -> float:
        return _resolve_eps(self.eps, self.eps_c, n, d)


@dataclass
class MinimizeConfig(GraphConfig):
    p: float = 2.0
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    solver: SolverSpec = field(default_factory=SolverSpec)
    fidelity: FidelitySection = field(default_factory=FidelitySection)
    init_field: Optional[str] = None


@dataclass
class SegmentConfig:
    image: Optional[str] = None
    mask: Optional[str] = None
    p: float = 2.0
    lam: float = 100.0
    tau_color: float = 5e-4
    eps: Optional[float] = None
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    solver: SolverSpec = field(default_factory=lambda: SolverSpec(dt=1.0, max_iters=100000, tol=1e-6))
    seed: int = 0


@dataclass
class BeanConfig:
    n: int = 1000
    eps_c: float = 0.7
    p_list: List[float] = field(default_factory=lambda: [2.0, 100.0])
    lam: float = 100.0
    seed: int = 0
    n_seeds: int = 10
    kernel: KernelSpec = field(default_factory=lambda: KernelSpec(amplitude=0.005))
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    half_length: float = 0.45
    radius: float = 0.18
    waist_halfwidth: float = 0.10
    waist_width: float = 0.16
    std: float = 0.25
    seeds_at: float = 0.3
    seed_radius: float = 0.08
    starts: List[float] = field(default_factory=lambda: [-0.2, -0.15, -0.1, -0.05, 0.0, 0.05, 0.1, 0.15, 0.2])
    start_width: float = 2.0
    init: str = "starts"
    solver: SolverSpec = field(default_factory=lambda: SolverSpec(dt=0.5, max_iters=5000, tol=1e-6))

    def geometry(self) -> BeanGeometry:
        try:
            return BeanGeometry(self.half_length, self.radius, self.waist_halfwidth, self.waist_width)
        except ValueError as exc:
            raise ConfigError(f"bean: {exc}") from exc


@dataclass
class ConvergeConfig:
    density: DensitySpec = field(default_factory=DensitySpec)
    plane_point: Optional[List[float]] = field(default_factory=lambda: [0.5, 0.5])
    plane_normal: Optional[List[float]] = field(default_factory=lambda: [1.0, 0.0])
    n_list: List[int] = field(default_factory=lambda: [1000, 4000, 16000])
    seed: int = 0
    n_seeds: int = 10
    eps_c: float = 4.0
    p: float = 1.0
    kernel: KernelSpec = field(default_factory=KernelSpec)
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    max_n: int = 200000


@dataclass
class CellConfig:
    dim: int = 2
    p: float = 2.0
    kernel: KernelSpec = field(default_factory=KernelSpec)
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    rho: List[float] = field(default_factory=lambda: [0.5, 1.0, 2.0])
    directions: List[Any] = field(default_factory=lambda: [0.0, 0.7853981633974483, 1.5707963267948966])
    profile: ProfileSpec = field(default_factory=ProfileSpec)
    seed: int = 0


@dataclass
class ValidateConfig:
    dim: int = 2
    kernel: KernelSpec = field(default_factory=KernelSpec)
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    density: Optional[DensitySpec] = None
    seed: int = 0


COMMANDS = {
    "graph": GraphConfig,
    "minimize": MinimizeConfig,
    "segment": SegmentConfig,
    "bean": BeanConfig,
    "converge": ConvergeConfig,
    "cell": CellConfig,
    "validate": ValidateConfig,
}


# ------------------------------------------------------------------ loading

def _unwrap_optional(tp):
    if typing.get_origin(tp) is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if len(args) == 1:
            return args[0], True
    return tp, False


def _coerce(tp, value, where: str):
    tp, optional = _unwrap_optional(tp)
    if value is None:
        if optional:
            return None
        raise ConfigError(f"{where}: null is not allowed")
    if dataclasses.is_dataclass(tp):
        return from_dict(tp, value, where)
    origin = typing.get_origin(tp)
    if origin in (list, List):
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list")
        (item,) = typing.get_args(tp) or (Any,)
        return [_coerce(item, v, f"{where}[{k}]") for k, v in enumerate(value)]
    if tp is Any:
        return value
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number")
        if not math.isfinite(value):
            raise ConfigError(f"{where}: must be finite")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string")
        return value
    raise ConfigError(f"{where}: unsupported field type {tp}")


def from_dict(cls, data, where: str = "config"):
    """Build dataclass ``cls`` from a mapping, rejecting unknown keys."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(map(str, unknown))}")
    kwargs = {k: _coerce(hints[k], v, f"{where}.{k}") for k, v in data.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def to_dict(cfg) -> dict:
    return dataclasses.asdict(cfg)


def load_config(command: str, path: Optional[str] = None, text: Optional[str] = None):
    """Parse a YAML document (file or string) into the config class for ``command``.

    Relative file paths inside the document are resolved against its directory.
    """
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    base = None
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        base = os.path.dirname(os.path.abspath(path))
    try:
        data = yaml.safe_load(text) if text else {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    cfg = from_dict(COMMANDS[command], data, command)
    check(cfg, base)
    return cfg


def _fix_path(cfg, attr: str, base: Optional[str]):
    val = getattr(cfg, attr)
    if val is None:
        return
    if base is not None and not os.path.isabs(val):
        val = os.path.join(base, val)
        setattr(cfg, attr, val)
    if not os.path.exists(val):
        raise ConfigError(f"{attr}: file {val} does not exist")


def _positive(name: str, value) -> None:
    if value is None or not value > 0:
        raise ConfigError(f"{name} must be positive")


def check(cfg, base: Optional[str] = None) -> None:
    """Range and reference checks that need the whole document."""
    if getattr(cfg, "seed", 0) < 0:
        raise ConfigError("seed must be >= 0")
    if hasattr(cfg, "p") and not cfg.p >= 1:
        raise ConfigError("p must be >= 1")
    if isinstance(cfg, GraphConfig):
        _fix_path(cfg.points, "path", base)
        if cfg.points.path is None and cfg.points.n < 1:
            raise ConfigError("points: give a CSV path or n >= 1")
    if isinstance(cfg, MinimizeConfig):
        _fix_path(cfg.fidelity, "labels", base)
        _fix_path(cfg, "init_field", base)
        if cfg.fidelity.weight < 0:
            raise ConfigError("fidelity.weight must be >= 0")
        if cfg.fidelity.regions and cfg.fidelity.labels:
            raise ConfigError("fidelity: give regions or labels, not both")
    if isinstance(cfg, SegmentConfig):
        _fix_path(cfg, "image", base)
        _fix_path(cfg, "mask", base)
        if (cfg.image is None) != (cfg.mask is None):
            raise ConfigError("segment: image and mask go together")
        _positive("tau_color", cfg.tau_color)
        if cfg.lam < 0:
            raise ConfigError("lam must be >= 0")
    if isinstance(cfg, BeanConfig):
        _positive("n", cfg.n)
        _positive("n_seeds", cfg.n_seeds)
        _positive("eps_c", cfg.eps_c)
        _positive("std", cfg.std)
        if not cfg.p_list or min(cfg.p_list) < 1:
            raise ConfigError("p_list must be non-empty with p >= 1")
        if cfg.init not in ("starts", "constant", "random"):
            raise ConfigError("bean.init must be starts, constant or random")
        if cfg.init == "starts" and not cfg.starts:
            raise ConfigError("bean.starts is empty")
        cfg.geometry()
    if isinstance(cfg, ConvergeConfig):
        _positive("n_seeds", cfg.n_seeds)
        _positive("eps_c", cfg.eps_c)
        if not cfg.n_list or min(cfg.n_list) < 1:
            raise ConfigError("n_list must be non-empty with n >= 1")
        if max(cfg.n_list) > cfg.max_n:
            raise ConfigError(f"n_list exceeds the budget max_n = {cfg.max_n}")
        if (cfg.plane_point is None) != (cfg.plane_normal is None):
            raise ConfigError("plane_point and plane_normal go together")
    if isinstance(cfg, CellConfig):
        if not cfg.rho or min(cfg.rho) <= 0:
            raise ConfigError("rho list must be non-empty and positive")
        if not cfg.directions:
            raise ConfigError("direction list is empty")
    if isinstance(cfg, (CellConfig, ValidateConfig)) and cfg.dim < 1:
        raise ConfigError("dim must be >= 1")


def config_hash(cfg) -> str:
    """sha256 of the canonical JSON form of the resolved config."""
    blob = json.dumps(to_dict(cfg), sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def dump_yaml(cfg) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=True)
