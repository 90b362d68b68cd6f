"""Sampling strategies that turn (strategy, bounds) entries into parameter values.

Bounds ``lb``/``ub`` are normalized to [0, 1] against the physical range of
the parameter in :data:`wdngen.parameters.CATALOGUE`.  Factor entries are the
exception: their bounds normalize the shared scale over ``(0, 2)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
import yaml

from .adg import ADGConfig, generate_demand_scenario, network_communities
from .inp_io import NetworkModel
from .parameters import CATALOGUE, COMPONENTS, CURVE, PATTERN, baseline_values, present_parameters
from .profiler import GLOBAL, NetworkProfile, ParameterStats

log = logging.getLogger(__name__)

FACTOR_SCALE_MAX = 2.0
SUBSTITUTE_NOISE = (0.98, 1.02)
DEFAULT_GRID_EXPONENT = 7
DEFAULT_ROUGHNESS = 0.5


class IllegalStrategyForParameter(ValueError):
    pass


class MissingStats(ValueError):
    pass


class MissingCoordinates(ValueError):
    pass


class StrategyKind(str, Enum):
    KEEP = "keep"
    SERIES = "series"
    SAMPLING = "sampling"
    PERTURBATION = "perturbation"
    FACTOR = "factor"
    SUBSTITUTE = "substitute"
    TERRAIN = "terrain"
    ADG = "adg"


# strategies whose two bounds the swarm can tune
TUNABLE = (StrategyKind.SAMPLING, StrategyKind.PERTURBATION, StrategyKind.FACTOR, StrategyKind.TERRAIN)


@dataclass
class SamplingEntry:
    parameter: str
    strategy: StrategyKind = StrategyKind.KEEP
    lb: float = 0.0
    ub: float = 1.0
    knobs: dict = field(default_factory=dict)

    def __post_init__(self):
        self.strategy = StrategyKind(self.strategy)
        if self.parameter not in CATALOGUE:
            raise KeyError(f"unknown parameter {self.parameter!r}")
        if not 0.0 <= self.lb <= self.ub <= 1.0:
            raise ValueError(f"{self.parameter}: need 0 <= lb <= ub <= 1, got ({self.lb}, {self.ub})")
        if self.strategy == StrategyKind.TERRAIN and self.parameter != "junction_elevation":
            raise IllegalStrategyForParameter(f"terrain only applies to junction_elevation, not {self.parameter}")
        if self.strategy == StrategyKind.ADG and self.parameter != "junction_demand":
            raise IllegalStrategyForParameter(f"adg only applies to junction_demand, not {self.parameter}")

    @property
    def physical_bounds(self) -> tuple[float, float]:
        return denormalize(self.parameter, self.lb), denormalize(self.parameter, self.ub)

    def with_bounds(self, lb: float, ub: float) -> "SamplingEntry":
        return SamplingEntry(self.parameter, self.strategy, float(lb), float(ub), dict(self.knobs))


@dataclass
class SamplingConfig:
    entries: dict[str, SamplingEntry] = field(default_factory=dict)

    def __getitem__(self, pid: str) -> SamplingEntry:
        return self.entries[pid]

    def __contains__(self, pid: str) -> bool:
        return pid in self.entries

    def __iter__(self):
        return iter(self.entries.values())

    def __len__(self) -> int:
        return len(self.entries)

    def copy(self) -> "SamplingConfig":
        return SamplingConfig({k: e.with_bounds(e.lb, e.ub) for k, e in self.entries.items()})

    def replace(self, pid: str, lb: float, ub: float) -> "SamplingConfig":
        out = self.copy()
        out.entries[pid] = out.entries[pid].with_bounds(lb, ub)
        return out

    def bounds_matrix(self) -> np.ndarray:
        """The D x 2 matrix of normalized bounds."""
        return np.array([[e.lb, e.ub] for e in self.entries.values()]).reshape(-1, 2)

    def tunable(self) -> list[str]:
        return [pid for pid, e in self.entries.items() if e.strategy in TUNABLE and not CATALOGUE[pid].categorical]

    def to_tune_dict(self) -> dict[str, dict]:
        """``{<component>_tune: {parameter: {strategy, lb, ub, ...}}}``."""
        out: dict[str, dict] = {}
        for pid, e in self.entries.items():
            spec = CATALOGUE[pid]
            out.setdefault(f"{spec.component}_tune", {})[spec.name] = {
                "strategy": e.strategy.value,
                "lb": float(e.lb),
                "ub": float(e.ub),
                **e.knobs,
            }
        return out

    @classmethod
    def from_tune_dict(cls, data: dict) -> "SamplingConfig":
        entries = {}
        for comp in COMPONENTS:
            for name, body in (data.get(f"{comp}_tune") or {}).items():
                pid = f"{comp}_{name}"
                body = dict(body)
                entries[pid] = SamplingEntry(
                    pid, body.pop("strategy", "keep"), float(body.pop("lb", 0.0)), float(body.pop("ub", 1.0)), body
                )
        return cls(entries)

    def to_yaml(self, path: str | Path | None = None, extra: dict | None = None) -> str:
        text = yaml.safe_dump({**(extra or {}), **self.to_tune_dict()}, sort_keys=True)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_yaml(cls, text: str) -> "SamplingConfig":
        return cls.from_tune_dict(yaml.safe_load(text) or {})

    @classmethod
    def read_yaml(cls, path: str | Path) -> "SamplingConfig":
        return cls.from_yaml(Path(path).read_text())


def denormalize(pid: str, x: float) -> float:
    lo, hi = CATALOGUE[pid].range
    return lo + float(x) * (hi - lo)


def normalize(pid: str, v: float) -> float:
    lo, hi = CATALOGUE[pid].range
    return float(np.clip((v - lo) / (hi - lo), 0.0, 1.0))


# --------------------------------------------------------------------------- terrain


def diamond_square(exponent: int, corner_range: tuple[float, float], roughness: float, rng) -> np.ndarray:
    """Height map of side ``2**exponent + 1``.

    Each new point is the mean of its diamond/square neighbours plus uniform
    noise whose amplitude starts at ``roughness * span`` and halves per level.
    """
    if exponent < 1:
        raise ValueError("exponent must be >= 1")
    n = 2**exponent + 1
    grid = np.zeros((n, n))
    lo, hi = corner_range
    for r, c in ((0, 0), (0, n - 1), (n - 1, 0), (n - 1, n - 1)):
        grid[r, c] = rng.uniform(lo, hi)
    amp = roughness * (hi - lo)
    step = n - 1
    while step > 1:
        half = step // 2
        # diamond step: centres of squares
        sq = grid[0:n - 1:step, 0:n - 1:step]
        avg = (sq + grid[step::step, 0:n - 1:step] + grid[0:n - 1:step, step::step] + grid[step::step, step::step]) / 4.0
        grid[half::step, half::step] = avg + (rng.uniform(-amp, amp, avg.shape) if amp > 0 else 0.0)
        # square step: edge midpoints, averaging the neighbours inside the grid
        padded = np.pad(grid, half, constant_values=np.nan)
        for r0, c0 in ((0, half), (half, 0)):
            rows, cols = np.meshgrid(np.arange(r0, n, step), np.arange(c0, n, step), indexing="ij")
            nb = [padded[rows + half + dr, cols + half + dc] for dr, dc in ((-half, 0), (half, 0), (0, -half), (0, half))]
            noise = rng.uniform(-amp, amp, rows.shape) if amp > 0 else 0.0
            grid[rows, cols] = np.nanmean(nb, axis=0) + noise
        step = half
        amp /= 2.0
    return grid


def bilinear(grid: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Sample *grid* at fractional (column x, row y) positions."""
    n = grid.shape[0]
    x = np.clip(x, 0.0, n - 1)
    y = np.clip(y, 0.0, n - 1)
    x0 = np.minimum(np.floor(x).astype(int), n - 2)
    y0 = np.minimum(np.floor(y).astype(int), n - 2)
    fx, fy = x - x0, y - y0
    g = grid
    return (
        g[y0, x0] * (1 - fx) * (1 - fy)
        + g[y0, x0 + 1] * fx * (1 - fy)
        + g[y0 + 1, x0] * (1 - fx) * fy
        + g[y0 + 1, x0 + 1] * fx * fy
    )


def project(coords: np.ndarray, side: int) -> tuple[np.ndarray, np.ndarray]:
    """Map the coordinate bounding box onto grid indices ``[0, side - 1]``."""
    out = []
    for axis in range(2):
        v = coords[:, axis]
        lo, hi = v.min(), v.max()
        if hi - lo <= 0:
            out.append(np.full(v.shape, (side - 1) / 2.0))
        else:
            out.append((v - lo) / (hi - lo) * (side - 1))
    return out[0], out[1]


def terrain_elevations(coordinates: dict, grid_side_exponent: int = DEFAULT_GRID_EXPONENT,
                       corner_seed_range: tuple[float, float] = (0.0, 1.0),
                       roughness: float = DEFAULT_ROUGHNESS, rng=None, names=None) -> dict[str, float]:
    """Raw terrain heights of a fresh height map at each node position."""
    names = list(coordinates) if names is None else list(names)
    missing = [n for n in names if n not in coordinates]
    if missing:
        raise MissingCoordinates(f"no coordinates for {missing[:5]}")
    if not names:
        return {}
    rng = rng if rng is not None else np.random.default_rng()
    grid = diamond_square(grid_side_exponent, corner_seed_range, roughness, rng)
    xy = np.array([coordinates[n] for n in names], dtype=float)
    px, py = project(xy, grid.shape[0])
    return dict(zip(names, bilinear(grid, px, py).tolist()))


def rescale(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Affine map of *values* onto [lo, hi]; a constant maps to the midpoint."""
    v = np.asarray(values, dtype=float)
    vmin, vmax = v.min(), v.max()
    if vmax - vmin <= 0:
        return np.full_like(v, (lo + hi) / 2.0)
    out = lo + (v - vmin) / (vmax - vmin) * (hi - lo)
    return np.clip(out, lo, hi)


# --------------------------------------------------------------------------- strategies


@dataclass
class StrategyContext:
    """What strategies may need beyond the baseline values."""

    model: NetworkModel | None = None
    profile: NetworkProfile | None = None
    global_profile: NetworkProfile | None = None
    adg: ADGConfig | None = None
    communities: dict | None = None
    num_steps: int | None = None
    events: list = field(default_factory=list)


def _resolve_stats(pid: str, stats: ParameterStats | None, ctx: StrategyContext) -> ParameterStats:
    if stats is None and ctx.profile is not None and pid in ctx.profile:
        stats = ctx.profile[pid]
    if stats is None and ctx.global_profile is not None and pid in ctx.global_profile:
        log.info("%s: no network statistics, imputing from %s profile", pid, GLOBAL)
        ctx.events.append(("impute", pid))
        stats = ctx.global_profile[pid]
    if stats is None:
        raise MissingStats(f"{pid}: no statistics available")
    return stats


def _like(baseline, draw):
    """Apply ``draw(shape)`` to each array of a curve list, or the array itself."""
    if isinstance(baseline, list):
        return [draw(np.shape(b)) for b in baseline]
    return draw(np.shape(baseline))


def apply_strategy(entry: SamplingEntry, baseline, stats: ParameterStats | None, rng, context: StrategyContext | None = None):
    """Values of one parameter for one scenario.

    *baseline* is the output of :func:`wdngen.parameters.baseline_values`.
    """
    ctx = context or StrategyContext()
    spec = CATALOGUE[entry.parameter]
    kind = entry.strategy
    lo, hi = entry.physical_bounds

    if kind == StrategyKind.KEEP:
        return [np.array(b, copy=True) for b in baseline] if isinstance(baseline, list) else np.array(baseline, copy=True)

    if kind == StrategyKind.SERIES:
        series = np.asarray(entry.knobs["series"], dtype=float)
        if spec.kind == PATTERN:
            T = np.shape(baseline)[0]
            col = np.resize(series, T)
            return np.repeat(col[:, None], np.shape(baseline)[1], axis=1)
        if spec.kind == CURVE:
            return [series.copy() for _ in baseline]
        return np.resize(series, np.shape(baseline))

    if kind == StrategyKind.SAMPLING:
        out = _like(baseline, lambda s: rng.uniform(lo, hi, s) if hi > lo else np.full(s, lo))
        if spec.categorical:
            out = np.rint(out)
        return out

    if kind == StrategyKind.PERTURBATION:
        st = _resolve_stats(entry.parameter, stats, ctx)
        return _like(baseline, lambda s: np.clip(rng.normal(st.mean, st.std, s), lo, hi))

    if kind == StrategyKind.FACTOR and entry.knobs.get("fallback", "factor") == "factor":
        scale = FACTOR_SCALE_MAX * rng.uniform(entry.lb, entry.ub)
        bias = rng.uniform(*entry.knobs.get("bias_range", (0.0, 0.0)))
        return _like_values(baseline, lambda b: scale * b + bias)

    if kind in (StrategyKind.SUBSTITUTE, StrategyKind.FACTOR):
        return _substitute(baseline, rng, tuple(entry.knobs.get("noise", SUBSTITUTE_NOISE)))

    if kind == StrategyKind.TERRAIN:
        model = ctx.model
        if model is None:
            raise MissingCoordinates("terrain needs the network model")
        names = [j.name for j in model.junctions]
        raw = terrain_elevations(
            model.coordinates,
            int(entry.knobs.get("grid_exponent", DEFAULT_GRID_EXPONENT)),
            (0.0, 1.0),
            float(entry.knobs.get("roughness", DEFAULT_ROUGHNESS)),
            rng,
            names=names,
        )
        return rescale(np.array([raw[n] for n in names]), lo, hi)

    if kind == StrategyKind.ADG:
        model = ctx.model
        if model is None:
            raise ValueError("adg needs the network model")
        cfg = ctx.adg or ADGConfig()
        T = np.shape(baseline)[0]
        if cfg.num_steps != T:
            cfg = ADGConfig(**{**cfg.__dict__, "duration": T * cfg.time_step})
        scen = generate_demand_scenario(model, cfg, rng, ctx.communities)
        base = np.array([j.base_demand * model.demand_multiplier for j in model.junctions])
        return scen.multipliers * base[None, :]

    raise IllegalStrategyForParameter(f"unhandled strategy {kind}")


def _like_values(baseline, f):
    if isinstance(baseline, list):
        return [f(np.asarray(b, dtype=float)) for b in baseline]
    return f(np.asarray(baseline, dtype=float))


def _substitute(baseline, rng, noise):
    """Copy one randomly chosen component's value to all, times small noise."""
    if isinstance(baseline, list):
        donor = baseline[rng.integers(len(baseline))]
        return [donor * rng.uniform(*noise, np.shape(donor)) if np.size(donor) == np.size(b) else np.array(b, copy=True)
                for b in baseline]
    b = np.asarray(baseline, dtype=float)
    if b.ndim == 2:
        donor = b[:, rng.integers(b.shape[1])]
        return donor[:, None] * rng.uniform(*noise, (1, b.shape[1]))
    donor = b[rng.integers(b.size)]
    return donor * rng.uniform(*noise, b.shape)


# --------------------------------------------------------------------------- configurations


def default_blueprint(model: NetworkModel) -> SamplingConfig:
    """ADG demands, terrain elevations, factor pipe diameters, keep the rest."""
    entries = {}
    for pid in present_parameters(model):
        if pid == "junction_demand":
            entries[pid] = SamplingEntry(pid, StrategyKind.ADG)
        elif pid == "junction_elevation":
            base = baseline_values(model, pid)
            lb, ub = normalize(pid, base.min()), normalize(pid, base.max())
            entries[pid] = SamplingEntry(pid, StrategyKind.TERRAIN, lb, ub, {"roughness": DEFAULT_ROUGHNESS})
        elif pid == "pipe_diameter":
            entries[pid] = SamplingEntry(pid, StrategyKind.FACTOR, 0.4, 0.6, {"fallback": "factor"})
        else:
            entries[pid] = SamplingEntry(pid, StrategyKind.KEEP)
    return SamplingConfig(entries)


def sample_scenario(model: NetworkModel, config: SamplingConfig, rng, context: StrategyContext | None = None,
                    num_steps: int | None = None) -> dict:
    """One scenario's input parameter values, keyed by parameter id."""
    ctx = context or StrategyContext(model=model)
    if ctx.model is None:
        ctx.model = model
    if ctx.adg is not None and ctx.communities is None:
        ctx.communities = network_communities(model, ctx.adg, np.random.default_rng(0))
    T = num_steps or ctx.num_steps or model.times.num_steps
    inputs = {}
    for pid, entry in config.entries.items():
        baseline = baseline_values(model, pid, T)
        if baseline is None:
            continue
        stats = ctx.profile[pid] if ctx.profile is not None and pid in ctx.profile else None
        inputs[pid] = apply_strategy(entry, baseline, stats, rng, ctx)
    return inputs


class ScenarioSampler:
    """Reusable sampler with per-network context computed once."""

    def __init__(self, model: NetworkModel, config: SamplingConfig, adg: ADGConfig | None = None,
                 profile: NetworkProfile | None = None, global_profile: NetworkProfile | None = None,
                 num_steps: int | None = None):
        self.model = model
        self.config = config
        self.num_steps = num_steps or model.times.num_steps
        self.adg = adg or ADGConfig(duration=self.num_steps * model.times.time_step, time_step=model.times.time_step)
        needs_adg = any(e.strategy == StrategyKind.ADG for e in config)
        communities = network_communities(model, self.adg, np.random.default_rng(0)) if needs_adg else None
        self.context = StrategyContext(model, profile, global_profile, self.adg, communities, self.num_steps)
        self._baselines = {pid: baseline_values(model, pid, self.num_steps) for pid in config.entries}

    def with_config(self, config: SamplingConfig) -> "ScenarioSampler":
        other = object.__new__(ScenarioSampler)
        other.__dict__.update(self.__dict__)
        other.config = config
        missing = [pid for pid in config.entries if pid not in self._baselines]
        if missing:
            other._baselines = {**self._baselines, **{p: baseline_values(self.model, p, self.num_steps) for p in missing}}
        return other

    def sample(self, rng) -> dict:
        inputs = {}
        ctx = self.context
        for pid, entry in self.config.entries.items():
            baseline = self._baselines[pid]
            if baseline is None:
                continue
            stats = ctx.profile[pid] if ctx.profile is not None and pid in ctx.profile else None
            inputs[pid] = apply_strategy(entry, baseline, stats, rng, ctx)
        return inputs
