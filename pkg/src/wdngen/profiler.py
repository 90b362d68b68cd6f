"""Per-parameter statistics of baseline networks, per network and pooled."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .inp_io import NetworkModel
from .parameters import CATALOGUE, CURVE, PATTERN, baseline_values

log = logging.getLogger(__name__)

GLOBAL = "GLOBAL"
STAT_FIELDS = ("min", "max", "mean", "std", "q1", "q3", "dimension", "component_count")


class EmptyInput(ValueError):
    pass


def quantile(values, q):
    """Linear interpolation between order statistics (Hyndman-Fan type 7)."""
    return np.quantile(np.asarray(values, dtype=float), q, method="linear")


@dataclass(frozen=True)
class ParameterStats:
    min: float
    max: float
    mean: float
    std: float
    q1: float
    q3: float
    dimension: int = 1
    component_count: int = 0

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in STAT_FIELDS}


@dataclass
class NetworkProfile:
    scope: str
    stats: dict[str, ParameterStats] = field(default_factory=dict)
    # pooled raw values, kept so profiles can be merged exactly
    samples: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def __getitem__(self, pid: str) -> ParameterStats:
        return self.stats[pid]

    def __contains__(self, pid: str) -> bool:
        return pid in self.stats


def profile_parameter(values, dimension: int = 1, component_count: int = 0) -> ParameterStats:
    """Summary statistics of a flat collection of finite values.

    ``std`` is the sample standard deviation (``n - 1`` denominator, 0 for a
    single value).
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise EmptyInput("cannot profile an empty value list")
    if not np.all(np.isfinite(v)):
        raise ValueError("values must be finite")
    q1, q3 = quantile(v, [0.25, 0.75])
    std = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    return ParameterStats(
        min=float(v.min()),
        max=float(v.max()),
        mean=float(v.mean()),
        std=std,
        q1=float(q1),
        q3=float(q3),
        dimension=int(dimension),
        component_count=int(component_count),
    )


def _flatten(pid: str, values) -> tuple[np.ndarray, int, int]:
    kind = CATALOGUE[pid].kind
    if kind == CURVE:
        arrays = [np.asarray(a, dtype=float) for a in values]
        flat = np.concatenate(arrays) if arrays else np.empty(0)
        return flat, max((a.size for a in arrays), default=1), len(arrays)
    arr = np.asarray(values, dtype=float)
    if kind == PATTERN:
        return arr.ravel(), arr.shape[0], arr.shape[1]
    return arr.ravel(), 1, arr.size


def profile_network(model: NetworkModel) -> NetworkProfile:
    """Profile every catalogued numeric parameter the network carries."""
    if not model.si:
        raise ValueError("profile_network expects an SI model (see convert_to_si)")
    prof = NetworkProfile(scope=model.name)
    for pid, spec in CATALOGUE.items():
        if spec.categorical:
            continue
        values = baseline_values(model, pid)
        if values is None:
            continue
        flat, dim, count = _flatten(pid, values)
        if flat.size == 0:
            continue
        prof.stats[pid] = profile_parameter(flat, dim, count)
        prof.samples[pid] = flat
    return prof


def merge_global(profiles: list[NetworkProfile]) -> NetworkProfile:
    """Statistics of the pooled samples of several network profiles."""
    if not profiles:
        raise EmptyInput("merge_global needs at least one profile")
    if len(profiles) == 1:
        p = profiles[0]
        return NetworkProfile(GLOBAL, dict(p.stats), dict(p.samples))
    merged = NetworkProfile(GLOBAL)
    pids = sorted({pid for p in profiles for pid in p.stats})
    for pid in pids:
        have = [p for p in profiles if pid in p.stats]
        pooled = np.concatenate([p.samples[pid] for p in have])
        merged.stats[pid] = profile_parameter(
            pooled,
            dimension=max(p.stats[pid].dimension for p in have),
            component_count=sum(p.stats[pid].component_count for p in have),
        )
        merged.samples[pid] = pooled
    return merged


def profile_rows(profile: NetworkProfile) -> list[tuple[str, str, str, float]]:
    return [
        (profile.scope, pid, name, float(getattr(st, name)))
        for pid, st in profile.stats.items()
        for name in STAT_FIELDS
    ]


def format_profile(profile: NetworkProfile) -> str:
    """Tab separated ``scope parameter statistic value`` table with a header."""
    lines = ["scope\tparameter\tstatistic\tvalue"]
    for scope, pid, name, value in profile_rows(profile):
        lines.append(f"{scope}\t{pid}\t{name}\t{value!r}")
    return "\n".join(lines) + "\n"


def parse_profile(text: str) -> dict[tuple[str, str], dict[str, float]]:
    rows: dict[tuple[str, str], dict[str, float]] = {}
    for line in text.strip().splitlines()[1:]:
        scope, pid, name, value = line.split("\t")
        rows.setdefault((scope, pid), {})[name] = float(value)
    return rows


def corpus_profile(models: list[NetworkModel]) -> NetworkProfile:
    """GLOBAL profile of a list of SI models."""
    return merge_global([profile_network(m) for m in models])
