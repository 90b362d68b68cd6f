"""Automatic Demand Generator: per-junction demand multipliers.

Each junction's series is the sum of a profile-driven daily pattern, a
scenario-wide yearly pattern (Fourier terms plus a summer bump) and white
noise, min-max normalized to [0, 1].  Household and commercial profiles are
assigned by whole network communities (Louvain) so commercial nodes cluster.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.signal import savgol_filter

from .inp_io import NetworkModel
from .profiler import quantile

log = logging.getLogger(__name__)

LOW, MEDIUM, HIGH = "low", "medium", "high"
HOURS_PER_YEAR = 8760.0
SEGMENT_HOURS = 6.0


class BadWindow(ValueError):
    pass


class ProfileKind(str, Enum):
    HOUSEHOLD = "household"
    COMMERCIAL = "commercial"
    EXTREME = "extreme"
    ZERO = "zero_demand"


@dataclass(frozen=True)
class DemandProfile:
    kind: ProfileKind
    segment_levels: tuple[str, str, str, str] = (LOW, LOW, LOW, LOW)


HOUSEHOLD = DemandProfile(ProfileKind.HOUSEHOLD, (LOW, HIGH, MEDIUM, LOW))
COMMERCIAL = DemandProfile(ProfileKind.COMMERCIAL, (HIGH, HIGH, HIGH, MEDIUM))
EXTREME = DemandProfile(ProfileKind.EXTREME, (HIGH, HIGH, HIGH, HIGH))
ZERO_DEMAND = DemandProfile(ProfileKind.ZERO)


@dataclass(frozen=True)
class ConsumptionBounds:
    q1: float
    q3: float

    def __post_init__(self):
        if not 0.0 <= self.q1 <= self.q3 <= 1.0:
            raise ValueError(f"need 0 <= q1 <= q3 <= 1, got {self.q1}, {self.q3}")

    def range_of(self, level: str) -> tuple[float, float]:
        return {LOW: (0.0, self.q1), MEDIUM: (self.q1, self.q3), HIGH: (self.q3, 1.0)}[level]


@dataclass
class ADGConfig:
    duration: float = 24.0  # hours
    time_step: float = 1.0
    p_commercial: tuple[float, float] = (0.25, 0.35)
    extreme_dem_rate: float = 0.02
    max_extreme_dem_junctions: int = 2
    zero_dem_rate: float = 0.05
    zero_dem_from_baseline: bool = False
    noise_range: tuple[float, float] = (0.01, 0.05)
    summer_start: float = 151.0 / 365.0  # 1 June as a fraction of the year
    summer_span: float = 0.25  # three months
    summer_amplitude_range: tuple[float, float] = (0.5, 2.0)
    summer_rolling_rate: float = 0.2
    yearly_pattern_num_harmonics: int = 2
    louvain_gamma: float = 1.0
    louvain_threshold: float = 1e-7
    level_samples: int = 100
    savgol_window: int = 7
    savgol_order: int = 2
    profile_household: tuple[str, ...] = HOUSEHOLD.segment_levels
    profile_commercial: tuple[str, ...] = COMMERCIAL.segment_levels
    profile_extreme: tuple[str, ...] = EXTREME.segment_levels

    def __post_init__(self):
        for name in ("extreme_dem_rate", "zero_dem_rate", "summer_rolling_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        steps = self.duration / self.time_step
        if self.duration <= 0 or self.time_step <= 0 or abs(steps - round(steps)) > 1e-9:
            raise ValueError("duration must be a positive multiple of time_step")

    @property
    def num_steps(self) -> int:
        return int(round(self.duration / self.time_step))

    @property
    def period_steps(self) -> int:
        """Samples per period of the yearly component (a day for short runs)."""
        hours = 24.0 if self.duration <= 24.0 else HOURS_PER_YEAR
        return max(int(round(hours / self.time_step)), 1)

    def profiles(self) -> dict[ProfileKind, DemandProfile]:
        return {
            ProfileKind.HOUSEHOLD: DemandProfile(ProfileKind.HOUSEHOLD, tuple(self.profile_household)),
            ProfileKind.COMMERCIAL: DemandProfile(ProfileKind.COMMERCIAL, tuple(self.profile_commercial)),
            ProfileKind.EXTREME: DemandProfile(ProfileKind.EXTREME, tuple(self.profile_extreme)),
            ProfileKind.ZERO: ZERO_DEMAND,
        }


def minmax(x: np.ndarray) -> np.ndarray:
    """Scale to [0, 1]; a constant series maps to 0.5."""
    x = np.asarray(x, dtype=float)
    lo, hi = x.min(), x.max()
    if hi - lo <= 1e-12 * max(1.0, abs(hi)):
        return np.full_like(x, 0.5)
    out = (x - lo) / (hi - lo)
    # exact endpoints regardless of rounding
    out[x == lo] = 0.0
    out[x == hi] = 1.0
    return out


def smooth_savgol(series, window: int = 7, order: int = 2) -> np.ndarray:
    """Savitzky-Golay smoothing, edges fitted on the first/last full window."""
    x = np.asarray(series, dtype=float)
    if window % 2 == 0 or window < 1:
        raise BadWindow(f"window must be a positive odd integer, got {window}")
    if order >= window:
        raise BadWindow(f"order {order} must be smaller than window {window}")
    if x.size < window:
        raise BadWindow(f"series of length {x.size} is shorter than window {window}")
    return savgol_filter(x, window, order, mode="interp")


def _smooth_fit(x: np.ndarray, window: int, order: int) -> np.ndarray:
    """Smooth with the largest admissible window for short series."""
    w = min(window, x.size if x.size % 2 else x.size - 1)
    if w <= order:
        return x
    return smooth_savgol(x, w, order)


def consumption_levels(rng: np.random.Generator, n: int = 100) -> ConsumptionBounds:
    if n < 4:
        raise ValueError("need at least 4 samples")
    u = rng.uniform(0.0, 1.0, n)
    q1, q3 = quantile(u, [0.25, 0.75])
    return ConsumptionBounds(float(q1), float(q3))


def _day_samples(profile: DemandProfile, bounds: ConsumptionBounds, time_step: float, rng) -> np.ndarray:
    per_seg = max(int(round(SEGMENT_HOURS / time_step)), 1)
    parts = [rng.uniform(*bounds.range_of(level), per_seg) for level in profile.segment_levels]
    day = np.concatenate(parts)
    steps_per_day = max(int(round(24.0 / time_step)), 1)
    # coarse steps (> 6 h) keep one sample per step
    idx = np.floor(np.arange(steps_per_day) * time_step / SEGMENT_HOURS * per_seg + 1e-9).astype(int)
    return day[np.minimum(idx, day.size - 1)]


def daily_pattern(profile: DemandProfile, bounds: ConsumptionBounds, config: ADGConfig, rng,
                  noise_std: float | None = None) -> np.ndarray:
    """One day of segment samples, tiled over the run, passed through
    ``cos(x) + sin(x) + z``, smoothed and normalized."""
    T = config.num_steps
    if profile.kind == ProfileKind.ZERO:
        return np.zeros(T)
    day = _day_samples(profile, bounds, config.time_step, rng)
    x = np.resize(day, T)
    if noise_std is None:
        noise_std = rng.uniform(*config.noise_range)
    z = rng.normal(0.0, noise_std, T)
    d = np.cos(x) + np.sin(x) + z
    return minmax(_smooth_fit(d, config.savgol_window, config.savgol_order))


def summer_peak(config: ADGConfig) -> float:
    """Peak position (in samples of the yearly period) of the default summer."""
    return ((config.summer_start + config.summer_span / 2.0) % 1.0) * config.period_steps


def yearly_components(config: ADGConfig, rng, s_peak: float | None = None, amplitude: float | None = None,
                      noise_std: float | None = None) -> dict[str, np.ndarray]:
    """Fourier, seasonal and noise parts over one full period (un-normalized)."""
    N = config.period_steps
    t = np.arange(N, dtype=float)
    H = config.yearly_pattern_num_harmonics
    a = rng.uniform(0.0, 1.0, H + 1)
    b = rng.uniform(0.0, 1.0, H + 1)
    y = np.full(N, a[0])
    for n in range(1, H + 1):
        y += a[n] * np.cos(2 * math.pi * n * t / N) + b[n] * np.sin(2 * math.pi * n * t / N)
    if s_peak is None:
        s_peak = summer_peak(config)
        if rng.uniform() < config.summer_rolling_rate:
            s_peak = rng.uniform(0.0, N)
    C = rng.uniform(*config.summer_amplitude_range) if amplitude is None else amplitude
    s = C * np.cos(2 * math.pi * (t - s_peak) / N)
    std = rng.uniform(*config.noise_range) if noise_std is None else noise_std
    z = rng.normal(0.0, std, N) if std > 0 else np.zeros(N)
    return {"fourier": y, "seasonal": s, "noise": z, "s_peak": np.array(s_peak)}


def yearly_pattern(config: ADGConfig, rng, **kwargs) -> np.ndarray:
    """Yearly pattern over the run, normalized over its whole period."""
    comp = yearly_components(config, rng, **kwargs)
    full = minmax(comp["fourier"] + comp["seasonal"] + comp["noise"])
    return np.resize(full, config.num_steps)


# --------------------------------------------------------------------------- communities


def modularity(nodes, edges, partition: dict, gamma: float = 1.0) -> float:
    """Newman modularity of an undirected weighted graph."""
    m = sum(w for _, _, w in edges)
    if m == 0:
        return 0.0
    internal: dict = {}
    degree: dict = {}
    for u, v, w in edges:
        cu, cv = partition[u], partition[v]
        if cu == cv:
            internal[cu] = internal.get(cu, 0.0) + w
        degree[cu] = degree.get(cu, 0.0) + w
        degree[cv] = degree.get(cv, 0.0) + w
    return sum(internal.get(c, 0.0) / m - gamma * (d / (2 * m)) ** 2 for c, d in degree.items())


def _one_level(adj: list[dict], k: np.ndarray, m: float, gamma: float, order) -> tuple[np.ndarray, bool]:
    n = len(adj)
    comm = np.arange(n)
    tot = k.copy()
    moved_any = False
    improved = True
    while improved:
        improved = False
        for i in order:
            ci = comm[i]
            links: dict[int, float] = {}
            for j, w in adj[i].items():
                if j != i:
                    links[comm[j]] = links.get(comm[j], 0.0) + w
            tot[ci] -= k[i]
            best_c = ci
            best_gain = links.get(ci, 0.0) / m - gamma * k[i] * tot[ci] / (2 * m * m)
            for c, w in links.items():
                gain = w / m - gamma * k[i] * tot[c] / (2 * m * m)
                if gain > best_gain + 1e-15:
                    best_c, best_gain = c, gain
            tot[best_c] += k[i]
            if best_c != ci:
                comm[i] = best_c
                improved = moved_any = True
    _, comm = np.unique(comm, return_inverse=True)
    return comm, moved_any


def louvain_communities(nodes, edges, gamma: float = 1.0, threshold: float = 1e-7, rng=None) -> dict:
    """Two-phase Louvain on an undirected weighted graph.

    *edges* holds ``(u, v, weight)`` triples.  Nodes are visited in an order
    drawn from *rng* (file order when ``None``).  Returns node -> community id.
    """
    nodes = list(nodes)
    index = {n: i for i, n in enumerate(nodes)}
    adj: list[dict] = [{} for _ in nodes]
    for u, v, w in edges:
        a, b = index[u], index[v]
        adj[a][b] = adj[a].get(b, 0.0) + w
        if a != b:
            adj[b][a] = adj[b].get(a, 0.0) + w
    m = sum(w for _, _, w in edges)
    member = np.arange(len(nodes))
    if m == 0 or not nodes:
        return {n: int(i) for n, i in zip(nodes, member)}

    def q_of(member):
        return modularity(nodes, edges, {n: int(c) for n, c in zip(nodes, member)}, gamma)

    q = q_of(member)
    while True:
        n = len(adj)
        # weighted degree; a self loop counts twice
        k = np.array([sum(w for j, w in a.items()) + a.get(i, 0.0) for i, a in enumerate(adj)])
        order = rng.permutation(n) if rng is not None else np.arange(n)
        comm, moved = _one_level(adj, k, m, gamma, order)
        if not moved:
            break
        new_member = comm[member]
        new_q = q_of(new_member)
        if new_q - q < threshold:
            if new_q > q:
                member = new_member
            break
        member, q = new_member, new_q
        # contract communities into super-nodes
        nc = comm.max() + 1
        agg: list[dict] = [{} for _ in range(nc)]
        for i, a in enumerate(adj):
            for j, w in a.items():
                if j < i:
                    continue
                ci, cj = comm[i], comm[j]
                agg[ci][cj] = agg[ci].get(cj, 0.0) + w
                if ci != cj:
                    agg[cj][ci] = agg[cj].get(ci, 0.0) + w
        adj = agg
    return {n: int(c) for n, c in zip(nodes, member)}


def network_communities(model: NetworkModel, config: ADGConfig | None = None, rng=None) -> dict:
    """Louvain communities of the whole network graph with unit link weights."""
    config = config or ADGConfig()
    edges = [(k.start, k.end, 1.0) for k in model.links]
    return louvain_communities(model.node_names, edges, config.louvain_gamma, config.louvain_threshold, rng)


# --------------------------------------------------------------------------- assignment


@dataclass
class ProfileAssignment:
    profiles: dict[str, DemandProfile]
    p_commercial: float = 0.0
    num_commercial: int = 0  # before special profiles
    extreme_scenario: bool = False

    def __getitem__(self, name: str) -> DemandProfile:
        return self.profiles[name]

    def __len__(self) -> int:
        return len(self.profiles)

    def names_of(self, kind: ProfileKind) -> list[str]:
        return [n for n, p in self.profiles.items() if p.kind == kind]


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def zero_demand_count(model: NetworkModel, config: ADGConfig) -> int:
    n = len(model.junctions)
    rate = config.zero_dem_rate
    if config.zero_dem_from_baseline and n:
        rate = sum(j.base_demand == 0 for j in model.junctions) / n
    return round_half_up(rate * n)


def assign_profiles(model: NetworkModel, communities: dict, config: ADGConfig, rng) -> ProfileAssignment:
    junctions = [j.name for j in model.junctions]
    n = len(junctions)
    if n == 0:
        return ProfileAssignment({})
    kinds = config.profiles()
    p = float(rng.uniform(*config.p_commercial))
    target = math.floor(p * n)
    groups: dict[int, list[str]] = {}
    for name in junctions:
        groups.setdefault(communities[name], []).append(name)
    order = rng.permutation(sorted(groups))
    profiles = {name: kinds[ProfileKind.HOUSEHOLD] for name in junctions}
    assigned = 0
    for cid in order:
        for name in groups[int(cid)]:
            if assigned >= target:
                break
            profiles[name] = kinds[ProfileKind.COMMERCIAL]
            assigned += 1
    out = ProfileAssignment(profiles, p, assigned)
    pool = list(junctions)
    if rng.uniform() < config.extreme_dem_rate and config.max_extreme_dem_junctions > 0:
        out.extreme_scenario = True
        k = int(rng.integers(1, config.max_extreme_dem_junctions + 1))
        for name in rng.choice(pool, size=min(k, n), replace=False):
            profiles[str(name)] = kinds[ProfileKind.EXTREME]
    pool = [nm for nm in junctions if profiles[nm].kind != ProfileKind.EXTREME]
    nz = min(zero_demand_count(model, config), len(pool))
    for name in rng.choice(pool, size=nz, replace=False) if nz else []:
        profiles[str(name)] = kinds[ProfileKind.ZERO]
    return out


# --------------------------------------------------------------------------- generation


@dataclass
class DemandScenario:
    junctions: list[str]
    multipliers: np.ndarray  # (T, n) in [0, 1]
    assignment: ProfileAssignment
    bounds: ConsumptionBounds
    yearly: np.ndarray
    noise_std: np.ndarray = field(repr=False, default=None)

    def as_dict(self) -> dict[str, np.ndarray]:
        return {n: self.multipliers[:, i] for i, n in enumerate(self.junctions)}


def generate_demand_scenario(model: NetworkModel, config: ADGConfig, rng, communities: dict | None = None) -> DemandScenario:
    """Multiplier series for every junction of one scenario."""
    if not model.junctions:
        raise ValueError("model has no junctions")
    if communities is None:
        communities = network_communities(model, config, rng)
    assignment = assign_profiles(model, communities, config, rng)
    bounds = consumption_levels(rng, config.level_samples)
    yearly = yearly_pattern(config, rng)
    T = config.num_steps
    names = [j.name for j in model.junctions]
    out = np.zeros((T, len(names)))
    stds = np.zeros(len(names))
    for i, name in enumerate(names):
        prof = assignment[name]
        if prof.kind == ProfileKind.ZERO:
            continue
        daily = daily_pattern(prof, bounds, config, rng)
        stds[i] = rng.uniform(*config.noise_range)
        eps = rng.normal(0.0, stds[i], T)
        out[:, i] = minmax(daily + yearly + eps)
    return DemandScenario(names, out, assignment, bounds, yearly, stds)


def generate_demands(model: NetworkModel, config: ADGConfig, rng, communities: dict | None = None) -> dict[str, np.ndarray]:
    return generate_demand_scenario(model, config, rng, communities).as_dict()
