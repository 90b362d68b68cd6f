"""Hydraulic sampling parameter optimization: per-parameter particle swarms.

The swarm tunes the normalized (lb, ub) bounds of one parameter at a time
while every other entry stays frozen.  Candidate bounds are scored by

    f_pso = f_success * (alpha * f_ubiqr + (1 - alpha) * f_range)

where f_success is the share of sampled scenarios passing the rules,
f_ubiqr compares the upper Tukey fence of junction output demand with the
baseline network's, and f_range is the mean bound width of the tunable
parameters.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .hydraulics import RuleSet, default_rules, simulate_batch
from .inp_io import NetworkModel
from .profiler import quantile
from .strategies import SamplingConfig, ScenarioSampler

log = logging.getLogger(__name__)


class ZeroBaselineSpread(ValueError):
    pass


@dataclass
class SwarmConfig:
    swarm_size: int = 20
    w: float = 0.729
    c1: float = 1.494
    c2: float = 1.494
    max_iter: int = 30
    patience: int = 8  # stop a swarm after this many iterations without improvement
    max_epochs: int = 10
    alpha: float = 0.5
    n_cases: int = 100
    tolerance: float = 1e-3

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.n_cases < 1 or self.swarm_size < 1:
            raise ValueError("n_cases and swarm_size must be >= 1")


@dataclass(frozen=True)
class FitnessBreakdown:
    f_success: float
    f_ubiqr: float
    f_range: float
    f_pso: float


# --------------------------------------------------------------------------- fitness terms


def ubiqr(values) -> float:
    """Upper Tukey fence ``q3 + 1.5 (q3 - q1)``."""
    q1, q3 = quantile(np.asarray(values, dtype=float).ravel(), [0.25, 0.75])
    return float(q3 + 1.5 * (q3 - q1))


def f_ubiqr(generated, baseline) -> float:
    base = ubiqr(baseline)
    if base == 0:
        log.warning("baseline demand has zero UBIQR; f_ubiqr set to 0")
        return 0.0
    return ubiqr(generated) / base


def f_range(lb: float, ub: float) -> float:
    return abs(float(ub) - float(lb))


def success_rate(valid) -> float:
    v = np.asarray(valid, dtype=bool)
    return float(v.sum()) / v.size if v.size else 0.0


def fitness_from_parts(f_success: float, f_ubiqr_: float, f_range_: float, alpha: float) -> FitnessBreakdown:
    f = f_success * (alpha * f_ubiqr_ + (1.0 - alpha) * f_range_)
    return FitnessBreakdown(float(f_success), float(f_ubiqr_), float(f_range_), float(f))


def config_range(config: SamplingConfig, pids: list[str] | None = None) -> float:
    """Mean bound width over *pids* (all tunable entries by default)."""
    pids = config.tunable() if pids is None else pids
    if not pids:
        return 0.0
    return float(np.mean([f_range(config[p].lb, config[p].ub) for p in pids]))


# --------------------------------------------------------------------------- evaluation


def case_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(index)])


@dataclass
class Evaluator:
    """Scores sampling configurations on one network with common random numbers.

    Every configuration evaluated with the same ``seed`` sees the same
    per-case random streams, so comparisons are not blurred by sampling
    noise.
    """

    model: NetworkModel
    sampler: ScenarioSampler
    rules: RuleSet
    n_cases: int = 100
    alpha: float = 0.5
    range_pids: list[str] | None = None
    baseline_demand: np.ndarray | None = None
    evaluations: int = 0

    @classmethod
    def build(cls, model: NetworkModel, config: SamplingConfig, rules: RuleSet | None = None,
              n_cases: int = 100, alpha: float = 0.5, **sampler_kwargs) -> "Evaluator":
        sampler = ScenarioSampler(model, config, **sampler_kwargs)
        rules = default_rules() if rules is None else rules
        base = simulate_batch(model, [{}], num_steps=sampler.num_steps)[0]
        jd = base.outputs["demand"][:, base.junction_mask]
        return cls(model, sampler, rules, n_cases, alpha, config.tunable(), jd)

    def evaluate_many(self, configs: list[SamplingConfig], seed: int) -> list[FitnessBreakdown]:
        inputs = []
        for cfg in configs:
            s = self.sampler.with_config(cfg)
            inputs += [s.sample(case_rng(seed, i)) for i in range(self.n_cases)]
        results = simulate_batch(self.model, inputs, num_steps=self.sampler.num_steps, rules=self.rules)
        self.evaluations += len(configs)
        out = []
        for k, cfg in enumerate(configs):
            chunk = results[k * self.n_cases:(k + 1) * self.n_cases]
            fs = success_rate([r.valid for r in chunk])
            ratios = [
                f_ubiqr(r.outputs["demand"][:, r.junction_mask], self.baseline_demand)
                for r in chunk
                if r.converged.all()
            ]
            fu = float(np.mean(ratios)) if ratios else 0.0
            out.append(fitness_from_parts(fs, fu, config_range(cfg, self.range_pids), self.alpha))
        return out

    def evaluate(self, config: SamplingConfig, seed: int) -> FitnessBreakdown:
        return self.evaluate_many([config], seed)[0]


def f_success(config: SamplingConfig, model: NetworkModel, rules: RuleSet | None, n_cases: int, rng) -> float:
    """Share of *n_cases* sampled scenarios that pass *rules*."""
    sampler = ScenarioSampler(model, config)
    inputs = [sampler.sample(rng) for _ in range(n_cases)]
    results = simulate_batch(model, inputs, num_steps=sampler.num_steps, rules=rules or default_rules())
    return success_rate([r.valid for r in results])


def fitness(position, context: "PSOContext") -> FitnessBreakdown:
    """Breakdown of one particle position within its frozen configuration."""
    lb, ub = position
    cfg = context.config.replace(context.parameter, lb, ub)
    return context.evaluator.evaluate(cfg, context.seed)


@dataclass
class PSOContext:
    parameter: str
    config: SamplingConfig
    evaluator: Evaluator
    seed: int


# --------------------------------------------------------------------------- swarm


def project_bounds(x: np.ndarray) -> np.ndarray:
    """Clip to [0, 1]; a particle with lb > ub collapses to its midpoint."""
    x = np.clip(x, 0.0, 1.0)
    lb, ub = x[..., 0], x[..., 1]
    mid = (lb + ub) / 2.0
    bad = lb > ub
    x[..., 0] = np.where(bad, mid, lb)
    x[..., 1] = np.where(bad, mid, ub)
    return x


@dataclass
class PSOResult:
    lb: float
    ub: float
    fitness: float
    breakdown: FitnessBreakdown | None = None
    iterations: int = 0
    history: list[float] = field(default_factory=list)


def pso_optimize_parameter(parameter_id: str, frozen_config: SamplingConfig | None, swarm: SwarmConfig, rng,
                           objective: Callable[[np.ndarray], list] | None = None,
                           evaluator: Evaluator | None = None, seed: int = 0,
                           initial: tuple[float, float] | None = None) -> PSOResult:
    """Maximize the fitness over the bounds of one parameter.

    *objective* maps an ``(P, 2)`` array of positions to a list of fitness
    values or :class:`FitnessBreakdown`; by default positions are scored by
    *evaluator* within *frozen_config*.  Particle 0 starts at the incumbent
    bounds, so the result is never worse than the incumbent.
    """
    if objective is None:
        if evaluator is None or frozen_config is None:
            raise ValueError("need an objective or an evaluator with a frozen config")

        def objective(pos):
            cfgs = [frozen_config.replace(parameter_id, float(a), float(b)) for a, b in pos]
            return evaluator.evaluate_many(cfgs, seed)

    if initial is None:
        e = frozen_config[parameter_id]
        initial = (e.lb, e.ub)
    P = swarm.swarm_size
    x = np.sort(rng.uniform(0.0, 1.0, (P, 2)), axis=1)
    x[0] = initial
    x = project_bounds(x)
    v = np.zeros_like(x)
    cache: dict[tuple, object] = {}

    def score(pos):
        keys = [tuple(np.round(p, 12)) for p in pos]
        todo = [i for i, k in enumerate(keys) if k not in cache]
        # duplicates within one batch are scored once
        uniq = list(dict.fromkeys(keys[i] for i in todo))
        if uniq:
            for k, val in zip(uniq, objective(np.array(uniq))):
                cache[k] = val
        vals = [cache[k] for k in keys]
        return np.array([getattr(val, "f_pso", val) for val in vals]), vals

    f, raw = score(x)
    pbest, pbest_f = x.copy(), f.copy()
    g = int(np.argmax(f))
    # ties keep the incumbent
    if f[0] >= f[g]:
        g = 0
    gbest, gbest_f, gbest_raw = x[g].copy(), f[g], raw[g]
    history = [float(gbest_f)]
    stale = 0
    it = 0
    for it in range(1, swarm.max_iter + 1):
        r1 = rng.uniform(size=x.shape)
        r2 = rng.uniform(size=x.shape)
        v = swarm.w * v + swarm.c1 * r1 * (pbest - x) + swarm.c2 * r2 * (gbest - x)
        x = project_bounds(x + v)
        f, raw = score(x)
        better = f > pbest_f
        pbest[better], pbest_f[better] = x[better], f[better]
        i = int(np.argmax(f))
        if f[i] > gbest_f:
            gbest, gbest_f, gbest_raw = x[i].copy(), f[i], raw[i]
            stale = 0
        else:
            stale += 1
        history.append(float(gbest_f))
        if swarm.patience and stale >= swarm.patience:
            break
    breakdown = gbest_raw if isinstance(gbest_raw, FitnessBreakdown) else None
    return PSOResult(float(gbest[0]), float(gbest[1]), float(gbest_f), breakdown, it, history)


@dataclass
class HSPOResult:
    config: SamplingConfig
    fitness: FitnessBreakdown
    history: list[FitnessBreakdown]  # measured fitness of the locked config: start, then after each epoch
    log: list[dict] = field(default_factory=list)

    @property
    def fitness_sequence(self) -> list[float]:
        return [h.f_pso for h in self.history]


def hspo_run(model: NetworkModel, blueprint: SamplingConfig, swarm: SwarmConfig | None = None,
             max_epochs: int | None = None, rng=None, rules: RuleSet | None = None,
             evaluator: Evaluator | None = None, **sampler_kwargs) -> HSPOResult:
    """Divide-and-conquer optimization of every tunable entry of *blueprint*.

    Each epoch visits the tunable parameters in a random order and runs one
    swarm per parameter with the others frozen.  A single evaluation seed is
    drawn per run so fitness values are comparable across epochs.
    """
    swarm = swarm or SwarmConfig()
    max_epochs = swarm.max_epochs if max_epochs is None else max_epochs
    rng = rng if rng is not None else np.random.default_rng()
    config = blueprint.copy()
    pids = config.tunable()
    if not pids:
        return HSPOResult(config, FitnessBreakdown(0.0, 0.0, 0.0, 0.0), [], [])
    if evaluator is None:
        evaluator = Evaluator.build(model, config, rules, swarm.n_cases, swarm.alpha, **sampler_kwargs)
    seed = int(rng.integers(2**32))
    current = evaluator.evaluate(config, seed)
    history = [current]
    events = []
    for epoch in range(max_epochs):
        start = current.f_pso
        for k in rng.permutation(len(pids)):
            pid = pids[int(k)]
            res = pso_optimize_parameter(pid, config, swarm, rng, evaluator=evaluator, seed=seed)
            if res.fitness >= current.f_pso and res.breakdown is not None:
                config = config.replace(pid, res.lb, res.ub)
                current = res.breakdown
            events.append({"epoch": epoch, "parameter": pid, "lb": config[pid].lb, "ub": config[pid].ub,
                           "f_pso": current.f_pso, "iterations": res.iterations})
            log.info("epoch %d %s -> (%.4f, %.4f) f=%.4f", epoch, pid, config[pid].lb, config[pid].ub, current.f_pso)
        history.append(current)
        if current.f_pso - start < swarm.tolerance:
            break
    return HSPOResult(config, current, history, events)
