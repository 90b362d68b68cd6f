"""Catalogue of the hydraulic input parameters and their baseline extraction.

Parameter ids are ``<component>_<parameter>``.  Ranges are the global
physical ranges (SI) that normalized sampling bounds refer to.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .inp_io import NetworkModel, Pump, Valve

STATIC, PATTERN, CURVE = "static", "pattern", "curve"

COMPONENTS = (
    "junction",
    "reservoir",
    "tank",
    "pipe",
    "head_pump",
    "power_pump",
    "prv",
    "psv",
    "fcv",
    "tcv",
    "pbv",
    "gpv",
)
STATUS_CODES = {"Closed": 0.0, "Open": 1.0, "Active": 2.0, "CV": 3.0}


@dataclass(frozen=True)
class ParameterSpec:
    id: str
    component: str
    name: str
    kind: str
    unit: str
    range: tuple[float, float]
    categorical: bool = False


def _p(component, name, kind, unit, lo, hi, categorical=False):
    pid = f"{component}_{name}"
    return pid, ParameterSpec(pid, component, name, kind, unit, (float(lo), float(hi)), categorical)


CATALOGUE: dict[str, ParameterSpec] = dict(
    [
        _p("junction", "elevation", STATIC, "m", 0.0, 154.75),
        _p("junction", "demand", PATTERN, "m3/s", -1.388, 4.814),
        _p("reservoir", "base_head", STATIC, "m", 0.0, 500.0),
        _p("reservoir", "head_pattern", PATTERN, "-", 0.91, 70.42),
        _p("tank", "elevation", STATIC, "m", 2.0, 571.12),
        _p("tank", "diameter", STATIC, "m", 0.3048, 58.309),
        _p("tank", "init_level", STATIC, "m", 0.5, 548.64),
        _p("tank", "min_vol", STATIC, "m3", 0.0, 95965.597),
        _p("pipe", "diameter", STATIC, "m", 0.001, 5.1816),
        _p("pipe", "minor_loss", STATIC, "-", 0.0, 1000.0),
        _p("pipe", "roughness", STATIC, "-", 0.0015, 8333.3333),
        _p("pipe", "length", STATIC, "m", 0.01, 17003.20),
        _p("pipe", "initial_status", STATIC, "-", 0, 3, categorical=True),
        _p("head_pump", "initial_status", STATIC, "-", 0, 3, categorical=True),
        _p("head_pump", "base_speed", STATIC, "-", 0.9, 1.0),
        _p("head_pump", "efficiency_x", CURVE, "m3/s", 0.0, 0.5),
        _p("head_pump", "efficiency_y", CURVE, "%", 0.0, 77.0),
        _p("head_pump", "pump_curve_x", CURVE, "m3/s", 0.0, 0.88),
        _p("head_pump", "pump_curve_y", CURVE, "m", 0.0, 211.02),
        _p("head_pump", "energy_pattern", PATTERN, "-", 0.024093, 0.1234),
        _p("power_pump", "initial_status", STATIC, "-", 0, 3, categorical=True),
        _p("power_pump", "base_speed", STATIC, "-", 0.9, 1.0),
        _p("power_pump", "efficiency_x", CURVE, "m3/s", 0.0, 0.5),
        _p("power_pump", "efficiency_y", CURVE, "%", 0.0, 77.0),
        _p("power_pump", "power", STATIC, "kW", 372.85, 186424.97),
        _p("prv", "initial_status", STATIC, "-", 0, 3, categorical=True),
        _p("prv", "initial_setting", STATIC, "m", 0.0, 154.75),
        _p("psv", "initial_status", STATIC, "-", 0, 3, categorical=True),
        _p("psv", "initial_setting", STATIC, "m", 38.69, 49.23),
        _p("fcv", "initial_status", STATIC, "-", 0, 3, categorical=True),
        _p("fcv", "initial_setting", STATIC, "m3/s", 0.0, 0.9),
        _p("tcv", "initial_status", STATIC, "-", 0, 3, categorical=True),
        _p("tcv", "initial_setting", STATIC, "-", 0.0, 403101800000.0),
    ]
)


def components_of(model: NetworkModel, component: str) -> list:
    """Model objects of one component class, in file order."""
    if component == "junction":
        return list(model.junctions)
    if component == "reservoir":
        return list(model.reservoirs)
    if component == "tank":
        return list(model.tanks)
    if component == "pipe":
        return list(model.pipes)
    if component == "head_pump":
        return [p for p in model.pumps if p.kind == "head"]
    if component == "power_pump":
        return [p for p in model.pumps if p.kind == "power"]
    return [v for v in model.valves if v.kind == component.upper()]


def component_of(obj) -> str:
    if isinstance(obj, Pump):
        return f"{obj.kind}_pump"
    if isinstance(obj, Valve):
        return obj.kind.lower()
    return type(obj).__name__.lower()


def resolve_pattern(values: list[float] | None, num_steps: int, time_step: float, pattern_step: float) -> np.ndarray:
    """Multiplier at each hydraulic step; patterns wrap around, a missing pattern is 1."""
    if not values:
        return np.ones(num_steps)
    t_hours = np.arange(num_steps) * time_step
    idx = np.floor(t_hours / pattern_step + 1e-9).astype(int) % len(values)
    return np.asarray(values, dtype=float)[idx]


def _status_code(obj) -> float:
    status = getattr(obj, "initial_status", None)
    if status is None:
        status = "Active"
    return STATUS_CODES[status]


def baseline_values(model: NetworkModel, pid: str, num_steps: int | None = None):
    """Baseline value(s) of parameter *pid* for every component that has it.

    Static parameters give an array ``(n,)``, patterns ``(num_steps, n)`` and
    curves a list of ``n`` point arrays.  Returns ``None`` when no component
    carries the parameter.
    """
    spec = CATALOGUE[pid]
    comps = components_of(model, spec.component)
    if not comps:
        return None
    T = num_steps or model.times.num_steps
    ts, ps = model.times.time_step, model.times.pattern_step
    name = spec.name

    if spec.kind == STATIC:
        if name == "initial_status":
            return np.array([_status_code(c) for c in comps])
        attr = {"min_vol": "min_volume", "base_head": "base_head"}.get(name, name)
        vals = [getattr(c, attr) for c in comps]
        if any(v is None for v in vals):
            return None
        return np.asarray(vals, dtype=float)

    if spec.kind == PATTERN:
        if pid == "junction_demand":
            cols = [
                c.base_demand * model.demand_multiplier * resolve_pattern(model.pattern_for(c), T, ts, ps)
                for c in comps
            ]
            return np.column_stack(cols)
        ref = {"head_pattern": "head_pattern", "energy_pattern": "energy_pattern"}[name]
        if not any(getattr(c, ref) for c in comps):
            return None
        cols = [resolve_pattern(model.patterns.get(getattr(c, ref)), T, ts, ps) for c in comps]
        return np.column_stack(cols)

    curve_attr = "efficiency_curve" if name.startswith("efficiency") else "head_curve"
    axis = 0 if name.endswith("_x") else 1
    if not any(getattr(c, curve_attr) for c in comps):
        return None
    out = []
    for c in comps:
        pts = model.curves.get(getattr(c, curve_attr)) or []
        out.append(np.array([p[axis] for p in pts], dtype=float))
    return out


def present_parameters(model: NetworkModel) -> list[str]:
    return [pid for pid in CATALOGUE if baseline_values(model, pid) is not None]


_CODE_TO_STATUS = {0: "Closed", 1: "Open", 2: None, 3: "CV"}


def apply_inputs(model: NetworkModel, inputs: dict) -> NetworkModel:
    """Copy of *model* carrying the sampled static and curve parameters.

    Pattern parameters (demands, head patterns) are time series consumed
    directly by the simulator and are not folded into the model.
    """
    m = model.copy()
    for pid, values in inputs.items():
        spec = CATALOGUE.get(pid)
        if spec is None or spec.kind == PATTERN:
            continue
        comps = components_of(m, spec.component)
        if spec.kind == STATIC:
            vals = np.asarray(values, dtype=float)
            for c, v in zip(comps, vals):
                if spec.name == "initial_status":
                    status = _CODE_TO_STATUS[int(round(v))]
                    if isinstance(c, Valve):
                        c.initial_status = status
                    elif status is not None:
                        c.initial_status = status
                else:
                    attr = {"min_vol": "min_volume"}.get(spec.name, spec.name)
                    setattr(c, attr, float(v))
            continue
        curve_attr = "efficiency_curve" if spec.name.startswith("efficiency") else "head_curve"
        axis = 0 if spec.name.endswith("_x") else 1
        for c, arr in zip(comps, values):
            old = m.curves.get(getattr(c, curve_attr)) or []
            arr = np.asarray(arr, dtype=float)
            if len(old) != arr.size:
                raise ValueError(f"{pid}: curve of {c.name} has {len(old)} points, got {arr.size}")
            pts = [(float(a), y) if axis == 0 else (x, float(a)) for (x, y), a in zip(old, arr)]
            own = f"{c.name}::{curve_attr}"
            m.curves[own] = pts
            setattr(c, curve_attr, own)
    return m
