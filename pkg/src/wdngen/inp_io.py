"""Reading, writing and unit conversion of EPANET 2.2 ``.inp`` networks.

Only the hydraulic subset is modelled.  Sections outside the whitelist are
skipped and their names recorded in :attr:`NetworkModel.skipped_sections`.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path

__all__ = [
    "InpError",
    "MalformedSection",
    "DanglingReference",
    "DuplicateName",
    "UnsupportedUnit",
    "EncodingError",
    "Junction",
    "Reservoir",
    "Tank",
    "Pipe",
    "Pump",
    "Valve",
    "SimulationTimes",
    "NetworkModel",
    "parse_inp",
    "read_inp",
    "serialize_inp",
    "write_inp",
    "convert_to_si",
    "load_bundled",
    "FLOW_UNITS",
]


class InpError(ValueError):
    """Base class for INP parsing problems."""


class MalformedSection(InpError):
    def __init__(self, section: str, line_no: int, message: str):
        self.section = section
        self.line_no = line_no
        super().__init__(f"[{section}] line {line_no}: {message}")


class DanglingReference(InpError):
    pass


class DuplicateName(InpError):
    pass


class UnsupportedUnit(InpError):
    pass


class EncodingError(InpError):
    pass


# m^3/s per unit of flow
FLOW_UNITS = {
    "CFS": 0.028316846592,
    "GPM": 3.785411784e-3 / 60.0,
    "MGD": 3785.411784 / 86400.0,
    "IMGD": 4546.09 / 86400.0,
    "AFD": 1233.48183754752 / 86400.0,
    "LPS": 1e-3,
    "LPM": 1e-3 / 60.0,
    "MLD": 1000.0 / 86400.0,
    "CMH": 1.0 / 3600.0,
    "CMD": 1.0 / 86400.0,
    "CMS": 1.0,
}
US_FLOW_UNITS = {"CFS", "GPM", "MGD", "IMGD", "AFD"}

# conversion factors to SI for the non-flow quantities of each unit family
_US = {
    "length": 0.3048,  # ft
    "diameter": 0.0254,  # in
    "power": 0.745699872,  # hp -> kW
    "dw_roughness": 0.3048,  # millifeet -> mm
    "volume": 0.028316846592,  # ft^3
    "pressure": 6894.757293168 / 9806.65,  # psi -> m of water
}
_SI = {
    "length": 1.0,
    "diameter": 1e-3,  # mm
    "power": 1.0,
    "dw_roughness": 1.0,
    "volume": 1.0,
    "pressure": 1.0,
}

HEADLOSS_FORMULAS = ("H-W", "D-W", "C-M")
VALVE_KINDS = ("PRV", "PSV", "PBV", "FCV", "TCV", "GPV")
UNSUPPORTED_VALVES = ("PBV", "GPV")

SECTIONS = (
    "JUNCTIONS",
    "RESERVOIRS",
    "TANKS",
    "PIPES",
    "PUMPS",
    "VALVES",
    "DEMANDS",
    "STATUS",
    "PATTERNS",
    "CURVES",
    "ENERGY",
    "TIMES",
    "OPTIONS",
    "COORDINATES",
    "END",
)
# recognised but not interpreted; presence is recorded as a warning
_FLAGGED_SECTIONS = ("CONTROLS", "RULES", "EMITTERS")


@dataclass
class Junction:
    name: str
    elevation: float
    base_demand: float = 0.0
    demand_pattern: str | None = None


@dataclass
class Reservoir:
    name: str
    base_head: float
    head_pattern: str | None = None


@dataclass
class Tank:
    name: str
    elevation: float
    init_level: float
    min_level: float
    max_level: float
    diameter: float
    min_volume: float = 0.0
    volume_curve: str | None = None

    @property
    def area(self) -> float:
        return math.pi * self.diameter**2 / 4.0


@dataclass
class Pipe:
    name: str
    start: str
    end: str
    length: float
    diameter: float
    roughness: float
    minor_loss: float = 0.0
    initial_status: str = "Open"  # Open, Closed or CV


@dataclass
class Pump:
    name: str
    start: str
    end: str
    kind: str = "head"  # head or power
    head_curve: str | None = None
    power: float | None = None
    base_speed: float = 1.0
    speed_pattern: str | None = None
    energy_pattern: str | None = None
    efficiency_curve: str | None = None
    initial_status: str = "Open"


@dataclass
class Valve:
    name: str
    start: str
    end: str
    kind: str
    diameter: float
    initial_setting: float = 0.0
    minor_loss: float = 0.0
    setting_curve: str | None = None  # GPV only
    initial_status: str | None = None  # None: controlled by setting


@dataclass
class SimulationTimes:
    duration: float = 24.0  # hours
    time_step: float = 1.0
    pattern_step: float = 1.0

    @property
    def num_steps(self) -> int:
        return max(int(round(self.duration / self.time_step)), 1)


@dataclass
class NetworkModel:
    name: str = "network"
    junctions: list[Junction] = field(default_factory=list)
    reservoirs: list[Reservoir] = field(default_factory=list)
    tanks: list[Tank] = field(default_factory=list)
    pipes: list[Pipe] = field(default_factory=list)
    pumps: list[Pump] = field(default_factory=list)
    valves: list[Valve] = field(default_factory=list)
    patterns: dict[str, list[float]] = field(default_factory=dict)
    curves: dict[str, list[tuple[float, float]]] = field(default_factory=dict)
    coordinates: dict[str, tuple[float, float]] = field(default_factory=dict)
    times: SimulationTimes = field(default_factory=SimulationTimes)
    flow_unit: str = "LPS"
    headloss_formula: str = "H-W"
    default_pattern: str | None = None
    demand_multiplier: float = 1.0
    si: bool = False
    skipped_sections: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    flags: dict[str, list[str]] = field(default_factory=dict)

    @property
    def nodes(self) -> list:
        return [*self.junctions, *self.reservoirs, *self.tanks]

    @property
    def links(self) -> list:
        return [*self.pipes, *self.pumps, *self.valves]

    @property
    def node_names(self) -> list[str]:
        return [n.name for n in self.nodes]

    @property
    def link_names(self) -> list[str]:
        return [k.name for k in self.links]

    def node(self, name: str):
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)

    def link(self, name: str):
        for k in self.links:
            if k.name == name:
                return k
        raise KeyError(name)

    def copy(self) -> "NetworkModel":
        return copy.deepcopy(self)

    def pattern_for(self, junction: Junction) -> list[float] | None:
        """Pattern that EPANET would apply to *junction* (explicit, default, or ``"1"``)."""
        name = junction.demand_pattern or self.default_pattern
        if name is None and "1" in self.patterns:
            name = "1"
        return self.patterns.get(name) if name is not None else None


# --------------------------------------------------------------------------- parsing


def _float(tok: str, section: str, line_no: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise MalformedSection(section, line_no, f"expected a number, got {tok!r}") from None


def _parse_hours(tokens: list[str], section: str, line_no: int) -> float:
    """Convert an EPANET time value (``h:mm[:ss]`` or number + unit) to hours."""
    if not tokens:
        raise MalformedSection(section, line_no, "missing time value")
    value = tokens[0]
    if ":" in value:
        parts = [_float(p, section, line_no) for p in value.split(":")]
        while len(parts) < 3:
            parts.append(0.0)
        hours = parts[0] + parts[1] / 60.0 + parts[2] / 3600.0
    else:
        hours = _float(value, section, line_no)
        unit = tokens[1].upper() if len(tokens) > 1 else "HOURS"
        if unit.startswith("SEC"):
            hours /= 3600.0
        elif unit.startswith("MIN"):
            hours /= 60.0
        elif unit.startswith("DAY"):
            hours *= 24.0
        elif not unit.startswith("HOUR"):
            raise MalformedSection(section, line_no, f"unknown time unit {tokens[1]!r}")
    if len(tokens) > 1 and tokens[-1].upper() in ("AM", "PM"):
        raise MalformedSection(section, line_no, "clock times are not supported")
    return hours


def _need(parts: list[str], n: int, section: str, line_no: int) -> None:
    if len(parts) < n:
        raise MalformedSection(section, line_no, f"expected at least {n} fields, got {len(parts)}")


def parse_inp(text: str, name: str = "network") -> NetworkModel:
    """Parse INP text into a :class:`NetworkModel` in the file's own units."""
    model = NetworkModel(name=name)
    section: str | None = None
    pattern_order: list[str] = []
    demands_seen: dict[str, list[tuple[float, str | None]]] = {}
    status_lines: list[tuple[int, list[str]]] = []
    energy_lines: list[tuple[int, list[str]]] = []
    times_seen: dict[str, float] = {}

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            tag = line[1 : line.index("]")].strip().upper() if "]" in line else ""
            if not tag:
                raise MalformedSection(line, line_no, "unterminated section header")
            if tag in SECTIONS:
                section = tag
            else:
                section = None
                if tag not in model.skipped_sections:
                    model.skipped_sections.append(tag)
                if tag in _FLAGGED_SECTIONS:
                    model.warnings.append(f"section [{tag}] present but not simulated")
            continue
        if section is None or section == "END":
            continue
        parts = line.split()

        if section == "JUNCTIONS":
            _need(parts, 2, section, line_no)
            j = Junction(parts[0], _float(parts[1], section, line_no))
            if len(parts) > 2:
                j.base_demand = _float(parts[2], section, line_no)
            if len(parts) > 3:
                j.demand_pattern = parts[3]
            model.junctions.append(j)
        elif section == "RESERVOIRS":
            _need(parts, 2, section, line_no)
            model.reservoirs.append(
                Reservoir(parts[0], _float(parts[1], section, line_no), parts[2] if len(parts) > 2 else None)
            )
        elif section == "TANKS":
            _need(parts, 6, section, line_no)
            vals = [_float(p, section, line_no) for p in parts[1:6]]
            t = Tank(parts[0], *vals)
            if len(parts) > 6:
                t.min_volume = _float(parts[6], section, line_no)
            if len(parts) > 7 and parts[7] != "*":
                t.volume_curve = parts[7]
            model.tanks.append(t)
        elif section == "PIPES":
            _need(parts, 6, section, line_no)
            p = Pipe(parts[0], parts[1], parts[2], *(_float(x, section, line_no) for x in parts[3:6]))
            if len(parts) > 6:
                p.minor_loss = _float(parts[6], section, line_no)
            if len(parts) > 7:
                p.initial_status = _status_word(parts[7], section, line_no)
            model.pipes.append(p)
        elif section == "PUMPS":
            _need(parts, 4, section, line_no)
            pump = Pump(parts[0], parts[1], parts[2])
            it = iter(parts[3:])
            for key in it:
                try:
                    val = next(it)
                except StopIteration:
                    raise MalformedSection(section, line_no, f"keyword {key} without value") from None
                key = key.upper()
                if key == "HEAD":
                    pump.kind, pump.head_curve = "head", val
                elif key == "POWER":
                    pump.kind, pump.power = "power", _float(val, section, line_no)
                elif key == "SPEED":
                    pump.base_speed = _float(val, section, line_no)
                elif key == "PATTERN":
                    pump.speed_pattern = val
                else:
                    raise MalformedSection(section, line_no, f"unknown pump keyword {key}")
            model.pumps.append(pump)
        elif section == "VALVES":
            _need(parts, 6, section, line_no)
            kind = parts[4].upper()
            if kind not in VALVE_KINDS:
                raise MalformedSection(section, line_no, f"unknown valve type {parts[4]}")
            v = Valve(parts[0], parts[1], parts[2], kind, _float(parts[3], section, line_no))
            if kind == "GPV":
                v.setting_curve = parts[5]
            else:
                v.initial_setting = _float(parts[5], section, line_no)
            if len(parts) > 6:
                v.minor_loss = _float(parts[6], section, line_no)
            model.valves.append(v)
            if kind in UNSUPPORTED_VALVES:
                model.flags.setdefault(v.name, []).append("unsupported-for-simulation")
        elif section == "DEMANDS":
            _need(parts, 2, section, line_no)
            demands_seen.setdefault(parts[0], []).append(
                (_float(parts[1], section, line_no), parts[2] if len(parts) > 2 else None)
            )
        elif section == "STATUS":
            _need(parts, 2, section, line_no)
            status_lines.append((line_no, parts))
        elif section == "PATTERNS":
            pid = parts[0]
            if pid not in model.patterns:
                model.patterns[pid] = []
                pattern_order.append(pid)
            model.patterns[pid].extend(_float(x, section, line_no) for x in parts[1:])
        elif section == "CURVES":
            _need(parts, 3, section, line_no)
            model.curves.setdefault(parts[0], []).append(
                (_float(parts[1], section, line_no), _float(parts[2], section, line_no))
            )
        elif section == "ENERGY":
            energy_lines.append((line_no, parts))
        elif section == "TIMES":
            key = parts[0].upper()
            if key in ("DURATION",):
                times_seen["duration"] = _parse_hours(parts[1:], section, line_no)
            elif key == "HYDRAULIC" and len(parts) > 2 and parts[1].upper() == "TIMESTEP":
                times_seen["time_step"] = _parse_hours(parts[2:], section, line_no)
            elif key == "PATTERN" and len(parts) > 2 and parts[1].upper() == "TIMESTEP":
                times_seen["pattern_step"] = _parse_hours(parts[2:], section, line_no)
        elif section == "OPTIONS":
            _parse_option(model, parts, line_no)
        elif section == "COORDINATES":
            _need(parts, 3, section, line_no)
            model.coordinates[parts[0]] = (_float(parts[1], section, line_no), _float(parts[2], section, line_no))

    _apply_demands(model, demands_seen)
    _apply_status(model, status_lines)
    _apply_energy(model, energy_lines)
    _apply_times(model, times_seen)
    for j in model.junctions:
        if j.base_demand < 0:
            model.flags.setdefault(j.name, []).append("negative-demand")
    _check_integrity(model)
    return model


def _status_word(tok: str, section: str, line_no: int) -> str:
    word = tok.upper()
    if word == "OPEN":
        return "Open"
    if word == "CLOSED":
        return "Closed"
    if word == "CV":
        return "CV"
    raise MalformedSection(section, line_no, f"unknown status {tok!r}")


def _parse_option(model: NetworkModel, parts: list[str], line_no: int) -> None:
    key = parts[0].upper()
    if key == "UNITS" and len(parts) > 1:
        unit = parts[1].upper()
        if unit not in FLOW_UNITS:
            raise UnsupportedUnit(f"line {line_no}: flow unit {parts[1]!r}")
        model.flow_unit = unit
    elif key == "HEADLOSS" and len(parts) > 1:
        formula = parts[1].upper()
        if formula not in HEADLOSS_FORMULAS:
            raise MalformedSection("OPTIONS", line_no, f"unknown headloss formula {parts[1]!r}")
        model.headloss_formula = formula
    elif key == "PATTERN" and len(parts) > 1:
        model.default_pattern = parts[1]
    elif key == "DEMAND" and len(parts) > 2 and parts[1].upper() == "MULTIPLIER":
        model.demand_multiplier = _float(parts[2], "OPTIONS", line_no)


def _apply_demands(model: NetworkModel, demands: dict[str, list[tuple[float, str | None]]]) -> None:
    if not demands:
        return
    by_name = {j.name: j for j in model.junctions}
    for name, cats in demands.items():
        if name not in by_name:
            raise DanglingReference(f"[DEMANDS] names unknown junction {name!r}")
        j = by_name[name]
        j.base_demand = sum(c[0] for c in cats)
        j.demand_pattern = cats[0][1]
        if len(cats) > 1:
            model.warnings.append(f"junction {name}: {len(cats)} demand categories merged into one")


def _apply_status(model: NetworkModel, lines: list[tuple[int, list[str]]]) -> None:
    links = {k.name: k for k in model.links}
    for line_no, parts in lines:
        link = links.get(parts[0])
        if link is None:
            raise DanglingReference(f"[STATUS] line {line_no}: unknown link {parts[0]!r}")
        word = parts[1].upper()
        if isinstance(link, Valve):
            if word in ("OPEN", "CLOSED"):
                link.initial_status = word.capitalize()
            else:
                link.initial_setting = _float(parts[1], "STATUS", line_no)
                link.initial_status = None
        elif isinstance(link, Pump):
            if word in ("OPEN", "CLOSED"):
                link.initial_status = word.capitalize()
            else:
                link.base_speed = _float(parts[1], "STATUS", line_no)
        else:
            if word not in ("OPEN", "CLOSED"):
                raise MalformedSection("STATUS", line_no, f"bad pipe status {parts[1]!r}")
            if link.initial_status != "CV":
                link.initial_status = word.capitalize()


def _apply_energy(model: NetworkModel, lines: list[tuple[int, list[str]]]) -> None:
    pumps = {p.name: p for p in model.pumps}
    for line_no, parts in lines:
        if parts[0].upper() != "PUMP" or len(parts) < 4:
            continue
        pump = pumps.get(parts[1])
        if pump is None:
            raise DanglingReference(f"[ENERGY] line {line_no}: unknown pump {parts[1]!r}")
        key = parts[2].upper()
        if key.startswith("EFFIC"):
            pump.efficiency_curve = parts[3]
        elif key == "PATTERN":
            pump.energy_pattern = parts[3]


def _apply_times(model: NetworkModel, seen: dict[str, float]) -> None:
    t = model.times
    t.time_step = seen.get("time_step", 1.0)
    t.pattern_step = seen.get("pattern_step", t.time_step)
    duration = seen.get("duration", 24.0)
    if duration <= 0:
        model.warnings.append("zero duration replaced by a single time step")
        duration = t.time_step
    t.duration = duration
    if t.time_step <= 0:
        raise MalformedSection("TIMES", 0, "hydraulic timestep must be positive")
    ratio = t.duration / t.time_step
    if abs(ratio - round(ratio)) > 1e-9:
        raise MalformedSection("TIMES", 0, "duration is not a multiple of the hydraulic timestep")


def _check_integrity(model: NetworkModel) -> None:
    for group, label in ((model.nodes, "node"), (model.links, "link")):
        seen: set[str] = set()
        for item in group:
            if item.name in seen:
                raise DuplicateName(f"duplicate {label} name {item.name!r}")
            seen.add(item.name)
    nodes = set(model.node_names)
    for link in model.links:
        for end in (link.start, link.end):
            if end not in nodes:
                raise DanglingReference(f"link {link.name!r} names unknown node {end!r}")

    def need(kind: str, ref: str | None, table: dict, owner: str) -> None:
        if ref is not None and ref not in table:
            raise DanglingReference(f"{owner} references unknown {kind} {ref!r}")

    for j in model.junctions:
        need("pattern", j.demand_pattern, model.patterns, j.name)
    for r in model.reservoirs:
        need("pattern", r.head_pattern, model.patterns, r.name)
    for t in model.tanks:
        need("curve", t.volume_curve, model.curves, t.name)
    for p in model.pumps:
        need("curve", p.head_curve, model.curves, p.name)
        need("curve", p.efficiency_curve, model.curves, p.name)
        need("pattern", p.speed_pattern, model.patterns, p.name)
        need("pattern", p.energy_pattern, model.patterns, p.name)
        if p.kind == "head" and (p.head_curve is None or not model.curves[p.head_curve]):
            raise InpError(f"head pump {p.name!r} needs a curve with at least one point")
        if p.base_speed <= 0 and p.initial_status != "Closed":
            raise InpError(f"pump {p.name!r} has non-positive speed")
    for v in model.valves:
        need("curve", v.setting_curve, model.curves, v.name)


def read_inp(path: str | Path) -> NetworkModel:
    """Read an INP file; non UTF-8 input is rejected rather than guessed."""
    path = Path(path)
    data = path.read_bytes()
    try:
        text = data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise EncodingError(f"{path.name}: not valid UTF-8 ({exc.reason} at byte {exc.start})") from None
    return parse_inp(text, name=path.stem)


def load_bundled(name: str) -> NetworkModel:
    """Load one of the networks shipped in ``wdngen/data`` (e.g. ``"hanoi"``)."""
    return read_inp(Path(__file__).parent / "data" / f"{name}.inp")


# --------------------------------------------------------------------------- writing


def _num(v: float) -> str:
    return repr(float(v))


def serialize_inp(model: NetworkModel) -> str:
    """Write *model* as INP text.

    SI models are written back in the units of their original ``flow_unit`` so
    the output is a normal EPANET file.
    """
    if model.si:
        model = _scale(model, inverse=True)
    out: list[str] = []

    def header(name: str) -> None:
        if out:
            out.append("")
        out.append(f"[{name}]")

    header("JUNCTIONS")
    for j in model.junctions:
        row = [j.name, _num(j.elevation), _num(j.base_demand)]
        if j.demand_pattern:
            row.append(j.demand_pattern)
        out.append(" ".join(row))
    header("RESERVOIRS")
    for r in model.reservoirs:
        out.append(" ".join([r.name, _num(r.base_head)] + ([r.head_pattern] if r.head_pattern else [])))
    header("TANKS")
    for t in model.tanks:
        row = [t.name] + [_num(x) for x in (t.elevation, t.init_level, t.min_level, t.max_level, t.diameter, t.min_volume)]
        if t.volume_curve:
            row.append(t.volume_curve)
        out.append(" ".join(row))
    header("PIPES")
    for p in model.pipes:
        out.append(
            " ".join(
                [p.name, p.start, p.end]
                + [_num(x) for x in (p.length, p.diameter, p.roughness, p.minor_loss)]
                + [p.initial_status]
            )
        )
    header("PUMPS")
    for p in model.pumps:
        row = [p.name, p.start, p.end]
        if p.kind == "head":
            row += ["HEAD", str(p.head_curve)]
        else:
            row += ["POWER", _num(p.power)]
        row += ["SPEED", _num(p.base_speed)]
        if p.speed_pattern:
            row += ["PATTERN", p.speed_pattern]
        out.append(" ".join(row))
    header("VALVES")
    for v in model.valves:
        setting = v.setting_curve if v.kind == "GPV" else _num(v.initial_setting)
        out.append(" ".join([v.name, v.start, v.end, _num(v.diameter), v.kind, setting, _num(v.minor_loss)]))
    header("STATUS")
    for p in model.pumps:
        if p.initial_status == "Closed":
            out.append(f"{p.name} Closed")
    for v in model.valves:
        if v.initial_status:
            out.append(f"{v.name} {v.initial_status}")
    header("PATTERNS")
    for pid, values in model.patterns.items():
        for start in range(0, len(values), 6):
            out.append(" ".join([pid] + [_num(x) for x in values[start : start + 6]]))
    header("CURVES")
    for cid, pts in model.curves.items():
        for x, y in pts:
            out.append(f"{cid} {_num(x)} {_num(y)}")
    header("ENERGY")
    for p in model.pumps:
        if p.efficiency_curve:
            out.append(f"Pump {p.name} Efficiency {p.efficiency_curve}")
        if p.energy_pattern:
            out.append(f"Pump {p.name} Pattern {p.energy_pattern}")
    header("TIMES")
    out.append(f"Duration {_num(model.times.duration)} HOURS")
    out.append(f"Hydraulic Timestep {_num(model.times.time_step)} HOURS")
    out.append(f"Pattern Timestep {_num(model.times.pattern_step)} HOURS")
    header("OPTIONS")
    out.append(f"Units {model.flow_unit}")
    out.append(f"Headloss {model.headloss_formula}")
    if model.default_pattern:
        out.append(f"Pattern {model.default_pattern}")
    out.append(f"Demand Multiplier {_num(model.demand_multiplier)}")
    header("COORDINATES")
    for node, (x, y) in model.coordinates.items():
        out.append(f"{node} {_num(x)} {_num(y)}")
    header("END")
    return "\n".join(out) + "\n"


def write_inp(model: NetworkModel, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(serialize_inp(model), encoding="utf-8")
    return path


# --------------------------------------------------------------------------- units


def curve_roles(model: NetworkModel) -> dict[str, str]:
    """Map curve name to its use: ``head``, ``efficiency``, ``volume`` or ``headloss``."""
    roles: dict[str, str] = {}
    for p in model.pumps:
        if p.head_curve:
            roles[p.head_curve] = "head"
        if p.efficiency_curve:
            roles[p.efficiency_curve] = "efficiency"
    for t in model.tanks:
        if t.volume_curve:
            roles[t.volume_curve] = "volume"
    for v in model.valves:
        if v.setting_curve:
            roles[v.setting_curve] = "headloss"
    return roles


def convert_to_si(model: NetworkModel) -> NetworkModel:
    """Return a copy of *model* with every quantity in SI.

    Flows become m^3/s, lengths/diameters/heads m, power kW, Darcy-Weisbach
    roughness mm.  ``flow_unit`` is kept as provenance; applying the function
    to an SI model returns an equal copy.
    """
    if model.flow_unit not in FLOW_UNITS:
        raise UnsupportedUnit(f"flow unit {model.flow_unit!r}")
    if model.si:
        return model.copy()
    return _scale(model, inverse=False)


def _scale(model: NetworkModel, inverse: bool) -> NetworkModel:
    m = model.copy()
    fam = _US if m.flow_unit in US_FLOW_UNITS else _SI

    def f(x, kind):
        factor = FLOW_UNITS[m.flow_unit] if kind == "flow" else fam[kind]
        if x is None:
            return None
        return x / factor if inverse else x * factor

    for j in m.junctions:
        j.elevation = f(j.elevation, "length")
        j.base_demand = f(j.base_demand, "flow")
    for r in m.reservoirs:
        r.base_head = f(r.base_head, "length")
    for t in m.tanks:
        t.elevation = f(t.elevation, "length")
        t.init_level = f(t.init_level, "length")
        t.min_level = f(t.min_level, "length")
        t.max_level = f(t.max_level, "length")
        t.diameter = f(t.diameter, "length")
        t.min_volume = f(t.min_volume, "volume")
    for p in m.pipes:
        p.length = f(p.length, "length")
        p.diameter = f(p.diameter, "diameter")
        if m.headloss_formula == "D-W":
            p.roughness = f(p.roughness, "dw_roughness")
    for p in m.pumps:
        p.power = f(p.power, "power")
    for v in m.valves:
        v.diameter = f(v.diameter, "diameter")
        if v.kind in ("PRV", "PSV", "PBV"):
            v.initial_setting = f(v.initial_setting, "pressure")
        elif v.kind == "FCV":
            v.initial_setting = f(v.initial_setting, "flow")
    axes = {
        "head": ("flow", "length"),
        "efficiency": ("flow", None),
        "volume": ("length", "volume"),
        "headloss": ("flow", "length"),
    }
    for cid, role in curve_roles(m).items():
        kx, ky = axes[role]
        m.curves[cid] = [(f(x, kx) if kx else x, f(y, ky) if ky else y) for x, y in m.curves[cid]]
    m.coordinates = dict(m.coordinates)
    m.si = not inverse
    return m
