"""Dataset generation: sample, simulate, validate, write tables and metadata.

Layout of a finished dataset::

    <network>_<capacity>GB_<24H|1Y>/
        metadata.md                              YAML front matter + summary
        <component>_<parameter>_<index>_<type>_<io>.parquet

Candidate scenario ``i`` is sampled from ``default_rng(master_seed ^ i)``.
Candidates are processed in blocks of ``gen_batch_size``; after each block
the accepted scenarios are written to a chunk file and the progress
checkpoint is replaced atomically, so an interrupted run resumes at the
last checkpoint and produces the same dataset.
"""

from __future__ import annotations

import json
import logging
import math
import os
import re
import shutil
from collections import Counter, deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import pyarrow as pa
import pyarrow.csv as pacsv
import pyarrow.parquet as pq
import yaml

from .adg import ADGConfig
from .hydraulics import NODE_OUTPUTS, OUTPUTS, ScenarioResult, default_rules, simulate_batch
from .inp_io import NetworkModel, convert_to_si, read_inp, write_inp
from .parameters import CATALOGUE, CURVE, PATTERN, apply_inputs, components_of
from .strategies import SamplingConfig, ScenarioSampler, default_blueprint

log = logging.getLogger(__name__)

TYPES = ("curve", "static", "dynamic")
IOS = ("input", "output")
DURATION_TOKENS = {24.0: "24H", 8760.0: "1Y"}
CHECKPOINT = "checkpoint.json"
METADATA = "metadata.md"

TABLE3_KEYS = (
    "adj_list", "backup_times", "batch_size", "duration", "extreme_dem_rate", "fcv_tune",
    "fractional_cpu_usage", "gen_batch_size", "gpv_tune", "head_pump_tune", "index_tracers", "inp_paths",
    "junction_tune", "max_extreme_dem_junctions", "mem_per_worker", "noise_range", "num_cpus", "num_samples",
    "odims", "okeys", "onames", "output_path", "p_commercial", "pbv_tune", "pipe_tune", "power_pump_tune",
    "pressure_range", "profile_commercial", "profile_extreme", "profile_household", "prv_tune", "psv_tune",
    "ray_temp_path", "reservoir_tune", "save_success_inp", "sim_outputs", "skip_names",
    "summer_amplitude_range", "summer_rolling_rate", "summer_start", "tank_tune", "tcv_tune", "temp_path",
    "time_consistency", "time_step", "verbose", "yearly_pattern_num_harmonics", "yield_worker_generator",
    "zero_dem_rate",
)
TUNE_KEYS = tuple(k for k in TABLE3_KEYS if k.endswith("_tune"))
ADG_KEYS = tuple(f.name for f in fields(ADGConfig) if f.name not in ("duration", "time_step"))


class ConfigError(ValueError):
    pass


class QuotaUnreachable(RuntimeError):
    def __init__(self, rate: float, rule: str | None):
        super().__init__(f"acceptance rate {rate:.4f} below floor; dominant failing rule: {rule}")
        self.rate = rate
        self.rule = rule


class Interrupted(RuntimeError):
    """Raised when a run is stopped early on purpose (``stop_after_blocks``)."""


class LayoutError(ValueError):
    pass


@dataclass
class RunConfig:
    inp_paths: list[str] = field(default_factory=list)
    num_samples: int = 10
    duration: float = 24.0
    time_step: float = 1.0
    batch_size: int = 50
    gen_batch_size: int = 100
    num_cpus: int = 1
    fractional_cpu_usage: float = 1.0
    mem_per_worker: float = 1.0
    backup_times: int = 1  # checkpoint every this many blocks
    index_tracers: list[int] = field(default_factory=list)
    output_path: str = "datasets"
    temp_path: str = ".wdngen_tmp"
    ray_temp_path: str = ""
    verbose: bool = False
    sim_outputs: list[str] = field(default_factory=lambda: list(OUTPUTS))
    skip_names: list[str] = field(default_factory=list)
    pressure_range: tuple[float, float] = (0.0, 151.0)
    time_consistency: bool = True
    save_success_inp: bool = False
    yield_worker_generator: bool = True
    seed: int = 0
    shard_rows: int = 1_000_000
    table_format: str = "parquet"
    min_acceptance: float = 0.01
    acceptance_window: int = 1000
    adg: ADGConfig = field(default_factory=ADGConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)

    def validate(self) -> None:
        if self.num_samples < 1:
            raise ConfigError("num_samples must be >= 1")
        if self.batch_size < 1 or self.gen_batch_size < 1 or self.backup_times < 1:
            raise ConfigError("batch sizes and backup_times must be >= 1")
        bad = set(self.sim_outputs) - set(OUTPUTS)
        if bad:
            raise ConfigError(f"unknown sim_outputs: {sorted(bad)}")
        if self.table_format not in ("parquet", "csv"):
            raise ConfigError(f"table_format must be parquet or csv, not {self.table_format!r}")
        steps = self.duration / self.time_step
        if self.duration <= 0 or self.time_step <= 0 or abs(steps - round(steps)) > 1e-9:
            raise ConfigError("duration must be a positive multiple of time_step")

    @property
    def num_steps(self) -> int:
        return int(round(self.duration / self.time_step))

    def adg_config(self) -> ADGConfig:
        return ADGConfig(**{**asdict(self.adg), "duration": self.duration, "time_step": self.time_step})

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name in ("adg", "sampling"):
                continue
            out[f.name] = _plain(getattr(self, f.name))
        out.update({k: _plain(getattr(self.adg, k)) for k in ADG_KEYS})
        tune = self.sampling.to_tune_dict()
        out.update({k: tune.get(k, {}) for k in TUNE_KEYS})
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        names = {f.name for f in fields(cls)} - {"adg", "sampling"}
        adg_kwargs = {k: _tuple_if_list(data.pop(k)) for k in list(data) if k in ADG_KEYS}
        tune = {k: data.pop(k) for k in list(data) if k.endswith("_tune")}
        kwargs = {k: data[k] for k in data if k in names}
        if "pressure_range" in kwargs:
            kwargs["pressure_range"] = tuple(kwargs["pressure_range"])
        run = cls(**kwargs)
        run.adg = ADGConfig(**{**adg_kwargs, "duration": run.duration, "time_step": run.time_step})
        run.sampling = SamplingConfig.from_tune_dict(tune)
        return run

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    @classmethod
    def from_yaml(cls, text: str) -> "RunConfig":
        return cls.from_dict(yaml.safe_load(text) or {})

    @classmethod
    def read_yaml(cls, path: str | Path) -> "RunConfig":
        return cls.from_yaml(Path(path).read_text())


def _plain(v):
    """YAML-safe plain Python value."""
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


def _tuple_if_list(v):
    return tuple(v) if isinstance(v, list) else v


# --------------------------------------------------------------------------- naming


_NAME_RE = re.compile(r"^(?P<stem>[a-z0-9_]+?)_(?P<index>\d+)_(?P<type>curve|static|dynamic)_(?P<io>input|output)$")
_COMPONENT_TOKENS = sorted({s.component for s in CATALOGUE.values()} | {"node", "link"}, key=len, reverse=True)


@dataclass(frozen=True)
class TableName:
    component: str
    parameter: str
    index: int
    type: str
    io: str

    def __str__(self) -> str:
        return f"{self.component}_{self.parameter}_{self.index}_{self.type}_{self.io}"

    @classmethod
    def parse(cls, stem: str) -> "TableName":
        """Split a file stem; the trailing three tokens are read from the right."""
        m = _NAME_RE.match(stem)
        if not m:
            raise LayoutError(f"{stem}: does not match <component>_<parameter>_<index>_<type>_<io>")
        head = m["stem"]
        for comp in _COMPONENT_TOKENS:
            if head.startswith(comp + "_"):
                return cls(comp, head[len(comp) + 1:], int(m["index"]), m["type"], m["io"])
        raise LayoutError(f"{stem}: unknown component")


@dataclass
class DatasetLayout:
    network: str
    duration: float
    root: Path | None = None
    table_format: str = "parquet"

    @property
    def duration_token(self) -> str:
        return DURATION_TOKENS.get(float(self.duration), f"{int(round(self.duration))}H")

    def folder_name(self, size_bytes: int) -> str:
        return f"{self.network}_{capacity_gb(size_bytes)}GB_{self.duration_token}"

    @property
    def suffix(self) -> str:
        return ".parquet" if self.table_format == "parquet" else ".csv"


def capacity_gb(size_bytes: int) -> int:
    """On-disk size in whole GB, rounded up, at least 1."""
    return max(1, math.ceil(size_bytes / 1e9))


def type_token(pid: str) -> str:
    kind = CATALOGUE[pid].kind
    return {PATTERN: "dynamic", CURVE: "curve"}.get(kind, "static")


# --------------------------------------------------------------------------- tables


@dataclass
class TableBlock:
    """Rows of one table contributed by a group of scenarios."""

    name: str  # <component>_<parameter>_<type>_<io> without the shard index
    columns: list[str]
    index: dict[str, np.ndarray]
    values: np.ndarray  # (rows, len(columns))


def _input_block(pid: str, values: list, names: list[str], scen: list[int]) -> tuple[str, dict, np.ndarray]:
    kind = CATALOGUE[pid].kind
    if kind == PATTERN:
        T = np.shape(values[0])[0]
        arr = np.concatenate([np.asarray(v, dtype=float) for v in values], axis=0)
        idx = {"scenario": np.repeat(scen, T), "step": np.tile(np.arange(T), len(scen))}
        return "dynamic", idx, arr
    if kind == CURVE:
        P = max((np.size(c) for v in values for c in v), default=0)
        arr = np.full((len(values) * P, len(names)), np.nan)
        for s, v in enumerate(values):
            for j, c in enumerate(v):
                arr[s * P:s * P + np.size(c), j] = c
        idx = {"scenario": np.repeat(scen, P), "point": np.tile(np.arange(P), len(scen))}
        return "curve", idx, arr
    arr = np.vstack([np.asarray(v, dtype=float).reshape(1, -1) for v in values])
    return "static", {"scenario": np.asarray(scen)}, arr


def scenario_blocks(model: NetworkModel, results: list[ScenarioResult], indices: list[int],
                    sim_outputs=OUTPUTS, skip_names=()) -> list[TableBlock]:
    """Table rows for a group of accepted scenarios (same network)."""
    if not results:
        return []
    skip = set(skip_names)
    blocks = []
    for pid in results[0].inputs:
        spec = CATALOGUE[pid]
        names = [c.name for c in components_of(model, spec.component)]
        typ, idx, arr = _input_block(pid, [r.inputs[pid] for r in results], names, indices)
        keep = [j for j, n in enumerate(names) if n not in skip]
        blocks.append(TableBlock(f"{spec.component}_{spec.name}_{typ}_input", [names[j] for j in keep], idx, arr[:, keep]))
    T = results[0].num_steps
    idx = {"scenario": np.repeat(indices, T), "step": np.tile(np.arange(T), len(results))}
    for out in sim_outputs:
        node = out in NODE_OUTPUTS
        names = results[0].node_names if node else results[0].link_names
        keep = [j for j, n in enumerate(names) if n not in skip]
        arr = np.concatenate([r.outputs[out][:, keep] for r in results], axis=0)
        blocks.append(TableBlock(f"{'node' if node else 'link'}_{out}_dynamic_output", [names[j] for j in keep], idx, arr))
    return blocks


def _to_arrow(block: TableBlock) -> pa.Table:
    cols = {k: pa.array(np.asarray(v, dtype=np.int64)) for k, v in block.index.items()}
    for j, name in enumerate(block.columns):
        cols[name] = pa.array(np.ascontiguousarray(block.values[:, j]), type=pa.float64())
    return pa.table(cols)


def _write(table: pa.Table, path: Path, fmt: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    if fmt == "parquet":
        pq.write_table(table, tmp)
    else:
        pacsv.write_csv(table, tmp)
    os.replace(tmp, path)


def read_table(path: str | Path) -> pa.Table:
    path = Path(path)
    if path.suffix == ".csv":
        return pacsv.read_csv(path)
    return pq.read_table(path)


def table_values(table: pa.Table, index_cols=("scenario", "step", "point")) -> tuple[list[str], np.ndarray]:
    names = [c for c in table.column_names if c not in index_cols]
    if not names:
        return names, np.empty((table.num_rows, 0))
    return names, np.column_stack([table.column(c).to_numpy() for c in names])


def write_tables(results: list[ScenarioResult], layout: DatasetLayout, model: NetworkModel,
                 indices: list[int] | None = None, sim_outputs=OUTPUTS, skip_names=(),
                 shard_rows: int = 1_000_000) -> list[Path]:
    """Write one table per (component, parameter, type, io) into ``layout.root``.

    Tables are split into shards of at most *shard_rows* rows.
    """
    indices = list(range(len(results))) if indices is None else indices
    blocks = scenario_blocks(model, results, indices, sim_outputs, skip_names)
    root = Path(layout.root)
    root.mkdir(parents=True, exist_ok=True)
    written = []
    for b in blocks:
        written += _write_sharded([_to_arrow(b)], b.name, root, layout, shard_rows)
    return written


def _write_sharded(tables, base: str, root: Path, layout: DatasetLayout, shard_rows: int) -> list[Path]:
    """Stream *tables* into shards ``<base>`` with the shard index inserted."""
    comp_param, typ, io = base.rsplit("_", 2)
    out, shard, buf, rows = [], 0, [], 0

    def flush():
        nonlocal shard, buf, rows
        if not buf:
            return
        path = root / f"{comp_param}_{shard}_{typ}_{io}{layout.suffix}"
        _write(pa.concat_tables(buf), path, layout.table_format)
        out.append(path)
        shard, buf, rows = shard + 1, [], 0

    for t in tables:
        start = 0
        while start < t.num_rows:
            take = min(shard_rows - rows, t.num_rows - start)
            buf.append(t.slice(start, take))
            rows += take
            start += take
            if rows >= shard_rows:
                flush()
    flush()
    return out


# --------------------------------------------------------------------------- metadata


def adjacency_list(model: NetworkModel) -> list[tuple[str, str, str]]:
    """``(source node, link, destination node)`` for every link."""
    return [(k.start, k.name, k.end) for k in model.links]


def metadata_dict(run: RunConfig, model: NetworkModel, index_tracers: list[int] | None = None) -> dict:
    meta = run.to_dict()
    meta["adj_list"] = [list(t) for t in adjacency_list(model)]
    if index_tracers is not None:
        meta["index_tracers"] = list(index_tracers)
    okeys, onames, odims = {}, {}, {}
    for pid in run.sampling.entries:
        spec = CATALOGUE[pid]
        comps = components_of(model, spec.component)
        if not comps:
            continue
        okeys.setdefault(spec.component, []).append(spec.name)
        onames[spec.component] = [c.name for c in comps if c.name not in run.skip_names]
        odims[pid] = run.num_steps if spec.kind == PATTERN else 1
        if spec.kind == CURVE:
            attr = "efficiency_curve" if spec.name.startswith("efficiency") else "head_curve"
            odims[pid] = max((len(model.curves.get(getattr(c, attr)) or []) for c in comps), default=0)
    for out in run.sim_outputs:
        comp = "node" if out in NODE_OUTPUTS else "link"
        okeys.setdefault(comp, []).append(out)
        names = model.node_names if comp == "node" else model.link_names
        onames[comp] = [n for n in names if n not in run.skip_names]
        odims[f"{comp}_{out}"] = run.num_steps
    meta["okeys"], meta["onames"], meta["odims"] = okeys, onames, odims
    meta["network"] = model.name
    missing = set(TABLE3_KEYS) - set(meta)
    assert not missing, missing
    return meta


def format_metadata(meta: dict) -> str:
    front = yaml.safe_dump(_plain(meta), sort_keys=True)
    body = [
        f"# {meta.get('network', 'network')} scenarios",
        "",
        f"- scenarios: {meta['num_samples']}",
        f"- duration: {meta['duration']} h at {meta['time_step']} h steps",
        f"- outputs: {', '.join(meta['sim_outputs'])}",
        f"- links: {len(meta['adj_list'])}",
        "",
    ]
    return f"---\n{front}---\n\n" + "\n".join(body)


def parse_metadata(text: str) -> dict:
    if not text.startswith("---\n"):
        raise LayoutError("metadata document lacks YAML front matter")
    end = text.index("\n---\n", 4)
    return yaml.safe_load(text[4:end + 1])


def write_metadata(run: RunConfig, model: NetworkModel, root: str | Path, index_tracers=None) -> Path:
    path = Path(root) / METADATA
    path.write_text(format_metadata(metadata_dict(run, model, index_tracers)))
    return path


def read_metadata(root: str | Path) -> dict:
    return parse_metadata((Path(root) / METADATA).read_text())


# --------------------------------------------------------------------------- generation


def candidate_seed(master_seed: int, index: int) -> int:
    return int(master_seed) ^ int(index)


def _simulate_chunk(args):
    model, inputs, num_steps, pressure_range, skip_names, time_consistency = args
    rules = default_rules(pressure_range, skip_names, time_consistency)
    return simulate_batch(model, inputs, num_steps=num_steps, rules=rules)


def _atomic_json(path: Path, data: dict) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(data))
    os.replace(tmp, path)


def load_model(run: RunConfig, model: NetworkModel | None = None) -> NetworkModel:
    if model is None:
        if not run.inp_paths:
            raise ConfigError("no network given (inp_paths is empty)")
        model = read_inp(run.inp_paths[0])
    return convert_to_si(model)


def generate_dataset(run: RunConfig, model: NetworkModel | None = None, sampling: SamplingConfig | None = None,
                     stop_after_blocks: int | None = None, work_dir: str | Path | None = None) -> Path:
    """Generate ``run.num_samples`` valid scenarios and return the dataset folder.

    Resumes from the checkpoint in *work_dir* (default: under
    ``run.temp_path``) when one exists.  ``stop_after_blocks`` raises
    :class:`Interrupted` after that many blocks, emulating a killed run.
    """
    run.validate()
    model = load_model(run, model)
    if sampling is not None:
        run.sampling = sampling
    if not run.sampling.entries:
        run.sampling = default_blueprint(model)
    layout = DatasetLayout(model.name, run.duration, table_format=run.table_format)
    work = Path(work_dir) if work_dir else Path(run.temp_path) / f"{model.name}_{layout.duration_token}_{run.seed}"
    chunks = work / "chunks"
    chunks.mkdir(parents=True, exist_ok=True)
    ckpt_path = work / CHECKPOINT
    state = {"next_candidate": 0, "block": 0, "accepted": [], "chunk_files": [], "failures": {}, "window": []}
    if ckpt_path.exists():
        state = json.loads(ckpt_path.read_text())
        log.info("resuming at candidate %d with %d accepted", state["next_candidate"], len(state["accepted"]))

    sampler = ScenarioSampler(model, run.sampling, adg=run.adg_config(), num_steps=run.num_steps)
    failures = Counter(state["failures"])
    window = deque(state["window"], maxlen=run.acceptance_window)
    blocks_done = 0
    pool = ProcessPoolExecutor(run.num_cpus) if run.num_cpus > 1 else None
    try:
        while len(state["accepted"]) < run.num_samples:
            start = state["next_candidate"]
            cand = list(range(start, start + run.gen_batch_size))
            inputs = [sampler.sample(np.random.default_rng(candidate_seed(run.seed, i))) for i in cand]
            jobs = [
                (model, inputs[k:k + run.batch_size], run.num_steps, run.pressure_range, tuple(run.skip_names),
                 run.time_consistency)
                for k in range(0, len(inputs), run.batch_size)
            ]
            mapped = pool.map(_simulate_chunk, jobs) if pool else map(_simulate_chunk, jobs)
            results = [r for chunk in mapped for r in chunk]
            accepted, acc_idx = [], []
            for i, r in zip(cand, results):
                window.append(bool(r.valid))
                if r.valid and len(state["accepted"]) + len(accepted) < run.num_samples:
                    accepted.append(r)
                    acc_idx.append(i)
                elif not r.valid:
                    failures[r.failure_reason] += 1
            if accepted:
                first = len(state["accepted"])
                order = list(range(first, first + len(accepted)))
                blocks = scenario_blocks(model, accepted, order, run.sim_outputs, run.skip_names)
                name = f"block{state['block']:06d}"
                bdir = chunks / name
                bdir.mkdir(exist_ok=True)
                for b in blocks:
                    _write(_to_arrow(b), bdir / f"{b.name}.parquet", "parquet")
                if run.save_success_inp:
                    for k, r in zip(order, accepted):
                        write_inp(apply_inputs(model, r.inputs), bdir / f"scenario_{k}.inp")
                state["chunk_files"].append(name)
            state["accepted"] += acc_idx
            state["next_candidate"] = start + len(cand)
            state["block"] += 1
            state["failures"] = dict(failures)
            state["window"] = list(window)
            blocks_done += 1
            if state["block"] % run.backup_times == 0 or len(state["accepted"]) >= run.num_samples:
                _atomic_json(ckpt_path, state)
            if len(window) >= run.acceptance_window and np.mean(window) < run.min_acceptance:
                rule = failures.most_common(1)[0][0] if failures else None
                raise QuotaUnreachable(float(np.mean(window)), rule)
            if stop_after_blocks is not None and blocks_done >= stop_after_blocks:
                raise Interrupted(f"stopped after {blocks_done} blocks")
    finally:
        if pool:
            pool.shutdown()
    return _finalize(run, model, layout, work, state)


def _finalize(run: RunConfig, model: NetworkModel, layout: DatasetLayout, work: Path, state: dict) -> Path:
    out_root = Path(run.output_path)
    staging = out_root / f".{model.name}_{layout.duration_token}.staging"
    if staging.exists():
        shutil.rmtree(staging)
    staging.mkdir(parents=True)
    chunk_dirs = [work / "chunks" / c for c in state["chunk_files"]]
    names = sorted({p.stem for d in chunk_dirs for p in d.glob("*.parquet")})
    for base in names:
        tables = (pq.read_table(d / f"{base}.parquet") for d in chunk_dirs if (d / f"{base}.parquet").exists())
        _write_sharded(tables, base, staging, layout, run.shard_rows)
    if run.save_success_inp:
        (staging / "inp").mkdir()
        for d in chunk_dirs:
            for f in d.glob("*.inp"):
                shutil.copy(f, staging / "inp" / f.name)
    write_metadata(run, model, staging, state["accepted"])
    size = sum(f.stat().st_size for f in staging.rglob("*") if f.is_file())
    final = out_root / layout.folder_name(size)
    if final.exists():
        shutil.rmtree(final)
    os.replace(staging, final)
    shutil.rmtree(work, ignore_errors=True)
    return final


# --------------------------------------------------------------------------- checks


def validate_dataset(root: str | Path) -> list[str]:
    """Problems found in a written dataset (empty when it conforms)."""
    root = Path(root)
    problems = []
    try:
        meta = read_metadata(root)
    except (OSError, LayoutError, yaml.YAMLError) as exc:
        return [f"{METADATA}: {exc}"]
    missing = [k for k in TABLE3_KEYS if k not in meta]
    if missing:
        problems.append(f"{METADATA}: missing keys {missing}")
    n, T = int(meta["num_samples"]), int(round(meta["duration"] / meta["time_step"]))
    token = root.name.rsplit("_", 1)[-1]
    if token not in ("24H", "1Y") and not re.fullmatch(r"\d+H", token):
        problems.append(f"{root.name}: bad duration token")
    odims = meta.get("odims", {})
    rows_by_table: dict[str, int] = {}
    for path in sorted(p for p in root.iterdir() if p.suffix in (".parquet", ".csv")):
        try:
            name = TableName.parse(path.stem)
        except LayoutError as exc:
            problems.append(str(exc))
            continue
        try:
            table = read_table(path)
        except Exception as exc:  # noqa: BLE001 - any read failure means a corrupt shard
            problems.append(f"{path.name}: unreadable ({type(exc).__name__})")
            continue
        key = f"{name.component}_{name.parameter}_{name.type}_{name.io}"
        rows_by_table[key] = rows_by_table.get(key, 0) + table.num_rows
        cols, values = table_values(table)
        skip = set(meta.get("skip_names") or [])
        if skip & set(cols):
            problems.append(f"{path.name}: contains skipped columns")
        if name.component == "node" and name.parameter == "pressure":
            junctions = set(meta["onames"].get("junction", []))
            jcols = [j for j, c in enumerate(cols) if c in junctions]
            lo, hi = meta["pressure_range"]
            p = values[:, jcols]
            if p.size and not np.all((p > lo) & (p <= hi)):
                problems.append(f"{path.name}: pressure outside ({lo}, {hi}]")
    for key, rows in rows_by_table.items():
        typ = key.rsplit("_", 2)[1]
        pid = key.rsplit("_", 2)[0]
        expect = n if typ == "static" else n * (T if typ == "dynamic" else int(odims.get(pid, 0)))
        if rows != expect:
            problems.append(f"{key}: {rows} rows, expected {expect}")
    return problems
