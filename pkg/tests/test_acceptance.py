"""Acceptance suite: one PASS/FAIL line per criterion, printed in the
terminal summary of ``pytest``."""

import math
import shutil
import statistics
import time

import numpy as np
import pyarrow.parquet as pq
import pytest

from conftest import BUNDLED, DATA
from wdngen.adg import ADGConfig, ProfileKind, generate_demand_scenario, network_communities
from wdngen.hspo import SwarmConfig, fitness_from_parts, f_range, hspo_run, pso_optimize_parameter, success_rate, ubiqr
from wdngen.hydraulics import default_rules, headloss, simulate_batch, solve_steady_state, validate_scenario
from wdngen.inp_io import Pipe, convert_to_si, load_bundled, parse_inp, read_inp, serialize_inp
from wdngen.pipeline import TABLE3_KEYS, Interrupted, RunConfig, TableName, generate_dataset, read_metadata, read_table, table_values
from wdngen.plots import load_output, offdiag_mean, scenario_correlation
from wdngen.profiler import quantile
from wdngen.strategies import SamplingConfig, SamplingEntry, ScenarioSampler, default_blueprint

from test_hydraulics import ref_solve
from test_inp_io import assert_models_equal


def hanoi_run(tmp_path, **kw):
    base = dict(inp_paths=["hanoi"], num_samples=10, gen_batch_size=6, batch_size=6,
                output_path=str(tmp_path / "out"), temp_path=str(tmp_path / "tmp"), seed=11)
    base.update(kw)
    return RunConfig(**base)


def test_c01_parser_corpus(report):
    t0 = time.perf_counter()
    m = load_bundled("hanoi")
    counts = (len(m.junctions), len(m.pipes), len(m.reservoirs))
    failures = []
    for name in BUNDLED:
        a = read_inp(DATA / f"{name}.inp")
        try:
            assert_models_equal(a, parse_inp(serialize_inp(a), name), rel=1e-9)
        except AssertionError as exc:
            failures.append(f"{name}: {exc}")
    dt = time.perf_counter() - t0
    ok = counts == (31, 34, 1) and not failures and dt < 1.0
    report(1, "parser corpus", ok, f"hanoi counts {counts}, round-trip failures {failures or 0} over {len(BUNDLED)} files, {dt:.3f}s")


def test_c02_solver_oracle(report):
    t0 = time.perf_counter()
    worst = 0.0
    checked = []
    for name in ("single_pipe", "y_net", "dw_loop", "toy3"):
        m = convert_to_si(load_bundled(name))
        assert len(m.nodes) <= 5
        q_ref, h_ref = ref_solve(m)
        st = solve_steady_state(m)
        for k, q in q_ref.items():
            worst = max(worst, abs(st.link_value("flowrate", k) - q) / max(abs(q), 1e-12))
        for k, h in h_ref.items():
            worst = max(worst, abs(st.node_value("head", k) - h) / abs(h))
        checked.append(name)
    # mass balance over every accepted snapshot of sampled Hanoi scenarios
    hanoi = convert_to_si(load_bundled("hanoi"))
    sampler = ScenarioSampler(hanoi, default_blueprint(hanoi))
    results = simulate_batch(hanoi, [sampler.sample(np.random.default_rng(i)) for i in range(30)], rules=default_rules())
    accepted = [r for r in results if r.valid]
    start = np.array([hanoi.node_names.index(k.start) for k in hanoi.links])
    end = np.array([hanoi.node_names.index(k.end) for k in hanoi.links])
    mass = 0.0
    for r in accepted:
        q = r.outputs["flowrate"]
        net = np.zeros((q.shape[0], len(hanoi.nodes)))
        np.add.at(net.T, end, q.T)
        np.add.at(net.T, start, -q.T)
        mass = max(mass, np.abs(net[:, r.junction_mask] - r.outputs["demand"][:, r.junction_mask]).max())
    dt = time.perf_counter() - t0
    ok = worst < 1e-6 and mass < 1e-6 and len(accepted) > 0 and dt < 10
    report(2, "solver oracle", ok, f"max rel err {worst:.2e} on {checked}; mass residual {mass:.2e} m3/s "
                                   f"over {len(accepted)} accepted scenarios; {dt:.2f}s")


def test_c03_hazen_williams(report):
    h, _ = headloss(0.1, Pipe("P", "a", "b", length=1000.0, diameter=0.3, roughness=130.0), "H-W")
    independent = 10.667 * 130.0**-1.852 * 0.3**-4.871 * 1000.0 * 0.1**1.852
    ok = abs(h - independent) / independent < 0.005 and abs(h - 6.43) / 6.43 < 0.005
    report(3, "Hazen-Williams spot check", ok, f"h={h:.6f} m, independent {independent:.6f}, reference 6.43")


def test_c04_fitness_arithmetic(report):
    f = fitness_from_parts(0.5, 1.2, 0.4, 0.5).f_pso
    r = f_range(0.12, 0.12)
    rates = [success_rate([True] * k + [False] * (100 - k)) == k / 100 for k in range(101)]
    ok = f == 0.4 and r == 0.0 and all(rates)
    report(4, "fitness arithmetic", ok, f"composite {f!r}, range(0.12,0.12) {r!r}, k/100 exact for {sum(rates)}/101 k")


def test_c05_pso_sanity(report):
    def surrogate(pos):
        return list(1.0 - (pos[:, 0] - 0.2) ** 2 - (pos[:, 1] - 0.8) ** 2)

    t0 = time.perf_counter()
    sw = SwarmConfig(swarm_size=20, max_iter=200, patience=0)
    hits = 0
    for seed in range(100):
        res = pso_optimize_parameter("pipe_length", None, sw, np.random.default_rng(seed), objective=surrogate,
                                     initial=(0.5, 0.5))
        hits += abs(res.lb - 0.2) <= 0.02 and abs(res.ub - 0.8) <= 0.02 and res.iterations <= 200
    dt = time.perf_counter() - t0
    report(5, "PSO sanity", hits >= 95 and dt < 30, f"{hits}/100 seeds within 0.02 of (0.2, 0.8), {dt:.1f}s")


@pytest.mark.slow
def test_c06_hspo_monotone(report):
    toy = convert_to_si(load_bundled("toy3"))
    blueprint = SamplingConfig({"junction_elevation": SamplingEntry("junction_elevation", "sampling", 0.3, 0.5)})
    # tolerance 0 keeps all five epochs running
    sw = SwarmConfig(swarm_size=10, max_iter=20, n_cases=100, tolerance=0.0)
    res = hspo_run(toy, blueprint, sw, 5, np.random.default_rng(0))
    seq = res.fitness_sequence
    start, final = res.history[0].f_success, res.fitness.f_success
    ok = bool(np.all(np.diff(seq) >= 0)) and start < 0.5 and final >= 0.9 and len(seq) == 6
    report(6, "HSPO monotonicity", ok, f"f_pso per epoch {[round(v, 4) for v in seq]}, f_success {start} -> {final}")


def _lag_peak_is_24(x):
    x = x - x.mean()
    den = (x * x).sum()
    if den == 0:
        return False
    ac = {k: (x[:-k] * x[k:]).sum() / den for k in range(2, 49)}
    return max(ac, key=ac.get) == 24


def test_c07_adg_structure(report, hanoi):
    low = ADGConfig(duration=168, noise_range=(0.01, 0.01))
    default = ADGConfig(duration=168)
    comm = network_communities(hanoi, default, np.random.default_rng(0))
    n = len(hanoi.junctions)
    norm_ok = comm_ok = extreme_ok = zero_ok = True
    periodic = total = 0
    for i in range(100):
        for cfg, count_lags in ((default, False), (low, True)):
            sc = generate_demand_scenario(hanoi, cfg, np.random.default_rng(i), comm)
            a = sc.assignment
            for k, name in enumerate(sc.junctions):
                col = sc.multipliers[:, k]
                kind = a[name].kind
                if kind != ProfileKind.ZERO and not (col.min() == 0.0 and col.max() == 1.0):
                    norm_ok = False
                if count_lags and kind in (ProfileKind.HOUSEHOLD, ProfileKind.COMMERCIAL):
                    total += 1
                    periodic += _lag_peak_is_24(col)
            comm_ok &= 0.25 <= a.p_commercial < 0.35 and a.num_commercial == math.floor(a.p_commercial * n)
            extreme_ok &= len(a.names_of(ProfileKind.EXTREME)) <= 2
            zero_ok &= len(a.names_of(ProfileKind.ZERO)) / n == math.floor(0.05 * n + 0.5) / n
    share = periodic / total
    ok = norm_ok and share >= 0.9 and comm_ok and extreme_ok and zero_ok
    report(7, "ADG structure", ok, f"(a) normalized {norm_ok}; (b) lag-24 peak {share:.3f} of {total} series; "
                                   f"(c) commercial {comm_ok}; (d) extreme {extreme_ok}; (e) zero share {zero_ok}")


def test_c08_diversity(report, tmp_path, hanoi):
    t0 = time.perf_counter()
    root = generate_dataset(hanoi_run(tmp_path, num_samples=100, gen_batch_size=120, batch_size=120),
                            model=load_bundled("hanoi"))
    _, values, scen = load_output(root, "demand")
    generated = offdiag_mean(scenario_correlation(values, scen))
    # within one scenario: junctions sharing a profile move together
    cfg = ADGConfig(duration=24)
    comm = network_communities(hanoi, cfg, np.random.default_rng(0))
    within, cross = [], []
    for i in range(100):
        sc = generate_demand_scenario(hanoi, cfg, np.random.default_rng(i), comm)
        kinds = [sc.assignment[n].kind for n in sc.junctions]
        with np.errstate(invalid="ignore", divide="ignore"):  # zero-demand columns are constant
            c = np.corrcoef(sc.multipliers.T)
        for a in range(len(kinds)):
            for b in range(a):
                if {kinds[a], kinds[b]} <= {ProfileKind.HOUSEHOLD, ProfileKind.COMMERCIAL}:
                    (within if kinds[a] == kinds[b] else cross).append(c[a, b])
    # baseline: one shared pattern scaled per node, tiny noise
    rng = np.random.default_rng(0)
    pattern = 1 + 0.5 * np.sin(np.arange(24) * 2 * np.pi / 24)
    base = np.array([j.base_demand for j in hanoi.junctions])
    reuse = [np.outer(pattern * (1 + rng.normal(0, 0.002, 24)), base) for _ in range(100)]
    flat = np.concatenate(reuse)
    reuse_mean = offdiag_mean(scenario_correlation(flat, np.repeat(np.arange(100), 24)))
    dt = time.perf_counter() - t0
    ok = generated < 0.9 and np.mean(within) > np.mean(cross) and reuse_mean > 0.99 and dt < 120
    report(8, "diversity", ok, f"generated off-diagonal mean {generated:.3f}; within/cross profile "
                               f"{np.mean(within):.3f}/{np.mean(cross):.3f}; reused-pattern baseline {reuse_mean:.4f}; {dt:.1f}s")


def test_c09_validation_gate(report, hanoi):
    rules = default_rules()
    outcomes = []
    for bad in (-2.0, 151.5):
        r = simulate_batch(hanoi, [{}], rules=rules)[0]
        was_valid = r.valid
        j = int(np.flatnonzero(r.junction_mask)[3])
        r.outputs["pressure"][5, j] = bad
        outcomes.append((was_valid, validate_scenario(r, rules), r.failure_reason))
    ok = all(v and not now and why == "PressureInRange" for v, now, why in outcomes)
    report(9, "validation gate", ok, f"(valid before, valid after, rule) = {outcomes}")


def test_c10_layout(report, tmp_path, hanoi):
    run = hanoi_run(tmp_path)
    root = generate_dataset(run, model=load_bundled("hanoi"))
    names = [p for p in root.iterdir() if p.suffix == ".parquet"]
    grammar = all(TableName.parse(p.stem) for p in names)
    dynamic = {p.name: read_table(p).num_rows for p in names if "_dynamic_" in p.name}
    static = {p.name: read_table(p).num_rows for p in names if "_static_" in p.name}
    meta = read_metadata(root)
    missing = [k for k in TABLE3_KEYS if k not in meta]
    # rebuild every accepted scenario from its candidate seed and compare bitwise
    sampler = ScenarioSampler(hanoi, run.sampling, adg=run.adg_config(), num_steps=24)
    redo = simulate_batch(hanoi, [sampler.sample(np.random.default_rng(run.seed ^ i)) for i in meta["index_tracers"]])
    bitwise = True
    for out in ("pressure", "head", "demand"):
        _, vals = table_values(read_table(root / f"node_{out}_0_dynamic_output.parquet"))
        bitwise &= np.array_equal(vals, np.concatenate([r.outputs[out] for r in redo]))
    _, diam = table_values(read_table(root / "pipe_diameter_0_static_input.parquet"))
    bitwise &= np.array_equal(diam, np.array([r.inputs["pipe_diameter"] for r in redo]))
    for p in names:
        t = pq.read_table(p)
        pq.write_table(t, tmp_path / "rt.parquet")
        bitwise &= pq.read_table(tmp_path / "rt.parquet").equals(t)
    ok = (root.name == "hanoi_1GB_24H" and grammar and set(dynamic.values()) == {240}
          and set(static.values()) == {10} and not missing and bitwise)
    report(10, "layout conformance", ok, f"{root.name}, {len(names)} tables, dynamic rows {set(dynamic.values())}, "
                                         f"static rows {set(static.values())}, missing keys {missing}, bitwise {bitwise}")


def test_c11_resume(report, tmp_path):
    model = load_bundled("hanoi")
    full = generate_dataset(hanoi_run(tmp_path), model=model)
    kept = tmp_path / "uninterrupted"
    shutil.move(str(full), kept)
    with pytest.raises(Interrupted):
        generate_dataset(hanoi_run(tmp_path), model=model, stop_after_blocks=1)
    ckpt = next((tmp_path / "tmp").glob("*/checkpoint.json"))
    import json

    done = len(json.loads(ckpt.read_text())["accepted"])
    resumed = generate_dataset(hanoi_run(tmp_path), model=model)
    same = [pq.read_table(resumed / p.name).equals(pq.read_table(p)) for p in kept.glob("*.parquet")]
    meta_same = (resumed / "metadata.md").read_text() == (kept / "metadata.md").read_text()
    ok = all(same) and meta_same and 0 < done < 10
    report(11, "resume determinism", ok, f"killed after {done}/10 accepted; {sum(same)}/{len(same)} tables "
                                         f"and metadata {'identical' if meta_same else 'different'}")


def test_c12_quantile_oracle(report):
    data = [1, 2, 3, 4]
    q1, _, q3 = statistics.quantiles(data, n=4, method="inclusive")
    ours = (float(quantile(data, 0.25)), float(quantile(data, 0.75)), ubiqr(data))
    ok = ours == (1.75, 3.25, 5.5) and ours[:2] == (q1, q3) and ours[2] == q3 + 1.5 * (q3 - q1)
    report(12, "quantile / UBIQR oracle", ok, f"q1 {ours[0]}, q3 {ours[1]}, UBIQR {ours[2]}; statistics module {q1}, {q3}")
