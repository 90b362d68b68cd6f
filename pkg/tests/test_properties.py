"""Property-based checks of invariants that must hold for any input."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wdngen.adg import louvain_communities, minmax, modularity
from wdngen.hspo import project_bounds, ubiqr
from wdngen.hydraulics import RuleSet, simulate_batch
from wdngen.inp_io import convert_to_si, load_bundled, parse_inp, serialize_inp
from wdngen.profiler import profile_parameter
from wdngen.strategies import rescale

finite = st.floats(-1e6, 1e6, allow_nan=False)
TOY = convert_to_si(load_bundled("toy3"))


class TestNumericProperties:
    @given(arrays(float, st.integers(2, 60), elements=finite))
    def test_minmax_range(self, x):
        y = minmax(x)
        assert y.min() >= 0.0 and y.max() <= 1.0
        if np.ptp(x) > 1e-6 * max(1.0, np.abs(x).max()):
            assert y.min() == 0.0 and y.max() == 1.0

    @given(arrays(float, st.integers(1, 60), elements=finite))
    def test_profile_ordering(self, x):
        s = profile_parameter(x)
        tol = 1e-9 * max(1.0, np.abs(x).max())
        assert s.min <= s.q1 + tol and s.q1 <= s.q3 + tol and s.q3 <= s.max + tol
        assert s.min - tol <= s.mean <= s.max + tol and s.std >= 0

    @given(arrays(float, st.integers(1, 60), elements=finite))
    def test_ubiqr_above_q3(self, x):
        assert ubiqr(x) >= np.quantile(x, 0.75) - 1e-9 * max(1.0, np.abs(x).max())

    @given(arrays(float, (st.integers(1, 20).map(lambda n: (n, 2))), elements=st.floats(-3, 3)))
    def test_project_bounds_valid(self, x):
        y = project_bounds(x.copy())
        assert np.all((0 <= y) & (y <= 1)) and np.all(y[:, 0] <= y[:, 1])

    @given(arrays(float, st.integers(1, 30), elements=finite), st.floats(0, 100), st.floats(0, 100))
    def test_rescale_within(self, v, a, b):
        lo, hi = min(a, b), max(a, b)
        out = rescale(v, lo, hi)
        assert np.all((out >= lo) & (out <= hi))


class TestGraphProperties:
    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 11), st.integers(0, 11)), min_size=1, max_size=30), st.integers(0, 100))
    def test_louvain_not_worse_than_singletons(self, pairs, seed):
        edges = [(u, v, 1.0) for u, v in pairs if u != v]
        if not edges:
            return
        nodes = list(range(12))
        part = louvain_communities(nodes, edges, rng=np.random.default_rng(seed))
        singletons = {n: n for n in nodes}
        assert modularity(nodes, edges, part) >= modularity(nodes, edges, singletons) - 1e-12


class TestRoundTripProperties:
    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(0.0, 1e4, allow_nan=False), min_size=3, max_size=3),
           st.lists(st.floats(1e-3, 50.0), min_size=3, max_size=3))
    def test_junction_values_survive(self, elevs, demands):
        m = load_bundled("toy3")
        for j, e, d in zip(m.junctions, elevs, demands):
            j.elevation, j.base_demand = e, d
        back = parse_inp(serialize_inp(m))
        for a, b in zip(m.junctions, back.junctions):
            assert b.elevation == a.elevation and b.base_demand == a.base_demand


class TestSolverProperties:
    @settings(max_examples=25, deadline=None)
    @given(arrays(float, (4, 3), elements=st.floats(0.0, 3.0)))
    def test_mass_balance_any_demand(self, mult):
        base = np.array([j.base_demand for j in TOY.junctions])
        r = simulate_batch(TOY, [{"junction_demand": mult * base}], rules=RuleSet())[0]
        assert r.converged.all()
        q = r.outputs["flowrate"]
        for i, j in enumerate(TOY.junctions):
            inflow = sum(q[:, k] for k, l in enumerate(TOY.links) if l.end == j.name)
            outflow = sum(q[:, k] for k, l in enumerate(TOY.links) if l.start == j.name)
            np.testing.assert_allclose(inflow - outflow, mult[:, i] * base[i], atol=1e-9)

    @settings(max_examples=15, deadline=None)
    @given(st.floats(0.0, 2.0))
    def test_more_demand_less_pressure(self, k):
        base = np.array([j.base_demand for j in TOY.junctions])
        lo = simulate_batch(TOY, [{"junction_demand": np.tile(k * base, (4, 1))}], rules=RuleSet())[0]
        hi = simulate_batch(TOY, [{"junction_demand": np.tile((k + 0.5) * base, (4, 1))}], rules=RuleSet())[0]
        assert np.all(hi.outputs["pressure"][:, :3] <= lo.outputs["pressure"][:, :3] + 1e-9)
