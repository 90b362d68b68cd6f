import math

import numpy as np
import pytest

from conftest import BUNDLED, DATA
from wdngen.inp_io import (
    DanglingReference,
    DuplicateName,
    EncodingError,
    MalformedSection,
    UnsupportedUnit,
    convert_to_si,
    load_bundled,
    parse_inp,
    read_inp,
    serialize_inp,
)

GAL = 3.785411784e-3  # m3


def assert_models_equal(a, b, rel=1e-9):
    assert a.node_names == b.node_names
    assert a.link_names == b.link_names
    for x, y in zip(a.nodes + a.links, b.nodes + b.links):
        assert type(x) is type(y)
        for k, v in vars(x).items():
            w = getattr(y, k)
            if isinstance(v, float):
                assert w == pytest.approx(v, rel=rel, abs=1e-12), (x.name, k)
            else:
                assert v == w, (x.name, k)
    assert a.patterns.keys() == b.patterns.keys()
    for k in a.patterns:
        np.testing.assert_allclose(a.patterns[k], b.patterns[k], rtol=rel)
    assert a.curves.keys() == b.curves.keys()
    for k in a.curves:
        np.testing.assert_allclose(a.curves[k], b.curves[k], rtol=rel)
    assert a.times == b.times
    assert a.flow_unit == b.flow_unit
    assert a.headloss_formula == b.headloss_formula


class TestParse:
    def test_hanoi_counts(self):
        m = load_bundled("hanoi")
        assert (len(m.junctions), len(m.pipes), len(m.reservoirs), len(m.tanks), len(m.pumps)) == (31, 34, 1, 0, 0)

    def test_empty_sections(self):
        m = parse_inp("[JUNCTIONS]\n[END]\n")
        assert m.nodes == [] and m.links == [] and m.patterns == {}

    def test_comments_and_crlf(self):
        text = "[JUNCTIONS]\r\n J1  10  5 ; note\r\n[RESERVOIRS]\r\nR 50\r\n[PIPES]\r\nP R J1 100 200 100\r\n[END]\r\n"
        m = parse_inp(text)
        assert m.junctions[0].base_demand == 5.0
        assert m.pipes[0].initial_status == "Open"

    def test_skipped_and_flagged_sections(self):
        text = "[TITLE]\nhello\n[QUALITY]\nJ1 0.5\n[JUNCTIONS]\nJ1 1\n[RESERVOIRS]\nR 5\n[PIPES]\nP R J1 1 1 1\n[RULES]\nRULE 1\n[END]\n"
        m = parse_inp(text)
        assert m.skipped_sections == ["TITLE", "QUALITY", "RULES"]
        assert any("RULES" in w for w in m.warnings)

    def test_malformed_reports_line(self):
        with pytest.raises(MalformedSection) as err:
            parse_inp("[JUNCTIONS]\nJ1 abc\n")
        assert err.value.line_no == 2 and err.value.section == "JUNCTIONS"

    def test_dangling_node(self):
        with pytest.raises(DanglingReference):
            parse_inp("[JUNCTIONS]\nJ1 1\n[PIPES]\nP J1 NOPE 1 1 1\n")

    def test_dangling_pattern(self):
        with pytest.raises(DanglingReference):
            parse_inp("[JUNCTIONS]\nJ1 1 1 PX\n")

    def test_duplicate_name(self):
        with pytest.raises(DuplicateName):
            parse_inp("[JUNCTIONS]\nJ1 1\nJ1 2\n")

    def test_unsupported_valve_flagged(self):
        text = "[JUNCTIONS]\nA 0\nB 0\n[RESERVOIRS]\nR 10\n[PIPES]\nP R A 1 100 100\n[VALVES]\nV A B 100 PBV 5\n[END]\n"
        m = parse_inp(text)
        assert m.flags["V"] == ["unsupported-for-simulation"]

    def test_negative_demand_kept_and_flagged(self):
        m = parse_inp("[JUNCTIONS]\nJ1 0 -3\n")
        assert m.junctions[0].base_demand == -3.0
        assert "negative-demand" in m.flags["J1"]

    def test_demands_section_overrides(self):
        m = parse_inp("[JUNCTIONS]\nJ1 0 1\n[PATTERNS]\nA 1 2\n[DEMANDS]\nJ1 4 A\n")
        assert m.junctions[0].base_demand == 4.0 and m.junctions[0].demand_pattern == "A"

    def test_times_clock_format(self):
        m = parse_inp("[TIMES]\nDuration 168:00\nHydraulic Timestep 0:30\n")
        assert m.times.duration == 168.0 and m.times.time_step == 0.5
        assert m.times.num_steps == 336

    def test_non_utf8_rejected(self, tmp_path):
        p = tmp_path / "bad.inp"
        p.write_bytes(b"[JUNCTIONS]\nJ\xff 1\n")
        with pytest.raises(EncodingError):
            read_inp(p)


class TestRoundTrip:
    @pytest.mark.parametrize("name", BUNDLED)
    def test_bundled(self, name):
        m = read_inp(DATA / f"{name}.inp")
        assert_models_equal(m, parse_inp(serialize_inp(m), name))

    @pytest.mark.parametrize("name", BUNDLED)
    def test_bundled_si(self, name):
        m = convert_to_si(read_inp(DATA / f"{name}.inp"))
        back = convert_to_si(parse_inp(serialize_inp(m), name))
        assert_models_equal(m, back)

    def test_empty_model(self):
        text = serialize_inp(parse_inp(""))
        body = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("[")]
        # only option/time defaults may appear
        assert all(ln.split()[0] in ("Units", "Headloss", "Duration", "Hydraulic", "Pattern", "Demand") for ln in body)
        assert text.rstrip().endswith("[END]")

    def test_hanoi_reparse_count(self):
        assert len(parse_inp(serialize_inp(load_bundled("hanoi"))).junctions) == 31

    def test_pattern_24_values(self):
        vals = [float(v) for v in np.random.default_rng(0).uniform(0, 2, 24)]
        m = parse_inp("[PATTERNS]\n" + "\n".join(f"P {v!r}" for v in vals))
        back = parse_inp(serialize_inp(m))
        np.testing.assert_allclose(back.patterns["P"], vals, rtol=1e-9)

    def test_deterministic(self):
        m = load_bundled("pump_tank")
        assert serialize_inp(m) == serialize_inp(parse_inp(serialize_inp(m)))


class TestUnits:
    def test_gpm_demand(self):
        m = convert_to_si(parse_inp("[OPTIONS]\nUnits GPM\n[JUNCTIONS]\nJ 0 100\n"))
        assert m.junctions[0].base_demand == pytest.approx(100 * GAL / 60, rel=1e-12)
        assert m.junctions[0].base_demand == pytest.approx(0.0063090196, rel=1e-8)

    def test_inch_diameter(self):
        m = convert_to_si(parse_inp("[OPTIONS]\nUnits GPM\n[JUNCTIONS]\nA 0\n[RESERVOIRS]\nR 1\n[PIPES]\nP R A 1 12 100\n"))
        assert m.pipes[0].diameter == pytest.approx(0.3048, rel=1e-15)
        assert m.pipes[0].length == pytest.approx(0.3048, rel=1e-15)

    def test_lps_idempotent(self):
        m = convert_to_si(parse_inp("[OPTIONS]\nUnits LPS\n[JUNCTIONS]\nJ 0 5\n"))
        assert m.junctions[0].base_demand == pytest.approx(0.005)
        again = convert_to_si(m)
        assert again.junctions[0].base_demand == m.junctions[0].base_demand
        assert again.flow_unit == "LPS"

    @pytest.mark.parametrize("name", BUNDLED)
    def test_idempotent_corpus(self, name):
        once = convert_to_si(load_bundled(name))
        assert_models_equal(once, convert_to_si(once), rel=0)

    def test_dw_roughness_millifeet(self):
        m = convert_to_si(load_bundled("dw_loop"))
        assert m.pipes[0].roughness == pytest.approx(0.5 * 0.3048)

    def test_pump_curve_scaled(self):
        m = convert_to_si(load_bundled("pump_tank"))
        assert m.curves["C1"] == [pytest.approx((0.03, 60.0))]

    def test_unsupported_unit(self):
        with pytest.raises(UnsupportedUnit):
            convert_to_si(parse_inp("[OPTIONS]\nUnits FURLONGS\n"))

    def test_hanoi_diameters_metric(self):
        m = convert_to_si(load_bundled("hanoi"))
        assert max(p.diameter for p in m.pipes) == pytest.approx(40 * 0.0254)
        assert math.isclose(m.junctions[0].base_demand, 0.2472222, rel_tol=1e-12)
