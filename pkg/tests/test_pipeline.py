import re
import shutil

import pyarrow.parquet as pq
import pytest

from wdngen.cli import main
from wdngen.hydraulics import OUTPUTS
from wdngen.inp_io import load_bundled
from wdngen.pipeline import (
    TABLE3_KEYS,
    ConfigError,
    DatasetLayout,
    Interrupted,
    LayoutError,
    QuotaUnreachable,
    RunConfig,
    TableName,
    adjacency_list,
    capacity_gb,
    generate_dataset,
    read_metadata,
    read_table,
    table_values,
    validate_dataset,
)
from wdngen.strategies import SamplingConfig, SamplingEntry

NAME_RE = re.compile(r"^[a-z_]+_[a-z0-9_]+_\d+_(curve|static|dynamic)_(input|output)\.(parquet|csv)$")


def run_config(tmp_path, **kw):
    base = dict(inp_paths=["hanoi"], num_samples=10, gen_batch_size=6, batch_size=3,
                output_path=str(tmp_path / "out"), temp_path=str(tmp_path / "tmp"), seed=7)
    base.update(kw)
    return RunConfig(**base)


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("ds")
    return generate_dataset(run_config(tmp), model=load_bundled("hanoi"))


class TestNaming:
    def test_parse(self):
        n = TableName.parse("head_pump_pump_curve_y_0_curve_input")
        assert (n.component, n.parameter, n.index, n.type, n.io) == ("head_pump", "pump_curve_y", 0, "curve", "input")
        assert str(n) == "head_pump_pump_curve_y_0_curve_input"

    def test_parse_output(self):
        n = TableName.parse("link_friction_factor_3_dynamic_output")
        assert (n.component, n.parameter, n.index) == ("link", "friction_factor", 3)

    @pytest.mark.parametrize("bad", ["pipe_length_static_input", "pipe_length_0_static", "pump_x_0_static_input"])
    def test_bad_names(self, bad):
        with pytest.raises(LayoutError):
            TableName.parse(bad)

    def test_folder(self):
        assert DatasetLayout("hanoi", 24.0).folder_name(10) == "hanoi_1GB_24H"
        assert DatasetLayout("net", 8760.0).folder_name(int(2.5e9)) == "net_3GB_1Y"
        assert DatasetLayout("net", 48.0).duration_token == "48H"

    def test_capacity(self):
        assert capacity_gb(0) == 1 and capacity_gb(int(1e9)) == 1 and capacity_gb(int(1e9) + 1) == 2


class TestConfig:
    def test_yaml_round_trip(self, tmp_path):
        run = run_config(tmp_path, skip_names=["2"], pressure_range=(5.0, 100.0))
        run.sampling = SamplingConfig({"pipe_length": SamplingEntry("pipe_length", "sampling", 0.1, 0.2)})
        back = RunConfig.from_yaml(run.to_yaml())
        assert back.to_dict() == run.to_dict()
        assert back.pressure_range == (5.0, 100.0)

    @pytest.mark.parametrize("kw", [{"num_samples": 0}, {"sim_outputs": ["colour"]}, {"table_format": "xlsx"},
                                    {"duration": 10, "time_step": 3}])
    def test_invalid(self, tmp_path, kw):
        with pytest.raises(ConfigError):
            run_config(tmp_path, **kw).validate()


class TestGeneration:
    def test_layout(self, dataset):
        assert dataset.name == "hanoi_1GB_24H"
        files = sorted(p.name for p in dataset.iterdir() if p.suffix == ".parquet")
        assert files and all(NAME_RE.match(f) for f in files)
        assert {f"node_{o}_0_dynamic_output.parquet" for o in ("pressure", "demand", "head")} <= set(files)
        assert {f"link_{o}_0_dynamic_output.parquet" for o in ("flowrate", "velocity", "headloss", "friction_factor")} <= set(files)

    def test_row_counts(self, dataset):
        assert read_table(dataset / "node_pressure_0_dynamic_output.parquet").num_rows == 240
        assert read_table(dataset / "junction_demand_0_dynamic_input.parquet").num_rows == 240
        assert read_table(dataset / "pipe_diameter_0_static_input.parquet").num_rows == 10

    def test_validates(self, dataset):
        assert validate_dataset(dataset) == []

    def test_metadata(self, dataset):
        meta = read_metadata(dataset)
        assert set(TABLE3_KEYS) <= set(meta)
        assert len(meta["adj_list"]) == 34
        assert meta["onames"]["junction"][0] == "2"
        assert meta["num_samples"] == 10 and len(meta["index_tracers"]) == 10

    def test_adjacency_orientation(self):
        m = load_bundled("hanoi")
        start, link, end = adjacency_list(m)[0]
        assert (start, link, end) == (m.links[0].start, m.links[0].name, m.links[0].end)

    def test_pressures_respect_rule(self, dataset):
        cols, p = table_values(read_table(dataset / "node_pressure_0_dynamic_output.parquet"))
        junctions = set(read_metadata(dataset)["onames"]["junction"])
        jp = p[:, [i for i, c in enumerate(cols) if c in junctions]]
        assert jp.min() > 0 and jp.max() <= 151

    def test_parquet_round_trip_bitwise(self, dataset, tmp_path):
        src = dataset / "node_head_0_dynamic_output.parquet"
        t = pq.read_table(src)
        pq.write_table(t, tmp_path / "x.parquet")
        assert pq.read_table(tmp_path / "x.parquet").equals(t)

    def test_sharding(self, tmp_path):
        root = generate_dataset(run_config(tmp_path, num_samples=4, shard_rows=30), model=load_bundled("hanoi"))
        shards = sorted(root.glob("node_pressure_*_dynamic_output.parquet"))
        assert len(shards) == 4  # 96 rows in shards of 30
        assert sum(read_table(p).num_rows for p in shards) == 96
        assert validate_dataset(root) == []

    def test_csv_format(self, tmp_path):
        root = generate_dataset(run_config(tmp_path, num_samples=2, table_format="csv"), model=load_bundled("hanoi"))
        assert (root / "node_pressure_0_dynamic_output.csv").exists()
        assert validate_dataset(root) == []

    def test_skip_names_dropped(self, tmp_path):
        root = generate_dataset(run_config(tmp_path, num_samples=2, skip_names=["2"]), model=load_bundled("hanoi"))
        cols, _ = table_values(read_table(root / "node_pressure_0_dynamic_output.parquet"))
        assert "2" not in cols

    def test_sim_outputs_subset(self, tmp_path):
        root = generate_dataset(run_config(tmp_path, num_samples=2, sim_outputs=["pressure"]), model=load_bundled("hanoi"))
        outs = {p.name for p in root.glob("*_output.parquet")}
        assert outs == {"node_pressure_0_dynamic_output.parquet"}

    def test_quota_unreachable(self, tmp_path):
        run = run_config(tmp_path, pressure_range=(500.0, 600.0), acceptance_window=12, gen_batch_size=6)
        with pytest.raises(QuotaUnreachable) as err:
            generate_dataset(run, model=load_bundled("hanoi"))
        assert err.value.rule == "PressureInRange"

    def test_resume_bitwise(self, tmp_path):
        hanoi = load_bundled("hanoi")
        full = generate_dataset(run_config(tmp_path), model=hanoi)
        kept = tmp_path / "full"
        shutil.move(str(full), kept)
        run = run_config(tmp_path)
        with pytest.raises(Interrupted):
            generate_dataset(run, model=hanoi, stop_after_blocks=1)
        resumed = generate_dataset(run_config(tmp_path), model=hanoi)
        for p in kept.glob("*.parquet"):
            assert pq.read_table(resumed / p.name).equals(pq.read_table(p)), p.name
        assert (resumed / "metadata.md").read_text() == (kept / "metadata.md").read_text()

    def test_corrupt_shard_detected(self, dataset, tmp_path):
        copy = tmp_path / dataset.name
        shutil.copytree(dataset, copy)
        (copy / "node_head_0_dynamic_output.parquet").write_bytes(b"garbage")
        problems = validate_dataset(copy)
        assert any("node_head_0_dynamic_output" in p for p in problems)


class TestCLI:
    def test_profile(self, capsys):
        from conftest import DATA

        assert main(["profile", str(DATA / "hanoi.inp")]) == 0
        out = capsys.readouterr().out
        assert out.startswith("scope\tparameter\tstatistic\tvalue")
        assert "hanoi\tpipe_length\tmean\t" in out

    def test_generate_validate_plot(self, tmp_path, capsys):
        from conftest import DATA

        cfg = tmp_path / "run.yaml"
        cfg.write_text(RunConfig(inp_paths=[str(DATA / "hanoi.inp")], temp_path=str(tmp_path / "t"),
                                 gen_batch_size=10).to_yaml())
        assert main(["generate", "--config", str(cfg), "--n", "5", "--duration", "24h", "--out", str(tmp_path / "o")]) == 0
        root = capsys.readouterr().out.strip().split("=", 1)[1]
        assert main(["validate", root]) == 0
        assert main(["plot", root, "--what", "demand-corr", "--out", str(tmp_path / "c.png")]) == 0
        out = capsys.readouterr().out
        assert (tmp_path / "c.png").stat().st_size > 0 and "offdiag_mean=" in out

    def test_error_line(self, tmp_path, capsys):
        cfg = tmp_path / "run.yaml"
        cfg.write_text(RunConfig(inp_paths=["hanoi.inp"]).to_yaml())
        assert main(["generate", "--config", str(cfg), "--n", "0", "--out", str(tmp_path)]) == 1
        err = capsys.readouterr().err.strip()
        assert err.startswith("wdngen: error: ConfigError:") and "\n" not in err

    def test_validate_names_corrupt_file(self, dataset, tmp_path, capsys):
        copy = tmp_path / dataset.name
        shutil.copytree(dataset, copy)
        (copy / "pipe_diameter_0_static_input.parquet").write_bytes(b"\0")
        assert main(["validate", str(copy)]) == 1
        assert "pipe_diameter_0_static_input.parquet" in capsys.readouterr().err

    def test_outputs_constant(self):
        assert len(OUTPUTS) == 7
