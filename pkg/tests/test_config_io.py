import json
import re
import struct
from pathlib import Path

import numpy as np
import pytest

pytest.importorskip("dotenv")

from yangfeldman_mcp.api.errors import ConfigError  # noqa: E402
from yangfeldman_mcp.api.graphs import adiabatic_beta  # noqa: E402
from yangfeldman_mcp.api.lattice import build_lattice  # noqa: E402
from yangfeldman_mcp.api.propagators import build_propagators  # noqa: E402
from yangfeldman_mcp.api.types import FieldType  # noqa: E402
from yangfeldman_mcp.utils.config_utils import load_config, parse_config, with_run  # noqa: E402
from yangfeldman_mcp.utils.io_utils import (  # noqa: E402
    dump_propagators,
    dumps_report,
    load_propagator_dump,
    table_rows,
    to_jsonable,
    write_csv,
    write_json,
)


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    monkeypatch.delenv("YF_BACKEND", raising=False)
    monkeypatch.delenv("YF_JOBS", raising=False)


def test_parse_config_converts_strings_and_fills_defaults():
    config = parse_config({"nt": "6", "lambda": "0.5", "P": "3"})
    assert config.lattice.nt == 6
    assert config.lattice.nx == 4
    assert config.theory.coupling == 0.5
    assert config.theory.p == 3
    assert config.run.backend == "float"


@pytest.mark.parametrize(
    "values",
    [{"colour": "red"}, {"p": "5"}, {"sigma_max": "4"}, {"backend": "quad"}, {"jobs": "0"}, {"nt": "six"},
     {"switching": "gauss"}, {"switching": "hann"}, {"instances": "0"}],
)
def test_parse_config_rejects_bad_values(values):
    with pytest.raises(ConfigError):
        parse_config(values)


def test_precedence_of_environment_file_and_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("YF_BACKEND", "exact")
    monkeypatch.setenv("YF_JOBS", "3")
    path = tmp_path / "run.cfg"
    path.write_text("# demo\nnt = 6\njobs = 2\nepsilon = 0.1\nh_profile = time_bump\nh_center = 1.25\nh_width = 0.5\n")
    config = load_config(path, {"nt": 10, "seed": None})
    assert config.run.backend == "exact"
    assert config.run.jobs == 2
    assert config.lattice.nt == 10
    assert config.lattice.h_profile == "time_bump"
    assert config.run.seed == 0


def test_readme_configuration_resolves_the_lightest_mode(tmp_path):
    readme = Path(__file__).resolve().parents[1] / "README.md"
    if not readme.exists():
        pytest.skip("README.md is not shipped")
    block = re.search(r"```\n(nt = .*?)```", readme.read_text(), re.S).group(1)
    path = tmp_path / "readme.cfg"
    path.write_text(block)
    config = load_config(path)
    assert config.lattice.mass * config.lattice.dx <= 0.5
    lattice = build_lattice(config.lattice)
    assert (lattice.nt, lattice.nx) == (24, 8)
    assert adiabatic_beta(lattice) > 10.0


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")


def test_with_run_validates():
    config = parse_config({})
    assert with_run(config, backend="exact").run.backend == "exact"
    assert with_run(config, backend=None) is config
    with pytest.raises(ConfigError):
        with_run(config, jobs=0)


def test_to_jsonable_handles_numpy_and_complex():
    value = {
        "z": 1 + 2j,
        "array": np.array([1.0 + 1j, 2.0]),
        "int": np.int64(3),
        "flag": np.bool_(True),
        "kind": FieldType.OUT,
        1: (np.float64(0.5),),
    }
    assert to_jsonable(value) == {
        "z": {"re": 1.0, "im": 2.0},
        "array": [[1.0, 1.0], [2.0, 0.0]],
        "int": 3,
        "flag": True,
        "kind": "out",
        "1": [0.5],
    }


def test_reports_serialize_deterministically(tmp_path):
    report = {"b": [1, 2], "a": {"y": 1.5, "x": 2j}}
    text = dumps_report(report)
    assert text == dumps_report(dict(reversed(list(report.items()))))
    assert text.index('"a"') < text.index('"b"')
    assert text.endswith("\n")
    path = tmp_path / "report.json"
    assert write_json(report, path) == path.read_text()
    assert write_json(report, None) == text


def test_csv_from_report_table(tmp_path):
    report = {"checks": [{"name": "glz", "pass": True, "extra": [1]}, {"name": "locality", "pass": False, "note": "x"}]}
    rows = table_rows(report)
    assert rows == [{"name": "glz", "pass": True}, {"name": "locality", "pass": False, "note": "x"}]
    path = tmp_path / "checks.csv"
    assert write_csv(rows, path) == 2
    lines = path.read_text().splitlines()
    assert lines[0] == "name,pass,note"
    assert lines[1] == "glz,True,"
    assert table_rows({"other": 1}) == []


def test_binary_propagator_dump(tmp_path, float_propagators):
    path = dump_propagators(float_propagators, tmp_path / "props.bin")
    raw = path.read_bytes()
    magic, nt, nx, code = struct.unpack_from("<4sIII", raw)
    assert (magic, nt, nx, code) == (b"YFPR", 6, 4, 2)
    n = nt * nx
    assert len(raw) == 16 + 3 * n * n * 16
    loaded = load_propagator_dump(path)
    assert np.array_equal(loaded["gr"].real, float_propagators.gr)
    assert np.array_equal(loaded["dplus"], float_propagators.dplus)


def test_real_dump_without_modes(tmp_path, tiny_lattice):
    props = build_propagators(tiny_lattice, "exact", with_modes=False)
    loaded = load_propagator_dump(dump_propagators(props, tmp_path / "props.bin"))
    assert loaded["code"] == 1
    assert set(loaded) == {"nt", "nx", "code", "gr", "d"}
    assert np.array_equal(loaded["d"], props.d_float())


def test_json_dump(tmp_path, float_propagators):
    path = dump_propagators(float_propagators, tmp_path / "props.json", fmt="json")
    data = json.loads(path.read_text())
    assert (data["nt"], data["nx"]) == (6, 4)
    assert np.asarray(data["dplus"]).shape == (24, 24, 2)


def test_dump_errors(tmp_path, float_propagators):
    with pytest.raises(ConfigError):
        dump_propagators(float_propagators, tmp_path / "props.x", fmt="hdf5")
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"NOPE" + bytes(12))
    with pytest.raises(ConfigError):
        load_propagator_dump(bad)
    short = tmp_path / "short.bin"
    short.write_bytes(struct.pack("<4sIII", b"YFPR", 2, 2, 1) + bytes(8))
    with pytest.raises(ConfigError):
        load_propagator_dump(short)
