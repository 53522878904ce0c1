import csv
import io
import json

import pytest

from decohist.cli import EXIT_FAIL, EXIT_PASS, EXIT_USAGE, run
from decohist.scenario import ScenarioError, bundled_names, load_scenario, parse_scenario

FIXTURES = ["alice_semantics", "interferometer_recombine", "repeated_N", "spin_vn", "twoslit"]


def cli(args, tmp_path):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(args) + ["--out", str(tmp_path)], stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def test_bundled_fixtures_present():
    assert bundled_names() == FIXTURES


@pytest.mark.parametrize("name", FIXTURES)
def test_every_fixture_validates(name, tmp_path):
    code, out, _ = cli(["validate", name], tmp_path)
    assert code == EXIT_PASS
    rep = json.loads(out)
    assert rep["passed"] and rep["schema_version"] == 1
    assert (tmp_path / "validate.json").read_text() == out


def test_spin_vn_loads_as_system_pointer_pair():
    sc = load_scenario("spin_vn.scenario")
    assert sc.dims == (2, 2) and sc.space.dim == 4


def test_consistency_spin_vn(tmp_path):
    code, out, _ = cli(["consistency", "spin_vn"], tmp_path)
    rep = json.loads(out)
    assert code == EXIT_PASS and rep["max_offdiagonal"] < 1e-12
    rows = list(csv.DictReader(open(tmp_path / "consistency.csv")))
    assert sorted(round(float(r["weight"]), 12) for r in rows) == [0.3, 0.7]


def test_consistency_fails_on_twoslit(tmp_path):
    assert cli(["consistency", "twoslit"], tmp_path)[0] == EXIT_FAIL


def test_stats_csv_argmax(tmp_path):
    code, out, _ = cli(["stats", "--c2", "0.7", "--N", "10", "--format", "csv"], tmp_path)
    assert code == EXIT_PASS
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 11
    assert max(rows, key=lambda r: float(r["x"]))["M"] == "7"
    assert json.loads((tmp_path / "stats.json").read_text())["argmax_M"] == 7


def test_sumrule_twoslit_fails_with_golden_discrepancy(tmp_path):
    code, out, err = cli(["sumrule", "twoslit"], tmp_path)
    rep = json.loads(out)
    assert code == EXIT_FAIL and "FAIL" in err
    assert rep["max_discrepancy"] == pytest.approx(rep["golden_max_discrepancy"], abs=1e-12)
    assert rep["max_discrepancy"] > 0.1


def test_sumrule_repeated_passes_all_groupings(tmp_path):
    code, out, _ = cli(["sumrule", "repeated_N"], tmp_path)
    rep = json.loads(out)
    assert code == EXIT_PASS and len(rep["groupings"]) == 4
    assert rep["max_discrepancy"] < 1e-10


def test_branching_codes(tmp_path):
    assert cli(["branching", "repeated_N"], tmp_path)[0] == EXIT_PASS
    code, out, _ = cli(["branching", "interferometer_recombine"], tmp_path)
    assert code == EXIT_FAIL
    assert json.loads(out)["violations"][0]["predecessors"] == ["arm_upper", "arm_lower"]


def test_tree_report_structure(tmp_path):
    code, out, _ = cli(["tree", "spin_vn"], tmp_path)
    root = json.loads(out)["tree"]
    assert code == EXIT_PASS and root["id"] == "" and root["weight"] == pytest.approx(1.0)
    kids = {c["labels"][0]: c for c in root["children"]}
    assert kids["+"]["amplitude"] == pytest.approx(0.7**0.5)


def test_nogo_report(tmp_path):
    code, out, _ = cli(["nogo", "--trials", "20", "--seed", "1"], tmp_path)
    rep = json.loads(out)
    assert code == EXIT_PASS and rep["meters_found"] == 0
    assert rep["contradiction_bound"] == pytest.approx(2e-3, rel=1e-3)
    assert "unitarity preserves" in rep["derivation"]


def test_mereology_codes(tmp_path):
    code, out, _ = cli(["mereology", "repeated_N"], tmp_path)
    assert code == EXIT_PASS and json.loads(out)["n_branches"] == 8
    assert cli(["mereology", "twoslit"], tmp_path)[0] == EXIT_FAIL


def test_semantics_needs_threshold(tmp_path):
    code, _, err = cli(["semantics", "alice_semantics"], tmp_path)
    assert code == EXIT_USAGE and "--threshold" in err
    code, out, _ = cli(["semantics", "alice_semantics", "--threshold", "0.5"], tmp_path)
    assert code == EXIT_PASS and all(json.loads(out)["properties"].values())


def test_usage_and_io_errors(tmp_path):
    assert cli(["consistency", "no_such_scenario"], tmp_path)[0] == EXIT_USAGE
    assert cli(["consistency"], tmp_path)[0] == EXIT_USAGE
    assert cli(["frobnicate"], tmp_path)[0] == EXIT_USAGE
    assert cli(["consistency", "spin_vn", "--scenario", "twoslit"], tmp_path)[0] == EXIT_USAGE
    assert cli(["sumrule", "interferometer_recombine"], tmp_path)[0] == EXIT_USAGE
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert run(["validate", "spin_vn", "--out", str(blocker / "sub")],
               stdout=io.StringIO(), stderr=io.StringIO()) == EXIT_USAGE


def test_reports_are_byte_identical(tmp_path):
    for cmd in (["nogo", "--trials", "10", "--seed", "4"], ["tree", "repeated_N"], ["mereology", "repeated_N"]):
        a = cli(cmd, tmp_path / "a")[1]
        b = cli(cmd, tmp_path / "b")[1]
        assert a == b
        assert (tmp_path / "a" / f"{cmd[0]}.json").read_bytes() == (tmp_path / "b" / f"{cmd[0]}.json").read_bytes()


def test_json_keys_sorted(tmp_path):
    out = cli(["validate", "twoslit"], tmp_path)[1]
    rep = json.loads(out)
    assert list(rep) == sorted(rep)


def _base():
    return json.loads(json.dumps(load_scenario("twoslit").raw))


def test_scenario_rejects_non_hermitian_hamiltonian(tmp_path):
    raw = _base()
    raw["hamiltonian"][0][1] = [1.0, 0.0]
    with pytest.raises(ScenarioError, match="hamiltonian not hermitian"):
        parse_scenario(raw)
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(raw))
    code, _, err = cli(["validate", "--scenario", str(path)], tmp_path)
    assert code == EXIT_USAGE and "hamiltonian not hermitian" in err


def test_scenario_rejects_partition_missing_cell():
    raw = _base()
    raw["partitions"][0]["cells"] = [{"label": "A", "projector": [[1, 0], [0, 0]]}]
    with pytest.raises(ScenarioError, match=r"partitions\[0\].*completeness deviation"):
        parse_scenario(raw)
    raw = _base()
    raw["partitions"][1]["cells"].pop()
    with pytest.raises(ScenarioError, match=r"partitions\[1\]"):
        parse_scenario(raw)


@pytest.mark.parametrize("mutate,field", [
    (lambda r: r.update(schema_version=9), "schema_version"),
    (lambda r: r.update(dims=[3]), "dims"),
    (lambda r: r.update(initial_state=[1, 0, 0]), "initial_state"),
    (lambda r: r.update(initial_state=[[1, 0], "x"]), "initial_state"),
    (lambda r: r.update(times=[1.0]), "partitions"),
    (lambda r: r.pop("hamiltonian"), "hamiltonian"),
    (lambda r: r["coarse_grainings"][0].update(grouping=[[0]]), "coarse_grainings"),
])
def test_scenario_field_paths(mutate, field):
    raw = _base()
    mutate(raw)
    with pytest.raises(ScenarioError, match=field):
        parse_scenario(raw)


def test_scenario_model_errors():
    with pytest.raises(ScenarioError, match="model"):
        parse_scenario({"model": {"kind": "teleporter", "c2": 0.5}})
    with pytest.raises(ScenarioError, match="model"):
        parse_scenario({"model": {"kind": "von_neumann"}})


def test_parse_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ScenarioError, match="parse error"):
        load_scenario(path)


def test_list_flag():
    out = io.StringIO()
    assert run(["--list"], stdout=out, stderr=io.StringIO()) == EXIT_PASS
    assert out.getvalue().split() == FIXTURES
