from __future__ import annotations

import json

import pytest

from adl import cli
from adl.utils.io_utils import validate

from conftest import DATA, ROOT

MATRICES = DATA / "matrices"


def _m(name: str) -> str:
    return str(MATRICES / f"{name}.json")


@pytest.fixture(autouse=True)
def _no_logging_setup(monkeypatch):
    # ルートロガーのハンドラは pytest に任せる
    monkeypatch.setattr(cli, "_setup_logging", lambda cfg, verbose: None)


def _report(path):
    return json.loads(path.read_text(encoding="utf-8"))


def test_classify_writes_a_valid_report(tmp_path):
    out = tmp_path / "classify.json"
    code = cli.main(["classify", "--matrix-a", _m("diag_2_4"), "--matrix-b", _m("diag_4_2"), "--jmax", "20", "--out", str(out)])
    assert code == cli.EXIT_OK
    rep = _report(out)
    validate(rep, "classify_report")
    assert rep["schema"] == "classify_report"
    assert rep["result"]["equivalence"]["verdict"] == "NotEquivalent"
    assert rep["result"]["rigidity"] == "NotEquivalent"
    assert rep["config"]["jmax"] == 20


def test_classify_profile_csv(tmp_path):
    csv_path = tmp_path / "profile.csv"
    code = cli.main([
        "classify", "--matrix-a", _m("two_I"), "--matrix-b", _m("two_R1"),
        "--jmax", "16", "--emit-csv", str(csv_path), "--out", str(tmp_path / "r.json"),
    ])
    assert code == cli.EXIT_OK
    lines = csv_path.read_text(encoding="utf-8").strip().splitlines()
    assert lines[0] == "j,n_j"
    assert len(lines) == 1 + 33


def test_reports_are_reproducible(tmp_path):
    args = ["cocycle", "--matrix-a", _m("two_I"), "--matrix-b", _m("two_Rhalfpi"), "--jmax", "16"]
    assert cli.main(args + ["--out", str(tmp_path / "a.json")]) == cli.EXIT_OK
    assert cli.main(args + ["--out", str(tmp_path / "b.json")]) == cli.EXIT_OK
    one, two = _report(tmp_path / "a.json"), _report(tmp_path / "b.json")
    one.pop("timing")
    two.pop("timing")
    assert one == two
    assert one["result"]["probe"]["verdict"] == "Finite"


def test_rho_prints_value_and_index(capsys):
    code = cli.main(["rho", "--matrix", _m("two_I"), "--point", "2,0"])
    assert code == cli.EXIT_OK
    value, j = capsys.readouterr().out.split()
    assert float(value) == pytest.approx(4.0)
    assert j == "1"


def test_rho_at_the_origin(capsys):
    assert cli.main(["rho", "--matrix", _m("two_I"), "--point", "0,0"]) == cli.EXIT_OK
    assert capsys.readouterr().out.split() == ["0.0", "-"]


def test_rho_rejects_a_wrong_dimension(capsys):
    assert cli.main(["rho", "--matrix", _m("two_I"), "--point", "1,2,3"]) == cli.EXIT_ERROR
    assert "error:" in capsys.readouterr().err


def test_seqnorm_closed_form(tmp_path):
    out = tmp_path / "seqnorm.json"
    code = cli.main([
        "seqnorm", "--matrix", _m("two_I"), "--seq", str(DATA / "sequences" / "single_unit.json"),
        "--alpha", "0", "--p", "2", "--q", "2", "--out", str(out),
    ])
    assert code == cli.EXIT_OK
    est = _report(out)["result"]["estimate"]
    assert est["method"] == "ClosedForm"
    assert est["value"] == pytest.approx(1.0)


def test_coincide_p_ne_q(tmp_path):
    out = tmp_path / "coincide.json"
    code = cli.main([
        "coincide", "--matrix-a", _m("two_I"), "--matrix-b", _m("two_R1"),
        "--p", "2", "--q", "1", "--out", str(out),
    ])
    assert code == cli.EXIT_OK
    rep = _report(out)["result"]["coincidence"]
    assert rep["verdict"] == "NotEqual"


def test_match_on_a_small_window(tmp_path):
    out = tmp_path / "match.json"
    code = cli.main([
        "match", "--matrix-s", _m("two_I"), "--matrix-t", _m("two_R1"),
        "--window", "-3,3;-3,3", "--out", str(out),
    ])
    assert code == cli.EXIT_OK
    rep = _report(out)
    validate(rep, "match_report")
    assert rep["result"]["det_s"] == pytest.approx(4.0)


def test_missing_matrix_file_is_an_error(tmp_path, capsys):
    code = cli.main(["classify", "--matrix-a", str(tmp_path / "nope.json"), "--matrix-b", _m("two_I")])
    assert code == cli.EXIT_ERROR
    assert "nope.json" in capsys.readouterr().err


def test_missing_option_is_an_error(capsys):
    assert cli.main(["classify", "--matrix-a", _m("two_I")]) == cli.EXIT_ERROR
    assert "--matrix-b" in capsys.readouterr().err


def test_non_expansive_matrix_is_an_error():
    assert cli.main(["classify", "--matrix-a", _m("identity"), "--matrix-b", _m("two_I")]) == cli.EXIT_ERROR


def test_config_file_with_flag_override(tmp_path, monkeypatch):
    monkeypatch.chdir(ROOT)
    out = tmp_path / "from_config.json"
    code = cli.main(["classify", "--config", "configs/runs/classify_8I_4I.yml", "--seed", "5", "--out", str(out)])
    assert code == cli.EXIT_OK
    rep = _report(out)
    assert rep["config"]["seed"] == 5 and rep["config"]["jmax"] == 32
    assert rep["config"]["out"] == str(out)
    assert rep["result"]["equivalence"]["verdict"] == "Equivalent"


def test_bad_config_is_an_error(tmp_path):
    path = tmp_path / "bad.yml"
    path.write_text("command: classify\nfoo: 1\n", encoding="utf-8")
    assert cli.main(["classify", "--config", str(path)]) == cli.EXIT_ERROR


def test_build_report_layout():
    cfg = cli.load_run_config(None, {"seed": 3}, command="cocycle")
    rep = cli.build_report(cfg, {"probe": {}}, False, 0.5)
    assert rep["schema"] == "cocycle_report"
    assert rep["config"]["seed"] == 3
    assert set(rep) == {"schema", "schema_version", "config", "flagged", "result", "timing"}


# ==========================================================
# スレッド数によらないレポート
# ==========================================================
@pytest.mark.parametrize("workers", [1, 4, 8])
def test_operators_report_bytes_do_not_depend_on_workers(tmp_path, workers):
    def run(w: int) -> str:
        out = tmp_path / "operators.json"
        code = cli.main([
            "operators", "--matrix-a", _m("two_I"), "--matrix-b", _m("two_R1"),
            "--mode", "permute", "--alpha", "0", "--p", "2", "--q", "1",
            "--method", "mc", "--mc-samples", "8", "--refine", "1",
            "--trials", "3", "--scales", "0,1", "--window=-1,1;-1,1", "--density", "0.5",
            "--seed", "5", "--workers", str(w), "--out", str(out),
        ])
        assert code in (cli.EXIT_OK, cli.EXIT_FLAGGED)
        rep = _report(out)
        validate(rep, "operators_report")
        rep.pop("timing")
        return json.dumps(rep, sort_keys=True)

    assert run(workers) == run(1)
