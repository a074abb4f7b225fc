from __future__ import annotations

import json
import shutil

import pytest

from wyvc import __version__
from wyvc.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main
from wyvc.config import load_config

from conftest import CORPUS, needs_solver

SUM = str(CORPUS / "valid/sum.wyv")
WEAK = str(CORPUS / "scenarios/sum_weak.wyv")


@pytest.fixture(autouse=True)
def _isolated(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    for var in ("WYVC_SCHEDULE", "WYVC_MODE", "WYVC_BUDGET", "WYVC_TURNS", "WYVC_SEED", "WYVC_AGENTS",
                "WYVC_DISABLED_LEMMAS", "WYVC_SOLVER_TIMEOUT_MS"):
        monkeypatch.delenv(var, raising=False)


def _json(capsys, argv):
    code = main(argv + ["--json"])
    return code, json.loads(capsys.readouterr().out)


@needs_solver
def test_check_sum(capsys):
    assert main(["check", SUM]) == EXIT_OK
    out = capsys.readouterr().out
    assert "6/6 Valid" in out and "sum.h.loop: Valid" in out


@needs_solver
def test_check_weak_sum_fails_with_model(capsys):
    code, doc = _json(capsys, ["check", WEAK])
    assert code == EXIT_FAIL
    bad = [o for o in doc["result"]["obligations"] if o["verdict"] != "Valid"]
    assert [o["name"] for o in bad] == ["h.loop"]
    assert bad[0]["verdict"] == "Invalid" and bad[0]["model"]["i"] < 0


@needs_solver
def test_check_dumps_scripts(tmp_path):
    assert main(["check", SUM, "--dump-smt", str(tmp_path / "smt")]) == EXIT_OK
    assert len(list((tmp_path / "smt").glob("*.smt2"))) == 6


def test_syntax_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.wyv"
    bad.write_text("method f (x: Int) returns (r: Int) do return x +")
    assert main(["check", str(bad)]) == EXIT_USAGE
    assert "bad.wyv" in capsys.readouterr().err


def test_usage_errors():
    assert main([]) == EXIT_USAGE
    assert main(["check", "/nonexistent.wyv"]) == EXIT_USAGE
    assert main(["sim", "--schedules", "warp"]) == EXIT_USAGE
    assert main(["run", SUM, "--args", "[1"]) == EXIT_USAGE


def test_version(capsys):
    assert main(["--version"]) == EXIT_OK
    assert __version__ in capsys.readouterr().out


@needs_solver
def test_prove_fig1_fixture(capsys):
    code, doc = _json(capsys, ["prove", WEAK, "--fixture", str(CORPUS / "fixtures/fig1.json"),
                               "--schedule", "par3"])
    assert code == EXIT_OK
    assert doc["result"]["status"] == "Verified" and doc["result"]["iterations"] == 2
    assert doc["result"]["trace"]["compute"] == 29
    assert doc["config"]["schedule"] == "par3"


@needs_solver
def test_prove_sequential_always_fail(capsys):
    code, doc = _json(capsys, ["prove", WEAK, "--mode", "sequential", "--turns", "3",
                               "--fixture", str(CORPUS / "fixtures/always_fail.json")])
    assert code == EXIT_FAIL
    assert doc["result"]["status"] == "BudgetExhausted" and doc["result"]["iterations"] == 3


@needs_solver
def test_prove_loop_free_no_agents(capsys):
    code, doc = _json(capsys, ["prove", str(CORPUS / "valid/max2.wyv")])
    assert code == EXIT_OK
    assert doc["result"]["trace"]["agentCalls"] == 0


def test_prove_sequential_needs_proposer(capsys):
    assert main(["prove", WEAK, "--mode", "sequential"]) == EXIT_USAGE


def test_run_sum(capsys):
    assert main(["run", SUM, "--args", "[1,2,3]"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "6"
    assert main(["run", SUM, "--args", "[[1,2,3]]"]) == EXIT_OK


def test_run_violation():
    assert main(["run", str(CORPUS / "mutants/sum_minus.wyv"), "--args", "[[1]]"]) == EXIT_FAIL


def test_fuzz(capsys):
    assert main(["fuzz", SUM, "--trials", "200"]) == EXIT_OK
    assert main(["fuzz", str(CORPUS / "mutants/sum_minus.wyv"), "--trials", "200"]) == EXIT_FAIL


@needs_solver
def test_disprove(tmp_path, capsys):
    spec = tmp_path / "c.wyv"
    spec.write_text("method c (x: Int) returns (r: Int) ensures r < 0 && r > 0 do return 0")
    assert main(["disprove", str(spec)]) == EXIT_FAIL
    assert "Disproved" in capsys.readouterr().out
    assert main(["disprove", str(CORPUS / "valid/abs.wyv")]) == EXIT_OK


def test_sim_table(capsys):
    code, doc = _json(capsys, ["sim", "--p", "0.0625", "--schedules", "seq,par16,id", "--goals", "3000"])
    assert code == EXIT_OK
    rows = {r["schedule"]: r for r in doc["result"]["rows"]}
    assert rows["id"]["mean_latency"] < rows["seq"]["mean_latency"]
    assert rows["id"]["mean_compute"] < rows["par16"]["mean_compute"]


def test_judge(capsys):
    assert main(["judge", str(CORPUS / "leaky/sum_direct.wyv")]) == EXIT_FAIL
    assert "R1 sum(xs)" in capsys.readouterr().out
    assert main(["judge", SUM]) == EXIT_OK


@needs_solver
def test_corpus_command(tmp_path, capsys):
    root = tmp_path / "mini"
    for sub, names in {"valid": ["abs.wyv"], "mutants": ["abs_no_negate.wyv", "abs_no_negate.expect"],
                       "leaky": ["sum_direct.wyv"]}.items():
        (root / sub).mkdir(parents=True)
        for n in names:
            shutil.copy(CORPUS / sub / n, root / sub / n)
    (root / "leaky/labels.json").write_text(json.dumps({"sum_direct.wyv": {"imperative": False,
                                                                         "rules": ["R1", "R2"]}}))
    code, doc = _json(capsys, ["corpus", str(root)])
    assert code == EXIT_OK
    assert doc["result"]["counts"] == {"valid": {"total": 1, "ok": 1}, "mutant": {"total": 1, "ok": 1},
                                       "leaky": {"total": 1, "ok": 1}}


def test_report_file_embeds_config(tmp_path):
    out = tmp_path / "r.json"
    assert main(["judge", SUM, "--report", str(out), "--seed", "9"]) == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["tool"] == "wyvc" and doc["version"] == __version__ and doc["schema"] == 1
    assert doc["config"]["seed"] == 9 and doc["command"] == "judge"


def test_config_file_then_env(tmp_path, monkeypatch):
    (tmp_path / "wyvc.toml").write_text(
        '[solver]\ntimeout_ms = 1234\n[schedule]\nkind = "id"\nstages = [1, 2]\n'
        '[budget]\nagent_calls = 7\n[library]\ndisabled = ["sum_take_succ"]\n'
        '[endpoints.remote]\nurl = "http://127.0.0.1:1/x"\n')
    cfg = load_config(search_dir=str(tmp_path), env={})
    assert (cfg.solver_timeout_ms, cfg.schedule, cfg.budget) == (1234, "id:1+2", 7)
    assert cfg.disabled_lemmas == ["sum_take_succ"] and "remote" in cfg.endpoints
    cfg = load_config(search_dir=str(tmp_path), env={"WYVC_SOLVER_TIMEOUT_MS": "99", "WYVC_SCHEDULE": "par2"})
    assert (cfg.solver_timeout_ms, cfg.schedule) == (99, "par2")
    with pytest.raises(ValueError):
        load_config(env={"WYVC_SCHEDULE": "bogus"})


def test_cwd_config_picked_up(tmp_path, capsys):
    (tmp_path / "wyvc.toml").write_text("[run]\nseed = 42\n")
    code, doc = _json(capsys, ["judge", SUM])
    assert doc["config"]["seed"] == 42


def test_unknown_agent_in_roster(tmp_path):
    (tmp_path / "wyvc.toml").write_text('[agents]\nroster = ["oracle"]\n')
    assert main(["prove", SUM]) == EXIT_USAGE
    (tmp_path / "wyvc.toml").write_text('[agents]\nroster = ["http:missing"]\n')
    assert main(["prove", SUM]) == EXIT_USAGE
