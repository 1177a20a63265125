import json
import os

import pytest
import yaml

from bftw import harness
from bftw.cli import main
from bftw.committees import WitnessSystem
from bftw.harness import ConfigError, build_config, parse_seeds
from bftw.protocols import make_oracle_witness_system

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def small_doc(**kw):
    doc = {"params": {"n": 8, "t": 3},
           "adversary": {"strategy": "silent", "byzantine": "random"},
           "pipeline": ["oracle_ws", "consensus"],
           "protocol": {"proposals": "unanimous", "value": 1},
           "seeds": [0, 1, 2]}
    doc.update(kw)
    return doc


def test_parse_seeds():
    assert parse_seeds("3..5") == [3, 4, 5]
    assert parse_seeds({"start": 2, "stop": 4}) == [2, 3]
    assert parse_seeds(3) == [0, 1, 2]
    assert parse_seeds([7, 1]) == [7, 1]
    with pytest.raises(ConfigError):
        parse_seeds("7")


@pytest.mark.parametrize("patch,field", [
    ({"seeds": []}, "seeds"),
    ({"seeds": None}, "seeds"),
    ({"params": {"n": 8}}, "params.t"),
    ({"params": {"n": 8, "t": 3, "gamma_typo": 4}}, "params.gamma_typo"),
    ({"params": {"n": 8, "t": 3, "b": 1.5}}, "params.b"),
    ({"adversary": {"strategy": "meteor"}}, "adversary.strategy"),
    ({"adversary": {"byzantine": [0, 1, 2, 3]}}, "adversary.byzantine"),
    ({"pipeline": ["consensus"]}, "pipeline[0]"),
    ({"pipeline": ["oracle_ws", "bake"]}, "pipeline[1]"),
    ({"mode": "sometimes"}, "mode"),
    ({"protocol": {"function": "median"}}, "protocol.function"),
    ({"colour": "blue"}, "colour"),
])
def test_validation_names_field(patch, field):
    doc = small_doc(**patch)
    if patch.get("seeds", 0) is None:
        del doc["seeds"]
    with pytest.raises(ConfigError) as e:
        build_config(doc)
    assert e.value.path == field


def test_b_fraction_and_mode_alias():
    cfg = build_config(small_doc(params={"n": 48, "t": 1, "b": "1/24"}, mode="async"))
    assert cfg.params.b == pytest.approx(1 / 24)
    assert cfg.mode == "asynchronous"


def test_override_and_seed_precedence(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump(small_doc()))
    cfg = harness.load_config(str(path), ["protocol.value=7", "params.t=2"], seeds="4..5")
    assert cfg.protocol["value"] == 7 and cfg.params.t == 2 and cfg.seeds == [4, 5]


def test_unanimous_consensus_small():
    report = harness.run_experiment(build_config(small_doc()))
    assert report.passed and report.exit_code == 0
    assert [r["outputs"]["decision"] for r in report.seeds] == [1, 1, 1]


def test_report_is_reproducible_apart_from_header():
    cfg = build_config(small_doc())
    a = json.loads(harness.report_json(harness.run_experiment(cfg)))
    b = json.loads(harness.report_json(harness.run_experiment(cfg)))
    a.pop("header")
    b.pop("header")
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_parallel_workers_match_serial():
    cfg = build_config(small_doc())
    a = harness.run_experiment(cfg, workers=1).to_dict()
    b = harness.run_experiment(cfg, workers=2).to_dict()
    assert a["seeds"] == b["seeds"] and a["aggregate"] == b["aggregate"]


def test_emit_and_reload(tmp_path):
    report = harness.run_experiment(build_config(small_doc()))
    path = tmp_path / "r.json"
    harness.emit_report(report, "json", str(path))
    back = harness.load_report(str(path))
    assert len(back.seeds) == 3
    assert back.aggregate["runs"] == 3
    assert harness.report_json(back) == path.read_text()
    table = harness.emit_report(report, "table")
    assert "consensus_agreement" in table and "PASS" in table


def test_empty_report(tmp_path):
    path = tmp_path / "e.json"
    harness.emit_report(harness.empty_report(), "json", str(path))
    back = harness.load_report(str(path))
    assert back.seeds == [] and back.aggregate["runs"] == 0 and back.passed


def test_unwritable_path():
    with pytest.raises(OSError):
        harness.emit_report(harness.empty_report(), "json", "/nonexistent/dir/r.json")


def test_allowed_failures():
    assert harness.allowed_failures(0.0, 50) == 0
    assert harness.allowed_failures(1 / 240, 50) == 1
    assert harness.allowed_failures(0.1, 50) == 15


def test_exit_code_reflects_hard_failures():
    rec_ok = {"checks": [{"name": "a", "ok": True, "hard": True, "p": None}], "metrics": {}, "passed": True}
    rec_bad = {"checks": [{"name": "a", "ok": False, "hard": True, "p": None}], "metrics": {}, "passed": False}
    stat = {"checks": [{"name": "s", "ok": False, "hard": False, "p": 0.01}], "metrics": {}, "passed": True}
    assert harness.aggregate([rec_ok, rec_ok])["passed"]
    assert not harness.aggregate([rec_ok, rec_bad])["passed"]
    # one statistical miss in 50 is within ceil(3 * 0.01 * 50) = 2
    assert harness.aggregate([stat] + [dict(stat, checks=[dict(stat["checks"][0], ok=True)])] * 49)["passed"]
    assert not harness.aggregate([stat] * 3 + [stat] * 0)["passed"]


def test_byzantine_selection():
    cfg = build_config(small_doc(params={"n": 20, "t": 3}, adversary={"byzantine": "last"}))
    assert harness.pick_byzantine(cfg, 0) == [17, 18, 19]
    cfg = build_config(small_doc(params={"n": 20, "t": 3}))
    assert harness.pick_byzantine(cfg, 4) == harness.pick_byzantine(cfg, 4)


def test_pipeline_stages_run():
    doc = small_doc(params={"n": 96, "t": 4, "b": "1/24", "gamma": 32, "zeta": 96},
                    adversary={"strategy": "flood"}, pipeline=["phase_a", "phase_b", "phase_c", "verify"],
                    seeds=[0])
    rec = harness.run_seed(build_config(doc), 0)
    names = {c["name"] for c in rec["checks"]}
    assert {"invalidated_pairs", "phase_b_trichotomy", "agreement", "membership", "availability"} <= names
    assert rec["metrics"]["precompute_rounds"] > 0


@pytest.mark.parametrize("fn", ["sum", "max", "xor-k", "value-count"])
def test_rag_stage(fn):
    doc = small_doc(params={"n": 30, "t": 1, "delta": 3, "alpha": 0.5}, pipeline=["oracle_ws", "rag"],
                    protocol={"function": fn, "beta": 4}, seeds=[0])
    rec = harness.run_seed(build_config(doc), 0)
    assert rec["passed"], rec["checks"]


# -- command line -----------------------------------------------------------------

def test_cli_derive_params(capsys):
    assert main(["derive-params", "--n", "240", "--t", "10", "--b", "0.0416666"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["sigma"] == 1024 and out["n"] == 240
    assert main(["derive-params", "--n", "10", "--t", "20"]) == 2


def test_cli_run_config(tmp_path, capsys):
    out = tmp_path / "r.json"
    code = main(["run", os.path.join(ROOT, "configs", "consensus_small.yaml"), "--seeds", "0..1",
                 "--out", str(out), "-q"])
    assert code == 0
    assert json.loads(out.read_text())["aggregate"]["runs"] == 2


def test_cli_run_bad_config(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump(small_doc(seeds=[])))
    assert main(["run", str(path)]) == 2
    assert "seeds" in capsys.readouterr().err


def test_cli_verify(tmp_path, capsys):
    ws = make_oracle_witness_system(30, 1, 4, seed=0, padding=1)
    good = tmp_path / "ws.json"
    good.write_text(ws.to_json())
    assert main(["verify", str(good)]) == 0
    u = min(ws.views)
    ws.views[u].pop(ws.honest[0])
    bad = tmp_path / "bad.json"
    bad.write_text(ws.to_json())
    assert main(["verify", str(bad)]) == 1
    assert main(["verify", str(tmp_path / "missing.json")]) == 2
    assert isinstance(WitnessSystem.from_json(good.read_text()), WitnessSystem)
