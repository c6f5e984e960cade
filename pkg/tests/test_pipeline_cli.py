from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import pytest

from drillbench.cli import main
from drillbench.pipeline import ConfigError, load_config, run_pipeline, validate_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_minimal_tree_pipeline():
    b = run_pipeline(load_config(CONFIGS / "minimal-tree.json"))
    assert b.verdict == "pass"
    assert b.reports[-1][1]["details"]["delta"] == 0


def test_demo_config_validates():
    validate_config(load_config(CONFIGS / "demo-73.json"))


@pytest.mark.parametrize("mutate,where", [
    (lambda c: c["stages"][0].update(kind="nope"), "stages/0/kind"),
    (lambda c: c["space"].update(radius=-1), "space/radius"),
    (lambda c: c.update(extra=1), "<root>"),
    (lambda c: c["stages"].append({"kind": "shell", "K": 1}), "stages/2"),
])
def test_invalid_config_names_field(mutate, where):
    cfg = load_config(CONFIGS / "minimal-tree.json")
    mutate(cfg)
    with pytest.raises(ConfigError, match=f"config invalid at {where}"):
        validate_config(cfg)


def test_stage_order_errors_halt():
    cfg = load_config(CONFIGS / "minimal-tree.json")
    cfg["stages"] = [{"kind": "gen-space"}, {"kind": "cusp", "depth_max": 2}]
    b = run_pipeline(cfg)
    assert b.verdict == "fail" and b.halted == "01-cusp"
    assert "needs a preceding stage" in b.reports[-1][1]["details"]["error"]


def test_bundle_written(tmp_path):
    b = run_pipeline(load_config(CONFIGS / "minimal-tree.json"))
    paths = b.write(tmp_path)
    manifest = json.loads((tmp_path / "bundle.json").read_text())
    assert manifest["verdict"] == "pass" and len(manifest["reports"]) == 2
    assert all(p.exists() for p in paths)


def test_cli_measure_delta(capsys):
    code = main(["measure-delta", "--space", "tree:3", "--radius", "3"])
    out = json.loads(capsys.readouterr().out)
    assert code == 0 and out["details"]["delta"] == 0


def test_cli_gen_space_emits(tmp_path, capsys):
    code = main(["gen-space", "--space", "grid", "--radius", "2", "--emit", "dot", "--emit", "csv",
                 "--out", str(tmp_path / "b")])
    assert code == 0
    assert (tmp_path / "b" / "space.dot").read_text().startswith("graph")
    assert (tmp_path / "b" / "space-edges.csv").read_text().startswith("u,v")


def test_cli_constants_exit_code(capsys):
    assert main(["constants", "--delta0", "1", "--L0", "5"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["details"]["ledger"]["sigma0"] == 120000600000


def test_cli_shell_tree_fails(capsys):
    code = main(["shell", "--space", "tree:4", "--radius", "5", "--word", "a", "--window", "1",
                 "--K", "2", "--s", "1"])
    assert code == 1


def test_cli_usage_errors_exit_one(capsys):
    with pytest.raises(SystemExit) as e:
        main(["shell", "--space", "grid"])
    assert e.value.code == 1
    assert main(["measure-delta", "--space", "grid", "--workers", "0"]) == 1
    assert main(["measure-delta", "--space", "sphere:2", "--radius", "2"]) == 1
    assert main(["run", "--in", "/nonexistent.json"]) == 1


def test_cli_run_bundle(tmp_path, capsys):
    code = main(["run", "--in", str(CONFIGS / "minimal-tree.json"), "--out", str(tmp_path)])
    assert code == 0 and (tmp_path / "bundle.json").exists()


def test_console_script_help():
    r = subprocess.run([sys.executable, "-m", "drillbench.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "boundary-report" in r.stdout
