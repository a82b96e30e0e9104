from __future__ import annotations

import json
import subprocess
import sys

import pytest

from tridecomp.cli import build_parser, main
from tridecomp.graphcore import Graph, write_graph


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_count_sts_prints_the_count(capsys):
    code, out, _ = run(capsys, "count-sts", "--n", "7")
    assert code == 0
    assert out.strip() == "30"


def test_check_reports_graph_properties(capsys, tmp_path):
    path = tmp_path / "g.txt"
    write_graph(Graph.complete(9), str(path))
    code, out, _ = run(capsys, "check", "--graph", str(path))
    data = json.loads(out)
    assert code == 0
    assert data["tridivisible"] is True
    assert data["density"] == 1.0
    assert data["typicality_deviation"] <= 2 / 9
    assert data["seed"] == 0


def test_decompose_is_byte_identical_apart_from_timestamps(tmp_path, capsys):
    paths = [tmp_path / "one.json", tmp_path / "two.json"]
    for p in paths:
        code, _, _ = run(capsys, "decompose", "--mode", "punctured:0.005", "--a", "7", "--seed", "42", "--json", str(p))
        assert code == 0
    docs = [json.loads(p.read_text()) for p in paths]
    for d in docs:
        assert d["status"] == "ok"
        assert d["seed"] == 42
        d.pop("timestamps")
    assert json.dumps(docs[0], sort_keys=True) == json.dumps(docs[1], sort_keys=True)
    assert docs[0]["decomposition"]


def test_stage_abort_exits_two_with_json(capsys):
    code, out, _ = run(capsys, "decompose", "--n", "99", "--retries", "2")
    assert code == 2
    data = json.loads(out)
    assert data["status"] == "abort"
    assert data["stage_reports"][-1]["stage"] == "nibble"


def test_usage_errors_exit_one(capsys):
    assert run(capsys, "count-sts", "--bogus")[0] == 1
    assert run(capsys, "count-sts")[0] == 1
    assert run(capsys, "frobnicate")[0] == 1
    assert run(capsys, "decompose", "--mode", "sparse", "--n", "9")[0] == 1
    code, _, err = run(capsys, "check", "--graph", "/nonexistent/graph.txt")
    assert code == 1 and "error" in err


def test_every_subcommand_has_help(capsys):
    parser = build_parser()
    sub = next(a for a in parser._actions if a.dest == "command")
    assert set(sub.choices) == {
        "check", "template", "removal", "decompose", "count-sts", "estimate-sts", "design-check", "shuffle-test",
    }
    for name in sub.choices:
        code, out, _ = run(capsys, name, "--help")
        assert code == 0
        assert "--seed" in out and "--json" in out


def test_estimate_writes_csv(capsys, tmp_path):
    path = tmp_path / "est.csv"
    code, out, _ = run(capsys, "estimate-sts", "--n", "25", "--trials", "2", "--csv", str(path))
    assert code == 0
    assert json.loads(out)["trials"] == 2
    assert path.read_text().splitlines()[0] == "n,trial,L1,L2,lower_bound,wilson_prediction"


def test_design_check(capsys):
    data = json.loads(run(capsys, "design-check", "--n", "13")[1])
    assert data["divisible"] is True and data["degenerate"] is False
    data = json.loads(run(capsys, "design-check", "--n", "5", "--q", "2", "--r", "1", "--lam", "3")[1])
    assert data["divisible"] is False


def test_shuffle_test(capsys):
    code, out, _ = run(capsys, "shuffle-test", "--a", "5", "--trials", "5", "--exclusion")
    data = json.loads(out)
    assert code == 0 and data["all_ok"] and data["exclusion"]["ok"]


def test_template_and_removal(capsys):
    data = json.loads(run(capsys, "template", "--n", "31", "--mode", "dense")[1])
    assert data["density_star"] == 1.0 and data["template_triangles"] == 155
    data = json.loads(run(capsys, "removal", "--n", "60", "--b", "0.05")[1])
    assert data["steps"] > 0 and len(data["checkpoints"]) >= 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "tridecomp", "count-sts", "--n", "9"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.strip() == "840"
