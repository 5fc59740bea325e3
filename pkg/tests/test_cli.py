import json

import pytest

from synthrl.cli import main
from synthrl.dfa import chain_dfa, parse_dot
from synthrl.traces import Trace, save_traces


@pytest.fixture
def traces(tmp_path):
    path = tmp_path / "t.jsonl"
    save_traces([Trace(("wood", "crafttable"), True), Trace(("grass",), False)], path)
    return path


@pytest.fixture
def corridor(tmp_path):
    path = tmp_path / "corridor.txt"
    path.write_text("W@C\n")
    return str(path)


@pytest.mark.parametrize("cmd", ["synth", "merge", "tabu", "train", "eval", "bench", "export-dot"])
def test_help(cmd, capsys):
    assert main([cmd, "--help"]) == 0
    assert "usage" in capsys.readouterr().out


def test_usage_errors(capsys):
    assert main([]) == 1
    assert main(["synth"]) == 1
    assert main(["fly"]) == 1
    assert main(["export-dot"]) == 1
    assert main(["export-dot", "--fixture", "slp-easy"]) == 1
    assert main(["bench", "--out", "x.csv", "--seed", "0", "--lengths", "5,3"]) == 1
    assert main(["bench", "--out", "x.csv", "--seed", "0", "--learners", "lstar"]) == 1


def test_runtime_failure(tmp_path):
    assert main(["synth", "--traces", str(tmp_path / "none.jsonl"),
                 "--out", str(tmp_path / "o.dot")]) == 2
    (tmp_path / "bad.jsonl").write_text("{not json\n")
    assert main(["merge", "--traces", str(tmp_path / "bad.jsonl"),
                 "--out", str(tmp_path / "o.dot")]) == 2


def test_synth_and_extend(tmp_path, traces):
    out = tmp_path / "a.dot"
    assert main(["synth", "--traces", str(traces), "--out", str(out)]) == 0
    dfa = parse_dot(out.read_text())
    assert dfa.isomorphic(chain_dfa(["wood", "crafttable"]))
    more = tmp_path / "more.jsonl"
    save_traces([Trace(("wood", "crafttable"), True), Trace(("iron", "crafttable"), True)], more)
    out2 = tmp_path / "b.dot"
    assert main(["synth", "--traces", str(more), "--extend", str(out), "--out", str(out2)]) == 0
    bigger = parse_dot(out2.read_text())
    assert bigger.contains(dfa) and bigger.accepts(["iron", "crafttable"])


def test_merge_and_tabu(tmp_path, traces, monkeypatch):
    assert main(["merge", "--traces", str(traces), "--out", str(tmp_path / "m.dot")]) == 0
    assert parse_dot((tmp_path / "m.dot").read_text()).accepts(["wood", "crafttable"])
    monkeypatch.delenv("SYNTHRL_SEED", raising=False)
    assert main(["tabu", "--traces", str(traces), "--out", str(tmp_path / "t.dot")]) == 1
    monkeypatch.setenv("SYNTHRL_SEED", "4")
    assert main(["tabu", "--traces", str(traces), "--out", str(tmp_path / "t.dot")]) == 0


def test_export_dot(tmp_path, capsys):
    assert main(["export-dot", "--list"]) == 0
    assert "minecraft-task3" in capsys.readouterr().out.split()
    out = tmp_path / "f.dot"
    assert main(["export-dot", "--fixture", "minecraft-task3", "--out", str(out)]) == 0
    assert out.read_text().startswith("digraph minecraft_task3 {")
    assert main(["export-dot", "--fixture", "nope", "--out", str(out)]) == 2


def test_train_then_eval(tmp_path, corridor, capsys):
    run = tmp_path / "run"
    cfg = tmp_path / "run.cfg"
    cfg.write_text("task = 1\nepisodes = 200\nbudget = 20\n")
    assert main(["train", "--config", str(cfg), "--seed", "0", "--map", corridor,
                 "--set", "epsilon_anneal=1000", "--out", str(run)]) == 0
    capsys.readouterr()
    assert main(["eval", "--run", str(run), "--map", corridor, "--budget", "20"]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["task"] == 1 and result["optimum"] == pytest.approx(0.99 ** 2)
    assert result["ratio"] == pytest.approx(1.0)
    assert main(["eval", "--dfa", str(run / "dfa.dot"), "--checkpoint", str(run / "modules.ckpt"),
                 "--task", "1", "--map", corridor]) == 0
    assert main(["eval", "--dfa", str(run / "dfa.dot")]) == 1


def test_train_config_errors(tmp_path):
    assert main(["train", "--seed", "0", "--set", "nokey"]) == 1
    assert main(["train", "--seed", "0", "--set", "colour=red"]) == 1
    assert main(["train", "--seed", "0", "--task", "9"]) == 1


def test_bench(tmp_path):
    out = tmp_path / "b.csv"
    assert main(["bench", "--out", str(out), "--seed", "0", "--lengths", "50,100",
                 "--learners", "synth,ktails"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "learner,cum_trace_len,ms,states"
    assert [line.split(",")[0] for line in lines[1:]] == ["synth", "synth", "ktails", "ktails"]
