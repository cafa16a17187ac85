import json

import numpy as np
import pytest

from tempcausal.cli import main
from tempcausal.config import ConfigError, RunConfig, apply_overrides
from tempcausal.graph import CausalGraph

FAST = ["--model.d=16", "--model.d_qk=8", "--model.d_ffn=16", "--model.h=2", "--model.T=8",
        "--train.max_epochs=3", "--train.batch_size=32", "--detector.samples=8"]


def test_overrides_and_profiles():
    doc = apply_overrides({"model": {"d": 8}}, ["--model.tau=100", "train.lr=0.01", "--profile=fmri",
                                                "--data.structure=fork"])
    assert doc == {"model": {"d": 8, "tau": 100}, "train": {"lr": 0.01}, "profile": "fmri",
                   "data": {"structure": "fork"}}
    rc = RunConfig.from_dict({"data": {"structure": "diamond"}})
    cfg = rc.model_config(4)
    assert (cfg.tau, cfg.lambda_k, cfg.d) == (1.0, 1e-4, 256)
    rc = RunConfig.from_dict({"data": {"structure": "fork"}, "model": {"d": 64}})
    cfg = rc.model_config(3)
    assert (cfg.tau, cfg.lambda_k, cfg.d) == (100.0, 1e-10, 64)
    lor = RunConfig.from_dict({"profile": "lorenz"})
    assert (lor.model_config(10).T, lor.detector_config().n, lor.detector_config().m) == (32, 3, 2)


def test_validation_reports_everything():
    rc = RunConfig.from_dict({"data": {"structure": "ring"}, "model": {"tau": -1},
                              "train": {"patience": 0}, "detector": {"bogus": 1}, "profile": "nope"})
    with pytest.raises(ConfigError) as ei:
        rc.validate()
    text = str(ei.value)
    for needle in ("ring", "patience", "bogus", "nope"):
        assert needle in text
    rc = RunConfig.from_dict({"data": {"csv": "/no/such.csv"}, "model": {"tau": -1}})
    probs = rc.problems()
    assert any("not found" in p for p in probs) and any("tau" in p for p in probs)


def test_generate_command(tmp_path, capsys):
    out = tmp_path / "g"
    assert main(["generate", "--structure", "fork", "--seed", "7", "-o", str(out)]) == 0
    header = (out / "data.csv").read_text().splitlines()[0]
    assert header.count(",") == 2
    assert (out / "data.truth.csv").exists() and (out / "data.provenance.json").exists()
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    assert main(["generate", "--structure", "fork", "--seed", "7", "-o", str(out)]) == 0
    assert first == {p.name: p.read_bytes() for p in out.iterdir()}
    assert main(["generate", "--structure", "ring", "-o", str(out)]) != 0
    assert "valid options" in capsys.readouterr().err


def test_train_discover_eval(tmp_path, capsys):
    data = tmp_path / "d"
    main(["generate", "--structure", "fork", "--seed", "1", "--length", "120", "-o", str(data)])
    run = tmp_path / "run"
    assert main(["train", "--data", str(data / "data.csv"), "-o", str(run), *FAST]) == 0
    from tempcausal.model import load_checkpoint
    p1, _, _ = load_checkpoint(run / "checkpoint.json")
    assert main(["train", "--data", str(data / "data.csv"), "-o", str(tmp_path / "run2"), *FAST]) == 0
    p2, _, _ = load_checkpoint(tmp_path / "run2" / "checkpoint.json")
    assert all(np.array_equal(p1[k], p2[k]) for k in p1)

    assert main(["discover", "--checkpoint", str(run / "checkpoint.json"), "--data", str(data / "data.csv"),
                 "-o", str(run), "--detector.m=2", "--detector.n=2"]) == 0
    graph = CausalGraph.load_json(run / "graph.json")
    assert len(graph) == 9
    dot = (run / "graph.dot").read_text()
    assert dot.startswith("digraph") and dot.count("->") == 9
    first = (run / "graph.json").read_bytes()
    main(["discover", "--checkpoint", str(run / "checkpoint.json"), "--data", str(data / "data.csv"),
          "-o", str(run), "--detector.m=2", "--detector.n=2"])
    assert (run / "graph.json").read_bytes() == first

    capsys.readouterr()
    truth = data / "data.truth.csv"
    assert main(["eval", str(truth), str(truth), "--json", str(tmp_path / "e.json")]) == 0
    text = capsys.readouterr().out
    doc = json.loads((tmp_path / "e.json").read_text())
    assert doc["f1"] == 1.0 and "f1        1.0" in text
    for k, v in doc.items():
        if k != "seed":
            assert f"{k:<10}{v}" in text
    other = tmp_path / "other.json"
    CausalGraph.from_edges(4, [(0, 1, 1)]).save_json(other)
    assert main(["eval", str(other), str(tmp_path / "e.json").replace("e.json", "run/graph.json")]) != 0


def test_train_missing_file(tmp_path, capsys):
    assert main(["train", "--data", str(tmp_path / "nope.csv"), "-o", str(tmp_path)]) != 0
    assert "not found" in capsys.readouterr().err


def test_bench_is_deterministic(tmp_path):
    cfg = tmp_path / "bench.json"
    cfg.write_text(json.dumps({
        "seeds": [0, 1],
        "datasets": [{"structure": "fork", "length": 80}, {"structure": "mediator", "length": 80}],
    }))
    outs = []
    for k in range(2):
        out = tmp_path / f"b{k}"
        assert main(["bench", "-c", str(cfg), "-o", str(out), *FAST]) == 0
        outs.append((out / "report.json").read_bytes())
    assert outs[0] == outs[1]
    doc = json.loads(outs[0])
    assert [r["name"] for r in doc["rows"]] == ["fork", "mediator"]
    assert (tmp_path / "b0" / "report.txt").read_text().count("\n") == 3
