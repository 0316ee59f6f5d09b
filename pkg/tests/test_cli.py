import csv
import json

import numpy as np
import pytest

from causal_mb.cli import main


@pytest.fixture(scope="module")
def simdir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--nodes", "6", "--latent", "2", "--n-obs", "2000",
                 "--n-exp", "200", "--n-test", "50", "--seed", "7", "--out", str(out)]) == 0
    return out


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_simulate_outputs(simdir):
    for name in ("net.json", "graph.json", "schema.json", "obs.csv", "exp.csv", "test.csv",
                 "truth.csv"):
        assert (simdir / name).exists()
    assert len(read_csv(simdir / "obs.csv")) == 2001
    truth = np.array(read_csv(simdir / "truth.csv")[1:], dtype=float)
    assert truth.shape == (50, 2)
    np.testing.assert_allclose(truth.sum(axis=1), 1, atol=1e-12)


def test_simulate_deterministic(simdir, tmp_path):
    main(["simulate", "--nodes", "6", "--latent", "2", "--n-obs", "2000", "--n-exp", "200",
          "--n-test", "50", "--seed", "7", "--out", str(tmp_path)])
    for name in ("obs.csv", "exp.csv", "truth.csv", "net.json"):
        assert (tmp_path / name).read_bytes() == (simdir / name).read_bytes()


def test_find_imb_and_predict(simdir, tmp_path, capsys):
    model = tmp_path / "m.json"
    assert main(["find-imb", "--obs", str(simdir / "obs.csv"), "--exp", str(simdir / "exp.csv"),
                 "--schema", str(simdir / "schema.json"), "--treatment", "X",
                 "--outcome", "Y", "--out", str(model)]) == 0
    dump = json.loads(model.read_text())
    assert sum(h["posterior"] for h in dump["hypotheses"]) == pytest.approx(1, abs=1e-9)
    out = tmp_path / "pred.csv"
    assert main(["predict", "--model", str(model), "--query", str(simdir / "test.csv"),
                 "--out", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == ["p_Y_0", "p_Y_1"] and len(rows) == 51


def test_mb_and_cmb_from_graph(tmp_path, capsys):
    g = tmp_path / "fig1.txt"
    g.write_text("X <-> A\nA <-> B\nB <-> Y\nX -> Y\ntreatment: X\noutcome: Y\n")
    assert main(["mb", "--graph", str(g), "--outcome", "Y", "--treatment", "X"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["omb"] == ["A", "B", "X"]
    assert main(["cmb", "--graph", str(g)]) == 0
    assert json.loads(capsys.readouterr().out) == [["B", "X"]]
    assert main(["cmb", "--graph", str(g), "--check", "A,B"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["is_cmb"] is False and rep["failed_condition"] == "not_identifiable"


def test_mb_from_data(simdir, capsys):
    assert main(["mb", "--data", str(simdir / "obs.csv"), "--schema",
                 str(simdir / "schema.json"), "--outcome", "Y"]) == 0
    assert "X" in json.loads(capsys.readouterr().out)["omb"]


def test_exit_codes(tmp_path, simdir):
    assert main(["cmb", "--graph", str(tmp_path / "missing.txt"), "--treatment", "X",
                 "--outcome", "Y"]) == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("A -> B\nB -> A\n")
    assert main(["mb", "--graph", str(bad), "--outcome", "A"]) == 2
    big = tmp_path / "big.txt"
    big.write_text("".join(f"V{i} -> Y\n" for i in range(22)) + "X -> Y\n"
                   "treatment: X\noutcome: Y\n")
    assert main(["cmb", "--graph", str(big)]) == 3
    with pytest.raises(SystemExit) as exc:
        main(["simulate"])
    assert exc.value.code == 2
    assert main(["find-imb", "--obs", str(simdir / "obs.csv"), "--exp",
                 str(simdir / "exp.csv"), "--schema", str(simdir / "schema.json"),
                 "--treatment", "X", "--outcome", "nope"]) == 2


def test_eval_and_report(tmp_path, capsys):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("replications = 2\nn_obs = 6\nn_lat = 2\nn_o = 1500\n"
                   "n_e_grid = [100]\ntest_size = 60\n")
    out = tmp_path / "run"
    assert main(["eval", "--config", str(cfg), "--out", str(out), "--quiet"]) == 0
    assert len(read_csv(out / "results.csv")) == 7
    summary = json.loads((out / "summary.json").read_text())
    assert {s["method"] for s in summary["summary"]} == {"findimb", "imb_only", "omb_only"}
    capsys.readouterr()
    assert main(["report", "--results", str(out / "results.csv"),
                 "--out", str(tmp_path / "s.csv")]) == 0
    assert json.loads(capsys.readouterr().out)["summary"] == summary["summary"]
