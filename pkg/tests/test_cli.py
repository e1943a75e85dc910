import json

import pytest

from tnrefine.cli import SWEEP_COLUMNS, main, read_csv


def run(args, capsys):
    code = main(args)
    return code, capsys.readouterr()


def test_generate_seed_score_refine(tmp_path, capsys):
    net = tmp_path / "net.json"
    tree = tmp_path / "tree.json"
    assert main(["generate", "--family", "sycamore_like", "--rows", "3", "--cols", "4", "--out", str(net)]) == 0
    assert json.loads(net.read_text())["n"] == 12
    assert main(["seed", "--net", str(net), "--out", str(tree)]) == 0
    assert "pairs" in json.loads(tree.read_text())
    code, out = run(["score", "--net", str(net), "--tree", str(tree)], capsys)
    lines = out.out.splitlines()
    assert code == 0 and lines[0].startswith("# tnrefine") and lines[1] == "n,f_T,f_S,f_sigma,f_eps"
    assert all(len(x.split(".")[1]) == 6 for x in lines[2].split(",")[1:])
    trace = tmp_path / "trace.csv"
    out_tree = tmp_path / "ref.json"
    assert main(["refine", "--net", str(net), "--tree", str(tree), "--budget-s", "2",
                 "--out", str(out_tree), "--trace", str(trace)]) == 0
    assert json.loads(out_tree.read_text())["certificate"] in ("PARETO_LOCAL", "BUDGET_EXHAUSTED")
    assert trace.read_text().splitlines()[1].startswith("walker,step")


def test_sweep_rows_and_determinism(tmp_path):
    cfg = tmp_path / "sweep.cfg"
    cfg.write_text("family = sycamore_like\nn = 12, 16\nseeds = 2 # two per size\nbudget_s = 5\nwalkers = 2\n")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["sweep", "--config", str(cfg), "--chi", "2", "--out", str(a)]) == 0
    assert main(["sweep", "--config", str(cfg), "--chi", "2", "--out", str(b)]) == 0
    ca, ra = read_csv(a)
    cb, rb = read_csv(b)
    assert ca == cb and '"n": [12, 16]' in ca
    assert len(ra) == 4 and list(ra[0]) == SWEEP_COLUMNS
    wall = {"t_seed", "t_refine"}
    strip = lambda rows: [{k: v for k, v in r.items() if k not in wall} for r in rows]
    assert strip(ra) == strip(rb)
    for r in ra:
        assert r["win"] == str(int(float(r["delta_f_T"]) > 0.05))


def test_sweep_partial_failure(tmp_path):
    out = tmp_path / "x.csv"
    assert main(["sweep", "--family", "random_regular", "--n", "7,8", "--budget-s", "1", "--out", str(out)]) == 3
    _, rows = read_csv(out)
    assert [r["status"] for r in rows] == ["ERROR", "OK"]


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    assert main(["sweep", "--config", str(bad)]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--rule", "nope"])
    assert exc.value.code == 2


def test_mechanism_and_validate(tmp_path):
    mech = tmp_path / "m.csv"
    assert main(["mechanism", "--family", "random_regular", "--n", "20", "--seeds", "3", "--out", str(mech)]) == 0
    assert len(read_csv(mech)[1]) == 3
    val = tmp_path / "v.csv"
    assert main(["validate", "--family", "sycamore_like", "--n", "12", "--seeds", "2",
                 "--budget-s", "2", "--out", str(val)]) == 0
    _, rows = read_csv(val)
    assert len(rows) == 4
    assert all(abs(float(r["agreement"]) - 1) <= 1e-6 for r in rows)
    skip = tmp_path / "s.csv"
    assert main(["validate", "--n", "12", "--mem-budget", "64", "--budget-s", "1", "--out", str(skip)]) == 0
    assert read_csv(skip)[1][0]["status"].startswith("SKIPPED")


def test_rescore_shifts_one_bit(tmp_path):
    out, trees, re = tmp_path / "s.csv", tmp_path / "t.jsonl", tmp_path / "r.csv"
    assert main(["sweep", "--n", "12", "--seeds", "2", "--budget-s", "2", "--out", str(out), "--trees-out", str(trees)]) == 0
    assert main(["rescore", "--trees", str(trees), "--flop-factor", "1", "--out", str(re)]) == 0
    _, a = read_csv(out)
    _, b = read_csv(re)
    for x, y in zip(a, b):
        assert float(x["seed_f_T"]) - float(y["seed_f_T"]) == pytest.approx(1.0, abs=1e-9)
        assert x["delta_f_T"] == y["delta_f_T"]
