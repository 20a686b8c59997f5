import json
import math

import pytest

from loopsoup import cli, exactcft
from loopsoup.records import RunRecord


def write_cfg(tmp_path, **doc):
    doc = {"schema_version": 1, **doc}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc, indent=1))
    return str(path)


def only_record(out, command):
    (path,) = out.glob(f"{command}-*.json")
    return RunRecord.load(path)


def strip_times(text):
    doc = json.loads(text)
    doc.pop("started")
    doc.pop("finished")
    return doc


def test_exact_matches_library_call(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["exact", "--out", str(out)]) == 0
    rec = only_record(out, "exact")
    pts = [complex(*p) for p in cli.STANDARD_FOUR]
    want = exactcft.four_point_audit(exactcft.PointConfig4(*pts), exactcft.CftParams(1.0, math.pi))
    got = rec.results["four_point_OOEE"]
    assert got["value"] == want["value"]
    assert got["terms"]["term_twist"] == want["term_twist"]
    assert got["provenance"] == "exact"


def test_verify_quick_passes(tmp_path, capsys):
    out = tmp_path / "q"
    assert cli.main(["verify", "quick", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "FAIL" not in text and text.count("PASS") >= 10
    (path,) = out.glob("verify-*.json")
    assert cli.main(["verify", "--record", str(path)]) == 0


def test_rejudge_flags_failures(tmp_path):
    rec = RunRecord("h", "verify", "x")
    rec.compare("bad", 2.0, 1.0, 0.1, "abs")
    path = rec.write(tmp_path / "r.json")
    assert cli.main(["verify", "--record", str(path)]) == 1


def test_same_seed_same_record(tmp_path):
    cfg = write_cfg(tmp_path, command="estimate", points=[[0, 0], [1, 0]], eps_ladder=[0.08, 0.04],
                    budgets={"samples": 40}, seed=3, options={"quantity": "alpha"})
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["estimate", "--config", cfg, "--out", str(a)]) == 0
    assert cli.main(["estimate", "--config", cfg, "--out", str(b)]) == 0
    ta = next(a.glob("estimate-*.json")).read_text()
    tb = next(b.glob("estimate-*.json")).read_text()
    assert strip_times(ta) == strip_times(tb)
    assert (a / "plot-alpha_ladder.csv").read_text() == (b / "plot-alpha_ladder.csv").read_text()
    c = tmp_path / "c"
    assert cli.main(["estimate", "--config", cfg, "--seed", "4", "--out", str(c)]) == 0
    assert strip_times(next(c.glob("estimate-*.json")).read_text()) != strip_times(ta)


def test_usage_errors_exit_2(tmp_path, capsys):
    assert cli.main([]) == 2
    assert cli.main(["bogus"]) == 2
    assert cli.main(["exact", "--threads", "0", "--out", str(tmp_path)]) == 2
    assert cli.main(["exact", "--budget-scale", "-1", "--out", str(tmp_path)]) == 2
    assert cli.main(["exact", "--config", str(tmp_path / "missing.json")]) == 2
    bad = write_cfg(tmp_path, command="exact", lam=0)
    assert cli.main(["exact", "--config", bad]) == 2
    assert "lam" in capsys.readouterr().err
    other = write_cfg(tmp_path, command="blocks")
    assert cli.main(["exact", "--config", other]) == 2


def test_out_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("LOOPSOUP_OUT", str(tmp_path / "env"))
    assert cli.main(["exact"]) == 0
    assert list((tmp_path / "env").glob("exact-*.json"))


def test_plot_data_command(tmp_path, capsys):
    out = tmp_path / "p"
    cfg = write_cfg(tmp_path, command="blocks", options={"kmax": 3, "max_p": 1})
    assert cli.main(["blocks", "--config", cfg, "--out", str(out)]) == 0
    capsys.readouterr()
    rec = next(out.glob("blocks-*.json"))
    assert cli.main(["plot-data", str(rec), "spectrum"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "p,p_bar,dim,product,residual"
    assert len(lines) == 1 + 4
    assert cli.main(["plot-data", str(rec), "spectrum", "--csv", str(tmp_path / "s.csv")]) == 0
    assert (tmp_path / "s.csv").read_text().splitlines() == lines
    assert (out / "spectrum.csv").exists()


def test_simulate_writes_boundaries(tmp_path):
    cfg = write_cfg(tmp_path, command="simulate", delta=0.4, window={"side": 2.0, "t_max": 0.5},
                    seed=1)
    out = tmp_path / "s"
    assert cli.main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    rows = (out / "boundaries.csv").read_text().splitlines()
    assert rows[0] == "loop,spin,x,y"
    rec = only_record(out, "simulate")
    n = int(rec.results["n_loops"]["value"])
    assert len({r.split(",")[0] for r in rows[1:]}) == n


def test_perc_small(tmp_path):
    cfg = write_cfg(tmp_path, command="perc", budgets={"trials": 30}, options={"R": 32, "rs": [16, 8, 4]})
    out = tmp_path / "pc"
    assert cli.main(["perc", "--config", cfg, "--out", str(out)]) == 0
    lines = (out / "three_arm_ladder.csv").read_text().splitlines()
    assert lines[0] == "r,R,estimate,stderr,n" and len(lines) == 4


def test_version(capsys):
    assert cli.main(["--version"]) == 0
    assert capsys.readouterr().out.startswith("loopsoup ")
