import csv

import numpy as np

from spreadcodes.cli import bench_rows, load_run_config, main
from spreadcodes.core import load_family
from spreadcodes.generators import gold_family


def test_generate_and_eval(tmp_path, capsys):
    out = tmp_path / "gold.txt"
    assert main(["generate", "--family", "gold", "--degree", "5", "--acz-only", "--out", str(out)]) == 0
    fam = load_family(out)
    assert fam.n == 31 and fam.m < 33
    dump = tmp_path / "corr.csv"
    assert main(["eval", "--in", str(out), "--dump-correlations", str(dump)]) == 0
    text = capsys.readouterr().out
    assert "n=31" in text and f"acz_count={fam.m}" in text and f"J={fam.m}" in text
    with open(dump) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["i", "j", "k", "value"]
    assert len(rows) - 1 == fam.m * (fam.m + 1) // 2 * 31
    assert rows[1] == ["0", "0", "0", "31"]


def test_generate_weil_and_random(tmp_path):
    assert main(["generate", "--family", "weil", "--p", "11", "--out", str(tmp_path / "w.txt")]) == 0
    assert load_family(tmp_path / "w.txt").m == 5
    assert main(["generate", "--family", "random", "--n", "6", "--m", "2", "--out", str(tmp_path / "r.txt")]) == 0
    assert main(["generate", "--family", "weil", "--p", "9", "--out", str(tmp_path / "x.txt")]) == 1
    assert main(["generate", "--family", "gold", "--out", str(tmp_path / "x.txt")]) == 1


def test_run_with_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# small run\nn = 15\nm = 3\nblock_size = 2\nmax_iters = 20\nseed = 3\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 0
    text = capsys.readouterr().out
    assert "feasible=true" in text and "stage_two_iterations=" in text
    assert (tmp_path / "out" / "history.csv").exists()


def test_run_usage_errors(tmp_path, capsys):
    assert main(["run", "--m", "3"]) == 1
    assert main(["run", "--n", "15", "--m", "3", "--solver", "cplex"]) == 1
    assert main(["run", "--n", "30", "--m", "3", "--init", "gold"]) == 1
    bad = tmp_path / "bad.cfg"
    bad.write_text("n = 5\ncolour = red\n")
    assert main(["run", "--config", str(bad)]) == 1
    assert main(["frobnicate"]) == 1


def test_run_exits_two_when_stage_one_fails(tmp_path):
    # all-ones codes are far from ACZ; one iteration cannot repair them
    path = tmp_path / "ones.txt"
    path.write_text("9 2\n" + "000000000\n" * 2)
    assert main(["run", "--n", "9", "--m", "2", "--init", f"file:{path}", "--max-iters", "1"]) == 2


def test_config_parser_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("n = 7\nm=2\ntime-limit = 1.5\n")
    assert load_run_config(cfg) == {"n": 7, "m": 2, "time_limit": 1.5}


def test_bench(tmp_path, capsys):
    assert main(["bench", "--n", "31", "--m", "6", "--block-size", "6", "--active-cols-list", "1,3", "--repeats", "2"]) == 0
    rows = list(csv.reader(capsys.readouterr().out.splitlines()))
    assert rows[0] == ["active_cols", "mean_build_s", "mean_solve_s", "mean_total_s", "repeats"]
    assert [r[0] for r in rows[1:]] == ["1", "3"]
    assert main(["bench", "--n", "31", "--m", "6", "--block-size", "6", "--active-cols-list", "7", "--repeats", "1"]) == 1
    rows = bench_rows(15, 3, 3, [1, 3], repeats=1)
    assert all(r["mean_total_s"] >= r["mean_solve_s"] for r in rows)
