import json

import numpy as np
import pytest

from lmip.cli import main
from lmip.errors import MalformedTrace
from lmip.globalized import g_lmm_ip_solve, preset
from lmip.problems import SpectraInstance, get_desk_problem
from lmip.trace import (
    TRACE_FIELDS,
    IterateTrace,
    Status,
    read_trace,
    report_table,
    trace_to_csv,
    write_trace,
)


def d3_trace():
    p = get_desk_problem("D3")
    return g_lmm_ip_solve(p, p.start, preset("box41"))


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_trace_round_trip(tmp_path, fmt):
    res = d3_trace()
    path = write_trace(tmp_path / f"t.{fmt}", res.trace, {"label": "d3", "status": "converged"})
    back, meta = read_trace(path)
    assert back == res.trace
    assert meta["label"] == "d3"


def test_csv_header_and_meta():
    text = trace_to_csv(d3_trace().trace, {"a": 1})
    lines = text.splitlines()
    assert lines[0] == "# a: 1"
    assert lines[1] == ",".join(TRACE_FIELDS)


def test_malformed_traces(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(MalformedTrace):
        read_trace(empty)
    bad = tmp_path / "bad.csv"
    bad.write_text("k,normF\n0,1.0\n")
    with pytest.raises(MalformedTrace):
        read_trace(bad)
    rec = IterateTrace(0, 1.0, 0.5, "init", 0.0, 0, 0, 0, 0.0, 0.0)
    unordered = write_trace(tmp_path / "u.csv", [rec, rec])
    with pytest.raises(MalformedTrace):
        read_trace(unordered)
    nan = write_trace(tmp_path / "n.csv", [IterateTrace(0, float("nan"), 0.5, "init",
                                                        0.0, 0, 0, 0, 0.0, 0.0)])
    with pytest.raises(MalformedTrace):
        read_trace(nan)
    with pytest.raises(MalformedTrace):
        read_trace(tmp_path / "missing.csv")


def test_report_single_and_pair():
    res = d3_trace()
    text, summaries = report_table([(res.trace, {"status": "converged"})], ["one"])
    assert "one" in text and summaries[0]["It"] == res.n_iter
    assert summaries[0]["Fe"] == res.n_fev
    short = res.trace[:2]
    text, summaries = report_table([(res.trace, {}), (short, {})])
    assert [s["label"] for s in summaries] == ["run1", "run2"]
    assert len(text.splitlines()) == 2 + len(res.trace) + 1 + 4
    with pytest.raises(MalformedTrace):
        report_table([])


def test_cli_run_writes_trace(tmp_path, capsys):
    code = main(["run", "--problem", "desk:D3", "--out", str(tmp_path), "--label", "d3"])
    assert code == 0
    out = capsys.readouterr().out
    assert out.startswith("d3: It=") and "status=converged" in out
    trace, meta = read_trace(tmp_path / "d3.csv")
    assert meta["status"] == "converged" and int(meta["It"]) == len(trace) - 1
    assert int(meta["Fe"]) == 1 + int(meta["It"]) + sum(t.backtracks for t in trace)


def test_cli_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("LMIP_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["run", "--problem", "desk:D1", "--format", "json", "--label", "d1"]) == 0
    doc = json.loads((tmp_path / "env" / "d1.json").read_text())
    assert doc["fields"] == list(TRACE_FIELDS)


@pytest.mark.parametrize("argv,code", [
    (["--problem", "desk:D3", "--max-iters", "1", "--tol-F", "1e-14"], 2),
    (["--problem", "desk:D4", "--x0", "0.9,0.9", "--max-backtracks", "0"], 3),
    (["--problem", "desk:D3", "--x0", "0,0"], 5),
    (["--problem", "desk:D3", "--projection", "fwp"], 4),
    (["--problem", "desk:D3", "--method", "local", "--projection", "fwp"], 4),
    (["--problem", "desk:D99"], 4),
    (["--problem", "spectra:5,3"], 4),
    (["--problem", "desk:D3", "--gamma", "2.0"], 4),
    (["--problem", "desk:D3", "--x0", "a,b"], 4),
    (["--problem", "desk:D3", "--method", "sideways"], 4),
])
def test_cli_exit_codes(tmp_path, argv, code):
    assert main(["run", *argv, "--out", str(tmp_path)]) == code


def test_cli_report(tmp_path, capsys):
    for label in ("a", "b"):
        assert main(["run", "--problem", "desk:D2", "--out", str(tmp_path), "--label", label]) == 0
    capsys.readouterr()
    js = tmp_path / "s.json"
    code = main(["report", str(tmp_path / "a.csv"), str(tmp_path / "b.csv"),
                 "--labels", "first", "second", "--json", str(js)])
    assert code == 0
    text = capsys.readouterr().out
    assert "first" in text and "second" in text and "status" in text
    assert [s["label"] for s in json.loads(js.read_text())] == ["first", "second"]
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["report", str(empty)]) == 4


def test_cli_reproducible_traces(tmp_path):
    args = ["run", "--problem", "spectra:20,15,3,2", "--start-a", "0.5", "--out", str(tmp_path)]
    assert main([*args, "--label", "r1"]) in (0, 2)
    assert main([*args, "--label", "r2"]) in (0, 2)
    t1, m1 = read_trace(tmp_path / "r1.csv")
    t2, m2 = read_trace(tmp_path / "r2.csv")
    assert [t.without_timing() for t in t1] == [t.without_timing() for t in t2]
    m1.pop("label"), m2.pop("label")
    assert m1 == m2


def test_cli_local_method_matches_library(tmp_path):
    from lmip.local import LocalConfig, lmm_ip_solve

    assert main(["run", "--problem", "desk:D5", "--method", "local", "--out", str(tmp_path),
                 "--label", "loc"]) == 0
    trace, meta = read_trace(tmp_path / "loc.csv")
    p = get_desk_problem("D5")
    ref = lmm_ip_solve(p, p.start, LocalConfig(tol_F=1e-6))
    assert [t.normF for t in trace] == [t.normF for t in ref.trace]
    assert meta["method"] == "local"


def test_cli_batch(tmp_path, capsys):
    batch = tmp_path / "runs.txt"
    batch.write_text("# two runs\n--problem desk:D1 --label b1\n\n--problem desk:D3 --label b3\n")
    assert main(["batch", str(batch), "--out", str(tmp_path), "--jobs", "2"]) == 0
    out = capsys.readouterr().out
    assert "b1:" in out and "b3:" in out
    assert (tmp_path / "b1.csv").exists() and (tmp_path / "b3.csv").exists()
    batch.write_text("--problem desk:D1 --label ok\n--problem desk:D3 --max-iters 1 --tol-F 1e-14 --label cut\n")
    assert main(["batch", str(batch), "--out", str(tmp_path)]) == 2
    batch.write_text("# nothing\n")
    assert main(["batch", str(batch)]) == 4


def test_cli_instance_export_and_file_problem(tmp_path):
    path = tmp_path / "inst.txt"
    assert main(["instance", "12,10,3,4", str(path)]) == 0
    inst = SpectraInstance.load(path)
    assert inst.n == 12 and inst.m == 10
    assert main(["run", "--problem", f"file:{path}", "--projection", "exact",
                 "--out", str(tmp_path), "--label", "f"]) in (0, 2)
    trace, _ = read_trace(tmp_path / "f.csv")
    assert np.isfinite(trace[-1].normF)
    assert main(["instance", "3,9,1,0", str(tmp_path / "x.txt")]) == 4


def test_status_exit_codes():
    assert Status.CONVERGED.exit_code == 0
    assert Status.MAX_ITERS.exit_code == 2
    assert Status.LINE_SEARCH_FAIL.exit_code == 3
    assert Status.STATIONARY.exit_code == 5
