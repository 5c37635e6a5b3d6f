import json
import subprocess
import sys

from padicah.cli import main


def _write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def _grid_doc(depth=6):
    return {"dims": 1, "seqs": [[2] * depth], "depth": depth}


def _series_doc(depth=6):
    return {
        "mode": "haar",
        "grid": _grid_doc(depth),
        "entries": [[[1], 2, 0], [[3], -1.5, 0.5]],
    }


def _family_doc(depth=6, first=1, count=5):
    return {
        "bound_c": ["1", "1"],
        "grid": _grid_doc(depth),
        "members": [
            {
                "cells": [{"ranks": [0], "indices": [0]}],
                "values": [[str(2 ** m), "1"]],
            }
            for m in range(first, first + count)
        ],
        "schema_version": 1,
    }


def test_systems_haar_json(tmp_path):
    grid = _write(tmp_path / "g.json", _grid_doc(3))
    out = tmp_path / "sys.json"
    rc = main(["systems", "--grid", grid, "--haar", "0..3", "--out", str(out)])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["schema_version"] == 1
    assert doc["grid"] == {"dims": 1, "seqs": [[2, 2, 2]], "depth": 3}
    assert len(doc["tables"]) == 4
    first = doc["tables"][0]
    assert first["system"] == "haar"
    assert first["index"] == [0]
    assert first["values"] == [["1", "1"]]


def test_systems_csv_header(tmp_path):
    grid = _write(tmp_path / "g.json", _grid_doc(3))
    out = tmp_path / "sys.csv"
    rc = main(
        ["systems", "--grid", grid, "--haar", "0,1", "--format", "csv", "--out", str(out)]
    )
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "flat_index,cell_lo,cell_hi,re,im"
    assert lines[1] == "0,0,1,1,0"
    assert lines[2] == "1,0,1/2,1,0"


def test_systems_gamma_block_json(tmp_path):
    grid = _write(tmp_path / "g.json", _grid_doc(3))
    out = tmp_path / "gb.json"
    rc = main(["systems", "--grid", grid, "--gamma-block", "2", "--out", str(out)])
    assert rc == 0
    doc = json.loads(out.read_text())
    blk = doc["gamma_blocks"][0]
    assert blk["block"] == 2
    assert blk["dim"] == 0
    mat = blk["matrix"]
    assert len(mat) == 2 and len(mat[0]) == 2
    assert abs(mat[0][0]["re"] - 2 ** -0.5) < 1e-12


def test_systems_gamma_block_csv_numbers_are_plain(tmp_path):
    grid = _write(tmp_path / "g.json", _grid_doc(3))
    out = tmp_path / "gb.csv"
    rc = main(
        ["systems", "--grid", grid, "--gamma-block", "2", "--format", "csv", "--out", str(out)]
    )
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "dim,block,row,col,re,im"
    assert lines[1] == "0,2,0,0,0.7071067811865476,0.0"


def test_systems_csv_cannot_mix_tables_and_gamma(tmp_path, capsys):
    grid = _write(tmp_path / "g.json", _grid_doc(3))
    rc = main(
        ["systems", "--grid", grid, "--haar", "1", "--gamma-block", "2", "--format", "csv"]
    )
    assert rc == 1
    assert "not both" in capsys.readouterr().err


def test_systems_requires_a_request(tmp_path, capsys):
    grid = _write(tmp_path / "g.json", _grid_doc(3))
    rc = main(["systems", "--grid", grid])
    assert rc == 1
    assert "--haar" in capsys.readouterr().err


def test_recover_haar_coefficient(tmp_path):
    series = _write(tmp_path / "s.json", _series_doc())
    family = _write(tmp_path / "f.json", _family_doc())
    out = tmp_path / "r.json"
    rc = main(
        ["recover", "--mode", "haar", "--series", series, "--family", family,
         "--index", "3", "--out", str(out)]
    )
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["mode"] == "haar"
    assert doc["index"] == [3]
    assert doc["passes"] is True
    assert doc["reference"] == {"re": -1.5, "im": 0.5}
    assert doc["scale_sq"] == 2
    assert "family" in doc


def test_recover_price_adds_gamma_cross_check(tmp_path):
    series = _write(tmp_path / "s.json", _series_doc())
    family = _write(tmp_path / "f.json", _family_doc())
    out = tmp_path / "rp.json"
    rc = main(
        ["recover", "--mode", "price", "--series", series, "--family", family,
         "--index", "2", "--out", str(out)]
    )
    assert rc == 0
    doc = json.loads(out.read_text())
    assert "gamma_reference" in doc
    assert doc["gamma_error"] <= 1e-9


def test_recover_additive_box(tmp_path):
    series = _write(tmp_path / "s.json", _series_doc())
    family = _write(tmp_path / "f.json", _family_doc())
    out = tmp_path / "ra.json"
    rc = main(
        ["recover", "--mode", "additive", "--series", series, "--family", family,
         "--box", "1:0", "--out", str(out)]
    )
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["box"] == {"ranks": [1], "indices": [0]}
    assert doc["family_ok"] is True
    assert doc["passes"] is True


def test_recover_failure_exits_two_but_writes_report(tmp_path):
    # family too short: the deep coefficient never comes back
    series = _write(
        tmp_path / "s.json",
        {
            "mode": "haar",
            "grid": _grid_doc(),
            "entries": [[[1], 2, 0], [[5], 8, 0]],
        },
    )
    family = _write(tmp_path / "f.json", _family_doc(count=2))
    out = tmp_path / "r2.json"
    rc = main(
        ["recover", "--mode", "additive", "--series", series, "--family", family,
         "--box", "full", "--out", str(out)]
    )
    assert rc == 2
    doc = json.loads(out.read_text())
    assert doc["passes"] is False


def test_recover_rejects_csv(tmp_path, capsys):
    series = _write(tmp_path / "s.json", _series_doc())
    family = _write(tmp_path / "f.json", _family_doc())
    rc = main(
        ["recover", "--mode", "haar", "--series", series, "--family", family,
         "--index", "3", "--format", "csv"]
    )
    assert rc == 1
    assert "JSON only" in capsys.readouterr().err


def test_check_family_pass_and_fail(tmp_path):
    good = _write(tmp_path / "good.json", _family_doc())
    assert main(["check-family", "--family", good]) == 0

    bad_doc = _family_doc(count=2)
    # break monotonicity: second member smaller than the first
    bad_doc["members"][1]["values"] = [["1", "1"]]
    bad = _write(tmp_path / "bad.json", bad_doc)
    out = tmp_path / "cf.json"
    rc = main(["check-family", "--family", bad, "--out", str(out)])
    assert rc == 2
    doc = json.loads(out.read_text())
    assert doc["monotone_ok"] is False
    assert doc["passes"] is False


def test_counterexample_report(tmp_path):
    out = tmp_path / "ce.json"
    rc = main(["counterexample", "--nmax", "2", "--out", str(out)])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["n_max"] == 2
    assert doc["overall_pass"] is True
    assert doc["schema_version"] == 1
    assert {"family", "failures", "recoveries", "success", "tail_check"} <= set(doc)


def test_counterexample_window_error(tmp_path, capsys):
    rc = main(["counterexample", "--nmax", "2", "--j", "5"])
    assert rc == 1
    err = capsys.readouterr().err
    assert "j=5" in err and "n_max=2" in err


def test_counterexample_j_selection(tmp_path):
    out = tmp_path / "ce.json"
    rc = main(["counterexample", "--nmax", "4", "--j", "1,3", "--out", str(out)])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert [f["j"] for f in doc["failures"]] == [1, 3]


def test_decompose_box_string(tmp_path, capsys):
    grid = _write(tmp_path / "g.json", _grid_doc(3))
    rc = main(["decompose", "--grid", grid, "--box", "1:0"])
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["count"] == 1
    assert doc["measure"] == ["1", "2"]


def test_decompose_box_from_file(tmp_path, capsys):
    grid = _write(tmp_path / "g.json", _grid_doc(3))
    box = _write(tmp_path / "box.json", {"ranks": [1], "indices": [1]})
    rc = main(["decompose", "--grid", grid, "--box", box])
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["box"] == {"ranks": [1], "indices": [1]}


def test_decompose_csv(tmp_path):
    grid = _write(tmp_path / "g2.json", {"dims": 2, "seqs": [[2, 2], [3, 3]], "depth": 2})
    out = tmp_path / "dec.csv"
    rc = main(
        ["decompose", "--grid", grid, "--box", "1:0,0:0", "--format", "csv", "--out", str(out)]
    )
    assert rc == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 4  # header + three rank-1 strips in dim 1
    assert lines[0].startswith("rank")


def test_missing_file_exit_code(capsys):
    rc = main(["check-family", "--family", "no-such-file.json"])
    assert rc == 1
    assert "missing file: no-such-file.json" in capsys.readouterr().err


def test_malformed_grid_names_the_field(tmp_path, capsys):
    bad = _write(tmp_path / "badg.json", {"dims": 1, "seqs": [[2, 1]], "depth": 2})
    rc = main(["systems", "--grid", bad, "--haar", "1"])
    assert rc == 1
    assert "seqs[0][1]" in capsys.readouterr().err


def test_thread_count_does_not_change_bytes(tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    assert main(["counterexample", "--nmax", "3", "--threads", "1", "--out", str(a)]) == 0
    assert main(["counterexample", "--nmax", "3", "--threads", "4", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_console_script_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "padicah", "counterexample", "--nmax", "1"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    doc = json.loads(proc.stdout)
    assert doc["overall_pass"] is True


def test_tolerance_flag_recorded(tmp_path):
    series = _write(tmp_path / "s.json", _series_doc())
    family = _write(tmp_path / "f.json", _family_doc())
    out = tmp_path / "r.json"
    rc = main(
        ["recover", "--mode", "haar", "--series", series, "--family", family,
         "--index", "1", "--tolerance", "1e-4", "--out", str(out)]
    )
    assert rc == 0
    assert json.loads(out.read_text())["tol"] == 1e-4
