import csv
import json
import subprocess
import sys

import pytest

from optboost.cli import EXIT_ERROR, EXIT_OK, EXIT_PERFECT, EXIT_WEAK, main
from optboost.corpus import hand_toy, separable_toys
from optboost.reports import DICHOTOMY_COLUMNS, EXAMPLE_COLUMNS, ITERATION_COLUMNS


@pytest.fixture
def toy(tmp_path):
    p = tmp_path / "toy.csv"
    p.write_text("x,label\n0,1\n1,-1\n2,1\n")
    return p


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_run_toy_1000(toy, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--data", str(toy), "--iters", "1000", "--out", str(out)]) == EXIT_OK
    lines = (out / "trace.jsonl").read_text().splitlines()
    assert len(lines) == 1 + 1000 + 1
    assert json.loads(lines[-1]) == {"halt": "t_max"}
    for name, cols in (("examples.csv", EXAMPLE_COLUMNS), ("iterations.csv", ITERATION_COLUMNS),
                       ("dichotomies.csv", DICHOTOMY_COLUMNS)):
        rows = _rows(out / name)
        assert tuple(rows[0]) == cols
        assert all(len(r) == len(cols) for r in rows)
    assert len(_rows(out / "iterations.csv")) == 1001
    assert "halt=t_max" in capsys.readouterr().out


def test_all_positive_labels_exit_3(tmp_path):
    p = tmp_path / "pos.csv"
    p.write_text("0,1\n1,1\n2,1\n")
    assert main(["run", "--data", str(p), "--iters", "10", "--out", str(tmp_path / "o")]) == EXIT_PERFECT
    lines = (tmp_path / "o" / "trace.jsonl").read_text().splitlines()
    assert len(lines) == 2 and json.loads(lines[1])["halt"] == "perfect_hypothesis"


def test_weak_learning_exit_2(tmp_path):
    d = tmp_path / "d.csv"
    d.write_text("0,1\n1,1\n")
    h = tmp_path / "h.csv"
    h.write_text("1,-1\n-1,1\n")
    assert main(["run", "--data", str(d), "--hypotheses", str(h), "--iters", "5",
                 "--out", str(tmp_path / "o")]) == EXIT_WEAK


def test_unreadable_path(tmp_path):
    assert main(["run", "--data", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == EXIT_ERROR


def test_bad_config(toy, tmp_path):
    assert main(["run", "--data", str(toy), "--sv-delta", "0", "--out", str(tmp_path)]) == EXIT_ERROR


def test_verify_round_trip(toy, tmp_path):
    out = tmp_path / "o"
    main(["run", "--data", str(toy), "--iters", "300", "--out", str(out), "--emit-weights"])
    rc = main(["verify", "--trace", str(out / "trace.jsonl"), "--data", str(toy)])
    assert rc == EXIT_OK
    doc = json.loads((out / "certification.json").read_text())
    assert doc and all(v["status"] != "fail" for v in doc.values())


def test_verify_tampered(toy, tmp_path):
    out = tmp_path / "o"
    main(["run", "--data", str(toy), "--iters", "50", "--out", str(out)])
    p = out / "trace.jsonl"
    lines = p.read_text().splitlines()
    rec = json.loads(lines[5])
    rec["edge"] *= 1 + 1e-6
    lines[5] = json.dumps(rec)
    p.write_text("\n".join(lines) + "\n")
    report = tmp_path / "cert.json"
    assert main(["verify", "--trace", str(p), "--data", str(toy), "--report", str(report)]) == EXIT_ERROR
    doc = json.loads(report.read_text())
    assert doc["record_replay"]["status"] == "fail"


def test_verify_mismatched_dataset(toy, tmp_path):
    out = tmp_path / "o"
    main(["run", "--data", str(toy), "--iters", "20", "--out", str(out)])
    other = tmp_path / "other.csv"
    other.write_text("x,label\n0,1\n1,-1\n3,1\n")
    report = tmp_path / "cert.json"
    rc = main(["verify", "--trace", str(out / "trace.jsonl"), "--data", str(other), "--report", str(report)])
    assert rc == EXIT_ERROR
    doc = json.loads(report.read_text())
    assert doc["digest"]["status"] == "fail"
    assert "digest" in doc["digest"]["detail"]


def test_report_from_trace(toy, tmp_path):
    out = tmp_path / "o"
    main(["run", "--data", str(toy), "--iters", "30", "--out", str(out)])
    rep = tmp_path / "rep"
    assert main(["report", "--trace", str(out / "trace.jsonl"), "--data", str(toy), "--out", str(rep)]) == EXIT_OK
    it = _rows(rep / "iterations.csv")
    assert it[1][:3] == ["0", "0.33333333333333331", "0.34657359027997264"]
    ex = _rows(rep / "examples.csv")
    assert len(ex) == 4 and all(r[1] != "" for r in ex[1:])
    for name in ("examples.csv", "iterations.csv", "dichotomies.csv"):
        assert (rep / name).read_bytes() == (out / name).read_bytes()


def test_report_header_only_trace(toy, tmp_path):
    out = tmp_path / "o"
    main(["run", "--data", str(toy), "--iters", "5", "--out", str(out)])
    p = out / "trace.jsonl"
    p.write_text(p.read_text().splitlines()[0] + "\n")
    assert main(["report", "--trace", str(p), "--data", str(toy), "--out", str(tmp_path / "r")]) == EXIT_ERROR


def test_hand_toy_matrix_source(tmp_path):
    data, pool = hand_toy()
    out = tmp_path / "o"
    assert main(["run", "--data", str(data), "--hypotheses", str(pool), "--iters", "2",
                 "--out", str(out)]) == EXIT_OK
    rows = _rows(out / "iterations.csv")
    assert rows[1][1] == "0.33333333333333331" and rows[2][1] == "0.5"


@pytest.mark.parametrize("name", sorted(separable_toys()))
def test_round_trip_bundled_corpus(name, tmp_path):
    path = separable_toys()[name]
    out = tmp_path / "o"
    assert main(["run", "--data", str(path), "--iters", "500", "--out", str(out)]) == EXIT_OK
    assert main(["verify", "--trace", str(out / "trace.jsonl"), "--data", str(path)]) == EXIT_OK


def test_corpus_and_round_trip(tmp_path):
    corpus = tmp_path / "c"
    assert main(["corpus", "--seed", "11", "--out", str(corpus), "--count", "4"]) == EXIT_OK
    for k in range(4):
        d, h = corpus / f"data_{k:03d}.csv", corpus / f"pool_{k:03d}.csv"
        out = tmp_path / f"o{k}"
        rc = main(["run", "--data", str(d), "--hypotheses", str(h), "--iters", "200", "--out", str(out)])
        assert rc in (EXIT_OK, EXIT_WEAK, EXIT_PERFECT)
        assert main(["verify", "--trace", str(out / "trace.jsonl"), "--data", str(d),
                     "--hypotheses", str(h)]) == EXIT_OK


def test_module_entry_point(toy, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "optboost", "run", "--data", str(toy), "--iters", "3",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
