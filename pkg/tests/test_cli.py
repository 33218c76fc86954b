from __future__ import annotations

import json
import subprocess
import sys

import pytest

from conftest import CORPUS
from hiermem.cli import main
from hiermem.persistence import load, save
from hiermem.store import MemoryStore


@pytest.fixture
def store_dir(tmp_path):
    d = tmp_path / "store"
    assert main(["ingest", str(CORPUS), "--store", str(d), "--dim", "64"]) == 0
    return d


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_ingest_creates_snapshot(store_dir, capsys):
    store = load(store_dir)
    assert len(store) == 22  # 44 turns paired into interactions
    assert store.meta["embedder"] == {"kind": "hash", "dim": 64}


def test_ingest_unpaired(tmp_path, capsys):
    code, out, _ = run(capsys, "ingest", str(CORPUS), "--store", str(tmp_path / "s"), "--no-pair", "--dim", "32")
    assert code == 0 and "44 episodes" in out


def test_query_output_format(store_dir, capsys):
    code, out, _ = run(capsys, "query", "skiing in the alps", "--store", str(store_dir), "-n", "3")
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 3
    rank, sim, weight, eid, *rest = lines[0].split()
    assert rank == "1" and eid.startswith("4:")
    assert len(sim.split(".")[1]) == 4 and len(weight.split(".")[1]) == 4
    assert " / " in lines[0]


def test_query_json_rows(store_dir, capsys):
    code, out, _ = run(capsys, "query", "pasta recipe", "--store", str(store_dir), "--json", "-n", "2", "--flat")
    rows = [json.loads(line) for line in out.splitlines()]
    assert code == 0 and [r["rank"] for r in rows] == [1, 2]
    assert {"episode", "similarity", "weight", "path", "labels", "text"} <= set(rows[0])


def test_routed_query_persists_access(store_dir, capsys):
    code, out, _ = run(capsys, "query", "guitar", "--store", str(store_dir), "-n", "1", "--json", "--now", "1.8e9")
    eid = json.loads(out)["episode"]
    r = load(store_dir).retention(eid)
    assert r.access_count == 1 and r.last_access == 1.8e9


def test_query_empty_store(tmp_path, capsys):
    d = tmp_path / "empty"
    save(MemoryStore(), d)
    code, out, err = run(capsys, "query", "anything", "--store", str(d))
    assert code == 0 and out == "" and "0 hits" in err


def test_missing_store_is_data_error(tmp_path, capsys):
    code, _, err = run(capsys, "query", "x", "--store", str(tmp_path / "nope"))
    assert code == 2 and "no store" in err


def test_feedback_unknown_id(store_dir, capsys):
    code, _, err = run(capsys, "feedback", "4:999", "approve", "--store", str(store_dir))
    assert code == 2 and "not found" in err


def test_feedback_applies_and_saves(store_dir, capsys):
    before = load(store_dir).retention("4:0")
    code, out, _ = run(capsys, "feedback", "4:0", "rebut", "--factor", "0.1", "--now",
                       str(before.last_access), "--store", str(store_dir))
    assert code == 0 and "x0.5000" in out
    assert load(store_dir).retention("4:0").weight == pytest.approx(before.weight * 0.5)


def test_decay_compact_verify(store_dir, capsys):
    assert run(capsys, "decay", "--now", "1.8e9", "--store", str(store_dir))[0] == 0
    assert load(store_dir).retention("4:0").weight == 0.01
    code, out, _ = run(capsys, "compact", "--store", str(store_dir))
    assert code == 0 and "0 episodes remain" in out
    code, out, _ = run(capsys, "verify", "--store", str(store_dir))
    assert code == 0 and "healthy" in out


def test_store_from_environment(store_dir, capsys, monkeypatch):
    monkeypatch.setenv("HMEM_STORE_DIR", str(store_dir))
    assert run(capsys, "verify")[0] == 0


@pytest.mark.parametrize("argv", [[], ["bogus"], ["query"], ["feedback", "4:0", "maybe"], ["decay"]])
def test_usage_errors(argv, capsys, monkeypatch):
    monkeypatch.delenv("HMEM_STORE_DIR", raising=False)
    assert main(argv) == 1


def test_no_store_anywhere_is_usage(capsys, monkeypatch):
    monkeypatch.delenv("HMEM_STORE_DIR", raising=False)
    assert main(["verify"]) == 1


def test_transport_error_exit_code(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("HMEM_LLM_URL", "http://127.0.0.1:9/v1/chat")
    monkeypatch.setenv("HMEM_LLM_MODEL", "m")
    code, _, err = run(capsys, "ingest", str(CORPUS), "--llm", "--store", str(tmp_path / "s"))
    assert code == 3 and "transport" in err
    assert not (tmp_path / "s").exists()


def test_bench_writes_checkpoints(tmp_path, capsys):
    out = tmp_path / "report.json"
    code, stdout, _ = run(capsys, "bench", str(CORPUS), "--out", str(out), "--dim", "64")
    assert code == 0
    report = json.loads(out.read_text())
    tasks = [c["tasks"] for c in report["checkpoints"]]
    assert {10, 20, 30, 40} <= set(tasks)
    assert tasks[-1] == 44
    assert (tmp_path / "report.tsv").read_text().startswith("tasks\t")
    assert "routed" in stdout and "speedup" in stdout


def test_bench_synthetic(tmp_path, capsys):
    code, _, _ = run(capsys, "bench", "synthetic:200", "--out", str(tmp_path / "r.json"), "--dim", "32")
    assert code == 0
    assert json.loads((tmp_path / "r.json").read_text())["checkpoints"][-1]["episodes"] == 200


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "hiermem.cli", "verify", "--store", str(tmp_path / "x")],
                          capture_output=True, text=True)
    assert proc.returncode == 2
