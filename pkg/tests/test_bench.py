from __future__ import annotations

import csv
import json

from conftest import CORPUS
from hiermem.bench import COLUMNS, BenchConfig, bench
from hiermem.config import HierarchyConfig
from hiermem.ingest import load_corpus
from hiermem.synthetic import synthetic_corpus


def small_cfg(**kw) -> BenchConfig:
    return BenchConfig(hierarchy=HierarchyConfig(dim=32), **kw)


def test_checkpoints_on_stride_and_task_boundaries():
    turns = load_corpus(CORPUS)
    report = bench(turns, small_cfg())
    tasks = [c.tasks for c in report.checkpoints]
    boundaries = [i + 1 for i in range(len(turns)) if i + 1 == len(turns) or turns[i + 1].task != turns[i].task]
    assert set(tasks) == set(range(10, len(turns) + 1, 10)) | set(boundaries)
    assert tasks == sorted(tasks)
    assert [s.task for s in report.segments] == ["single_hop", "multi_hop", "temporal"]


def test_flat_ops_equal_episode_count():
    report = bench(synthetic_corpus(600, seed=3), small_cfg(query_every=7))
    assert all(c.flat_ops == c.episodes for c in report.checkpoints)
    assert report.checkpoints[-1].episodes == 600


def test_sim_op_columns_are_deterministic():
    turns = synthetic_corpus(300, seed=5)
    a = bench(turns, small_cfg())
    b = bench(turns, small_cfg())
    assert a.sim_op_columns() == b.sim_op_columns()


def test_query_stride_does_not_move_checkpoint_ops():
    turns = synthetic_corpus(300, seed=5)
    a = bench(turns, small_cfg(query_every=1))
    b = bench(turns, small_cfg(query_every=10))
    assert a.sim_op_columns() == b.sim_op_columns()


def test_routed_growth_is_sublinear():
    report = bench(synthetic_corpus(3000, seed=1), small_cfg(query_every=25))
    cps = report.checkpoints
    a, b, c = cps[len(cps) // 10], cps[len(cps) // 2], cps[-1]

    def slope(lo, hi):
        return (hi.hier_ops - lo.hier_ops) / (hi.episodes - lo.episodes)

    assert slope(b, c) < slope(a, b) < 1.0
    assert c.hier_ops < c.flat_ops / 5


def test_writes_json_and_tsv(tmp_path):
    report = bench(load_corpus(CORPUS), small_cfg())
    jpath, tpath = report.write(tmp_path / "r.json")
    data = json.loads(jpath.read_text())
    assert data["dim"] == 32 and len(data["checkpoints"]) == len(report.checkpoints)
    assert data["config"]["checkpoint_every"] == 10
    rows = list(csv.DictReader(tpath.read_text().splitlines(), delimiter="\t"))
    assert tuple(rows[0])[: len(COLUMNS)] == COLUMNS
    assert int(rows[0]["flat_mults"]) == int(rows[0]["flat_ops"]) * 32
    table = report.summary_table()
    assert table.count("  routed  ") == 3 and "speedup" in table
