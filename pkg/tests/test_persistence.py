from __future__ import annotations

import json

import numpy as np
import pytest

from conftest import CORPUS, live_view
from hiermem.config import HierarchyConfig
from hiermem.encoder import HashEmbedder
from hiermem.exceptions import (
    ChecksumError,
    IntegrityError,
    SnapshotError,
    TruncatedSnapshotError,
    VersionMismatchError,
)
from hiermem.ingest import extract_stub, ingest_turn, load_corpus
from hiermem.persistence import FORMAT_VERSION, load, read_remap, remap_id, save
from hiermem.store import MemoryStore, compact, verify_integrity
from hiermem.synthetic import random_store


@pytest.fixture
def populated(rng):
    store = random_store(rng, dim=16, min_episodes=100, max_episodes=300)
    for i, nid in enumerate(store.episode_ids()[:20]):
        store.set_retention(nid, weight=0.5 + i * 0.1, strength=4000.0 + i, access_count=i)
    return store


def test_round_trip_is_exact(populated, tmp_path):
    manifest = save(populated, tmp_path / "snap")
    loaded = load(tmp_path / "snap")
    assert verify_integrity(loaded) == []
    assert loaded.config == populated.config
    assert loaded.node_counts() == populated.node_counts()
    assert [m["count"] for m in manifest["layers"]] == populated.node_counts()
    assert live_view(loaded) == live_view(populated)


def test_vector_block_layout(populated, tmp_path):
    save(populated, tmp_path / "snap")
    raw = np.fromfile(tmp_path / "snap" / "layer4.vec", dtype="<f4").reshape(-1, 16)
    np.testing.assert_array_equal(raw, populated.episode_layer.vectors[: len(populated)].astype(np.float32))
    names = sorted(p.name for p in (tmp_path / "snap").iterdir())
    assert names == ["layer1.acc", "layer1.meta.jsonl", "layer1.vec", "layer2.acc", "layer2.meta.jsonl",
                     "layer2.vec", "layer3.acc", "layer3.meta.jsonl", "layer3.vec", "layer4.meta.jsonl",
                     "layer4.vec", "manifest.json"]


def test_tombstones_dropped_with_remap(populated, tmp_path):
    ids = populated.episode_ids()
    for nid in ids[:10]:
        populated.set_retention(nid, weight=0.01)
    compact(populated)
    survivor = ids[10]
    text = populated.get_episode(survivor).text
    save(populated, tmp_path / "snap")
    remap = read_remap(tmp_path / "snap")
    assert remap[4][ids[0].row] == -1
    new_id = remap_id(remap, survivor)
    loaded = load(tmp_path / "snap")
    assert loaded.get_episode(new_id).text == text
    assert loaded.episode_layer.dead == 0
    assert len(loaded) == len(populated)
    assert live_view(loaded) == live_view(populated)


def test_no_remap_without_tombstones(populated, tmp_path):
    save(populated, tmp_path / "snap")
    assert not (tmp_path / "snap" / "remap.json").exists()
    assert read_remap(tmp_path / "snap") == {}


def test_save_to_unwritable_path(populated, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("not a directory")
    with pytest.raises(OSError):
        save(populated, blocker / "snap")
    assert blocker.read_text() == "not a directory"


def test_save_refuses_inconsistent_store(populated, tmp_path):
    populated._layers[2].children[0].append(10**6)
    with pytest.raises(IntegrityError) as exc:
        save(populated, tmp_path / "snap")
    assert exc.value.violations
    assert not (tmp_path / "snap").exists()
    assert list(tmp_path.iterdir()) == []


def test_overwrite_is_atomic_and_clean(populated, tmp_path):
    save(populated, tmp_path / "snap")
    ids = populated.episode_ids()
    populated.set_retention(ids[0], weight=2.0)
    save(populated, tmp_path / "snap")
    assert [p.name for p in tmp_path.iterdir()] == ["snap"]
    assert load(tmp_path / "snap").retention(ids[0]).weight == 2.0


def test_corrupted_vector_block(populated, tmp_path):
    save(populated, tmp_path / "snap")
    vec = tmp_path / "snap" / "layer2.vec"
    data = bytearray(vec.read_bytes())
    data[5] ^= 0xFF
    vec.write_bytes(bytes(data))
    with pytest.raises(ChecksumError):
        load(tmp_path / "snap")


def test_truncated_block(populated, tmp_path):
    save(populated, tmp_path / "snap")
    vec = tmp_path / "snap" / "layer4.vec"
    vec.write_bytes(vec.read_bytes()[:-4])
    with pytest.raises(TruncatedSnapshotError):
        load(tmp_path / "snap")


def test_missing_block(populated, tmp_path):
    save(populated, tmp_path / "snap")
    (tmp_path / "snap" / "layer3.meta.jsonl").unlink()
    with pytest.raises(TruncatedSnapshotError):
        load(tmp_path / "snap")


def test_future_version(populated, tmp_path):
    save(populated, tmp_path / "snap")
    mpath = tmp_path / "snap" / "manifest.json"
    m = json.loads(mpath.read_text())
    m["format_version"] = FORMAT_VERSION + 1
    mpath.write_text(json.dumps(m))
    with pytest.raises(VersionMismatchError) as exc:
        load(tmp_path / "snap")
    assert str(FORMAT_VERSION + 1) in str(exc.value) and str(FORMAT_VERSION) in str(exc.value)


def test_tampered_manifest_checksum(populated, tmp_path):
    save(populated, tmp_path / "snap")
    mpath = tmp_path / "snap" / "manifest.json"
    m = json.loads(mpath.read_text())
    m["files"]["layer1.vec"] = "0" * 64
    mpath.write_text(json.dumps(m))
    with pytest.raises(ChecksumError):
        load(tmp_path / "snap")


def test_not_a_snapshot(tmp_path):
    with pytest.raises(SnapshotError):
        load(tmp_path)
    (tmp_path / "manifest.json").write_text("{")
    with pytest.raises(TruncatedSnapshotError):
        load(tmp_path)


def test_empty_store_round_trip(tmp_path):
    save(MemoryStore(HierarchyConfig(levels=3, dim=8)), tmp_path / "snap")
    loaded = load(tmp_path / "snap")
    assert loaded.node_counts() == [0, 0, 0]


def test_loaded_store_keeps_merging(tmp_path):
    store = MemoryStore(HierarchyConfig(dim=64))
    emb = HashEmbedder(64)
    turns = load_corpus(CORPUS)
    for t in turns[:20]:
        ingest_turn(store, emb, extract_stub, t)
    save(store, tmp_path / "snap")
    loaded = load(tmp_path / "snap")
    for t in turns[20:]:
        ingest_turn(store, emb, extract_stub, t)
        ingest_turn(loaded, emb, extract_stub, t)
    assert live_view(loaded) == live_view(store)


def test_stub_ingest_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        store = MemoryStore(HierarchyConfig(dim=64))
        for t in load_corpus(CORPUS):
            ingest_turn(store, HashEmbedder(64), extract_stub, t)
        save(store, tmp_path / name)
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes(), f.name
