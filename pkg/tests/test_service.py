from __future__ import annotations

import json
import threading

import numpy as np
import pytest
from fastapi.testclient import TestClient

from conftest import CORPUS
import hiermem.service as service
from hiermem.cli import main
from hiermem.encoder import HashEmbedder
from hiermem.persistence import load
from hiermem.service import create_app


@pytest.fixture
def store_dir(tmp_path):
    d = tmp_path / "store"
    assert main(["ingest", str(CORPUS), "--store", str(d), "--dim", "64"]) == 0
    return d


@pytest.fixture
def client(store_dir):
    store = load(store_dir)
    return TestClient(create_app(store, embedder=HashEmbedder(64), store_dir=store_dir)), store


def test_healthz(client):
    c, _ = client
    r = c.get("/healthz")
    assert r.status_code == 200 and r.text == "ok"


def test_stats(client):
    c, store = client
    body = c.get("/stats").json()
    assert body["node_counts"] == store.node_counts() and body["episodes"] == 22


def test_retrieve_by_text(client):
    c, _ = client
    body = c.get("/retrieve", params={"q": "skiing", "n": 3, "k": 5}).json()
    assert len(body["hits"]) == 3 and body["sim_ops"] == sum(body["level_ops"])
    assert body["hits"][0]["labels"][0] == "sports"


def test_retrieve_by_vector_and_flat(client):
    c, store = client
    v = HashEmbedder(64).embed("pasta dinner").tolist()
    body = c.get("/retrieve", params={"vector": json.dumps(v), "flat": "true"}).json()
    assert body["sim_ops"] == len(store)


@pytest.mark.parametrize("params", [{"vector": json.dumps([1.0, 0.0])}, {"vector": "[1, oops"}, {}])
def test_retrieve_bad_input_is_400(client, params):
    c, _ = client
    assert c.get("/retrieve", params=params).status_code == 400


def test_feedback_clips_factor(client):
    c, store = client
    before = store.retention("4:0")
    r = c.post("/feedback", json={"episode": "4:0", "kind": "approve", "factor": 3.0,
                                  "now": before.decay_anchor})
    assert r.status_code == 200
    body = r.json()
    assert body["effective_factor"] == 1.5
    assert body["weight"] == pytest.approx(before.weight * 1.5)


def test_feedback_unknown_episode_is_404(client):
    c, _ = client
    assert c.post("/feedback", json={"episode": "4:999", "kind": "approve"}).status_code == 404


def test_feedback_bad_kind_is_400(client):
    c, _ = client
    assert c.post("/feedback", json={"episode": "4:0", "kind": "meh"}).status_code == 400


def test_ingest_decay_compact(client):
    c, store = client
    r = c.post("/ingest", json={"text": "I adopted a puppy", "timestamp": 1.75e9})
    assert r.status_code == 200 and r.json()["episode"] == "4:22"
    assert c.post("/ingest", json={"text": ""}).status_code == 400
    assert c.post("/decay", json={"now": 1.9e9}).json()["updated"] == 23
    assert c.post("/compact").json()["pruned"] > 0
    assert c.get("/stats").json()["episodes"] == 0


def test_snapshot_endpoint(client, store_dir):
    c, store = client
    c.post("/ingest", json={"text": "new memory about jazz", "timestamp": 1.75e9})
    assert c.post("/snapshot").status_code == 200
    assert len(load(store_dir)) == 23


def test_writes_get_503_during_snapshot(client, monkeypatch):
    c, _ = client
    started, release = threading.Event(), threading.Event()
    real_save = service.save

    def slow_save(store, path):
        started.set()
        release.wait(10)
        return real_save(store, path)

    monkeypatch.setattr(service, "save", slow_save)
    t = threading.Thread(target=lambda: c.post("/snapshot"))
    t.start()
    try:
        assert started.wait(10)
        assert c.post("/decay", json={"now": 1.9e9}).status_code == 503
        assert c.post("/ingest", json={"text": "blocked"}).status_code == 503
        assert c.get("/retrieve", params={"q": "skiing"}).status_code == 200
    finally:
        release.set()
        t.join(10)
    assert c.post("/decay", json={"now": 1.9e9}).status_code == 200


def test_cli_http_parity(store_dir, capsys):
    assert main(["query", "guitar practice", "--store", str(store_dir), "--json", "-n", "5", "--flat"]) == 0
    cli_rows = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    c = TestClient(create_app(load(store_dir), embedder=HashEmbedder(64)))
    http_rows = c.get("/retrieve", params={"q": "guitar practice", "n": 5, "flat": "true"}).json()["hits"]
    assert cli_rows == http_rows

    assert main(["query", "guitar practice", "--store", str(store_dir), "--json", "-n", "5", "-k", "3"]) == 0
    cli_rows = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    http_rows = c.get("/retrieve", params={"q": "guitar practice", "n": 5, "k": 3}).json()["hits"]
    assert [(r["episode"], r["similarity"]) for r in cli_rows] == [(r["episode"], r["similarity"]) for r in http_rows]
