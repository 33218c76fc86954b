"""Snapshot directories.

Layout::

    manifest.json        format version, config, per-layer counts, checksums
    layer<i>.meta.jsonl  one JSON record per node, in row order
    layer<i>.vec         little-endian float32, row-major, dim values per row
    layer<i>.acc         interior layers only: float64 merge accumulators
    remap.json           only when tombstones were dropped: old row -> new row
                         (-1 for dropped rows)

Only live nodes are written, so rows are renumbered densely on save. Writes
go to a sibling temp directory that is renamed into place.
"""
from __future__ import annotations

import hashlib
import json
import os
import shutil
import tempfile
from pathlib import Path

import numpy as np

from .config import HierarchyConfig
from .exceptions import (
    ChecksumError,
    IntegrityError,
    SnapshotError,
    TruncatedSnapshotError,
    VersionMismatchError,
)
from .store import MemoryStore, NodeId, _Layer, verify_integrity

FORMAT_NAME = "hiermem-snapshot"
FORMAT_VERSION = 1


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _dump_line(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":")) + "\n"


def _write_snapshot(store: MemoryStore, out: Path) -> dict:
    L = store.levels
    remaps: list[np.ndarray] = []
    for layer in store._layers:
        new_row = np.full(layer.size, -1, dtype=np.int64)
        live = layer.live_rows()
        new_row[live] = np.arange(live.size)
        remaps.append(new_row)

    layers_meta = []
    files: dict[str, str] = {}
    for depth, layer in enumerate(store._layers):
        rows = layer.live_rows()
        i = depth + 1
        parent_map = remaps[depth - 1] if depth > 0 else None
        child_map = remaps[depth + 1] if depth < L - 1 else None
        with open(out / f"layer{i}.meta.jsonl", "w", encoding="utf-8") as fh:
            for r in rows:
                r = int(r)
                p = int(layer.parents[r])
                rec = {"label": layer.labels[r], "parent": int(parent_map[p]) if p >= 0 else -1}
                if layer.episodes:
                    rec.update(
                        text=layer.texts[r],
                        profile=layer.profiles[r],
                        timestamp=float(layer.timestamps[r]),
                        weight=float(layer.weight[r]),
                        strength=float(layer.strength[r]),
                        last_access=float(layer.last_access[r]),
                        decay_anchor=float(layer.decay_anchor[r]),
                        access_count=int(layer.access_count[r]),
                    )
                else:
                    rec["children"] = [int(child_map[c]) for c in layer.children[r]]
                    rec["count"] = int(layer.counts[r])
                fh.write(_dump_line(rec))
        layer.vectors[rows].astype("<f4").tofile(out / f"layer{i}.vec")
        names = [f"layer{i}.meta.jsonl", f"layer{i}.vec"]
        if not layer.episodes:
            layer.sums[rows].astype("<f8").tofile(out / f"layer{i}.acc")
            names.append(f"layer{i}.acc")
        for name in names:
            files[name] = _sha256(out / name)
        layers_meta.append({"layer": i, "count": int(rows.size)})

    remap_doc = {
        str(d + 1): [[int(old), int(new)] for old, new in enumerate(m) if old != new]
        for d, m in enumerate(remaps) if store._layers[d].dead
    }
    if remap_doc:
        with open(out / "remap.json", "w", encoding="utf-8") as fh:
            json.dump({"layers": remap_doc}, fh, sort_keys=True)
        files["remap.json"] = _sha256(out / "remap.json")

    digest = hashlib.sha256("".join(f"{k}={files[k]}\n" for k in sorted(files)).encode()).hexdigest()
    manifest = {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "config": store.config.to_dict(),
        "meta": store.meta,
        "layers": layers_meta,
        "files": files,
        "checksum": digest,
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def save(store: MemoryStore, path) -> dict:
    """Write a snapshot of ``store`` to directory ``path``; returns the manifest.

    The integrity check runs first and aborts with :class:`IntegrityError`.
    """
    path = Path(path)
    problems = verify_integrity(store)
    if problems:
        raise IntegrityError(problems)
    parent = path.parent if str(path.parent) else Path(".")
    tmp = Path(tempfile.mkdtemp(prefix=f".{path.name}.tmp-", dir=parent))
    try:
        with store.reading():
            manifest = _write_snapshot(store, tmp)
        old = None
        if path.exists():
            old = Path(tempfile.mkdtemp(prefix=f".{path.name}.old-", dir=parent))
            os.rename(path, old / "snap")
        os.rename(tmp, path)
        if old is not None:
            shutil.rmtree(old, ignore_errors=True)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return manifest


def read_remap(path) -> dict[int, dict[int, int]]:
    """Old-row to new-row maps for layers that had tombstones at save time."""
    f = Path(path) / "remap.json"
    if not f.exists():
        return {}
    doc = json.loads(f.read_text(encoding="utf-8"))
    return {int(layer): {old: new for old, new in pairs} for layer, pairs in doc["layers"].items()}


def _check_size(path: Path, expected: int):
    actual = path.stat().st_size if path.exists() else 0
    if actual != expected:
        raise TruncatedSnapshotError(f"{path.name}: {actual} bytes, expected {expected}")


def _read_block(path: Path, dtype: str, rows: int, dim: int) -> np.ndarray:
    _check_size(path, rows * dim * np.dtype(dtype).itemsize)
    return np.fromfile(path, dtype=dtype).reshape(rows, dim).astype(np.float64)


def load(path) -> MemoryStore:
    path = Path(path)
    mpath = path / "manifest.json"
    if not mpath.exists():
        raise SnapshotError(f"{path}: no manifest.json")
    try:
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise TruncatedSnapshotError(f"{mpath}: unreadable manifest ({exc.msg})") from None
    if manifest.get("format") != FORMAT_NAME:
        raise SnapshotError(f"{path}: not a {FORMAT_NAME} directory")
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(version, FORMAT_VERSION)

    config = HierarchyConfig.from_dict(manifest["config"])
    D, L = config.dim, config.levels
    counts = [int(m["count"]) for m in manifest["layers"]]
    if len(counts) != L:
        raise SnapshotError(f"{path}: manifest lists {len(counts)} layers, config has {L}")

    files = manifest["files"]
    digest = hashlib.sha256("".join(f"{k}={files[k]}\n" for k in sorted(files)).encode()).hexdigest()
    if digest != manifest.get("checksum"):
        raise ChecksumError(f"{path}: manifest checksum does not match its file list")
    for name in files:
        if not (path / name).exists():
            raise TruncatedSnapshotError(f"{path}: missing {name}")
    for depth, n in enumerate(counts):
        _check_size(path / f"layer{depth + 1}.vec", n * D * 4)
        if depth < L - 1:
            _check_size(path / f"layer{depth + 1}.acc", n * D * 8)
    for name, want in files.items():
        if _sha256(path / name) != want:
            raise ChecksumError(f"{path}: checksum mismatch in {name}")

    store = MemoryStore(config)
    store.meta = dict(manifest.get("meta") or {})

    layers = []
    for depth, n in enumerate(counts):
        i = depth + 1
        episodes = depth == L - 1
        with open(path / f"layer{i}.meta.jsonl", encoding="utf-8") as fh:
            recs = [json.loads(line) for line in fh]
        if len(recs) != n:
            raise TruncatedSnapshotError(f"layer{i}.meta.jsonl has {len(recs)} records, manifest says {n}")
        layer = _Layer(D, episodes, capacity=max(n, 16))
        layer.reserve(n)
        layer.size = n
        layer.vectors[:n] = _read_block(path / f"layer{i}.vec", "<f4", n, D)
        layer.live[:n] = True
        layer.labels = [r["label"] for r in recs]
        layer.parents[:n] = [r["parent"] for r in recs]
        if episodes:
            layer.texts = [r["text"] for r in recs]
            layer.profiles = [r["profile"] for r in recs]
            for col in ("timestamp", "weight", "strength", "last_access", "decay_anchor", "access_count"):
                target = "timestamps" if col == "timestamp" else col
                getattr(layer, target)[:n] = [r[col] for r in recs]
        else:
            layer.sums[:n] = _read_block(path / f"layer{i}.acc", "<f8", n, D)
            layer.children = [list(r["children"]) for r in recs]
            layer.counts[:n] = [r["count"] for r in recs]
        layers.append(layer)
    store._layers = layers
    problems = verify_integrity(store)
    if problems:
        raise SnapshotError(f"{path}: loaded store is inconsistent: {problems[0]}")
    return store


def remap_id(remap: dict[int, dict[int, int]], node: NodeId) -> NodeId:
    """Translate a pre-save node id through a snapshot's remap table."""
    table = remap.get(node.layer)
    if not table:
        return node
    return NodeId(node.layer, table.get(node.row, node.row))
