"""Deterministic synthetic stores and corpora for tests and benchmarks."""
from __future__ import annotations

import numpy as np

from .config import HierarchyConfig
from .ingest import STOPWORDS, domain_table
from .records import DialogueTurn, ExtractionRecord
from .store import MemoryStore, _Layer, insert
from .validation import as_float32_exact

# question counts per task type in LoCoMo; used only as segment proportions
TASK_MIX = (("single_hop", 2705), ("multi_hop", 1104), ("temporal", 1547),
            ("open_domain", 285), ("adversarial", 1871))

NOUNS = """
anchor apron arrow atlas badge balloon banner barrel basket beacon blanket bottle bracelet bridge
bucket button cabin candle canvas carpet castle chalk chimney clock compass cottage crayon crown
curtain cushion diamond drawer engine envelope fabric feather fence flag flute forest fountain
glove hammer harp helmet island jacket jewel kettle ladder lantern leaf lemon locket magnet marble
meadow mirror mitten needle notebook orchard paddle parcel pebble pencil pillow planet pocket
puzzle quilt ribbon river rocket saddle scarf shovel signal silver statue stencil tablecloth
teapot thimble ticket tower trumpet tunnel umbrella valley velvet wagon wallet whistle window
""".split()

FILLERS = ("and so on", "for a while", "again and again", "with the others", "all the time", "at the end")


def random_unit(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    v = rng.standard_normal((n, dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return as_float32_exact(v)


def uniform_tree(domains: int, fanout: int, *, levels: int = 4, dim: int = 8, seed: int = 0,
                 config: HierarchyConfig | None = None) -> MemoryStore:
    """Full tree: ``domains`` roots, every interior node has ``fanout`` children.

    Built column-wise rather than through :func:`insert`, so trees with
    millions of episodes stay cheap. Vectors are random unit vectors.
    """
    cfg = config or HierarchyConfig(levels=levels, dim=dim)
    store = MemoryStore(cfg)
    rng = np.random.default_rng(seed)
    layers = []
    n = domains
    for depth in range(cfg.levels):
        episodes = depth == cfg.levels - 1
        layer = _Layer(cfg.dim, episodes, capacity=n)
        layer.size = n
        layer.vectors[:n] = random_unit(rng, n, cfg.dim)
        layer.live[:n] = True
        layer.parents[:n] = -1 if depth == 0 else np.arange(n) // fanout
        if episodes:
            layer.labels = [""] * n
            layer.texts = ["synthetic episode"] * n
            layer.profiles = [""] * n
            layer.timestamps[:n] = 1.0
            layer.weight[:n] = 1.0
            layer.strength[:n] = cfg.min_strength
            layer.last_access[:n] = 1.0
            layer.decay_anchor[:n] = 1.0
        else:
            layer.labels = [f"L{depth + 1}-{r}" for r in range(n)]
            layer.children = [list(range(r * fanout, (r + 1) * fanout)) for r in range(n)]
            layer.sums[:n] = layer.vectors[:n]
            layer.counts[:n] = 1
        layers.append(layer)
        n *= fanout
    store._layers = layers
    return store


def random_shape(rng: np.random.Generator, levels: int, max_fanout: int) -> list[tuple[int, ...]]:
    """Root-to-episode index paths of a random tree with fan-out in [1, max_fanout]."""
    paths: list[tuple[int, ...]] = [()]
    for _ in range(levels):
        paths = [p + (i,) for p in paths for i in range(int(rng.integers(1, max_fanout + 1)))]
    return paths


def random_store(rng: np.random.Generator, *, levels: int = 4, max_fanout: int = 5, dim: int = 32,
                 min_episodes: int = 50, max_episodes: int = 500) -> MemoryStore:
    """A store built through :func:`insert` whose shape is a random tree.

    Each distinct interior prefix gets its own random unit vector, so
    identical prefixes merge (cosine 1) and distinct ones do not.
    """
    while True:
        paths = random_shape(rng, levels, max_fanout)
        if min_episodes <= len(paths) <= max_episodes:
            break
    cfg = HierarchyConfig(levels=levels, dim=dim)
    store = MemoryStore(cfg)
    prefix_vec: dict[tuple[int, ...], np.ndarray] = {}
    for i, path in enumerate(paths):
        vecs = []
        for d in range(1, levels):
            key = path[:d]
            if key not in prefix_vec:
                prefix_vec[key] = random_unit(rng, 1, dim)[0]
            vecs.append(prefix_vec[key])
        vecs.append(random_unit(rng, 1, dim)[0])
        labels = ["/".join(map(str, path[:d])) for d in range(1, levels)]
        rec = ExtractionRecord(domain=labels[0], category=labels[1] if levels > 2 else "c",
                               trace=labels[2] if levels > 3 else "", episode_text=f"episode {i}",
                               timestamp=1.0 + i, extra_labels=tuple(labels[3:]))
        insert(store, rec, np.array(vecs))
    return store


def _vocab():
    taken = set(STOPWORDS)
    cats = []
    for dom in domain_table()["domains"]:
        taken.update(dom["keywords"])
        for name, kws in dom["categories"].items():
            taken.update(kws)
            cats.append((dom["name"], dom["keywords"], name, kws))
    nouns = [w for w in NOUNS if w not in taken]
    return cats, nouns


def synthetic_corpus(n_turns: int, *, seed: int = 0, pool: int = 6,
                     start: float = 1_700_000_000.0) -> list[DialogueTurn]:
    """Turns spread over the stub table's categories, split into task segments.

    Every turn opens with two nouns from its category's pool of ``pool``
    nouns, so the stub's keyword trace (and with it the trace fan-out per
    category) is bounded while episode texts stay unique.
    """
    rng = np.random.default_rng(seed)
    cats, nouns = _vocab()
    pools = [list(rng.choice(nouns, size=pool, replace=False)) for _ in cats]
    weights = np.array([w for _, w in TASK_MIX], dtype=float)
    bounds = np.floor(np.cumsum(weights) / weights.sum() * n_turns).astype(int)
    turns = []
    seg = 0
    for i in range(n_turns):
        while i >= bounds[seg]:
            seg += 1
        c = int(rng.integers(len(cats)))
        _, dom_kws, _, cat_kws = cats[c]
        a, b = rng.choice(len(pools[c]), size=2, replace=False)
        text = (f"{pools[c][a]} {pools[c][b]} {cat_kws[int(rng.integers(len(cat_kws)))]} "
                f"{dom_kws[int(rng.integers(len(dom_kws)))]} {FILLERS[int(rng.integers(len(FILLERS)))]} {i}")
        turns.append(DialogueTurn(
            session_id=TASK_MIX[seg][0],
            turn_id=i,
            speaker="user" if i % 2 == 0 else "assistant",
            text=text,
            timestamp=start + 60.0 * i,
            task=TASK_MIX[seg][0],
        ))
    return turns
