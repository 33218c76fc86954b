"""Episode weight evolution.

Weights decay on an exponential forgetting curve ``exp(-dt / strength)``.
Each episode keeps a decay anchor, the instant its stored weight was last
brought up to date, so repeated or split decay calls compose exactly.
Feedback multiplies the weight; approval and explicit access (touch) also
stretch the strength by ``1 + reinforcement``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .config import HierarchyConfig
from .exceptions import ValidationError
from .store import MemoryStore, NodeId, RetentionState

FACTOR_MIN = 0.5
FACTOR_MAX = 1.5


class FeedbackKind(str, Enum):
    APPROVE = "approve"
    NEUTRAL = "neutral"
    REBUT = "rebut"


@dataclass(frozen=True)
class Feedback:
    kind: FeedbackKind
    factor: float | None = None

    def __post_init__(self):
        try:
            kind = FeedbackKind(self.kind)
        except ValueError:
            raise ValidationError(f"unknown feedback kind {self.kind!r}") from None
        object.__setattr__(self, "kind", kind)
        if self.factor is not None:
            f = float(self.factor)
            if not math.isfinite(f):
                raise ValidationError(f"feedback factor must be finite, got {self.factor}")
            object.__setattr__(self, "factor", min(max(f, FACTOR_MIN), FACTOR_MAX))

    def multiplier(self, config: HierarchyConfig) -> float:
        """Effective weight multiplier.

        An external factor can only move the weight in the direction its
        kind implies; neutral feedback never rescales.
        """
        if self.kind is FeedbackKind.NEUTRAL:
            return 1.0
        if self.kind is FeedbackKind.APPROVE:
            return 1.0 + config.approve_boost if self.factor is None else max(self.factor, 1.0)
        return 1.0 - config.rebut_penalty if self.factor is None else min(self.factor, 1.0)


def _clamp(w, config: HierarchyConfig):
    return min(max(w, config.min_weight), config.max_weight)


def _settle(store: MemoryStore, row: int, now: float):
    """Apply decay pending since the anchor to one episode."""
    ep = store.episode_layer
    dt = max(now - ep.decay_anchor[row], 0.0)
    if dt > 0:
        ep.weight[row] = _clamp(ep.weight[row] * math.exp(-dt / ep.strength[row]), store.config)
        ep.decay_anchor[row] = now


def decay(store: MemoryStore, now: float) -> int:
    """Bring every live episode's weight up to ``now``; returns how many changed."""
    cfg = store.config
    now = float(now)
    with store.writing():
        ep = store.episode_layer
        rows = ep.live_rows()
        dt = now - ep.decay_anchor[rows]
        moving = dt > 0
        rows, dt = rows[moving], dt[moving]
        w = ep.weight[rows] * np.exp(-dt / ep.strength[rows])
        ep.weight[rows] = np.clip(w, cfg.min_weight, cfg.max_weight)
        ep.decay_anchor[rows] = now
        return int(rows.size)


def apply_feedback(store: MemoryStore, episode: NodeId, fb: Feedback, now: float) -> float:
    """Settle pending decay, then scale the weight; returns the new weight."""
    cfg = store.config
    now = float(now)
    with store.writing():
        row = store._locate_episode(episode)
        ep = store.episode_layer
        _settle(store, row, now)
        ep.weight[row] = _clamp(ep.weight[row] * fb.multiplier(cfg), cfg)
        if fb.kind is FeedbackKind.APPROVE:
            ep.strength[row] *= 1.0 + cfg.reinforcement
        ep.last_access[row] = max(ep.last_access[row], now)
        return float(ep.weight[row])


def touch(store: MemoryStore, episode: NodeId, now: float) -> RetentionState:
    now = float(now)
    with store.writing():
        row = store._locate_episode(episode)
        ep = store.episode_layer
        _settle(store, row, now)
        ep.strength[row] *= 1.0 + store.config.reinforcement
        ep.last_access[row] = max(ep.last_access[row], now)
        ep.access_count[row] += 1
    return store.retention(NodeId(store.levels, row))
