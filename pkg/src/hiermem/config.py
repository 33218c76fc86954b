from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

from .exceptions import ConfigError

MIN_LEVELS = 2
MAX_LEVELS = 6


@dataclass(frozen=True)
class HierarchyConfig:
    """Shape of the hierarchy plus retrieval and retention parameters.

    ``levels`` counts every layer including the episode layer, so the
    default of 4 gives domain / category / trace / episode.
    """

    levels: int = 4
    dim: int = 384
    k_per_level: int = 10
    final_n: int = 10
    merge_threshold: float = 0.85
    # retention
    min_strength: float = 3600.0
    reinforcement: float = 0.5
    approve_boost: float = 0.2
    rebut_penalty: float = 0.5
    min_weight: float = 0.01
    max_weight: float = 10.0
    prune_epsilon: float = 0.0
    # rank episodes by sim * weight**gamma instead of raw similarity
    blend_gamma: float | None = None

    def __post_init__(self):
        _check_int(self, "levels", MIN_LEVELS, MAX_LEVELS)
        _check_int(self, "dim", 1)
        _check_int(self, "k_per_level", 1)
        _check_int(self, "final_n", 1)
        if not 0.0 < self.merge_threshold <= 1.0:
            raise ConfigError("merge_threshold", f"must lie in (0, 1], got {self.merge_threshold}")
        if not self.min_strength > 0:
            raise ConfigError("min_strength", "must be positive")
        if self.reinforcement < 0:
            raise ConfigError("reinforcement", "must be non-negative")
        if self.approve_boost < 0:
            raise ConfigError("approve_boost", "must be non-negative")
        if not 0.0 <= self.rebut_penalty < 1.0:
            raise ConfigError("rebut_penalty", "must lie in [0, 1)")
        if not 0.0 < self.min_weight <= 1.0 <= self.max_weight:
            raise ConfigError("min_weight", "need 0 < min_weight <= 1 <= max_weight")
        if self.prune_epsilon < 0:
            raise ConfigError("prune_epsilon", "must be non-negative")
        if self.blend_gamma is not None and self.blend_gamma < 0:
            raise ConfigError("blend_gamma", "must be non-negative or None")

    def replace(self, **changes) -> HierarchyConfig:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> HierarchyConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown field")
        return cls(**data)


def _check_int(cfg, name, lo, hi=None):
    value = getattr(cfg, name)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(name, f"must be an integer, got {value!r}")
    if value < lo or (hi is not None and value > hi):
        bound = f"[{lo}, {hi}]" if hi is not None else f">= {lo}"
        raise ConfigError(name, f"must be {bound}, got {value}")
