"""Plain record types passed between ingest and the store."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

from .exceptions import ValidationError

LABEL_MAX_CHARS = 128
ELLIPSIS = "…"


def clip_label(text: str) -> str:
    """Trim whitespace; cut labels longer than LABEL_MAX_CHARS, ellipsis included."""
    text = (text or "").strip()
    if len(text) > LABEL_MAX_CHARS:
        text = text[: LABEL_MAX_CHARS - len(ELLIPSIS)].rstrip() + ELLIPSIS
    return text


@dataclass(frozen=True)
class DialogueTurn:
    session_id: str
    turn_id: int
    speaker: str
    text: str
    timestamp: float
    task: str | None = None


@dataclass(frozen=True)
class ExtractionRecord:
    """Four-level structured view of one interaction.

    ``domain``/``category``/``trace`` label the interior levels of a
    default 4-level hierarchy. Deeper hierarchies take the additional
    interior labels from ``extra_labels`` (placed below ``trace``);
    shallower ones drop labels from the bottom.
    """

    domain: str
    category: str
    trace: str
    episode_text: str
    profile: str = ""
    timestamp: float = 0.0
    extra_labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "domain", clip_label(self.domain))
        object.__setattr__(self, "category", clip_label(self.category))
        object.__setattr__(self, "trace", clip_label(self.trace))
        object.__setattr__(self, "extra_labels", tuple(clip_label(x) for x in self.extra_labels))

    def path_labels(self, levels: int) -> tuple[str, ...]:
        """Labels for the ``levels - 1`` interior layers, top-down."""
        interior = levels - 1
        labels = (self.domain, self.category, self.trace) + self.extra_labels
        if interior <= 3:
            return labels[:interior]
        if len(labels) != interior:
            raise ValidationError(
                f"record supplies {len(labels) + 1} levels, hierarchy needs {levels}"
            )
        return labels

    def validate(self) -> ExtractionRecord:
        if not self.domain:
            raise ValidationError("record field 'domain' is empty")
        if not self.category:
            raise ValidationError("record field 'category' is empty")
        if not self.episode_text.strip():
            raise ValidationError("record field 'episode_text' is empty")
        if not self.timestamp > 0:
            raise ValidationError(f"record timestamp must be positive, got {self.timestamp}")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["extra_labels"] = list(self.extra_labels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ExtractionRecord:
        d = dict(d)
        d["extra_labels"] = tuple(d.get("extra_labels", ()))
        return cls(**d)
