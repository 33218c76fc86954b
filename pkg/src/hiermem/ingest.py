"""From dialogue turns to stored episodes.

Extractors are callables ``turn -> ExtractionRecord``. :func:`extract_stub`
is rule-based and deterministic; :class:`LLMExtractor` asks a chat endpoint.
"""
from __future__ import annotations

import json
import os
import re
from collections import Counter
from datetime import datetime, timezone
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable

import httpx
import jsonschema
import numpy as np

from ._http import post_json
from .exceptions import CorpusError, DimensionError, ExtractionError, MalformedResponseError
from .records import DialogueTurn, ExtractionRecord
from .store import MemoryStore, NodeId, insert

Extractor = Callable[[DialogueTurn], ExtractionRecord]

PROMPT_VERSION = "1"
EXTRACTION_PROMPT = (
    "You are a information analyze agent for a long-term LLM system. Given a dialogue, you must "
    "extract and structure the information into a hierarchical memory format. Follow this hierarchy "
    "strictly: 1. Identify the high-level domain of interest. 2. Extract specific categories or "
    "subdomains related to the topic. 3. Summarize the keywords of the dialogue. 4. Extract specific "
    "events and user profile. Output the result as structured JSON. "
)
REPLY_KEYS_HINT = (
    'Reply with one JSON object with the keys "domain" (string), "category" (string), '
    '"keywords" (list of strings), "episode" (string) and "profile" (string).'
)

REPLY_SCHEMA = {
    "type": "object",
    "required": ["domain", "category", "keywords", "profile"],
    "properties": {
        "domain": {"type": "string", "pattern": r"\S"},
        "category": {"type": "string", "pattern": r"\S"},
        "keywords": {"anyOf": [{"type": "string"}, {"type": "array", "items": {"type": "string"}}]},
        "episode": {"type": "string"},
        "profile": {"type": "string"},
    },
}

STOPWORDS = frozenset("""
a about above after again against all also am an and any are aren't as at be because been before
being below between both but by can can't could couldn't did didn't do does doesn't doing don't down
during each few for from further get got had hadn't has hasn't have haven't having he he'd he'll he's
her here here's hers herself him himself his how how's i i'd i'll i'm i've if in into is isn't it
it's its itself just let's like maybe me more most much my myself no nor not now of off on once only
or other others our ours ourselves out over own really same she she'd she'll she's should shouldn't
so some such than that that's the their theirs them themselves then there there's these they they'd
they'll they're they've this those through to too under until up very was wasn't we we'd we'll we're
we've were weren't what what's when when's where where's which while who who's whom why why's will
with won't would wouldn't yeah yes you you'd you'll you're you've your yours yourself yourselves
one two three lot thing things something anything going want wanted think thought know knew
recommend tell said say says okay well sure thanks thank hey hello please
""".split())

SENTIMENT_WORDS = (
    "love", "loved", "loves", "enjoy", "enjoyed", "enjoys", "like", "liked", "likes", "hate", "hated",
    "hates", "dislike", "disliked", "excited", "happy", "sad", "angry", "afraid", "annoyed", "bored",
    "tired", "worried", "prefer", "prefers", "favorite", "adore", "awful", "great",
)
_SENTIMENT = frozenset(SENTIMENT_WORDS)
_TOKEN = re.compile(r"[a-z0-9]+(?:'[a-z]+)?")
# "speaker: " line prefixes, as produced by pair_turns
_SPEAKER_PREFIX = re.compile(r"^[ \t]*[\w.'-]{1,40}:[ \t]+", re.MULTILINE)


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


@lru_cache(maxsize=1)
def domain_table() -> dict:
    """The stub extractor's keyword table, loaded from package data."""
    raw = resources.files("hiermem").joinpath("data/domains.json").read_text(encoding="utf-8")
    return json.loads(raw)


@lru_cache(maxsize=1)
def _compiled_table():
    table = domain_table()
    compiled = []
    for dom in table["domains"]:
        cats = [(name, frozenset(kw)) for name, kw in dom["categories"].items()]
        vocab = frozenset(dom["keywords"]).union(*(kw for _, kw in cats))
        compiled.append((dom["name"], vocab, cats))
    return compiled, table["default_category"]


def extract_stub(turn: DialogueTurn) -> ExtractionRecord:
    """Rule-based extraction with fixed table priority; never fails."""
    tokens = tokenize(_SPEAKER_PREFIX.sub("", turn.text))
    compiled, default_cat = _compiled_table()
    domain, category, best = "other", default_cat, 0
    for name, vocab, cats in compiled:
        score = sum(t in vocab for t in tokens)
        if score > best:
            domain, best = name, score
            category, cat_best = default_cat, 0
            for cat_name, kw in cats:
                s = sum(t in kw for t in tokens)
                if s > cat_best:
                    category, cat_best = cat_name, s
    content = [t for t in tokens if t.isalpha() and len(t) >= 3 and t not in STOPWORDS]
    tf = Counter(content)
    first = {}
    for i, t in enumerate(content):
        first.setdefault(t, i)
    top = sorted(tf, key=lambda t: (-tf[t], first[t]))[:3]
    speaker = turn.speaker or "user"
    mood = next((t for t in tokens if t in _SENTIMENT), None)
    return ExtractionRecord(
        domain=domain,
        category=category,
        trace=", ".join(top),
        episode_text=turn.text,
        profile=f"{speaker}: {mood}" if mood else speaker,
        timestamp=turn.timestamp,
    )


def _strip_fences(text: str) -> str:
    text = text.strip()
    m = re.match(r"^```(?:json)?\s*(.*?)\s*```$", text, re.S)
    return m.group(1) if m else text


def parse_reply(reply: str, turn: DialogueTurn) -> ExtractionRecord:
    """Decode and schema-check an extraction reply.

    Raises ``json.JSONDecodeError`` or ``jsonschema.ValidationError``. The
    stored episode text is always the raw turn, not the model's paraphrase.
    """
    data = json.loads(_strip_fences(reply))
    jsonschema.validate(data, REPLY_SCHEMA)
    kw = data["keywords"]
    trace = kw if isinstance(kw, str) else ", ".join(k.strip() for k in kw if k.strip())
    return ExtractionRecord(
        domain=data["domain"],
        category=data["category"],
        trace=trace,
        episode_text=turn.text,
        profile=data.get("profile", ""),
        timestamp=turn.timestamp,
    )


class LLMExtractor:
    """Extraction through a chat-completion endpoint (temperature 0).

    One repair round is attempted when the reply is not valid JSON or
    misses required fields; after that :class:`ExtractionError` is raised
    with the raw reply attached.
    """

    def __init__(self, url: str, model: str, *, timeout: float = 60.0, attempts: int = 3,
                 backoff: float = 0.5, client: httpx.Client | None = None,
                 prompt: str = EXTRACTION_PROMPT):
        self.url = url
        self.model = model
        self.timeout = timeout
        self.attempts = attempts
        self.backoff = backoff
        self.prompt = prompt
        self._client = client or httpx.Client(timeout=timeout)

    @classmethod
    def from_env(cls, **kwargs) -> LLMExtractor:
        url = os.environ.get("HMEM_LLM_URL")
        model = os.environ.get("HMEM_LLM_MODEL")
        if not url or not model:
            raise ValueError("HMEM_LLM_URL and HMEM_LLM_MODEL must be set")
        return cls(url, model, **kwargs)

    def messages(self, turn: DialogueTurn) -> list[dict]:
        return [
            {"role": "system", "content": f"{self.prompt}\n{REPLY_KEYS_HINT}"},
            {"role": "user", "content": f"Dialogue:\n{turn.speaker}: {turn.text}"},
        ]

    def _chat(self, messages: list[dict]) -> str:
        body = post_json(self._client, self.url,
                         {"model": self.model, "messages": messages, "temperature": 0},
                         attempts=self.attempts, backoff=self.backoff, timeout=self.timeout)
        try:
            content = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise MalformedResponseError("chat reply lacks choices[0].message.content") from None
        if not isinstance(content, str):
            raise MalformedResponseError("chat reply content is not a string")
        return content

    def __call__(self, turn: DialogueTurn) -> ExtractionRecord:
        messages = self.messages(turn)
        reply = self._chat(messages)
        try:
            return parse_reply(reply, turn)
        except (ValueError, jsonschema.ValidationError) as exc:
            error = _describe(exc)
        messages += [
            {"role": "assistant", "content": reply},
            {"role": "user", "content": f"Your reply was invalid: {error}. {REPLY_KEYS_HINT}"},
        ]
        reply = self._chat(messages)
        try:
            return parse_reply(reply, turn)
        except (ValueError, jsonschema.ValidationError) as exc:
            raise ExtractionError(f"invalid extraction reply after repair: {_describe(exc)}", raw=reply) from exc


def _describe(exc: Exception) -> str:
    if isinstance(exc, jsonschema.ValidationError):
        return exc.message
    return str(exc)


# -- corpus loading -------------------------------------------------------

SYNTH_STEP = 60.0
_LOCOMO_TIME = "%I:%M %p on %d %B, %Y"


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CorpusError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _native_sessions(doc: dict) -> list[DialogueTurn]:
    sessions = doc["sessions"]
    if not isinstance(sessions, list):
        raise CorpusError("sessions: expected a list")
    out = []
    for si, sess in enumerate(sessions):
        where = f"sessions[{si}]"
        if not isinstance(sess, dict) or not isinstance(sess.get("turns"), list):
            raise CorpusError(f"{where}: expected an object with a 'turns' list")
        sid = str(sess.get("session_id", si))
        start = sess.get("start")
        task = sess.get("task")
        for ti, turn in enumerate(sess["turns"]):
            tw = f"{where}.turns[{ti}]"
            if not isinstance(turn, dict):
                raise CorpusError(f"{tw}: expected an object")
            if not isinstance(turn.get("text"), str):
                raise CorpusError(f"{tw}: missing string field 'text'")
            if "timestamp" in turn and turn["timestamp"] is not None:
                ts = _number(turn["timestamp"], f"{tw}.timestamp")
            elif start is not None:
                ts = _number(start, f"{where}.start") + SYNTH_STEP * ti
            else:
                raise CorpusError(f"{tw}: no timestamp and session has no 'start' to synthesize one")
            out.append(DialogueTurn(
                session_id=sid,
                turn_id=int(turn.get("turn_id", ti)),
                speaker=str(turn.get("speaker", "")),
                text=turn["text"],
                timestamp=ts,
                task=turn.get("task", task),
            ))
    return out


def _locomo_sessions(sample: dict, prefix: str) -> list[DialogueTurn]:
    conv = sample["conversation"]
    keys = [k for k in conv if re.fullmatch(r"session_\d+", k)]
    keys.sort(key=lambda k: int(k.split("_")[1]))
    out = []
    for key in keys:
        stamp = conv.get(f"{key}_date_time")
        if not isinstance(stamp, str):
            raise CorpusError(f"{prefix}conversation.{key}_date_time: missing session start")
        try:
            start = datetime.strptime(stamp.strip(), _LOCOMO_TIME).replace(tzinfo=timezone.utc).timestamp()
        except ValueError:
            raise CorpusError(f"{prefix}conversation.{key}_date_time: unparseable {stamp!r}") from None
        for ti, turn in enumerate(conv[key]):
            if not isinstance(turn, dict) or not isinstance(turn.get("text"), str):
                raise CorpusError(f"{prefix}conversation.{key}[{ti}]: missing string field 'text'")
            out.append(DialogueTurn(
                session_id=f"{prefix}{key}",
                turn_id=ti,
                speaker=str(turn.get("speaker", "")),
                text=turn["text"],
                timestamp=start + SYNTH_STEP * ti,
            ))
    return out


def load_corpus(path) -> list[DialogueTurn]:
    """Read a dialogue corpus, in file order of sessions and turns.

    Accepts the native ``{"sessions": [...]}`` layout or LoCoMo-style
    samples with a ``conversation`` object.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorpusError(
            f"{path}: malformed JSON at line {exc.lineno} column {exc.colno} (offset {exc.pos}): {exc.msg}"
        ) from None
    if isinstance(doc, dict) and "sessions" in doc:
        turns = _native_sessions(doc)
    elif isinstance(doc, dict) and "conversation" in doc:
        turns = _locomo_sessions(doc, "")
    elif isinstance(doc, list) and all(isinstance(s, dict) and "conversation" in s for s in doc):
        turns = []
        for i, sample in enumerate(doc):
            turns += _locomo_sessions(sample, f"{sample.get('sample_id', i)}/")
    else:
        raise CorpusError(f"{path}: expected an object with 'sessions' or LoCoMo 'conversation' samples")
    seen = set()
    for t in turns:
        key = (t.session_id, t.turn_id)
        if key in seen:
            raise CorpusError(f"{path}: duplicate turn {t.turn_id} in session {t.session_id!r}")
        seen.add(key)
    return turns


def pair_turns(turns: Iterable[DialogueTurn]) -> list[DialogueTurn]:
    """Merge consecutive turns of a session into one interaction each."""
    out: list[DialogueTurn] = []
    pending: DialogueTurn | None = None
    for t in turns:
        if pending is not None and pending.session_id == t.session_id:
            out.append(DialogueTurn(
                session_id=pending.session_id,
                turn_id=pending.turn_id,
                speaker=pending.speaker,
                text=f"{pending.speaker}: {pending.text}\n{t.speaker}: {t.text}",
                timestamp=t.timestamp,
                task=pending.task,
            ))
            pending = None
            continue
        if pending is not None:
            out.append(pending)
        pending = t
    if pending is not None:
        out.append(pending)
    return out


def level_texts(record: ExtractionRecord, levels: int) -> list[str]:
    return [*record.path_labels(levels), record.episode_text]


def ingest_turn(store: MemoryStore, embedder, extractor: Extractor, turn: DialogueTurn) -> NodeId:
    """Extract, embed and insert one turn; nothing is stored on failure."""
    if embedder.dim != store.dim:
        raise DimensionError(f"embedder dimension {embedder.dim} != store dimension {store.dim}")
    record = extractor(turn).validate()
    vectors = np.asarray(embedder.batch_embed(level_texts(record, store.levels)))
    return insert(store, record, vectors)
