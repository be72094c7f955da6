"""Corpus I/O and event-disjoint train/test splitting."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .exceptions import ParseError, SplitError

log = logging.getLogger(__name__)

FAKE, REAL = 1, 0
_FIELDS = ("id", "text", "image_ref", "label", "event_id")


@dataclass(frozen=True)
class Message:
    id: str
    text: str
    label: Optional[int]
    event_id: str
    image_ref: Optional[str] = None

    def to_dict(self) -> dict:
        return asdict(self)


def parse_message(obj, path=None, lineno=None, require_label=True) -> Message:
    """Validate one decoded JSON object; errors carry ``path:lineno``."""
    if not isinstance(obj, dict):
        raise ParseError("expected a JSON object", path, lineno)
    optional = {"image_ref"} if require_label else {"image_ref", "label", "event_id"}
    missing = [f for f in _FIELDS if f not in obj and f not in optional]
    if missing:
        raise ParseError(f"missing field(s) {', '.join(missing)}", path, lineno)
    label = obj.get("label")
    if (require_label or label is not None) and (isinstance(label, bool) or label not in (0, 1)):
        raise ParseError(f"label must be 0 or 1, got {label!r}", path, lineno)
    if not isinstance(obj["id"], str) or not obj["id"]:
        raise ParseError("id must be a non-empty string", path, lineno)
    if not isinstance(obj["text"], str):
        raise ParseError("text must be a string", path, lineno)
    event_id = obj.get("event_id", "")
    if require_label and (not isinstance(event_id, str) or not event_id):
        raise ParseError("event_id must be a non-empty string", path, lineno)
    image_ref = obj.get("image_ref")
    if image_ref is not None and not isinstance(image_ref, str):
        raise ParseError("image_ref must be a string or null", path, lineno)
    return Message(obj["id"], obj["text"], None if label is None else int(label), str(event_id), image_ref)


def load_corpus(path, require_labels: bool = True) -> list[Message]:
    """Read a JSON-lines corpus, one message object per line.

    With ``require_labels=False`` (prediction input) ``label`` and
    ``event_id`` may be omitted.
    """
    path = Path(path)
    messages = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", path, lineno) from None
            messages.append(parse_message(obj, path, lineno, require_labels))
    if not messages:
        log.warning("%s: corpus is empty", path)
    seen, dupes = set(), []
    for m in messages:
        if m.id in seen:
            dupes.append(m.id)
        seen.add(m.id)
    if dupes:
        raise ParseError(f"duplicate message ids: {', '.join(sorted(set(dupes)))}", path)
    return messages


def write_corpus(path, messages: Sequence[Message]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for m in messages:
            fh.write(json.dumps(m.to_dict(), ensure_ascii=False) + "\n")


def split_by_event(corpus: Sequence[Message], train_frac: float = 0.7, seed: int = 0):
    """Partition messages so that no event id occurs on both sides.

    Events are shuffled with ``seed`` and moved to the training side until
    it holds at least ``train_frac`` of the messages; at least one event is
    always left for testing.
    """
    if not 0.0 < train_frac < 1.0:
        raise ValueError(f"train_frac must be in (0, 1), got {train_frac}")
    events = sorted({m.event_id for m in corpus})
    if len(events) < 2:
        raise SplitError(f"need at least two events for a disjoint split, found {len(events)}")
    sizes = {e: 0 for e in events}
    for m in corpus:
        sizes[m.event_id] += 1
    order = [events[i] for i in np.random.default_rng(seed).permutation(len(events))]
    target = train_frac * len(corpus)
    train_events, count = set(), 0
    for event in order[:-1]:
        train_events.add(event)
        count += sizes[event]
        if count >= target:
            break
    train = [m for m in corpus if m.event_id in train_events]
    test = [m for m in corpus if m.event_id not in train_events]
    return train, test
