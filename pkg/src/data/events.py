# src/data/events.py
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

from src.errors import MalformedRecord, NegativeTimestamp, ParseError, UnknownType

logger = logging.getLogger(__name__)


class EntityType(str, Enum):
    PROCESS = "process"
    FILE = "file"
    NETFLOW = "netflow"


class EventType(str, Enum):
    CONNECT = "CONNECT"
    EXECUTE = "EXECUTE"
    OPEN = "OPEN"
    READ = "READ"
    RECVFROM = "RECVFROM"
    RECVMSG = "RECVMSG"
    SENDMSG = "SENDMSG"
    SENDTO = "SENDTO"
    WRITE = "WRITE"
    CLONE = "CLONE"


# Order fixes the one-hot / multi-hot positions.
ENTITY_TYPES: tuple[EntityType, ...] = tuple(EntityType)
EVENT_TYPES: tuple[EventType, ...] = tuple(EventType)
ENTITY_INDEX: dict[EntityType, int] = {t: i for i, t in enumerate(ENTITY_TYPES)}
EVENT_INDEX: dict[EventType, int] = {t: i for i, t in enumerate(EVENT_TYPES)}

FIELDS = (
    "src_id",
    "src_type",
    "src_attr",
    "dst_id",
    "dst_type",
    "dst_attr",
    "event_type",
    "timestamp_ns",
)


@dataclass(frozen=True)
class Event:
    src_id: str
    src_type: EntityType
    src_attr: str
    dst_id: str
    dst_type: EntityType
    dst_attr: str
    event_type: EventType
    timestamp: int


# ---- escaping ---------------------------------------------------------------

_ESCAPES = {"\\": "\\\\", "\t": "\\t", "\n": "\\n", "\r": "\\r"}
_UNESCAPES = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}


def escape_value(text: str) -> str:
    return "".join(_ESCAPES.get(ch, ch) for ch in text)


def unescape_value(text: str) -> str:
    if "\\" not in text:
        return text
    out = []
    chars = iter(text)
    for ch in chars:
        if ch != "\\":
            out.append(ch)
            continue
        nxt = next(chars, None)
        if nxt not in _UNESCAPES:
            raise MalformedRecord(f"bad escape sequence '\\{nxt or ''}'")
        out.append(_UNESCAPES[nxt])
    return "".join(out)


# ---- records ----------------------------------------------------------------


def _entity_type(value: str, field: str) -> EntityType:
    try:
        return EntityType(value)
    except ValueError:
        raise UnknownType(f"{field}: unknown entity type {value!r}") from None


def _event_type(value: str) -> EventType:
    try:
        return EventType(value)
    except ValueError:
        raise UnknownType(f"event_type: unknown event type {value!r}") from None


def parse_event_line(line: str) -> Event:
    """
    Parse one TAB-separated `key=value` record into a validated Event.

    All eight fields are required exactly once; unknown keys are rejected.
    """
    line = line.rstrip("\r\n")
    if not line.strip():
        raise MalformedRecord("empty record")

    values: dict[str, str] = {}
    for part in line.split("\t"):
        key, sep, raw = part.partition("=")
        if not sep:
            raise MalformedRecord(f"field without '=': {part!r}")
        if key not in FIELDS:
            raise MalformedRecord(f"unknown field {key!r}")
        if key in values:
            raise MalformedRecord(f"duplicate field {key!r}")
        values[key] = unescape_value(raw)

    missing = [f for f in FIELDS if f not in values]
    if missing:
        raise MalformedRecord(f"missing fields: {', '.join(missing)}")

    for key in ("src_id", "dst_id"):
        if not values[key]:
            raise MalformedRecord(f"{key} is empty")

    raw_ts = values["timestamp_ns"].strip()
    try:
        timestamp = int(raw_ts)
    except ValueError:
        raise MalformedRecord(f"timestamp_ns is not an integer: {raw_ts!r}") from None
    if timestamp < 0:
        raise NegativeTimestamp(f"timestamp_ns must be >= 0, got {timestamp}")

    return Event(
        src_id=values["src_id"],
        src_type=_entity_type(values["src_type"], "src_type"),
        src_attr=values["src_attr"],
        dst_id=values["dst_id"],
        dst_type=_entity_type(values["dst_type"], "dst_type"),
        dst_attr=values["dst_attr"],
        event_type=_event_type(values["event_type"]),
        timestamp=timestamp,
    )


def format_event_line(event: Event) -> str:
    """Inverse of parse_event_line (no trailing newline)."""
    values = {
        "src_id": event.src_id,
        "src_type": event.src_type.value,
        "src_attr": event.src_attr,
        "dst_id": event.dst_id,
        "dst_type": event.dst_type.value,
        "dst_attr": event.dst_attr,
        "event_type": event.event_type.value,
        "timestamp_ns": str(event.timestamp),
    }
    return "\t".join(f"{k}={escape_value(values[k])}" for k in FIELDS)


# ---- files ------------------------------------------------------------------


def iter_events(path: str | Path) -> Iterator[Event]:
    """
    Stream events from a log file, one line at a time.
    Blank lines and lines starting with '#' are skipped.
    Parse errors are re-raised tagged with `path:line`.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line.startswith("#"):
                continue
            try:
                yield parse_event_line(line)
            except ParseError as err:
                raise err.at(f"{path}:{lineno}") from None


def read_events(path: str | Path) -> list[Event]:
    events = list(iter_events(path))
    logger.info("Read %d events from %s", len(events), path)
    return events


def write_events(path: str | Path, events: Iterable[Event]) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for event in events:
            fh.write(format_event_line(event) + "\n")
            count += 1
    logger.info("Wrote %d events to %s", count, path)
    return count
