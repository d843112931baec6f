"""Dart data model: a generalized core statement plus an indexed tail of details.

A dart splits a paragraph into a *core* (the wording after every specific has
been generalized away) and an ordered *tail* of details, each remembering the
exact surface string it replaced.  Details are never deleted; compression is
expressed purely through their state (INLINE, SWAPPED, DROPPED), so the full
original wording stays recoverable from the structure.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace

__all__ = [
    "DetailState",
    "Granularity",
    "Detail",
    "Edit",
    "Provenance",
    "Dart",
    "InvalidDart",
    "MalformedDart",
    "fnv1a64",
    "serialize_dart",
    "deserialize_dart",
    "dart_to_json",
    "dart_from_json",
]

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a64(data: bytes | str) -> str:
    """64-bit FNV-1a hash, returned as 16 lowercase hex digits."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & _MASK64
    return f"{h:016x}"


class DetailState(enum.Enum):
    INLINE = "INLINE"
    SWAPPED = "SWAPPED"
    DROPPED = "DROPPED"


# One-step ladder used by the optimizer: demote moves right, promote moves left.
STATE_LADDER = (DetailState.INLINE, DetailState.SWAPPED, DetailState.DROPPED)


class Granularity(enum.IntEnum):
    """Reconstruction level.  CORE < SWAPPED < FULL; REGENERATED needs a generator."""

    CORE = 0
    SWAPPED = 1
    FULL = 2
    REGENERATED = 3


class InvalidDart(ValueError):
    """A dart violating its structural invariants."""


class MalformedDart(ValueError):
    """Raised by the deserializer on grammar or invariant violations."""

    def __init__(self, message: str, line: int, column: int = 0):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Detail:
    """One extracted specific: what it said, what replaced it, and its state."""

    index: int
    category: str
    hypernym: str
    surface: str
    state: DetailState = DetailState.INLINE
    importance: float | None = None

    def __post_init__(self):
        if not self.surface:
            raise InvalidDart(f"detail {self.index}: empty surface")
        if not self.hypernym:
            raise InvalidDart(f"detail {self.index}: empty hypernym")
        if self.index < 0:
            raise InvalidDart(f"negative detail index {self.index}")


@dataclass(frozen=True)
class Edit:
    """One invertible source-to-core substitution.

    ``start``/``end`` are character offsets into the source; the text that was
    there is replaced by ``replacement`` when the edit is applied.  ``detail``
    is the owning detail index, or None for sentence-level article adjustments
    that ride along with the extraction of that sentence's details.
    """

    start: int
    end: int
    replacement: str
    detail: int | None
    sentence: int


@dataclass(frozen=True)
class Provenance:
    generalizer: str = "unknown"
    lexicon_version: str = "unknown"


@dataclass(frozen=True)
class Dart:
    """Immutable core + tail structure built from one source paragraph.

    ``source`` is None for darts read back from their canonical serialization,
    which stores only the source hash; such darts cannot be re-scored against
    the original text but keep every surface string.
    """

    core: str
    details: tuple[Detail, ...]
    source: str | None = None
    provenance: Provenance = field(default_factory=Provenance)
    edits: tuple[Edit, ...] = ()
    source_hash: str = ""

    def __post_init__(self):
        if self.source is not None and not self.source_hash:
            object.__setattr__(self, "source_hash", fnv1a64(self.source))
        for pos, d in enumerate(self.details):
            if d.index != pos:
                raise InvalidDart(
                    f"detail indices must be 0..n-1 in order; got {d.index} at position {pos}"
                )
        if self.source is not None:
            for d in self.details:
                if d.surface not in self.source:
                    raise InvalidDart(
                        f"detail {d.index} surface {d.surface!r} not found in source"
                    )

    def detail_count(self) -> int:
        return len(self.details)

    def states(self) -> dict[int, DetailState]:
        return {d.index: d.state for d in self.details}

    def with_state(self, index: int, state: DetailState) -> Dart:
        """New dart with one detail's state changed; everything else shared."""
        details = tuple(
            replace(d, state=state) if d.index == index else d for d in self.details
        )
        return replace(self, details=details)

    def with_importance(self, values: list[float]) -> Dart:
        details = tuple(
            replace(d, importance=values[d.index]) for d in self.details
        )
        return replace(self, details=details)

    def structural_key(self):
        """Fields preserved by the canonical serialization, for round-trip checks."""
        return (
            self.core,
            self.source_hash,
            tuple((d.index, d.category, d.hypernym, d.state.value, d.surface) for d in self.details),
        )

    def dart_hash(self) -> str:
        return fnv1a64(serialize_dart(self))


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\n", "\\n")


def _unescape(text: str, line: int) -> str:
    out = []
    i = 0
    while i < len(text):
        c = text[i]
        if c == "\\":
            if i + 1 >= len(text):
                raise MalformedDart("dangling escape", line, i)
            nxt = text[i + 1]
            if nxt == "n":
                out.append("\n")
            elif nxt == "\\":
                out.append("\\")
            else:
                raise MalformedDart(f"unknown escape \\{nxt}", line, i)
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


def serialize_dart(dart: Dart) -> str:
    """Canonical line-oriented serialization (UTF-8, LF, fixed key order).

    Byte-stable for identical darts, so golden tests can compare exact output.
    The source itself is not stored, only its hash.
    """
    lines = ["DART v1", f"core: {_escape(dart.core)}", f"source-hash: {dart.source_hash}"]
    for d in dart.details:
        lines.append(f"detail {d.index}")
        lines.append(f"  category={_escape(d.category)}")
        lines.append(f"  hypernym={_escape(d.hypernym)}")
        lines.append(f"  state={d.state.value}")
        lines.append(f"  surface={_escape(d.surface)}")
        lines.append("end")
    return "\n".join(lines) + "\n"


def _expect(condition: bool, message: str, line_no: int, column: int = 0):
    if not condition:
        raise MalformedDart(message, line_no, column)


def deserialize_dart(text: str) -> Dart:
    """Parse the canonical format back into a Dart (source unavailable, hash kept)."""
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    _expect(len(lines) >= 3, "truncated dart file", max(1, len(lines)))
    _expect(lines[0] == "DART v1", "missing 'DART v1' header", 1)
    _expect(lines[1].startswith("core: "), "expected 'core: ' line", 2)
    core = _unescape(lines[1][len("core: "):], 2)
    _expect(lines[2].startswith("source-hash: "), "expected 'source-hash: ' line", 3)
    source_hash = lines[2][len("source-hash: "):]
    _expect(
        len(source_hash) == 16 and all(c in "0123456789abcdef" for c in source_hash),
        "source-hash must be 16 lowercase hex digits",
        3,
        len("source-hash: "),
    )

    details: list[Detail] = []
    seen: set[int] = set()
    i = 3
    while i < len(lines):
        header = lines[i]
        line_no = i + 1
        _expect(header.startswith("detail "), f"expected 'detail <index>', got {header!r}", line_no)
        try:
            index = int(header[len("detail "):])
        except ValueError:
            raise MalformedDart(f"bad detail index {header[len('detail '):]!r}", line_no, 7)
        _expect(index not in seen, f"duplicate detail index {index}", line_no)
        seen.add(index)

        fields = {}
        for offset, key in enumerate(("category", "hypernym", "state", "surface")):
            line_no = i + 1 + offset + 1
            _expect(i + 1 + offset < len(lines), f"truncated detail {index}", line_no)
            raw = lines[i + 1 + offset]
            prefix = f"  {key}="
            _expect(raw.startswith(prefix), f"expected '{prefix}...'", line_no)
            fields[key] = _unescape(raw[len(prefix):], line_no)
        line_no = i + 6
        _expect(i + 5 < len(lines) and lines[i + 5] == "end", "expected 'end'", line_no)
        try:
            state = DetailState(fields["state"])
        except ValueError:
            raise MalformedDart(f"unknown state {fields['state']!r}", i + 4, 8)
        try:
            details.append(
                Detail(
                    index=index,
                    category=fields["category"],
                    hypernym=fields["hypernym"],
                    surface=fields["surface"],
                    state=state,
                )
            )
        except InvalidDart as exc:
            raise MalformedDart(str(exc), i + 1) from exc
        i += 6

    details.sort(key=lambda d: d.index)
    for pos, d in enumerate(details):
        _expect(d.index == pos, f"index gap: expected {pos}, got {d.index}", len(lines))
    return Dart(
        core=core,
        details=tuple(details),
        source=None,
        source_hash=source_hash,
    )


def dart_to_json(dart: Dart) -> str:
    """Interchange form mirroring the canonical fields, for generic tooling."""
    payload = {
        "core": dart.core,
        "source_hash": dart.source_hash,
        "details": [
            {
                "index": d.index,
                "category": d.category,
                "hypernym": d.hypernym,
                "state": d.state.value,
                "surface": d.surface,
            }
            for d in dart.details
        ],
    }
    return json.dumps(payload, ensure_ascii=False, indent=2) + "\n"


def dart_from_json(text: str) -> Dart:
    payload = json.loads(text)
    details = tuple(
        Detail(
            index=entry["index"],
            category=entry["category"],
            hypernym=entry["hypernym"],
            surface=entry["surface"],
            state=DetailState(entry["state"]),
        )
        for entry in sorted(payload["details"], key=lambda e: e["index"])
    )
    return Dart(
        core=payload["core"],
        details=details,
        source=None,
        source_hash=payload["source_hash"],
    )
