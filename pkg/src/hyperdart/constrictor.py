"""Stage 1: detect specifics in a paragraph, generalize them, build a dart.

Detection is rule-based and deterministic: longest-match lexicon phrases,
clock times and dates, numeric shapes, and capitalized token runs.  Every
substitution into the core is recorded as an invertible edit, so the original
paragraph is always recoverable byte-exact from a freshly built dart.
"""

from __future__ import annotations

import enum
import re
from bisect import bisect_right
from dataclasses import dataclass, field

from .dart import Dart, Detail, Edit, Provenance, fnv1a64

__all__ = [
    "Detector",
    "DetailCandidate",
    "HypernymLexicon",
    "RuleConfig",
    "DegenerateInput",
    "detect_details",
    "generalize",
    "build_dart",
    "TIME_BUCKETS",
    "bundled_lexicon",
]


class DegenerateInput(ValueError):
    """Input paragraph carries no usable text."""


class Detector(enum.Enum):
    PROPER_NOUN = "PROPER_NOUN"
    NUMERIC = "NUMERIC"
    TIME = "TIME"
    LEXICON = "LEXICON"


@dataclass(frozen=True)
class DetailCandidate:
    """A detected span, before generalization."""

    start: int
    end: int
    text: str
    category: str
    detector: Detector


# Hour buckets (24h, [lo, hi)) for generalizing clock times.
TIME_BUCKETS = (
    (0, 4, "night"),
    (4, 9, "early morning"),
    (9, 12, "morning"),
    (12, 17, "afternoon"),
    (17, 21, "evening"),
    (21, 24, "night"),
)

_SEASONS = {
    (12, 1, 2): "a winter day",
    (3, 4, 5): "a spring day",
    (6, 7, 8): "a summer day",
    (9, 10, 11): "an autumn day",
}

_MONTHS = (
    "January", "February", "March", "April", "May", "June",
    "July", "August", "September", "October", "November", "December",
)
_MONTH_NUM = {m: i + 1 for i, m in enumerate(_MONTHS)}

DEFAULT_FALLBACKS = {
    Detector.PROPER_NOUN: "an entity",
    Detector.NUMERIC: "a number",
    Detector.TIME: "some time",
    Detector.LEXICON: "something",
}


class HypernymLexicon:
    """Case-folded surface phrase -> (hypernym, category), plus detector fallbacks.

    File format: one entry per line, ``term<TAB>hypernym<TAB>category``,
    ``#`` comments and blank lines ignored.
    """

    def __init__(
        self,
        entries: dict[str, tuple[str, str]],
        fallbacks: dict[Detector, str] | None = None,
    ):
        self.entries: dict[str, tuple[str, str]] = {}
        for term, (hypernym, category) in entries.items():
            key = " ".join(term.casefold().split())
            if not key or not hypernym or not category:
                raise ValueError(f"incomplete lexicon entry for {term!r}")
            if key == hypernym.casefold():
                raise ValueError(f"lexicon entry maps {term!r} to itself")
            self.entries[key] = (hypernym, category)
        self.fallbacks = dict(DEFAULT_FALLBACKS)
        if fallbacks:
            self.fallbacks.update(fallbacks)
        self.max_words = max((k.count(" ") + 1 for k in self.entries), default=1)

    @classmethod
    def from_text(cls, text: str) -> HypernymLexicon:
        entries = {}
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"expected 3 tab-separated fields, got {raw!r}")
            term, hypernym, category = (p.strip() for p in parts)
            entries[term] = (hypernym, category)
        return cls(entries)

    @classmethod
    def from_file(cls, path) -> HypernymLexicon:
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def lookup(self, phrase: str) -> tuple[str, str] | None:
        return self.entries.get(" ".join(phrase.casefold().split()))

    @property
    def version(self) -> str:
        body = "\n".join(
            f"{k}\t{v[0]}\t{v[1]}" for k, v in sorted(self.entries.items())
        )
        return fnv1a64(body)


def bundled_lexicon() -> HypernymLexicon:
    """The lexicon shipped with the package data."""
    from importlib.resources import files

    return HypernymLexicon.from_text(
        files("hyperdart").joinpath("data/lexicon.tsv").read_text(encoding="utf-8")
    )


@dataclass(frozen=True)
class RuleConfig:
    """Toggles for the context rules layered on plain substitution."""

    absorb_names: bool = True
    absorb_times: bool = True
    generic_articles: bool = True


# --- tokenization ------------------------------------------------------------

_STRIP_CHARS = ".,;:!?()[]{}\"'“”‘’«»—–*"

_WORD_RE = re.compile(r"\S+")

_SENTENCE_BREAK_RE = re.compile(r"(?<=[.!?])\s+")

_POSSESSIVE_RE = re.compile(r"(?:'s|’s)$")


@dataclass(frozen=True)
class _Token:
    start: int
    end: int
    text: str
    cstart: int  # span of the punctuation-stripped core
    cend: int

    @property
    def core(self) -> str:
        return self.text[self.cstart - self.start : self.cend - self.start]


def _core_phrase(text: str) -> str:
    """The case-folded phrase a span matches under in the lexicon (edge
    punctuation of every token stripped, whitespace collapsed)."""
    cores = [tok.strip(_STRIP_CHARS) for tok in text.split()]
    return " ".join(c.casefold() for c in cores if c)


def _tokenize(paragraph: str) -> list[_Token]:
    tokens = []
    for m in _WORD_RE.finditer(paragraph):
        text = m.group()
        lead = len(text) - len(text.lstrip(_STRIP_CHARS))
        stripped = text.strip(_STRIP_CHARS)
        cstart = m.start() + lead
        cend = cstart + len(stripped)
        tokens.append(_Token(m.start(), m.end(), text, cstart, cend))
    return tokens


def _sentence_starts(paragraph: str) -> list[int]:
    starts = [0]
    for m in _SENTENCE_BREAK_RE.finditer(paragraph):
        starts.append(m.end())
    return starts


def _sentence_of(starts: list[int], offset: int) -> int:
    return bisect_right(starts, offset) - 1


# --- detection ----------------------------------------------------------------

_MERIDIEM = r"(?:A\.M\.|P\.M\.|a\.m\.|p\.m\.|AM|PM|am|pm)"
_CLOCK_RE = re.compile(rf"\b\d{{1,2}}:\d{{2}}(?:\s?{_MERIDIEM})?(?![A-Za-z])")
_BARE_MERIDIEM_RE = re.compile(rf"\b\d{{1,2}}\s?{_MERIDIEM}(?![A-Za-z])")
_TIME_JOIN_RE = re.compile(r"(?:\s+(?:or|to|and|until|till)\s+|\s*[-–]\s*)")
_TIME_QUALIFIER_RE = re.compile(r"\s+depending\s+on\b[^.,;!?]*")

_MONTH_ALT = "|".join(_MONTHS)
_DATE_DAY_FIRST_RE = re.compile(rf"\b(\d{{1,2}})(?:st|nd|rd|th)?\s+(?:of\s+)?({_MONTH_ALT})\b")
_DATE_MONTH_FIRST_RE = re.compile(rf"\b({_MONTH_ALT})\s+(\d{{1,2}})(?:st|nd|rd|th)?\b")

_YEAR_RE = re.compile(r"\b(?:1[1-9]\d{2}|20\d{2})\b(?!s)")
_PERCENT_RE = re.compile(r"\b\d+(?:\.\d+)?\s?%")
_DECIMAL_RE = re.compile(r"\b\d+\.\d+\b(?!%)")
_INT_RE = re.compile(r"\b\d+(?:,\d{3})*\b(?!%)")

# Words never treated as a proper-noun run on their own (or at a run edge).
_PN_EXCLUDE = frozenset(
    """
    a an the i we he she it they you me him her us them my his its our their your
    this that these those there here and or nor but if as so no not o oh yes
    by to of in on at for with from into onto over under between among through
    during before after above below again further then once only own same than
    too very just when where why how what who whom whose which while although
    though despite moreover furthermore finally thus however additionally
    another one each every some all any both few more most other such whether
    since yet still also even now today currently generally unfortunately
    note dear sir madam north south east west
    """.split()
)


class _Claims:
    """Non-overlapping span bookkeeping shared by the detection passes."""

    def __init__(self):
        self.spans: list[tuple[int, int]] = []

    def overlaps(self, start: int, end: int) -> bool:
        return any(s < end and start < e for s, e in self.spans)

    def add(self, start: int, end: int):
        self.spans.append((start, end))


def _hour_of(text: str) -> int:
    m = re.search(r"\d{1,2}", text)
    hour = int(m.group()) if m else 0
    meridiem = re.search(_MERIDIEM, text)
    if meridiem:
        mer = meridiem.group().replace(".", "").lower()
        if mer == "pm" and hour < 12:
            hour += 12
        if mer == "am" and hour == 12:
            hour = 0
    return hour % 24


def time_bucket(hour: int) -> str:
    for lo, hi, label in TIME_BUCKETS:
        if lo <= hour < hi:
            return label
    return "night"


def _season_of(month: int) -> str:
    for months, label in _SEASONS.items():
        if month in months:
            return label
    return "a day"


def _detect_lexicon(paragraph: str, tokens: list[_Token], lexicon: HypernymLexicon, claims: _Claims, out: list):
    i = 0
    while i < len(tokens):
        matched = False
        for width in range(min(lexicon.max_words, len(tokens) - i), 0, -1):
            window = tokens[i : i + width]
            phrase = " ".join(t.core for t in window)
            entry = lexicon.lookup(phrase)
            if entry is None:
                continue
            start, end = window[0].cstart, window[-1].cend
            if claims.overlaps(start, end):
                continue
            claims.add(start, end)
            out.append(
                DetailCandidate(start, end, paragraph[start:end], entry[1], Detector.LEXICON)
            )
            i += width
            matched = True
            break
        if not matched:
            i += 1


def _detect_times(paragraph: str, claims: _Claims, out: list):
    clock_spans = [m.span() for m in _CLOCK_RE.finditer(paragraph)]
    clock_spans += [
        m.span()
        for m in _BARE_MERIDIEM_RE.finditer(paragraph)
        if not any(s <= m.start() < e for s, e in clock_spans)
    ]
    clock_spans.sort()

    merged: list[tuple[int, int, bool]] = []  # start, end, is_choice
    for span in clock_spans:
        if merged:
            ps, pe, choice = merged[-1]
            joiner = _TIME_JOIN_RE.fullmatch(paragraph, pe, span[0])
            if joiner:
                merged[-1] = (ps, span[1], True)
                continue
        merged.append((span[0], span[1], False))

    for start, end, choice in merged:
        qualifier = _TIME_QUALIFIER_RE.match(paragraph, end)
        if qualifier:
            end = qualifier.end()
            choice = True
        if claims.overlaps(start, end):
            continue
        claims.add(start, end)
        category = "time choice" if choice else "time"
        out.append(DetailCandidate(start, end, paragraph[start:end], category, Detector.TIME))

    for date_re in (_DATE_DAY_FIRST_RE, _DATE_MONTH_FIRST_RE):
        for m in date_re.finditer(paragraph):
            if claims.overlaps(*m.span()):
                continue
            claims.add(*m.span())
            out.append(DetailCandidate(m.start(), m.end(), m.group(), "date", Detector.TIME))


def _detect_numbers(paragraph: str, claims: _Claims, out: list):
    for regex, category in (
        (_YEAR_RE, "year"),
        (_PERCENT_RE, "number"),
        (_DECIMAL_RE, "number"),
        (_INT_RE, "count"),
    ):
        for m in regex.finditer(paragraph):
            if claims.overlaps(*m.span()):
                continue
            claims.add(*m.span())
            out.append(DetailCandidate(m.start(), m.end(), m.group(), category, Detector.NUMERIC))


def _detect_proper_nouns(paragraph: str, tokens: list[_Token], starts: list[int], claims: _Claims, out: list):
    def eligible(tok: _Token) -> bool:
        core = _POSSESSIVE_RE.sub("", tok.core)
        if not core or not core[0].isalpha() or not core[0].isupper():
            return False
        if core.casefold() in _PN_EXCLUDE:
            return False
        return not claims.overlaps(tok.cstart, tok.cstart + len(core))

    sentence_first = set()
    seen_sentences = set()
    for idx, tok in enumerate(tokens):
        sid = _sentence_of(starts, tok.start)
        if sid not in seen_sentences:
            seen_sentences.add(sid)
            sentence_first.add(idx)

    i = 0
    while i < len(tokens):
        if not eligible(tokens[i]):
            i += 1
            continue
        j = i
        run = [i]
        while j + 1 < len(tokens):
            nxt = tokens[j + 1]
            if nxt.core == "&" and j + 2 < len(tokens) and eligible(tokens[j + 2]):
                run.extend([j + 1, j + 2])
                j += 2
                continue
            # A run never crosses a sentence boundary or intermediate punctuation.
            if tokens[j].text[-1] in ",.;:!?" :
                break
            if eligible(nxt):
                run.append(j + 1)
                j += 1
                continue
            break
        if run[0] in sentence_first and len(run) < 2:
            i = j + 1
            continue
        first, last = tokens[run[0]], tokens[run[-1]]
        last_core = _POSSESSIVE_RE.sub("", last.core)
        start, end = first.cstart, last.cstart + len(last_core)
        if not claims.overlaps(start, end):
            claims.add(start, end)
            out.append(DetailCandidate(start, end, paragraph[start:end], "name", Detector.PROPER_NOUN))
        i = j + 1


def detect_details(paragraph: str, lexicon: HypernymLexicon) -> list[DetailCandidate]:
    """All non-overlapping candidates, sorted by span start.

    Pass priority on overlap: lexicon phrases, then times/dates, then numeric
    shapes, then proper-noun runs.
    """
    if not paragraph:
        return []
    tokens = _tokenize(paragraph)
    starts = _sentence_starts(paragraph)
    claims = _Claims()
    out: list[DetailCandidate] = []
    _detect_lexicon(paragraph, tokens, lexicon, claims, out)
    _detect_times(paragraph, claims, out)
    _detect_numbers(paragraph, claims, out)
    _detect_proper_nouns(paragraph, tokens, starts, claims, out)
    out.sort(key=lambda c: c.start)
    return out


def generalize(
    candidate: DetailCandidate,
    lexicon: HypernymLexicon,
    preceding_hypernym: str | None = None,
) -> tuple[str, str]:
    """Hypernym and category for one candidate.

    Lexicon hits return their entry.  Times map through the hour bucket table,
    dates to a season, years to their decade, counts to "several".  Proper
    nouns appositive to an already-generalized phrase inherit its hypernym
    (pass it as ``preceding_hypernym``); otherwise the detector fallback wins.
    """
    if candidate.detector is Detector.LEXICON:
        entry = lexicon.lookup(_core_phrase(candidate.text))
        if entry:
            return entry
        return lexicon.fallbacks[Detector.LEXICON], candidate.category
    if candidate.detector is Detector.TIME:
        if candidate.category == "date":
            month = next((m for m in _MONTHS if m in candidate.text), None)
            return (_season_of(_MONTH_NUM[month]) if month else "a date"), "date"
        return time_bucket(_hour_of(candidate.text)), candidate.category
    if candidate.detector is Detector.NUMERIC:
        if candidate.category == "year":
            decade = int(candidate.text) // 10 * 10
            return f"a year in the {decade}s", "year"
        if candidate.category == "count":
            return "several", "count"
        return lexicon.fallbacks[Detector.NUMERIC], candidate.category
    if preceding_hypernym:
        return _with_indefinite_article(preceding_hypernym), "name"
    return lexicon.fallbacks[Detector.PROPER_NOUN], "name"


# --- core construction ---------------------------------------------------------


def _indefinite_article(word: str, capitalized: bool) -> str:
    article = "an" if word[:1].lower() in "aeiou" else "a"
    return article.capitalize() if capitalized else article


def _with_indefinite_article(hypernym: str) -> str:
    low = hypernym.casefold()
    if low.startswith(("a ", "an ", "the ")):
        return hypernym
    return f"{_indefinite_article(hypernym, False)} {hypernym}"


def _strip_leading_article(hypernym: str) -> str:
    for art in ("a ", "an ", "the ", "A ", "An ", "The "):
        if hypernym.startswith(art):
            return hypernym[len(art):]
    return hypernym


_ARTICLE_BEFORE_RE = re.compile(r"(?:^|(?<=\s))([Tt]he|[Aa]n|[Aa])(\s+)$")
_AT_BEFORE_RE = re.compile(r"(\s+)(at)(\s+)$")
_AT_ANYCASE_BEFORE_RE = re.compile(r"(?:^|(?<=\s))([Aa]t)(\s+)$")
_NAMED_BEFORE_RE = re.compile(r"(\s+)(?:named|called)\s+$")
_PAREN_BEFORE_RE = re.compile(r"\s?\($")
_GENERIC_THE_RE = re.compile(r"\b([Tt]he)(\s+)([a-z][a-z\-]*)")


@dataclass
class _PlannedEdit:
    start: int
    end: int
    replacement: str
    detail: int | None
    sentence: int


def build_dart(
    paragraph: str,
    lexicon: HypernymLexicon,
    rules: RuleConfig | None = None,
) -> Dart:
    """Detect, generalize, and assemble one dart for one paragraph.

    The core is the paragraph with every candidate span replaced by its
    hypernym (with article and preposition agreement); absorbed details are
    removed from the core entirely and live only in the tail.
    """
    if not paragraph.strip():
        raise DegenerateInput("paragraph is empty or whitespace-only")
    rules = rules or RuleConfig()
    candidates = detect_details(paragraph, lexicon)
    starts = _sentence_starts(paragraph)

    planned: list[_PlannedEdit] = []
    details: list[Detail] = []
    consumed: list[tuple[int, int]] = []

    def free(start: int, end: int) -> bool:
        return not any(s < end and start < e for s, e in consumed)

    last_candidate_by_sentence: dict[int, int] = {}

    for pos, cand in enumerate(candidates):
        sid = _sentence_of(starts, cand.start)
        before = paragraph[: cand.start]
        hypernym = category = None
        edit: _PlannedEdit | None = None

        if (
            rules.absorb_names
            and cand.detector is Detector.PROPER_NOUN
            and sid in last_candidate_by_sentence
        ):
            named = _NAMED_BEFORE_RE.search(before)
            if named and free(named.start(1), cand.end):
                prev = details[last_candidate_by_sentence[sid]]
                hypernym = _with_indefinite_article(prev.hypernym)
                category = "name"
                edit = _PlannedEdit(named.start(1), cand.end, "", pos, sid)

        if edit is None and cand.detector is Detector.TIME and cand.category == "time":
            at = _AT_BEFORE_RE.search(before)
            if rules.absorb_times and at and free(at.start(1), cand.end):
                hypernym, category = generalize(cand, lexicon)
                edit = _PlannedEdit(at.start(1), cand.end, "", pos, sid)

        if edit is None:
            # A candidate that is the whole content of a parenthetical gloss is
            # absorbed with its parentheses; the gloss is pure detail.
            paren = _PAREN_BEFORE_RE.search(before)
            if (
                paren
                and paragraph[cand.end : cand.end + 1] == ")"
                and free(paren.start(), cand.end + 1)
            ):
                hypernym, category = generalize(cand, lexicon)
                edit = _PlannedEdit(paren.start(), cand.end + 1, "", pos, sid)

        if edit is None:
            hypernym, category = generalize(cand, lexicon)
            if cand.detector is Detector.TIME and cand.category != "date":
                at = _AT_ANYCASE_BEFORE_RE.search(before)
                if at and free(at.start(1), cand.end):
                    prep = "In the" if at.group(1)[0].isupper() else "in the"
                    edit = _PlannedEdit(at.start(1), cand.end, f"{prep} {hypernym}", pos, sid)
                else:
                    edit = _PlannedEdit(cand.start, cand.end, f"the {hypernym}", pos, sid)
            elif cand.detector in (Detector.LEXICON, Detector.PROPER_NOUN):
                art = _ARTICLE_BEFORE_RE.search(before)
                base = _strip_leading_article(hypernym)
                plural_base = base.split()[-1].endswith("s")
                if art and not plural_base and free(art.start(1), cand.end):
                    capitalized = art.group(1)[0].isupper()
                    if hypernym.casefold().startswith("the "):
                        article = "The" if capitalized else "the"
                    else:
                        article = _indefinite_article(base, capitalized)
                    edit = _PlannedEdit(art.start(1), cand.end, f"{article} {base}", pos, sid)
                else:
                    # Plural hypernyms keep whatever article the source had.
                    text = base if art and plural_base else hypernym
                    if cand.start in starts and text[:1].islower():
                        text = text[0].upper() + text[1:]
                    edit = _PlannedEdit(cand.start, cand.end, text, pos, sid)
            else:
                edit = _PlannedEdit(cand.start, cand.end, hypernym, pos, sid)

        if not free(edit.start, edit.end):
            # Extension collided with a neighbour; fall back to the bare span.
            edit = _PlannedEdit(cand.start, cand.end, hypernym, pos, sid)
        consumed.append((edit.start, edit.end))
        planned.append(edit)
        details.append(
            Detail(index=pos, category=category, hypernym=hypernym, surface=cand.text)
        )
        last_candidate_by_sentence[sid] = pos

    if rules.generic_articles:
        _plan_generic_articles(paragraph, starts, planned, consumed)

    # The core is exactly the source with every edit applied; no extra cleanup,
    # otherwise the recorded edits would no longer invert byte-exact.
    planned.sort(key=lambda e: e.start)
    core = paragraph
    for e in reversed(planned):
        core = core[: e.start] + e.replacement + core[e.end :]

    edits = tuple(Edit(e.start, e.end, e.replacement, e.detail, e.sentence) for e in planned)
    return Dart(
        core=core,
        details=tuple(details),
        source=paragraph,
        provenance=Provenance(generalizer="rule-constrictor-v1", lexicon_version=lexicon.version),
        edits=edits,
    )


def _plan_generic_articles(
    paragraph: str,
    starts: list[int],
    planned: list[_PlannedEdit],
    consumed: list[tuple[int, int]],
):
    """Indefinitize remaining definite articles in sentences whose subject did.

    Fires only when a detail edit at the very start of a sentence turned
    "The ..." into an indefinite phrase, which is when the core reads as a
    generic (type-level) statement.
    """
    sentence_ends = starts[1:] + [len(paragraph)]
    for sid, sstart in enumerate(starts):
        trigger = any(
            e.detail is not None
            and e.start == sstart
            and paragraph[e.start : e.start + 4] in ("The ", "the ")
            and e.replacement.split(maxsplit=1)[0].casefold() in ("a", "an")
            for e in planned
        )
        if not trigger:
            continue
        send = sentence_ends[sid]
        for m in _GENERIC_THE_RE.finditer(paragraph, sstart, send):
            if any(s < m.end(1) and m.start(1) < e for s, e in consumed):
                continue
            following = m.group(3)
            if following.endswith("s"):
                continue
            article = _indefinite_article(following, m.group(1)[0].isupper())
            planned.append(_PlannedEdit(m.start(1), m.end(1), article, None, sid))
            consumed.append((m.start(1), m.end(1)))
