"""Shared fixtures: bundled lexicon, the two anchor darts, synthetic darts."""

from __future__ import annotations

import random

import pytest

from hyperdart import build_dart, bundled_lexicon
from hyperdart.dart import Dart, Detail, Edit, Provenance
from hyperdart.fixtures import passages, rex_sentence, scheduling_sentence


@pytest.fixture(scope="session")
def lexicon():
    return bundled_lexicon()


@pytest.fixture(scope="session")
def rex_dart(lexicon):
    return build_dart(rex_sentence(), lexicon)


@pytest.fixture(scope="session")
def scheduling_dart(lexicon):
    return build_dart(scheduling_sentence(), lexicon)


@pytest.fixture(scope="session")
def passage_paragraphs():
    out = []
    for p in passages():
        out.extend(x for x in p.split("\n\n") if x.strip())
    return out


_FILLERS = "rain stone bridge lantern harbour letter winter garden copper".split()
_SURFACE_STEMS = "falcon yew comet anvil birch otter quartz maple".split()
_HYPERNYMS = "thing item object matter".split()


def make_synthetic_dart(
    rng: random.Random,
    n: int,
    duplicate_pair: bool = False,
    dummy_at: int | None = None,
) -> Dart:
    """Hand-assembled dart over generated filler text.

    Surfaces are tokens that never occur in the filler pool, so lexical
    payoffs treat them cleanly.  ``duplicate_pair`` makes details 0 and 1 an
    adjacent interchangeable pair; ``dummy_at`` makes that detail's edit a
    no-op (replacement equals the covered text).
    """
    if duplicate_pair and n < 2:
        raise ValueError("need n >= 2 for a duplicate pair")
    tokens: list[str] = []
    spans: list[tuple[int, int]] = []
    offset = 0

    def push(token: str) -> tuple[int, int]:
        nonlocal offset
        if tokens:
            offset += 1
        start = offset
        tokens.append(token)
        offset += len(token)
        return start, offset

    def filler():
        for _ in range(rng.randint(1, 3)):
            push(rng.choice(_FILLERS))

    shared_surface = f"{rng.choice(_SURFACE_STEMS)}{rng.randint(100, 999)}"
    shared_hypernym = rng.choice(_HYPERNYMS)
    filler()
    for i in range(n):
        if duplicate_pair and i in (0, 1):
            surface = shared_surface
        else:
            surface = f"{rng.choice(_SURFACE_STEMS)}{rng.randint(100, 999)}x{i}"
        spans.append(push(surface))
        if not (duplicate_pair and i == 0):
            filler()
    source = " ".join(tokens)

    details = []
    edits = []
    for i, (start, end) in enumerate(spans):
        surface = source[start:end]
        if duplicate_pair and i in (0, 1):
            hypernym = shared_hypernym
        else:
            hypernym = rng.choice(_HYPERNYMS)
        replacement = surface if dummy_at == i else hypernym
        details.append(Detail(index=i, category="synthetic", hypernym=hypernym, surface=surface))
        edits.append(Edit(start=start, end=end, replacement=replacement, detail=i, sentence=0))

    core = source
    for e in sorted(edits, key=lambda e: e.start, reverse=True):
        core = core[: e.start] + e.replacement + core[e.end :]
    return Dart(
        core=core,
        details=tuple(details),
        source=source,
        provenance=Provenance("synthetic", "none"),
        edits=tuple(edits),
    )
