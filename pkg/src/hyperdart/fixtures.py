"""Accessors for the bundled text fixtures (lexicon, passages, corpus, queries)."""

from __future__ import annotations

from importlib.resources import files

__all__ = [
    "fixture_text",
    "fixture_path",
    "rex_sentence",
    "scheduling_sentence",
    "passages",
    "dracula_excerpt",
    "dracula_queries",
]


def fixture_path(name: str):
    return files("hyperdart").joinpath(f"data/{name}")


def fixture_text(name: str) -> str:
    return fixture_path(name).read_text(encoding="utf-8")


def rex_sentence() -> str:
    return fixture_text("rex.txt").strip()


def scheduling_sentence() -> str:
    return fixture_text("scheduling.txt").strip()


def passages() -> list[str]:
    """The five bundled case-study passages, each a multi-paragraph text."""
    return [fixture_text(f"passages/passage{i}.txt") for i in range(1, 6)]


def dracula_excerpt() -> str:
    """Gutenberg-framed excerpt used by the retrieval benchmark."""
    return fixture_text("dracula_excerpt.txt")


def dracula_queries() -> list[str]:
    return [line for line in fixture_text("dracula_queries.txt").splitlines() if line.strip()]
