"""Scoring primitives: tokenization, ROUGE-L, token accounting, similarity, and
the paired significance test used by the benchmark report.

Everything here is deterministic and offline except embedding similarity, which
goes through whatever embedder it is handed (the bundled mock embedder is pure).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Protocol, Sequence

__all__ = [
    "Tokenizer",
    "WhitespaceTokenizer",
    "RougeScore",
    "lcs_length",
    "rouge_l",
    "token_count",
    "compression_ratio",
    "cosine_similarity",
    "embedding_similarity",
    "paired_significance",
    "SignificanceResult",
    "EmptyOriginal",
    "LengthMismatch",
    "TooFewPairs",
    "Scorer",
    "ScorerFailure",
    "LexicalScorer",
    "EmbeddingScorer",
    "default_ensemble",
]


class EmptyOriginal(ValueError):
    """Compression ratio asked for with a zero-token original."""


class LengthMismatch(ValueError):
    pass


class TooFewPairs(ValueError):
    pass


class ScorerFailure(RuntimeError):
    """A fidelity scorer could not produce a score (distinct from a low score)."""

    def __init__(self, scorer_id: str, cause: Exception | str):
        super().__init__(f"scorer {scorer_id!r} failed: {cause}")
        self.scorer_id = scorer_id


class Tokenizer(Protocol):
    name: str

    def tokenize(self, text: str) -> list[str]: ...


class WhitespaceTokenizer:
    """Splits on Unicode whitespace runs; no lowercasing, no punctuation stripping."""

    name = "whitespace"

    def tokenize(self, text: str) -> list[str]:
        return text.split()


WHITESPACE = WhitespaceTokenizer()


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Length of the longest common subsequence of two token sequences.

    Bit-parallel row updates (one big-int per row), so a 200x200 comparison is
    a few hundred integer operations rather than 40k table cells.
    """
    if len(a) > len(b):
        a, b = b, a
    m = len(a)
    if m == 0:
        return 0
    masks: dict[str, int] = {}
    for i, tok in enumerate(a):
        masks[tok] = masks.get(tok, 0) | (1 << i)
    full = (1 << m) - 1
    v = full
    for tok in b:
        match = masks.get(tok)
        if match is None:
            continue
        u = v & match
        v = ((v + u) | (v - u)) & full
    return m - v.bit_count()


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f: float


def rouge_l(candidate: str, reference: str, tokenizer: Tokenizer = WHITESPACE) -> RougeScore:
    """ROUGE-L with harmonic F (beta=1).

    Conventions: both empty -> P=R=F=1; one empty -> all zero.
    """
    cand = tokenizer.tokenize(candidate)
    ref = tokenizer.tokenize(reference)
    if not cand and not ref:
        return RougeScore(1.0, 1.0, 1.0)
    if not cand or not ref:
        return RougeScore(0.0, 0.0, 0.0)
    lcs = lcs_length(cand, ref)
    p = lcs / len(cand)
    r = lcs / len(ref)
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return RougeScore(p, r, f)


def token_count(text: str, tokenizer: Tokenizer = WHITESPACE) -> int:
    return len(tokenizer.tokenize(text))


def compression_ratio(original: str, compressed: str, tokenizer: Tokenizer = WHITESPACE) -> float:
    n = token_count(original, tokenizer)
    if n == 0:
        raise EmptyOriginal("original text has no tokens")
    return token_count(compressed, tokenizer) / n


def cosine_similarity(u: Sequence[float], v: Sequence[float]) -> float:
    dot = sum(x * y for x, y in zip(u, v))
    nu = math.sqrt(sum(x * x for x in u))
    nv = math.sqrt(sum(y * y for y in v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return dot / (nu * nv)


def embedding_similarity(a: str, b: str, embedder: Callable[[list[str]], list[list[float]]]) -> float:
    """Cosine of the embedder's vectors for the two texts, in [-1, 1]."""
    va, vb = embedder([a, b])
    return cosine_similarity(va, vb)


@dataclass(frozen=True)
class SignificanceResult:
    t_statistic: float
    p_value_one_sided: float
    n: int


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 200):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return h


def _betai(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def _student_t_sf(t: float, df: float) -> float:
    """P(T > t) for Student's t with df degrees of freedom."""
    x = df / (df + t * t)
    tail = 0.5 * _betai(df / 2.0, 0.5, x)
    return tail if t >= 0 else 1.0 - tail


def paired_significance(a: Sequence[float], b: Sequence[float]) -> SignificanceResult:
    """One-sided paired t-test of mean(a - b) > 0.

    Degenerate conventions: zero-variance differences give p=0 for a positive
    mean, p=0.5 for a zero mean, and p=1 for a negative mean.
    """
    if len(a) != len(b):
        raise LengthMismatch(f"paired samples differ in length: {len(a)} vs {len(b)}")
    n = len(a)
    if n < 2:
        raise TooFewPairs("need at least 2 pairs")
    diffs = [x - y for x, y in zip(a, b)]
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0.0:
        if mean > 0:
            return SignificanceResult(math.inf, 0.0, n)
        if mean < 0:
            return SignificanceResult(-math.inf, 1.0, n)
        return SignificanceResult(0.0, 0.5, n)
    t = mean / math.sqrt(var / n)
    return SignificanceResult(t, _student_t_sf(t, n - 1), n)


# --- fidelity scorers ------------------------------------------------------


class Scorer(Protocol):
    """Maps (candidate, reference) to a fidelity score in [0, 1]."""

    scorer_id: str

    def score(self, candidate: str, reference: str) -> float: ...


class LexicalScorer:
    """ROUGE-L F against the reference, with per-reference token caching."""

    def __init__(self, tokenizer: Tokenizer = WHITESPACE):
        self.scorer_id = f"lexical-rouge-l[{tokenizer.name}]"
        self._tokenizer = tokenizer

    @lru_cache(maxsize=512)
    def _tokens(self, text: str) -> tuple[str, ...]:
        return tuple(self._tokenizer.tokenize(text))

    def score(self, candidate: str, reference: str) -> float:
        cand = self._tokens(candidate)
        ref = self._tokens(reference)
        if not cand and not ref:
            return 1.0
        if not cand or not ref:
            return 0.0
        lcs = lcs_length(cand, ref)
        return 2.0 * lcs / (len(cand) + len(ref))


class EmbeddingScorer:
    """Cosine similarity via an embedder, clamped to [0, 1] for fidelity use."""

    def __init__(self, embedder: Callable[[list[str]], list[list[float]]], scorer_id: str = "embedding-cosine"):
        self.scorer_id = scorer_id
        self._embedder = embedder
        self._cache: dict[str, list[float]] = {}

    def _embed(self, text: str) -> list[float]:
        vec = self._cache.get(text)
        if vec is None:
            try:
                vec = self._embedder([text])[0]
            except Exception as exc:
                raise ScorerFailure(self.scorer_id, exc) from exc
            self._cache[text] = vec
        return vec

    def score(self, candidate: str, reference: str) -> float:
        sim = cosine_similarity(self._embed(candidate), self._embed(reference))
        return max(0.0, min(1.0, sim))


def default_ensemble() -> list[Scorer]:
    """Lexical ROUGE-L plus the offline mock embedding scorer."""
    from .gateway import GatewayClient, mock_embed_profile

    client = GatewayClient()
    profile = mock_embed_profile()
    return [
        LexicalScorer(),
        EmbeddingScorer(lambda texts: client.embed(texts, profile), scorer_id="embedding-cosine[mock-embed-64]"),
    ]
