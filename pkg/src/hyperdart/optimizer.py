"""Stages 3-4: importance-guided detail demotion under fidelity verification.

The loop demotes the least-important eligible detail one state at a time
(INLINE -> SWAPPED -> DROPPED), verifies the result against every scorer in
the ensemble after each step, and reinstates on failure.  A demotion is only
eligible if it does not grow the token count, which keeps the accepted trace
monotone and the final ratio inside (0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .dart import Dart, DetailState
from .importance import shapley_exact, shapley_sampled
from .metrics import Scorer, Tokenizer, WHITESPACE, default_ensemble, token_count
from .recomposer import render_inline

__all__ = [
    "CompressionPolicy",
    "Transition",
    "VerificationReport",
    "CompressionResult",
    "compress",
    "verify",
    "replay_trace",
]

_NEXT_STATE = {DetailState.INLINE: DetailState.SWAPPED, DetailState.SWAPPED: DetailState.DROPPED}


@dataclass
class CompressionPolicy:
    """Stopping criteria, verification ensemble, and importance sampling knobs."""

    min_fidelity: float = 0.85
    target_token_ratio: float | None = None
    ensemble: list[Scorer] = field(default_factory=default_ensemble)
    max_reinstatements: int | None = None  # None -> 2 * detail count
    tokenizer: Tokenizer = WHITESPACE
    exact_limit: int = 10
    importance_permutations: int = 32
    seed: int = 0

    def __post_init__(self):
        if not self.ensemble:
            raise ValueError("policy needs at least one fidelity scorer")
        if not 0.0 <= self.min_fidelity <= 1.0:
            raise ValueError("min_fidelity must be in [0, 1]")
        if self.target_token_ratio is not None and not 0.0 < self.target_token_ratio <= 1.0:
            raise ValueError("target_token_ratio must be in (0, 1]")


@dataclass(frozen=True)
class VerificationReport:
    """Per-scorer fidelity of one candidate text; passes iff all clear the bar."""

    scores: dict[str, float]
    min_fidelity: float

    @property
    def passed(self) -> bool:
        return all(s >= self.min_fidelity for s in self.scores.values())

    @property
    def failing(self) -> tuple[str, ...]:
        return tuple(k for k, s in self.scores.items() if s < self.min_fidelity)

    @property
    def compatibility(self) -> float:
        return min(self.scores.values())


@dataclass(frozen=True)
class Transition:
    """One state change in the compression trace (replayable)."""

    step: int
    detail: int
    from_state: DetailState
    to_state: DetailState
    kind: str  # "demote" or "reinstate"
    accepted: bool
    tokens_after: int
    compatibility: float | None = None


@dataclass(frozen=True)
class CompressionResult:
    dart: Dart
    compressed_text: str
    tokens_original: int
    tokens_compressed: int
    compression_ratio: float
    fidelity: dict[str, float]
    compatibility: float
    trace: tuple[Transition, ...]

    def __post_init__(self):
        if not 0.0 < self.compression_ratio <= 1.0:
            raise ValueError(f"compression ratio {self.compression_ratio} outside (0, 1]")


def verify(compressed_text: str, original: str, policy: CompressionPolicy) -> VerificationReport:
    """Score the candidate with every ensemble scorer.

    ScorerFailure propagates; a low score is a failed report, not an error.
    """
    scores = {s.scorer_id: s.score(compressed_text, original) for s in policy.ensemble}
    return VerificationReport(scores=scores, min_fidelity=policy.min_fidelity)


def replay_trace(dart: Dart, trace: tuple[Transition, ...]) -> Dart:
    """Apply a trace to an all-INLINE dart; reproduces the compressed dart."""
    out = dart
    for t in trace:
        out = out.with_state(t.detail, t.to_state)
    return out


def _compute_importance(dart: Dart, policy: CompressionPolicy, cache: dict):
    scorer = policy.ensemble[0]
    if dart.detail_count() <= policy.exact_limit:
        return shapley_exact(dart, scorer, exact_limit=policy.exact_limit, cache=cache)
    return shapley_sampled(
        dart,
        scorer,
        permutations=policy.importance_permutations,
        seed=policy.seed,
        cache=cache,
    )


def compress(dart: Dart, policy: CompressionPolicy, importance_fn=None) -> CompressionResult:
    """Greedy verified compression of one dart (see module docstring).

    A dart without details is not an error: the result is the identity text
    with ratio 1.0.
    """
    if dart.source is None:
        raise ValueError("compress needs a dart with source text")
    if any(d.state is not DetailState.INLINE for d in dart.details):
        raise ValueError("compress expects an all-INLINE dart")

    tokenizer = policy.tokenizer
    tokens_original = token_count(dart.source, tokenizer)
    n = dart.detail_count()

    current = {d.index: DetailState.INLINE for d in dart.details}
    current_text = render_inline(dart, current) if n else dart.source
    current_tokens = token_count(current_text, tokenizer)

    if n == 0:
        report = verify(current_text, dart.source, policy)
        return CompressionResult(
            dart=dart,
            compressed_text=current_text,
            tokens_original=tokens_original,
            tokens_compressed=current_tokens,
            compression_ratio=current_tokens / tokens_original,
            fidelity=report.scores,
            compatibility=report.compatibility,
            trace=(),
        )

    cache: dict = {}
    importance = importance_fn(dart) if importance_fn else _compute_importance(dart, policy, cache)
    values = list(importance.values)

    max_reinstatements = (
        policy.max_reinstatements if policy.max_reinstatements is not None else 2 * n
    )
    blocked: set[tuple[int, DetailState]] = set()
    trace: list[Transition] = []
    reinstatements = 0
    step = 0

    while True:
        if (
            policy.target_token_ratio is not None
            and current_tokens / tokens_original <= policy.target_token_ratio
        ):
            break

        order = sorted(range(n), key=lambda i: (values[i], i))
        chosen = None
        for idx in order:
            state = current[idx]
            nxt = _NEXT_STATE.get(state)
            if nxt is None or (idx, state) in blocked:
                continue
            candidate = dict(current)
            candidate[idx] = nxt
            text = render_inline(dart, candidate)
            tokens = token_count(text, tokenizer)
            if tokens > current_tokens:
                blocked.add((idx, state))  # demoting would grow the prompt
                continue
            chosen = (idx, state, nxt, candidate, text, tokens)
            break
        if chosen is None:
            break

        idx, state, nxt, candidate, text, tokens = chosen
        step += 1
        report = verify(text, dart.source, policy)
        if report.passed:
            current = candidate
            current_text = text
            current_tokens = tokens
            trace.append(
                Transition(step, idx, state, nxt, "demote", True, tokens, report.compatibility)
            )
            continue

        trace.append(
            Transition(step, idx, state, nxt, "demote", False, tokens, report.compatibility)
        )
        step += 1
        trace.append(Transition(step, idx, nxt, state, "reinstate", True, current_tokens))
        blocked.add((idx, state))
        reinstatements += 1
        if reinstatements >= max_reinstatements:
            break
        # The game is re-evaluated after a reinstatement; the shared coalition
        # cache makes this cheap.
        if importance_fn is None:
            importance = _compute_importance(dart, policy, cache)
            values = list(importance.values)

    final_report = verify(current_text, dart.source, policy)
    final_dart = dart.with_importance(values)
    for idx, state in current.items():
        if state is not DetailState.INLINE:
            final_dart = final_dart.with_state(idx, state)

    return CompressionResult(
        dart=final_dart,
        compressed_text=current_text,
        tokens_original=tokens_original,
        tokens_compressed=current_tokens,
        compression_ratio=current_tokens / tokens_original,
        fidelity=final_report.scores,
        compatibility=final_report.compatibility,
        trace=tuple(trace),
    )
