"""Stage 2: per-detail importance as Shapley values of a coalition game.

The players are the dart's details; the payoff of a coalition S is the fidelity
of the dart rendered with exactly the details in S kept INLINE (all others
DROPPED) against the original paragraph.  SWAPPED never enters the game, which
keeps importance evaluation independent of the optimizer's swap decisions.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from itertools import combinations

from .dart import Dart, DetailState
from .metrics import LexicalScorer, Scorer
from .recomposer import render_inline

__all__ = [
    "Coalition",
    "ImportanceVector",
    "TooManyDetails",
    "coalition_value",
    "shapley_exact",
    "shapley_sampled",
    "EXACT_LIMIT",
]

EXACT_LIMIT = 12


class TooManyDetails(ValueError):
    def __init__(self, n: int, limit: int):
        super().__init__(
            f"{n} details exceeds the exact enumeration limit of {limit}; "
            f"use shapley_sampled for larger darts"
        )
        self.n = n
        self.limit = limit


@dataclass(frozen=True)
class Coalition:
    """A subset of a dart's detail indices."""

    members: frozenset[int]

    @classmethod
    def of(cls, *indices: int) -> Coalition:
        return cls(frozenset(indices))

    def validate(self, dart: Dart):
        bad = self.members - set(range(dart.detail_count()))
        if bad:
            raise ValueError(f"coalition members {sorted(bad)} not in dart details")


@dataclass(frozen=True)
class ImportanceVector:
    """Per-detail Shapley values plus the payoff endpoints of the game."""

    values: tuple[float, ...]
    payoff_empty: float
    payoff_full: float
    std_errors: tuple[float, ...] | None = None

    def efficiency_gap(self) -> float:
        return abs(sum(self.values) - (self.payoff_full - self.payoff_empty))


def coalition_value(
    dart: Dart,
    coalition: Coalition,
    scorer: Scorer | None = None,
    cache: dict[frozenset[int], float] | None = None,
) -> float:
    """v(S): fidelity of the render keeping exactly S inline, others dropped."""
    coalition.validate(dart)
    scorer = scorer or LexicalScorer()
    if cache is not None and coalition.members in cache:
        return cache[coalition.members]
    states = {
        d.index: DetailState.INLINE if d.index in coalition.members else DetailState.DROPPED
        for d in dart.details
    }
    value = scorer.score(render_inline(dart, states), dart.source)
    if cache is not None:
        cache[coalition.members] = value
    return value


def shapley_exact(
    dart: Dart,
    scorer: Scorer | None = None,
    exact_limit: int = EXACT_LIMIT,
    cache: dict[frozenset[int], float] | None = None,
) -> ImportanceVector:
    """Exact Shapley values by coalition enumeration (memoized, 2^n payoffs).

    phi_i = sum over S not containing i of |S|!(n-|S|-1)!/n! * (v(S+i) - v(S)).
    """
    n = dart.detail_count()
    if n > exact_limit:
        raise TooManyDetails(n, exact_limit)
    scorer = scorer or LexicalScorer()
    cache = cache if cache is not None else {}

    def v(members: frozenset[int]) -> float:
        return coalition_value(dart, Coalition(members), scorer, cache)

    empty = v(frozenset())
    full = v(frozenset(range(n)))
    if n == 0:
        return ImportanceVector(values=(), payoff_empty=empty, payoff_full=full)

    fact = [math.factorial(k) for k in range(n + 1)]
    weights = [fact[s] * fact[n - s - 1] / fact[n] for s in range(n)]
    values = [0.0] * n
    players = list(range(n))
    for size in range(n):
        w = weights[size]
        for combo in combinations(players, size):
            base = frozenset(combo)
            v_base = v(base)
            for i in players:
                if i in base:
                    continue
                values[i] += w * (v(base | {i}) - v_base)
    return ImportanceVector(values=tuple(values), payoff_empty=empty, payoff_full=full)


def shapley_sampled(
    dart: Dart,
    scorer: Scorer | None = None,
    permutations: int = 200,
    seed: int = 0,
    cache: dict[frozenset[int], float] | None = None,
) -> ImportanceVector:
    """Monte-Carlo permutation estimate with antithetic pairing.

    Permutations are drawn as (pi, reversed(pi)) pairs, which cancels a large
    share of the positional variance.  The per-detail standard error is the
    sample deviation over pair means.  Identical seeds give identical output.
    """
    if permutations < 1:
        raise ValueError("permutations must be >= 1")
    n = dart.detail_count()
    scorer = scorer or LexicalScorer()
    cache = cache if cache is not None else {}

    def v(members: frozenset[int]) -> float:
        return coalition_value(dart, Coalition(members), scorer, cache)

    empty = v(frozenset())
    full = v(frozenset(range(n)))
    if n == 0:
        return ImportanceVector(values=(), payoff_empty=empty, payoff_full=full, std_errors=())

    rng = random.Random(seed)
    perms: list[list[int]] = []
    while len(perms) < permutations:
        perm = list(range(n))
        rng.shuffle(perm)
        perms.append(perm)
        if len(perms) < permutations:
            perms.append(perm[::-1])

    def marginals(perm: list[int]) -> list[float]:
        out = [0.0] * n
        members: frozenset[int] = frozenset()
        prev = empty
        for i in perm:
            members = members | {i}
            cur = v(members)
            out[i] = cur - prev
            prev = cur
        return out

    totals = [0.0] * n
    pair_means: list[list[float]] = []
    k = 0
    while k < len(perms):
        first = marginals(perms[k])
        if k + 1 < len(perms):
            second = marginals(perms[k + 1])
            pair = [(a + b) / 2.0 for a, b in zip(first, second)]
            for i in range(n):
                totals[i] += first[i] + second[i]
            k += 2
        else:
            pair = first
            for i in range(n):
                totals[i] += first[i]
            k += 1
        pair_means.append(pair)

    values = tuple(t / permutations for t in totals)
    groups = len(pair_means)
    std_errors = []
    for i in range(n):
        mean_i = sum(p[i] for p in pair_means) / groups
        if groups > 1:
            var = sum((p[i] - mean_i) ** 2 for p in pair_means) / (groups - 1)
            std_errors.append(math.sqrt(var / groups))
        else:
            std_errors.append(0.0)
    return ImportanceVector(
        values=values,
        payoff_empty=empty,
        payoff_full=full,
        std_errors=tuple(std_errors),
    )
