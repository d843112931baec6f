"""Stage 5: turn darts back into text.

Two renderers live here.  ``render`` is the display form: the core followed by
a parenthesized tail, which is the canonical human-readable dart ("A dog barked
loudly at a mail carrier. (Details: breed=German Shepherd, ...)").  The second,
``render_inline``, is the state-respecting text used for token accounting and
fidelity scoring: INLINE details keep their original wording in place, SWAPPED
details leave the hypernym plus a trailing ``[k]`` indicator, DROPPED details
leave the hypernym only.  With every detail INLINE it reproduces the source
byte-exact, which is what makes the compression losslessness checkable.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Mapping

from .dart import Dart, DetailState, Granularity, fnv1a64
from .gateway import GatewayClient, ModelKind, ModelProfile

__all__ = [
    "GeneratorFailure",
    "TemplateGenerator",
    "ModelGenerator",
    "render",
    "render_inline",
    "reconstruct",
    "roundtrip_check",
    "RoundTripReport",
    "DetailRecovery",
    "ReconstructionLog",
    "profile_matrix_sweep",
    "SweepCell",
]


class GeneratorFailure(RuntimeError):
    """A generator backend failed to produce text."""


def render(dart: Dart, granularity: Granularity) -> str:
    """Deterministic display rendering at CORE, SWAPPED, or FULL granularity.

    DROPPED details are omitted from the tail; an empty tail is elided.
    """
    if granularity is Granularity.REGENERATED:
        raise ValueError("REGENERATED rendering needs a generator; use reconstruct()")
    if granularity is Granularity.CORE:
        return dart.core
    visible = [d for d in dart.details if d.state is not DetailState.DROPPED]
    if not visible:
        return dart.core
    if granularity is Granularity.SWAPPED:
        tail = ", ".join(f"[{d.index}]={d.category}" for d in visible)
    else:
        tail = ", ".join(f"{d.category}={d.surface}" for d in visible)
    return f"{dart.core} (Details: {tail})"


def render_inline(dart: Dart, states: Mapping[int, DetailState] | None = None) -> str:
    """State-respecting text over the original source (see module docstring).

    ``states`` overrides the stored detail states, which lets the importance
    game evaluate hypothetical coalitions without rebuilding darts.
    """
    if dart.source is None:
        raise ValueError(
            "dart has no source text (deserialized darts cannot be inline-rendered); "
            "rebuild it from the original paragraph"
        )
    if states is None:
        states = dart.states()
    if not dart.details:
        return dart.source

    non_inline_sentences = {
        e.sentence
        for e in dart.edits
        if e.detail is not None and states[e.detail] is not DetailState.INLINE
    }

    def applies(edit) -> bool:
        if edit.detail is not None:
            return states[edit.detail] is not DetailState.INLINE
        return edit.sentence in non_inline_sentences

    text = dart.source
    for edit in sorted(dart.edits, key=lambda e: e.start, reverse=True):
        if applies(edit):
            text = text[: edit.start] + edit.replacement + text[edit.end :]

    indicators = [f"[{i}]" for i in sorted(states) if states[i] is DetailState.SWAPPED]
    if indicators:
        text = f"{text} {' '.join(indicators)}"
    return text


class TemplateGenerator:
    """Pure generator: renders at the requested level, REGENERATED maps to FULL."""

    generator_id = "template"

    def generate(self, dart: Dart, granularity: Granularity, **params) -> str:
        level = Granularity.FULL if granularity is Granularity.REGENERATED else granularity
        return render(dart, level)


class ModelGenerator:
    """Generator backed by a gateway GENERATE profile.

    The prompt is the dart rendered at the requested level (REGENERATED prompts
    with FULL detail so the backend can recover every surface).
    """

    def __init__(self, client: GatewayClient, profile: ModelProfile):
        if profile.kind is not ModelKind.GENERATE:
            raise ValueError(f"profile {profile.id!r} cannot generate")
        self._client = client
        self.profile = profile
        self.generator_id = profile.id

    def generate(self, dart: Dart, granularity: Granularity, **params) -> str:
        level = Granularity.FULL if granularity is Granularity.REGENERATED else granularity
        prompt = render(dart, level)
        try:
            return self._client.generate(prompt, self.profile, **params)
        except Exception as exc:
            raise GeneratorFailure(f"{self.profile.id}: {exc}") from exc


class ReconstructionLog:
    """Line-oriented log of reconstruction calls, one block per call."""

    def __init__(self, sink: io.TextIOBase | None = None):
        self._sink = sink
        self.records: list[dict] = []

    def record(self, dart: Dart, granularity: Granularity, generator_id: str, params: dict, output: str):
        entry = {
            "dart_hash": dart.dart_hash(),
            "granularity": granularity.name,
            "generator": generator_id,
            "params": " ".join(f"{k}={params[k]}" for k in sorted(params)) or "-",
            "output_hash": fnv1a64(output),
        }
        self.records.append(entry)
        if self._sink is not None:
            self._sink.write(self.format_block(entry))

    @staticmethod
    def format_block(entry: dict) -> str:
        return (
            "RECON v1\n"
            f"dart-hash: {entry['dart_hash']}\n"
            f"granularity: {entry['granularity']}\n"
            f"generator: {entry['generator']}\n"
            f"params: {entry['params']}\n"
            f"output-hash: {entry['output_hash']}\n"
            "end\n"
        )


def reconstruct(
    dart: Dart,
    granularity: Granularity,
    generator,
    log: ReconstructionLog | None = None,
    **params,
) -> str:
    """Generate text for the dart at the requested granularity and log the call."""
    output = generator.generate(dart, granularity, **params)
    if log is not None:
        log.record(dart, granularity, generator.generator_id, params, output)
    return output


@dataclass(frozen=True)
class DetailRecovery:
    index: int
    surface: str
    in_full_render: bool
    stored: bool  # surfaces always survive in the structure


@dataclass(frozen=True)
class RoundTripReport:
    all_surfaces_present: bool
    byte_exact: bool
    details: tuple[DetailRecovery, ...]
    dropped_from_render: tuple[int, ...]


def roundtrip_check(original: str, dart: Dart) -> RoundTripReport:
    """Losslessness report for a dart built from ``original``.

    Checks that every non-dropped surface appears verbatim in the FULL render,
    and that undoing every recorded edit reproduces the original byte-exact.
    """
    full = render(dart, Granularity.FULL)
    recoveries = []
    dropped = []
    for d in dart.details:
        present = d.surface in full
        if d.state is DetailState.DROPPED:
            dropped.append(d.index)
        recoveries.append(DetailRecovery(d.index, d.surface, present, True))
    inline_all = {d.index: DetailState.INLINE for d in dart.details}
    try:
        reconstruction = render_inline(dart, inline_all)
    except ValueError:
        reconstruction = None
    byte_exact = reconstruction == original
    visible_ok = all(
        r.in_full_render for r in recoveries if r.index not in dropped
    )
    return RoundTripReport(
        all_surfaces_present=visible_ok,
        byte_exact=byte_exact,
        details=tuple(recoveries),
        dropped_from_render=tuple(dropped),
    )


@dataclass(frozen=True)
class SweepCell:
    constrict_profile: str
    reconstruct_profile: str
    dart_hash: str
    output: str
    template_matches_render: bool


def profile_matrix_sweep(
    darts: list[Dart],
    constrict_profiles: list[ModelProfile],
    reconstruct_profiles: list[ModelProfile],
    client: GatewayClient | None = None,
    log: ReconstructionLog | None = None,
) -> list[SweepCell]:
    """Run every constrict/reconstruct profile pair over the given darts.

    Constriction here is the local rule pipeline, so the constrict profile is
    carried as configuration metadata; reconstruction goes through the named
    GENERATE profile, and each cell also cross-checks the template generator
    against the plain FULL render.
    """
    ids = [p.id for p in constrict_profiles + reconstruct_profiles]
    if len(set(ids)) != len(ids):
        raise ValueError("profile ids must be unique within a sweep")
    client = client or GatewayClient()
    template = TemplateGenerator()
    cells = []
    for con in constrict_profiles:
        for rec in reconstruct_profiles:
            generator = ModelGenerator(client, rec)
            for dart in darts:
                output = reconstruct(dart, Granularity.FULL, generator, log=log)
                template_out = reconstruct(dart, Granularity.FULL, template, log=log)
                cells.append(
                    SweepCell(
                        constrict_profile=con.id,
                        reconstruct_profile=rec.id,
                        dart_hash=dart.dart_hash(),
                        output=output,
                        template_matches_render=template_out == render(dart, Granularity.FULL),
                    )
                )
    return cells
