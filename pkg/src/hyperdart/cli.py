"""Command-line entry point: ``dart build | compress | shapley | bench``.

Exit codes are stable: 0 ok, 2 I/O, 3 bad input, 4 scorer failure, 5 limits.
All randomness flows from ``--seed``; identical inputs and seed give
byte-identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .constrictor import DegenerateInput, HypernymLexicon, build_dart, bundled_lexicon
from .dart import DetailState, deserialize_dart, serialize_dart, dart_to_json, MalformedDart
from .fixtures import fixture_text
from .importance import TooManyDetails, shapley_exact, shapley_sampled, EXACT_LIMIT
from .metrics import ScorerFailure
from .optimizer import CompressionPolicy, compress
from .rag_bench import BenchConfig, EmptyDocument, emit_report, run_benchmark

EXIT_OK = 0
EXIT_IO = 2
EXIT_INPUT = 3
EXIT_SCORER = 4
EXIT_LIMITS = 5

_PARAGRAPH_SEP = "\n\n"


def _err(message: str) -> None:
    print(f"dart: {message}", file=sys.stderr)


def _load_config_file(path: str | None) -> dict[str, str]:
    """Key=value text config; '#' comments; flags override these values."""
    if not path:
        return {}
    out: dict[str, str] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"bad config line: {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _lexicon(args) -> HypernymLexicon:
    if args.lexicon:
        return HypernymLexicon.from_file(args.lexicon)
    return bundled_lexicon()


def _paragraphs(text: str) -> list[str]:
    return [p.strip() for p in text.split(_PARAGRAPH_SEP) if p.strip()]


def cmd_build(args) -> int:
    try:
        text = Path(args.input).read_text(encoding="utf-8")
        lexicon = _lexicon(args)
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO
    paragraphs = _paragraphs(text)
    if not paragraphs:
        _err("input has no non-empty paragraphs")
        return EXIT_INPUT
    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = Path(args.input).stem
        for i, para in enumerate(paragraphs):
            try:
                dart = build_dart(para, lexicon)
            except DegenerateInput as exc:
                _err(str(exc))
                return EXIT_INPUT
            path = out_dir / f"{stem}.{i:03d}.dart"
            path.write_text(serialize_dart(dart), encoding="utf-8")
            if args.json:
                (out_dir / f"{stem}.{i:03d}.json").write_text(dart_to_json(dart), encoding="utf-8")
            print(path)
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO
    return EXIT_OK


def _rebuild_dart(dart_path: str, source_path: str, lexicon: HypernymLexicon):
    """Re-derive the edit script for a serialized dart from its source text.

    The canonical format stores only the source hash, which is enough to check
    that the given source file is the right one; the constrictor then rebuilds
    the spans needed for scoring, and the stored states are grafted on.
    """
    stored = deserialize_dart(Path(dart_path).read_text(encoding="utf-8"))
    source = Path(source_path).read_text(encoding="utf-8")
    for candidate in (source, source.strip()):
        rebuilt = build_dart(candidate, lexicon)
        if rebuilt.source_hash == stored.source_hash:
            break
    else:
        raise ValueError(
            f"source hash mismatch: dart file has {stored.source_hash}, "
            f"source text gives {rebuilt.source_hash}"
        )
    if rebuilt.structural_key()[2] != stored.structural_key()[2]:
        for detail in stored.details:
            rebuilt = rebuilt.with_state(detail.index, detail.state)
    return rebuilt


def cmd_compress(args) -> int:
    try:
        lexicon = _lexicon(args)
        dart = _rebuild_dart(args.dart, args.source, lexicon)
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO
    except (MalformedDart, ValueError) as exc:
        _err(str(exc))
        return EXIT_INPUT
    policy = CompressionPolicy(
        min_fidelity=args.min_fidelity,
        target_token_ratio=args.target_ratio,
        seed=args.seed,
    )
    try:
        result = compress(dart, policy)
    except ScorerFailure as exc:
        _err(str(exc))
        return EXIT_SCORER
    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = Path(args.dart).stem
        (out_dir / f"{stem}.compressed.txt").write_text(result.compressed_text, encoding="utf-8")
        (out_dir / f"{stem}.dart").write_text(serialize_dart(result.dart), encoding="utf-8")
        payload = {
            "tokens_original": result.tokens_original,
            "tokens_compressed": result.tokens_compressed,
            "compression_ratio": result.compression_ratio,
            "compatibility": result.compatibility,
            "fidelity": result.fidelity,
            "trace": [
                {
                    "step": t.step,
                    "detail": t.detail,
                    "from": t.from_state.value,
                    "to": t.to_state.value,
                    "kind": t.kind,
                    "accepted": t.accepted,
                    "tokens_after": t.tokens_after,
                    "compatibility": t.compatibility,
                }
                for t in result.trace
            ],
        }
        (out_dir / f"{stem}.result.json").write_text(
            json.dumps(payload, indent=2) + "\n", encoding="utf-8"
        )
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO
    print(f"ratio={result.compression_ratio:.6f} compatibility={result.compatibility:.6f}")
    return EXIT_OK


def cmd_shapley(args) -> int:
    try:
        lexicon = _lexicon(args)
        dart = _rebuild_dart(args.dart, args.source, lexicon)
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO
    except (MalformedDart, ValueError) as exc:
        _err(str(exc))
        return EXIT_INPUT
    try:
        if args.samples is not None:
            vector = shapley_sampled(dart, permutations=args.samples, seed=args.seed)
        else:
            vector = shapley_exact(dart, exact_limit=EXACT_LIMIT)
    except TooManyDetails as exc:
        _err(f"{exc}")
        return EXIT_LIMITS
    except ValueError as exc:
        _err(str(exc))
        return EXIT_INPUT
    except ScorerFailure as exc:
        _err(str(exc))
        return EXIT_SCORER

    rows = [["index", "category", "phi", "std_error"]]
    for detail in dart.details:
        std = ""
        if vector.std_errors is not None:
            std = f"{vector.std_errors[detail.index]:.9f}"
        rows.append([detail.index, detail.category, f"{vector.values[detail.index]:.9f}", std])
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh).writerows(rows)
    else:
        csv.writer(sys.stdout).writerows(rows)
    print(
        f"efficiency_sum={sum(vector.values):.9f} "
        f"payoff_span={vector.payoff_full - vector.payoff_empty:.9f}"
    )
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        corpus = Path(args.corpus).read_text(encoding="utf-8") if args.corpus else fixture_text("dracula_excerpt.txt")
        if args.queries:
            queries = [q for q in Path(args.queries).read_text(encoding="utf-8").splitlines() if q.strip()]
        else:
            queries = [q for q in fixture_text("dracula_queries.txt").splitlines() if q.strip()]
        lexicon = _lexicon(args)
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO
    config = BenchConfig(
        k=args.k,
        compatibility_threshold=args.threshold,
        seed=args.seed,
        max_tokens=args.max_tokens,
        min_fidelity=args.min_fidelity,
        jobs=args.jobs,
    )
    try:
        report = run_benchmark(corpus, queries, config, lexicon)
        emit_report(report, args.out)
    except (EmptyDocument, ValueError) as exc:
        _err(str(exc))
        return EXIT_INPUT
    except ScorerFailure as exc:
        _err(str(exc))
        return EXIT_SCORER
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO
    mean_ratio = (
        sum(report.chunk_ratios.values()) / len(report.chunk_ratios) if report.chunk_ratios else 1.0
    )
    p = report.significance.p_value_one_sided if report.significance else 0.5
    print(f"queries={len(report.records)} mean_ratio={mean_ratio:.6f} p={p:.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dart",
        description="Dart-structured semantic text compression and its retrieval benchmark.",
    )
    parser.add_argument("--config", help="key=value config file; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--lexicon", help="lexicon TSV path (default: bundled)")
    common.add_argument("--seed", type=int, default=0, help="seed for all randomness")

    p_build = sub.add_parser("build", parents=[common], help="build canonical dart files, one per paragraph")
    p_build.add_argument("input", help="UTF-8 text file")
    p_build.add_argument("--out", default=".", help="output directory")
    p_build.add_argument("--json", action="store_true", help="also emit the JSON interchange form")
    p_build.set_defaults(func=cmd_build)

    p_compress = sub.add_parser("compress", parents=[common], help="compress a dart under a policy")
    p_compress.add_argument("dart", help="canonical dart file")
    p_compress.add_argument("--source", required=True, help="original paragraph text file")
    p_compress.add_argument("--min-fidelity", type=float, default=0.85)
    p_compress.add_argument("--target-ratio", type=float, default=None)
    p_compress.add_argument("--out", default=".", help="output directory")
    p_compress.set_defaults(func=cmd_compress)

    p_shapley = sub.add_parser("shapley", parents=[common], help="per-detail importance table (CSV)")
    p_shapley.add_argument("dart", help="canonical dart file")
    p_shapley.add_argument("--source", required=True, help="original paragraph text file")
    mode = p_shapley.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true", help="exact enumeration (default)")
    mode.add_argument("--samples", type=int, help="Monte-Carlo permutations")
    p_shapley.add_argument("--out", help="write CSV here instead of stdout")
    p_shapley.set_defaults(func=cmd_shapley)

    p_bench = sub.add_parser("bench", parents=[common], help="run the retrieval benchmark")
    p_bench.add_argument("--corpus", help="Gutenberg-style corpus (default: bundled excerpt)")
    p_bench.add_argument("--queries", help="query file, one per line (default: bundled)")
    p_bench.add_argument("--k", type=int, default=4)
    p_bench.add_argument("--threshold", type=float, default=0.85, help="compatibility gate")
    p_bench.add_argument("--max-tokens", type=int, default=120, help="chunking limit")
    p_bench.add_argument("--min-fidelity", type=float, default=0.85)
    p_bench.add_argument("--jobs", type=int, default=1, help="worker bound for chunk compression")
    p_bench.add_argument("--out", default="bench_out", help="report directory")
    p_bench.set_defaults(func=cmd_bench)
    return parser


def _apply_config(args, parser) -> None:
    overrides = _load_config_file(args.config)
    for key, value in overrides.items():
        attr = key.replace("-", "_").replace(".", "_")
        if hasattr(args, attr):
            current = getattr(args, attr)
            caster = type(current) if current is not None else str
            if caster is bool:
                setattr(args, attr, value.lower() in ("1", "true", "yes"))
            else:
                setattr(args, attr, caster(value))


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args, parser)
    except (OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_IO
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
