"""TF-IDF retrieval benchmark: measures what dart compression saves in a
prompt-assembly loop over a fixed corpus and query set.

For each query the top-k chunks are retrieved twice: once as-is (the standard
prompt) and once substituting each chunk's compressed text whenever its
compatibility clears the gate threshold.  The report carries per-query token
accounting plus the four aggregate panels: top-15 per-chunk token efficiency,
a paired significance test of the savings, the compression-ratio histogram,
and the prompt-level ROUGE-L comparison.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .constrictor import HypernymLexicon, build_dart
from .metrics import (
    SignificanceResult,
    Tokenizer,
    WHITESPACE,
    paired_significance,
    rouge_l,
    token_count,
)
from .optimizer import CompressionPolicy, CompressionResult, compress

__all__ = [
    "EmptyDocument",
    "IngestResult",
    "Chunk",
    "ChunkingPolicy",
    "TfIdfIndex",
    "CompressedChunk",
    "CorpusCompression",
    "BenchConfig",
    "QueryRecord",
    "BenchReport",
    "ingest_gutenberg",
    "chunk_document",
    "build_index",
    "query",
    "compress_corpus",
    "run_benchmark",
    "emit_report",
    "HISTOGRAM_BINS",
]

HISTOGRAM_BINS = 20

_START_MARKER = "*** START OF"
_END_MARKER = "*** END OF"


class EmptyDocument(ValueError):
    pass


@dataclass(frozen=True)
class IngestResult:
    text: str
    marker_found: bool
    warnings: tuple[str, ...] = ()


def ingest_gutenberg(raw: str) -> IngestResult:
    """Body between the Gutenberg start/end marker lines, LF-normalized.

    Without markers the whole input is returned with a warning flag.
    """
    text = raw.replace("\r\n", "\n").replace("\r", "\n")
    lines = text.split("\n")
    start_idx = next((i for i, l in enumerate(lines) if _START_MARKER in l), None)
    end_idx = next((i for i, l in enumerate(lines) if _END_MARKER in l), None)
    if start_idx is not None and end_idx is not None and start_idx < end_idx:
        body = "\n".join(lines[start_idx + 1 : end_idx]).strip("\n")
        result = IngestResult(text=body, marker_found=True)
    else:
        result = IngestResult(
            text=text.strip("\n"),
            marker_found=False,
            warnings=("gutenberg markers not found; using whole input",),
        )
    if not result.text.strip():
        raise EmptyDocument("no document body after ingestion")
    return result


@dataclass(frozen=True)
class Chunk:
    id: int
    text: str
    source_span: tuple[int, int]
    token_count: int


@dataclass(frozen=True)
class ChunkingPolicy:
    max_tokens: int = 512
    tokenizer: Tokenizer = WHITESPACE


_PARAGRAPH_SEP_RE = re.compile(r"\n\s*\n")
_SENTENCE_BREAK_RE = re.compile(r"(?<=[.!?])\s+")


def chunk_document(document: str, policy: ChunkingPolicy | None = None) -> list[Chunk]:
    """Blank-line paragraphs; oversized ones split greedily at sentence breaks.

    Chunk texts are exact document slices, so the chunks of one paragraph
    concatenate back to that paragraph byte-exact.
    """
    policy = policy or ChunkingPolicy()
    chunks: list[Chunk] = []
    pos = 0
    paragraph_spans = []
    for sep in _PARAGRAPH_SEP_RE.finditer(document):
        paragraph_spans.append((pos, sep.start()))
        pos = sep.end()
    paragraph_spans.append((pos, len(document)))

    for pstart, pend in paragraph_spans:
        para = document[pstart:pend]
        if not para.strip():
            continue
        if token_count(para, policy.tokenizer) <= policy.max_tokens:
            chunks.append(Chunk(len(chunks), para, (pstart, pend), token_count(para, policy.tokenizer)))
            continue
        starts = [0] + [m.end() for m in _SENTENCE_BREAK_RE.finditer(para)]
        bounds = starts + [len(para)]
        run_start = bounds[0]
        run_tokens = 0
        for si in range(len(starts)):
            sent = para[bounds[si] : bounds[si + 1]]
            stoks = token_count(sent, policy.tokenizer)
            if run_tokens and run_tokens + stoks > policy.max_tokens:
                text = para[run_start : bounds[si]]
                chunks.append(
                    Chunk(len(chunks), text, (pstart + run_start, pstart + bounds[si]), token_count(text, policy.tokenizer))
                )
                run_start = bounds[si]
                run_tokens = stoks
            else:
                run_tokens += stoks
        text = para[run_start:]
        if text.strip():
            chunks.append(
                Chunk(len(chunks), text, (pstart + run_start, pend), token_count(text, policy.tokenizer))
            )
    return chunks


_INDEX_TOKEN_RE = re.compile(r"[a-z0-9']+")


def _index_terms(text: str) -> list[str]:
    return _INDEX_TOKEN_RE.findall(text.casefold())


@dataclass
class TfIdfIndex:
    """Document frequencies plus one L2-normalized tf-idf vector per chunk."""

    n_chunks: int
    document_frequency: dict[str, int]
    vectors: list[dict[str, float]]

    def idf(self, term: str) -> float:
        df = self.document_frequency.get(term, 0)
        return math.log((self.n_chunks + 1) / (df + 1)) + 1.0


def _normalize(vec: dict[str, float]) -> dict[str, float]:
    norm = math.sqrt(sum(w * w for w in vec.values()))
    if norm == 0.0:
        return dict(vec)
    return {t: w / norm for t, w in vec.items()}


def build_index(chunks: list[Chunk]) -> TfIdfIndex:
    if not chunks:
        raise ValueError("cannot index an empty chunk list")
    df: dict[str, int] = {}
    term_counts = []
    for chunk in chunks:
        counts: dict[str, int] = {}
        for term in _index_terms(chunk.text):
            counts[term] = counts.get(term, 0) + 1
        term_counts.append(counts)
        for term in counts:
            df[term] = df.get(term, 0) + 1
    index = TfIdfIndex(n_chunks=len(chunks), document_frequency=df, vectors=[])
    for counts in term_counts:
        vec = {t: c * index.idf(t) for t, c in counts.items()}
        index.vectors.append(_normalize(vec))
    return index


def query(index: TfIdfIndex, text: str, k: int) -> list[tuple[int, float]]:
    """Top-k (chunk id, cosine score), ties broken by lower id.

    A query with no indexed terms returns an empty list rather than erroring.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    counts: dict[str, int] = {}
    for term in _index_terms(text):
        if term in index.document_frequency:
            counts[term] = counts.get(term, 0) + 1
    if not counts:
        return []
    qvec = _normalize({t: c * index.idf(t) for t, c in counts.items()})
    scored = []
    for chunk_id, vec in enumerate(index.vectors):
        score = sum(w * vec.get(t, 0.0) for t, w in qvec.items())
        scored.append((chunk_id, score))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:k]


@dataclass(frozen=True)
class CompressedChunk:
    chunk_id: int
    result: CompressionResult

    @property
    def compatibility(self) -> float:
        return self.result.compatibility


@dataclass(frozen=True)
class CorpusCompression:
    compressed: tuple[CompressedChunk, ...]
    failures: tuple[tuple[int, str], ...] = ()

    @property
    def partial(self) -> bool:
        return bool(self.failures)


def compress_corpus(
    chunks: list[Chunk],
    lexicon: HypernymLexicon,
    policy: CompressionPolicy,
    jobs: int = 1,
) -> CorpusCompression:
    """Dart-compress every chunk; per-chunk failures are recorded, not fatal."""

    def one(chunk: Chunk) -> CompressedChunk:
        dart = build_dart(chunk.text, lexicon)
        return CompressedChunk(chunk_id=chunk.id, result=compress(dart, policy))

    results: dict[int, CompressedChunk] = {}
    failures: list[tuple[int, str]] = []
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {chunk.id: pool.submit(one, chunk) for chunk in chunks}
        for chunk in chunks:
            try:
                results[chunk.id] = futures[chunk.id].result()
            except Exception as exc:
                failures.append((chunk.id, f"{type(exc).__name__}: {exc}"))
    else:
        for chunk in chunks:
            try:
                results[chunk.id] = one(chunk)
            except Exception as exc:
                failures.append((chunk.id, f"{type(exc).__name__}: {exc}"))
    ordered = tuple(results[c.id] for c in chunks if c.id in results)
    return CorpusCompression(compressed=ordered, failures=tuple(failures))


@dataclass
class BenchConfig:
    k: int = 4
    compatibility_threshold: float = 0.85
    tokenizer: Tokenizer = WHITESPACE
    seed: int = 7
    max_tokens: int = 120
    min_fidelity: float = 0.85
    jobs: int = 1

    def echo(self) -> dict:
        return {
            "k": self.k,
            "compatibility_threshold": self.compatibility_threshold,
            "tokenizer": self.tokenizer.name,
            "seed": self.seed,
            "max_tokens": self.max_tokens,
            "min_fidelity": self.min_fidelity,
        }


@dataclass(frozen=True)
class QueryRecord:
    query_id: int
    query: str
    retrieved: tuple[int, ...]
    gates: tuple[bool, ...]
    tokens_standard: int
    tokens_hypernym: int
    rouge_l_f: float


@dataclass
class BenchReport:
    config: dict
    records: list[QueryRecord]
    chunk_ratios: dict[int, float]
    chunk_compatibilities: dict[int, float]
    top_efficiency: list[tuple[int, float]]
    histogram: list[int]
    significance: SignificanceResult | None
    mean_rouge_l: float
    warnings: tuple[str, ...] = ()


def _ratio_bin(ratio: float) -> int:
    return min(HISTOGRAM_BINS - 1, max(0, math.ceil(ratio * HISTOGRAM_BINS) - 1))


def run_benchmark(
    corpus: str,
    queries: list[str],
    config: BenchConfig | None = None,
    lexicon: HypernymLexicon | None = None,
) -> BenchReport:
    """The full protocol: ingest, chunk, index, compress, retrieve, aggregate."""
    from .constrictor import bundled_lexicon

    config = config or BenchConfig()
    lexicon = lexicon or bundled_lexicon()
    if not queries:
        raise ValueError("query list is empty")

    ingested = ingest_gutenberg(corpus)
    chunks = chunk_document(ingested.text, ChunkingPolicy(config.max_tokens, config.tokenizer))
    index = build_index(chunks)
    policy = CompressionPolicy(
        min_fidelity=config.min_fidelity,
        tokenizer=config.tokenizer,
        seed=config.seed,
    )
    corpus_compression = compress_corpus(chunks, lexicon, policy, jobs=config.jobs)
    by_id = {cc.chunk_id: cc for cc in corpus_compression.compressed}
    chunk_texts = {c.id: c.text for c in chunks}

    records: list[QueryRecord] = []
    histogram = [0] * HISTOGRAM_BINS
    for qid, qtext in enumerate(queries):
        hits = query(index, qtext, config.k)
        retrieved = tuple(cid for cid, _ in hits)
        gates = []
        standard_parts = []
        hypernym_parts = []
        for cid in retrieved:
            cc = by_id.get(cid)
            gate = cc is not None and cc.compatibility >= config.compatibility_threshold
            gates.append(gate)
            standard_parts.append(chunk_texts[cid])
            hypernym_parts.append(cc.result.compressed_text if gate else chunk_texts[cid])
            if cc is not None:
                histogram[_ratio_bin(cc.result.compression_ratio)] += 1
        standard_prompt = "\n\n".join(standard_parts)
        hypernym_prompt = "\n\n".join(hypernym_parts)
        records.append(
            QueryRecord(
                query_id=qid,
                query=qtext,
                retrieved=retrieved,
                gates=tuple(gates),
                tokens_standard=token_count(standard_prompt, config.tokenizer),
                tokens_hypernym=token_count(hypernym_prompt, config.tokenizer),
                rouge_l_f=rouge_l(hypernym_prompt, standard_prompt, config.tokenizer).f,
            )
        )

    chunk_ratios = {cc.chunk_id: cc.result.compression_ratio for cc in corpus_compression.compressed}
    chunk_compat = {cc.chunk_id: cc.compatibility for cc in corpus_compression.compressed}
    efficiency = sorted(
        ((cid, 1.0 - ratio) for cid, ratio in chunk_ratios.items()),
        key=lambda pair: (-pair[1], pair[0]),
    )[:15]
    significance = None
    if len(records) >= 2:
        significance = paired_significance(
            [float(r.tokens_standard) for r in records],
            [float(r.tokens_hypernym) for r in records],
        )
    mean_rouge = sum(r.rouge_l_f for r in records) / len(records)
    config_echo = dict(config.echo())
    config_echo["lexicon_version"] = lexicon.version
    warnings = ingested.warnings + tuple(
        f"chunk {cid} failed: {msg}" for cid, msg in corpus_compression.failures
    )
    return BenchReport(
        config=config_echo,
        records=records,
        chunk_ratios=chunk_ratios,
        chunk_compatibilities=chunk_compat,
        top_efficiency=efficiency,
        histogram=histogram,
        significance=significance,
        mean_rouge_l=mean_rouge,
        warnings=warnings,
    )


def _fmt(value: float) -> str:
    return format(value, ".10g")


def emit_report(report: BenchReport, out_dir) -> list[str]:
    """Write report.csv, aggregates.csv, histogram.csv, and report.json.

    Column order and float formatting are fixed, so identical reports always
    produce byte-identical files.
    """
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []

    def write_csv(name: str, header: list[str], rows: list[list]) -> None:
        path = out / name
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        path.write_text(buf.getvalue(), encoding="utf-8")
        paths.append(str(path))

    write_csv(
        "report.csv",
        ["query_id", "query", "retrieved_ids", "gates", "tokens_standard", "tokens_hypernym", "rouge_l_f"],
        [
            [
                r.query_id,
                r.query,
                ";".join(map(str, r.retrieved)),
                ";".join("1" if g else "0" for g in r.gates),
                r.tokens_standard,
                r.tokens_hypernym,
                _fmt(r.rouge_l_f),
            ]
            for r in report.records
        ],
    )

    agg_rows: list[list] = []
    for rank, (cid, eff) in enumerate(report.top_efficiency, start=1):
        agg_rows.append(["top15_efficiency", f"rank_{rank:02d}_chunk_{cid}", _fmt(eff)])
    if report.significance is not None:
        agg_rows.append(["significance", "t_statistic", _fmt(report.significance.t_statistic)])
        agg_rows.append(["significance", "p_value_one_sided", _fmt(report.significance.p_value_one_sided)])
        agg_rows.append(["significance", "n", str(report.significance.n)])
    if report.chunk_ratios:
        mean_ratio = sum(report.chunk_ratios.values()) / len(report.chunk_ratios)
        agg_rows.append(["ratio_histogram", "mean_compression_ratio", _fmt(mean_ratio)])
    agg_rows.append(["rouge_comparison", "mean_rouge_l_f", _fmt(report.mean_rouge_l)])
    total_std = sum(r.tokens_standard for r in report.records)
    total_hyp = sum(r.tokens_hypernym for r in report.records)
    agg_rows.append(["rouge_comparison", "total_tokens_standard", str(total_std)])
    agg_rows.append(["rouge_comparison", "total_tokens_hypernym", str(total_hyp)])
    write_csv("aggregates.csv", ["panel", "metric", "value"], agg_rows)

    write_csv(
        "histogram.csv",
        ["panel", "bin_low", "bin_high", "count"],
        [
            ["ratio_histogram", _fmt(i / HISTOGRAM_BINS), _fmt((i + 1) / HISTOGRAM_BINS), count]
            for i, count in enumerate(report.histogram)
        ],
    )

    payload = {
        "config": report.config,
        "warnings": list(report.warnings),
        "records": [
            {
                "query_id": r.query_id,
                "query": r.query,
                "retrieved": list(r.retrieved),
                "gates": list(r.gates),
                "tokens_standard": r.tokens_standard,
                "tokens_hypernym": r.tokens_hypernym,
                "rouge_l_f": r.rouge_l_f,
            }
            for r in report.records
        ],
        "chunk_ratios": {str(k): v for k, v in sorted(report.chunk_ratios.items())},
        "chunk_compatibilities": {str(k): v for k, v in sorted(report.chunk_compatibilities.items())},
        "top_efficiency": [[cid, eff] for cid, eff in report.top_efficiency],
        "histogram": report.histogram,
        "significance": (
            {
                "t_statistic": (
                    report.significance.t_statistic
                    if math.isfinite(report.significance.t_statistic)
                    else str(report.significance.t_statistic)
                ),
                "p_value_one_sided": report.significance.p_value_one_sided,
                "n": report.significance.n,
            }
            if report.significance
            else None
        ),
        "mean_rouge_l": report.mean_rouge_l,
    }
    json_path = out / "report.json"
    json_path.write_text(json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    paths.append(str(json_path))
    return paths
