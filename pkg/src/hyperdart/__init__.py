"""hyperdart: dart-structured semantic text compression with Shapley-scored
details, verified demotion, granular reconstruction, and a TF-IDF retrieval
benchmark."""

from .dart import (
    Dart,
    Detail,
    DetailState,
    Granularity,
    MalformedDart,
    dart_from_json,
    dart_to_json,
    deserialize_dart,
    fnv1a64,
    serialize_dart,
)
from .constrictor import (
    DegenerateInput,
    DetailCandidate,
    Detector,
    HypernymLexicon,
    RuleConfig,
    build_dart,
    bundled_lexicon,
    detect_details,
    generalize,
)
from .importance import (
    Coalition,
    ImportanceVector,
    TooManyDetails,
    coalition_value,
    shapley_exact,
    shapley_sampled,
)
from .optimizer import (
    CompressionPolicy,
    CompressionResult,
    VerificationReport,
    compress,
    replay_trace,
    verify,
)
from .recomposer import (
    GeneratorFailure,
    ModelGenerator,
    ReconstructionLog,
    TemplateGenerator,
    profile_matrix_sweep,
    reconstruct,
    render,
    render_inline,
    roundtrip_check,
)
from .metrics import (
    EmbeddingScorer,
    LexicalScorer,
    RougeScore,
    ScorerFailure,
    WhitespaceTokenizer,
    compression_ratio,
    embedding_similarity,
    lcs_length,
    paired_significance,
    rouge_l,
    token_count,
)
from .gateway import (
    GatewayClient,
    ModelKind,
    ModelProfile,
    mock_embed_profile,
    mock_generate_profile,
)
from .rag_bench import (
    BenchConfig,
    BenchReport,
    Chunk,
    ChunkingPolicy,
    EmptyDocument,
    TfIdfIndex,
    build_index,
    chunk_document,
    compress_corpus,
    emit_report,
    ingest_gutenberg,
    query,
    run_benchmark,
)

__version__ = "0.1.0"
