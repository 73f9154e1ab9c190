"""Multi-modal retrieval-augmented MCQ evaluation.

Builds text, multi-modal, and page-image indexes over parsed PDF corpora,
assembles four augmentation strategies for multiple-choice QA, and computes
the full evaluation statistics: stratified accuracy with Agresti-Coull
intervals, contamination permutation tests, pairwise Wilcoxon comparisons,
retrieval precision, and cost/latency accounting with bootstrap intervals.
"""

__version__ = "0.1.0"

from .augmentation import (
    AugmentationStrategy,
    ContextBundle,
    ContextLimits,
    IndexSet,
    PromptPayload,
    StrategyKind,
    assemble_prompt,
    build_context,
)
from .corpus import (
    BenchmarkItem,
    Catalog,
    Chunk,
    Difficulty,
    PageImage,
    SourceDocument,
    Summary,
    VisualAsset,
    load_benchmark,
    save_benchmark,
    strata_counts,
    validate_item,
)
from .embeddings import (
    DenseVector,
    HttpEmbeddingClient,
    MultiVector,
    RetrieverId,
    StubEmbedder,
    embed_page,
    embed_query_multivector,
    embed_text,
)
from .errors import ConfigurationError, MmragError, TransportError
from .evaluation import (
    ItemResult,
    PriceTable,
    RunSpec,
    RunStore,
    accuracy,
    contamination_check,
    cost_of_results,
    permute_options,
    precision_at_k,
    price_per_correct,
    run_benchmark,
    throughput,
)
from .generation import (
    AnswerLetter,
    GenerationRecord,
    GeneratorConfig,
    HttpChatGenerator,
    OracleGenerator,
    ParseFailure,
    RandomGenerator,
    complete,
    extract_answer,
)
from .index import (
    CollectionConfig,
    InMemoryIndex,
    IndexEntry,
    maxsim_score,
    search_dense,
    search_late_interaction,
    upsert,
)
from .ingestion import (
    IngestionConfig,
    ParserEndpoint,
    chunk_document,
    normalize_page_image,
    parse_document,
    summarize_asset,
)
from .stats import (
    StatInterval,
    agresti_coull_interval,
    bonferroni,
    bootstrap_ci,
    paired_t_test,
    wilcoxon_signed_rank,
)
