"""Command-line surface: ingest, index, evaluate, report, compare.

Exit codes: 0 success, 1 operational error, 2 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from .augmentation import AugmentationStrategy, ContextLimits, IndexSet, StrategyKind
from .config import AppConfig
from .corpus import load_benchmark
from .embeddings import (
    DEFAULT_DENSE_DIM,
    HttpEmbeddingClient,
    MULTIVECTOR_DIM,
    RetrieverId,
    StubEmbedder,
    embed_page,
    embed_text,
)
from .errors import ConfigurationError, MmragError
from .evaluation import (
    ModelPrice,
    PriceTable,
    RunSpec,
    RunStore,
    accuracy,
    run_benchmark,
)
from .generation import (
    FixedLetterGenerator,
    GeneratorConfig,
    HttpChatGenerator,
    ImageDigestGenerator,
    OracleGenerator,
    RandomGenerator,
)
from .index import (
    AssetRef,
    CollectionConfig,
    IndexEntry,
    InMemoryIndex,
    PageRef,
    TextChunkRef,
    page_key,
)
from .ingestion import (
    FixtureParserClient,
    IngestionConfig,
    ParserEndpoint,
    ingest_document,
    parse_document,
)
from .reporting import (
    RunData,
    build_accuracy_table,
    build_metrics_table,
    build_parse_failure_table,
    build_significance_table,
    format_p,
    render_delimited,
    render_markdown,
)
from .stats import bonferroni, wilcoxon_signed_rank
from .storage import IngestStore

logger = logging.getLogger(__name__)


def _ingestion_config(config: AppConfig) -> IngestionConfig:
    section = config.section("ingestion")
    return IngestionConfig(
        token_budget=int(section.get("token_budget", 16000)),
        image_long_side_px=int(section.get("image_long_side_px", 1300)),
        summarize_assets=bool(section.get("summarize_assets", True)),
    )


def _embedder(config: AppConfig):
    section = config.section("embedding")
    mode = section.get("mode", "stub")
    if mode == "stub":
        return StubEmbedder(
            dense_dim=int(section.get("dense_dim", DEFAULT_DENSE_DIM)),
            patch_tokens=int(section.get("patch_tokens", 4)),
        )
    if mode == "http":
        return HttpEmbeddingClient(
            base_url=str(config.require("embedding.base_url")),
            api_key=section.get("api_key") or None,
            timeout_s=float(section.get("timeout_s", 60)),
            dense_dim=int(section.get("dense_dim", DEFAULT_DENSE_DIM)),
        )
    raise ConfigurationError(f"unknown embedding mode {mode!r}")


def _summarizer(config: AppConfig):
    name = config.get("ingestion.summarizer", "digest")
    if name == "digest":
        return ImageDigestGenerator()
    return _generator(config, str(name), items=None)


def _generator(config: AppConfig, name: str, items):
    generators = config.section("generators")
    if name not in generators:
        raise ConfigurationError(f"generator {name!r} not present in config")
    entry = generators[name]
    kind = entry.get("kind", "http")
    if kind == "oracle":
        if items is None:
            raise ConfigurationError("oracle generator needs the benchmark items")
        from .testing import answer_key

        return OracleGenerator(answer_key(items))
    if kind == "random":
        return RandomGenerator(seed=int(entry.get("seed", 0)))
    if kind == "fixed":
        return FixedLetterGenerator(letter=str(entry.get("letter", "A")))
    if kind == "digest":
        return ImageDigestGenerator()
    if kind == "http":
        return HttpChatGenerator(
            GeneratorConfig(
                endpoint=str(entry["endpoint"]),
                model_id=str(entry.get("model_id", name)),
                api_key=str(entry.get("api_key", "")),
                temperature=entry.get("temperature"),
                seed=entry.get("seed"),
                max_images=int(entry.get("max_images", 8)),
                timeout_s=float(entry.get("timeout_s", 120)),
                retries=int(entry.get("retries", 0)),
                streaming=bool(entry.get("streaming", False)),
            )
        )
    raise ConfigurationError(f"generator {name!r} has unknown kind {kind!r}")


def _model_id(config: AppConfig, generator_name: str) -> str:
    entry = config.section("generators").get(generator_name, {})
    return str(entry.get("model_id", generator_name))


def _price_table(config: AppConfig) -> PriceTable:
    prices = {}
    for model_id, entry in config.section("prices").items():
        prices[model_id] = ModelPrice(
            input_per_1m=float(entry["input_per_1m"]),
            output_per_1m=float(entry["output_per_1m"]),
        )
    return PriceTable(prices=prices)


def _limits(config: AppConfig) -> ContextLimits:
    return ContextLimits(
        token_ceiling=int(config.get("defaults.context_token_ceiling", 16000)),
        max_images=int(config.get("defaults.max_images", 8)),
    )


# ---------------------------------------------------------------------------
# ingest
# ---------------------------------------------------------------------------


def cmd_ingest(config: AppConfig, corpus_dir: str) -> dict:
    corpus = Path(corpus_dir)
    if not corpus.is_dir():
        raise ConfigurationError(f"corpus directory not found: {corpus}")
    parser_section = config.section("parser")
    mode = parser_section.get("mode", "fixture")
    ingestion_cfg = _ingestion_config(config)
    summarizer = _summarizer(config) if ingestion_cfg.summarize_assets else None
    store = IngestStore(config.work_dir() / "store")

    if mode == "fixture":
        client = FixtureParserClient(corpus)
        sources = [(doc_id, None) for doc_id in client.doc_ids()]
    elif mode == "http":
        endpoint = ParserEndpoint(
            base_url=str(config.require("parser.base_url")),
            api_key=str(parser_section.get("api_key", "")),
            timeout_s=float(parser_section.get("timeout_s", 120)),
        )
        sources = [(path.stem, path) for path in sorted(corpus.glob("*.pdf"))]
        client = None
    else:
        raise ConfigurationError(f"unknown parser mode {mode!r}")

    if not sources:
        raise MmragError(f"no inputs found in corpus directory {corpus}")

    manifest: dict[str, dict] = {}
    failures = 0
    for doc_id, pdf_path in sources:
        try:
            if mode == "fixture":
                doc = client.parse(doc_id)
            else:
                doc = parse_document(pdf_path.read_bytes(), endpoint)
            doc, chunks = ingest_document(doc, ingestion_cfg, summarizer)
            store.save_document(doc, chunks)
            manifest[doc.id] = {
                "pages": len(doc.pages),
                "chunks": len(chunks),
                "assets": len(doc.assets),
                "summarized": sum(
                    1 for a in doc.assets if a.summary is not None and a.summary.text
                ),
            }
        except MmragError as exc:
            failures += 1
            logger.warning("skipping document %s: %s", doc_id, exc)
    if not manifest:
        raise MmragError(f"ingestion failed for all {failures} documents")
    store.write_manifest(manifest)
    print(f"ingested {len(manifest)} documents ({failures} failed)")
    for doc_id in sorted(manifest):
        entry = manifest[doc_id]
        print(
            f"  {doc_id}: pages={entry['pages']} chunks={entry['chunks']} "
            f"assets={entry['assets']} summarized={entry['summarized']}"
        )
    return manifest


# ---------------------------------------------------------------------------
# index
# ---------------------------------------------------------------------------

DENSE_COLLECTION = "chunks_dense"
MULTIMODAL_COLLECTION = "chunks_summaries_dense"


def pages_collection(retriever: RetrieverId) -> str:
    return f"pages_{retriever.value}"


def collection_name_for(strategy: AugmentationStrategy) -> str | None:
    if strategy.kind is StrategyKind.TEXT:
        return DENSE_COLLECTION
    if strategy.kind is StrategyKind.MULTIMODAL:
        return MULTIMODAL_COLLECTION
    if strategy.kind is StrategyKind.VISUAL_PAGES:
        return pages_collection(strategy.retriever)
    return None


def cmd_index(config: AppConfig, kind: str) -> dict:
    store = IngestStore(config.work_dir() / "store")
    store.load_manifest()
    catalog = store.load_catalog()
    embedder = _embedder(config)
    ingestion_cfg = _ingestion_config(config)
    dense_dim = int(config.get("embedding.dense_dim", DEFAULT_DENSE_DIM))
    collections_dir = config.work_dir() / "collections"

    kind = kind.strip().lower()
    entries: list[IndexEntry] = []
    if kind == "dense":
        index = InMemoryIndex(CollectionConfig.dense(DENSE_COLLECTION, dim=dense_dim))
        for chunk_id in sorted(catalog.chunks):
            chunk = catalog.chunks[chunk_id]
            entries.append(
                IndexEntry(
                    key=chunk.id,
                    payload=TextChunkRef(chunk.id),
                    embedding=embed_text(chunk.text, embedder),
                )
            )
    elif kind == "multimodal":
        index = InMemoryIndex(CollectionConfig.dense(MULTIMODAL_COLLECTION, dim=dense_dim))
        for chunk_id in sorted(catalog.chunks):
            chunk = catalog.chunks[chunk_id]
            entries.append(
                IndexEntry(
                    key=chunk.id,
                    payload=TextChunkRef(chunk.id),
                    embedding=embed_text(chunk.text, embedder),
                )
            )
        for doc_id in sorted(catalog.documents):
            for asset in catalog.documents[doc_id].assets:
                if asset.summary is None or not asset.summary.text:
                    continue
                entries.append(
                    IndexEntry(
                        key=asset.id,
                        payload=AssetRef(asset.id),
                        embedding=embed_text(asset.summary.text, embedder),
                    )
                )
    elif kind.startswith("visual:"):
        retriever = RetrieverId(kind.split(":", 1)[1])
        index = InMemoryIndex(
            CollectionConfig.late_interaction(pages_collection(retriever), dim=MULTIVECTOR_DIM)
        )
        for doc_id in sorted(catalog.documents):
            doc = catalog.documents[doc_id]
            for page in doc.pages:
                entries.append(
                    IndexEntry(
                        key=page_key(doc.id, page.number),
                        payload=PageRef(doc.id, page.number),
                        embedding=embed_page(
                            page.image,
                            retriever,
                            embedder,
                            image_long_side_cap=ingestion_cfg.image_long_side_px,
                        ),
                    )
                )
    else:
        raise ConfigurationError(
            f"unknown index kind {kind!r} (expected dense, multimodal, or visual:<retriever>)"
        )

    index.upsert(entries)
    index.save(collections_dir)
    stats = {"collection": index.config.name, "entries": len(index)}
    print(f"indexed {stats['entries']} entries into {stats['collection']}")
    return stats


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------


def _load_run_spec(path: Path) -> dict:
    if not path.exists():
        raise ConfigurationError(f"run spec file not found: {path}")
    spec = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    if not isinstance(spec, dict):
        raise ConfigurationError("run spec file must hold a mapping")
    return spec


def _index_set_for(
    config: AppConfig, strategy: AugmentationStrategy, catalog, embedder
) -> IndexSet:
    collections_dir = config.work_dir() / "collections"
    indexes = IndexSet(embedder=embedder, catalog=catalog)
    name = collection_name_for(strategy)
    if name is None:
        return indexes
    if not (collections_dir / f"{name}.json").exists():
        raise ConfigurationError(
            f"strategy {strategy.label} needs collection {name!r}; run the index command first"
        )
    loaded = InMemoryIndex.load(collections_dir, name)
    if strategy.kind is StrategyKind.TEXT:
        indexes.dense = loaded
    elif strategy.kind is StrategyKind.MULTIMODAL:
        indexes.multimodal = loaded
    else:
        indexes.pages[strategy.retriever] = loaded
    return indexes


def cmd_evaluate(config: AppConfig, spec_path: str) -> str:
    spec_file = Path(spec_path)
    raw = _load_run_spec(spec_file)
    for required in ("run_id", "generator", "strategy", "benchmark"):
        if required not in raw:
            raise ConfigurationError(f"run spec is missing {required!r}")
    strategy = AugmentationStrategy.parse(str(raw["strategy"]))
    benchmark_path = Path(raw["benchmark"])
    if not benchmark_path.is_absolute():
        benchmark_path = spec_file.parent / benchmark_path
    defaults = config.section("defaults")
    spec = RunSpec(
        run_id=str(raw["run_id"]),
        model=_model_id(config, str(raw["generator"])),
        strategy=strategy,
        k=int(raw.get("k", defaults.get("k", 5))),
        n_runs=int(raw.get("n_runs", defaults.get("n_runs", 5))),
        permute_answers=bool(raw.get("permute_answers", False)),
        rng_seed=int(raw.get("rng_seed", defaults.get("rng_seed", 0))),
        price_table=raw.get("price_table"),
    )

    items = load_benchmark(benchmark_path)
    embedder = _embedder(config)
    indexes = None
    if strategy.kind is not StrategyKind.NONE:
        store = IngestStore(config.work_dir() / "store")
        catalog = store.load_catalog()
        indexes = _index_set_for(config, strategy, catalog, embedder)
    generator = _generator(config, str(raw["generator"]), items)
    run_store = RunStore.create(
        config.work_dir() / "runs" / spec.run_id,
        spec,
        config_hash=config.hash(),
        benchmark_path=str(benchmark_path),
    )
    results = run_benchmark(
        items, spec, generator, indexes, limits=_limits(config), store=run_store
    )
    x, n = accuracy(results)
    print(f"run {spec.run_id}: {n} results, accuracy {x}/{n} = {x / n:.3f}" if n else "empty run")
    return spec.run_id


# ---------------------------------------------------------------------------
# report / compare
# ---------------------------------------------------------------------------


def _load_run(config: AppConfig, run_id: str) -> tuple[RunData, dict]:
    run_dir = config.work_dir() / "runs" / run_id
    store = RunStore(run_dir)
    if not store.manifest_path.exists():
        raise MmragError(f"unknown run id {run_id!r} (no manifest under {run_dir})")
    manifest = store.load_manifest()
    spec = RunSpec.from_record(manifest["spec"])
    results = tuple(store.load_results())
    return (
        RunData(
            run_id=run_id,
            model=spec.model,
            strategy_label=spec.strategy.label,
            results=results,
        ),
        manifest,
    )


def cmd_report(config: AppConfig, run_ids: list[str], fmt: str, out_dir: str | None) -> Path:
    if fmt not in ("markdown", "delimited"):
        raise ConfigurationError(f"unknown report format {fmt!r}")
    runs = []
    benchmark_paths = set()
    for run_id in run_ids:
        run, manifest = _load_run(config, run_id)
        runs.append(run)
        benchmark_paths.add(manifest["benchmark_path"])
    if len(benchmark_paths) != 1:
        raise MmragError(f"runs span different benchmarks: {sorted(benchmark_paths)}")
    items = load_benchmark(benchmark_paths.pop())

    try:
        page_counts = IngestStore(config.work_dir() / "store").page_counts()
    except ConfigurationError:
        page_counts = {}
    prices = _price_table(config)
    rng_seed = int(config.get("defaults.rng_seed", 0))

    tables = [build_accuracy_table(runs, items)]
    if len(runs) >= 2:
        tables.append(build_significance_table(runs))
    tables.append(
        build_metrics_table(runs, prices if prices.prices else None, page_counts, rng_seed)
    )
    tables.append(build_parse_failure_table(runs))

    rendered = render_markdown(tables) if fmt == "markdown" else render_delimited(tables)
    suffix = "md" if fmt == "markdown" else "tsv"
    out_base = Path(out_dir) if out_dir else config.work_dir() / "reports"
    out_base.mkdir(parents=True, exist_ok=True)
    out_path = out_base / f"report_{'_'.join(run_ids)}.{suffix}"
    out_path.write_text(rendered, encoding="utf-8")
    print(f"wrote {out_path}")
    return out_path


def cmd_compare(config: AppConfig, run_a: str, run_b: str) -> dict:
    a, manifest_a = _load_run(config, run_a)
    b, manifest_b = _load_run(config, run_b)
    if manifest_a["benchmark_path"] != manifest_b["benchmark_path"]:
        raise MmragError(
            "runs evaluated different benchmarks: "
            f"{manifest_a['benchmark_path']} vs {manifest_b['benchmark_path']}"
        )
    outcomes_a = {(r.item_id, r.run_index): 1.0 if r.correct else 0.0 for r in a.results}
    outcomes_b = {(r.item_id, r.run_index): 1.0 if r.correct else 0.0 for r in b.results}
    if set(outcomes_a) != set(outcomes_b):
        raise MmragError("runs cover different (item, run) grids")
    keys = sorted(outcomes_a)
    sample_a = [outcomes_a[k] for k in keys]
    sample_b = [outcomes_b[k] for k in keys]
    diffs = [x - y for x, y in zip(sample_a, sample_b)]
    if all(d == 0.0 for d in diffs):
        result = {
            "v": None, "p_raw": 1.0, "p_adjusted": 1.0,
            "significant": False, "direction": "identical",
        }
    else:
        v, p = wilcoxon_signed_rank(sample_a, sample_b)
        p_adj = bonferroni([p], m=1)[0]
        significant = p_adj < 0.05
        direction = "n.s."
        if significant:
            correct_a = sum(sample_a)
            correct_b = sum(sample_b)
            direction = (
                f"{run_a} < {run_b}" if correct_a < correct_b else f"{run_b} < {run_a}"
            )
        result = {
            "v": v, "p_raw": p, "p_adjusted": p_adj,
            "significant": significant, "direction": direction,
        }
    v_text = "-" if result["v"] is None else f"{result['v']:.1f}"
    print(
        f"{run_a} vs {run_b}: V={v_text} p={format_p(result['p_raw'])} "
        f"adjusted={format_p(result['p_adjusted'])} -> {result['direction']}"
    )
    return result


# ---------------------------------------------------------------------------
# argparse wiring
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmrag",
        description="Multi-modal RAG evaluation: ingest, index, evaluate, report, compare.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="parse, chunk, and summarize a corpus")
    p_ingest.add_argument("--config", required=True)
    p_ingest.add_argument("--corpus", required=True, help="directory of PDFs or recorded parses")

    p_index = sub.add_parser("index", help="build a vector collection")
    p_index.add_argument("--config", required=True)
    p_index.add_argument(
        "--kind", required=True, help="dense | multimodal | visual:<colpali|colqwen|colflor>"
    )

    p_eval = sub.add_parser("evaluate", help="run the benchmark under a run spec")
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--spec", required=True, help="run spec YAML file")

    p_report = sub.add_parser("report", help="emit accuracy/significance/metric tables")
    p_report.add_argument("--config", required=True)
    p_report.add_argument("--runs", required=True, help="comma-separated run ids")
    p_report.add_argument("--format", default="markdown", choices=["markdown", "delimited"])
    p_report.add_argument("--out", default=None, help="output directory")

    p_compare = sub.add_parser("compare", help="significance test between two runs")
    p_compare.add_argument("--config", required=True)
    p_compare.add_argument("--run-a", required=True)
    p_compare.add_argument("--run-b", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = AppConfig.load(args.config)
        if args.command == "ingest":
            cmd_ingest(config, args.corpus)
        elif args.command == "index":
            cmd_index(config, args.kind)
        elif args.command == "evaluate":
            cmd_evaluate(config, args.spec)
        elif args.command == "report":
            cmd_report(config, args.runs.split(","), args.format, args.out)
        elif args.command == "compare":
            cmd_compare(config, args.run_a, args.run_b)
        return 0
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except MmragError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
