"""Benchmark runs and the metrics computed over them.

A run is n_runs passes over the benchmark under one (generator, strategy)
configuration; each (item, run) pair may draw an independent uniform
answer-order permutation for the contamination protocol. Results are
line-delimited records appended as they complete, so an interrupted run
resumes without duplicating work.
"""

from __future__ import annotations

import json
import logging
import random
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .augmentation import (
    AugmentationStrategy,
    ContextLimits,
    IDENTITY_ORDER,
    IndexSet,
    OptionOrder,
    StrategyKind,
    apply_option_order,
    assemble_prompt,
    build_context,
    remap_gold,
)
from .corpus import BenchmarkItem, Difficulty
from .errors import ConfigurationError, MmragError
from .generation import Answer, AnswerLetter, GenerationRecord, Generator, ParseFailure, extract_answer
from .stats import bonferroni, paired_t_test
from .tokens import Tokenizer

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelPrice:
    input_per_1m: float
    output_per_1m: float

    def __post_init__(self):
        if self.input_per_1m < 0 or self.output_per_1m < 0:
            raise ConfigurationError("prices must be non-negative")


@dataclass(frozen=True)
class PriceTable:
    prices: Mapping[str, ModelPrice]

    def for_model(self, model_id: str) -> ModelPrice:
        try:
            return self.prices[model_id]
        except KeyError:
            raise ConfigurationError(f"no price entry for model {model_id!r}") from None


@dataclass(frozen=True)
class RunSpec:
    run_id: str
    model: str
    strategy: AugmentationStrategy
    k: int = 5
    n_runs: int = 5
    permute_answers: bool = False
    rng_seed: int = 0
    price_table: str | None = None

    def __post_init__(self):
        if self.n_runs < 1:
            raise ConfigurationError("n_runs must be >= 1")
        if self.k < 1:
            raise ConfigurationError("k must be >= 1")

    def to_record(self) -> dict:
        return {
            "run_id": self.run_id,
            "model": self.model,
            "strategy": self.strategy.label,
            "k": self.k,
            "n_runs": self.n_runs,
            "permute_answers": self.permute_answers,
            "rng_seed": self.rng_seed,
            "price_table": self.price_table,
        }

    @classmethod
    def from_record(cls, record: dict) -> "RunSpec":
        return cls(
            run_id=record["run_id"],
            model=record["model"],
            strategy=AugmentationStrategy.parse(record["strategy"]),
            k=int(record.get("k", 5)),
            n_runs=int(record.get("n_runs", 5)),
            permute_answers=bool(record.get("permute_answers", False)),
            rng_seed=int(record.get("rng_seed", 0)),
            price_table=record.get("price_table"),
        )


@dataclass(frozen=True)
class ItemResult:
    item_id: str
    run_index: int
    chosen: Answer
    correct: bool
    option_order: OptionOrder
    record: GenerationRecord
    retrieval_trace: tuple[tuple[str, float], ...]
    difficulty: Difficulty
    source_doc: str


def result_to_record(result: ItemResult) -> dict:
    chosen = result.chosen
    return {
        "item_id": result.item_id,
        "run_index": result.run_index,
        "chosen": chosen.value if isinstance(chosen, AnswerLetter) else None,
        "failure_note": chosen.note if isinstance(chosen, ParseFailure) else None,
        "correct": result.correct,
        "option_order": list(result.option_order),
        "difficulty": result.difficulty.value,
        "source_doc": result.source_doc,
        "trace": [[key, score] for key, score in result.retrieval_trace],
        "usage": {
            "prompt_tokens": result.record.prompt_tokens,
            "completion_tokens": result.record.completion_tokens,
            "latency_s": result.record.latency_s,
            "ttft_ms": result.record.ttft_ms,
            "raw_text": result.record.raw_text,
            "usage_estimated": result.record.usage_estimated,
            "retries": result.record.retries,
        },
    }


def result_from_record(record: dict) -> ItemResult:
    usage = record["usage"]
    chosen: Answer
    if record["chosen"] is not None:
        chosen = AnswerLetter(record["chosen"])
    else:
        chosen = ParseFailure(record.get("failure_note") or "")
    return ItemResult(
        item_id=record["item_id"],
        run_index=int(record["run_index"]),
        chosen=chosen,
        correct=bool(record["correct"]),
        option_order=tuple(record["option_order"]),  # type: ignore[arg-type]
        record=GenerationRecord(
            prompt_tokens=int(usage["prompt_tokens"]),
            completion_tokens=int(usage["completion_tokens"]),
            latency_s=float(usage["latency_s"]),
            ttft_ms=usage.get("ttft_ms"),
            raw_text=usage.get("raw_text", ""),
            usage_estimated=bool(usage.get("usage_estimated", False)),
            retries=int(usage.get("retries", 0)),
        ),
        retrieval_trace=tuple((key, float(score)) for key, score in record.get("trace", [])),
        difficulty=Difficulty(record["difficulty"]),
        source_doc=record["source_doc"],
    )


class RunStore:
    """Run directory holding manifest.json and append-only results.jsonl."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.results_path = self.directory / "results.jsonl"
        self.manifest_path = self.directory / "manifest.json"
        self._lock = threading.Lock()

    @classmethod
    def create(
        cls, directory: str | Path, spec: RunSpec, config_hash: str, benchmark_path: str
    ) -> "RunStore":
        store = cls(directory)
        store.directory.mkdir(parents=True, exist_ok=True)
        if not store.manifest_path.exists():
            manifest = {
                "spec": spec.to_record(),
                "config_hash": config_hash,
                "benchmark_path": benchmark_path,
            }
            store.manifest_path.write_text(
                json.dumps(manifest, sort_keys=True, indent=2), encoding="utf-8"
            )
        return store

    def load_manifest(self) -> dict:
        return json.loads(self.manifest_path.read_text(encoding="utf-8"))

    def spec(self) -> RunSpec:
        return RunSpec.from_record(self.load_manifest()["spec"])

    def append(self, result: ItemResult) -> None:
        line = json.dumps(result_to_record(result), ensure_ascii=False)
        with self._lock:
            with open(self.results_path, "a", encoding="utf-8") as handle:
                handle.write(line + "\n")

    def load_results(self) -> list[ItemResult]:
        if not self.results_path.exists():
            return []
        results = []
        with open(self.results_path, encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if line:
                    results.append(result_from_record(json.loads(line)))
        return results

    def existing_keys(self) -> set[tuple[str, int]]:
        return {(r.item_id, r.run_index) for r in self.load_results()}


# ---------------------------------------------------------------------------
# Run orchestration
# ---------------------------------------------------------------------------


def permute_options(item: BenchmarkItem, rng: random.Random) -> tuple[BenchmarkItem, str]:
    """Uniformly reorder the options; the gold letter follows its option text."""
    order = list(range(4))
    rng.shuffle(order)
    permuted = apply_option_order(item, tuple(order))  # type: ignore[arg-type]
    return permuted, permuted.gold


def _permutation_for(spec: RunSpec, run_index: int, item_id: str) -> OptionOrder:
    rng = random.Random(f"{spec.rng_seed}/{run_index}/{item_id}")
    order = list(range(4))
    rng.shuffle(order)
    return tuple(order)  # type: ignore[return-value]


def run_benchmark(
    items: Sequence[BenchmarkItem],
    spec: RunSpec,
    generator: Generator,
    indexes: IndexSet | None = None,
    *,
    limits: ContextLimits = ContextLimits(),
    store: RunStore | None = None,
    tokenizer: Tokenizer | None = None,
) -> list[ItemResult]:
    """Evaluate every item n_runs times; generation failures never abort the run."""
    if spec.strategy.kind is not StrategyKind.NONE and indexes is None:
        raise ConfigurationError(
            f"strategy {spec.strategy.label} requires retrieval indexes"
        )
    done = store.existing_keys() if store else set()
    results: list[ItemResult] = store.load_results() if store else []
    for run_index in range(spec.n_runs):
        for item in items:
            if (item.id, run_index) in done:
                continue
            order = (
                _permutation_for(spec, run_index, item.id)
                if spec.permute_answers
                else IDENTITY_ORDER
            )
            gold = remap_gold(item.gold, order)
            try:
                bundle = build_context(
                    item, spec.strategy, indexes, spec.k, limits, tokenizer
                )
                payload = assemble_prompt(item, bundle, order, limits, tokenizer)
                raw, record = generator.generate(payload)
                chosen = extract_answer(raw)
            except (MmragError, ValueError) as exc:
                logger.warning("item %s run %d failed: %s", item.id, run_index, exc)
                chosen = ParseFailure(f"generation error: {exc}")
                record = GenerationRecord(0, 0, 0.0, raw_text="")
                bundle = None
            correct = isinstance(chosen, AnswerLetter) and chosen.value == gold
            result = ItemResult(
                item_id=item.id,
                run_index=run_index,
                chosen=chosen,
                correct=correct,
                option_order=order,
                record=record,
                retrieval_trace=bundle.retrieval_trace if bundle is not None else (),
                difficulty=item.difficulty,
                source_doc=item.source_doc,
            )
            results.append(result)
            if store:
                store.append(result)
    return results


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def accuracy(
    results: Sequence[ItemResult], stratum: Difficulty | None = None
) -> tuple[int, int]:
    """(correct count, total) aggregated across runs; ParseFailure is incorrect."""
    selected = [r for r in results if stratum is None or r.difficulty is stratum]
    return sum(1 for r in selected if r.correct), len(selected)


def parse_failure_count(results: Sequence[ItemResult]) -> int:
    return sum(1 for r in results if isinstance(r.chosen, ParseFailure))


def per_run_accuracies(results: Sequence[ItemResult]) -> list[float]:
    """Accuracy per run index, ordered by run index."""
    by_run: dict[int, list[ItemResult]] = {}
    for result in sorted(results, key=lambda r: (r.item_id, r.run_index)):
        by_run.setdefault(result.run_index, []).append(result)
    accuracies = []
    for run_index in sorted(by_run):
        x, n = accuracy(by_run[run_index])
        accuracies.append(x / n if n else 0.0)
    return accuracies


def precision_at_k(
    trace: Sequence[tuple[str, float]], gold_pages: set[str], k: int = 5
) -> float:
    """|top-k keys intersect gold| / k; the denominator stays k even when the
    trace is shorter."""
    if k < 1:
        raise ValueError("k must be >= 1")
    top = {key for key, _ in trace[:k]}
    return len(top & gold_pages) / k


def cost_of_results(
    results: Sequence[ItemResult], prices: PriceTable, model_id: str
) -> float:
    """Total USD at per-1M-token prices; the division happens once at the end."""
    price = prices.for_model(model_id)
    total = sum(
        r.record.prompt_tokens * price.input_per_1m
        + r.record.completion_tokens * price.output_per_1m
        for r in results
    )
    return total / 1_000_000.0


def price_per_correct(cost_usd: float, n_correct: int) -> float | None:
    """US cents per correct answer; undefined (None) when nothing was correct."""
    if n_correct < 0:
        raise ValueError("n_correct must be non-negative")
    if n_correct == 0:
        return None
    return 100.0 * cost_usd / n_correct


def throughput(total_tokens: float, elapsed_s: float) -> float:
    if elapsed_s <= 0:
        raise ValueError("elapsed_s must be positive")
    return total_tokens / elapsed_s


# ---------------------------------------------------------------------------
# Contamination protocol: permuted vs plain answer order
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContaminationRow:
    label: str
    t: float
    p_raw: float
    p_adjusted: float
    significant: bool
    note: str = ""


@dataclass(frozen=True)
class ContaminationReport:
    alpha: float
    rows: tuple[ContaminationRow, ...]

    @property
    def any_significant(self) -> bool:
        return any(row.significant for row in self.rows)


def _grid(results: Sequence[ItemResult]) -> set[tuple[str, int]]:
    return {(r.item_id, r.run_index) for r in results}


def contamination_check(
    results_plain,
    results_permuted,
    alpha: float = 0.05,
) -> ContaminationReport:
    """Paired t-test on per-run accuracies, permuted vs plain, Bonferroni over cells.

    Accepts either two result lists (a single configuration) or two dicts
    keyed by configuration label. Identical outcomes across conditions are
    reported as "identical" and never significant; a constant nonzero
    difference has no variance to test and is reported significant outright.
    """
    if isinstance(results_plain, dict) != isinstance(results_permuted, dict):
        raise ValueError("plain and permuted results must have the same shape")
    if isinstance(results_plain, dict):
        if set(results_plain) != set(results_permuted):
            raise ValueError("plain and permuted configurations differ")
        cells = {label: (results_plain[label], results_permuted[label]) for label in sorted(results_plain)}
    else:
        cells = {"all": (results_plain, results_permuted)}

    labels = []
    raw_stats: list[tuple[float, float, str]] = []
    for label, (plain, permuted) in cells.items():
        if _grid(plain) != _grid(permuted):
            raise ValueError(
                f"configuration {label!r}: plain and permuted runs cover different "
                "(item, run) grids"
            )
        acc_plain = per_run_accuracies(plain)
        acc_permuted = per_run_accuracies(permuted)
        diffs = [a - b for a, b in zip(acc_plain, acc_permuted)]
        if all(d == 0.0 for d in diffs):
            raw_stats.append((0.0, 1.0, "identical"))
        elif len(set(diffs)) == 1:
            direction = 1.0 if diffs[0] > 0 else -1.0
            raw_stats.append((direction * float("inf"), 0.0, "constant nonzero difference"))
        else:
            t, p = paired_t_test(acc_plain, acc_permuted)
            raw_stats.append((t, p, ""))
        labels.append(label)

    adjusted = bonferroni([p for _, p, _ in raw_stats], m=len(cells))
    rows = []
    for label, (t, p, note), p_adj in zip(labels, raw_stats, adjusted):
        significant = note != "identical" and p_adj < alpha
        rows.append(
            ContaminationRow(
                label=label, t=t, p_raw=p, p_adjusted=p_adj,
                significant=significant, note=note,
            )
        )
    return ContaminationReport(alpha=alpha, rows=tuple(rows))
