"""Report tables mirroring the evaluation outputs: stratified accuracy with
binomial intervals, pairwise significance tests, and cost/latency metrics
with bootstrap intervals.

Formatting is fixed (3 decimals for proportions, 2 for costs and latencies)
so identical inputs and seeds always render byte-identical reports.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from typing import Sequence

from .corpus import BenchmarkItem, Difficulty, strata_counts
from .errors import MmragError
from .evaluation import (
    ItemResult,
    PriceTable,
    accuracy,
    cost_of_results,
    parse_failure_count,
    precision_at_k,
    price_per_correct,
)
from .stats import StatInterval, agresti_coull_interval, bonferroni, bootstrap_ci, wilcoxon_signed_rank

logger = logging.getLogger(__name__)

PROPORTION_DECIMALS = 3
COST_DECIMALS = 2


@dataclass(frozen=True)
class ReportTable:
    title: str
    header: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]


def interval_cell(interval: StatInterval, decimals: int) -> str:
    fmt = f"{{:.{decimals}f}}"
    return (
        f"{fmt.format(interval.point)} "
        f"[{fmt.format(interval.lo)}, {fmt.format(interval.hi)}]"
    )


def format_p(p: float) -> str:
    if p < 0.001:
        return "<0.001"
    return f"{p:.3f}"


# ---------------------------------------------------------------------------
# Table builders
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunData:
    """One completed run: its label, spec fields, and loaded results."""

    run_id: str
    model: str
    strategy_label: str
    results: tuple[ItemResult, ...]

    @property
    def label(self) -> str:
        return f"{self.model}/{self.strategy_label}"


_STRATA = (Difficulty.EASY, Difficulty.MEDIUM, Difficulty.HARD)


def build_accuracy_table(
    runs: Sequence[RunData], items: Sequence[BenchmarkItem], z: float = 1.96
) -> ReportTable:
    counts = strata_counts(items)
    header = (
        "Model",
        "Augmentation",
        f"Easy (n={counts[Difficulty.EASY]})",
        f"Medium (n={counts[Difficulty.MEDIUM]})",
        f"Hard (n={counts[Difficulty.HARD]})",
        f"Average (n={len(items)})",
    )
    rows = []
    for run in runs:
        cells = [run.model, run.strategy_label]
        for stratum in _STRATA:
            x, n = accuracy(run.results, stratum)
            cells.append(
                interval_cell(agresti_coull_interval(x, n, z), PROPORTION_DECIMALS)
                if n
                else "-"
            )
        x, n = accuracy(run.results)
        cells.append(
            interval_cell(agresti_coull_interval(x, n, z), PROPORTION_DECIMALS) if n else "-"
        )
        rows.append(tuple(cells))
    return ReportTable(
        title="Accuracy by difficulty stratum (Agresti-Coull 95% CI)",
        header=header,
        rows=tuple(rows),
    )


def _paired_outcomes(a: RunData, b: RunData) -> tuple[list[float], list[float]]:
    """Per-(item, run) binary correctness aligned across two runs."""
    def outcome_map(run: RunData) -> dict[tuple[str, int], float]:
        return {(r.item_id, r.run_index): 1.0 if r.correct else 0.0 for r in run.results}

    map_a, map_b = outcome_map(a), outcome_map(b)
    if set(map_a) != set(map_b):
        raise MmragError(
            f"runs {a.run_id} and {b.run_id} cover different (item, run) grids"
        )
    keys = sorted(map_a)
    return [map_a[k] for k in keys], [map_b[k] for k in keys]


def build_significance_table(runs: Sequence[RunData], alpha: float = 0.05) -> ReportTable:
    """Pairwise Wilcoxon signed-rank over per-(item, run) outcomes, Bonferroni adjusted."""
    labels = [run.label for run in runs]
    if len(set(labels)) < len(labels):
        labels = [run.run_id for run in runs]
    label_of = dict(zip((run.run_id for run in runs), labels))
    pairs = [
        (runs[i], runs[j]) for i in range(len(runs)) for j in range(i + 1, len(runs))
    ]
    raw_rows = []
    p_values = []
    for a, b in pairs:
        outcomes_a, outcomes_b = _paired_outcomes(a, b)
        diffs = [x - y for x, y in zip(outcomes_a, outcomes_b)]
        if all(d == 0.0 for d in diffs):
            raw_rows.append((a, b, float("nan"), None))
            p_values.append(1.0)
            continue
        v, p = wilcoxon_signed_rank(outcomes_a, outcomes_b)
        raw_rows.append((a, b, v, p))
        p_values.append(p)
    adjusted = bonferroni(p_values, m=max(1, len(pairs)))
    rows = []
    for (a, b, v, p), p_adj in zip(raw_rows, adjusted):
        if p is None:
            direction = "identical"
        elif p_adj < alpha:
            acc_a = accuracy(a.results)
            acc_b = accuracy(b.results)
            worse, better = (a, b) if acc_a[0] < acc_b[0] else (b, a)
            direction = f"{label_of[worse.run_id]} < {label_of[better.run_id]}"
        else:
            direction = "n.s."
        rows.append(
            (
                f"{label_of[a.run_id]} vs {label_of[b.run_id]}",
                "-" if v != v else f"{v:.1f}",  # NaN check for identical runs
                "-" if p is None else format_p(p),
                format_p(p_adj),
                direction,
            )
        )
    return ReportTable(
        title="Pairwise comparisons (Wilcoxon signed-rank, Bonferroni adjusted)",
        header=("Runs", "Test-value (V)", "p-value", "Adjusted p", "Direction"),
        rows=tuple(rows),
    )


def _gold_pages(item_source: str, page_counts: dict[str, int]) -> set[str]:
    count = page_counts.get(item_source, 0)
    return {f"{item_source}#{page}" for page in range(1, count + 1)}


def build_metrics_table(
    runs: Sequence[RunData],
    prices: PriceTable | None,
    page_counts: dict[str, int],
    rng_seed: int = 0,
    n_boot: int = 2000,
) -> ReportTable:
    """P@5, latency, tokens, TTFT, throughput, cost per run, and cents per
    correct answer, each with a percentile-bootstrap 95% interval."""
    header = (
        "Model",
        "Augmentation",
        "P@5",
        "Latency (s)",
        "Tokens",
        "TTFT (ms)",
        "Throughput (tok/s)",
        "Cost (USD)",
        "Cents/correct",
    )
    rows = []
    for run in runs:
        results = run.results
        cells = [run.model, run.strategy_label]

        p5_values = [
            precision_at_k(r.retrieval_trace, _gold_pages(r.source_doc, page_counts))
            for r in results
        ]
        cells.append(_boot_cell(p5_values, PROPORTION_DECIMALS, rng_seed, n_boot))

        latencies = [r.record.latency_s for r in results]
        cells.append(_boot_cell(latencies, COST_DECIMALS, rng_seed, n_boot))

        tokens = [
            float(r.record.prompt_tokens + r.record.completion_tokens) for r in results
        ]
        cells.append(_boot_cell(tokens, COST_DECIMALS, rng_seed, n_boot))

        ttfts = [r.record.ttft_ms for r in results if r.record.ttft_ms is not None]
        cells.append(_boot_cell(ttfts, COST_DECIMALS, rng_seed, n_boot) if ttfts else "-")

        throughputs = [
            (r.record.prompt_tokens + r.record.completion_tokens) / r.record.latency_s
            for r in results
            if r.record.latency_s > 0
        ]
        cells.append(
            _boot_cell(throughputs, COST_DECIMALS, rng_seed, n_boot) if throughputs else "-"
        )

        if prices is not None and run.model in prices.prices:
            by_run: dict[int, list[ItemResult]] = {}
            for result in results:
                by_run.setdefault(result.run_index, []).append(result)
            run_costs = [
                cost_of_results(group, prices, run.model)
                for _, group in sorted(by_run.items())
            ]
            cells.append(_boot_cell(run_costs, COST_DECIMALS, rng_seed, n_boot))
            cents = []
            for _, group in sorted(by_run.items()):
                correct = sum(1 for r in group if r.correct)
                ppc = price_per_correct(cost_of_results(group, prices, run.model), correct)
                if ppc is not None:
                    cents.append(ppc)
            cells.append(_boot_cell(cents, COST_DECIMALS, rng_seed, n_boot) if cents else "-")
        else:
            cells.extend(["-", "-"])
        rows.append(tuple(cells))
    return ReportTable(
        title="Retrieval precision, latency, and cost (bootstrap 95% CI)",
        header=header,
        rows=tuple(rows),
    )


def _boot_cell(values: Sequence[float], decimals: int, rng_seed: int, n_boot: int) -> str:
    interval = bootstrap_ci(list(values), n_boot=n_boot, rng_seed=rng_seed)
    return interval_cell(interval, decimals)


def build_parse_failure_table(runs: Sequence[RunData]) -> ReportTable:
    rows = []
    for run in runs:
        x, n = accuracy(run.results)
        rows.append(
            (
                run.model,
                run.strategy_label,
                str(n),
                str(x),
                str(parse_failure_count(run.results)),
            )
        )
    return ReportTable(
        title="Answer extraction outcomes",
        header=("Model", "Augmentation", "Answers", "Correct", "Parse failures"),
        rows=tuple(rows),
    )


# ---------------------------------------------------------------------------
# Rendering and the delimited round-trip loader
# ---------------------------------------------------------------------------


def render_markdown(tables: Sequence[ReportTable]) -> str:
    blocks = []
    for table in tables:
        lines = [f"## {table.title}", ""]
        lines.append("| " + " | ".join(table.header) + " |")
        lines.append("|" + "|".join(" --- " for _ in table.header) + "|")
        for row in table.rows:
            lines.append("| " + " | ".join(row) + " |")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def render_delimited(tables: Sequence[ReportTable]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, delimiter="\t", lineterminator="\n")
    for table in tables:
        writer.writerow([f"# {table.title}"])
        writer.writerow(table.header)
        for row in table.rows:
            writer.writerow(row)
        writer.writerow([])
    return buffer.getvalue()


def parse_delimited(text: str) -> list[ReportTable]:
    tables: list[ReportTable] = []
    title: str | None = None
    header: tuple[str, ...] | None = None
    rows: list[tuple[str, ...]] = []

    def flush():
        nonlocal title, header, rows
        if title is not None and header is not None:
            tables.append(ReportTable(title=title, header=header, rows=tuple(rows)))
        title, header, rows = None, None, []

    for record in csv.reader(io.StringIO(text), delimiter="\t"):
        if not record or record == [""]:
            flush()
            continue
        if record[0].startswith("# "):
            flush()
            title = record[0][2:]
        elif header is None:
            header = tuple(record)
        else:
            rows.append(tuple(record))
    flush()
    return tables
