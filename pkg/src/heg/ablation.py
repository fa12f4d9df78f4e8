"""Config-grid ablations: aggregator subsets, pooling modes, compression.

Cells run independently; one failing cell records its error string and the
rest of the grid still completes.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from .aggregators import KIND_ORDER
from .evaluation import EvalReport, evaluate
from .graph import TemporalBipartiteGraph
from .pooling import POOLING_MODES
from .training import TrainConfig, train

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AblationCell:
    name: str
    overrides: dict


@dataclass
class AblationResult:
    name: str
    overrides: dict
    report: EvalReport | None = None
    error: str | None = None


def aggregator_grid() -> list[AblationCell]:
    """Cumulative reducer subsets: mean, then +median, +std, +moment3, +moment4."""
    return [
        AblationCell(name="+".join(KIND_ORDER[:k]),
                     overrides={"kinds": KIND_ORDER[:k]})
        for k in range(1, len(KIND_ORDER) + 1)
    ]


def pooling_grid() -> list[AblationCell]:
    return [AblationCell(name=mode, overrides={"pooling": mode})
            for mode in POOLING_MODES]


def compression_grid() -> list[AblationCell]:
    return [AblationCell(name="compression_on", overrides={"compression": True}),
            AblationCell(name="compression_off", overrides={"compression": False})]


GRIDS = {
    "aggregators": aggregator_grid,
    "pooling": pooling_grid,
    "compression": compression_grid,
}


def run_cell(config: TrainConfig, cell: AblationCell,
             train_graphs: list[TemporalBipartiteGraph],
             eval_graphs: list[TemporalBipartiteGraph]) -> AblationResult:
    """Train and evaluate one override cell; exceptions become the result."""
    try:
        cell_config = replace(config, **cell.overrides)
        result = train(cell_config, train_graphs)
        report = evaluate(result.model, result.head, eval_graphs)
        return AblationResult(name=cell.name, overrides=cell.overrides,
                              report=report)
    except Exception as exc:  # cell isolation: record, keep the grid running
        log.warning("ablation cell %s failed: %s", cell.name, exc)
        return AblationResult(name=cell.name, overrides=cell.overrides,
                              error=f"{type(exc).__name__}: {exc}")


def ablate(config: TrainConfig, cells: list[AblationCell],
           train_graphs: list[TemporalBipartiteGraph],
           eval_graphs: list[TemporalBipartiteGraph],
           threads: int = 1) -> list[AblationResult]:
    """Run every cell; results keep the input cell order.

    With threads > 1 the cells run in separate processes, which does not
    change any result: each cell is seeded by the shared config.
    """
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(run_cell, config, cell, train_graphs, eval_graphs)
                       for cell in cells]
            return [f.result() for f in futures]
    return [run_cell(config, cell, train_graphs, eval_graphs) for cell in cells]


def format_table(results: list[AblationResult]) -> str:
    """Aligned text table with accuracy and mAP per cell."""
    width = max(len(r.name) for r in results) if results else 4
    lines = [f"{'cell':<{width}}  {'accuracy':>9}  {'mAP':>9}"]
    for r in results:
        if r.report is None:
            lines.append(f"{r.name:<{width}}  ERROR: {r.error}")
        else:
            lines.append(f"{r.name:<{width}}  {r.report.accuracy:8.2f}%  "
                         f"{r.report.mean_ap:8.2f}%")
    return "\n".join(lines) + "\n"


def accuracy_regressions(results: list[AblationResult]) -> list[str]:
    """Notes where a later cell scored below its predecessor.

    Small training runs are noisy, so these are reported, never enforced.
    """
    notes = []
    scored = [r for r in results if r.report is not None]
    for prev, cur in zip(scored, scored[1:]):
        if cur.report.accuracy < prev.report.accuracy:
            notes.append(f"{cur.name} accuracy {cur.report.accuracy:.2f}% below "
                         f"{prev.name} ({prev.report.accuracy:.2f}%)")
    return notes
