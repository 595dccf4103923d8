#
# report.py
#
# Copyright 2024 The blockload authors. All rights reserved.
#

"""
Side-by-side comparison of batching strategies: padding added, frames
deleted, blocks and modelled epoch time, rendered as a plain-text table
with one column per strategy.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from blockload.constants import (
    ROW_BLOCKS,
    ROW_DELETED,
    ROW_PADDING,
    ROW_PROCESSED,
    ROW_TIME,
    ROW_UTILIZATION,
    STRATEGY_LABELS,
)
from blockload.ddp_sim import epoch_time_estimate
from blockload.manifest import Manifest
from blockload.packing import (
    PackingMetrics,
    PackingPlan,
    Sampling,
    Strategy,
    compute_metrics,
    pack,
    plan_metrics,
)
from blockload.utils import fraction_str, log, map_optional, pretty_count, pretty_ratio


@dataclass(frozen=True)
class StrategyResult:
    """The metrics and modelled time of one plan"""

    strategy: Strategy
    capacity: int
    metrics: PackingMetrics
    epoch_time: Fraction

    def as_dict(self) -> dict:
        """Returns the result as a dictionary"""
        return {
            "strategy": self.strategy.value,
            "capacity": self.capacity,
            **self.metrics.as_dict(),
            "epoch_time": fraction_str(self.epoch_time),
        }


@dataclass(frozen=True)
class ComparisonReport:
    """Results for several strategies under the same time model"""

    results: Tuple[StrategyResult, ...]
    world_size: int
    cost_per_frame: Fraction

    def get(self, strategy: Strategy) -> Optional[StrategyResult]:
        """The result of a strategy, if it was compared"""
        for result in self.results:
            if result.strategy == strategy:
                return result
        return None

    @property
    def padding_reduction(self) -> Optional[Fraction]:
        """naive padding / bload padding; None when either is missing or bload pads nothing"""
        naive = self.get(Strategy.NAIVE)
        bload = self.get(Strategy.BLOAD)
        if naive is None or bload is None or bload.metrics.padding_frames == 0:
            return None
        return Fraction(naive.metrics.padding_frames, bload.metrics.padding_frames)

    def as_dict(self) -> dict:
        """Returns the report as a dictionary"""
        reduction = self.padding_reduction
        return {
            "world_size": self.world_size,
            "cost_per_frame": fraction_str(self.cost_per_frame),
            "strategies": [result.as_dict() for result in self.results],
            "padding_reduction": map_optional(fraction_str, reduction),
            "padding_reduction_float": map_optional(float, reduction),
        }

    def render_text(self) -> str:
        """Renders the report as a table, rows are metrics and columns strategies"""
        headers = [STRATEGY_LABELS[result.strategy.value] for result in self.results]
        rows: List[Tuple[str, List[str]]] = [
            (ROW_PADDING, [str(r.metrics.padding_frames) for r in self.results]),
            (ROW_DELETED, [str(r.metrics.frames_deleted) for r in self.results]),
            (ROW_BLOCKS, [str(r.metrics.block_count) for r in self.results]),
            (ROW_PROCESSED, [str(r.metrics.processed_frames) for r in self.results]),
            (
                ROW_UTILIZATION,
                [f"{float(r.metrics.utilization):.2%}" for r in self.results],
            ),
            (ROW_TIME, [_pretty_time(r.epoch_time) for r in self.results]),
        ]
        label_width = max(len(label) for label, _ in rows)
        widths = [
            max(len(header), *(len(values[i]) for _, values in rows))
            for i, header in enumerate(headers)
        ]
        lines = [
            " " * label_width
            + "".join(f"  {header:>{width}}" for header, width in zip(headers, widths))
        ]
        lines.append("-" * len(lines[0]))
        for label, values in rows:
            lines.append(
                f"{label:<{label_width}}"
                + "".join(f"  {value:>{width}}" for value, width in zip(values, widths))
            )
        reduction = self.padding_reduction
        if self.get(Strategy.NAIVE) and self.get(Strategy.BLOAD):
            lines.append("")
            lines.append(f"padding reduction (naive/bload): {pretty_ratio(reduction)}x")
        lines.append(
            f"time model: {self.world_size} ranks, "
            f"{fraction_str(self.cost_per_frame)} per frame"
        )
        return "\n".join(lines) + "\n"


def _pretty_time(value: Fraction) -> str:
    if value.denominator == 1:
        return pretty_count(value.numerator)
    return f"{float(value):,.2f}"


def _result(
    plan: PackingPlan,
    metrics: PackingMetrics,
    world_size: int,
    cost_per_frame: Fraction,
) -> StrategyResult:
    return StrategyResult(
        strategy=plan.strategy,
        capacity=plan.capacity,
        metrics=metrics,
        epoch_time=epoch_time_estimate(plan, world_size, cost_per_frame),
    )


def report_plans(
    plans: Sequence[PackingPlan],
    world_size: int = 1,
    cost_per_frame: Fraction = Fraction(1),
) -> ComparisonReport:
    """A comparison built only from plan documents and their recorded sources"""
    results = tuple(
        _result(plan, plan_metrics(plan), world_size, cost_per_frame) for plan in plans
    )
    return ComparisonReport(results, world_size, Fraction(cost_per_frame))


def compare(  # pylint: disable=too-many-arguments
    manifest: Manifest,
    seed: int,
    t_block: Optional[int] = None,
    t_mix: Optional[int] = None,
    t_max: Optional[int] = None,
    world_size: int = 1,
    cost_per_frame: Fraction = Fraction(1),
    sampling: Sampling = Sampling.SEQUENCE,
    strategies: Sequence[Strategy] = tuple(Strategy),
) -> ComparisonReport:
    """Packs the manifest with every requested strategy and compares the plans"""
    results = []
    parameters: Dict[str, Optional[int]] = {"t_block": t_block, "t_mix": t_mix, "t_max": t_max}
    log.info(f"Comparing {[str(s) for s in strategies]} with {parameters}, seed {seed}")
    for strategy in strategies:
        plan = pack(
            manifest,
            strategy,
            seed=seed,
            t_max=t_max,
            t_block=t_block,
            t_mix=t_mix,
            sampling=sampling,
        )
        results.append(
            _result(plan, compute_metrics(plan, manifest), world_size, cost_per_frame)
        )
    return ComparisonReport(tuple(results), world_size, Fraction(cost_per_frame))
