"""Glue between generated or replayed streams, the pipeline and reports."""

from __future__ import annotations

from typing import List, Optional, Sequence, Tuple

from .metrics import ScenarioReport, evaluate
from .packet import Packet
from .pipeline import DefensePipeline, PipelineConfig, Verdict


def execute(stream: Sequence[Packet], config: PipelineConfig) -> Tuple[DefensePipeline, List[Verdict]]:
    pipeline = DefensePipeline(config)
    return pipeline, pipeline.run(stream)


def report_for(
    sid: int, name: str, stream: Sequence[Packet], pipeline: DefensePipeline, verdicts: Sequence[Verdict]
) -> Optional[ScenarioReport]:
    """Scenario report, or None when any packet lacks a ground-truth label."""
    if any(p.truth is None for p in stream):
        return None
    return ScenarioReport(
        scenario=sid,
        name=name,
        packets=len(stream),
        cm=evaluate((p.truth, v) for p, v in zip(stream, verdicts)),
        stages=pipeline.stage_counts(),
        bindings=pipeline.bindings.dump(),
    )
