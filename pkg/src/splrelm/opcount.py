"""Per-run operation counters for complexity measurements.

Numeric kernels increment the active counter only when one is installed,
so ordinary runs pay a single `is None` check and benchmark timings stay
unpolluted. Counts are algorithmic operation counts accrued by the kernels
as they execute (dot products, row updates, weight writes), grouped by
pipeline stage so that e.g. the weight-update path can be audited
separately from the hidden-layer MAC path.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field


@dataclass
class StageCounts:
    adds: int = 0
    mults: int = 0
    comparisons: int = 0
    weight_writes: int = 0

    @property
    def total(self) -> int:
        return self.adds + self.mults + self.comparisons + self.weight_writes


@dataclass
class OpCounter:
    """Accumulates operation counts, grouped by named stage.

    Top-level totals (`adds`, `mults`, `comparisons`, `weight_writes`)
    aggregate across stages; `stage(name)` gives the per-stage breakdown.
    A counter belongs to a single run and is not thread-safe.
    """

    stages: dict[str, StageCounts] = field(default_factory=dict)

    def stage(self, name: str) -> StageCounts:
        if name not in self.stages:
            self.stages[name] = StageCounts()
        return self.stages[name]

    def count(self, stage: str, adds: int = 0, mults: int = 0,
              comparisons: int = 0, weight_writes: int = 0) -> None:
        s = self.stage(stage)
        s.adds += adds
        s.mults += mults
        s.comparisons += comparisons
        s.weight_writes += weight_writes

    @property
    def adds(self) -> int:
        return sum(s.adds for s in self.stages.values())

    @property
    def mults(self) -> int:
        return sum(s.mults for s in self.stages.values())

    @property
    def comparisons(self) -> int:
        return sum(s.comparisons for s in self.stages.values())

    @property
    def weight_writes(self) -> int:
        return sum(s.weight_writes for s in self.stages.values())

    def total_ops(self, *stage_names: str) -> int:
        """Sum of adds+mults over the given stages (all stages if none given)."""
        names = stage_names or tuple(self.stages)
        return sum(self.stages[n].adds + self.stages[n].mults
                   for n in names if n in self.stages)

    def as_dict(self) -> dict:
        """Plain nested dict of per-stage counts, for report records."""
        return {name: {"adds": s.adds, "mults": s.mults,
                       "comparisons": s.comparisons,
                       "weight_writes": s.weight_writes}
                for name, s in sorted(self.stages.items())}


_ACTIVE: OpCounter | None = None


def active_counter() -> OpCounter | None:
    return _ACTIVE


@contextmanager
def count_ops(counter: OpCounter):
    """Install `counter` as the active op counter for the enclosed block."""
    global _ACTIVE
    previous = _ACTIVE
    _ACTIVE = counter
    try:
        yield counter
    finally:
        _ACTIVE = previous
