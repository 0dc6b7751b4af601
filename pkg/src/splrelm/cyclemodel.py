"""Analytic cycle-count and throughput model of the reference hardware,
plus the instrumented-workload complexity report.

The cycle formulas are the worst-case, non-overlapped counts: training a
sample costs D + 2M + P cycles (input load, hidden pass, update pass,
pipeline fill) and inference costs D + M + P. Throughput figures quoted
for the reference hardware exceed what these formulas allow at the stated
clock; they assume an unspecified pipeline overlap, so the two are only
ever shown side by side, never reconciled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datasets import synthetic_blobs
from .models import ElmClassifier, SplrClassifier, train_epoch
from .opcount import OpCounter, count_ops

DEFAULT_PIPELINE = 3


@dataclass(frozen=True)
class HwConfig:
    """One hardware operating point: dimensions, pipeline depth, clock."""
    d: int
    m: int
    c: int = 10
    p: int = DEFAULT_PIPELINE
    f_max: float = 224.0

    def __post_init__(self):
        for name in ("d", "m", "c", "p"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.f_max <= 0:
            raise ValueError("f_max must be positive")


# The three published operating points (M at its clock in MHz).
REFERENCE_CONFIGS = (
    HwConfig(d=784, m=512, c=10, p=3, f_max=230.7),
    HwConfig(d=784, m=1024, c=10, p=3, f_max=225.4),
    HwConfig(d=784, m=1700, c=10, p=3, f_max=224.0),
)

# Throughput quoted for the M=1700 reference hardware. Both exceed the
# worst-case formula values at 224.0 MHz (53,499 train / 90,068 infer),
# so they are carried as reference constants, not computed.
REPORTED_TRAIN_FPS_M1700 = 63_454
REPORTED_INFER_FPS_M1700 = 122_336

DISCREPANCY_NOTE = (
    "note: the quoted M=1700 hardware throughput (63454 train / 122336 "
    "infer fps) exceeds what the worst-case cycle formulas allow at "
    "224.0 MHz (53499 / 90068 fps); the quoted figures assume an "
    "unspecified pipeline overlap and are shown for reference only."
)


def _dims(cfg, m, p) -> tuple[int, int, int]:
    if isinstance(cfg, HwConfig):
        return cfg.d, cfg.m, cfg.p
    if m is None:
        raise TypeError("pass an HwConfig or explicit d and m")
    return int(cfg), int(m), DEFAULT_PIPELINE if p is None else int(p)


def train_cycles_worst(cfg, m: int | None = None, p: int | None = None) -> int:
    """Worst-case cycles to train on one sample: D + 2M + P.

    Accepts an HwConfig or explicit (d, m, p) scalars.
    """
    d, m, p = _dims(cfg, m, p)
    return d + 2 * m + p


def infer_cycles(cfg, m: int | None = None, p: int | None = None) -> int:
    """Cycles to classify one sample: D + M + P."""
    d, m, p = _dims(cfg, m, p)
    return d + m + p


def fps(cfg, cycles: int) -> float:
    """Frames per second at a clock: f_max megahertz over cycles per frame.

    Accepts an HwConfig or the clock in MHz directly.
    """
    if cycles <= 0:
        raise ValueError(f"cycles must be positive, got {cycles}")
    f_max = cfg.f_max if isinstance(cfg, HwConfig) else float(cfg)
    return f_max * 1e6 / cycles


def pipelined_fps(cfg: HwConfig, training: bool = False) -> float:
    """Throughput if stages overlapped perfectly: f_max over the longest
    stage. This extrapolates beyond the worst-case formulas above and is
    a sensitivity aid, not a published number.
    """
    stages = (cfg.d, cfg.m, cfg.p)
    return cfg.f_max * 1e6 / max(stages)


# -- measured complexity ------------------------------------------------------

@dataclass
class ComplexityRow:
    m: int
    elm_solve_ops: int
    elm_total_ops: int
    splr_ops_per_update: float
    splr_update_mults: int
    splr_updates: int


@dataclass
class ComplexityReport:
    rows: list[ComplexityRow] = field(default_factory=list)
    elm_slope: float = 0.0
    splr_slope: float = 0.0


def loglog_slope(x, y) -> float:
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(np.asarray(x, dtype=float)),
                            np.log(np.asarray(y, dtype=float)), 1)[0])


def complexity_report(m_values: list[int], samples: int = 240,
                      input_dim: int = 16, seed: int = 7) -> ComplexityReport:
    """Run instrumented workloads at each hidden size on one fixed small
    synthetic dataset and fit growth exponents.

    The least-squares exponent is fitted on the factorization stage alone:
    at a fixed sample count the Gram accumulation is quadratic in M and
    would mask the cubic solve. The online rule's exponent is fitted on
    update-path ops per misclassified sample, which normalizes away the
    error rate's own dependence on M.
    """
    if not m_values:
        raise ValueError("m_values must be nonempty")
    data = synthetic_blobs(samples, input_dim, seed=seed)
    report = ComplexityReport()
    for m in m_values:
        counter = OpCounter()
        with count_ops(counter):
            ElmClassifier(m, input_dim).fit(data)
        solve_ops = counter.stage("factor").total
        total_ops = counter.total_ops("gram", "factor", "solve")

        model = SplrClassifier(m, input_dim)
        model.calibrate_threshold(data)
        counter = OpCounter()
        with count_ops(counter):
            stats = train_epoch(model, data, shuffle_seed=0)
        update = counter.stage("update")
        per_update = update.total / max(stats.updates, 1)
        report.rows.append(ComplexityRow(
            m=m, elm_solve_ops=solve_ops, elm_total_ops=total_ops,
            splr_ops_per_update=per_update, splr_update_mults=update.mults,
            splr_updates=stats.updates))
    ms = [row.m for row in report.rows]
    if len(ms) >= 2:
        report.elm_slope = loglog_slope(ms, [r.elm_solve_ops for r in report.rows])
        report.splr_slope = loglog_slope(
            ms, [r.splr_ops_per_update for r in report.rows])
    return report
