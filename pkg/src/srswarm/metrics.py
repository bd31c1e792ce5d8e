"""Per-step measurements and per-run summaries."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .landscape import LandscapeGrid

CAPTURE_TOL = 1e-9


@dataclass(frozen=True)
class StepRecord:
    t: int
    population: int
    best: float
    mean_altitude: float
    captured: bool
    grid_opt: float


@dataclass
class RunSummary:
    scenario: str
    seed: int
    records: list
    success_rate: float
    mutation_steps: list = field(default_factory=list)
    extinct_at: Optional[int] = None

    @property
    def terminated_early(self) -> bool:
        return self.extinct_at is not None


def record_step(swarm, grid: LandscapeGrid, sense: str) -> StepRecord:
    """Measure a swarm (anything with ``t`` and ``positions``) on the current
    grid. An empty swarm yields NaN for best and mean."""
    rows, cols = swarm.positions
    return measure(swarm.t, rows, cols, grid, sense)


def measure(t: int, rows, cols, grid: LandscapeGrid, sense: str) -> StepRecord:
    opt = grid.optimum(sense)
    if len(rows) == 0:
        return StepRecord(t, 0, math.nan, math.nan, False, opt)
    z = grid.values[rows, cols]
    best = float(z.min() if sense == "min" else z.max())
    captured = bool(grid.opt_mask(sense)[rows, cols].any())
    return StepRecord(t, len(rows), best, float(z.mean()), captured, opt)


def success_rate(records: Sequence[StepRecord], start: Optional[int] = None,
                 stop: Optional[int] = None) -> float:
    """Fraction of steps with a capture, optionally over ``start <= t <= stop``."""
    window = [r for r in records
              if (start is None or r.t >= start) and (stop is None or r.t <= stop)]
    if not window:
        raise ValueError("no records in window")
    return sum(r.captured for r in window) / len(window)


def best_so_far(records: Sequence[StepRecord], sense: str,
                mutation_steps: Sequence[int] = ()) -> tuple[np.ndarray, np.ndarray]:
    """Per-iteration best and its running best, restarted at every step
    listed in ``mutation_steps``."""
    if not records:
        raise ValueError("need at least one record")
    better = min if sense == "min" else max
    resets = set(mutation_steps)
    per_step = np.array([r.best for r in records])
    cumulative = np.empty_like(per_step)
    current = math.nan
    for i, r in enumerate(records):
        if i == 0 or r.t in resets or math.isnan(current):
            current = r.best
        elif not math.isnan(r.best):
            current = better(current, r.best)
        cumulative[i] = current
    return per_step, cumulative


def recovery_events(records: Sequence[StepRecord], mutation_steps: Sequence[int],
                    window: int, rel_tol: float) -> list[bool]:
    """For each landscape change at step m, whether some step in
    ``m .. m + window - 1`` has ``|best - grid_opt| <= rel_tol * |grid_opt|``."""
    by_t = {r.t: r for r in records}
    last = max(by_t)
    out = []
    for m in mutation_steps:
        if m > last:
            continue
        hit = False
        for t in range(m, min(m + window, last + 1)):
            r = by_t.get(t)
            if r is None or math.isnan(r.best):
                continue
            if abs(r.grid_opt - r.best) <= rel_tol * abs(r.grid_opt):
                hit = True
                break
        out.append(hit)
    return out
