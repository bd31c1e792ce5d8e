"""Base functions, their sampling on a toroidal lattice, and the temporal
dynamics that translate them.

Grid arrays are indexed ``[row, col]`` with row 0 at the northern edge
(``y_max``) and col 0 at the western edge (``x_min``). Continuous functions
are sampled at cell centers.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

TIE_TOL = 1e-12

DYNAMICS_KINDS = ("static", "linear", "circular", "random", "severity-step", "path")
BASE_FUNCTIONS = ("ackley", "schaffer", "doc")


@dataclass(frozen=True)
class Domain2D:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"empty domain: {self}")


@dataclass(frozen=True)
class GridSpec:
    width: int
    height: int
    domain: Domain2D

    def __post_init__(self):
        if self.width < 3 or self.height < 3:
            raise ValueError("grid must be at least 3x3 for a Moore neighborhood")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def dx(self) -> float:
        return (self.domain.x_max - self.domain.x_min) / self.width

    @property
    def dy(self) -> float:
        return (self.domain.y_max - self.domain.y_min) / self.height

    def cell_center(self, row, col):
        """Function coordinates ``(x, y)`` of a cell center; accepts arrays."""
        x = self.domain.x_min + (np.asarray(col) + 0.5) * self.dx
        y = self.domain.y_max - (np.asarray(row) + 0.5) * self.dy
        if np.ndim(x) == 0:
            return float(x), float(y)
        return x, y

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """Cell containing the point ``(x, y)``, clipped to the grid."""
        col = int(math.floor((x - self.domain.x_min) / self.dx))
        row = int(math.floor((self.domain.y_max - y) / self.dy))
        return min(max(row, 0), self.height - 1), min(max(col, 0), self.width - 1)

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        rows, cols = np.indices(self.shape)
        return self.cell_center(rows, cols)


@dataclass(frozen=True)
class DynamicsSpec:
    """How the environment moves.

    ``severity`` is S for linear/circular/random and s for severity-step.
    ``speed`` is in cells per step and only used by the path kind, which
    ignores ``uf``.
    """

    kind: str = "static"
    severity: float = 0.0
    cycle: int = 1
    speed: float = 0.0
    uf: int = 1
    start: Optional[tuple[int, int]] = None

    def __post_init__(self):
        if self.kind not in DYNAMICS_KINDS:
            raise ValueError(f"unknown dynamics kind {self.kind!r}")
        if self.uf < 1:
            raise ValueError("uf must be >= 1")
        if self.cycle < 1:
            raise ValueError("cycle length C must be >= 1")
        if self.speed < 0:
            raise ValueError("speed must be >= 0")


@dataclass(frozen=True)
class EnvironmentState:
    offset: tuple[float, float] = (0.0, 0.0)
    T: int = 0
    t: int = 0
    target: Optional[tuple[int, int]] = None
    carry: float = 0.0


@dataclass
class LandscapeGrid:
    values: np.ndarray
    z_min: float
    z_max: float
    min_mask: np.ndarray
    max_mask: np.ndarray

    @classmethod
    def from_values(cls, values: np.ndarray) -> "LandscapeGrid":
        values = np.ascontiguousarray(values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise ValueError("landscape contains non-finite values")
        z_min = float(values.min())
        z_max = float(values.max())
        return cls(
            values=values,
            z_min=z_min,
            z_max=z_max,
            min_mask=values <= z_min + TIE_TOL,
            max_mask=values >= z_max - TIE_TOL,
        )

    @property
    def argmin_cells(self) -> np.ndarray:
        return np.argwhere(self.min_mask)

    @property
    def argmax_cells(self) -> np.ndarray:
        return np.argwhere(self.max_mask)

    def optimum(self, sense: str) -> float:
        return self.z_min if sense == "min" else self.z_max

    def opt_mask(self, sense: str) -> np.ndarray:
        return self.min_mask if sense == "min" else self.max_mask


# -- base functions ---------------------------------------------------------

def eval_ackley(x, y, a=(0.0, 0.0)):
    """Two-dimensional Ackley function with its minimum moved to ``a``."""
    dx = np.asarray(x, dtype=float) - a[0]
    dy = np.asarray(y, dtype=float) - a[1]
    out = (
        -20.0 * np.exp(-0.2 * np.sqrt(0.5 * (dx * dx + dy * dy)))
        - np.exp(0.5 * (np.cos(2.0 * np.pi * dx) + np.cos(2.0 * np.pi * dy)))
        + 20.0
        + np.e
    )
    # the closed form leaves ~4e-16 of rounding at the optimum itself
    out = np.where((dx == 0.0) & (dy == 0.0), 0.0, out)
    return float(out) if out.ndim == 0 else out


def eval_schaffer_f7(x1, x2, delta=0.0):
    """Modified Schaffer F7 on ``X_i = x_i + delta``; maximum 2.5 at X = 0.

    ``delta`` may be a scalar or a per-dimension pair.
    """
    d1, d2 = (delta, delta) if np.ndim(delta) == 0 else delta
    X1 = np.asarray(x1, dtype=float) + d1
    X2 = np.asarray(x2, dtype=float) + d2
    r2 = X1 * X1 + X2 * X2
    out = 2.5 - r2**0.25 * (np.sin(50.0 * r2**0.1) ** 2 + 1.0)
    return float(out) if out.ndim == 0 else out


# -- dynamics ---------------------------------------------------------------

def advance_linear(offset, S: float) -> tuple[float, float]:
    return tuple(o + S for o in offset)


def advance_circular(offset, S: float, C: int, t: int) -> tuple[float, float]:
    """One application of the circular dynamic; ``t`` counts prior applications.

    The x offset takes the sine term and the y offset the cosine term.
    """
    if C < 1:
        raise ValueError("cycle length C must be >= 1")
    phase = 2.0 * math.pi * t / C
    return (offset[0] + S * math.sin(phase), offset[1] + S * math.cos(phase))


def advance_random(offset, S: float, rng: np.random.Generator) -> tuple[float, float]:
    step = rng.standard_normal(len(offset))
    return tuple(float(o + S * z) for o, z in zip(offset, step))


def advance_severity(delta: float, s: float, T: int) -> tuple[float, int]:
    return delta + s, T + 1


def advance_path(target: tuple[int, int], v: float, carry: float,
                 shape: tuple[int, int]) -> tuple[tuple[int, int], float]:
    """Move a target cell ``v`` cells per call along the NW->SE diagonal.

    Fractional speeds accumulate in ``carry``; the grid wraps toroidally.
    """
    if v < 0:
        raise ValueError("speed must be >= 0")
    carry += v
    cells = math.floor(carry)
    carry -= cells
    height, width = shape
    return ((target[0] + cells) % height, (target[1] + cells) % width), carry


def initial_environment(dynamics: DynamicsSpec, grid: GridSpec,
                        offset=(0.0, 0.0)) -> EnvironmentState:
    if dynamics.kind == "path":
        target = dynamics.start if dynamics.start is not None else (
            grid.height // 2, grid.width // 2)
        return EnvironmentState(offset=grid.cell_center(*target), target=tuple(target))
    return EnvironmentState(offset=tuple(float(o) for o in offset))


def advance_environment(env: EnvironmentState, dynamics: DynamicsSpec, grid: GridSpec,
                        rng: Optional[np.random.Generator] = None
                        ) -> tuple[EnvironmentState, bool]:
    """Advance the wall clock by one step; return the new state and whether
    the landscape changed."""
    t = env.t + 1
    kind = dynamics.kind
    if kind == "path":
        target, carry = advance_path(env.target, dynamics.speed, env.carry, grid.shape)
        if target == env.target:
            return replace(env, t=t, carry=carry), False
        return EnvironmentState(offset=grid.cell_center(*target), T=env.T + 1, t=t,
                                target=target, carry=carry), True
    if kind == "static" or t % dynamics.uf != 0:
        return replace(env, t=t), False

    S = dynamics.severity
    if kind == "linear":
        offset = advance_linear(env.offset, S)
    elif kind == "circular":
        offset = advance_circular(env.offset, S, dynamics.cycle, env.T)
    elif kind == "random":
        if rng is None:
            raise ValueError("random dynamics need an rng")
        offset = advance_random(env.offset, S, rng)
    else:
        offset = tuple(o + S for o in env.offset)
    return replace(env, offset=offset, T=env.T + 1, t=t), True


# -- grids ------------------------------------------------------------------

BaseFunction = Union[str, Callable[[np.ndarray, np.ndarray, tuple], np.ndarray]]


def rebuild_grid(spec: GridSpec, base: BaseFunction, env: EnvironmentState,
                 solver_config=None) -> LandscapeGrid:
    """Sample ``base`` at every cell center under the current offset.

    ``base`` is one of ``BASE_FUNCTIONS`` or a callable ``f(x, y, offset)``.
    """
    x, y = spec.centers()
    if callable(base):
        values = np.broadcast_to(np.asarray(base(x, y, env.offset), dtype=float), spec.shape)
    elif base == "ackley":
        values = eval_ackley(x, y, env.offset)
    elif base == "schaffer":
        values = eval_schaffer_f7(x, y, env.offset)
    elif base == "doc":
        from .ode import SolverConfig, control_landscape

        values = control_landscape(x, y, env.offset, solver_config or SolverConfig())
    else:
        raise ValueError(f"unknown base function {base!r}")
    return LandscapeGrid.from_values(np.array(values, dtype=float))


def write_grid_csv(grid: LandscapeGrid, path) -> None:
    """Row-major CSV: one line per grid row, one value per cell."""
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in grid.values:
            writer.writerow([repr(float(v)) for v in row])


def read_grid_csv(path) -> np.ndarray:
    with open(Path(path), newline="") as fh:
        return np.array([[float(v) for v in row] for row in csv.reader(fh)])
