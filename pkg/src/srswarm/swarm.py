"""Ant swarm with an energy-limited, locally reproducing population on a
toroidal lattice.

Ants follow pheromone by osmotropotaxis, lay pheromone in proportion to how
good their cell is relative to what the colony has seen, reproduce when
crowded but not packed, and lose energy every step. The per-step sweep is
sequential by construction (an ant sees the deposits and occupancy left by
ants earlier in the sweep), so it runs as a compiled loop. The per-ant
operations exposed here call the same compiled helpers the sweep uses.

Random draws come from a ``numpy.random.Generator`` in fixed blocks per tick:
three uniforms per living ant (move, reproduction test, child placement),
then one per ant for survival. The stream therefore depends only on the
seed and the population trajectory.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .landscape import GridSpec, LandscapeGrid

# Moore directions in 45-degree steps, clockwise from north: (drow, dcol)
DROW = np.array([-1, -1, 0, 1, 1, 1, 0, -1], dtype=np.int64)
DCOL = np.array([0, 1, 1, 1, 0, -1, -1, -1], dtype=np.int64)
STAY = 8

DIRECTION_WEIGHTS = (1.0, 1 / 2, 1 / 4, 1 / 12, 1 / 20)
REPRODUCTION_TABLE = (0.0, 0.25, 0.5, 0.75, 1.0, 0.75, 0.5, 0.25, 0.0)
# energies this close to zero count as spent (1 - 10 * 0.1 != 0 in floats)
ENERGY_EPS = 1e-9


@dataclass(frozen=True)
class SwarmParams:
    beta: float = 3.5
    gamma: float = 0.2
    eta: float = 0.07
    k: float = 0.015
    p: float = 1.93
    delta_e: float = 0.1
    weights: tuple = DIRECTION_WEIGHTS
    table: tuple = REPRODUCTION_TABLE
    rho: float = 1 / 3
    sense: str = "min"
    survival: str = "stochastic"

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "table", tuple(float(q) for q in self.table))
        if min(self.beta, self.gamma, self.eta, self.p) < 0:
            raise ValueError("beta, gamma, eta and p must be nonnegative")
        if not 0 <= self.k < 1:
            raise ValueError("evaporation rate k must lie in [0, 1)")
        if not 0 < self.delta_e <= 1:
            raise ValueError("delta_e must lie in (0, 1]")
        if not 0 <= self.rho <= 1:
            raise ValueError("rho must lie in [0, 1]")
        w = self.weights
        if len(w) != 5 or w[4] <= 0 or any(a < b for a, b in zip(w, w[1:])):
            raise ValueError("direction weights must satisfy w0 >= ... >= w4 > 0")
        q = self.table
        if len(q) != 9 or q[0] != 0 or q[8] != 0 or q[4] != 1:
            raise ValueError("reproduction table needs P(0) = P(8) = 0 and P(4) = 1")
        if any(q[n] != q[8 - n] for n in range(9)) or not all(0 <= x <= 1 for x in q):
            raise ValueError("reproduction table must be symmetric and within [0, 1]")
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        if self.survival not in ("stochastic", "deterministic"):
            raise ValueError("survival must be 'stochastic' or 'deterministic'")

    @property
    def maximize(self) -> bool:
        return self.sense == "max"


@dataclass
class AntState:
    row: int
    col: int
    theta: int
    energy: float = 1.0


class AltitudeNormalizer:
    """Extreme altitudes seen by the colony since the last landscape change.

    Backed by a 3-slot array ``[z_min, z_max, seen]`` that compiled code
    updates in place.
    """

    def __init__(self):
        self.data = np.array([0.0, 0.0, 0.0])

    @property
    def seen(self) -> bool:
        return self.data[2] != 0.0

    @property
    def z_min_seen(self) -> Optional[float]:
        return float(self.data[0]) if self.seen else None

    @property
    def z_max_seen(self) -> Optional[float]:
        return float(self.data[1]) if self.seen else None

    @property
    def delta_max(self) -> float:
        return float(self.data[1] - self.data[0]) if self.seen else 0.0

    def observe(self, z) -> None:
        for value in np.ravel(z):
            _observe(self.data, float(value))

    def reset(self) -> None:
        self.data[:] = 0.0

    def ratio(self, z: float, sense: str) -> float:
        return _ratio(self.data, z, sense == "max")


@dataclass
class SwarmState:
    shape: tuple[int, int]
    rows: np.ndarray
    cols: np.ndarray
    theta: np.ndarray
    energy: np.ndarray
    count: int
    occupancy: np.ndarray
    pheromone: np.ndarray
    normalizer: AltitudeNormalizer
    rng: np.random.Generator
    t: int = 0
    births: int = 0
    deaths: int = 0

    @property
    def population(self) -> int:
        return self.count

    @property
    def positions(self) -> tuple[np.ndarray, np.ndarray]:
        return self.rows[: self.count], self.cols[: self.count]

    @property
    def ants(self) -> list[AntState]:
        return [AntState(int(r), int(c), int(th), float(e)) for r, c, th, e in zip(
            self.rows[: self.count], self.cols[: self.count],
            self.theta[: self.count], self.energy[: self.count])]

    def check(self) -> None:
        """Raise AssertionError when occupancy or energy invariants break."""
        r, c = self.positions
        occ = np.zeros(self.shape, dtype=bool)
        occ[r, c] = True
        assert int(occ.sum()) == self.count, "two ants share a cell"
        assert np.array_equal(occ, self.occupancy), "occupancy out of sync"
        assert np.all(self.energy[: self.count] <= 1.0), "energy above 1"
        assert np.all(self.pheromone >= 0.0), "negative pheromone"


# -- compiled helpers -------------------------------------------------------

@njit(cache=True)
def weight_pheromone(sigma, beta, gamma):
    """Pheromone weighting ``(1 + sigma / (1 + gamma * sigma)) ** beta``."""
    return (1.0 + sigma / (1.0 + gamma * sigma)) ** beta


@njit(cache=True)
def _turn(d, theta):
    diff = abs(d - theta)
    return 8 - diff if diff > 4 else diff


@njit(cache=True)
def _observe(norm, z):
    if norm[2] == 0.0:
        norm[0] = z
        norm[1] = z
        norm[2] = 1.0
    else:
        if z < norm[0]:
            norm[0] = z
        if z > norm[1]:
            norm[1] = z


@njit(cache=True)
def _ratio(norm, z, maximize):
    dmax = abs(norm[1] - norm[0])
    if norm[2] == 0.0 or dmax == 0.0:
        return 0.0
    ref = norm[0] if maximize else norm[1]
    return min(abs(z - ref) / dmax, 1.0)


@njit(cache=True)
def _transition(r, c, theta, sigma, occ, beta, gamma, wdir, out):
    height, width = sigma.shape
    total = 0.0
    for d in range(8):
        rr = (r + DROW[d]) % height
        cc = (c + DCOL[d]) % width
        if occ[rr, cc]:
            out[d] = 0.0
        else:
            w = weight_pheromone(sigma[rr, cc], beta, gamma) * wdir[_turn(d, theta)]
            out[d] = w
            total += w
    if total == 0.0:
        out[STAY] = 1.0
    else:
        for d in range(8):
            out[d] /= total
        out[STAY] = 0.0


@njit(cache=True)
def _sample(probs, u):
    acc = 0.0
    last = -1
    for d in range(probs.shape[0]):
        if probs[d] > 0.0:
            acc += probs[d]
            last = d
            if u < acc:
                return d
    return last


@njit(cache=True)
def _neighbors(r, c, occ, free_dirs):
    """Number of occupied Moore cells; free directions go to ``free_dirs``."""
    height, width = occ.shape
    n = 0
    nfree = 0
    for d in range(8):
        if occ[(r + DROW[d]) % height, (c + DCOL[d]) % width]:
            n += 1
        else:
            free_dirs[nfree] = d
            nfree += 1
    return n


@njit(cache=True)
def _survives(energy, u, stochastic):
    if energy <= ENERGY_EPS:
        return False
    return u < energy if stochastic else True


@njit(cache=True)
def _sweep(rows, cols, theta, energy, count, occ, sigma, z, norm, maximize,
           beta, gamma, eta, p, wdir, table, draws):
    height, width = occ.shape
    probs = np.empty(9)
    free_dirs = np.empty(8, dtype=np.int64)
    births = 0
    for i in range(count):
        r = rows[i]
        c = cols[i]
        _transition(r, c, theta[i], sigma, occ, beta, gamma, wdir, probs)
        d = _sample(probs, draws[i, 0])
        if d != STAY:
            occ[r, c] = False
            r = (r + DROW[d]) % height
            c = (c + DCOL[d]) % width
            occ[r, c] = True
            rows[i] = r
            cols[i] = c
            theta[i] = d
        zi = z[r, c]
        _observe(norm, zi)
        ratio = _ratio(norm, zi, maximize)
        sigma[r, c] += eta + p * ratio
        n = _neighbors(r, c, occ, free_dirs)
        if n >= 1 and draws[i, 1] < table[n] * ratio and n < 8:
            d = free_dirs[min(int(draws[i, 2] * (8 - n)), 7 - n)]
            j = count + births
            rows[j] = (r + DROW[d]) % height
            cols[j] = (c + DCOL[d]) % width
            theta[j] = d
            energy[j] = 1.0
            occ[rows[j], cols[j]] = True
            births += 1
    return births


@njit(cache=True)
def _decay(rows, cols, theta, energy, count, occ, delta_e, stochastic, draws):
    alive = 0
    for i in range(count):
        e = energy[i] - delta_e
        if _survives(e, draws[i], stochastic):
            rows[alive] = rows[i]
            cols[alive] = cols[i]
            theta[alive] = theta[i]
            energy[alive] = e
            alive += 1
        else:
            occ[rows[i], cols[i]] = False
    return alive


# -- per-ant operations -----------------------------------------------------

def direction_weight(turn: int, weights=DIRECTION_WEIGHTS) -> float:
    """Weight of turning by ``turn`` 45-degree steps (0 straight, 4 U-turn)."""
    if turn not in range(5):
        raise ValueError(f"turn must be in 0..4, got {turn!r}")
    return float(weights[turn])


def neighbor(row: int, col: int, d: int, shape) -> tuple[int, int]:
    return (row + int(DROW[d])) % shape[0], (col + int(DCOL[d])) % shape[1]


def transition_probs(ant: AntState, pheromone: np.ndarray, occupancy: np.ndarray,
                     params: SwarmParams = SwarmParams()) -> np.ndarray:
    """Nine probabilities: the eight Moore directions, then staying put.

    Occupied neighbors get zero; staying has probability 1 only when all
    eight are occupied.
    """
    out = np.empty(9)
    _transition(ant.row, ant.col, ant.theta, pheromone, occupancy,
                params.beta, params.gamma, np.array(params.weights), out)
    return out


def step_ant(ant: AntState, probs: np.ndarray, occupancy: np.ndarray,
             rng: np.random.Generator) -> AntState:
    d = int(_sample(np.asarray(probs, dtype=float), rng.random()))
    if d == STAY:
        return AntState(ant.row, ant.col, ant.theta, ant.energy)
    row, col = neighbor(ant.row, ant.col, d, occupancy.shape)
    occupancy[ant.row, ant.col] = False
    occupancy[row, col] = True
    return AntState(row, col, d, ant.energy)


def deposit(ant: AntState, pheromone: np.ndarray, normalizer: AltitudeNormalizer,
            grid: LandscapeGrid, params: SwarmParams = SwarmParams()) -> float:
    """Register the ant's altitude and lay pheromone on its cell.

    Returns the amount laid, ``eta + p * ratio`` where ratio is how close the
    cell is to the best altitude seen (0 on a flat landscape).
    """
    z = float(grid.values[ant.row, ant.col])
    _observe(normalizer.data, z)
    amount = params.eta + params.p * _ratio(normalizer.data, z, params.maximize)
    pheromone[ant.row, ant.col] += amount
    return amount


def evaporate(pheromone: np.ndarray, k: float) -> np.ndarray:
    if not 0 <= k < 1:
        raise ValueError("evaporation rate k must lie in [0, 1)")
    pheromone *= 1.0 - k
    return pheromone


def reproduction_prob(n: int, delta_r: float, delta_max: float,
                      table=REPRODUCTION_TABLE) -> float:
    if not 0 <= n <= 8:
        raise ValueError(f"neighbor count must be in 0..8, got {n!r}")
    if delta_max < 0:
        raise ValueError("delta_max must be nonnegative")
    if delta_max == 0:
        return 0.0
    return float(table[n]) * min(delta_r / delta_max, 1.0)


def try_reproduce(ant: AntState, swarm: SwarmState, grid: LandscapeGrid,
                  params: SwarmParams = SwarmParams()) -> Optional[AntState]:
    """Reproduction test for one ant already on its cell; the child, if any,
    is added to the swarm."""
    free_dirs = np.empty(8, dtype=np.int64)
    n = int(_neighbors(ant.row, ant.col, swarm.occupancy, free_dirs))
    if n == 0:
        return None
    u_test, u_place = swarm.rng.random(2)
    ratio = _ratio(swarm.normalizer.data, float(grid.values[ant.row, ant.col]),
                   params.maximize)
    if n == 8 or not u_test < params.table[n] * ratio:
        return None
    d = int(free_dirs[min(int(u_place * (8 - n)), 7 - n)])
    row, col = neighbor(ant.row, ant.col, d, swarm.shape)
    child = AntState(row, col, d, 1.0)
    j = swarm.count
    swarm.rows[j], swarm.cols[j], swarm.theta[j], swarm.energy[j] = row, col, d, 1.0
    swarm.occupancy[row, col] = True
    swarm.count += 1
    swarm.births += 1
    return child


def decay_and_survive(ant: AntState, delta_e: float, rng: np.random.Generator,
                      stochastic: bool = True) -> bool:
    """Spend ``delta_e`` of energy, then survive with probability equal to
    what is left (or whenever anything is left, in deterministic mode)."""
    ant.energy -= delta_e
    return bool(_survives(ant.energy, rng.random(), stochastic))


# -- whole-swarm operations -------------------------------------------------

def init_swarm(spec: GridSpec, params: SwarmParams, rng: np.random.Generator) -> SwarmState:
    """Place ``floor(rho * cells)`` ants on distinct random cells; the
    pheromone field starts at zero and the normalizer empty."""
    if not 0 <= params.rho <= 1:
        raise ValueError("rho must lie in [0, 1]")
    cells = spec.width * spec.height
    count = math.floor(params.rho * cells + 1e-9)
    picks = rng.permutation(cells)[:count]
    orient = rng.integers(0, 8, size=count)
    rows = np.zeros(cells, dtype=np.int64)
    cols = np.zeros(cells, dtype=np.int64)
    theta = np.zeros(cells, dtype=np.int64)
    energy = np.zeros(cells)
    rows[:count], cols[:count] = np.divmod(picks, spec.width)
    theta[:count] = orient
    energy[:count] = 1.0
    occupancy = np.zeros(spec.shape, dtype=bool)
    occupancy[rows[:count], cols[:count]] = True
    return SwarmState(spec.shape, rows, cols, theta, energy, count, occupancy,
                      np.zeros(spec.shape), AltitudeNormalizer(), rng)


def tick(swarm: SwarmState, grid: LandscapeGrid, params: SwarmParams) -> SwarmState:
    """One main-loop step, in place: sequential move/deposit/reproduce sweep,
    evaporation everywhere, then energy decay and survival for every ant."""
    count = swarm.count
    draws = swarm.rng.random((count, 3))
    births = _sweep(swarm.rows, swarm.cols, swarm.theta, swarm.energy, count,
                    swarm.occupancy, swarm.pheromone, grid.values,
                    swarm.normalizer.data, params.maximize, params.beta, params.gamma,
                    params.eta, params.p, np.array(params.weights),
                    np.array(params.table), draws)
    evaporate(swarm.pheromone, params.k)
    total = count + births
    survival = swarm.rng.random(total)
    alive = _decay(swarm.rows, swarm.cols, swarm.theta, swarm.energy, total,
                   swarm.occupancy, params.delta_e, params.survival == "stochastic",
                   survival)
    swarm.count = alive
    swarm.births += births
    swarm.deaths += total - alive
    swarm.t += 1
    return swarm
