"""Adaptive Runge-Kutta integration and the dynamic optimal-control objective.

``integrate`` is a Dormand-Prince 5(4) embedded pair with max-norm error
control, so it works on state arrays of any shape. A whole control landscape
is integrated as one decoupled system: every cell then meets the tolerance
because the step is accepted only when the worst component does.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

# Dormand & Prince (1980) coefficients
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

T_FINAL = 1.0
CONTROL_Y0 = (2.0, 2.0)


class IntegrationError(RuntimeError):
    def __init__(self, message: str, t: float):
        super().__init__(f"{message} at t={t!r}")
        self.t = t


@dataclass(frozen=True)
class IvpSpec:
    rhs: Callable[[float, np.ndarray], np.ndarray]
    t0: float
    tf: float
    y0: np.ndarray

    def __post_init__(self):
        if not self.t0 < self.tf:
            raise ValueError("need t0 < tf")


@dataclass(frozen=True)
class SolverConfig:
    rtol: float = 1e-8
    atol: float = 1e-10
    h0: float = 0.0  # 0 selects the starting step automatically
    max_steps: int = 100_000

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_steps < 1 or self.h0 < 0:
            raise ValueError("max_steps must be positive and h0 nonnegative")


def _eval(rhs, t, y):
    dy = np.asarray(rhs(t, y), dtype=float)
    if not np.all(np.isfinite(dy)):
        raise IntegrationError("non-finite derivative", t)
    return dy


def _error_norm(err, y, y_new, cfg):
    scale = cfg.atol + cfg.rtol * np.maximum(np.abs(y), np.abs(y_new))
    return float(np.max(np.abs(err) / scale))


def _initial_step(rhs, t0, y0, f0, span, cfg):
    # starting-step heuristic of Hairer, Norsett & Wanner
    scale = cfg.atol + cfg.rtol * np.abs(y0)
    d0 = np.max(np.abs(y0) / scale)
    d1 = np.max(np.abs(f0) / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = _eval(rhs, t0 + h0, y0 + h0 * f0)
    d2 = np.max(np.abs(f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, span)


def integrate(ivp: IvpSpec, cfg: SolverConfig = SolverConfig()) -> np.ndarray:
    """State at ``ivp.tf``, with local error held under the configured
    tolerances by step-size adaptation."""
    t, tf = float(ivp.t0), float(ivp.tf)
    y = np.array(ivp.y0, dtype=float)
    f = _eval(ivp.rhs, t, y)
    h = cfg.h0 or _initial_step(ivp.rhs, t, y, f, tf - t, cfg)
    k = [None] * 7

    for _ in range(cfg.max_steps):
        if t >= tf:
            return y
        h = min(h, tf - t)
        if h <= 1e-14 * max(1.0, abs(t)):
            raise IntegrationError("step size underflow", t)
        k[0] = f
        for i in range(1, 7):
            yi = y + h * sum(a * ki for a, ki in zip(_A[i], k[:i]) if a != 0.0)
            k[i] = _eval(ivp.rhs, t + _C[i] * h, yi)
        y_new = yi  # stage 7 is evaluated at the 5th-order solution (FSAL)
        err = h * sum(e * ki for e, ki in zip(_E, k) if e != 0.0)
        norm = _error_norm(err, y, y_new, cfg)
        if norm <= 1.0:
            t = tf if tf - (t + h) <= 1e-15 * abs(tf) else t + h
            y, f = y_new, k[6]
            factor = 5.0 if norm == 0.0 else min(5.0, 0.9 * norm ** -0.2)
        else:
            factor = max(0.2, 0.9 * norm ** -0.2)
        h *= factor
    if t >= tf:
        return y
    raise IntegrationError("step budget exhausted", t)


def control_rhs(t: float, state, U1, U2) -> np.ndarray:
    """First-order form of the controlled oscillator, ``state = (z, dz/dt)``."""
    z, y = state[0], state[1]
    st, ct = np.sin(t), np.cos(t)
    dy = (st * U1 * U1 + ct * U2 * U2 + st * U1 * U2
          - np.sin(z) * y - st * np.cos(z) * z**3)
    return np.stack([np.asarray(y, dtype=float), np.asarray(dy, dtype=float)])


def solve_control(u1: float, u2: float, delta: float = 0.0,
                  cfg: SolverConfig = SolverConfig()) -> float:
    """Objective ``z(1)**2`` for controls ``U_i = u_i + delta``."""
    U1, U2 = u1 + delta, u2 + delta
    ivp = IvpSpec(lambda t, s: control_rhs(t, s, U1, U2), 0.0, T_FINAL,
                  np.array(CONTROL_Y0))
    z = integrate(ivp, cfg)[0]
    return float(z * z)


def control_landscape(u1, u2, offset=(0.0, 0.0), cfg: SolverConfig = SolverConfig()):
    """``z(1)**2`` over arrays of controls, offset per dimension."""
    U1 = np.asarray(u1, dtype=float) + offset[0]
    U2 = np.asarray(u2, dtype=float) + offset[1]
    y0 = np.stack([np.full(U1.shape, CONTROL_Y0[0]), np.full(U1.shape, CONTROL_Y0[1])])
    ivp = IvpSpec(lambda t, s: control_rhs(t, s, U1, U2), 0.0, T_FINAL, y0)
    z = integrate(ivp, cfg)[0]
    return z * z
