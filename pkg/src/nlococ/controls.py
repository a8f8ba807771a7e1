"""Space-time controls and the admissible sets for radiotherapy ``u`` and chemotherapy ``v``.

Controls are arrays of shape ``(steps + 1,) + grid.shape``; ``u[n]`` is the
value at time node ``t_n``.  The control inner product weights every node by
``dt * cell_volume``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridSpec, TimeGrid
from .model import AssumptionError


@dataclass
class ControlPair:
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.u.shape != self.v.shape:
            raise ValueError(f"u and v must share a shape, got {self.u.shape} and {self.v.shape}")

    @classmethod
    def zeros(cls, grid: GridSpec, time: TimeGrid) -> "ControlPair":
        shape = (time.steps + 1,) + grid.shape
        return cls(np.zeros(shape), np.zeros(shape))

    @classmethod
    def constant(cls, grid: GridSpec, time: TimeGrid, u: float = 0.0, v: float = 0.0) -> "ControlPair":
        shape = (time.steps + 1,) + grid.shape
        return cls(np.full(shape, float(u)), np.full(shape, float(v)))

    def check(self, grid: GridSpec, time: TimeGrid) -> "ControlPair":
        shape = (time.steps + 1,) + grid.shape
        if self.u.shape != shape:
            raise ValueError(f"controls have shape {self.u.shape}, expected {shape}")
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v))):
            raise ValueError("controls must be finite")
        return self

    def copy(self) -> "ControlPair":
        return ControlPair(self.u.copy(), self.v.copy())

    def __add__(self, other: "ControlPair") -> "ControlPair":
        return ControlPair(self.u + other.u, self.v + other.v)

    def __sub__(self, other: "ControlPair") -> "ControlPair":
        return ControlPair(self.u - other.u, self.v - other.v)

    def scaled(self, s: float) -> "ControlPair":
        return ControlPair(s * self.u, s * self.v)


def h1_time_norm(u: np.ndarray, grid: GridSpec, time: TimeGrid) -> float:
    """Discrete ``H^1(0,T;L^2)`` norm: ``sum dt ||u^n||^2 + sum dt ||(u^n - u^{n-1})/dt||^2``."""
    u = np.asarray(u, dtype=float)
    dt, vol = time.dt, grid.cell_volume
    mass = dt * vol * np.sum(u * u)
    du = np.diff(u, axis=0)
    diff = vol * np.sum(du * du) / dt
    return float(np.sqrt(mass + diff))


@dataclass
class ControlBounds:
    """Box bounds (scalars or space-time arrays) and the H1-ball radius ``M`` for ``u``."""

    u_min: np.ndarray | float = 0.0
    u_max: np.ndarray | float = 1.0
    v_min: np.ndarray | float = 0.0
    v_max: np.ndarray | float = 1.0
    M: float = 10.0

    def __post_init__(self):
        for name in ("u_min", "u_max", "v_min", "v_max"):
            val = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(val)):
                raise AssumptionError("C3", f"{name} must be finite")
            setattr(self, name, val if val.ndim else float(val))
        if np.any(np.asarray(self.u_min) < 0):
            raise AssumptionError("C3", "u_min >= 0 required")
        if np.any(np.asarray(self.u_min) > np.asarray(self.u_max)):
            raise AssumptionError("C3", "u_min <= u_max required")
        if np.any(np.asarray(self.v_min) > np.asarray(self.v_max)):
            raise AssumptionError("C3", "v_min <= v_max required")
        if not (np.isfinite(self.M) and self.M > 0):
            raise AssumptionError("C3", f"H1 radius M must be positive, got {self.M}")

    def u_in_box(self, u, atol: float = 0.0) -> bool:
        return bool(np.all(u >= self.u_min - atol) and np.all(u <= self.u_max + atol))

    def v_in_box(self, v, atol: float = 0.0) -> bool:
        return bool(np.all(v >= self.v_min - atol) and np.all(v <= self.v_max + atol))

    def u_in_ball(self, u, grid: GridSpec, time: TimeGrid, atol: float = 0.0) -> bool:
        return h1_time_norm(u, grid, time) <= self.M + atol

    def feasible(self, c: ControlPair, grid: GridSpec, time: TimeGrid, atol: float = 1e-8) -> bool:
        return self.u_in_box(c.u, atol) and self.v_in_box(c.v, atol) and self.u_in_ball(c.u, grid, time, atol)
