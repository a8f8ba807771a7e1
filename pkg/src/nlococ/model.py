"""Physical coefficients of the constant-mobility tumour growth system."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np


class AssumptionError(ValueError):
    """A configuration value violates one of the model's structural assumptions.

    ``label`` names the assumption (``A1``, ``B3``, ``C1``, ...).
    """

    def __init__(self, label: str, message: str):
        super().__init__(f"[{label}] {message}")
        self.label = label
        self.message = message


@dataclass(frozen=True)
class Ramp:
    """Smooth bounded profile ``low + (high - low) (1 + tanh(slope (s - center))) / 2``.

    ``low == high`` (or ``slope == 0``) gives a constant.  Used for the
    proliferation function P and the radiotherapy distribution h.
    """

    low: float
    high: float
    slope: float = 1.0
    center: float = 0.0

    @classmethod
    def constant(cls, value: float) -> "Ramp":
        return cls(value, value, 0.0)

    def _t(self, s):
        return np.tanh(self.slope * (np.asarray(s, dtype=float) - self.center))

    def __call__(self, s):
        return self.low + (self.high - self.low) * (1 + self._t(s)) / 2

    def d1(self, s):
        t = self._t(s)
        return (self.high - self.low) * self.slope * (1 - t * t) / 2

    def d2(self, s):
        t = self._t(s)
        return -(self.high - self.low) * self.slope**2 * (1 - t * t) * t

    @property
    def floor(self) -> float:
        return min(self.low, self.high)

    @property
    def ceiling(self) -> float:
        return max(abs(self.low), abs(self.high))

    @property
    def lipschitz(self) -> float:
        return abs(self.high - self.low) * abs(self.slope) / 2


@dataclass(frozen=True)
class ModelParams:
    A: float = 1.0
    B: float = 1.0
    tau: float = 1.0
    chi: float = 0.0
    m: float = 1.0
    n: float = 1.0
    P: Ramp = field(default_factory=lambda: Ramp.constant(1.0))
    h: Ramp = field(default_factory=lambda: Ramp.constant(1.0))

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("A", "B", "tau", "chi", "m", "n"):
            if not np.isfinite(getattr(self, name)):
                raise AssumptionError("A1", f"{name} must be finite")
        if not self.A > 0:
            raise AssumptionError("A1", f"A > 0 required, got A={self.A}")
        if not self.B > 0:
            raise AssumptionError("A1", f"B > 0 required, got B={self.B}")
        if not self.tau > 0:
            raise AssumptionError("A1", f"tau > 0 required, got tau={self.tau}")
        if not self.chi >= 0:
            raise AssumptionError("A1", f"chi >= 0 required, got chi={self.chi}")
        if not (self.m > 0 and self.n > 0):
            raise AssumptionError("A6", f"mobilities must be positive, got m={self.m}, n={self.n}")
        for ramp in (self.P, self.h):
            if not all(np.isfinite([ramp.low, ramp.high, ramp.slope, ramp.center])):
                raise AssumptionError("B3", f"profile {ramp} must have finite parameters")
        if not self.P.floor > 0:
            raise AssumptionError("A5", f"P(s) >= P0 > 0 required, got P0={self.P.floor}")

    def to_dict(self) -> dict:
        return asdict(self)
