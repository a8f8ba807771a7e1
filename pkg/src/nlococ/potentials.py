"""Double-well potentials, their convex/smooth splitting and Moreau-Yosida regularization.

Each potential is written as ``F = F1 + F2`` with ``F1`` convex on its domain
``(-l, l)`` and ``F2'`` globally Lipschitz with ``F2'(0) = 0``.  All evaluation
methods are vectorised over ``numpy`` arrays.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate
from scipy.special import xlogy

from .model import AssumptionError


class SeparationError(ValueError):
    """Raised when a singular potential is evaluated outside its open domain."""


class Potential:
    """Base class; subclasses implement the two parts and their derivatives."""

    kind = "abstract"
    half_width = math.inf

    # convex part and derivatives, order 0..3
    def f1(self, s, order=0):
        raise NotImplementedError

    # Lipschitz-derivative part and derivatives, order 0..3
    def f2(self, s, order=0):
        raise NotImplementedError

    def check_domain(self, s, order=1):
        s = np.asarray(s, dtype=float)
        if not np.all(np.isfinite(s)):
            raise ValueError("potential argument is not finite")
        if math.isfinite(self.half_width):
            bad = np.abs(s) >= self.half_width if order >= 1 else np.abs(s) > self.half_width
            if np.any(bad):
                worst = float(np.max(np.abs(s)))
                raise SeparationError(
                    f"{self.kind} potential evaluated at |s| = {worst!r}, outside its domain (-{self.half_width}, {self.half_width})"
                )
        return s

    def eval(self, order: int, s):
        """``F``, ``F'``, ``F''`` or ``F'''`` at ``s`` for ``order`` 0..3."""
        if order not in (0, 1, 2, 3):
            raise ValueError(f"order must be 0..3, got {order}")
        s = self.check_domain(s, order)
        out = self.f1(s, order) + self.f2(s, order)
        return out if out.ndim else float(out)

    def __call__(self, s):
        return self.eval(0, s)

    def derivative(self, s):
        return self.eval(1, s)

    def second_derivative(self, s):
        return self.eval(2, s)

    def sample_domain(self, count: int = 2001) -> np.ndarray:
        """Symmetric sample of the domain used by coercivity checks; always contains 0."""
        edge = 0.999 * self.half_width if math.isfinite(self.half_width) else 2.0
        return np.linspace(-edge, edge, count)

    def to_dict(self) -> dict:
        return {"kind": self.kind}


class RegularQuartic(Potential):
    """``F(s) = (1 - s^2)^2 / 4`` split as ``s^4/4 + (1/4 - s^2/2)``."""

    kind = "regular_quartic"

    def f1(self, s, order=0):
        s = np.asarray(s, dtype=float)
        if order == 0:
            return s**4 / 4
        if order == 1:
            return s**3
        if order == 2:
            return 3 * s**2
        return 6 * s

    def f2(self, s, order=0):
        s = np.asarray(s, dtype=float)
        if order == 0:
            return 0.25 - s**2 / 2
        if order == 1:
            return -s
        if order == 2:
            return -np.ones_like(s)
        return np.zeros_like(s)


class Logarithmic(Potential):
    """Flory-Huggins potential with convex entropy part and concave quadratic part.

    ``F(s) = theta/2 [(1+s) log(1+s) + (1-s) log(1-s)] - theta0/2 s^2``, ``0 < theta < theta0``.
    """

    kind = "logarithmic"
    half_width = 1.0

    def __init__(self, theta: float = 0.3, theta0: float = 0.6):
        if not (0 < theta < theta0):
            raise AssumptionError("A3", f"F_sing condition 0 < theta < theta0 violated: theta={theta}, theta0={theta0}")
        self.theta = float(theta)
        self.theta0 = float(theta0)

    def f1(self, s, order=0):
        s = np.asarray(s, dtype=float)
        th = self.theta
        if order == 0:
            # xlogy keeps the endpoints s = +-1 finite
            return th / 2 * (xlogy(1 + s, 1 + s) + xlogy(1 - s, 1 - s))
        if order == 1:
            return th * np.arctanh(s)
        if order == 2:
            return th / (1 - s**2)
        return 2 * th * s / (1 - s**2) ** 2

    def f2(self, s, order=0):
        s = np.asarray(s, dtype=float)
        if order == 0:
            return -self.theta0 / 2 * s**2
        if order == 1:
            return -self.theta0 * s
        if order == 2:
            return np.full_like(s, -self.theta0)
        return np.zeros_like(s)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "theta": self.theta, "theta0": self.theta0}


def make_potential(kind: str, **params) -> Potential:
    if kind == "regular_quartic":
        return RegularQuartic()
    if kind == "logarithmic":
        return Logarithmic(**params)
    raise ValueError(f"unknown potential kind {kind!r}")


def _resolvent(potential: Potential, lam: float, s: float, tol: float = 1e-13, maxiter: int = 200) -> float:
    """Solve ``r + lam * F1'(r) = s`` by Newton's method safeguarded with bisection.

    ``F1'`` is nondecreasing with ``F1'(0) = 0``, so the root lies between 0 and
    ``s`` and inside the domain.
    """
    if s == 0.0:
        return 0.0
    lo, hi = (0.0, s) if s > 0 else (s, 0.0)
    l = potential.half_width
    if math.isfinite(l):
        lo, hi = max(lo, -l), min(hi, l)

    def g(r):
        if math.isfinite(l) and abs(r) >= l:
            return math.copysign(math.inf, r)
        return r + lam * float(potential.f1(r, 1)) - s

    r = 0.5 * (lo + hi)
    scale = max(1.0, abs(s))
    for _ in range(maxiter):
        res = g(r)
        if abs(res) <= tol * scale:
            return r
        if res > 0:
            hi = r
        else:
            lo = r
        with np.errstate(divide="ignore"):
            slope = 1.0 + lam * float(potential.f1(r, 2))
        # at the wall the Newton step is undefined; fall back to bisection
        cand = r - res / slope if math.isfinite(res) and math.isfinite(slope) else math.nan
        if not (lo < cand < hi):
            cand = 0.5 * (lo + hi)
        if cand == r:
            return r
        r = cand
    raise RuntimeError(f"Yosida resolvent did not converge at s={s}, lambda={lam}")


def yosida_prime(potential: Potential, lam: float, s):
    """Yosida approximation ``(s - r)/lam`` of ``F1'``; ``1/lam``-Lipschitz on all of R."""
    if not lam > 0:
        raise ValueError(f"Yosida parameter must be positive, got {lam}")
    arr = np.asarray(s, dtype=float)
    out = np.array([(x - _resolvent(potential, lam, float(x))) / lam for x in arr.ravel()])
    out = out.reshape(arr.shape)
    return out if out.ndim else float(out)


def moreau(potential: Potential, lam: float, s: float, tol: float = 1e-12) -> float:
    """Moreau envelope ``F1(0) + int_0^s F1_lam'(r) dr`` by adaptive quadrature."""
    if not lam > 0:
        raise ValueError(f"Yosida parameter must be positive, got {lam}")
    s = float(s)
    base = float(potential.f1(0.0, 0))
    if s == 0.0:
        return base
    val, err = integrate.quad(lambda r: yosida_prime(potential, lam, r), 0.0, s, epsabs=tol, epsrel=tol, limit=200)
    if not np.isfinite(val) or err > 1e3 * tol * max(1.0, abs(val)):
        raise RuntimeError(f"Moreau envelope quadrature failed at s={s} (error estimate {err:.2e})")
    return base + val
