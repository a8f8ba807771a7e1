"""Projected-gradient minimisation of the reduced cost over the admissible controls.

Projections use the control inner product ``dt * vol * sum`` in which the
reduced gradient is expressed.  ``V_ad`` is a box, so its projection is a
pointwise clamp.  ``U_ad`` is a box intersected with an ``H^1(0,T;L^2)`` ball;
its projection is computed with Dykstra's algorithm.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize as sopt

from .adjoint import ReducedCost
from .controls import ControlBounds, ControlPair, h1_time_norm
from .grid import GridSpec, TimeGrid
from .potentials import SeparationError
from .state import ConvergenceError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerConfig:
    max_iters: int = 200
    initial_step: float = 1.0
    shrink: float = 0.5
    sufficient_decrease: float = 1e-4
    stationarity_tol: float = 1e-6
    max_backtracks: int = 30
    barzilai_borwein: bool = True
    dykstra_max_sweeps: int = 5000
    dykstra_tol: float = 1e-12

    def __post_init__(self):
        if not 0 < self.shrink < 1:
            raise ValueError(f"shrink factor must lie in (0, 1), got {self.shrink}")
        if not 0 < self.sufficient_decrease < 1:
            raise ValueError(f"sufficient-decrease constant must lie in (0, 1), got {self.sufficient_decrease}")
        if not (self.stationarity_tol > 0 and self.dykstra_tol > 0 and self.initial_step > 0):
            raise ValueError("tolerances and the initial step must be positive")
        if self.max_iters < 0 or self.dykstra_max_sweeps < 1:
            raise ValueError("iteration limits must be positive")


def project_V(v: np.ndarray, v_min, v_max) -> np.ndarray:
    """Pointwise ``min(v_max, max(v, v_min))``."""
    v_min = np.asarray(v_min, dtype=float)
    v_max = np.asarray(v_max, dtype=float)
    if np.any(v_min > v_max):
        raise ValueError("inverted bounds: v_min > v_max somewhere")
    return np.minimum(v_max, np.maximum(np.asarray(v, dtype=float), v_min))


class H1Ball:
    """Projection onto ``{u : ||u||_{H^1(0,T;L^2)} <= M}`` in the ``dt * vol`` metric.

    The discrete norm is ``vol * sum_cells u_c^T G u_c`` with the time-only
    matrix ``G = dt I + D^T D / dt``.  Diagonalising ``G`` once reduces the
    projection to a scalar root find for the Lagrange multiplier.
    """

    def __init__(self, grid: GridSpec, time: TimeGrid, M: float):
        n = time.steps + 1
        D = np.diff(np.eye(n), axis=0)
        G = time.dt * np.eye(n) + D.T @ D / time.dt
        self.g, self.Q = np.linalg.eigh(G)
        self.grid, self.time, self.M = grid, time, float(M)

    def project(self, u: np.ndarray) -> np.ndarray:
        norm = h1_time_norm(u, self.grid, self.time)
        if norm <= self.M:
            return u.copy()
        vol, dt = self.grid.cell_volume, self.time.dt
        flat = u.reshape(u.shape[0], -1)
        coef = self.Q.T @ flat
        weight = np.sum(coef * coef, axis=1)

        def excess(lam):
            f = dt / (dt + lam * self.g)
            return np.sqrt(vol * np.sum(self.g * f * f * weight)) - self.M

        # on the sphere the two norm evaluations can disagree in the last ulp
        if excess(0.0) <= 0:
            return u.copy()
        hi = 2 * dt * np.sqrt(vol * np.sum(weight / self.g)) / self.M
        while excess(hi) > 0:
            hi *= 2
        lam = sopt.brentq(excess, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
        f = dt / (dt + lam * self.g)
        out = self.Q @ (f[:, None] * coef)
        return out.reshape(u.shape)


def project_U(u: np.ndarray, bounds: ControlBounds, grid: GridSpec, time: TimeGrid, config: OptimizerConfig | None = None) -> np.ndarray:
    """Dykstra projection onto box ``[u_min, u_max]`` intersected with the H1 ball of radius ``M``."""
    config = config or OptimizerConfig()
    u = np.asarray(u, dtype=float)
    ball = H1Ball(grid, time, bounds.M)
    box = lambda x: np.minimum(bounds.u_max, np.maximum(x, bounds.u_min))
    x = u.copy()
    p = np.zeros_like(u)
    q = np.zeros_like(u)
    scale = max(1.0, float(np.max(np.abs(u))))
    for sweep in range(config.dykstra_max_sweeps):
        y = box(x + p)
        p = x + p - y
        x_new = ball.project(y + q)
        q = y + q - x_new
        change = float(np.max(np.abs(x_new - x)))
        x = x_new
        if change <= config.dykstra_tol * scale and bounds.u_in_box(x, 1e-10 * scale):
            break
    else:
        if not (bounds.u_in_box(x, 1e-8) and bounds.u_in_ball(x, grid, time, 1e-8)):
            raise RuntimeError(
                f"Dykstra projection did not reach a feasible point in {config.dykstra_max_sweeps} sweeps; "
                "the box and the H1 ball may not intersect"
            )
    # tidy round-off against the box; the ball step already holds exactly
    x = box(x)
    if not bounds.u_in_ball(x, grid, time, 1e-8):
        raise RuntimeError("projection onto U_ad left the H1 ball; the box and the ball may not intersect")
    return x


def project_controls(c: ControlPair, bounds: ControlBounds, grid: GridSpec, time: TimeGrid, config: OptimizerConfig | None = None) -> ControlPair:
    return ControlPair(project_U(c.u, bounds, grid, time, config), project_V(c.v, bounds.v_min, bounds.v_max))


@dataclass
class OptimizeResult:
    controls: ControlPair
    history: list = field(default_factory=list)
    kkt_residual: float = np.inf
    converged: bool = False
    gradient: ControlPair | None = None
    cost: float = np.nan

    def costs(self) -> np.ndarray:
        return np.array([h["J"] for h in self.history])


def stationarity(rc: ReducedCost, c: ControlPair, g: ControlPair, bounds: ControlBounds, config: OptimizerConfig, s: float = 1.0) -> float:
    """``||c - Proj(c - s g)|| / s`` in the control norm; zero exactly at KKT points."""
    trial = project_controls(c - g.scaled(s), bounds, rc.model.grid, rc.time, config)
    d = c - trial
    return float(np.sqrt(rc.inner(d, d))) / s


def optimize(rc: ReducedCost, initial: ControlPair, bounds: ControlBounds, config: OptimizerConfig | None = None) -> OptimizeResult:
    """Projected gradient with Armijo backtracking along the projection arc.

    The first trial step of each line search is the Barzilai-Borwein step when
    enabled (safeguarded to ``[1e-8, 1e8]``), otherwise ``initial_step``.
    """
    config = config or OptimizerConfig()
    grid, time = rc.model.grid, rc.time
    c = project_controls(initial, bounds, grid, time, config)
    J, g, traj, _ = rc.gradient(c)
    result = OptimizeResult(controls=c)
    step = config.initial_step
    accepted = 0.0
    for it in range(config.max_iters + 1):
        stat = stationarity(rc, c, g, bounds, config)
        result.history.append({"iteration": it, "J": J, "stationarity": stat, "step": accepted})
        log.info("iteration=%d J=%.12e stationarity=%.3e step=%.3e", it, J, stat, accepted)
        if stat <= config.stationarity_tol:
            result.converged = True
            break
        if it == config.max_iters:
            break
        s = step
        for _ in range(config.max_backtracks):
            trial = project_controls(c - g.scaled(s), bounds, grid, time, config)
            d = trial - c
            try:
                J_trial = rc.value(trial)
            except (ConvergenceError, SeparationError) as exc:
                log.warning("forward solve failed at step %.3e (%s); shrinking", s, exc)
                s *= config.shrink
                continue
            if J_trial <= J - config.sufficient_decrease / s * rc.inner(d, d):
                break
            s *= config.shrink
        else:
            raise RuntimeError(f"line search failed after {config.max_backtracks} backtracks at iteration {it}")
        if J_trial > J:
            raise RuntimeError("accepted step increased the cost")
        accepted = s
        J_new, g_new, traj, _ = rc.gradient(trial)
        if config.barzilai_borwein:
            dg = g_new - g
            curv = rc.inner(d, dg)
            step = float(np.clip(rc.inner(d, d) / curv, 1e-8, 1e8)) if curv > 0 else config.initial_step
        c, g, J = trial, g_new, J_new
    result.controls = c
    result.gradient = g
    result.cost = J
    result.kkt_residual = result.history[-1]["stationarity"]
    return result


def random_feasible(bounds: ControlBounds, grid: GridSpec, time: TimeGrid, rng: np.random.Generator, config: OptimizerConfig | None = None) -> ControlPair:
    shape = (time.steps + 1,) + grid.shape
    u_lo, u_hi = np.broadcast_to(bounds.u_min, shape), np.broadcast_to(bounds.u_max, shape)
    v_lo, v_hi = np.broadcast_to(bounds.v_min, shape), np.broadcast_to(bounds.v_max, shape)
    u = u_lo + (u_hi - u_lo) * rng.uniform(0, 1, shape)
    v = v_lo + (v_hi - v_lo) * rng.uniform(0, 1, shape)
    return ControlPair(project_U(u, bounds, grid, time, config), v)


def variational_inequality_samples(
    rc: ReducedCost, optimum: ControlPair, gradient: ControlPair, bounds: ControlBounds, samples: int, rng: np.random.Generator
) -> np.ndarray:
    """``<g, c - c_opt>`` for random admissible ``c``; nonnegative at a KKT point."""
    grid, time = rc.model.grid, rc.time
    return np.array([rc.inner(gradient, random_feasible(bounds, grid, time, rng) - optimum) for _ in range(samples)])


@dataclass
class GradientCheckReport:
    eps: np.ndarray
    fd: np.ndarray
    adjoint: float
    rel_error: np.ndarray

    @property
    def best(self) -> float:
        return float(np.min(self.rel_error))

    def __str__(self):
        lines = [f"adjoint directional derivative = {self.adjoint:.15e}", "eps          central FD               rel. error"]
        lines += [f"{e:<12.3e} {f:<24.15e} {r:.3e}" for e, f, r in zip(self.eps, self.fd, self.rel_error)]
        return "\n".join(lines)


def fd_gradient_oracle(rc: ReducedCost, controls: ControlPair, direction: ControlPair, eps=(1e-2, 1e-3, 1e-4, 1e-5), gradient: ControlPair | None = None) -> GradientCheckReport:
    """Central differences of the reduced cost against the adjoint gradient along ``direction``."""
    if not (np.any(direction.u) or np.any(direction.v)):
        raise ValueError("direction must be nonzero")
    if not (np.all(np.isfinite(direction.u)) and np.all(np.isfinite(direction.v))):
        raise ValueError("direction must be finite")
    if gradient is None:
        _, gradient, _, _ = rc.gradient(controls)
    ad = rc.inner(gradient, direction)
    eps = np.asarray(eps, dtype=float)
    fd = np.array([(rc.value(controls + direction.scaled(e)) - rc.value(controls - direction.scaled(e))) / (2 * e) for e in eps])
    rel = np.abs(fd - ad) / max(abs(ad), np.finfo(float).tiny)
    return GradientCheckReport(eps=eps, fd=fd, adjoint=ad, rel_error=rel)
