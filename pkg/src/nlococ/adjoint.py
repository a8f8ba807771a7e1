"""Tracking cost, backward adjoint sweep and the reduced gradient.

The adjoint is the transpose of the discrete tangent: with step operators
``A_n, B_n, C_n`` (see :mod:`nlococ.tangent`), the multipliers satisfy
``A_{n-1}^T lam^n = dJ/dX^n - B_n^T lam^{n+1}`` backwards from ``n = N``.
Rescaled by the cell volume they are the discrete adjoint variables
``p = lam_phi/vol``, ``q = -lam_mu/(dt vol)``, ``r = lam_sigma/vol``; the
``mu`` row of the transposed system reproduces ``q = -m L p + P (p - r)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .controls import ControlPair
from .grid import GridSpec, TimeGrid
from .model import AssumptionError
from .state import Trajectory, TumourModel
from .tangent import StepLinearization, linearize

WEIGHT_NAMES = ("alpha_omega", "alpha_q", "beta_omega", "beta_q", "alpha_u", "beta_v")


@dataclass(frozen=True)
class CostWeights:
    alpha_omega: float = 0.0
    alpha_q: float = 0.0
    beta_omega: float = 0.0
    beta_q: float = 0.0
    alpha_u: float = 0.0
    beta_v: float = 0.0

    def __post_init__(self):
        vals = [getattr(self, n) for n in WEIGHT_NAMES]
        if any(not (np.isfinite(v) and v >= 0) for v in vals):
            raise AssumptionError("C1", f"cost weights must be nonnegative reals, got {dict(zip(WEIGHT_NAMES, vals))}")
        if all(v == 0 for v in vals):
            raise AssumptionError("C1", "cost weights must not all vanish")

    def scaled(self, s: float) -> "CostWeights":
        return CostWeights(*(s * getattr(self, n) for n in WEIGHT_NAMES))

    @property
    def tracking(self) -> bool:
        return any((self.alpha_omega, self.alpha_q, self.beta_omega, self.beta_q))


@dataclass
class TargetData:
    """Final-time targets and desired evolutions; scalars broadcast."""

    phi_omega: np.ndarray | float = 0.0
    sigma_omega: np.ndarray | float = 0.0
    phi_q: np.ndarray | float = 0.0
    sigma_q: np.ndarray | float = 0.0

    def resolved(self, grid: GridSpec, time: TimeGrid) -> "TargetData":
        st = (time.steps + 1,) + grid.shape
        try:
            return TargetData(
                np.broadcast_to(np.asarray(self.phi_omega, float), grid.shape),
                np.broadcast_to(np.asarray(self.sigma_omega, float), grid.shape),
                np.broadcast_to(np.asarray(self.phi_q, float), st),
                np.broadcast_to(np.asarray(self.sigma_q, float), st),
            )
        except ValueError as exc:
            raise ValueError(f"target shapes do not match grid {grid.shape} / space-time {st}") from exc


def cost(traj: Trajectory, controls: ControlPair, weights: CostWeights, targets: TargetData, grid: GridSpec) -> float:
    """Tracking-type cost with the right-endpoint rectangle rule in time (nodes 1..N).

    Node 0 of the controls does not drive any step, so it carries no cost.
    """
    time = traj.time
    t = targets.resolved(grid, time)
    if controls.u.shape != traj.phi.shape:
        raise ValueError(f"controls shape {controls.u.shape} does not match trajectory {traj.phi.shape}")
    vol, dt = grid.cell_volume, time.dt
    sq = lambda a: float(np.sum(a * a))
    J = weights.alpha_omega / 2 * vol * sq(traj.phi[-1] - t.phi_omega)
    J += weights.beta_omega / 2 * vol * sq(traj.sigma[-1] - t.sigma_omega)
    J += weights.alpha_q / 2 * vol * dt * sq(traj.phi[1:] - t.phi_q[1:])
    J += weights.beta_q / 2 * vol * dt * sq(traj.sigma[1:] - t.sigma_q[1:])
    J += weights.alpha_u / 2 * vol * dt * sq(controls.u[1:])
    J += weights.beta_v / 2 * vol * dt * sq(controls.v[1:])
    return J


def state_cost_gradient(traj: Trajectory, weights: CostWeights, targets: TargetData, grid: GridSpec) -> np.ndarray:
    """``dJ/dX^n`` stacked as ``(N+1, 3 * cells)``; row 0 is zero (initial data is fixed)."""
    time = traj.time
    t = targets.resolved(grid, time)
    vol, dt = grid.cell_volume, time.dt
    N = grid.size
    out = np.zeros((time.steps + 1, 3 * N))
    out[1:, :N] = (weights.alpha_q * vol * dt * (traj.phi[1:] - t.phi_q[1:])).reshape(time.steps, N)
    out[1:, 2 * N :] = (weights.beta_q * vol * dt * (traj.sigma[1:] - t.sigma_q[1:])).reshape(time.steps, N)
    out[-1, :N] += (weights.alpha_omega * vol * (traj.phi[-1] - t.phi_omega)).ravel()
    out[-1, 2 * N :] += (weights.beta_omega * vol * (traj.sigma[-1] - t.sigma_omega)).ravel()
    return out


@dataclass
class AdjointTrajectory:
    """Adjoint variables on time nodes 1..N (node 0 is unused and left at zero)."""

    p: np.ndarray
    q: np.ndarray
    r: np.ndarray
    multipliers: np.ndarray

    def evolved(self, tau: float) -> np.ndarray:
        """The backward-evolved combination ``p + tau q``."""
        return self.p + tau * self.q


def adjoint_sweep(
    model: TumourModel,
    traj: Trajectory,
    controls: ControlPair,
    seeds: np.ndarray,
    linearizations: list[StepLinearization] | None = None,
) -> np.ndarray:
    """Backward solve with sources ``seeds[n] = dJ/dX^n``; returns multipliers ``(N+1, 3 cells)``."""
    lins = linearizations or linearize(model, traj, controls)
    steps = traj.time.steps
    lam = np.zeros((steps + 1, 3 * model.grid.size))
    carry = np.zeros(3 * model.grid.size)
    for n in range(steps, 0, -1):
        lin = lins[n - 1]
        rhs = seeds[n] - carry
        x = lin.lu.solve(rhs, trans=True)
        res = np.max(np.abs(lin.A.T @ x - rhs))
        if res > 1e-11 * max(1.0, np.max(np.abs(rhs))):
            raise ArithmeticError(f"adjoint linear solve left residual {res:.2e} at step {n}")
        lam[n] = x
        carry = lin.apply_BT(x) if n > 1 else 0.0
    return lam


def adjoint_solve(
    model: TumourModel,
    traj: Trajectory,
    controls: ControlPair,
    weights: CostWeights,
    targets: TargetData,
    linearizations: list[StepLinearization] | None = None,
) -> AdjointTrajectory:
    g = model.grid
    seeds = state_cost_gradient(traj, weights, targets, g)
    lam = adjoint_sweep(model, traj, controls, seeds, linearizations)
    N, vol, dt = g.size, g.cell_volume, traj.time.dt
    shape = (traj.time.steps + 1,) + g.shape
    p = (lam[:, :N] / vol).reshape(shape)
    q = (-lam[:, N : 2 * N] / (dt * vol)).reshape(shape)
    r = (lam[:, 2 * N :] / vol).reshape(shape)
    return AdjointTrajectory(p=p, q=q, r=r, multipliers=lam)


def reduced_gradient(
    adj: AdjointTrajectory,
    traj: Trajectory,
    controls: ControlPair,
    weights: CostWeights,
    model: TumourModel,
) -> ControlPair:
    """``g_u = -h(phi) p + alpha_u u``, ``g_v = r + beta_v v`` on nodes 1..N, zero at node 0.

    ``h`` is evaluated at the lagged state ``phi^{n-1}``, matching the scheme.
    The fields represent the derivative of the discrete reduced cost in the
    control inner product ``dt * vol * sum``.
    """
    gu = weights.alpha_u * controls.u
    gv = weights.beta_v * controls.v
    gu[0] = gv[0] = 0.0
    gu[1:] -= model.params.h(traj.phi[:-1]) * adj.p[1:]
    gv[1:] += adj.r[1:]
    return ControlPair(gu, gv)


class ReducedCost:
    """Cost as a function of the controls alone, with adjoint gradients."""

    def __init__(self, model: TumourModel, phi0, sigma0, time: TimeGrid, weights: CostWeights, targets: TargetData):
        self.model = model
        self.phi0 = np.asarray(phi0, dtype=float)
        self.sigma0 = np.asarray(sigma0, dtype=float)
        self.time = time
        self.weights = weights
        self.targets = targets
        self.evaluations = 0

    def state(self, controls: ControlPair) -> Trajectory:
        return self.model.simulate(self.phi0, self.sigma0, controls, self.time)

    def value(self, controls: ControlPair, traj: Trajectory | None = None) -> float:
        traj = traj if traj is not None else self.state(controls)
        self.evaluations += 1
        return cost(traj, controls, self.weights, self.targets, self.model.grid)

    def gradient(self, controls: ControlPair, traj: Trajectory | None = None) -> tuple[float, ControlPair, Trajectory, AdjointTrajectory]:
        traj = traj if traj is not None else self.state(controls)
        J = self.value(controls, traj)
        adj = adjoint_solve(self.model, traj, controls, self.weights, self.targets)
        return J, reduced_gradient(adj, traj, controls, self.weights, self.model), traj, adj

    def inner(self, a: ControlPair, b: ControlPair) -> float:
        w = self.model.grid.cell_volume * self.time.dt
        return float(w * (np.sum(a.u * b.u) + np.sum(a.v * b.v)))
