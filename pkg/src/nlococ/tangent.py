"""Linearised (tangent) system as the exact derivative of the discrete time step.

Writing one step as ``R(X^{n+1}, X^n, c^{n+1}) = 0``, the tangent solves
``A_n dX^{n+1} = -B_n dX^n - C_n dc^{n+1}`` with ``A_n = dR/dX^{n+1}``,
``B_n = dR/dX^n`` and ``C_n = dR/dc^{n+1}`` at the base trajectory.  The same
three operators, transposed, drive the adjoint sweep.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .controls import ControlPair
from .grid import GridSpec, TimeGrid
from .state import StateSnapshot, Trajectory, TumourModel


@dataclass
class LinearisedSnapshot:
    xi: np.ndarray
    eta: np.ndarray
    rho: np.ndarray

    def stack(self) -> np.ndarray:
        return np.concatenate([self.xi.ravel(), self.eta.ravel(), self.rho.ravel()])


@dataclass
class ControlPerturbation:
    h: np.ndarray
    k: np.ndarray

    @classmethod
    def random(cls, grid: GridSpec, time: TimeGrid, rng: np.random.Generator) -> "ControlPerturbation":
        shape = (time.steps + 1,) + grid.shape
        h, k = rng.uniform(-1, 1, shape), rng.uniform(-1, 1, shape)
        return cls(h, k)

    def as_controls(self) -> ControlPair:
        return ControlPair(self.h, self.k)


@dataclass
class TangentTrajectory:
    xi: np.ndarray
    eta: np.ndarray
    rho: np.ndarray

    def stacked(self, n: int) -> np.ndarray:
        return np.concatenate([self.xi[n].ravel(), self.eta[n].ravel(), self.rho[n].ravel()])


class StepLinearization:
    """The operators ``A_n``, ``B_n``, ``C_n`` of one step, evaluated on the base trajectory."""

    def __init__(self, model: TumourModel, old: StateSnapshot, new: StateSnapshot, u_new, dt: float, factorize: bool = True):
        p = model.params
        self.model = model
        self.dt = dt
        self.N = model.grid.size
        phi = old.phi.ravel()
        phi1, mu1, sig1 = new.phi.ravel(), new.mu.ravel(), new.sigma.ravel()
        u1 = model._flat(u_new)
        self.h = p.h(phi)
        react_arg = sig1 + p.chi * (1 - phi1) - mu1
        # diagonal of dR1/dphi^n (dR3/dphi^n shares the P' part with opposite sign)
        self.dP = dt * p.P.d1(phi) * react_arg
        self.d1 = -1.0 - self.dP + dt * p.h.d1(phi) * u1
        self.d2 = p.tau / dt - p.A * model.potential.f2(phi, 2)
        self.A = model.jacobian_new(new.stack(), old.phi, dt)
        self.lu = model.factorize(self.A) if factorize else None

    def apply_B(self, d_old: np.ndarray) -> np.ndarray:
        N, m = self.N, self.model
        xi, rho = d_old[:N], d_old[2 * N :]
        b1 = self.d1 * xi
        b2 = self.d2 * xi + m.params.B * m._conv(xi)
        b3 = self.dP * xi - rho
        return np.concatenate([b1, b2, b3])

    def apply_BT(self, lam: np.ndarray) -> np.ndarray:
        N, m = self.N, self.model
        l1, l2, l3 = lam[:N], lam[N : 2 * N], lam[2 * N :]
        xi = self.d1 * l1 + self.d2 * l2 + m.params.B * m._conv(l2) + self.dP * l3
        return np.concatenate([xi, np.zeros(N), -l3])

    def apply_C(self, h_new, k_new) -> np.ndarray:
        m = self.model
        return np.concatenate([self.dt * self.h * m._flat(h_new), np.zeros(self.N), -self.dt * m._flat(k_new)])

    def apply_CT(self, lam: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        N = self.N
        return self.dt * self.h * lam[:N], -self.dt * lam[2 * N :]


def linearize(model: TumourModel, traj: Trajectory, controls: ControlPair) -> list[StepLinearization]:
    dt = traj.time.dt
    return [
        StepLinearization(model, traj.snapshot(n), traj.snapshot(n + 1), controls.u[n + 1], dt)
        for n in range(traj.time.steps)
    ]


def tangent_step(
    model: TumourModel,
    lin_state: LinearisedSnapshot,
    old: StateSnapshot,
    new: StateSnapshot,
    u_new,
    h_new,
    k_new,
    dt: float,
    linearization: StepLinearization | None = None,
) -> LinearisedSnapshot:
    """Push a tangent state through one step of the discrete scheme."""
    lin = linearization or StepLinearization(model, old, new, u_new, dt)
    rhs = -lin.apply_B(lin_state.stack()) - lin.apply_C(h_new, k_new)
    x = lin.lu.solve(rhs)
    res = np.max(np.abs(lin.A @ x - rhs))
    if res > 1e-11 * max(1.0, np.max(np.abs(rhs))):
        raise ArithmeticError(f"tangent linear solve left residual {res:.2e}")
    xi, eta, rho = (a.reshape(model.grid.shape) for a in np.split(x, 3))
    return LinearisedSnapshot(xi, eta, rho)


def tangent_solve(
    model: TumourModel,
    traj: Trajectory,
    controls: ControlPair,
    perturbation: ControlPerturbation,
    linearizations: list[StepLinearization] | None = None,
) -> TangentTrajectory:
    """Directional derivative of the discrete control-to-state map; zero initial data."""
    lins = linearizations or linearize(model, traj, controls)
    shape = traj.phi.shape
    xi, eta, rho = np.zeros(shape), np.zeros(shape), np.zeros(shape)
    dt = traj.time.dt
    cur = LinearisedSnapshot(xi[0], eta[0], rho[0])
    for n, lin in enumerate(lins):
        cur = tangent_step(
            model, cur, traj.snapshot(n), traj.snapshot(n + 1), controls.u[n + 1],
            perturbation.h[n + 1], perturbation.k[n + 1], dt, lin,
        )
        xi[n + 1], eta[n + 1], rho[n + 1] = cur.xi, cur.eta, cur.rho
    return TangentTrajectory(xi, eta, rho)


def state_distance(grid: GridSpec, time: TimeGrid, a, b=None) -> float:
    """Discrete space-time L2 norm of the (phi, mu, sigma) difference ``a - b``."""
    fields = (a.phi, a.mu, a.sigma) if hasattr(a, "phi") else (a.xi, a.eta, a.rho)
    if b is not None:
        other = (b.phi, b.mu, b.sigma) if hasattr(b, "phi") else (b.xi, b.eta, b.rho)
        fields = tuple(f - g for f, g in zip(fields, other))
    total = sum(float(np.sum(f[1:] ** 2)) for f in fields)
    return float(np.sqrt(total * grid.cell_volume * time.dt))


@dataclass
class TaylorReport:
    eps: np.ndarray
    remainders: np.ndarray
    slopes: np.ndarray
    fitted_slope: float
    used: np.ndarray

    def __str__(self):
        lines = ["eps          remainder      local slope"]
        for i, (e, r) in enumerate(zip(self.eps, self.remainders)):
            s = f"{self.slopes[i - 1]:.4f}" if i else "-"
            lines.append(f"{e:<12.3e} {r:<14.6e} {s}")
        lines.append(f"fitted slope = {self.fitted_slope:.4f}")
        return "\n".join(lines)


def taylor_test(
    model: TumourModel,
    phi0,
    sigma0,
    controls: ControlPair,
    perturbation: ControlPerturbation,
    time: TimeGrid,
    eps=(1e-1, 1e-2, 1e-3, 1e-4),
    floor: float = 1e-14,
) -> TaylorReport:
    """Remainder ``||S(c + eps d) - S(c) - eps S'(c) d||`` over an eps ladder.

    The fitted log-log slope uses the points whose remainder sits above
    ``floor`` times the state norm (the round-off floor).
    """
    base = model.simulate(phi0, sigma0, controls, time)
    tan = tangent_solve(model, base, controls, perturbation)
    eps = np.asarray(eps, dtype=float)
    rem = np.empty(eps.size)
    g = model.grid
    for i, e in enumerate(eps):
        pert = ControlPair(controls.u + e * perturbation.h, controls.v + e * perturbation.k)
        traj = model.simulate(phi0, sigma0, pert, time)
        diff = [traj.phi - base.phi - e * tan.xi, traj.mu - base.mu - e * tan.eta, traj.sigma - base.sigma - e * tan.rho]
        rem[i] = np.sqrt(sum(float(np.sum(d[1:] ** 2)) for d in diff) * g.cell_volume * time.dt)
    slopes = np.diff(np.log(rem)) / np.diff(np.log(eps))
    used = rem > floor * max(1.0, state_distance(g, time, base))
    if used.sum() >= 2:
        fitted = float(np.polyfit(np.log(eps[used]), np.log(rem[used]), 1)[0])
    else:
        fitted = float("nan")
    return TaylorReport(eps=eps, remainders=rem, slopes=slopes, fitted_slope=fitted, used=used)
