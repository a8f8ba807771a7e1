"""Time integration of the viscous non-local Cahn-Hilliard / nutrient system.

One step from ``(phi, mu, sigma)^n`` to ``^{n+1}`` solves, with ``w = sigma + chi (1 - phi)``::

    (phi' - phi)/dt = m L mu' + P(phi) (w' - mu') - h(phi) u'
    mu' = tau (phi' - phi)/dt + A F1'(phi') + A F2'(phi) + B a phi' - B J*phi - chi sigma'
    (sigma' - sigma)/dt = n L (sigma' - chi phi') - P(phi) (w' - mu') + v'

``P(phi^n)``, ``h(phi^n)``, ``J*phi^n`` and ``F2'(phi^n)`` are lagged, everything
else is implicit.  The reaction term enters both balance equations with the
same lagged coefficient and opposite sign, so the discrete mass identity holds
to round-off.  The only nonlinearity is ``F1'(phi')``, handled by Newton.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .controls import ControlPair
from .grid import GridSpec, TimeGrid, h1_seminorm_sq, inner, integrate, laplacian_matrix
from .kernels import KernelTable
from .model import ModelParams
from .potentials import Potential, SeparationError

log = logging.getLogger(__name__)

DIRECT_SOLVE_MAX_CELLS = 64 * 64


class ConvergenceError(RuntimeError):
    """Newton iteration or a linear solve failed to reach its tolerance."""


@dataclass
class StateSnapshot:
    phi: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray

    def stack(self) -> np.ndarray:
        return np.concatenate([self.phi.ravel(), self.mu.ravel(), self.sigma.ravel()])

    @classmethod
    def unstack(cls, x: np.ndarray, shape: tuple) -> "StateSnapshot":
        phi, mu, sigma = np.split(np.asarray(x, dtype=float), 3)
        return cls(phi.reshape(shape), mu.reshape(shape), sigma.reshape(shape))

    def copy(self) -> "StateSnapshot":
        return StateSnapshot(self.phi.copy(), self.mu.copy(), self.sigma.copy())


@dataclass
class Trajectory:
    time: TimeGrid
    phi: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    monitors: dict = field(default_factory=dict)

    def __len__(self):
        return self.phi.shape[0]

    def snapshot(self, n: int) -> StateSnapshot:
        return StateSnapshot(self.phi[n], self.mu[n], self.sigma[n])

    def final(self) -> StateSnapshot:
        return self.snapshot(-1)


@dataclass(frozen=True)
class SeparationReport:
    max_abs_phi: float
    half_width: float
    margin: float
    breach: bool

    def __str__(self):
        if np.isinf(self.half_width):
            return f"max|phi| = {self.max_abs_phi:.6g} (regular potential, no separation bound)"
        flag = "BREACH" if self.breach else "separated"
        return f"max|phi| = {self.max_abs_phi:.6g}, margin to +-{self.half_width:g}: {self.margin:.3g} ({flag})"


class _Factorization:
    """Sparse LU for moderate systems, ILU-preconditioned GMRES above the direct limit."""

    def __init__(self, A: sp.spmatrix, direct: bool, tol: float = 1e-13):
        self.A = A.tocsc()
        self.direct = direct
        self.tol = tol
        if direct:
            self._lu = spla.splu(self.A)
        else:
            self._ilu = spla.spilu(self.A, drop_tol=1e-5, fill_factor=20)
            self._ilu_t = None

    def solve(self, b: np.ndarray, trans: bool = False) -> np.ndarray:
        if self.direct:
            return self._lu.solve(b, trans="T" if trans else "N")
        A = self.A.T.tocsc() if trans else self.A
        if trans and self._ilu_t is None:
            self._ilu_t = spla.spilu(A, drop_tol=1e-5, fill_factor=20)
        ilu = self._ilu_t if trans else self._ilu
        M = spla.LinearOperator(A.shape, ilu.solve)
        x, info = spla.gmres(A, b, M=M, rtol=self.tol, atol=0.0, restart=100, maxiter=50)
        if info != 0:
            raise ConvergenceError(f"GMRES did not converge (info={info})")
        return x


class TumourModel:
    """Discrete state system on a fixed grid with given coefficients, kernel and potential."""

    def __init__(
        self,
        grid: GridSpec,
        params: ModelParams,
        kernel: KernelTable,
        potential: Potential,
        newton_tol: float = 1e-11,
        newton_maxiter: int = 30,
    ):
        if kernel.grid != grid:
            raise ValueError("kernel table was built on a different grid")
        self.grid = grid
        self.params = params
        self.kernel = kernel
        self.potential = potential
        self.newton_tol = newton_tol
        self.newton_maxiter = newton_maxiter
        self.L = laplacian_matrix(grid)
        self.I = sp.identity(grid.size, format="csr")
        self.direct = grid.size <= DIRECT_SOLVE_MAX_CELLS

    # -- helpers ---------------------------------------------------------
    def _flat(self, f) -> np.ndarray:
        return np.broadcast_to(np.asarray(f, dtype=float), self.grid.shape).ravel()

    def _lap(self, f: np.ndarray) -> np.ndarray:
        return self.L @ f

    def _conv(self, f: np.ndarray) -> np.ndarray:
        return self.kernel.convolve(f.reshape(self.grid.shape)).ravel()

    # -- initial chemical potential -------------------------------------
    def initial_mu(self, phi0, sigma0, u0=0.0) -> np.ndarray:
        """Solve ``-tau m L mu + (1 + tau P(phi0)) mu = f`` with homogeneous Neumann data."""
        p = self.params
        phi0 = self.grid.check(phi0, "phi0").ravel()
        sigma0 = self.grid.check(sigma0, "sigma0").ravel()
        u0 = self._flat(u0)
        Pv = p.P(phi0)
        f = (
            p.tau * Pv * (sigma0 + p.chi * (1 - phi0))
            - p.tau * p.h(phi0) * u0
            + p.A * self.potential.eval(1, phi0)
            + p.B * self.kernel.a_field.ravel() * phi0
            - p.B * self._conv(phi0)
            - p.chi * sigma0
        )
        A = (-p.tau * p.m * self.L + sp.diags(1 + p.tau * Pv)).tocsc()
        mu = spla.spsolve(A, f) if self.direct else spla.cg(A, f, rtol=1e-14, atol=0.0, maxiter=5000)[0]
        res = np.max(np.abs(A @ mu - f))
        if res > 1e-10 * max(1.0, np.max(np.abs(f))):
            raise ConvergenceError(f"initial chemical potential solve left residual {res:.2e}")
        return mu.reshape(self.grid.shape)

    # -- one step ----------------------------------------------------------
    def residual(self, new: np.ndarray, old: StateSnapshot, u_new, v_new, dt: float, forcing=None) -> np.ndarray:
        p = self.params
        N = self.grid.size
        phi, sigma = old.phi.ravel(), old.sigma.ravel()
        phi1, mu1, sig1 = new[:N], new[N : 2 * N], new[2 * N :]
        Pv, hv = p.P(phi), p.h(phi)
        react = Pv * (sig1 + p.chi * (1 - phi1) - mu1)
        r1 = phi1 - phi - dt * p.m * self._lap(mu1) - dt * react + dt * hv * self._flat(u_new)
        r2 = (
            mu1
            - p.tau * (phi1 - phi) / dt
            - p.A * self.potential.f1(phi1, 1)
            - p.A * self.potential.f2(phi, 1)
            - p.B * self.kernel.a_field.ravel() * phi1
            + p.B * self._conv(phi)
            + p.chi * sig1
        )
        r3 = sig1 - sigma - dt * p.n * self._lap(sig1 - p.chi * phi1) + dt * react - dt * self._flat(v_new)
        if forcing is not None:
            s_phi, s_mu, s_sig = (self._flat(f) for f in forcing)
            r1 = r1 - dt * s_phi
            r2 = r2 - s_mu
            r3 = r3 - dt * s_sig
        return np.concatenate([r1, r2, r3])

    def jacobian_new(self, new: np.ndarray, old_phi: np.ndarray, dt: float) -> sp.csc_matrix:
        """Derivative of the step residual with respect to the new state."""
        p = self.params
        N = self.grid.size
        phi = old_phi.ravel()
        phi1 = new[:N]
        Pv = p.P(phi)
        D = sp.diags
        I, L = self.I, self.L
        blocks = [
            [I + D(dt * p.chi * Pv), -dt * p.m * L + D(dt * Pv), D(-dt * Pv)],
            [D(-p.tau / dt - p.A * self.potential.f1(phi1, 2) - p.B * self.kernel.a_field.ravel()), I, p.chi * I],
            [dt * p.n * p.chi * L - D(dt * p.chi * Pv), D(-dt * Pv), I - dt * p.n * L + D(dt * Pv)],
        ]
        return sp.bmat(blocks, format="csc")

    def factorize(self, A: sp.spmatrix) -> _Factorization:
        return _Factorization(A, self.direct)

    def step(self, state: StateSnapshot, u_new, v_new, dt: float, forcing=None) -> tuple[StateSnapshot, int]:
        """Advance one step; returns the new snapshot and the Newton iteration count."""
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        l = self.potential.half_width
        x = state.stack().copy()
        N = self.grid.size
        scale = 1.0
        for it in range(self.newton_maxiter + 1):
            res = self.residual(x, state, u_new, v_new, dt, forcing)
            rnorm = float(np.max(np.abs(res)))
            scale = max(1.0, float(np.max(np.abs(x))))
            if not np.isfinite(rnorm):
                raise ConvergenceError("nonfinite residual in Newton iteration")
            if rnorm <= self.newton_tol * scale:
                break
            if it == self.newton_maxiter:
                raise ConvergenceError(
                    f"Newton did not converge in {self.newton_maxiter} iterations (residual {rnorm:.3e}); try a smaller dt"
                )
            dx = self.factorize(self.jacobian_new(x, state.phi, dt)).solve(-res)
            alpha = 1.0
            if np.isfinite(l):
                # keep the iterate strictly inside the potential's domain
                while np.max(np.abs(x[:N] + alpha * dx[:N])) >= l:
                    alpha *= 0.5
                    if alpha < 1e-12:
                        raise SeparationError("Newton update cannot keep |phi| < l")
            x = x + alpha * dx
        # polishing step: quadratic convergence takes the residual to round-off,
        # which keeps finite-difference probes of the solution map smooth
        if rnorm > 1e-14 * scale:
            dx = self.factorize(self.jacobian_new(x, state.phi, dt)).solve(-res)
            x = x + dx
        log.debug("Newton converged in %d iterations (residual %.2e)", it, rnorm)
        new = StateSnapshot.unstack(x, self.grid.shape)
        if np.isfinite(l) and np.max(np.abs(new.phi)) >= l:
            raise SeparationError(f"separation lost: max|phi| = {np.max(np.abs(new.phi))!r}")
        return new, it

    # -- trajectories ---------------------------------------------------------
    def simulate(self, phi0, sigma0, controls: ControlPair | None, time: TimeGrid, forcing=None) -> Trajectory:
        """Run ``initial_mu`` and ``time.steps`` steps, recording monitors.

        ``forcing``, if given, maps ``t -> (s_phi, s_mu, s_sigma)`` added to the
        right-hand sides (used for manufactured solutions).
        """
        g = self.grid
        if controls is None:
            controls = ControlPair.zeros(g, time)
        controls.check(g, time)
        phi0 = g.check(phi0, "phi0")
        sigma0 = g.check(sigma0, "sigma0")
        if not (np.all(np.isfinite(phi0)) and np.all(np.isfinite(sigma0))):
            raise ValueError("initial data must be finite")
        mu0 = self.initial_mu(phi0, sigma0, controls.u[0])
        shape = (time.steps + 1,) + g.shape
        phi, mu, sigma = np.empty(shape), np.empty(shape), np.empty(shape)
        phi[0], mu[0], sigma[0] = phi0, mu0, sigma0
        iters = np.zeros(time.steps + 1, dtype=int)
        dt = time.dt
        state = StateSnapshot(phi0.copy(), mu0, sigma0.copy())
        for n in range(time.steps):
            t1 = (n + 1) * dt
            frc = forcing(t1) if forcing is not None else None
            state, iters[n + 1] = self.step(state, controls.u[n + 1], controls.v[n + 1], dt, frc)
            phi[n + 1], mu[n + 1], sigma[n + 1] = state.phi, state.mu, state.sigma
        traj = Trajectory(time, phi, mu, sigma)
        traj.monitors = self.monitors(traj, controls)
        traj.monitors["newton_iterations"] = iters
        return traj

    # -- monitors ---------------------------------------------------------------
    def mass(self, state: StateSnapshot) -> float:
        return integrate(self.grid, state.phi + state.sigma)

    def mass_source(self, phi_old, u_new, v_new) -> float:
        """``int (-h(phi^n) u^{n+1} + v^{n+1})``, the exact per-step mass change over ``dt``."""
        return integrate(self.grid, -self.params.h(phi_old) * u_new + v_new)

    def energy(self, state: StateSnapshot) -> float:
        """Ginzburg-Landau energy with non-local interaction and chemotactic coupling."""
        p = self.params
        phi, sigma = state.phi, state.sigma
        local = p.A * self.potential.eval(0, phi) + sigma**2 / 2 + p.chi * sigma * (1 - phi)
        return integrate(self.grid, local) + self.nonlocal_energy(phi)

    def nonlocal_energy(self, phi: np.ndarray) -> float:
        """``B/2 int (a phi^2 - (J*phi) phi)``."""
        p = self.params
        return p.B / 2 * inner(self.grid, self.kernel.a_field * phi - self.kernel.convolve(phi), phi)

    def monitors(self, traj: Trajectory, controls: ControlPair) -> dict:
        time = traj.time
        steps = time.steps
        mass = np.array([integrate(self.grid, traj.phi[n] + traj.sigma[n]) for n in range(steps + 1)])
        source = np.array(
            [0.0] + [self.mass_source(traj.phi[n], controls.u[n + 1], controls.v[n + 1]) for n in range(steps)]
        )
        mass_residual = np.diff(mass, prepend=mass[0]) - time.dt * source
        energy = np.array([self.energy(traj.snapshot(n)) for n in range(steps + 1)])
        max_abs_phi = np.max(np.abs(traj.phi.reshape(steps + 1, -1)), axis=1)
        return {
            "mass": mass,
            "mass_source": source,
            "mass_residual": mass_residual,
            "mass_ledger": mass - mass[0] - time.dt * np.cumsum(source),
            "energy": energy,
            "max_abs_phi": max_abs_phi,
        }

    def energy_residuals(self, traj: Trajectory, controls: ControlPair | None = None) -> np.ndarray:
        """Per-step residual of the discrete energy balance.

        ``(E^{n+1} - E^n)/dt + tau ||d_t phi||^2 + m |mu'|_1^2 + n |w'|_1^2
        + ||sqrt(P)(w' - mu')||^2 + (h u', mu') - (v', w')``; zero for the
        continuous system, O(dt) for the scheme.
        """
        p = self.params
        g = self.grid
        dt = traj.time.dt
        if controls is None:
            controls = ControlPair.zeros(g, traj.time)
        out = np.zeros(traj.time.steps)
        E = [self.energy(traj.snapshot(n)) for n in range(traj.time.steps + 1)]
        for n in range(traj.time.steps):
            phi0 = traj.phi[n]
            phi1, mu1, sig1 = traj.phi[n + 1], traj.mu[n + 1], traj.sigma[n + 1]
            w1 = sig1 + p.chi * (1 - phi1)
            phit = (phi1 - phi0) / dt
            diss = (
                p.tau * inner(g, phit, phit)
                + p.m * h1_seminorm_sq(g, mu1)
                + p.n * h1_seminorm_sq(g, w1)
                + inner(g, p.P(phi0) * (w1 - mu1), w1 - mu1)
            )
            work = inner(g, p.h(phi0) * controls.u[n + 1], mu1) - inner(g, controls.v[n + 1], w1)
            out[n] = (E[n + 1] - E[n]) / dt + diss + work
        return out

    def separation_report(self, traj: Trajectory) -> SeparationReport:
        return separation_report(traj, self.potential)


def separation_report(traj: Trajectory, potential: Potential) -> SeparationReport:
    mx = float(np.max(np.abs(traj.phi)))
    l = potential.half_width
    return SeparationReport(max_abs_phi=mx, half_width=l, margin=l - mx, breach=bool(mx >= l))
