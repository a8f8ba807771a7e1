"""Non-local convolution operator ``(J * f)(x) = int_Omega J(x - y) f(y) dy``.

The integral is restricted to the domain, so the discrete operator is a linear
(not circular) convolution of the cell values with kernel samples on the
difference lattice.  The fast path zero-pads to avoid wrap-around.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import fft, integrate

from .grid import GridSpec
from .model import AssumptionError, ModelParams
from .potentials import Potential

FAMILIES = ("gaussian", "constant", "truncated_newton", "mollifier")


def _bump_mass(dim: int) -> float:
    bump = lambda r: math.exp(-1.0 / (1.0 - r * r)) if r < 1 else 0.0
    if dim == 1:
        return 2 * integrate.quad(bump, 0, 1, epsabs=1e-14, epsrel=1e-14)[0]
    return 2 * math.pi * integrate.quad(lambda r: r * bump(r), 0, 1, epsabs=1e-14, epsrel=1e-14)[0]


@dataclass(frozen=True)
class KernelSpec:
    """Radial, even kernel family.

    ``gaussian``: ``scale * N(0, width^2 I)`` density.  ``constant``: ``J = value``.
    ``truncated_newton``: Newton potential of the Laplacian shifted by a constant
    so it is nonnegative on ``Omega - Omega``, clamped at ``|z| < delta``.
    ``mollifier``: unit-mass smooth bump of radius ``eps`` times ``scale``.
    """

    family: str = "gaussian"
    width: float = 0.1
    scale: float = 1.0
    value: float = 1.0
    delta: float = 0.05
    eps: float = 0.1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        for name in ("width", "scale", "value", "delta", "eps"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise AssumptionError("A2", f"kernel parameter {name} must be a positive real, got {v}")

    @property
    def radius(self) -> float:
        """Characteristic length compared against the grid spacing."""
        return {"gaussian": self.width, "mollifier": self.eps}.get(self.family, math.inf)

    def evaluate(self, z: np.ndarray, grid: GridSpec) -> np.ndarray:
        """Kernel values at displacement vectors ``z`` of shape ``(..., dim)``."""
        z = np.asarray(z, dtype=float)
        r = np.sqrt(np.sum(z * z, axis=-1))
        d = grid.dim
        if self.family == "gaussian":
            w = self.width
            return self.scale * np.exp(-(r * r) / (2 * w * w)) / (2 * math.pi * w * w) ** (d / 2)
        if self.family == "constant":
            return np.full(r.shape, self.value)
        if self.family == "truncated_newton":
            diam = math.hypot(*grid.extent)
            rc = np.maximum(r, self.delta)
            if d == 1:
                return (diam - rc) / 2
            return np.log(diam / rc) / (2 * math.pi)
        # mollifier
        rho = r / self.eps
        out = np.zeros_like(rho)
        inside = rho < 1
        out[inside] = np.exp(-1.0 / (1.0 - rho[inside] ** 2))
        return self.scale * out / (_bump_mass(d) * self.eps**d)

    def to_dict(self) -> dict:
        keep = {"gaussian": ("width", "scale"), "constant": ("value",), "truncated_newton": ("delta",), "mollifier": ("eps", "scale")}
        return {"family": self.family, **{k: getattr(self, k) for k in keep[self.family]}}


def _offsets(grid: GridSpec) -> np.ndarray:
    """Displacement vectors of the difference lattice, shape ``(2n-1, [2m-1,] dim)``."""
    ax = [np.arange(-(n - 1), n) * h for n, h in zip(grid.cells, grid.spacing)]
    mesh = np.meshgrid(*ax, indexing="ij")
    return np.stack(mesh, axis=-1)


def solver_threads() -> int | None:
    """Thread cap requested through ``NLOCOC_THREADS`` (``None`` when unset)."""
    val = os.environ.get("NLOCOC_THREADS")
    if not val:
        return None
    n = int(val)
    if n < 1:
        raise ValueError(f"NLOCOC_THREADS must be a positive integer, got {val!r}")
    return n


def _fast_conv(weights_hat, fshape, f: np.ndarray) -> np.ndarray:
    workers = solver_threads()
    f_hat = fft.rfftn(f, s=fshape, workers=workers)
    full = fft.irfftn(f_hat * weights_hat, s=fshape, workers=workers)
    sl = tuple(slice(n - 1, 2 * n - 1) for n in f.shape)
    return full[sl]


@dataclass(frozen=True, eq=False)
class KernelTable:
    spec: KernelSpec
    grid: GridSpec
    weights: np.ndarray
    a_field: np.ndarray
    a_star: float
    b_const: float
    admissible: bool
    _weights_hat: np.ndarray = field(repr=False)
    _fft_shape: tuple = field(repr=False)

    def convolve(self, f: np.ndarray) -> np.ndarray:
        f = self.grid.check(f)
        return _fast_conv(self._weights_hat, self._fft_shape, f)

    def convolve_direct(self, f: np.ndarray) -> np.ndarray:
        """O(n^2) double sum; reference path for the fast convolution."""
        f = self.grid.check(f)
        n = self.grid.shape
        out = np.zeros(n)
        if self.grid.dim == 1:
            for i in range(n[0]):
                out[i] = np.sum(self.weights[i : i + n[0]][::-1] * f)
            return out
        for i in range(n[0]):
            for j in range(n[1]):
                w = self.weights[i : i + n[0], j : j + n[1]][::-1, ::-1]
                out[i, j] = np.sum(w * f)
        return out

    def nonlocal_term(self, f: np.ndarray) -> np.ndarray:
        """``a f - J * f``."""
        return self.a_field * f - self.convolve(f)


def build_kernel_table(spec: KernelSpec, grid: GridSpec) -> KernelTable:
    """Sample ``J`` on the difference lattice and precompute ``a``, ``a*`` and ``b``."""
    hmax = max(grid.spacing)
    if spec.radius < hmax:
        raise ValueError(
            f"kernel too narrow: {spec.family} length {spec.radius} is below grid spacing {hmax}; refine the grid or widen the kernel"
        )
    z = _offsets(grid)
    vol = grid.cell_volume
    samples = spec.evaluate(z, grid)
    if not np.all(np.isfinite(samples)):
        raise ValueError(f"kernel {spec.family} produced nonfinite samples")
    weights = samples * vol

    fshape = tuple(fft.next_fast_len(3 * n - 2, real=True) for n in grid.shape)
    w_hat = fft.rfftn(weights, s=fshape)
    ones = np.ones(grid.shape)

    a_field = _fast_conv(w_hat, fshape, ones)
    abs_hat = fft.rfftn(np.abs(weights), s=fshape)
    a_star = float(np.max(_fast_conv(abs_hat, fshape, ones)))

    # |grad J| from central differences of J, one grid step per axis
    grad_sq = np.zeros(samples.shape)
    for k, h in enumerate(grid.spacing):
        e = np.zeros(grid.dim)
        e[k] = h
        d = (spec.evaluate(z + e, grid) - spec.evaluate(z - e, grid)) / (2 * h)
        grad_sq += d * d
    grad_hat = fft.rfftn(np.sqrt(grad_sq) * vol, s=fshape)
    b_const = float(np.max(_fast_conv(grad_hat, fshape, ones)))

    return KernelTable(
        spec=spec,
        grid=grid,
        weights=weights,
        a_field=a_field,
        a_star=a_star,
        b_const=b_const,
        # radial non-increasing families; recorded, not re-derived
        admissible=spec.family in ("gaussian", "truncated_newton", "mollifier", "constant"),
        _weights_hat=w_hat,
        _fft_shape=fshape,
    )


def convolve(table: KernelTable, f: np.ndarray) -> np.ndarray:
    return table.convolve(f)


@dataclass(frozen=True)
class CoercivityReport:
    c0: float
    chi_sq: float
    passes: bool
    min_F2: float
    min_a: float
    samples: str

    def __str__(self):
        verdict = "holds" if self.passes else "FAILS"
        return f"c0 = {self.c0:.6g}, chi^2 = {self.chi_sq:.6g}: c0 > chi^2 {verdict} ({self.samples})"


def check_coercivity(table: KernelTable, potential: Potential, params: ModelParams, count: int = 2001) -> CoercivityReport:
    """Lower bound ``c0 = A min F'' + B min a`` and the comparison ``c0 > chi^2``."""
    s = potential.sample_domain(count)
    if s.size == 0:
        raise ValueError("potential domain sample is empty")
    min_F2 = float(np.min(potential.eval(2, s)))
    min_a = float(np.min(table.a_field))
    c0 = params.A * min_F2 + params.B * min_a
    chi_sq = params.chi**2
    desc = f"{s.size} equispaced s in [{s[0]:.4g}, {s[-1]:.4g}]"
    return CoercivityReport(c0=c0, chi_sq=chi_sq, passes=bool(c0 > chi_sq), min_F2=min_F2, min_a=min_a, samples=desc)
