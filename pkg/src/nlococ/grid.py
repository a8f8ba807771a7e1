"""Uniform cell-centred grids on rectangles with homogeneous Neumann operators.

Fields are plain ``numpy`` arrays of shape ``grid.shape`` holding one value per
cell (cell-centred finite volumes).  Space-time fields carry a leading time
axis, ``(steps + 1,) + grid.shape``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class GridSpec:
    """Tensor-product grid of ``cells[k]`` cells over ``(0, extent[k])``."""

    extent: tuple[float, ...]
    cells: tuple[int, ...]

    def __post_init__(self):
        extent = tuple(float(e) for e in np.atleast_1d(self.extent))
        cells = tuple(int(c) for c in np.atleast_1d(self.cells))
        object.__setattr__(self, "extent", extent)
        object.__setattr__(self, "cells", cells)
        if len(extent) not in (1, 2) or len(cells) != len(extent):
            raise ValueError(f"grid must be 1D or 2D with matching extent/cells, got {extent}, {cells}")
        if any(c < 2 for c in cells):
            raise ValueError(f"need at least 2 cells per axis, got {cells}")
        if any(not np.isfinite(e) or e <= 0 for e in extent):
            raise ValueError(f"extent must be positive, got {extent}")

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def size(self) -> int:
        return int(np.prod(self.cells))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(e / c for e, c in zip(self.extent, self.cells))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def measure(self) -> float:
        return float(np.prod(self.extent))

    def axes(self) -> list[np.ndarray]:
        """Cell-centre coordinates along each axis."""
        return [(np.arange(c) + 0.5) * h for c, h in zip(self.cells, self.spacing)]

    def coordinates(self) -> list[np.ndarray]:
        """Cell-centre coordinate arrays, each of shape ``self.shape``."""
        return np.meshgrid(*self.axes(), indexing="ij")

    def check(self, f: np.ndarray, name: str = "field") -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != self.shape:
            raise ValueError(f"{name} has shape {f.shape}, grid expects {self.shape}")
        return f

    def full(self, value: float) -> np.ndarray:
        return np.full(self.shape, float(value))


@dataclass(frozen=True)
class TimeGrid:
    horizon: float
    steps: int

    def __post_init__(self):
        if not np.isfinite(self.horizon) or self.horizon <= 0:
            raise ValueError(f"horizon T must be positive, got {self.horizon}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps}")
        object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.steps + 1)


def _laplacian_1d(n: int, h: float) -> sp.csr_matrix:
    main = np.full(n, -2.0)
    # mirrored ghost cell: the boundary face carries no flux
    main[0] = main[-1] = -1.0
    off = np.ones(n - 1)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr") / h**2


_LAPLACIANS: dict[GridSpec, sp.csr_matrix] = {}


def laplacian_matrix(grid: GridSpec) -> sp.csr_matrix:
    """Sparse Neumann Laplacian acting on C-ordered flattened fields.

    Symmetric with zero row and column sums, so it is self-adjoint for the
    cell inner product and annihilates constants.
    """
    L = _LAPLACIANS.get(grid)
    if L is None:
        blocks = [_laplacian_1d(n, h) for n, h in zip(grid.cells, grid.spacing)]
        if grid.dim == 1:
            L = blocks[0]
        else:
            Ix = sp.identity(grid.cells[0], format="csr")
            Iy = sp.identity(grid.cells[1], format="csr")
            L = (sp.kron(blocks[0], Iy) + sp.kron(Ix, blocks[1])).tocsr()
        _LAPLACIANS[grid] = L
    return L


def laplacian_neumann(grid: GridSpec, f: np.ndarray) -> np.ndarray:
    f = grid.check(f)
    return (laplacian_matrix(grid) @ f.ravel()).reshape(grid.shape)


def inner(grid: GridSpec, f: np.ndarray, g: np.ndarray) -> float:
    """Midpoint-rule approximation of the integral of ``f * g`` over the domain."""
    f = grid.check(f, "f")
    g = grid.check(g, "g")
    return float(np.sum(f * g) * grid.cell_volume)


def norm(grid: GridSpec, f: np.ndarray) -> float:
    return float(np.sqrt(inner(grid, f, f)))


def integrate(grid: GridSpec, f: np.ndarray) -> float:
    return float(np.sum(grid.check(f)) * grid.cell_volume)


def h1_seminorm_sq(grid: GridSpec, f: np.ndarray) -> float:
    """Discrete squared H1 seminorm from interior face differences.

    Boundary faces carry zero flux, which makes the result equal to
    ``-inner(laplacian(f), f)``.
    """
    f = grid.check(f)
    total = 0.0
    for axis, h in enumerate(grid.spacing):
        d = np.diff(f, axis=axis) / h
        total += float(np.sum(d * d))
    return total * grid.cell_volume


def spacetime_inner(grid: GridSpec, time: TimeGrid, f: np.ndarray, g: np.ndarray) -> float:
    """Weighted sum ``dt * vol * sum(f g)`` over every time node of two space-time fields."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    expected = (time.steps + 1,) + grid.shape
    if f.shape != expected or g.shape != expected:
        raise ValueError(f"space-time fields must have shape {expected}, got {f.shape} and {g.shape}")
    return float(np.sum(f * g) * grid.cell_volume * time.dt)
