import numpy as np
import pytest

from nlococ import (
    ControlPair,
    GridSpec,
    KernelSpec,
    Logarithmic,
    ModelParams,
    Ramp,
    RegularQuartic,
    TimeGrid,
    TumourModel,
    build_kernel_table,
)

# coefficients shared by the small dynamic tests; B = 2 keeps c0 > chi^2 for theta = 0.3
PARAMS = ModelParams(A=1.0, B=2.0, tau=1.0, chi=0.1, P=Ramp(0.1, 1.0, 2.0), h=Ramp(0.2, 1.0, 2.0))


def make_model(potential="logarithmic", cells=16, params=PARAMS, kernel=None):
    grid = GridSpec((1.0, 1.0), (cells, cells))
    pot = Logarithmic() if potential == "logarithmic" else RegularQuartic()
    table = build_kernel_table(kernel or KernelSpec("gaussian", width=0.1), grid)
    return TumourModel(grid, params, table, pot)


def disc(grid, amplitude=0.8, radius=0.25, width=0.05):
    X, Y = grid.coordinates()
    r = np.hypot(X - 0.5, Y - 0.5)
    return amplitude * np.tanh((radius - r) / width)


class Problem:
    """A small forward problem with random admissible-looking controls."""

    def __init__(self, potential, cells=16, steps=10, horizon=0.1, seed=1):
        self.rng = np.random.default_rng(seed)
        self.model = make_model(potential, cells)
        self.grid = self.model.grid
        self.time = TimeGrid(horizon, steps)
        self.phi0 = disc(self.grid)
        self.sigma0 = np.full(self.grid.shape, 0.5)
        shape = (steps + 1,) + self.grid.shape
        self.controls = ControlPair(self.rng.uniform(0, 1, shape), self.rng.uniform(0, 1, shape))

    def simulate(self, controls=None):
        return self.model.simulate(self.phi0, self.sigma0, controls or self.controls, self.time)


@pytest.fixture(params=["logarithmic", "regular_quartic"])
def problem(request):
    return Problem(request.param)


@pytest.fixture
def log_problem():
    return Problem("logarithmic")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed after the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
