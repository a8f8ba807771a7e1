"""Scenario files and field exports.

A scenario is a UTF-8 TOML document (extension ``.scn``) with the sections
``grid``, ``time``, ``model``, ``kernel``, ``potential``, ``initial``,
``controls``, ``weights``, ``targets``, ``bounds``, ``optimizer``, ``solver``
and ``checks``.  Fields (initial data, targets) are either analytic presets or
``raw64`` files.  Loading validates every component and reports all violated
assumptions at once, each tagged with its label.

Exports come in two formats:

``csv``
    header ``x[,y],value``, one row per cell in row-major order, 17 significant digits.
``raw64``
    32-byte header (magic ``NLOCOC01``, uint32 rank, three uint32 extents,
    uint64 value count), then little-endian float64 values in row-major order.
"""
from __future__ import annotations

import struct
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .adjoint import WEIGHT_NAMES, CostWeights, TargetData
from .controls import ControlBounds, ControlPair
from .grid import GridSpec, TimeGrid
from .kernels import KernelSpec, KernelTable, build_kernel_table, check_coercivity
from .model import AssumptionError, ModelParams, Ramp
from .optimize import OptimizerConfig
from .potentials import Potential, make_potential
from .state import Trajectory, TumourModel

MAGIC = b"NLOCOC01"
HEADER = struct.Struct("<8sI3IQ")
FORMATS = ("csv", "raw64")
SECTIONS = (
    "seed", "grid", "time", "model", "kernel", "potential", "initial", "controls",
    "weights", "targets", "bounds", "optimizer", "solver", "checks",
)


class ScenarioError(ValueError):
    """Unreadable scenario file (syntax, unknown keys, missing files)."""


class ScenarioValidationError(ValueError):
    """One or more assumptions violated; ``violations`` holds ``(label, message)`` pairs."""

    def __init__(self, violations: list[tuple[str, str]]):
        self.violations = violations
        super().__init__("; ".join(f"[{label}] {msg}" for label, msg in violations))


# -- field presets -------------------------------------------------------------

def field_from_spec(spec: Any, grid: GridSpec, base: Path | None = None, rng: np.random.Generator | None = None) -> np.ndarray:
    """Build a cell field from a number or a preset table.

    Presets: ``constant`` (value), ``disc`` (amplitude * tanh((radius - r)/width)
    around ``center``), ``cosine`` (mean + amplitude * prod cos(k pi x / L)),
    ``random`` (mean + amplitude * U(-1, 1), seeded) and ``file`` (raw64 path).
    """
    if isinstance(spec, (int, float)):
        return grid.full(float(spec))
    if not isinstance(spec, dict) or "preset" not in spec:
        raise ScenarioError(f"field must be a number or a table with a 'preset' key, got {spec!r}")
    spec = dict(spec)
    kind = spec.pop("preset")
    X = grid.coordinates()
    if kind == "constant":
        return grid.full(float(spec.get("value", 0.0)))
    if kind == "disc":
        center = spec.get("center", [e / 2 for e in grid.extent])
        r = np.sqrt(sum((x - c) ** 2 for x, c in zip(X, center)))
        return spec.get("amplitude", 0.9) * np.tanh((spec.get("radius", 0.25) - r) / spec.get("width", 0.05))
    if kind == "cosine":
        modes = spec.get("modes", [1] * grid.dim)
        out = np.ones(grid.shape)
        for x, k, L in zip(X, modes, grid.extent):
            out = out * np.cos(k * np.pi * x / L)
        return spec.get("mean", 0.0) + spec.get("amplitude", 1.0) * out
    if kind == "random":
        if rng is None:
            raise ScenarioError("random field preset needs a seeded generator")
        return spec.get("mean", 0.0) + spec.get("amplitude", 1.0) * rng.uniform(-1, 1, grid.shape)
    if kind == "file":
        path = Path(spec["path"])
        if base is not None and not path.is_absolute():
            path = base / path
        data = import_raw64(path)
        if data.shape != grid.shape:
            raise ScenarioError(f"{path}: field shape {data.shape} does not match grid {grid.shape}")
        return data
    raise ScenarioError(f"unknown field preset {kind!r}")


# -- scenario -------------------------------------------------------------------

@dataclass
class Scenario:
    grid: GridSpec
    time: TimeGrid
    params: ModelParams
    kernel: KernelSpec
    potential: Potential
    phi0: np.ndarray
    sigma0: np.ndarray
    controls: ControlPair
    weights: CostWeights | None
    targets: TargetData
    bounds: ControlBounds
    optimizer: OptimizerConfig
    seed: int = 0
    solver: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    source: Path | None = None

    def kernel_table(self) -> KernelTable:
        return build_kernel_table(self.kernel, self.grid)

    def model(self) -> TumourModel:
        return TumourModel(self.grid, self.params, self.kernel_table(), self.potential, **self.solver)

    def rng(self, seed: int | None = None) -> np.random.Generator:
        return np.random.default_rng(self.seed if seed is None else seed)


def _ramp(spec) -> Ramp:
    if isinstance(spec, (int, float)):
        return Ramp.constant(float(spec))
    return Ramp(**spec)


def _control_field(spec, grid: GridSpec, time: TimeGrid, base, rng) -> np.ndarray:
    f = field_from_spec(spec, grid, base, rng)
    return np.broadcast_to(f, (time.steps + 1,) + grid.shape).copy()


def parse_scenario(doc: dict, base: Path | None = None, seed: int | None = None) -> Scenario:
    """Build and validate a scenario from a parsed TOML document."""
    unknown = set(doc) - set(SECTIONS)
    if unknown:
        raise ScenarioError(f"unknown top-level keys {sorted(unknown)}; expected {list(SECTIONS)}")
    violations: list[tuple[str, str]] = []

    def attempt(label, build):
        try:
            return build()
        except AssumptionError as exc:
            violations.append((exc.label, exc.message))
        except ScenarioError:
            raise
        except TypeError as exc:
            raise ScenarioError(f"[{label}] {exc}") from exc
        except ValueError as exc:
            violations.append((label, str(exc)))
        return None

    seed = int(doc.get("seed", 0)) if seed is None else int(seed)
    rng = np.random.default_rng(seed)
    g = doc.get("grid", {})
    grid = attempt("grid", lambda: GridSpec(tuple(g.get("extent", [1.0, 1.0])), tuple(g.get("cells", [32, 32]))))
    t = doc.get("time", {})
    time = attempt("time", lambda: TimeGrid(float(t.get("horizon", 0.1)), int(t.get("steps", 20))))

    def build_params():
        m = dict(doc.get("model", {}))
        for key in ("P", "h"):
            if key in m:
                m[key] = _ramp(m[key])
        return ModelParams(**m)

    params = attempt("A1", build_params)
    kernel = attempt("A2", lambda: KernelSpec(**doc.get("kernel", {})))
    pot_doc = dict(doc.get("potential", {"kind": "logarithmic"}))
    potential = attempt("A3", lambda: make_potential(pot_doc.pop("kind", "logarithmic"), **pot_doc))

    table = None
    if grid is not None and kernel is not None:
        table = attempt("A2", lambda: build_kernel_table(kernel, grid))
    if table is not None and potential is not None and params is not None:
        report = check_coercivity(table, potential, params)
        if report.c0 <= 0:
            violations.append(("A4", f"A F'' + B a >= c0 > 0 fails: {report}"))
        elif not report.passes:
            violations.append(("B2", f"c0 > chi^2 fails: {report}"))

    phi0 = sigma0 = None
    controls = None
    targets = TargetData()
    ini = doc.get("initial", {})
    if grid is not None:
        phi0 = attempt("B5", lambda: field_from_spec(ini.get("phi", {"preset": "disc"}), grid, base, rng))
        sigma0 = attempt("B5", lambda: field_from_spec(ini.get("sigma", 1.0), grid, base, rng))
        if phi0 is not None and potential is not None:
            if not np.all(np.isfinite(phi0)):
                violations.append(("B5", "phi0 must be finite"))
            elif np.max(np.abs(phi0)) >= potential.half_width:
                violations.append(("B5", f"phi0 must be separated: max|phi0| = {np.max(np.abs(phi0)):.6g} >= l = {potential.half_width:g}"))
        if sigma0 is not None and not np.all(np.isfinite(sigma0)):
            violations.append(("B5", "sigma0 must be finite"))
        if time is not None:
            c = doc.get("controls", {})
            controls = attempt("controls", lambda: ControlPair(
                _control_field(c.get("u", 0.0), grid, time, base, rng), _control_field(c.get("v", 0.0), grid, time, base, rng)
            ).check(grid, time))
            tg = doc.get("targets", {})
            unknown_t = set(tg) - {"phi_omega", "sigma_omega", "phi_q", "sigma_q"}
            if unknown_t:
                raise ScenarioError(f"unknown target keys {sorted(unknown_t)}")

            def build_targets():
                spatial = {k: field_from_spec(v, grid, base, rng) for k, v in tg.items()}
                for k, v in spatial.items():
                    if not np.all(np.isfinite(v)):
                        raise AssumptionError("C2", f"target {k} must be finite")
                return TargetData(**spatial)

            targets = attempt("C2", build_targets) or TargetData()

    weights = None
    if "weights" in doc:
        w = doc["weights"]
        unknown_w = set(w) - set(WEIGHT_NAMES)
        if unknown_w:
            raise ScenarioError(f"unknown weight keys {sorted(unknown_w)}; expected {list(WEIGHT_NAMES)}")
        weights = attempt("C1", lambda: CostWeights(**w))
    bounds = attempt("C3", lambda: ControlBounds(**doc.get("bounds", {})))
    optimizer = attempt("optimizer", lambda: OptimizerConfig(**doc.get("optimizer", {})))
    solver = dict(doc.get("solver", {}))
    unknown_s = set(solver) - {"newton_tol", "newton_maxiter"}
    if unknown_s:
        raise ScenarioError(f"unknown solver keys {sorted(unknown_s)}")
    if violations:
        raise ScenarioValidationError(violations)
    return Scenario(
        grid=grid, time=time, params=params, kernel=kernel, potential=potential, phi0=phi0, sigma0=sigma0,
        controls=controls, weights=weights, targets=targets, bounds=bounds, optimizer=optimizer, seed=seed,
        solver=solver, checks=dict(doc.get("checks", {})),
    )


def load_scenario(path, seed: int | None = None) -> Scenario:
    """Parse and validate a ``.scn`` file; ``seed`` overrides the file's seed."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc.strerror or exc}") from exc
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        msg = str(exc)
        if "line" not in msg:
            # errors at end of input carry no position; point at the last character
            lines = text.split("\n")
            msg += f" (line {len(lines)}, column {len(lines[-1]) + 1})"
        raise ScenarioError(f"{path}: parse error: {msg}") from exc
    scn = parse_scenario(doc, base=path.parent, seed=seed)
    scn.source = path
    return scn


def shipped_scenario(name: str) -> Path:
    """Path of a scenario bundled with the package (``default`` or ``fixedpoint``)."""
    path = Path(__file__).parent / "scenarios" / f"{name}.scn"
    if not path.exists():
        raise FileNotFoundError(f"no shipped scenario named {name!r}")
    return path


# -- exports ----------------------------------------------------------------------

def _check_format(fmt: str) -> None:
    if fmt not in FORMATS:
        raise ValueError(f"unknown export format {fmt!r}; expected one of {FORMATS}")


def export_raw64(data: np.ndarray, path) -> Path:
    data = np.ascontiguousarray(data, dtype="<f8")
    if not 1 <= data.ndim <= 3:
        raise ValueError(f"raw64 stores arrays of rank 1..3, got rank {data.ndim}")
    if not np.all(np.isfinite(data)):
        raise ValueError("refusing to export nonfinite data")
    extents = list(data.shape) + [0] * (3 - data.ndim)
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, data.ndim, *extents, data.size))
        fh.write(data.tobytes(order="C"))
    return path


def import_raw64(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise ValueError(f"{path}: file shorter than the raw64 header")
    magic, rank, e0, e1, e2, count = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if not 1 <= rank <= 3:
        raise ValueError(f"{path}: unsupported rank {rank}")
    shape = (e0, e1, e2)[:rank]
    if int(np.prod(shape)) != count or len(raw) != HEADER.size + 8 * count:
        raise ValueError(f"{path}: header counts do not match payload")
    return np.frombuffer(raw, dtype="<f8", offset=HEADER.size).reshape(shape).copy()


def export_field(values: np.ndarray, grid: GridSpec, path, fmt: str = "csv") -> Path:
    """Write one cell field."""
    _check_format(fmt)
    values = grid.check(np.asarray(values, dtype=float))
    if not np.all(np.isfinite(values)):
        raise ValueError("refusing to export nonfinite data")
    if fmt == "raw64":
        return export_raw64(values, path)
    coords = [c.ravel() for c in grid.coordinates()]
    names = ["x", "y"][: grid.dim]
    table = np.column_stack(coords + [values.ravel()])
    path = Path(path)
    np.savetxt(path, table, delimiter=",", fmt="%.17g", header=",".join(names + ["value"]), comments="")
    return path


def export_trajectory(traj: Trajectory, grid: GridSpec, directory, fmt: str = "raw64") -> list[Path]:
    """Write ``phi``, ``mu``, ``sigma`` for all ``steps + 1`` snapshots.

    ``raw64`` gives one file per field with the time index leading; ``csv``
    gives one file per field and snapshot (``phi_0003.csv``).
    """
    _check_format(fmt)
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for name in ("phi", "mu", "sigma"):
        data = getattr(traj, name)
        if fmt == "raw64":
            out.append(export_raw64(data, directory / f"{name}.raw64"))
        else:
            out += [export_field(data[n], grid, directory / f"{name}_{n:04d}.csv") for n in range(data.shape[0])]
    return out


def export_table(columns: dict, path) -> Path:
    """Write equal-length 1D columns as CSV with a header row."""
    names = list(columns)
    table = np.column_stack([np.asarray(columns[k], dtype=float) for k in names])
    path = Path(path)
    np.savetxt(path, table, delimiter=",", fmt="%.17g", header=",".join(names), comments="")
    return path
