"""Scenario configs, runs, error norms and convergence studies.

A scenario names a registered *problem* (model, domain, initial data, boundary
kinds and, where known, the exact solution) and may override any of its
numerical settings. Configs are YAML or JSON mappings; see ``README.md`` for the
schema.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np
import yaml

from . import __version__
from .boundary1d import (
    LINEAR_WEIGHTS,
    WENO_WEIGHTS,
    dirichlet_component,
    free_outflow,
    make_boundary,
    outflow_copy,
    periodic,
)
from .boundary2d import build_boundaries_2d, check_periodic_faces
from .discretization import CHARACTERISTIC, COMPONENTWISE
from .errors import ConfigError
from .extrapolation import DEFAULT_EPSILON
from .grid import Grid1D, Grid2D, build_grid_1d, build_grid_2d
from .models import Model, model_from_config
from .stepper import DEFAULT_ALPHA_MARGIN, Solver
from .tableau import tableau_from_config

log = logging.getLogger(__name__)

OUTPUT_ENV = "IMEXILW_OUTPUT_DIR"


# {{{ problems


@dataclass(frozen=True)
class Problem:
    """Everything about a test case that is not a numerical setting.

    ``initial(model, coords)`` returns the conserved field on the extended grid;
    ``exact(x, t)`` and ``exact_t(x, t)`` (1D) or ``exact(X, Y, t)`` (2D) give
    the analytic solution where one exists.
    """

    name: str
    ndim: int
    model: str
    domain: tuple[float, ...]
    boundaries: dict
    t_end: float
    description: str = ""
    model_params: dict = field(default_factory=dict)
    initial: Callable | None = None
    exact: Callable | None = None
    exact_t: Callable | None = None
    error_component: int = 0
    obstacles: tuple = ()
    periodic: tuple[bool, bool] = (False, False)
    defaults: dict = field(default_factory=dict)


def _exp_tx(x, t):
    return np.exp(t + x)


def _relaxation_exact(layer: bool, eps: float):
    def exact(x, t):
        u = np.exp(t + x)
        if layer:
            u = u + np.exp(-np.maximum(x, 0.0) / eps)
        return np.stack([u, -np.exp(t + x)])

    def exact_t(x, t):
        w = np.exp(t + x)
        return np.stack([w, -w])

    return exact, exact_t


def _example4_exact(model, X, Y, t):
    rho = 1.0 + 0.3 * np.sin(2.0 * np.pi * (X + Y - t))
    one = np.ones_like(X)
    return model.conserved(rho, one, 0.0 * X, one, 0.0 * X)


def _blast(model, X, Y):
    inside = X * X + Y * Y <= 0.36
    return model.conserved(
        np.ones_like(X), 0.0 * X, 0.0 * X, np.where(inside, 80.0, 10.0), np.where(inside, 0.2, 0.8)
    )


DIFFRACTION_INFLOW = (11.0, 6.18, 0.0, 970.0, 1.0)
DIFFRACTION_AMBIENT = (5.0, 0.0, 0.0, 400.0, 1.0)


def _diffraction(model, X, Y):
    left = (X < 0.5)[None]
    Uin = model.from_rho_u_v_E_Y(*DIFFRACTION_INFLOW).reshape(5, 1, 1)
    Uamb = model.from_rho_u_v_E_Y(*DIFFRACTION_AMBIENT).reshape(5, 1, 1)
    return np.where(left, Uin, Uamb) + 0.0 * X


_FINE_1D = ["1/20", "1/40", "1/80", "1/160", "1/320"]

PROBLEMS: dict[str, Problem] = {
    "example1": Problem(
        "example1",
        1,
        "burgers_source",
        (0.0, 1.0),
        {"left": {"dirichlet": 0}, "right": "outflow"},
        1.0,
        "u_t + u u_x = u^2 + u, u = exp(t + x)",
        exact=lambda x, t, **_: _exp_tx(x, t)[None],
        exact_t=lambda x, t, **_: _exp_tx(x, t)[None],
        # a margin above 1 keeps the critical point of the negative flux off the grid
        defaults={"alpha_margin": 1.1, "refinements": _FINE_1D},
    ),
    "example2": Problem(
        "example2",
        1,
        "linear_relax",
        (0.0, 1.0),
        {"left": {"dirichlet": 0}, "right": {"dirichlet": 1}},
        1.0,
        "linear relaxation system, smooth or boundary-layer solution",
        model_params={"eps": 1.0},
        defaults={"refinements": _FINE_1D, "solution": "smooth"},
    ),
    "example3": Problem(
        "example3",
        1,
        "nonlinear_relax",
        (0.0, 1.0),
        {"left": {"dirichlet": 0}, "right": {"dirichlet": 1}},
        1.0,
        "nonlinear relaxation system, smooth or boundary-layer solution",
        model_params={"eps": 1.0},
        defaults={"refinements": _FINE_1D, "solution": "smooth"},
    ),
    "example4": Problem(
        "example4",
        2,
        "reactive_euler",
        (0.0, 1.0, 0.0, 1.0),
        {"left": "periodic", "right": "periodic", "bottom": "wall", "top": "wall"},
        0.1,
        "density wave between two walls, periodic in x",
        initial=lambda m, X, Y: _example4_exact(m, X, Y, 0.0),
        exact=lambda m, X, Y, t: _example4_exact(m, X, Y, t),
        periodic=(True, False),
        defaults={"refinements": ["1/20", "1/40", "1/80", "1/160"], "dx": "1/20"},
    ),
    "example5": Problem(
        "example5",
        2,
        "reactive_euler",
        (0.0, 2.0, 0.0, 2.0),
        {"left": "wall", "bottom": "wall", "right": "outflow_copy", "top": "outflow_copy"},
        0.16,
        "quarter blast wave, walls on the left and bottom",
        initial=_blast,
        defaults={"dx": "1/40", "weights": WENO_WEIGHTS},
    ),
    "example6": Problem(
        "example6",
        2,
        "reactive_euler",
        (0.0, 5.0, 0.0, 5.0),
        {"default": "wall", "left": {"inflow_state": list(DIFFRACTION_INFLOW)}},
        0.6,
        "detonation diffraction around a step",
        initial=_diffraction,
        obstacles=((0.0, 1.0, 0.0, 2.0),),
        defaults={"dx": "1/20", "weights": WENO_WEIGHTS},
    ),
    "example7": Problem(
        "example7",
        2,
        "reactive_euler",
        (0.0, 10.0, 0.0, 10.0),
        {"default": "wall"},
        2.0,
        "blast wave in a domain with two rectangular obstacles",
        initial=_blast,
        obstacles=((1.0, 3.0, 0.0, 3.0), (5.0, 10.0, 0.0, 5.0)),
        defaults={"dx": "1/20", "weights": WENO_WEIGHTS},
    ),
}

SOLUTIONS = ("smooth", "layer")

# }}}


# {{{ config


def parse_spacing(value) -> float:
    """``0.05``, ``"1/20"`` or ``"0.05"`` to a float."""
    if isinstance(value, str):
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"cannot read grid spacing {value!r}") from None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"cannot read grid spacing {value!r}")
    return float(value)


def _spacing_label(dx: float) -> str:
    inv = 1.0 / dx
    return f"1/{round(inv)}" if abs(inv - round(inv)) < 1e-9 else f"{dx:.6g}"


@dataclass
class ScenarioConfig:
    """Resolved settings of one scenario; unset fields take the problem defaults."""

    problem: str
    model_params: dict = field(default_factory=dict)
    dx: float | None = None
    N: int | None = None
    refinements: list[float] = field(default_factory=list)
    eta: float | dict = 0.5
    boundaries: dict = field(default_factory=dict)
    solution: str = "smooth"
    t_end: float | None = None
    cfl: float = 0.8
    tableau: str = "ars443"
    weights: str = LINEAR_WEIGHTS
    alpha_margin: float = DEFAULT_ALPHA_MARGIN
    weno_eps: float = DEFAULT_EPSILON
    splitting: str | None = None
    exclusion: int | None = None
    exclusion_side: str = "left"
    max_steps: int | None = None
    output_dir: str | None = None
    debug: bool = False

    @property
    def spec(self) -> Problem:
        return PROBLEMS[self.problem]

    def to_dict(self) -> dict:
        return asdict(self)


def load_config_file(path: str | Path) -> dict:
    """Read a YAML or JSON mapping (YAML is a superset, so one loader serves both)."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {p}: {exc}") from None
    if not isinstance(data, Mapping):
        raise ConfigError(f"config {p} must be a mapping")
    return dict(data)


def resolve_config(raw: Mapping[str, Any]) -> ScenarioConfig:
    """Validate a raw mapping and fill problem defaults."""
    raw = dict(raw)
    name = raw.pop("problem", None) or raw.pop("scenario", None)
    ext = raw.pop("extrapolation", None)
    if ext is not None:
        if not isinstance(ext, Mapping) or set(ext) - {"epsilon", "weights"}:
            raise ConfigError("extrapolation takes a mapping with 'epsilon' and/or 'weights'")
        if "epsilon" in ext:
            raw["weno_eps"] = float(ext["epsilon"])
        if "weights" in ext:
            raw["weights"] = ext["weights"]
    if name not in PROBLEMS:
        raise ConfigError(f"unknown problem {name!r}; known: {sorted(PROBLEMS)}")
    prob = PROBLEMS[name]
    known = {f.name for f in fields(ScenarioConfig)} - {"problem"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    merged = {**prob.defaults, **raw}
    cfg = ScenarioConfig(problem=name)
    for key, value in merged.items():
        setattr(cfg, key, value)
    cfg.model_params = {**prob.model_params, **(raw.get("model_params") or {})}
    cfg.boundaries = {**prob.boundaries, **(raw.get("boundaries") or {})}
    if cfg.dx is not None:
        cfg.dx = parse_spacing(cfg.dx)
    cfg.refinements = [parse_spacing(v) for v in (cfg.refinements or [])]
    if any(b >= a for a, b in zip(cfg.refinements, cfg.refinements[1:])):
        raise ConfigError("refinement list must have strictly decreasing spacings")
    if cfg.dx is None and cfg.N is None:
        if not cfg.refinements:
            raise ConfigError("config needs dx, N or a refinement list")
        cfg.dx = cfg.refinements[0]
    if cfg.solution not in SOLUTIONS:
        raise ConfigError(f"solution must be one of {SOLUTIONS}, got {cfg.solution!r}")
    if cfg.weights not in (LINEAR_WEIGHTS, WENO_WEIGHTS):
        raise ConfigError(f"weights must be {LINEAR_WEIGHTS!r} or {WENO_WEIGHTS!r}")
    if cfg.splitting not in (None, COMPONENTWISE, CHARACTERISTIC):
        raise ConfigError(f"splitting must be {COMPONENTWISE!r} or {CHARACTERISTIC!r}")
    if not cfg.weno_eps > 0.0:
        raise ConfigError("extrapolation epsilon must be positive")
    if not cfg.cfl > 0.0:
        raise ConfigError(f"cfl must be positive, got {cfg.cfl}")
    if cfg.t_end is None:
        cfg.t_end = prob.t_end
    if not cfg.t_end > 0.0:
        raise ConfigError(f"t_end must be positive, got {cfg.t_end}")
    if cfg.exclusion is None:
        cfg.exclusion = 3 if cfg.solution == "layer" else 0
    if cfg.exclusion_side not in ("left", "right"):
        raise ConfigError("exclusion_side must be 'left' or 'right'")
    if cfg.output_dir is None:
        cfg.output_dir = os.environ.get(OUTPUT_ENV)
    tableau_from_config(cfg.tableau)
    return cfg


def scenario(name: str, **overrides) -> ScenarioConfig:
    return resolve_config({"problem": name, **overrides})


# }}}


# {{{ setup


@dataclass
class Setup:
    model: Model
    grid: Grid1D | Grid2D
    solver: Solver
    U0: np.ndarray
    exact: Callable | None


def _eta_pair(eta) -> tuple[float, float]:
    if isinstance(eta, Mapping):
        return float(eta.get("left", 0.5)), float(eta.get("right", 0.5))
    return float(eta), float(eta)


def _nodes_1d(a: float, b: float, dx: float, el: float, er: float) -> int:
    n = (b - a) / dx - el - er + 1.0
    N = round(n)
    if abs(n - N) > 1e-6:
        raise ConfigError(f"dx = {dx} does not fit [{a}, {b}] with eta = ({el}, {er})")
    return int(N)


def _boundary_1d(kind, side: str, cfg: ScenarioConfig, model, grid, exact, exact_t):
    direction = 1.0 if side == "left" else -1.0
    xb = grid.a if side == "left" else grid.b
    st = grid.side_stations(side)
    if isinstance(kind, Mapping) and "dirichlet" in kind:
        k = int(kind["dirichlet"])
        if exact is None:
            raise ConfigError("dirichlet data come from the exact solution, which is missing")
        rel = dirichlet_component(
            k,
            lambda t: float(exact(np.float64(xb), t)[k]),
            lambda t: float(exact_t(np.float64(xb), t)[k]),
            model.m,
        )
    elif kind == "outflow":
        rel = free_outflow()
    elif kind == "outflow_copy":
        rel = outflow_copy()
    elif kind == "periodic":
        rel = periodic()
    else:
        raise ConfigError(f"unknown 1D boundary kind {kind!r} on the {side}")
    return make_boundary(
        model, rel, st, grid.dx, direction, eps=cfg.weno_eps, weights=cfg.weights
    )


def build_setup(cfg: ScenarioConfig, dx: float | None = None) -> Setup:
    prob = cfg.spec
    model = model_from_config(prob.model, cfg.model_params)
    tab = tableau_from_config(cfg.tableau)
    dx = cfg.dx if dx is None else dx
    if prob.ndim == 1:
        a, b = prob.domain
        el, er = _eta_pair(cfg.eta)
        kinds = cfg.boundaries
        per = kinds.get("left") == "periodic"
        if per != (kinds.get("right") == "periodic"):
            raise ConfigError("periodic must be set on both sides")
        N = cfg.N if dx is None else _nodes_1d(a, b, dx, el, er)
        grid = build_grid_1d(a, b, N, el, er, per)
        exact = exact_t = None
        if prob.exact is not None:
            exact, exact_t = prob.exact, prob.exact_t
        elif prob.name in ("example2", "example3"):
            exact, exact_t = _relaxation_exact(cfg.solution == "layer", model.eps)
        bnd = [
            _boundary_1d(kinds[s], s, cfg, model, grid, exact, exact_t)
            for s in ("left", "right")
        ]
        U0 = exact(grid.x_ext, 0.0) if prob.initial is None else prob.initial(model, grid.x_ext)
    else:
        if dx is None:
            raise ConfigError("2D scenarios need dx")
        eta = cfg.eta
        if isinstance(eta, Mapping):
            raise ConfigError("2D grids take a single eta")
        grid = build_grid_2d(prob.domain, prob.obstacles, dx, float(eta), prob.periodic)
        if not np.any(grid.interior):
            raise ConfigError("geometry has no interior nodes")
        kinds = cfg.boundaries
        check_periodic_faces(grid, kinds)
        conv = model.from_rho_u_v_E_Y if hasattr(model, "from_rho_u_v_E_Y") else None
        bnd = build_boundaries_2d(
            grid,
            model,
            kinds,
            eps=cfg.weno_eps,
            weights=cfg.weights,
            inflow_conserved=(lambda s: conv(*s)) if conv else None,
        )
        X, Y = grid.coords
        U0 = prob.initial(model, X, Y)
        exact = None if prob.exact is None else (lambda X, Y, t: prob.exact(model, X, Y, t))
    U0 = np.array(U0, dtype=float)
    solver = Solver(
        model,
        grid,
        tab,
        bnd,
        mode=cfg.splitting,
        cfl=cfg.cfl,
        debug=cfg.debug,
        alpha_margin=cfg.alpha_margin,
    )
    return Setup(model, grid, solver, U0, exact)


# }}}


# {{{ norms


def error_norms(
    error: np.ndarray, dx: float, ndim: int = 1, exclusion: int = 0, side: str = "left"
) -> tuple[float, float, float]:
    """Discrete ``(L1, L2, Linf)`` of nodal errors with cell volume ``dx**ndim``.

    In 1D ``exclusion`` drops that many nodes nearest ``side``.
    """
    e = np.abs(np.asarray(error, dtype=float))
    if exclusion:
        if ndim != 1:
            raise ConfigError("node exclusion is only defined for 1D grids")
        e = e[exclusion:] if side == "left" else e[: len(e) - exclusion]
    if e.size == 0:
        return 0.0, 0.0, 0.0
    vol = dx**ndim
    return float(vol * e.sum()), float(math.sqrt(vol * float(np.sum(e * e)))), float(e.max())


def observed_order(coarse: float, fine: float, ratio: float = 2.0) -> float:
    """``log(e_coarse / e_fine) / log(ratio)``; ``nan`` when either error is zero."""
    if coarse <= 0.0 or fine <= 0.0:
        return float("nan")
    return math.log(coarse / fine) / math.log(ratio)


# }}}


# {{{ runs


@dataclass
class RunResult:
    config: ScenarioConfig
    dx: float
    U: np.ndarray
    grid: Grid1D | Grid2D
    model: Model
    t: float
    steps: int
    wall_time: float
    errors: tuple[float, float, float] | None = None
    files: list[str] = field(default_factory=list)

    def interior(self) -> np.ndarray:
        return self.U[:, self.grid.interior]


def run_scenario(cfg: ScenarioConfig, dx: float | None = None, write: bool = True) -> RunResult:
    """Advance a scenario to ``t_end``; writes CSV and manifest when an output dir is set."""
    setup = build_setup(cfg, dx)
    grid, solver = setup.grid, setup.solver
    start = time.perf_counter()
    U, t, steps = solver.integrate(setup.U0, 0.0, cfg.t_end, max_steps=cfg.max_steps)
    wall = time.perf_counter() - start
    res = RunResult(cfg, grid.dx, U, grid, setup.model, t, steps, wall)
    if setup.exact is not None and math.isclose(t, cfg.t_end):
        k = cfg.spec.error_component
        if grid.ndim == 1:
            err = U[k, grid.interior] - setup.exact(grid.x, t)[k]
        else:
            X, Y = grid.coords
            err = (U[k] - setup.exact(X, Y, t)[k])[grid.interior]
        res.errors = error_norms(err, grid.dx, grid.ndim, cfg.exclusion, cfg.exclusion_side)
    if write and cfg.output_dir:
        res.files = write_outputs(res, Path(cfg.output_dir))
    return res


def field_rows(res: RunResult) -> tuple[list[str], np.ndarray]:
    """Header and rows of the interior field; reactive Euler adds primitives."""
    grid, model = res.grid, res.model
    U = res.interior()
    if grid.ndim == 1:
        cols = [grid.x] + [U[k] for k in range(model.m)]
        return ["x", *model.components], np.column_stack(cols)
    X, Y = grid.coords
    xs, ys = X[grid.interior], Y[grid.interior]
    if hasattr(model, "primitive"):
        w = model.primitive(U)
        return (
            ["x", "y", "rho", "u", "v", "p", "Y", "E"],
            np.column_stack([xs, ys, w.rho, w.u, w.v, w.p, w.Y, U[3]]),
        )
    return ["x", "y", *model.components], np.column_stack([xs, ys, *U])


def write_outputs(res: RunResult, out: Path) -> list[str]:
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{res.config.problem}_dx{_spacing_label(res.dx).replace('/', '-')}"
    header, rows = field_rows(res)
    csv_path = out / f"{stem}.csv"
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows([[repr(float(v)) for v in row] for row in rows])
    manifest = {
        "version": __version__,
        "config": res.config.to_dict(),
        "model": res.model.describe(),
        "dx": res.dx,
        "t_final": res.t,
        "steps": res.steps,
        "wall_time_s": round(res.wall_time, 3),
        "errors": None if res.errors is None else dict(zip(("L1", "L2", "Linf"), res.errors)),
        "field_csv": csv_path.name,
    }
    man_path = out / f"{stem}_manifest.json"
    man_path.write_text(json.dumps(manifest, indent=2, default=_jsonable))
    return [str(csv_path), str(man_path)]


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return str(obj)


# }}}


# {{{ convergence


@dataclass
class ConvergenceReport:
    problem: str
    dx: list[float]
    errors: list[tuple[float, float, float]]

    @property
    def orders(self) -> list[tuple[float, float, float]]:
        """Observed orders for consecutive pairs; ``nan`` unless dx halves."""
        out = []
        for k in range(1, len(self.dx)):
            ratio = self.dx[k - 1] / self.dx[k]
            if not math.isclose(ratio, 2.0, rel_tol=1e-9):
                out.append((float("nan"),) * 3)
                continue
            out.append(
                tuple(observed_order(c, f) for c, f in zip(self.errors[k - 1], self.errors[k]))
            )
        return out

    def rows(self) -> list[dict]:
        orders = [None] + self.orders
        rows = []
        for dx, err, od in zip(self.dx, self.errors, orders):
            row = {"dx": dx, "L1": err[0], "L2": err[1], "Linf": err[2]}
            row.update(
                {"L1_order": None, "L2_order": None, "Linf_order": None}
                if od is None
                else {"L1_order": od[0], "L2_order": od[1], "Linf_order": od[2]}
            )
            rows.append(row)
        return rows

    def table(self) -> str:
        head = f"{'dx':<8}{'L1 error':>11}{'order':>7}{'L2 error':>11}{'order':>7}{'Linf error':>12}{'order':>7}"
        lines = [head]
        for r in self.rows():
            parts = [f"{_spacing_label(r['dx']):<8}"]
            for key, width in (("L1", 11), ("L2", 11), ("Linf", 12)):
                o = r[f"{key}_order"]
                parts.append(f"{r[key]:>{width}.2e}")
                parts.append(f"{'':>7}" if o is None else f"{o:>7.2f}")
            lines.append("".join(parts))
        return "\n".join(lines)

    def write_csv(self, path: Path) -> None:
        with path.open("w", newline="") as fh:
            w = csv.DictWriter(fh, ["dx", "L1", "L1_order", "L2", "L2_order", "Linf", "Linf_order"])
            w.writeheader()
            for r in self.rows():
                w.writerow({k: ("" if v is None else v) for k, v in r.items()})


def convergence_study(cfg: ScenarioConfig, write_fields: bool = False) -> ConvergenceReport:
    """Run every refinement level and collect norms and orders."""
    if not cfg.refinements:
        raise ConfigError("convergence study needs a refinement list")
    if cfg.spec.exact is None and cfg.problem not in ("example2", "example3"):
        raise ConfigError(f"{cfg.problem} has no exact solution")
    errs = []
    for dx in cfg.refinements:
        res = run_scenario(cfg, dx, write=write_fields)
        if res.errors is None:
            raise ConfigError(f"run at dx = {dx} stopped before t_end (max_steps?)")
        log.info("%s dx=%s L1=%.3e", cfg.problem, _spacing_label(dx), res.errors[0])
        errs.append(res.errors)
    report = ConvergenceReport(cfg.problem, list(cfg.refinements), errs)
    if cfg.output_dir:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        report.write_csv(out / f"{cfg.problem}_convergence.csv")
        (out / f"{cfg.problem}_convergence.txt").write_text(report.table() + "\n")
        (out / f"{cfg.problem}_convergence_manifest.json").write_text(
            json.dumps({"version": __version__, "config": cfg.to_dict()}, indent=2, default=_jsonable)
        )
    return report


# }}}
