"""Privacy-preserving schedule search.

The scheduler maximizes ``trace(Pi R(tau)^-1)`` (the estimation-error lower
bound up to the factor ``1/iw``) over a box of admissible start times using
multistart projected gradient ascent with backtracking.  Schedules at which
``R`` is singular are the best possible outcome: no estimator can resolve the
affected start times, so a start that reaches one stops there.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bounds import (
    BoundResult,
    as_weights,
    bound_asymptotic,
    bound_gradient,
    bound_unbiased,
    trace_objective,
)
from .correlation import Flavor, QuadratureSpec, SamplingGrid, as_schedule, r_continuous, r_discrete
from .errors import (
    GradientUnavailableError,
    InfeasibleSetError,
    NumericalError,
    OptimizationError,
    ValidationError,
)
from .noise import NoiseModel
from .signatures import SignatureCatalog

__all__ = [
    "FeasibleSet",
    "ScheduleProblem",
    "AscentConfig",
    "StartSummary",
    "ScheduleSolution",
    "SweepResult",
    "project",
    "optimize",
    "sweep_2d",
    "grid_search",
]

DEFAULT_CAP = 1e6


@dataclass(frozen=True)
class FeasibleSet:
    """Per-appliance start-time boxes, optionally capped by a common end time.

    With ``horizon`` set, appliance ``i`` must also finish by then, so its
    effective upper bound is ``min(upper[i], horizon - durations[i])``.
    """

    lower: np.ndarray
    upper: np.ndarray
    horizon: float | None = None
    durations: np.ndarray | None = None

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).ravel()
        hi = np.asarray(self.upper, dtype=float).ravel()
        if lo.size != hi.size:
            raise ValidationError("lower and upper bounds differ in length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValidationError("feasible intervals must be finite")
        if np.any(lo > hi):
            raise ValidationError("feasible interval with lower > upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if self.horizon is not None:
            if self.durations is None:
                raise ValidationError("a horizon constraint needs the signature durations")
            d = np.asarray(self.durations, dtype=float).ravel()
            if d.size != lo.size:
                raise ValidationError("durations do not match the number of appliances")
            object.__setattr__(self, "durations", d)
            object.__setattr__(self, "horizon", float(self.horizon))

    @classmethod
    def for_catalog(cls, catalog: SignatureCatalog, lower, upper, horizon=None):
        n = len(catalog)
        lo = np.broadcast_to(np.asarray(lower, dtype=float), (n,))
        hi = np.broadcast_to(np.asarray(upper, dtype=float), (n,))
        return cls(lo, hi, horizon, catalog.durations if horizon is not None else None)

    @property
    def n(self):
        return self.lower.size

    def effective_bounds(self):
        hi = self.upper
        if self.horizon is not None:
            hi = np.minimum(hi, self.horizon - self.durations)
        empty = self.lower > hi
        if np.any(empty):
            idx = int(np.flatnonzero(empty)[0])
            raise InfeasibleSetError(
                f"appliance {idx}: start interval [{self.lower[idx]}, {hi[idx]}] is empty "
                f"after applying the horizon"
            )
        return self.lower, hi

    def contains(self, tau, atol=1e-12) -> bool:
        lo, hi = self.effective_bounds()
        tau = np.asarray(tau, dtype=float)
        return bool(np.all(tau >= lo - atol) and np.all(tau <= hi + atol))

    def to_record(self):
        rec = {"lower": self.lower.tolist(), "upper": self.upper.tolist()}
        if self.horizon is not None:
            rec["horizon"] = self.horizon
        return rec


def project(tau, feasible: FeasibleSet) -> np.ndarray:
    """Euclidean projection onto the box (componentwise clamp)."""
    lo, hi = feasible.effective_bounds()
    tau = as_schedule(tau, feasible.n)
    return np.minimum(np.maximum(tau, lo), hi)


@dataclass(frozen=True)
class ScheduleProblem:
    catalog: SignatureCatalog
    feasible: FeasibleSet
    grid: SamplingGrid | None = None
    weights: np.ndarray | None = None
    noise: NoiseModel | None = None
    quadrature: QuadratureSpec | None = None
    flavor: Flavor = Flavor.DISCRETE

    def __post_init__(self):
        n = len(self.catalog)
        if self.feasible.n != n:
            raise ValidationError(f"feasible set has {self.feasible.n} entries, catalog has {n}")
        object.__setattr__(self, "weights", as_weights(self.weights, n))
        object.__setattr__(self, "flavor", Flavor(self.flavor))
        if self.flavor is Flavor.DISCRETE and self.grid is None:
            raise ValidationError("the discrete flavor needs a sampling grid")

    @property
    def n(self):
        return len(self.catalog)

    @property
    def fisher(self) -> float:
        return 1.0 if self.noise is None else self.noise.fisher_information()

    def with_flavor(self, flavor) -> ScheduleProblem:
        return ScheduleProblem(
            self.catalog, self.feasible, self.grid, self.weights, self.noise, self.quadrature, flavor
        )

    def objective(self, tau) -> float:
        return trace_objective(self.catalog, tau, self.weights, self.grid, self.flavor, self.quadrature)

    def gradient(self, tau) -> np.ndarray:
        return bound_gradient(
            self.catalog, tau, self.grid, self.weights, self.flavor, self.quadrature
        )

    def bound(self, tau, flavor=None, normalize=True) -> BoundResult:
        """Lower bound at ``tau``.

        The continuous flavor is rescaled by the grid spacing when a grid is
        available and ``normalize`` is true, so both flavors live on the same
        scale.
        """
        flavor = Flavor(flavor or self.flavor)
        if flavor is Flavor.DISCRETE:
            r = r_discrete(self.catalog, tau, self.grid)
            return bound_unbiased(r, self.weights, self.fisher)
        rc = r_continuous(self.catalog, tau, self.quadrature)
        spacing = self.grid.spacing if (normalize and self.grid is not None) else None
        return bound_asymptotic(rc, self.weights, self.fisher, spacing)


@dataclass(frozen=True)
class AscentConfig:
    max_iterations: int = 500
    initial_step: float = 1.0
    backtracking: float = 0.5
    sufficient_increase: float = 1e-4
    tolerance: float = 1e-6
    starts: int = 20
    seed: int = 0
    perturbation_radius: float = 1e-3
    max_backtracks: int = 60
    max_perturbations: int = 10
    workers: int = 1

    def __post_init__(self):
        for name in ("max_iterations", "initial_step", "sufficient_increase", "tolerance",
                     "starts", "perturbation_radius", "max_backtracks", "workers"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"ascent config: {name} must be positive")
        if not 0 < self.backtracking < 1:
            raise ValidationError("ascent config: backtracking factor must lie in (0, 1)")

    def to_record(self):
        return dict(self.__dict__)


@dataclass
class StartSummary:
    index: int
    start: np.ndarray
    tau: np.ndarray
    objective: float
    termination: str
    trace: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    gradient_map_norm: float = math.nan

    @property
    def iterations(self):
        return len(self.trace) - 1

    def to_record(self):
        return {
            "index": self.index,
            "start": self.start.tolist(),
            "tau": self.tau.tolist(),
            "objective": _enc(self.objective),
            "termination": self.termination,
            "iterations": self.iterations,
            "gradient_map_norm": _enc(self.gradient_map_norm),
            "trace": [_enc(v) for v in self.trace],
        }


@dataclass
class ScheduleSolution:
    tau: np.ndarray
    objective: float
    bound: float
    trace: list
    start_index: int
    termination: str
    starts: list

    def to_record(self):
        return {
            "tau_star": self.tau.tolist(),
            "objective": _enc(self.objective),
            "bound": _enc(self.bound),
            "termination": self.termination,
            "start_index": self.start_index,
            "objective_trace": [_enc(v) for v in self.trace],
            "per_start_summaries": [s.to_record() for s in self.starts],
        }

    def to_json(self):
        return json.dumps(self.to_record(), indent=2)

    @classmethod
    def from_record(cls, record: dict) -> ScheduleSolution:
        starts = [
            StartSummary(
                index=s["index"],
                start=np.asarray(s["start"], dtype=float),
                tau=np.asarray(s["tau"], dtype=float),
                objective=_dec(s["objective"]),
                termination=s["termination"],
                trace=[_dec(v) for v in s.get("trace", [])],
                gradient_map_norm=_dec(s["gradient_map_norm"]),
            )
            for s in record.get("per_start_summaries", [])
        ]
        return cls(
            tau=np.asarray(record["tau_star"], dtype=float),
            objective=_dec(record["objective"]),
            bound=_dec(record["bound"]),
            trace=[_dec(v) for v in record["objective_trace"]],
            start_index=record["start_index"],
            termination=record["termination"],
            starts=starts,
        )


def _dec(x):
    return float(x)


def _enc(x):
    x = float(x)
    if math.isinf(x):
        return "inf"
    if math.isnan(x):
        return "nan"
    return x


def _ascend(problem: ScheduleProblem, config: AscentConfig, index: int, start) -> StartSummary:
    rng = np.random.default_rng([config.seed, index])
    tau = project(start, problem.feasible)
    f = problem.objective(tau)
    summary = StartSummary(index, np.asarray(start, dtype=float), tau, f, "max-iterations", [f], [tau])
    if math.isinf(f):
        summary.termination = "singular-optimum"
        return summary

    step = config.initial_step
    for _ in range(config.max_iterations):
        try:
            g = problem.gradient(tau)
        except GradientUnavailableError:
            # near-singular: the objective is huge here; nudge the schedule but
            # never accept a point with a smaller objective
            for _ in range(config.max_perturbations):
                cand = project(tau + config.perturbation_radius * rng.standard_normal(tau.size), problem.feasible)
                fc = problem.objective(cand)
                if fc >= f:
                    tau, f = cand, fc
                    summary.trace.append(f)
                    summary.iterates.append(tau)
                    break
            else:
                summary.termination = "near-singular-optimum"
                break
            if math.isinf(f):
                summary.termination = "singular-optimum"
                break
            continue

        gmap = project(tau + g, problem.feasible) - tau
        summary.gradient_map_norm = float(np.linalg.norm(gmap))
        if summary.gradient_map_norm < config.tolerance:
            summary.termination = "converged"
            break

        s = step
        for _ in range(config.max_backtracks):
            cand = project(tau + s * g, problem.feasible)
            d = cand - tau
            fc = problem.objective(cand)
            if fc >= f + config.sufficient_increase * float(g @ d):
                break
            s *= config.backtracking
        else:
            summary.termination = "line-search-exhausted"
            break

        tau, f = cand, fc
        summary.trace.append(f)
        summary.iterates.append(tau)
        if math.isinf(f):
            summary.termination = "singular-optimum"
            break
        if np.linalg.norm(d) <= 1e-14 * (1.0 + np.linalg.norm(tau)):
            summary.termination = "stalled"
            break
        step = s / config.backtracking

    summary.tau = tau
    summary.objective = f
    return summary


def _safe_ascend(problem, config, index, start):
    try:
        return _ascend(problem, config, index, start)
    except NumericalError as exc:
        return StartSummary(index, np.asarray(start, dtype=float), np.asarray(start, dtype=float),
                            math.nan, f"failed: {exc}")


def _map(fn, items, workers):
    if workers <= 1:
        return [fn(*item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda item: fn(*item), items))


def optimize(problem: ScheduleProblem, config: AscentConfig | None = None, starts=None) -> ScheduleSolution:
    """Multistart projected gradient ascent on ``trace(Pi R^-1)``.

    Starts are drawn uniformly from the feasible box with ``config.seed``
    unless given explicitly.  The best start wins; ``+inf`` beats any finite
    objective.
    """
    config = config or AscentConfig()
    lo, hi = problem.feasible.effective_bounds()
    if starts is None:
        rng = np.random.default_rng(config.seed)
        starts = lo + (hi - lo) * rng.random((config.starts, problem.n))
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    runs = _map(
        lambda idx, s: _safe_ascend(problem, config, idx, s),
        list(enumerate(starts)),
        config.workers,
    )
    usable = [run for run in runs if not math.isnan(run.objective)]
    if not usable:
        reasons = "; ".join(run.termination for run in runs)
        raise OptimizationError(f"no start produced a usable objective ({reasons})")
    best = max(usable, key=lambda run: (run.objective, -run.index))
    return ScheduleSolution(
        tau=best.tau,
        objective=best.objective,
        bound=best.objective / problem.fisher,
        trace=best.trace,
        start_index=best.index,
        termination=best.termination,
        starts=runs,
    )


def grid_search(problem: ScheduleProblem, resolution=200):
    """Dense-grid maximization of the objective over the feasible box.

    Intended as an oracle for small ``n``; cost grows as ``resolution ** n``.
    Returns ``(tau, objective)``.
    """
    lo, hi = problem.feasible.effective_bounds()
    axes = [np.linspace(a, b, resolution) if b > a else np.array([a]) for a, b in zip(lo, hi)]
    best_tau, best = None, -math.inf
    for point in np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, problem.n):
        val = problem.objective(point)
        if val > best:
            best, best_tau = val, point
    return best_tau, best


@dataclass
class SweepResult:
    axes: tuple
    grid_i: np.ndarray
    grid_j: np.ndarray
    values: np.ndarray
    fixed: np.ndarray
    flavor: Flavor
    cap: float = DEFAULT_CAP
    spacing: float | None = None

    @property
    def capped(self) -> np.ndarray:
        return ~np.isfinite(self.values) | (self.values > self.cap)

    @property
    def display_values(self) -> np.ndarray:
        """Values clipped at the cap (``+inf`` becomes the cap as well)."""
        return np.minimum(self.values, self.cap)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        i, j = self.axes
        writer.writerow([f"tau{i}\\tau{j}"] + [repr(float(v)) for v in self.grid_j])
        for a, row in zip(self.grid_i, self.values):
            cells = ["inf" if math.isinf(v) else repr(float(min(v, self.cap))) for v in row]
            writer.writerow([repr(float(a))] + cells)
        return buf.getvalue()

    def metadata(self) -> dict:
        rows, cols = np.nonzero(self.capped)
        return {
            "axes": list(self.axes),
            "flavor": Flavor(self.flavor).value,
            "fixed": self.fixed.tolist(),
            "cap": self.cap,
            "spacing": self.spacing,
            "shape": list(self.values.shape),
            "capped_count": int(rows.size),
            "capped_cells": [[int(r), int(c)] for r, c in zip(rows, cols)],
            "singular_count": int(np.sum(np.isinf(self.values))),
        }

    def write(self, path):
        path = Path(path)
        path.write_text(self.to_csv())
        sidecar = path.with_suffix(path.suffix + ".json")
        sidecar.write_text(json.dumps(self.metadata(), indent=2))
        return path, sidecar

    @classmethod
    def read(cls, path) -> SweepResult:
        path = Path(path)
        meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
        rows = list(csv.reader(path.read_text().splitlines()))
        grid_j = np.array([float(v) for v in rows[0][1:]])
        grid_i = np.array([float(r[0]) for r in rows[1:]])
        values = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
        return cls(tuple(meta["axes"]), grid_i, grid_j, values, np.array(meta["fixed"]),
                   Flavor(meta["flavor"]), meta["cap"], meta["spacing"])


def sweep_2d(
    problem: ScheduleProblem,
    i: int,
    j: int,
    fixed,
    grid_i,
    grid_j,
    flavor=None,
    cap: float = DEFAULT_CAP,
    normalize: bool = True,
    workers: int = 1,
    progress=None,
) -> SweepResult:
    """Bound surface over start times ``tau_i x tau_j`` with the rest held at ``fixed``.

    Cell ``[a, b]`` holds the bound at ``tau_i = grid_i[a]``, ``tau_j = grid_j[b]``.
    Singular cells hold ``+inf``; export clips at ``cap`` and records which
    cells were clipped.
    """
    n = problem.n
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise ValidationError(f"sweep axes must be two distinct indices in 0..{n - 1}, got {i}, {j}")
    fixed = as_schedule(fixed, n)
    grid_i = np.asarray(grid_i, dtype=float).ravel()
    grid_j = np.asarray(grid_j, dtype=float).ravel()
    lo, hi = problem.feasible.effective_bounds()
    for axis, values in ((i, grid_i), (j, grid_j)):
        if values.size == 0 or values.min() < lo[axis] - 1e-9 or values.max() > hi[axis] + 1e-9:
            raise ValidationError(
                f"sweep range for appliance {axis} leaves the feasible interval [{lo[axis]}, {hi[axis]}]"
            )
    flavor = Flavor(flavor or problem.flavor)

    def row(a_idx, a):
        out = np.empty(grid_j.size)
        for b_idx, b in enumerate(grid_j):
            tau = fixed.copy()
            tau[i], tau[j] = a, b
            out[b_idx] = problem.bound(tau, flavor, normalize).value
        if progress is not None:
            progress(a_idx + 1, grid_i.size)
        return out

    values = np.vstack(_map(row, list(enumerate(grid_i)), workers))
    spacing = problem.grid.spacing if (flavor is Flavor.CONTINUOUS and normalize and problem.grid is not None) else None
    return SweepResult((i, j), grid_i, grid_j, values, fixed, flavor, cap, spacing)
