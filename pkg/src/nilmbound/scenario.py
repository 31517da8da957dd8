"""Scenario files: one YAML document that drives every CLI workflow.

Top-level fields (all but ``catalog``, ``noise`` and ``grid`` are optional)::

    catalog: demo_catalog.yaml       # path relative to the scenario, or an inline list
    schedule: [2.2, 3.1, 0.7]        # true / evaluated start times
    noise: {kind: gaussian, scale: 0.1}
    grid: {start: 0.0, step: 0.5, end: 10.0}   # or {times: [...]}
    weights: [1.0, 1.0, 1.0]
    feasible: {lower: [0, 0, 0], upper: [8, 8, 8], horizon: 10.0}
    quadrature: {panel_order: 16, tolerance: 1.0e-10}
    bias: {A: [[...]], b: [...]}     # or {empirical: {trials: 200, seed: 0}}
    sweep: {axes: [0, 1], fixed: [0, 0, 0], range_i: [0, 8], range_j: [0, 8], resolution: 80, cap: 1.0e6}
    ascent: {starts: 20, seed: 0, ...}          # any AscentConfig field
    estimator: {lattice_step: 0.05, tolerance: 1.0e-4}
    simulate: {trials: 500, seed: 1}
    outputs: {bound: out/bound.json, ...}       # relative to the scenario file
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import _yaml
from .bounds import AffineBias, as_weights
from .correlation import QuadratureSpec, SamplingGrid
from .errors import CatalogError, InfeasibleSetError, ValidationError
from .noise import NoiseModel
from .scheduler import AscentConfig, FeasibleSet, ScheduleProblem
from .signatures import SignatureCatalog, catalog_from_records, load_catalog
from .simulate import EstimatorConfig

__all__ = ["Scenario", "parse_scenario", "load_scenario", "SweepSpec"]

_TOP = {
    "catalog", "schedule", "noise", "grid", "weights", "feasible", "quadrature", "bias",
    "sweep", "ascent", "estimator", "simulate", "outputs",
}
_OUTPUTS = {"bound", "sweep", "schedule", "simulate", "trials", "trace"}


@dataclass(frozen=True)
class SweepSpec:
    axes: tuple = (0, 1)
    fixed: tuple | None = None
    range_i: tuple | None = None
    range_j: tuple | None = None
    resolution: int = 80
    cap: float = 1e6


@dataclass(frozen=True)
class Scenario:
    catalog: SignatureCatalog
    noise: NoiseModel
    grid: SamplingGrid
    tau: np.ndarray | None = None
    weights: np.ndarray | None = None
    feasible: FeasibleSet | None = None
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    bias: object = None
    sweep: SweepSpec = field(default_factory=SweepSpec)
    ascent: AscentConfig = field(default_factory=AscentConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    trials: int = 500
    seed: int = 0
    outputs: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    def problem(self, flavor="discrete") -> ScheduleProblem:
        return ScheduleProblem(
            self.catalog, self.feasible, self.grid, self.weights, self.noise, self.quadrature, flavor
        )

    def output_path(self, name):
        value = self.outputs.get(name)
        return None if value is None else (self.base_dir / value)


def _int(record, key, path, default):
    if key not in record:
        return default
    value = record[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise CatalogError(f"expected an integer, got {value!r}", record.where(key, path))
    return value


def _grid(raw, root):
    rec = _yaml.require_mapping(raw, "grid", root, "grid")
    if "times" in rec:
        _yaml.reject_unknown(rec, {"times"}, "grid")
        times = _yaml.real_list(rec, "times", "grid")
        return SamplingGrid(times)
    _yaml.reject_unknown(rec, {"start", "step", "end"}, "grid")
    return SamplingGrid.uniform(
        _yaml.real(rec, "start", "grid"),
        _yaml.real(rec, "step", "grid", positive=True),
        _yaml.real(rec, "end", "grid"),
    )


def _config(cls, raw, path, root):
    rec = _yaml.require_mapping(raw, path, root, path)
    names = {f.name for f in fields(cls)}
    _yaml.reject_unknown(rec, names, path)
    kwargs = {}
    for name in rec:
        value = rec[name]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise CatalogError(f"expected a number, got {value!r}", rec.where(name, path))
        kwargs[name] = value
    return cls(**kwargs)


def parse_scenario(text: str, base_dir=".") -> Scenario:
    base_dir = Path(base_dir)
    root = _yaml.require_mapping(_yaml.load(text), "scenario")
    _yaml.reject_unknown(root, _TOP, "scenario")
    try:
        return _build(root, base_dir)
    except (CatalogError, InfeasibleSetError):
        raise
    except ValidationError as exc:
        raise CatalogError(str(exc), "scenario") from None


def _build(root, base_dir):
    raw_catalog = _yaml.require(root, "catalog", "scenario")
    if isinstance(raw_catalog, str):
        try:
            catalog = load_catalog(base_dir / raw_catalog)
        except OSError as exc:
            raise CatalogError(f"cannot read catalog: {exc.strerror}", root.where("catalog", "scenario")) from None
    else:
        catalog = catalog_from_records(raw_catalog, "catalog")
    n = len(catalog)

    noise_rec = _yaml.require_mapping(_yaml.require(root, "noise", "scenario"), "noise", root, "noise")
    _yaml.reject_unknown(noise_rec, {"kind", "scale"}, "noise")
    noise = NoiseModel(_yaml.require(noise_rec, "kind", "noise"), _yaml.real(noise_rec, "scale", "noise"))

    grid = _grid(_yaml.require(root, "grid", "scenario"), root)

    tau = np.array(_yaml.real_list(root, "schedule", "scenario", n)) if "schedule" in root else None
    weights = as_weights(_yaml.real_list(root, "weights", "scenario", n) if "weights" in root else None, n)

    if "feasible" in root:
        rec = _yaml.require_mapping(root["feasible"], "feasible", root, "feasible")
        _yaml.reject_unknown(rec, {"lower", "upper", "horizon"}, "feasible")
        horizon = _yaml.real(rec, "horizon", "feasible") if "horizon" in rec else None
        feasible = FeasibleSet.for_catalog(
            catalog,
            _yaml.real_list(rec, "lower", "feasible", n),
            _yaml.real_list(rec, "upper", "feasible", n),
            horizon,
        )
    else:
        t0, t1 = float(grid.times[0]), float(grid.times[-1])
        feasible = FeasibleSet.for_catalog(catalog, t0, t1, horizon=t1)
    feasible.effective_bounds()

    quadrature = _config(QuadratureSpec, root["quadrature"], "quadrature", root) if "quadrature" in root else QuadratureSpec()
    ascent = _config(AscentConfig, root["ascent"], "ascent", root) if "ascent" in root else AscentConfig()
    estimator = _config(EstimatorConfig, root["estimator"], "estimator", root) if "estimator" in root else EstimatorConfig()

    bias = None
    if "bias" in root:
        rec = _yaml.require_mapping(root["bias"], "bias", root, "bias")
        if "empirical" in rec:
            _yaml.reject_unknown(rec, {"empirical"}, "bias")
            emp = _yaml.require_mapping(rec["empirical"], "bias.empirical", rec, "empirical")
            _yaml.reject_unknown(emp, {"trials", "seed", "step"}, "bias.empirical")
            bias = {
                "empirical": {
                    "trials": _int(emp, "trials", "bias.empirical", 200),
                    "seed": _int(emp, "seed", "bias.empirical", 0),
                    "step": _yaml.real(emp, "step", "bias.empirical") if "step" in emp else None,
                }
            }
        else:
            _yaml.reject_unknown(rec, {"A", "b"}, "bias")
            a = _yaml.require(rec, "A", "bias")
            if not isinstance(a, list) or len(a) != n:
                raise CatalogError(f"A must be a {n}x{n} list of rows", rec.where("A", "bias"))
            b = _yaml.real_list(rec, "b", "bias", n) if "b" in rec else [0.0] * n
            bias = AffineBias(np.array(a, dtype=float), np.array(b))

    sweep = SweepSpec()
    if "sweep" in root:
        rec = _yaml.require_mapping(root["sweep"], "sweep", root, "sweep")
        _yaml.reject_unknown(rec, {"axes", "fixed", "range_i", "range_j", "resolution", "cap"}, "sweep")
        axes = tuple(int(v) for v in _yaml.real_list(rec, "axes", "sweep", 2)) if "axes" in rec else (0, 1)
        sweep = SweepSpec(
            axes=axes,
            fixed=tuple(_yaml.real_list(rec, "fixed", "sweep", n)) if "fixed" in rec else None,
            range_i=tuple(_yaml.real_list(rec, "range_i", "sweep", 2)) if "range_i" in rec else None,
            range_j=tuple(_yaml.real_list(rec, "range_j", "sweep", 2)) if "range_j" in rec else None,
            resolution=_int(rec, "resolution", "sweep", 80),
            cap=_yaml.real(rec, "cap", "sweep", positive=True) if "cap" in rec else 1e6,
        )

    trials, seed = 500, 0
    if "simulate" in root:
        rec = _yaml.require_mapping(root["simulate"], "simulate", root, "simulate")
        _yaml.reject_unknown(rec, {"trials", "seed"}, "simulate")
        trials = _int(rec, "trials", "simulate", 500)
        seed = _int(rec, "seed", "simulate", 0)

    outputs = {}
    if "outputs" in root:
        rec = _yaml.require_mapping(root["outputs"], "outputs", root, "outputs")
        _yaml.reject_unknown(rec, _OUTPUTS, "outputs")
        outputs = {k: str(v) for k, v in rec.items()}

    return Scenario(
        catalog=catalog, noise=noise, grid=grid, tau=tau, weights=weights, feasible=feasible,
        quadrature=quadrature, bias=bias, sweep=sweep, ascent=ascent, estimator=estimator,
        trials=trials, seed=seed, outputs=outputs, base_dir=base_dir,
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise CatalogError(f"cannot read scenario: {exc.strerror}", str(path)) from None
    return parse_scenario(text, path.parent)
