"""Noisy aggregate measurements and a maximum-likelihood NILM attacker.

Measurements follow ``y_l = sum_i f_i(t_l - tau_i) + w_l`` with i.i.d. noise.
The attacker maximizes the exact likelihood: exhaustive search over a lattice
covering the search box, then coordinate-wise golden-section refinement (and a
Gauss-Newton polish for Gaussian noise).  Monte Carlo runs of the attacker give
an empirical weighted MSE to hold against the Cramer-Rao bound.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bounds import BoundResult, EmpiricalBias, as_weights, bound_unbiased
from .correlation import SamplingGrid, as_schedule, derivative_samples, r_discrete
from .errors import ValidationError
from .noise import NoiseKind, NoiseModel
from .scheduler import FeasibleSet
from .signatures import SignatureCatalog

__all__ = [
    "MeasurementSet",
    "EstimatorConfig",
    "EstimatorReport",
    "aggregate",
    "generate",
    "ml_estimate",
    "monte_carlo",
    "empirical_bias",
    "default_search_box",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def aggregate(catalog: SignatureCatalog, tau, times) -> np.ndarray:
    """Noiseless total consumption at ``times``."""
    tau = as_schedule(tau, len(catalog))
    times = np.asarray(times, dtype=float)
    total = np.zeros(times.shape)
    for sig, s in zip(catalog, tau):
        total += sig.eval(times - s, 0)
    return total


@dataclass(frozen=True)
class MeasurementSet:
    grid: SamplingGrid
    y: np.ndarray
    tau: np.ndarray
    seed: int | None
    clean: np.ndarray

    def trace_csv(self) -> str:
        """``t, noiseless, noisy`` time series, one row per sample."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "noiseless", "noisy"])
        for row in zip(self.grid.times, self.clean, self.y):
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def generate(catalog, tau, grid: SamplingGrid, noise: NoiseModel, seed, noiseless=False) -> MeasurementSet:
    tau = as_schedule(tau, len(catalog))
    clean = aggregate(catalog, tau, grid.times)
    y = clean.copy() if noiseless else clean + noise.sample(seed, clean.size)
    return MeasurementSet(grid, y, tau, seed, clean)


@dataclass(frozen=True)
class EstimatorConfig:
    lattice_step: float = 0.05
    tolerance: float = 1e-4
    max_sweeps: int = 200
    polish_steps: int = 5
    chunk_elements: int = 8_000_000

    def __post_init__(self):
        if not (self.lattice_step > 0 and self.tolerance > 0 and self.max_sweeps > 0):
            raise ValidationError("estimator config entries must be positive")


def default_search_box(catalog: SignatureCatalog, grid: SamplingGrid) -> FeasibleSet:
    """Start times for which every load lies inside the sampled horizon."""
    t0, t1 = float(grid.times[0]), float(grid.times[-1])
    return FeasibleSet.for_catalog(catalog, t0, t1, horizon=t1)


def _lattice_axis(lo, hi, step):
    if hi <= lo:
        return np.array([lo])
    count = int(round((hi - lo) / step))
    return np.linspace(lo, hi, max(count, 1) + 1)


def _lattice_search(y, templates, noise, chunk_elements):
    """Index of the best lattice point; ``templates[i]`` is ``(m_i, k)``."""
    n = len(templates)
    shape = tuple(t.shape[0] for t in templates)
    best_val, best_idx = math.inf, None

    if noise.kind is NoiseKind.GAUSSIAN:
        # ||y - sum_i F_i||^2 = const + sum_i (||F_i||^2 - 2 y.F_i) + 2 sum_{i<j} F_i.F_j
        unary = [np.einsum("mk,mk->m", f, f) - 2.0 * (f @ y) for f in templates]
        pair = {(a, b): 2.0 * templates[a] @ templates[b].T for a in range(n) for b in range(a + 1, n)}
        rest = math.prod(shape[1:])
        chunk = max(1, chunk_elements // max(rest, 1))
        for start in range(0, shape[0], chunk):
            sl = slice(start, min(start + chunk, shape[0]))
            sub = (sl.stop - sl.start,) + shape[1:]
            total = np.zeros(sub)
            for a in range(n):
                u = unary[a][sl] if a == 0 else unary[a]
                total += u.reshape([-1 if d == a else 1 for d in range(n)])
            for (a, b), g in pair.items():
                g = g[sl] if a == 0 else g
                total += g.reshape([g.shape[0] if d == a else g.shape[1] if d == b else 1 for d in range(n)])
            flat = int(np.argmin(total))
            if total.flat[flat] < best_val:
                best_val = float(total.flat[flat])
                local = np.unravel_index(flat, sub)
                best_idx = (local[0] + start,) + tuple(local[1:])
        return best_idx

    k = y.size
    rest = math.prod(shape[1:]) * k
    chunk = max(1, chunk_elements // max(rest, 1))
    for start in range(0, shape[0], chunk):
        sl = slice(start, min(start + chunk, shape[0]))
        sub = (sl.stop - sl.start,) + shape[1:]
        resid = np.broadcast_to(y, sub + (k,)).copy()
        for a in range(n):
            f = templates[a][sl] if a == 0 else templates[a]
            resid -= f.reshape([f.shape[0] if d == a else 1 for d in range(n)] + [k])
        nll = noise.neg_log_likelihood(resid, axis=-1)
        flat = int(np.argmin(nll))
        if nll.flat[flat] < best_val:
            best_val = float(nll.flat[flat])
            local = np.unravel_index(flat, sub)
            best_idx = (local[0] + start,) + tuple(local[1:])
    return best_idx


def _golden_min(fun, a, b, xtol):
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > xtol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fun(d)
    return (c, fc) if fc <= fd else (d, fd)


def ml_estimate(
    measurements: MeasurementSet,
    catalog: SignatureCatalog,
    noise: NoiseModel,
    search: FeasibleSet,
    config: EstimatorConfig | None = None,
) -> np.ndarray:
    """Maximum-likelihood start times from one measurement set."""
    config = config or EstimatorConfig()
    n = len(catalog)
    if search.n != n:
        raise ValidationError("search box dimension does not match the catalog")
    lo, hi = search.effective_bounds()
    t = measurements.grid.times
    y = np.asarray(measurements.y, dtype=float)

    axes = [_lattice_axis(a, b, config.lattice_step) for a, b in zip(lo, hi)]
    templates = [np.stack([sig.eval(t - s, 0) for s in ax]) for sig, ax in zip(catalog, axes)]
    idx = _lattice_search(y, templates, noise, config.chunk_elements)
    tau = np.array([ax[i] for ax, i in zip(axes, idx)])

    def nll(x):
        return float(noise.neg_log_likelihood(y - aggregate(catalog, x, t)))

    current = nll(tau)
    spacing = np.array([ax[1] - ax[0] if ax.size > 1 else 0.0 for ax in axes])
    for _ in range(config.max_sweeps):
        moved = 0.0
        for i in range(n):
            if spacing[i] == 0.0:
                continue
            a, b = max(lo[i], tau[i] - spacing[i]), min(hi[i], tau[i] + spacing[i])
            trial = tau.copy()

            def along(x, i=i, trial=trial):
                trial[i] = x
                return nll(trial)

            x, fx = _golden_min(along, a, b, config.tolerance * 1e-2)
            if fx < current:
                moved = max(moved, abs(x - tau[i]))
                tau[i], current = x, fx
        if moved < config.tolerance:
            break

    if noise.kind is NoiseKind.GAUSSIAN:
        # Gauss-Newton polish; coordinate descent crawls when loads overlap
        for _ in range(config.polish_steps):
            resid = y - aggregate(catalog, tau, t)
            jac = derivative_samples(catalog, tau, measurements.grid, 1)  # d(model)/dtau = -f'
            step, *_ = np.linalg.lstsq(jac, -resid, rcond=None)
            cand = np.clip(tau + step, lo, hi)
            fc = nll(cand)
            if not fc < current:
                break
            tau, current = cand, fc
    return tau


@dataclass
class EstimatorReport:
    tau: np.ndarray
    estimates: np.ndarray
    weighted_sq_errors: np.ndarray
    mse: float
    mse_standard_error: float
    bias: np.ndarray
    bias_standard_error: np.ndarray
    trials: int
    seed: int
    weights: np.ndarray | None = None

    @property
    def mean_estimate(self):
        return self.estimates.mean(axis=0)

    def to_record(self) -> dict:
        return {
            "tau": self.tau.tolist(),
            "trials": self.trials,
            "seed": self.seed,
            "weighted_mse": self.mse,
            "weighted_mse_standard_error": self.mse_standard_error,
            "mean_estimate": self.mean_estimate.tolist(),
            "bias": self.bias.tolist(),
            "bias_standard_error": self.bias_standard_error.tolist(),
            "weights": None if self.weights is None else np.asarray(self.weights).tolist(),
            "estimates": self.estimates.tolist(),
        }

    @classmethod
    def from_record(cls, record: dict) -> EstimatorReport:
        tau = np.asarray(record["tau"], dtype=float)
        estimates = np.asarray(record["estimates"], dtype=float).reshape(-1, tau.size)
        err = estimates - tau
        weights = as_weights(record.get("weights"), tau.size)
        wse = err**2 @ weights
        return cls(
            tau=tau,
            estimates=estimates,
            weighted_sq_errors=wse,
            mse=float(record["weighted_mse"]),
            mse_standard_error=float(record["weighted_mse_standard_error"]),
            bias=np.asarray(record["bias"], dtype=float),
            bias_standard_error=np.asarray(record["bias_standard_error"], dtype=float),
            trials=int(record["trials"]),
            seed=record["seed"],
            weights=weights,
        )

    def trials_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        n = self.estimates.shape[1]
        writer.writerow(["trial"] + [f"tau_hat_{i + 1}" for i in range(n)] + ["weighted_sq_error"])
        for idx, (est, err) in enumerate(zip(self.estimates, self.weighted_sq_errors)):
            writer.writerow([idx] + [repr(float(v)) for v in est] + [repr(float(err))])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.to_record(), indent=2)


def _trial_seeds(seed, trials):
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(trials)]


def _report(tau, estimates, weights, seed):
    err = estimates - tau
    wse = err**2 @ weights
    trials = estimates.shape[0]
    return EstimatorReport(
        tau=tau,
        estimates=estimates,
        weighted_sq_errors=wse,
        mse=float(np.mean(wse)),
        mse_standard_error=float(np.std(wse, ddof=1) / math.sqrt(trials)),
        bias=err.mean(axis=0),
        bias_standard_error=err.std(axis=0, ddof=1) / math.sqrt(trials),
        trials=trials,
        seed=seed,
        weights=weights,
    )


def monte_carlo(
    catalog: SignatureCatalog,
    tau,
    grid: SamplingGrid,
    noise: NoiseModel,
    weights=None,
    trials: int = 100,
    seed: int = 0,
    search: FeasibleSet | None = None,
    config: EstimatorConfig | None = None,
    workers: int = 1,
) -> tuple[EstimatorReport, BoundResult]:
    """Run the ML attacker on ``trials`` independent noise draws.

    Returns the empirical report together with the unbiased bound at the true
    schedule.  Per-trial seeds are spawned from ``seed``, so results do not
    depend on ``workers``.
    """
    if trials < 2:
        raise ValidationError("monte carlo needs at least two trials")
    tau = as_schedule(tau, len(catalog))
    w = as_weights(weights, len(catalog))
    search = search or default_search_box(catalog, grid)
    if not search.contains(tau):
        raise ValidationError("true schedule lies outside the attacker's search box")

    def one(trial_seed):
        meas = generate(catalog, tau, grid, noise, trial_seed)
        return ml_estimate(meas, catalog, noise, search, config)

    seeds = _trial_seeds(seed, trials)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            estimates = np.array(list(pool.map(one, seeds)))
    else:
        estimates = np.array([one(s) for s in seeds])
    report = _report(tau, estimates, w, seed)
    bound = bound_unbiased(r_discrete(catalog, tau, grid), w, noise.fisher_information())
    return report, bound


def empirical_bias(
    catalog: SignatureCatalog,
    grid: SamplingGrid,
    noise: NoiseModel,
    search: FeasibleSet | None = None,
    trials: int = 200,
    seed: int = 0,
    step: float | None = None,
    config: EstimatorConfig | None = None,
) -> EmpiricalBias:
    """Bias model whose mean is the Monte Carlo average of the ML attacker.

    The default finite-difference step is 1% of the mean search-box width.
    """
    search = search or default_search_box(catalog, grid)
    if step is None:
        lo, hi = search.effective_bounds()
        step = 1e-2 * float(np.mean(hi - lo)) or 1e-2

    def mean_fn(tau, n_trials, s):
        report, _ = monte_carlo(catalog, tau, grid, noise, None, n_trials, s, search, config)
        return report.mean_estimate, report.bias_standard_error

    return EmpiricalBias(mean_fn, step, trials, seed)
