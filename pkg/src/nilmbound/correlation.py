"""Cross-correlation matrices of shifted signature derivatives.

The discrete matrix on sample times ``t_l`` is

    R_d[i, j] = sum_l f_i'(t_l - tau_i) f_j'(t_l - tau_j),

i.e. the Gram matrix ``M.T @ M`` with ``M[l, i] = f_i'(t_l - tau_i)``.  Its
continuous counterpart replaces the sum by an integral over the real line.
For uniform sampling with spacing ``d``, ``d * R_d`` is a Riemann sum for the
continuous matrix.

Both matrices depend on ``tau_i`` only through column/row ``i``, so each
partial derivative ``dR/dtau_i`` is nonzero on row and column ``i`` only:

    dR[i, i] = -2 sum_l f_i''(t_l - tau_i) f_i'(t_l - tau_i)
    dR[i, j] = dR[j, i] = -sum_l f_i''(t_l - tau_i) f_j'(t_l - tau_j),  j != i

(``l`` runs over samples, ``j`` over appliances).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

from .errors import QuadratureError, ValidationError
from .signatures import SignatureCatalog

__all__ = [
    "Flavor",
    "SamplingGrid",
    "QuadratureSpec",
    "CorrelationMatrix",
    "as_schedule",
    "derivative_samples",
    "r_discrete",
    "r_continuous",
    "r_discrete_partial",
    "r_continuous_partial",
    "r_discrete_partials",
    "r_continuous_partials",
]

SYMMETRY_ATOL = 1e-12
PSD_RTOL = 1e-10


class Flavor(str, Enum):
    DISCRETE = "discrete"
    CONTINUOUS = "continuous"


@dataclass(frozen=True)
class SamplingGrid:
    """Strictly increasing sample times."""

    times: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).ravel()
        if times.size == 0:
            raise ValidationError("sampling grid needs at least one sample time")
        if not np.all(np.isfinite(times)):
            raise ValidationError("sampling times must be finite")
        if np.any(np.diff(times) <= 0):
            raise ValidationError("sampling times must be strictly increasing")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)

    @classmethod
    def uniform(cls, start, step, end):
        """Samples ``start, start + step, ...`` up to and including ``end``."""
        if step <= 0:
            raise ValidationError(f"grid step must be positive, got {step}")
        count = int(math.floor((end - start) / step + 1e-9)) + 1
        return cls(start + step * np.arange(count))

    @classmethod
    def linspace(cls, start, end, count):
        return cls(np.linspace(start, end, count))

    def __len__(self):
        return self.times.size

    @property
    def spacing(self) -> float:
        """Sample spacing (mean spacing for non-uniform grids, 1 for a single sample)."""
        if self.times.size < 2:
            return 1.0
        return float((self.times[-1] - self.times[0]) / (self.times.size - 1))

    @property
    def is_uniform(self) -> bool:
        if self.times.size < 3:
            return True
        d = np.diff(self.times)
        return bool(np.ptp(d) <= 1e-9 * abs(d.mean()))

    def to_record(self) -> dict:
        if self.is_uniform and self.times.size >= 2:
            return {"start": float(self.times[0]), "step": self.spacing, "end": float(self.times[-1])}
        return {"times": self.times.tolist()}

    def __eq__(self, other):
        return isinstance(other, SamplingGrid) and np.array_equal(self.times, other.times)

    def __hash__(self):
        return hash(self.times.tobytes())


@dataclass(frozen=True)
class QuadratureSpec:
    """Composite Gauss-Legendre rule: ``panel_order`` nodes per panel.

    Panels are bounded by the shifted breakpoints of both integrand factors.
    The result is accepted once bisecting every panel changes it by at most
    ``tolerance * max(1, |value|)``; at most ``max_refinements`` bisections.
    """

    panel_order: int = 16
    tolerance: float = 1e-10
    max_refinements: int = 6

    def __post_init__(self):
        if self.panel_order < 1:
            raise ValidationError("panel_order must be at least 1")
        if not self.tolerance > 0:
            raise ValidationError("quadrature tolerance must be positive")
        if self.max_refinements < 0:
            raise ValidationError("max_refinements must be non-negative")

    def to_record(self) -> dict:
        return {"panel_order": self.panel_order, "tolerance": self.tolerance}


@lru_cache(maxsize=32)
def _gauss_legendre(order):
    return np.polynomial.legendre.leggauss(order)


@dataclass(frozen=True)
class CorrelationMatrix:
    matrix: np.ndarray
    flavor: Flavor
    smallest_eigenvalue: float = field(init=False)
    largest_eigenvalue: float = field(init=False)
    condition_estimate: float = field(init=False)

    def __post_init__(self):
        r = np.array(self.matrix, dtype=float)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise ValidationError(f"correlation matrix must be square, got shape {r.shape}")
        r.setflags(write=False)
        object.__setattr__(self, "matrix", r)
        object.__setattr__(self, "flavor", Flavor(self.flavor))
        eig = np.linalg.eigvalsh(r) if r.size else np.zeros(0)
        lo = float(eig[0]) if eig.size else 0.0
        hi = float(eig[-1]) if eig.size else 0.0
        object.__setattr__(self, "smallest_eigenvalue", lo)
        object.__setattr__(self, "largest_eigenvalue", hi)
        cond = hi / lo if lo > 0 else math.inf
        object.__setattr__(self, "condition_estimate", cond)

    @property
    def norm(self) -> float:
        """Spectral norm."""
        return max(abs(self.smallest_eigenvalue), abs(self.largest_eigenvalue))

    @property
    def n(self):
        return self.matrix.shape[0]

    def is_symmetric(self, atol=SYMMETRY_ATOL) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.T), initial=0.0) <= atol * max(1.0, self.norm))

    def is_psd(self, rtol=PSD_RTOL) -> bool:
        return self.smallest_eigenvalue >= -rtol * self.norm


def as_schedule(tau, n) -> np.ndarray:
    tau = np.asarray(tau, dtype=float).ravel()
    if tau.size != n:
        raise ValidationError(f"schedule has {tau.size} entries, catalog has {n} signatures")
    if not np.all(np.isfinite(tau)):
        raise ValidationError("schedule entries must be finite")
    return tau


def _check_index(i, n):
    if not (isinstance(i, (int, np.integer)) and 0 <= i < n):
        raise ValidationError(f"appliance index {i!r} out of range 0..{n - 1}")
    return int(i)


def derivative_samples(catalog: SignatureCatalog, tau, grid: SamplingGrid, order=1) -> np.ndarray:
    """``k x n`` matrix of ``f_i^(order)(t_l - tau_i)``."""
    tau = as_schedule(tau, len(catalog))
    t = grid.times
    return np.column_stack([sig.eval(t - s, order) for sig, s in zip(catalog, tau)])


def _symmetrize(a):
    return 0.5 * (a + a.T)


def r_discrete(catalog: SignatureCatalog, tau, grid: SamplingGrid) -> CorrelationMatrix:
    m = derivative_samples(catalog, tau, grid, 1)
    return CorrelationMatrix(_symmetrize(m.T @ m), Flavor.DISCRETE)


def r_discrete_partials(catalog: SignatureCatalog, tau, grid: SamplingGrid) -> np.ndarray:
    """All partial derivatives stacked: ``out[i] = dR_d / dtau_i``."""
    m1 = derivative_samples(catalog, tau, grid, 1)
    m2 = derivative_samples(catalog, tau, grid, 2)
    cross = m2.T @ m1  # cross[i, j] = sum_l f_i'' f_j'
    n = m1.shape[1]
    out = np.zeros((n, n, n))
    for i in range(n):
        out[i, i, :] = -cross[i]
        out[i, :, i] = -cross[i]
        out[i, i, i] = -2.0 * cross[i, i]
    return out


def r_discrete_partial(catalog: SignatureCatalog, tau, grid: SamplingGrid, i: int) -> np.ndarray:
    i = _check_index(i, len(catalog))
    m1 = derivative_samples(catalog, tau, grid, 1)
    t = grid.times
    tau = np.asarray(tau, dtype=float)
    d2 = catalog[i].eval(t - tau[i], 2)
    row = -(d2 @ m1)
    n = m1.shape[1]
    out = np.zeros((n, n))
    out[i, :] = row
    out[:, i] = row
    out[i, i] = 2.0 * row[i]
    return out


def _panel_edges(sig_a, shift_a, sig_b, shift_b):
    lo = max(shift_a, shift_b)
    hi = min(shift_a + sig_a.duration, shift_b + sig_b.duration)
    if not hi > lo:
        return None
    pts = np.concatenate([sig_a.breakpoints() + shift_a, sig_b.breakpoints() + shift_b])
    pts = pts[(pts > lo) & (pts < hi)]
    edges = np.unique(np.concatenate([[lo], pts, [hi]]))
    # drop slivers produced by floating-point near-coincidences
    edges = edges[np.concatenate([[True], np.diff(edges) > 1e-14 * max(1.0, abs(hi))])]
    edges[-1] = hi
    return edges


def _composite(edges, integrand, order):
    x, w = _gauss_legendre(order)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (a + b) * 0.5 + half * x
    return float(np.sum(half * w * integrand(nodes)))


def _bisect(edges):
    mids = 0.5 * (edges[:-1] + edges[1:])
    out = np.empty(edges.size + mids.size)
    out[0::2] = edges
    out[1::2] = mids
    return out


def cross_integral(sig_a, shift_a, order_a, sig_b, shift_b, order_b, quadrature=None) -> float:
    """``integral f_a^(order_a)(t - shift_a) f_b^(order_b)(t - shift_b) dt`` over the real line.

    Returns exactly 0.0 when the shifted supports are disjoint.
    """
    quadrature = quadrature or QuadratureSpec()
    edges = _panel_edges(sig_a, shift_a, sig_b, shift_b)
    if edges is None:
        return 0.0

    def integrand(t):
        return sig_a.eval(t - shift_a, order_a) * sig_b.eval(t - shift_b, order_b)

    coarse = _composite(edges, integrand, quadrature.panel_order)
    err = math.inf
    for _ in range(quadrature.max_refinements + 1):
        edges = _bisect(edges)
        fine = _composite(edges, integrand, quadrature.panel_order)
        err = abs(fine - coarse)
        if err <= quadrature.tolerance * max(1.0, abs(fine)):
            return fine
        coarse = fine
    raise QuadratureError("quadrature did not converge within the refinement budget", err)


def r_continuous(catalog: SignatureCatalog, tau, quadrature: QuadratureSpec | None = None) -> CorrelationMatrix:
    tau = as_schedule(tau, len(catalog))
    n = len(catalog)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            val = cross_integral(catalog[i], tau[i], 1, catalog[j], tau[j], 1, quadrature)
            out[i, j] = out[j, i] = val
    return CorrelationMatrix(out, Flavor.CONTINUOUS)


def r_continuous_partial(catalog: SignatureCatalog, tau, quadrature: QuadratureSpec | None, i: int) -> np.ndarray:
    i = _check_index(i, len(catalog))
    tau = as_schedule(tau, len(catalog))
    n = len(catalog)
    out = np.zeros((n, n))
    for j in range(n):
        if j == i:
            # -2 * integral of f_i'' f_i' = -[f_i'^2] over the full support, and
            # f_i' vanishes at both ends for every C1 signature
            continue
        val = -cross_integral(catalog[i], tau[i], 2, catalog[j], tau[j], 1, quadrature)
        out[i, j] = out[j, i] = val
    return out


def r_continuous_partials(catalog: SignatureCatalog, tau, quadrature: QuadratureSpec | None = None) -> np.ndarray:
    return np.stack([r_continuous_partial(catalog, tau, quadrature, i) for i in range(len(catalog))])
